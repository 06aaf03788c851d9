//! Placement objectives: fingerprint ambiguity (`f1`) and summed GDOP (`f2`),
//! with the per-element maps behind them.

use std::collections::HashMap;

use crate::geom::{Grid, Point3, RoomModel, VisibilityMask};
use crate::placement::{check_constraints, visible_at, ConstraintLimits, Lrp, LrpType, Placement};
use crate::{Error, Result, Scalar};

/// Nearest-`N` fingerprint: `(distance bin, type)` pairs in ascending order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Fingerprint {
    entries: Vec<(i64, LrpType)>,
}

impl Fingerprint {
    /// Canonicalizes by sorting.
    pub fn new(mut entries: Vec<(i64, LrpType)>) -> Self {
        entries.sort_unstable();
        Self { entries }
    }

    pub fn entries(&self) -> &[(i64, LrpType)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Distance bin: `d / r_res` rounded half away from zero.
pub fn distance_bin<T: Scalar>(d: T, r_res: T) -> i64 {
    (d / r_res).round().to_i64().unwrap_or(i64::MAX)
}

/// Fingerprint from a visible list sorted nearest-first.
pub fn fingerprint_from_visible<T: Scalar>(visible: &[(Lrp<T>, T)], n: usize, r_res: T) -> Result<Fingerprint> {
    if visible.len() < n {
        return Err(Error::InsufficientVisible { visible: visible.len(), required: n });
    }
    Ok(Fingerprint::new(
        visible[..n].iter().map(|(l, d)| (distance_bin(*d, r_res), l.kind)).collect(),
    ))
}

/// Fingerprint of grid center `p_r`: the `n` nearest visible reflectors by
/// true distance, each reduced to its distance bin and type.
pub fn fingerprint<T: Scalar>(
    p_r: Point3<T>,
    pl: &Placement<T>,
    masks: &[VisibilityMask],
    grid: &Grid<T>,
    n: usize,
    r_res: T,
) -> Result<Fingerprint> {
    let visible = crate::placement::visible_lrps(p_r, pl, masks, grid)?;
    fingerprint_from_visible(&visible, n, r_res)
}

/// Fingerprint of every grid element; `None` where fewer than `n` reflectors
/// are visible.
pub fn fingerprint_table<T: Scalar>(
    pl: &Placement<T>,
    masks: &[VisibilityMask],
    grid: &Grid<T>,
    n: usize,
    r_res: T,
) -> Vec<Option<Fingerprint>> {
    (0..grid.len())
        .map(|e| fingerprint_from_visible(&visible_at(e, pl, masks, grid), n, r_res).ok())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AmbiguityClass {
    Unique,
    /// Shares its fingerprint only within one connected region.
    Local,
    /// Shares its fingerprint with elements in another, unconnected region.
    Global,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmbiguityMap {
    pub classes: Vec<AmbiguityClass>,
    /// Fingerprint group of each element, numbered by first occurrence.
    pub groups: Vec<usize>,
}

impl AmbiguityMap {
    /// `(unique, local, global)` element counts.
    pub fn counts(&self) -> (usize, usize, usize) {
        let mut c = (0, 0, 0);
        for k in &self.classes {
            match k {
                AmbiguityClass::Unique => c.0 += 1,
                AmbiguityClass::Local => c.1 += 1,
                AmbiguityClass::Global => c.2 += 1,
            }
        }
        c
    }
}

/// Groups a complete fingerprint table; returns `f1` and the class map.
pub fn ambiguity_from_table<T: Scalar>(table: &[Fingerprint], grid: &Grid<T>) -> (usize, AmbiguityMap) {
    let mut ids: HashMap<&Fingerprint, usize> = HashMap::with_capacity(table.len());
    let mut groups = Vec::with_capacity(table.len());
    let mut members: Vec<Vec<usize>> = Vec::new();
    for (e, fp) in table.iter().enumerate() {
        let next = ids.len();
        let id = *ids.entry(fp).or_insert(next);
        if id == members.len() {
            members.push(Vec::new());
        }
        members[id].push(e);
        groups.push(id);
    }
    let mut classes = vec![AmbiguityClass::Unique; table.len()];
    let mut f1 = 0;
    let mut select = vec![false; table.len()];
    for elems in members.iter().filter(|m| m.len() > 1) {
        f1 += elems.len();
        for &e in elems {
            select[e] = true;
        }
        let regions = count_components(grid, elems, &select);
        let class = if regions > 1 { AmbiguityClass::Global } else { AmbiguityClass::Local };
        for &e in elems {
            classes[e] = class;
            select[e] = false;
        }
    }
    (f1, AmbiguityMap { classes, groups })
}

fn count_components<T: Scalar>(grid: &Grid<T>, elems: &[usize], select: &[bool]) -> usize {
    let mut seen: HashMap<usize, ()> = HashMap::with_capacity(elems.len());
    let mut regions = 0;
    let mut stack = Vec::new();
    for &s in elems {
        if seen.contains_key(&s) {
            continue;
        }
        regions += 1;
        seen.insert(s, ());
        stack.push(s);
        while let Some(e) = stack.pop() {
            for nb in grid.neighbors4(e) {
                if select[nb] && !seen.contains_key(&nb) {
                    seen.insert(nb, ());
                    stack.push(nb);
                }
            }
        }
    }
    regions
}

/// Ambiguity objective `f1`: number of grid elements whose fingerprint is
/// shared with at least one other element.
pub fn ambiguity<T: Scalar>(
    pl: &Placement<T>,
    grid: &Grid<T>,
    masks: &[VisibilityMask],
    n: usize,
    r_res: T,
) -> Result<(usize, AmbiguityMap)> {
    let mut table = Vec::with_capacity(grid.len());
    for e in 0..grid.len() {
        table.push(fingerprint_from_visible(&visible_at(e, pl, masks, grid), n, r_res)?);
    }
    Ok(ambiguity_from_table(&table, grid))
}

/// How the per-element GDOP value is formed from the trace of `(HᵀH)⁻¹`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GdopMode {
    /// `tr((HᵀH)⁻¹) · σ_r²`.
    #[default]
    TraceVariance,
    /// `sqrt(tr((HᵀH)⁻¹)) · σ_r`.
    RootTrace,
}

/// Value returned for singular or ill-conditioned geometry.
pub fn gdop_penalty<T: Scalar>(sigma_r: T) -> T {
    T::of(1e6) * sigma_r * sigma_r
}

fn max_condition<T: Scalar>() -> T {
    T::of(1e12).min(T::one() / (T::of(1e3) * T::epsilon()))
}

/// Fisher information `HᵀH` (symmetric; `[a00, a01, a02, a11, a12, a22]`)
/// built from unit vectors pointing from each reflector to `p_r`.
pub fn information_matrix<T: Scalar>(p_r: Point3<T>, reflectors: &[Point3<T>]) -> [T; 6] {
    let mut a = [T::zero(); 6];
    for q in reflectors {
        let (dx, dy, dz) = (p_r.x - q.x, p_r.y - q.y, p_r.z - q.z);
        let n = (dx * dx + dy * dy + dz * dz).sqrt();
        if n == T::zero() {
            continue;
        }
        let (hx, hy, hz) = (dx / n, dy / n, dz / n);
        a[0] += hx * hx;
        a[1] += hx * hy;
        a[2] += hx * hz;
        a[3] += hy * hy;
        a[4] += hy * hz;
        a[5] += hz * hz;
    }
    a
}

/// Eigenvalues of a symmetric 3×3 matrix, descending.
fn sym3_eigenvalues<T: Scalar>(a: &[T; 6]) -> [T; 3] {
    let [a00, a01, a02, a11, a12, a22] = *a;
    let p1 = a01 * a01 + a02 * a02 + a12 * a12;
    if p1 == T::zero() {
        let mut d = [a00, a11, a22];
        d.sort_by(|x, y| y.partial_cmp(x).unwrap_or(std::cmp::Ordering::Equal));
        return d;
    }
    let three = T::of(3.0);
    let q = (a00 + a11 + a22) / three;
    let p2 = (a00 - q).powi(2) + (a11 - q).powi(2) + (a22 - q).powi(2) + T::of(2.0) * p1;
    let p = (p2 / T::of(6.0)).sqrt();
    let (b00, b11, b22) = ((a00 - q) / p, (a11 - q) / p, (a22 - q) / p);
    let (b01, b02, b12) = (a01 / p, a02 / p, a12 / p);
    let det_b = b00 * (b11 * b22 - b12 * b12) - b01 * (b01 * b22 - b12 * b02) + b02 * (b01 * b12 - b11 * b02);
    let r = (det_b / T::of(2.0)).max(-T::one()).min(T::one());
    let phi = r.acos() / three;
    let l1 = q + T::of(2.0) * p * phi.cos();
    let l3 = q + T::of(2.0) * p * (phi + T::of(2.0) * T::PI() / three).cos();
    [l1, three * q - l1 - l3, l3]
}

/// `tr(A⁻¹)` via principal minors over the determinant, or `None` when the
/// matrix is singular or its condition number exceeds the limit.
pub fn trace_of_inverse<T: Scalar>(a: &[T; 6]) -> Option<T> {
    let [a00, a01, a02, a11, a12, a22] = *a;
    let m00 = a11 * a22 - a12 * a12;
    let m11 = a00 * a22 - a02 * a02;
    let m22 = a00 * a11 - a01 * a01;
    let det = a00 * m00 - a01 * (a01 * a22 - a12 * a02) + a02 * (a01 * a12 - a11 * a02);
    if !(det > T::zero()) {
        return None;
    }
    let ev = sym3_eigenvalues(a);
    if !(ev[2] > T::zero()) || ev[0] / ev[2] > max_condition() {
        return None;
    }
    Some((m00 + m11 + m22) / det)
}

/// GDOP at `p_r` from its visible reflectors (at least four).
pub fn gdop<T: Scalar>(p_r: Point3<T>, visible: &[(Lrp<T>, T)], sigma_r: T) -> Result<T> {
    gdop_with(p_r, visible, sigma_r, GdopMode::TraceVariance)
}

pub fn gdop_with<T: Scalar>(p_r: Point3<T>, visible: &[(Lrp<T>, T)], sigma_r: T, mode: GdopMode) -> Result<T> {
    if visible.len() < 4 {
        return Err(Error::InsufficientVisible { visible: visible.len(), required: 4 });
    }
    let qs: Vec<Point3<T>> = visible.iter().map(|(l, _)| l.position).collect();
    let a = information_matrix(p_r, &qs);
    Ok(match (trace_of_inverse(&a), mode) {
        (None, _) => gdop_penalty(sigma_r),
        (Some(tr), GdopMode::TraceVariance) => tr * sigma_r * sigma_r,
        (Some(tr), GdopMode::RootTrace) => tr.sqrt() * sigma_r,
    })
}

/// Per-element GDOP values.
#[derive(Debug, Clone, PartialEq)]
pub struct GdopMap<T> {
    pub values: Vec<T>,
}

/// MLAT objective `f2`: GDOP summed over all grid elements.
pub fn gdop_objective<T: Scalar>(
    pl: &Placement<T>,
    grid: &Grid<T>,
    masks: &[VisibilityMask],
    sigma_r: T,
    mode: GdopMode,
) -> Result<(T, GdopMap<T>)> {
    let mut values = Vec::with_capacity(grid.len());
    let mut total = T::zero();
    for e in 0..grid.len() {
        let v = gdop_with(grid.center(e), &visible_at(e, pl, masks, grid), sigma_r, mode)?;
        total += v;
        values.push(v);
    }
    Ok((total, GdopMap { values }))
}

/// Settings shared by objective evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalConfig<T> {
    /// Fingerprint size `N`.
    pub fingerprint_size: usize,
    /// Range standard deviation `σ_r`; defaults to the range resolution.
    pub sigma_r: T,
    pub limits: ConstraintLimits<T>,
    pub gdop_mode: GdopMode,
}

impl<T: Scalar> EvalConfig<T> {
    pub fn for_room(room: &RoomModel<T>) -> Self {
        Self {
            fingerprint_size: 4,
            sigma_r: room.range_resolution,
            limits: ConstraintLimits::default(),
            gdop_mode: GdopMode::default(),
        }
    }
}

/// Objective pair of one placement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objectives<T> {
    pub f1: usize,
    pub f2: T,
    pub feasible: bool,
}

impl<T: Scalar> Objectives<T> {
    /// Pair assigned to infeasible placements; dominated by any feasible pair.
    pub fn penalty(grid_len: usize, sigma_r: T) -> Self {
        Self {
            f1: grid_len * 10,
            f2: gdop_penalty(sigma_r) * T::of_usize(grid_len),
            feasible: false,
        }
    }

    pub fn as_pair(&self) -> (T, T) {
        (T::of_usize(self.f1), self.f2)
    }
}

/// Constraint check followed by both objectives, or the penalty pair.
pub fn evaluate<T: Scalar>(
    pl: &Placement<T>,
    room: &RoomModel<T>,
    grid: &Grid<T>,
    masks: &[VisibilityMask],
    cfg: &EvalConfig<T>,
) -> Objectives<T> {
    let penalty = Objectives::penalty(grid.len(), cfg.sigma_r);
    match check_constraints(pl, room, grid, masks, &cfg.limits) {
        Ok(rep) if rep.feasible => {}
        _ => return penalty,
    }
    let f1 = match ambiguity(pl, grid, masks, cfg.fingerprint_size, room.range_resolution) {
        Ok((f1, _)) => f1,
        Err(_) => return penalty,
    };
    match gdop_objective(pl, grid, masks, cfg.sigma_r, cfg.gdop_mode) {
        Ok((f2, _)) => Objectives { f1, f2, feasible: true },
        Err(_) => penalty,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{Point2, Polygon};
    use crate::placement::compute_masks;

    fn lrp(x: f64, y: f64, z: f64, kind: u8, index: usize) -> Lrp<f64> {
        Lrp { position: Point3::new(x, y, z), kind: LrpType(kind), index }
    }

    fn with_dist(p: Point3<f64>, ls: Vec<Lrp<f64>>) -> Vec<(Lrp<f64>, f64)> {
        ls.into_iter().map(|l| (l, p.dist(l.position))).collect()
    }

    #[test]
    fn fingerprint_arithmetic_example() {
        let p = Point3::new(0.0, 0.0, 1.0);
        let vis = with_dist(p, vec![lrp(0.0, 0.0, 3.0, 0, 0), lrp(0.6, 0.0, 3.0, 1, 1)]);
        let fp = fingerprint_from_visible(&vis, 2, 0.1).unwrap();
        assert_eq!(fp.entries(), &[(20, LrpType(0)), (21, LrpType(1))]);
        // mirrored about x = 0.3
        let p2 = Point3::new(0.6, 0.0, 1.0);
        let vis2 = with_dist(p2, vec![lrp(0.6, 0.0, 3.0, 0, 0), lrp(0.0, 0.0, 3.0, 1, 1)]);
        assert_eq!(fingerprint_from_visible(&vis2, 2, 0.1).unwrap(), fp);
    }

    #[test]
    fn fingerprint_needs_n_visible() {
        let p = Point3::new(0.0, 0.0, 1.0);
        let vis = with_dist(p, vec![lrp(0.0, 0.0, 3.0, 0, 0)]);
        assert!(fingerprint_from_visible(&vis, 2, 0.1).is_err());
    }

    #[test]
    fn rounding_is_half_away_from_zero() {
        assert_eq!(distance_bin(0.25, 0.5), 1);
        assert_eq!(distance_bin(0.75_f64, 0.5), 2);
        assert_eq!(distance_bin(-0.25_f64, 0.5), -1);
        assert_eq!(distance_bin(2.04, 0.1), 20);
    }

    #[test]
    fn symmetric_gdop_example() {
        let p = Point3::new(0.0, 0.0, 0.0);
        let vis = with_dist(
            p,
            vec![
                lrp(1.0, 1.0, 2.0, 0, 0),
                lrp(-1.0, 1.0, 2.0, 0, 1),
                lrp(1.0, -1.0, 2.0, 0, 2),
                lrp(-1.0, -1.0, 2.0, 0, 3),
            ],
        );
        let g = gdop(p, &vis, 1.0).unwrap();
        assert!((g - 3.375).abs() <= 1e-12, "{g}");
        let g2 = gdop(p, &vis, 0.1).unwrap();
        assert!((g2 - 3.375 * 0.01).abs() <= 1e-14);
        let root = gdop_with(p, &vis, 0.1, GdopMode::RootTrace).unwrap();
        assert!((root - 3.375f64.sqrt() * 0.1).abs() <= 1e-14);
    }

    #[test]
    fn collinear_reflectors_get_penalty() {
        let p = Point3::new(0.0, 0.0, 0.0);
        // all on the line x = 0 directly above the robot's y axis: rank 2
        let vis = with_dist(
            p,
            (0..4).map(|k| lrp(0.0, k as f64 - 1.5, 2.0, 0, k)).collect(),
        );
        assert_eq!(gdop(p, &vis, 0.075).unwrap(), gdop_penalty(0.075));
    }

    #[test]
    fn gdop_needs_four() {
        let p = Point3::new(0.0, 0.0, 0.0);
        let vis = with_dist(p, (0..3).map(|k| lrp(k as f64, 1.0, 2.0, 0, k)).collect());
        assert!(gdop(p, &vis, 0.075).is_err());
    }

    #[test]
    fn eigenvalues_of_diagonal_and_dense() {
        let ev = sym3_eigenvalues(&[2.0f64, 0.0, 0.0, 3.0, 0.0, 1.0]);
        assert_eq!(ev, [3.0, 2.0, 1.0]);
        // [[2,1,0],[1,2,0],[0,0,5]] -> 5, 3, 1
        let ev = sym3_eigenvalues(&[2.0f64, 1.0, 0.0, 2.0, 0.0, 5.0]);
        for (a, b) in ev.iter().zip([5.0, 3.0, 1.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    fn square_room() -> (RoomModel<f64>, Grid<f64>) {
        let room = RoomModel {
            grid_size: 0.5,
            radar_height: 0.5,
            reflector_height: 3.0,
            cone_half_angle: 80f64.to_radians(),
            ..RoomModel::new(Polygon::rectangle(0.0, 0.0, 4.0, 4.0).unwrap())
        };
        let grid = Grid::build(&room).unwrap();
        (room, grid)
    }

    #[test]
    fn mirror_symmetric_placement_is_fully_ambiguous() {
        let (room, grid) = square_room();
        // dihedral-symmetric about the room center
        let xy = [
            Point2::new(1.0, 1.0),
            Point2::new(3.0, 1.0),
            Point2::new(3.0, 3.0),
            Point2::new(1.0, 3.0),
        ];
        let pl = Placement::with_assigned_types(&xy, 1, &room);
        let masks = compute_masks(&pl, &room, &grid);
        let (f1, map) = ambiguity(&pl, &grid, &masks, 4, room.range_resolution).unwrap();
        assert_eq!(f1, grid.len());
        let (u, l, g) = map.counts();
        assert_eq!(u, 0);
        assert_eq!(l + g, f1);
    }

    #[test]
    fn two_distinct_elements_give_zero() {
        let room = RoomModel {
            grid_size: 1.0,
            radar_height: 0.5,
            reflector_height: 3.0,
            cone_half_angle: 80f64.to_radians(),
            wall_margin: 0.1,
            ..RoomModel::new(Polygon::rectangle(0.0, 0.0, 2.0, 1.0).unwrap())
        };
        let grid = Grid::build(&room).unwrap();
        assert_eq!(grid.len(), 2);
        let xy = [
            Point2::new(0.15, 0.15),
            Point2::new(0.5, 0.85),
            Point2::new(1.0, 0.5),
            Point2::new(1.85, 0.85),
        ];
        let pl = Placement::with_assigned_types(&xy, 1, &room);
        let masks = compute_masks(&pl, &room, &grid);
        let (f1, map) = ambiguity(&pl, &grid, &masks, 4, 0.075).unwrap();
        assert_eq!(f1, 0);
        assert_eq!(map.counts(), (2, 0, 0));
    }

    #[test]
    fn single_element_f2_is_its_gdop() {
        let room = RoomModel {
            grid_size: 1.0,
            radar_height: 0.5,
            reflector_height: 3.0,
            cone_half_angle: 80f64.to_radians(),
            ..RoomModel::new(Polygon::rectangle(0.0, 0.0, 1.0, 1.0).unwrap())
        };
        let grid = Grid::build(&room).unwrap();
        assert_eq!(grid.len(), 1);
        let xy = [
            Point2::new(0.2, 0.2),
            Point2::new(0.8, 0.2),
            Point2::new(0.8, 0.8),
            Point2::new(0.2, 0.7),
        ];
        let pl = Placement::with_assigned_types(&xy, 1, &room);
        let masks = compute_masks(&pl, &room, &grid);
        let (f2, map) = gdop_objective(&pl, &grid, &masks, 0.075, GdopMode::TraceVariance).unwrap();
        let direct = gdop(grid.center(0), &visible_at(0, &pl, &masks, &grid), 0.075).unwrap();
        assert_eq!(f2, direct);
        assert_eq!(map.values, vec![direct]);
    }

    #[test]
    fn local_and_global_classification() {
        // three elements in a row plus one far away, hand-built table
        let room = RoomModel {
            grid_size: 1.0,
            ..RoomModel::new(Polygon::rectangle(0.0, 0.0, 5.0, 1.0).unwrap())
        };
        let grid = Grid::build(&room).unwrap();
        let a = Fingerprint::new(vec![(1, LrpType(0))]);
        let b = Fingerprint::new(vec![(2, LrpType(0))]);
        let c = Fingerprint::new(vec![(3, LrpType(0))]);
        // elements 0,1 share `a` (connected) ; 2 and 4 share `b` (apart); 3 unique
        let table = vec![a.clone(), a, b.clone(), c, b];
        let (f1, map) = ambiguity_from_table(&table, &grid);
        assert_eq!(f1, 4);
        assert_eq!(map.classes[0], AmbiguityClass::Local);
        assert_eq!(map.classes[1], AmbiguityClass::Local);
        assert_eq!(map.classes[2], AmbiguityClass::Global);
        assert_eq!(map.classes[3], AmbiguityClass::Unique);
        assert_eq!(map.classes[4], AmbiguityClass::Global);
        assert_eq!(map.groups, vec![0, 0, 1, 2, 1]);
    }

    #[test]
    fn penalty_pair_values() {
        let p = Objectives::penalty(100, 0.075f64);
        assert_eq!(p.f1, 1000);
        assert!((p.f2 - 1e6 * 0.075 * 0.075 * 100.0).abs() < 1e-6);
        assert!(!p.feasible);
    }
}
