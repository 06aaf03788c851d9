//! Constraint repair: magnet repulsion for spacing, gravitation toward
//! coverage holes, and wall-margin projection.

use rand::Rng;

use crate::geom::{Grid, Point2, RoomModel, VisibilityMask};
use crate::placement::{check_constraints, compute_masks, type_assignment, visible_counts, ConstraintLimits, Placement};
use crate::{Error, Result, Scalar};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RepairConfig<T> {
    /// Gravitation step factor.
    pub gamma: T,
    /// Longest gravitation step.
    pub max_pull: T,
    /// Relative push beyond `min_spacing` in the magnet step.
    pub delta: T,
    pub max_iter: usize,
    /// Fresh random starts tried by [`random_feasible`].
    pub restarts: usize,
    pub limits: ConstraintLimits<T>,
    pub gravitation: Gravitation,
}

/// Which reflectors a coverage hole attracts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Gravitation {
    /// Every reflector moves toward its nearest hole.
    Nearest,
    /// Each hole attracts as many nearby reflectors as it lacks.
    #[default]
    Deficit,
}

impl<T: Scalar> Default for RepairConfig<T> {
    fn default() -> Self {
        Self {
            gamma: T::of(0.2),
            max_pull: T::one(),
            delta: T::of(0.05),
            max_iter: 200,
            restarts: 10,
            limits: ConstraintLimits::default(),
            gravitation: Gravitation::default(),
        }
    }
}

/// Result of [`repair`].
#[derive(Debug, Clone, PartialEq)]
pub struct Repaired<T> {
    pub placement: Placement<T>,
    pub feasible: bool,
    pub iterations: usize,
}

/// Reflector indices sorted by position, then index. Used to make
/// floating-point sums independent of list order.
fn canonical_order<T: Scalar>(pl: &Placement<T>) -> Vec<usize> {
    let mut order: Vec<usize> = (0..pl.len()).collect();
    order.sort_by(|&a, &b| {
        let (p, q) = (pl.xy(a), pl.xy(b));
        p.x.partial_cmp(&q.x)
            .unwrap()
            .then(p.y.partial_cmp(&q.y).unwrap())
            .then(a.cmp(&b))
    });
    order
}

/// Pushes every pair closer than `d_min` apart to `d_min * (1 + delta)`,
/// each partner moving half the deficit. Displacements are accumulated
/// and applied at once; coincident pairs split along a random direction.
pub fn magnet_step<T: Scalar, R: Rng + ?Sized>(pl: &Placement<T>, d_min: T, delta: T, rng: &mut R) -> Placement<T> {
    let n = pl.len();
    let order = canonical_order(pl);
    let target = d_min * (T::one() + delta);
    let half = T::of(0.5);
    let d2 = d_min * d_min;
    // push[a][b]: displacement of order[a] caused by order[b]
    let mut push = vec![vec![None::<Point2<T>>; n]; n];
    let mut any = false;
    for a in 0..n {
        for b in a + 1..n {
            let (i, j) = (order[a], order[b]);
            let diff = pl.xy(j) - pl.xy(i);
            let dsq = diff.norm_sq();
            if dsq >= d2 {
                continue;
            }
            any = true;
            let dist = dsq.sqrt();
            let dir = diff.normalized().unwrap_or_else(|| {
                let angle: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                Point2::from_angle(T::of(angle))
            });
            let step = dir * ((target - dist) * half);
            push[b][a] = Some(step);
            push[a][b] = Some(-step);
        }
    }
    if !any {
        return pl.clone();
    }
    let mut out = pl.clone();
    for a in 0..n {
        let mut total = Point2::zero();
        let mut moved = false;
        for s in push[a].iter().flatten() {
            total += *s;
            moved = true;
        }
        if moved {
            let i = order[a];
            out.set_xy(i, pl.xy(i) + total);
        }
    }
    out
}

/// Centroids of the 4-connected regions seeing fewer than `k_min` reflectors.
pub fn coverage_violation_centroids<T: Scalar>(grid: &Grid<T>, masks: &[VisibilityMask], k_min: usize) -> Vec<Point2<T>> {
    let counts = visible_counts(masks, grid.len());
    let select: Vec<bool> = counts.iter().map(|&c| c < k_min).collect();
    grid.components(&select).iter().map(|c| grid.centroid_of(c)).collect()
}

/// Coverage-violating region: centroid, missing reflector count
/// (`k_min` minus the lowest count inside it) and element count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageHole<T> {
    pub centroid: Point2<T>,
    pub deficit: usize,
    pub size: usize,
    /// Element with the lowest count (smallest index on ties).
    pub worst: usize,
}

pub fn coverage_holes<T: Scalar>(grid: &Grid<T>, masks: &[VisibilityMask], k_min: usize) -> Vec<CoverageHole<T>> {
    let counts = visible_counts(masks, grid.len());
    let select: Vec<bool> = counts.iter().map(|&c| c < k_min).collect();
    grid.components(&select)
        .iter()
        .map(|c| {
            let worst = *c.iter().min_by_key(|&&e| (counts[e], e)).expect("non-empty component");
            CoverageHole { centroid: grid.centroid_of(c), deficit: k_min - counts[worst], size: c.len(), worst }
        })
        .collect()
}

/// Each hole, largest first, pulls its `deficit` nearest reflectors that
/// are not visible from its worst element and not claimed by another hole;
/// all other reflectors stay put. Reflectors whose departure cannot open a
/// new hole are preferred. Step size as in [`gravitation_step`].
pub fn deficit_gravitation_step<T: Scalar>(
    pl: &Placement<T>,
    holes: &[CoverageHole<T>],
    masks: &[VisibilityMask],
    k_min: usize,
    gamma: T,
    max_pull: T,
) -> Placement<T> {
    let mut order: Vec<usize> = (0..holes.len()).collect();
    order.sort_by(|&a, &b| holes[b].size.cmp(&holes[a].size).then(a.cmp(&b)));
    let mut claimed = vec![false; pl.len()];
    let counts = masks.first().map(|m| visible_counts(masks, m.len())).unwrap_or_default();
    // reflectors seen by an element that has no coverage to spare
    let critical: Vec<bool> = masks
        .iter()
        .map(|m| m.bits().iter().zip(&counts).any(|(&b, &c)| b && c <= k_min))
        .collect();
    let mut out = pl.clone();
    for h in order {
        let c = holes[h].centroid;
        let mut cand: Vec<(bool, T, usize)> = (0..pl.len())
            .filter(|&i| !claimed[i] && !masks[i].get(holes[h].worst))
            .map(|i| (critical[i], pl.xy(i).dist_sq(c), i))
            .collect();
        cand.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.partial_cmp(&b.1).unwrap()).then(a.2.cmp(&b.2)));
        for &(_, d2, i) in cand.iter().take(holes[h].deficit) {
            claimed[i] = true;
            let dist = d2.sqrt();
            if dist == T::zero() {
                continue;
            }
            let p = pl.xy(i);
            let step = (gamma * dist).min(max_pull);
            out.set_xy(i, p + (c - p) * (step / dist));
        }
    }
    out
}

/// Moves every reflector toward its nearest centroid by `gamma` times the
/// distance, at most `max_pull`.
pub fn gravitation_step<T: Scalar>(pl: &Placement<T>, centroids: &[Point2<T>], gamma: T, max_pull: T) -> Placement<T> {
    let mut out = pl.clone();
    if centroids.is_empty() {
        return out;
    }
    for i in 0..pl.len() {
        let p = pl.xy(i);
        let mut best = centroids[0];
        let mut bd = p.dist_sq(best);
        for &c in &centroids[1..] {
            let d = p.dist_sq(c);
            if d < bd {
                best = c;
                bd = d;
            }
        }
        let dist = bd.sqrt();
        if dist == T::zero() {
            continue;
        }
        let step = (gamma * dist).min(max_pull);
        out.set_xy(i, p + (best - p) * (step / dist));
    }
    out
}

/// Projects every reflector into the wall-margin region; reflectors that
/// cannot be projected stay where they are.
pub fn project_all<T: Scalar>(pl: &Placement<T>, room: &RoomModel<T>) -> Placement<T> {
    let mut out = pl.clone();
    for i in 0..pl.len() {
        if let Ok(q) = room.project_into_margin(pl.xy(i)) {
            out.set_xy(i, q);
        }
    }
    out
}

/// Alternates gravitation, magnet and margin projection until the placement
/// is feasible or `max_iter` rounds have run.
pub fn repair<T: Scalar, R: Rng + ?Sized>(
    pl: &Placement<T>,
    room: &RoomModel<T>,
    grid: &Grid<T>,
    cfg: &RepairConfig<T>,
    rng: &mut R,
) -> Repaired<T> {
    let mut cur = pl.clone();
    // per-reflector gravitation damping: halved when the pull reverses,
    // restored while it keeps its direction
    let mut scale = vec![T::one(); pl.len()];
    let mut last_pull = vec![Point2::zero(); pl.len()];
    for it in 0..=cfg.max_iter {
        let masks = compute_masks(&cur, room, grid);
        let report = check_constraints(&cur, room, grid, &masks, &cfg.limits).expect("masks match placement");
        if report.feasible {
            return Repaired { placement: cur, feasible: true, iterations: it };
        }
        if it == cfg.max_iter || !report.m_ok {
            break;
        }
        if !report.coverage_ok {
            let pulled = match cfg.gravitation {
                Gravitation::Nearest => {
                    let centroids = coverage_violation_centroids(grid, &masks, cfg.limits.min_visible);
                    gravitation_step(&cur, &centroids, cfg.gamma, cfg.max_pull)
                }
                Gravitation::Deficit => {
                    let holes = coverage_holes(grid, &masks, cfg.limits.min_visible);
                    deficit_gravitation_step(&cur, &holes, &masks, cfg.limits.min_visible, cfg.gamma, cfg.max_pull)
                }
            };
            for i in 0..cur.len() {
                let d = pulled.xy(i) - cur.xy(i);
                if d == Point2::zero() {
                    continue;
                }
                let turn = d.dot(last_pull[i]);
                if turn < T::zero() {
                    scale[i] = scale[i] * T::of(0.5);
                } else if turn > T::zero() {
                    scale[i] = (scale[i] + scale[i]).min(T::one());
                }
                last_pull[i] = d;
                cur.set_xy(i, cur.xy(i) + d * scale[i]);
            }
        }
        cur = magnet_step(&cur, cfg.limits.min_spacing, cfg.delta, rng);
        cur = project_all(&cur, room);
    }
    Repaired { placement: cur, feasible: false, iterations: cfg.max_iter }
}

/// Uniform sample of the wall-margin region by rejection from the bounding box.
pub fn sample_in_margin<T: Scalar, R: Rng + ?Sized>(room: &RoomModel<T>, rng: &mut R) -> Point2<T> {
    let (lo, hi) = room.boundary.bounding_box();
    let (x0, x1, y0, y1) = (lo.x.as_f64(), hi.x.as_f64(), lo.y.as_f64(), hi.y.as_f64());
    let mut last = room.boundary.centroid();
    for _ in 0..10_000 {
        let p = Point2::new(T::of(rng.random_range(x0..x1)), T::of(rng.random_range(y0..y1)));
        if room.in_margin_region(p) {
            return p;
        }
        last = p;
    }
    room.project_into_margin(last).unwrap_or(last)
}

/// `m` uniformly sampled reflectors, no repair.
pub fn random_placement<T: Scalar, R: Rng + ?Sized>(room: &RoomModel<T>, m: usize, n_types: usize, rng: &mut R) -> Placement<T> {
    let xy: Vec<Point2<T>> = (0..m).map(|_| sample_in_margin(room, rng)).collect();
    Placement::new(&xy, &type_assignment(m, n_types), room.reflector_height).expect("lengths match")
}

/// Random placement repaired to feasibility, retried up to `restarts` times.
pub fn random_feasible<T: Scalar, R: Rng + ?Sized>(
    room: &RoomModel<T>,
    grid: &Grid<T>,
    m: usize,
    n_types: usize,
    cfg: &RepairConfig<T>,
    rng: &mut R,
) -> Result<Placement<T>> {
    if m == 0 {
        return Err(Error::NoFeasiblePlacement { restarts: 0 });
    }
    for _ in 0..cfg.restarts.max(1) {
        let start = random_placement(room, m, n_types, rng);
        let r = repair(&start, room, grid, cfg, rng);
        if r.feasible {
            return Ok(r.placement);
        }
    }
    Err(Error::NoFeasiblePlacement { restarts: cfg.restarts.max(1) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Polygon;
    use crate::placement::LrpType;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pl(pts: &[(f64, f64)]) -> Placement<f64> {
        let xy: Vec<_> = pts.iter().map(|&(x, y)| Point2::new(x, y)).collect();
        Placement::new(&xy, &vec![LrpType::ZERO; xy.len()], 3.0).unwrap()
    }

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(1)
    }

    #[test]
    fn magnet_pair() {
        let p = pl(&[(1.0, 1.0), (1.3, 1.0)]);
        let q = magnet_step(&p, 0.5, 0.05, &mut rng());
        assert!((q.xy(0).dist(q.xy(1)) - 0.525).abs() < 1e-12);
        let mid = (q.xy(0) + q.xy(1)) * 0.5;
        assert!(mid.dist(Point2::new(1.15, 1.0)) < 1e-12);
    }

    #[test]
    fn magnet_identity_without_violation() {
        let p = pl(&[(0.0, 0.0), (1.0, 0.0), (0.0, 0.5)]);
        assert_eq!(magnet_step(&p, 0.5, 0.05, &mut rng()), p);
    }

    #[test]
    fn magnet_triangle_expands_about_centroid() {
        let s = 0.3;
        let pts = [(0.0, 0.0), (s, 0.0), (s / 2.0, s * 3f64.sqrt() / 2.0)];
        let p = pl(&pts);
        let q = magnet_step(&p, 0.5, 0.05, &mut rng());
        // vector-sum oracle: each vertex gets two pushes of (0.525 - 0.3) / 2
        let k = (0.525 - s) / 2.0;
        for i in 0..3 {
            let mut expect = p.xy(i);
            for j in 0..3 {
                if j != i {
                    expect += (p.xy(i) - p.xy(j)).normalized().unwrap() * k;
                }
            }
            assert!(q.xy(i).dist(expect) < 1e-12);
        }
        let c0 = (p.xy(0) + p.xy(1) + p.xy(2)) * (1.0 / 3.0);
        let c1 = (q.xy(0) + q.xy(1) + q.xy(2)) * (1.0 / 3.0);
        assert!(c0.dist(c1) < 1e-12);
    }

    #[test]
    fn magnet_coincident_pair_separates() {
        let p = pl(&[(2.0, 2.0), (2.0, 2.0)]);
        let q = magnet_step(&p, 0.5, 0.05, &mut rng());
        assert!((q.xy(0).dist(q.xy(1)) - 0.525).abs() < 1e-12);
        assert!(((q.xy(0) + q.xy(1)) * 0.5).dist(Point2::new(2.0, 2.0)) < 1e-12);
        let q2 = magnet_step(&p, 0.5, 0.05, &mut rng());
        assert_eq!(q, q2);
    }

    proptest! {
        #[test]
        fn magnet_is_permutation_invariant_and_local(
            pts in prop::collection::vec((0.0..3.0f64, 0.0..3.0f64), 2..9),
            shift in 0usize..9,
        ) {
            let p = pl(&pts);
            let q = magnet_step(&p, 0.5, 0.05, &mut rng());
            let mut rp = pts.clone();
            let k = shift % rp.len();
            rp.rotate_left(k);
            let q2 = magnet_step(&pl(&rp), 0.5, 0.05, &mut rng());
            for i in 0..pts.len() {
                prop_assert_eq!(q.xy((i + k) % pts.len()), q2.xy(i));
            }
            let viol = crate::placement::spacing_violations(&p, 0.5);
            for i in 0..pts.len() {
                if !viol.iter().any(|&(a, b)| a == i || b == i) {
                    prop_assert_eq!(q.xy(i), p.xy(i));
                }
            }
        }
    }

    #[test]
    fn gravitation_examples() {
        let p = pl(&[(0.0, 0.0)]);
        let q = gravitation_step(&p, &[Point2::new(2.0, 0.0)], 0.2, 1.0);
        assert!(q.xy(0).dist(Point2::new(0.4, 0.0)) < 1e-12);
        let q = gravitation_step(&pl(&[(2.0, 0.0)]), &[Point2::new(2.0, 0.0)], 0.2, 1.0);
        assert_eq!(q.xy(0), Point2::new(2.0, 0.0));
        let q = gravitation_step(&p, &[Point2::new(-3.0, 0.0), Point2::new(0.0, 4.0)], 0.2, 1.0);
        assert!(q.xy(0).dist(Point2::new(-0.6, 0.0)) < 1e-12);
        // capped
        let q = gravitation_step(&p, &[Point2::new(10.0, 0.0)], 0.2, 1.0);
        assert!(q.xy(0).dist(Point2::new(1.0, 0.0)) < 1e-12);
    }

    proptest! {
        #[test]
        fn gravitation_decreases_distance(
            pts in prop::collection::vec((0.0..10.0f64, 0.0..8.0f64), 1..6),
            cs in prop::collection::vec((0.0..10.0f64, 0.0..8.0f64), 1..4),
        ) {
            let p = pl(&pts);
            let cents: Vec<_> = cs.iter().map(|&(x, y)| Point2::new(x, y)).collect();
            let q = gravitation_step(&p, &cents, 0.2, 1.0);
            let near = |x: Point2<f64>| cents.iter().map(|c| c.dist(x)).fold(f64::INFINITY, f64::min);
            for i in 0..pts.len() {
                if q.xy(i) != p.xy(i) {
                    prop_assert!(near(q.xy(i)) < near(p.xy(i)));
                }
            }
        }
    }

    fn block_room() -> (RoomModel<f64>, Grid<f64>) {
        let room = RoomModel { grid_size: 1.0, ..RoomModel::new(Polygon::rectangle(0.0, 0.0, 6.0, 3.0).unwrap()) };
        let grid = Grid::build(&room).unwrap();
        (room, grid)
    }

    #[test]
    fn centroids_of_violation_blocks() {
        let (_, grid) = block_room();
        let n = grid.len();
        assert!(coverage_violation_centroids(&grid, &vec![VisibilityMask::all(n, true); 4], 4).is_empty());
        // columns 0-1 and 4-5 uncovered, column 2-3 covered
        let bits: Vec<bool> = grid.centers().iter().map(|c| c.x > 2.0 && c.x < 4.0).collect();
        let m = VisibilityMask::new(bits);
        let cents = coverage_violation_centroids(&grid, &[m.clone(), m.clone(), m.clone(), m], 4);
        assert_eq!(cents.len(), 2);
        assert!(cents[0].dist(Point2::new(1.0, 1.5)) < 1e-12);
        assert!(cents[1].dist(Point2::new(5.0, 1.5)) < 1e-12);
    }

    #[test]
    fn deficit_gravitation_pulls_only_what_the_hole_lacks() {
        let (_, grid) = block_room();
        let n = grid.len();
        // left two columns see only reflector 0; everything else sees all four
        let left: Vec<bool> = grid.centers().iter().map(|c| c.x < 2.0).collect();
        let mut masks = vec![VisibilityMask::all(n, true)];
        masks.extend((1..4).map(|_| VisibilityMask::new(left.iter().map(|&l| !l).collect())));
        let holes = coverage_holes(&grid, &masks, 2);
        assert_eq!(holes.len(), 1);
        assert_eq!(holes[0].deficit, 1);
        assert_eq!(holes[0].size, 6);
        assert!(holes[0].centroid.dist(Point2::new(1.0, 1.5)) < 1e-12);
        let pl = Placement::new(
            &[Point2::new(1.0, 1.5), Point2::new(3.5, 1.5), Point2::new(5.0, 1.5), Point2::new(4.5, 0.5)],
            &[LrpType::ZERO; 4],
            3.0,
        )
        .unwrap();
        let out = deficit_gravitation_step(&pl, &holes, &masks, 2, 0.5, 10.0);
        assert_eq!(out.xy(0), pl.xy(0));
        assert!(out.xy(1).dist(Point2::new(2.25, 1.5)) < 1e-12);
        assert_eq!(out.xy(2), pl.xy(2));
        assert_eq!(out.xy(3), pl.xy(3));
    }

    #[test]
    fn deficit_gravitation_respects_max_pull_and_no_holes() {
        let (_, grid) = block_room();
        let n = grid.len();
        let pl = Placement::new(&[Point2::new(5.5, 1.5)], &[LrpType::ZERO], 3.0).unwrap();
        let masks = vec![VisibilityMask::all(n, false)];
        let holes = coverage_holes(&grid, &masks, 1);
        let out = deficit_gravitation_step(&pl, &holes, &masks, 1, 0.9, 0.25);
        assert!((pl.xy(0).dist(out.xy(0)) - 0.25).abs() < 1e-12);
        let none = deficit_gravitation_step(&pl, &[], &masks, 1, 0.9, 0.25);
        assert_eq!(none, pl);
    }

    fn square_room() -> (RoomModel<f64>, Grid<f64>) {
        let room = RoomModel {
            grid_size: 0.25,
            radar_height: 0.5,
            reflector_height: 3.0,
            cone_half_angle: 60f64.to_radians(),
            ..RoomModel::new(Polygon::rectangle(0.0, 0.0, 4.0, 4.0).unwrap())
        };
        let grid = Grid::build(&room).unwrap();
        (room, grid)
    }

    #[test]
    fn feasible_placement_is_returned_unchanged() {
        let (room, grid) = square_room();
        let p = Placement::with_assigned_types(
            &[Point2::new(1.0, 1.0), Point2::new(3.0, 1.0), Point2::new(3.0, 3.0), Point2::new(1.0, 3.0), Point2::new(2.0, 2.0)],
            1,
            &room,
        );
        let r = repair(&p, &room, &grid, &RepairConfig::default(), &mut rng());
        assert!(r.feasible);
        assert_eq!(r.iterations, 0);
        assert_eq!(r.placement, p);
    }

    #[test]
    fn clustered_start_is_repaired_and_checks_out() {
        let (room, grid) = square_room();
        let p = Placement::with_assigned_types(
            &[Point2::new(1.0, 1.0), Point2::new(1.1, 1.0), Point2::new(1.0, 1.1), Point2::new(1.2, 1.2), Point2::new(0.9, 1.2)],
            1,
            &room,
        );
        let r = repair(&p, &room, &grid, &RepairConfig::default(), &mut rng());
        assert!(r.feasible);
        assert!(r.iterations > 0);
        let masks = compute_masks(&r.placement, &room, &grid);
        let cfg = RepairConfig::<f64>::default();
        assert!(check_constraints(&r.placement, &room, &grid, &masks, &cfg.limits).unwrap().feasible);
        let again = repair(&p, &room, &grid, &cfg, &mut rng());
        assert_eq!(again, r);
    }

    #[test]
    fn too_few_reflectors_fail() {
        let (room, grid) = square_room();
        let p = Placement::with_assigned_types(&[Point2::new(2.0, 2.0), Point2::new(1.0, 1.0)], 1, &room);
        let r = repair(&p, &room, &grid, &RepairConfig::default(), &mut rng());
        assert!(!r.feasible);
        assert_eq!(r.iterations, 200);
        let cfg = RepairConfig { max_iter: 20, restarts: 2, ..RepairConfig::default() };
        assert!(random_feasible(&room, &grid, 1, 1, &cfg, &mut rng()).is_err());
    }

    #[test]
    fn random_feasible_is_seeded() {
        let (room, grid) = square_room();
        let cfg = RepairConfig::default();
        let a = random_feasible(&room, &grid, 6, 2, &cfg, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = random_feasible(&room, &grid, 6, 2, &cfg, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.type_counts(), [3, 3]);
    }
}
