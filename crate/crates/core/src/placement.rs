//! Reflector placements, type assignment and constraint checking.

use crate::geom::{visibility_mask, Grid, Point2, Point3, RoomModel, VisibilityMask};
use crate::{Error, Result, Scalar};

/// Reflector type label. At most two types can be told apart by the radar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct LrpType(pub u8);

impl LrpType {
    pub const ZERO: Self = Self(0);
    pub const ONE: Self = Self(1);
}

/// One reflector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lrp<T> {
    pub position: Point3<T>,
    pub kind: LrpType,
    pub index: usize,
}

/// Ordered reflector list; `index` of each entry equals its list position.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Placement<T> {
    lrps: Vec<Lrp<T>>,
}

/// Types for `m` reflectors: even indices type 0, odd indices type 1 when two
/// types are in use, so type 0 holds the extra reflector for odd `m`.
pub fn type_assignment(m: usize, n_types: usize) -> Vec<LrpType> {
    (0..m)
        .map(|i| if n_types >= 2 && i % 2 == 1 { LrpType::ONE } else { LrpType::ZERO })
        .collect()
}

/// Type that keeps the equal split when one reflector is added.
pub fn type_to_add(counts: [usize; 2], n_types: usize) -> LrpType {
    if n_types >= 2 && counts[0] > counts[1] {
        LrpType::ONE
    } else {
        LrpType::ZERO
    }
}

/// Type whose removal keeps the equal split: the over-represented type,
/// type 0 on a tie.
pub fn type_to_remove(counts: [usize; 2], n_types: usize) -> LrpType {
    if n_types >= 2 && counts[1] > counts[0] {
        LrpType::ONE
    } else if n_types >= 2 && counts[0] == counts[1] {
        LrpType::ZERO
    } else if counts[0] > 0 {
        LrpType::ZERO
    } else {
        LrpType::ONE
    }
}

impl<T: Scalar> Placement<T> {
    /// Builds a placement at height `z`, reindexing in list order.
    pub fn new(xy: &[Point2<T>], kinds: &[LrpType], z: T) -> Result<Self> {
        if xy.len() != kinds.len() {
            return Err(Error::LengthMismatch { expected: xy.len(), actual: kinds.len() });
        }
        Ok(Self {
            lrps: xy
                .iter()
                .zip(kinds)
                .enumerate()
                .map(|(index, (p, &kind))| Lrp { position: p.with_z(z), kind, index })
                .collect(),
        })
    }

    /// Placement with types from [`type_assignment`] at the room's reflector height.
    pub fn with_assigned_types(xy: &[Point2<T>], n_types: usize, room: &RoomModel<T>) -> Self {
        let kinds = type_assignment(xy.len(), n_types);
        Self::new(xy, &kinds, room.reflector_height).expect("lengths match")
    }

    pub fn len(&self) -> usize {
        self.lrps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lrps.is_empty()
    }

    pub fn lrps(&self) -> &[Lrp<T>] {
        &self.lrps
    }

    pub fn lrp(&self, i: usize) -> &Lrp<T> {
        &self.lrps[i]
    }

    pub fn xy(&self, i: usize) -> Point2<T> {
        self.lrps[i].position.xy()
    }

    pub fn positions_xy(&self) -> Vec<Point2<T>> {
        self.lrps.iter().map(|l| l.position.xy()).collect()
    }

    pub fn kinds(&self) -> Vec<LrpType> {
        self.lrps.iter().map(|l| l.kind).collect()
    }

    pub fn set_xy(&mut self, i: usize, p: Point2<T>) {
        let l = &mut self.lrps[i];
        l.position.x = p.x;
        l.position.y = p.y;
    }

    pub fn push(&mut self, p: Point2<T>, kind: LrpType, z: T) {
        let index = self.lrps.len();
        self.lrps.push(Lrp { position: p.with_z(z), kind, index });
    }

    pub fn remove(&mut self, i: usize) -> Lrp<T> {
        let out = self.lrps.remove(i);
        for (k, l) in self.lrps.iter_mut().enumerate().skip(i) {
            l.index = k;
        }
        out
    }

    /// Number of reflectors of type 0 and type 1.
    pub fn type_counts(&self) -> [usize; 2] {
        let mut c = [0, 0];
        for l in &self.lrps {
            c[usize::from(l.kind.0.min(1))] += 1;
        }
        c
    }

    /// Number of distinct types present.
    pub fn n_types(&self) -> usize {
        self.type_counts().iter().filter(|c| **c > 0).count()
    }
}

/// Visibility masks of every reflector. Reflectors outside the room interior
/// get an all-false mask.
pub fn compute_masks<T: Scalar>(pl: &Placement<T>, room: &RoomModel<T>, grid: &Grid<T>) -> Vec<VisibilityMask> {
    let eps = T::geom_eps() * room.boundary.scale();
    pl.lrps()
        .iter()
        .map(|l| {
            if room.boundary.boundary_distance(l.position.xy()) <= eps {
                return VisibilityMask::all(grid.len(), false);
            }
            visibility_mask(l.position, grid, room).unwrap_or_else(|_| VisibilityMask::all(grid.len(), false))
        })
        .collect()
}

/// Number of reflectors visible from each grid element.
pub fn visible_counts(masks: &[VisibilityMask], n: usize) -> Vec<usize> {
    let mut counts = vec![0usize; n];
    for m in masks {
        for (c, &b) in counts.iter_mut().zip(m.bits()) {
            *c += usize::from(b);
        }
    }
    counts
}

/// Constraint parameters: reflector budget, coverage and spacing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintLimits<T> {
    /// `M_max`.
    pub max_lrps: usize,
    /// `K_min`: reflectors that must be visible from every grid element.
    pub min_visible: usize,
    /// `d_min`: minimum pairwise horizontal spacing.
    pub min_spacing: T,
}

impl<T: Scalar> Default for ConstraintLimits<T> {
    fn default() -> Self {
        Self { max_lrps: 32, min_visible: 4, min_spacing: T::of(0.5) }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ConstraintReport {
    pub m_ok: bool,
    pub coverage_ok: bool,
    /// Grid elements seeing fewer than `min_visible` reflectors.
    pub coverage_violations: Vec<usize>,
    pub spacing_ok: bool,
    /// Reflector pairs `(i, j)`, `i < j`, closer than `min_spacing`.
    pub spacing_violations: Vec<(usize, usize)>,
    pub margin_ok: bool,
    /// Reflectors outside the wall-margin region.
    pub margin_violations: Vec<usize>,
    pub feasible: bool,
}

pub fn spacing_violations<T: Scalar>(pl: &Placement<T>, d_min: T) -> Vec<(usize, usize)> {
    let d2 = d_min * d_min;
    let mut out = Vec::new();
    for i in 0..pl.len() {
        for j in i + 1..pl.len() {
            if pl.xy(i).dist_sq(pl.xy(j)) < d2 {
                out.push((i, j));
            }
        }
    }
    out
}

pub fn check_constraints<T: Scalar>(
    pl: &Placement<T>,
    room: &RoomModel<T>,
    grid: &Grid<T>,
    masks: &[VisibilityMask],
    limits: &ConstraintLimits<T>,
) -> Result<ConstraintReport> {
    if masks.len() != pl.len() {
        return Err(Error::LengthMismatch { expected: pl.len(), actual: masks.len() });
    }
    if let Some(m) = masks.iter().find(|m| m.len() != grid.len()) {
        return Err(Error::LengthMismatch { expected: grid.len(), actual: m.len() });
    }
    let m_ok = !pl.is_empty() && pl.len() <= limits.max_lrps;
    let counts = visible_counts(masks, grid.len());
    let coverage_violations: Vec<usize> =
        (0..grid.len()).filter(|&e| counts[e] < limits.min_visible).collect();
    let spacing = spacing_violations(pl, limits.min_spacing);
    let margin_violations: Vec<usize> =
        (0..pl.len()).filter(|&i| !room.in_margin_region(pl.xy(i))).collect();
    let coverage_ok = coverage_violations.is_empty();
    let spacing_ok = spacing.is_empty();
    let margin_ok = margin_violations.is_empty();
    Ok(ConstraintReport {
        m_ok,
        coverage_ok,
        coverage_violations,
        spacing_ok,
        spacing_violations: spacing,
        margin_ok,
        margin_violations,
        feasible: m_ok && coverage_ok && spacing_ok && margin_ok,
    })
}

/// Reflectors visible from grid element `elem`, nearest first (ties by index).
pub fn visible_at<T: Scalar>(elem: usize, pl: &Placement<T>, masks: &[VisibilityMask], grid: &Grid<T>) -> Vec<(Lrp<T>, T)> {
    let p = grid.center(elem);
    let mut out: Vec<(Lrp<T>, T)> = pl
        .lrps()
        .iter()
        .zip(masks)
        .filter(|(_, m)| m.get(elem))
        .map(|(l, _)| (*l, p.dist(l.position)))
        .collect();
    out.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.index.cmp(&b.0.index)));
    out
}

/// Reflectors visible from the grid center `p_r` with their 3D distances.
pub fn visible_lrps<T: Scalar>(
    p_r: Point3<T>,
    pl: &Placement<T>,
    masks: &[VisibilityMask],
    grid: &Grid<T>,
) -> Result<Vec<(Lrp<T>, T)>> {
    if masks.len() != pl.len() {
        return Err(Error::LengthMismatch { expected: pl.len(), actual: masks.len() });
    }
    let elem = grid.index_of_center(p_r).ok_or(Error::NotAGridCenter)?;
    Ok(visible_at(elem, pl, masks, grid))
}
