use super::{Point2, Point3, RoomModel};
use crate::{Error, Result, Scalar};

/// Square lattice of robot positions inside the room.
///
/// Lattice cell `(i, j)` has center `origin + (i, j) * element_size`;
/// only centers inside the room become grid elements.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    centers: Vec<Point3<T>>,
    cells: Vec<(usize, usize)>,
    element_size: T,
    origin: Point2<T>,
    nx: usize,
    ny: usize,
    lookup: Vec<Option<u32>>,
}

impl<T: Scalar> Grid<T> {
    /// Lattice anchored at the bounding-box minimum plus half a cell.
    pub fn build(room: &RoomModel<T>) -> Result<Self> {
        room.validate()?;
        let g = room.grid_size;
        let (lo, hi) = room.boundary.bounding_box();
        let half = g * T::of(0.5);
        let origin = Point2::new(lo.x + half, lo.y + half);
        let count = |extent: T| {
            (extent / g - T::of(1e-9)).ceil().to_usize().unwrap_or(0).max(1)
        };
        let nx = count(hi.x - lo.x);
        let ny = count(hi.y - lo.y);
        let mut grid = Self {
            centers: Vec::new(),
            cells: Vec::new(),
            element_size: g,
            origin,
            nx,
            ny,
            lookup: vec![None; nx * ny],
        };
        for j in 0..ny {
            for i in 0..nx {
                let c = grid.cell_center(i, j);
                if room.boundary.contains(c) {
                    grid.lookup[j * nx + i] = Some(grid.centers.len() as u32);
                    grid.centers.push(c.with_z(room.radar_height));
                    grid.cells.push((i, j));
                }
            }
        }
        if grid.centers.is_empty() {
            return Err(Error::EmptyGrid);
        }
        Ok(grid)
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn centers(&self) -> &[Point3<T>] {
        &self.centers
    }

    pub fn center(&self, idx: usize) -> Point3<T> {
        self.centers[idx]
    }

    pub fn element_size(&self) -> T {
        self.element_size
    }

    /// Lattice dimensions `(nx, ny)` of the bounding box.
    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn cell(&self, idx: usize) -> (usize, usize) {
        self.cells[idx]
    }

    pub fn cell_center(&self, i: usize, j: usize) -> Point2<T> {
        Point2::new(
            self.origin.x + T::of_usize(i) * self.element_size,
            self.origin.y + T::of_usize(j) * self.element_size,
        )
    }

    pub fn index_of_cell(&self, i: usize, j: usize) -> Option<usize> {
        if i < self.nx && j < self.ny {
            self.lookup[j * self.nx + i].map(|v| v as usize)
        } else {
            None
        }
    }

    /// Element whose center coincides with `p` (up to rounding).
    pub fn index_of_center(&self, p: Point3<T>) -> Option<usize> {
        let (i, j) = self.lattice_coords(p.xy())?;
        let idx = self.index_of_cell(i, j)?;
        let c = self.centers[idx];
        let tol = self.element_size * T::of(1e-6);
        ((c.x - p.x).abs() <= tol && (c.y - p.y).abs() <= tol).then_some(idx)
    }

    fn lattice_coords(&self, p: Point2<T>) -> Option<(usize, usize)> {
        let fi = ((p.x - self.origin.x) / self.element_size).round();
        let fj = ((p.y - self.origin.y) / self.element_size).round();
        if fi < T::zero() || fj < T::zero() {
            return None;
        }
        Some((fi.to_usize()?, fj.to_usize()?))
    }

    /// Grid element nearest to `p`.
    pub fn nearest(&self, p: Point2<T>) -> usize {
        let fi = ((p.x - self.origin.x) / self.element_size).round();
        let fj = ((p.y - self.origin.y) / self.element_size).round();
        let clamp = |f: T, n: usize| -> usize {
            if f <= T::zero() {
                0
            } else {
                f.to_usize().unwrap_or(usize::MAX).min(n - 1)
            }
        };
        let (ci, cj) = (clamp(fi, self.nx), clamp(fj, self.ny));
        let mut best: Option<(T, usize)> = None;
        if let Some(idx) = self.index_of_cell(ci, cj) {
            let c = self.centers[idx].xy();
            // the rounded cell is nearest unless p lies outside the lattice box
            let h = self.element_size * T::of(0.5 + 1e-9);
            if (c.x - p.x).abs() <= h && (c.y - p.y).abs() <= h {
                return idx;
            }
            best = Some((c.dist_sq(p), idx));
        }
        // expanding ring search; terminates once a ring lies farther than the best hit
        let max_r = self.nx.max(self.ny);
        for r in 1..=max_r {
            let ring_min = T::of_usize(r - 1) * self.element_size;
            if let Some((bd, _)) = best {
                if ring_min * ring_min > bd {
                    break;
                }
            }
            let (i0, i1) = (ci.saturating_sub(r), (ci + r).min(self.nx - 1));
            let (j0, j1) = (cj.saturating_sub(r), (cj + r).min(self.ny - 1));
            for j in j0..=j1 {
                for i in i0..=i1 {
                    if i.abs_diff(ci) != r && j.abs_diff(cj) != r {
                        continue;
                    }
                    if let Some(idx) = self.index_of_cell(i, j) {
                        let d = self.centers[idx].xy().dist_sq(p);
                        if best.map_or(true, |(bd, bi)| d < bd || (d == bd && idx < bi)) {
                            best = Some((d, idx));
                        }
                    }
                }
            }
        }
        best.map(|(_, i)| i).unwrap_or(0)
    }

    /// Up to four lattice neighbours that are grid elements.
    pub fn neighbors4(&self, idx: usize) -> impl Iterator<Item = usize> + '_ {
        let (i, j) = self.cells[idx];
        let cand = [
            (i.wrapping_sub(1), j),
            (i + 1, j),
            (i, j.wrapping_sub(1)),
            (i, j + 1),
        ];
        cand.into_iter().filter_map(move |(a, b)| self.index_of_cell(a, b))
    }

    /// 4-connected components of the elements where `select` is true.
    /// Components are ordered by their smallest element index and each
    /// component lists its elements in ascending order.
    pub fn components(&self, select: &[bool]) -> Vec<Vec<usize>> {
        debug_assert_eq!(select.len(), self.len());
        let mut label = vec![usize::MAX; self.len()];
        let mut out = Vec::new();
        let mut stack = Vec::new();
        for start in 0..self.len() {
            if !select[start] || label[start] != usize::MAX {
                continue;
            }
            let id = out.len();
            let mut comp = Vec::new();
            label[start] = id;
            stack.push(start);
            while let Some(e) = stack.pop() {
                comp.push(e);
                for nb in self.neighbors4(e) {
                    if select[nb] && label[nb] == usize::MAX {
                        label[nb] = id;
                        stack.push(nb);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    /// Mean `(x, y)` of a set of elements.
    pub fn centroid_of(&self, elements: &[usize]) -> Point2<T> {
        let mut c = Point2::zero();
        for &e in elements {
            c += self.centers[e].xy();
        }
        c * (T::one() / T::of_usize(elements.len().max(1)))
    }
}
