//! Minimum-cost assignment and leader alignment.

use crate::geom::Point2;
use crate::placement::{LrpType, Placement};
use crate::{Error, Result, Scalar};

/// Minimum-cost assignment of every row to a distinct column.
///
/// `cost` is row-major with `rows <= cols`. Among optimal assignments the
/// lexicographically smallest column sequence is returned.
pub fn hungarian<T: Scalar>(cost: &[Vec<T>]) -> Result<Vec<usize>> {
    let n = cost.len();
    if n == 0 || cost[0].is_empty() {
        return Err(Error::EmptyCostMatrix);
    }
    let m = cost[0].len();
    if cost.iter().any(|r| r.len() != m) {
        return Err(Error::LengthMismatch { expected: m, actual: cost.iter().map(Vec::len).find(|&l| l != m).unwrap_or(m) });
    }
    if n > m {
        return Err(Error::TooManyRows { rows: n, cols: m });
    }
    // square with zero-cost dummy rows
    let a = |i: usize, j: usize| if i < n { cost[i][j] } else { T::zero() };
    let (u, v, row_of_col) = solve_square(m, &a);
    let mut col_of_row = vec![0usize; m];
    for (j, &r) in row_of_col.iter().enumerate() {
        col_of_row[r] = j;
    }
    let scale = cost.iter().flatten().fold(T::zero(), |s, c| s.max(c.abs()));
    let tol = T::geom_eps() * (T::one() + scale) * T::of_usize(m);
    let tight = |i: usize, j: usize| a(i, j) - u[i] - v[j] <= tol;
    let ambiguous = (0..n).any(|i| (0..m).filter(|&j| tight(i, j)).count() > 1);
    if ambiguous {
        lexicographic_matching(n, m, &tight, &mut col_of_row);
    }
    col_of_row.truncate(n);
    Ok(col_of_row)
}

/// Sum of `cost[i][assignment[i]]`.
pub fn assignment_cost<T: Scalar>(cost: &[Vec<T>], assignment: &[usize]) -> T {
    assignment.iter().enumerate().map(|(i, &j)| cost[i][j]).fold(T::zero(), |s, c| s + c)
}

/// Shortest augmenting path method with potentials on an `m × m` matrix.
/// Returns row potentials, column potentials and the row matched to each column.
fn solve_square<T: Scalar>(m: usize, a: &impl Fn(usize, usize) -> T) -> (Vec<T>, Vec<T>, Vec<usize>) {
    let inf = T::infinity();
    let mut u = vec![T::zero(); m + 1];
    let mut v = vec![T::zero(); m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=m {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = a(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let row_of_col = (1..=m).map(|j| p[j] - 1).collect();
    (u[1..].to_vec(), v[1..].to_vec(), row_of_col)
}

/// Rewrites a perfect matching of the equality subgraph into the
/// lexicographically smallest one over the first `n` rows. Every perfect
/// matching of tight edges is optimal, so only tight edges are considered.
fn lexicographic_matching(n: usize, m: usize, tight: &impl Fn(usize, usize) -> bool, col_of_row: &mut [usize]) {
    let mut row_of_col = vec![0usize; m];
    for (r, &c) in col_of_row.iter().enumerate() {
        row_of_col[c] = r;
    }
    let mut fixed = vec![false; m];
    for i in 0..n {
        for j in 0..m {
            if !tight(i, j) {
                continue;
            }
            let old = col_of_row[i];
            if j == old {
                break;
            }
            let r = row_of_col[j];
            if fixed[r] {
                continue;
            }
            fixed[i] = true;
            col_of_row[i] = j;
            row_of_col[j] = i;
            let mut seen = vec![false; m];
            seen[j] = true;
            if augment(r, old, tight, &fixed, &mut seen, col_of_row, &mut row_of_col) {
                break;
            }
            col_of_row[i] = old;
            row_of_col[j] = r;
            col_of_row[r] = j;
            fixed[i] = false;
        }
        fixed[i] = true;
    }
}

/// Alternating path from row `r` to the free column `target` over tight
/// edges, avoiding fixed rows; applies it on success.
fn augment(
    r: usize,
    target: usize,
    tight: &impl Fn(usize, usize) -> bool,
    fixed: &[bool],
    seen: &mut [bool],
    col_of_row: &mut [usize],
    row_of_col: &mut [usize],
) -> bool {
    for c in 0..seen.len() {
        if seen[c] || !tight(r, c) {
            continue;
        }
        seen[c] = true;
        let ok = if c == target {
            true
        } else {
            let r2 = row_of_col[c];
            !fixed[r2] && augment(r2, target, tight, fixed, seen, col_of_row, row_of_col)
        };
        if ok {
            col_of_row[r] = c;
            row_of_col[c] = r;
            return true;
        }
    }
    false
}

/// Leader coordinates reordered to the particle's reflector order.
///
/// Matches particle and leader reflectors by minimum summed squared distance,
/// within each type when `type_constrained`. Surplus leader reflectors are
/// dropped; particle reflectors left unmatched get their own coordinates.
pub fn align_leader<T: Scalar>(particle: &Placement<T>, leader: &Placement<T>, type_constrained: bool) -> Vec<Point2<T>> {
    let mut out = particle.positions_xy();
    let groups: Vec<Option<LrpType>> = if type_constrained {
        vec![Some(LrpType::ZERO), Some(LrpType::ONE)]
    } else {
        vec![None]
    };
    for g in groups {
        let pick = |pl: &Placement<T>| -> Vec<usize> {
            (0..pl.len()).filter(|&i| g.map_or(true, |t| pl.lrp(i).kind == t)).collect()
        };
        let pi = pick(particle);
        let li = pick(leader);
        if pi.is_empty() || li.is_empty() {
            continue;
        }
        let d = |a: usize, b: usize| particle.xy(a).dist_sq(leader.xy(b));
        if pi.len() <= li.len() {
            let cost: Vec<Vec<T>> = pi.iter().map(|&a| li.iter().map(|&b| d(a, b)).collect()).collect();
            let asg = hungarian(&cost).expect("non-empty group");
            for (k, &a) in pi.iter().enumerate() {
                out[a] = leader.xy(li[asg[k]]);
            }
        } else {
            let cost: Vec<Vec<T>> = li.iter().map(|&b| pi.iter().map(|&a| d(a, b)).collect()).collect();
            let asg = hungarian(&cost).expect("non-empty group");
            for (k, &b) in li.iter().enumerate() {
                out[pi[asg[k]]] = leader.xy(b);
            }
        }
    }
    out
}

/// Summed squared distance between the particle and its aligned leader vector.
pub fn alignment_cost<T: Scalar>(particle: &Placement<T>, aligned: &[Point2<T>]) -> T {
    (0..particle.len()).fold(T::zero(), |s, i| s + particle.xy(i).dist_sq(aligned[i]))
}
