//! Variable-dimension multi-objective particle swarm over reflector placements.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::assign::align_leader;
use crate::geom::{Grid, Point2, RoomModel};
use crate::objectives::{evaluate, EvalConfig, Objectives};
use crate::placement::{compute_masks, type_to_add, type_to_remove, visible_counts, Placement};
use crate::repair::{random_feasible, random_placement, repair, sample_in_margin, RepairConfig};
use crate::{Error, Result, Scalar};

/// Pareto dominance for minimization: no worse in both, better in one.
pub fn dominates<T: PartialOrd>(a: (T, T), b: (T, T)) -> bool {
    a.0 <= b.0 && a.1 <= b.1 && (a.0 < b.0 || a.1 < b.1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsoConfig<T> {
    pub swarm_size: usize,
    pub iterations: usize,
    pub w_range: (T, T),
    pub c1_range: (T, T),
    pub c2_range: (T, T),
    /// Per particle and iteration; up and down mutation exclude each other.
    pub p_up: f64,
    pub p_down: f64,
    /// Inclusive range of initial reflector counts.
    pub m_init: (usize, usize),
    /// Reflector types in use (1 or 2).
    pub n_types: usize,
    pub archive_capacity: usize,
    /// Per-coordinate speed cap; `None` means twice the bounding-box
    /// diagonal divided by the iteration count.
    pub v_max: Option<T>,
    pub seed: u64,
    /// Snapshot period in iterations; 0 disables snapshots.
    pub snapshot_every: usize,
    pub eval: EvalConfig<T>,
    pub repair: RepairConfig<T>,
}

impl<T: Scalar> PsoConfig<T> {
    pub fn for_room(room: &RoomModel<T>) -> Self {
        Self {
            swarm_size: 500,
            iterations: 500,
            w_range: (T::of(0.1), T::of(0.5)),
            c1_range: (T::of(1.5), T::of(2.0)),
            c2_range: (T::of(1.5), T::of(2.0)),
            p_up: 0.05,
            p_down: 0.05,
            m_init: (27, 32),
            n_types: 2,
            archive_capacity: 100,
            v_max: None,
            seed: 0,
            snapshot_every: 0,
            eval: EvalConfig::for_room(room),
            repair: RepairConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        for (name, (lo, hi)) in [("w", self.w_range), ("c1", self.c1_range), ("c2", self.c2_range)] {
            if !(lo <= hi) || lo < T::zero() {
                return Err(Error::InvalidConfig(format!("{name} range must be a non-empty non-negative interval")));
            }
        }
        if !(0.0..=1.0).contains(&self.p_up) || !(0.0..=1.0).contains(&self.p_down) || self.p_up + self.p_down > 1.0 {
            return bad("mutation probabilities must lie in [0, 1] and sum to at most 1");
        }
        if self.swarm_size == 0 {
            return bad("swarm size must be positive");
        }
        let (lo, hi) = self.m_init;
        if lo == 0 || lo > hi || hi > self.eval.limits.max_lrps {
            return bad("initial reflector range must satisfy 1 <= lo <= hi <= m_max");
        }
        if !(1..=2).contains(&self.n_types) {
            return bad("n_types must be 1 or 2");
        }
        if self.archive_capacity == 0 {
            return bad("archive capacity must be positive");
        }
        if self.eval.fingerprint_size == 0 || self.eval.fingerprint_size > self.eval.limits.min_visible.max(1) {
            return bad("fingerprint size must lie in 1..=k_min");
        }
        if let Some(v) = self.v_max {
            if !(v > T::zero()) {
                return bad("v_max must be positive");
            }
        }
        Ok(())
    }

    pub fn effective_v_max(&self, room: &RoomModel<T>) -> T {
        self.v_max.unwrap_or_else(|| {
            let (lo, hi) = room.boundary.bounding_box();
            T::of(2.0) * lo.dist(hi) / T::of_usize(self.iterations.max(1))
        })
    }

    fn repair_config(&self) -> RepairConfig<T> {
        RepairConfig { limits: self.eval.limits, ..self.repair }
    }

    fn min_supportable(&self) -> usize {
        self.eval.limits.min_visible.max(self.eval.fingerprint_size).max(1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArchiveEntry<T> {
    pub placement: Placement<T>,
    pub objectives: Objectives<T>,
    pub crowding: T,
}

/// Bounded set of mutually non-dominated feasible solutions.
#[derive(Debug, Clone, PartialEq)]
pub struct ParetoArchive<T> {
    entries: Vec<ArchiveEntry<T>>,
    capacity: usize,
}

impl<T: Scalar> ParetoArchive<T> {
    pub fn new(capacity: usize) -> Self {
        Self { entries: Vec::new(), capacity: capacity.max(1) }
    }

    pub fn entries(&self) -> &[ArchiveEntry<T>] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Offers a candidate. Infeasible candidates, dominated candidates and
    /// exact duplicates of an archived objective pair are rejected.
    pub fn insert(&mut self, placement: &Placement<T>, objectives: Objectives<T>) -> bool {
        if !objectives.feasible {
            return false;
        }
        let c = objectives.as_pair();
        if self.entries.iter().any(|e| {
            let p = e.objectives.as_pair();
            p == c || dominates(p, c)
        }) {
            return false;
        }
        self.entries.retain(|e| !dominates(c, e.objectives.as_pair()));
        self.entries.push(ArchiveEntry { placement: placement.clone(), objectives, crowding: T::zero() });
        self.update_crowding();
        while self.entries.len() > self.capacity {
            let mut worst = 0;
            for (i, e) in self.entries.iter().enumerate() {
                if e.crowding <= self.entries[worst].crowding {
                    worst = i;
                }
            }
            self.entries.remove(worst);
            self.update_crowding();
        }
        true
    }

    /// Crowding distance: summed normalized neighbour gaps per objective,
    /// infinite for boundary entries.
    fn update_crowding(&mut self) {
        let n = self.entries.len();
        for e in &mut self.entries {
            e.crowding = T::zero();
        }
        if n <= 2 {
            for e in &mut self.entries {
                e.crowding = T::infinity();
            }
            return;
        }
        for obj in 0..2 {
            let val = |e: &ArchiveEntry<T>| {
                let p = e.objectives.as_pair();
                if obj == 0 { p.0 } else { p.1 }
            };
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| val(&self.entries[a]).partial_cmp(&val(&self.entries[b])).unwrap().then(a.cmp(&b)));
            let lo = val(&self.entries[idx[0]]);
            let hi = val(&self.entries[idx[n - 1]]);
            self.entries[idx[0]].crowding = T::infinity();
            self.entries[idx[n - 1]].crowding = T::infinity();
            let span = hi - lo;
            if span <= T::zero() {
                continue;
            }
            for k in 1..n - 1 {
                let gap = (val(&self.entries[idx[k + 1]]) - val(&self.entries[idx[k - 1]])) / span;
                let e = &mut self.entries[idx[k]];
                e.crowding = e.crowding + gap;
            }
        }
    }

    /// Binary tournament on crowding distance; ties are broken at random.
    pub fn select_leader<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<&ArchiveEntry<T>> {
        if self.entries.is_empty() {
            return Err(Error::EmptyArchive);
        }
        let a = &self.entries[rng.random_range(0..self.entries.len())];
        let b = &self.entries[rng.random_range(0..self.entries.len())];
        Ok(if a.crowding > b.crowding {
            a
        } else if b.crowding > a.crowding {
            b
        } else if rng.random_bool(0.5) {
            a
        } else {
            b
        })
    }

    pub fn best_f1(&self) -> Option<usize> {
        self.entries.iter().map(|e| e.objectives.f1).min()
    }

    pub fn best_f2(&self) -> Option<T> {
        self.entries.iter().map(|e| e.objectives.f2).min_by(|a, b| a.partial_cmp(b).unwrap())
    }

    /// Entries ordered by `(M, f1, f2)`.
    pub fn sorted(&self) -> Vec<&ArchiveEntry<T>> {
        let mut v: Vec<&ArchiveEntry<T>> = self.entries.iter().collect();
        v.sort_by(|a, b| {
            a.placement
                .len()
                .cmp(&b.placement.len())
                .then(a.objectives.f1.cmp(&b.objectives.f1))
                .then(a.objectives.f2.partial_cmp(&b.objectives.f2).unwrap())
        });
        v
    }
}

/// Inertia and acceleration factors of one velocity update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients<T> {
    pub w: T,
    pub c1r1: T,
    pub c2r2: T,
}

fn uniform<T: Scalar, R: Rng + ?Sized>((lo, hi): (T, T), rng: &mut R) -> T {
    if lo == hi {
        lo
    } else {
        T::of(rng.random_range(lo.as_f64()..=hi.as_f64()))
    }
}

pub fn draw_coefficients<T: Scalar, R: Rng + ?Sized>(cfg: &PsoConfig<T>, rng: &mut R) -> Coefficients<T> {
    let w = uniform(cfg.w_range, rng);
    let c1 = uniform(cfg.c1_range, rng);
    let c2 = uniform(cfg.c2_range, rng);
    let r1 = T::of(rng.random::<f64>());
    let r2 = T::of(rng.random::<f64>());
    Coefficients { w, c1r1: c1 * r1, c2r2: c2 * r2 }
}

/// `v ← w·v + c1r1·(pbest − θ) + c2r2·(leader − θ)` with both attractors
/// aligned to the particle's reflector order, clamped to `±v_max`.
pub fn velocity_update<T: Scalar>(
    placement: &Placement<T>,
    velocity: &[Point2<T>],
    pbest: &Placement<T>,
    leader: &Placement<T>,
    k: Coefficients<T>,
    v_max: T,
    type_constrained: bool,
) -> Vec<Point2<T>> {
    let ap = align_leader(placement, pbest, type_constrained);
    let al = align_leader(placement, leader, type_constrained);
    let clamp = |x: T| x.max(-v_max).min(v_max);
    (0..placement.len())
        .map(|i| {
            let th = placement.xy(i);
            let v = velocity[i] * k.w + (ap[i] - th) * k.c1r1 + (al[i] - th) * k.c2r2;
            Point2::new(clamp(v.x), clamp(v.y))
        })
        .collect()
}

/// Adds the velocity to every reflector and repairs the result.
pub fn position_update<T: Scalar, R: Rng + ?Sized>(
    placement: &Placement<T>,
    velocity: &[Point2<T>],
    room: &RoomModel<T>,
    grid: &Grid<T>,
    cfg: &RepairConfig<T>,
    rng: &mut R,
) -> Placement<T> {
    let mut moved = placement.clone();
    for (i, v) in velocity.iter().enumerate() {
        moved.set_xy(i, placement.xy(i) + *v);
    }
    repair(&moved, room, grid, cfg, rng).placement
}

/// Appends a reflector at a random point of the margin region with a random
/// velocity, keeping the type split. No-op at `m_max`.
pub fn upmutate<T: Scalar, R: Rng + ?Sized>(
    placement: &mut Placement<T>,
    velocity: &mut Vec<Point2<T>>,
    room: &RoomModel<T>,
    m_max: usize,
    n_types: usize,
    v_max: T,
    rng: &mut R,
) -> bool {
    if placement.len() >= m_max {
        return false;
    }
    let p = sample_in_margin(room, rng);
    let kind = type_to_add(placement.type_counts(), n_types);
    placement.push(p, kind, room.reflector_height);
    let vm = v_max.as_f64();
    velocity.push(Point2::new(T::of(rng.random_range(-vm..=vm)), T::of(rng.random_range(-vm..=vm))));
    true
}

/// Reflector removed by a down-mutation: the one of the removal type nearest
/// to the centroid of the largest region where the most reflectors are seen.
pub fn downmutation_target<T: Scalar>(
    placement: &Placement<T>,
    grid: &Grid<T>,
    masks: &[crate::geom::VisibilityMask],
    n_types: usize,
) -> Option<usize> {
    if placement.is_empty() {
        return None;
    }
    let counts = visible_counts(masks, grid.len());
    let max = *counts.iter().max()?;
    let select: Vec<bool> = counts.iter().map(|&c| c == max).collect();
    let comps = grid.components(&select);
    // largest component, earliest on ties
    let comp = comps.iter().fold(None::<&Vec<usize>>, |best, c| match best {
        Some(b) if b.len() >= c.len() => Some(b),
        _ => Some(c),
    })?;
    let centroid = grid.centroid_of(comp);
    let kind = type_to_remove(placement.type_counts(), n_types);
    (0..placement.len())
        .filter(|&i| placement.lrp(i).kind == kind)
        .min_by(|&a, &b| {
            placement.xy(a).dist_sq(centroid).partial_cmp(&placement.xy(b).dist_sq(centroid)).unwrap().then(a.cmp(&b))
        })
}

/// Removes the [`downmutation_target`] with its velocity and repairs; the
/// particle is left untouched when it is at the minimum size or the repair
/// fails.
#[allow(clippy::too_many_arguments)]
pub fn downmutate<T: Scalar, R: Rng + ?Sized>(
    placement: &mut Placement<T>,
    velocity: &mut Vec<Point2<T>>,
    room: &RoomModel<T>,
    grid: &Grid<T>,
    min_m: usize,
    n_types: usize,
    cfg: &RepairConfig<T>,
    rng: &mut R,
) -> bool {
    if placement.len() <= min_m {
        return false;
    }
    let masks = compute_masks(placement, room, grid);
    let Some(target) = downmutation_target(placement, grid, &masks, n_types) else {
        return false;
    };
    let mut trial = placement.clone();
    trial.remove(target);
    let r = repair(&trial, room, grid, cfg, rng);
    if !r.feasible {
        return false;
    }
    *placement = r.placement;
    velocity.remove(target);
    true
}

#[derive(Debug, Clone)]
pub struct Particle<T> {
    pub placement: Placement<T>,
    pub velocity: Vec<Point2<T>>,
    pub objectives: Objectives<T>,
    pub pbest: Placement<T>,
    pub pbest_objectives: Objectives<T>,
    rng: ChaCha8Rng,
}

/// Per-iteration progress record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationStats<T> {
    pub iteration: usize,
    pub archive_size: usize,
    pub best_f1: Option<usize>,
    pub best_f2: Option<T>,
    pub feasible_particles: usize,
    pub mean_m: f64,
    pub min_archive_m: Option<usize>,
}

/// Swarm state; [`Swarm::step`] advances one iteration.
pub struct Swarm<'a, T> {
    room: &'a RoomModel<T>,
    grid: &'a Grid<T>,
    cfg: PsoConfig<T>,
    v_max: T,
    particles: Vec<Particle<T>>,
    archive: ParetoArchive<T>,
    iteration: usize,
}

fn particle_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    rng
}

impl<'a, T: Scalar> Swarm<'a, T> {
    /// Random feasible initial swarm with sizes drawn from `m_init`.
    pub fn new(room: &'a RoomModel<T>, grid: &'a Grid<T>, cfg: PsoConfig<T>) -> Result<Self> {
        cfg.validate()?;
        let rcfg = cfg.repair_config();
        let placements: Vec<(Placement<T>, ChaCha8Rng)> = (0..cfg.swarm_size)
            .into_par_iter()
            .map(|j| {
                let mut rng = particle_rng(cfg.seed, j);
                let m = rng.random_range(cfg.m_init.0..=cfg.m_init.1);
                let pl = random_feasible(room, grid, m, cfg.n_types, &rcfg, &mut rng)
                    .unwrap_or_else(|_| random_placement(room, m, cfg.n_types, &mut rng));
                (pl, rng)
            })
            .collect();
        Self::build(room, grid, cfg, placements)
    }

    /// Swarm started from given placements, one per particle.
    pub fn from_placements(room: &'a RoomModel<T>, grid: &'a Grid<T>, cfg: PsoConfig<T>, placements: Vec<Placement<T>>) -> Result<Self> {
        let cfg = PsoConfig { swarm_size: placements.len(), ..cfg };
        cfg.validate()?;
        let seed = cfg.seed;
        let with_rng = placements.into_iter().enumerate().map(|(j, p)| (p, particle_rng(seed, j))).collect();
        Self::build(room, grid, cfg, with_rng)
    }

    fn build(room: &'a RoomModel<T>, grid: &'a Grid<T>, cfg: PsoConfig<T>, placements: Vec<(Placement<T>, ChaCha8Rng)>) -> Result<Self> {
        let eval = cfg.eval;
        let particles: Vec<Particle<T>> = placements
            .into_par_iter()
            .map(|(placement, rng)| {
                let masks = compute_masks(&placement, room, grid);
                let objectives = evaluate(&placement, room, grid, &masks, &eval);
                Particle {
                    velocity: vec![Point2::zero(); placement.len()],
                    pbest: placement.clone(),
                    pbest_objectives: objectives,
                    placement,
                    objectives,
                    rng,
                }
            })
            .collect();
        if particles.iter().all(|p| !p.objectives.feasible) {
            return Err(Error::InitializationFailed);
        }
        let mut archive = ParetoArchive::new(cfg.archive_capacity);
        for p in &particles {
            archive.insert(&p.placement, p.objectives);
        }
        let v_max = cfg.effective_v_max(room);
        Ok(Self { room, grid, cfg, v_max, particles, archive, iteration: 0 })
    }

    pub fn archive(&self) -> &ParetoArchive<T> {
        &self.archive
    }

    pub fn particles(&self) -> &[Particle<T>] {
        &self.particles
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn config(&self) -> &PsoConfig<T> {
        &self.cfg
    }

    pub fn stats(&self) -> IterationStats<T> {
        let n = self.particles.len().max(1);
        IterationStats {
            iteration: self.iteration,
            archive_size: self.archive.len(),
            best_f1: self.archive.best_f1(),
            best_f2: self.archive.best_f2(),
            feasible_particles: self.particles.iter().filter(|p| p.objectives.feasible).count(),
            mean_m: self.particles.iter().map(|p| p.placement.len()).sum::<usize>() as f64 / n as f64,
            min_archive_m: self.archive.entries().iter().map(|e| e.placement.len()).min(),
        }
    }

    /// One iteration: particles move in parallel against the archive as it
    /// stood at the start of the iteration, then personal bests and the
    /// archive are updated in particle order.
    pub fn step(&mut self) -> IterationStats<T> {
        let (room, grid, cfg, v_max) = (self.room, self.grid, &self.cfg, self.v_max);
        let archive = &self.archive;
        let rcfg = cfg.repair_config();
        let type_constrained = cfg.n_types >= 2;
        let min_m = cfg.min_supportable();
        self.particles.par_iter_mut().for_each(|p| {
            let rng = &mut p.rng;
            let leader = archive.select_leader(rng).map(|e| e.placement.clone()).unwrap_or_else(|_| p.pbest.clone());
            let k = draw_coefficients(cfg, rng);
            p.velocity = velocity_update(&p.placement, &p.velocity, &p.pbest, &leader, k, v_max, type_constrained);
            p.placement = position_update(&p.placement, &p.velocity, room, grid, &rcfg, rng);
            let u: f64 = rng.random();
            if u < cfg.p_up {
                if upmutate(&mut p.placement, &mut p.velocity, room, cfg.eval.limits.max_lrps, cfg.n_types, v_max, rng) {
                    p.placement = repair(&p.placement, room, grid, &rcfg, rng).placement;
                }
            } else if u < cfg.p_up + cfg.p_down {
                downmutate(&mut p.placement, &mut p.velocity, room, grid, min_m, cfg.n_types, &rcfg, rng);
            }
            debug_assert_eq!(p.velocity.len(), p.placement.len());
            let masks = compute_masks(&p.placement, room, grid);
            p.objectives = evaluate(&p.placement, room, grid, &masks, &cfg.eval);
        });
        for p in &mut self.particles {
            let new = p.objectives.as_pair();
            let old = p.pbest_objectives.as_pair();
            let replace = if dominates(new, old) {
                true
            } else if dominates(old, new) {
                false
            } else {
                p.rng.random_bool(0.5)
            };
            if replace {
                p.pbest = p.placement.clone();
                p.pbest_objectives = p.objectives;
            }
            self.archive.insert(&p.placement, p.objectives);
        }
        self.iteration += 1;
        self.stats()
    }

    /// Runs the configured number of iterations. `observer` sees the stats
    /// after initialization and after every iteration.
    pub fn run(mut self, mut observer: impl FnMut(&IterationStats<T>, &ParetoArchive<T>)) -> RunResult<T> {
        let mut log = vec![self.stats()];
        observer(&log[0], &self.archive);
        while self.iteration < self.cfg.iterations {
            let s = self.step();
            observer(&s, &self.archive);
            log.push(s);
        }
        RunResult { archive: self.archive, log }
    }
}

#[derive(Debug, Clone)]
pub struct RunResult<T> {
    pub archive: ParetoArchive<T>,
    /// Row 0 is the initial swarm.
    pub log: Vec<IterationStats<T>>,
}

/// Initializes a swarm and runs it to completion.
pub fn run<T: Scalar>(
    room: &RoomModel<T>,
    grid: &Grid<T>,
    cfg: PsoConfig<T>,
    observer: impl FnMut(&IterationStats<T>, &ParetoArchive<T>),
) -> Result<RunResult<T>> {
    Ok(Swarm::new(room, grid, cfg)?.run(observer))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{Polygon, VisibilityMask};
    use crate::placement::LrpType;
    use proptest::prelude::*;

    fn obj(f1: usize, f2: f64) -> Objectives<f64> {
        Objectives { f1, f2, feasible: true }
    }

    fn pl(pts: &[(f64, f64)], kinds: &[u8]) -> Placement<f64> {
        let xy: Vec<_> = pts.iter().map(|&(x, y)| Point2::new(x, y)).collect();
        let k: Vec<_> = kinds.iter().map(|&t| LrpType(t)).collect();
        Placement::new(&xy, &k, 3.0).unwrap()
    }

    #[test]
    fn dominance_examples() {
        assert!(dominates((1.0, 2.0), (2.0, 3.0)));
        assert!(!dominates((1.0, 2.0), (1.0, 2.0)));
        assert!(!dominates((1.0, 3.0), (2.0, 1.0)));
        assert!(!dominates((2.0, 1.0), (1.0, 3.0)));
    }

    #[test]
    fn archive_examples() {
        let p = pl(&[(0.0, 0.0)], &[0]);
        let mut a = ParetoArchive::new(10);
        assert!(a.insert(&p, obj(2, 2.0)));
        assert!(a.insert(&p, obj(1, 1.0)));
        assert_eq!(a.len(), 1);
        assert_eq!(a.entries()[0].objectives, obj(1, 1.0));
        let mut b = ParetoArchive::new(10);
        b.insert(&p, obj(2, 1.0));
        b.insert(&p, obj(1, 2.0));
        assert_eq!(b.len(), 2);
        assert!(!b.insert(&p, obj(1, 2.0)));
        assert!(!b.insert(&p, Objectives { f1: 0, f2: 0.0, feasible: false }));
    }

    proptest! {
        #[test]
        fn archive_stays_non_dominated_and_bounded(pts in prop::collection::vec((0usize..50, 0.0..50.0f64), 1..120)) {
            let p = pl(&[(0.0, 0.0)], &[0]);
            let mut a = ParetoArchive::new(8);
            for (f1, f2) in pts {
                a.insert(&p, obj(f1, f2));
                prop_assert!(a.len() <= 8);
                for x in a.entries() {
                    for y in a.entries() {
                        prop_assert!(!dominates(x.objectives.as_pair(), y.objectives.as_pair()));
                    }
                }
            }
        }

        #[test]
        fn archive_extremes_survive_truncation(pts in prop::collection::vec((0usize..1000, 0.0..1000.0f64), 1..200)) {
            let p = pl(&[(0.0, 0.0)], &[0]);
            let mut a = ParetoArchive::new(5);
            let mut best1 = usize::MAX;
            let mut best2 = f64::INFINITY;
            for (f1, f2) in pts {
                if a.insert(&p, obj(f1, f2)) || a.is_empty() {
                    best1 = best1.min(f1);
                    best2 = best2.min(f2);
                }
                prop_assert!(a.best_f1().unwrap() <= best1);
                prop_assert!(a.best_f2().unwrap() <= best2);
            }
        }
    }

    #[test]
    fn truncation_drops_most_crowded() {
        let p = pl(&[(0.0, 0.0)], &[0]);
        let mut a = ParetoArchive::new(3);
        a.insert(&p, obj(0, 10.0));
        a.insert(&p, obj(10, 0.0));
        a.insert(&p, obj(5, 5.0));
        a.insert(&p, obj(6, 4.0));
        let pairs: Vec<_> = a.entries().iter().map(|e| e.objectives.as_pair()).collect();
        assert_eq!(a.len(), 3);
        assert!(pairs.contains(&(0.0, 10.0)) && pairs.contains(&(10.0, 0.0)));
    }

    #[test]
    fn leader_selection() {
        let p = pl(&[(0.0, 0.0)], &[0]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let empty = ParetoArchive::<f64>::new(4);
        assert!(empty.select_leader(&mut rng).is_err());
        let mut a = ParetoArchive::new(10);
        a.insert(&p, obj(3, 3.0));
        assert_eq!(a.select_leader(&mut rng).unwrap().objectives, obj(3, 3.0));
        // front of five: the two extremes are infinitely crowded
        for k in 0..4 {
            a.insert(&p, obj(k, 3.0 - k as f64 * 0.5 - 0.5));
        }
        let mut hits = [0usize; 5];
        for _ in 0..10_000 {
            let e = a.select_leader(&mut rng).unwrap();
            hits[e.objectives.f1 as usize] += 1;
        }
        let interior: usize = hits[1..3].iter().sum::<usize>();
        assert!(hits[0] + hits[3] > interior, "{hits:?}");
    }

    #[test]
    fn tournament_prefers_infinite_crowding() {
        let p = pl(&[(0.0, 0.0)], &[0]);
        let a = ParetoArchive {
            entries: vec![
                ArchiveEntry { placement: p.clone(), objectives: obj(0, 1.0), crowding: f64::INFINITY },
                ArchiveEntry { placement: p, objectives: obj(1, 0.0), crowding: 0.1 },
            ],
            capacity: 2,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            let e = a.select_leader(&mut rng).unwrap();
            // a mixed draw always returns the infinite entry
            assert!(e.crowding.is_infinite() || e.crowding == 0.1);
        }
        let mut inf = 0;
        for _ in 0..4000 {
            if a.select_leader(&mut rng).unwrap().crowding.is_infinite() {
                inf += 1;
            }
        }
        // P(two draws of the finite entry) = 1/4
        assert!((inf as f64 / 4000.0 - 0.75).abs() < 0.03);
    }

    #[test]
    fn velocity_examples() {
        let th = pl(&[(1.0, 1.0)], &[0]);
        let k = Coefficients { w: 0.5, c1r1: 1.0, c2r2: 1.0 };
        let v = velocity_update(&th, &[Point2::zero()], &pl(&[(2.0, 1.0)], &[0]), &pl(&[(1.0, 3.0)], &[0]), k, 10.0, true);
        assert_eq!(v, vec![Point2::new(1.0, 2.0)]);
        let v = velocity_update(&th, &[Point2::zero()], &th, &th, k, 10.0, true);
        assert_eq!(v, vec![Point2::zero()]);
        let inertia = Coefficients { w: 1.0, c1r1: 0.0, c2r2: 0.0 };
        let v0 = [Point2::new(0.3, -0.2)];
        assert_eq!(velocity_update(&th, &v0, &pl(&[(5.0, 5.0)], &[0]), &th, inertia, 10.0, true), v0.to_vec());
        // clamp
        let v = velocity_update(&th, &[Point2::zero()], &pl(&[(9.0, 1.0)], &[0]), &th, k, 0.5, true);
        assert_eq!(v, vec![Point2::new(0.5, 0.0)]);
    }

    fn room4() -> (RoomModel<f64>, Grid<f64>) {
        let room = RoomModel {
            grid_size: 0.5,
            radar_height: 0.5,
            reflector_height: 3.0,
            cone_half_angle: 60f64.to_radians(),
            ..RoomModel::new(Polygon::rectangle(0.0, 0.0, 4.0, 4.0).unwrap())
        };
        let grid = Grid::build(&room).unwrap();
        (room, grid)
    }

    #[test]
    fn position_update_examples() {
        let (room, grid) = room4();
        let cfg = RepairConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = Placement::with_assigned_types(
            &[Point2::new(1.0, 1.0), Point2::new(3.0, 1.0), Point2::new(3.0, 3.0), Point2::new(1.0, 3.0), Point2::new(2.0, 2.0)],
            2,
            &room,
        );
        let zero = vec![Point2::zero(); 5];
        assert_eq!(position_update(&p, &zero, &room, &grid, &cfg, &mut rng), p);
        let mut out = zero.clone();
        out[0] = Point2::new(-2.0, 0.0);
        let q = position_update(&p, &out, &room, &grid, &cfg, &mut rng);
        assert!(room.in_margin_region(q.xy(0)));
        let mut close = zero;
        close[4] = Point2::new(-0.9, -0.9);
        let q = position_update(&p, &close, &room, &grid, &cfg, &mut rng);
        assert!(crate::placement::spacing_violations(&q, 0.5).is_empty());
    }

    #[test]
    fn upmutation_rules() {
        let (room, _) = room4();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut p = Placement::with_assigned_types(&[Point2::new(1.0, 1.0), Point2::new(3.0, 1.0), Point2::new(3.0, 3.0), Point2::new(1.0, 3.0)], 2, &room);
        let mut v = vec![Point2::zero(); 4];
        assert!(upmutate(&mut p, &mut v, &room, 32, 2, 0.3, &mut rng));
        assert_eq!(p.len(), 5);
        assert_eq!(v.len(), 5);
        assert_eq!(p.lrp(4).kind, LrpType::ZERO);
        assert_eq!(p.type_counts(), [3, 2]);
        assert!(room.in_margin_region(p.xy(4)));
        assert!(v[4].x.abs() <= 0.3 && v[4].y.abs() <= 0.3);
        let before = p.clone();
        assert!(!upmutate(&mut p, &mut v, &room, 5, 2, 0.3, &mut rng));
        assert_eq!(p, before);
        assert_eq!(v.len(), 5);
    }

    #[test]
    fn downmutation_uniform_visibility_targets_grid_centroid() {
        let (_room, grid) = room4();
        let p = pl(&[(1.0, 1.0), (2.1, 2.2), (3.0, 3.0), (1.9, 1.7), (3.0, 1.0)], &[0, 1, 0, 1, 0]);
        let masks = vec![VisibilityMask::all(grid.len(), true); 5];
        // split 3+2: type 0 goes; nearest type-0 to (2, 2) is index 0 or 2 -> tie at equal distance, lower index
        assert_eq!(downmutation_target(&p, &grid, &masks, 2), Some(0));
        let q = pl(&[(1.0, 1.0), (2.1, 2.2), (3.0, 3.0), (1.9, 1.7)], &[0, 0, 0, 1]);
        assert_eq!(downmutation_target(&q, &grid, &masks[..4], 2), Some(1));
    }

    #[test]
    fn downmutation_picks_denser_cluster() {
        let room = RoomModel { grid_size: 1.0, ..RoomModel::new(Polygon::rectangle(0.0, 0.0, 8.0, 1.0).unwrap()) };
        let grid = Grid::build(&room).unwrap();
        // elements 0-2 see three reflectors, element 6 sees three as well, 7 sees one
        let on = |es: &[usize]| VisibilityMask::new((0..8).map(|e| es.contains(&e)).collect());
        let masks = vec![on(&[0, 1, 2, 6]), on(&[0, 1, 2, 6]), on(&[0, 1, 2, 6, 7])];
        let p = pl(&[(6.5, 0.5), (1.6, 0.5), (0.5, 0.5)], &[0, 0, 0]);
        // brute-force oracle: max count 3 attained on {0,1,2} and {6}; the larger centroid is (1.5, 0.5)
        let counts = visible_counts(&masks, 8);
        let max = *counts.iter().max().unwrap();
        assert_eq!(max, 3);
        assert_eq!(downmutation_target(&p, &grid, &masks, 1), Some(1));
    }

    #[test]
    fn downmutate_respects_minimum() {
        let (room, grid) = room4();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut p = Placement::with_assigned_types(&[Point2::new(1.0, 1.0), Point2::new(3.0, 1.0), Point2::new(3.0, 3.0), Point2::new(1.0, 3.0)], 2, &room);
        let mut v = vec![Point2::zero(); 4];
        assert!(!downmutate(&mut p, &mut v, &room, &grid, 4, 2, &RepairConfig::default(), &mut rng));
        assert_eq!(p.len(), 4);
    }

    fn small_cfg(room: &RoomModel<f64>, seed: u64) -> PsoConfig<f64> {
        PsoConfig {
            swarm_size: 6,
            iterations: 4,
            m_init: (5, 7),
            seed,
            ..PsoConfig::for_room(room)
        }
    }

    #[test]
    fn zero_iterations_archive_is_initial_front() {
        let (room, grid) = room4();
        let cfg = PsoConfig { iterations: 0, ..small_cfg(&room, 1) };
        let swarm = Swarm::new(&room, &grid, cfg).unwrap();
        let initial: Vec<(f64, f64)> =
            swarm.particles().iter().filter(|p| p.objectives.feasible).map(|p| p.objectives.as_pair()).collect();
        let res = swarm.run(|_, _| {});
        for e in res.archive.entries() {
            assert!(initial.contains(&e.objectives.as_pair()));
        }
        for &c in &initial {
            let covered = res.archive.entries().iter().any(|e| {
                let p = e.objectives.as_pair();
                p == c || dominates(p, c)
            });
            assert!(covered);
        }
        assert_eq!(res.log.len(), 1);
    }

    #[test]
    fn run_invariants_and_determinism() {
        let (room, grid) = room4();
        let mut pbests: Vec<Vec<(f64, f64)>> = vec![Vec::new(); 6];
        let mut swarm = Swarm::new(&room, &grid, small_cfg(&room, 5)).unwrap();
        let mut prev = swarm.stats();
        for _ in 0..4 {
            let before: Vec<(f64, f64)> = swarm.particles().iter().map(|p| p.pbest_objectives.as_pair()).collect();
            let s = swarm.step();
            for (j, p) in swarm.particles().iter().enumerate() {
                assert_eq!(p.velocity.len(), p.placement.len());
                let masks = compute_masks(&p.placement, &room, &grid);
                let rep = crate::placement::check_constraints(&p.placement, &room, &grid, &masks, &swarm.config().eval.limits).unwrap();
                assert_eq!(rep.feasible, p.objectives.feasible);
                assert!(!dominates(before[j], p.pbest_objectives.as_pair()));
                pbests[j].push(p.pbest_objectives.as_pair());
            }
            assert!(s.best_f1.unwrap() <= prev.best_f1.unwrap());
            assert!(s.best_f2.unwrap() <= prev.best_f2.unwrap());
            prev = s;
        }
        let a = run(&room, &grid, small_cfg(&room, 5), |_, _| {}).unwrap();
        let b = run(&room, &grid, small_cfg(&room, 5), |_, _| {}).unwrap();
        assert_eq!(a.archive, b.archive);
        assert_eq!(a.log, b.log);
    }

    #[test]
    fn shuffled_initial_orders_give_same_front() {
        let (room, grid) = room4();
        let cfg = PsoConfig { p_up: 0.0, p_down: 0.0, n_types: 1, ..small_cfg(&room, 11) };
        let init: Vec<Placement<f64>> = Swarm::new(&room, &grid, cfg.clone()).unwrap().particles().iter().map(|p| p.placement.clone()).collect();
        let shuffled: Vec<Placement<f64>> = init
            .iter()
            .map(|p| {
                let mut xy = p.positions_xy();
                xy.reverse();
                let mut k = p.kinds();
                k.reverse();
                Placement::new(&xy, &k, room.reflector_height).unwrap()
            })
            .collect();
        let a = Swarm::from_placements(&room, &grid, cfg.clone(), init).unwrap().run(|_, _| {});
        let b = Swarm::from_placements(&room, &grid, cfg, shuffled).unwrap().run(|_, _| {});
        let pairs = |r: &RunResult<f64>| r.archive.entries().iter().map(|e| (e.objectives.f1, e.objectives.f2)).collect::<Vec<_>>();
        let (pa, pb) = (pairs(&a), pairs(&b));
        assert_eq!(pa.len(), pb.len());
        for (x, y) in pa.iter().zip(&pb) {
            assert_eq!(x.0, y.0);
            assert!((x.1 - y.1).abs() <= 1e-9 * x.1.abs());
        }
    }

    #[test]
    fn config_validation() {
        let (room, _) = room4();
        let mut c = PsoConfig::for_room(&room);
        assert!(c.validate().is_ok());
        c.p_up = 0.8;
        c.p_down = 0.5;
        assert!(c.validate().is_err());
        let mut c = PsoConfig::for_room(&room);
        c.w_range = (0.6, 0.5);
        assert!(c.validate().is_err());
        let mut c = PsoConfig::for_room(&room);
        c.m_init = (10, 40);
        assert!(c.validate().is_err());
    }
}
