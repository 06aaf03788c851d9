//! Particle-filter tracking against a fingerprint map.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::assign::hungarian;
use crate::geom::{Grid, Point2, RoomModel};
use crate::objectives::Fingerprint;
use crate::placement::LrpType;
use crate::{Result, Scalar};

/// Weight factor for a pose whose cell has no complete fingerprint.
pub const MISSING_FINGERPRINT_WEIGHT: f64 = 1e-12;
/// Weight factor per measurement entry left without a partner of its type.
pub const UNMATCHED_ENTRY_WEIGHT: f64 = 1e-3;
/// Weight factor applied to particles pushed back into the room.
pub const OUTSIDE_PENALTY: f64 = 0.1;

/// A detected fingerprint: `(distance bin, type)` pairs.
pub type Measurement = Fingerprint;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose<T> {
    pub x: T,
    pub y: T,
    /// Radians in `(-π, π]`.
    pub heading: T,
}

impl<T: Scalar> Pose<T> {
    pub fn new(x: T, y: T, heading: T) -> Self {
        Self { x, y, heading: wrap_angle(heading) }
    }

    pub fn xy(&self) -> Point2<T> {
        Point2::new(self.x, self.y)
    }
}

/// Maps an angle into `(-π, π]`.
pub fn wrap_angle<T: Scalar>(a: T) -> T {
    let two_pi = T::PI() + T::PI();
    let mut a = a % two_pi;
    if a > T::PI() {
        a -= two_pi;
    } else if a <= -T::PI() {
        a += two_pi;
    }
    a
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseParticle<T> {
    pub pose: Pose<T>,
    pub weight: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdometryInput<T> {
    pub distance: T,
    pub rotation: T,
}

impl<T: Scalar> OdometryInput<T> {
    pub fn zero() -> Self {
        Self { distance: T::zero(), rotation: T::zero() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmclConfig<T> {
    pub particles: usize,
    /// Standard deviation of the range residual in the likelihood.
    pub sigma_r: T,
    pub range_resolution: T,
    /// Odometry noise assumed by the motion model.
    pub sigma_d: T,
    pub sigma_theta: T,
    /// Resample when the effective sample size drops below this fraction of
    /// the particle count.
    pub resample_fraction: T,
}

impl<T: Scalar> AmclConfig<T> {
    pub fn for_room(room: &RoomModel<T>) -> Self {
        Self {
            particles: 2000,
            sigma_r: room.range_resolution,
            range_resolution: room.range_resolution,
            sigma_d: T::of(0.02),
            sigma_theta: T::of(5f64.to_radians()),
            resample_fraction: T::of(0.5),
        }
    }
}

/// Uniform sample inside the room by rejection from the bounding box.
pub fn sample_in_room<T: Scalar, R: Rng + ?Sized>(room: &RoomModel<T>, rng: &mut R) -> Point2<T> {
    let (lo, hi) = room.boundary.bounding_box();
    loop {
        let p = Point2::new(
            T::of(rng.random_range(lo.x.as_f64()..=hi.x.as_f64())),
            T::of(rng.random_range(lo.y.as_f64()..=hi.y.as_f64())),
        );
        if room.boundary.contains(p) {
            return p;
        }
    }
}

fn random_heading<T: Scalar, R: Rng + ?Sized>(rng: &mut R) -> T {
    wrap_angle(T::of(rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)))
}

/// `n` particles uniform over the room and heading, equally weighted.
pub fn init_particles<T: Scalar, R: Rng + ?Sized>(room: &RoomModel<T>, n: usize, rng: &mut R) -> Vec<PoseParticle<T>> {
    let w = T::one() / T::of_usize(n.max(1));
    (0..n)
        .map(|_| {
            let p = sample_in_room(room, rng);
            let h = random_heading(rng);
            PoseParticle { pose: Pose::new(p.x, p.y, h), weight: w }
        })
        .collect()
}

fn gaussian<T: Scalar, R: Rng + ?Sized>(sigma: T, rng: &mut R) -> T {
    if sigma <= T::zero() {
        return T::zero();
    }
    let n = Normal::new(0.0, sigma.as_f64()).expect("finite positive sigma");
    T::of(n.sample(rng))
}

/// Moves `p` just inside the room if it left it.
fn clamp_into_room<T: Scalar>(p: Point2<T>, fallback: Point2<T>, room: &RoomModel<T>) -> Option<Point2<T>> {
    if room.boundary.contains(p) {
        return None;
    }
    let q = room.boundary.nearest_boundary_point(p).point;
    let inward = (q - p).normalized().unwrap_or_else(Point2::zero);
    let nudge = T::of(1e-6).max(T::geom_eps() * room.boundary.scale() * T::of(10.0));
    let c = q + inward * nudge;
    Some(if room.boundary.contains(c) { c } else { fallback })
}

/// Noisy odometry step per particle: turn, then drive. Particles that leave
/// the room are put back on its boundary and down-weighted.
pub fn motion_update<T: Scalar, R: Rng + ?Sized>(
    particles: &mut [PoseParticle<T>],
    odo: OdometryInput<T>,
    (sigma_d, sigma_theta): (T, T),
    room: &RoomModel<T>,
    rng: &mut R,
) {
    for p in particles.iter_mut() {
        let heading = wrap_angle(p.pose.heading + odo.rotation + gaussian(sigma_theta, rng));
        let d = odo.distance + gaussian(sigma_d, rng);
        let from = p.pose.xy();
        let to = from + Point2::new(heading.cos(), heading.sin()) * d;
        let to = match clamp_into_room(to, from, room) {
            Some(c) => {
                p.weight = p.weight * T::of(OUTSIDE_PENALTY);
                c
            }
            None => to,
        };
        p.pose = Pose { x: to.x, y: to.y, heading };
    }
}

fn split_by_type(entries: &[(i64, LrpType)]) -> [Vec<i64>; 2] {
    let mut g = [Vec::new(), Vec::new()];
    for &(b, t) in entries {
        g[(t.0 as usize).min(1)].push(b);
    }
    g
}

/// Likelihood of `meas` given the fingerprint expected at a pose's cell.
///
/// Entries are matched within each type by a minimum-cost assignment on the
/// absolute bin difference; matched pairs contribute a Gaussian factor on the
/// range residual and every unmatched entry contributes
/// [`UNMATCHED_ENTRY_WEIGHT`].
pub fn fingerprint_likelihood<T: Scalar>(expected: Option<&Fingerprint>, meas: &Measurement, cfg: &AmclConfig<T>) -> T {
    let Some(expected) = expected else {
        return T::of(MISSING_FINGERPRINT_WEIGHT);
    };
    let ge = split_by_type(expected.entries());
    let gm = split_by_type(meas.entries());
    let two_var = T::of(2.0) * cfg.sigma_r * cfg.sigma_r;
    let mut w = T::one();
    for t in 0..2 {
        let (a, b) = if gm[t].len() <= ge[t].len() { (&gm[t], &ge[t]) } else { (&ge[t], &gm[t]) };
        let unmatched = b.len() - a.len();
        for _ in 0..unmatched {
            w = w * T::of(UNMATCHED_ENTRY_WEIGHT);
        }
        if a.is_empty() {
            continue;
        }
        let cost: Vec<Vec<T>> = a.iter().map(|&x| b.iter().map(|&y| T::of(((x - y) as f64).abs())).collect()).collect();
        let asg = hungarian(&cost).expect("rows never exceed columns");
        for (i, &j) in asg.iter().enumerate() {
            let r = T::of((a[i] - b[j]) as f64) * cfg.range_resolution;
            w = w * (-(r * r) / two_var).exp();
        }
    }
    w
}

/// [`fingerprint_likelihood`] at the grid element nearest to `pose`.
pub fn measurement_likelihood<T: Scalar>(
    pose: &Pose<T>,
    meas: &Measurement,
    table: &[Option<Fingerprint>],
    grid: &Grid<T>,
    cfg: &AmclConfig<T>,
) -> T {
    let e = grid.nearest(pose.xy());
    fingerprint_likelihood(table[e].as_ref(), meas, cfg)
}

/// Normalizes weights to sum 1. Returns `false` and resets to uniform when
/// all weights vanished.
pub fn normalize_weights<T: Scalar>(particles: &mut [PoseParticle<T>]) -> bool {
    let sum: T = particles.iter().map(|p| p.weight).sum();
    if !(sum > T::zero()) || !sum.is_finite() {
        let w = T::one() / T::of_usize(particles.len().max(1));
        for p in particles.iter_mut() {
            p.weight = w;
        }
        return false;
    }
    for p in particles.iter_mut() {
        p.weight = p.weight / sum;
    }
    true
}

/// Multiplies every weight by its measurement likelihood and normalizes.
pub fn weight_update<T: Scalar>(
    particles: &mut [PoseParticle<T>],
    meas: &Measurement,
    table: &[Option<Fingerprint>],
    grid: &Grid<T>,
    cfg: &AmclConfig<T>,
) -> bool {
    particles.par_iter_mut().for_each(|p| {
        p.weight = p.weight * measurement_likelihood(&p.pose, meas, table, grid, cfg);
    });
    normalize_weights(particles)
}

pub fn effective_sample_size<T: Scalar>(particles: &[PoseParticle<T>]) -> T {
    let s: T = particles.iter().map(|p| p.weight * p.weight).sum();
    if s > T::zero() { T::one() / s } else { T::zero() }
}

/// Low-variance resampling to the same count with uniform weights.
pub fn systematic_resample<T: Scalar, R: Rng + ?Sized>(particles: &[PoseParticle<T>], rng: &mut R) -> Vec<PoseParticle<T>> {
    let n = particles.len();
    if n == 0 {
        return Vec::new();
    }
    let w = T::one() / T::of_usize(n);
    let u0: f64 = rng.random::<f64>() / n as f64;
    let mut out = Vec::with_capacity(n);
    let mut cum = particles[0].weight.as_f64();
    let mut i = 0;
    for k in 0..n {
        let u = u0 + k as f64 / n as f64;
        while u > cum && i + 1 < n {
            i += 1;
            cum += particles[i].weight.as_f64();
        }
        out.push(PoseParticle { pose: particles[i].pose, weight: w });
    }
    out
}

/// Systematic resampling when the effective sample size is below the
/// configured fraction of the count; identity otherwise. Returns whether it
/// resampled.
pub fn resample<T: Scalar, R: Rng + ?Sized>(particles: &mut Vec<PoseParticle<T>>, fraction: T, rng: &mut R) -> bool {
    let n = T::of_usize(particles.len());
    if effective_sample_size(particles) >= fraction * n {
        return false;
    }
    *particles = systematic_resample(particles, rng);
    true
}

/// Weighted mean position and weighted circular mean heading.
pub fn estimate<T: Scalar>(particles: &[PoseParticle<T>]) -> Pose<T> {
    let (mut x, mut y, mut s, mut c, mut ws) = (T::zero(), T::zero(), T::zero(), T::zero(), T::zero());
    for p in particles {
        x += p.weight * p.pose.x;
        y += p.weight * p.pose.y;
        s += p.weight * p.pose.heading.sin();
        c += p.weight * p.pose.heading.cos();
        ws += p.weight;
    }
    if ws > T::zero() {
        x /= ws;
        y /= ws;
    }
    Pose::new(x, y, s.atan2(c))
}

/// Sensor input of one tracking run: the measurement at the start pose, then
/// one odometry reading and measurement per step.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario<T> {
    pub initial: Measurement,
    pub steps: Vec<(OdometryInput<T>, Measurement)>,
}

/// Tracking outcome: one estimate for the start and one per step.
#[derive(Debug, Clone, PartialEq)]
pub struct Track<T> {
    pub estimates: Vec<Pose<T>>,
    /// Steps at which every weight vanished and the filter was reset to
    /// uniform weights.
    pub weight_resets: usize,
}

/// Global localization followed by tracking: initialize, weight and
/// estimate; then per step resample, predict, weight and estimate.
pub fn track<T: Scalar, R: Rng + ?Sized>(
    scenario: &Scenario<T>,
    room: &RoomModel<T>,
    table: &[Option<Fingerprint>],
    grid: &Grid<T>,
    cfg: &AmclConfig<T>,
    rng: &mut R,
) -> Result<Track<T>> {
    let mut particles = init_particles(room, cfg.particles, rng);
    let mut resets = 0;
    if !weight_update(&mut particles, &scenario.initial, table, grid, cfg) {
        resets += 1;
    }
    let mut estimates = Vec::with_capacity(scenario.steps.len() + 1);
    estimates.push(estimate(&particles));
    for (odo, meas) in &scenario.steps {
        resample(&mut particles, cfg.resample_fraction, rng);
        motion_update(&mut particles, *odo, (cfg.sigma_d, cfg.sigma_theta), room, rng);
        if !weight_update(&mut particles, meas, table, grid, cfg) {
            resets += 1;
        }
        estimates.push(estimate(&particles));
    }
    Ok(Track { estimates, weight_resets: resets })
}
