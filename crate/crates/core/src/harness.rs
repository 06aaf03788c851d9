//! Simulated tracking runs: ground-truth paths, noisy sensor data and error
//! statistics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::amcl::{track, wrap_angle, AmclConfig, Measurement, OdometryInput, Pose, Scenario};
use crate::geom::{Grid, Point2, Polygon, RoomModel, VisibilityMask};
use crate::objectives::{distance_bin, fingerprint_table, Fingerprint};
use crate::placement::{compute_masks, visible_at, Placement};
use crate::{Error, Result, Scalar};

/// L-shaped 10 m × 8 m room used for desk-scale runs: 0.2 m grid, radar at
/// 0.5 m, reflectors at 4 m, 45° cone, 0.5 m wall margin.
pub fn desk_room<T: Scalar>() -> RoomModel<T> {
    let v = |x: f64, y: f64| Point2::new(T::of(x), T::of(y));
    let poly = Polygon::new(vec![v(0.0, 0.0), v(10.0, 0.0), v(10.0, 4.0), v(5.0, 4.0), v(5.0, 8.0), v(0.0, 8.0)])
        .expect("valid L-room");
    RoomModel {
        grid_size: T::of(0.2),
        radar_height: T::of(0.5),
        reflector_height: T::of(4.0),
        range_resolution: T::of(0.075),
        cone_half_angle: T::of(45f64.to_radians()),
        wall_margin: T::of(0.5),
        ..RoomModel::new(poly)
    }
}

/// Loop through both arms of [`desk_room`] followed by an inner lap,
/// 44.5 m in total.
pub fn desk_path<T: Scalar>() -> Vec<Point2<T>> {
    [
        (1.0, 1.0),
        (9.0, 1.0),
        (9.0, 3.0),
        (4.0, 3.0),
        (4.0, 7.0),
        (1.0, 7.0),
        (1.0, 1.0),
        (7.0, 1.0),
        (7.0, 2.5),
        (2.5, 2.5),
        (2.5, 5.5),
        (1.0, 5.5),
    ]
        .iter()
        .map(|&(x, y)| Point2::new(T::of(x), T::of(y)))
        .collect()
}

/// Ground-truth path sampled every `step` meters. Entry 0 is the start pose
/// with zero odometry; entry `k` is the pose reached by applying its
/// odometry (turn, then drive) to entry `k - 1`. Each segment is split into
/// `max(1, round(length / step))` equal steps.
pub fn gen_path<T: Scalar>(waypoints: &[Point2<T>], step: T, room: &RoomModel<T>) -> Result<Vec<(Pose<T>, OdometryInput<T>)>> {
    if !(step > T::zero()) {
        return Err(Error::InvalidConfig("path step must be positive".into()));
    }
    let Some(&first) = waypoints.first() else {
        return Err(Error::InvalidConfig("path needs at least one waypoint".into()));
    };
    for w in waypoints {
        if !room.boundary.contains(*w) {
            return Err(Error::OutsideRoom { x: w.x.as_f64(), y: w.y.as_f64() });
        }
    }
    let segs: Vec<(Point2<T>, Point2<T>)> =
        waypoints.windows(2).map(|w| (w[0], w[1])).filter(|(a, b)| a.dist(*b) > T::zero()).collect();
    for &(a, b) in &segs {
        if room.boundary.segment_blocked(a, b) {
            return Err(Error::PathLeavesRoom(a.x.as_f64(), a.y.as_f64(), b.x.as_f64(), b.y.as_f64()));
        }
    }
    let h0 = segs.first().map_or(T::zero(), |(a, b)| (*b - *a).angle());
    let mut out = vec![(Pose::new(first.x, first.y, h0), OdometryInput::zero())];
    let mut heading = h0;
    for (a, b) in segs {
        let d = b - a;
        let len = d.norm();
        let h = d.angle();
        let n = (len / step).round().to_usize().unwrap_or(1).max(1);
        let ds = len / T::of_usize(n);
        for k in 1..=n {
            let rotation = if k == 1 { wrap_angle(h - heading) } else { T::zero() };
            let p = a.lerp(b, T::of_usize(k) / T::of_usize(n));
            out.push((Pose::new(p.x, p.y, h), OdometryInput { distance: ds, rotation }));
        }
        heading = h;
    }
    Ok(out)
}

/// Noise applied by the simulator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseConfig<T> {
    /// Range noise before binning.
    pub sigma_r: T,
    pub sigma_d: T,
    pub sigma_theta: T,
}

impl<T: Scalar> NoiseConfig<T> {
    pub fn for_room(room: &RoomModel<T>) -> Self {
        Self { sigma_r: room.range_resolution, sigma_d: T::of(0.02), sigma_theta: T::of(5f64.to_radians()) }
    }

    pub fn noiseless() -> Self {
        Self { sigma_r: T::zero(), sigma_d: T::zero(), sigma_theta: T::zero() }
    }
}

fn gaussian<T: Scalar, R: Rng + ?Sized>(sigma: T, rng: &mut R) -> T {
    if sigma <= T::zero() {
        return T::zero();
    }
    T::of(Normal::new(0.0, sigma.as_f64()).expect("finite positive sigma").sample(rng))
}

/// Measurement at the grid element nearest to the truth: every visible
/// distance gets Gaussian noise, the `n` smallest noisy distances are kept
/// and binned.
#[allow(clippy::too_many_arguments)]
pub fn simulate_measurement<T: Scalar, R: Rng + ?Sized>(
    truth: &Pose<T>,
    pl: &Placement<T>,
    masks: &[VisibilityMask],
    grid: &Grid<T>,
    n: usize,
    r_res: T,
    sigma_r: T,
    rng: &mut R,
) -> Result<Measurement> {
    let elem = grid.nearest(truth.xy());
    let visible = visible_at(elem, pl, masks, grid);
    if visible.len() < n {
        return Err(Error::InsufficientVisible { visible: visible.len(), required: n });
    }
    let mut noisy: Vec<(T, usize, _)> =
        visible.iter().map(|(l, d)| (*d + gaussian(sigma_r, rng), l.index, l.kind)).collect();
    noisy.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    Ok(Fingerprint::new(noisy[..n].iter().map(|&(d, _, k)| (distance_bin(d, r_res), k)).collect()))
}

pub fn simulate_odometry<T: Scalar, R: Rng + ?Sized>(truth: OdometryInput<T>, sigma_d: T, sigma_theta: T, rng: &mut R) -> OdometryInput<T> {
    OdometryInput {
        distance: truth.distance + gaussian(sigma_d, rng),
        rotation: truth.rotation + gaussian(sigma_theta, rng),
    }
}

/// Root mean square 2D position error.
pub fn rmse<T: Scalar>(truth: &[Pose<T>], estimates: &[Pose<T>]) -> Result<T> {
    if truth.len() != estimates.len() {
        return Err(Error::LengthMismatch { expected: truth.len(), actual: estimates.len() });
    }
    if truth.is_empty() {
        return Ok(T::zero());
    }
    let s: T = truth.iter().zip(estimates).map(|(a, b)| a.xy().dist_sq(b.xy())).sum();
    Ok((s / T::of_usize(truth.len())).sqrt())
}

/// Counts of `errors` in bins of `width`; the last bin collects the tail.
pub fn error_histogram<T: Scalar>(errors: &[T], width: T, bins: usize) -> Vec<usize> {
    let mut h = vec![0; bins.max(1)];
    let last = h.len() - 1;
    for e in errors {
        let b = (*e / width).floor().to_usize().unwrap_or(last).min(last);
        h[b] += 1;
    }
    h
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentConfig<T> {
    pub step: T,
    /// Leading estimates left out of the headline RMSE.
    pub burn_in: usize,
    pub fingerprint_size: usize,
    pub noise: NoiseConfig<T>,
    pub amcl: AmclConfig<T>,
    pub histogram_width: T,
    pub histogram_bins: usize,
}

impl<T: Scalar> ExperimentConfig<T> {
    pub fn for_room(room: &RoomModel<T>) -> Self {
        Self {
            step: T::of(0.2),
            burn_in: 20,
            fingerprint_size: 4,
            noise: NoiseConfig::for_room(room),
            amcl: AmclConfig::for_room(room),
            histogram_width: T::of(0.05),
            histogram_bins: 20,
        }
    }
}

/// Per-seed tracking result.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport<T> {
    pub seed: u64,
    pub truth: Vec<Pose<T>>,
    pub estimates: Vec<Pose<T>>,
    pub errors: Vec<T>,
    /// RMSE after the burn-in.
    pub rmse: T,
    pub rmse_all: T,
    pub histogram: Vec<usize>,
    pub weight_resets: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport<T> {
    pub runs: Vec<RunReport<T>>,
    pub median_rmse: T,
    pub p10_rmse: T,
    pub p90_rmse: T,
}

/// Nearest-rank percentile of an unsorted sample; `q` in `[0, 1]`.
pub fn percentile<T: Scalar>(values: &[T], q: f64) -> T {
    if values.is_empty() {
        return T::nan();
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if q == 0.5 && n % 2 == 0 {
        return (v[n / 2 - 1] + v[n / 2]) / T::of(2.0);
    }
    let k = ((q * n as f64).ceil() as usize).clamp(1, n);
    v[k - 1]
}

/// Seeded streams of one run. Odometry and measurement noise are drawn
/// independently of each other and of the filter, so two placements run on
/// the same seed share the odometry noise exactly.
fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Sensor data along `path` for one seed.
pub fn simulate_scenario<T: Scalar>(
    path: &[(Pose<T>, OdometryInput<T>)],
    pl: &Placement<T>,
    masks: &[VisibilityMask],
    grid: &Grid<T>,
    r_res: T,
    cfg: &ExperimentConfig<T>,
    seed: u64,
) -> Result<Scenario<T>> {
    let mut odo_rng = stream(seed, 0);
    let mut meas_rng = stream(seed, 1);
    let n = cfg.fingerprint_size;
    let nz = cfg.noise;
    let (start, _) = path.first().ok_or_else(|| Error::InvalidConfig("empty path".into()))?;
    let initial = simulate_measurement(start, pl, masks, grid, n, r_res, nz.sigma_r, &mut meas_rng)?;
    let steps = path[1..]
        .iter()
        .map(|(truth, odo)| {
            let o = simulate_odometry(*odo, nz.sigma_d, nz.sigma_theta, &mut odo_rng);
            let m = simulate_measurement(truth, pl, masks, grid, n, r_res, nz.sigma_r, &mut meas_rng)?;
            Ok((o, m))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Scenario { initial, steps })
}

/// Tracks `waypoints` once per seed and aggregates the RMSE statistics.
pub fn run_experiment<T: Scalar>(
    room: &RoomModel<T>,
    grid: &Grid<T>,
    pl: &Placement<T>,
    waypoints: &[Point2<T>],
    cfg: &ExperimentConfig<T>,
    seeds: &[u64],
) -> Result<ExperimentReport<T>> {
    let path = gen_path(waypoints, cfg.step, room)?;
    let masks = compute_masks(pl, room, grid);
    let r_res = room.range_resolution;
    let table = fingerprint_table(pl, &masks, grid, cfg.fingerprint_size, r_res);
    let truth: Vec<Pose<T>> = path.iter().map(|(p, _)| *p).collect();
    let runs = seeds
        .par_iter()
        .map(|&seed| {
            let scenario = simulate_scenario(&path, pl, &masks, grid, r_res, cfg, seed)?;
            let mut filter_rng = stream(seed, 2);
            let t = track(&scenario, room, &table, grid, &cfg.amcl, &mut filter_rng)?;
            let errors: Vec<T> = truth.iter().zip(&t.estimates).map(|(a, b)| a.xy().dist(b.xy())).collect();
            let skip = cfg.burn_in.min(truth.len());
            Ok(RunReport {
                seed,
                rmse: rmse(&truth[skip..], &t.estimates[skip..])?,
                rmse_all: rmse(&truth, &t.estimates)?,
                histogram: error_histogram(&errors[skip..], cfg.histogram_width, cfg.histogram_bins),
                truth: truth.clone(),
                estimates: t.estimates,
                errors,
                weight_resets: t.weight_resets,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let r: Vec<T> = runs.iter().map(|r| r.rmse).collect();
    Ok(ExperimentReport { median_rmse: percentile(&r, 0.5), p10_rmse: percentile(&r, 0.1), p90_rmse: percentile(&r, 0.9), runs })
}
