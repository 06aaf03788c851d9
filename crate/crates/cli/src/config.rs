//! TOML run configuration.

use std::path::Path;

use lrp_core::amcl::AmclConfig;
use lrp_core::geom::{Point2, Polygon, RoomModel};
use lrp_core::harness::{ExperimentConfig, NoiseConfig};
use lrp_core::mopso::PsoConfig;
use lrp_core::objectives::{EvalConfig, GdopMode};
use lrp_core::placement::ConstraintLimits;
use lrp_core::repair::{Gravitation, RepairConfig};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub room: RoomSection,
    #[serde(default)]
    pub constraints: ConstraintSection,
    #[serde(default)]
    pub pso: PsoSection,
    #[serde(default)]
    pub simulation: SimulationSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoomSection {
    /// Outline in meters, either orientation.
    pub vertices: Vec<[f64; 2]>,
    #[serde(default = "defaults::grid_size")]
    pub grid_size: f64,
    #[serde(default = "defaults::z_r")]
    pub z_r: f64,
    #[serde(default = "defaults::z_l")]
    pub z_l: f64,
    #[serde(default = "defaults::r_res")]
    pub r_res: f64,
    #[serde(default = "defaults::cone_half_angle_deg")]
    pub cone_half_angle_deg: f64,
    #[serde(default = "defaults::wall_margin")]
    pub wall_margin: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConstraintSection {
    pub m_max: usize,
    pub k_min: usize,
    pub d_min: f64,
    pub fingerprint_size: usize,
    /// Range noise used by the GDOP objective; defaults to `r_res`.
    pub sigma_r: Option<f64>,
    pub gdop_mode: GdopModeName,
}

impl Default for ConstraintSection {
    fn default() -> Self {
        Self { m_max: 32, k_min: 4, d_min: 0.5, fingerprint_size: 4, sigma_r: None, gdop_mode: GdopModeName::TraceVariance }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum GdopModeName {
    TraceVariance,
    RootTrace,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum GravitationName {
    Nearest,
    Deficit,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PsoSection {
    pub particles: usize,
    pub iterations: usize,
    pub m_init: [usize; 2],
    pub n_types: usize,
    pub w: [f64; 2],
    pub c1: [f64; 2],
    pub c2: [f64; 2],
    pub p_up: f64,
    pub p_down: f64,
    pub archive_capacity: usize,
    pub v_max: Option<f64>,
    pub seed: u64,
    /// Front checkpoint period in iterations; 0 disables checkpoints.
    pub checkpoint_every: usize,
    pub repair_max_iter: usize,
    pub repair_restarts: usize,
    pub gravitation: GravitationName,
}

impl Default for PsoSection {
    fn default() -> Self {
        Self {
            particles: 500,
            iterations: 500,
            m_init: [27, 32],
            n_types: 2,
            w: [0.1, 0.5],
            c1: [1.5, 2.0],
            c2: [1.5, 2.0],
            p_up: 0.05,
            p_down: 0.05,
            archive_capacity: 100,
            v_max: None,
            seed: 0,
            checkpoint_every: 0,
            repair_max_iter: 200,
            repair_restarts: 10,
            gravitation: GravitationName::Deficit,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSection {
    /// Path corners; the path is sampled every `step` meters.
    pub waypoints: Vec<[f64; 2]>,
    pub step: f64,
    pub burn_in: usize,
    pub particles: usize,
    /// Range noise of the simulated radar; defaults to `r_res`.
    pub sigma_r: Option<f64>,
    pub sigma_d: f64,
    pub sigma_theta_deg: f64,
    /// Odometry noise assumed by the filter; defaults to the simulated one.
    pub filter_sigma_d: Option<f64>,
    pub filter_sigma_theta_deg: Option<f64>,
    /// Seeds run are `seed, seed + 1, ..., seed + runs - 1`.
    pub seed: u64,
    pub runs: usize,
    pub histogram_width: f64,
    pub histogram_bins: usize,
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self {
            waypoints: Vec::new(),
            step: 0.2,
            burn_in: 20,
            particles: 2000,
            sigma_r: None,
            sigma_d: 0.02,
            sigma_theta_deg: 5.0,
            filter_sigma_d: None,
            filter_sigma_theta_deg: None,
            seed: 0,
            runs: 10,
            histogram_width: 0.05,
            histogram_bins: 20,
        }
    }
}

mod defaults {
    pub fn grid_size() -> f64 {
        0.2
    }
    pub fn z_r() -> f64 {
        0.5
    }
    pub fn z_l() -> f64 {
        3.0
    }
    pub fn r_res() -> f64 {
        0.075
    }
    pub fn cone_half_angle_deg() -> f64 {
        45.0
    }
    pub fn wall_margin() -> f64 {
        0.5
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Input(m) => CliError::Input(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Config = toml::from_str(text).map_err(|e| CliError::Input(e.to_string()))?;
        cfg.room()?;
        Ok(cfg)
    }

    pub fn room(&self) -> Result<RoomModel<f64>, CliError> {
        let r = &self.room;
        let poly = Polygon::new(r.vertices.iter().map(|&[x, y]| Point2::new(x, y)).collect())?;
        let room = RoomModel {
            grid_size: r.grid_size,
            radar_height: r.z_r,
            reflector_height: r.z_l,
            range_resolution: r.r_res,
            cone_half_angle: r.cone_half_angle_deg.to_radians(),
            wall_margin: r.wall_margin,
            ..RoomModel::new(poly)
        };
        room.validate()?;
        Ok(room)
    }

    pub fn eval(&self, room: &RoomModel<f64>) -> EvalConfig<f64> {
        let c = &self.constraints;
        EvalConfig {
            fingerprint_size: c.fingerprint_size,
            sigma_r: c.sigma_r.unwrap_or(room.range_resolution),
            limits: ConstraintLimits { max_lrps: c.m_max, min_visible: c.k_min, min_spacing: c.d_min },
            gdop_mode: match c.gdop_mode {
                GdopModeName::TraceVariance => GdopMode::TraceVariance,
                GdopModeName::RootTrace => GdopMode::RootTrace,
            },
        }
    }

    pub fn pso(&self, room: &RoomModel<f64>) -> PsoConfig<f64> {
        let p = &self.pso;
        let eval = self.eval(room);
        PsoConfig {
            swarm_size: p.particles,
            iterations: p.iterations,
            w_range: (p.w[0], p.w[1]),
            c1_range: (p.c1[0], p.c1[1]),
            c2_range: (p.c2[0], p.c2[1]),
            p_up: p.p_up,
            p_down: p.p_down,
            m_init: (p.m_init[0], p.m_init[1]),
            n_types: p.n_types,
            archive_capacity: p.archive_capacity,
            v_max: p.v_max,
            seed: p.seed,
            snapshot_every: p.checkpoint_every,
            eval,
            repair: RepairConfig {
                max_iter: p.repair_max_iter,
                restarts: p.repair_restarts,
                limits: eval.limits,
                gravitation: match p.gravitation {
                    GravitationName::Nearest => Gravitation::Nearest,
                    GravitationName::Deficit => Gravitation::Deficit,
                },
                ..RepairConfig::default()
            },
        }
    }

    pub fn experiment(&self, room: &RoomModel<f64>) -> ExperimentConfig<f64> {
        let s = &self.simulation;
        let sigma_r = s.sigma_r.unwrap_or(room.range_resolution);
        ExperimentConfig {
            step: s.step,
            burn_in: s.burn_in,
            fingerprint_size: self.constraints.fingerprint_size,
            noise: NoiseConfig { sigma_r, sigma_d: s.sigma_d, sigma_theta: s.sigma_theta_deg.to_radians() },
            amcl: AmclConfig {
                particles: s.particles,
                // the filter's likelihood never gets narrower than one bin
                sigma_r: sigma_r.max(room.range_resolution),
                sigma_d: s.filter_sigma_d.unwrap_or(s.sigma_d),
                sigma_theta: s.filter_sigma_theta_deg.unwrap_or(s.sigma_theta_deg).to_radians(),
                ..AmclConfig::for_room(room)
            },
            histogram_width: s.histogram_width,
            histogram_bins: s.histogram_bins,
        }
    }

    pub fn waypoints(&self) -> Vec<Point2<f64>> {
        self.simulation.waypoints.iter().map(|&[x, y]| Point2::new(x, y)).collect()
    }

    pub fn seeds(&self) -> Vec<u64> {
        let s = &self.simulation;
        (0..s.runs as u64).map(|k| s.seed + k).collect()
    }
}
