//! Subcommand implementations. Each returns the text printed on stdout.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use lrp_core::geom::{Grid, RoomModel};
use lrp_core::harness::{run_experiment, ExperimentReport};
use lrp_core::mopso::Swarm;
use lrp_core::objectives::{ambiguity, evaluate, gdop_objective, AmbiguityClass};
use lrp_core::placement::{check_constraints, compute_masks, visible_counts, Placement};

use crate::config::Config;
use crate::io::{log_header, log_row, map_csv, map_pgm, read_placement, write_front, write_placement};
use crate::CliError;

/// Reads a placement and checks its mounting height against the room.
fn load_placement(room: &RoomModel<f64>, path: &Path) -> Result<Placement<f64>, CliError> {
    let pl = read_placement(path)?;
    if let Some(l) = pl.lrps().first() {
        if l.position.z != room.reflector_height {
            return Err(CliError::Input(format!(
                "{}: z_l = {} but the room config has z_l = {}",
                path.display(),
                l.position.z,
                room.reflector_height
            )));
        }
    }
    Ok(pl)
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))
}

fn mkdir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub iterations: Option<usize>,
    pub particles: Option<usize>,
}

/// Runs the optimizer. Writes `front.csv`, `placements/placement_NNN.txt`
/// per front entry, `log.csv`, and `checkpoints/front_iter_NNNNN.csv` when
/// checkpoints are enabled.
pub fn optimize(cfg: &Config, out: &Path, ov: &Overrides) -> Result<String, CliError> {
    let room = cfg.room()?;
    let grid = Grid::build(&room)?;
    let mut pso = cfg.pso(&room);
    if let Some(s) = ov.seed {
        pso.seed = s;
    }
    if let Some(n) = ov.iterations {
        pso.iterations = n;
    }
    if let Some(n) = ov.particles {
        pso.swarm_size = n;
    }
    pso.validate()?;
    mkdir(out)?;
    let ckpt_dir = out.join("checkpoints");
    let every = pso.snapshot_every;
    if every > 0 {
        mkdir(&ckpt_dir)?;
    }
    let swarm = Swarm::new(&room, &grid, pso)?;
    let mut log = String::from(log_header());
    let mut ckpt_err = None;
    let result = swarm.run(|s, archive| {
        log.push_str(&log_row(s));
        if every > 0 && s.iteration > 0 && s.iteration % every == 0 {
            let path = ckpt_dir.join(format!("front_iter_{:05}.csv", s.iteration));
            if let Err(e) = write(&path, write_front(&archive.sorted())) {
                ckpt_err.get_or_insert(e);
            }
        }
    });
    if let Some(e) = ckpt_err {
        return Err(e);
    }
    let front = result.archive.sorted();
    write(&out.join("front.csv"), write_front(&front))?;
    let pdir = out.join("placements");
    mkdir(&pdir)?;
    for (i, e) in front.iter().enumerate() {
        write(&pdir.join(format!("placement_{i:03}.txt")), write_placement(&e.placement))?;
    }
    write(&out.join("log.csv"), &log)?;
    let mut s = String::new();
    let _ = writeln!(s, "front_size = {}", front.len());
    if let Some(last) = result.log.last() {
        let _ = writeln!(s, "iterations = {}", last.iteration);
        if let (Some(f1), Some(f2)) = (last.best_f1, last.best_f2) {
            let _ = writeln!(s, "best_f1 = {f1}");
            let _ = writeln!(s, "best_f2 = {f2}");
        }
    }
    let _ = writeln!(s, "out_dir = {:?}", out.display().to_string());
    Ok(s)
}

fn class_value(c: AmbiguityClass) -> f64 {
    match c {
        AmbiguityClass::Unique => 0.0,
        AmbiguityClass::Local => 1.0,
        AmbiguityClass::Global => 2.0,
    }
}

/// Objectives and constraint report of a placement. With `out`, also
/// writes `metrics.txt` and the coverage, ambiguity and GDOP maps as CSV and
/// PGM. Ambiguity values: 0 unique, 1 local, 2 global.
pub fn evaluate_placement(cfg: &Config, placement: &Path, out: Option<&Path>) -> Result<String, CliError> {
    let room = cfg.room()?;
    let grid = Grid::build(&room)?;
    let pl = load_placement(&room, placement)?;
    let eval = cfg.eval(&room);
    let masks = compute_masks(&pl, &room, &grid);
    let report = check_constraints(&pl, &room, &grid, &masks, &eval.limits)?;
    let obj = evaluate(&pl, &room, &grid, &masks, &eval);
    let amb = ambiguity(&pl, &grid, &masks, eval.fingerprint_size, room.range_resolution).ok();
    let gd = gdop_objective(&pl, &grid, &masks, eval.sigma_r, eval.gdop_mode).ok();
    let mut s = String::new();
    let _ = writeln!(s, "feasible = {}", report.feasible);
    let _ = writeln!(s, "M = {}", pl.len());
    if report.feasible {
        let _ = writeln!(s, "f1 = {}", obj.f1);
        let _ = writeln!(s, "f2 = {}", obj.f2);
    } else {
        // objectives of an infeasible placement, where they can be computed
        match &amb {
            Some((f1, _)) => writeln!(s, "f1 = {f1}"),
            None => writeln!(s, "f1 = \"n/a\""),
        }
        .ok();
        match &gd {
            Some((f2, _)) => writeln!(s, "f2 = {f2}"),
            None => writeln!(s, "f2 = \"n/a\""),
        }
        .ok();
    }
    if let Some((_, map)) = &amb {
        let (u, l, g) = map.counts();
        let _ = writeln!(s, "unique = {u}\nlocal = {l}\nglobal = {g}");
    }
    let _ = writeln!(s, "m_ok = {}", report.m_ok);
    let _ = writeln!(s, "coverage_violations = {}", report.coverage_violations.len());
    let pairs: Vec<String> = report.spacing_violations.iter().map(|(i, j)| format!("[{i}, {j}]")).collect();
    let _ = writeln!(s, "spacing_violations = [{}]", pairs.join(", "));
    let margin: Vec<String> = report.margin_violations.iter().map(|i| i.to_string()).collect();
    let _ = writeln!(s, "margin_violations = [{}]", margin.join(", "));
    if let Some(out) = out {
        mkdir(out)?;
        write(&out.join("metrics.txt"), &s)?;
        let cov: Vec<f64> = visible_counts(&masks, grid.len()).iter().map(|&c| c as f64).collect();
        write(&out.join("coverage.csv"), map_csv(&grid, &cov))?;
        write(&out.join("coverage.pgm"), map_pgm(&grid, &cov))?;
        if let Some((_, map)) = &amb {
            let v: Vec<f64> = map.classes.iter().map(|&c| class_value(c)).collect();
            write(&out.join("ambiguity.csv"), map_csv(&grid, &v))?;
            write(&out.join("ambiguity.pgm"), map_pgm(&grid, &v))?;
        }
        if let Some((_, map)) = &gd {
            write(&out.join("gdop.csv"), map_csv(&grid, &map.values))?;
            write(&out.join("gdop.pgm"), map_pgm(&grid, &map.values))?;
        }
    }
    Ok(s)
}

fn load_feasible(cfg: &Config, path: &Path) -> Result<Placement<f64>, CliError> {
    let room = cfg.room()?;
    let grid = Grid::build(&room)?;
    let pl = load_placement(&room, path)?;
    let masks = compute_masks(&pl, &room, &grid);
    let report = check_constraints(&pl, &room, &grid, &masks, &cfg.eval(&room).limits)?;
    if !report.feasible {
        return Err(CliError::Infeasible(format!(
            "{}: {} coverage, {} spacing, {} margin violations",
            path.display(),
            report.coverage_violations.len(),
            report.spacing_violations.len(),
            report.margin_violations.len()
        )));
    }
    Ok(pl)
}

fn summary(r: &ExperimentReport<f64>, prefix: &str) -> String {
    format!(
        "{prefix}median_rmse = {}\n{prefix}p10_rmse = {}\n{prefix}p90_rmse = {}\n",
        r.median_rmse, r.p10_rmse, r.p90_rmse
    )
}

fn write_runs(dir: &Path, r: &ExperimentReport<f64>, hist_width: f64) -> Result<(), CliError> {
    mkdir(dir)?;
    let mut runs = String::from("seed,rmse,rmse_all,weight_resets\n");
    let mut hist = String::from("seed,bin_lo,bin_hi,count\n");
    let traces = dir.join("traces");
    mkdir(&traces)?;
    for run in &r.runs {
        let _ = writeln!(runs, "{},{},{},{}", run.seed, run.rmse, run.rmse_all, run.weight_resets);
        for (b, c) in run.histogram.iter().enumerate() {
            let hi = if b + 1 == run.histogram.len() { f64::INFINITY } else { (b + 1) as f64 * hist_width };
            let _ = writeln!(hist, "{},{},{},{}", run.seed, b as f64 * hist_width, hi, c);
        }
        let mut t = String::from("step,truth_x,truth_y,truth_heading,est_x,est_y,est_heading,error\n");
        for (k, ((a, e), err)) in run.truth.iter().zip(&run.estimates).zip(&run.errors).enumerate() {
            let _ = writeln!(t, "{k},{},{},{},{},{},{},{}", a.x, a.y, a.heading, e.x, e.y, e.heading, err);
        }
        write(&traces.join(format!("trace_seed_{}.csv", run.seed)), t)?;
    }
    write(&dir.join("runs.csv"), runs)?;
    write(&dir.join("histogram.csv"), hist)?;
    write(&dir.join("report.txt"), summary(r, ""))
}

/// Tracking simulation over the configured path and seeds. With
/// `compare`, both placements run on the same seeds and a paired report
/// is written to `compare.csv`.
pub fn simulate(
    cfg: &Config,
    placement: &Path,
    compare: Option<&Path>,
    out: &Path,
    ov: &Overrides,
) -> Result<String, CliError> {
    let room = cfg.room()?;
    let grid = Grid::build(&room)?;
    let mut exp = cfg.experiment(&room);
    if let Some(n) = ov.particles {
        exp.amcl.particles = n;
    }
    let mut seeds = cfg.seeds();
    if let Some(s) = ov.seed {
        seeds = (0..seeds.len() as u64).map(|k| s + k).collect();
    }
    let waypoints = cfg.waypoints();
    if waypoints.is_empty() {
        return Err(CliError::Input("[simulation] waypoints must not be empty".into()));
    }
    let a = load_feasible(cfg, placement)?;
    let b = compare.map(|p| load_feasible(cfg, p)).transpose()?;
    let ra = run_experiment(&room, &grid, &a, &waypoints, &exp, &seeds)?;
    mkdir(out)?;
    let mut s = String::new();
    let _ = writeln!(s, "runs = {}", seeds.len());
    let _ = writeln!(s, "steps = {}", ra.runs.first().map_or(0, |r| r.truth.len()));
    match b {
        None => {
            write_runs(out, &ra, exp.histogram_width)?;
            s.push_str(&summary(&ra, ""));
        }
        Some(b) => {
            let rb = run_experiment(&room, &grid, &b, &waypoints, &exp, &seeds)?;
            write_runs(&out.join("a"), &ra, exp.histogram_width)?;
            write_runs(&out.join("b"), &rb, exp.histogram_width)?;
            let mut c = String::from("seed,rmse_a,rmse_b,diff\n");
            let mut a_wins = 0;
            for (x, y) in ra.runs.iter().zip(&rb.runs) {
                let _ = writeln!(c, "{},{},{},{}", x.seed, x.rmse, y.rmse, x.rmse - y.rmse);
                a_wins += usize::from(x.rmse < y.rmse);
            }
            write(&out.join("compare.csv"), c)?;
            s.push_str(&summary(&ra, "a_"));
            s.push_str(&summary(&rb, "b_"));
            let _ = writeln!(s, "a_better_runs = {a_wins}");
        }
    }
    write(&out.join("summary.txt"), &s)?;
    Ok(s)
}

/// Default output directory next to the config file.
pub fn default_out_dir(config: &Path, name: &str) -> PathBuf {
    config.parent().unwrap_or_else(|| Path::new(".")).join(name)
}
