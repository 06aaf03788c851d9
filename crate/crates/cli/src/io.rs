//! Text formats: placement files, fronts, logs, map rasters and traces.

use std::fmt::Write as _;
use std::path::Path;

use lrp_core::geom::{Grid, Point2};
use lrp_core::mopso::{ArchiveEntry, IterationStats};
use lrp_core::placement::{LrpType, Placement};

use crate::CliError;

/// Placement file: `key = value` header lines for `M`, `n_types` and `z_l`,
/// then a CSV table `index,x,y,type`. Lines starting with `#` are ignored.
pub fn write_placement(pl: &Placement<f64>) -> String {
    let z = pl.lrps().first().map_or(0.0, |l| l.position.z);
    let mut s = String::new();
    let _ = writeln!(s, "M = {}", pl.len());
    let _ = writeln!(s, "n_types = {}", pl.n_types().max(1));
    let _ = writeln!(s, "z_l = {z}");
    s.push_str("index,x,y,type\n");
    for (i, l) in pl.lrps().iter().enumerate() {
        let _ = writeln!(s, "{i},{},{},{}", l.position.x, l.position.y, l.kind.0);
    }
    s
}

pub fn parse_placement(text: &str) -> Result<Placement<f64>, CliError> {
    let bad = |line: usize, m: &str| CliError::Input(format!("placement line {line}: {m}"));
    let mut m = None;
    let mut z = None;
    let mut n_types = None;
    let mut in_table = false;
    let mut xy = Vec::new();
    let mut kinds = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let ln = k + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !in_table {
            if let Some((key, value)) = line.split_once('=') {
                let value = value.trim();
                match key.trim() {
                    "M" => m = Some(value.parse::<usize>().map_err(|e| bad(ln, &e.to_string()))?),
                    "n_types" => n_types = Some(value.parse::<usize>().map_err(|e| bad(ln, &e.to_string()))?),
                    "z_l" => z = Some(value.parse::<f64>().map_err(|e| bad(ln, &e.to_string()))?),
                    other => return Err(bad(ln, &format!("unknown key {other:?}"))),
                }
                continue;
            }
            if line.replace(' ', "") != "index,x,y,type" {
                return Err(bad(ln, "expected header `index,x,y,type`"));
            }
            in_table = true;
            continue;
        }
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 4 {
            return Err(bad(ln, "expected 4 fields"));
        }
        let index: usize = f[0].parse().map_err(|_| bad(ln, "bad index"))?;
        if index != xy.len() {
            return Err(bad(ln, "indices must run 0, 1, 2, ..."));
        }
        let x: f64 = f[1].parse().map_err(|_| bad(ln, "bad x"))?;
        let y: f64 = f[2].parse().map_err(|_| bad(ln, "bad y"))?;
        let t: u8 = f[3].parse().map_err(|_| bad(ln, "bad type"))?;
        if t > 1 {
            return Err(bad(ln, "type must be 0 or 1"));
        }
        xy.push(Point2::new(x, y));
        kinds.push(LrpType(t));
    }
    let m = m.ok_or_else(|| CliError::Input("placement: missing `M`".into()))?;
    let z = z.ok_or_else(|| CliError::Input("placement: missing `z_l`".into()))?;
    if m != xy.len() {
        return Err(CliError::Input(format!("placement: M = {m} but {} rows", xy.len())));
    }
    if let Some(n) = n_types {
        if !(1..=2).contains(&n) || kinds.iter().any(|k| k.0 as usize >= n) {
            return Err(CliError::Input("placement: types do not match n_types".into()));
        }
    }
    Ok(Placement::new(&xy, &kinds, z)?)
}

pub fn read_placement(path: &Path) -> Result<Placement<f64>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    parse_placement(&text)
}

/// Front CSV; ids follow the given order.
pub fn write_front(entries: &[&ArchiveEntry<f64>]) -> String {
    let mut s = String::from("placement_id,M,f1,f2\n");
    for (i, e) in entries.iter().enumerate() {
        let _ = writeln!(s, "{i},{},{},{}", e.placement.len(), e.objectives.f1, e.objectives.f2);
    }
    s
}

/// Rows `(id, M, f1, f2)` of a front CSV.
pub fn parse_front(text: &str) -> Result<Vec<(usize, usize, usize, f64)>, CliError> {
    let bad = |m: String| CliError::Input(format!("front: {m}"));
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("placement_id,M,f1,f2") {
        return Err(bad("missing header".into()));
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 4 {
                return Err(bad(format!("bad row {l:?}")));
            }
            let p = |s: &str| s.trim().parse::<usize>().map_err(|e| bad(e.to_string()));
            Ok((p(f[0])?, p(f[1])?, p(f[2])?, f[3].trim().parse::<f64>().map_err(|e| bad(e.to_string()))?))
        })
        .collect()
}

pub fn log_header() -> &'static str {
    "iteration,archive_size,best_f1,best_f2,feasible_particles,mean_m,min_archive_m\n"
}

pub fn log_row(s: &IterationStats<f64>) -> String {
    let opt = |v: Option<String>| v.unwrap_or_default();
    format!(
        "{},{},{},{},{},{},{}\n",
        s.iteration,
        s.archive_size,
        opt(s.best_f1.map(|v| v.to_string())),
        opt(s.best_f2.map(|v| v.to_string())),
        s.feasible_particles,
        s.mean_m,
        opt(s.min_archive_m.map(|v| v.to_string())),
    )
}

/// Per-element values as CSV `x,y,value`.
pub fn map_csv(grid: &Grid<f64>, values: &[f64]) -> String {
    let mut s = String::from("x,y,value\n");
    for (c, v) in grid.centers().iter().zip(values) {
        let _ = writeln!(s, "{},{},{}", c.x, c.y, v);
    }
    s
}

/// 8-bit binary PGM over the grid lattice, north up. Elements map
/// `value / max` onto 1..=255; lattice cells outside the room and
/// non-finite values are 0.
pub fn map_pgm(grid: &Grid<f64>, values: &[f64]) -> Vec<u8> {
    let (nx, ny) = grid.dims();
    let max = values.iter().cloned().filter(|v| v.is_finite()).fold(0.0f64, f64::max);
    let mut out = format!("P5\n{nx} {ny}\n255\n").into_bytes();
    for row in 0..ny {
        let j = ny - 1 - row;
        for i in 0..nx {
            let px = match grid.index_of_cell(i, j) {
                Some(e) if values[e].is_finite() => {
                    let t = if max > 0.0 { values[e] / max } else { 0.0 };
                    1 + (t.clamp(0.0, 1.0) * 254.0).round() as u8
                }
                _ => 0,
            };
            out.push(px);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use lrp_core::geom::{Polygon, RoomModel};

    fn sample() -> Placement<f64> {
        let xy = [Point2::new(1.5, 2.25), Point2::new(0.1 + 0.2, 3.0), Point2::new(7.0, 1.0 / 3.0)];
        Placement::new(&xy, &[LrpType(0), LrpType(1), LrpType(0)], 4.0).unwrap()
    }

    #[test]
    fn placement_round_trip_is_byte_identical() {
        let text = write_placement(&sample());
        let back = parse_placement(&text).unwrap();
        assert_eq!(back, sample());
        assert_eq!(write_placement(&back), text);
    }

    #[test]
    fn placement_parse_errors() {
        assert!(parse_placement("M = 1\nz_l = 3\nindex,x,y,type\n0,1,1\n").is_err());
        assert!(parse_placement("M = 2\nz_l = 3\nindex,x,y,type\n0,1,1,0\n").is_err());
        assert!(parse_placement("M = 1\nindex,x,y,type\n0,1,1,0\n").is_err());
        assert!(parse_placement("M = 1\nz_l = 3\nindex,x,y,type\n0,1,1,2\n").is_err());
        assert!(parse_placement("# comment\nM = 1\nz_l = 3\nindex,x,y,type\n0,1,1,0\n").is_ok());
    }

    #[test]
    fn pgm_layout() {
        let room = RoomModel { grid_size: 1.0, ..RoomModel::new(Polygon::rectangle(0.0, 0.0, 3.0, 2.0).unwrap()) };
        let grid = Grid::build(&room).unwrap();
        let values: Vec<f64> = (0..grid.len()).map(|e| grid.center(e).y).collect();
        let pgm = map_pgm(&grid, &values);
        let header = b"P5\n3 2\n255\n";
        assert_eq!(&pgm[..header.len()], header);
        // first row is the northern one
        assert_eq!(&pgm[header.len()..], &[255, 255, 255, 86, 86, 86]);
    }
}
