//! Trajectory CSV files: one row per grid node.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::integrator::{ControlGrid, Trajectory};
use crate::model::{AdjointVec, StateVec};

pub const HEADER: &str = "t,S_h,I_h,S_v,I_v,u,lambda1,lambda2,lambda3,lambda4";

/// Writes the full trajectory. Floats use Rust's shortest round-trip
/// formatting, so reading the file back recovers every value bit for bit.
pub fn write_csv(
    x: &Trajectory<StateVec>,
    u: &ControlGrid,
    l: &Trajectory<AdjointVec>,
    path: &Path,
) -> Result<()> {
    if x.grid != *u.grid() || x.grid != l.grid {
        return Err(Error::invariant("grid", "state, control and costate grids differ"));
    }
    let io = |e| Error::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    writeln!(w, "{HEADER}").map_err(io)?;
    for (((t, s), uk), lk) in x.iter().zip(u.values()).zip(&l.samples) {
        writeln!(
            w,
            "{t},{},{},{},{},{uk},{},{},{},{}",
            s.s_h, s.i_h, s.s_v, s.i_v, lk.l1, lk.l2, lk.l3, lk.l4
        )
        .map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Writes `t,u` only.
pub fn write_control_csv(u: &ControlGrid, path: &Path) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    writeln!(w, "t,u").map_err(io)?;
    for (t, v) in u.grid().times().zip(u.values()) {
        writeln!(w, "{t},{v}").map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Column-oriented view of a numeric CSV with a header row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }
}

pub fn read_csv(path: &Path) -> Result<CsvTable> {
    let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingArtifact(path.display().to_string()),
        _ => Error::io(path, e),
    })?;
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::MissingArtifact(format!("{} is empty", path.display())))?
        .split(',')
        .map(str::to_string)
        .collect();
    let rows = lines
        .enumerate()
        .map(|(i, line)| {
            let row: Vec<f64> = line
                .split(',')
                .map(|f| f.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse {
                    line: i + 2,
                    column: 1,
                    message: format!("{}: {e}", path.display()),
                })?;
            if row.len() != header.len() {
                return Err(Error::Parse {
                    line: i + 2,
                    column: 1,
                    message: format!("{}: expected {} fields, got {}", path.display(), header.len(), row.len()),
                });
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CsvTable { header, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrator::TimeGrid;

    #[test]
    fn single_interval_has_two_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("one.csv");
        let g = TimeGrid::new(0.0, 1.0, 1).unwrap();
        let x = Trajectory { grid: g, samples: vec![StateVec::TABLE_INITIAL; 2] };
        let l = Trajectory { grid: g, samples: vec![AdjointVec::ZERO; 2] };
        write_csv(&x, &ControlGrid::constant(g, 0.25), &l, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], HEADER);
        assert_eq!(lines[1], "0,800,200,4000,900,0.25,0,0,0,0");
        assert!(text.ends_with('\n'));
    }

    #[test]
    fn values_round_trip_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rt.csv");
        let g = TimeGrid::new(0.0, 3.0, 3).unwrap();
        let x = Trajectory {
            grid: g,
            samples: (0..4).map(|k| StateVec::new(1.0 / 3.0 + k as f64, 1e-17, 2.0f64.sqrt(), 7e22)).collect(),
        };
        let l = Trajectory { grid: g, samples: vec![AdjointVec::new(-0.1, 1.0 / 7.0, 0.0, 3.5); 4] };
        let u = ControlGrid::new(g, vec![0.1, 0.2, 1.0 / 3.0, 1.0]).unwrap();
        write_csv(&x, &u, &l, &path).unwrap();
        let table = read_csv(&path).unwrap();
        assert_eq!(table.column("S_h").unwrap()[2], 1.0 / 3.0 + 2.0);
        assert_eq!(table.column("lambda2").unwrap()[0], 1.0 / 7.0);
        assert_eq!(table.column("u").unwrap(), u.values());
    }

    #[test]
    fn missing_file_is_missing_artifact() {
        let err = read_csv(Path::new("/nonexistent/run.csv")).unwrap_err();
        assert!(matches!(err, Error::MissingArtifact(_)));
    }
}
