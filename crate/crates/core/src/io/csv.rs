//! Diagnostics CSV and state snapshots.
//!
//! Floats are written with 17 significant digits so that every value
//! round-trips exactly; identical runs therefore produce identical bytes.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::discretization::{Grid, SimulationState};
use crate::error::{Error, Result};
use crate::functionals::DiagnosticsRow;
use crate::geometry::MotionPreset;

pub const DIAGNOSTICS_HEADER: &str =
    "t,M1,M2,dM1_rel,dM2_rel,E,D,E_rel,u_min,u_max,w_min,w_max,z_min,z_max,dt";

/// 17 significant digits in scientific notation.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn format_opt(x: Option<f64>) -> String {
    x.map(format_float).unwrap_or_default()
}

pub fn format_row(row: &DiagnosticsRow) -> String {
    let fields = [
        format_float(row.t),
        format_float(row.m1),
        format_float(row.m2),
        format_float(row.dm1_rel),
        format_float(row.dm2_rel),
        format_opt(row.entropy),
        format_opt(row.dissipation),
        format_opt(row.relative_entropy),
        format_float(row.u_min),
        format_float(row.u_max),
        format_float(row.w_min),
        format_float(row.w_max),
        format_float(row.z_min),
        format_float(row.z_max),
        format_float(row.dt),
    ];
    fields.join(",")
}

/// Streams diagnostics rows to any writer.
pub struct DiagnosticsWriter<W: Write> {
    out: W,
}

impl<W: Write> DiagnosticsWriter<W> {
    pub fn new(mut out: W) -> std::io::Result<Self> {
        writeln!(out, "{DIAGNOSTICS_HEADER}")?;
        Ok(Self { out })
    }

    pub fn write_row(&mut self, row: &DiagnosticsRow) -> std::io::Result<()> {
        writeln!(self.out, "{}", format_row(row))
    }

    pub fn flush(&mut self) -> std::io::Result<()> {
        self.out.flush()
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

/// Writes a complete diagnostics file.
pub fn write_diagnostics<'a>(
    rows: impl IntoIterator<Item = &'a DiagnosticsRow>,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = DiagnosticsWriter::new(BufWriter::new(file)).map_err(|e| Error::io(path, e))?;
    for row in rows {
        w.write_row(row).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// A numeric CSV table with a header line; empty cells read as `None`.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvTable {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl CsvTable {
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(file).lines();
        let header = match lines.next() {
            Some(line) => line.map_err(|e| Error::io(path, e))?,
            None => return Err(Error::validation(format!("{}: empty file", path.display()))),
        };
        let headers: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
        let mut rows = Vec::new();
        for (n, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != headers.len() {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: n + 2,
                    column: 1,
                    message: format!("expected {} fields, found {}", headers.len(), cells.len()),
                });
            }
            let mut row = Vec::with_capacity(cells.len());
            for (c, cell) in cells.iter().enumerate() {
                let cell = cell.trim();
                if cell.is_empty() {
                    row.push(None);
                } else {
                    row.push(Some(cell.parse::<f64>().map_err(|e| Error::Parse {
                        path: path.to_path_buf(),
                        line: n + 2,
                        column: c + 1,
                        message: format!("{cell:?}: {e}"),
                    })?));
                }
            }
            rows.push(row);
        }
        Ok(Self { headers, rows })
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.headers.iter().position(|h| h == name).ok_or_else(|| {
            Error::validation(format!(
                "no column {name:?}; available columns: {}",
                self.headers.join(", ")
            ))
        })
    }

    pub fn column(&self, name: &str) -> Result<Vec<Option<f64>>> {
        let c = self.column_index(name)?;
        Ok(self.rows.iter().map(|r| r[c]).collect())
    }

    /// `(x, y)` pairs where both cells are present.
    pub fn series(&self, x: &str, y: &str) -> Result<Vec<(f64, f64)>> {
        let (cx, cy) = (self.column_index(x)?, self.column_index(y)?);
        Ok(self
            .rows
            .iter()
            .filter_map(|r| Some((r[cx]?, r[cy]?)))
            .collect())
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SnapshotGrid {
    nx: usize,
    ny: usize,
    period: f64,
    height: f64,
}

/// JSON sidecar describing one snapshot.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SnapshotMeta {
    t: f64,
    grid: SnapshotGrid,
    motion: MotionPreset,
    bulk_file: String,
    surface_file: String,
}

/// Writes `snapshot_NNNNN.json` plus the bulk matrix (`ny + 1` rows of `nx`
/// values, membrane row first) and the surface table (`x,w,z`). Returns the
/// sidecar path.
pub fn write_snapshot(
    dir: impl AsRef<Path>,
    index: usize,
    state: &SimulationState,
    grid: &Grid,
    preset: &MotionPreset,
) -> Result<PathBuf> {
    let dir = dir.as_ref();
    let stem = format!("snapshot_{index:05}");
    let bulk_file = format!("{stem}_u.csv");
    let surface_file = format!("{stem}_surface.csv");

    let mut bulk = String::new();
    for k in 0..=grid.ny {
        let row: Vec<String> = state.u[k * grid.nx..(k + 1) * grid.nx]
            .iter()
            .map(|&v| format_float(v))
            .collect();
        bulk.push_str(&row.join(","));
        bulk.push('\n');
    }
    write_file(&dir.join(&bulk_file), &bulk)?;

    let mut surface = String::from("x,w,z\n");
    for i in 0..grid.nx {
        surface.push_str(&format!(
            "{},{},{}\n",
            format_float(grid.x(i)),
            format_float(state.w[i]),
            format_float(state.z[i])
        ));
    }
    write_file(&dir.join(&surface_file), &surface)?;

    let meta = SnapshotMeta {
        t: state.t,
        grid: SnapshotGrid {
            nx: grid.nx,
            ny: grid.ny,
            period: grid.period,
            height: grid.height,
        },
        motion: *preset,
        bulk_file,
        surface_file,
    };
    let json_path = dir.join(format!("{stem}.json"));
    let text = serde_json::to_string_pretty(&meta).expect("snapshot metadata serializes");
    write_file(&json_path, &(text + "\n"))?;
    Ok(json_path)
}

/// Reloads a snapshot written by [`write_snapshot`].
pub fn read_snapshot(sidecar: impl AsRef<Path>) -> Result<(SimulationState, Grid, MotionPreset)> {
    let sidecar = sidecar.as_ref();
    let text = std::fs::read_to_string(sidecar).map_err(|e| Error::io(sidecar, e))?;
    let meta: SnapshotMeta = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: sidecar.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let grid = Grid::new(meta.grid.nx, meta.grid.ny, meta.grid.period, meta.grid.height)?;
    let dir = sidecar.parent().unwrap_or_else(|| Path::new("."));

    let bulk_path = dir.join(&meta.bulk_file);
    let text = std::fs::read_to_string(&bulk_path).map_err(|e| Error::io(&bulk_path, e))?;
    let mut u = Vec::with_capacity(grid.bulk_len());
    for (n, line) in text.lines().enumerate() {
        for cell in line.split(',') {
            u.push(cell.trim().parse::<f64>().map_err(|e| Error::Parse {
                path: bulk_path.clone(),
                line: n + 1,
                column: 1,
                message: e.to_string(),
            })?);
        }
    }
    let table = CsvTable::read(dir.join(&meta.surface_file))?;
    let col = |name: &str| -> Result<Vec<f64>> {
        table
            .column(name)?
            .into_iter()
            .map(|v| v.ok_or_else(|| Error::validation(format!("missing {name} value"))))
            .collect()
    };
    let state = SimulationState {
        t: meta.t,
        u,
        w: col("w")?,
        z: col("z")?,
    };
    state.check_shape(&grid)?;
    Ok((state, grid, meta.motion))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(t: f64) -> DiagnosticsRow {
        DiagnosticsRow {
            t,
            m1: 0.0,
            m2: 0.0,
            dm1_rel: 0.0,
            dm2_rel: 0.0,
            entropy: None,
            dissipation: Some(0.25),
            relative_entropy: None,
            u_min: 0.0,
            u_max: 0.0,
            w_min: 0.0,
            w_max: 0.0,
            z_min: 0.0,
            z_max: 0.0,
            dt: 0.0,
        }
    }

    fn temp_dir(name: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("bsrd-csv-{name}-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        dir
    }

    #[test]
    fn single_row_file() {
        let mut w = DiagnosticsWriter::new(Vec::new()).unwrap();
        w.write_row(&row(0.0)).unwrap();
        let text = String::from_utf8(w.into_inner()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], DIAGNOSTICS_HEADER);
        let cells: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(cells.len(), 15);
        assert_eq!(cells[5], "");
        assert_eq!(cells[6], "2.5000000000000000e-1");
    }

    #[test]
    fn table_round_trip() {
        let dir = temp_dir("table");
        let path = dir.join("d.csv");
        write_diagnostics(&[row(0.0), row(0.5)], &path).unwrap();
        let t = CsvTable::read(&path).unwrap();
        assert_eq!(t.rows.len(), 2);
        assert_eq!(t.column("t").unwrap(), vec![Some(0.0), Some(0.5)]);
        assert_eq!(t.column("E").unwrap(), vec![None, None]);
        assert!(t.column("nope").unwrap_err().to_string().contains("E_rel"));
    }

    #[test]
    fn snapshot_round_trip() {
        let dir = temp_dir("snap");
        let preset = MotionPreset::vertical_breathing(0.1, 1.0, 2.0, 1.0);
        let grid = Grid::for_preset(5, 4, &preset).unwrap();
        let mut s = SimulationState::zeros(&grid);
        s.t = 0.3;
        for (n, v) in s.u.iter_mut().enumerate() {
            *v = (n as f64).sqrt() / 3.0;
        }
        s.w = vec![0.1, 0.2, 0.3, 0.4, 1.0 / 3.0];
        s.z = vec![1e-300, 2.0, 3.0, 4.0, 5.0];
        let path = write_snapshot(&dir, 7, &s, &grid, &preset).unwrap();
        assert!(path.ends_with("snapshot_00007.json"));
        let (back, g, p) = read_snapshot(&path).unwrap();
        assert_eq!(back, s);
        assert_eq!(g, grid);
        assert_eq!(p, preset);
    }

    proptest! {
        #[test]
        fn floats_round_trip(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            prop_assert_eq!(format_float(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }
}
