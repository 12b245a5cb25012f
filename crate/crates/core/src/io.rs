//! Artifacts on disk: comma-separated tables, sparse triplet exports with a
//! JSON sidecar, plain-text reports and the run manifest. Every file is
//! written to a temporary sibling and renamed into place.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::approx::ScanReport;
use crate::error::{Error, Result};
use crate::grid::{DiscreteMeasure, GridFunction, TorusGrid};
use crate::measures::{Column, HolonomyConstraintSystem, OccupationMeasure, SystemMode};
use crate::pde::ConvergenceRecord;

/// Writes `contents` to `path` through a temporary file in the same
/// directory.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn coord_header(grid: &TorusGrid) -> &'static str {
    if grid.dim() == 1 {
        "i"
    } else {
        "i,j"
    }
}

fn coords(grid: &TorusGrid, node: usize) -> String {
    let c = grid.coords(node);
    if grid.dim() == 1 {
        c[0].to_string()
    } else {
        format!("{},{}", c[0], c[1])
    }
}

/// `i[,j],value` per node.
pub fn snapshot_csv(f: &GridFunction) -> String {
    let grid = f.grid();
    let mut out = format!("{},value\n", coord_header(grid));
    for (i, v) in f.values().iter().enumerate() {
        let _ = writeln!(out, "{},{v}", coords(grid, i));
    }
    out
}

/// Parses [`snapshot_csv`] output back onto `grid`.
pub fn read_snapshot_csv(grid: TorusGrid, text: &str) -> Result<GridFunction> {
    let mut values = vec![f64::NAN; grid.len()];
    for (line_no, line) in text.lines().enumerate().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        let bad = || Error::Config(format!("snapshot line {}: malformed row {line:?}", line_no + 1));
        if fields.len() != grid.dim() + 1 {
            return Err(bad());
        }
        let mut c = [0usize; 2];
        for d in 0..grid.dim() {
            c[d] = fields[d].parse().map_err(|_| bad())?;
        }
        values[grid.node(c)] = fields[grid.dim()].parse().map_err(|_| bad())?;
    }
    GridFunction::new(grid, values)
}

/// `time,sup_change,mean`.
pub fn convergence_csv(log: &[ConvergenceRecord]) -> String {
    let mut out = String::from("time,sup_change,mean\n");
    for r in log {
        let _ = writeln!(out, "{},{},{}", r.time, r.sup_change, r.mean);
    }
    out
}

/// `step,i[,j],q1[,q2],weight` per atom; stationary measures use step 0.
pub fn occupation_csv(occ: &OccupationMeasure) -> String {
    let grid = &occ.grid;
    let q = if grid.dim() == 1 { "q1" } else { "q1,q2" };
    let mut out = format!("step,{},{q},weight\n", coord_header(grid));
    for a in &occ.atoms {
        let qv = if grid.dim() == 1 {
            a.velocity[0].to_string()
        } else {
            format!("{},{}", a.velocity[0], a.velocity[1])
        };
        let _ = writeln!(out, "{},{},{qv},{}", a.step, coords(grid, a.node), a.weight);
    }
    out
}

/// `i[,j],weight`.
pub fn measure_csv(nu: &DiscreteMeasure) -> String {
    let grid = nu.grid();
    let mut out = format!("{},weight\n", coord_header(grid));
    for (i, w) in nu.weights().iter().enumerate() {
        let _ = writeln!(out, "{},{w}", coords(grid, i));
    }
    out
}

/// Sidecar describing a triplet export.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TripletMeta {
    pub format: String,
    pub n_rows: usize,
    pub n_cols: usize,
    pub nnz: usize,
    /// `stationary` or `spacetime`.
    pub mode: String,
    pub steps: Option<usize>,
    pub dt: Option<f64>,
    pub full_rows: usize,
    pub dropped_row: usize,
    pub has_mass_row: bool,
    /// One entry per column: `atom:node:q_index:step` or `source:node`.
    pub columns: Vec<String>,
    pub cost: Vec<f64>,
    pub rhs: Vec<f64>,
}

/// Constraint matrix as `row col value` lines (zero-based, one header
/// line) and its JSON sidecar.
pub fn triplets(sys: &HolonomyConstraintSystem) -> (String, TripletMeta) {
    let lp = &sys.lp;
    let mut out = String::from("row col value\n");
    for col in 0..lp.n_cols {
        for k in lp.col_ptr[col]..lp.col_ptr[col + 1] {
            let _ = writeln!(out, "{} {col} {}", lp.row_idx[k], lp.values[k]);
        }
    }
    let (mode, steps, dt) = match sys.mode {
        SystemMode::Stationary => ("stationary".to_string(), None, None),
        SystemMode::Spacetime { steps, dt } => ("spacetime".to_string(), Some(steps), Some(dt)),
    };
    let columns = sys
        .columns
        .iter()
        .map(|c| match c {
            Column::Atom { node, q_index, step } => format!("atom:{node}:{q_index}:{step}"),
            Column::Source { node } => format!("source:{node}"),
        })
        .collect();
    let meta = TripletMeta {
        format: "row col value, zero-based, equality rows A x = rhs, x >= 0".into(),
        n_rows: lp.n_rows,
        n_cols: lp.n_cols,
        nnz: lp.values.len(),
        mode,
        steps,
        dt,
        full_rows: sys.full_rows,
        dropped_row: sys.dropped_row,
        has_mass_row: sys.has_mass_row,
        columns,
        cost: lp.cost.clone(),
        rhs: lp.rhs.clone(),
    };
    (out, meta)
}

/// Parses triplet lines into `(row, col, value)`.
pub fn read_triplets(text: &str) -> Result<Vec<(usize, usize, f64)>> {
    text.lines()
        .enumerate()
        .skip(1)
        .map(|(n, line)| {
            let bad = || Error::Config(format!("triplet line {}: malformed {line:?}", n + 1));
            let mut it = line.split_whitespace();
            let r = it.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
            let c = it.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
            let v = it.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
            Ok((r, c, v))
        })
        .collect()
}

pub fn write_triplets(dir: &Path, stem: &str, sys: &HolonomyConstraintSystem) -> Result<()> {
    let (body, meta) = triplets(sys);
    write_atomic(&dir.join(format!("{stem}.triplets")), &body)?;
    write_atomic(&dir.join(format!("{stem}.json")), &to_json(&meta)?)
}

/// `alpha,residual,min_residual` with the fit in a JSON sidecar.
pub fn scan_csv(scan: &ScanReport) -> String {
    let mut out = String::from("alpha,residual,min_residual\n");
    for r in &scan.rows {
        let _ = writeln!(out, "{},{},{}", r.alpha, r.residual, r.min_residual);
    }
    out
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| Error::Config(format!("json encoding: {e}")))
}

/// Plain-text report: a title, `key = value` lines and optional tables.
#[derive(Clone, Debug, Default)]
pub struct Report {
    title: String,
    lines: Vec<(String, String)>,
    tables: Vec<(String, Vec<String>, Vec<Vec<String>>)>,
}

impl Report {
    pub fn new(title: &str) -> Self {
        Self {
            title: title.into(),
            ..Self::default()
        }
    }

    pub fn field(mut self, key: &str, value: impl ToString) -> Self {
        self.lines.push((key.into(), value.to_string()));
        self
    }

    pub fn table(mut self, name: &str, header: &[&str], rows: Vec<Vec<String>>) -> Self {
        self.tables
            .push((name.into(), header.iter().map(|h| h.to_string()).collect(), rows));
        self
    }

    pub fn render(&self) -> String {
        let mut out = format!("# {}\n", self.title);
        let width = self.lines.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        for (k, v) in &self.lines {
            let _ = writeln!(out, "{k:<width$} = {v}");
        }
        for (name, header, rows) in &self.tables {
            let _ = writeln!(out, "\n## {name}");
            let mut w: Vec<usize> = header.iter().map(|h| h.len()).collect();
            for r in rows {
                for (j, c) in r.iter().enumerate() {
                    w[j] = w[j].max(c.len());
                }
            }
            let line = |cells: &[String]| {
                cells
                    .iter()
                    .enumerate()
                    .map(|(j, c)| format!("{c:>width$}", width = w[j]))
                    .collect::<Vec<_>>()
                    .join("  ")
            };
            let _ = writeln!(out, "{}", line(header));
            for r in rows {
                let _ = writeln!(out, "{}", line(r));
            }
        }
        out
    }
}

/// Provenance of one command invocation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_path: String,
    /// SHA-256 of the configuration file bytes.
    pub config_sha256: String,
    pub seed: u64,
    pub jobs: Option<usize>,
    pub tol: Option<f64>,
    pub crate_version: String,
    pub solver: String,
    pub artifacts: Vec<String>,
}

pub fn config_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl RunManifest {
    pub fn write(&self, dir: &Path) -> Result<()> {
        write_atomic(&dir.join("manifest.json"), &to_json(self)?)
    }
}

/// Formats an `f64` for report cells.
pub fn num(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.6e}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::VelocityLattice;
    use crate::measures::{build_stationary_constraints, Discretization};
    use crate::model::ModelSpec;

    #[test]
    fn snapshot_round_trip_2d() {
        let grid = TorusGrid::new(2, 6).unwrap();
        let f = GridFunction::from_fn(grid, |x| x[0] * 3.0 - x[1] / 7.0);
        let back = read_snapshot_csv(grid, &snapshot_csv(&f)).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn triplets_match_the_matrix() {
        let model = ModelSpec::eikonal_1d();
        let grid = TorusGrid::new(1, 8).unwrap();
        let d = Discretization::new(&model, grid, VelocityLattice::new(1, 1.0, 3).unwrap(), 0.0).unwrap();
        let sys = build_stationary_constraints(&d);
        let (body, meta) = triplets(&sys);
        let t = read_triplets(&body).unwrap();
        assert_eq!(t.len(), meta.nnz);
        assert_eq!(meta.columns.len(), meta.n_cols);
        let mut dense = vec![0.0; meta.n_rows * meta.n_cols];
        for (r, c, v) in t {
            dense[r * meta.n_cols + c] += v;
        }
        for col in 0..sys.lp.n_cols {
            for k in sys.lp.col_ptr[col]..sys.lp.col_ptr[col + 1] {
                assert_eq!(dense[sys.lp.row_idx[k] * meta.n_cols + col], sys.lp.values[k]);
            }
        }
    }

    #[test]
    fn atomic_write_and_hash() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/x.csv");
        write_atomic(&p, "a\n").unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "a\n");
        assert!(!dir.path().join("sub/x.csv.tmp").exists());
        assert_eq!(
            config_hash(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn report_layout() {
        let r = Report::new("t")
            .field("gap", num(0.5))
            .table("rows", &["t", "value"], vec![vec!["1".into(), "2.5".into()]])
            .render();
        assert!(r.starts_with("# t\ngap = 5.000000e-1\n"));
        assert!(r.contains("## rows\nt  value\n1    2.5\n"), "{r}");
    }
}
