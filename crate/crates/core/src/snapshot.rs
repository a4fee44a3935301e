//! On-disk artifacts: snapshot files, diagnostics CSV, key-value summaries.
//!
//! A snapshot file is UTF-8 text: `#`-prefixed header lines (time, grid,
//! config digest, creation stamp), a column-name line, then comma-separated
//! data rows `x[,y],u,v[,w]`. Floats are written with 17 significant digits
//! so a read-back is bit-faithful. The creation stamp is ignored by
//! [`compare`], keeping repeated runs byte-comparable.

use std::io::Write as _;
use std::path::Path;

use crate::error::{Result, SimError};
use crate::integrator::StepDiag;
use crate::mesh::{GridSpec, State, StateFields};

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

/// Serialize one state. `digest` identifies the generating configuration.
pub fn format_snapshot(state: &State, digest: &str, created: &str) -> String {
    let grid = state.grid();
    let dim = grid.dim();
    let mut out = String::new();
    out.push_str(&format!("# time = {}\n", fmt(state.time)));
    if dim == 1 {
        out.push_str(&format!("# grid = 1,{},{}\n", grid.n(0), fmt(grid.length(0))));
    } else {
        out.push_str(&format!(
            "# grid = 2,{},{},{},{}\n",
            grid.n(0),
            grid.n(1),
            fmt(grid.length(0)),
            fmt(grid.length(1))
        ));
    }
    out.push_str(&format!("# digest = {digest}\n"));
    out.push_str(&format!("# created = {created}\n"));

    let triple = state.is_triple();
    let mut cols: Vec<&str> = if dim == 1 { vec!["x"] } else { vec!["x", "y"] };
    cols.extend(["u", "v"]);
    if triple {
        cols.push("w");
    }
    out.push_str(&cols.join(","));
    out.push('\n');

    let u = state.primary().values();
    let v = state.v().values();
    let w = match &state.fields {
        StateFields::Triple { w, .. } => Some(w.values()),
        StateFields::Dual { .. } => None,
    };
    let ny = if dim == 1 { 1 } else { grid.n(1) };
    for j in 0..ny {
        for i in 0..grid.n(0) {
            let idx = grid.index(i, j);
            let mut row = vec![fmt(grid.center(0, i))];
            if dim == 2 {
                row.push(fmt(grid.center(1, j)));
            }
            row.push(fmt(u[idx]));
            row.push(fmt(v[idx]));
            if let Some(wv) = w {
                row.push(fmt(wv[idx]));
            }
            out.push_str(&row.join(","));
            out.push('\n');
        }
    }
    out
}

pub fn write_snapshot(path: &Path, state: &State, digest: &str, created: &str) -> Result<()> {
    std::fs::write(path, format_snapshot(state, digest, created))?;
    Ok(())
}

/// A parsed snapshot file, column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotFile {
    pub time: f64,
    pub grid: GridSpec,
    pub digest: String,
    pub column_names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

fn header_err(line: usize, msg: &str) -> SimError {
    SimError::Config(format!("snapshot line {line}: {msg}"))
}

/// Parse snapshot text. Total over arbitrary input: every malformation is
/// a returned error, never a panic.
pub fn parse_snapshot(text: &str) -> Result<SnapshotFile> {
    let mut time: Option<f64> = None;
    let mut grid: Option<GridSpec> = None;
    let mut digest = String::new();
    let mut column_names: Option<Vec<String>> = None;
    let mut columns: Vec<Vec<f64>> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let rest = rest.trim();
            let Some((key, value)) = rest.split_once('=') else {
                continue; // free-form comment
            };
            let (key, value) = (key.trim(), value.trim());
            match key {
                "time" => {
                    let t: f64 = value
                        .parse()
                        .map_err(|_| header_err(line_no, "bad time value"))?;
                    if !t.is_finite() {
                        return Err(header_err(line_no, "non-finite time"));
                    }
                    time = Some(t);
                }
                "grid" => {
                    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
                    let parse_n = |s: &str| -> Result<usize> {
                        s.parse::<usize>()
                            .map_err(|_| header_err(line_no, "bad cell count"))
                    };
                    let parse_l = |s: &str| -> Result<f64> {
                        s.parse::<f64>()
                            .map_err(|_| header_err(line_no, "bad length"))
                    };
                    let g = match parts.as_slice() {
                        ["1", n, l] => GridSpec::line(parse_n(n)?, parse_l(l)?),
                        ["2", nx, ny, lx, ly] => GridSpec::rect(
                            [parse_n(nx)?, parse_n(ny)?],
                            [parse_l(lx)?, parse_l(ly)?],
                        ),
                        _ => return Err(header_err(line_no, "grid header needs dim,n..,length..")),
                    }
                    .map_err(|e| header_err(line_no, &e.to_string()))?;
                    grid = Some(g);
                }
                "digest" => digest = value.to_string(),
                "created" => {} // informational, excluded from comparisons
                _ => return Err(header_err(line_no, &format!("unknown header key `{key}`"))),
            }
            continue;
        }
        match &column_names {
            None => {
                let names: Vec<String> = line.split(',').map(|s| s.trim().to_string()).collect();
                if names.iter().any(|n| n.is_empty()) {
                    return Err(header_err(line_no, "empty column name"));
                }
                columns = vec![Vec::new(); names.len()];
                column_names = Some(names);
            }
            Some(names) => {
                let cells: Vec<&str> = line.split(',').map(str::trim).collect();
                if cells.len() != names.len() {
                    return Err(header_err(
                        line_no,
                        &format!("expected {} cells, got {}", names.len(), cells.len()),
                    ));
                }
                for (col, cell) in columns.iter_mut().zip(cells) {
                    let v: f64 = cell
                        .parse()
                        .map_err(|_| header_err(line_no, &format!("bad number `{cell}`")))?;
                    if !v.is_finite() {
                        return Err(header_err(line_no, "non-finite value"));
                    }
                    col.push(v);
                }
            }
        }
    }

    let time = time.ok_or_else(|| SimError::Config("snapshot missing time header".into()))?;
    let grid = grid.ok_or_else(|| SimError::Config("snapshot missing grid header".into()))?;
    let column_names =
        column_names.ok_or_else(|| SimError::Config("snapshot has no column line".into()))?;
    let rows = columns.first().map(|c| c.len()).unwrap_or(0);
    if rows != grid.cell_count() {
        return Err(SimError::Config(format!(
            "snapshot has {rows} data rows but the grid has {} cells",
            grid.cell_count()
        )));
    }
    Ok(SnapshotFile {
        time,
        grid,
        digest,
        column_names,
        columns,
    })
}

pub fn read_snapshot(path: &Path) -> Result<SnapshotFile> {
    let text = std::fs::read_to_string(path)?;
    parse_snapshot(&text)
}

/// Per-column worst deviation between two snapshot files.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnDiff {
    pub name: String,
    pub max_abs_diff: f64,
    /// Zero-based data-row index where the max occurs.
    pub row: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareReport {
    pub diffs: Vec<ColumnDiff>,
}

impl CompareReport {
    pub fn max_abs_diff(&self) -> f64 {
        self.diffs.iter().map(|d| d.max_abs_diff).fold(0.0, f64::max)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max_abs_diff() <= tol
    }
}

/// Columnwise comparison of two snapshots on the same grid. Columns present
/// in only one file (e.g. w against a limit run) are skipped.
pub fn compare(a: &SnapshotFile, b: &SnapshotFile) -> Result<CompareReport> {
    if a.grid != b.grid {
        return Err(SimError::Alignment("snapshots on different grids".into()));
    }
    let mut diffs = Vec::new();
    for (name, col_a) in a.column_names.iter().zip(&a.columns) {
        let Some(pos) = b.column_names.iter().position(|n| n == name) else {
            continue;
        };
        let col_b = &b.columns[pos];
        let mut max_abs_diff = 0.0;
        let mut row = 0;
        for (k, (x, y)) in col_a.iter().zip(col_b).enumerate() {
            let d = (x - y).abs();
            if d > max_abs_diff {
                max_abs_diff = d;
                row = k;
            }
        }
        diffs.push(ColumnDiff {
            name: name.clone(),
            max_abs_diff,
            row,
        });
    }
    if diffs.is_empty() {
        return Err(SimError::Alignment("snapshots share no columns".into()));
    }
    Ok(CompareReport { diffs })
}

/// Diagnostics CSV: one row per step, empty cells for fields the limit
/// system does not carry.
pub fn write_diagnostics_csv(path: &Path, diags: &[StepDiag]) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(
        f,
        "step,t,dt,max_speed,min_primary,min_v,min_w,linf_v,linf_w,\
         l1_primary,l1_v,l1_w,l2sq_primary,l2sq_v,grad_sq_v,grad_sq_w_minus_v"
    )?;
    let opt = |v: Option<f64>| v.map(fmt).unwrap_or_default();
    for d in diags {
        writeln!(
            f,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            d.step,
            fmt(d.t),
            fmt(d.dt),
            fmt(d.max_speed),
            fmt(d.min_primary),
            fmt(d.min_v),
            opt(d.min_w),
            fmt(d.linf_v),
            opt(d.linf_w),
            fmt(d.l1_primary),
            fmt(d.l1_v),
            opt(d.l1_w),
            fmt(d.l2sq_primary),
            fmt(d.l2sq_v),
            fmt(d.grad_sq_v),
            opt(d.grad_sq_w_minus_v),
        )?;
    }
    Ok(())
}

/// Machine-readable `key = value` summary.
pub fn write_summary(path: &Path, entries: &[(String, String)]) -> Result<()> {
    let mut out = String::new();
    for (k, v) in entries {
        out.push_str(&format!("{k} = {v}\n"));
    }
    std::fs::write(path, out)?;
    Ok(())
}
