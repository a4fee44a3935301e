//! Run orchestration: execute a parsed configuration, persist snapshots,
//! diagnostics and reports into a per-run output directory, and summarize
//! the invariant monitors. Science failures (bound violations) do not fail
//! the process; they are flagged in the summary.

use std::path::{Path, PathBuf};

use crate::analysis::{epsilon_sweep, monitor_invariants, InvariantReport, SweepSetup};
use crate::config::{config_digest, serialize_config, RunConfig, RunVariant};
use crate::error::{Result, SimError};
use crate::integrator::{solve, ModelVariant, TimeSpec, Trajectory};
use crate::mesh::GridSpec;
use crate::mms::ManufacturedSolution;
use crate::models::{build_initial_data, InitialData};
use crate::snapshot::{write_diagnostics_csv, write_snapshot, write_summary};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RunStatus {
    Ok,
    /// The simulation completed but an a priori bound was violated.
    Violations,
}

impl RunStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            RunStatus::Ok => "ok",
            RunStatus::Violations => "violations",
        }
    }
}

#[derive(Debug)]
pub struct RunOutcome {
    pub status: RunStatus,
    pub out_dir: PathBuf,
    pub summary: Vec<(String, String)>,
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn created_stamp() -> String {
    use std::time::{SystemTime, UNIX_EPOCH};
    let secs = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    format!("unix:{secs}")
}

fn prepare_out_dir(cfg: &RunConfig, out_override: Option<&Path>) -> Result<PathBuf> {
    let dir = out_override
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from(&cfg.out_dir));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn summarize_invariants(prefix: &str, rep: &InvariantReport, entries: &mut Vec<(String, String)>) {
    entries.push((
        format!("{prefix}invariant_violations"),
        rep.violations.len().to_string(),
    ));
    for v in rep.violations.iter().take(5) {
        entries.push((
            format!("{prefix}violation"),
            format!("t={} check={} bound={} observed={}", v.time, v.check, v.bound, v.observed),
        ));
    }
    entries.push((format!("{prefix}v_inf_bound"), fmt(rep.v_inf_bound)));
    entries.push((format!("{prefix}sup_linf_v"), fmt(rep.sup_linf_v)));
    entries.push((format!("{prefix}min_primary"), fmt(rep.min_primary)));
    entries.push((format!("{prefix}min_v"), fmt(rep.min_v)));
    if let Some(mw) = rep.min_w {
        entries.push((format!("{prefix}min_w"), fmt(mw)));
    }
}

fn write_trajectory(dir: &Path, traj: &Trajectory, digest: &str) -> Result<()> {
    let created = created_stamp();
    for (k, snap) in traj.snapshots.iter().enumerate() {
        let path = dir.join(format!("snapshot_{k:06}.csv"));
        write_snapshot(&path, snap, digest, &created)?;
    }
    write_diagnostics_csv(&dir.join("diagnostics.csv"), &traj.diagnostics)?;
    Ok(())
}

/// Execute `cfg` and write all artifacts. Returns Ok even when invariant
/// monitors flag violations; hard failures (solver breakdown, blow-up, io)
/// surface as errors.
pub fn run(cfg: &RunConfig, out_override: Option<&Path>, quiet: bool) -> Result<RunOutcome> {
    let dir = prepare_out_dir(cfg, out_override)?;
    let digest = config_digest(cfg);
    std::fs::write(dir.join("config.txt"), serialize_config(cfg))?;

    let initial = build_initial_data(&cfg.ic, &cfg.grid, &cfg.params, cfg.compatibility)?;

    let mut entries: Vec<(String, String)> = vec![
        ("digest".into(), digest.clone()),
        ("variant".into(), cfg.variant.as_str().into()),
    ];

    let status = match cfg.variant {
        RunVariant::Sweep => run_sweep(cfg, &initial, &dir, &mut entries, quiet)?,
        RunVariant::Indirect | RunVariant::Limit => {
            let variant = if cfg.variant == RunVariant::Indirect {
                ModelVariant::Indirect
            } else {
                ModelVariant::Limit
            };
            let forcing = match &cfg.mms {
                Some(_) => Some(ManufacturedSolution::new(&cfg.grid)?),
                None => None,
            };
            let (initial, forcing_ref) = match &forcing {
                Some(m) => (mms_initial(m, &cfg.grid), Some(m)),
                None => (initial, None),
            };
            if !quiet {
                println!("running {} to t = {}", cfg.variant.as_str(), cfg.time.t_end);
            }
            let traj = solve(&initial, &cfg.params, &cfg.time, variant, forcing_ref)?;
            write_trajectory(&dir, &traj, &digest)?;
            entries.push(("steps".into(), (traj.diagnostics.len() - 1).to_string()));
            entries.push(("t_end".into(), fmt(traj.final_state().time)));

            if let Some(m) = forcing_ref {
                let err = mms_linf_error(m, &traj);
                entries.push(("mms_linf_error".into(), fmt(err)));
            }
            let rep = monitor_invariants(&traj, &cfg.params);
            summarize_invariants("", &rep, &mut entries);
            if rep.passed() {
                RunStatus::Ok
            } else {
                RunStatus::Violations
            }
        }
    };

    entries.insert(0, ("status".into(), status.as_str().into()));
    write_summary(&dir.join("summary.txt"), &entries)?;
    if !quiet {
        println!("status: {} ({})", status.as_str(), dir.display());
    }
    Ok(RunOutcome {
        status,
        out_dir: dir,
        summary: entries,
    })
}

fn run_sweep(
    cfg: &RunConfig,
    initial: &InitialData,
    dir: &Path,
    entries: &mut Vec<(String, String)>,
    quiet: bool,
) -> Result<RunStatus> {
    if !quiet {
        println!("sweep over {} relaxation values", cfg.eps_list.len());
    }
    let setup = SweepSetup {
        params: cfg.params.clone(),
        initial: initial.clone(),
        time: cfg.time.clone(),
        eps_list: cfg.eps_list.clone(),
    };
    let report = epsilon_sweep(&setup)?;

    let mut csv = String::from(
        "eps,sup_t_l2_u,l2t_h1_u,sup_t_h1_v,sup_t_l2_grad_v_minus_grad_w,final_grad_w_minus_v\n",
    );
    for row in &report.rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            fmt(row.eps),
            fmt(row.norms.sup_t_l2_u),
            fmt(row.norms.l2t_h1_u),
            fmt(row.norms.sup_t_h1_v),
            fmt(row.norms.sup_t_l2_grad_v_minus_grad_w),
            fmt(row.final_grad_w_minus_v),
        ));
    }
    std::fs::write(dir.join("sweep_report.csv"), csv)?;

    entries.push(("shared_dt".into(), fmt(report.shared_dt)));
    entries.push(("sweep_rows".into(), report.rows.len().to_string()));
    let names = [
        "order_sup_t_l2_u",
        "order_l2t_h1_u",
        "order_sup_t_h1_v",
        "order_sup_t_l2_grad_v_minus_grad_w",
    ];
    for (name, fit) in names.iter().zip(&report.fitted_orders) {
        entries.push((name.to_string(), fit.to_string()));
    }
    summarize_invariants("limit_", &report.limit_invariants, entries);
    for row in &report.rows {
        summarize_invariants(&format!("eps_{}_", row.eps), &row.invariants, entries);
    }
    Ok(if report.all_invariants_passed() {
        RunStatus::Ok
    } else {
        RunStatus::Violations
    })
}

fn mms_initial(m: &ManufacturedSolution, grid: &GridSpec) -> InitialData {
    let exact0 = m.exact_field(grid, 0.0);
    InitialData {
        primary0: exact0.clone(),
        v0: exact0.clone(),
        w0: exact0,
        compatibility: true,
    }
}

fn mms_linf_error(m: &ManufacturedSolution, traj: &Trajectory) -> f64 {
    let state = traj.final_state();
    let exact = m.exact_field(state.grid(), state.time);
    let mut err: f64 = 0.0;
    for f in [state.primary(), state.v(), state.w_or_v()] {
        err = err.max(
            f.values()
                .iter()
                .zip(exact.values())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max),
        );
    }
    err
}

#[derive(Debug, Clone, PartialEq)]
pub struct MmsLevel {
    pub n: usize,
    pub dt: f64,
    pub linf_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MmsReport {
    pub levels: Vec<MmsLevel>,
    /// log2(err_k / err_{k+1}) between consecutive levels.
    pub observed_orders: Vec<f64>,
}

impl MmsReport {
    pub fn min_order(&self) -> f64 {
        self.observed_orders.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Manufactured-solution refinement ladder: halve h and dt together per
/// level and measure the final-time L-inf error against the exact profile.
pub fn mms_ladder(cfg: &RunConfig, quiet: bool) -> Result<MmsReport> {
    let mms_spec = cfg
        .mms
        .ok_or_else(|| SimError::Config("mms run needs an [mms] section with enabled = true".into()))?;
    if cfg.grid.dim() != 1 {
        return Err(SimError::Config("mms ladder supports 1D grids only".into()));
    }
    let base_n = cfg.grid.n(0);
    let base_dt = cfg.time.fixed_dt.unwrap_or(cfg.time.dt_max);
    let mut levels = Vec::with_capacity(mms_spec.levels);
    for k in 0..mms_spec.levels {
        let n = base_n << k;
        let dt = base_dt / (1u64 << k) as f64;
        let grid = GridSpec::line(n, cfg.grid.length(0))?;
        let m = ManufacturedSolution::new(&grid)?;
        let ts = TimeSpec::new(cfg.time.t_end, dt, cfg.time.cfl_adv, usize::MAX)?.with_fixed_dt(dt);
        let traj = solve(&mms_initial(&m, &grid), &cfg.params, &ts, ModelVariant::Indirect, Some(&m))?;
        let linf_error = mms_linf_error(&m, &traj);
        if !quiet {
            println!("mms level {k}: n = {n}, dt = {dt:.3e}, linf error = {linf_error:.3e}");
        }
        levels.push(MmsLevel { n, dt, linf_error });
    }
    let observed_orders = levels
        .windows(2)
        .map(|w| (w[0].linf_error / w[1].linf_error).log2())
        .collect();
    Ok(MmsReport {
        levels,
        observed_orders,
    })
}

/// Run the ladder and persist `mms_report.csv` plus a summary.
pub fn run_mms(cfg: &RunConfig, out_override: Option<&Path>, quiet: bool) -> Result<RunOutcome> {
    let dir = prepare_out_dir(cfg, out_override)?;
    std::fs::write(dir.join("config.txt"), serialize_config(cfg))?;
    let report = mms_ladder(cfg, quiet)?;

    let mut csv = String::from("level,n,dt,linf_error\n");
    for (k, lvl) in report.levels.iter().enumerate() {
        csv.push_str(&format!("{k},{},{},{}\n", lvl.n, fmt(lvl.dt), fmt(lvl.linf_error)));
    }
    std::fs::write(dir.join("mms_report.csv"), csv)?;

    let mut entries: Vec<(String, String)> = vec![
        ("status".into(), "ok".into()),
        ("digest".into(), config_digest(cfg)),
        ("variant".into(), "mms".into()),
        ("mms_levels".into(), report.levels.len().to_string()),
    ];
    if !report.observed_orders.is_empty() {
        entries.push(("mms_min_order".into(), format!("{:.4}", report.min_order())));
    }
    for (k, o) in report.observed_orders.iter().enumerate() {
        entries.push((format!("mms_order_{k}_{}", k + 1), format!("{o:.4}")));
    }
    write_summary(&dir.join("summary.txt"), &entries)?;
    if !quiet && !report.observed_orders.is_empty() {
        println!("mms min observed order: {:.4}", report.min_order());
    }
    Ok(RunOutcome {
        status: RunStatus::Ok,
        out_dir: dir,
        summary: entries,
    })
}
