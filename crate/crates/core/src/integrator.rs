//! IMEX time stepping: backward-Euler diffusion, implicit signal relaxation
//! (uniformly stable as eps -> 0), explicit upwind taxis and reactions.

use crate::error::{Result, SimError};
use crate::linalg::solve_helmholtz;
use crate::mesh::{grad_sq_norm, norm_lp, Field, Lp, State, StateFields};
use crate::mms::ManufacturedSolution;
use crate::models::{InitialData, ModelParams};
use crate::operators::{max_face_speed, taxis_divergence};

/// Any field magnitude above this aborts the run; the continuous problem is
/// globally bounded, so reaching it signals a scheme bug, not physics.
pub const BLOWUP_THRESHOLD: f64 = 1e6;

/// Which system a run integrates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelVariant {
    /// Three equations with the eps-relaxation signal.
    Indirect,
    /// Two-equation fast-reaction limit.
    Limit,
}

/// Time-stepping control.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSpec {
    pub t_end: f64,
    pub dt_max: f64,
    pub cfl_adv: f64,
    /// Snapshot every this many steps (the final time is always kept).
    pub snapshot_stride: usize,
    /// When set, every step uses this dt (truncated at t_end); sweeps use it
    /// so all runs share one step sequence.
    pub fixed_dt: Option<f64>,
}

impl TimeSpec {
    pub fn new(t_end: f64, dt_max: f64, cfl_adv: f64, snapshot_stride: usize) -> Result<Self> {
        if !(t_end >= 0.0 && t_end.is_finite()) {
            return Err(SimError::Config(format!("t_end must be >= 0, got {t_end}")));
        }
        if !(dt_max > 0.0 && dt_max.is_finite()) {
            return Err(SimError::Config(format!("dt_max must be > 0, got {dt_max}")));
        }
        if !(cfl_adv > 0.0 && cfl_adv <= 1.0) {
            return Err(SimError::Config(format!(
                "cfl_adv must be in (0, 1], got {cfl_adv}"
            )));
        }
        if snapshot_stride == 0 {
            return Err(SimError::Config("snapshot_stride must be positive".into()));
        }
        Ok(TimeSpec {
            t_end,
            dt_max,
            cfl_adv,
            snapshot_stride,
            fixed_dt: None,
        })
    }

    pub fn with_fixed_dt(mut self, dt: f64) -> Self {
        self.fixed_dt = Some(dt);
        self
    }
}

/// Per-step record; norms are accumulated here every step so sup-in-time
/// quantities are not limited by the snapshot stride.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDiag {
    pub step: usize,
    pub t: f64,
    pub dt: f64,
    pub max_speed: f64,
    pub min_primary: f64,
    pub min_v: f64,
    pub min_w: Option<f64>,
    pub linf_v: f64,
    pub linf_w: Option<f64>,
    pub l1_primary: f64,
    pub l1_v: f64,
    pub l1_w: Option<f64>,
    /// int primary^2 and int v^2, for windowed space-time bounds.
    pub l2sq_primary: f64,
    pub l2sq_v: f64,
    pub grad_sq_v: f64,
    /// ||grad(w - v)||_2^2, triple states only.
    pub grad_sq_w_minus_v: Option<f64>,
}

fn diag_of(state: &State, step: usize, dt: f64, max_speed: f64) -> StepDiag {
    let p = state.primary();
    let v = state.v();
    let w = state.w();
    let l2 = |f: &Field| {
        let n = norm_lp(f, Lp::Two);
        n * n
    };
    StepDiag {
        step,
        t: state.time,
        dt,
        max_speed,
        min_primary: p.min(),
        min_v: v.min(),
        min_w: w.map(|w| w.min()),
        linf_v: norm_lp(v, Lp::Inf),
        linf_w: w.map(|w| norm_lp(w, Lp::Inf)),
        l1_primary: norm_lp(p, Lp::One),
        l1_v: norm_lp(v, Lp::One),
        l1_w: w.map(|w| norm_lp(w, Lp::One)),
        l2sq_primary: l2(p),
        l2sq_v: l2(v),
        grad_sq_v: grad_sq_norm(v),
        grad_sq_w_minus_v: w.map(|w| grad_sq_norm(&w.sub(v))),
    }
}

/// Time-stamped snapshots plus per-step diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub snapshots: Vec<State>,
    pub diagnostics: Vec<StepDiag>,
}

impl Trajectory {
    pub fn final_state(&self) -> &State {
        self.snapshots.last().expect("trajectory has snapshots")
    }
}

/// Largest stable explicit step: advective CFL bound plus a cap from the
/// pointwise kinetic rates estimated on the current fields.
pub fn cfl_dt(primary: &Field, drive: &Field, p: &ModelParams, ts: &TimeSpec) -> f64 {
    let speed = max_face_speed(drive, p.chi());
    let h = primary.grid().h_min();
    let dt_adv = if speed > 0.0 {
        ts.cfl_adv * h / speed
    } else {
        f64::INFINITY
    };
    let rate = reaction_rate_estimate(primary, drive, p);
    let dt_reaction = if rate > 0.0 {
        ts.cfl_adv / rate
    } else {
        f64::INFINITY
    };
    ts.dt_max.min(dt_adv).min(dt_reaction)
}

/// Max pointwise |d reaction / d state| over the current fields, using the
/// drive field as the v-proxy (w tracks v closely in the relaxation runs).
fn reaction_rate_estimate(primary: &Field, drive: &Field, p: &ModelParams) -> f64 {
    match p {
        ModelParams::Competition(c) => {
            let mut rate: f64 = 0.0;
            for (&u, &v) in primary.values().iter().zip(drive.values()) {
                rate = rate.max((c.mu1 * (1.0 - 2.0 * u - c.a1 * v)).abs());
                rate = rate.max((c.mu2 * (1.0 - 2.0 * v - c.a2 * u)).abs());
            }
            rate
        }
        ModelParams::PredPrey(c) => {
            let lf = c.response.lipschitz();
            let mut rate: f64 = 0.0;
            for (&z, &v) in primary.values().iter().zip(drive.values()) {
                let fv = c.response.eval_raw(v.max(0.0));
                rate = rate.max((c.mu1 - 2.0 * c.mu1_prime * z + c.b * fv).abs());
                rate = rate.max((c.mu2 * (1.0 - 2.0 * v)).abs() + lf * z.abs());
            }
            rate
        }
    }
}

fn check_field(f: &Field, t: f64, name: &str) -> Result<()> {
    if !f.is_finite() || norm_lp(f, Lp::Inf) > BLOWUP_THRESHOLD {
        return Err(SimError::Blowup {
            time: t,
            what: format!("{name} exceeded {BLOWUP_THRESHOLD:e} or became non-finite"),
        });
    }
    Ok(())
}

/// One IMEX step.
///
/// Update order: v is advanced first (its equation never reads w), then the
/// signal w (diffusion and relaxation both implicit, so stability is uniform
/// in eps) relaxes toward the fresh v^{n+1}, and the taxis for the primary
/// species reads the fresh gradient. As eps -> 0 the w-solve returns v^{n+1}
/// exactly and the step degenerates to the limit stepper (whose taxis also
/// uses grad v^{n+1}), so w - v stays O(eps) uniformly in dt and the
/// eps-error of a run pair carries no one-step signal lag.
pub fn step_imex(
    state: &State,
    dt: f64,
    p: &ModelParams,
    forcing: Option<&ManufacturedSolution>,
) -> Result<State> {
    let t = state.time;
    let t_new = t + dt;
    let grid = state.grid().clone();
    let forcing_terms = forcing.map(|m| m.forcing(&grid, t, p));

    match &state.fields {
        StateFields::Triple { u, v, w } => {
            let eps = p.eps();
            let (ru, rv) = p.reaction(u, v);
            let mut v_expl = rv;
            if let Some((_, f_v, _)) = &forcing_terms {
                v_expl = v_expl.axpy(1.0, f_v);
            }
            let v_new = solve_helmholtz(1.0, dt * p.d_v(), &v.axpy(dt, &v_expl))?;

            // ((1/dt + 1/eps) I - L) w^{n+1} = w^n/dt + v^{n+1}/eps [+ g_w]
            let mut w_rhs = w.scale(1.0 / dt).axpy(1.0 / eps, &v_new);
            if let Some((_, _, g_w)) = &forcing_terms {
                w_rhs = w_rhs.axpy(1.0, g_w);
            }
            let w_new = solve_helmholtz(1.0 / dt + 1.0 / eps, 1.0, &w_rhs)?;

            let taxis = taxis_divergence(u, &w_new, p.chi(), p.taxis_sign())?;
            let mut u_expl = taxis.axpy(1.0, &ru);
            if let Some((f_u, _, _)) = &forcing_terms {
                u_expl = u_expl.axpy(1.0, f_u);
            }
            let u_new = solve_helmholtz(1.0, dt * p.d_primary(), &u.axpy(dt, &u_expl))?;

            check_field(&u_new, t_new, "primary")?;
            check_field(&v_new, t_new, "v")?;
            check_field(&w_new, t_new, "w")?;
            State::triple(t_new, u_new, v_new, w_new)
        }
        StateFields::Dual { u, v } => {
            let (ru, rv) = p.reaction(u, v);
            let mut v_expl = rv;
            if let Some((_, f_v, _)) = &forcing_terms {
                v_expl = v_expl.axpy(1.0, f_v);
            }
            let v_new = solve_helmholtz(1.0, dt * p.d_v(), &v.axpy(dt, &v_expl))?;

            // the limit taxis drives on the same fresh v^{n+1} the indirect
            // step's w-solve relaxes toward
            let taxis = taxis_divergence(u, &v_new, p.chi(), p.taxis_sign())?;
            let mut u_expl = taxis.axpy(1.0, &ru);
            if let Some((f_u, _, _)) = &forcing_terms {
                u_expl = u_expl.axpy(1.0, f_u);
            }
            let u_new = solve_helmholtz(1.0, dt * p.d_primary(), &u.axpy(dt, &u_expl))?;

            check_field(&u_new, t_new, "primary")?;
            check_field(&v_new, t_new, "v")?;
            State::dual(t_new, u_new, v_new)
        }
    }
}

/// Integrate from the initial data to `t_end`. Deterministic given its
/// arguments; snapshots land at the stride plus always at the final time.
pub fn solve(
    initial: &InitialData,
    p: &ModelParams,
    ts: &TimeSpec,
    variant: ModelVariant,
    forcing: Option<&ManufacturedSolution>,
) -> Result<Trajectory> {
    let state0 = match variant {
        ModelVariant::Indirect => State::triple(
            0.0,
            initial.primary0.clone(),
            initial.v0.clone(),
            initial.w0.clone(),
        )?,
        ModelVariant::Limit => State::dual(0.0, initial.primary0.clone(), initial.v0.clone())?,
    };

    let speed0 = max_face_speed(state0.w_or_v(), p.chi());
    let mut snapshots = vec![state0.clone()];
    let mut diagnostics = vec![diag_of(&state0, 0, 0.0, speed0)];

    let mut state = state0;
    let mut step = 0usize;
    let t_tol = 1e-14 * ts.t_end.max(1.0);
    while state.time < ts.t_end - t_tol {
        let dt_want = ts
            .fixed_dt
            .unwrap_or_else(|| cfl_dt(state.primary(), state.w_or_v(), p, ts))
            .min(ts.dt_max);
        let remaining = ts.t_end - state.time;
        let (dt, is_final) = if dt_want >= remaining - t_tol {
            (remaining, true)
        } else {
            (dt_want, false)
        };

        let speed = max_face_speed(state.w_or_v(), p.chi());
        let mut next = step_imex(&state, dt, p, forcing).map_err(|e| match e {
            SimError::Solver(msg) => SimError::Solver(format!("at t={}: {msg}", state.time)),
            other => other,
        })?;
        if is_final {
            next.time = ts.t_end; // land exactly, round-off free
        }
        step += 1;
        diagnostics.push(diag_of(&next, step, dt, speed));
        if step % ts.snapshot_stride == 0 || is_final {
            snapshots.push(next.clone());
        }
        state = next;
    }
    Ok(Trajectory {
        snapshots,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{integrate, GridSpec};
    use crate::models::{build_initial_data, CompetitionParams, IcFamily};

    fn competition(chi: f64, mu: f64, eps: f64) -> ModelParams {
        ModelParams::Competition(
            CompetitionParams::new(1.0, 1.0, chi, mu, mu, 0.5, 0.5, eps).unwrap(),
        )
    }

    fn ts(t_end: f64, dt_max: f64) -> TimeSpec {
        TimeSpec::new(t_end, dt_max, 0.5, 10).unwrap()
    }

    #[test]
    fn cfl_examples() {
        let g = GridSpec::line(100, 1.0).unwrap();
        let spec = ts(1.0, 0.25);
        let u = Field::constant(g.clone(), 0.0);
        // w constant, zero kinetics rate at u=v=0? mu*(1-0)=mu, so use tiny mu
        let p = competition(1.0, 1e-9, 0.5);
        let w = Field::constant(g.clone(), 1.0);
        let dt = cfl_dt(&u, &w, &p, &spec);
        assert!((dt - 0.25).abs() < 1e-9, "no velocity -> dt_max, got {dt}");

        // chi=1, h=0.01, max face slope 2, cfl 0.5 -> 2.5e-3
        let w = Field::from_fn(g.clone(), |x, _| 2.0 * x);
        let dt1 = cfl_dt(&u, &w, &p, &spec);
        assert!((dt1 - 2.5e-3).abs() < 1e-10, "got {dt1}");

        // doubling chi halves the advective bound
        let p2 = competition(2.0, 1e-9, 0.5);
        let dt2 = cfl_dt(&u, &w, &p2, &spec);
        assert!((dt2 - dt1 / 2.0).abs() < 1e-12);
    }

    #[test]
    fn equilibrium_is_fixed_point() {
        let g = GridSpec::line(32, 1.0).unwrap();
        let p = competition(1.5, 1.0, 0.05);
        let ic = build_initial_data(
            &IcFamily::CosinePerturbedEquilibrium {
                amplitude: 0.0,
                mode: 1,
            },
            &g,
            &p,
            true,
        )
        .unwrap();
        let traj = solve(&ic, &p, &ts(0.5, 0.01), ModelVariant::Indirect, None).unwrap();
        let end = traj.final_state();
        let (ue, _) = p.coexistence().unwrap();
        for &v in end.primary().values() {
            assert!((v - ue).abs() < 1e-10);
        }
    }

    #[test]
    fn uniform_relaxation_matches_exact_update() {
        // mu = 0 freezes v; with constants the diffusion drops out and
        // w^1 = (w0/dt + v/eps) / (1/dt + 1/eps) exactly.
        let g = GridSpec::line(8, 1.0).unwrap();
        let p = competition(0.0, 0.0, 0.2);
        let (v_bar, w_bar, dt) = (0.8, 0.2, 0.01);
        let st = State::triple(
            0.0,
            Field::constant(g.clone(), 0.0),
            Field::constant(g.clone(), v_bar),
            Field::constant(g.clone(), w_bar),
        )
        .unwrap();
        let next = step_imex(&st, dt, &p, None).unwrap();
        let expect = (w_bar / dt + v_bar / 0.2) / (1.0 / dt + 1.0 / 0.2);
        for &w in next.w().unwrap().values() {
            assert!((w - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn relaxation_decay_first_order_in_dt() {
        // w(t) = v + (w0 - v) exp(-t/eps); halving dt must roughly halve the
        // terminal error.
        let g = GridSpec::line(4, 1.0).unwrap();
        let eps = 0.3;
        let p = competition(0.0, 0.0, eps);
        let (v_bar, w_bar, t_end) = (1.0, 0.0, 0.5);
        let mut errs = Vec::new();
        for dt in [0.02, 0.01, 0.005] {
            let ic = InitialDataFixture {
                v: v_bar,
                w: w_bar,
                g: g.clone(),
            }
            .build();
            let spec = ts(t_end, dt).with_fixed_dt(dt);
            let traj = solve(&ic, &p, &spec, ModelVariant::Indirect, None).unwrap();
            let w_num = traj.final_state().w().unwrap().values()[0];
            let w_exact = v_bar + (w_bar - v_bar) * (-t_end / eps).exp();
            errs.push((w_num - w_exact).abs());
        }
        assert!(errs[1] < errs[0] / 1.7 && errs[2] < errs[1] / 1.7, "{errs:?}");
    }

    struct InitialDataFixture {
        v: f64,
        w: f64,
        g: GridSpec,
    }
    impl InitialDataFixture {
        fn build(&self) -> InitialData {
            InitialData {
                primary0: Field::constant(self.g.clone(), 0.0),
                v0: Field::constant(self.g.clone(), self.v),
                w0: Field::constant(self.g.clone(), self.w),
                compatibility: false,
            }
        }
    }

    #[test]
    fn relaxation_is_monotone_for_all_eps() {
        // Unconditional eps-stability: fixed dt, eps down to 1e-6, approach
        // from below is monotone with no oscillation.
        let g = GridSpec::line(4, 1.0).unwrap();
        for k in 1..=6 {
            let eps = 10f64.powi(-k);
            let p = competition(0.0, 0.0, eps);
            let ic = InitialDataFixture {
                v: 1.0,
                w: 0.0,
                g: g.clone(),
            }
            .build();
            let spec = ts(0.2, 0.01).with_fixed_dt(0.01);
            let traj = solve(&ic, &p, &spec, ModelVariant::Indirect, None).unwrap();
            let mut prev = 0.0;
            for s in &traj.snapshots {
                let w = s.w().unwrap().values()[0];
                assert!(w >= prev - 1e-14 && w <= 1.0 + 1e-14, "eps={eps}: w={w}");
                prev = w;
            }
        }
    }

    #[test]
    fn pure_diffusion_cosine_decay() {
        // chi = 0, mu = 0: u(t) = 1 + exp(-d pi^2 t) cos(pi x) + O(dt + h^2).
        // The constant keeps the density nonnegative.
        let g = GridSpec::line(128, 1.0).unwrap();
        let p = competition(0.0, 0.0, 1.0);
        let pi = std::f64::consts::PI;
        let ic = InitialData {
            primary0: Field::from_fn(g.clone(), |x, _| 1.0 + (pi * x).cos()),
            v0: Field::constant(g.clone(), 0.0),
            w0: Field::constant(g.clone(), 0.0),
            compatibility: false,
        };
        let t_end = 0.05;
        let spec = ts(t_end, 1e-4).with_fixed_dt(1e-4);
        let traj = solve(&ic, &p, &spec, ModelVariant::Limit, None).unwrap();
        let amp = (-pi * pi * t_end).exp();
        let u = traj.final_state().primary();
        let max_err = u
            .values()
            .iter()
            .enumerate()
            .map(|(i, &uv)| (uv - 1.0 - amp * (pi * g.center(0, i)).cos()).abs())
            .fold(0.0f64, f64::max);
        assert!(max_err < 5e-3 * amp, "max err {max_err}");
    }

    #[test]
    fn t_end_zero_yields_initial_snapshot() {
        let g = GridSpec::line(8, 1.0).unwrap();
        let p = competition(1.0, 1.0, 0.1);
        let ic = build_initial_data(&IcFamily::Constant { value: 0.4 }, &g, &p, true).unwrap();
        let traj = solve(&ic, &p, &ts(0.0, 0.1), ModelVariant::Indirect, None).unwrap();
        assert_eq!(traj.snapshots.len(), 1);
        assert_eq!(traj.snapshots[0].time, 0.0);
        assert_eq!(traj.snapshots[0].primary().values(), ic.primary0.values());
    }

    #[test]
    fn chi_zero_indirect_matches_limit() {
        let g = GridSpec::line(64, 1.0).unwrap();
        let p = competition(0.0, 1.0, 0.01);
        let ic = build_initial_data(
            &IcFamily::CosinePerturbedEquilibrium {
                amplitude: 0.1,
                mode: 1,
            },
            &g,
            &p,
            true,
        )
        .unwrap();
        let spec = ts(0.5, 5e-3).with_fixed_dt(5e-3);
        let a = solve(&ic, &p, &spec, ModelVariant::Indirect, None).unwrap();
        let b = solve(&ic, &p, &spec, ModelVariant::Limit, None).unwrap();
        let du = a.final_state().primary().sub(b.final_state().primary());
        let dv = a.final_state().v().sub(b.final_state().v());
        assert!(norm_lp(&du, Lp::Inf) <= 1e-8);
        assert!(norm_lp(&dv, Lp::Inf) <= 1e-8);
    }

    #[test]
    fn implicit_diffusion_conserves_v_mass_identity() {
        let g = GridSpec::line(48, 1.0).unwrap();
        let p = competition(1.0, 1.0, 0.1);
        let ic = build_initial_data(
            &IcFamily::GaussianBump {
                center: [0.3, 0.0],
                width: 0.15,
                amplitude: 0.5,
                floor: 0.1,
            },
            &g,
            &p,
            true,
        )
        .unwrap();
        let spec = ts(0.1, 2e-3).with_fixed_dt(2e-3);
        let traj = solve(&ic, &p, &spec, ModelVariant::Indirect, None).unwrap();
        // re-walk the steps: integrate(v^{n+1}) - integrate(v^n) = dt * integrate(rv^n)
        let mut state = traj.snapshots[0].clone();
        for _ in 0..10 {
            let (_, rv) = p.reaction(state.primary(), state.v());
            let next = step_imex(&state, 2e-3, &p, None).unwrap();
            let lhs = integrate(next.v()) - integrate(state.v());
            let rhs = 2e-3 * integrate(&rv);
            assert!((lhs - rhs).abs() < 1e-12);
            state = next;
        }
    }

    #[test]
    fn nonnegativity_under_cfl() {
        let g = GridSpec::line(64, 1.0).unwrap();
        let p = competition(2.0, 1.0, 0.05);
        let ic = build_initial_data(
            &IcFamily::GaussianBump {
                center: [0.5, 0.0],
                width: 0.08,
                amplitude: 1.0,
                floor: 0.0,
            },
            &g,
            &p,
            true,
        )
        .unwrap();
        let traj = solve(&ic, &p, &ts(0.5, 5e-3), ModelVariant::Indirect, None).unwrap();
        for d in &traj.diagnostics {
            assert!(d.min_primary >= -1e-10, "u min {}", d.min_primary);
            assert!(d.min_v >= -1e-10);
            assert!(d.min_w.unwrap() >= -1e-10);
        }
    }

    #[test]
    fn self_convergence_under_dt_refinement() {
        // Fixed grid, halving dt: terminal error against the finest run
        // shrinks at first order.
        let g = GridSpec::line(64, 1.0).unwrap();
        let p = competition(1.0, 1.0, 0.1);
        let ic = build_initial_data(
            &IcFamily::CosinePerturbedEquilibrium {
                amplitude: 0.1,
                mode: 1,
            },
            &g,
            &p,
            true,
        )
        .unwrap();
        let run = |dt: f64| {
            let spec = ts(0.2, dt).with_fixed_dt(dt);
            solve(&ic, &p, &spec, ModelVariant::Indirect, None).unwrap()
        };
        let fine = run(2.5e-4);
        let e1 = norm_lp(
            &run(4e-3).final_state().primary().sub(fine.final_state().primary()),
            Lp::Two,
        );
        let e2 = norm_lp(
            &run(2e-3).final_state().primary().sub(fine.final_state().primary()),
            Lp::Two,
        );
        let e3 = norm_lp(
            &run(1e-3).final_state().primary().sub(fine.final_state().primary()),
            Lp::Two,
        );
        assert!(e2 < e1 / 1.6 && e3 < e2 / 1.6, "{e1} {e2} {e3}");
    }
}
