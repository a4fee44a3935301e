//! Model parameter records, the dimensional-to-dimensionless scaling map,
//! initial-condition families and right-hand-side assembly.

use crate::error::{Result, SimError};
use crate::mesh::{Field, GridSpec, State};
use crate::operators::{
    laplacian_neumann, reaction_competition, reaction_predprey, taxis_divergence,
    FunctionalResponse,
};

fn check_pos(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(SimError::Config(format!("{name} must be > 0, got {v}")))
    }
}

fn check_nonneg(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(SimError::Config(format!("{name} must be >= 0, got {v}")))
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps <= 1.0 {
        Ok(())
    } else {
        Err(SimError::Config(format!("eps must be in (0, 1], got {eps}")))
    }
}

/// Dimensionless competition parameters; the taxis is repulsive (sign +1).
#[derive(Debug, Clone, PartialEq)]
pub struct CompetitionParams {
    pub d_u: f64,
    pub d_v: f64,
    pub chi: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub a1: f64,
    pub a2: f64,
    pub eps: f64,
}

impl CompetitionParams {
    /// Growth rates may be zero only to decouple kinetics in verification
    /// runs; chi = 0 likewise decouples the taxis for oracle tests.
    pub fn new(
        d_u: f64,
        d_v: f64,
        chi: f64,
        mu1: f64,
        mu2: f64,
        a1: f64,
        a2: f64,
        eps: f64,
    ) -> Result<Self> {
        check_pos("d_u", d_u)?;
        check_pos("d_v", d_v)?;
        check_nonneg("chi", chi)?;
        check_nonneg("mu1", mu1)?;
        check_nonneg("mu2", mu2)?;
        check_pos("a1", a1)?;
        check_pos("a2", a2)?;
        check_eps(eps)?;
        Ok(CompetitionParams {
            d_u,
            d_v,
            chi,
            mu1,
            mu2,
            a1,
            a2,
            eps,
        })
    }

    /// Coexistence equilibrium (u*, v*), when both components are positive.
    pub fn coexistence(&self) -> Result<(f64, f64)> {
        let det = 1.0 - self.a1 * self.a2;
        if det.abs() < 1e-12 {
            return Err(SimError::Config(
                "no coexistence equilibrium: a1 * a2 = 1".into(),
            ));
        }
        let u = (1.0 - self.a1) / det;
        let v = (1.0 - self.a2) / det;
        if u < 0.0 || v < 0.0 {
            return Err(SimError::Config(format!(
                "coexistence equilibrium not admissible: ({u}, {v})"
            )));
        }
        Ok((u, v))
    }
}

/// Dimensionless predator-prey parameters; the taxis is attractive (sign -1).
#[derive(Debug, Clone, PartialEq)]
pub struct PredPreyParams {
    pub d_z: f64,
    pub d_v: f64,
    pub chi: f64,
    /// Net predator growth rate; any sign is admitted.
    pub mu1: f64,
    /// Intraspecific competition coefficient, strictly positive.
    pub mu1_prime: f64,
    pub mu2: f64,
    pub b: f64,
    pub response: FunctionalResponse,
    pub eps: f64,
}

impl PredPreyParams {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        d_z: f64,
        d_v: f64,
        chi: f64,
        mu1: f64,
        mu1_prime: f64,
        mu2: f64,
        b: f64,
        response: FunctionalResponse,
        eps: f64,
    ) -> Result<Self> {
        check_pos("d_z", d_z)?;
        check_pos("d_v", d_v)?;
        check_nonneg("chi", chi)?;
        if !mu1.is_finite() {
            return Err(SimError::Config(format!("mu1 must be finite, got {mu1}")));
        }
        check_pos("mu1_prime", mu1_prime)?;
        check_pos("mu2", mu2)?;
        check_pos("b", b)?;
        check_eps(eps)?;
        Ok(PredPreyParams {
            d_z,
            d_v,
            chi,
            mu1,
            mu1_prime,
            mu2,
            b,
            response,
            eps,
        })
    }

    /// Coexistence base state (z*, v*) found by bisection of
    /// `mu2 v (1 - v) mu1' = F(v) (mu1 + b F(v))` on (0, 1).
    pub fn coexistence(&self) -> Result<(f64, f64)> {
        let g = |v: f64| -> f64 {
            let f = self.response.eval_raw(v);
            self.mu2 * v * (1.0 - v) * self.mu1_prime - f * (self.mu1 + self.b * f)
        };
        let (mut lo, mut hi) = (1e-6, 1.0 - 1e-9);
        let (glo, ghi) = (g(lo), g(hi));
        if glo.signum() == ghi.signum() {
            return Err(SimError::Config(
                "no coexistence base state found in (0, 1)".into(),
            ));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid).signum() == glo.signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let v = 0.5 * (lo + hi);
        let z = (self.mu1 + self.b * self.response.eval_raw(v)) / self.mu1_prime;
        if z < 0.0 {
            return Err(SimError::Config(format!(
                "coexistence base state has negative predator density {z}"
            )));
        }
        Ok((z, v))
    }
}

/// Tagged union over the two kinetic models.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelParams {
    Competition(CompetitionParams),
    PredPrey(PredPreyParams),
}

impl ModelParams {
    pub fn eps(&self) -> f64 {
        match self {
            ModelParams::Competition(p) => p.eps,
            ModelParams::PredPrey(p) => p.eps,
        }
    }

    pub fn with_eps(&self, eps: f64) -> ModelParams {
        let mut p = self.clone();
        match &mut p {
            ModelParams::Competition(c) => c.eps = eps,
            ModelParams::PredPrey(c) => c.eps = eps,
        }
        p
    }

    /// Diffusivity of the taxing species.
    pub fn d_primary(&self) -> f64 {
        match self {
            ModelParams::Competition(p) => p.d_u,
            ModelParams::PredPrey(p) => p.d_z,
        }
    }

    pub fn d_v(&self) -> f64 {
        match self {
            ModelParams::Competition(p) => p.d_v,
            ModelParams::PredPrey(p) => p.d_v,
        }
    }

    pub fn chi(&self) -> f64 {
        match self {
            ModelParams::Competition(p) => p.chi,
            ModelParams::PredPrey(p) => p.chi,
        }
    }

    /// Taxis orientation: +1 repulsion (competition), -1 attraction
    /// (predator-prey).
    pub fn taxis_sign(&self) -> f64 {
        match self {
            ModelParams::Competition(_) => 1.0,
            ModelParams::PredPrey(_) => -1.0,
        }
    }

    /// Kinetic terms for (primary, v).
    pub fn reaction(&self, primary: &Field, v: &Field) -> (Field, Field) {
        match self {
            ModelParams::Competition(p) => {
                reaction_competition(primary, v, p.mu1, p.mu2, p.a1, p.a2)
            }
            ModelParams::PredPrey(p) => {
                reaction_predprey(primary, v, p.mu1, p.mu1_prime, p.mu2, p.b, &p.response)
            }
        }
    }

    pub fn coexistence(&self) -> Result<(f64, f64)> {
        match self {
            ModelParams::Competition(p) => p.coexistence(),
            ModelParams::PredPrey(p) => p.coexistence(),
        }
    }
}

/// Dimensional parameters of the original competition system.
#[derive(Debug, Clone, PartialEq)]
pub struct DimensionalParams {
    pub d_u: f64,
    pub d_v: f64,
    pub d_w: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
    pub chi0: f64,
    /// Signal decay rate.
    pub alpha: f64,
    /// Signal secretion rate.
    pub lambda: f64,
    pub length: f64,
    pub tau: f64,
    pub w_star: f64,
}

impl DimensionalParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("D_u", self.d_u),
            ("D_v", self.d_v),
            ("D_w", self.d_w),
            ("alpha1", self.alpha1),
            ("alpha2", self.alpha2),
            ("alpha3", self.alpha3),
            ("beta1", self.beta1),
            ("beta2", self.beta2),
            ("beta3", self.beta3),
            ("chi0", self.chi0),
            ("alpha", self.alpha),
            ("lambda", self.lambda),
            ("L", self.length),
            ("tau", self.tau),
            ("W_star", self.w_star),
        ] {
            check_pos(name, v)?;
        }
        Ok(())
    }
}

/// The dimensionless groups that do not enter `CompetitionParams` directly.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedScales {
    pub lambda_tilde: f64,
    pub alpha_tilde: f64,
    pub eps: f64,
}

/// Map dimensional parameters to the dimensionless competition record.
///
/// Uses `d_u = D_u tau / L^2`, `chi = tau chi0 W* / L^2`, `mu1 = alpha1 tau`,
/// `mu2 = beta1 tau`, `a1 = alpha3 beta1 / (beta2 alpha1)`,
/// `a2 = beta3 alpha1 / (alpha2 beta1)` and the relaxation parameter
/// `eps = D_w / (alpha L^2)`, which presumes the signal equation rescaled to
/// unit diffusivity. The single-epsilon form additionally requires the decay
/// and secretion rates to coincide.
pub fn nondimensionalize(d: &DimensionalParams) -> Result<(CompetitionParams, DerivedScales)> {
    d.validate()?;
    if (d.alpha - d.lambda).abs() > 1e-12 * d.alpha.abs().max(d.lambda.abs()) {
        return Err(SimError::Config(format!(
            "eps-form requires alpha = lambda, got alpha={} lambda={}",
            d.alpha, d.lambda
        )));
    }
    let l2 = d.length * d.length;
    let eps = d.d_w / (d.alpha * l2);
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(SimError::Config(format!(
            "derived eps = {eps} is outside (0, 1]"
        )));
    }
    let params = CompetitionParams::new(
        d.d_u * d.tau / l2,
        d.d_v * d.tau / l2,
        d.tau * d.chi0 * d.w_star / l2,
        d.alpha1 * d.tau,
        d.beta1 * d.tau,
        d.alpha3 * d.beta1 / (d.beta2 * d.alpha1),
        d.beta3 * d.alpha1 / (d.alpha2 * d.beta1),
        eps,
    )?;
    let scales = DerivedScales {
        lambda_tilde: d.lambda * d.tau,
        alpha_tilde: d.alpha * d.tau,
        eps,
    };
    Ok((params, scales))
}

/// Initial-condition family.
#[derive(Debug, Clone, PartialEq)]
pub enum IcFamily {
    Constant {
        value: f64,
    },
    GaussianBump {
        center: [f64; 2],
        width: f64,
        amplitude: f64,
        floor: f64,
    },
    /// Coexistence equilibrium of the configured kinetics perturbed by
    /// `amplitude * cos(mode pi x / Lx)` (times the y-factor in 2D),
    /// clamped to be nonnegative.
    CosinePerturbedEquilibrium {
        amplitude: f64,
        mode: u32,
    },
}

/// Initial data for a run; `primary0` holds u0 or z0.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialData {
    pub primary0: Field,
    pub v0: Field,
    pub w0: Field,
    pub compatibility: bool,
}

/// Build nonnegative initial fields from a family spec.
///
/// With `compatibility` set, `w0 = v0` exactly, which is the regime the
/// linear-in-eps error estimates require. Without it `w0` starts at zero so
/// incompatible data can be explored (no rate guarantee then).
pub fn build_initial_data(
    family: &IcFamily,
    grid: &GridSpec,
    params: &ModelParams,
    compatibility: bool,
) -> Result<InitialData> {
    let (primary0, v0) = match family {
        IcFamily::Constant { value } => {
            if *value < 0.0 {
                return Err(SimError::Config(format!(
                    "constant initial value must be >= 0, got {value}"
                )));
            }
            (
                Field::constant(grid.clone(), *value),
                Field::constant(grid.clone(), *value),
            )
        }
        IcFamily::GaussianBump {
            center,
            width,
            amplitude,
            floor,
        } => {
            check_pos("gaussian width", *width)?;
            if *floor < 0.0 || floor + amplitude < 0.0 {
                return Err(SimError::Config(
                    "gaussian bump amplitude/floor combination goes negative".into(),
                ));
            }
            let (cx, cy, w, a, fl) = (center[0], center[1], *width, *amplitude, *floor);
            let dim = grid.dim();
            let profile = Field::from_fn(grid.clone(), move |x, y| {
                let r2 = (x - cx).powi(2) + if dim == 2 { (y - cy).powi(2) } else { 0.0 };
                fl + a * (-r2 / (w * w)).exp()
            });
            if profile.min() < 0.0 {
                return Err(SimError::Config(
                    "gaussian bump initial data has negative values".into(),
                ));
            }
            (profile.clone(), profile)
        }
        IcFamily::CosinePerturbedEquilibrium { amplitude, mode } => {
            let (pe, ve) = params.coexistence()?;
            let amp = *amplitude;
            let k = *mode as f64;
            let lx = grid.length(0);
            let dim = grid.dim();
            let ly = grid.length(1);
            let pi = std::f64::consts::PI;
            let wave = move |x: f64, y: f64| {
                let mut c = (k * pi * x / lx).cos();
                if dim == 2 {
                    c *= (k * pi * y / ly).cos();
                }
                c
            };
            let p0 = Field::from_fn(grid.clone(), |x, y| (pe + amp * wave(x, y)).max(0.0));
            let v0 = Field::from_fn(grid.clone(), |x, y| (ve + amp * wave(x, y)).max(0.0));
            (p0, v0)
        }
    };
    let w0 = if compatibility {
        v0.clone()
    } else {
        Field::constant(grid.clone(), 0.0)
    };
    Ok(InitialData {
        primary0,
        v0,
        w0,
        compatibility,
    })
}

/// Time derivatives of the three-equation relaxation system. The w component
/// is returned in the divided-by-eps form `lap w + (v - w)/eps` used by the
/// integrator.
pub fn rhs_indirect(state: &State, p: &ModelParams) -> Result<(Field, Field, Field)> {
    let w = state
        .w()
        .ok_or_else(|| SimError::Domain("rhs_indirect needs a triple state".into()))?;
    let (u, v) = (state.primary(), state.v());
    let (ru, rv) = p.reaction(u, v);
    let taxis = taxis_divergence(u, w, p.chi(), p.taxis_sign())?;
    let du = laplacian_neumann(u)
        .scale(p.d_primary())
        .axpy(1.0, &taxis)
        .axpy(1.0, &ru);
    let dv = laplacian_neumann(v).scale(p.d_v()).axpy(1.0, &rv);
    let relax = v.sub(w).scale(1.0 / p.eps());
    let dw = laplacian_neumann(w).axpy(1.0, &relax);
    Ok((du, dv, dw))
}

/// Time derivatives of the two-equation limit system (taxis driven by v).
pub fn rhs_limit(state: &State, p: &ModelParams) -> Result<(Field, Field)> {
    if state.is_triple() {
        return Err(SimError::Domain("rhs_limit needs a dual state".into()));
    }
    let (u, v) = (state.primary(), state.v());
    let (ru, rv) = p.reaction(u, v);
    let taxis = taxis_divergence(u, v, p.chi(), p.taxis_sign())?;
    let du = laplacian_neumann(u)
        .scale(p.d_primary())
        .axpy(1.0, &taxis)
        .axpy(1.0, &ru);
    let dv = laplacian_neumann(v).scale(p.d_v()).axpy(1.0, &rv);
    Ok((du, dv))
}
