//! Manufactured-solution forcing for discretization verification.
//!
//! The exact solution is `phi(x, t) = 2 + cos(pi x / L) exp(-t)` for every
//! unknown (u = v = phi, w = v), on 1D grids. Forcing terms are the exact
//! PDE residuals of phi, so the discrete error against phi isolates the
//! scheme's own (h, dt) error.

use crate::error::{Result, SimError};
use crate::mesh::{Field, GridSpec};
use crate::models::ModelParams;

#[derive(Debug, Clone, PartialEq)]
pub struct ManufacturedSolution {
    wavenumber: f64,
}

impl ManufacturedSolution {
    pub fn new(grid: &GridSpec) -> Result<Self> {
        if grid.dim() != 1 {
            return Err(SimError::Config(
                "manufactured-solution runs support 1D grids only".into(),
            ));
        }
        Ok(ManufacturedSolution {
            wavenumber: std::f64::consts::PI / grid.length(0),
        })
    }

    pub fn exact(&self, x: f64, t: f64) -> f64 {
        2.0 + (self.wavenumber * x).cos() * (-t).exp()
    }

    pub fn exact_field(&self, grid: &GridSpec, t: f64) -> Field {
        Field::from_fn(grid.clone(), |x, _| self.exact(x, t))
    }

    /// Forcing for (primary, v, w) at time `t`. The w entry is the residual
    /// of the divided-by-eps form `w_t = lap w + (v - w)/eps`; with w = v it
    /// is independent of eps. The same (f_u, f_v) serve the limit system
    /// because the taxis there sees the identical gradient.
    pub fn forcing(&self, grid: &GridSpec, t: f64, p: &ModelParams) -> (Field, Field, Field) {
        let k = self.wavenumber;
        let phi = self.exact_field(grid, t);
        let (r_p, r_v) = p.reaction(&phi, &phi);

        let phi_t = Field::from_fn(grid.clone(), |x, _| -(k * x).cos() * (-t).exp());
        let lap = Field::from_fn(grid.clone(), |x, _| -k * k * (k * x).cos() * (-t).exp());
        // div(phi grad phi) = |grad phi|^2 + phi lap phi, all analytic.
        let taxis_exact = Field::from_fn(grid.clone(), |x, _| {
            let e = (-t).exp();
            let grad = -k * (k * x).sin() * e;
            let lapv = -k * k * (k * x).cos() * e;
            grad * grad + (2.0 + (k * x).cos() * e) * lapv
        });

        let f_u = phi_t
            .axpy(-p.d_primary(), &lap)
            .axpy(-p.taxis_sign() * p.chi(), &taxis_exact)
            .axpy(-1.0, &r_p);
        let f_v = phi_t.axpy(-p.d_v(), &lap).axpy(-1.0, &r_v);
        let g_w = phi_t.axpy(-1.0, &lap);
        (f_u, f_v, g_w)
    }
}
