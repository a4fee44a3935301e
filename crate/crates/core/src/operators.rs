//! Spatial discretizations: Neumann Laplacian, upwind taxis flux divergence
//! and the reaction kinetics of both models.

use crate::error::{Result, SimError};
use crate::mesh::Field;

/// Densities below `-POSITIVITY_TOL` are treated as a genuine sign error.
pub const POSITIVITY_TOL: f64 = 1e-12;

/// 3-point (1D) / 5-point (2D) Laplacian with mirrored ghost cells, i.e.
/// homogeneous Neumann to second order. Its discrete integral vanishes.
pub fn laplacian_neumann(f: &Field) -> Field {
    let g = f.grid().clone();
    let (nx, ny) = (g.n(0), g.n(1));
    let vals = f.values();
    let mut out = vec![0.0; vals.len()];

    let inv_hx2 = 1.0 / (g.h(0) * g.h(0));
    for j in 0..ny {
        for i in 0..nx {
            let c = vals[g.index(i, j)];
            let left = if i > 0 { vals[g.index(i - 1, j)] } else { c };
            let right = if i + 1 < nx { vals[g.index(i + 1, j)] } else { c };
            out[g.index(i, j)] += (left - 2.0 * c + right) * inv_hx2;
        }
    }
    if g.dim() == 2 {
        let inv_hy2 = 1.0 / (g.h(1) * g.h(1));
        for j in 0..ny {
            for i in 0..nx {
                let c = vals[g.index(i, j)];
                let down = if j > 0 { vals[g.index(i, j - 1)] } else { c };
                let up = if j + 1 < ny { vals[g.index(i, j + 1)] } else { c };
                out[g.index(i, j)] += (down - 2.0 * c + up) * inv_hy2;
            }
        }
    }
    Field::new(g, out).expect("laplacian of finite field is finite")
}

/// Upwind discretization of `sign * chi * div(u grad w)`.
///
/// Written in conservation form `u_t = -div(u a)` with the advective face
/// velocity `a = -sign * chi * grad w`; the face density is taken from the
/// donor cell (the cell the flux leaves), so cells with `u = 0` never emit
/// mass and nonnegativity is preserved under the CFL step bound. Faces with
/// zero velocity carry zero flux. Boundary faces carry zero flux, so the
/// discrete integral of the result vanishes.
pub fn taxis_divergence(u: &Field, w: &Field, chi: f64, sign: f64) -> Result<Field> {
    if !u.same_grid(w) {
        return Err(SimError::Domain("taxis fields on different grids".into()));
    }
    if u.min() < -POSITIVITY_TOL {
        return Err(SimError::Domain(format!(
            "taxis density has negative entries (min {})",
            u.min()
        )));
    }
    let g = u.grid().clone();
    let (nx, ny) = (g.n(0), g.n(1));
    let (uv, wv) = (u.values(), w.values());
    let mut out = vec![0.0; uv.len()];

    // x-faces
    let hx = g.h(0);
    for j in 0..ny {
        for i in 0..nx - 1 {
            let l = g.index(i, j);
            let r = g.index(i + 1, j);
            let a = -sign * chi * (wv[r] - wv[l]) / hx;
            let flux = if a > 0.0 {
                a * uv[l]
            } else if a < 0.0 {
                a * uv[r]
            } else {
                0.0
            };
            out[l] -= flux / hx;
            out[r] += flux / hx;
        }
    }
    if g.dim() == 2 {
        let hy = g.h(1);
        for j in 0..ny - 1 {
            for i in 0..nx {
                let l = g.index(i, j);
                let r = g.index(i, j + 1);
                let a = -sign * chi * (wv[r] - wv[l]) / hy;
                let flux = if a > 0.0 {
                    a * uv[l]
                } else if a < 0.0 {
                    a * uv[r]
                } else {
                    0.0
                };
                out[l] -= flux / hy;
                out[r] += flux / hy;
            }
        }
    }
    Field::new(g, out)
}

/// Largest advective face speed `|chi * grad w|`; drives the CFL bound.
pub fn max_face_speed(w: &Field, chi: f64) -> f64 {
    let g = w.grid();
    let (nx, ny) = (g.n(0), g.n(1));
    let wv = w.values();
    let mut vmax: f64 = 0.0;
    let hx = g.h(0);
    for j in 0..ny {
        for i in 0..nx - 1 {
            let a = chi * (wv[g.index(i + 1, j)] - wv[g.index(i, j)]) / hx;
            vmax = vmax.max(a.abs());
        }
    }
    if g.dim() == 2 {
        let hy = g.h(1);
        for j in 0..ny - 1 {
            for i in 0..nx {
                let a = chi * (wv[g.index(i, j + 1)] - wv[g.index(i, j)]) / hy;
                vmax = vmax.max(a.abs());
            }
        }
    }
    vmax
}

/// Lotka-Volterra competition kinetics:
/// `(mu1 u (1 - u - a1 v), mu2 v (1 - v - a2 u))`.
pub fn reaction_competition(
    u: &Field,
    v: &Field,
    mu1: f64,
    mu2: f64,
    a1: f64,
    a2: f64,
) -> (Field, Field) {
    let fu = u.zip_map(v, |u, v| mu1 * u * (1.0 - u - a1 * v));
    let fv = v.zip_map(u, |v, u| mu2 * v * (1.0 - v - a2 * u));
    (fu, fv)
}

/// Holling functional-response family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResponseKind {
    Holling1,
    Holling2,
    Holling3,
}

/// Prey-density-dependent consumption rate `F`, with `F(0) = 0`,
/// `F(xi) <= c * xi` and a declared Lipschitz constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FunctionalResponse {
    pub kind: ResponseKind,
    pub c: f64,
    pub m: f64,
}

impl FunctionalResponse {
    pub fn new(kind: ResponseKind, c: f64, m: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(SimError::Config(format!(
                "functional response needs c > 0, got {c}"
            )));
        }
        if !(m >= 0.0 && m.is_finite()) {
            return Err(SimError::Config(format!(
                "functional response needs m >= 0, got {m}"
            )));
        }
        Ok(FunctionalResponse { kind, c, m })
    }

    /// Evaluate F; errors on negative prey density.
    pub fn eval(&self, v: f64) -> Result<f64> {
        if v < 0.0 {
            return Err(SimError::Domain(format!(
                "functional response evaluated at negative density {v}"
            )));
        }
        Ok(self.eval_raw(v))
    }

    /// The bare formula, used inside kernels where round-off may leave
    /// densities a hair below zero.
    pub(crate) fn eval_raw(&self, v: f64) -> f64 {
        match self.kind {
            ResponseKind::Holling1 => self.c * v,
            ResponseKind::Holling2 => self.c * v / (1.0 + self.m * v),
            ResponseKind::Holling3 => self.c * v * v / (1.0 + self.m * v * v),
        }
    }

    /// Linear growth bound constant: F(xi) <= C_F * xi.
    pub fn growth_bound(&self) -> f64 {
        self.c
    }

    /// Declared Lipschitz constant. For Holling-3 with m > 0 the sharp value
    /// is c * (3 sqrt 3 / 8) / sqrt(m); for m = 0 the response is unbounded
    /// in slope only at infinity, so c stands in for the sampled range.
    pub fn lipschitz(&self) -> f64 {
        match self.kind {
            ResponseKind::Holling1 | ResponseKind::Holling2 => self.c,
            ResponseKind::Holling3 => {
                if self.m > 0.0 {
                    self.c * (3.0 * 3.0_f64.sqrt() / 8.0) / self.m.sqrt()
                } else {
                    self.c
                }
            }
        }
    }
}

/// Predator-prey kinetics:
/// `(mu1 z - mu1' z^2 + b F(v) z, mu2 v (1 - v) - F(v) z)`.
pub fn reaction_predprey(
    z: &Field,
    v: &Field,
    mu1: f64,
    mu1_prime: f64,
    mu2: f64,
    b: f64,
    response: &FunctionalResponse,
) -> (Field, Field) {
    let fz = z.zip_map(v, |z, v| {
        mu1 * z - mu1_prime * z * z + b * response.eval_raw(v.max(0.0)) * z
    });
    let fv = v.zip_map(z, |v, z| {
        mu2 * v * (1.0 - v) - response.eval_raw(v.max(0.0)) * z
    });
    (fz, fv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{integrate, GridSpec};

    fn line(n: usize, len: f64) -> GridSpec {
        GridSpec::line(n, len).unwrap()
    }

    #[test]
    fn laplacian_of_constant_is_zero() {
        let f = Field::constant(line(17, 2.0), 3.5);
        let lf = laplacian_neumann(&f);
        assert!(lf.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn laplacian_hand_stencil() {
        // h=1, values [0,1,4], mirrored ghosts -> [1, 2, -3]
        let g = line(3, 3.0);
        let f = Field::new(g, vec![0.0, 1.0, 4.0]).unwrap();
        let lf = laplacian_neumann(&f);
        assert_eq!(lf.values(), &[1.0, 2.0, -3.0]);
    }

    #[test]
    fn laplacian_cosine_eigenfunction() {
        let g = line(256, 1.0);
        let pi = std::f64::consts::PI;
        let f = Field::from_fn(g, |x, _| (pi * x).cos());
        let lf = laplacian_neumann(&f);
        let max_err = lf
            .values()
            .iter()
            .zip(f.values())
            .map(|(&lv, &fv)| (lv + pi * pi * fv).abs())
            .fold(0.0f64, f64::max);
        assert!(max_err <= 1e-3, "max error {max_err}");
    }

    #[test]
    fn laplacian_2d_conserves_and_matches_separable() {
        let g = GridSpec::rect([32, 24], [1.0, 1.5]).unwrap();
        let pi = std::f64::consts::PI;
        let f = Field::from_fn(g, |x, y| (pi * x).cos() * (pi * y / 1.5).cos());
        let lf = laplacian_neumann(&f);
        assert!(integrate(&lf).abs() < 1e-12);
        // eigenvalue -(pi^2 + (pi/1.5)^2) up to O(h^2)
        let lam = -(pi * pi + (pi / 1.5).powi(2));
        let rel = lf
            .values()
            .iter()
            .zip(f.values())
            .filter(|(_, &fv)| fv.abs() > 0.3)
            .map(|(&lv, &fv)| (lv / fv - lam).abs() / lam.abs())
            .fold(0.0f64, f64::max);
        assert!(rel < 0.01, "relative eigenvalue error {rel}");
    }

    #[test]
    fn taxis_zero_without_signal_gradient() {
        let g = line(9, 1.0);
        let u = Field::from_fn(g.clone(), |x, _| 1.0 + x);
        let w = Field::constant(g, 0.7);
        let d = taxis_divergence(&u, &w, 2.0, 1.0).unwrap();
        assert!(d.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn taxis_constant_density_reduces_to_laplacian() {
        let g = line(24, 2.0);
        let u = Field::constant(g.clone(), 1.7);
        let w = Field::from_fn(g, |x, _| (x * 3.0).sin());
        for sign in [1.0, -1.0] {
            let d = taxis_divergence(&u, &w, 0.9, sign).unwrap();
            let expect = laplacian_neumann(&w).scale(sign * 0.9 * 1.7);
            for (a, b) in d.values().iter().zip(expect.values()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn taxis_hand_example_repulsive_bump() {
        // u=[1,2,1], w=[0,1,0], h=1, chi=1, sign=+1. Donor-cell upwinding:
        // the advective velocity -grad w pushes mass away from the center
        // cell, which is the donor at both interior faces, giving [2,-4,2].
        let g = line(3, 3.0);
        let u = Field::new(g.clone(), vec![1.0, 2.0, 1.0]).unwrap();
        let w = Field::new(g, vec![0.0, 1.0, 0.0]).unwrap();
        let d = taxis_divergence(&u, &w, 1.0, 1.0).unwrap();
        assert_eq!(d.values(), &[2.0, -4.0, 2.0]);
        assert!(integrate(&d).abs() < 1e-14);
    }

    #[test]
    fn taxis_rejects_negative_density() {
        let g = line(3, 1.0);
        let u = Field::new(g.clone(), vec![1.0, -1e-6, 1.0]).unwrap();
        let w = Field::new(g, vec![0.0, 1.0, 0.0]).unwrap();
        assert!(taxis_divergence(&u, &w, 1.0, 1.0).is_err());
    }

    #[test]
    fn taxis_no_outflow_from_empty_cells() {
        // Deterministic pseudo-random sampling of (u, w) pairs with u_i = 0
        // somewhere: the divergence at an empty cell is never negative.
        let g = line(16, 1.0);
        let mut s = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..200 {
            let mut uv: Vec<f64> = (0..16).map(|_| next() * 2.0).collect();
            let wv: Vec<f64> = (0..16).map(|_| next() * 4.0 - 2.0).collect();
            let zero_at = (next() * 16.0) as usize % 16;
            uv[zero_at] = 0.0;
            let u = Field::new(g.clone(), uv).unwrap();
            let w = Field::new(g.clone(), wv).unwrap();
            for sign in [1.0, -1.0] {
                let d = taxis_divergence(&u, &w, 1.3, sign).unwrap();
                assert!(
                    d.values()[zero_at] >= 0.0,
                    "outflow from empty cell: {}",
                    d.values()[zero_at]
                );
            }
        }
    }

    #[test]
    fn competition_equilibria_are_kinetic_zeros() {
        let g = line(5, 1.0);
        let (mu1, mu2, a1, a2) = (1.3, 0.8, 0.5, 0.5);
        let coex = (1.0 - a1) / (1.0 - a1 * a2);
        for (ue, ve) in [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (coex, coex)] {
            let u = Field::constant(g.clone(), ue);
            let v = Field::constant(g.clone(), ve);
            let (fu, fv) = reaction_competition(&u, &v, mu1, mu2, a1, a2);
            assert!(fu.values().iter().all(|&x| x.abs() < 1e-14));
            assert!(fv.values().iter().all(|&x| x.abs() < 1e-14));
        }
    }

    #[test]
    fn competition_hand_value() {
        // mu1=2, a1=0.5, u=v=0.5 -> first component 0.25
        let g = line(3, 1.0);
        let u = Field::constant(g.clone(), 0.5);
        let v = Field::constant(g, 0.5);
        let (fu, _) = reaction_competition(&u, &v, 2.0, 1.0, 0.5, 0.5);
        assert!((fu.values()[0] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn predprey_trivial_and_hand_values() {
        let g = line(3, 1.0);
        let resp = FunctionalResponse::new(ResponseKind::Holling1, 1.0, 0.0).unwrap();

        let z0 = Field::constant(g.clone(), 0.0);
        let v0 = Field::constant(g.clone(), 0.0);
        let (fz, fv) = reaction_predprey(&z0, &v0, -1.0, 1.0, 1.0, 2.0, &resp);
        assert!(fz.values().iter().all(|&x| x == 0.0));
        assert!(fv.values().iter().all(|&x| x == 0.0));

        let v1 = Field::constant(g.clone(), 1.0);
        let (fz, fv) = reaction_predprey(&z0, &v1, -1.0, 1.0, 1.0, 2.0, &resp);
        assert!(fz.values().iter().all(|&x| x == 0.0));
        assert!(fv.values().iter().all(|&x| x == 0.0));

        // holling1 c=1, mu1=-1, mu1'=1, b=2, mu2=1, z=1, v=0.5:
        // dz = -1 - 1 + 2*0.5*1 = -1; dv = 0.5*0.5 - 0.5 = -0.25
        let z = Field::constant(g.clone(), 1.0);
        let v = Field::constant(g, 0.5);
        let (fz, fv) = reaction_predprey(&z, &v, -1.0, 1.0, 1.0, 2.0, &resp);
        assert!((fz.values()[0] + 1.0).abs() < 1e-15);
        assert!((fv.values()[0] + 0.25).abs() < 1e-15);
    }

    #[test]
    fn functional_response_values_and_bounds() {
        let h1 = FunctionalResponse::new(ResponseKind::Holling1, 0.5, 0.0).unwrap();
        assert_eq!(h1.eval(0.0).unwrap(), 0.0);
        assert_eq!(h1.eval(2.0).unwrap(), 1.0);

        let h2 = FunctionalResponse::new(ResponseKind::Holling2, 1.0, 1.0).unwrap();
        let f = h2.eval(1.0).unwrap();
        assert!((f - 0.5).abs() < 1e-15);
        assert!(f <= h2.growth_bound() * 1.0);

        assert!(h2.eval(-0.1).is_err());
    }

    #[test]
    fn functional_response_sampled_lipschitz() {
        // Sample [0, 10] with step 1e-3 and check successive slopes against
        // the declared constant; also check the growth bound F(x) <= c x.
        let responses = [
            FunctionalResponse::new(ResponseKind::Holling1, 1.5, 0.0).unwrap(),
            FunctionalResponse::new(ResponseKind::Holling2, 2.0, 0.7).unwrap(),
            FunctionalResponse::new(ResponseKind::Holling3, 1.0, 0.5).unwrap(),
            FunctionalResponse::new(ResponseKind::Holling3, 2.0, 3.0).unwrap(),
        ];
        for r in responses {
            let l = r.lipschitz();
            let step = 1e-3;
            let mut prev = r.eval(0.0).unwrap();
            for k in 1..=10_000 {
                let x = k as f64 * step;
                let f = r.eval(x).unwrap();
                assert!(f >= prev - 1e-12, "F must be nondecreasing");
                assert!(f <= r.growth_bound() * x + 1e-12);
                let slope = (f - prev) / step;
                assert!(
                    slope.abs() <= l + 1e-6,
                    "{:?}: slope {} exceeds declared L {}",
                    r.kind,
                    slope,
                    l
                );
                prev = f;
            }
        }
    }

    #[test]
    fn conservation_on_random_fields() {
        let g = line(32, 1.0);
        let mut s = 42u64;
        let mut next = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..100 {
            let f = Field::new(g.clone(), (0..32).map(|_| next() * 10.0 - 5.0).collect()).unwrap();
            let u = Field::new(g.clone(), (0..32).map(|_| next() * 3.0).collect()).unwrap();
            let fnorm = crate::mesh::norm_lp(&f, crate::mesh::Lp::Two);
            assert!(integrate(&laplacian_neumann(&f)).abs() <= 1e-12 * (1.0 + fnorm));
            let d = taxis_divergence(&u, &f, 1.1, 1.0).unwrap();
            assert!(integrate(&d).abs() <= 1e-12 * (1.0 + fnorm));
        }
    }

    #[test]
    fn laplacian_commutes_with_reflection() {
        let g = line(16, 1.0);
        let f = Field::from_fn(g, |x, _| ((x - 0.5) * 7.0).cos() + (x - 0.5).powi(2));
        let lf = laplacian_neumann(&f);
        let n = lf.values().len();
        for i in 0..n {
            assert!((lf.values()[i] - lf.values()[n - 1 - i]).abs() < 1e-12);
        }
    }
}
