//! Summation-by-parts diffusion.
//!
//! Every diffusion operator is defined through its stiffness form
//!
//! ```text
//! a(phi, psi) = mu (grad phi, grad psi) + nu sum w(p) d_p phi d_p psi + alpha w(p1) (phi, psi)_bottom
//! ```
//!
//! with `w(p) = (g p / (R Tbar(p)))^2`, assembled over consecutive storage pairs.
//! The operator is `A = Mass^-1 K`, so `(A phi, psi) = a(phi, psi)` holds by
//! construction and Neumann conditions at the top and on the lateral boundary
//! are natural.

use crate::error::{Error, Result};
use crate::field::{pairwise_sum_by, Field, ScalarField};
use crate::grid::{Grid, Layout, Staggering};
use crate::params::{Coefficients, MeanTemperatureProfile, PhysicalConstants, SimParams, Tracer};

/// `(g p / (R Tbar(p)))^2`.
pub fn vertical_weight(p: f64, c: &PhysicalConstants, tbar: &MeanTemperatureProfile) -> f64 {
    let s = c.gravity * p / (c.r_dry * tbar.eval(p, c));
    s * s
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionOperator {
    pub tracer: Tracer,
    pub coeffs: Coefficients,
    /// Conjugated by `sigma = (p/p0)^(R/c_p)` (potential temperature).
    pub theta: bool,
    /// Vertical weight at the midpoints between full levels.
    pub mid_weight: Vec<f64>,
    /// Vertical weight at `p1`.
    pub bottom_weight: f64,
    /// `(p/p0)^(R/c_p)` at full levels.
    pub sigma: Vec<f64>,
    dx: f64,
    dy: f64,
    dp: f64,
}

impl DiffusionOperator {
    pub fn new(
        grid: &Grid,
        constants: &PhysicalConstants,
        tbar: &MeanTemperatureProfile,
        tracer: Tracer,
        coeffs: Coefficients,
        theta: bool,
    ) -> Self {
        let mid_weight = (0..grid.np - 1)
            .map(|k| vertical_weight(grid.p_half[k + 1], constants, tbar))
            .collect();
        let kappa = constants.kappa_exponent();
        Self {
            tracer,
            coeffs,
            theta,
            mid_weight,
            bottom_weight: vertical_weight(grid.p1, constants, tbar),
            sigma: grid.p.iter().map(|p| (p / constants.p0).powf(kappa)).collect(),
            dx: grid.dx,
            dy: grid.dy,
            dp: grid.dp,
        }
    }

    /// The operator of `tracer` as configured in `params`.
    pub fn for_tracer(grid: &Grid, params: &SimParams, tracer: Tracer, theta: bool) -> Self {
        Self::new(grid, &params.constants, &params.tbar, tracer, *params.coeffs.get(tracer), theta)
    }

    /// All coefficients equal to one: the form whose square root is the V-norm.
    pub fn unit(grid: &Grid, constants: &PhysicalConstants, tbar: &MeanTemperatureProfile) -> Self {
        let one = Coefficients { mu: 1.0, nu: 1.0, alpha: 1.0 };
        Self::new(grid, constants, tbar, Tracer::Temperature, one, false)
    }

    fn check(&self, grid: &Grid, f: &ScalarField) -> Result<()> {
        f.check(grid)?;
        match f.stag {
            Staggering::Cell | Staggering::XFace | Staggering::YFace => Ok(()),
            other => Err(Error::GridMismatch(format!("diffusion is not defined on {other:?} fields"))),
        }
    }

    /// `out = K f` (unweighted stiffness action).
    pub fn stiffness_into(&self, layout: &Layout, f: &[f64], out: &mut [f64]) {
        let [n0, n1, n2] = layout.n;
        let Coefficients { mu, nu, alpha } = self.coeffs;
        out.iter_mut().for_each(|o| *o = 0.0);
        let at = |i: usize, j: usize, k: usize| (k * n1 + j) * n0 + i;
        for k in 0..n2 {
            let wz = layout.wz[k];
            for j in 0..n1 {
                let cx = mu * layout.wy[j] * wz / self.dx;
                for i in 0..n0.saturating_sub(1) {
                    let a = at(i, j, k);
                    let flux = cx * (f[a + 1] - f[a]);
                    out[a] -= flux;
                    out[a + 1] += flux;
                }
            }
            for j in 0..n1.saturating_sub(1) {
                for i in 0..n0 {
                    let cy = mu * layout.wx[i] * wz / self.dy;
                    let a = at(i, j, k);
                    let b = at(i, j + 1, k);
                    let flux = cy * (f[b] - f[a]);
                    out[a] -= flux;
                    out[b] += flux;
                }
            }
        }
        for k in 0..n2.saturating_sub(1) {
            let cz = nu * self.mid_weight[k] / self.dp;
            for j in 0..n1 {
                for i in 0..n0 {
                    let c = cz * layout.wx[i] * layout.wy[j];
                    let a = at(i, j, k);
                    let b = at(i, j, k + 1);
                    let flux = c * (f[b] - f[a]);
                    out[a] -= flux;
                    out[b] += flux;
                }
            }
        }
        let kb = n2 - 1;
        let cb = alpha * self.bottom_weight;
        for j in 0..n1 {
            for i in 0..n0 {
                let a = at(i, j, kb);
                out[a] += cb * layout.wx[i] * layout.wy[j] * f[a];
            }
        }
    }

    pub fn stiffness(&self, grid: &Grid, f: &ScalarField) -> Result<Vec<f64>> {
        self.check(grid, f)?;
        let layout = grid.layout(f.stag);
        let mut out = vec![0.0; f.len()];
        self.stiffness_into(&layout, &f.data, &mut out);
        Ok(out)
    }

    /// Symmetric part `A = Mass^-1 K` applied to one component.
    pub fn apply_scalar(&self, grid: &Grid, f: &ScalarField) -> Result<ScalarField> {
        let k = self.stiffness(grid, f)?;
        let w = grid.layout(f.stag).weights();
        Ok(ScalarField {
            stag: f.stag,
            shape: f.shape,
            data: k.iter().zip(&w).map(|(a, b)| a / b).collect(),
        })
    }

    fn sym_form(&self, grid: &Grid, f: &ScalarField, g: &ScalarField) -> Result<f64> {
        f.same_shape(g)?;
        let k = self.stiffness(grid, f)?;
        Ok(pairwise_sum_by(k.len(), |m| k[m] * g.data[m]))
    }

    /// Symmetric form `a(phi, psi)` (the `a_T` part for potential temperature).
    pub fn form<F: Field>(&self, grid: &Grid, f: &F, g: &F) -> Result<f64> {
        let mut s = 0.0;
        for (a, b) in f.parts().into_iter().zip(g.parts()) {
            s += self.sym_form(grid, a, b)?;
        }
        Ok(s)
    }

    /// Symmetric operator on scalars or on both velocity components.
    pub fn apply<F: Field>(&self, grid: &Grid, f: &F) -> Result<F> {
        let mut out = f.clone();
        for (o, a) in out.parts_mut().into_iter().zip(f.parts()) {
            *o = self.apply_scalar(grid, a)?;
        }
        Ok(out)
    }

    fn scale_levels(&self, f: &ScalarField, inverse: bool) -> ScalarField {
        let per_level = f.shape[0] * f.shape[1];
        let mut out = f.clone();
        for (n, v) in out.data.iter_mut().enumerate() {
            let s = self.sigma[n / per_level];
            *v = if inverse { *v / s } else { *v * s };
        }
        out
    }

    /// Full potential-temperature operator `sigma^-1 A (sigma theta)`.
    pub fn apply_conjugated(&self, grid: &Grid, theta: &ScalarField) -> Result<ScalarField> {
        let t = self.scale_levels(theta, false);
        let at = self.apply_scalar(grid, &t)?;
        Ok(self.scale_levels(&at, true))
    }

    /// Non-symmetric remainder `M_theta = sigma^-1 A sigma - A`, assembled
    /// directly from the vertical pairs so no large terms cancel.
    pub fn apply_m_theta(&self, grid: &Grid, theta: &ScalarField) -> Result<ScalarField> {
        self.check(grid, theta)?;
        let layout = grid.layout(theta.stag);
        let [n0, n1, n2] = layout.n;
        let per_level = n0 * n1;
        let mut out = vec![0.0; theta.len()];
        for k in 0..n2 - 1 {
            let r = self.sigma[k + 1] / self.sigma[k];
            let cz = self.coeffs.nu * self.mid_weight[k] / self.dp;
            for j in 0..n1 {
                for i in 0..n0 {
                    let c = cz * layout.wx[i] * layout.wy[j];
                    let a = (k * n1 + j) * n0 + i;
                    let b = a + per_level;
                    out[a] += c * (1.0 - r) * theta.data[b];
                    out[b] += c * (1.0 - 1.0 / r) * theta.data[a];
                }
            }
        }
        let w = layout.weights();
        for (o, wv) in out.iter_mut().zip(&w) {
            *o /= wv;
        }
        Ok(ScalarField { stag: theta.stag, shape: theta.shape, data: out })
    }

    /// `m_theta(theta, psi) = a(sigma theta, psi / sigma) - a(theta, psi)`, assembled
    /// pair by pair so that no cancellation of large terms occurs.
    pub fn form_m_theta(&self, grid: &Grid, theta: &ScalarField, psi: &ScalarField) -> Result<f64> {
        self.check(grid, theta)?;
        theta.same_shape(psi)?;
        let layout = grid.layout(theta.stag);
        let [n0, n1, n2] = layout.n;
        let per_level = n0 * n1;
        let nu = self.coeffs.nu;
        let terms = per_level * (n2 - 1);
        Ok(pairwise_sum_by(terms, |m| {
            let k = m / per_level;
            let col = m % per_level;
            let (i, j) = (col % n0, col / n0);
            let a = m;
            let b = m + per_level;
            let r = self.sigma[k + 1] / self.sigma[k];
            let (t0, t1) = (theta.data[a], theta.data[b]);
            let (s0, s1) = (psi.data[a], psi.data[b]);
            // (r t1 - t0)(s1 / r - s0) - (t1 - t0)(s1 - s0)
            let pair = t1 * s0 * (1.0 - r) + t0 * s1 * (1.0 - 1.0 / r);
            nu * self.mid_weight[k] / self.dp * layout.wx[i] * layout.wy[j] * pair
        }))
    }

    /// Smallest `C` with `m_theta(theta, theta) >= -C |theta|^2` on this grid.
    pub fn m_theta_bound(&self, grid: &Grid) -> f64 {
        let np = grid.np;
        let c: Vec<f64> = (0..np - 1)
            .map(|k| {
                let r = self.sigma[k + 1] / self.sigma[k];
                self.mid_weight[k] * (r - 1.0).powi(2) / (r * self.dp)
            })
            .collect();
        (0..np)
            .map(|k| {
                let below = if k > 0 { c[k - 1] } else { 0.0 };
                let above = if k + 1 < np { c[k] } else { 0.0 };
                self.coeffs.nu * (below + above) / (2.0 * grid.wp[k])
            })
            .fold(0.0, f64::max)
    }

    /// Applies `Mass + tau K` to the degrees of freedom selected by `mask`
    /// and the identity elsewhere.
    pub fn shifted_into(
        &self,
        layout: &Layout,
        weights: &[f64],
        mask: &[bool],
        tau: f64,
        x: &[f64],
        scratch: &mut Vec<f64>,
        out: &mut [f64],
    ) {
        scratch.clear();
        scratch.extend(x.iter().zip(mask).map(|(&v, &m)| if m { v } else { 0.0 }));
        self.stiffness_into(layout, scratch, out);
        for n in 0..out.len() {
            out[n] = if mask[n] { weights[n] * x[n] + tau * out[n] } else { x[n] };
        }
    }
}

/// Unknowns of a staggering: everything except the lateral normal-velocity faces.
pub fn dof_mask(grid: &Grid, stag: Staggering) -> Vec<bool> {
    let [n0, n1, n2] = grid.shape(stag);
    let mut mask = vec![true; n0 * n1 * n2];
    for k in 0..n2 {
        for j in 0..n1 {
            for i in 0..n0 {
                let edge = match stag {
                    Staggering::XFace => i == 0 || i == n0 - 1,
                    Staggering::YFace => j == 0 || j == n1 - 1,
                    _ => false,
                };
                if edge {
                    mask[(k * n1 + j) * n0 + i] = false;
                }
            }
        }
    }
    mask
}

/// Discrete V-norm: the diffusion form with unit coefficients.
pub fn v_norm<F: Field>(
    f: &F,
    grid: &Grid,
    constants: &PhysicalConstants,
    tbar: &MeanTemperatureProfile,
) -> Result<f64> {
    let op = DiffusionOperator::unit(grid, constants, tbar);
    Ok(op.form(grid, f, f)?.max(0.0).sqrt())
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{inner, l2_norm, VectorField2};
    use nalgebra::{DMatrix, SymmetricEigen};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_constants() -> PhysicalConstants {
        PhysicalConstants { r_dry: 1.0, c_p: 2.0, gravity: 1.0, p0: 0.2, p1: 1.0, ..Default::default() }
    }

    fn small() -> (Grid, PhysicalConstants, MeanTemperatureProfile) {
        let c = unit_constants();
        (
            Grid::new(4, 4, 4, 1.0, 1.0, c.p0, c.p1).unwrap(),
            c,
            MeanTemperatureProfile::Constant(1.0),
        )
    }

    fn op(g: &Grid, c: &PhysicalConstants, t: &MeanTemperatureProfile, k: Coefficients) -> DiffusionOperator {
        DiffusionOperator::new(g, c, t, Tracer::Humidity, k, false)
    }

    fn random(g: &Grid, stag: Staggering, rng: &mut ChaCha8Rng) -> ScalarField {
        ScalarField::from_fn(g, stag, |_, _, _| rng.gen_range(-1.0..1.0))
    }

    /// Independent evaluation of the form from its definition.
    fn direct_form(g: &Grid, c: &PhysicalConstants, k: Coefficients, f: &ScalarField, h: &ScalarField) -> f64 {
        let w = |p: f64| (c.gravity * p / c.r_dry).powi(2);
        let mut s = 0.0;
        for kk in 0..g.np {
            for j in 0..g.ny {
                for i in 0..g.nx {
                    if i + 1 < g.nx {
                        let a = (f.get(i + 1, j, kk) - f.get(i, j, kk)) / g.dx;
                        let b = (h.get(i + 1, j, kk) - h.get(i, j, kk)) / g.dx;
                        s += k.mu * a * b * g.dx * g.dy * g.wp[kk];
                    }
                    if j + 1 < g.ny {
                        let a = (f.get(i, j + 1, kk) - f.get(i, j, kk)) / g.dy;
                        let b = (h.get(i, j + 1, kk) - h.get(i, j, kk)) / g.dy;
                        s += k.mu * a * b * g.dx * g.dy * g.wp[kk];
                    }
                    if kk + 1 < g.np {
                        let a = (f.get(i, j, kk + 1) - f.get(i, j, kk)) / g.dp;
                        let b = (h.get(i, j, kk + 1) - h.get(i, j, kk)) / g.dp;
                        let pm = 0.5 * (g.p[kk] + g.p[kk + 1]);
                        s += k.nu * w(pm) * a * b * g.dx * g.dy * g.dp;
                    }
                }
            }
        }
        for j in 0..g.ny {
            for i in 0..g.nx {
                s += k.alpha * w(g.p1) * f.get(i, j, g.np - 1) * h.get(i, j, g.np - 1) * g.dx * g.dy;
            }
        }
        s
    }

    #[test]
    fn neumann_null_mode() {
        let (g, c, t) = small();
        let d = op(&g, &c, &t, Coefficients { mu: 2.0, nu: 3.0, alpha: 0.0 });
        let one = ScalarField::constant(&g, Staggering::Cell, 1.0);
        let a = d.apply_scalar(&g, &one).unwrap();
        assert!(a.data.iter().all(|v| v.abs() < 1e-13));
    }

    #[test]
    fn constant_field_sees_only_the_robin_term() {
        let (g, c, t) = small();
        let k = Coefficients { mu: 2.0, nu: 3.0, alpha: 0.7 };
        let d = op(&g, &c, &t, k);
        let one = ScalarField::constant(&g, Staggering::Cell, 1.0);
        let expected = k.alpha * (c.gravity * c.p1 / c.r_dry).powi(2) * g.area();
        assert!((d.form(&g, &one, &one).unwrap() - expected).abs() < 1e-14);
        let cst = 2.5;
        let f = ScalarField::constant(&g, Staggering::Cell, cst);
        let vn = v_norm(&f, &g, &c, &t).unwrap();
        assert!((vn - cst * c.gravity * c.p1 / c.r_dry * g.area().sqrt()).abs() < 1e-13);
        assert_eq!(v_norm(&ScalarField::zeros(&g, Staggering::Cell), &g, &c, &t).unwrap(), 0.0);
    }

    #[test]
    fn form_matches_direct_evaluation_and_operator() {
        let (g, c, t) = small();
        let k = Coefficients { mu: 0.3, nu: 1.7, alpha: 0.9 };
        let d = op(&g, &c, &t, k);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let f = random(&g, Staggering::Cell, &mut rng);
            let h = random(&g, Staggering::Cell, &mut rng);
            let form = d.form(&g, &f, &h).unwrap();
            let direct = direct_form(&g, &c, k, &f, &h);
            let via_op = inner(&d.apply_scalar(&g, &f).unwrap(), &h, &g).unwrap();
            assert!((form - direct).abs() <= 1e-12 * direct.abs().max(1.0));
            assert!((form - via_op).abs() <= 1e-12 * form.abs().max(1.0));
            let sym = (form - d.form(&g, &h, &f).unwrap()).abs();
            assert!(sym <= 1e-13 * l2_norm(&f, &g).unwrap() * l2_norm(&h, &g).unwrap() * 100.0);
        }
    }

    #[test]
    fn coercive_against_kappa_and_poincare() {
        let (g, c, t) = small();
        let k = Coefficients { mu: 0.3, nu: 1.7, alpha: 0.9 };
        let d = op(&g, &c, &t, k);
        let unit = DiffusionOperator::unit(&g, &c, &t);
        let stiff = crate::operators::dense_stiffness(&unit, &g, Staggering::Cell);
        let mass: Vec<f64> = g.layout(Staggering::Cell).weights();
        let n = mass.len();
        let scaled = DMatrix::from_fn(n, n, |r, s| stiff[(r, s)] / (mass[r] * mass[s]).sqrt());
        let lambda_min = SymmetricEigen::new(scaled).eigenvalues.min();
        assert!(lambda_min > 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let f = random(&g, Staggering::Cell, &mut rng);
            let a = d.form(&g, &f, &f).unwrap();
            let vn = v_norm(&f, &g, &c, &t).unwrap();
            assert!(a >= k.kappa() * vn * vn * (1.0 - 1e-12));
            let l2 = l2_norm(&f, &g).unwrap();
            assert!(vn >= lambda_min.sqrt() * l2 * (1.0 - 1e-10));
        }
    }

    #[test]
    fn velocity_form_uses_both_components() {
        let (g, c, t) = small();
        let k = Coefficients { mu: 1.0, nu: 1.0, alpha: 1.0 };
        let d = op(&g, &c, &t, k);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let v = VectorField2 {
            u: random(&g, Staggering::XFace, &mut rng),
            v: random(&g, Staggering::YFace, &mut rng),
        };
        let w = VectorField2 {
            u: random(&g, Staggering::XFace, &mut rng),
            v: random(&g, Staggering::YFace, &mut rng),
        };
        let via_op = inner(&d.apply(&g, &v).unwrap(), &w, &g).unwrap();
        assert!((via_op - d.form(&g, &v, &w).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn m_theta_bound_and_operator_agree() {
        let (g, c, t) = small();
        let k = Coefficients { mu: 1.0, nu: 2.0, alpha: 1.0 };
        let d = DiffusionOperator::new(&g, &c, &t, Tracer::Temperature, k, true);
        let cm = d.m_theta_bound(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let th = random(&g, Staggering::Cell, &mut rng);
            let ps = random(&g, Staggering::Cell, &mut rng);
            let m = d.form_m_theta(&g, &th, &th).unwrap();
            let l2 = l2_norm(&th, &g).unwrap();
            assert!(m >= -cm * l2 * l2 * (1.0 + 1e-12));
            let via_op = inner(&d.apply_m_theta(&g, &th).unwrap(), &ps, &g).unwrap();
            assert!((via_op - d.form_m_theta(&g, &th, &ps).unwrap()).abs() < 1e-12);
            let full = d.apply_conjugated(&g, &th).unwrap();
            let split = d.apply_scalar(&g, &th).unwrap().zip_map(&d.apply_m_theta(&g, &th).unwrap(), |a, b| a + b);
            for (a, b) in full.data.iter().zip(&split.data) {
                assert!((a - b).abs() < 1e-10 * a.abs().max(1.0));
            }
        }
    }

    #[test]
    fn m_theta_converges_to_continuous_form() {
        let c = unit_constants();
        let t = MeanTemperatureProfile::Constant(1.0);
        let kap = c.kappa_exponent();
        let nu = 1.5;
        let th = |p: f64| 1.0 + p * p;
        let dth = |p: f64| 2.0 * p;
        let ps = |p: f64| p.cos();
        let dps = |p: f64| -p.sin();
        // w = p^2 here, so w (sigma'/sigma) = kap p and w (sigma'/sigma)^2 = kap^2.
        let integrand = |p: f64| kap * p * (th(p) * dps(p) - dth(p) * ps(p)) - kap * kap * th(p) * ps(p);
        let n = 20_000;
        let h = (c.p1 - c.p0) / n as f64;
        let simpson: f64 = (0..=n)
            .map(|i| {
                let wgt = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                wgt * integrand(c.p0 + i as f64 * h)
            })
            .sum::<f64>()
            * h
            / 3.0;
        let exact = nu * simpson;
        let mut errs = Vec::new();
        for np in [9, 17, 33] {
            let g = Grid::new(2, 2, np, 1.0, 1.0, c.p0, c.p1).unwrap();
            let d = DiffusionOperator::new(&g, &c, &t, Tracer::Temperature, Coefficients { mu: 1.0, nu, alpha: 1.0 }, true);
            let a = ScalarField::from_fn(&g, Staggering::Cell, |_, _, p| th(p));
            let b = ScalarField::from_fn(&g, Staggering::Cell, |_, _, p| ps(p));
            errs.push((d.form_m_theta(&g, &a, &b).unwrap() - exact).abs());
        }
        assert!(errs[2] < 1e-3 * exact.abs(), "{errs:?}");
        for w in errs.windows(2) {
            assert!((w[0] / w[1]).log2() > 1.5, "{errs:?}");
        }
    }
}
