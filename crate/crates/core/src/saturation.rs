//! Phase-transition kernel: the rate `F`, the regularized switch `H_eps`,
//! the condensation source `D_eps` and the variational-inequality residual.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::field::{pairwise_sum_by, ScalarField};
use crate::grid::{Grid, Staggering};
use crate::operators::diagnostics::omega_at_levels;
use crate::params::{xi_zero, PhysicalConstants, SimParams, TemperatureForm};

/// Number of scan points used for the bound and Lipschitz constants.
pub const SCAN_POINTS: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct SaturationKernel {
    pub constants: PhysicalConstants,
    pub epsilon: f64,
    pub use_f_plus: bool,
    /// `L R / (c_p R_v)`.
    pub xi0: f64,
    /// sup |F| over the scan range and the critical points.
    pub c_f_sup: f64,
    /// Lipschitz constant of F (sup |F'|).
    pub c_f_lip: f64,
    /// Scan interval `[-10 xi0, 10 xi0]`.
    pub scan_range: (f64, f64),
}

/// `H_eps(r)`: 0 for `r <= 0`, `r / eps` on `(0, eps]`, 1 beyond.
pub fn heaviside_eps(r: f64, eps: f64) -> f64 {
    if r <= 0.0 {
        0.0
    } else if r <= eps {
        r / eps
    } else {
        1.0
    }
}

/// `K_eps(r)`, the antiderivative of `H_eps` vanishing for `r <= 0`.
pub fn kappa_eps(r: f64, eps: f64) -> f64 {
    if r <= 0.0 {
        0.0
    } else if r <= eps {
        0.5 * r * (r / eps)
    } else {
        r - eps / 2.0
    }
}

impl SaturationKernel {
    pub fn new(constants: PhysicalConstants, epsilon: f64, use_f_plus: bool) -> Result<Self> {
        constants.validate()?;
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(Error::Validation(format!("epsilon in (0,1] violated ({epsilon})")));
        }
        let xi0 = xi_zero(&constants);
        let mut k = Self {
            constants,
            epsilon,
            use_f_plus,
            xi0,
            c_f_sup: 0.0,
            c_f_lip: 0.0,
            scan_range: (-10.0 * xi0, 10.0 * xi0),
        };
        k.c_f_sup = k.scan_sup(|x| k.f_raw(x).abs(), true);
        k.c_f_lip = k.scan_sup(|x| k.f_prime(x).abs(), false);
        Ok(k)
    }

    pub fn from_params(params: &SimParams) -> Result<Self> {
        Self::new(params.constants, params.epsilon, params.use_f_plus)
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(Error::Validation(format!("epsilon in (0,1] violated ({epsilon})")));
        }
        Ok(Self { epsilon, ..self.clone() })
    }

    fn coeffs(&self) -> (f64, f64, f64) {
        let c = &self.constants;
        (c.latent * c.r_dry, c.c_p * c.r_vapor, c.q_sat * c.latent * c.latent)
    }

    /// Critical points of F (roots of F').
    pub fn critical_points(&self) -> [f64; 2] {
        let (a, b, c) = self.coeffs();
        let s = (c * c + a * a * c / b).sqrt();
        [(-c + s) / a, (-c - s) / a]
    }

    fn scan_sup(&self, g: impl Fn(f64) -> f64, include_critical: bool) -> f64 {
        let (lo, hi) = self.scan_range;
        let h = (hi - lo) / (SCAN_POINTS - 1) as f64;
        let mut best = 0.0;
        let mut best_i = 0;
        for i in 0..SCAN_POINTS {
            let v = g(lo + i as f64 * h);
            if v > best {
                best = v;
                best_i = i;
            }
        }
        // Golden-section refinement around the best scan point.
        let (mut a, mut b) = (lo + best_i.saturating_sub(1) as f64 * h, lo + (best_i + 1) as f64 * h);
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..100 {
            let x1 = b - phi * (b - a);
            let x2 = a + phi * (b - a);
            if g(x1) > g(x2) {
                b = x2;
            } else {
                a = x1;
            }
        }
        best = best.max(g(0.5 * (a + b)));
        if include_critical {
            for x in self.critical_points() {
                best = best.max(g(x));
            }
        }
        best
    }

    /// `F(xi) = q_s xi (L R - c_p R_v xi) / (c_p R_v xi^2 + q_s L^2)`, written with
    /// the factor `(xi0 - xi)` so the sign change at `xi0` is exact.
    pub fn f_raw(&self, xi: f64) -> f64 {
        let (_, b, c) = self.coeffs();
        self.constants.q_sat * xi * b * (self.xi0 - xi) / (b * xi * xi + c)
    }

    pub fn f_prime(&self, xi: f64) -> f64 {
        let (a, b, c) = self.coeffs();
        let den = b * xi * xi + c;
        self.constants.q_sat * (-a * b * xi * xi - 2.0 * b * c * xi + a * c) / (den * den)
    }

    /// `F`, or `F+ = max(F, 0)` when the truncation is enabled.
    pub fn f_nonlinear(&self, xi: f64) -> f64 {
        let f = self.f_raw(xi);
        if self.use_f_plus {
            f.max(0.0)
        } else {
            f
        }
    }

    fn sigma(&self, p: f64) -> f64 {
        (p / self.constants.p0).powf(self.constants.kappa_exponent())
    }

    /// `F~(p, theta) = F((p/p0)^(R/c_p) theta)`.
    pub fn f_tilde(&self, p: f64, theta: f64) -> Result<f64> {
        let c = &self.constants;
        let slack = 1e-12 * c.p1;
        if !(p >= c.p0 - slack && p <= c.p1 + slack) {
            return Err(Error::OutOfRange(format!("p = {p} outside [{}, {}]", c.p0, c.p1)));
        }
        Ok(self.f_nonlinear(self.sigma(p) * theta))
    }

    /// Lipschitz constant of `F~` in theta.
    pub fn c_f_tilde(&self) -> f64 {
        self.c_f_lip * (self.constants.p1 / self.constants.p0).powf(self.constants.kappa_exponent())
    }

    /// `D_eps = (1/p) omega^- H_eps(q - q_s) F(T)` at one point.
    pub fn d_eps_point(&self, omega: f64, temp: f64, q: f64, p: f64) -> f64 {
        let om_minus = (-omega).max(0.0);
        if om_minus == 0.0 {
            return 0.0;
        }
        let h = heaviside_eps(q - self.constants.q_sat, self.epsilon);
        if h == 0.0 {
            return 0.0;
        }
        om_minus * h * self.f_nonlinear(temp) / p
    }

    /// Condensation source on cells; `temp` is `T` or `theta` according to `form`.
    pub fn d_eps(
        &self,
        omega: &ScalarField,
        temp: &ScalarField,
        q: &ScalarField,
        grid: &Grid,
        form: TemperatureForm,
    ) -> Result<ScalarField> {
        temp.check(grid)?;
        q.check(grid)?;
        let om = match omega.stag {
            Staggering::HalfLevel => omega_at_levels(omega, grid)?,
            Staggering::Cell => omega.clone(),
            other => return Err(Error::GridMismatch(format!("omega on {other:?}"))),
        };
        let per_level = grid.columns();
        let mut out = ScalarField::zeros(grid, Staggering::Cell);
        for (n, o) in out.data.iter_mut().enumerate() {
            let p = grid.p[n / per_level];
            let t = match form {
                TemperatureForm::Temperature => temp.data[n],
                TemperatureForm::Theta => self.sigma(p) * temp.data[n],
            };
            *o = self.d_eps_point(om.data[n], t, q.data[n], p);
        }
        Ok(out)
    }

    /// Source in the potential-temperature equation: `(L/c_p) (p0/p)^(R/c_p) D`.
    pub fn theta_source(&self, d: &ScalarField, grid: &Grid) -> ScalarField {
        let per_level = grid.columns();
        let lc = self.constants.latent / self.constants.c_p;
        let mut out = d.clone();
        for (n, o) in out.data.iter_mut().enumerate() {
            *o *= lc / self.sigma(grid.p[n / per_level]);
        }
        out
    }

    /// Source in the temperature equation: `(L/c_p) D`.
    pub fn temperature_source(&self, d: &ScalarField) -> ScalarField {
        let lc = self.constants.latent / self.constants.c_p;
        d.map(|x| lc * x)
    }

    /// Source in the humidity equation: `-D`.
    pub fn humidity_source(&self, d: &ScalarField) -> ScalarField {
        d.map(|x| -x)
    }

    /// `h_q := H_eps(q - q_s)`.
    pub fn extract_h_q(&self, q: &ScalarField) -> HeavisideSample {
        let qs = self.constants.q_sat;
        HeavisideSample { h: q.map(|v| heaviside_eps(v - qs, self.epsilon)) }
    }
}

/// A sample of the switch `h_q` with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeavisideSample {
    pub h: ScalarField,
}

/// Perturbation amplitudes of the test family, relative to `q_s`.
pub const VI_AMPLITUDES: [f64; 4] = [1e-3, 1e-2, 1e-1, 1.0];

/// Largest violation, per unit volume, of
/// `([q~ - q_s]+, 1) - ([q - q_s]+, 1) >= (h, q~ - q)`
/// over a seeded family of test fields `q~ = q +- delta * (cell indicator | smooth bump)`,
/// plus `q~ = q` itself.
pub fn vi_residual(
    q: &ScalarField,
    h: &HeavisideSample,
    q_sat: f64,
    trials: usize,
    grid: &Grid,
    seed: u64,
) -> Result<f64> {
    q.check(grid)?;
    q.same_shape(&h.h)?;
    let w = grid.layout(Staggering::Cell).weights();
    let vol = grid.volume();
    let n = q.len();
    let eval = |pert: &[f64]| -> f64 {
        let s = pairwise_sum_by(n, |m| {
            let r = q.data[m] - q_sat;
            let rt = r + pert[m];
            w[m] * (h.h.data[m] * pert[m] - rt.max(0.0) + r.max(0.0))
        });
        s / vol
    };
    let mut pert = vec![0.0; n];
    let mut worst = eval(&pert);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..trials {
        let delta = VI_AMPLITUDES[rng.gen_range(0..VI_AMPLITUDES.len())] * q_sat;
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let (ci, cj, ck) = (rng.gen_range(0..grid.nx), rng.gen_range(0..grid.ny), rng.gen_range(0..grid.np));
        if rng.gen_bool(0.5) {
            pert.iter_mut().for_each(|v| *v = 0.0);
            pert[grid.idx(ci, cj, ck)] = sign * delta;
        } else {
            let width = rng.gen_range(1.0..4.0);
            for k in 0..grid.np {
                for j in 0..grid.ny {
                    for i in 0..grid.nx {
                        let d2 = ((i as f64 - ci as f64).powi(2)
                            + (j as f64 - cj as f64).powi(2)
                            + (k as f64 - ck as f64).powi(2))
                            / (width * width);
                        pert[grid.idx(i, j, k)] = sign * delta * (-d2).exp();
                    }
                }
            }
        }
        worst = worst.max(eval(&pert));
    }
    Ok(worst)
}
