//! Manufactured-solution convergence studies on three resolutions.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::{l2_norm, ScalarField, State, VectorField2};
use crate::grid::Staggering;
use crate::operators::advection::{skew_scalar, Fluxes};
use crate::operators::diagnostics::{hydrostatic_phi, omega_from_v};
use crate::params::{Forcing, MeanTemperatureProfile, SimParams, TemperatureForm};
use crate::stepper::{implicit_solve, run, Model};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Study {
    Diffusion,
    Hydrostatic,
    Advection,
    Full,
}

impl Study {
    pub const ALL: [Study; 4] = [Study::Diffusion, Study::Hydrostatic, Study::Advection, Study::Full];

    pub fn name(self) -> &'static str {
        match self {
            Study::Diffusion => "diffusion",
            Study::Hydrostatic => "hydrostatic",
            Study::Advection => "advection",
            Study::Full => "full",
        }
    }
}

impl fmt::Display for Study {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Study {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Study::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::Validation(format!("unknown study `{s}` (diffusion, hydrostatic, advection, full)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MmsRow {
    pub nx: usize,
    pub np: usize,
    /// Horizontal spacing relative to the coarsest grid.
    pub h: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MmsTable {
    pub study: Study,
    pub rows: Vec<MmsRow>,
}

impl MmsTable {
    /// `log2(e_i / e_{i+1})` for consecutive refinements.
    pub fn orders(&self) -> Vec<f64> {
        self.rows.windows(2).map(|w| (w[0].error / w[1].error).log2()).collect()
    }

    /// Order on the finest pair.
    pub fn observed_order(&self) -> f64 {
        self.orders().last().copied().unwrap_or(f64::NAN)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("study,nx,np,h,error,observed_order\n");
        let orders = self.orders();
        for (i, r) in self.rows.iter().enumerate() {
            let o = if i == 0 { String::new() } else { format!("{:.4}", orders[i - 1]) };
            s.push_str(&format!("{},{},{},{},{:.6e},{o}\n", self.study, r.nx, r.np, r.h, r.error));
        }
        s
    }
}

/// Horizontal sizes and vertical level counts of the three resolutions.
pub const RESOLUTIONS: [(usize, usize); 3] = [(8, 5), (16, 9), (32, 17)];

fn params(base: &SimParams, nx: usize, np: usize) -> SimParams {
    let mut p = base.clone();
    p.nx = nx;
    p.ny = nx;
    p.np = np;
    p.forcing = Default::default();
    p
}

/// `cos(pi s)` profile on `[p0, p1]` and its first two `p` derivatives.
fn vertical_mode(p: f64, p0: f64, p1: f64) -> (f64, f64, f64) {
    let k = PI / (p1 - p0);
    let s = k * (p - p0);
    (s.cos(), -k * s.sin(), -k * k * s.cos())
}

/// Continuous `A phi` for `phi = cos(pi x/Lx) cos(pi y/Ly) g(p)`, constant mean temperature.
struct DiffusionMms {
    lx: f64,
    ly: f64,
    p0: f64,
    p1: f64,
    mu: f64,
    nu: f64,
    /// `w(p) = a p^2`.
    a: f64,
}

impl DiffusionMms {
    fn new(p: &SimParams, tbar: f64, mu: f64, nu: f64) -> Self {
        let c = &p.constants;
        let s = c.gravity / (c.r_dry * tbar);
        Self { lx: p.lx, ly: p.ly, p0: c.p0, p1: c.p1, mu, nu, a: s * s }
    }

    fn horizontal(&self, x: f64, y: f64) -> f64 {
        (PI * x / self.lx).cos() * (PI * y / self.ly).cos()
    }

    fn phi(&self, x: f64, y: f64, p: f64) -> f64 {
        self.horizontal(x, y) * vertical_mode(p, self.p0, self.p1).0
    }

    fn a_phi(&self, x: f64, y: f64, p: f64) -> f64 {
        let (g, g1, g2) = vertical_mode(p, self.p0, self.p1);
        let lap = (PI / self.lx).powi(2) + (PI / self.ly).powi(2);
        let w = self.a * p * p;
        let dw = 2.0 * self.a * p;
        self.horizontal(x, y) * (self.mu * lap * g - self.nu * (dw * g1 + w * g2))
    }
}

fn diffusion_study(base: &SimParams) -> Result<MmsTable> {
    let mut rows = Vec::new();
    for (n, (nx, np)) in RESOLUTIONS.into_iter().enumerate() {
        let mut p = params(base, nx, np);
        p.tbar = MeanTemperatureProfile::Constant(270.0);
        p.coeffs.humidity.alpha = 0.0;
        let m = Model::new(&p)?;
        let (mu, nu) = (p.coeffs.humidity.mu, p.coeffs.humidity.nu);
        let ex = DiffusionMms::new(&p, 270.0, mu, nu);
        // shift so that horizontal diffusion is O(1) relative to the identity
        let tau = p.lx * p.lx / (mu * PI * PI);
        let rhs = ScalarField::from_fn(&m.grid, Staggering::Cell, |x, y, pp| ex.phi(x, y, pp) + tau * ex.a_phi(x, y, pp));
        let sol = implicit_solve(&m.diff_q, &m.grid, &rhs, tau, None, &m.settings.elliptic)?;
        let exact = ScalarField::from_fn(&m.grid, Staggering::Cell, |x, y, pp| ex.phi(x, y, pp));
        let err = l2_norm(&sol.zip_map(&exact, |a, b| a - b), &m.grid)? / l2_norm(&exact, &m.grid)?;
        rows.push(MmsRow { nx, np, h: 0.5f64.powi(n as i32), error: err });
    }
    Ok(MmsTable { study: Study::Diffusion, rows })
}

fn hydrostatic_study(base: &SimParams) -> Result<MmsTable> {
    let mut rows = Vec::new();
    for (n, (nx, np)) in RESOLUTIONS.into_iter().enumerate() {
        let p = params(base, nx, np);
        let m = Model::new(&p)?;
        let c = &p.constants;
        let t0 = 250.0;
        let temp = ScalarField::constant(&m.grid, Staggering::Cell, t0);
        let phi_s = ScalarField::constant(&m.grid, Staggering::Surface, 100.0);
        let phi = hydrostatic_phi(&temp, &phi_s, &m.grid, c)?;
        let exact = ScalarField::from_fn(&m.grid, Staggering::Cell, |_, _, pp| 100.0 + c.r_dry * t0 * (c.p1 / pp).ln());
        let err = l2_norm(&phi.zip_map(&exact, |a, b| a - b), &m.grid)? / l2_norm(&exact, &m.grid)?;
        rows.push(MmsRow { nx, np, h: 0.5f64.powi(n as i32), error: err });
    }
    Ok(MmsTable { study: Study::Hydrostatic, rows })
}

fn advection_study(base: &SimParams) -> Result<MmsTable> {
    let mut rows = Vec::new();
    for (n, (nx, np)) in RESOLUTIONS.into_iter().enumerate() {
        let p = params(base, nx, np);
        let m = Model::new(&p)?;
        let g = &m.grid;
        let (lx, ly) = (g.lx, g.ly);
        let span = g.p1 - g.p0;
        let vert = |pp: f64| 1.0 + 0.5 * (PI * (pp - g.p0) / span).cos();
        // horizontally non-divergent, zero normal flow on the lateral boundary
        let v = VectorField2::from_fn(
            g,
            |x, y, pp| vert(pp) * (PI * x / lx).sin() * (PI * y / ly).cos() * PI / ly,
            |x, y, pp| -vert(pp) * (PI * x / lx).cos() * (PI * y / ly).sin() * PI / lx,
        );
        let om = omega_from_v(&v, g)?;
        let fl = Fluxes::new(&v, &om, g)?;
        let phi = ScalarField::from_fn(g, Staggering::Cell, |x, y, _| (2.0 * PI * x / lx).sin() + (PI * y / ly).cos());
        let adv = skew_scalar(&fl, &phi, g)?;
        let exact = ScalarField::from_fn(g, Staggering::Cell, |x, y, pp| {
            let u = vert(pp) * (PI * x / lx).sin() * (PI * y / ly).cos() * PI / ly;
            let w = -vert(pp) * (PI * x / lx).cos() * (PI * y / ly).sin() * PI / lx;
            u * 2.0 * PI / lx * (2.0 * PI * x / lx).cos() - w * PI / ly * (PI * y / ly).sin()
        });
        let err = l2_norm(&adv.zip_map(&exact, |a, b| a - b), g)? / l2_norm(&exact, g)?;
        rows.push(MmsRow { nx, np, h: 0.5f64.powi(n as i32), error: err });
    }
    Ok(MmsTable { study: Study::Advection, rows })
}

/// Rest state, `T = T(p, t)` and sub-saturated `q(x, y, p, t)` with the
/// forcing that makes them exact; `dt` shrinks with the square of the spacing.
fn full_study(base: &SimParams) -> Result<MmsTable> {
    let mut rows = Vec::new();
    let t_end = 4.0 * 3600.0;
    let decay = 1.0 / (6.0 * 3600.0);
    for (n, (nx, np)) in RESOLUTIONS.into_iter().enumerate() {
        let mut p = params(base, nx, np);
        p.tbar = MeanTemperatureProfile::Constant(270.0);
        p.scheme.form = TemperatureForm::Temperature;
        p.scheme.implicit_weight = 1.0;
        p.coeffs.temperature.alpha = 0.0;
        p.coeffs.humidity.alpha = 0.0;
        p.use_f_plus = false;
        let steps = 4usize * 4usize.pow(n as u32);
        p.dt = t_end / steps as f64;
        p.t1 = t_end;
        let qs = p.constants.q_sat;
        let tq = Arc::new(DiffusionMms::new(&p, 270.0, p.coeffs.humidity.mu, p.coeffs.humidity.nu));
        let tt = Arc::new(DiffusionMms::new(&p, 270.0, 0.0, p.coeffs.temperature.nu));
        let (p0, p1) = (p.constants.p0, p.constants.p1);
        let temp_exact = move |pp: f64, t: f64| 280.0 + 10.0 * vertical_mode(pp, p0, p1).0 * (-decay * t).exp();
        let q_exact = {
            let tq = tq.clone();
            move |x: f64, y: f64, pp: f64, t: f64| qs * (0.5 + 0.3 * tq.phi(x, y, pp) * (-decay * t).exp())
        };
        {
            let tt = tt.clone();
            p.forcing.temperature = Forcing::from_fn(move |_, _, pp, t| {
                let e = (-decay * t).exp();
                10.0 * e * (-decay * vertical_mode(pp, p0, p1).0 + tt.a_phi(0.0, 0.0, pp))
            });
        }
        {
            let tq = tq.clone();
            p.forcing.humidity = Forcing::from_fn(move |x, y, pp, t| {
                let e = (-decay * t).exp();
                qs * 0.3 * e * (-decay * tq.phi(x, y, pp) + tq.a_phi(x, y, pp))
            });
        }
        let m = Model::new(&p)?;
        let g = &m.grid;
        let mut s = State::zeros(g);
        s.temp = ScalarField::from_fn(g, Staggering::Cell, |_, _, pp| temp_exact(pp, 0.0));
        s.q = ScalarField::from_fn(g, Staggering::Cell, |x, y, pp| q_exact(x, y, pp, 0.0));
        let fin = run(&s, &m, &mut [])?;
        let exact_q = ScalarField::from_fn(g, Staggering::Cell, |x, y, pp| q_exact(x, y, pp, fin.t));
        let exact_t = ScalarField::from_fn(g, Staggering::Cell, |_, _, pp| temp_exact(pp, fin.t));
        let eq = l2_norm(&fin.q.zip_map(&exact_q, |a, b| a - b), g)? / l2_norm(&exact_q, g)?;
        let et = l2_norm(&fin.temp.zip_map(&exact_t, |a, b| a - b), g)? / l2_norm(&exact_t, g)?;
        rows.push(MmsRow { nx, np, h: 0.5f64.powi(n as i32), error: eq.max(et) });
    }
    Ok(MmsTable { study: Study::Full, rows })
}

/// Runs one study on the three resolutions of [`RESOLUTIONS`].
pub fn manufactured_convergence(study: Study, base: &SimParams) -> Result<MmsTable> {
    match study {
        Study::Diffusion => diffusion_study(base),
        Study::Hydrostatic => hydrostatic_study(base),
        Study::Advection => advection_study(base),
        Study::Full => full_study(base),
    }
}
