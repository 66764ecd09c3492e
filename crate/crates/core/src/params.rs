//! Physical constants, diffusion coefficients and run configuration.
//!
//! The configuration file is a flat TOML document; every key is optional and
//! falls back to the defaults documented on [`ParamsFile`].

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use evalexpr::{ContextWithMutableVariables, HashMapContext, Node, Value};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    /// Gas constant of dry air, J kg^-1 K^-1.
    pub r_dry: f64,
    /// Specific heat at constant pressure, J kg^-1 K^-1.
    pub c_p: f64,
    /// Gas constant of water vapor, J kg^-1 K^-1.
    pub r_vapor: f64,
    /// Latent heat of condensation, J kg^-1.
    pub latent: f64,
    pub gravity: f64,
    /// Coriolis parameter, s^-1.
    pub coriolis: f64,
    /// Saturation concentration (dimensionless).
    pub q_sat: f64,
    /// Pressure at the top of the domain, Pa.
    pub p0: f64,
    /// Pressure at the bottom of the domain, Pa.
    pub p1: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self {
            r_dry: 287.0,
            c_p: 1004.0,
            r_vapor: 461.5,
            latent: 2.5e6,
            gravity: 9.8,
            coriolis: 1e-4,
            q_sat: 0.02,
            p0: 2e4,
            p1: 1e5,
        }
    }
}

impl PhysicalConstants {
    /// Exponent R/c_p of the potential-temperature transform.
    pub fn kappa_exponent(&self) -> f64 {
        self.r_dry / self.c_p
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("R", self.r_dry),
            ("c_p", self.c_p),
            ("R_v", self.r_vapor),
            ("L", self.latent),
            ("g", self.gravity),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::Validation(format!("{name} > 0 violated ({name} = {value})")));
            }
        }
        if !self.coriolis.is_finite() {
            return Err(Error::Validation("f must be finite".into()));
        }
        if !(self.q_sat > 0.0 && self.q_sat < 1.0) {
            return Err(Error::Validation(format!(
                "q_s in (0,1) violated (q_s = {})",
                self.q_sat
            )));
        }
        if !(self.p0 > 0.0) {
            return Err(Error::Validation(format!("0 < p0 violated (p0 = {})", self.p0)));
        }
        if !(self.p0 < self.p1) || !self.p1.is_finite() {
            return Err(Error::Validation(format!(
                "p0 < p1 violated (p0 = {}, p1 = {})",
                self.p0, self.p1
            )));
        }
        Ok(())
    }
}

/// L R / (c_p R_v): the temperature at which the condensation rate changes sign.
pub fn xi_zero(c: &PhysicalConstants) -> f64 {
    c.latent * c.r_dry / (c.c_p * c.r_vapor)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Tracer {
    Velocity,
    Temperature,
    Humidity,
}

impl FromStr for Tracer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "v" | "velocity" => Ok(Tracer::Velocity),
            "T" | "theta" | "temperature" => Ok(Tracer::Temperature),
            "q" | "humidity" => Ok(Tracer::Humidity),
            other => Err(Error::UnknownTracer(other.to_string())),
        }
    }
}

impl fmt::Display for Tracer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Tracer::Velocity => "v",
            Tracer::Temperature => "T",
            Tracer::Humidity => "q",
        })
    }
}

/// Horizontal (mu), vertical (nu) and Robin (alpha) coefficients of one tracer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    pub mu: f64,
    pub nu: f64,
    pub alpha: f64,
}

impl Coefficients {
    pub fn kappa(&self) -> f64 {
        self.mu.min(self.nu).min(self.alpha)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionCoefficients {
    pub velocity: Coefficients,
    pub temperature: Coefficients,
    pub humidity: Coefficients,
}

impl Default for DiffusionCoefficients {
    fn default() -> Self {
        Self {
            velocity: Coefficients { mu: 2e5, nu: 5.0, alpha: 5e-5 },
            temperature: Coefficients { mu: 2e5, nu: 5.0, alpha: 5e-5 },
            humidity: Coefficients { mu: 2e5, nu: 5.0, alpha: 5e-5 },
        }
    }
}

impl DiffusionCoefficients {
    pub fn get(&self, tracer: Tracer) -> &Coefficients {
        match tracer {
            Tracer::Velocity => &self.velocity,
            Tracer::Temperature => &self.temperature,
            Tracer::Humidity => &self.humidity,
        }
    }

    /// Robin coefficient seen by potential temperature at the bottom boundary.
    pub fn alpha_theta(&self, c: &PhysicalConstants) -> f64 {
        self.temperature.alpha + self.temperature.nu * c.r_dry / (c.c_p * c.p1)
    }

    pub fn validate(&self) -> Result<()> {
        for tracer in [Tracer::Velocity, Tracer::Temperature, Tracer::Humidity] {
            let k = self.get(tracer);
            for (name, value) in [("mu", k.mu), ("nu", k.nu), ("alpha", k.alpha)] {
                if !(value > 0.0 && value.is_finite()) {
                    return Err(Error::Validation(format!(
                        "{name}_{tracer} > 0 violated ({value})"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// min(mu, nu, alpha) for the given tracer.
pub fn kappa(tracer: Tracer, coeffs: &DiffusionCoefficients) -> f64 {
    coeffs.get(tracer).kappa()
}

/// Same as [`kappa`] but with a tracer given by name.
pub fn kappa_by_name(name: &str, coeffs: &DiffusionCoefficients) -> Result<f64> {
    Ok(kappa(name.parse()?, coeffs))
}

/// Isobaric mean temperature used in the vertical diffusion weight (g p / (R Tbar))^2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeanTemperatureProfile {
    Constant(f64),
    /// Linear in p between `top` (at p0) and `bottom` (at p1).
    Linear { top: f64, bottom: f64 },
}

impl Default for MeanTemperatureProfile {
    fn default() -> Self {
        MeanTemperatureProfile::Constant(270.0)
    }
}

impl MeanTemperatureProfile {
    pub fn eval(&self, p: f64, c: &PhysicalConstants) -> f64 {
        match *self {
            MeanTemperatureProfile::Constant(t) => t,
            MeanTemperatureProfile::Linear { top, bottom } => {
                let s = (p - c.p0) / (c.p1 - c.p0);
                top + s * (bottom - top)
            }
        }
    }

    /// (lower, upper) bounds over [p0, p1].
    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            MeanTemperatureProfile::Constant(t) => (t, t),
            MeanTemperatureProfile::Linear { top, bottom } => (top.min(bottom), top.max(bottom)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.bounds();
        if !(lo > 0.0 && hi.is_finite()) {
            return Err(Error::Validation(format!(
                "0 < Tbar_* <= Tbar(p) violated (bounds {lo}, {hi})"
            )));
        }
        Ok(())
    }
}

/// A source term S(x, y, p, t).
#[derive(Clone, Default)]
pub enum Forcing {
    #[default]
    Zero,
    Expr {
        source: String,
        node: Arc<Node>,
    },
    Func(Arc<dyn Fn(f64, f64, f64, f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for Forcing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Forcing::Zero => f.write_str("Zero"),
            Forcing::Expr { source, .. } => write!(f, "Expr({source:?})"),
            Forcing::Func(_) => f.write_str("Func(..)"),
        }
    }
}

impl PartialEq for Forcing {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Forcing::Zero, Forcing::Zero) => true,
            (Forcing::Expr { source: a, .. }, Forcing::Expr { source: b, .. }) => a == b,
            (Forcing::Func(a), Forcing::Func(b)) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }
}

impl Forcing {
    /// Parses a closed-form expression in the variables x, y, p, t (and `pi`).
    /// `"0"` or an empty string give [`Forcing::Zero`].
    pub fn parse(expr: &str) -> Result<Self> {
        let trimmed = expr.trim();
        if trimmed.is_empty() || trimmed == "0" || trimmed == "zero" {
            return Ok(Forcing::Zero);
        }
        let node = evalexpr::build_operator_tree(trimmed).map_err(|e| Error::Forcing {
            expr: trimmed.to_string(),
            msg: e.to_string(),
        })?;
        let forcing = Forcing::Expr {
            source: trimmed.to_string(),
            node: Arc::new(node),
        };
        // Catch unknown identifiers at load time rather than mid-run.
        forcing.evaluator()?.eval(0.5, 0.5, 0.5, 0.0)?;
        Ok(forcing)
    }

    pub fn from_fn(f: impl Fn(f64, f64, f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Forcing::Func(Arc::new(f))
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Forcing::Zero)
    }

    pub fn source(&self) -> String {
        match self {
            Forcing::Zero => "0".to_string(),
            Forcing::Expr { source, .. } => source.clone(),
            Forcing::Func(_) => "<function>".to_string(),
        }
    }

    pub fn evaluator(&self) -> Result<ForcingEvaluator<'_>> {
        let mut ctx = HashMapContext::new();
        ctx.set_value("pi".into(), Value::Float(std::f64::consts::PI))
            .map_err(|e| Error::Forcing {
                expr: self.source(),
                msg: e.to_string(),
            })?;
        Ok(ForcingEvaluator { forcing: self, ctx })
    }
}

/// Reusable evaluation context for one forcing term.
pub struct ForcingEvaluator<'a> {
    forcing: &'a Forcing,
    ctx: HashMapContext,
}

impl ForcingEvaluator<'_> {
    pub fn eval(&mut self, x: f64, y: f64, p: f64, t: f64) -> Result<f64> {
        match self.forcing {
            Forcing::Zero => Ok(0.0),
            Forcing::Func(f) => Ok(f(x, y, p, t)),
            Forcing::Expr { source, node } => {
                let err = |e: evalexpr::EvalexprError| Error::Forcing {
                    expr: source.clone(),
                    msg: e.to_string(),
                };
                for (name, value) in [("x", x), ("y", y), ("p", p), ("t", t)] {
                    self.ctx
                        .set_value(name.into(), Value::Float(value))
                        .map_err(err)?;
                }
                node.eval_number_with_context(&self.ctx).map_err(err)
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Forcings {
    pub v1: Forcing,
    pub v2: Forcing,
    pub temperature: Forcing,
    pub humidity: Forcing,
}

/// Prognostic temperature variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum TemperatureForm {
    #[default]
    #[serde(rename = "theta")]
    Theta,
    #[serde(rename = "T")]
    Temperature,
}

impl FromStr for TemperatureForm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "theta" => Ok(TemperatureForm::Theta),
            "T" => Ok(TemperatureForm::Temperature),
            other => Err(Error::Parse(format!("form must be `theta` or `T`, got `{other}`"))),
        }
    }
}

/// Weight of the omega*T term in the temperature equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum OmegaTWeight {
    /// R / (c_p p), the coefficient of the thermodynamic equation.
    #[default]
    #[serde(rename = "r_over_cp")]
    ROverCp,
    /// R c_p / p, as written in the weak T-form.
    #[serde(rename = "r_times_cp")]
    RTimesCp,
}

/// Time-discretization knobs carried in the config file.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeConfig {
    pub form: TemperatureForm,
    pub omega_t_weight: OmegaTWeight,
    /// 1.0 = backward Euler diffusion, 0.5 = Crank-Nicolson (with AB2 explicit part).
    pub implicit_weight: f64,
    pub cfl_factor: f64,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        Self {
            form: TemperatureForm::Theta,
            omega_t_weight: OmegaTWeight::ROverCp,
            implicit_weight: 1.0,
            cfl_factor: 0.5,
            cg_tol: 1e-12,
            cg_max_iter: 20_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub snapshot_every: usize,
    pub diag_every: usize,
    pub threads: usize,
    pub seed: u64,
    pub scenario: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            snapshot_every: 5,
            diag_every: 1,
            threads: 1,
            seed: 0,
            scenario: "saturated-updraft".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimParams {
    pub constants: PhysicalConstants,
    pub coeffs: DiffusionCoefficients,
    pub tbar: MeanTemperatureProfile,
    pub lx: f64,
    pub ly: f64,
    pub nx: usize,
    pub ny: usize,
    /// Number of full pressure levels, endpoints included.
    pub np: usize,
    pub dt: f64,
    pub t1: f64,
    pub epsilon: f64,
    pub use_f_plus: bool,
    pub forcing: Forcings,
    pub scheme: SchemeConfig,
    pub output: OutputConfig,
}

impl Default for SimParams {
    fn default() -> Self {
        ParamsFile::default()
            .into_params()
            .expect("defaults are valid")
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<()> {
        self.constants.validate()?;
        self.coeffs.validate()?;
        self.tbar.validate()?;
        if !(self.lx > 0.0 && self.ly > 0.0) {
            return Err(Error::Validation("Lx > 0 and Ly > 0 violated".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(Error::Validation(format!(
                "epsilon in (0,1] violated (epsilon = {})",
                self.epsilon
            )));
        }
        if !(self.dt > 0.0) {
            return Err(Error::Validation(format!("dt > 0 violated (dt = {})", self.dt)));
        }
        if !(self.t1 >= self.dt) {
            return Err(Error::Validation(format!(
                "t1 >= dt violated (t1 = {}, dt = {})",
                self.t1, self.dt
            )));
        }
        if self.nx < 4 || self.ny < 4 || self.np < 4 {
            return Err(Error::Validation(format!(
                "grid sizes >= 4 violated (nx = {}, ny = {}, np = {})",
                self.nx, self.ny, self.np
            )));
        }
        let w = self.scheme.implicit_weight;
        if w != 1.0 && w != 0.5 {
            return Err(Error::Validation(format!("implicit weight in {{1, 1/2}} violated ({w})")));
        }
        if !(self.scheme.cfl_factor > 0.0 && self.scheme.cfl_factor <= 1.0) {
            return Err(Error::Validation("CFL factor in (0,1] violated".into()));
        }
        if !(self.scheme.cg_tol > 0.0 && self.scheme.cg_tol <= 1e-4) {
            return Err(Error::Validation("solver tolerance in (0, 1e-4] violated".into()));
        }
        if self.scheme.cg_max_iter < 10 {
            return Err(Error::Validation("solver max iterations >= 10 violated".into()));
        }
        if self.output.snapshot_every == 0 || self.output.diag_every == 0 {
            return Err(Error::Validation("output cadences must be >= 1".into()));
        }
        Ok(())
    }

    pub fn alpha_theta(&self) -> f64 {
        self.coeffs.alpha_theta(&self.constants)
    }

    pub fn steps(&self) -> usize {
        (self.t1 / self.dt - 1e-9).ceil().max(0.0) as usize
    }
}

/// On-disk schema. Every key is optional; defaults shown are those of
/// [`ParamsFile::default`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamsFile {
    pub r_dry: f64,
    pub c_p: f64,
    pub r_vapor: f64,
    pub latent: f64,
    pub gravity: f64,
    pub coriolis: f64,
    pub q_sat: f64,
    pub p0: f64,
    pub p1: f64,
    pub mu_v: f64,
    pub nu_v: f64,
    pub alpha_v: f64,
    pub mu_t: f64,
    pub nu_t: f64,
    pub alpha_t: f64,
    pub mu_q: f64,
    pub nu_q: f64,
    pub alpha_q: f64,
    /// `constant` or `linear`.
    pub tbar_profile: String,
    /// Tbar at p0 (or everywhere for `constant`).
    pub tbar_top: f64,
    /// Tbar at p1 (`linear` only).
    pub tbar_bottom: f64,
    pub lx: f64,
    pub ly: f64,
    pub nx: usize,
    pub ny: usize,
    pub np: usize,
    pub dt: f64,
    pub t1: f64,
    pub epsilon: f64,
    pub use_f_plus: bool,
    pub forcing_v1: String,
    pub forcing_v2: String,
    pub forcing_t: String,
    pub forcing_q: String,
    pub form: TemperatureForm,
    pub omega_t_weight: OmegaTWeight,
    pub implicit_weight: f64,
    pub cfl_factor: f64,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    pub snapshot_every: usize,
    pub diag_every: usize,
    pub threads: usize,
    pub seed: u64,
    pub scenario: String,
}

impl Default for ParamsFile {
    fn default() -> Self {
        let c = PhysicalConstants::default();
        let k = DiffusionCoefficients::default();
        let s = SchemeConfig::default();
        let o = OutputConfig::default();
        Self {
            r_dry: c.r_dry,
            c_p: c.c_p,
            r_vapor: c.r_vapor,
            latent: c.latent,
            gravity: c.gravity,
            coriolis: c.coriolis,
            q_sat: c.q_sat,
            p0: c.p0,
            p1: c.p1,
            mu_v: k.velocity.mu,
            nu_v: k.velocity.nu,
            alpha_v: k.velocity.alpha,
            mu_t: k.temperature.mu,
            nu_t: k.temperature.nu,
            alpha_t: k.temperature.alpha,
            mu_q: k.humidity.mu,
            nu_q: k.humidity.nu,
            alpha_q: k.humidity.alpha,
            tbar_profile: "constant".into(),
            tbar_top: 270.0,
            tbar_bottom: 270.0,
            lx: 1e6,
            ly: 1e6,
            nx: 32,
            ny: 32,
            np: 16,
            dt: 60.0,
            t1: 12_000.0,
            epsilon: 0.01,
            use_f_plus: false,
            forcing_v1: "0".into(),
            forcing_v2: "0".into(),
            forcing_t: "0".into(),
            forcing_q: "0".into(),
            form: s.form,
            omega_t_weight: s.omega_t_weight,
            implicit_weight: s.implicit_weight,
            cfl_factor: s.cfl_factor,
            cg_tol: s.cg_tol,
            cg_max_iter: s.cg_max_iter,
            snapshot_every: o.snapshot_every,
            diag_every: o.diag_every,
            threads: o.threads,
            seed: o.seed,
            scenario: o.scenario,
        }
    }
}

impl ParamsFile {
    pub fn into_params(self) -> Result<SimParams> {
        let tbar = match self.tbar_profile.as_str() {
            "constant" => MeanTemperatureProfile::Constant(self.tbar_top),
            "linear" => MeanTemperatureProfile::Linear {
                top: self.tbar_top,
                bottom: self.tbar_bottom,
            },
            other => {
                return Err(Error::Parse(format!(
                    "tbar_profile must be `constant` or `linear`, got `{other}`"
                )))
            }
        };
        Ok(SimParams {
            constants: PhysicalConstants {
                r_dry: self.r_dry,
                c_p: self.c_p,
                r_vapor: self.r_vapor,
                latent: self.latent,
                gravity: self.gravity,
                coriolis: self.coriolis,
                q_sat: self.q_sat,
                p0: self.p0,
                p1: self.p1,
            },
            coeffs: DiffusionCoefficients {
                velocity: Coefficients { mu: self.mu_v, nu: self.nu_v, alpha: self.alpha_v },
                temperature: Coefficients { mu: self.mu_t, nu: self.nu_t, alpha: self.alpha_t },
                humidity: Coefficients { mu: self.mu_q, nu: self.nu_q, alpha: self.alpha_q },
            },
            tbar,
            lx: self.lx,
            ly: self.ly,
            nx: self.nx,
            ny: self.ny,
            np: self.np,
            dt: self.dt,
            t1: self.t1,
            epsilon: self.epsilon,
            use_f_plus: self.use_f_plus,
            forcing: Forcings {
                v1: Forcing::parse(&self.forcing_v1)?,
                v2: Forcing::parse(&self.forcing_v2)?,
                temperature: Forcing::parse(&self.forcing_t)?,
                humidity: Forcing::parse(&self.forcing_q)?,
            },
            scheme: SchemeConfig {
                form: self.form,
                omega_t_weight: self.omega_t_weight,
                implicit_weight: self.implicit_weight,
                cfl_factor: self.cfl_factor,
                cg_tol: self.cg_tol,
                cg_max_iter: self.cg_max_iter,
            },
            output: OutputConfig {
                snapshot_every: self.snapshot_every,
                diag_every: self.diag_every,
                threads: self.threads,
                seed: self.seed,
                scenario: self.scenario,
            },
        })
    }

    pub fn from_params(p: &SimParams) -> Self {
        let (tbar_profile, tbar_top, tbar_bottom) = match p.tbar {
            MeanTemperatureProfile::Constant(t) => ("constant", t, t),
            MeanTemperatureProfile::Linear { top, bottom } => ("linear", top, bottom),
        };
        let c = &p.constants;
        let k = &p.coeffs;
        Self {
            r_dry: c.r_dry,
            c_p: c.c_p,
            r_vapor: c.r_vapor,
            latent: c.latent,
            gravity: c.gravity,
            coriolis: c.coriolis,
            q_sat: c.q_sat,
            p0: c.p0,
            p1: c.p1,
            mu_v: k.velocity.mu,
            nu_v: k.velocity.nu,
            alpha_v: k.velocity.alpha,
            mu_t: k.temperature.mu,
            nu_t: k.temperature.nu,
            alpha_t: k.temperature.alpha,
            mu_q: k.humidity.mu,
            nu_q: k.humidity.nu,
            alpha_q: k.humidity.alpha,
            tbar_profile: tbar_profile.into(),
            tbar_top,
            tbar_bottom,
            lx: p.lx,
            ly: p.ly,
            nx: p.nx,
            ny: p.ny,
            np: p.np,
            dt: p.dt,
            t1: p.t1,
            epsilon: p.epsilon,
            use_f_plus: p.use_f_plus,
            forcing_v1: p.forcing.v1.source(),
            forcing_v2: p.forcing.v2.source(),
            forcing_t: p.forcing.temperature.source(),
            forcing_q: p.forcing.humidity.source(),
            form: p.scheme.form,
            omega_t_weight: p.scheme.omega_t_weight,
            implicit_weight: p.scheme.implicit_weight,
            cfl_factor: p.scheme.cfl_factor,
            cg_tol: p.scheme.cg_tol,
            cg_max_iter: p.scheme.cg_max_iter,
            snapshot_every: p.output.snapshot_every,
            diag_every: p.output.diag_every,
            threads: p.output.threads,
            seed: p.output.seed,
            scenario: p.output.scenario.clone(),
        }
    }
}

/// Parses and validates a config document.
pub fn parse_params(text: &str) -> Result<SimParams> {
    let file: ParamsFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let params = file.into_params()?;
    params.validate()?;
    Ok(params)
}

pub fn load_params(path: impl AsRef<Path>) -> Result<SimParams> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_params(&text)
}

/// Canonical text form: every key written, in schema order.
pub fn params_to_string(params: &SimParams) -> String {
    toml::to_string(&ParamsFile::from_params(params)).expect("flat schema always serializes")
}

pub fn save_params(params: &SimParams, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, params_to_string(params)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn minimal_config_takes_defaults() {
        let p = parse_params("nx = 8\nny = 6\nnp = 5\n").unwrap();
        assert_eq!((p.nx, p.ny, p.np), (8, 6, 5));
        assert_eq!(p.constants, PhysicalConstants::default());
        assert_eq!(p.tbar, MeanTemperatureProfile::Constant(270.0));
        assert_eq!(p.coeffs, DiffusionCoefficients::default());
    }

    #[test]
    fn inverted_pressure_range_is_rejected() {
        let err = parse_params("p0 = 1000.0\np1 = 100.0\n").unwrap_err();
        assert!(err.to_string().contains("p0 < p1 violated"), "{err}");
    }

    #[test]
    fn q_sat_outside_unit_interval_is_rejected() {
        let err = parse_params("q_sat = 1.5\n").unwrap_err();
        assert!(err.to_string().contains("q_s in (0,1)"), "{err}");
    }

    #[test]
    fn malformed_document_is_a_parse_error() {
        assert!(matches!(parse_params("nx = = 3"), Err(Error::Parse(_))));
        assert!(matches!(parse_params("bogus_key = 3"), Err(Error::Parse(_))));
    }

    #[test]
    fn save_then_load_is_identity() {
        let p = parse_params("q_sat = 0.02\nepsilon = 0.01\nforcing_t = \"math::sin(pi*x)*p\"\n")
            .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.cfg");
        save_params(&p, &path).unwrap();
        let back = load_params(&path).unwrap();
        assert_eq!(back, p);
        assert_eq!(params_to_string(&back), params_to_string(&p));
    }

    #[test]
    fn xi_zero_values() {
        let unit = PhysicalConstants {
            r_dry: 1.0,
            c_p: 1.0,
            r_vapor: 1.0,
            latent: 1.0,
            ..Default::default()
        };
        assert_eq!(xi_zero(&unit), 1.0);
        let hand = PhysicalConstants {
            latent: 2.0,
            r_dry: 3.0,
            c_p: 1.0,
            r_vapor: 6.0,
            ..Default::default()
        };
        assert_eq!(xi_zero(&hand), 1.0);
        let std = xi_zero(&PhysicalConstants::default());
        assert!((std - 1548.0).abs() < 2.0, "{std}");
    }

    #[test]
    fn kappa_picks_minimum() {
        let mut k = DiffusionCoefficients::default();
        k.humidity = Coefficients { mu: 1.0, nu: 2.0, alpha: 3.0 };
        k.velocity = Coefficients { mu: 5.0, nu: 5.0, alpha: 5.0 };
        assert_eq!(kappa(Tracer::Humidity, &k), 1.0);
        assert_eq!(kappa(Tracer::Velocity, &k), 5.0);
        assert!(matches!(kappa_by_name("rho", &k), Err(Error::UnknownTracer(_))));
        assert_eq!(kappa_by_name("q", &k).unwrap(), 1.0);
    }

    #[test]
    fn alpha_theta_matches_raw_fields() {
        let p = SimParams::default();
        let t = p.coeffs.temperature;
        let c = p.constants;
        assert_eq!(p.alpha_theta(), t.alpha + t.nu * c.r_dry / (c.c_p * c.p1));
    }

    #[test]
    fn forcing_expressions_evaluate() {
        let f = Forcing::parse("2*x + y*p - t").unwrap();
        let mut e = f.evaluator().unwrap();
        assert_eq!(e.eval(1.0, 2.0, 3.0, 4.0).unwrap(), 4.0);
        assert!(Forcing::parse("0").unwrap().is_zero());
        assert!(Forcing::parse("unknown_var * 2").is_err());
    }

    proptest! {
        #[test]
        fn kappa_equals_brute_force_min(a in 1e-6f64..1e6, b in 1e-6f64..1e6, c in 1e-6f64..1e6) {
            let k = Coefficients { mu: a, nu: b, alpha: c };
            let brute = [a, b, c].into_iter().fold(f64::INFINITY, |m, x| if x < m { x } else { m });
            prop_assert_eq!(k.kappa(), brute);
        }

        #[test]
        fn xi_zero_is_homogeneous(s in 0.1f64..10.0) {
            let c = PhysicalConstants::default();
            let base = xi_zero(&c);
            let scaled_l = xi_zero(&PhysicalConstants { latent: c.latent * s, ..c });
            let scaled_cp = xi_zero(&PhysicalConstants { c_p: c.c_p * s, ..c });
            prop_assert!((scaled_l - s * base).abs() <= 1e-12 * s * base);
            prop_assert!((scaled_cp - base / s).abs() <= 1e-12 * base / s);
        }

        #[test]
        fn accept_iff_invariants_hold(
            q in -0.5f64..1.5,
            p0 in -1e4f64..1.2e5,
            p1 in -1e4f64..1.2e5,
            eps in -0.5f64..1.5,
            dt in -10.0f64..100.0,
            nx in 1usize..8,
        ) {
            let text = format!(
                "q_sat = {q:?}\np0 = {p0:?}\np1 = {p1:?}\nepsilon = {eps:?}\ndt = {dt:?}\nt1 = 100.0\nnx = {nx}\n"
            );
            let ok = q > 0.0 && q < 1.0 && p0 > 0.0 && p0 < p1 && eps > 0.0 && eps <= 1.0
                && dt > 0.0 && 100.0 >= dt && nx >= 4;
            prop_assert_eq!(parse_params(&text).is_ok(), ok);
        }
    }
}
