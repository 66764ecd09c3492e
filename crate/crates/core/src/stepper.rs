//! Time integration: tendency assembly, IMEX advance and barotropic projection.
//!
//! One step, starting from an admissible velocity `v_n`:
//! 1. `omega_n` from `v_n`;
//! 2. tracers: explicit upwind transport, `m_theta` (or `omega T`), condensation
//!    sources and forcing, then an implicit diffusion solve;
//! 3. velocity: explicit skew transport, Coriolis, pressure gradient and forcing,
//!    implicit diffusion, then projection. The removed potential over `dt` is
//!    the surface geopotential.

use crate::error::{Error, Result};
use crate::field::{ScalarField, State, VectorField2};
use crate::grid::{build_grid, Grid, Staggering};
use crate::operators::advection::{skew_vector, upwind_rate, upwind_tendency, Fluxes};
use crate::operators::diagnostics::omega_from_v;
use crate::operators::diffusion::{dof_mask, DiffusionOperator};
use crate::operators::elliptic::{
    conjugate_gradient, project_barotropic_with_potential, EllipticSolveSettings,
};
use crate::operators::forms::{coriolis_tendency, omega_t_tendency, pressure_gradient_tendency, sigma_field};
use crate::params::{Forcing, SimParams, TemperatureForm, Tracer};
use crate::saturation::SaturationKernel;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeSettings {
    /// 1 = backward Euler, 1/2 = Crank-Nicolson with AB2 for the explicit part.
    pub implicit_weight: f64,
    pub cfl_factor: f64,
    pub elliptic: EllipticSolveSettings,
}

impl SchemeSettings {
    pub fn from_params(params: &SimParams) -> Result<Self> {
        let s = Self {
            implicit_weight: params.scheme.implicit_weight,
            cfl_factor: params.scheme.cfl_factor,
            elliptic: EllipticSolveSettings::new(params.scheme.cg_tol, params.scheme.cg_max_iter)?,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.implicit_weight != 1.0 && self.implicit_weight != 0.5 {
            return Err(Error::Validation(format!(
                "implicit weight in {{1, 1/2}} violated ({})",
                self.implicit_weight
            )));
        }
        if !(self.cfl_factor > 0.0 && self.cfl_factor <= 1.0) {
            return Err(Error::Validation(format!("CFL factor in (0,1] violated ({})", self.cfl_factor)));
        }
        self.elliptic.validate()
    }
}

/// `theta = T (p0/p)^(R/c_p)`.
pub fn theta_from_t(temp: &ScalarField, grid: &Grid, c: &crate::params::PhysicalConstants) -> ScalarField {
    temp.zip_map(&sigma_field(grid, c), |t, s| t / s)
}

/// `T = theta (p/p0)^(R/c_p)`.
pub fn t_from_theta(theta: &ScalarField, grid: &Grid, c: &crate::params::PhysicalConstants) -> ScalarField {
    theta.zip_map(&sigma_field(grid, c), |t, s| t * s)
}

/// Everything a run needs besides the state: grid, parameters, kernel and
/// precomputed operators.
#[derive(Debug, Clone)]
pub struct Model {
    pub grid: Grid,
    pub params: SimParams,
    pub kernel: SaturationKernel,
    pub settings: SchemeSettings,
    pub form: TemperatureForm,
    pub diff_v: DiffusionOperator,
    /// Symmetric part of the temperature operator (conjugated for theta).
    pub diff_t: DiffusionOperator,
    pub diff_q: DiffusionOperator,
    pub sigma: ScalarField,
}

impl Model {
    /// Builds a model; coefficients are not required to be positive here so
    /// that degenerate setups (e.g. no Robin term) can be studied.
    pub fn new(params: &SimParams) -> Result<Self> {
        params.constants.validate()?;
        params.tbar.validate()?;
        let grid = build_grid(params)?;
        let kernel = SaturationKernel::from_params(params)?;
        let settings = SchemeSettings::from_params(params)?;
        Self::with_parts(grid, params.clone(), kernel, settings)
    }

    pub fn with_parts(
        grid: Grid,
        params: SimParams,
        kernel: SaturationKernel,
        settings: SchemeSettings,
    ) -> Result<Self> {
        settings.validate()?;
        let form = params.scheme.form;
        let theta = form == TemperatureForm::Theta;
        Ok(Self {
            diff_v: DiffusionOperator::for_tracer(&grid, &params, Tracer::Velocity, false),
            diff_t: DiffusionOperator::for_tracer(&grid, &params, Tracer::Temperature, theta),
            diff_q: DiffusionOperator::for_tracer(&grid, &params, Tracer::Humidity, false),
            sigma: sigma_field(&grid, &params.constants),
            grid,
            params,
            kernel,
            settings,
            form,
        })
    }

    /// Same model with a different regularization parameter.
    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        let mut m = self.clone();
        m.kernel = self.kernel.with_epsilon(epsilon)?;
        m.params.epsilon = epsilon;
        Ok(m)
    }

    /// Prognostic temperature variable of this model's form.
    pub fn prognostic_temp(&self, state: &State) -> ScalarField {
        match self.form {
            TemperatureForm::Theta => state.temp.zip_map(&self.sigma, |t, s| t / s),
            TemperatureForm::Temperature => state.temp.clone(),
        }
    }

    fn to_temperature(&self, prog: &ScalarField) -> ScalarField {
        match self.form {
            TemperatureForm::Theta => prog.zip_map(&self.sigma, |t, s| t * s),
            TemperatureForm::Temperature => prog.clone(),
        }
    }

    fn sample(&self, forcing: &Forcing, stag: Staggering, t: f64) -> Result<Option<ScalarField>> {
        if forcing.is_zero() {
            return Ok(None);
        }
        let mut ev = forcing.evaluator()?;
        let mut err = None;
        let f = ScalarField::from_fn(&self.grid, stag, |x, y, p| match ev.eval(x, y, p, t) {
            Ok(v) => v,
            Err(e) => {
                err.get_or_insert(e);
                0.0
            }
        });
        match err {
            Some(e) => Err(e),
            None => Ok(Some(f)),
        }
    }

    /// Forcing fields at time `t`: `(S_v, S_temp, S_q)`, with `S_temp` already
    /// transformed to the prognostic temperature variable.
    pub fn forcing_at(&self, t: f64) -> Result<(VectorField2, ScalarField, ScalarField)> {
        let f = &self.params.forcing;
        let mut sv = VectorField2::zeros(&self.grid);
        if let Some(u) = self.sample(&f.v1, Staggering::XFace, t)? {
            sv.u = u;
        }
        if let Some(v) = self.sample(&f.v2, Staggering::YFace, t)? {
            sv.v = v;
        }
        sv.zero_normal_boundary();
        let st = match self.sample(&f.temperature, Staggering::Cell, t)? {
            Some(s) => match self.form {
                TemperatureForm::Theta => s.zip_map(&self.sigma, |a, b| a / b),
                TemperatureForm::Temperature => s,
            },
            None => ScalarField::zeros(&self.grid, Staggering::Cell),
        };
        let sq = self
            .sample(&f.humidity, Staggering::Cell, t)?
            .unwrap_or_else(|| ScalarField::zeros(&self.grid, Staggering::Cell));
        Ok((sv, st, sq))
    }

    /// Largest `dt` for which the explicit transport of `state` is monotone.
    pub fn cfl_limit(&self, state: &State) -> Result<f64> {
        let om = omega_from_v(&state.v, &self.grid)?;
        let fl = Fluxes::new(&state.v, &om, &self.grid)?;
        let rate = upwind_rate(&fl, &self.grid);
        Ok(if rate > 0.0 { 1.0 / rate } else { f64::INFINITY })
    }

    /// `cfl_factor * cfl_limit`.
    pub fn suggested_dt(&self, state: &State) -> Result<f64> {
        Ok(self.settings.cfl_factor * self.cfl_limit(state)?)
    }
}

/// Instantaneous tendencies of a state, split into the explicitly and
/// implicitly treated parts. Temperature entries refer to the prognostic
/// variable of the model's form.
#[derive(Debug, Clone)]
pub struct TendencySet {
    pub omega: ScalarField,
    pub d_eps: ScalarField,
    pub explicit_v: VectorField2,
    pub explicit_temp: ScalarField,
    pub explicit_q: ScalarField,
    /// `-A_v v`, `-A_T temp`, `-A_q q`.
    pub implicit_v: VectorField2,
    pub implicit_temp: ScalarField,
    pub implicit_q: ScalarField,
    /// Forcing already included in the explicit parts.
    pub forcing_v: VectorField2,
    pub forcing_temp: ScalarField,
    pub forcing_q: ScalarField,
    pub upwind_rate: f64,
}

impl TendencySet {
    pub fn check_finite(&self) -> Result<()> {
        let named: [(&'static str, &ScalarField); 9] = [
            ("omega", &self.omega),
            ("D_eps", &self.d_eps),
            ("dv1/dt", &self.explicit_v.u),
            ("dv2/dt", &self.explicit_v.v),
            ("dT/dt", &self.explicit_temp),
            ("dq/dt", &self.explicit_q),
            ("A_v v1", &self.implicit_v.u),
            ("A_T T", &self.implicit_temp),
            ("A_q q", &self.implicit_q),
        ];
        for (field, f) in named {
            if let Some(index) = f.first_non_finite() {
                return Err(Error::NonFinite { field, index });
            }
        }
        Ok(())
    }
}

fn neg(f: ScalarField) -> ScalarField {
    f.map(|x| -x)
}

fn add_into(acc: &mut ScalarField, other: &ScalarField) {
    for (a, b) in acc.data.iter_mut().zip(&other.data) {
        *a += b;
    }
}

/// Assembles all tendencies of `state` at its time.
pub fn assemble_tendencies(state: &State, model: &Model) -> Result<TendencySet> {
    let grid = &model.grid;
    let c = &model.params.constants;
    state.check(grid)?;
    state.check_finite()?;
    let temp = model.prognostic_temp(state);
    let omega = omega_from_v(&state.v, grid)?;
    let fl = Fluxes::new(&state.v, &omega, grid)?;
    let (sv, st, sq) = model.forcing_at(state.t)?;

    let d_eps = model.kernel.d_eps(&omega, &temp, &state.q, grid, model.form)?;

    let mut ev = neg_vec(skew_vector(&fl, &state.v, grid)?);
    for part in [
        coriolis_tendency(&state.v, grid, c.coriolis)?,
        pressure_gradient_tendency(&state.temp, grid, c)?,
        sv.clone(),
    ] {
        add_into(&mut ev.u, &part.u);
        add_into(&mut ev.v, &part.v);
    }
    ev.zero_normal_boundary();

    let mut et = upwind_tendency(&fl, &temp, grid)?;
    match model.form {
        TemperatureForm::Theta => {
            add_into(&mut et, &neg(model.diff_t.apply_m_theta(grid, &temp)?));
            add_into(&mut et, &model.kernel.theta_source(&d_eps, grid));
        }
        TemperatureForm::Temperature => {
            let which = model.params.scheme.omega_t_weight;
            add_into(&mut et, &omega_t_tendency(&omega, &temp, grid, c, which)?);
            add_into(&mut et, &model.kernel.temperature_source(&d_eps));
        }
    }
    add_into(&mut et, &st);

    let mut eq = upwind_tendency(&fl, &state.q, grid)?;
    add_into(&mut eq, &model.kernel.humidity_source(&d_eps));
    add_into(&mut eq, &sq);

    let mut iv = model.diff_v.apply(grid, &state.v)?;
    iv.u = neg(iv.u);
    iv.v = neg(iv.v);
    iv.zero_normal_boundary();

    let set = TendencySet {
        upwind_rate: upwind_rate(&fl, grid),
        omega,
        d_eps,
        explicit_v: ev,
        explicit_temp: et,
        explicit_q: eq,
        implicit_v: iv,
        implicit_temp: neg(model.diff_t.apply_scalar(grid, &temp)?),
        implicit_q: neg(model.diff_q.apply_scalar(grid, &state.q)?),
        forcing_v: sv,
        forcing_temp: st,
        forcing_q: sq,
    };
    set.check_finite()?;
    Ok(set)
}

fn neg_vec(v: VectorField2) -> VectorField2 {
    VectorField2 { u: neg(v.u), v: neg(v.v) }
}

/// Solves `(Mass + tau K) x = Mass rhs - beta K prev` on the unknowns of `rhs`.
pub(crate) fn implicit_solve(
    op: &DiffusionOperator,
    grid: &Grid,
    rhs: &ScalarField,
    tau: f64,
    explicit_part: Option<(f64, &ScalarField)>,
    settings: &EllipticSolveSettings,
) -> Result<ScalarField> {
    let layout = grid.layout(rhs.stag);
    let weights = layout.weights();
    let mask = dof_mask(grid, rhs.stag);
    let n = rhs.len();
    let mut b: Vec<f64> = (0..n).map(|m| if mask[m] { weights[m] * rhs.data[m] } else { 0.0 }).collect();
    if let Some((beta, prev)) = explicit_part {
        let kp = op.stiffness(grid, prev)?;
        for m in 0..n {
            if mask[m] {
                b[m] -= beta * kp[m];
            }
        }
    }
    let mut x: Vec<f64> = (0..n).map(|m| if mask[m] { rhs.data[m] } else { 0.0 }).collect();
    let mut scratch = Vec::with_capacity(n);
    conjugate_gradient(
        |f, out| op.shifted_into(&layout, &weights, &mask, tau, f, &mut scratch, out),
        &b,
        &mut x,
        settings,
        None,
    )?;
    Ok(ScalarField { stag: rhs.stag, shape: rhs.shape, data: x })
}

/// Per-step by-products.
#[derive(Debug, Clone)]
pub struct StepInfo {
    /// Tendencies of the state at the start of the step.
    pub tendencies: TendencySet,
    /// Surface geopotential recovered from the projection.
    pub phi_s: ScalarField,
    pub cfl_limit: f64,
    pub projection_iterations: usize,
}

/// Stateful integrator (keeps the previous explicit tendency for AB2).
#[derive(Debug, Clone)]
pub struct Stepper {
    pub model: Model,
    previous: Option<(VectorField2, ScalarField, ScalarField)>,
}

impl Stepper {
    pub fn new(model: Model) -> Self {
        Self { model, previous: None }
    }

    pub fn reset(&mut self) {
        self.previous = None;
    }

    pub fn step(&mut self, state: &State, dt: f64) -> Result<(State, StepInfo)> {
        let model = &self.model;
        let grid = &model.grid;
        if !(dt > 0.0) {
            return Err(Error::Validation(format!("dt > 0 violated ({dt})")));
        }
        let tend = assemble_tendencies(state, model)?;
        let limit = if tend.upwind_rate > 0.0 { 1.0 / tend.upwind_rate } else { f64::INFINITY };
        if dt > limit {
            return Err(Error::Cfl { dt, limit });
        }
        let w = model.settings.implicit_weight;
        let (ev, et, eq) = match (&self.previous, w == 0.5) {
            (Some((pv, pt, pq)), true) => {
                let ab = |now: &ScalarField, old: &ScalarField| now.zip_map(old, |a, b| 1.5 * a - 0.5 * b);
                (
                    VectorField2 { u: ab(&tend.explicit_v.u, &pv.u), v: ab(&tend.explicit_v.v, &pv.v) },
                    ab(&tend.explicit_temp, pt),
                    ab(&tend.explicit_q, pq),
                )
            }
            _ => (tend.explicit_v.clone(), tend.explicit_temp.clone(), tend.explicit_q.clone()),
        };
        let tau = w * dt;
        let beta = (1.0 - w) * dt;
        let es = &model.settings.elliptic;
        let advance = |f: &ScalarField, e: &ScalarField| f.zip_map(e, |a, b| a + dt * b);
        let explicit_of = |prev: &ScalarField| -> Option<(f64, ScalarField)> {
            if beta > 0.0 {
                Some((beta, prev.clone()))
            } else {
                None
            }
        };

        let temp = model.prognostic_temp(state);
        let star_t = advance(&temp, &et);
        let ex_t = explicit_of(&temp);
        let new_temp = implicit_solve(&model.diff_t, grid, &star_t, tau, ex_t.as_ref().map(|(b, f)| (*b, f)), es)?;
        let star_q = advance(&state.q, &eq);
        let ex_q = explicit_of(&state.q);
        let new_q = implicit_solve(&model.diff_q, grid, &star_q, tau, ex_q.as_ref().map(|(b, f)| (*b, f)), es)?;

        let mut vel = VectorField2 { u: advance(&state.v.u, &ev.u), v: advance(&state.v.v, &ev.v) };
        for (comp, prev) in [(&mut vel.u, &state.v.u), (&mut vel.v, &state.v.v)] {
            let ex = explicit_of(prev);
            *comp = implicit_solve(&model.diff_v, grid, comp, tau, ex.as_ref().map(|(b, f)| (*b, f)), es)?;
        }
        let proj = project_barotropic_with_potential(&vel, grid, es)?;
        let phi_s = proj.potential.map(|x| x / dt);

        let next = State {
            t: state.t + dt,
            v: proj.v,
            temp: model.to_temperature(&new_temp),
            q: new_q,
        };
        next.check_finite()?;
        self.previous = Some((tend.explicit_v.clone(), tend.explicit_temp.clone(), tend.explicit_q.clone()));
        Ok((
            next,
            StepInfo {
                tendencies: tend,
                phi_s,
                cfl_limit: limit,
                projection_iterations: proj.stats.iterations,
            },
        ))
    }
}

/// One step from scratch (no multistep history).
pub fn step(state: &State, dt: f64, model: &Model) -> Result<State> {
    Ok(Stepper::new(model.clone()).step(state, dt)?.0)
}

/// Hook invoked by [`run`] after every step.
pub trait Observer {
    fn start(&mut self, _state: &State, _model: &Model) -> Result<()> {
        Ok(())
    }

    fn observe(&mut self, step: usize, state: &State, info: &StepInfo, model: &Model) -> Result<()>;

    /// Called once at the end, also after a failed step.
    fn finish(&mut self, _state: &State, _model: &Model, _failed: bool) -> Result<()> {
        Ok(())
    }
}

/// Steps `initial` with the configured `dt` until `t1`, calling every observer.
/// `observe` receives the state *after* step `n` together with the tendencies
/// of the state before it.
pub fn run(initial: &State, model: &Model, observers: &mut [&mut dyn Observer]) -> Result<State> {
    initial.check(&model.grid)?;
    for o in observers.iter_mut() {
        o.start(initial, model)?;
    }
    let steps = if model.params.t1 <= 0.0 { 0 } else { model.params.steps() };
    let mut stepper = Stepper::new(model.clone());
    let mut state = initial.clone();
    for n in 0..steps {
        let dt = model.params.dt.min(model.params.t1 - state.t).max(model.params.dt * 1e-12);
        match stepper.step(&state, dt) {
            Ok((next, info)) => {
                state = next;
                for o in observers.iter_mut() {
                    o.observe(n + 1, &state, &info, model)?;
                }
            }
            Err(e) => {
                for o in observers.iter_mut() {
                    o.finish(&state, model, true)?;
                }
                return Err(e);
            }
        }
    }
    for o in observers.iter_mut() {
        o.finish(&state, model, false)?;
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::l2_norm;
    use crate::params::SimParams;
    use std::f64::consts::PI;

    fn params(nx: usize, np: usize) -> SimParams {
        SimParams { nx, ny: nx, np, dt: 600.0, t1: 6000.0, ..SimParams::default() }
    }

    /// Rest state with smooth horizontally varying humidity below saturation
    /// and a temperature depending on `p` only: a linear diffusion problem.
    fn diffusion_state(m: &Model) -> State {
        let g = &m.grid;
        let qs = m.params.constants.q_sat;
        let mut s = State::zeros(g);
        s.temp = ScalarField::from_fn(g, Staggering::Cell, |_, _, p| 250.0 + 50.0 * (p - g.p0) / (g.p1 - g.p0));
        s.q = ScalarField::from_fn(g, Staggering::Cell, |x, y, p| {
            qs * (0.5 + 0.2 * (PI * x / g.lx).cos() * (PI * y / g.ly).cos() * (PI * (p - g.p0) / (g.p1 - g.p0)).cos())
        });
        s
    }

    #[test]
    fn zero_state_stays_zero() {
        let m = Model::new(&params(6, 5)).unwrap();
        let s = State::zeros(&m.grid);
        let mut st = Stepper::new(m);
        let (next, _) = st.step(&s, 60.0).unwrap();
        assert_eq!(next.v.u.max_abs() + next.v.v.max_abs() + next.temp.max_abs() + next.q.max_abs(), 0.0);
        assert_eq!(next.t, 60.0);
    }

    #[test]
    fn pure_diffusion_is_nonincreasing() {
        let mut p = params(8, 6);
        for c in [&mut p.coeffs.velocity, &mut p.coeffs.temperature, &mut p.coeffs.humidity] {
            c.alpha = 0.0;
        }
        for form in [TemperatureForm::Temperature, TemperatureForm::Theta] {
            p.scheme.form = form;
            let m = Model::new(&p).unwrap();
            let mut s = diffusion_state(&m);
            let mut st = Stepper::new(m.clone());
            let mut last = (l2_norm(&s.temp, &m.grid).unwrap(), l2_norm(&s.q, &m.grid).unwrap());
            for _ in 0..10 {
                s = st.step(&s, 600.0).unwrap().0;
                let now = (l2_norm(&s.temp, &m.grid).unwrap(), l2_norm(&s.q, &m.grid).unwrap());
                assert!(now.1 <= last.1 * (1.0 + 1e-14));
                if form == TemperatureForm::Temperature {
                    assert!(now.0 <= last.0 * (1.0 + 1e-14));
                }
                last = now;
            }
        }
    }

    #[test]
    fn cfl_violation_is_an_error() {
        let m = Model::new(&params(8, 6)).unwrap();
        let mut s = diffusion_state(&m);
        s.v.u = ScalarField::from_fn(&m.grid, Staggering::XFace, |_, _, p| 50.0 * (p - 6e4) / 4e4);
        s.v.zero_normal_boundary();
        let limit = m.cfl_limit(&s).unwrap();
        assert!(limit.is_finite());
        match Stepper::new(m.clone()).step(&s, 1.01 * limit) {
            Err(Error::Cfl { dt, limit: l }) => assert!(dt > l),
            other => panic!("expected CFL error, got {other:?}"),
        }
        assert!(Stepper::new(m).step(&s, 0.5 * limit).is_ok());
    }

    fn richardson_ratio(weight: f64) -> f64 {
        let mut p = params(8, 6);
        p.scheme.implicit_weight = weight;
        let m = Model::new(&p).unwrap();
        let s0 = diffusion_state(&m);
        let total = 8.0 * 3600.0;
        let solve = |n: usize| {
            let mut st = Stepper::new(m.clone());
            let mut s = s0.clone();
            for _ in 0..n {
                s = st.step(&s, total / n as f64).unwrap().0;
            }
            s.q
        };
        let (a, b, c) = (solve(4), solve(8), solve(16));
        let d1 = l2_norm(&a.zip_map(&b, |x, y| x - y), &m.grid).unwrap();
        let d2 = l2_norm(&b.zip_map(&c, |x, y| x - y), &m.grid).unwrap();
        d1 / d2
    }

    #[test]
    fn backward_euler_is_first_order() {
        let r = richardson_ratio(1.0);
        assert!((r - 2.0).abs() < 0.3, "ratio {r}");
    }

    #[test]
    fn crank_nicolson_is_second_order() {
        let r = richardson_ratio(0.5);
        assert!((r - 4.0).abs() < 0.6, "ratio {r}");
    }

    #[test]
    fn run_with_zero_end_time_returns_initial() {
        let mut p = params(6, 5);
        p.t1 = 0.0;
        let m = Model::new(&p).unwrap();
        let s = diffusion_state(&m);
        let out = run(&s, &m, &mut []).unwrap();
        assert_eq!(out.q.data, s.q.data);
        assert_eq!(out.t, 0.0);
    }

    #[test]
    fn theta_and_t_forms_agree_on_short_runs() {
        let mut p = params(8, 6);
        p.dt = 60.0;
        p.t1 = 600.0;
        let mt = Model::new(&SimParams { scheme: crate::params::SchemeConfig { form: TemperatureForm::Temperature, ..p.scheme }, ..p.clone() }).unwrap();
        let mth = Model::new(&SimParams { scheme: crate::params::SchemeConfig { form: TemperatureForm::Theta, ..p.scheme }, ..p.clone() }).unwrap();
        let s = diffusion_state(&mt);
        let a = run(&s, &mt, &mut []).unwrap();
        let b = run(&s, &mth, &mut []).unwrap();
        let diff = a.temp.zip_map(&b.temp, |x, y| x - y).max_abs();
        let change = a.temp.zip_map(&s.temp, |x, y| x - y).max_abs();
        assert!(diff < 0.05 * change.max(1e-3), "diff {diff} change {change}");
    }
}
