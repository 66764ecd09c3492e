//! Moist static energy `e = c_p T + L q`.
//!
//! The condensation source enters the `T` and `q` equations with opposite
//! signs and weights `L/c_p` and `-1`, so `e` obeys an equation without it:
//!
//! ```text
//! de/dt + transport(e) = w(p) omega (e - L q) - A_T e + L (A_T - A_q) q + c_p S_T + L S_q
//! ```
//!
//! with `w(p)` the weight of the `omega T` term. The residual steps `e` with
//! its own equation, using the same discrete operators as the stepper, and
//! compares with `c_p T + L q` of the stepped state. It must be at roundoff level for every `epsilon`.

use crate::error::{Error, Result};
use crate::field::{l2_norm, ScalarField, State};
use crate::operators::advection::{upwind_tendency, Fluxes};
use crate::operators::forms::omega_t_tendency;
use crate::params::TemperatureForm;
use crate::stepper::{implicit_solve, Model, Observer, StepInfo, TendencySet};

fn moist_energy(state: &State, model: &Model) -> ScalarField {
    let c = &model.params.constants;
    state.temp.zip_map(&state.q, |t, q| c.c_p * t + c.latent * q)
}

/// Explicit tendency of `e` (no condensation term).
fn explicit_e_tendency(state: &State, tend: &TendencySet, model: &Model) -> Result<ScalarField> {
    let g = &model.grid;
    let c = &model.params.constants;
    let e = moist_energy(state, model);
    let fl = Fluxes::new(&state.v, &tend.omega, g)?;
    let mut out = upwind_tendency(&fl, &e, g)?;
    // c_p w(p) omega T with T recovered from e and q.
    let t_of_e = e.zip_map(&state.q, |e, q| (e - c.latent * q) / c.c_p);
    let heat = omega_t_tendency(&tend.omega, &t_of_e, g, c, model.params.scheme.omega_t_weight)?;
    for (m, o) in out.data.iter_mut().enumerate() {
        *o += c.c_p * heat.data[m] + c.c_p * tend.forcing_temp.data[m] + c.latent * tend.forcing_q.data[m];
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoistEnergySample {
    pub step: usize,
    pub t: f64,
    /// `|e_indep - (c_p T + L q)| / |c_p T + L q|` after the step.
    pub residual: f64,
    /// `dt L |D_eps| / |e|`: what an uncancelled condensation term would leave.
    pub control: f64,
}

fn residual_from(
    prev: &State,
    next: &State,
    tend: &TendencySet,
    g_explicit: &ScalarField,
    dt: f64,
    model: &Model,
) -> Result<(f64, f64)> {
    if model.form != TemperatureForm::Temperature {
        return Err(Error::Validation("moist-energy residual requires the T form".into()));
    }
    let g = &model.grid;
    let c = &model.params.constants;
    let w = model.settings.implicit_weight;
    let (tau, beta) = (w * dt, (1.0 - w) * dt);
    let e_prev = moist_energy(prev, model);
    let e_next = moist_energy(next, model);

    let weights = g.layout(e_prev.stag).weights();
    let k_t_e = model.diff_t.stiffness(g, &e_prev)?;
    let mix = prev.q.zip_map(&next.q, |a, b| beta * a + tau * b);
    let k_t_q = model.diff_t.stiffness(g, &mix)?;
    let k_q_q = model.diff_q.stiffness(g, &mix)?;
    let mut rhs = e_prev.zip_map(g_explicit, |e, t| e + dt * t);
    for (m, r) in rhs.data.iter_mut().enumerate() {
        *r += (-beta * k_t_e[m] + c.latent * (k_t_q[m] - k_q_q[m])) / weights[m];
    }
    let e_indep = implicit_solve(&model.diff_t, g, &rhs, tau, None, &model.settings.elliptic)?;
    let scale = l2_norm(&e_next, g)?;
    let diff = l2_norm(&e_indep.zip_map(&e_next, |a, b| a - b), g)?;
    let control = dt * c.latent * l2_norm(&tend.d_eps, g)?;
    if scale == 0.0 {
        return Ok((diff, control));
    }
    Ok((diff / scale, control / scale))
}

/// Residual of one backward-Euler (or first Crank-Nicolson) step from
/// `prev` to `next`.
pub fn moist_energy_residual(prev: &State, next: &State, model: &Model) -> Result<f64> {
    let tend = crate::stepper::assemble_tendencies(prev, model)?;
    let g_explicit = explicit_e_tendency(prev, &tend, model)?;
    Ok(residual_from(prev, next, &tend, &g_explicit, next.t - prev.t, model)?.0)
}

/// Observer evaluating the residual after every step.
#[derive(Debug, Clone, Default)]
pub struct MoistEnergyMonitor {
    pub samples: Vec<MoistEnergySample>,
    previous: Option<State>,
    previous_tendency: Option<ScalarField>,
}

impl MoistEnergyMonitor {
    pub fn new(model: &Model) -> Result<Self> {
        if model.form != TemperatureForm::Temperature {
            return Err(Error::Validation("moist-energy residual requires the T form".into()));
        }
        Ok(Self::default())
    }

    pub fn max_residual(&self) -> f64 {
        self.samples.iter().map(|s| s.residual).fold(0.0, f64::max)
    }

    pub fn max_control(&self) -> f64 {
        self.samples.iter().map(|s| s.control).fold(0.0, f64::max)
    }
}

impl Observer for MoistEnergyMonitor {
    fn start(&mut self, state: &State, _model: &Model) -> Result<()> {
        self.previous = Some(state.clone());
        self.previous_tendency = None;
        Ok(())
    }

    fn observe(&mut self, step: usize, state: &State, info: &StepInfo, model: &Model) -> Result<()> {
        let Some(prev) = self.previous.replace(state.clone()) else {
            return Ok(());
        };
        let now = explicit_e_tendency(&prev, &info.tendencies, model)?;
        let g_explicit = match (&self.previous_tendency, model.settings.implicit_weight == 0.5) {
            (Some(old), true) => now.zip_map(old, |a, b| 1.5 * a - 0.5 * b),
            _ => now.clone(),
        };
        let (residual, control) =
            residual_from(&prev, state, &info.tendencies, &g_explicit, state.t - prev.t, model)?;
        self.samples.push(MoistEnergySample { step, t: state.t, residual, control });
        self.previous_tendency = Some(now);
        Ok(())
    }
}
