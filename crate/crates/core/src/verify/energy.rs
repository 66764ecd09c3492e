//! Energy monitor for the potential-temperature form.
//!
//! Along a trajectory, with `E = |v|^2 + |theta|^2 + |q|^2` and `||.||` the
//! V-norm, every sample checks
//!
//! ```text
//! dE/dt + kappa (||v||^2 + ||theta||^2 + ||q||^2) <= C E + |S_v|^2 + |S_theta|^2 + |S_q|^2
//! ```
//!
//! where `dE/dt = 2 (v, v') + 2 (theta, theta') + 2 (q, q')` is evaluated from the
//! instantaneous tendencies and
//!
//! ```text
//! C = max(1, 2 C_m + 3 (C_ep^2 + K_theta^2 C_omega^2) / kappa_v + 1, 3 K_q^2 C_omega^2 / kappa_v + 1)
//! ```
//!
//! The column constants come from singular values of small `Np x Np` matrices:
//! `|Phi(T)| <= C_phi |T|`, `|omega| <= C_col |div v|` and `|div v|^2 <= 2 ||v||^2`
//! give `|e_p(T, v)| <= sqrt(2) C_phi sigma_max |theta| ||v||` and
//! `|omega| <= sqrt(2) C_col ||v||`. Condensation enters through
//! `|D| <= C_F |omega| / p`.
//! The surface-pressure gradient is orthogonal to admissible velocities and is
//! left out of `v'`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::field::{inner, State};
use crate::operators::diffusion::v_norm;
use crate::params::{kappa, TemperatureForm, Tracer};
use crate::stepper::{Model, Observer, StepInfo, TendencySet};

/// Largest singular value of `sqrt(W) A sqrt(W)^-1` (operator norm in the
/// weighted column inner product).
fn weighted_norm(a: &DMatrix<f64>, w: &[f64]) -> f64 {
    let n = w.len();
    let b = DMatrix::from_fn(n, n, |r, c| w[r].sqrt() * a[(r, c)] / w[c].sqrt());
    b.singular_values().max()
}

/// Column matrix of the baroclinic geopotential (trapezoid rule upwards from `p1`).
pub fn hydrostatic_column_matrix(model: &Model) -> DMatrix<f64> {
    let g = &model.grid;
    let r = model.params.constants.r_dry;
    let np = g.np;
    let mut h = DMatrix::zeros(np, np);
    for k in (0..np - 1).rev() {
        for c in 0..np {
            h[(k, c)] = h[(k + 1, c)];
        }
        h[(k, k)] += 0.5 * g.dp * r / g.p[k];
        h[(k, k + 1)] += 0.5 * g.dp * r / g.p[k + 1];
    }
    h
}

/// Column matrix from level divergences to `omega` averaged onto the levels.
pub fn omega_column_matrix(model: &Model) -> DMatrix<f64> {
    let g = &model.grid;
    let np = g.np;
    // half level k = sum_{k' >= k} wp[k'] d[k'], half level np = 0
    let half = DMatrix::from_fn(np + 1, np, |k, c| if c >= k { g.wp[c] } else { 0.0 });
    let avg = DMatrix::from_fn(np, np + 1, |k, c| if c == k || c == k + 1 { 0.5 } else { 0.0 });
    avg * half
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyConstants {
    pub kappa_v: f64,
    pub kappa_t: f64,
    pub kappa_q: f64,
    /// `min(kappa_v, kappa_T, kappa_q)`.
    pub kappa: f64,
    pub c_phi: f64,
    pub c_column: f64,
    pub sigma_max: f64,
    /// `|e_p(sigma theta, v)| <= c_ep |theta| ||v||`.
    pub c_ep: f64,
    /// `|omega at levels| <= c_omega ||v||`.
    pub c_omega: f64,
    /// `-m_theta(theta, theta) <= c_m |theta|^2`.
    pub c_m: f64,
    /// Bound on `|F|`.
    pub c_f: f64,
    pub k_theta: f64,
    pub k_q: f64,
    /// Growth constant `C`.
    pub growth: f64,
}

impl EnergyConstants {
    pub fn compute(model: &Model) -> Result<Self> {
        let g = &model.grid;
        let c = &model.params.constants;
        let coeffs = &model.params.coeffs;
        let (kappa_v, kappa_t, kappa_q) = (
            kappa(Tracer::Velocity, coeffs),
            kappa(Tracer::Temperature, coeffs),
            kappa(Tracer::Humidity, coeffs),
        );
        if !(kappa_v > 0.0 && kappa_t > 0.0 && kappa_q > 0.0) {
            return Err(Error::Validation("energy monitor needs kappa_v, kappa_T, kappa_q > 0".into()));
        }
        let c_phi = weighted_norm(&hydrostatic_column_matrix(model), &g.wp);
        let c_column = weighted_norm(&omega_column_matrix(model), &g.wp);
        let sigma_max = model.sigma.max();
        let c_ep = 2f64.sqrt() * c_phi * sigma_max;
        let c_omega = 2f64.sqrt() * c_column;
        let c_m = model.diff_t.m_theta_bound(g);
        let c_f = model.kernel.c_f_sup;
        // |D| <= C_F |omega| / p and p >= grid.p0.
        let k_q = c_f / g.p0;
        let k_theta = c.latent / c.c_p * k_q / model.sigma.min();
        let growth = 1f64
            .max(2.0 * c_m + 3.0 * (c_ep * c_ep + k_theta * k_theta * c_omega * c_omega) / kappa_v + 1.0)
            .max(3.0 * k_q * k_q * c_omega * c_omega / kappa_v + 1.0);
        Ok(Self {
            kappa_v,
            kappa_t,
            kappa_q,
            kappa: kappa_v.min(kappa_t).min(kappa_q),
            c_phi,
            c_column,
            sigma_max,
            c_ep,
            c_omega,
            c_m,
            c_f,
            k_theta,
            k_q,
            growth,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergySample {
    pub step: usize,
    pub t: f64,
    pub v_sq: f64,
    pub theta_sq: f64,
    pub q_sq: f64,
    pub v_norm_sq: f64,
    pub theta_norm_sq: f64,
    pub q_norm_sq: f64,
    pub a_v: f64,
    pub a_t: f64,
    pub a_q: f64,
    pub m_theta: f64,
    pub forcing_sq: f64,
    pub de_dt: f64,
    pub lhs: f64,
    pub rhs: f64,
}

impl EnergySample {
    pub fn energy(&self) -> f64 {
        self.v_sq + self.theta_sq + self.q_sq
    }

    /// `rhs - lhs`; negative means a violation.
    pub fn margin(&self) -> f64 {
        self.rhs - self.lhs
    }

    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs
    }

    pub fn is_finite(&self) -> bool {
        [
            self.v_sq,
            self.theta_sq,
            self.q_sq,
            self.v_norm_sq,
            self.theta_norm_sq,
            self.q_norm_sq,
            self.a_v,
            self.a_t,
            self.a_q,
            self.m_theta,
            self.de_dt,
            self.lhs,
            self.rhs,
        ]
        .iter()
        .all(|x| x.is_finite())
    }
}

/// Evaluates the inequality for `state` with its tendencies `tend`.
pub fn energy_sample(
    state: &State,
    tend: &TendencySet,
    model: &Model,
    consts: &EnergyConstants,
    step: usize,
) -> Result<EnergySample> {
    if model.form != TemperatureForm::Theta {
        return Err(Error::Validation("energy monitor requires the theta form".into()));
    }
    let g = &model.grid;
    let c = &model.params.constants;
    let tbar = &model.params.tbar;
    let theta = model.prognostic_temp(state);
    let norm_sq = |n: f64| n * n;

    let v_sq = inner(&state.v, &state.v, g)?;
    let theta_sq = inner(&theta, &theta, g)?;
    let q_sq = inner(&state.q, &state.q, g)?;
    let v_norm_sq = norm_sq(v_norm(&state.v, g, c, tbar)?);
    let theta_norm_sq = norm_sq(v_norm(&theta, g, c, tbar)?);
    let q_norm_sq = norm_sq(v_norm(&state.q, g, c, tbar)?);

    let mut dv = tend.explicit_v.clone();
    for (a, b) in [(&mut dv.u, &tend.implicit_v.u), (&mut dv.v, &tend.implicit_v.v)] {
        for (x, y) in a.data.iter_mut().zip(&b.data) {
            *x += y;
        }
    }
    let dtheta = tend.explicit_temp.zip_map(&tend.implicit_temp, |a, b| a + b);
    let dq = tend.explicit_q.zip_map(&tend.implicit_q, |a, b| a + b);
    let de_dt = 2.0 * (inner(&state.v, &dv, g)? + inner(&theta, &dtheta, g)? + inner(&state.q, &dq, g)?);

    let forcing_sq = inner(&tend.forcing_v, &tend.forcing_v, g)?
        + inner(&tend.forcing_temp, &tend.forcing_temp, g)?
        + inner(&tend.forcing_q, &tend.forcing_q, g)?;
    let lhs = de_dt + consts.kappa * (v_norm_sq + theta_norm_sq + q_norm_sq);
    let rhs = consts.growth * (v_sq + theta_sq + q_sq) + forcing_sq;
    Ok(EnergySample {
        step,
        t: state.t,
        v_sq,
        theta_sq,
        q_sq,
        v_norm_sq,
        theta_norm_sq,
        q_norm_sq,
        a_v: model.diff_v.form(g, &state.v, &state.v)?,
        a_t: model.diff_t.form(g, &theta, &theta)?,
        a_q: model.diff_q.form(g, &state.q, &state.q)?,
        m_theta: model.diff_t.form_m_theta(g, &theta, &theta)?,
        forcing_sq,
        de_dt,
        lhs,
        rhs,
    })
}

/// Observer collecting one [`EnergySample`] per step (for the state at the
/// start of the step).
#[derive(Debug, Clone)]
pub struct EnergyMonitor {
    pub constants: EnergyConstants,
    pub samples: Vec<EnergySample>,
    previous: Option<State>,
}

impl EnergyMonitor {
    pub fn new(model: &Model) -> Result<Self> {
        if model.form != TemperatureForm::Theta {
            return Err(Error::Validation("energy monitor requires the theta form".into()));
        }
        Ok(Self { constants: EnergyConstants::compute(model)?, samples: Vec::new(), previous: None })
    }

    pub fn violations(&self) -> Vec<&EnergySample> {
        self.samples.iter().filter(|s| !s.holds() || !s.is_finite()).collect()
    }

    pub fn all_finite(&self) -> bool {
        self.samples.iter().all(EnergySample::is_finite)
    }

    /// Smallest `rhs - lhs` over the samples.
    pub fn min_margin(&self) -> f64 {
        self.samples.iter().map(EnergySample::margin).fold(f64::INFINITY, f64::min)
    }
}

impl Observer for EnergyMonitor {
    fn start(&mut self, state: &State, _model: &Model) -> Result<()> {
        self.previous = Some(state.clone());
        Ok(())
    }

    fn observe(&mut self, step: usize, state: &State, info: &StepInfo, model: &Model) -> Result<()> {
        if let Some(prev) = self.previous.replace(state.clone()) {
            let s = energy_sample(&prev, &info.tendencies, model, &self.constants, step - 1)?;
            self.samples.push(s);
        }
        Ok(())
    }
}
