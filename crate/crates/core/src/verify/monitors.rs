//! Maximum-principle monitors.

use crate::error::Result;
use crate::field::State;
use crate::stepper::{Model, Observer, StepInfo};

/// Absolute tolerance of the positivity and upper-bound checks.
pub const TOL_POSITIVITY: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub monitor: &'static str,
    pub step: usize,
    pub t: f64,
    pub value: f64,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtremaSample {
    pub step: usize,
    pub t: f64,
    pub min_t: f64,
    pub min_q: f64,
    pub max_q: f64,
    /// Largest `|D_eps|` in the tendencies of the previous state.
    pub max_d_eps: f64,
}

/// `min T` and `min q` of a state; violations below `-tol`.
pub fn positivity_check(state: &State, step: usize, tol: f64) -> Vec<Violation> {
    let mut out = Vec::new();
    for (name, min) in [("T", state.temp.min()), ("q", state.q.min())] {
        if !(min >= -tol) {
            out.push(Violation {
                monitor: "positivity",
                step,
                t: state.t,
                value: min,
                message: format!("min({name}) = {min:.6e} below -{tol:.1e}"),
            });
        }
    }
    out
}

/// `max q - q0_max`; violation above `tol`.
pub fn qbound_check(state: &State, q0_max: f64, step: usize, tol: f64) -> Option<Violation> {
    let excess = state.q.max() - q0_max;
    (!(excess <= tol)).then(|| Violation {
        monitor: "qbound",
        step,
        t: state.t,
        value: excess,
        message: format!("max(q) exceeds the initial maximum by {excess:.6e}"),
    })
}

/// Observer running the positivity and `q`-bound checks after every step
/// (and on the initial state).
#[derive(Debug, Clone)]
pub struct MaxPrincipleMonitor {
    pub tol: f64,
    pub check_qbound: bool,
    pub q0_max: f64,
    pub samples: Vec<ExtremaSample>,
    pub violations: Vec<Violation>,
}

impl MaxPrincipleMonitor {
    pub fn new(check_qbound: bool) -> Self {
        Self { tol: TOL_POSITIVITY, check_qbound, q0_max: f64::NAN, samples: Vec::new(), violations: Vec::new() }
    }

    fn record(&mut self, step: usize, state: &State, max_d_eps: f64) {
        self.samples.push(ExtremaSample {
            step,
            t: state.t,
            min_t: state.temp.min(),
            min_q: state.q.min(),
            max_q: state.q.max(),
            max_d_eps,
        });
        self.violations.extend(positivity_check(state, step, self.tol));
        if self.check_qbound {
            self.violations.extend(qbound_check(state, self.q0_max, step, self.tol));
        }
    }

    pub fn positivity_violations(&self) -> impl Iterator<Item = &Violation> {
        self.violations.iter().filter(|v| v.monitor == "positivity")
    }

    pub fn qbound_violations(&self) -> impl Iterator<Item = &Violation> {
        self.violations.iter().filter(|v| v.monitor == "qbound")
    }

    /// True if `max q` never increased from one sample to the next.
    pub fn max_q_nonincreasing(&self) -> bool {
        self.samples.windows(2).all(|w| w[1].max_q <= w[0].max_q)
    }

    /// True if the condensation source vanished identically at every step.
    pub fn never_condensed(&self) -> bool {
        self.samples.iter().all(|s| s.max_d_eps == 0.0)
    }
}

impl Observer for MaxPrincipleMonitor {
    fn start(&mut self, state: &State, _model: &Model) -> Result<()> {
        self.q0_max = state.q.max();
        self.record(0, state, 0.0);
        Ok(())
    }

    fn observe(&mut self, step: usize, state: &State, info: &StepInfo, _model: &Model) -> Result<()> {
        self.record(step, state, info.tendencies.d_eps.max_abs());
        Ok(())
    }
}
