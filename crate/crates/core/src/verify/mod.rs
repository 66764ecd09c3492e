//! Verification diagnostics: energy inequality, maximum principles, level-set
//! truncation, moist static energy, the `epsilon` sweep and manufactured solutions.

pub mod degiorgi;
pub mod energy;
pub mod mms;
pub mod moist_energy;
pub mod monitors;
pub mod sweep;

pub use degiorgi::{degiorgi_diagnostic, indicator_bound_violations, DeGiorgiTrace, TrajectoryRecorder};
pub use energy::{energy_sample, EnergyConstants, EnergyMonitor, EnergySample};
pub use mms::{manufactured_convergence, MmsTable, Study};
pub use moist_energy::{moist_energy_residual, MoistEnergyMonitor};
pub use monitors::{positivity_check, qbound_check, MaxPrincipleMonitor, Violation, TOL_POSITIVITY};
pub use sweep::{eps_sweep, halving_list, CauchyVerdict, EpsSweepReport, SweepConfig, VI_TRIALS};

use std::fmt::Write as _;

use crate::error::Result;
use crate::field::State;
use crate::params::TemperatureForm;
use crate::scenario::{initial_state, Scenario};
use crate::stepper::{run, Model, Observer};

/// Snapshot cadence of the temperature trajectory kept for the level-set diagnostic.
pub const DEGIORGI_EVERY: usize = 5;
pub const DEGIORGI_KMAX: usize = 20;

/// Everything the monitors collected along one run.
#[derive(Debug, Clone)]
pub struct VerificationReport {
    pub scenario: String,
    pub form: TemperatureForm,
    pub steps: usize,
    pub energy: Option<EnergyMonitor>,
    pub extrema: MaxPrincipleMonitor,
    pub moist: Option<MoistEnergyMonitor>,
    pub degiorgi: Option<DeGiorgiTrace>,
    /// Run failure, if any (monitors keep what they saw up to it).
    pub failure: Option<String>,
    pub final_state: Option<State>,
}

impl VerificationReport {
    /// Monitor violations (energy inequality, positivity, `q` bound).
    pub fn violations(&self) -> Vec<Violation> {
        let mut v: Vec<Violation> = self.extrema.violations.clone();
        if let Some(e) = &self.energy {
            for s in e.violations() {
                v.push(Violation {
                    monitor: "energy",
                    step: s.step,
                    t: s.t,
                    value: s.margin(),
                    message: format!("energy inequality margin {:.6e} (lhs {:.6e}, rhs {:.6e})", s.margin(), s.lhs, s.rhs),
                });
            }
        }
        v
    }

    pub fn passed(&self) -> bool {
        self.failure.is_none() && self.violations().is_empty()
    }

    /// One row per step.
    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "step,t,min_T,min_q,max_q,max_D_eps,energy,energy_lhs,energy_rhs,energy_margin,moist_residual\n",
        );
        for x in &self.extrema.samples {
            let e = self.energy.as_ref().and_then(|m| m.samples.iter().find(|e| e.step == x.step));
            let mr = self.moist.as_ref().and_then(|m| m.samples.iter().find(|e| e.step == x.step));
            let ef = |f: fn(&EnergySample) -> f64| e.map_or(String::new(), |e| format!("{:.17e}", f(e)));
            let _ = writeln!(
                s,
                "{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{},{},{},{},{}",
                x.step,
                x.t,
                x.min_t,
                x.min_q,
                x.max_q,
                x.max_d_eps,
                ef(EnergySample::energy),
                ef(|e| e.lhs),
                ef(|e| e.rhs),
                ef(EnergySample::margin),
                mr.map_or(String::new(), |m| format!("{:.6e}", m.residual)),
            );
        }
        s
    }

    /// Human-readable verdicts.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "scenario: {}", self.scenario);
        let _ = writeln!(s, "form: {}", match self.form { TemperatureForm::Theta => "theta", TemperatureForm::Temperature => "T" });
        let _ = writeln!(s, "steps: {}", self.steps);
        if let Some(f) = &self.failure {
            let _ = writeln!(s, "run failed: {f}");
        }
        if let Some(e) = &self.energy {
            let _ = writeln!(
                s,
                "energy: {} samples, {} violations, min margin {:.6e}, growth constant {:.6e}",
                e.samples.len(),
                e.violations().len(),
                e.min_margin(),
                e.constants.growth
            );
        }
        let x = &self.extrema;
        let min_t = x.samples.iter().map(|s| s.min_t).fold(f64::INFINITY, f64::min);
        let min_q = x.samples.iter().map(|s| s.min_q).fold(f64::INFINITY, f64::min);
        let max_q = x.samples.iter().map(|s| s.max_q).fold(f64::NEG_INFINITY, f64::max);
        let _ = writeln!(s, "positivity: min T {min_t:.6e}, min q {min_q:.6e}, {} violations", x.positivity_violations().count());
        if x.check_qbound {
            let _ = writeln!(
                s,
                "q bound: q0_max {:.6e}, max q {max_q:.6e}, {} violations, max q non-increasing: {}",
                x.q0_max,
                x.qbound_violations().count(),
                x.max_q_nonincreasing()
            );
        }
        let _ = writeln!(s, "condensation active: {}", !x.never_condensed());
        if let Some(m) = &self.moist {
            let _ = writeln!(s, "moist energy: max relative residual {:.3e}, uncancelled control {:.3e}", m.max_residual(), m.max_control());
        }
        if let Some(d) = &self.degiorgi {
            let _ = writeln!(
                s,
                "level sets: M {:.6e}, Q_0 {:.6e}, verdict {}, certified at k = {}",
                d.m_cap,
                d.q[0],
                d.verdict(),
                d.certified_at.map_or("-".into(), |k| k.to_string())
            );
        }
        for v in self.violations() {
            let _ = writeln!(s, "VIOLATION [{}] step {} t {:.3}: {}", v.monitor, v.step, v.t, v.message);
        }
        let _ = writeln!(s, "verdict: {}", if self.passed() { "PASS" } else { "FAIL" });
        s
    }
}

/// Runs `scenario` once with every monitor that applies to the model's form.
/// The `q` bound is checked only when it is expected to hold (`S_q = 0` and `F+`).
pub fn verify_scenario(model: &Model, scenario: Scenario) -> Result<VerificationReport> {
    let initial = initial_state(scenario, model)?;
    verify_state(model, &initial, scenario.name())
}

pub fn verify_state(model: &Model, initial: &State, name: &str) -> Result<VerificationReport> {
    let qbound = model.params.forcing.humidity.is_zero() && model.params.use_f_plus;
    let mut extrema = MaxPrincipleMonitor::new(qbound);
    let mut energy = match model.form {
        TemperatureForm::Theta => Some(EnergyMonitor::new(model)?),
        TemperatureForm::Temperature => None,
    };
    let mut moist = match model.form {
        TemperatureForm::Temperature => Some(MoistEnergyMonitor::new(model)?),
        TemperatureForm::Theta => None,
    };
    let mut traj = TrajectoryRecorder::new(DEGIORGI_EVERY, true, false);
    let result = {
        let mut obs: Vec<&mut dyn Observer> = vec![&mut extrema, &mut traj];
        if let Some(e) = energy.as_mut() {
            obs.push(e);
        }
        if let Some(m) = moist.as_mut() {
            obs.push(m);
        }
        run(initial, model, &mut obs)
    };
    let degiorgi = if traj.len() >= 2 {
        let max_t = traj.temps.iter().map(|t| t.max()).fold(f64::NEG_INFINITY, f64::max);
        let cap = 4.0 * max_t;
        if cap > 0.0 {
            Some(degiorgi_diagnostic(&traj.times, &traj.temps, model, cap, DEGIORGI_KMAX)?)
        } else {
            None
        }
    } else {
        None
    };
    let (failure, final_state) = match result {
        Ok(s) => (None, Some(s)),
        Err(e) => (Some(e.to_string()), None),
    };
    Ok(VerificationReport {
        scenario: name.to_string(),
        form: model.form,
        steps: extrema.samples.len().saturating_sub(1),
        energy,
        extrema,
        moist,
        degiorgi,
        failure,
        final_state,
    })
}
