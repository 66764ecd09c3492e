//! Convergence study in the regularization parameter.

use std::fmt;

use crate::error::{Error, Result};
use crate::field::{inner, ScalarField};
use crate::saturation::vi_residual;
use crate::scenario::{initial_state, Scenario};
use crate::stepper::{run, Model, Observer};
use crate::verify::degiorgi::{trapezoid, TrajectoryRecorder};
use crate::verify::moist_energy::MoistEnergyMonitor;

/// Default number of random test fields in the VI residual.
pub const VI_TRIALS: usize = 256;

#[derive(Debug, Clone)]
pub struct SweepConfig {
    /// Base model; members differ only in `epsilon` (which also enters the
    /// scenario's initial humidity).
    pub model: Model,
    pub scenario: Scenario,
    /// Strictly decreasing.
    pub eps_list: Vec<f64>,
    pub threads: usize,
    pub seed: u64,
    pub vi_trials: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CauchyVerdict {
    Cauchy,
    NotCauchy,
    NotApplicable,
}

impl fmt::Display for CauchyVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CauchyVerdict::Cauchy => "Cauchy",
            CauchyVerdict::NotCauchy => "not Cauchy",
            CauchyVerdict::NotApplicable => "Cauchy: n/a",
        })
    }
}

#[derive(Debug, Clone)]
pub struct SweepMember {
    pub epsilon: f64,
    /// `None` when the run failed.
    pub error: Option<String>,
    pub times: Vec<f64>,
    pub q: Vec<ScalarField>,
    pub vi_residual: f64,
    /// Largest relative moist-energy residual (T form only).
    pub moist_residual: Option<f64>,
    pub moist_control: Option<f64>,
    pub final_max_q: f64,
}

#[derive(Debug, Clone)]
pub struct EpsSweepReport {
    pub eps: Vec<f64>,
    pub members: Vec<SweepMember>,
    /// `|q^eps_i - q^eps_{i+1}|` in `L2(0, t; L2)`.
    pub distances: Vec<f64>,
    pub verdict: CauchyVerdict,
}

impl EpsSweepReport {
    pub fn strictly_decreasing(&self) -> bool {
        self.distances.windows(2).all(|w| w[1] < w[0])
    }

    /// VI residual at the smallest `epsilon`.
    pub fn final_vi_residual(&self) -> f64 {
        self.members.last().map_or(f64::NAN, |m| m.vi_residual)
    }

    /// `max - min` of the moist-energy residuals over the members.
    pub fn moist_spread(&self) -> Option<f64> {
        let r: Option<Vec<f64>> = self.members.iter().map(|m| m.moist_residual).collect();
        let r = r?;
        let max = r.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = r.iter().cloned().fold(f64::INFINITY, f64::min);
        Some(max - min)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("epsilon,distance_to_next,vi_residual,moist_residual,moist_control,final_max_q,status\n");
        for (i, m) in self.members.iter().enumerate() {
            let d = self.distances.get(i).map_or(String::new(), |d| format!("{d:.17e}"));
            let opt = |x: Option<f64>| x.map_or(String::new(), |v| format!("{v:.6e}"));
            s.push_str(&format!(
                "{:.6e},{d},{:.6e},{},{},{:.17e},{}\n",
                m.epsilon,
                m.vi_residual,
                opt(m.moist_residual),
                opt(m.moist_control),
                m.final_max_q,
                m.error.as_deref().unwrap_or("ok").replace(',', ";"),
            ));
        }
        s
    }
}

fn run_member(cfg: &SweepConfig, epsilon: f64, seed: u64) -> Result<SweepMember> {
    let model = cfg.model.with_epsilon(epsilon)?;
    let initial = initial_state(cfg.scenario, &model)?;
    let mut traj = TrajectoryRecorder::new(1, false, true);
    let mut moist = MoistEnergyMonitor::new(&model).ok();
    let result = {
        let mut obs: Vec<&mut dyn Observer> = vec![&mut traj];
        if let Some(m) = moist.as_mut() {
            obs.push(m);
        }
        run(&initial, &model, &mut obs)
    };
    let (error, vi, max_q) = match &result {
        Ok(fin) => {
            let h = model.kernel.extract_h_q(&fin.q);
            let vi = vi_residual(&fin.q, &h, model.params.constants.q_sat, cfg.vi_trials, &model.grid, seed)?;
            (None, vi, fin.q.max())
        }
        Err(e) => (Some(e.to_string()), f64::NAN, f64::NAN),
    };
    Ok(SweepMember {
        epsilon,
        error,
        times: traj.times,
        q: traj.qs,
        vi_residual: vi,
        moist_residual: moist.as_ref().map(MoistEnergyMonitor::max_residual),
        moist_control: moist.as_ref().map(MoistEnergyMonitor::max_control),
        final_max_q: max_q,
    })
}

fn distance(a: &SweepMember, b: &SweepMember, model: &Model) -> Result<f64> {
    if a.error.is_some() || b.error.is_some() || a.times != b.times {
        return Ok(f64::NAN);
    }
    let sq: Result<Vec<f64>> = a
        .q
        .iter()
        .zip(&b.q)
        .map(|(x, y)| {
            let d = x.zip_map(y, |u, v| u - v);
            inner(&d, &d, &model.grid)
        })
        .collect();
    Ok(trapezoid(&a.times, &sq?).sqrt())
}

/// Runs every member (concurrently with `threads` workers) and compares
/// consecutive trajectories. Identical members count as Cauchy.
pub fn eps_sweep(cfg: &SweepConfig) -> Result<EpsSweepReport> {
    if cfg.eps_list.is_empty() {
        return Err(Error::Validation("empty epsilon list".into()));
    }
    if cfg.eps_list.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Validation("epsilon list strictly decreasing violated".into()));
    }
    let n = cfg.eps_list.len();
    let threads = cfg.threads.clamp(1, n);
    let mut slots: Vec<Option<Result<SweepMember>>> = (0..n).map(|_| None).collect();
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..threads)
            .map(|w| {
                scope.spawn(move || {
                    (w..n)
                        .step_by(threads)
                        .map(|i| (i, run_member(cfg, cfg.eps_list[i], cfg.seed)))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            for (i, r) in h.join().expect("sweep worker panicked") {
                slots[i] = Some(r);
            }
        }
    });
    let members: Vec<SweepMember> = slots.into_iter().map(|s| s.expect("member not run")).collect::<Result<_>>()?;
    let distances = members
        .windows(2)
        .map(|w| distance(&w[0], &w[1], &cfg.model))
        .collect::<Result<Vec<_>>>()?;
    let verdict = if distances.len() < 2 {
        CauchyVerdict::NotApplicable
    } else if distances.iter().all(|d| d.is_finite())
        && (distances.windows(2).all(|w| w[1] < w[0]) || distances.iter().all(|&d| d == 0.0))
    {
        CauchyVerdict::Cauchy
    } else {
        CauchyVerdict::NotCauchy
    };
    Ok(EpsSweepReport { eps: cfg.eps_list.clone(), members, distances, verdict })
}

/// `eps, eps/2, ..., eps/2^(n-1)`.
pub fn halving_list(eps: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| eps * 0.5f64.powi(k as i32)).collect()
}
