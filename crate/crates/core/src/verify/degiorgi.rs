//! Level-set truncation diagnostic for the temperature.
//!
//! With levels `lambda_k = M (1 - 2^-k)` and `T_k = [T - lambda_k]+`,
//! `Q_k = sup_t |T_k|^2 + 2 kappa_T int ||T_k||^2 dt`. Decay of `Q_k` to zero
//! certifies `T <= M` along the stored trajectory.

use crate::error::{Error, Result};
use crate::field::{inner, ScalarField, State};
use crate::operators::diffusion::DiffusionOperator;
use crate::params::{kappa, Tracer};
use crate::stepper::{Model, Observer, StepInfo};

/// Relative floor below which `Q_k` counts as vanished.
pub const Q_FLOOR: f64 = 1e-12;

/// Stores selected fields of the trajectory every `every` steps, plus the
/// initial and the final state.
#[derive(Debug, Clone)]
pub struct TrajectoryRecorder {
    pub every: usize,
    pub keep_temp: bool,
    pub keep_q: bool,
    pub steps: Vec<usize>,
    pub times: Vec<f64>,
    pub temps: Vec<ScalarField>,
    pub qs: Vec<ScalarField>,
    last: Option<(usize, State)>,
}

impl TrajectoryRecorder {
    pub fn new(every: usize, keep_temp: bool, keep_q: bool) -> Self {
        Self {
            every: every.max(1),
            keep_temp,
            keep_q,
            steps: Vec::new(),
            times: Vec::new(),
            temps: Vec::new(),
            qs: Vec::new(),
            last: None,
        }
    }

    fn push(&mut self, step: usize, state: &State) {
        self.steps.push(step);
        self.times.push(state.t);
        if self.keep_temp {
            self.temps.push(state.temp.clone());
        }
        if self.keep_q {
            self.qs.push(state.q.clone());
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

impl Observer for TrajectoryRecorder {
    fn start(&mut self, state: &State, _model: &Model) -> Result<()> {
        self.push(0, state);
        Ok(())
    }

    fn observe(&mut self, step: usize, state: &State, _info: &StepInfo, _model: &Model) -> Result<()> {
        if step % self.every == 0 {
            self.push(step, state);
            self.last = None;
        } else {
            self.last = Some((step, state.clone()));
        }
        Ok(())
    }

    fn finish(&mut self, _state: &State, _model: &Model, _failed: bool) -> Result<()> {
        if let Some((step, s)) = self.last.take() {
            self.push(step, &s);
        }
        Ok(())
    }
}

/// `int_0^t f dt` by the trapezoid rule on the sample times.
pub fn trapezoid(times: &[f64], values: &[f64]) -> f64 {
    times
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeGiorgiTrace {
    pub m_cap: f64,
    /// `lambda_k`, `k = 0..=kmax`.
    pub levels: Vec<f64>,
    pub sup_part: Vec<f64>,
    pub integral_part: Vec<f64>,
    pub q: Vec<f64>,
    /// `M >= 2 max T(0)`.
    pub cap_admissible: bool,
    /// First `k` with `Q_k <= Q_FLOOR * Q_0`.
    pub certified_at: Option<usize>,
    /// Largest `C0` with `Q_{k+1} = (C0 / M^(1/3)) 4^(k+1) Q_k^(7/6)` over the
    /// pairs with both terms positive.
    pub fitted_c0: Option<f64>,
}

impl DeGiorgiTrace {
    pub fn nonincreasing(&self) -> bool {
        self.q.windows(2).all(|w| w[1] <= w[0])
    }

    pub fn certified(&self) -> bool {
        self.certified_at.is_some() && self.nonincreasing()
    }

    pub fn verdict(&self) -> &'static str {
        if self.certified() {
            "bounded below M"
        } else {
            "not certified"
        }
    }

    /// `k,lambda_k,Q_k` rows with a header.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,lambda_k,Q_k\n");
        for (k, (l, q)) in self.levels.iter().zip(&self.q).enumerate() {
            s.push_str(&format!("{k},{l:.17e},{q:.17e}\n"));
        }
        s
    }
}

/// `lambda_k = M (1 - 2^-k)`.
pub fn level(m_cap: f64, k: usize) -> f64 {
    m_cap * (1.0 - 0.5f64.powi(k as i32))
}

/// Computes `Q_0..=Q_kmax` from a stored temperature trajectory.
pub fn degiorgi_diagnostic(
    times: &[f64],
    temps: &[ScalarField],
    model: &Model,
    m_cap: f64,
    kmax: usize,
) -> Result<DeGiorgiTrace> {
    if times.len() < 2 || temps.len() != times.len() {
        return Err(Error::InsufficientTrajectory(format!(
            "{} times and {} temperature snapshots (need at least 2 of each, equal counts)",
            times.len(),
            temps.len()
        )));
    }
    if !(m_cap > 0.0) {
        return Err(Error::Validation(format!("M > 0 violated ({m_cap})")));
    }
    let g = &model.grid;
    let unit = DiffusionOperator::unit(g, &model.params.constants, &model.params.tbar);
    let kappa_t = kappa(Tracer::Temperature, &model.params.coeffs);
    let mut trace = DeGiorgiTrace {
        m_cap,
        levels: Vec::new(),
        sup_part: Vec::new(),
        integral_part: Vec::new(),
        q: Vec::new(),
        cap_admissible: m_cap >= 2.0 * temps[0].max(),
        certified_at: None,
        fitted_c0: None,
    };
    for k in 0..=kmax {
        let lam = level(m_cap, k);
        let mut sup: f64 = 0.0;
        let mut norms = Vec::with_capacity(temps.len());
        for t in temps {
            let tk = t.map(|x| (x - lam).max(0.0));
            sup = sup.max(inner(&tk, &tk, g)?);
            norms.push(unit.form(g, &tk, &tk)?);
        }
        let integral = trapezoid(times, &norms);
        trace.levels.push(lam);
        trace.sup_part.push(sup);
        trace.integral_part.push(integral);
        trace.q.push(sup + 2.0 * kappa_t * integral);
    }
    let q0 = trace.q[0];
    trace.certified_at = trace.q.iter().position(|&q| q <= Q_FLOOR * q0);
    trace.fitted_c0 = trace
        .q
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[0] > 0.0 && w[1] > 0.0)
        .map(|(k, w)| w[1] * m_cap.cbrt() / (4f64.powi(k as i32 + 1) * w[0].powf(7.0 / 6.0)))
        .reduce(f64::max);
    Ok(trace)
}

/// Counts cells violating `1{T_k > 0} <= (2^k / M) T_{k-1}` over all snapshots
/// and `1 <= k <= kmax`.
pub fn indicator_bound_violations(temps: &[ScalarField], m_cap: f64, kmax: usize) -> usize {
    let mut bad = 0;
    for t in temps {
        for k in 1..=kmax {
            let (lk, lprev) = (level(m_cap, k), level(m_cap, k - 1));
            let scale = 2f64.powi(k as i32) / m_cap;
            bad += t
                .data
                .iter()
                .filter(|&&x| x - lk > 0.0 && 1.0 > scale * (x - lprev).max(0.0))
                .count();
        }
    }
    bad
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Staggering;
    use crate::params::SimParams;

    fn model() -> Model {
        Model::new(&SimParams { nx: 4, ny: 4, np: 4, ..SimParams::default() }).unwrap()
    }

    #[test]
    fn constant_field_vanishes_above_first_level() {
        let m = model();
        let t = ScalarField::constant(&m.grid, Staggering::Cell, 300.0);
        let tr = degiorgi_diagnostic(&[0.0, 1.0, 2.0], &[t.clone(), t.clone(), t], &m, 600.0, 10).unwrap();
        assert!(tr.q[0] > 0.0);
        assert!(tr.q[1..].iter().all(|&q| q == 0.0));
        assert_eq!(tr.certified_at, Some(1));
        assert!(tr.certified() && tr.cap_admissible);
    }

    #[test]
    fn low_cap_is_not_certified() {
        let m = model();
        let t = ScalarField::constant(&m.grid, Staggering::Cell, 300.0);
        let tr = degiorgi_diagnostic(&[0.0, 1.0], &[t.clone(), t], &m, 250.0, 20).unwrap();
        assert!(tr.nonincreasing());
        assert!(!tr.certified());
        assert!(*tr.q.last().unwrap() > 0.0);
        assert_eq!(tr.verdict(), "not certified");
    }

    #[test]
    fn levels_increase_to_cap() {
        let l: Vec<f64> = (0..30).map(|k| level(8.0, k)).collect();
        assert!(l.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(l[0], 0.0);
        assert!(8.0 - l[29] < 1e-7);
    }

    #[test]
    fn short_trajectory_is_an_error() {
        let m = model();
        let t = ScalarField::constant(&m.grid, Staggering::Cell, 1.0);
        assert!(matches!(
            degiorgi_diagnostic(&[0.0], &[t], &m, 4.0, 3),
            Err(Error::InsufficientTrajectory(_))
        ));
    }

    #[test]
    fn indicator_bound_holds_for_ramp() {
        let m = model();
        let t = ScalarField::from_fn(&m.grid, Staggering::Cell, |x, y, _| 300.0 * x / m.grid.lx + 10.0 * y / m.grid.ly);
        assert_eq!(indicator_bound_violations(&[t], 400.0, 12), 0);
    }

    #[test]
    fn trapezoid_is_exact_for_linear() {
        assert!((trapezoid(&[0.0, 1.0, 3.0], &[0.0, 1.0, 3.0]) - 4.5).abs() < 1e-15);
    }
}
