//! Named initial conditions.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::field::{ScalarField, State, VectorField2};
use crate::grid::Staggering;
use crate::operators::elliptic::project_barotropic;
use crate::stepper::Model;

/// Uniform initial temperature of all scenarios (K).
pub const T_INITIAL: f64 = 300.0;
/// Peak horizontal speed of the updraft circulation (m/s).
pub const UPDRAFT_SPEED: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    /// Convergent circulation below, divergent aloft; the column is supersaturated.
    SaturatedUpdraft,
    /// Same circulation with `q < q_s` everywhere.
    UnderSaturated,
    /// `v = 0`, uniform `T` and `q = q_s / 2`.
    Rest,
    /// Rest state with one negative temperature cell (monitor self-test).
    NegativeTemperature,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [
        Scenario::SaturatedUpdraft,
        Scenario::UnderSaturated,
        Scenario::Rest,
        Scenario::NegativeTemperature,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::SaturatedUpdraft => "saturated-updraft",
            Scenario::UnderSaturated => "under-saturated",
            Scenario::Rest => "rest",
            Scenario::NegativeTemperature => "negative-t0",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Scenario::ALL.iter().map(|c| c.name()).collect();
                Error::Validation(format!("unknown scenario `{s}` (expected one of {})", names.join(", ")))
            })
    }
}

/// `s(p) * grad(psi)` with `psi = -A exp(-r^2 / w^2)` centered in the box and
/// `s(p) = cos(pi (p - p0) / (p1 - p0))`: inflow near `p1`, outflow near `p0`,
/// hence `omega < 0` in the column.
pub fn updraft_velocity(model: &Model) -> Result<VectorField2> {
    let g = &model.grid;
    let (xc, yc) = (0.5 * g.lx, 0.5 * g.ly);
    let w = column_radius(model);
    // max |grad psi| = A sqrt(2) e^(-1/2) / w
    let amp = UPDRAFT_SPEED * w / (2f64.sqrt() * (-0.5f64).exp());
    let s = |p: f64| (PI * (p - g.p0) / (g.p1 - g.p0)).cos();
    let dpsi = move |d: f64, r2: f64| amp * 2.0 * d / (w * w) * (-r2 / (w * w)).exp();
    let mut v = VectorField2::from_fn(
        g,
        |x, y, p| {
            let (ddx, ddy) = (x - xc, y - yc);
            s(p) * dpsi(ddx, ddx * ddx + ddy * ddy)
        },
        |x, y, p| {
            let (ddx, ddy) = (x - xc, y - yc);
            s(p) * dpsi(ddy, ddx * ddx + ddy * ddy)
        },
    );
    v.zero_normal_boundary();
    project_barotropic(&v, g, &model.settings.elliptic)
}

/// Radius of the moist column and width of the circulation: `Lx / 8`.
pub fn column_radius(model: &Model) -> f64 {
    model.grid.lx / 8.0
}

fn in_column(model: &Model, x: f64, y: f64) -> bool {
    let (dx, dy) = (x - 0.5 * model.grid.lx, y - 0.5 * model.grid.ly);
    (dx * dx + dy * dy).sqrt() <= column_radius(model)
}

/// Initial state of `scenario` at `t = 0`; `epsilon` sets the column
/// supersaturation `q_s + 4 epsilon`.
pub fn initial_state_with_epsilon(scenario: Scenario, model: &Model, epsilon: f64) -> Result<State> {
    let g = &model.grid;
    let qs = model.params.constants.q_sat;
    let mut state = State::zeros(g);
    state.temp = ScalarField::constant(g, Staggering::Cell, T_INITIAL);
    match scenario {
        Scenario::SaturatedUpdraft => {
            state.v = updraft_velocity(model)?;
            state.q = ScalarField::from_fn(g, Staggering::Cell, |x, y, _| {
                if in_column(model, x, y) {
                    qs + 4.0 * epsilon
                } else {
                    0.5 * qs
                }
            });
        }
        Scenario::UnderSaturated => {
            state.v = updraft_velocity(model)?;
            state.q = ScalarField::from_fn(g, Staggering::Cell, |x, y, _| {
                if in_column(model, x, y) {
                    0.9 * qs
                } else {
                    0.5 * qs
                }
            });
        }
        Scenario::Rest => {
            state.q = ScalarField::constant(g, Staggering::Cell, 0.5 * qs);
        }
        Scenario::NegativeTemperature => {
            state.q = ScalarField::constant(g, Staggering::Cell, 0.5 * qs);
            let (i, j, k) = (g.nx / 2, g.ny / 2, g.np / 2);
            state.temp.set(i, j, k, -1.0);
        }
    }
    state.check_finite()?;
    Ok(state)
}

/// Initial state using the model's own `epsilon`.
pub fn initial_state(scenario: Scenario, model: &Model) -> Result<State> {
    initial_state_with_epsilon(scenario, model, model.params.epsilon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::diagnostics::{constraint_residual, omega_at_levels, omega_from_v};
    use crate::params::SimParams;

    fn small_model() -> Model {
        let p = SimParams { nx: 16, ny: 16, np: 8, ..SimParams::default() };
        Model::new(&p).unwrap()
    }

    #[test]
    fn names_round_trip() {
        for s in Scenario::ALL {
            assert_eq!(s.name().parse::<Scenario>().unwrap(), s);
        }
        assert!("nope".parse::<Scenario>().is_err());
    }

    #[test]
    fn updraft_rises_in_the_column() {
        let m = small_model();
        let st = initial_state(Scenario::SaturatedUpdraft, &m).unwrap();
        let om = omega_at_levels(&omega_from_v(&st.v, &m.grid).unwrap(), &m.grid).unwrap();
        let (i, j) = (m.grid.nx / 2, m.grid.ny / 2);
        for k in 1..m.grid.np - 1 {
            assert!(om.get(i, j, k) < 0.0, "omega at level {k} = {}", om.get(i, j, k));
        }
        assert!(constraint_residual(&st.v, &m.grid).unwrap() < 1e-10);
        assert!(st.v.max_abs() < 1.2 * UPDRAFT_SPEED);
        assert!(st.q.max() > m.params.constants.q_sat);
    }

    #[test]
    fn under_saturated_stays_below_qs() {
        let m = small_model();
        let st = initial_state(Scenario::UnderSaturated, &m).unwrap();
        assert!(st.q.max() < m.params.constants.q_sat);
    }
}
