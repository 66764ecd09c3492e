//! Fixtures shared by the benchmarks in `benches/`.

use moist_pe::{initial_state, Model, Scenario, SimParams, State};

/// Saturated-updraft model and initial state on an `nx x ny x np` grid.
pub fn updraft(nx: usize, ny: usize, np: usize) -> (Model, State) {
    let p = SimParams { nx, ny, np, use_f_plus: true, ..SimParams::default() };
    let m = Model::new(&p).expect("benchmark parameters are valid");
    let s = initial_state(Scenario::SaturatedUpdraft, &m).expect("scenario builds");
    (m, s)
}
