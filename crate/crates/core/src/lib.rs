//! Viscous primitive equations with humidity saturation on a pressure-coordinate
//! box: discretization, time stepping and verification diagnostics.

pub mod error;
pub mod field;
pub mod grid;
pub mod io;
pub mod operators;
pub mod params;
pub mod saturation;
pub mod scenario;
pub mod stepper;
pub mod verify;

pub use error::{Error, Result};
pub use field::{axpy, copy, inner, l2_norm, pairwise_sum, scale, Field, ScalarField, State, VectorField2};
pub use grid::{build_grid, BoundaryTag, Grid, Staggering};
pub use operators::{v_norm, DiffusionOperator, EllipticSolveSettings};
pub use params::{
    kappa, load_params, save_params, xi_zero, Coefficients, DiffusionCoefficients, Forcing,
    MeanTemperatureProfile, PhysicalConstants, SimParams, TemperatureForm, Tracer,
};
pub use saturation::{heaviside_eps, kappa_eps, HeavisideSample, SaturationKernel};
pub use stepper::{assemble_tendencies, run, step, Model, Observer, SchemeSettings, StepInfo, Stepper, TendencySet};
pub use scenario::{initial_state, Scenario};
pub use verify::{verify_scenario, VerificationReport};
