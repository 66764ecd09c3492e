//! Discrete operators and forms.

pub mod advection;
pub mod diagnostics;
pub mod diffusion;
pub mod elliptic;
pub mod forms;

pub use advection::{
    skew_scalar, skew_vector, trilinear_b_scalar, trilinear_b_vector, upwind_rate, upwind_tendency,
    Fluxes,
};
pub use diagnostics::{
    constraint_residual, divergence, hydrostatic_phi, omega_at_levels, omega_from_v,
    vertical_average, vertical_average_vector,
};
pub use diffusion::{dof_mask, v_norm, vertical_weight, DiffusionOperator};
pub use elliptic::{
    conjugate_gradient, project_barotropic, project_barotropic_with_potential,
    solve_surface_pressure, EllipticSolveSettings, Projection, SolveStats, SolverMethod,
};
pub use forms::{
    coriolis_tendency, form_e_c, form_e_p, form_m_t, gradient, omega_t_tendency,
    pressure_gradient_tendency, sigma_field,
};

use nalgebra::DMatrix;

use crate::grid::{Grid, Staggering};

/// Dense matrix type used for operator dumps.
pub type DenseMatrix = DMatrix<f64>;

/// Dense stiffness matrix of `op` on fields of staggering `stag` (tiny grids only).
pub fn dense_stiffness(op: &DiffusionOperator, grid: &Grid, stag: Staggering) -> DMatrix<f64> {
    let layout = grid.layout(stag);
    let n = layout.len();
    let mut m = DMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    let mut col = vec![0.0; n];
    for c in 0..n {
        e[c] = 1.0;
        op.stiffness_into(&layout, &e, &mut col);
        for r in 0..n {
            m[(r, c)] = col[r];
        }
        e[c] = 0.0;
    }
    m
}

/// Diagonal mass matrix (quadrature weights) of a staggering.
pub fn dense_mass(grid: &Grid, stag: Staggering) -> DMatrix<f64> {
    DMatrix::from_diagonal(&nalgebra::DVector::from_vec(grid.layout(stag).weights()))
}
