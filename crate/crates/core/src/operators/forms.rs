//! Coriolis, pressure-gradient and omega-T coupling terms, as operators and forms.

use crate::error::Result;
use crate::field::{pairwise_sum_by, ScalarField, VectorField2};
use crate::grid::{Grid, Staggering};
use crate::operators::diagnostics::{hydrostatic_phi, omega_at_levels};
use crate::params::{OmegaTWeight, PhysicalConstants};

/// Visits each (x-face, y-face) pair sharing a cell, with the pair weight
/// `dx dy W_k / 4`, as `(u index, v index, weight)`.
fn for_each_corner_pair(grid: &Grid, mut visit: impl FnMut(usize, usize, f64)) {
    let (nx, ny) = (grid.nx, grid.ny);
    for k in 0..grid.np {
        let w = 0.25 * grid.dx * grid.dy * grid.wp[k];
        for j in 0..ny {
            for i in 0..nx {
                for a in [i, i + 1] {
                    for b in [j, j + 1] {
                        let ui = (k * ny + j) * (nx + 1) + a;
                        let vi = (k * (ny + 1) + b) * nx + i;
                        visit(ui, vi, w);
                    }
                }
            }
        }
    }
}

/// `e_c(v, w) = int (f k x v) . w`, assembled pair by pair so `e_c(v, v) = 0` exactly.
pub fn form_e_c(v: &VectorField2, w: &VectorField2, grid: &Grid, f: f64) -> Result<f64> {
    v.check(grid)?;
    w.check(grid)?;
    let mut terms = Vec::with_capacity(4 * grid.cells());
    for_each_corner_pair(grid, |ui, vi, wt| {
        terms.push(wt * f * (v.u.data[ui] * w.v.data[vi] - v.v.data[vi] * w.u.data[ui]));
    });
    Ok(pairwise_sum_by(terms.len(), |m| terms[m]))
}

/// Coriolis tendency `-f k x v` with the energy-neutral four-point averages.
pub fn coriolis_tendency(v: &VectorField2, grid: &Grid, f: f64) -> Result<VectorField2> {
    v.check(grid)?;
    let mut out = VectorField2::zeros(grid);
    for_each_corner_pair(grid, |ui, vi, wt| {
        out.u.data[ui] += wt * f * v.v.data[vi];
        out.v.data[vi] -= wt * f * v.u.data[ui];
    });
    for c in [&mut out.u, &mut out.v] {
        let w = grid.layout(c.stag).weights();
        for (o, m) in c.data.iter_mut().zip(&w) {
            *o /= m;
        }
    }
    Ok(out)
}

/// Horizontal gradient of a cell field onto the interior faces (boundary faces 0).
pub fn gradient(phi: &ScalarField, grid: &Grid) -> VectorField2 {
    let mut g = VectorField2::zeros(grid);
    for k in 0..grid.np {
        for j in 0..grid.ny {
            for i in 1..grid.nx {
                g.u.set(i, j, k, (phi.get(i, j, k) - phi.get(i - 1, j, k)) / grid.dx);
            }
        }
        for j in 1..grid.ny {
            for i in 0..grid.nx {
                g.v.set(i, j, k, (phi.get(i, j, k) - phi.get(i, j - 1, k)) / grid.dy);
            }
        }
    }
    g
}

/// Baroclinic geopotential `int_p^p1 (R/p') T dp'` (zero surface value).
pub fn baroclinic_phi(temp: &ScalarField, grid: &Grid, c: &PhysicalConstants) -> Result<ScalarField> {
    let zero = ScalarField::zeros(grid, Staggering::Surface);
    hydrostatic_phi(temp, &zero, grid, c)
}

/// Pressure-gradient tendency `-grad int_p^p1 (R/p') T dp'`.
pub fn pressure_gradient_tendency(
    temp: &ScalarField,
    grid: &Grid,
    c: &PhysicalConstants,
) -> Result<VectorField2> {
    let phi = baroclinic_phi(temp, grid, c)?;
    let mut g = gradient(&phi, grid);
    for comp in [&mut g.u, &mut g.v] {
        comp.data.iter_mut().for_each(|x| *x = -*x);
    }
    Ok(g)
}

fn face_dot(a: &VectorField2, b: &VectorField2, grid: &Grid) -> f64 {
    let mut s = 0.0;
    for (x, y) in [(&a.u, &b.u), (&a.v, &b.v)] {
        let w = grid.layout(x.stag).weights();
        s += pairwise_sum_by(x.len(), |m| w[m] * x.data[m] * y.data[m]);
    }
    s
}

/// `e_p(T, w) = int grad(int_p^p1 (R/p') T dp') . w` for a temperature field.
pub fn form_e_p(temp: &ScalarField, w: &VectorField2, grid: &Grid, c: &PhysicalConstants) -> Result<f64> {
    w.check(grid)?;
    let phi = baroclinic_phi(temp, grid, c)?;
    Ok(face_dot(&gradient(&phi, grid), w, grid))
}

/// `(p/p0)^(R/c_p)` as a cell field.
pub fn sigma_field(grid: &Grid, c: &PhysicalConstants) -> ScalarField {
    let kap = c.kappa_exponent();
    ScalarField::from_fn(grid, Staggering::Cell, |_, _, p| (p / c.p0).powf(kap))
}

/// Weight of the `omega T` term at pressure `p`.
pub fn omega_t_weight(p: f64, c: &PhysicalConstants, which: OmegaTWeight) -> f64 {
    match which {
        OmegaTWeight::ROverCp => c.r_dry / (c.c_p * p),
        OmegaTWeight::RTimesCp => c.r_dry * c.c_p / p,
    }
}

/// Pointwise `weight(p) omega T` on cells, `omega` given on half levels.
pub fn omega_t_tendency(
    omega: &ScalarField,
    temp: &ScalarField,
    grid: &Grid,
    c: &PhysicalConstants,
    which: OmegaTWeight,
) -> Result<ScalarField> {
    let om = omega_at_levels(omega, grid)?;
    let per_level = grid.columns();
    let mut out = om.clone();
    for (n, o) in out.data.iter_mut().enumerate() {
        let p = grid.p[n / per_level];
        *o *= omega_t_weight(p, c, which) * temp.data[n];
    }
    Ok(out)
}

/// `m_T(omega, T, psi) = int weight(p) omega T psi`.
pub fn form_m_t(
    omega: &ScalarField,
    temp: &ScalarField,
    psi: &ScalarField,
    grid: &Grid,
    c: &PhysicalConstants,
    which: OmegaTWeight,
) -> Result<f64> {
    let t = omega_t_tendency(omega, temp, grid, c, which)?;
    let w = grid.layout(Staggering::Cell).weights();
    Ok(pairwise_sum_by(t.len(), |m| w[m] * t.data[m] * psi.data[m]))
}
