//! Diagnostic fields: divergence, omega, geopotential, vertical averages.

use crate::error::{Error, Result};
use crate::field::{pairwise_sum_by, ScalarField, VectorField2};
use crate::grid::{Grid, Staggering};
use crate::params::PhysicalConstants;

/// Horizontal divergence at cell centers, using the stored boundary faces.
pub fn divergence(v: &VectorField2, grid: &Grid) -> Result<ScalarField> {
    v.check(grid)?;
    let mut d = ScalarField::zeros(grid, Staggering::Cell);
    for k in 0..grid.np {
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let du = v.u.get(i + 1, j, k) - v.u.get(i, j, k);
                let dv = v.v.get(i, j + 1, k) - v.v.get(i, j, k);
                d.set(i, j, k, du / grid.dx + dv / grid.dy);
            }
        }
    }
    Ok(d)
}

/// `omega(p) = int_p^p1 div v dp'` on half levels; exactly zero at `p1`.
pub fn omega_from_v(v: &VectorField2, grid: &Grid) -> Result<ScalarField> {
    let d = divergence(v, grid)?;
    let mut om = ScalarField::zeros(grid, Staggering::HalfLevel);
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let mut acc = 0.0;
            for k in (0..grid.np).rev() {
                acc += grid.wp[k] * d.get(i, j, k);
                om.set(i, j, k, acc);
            }
        }
    }
    Ok(om)
}

/// Half-level omega averaged to full levels.
pub fn omega_at_levels(omega: &ScalarField, grid: &Grid) -> Result<ScalarField> {
    omega.check(grid)?;
    if omega.stag != Staggering::HalfLevel {
        return Err(Error::GridMismatch("omega must live on half levels".into()));
    }
    let mut out = ScalarField::zeros(grid, Staggering::Cell);
    for k in 0..grid.np {
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                out.set(i, j, k, 0.5 * (omega.get(i, j, k) + omega.get(i, j, k + 1)));
            }
        }
    }
    Ok(out)
}

/// Surface field of the barotropic divergence `div int v dp` (equal to omega at p0).
pub fn integrated_divergence(v: &VectorField2, grid: &Grid) -> Result<ScalarField> {
    let om = omega_from_v(v, grid)?;
    let mut s = ScalarField::zeros(grid, Staggering::Surface);
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            s.set(i, j, 0, om.get(i, j, 0));
        }
    }
    Ok(s)
}

/// L2 norm over the horizontal domain of `div int_{p0}^{p1} v dp`.
pub fn constraint_residual(v: &VectorField2, grid: &Grid) -> Result<f64> {
    let s = integrated_divergence(v, grid)?;
    let cell = grid.dx * grid.dy;
    Ok(pairwise_sum_by(s.len(), |m| cell * s.data[m] * s.data[m]).sqrt())
}

/// `(1/(p1-p0)) int phi dp` per column, as a surface field.
pub fn vertical_average(f: &ScalarField, grid: &Grid) -> Result<ScalarField> {
    f.check(grid)?;
    let weights = match f.stag {
        Staggering::Surface => return Ok(f.clone()),
        Staggering::Cell => &grid.wp,
        Staggering::HalfLevel => &grid.wp_half,
        other => {
            return Err(Error::GridMismatch(format!(
                "scalar vertical average of a {other:?} field; use vertical_average_vector"
            )))
        }
    };
    let span = grid.p1 - grid.p0;
    let per_level = grid.columns();
    let mut out = ScalarField::zeros(grid, Staggering::Surface);
    for (col, o) in out.data.iter_mut().enumerate() {
        let s = pairwise_sum_by(weights.len(), |k| weights[k] * f.data[k * per_level + col]);
        *o = s / span;
    }
    Ok(out)
}

/// Vertical mean of each velocity component, broadcast back to every level.
pub fn vertical_average_vector(v: &VectorField2, grid: &Grid) -> Result<VectorField2> {
    v.check(grid)?;
    let span = grid.p1 - grid.p0;
    let mut out = v.clone();
    for (o, a) in [(&mut out.u, &v.u), (&mut out.v, &v.v)] {
        let per_level = a.shape[0] * a.shape[1];
        for col in 0..per_level {
            let m = pairwise_sum_by(grid.np, |k| grid.wp[k] * a.data[k * per_level + col]) / span;
            for k in 0..grid.np {
                o.data[k * per_level + col] = m;
            }
        }
    }
    Ok(out)
}

/// Geopotential `Phi = Phi_s + int_p^p1 (R/p') T dp'` by the trapezoid rule.
pub fn hydrostatic_phi(
    temp: &ScalarField,
    phi_s: &ScalarField,
    grid: &Grid,
    constants: &PhysicalConstants,
) -> Result<ScalarField> {
    temp.check(grid)?;
    phi_s.check(grid)?;
    if temp.stag != Staggering::Cell || phi_s.stag != Staggering::Surface {
        return Err(Error::GridMismatch("hydrostatic_phi expects (Cell, Surface) fields".into()));
    }
    let r = constants.r_dry;
    let half = 0.5 * grid.dp;
    let mut phi = ScalarField::zeros(grid, Staggering::Cell);
    let bottom = grid.np - 1;
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let mut acc = phi_s.get(i, j, 0);
            phi.set(i, j, bottom, acc);
            let mut g_below = r * temp.get(i, j, bottom) / grid.p[bottom];
            for k in (0..bottom).rev() {
                let g_here = r * temp.get(i, j, k) / grid.p[k];
                acc += half * (g_here + g_below);
                phi.set(i, j, k, acc);
                g_below = g_here;
            }
        }
    }
    Ok(phi)
}
