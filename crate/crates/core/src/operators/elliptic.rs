//! Conjugate gradient, the Neumann Poisson problem and the barotropic projection.

use crate::error::{Error, Result};
use crate::field::{pairwise_sum, pairwise_sum_by, ScalarField, VectorField2};
use crate::grid::{Grid, Staggering};
use crate::operators::diagnostics::integrated_divergence;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverMethod {
    ConjugateGradient,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipticSolveSettings {
    pub method: SolverMethod,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for EllipticSolveSettings {
    fn default() -> Self {
        Self { method: SolverMethod::ConjugateGradient, tol: 1e-10, max_iter: 20_000 }
    }
}

impl EllipticSolveSettings {
    pub fn new(tol: f64, max_iter: usize) -> Result<Self> {
        let s = Self { method: SolverMethod::ConjugateGradient, tol, max_iter };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol <= 1e-4) {
            return Err(Error::Validation(format!("tolerance in (0, 1e-4] violated ({})", self.tol)));
        }
        if self.max_iter < 10 {
            return Err(Error::Validation(format!("max iterations >= 10 violated ({})", self.max_iter)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    pairwise_sum_by(a.len(), |i| a[i] * b[i])
}

/// Solves `A x = b` for symmetric positive (semi-)definite `A`, starting from `x`.
///
/// `project`, when given, is applied to the residual and search direction each
/// iteration (used to stay orthogonal to a null space).
pub fn conjugate_gradient(
    mut apply: impl FnMut(&[f64], &mut [f64]),
    b: &[f64],
    x: &mut [f64],
    settings: &EllipticSolveSettings,
    project: Option<&dyn Fn(&mut [f64])>,
) -> Result<SolveStats> {
    let n = b.len();
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(SolveStats { iterations: 0, relative_residual: 0.0 });
    }
    let mut ax = vec![0.0; n];
    apply(x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    if let Some(pr) = project {
        pr(&mut r);
    }
    let mut d = r.clone();
    let mut rr = dot(&r, &r);
    let target = settings.tol * bnorm;
    let mut ad = vec![0.0; n];
    for it in 0..settings.max_iter {
        if rr.sqrt() <= target {
            return Ok(SolveStats { iterations: it, relative_residual: rr.sqrt() / bnorm });
        }
        apply(&d, &mut ad);
        let dad = dot(&d, &ad);
        if dad <= 0.0 {
            break;
        }
        let alpha = rr / dad;
        for i in 0..n {
            x[i] += alpha * d[i];
            r[i] -= alpha * ad[i];
        }
        if let Some(pr) = project {
            pr(&mut r);
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            d[i] = r[i] + beta * d[i];
        }
    }
    let rel = rr.sqrt() / bnorm;
    if rel <= settings.tol {
        return Ok(SolveStats { iterations: settings.max_iter, relative_residual: rel });
    }
    Err(Error::NonConvergence { iterations: settings.max_iter, residual: rel })
}

/// `-Laplacian` with homogeneous Neumann conditions on cell centers of `M'`,
/// scaled by the cell area so the matrix is symmetric.
pub fn neg_laplacian_2d(grid: &Grid, f: &[f64], out: &mut [f64]) {
    let (nx, ny) = (grid.nx, grid.ny);
    let cx = grid.dy / grid.dx;
    let cy = grid.dx / grid.dy;
    out.iter_mut().for_each(|o| *o = 0.0);
    for j in 0..ny {
        for i in 0..nx {
            let a = j * nx + i;
            if i + 1 < nx {
                let flux = cx * (f[a] - f[a + 1]);
                out[a] += flux;
                out[a + 1] -= flux;
            }
            if j + 1 < ny {
                let flux = cy * (f[a] - f[a + nx]);
                out[a] += flux;
                out[a + nx] -= flux;
            }
        }
    }
}

fn remove_mean(v: &mut [f64]) {
    let m = pairwise_sum(v) / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= m);
}

/// Solves `-Laplacian phi = rhs` (homogeneous Neumann) normalized to zero mean.
pub fn solve_surface_pressure(
    rhs: &ScalarField,
    grid: &Grid,
    settings: &EllipticSolveSettings,
) -> Result<(ScalarField, SolveStats)> {
    settings.validate()?;
    rhs.check(grid)?;
    if rhs.stag != Staggering::Surface {
        return Err(Error::GridMismatch("surface pressure needs a Surface right-hand side".into()));
    }
    let n = rhs.len();
    let mean = pairwise_sum(&rhs.data) / n as f64;
    let rms = (pairwise_sum_by(n, |i| rhs.data[i] * rhs.data[i]) / n as f64).sqrt();
    if mean.abs() > settings.tol * rms.max(f64::MIN_POSITIVE) * 10.0 {
        return Err(Error::Compatibility { mean });
    }
    solve_neumann(rhs, grid, settings)
}

/// Neumann Poisson solve without the compatibility check; the mean of `rhs`
/// is removed first.
fn solve_neumann(
    rhs: &ScalarField,
    grid: &Grid,
    settings: &EllipticSolveSettings,
) -> Result<(ScalarField, SolveStats)> {
    let n = rhs.len();
    let area = grid.dx * grid.dy;
    let mut b: Vec<f64> = rhs.data.iter().map(|v| v * area).collect();
    remove_mean(&mut b);
    let mut x = vec![0.0; n];
    let stats = conjugate_gradient(
        |f, out| neg_laplacian_2d(grid, f, out),
        &b,
        &mut x,
        settings,
        Some(&remove_mean),
    )?;
    remove_mean(&mut x);
    Ok((ScalarField { stag: Staggering::Surface, shape: rhs.shape, data: x }, stats))
}

/// Subtracts the horizontal gradient of a surface potential from every level.
pub fn subtract_gradient(v: &mut VectorField2, phi: &ScalarField, grid: &Grid) {
    for k in 0..grid.np {
        for j in 0..grid.ny {
            for i in 1..grid.nx {
                let g = (phi.get(i, j, 0) - phi.get(i - 1, j, 0)) / grid.dx;
                let n = v.u.idx(i, j, k);
                v.u.data[n] -= g;
            }
        }
        for j in 1..grid.ny {
            for i in 0..grid.nx {
                let g = (phi.get(i, j, 0) - phi.get(i, j - 1, 0)) / grid.dy;
                let n = v.v.idx(i, j, k);
                v.v.data[n] -= g;
            }
        }
    }
}

/// Result of the barotropic projection: the admissible velocity and the
/// potential whose gradient was removed.
#[derive(Debug, Clone)]
pub struct Projection {
    pub v: VectorField2,
    pub potential: ScalarField,
    pub stats: SolveStats,
}

/// Removes the lateral normal flow and the divergent part of the vertical mean.
pub fn project_barotropic_with_potential(
    v: &VectorField2,
    grid: &Grid,
    settings: &EllipticSolveSettings,
) -> Result<Projection> {
    let mut out = v.clone();
    out.zero_normal_boundary();
    let span = grid.p1 - grid.p0;
    settings.validate()?;
    // Laplacian(phi) = mean divergence  <=>  -Laplacian(phi) = -div(int v dp) / span.
    // With the normal flow removed the right-hand side sums to zero up to roundoff.
    let rhs = integrated_divergence(&out, grid)?.map(|d| -d / span);
    let (phi, stats) = solve_neumann(&rhs, grid, settings)?;
    subtract_gradient(&mut out, &phi, grid);
    Ok(Projection { v: out, potential: phi, stats })
}

pub fn project_barotropic(
    v: &VectorField2,
    grid: &Grid,
    settings: &EllipticSolveSettings,
) -> Result<VectorField2> {
    Ok(project_barotropic_with_potential(v, grid, settings)?.v)
}
