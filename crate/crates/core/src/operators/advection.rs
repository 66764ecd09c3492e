//! Transport by `(v, omega)` on finite-volume control volumes.
//!
//! Volume fluxes live on the faces of the scalar cells. The skew form
//! `(1/2V) sum_f F_f phi_nb` is exactly antisymmetric in the weighted inner
//! product; the upwind form is monotone under its CFL limit.

use crate::error::{Error, Result};
use crate::field::{pairwise_sum_by, ScalarField, VectorField2};
use crate::grid::{Grid, Staggering};

/// Outward-positive volume fluxes through every cell face.
#[derive(Debug, Clone)]
pub struct Fluxes {
    /// `u dy W_k` on x-faces.
    pub fx: ScalarField,
    /// `v dx W_k` on y-faces.
    pub fy: ScalarField,
    /// `omega dx dy` on half levels (positive towards larger p).
    pub fz: ScalarField,
}

impl Fluxes {
    pub fn new(v: &VectorField2, omega: &ScalarField, grid: &Grid) -> Result<Self> {
        v.check(grid)?;
        omega.check(grid)?;
        if omega.stag != Staggering::HalfLevel {
            return Err(Error::GridMismatch("omega must live on half levels".into()));
        }
        let mut fx = v.u.clone();
        let mut fy = v.v.clone();
        for (f, h) in [(&mut fx, grid.dy), (&mut fy, grid.dx)] {
            let per_level = f.shape[0] * f.shape[1];
            for (n, val) in f.data.iter_mut().enumerate() {
                *val *= h * grid.wp[n / per_level];
            }
        }
        let fz = omega.map(|w| w * grid.dx * grid.dy);
        Ok(Self { fx, fy, fz })
    }
}

/// Visits every interior face of the scalar cells as
/// `(left cell, right cell, flux from left to right)`.
fn for_each_cell_face(grid: &Grid, fl: &Fluxes, mut visit: impl FnMut(usize, usize, f64)) {
    let (nx, ny, np) = (grid.nx, grid.ny, grid.np);
    for k in 0..np {
        for j in 0..ny {
            for i in 1..nx {
                visit(grid.idx(i - 1, j, k), grid.idx(i, j, k), fl.fx.get(i, j, k));
            }
        }
        for j in 1..ny {
            for i in 0..nx {
                visit(grid.idx(i, j - 1, k), grid.idx(i, j, k), fl.fy.get(i, j, k));
            }
        }
    }
    for k in 1..np {
        for j in 0..ny {
            for i in 0..nx {
                visit(grid.idx(i, j, k - 1), grid.idx(i, j, k), fl.fz.get(i, j, k));
            }
        }
    }
}

fn cell_volumes(grid: &Grid) -> Vec<f64> {
    grid.layout(Staggering::Cell).weights()
}

/// Skew-symmetric transport `B phi` for a cell field (no sign flip: the
/// tendency is `-B phi`).
pub fn skew_scalar(fl: &Fluxes, phi: &ScalarField, grid: &Grid) -> Result<ScalarField> {
    phi.check(grid)?;
    let vol = cell_volumes(grid);
    let mut out = vec![0.0; phi.len()];
    for_each_cell_face(grid, fl, |a, b, f| {
        out[a] += f * phi.data[b];
        out[b] -= f * phi.data[a];
    });
    for (o, v) in out.iter_mut().zip(&vol) {
        *o /= 2.0 * v;
    }
    Ok(ScalarField { stag: Staggering::Cell, shape: phi.shape, data: out })
}

/// First-order upwind advective tendency `-(v, omega) . grad phi`.
pub fn upwind_tendency(fl: &Fluxes, phi: &ScalarField, grid: &Grid) -> Result<ScalarField> {
    phi.check(grid)?;
    let vol = cell_volumes(grid);
    let mut out = vec![0.0; phi.len()];
    for_each_cell_face(grid, fl, |a, b, f| {
        if f > 0.0 {
            out[b] += f * (phi.data[a] - phi.data[b]);
        } else {
            out[a] -= f * (phi.data[b] - phi.data[a]);
        }
    });
    for (o, v) in out.iter_mut().zip(&vol) {
        *o /= v;
    }
    Ok(ScalarField { stag: Staggering::Cell, shape: phi.shape, data: out })
}

/// Largest inflow rate `sum_in |F| / V`; explicit upwind is monotone for
/// `dt <= 1 / rate`.
pub fn upwind_rate(fl: &Fluxes, grid: &Grid) -> f64 {
    let vol = cell_volumes(grid);
    let mut inflow = vec![0.0; vol.len()];
    for_each_cell_face(grid, fl, |a, b, f| {
        if f > 0.0 {
            inflow[b] += f;
        } else {
            inflow[a] -= f;
        }
    });
    inflow.iter().zip(&vol).fold(0.0, |m, (q, v)| m.max(q / v))
}

/// Faces of the velocity control volumes, as `(a, b, flux a->b)` in the
/// storage of the component (`XFace` for `u`, `YFace` for `v`).
fn for_each_u_face(grid: &Grid, fl: &Fluxes, mut visit: impl FnMut(usize, usize, f64)) {
    let (nx, ny, np) = (grid.nx, grid.ny, grid.np);
    let at = |i: usize, j: usize, k: usize| (k * ny + j) * (nx + 1) + i;
    for k in 0..np {
        for j in 0..ny {
            // x-direction: through the center of cell i, between faces i and i+1.
            for i in 0..nx {
                let f = 0.5 * (fl.fx.get(i, j, k) + fl.fx.get(i + 1, j, k));
                visit(at(i, j, k), at(i + 1, j, k), f);
            }
        }
        for j in 1..ny {
            for i in 0..=nx {
                let mut f = 0.0;
                if i > 0 {
                    f += fl.fy.get(i - 1, j, k);
                }
                if i < nx {
                    f += fl.fy.get(i, j, k);
                }
                visit(at(i, j - 1, k), at(i, j, k), 0.5 * f);
            }
        }
    }
    for k in 1..np {
        for j in 0..ny {
            for i in 0..=nx {
                let mut f = 0.0;
                if i > 0 {
                    f += fl.fz.get(i - 1, j, k);
                }
                if i < nx {
                    f += fl.fz.get(i, j, k);
                }
                visit(at(i, j, k - 1), at(i, j, k), 0.5 * f);
            }
        }
    }
}

fn for_each_v_face(grid: &Grid, fl: &Fluxes, mut visit: impl FnMut(usize, usize, f64)) {
    let (nx, ny, np) = (grid.nx, grid.ny, grid.np);
    let at = |i: usize, j: usize, k: usize| (k * (ny + 1) + j) * nx + i;
    for k in 0..np {
        for j in 0..=ny {
            for i in 1..nx {
                let mut f = 0.0;
                if j > 0 {
                    f += fl.fx.get(i, j - 1, k);
                }
                if j < ny {
                    f += fl.fx.get(i, j, k);
                }
                visit(at(i - 1, j, k), at(i, j, k), 0.5 * f);
            }
        }
        for j in 0..ny {
            for i in 0..nx {
                let f = 0.5 * (fl.fy.get(i, j, k) + fl.fy.get(i, j + 1, k));
                visit(at(i, j, k), at(i, j + 1, k), f);
            }
        }
    }
    for k in 1..np {
        for j in 0..=ny {
            for i in 0..nx {
                let mut f = 0.0;
                if j > 0 {
                    f += fl.fz.get(i, j - 1, k);
                }
                if j < ny {
                    f += fl.fz.get(i, j, k);
                }
                visit(at(i, j, k - 1), at(i, j, k), 0.5 * f);
            }
        }
    }
}

fn skew_component(
    grid: &Grid,
    stag: Staggering,
    phi: &ScalarField,
    faces: impl Fn(&mut dyn FnMut(usize, usize, f64)),
) -> ScalarField {
    let vol = grid.layout(stag).weights();
    let mut out = vec![0.0; phi.len()];
    faces(&mut |a, b, f| {
        out[a] += f * phi.data[b];
        out[b] -= f * phi.data[a];
    });
    for (o, v) in out.iter_mut().zip(&vol) {
        *o /= 2.0 * v;
    }
    ScalarField { stag, shape: phi.shape, data: out }
}

/// Skew-symmetric transport of a velocity field `w` by the fluxes.
pub fn skew_vector(fl: &Fluxes, w: &VectorField2, grid: &Grid) -> Result<VectorField2> {
    w.check(grid)?;
    let u = skew_component(grid, Staggering::XFace, &w.u, |visit| for_each_u_face(grid, fl, visit));
    let v = skew_component(grid, Staggering::YFace, &w.v, |visit| for_each_v_face(grid, fl, visit));
    Ok(VectorField2 { u, v })
}

/// `sum_f F_f psi_a phi_b` halves, the skew trilinear form for one component.
fn skew_form_component(
    phi: &ScalarField,
    psi: &ScalarField,
    faces: impl Fn(&mut dyn FnMut(usize, usize, f64)),
) -> f64 {
    let mut terms = Vec::new();
    faces(&mut |a, b, f| {
        terms.push(0.5 * f * (psi.data[a] * phi.data[b] - psi.data[b] * phi.data[a]));
    });
    pairwise_sum_by(terms.len(), |m| terms[m])
}

/// Skew trilinear form `b(v, phi, psi)` on cell scalars.
pub fn trilinear_b_scalar(
    v: &VectorField2,
    omega: &ScalarField,
    phi: &ScalarField,
    psi: &ScalarField,
    grid: &Grid,
) -> Result<f64> {
    let fl = Fluxes::new(v, omega, grid)?;
    phi.check(grid)?;
    phi.same_shape(psi)?;
    Ok(skew_form_component(phi, psi, |visit| for_each_cell_face(grid, &fl, visit)))
}

/// Skew trilinear form `b(v, w, z)` on velocities.
pub fn trilinear_b_vector(
    v: &VectorField2,
    omega: &ScalarField,
    w: &VectorField2,
    z: &VectorField2,
    grid: &Grid,
) -> Result<f64> {
    let fl = Fluxes::new(v, omega, grid)?;
    w.check(grid)?;
    z.check(grid)?;
    let bu = skew_form_component(&w.u, &z.u, |visit| for_each_u_face(grid, &fl, visit));
    let bv = skew_form_component(&w.v, &z.v, |visit| for_each_v_face(grid, &fl, visit));
    Ok(bu + bv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::inner;
    use crate::operators::diagnostics::omega_from_v;
    use crate::operators::elliptic::{project_barotropic, EllipticSolveSettings};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(seed: u64) -> (Grid, VectorField2, ScalarField, ChaCha8Rng) {
        let g = Grid::new(4, 5, 4, 1.0, 1.3, 0.2, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw = VectorField2 {
            u: ScalarField::from_fn(&g, Staggering::XFace, |_, _, _| rng.gen_range(-1.0..1.0)),
            v: ScalarField::from_fn(&g, Staggering::YFace, |_, _, _| rng.gen_range(-1.0..1.0)),
        };
        let s = EllipticSolveSettings::new(1e-13, 10_000).unwrap();
        let v = project_barotropic(&raw, &g, &s).unwrap();
        let om = omega_from_v(&v, &g).unwrap();
        (g, v, om, rng)
    }

    #[test]
    fn skew_operator_matches_form() {
        let (g, v, om, mut rng) = setup(3);
        let phi = ScalarField::from_fn(&g, Staggering::Cell, |_, _, _| rng.gen_range(-1.0..1.0));
        let psi = ScalarField::from_fn(&g, Staggering::Cell, |_, _, _| rng.gen_range(-1.0..1.0));
        let fl = Fluxes::new(&v, &om, &g).unwrap();
        let bphi = skew_scalar(&fl, &phi, &g).unwrap();
        let via_op = inner(&bphi, &psi, &g).unwrap();
        let via_form = trilinear_b_scalar(&v, &om, &phi, &psi, &g).unwrap();
        assert!((via_op - via_form).abs() < 1e-13);
        let self_b = trilinear_b_scalar(&v, &om, &phi, &phi, &g).unwrap();
        assert!(self_b.abs() < 1e-14);
    }

    #[test]
    fn upwind_keeps_constants_and_bounds() {
        let (g, v, om, mut rng) = setup(4);
        let fl = Fluxes::new(&v, &om, &g).unwrap();
        let c = ScalarField::constant(&g, Staggering::Cell, 2.5);
        let t = upwind_tendency(&fl, &c, &g).unwrap();
        assert!(t.data.iter().all(|&x| x == 0.0));
        let phi = ScalarField::from_fn(&g, Staggering::Cell, |_, _, _| rng.gen_range(0.0..1.0));
        let dt = 1.0 / upwind_rate(&fl, &g);
        let tend = upwind_tendency(&fl, &phi, &g).unwrap();
        let next = phi.zip_map(&tend, |a, b| a + dt * b);
        assert!(next.min() >= phi.min() - 1e-14 && next.max() <= phi.max() + 1e-14);
    }

    #[test]
    fn zero_velocity_gives_zero_transport() {
        let g = Grid::new(4, 4, 4, 1.0, 1.0, 0.2, 1.0).unwrap();
        let v = VectorField2::zeros(&g);
        let om = ScalarField::zeros(&g, Staggering::HalfLevel);
        let w = VectorField2::from_fn(&g, |x, _, _| x, |_, y, _| y);
        assert_eq!(trilinear_b_vector(&v, &om, &w, &w, &g).unwrap(), 0.0);
    }
}
