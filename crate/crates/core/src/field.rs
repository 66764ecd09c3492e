//! Field containers, weighted reductions and the model state.

use crate::error::{Error, Result};
use crate::grid::{Grid, Layout, Staggering};

const PAIRWISE_BLOCK: usize = 64;

/// Pairwise (cascade) summation; the result depends only on the order of `xs`.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    pairwise_sum_by(xs.len(), |i| xs[i])
}

/// Pairwise summation of `term(0) + ... + term(n-1)`.
pub fn pairwise_sum_by(n: usize, term: impl Fn(usize) -> f64 + Copy) -> f64 {
    fn rec(lo: usize, hi: usize, term: impl Fn(usize) -> f64 + Copy) -> f64 {
        if hi - lo <= PAIRWISE_BLOCK {
            let mut s = 0.0;
            for i in lo..hi {
                s += term(i);
            }
            s
        } else {
            let mid = lo + (hi - lo) / 2;
            rec(lo, mid, term) + rec(mid, hi, term)
        }
    }
    rec(0, n, term)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub stag: Staggering,
    pub shape: [usize; 3],
    pub data: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: &Grid, stag: Staggering) -> Self {
        Self::constant(grid, stag, 0.0)
    }

    pub fn constant(grid: &Grid, stag: Staggering, c: f64) -> Self {
        let shape = grid.shape(stag);
        Self { stag, shape, data: vec![c; shape[0] * shape[1] * shape[2]] }
    }

    /// Samples `f(x, y, p)` at the storage points of `stag`.
    pub fn from_fn(grid: &Grid, stag: Staggering, mut f: impl FnMut(f64, f64, f64) -> f64) -> Self {
        let mut out = Self::zeros(grid, stag);
        let [n0, n1, n2] = out.shape;
        let mut idx = 0;
        for k in 0..n2 {
            let p = point_p(grid, stag, k);
            for j in 0..n1 {
                let y = point_y(grid, stag, j);
                for i in 0..n0 {
                    out.data[idx] = f(point_x(grid, stag, i), y, p);
                    idx += 1;
                }
            }
        }
        out
    }

    pub fn from_vec(grid: &Grid, stag: Staggering, data: Vec<f64>) -> Result<Self> {
        let shape = grid.shape(stag);
        if data.len() != shape[0] * shape[1] * shape[2] {
            return Err(Error::GridMismatch(format!(
                "{} values for a {:?} field of shape {:?}",
                data.len(),
                stag,
                shape
            )));
        }
        Ok(Self { stag, shape, data })
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.shape[1] + j) * self.shape[0] + i
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.idx(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, value: f64) {
        let n = self.idx(i, j, k);
        self.data[n] = value;
    }

    pub fn check(&self, grid: &Grid) -> Result<()> {
        let expected = grid.shape(self.stag);
        if self.shape != expected || self.data.len() != expected.iter().product::<usize>() {
            return Err(Error::GridMismatch(format!(
                "{:?} field of shape {:?} on a grid expecting {:?}",
                self.stag, self.shape, expected
            )));
        }
        Ok(())
    }

    pub fn same_shape(&self, other: &ScalarField) -> Result<()> {
        if self.stag != other.stag || self.shape != other.shape {
            return Err(Error::GridMismatch(format!(
                "{:?}{:?} vs {:?}{:?}",
                self.stag, self.shape, other.stag, other.shape
            )));
        }
        Ok(())
    }

    pub fn first_non_finite(&self) -> Option<usize> {
        self.data.iter().position(|v| !v.is_finite())
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { stag: self.stag, shape: self.shape, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert_eq!(self.shape, other.shape);
        Self {
            stag: self.stag,
            shape: self.shape,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }
}

pub fn point_x(grid: &Grid, stag: Staggering, i: usize) -> f64 {
    match stag {
        Staggering::XFace => grid.x_face(i),
        _ => grid.x(i),
    }
}

pub fn point_y(grid: &Grid, stag: Staggering, j: usize) -> f64 {
    match stag {
        Staggering::YFace => grid.y_face(j),
        _ => grid.y(j),
    }
}

pub fn point_p(grid: &Grid, stag: Staggering, k: usize) -> f64 {
    match stag {
        Staggering::HalfLevel => grid.p_half[k],
        Staggering::Surface => grid.p1,
        _ => grid.p[k],
    }
}

/// Horizontal velocity on the C grid: `u` on x-faces, `v` on y-faces.
///
/// Only interior faces are unknowns; the lateral boundary faces carry the
/// normal component and are zero for admissible fields.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField2 {
    pub u: ScalarField,
    pub v: ScalarField,
}

impl VectorField2 {
    pub fn zeros(grid: &Grid) -> Self {
        Self {
            u: ScalarField::zeros(grid, Staggering::XFace),
            v: ScalarField::zeros(grid, Staggering::YFace),
        }
    }

    pub fn from_fn(
        grid: &Grid,
        f1: impl FnMut(f64, f64, f64) -> f64,
        f2: impl FnMut(f64, f64, f64) -> f64,
    ) -> Self {
        Self {
            u: ScalarField::from_fn(grid, Staggering::XFace, f1),
            v: ScalarField::from_fn(grid, Staggering::YFace, f2),
        }
    }

    pub fn check(&self, grid: &Grid) -> Result<()> {
        self.u.check(grid)?;
        self.v.check(grid)?;
        if self.u.stag != Staggering::XFace || self.v.stag != Staggering::YFace {
            return Err(Error::GridMismatch("velocity components on the wrong faces".into()));
        }
        Ok(())
    }

    /// Sets the normal component on the lateral boundary to zero.
    pub fn zero_normal_boundary(&mut self) {
        let [n0, n1, n2] = self.u.shape;
        for k in 0..n2 {
            for j in 0..n1 {
                self.u.set(0, j, k, 0.0);
                self.u.set(n0 - 1, j, k, 0.0);
            }
        }
        let [m0, m1, m2] = self.v.shape;
        for k in 0..m2 {
            for i in 0..m0 {
                self.v.set(i, 0, k, 0.0);
                self.v.set(i, m1 - 1, k, 0.0);
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.u.max_abs().max(self.v.max_abs())
    }
}

/// Anything made of one or more scalar components.
pub trait Field: Clone {
    fn parts(&self) -> Vec<&ScalarField>;
    fn parts_mut(&mut self) -> Vec<&mut ScalarField>;
}

impl Field for ScalarField {
    fn parts(&self) -> Vec<&ScalarField> {
        vec![self]
    }
    fn parts_mut(&mut self) -> Vec<&mut ScalarField> {
        vec![self]
    }
}

impl Field for VectorField2 {
    fn parts(&self) -> Vec<&ScalarField> {
        vec![&self.u, &self.v]
    }
    fn parts_mut(&mut self) -> Vec<&mut ScalarField> {
        vec![&mut self.u, &mut self.v]
    }
}

fn check_pair<F: Field>(f: &F, g: &F, grid: &Grid) -> Result<()> {
    for (a, b) in f.parts().into_iter().zip(g.parts()) {
        a.check(grid)?;
        a.same_shape(b)?;
    }
    Ok(())
}

fn weighted_dot(layout: &Layout, a: &[f64], b: &[f64]) -> f64 {
    let [n0, n1, _] = layout.n;
    pairwise_sum_by(a.len(), |m| {
        let i = m % n0;
        let j = (m / n0) % n1;
        let k = m / (n0 * n1);
        layout.wx[i] * layout.wy[j] * layout.wz[k] * a[m] * b[m]
    })
}

/// Weighted L2 inner product.
pub fn inner<F: Field>(f: &F, g: &F, grid: &Grid) -> Result<f64> {
    check_pair(f, g, grid)?;
    let mut s = 0.0;
    for (a, b) in f.parts().into_iter().zip(g.parts()) {
        s += weighted_dot(&grid.layout(a.stag), &a.data, &b.data);
    }
    Ok(s)
}

pub fn l2_norm<F: Field>(f: &F, grid: &Grid) -> Result<f64> {
    Ok(inner(f, f, grid)?.max(0.0).sqrt())
}

/// Returns `a * x + y`.
pub fn axpy<F: Field>(a: f64, x: &F, y: &F) -> Result<F> {
    let mut out = y.clone();
    for (o, xs) in out.parts_mut().into_iter().zip(x.parts()) {
        o.same_shape(xs)?;
        for (ov, xv) in o.data.iter_mut().zip(&xs.data) {
            *ov += a * xv;
        }
    }
    Ok(out)
}

pub fn scale<F: Field>(a: f64, x: &F) -> F {
    let mut out = x.clone();
    for o in out.parts_mut() {
        for v in o.data.iter_mut() {
            *v *= a;
        }
    }
    out
}

pub fn copy<F: Field>(x: &F) -> F {
    x.clone()
}

/// Prognostic variables at one instant. Temperature is stored as `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub t: f64,
    pub v: VectorField2,
    pub temp: ScalarField,
    pub q: ScalarField,
}

impl State {
    pub fn zeros(grid: &Grid) -> Self {
        Self {
            t: 0.0,
            v: VectorField2::zeros(grid),
            temp: ScalarField::zeros(grid, Staggering::Cell),
            q: ScalarField::zeros(grid, Staggering::Cell),
        }
    }

    pub fn check(&self, grid: &Grid) -> Result<()> {
        self.v.check(grid)?;
        self.temp.check(grid)?;
        self.q.check(grid)?;
        if self.temp.stag != Staggering::Cell || self.q.stag != Staggering::Cell {
            return Err(Error::GridMismatch("tracers must be cell-centered".into()));
        }
        Ok(())
    }

    pub fn check_finite(&self) -> Result<()> {
        let named = [
            ("v1", &self.v.u),
            ("v2", &self.v.v),
            ("T", &self.temp),
            ("q", &self.q),
        ];
        for (name, f) in named {
            if let Some(index) = f.first_non_finite() {
                return Err(Error::NonFinite { field: name, index });
            }
        }
        Ok(())
    }
}
