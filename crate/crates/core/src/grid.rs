//! Discrete cylinder `[0,Lx] x [0,Ly] x [p0,p1]`.
//!
//! Horizontal: Arakawa C (scalars at cell centers, `v1` on x-faces, `v2` on
//! y-faces). Vertical: full levels include both end points `p0` and `p1`, so
//! the bottom boundary value is a stored unknown; `omega` lives on half levels
//! (the end points plus the midpoints between full levels).

use crate::error::{Error, Result};
use crate::params::SimParams;

/// Where a field's values live.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Staggering {
    /// Cell centers at full levels.
    Cell,
    /// x-faces at full levels (first velocity component).
    XFace,
    /// y-faces at full levels (second velocity component).
    YFace,
    /// Cell centers at half levels (`omega`).
    HalfLevel,
    /// Cell centers, single level (surface fields).
    Surface,
}

impl Staggering {
    pub fn tag(self) -> u32 {
        match self {
            Staggering::Cell => 0,
            Staggering::XFace => 1,
            Staggering::YFace => 2,
            Staggering::HalfLevel => 3,
            Staggering::Surface => 4,
        }
    }

    pub fn from_tag(tag: u32) -> Option<Self> {
        Some(match tag {
            0 => Staggering::Cell,
            1 => Staggering::XFace,
            2 => Staggering::YFace,
            3 => Staggering::HalfLevel,
            4 => Staggering::Surface,
            _ => return None,
        })
    }
}

/// Which part of the boundary a full level touches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryTag {
    /// p = p1, the lower (Robin) boundary.
    Bottom,
    /// p = p0, the upper (Neumann) boundary.
    Top,
    Interior,
}

/// Storage shape plus per-axis quadrature weights of one staggering.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub n: [usize; 3],
    pub wx: Vec<f64>,
    pub wy: Vec<f64>,
    pub wz: Vec<f64>,
}

impl Layout {
    pub fn len(&self) -> usize {
        self.n[0] * self.n[1] * self.n[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.n[1] + j) * self.n[0] + i
    }

    /// Quadrature weight of every stored value.
    pub fn weights(&self) -> Vec<f64> {
        let mut w = Vec::with_capacity(self.len());
        for &wk in &self.wz {
            for &wj in &self.wy {
                for &wi in &self.wx {
                    w.push(wi * wj * wk);
                }
            }
        }
        w
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub np: usize,
    pub lx: f64,
    pub ly: f64,
    pub dx: f64,
    pub dy: f64,
    pub dp: f64,
    pub p0: f64,
    pub p1: f64,
    /// Full levels, `p[0] = p0`, `p[np-1] = p1`.
    pub p: Vec<f64>,
    /// Trapezoid weights of the full levels; they sum to `p1 - p0`.
    pub wp: Vec<f64>,
    /// Half levels: `p0`, the midpoints, `p1` (length `np + 1`).
    pub p_half: Vec<f64>,
    pub wp_half: Vec<f64>,
}

fn trapezoid_weights(nodes: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    let mut w = vec![0.0; n];
    for k in 0..n.saturating_sub(1) {
        let h = nodes[k + 1] - nodes[k];
        w[k] += 0.5 * h;
        w[k + 1] += 0.5 * h;
    }
    w
}

impl Grid {
    pub fn new(
        nx: usize,
        ny: usize,
        np: usize,
        lx: f64,
        ly: f64,
        p0: f64,
        p1: f64,
    ) -> Result<Self> {
        if np < 2 {
            return Err(Error::Validation(format!(
                "at least 2 vertical levels required (np = {np})"
            )));
        }
        if nx < 1 || ny < 1 {
            return Err(Error::Validation("at least 1 horizontal cell per direction".into()));
        }
        if !(lx > 0.0 && ly > 0.0 && p0 < p1) {
            return Err(Error::Validation("Lx > 0, Ly > 0 and p0 < p1 required".into()));
        }
        let dp = (p1 - p0) / (np - 1) as f64;
        let mut p: Vec<f64> = (0..np).map(|k| p0 + k as f64 * dp).collect();
        p[np - 1] = p1;
        let wp = trapezoid_weights(&p);
        let mut p_half = Vec::with_capacity(np + 1);
        p_half.push(p0);
        for k in 0..np - 1 {
            p_half.push(0.5 * (p[k] + p[k + 1]));
        }
        p_half.push(p1);
        let wp_half = trapezoid_weights(&p_half);
        Ok(Self {
            nx,
            ny,
            np,
            lx,
            ly,
            dx: lx / nx as f64,
            dy: ly / ny as f64,
            dp,
            p0,
            p1,
            p,
            wp,
            p_half,
            wp_half,
        })
    }

    pub fn cells(&self) -> usize {
        self.nx * self.ny * self.np
    }

    pub fn columns(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.ny + j) * self.nx + i
    }

    pub fn x(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dx
    }

    pub fn y(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.dy
    }

    pub fn x_face(&self, i: usize) -> f64 {
        i as f64 * self.dx
    }

    pub fn y_face(&self, j: usize) -> f64 {
        j as f64 * self.dy
    }

    /// |M'| = Lx Ly.
    pub fn area(&self) -> f64 {
        self.lx * self.ly
    }

    /// |M| = Lx Ly (p1 - p0).
    pub fn volume(&self) -> f64 {
        self.area() * (self.p1 - self.p0)
    }

    pub fn level_tag(&self, k: usize) -> BoundaryTag {
        if k == self.np - 1 {
            BoundaryTag::Bottom
        } else if k == 0 {
            BoundaryTag::Top
        } else {
            BoundaryTag::Interior
        }
    }

    /// True for cells adjacent to the lateral boundary.
    pub fn is_lateral(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i + 1 == self.nx || j + 1 == self.ny
    }

    pub fn cell_weight(&self, k: usize) -> f64 {
        self.dx * self.dy * self.wp[k]
    }

    pub fn layout(&self, stag: Staggering) -> Layout {
        let centers = |n: usize, h: f64| vec![h; n];
        let faces = |n: usize, h: f64| {
            let mut w = vec![h; n + 1];
            w[0] = 0.5 * h;
            w[n] = 0.5 * h;
            w
        };
        let (wx, wy, wz) = match stag {
            Staggering::Cell => (centers(self.nx, self.dx), centers(self.ny, self.dy), self.wp.clone()),
            Staggering::XFace => (faces(self.nx, self.dx), centers(self.ny, self.dy), self.wp.clone()),
            Staggering::YFace => (centers(self.nx, self.dx), faces(self.ny, self.dy), self.wp.clone()),
            Staggering::HalfLevel => {
                (centers(self.nx, self.dx), centers(self.ny, self.dy), self.wp_half.clone())
            }
            Staggering::Surface => (centers(self.nx, self.dx), centers(self.ny, self.dy), vec![1.0]),
        };
        Layout { n: [wx.len(), wy.len(), wz.len()], wx, wy, wz }
    }

    pub fn shape(&self, stag: Staggering) -> [usize; 3] {
        match stag {
            Staggering::Cell => [self.nx, self.ny, self.np],
            Staggering::XFace => [self.nx + 1, self.ny, self.np],
            Staggering::YFace => [self.nx, self.ny + 1, self.np],
            Staggering::HalfLevel => [self.nx, self.ny, self.np + 1],
            Staggering::Surface => [self.nx, self.ny, 1],
        }
    }
}

/// Builds the grid described by `params`.
pub fn build_grid(params: &SimParams) -> Result<Grid> {
    let c = &params.constants;
    Grid::new(params.nx, params.ny, params.np, params.lx, params.ly, c.p0, c.p1)
}
