//! Uniform cell-centred grids on `[0,1]^d`, dyadic panels and cube/ball predicates.

use crate::error::{config_err, Error, Result};

pub const MAX_DIM: usize = 3;

/// `n^d` nodes at cell centres `((k_1 + ½)h, .., (k_d + ½)h)`, `h = 1/n`, `n = 2^L`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid {
    dimension: usize,
    n: usize,
    levels: u32,
}

impl Grid {
    pub fn new(dimension: usize, n: usize) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dimension) {
            return Err(config_err(format!("dimension must be 1, 2 or 3, got {dimension}")));
        }
        if n < 2 || !n.is_power_of_two() {
            return Err(config_err(format!("nodes per axis must be a power of 2 (>= 2), got {n}")));
        }
        if n.checked_pow(dimension as u32).is_none_or(|total| total > u32::MAX as usize) {
            return Err(config_err(format!("grid {n}^{dimension} is too large")));
        }
        Ok(Self {
            dimension,
            n,
            levels: n.trailing_zeros(),
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Nodes per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// `L = log₂ n`.
    pub fn levels(&self) -> u32 {
        self.levels
    }

    /// `N = n^d`.
    pub fn node_count(&self) -> usize {
        self.n.pow(self.dimension as u32)
    }

    /// Quadrature weight `h^d`.
    pub fn cell_volume(&self) -> f64 {
        self.h().powi(self.dimension as i32)
    }

    /// Row-major: the first coordinate varies slowest.
    pub fn multi_index(&self, flat: usize) -> [usize; MAX_DIM] {
        let mut k = [0; MAX_DIM];
        let mut rest = flat;
        for j in (0..self.dimension).rev() {
            k[j] = rest % self.n;
            rest /= self.n;
        }
        k
    }

    pub fn flat_index(&self, k: &[usize]) -> usize {
        k[..self.dimension].iter().fold(0, |acc, &kj| acc * self.n + kj)
    }

    pub fn node_position(&self, flat: usize) -> Result<Vec<f64>> {
        if flat >= self.node_count() {
            return Err(Error::Domain(format!(
                "node index {flat} out of range for {} nodes",
                self.node_count()
            )));
        }
        let k = self.multi_index(flat);
        let h = self.h();
        Ok(k[..self.dimension].iter().map(|&kj| (kj as f64 + 0.5) * h).collect())
    }

    /// All node coordinates, `d` consecutive values per node.
    pub fn positions(&self) -> Vec<f64> {
        let h = self.h();
        let mut out = Vec::with_capacity(self.node_count() * self.dimension);
        for i in 0..self.node_count() {
            let k = self.multi_index(i);
            out.extend(k[..self.dimension].iter().map(|&kj| (kj as f64 + 0.5) * h));
        }
        out
    }
}

pub fn node_position(grid: &Grid, flat: usize) -> Result<Vec<f64>> {
    grid.node_position(flat)
}

/// Axis-aligned box; only the first `dim` axes are meaningful.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    dim: usize,
    min: [f64; MAX_DIM],
    max: [f64; MAX_DIM],
}

impl Aabb {
    pub fn new(min: &[f64], max: &[f64]) -> Result<Self> {
        if min.len() != max.len() || min.is_empty() || min.len() > MAX_DIM {
            return Err(config_err("box corners must share a dimension between 1 and 3"));
        }
        let mut b = Self {
            dim: min.len(),
            min: [0.0; MAX_DIM],
            max: [0.0; MAX_DIM],
        };
        for j in 0..b.dim {
            if !(min[j] < max[j]) {
                return Err(config_err(format!("degenerate box on axis {j}")));
            }
            b.min[j] = min[j];
            b.max[j] = max[j];
        }
        Ok(b)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn min(&self) -> &[f64] {
        &self.min[..self.dim]
    }

    pub fn max(&self) -> &[f64] {
        &self.max[..self.dim]
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        (0..self.dim).all(|j| self.min[j] <= p[j] && p[j] <= self.max[j])
    }
}

/// Dyadic cube `∏_j [k_j / 2^l, (k_j + 1) / 2^l]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PanelId {
    pub level: u32,
    pub index: [u32; MAX_DIM],
    pub dim: u8,
}

impl PanelId {
    pub fn new(dim: usize, level: u32, index: &[u32]) -> Result<Self> {
        if index.len() != dim || !(1..=MAX_DIM).contains(&dim) || level > 31 {
            return Err(config_err("invalid panel id"));
        }
        let side = 1u64 << level;
        let mut k = [0; MAX_DIM];
        for (j, &kj) in index.iter().enumerate() {
            if u64::from(kj) >= side {
                return Err(config_err(format!("panel index {kj} out of range at level {level}")));
            }
            k[j] = kj;
        }
        Ok(Self {
            level,
            index: k,
            dim: dim as u8,
        })
    }

    pub fn root(dim: usize) -> Self {
        Self {
            level: 0,
            index: [0; MAX_DIM],
            dim: dim as u8,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn bounds(&self) -> Aabb {
        let w = 1.0 / (1u64 << self.level) as f64;
        let mut b = Aabb {
            dim: self.dim(),
            min: [0.0; MAX_DIM],
            max: [0.0; MAX_DIM],
        };
        for j in 0..self.dim() {
            b.min[j] = self.index[j] as f64 * w;
            b.max[j] = (self.index[j] + 1) as f64 * w;
        }
        b
    }
}

pub fn panel_bounds(id: &PanelId) -> Aabb {
    id.bounds()
}

/// True iff every corner of `b` lies in the closed ball `|p - center| <= r`. Only the
/// farthest corner (per axis the farther face) needs to be checked.
pub fn cube_inside_ball(b: &Aabb, center: &[f64], r: f64) -> bool {
    let mut dmax = 0.0;
    for j in 0..b.dim {
        let lo = b.min[j] - center[j];
        let hi = b.max[j] - center[j];
        dmax += (lo * lo).max(hi * hi);
    }
    dmax <= r * r
}

/// Arvo's box/ball test: squared distance from `center` to the box, compared strictly
/// against `r²`. Boxes that only graze the sphere do not intersect.
pub fn cube_intersects_ball(b: &Aabb, center: &[f64], r: f64) -> bool {
    cube_intersects_ball_counted(b, center, r).0
}

/// [`cube_intersects_ball`] together with the number of arithmetic operations and
/// comparisons it performed.
pub fn cube_intersects_ball_counted(b: &Aabb, center: &[f64], r: f64) -> (bool, usize) {
    let mut ops = 0;
    let mut dmin = 0.0;
    for j in 0..b.dim {
        ops += 1;
        if b.min[j] > center[j] {
            let t = b.min[j] - center[j];
            dmin += t * t;
            ops += 3;
        } else {
            ops += 1;
            if b.max[j] < center[j] {
                let t = b.max[j] - center[j];
                dmin += t * t;
                ops += 3;
            }
        }
    }
    ops += 2;
    (dmin < r * r, ops)
}
