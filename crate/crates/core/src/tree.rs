//! Complete `2^d`-ary tree of dyadic panels over the unit cube, region decomposition
//! of `B(x, r) ∩ Ω` into panels, and bottom-up moment accumulation.
//!
//! The tree is implicit: panels at level `l` are numbered row-major by their multi-index
//! and offset by the panel count of all coarser levels. A leaf holds exactly one grid
//! node, and the leaf's flat index equals the node's flat index.

use rayon::prelude::*;

use crate::error::{config_err, Result};
use crate::geometry::{cube_inside_ball, cube_intersects_ball, Grid, PanelId, MAX_DIM};
use crate::kernel::distance;

/// Which grid nodes take part in the integral over `B(x, r) ∩ Ω`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InclusionRule {
    /// A node counts iff its leaf panel intersects the open ball.
    Leaf,
    /// A node counts iff it lies strictly inside the ball.
    Point,
}

#[derive(Debug, Clone)]
pub struct Tree {
    grid: Grid,
    level_offsets: Vec<usize>,
}

impl Tree {
    pub fn new(grid: Grid) -> Self {
        let d = grid.dimension() as u32;
        let mut level_offsets = Vec::with_capacity(grid.levels() as usize + 2);
        let mut acc = 0;
        for l in 0..=grid.levels() {
            level_offsets.push(acc);
            acc += 1usize << (d * l);
        }
        level_offsets.push(acc);
        Self {
            grid,
            level_offsets,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dimension(&self) -> usize {
        self.grid.dimension()
    }

    /// `L`; leaves live at this level.
    pub fn depth(&self) -> u32 {
        self.grid.levels()
    }

    pub fn panels_at(&self, level: u32) -> usize {
        1usize << (self.dimension() as u32 * level)
    }

    pub fn total_panels(&self) -> usize {
        *self.level_offsets.last().unwrap()
    }

    pub fn level_offset(&self, level: u32) -> usize {
        self.level_offsets[level as usize]
    }

    pub fn root(&self) -> PanelId {
        PanelId::root(self.dimension())
    }

    pub fn is_leaf(&self, id: &PanelId) -> bool {
        id.level == self.depth()
    }

    fn flat_in_level(&self, id: &PanelId) -> usize {
        let side = 1usize << id.level;
        id.index[..self.dimension()]
            .iter()
            .fold(0, |acc, &k| acc * side + k as usize)
    }

    /// Position of `id` in the global panel numbering.
    pub fn global_index(&self, id: &PanelId) -> usize {
        self.level_offset(id.level) + self.flat_in_level(id)
    }

    pub fn panel_at(&self, global: usize) -> PanelId {
        let level = self.level_offsets.partition_point(|&o| o <= global) as u32 - 1;
        let mut flat = global - self.level_offset(level);
        let side = 1usize << level;
        let mut index = [0u32; MAX_DIM];
        for j in (0..self.dimension()).rev() {
            index[j] = (flat % side) as u32;
            flat /= side;
        }
        PanelId {
            level,
            index,
            dim: self.dimension() as u8,
        }
    }

    /// Children in axis-major order: the offset along the first axis varies slowest.
    pub fn children(&self, id: &PanelId) -> impl Iterator<Item = PanelId> + '_ {
        let d = self.dimension();
        let id = *id;
        let count = if self.is_leaf(&id) { 0 } else { 1usize << d };
        (0..count).map(move |b| {
            let mut index = [0u32; MAX_DIM];
            for (j, slot) in index.iter_mut().enumerate().take(d) {
                let bit = (b >> (d - 1 - j)) & 1;
                *slot = 2 * id.index[j] + bit as u32;
            }
            PanelId {
                level: id.level + 1,
                index,
                dim: id.dim,
            }
        })
    }

    pub fn parent(&self, id: &PanelId) -> Option<PanelId> {
        if id.level == 0 {
            return None;
        }
        let mut p = *id;
        p.level -= 1;
        for k in p.index.iter_mut().take(self.dimension()) {
            *k /= 2;
        }
        Some(p)
    }

    /// Grid nodes contained in a panel, ascending.
    pub fn nodes_in(&self, id: &PanelId) -> Vec<usize> {
        let d = self.dimension();
        let shift = self.depth() - id.level;
        let width = 1usize << shift;
        let n = self.grid.n();
        let mut out = Vec::with_capacity(width.pow(d as u32));
        let mut offset = [0usize; MAX_DIM];
        loop {
            let mut flat = 0;
            for j in 0..d {
                flat = flat * n + ((id.index[j] as usize) << shift) + offset[j];
            }
            out.push(flat);
            let mut j = d;
            loop {
                if j == 0 {
                    return out;
                }
                j -= 1;
                offset[j] += 1;
                if offset[j] < width {
                    break;
                }
                offset[j] = 0;
            }
        }
    }

    /// Node index of a leaf panel.
    pub fn leaf_node(&self, id: &PanelId) -> usize {
        debug_assert!(self.is_leaf(id));
        self.flat_in_level(id)
    }

    /// Runs the recursive decomposition, pushing global panel indices. Returns the number
    /// of recursive calls made.
    pub(crate) fn decompose_into(
        &self,
        center: &[f64],
        radius: f64,
        rule: InclusionRule,
        out: &mut Vec<u32>,
    ) -> usize {
        let mut calls = 0;
        self.recur(&self.root(), center, radius, rule, out, &mut calls);
        calls
    }

    fn recur(
        &self,
        q: &PanelId,
        center: &[f64],
        radius: f64,
        rule: InclusionRule,
        out: &mut Vec<u32>,
        calls: &mut usize,
    ) {
        *calls += 1;
        let bounds = q.bounds();
        if cube_inside_ball(&bounds, center, radius) {
            out.push(self.global_index(q) as u32);
        } else if cube_intersects_ball(&bounds, center, radius) {
            if !self.is_leaf(q) {
                for child in self.children(q) {
                    self.recur(&child, center, radius, rule, out, calls);
                }
            } else {
                let keep = match rule {
                    InclusionRule::Leaf => true,
                    InclusionRule::Point => {
                        let h = self.grid.h();
                        let d = self.dimension();
                        let mut node = [0.0; MAX_DIM];
                        for j in 0..d {
                            node[j] = (q.index[j] as f64 + 0.5) * h;
                        }
                        distance(&node[..d], center) < radius
                    }
                };
                if keep {
                    out.push(self.global_index(q) as u32);
                }
            }
        }
    }
}

pub fn build_tree(grid: &Grid) -> Tree {
    Tree::new(*grid)
}

/// Panels whose disjoint union covers `B(center, radius) ∩ Ω` at leaf resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub center: Vec<f64>,
    pub radius: f64,
    pub rule: InclusionRule,
    pub panels: Vec<PanelId>,
    /// Number of recursive calls `𝒩_d(x)` spent producing the decomposition.
    pub recur_calls: usize,
}

impl Decomposition {
    /// Grid nodes covered by the listed panels, ascending.
    pub fn covered_nodes(&self, tree: &Tree) -> Vec<usize> {
        let mut nodes: Vec<usize> = self.panels.iter().flat_map(|p| tree.nodes_in(p)).collect();
        nodes.sort_unstable();
        nodes
    }

    pub fn panels_at_level(&self, level: u32) -> impl Iterator<Item = &PanelId> {
        self.panels.iter().filter(move |p| p.level == level)
    }
}

/// Decomposition under the leaf-inclusion rule.
pub fn decompose_region(tree: &Tree, center: &[f64], radius: f64) -> Decomposition {
    decompose_region_with(tree, center, radius, InclusionRule::Leaf)
}

pub fn decompose_region_with(
    tree: &Tree,
    center: &[f64],
    radius: f64,
    rule: InclusionRule,
) -> Decomposition {
    let mut raw = Vec::new();
    let recur_calls = tree.decompose_into(center, radius, rule, &mut raw);
    Decomposition {
        center: center.to_vec(),
        radius,
        rule,
        panels: raw.into_iter().map(|g| tree.panel_at(g as usize)).collect(),
        recur_calls,
    }
}

/// Total recursive calls over the decompositions centred at every grid node with the
/// given per-node radii.
pub fn count_recur_calls(tree: &Tree, radii: &[f64]) -> u64 {
    let positions = tree.grid().positions();
    let d = tree.dimension();
    radii
        .par_iter()
        .enumerate()
        .map_init(Vec::new, |buf, (i, &r)| {
            buf.clear();
            tree.decompose_into(&positions[i * d..(i + 1) * d], r, InclusionRule::Leaf, buf) as u64
        })
        .sum()
}

/// Coordinate origin of the moments.
pub const MOMENT_ORIGIN: f64 = 0.5;

/// Per-panel partial sums `M_m(Q) = Σ_{x_k ∈ Q} (x_k - 1/2)^m u(x_k)`, `m = 0..2K`, with `x_k`
/// the (first) coordinate of the node.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentTable {
    order: u32,
    width: usize,
    values: Vec<f64>,
    /// Additions and multiplications spent building the table.
    pub ops: u64,
}

impl MomentTable {
    /// The matching order `K`.
    pub fn order(&self) -> u32 {
        self.order
    }

    /// Number of moments per panel, `2K + 1`.
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn moment(&self, tree: &Tree, id: &PanelId, m: usize) -> f64 {
        self.values[tree.global_index(id) * self.width + m]
    }

    pub(crate) fn row(&self, global: usize) -> &[f64] {
        &self.values[global * self.width..(global + 1) * self.width]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Checks the supported (dimension, K) combinations: any `K <= 3` in 1d, `K = 0` otherwise.
pub fn check_moment_order(dimension: usize, k: u32) -> Result<()> {
    match (dimension, k) {
        (1, 0..=3) | (2 | 3, 0) => Ok(()),
        _ => Err(config_err(format!(
            "moment order K = {k} is not supported in dimension {dimension}"
        ))),
    }
}

pub fn accumulate_moments(tree: &Tree, u: &[f64], k: u32) -> Result<MomentTable> {
    check_moment_order(tree.dimension(), k)?;
    let n_nodes = tree.grid().node_count();
    if u.len() != n_nodes {
        return Err(crate::Error::DimensionMismatch {
            expected: n_nodes,
            got: u.len(),
        });
    }
    let width = 2 * k as usize + 1;
    let mut values = vec![0.0; tree.total_panels() * width];
    let mut ops = 0u64;

    let leaf_offset = tree.level_offset(tree.depth());
    let h = tree.grid().h();
    let n = tree.grid().n();
    let d = tree.dimension();
    for (i, &ui) in u.iter().enumerate() {
        let row = &mut values[(leaf_offset + i) * width..(leaf_offset + i + 1) * width];
        row[0] = ui;
        if width > 1 {
            // First coordinate of node i (only 1d reaches here).
            let x = ((i / n.pow(d as u32 - 1)) as f64 + 0.5) * h - MOMENT_ORIGIN;
            for m in 1..width {
                row[m] = row[m - 1] * x;
            }
            ops += (width - 1) as u64;
        }
    }

    for level in (1..=tree.depth()).rev() {
        let child_off = tree.level_offset(level);
        let parent_off = tree.level_offset(level - 1);
        let side = 1usize << level;
        let parent_side = side / 2;
        for c in 0..tree.panels_at(level) {
            let mut rest = c;
            let mut parent = 0;
            let mut stride = 1;
            for _ in 0..d {
                parent += ((rest % side) / 2) * stride;
                rest /= side;
                stride *= parent_side;
            }
            let (lo, hi) = values.split_at_mut((child_off) * width);
            let src = &hi[c * width..(c + 1) * width];
            let dst = &mut lo[(parent_off + parent) * width..(parent_off + parent + 1) * width];
            for (a, b) in dst.iter_mut().zip(src) {
                *a += b;
            }
            ops += width as u64;
        }
    }

    Ok(MomentTable {
        order: k,
        width,
        values,
        ops,
    })
}
