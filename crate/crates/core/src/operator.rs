//! Nonlocal operators on the uniform grid.
//!
//! [`TruncatedOperator`] applies the polynomial-kernel operator
//!
//! ```text
//! L^P u(x) = C(x)/δ(x)^{d+2} ( ∫_{B_δ(x) ∩ Ω} p(|y-x|/δ(x)) u(y) dy - mass(x) u(x) )
//! ```
//!
//! in three phases: panel decompositions of every interaction ball are computed once at
//! construction, then each application accumulates per-panel moments of `u` bottom-up
//! and sums the moments of the panels listed for each node. The dense functions in this
//! module evaluate the same quadrature by brute force and serve as oracles.

use rayon::prelude::*;

use crate::compress::{hodlr_compress, HodlrMatrix};
use crate::error::{config_err, Error, Result};
use crate::geometry::{cube_intersects_ball, Grid, PanelId, MAX_DIM};
use crate::kernel::{distance, split, KernelSpec, ProfileFamily, RadialProfile, SplitKernel, SymmetryClass};
use crate::tree::{accumulate_moments, check_moment_order, InclusionRule, Tree, MOMENT_ORIGIN};

/// A square linear map on grid functions.
pub trait LinearOperator {
    fn size(&self) -> usize;
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>>;
    fn apply_transpose(&self, x: &[f64]) -> Result<Vec<f64>>;
}

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

/// `|B_r|` in `d` dimensions.
pub fn ball_volume(d: usize, r: f64) -> f64 {
    match d {
        1 => 2.0 * r,
        2 => std::f64::consts::PI * r * r,
        3 => 4.0 / 3.0 * std::f64::consts::PI * r * r * r,
        _ => panic!("unsupported dimension {d}"),
    }
}

fn unit_sphere_area(d: usize) -> f64 {
    match d {
        1 => 2.0,
        2 => 2.0 * std::f64::consts::PI,
        3 => 4.0 * std::f64::consts::PI,
        _ => panic!("unsupported dimension {d}"),
    }
}

/// `∫_{B_1} p(|z|) dz` for `p(s) = Σ_j c_j s^{2j}`. Equals `|B_1|` when `p ≡ 1`.
pub fn polynomial_ball_mass(d: usize, coeffs: &[f64]) -> f64 {
    let area = unit_sphere_area(d);
    coeffs
        .iter()
        .enumerate()
        .map(|(j, c)| c * area / (2 * j + d) as f64)
        .sum()
}

/// How the `-mass(x) u(x)` term is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MassForm {
    /// Exact integral of the kernel over the full ball (`|B_δ|` for `p ≡ 1`), independent
    /// of the boundary.
    Continuum,
    /// Quadrature of the kernel over the included nodes, so that the operator becomes
    /// `h^d Σ_k P(x, y_k) (u(y_k) - u(x))` and annihilates constants.
    Discrete,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TruncatedOptions {
    pub rule: InclusionRule,
    pub mass: MassForm,
}

impl Default for TruncatedOptions {
    fn default() -> Self {
        Self {
            rule: InclusionRule::Leaf,
            mass: MassForm::Continuum,
        }
    }
}

impl TruncatedOptions {
    pub fn new(rule: InclusionRule, mass: MassForm) -> Self {
        Self { rule, mass }
    }
}

/// Work counters for one application of the fast operator.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ApplyStats {
    /// Arithmetic operations of the bottom-up moment pass.
    pub step2_ops: u64,
    /// Arithmetic operations of the per-node panel sums.
    pub step3_ops: u64,
    /// Number of panels read over all nodes.
    pub panel_visits: u64,
}

fn truncated_polynomial(spec: &KernelSpec) -> Result<(u32, Vec<f64>)> {
    match spec.profile.family() {
        ProfileFamily::PolynomialTruncated(k) => {
            let poly = spec.profile.matched_polynomial().expect("truncated profile has a polynomial");
            Ok((k, poly.coeffs().iter().map(|c| c * spec.profile.scale()).collect()))
        }
        other => Err(config_err(format!(
            "the truncated operator needs a PolynomialTruncated profile, got {other:?}"
        ))),
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Polynomial-kernel operator with precomputed panel decompositions.
#[derive(Debug, Clone)]
pub struct TruncatedOperator {
    spec: KernelSpec,
    grid: Grid,
    tree: Tree,
    options: TruncatedOptions,
    order: u32,
    coeffs: Vec<f64>,
    width: usize,
    positions: Vec<f64>,
    /// `C(x_i) / δ_i^{d+2}`
    prefactor: Vec<f64>,
    /// Moment weights `w_m(x_i)`, `width` per node.
    weights: Vec<f64>,
    offsets: Vec<usize>,
    panels: Vec<u32>,
    /// Coefficient of `-u(x_i)` inside the bracket.
    mass: Vec<f64>,
    recur_calls: u64,
}

impl TruncatedOperator {
    pub fn new(spec: &KernelSpec, grid: &Grid, options: TruncatedOptions) -> Result<Self> {
        spec.validate()?;
        if spec.dimension != grid.dimension() {
            return Err(Error::DimensionMismatch {
                expected: spec.dimension,
                got: grid.dimension(),
            });
        }
        if spec.symmetry != SymmetryClass::NonDivergence {
            return Err(config_err(
                "the fast truncated operator needs a horizon depending on x only",
            ));
        }
        let (order, coeffs) = truncated_polynomial(spec)?;
        check_moment_order(grid.dimension(), order)?;
        let width = 2 * order as usize + 1;
        let d = grid.dimension();
        let tree = Tree::new(*grid);
        let positions = grid.positions();
        let n_nodes = grid.node_count();

        let deltas: Vec<f64> = (0..n_nodes)
            .map(|i| spec.horizon.eval(&positions[i * d..(i + 1) * d]))
            .collect();
        let prefactor: Vec<f64> = (0..n_nodes)
            .map(|i| {
                let x = &positions[i * d..(i + 1) * d];
                spec.coefficient.eval(x, x) / deltas[i].powi(d as i32 + 2)
            })
            .collect();

        let mut weights = vec![0.0; n_nodes * width];
        for i in 0..n_nodes {
            let x = positions[i * d] - MOMENT_ORIGIN;
            let w = &mut weights[i * width..(i + 1) * width];
            for (j, &c) in coeffs.iter().enumerate() {
                let scale = c / deltas[i].powi(2 * j as i32);
                for (m, wm) in w.iter_mut().enumerate().take(2 * j + 1) {
                    *wm += scale * binomial(2 * j, m) * (-x).powi((2 * j - m) as i32);
                }
            }
        }

        // Step 1: decompositions, stored as compressed rows of global panel indices.
        let per_node: Vec<(Vec<u32>, usize)> = (0..n_nodes)
            .into_par_iter()
            .map(|i| {
                let mut out = Vec::new();
                let calls =
                    tree.decompose_into(&positions[i * d..(i + 1) * d], deltas[i], options.rule, &mut out);
                (out, calls)
            })
            .collect();
        let mut offsets = Vec::with_capacity(n_nodes + 1);
        offsets.push(0);
        let mut panels = Vec::with_capacity(per_node.iter().map(|(p, _)| p.len()).sum());
        let mut recur_calls = 0u64;
        for (p, calls) in per_node {
            panels.extend_from_slice(&p);
            offsets.push(panels.len());
            recur_calls += calls as u64;
        }

        let mut op = Self {
            spec: spec.clone(),
            grid: *grid,
            tree,
            options,
            order,
            coeffs,
            width,
            positions,
            prefactor,
            weights,
            offsets,
            panels,
            mass: Vec::new(),
            recur_calls,
        };
        op.mass = match options.mass {
            MassForm::Continuum => {
                let unit = polynomial_ball_mass(d, &op.coeffs);
                deltas.iter().map(|delta| unit * delta.powi(d as i32)).collect()
            }
            MassForm::Discrete => {
                let h_d = grid.cell_volume();
                op.panel_sums(&vec![1.0; n_nodes])?.0.into_iter().map(|s| h_d * s).collect()
            }
        };
        Ok(op)
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn tree(&self) -> &Tree {
        &self.tree
    }

    pub fn options(&self) -> TruncatedOptions {
        self.options
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    /// Total recursive calls spent decomposing all interaction balls.
    pub fn recur_calls(&self) -> u64 {
        self.recur_calls
    }

    /// Total number of stored panels over all decompositions.
    pub fn stored_panels(&self) -> usize {
        self.panels.len()
    }

    /// Panels listed for node `i`.
    pub fn decomposition(&self, i: usize) -> Vec<PanelId> {
        self.panels[self.offsets[i]..self.offsets[i + 1]]
            .iter()
            .map(|&g| self.tree.panel_at(g as usize))
            .collect()
    }

    /// `S_i = Σ_panels Σ_m w_m(x_i) M_m(panel)` for every node.
    fn panel_sums(&self, u: &[f64]) -> Result<(Vec<f64>, ApplyStats)> {
        let moments = accumulate_moments(&self.tree, u, self.order)?;
        let width = self.width;
        let sums: Vec<f64> = (0..self.grid.node_count())
            .into_par_iter()
            .map(|i| {
                let mut t = [0.0; 7];
                for &g in &self.panels[self.offsets[i]..self.offsets[i + 1]] {
                    let row = moments.row(g as usize);
                    for m in 0..width {
                        t[m] += row[m];
                    }
                }
                let w = &self.weights[i * width..(i + 1) * width];
                (0..width).map(|m| w[m] * t[m]).sum::<f64>()
            })
            .collect();
        let visits = self.panels.len() as u64;
        let stats = ApplyStats {
            step2_ops: moments.ops,
            step3_ops: visits * width as u64 + 2 * (width * self.grid.node_count()) as u64,
            panel_visits: visits,
        };
        Ok((sums, stats))
    }

    pub fn apply_with_stats(&self, u: &[f64]) -> Result<(Vec<f64>, ApplyStats)> {
        check_len(self.grid.node_count(), u.len())?;
        let (sums, stats) = self.panel_sums(u)?;
        let h_d = self.grid.cell_volume();
        let out = sums
            .iter()
            .enumerate()
            .map(|(i, s)| self.prefactor[i] * (h_d * s - self.mass[i] * u[i]))
            .collect();
        Ok((out, stats))
    }

    /// `Aᵀv`: per-panel polynomial coefficients are scattered from every node's panel
    /// list, pushed down to the leaves and evaluated there.
    fn transpose_impl(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len(self.grid.node_count(), v.len())?;
        let width = self.width;
        let h_d = self.grid.cell_volume();
        let mut local = vec![0.0; self.tree.total_panels() * width];
        for i in 0..self.grid.node_count() {
            let a = self.prefactor[i] * h_d * v[i];
            if a == 0.0 {
                continue;
            }
            let w = &self.weights[i * width..(i + 1) * width];
            for &g in &self.panels[self.offsets[i]..self.offsets[i + 1]] {
                let row = &mut local[g as usize * width..(g as usize + 1) * width];
                for m in 0..width {
                    row[m] += a * w[m];
                }
            }
        }
        let d = self.grid.dimension();
        for level in 1..=self.tree.depth() {
            let side = 1usize << level;
            let child_off = self.tree.level_offset(level);
            let parent_off = self.tree.level_offset(level - 1);
            for c in 0..self.tree.panels_at(level) {
                let mut rest = c;
                let mut parent = 0;
                let mut stride = 1;
                for _ in 0..d {
                    parent += ((rest % side) / 2) * stride;
                    rest /= side;
                    stride *= side / 2;
                }
                for m in 0..width {
                    local[(child_off + c) * width + m] += local[(parent_off + parent) * width + m];
                }
            }
        }
        let leaf_off = self.tree.level_offset(self.tree.depth());
        Ok((0..self.grid.node_count())
            .map(|k| {
                let row = &local[(leaf_off + k) * width..(leaf_off + k + 1) * width];
                let y = self.positions[k * d] - MOMENT_ORIGIN;
                let poly = row.iter().rev().fold(0.0, |acc, &c| acc * y + c);
                poly - self.prefactor[k] * self.mass[k] * v[k]
            })
            .collect())
    }
}

impl LinearOperator for TruncatedOperator {
    fn size(&self) -> usize {
        self.grid.node_count()
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.apply_with_stats(x)?.0)
    }

    fn apply_transpose(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.transpose_impl(x)
    }
}

pub fn apply_truncated_fast(op: &TruncatedOperator, u: &[f64]) -> Result<Vec<f64>> {
    op.apply(u)
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator {
    n: usize,
    data: Vec<f64>,
}

impl DenseOperator {
    pub fn from_rows(n: usize, data: Vec<f64>) -> Result<Self> {
        check_len(n * n, data.len())?;
        Ok(Self { n, data })
    }

    /// Builds the matrix row by row (in parallel).
    pub fn from_row_fn<F>(n: usize, row: F) -> Self
    where
        F: Fn(usize, &mut [f64]) + Sync,
    {
        let mut data = vec![0.0; n * n];
        data.par_chunks_mut(n.max(1)).enumerate().for_each(|(i, r)| row(i, r));
        Self { n, data }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.data[i * self.n + k]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `‖A - Aᵀ‖_F / ‖A‖_F`.
    pub fn asymmetry(&self) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.n {
            for k in 0..self.n {
                let t = self.get(i, k) - self.get(k, i);
                acc += t * t;
            }
        }
        let norm = self.frobenius_norm();
        if norm == 0.0 {
            0.0
        } else {
            acc.sqrt() / norm
        }
    }

    pub fn nonzeros(&self) -> usize {
        self.data.iter().filter(|v| **v != 0.0).count()
    }

    pub fn to_matrix(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_row_slice(self.n, self.n, &self.data)
    }
}

impl LinearOperator for DenseOperator {
    fn size(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n, x.len())?;
        Ok(self
            .data
            .par_chunks(self.n.max(1))
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect())
    }

    fn apply_transpose(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n, x.len())?;
        let mut out = vec![0.0; self.n];
        for (row, xi) in self.data.chunks(self.n.max(1)).zip(x) {
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * xi;
            }
        }
        Ok(out)
    }
}

/// Per-row data shared by the dense truncated routines.
struct TruncatedRows {
    d: usize,
    h_d: f64,
    coeffs: Vec<f64>,
    positions: Vec<f64>,
    deltas: Vec<f64>,
    prefactor: Vec<f64>,
    unit_mass: f64,
    grid: Grid,
    options: TruncatedOptions,
}

impl TruncatedRows {
    fn new(spec: &KernelSpec, grid: &Grid, options: TruncatedOptions) -> Result<Self> {
        spec.validate()?;
        if spec.dimension != grid.dimension() {
            return Err(Error::DimensionMismatch {
                expected: spec.dimension,
                got: grid.dimension(),
            });
        }
        if spec.symmetry != SymmetryClass::NonDivergence {
            return Err(config_err("truncated operators need a horizon depending on x only"));
        }
        let (_, coeffs) = truncated_polynomial(spec)?;
        let d = grid.dimension();
        let positions = grid.positions();
        let n = grid.node_count();
        let deltas: Vec<f64> = (0..n).map(|i| spec.horizon.eval(&positions[i * d..(i + 1) * d])).collect();
        let prefactor = (0..n)
            .map(|i| {
                let x = &positions[i * d..(i + 1) * d];
                spec.coefficient.eval(x, x) / deltas[i].powi(d as i32 + 2)
            })
            .collect();
        Ok(Self {
            d,
            h_d: grid.cell_volume(),
            unit_mass: polynomial_ball_mass(d, &coeffs),
            coeffs,
            positions,
            deltas,
            prefactor,
            grid: *grid,
            options,
        })
    }

    fn x(&self, i: usize) -> &[f64] {
        &self.positions[i * self.d..(i + 1) * self.d]
    }

    fn included(&self, i: usize, k: usize) -> bool {
        let x = self.x(i);
        let y = self.x(k);
        match self.options.rule {
            InclusionRule::Point => distance(x, y) < self.deltas[i],
            InclusionRule::Leaf => {
                let multi = self.grid.multi_index(k);
                let mut index = [0u32; MAX_DIM];
                for j in 0..self.d {
                    index[j] = multi[j] as u32;
                }
                let leaf = PanelId {
                    level: self.grid.levels(),
                    index,
                    dim: self.d as u8,
                };
                cube_intersects_ball(&leaf.bounds(), x, self.deltas[i])
            }
        }
    }

    fn p(&self, s: f64) -> f64 {
        let s2 = s * s;
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * s2 + c)
    }

    /// Fills row `i` of the matrix.
    fn fill_row(&self, i: usize, row: &mut [f64]) {
        let x = self.x(i);
        let mut discrete_mass = 0.0;
        for (k, entry) in row.iter_mut().enumerate() {
            if self.included(i, k) {
                let v = self.h_d * self.p(distance(x, self.x(k)) / self.deltas[i]);
                *entry = self.prefactor[i] * v;
                discrete_mass += v;
            } else {
                *entry = 0.0;
            }
        }
        let mass = match self.options.mass {
            MassForm::Continuum => self.unit_mass * self.deltas[i].powi(self.d as i32),
            MassForm::Discrete => discrete_mass,
        };
        row[i] -= self.prefactor[i] * mass;
    }

    fn apply_row(&self, i: usize, u: &[f64]) -> f64 {
        let x = self.x(i);
        let mut acc = 0.0;
        let mut discrete_mass = 0.0;
        for (k, uk) in u.iter().enumerate() {
            if self.included(i, k) {
                let v = self.p(distance(x, self.x(k)) / self.deltas[i]);
                acc += v * uk;
                discrete_mass += v;
            }
        }
        let mass = match self.options.mass {
            MassForm::Continuum => self.unit_mass * self.deltas[i].powi(self.d as i32),
            MassForm::Discrete => self.h_d * discrete_mass,
        };
        self.prefactor[i] * (self.h_d * acc - mass * u[i])
    }
}

pub fn assemble_truncated_dense(
    spec: &KernelSpec,
    grid: &Grid,
    options: TruncatedOptions,
) -> Result<DenseOperator> {
    let rows = TruncatedRows::new(spec, grid, options)?;
    Ok(DenseOperator::from_row_fn(grid.node_count(), |i, r| rows.fill_row(i, r)))
}

/// Matrix-free `O(N²)` evaluation of the truncated operator.
pub fn apply_truncated_dense(
    spec: &KernelSpec,
    grid: &Grid,
    options: TruncatedOptions,
    u: &[f64],
) -> Result<Vec<f64>> {
    check_len(grid.node_count(), u.len())?;
    let rows = TruncatedRows::new(spec, grid, options)?;
    Ok((0..grid.node_count()).into_par_iter().map(|i| rows.apply_row(i, u)).collect())
}

/// Difference-form operator `h^d Σ_{k≠i} ω(x_i, y_k) (u_k - u_i)` for a radial function `f`
/// supported in `[0, 1)`; entries with `|y - x| >= δ(x, y)` vanish.
fn difference_rows<F>(spec: &KernelSpec, grid: &Grid, f: F) -> Result<DenseOperator>
where
    F: Fn(f64) -> f64 + Sync,
{
    spec.validate()?;
    check_len(spec.dimension, grid.dimension())?;
    let d = grid.dimension();
    let positions = grid.positions();
    let h_d = grid.cell_volume();
    let n = grid.node_count();
    Ok(DenseOperator::from_row_fn(n, |i, row| {
        let x = &positions[i * d..(i + 1) * d];
        let mut diag = 0.0;
        for (k, entry) in row.iter_mut().enumerate() {
            if k == i {
                continue;
            }
            let y = &positions[k * d..(k + 1) * d];
            let w = h_d * spec.omega_with(x, y, distance(x, y), &f);
            *entry = w;
            diag += w;
        }
        row[i] = -diag;
    }))
}

fn difference_apply<F>(spec: &KernelSpec, grid: &Grid, u: &[f64], f: F) -> Result<Vec<f64>>
where
    F: Fn(f64) -> f64 + Sync,
{
    spec.validate()?;
    check_len(spec.dimension, grid.dimension())?;
    check_len(grid.node_count(), u.len())?;
    let d = grid.dimension();
    let positions = grid.positions();
    let h_d = grid.cell_volume();
    Ok((0..grid.node_count())
        .into_par_iter()
        .map(|i| {
            let x = &positions[i * d..(i + 1) * d];
            let mut acc = 0.0;
            for (k, uk) in u.iter().enumerate() {
                if k != i {
                    let y = &positions[k * d..(k + 1) * d];
                    acc += spec.omega_with(x, y, distance(x, y), &f) * (uk - u[i]);
                }
            }
            h_d * acc
        })
        .collect())
}

/// Dense matrix of the full kernel `ω` in difference form.
pub fn full_dense(spec: &KernelSpec, grid: &Grid) -> Result<DenseOperator> {
    difference_rows(spec, grid, |a| spec.profile.eval_unchecked(a))
}

pub fn apply_full_dense(spec: &KernelSpec, grid: &Grid, u: &[f64]) -> Result<Vec<f64>> {
    difference_apply(spec, grid, u, |a| spec.profile.eval_unchecked(a))
}

/// Dense matrix of the smooth part `κ` in difference form. The profile of `spec` is
/// ignored in favour of `κ`.
pub fn smooth_dense(split: &SplitKernel, spec: &KernelSpec, grid: &Grid) -> Result<DenseOperator> {
    difference_rows(spec, grid, |a| split.kappa_unchecked(a))
}

pub fn apply_smooth_dense(
    split: &SplitKernel,
    spec: &KernelSpec,
    grid: &Grid,
    u: &[f64],
) -> Result<Vec<f64>> {
    difference_apply(spec, grid, u, |a| split.kappa_unchecked(a))
}

/// Backend for the smooth part of a split operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SmoothBackend {
    Dense,
    Hodlr { epsilon: f64, leaf_size: usize },
}

#[derive(Debug, Clone)]
enum SmoothPart {
    Dense(DenseOperator),
    Hodlr(HodlrMatrix),
}

/// `L = L^κ + L^P`: smooth part applied densely or from a compressed matrix, polynomial
/// part through [`TruncatedOperator`] with point inclusion and discrete mass, so that the
/// sum reproduces the full difference-form operator.
#[derive(Debug, Clone)]
pub struct SplitOperator {
    split: SplitKernel,
    truncated: TruncatedOperator,
    smooth: SmoothPart,
}

impl SplitOperator {
    pub fn new(spec: &KernelSpec, grid: &Grid, k: u32, backend: SmoothBackend) -> Result<Self> {
        if spec.profile.family() != ProfileFamily::InverseS {
            return Err(config_err("split operators are built from the InverseS profile"));
        }
        let split = split(&spec.profile, k)?;
        let truncated_spec = spec.with_profile(split.truncated_profile()?);
        let truncated = TruncatedOperator::new(
            &truncated_spec,
            grid,
            TruncatedOptions::new(InclusionRule::Point, MassForm::Discrete),
        )?;
        let dense = smooth_dense(&split, spec, grid)?;
        let smooth = match backend {
            SmoothBackend::Dense => SmoothPart::Dense(dense),
            SmoothBackend::Hodlr { epsilon, leaf_size } => {
                SmoothPart::Hodlr(hodlr_compress(&dense, epsilon, leaf_size)?)
            }
        };
        Ok(Self {
            split,
            truncated,
            smooth,
        })
    }

    pub fn split(&self) -> &SplitKernel {
        &self.split
    }

    pub fn truncated(&self) -> &TruncatedOperator {
        &self.truncated
    }

    pub fn hodlr(&self) -> Option<&HodlrMatrix> {
        match &self.smooth {
            SmoothPart::Hodlr(h) => Some(h),
            SmoothPart::Dense(_) => None,
        }
    }

    fn smooth_op(&self) -> &dyn LinearOperator {
        match &self.smooth {
            SmoothPart::Dense(d) => d,
            SmoothPart::Hodlr(h) => h,
        }
    }
}

impl LinearOperator for SplitOperator {
    fn size(&self) -> usize {
        self.truncated.size()
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = self.smooth_op().apply(x)?;
        for (o, t) in out.iter_mut().zip(self.truncated.apply(x)?) {
            *o += t;
        }
        Ok(out)
    }

    fn apply_transpose(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = self.smooth_op().apply_transpose(x)?;
        for (o, t) in out.iter_mut().zip(self.truncated.apply_transpose(x)?) {
            *o += t;
        }
        Ok(out)
    }
}

pub fn apply_split(
    spec: &KernelSpec,
    grid: &Grid,
    k: u32,
    u: &[f64],
    backend: SmoothBackend,
) -> Result<Vec<f64>> {
    SplitOperator::new(spec, grid, k, backend)?.apply(u)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeSample {
    pub node: usize,
    pub x: f64,
    pub value: f64,
}

/// Full-kernel operator (1d, `C ≡ 1`, constant horizon `delta`) applied to `u = x²` at the
/// nodes whose interaction interval stays inside `(0, 1)`. The continuum value there is
/// `M₂ = ∫ s² γ(|s|) ds` for every such node.
pub fn local_limit_probe(profile: &RadialProfile, delta: f64, n: usize) -> Result<Vec<ProbeSample>> {
    let grid = Grid::new(1, n)?;
    let spec = KernelSpec::new(1, profile.clone(), crate::kernel::HorizonField::Constant(delta))?;
    let h = grid.h();
    let xs: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) * h).collect();
    let prefactor = 1.0 / delta.powi(3);
    Ok(xs
        .iter()
        .enumerate()
        .filter(|(_, &x)| x - delta > 0.0 && x + delta < 1.0)
        .map(|(i, &x)| {
            let mut acc = 0.0;
            for (k, &y) in xs.iter().enumerate() {
                if k != i {
                    let r = (y - x).abs();
                    if r < delta {
                        acc += profile.eval_inside(r / delta) * (y * y - x * x);
                    }
                }
            }
            ProbeSample {
                node: i,
                x,
                value: h * prefactor * acc * spec.coefficient.eval(&[x], &[x]),
            }
        })
        .collect())
}

/// Probe value at the interior node nearest to `x`.
pub fn local_limit_at(profile: &RadialProfile, delta: f64, n: usize, x: f64) -> Result<f64> {
    local_limit_probe(profile, delta, n)?
        .into_iter()
        .min_by(|a, b| (a.x - x).abs().total_cmp(&(b.x - x).abs()))
        .map(|s| s.value)
        .ok_or_else(|| config_err("no interior nodes for this horizon"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::HorizonField;

    fn truncated_spec(d: usize, k: u32, horizon: HorizonField) -> KernelSpec {
        KernelSpec::new(d, RadialProfile::polynomial_truncated(k).unwrap(), horizon).unwrap()
    }

    #[test]
    fn ball_volumes() {
        assert_eq!(ball_volume(1, 0.5), 1.0);
        assert!((ball_volume(2, 1.0) - std::f64::consts::PI).abs() < 1e-15);
        assert!((ball_volume(3, 0.25) - 4.0 / 3.0 * std::f64::consts::PI / 64.0).abs() < 1e-15);
        for d in 1..=3 {
            assert!((polynomial_ball_mass(d, &[1.0]) - ball_volume(d, 1.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_input_gives_zero() {
        let grid = Grid::new(1, 64).unwrap();
        let spec = truncated_spec(1, 2, HorizonField::Constant(0.25));
        let op = TruncatedOperator::new(&spec, &grid, TruncatedOptions::default()).unwrap();
        assert!(op.apply(&[0.0; 64]).unwrap().iter().all(|&v| v == 0.0));
        let dense = apply_truncated_dense(&spec, &grid, TruncatedOptions::default(), &[0.0; 64]).unwrap();
        assert!(dense.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn interior_constant_count() {
        // K = 0, u ≡ 1, point rule: h·#included - 2δ ≈ 0 at an interior node.
        let grid = Grid::new(1, 256).unwrap();
        let delta = 0.1;
        let spec = truncated_spec(1, 0, HorizonField::Constant(delta));
        let opts = TruncatedOptions::new(InclusionRule::Point, MassForm::Continuum);
        let out = apply_truncated_dense(&spec, &grid, opts, &[1.0; 256]).unwrap();
        let bracket = out[128] * delta.powi(3);
        assert!(bracket.abs() <= 2.0 * grid.h(), "{bracket}");
    }

    #[test]
    fn fast_matches_dense_small() {
        for (d, n, k) in [(1, 32, 0), (1, 64, 3), (2, 8, 0), (3, 4, 0)] {
            let grid = Grid::new(d, n).unwrap();
            let spec = truncated_spec(d, k, HorizonField::Constant(0.3));
            let u: Vec<f64> = (0..grid.node_count()).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
            for opts in [
                TruncatedOptions::default(),
                TruncatedOptions::new(InclusionRule::Point, MassForm::Discrete),
            ] {
                let op = TruncatedOperator::new(&spec, &grid, opts).unwrap();
                let fast = op.apply(&u).unwrap();
                let dense = apply_truncated_dense(&spec, &grid, opts, &u).unwrap();
                let mat = assemble_truncated_dense(&spec, &grid, opts).unwrap().apply(&u).unwrap();
                let scale = dense.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                for i in 0..u.len() {
                    assert!((fast[i] - dense[i]).abs() <= 1e-12 * scale, "d={d} k={k} i={i}");
                    assert!((mat[i] - dense[i]).abs() <= 1e-12 * scale);
                }
            }
        }
    }

    #[test]
    fn transpose_matches_dense_transpose() {
        for (d, n, k, horizon) in [
            (1, 64, 3, HorizonField::GaussianBump(0.2)),
            (2, 16, 0, HorizonField::GaussianBump(0.2)),
        ] {
            let grid = Grid::new(d, n).unwrap();
            let spec = truncated_spec(d, k, horizon);
            let opts = TruncatedOptions::default();
            let op = TruncatedOperator::new(&spec, &grid, opts).unwrap();
            let mat = assemble_truncated_dense(&spec, &grid, opts).unwrap();
            let v: Vec<f64> = (0..grid.node_count()).map(|i| ((i * 13) % 7) as f64 - 3.0).collect();
            let fast = op.apply_transpose(&v).unwrap();
            let dense = mat.apply_transpose(&v).unwrap();
            let scale = dense.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for i in 0..v.len() {
                assert!((fast[i] - dense[i]).abs() <= 1e-11 * scale, "d={d} i={i}");
            }
        }
    }

    #[test]
    fn rejects_bad_configurations() {
        let grid = Grid::new(2, 8).unwrap();
        let spec = truncated_spec(2, 1, HorizonField::Constant(0.3));
        assert!(TruncatedOperator::new(&spec, &grid, TruncatedOptions::default()).is_err());
        let spec = KernelSpec::new(2, RadialProfile::inverse_s(), HorizonField::Constant(0.3)).unwrap();
        assert!(TruncatedOperator::new(&spec, &grid, TruncatedOptions::default()).is_err());
        let spec = truncated_spec(1, 0, HorizonField::Constant(0.3));
        assert!(TruncatedOperator::new(&spec, &grid, TruncatedOptions::default()).is_err());
        let op = TruncatedOperator::new(&spec, &Grid::new(1, 8).unwrap(), TruncatedOptions::default()).unwrap();
        assert!(op.apply(&[1.0; 7]).is_err());
    }

    #[test]
    fn smooth_part_annihilates_constants() {
        let grid = Grid::new(1, 128).unwrap();
        let spec = KernelSpec::new(1, RadialProfile::inverse_s(), HorizonField::Constant(0.25)).unwrap();
        let s = split(&spec.profile, 2).unwrap();
        let out = apply_smooth_dense(&s, &spec, &grid, &[3.0; 128]).unwrap();
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn linear_probe_vanishes() {
        let grid = Grid::new(1, 256).unwrap();
        let spec = KernelSpec::new(1, RadialProfile::inverse_s(), HorizonField::Constant(0.125)).unwrap();
        let u: Vec<f64> = (0..256).map(|i| (i as f64 + 0.5) / 256.0).collect();
        let out = apply_full_dense(&spec, &grid, &u).unwrap();
        for (i, &x) in u.iter().enumerate() {
            if x > 0.125 && x < 0.875 {
                assert!(out[i].abs() < 1e-10, "{i}: {}", out[i]);
            }
        }
    }
}
