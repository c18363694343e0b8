//! Hierarchical off-diagonal low-rank (HODLR) compression of dense operators and the
//! rank/memory profile over kernel regularity.

use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{config_err, Result};
use crate::geometry::Grid;
use crate::kernel::{split, HorizonField, KernelSpec, RadialProfile};
use crate::operator::{check_len, full_dense, smooth_dense, DenseOperator, LinearOperator};

pub const DEFAULT_LEAF_SIZE: usize = 32;

/// Dense diagonal leaf block.
#[derive(Debug, Clone)]
pub struct DiagonalBlock {
    pub offset: usize,
    pub data: DMatrix<f64>,
}

/// Off-diagonal block `A[rows, cols] ≈ U V`.
#[derive(Debug, Clone)]
pub struct LowRankBlock {
    /// Level of the 2×2 split that produced the block, starting at 1.
    pub level: u32,
    pub row0: usize,
    pub col0: usize,
    pub u: DMatrix<f64>,
    pub v: DMatrix<f64>,
}

impl LowRankBlock {
    pub fn rank(&self) -> usize {
        self.u.ncols()
    }

    pub fn rows(&self) -> usize {
        self.u.nrows()
    }

    pub fn cols(&self) -> usize {
        self.v.ncols()
    }

    pub fn stored_floats(&self) -> usize {
        self.rank() * (self.rows() + self.cols())
    }
}

#[derive(Debug, Clone)]
pub struct HodlrMatrix {
    n: usize,
    depth: u32,
    leaf_size: usize,
    epsilon: f64,
    diagonal: Vec<DiagonalBlock>,
    off_diagonal: Vec<LowRankBlock>,
}

/// Relative-Frobenius truncated SVD: the smallest rank whose discarded tail satisfies
/// `‖A - UV‖_F ≤ ε ‖A‖_F`.
fn truncated_factors(block: DMatrix<f64>, epsilon: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let (rows, cols) = block.shape();
    let norm2: f64 = block.iter().map(|v| v * v).sum();
    if norm2 == 0.0 {
        return (DMatrix::zeros(rows, 0), DMatrix::zeros(0, cols));
    }
    let svd = block.svd(true, true);
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sigma: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let budget = epsilon * epsilon * norm2;
    let mut tail = 0.0;
    let mut rank = sigma.len();
    while rank > 0 && tail + sigma[rank - 1] * sigma[rank - 1] <= budget {
        tail += sigma[rank - 1] * sigma[rank - 1];
        rank -= 1;
    }
    let u_full = svd.u.expect("left vectors requested");
    let vt_full = svd.v_t.expect("right vectors requested");
    let mut u = DMatrix::zeros(rows, rank);
    let mut v = DMatrix::zeros(rank, cols);
    for (r, &i) in order.iter().take(rank).enumerate() {
        u.set_column(r, &(u_full.column(i) * sigma[r]));
        v.set_row(r, &vt_full.row(i));
    }
    (u, v)
}

struct BlockPlan {
    level: u32,
    row0: usize,
    col0: usize,
    rows: usize,
    cols: usize,
}

fn plan(offset: usize, size: usize, level: u32, leaf_size: usize, diag: &mut Vec<(usize, usize)>, off: &mut Vec<BlockPlan>, depth: &mut u32) {
    *depth = (*depth).max(level);
    if size <= leaf_size {
        diag.push((offset, size));
        return;
    }
    let half = size / 2;
    let rest = size - half;
    off.push(BlockPlan {
        level: level + 1,
        row0: offset,
        col0: offset + half,
        rows: half,
        cols: rest,
    });
    off.push(BlockPlan {
        level: level + 1,
        row0: offset + half,
        col0: offset,
        rows: rest,
        cols: half,
    });
    plan(offset, half, level + 1, leaf_size, diag, off, depth);
    plan(offset + half, rest, level + 1, leaf_size, diag, off, depth);
}

fn sub_block(a: &DenseOperator, row0: usize, col0: usize, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |i, k| a.get(row0 + i, col0 + k))
}

pub fn hodlr_compress(a: &DenseOperator, epsilon: f64, leaf_size: usize) -> Result<HodlrMatrix> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(config_err(format!("compression tolerance must be positive, got {epsilon}")));
    }
    if leaf_size == 0 {
        return Err(config_err("leaf size must be positive"));
    }
    let n = a.n();
    let mut diag = Vec::new();
    let mut off = Vec::new();
    let mut depth = 0;
    plan(0, n, 0, leaf_size, &mut diag, &mut off, &mut depth);
    let diagonal = diag
        .into_iter()
        .map(|(offset, size)| DiagonalBlock {
            offset,
            data: sub_block(a, offset, offset, size, size),
        })
        .collect();
    let off_diagonal = off
        .into_par_iter()
        .map(|p| {
            let (u, v) = truncated_factors(sub_block(a, p.row0, p.col0, p.rows, p.cols), epsilon);
            LowRankBlock {
                level: p.level,
                row0: p.row0,
                col0: p.col0,
                u,
                v,
            }
        })
        .collect();
    Ok(HodlrMatrix {
        n,
        depth,
        leaf_size,
        epsilon,
        diagonal,
        off_diagonal,
    })
}

/// Relative Frobenius reconstruction error of one factored block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockError {
    pub level: u32,
    pub rank: usize,
    pub relative_error: f64,
}

impl HodlrMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn leaf_size(&self) -> usize {
        self.leaf_size
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn diagonal_blocks(&self) -> &[DiagonalBlock] {
        &self.diagonal
    }

    pub fn off_diagonal_blocks(&self) -> &[LowRankBlock] {
        &self.off_diagonal
    }

    pub fn stored_floats(&self) -> usize {
        self.diagonal.iter().map(|b| b.data.len()).sum::<usize>()
            + self.off_diagonal.iter().map(LowRankBlock::stored_floats).sum::<usize>()
    }

    pub fn dense_floats(&self) -> usize {
        self.n * self.n
    }

    pub fn ratio(&self) -> f64 {
        self.stored_floats() as f64 / self.dense_floats() as f64
    }

    pub fn max_rank(&self) -> usize {
        self.off_diagonal.iter().map(LowRankBlock::rank).max().unwrap_or(0)
    }

    /// Maximum off-diagonal rank at levels `1..=depth`.
    pub fn level_ranks(&self) -> Vec<usize> {
        let mut out = vec![0; self.depth as usize];
        for b in &self.off_diagonal {
            let slot = &mut out[b.level as usize - 1];
            *slot = (*slot).max(b.rank());
        }
        out
    }

    /// Compares every factored block against the corresponding block of `a`.
    pub fn block_errors(&self, a: &DenseOperator) -> Result<Vec<BlockError>> {
        check_len(self.n, a.n())?;
        Ok(self
            .off_diagonal
            .par_iter()
            .map(|b| {
                let exact = sub_block(a, b.row0, b.col0, b.rows(), b.cols());
                let norm = exact.norm();
                let err = (&exact - &b.u * &b.v).norm();
                BlockError {
                    level: b.level,
                    rank: b.rank(),
                    relative_error: if norm == 0.0 { err } else { err / norm },
                }
            })
            .collect())
    }

    pub fn to_dense(&self) -> DenseOperator {
        let n = self.n;
        let mut data = vec![0.0; n * n];
        for b in &self.diagonal {
            for i in 0..b.data.nrows() {
                for k in 0..b.data.ncols() {
                    data[(b.offset + i) * n + b.offset + k] = b.data[(i, k)];
                }
            }
        }
        for b in &self.off_diagonal {
            let block = &b.u * &b.v;
            for i in 0..b.rows() {
                for k in 0..b.cols() {
                    data[(b.row0 + i) * n + b.col0 + k] = block[(i, k)];
                }
            }
        }
        DenseOperator::from_rows(n, data).expect("square by construction")
    }

    fn multiply(&self, x: &[f64], transpose: bool) -> Result<Vec<f64>> {
        check_len(self.n, x.len())?;
        let mut out = vec![0.0; self.n];
        for b in &self.diagonal {
            let m = b.data.nrows();
            let xs = nalgebra::DVectorView::from_slice(&x[b.offset..b.offset + m], m);
            let y = if transpose { b.data.tr_mul(&xs) } else { &b.data * xs };
            for (o, v) in out[b.offset..b.offset + m].iter_mut().zip(y.iter()) {
                *o += v;
            }
        }
        let parts: Vec<(usize, Vec<f64>)> = self
            .off_diagonal
            .par_iter()
            .filter(|b| b.rank() > 0)
            .map(|b| {
                if transpose {
                    let xs = nalgebra::DVectorView::from_slice(&x[b.row0..b.row0 + b.rows()], b.rows());
                    let t = b.u.tr_mul(&xs);
                    (b.col0, b.v.tr_mul(&t).as_slice().to_vec())
                } else {
                    let xs = nalgebra::DVectorView::from_slice(&x[b.col0..b.col0 + b.cols()], b.cols());
                    let t = &b.v * xs;
                    (b.row0, (&b.u * t).as_slice().to_vec())
                }
            })
            .collect();
        for (start, y) in parts {
            for (o, v) in out[start..start + y.len()].iter_mut().zip(y) {
                *o += v;
            }
        }
        Ok(out)
    }
}

pub fn hodlr_apply(h: &HodlrMatrix, u: &[f64]) -> Result<Vec<f64>> {
    h.multiply(u, false)
}

impl LinearOperator for HodlrMatrix {
    fn size(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.multiply(x, false)
    }

    fn apply_transpose(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.multiply(x, true)
    }
}

/// Difference-form dense operator for regularity `k`: the raw `InverseS` kernel for
/// `k = -1`, otherwise the smooth part `κ` of its order-`k` split.
pub fn regularity_operator(k: i32, d: usize, n: usize, delta: f64) -> Result<DenseOperator> {
    let grid = Grid::new(d, n)?;
    let spec = KernelSpec::new(d, RadialProfile::inverse_s(), HorizonField::Constant(delta))?;
    match k {
        -1 => full_dense(&spec, &grid),
        k if k >= 0 => smooth_dense(&split(&spec.profile, k as u32)?, &spec, &grid),
        _ => Err(config_err(format!("regularity must be >= -1, got {k}"))),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankProfileRow {
    pub regularity_k: i32,
    pub n: usize,
    pub delta: f64,
    pub epsilon: f64,
    pub stored_floats: usize,
    pub dense_floats: usize,
    pub ratio: f64,
    pub max_rank: usize,
    pub level_ranks: Vec<usize>,
}

/// Compresses the operator of every regularity in `regularities` on an `n^d` grid.
pub fn rank_profile(
    regularities: &[i32],
    d: usize,
    n: usize,
    delta: f64,
    epsilon: f64,
    leaf_size: usize,
) -> Result<Vec<RankProfileRow>> {
    regularities
        .iter()
        .map(|&k| {
            let a = regularity_operator(k, d, n, delta)?;
            let h = hodlr_compress(&a, epsilon, leaf_size)?;
            Ok(RankProfileRow {
                regularity_k: k,
                n: h.n(),
                delta,
                epsilon,
                stored_floats: h.stored_floats(),
                dense_floats: h.dense_floats(),
                ratio: h.ratio(),
                max_rank: h.max_rank(),
                level_ranks: h.level_ranks(),
            })
        })
        .collect()
}

pub const RANK_PROFILE_HEADER: [&str; 8] = [
    "regularity_k",
    "N",
    "delta",
    "epsilon",
    "stored_floats",
    "dense_floats",
    "ratio",
    "max_rank",
];

pub fn write_rank_profile<W: Write>(rows: &[RankProfileRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RANK_PROFILE_HEADER)?;
    for r in rows {
        w.write_record([
            r.regularity_k.to_string(),
            r.n.to_string(),
            r.delta.to_string(),
            r.epsilon.to_string(),
            r.stored_floats.to_string(),
            r.dense_floats.to_string(),
            r.ratio.to_string(),
            r.max_rank.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `(max - min) / max` of the stored-float counts.
pub fn profile_spread(rows: &[RankProfileRow]) -> f64 {
    let max = rows.iter().map(|r| r.stored_floats).max().unwrap_or(0) as f64;
    let min = rows.iter().map(|r| r.stored_floats).min().unwrap_or(0) as f64;
    if max == 0.0 {
        0.0
    } else {
        (max - min) / max
    }
}
