//! Matrix-free Krylov solvers for the volume-constrained problem `-L u = f`.
//!
//! Unknowns live on the interior grid nodes only; the zero exterior value is built into
//! the operator, so no boundary rows appear.

use crate::error::{config_err, Error, Result};
use crate::geometry::Grid;
use crate::operator::{check_len, DenseOperator, LinearOperator};
use crate::stats::{norm2, rel_inf_error};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Cg,
    /// CG on the normal equations `AᵀA x = Aᵀ f`.
    Cgnr,
    /// CG if a symmetry probe passes, CGNR otherwise.
    Auto,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cg" => Ok(Method::Cg),
            "cgnr" => Ok(Method::Cgnr),
            "auto" => Ok(Method::Auto),
            _ => Err(config_err(format!("unknown solver method '{s}'"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Cg => "CG",
            Method::Cgnr => "CGNR",
            Method::Auto => "auto",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// `‖f - A u‖₂ / ‖f‖₂`, recomputed from the returned solution.
    pub final_residual: f64,
    pub solution: Vec<f64>,
    pub method: Method,
    pub converged: bool,
}

/// `-A`, so that `-L` can be handed to the solver.
pub struct Negated<'a>(pub &'a dyn LinearOperator);

impl LinearOperator for Negated<'_> {
    fn size(&self) -> usize {
        self.0.size()
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.0.apply(x)?.into_iter().map(|v| -v).collect())
    }

    fn apply_transpose(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.0.apply_transpose(x)?.into_iter().map(|v| -v).collect())
    }
}

fn checked(v: Vec<f64>) -> Result<Vec<f64>> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(v)
    } else {
        Err(Error::NonFinite("operator application"))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// True when `A v` and `Aᵀ v` agree to `1e-12` relative for a fixed probe vector.
pub fn looks_symmetric(op: &dyn LinearOperator) -> Result<bool> {
    let n = op.size();
    let v: Vec<f64> = (0..n).map(|i| ((i * 7919) % 97) as f64 / 97.0 - 0.5).collect();
    let a = checked(op.apply(&v)?)?;
    let at = checked(op.apply_transpose(&v)?)?;
    Ok(rel_inf_error(&at, &a) <= 1e-12)
}

pub fn residual(op: &dyn LinearOperator, f: &[f64], u: &[f64]) -> Result<f64> {
    let au = checked(op.apply(u)?)?;
    let r: Vec<f64> = f.iter().zip(&au).map(|(a, b)| a - b).collect();
    let nf = norm2(f);
    Ok(if nf == 0.0 { norm2(&r) } else { norm2(&r) / nf })
}

/// Solves `A u = f` from a zero initial guess. Non-convergence is reported, not raised.
pub fn solve_dirichlet(
    op: &dyn LinearOperator,
    f: &[f64],
    tol: f64,
    max_iter: usize,
    method: Method,
) -> Result<SolveReport> {
    check_len(op.size(), f.len())?;
    if !(tol > 0.0) {
        return Err(config_err(format!("tolerance must be positive, got {tol}")));
    }
    if f.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("right-hand side"));
    }
    let method = match method {
        Method::Auto => {
            if looks_symmetric(op)? {
                Method::Cg
            } else {
                Method::Cgnr
            }
        }
        m => m,
    };
    let n = f.len();
    let nf = norm2(f);
    if nf == 0.0 {
        return Ok(SolveReport {
            iterations: 0,
            final_residual: 0.0,
            solution: vec![0.0; n],
            method,
            converged: true,
        });
    }
    let (solution, iterations) = match method {
        Method::Cg => cg(op, f, tol * nf, max_iter)?,
        _ => cgnr(op, f, tol * nf, max_iter)?,
    };
    let final_residual = residual(op, f, &solution)?;
    Ok(SolveReport {
        iterations,
        final_residual,
        converged: final_residual <= tol,
        solution,
        method,
    })
}

fn cg(op: &dyn LinearOperator, f: &[f64], target: f64, max_iter: usize) -> Result<(Vec<f64>, usize)> {
    let mut x = vec![0.0; f.len()];
    let mut r = f.to_vec();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    for it in 0..max_iter {
        if rr.sqrt() <= target {
            return Ok((x, it));
        }
        let q = checked(op.apply(&p)?)?;
        let pq = dot(&p, &q);
        if pq == 0.0 {
            return Ok((x, it));
        }
        let alpha = rr / pq;
        axpy(&mut x, alpha, &p);
        axpy(&mut r, -alpha, &q);
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + beta * *pi;
        }
    }
    Ok((x, max_iter))
}

fn cgnr(op: &dyn LinearOperator, f: &[f64], target: f64, max_iter: usize) -> Result<(Vec<f64>, usize)> {
    let mut x = vec![0.0; f.len()];
    let mut r = f.to_vec();
    let mut s = checked(op.apply_transpose(&r)?)?;
    let mut p = s.clone();
    let mut gamma = dot(&s, &s);
    for it in 0..max_iter {
        if norm2(&r) <= target || gamma == 0.0 {
            return Ok((x, it));
        }
        let q = checked(op.apply(&p)?)?;
        let qq = dot(&q, &q);
        if qq == 0.0 {
            return Ok((x, it));
        }
        let alpha = gamma / qq;
        axpy(&mut x, alpha, &p);
        axpy(&mut r, -alpha, &q);
        s = checked(op.apply_transpose(&r)?)?;
        let gamma_new = dot(&s, &s);
        let beta = gamma_new / gamma;
        gamma = gamma_new;
        for (pi, si) in p.iter_mut().zip(&s) {
            *pi = si + beta * *pi;
        }
    }
    Ok((x, max_iter))
}

/// LU solve of `A u = f`.
pub fn dense_direct_solve(a: &DenseOperator, f: &[f64]) -> Result<Vec<f64>> {
    check_len(a.n(), f.len())?;
    let lu = a.to_matrix().lu();
    let b = nalgebra::DVector::from_column_slice(f);
    let x = lu
        .solve(&b)
        .ok_or_else(|| Error::Construction("matrix is singular".into()))?;
    checked(x.as_slice().to_vec())
}

/// `u*(x) = Π_j sin(2π x_j) x_j (1 - x_j)` sampled at the grid nodes.
pub fn manufactured_solution(grid: &Grid) -> Vec<f64> {
    let d = grid.dimension();
    grid.positions()
        .chunks(d)
        .map(|x| {
            x.iter()
                .map(|&t| (2.0 * std::f64::consts::PI * t).sin() * t * (1.0 - t))
                .product()
        })
        .collect()
}

/// `f = A u*` for the given (already negated) operator.
pub fn manufactured_rhs(op: &dyn LinearOperator, grid: &Grid) -> Result<(Vec<f64>, Vec<f64>)> {
    let u = manufactured_solution(grid);
    let f = checked(op.apply(&u)?)?;
    Ok((u, f))
}
