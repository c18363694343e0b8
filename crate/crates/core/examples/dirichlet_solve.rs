//! Manufactured-solution solve of `-L u = f` with the fast operator, cross-checked with
//! LU on the dense matrix.

use nlfast::geometry::Grid;
use nlfast::kernel::{HorizonField, KernelSpec, RadialProfile};
use nlfast::operator::{assemble_truncated_dense, DenseOperator, TruncatedOperator, TruncatedOptions};
use nlfast::solve::{dense_direct_solve, manufactured_rhs, solve_dirichlet, Method, Negated};
use nlfast::stats::rel_inf_error;

fn main() -> nlfast::Result<()> {
    let grid = Grid::new(1, 512)?;
    let opts = TruncatedOptions::default();
    for horizon in [HorizonField::Constant(0.25), HorizonField::GaussianBump(0.125)] {
        let spec = KernelSpec::new(1, RadialProfile::polynomial_truncated(0)?, horizon)?;
        let op = TruncatedOperator::new(&spec, &grid, opts)?;
        let a = Negated(&op);
        let (exact, f) = manufactured_rhs(&a, &grid)?;
        let report = solve_dirichlet(&a, &f, 1e-10, 10 * grid.node_count(), Method::Auto)?;
        println!(
            "{horizon:?}: {} in {} iterations, residual {:.1e}, error {:.1e}",
            report.method,
            report.iterations,
            report.final_residual,
            rel_inf_error(&report.solution, &exact)
        );

        let dense = assemble_truncated_dense(&spec, &grid, opts)?;
        let n = dense.n();
        let negated = DenseOperator::from_rows(n, dense.as_slice().iter().map(|v| -v).collect())?;
        let direct = dense_direct_solve(&negated, &f)?;
        println!("  LU vs Krylov: {:.1e}", rel_inf_error(&report.solution, &direct));
    }
    Ok(())
}
