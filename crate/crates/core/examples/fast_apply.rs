//! Heterogeneous-horizon operator with the `K = 3` polynomial kernel, applied through the
//! tree and checked against the dense quadrature.

use std::time::Instant;

use nlfast::geometry::Grid;
use nlfast::kernel::{HorizonField, KernelSpec, RadialProfile};
use nlfast::operator::{apply_truncated_dense, TruncatedOperator, TruncatedOptions};
use nlfast::stats::{random_vector, rel_inf_error};

fn main() -> nlfast::Result<()> {
    let grid = Grid::new(1, 2048)?;
    let spec = KernelSpec::new(1, RadialProfile::polynomial_truncated(3)?, HorizonField::GaussianBump(0.25))?;
    let opts = TruncatedOptions::default();

    let t = Instant::now();
    let op = TruncatedOperator::new(&spec, &grid, opts)?;
    println!("setup: {:?}, {} stored panels", t.elapsed(), op.stored_panels());

    let u = random_vector(grid.node_count(), 42);
    let t = Instant::now();
    let (fast, stats) = op.apply_with_stats(&u)?;
    let fast_time = t.elapsed();
    let t = Instant::now();
    let dense = apply_truncated_dense(&spec, &grid, opts, &u)?;
    let dense_time = t.elapsed();

    println!("fast:  {fast_time:?} ({stats:?})");
    println!("dense: {dense_time:?}");
    println!("relative difference: {:.2e}", rel_inf_error(&fast, &dense));
    Ok(())
}
