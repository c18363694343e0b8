//! Full `1/|s|` operator as smooth part (compressed) plus polynomial part (tree).

use nlfast::geometry::Grid;
use nlfast::kernel::{HorizonField, KernelSpec, RadialProfile};
use nlfast::operator::{apply_full_dense, LinearOperator, SmoothBackend, SplitOperator};
use nlfast::stats::{random_vector, rel_inf_error};

fn main() -> nlfast::Result<()> {
    let grid = Grid::new(1, 1024)?;
    let spec = KernelSpec::new(1, RadialProfile::inverse_s(), HorizonField::Constant(0.25))?;
    let u = random_vector(grid.node_count(), 1);
    let reference = apply_full_dense(&spec, &grid, &u)?;

    for k in 0..=3 {
        let backend = SmoothBackend::Hodlr {
            epsilon: 1e-8,
            leaf_size: 32,
        };
        let op = SplitOperator::new(&spec, &grid, k, backend)?;
        let stored = op.hodlr().map_or(0, |h| h.stored_floats());
        let out = op.apply(&u)?;
        println!(
            "K = {k}: smooth part stores {stored} floats ({:.1}% of dense), deviation {:.2e}",
            100.0 * stored as f64 / (grid.node_count() * grid.node_count()) as f64,
            rel_inf_error(&out, &reference)
        );
    }
    Ok(())
}
