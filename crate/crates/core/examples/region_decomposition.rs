//! Decomposes `B(x, r) ∩ [0,1]²` into dyadic panels and compares the two inclusion rules.

use nlfast::geometry::Grid;
use nlfast::tree::{build_tree, decompose_region_with, InclusionRule};

fn main() -> nlfast::Result<()> {
    let grid = Grid::new(2, 64)?;
    let tree = build_tree(&grid);
    let center = [0.3, 0.55];
    let radius = 0.25;

    for rule in [InclusionRule::Leaf, InclusionRule::Point] {
        let dec = decompose_region_with(&tree, &center, radius, rule);
        println!("{rule:?}: {} panels, {} recursive calls", dec.panels.len(), dec.recur_calls);
        for level in 0..=tree.depth() {
            let count = dec.panels_at_level(level).count();
            if count > 0 {
                println!("  level {level}: {count}");
            }
        }
        println!("  covered nodes: {}", dec.covered_nodes(&tree).len());
    }
    Ok(())
}
