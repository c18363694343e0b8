//! Operation counts of the fast apply over growing grids, with fitted log-log slopes.

use nlfast::cli::{bench_record, bench_slopes};
use nlfast::config::{HorizonKind, RunConfig};

fn sweep(cfg: &RunConfig, sizes: &[usize]) -> nlfast::Result<()> {
    let records = sizes.iter().map(|&n| bench_record(cfg, n)).collect::<nlfast::Result<Vec<_>>>()?;
    println!("{:>8} {:>12} {:>12} {:>12} {:>10}", "N", "recur", "step2", "step3", "err");
    for r in &records {
        println!(
            "{:>8} {:>12} {:>12} {:>12} {:>10.1e}",
            r.n_nodes, r.recur_calls, r.step2_ops, r.step3_ops, r.max_rel_err_vs_dense
        );
    }
    for (name, slope) in bench_slopes(&records, cfg.timing) {
        println!("  slope {name}: {slope:.3}");
    }
    Ok(())
}

fn main() -> nlfast::Result<()> {
    println!("d = 1, K = 3, bump horizon");
    let cfg = RunConfig {
        split_k: 3,
        horizon_kind: HorizonKind::Bump,
        ..RunConfig::default()
    };
    sweep(&cfg, &[512, 1024, 2048, 4096])?;

    println!("\nd = 2, K = 0, delta = 1/2");
    let cfg = RunConfig {
        dimension: 2,
        delta0: 0.5,
        ..RunConfig::default()
    };
    sweep(&cfg, &[8, 16, 32, 64])
}
