//! HODLR storage of the smooth part `κ` as the matching order grows, written as CSV.

use nlfast::compress::{profile_spread, rank_profile, write_rank_profile};

fn main() -> nlfast::Result<()> {
    let n = 512;
    for delta in [0.25, 1.0] {
        let rows = rank_profile(&[-1, 0, 1, 2, 3], 1, n, delta, 1e-8, 32)?;
        write_rank_profile(&rows, std::io::stdout().lock())?;
        for r in &rows {
            println!("# k = {:>2}: level ranks {:?}", r.regularity_k, r.level_ranks);
        }
        println!("# spread over k: {:.1}%\n", 100.0 * profile_spread(&rows));
    }
    Ok(())
}
