//! `L x²` at interior nodes approaches the second moment `M₂` as the grid is refined.

use nlfast::kernel::{second_moment, RadialProfile};
use nlfast::operator::local_limit_at;

fn main() -> nlfast::Result<()> {
    let delta = 0.125;
    for profile in [RadialProfile::inverse_s(), RadialProfile::polynomial_truncated(0)?] {
        let m2 = second_moment(&profile);
        println!("{:?}, M2 = {m2:.6}", profile.family());
        let mut previous: Option<f64> = None;
        for n in [256, 512, 1024, 2048, 4096] {
            let err = (local_limit_at(&profile, delta, n, 0.5)? - m2).abs() / m2;
            let order = previous.map(|p| (p / err).log2());
            match order {
                Some(o) => println!("  n = {n:>5}: rel. error {err:.3e}, order {o:.2}"),
                None => println!("  n = {n:>5}: rel. error {err:.3e}"),
            }
            previous = Some(err);
        }
    }
    Ok(())
}
