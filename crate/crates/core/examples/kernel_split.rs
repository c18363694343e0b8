//! Matched polynomials for `1/|s|` and a few samples of the split `γ = κ + p^{2K}`.
//!
//! Run with `cargo run --example kernel_split`.

use nlfast::kernel::{match_polynomial, second_moment, split, RadialProfile};

fn main() -> nlfast::Result<()> {
    let gamma = RadialProfile::inverse_s();
    for k in 0..=3 {
        let poly = match_polynomial(&gamma, k)?;
        let exact: Vec<String> = poly.exact_coeffs().iter().map(ToString::to_string).collect();
        println!("K = {k}: p(s) coefficients of s^0, s^2, .. = [{}]", exact.join(", "));
    }

    let s = split(&gamma, 2)?;
    println!("\n{:>6} {:>12} {:>12} {:>12}", "s", "gamma", "p", "kappa");
    for t in [0.1, 0.25, 0.5, 0.75, 0.9, 0.99, 1.0] {
        println!(
            "{t:>6.2} {:>12.6} {:>12.6} {:>12.3e}",
            gamma.eval(t)?,
            s.polynomial().eval(t),
            s.kappa(t)?
        );
    }

    println!("\nsecond moments:");
    for p in [
        RadialProfile::inverse_s(),
        RadialProfile::conical_inverse_s(),
        RadialProfile::polynomial_truncated(0)?,
    ] {
        println!("  {:?}: {:.10}", p.family(), second_moment(&p));
    }
    Ok(())
}
