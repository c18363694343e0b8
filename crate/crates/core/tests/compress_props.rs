use nlfast::compress::{hodlr_apply, hodlr_compress, regularity_operator};
use nlfast::operator::LinearOperator;
use nlfast::stats::{random_vector, rel_inf_error};

#[test]
fn every_block_meets_tolerance() {
    for k in [-1, 0, 3] {
        let a = regularity_operator(k, 1, 512, 0.25).unwrap();
        let h = hodlr_compress(&a, 1e-8, 32).unwrap();
        for e in h.block_errors(&a).unwrap() {
            assert!(e.relative_error <= 1e-8, "k = {k}: {e:?}");
        }
    }
}

#[test]
fn storage_shrinks_with_looser_tolerance() {
    let a = regularity_operator(1, 1, 512, 0.25).unwrap();
    let tight = hodlr_compress(&a, 1e-8, 32).unwrap();
    let loose = hodlr_compress(&a, 1e-4, 32).unwrap();
    assert!(loose.stored_floats() <= tight.stored_floats());
}

#[test]
fn apply_matches_dense_and_is_linear() {
    let a = regularity_operator(3, 1, 1024, 0.25).unwrap();
    let h = hodlr_compress(&a, 1e-8, 32).unwrap();
    let u = random_vector(1024, 11);
    let v = random_vector(1024, 12);
    assert!(rel_inf_error(&hodlr_apply(&h, &u).unwrap(), &a.apply(&u).unwrap()) <= 1e-6);
    let w: Vec<f64> = u.iter().zip(&v).map(|(a, b)| 2.0 * a - b).collect();
    let hu = hodlr_apply(&h, &u).unwrap();
    let hv = hodlr_apply(&h, &v).unwrap();
    let lin: Vec<f64> = hu.iter().zip(&hv).map(|(a, b)| 2.0 * a - b).collect();
    assert!(rel_inf_error(&hodlr_apply(&h, &w).unwrap(), &lin) <= 1e-12);
}

#[test]
fn two_dimensional_loose_tolerance() {
    let a = regularity_operator(0, 2, 32, 0.25).unwrap();
    let h = hodlr_compress(&a, 1e-3, 32).unwrap();
    let u = random_vector(1024, 4);
    assert!(rel_inf_error(&h.apply(&u).unwrap(), &a.apply(&u).unwrap()) <= 1e-2);
}

#[test]
fn nearest_neighbour_operator_is_rank_one() {
    // delta = 2h: each node talks only to its two neighbours.
    let a = regularity_operator(-1, 1, 1024, 2.0 / 1024.0).unwrap();
    let h = hodlr_compress(&a, 1e-8, 32).unwrap();
    assert!(h.max_rank() <= 1);
    assert!(h.stored_floats() <= 2 * 1024 * 32);
}
