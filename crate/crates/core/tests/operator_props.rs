mod common;

use nlfast::geometry::Grid;
use nlfast::kernel::{split, HorizonField, KernelSpec, RadialProfile};
use nlfast::operator::{
    apply_full_dense, apply_smooth_dense, apply_split, apply_truncated_dense, assemble_truncated_dense, full_dense, LinearOperator,
    MassForm, SmoothBackend, TruncatedOperator, TruncatedOptions,
};
use nlfast::stats::{max_abs, random_vector, rel_inf_error};
use nlfast::tree::InclusionRule;
use proptest::prelude::*;

fn truncated(d: usize, k: u32, horizon: HorizonField) -> KernelSpec {
    KernelSpec::new(d, RadialProfile::polynomial_truncated(k).unwrap(), horizon).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn fast_equals_dense(
        (d, levels, k) in prop_oneof![
            (Just(1usize), 3u32..=9, 0u32..=3),
            (Just(2usize), 2u32..=4, Just(0u32)),
            (Just(3usize), 1u32..=3, Just(0u32)),
        ],
        delta in 0.05f64..0.6,
        bump in any::<bool>(),
        point in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let delta = if k > 0 { delta.max(0.25) } else { delta };
        let grid = Grid::new(d, 1 << levels).unwrap();
        let horizon = if bump { HorizonField::GaussianBump(delta) } else { HorizonField::Constant(delta) };
        let spec = truncated(d, k, horizon);
        let opts = if point {
            TruncatedOptions::new(InclusionRule::Point, MassForm::Discrete)
        } else {
            TruncatedOptions::default()
        };
        let op = TruncatedOperator::new(&spec, &grid, opts).unwrap();
        let u = random_vector(grid.node_count(), seed);
        let fast = op.apply(&u).unwrap();
        let dense = apply_truncated_dense(&spec, &grid, opts, &u).unwrap();
        prop_assert!(rel_inf_error(&fast, &dense) <= 1e-12);
    }

    #[test]
    fn fast_apply_is_linear(
        k in 0u32..=3,
        seed in any::<u64>(),
        alpha in -3.0f64..3.0,
        beta in -3.0f64..3.0,
    ) {
        let grid = Grid::new(1, 512).unwrap();
        let op = TruncatedOperator::new(&truncated(1, k, HorizonField::GaussianBump(0.2)), &grid, TruncatedOptions::default()).unwrap();
        let u = random_vector(512, seed);
        let v = random_vector(512, seed ^ 0x9e37);
        let w: Vec<f64> = u.iter().zip(&v).map(|(a, b)| alpha * a + beta * b).collect();
        let lhs = op.apply(&w).unwrap();
        let (au, av) = (op.apply(&u).unwrap(), op.apply(&v).unwrap());
        let rhs: Vec<f64> = au.iter().zip(&av).map(|(a, b)| alpha * a + beta * b).collect();
        let scale = max_abs(&au).max(max_abs(&av)) * (alpha.abs() + beta.abs()).max(1.0);
        let err = lhs.iter().zip(&rhs).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        prop_assert!(err <= 1e-12 * scale);
    }
}

#[test]
fn interior_rows_are_translates() {
    for (d, n, delta) in [(1, 256, 0.125), (2, 32, 0.25)] {
        let grid = Grid::new(d, n).unwrap();
        let a = assemble_truncated_dense(&truncated(d, 0, HorizonField::Constant(delta)), &grid, TruncatedOptions::default()).unwrap();
        let centre = vec![n / 2; d];
        let shifted: Vec<usize> = centre.iter().map(|c| c + 3).collect();
        let i = grid.flat_index(&centre);
        let j = grid.flat_index(&shifted);
        assert_eq!(common::sorted_nonzeros(a.row(i)), common::sorted_nonzeros(a.row(j)));
    }
}

#[test]
fn constant_horizon_matrix_is_symmetric() {
    for (d, n, k) in [(1, 256, 3), (2, 16, 0)] {
        let grid = Grid::new(d, n).unwrap();
        let a = assemble_truncated_dense(&truncated(d, k, HorizonField::Constant(0.25)), &grid, TruncatedOptions::default()).unwrap();
        assert!(a.asymmetry() <= 1e-12);
        let b = assemble_truncated_dense(&truncated(d, k, HorizonField::GaussianBump(0.25)), &grid, TruncatedOptions::default()).unwrap();
        assert!(b.asymmetry() > 1e-3);
    }
}

#[test]
fn full_operator_annihilates_constants() {
    for (d, n) in [(1, 256), (2, 16), (3, 8)] {
        let grid = Grid::new(d, n).unwrap();
        for profile in [RadialProfile::inverse_s(), RadialProfile::conical_inverse_s(), RadialProfile::regularized(2).unwrap()] {
            for horizon in [HorizonField::Constant(0.3), HorizonField::GaussianBump(0.2)] {
                let spec = KernelSpec::new(d, profile.clone(), horizon).unwrap();
                let out = apply_full_dense(&spec, &grid, &vec![1.0; grid.node_count()]).unwrap();
                assert!(max_abs(&out) <= 1e-12);
            }
        }
    }
}

#[test]
fn small_horizon_error_tracks_moment_scaling() {
    for delta in [0.05, 0.1, 0.125] {
        for n in [8, 64, 512] {
            let grid = Grid::new(1, n).unwrap();
            let spec = truncated(1, 3, HorizonField::Constant(delta));
            let op = TruncatedOperator::new(&spec, &grid, TruncatedOptions::default()).unwrap();
            let u = random_vector(n, 1);
            let dense = apply_truncated_dense(&spec, &grid, TruncatedOptions::default(), &u).unwrap();
            let e = rel_inf_error(&op.apply(&u).unwrap(), &dense);
            assert!(e <= 1e-14 * (0.5 / delta).powi(6), "delta = {delta}, n = {n}: {e:e}");
        }
    }
}

#[test]
fn leaf_and_point_rules_differ_by_order_h() {
    let spec = truncated(1, 0, HorizonField::Constant(0.25));
    let gap = |n: usize| {
        let grid = Grid::new(1, n).unwrap();
        let u = vec![1.0; n];
        let leaf = apply_truncated_dense(&spec, &grid, TruncatedOptions::default(), &u).unwrap();
        let point = apply_truncated_dense(&spec, &grid, TruncatedOptions::new(InclusionRule::Point, MassForm::Continuum), &u).unwrap();
        leaf.iter().zip(&point).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    };
    let ratio = gap(512) / gap(1024);
    assert!((ratio - 2.0).abs() < 0.05, "{ratio}");
}

#[test]
fn split_recombines_with_full_operator() {
    let grid = Grid::new(1, 256).unwrap();
    let spec = KernelSpec::new(1, RadialProfile::inverse_s(), HorizonField::GaussianBump(0.125)).unwrap();
    let u = random_vector(256, 5);
    let full = apply_full_dense(&spec, &grid, &u).unwrap();
    for k in 0..=3 {
        let sk = split(&spec.profile, k).unwrap();
        let tspec = spec.with_profile(sk.truncated_profile().unwrap());
        let opts = TruncatedOptions::new(InclusionRule::Point, MassForm::Discrete);
        let mut out = apply_smooth_dense(&sk, &spec, &grid, &u).unwrap();
        for (o, t) in out.iter_mut().zip(apply_truncated_dense(&tspec, &grid, opts, &u).unwrap()) {
            *o += t;
        }
        let e = rel_inf_error(&out, &full);
        assert!(e <= 1e-12, "K = {k}: {e:e}");
        let fast = apply_split(&spec, &grid, k, &u, SmoothBackend::Dense).unwrap();
        let e = rel_inf_error(&fast, &full);
        assert!(e <= 1e-10, "K = {k}: {e:e}");
        let ones = apply_split(&spec, &grid, k, &[1.0; 256], SmoothBackend::Dense).unwrap();
        assert!(max_abs(&ones) <= 1e-10 * max_abs(&full));
    }
    let a = full_dense(&spec, &grid).unwrap();
    assert!(rel_inf_error(&a.apply(&u).unwrap(), &full) <= 1e-12);
}
