use nlfast::geometry::{cube_inside_ball, cube_intersects_ball, Aabb, Grid};
use nlfast::tree::{accumulate_moments, build_tree, decompose_region_with, InclusionRule, MOMENT_ORIGIN};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

fn clamp_distance2(min: &[f64], max: &[f64], c: &[f64]) -> f64 {
    (0..c.len())
        .map(|j| {
            let t = c[j].clamp(min[j], max[j]) - c[j];
            t * t
        })
        .sum()
}

proptest! {
    #[test]
    fn predicates_agree_with_sampling(
        d in 1usize..=3,
        lo in prop::array::uniform3(0.0f64..0.8),
        w in 0.01f64..0.2,
        c in prop::array::uniform3(-0.2f64..1.2),
        r in 0.01f64..0.6,
        seed in any::<u64>(),
    ) {
        let min: Vec<f64> = lo[..d].to_vec();
        let max: Vec<f64> = min.iter().map(|v| v + w).collect();
        let b = Aabb::new(&min, &max).unwrap();
        let c = &c[..d];
        let hits = cube_intersects_ball(&b, c, r);
        prop_assert_eq!(hits, clamp_distance2(&min, &max, c) < r * r);
        let inside = cube_inside_ball(&b, c, r);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..200 {
            let p: Vec<f64> = (0..d).map(|j| rng.gen_range(min[j]..=max[j])).collect();
            let dist2: f64 = p.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum();
            if dist2 < r * r {
                prop_assert!(hits);
            }
            if inside {
                prop_assert!(dist2 <= r * r * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn decomposition_is_a_disjoint_cover(
        d in 1usize..=3,
        levels in 1u32..=4,
        c in prop::array::uniform3(0.0f64..1.0),
        r in 0.02f64..0.8,
        point_rule in any::<bool>(),
    ) {
        let n = 1usize << levels;
        prop_assume!(n.pow(d as u32) <= 4096);
        let grid = Grid::new(d, n).unwrap();
        let tree = build_tree(&grid);
        let rule = if point_rule { InclusionRule::Point } else { InclusionRule::Leaf };
        let c = &c[..d];
        let dec = decompose_region_with(&tree, c, r, rule);
        let covered = dec.covered_nodes(&tree);
        let mut dedup = covered.clone();
        dedup.dedup();
        prop_assert_eq!(dedup.len(), covered.len());
        let h = grid.h();
        let expected: Vec<usize> = (0..grid.node_count())
            .filter(|&i| {
                let k = grid.multi_index(i);
                match rule {
                    InclusionRule::Leaf => {
                        let min: Vec<f64> = (0..d).map(|j| k[j] as f64 * h).collect();
                        let max: Vec<f64> = (0..d).map(|j| (k[j] + 1) as f64 * h).collect();
                        clamp_distance2(&min, &max, c) < r * r
                    }
                    InclusionRule::Point => {
                        let x = grid.node_position(i).unwrap();
                        x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() < r
                    }
                }
            })
            .collect();
        prop_assert_eq!(covered, expected);
    }

    #[test]
    fn moments_sum_over_panels_and_are_linear(
        levels in 1u32..=8,
        k in 0u32..=3,
        seed in any::<u64>(),
        alpha in -2.0f64..2.0,
    ) {
        let grid = Grid::new(1, 1 << levels).unwrap();
        let tree = build_tree(&grid);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let u: Vec<f64> = (0..grid.node_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..grid.node_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mu = accumulate_moments(&tree, &u, k).unwrap();
        let mv = accumulate_moments(&tree, &v, k).unwrap();
        let w: Vec<f64> = u.iter().zip(&v).map(|(a, b)| alpha * a + b).collect();
        let mw = accumulate_moments(&tree, &w, k).unwrap();
        for g in [0, tree.total_panels() / 3, tree.total_panels() - 1] {
            let id = tree.panel_at(g);
            for m in 0..=(2 * k as usize) {
                let direct: f64 = tree
                    .nodes_in(&id)
                    .iter()
                    .map(|&i| (grid.node_position(i).unwrap()[0] - MOMENT_ORIGIN).powi(m as i32) * u[i])
                    .sum();
                let got = mu.moment(&tree, &id, m);
                prop_assert!((got - direct).abs() <= 1e-12 * (1.0 + direct.abs()) * tree.nodes_in(&id).len() as f64);
                let lin = alpha * got + mv.moment(&tree, &id, m);
                prop_assert!((mw.moment(&tree, &id, m) - lin).abs() <= 1e-12 * (1.0 + lin.abs()) * 64.0);
            }
        }
    }
}
