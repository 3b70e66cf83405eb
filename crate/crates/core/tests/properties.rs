use std::sync::Arc;

use lamina::domain::{div, edge_inner, grad, node_inner, DomainConfig, EdgeField, MetricDomain, NodeField};
use lamina::expr::cantor;
use lamina::gorny::{decompose_profile, GornyOptions};
use lamina::io::mincut::{cut_value, exhaustive_cut, mincut_oracle};
use lamina::lamination::{check_disjointness, check_nesting, extract_leaves, select_thresholds};
use lamina::solver::DirichletProblem;
use lamina::transverse::TransverseProfile;
use proptest::prelude::*;

fn grid(nx: usize, ny: usize) -> Arc<MetricDomain> {
    Arc::new(MetricDomain::build(&DomainConfig::rect(nx, ny, 1.0 / nx.max(ny) as f64), None).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn adjointness_on_any_grid(nx in 1usize..12, ny in 1usize..12, seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let dom = grid(nx, ny);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let u = NodeField { values: (0..dom.n_nodes()).map(|_| rng.gen_range(-1.0..1.0)).collect() };
        let mut x = EdgeField::zeros(dom.n_nodes());
        for n in 0..dom.n_nodes() {
            x.ex[n] = rng.gen_range(-1.0..1.0);
            x.ey[n] = rng.gen_range(-1.0..1.0);
        }
        let du = grad(&u, &dom).unwrap();
        let lhs = edge_inner(&du, &x, &dom);
        let rhs = -node_inner(&u, &div(&x, &dom).unwrap(), &dom);
        let scale = (edge_inner(&du, &du, &dom) * edge_inner(&x, &x, &dom)).sqrt().max(1e-300);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * scale);
    }

    #[test]
    fn mincut_is_minimal(
        nx in 1usize..4,
        ny in 1usize..4,
        data in proptest::collection::vec(-1.0f64..1.0, 16),
        y in -1.0f64..1.0,
        labels in proptest::collection::vec(any::<bool>(), 16),
    ) {
        let dom = grid(nx, ny);
        let p = DirichletProblem::from_values(dom.clone(), data[..dom.n_nodes()].to_vec()).unwrap();
        let best = mincut_oracle(&p, y).unwrap();
        let exact = exhaustive_cut(&p, y).unwrap();
        prop_assert!((best.value() - exact.value()).abs() <= 1e-12 * exact.value().abs().max(1.0));
        let (per, bd) = cut_value(&p, &labels[..dom.n_nodes()], y);
        prop_assert!(best.value() <= per + bd + 1e-12);
    }

    #[test]
    fn decomposition_reconstructs(
        steps in proptest::collection::vec(0.0f64..1.0, 64..300),
        jumps in proptest::collection::vec((0usize..300, 0.5f64..5.0), 0..4),
    ) {
        let mut incs = steps.clone();
        for (at, size) in jumps {
            let k = at % incs.len();
            incs[k] += size;
        }
        let mut values = vec![0.0];
        for d in &incs {
            values.push(values.last().unwrap() + d);
        }
        let labels: Vec<f64> = (0..values.len()).map(|i| i as f64).collect();
        let p = TransverseProfile::from_samples(labels, values.clone()).unwrap();
        let d = decompose_profile(&p, &GornyOptions::default()).unwrap();
        let rec = d.reconstruct();
        for (a, b) in rec.iter().zip(&values) {
            prop_assert!((a - b).abs() <= 1e-9 * values.last().unwrap().max(1.0));
        }
        for part in &d.parts {
            prop_assert!(part.windows(2).all(|w| w[1] >= w[0] - 1e-12));
        }
        let total: f64 = d.masses.iter().sum();
        prop_assert!((total - values.last().unwrap()).abs() <= 1e-9 * total.max(1.0));
    }

    #[test]
    fn staircase_symmetry(x in 0.0f64..1.0, dx in 0.0f64..0.1) {
        let (a, b) = (cantor(x, 14), cantor((x + dx).min(1.0), 14));
        prop_assert!(b >= a);
        prop_assert!((cantor(1.0 - x, 14) - (1.0 - a)).abs() < 1e-9);
    }

    #[test]
    fn level_sets_never_cross(
        waves in proptest::collection::vec((-6.0f64..6.0, -6.0f64..6.0, 0.0f64..6.3, 0.2f64..1.0), 1..4),
    ) {
        let dom = grid(24, 24);
        let u = dom.sample(|p| waves.iter().map(|&(a, b, c, w)| w * (a * p[0] + b * p[1] + c).sin()).sum());
        let ys = select_thresholds(&u, &dom, 8, &[]).unwrap();
        let leaves = extract_leaves(&u, &ys, &dom, &Default::default()).unwrap();
        let r = check_disjointness(&leaves);
        prop_assert!(r.crossings.is_empty(), "{} crossings", r.crossings.len());
        prop_assert!(check_nesting(&u, &ys, &dom).violations.is_empty());
    }
}
