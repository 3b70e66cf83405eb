use lamina::domain::{cell_curl, div, edge_inner, geodesic_arc, grad, node_inner, DomainConfig, EdgeField, MetricDomain, NodeField};
use lamina::hyperbolic::{poincare_distance, poincare_rho};
use lamina::shortest::{shortest_path, Stencil};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn domains() -> Vec<MetricDomain> {
    [
        DomainConfig::rect(23, 17, 0.05),
        DomainConfig::disk(48, 1.0, 1.0, "euclidean"),
        DomainConfig::disk(48, 1.0, 1.0, "poincare"),
    ]
    .iter()
    .map(|c| MetricDomain::build(c, None).unwrap())
    .collect()
}

fn random_node(dom: &MetricDomain, rng: &mut ChaCha8Rng) -> NodeField {
    let mut u = NodeField::zeros(dom.n_nodes());
    for n in dom.active_nodes() {
        u.values[n] = rng.gen_range(-1.0..1.0);
    }
    u
}

#[test]
fn summation_by_parts() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for dom in domains() {
        for _ in 0..100 {
            let u = random_node(&dom, &mut rng);
            let mut x = EdgeField::zeros(dom.n_nodes());
            for n in 0..dom.n_nodes() {
                x.ex[n] = rng.gen_range(-1.0..1.0);
                x.ey[n] = rng.gen_range(-1.0..1.0);
            }
            let du = grad(&u, &dom).unwrap();
            let lhs = edge_inner(&du, &x, &dom);
            let rhs = -node_inner(&u, &div(&x, &dom).unwrap(), &dom);
            let scale = (edge_inner(&du, &du, &dom) * edge_inner(&x, &x, &dom)).sqrt();
            assert!((lhs - rhs).abs() <= 1e-12 * scale, "{lhs} vs {rhs}");
        }
    }
}

#[test]
fn exact_sequence() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for dom in domains() {
        let u = random_node(&dom, &mut rng);
        let curl = cell_curl(&grad(&u, &dom).unwrap(), &dom);
        let worst = curl.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        assert!(worst < 1e-12, "curl of a gradient {worst}");
    }
}

#[test]
fn divergence_of_constant_field_vanishes_inside() {
    let dom = MetricDomain::build(&DomainConfig::rect(10, 10, 0.1), None).unwrap();
    let mut x = EdgeField::zeros(dom.n_nodes());
    x.ex.iter_mut().for_each(|v| *v = 1.0);
    let d = div(&x, &dom).unwrap();
    for n in dom.active_nodes().filter(|&n| !dom.is_boundary(n)) {
        assert!(d.values[n].abs() < 1e-12);
    }
}

#[test]
fn linear_gradient_is_exact() {
    let dom = MetricDomain::build(&DomainConfig::disk(32, 1.0, 1.0, "poincare"), None).unwrap();
    let u = dom.sample(|p| 2.0 * p[0] - 3.0 * p[1]);
    let g = grad(&u, &dom).unwrap();
    for n in 0..dom.n_nodes() {
        assert!(g.ex[n] == 0.0 || (g.ex[n] - 2.0).abs() < 1e-12);
        assert!(g.ey[n] == 0.0 || (g.ey[n] + 3.0).abs() < 1e-12);
    }
}

fn weighted_length(pts: &[[f64; 2]]) -> f64 {
    pts.windows(2)
        .map(|w| {
            let m = [(w[0][0] + w[1][0]) / 2.0, (w[0][1] + w[1][1]) / 2.0];
            (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]) * poincare_rho(m)
        })
        .sum()
}

#[test]
fn poincare_geodesics_match_closed_form() {
    let dom = MetricDomain::build(&DomainConfig::disk(128, 1.0, 1.0, "poincare"), None).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..20 {
        let mut point = || {
            let (r, t) = (0.8 * rng.gen::<f64>().sqrt(), rng.gen_range(0.0..std::f64::consts::TAU));
            [r * t.cos(), r * t.sin()]
        };
        let (p, q) = (point(), point());
        if (p[0] - q[0]).hypot(p[1] - q[1]) < 0.2 {
            continue;
        }
        let d = poincare_distance(p, q);
        let arc = geodesic_arc(p, q, &dom).unwrap();
        let l = weighted_length(&arc);
        assert!((l - d).abs() <= 1e-3 * d, "arc {l} vs {d}");
        let sp = shortest_path(&dom, p, q, Stencil::Sixteen).unwrap();
        assert!(sp.length >= d * (1.0 - 1e-3), "graph path {} shorter than geodesic {d}", sp.length);
        assert!(sp.length <= d * 1.05, "graph path {} vs {d}", sp.length);
    }
}
