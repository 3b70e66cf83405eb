//! Fixed banks of compactly supported test 1-forms and the discrete pairing
//! `\int T ^ phi` of an edge current against them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{EdgeField, MetricDomain};
use crate::geometry::Point;

/// Tensor bump `b(x) b(y) dx^{component}` with `b(t) = (1 - t^2/s^2)^2_+`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestForm {
    pub center: Point,
    pub scale: f64,
    /// 0 for a `dx` form, 1 for a `dy` form.
    pub component: usize,
}

#[inline]
fn bump(t: f64, s: f64) -> f64 {
    let r = t / s;
    if r.abs() >= 1.0 {
        0.0
    } else {
        let q = 1.0 - r * r;
        q * q
    }
}

impl TestForm {
    pub fn weight(&self, p: Point) -> f64 {
        bump(p[0] - self.center[0], self.scale) * bump(p[1] - self.center[1], self.scale)
    }

    /// Covector `(a, b)` of the form at `p`.
    pub fn eval(&self, p: Point) -> Point {
        let w = self.weight(p);
        if self.component == 0 {
            [w, 0.0]
        } else {
            [0.0, w]
        }
    }

    /// Support radius in the sup norm.
    pub fn support_radius(&self) -> f64 {
        self.scale
    }

    /// Pairing with a unit-mass straight leaf through the centre along the
    /// form's axis.
    pub fn norm(&self) -> f64 {
        16.0 * self.scale / 15.0
    }
}

/// Bank of tensor bumps at three scales and `centers` locations, both
/// covector components. Centres are drawn (seeded) so that supports stay
/// inside the active region.
pub fn bank(dom: &MetricDomain, centers: usize, seed: u64) -> Vec<TestForm> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ext = [dom.nx as f64 * dom.h, dom.ny as f64 * dom.h];
    let base = ext[0].min(ext[1]);
    let scales = [base / 4.0, base / 8.0, base / 16.0];
    let mut out = Vec::new();
    for &s in &scales {
        let mut placed = 0;
        let mut attempts = 0;
        while placed < centers && attempts < 10_000 {
            attempts += 1;
            let c = [
                dom.origin[0] + rng.gen::<f64>() * ext[0],
                dom.origin[1] + rng.gen::<f64>() * ext[1],
            ];
            let corners = [
                [c[0] - s, c[1] - s],
                [c[0] + s, c[1] - s],
                [c[0] - s, c[1] + s],
                [c[0] + s, c[1] + s],
            ];
            if corners.iter().all(|&q| dom.contains(q)) {
                for component in 0..2 {
                    out.push(TestForm {
                        center: c,
                        scale: s,
                        component,
                    });
                }
                placed += 1;
            }
        }
    }
    out
}

/// Discrete `\int T ^ phi` for a 1-current stored on edges.
pub fn pair(t: &EdgeField, form: &TestForm, dom: &MetricDomain) -> f64 {
    let h = dom.h;
    let s = form.scale;
    let (i0, i1, j0, j1) = index_window(dom, form.center, s);
    let mut acc = 0.0;
    for j in j0..=j1 {
        for i in i0..=i1 {
            let n = dom.node(i, j);
            let p = dom.node_pos(n);
            if dom.hedge_active(n) {
                let b = form.eval([p[0] + h / 2.0, p[1]])[1];
                acc += t.ex[n] * b;
            }
            if dom.vedge_active(n) {
                let a = form.eval([p[0], p[1] + h / 2.0])[0];
                acc -= t.ey[n] * a;
            }
        }
    }
    acc * h * h
}

fn index_window(dom: &MetricDomain, c: Point, s: f64) -> (usize, usize, usize, usize) {
    let lo = |v: f64, o: f64| (((v - o) / dom.h).floor() - 1.0).max(0.0) as usize;
    let hi = |v: f64, o: f64, m: usize| ((((v - o) / dom.h).ceil() + 1.0).max(0.0) as usize).min(m);
    (
        lo(c[0] - s, dom.origin[0]),
        hi(c[0] + s, dom.origin[0], dom.nx),
        lo(c[1] - s, dom.origin[1]),
        hi(c[1] + s, dom.origin[1], dom.ny),
    )
}

/// `\int_gamma phi` along a polyline (midpoint rule per segment).
pub fn line_integral(poly: &[Point], form: &TestForm) -> f64 {
    poly.windows(2)
        .map(|w| {
            let m = [(w[0][0] + w[1][0]) / 2.0, (w[0][1] + w[1][1]) / 2.0];
            let c = form.eval(m);
            c[0] * (w[1][0] - w[0][0]) + c[1] * (w[1][1] - w[0][1])
        })
        .sum()
}
