//! Geodesics of the Poincare disk model.

use std::f64::consts::{PI, TAU};

use crate::geometry::{dist, norm, scale, Point};

/// A complete geodesic of the Poincare disk: either a diameter or an arc of a
/// euclidean circle orthogonal to the unit circle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PoincareGeodesic {
    Diameter { direction: Point },
    Circle { center: Point, radius: f64 },
}

/// Conformal factor of the Poincare metric, `2 / (1 - |p|^2)`.
pub fn poincare_rho(p: Point) -> f64 {
    2.0 / (1.0 - (p[0] * p[0] + p[1] * p[1]))
}

/// Hyperbolic distance between two points of the open unit disk.
pub fn poincare_distance(p: Point, q: Point) -> f64 {
    let d2 = dist(p, q).powi(2);
    let a = 1.0 - (p[0] * p[0] + p[1] * p[1]);
    let b = 1.0 - (q[0] * q[0] + q[1] * q[1]);
    (1.0 + 2.0 * d2 / (a * b)).acosh()
}

pub fn normalize_angle(t: f64) -> f64 {
    let r = t.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

impl PoincareGeodesic {
    /// The geodesic through two distinct points of the disk.
    pub fn through(p: Point, q: Point) -> Self {
        let det2 = p[0] * q[1] - p[1] * q[0];
        if det2.abs() < 1e-12 {
            let far = if norm(p) > norm(q) { p } else { q };
            let direction = if norm(far) > 0.0 {
                scale(far, 1.0 / norm(far))
            } else {
                let v = [q[0] - p[0], q[1] - p[1]];
                scale(v, 1.0 / norm(v))
            };
            return PoincareGeodesic::Diameter { direction };
        }
        let rp = (p[0] * p[0] + p[1] * p[1] + 1.0) / 2.0;
        let rq = (q[0] * q[0] + q[1] * q[1] + 1.0) / 2.0;
        let cx = (rp * q[1] - rq * p[1]) / det2;
        let cy = (p[0] * rq - q[0] * rp) / det2;
        let center = [cx, cy];
        PoincareGeodesic::Circle {
            center,
            radius: dist(center, p),
        }
    }

    /// The geodesic with ideal endpoints at angles `a` and `b`.
    pub fn from_endpoints(a: f64, b: f64) -> Self {
        let ea = [a.cos(), a.sin()];
        let eb = [b.cos(), b.sin()];
        let delta = (ea[0] * eb[0] + ea[1] * eb[1]).clamp(-1.0, 1.0).acos();
        if (PI - delta).abs() < 1e-12 {
            return PoincareGeodesic::Diameter { direction: ea };
        }
        let m = [ea[0] + eb[0], ea[1] + eb[1]];
        let m = scale(m, 1.0 / norm(m));
        let half = delta / 2.0;
        PoincareGeodesic::Circle {
            center: scale(m, 1.0 / half.cos()),
            radius: half.tan(),
        }
    }

    /// Ideal endpoints as a canonically ordered angle pair in [0, 2pi).
    pub fn endpoints(&self) -> (f64, f64) {
        let (a, b) = match *self {
            PoincareGeodesic::Diameter { direction } => {
                let t = direction[1].atan2(direction[0]);
                (t, t + PI)
            }
            PoincareGeodesic::Circle { center, .. } => {
                let c2 = center[0] * center[0] + center[1] * center[1];
                let base = scale(center, 1.0 / c2);
                let t = (1.0 - 1.0 / c2).max(0.0).sqrt();
                let u = scale([-center[1], center[0]], 1.0 / c2.sqrt());
                let z1 = [base[0] + t * u[0], base[1] + t * u[1]];
                let z2 = [base[0] - t * u[0], base[1] - t * u[1]];
                (z1[1].atan2(z1[0]), z2[1].atan2(z2[0]))
            }
        };
        let (a, b) = (normalize_angle(a), normalize_angle(b));
        if a <= b {
            (a, b)
        } else {
            (b, a)
        }
    }

    /// Samples of the geodesic inside the euclidean disk of radius `r_max`,
    /// spaced by at most `spacing`, ordered from one end to the other.
    pub fn sample(&self, r_max: f64, spacing: f64) -> Vec<Point> {
        match *self {
            PoincareGeodesic::Diameter { direction } => {
                let n = (2.0 * r_max / spacing).ceil().max(1.0) as usize;
                (0..=n)
                    .map(|k| {
                        let s = -r_max + 2.0 * r_max * k as f64 / n as f64;
                        scale(direction, s)
                    })
                    .collect()
            }
            PoincareGeodesic::Circle { center, radius } => {
                // Angular extent of the arc inside |z| < r_max.
                let c = norm(center);
                let cos_half = (c * c + radius * radius - r_max * r_max) / (2.0 * c * radius);
                if cos_half >= 1.0 {
                    return Vec::new();
                }
                let half = cos_half.max(-1.0).acos();
                let base = (-center[1]).atan2(-center[0]);
                let n = (2.0 * half * radius / spacing).ceil().max(1.0) as usize;
                (0..=n)
                    .map(|k| {
                        let t = base - half + 2.0 * half * k as f64 / n as f64;
                        [center[0] + radius * t.cos(), center[1] + radius * t.sin()]
                    })
                    .collect()
            }
        }
    }

    /// Segment of the geodesic between two points lying on it.
    pub fn segment(&self, p: Point, q: Point, spacing: f64) -> Vec<Point> {
        match *self {
            PoincareGeodesic::Diameter { .. } => {
                let n = (dist(p, q) / spacing).ceil().max(1.0) as usize;
                (0..=n)
                    .map(|k| crate::geometry::lerp(p, q, k as f64 / n as f64))
                    .collect()
            }
            PoincareGeodesic::Circle { center, radius } => {
                let a = (p[1] - center[1]).atan2(p[0] - center[0]);
                let mut b = (q[1] - center[1]).atan2(q[0] - center[0]);
                while b - a > PI {
                    b -= TAU;
                }
                while b - a < -PI {
                    b += TAU;
                }
                let n = ((b - a).abs() * radius / spacing).ceil().max(1.0) as usize;
                let mut pts: Vec<Point> = (0..=n)
                    .map(|k| {
                        let t = a + (b - a) * k as f64 / n as f64;
                        [center[0] + radius * t.cos(), center[1] + radius * t.sin()]
                    })
                    .collect();
                pts[0] = p;
                pts[n] = q;
                pts
            }
        }
    }
}

/// Distance on the space of unordered endpoint pairs, respecting the swap
/// symmetry (the chart of the space of geodesics is a Mobius strip).
pub fn endpoint_pair_distance(a: (f64, f64), b: (f64, f64)) -> f64 {
    let circ = |x: f64, y: f64| {
        let d = (x - y).rem_euclid(TAU);
        d.min(TAU - d)
    };
    let straight = circ(a.0, b.0).hypot(circ(a.1, b.1));
    let swapped = circ(a.0, b.1).hypot(circ(a.1, b.0));
    straight.min(swapped)
}
