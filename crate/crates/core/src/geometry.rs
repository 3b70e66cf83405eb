//! Planar point and polyline helpers shared by the lamination modules.

pub type Point = [f64; 2];

#[inline]
pub fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub fn add(a: Point, b: Point) -> Point {
    [a[0] + b[0], a[1] + b[1]]
}

#[inline]
pub fn scale(a: Point, s: f64) -> Point {
    [a[0] * s, a[1] * s]
}

#[inline]
pub fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub fn cross(a: Point, b: Point) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

#[inline]
pub fn norm(a: Point) -> f64 {
    a[0].hypot(a[1])
}

#[inline]
pub fn dist(a: Point, b: Point) -> f64 {
    norm(sub(a, b))
}

#[inline]
pub fn lerp(a: Point, b: Point, t: f64) -> Point {
    [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
}

/// Counter-clockwise rotation by a right angle.
#[inline]
pub fn perp(a: Point) -> Point {
    [-a[1], a[0]]
}

pub fn normalize(a: Point) -> Point {
    let n = norm(a);
    if n > 0.0 {
        scale(a, 1.0 / n)
    } else {
        [0.0, 0.0]
    }
}

/// Angle between two lines (unoriented), in [0, pi/2].
pub fn line_angle(a: Point, b: Point) -> f64 {
    let c = (dot(a, b) / (norm(a) * norm(b))).abs().min(1.0);
    c.acos()
}

/// Angle between two directions, in [0, pi].
pub fn direction_angle(a: Point, b: Point) -> f64 {
    cross(a, b).atan2(dot(a, b)).abs()
}

pub fn polyline_length(poly: &[Point]) -> f64 {
    poly.windows(2).map(|w| dist(w[0], w[1])).sum()
}

pub fn cumulative_length(poly: &[Point]) -> Vec<f64> {
    let mut out = Vec::with_capacity(poly.len());
    let mut s = 0.0;
    out.push(0.0);
    for w in poly.windows(2) {
        s += dist(w[0], w[1]);
        out.push(s);
    }
    out
}

/// Distance from `p` to segment `ab` and the segment parameter of the foot point.
pub fn point_segment(p: Point, a: Point, b: Point) -> (f64, f64) {
    let ab = sub(b, a);
    let len2 = dot(ab, ab);
    let t = if len2 > 0.0 {
        (dot(sub(p, a), ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (dist(p, lerp(a, b, t)), t)
}

#[derive(Debug, Clone, Copy)]
pub struct Closest {
    pub distance: f64,
    pub point: Point,
    pub segment: usize,
    pub t: f64,
}

pub fn closest_on_polyline(p: Point, poly: &[Point]) -> Option<Closest> {
    if poly.len() == 1 {
        return Some(Closest {
            distance: dist(p, poly[0]),
            point: poly[0],
            segment: 0,
            t: 0.0,
        });
    }
    let mut best: Option<Closest> = None;
    for (k, w) in poly.windows(2).enumerate() {
        let (d, t) = point_segment(p, w[0], w[1]);
        if best.is_none_or(|b| d < b.distance) {
            best = Some(Closest {
                distance: d,
                point: lerp(w[0], w[1], t),
                segment: k,
                t,
            });
        }
    }
    best
}

/// Resample a polyline at arclength spacing no larger than `spacing`.
pub fn resample(poly: &[Point], spacing: f64) -> Vec<Point> {
    let mut out = Vec::new();
    if poly.is_empty() {
        return out;
    }
    out.push(poly[0]);
    for w in poly.windows(2) {
        let n = (dist(w[0], w[1]) / spacing).ceil().max(1.0) as usize;
        for k in 1..=n {
            out.push(lerp(w[0], w[1], k as f64 / n as f64));
        }
    }
    out
}

/// Point at arclength `s` (clamped) along the polyline.
pub fn point_at(poly: &[Point], cum: &[f64], s: f64) -> Point {
    let total = *cum.last().unwrap_or(&0.0);
    let s = s.clamp(0.0, total);
    let k = match cum.binary_search_by(|c| c.partial_cmp(&s).unwrap()) {
        Ok(k) => return poly[k],
        Err(k) => k.max(1) - 1,
    };
    let seg = cum[k + 1] - cum[k];
    if seg <= 0.0 {
        return poly[k];
    }
    lerp(poly[k], poly[k + 1], (s - cum[k]) / seg)
}

/// Directed Hausdorff distance from `a` to `b`, evaluated on a densified copy of `a`.
pub fn directed_hausdorff(a: &[Point], b: &[Point], spacing: f64) -> f64 {
    resample(a, spacing)
        .iter()
        .filter_map(|&p| closest_on_polyline(p, b).map(|c| c.distance))
        .fold(0.0, f64::max)
}

pub fn hausdorff(a: &[Point], b: &[Point], spacing: f64) -> f64 {
    directed_hausdorff(a, b, spacing).max(directed_hausdorff(b, a, spacing))
}

/// Proper intersection of segments `p1p2` and `q1q2`.
pub fn segment_intersection(p1: Point, p2: Point, q1: Point, q2: Point) -> Option<Point> {
    let r = sub(p2, p1);
    let s = sub(q2, q1);
    let denom = cross(r, s);
    if denom.abs() < 1e-300 {
        return None;
    }
    let qp = sub(q1, p1);
    let t = cross(qp, s) / denom;
    let u = cross(qp, r) / denom;
    if (0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u) {
        Some(lerp(p1, p2, t))
    } else {
        None
    }
}

/// Douglas-Peucker simplification with absolute tolerance.
pub fn simplify(poly: &[Point], tol: f64) -> Vec<Point> {
    if poly.len() < 3 {
        return poly.to_vec();
    }
    let mut keep = vec![false; poly.len()];
    keep[0] = true;
    keep[poly.len() - 1] = true;
    let mut stack = vec![(0usize, poly.len() - 1)];
    while let Some((a, b)) = stack.pop() {
        if b <= a + 1 {
            continue;
        }
        let (mut worst, mut idx) = (0.0, a);
        for k in a + 1..b {
            let (d, _) = point_segment(poly[k], poly[a], poly[b]);
            if d > worst {
                worst = d;
                idx = k;
            }
        }
        if worst > tol {
            keep[idx] = true;
            stack.push((a, idx));
            stack.push((idx, b));
        }
    }
    poly.iter()
        .zip(keep)
        .filter_map(|(p, k)| k.then_some(*p))
        .collect()
}
