use serde::Serialize;
use std::f64::consts::PI;

pub type Point = [f64; 2];

pub(crate) fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

pub(crate) fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

pub(crate) fn cross(a: Point, b: Point) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

pub(crate) fn norm(a: Point) -> f64 {
    a[0].hypot(a[1])
}

/// Rotate by +90 degrees.
pub(crate) fn left_normal(t: Point) -> Point {
    [-t[1], t[0]]
}

/// A boundary curve parametrized by arclength `s ∈ [0, length]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Curve {
    Line { start: Point, end: Point },
    /// `sweep` is signed: positive for counterclockwise travel.
    Arc { center: Point, radius: f64, start_angle: f64, sweep: f64 },
}

impl Curve {
    pub fn length(&self) -> f64 {
        match *self {
            Curve::Line { start, end } => norm(sub(end, start)),
            Curve::Arc { radius, sweep, .. } => radius * sweep.abs(),
        }
    }

    pub fn point(&self, s: f64) -> Point {
        match *self {
            Curve::Line { start, end } => {
                let l = norm(sub(end, start));
                let u = s / l;
                [start[0] + u * (end[0] - start[0]), start[1] + u * (end[1] - start[1])]
            }
            Curve::Arc { center, radius, start_angle, sweep } => {
                let phi = start_angle + sweep.signum() * s / radius;
                [center[0] + radius * phi.cos(), center[1] + radius * phi.sin()]
            }
        }
    }

    /// Position relative to the start (`from_end = false`) or end point,
    /// evaluated without cancellation for points close to that end.
    /// `offset` is the arclength from that end.
    pub fn offset_from_end(&self, offset: f64, from_end: bool) -> Point {
        match *self {
            Curve::Line { start, end } => {
                let d = sub(end, start);
                let l = norm(d);
                let sgn = if from_end { -1.0 } else { 1.0 };
                [sgn * offset * d[0] / l, sgn * offset * d[1] / l]
            }
            Curve::Arc { radius, start_angle, sweep, .. } => {
                let sg = sweep.signum();
                let (phi0, dphi) = if from_end {
                    (start_angle + sweep, -sg * offset / radius)
                } else {
                    (start_angle, sg * offset / radius)
                };
                // R (cos(φ0+δ) - cos φ0), R (sin(φ0+δ) - sin φ0) in a stable form
                let h = 0.5 * dphi;
                let m = phi0 + h;
                let f = 2.0 * radius * h.sin();
                [-f * m.sin(), f * m.cos()]
            }
        }
    }

    /// Unit tangent in the direction of increasing arclength.
    pub fn tangent(&self, s: f64) -> Point {
        match *self {
            Curve::Line { start, end } => {
                let d = sub(end, start);
                let l = norm(d);
                [d[0] / l, d[1] / l]
            }
            Curve::Arc { radius, start_angle, sweep, .. } => {
                let sg = sweep.signum();
                let phi = start_angle + sg * s / radius;
                [-sg * phi.sin(), sg * phi.cos()]
            }
        }
    }

    /// Signed curvature (positive when turning left).
    pub fn curvature(&self) -> f64 {
        match *self {
            Curve::Line { .. } => 0.0,
            Curve::Arc { radius, sweep, .. } => sweep.signum() / radius,
        }
    }

    pub fn is_straight(&self) -> bool {
        matches!(self, Curve::Line { .. })
    }

    pub fn polyline(&self, segments: usize) -> Vec<Point> {
        let n = match self {
            Curve::Line { .. } => 1,
            Curve::Arc { .. } => segments.max(8),
        };
        let l = self.length();
        (0..=n).map(|i| self.point(l * i as f64 / n as f64)).collect()
    }

    /// Change of the argument of `γ(s) - p` along the curve.
    pub fn winding_angle(&self, p: Point) -> f64 {
        match *self {
            Curve::Line { start, end } => {
                let a = sub(start, p);
                let b = sub(end, p);
                cross(a, b).atan2(dot(a, b))
            }
            Curve::Arc { .. } => {
                let pts = self.polyline(1024);
                pts.windows(2)
                    .map(|w| {
                        let a = sub(w[0], p);
                        let b = sub(w[1], p);
                        cross(a, b).atan2(dot(a, b))
                    })
                    .sum()
            }
        }
    }
}

pub(crate) fn wrap_angle(a: f64) -> f64 {
    let mut x = a % (2.0 * PI);
    if x < 0.0 {
        x += 2.0 * PI;
    }
    x
}

fn segments_cross(p1: Point, p2: Point, q1: Point, q2: Point) -> bool {
    let d1 = cross(sub(p2, p1), sub(q1, p1));
    let d2 = cross(sub(p2, p1), sub(q2, p1));
    let d3 = cross(sub(q2, q1), sub(p1, q1));
    let d4 = cross(sub(q2, q1), sub(p2, q1));
    (d1 * d2 < 0.0) && (d3 * d4 < 0.0)
}

/// True if the two polylines cross at a point that is not a shared endpoint.
pub(crate) fn polylines_cross(a: &[Point], b: &[Point]) -> bool {
    for i in 0..a.len() - 1 {
        for j in 0..b.len() - 1 {
            if segments_cross(a[i], a[i + 1], b[j], b[j + 1]) {
                return true;
            }
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arc_offsets_match_points() {
        let c = Curve::Arc { center: [0.3, -0.2], radius: 2.0, start_angle: 0.4, sweep: -1.7 };
        let l = c.length();
        for &s in &[1e-3, 0.2, 1.0] {
            let p = c.point(s);
            let o = c.offset_from_end(s, false);
            let p0 = c.point(0.0);
            assert!((p0[0] + o[0] - p[0]).abs() < 1e-14);
            assert!((p0[1] + o[1] - p[1]).abs() < 1e-14);
            let q = c.point(l - s);
            let o = c.offset_from_end(s, true);
            let p1 = c.point(l);
            assert!((p1[0] + o[0] - q[0]).abs() < 1e-14);
            assert!((p1[1] + o[1] - q[1]).abs() < 1e-14);
        }
    }

    #[test]
    fn arc_tangent_is_derivative() {
        let c = Curve::Arc { center: [0.0, 0.0], radius: 1.5, start_angle: 1.0, sweep: 2.0 };
        let h = 1e-6;
        let s = 0.7;
        let p = c.point(s + h);
        let q = c.point(s - h);
        let t = c.tangent(s);
        assert!(((p[0] - q[0]) / (2.0 * h) - t[0]).abs() < 1e-8);
        assert!(((p[1] - q[1]) / (2.0 * h) - t[1]).abs() < 1e-8);
    }

    #[test]
    fn winding_of_full_circle() {
        let c = Curve::Arc { center: [0.0, 0.0], radius: 1.0, start_angle: 0.0, sweep: 2.0 * PI };
        assert!((c.winding_angle([0.1, 0.2]) - 2.0 * PI).abs() < 1e-9);
        assert!(c.winding_angle([2.0, 0.0]).abs() < 1e-9);
    }
}
