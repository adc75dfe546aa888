//! Small 2D vector helpers shared by the plan, perception and engine modules.
//!
//! Angles are degrees throughout the crate: headings are absolute world angles
//! in (-180, 180] measured counter-clockwise from +x, bearings are relative to
//! a heading and normalized into the same half-open interval.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

// plain methods instead of operator overloads keep call sites greppable
#[allow(clippy::should_implement_trait)]
impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn distance(self, other: Vec2) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }

    pub fn norm(self) -> f64 {
        (self.x * self.x + self.y * self.y).sqrt()
    }

    pub fn sub(self, other: Vec2) -> Vec2 {
        Vec2::new(self.x - other.x, self.y - other.y)
    }

    pub fn add(self, other: Vec2) -> Vec2 {
        Vec2::new(self.x + other.x, self.y + other.y)
    }

    pub fn scale(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the cross product; sign tells left (+) from right (-).
    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    /// Unit vector, or zero when the input is (numerically) zero length.
    pub fn unit(self) -> Vec2 {
        let n = self.norm();
        if n <= 1e-12 {
            Vec2::ZERO
        } else {
            self.scale(1.0 / n)
        }
    }

    /// Left-hand normal (rotate +90 degrees).
    pub fn left_normal(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    /// Absolute direction of this vector in degrees, (-180, 180].
    pub fn angle_deg(self) -> f64 {
        normalize_deg(self.y.atan2(self.x).to_degrees())
    }
}

/// Normalize an angle in degrees into (-180, 180].
pub fn normalize_deg(mut a: f64) -> f64 {
    while a > 180.0 {
        a -= 360.0;
    }
    while a <= -180.0 {
        a += 360.0;
    }
    a
}

/// Unit vector for an absolute heading in degrees.
pub fn heading_vec(heading_deg: f64) -> Vec2 {
    let r = heading_deg.to_radians();
    Vec2::new(r.cos(), r.sin())
}

/// Bearing of `target` as seen from `pos` looking along `heading_deg`, in (-180, 180].
pub fn bearing_deg(pos: Vec2, heading_deg: f64, target: Vec2) -> f64 {
    let v = target.sub(pos);
    normalize_deg(v.angle_deg() - heading_deg)
}

/// Distance from point `p` to the segment [a, b].
pub fn segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    p.distance(project_on_segment(p, a, b))
}

/// Closest point to `p` on the segment [a, b].
pub fn project_on_segment(p: Vec2, a: Vec2, b: Vec2) -> Vec2 {
    let ab = b.sub(a);
    let len2 = ab.dot(ab);
    if len2 <= 1e-18 {
        return a;
    }
    let t = (p.sub(a).dot(ab) / len2).clamp(0.0, 1.0);
    a.add(ab.scale(t))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_wraps_into_half_open_interval() {
        assert_eq!(normalize_deg(190.0), -170.0);
        assert_eq!(normalize_deg(-180.0), 180.0);
        assert_eq!(normalize_deg(180.0), 180.0);
        assert_eq!(normalize_deg(540.0), 180.0);
    }

    #[test]
    fn bearing_is_relative_to_heading() {
        let pos = Vec2::new(0.0, 0.0);
        // target straight ahead when facing east
        assert!(bearing_deg(pos, 0.0, Vec2::new(5.0, 0.0)).abs() < 1e-12);
        // target to the left when facing east
        assert!((bearing_deg(pos, 0.0, Vec2::new(0.0, 3.0)) - 90.0).abs() < 1e-12);
        // facing north, target east => -90 (to the right)
        assert!((bearing_deg(pos, 90.0, Vec2::new(4.0, 0.0)) + 90.0).abs() < 1e-12);
    }

    #[test]
    fn segment_projection_clamps_to_endpoints() {
        let a = Vec2::new(0.0, 0.0);
        let b = Vec2::new(10.0, 0.0);
        let p = Vec2::new(-3.0, 4.0);
        assert_eq!(project_on_segment(p, a, b), a);
        assert!((segment_distance(Vec2::new(5.0, 2.0), a, b) - 2.0).abs() < 1e-12);
    }
}
