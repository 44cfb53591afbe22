//! Small vector and box types shared by the scene, field and planner layers.
//!
//! The world frame is right-handed with `z` pointing up. Planning happens in the
//! `x`/`y` ground plane.

use serde::{Deserialize, Serialize};

/// A point or direction in 3D, meters. Serialized as `[x, y, z]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3(pub [f64; 3]);

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self([x, y, z])
    }

    pub fn x(&self) -> f64 {
        self.0[0]
    }

    pub fn y(&self) -> f64 {
        self.0[1]
    }

    pub fn z(&self) -> f64 {
        self.0[2]
    }

    /// Ground-plane projection.
    pub fn xy(&self) -> Vec2 {
        Vec2::new(self.0[0], self.0[1])
    }

    pub fn distance(&self, other: &Vec3) -> f64 {
        let d: f64 = (0..3).map(|k| (self.0[k] - other.0[k]).powi(2)).sum();
        d.sqrt()
    }

    pub fn lerp(&self, other: &Vec3, t: f64) -> Vec3 {
        Vec3([
            self.0[0] + (other.0[0] - self.0[0]) * t,
            self.0[1] + (other.0[1] - self.0[1]) * t,
            self.0[2] + (other.0[2] - self.0[2]) * t,
        ])
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

/// A point in the ground plane, meters. Serialized as `[x, y]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2(pub [f64; 2]);

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self([x, y])
    }

    pub fn x(&self) -> f64 {
        self.0[0]
    }

    pub fn y(&self) -> f64 {
        self.0[1]
    }

    pub fn distance(&self, other: &Vec2) -> f64 {
        (self.0[0] - other.0[0]).hypot(self.0[1] - other.0[1])
    }

    pub fn with_z(&self, z: f64) -> Vec3 {
        Vec3::new(self.0[0], self.0[1], z)
    }
}

/// Axis-aligned box given by its center and full side lengths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub center: Vec3,
    pub extent: Vec3,
}

impl Aabb {
    pub fn new(center: Vec3, extent: Vec3) -> Self {
        Self { center, extent }
    }

    pub fn min(&self) -> Vec3 {
        Vec3(std::array::from_fn(|k| self.center.0[k] - self.extent.0[k] / 2.0))
    }

    pub fn max(&self) -> Vec3 {
        Vec3(std::array::from_fn(|k| self.center.0[k] + self.extent.0[k] / 2.0))
    }

    /// Euclidean distance from `point` to the closest point of the box; 0 inside.
    pub fn distance(&self, point: &Vec3) -> f64 {
        let (lo, hi) = (self.min(), self.max());
        let mut sq = 0.0;
        for k in 0..3 {
            let p = point.0[k];
            let gap = if p < lo.0[k] {
                lo.0[k] - p
            } else if p > hi.0[k] {
                p - hi.0[k]
            } else {
                0.0
            };
            sq += gap * gap;
        }
        sq.sqrt()
    }

    /// Ground-plane footprint of the box.
    pub fn footprint(&self) -> Rect {
        let (lo, hi) = (self.min(), self.max());
        Rect::new(Vec2::new(lo.x(), lo.y()), Vec2::new(hi.x(), hi.y()))
    }
}

/// Axis-aligned rectangle in the ground plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: Vec2,
    pub max: Vec2,
}

impl Rect {
    pub fn new(min: Vec2, max: Vec2) -> Self {
        Self { min, max }
    }

    pub fn center(&self) -> Vec2 {
        Vec2::new(
            (self.min.x() + self.max.x()) / 2.0,
            (self.min.y() + self.max.y()) / 2.0,
        )
    }

    pub fn width(&self) -> f64 {
        self.max.x() - self.min.x()
    }

    pub fn height(&self) -> f64 {
        self.max.y() - self.min.y()
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    /// Planar distance from `point` to the rectangle; 0 inside or on the border.
    pub fn distance(&self, point: &Vec2) -> f64 {
        let dx = (self.min.x() - point.x()).max(0.0).max(point.x() - self.max.x());
        let dy = (self.min.y() - point.y()).max(0.0).max(point.y() - self.max.y());
        dx.hypot(dy)
    }

    pub fn contains(&self, point: &Vec2) -> bool {
        point.x() >= self.min.x()
            && point.x() <= self.max.x()
            && point.y() >= self.min.y()
            && point.y() <= self.max.y()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rect_distance_outside_corner() {
        let r = Rect::new(Vec2::new(0.0, 0.0), Vec2::new(1.0, 1.0));
        assert_eq!(r.distance(&Vec2::new(4.0, 5.0)), 5.0);
        assert_eq!(r.distance(&Vec2::new(0.5, 0.5)), 0.0);
        assert_eq!(r.distance(&Vec2::new(0.5, -2.0)), 2.0);
    }

    #[test]
    fn footprint_drops_height() {
        let b = Aabb::new(Vec3::new(1.0, 2.0, 3.0), Vec3::new(2.0, 4.0, 6.0));
        let f = b.footprint();
        assert_eq!(f.min, Vec2::new(0.0, 0.0));
        assert_eq!(f.max, Vec2::new(2.0, 4.0));
    }
}
