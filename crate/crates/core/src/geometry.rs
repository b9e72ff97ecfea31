//! Planar geometry primitives shared by instance generation and motion planning.

use serde::{Deserialize, Serialize};

/// A point in the workspace plane, in meters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn dist(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Axis-aligned rectangle given by its min and max corners, in meters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: Point,
    pub max: Point,
}

impl Rect {
    pub fn new(min: Point, max: Point) -> Self {
        Rect { min, max }
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn diagonal(&self) -> f64 {
        self.width().hypot(self.height())
    }

    /// True when both extents are strictly positive.
    pub fn is_proper(&self) -> bool {
        self.min.x < self.max.x && self.min.y < self.max.y
    }

    /// Closed containment: boundary points count as inside.
    pub fn contains(&self, p: &Point) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    /// Open containment: strictly inside the interior.
    pub fn contains_interior(&self, p: &Point) -> bool {
        p.x > self.min.x && p.x < self.max.x && p.y > self.min.y && p.y < self.max.y
    }
}

/// Tests whether the open segment (p, q) passes through the open interior of `rect`.
///
/// Uses parametric slab clipping in plain f64: the segment is written as
/// p + t (q - p) for t in the open interval (0, 1) and intersected with the
/// open slabs min < x < max, min < y < max. Boundary contact (a segment that
/// only touches an edge or corner, or runs along an edge) does not count as a
/// collision. The test is exact up to one floating-point rounding of the
/// interval endpoints; obstacles are treated as open sets by convention.
pub fn segment_intersects_interior(p: &Point, q: &Point, rect: &Rect) -> bool {
    // Open parameter interval of candidate t values.
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;

    for (p0, d, min, max) in [
        (p.x, q.x - p.x, rect.min.x, rect.max.x),
        (p.y, q.y - p.y, rect.min.y, rect.max.y),
    ] {
        if d == 0.0 {
            // Degenerate axis: the whole segment shares one coordinate.
            if p0 <= min || p0 >= max {
                return false;
            }
        } else {
            let mut t0 = (min - p0) / d;
            let mut t1 = (max - p0) / d;
            if t0 > t1 {
                std::mem::swap(&mut t0, &mut t1);
            }
            lo = lo.max(t0);
            hi = hi.min(t1);
            if lo >= hi {
                return false;
            }
        }
    }
    lo < hi
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_rect() -> Rect {
        Rect::new(Point::new(0.0, 0.0), Point::new(1.0, 1.0))
    }

    #[test]
    fn segment_outside_does_not_collide() {
        let r = unit_rect();
        assert!(!segment_intersects_interior(
            &Point::new(2.0, 2.0),
            &Point::new(3.0, 2.0),
            &r
        ));
    }

    #[test]
    fn segment_through_interior_collides() {
        let r = unit_rect();
        assert!(segment_intersects_interior(
            &Point::new(-1.0, 0.5),
            &Point::new(2.0, 0.5),
            &r
        ));
    }

    #[test]
    fn segment_along_boundary_edge_is_free() {
        let r = unit_rect();
        // Runs exactly along the bottom edge: touches boundary only.
        assert!(!segment_intersects_interior(
            &Point::new(-1.0, 0.0),
            &Point::new(2.0, 0.0),
            &r
        ));
        // Touches a single corner.
        assert!(!segment_intersects_interior(
            &Point::new(-1.0, 2.0),
            &Point::new(2.0, -1.0),
            &r
        ));
    }

    #[test]
    fn segment_ending_on_boundary_is_free() {
        let r = unit_rect();
        assert!(!segment_intersects_interior(
            &Point::new(-1.0, 0.5),
            &Point::new(0.0, 0.5),
            &r
        ));
    }

    #[test]
    fn segment_crossing_corner_region_collides() {
        let r = unit_rect();
        assert!(segment_intersects_interior(
            &Point::new(-0.5, 0.5),
            &Point::new(0.5, -0.5 + 0.2),
            &r
        ));
    }
}
