//! Computational geometry: the room, the source square, the buffer square
//! separating source from sensors, and sound-hard rectangular scatterers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Closed axis-aligned rectangle `[x0, x1] x [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect<T> {
    pub x0: T,
    pub x1: T,
    pub y0: T,
    pub y1: T,
}

impl<T: Real> Rect<T> {
    pub fn new(x0: T, x1: T, y0: T, y1: T) -> Self {
        Rect { x0, x1, y0, y1 }
    }

    /// Square `[-r, r]^2`.
    pub fn centered_square(half_width: T) -> Self {
        Rect::new(-half_width, half_width, -half_width, half_width)
    }

    pub fn from_f64(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Rect::new(T::lit(x0), T::lit(x1), T::lit(y0), T::lit(y1))
    }

    pub fn area(&self) -> T {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }

    pub fn is_proper(&self) -> bool {
        self.x1 > self.x0 && self.y1 > self.y0
    }

    /// Closed containment with tolerance `eps`.
    pub fn contains(&self, x: T, y: T, eps: T) -> bool {
        x >= self.x0 - eps && x <= self.x1 + eps && y >= self.y0 - eps && y <= self.y1 + eps
    }

    /// Strict interior containment, at least `eps` away from every side.
    pub fn contains_strictly(&self, x: T, y: T, eps: T) -> bool {
        x > self.x0 + eps && x < self.x1 - eps && y > self.y0 + eps && y < self.y1 - eps
    }

    /// `other` lies in the open interior of `self`.
    pub fn contains_rect_strictly(&self, other: &Rect<T>) -> bool {
        other.x0 > self.x0 && other.x1 < self.x1 && other.y0 > self.y0 && other.y1 < self.y1
    }

    pub fn contains_rect(&self, other: &Rect<T>) -> bool {
        other.x0 >= self.x0 && other.x1 <= self.x1 && other.y0 >= self.y0 && other.y1 <= self.y1
    }

    /// Closures intersect (touching counts).
    pub fn touches(&self, other: &Rect<T>) -> bool {
        self.x0 <= other.x1 && other.x0 <= self.x1 && self.y0 <= other.y1 && other.y0 <= self.y1
    }
}

/// Geometry of the room problem.
///
/// The measurement zone is `room \ (buffer ∪ scatterers)`; the source is
/// sought inside `source`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometrySpec<T> {
    pub room: Rect<T>,
    pub source: Rect<T>,
    pub buffer: Rect<T>,
    pub scatterers: Vec<Rect<T>>,
    pub wave_number: T,
}

impl<T: Real> Default for GeometrySpec<T> {
    fn default() -> Self {
        GeometrySpec {
            room: Rect::from_f64(-1.0, 1.0, -1.0, 1.0),
            source: Rect::from_f64(-0.5, 0.5, -0.5, 0.5),
            buffer: Rect::from_f64(-0.55, 0.55, -0.55, 0.55),
            scatterers: vec![
                Rect::from_f64(0.60, 0.75, 0.60, 0.75),
                Rect::from_f64(-0.75, -0.60, 0.60, 0.75),
                Rect::from_f64(0.60, 0.75, -0.75, -0.60),
            ],
            wave_number: T::lit(3.0),
        }
    }
}

impl<T: Real> GeometrySpec<T> {
    /// Room with no source, buffer or scatterers of its own: the source and
    /// buffer coincide with the room, so every element is tagged SOURCE.
    pub fn bare_room(room: Rect<T>, wave_number: T) -> Self {
        GeometrySpec { room, source: room, buffer: room, scatterers: Vec::new(), wave_number }
    }

    /// True when the source and buffer are the whole room (no inverse
    /// problem structure, used for plain meshing and FEM checks).
    pub fn is_bare(&self) -> bool {
        self.source == self.room && self.buffer == self.room
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Geometry(msg));
        for (name, r) in [("room", &self.room), ("source", &self.source), ("buffer", &self.buffer)] {
            if !r.is_proper() {
                return fail(format!("{name} rectangle is degenerate: {r:?}"));
            }
        }
        if !(self.wave_number.is_finite() && self.wave_number >= T::zero()) {
            return fail(format!("wave number must be finite and non-negative, got {}", self.wave_number));
        }
        if !self.is_bare() {
            if !self.room.contains_rect_strictly(&self.source) {
                return fail("source region must lie in the interior of the room".into());
            }
            if !self.buffer.contains_rect_strictly(&self.source) {
                return fail(
                    "buffer must strictly enclose the source (source and measurement closures must be disjoint)".into(),
                );
            }
            if !self.room.contains_rect_strictly(&self.buffer) {
                return fail("buffer must lie in the interior of the room".into());
            }
        }
        for (i, s) in self.scatterers.iter().enumerate() {
            if !s.is_proper() {
                return fail(format!("scatterer {i} is degenerate: {s:?}"));
            }
            if !self.room.contains_rect_strictly(s) {
                return fail(format!("scatterer {i} must lie in the interior of the room"));
            }
            if s.touches(&self.buffer) {
                return fail(format!("scatterer {i} touches or overlaps the buffer region"));
            }
            for (j, t) in self.scatterers.iter().enumerate().skip(i + 1) {
                if s.touches(t) {
                    return fail(format!("scatterers {i} and {j} overlap or touch"));
                }
            }
        }
        Ok(())
    }

    pub fn domain_area(&self) -> T {
        self.room.area() - self.scatterers.iter().map(|s| s.area()).sum::<T>()
    }

    pub fn measurement_area(&self) -> T {
        self.domain_area() - self.buffer.area()
    }

    pub fn in_scatterer(&self, x: T, y: T) -> bool {
        let eps = T::geometric_eps();
        self.scatterers.iter().any(|s| s.contains_strictly(x, y, eps))
    }

    /// Closed measurement region `room \ (buffer ∪ scatterers)`, closure taken.
    pub fn in_measurement_closure(&self, x: T, y: T) -> bool {
        let eps = T::geometric_eps();
        !self.buffer.contains_strictly(x, y, eps) && !self.in_scatterer(x, y)
    }
}
