//! Planar points and polygons in site coordinates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn lerp(&self, other: &Point, t: f64) -> Point {
        Point::new(
            self.x + t * (other.x - self.x),
            self.y + t * (other.y - self.y),
        )
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl From<[f64; 2]> for Point {
    fn from([x, y]: [f64; 2]) -> Self {
        Point { x, y }
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

/// Twice the signed area of the triangle `abc`.
pub(crate) fn cross(a: &Point, b: &Point, c: &Point) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

/// Parameter along `a→b` at which it meets segment `c→d`, if it does.
fn segment_hit(a: &Point, b: &Point, c: &Point, d: &Point) -> Option<f64> {
    let r = (b.x - a.x, b.y - a.y);
    let s = (d.x - c.x, d.y - c.y);
    let denom = r.0 * s.1 - r.1 * s.0;
    if denom == 0.0 {
        return None;
    }
    let qp = (c.x - a.x, c.y - a.y);
    let t = (qp.0 * s.1 - qp.1 * s.0) / denom;
    let u = (qp.0 * r.1 - qp.1 * r.0) / denom;
    ((0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u)).then_some(t)
}

/// A simple polygon given by its vertices in order (closing edge implied).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Polygon {
    pub vertices: Vec<Point>,
}

impl Polygon {
    pub fn new(vertices: Vec<Point>) -> Result<Self> {
        let polygon = Polygon { vertices };
        polygon.validate("polygon")?;
        Ok(polygon)
    }

    /// Axis-aligned rectangle.
    pub fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Polygon {
            vertices: vec![
                Point::new(x0, y0),
                Point::new(x1, y0),
                Point::new(x1, y1),
                Point::new(x0, y1),
            ],
        }
    }

    fn edges(&self) -> impl Iterator<Item = (&Point, &Point)> {
        let n = self.vertices.len();
        (0..n).map(move |i| (&self.vertices[i], &self.vertices[(i + 1) % n]))
    }

    pub fn signed_area(&self) -> f64 {
        0.5 * self
            .edges()
            .map(|(a, b)| a.x * b.y - b.x * a.y)
            .sum::<f64>()
    }

    pub fn validate(&self, field: &'static str) -> Result<()> {
        let n = self.vertices.len();
        if n < 3 {
            return Err(Error::domain(
                field,
                "a polygon needs at least three vertices",
            ));
        }
        if self.vertices.iter().any(|p| !p.is_finite()) {
            return Err(Error::domain(field, "vertices must be finite"));
        }
        if self.signed_area().abs() <= f64::EPSILON {
            return Err(Error::domain(field, "polygon has zero area"));
        }
        for i in 0..n {
            for j in i + 1..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                if adjacent {
                    continue;
                }
                let (a, b) = (&self.vertices[i], &self.vertices[(i + 1) % n]);
                let (c, d) = (&self.vertices[j], &self.vertices[(j + 1) % n]);
                if segment_hit(a, b, c, d).is_some() {
                    return Err(Error::domain(field, "polygon edges cross (not simple)"));
                }
            }
        }
        Ok(())
    }

    /// Even-odd containment test.
    pub fn contains(&self, p: &Point) -> bool {
        let mut inside = false;
        for (a, b) in self.edges() {
            if (a.y > p.y) != (b.y > p.y) {
                let x_cross = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
                if p.x < x_cross {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// Parameters in `[0, 1]` at which segment `a→b` crosses the boundary,
    /// ascending.
    pub fn crossings(&self, a: &Point, b: &Point) -> Vec<f64> {
        let mut hits: Vec<f64> = self
            .edges()
            .filter_map(|(c, d)| segment_hit(a, b, c, d))
            .collect();
        hits.sort_by(f64::total_cmp);
        hits
    }
}
