//! Image-to-ground-plane rectification by a planar homography estimated with
//! the normalized direct linear transform.

use nalgebra::{DMatrix, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::geometry::{cross, Point};
use crate::error::{Error, Result};

/// Homogeneous coordinates smaller than this map to infinity.
pub const INFINITY_EPS: f64 = 1e-12;

/// One calibration pair: a pixel and the ground point it shows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correspondence {
    pub image: Point,
    pub world: Point,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography(Matrix3<f64>);

impl Homography {
    pub fn identity() -> Self {
        Homography(Matrix3::identity())
    }

    pub fn from_rows(rows: [[f64; 3]; 3]) -> Result<Self> {
        let m = Matrix3::from_fn(|r, c| rows[r][c]);
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::Calibration("matrix entries must be finite".into()));
        }
        if m.determinant() == 0.0 {
            return Err(Error::Calibration("matrix is singular".into()));
        }
        Ok(Homography(m))
    }

    pub fn rows(&self) -> [[f64; 3]; 3] {
        std::array::from_fn(|r| std::array::from_fn(|c| self.0[(r, c)]))
    }

    pub fn inverse(&self) -> Result<Homography> {
        let inv = self
            .0
            .try_inverse()
            .ok_or_else(|| Error::Calibration("matrix is singular".into()))?;
        Ok(Homography(inv / inv[(2, 2)]))
    }

    pub fn apply(&self, p: Point) -> Result<Point> {
        let v = self.0 * Vector3::new(p.x, p.y, 1.0);
        if v.z.abs() < INFINITY_EPS {
            return Err(Error::PointAtInfinity(v.z));
        }
        Ok(Point::new(v.x / v.z, v.y / v.z))
    }
}

/// Similarity moving the centroid to the origin with mean distance √2.
fn normalizer(points: &[Point]) -> Matrix3<f64> {
    let n = points.len() as f64;
    let cx = points.iter().map(|p| p.x).sum::<f64>() / n;
    let cy = points.iter().map(|p| p.y).sum::<f64>() / n;
    let mean_dist = points
        .iter()
        .map(|p| (p.x - cx).hypot(p.y - cy))
        .sum::<f64>()
        / n;
    let s = std::f64::consts::SQRT_2 / mean_dist;
    Matrix3::new(s, 0.0, -s * cx, 0.0, s, -s * cy, 0.0, 0.0, 1.0)
}

fn transform(m: &Matrix3<f64>, p: &Point) -> Point {
    let v = m * Vector3::new(p.x, p.y, 1.0);
    Point::new(v.x / v.z, v.y / v.z)
}

fn check_configuration(points: &[Point], what: &str) -> Result<()> {
    let extent = points
        .iter()
        .flat_map(|p| [p.x.abs(), p.y.abs()])
        .fold(0.0, f64::max)
        .max(1.0);
    let eps = 1e-9 * extent * extent;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            if a.distance(b) <= 1e-9 * extent {
                return Err(Error::Calibration(format!("duplicate {what} points")));
            }
        }
    }
    let n = points.len();
    if n == 4 {
        for i in 0..n {
            for j in i + 1..n {
                for k in j + 1..n {
                    if cross(&points[i], &points[j], &points[k]).abs() <= eps {
                        return Err(Error::Calibration(format!(
                            "three {what} points are collinear"
                        )));
                    }
                }
            }
        }
    } else {
        let all_collinear = (2..n).all(|k| cross(&points[0], &points[1], &points[k]).abs() <= eps);
        if all_collinear {
            return Err(Error::Calibration(format!(
                "all {what} points are collinear"
            )));
        }
    }
    Ok(())
}

/// Estimates the homography mapping image points onto world points.
///
/// Exactly four correspondences determine it; more are combined in the
/// least-squares sense on the algebraic error. The result is scaled so the
/// bottom-right entry is 1.
pub fn fit_homography(correspondences: &[Correspondence]) -> Result<Homography> {
    let n = correspondences.len();
    if n < 4 {
        return Err(Error::Calibration(format!(
            "need at least 4 correspondences, got {n}"
        )));
    }
    if correspondences
        .iter()
        .any(|c| !c.image.is_finite() || !c.world.is_finite())
    {
        return Err(Error::Calibration("correspondences must be finite".into()));
    }
    let image: Vec<Point> = correspondences.iter().map(|c| c.image).collect();
    let world: Vec<Point> = correspondences.iter().map(|c| c.world).collect();
    check_configuration(&image, "image")?;
    check_configuration(&world, "world")?;

    let t_img = normalizer(&image);
    let t_world = normalizer(&world);

    // Pad to at least 9 rows so the SVD exposes the full right null space.
    let rows = (2 * n).max(9);
    let mut a = DMatrix::<f64>::zeros(rows, 9);
    for (i, (src, dst)) in image.iter().zip(&world).enumerate() {
        let p = transform(&t_img, src);
        let q = transform(&t_world, dst);
        let (r0, r1) = (2 * i, 2 * i + 1);
        a[(r0, 0)] = p.x;
        a[(r0, 1)] = p.y;
        a[(r0, 2)] = 1.0;
        a[(r0, 6)] = -q.x * p.x;
        a[(r0, 7)] = -q.x * p.y;
        a[(r0, 8)] = -q.x;
        a[(r1, 3)] = p.x;
        a[(r1, 4)] = p.y;
        a[(r1, 5)] = 1.0;
        a[(r1, 6)] = -q.y * p.x;
        a[(r1, 7)] = -q.y * p.y;
        a[(r1, 8)] = -q.y;
    }

    let svd = a.svd(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::Calibration("SVD failed".into()))?;
    let mut order: Vec<usize> = (0..9).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    let (smallest, second) = (order[0], order[1]);
    if svd.singular_values[second] <= 1e-10 * svd.singular_values[order[8]] {
        return Err(Error::Calibration(
            "correspondences do not determine a unique homography".into(),
        ));
    }
    let h = v_t.row(smallest);
    let normalized = Matrix3::from_fn(|r, c| h[3 * r + c]);

    let t_world_inv = t_world
        .try_inverse()
        .ok_or_else(|| Error::Calibration("degenerate world normalization".into()))?;
    let m = t_world_inv * normalized * t_img;
    let scale = m[(2, 2)];
    if scale.abs() <= f64::EPSILON * m.norm() {
        return Err(Error::Calibration(
            "homography has a vanishing bottom-right entry".into(),
        ));
    }
    let m = m / scale;
    if m.determinant().abs() <= f64::EPSILON * m.norm().powi(3) {
        return Err(Error::Calibration(
            "estimated homography is singular".into(),
        ));
    }
    Ok(Homography(m))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corr(image: [f64; 2], world: [f64; 2]) -> Correspondence {
        Correspondence {
            image: image.into(),
            world: world.into(),
        }
    }

    fn square(scale: f64) -> Vec<Correspondence> {
        [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]
            .iter()
            .map(|&[x, y]| corr([x, y], [scale * x, scale * y]))
            .collect()
    }

    #[test]
    fn unit_square_is_identity() {
        let h = fit_homography(&square(1.0)).unwrap().rows();
        for r in 0..3 {
            for c in 0..3 {
                let expected = if r == c { 1.0 } else { 0.0 };
                assert!((h[r][c] - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn doubled_square_is_scaling() {
        let h = fit_homography(&square(2.0)).unwrap();
        let rows = h.rows();
        for (r, expected) in [[2.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 1.0]]
            .iter()
            .enumerate()
        {
            for c in 0..3 {
                assert!((rows[r][c] - expected[c]).abs() < 1e-12);
            }
        }
        let p = h.apply(Point::new(1.0, 1.0)).unwrap();
        assert!((p.x - 2.0).abs() < 1e-12 && (p.y - 2.0).abs() < 1e-12);
    }

    #[test]
    fn identity_application() {
        let p = Homography::identity().apply(Point::new(3.0, 4.0)).unwrap();
        assert_eq!(p, Point::new(3.0, 4.0));
    }

    #[test]
    fn degenerate_configurations() {
        let mut c = square(1.0);
        c[2].image = Point::new(2.0, 0.0);
        assert!(matches!(fit_homography(&c), Err(Error::Calibration(_))));
        let mut c = square(1.0);
        c[3].image = c[0].image;
        assert!(matches!(fit_homography(&c), Err(Error::Calibration(_))));
        assert!(fit_homography(&square(1.0)[..3]).is_err());
    }

    #[test]
    fn point_at_infinity() {
        let h = Homography::from_rows([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 0.0, 1.0]]).unwrap();
        assert!(matches!(
            h.apply(Point::new(-1.0, 5.0)),
            Err(Error::PointAtInfinity(_))
        ));
    }

    #[test]
    fn over_determined_fit_reproduces_exact_mapping() {
        let truth = Homography::from_rows([
            [0.03, 0.004, -3.7],
            [0.0017, 0.036, -7.9],
            [4e-6, 8.7e-4, 1.0],
        ])
        .unwrap();
        let pixels = [
            [100.0, 200.0],
            [620.0, 190.0],
            [700.0, 560.0],
            [40.0, 600.0],
            [350.0, 400.0],
            [500.0, 300.0],
        ];
        let c: Vec<Correspondence> = pixels
            .iter()
            .map(|&p| Correspondence {
                image: p.into(),
                world: truth.apply(p.into()).unwrap(),
            })
            .collect();
        let h = fit_homography(&c).unwrap();
        for cc in &c {
            assert!(h.apply(cc.image).unwrap().distance(&cc.world) < 1e-9);
        }
    }
}
