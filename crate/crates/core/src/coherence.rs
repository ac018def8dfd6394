//! Capsule coherence measure.
//!
//! A ray subset is summarized by a capsule whose axis joins the centroid of
//! the origins and the centroid of the termination points; the cap radii are
//! the mean distances of the respective points from that axis. The mean
//! capsule surface area over consecutive subsets of `n` rays (64 by default)
//! measures how coherent an ordering is: smaller is more coherent.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geom::{Ray, Vec3};

pub type Point = [f64; 3];

pub const DEFAULT_SUBSET: usize = 64;
/// Centroid separation (relative to the point-set extent) below which the
/// capsule axis is undefined and a sphere is used instead.
pub const SPHERE_FALLBACK_RATIO: f64 = 1e-9;

#[inline]
fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
fn cross(a: Point, b: Point) -> Point {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
fn norm(a: Point) -> f64 {
    libm::sqrt(dot(a, a))
}

fn centroid(points: &[Point]) -> Point {
    let mut c = [0.0; 3];
    for p in points {
        for i in 0..3 {
            c[i] += p[i];
        }
    }
    let n = points.len() as f64;
    [c[0] / n, c[1] / n, c[2] / n]
}

pub fn to_point(v: Vec3) -> Point {
    [v.x as f64, v.y as f64, v.z as f64]
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CapsuleMode {
    Capsule,
    /// Coincident centroids: a sphere around the common centroid.
    Sphere { center: Point, radius: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Capsule {
    pub c_o: Point,
    pub c_t: Point,
    pub r_o: f64,
    pub r_t: f64,
    pub mode: CapsuleMode,
}

impl Capsule {
    /// Capsule-mode constructor.
    pub fn new(c_o: Point, c_t: Point, r_o: f64, r_t: f64) -> Self {
        Self {
            c_o,
            c_t,
            r_o,
            r_t,
            mode: CapsuleMode::Capsule,
        }
    }

    pub fn axis_length(&self) -> f64 {
        norm(sub(self.c_t, self.c_o))
    }
}

/// Fits the capsule of a ray subset given its origins and termination points.
pub fn capsule_fit(origins: &[Point], terminations: &[Point]) -> Result<Capsule> {
    if origins.is_empty() {
        return Err(Error::Empty);
    }
    if origins.len() != terminations.len() {
        return Err(Error::LengthMismatch {
            left: origins.len(),
            right: terminations.len(),
        });
    }
    let c_o = centroid(origins);
    let c_t = centroid(terminations);
    let axis = sub(c_t, c_o);
    let h = norm(axis);

    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in origins.iter().chain(terminations) {
        for i in 0..3 {
            lo[i] = lo[i].min(p[i]);
            hi[i] = hi[i].max(p[i]);
        }
    }
    let extent = (0..3).map(|i| hi[i] - lo[i]).fold(0.0, f64::max);

    if h <= SPHERE_FALLBACK_RATIO * extent || h == 0.0 {
        let all = origins.len() + terminations.len();
        let mut c = [0.0; 3];
        for p in origins.iter().chain(terminations) {
            for i in 0..3 {
                c[i] += p[i];
            }
        }
        let center = c.map(|v| v / all as f64);
        let radius = origins
            .iter()
            .chain(terminations)
            .map(|p| norm(sub(*p, center)))
            .sum::<f64>()
            / all as f64;
        return Ok(Capsule {
            c_o,
            c_t,
            r_o: radius,
            r_t: radius,
            mode: CapsuleMode::Sphere { center, radius },
        });
    }

    let unit = axis.map(|v| v / h);
    let mean_dist = |pts: &[Point]| -> f64 {
        pts.iter().map(|p| norm(cross(sub(*p, c_o), unit))).sum::<f64>() / pts.len() as f64
    };
    Ok(Capsule::new(c_o, c_t, mean_dist(origins), mean_dist(terminations)))
}

/// Surface area: two hemispherical caps plus the lateral surface of the
/// conical frustum between them.
pub fn capsule_area(c: &Capsule) -> f64 {
    match c.mode {
        CapsuleMode::Sphere { radius, .. } => 4.0 * PI * radius * radius,
        CapsuleMode::Capsule => {
            let h = c.axis_length();
            let dr = c.r_t - c.r_o;
            2.0 * PI * c.r_o * c.r_o
                + 2.0 * PI * c.r_t * c.r_t
                + PI * (c.r_o + c.r_t) * libm::sqrt(h * h + dr * dr)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoherenceReport {
    /// Capsule area of each complete subset, in order.
    pub areas: Vec<f64>,
    pub mean: f64,
    pub subset_size: usize,
}

/// Mean capsule area over consecutive subsets of `n` points, in the current
/// order. A trailing subset shorter than `n` is dropped.
pub fn mean_measure(origins: &[Point], terminations: &[Point], n: usize) -> Result<CoherenceReport> {
    let capsules = fit_subsets(origins, terminations, n)?;
    let areas: Vec<f64> = capsules.iter().map(capsule_area).collect();
    Ok(report(areas, n))
}

/// Capsules of every complete subset of `n` consecutive points.
pub fn fit_subsets(origins: &[Point], terminations: &[Point], n: usize) -> Result<Vec<Capsule>> {
    if origins.len() != terminations.len() {
        return Err(Error::LengthMismatch {
            left: origins.len(),
            right: terminations.len(),
        });
    }
    if n == 0 {
        return Err(Error::Empty);
    }
    if origins.len() < n {
        return Err(Error::TooFewRays {
            needed: n,
            got: origins.len(),
        });
    }
    origins
        .chunks_exact(n)
        .zip(terminations.chunks_exact(n))
        .map(|(o, t)| capsule_fit(o, t))
        .collect()
}

/// Assembles a report from subset areas (summed in order).
pub fn report(areas: Vec<f64>, subset_size: usize) -> CoherenceReport {
    let mean = if areas.is_empty() {
        0.0
    } else {
        areas.iter().sum::<f64>() / areas.len() as f64
    };
    CoherenceReport {
        areas,
        mean,
        subset_size,
    }
}

/// [`mean_measure`] for rays and their termination points.
pub fn mean_measure_rays(rays: &[Ray], terminations: &[Vec3], n: usize) -> Result<CoherenceReport> {
    let o: Vec<Point> = rays.iter().map(|r| to_point(r.origin)).collect();
    let t: Vec<Point> = terminations.iter().map(|&p| to_point(p)).collect();
    mean_measure(&o, &t, n)
}

/// Sample Pearson correlation coefficient.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch {
            left: xs.len(),
            right: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(Error::TooFewRays {
            needed: 2,
            got: xs.len(),
        });
    }
    let constant = |v: &[f64]| v.iter().all(|&x| x == v[0]);
    if constant(xs) || constant(ys) {
        return Err(Error::ZeroVariance);
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok((sxy / libm::sqrt(sxx * syy)).clamp(-1.0, 1.0))
}

/// Element-wise `method / unsorted`.
pub fn relative_series(method_values: &[f64], unsorted_values: &[f64]) -> Result<Vec<f64>> {
    if method_values.len() != unsorted_values.len() {
        return Err(Error::LengthMismatch {
            left: method_values.len(),
            right: unsorted_values.len(),
        });
    }
    method_values
        .iter()
        .zip(unsorted_values)
        .enumerate()
        .map(|(i, (&m, &u))| if u == 0.0 { Err(Error::DivisionByZero(i)) } else { Ok(m / u) })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn identical_rays_have_zero_radii() {
        let o = vec![[1.0, 2.0, 3.0]; 8];
        let t = vec![[1.0, 2.0, 9.0]; 8];
        let c = capsule_fit(&o, &t).unwrap();
        assert_eq!(c.mode, CapsuleMode::Capsule);
        assert_eq!((c.r_o, c.r_t), (0.0, 0.0));
        assert_eq!(c.c_o, [1.0, 2.0, 3.0]);
        assert_eq!(c.c_t, [1.0, 2.0, 9.0]);
        assert_eq!(capsule_area(&c), 0.0);
    }

    #[test]
    fn symmetric_pair() {
        let o = [[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]];
        let t = [[1.0, 0.0, 10.0], [-1.0, 0.0, 10.0]];
        let c = capsule_fit(&o, &t).unwrap();
        assert_eq!(c.c_o, [0.0, 0.0, 0.0]);
        assert_eq!(c.c_t, [0.0, 0.0, 10.0]);
        assert_eq!((c.r_o, c.r_t), (1.0, 1.0));
    }

    #[test]
    fn area_examples() {
        let cyl = Capsule::new([0.0; 3], [0.0, 0.0, 2.0], 1.0, 1.0);
        assert!((capsule_area(&cyl) - 8.0 * PI).abs() < 1e-12);
        let line = Capsule::new([0.0; 3], [0.0, 5.0, 0.0], 0.0, 0.0);
        assert_eq!(capsule_area(&line), 0.0);
        let cone = Capsule::new([0.0; 3], [0.0; 3], 1.0, 0.0);
        assert!((capsule_area(&cone) - 3.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn coincident_centroids_fall_back_to_sphere() {
        let o = [[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]];
        let t = [[0.0, 1.0, 0.0], [0.0, -1.0, 0.0]];
        let c = capsule_fit(&o, &t).unwrap();
        assert!(matches!(c.mode, CapsuleMode::Sphere { radius, .. } if radius == 1.0));
        assert!((capsule_area(&c) - 4.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn fit_errors() {
        assert_eq!(capsule_fit(&[], &[]), Err(Error::Empty));
        assert!(capsule_fit(&[[0.0; 3]], &[]).is_err());
        assert!(matches!(
            mean_measure(&[[0.0; 3]; 10], &[[1.0; 3]; 10], 64),
            Err(Error::TooFewRays { needed: 64, got: 10 })
        ));
    }

    #[test]
    fn mean_examples() {
        let o = vec![[0.5, 0.5, 0.5]; 64];
        let t = vec![[0.5, 0.9, 0.5]; 64];
        assert_eq!(mean_measure(&o, &t, 64).unwrap().mean, 0.0);

        // trailing partial subset dropped
        let o2: Vec<Point> = (0..100).map(|i| [i as f64, 0.0, 0.0]).collect();
        let t2: Vec<Point> = (0..100).map(|i| [i as f64, 1.0, 0.0]).collect();
        let r = mean_measure(&o2, &t2, 64).unwrap();
        assert_eq!(r.areas.len(), 1);
        assert_eq!(r.subset_size, 64);
    }

    #[test]
    fn pearson_examples() {
        assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-15);
        // by hand: deviations (-1.5,-.5,.5,1.5) and (-1.5,.5,-.5,1.5): 4/5
        assert!((pearson(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap() - 0.8).abs() < 1e-12);
        assert_eq!(pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(Error::ZeroVariance));
        assert_eq!(pearson(&[0.1; 5], &[1.0, 2.0, 3.0, 4.0, 5.0]), Err(Error::ZeroVariance));
        assert!(pearson(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn relative_examples() {
        let u = [2.0, 4.0, 8.0];
        assert_eq!(relative_series(&u, &u).unwrap(), vec![1.0; 3]);
        assert_eq!(relative_series(&[1.0, 2.0, 4.0], &u).unwrap(), vec![0.5; 3]);
        assert_eq!(relative_series(&[1.0], &[0.0]), Err(Error::DivisionByZero(0)));
    }
}
