//! Scenes: a procedural enclosed box for asset-free runs, or an OBJ mesh.

use std::f32::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use raysort_core::tracer::{Bvh, Triangle};
use raysort_core::{Aabb, Vec3};

use crate::error::{Error, Result};
use crate::obj::load_obj;

/// Side of the ceiling light relative to the largest scene extent.
pub const DEFAULT_LIGHT_RATIO: f32 = 0.05;

const SPHERE_SEGMENTS: usize = 10;
const SPHERE_RINGS: usize = 6;

#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub name: String,
    pub triangles: Vec<Triangle>,
    pub bounds: Aabb,
}

impl Scene {
    pub fn new(name: impl Into<String>, triangles: Vec<Triangle>) -> Result<Self> {
        let triangles: Vec<Triangle> = triangles.into_iter().filter(|t| !t.is_degenerate()).collect();
        if triangles.is_empty() {
            return Err(Error::EmptyMesh);
        }
        let bounds = triangles
            .iter()
            .fold(Aabb::empty(), |b, t| b.union(&t.bounds()));
        Ok(Self {
            name: name.into(),
            triangles,
            bounds,
        })
    }

    pub fn build_bvh(&self) -> Result<Bvh> {
        Ok(Bvh::build(&self.triangles)?)
    }

    /// `procedural:N` or a path to an OBJ file.
    pub fn from_spec(spec: &str, seed: u64) -> Result<Self> {
        match spec.strip_prefix("procedural:") {
            Some(n) => {
                let n: usize = n
                    .parse()
                    .map_err(|_| Error::Config(format!("bad procedural complexity {n:?}")))?;
                gen_procedural_scene(seed, n)
            }
            None => {
                let path = Path::new(spec);
                let triangles = load_obj(path)?;
                let name = path.file_stem().map_or(spec.to_string(), |s| s.to_string_lossy().into_owned());
                Scene::new(name, triangles)
            }
        }
    }
}

/// Square emitter facing down from the middle of the scene's top face.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Light {
    pub center: Vec3,
    pub half_size: f32,
    pub radiance: f32,
}

pub const LIGHT_NORMAL: Vec3 = Vec3::new(0.0, -1.0, 0.0);

impl Light {
    pub fn for_bounds(bounds: &Aabb, ratio: f32, radiance: f32) -> Self {
        let c = bounds.center();
        let extent = bounds.diagonal().max_component();
        Self {
            center: Vec3::new(c.x, bounds.max.y, c.z),
            half_size: 0.5 * ratio * extent,
            radiance,
        }
    }

    pub fn area(&self) -> f32 {
        4.0 * self.half_size * self.half_size
    }

    pub fn sample(&self, u: f32, v: f32) -> Vec3 {
        let s = 2.0 * self.half_size;
        Vec3::new(
            self.center.x - self.half_size + u * s,
            self.center.y,
            self.center.z - self.half_size + v * s,
        )
    }

    /// Whether a surface point seen from below lies on the emitter.
    pub fn contains(&self, p: Vec3, normal: Vec3, extent: f32) -> bool {
        normal.dot(LIGHT_NORMAL) > 0.5
            && (p.y - self.center.y).abs() <= 1e-4 * extent
            && (p.x - self.center.x).abs() <= self.half_size
            && (p.z - self.center.z).abs() <= self.half_size
    }
}

fn quad(out: &mut Vec<Triangle>, a: Vec3, b: Vec3, c: Vec3, d: Vec3) {
    out.push(Triangle::new(a, b, c));
    out.push(Triangle::new(a, c, d));
}

fn push_box(out: &mut Vec<Triangle>, lo: Vec3, hi: Vec3) {
    let p = |x: bool, y: bool, z: bool| {
        Vec3::new(if x { hi.x } else { lo.x }, if y { hi.y } else { lo.y }, if z { hi.z } else { lo.z })
    };
    quad(out, p(false, false, false), p(true, false, false), p(true, true, false), p(false, true, false));
    quad(out, p(false, false, true), p(false, true, true), p(true, true, true), p(true, false, true));
    quad(out, p(false, false, false), p(false, true, false), p(false, true, true), p(false, false, true));
    quad(out, p(true, false, false), p(true, false, true), p(true, true, true), p(true, true, false));
    quad(out, p(false, false, false), p(false, false, true), p(true, false, true), p(true, false, false));
    quad(out, p(false, true, false), p(true, true, false), p(true, true, true), p(false, true, true));
}

fn push_sphere(out: &mut Vec<Triangle>, c: Vec3, r: f32) {
    let at = |ring: usize, seg: usize| {
        let theta = PI * ring as f32 / SPHERE_RINGS as f32;
        let phi = 2.0 * PI * seg as f32 / SPHERE_SEGMENTS as f32;
        c + Vec3::new(theta.sin() * phi.cos(), theta.cos(), theta.sin() * phi.sin()) * r
    };
    for ring in 0..SPHERE_RINGS {
        for seg in 0..SPHERE_SEGMENTS {
            let (a, b) = (at(ring, seg), at(ring, seg + 1));
            let (d, e) = (at(ring + 1, seg), at(ring + 1, seg + 1));
            if ring > 0 {
                out.push(Triangle::new(a, b, e));
            }
            if ring + 1 < SPHERE_RINGS {
                out.push(Triangle::new(a, e, d));
            }
        }
    }
}

/// Closed unit box (walls, floor, ceiling) holding `complexity` random
/// axis-aligned boxes and tessellated spheres. Object `i` depends only on
/// `(seed, i)`, so raising the complexity only adds objects. The emitter is
/// the square at the ceiling centre described by [`Light::for_bounds`].
pub fn gen_procedural_scene(seed: u64, complexity: usize) -> Result<Scene> {
    if complexity == 0 {
        return Err(Error::Config("procedural complexity must be at least 1".into()));
    }
    let mut tris = Vec::new();
    let v = |x, y, z| Vec3::new(x, y, z);
    // Room, wound to face inwards.
    quad(&mut tris, v(0., 0., 0.), v(0., 0., 1.), v(1., 0., 1.), v(1., 0., 0.));
    quad(&mut tris, v(0., 1., 0.), v(1., 1., 0.), v(1., 1., 1.), v(0., 1., 1.));
    quad(&mut tris, v(0., 0., 1.), v(0., 1., 1.), v(1., 1., 1.), v(1., 0., 1.));
    quad(&mut tris, v(0., 0., 0.), v(1., 0., 0.), v(1., 1., 0.), v(0., 1., 0.));
    quad(&mut tris, v(0., 0., 0.), v(0., 1., 0.), v(0., 1., 1.), v(0., 0., 1.));
    quad(&mut tris, v(1., 0., 0.), v(1., 0., 1.), v(1., 1., 1.), v(1., 1., 0.));

    let base = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..complexity {
        let mut rng = base.clone();
        rng.set_stream(i as u64);
        let size = rng.random_range(0.02f32..0.06);
        let c = Vec3::new(
            rng.random_range(0.1f32..0.9),
            rng.random_range(0.08f32..0.9),
            rng.random_range(0.3f32..0.92),
        );
        if rng.random::<bool>() {
            let h = Vec3::new(
                size * rng.random_range(0.5f32..1.0),
                size * rng.random_range(0.5f32..1.0),
                size * rng.random_range(0.5f32..1.0),
            );
            push_box(&mut tris, c - h, c + h);
        } else {
            push_sphere(&mut tris, c, size);
        }
    }
    Scene::new(format!("procedural:{complexity}"), tris)
}

/// Pinhole camera inside the box near `z = min`, looking down `+z`.
#[derive(Clone, Copy, Debug)]
pub struct Camera {
    pub eye: Vec3,
    tan_half: f32,
    aspect: f32,
}

impl Camera {
    pub const VERTICAL_FOV_DEG: f32 = 55.0;

    pub fn for_bounds(bounds: &Aabb, width: usize, height: usize) -> Self {
        let c = bounds.center();
        let d = bounds.diagonal();
        Self {
            eye: Vec3::new(c.x, c.y, bounds.min.z + 0.05 * d.z),
            tan_half: (Self::VERTICAL_FOV_DEG.to_radians() * 0.5).tan(),
            aspect: width as f32 / height as f32,
        }
    }

    /// Unit direction through film coordinates in `[0, 1)^2`, `y` down.
    pub fn direction(&self, fx: f32, fy: f32) -> Vec3 {
        let x = (2.0 * fx - 1.0) * self.tan_half * self.aspect;
        let y = (1.0 - 2.0 * fy) * self.tan_half;
        Vec3::new(x, y, 1.0).normalized()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn procedural_is_deterministic_and_grows() {
        let a = gen_procedural_scene(5, 20).unwrap();
        assert_eq!(a, gen_procedural_scene(5, 20).unwrap());
        assert_ne!(a.triangles, gen_procedural_scene(6, 20).unwrap().triangles);
        let mut prev = gen_procedural_scene(5, 1).unwrap().triangles;
        for n in 2..30 {
            let s = gen_procedural_scene(5, n).unwrap();
            assert!(s.triangles.len() > prev.len());
            assert_eq!(s.triangles[..prev.len()], prev[..]);
            prev = s.triangles;
        }
        assert!(matches!(gen_procedural_scene(5, 0), Err(Error::Config(_))));
    }

    #[test]
    fn procedural_fits_unit_box() {
        let s = gen_procedural_scene(1, 200).unwrap();
        assert_eq!(s.bounds, Aabb::new(Vec3::ZERO, Vec3::ONE).unwrap());
    }

    #[test]
    fn light_geometry() {
        let b = Aabb::new(Vec3::ZERO, Vec3::splat(2.0)).unwrap();
        let l = Light::for_bounds(&b, 0.05, 1.0);
        assert_eq!(l.center, Vec3::new(1.0, 2.0, 1.0));
        assert!((l.area() - 0.01).abs() < 1e-7);
        assert!(l.contains(l.sample(0.3, 0.9), LIGHT_NORMAL, 2.0));
        assert!(!l.contains(l.sample(0.3, 0.9), -LIGHT_NORMAL, 2.0));
        assert!(!l.contains(Vec3::new(0.5, 2.0, 1.0), LIGHT_NORMAL, 2.0));
    }
}
