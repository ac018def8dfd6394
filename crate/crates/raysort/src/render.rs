//! Wavefront path tracer: every bounce is one dense batch of rays traced
//! through a pluggable [`BatchTracer`], followed by a shading pass that
//! emits the next secondary batch and two shadow rays per hit.

use std::f32::consts::PI;

use rayon::prelude::*;
use raysort_core::sort::SortPlan;
use raysort_core::tracer::{trace_ray, Bvh, HitRecord, TraceMode};
use raysort_core::{KeyBits, KeyMethod, Ray, RayKind, Vec3};

use crate::error::{Error, Result};
use crate::rng::{Purpose, SampleStreams};
use crate::scene::{Camera, Light, Scene, DEFAULT_LIGHT_RATIO, LIGHT_NORMAL};

pub const ALBEDO: f32 = 0.7;
pub const SHADOW_RAYS_PER_HIT: usize = 2;
/// Emitted power of the light relative to the squared scene extent.
pub const LIGHT_POWER: f32 = 0.25;

#[derive(Clone, Debug, PartialEq)]
pub struct RenderConfig {
    pub width: usize,
    pub height: usize,
    pub samples_per_pixel: usize,
    /// Shading steps after the primary hit; 0 traces only camera rays.
    pub max_bounces: u32,
    pub light_ratio: f32,
    pub seed: u64,
    pub warp_size: usize,
    pub methods: Vec<KeyMethod>,
    pub plan: SortPlan,
    /// Keep every traced batch in [`RenderOutput::batches`].
    pub keep_batches: bool,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            width: 256,
            height: 256,
            samples_per_pixel: 8,
            max_bounces: 8,
            light_ratio: DEFAULT_LIGHT_RATIO,
            seed: 0,
            warp_size: 64,
            methods: KeyMethod::ALL.to_vec(),
            plan: SortPlan::global(KeyBits::B32),
            keep_batches: false,
        }
    }
}

impl RenderConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.width == 0 || self.height == 0 {
            return bad("image size must be positive");
        }
        if self.samples_per_pixel == 0 {
            return bad("samples per pixel must be positive");
        }
        if !(self.light_ratio > 0.0 && self.light_ratio <= 1.0) {
            return bad("light ratio must be in (0, 1]");
        }
        if self.methods.is_empty() {
            return bad("method list is empty");
        }
        if self.width * self.height * self.samples_per_pixel * SHADOW_RAYS_PER_HIT > u32::MAX as usize {
            return bad("too many paths");
        }
        raysort_core::tracer::check_warp_size(self.warp_size)?;
        Ok(())
    }

    pub fn paths(&self) -> usize {
        self.width * self.height * self.samples_per_pixel
    }
}

/// One wavefront. `paths[i]` is `sample * pixels + pixel` of ray `i`: the
/// per-sample wavefronts laid end to end.
#[derive(Clone, Debug, PartialEq)]
pub struct BounceBatch {
    pub bounce: u32,
    pub kind: RayKind,
    pub rays: Vec<Ray>,
    pub paths: Vec<u32>,
    /// Filled after tracing: the path continues (closest-hit batches) or the
    /// light was visible (shadow batches).
    pub live: Vec<bool>,
}

impl BounceBatch {
    fn new(bounce: u32, kind: RayKind, rays: Vec<Ray>, paths: Vec<u32>) -> Self {
        let live = vec![false; rays.len()];
        Self {
            bounce,
            kind,
            rays,
            paths,
            live,
        }
    }

    pub fn len(&self) -> usize {
        self.rays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rays.is_empty()
    }
}

/// Hook that traces a batch. Results must be in batch order.
pub trait BatchTracer {
    fn trace(&mut self, batch: &BounceBatch, mode: TraceMode) -> Result<Vec<HitRecord>>;
}

/// Plain parallel tracing without instrumentation.
pub struct DirectTracer<'a> {
    pub bvh: &'a Bvh,
}

impl BatchTracer for DirectTracer<'_> {
    fn trace(&mut self, batch: &BounceBatch, mode: TraceMode) -> Result<Vec<HitRecord>> {
        Ok(batch.rays.par_iter().map(|r| trace_ray(self.bvh, r, mode).0).collect())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BatchSummary {
    pub bounce: u32,
    pub kind: RayKind,
    pub rays: usize,
    /// Rays that hit geometry (closest-hit batches) or were occluded
    /// (shadow batches).
    pub hits: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RenderOutput {
    pub width: usize,
    pub height: usize,
    /// Mean radiance per pixel, row-major.
    pub image: Vec<f64>,
    pub summaries: Vec<BatchSummary>,
    pub batches: Vec<BounceBatch>,
}

#[derive(Default)]
struct Shade {
    emitted: f32,
    shadows: Vec<(Ray, f32)>,
    next: Option<Ray>,
}

fn onb(n: Vec3) -> (Vec3, Vec3) {
    let a = if n.x.abs() > 0.9 { Vec3::new(0.0, 1.0, 0.0) } else { Vec3::new(1.0, 0.0, 0.0) };
    let t = n.cross(a).normalized();
    (t, n.cross(t))
}

fn cosine_sample(n: Vec3, u: f32, v: f32) -> Vec3 {
    let r = u.sqrt();
    let phi = 2.0 * PI * v;
    let (t, b) = onb(n);
    (t * (r * phi.cos()) + b * (r * phi.sin()) + n * (1.0 - u).max(0.0).sqrt()).normalized()
}

struct Shader<'a> {
    scene: &'a Scene,
    light: Light,
    extent: f32,
    streams: &'a SampleStreams,
    max_bounces: u32,
}

impl Shader<'_> {
    fn shade(&self, ray: &Ray, hit: &HitRecord, path: u32, bounce: u32) -> Result<Shade> {
        let mut out = Shade::default();
        if !hit.hit {
            return Ok(out);
        }
        let p = ray.at(hit.t);
        let mut n = self.scene.triangles[hit.triangle as usize].normal();
        if n.dot(ray.direction) > 0.0 {
            n = -n;
        }
        if bounce == 0 && self.light.contains(p, n, self.extent) {
            out.emitted = self.light.radiance;
        }
        if bounce >= self.max_bounces {
            return Ok(out);
        }
        let origin = p + n * (1e-4 * self.extent);
        let mut light_rng = self.streams.stream(path as u64, bounce, Purpose::Light);
        for _ in 0..SHADOW_RAYS_PER_HIT {
            let (u, v) = light_rng.pair();
            let to = self.light.sample(u, v) - origin;
            let dist = to.length();
            let dir = to / dist;
            let cos_x = n.dot(dir).max(0.0);
            let cos_y = (-dir.dot(LIGHT_NORMAL)).max(0.0);
            let weight = self.light.radiance * (ALBEDO / PI) * cos_x * cos_y / (dist * dist) * self.light.area()
                / SHADOW_RAYS_PER_HIT as f32;
            let r = Ray::new(origin, dir, dist * (1.0 - 1e-3), RayKind::Shadow)?;
            out.shadows.push((r, weight));
        }
        // Albedo as survival probability keeps path throughput at 1.
        if self.streams.stream(path as u64, bounce, Purpose::Roulette).next_f32() < ALBEDO {
            let (u, v) = self.streams.stream(path as u64, bounce, Purpose::Scatter).pair();
            let d = cosine_sample(n, u, v);
            out.next = Some(Ray::new(origin, d, f32::INFINITY, RayKind::Secondary)?);
        }
        Ok(out)
    }
}

fn primary_batch(scene: &Scene, cfg: &RenderConfig, streams: &SampleStreams) -> Result<BounceBatch> {
    let cam = Camera::for_bounds(&scene.bounds, cfg.width, cfg.height);
    let pixels = cfg.width * cfg.height;
    let rays = (0..cfg.paths() as u32)
        .into_par_iter()
        .map(|path| {
            let pixel = path as usize % pixels;
            let (px, py) = (pixel % cfg.width, pixel / cfg.width);
            let (jx, jy) = streams.stream(path as u64, 0, Purpose::Camera).pair();
            let fx = (px as f32 + jx) / cfg.width as f32;
            let fy = (py as f32 + jy) / cfg.height as f32;
            Ray::new(cam.eye, cam.direction(fx, fy), f32::INFINITY, RayKind::Primary)
        })
        .collect::<raysort_core::Result<Vec<_>>>()?;
    Ok(BounceBatch::new(0, RayKind::Primary, rays, (0..cfg.paths() as u32).collect()))
}

/// Renders with the plain parallel tracer.
pub fn path_trace_wavefront(scene: &Scene, bvh: &Bvh, cfg: &RenderConfig) -> Result<RenderOutput> {
    path_trace_with(scene, cfg, &mut DirectTracer { bvh })
}

/// Renders `scene`, handing every batch to `tracer`.
pub fn path_trace_with(scene: &Scene, cfg: &RenderConfig, tracer: &mut dyn BatchTracer) -> Result<RenderOutput> {
    cfg.validate()?;
    let streams = SampleStreams::new(cfg.seed);
    let extent = raysort_core::geom::scene_extent(&scene.bounds)?;
    let shader = Shader {
        scene,
        light: Light::for_bounds(&scene.bounds, cfg.light_ratio, LIGHT_POWER * extent * extent),
        extent,
        streams: &streams,
        max_bounces: cfg.max_bounces,
    };
    let mut radiance = vec![0.0f64; cfg.paths()];
    let mut summaries = Vec::new();
    let mut kept = Vec::new();

    let mut batch = primary_batch(scene, cfg, &streams)?;
    while !batch.is_empty() {
        let bounce = batch.bounce;
        let hits = tracer.trace(&batch, TraceMode::Closest)?;
        check_len(&hits, &batch)?;
        let hit_count = hits.iter().filter(|h| h.hit).count();
        let shades = batch
            .rays
            .par_iter()
            .zip(hits.par_iter())
            .zip(batch.paths.par_iter())
            .map(|((r, h), &p)| shader.shade(r, h, p, bounce))
            .collect::<Result<Vec<_>>>()?;

        let mut shadow_rays = Vec::new();
        let mut shadow_paths = Vec::new();
        let mut weights = Vec::new();
        let mut next_rays = Vec::new();
        let mut next_paths = Vec::new();
        for (i, s) in shades.into_iter().enumerate() {
            let path = batch.paths[i];
            radiance[path as usize] += s.emitted as f64;
            for (r, w) in s.shadows {
                shadow_rays.push(r);
                shadow_paths.push(path);
                weights.push(w);
            }
            if let Some(r) = s.next {
                batch.live[i] = true;
                next_rays.push(r);
                next_paths.push(path);
            }
        }
        summaries.push(BatchSummary {
            bounce,
            kind: batch.kind,
            rays: batch.len(),
            hits: hit_count,
        });

        if !shadow_rays.is_empty() {
            let mut shadow = BounceBatch::new(bounce, RayKind::Shadow, shadow_rays, shadow_paths);
            let hits = tracer.trace(&shadow, TraceMode::Any)?;
            check_len(&hits, &shadow)?;
            for (i, h) in hits.iter().enumerate() {
                if !h.hit {
                    shadow.live[i] = true;
                    radiance[shadow.paths[i] as usize] += weights[i] as f64;
                }
            }
            summaries.push(BatchSummary {
                bounce,
                kind: RayKind::Shadow,
                rays: shadow.len(),
                hits: hits.iter().filter(|h| h.hit).count(),
            });
            if cfg.keep_batches {
                kept.push(std::mem::replace(&mut batch, BounceBatch::new(0, RayKind::Primary, vec![], vec![])));
                kept.push(shadow);
            }
        } else if cfg.keep_batches {
            kept.push(std::mem::replace(&mut batch, BounceBatch::new(0, RayKind::Primary, vec![], vec![])));
        }
        batch = BounceBatch::new(bounce + 1, RayKind::Secondary, next_rays, next_paths);
    }

    let spp = cfg.samples_per_pixel;
    let pixels = cfg.width * cfg.height;
    let image = (0..pixels)
        .map(|p| (0..spp).map(|s| radiance[s * pixels + p]).sum::<f64>() / spp as f64)
        .collect();
    Ok(RenderOutput {
        width: cfg.width,
        height: cfg.height,
        image,
        summaries,
        batches: kept,
    })
}

fn check_len(hits: &[HitRecord], batch: &BounceBatch) -> Result<()> {
    if hits.len() != batch.len() {
        return Err(raysort_core::Error::LengthMismatch {
            left: batch.len(),
            right: hits.len(),
        }
        .into());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::gen_procedural_scene;

    fn small(max_bounces: u32) -> RenderConfig {
        RenderConfig {
            width: 16,
            height: 12,
            samples_per_pixel: 2,
            max_bounces,
            seed: 3,
            keep_batches: true,
            ..Default::default()
        }
    }

    #[test]
    fn zero_bounces_traces_only_primary() {
        let s = gen_procedural_scene(1, 10).unwrap();
        let bvh = s.build_bvh().unwrap();
        let out = path_trace_wavefront(&s, &bvh, &small(0)).unwrap();
        assert_eq!(out.summaries.len(), 1);
        assert_eq!(out.summaries[0].kind, RayKind::Primary);
        assert_eq!(out.summaries[0].rays, 16 * 12 * 2);
    }

    #[test]
    fn batch_shapes() {
        let s = gen_procedural_scene(2, 30).unwrap();
        let bvh = s.build_bvh().unwrap();
        let out = path_trace_wavefront(&s, &bvh, &small(4)).unwrap();
        for b in &out.batches {
            for r in &b.rays {
                assert!((r.direction.length() - 1.0).abs() < 1e-6);
                assert!(r.tmax > 0.0);
            }
            if b.kind == RayKind::Shadow {
                assert!(b.rays.iter().all(|r| r.tmax.is_finite()));
            }
        }
        let mut last = usize::MAX;
        let mut hits_prev = 0;
        for s in &out.summaries {
            if s.kind == RayKind::Shadow {
                assert_eq!(s.rays, 2 * hits_prev);
            } else {
                assert!(s.rays <= last);
                last = s.rays;
                hits_prev = s.hits;
            }
        }
        assert_eq!(out.summaries.len(), out.batches.len());
        assert!(out.batches.iter().any(|b| b.bounce == 4));
        assert!(out.image.iter().all(|v| v.is_finite() && *v >= 0.0));
        assert!(out.image.iter().any(|&v| v > 0.0));
    }

    #[test]
    fn deterministic() {
        let s = gen_procedural_scene(4, 15).unwrap();
        let bvh = s.build_bvh().unwrap();
        let a = path_trace_wavefront(&s, &bvh, &small(3)).unwrap();
        let b = path_trace_wavefront(&s, &bvh, &small(3)).unwrap();
        assert_eq!(a.image, b.image);
        let mut other = small(3);
        other.seed = 4;
        assert_ne!(a.image, path_trace_wavefront(&s, &bvh, &other).unwrap().image);
    }

    #[test]
    fn config_validation() {
        let mut c = small(1);
        c.methods.clear();
        assert!(c.validate().is_err());
        let mut c = small(1);
        c.warp_size = 48;
        assert!(c.validate().is_err());
        let mut c = small(1);
        c.width = 0;
        assert!(c.validate().is_err());
    }
}
