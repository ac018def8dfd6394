//! Termination-point estimation for the Two Point key.
//!
//! Three estimators: a fixed fraction of the scene extent, a running mean of
//! traced lengths cached in a 2^20-cell spatial hash, and the real traced
//! termination point (the reference).

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geom::{Aabb, KeyBounds, Ray, Vec3};
use crate::keys::{KeyBits, AILA_COMPACT};
use crate::tracer::{closest_hit, Bvh};

/// Bits of the hash-table index.
pub const TABLE_BITS: u32 = 20;
pub const TABLE_CELLS: usize = 1 << TABLE_BITS;
/// Length of the dummy ray seeded into every cell, as a fraction of the
/// largest scene extent.
pub const DUMMY_RATIO: f32 = 0.25;
pub const DEFAULT_FIXED_RATIO: f32 = 0.25;

const SNAPSHOT_MAGIC: &[u8; 4] = b"LHT1";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimatorConfig {
    fixed_ratio: f32,
    scene_extent: f32,
}

impl EstimatorConfig {
    pub fn new(fixed_ratio: f32, scene_extent: f32) -> Result<Self> {
        if !(fixed_ratio > 0.0 && fixed_ratio <= 1.0) {
            return Err(Error::InvalidRatio(fixed_ratio));
        }
        if !(scene_extent > 0.0 && scene_extent.is_finite()) {
            return Err(Error::DegenerateBounds);
        }
        Ok(Self {
            fixed_ratio,
            scene_extent,
        })
    }

    /// Default ratio over the extent of `bounds`.
    pub fn for_bounds(bounds: &KeyBounds) -> Self {
        Self {
            fixed_ratio: DEFAULT_FIXED_RATIO,
            scene_extent: bounds.extent(),
        }
    }

    pub fn fixed_ratio(&self) -> f32 {
        self.fixed_ratio
    }

    pub fn scene_extent(&self) -> f32 {
        self.scene_extent
    }

    #[inline]
    pub fn fixed_length(&self) -> f32 {
        self.fixed_ratio * self.scene_extent
    }
}

/// `origin + direction * fixed_ratio * extent`.
#[inline]
pub fn estimate_fixed(ray: &Ray, cfg: &EstimatorConfig) -> Vec3 {
    ray.at(cfg.fixed_length())
}

/// Hash-table cell of a ray: the top 20 bits of its 32-bit Aila Compact key.
#[inline]
pub fn cell_index(ray: &Ray, bounds: &KeyBounds) -> u32 {
    let o = bounds.normalize(ray.origin);
    let d = crate::encoders::cube_unit(ray.direction);
    let key = AILA_COMPACT.encode(&[o.x, o.y, o.z, d.x, d.y, d.z], KeyBits::B32);
    (key >> (32 - TABLE_BITS)) as u32
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LengthCell {
    pub sum_length: f64,
    pub count: u32,
}

impl LengthCell {
    #[inline]
    pub fn mean(&self) -> f32 {
        (self.sum_length / self.count as f64) as f32
    }
}

/// Per-worker batch of `(cell, length)` samples, merged into the table in a
/// fixed order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AccumulationShard {
    entries: Vec<(u32, f32)>,
}

impl AccumulationShard {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Spatial hash of running ray-length means.
#[derive(Clone, Debug, PartialEq)]
pub struct LengthHashTable {
    cells: Vec<LengthCell>,
    bounds: KeyBounds,
}

impl LengthHashTable {
    /// Every cell starts with one dummy ray of length `0.25 * extent`.
    pub fn new(bounds: KeyBounds) -> Self {
        let dummy = DUMMY_RATIO * bounds.extent();
        Self {
            cells: vec![
                LengthCell {
                    sum_length: dummy as f64,
                    count: 1,
                };
                TABLE_CELLS
            ],
            bounds,
        }
    }

    pub fn bounds(&self) -> &KeyBounds {
        &self.bounds
    }

    pub fn cells(&self) -> &[LengthCell] {
        &self.cells
    }

    pub fn cell(&self, index: u32) -> &LengthCell {
        &self.cells[index as usize]
    }

    #[inline]
    pub fn length(&self, ray: &Ray) -> f32 {
        self.cells[cell_index(ray, &self.bounds) as usize].mean()
    }

    /// `origin + direction * mean length of the ray's cell`.
    #[inline]
    pub fn estimate_adaptive(&self, ray: &Ray) -> Vec3 {
        ray.at(self.length(ray))
    }

    /// Collects the samples of `rays` without touching the table. `None`
    /// and non-finite distances are skipped.
    pub fn record_shard(&self, rays: &[Ray], hit_distances: &[Option<f32>]) -> Result<AccumulationShard> {
        if rays.len() != hit_distances.len() {
            return Err(Error::LengthMismatch {
                left: rays.len(),
                right: hit_distances.len(),
            });
        }
        let entries = rays
            .iter()
            .zip(hit_distances)
            .filter_map(|(r, d)| match d {
                Some(t) if t.is_finite() && *t >= 0.0 => Some((cell_index(r, &self.bounds), *t)),
                _ => None,
            })
            .collect();
        Ok(AccumulationShard { entries })
    }

    pub fn merge(&mut self, shard: &AccumulationShard) {
        for &(cell, t) in &shard.entries {
            let c = &mut self.cells[cell as usize];
            c.sum_length += t as f64;
            c.count = c.count.saturating_add(1);
        }
    }

    /// Adds every hit distance to its ray's cell; misses are skipped.
    pub fn accumulate(&mut self, rays: &[Ray], hit_distances: &[Option<f32>]) -> Result<()> {
        let shard = self.record_shard(rays, hit_distances)?;
        self.merge(&shard);
        Ok(())
    }

    /// Little-endian snapshot: `"LHT1"`, cell count, then `f32` sum and
    /// `u32` count per cell.
    pub fn to_snapshot(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + self.cells.len() * 8);
        out.extend_from_slice(SNAPSHOT_MAGIC);
        out.extend_from_slice(&(self.cells.len() as u32).to_le_bytes());
        for c in &self.cells {
            out.extend_from_slice(&(c.sum_length as f32).to_le_bytes());
            out.extend_from_slice(&c.count.to_le_bytes());
        }
        out
    }

    pub fn from_snapshot(bytes: &[u8], bounds: KeyBounds) -> Result<Self> {
        if bytes.len() < 8 || &bytes[..4] != SNAPSHOT_MAGIC {
            return Err(Error::Snapshot("bad magic"));
        }
        let n = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        if n != TABLE_CELLS {
            return Err(Error::Snapshot("cell count is not 2^20"));
        }
        let body = &bytes[8..];
        if body.len() != n * 8 {
            return Err(Error::Snapshot("truncated cell data"));
        }
        let mut cells = Vec::with_capacity(n);
        for chunk in body.chunks_exact(8) {
            let sum = f32::from_le_bytes(chunk[..4].try_into().unwrap());
            let count = u32::from_le_bytes(chunk[4..].try_into().unwrap());
            if count == 0 || !(sum >= 0.0) {
                return Err(Error::Snapshot("cell with zero count or negative sum"));
            }
            cells.push(LengthCell {
                sum_length: sum as f64,
                count,
            });
        }
        Ok(Self { cells, bounds })
    }
}

/// Where `ray` actually ends: its closest hit, or else where it leaves
/// `scene` (capped at `tmax`).
pub fn terminate_real(ray: &Ray, bvh: &Bvh, scene: &Aabb) -> Vec3 {
    let (hit, _) = closest_hit(bvh, ray);
    if hit.hit {
        return ray.at(hit.t);
    }
    miss_termination(ray, scene)
}

/// Termination of a ray that hit nothing: the scene-box exit point, or
/// `tmax` if that comes first. Rays that never enter the box end at their
/// origin.
pub fn miss_termination(ray: &Ray, scene: &Aabb) -> Vec3 {
    match scene.ray_interval(ray.origin, ray.direction) {
        Some((_, t_exit)) => ray.at(t_exit.min(ray.tmax)),
        None => ray.origin,
    }
}
