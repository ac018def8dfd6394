//! Vectors, boxes, rays and the normalize/quantize steps shared by every key
//! method.

use core::ops::{Add, AddAssign, Div, Index, Mul, Neg, Sub};

use crate::error::{Error, Result};

/// Largest per-component quantization width. 24 bits is the f32 mantissa
/// limit; the widest layout (64-bit Origin key) needs 22.
pub const MAX_QUANT_BITS: u32 = 24;

/// Largest f32 strictly below one.
pub const ONE_MINUS_ULP: f32 = 1.0 - f32::EPSILON / 2.0;

/// Tolerance on `|d| - 1` for ray directions.
pub const UNIT_TOLERANCE: f32 = 1e-6;

/// Relative padding applied to the scene box before quantization.
pub const BOUNDS_PADDING: f32 = 1e-4;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Vec3 {
    pub x: f32,
    pub y: f32,
    pub z: f32,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);
    pub const ONE: Vec3 = Vec3::new(1.0, 1.0, 1.0);

    #[inline]
    pub const fn new(x: f32, y: f32, z: f32) -> Self {
        Self { x, y, z }
    }

    #[inline]
    pub const fn splat(v: f32) -> Self {
        Self::new(v, v, v)
    }

    #[inline]
    pub fn dot(self, o: Vec3) -> f32 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    #[inline]
    pub fn length(self) -> f32 {
        libm::sqrtf(self.dot(self))
    }

    /// Unit vector in the same direction; zero stays zero.
    #[inline]
    pub fn normalized(self) -> Vec3 {
        let len = self.length();
        if len > 0.0 {
            self / len
        } else {
            self
        }
    }

    #[inline]
    pub fn min(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x.min(o.x), self.y.min(o.y), self.z.min(o.z))
    }

    #[inline]
    pub fn max(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x.max(o.x), self.y.max(o.y), self.z.max(o.z))
    }

    #[inline]
    pub fn abs(self) -> Vec3 {
        Vec3::new(libm::fabsf(self.x), libm::fabsf(self.y), libm::fabsf(self.z))
    }

    #[inline]
    pub fn mul_elem(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x * o.x, self.y * o.y, self.z * o.z)
    }

    #[inline]
    pub fn max_component(self) -> f32 {
        self.x.max(self.y).max(self.z)
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    #[inline]
    pub fn to_array(self) -> [f32; 3] {
        [self.x, self.y, self.z]
    }
}

impl Index<usize> for Vec3 {
    type Output = f32;
    #[inline]
    fn index(&self, i: usize) -> &f32 {
        match i {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("Vec3 index {i} out of range"),
        }
    }
}

impl From<[f32; 3]> for Vec3 {
    fn from(a: [f32; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    #[inline]
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    #[inline]
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    #[inline]
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f32> for Vec3 {
    type Output = Vec3;
    #[inline]
    fn mul(self, s: f32) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Div<f32> for Vec3 {
    type Output = Vec3;
    #[inline]
    fn div(self, s: f32) -> Vec3 {
        Vec3::new(self.x / s, self.y / s, self.z / s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    #[inline]
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Result<Self> {
        if !(min.x <= max.x && min.y <= max.y && min.z <= max.z) {
            return Err(Error::InvalidBounds);
        }
        Ok(Self { min, max })
    }

    /// An inverted box that any `grow` call replaces.
    pub const fn empty() -> Self {
        Self {
            min: Vec3::splat(f32::INFINITY),
            max: Vec3::splat(f32::NEG_INFINITY),
        }
    }

    pub fn from_points<I: IntoIterator<Item = Vec3>>(points: I) -> Self {
        let mut b = Self::empty();
        for p in points {
            b.grow(p);
        }
        b
    }

    #[inline]
    pub fn grow(&mut self, p: Vec3) {
        self.min = self.min.min(p);
        self.max = self.max.max(p);
    }

    #[inline]
    pub fn union(&self, o: &Aabb) -> Aabb {
        Aabb {
            min: self.min.min(o.min),
            max: self.max.max(o.max),
        }
    }

    pub fn is_empty(&self) -> bool {
        !(self.min.x <= self.max.x && self.min.y <= self.max.y && self.min.z <= self.max.z)
    }

    #[inline]
    pub fn diagonal(&self) -> Vec3 {
        self.max - self.min
    }

    #[inline]
    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn surface_area(&self) -> f32 {
        if self.is_empty() {
            return 0.0;
        }
        let d = self.diagonal();
        2.0 * (d.x * d.y + d.y * d.z + d.z * d.x)
    }

    pub fn largest_axis(&self) -> usize {
        let d = self.diagonal();
        if d.x >= d.y && d.x >= d.z {
            0
        } else if d.y >= d.z {
            1
        } else {
            2
        }
    }

    pub fn contains(&self, p: Vec3) -> bool {
        p.x >= self.min.x
            && p.y >= self.min.y
            && p.z >= self.min.z
            && p.x <= self.max.x
            && p.y <= self.max.y
            && p.z <= self.max.z
    }

    pub fn contains_box(&self, o: &Aabb) -> bool {
        self.contains(o.min) && self.contains(o.max)
    }

    /// Grows every side by `ratio` times the largest extent.
    pub fn expanded(&self, ratio: f32) -> Aabb {
        let pad = Vec3::splat(self.diagonal().max_component() * ratio);
        Aabb {
            min: self.min - pad,
            max: self.max + pad,
        }
    }

    /// Parametric interval `[t_near, t_far]` where the ray line overlaps the
    /// box, if any part of it lies at `t >= 0`.
    pub fn ray_interval(&self, origin: Vec3, direction: Vec3) -> Option<(f32, f32)> {
        let mut t0 = 0.0f32;
        let mut t1 = f32::INFINITY;
        for axis in 0..3 {
            let o = origin[axis];
            let d = direction[axis];
            if d == 0.0 {
                if o < self.min[axis] || o > self.max[axis] {
                    return None;
                }
                continue;
            }
            let inv = 1.0 / d;
            let mut near = (self.min[axis] - o) * inv;
            let mut far = (self.max[axis] - o) * inv;
            if near > far {
                core::mem::swap(&mut near, &mut far);
            }
            t0 = t0.max(near);
            t1 = t1.min(far);
            if t0 > t1 {
                return None;
            }
        }
        Some((t0, t1))
    }
}

/// Largest side length of the box.
pub fn scene_extent(aabb: &Aabb) -> Result<f32> {
    if aabb.is_empty() {
        return Err(Error::InvalidBounds);
    }
    let e = aabb.diagonal().max_component();
    if e > 0.0 && e.is_finite() {
        Ok(e)
    } else {
        Err(Error::DegenerateBounds)
    }
}

/// Maps `p` into `[0, 1)^3` relative to `aabb`, clamping points outside.
pub fn normalize_point(p: Vec3, aabb: &Aabb) -> Vec3 {
    let d = aabb.diagonal();
    let n = |v: f32, lo: f32, ext: f32| -> f32 {
        let u = if ext > 0.0 { (v - lo) / ext } else { 0.0 };
        // f32::max maps NaN to the other operand
        u.max(0.0).min(ONE_MINUS_ULP)
    };
    Vec3::new(
        n(p.x, aabb.min.x, d.x),
        n(p.y, aabb.min.y, d.y),
        n(p.z, aabb.min.z, d.z),
    )
}

/// `floor(u * 2^bits)` clamped to the representable cell range.
pub fn quantize(u: f32, bits: u32) -> Result<u32> {
    if bits == 0 || bits > MAX_QUANT_BITS {
        return Err(Error::QuantBits(bits));
    }
    Ok(quantize_unchecked(u, bits))
}

#[inline]
pub(crate) fn quantize_unchecked(u: f32, bits: u32) -> u32 {
    let cells = (1u32 << bits) as f32;
    let max = (1u32 << bits) - 1;
    let q = libm::floorf(u * cells);
    if q >= max as f32 {
        max
    } else if q > 0.0 {
        q as u32
    } else {
        0
    }
}

/// Scene box prepared for key computation: padded so boundary geometry never
/// sits exactly on the clamp edge.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KeyBounds {
    scene: Aabb,
    padded: Aabb,
    extent: f32,
}

impl KeyBounds {
    pub fn new(scene: Aabb) -> Result<Self> {
        let extent = scene_extent(&scene)?;
        Ok(Self {
            scene,
            padded: scene.expanded(BOUNDS_PADDING),
            extent,
        })
    }

    /// The unpadded scene box.
    pub fn scene(&self) -> &Aabb {
        &self.scene
    }

    pub fn padded(&self) -> &Aabb {
        &self.padded
    }

    /// Largest extent of the unpadded scene box.
    pub fn extent(&self) -> f32 {
        self.extent
    }

    #[inline]
    pub fn normalize(&self, p: Vec3) -> Vec3 {
        normalize_point(p, &self.padded)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u32)]
pub enum RayKind {
    Primary = 0,
    Secondary = 1,
    Shadow = 2,
}

impl RayKind {
    pub fn from_u32(v: u32) -> Option<Self> {
        match v {
            0 => Some(RayKind::Primary),
            1 => Some(RayKind::Secondary),
            2 => Some(RayKind::Shadow),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RayKind::Primary => "primary",
            RayKind::Secondary => "secondary",
            RayKind::Shadow => "shadow",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    /// Unit length.
    pub direction: Vec3,
    /// Positive; `f32::INFINITY` for unbounded rays.
    pub tmax: f32,
    pub kind: RayKind,
}

impl Ray {
    pub fn new(origin: Vec3, direction: Vec3, tmax: f32, kind: RayKind) -> Result<Self> {
        let ray = Ray {
            origin,
            direction,
            tmax,
            kind,
        };
        ray.validate()?;
        Ok(ray)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.origin.is_finite() {
            return Err(Error::NonFiniteOrigin);
        }
        let len = self.direction.length();
        if !len.is_finite() || len == 0.0 {
            return Err(Error::ZeroDirection);
        }
        if libm::fabsf(len - 1.0) > UNIT_TOLERANCE {
            return Err(Error::NonUnitDirection(len));
        }
        if self.tmax.is_nan() || self.tmax <= 0.0 {
            return Err(Error::InvalidTmax(self.tmax));
        }
        Ok(())
    }

    #[inline]
    pub fn at(&self, t: f32) -> Vec3 {
        self.origin + self.direction * t
    }
}
