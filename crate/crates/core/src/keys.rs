//! Sorting-key layouts.
//!
//! Every 32-bit layout is a fixed schedule of 32 slots over up to six
//! quantized components: origin `x, y, z` in slots 0..3 and a second triple
//! in 3..6 (cube direction, octahedral `u, v`, or termination point).
//!
//! 64-bit keys quantize every component at twice its 32-bit width and run the
//! same schedule twice: the first pass emits the high halves, the second the
//! low halves. The upper 32 bits of a 64-bit key are therefore exactly the
//! 32-bit key, and every group keeps its position in the pattern.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::encoders::{cube_unit, octahedron_encode_unchecked, Slot};
use crate::error::{Error, Result};
use crate::estimator::{estimate_fixed, terminate_real, EstimatorConfig, LengthHashTable};
use crate::geom::{quantize_unchecked, KeyBounds, Ray, Vec3};
use crate::tracer::Bvh;

/// A sorting key right-aligned in a `u64`; 32-bit keys leave the top half zero.
pub type SortKey = u64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum KeyMethod {
    Unsorted,
    Origin,
    Reis,
    Costa,
    Aila,
    AilaCompact,
    Octahedron,
    TwoPointFixed,
    TwoPointAdaptive,
    TwoPointReal,
}

impl KeyMethod {
    pub const ALL: [KeyMethod; 10] = [
        KeyMethod::Unsorted,
        KeyMethod::Origin,
        KeyMethod::Reis,
        KeyMethod::Costa,
        KeyMethod::Aila,
        KeyMethod::AilaCompact,
        KeyMethod::Octahedron,
        KeyMethod::TwoPointFixed,
        KeyMethod::TwoPointAdaptive,
        KeyMethod::TwoPointReal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            KeyMethod::Unsorted => "unsorted",
            KeyMethod::Origin => "origin",
            KeyMethod::Reis => "reis",
            KeyMethod::Costa => "costa",
            KeyMethod::Aila => "aila",
            KeyMethod::AilaCompact => "aila-compact",
            KeyMethod::Octahedron => "octahedron",
            KeyMethod::TwoPointFixed => "two-point-fixed",
            KeyMethod::TwoPointAdaptive => "two-point-adaptive",
            KeyMethod::TwoPointReal => "two-point-real",
        }
    }

    pub fn uses_termination(self) -> bool {
        matches!(
            self,
            KeyMethod::TwoPointFixed | KeyMethod::TwoPointAdaptive | KeyMethod::TwoPointReal
        )
    }

    /// The 32-bit schedule, or `None` for `Unsorted`.
    pub fn layout(self) -> Option<&'static Layout> {
        Some(match self {
            KeyMethod::Unsorted => return None,
            KeyMethod::Origin => &ORIGIN,
            KeyMethod::Reis => &REIS,
            KeyMethod::Costa => &COSTA,
            KeyMethod::Aila => &AILA,
            KeyMethod::AilaCompact => &AILA_COMPACT,
            KeyMethod::Octahedron => &OCTAHEDRON,
            KeyMethod::TwoPointFixed | KeyMethod::TwoPointAdaptive | KeyMethod::TwoPointReal => {
                &TWO_POINT
            }
        })
    }
}

impl fmt::Display for KeyMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KeyMethod {
    type Err = UnknownMethod;

    fn from_str(s: &str) -> core::result::Result<Self, Self::Err> {
        let norm = |c: char| if c == '_' || c == ' ' { '-' } else { c.to_ascii_lowercase() };
        let wanted: alloc::string::String = s.trim().chars().map(norm).collect();
        KeyMethod::ALL
            .iter()
            .copied()
            .find(|m| m.name() == wanted)
            .ok_or(UnknownMethod)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UnknownMethod;

impl fmt::Display for UnknownMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("unknown key method")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum KeyBits {
    B32,
    B64,
}

impl KeyBits {
    pub fn bits(self) -> u32 {
        match self {
            KeyBits::B32 => 32,
            KeyBits::B64 => 64,
        }
    }

    pub fn from_bits(bits: u32) -> Option<Self> {
        match bits {
            32 => Some(KeyBits::B32),
            64 => Some(KeyBits::B64),
            _ => None,
        }
    }
}

/// A 32-slot schedule and the number of bits it draws from each component.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Layout {
    pub schedule: [Slot; 32],
    pub widths: [u32; 6],
}

const fn layout(groups: &[&[Slot]]) -> Layout {
    let mut schedule = [Slot::Zero; 32];
    let mut widths = [0u32; 6];
    let mut n = 0;
    let mut g = 0;
    while g < groups.len() {
        let group = groups[g];
        let mut i = 0;
        while i < group.len() {
            schedule[n] = group[i];
            if let Slot::Component(c) = group[i] {
                widths[c as usize] += 1;
            }
            n += 1;
            i += 1;
        }
        g += 1;
    }
    assert!(n == 32, "layouts must fill exactly 32 bits");
    Layout { schedule, widths }
}

use Slot::Component as C;
const O3: &[Slot] = &[C(0), C(1), C(2)];
const O2: &[Slot] = &[C(0), C(1)];
const OX: &[Slot] = &[C(0)];
const S3: &[Slot] = &[C(3), C(4), C(5)];
const S2: &[Slot] = &[C(3), C(4)];
const Z3: &[Slot] = &[Slot::Zero, Slot::Zero, Slot::Zero];

/// Origin Morton code, 11/11/10.
pub static ORIGIN: Layout = layout(&[O3, O3, O3, O3, O3, O3, O3, O3, O3, O3, O2]);
/// 22-bit origin (8/7/7) above a 10-bit octahedral direction (5/5).
pub static REIS: Layout = layout(&[
    O3, O3, O3, O3, O3, O3, O3, OX, S2, S2, S2, S2, S2,
]);
/// 8-bit octahedral direction (4/4) above a 24-bit origin (8/8/8).
pub static COSTA: Layout = layout(&[
    S2, S2, S2, S2, O3, O3, O3, O3, O3, O3, O3, O3,
]);
/// Six-dimensional interleave; each cube-direction component carries three
/// leading zero bits before its two significant ones.
pub static AILA: Layout = layout(&[O3, Z3, O3, Z3, O3, Z3, O3, S3, O3, S3, O2]);
/// Twelve origin bits first, then alternating direction/origin triples.
pub static AILA_COMPACT: Layout = layout(&[
    O3, O3, O3, O3, S3, O3, S3, O3, S3, O3, S2,
]);
/// Fifteen origin bits, then octahedral `(u, v)` pairs alternating with
/// origin triples.
pub static OCTAHEDRON: Layout = layout(&[
    O3, O3, O3, O3, O3, S2, O3, S2, O3, S2, O3, S2,
]);
/// Origin and termination point interleaved; origin keeps the two extra bits.
pub static TWO_POINT: Layout = layout(&[
    O3, S3, O3, S3, O3, S3, O3, S3, O3, S3, O2,
]);

impl Layout {
    #[inline]
    fn emit(&self, values: &[u32; 6]) -> u32 {
        let mut remaining = self.widths;
        let mut key = 0u32;
        for slot in &self.schedule {
            key <<= 1;
            if let Slot::Component(c) = *slot {
                let c = c as usize;
                remaining[c] -= 1;
                key |= (values[c] >> remaining[c]) & 1;
            }
        }
        key
    }

    /// Encodes six unit-interval inputs. Components with zero width are
    /// ignored.
    #[inline]
    pub fn encode(&self, inputs: &[f32; 6], bits: KeyBits) -> SortKey {
        match bits {
            KeyBits::B32 => {
                let mut q = [0u32; 6];
                for i in 0..6 {
                    if self.widths[i] > 0 {
                        q[i] = quantize_unchecked(inputs[i], self.widths[i]);
                    }
                }
                self.emit(&q) as u64
            }
            KeyBits::B64 => {
                let mut hi = [0u32; 6];
                let mut lo = [0u32; 6];
                for i in 0..6 {
                    let w = self.widths[i];
                    if w > 0 {
                        let q = quantize_unchecked(inputs[i], 2 * w);
                        hi[i] = q >> w;
                        lo[i] = q & ((1 << w) - 1);
                    }
                }
                ((self.emit(&hi) as u64) << 32) | self.emit(&lo) as u64
            }
        }
    }

    /// Bits drawn from each component at the given key width.
    pub fn component_bits(&self, bits: KeyBits) -> [u32; 6] {
        let mult = bits.bits() / 32;
        self.widths.map(|w| w * mult)
    }
}

/// Everything the key functions need besides the ray.
#[derive(Clone, Copy)]
pub struct KeyContext<'a> {
    pub bounds: KeyBounds,
    pub key_bits: KeyBits,
    pub estimator: EstimatorConfig,
    pub table: Option<&'a LengthHashTable>,
    pub tracer: Option<&'a Bvh>,
}

impl<'a> KeyContext<'a> {
    /// Context with the default fixed-ratio estimator and no table or tracer.
    pub fn new(bounds: KeyBounds, key_bits: KeyBits) -> Self {
        Self {
            bounds,
            key_bits,
            estimator: EstimatorConfig::for_bounds(&bounds),
            table: None,
            tracer: None,
        }
    }

    pub fn with_estimator(mut self, cfg: EstimatorConfig) -> Self {
        self.estimator = cfg;
        self
    }

    pub fn with_table(mut self, table: &'a LengthHashTable) -> Self {
        self.table = Some(table);
        self
    }

    pub fn with_tracer(mut self, bvh: &'a Bvh) -> Self {
        self.tracer = Some(bvh);
        self
    }

    fn check(&self, method: KeyMethod) -> Result<()> {
        match method {
            KeyMethod::TwoPointAdaptive if self.table.is_none() => {
                Err(Error::MissingEstimator("two-point-adaptive"))
            }
            KeyMethod::TwoPointReal if self.tracer.is_none() => {
                Err(Error::MissingEstimator("two-point-real"))
            }
            _ => Ok(()),
        }
    }
}

#[inline]
fn origin_inputs(ray: &Ray, ctx: &KeyContext<'_>) -> [f32; 6] {
    let o = ctx.bounds.normalize(ray.origin);
    [o.x, o.y, o.z, 0.0, 0.0, 0.0]
}

#[inline]
fn with_octahedral(mut inputs: [f32; 6], d: Vec3) -> [f32; 6] {
    let l1 = libm::fabsf(d.x) + libm::fabsf(d.y) + libm::fabsf(d.z);
    let uv = octahedron_encode_unchecked(d, l1);
    inputs[3] = uv.u;
    inputs[4] = uv.v;
    inputs
}

#[inline]
fn with_cube(mut inputs: [f32; 6], d: Vec3) -> [f32; 6] {
    let c = cube_unit(d);
    inputs[3] = c.x;
    inputs[4] = c.y;
    inputs[5] = c.z;
    inputs
}

pub fn key_origin(ray: &Ray, ctx: &KeyContext<'_>) -> SortKey {
    ORIGIN.encode(&origin_inputs(ray, ctx), ctx.key_bits)
}

pub fn key_reis(ray: &Ray, ctx: &KeyContext<'_>) -> SortKey {
    REIS.encode(&with_octahedral(origin_inputs(ray, ctx), ray.direction), ctx.key_bits)
}

pub fn key_costa(ray: &Ray, ctx: &KeyContext<'_>) -> SortKey {
    COSTA.encode(&with_octahedral(origin_inputs(ray, ctx), ray.direction), ctx.key_bits)
}

pub fn key_aila(ray: &Ray, ctx: &KeyContext<'_>) -> SortKey {
    AILA.encode(&with_cube(origin_inputs(ray, ctx), ray.direction), ctx.key_bits)
}

pub fn key_aila_compact(ray: &Ray, ctx: &KeyContext<'_>) -> SortKey {
    AILA_COMPACT.encode(&with_cube(origin_inputs(ray, ctx), ray.direction), ctx.key_bits)
}

pub fn key_octahedron(ray: &Ray, ctx: &KeyContext<'_>) -> SortKey {
    OCTAHEDRON.encode(&with_octahedral(origin_inputs(ray, ctx), ray.direction), ctx.key_bits)
}

/// Two Point key for an explicit termination point. Points outside the scene
/// clamp to its boundary.
pub fn key_two_point(ray: &Ray, termination: Vec3, ctx: &KeyContext<'_>) -> SortKey {
    let mut inputs = origin_inputs(ray, ctx);
    let t = ctx.bounds.normalize(termination);
    inputs[3] = t.x;
    inputs[4] = t.y;
    inputs[5] = t.z;
    TWO_POINT.encode(&inputs, ctx.key_bits)
}

/// Termination point a Two Point variant would use for `ray`.
pub fn termination_for(ray: &Ray, method: KeyMethod, ctx: &KeyContext<'_>) -> Result<Vec3> {
    match method {
        KeyMethod::TwoPointFixed => Ok(estimate_fixed(ray, &ctx.estimator)),
        KeyMethod::TwoPointAdaptive => ctx
            .table
            .map(|t| t.estimate_adaptive(ray))
            .ok_or(Error::MissingEstimator("two-point-adaptive")),
        KeyMethod::TwoPointReal => ctx
            .tracer
            .map(|bvh| terminate_real(ray, bvh, ctx.bounds.scene()))
            .ok_or(Error::MissingEstimator("two-point-real")),
        _ => Ok(ray.origin),
    }
}

/// Key of one ray at position `index` of its batch.
pub fn key_for(ray: &Ray, index: usize, method: KeyMethod, ctx: &KeyContext<'_>) -> Result<SortKey> {
    Ok(match method {
        KeyMethod::Unsorted => index as u64,
        KeyMethod::Origin => key_origin(ray, ctx),
        KeyMethod::Reis => key_reis(ray, ctx),
        KeyMethod::Costa => key_costa(ray, ctx),
        KeyMethod::Aila => key_aila(ray, ctx),
        KeyMethod::AilaCompact => key_aila_compact(ray, ctx),
        KeyMethod::Octahedron => key_octahedron(ray, ctx),
        KeyMethod::TwoPointFixed | KeyMethod::TwoPointAdaptive | KeyMethod::TwoPointReal => {
            key_two_point(ray, termination_for(ray, method, ctx)?, ctx)
        }
    })
}

/// Checks that `ctx` carries the estimator handle `method` needs.
pub fn check_context(method: KeyMethod, ctx: &KeyContext<'_>) -> Result<()> {
    ctx.check(method)
}

/// Keys for a whole batch, in batch order. `Unsorted` yields the indices.
pub fn compute_keys(rays: &[Ray], method: KeyMethod, ctx: &KeyContext<'_>) -> Result<Vec<SortKey>> {
    ctx.check(method)?;
    rays.iter()
        .enumerate()
        .map(|(i, r)| key_for(r, i, method, ctx))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoders::{deinterleave_schedule, interleave_round_robin, ComponentSpec};
    use crate::geom::{quantize, Aabb, RayKind};
    use alloc::vec;

    fn unit_ctx(bits: KeyBits) -> KeyContext<'static> {
        KeyContext::new(KeyBounds::new(Aabb::new(Vec3::ZERO, Vec3::ONE).unwrap()).unwrap(), bits)
    }

    fn ray(o: [f32; 3], d: [f32; 3]) -> Ray {
        Ray::new(o.into(), Vec3::from(d).normalized(), f32::INFINITY, RayKind::Secondary).unwrap()
    }

    #[test]
    fn layout_widths() {
        assert_eq!(ORIGIN.widths, [11, 11, 10, 0, 0, 0]);
        assert_eq!(REIS.widths, [8, 7, 7, 5, 5, 0]);
        assert_eq!(COSTA.widths, [8, 8, 8, 4, 4, 0]);
        assert_eq!(AILA.widths, [6, 6, 5, 2, 2, 2]);
        assert_eq!(AILA_COMPACT.widths, [7, 7, 7, 4, 4, 3]);
        assert_eq!(OCTAHEDRON.widths, [8, 8, 8, 4, 4, 0]);
        assert_eq!(TWO_POINT.widths, [6, 6, 5, 5, 5, 5]);
    }

    #[test]
    fn origin_examples() {
        let ctx = unit_ctx(KeyBits::B32);
        let kb = ctx.bounds;
        assert_eq!(key_origin(&ray([0.0; 3], [1.0, 0.0, 0.0]), &ctx), 0);
        // the padded box is centred on the scene, so the centre still maps to 0.5
        let c = kb.normalize(Vec3::splat(0.5));
        assert_eq!(c, Vec3::splat(0.5));
        let spec = ComponentSpec::new(vec![1024, 1024, 512], vec![11, 11, 10]).unwrap();
        let (expected, _) = interleave_round_robin(&spec).unwrap();
        assert_eq!(key_origin(&ray([0.5; 3], [0.0, 1.0, 0.0]), &ctx), expected);
        assert_eq!(
            key_origin(&ray([0.3, 0.4, 0.5], [0.0, 1.0, 0.0]), &ctx),
            key_origin(&ray([0.3, 0.4, 0.5], [1.0, -1.0, 0.2]), &ctx)
        );
    }

    #[test]
    fn reis_low_bits_are_direction() {
        let ctx = unit_ctx(KeyBits::B32);
        let k = key_reis(&ray([0.0; 3], [0.0, 0.0, 1.0]), &ctx);
        assert_eq!(k >> 10, 0);
        let half = quantize(0.5, 5).unwrap() as u64;
        let spec = ComponentSpec::new(vec![half, half], vec![5, 5]).unwrap();
        assert_eq!(k & 0x3ff, interleave_round_robin(&spec).unwrap().0);
        let a = key_reis(&ray([0.2, 0.7, 0.1], [0.0, 0.0, 1.0]), &ctx);
        let b = key_reis(&ray([0.2, 0.7, 0.1], [1.0, 0.3, -0.5]), &ctx);
        assert_ne!(a, b);
        assert_eq!(a >> 10, b >> 10);
    }

    #[test]
    fn costa_high_bits_are_direction() {
        let ctx = unit_ctx(KeyBits::B32);
        let a = key_costa(&ray([0.2, 0.7, 0.1], [0.3, 0.2, 0.9]), &ctx);
        let b = key_costa(&ray([0.2, 0.7, 0.1], [0.3, 0.2, -0.9]), &ctx);
        assert_ne!(a >> 24, b >> 24);
        assert_eq!(a & 0xff_ffff, b & 0xff_ffff);
        let r = ray([0.2, 0.7, 0.1], [0.3, 0.2, 0.9]);
        assert_ne!(key_costa(&r, &ctx), key_reis(&r, &ctx));
    }

    #[test]
    fn aila_round_trips_through_schedule() {
        let ctx = unit_ctx(KeyBits::B32);
        let r = ray([0.9, 0.1, 0.6], [-0.3, 0.8, 0.2]);
        let k = key_aila(&r, &ctx);
        let comps = deinterleave_schedule(k, &AILA.widths, &AILA.schedule).unwrap();
        let o = ctx.bounds.normalize(r.origin);
        let c = cube_unit(r.direction);
        assert_eq!(
            comps,
            vec![
                quantize(o.x, 6).unwrap() as u64,
                quantize(o.y, 6).unwrap() as u64,
                quantize(o.z, 5).unwrap() as u64,
                quantize(c.x, 2).unwrap() as u64,
                quantize(c.y, 2).unwrap() as u64,
                quantize(c.z, 2).unwrap() as u64,
            ]
        );
    }

    #[test]
    fn aila_origin_at_min_sets_only_direction_bits() {
        let ctx = unit_ctx(KeyBits::B32);
        let d_mask: u64 = (0b111 << 8) | (0b111 << 2);
        for d in [[1.0, 1.0, 1.0], [0.5, 0.9, -0.1], [-0.2, 0.3, 0.9]] {
            let k = key_aila(&ray([0.0; 3], d), &ctx);
            assert_eq!(k & !d_mask, 0, "{k:032b}");
        }
    }

    #[test]
    fn two_point_zero_length() {
        let ctx = unit_ctx(KeyBits::B32);
        let r = ray([0.3, 0.6, 0.8], [1.0, 0.0, 0.0]);
        let k = key_two_point(&r, r.origin, &ctx);
        let comps = deinterleave_schedule(k, &TWO_POINT.widths, &TWO_POINT.schedule).unwrap();
        assert_eq!(comps[0] >> 1, comps[3]);
        assert_eq!(comps[1] >> 1, comps[4]);
        assert_eq!(comps[2], comps[5]);
        let swapped = Ray { origin: Vec3::new(0.9, 0.1, 0.2), ..r };
        assert_ne!(
            key_two_point(&r, swapped.origin, &ctx),
            key_two_point(&swapped, r.origin, &ctx)
        );
    }

    #[test]
    fn sixty_four_bit_keys_extend_thirty_two() {
        let c32 = unit_ctx(KeyBits::B32);
        let c64 = unit_ctx(KeyBits::B64);
        let rays = [
            ray([0.1, 0.2, 0.3], [0.3, -0.4, 0.5]),
            ray([0.99, 0.0, 0.5], [0.0, 0.0, -1.0]),
            ray([0.5, 0.5, 0.5], [-1.0, 1.0, 1.0]),
        ];
        for r in &rays {
            for m in &KeyMethod::ALL[1..8] {
                let a = key_for(r, 0, *m, &c32).unwrap();
                let b = key_for(r, 0, *m, &c64).unwrap();
                assert_eq!(b >> 32, a, "{m}");
            }
        }
        assert_eq!(AILA.component_bits(KeyBits::B64), [12, 12, 10, 4, 4, 4]);
    }

    #[test]
    fn missing_handles() {
        let ctx = unit_ctx(KeyBits::B32);
        let rays = [ray([0.1; 3], [1.0, 0.0, 0.0])];
        assert_eq!(
            compute_keys(&rays, KeyMethod::TwoPointReal, &ctx),
            Err(Error::MissingEstimator("two-point-real"))
        );
        assert!(compute_keys(&rays, KeyMethod::TwoPointAdaptive, &ctx).is_err());
        assert!(compute_keys(&rays, KeyMethod::TwoPointFixed, &ctx).is_ok());
    }

    #[test]
    fn compute_keys_examples() {
        let ctx = unit_ctx(KeyBits::B32);
        let rays = [
            ray([0.1, 0.2, 0.3], [1.0, 0.0, 0.0]),
            ray([0.7, 0.2, 0.9], [0.0, 1.0, 0.0]),
            ray([0.4, 0.8, 0.1], [0.0, 0.0, 1.0]),
        ];
        assert_eq!(compute_keys(&rays, KeyMethod::Unsorted, &ctx).unwrap(), vec![0, 1, 2]);
        assert_eq!(
            compute_keys(&rays[..1], KeyMethod::Origin, &ctx).unwrap(),
            vec![key_origin(&rays[0], &ctx)]
        );
        let fwd = compute_keys(&rays, KeyMethod::Octahedron, &ctx).unwrap();
        let rev: Vec<Ray> = rays.iter().rev().copied().collect();
        let mut back = compute_keys(&rev, KeyMethod::Octahedron, &ctx).unwrap();
        back.reverse();
        assert_eq!(fwd, back);
    }

    #[test]
    fn method_names_parse() {
        for m in KeyMethod::ALL {
            assert_eq!(m.name().parse::<KeyMethod>().unwrap(), m);
        }
        assert_eq!("Two_Point_Adaptive".parse::<KeyMethod>().unwrap(), KeyMethod::TwoPointAdaptive);
        assert!("hilbert".parse::<KeyMethod>().is_err());
    }
}
