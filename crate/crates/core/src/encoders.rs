//! Bit interleaving and direction parametrizations.
//!
//! Interleaving is driven by a *schedule*: a sequence of slots, each either
//! naming a component (emit that component's next most significant bit) or
//! forcing a zero bit. Round-robin Morton order is the schedule that cycles
//! through all components that still have bits left.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geom::{quantize, Vec3, UNIT_TOLERANCE};

/// One emitted bit position of an interleaving schedule.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Slot {
    /// Next most significant bit of the component with this index.
    Component(u8),
    /// A constant zero bit.
    Zero,
}

/// Component values together with the number of bits each one carries, in
/// fixed `x, y, z[, ...]` order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComponentSpec {
    pub values: Vec<u64>,
    pub bits: Vec<u32>,
}

impl ComponentSpec {
    pub fn new(values: Vec<u64>, bits: Vec<u32>) -> Result<Self> {
        check_components(&values, &bits)?;
        Ok(Self { values, bits })
    }

    pub fn total_bits(&self) -> u32 {
        self.bits.iter().sum()
    }
}

fn check_components(values: &[u64], bits: &[u32]) -> Result<()> {
    if values.len() != bits.len() {
        return Err(Error::ShapeMismatch {
            values: values.len(),
            bits: bits.len(),
        });
    }
    let total: u32 = bits.iter().sum();
    if total > 64 {
        return Err(Error::KeyOverflow(total));
    }
    for (&v, &b) in values.iter().zip(bits) {
        if b < 64 && v >> b != 0 {
            return Err(Error::ComponentOverflow { value: v, bits: b });
        }
    }
    Ok(())
}

/// Round-robin schedule for the given per-component widths: at each round,
/// every component that still has bits emits one, in component order.
pub fn round_robin_schedule(bits: &[u32]) -> Vec<Slot> {
    let rounds = bits.iter().copied().max().unwrap_or(0);
    let mut schedule = Vec::with_capacity(bits.iter().sum::<u32>() as usize);
    for round in 0..rounds {
        for (c, &b) in bits.iter().enumerate() {
            if round < b {
                schedule.push(Slot::Component(c as u8));
            }
        }
    }
    schedule
}

/// Interleaves `values` MSB-first following `schedule`. The result is
/// right-aligned; the returned width is the schedule length.
pub fn interleave_schedule(values: &[u64], bits: &[u32], schedule: &[Slot]) -> Result<(u64, u32)> {
    check_components(values, bits)?;
    let width = schedule.len() as u32;
    if width > 64 {
        return Err(Error::KeyOverflow(width));
    }
    let mut remaining: Vec<u32> = bits.to_vec();
    let mut key = 0u64;
    for slot in schedule {
        key <<= 1;
        if let Slot::Component(c) = *slot {
            let c = c as usize;
            let r = remaining.get_mut(c).ok_or(Error::ShapeMismatch {
                values: values.len(),
                bits: c + 1,
            })?;
            if *r == 0 {
                return Err(Error::ShapeMismatch {
                    values: values.len(),
                    bits: bits.len(),
                });
            }
            *r -= 1;
            key |= (values[c] >> *r) & 1;
        }
    }
    if remaining.iter().any(|&r| r != 0) {
        return Err(Error::ShapeMismatch {
            values: values.len(),
            bits: bits.len(),
        });
    }
    Ok((key, width))
}

/// Inverse of [`interleave_schedule`].
pub fn deinterleave_schedule(key: u64, bits: &[u32], schedule: &[Slot]) -> Result<Vec<u64>> {
    let width = schedule.len() as u32;
    if width > 64 {
        return Err(Error::KeyOverflow(width));
    }
    if width < 64 && key >> width != 0 {
        return Err(Error::ComponentOverflow {
            value: key,
            bits: width,
        });
    }
    let mut values = alloc::vec![0u64; bits.len()];
    let mut seen = alloc::vec![0u32; bits.len()];
    for (i, slot) in schedule.iter().enumerate() {
        let bit = (key >> (width as usize - 1 - i)) & 1;
        match *slot {
            Slot::Component(c) => {
                let c = c as usize;
                if c >= bits.len() {
                    return Err(Error::ShapeMismatch {
                        values: c + 1,
                        bits: bits.len(),
                    });
                }
                values[c] = (values[c] << 1) | bit;
                seen[c] += 1;
            }
            Slot::Zero => {
                if bit != 0 {
                    return Err(Error::ComponentOverflow {
                        value: key,
                        bits: width,
                    });
                }
            }
        }
    }
    if seen != bits {
        return Err(Error::ShapeMismatch {
            values: seen.len(),
            bits: bits.len(),
        });
    }
    Ok(values)
}

/// Morton-style interleave of `spec` with exhausted components skipped.
pub fn interleave_round_robin(spec: &ComponentSpec) -> Result<(u64, u32)> {
    interleave_schedule(&spec.values, &spec.bits, &round_robin_schedule(&spec.bits))
}

/// Splits a round-robin key back into its components.
pub fn deinterleave(key: u64, bits: &[u32]) -> Result<Vec<u64>> {
    let total: u32 = bits.iter().sum();
    if total > 64 {
        return Err(Error::KeyOverflow(total));
    }
    deinterleave_schedule(key, bits, &round_robin_schedule(bits))
}

fn check_unit(d: Vec3) -> Result<()> {
    let len = d.length();
    if !len.is_finite() || len == 0.0 {
        return Err(Error::ZeroDirection);
    }
    if libm::fabsf(len - 1.0) > UNIT_TOLERANCE {
        return Err(Error::NonUnitDirection(len));
    }
    Ok(())
}

/// Cube embedding of a unit direction: each component mapped from
/// `[-1, 1]` to `[0, 1]` and quantized.
pub fn cube_encode_direction(d: Vec3, bits_per_axis: u32) -> Result<[u32; 3]> {
    check_unit(d)?;
    let c = cube_unit(d);
    Ok([
        quantize(c.x, bits_per_axis)?,
        quantize(c.y, bits_per_axis)?,
        quantize(c.z, bits_per_axis)?,
    ])
}

#[inline]
pub(crate) fn cube_unit(d: Vec3) -> Vec3 {
    (d + Vec3::ONE) * 0.5
}

/// Octahedral coordinates in the unit square.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OctaUV {
    pub u: f32,
    pub v: f32,
}

/// `+1` for zero and positive values (including `-0.0`).
#[inline]
pub fn sign_nonneg(x: f32) -> f32 {
    if x >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Octahedral map of a direction onto `[0, 1]^2`; the lower hemisphere is
/// folded over the diagonals.
pub fn octahedron_encode(d: Vec3) -> Result<OctaUV> {
    let l1 = libm::fabsf(d.x) + libm::fabsf(d.y) + libm::fabsf(d.z);
    if !l1.is_finite() || l1 == 0.0 {
        return Err(Error::ZeroDirection);
    }
    Ok(octahedron_encode_unchecked(d, l1))
}

#[inline]
pub(crate) fn octahedron_encode_unchecked(d: Vec3, l1: f32) -> OctaUV {
    let px = d.x / l1;
    let py = d.y / l1;
    let (u, v) = if d.z < 0.0 {
        (
            (1.0 - libm::fabsf(py)) * sign_nonneg(px),
            (1.0 - libm::fabsf(px)) * sign_nonneg(py),
        )
    } else {
        (px, py)
    };
    OctaUV {
        u: u * 0.5 + 0.5,
        v: v * 0.5 + 0.5,
    }
}

/// Inverse of [`octahedron_encode`], normalized to unit length.
pub fn octahedron_decode(uv: OctaUV) -> Vec3 {
    let x = uv.u * 2.0 - 1.0;
    let y = uv.v * 2.0 - 1.0;
    let z = 1.0 - libm::fabsf(x) - libm::fabsf(y);
    let t = (-z).max(0.0);
    Vec3::new(x - t * sign_nonneg(x), y - t * sign_nonneg(y), z).normalized()
}
