//! File formats: ray dumps, estimator snapshots, PPM images and capsule CSV.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use raysort_core::coherence::{capsule_area, fit_subsets, Point};
use raysort_core::estimator::LengthHashTable;
use raysort_core::{KeyBounds, Ray, RayKind, Vec3};
use serde::Serialize;

use crate::error::{Error, Result};

pub const RAYS_MAGIC: &[u8; 4] = b"RAYS";
const RAY_RECORD: usize = 32;

/// Little-endian dump: `"RAYS"`, `u32` count, then per ray origin and
/// direction as `3 x f32`, `f32` tmax and `u32` kind.
pub fn write_rays<W: Write>(rays: &[Ray], mut w: W) -> Result<()> {
    let count = u32::try_from(rays.len()).map_err(|_| Error::Format("too many rays".into()))?;
    let mut buf = Vec::with_capacity(8 + rays.len() * RAY_RECORD);
    buf.extend_from_slice(RAYS_MAGIC);
    buf.extend_from_slice(&count.to_le_bytes());
    for r in rays {
        for v in r.origin.to_array().into_iter().chain(r.direction.to_array()).chain([r.tmax]) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        buf.extend_from_slice(&(r.kind as u32).to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_rays<R: Read>(mut r: R) -> Result<Vec<Ray>> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() < 8 || &bytes[..4] != RAYS_MAGIC {
        return Err(Error::Format("missing RAYS header".into()));
    }
    let count = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let body = &bytes[8..];
    if body.len() != count * RAY_RECORD {
        return Err(Error::Format(format!("expected {count} ray records, found {} bytes", body.len())));
    }
    body.chunks_exact(RAY_RECORD)
        .map(|rec| {
            let f = |i: usize| f32::from_le_bytes(rec[i * 4..i * 4 + 4].try_into().unwrap());
            let kind = u32::from_le_bytes(rec[28..32].try_into().unwrap());
            let kind = RayKind::from_u32(kind).ok_or_else(|| Error::Format(format!("bad ray kind {kind}")))?;
            Ok(Ray::new(Vec3::new(f(0), f(1), f(2)), Vec3::new(f(3), f(4), f(5)), f(6), kind)?)
        })
        .collect()
}

pub fn save_table(table: &LengthHashTable, path: &Path) -> Result<()> {
    fs::write(path, table.to_snapshot())?;
    Ok(())
}

pub fn load_table(path: &Path, bounds: KeyBounds) -> Result<LengthHashTable> {
    Ok(LengthHashTable::from_snapshot(&fs::read(path)?, bounds)?)
}

/// Binary PPM (P6) of a grayscale radiance image; values are clamped to
/// `[0, 1]` and gamma-encoded.
pub fn write_ppm<W: Write>(image: &[f64], width: usize, height: usize, mut w: W) -> Result<()> {
    if image.len() != width * height {
        return Err(raysort_core::Error::LengthMismatch {
            left: image.len(),
            right: width * height,
        }
        .into());
    }
    let mut buf = format!("P6\n{width} {height}\n255\n").into_bytes();
    for &v in image {
        let g = (v.clamp(0.0, 1.0).powf(1.0 / 2.2) * 255.0).round() as u8;
        buf.extend_from_slice(&[g, g, g]);
    }
    w.write_all(&buf)?;
    Ok(())
}

#[derive(Serialize)]
struct CapsuleRecord {
    subset: usize,
    co_x: f64,
    co_y: f64,
    co_z: f64,
    ct_x: f64,
    ct_y: f64,
    ct_z: f64,
    r_o: f64,
    r_t: f64,
    area: f64,
}

/// One CSV row per complete subset of `n` rays.
pub fn write_capsules_csv<W: Write>(origins: &[Point], terminations: &[Point], n: usize, w: W) -> Result<usize> {
    let caps = fit_subsets(origins, terminations, n)?;
    let mut wr = csv::Writer::from_writer(w);
    for (i, c) in caps.iter().enumerate() {
        wr.serialize(CapsuleRecord {
            subset: i,
            co_x: c.c_o[0],
            co_y: c.c_o[1],
            co_z: c.c_o[2],
            ct_x: c.c_t[0],
            ct_y: c.c_t[1],
            ct_z: c.c_t[2],
            r_o: c.r_o,
            r_t: c.r_t,
            area: capsule_area(c),
        })?;
    }
    wr.flush()?;
    Ok(caps.len())
}
