//! Minimal Wavefront OBJ reader: `v` and `f` records only.

use std::fs;
use std::path::Path;

use raysort_core::tracer::Triangle;
use raysort_core::Vec3;

use crate::error::{Error, Result};

/// Reads `path` and triangulates every face as a fan. Degenerate triangles
/// are dropped; a mesh left with none is an error.
pub fn load_obj(path: &Path) -> Result<Vec<Triangle>> {
    let text = fs::read_to_string(path)?;
    parse_obj(&text, path)
}

/// [`load_obj`] on an in-memory file; `path` only labels errors.
pub fn parse_obj(text: &str, path: &Path) -> Result<Vec<Triangle>> {
    let err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut verts: Vec<Vec3> = Vec::new();
    let mut tris = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut it = line.split_whitespace();
        match it.next() {
            Some("v") => {
                let mut c = [0.0f32; 3];
                for slot in &mut c {
                    let tok = it.next().ok_or_else(|| err(line_no, "vertex needs 3 coordinates".into()))?;
                    *slot = tok
                        .parse()
                        .map_err(|_| err(line_no, format!("bad coordinate {tok:?}")))?;
                }
                let v = Vec3::from(c);
                if !v.is_finite() {
                    return Err(err(line_no, "non-finite vertex".into()));
                }
                verts.push(v);
            }
            Some("f") => {
                let mut idx = Vec::new();
                for tok in it {
                    let first = tok.split('/').next().unwrap_or("");
                    let i: i64 = first
                        .parse()
                        .map_err(|_| err(line_no, format!("bad face index {tok:?}")))?;
                    let resolved = match i {
                        0 => None,
                        i if i > 0 => Some(i as usize - 1),
                        i => verts.len().checked_sub(i.unsigned_abs() as usize),
                    };
                    match resolved {
                        Some(r) if r < verts.len() => idx.push(r),
                        _ => return Err(err(line_no, format!("face index {i} out of range"))),
                    }
                }
                if idx.len() < 3 {
                    return Err(err(line_no, "face needs at least 3 vertices".into()));
                }
                for k in 1..idx.len() - 1 {
                    let t = Triangle::new(verts[idx[0]], verts[idx[k]], verts[idx[k + 1]]);
                    if !t.is_degenerate() {
                        tris.push(t);
                    }
                }
            }
            _ => {}
        }
    }
    if tris.is_empty() {
        return Err(Error::EmptyMesh);
    }
    Ok(tris)
}
