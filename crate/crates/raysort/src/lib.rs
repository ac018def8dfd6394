//! Benchmark harness around `raysort_core`: scenes, a wavefront path tracer
//! that feeds the reordering pipeline, parallel kernels, CSV reporting and
//! file formats.

pub mod bench;
pub mod error;
pub mod io;
pub mod obj;
pub mod par;
pub mod pipeline;
pub mod render;
pub mod report;
pub mod rng;
pub mod scene;

pub use error::{Error, Result};
pub use raysort_core as core;
