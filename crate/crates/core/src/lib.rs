//! Ray reordering primitives.
//!
//! Everything in this crate is allocation-aware but free of `std`: sorting-key
//! layouts, termination-point estimation, the radix sort and gather passes,
//! an instrumented BVH trace kernel with warp and cache models, and the
//! capsule coherence measure. Timing, parallelism and file formats live in the
//! `raysort` companion crate.
#![no_std]

extern crate alloc;

pub mod coherence;
pub mod encoders;
pub mod error;
pub mod estimator;
pub mod geom;
pub mod keys;
pub mod sort;
pub mod tracer;

pub use error::{Error, Result};
pub use geom::{Aabb, KeyBounds, Ray, RayKind, Vec3};
pub use keys::{KeyBits, KeyContext, KeyMethod, SortKey};
