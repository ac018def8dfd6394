//! Key, sort and reorder pipeline with per-phase timing.

use std::time::Instant;

use rayon::prelude::*;
use raysort_core::estimator::miss_termination;
use raysort_core::keys::key_two_point;
use raysort_core::sort::{make_pairs, sorted_indices, SortPlan};
use raysort_core::tracer::closest_hit;
use raysort_core::{KeyBits, KeyContext, KeyMethod, Ray, SortKey};

use crate::error::{Error, Result};
use crate::par;

/// Phase durations in whole microseconds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PhaseTimings {
    pub code_us: u64,
    pub sort_us: u64,
    pub reorder_us: u64,
    pub accum_us: u64,
}

impl PhaseTimings {
    pub const LABELS: [&'static str; 4] = ["code", "sort", "reorder", "accum"];

    pub fn phases_ms(&self) -> [f64; 4] {
        [self.code_us, self.sort_us, self.reorder_us, self.accum_us].map(us_to_ms)
    }

    /// Sum of the four phases, added in label order.
    pub fn total_ms(&self) -> f64 {
        let [a, b, c, d] = self.phases_ms();
        a + b + c + d
    }

    pub fn total_us(&self) -> u64 {
        self.code_us + self.sort_us + self.reorder_us + self.accum_us
    }
}

pub fn us_to_ms(us: u64) -> f64 {
    us as f64 / 1000.0
}

pub fn elapsed_us(start: Instant) -> u64 {
    start.elapsed().as_micros() as u64
}

/// Cost of the extra trace Two Point Real needs before it can compute keys.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Pretrace {
    pub us: u64,
    pub node_visits: u64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ReorderReport {
    /// `order[i]` is the input position of the ray placed at `i`.
    pub order: Vec<u32>,
    /// Reordered rays; `None` in indirect mode.
    pub rays: Option<Vec<Ray>>,
    /// Inverse of `order`, for scattering results back. `None` in indirect
    /// mode.
    pub inverse: Option<Vec<u32>>,
    pub timings: PhaseTimings,
    pub pretrace: Option<Pretrace>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PipelineOptions {
    /// Return only the ordering and leave ray data in place.
    pub indirect: bool,
}

/// Keys for Two Point Real: a closest-hit pre-trace supplies every ray's
/// actual termination point. Its time is part of the code phase.
fn keys_two_point_real(rays: &[Ray], ctx: &KeyContext<'_>) -> Result<(Vec<SortKey>, Pretrace)> {
    let bvh = ctx.tracer.ok_or(raysort_core::Error::MissingEstimator("two-point-real"))?;
    let start = Instant::now();
    let traced: Vec<_> = rays
        .par_iter()
        .map(|r| {
            let (hit, c) = closest_hit(bvh, r);
            let end = if hit.hit { r.at(hit.t) } else { miss_termination(r, ctx.bounds.scene()) };
            (end, c.node_visits as u64)
        })
        .collect();
    let pre_us = elapsed_us(start);
    let node_visits = traced.iter().map(|t| t.1).sum();
    let keys = rays
        .par_iter()
        .zip(traced.par_iter())
        .map(|(r, (end, _))| key_two_point(r, *end, ctx))
        .collect();
    Ok((keys, Pretrace { us: pre_us, node_visits }))
}

fn sort_order(keys: &[SortKey], plan: SortPlan) -> Vec<u32> {
    match plan.key_bits {
        KeyBits::B32 => {
            let narrow: Vec<u32> = keys.par_iter().map(|&k| k as u32).collect();
            let mut pairs = make_pairs(&narrow);
            par::segmented_sort_pairs_par(&mut pairs, plan.segment_size);
            sorted_indices(&pairs)
        }
        KeyBits::B64 => {
            let mut pairs = make_pairs(keys);
            par::segmented_sort_pairs_par(&mut pairs, plan.segment_size);
            sorted_indices(&pairs)
        }
    }
}

/// Runs key computation, sorting and the gather pass, timing each. The
/// accumulation phase belongs to the caller (it follows the trace) and is
/// left at zero. `Unsorted` skips everything and reports zero time.
pub fn pipeline(
    rays: &[Ray],
    method: KeyMethod,
    ctx: &KeyContext<'_>,
    plan: SortPlan,
    opts: PipelineOptions,
) -> Result<ReorderReport> {
    if plan.key_bits != ctx.key_bits {
        return Err(Error::Config("sort plan and key context disagree on key width".into()));
    }
    if rays.len() > u32::MAX as usize {
        return Err(Error::Config("batch too large for 32-bit indices".into()));
    }
    if method == KeyMethod::Unsorted {
        let order: Vec<u32> = (0..rays.len() as u32).collect();
        let (rays, inverse) = if opts.indirect { (None, None) } else { (Some(rays.to_vec()), Some(order.clone())) };
        return Ok(ReorderReport {
            order,
            rays,
            inverse,
            ..Default::default()
        });
    }

    let start = Instant::now();
    let (keys, pretrace) = if method == KeyMethod::TwoPointReal {
        let (k, p) = keys_two_point_real(rays, ctx)?;
        (k, Some(p))
    } else {
        (par::compute_keys(rays, method, ctx)?, None)
    };
    let code_us = elapsed_us(start);

    let start = Instant::now();
    let order = sort_order(&keys, plan);
    let sort_us = elapsed_us(start);

    let (reordered, inverse, reorder_us) = if opts.indirect {
        (None, None, 0)
    } else {
        let start = Instant::now();
        let (r, inv) = par::gather_reorder(rays, &order)?;
        (Some(r), Some(inv), elapsed_us(start))
    };

    Ok(ReorderReport {
        order,
        rays: reordered,
        inverse,
        timings: PhaseTimings {
            code_us,
            sort_us,
            reorder_us,
            accum_us: 0,
        },
        pretrace,
    })
}
