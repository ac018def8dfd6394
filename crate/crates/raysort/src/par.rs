//! Data-parallel versions of the core kernels. Every function here returns
//! exactly what its sequential counterpart in `raysort_core` returns.

use rayon::prelude::*;
use raysort_core::coherence::{self, CoherenceReport, Point};
use raysort_core::keys::{check_context, key_for};
use raysort_core::sort::{
    invert_permutation, radix_sort_pairs, radix_sort_pairs_with, KeyIndexPair, RadixKey, RADIX,
};
use raysort_core::tracer::{
    check_warp_size, trace_warp, Bvh, CacheConfig, RayTrace, TraceMode, TraceStats, WarpScratch,
};
use raysort_core::{KeyContext, KeyMethod, Ray, SortKey};

use crate::error::Result;

/// Below this many pairs the sequential sort is used.
const PAR_SORT_MIN: usize = 1 << 16;
const SORT_CHUNKS: usize = 16;

pub fn compute_keys(rays: &[Ray], method: KeyMethod, ctx: &KeyContext<'_>) -> Result<Vec<SortKey>> {
    check_context(method, ctx)?;
    Ok(rays
        .par_iter()
        .enumerate()
        .map(|(i, r)| key_for(r, i, method, ctx))
        .collect::<raysort_core::Result<Vec<_>>>()?)
}

#[derive(Clone, Copy)]
struct SendPtr<T>(*mut T);
unsafe impl<T: Send> Send for SendPtr<T> {}
unsafe impl<T: Send> Sync for SendPtr<T> {}

/// Stable LSD radix sort with per-chunk histograms. Offsets are laid out
/// digit-major, chunk-minor, so the scatter order (and the result) is the
/// same as the sequential sort regardless of scheduling.
pub fn radix_sort_pairs_par<K: RadixKey>(pairs: &mut [KeyIndexPair<K>]) {
    let n = pairs.len();
    if n < PAR_SORT_MIN {
        radix_sort_pairs(pairs);
        return;
    }
    let chunk = n.div_ceil(SORT_CHUNKS);
    let mut scratch = vec![KeyIndexPair::default(); n];
    let mut src: &mut [KeyIndexPair<K>] = pairs;
    let mut dst: &mut [KeyIndexPair<K>] = &mut scratch;
    for pass in 0..K::PASSES {
        let hists: Vec<[usize; RADIX]> = src
            .par_chunks(chunk)
            .map(|c| raysort_core::sort::digit_histogram(c, pass))
            .collect();
        let mut offsets = vec![[0usize; RADIX]; hists.len()];
        let mut sum = 0;
        for d in 0..RADIX {
            for (c, h) in hists.iter().enumerate() {
                offsets[c][d] = sum;
                sum += h[d];
            }
        }
        let out = SendPtr(dst.as_mut_ptr());
        src.par_chunks(chunk).zip(offsets.into_par_iter()).for_each(|(c, mut off)| {
            let out = out;
            for p in c {
                let d = p.key.digit(pass);
                // SAFETY: offset ranges of different chunks and digits are
                // disjoint and together cover 0..n exactly once.
                unsafe { out.0.add(off[d]).write(*p) };
                off[d] += 1;
            }
        });
        std::mem::swap(&mut src, &mut dst);
    }
}

/// Block-wise sort with blocks processed in parallel. 0 sorts globally.
pub fn segmented_sort_pairs_par<K: RadixKey>(pairs: &mut [KeyIndexPair<K>], segment_size: usize) {
    if segment_size == 0 || segment_size >= pairs.len() {
        radix_sort_pairs_par(pairs);
        return;
    }
    pairs.par_chunks_mut(segment_size).for_each_init(
        || vec![KeyIndexPair::default(); segment_size],
        |scratch, c| {
            let n = c.len();
            radix_sort_pairs_with(c, &mut scratch[..n]);
        },
    );
}

/// Parallel `gather_reorder`.
pub fn gather_reorder<T: Clone + Send + Sync>(items: &[T], order: &[u32]) -> Result<(Vec<T>, Vec<u32>)> {
    if items.len() != order.len() {
        return Err(raysort_core::Error::LengthMismatch {
            left: items.len(),
            right: order.len(),
        }
        .into());
    }
    let inverse = invert_permutation(order)?;
    let out = order.par_iter().map(|&o| items[o as usize].clone()).collect();
    Ok((out, inverse))
}

/// `out[order[i]] = items[i]` given the precomputed inverse of `order`.
pub fn scatter_with_inverse<T: Clone + Send + Sync>(items: &[T], inverse: &[u32]) -> Vec<T> {
    inverse.par_iter().map(|&i| items[i as usize].clone()).collect()
}

/// `trace_batch` with warps traced in parallel and merged in warp order.
pub fn trace_batch(
    bvh: &Bvh,
    rays: &[Ray],
    mode: TraceMode,
    warp_size: usize,
    cache_cfg: CacheConfig,
) -> Result<(Vec<RayTrace>, TraceStats)> {
    check_warp_size(warp_size)?;
    let warps: Vec<_> = rays
        .par_chunks(warp_size)
        .map_init(WarpScratch::default, |s, w| trace_warp(bvh, w, mode, cache_cfg, s))
        .collect();
    let mut all = Vec::with_capacity(rays.len());
    let (mut hits, mut accesses) = (0, 0);
    for w in warps {
        hits += w.cache_hits;
        accesses += w.cache_accesses;
        all.extend(w.rays);
    }
    let stats = TraceStats::from_parts(&all, warp_size, hits, accesses);
    Ok((all, stats))
}

/// `mean_measure` with subsets fitted in parallel; the mean is summed in
/// subset order.
pub fn mean_measure(origins: &[Point], terminations: &[Point], n: usize) -> Result<CoherenceReport> {
    // Validation and the error cases are shared with the sequential version.
    if origins.len() < n || n == 0 || origins.len() != terminations.len() {
        return Ok(coherence::mean_measure(origins, terminations, n)?);
    }
    let areas = origins
        .par_chunks_exact(n)
        .zip(terminations.par_chunks_exact(n))
        .map(|(o, t)| coherence::capsule_fit(o, t).map(|c| coherence::capsule_area(&c)))
        .collect::<raysort_core::Result<Vec<f64>>>()?;
    Ok(coherence::report(areas, n))
}
