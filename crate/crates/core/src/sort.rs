//! Stable LSD radix sort of key–index pairs, block-wise (segmented) sorting,
//! and the gather/scatter passes that move ray data.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::keys::KeyBits;

pub const RADIX_BITS: u32 = 8;
pub const RADIX: usize = 1 << RADIX_BITS;

/// Fixed-width unsigned key sortable one byte at a time.
pub trait RadixKey: Copy + Ord + Default + Send + Sync + core::fmt::Debug {
    /// Number of 8-bit digit passes.
    const PASSES: usize;
    fn digit(self, pass: usize) -> usize;
}

impl RadixKey for u32 {
    const PASSES: usize = 4;
    #[inline(always)]
    fn digit(self, pass: usize) -> usize {
        ((self >> (pass as u32 * RADIX_BITS)) & 0xff) as usize
    }
}

impl RadixKey for u64 {
    const PASSES: usize = 8;
    #[inline(always)]
    fn digit(self, pass: usize) -> usize {
        ((self >> (pass as u32 * RADIX_BITS)) & 0xff) as usize
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct KeyIndexPair<K> {
    pub key: K,
    /// Position of the ray in the unsorted batch.
    pub index: u32,
}

/// Pairs each key with its position.
pub fn make_pairs<K: Copy>(keys: &[K]) -> Vec<KeyIndexPair<K>> {
    keys.iter()
        .enumerate()
        .map(|(i, &key)| KeyIndexPair { key, index: i as u32 })
        .collect()
}

/// Digit counts of one pass over `pairs`.
pub fn digit_histogram<K: RadixKey>(pairs: &[KeyIndexPair<K>], pass: usize) -> [usize; RADIX] {
    let mut h = [0usize; RADIX];
    for p in pairs {
        h[p.key.digit(pass)] += 1;
    }
    h
}

/// Stable sort by key, one counting pass per byte.
pub fn radix_sort_pairs<K: RadixKey>(pairs: &mut [KeyIndexPair<K>]) {
    let mut scratch = vec![KeyIndexPair::default(); pairs.len()];
    radix_sort_pairs_with(pairs, &mut scratch);
}

/// [`radix_sort_pairs`] with a caller-provided buffer of the same length.
pub fn radix_sort_pairs_with<K: RadixKey>(pairs: &mut [KeyIndexPair<K>], scratch: &mut [KeyIndexPair<K>]) {
    assert_eq!(pairs.len(), scratch.len());
    if pairs.len() < 2 {
        return;
    }
    let mut src: &mut [KeyIndexPair<K>] = pairs;
    let mut dst: &mut [KeyIndexPair<K>] = scratch;
    for pass in 0..K::PASSES {
        let hist = digit_histogram(src, pass);
        let mut offsets = [0usize; RADIX];
        let mut sum = 0;
        for (o, h) in offsets.iter_mut().zip(hist.iter()) {
            *o = sum;
            sum += h;
        }
        for p in src.iter() {
            let d = p.key.digit(pass);
            dst[offsets[d]] = *p;
            offsets[d] += 1;
        }
        core::mem::swap(&mut src, &mut dst);
    }
    // PASSES is even, so the result is back in `pairs`.
    debug_assert!(K::PASSES % 2 == 0);
}

/// Sort granularity and key width of a reordering run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SortPlan {
    /// 0 sorts the whole batch; otherwise each block of this many pairs is
    /// sorted on its own.
    pub segment_size: usize,
    pub key_bits: KeyBits,
}

impl SortPlan {
    pub fn new(segment_size: usize, key_bits: KeyBits) -> Result<Self> {
        if segment_size != 0 && (!segment_size.is_power_of_two() || segment_size < 64) {
            return Err(Error::InvalidSegment(segment_size));
        }
        Ok(Self {
            segment_size,
            key_bits,
        })
    }

    pub fn global(key_bits: KeyBits) -> Self {
        Self {
            segment_size: 0,
            key_bits,
        }
    }
}

/// Sorts every block of `segment_size` consecutive pairs independently
/// (the last block may be shorter). A size of 0 sorts globally.
pub fn segmented_sort_pairs<K: RadixKey>(pairs: &mut [KeyIndexPair<K>], segment_size: usize) {
    if segment_size == 0 || segment_size >= pairs.len() {
        radix_sort_pairs(pairs);
        return;
    }
    let mut scratch = vec![KeyIndexPair::default(); segment_size];
    for chunk in pairs.chunks_mut(segment_size) {
        let n = chunk.len();
        radix_sort_pairs_with(chunk, &mut scratch[..n]);
    }
}

/// Index order after sorting.
pub fn sorted_indices<K>(pairs: &[KeyIndexPair<K>]) -> Vec<u32> {
    pairs.iter().map(|p| p.index).collect()
}

/// Inverse of a permutation of `0..n`.
pub fn invert_permutation(order: &[u32]) -> Result<Vec<u32>> {
    let n = order.len();
    let mut inv = vec![u32::MAX; n];
    for (i, &o) in order.iter().enumerate() {
        let slot = inv.get_mut(o as usize).ok_or(Error::NotPermutation(n))?;
        if *slot != u32::MAX {
            return Err(Error::NotPermutation(n));
        }
        *slot = i as u32;
    }
    Ok(inv)
}

/// `out[i] = items[order[i]]`, plus the inverse permutation for scattering
/// results back.
pub fn gather_reorder<T: Clone>(items: &[T], order: &[u32]) -> Result<(Vec<T>, Vec<u32>)> {
    if items.len() != order.len() {
        return Err(Error::LengthMismatch {
            left: items.len(),
            right: order.len(),
        });
    }
    let inverse = invert_permutation(order)?;
    let out = order.iter().map(|&o| items[o as usize].clone()).collect();
    Ok((out, inverse))
}

/// Puts reordered items back in their original positions:
/// `out[order[i]] = items[i]`.
pub fn scatter_back<T: Clone>(items: &[T], order: &[u32]) -> Result<Vec<T>> {
    if items.len() != order.len() {
        return Err(Error::LengthMismatch {
            left: items.len(),
            right: order.len(),
        });
    }
    let inverse = invert_permutation(order)?;
    Ok(inverse.iter().map(|&i| items[i as usize].clone()).collect())
}
