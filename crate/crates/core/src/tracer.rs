//! Instrumented CPU trace kernel.
//!
//! A binned-SAH BVH traversed depth first with near-child ordering. Every
//! traversal counts node visits and triangle tests and can log the visited
//! node ids; batches are grouped into warps to derive a lockstep (SIMT)
//! efficiency and a per-warp set-associative LRU cache hit rate.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geom::{Aabb, Ray, Vec3};

/// Hits closer than this are ignored (self-intersection guard).
pub const T_MIN: f32 = 1e-4;
/// Determinant threshold of the triangle test.
pub const DET_EPSILON: f32 = 1e-7;
pub const MAX_LEAF_SIZE: usize = 4;
const SAH_BINS: usize = 8;
const STACK_SIZE: usize = 64;
// Slab-test widening so rounding never culls a box the ray touches.
const SLAB_WIDEN: f32 = 1.0 + 2.0 * (3.0 * f32::EPSILON * 0.5) / (1.0 - 3.0 * f32::EPSILON * 0.5);

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Triangle {
    pub v0: Vec3,
    pub v1: Vec3,
    pub v2: Vec3,
}

impl Triangle {
    pub const fn new(v0: Vec3, v1: Vec3, v2: Vec3) -> Self {
        Self { v0, v1, v2 }
    }

    pub fn area(&self) -> f32 {
        (self.v1 - self.v0).cross(self.v2 - self.v0).length() * 0.5
    }

    pub fn is_degenerate(&self) -> bool {
        !(self.area() > 0.0) || !self.v0.is_finite() || !self.v1.is_finite() || !self.v2.is_finite()
    }

    pub fn bounds(&self) -> Aabb {
        Aabb::from_points([self.v0, self.v1, self.v2])
    }

    pub fn centroid(&self) -> Vec3 {
        (self.v0 + self.v1 + self.v2) * (1.0 / 3.0)
    }

    /// Unit geometric normal, counter-clockwise winding.
    pub fn normal(&self) -> Vec3 {
        (self.v1 - self.v0).cross(self.v2 - self.v0).normalized()
    }

    /// Möller–Trumbore. Returns `t > T_MIN` on a hit; range checks against
    /// `tmax` are left to the caller.
    #[inline]
    pub fn intersect(&self, origin: Vec3, dir: Vec3) -> Option<f32> {
        let e1 = self.v1 - self.v0;
        let e2 = self.v2 - self.v0;
        let p = dir.cross(e2);
        let det = e1.dot(p);
        if libm::fabsf(det) < DET_EPSILON {
            return None;
        }
        let inv = 1.0 / det;
        let s = origin - self.v0;
        let u = s.dot(p) * inv;
        if !(0.0..=1.0).contains(&u) {
            return None;
        }
        let q = s.cross(e1);
        let v = dir.dot(q) * inv;
        if v < 0.0 || u + v > 1.0 {
            return None;
        }
        let t = e2.dot(q) * inv;
        (t > T_MIN).then_some(t)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NodeKind {
    Leaf { first: u32, count: u32 },
    Interior { left: u32, right: u32, axis: u8 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BvhNode {
    pub bounds: Aabb,
    pub kind: NodeKind,
}

/// Bounding volume hierarchy over a triangle soup. Immutable once built.
#[derive(Clone, Debug)]
pub struct Bvh {
    nodes: Vec<BvhNode>,
    triangles: Vec<Triangle>,
    /// Original index of each stored triangle.
    tri_ids: Vec<u32>,
}

#[derive(Clone, Copy)]
struct BuildRef {
    bounds: Aabb,
    centroid: Vec3,
    id: u32,
}

#[derive(Clone, Copy)]
struct Bin {
    bounds: Aabb,
    count: usize,
}

impl Bvh {
    /// Top-down binned SAH build, deterministic for a fixed input order.
    pub fn build(triangles: &[Triangle]) -> Result<Self> {
        if triangles.is_empty() {
            return Err(Error::Empty);
        }
        let mut refs: Vec<BuildRef> = triangles
            .iter()
            .enumerate()
            .map(|(i, t)| BuildRef {
                bounds: t.bounds(),
                centroid: t.centroid(),
                id: i as u32,
            })
            .collect();
        let mut bvh = Bvh {
            nodes: Vec::with_capacity(2 * triangles.len() / MAX_LEAF_SIZE + 1),
            triangles: Vec::with_capacity(triangles.len()),
            tri_ids: Vec::with_capacity(triangles.len()),
        };
        bvh.build_node(&mut refs, triangles);
        Ok(bvh)
    }

    fn build_node(&mut self, refs: &mut [BuildRef], source: &[Triangle]) -> u32 {
        let index = self.nodes.len() as u32;
        let bounds = refs.iter().fold(Aabb::empty(), |b, r| b.union(&r.bounds));
        self.nodes.push(BvhNode {
            bounds,
            kind: NodeKind::Leaf { first: 0, count: 0 },
        });

        let split = if refs.len() <= 1 { None } else { choose_split(refs, &bounds) };
        let mid = match split {
            Some(mid) => mid,
            None => {
                let first = self.triangles.len() as u32;
                for r in refs.iter() {
                    self.triangles.push(source[r.id as usize]);
                    self.tri_ids.push(r.id);
                }
                self.nodes[index as usize].kind = NodeKind::Leaf {
                    first,
                    count: refs.len() as u32,
                };
                return index;
            }
        };
        let axis = bounds.largest_axis() as u8;
        let (lo, hi) = refs.split_at_mut(mid);
        let left = self.build_node(lo, source);
        let right = self.build_node(hi, source);
        self.nodes[index as usize].kind = NodeKind::Interior { left, right, axis };
        index
    }

    pub fn nodes(&self) -> &[BvhNode] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }

    pub fn bounds(&self) -> Aabb {
        self.nodes[0].bounds
    }

    /// Original (input-order) index of stored triangle `i`.
    pub fn original_id(&self, i: u32) -> u32 {
        self.tri_ids[i as usize]
    }

    pub fn depth(&self) -> usize {
        fn go(bvh: &Bvh, n: u32) -> usize {
            match bvh.nodes[n as usize].kind {
                NodeKind::Leaf { .. } => 1,
                NodeKind::Interior { left, right, .. } => 1 + go(bvh, left).max(go(bvh, right)),
            }
        }
        go(self, 0)
    }
}

/// Partitions `refs` and returns the split position, or `None` for a leaf.
fn choose_split(refs: &mut [BuildRef], bounds: &Aabb) -> Option<usize> {
    let n = refs.len();
    let centroid_bounds = Aabb::from_points(refs.iter().map(|r| r.centroid));
    let ext = centroid_bounds.diagonal();

    let mut best: Option<(f32, usize, usize)> = None; // (cost, axis, bins left of split)
    for axis in 0..3 {
        if !(ext[axis] > 0.0) {
            continue;
        }
        let mut bins = [Bin {
            bounds: Aabb::empty(),
            count: 0,
        }; SAH_BINS];
        for r in refs.iter() {
            let b = bin_of(r.centroid[axis], centroid_bounds.min[axis], ext[axis]);
            bins[b].bounds = bins[b].bounds.union(&r.bounds);
            bins[b].count += 1;
        }
        let mut right_area = [0.0f32; SAH_BINS];
        let mut right_count = [0usize; SAH_BINS];
        let mut acc = Aabb::empty();
        let mut cnt = 0;
        for i in (1..SAH_BINS).rev() {
            acc = acc.union(&bins[i].bounds);
            cnt += bins[i].count;
            right_area[i] = acc.surface_area();
            right_count[i] = cnt;
        }
        let mut acc = Aabb::empty();
        let mut cnt = 0;
        for split in 1..SAH_BINS {
            acc = acc.union(&bins[split - 1].bounds);
            cnt += bins[split - 1].count;
            if cnt == 0 || right_count[split] == 0 {
                continue;
            }
            let cost = acc.surface_area() * cnt as f32 + right_area[split] * right_count[split] as f32;
            if best.map_or(true, |(c, _, _)| cost < c) {
                best = Some((cost, axis, split));
            }
        }
    }

    let parent_area = bounds.surface_area();
    match best {
        Some((cost, axis, split)) => {
            let split_cost = 1.0 + if parent_area > 0.0 { cost / parent_area } else { 0.0 };
            if n <= MAX_LEAF_SIZE && n as f32 <= split_cost {
                return None;
            }
            let lo = centroid_bounds.min[axis];
            let e = ext[axis];
            let mut left: Vec<BuildRef> = Vec::with_capacity(n);
            let mut right: Vec<BuildRef> = Vec::with_capacity(n);
            for r in refs.iter() {
                let moved = *r;
                if bin_of(r.centroid[axis], lo, e) < split {
                    left.push(moved);
                } else {
                    right.push(moved);
                }
            }
            let mid = left.len();
            for (dst, src) in refs.iter_mut().zip(left.into_iter().chain(right)) {
                *dst = src;
            }
            Some(mid)
        }
        // all centroids coincide
        None if n <= MAX_LEAF_SIZE => None,
        None => Some(n / 2),
    }
}

#[inline]
fn bin_of(c: f32, lo: f32, ext: f32) -> usize {
    let b = ((c - lo) / ext * SAH_BINS as f32) as usize;
    b.min(SAH_BINS - 1)
}

/// Outcome of a closest- or any-hit query.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HitRecord {
    pub t: f32,
    /// Input-order triangle index; meaningless when `hit` is false.
    pub triangle: u32,
    pub hit: bool,
}

impl HitRecord {
    pub const MISS: HitRecord = HitRecord {
        t: f32::INFINITY,
        triangle: u32::MAX,
        hit: false,
    };
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TraversalCounters {
    pub node_visits: u32,
    pub triangle_tests: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TraceMode {
    Closest,
    Any,
}

struct RayPrep {
    origin: Vec3,
    inv: Vec3,
    zero: [bool; 3],
    neg: [bool; 3],
}

impl RayPrep {
    fn new(ray: &Ray) -> Self {
        let d = ray.direction;
        Self {
            origin: ray.origin,
            inv: Vec3::new(1.0 / d.x, 1.0 / d.y, 1.0 / d.z),
            zero: [d.x == 0.0, d.y == 0.0, d.z == 0.0],
            neg: [d.x < 0.0, d.y < 0.0, d.z < 0.0],
        }
    }

    #[inline]
    fn overlaps(&self, b: &Aabb, t_far: f32) -> bool {
        let mut t0 = 0.0f32;
        let mut t1 = t_far;
        for axis in 0..3 {
            let o = self.origin[axis];
            if self.zero[axis] {
                if o < b.min[axis] || o > b.max[axis] {
                    return false;
                }
                continue;
            }
            let a = (b.min[axis] - o) * self.inv[axis];
            let c = (b.max[axis] - o) * self.inv[axis];
            let (near, far) = if a <= c { (a, c) } else { (c, a) };
            t0 = t0.max(near);
            t1 = t1.min(far * SLAB_WIDEN);
        }
        t0 <= t1
    }
}

fn traverse(
    bvh: &Bvh,
    ray: &Ray,
    mode: TraceMode,
    mut log: Option<&mut Vec<u32>>,
) -> (HitRecord, TraversalCounters) {
    let prep = RayPrep::new(ray);
    let mut counters = TraversalCounters::default();
    let mut best = HitRecord::MISS;
    let mut stack = [0u32; STACK_SIZE];
    let mut sp = 1usize;
    while sp > 0 {
        sp -= 1;
        let ni = stack[sp];
        let node = &bvh.nodes[ni as usize];
        counters.node_visits += 1;
        if let Some(l) = log.as_deref_mut() {
            l.push(ni);
        }
        let limit = if best.hit { best.t } else { ray.tmax };
        if !prep.overlaps(&node.bounds, limit) {
            continue;
        }
        match node.kind {
            NodeKind::Leaf { first, count } => {
                for i in first..first + count {
                    counters.triangle_tests += 1;
                    let Some(t) = bvh.triangles[i as usize].intersect(ray.origin, ray.direction) else {
                        continue;
                    };
                    match mode {
                        TraceMode::Any if t < ray.tmax => {
                            let hit = HitRecord {
                                t,
                                triangle: bvh.tri_ids[i as usize],
                                hit: true,
                            };
                            return (hit, counters);
                        }
                        TraceMode::Closest if t <= ray.tmax && t < best.t => {
                            best = HitRecord {
                                t,
                                triangle: bvh.tri_ids[i as usize],
                                hit: true,
                            };
                        }
                        _ => {}
                    }
                }
            }
            NodeKind::Interior { left, right, axis } => {
                let (near, far) = if prep.neg[axis as usize] { (right, left) } else { (left, right) };
                debug_assert!(sp + 2 <= STACK_SIZE);
                stack[sp] = far;
                stack[sp + 1] = near;
                sp += 2;
            }
        }
    }
    (best, counters)
}

/// Nearest intersection in `(T_MIN, tmax]`.
pub fn closest_hit(bvh: &Bvh, ray: &Ray) -> (HitRecord, TraversalCounters) {
    traverse(bvh, ray, TraceMode::Closest, None)
}

/// True if anything lies in `(T_MIN, tmax)`; stops at the first hit found.
pub fn any_hit(bvh: &Bvh, ray: &Ray) -> (bool, TraversalCounters) {
    let (h, c) = traverse(bvh, ray, TraceMode::Any, None);
    (h.hit, c)
}

/// Like [`closest_hit`]/[`any_hit`] but returns the full record and appends
/// every visited node id to `log`.
pub fn trace_logged(bvh: &Bvh, ray: &Ray, mode: TraceMode, log: &mut Vec<u32>) -> (HitRecord, TraversalCounters) {
    traverse(bvh, ray, mode, Some(log))
}

/// Full record without logging.
pub fn trace_ray(bvh: &Bvh, ray: &Ray, mode: TraceMode) -> (HitRecord, TraversalCounters) {
    traverse(bvh, ray, mode, None)
}

/// Brute-force reference: tests every triangle with the same predicate and
/// range rules as the BVH kernel.
pub fn brute_force(triangles: &[Triangle], ray: &Ray, mode: TraceMode) -> HitRecord {
    let mut best = HitRecord::MISS;
    for (i, tri) in triangles.iter().enumerate() {
        let Some(t) = tri.intersect(ray.origin, ray.direction) else {
            continue;
        };
        match mode {
            TraceMode::Any if t < ray.tmax => {
                return HitRecord {
                    t,
                    triangle: i as u32,
                    hit: true,
                }
            }
            TraceMode::Closest if t <= ray.tmax && t < best.t => {
                best = HitRecord {
                    t,
                    triangle: i as u32,
                    hit: true,
                };
            }
            _ => {}
        }
    }
    best
}

/// Lockstep efficiency of `step_counts` grouped into warps of `warp_size`
/// consecutive rays: `sum / (size * max)` per warp, averaged with each warp
/// weighted by its step total. All-zero warps are skipped; a batch with no
/// work at all reports 1.0.
pub fn warp_efficiency(step_counts: &[u32], warp_size: usize) -> Result<f64> {
    if step_counts.is_empty() {
        return Err(Error::Empty);
    }
    if warp_size == 0 {
        return Err(Error::InvalidWarpSize(0));
    }
    let mut weighted = 0.0f64;
    let mut total = 0.0f64;
    for group in step_counts.chunks(warp_size) {
        let max = *group.iter().max().unwrap() as f64;
        if max == 0.0 {
            continue;
        }
        let sum: f64 = group.iter().map(|&s| s as f64).sum();
        let eff = sum / (group.len() as f64 * max);
        weighted += eff * sum;
        total += sum;
    }
    Ok(if total > 0.0 { weighted / total } else { 1.0 })
}

/// Execution slots a lockstep machine spends: `size * max` per warp.
pub fn lockstep_steps(step_counts: &[u32], warp_size: usize) -> u64 {
    step_counts
        .chunks(warp_size.max(1))
        .map(|g| g.len() as u64 * *g.iter().max().unwrap_or(&0) as u64)
        .sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CacheConfig {
    pub size_bytes: usize,
    pub line_bytes: usize,
    pub ways: usize,
    /// Bytes per BVH node; node `i` lives at address `i * node_stride`.
    pub node_stride: usize,
}

impl Default for CacheConfig {
    fn default() -> Self {
        Self {
            size_bytes: 32 * 1024,
            line_bytes: 128,
            ways: 4,
            node_stride: 32,
        }
    }
}

impl CacheConfig {
    pub fn sets(&self) -> usize {
        (self.size_bytes / self.line_bytes / self.ways).max(1)
    }
}

/// Set-associative cache with true LRU replacement.
#[derive(Clone, Debug)]
pub struct LruCache {
    cfg: CacheConfig,
    sets: usize,
    tags: Vec<u64>,
    stamps: Vec<u64>,
    clock: u64,
    hits: u64,
    accesses: u64,
}

impl LruCache {
    pub fn new(cfg: CacheConfig) -> Self {
        let sets = cfg.sets();
        Self {
            cfg,
            sets,
            tags: vec![u64::MAX; sets * cfg.ways],
            stamps: vec![0; sets * cfg.ways],
            clock: 0,
            hits: 0,
            accesses: 0,
        }
    }

    pub fn reset(&mut self) {
        self.tags.fill(u64::MAX);
        self.stamps.fill(0);
        self.clock = 0;
        self.hits = 0;
        self.accesses = 0;
    }

    /// Returns true on a hit.
    pub fn access(&mut self, addr: u64) -> bool {
        self.clock += 1;
        self.accesses += 1;
        let line = addr / self.cfg.line_bytes as u64;
        let set = (line % self.sets as u64) as usize;
        let tag = line / self.sets as u64;
        let ways = self.cfg.ways;
        let base = set * ways;
        let slots = base..base + ways;
        if let Some(w) = slots.clone().find(|&w| self.tags[w] == tag) {
            self.stamps[w] = self.clock;
            self.hits += 1;
            return true;
        }
        let victim = slots.min_by_key(|&w| self.stamps[w]).unwrap();
        self.tags[victim] = tag;
        self.stamps[victim] = self.clock;
        false
    }

    pub fn access_node(&mut self, node: u32) -> bool {
        self.access(node as u64 * self.cfg.node_stride as u64)
    }

    pub fn hits(&self) -> u64 {
        self.hits
    }

    pub fn accesses(&self) -> u64 {
        self.accesses
    }
}

/// Hit rate of a node-access trace on a cold cache; 1.0 for an empty trace.
pub fn cache_simulate(node_trace: &[u32], cfg: CacheConfig) -> f64 {
    if node_trace.is_empty() {
        return 1.0;
    }
    let mut cache = LruCache::new(cfg);
    for &n in node_trace {
        cache.access_node(n);
    }
    cache.hits() as f64 / cache.accesses() as f64
}

/// Merges per-ray visit logs the way a lockstep warp issues them: step `k`
/// of every ray, then step `k + 1`, and so on.
pub fn interleave_lockstep<L: AsRef<[u32]>>(logs: &[L]) -> Vec<u32> {
    let max = logs.iter().map(|l| l.as_ref().len()).max().unwrap_or(0);
    let mut out = Vec::with_capacity(logs.iter().map(|l| l.as_ref().len()).sum());
    for k in 0..max {
        for l in logs {
            if let Some(&n) = l.as_ref().get(k) {
                out.push(n);
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RayTrace {
    pub hit: HitRecord,
    pub counters: TraversalCounters,
}

/// Per-warp result, merged in warp order by [`WarpTotals::add`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct WarpTrace {
    pub rays: Vec<RayTrace>,
    pub cache_hits: u64,
    pub cache_accesses: u64,
}

/// Reusable buffers for [`trace_warp`].
#[derive(Default)]
pub struct WarpScratch {
    logs: Vec<Vec<u32>>,
    cache: Option<LruCache>,
}

/// Traces one warp, then replays its node accesses in lockstep order
/// through a cold cache.
pub fn trace_warp(
    bvh: &Bvh,
    rays: &[Ray],
    mode: TraceMode,
    cache_cfg: CacheConfig,
    scratch: &mut WarpScratch,
) -> WarpTrace {
    if scratch.logs.len() < rays.len() {
        scratch.logs.resize_with(rays.len(), Vec::new);
    }
    let mut out = Vec::with_capacity(rays.len());
    for (ray, log) in rays.iter().zip(scratch.logs.iter_mut()) {
        log.clear();
        let (hit, counters) = trace_logged(bvh, ray, mode, log);
        out.push(RayTrace { hit, counters });
    }
    let cache = scratch.cache.get_or_insert_with(|| LruCache::new(cache_cfg));
    cache.reset();
    let logs = &scratch.logs[..rays.len()];
    let max = logs.iter().map(Vec::len).max().unwrap_or(0);
    for k in 0..max {
        for l in logs {
            if let Some(&n) = l.get(k) {
                cache.access_node(n);
            }
        }
    }
    WarpTrace {
        rays: out,
        cache_hits: cache.hits(),
        cache_accesses: cache.accesses(),
    }
}

/// Batch-level metrics.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TraceStats {
    pub rays: usize,
    pub warp_size: usize,
    pub node_visits: u64,
    pub triangle_tests: u64,
    pub warp_efficiency: f64,
    /// Lockstep execution slots (see [`lockstep_steps`]).
    pub lockstep_steps: u64,
    pub cache_hits: u64,
    pub cache_accesses: u64,
    pub cache_hit_rate: f64,
    /// Filled in by callers that own a clock.
    pub wall_time_ms: f64,
}

/// Cycles charged per simulated cache miss in [`TraceStats::simulated_cost`].
pub const DEFAULT_MISS_PENALTY: f64 = 4.0;

impl TraceStats {
    /// Simulated cost: lockstep node steps plus a penalty per cache miss.
    pub fn simulated_cost(&self, miss_penalty: f64) -> f64 {
        self.lockstep_steps as f64 + miss_penalty * (self.cache_accesses - self.cache_hits) as f64
    }

    /// Builds stats from per-ray traces in batch order and per-warp cache
    /// counts.
    pub fn from_parts(rays: &[RayTrace], warp_size: usize, cache_hits: u64, cache_accesses: u64) -> Self {
        let steps: Vec<u32> = rays.iter().map(|r| r.counters.node_visits).collect();
        Self {
            rays: rays.len(),
            warp_size,
            node_visits: steps.iter().map(|&s| s as u64).sum(),
            triangle_tests: rays.iter().map(|r| r.counters.triangle_tests as u64).sum(),
            warp_efficiency: if steps.is_empty() { 1.0 } else { warp_efficiency(&steps, warp_size).unwrap_or(1.0) },
            lockstep_steps: lockstep_steps(&steps, warp_size),
            cache_hits,
            cache_accesses,
            cache_hit_rate: if cache_accesses == 0 { 1.0 } else { cache_hits as f64 / cache_accesses as f64 },
            wall_time_ms: 0.0,
        }
    }
}

pub fn check_warp_size(warp_size: usize) -> Result<()> {
    match warp_size {
        32 | 64 => Ok(()),
        w => Err(Error::InvalidWarpSize(w)),
    }
}

/// Sequential batch trace with warp and cache instrumentation.
pub fn trace_batch(
    bvh: &Bvh,
    rays: &[Ray],
    mode: TraceMode,
    warp_size: usize,
    cache_cfg: CacheConfig,
) -> Result<(Vec<RayTrace>, TraceStats)> {
    check_warp_size(warp_size)?;
    let mut scratch = WarpScratch::default();
    let mut all = Vec::with_capacity(rays.len());
    let (mut hits, mut accesses) = (0, 0);
    for warp in rays.chunks(warp_size) {
        let w = trace_warp(bvh, warp, mode, cache_cfg, &mut scratch);
        hits += w.cache_hits;
        accesses += w.cache_accesses;
        all.extend(w.rays);
    }
    let stats = TraceStats::from_parts(&all, warp_size, hits, accesses);
    Ok((all, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::RayKind;

    fn tri(a: [f32; 3], b: [f32; 3], c: [f32; 3]) -> Triangle {
        Triangle::new(a.into(), b.into(), c.into())
    }

    fn ray(o: [f32; 3], d: [f32; 3], tmax: f32) -> Ray {
        Ray::new(o.into(), Vec3::from(d).normalized(), tmax, RayKind::Secondary).unwrap()
    }

    #[test]
    fn single_triangle_bvh() {
        let t = tri([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]);
        let bvh = Bvh::build(&[t]).unwrap();
        assert_eq!(bvh.nodes().len(), 1);
        assert_eq!(bvh.bounds(), t.bounds());
        assert!(matches!(bvh.nodes()[0].kind, NodeKind::Leaf { count: 1, .. }));
        assert!(matches!(Bvh::build(&[]), Err(Error::Empty)));
    }

    #[test]
    fn two_distant_triangles_split() {
        let a = tri([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]);
        let b = tri([100.0, 0.0, 0.0], [101.0, 0.0, 0.0], [100.0, 1.0, 0.0]);
        let bvh = Bvh::build(&[a, b]).unwrap();
        assert_eq!(bvh.nodes().len(), 3);
        let NodeKind::Interior { left, right, .. } = bvh.nodes()[0].kind else {
            panic!("root should be interior");
        };
        for child in [left, right] {
            assert!(matches!(bvh.nodes()[child as usize].kind, NodeKind::Leaf { count: 1, .. }));
            assert!(bvh.bounds().contains_box(&bvh.nodes()[child as usize].bounds));
        }
    }

    #[test]
    fn perpendicular_hit_and_miss() {
        let t = tri([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]);
        let bvh = Bvh::build(&[t]).unwrap();
        let c = t.centroid();
        let (h, counters) = closest_hit(&bvh, &ray([c.x, c.y, 2.0], [0.0, 0.0, -1.0], f32::INFINITY));
        assert!(h.hit);
        assert!((h.t - 2.0).abs() < 1e-6);
        assert_eq!(h.triangle, 0);
        assert!(counters.node_visits >= 1);
        let (h, _) = closest_hit(&bvh, &ray([c.x, c.y, 2.0], [0.0, 0.0, 1.0], f32::INFINITY));
        assert!(!h.hit);
        let (short, _) = closest_hit(&bvh, &ray([c.x, c.y, 2.0], [0.0, 0.0, -1.0], 1.0));
        assert!(!short.hit);
    }

    #[test]
    fn any_hit_stops_early() {
        let tris: Vec<Triangle> = (0..16)
            .map(|i| {
                let z = i as f32;
                tri([-5.0, -5.0, z], [5.0, -5.0, z], [-5.0, 5.0, z])
            })
            .collect();
        let bvh = Bvh::build(&tris).unwrap();
        let r = ray([-1.0, -1.0, -1.0], [0.0, 0.0, 1.0], 100.0);
        let (occluded, a) = any_hit(&bvh, &r);
        let (_, c) = closest_hit(&bvh, &r);
        assert!(occluded);
        assert!(a.triangle_tests <= c.triangle_tests);
        let free = ray([-1.0, -1.0, -1.0], [0.0, 0.0, -1.0], 100.0);
        assert!(!any_hit(&bvh, &free).0);
        // tmax exclusive for any-hit
        let exact = ray([-1.0, -1.0, -1.0], [0.0, 0.0, 1.0], 1.0);
        assert!(!any_hit(&bvh, &exact).0);
    }

    #[test]
    fn warp_efficiency_examples() {
        assert_eq!(warp_efficiency(&[4, 4, 4, 4], 4).unwrap(), 1.0);
        assert_eq!(warp_efficiency(&[4, 0, 0, 0], 4).unwrap(), 0.25);
        assert_eq!(warp_efficiency(&[2, 4], 2).unwrap(), 0.75);
        assert_eq!(warp_efficiency(&[7], 32).unwrap(), 1.0);
        assert_eq!(warp_efficiency(&[0, 0, 3, 3], 2).unwrap(), 1.0);
        assert_eq!(warp_efficiency(&[], 2), Err(Error::Empty));
        // trailing partial group counts its actual size
        assert_eq!(warp_efficiency(&[2, 2, 4], 2).unwrap(), 1.0);
    }

    #[test]
    fn lru_cache_examples() {
        let cfg = CacheConfig::default();
        assert_eq!(cfg.sets(), 64);
        assert_eq!(cache_simulate(&[], cfg), 1.0);
        let rate = cache_simulate(&[5; 100], cfg);
        assert!((rate - 0.99).abs() < 1e-12);
        // 256 lines of working set fit exactly; second pass hits everywhere
        let pass: Vec<u32> = (0..1024).collect();
        let mut cache = LruCache::new(cfg);
        for &n in &pass {
            cache.access_node(n);
        }
        let first_hits = cache.hits();
        for &n in &pass {
            assert!(cache.access_node(n));
        }
        assert_eq!(cache.hits() - first_hits, 1024);
    }

    #[test]
    fn lru_evicts_oldest() {
        let cfg = CacheConfig {
            size_bytes: 4 * 128,
            line_bytes: 128,
            ways: 2,
            node_stride: 128,
        };
        let mut c = LruCache::new(cfg);
        // sets = 2; nodes 0, 2, 4 map to set 0
        assert!(!c.access_node(0));
        assert!(!c.access_node(2));
        assert!(c.access_node(0));
        assert!(!c.access_node(4)); // evicts 2
        assert!(c.access_node(0));
        assert!(!c.access_node(2));
    }

    #[test]
    fn lockstep_interleave_order() {
        let logs = [vec![1, 2, 3], vec![4], vec![5, 6]];
        assert_eq!(interleave_lockstep(&logs), vec![1, 4, 5, 2, 6, 3]);
    }

    #[test]
    fn identical_rays_are_fully_efficient() {
        let tris: Vec<Triangle> = (0..50)
            .map(|i| {
                let x = i as f32 * 0.3;
                tri([x, 0.0, 0.0], [x + 0.2, 0.0, 0.0], [x, 0.2, 0.1])
            })
            .collect();
        let bvh = Bvh::build(&tris).unwrap();
        let r = ray([3.05, 0.05, 2.0], [0.0, 0.0, -1.0], f32::INFINITY);
        let rays = vec![r; 100];
        let (_, stats) = trace_batch(&bvh, &rays, TraceMode::Closest, 32, CacheConfig::default()).unwrap();
        assert_eq!(stats.warp_efficiency, 1.0);
        let (_, single) = trace_batch(&bvh, &rays[..1], TraceMode::Closest, 64, CacheConfig::default()).unwrap();
        assert_eq!(single.warp_efficiency, 1.0);
        assert!(trace_batch(&bvh, &rays, TraceMode::Closest, 48, CacheConfig::default()).is_err());
    }
}
