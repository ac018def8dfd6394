//! Benchmark orchestration: every traced batch of a render is reordered by
//! every method, traced with instrumentation, and reported as one CSV row.

use std::io::{Read, Write};
use std::time::Instant;

use rayon::prelude::*;
use raysort_core::coherence::{to_point, Point, DEFAULT_SUBSET};
use raysort_core::estimator::{miss_termination, AccumulationShard, LengthHashTable};
use raysort_core::tracer::{Bvh, CacheConfig, HitRecord, TraceMode, DEFAULT_MISS_PENALTY};
use raysort_core::{KeyBounds, KeyContext, KeyMethod, Ray, RayKind};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::pipeline::{elapsed_us, pipeline, us_to_ms, PipelineOptions};
use crate::render::{path_trace_with, BatchTracer, BounceBatch, RenderConfig, RenderOutput};
use crate::scene::Scene;

const ACCUM_SHARD: usize = 1 << 14;

#[derive(Clone, Debug, PartialEq)]
pub struct BenchConfig {
    pub render: RenderConfig,
    pub cache: CacheConfig,
    pub miss_penalty: f64,
    /// Keep shadow-ray lengths in their own adaptive table.
    pub separate_shadow_table: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            render: RenderConfig::default(),
            cache: CacheConfig::default(),
            miss_penalty: DEFAULT_MISS_PENALTY,
            separate_shadow_table: false,
        }
    }
}

/// One `(scene, bounce, kind, method)` measurement. Times are milliseconds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub scene: String,
    pub method: String,
    pub bounce: u32,
    pub kind: String,
    pub rays: usize,
    pub code_ms: f64,
    pub sort_ms: f64,
    pub reorder_ms: f64,
    pub accum_ms: f64,
    /// `code_ms + sort_ms + reorder_ms + accum_ms`.
    pub overhead_ms: f64,
    /// Part of `code_ms` spent in the Two Point Real pre-trace.
    pub pretrace_ms: f64,
    pub pretrace_node_visits: u64,
    pub trace_ms: f64,
    pub node_visits: u64,
    pub triangle_tests: u64,
    pub lockstep_steps: u64,
    pub warp_efficiency: f64,
    pub cache_hit_rate: f64,
    pub sim_cost: f64,
    /// Mean capsule area over 64-ray subsets; empty for batches under 64 rays.
    pub measure: Option<f64>,
    pub rel_measure: Option<f64>,
    pub rel_sim_cost: f64,
    pub rel_trace_ms: f64,
    pub rel_warp_efficiency: f64,
    pub rel_cache_hit_rate: f64,
}

impl BenchRow {
    pub const WALL_TIME_COLUMNS: [&'static str; 8] = [
        "code_ms",
        "sort_ms",
        "reorder_ms",
        "accum_ms",
        "overhead_ms",
        "pretrace_ms",
        "trace_ms",
        "rel_trace_ms",
    ];

    /// Copy with every wall-clock column zeroed.
    pub fn without_wall_time(&self) -> BenchRow {
        BenchRow {
            code_ms: 0.0,
            sort_ms: 0.0,
            reorder_ms: 0.0,
            accum_ms: 0.0,
            overhead_ms: 0.0,
            pretrace_ms: 0.0,
            trace_ms: 0.0,
            rel_trace_ms: 0.0,
            ..self.clone()
        }
    }

    pub fn ray_kind(&self) -> Option<RayKind> {
        match self.kind.as_str() {
            "primary" => Some(RayKind::Primary),
            "secondary" => Some(RayKind::Secondary),
            "shadow" => Some(RayKind::Shadow),
            _ => None,
        }
    }
}

fn ratio(a: f64, b: f64) -> f64 {
    a / b
}

/// Fills the `rel_*` columns of a batch's rows against its Unsorted row.
fn fill_relative(rows: &mut [BenchRow]) -> Result<()> {
    let base = rows
        .iter()
        .find(|r| r.method == KeyMethod::Unsorted.name())
        .cloned()
        .ok_or_else(|| Error::Config("batch has no unsorted baseline".into()))?;
    for r in rows.iter_mut() {
        if r.method == base.method {
            r.rel_measure = r.measure.map(|_| 1.0);
            r.rel_sim_cost = 1.0;
            r.rel_trace_ms = 1.0;
            r.rel_warp_efficiency = 1.0;
            r.rel_cache_hit_rate = 1.0;
            continue;
        }
        r.rel_measure = match (r.measure, base.measure) {
            (Some(m), Some(b)) => Some(ratio(m, b)),
            _ => None,
        };
        r.rel_sim_cost = ratio(r.sim_cost, base.sim_cost);
        r.rel_trace_ms = ratio(r.trace_ms, base.trace_ms);
        r.rel_warp_efficiency = ratio(r.warp_efficiency, base.warp_efficiency);
        r.rel_cache_hit_rate = ratio(r.cache_hit_rate, base.cache_hit_rate);
    }
    Ok(())
}

/// Methods to run, Unsorted first and without duplicates.
pub fn method_list(methods: &[KeyMethod]) -> Vec<KeyMethod> {
    let mut out = vec![KeyMethod::Unsorted];
    for &m in methods {
        if !out.contains(&m) {
            out.push(m);
        }
    }
    out
}

/// Instrumented tracer installed in the renderer during a benchmark.
pub struct BenchTracer<'a> {
    scene: &'a Scene,
    bvh: &'a Bvh,
    cfg: &'a BenchConfig,
    methods: Vec<KeyMethod>,
    bounds: KeyBounds,
    table: LengthHashTable,
    shadow_table: Option<LengthHashTable>,
    pub rows: Vec<BenchRow>,
}

impl<'a> BenchTracer<'a> {
    pub fn new(scene: &'a Scene, bvh: &'a Bvh, cfg: &'a BenchConfig) -> Result<Self> {
        let bounds = KeyBounds::new(scene.bounds)?;
        Ok(Self {
            scene,
            bvh,
            cfg,
            methods: method_list(&cfg.render.methods),
            bounds,
            table: LengthHashTable::new(bounds),
            shadow_table: cfg.separate_shadow_table.then(|| LengthHashTable::new(bounds)),
            rows: Vec::new(),
        })
    }

    pub fn table(&self) -> &LengthHashTable {
        &self.table
    }

    fn table_for(&self, kind: RayKind) -> &LengthHashTable {
        match (&self.shadow_table, kind) {
            (Some(t), RayKind::Shadow) => t,
            _ => &self.table,
        }
    }

    /// Termination points used by the coherence measure: traced hit points,
    /// otherwise the scene exit capped at `tmax`.
    fn terminations(&self, rays: &[Ray], hits: &[HitRecord]) -> Vec<Point> {
        rays.par_iter()
            .zip(hits.par_iter())
            .map(|(r, h)| to_point(if h.hit { r.at(h.t) } else { miss_termination(r, &self.scene.bounds) }))
            .collect()
    }

    fn accumulate(&mut self, batch: &BounceBatch, hits: &[HitRecord], mode: TraceMode) -> Result<u64> {
        let start = Instant::now();
        // Shadow rays that reach the light end at tmax.
        let dists: Vec<Option<f32>> = batch
            .rays
            .iter()
            .zip(hits)
            .map(|(r, h)| match (h.hit, mode) {
                (true, _) => Some(h.t),
                (false, TraceMode::Any) => Some(r.tmax),
                (false, TraceMode::Closest) => None,
            })
            .collect();
        let table = self.table_for(batch.kind);
        let shards = batch
            .rays
            .par_chunks(ACCUM_SHARD)
            .zip(dists.par_chunks(ACCUM_SHARD))
            .map(|(r, d)| table.record_shard(r, d))
            .collect::<raysort_core::Result<Vec<AccumulationShard>>>()?;
        let table = match (&mut self.shadow_table, batch.kind) {
            (Some(t), RayKind::Shadow) => t,
            _ => &mut self.table,
        };
        for s in &shards {
            table.merge(s);
        }
        Ok(elapsed_us(start))
    }
}

impl BatchTracer for BenchTracer<'_> {
    fn trace(&mut self, batch: &BounceBatch, mode: TraceMode) -> Result<Vec<HitRecord>> {
        let cfg = self.cfg;
        let plan = cfg.render.plan;
        let ctx = KeyContext::new(self.bounds, plan.key_bits)
            .with_table(self.table_for(batch.kind))
            .with_tracer(self.bvh);
        let mut rows = Vec::with_capacity(self.methods.len());
        let mut base_hits: Vec<HitRecord> = Vec::new();
        let mut terms: Vec<Point> = Vec::new();
        for &method in &self.methods {
            let rep = pipeline(&batch.rays, method, &ctx, plan, PipelineOptions::default())?;
            let ordered = rep.rays.as_deref().unwrap_or(&batch.rays);

            let start = Instant::now();
            let (traces, mut stats) = par::trace_batch(self.bvh, ordered, mode, cfg.render.warp_size, cfg.cache)?;
            let trace_us = elapsed_us(start);
            stats.wall_time_ms = us_to_ms(trace_us);

            if method == KeyMethod::Unsorted {
                base_hits = traces.iter().map(|t| t.hit).collect();
                terms = self.terminations(&batch.rays, &base_hits);
            }
            let measure = if batch.len() >= DEFAULT_SUBSET {
                let o: Vec<Point> = rep.order.par_iter().map(|&i| to_point(batch.rays[i as usize].origin)).collect();
                let t: Vec<Point> = rep.order.par_iter().map(|&i| terms[i as usize]).collect();
                Some(par::mean_measure(&o, &t, DEFAULT_SUBSET)?.mean)
            } else {
                None
            };
            let pre = rep.pretrace.unwrap_or_default();
            let [code_ms, sort_ms, reorder_ms, accum_ms] = rep.timings.phases_ms();
            rows.push(BenchRow {
                scene: self.scene.name.clone(),
                method: method.name().into(),
                bounce: batch.bounce,
                kind: batch.kind.as_str().into(),
                rays: batch.len(),
                code_ms,
                sort_ms,
                reorder_ms,
                accum_ms,
                overhead_ms: rep.timings.total_ms(),
                pretrace_ms: us_to_ms(pre.us),
                pretrace_node_visits: pre.node_visits,
                trace_ms: stats.wall_time_ms,
                node_visits: stats.node_visits,
                triangle_tests: stats.triangle_tests,
                lockstep_steps: stats.lockstep_steps,
                warp_efficiency: stats.warp_efficiency,
                cache_hit_rate: stats.cache_hit_rate,
                sim_cost: stats.simulated_cost(cfg.miss_penalty),
                measure,
                rel_measure: None,
                rel_sim_cost: 1.0,
                rel_trace_ms: 1.0,
                rel_warp_efficiency: 1.0,
                rel_cache_hit_rate: 1.0,
            });
        }

        // Accumulation follows the trace and is charged to the adaptive method.
        if let Some(pos) = self.methods.iter().position(|&m| m == KeyMethod::TwoPointAdaptive) {
            let accum_us = self.accumulate(batch, &base_hits, mode)?;
            let row = &mut rows[pos];
            row.accum_ms = us_to_ms(accum_us);
            row.overhead_ms = row.code_ms + row.sort_ms + row.reorder_ms + row.accum_ms;
        }
        fill_relative(&mut rows)?;
        self.rows.extend(rows);
        Ok(base_hits)
    }
}

/// Traces every batch in the order of a single method and scatters the
/// hits back, keeping its own adaptive table up to date.
pub struct SortedTracer<'a> {
    bvh: &'a Bvh,
    method: KeyMethod,
    plan: raysort_core::sort::SortPlan,
    bounds: KeyBounds,
    table: LengthHashTable,
}

impl<'a> SortedTracer<'a> {
    pub fn new(scene: &Scene, bvh: &'a Bvh, method: KeyMethod, plan: raysort_core::sort::SortPlan) -> Result<Self> {
        let bounds = KeyBounds::new(scene.bounds)?;
        Ok(Self {
            bvh,
            method,
            plan,
            bounds,
            table: LengthHashTable::new(bounds),
        })
    }
}

impl BatchTracer for SortedTracer<'_> {
    fn trace(&mut self, batch: &BounceBatch, mode: TraceMode) -> Result<Vec<HitRecord>> {
        let ctx = KeyContext::new(self.bounds, self.plan.key_bits)
            .with_table(&self.table)
            .with_tracer(self.bvh);
        let rep = pipeline(&batch.rays, self.method, &ctx, self.plan, PipelineOptions::default())?;
        let ordered = rep.rays.as_deref().unwrap_or(&batch.rays);
        let hits: Vec<HitRecord> = ordered
            .par_iter()
            .map(|r| raysort_core::tracer::trace_ray(self.bvh, r, mode).0)
            .collect();
        let hits = match &rep.inverse {
            Some(inv) => par::scatter_with_inverse(&hits, inv),
            None => hits,
        };
        if self.method == KeyMethod::TwoPointAdaptive {
            let dists: Vec<Option<f32>> = batch
                .rays
                .iter()
                .zip(&hits)
                .map(|(r, h)| match (h.hit, mode) {
                    (true, _) => Some(h.t),
                    (false, TraceMode::Any) => Some(r.tmax),
                    (false, TraceMode::Closest) => None,
                })
                .collect();
            self.table.accumulate(&batch.rays, &dists)?;
        }
        Ok(hits)
    }
}

pub struct BenchOutput {
    pub rows: Vec<BenchRow>,
    pub renders: Vec<RenderOutput>,
}

/// Renders every scene with the instrumented tracer. The adaptive table
/// lives for one scene and is updated after every traced batch.
pub fn run_benchmark(cfg: &BenchConfig, scenes: &[Scene]) -> Result<BenchOutput> {
    if scenes.is_empty() {
        return Err(Error::Config("no scenes".into()));
    }
    cfg.render.validate()?;
    let mut rows = Vec::new();
    let mut renders = Vec::new();
    for scene in scenes {
        let bvh = scene.build_bvh()?;
        let mut tracer = BenchTracer::new(scene, &bvh, cfg)?;
        let out = path_trace_with(scene, &cfg.render, &mut tracer)?;
        rows.append(&mut tracer.rows);
        renders.push(out);
    }
    Ok(BenchOutput { rows, renders })
}

pub fn write_csv<W: Write>(rows: &[BenchRow], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(r: R) -> Result<Vec<BenchRow>> {
    let mut rd = csv::Reader::from_reader(r);
    rd.deserialize().map(|r| r.map_err(Error::from)).collect()
}
