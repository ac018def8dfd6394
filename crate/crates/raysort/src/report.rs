//! Correlation between relative coherence and relative trace cost.

use std::collections::BTreeMap;

use raysort_core::coherence::pearson;
use raysort_core::{KeyMethod, RayKind};

use crate::bench::BenchRow;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct KindCorrelation {
    pub kind: RayKind,
    /// Number of `(method, bounce, scene)` points pooled.
    pub points: usize,
    /// Pearson r of relative measure against relative simulated cost.
    pub pooled: f64,
    /// Same against relative wall-clock trace time; `None` when undefined.
    pub pooled_wall: Option<f64>,
    /// Per-scene r against simulated cost, in scene-name order.
    pub per_scene: Vec<(String, Option<f64>)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationSummary {
    pub secondary: KindCorrelation,
    pub shadow: KindCorrelation,
}

fn usable(r: &BenchRow, kind: RayKind, min_bounce: u32) -> Option<(f64, f64, f64)> {
    if r.ray_kind() != Some(kind) || r.bounce < min_bounce || r.method == KeyMethod::Unsorted.name() {
        return None;
    }
    r.rel_measure.map(|m| (m, r.rel_sim_cost, r.rel_trace_ms))
}

fn correlate_kind(rows: &[BenchRow], kind: RayKind, min_bounce: u32) -> Result<KindCorrelation> {
    let mut pooled = (Vec::new(), Vec::new(), Vec::new());
    let mut scenes: BTreeMap<&str, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for r in rows {
        if let Some((m, c, w)) = usable(r, kind, min_bounce) {
            pooled.0.push(m);
            pooled.1.push(c);
            pooled.2.push(w);
            let e = scenes.entry(r.scene.as_str()).or_default();
            e.0.push(m);
            e.1.push(c);
        }
    }
    if pooled.0.len() < 2 {
        return Err(Error::InsufficientData(format!("fewer than 2 {} points", kind.as_str())));
    }
    let r = pearson(&pooled.0, &pooled.1)?;
    let wall = if pooled.2.iter().all(|w| w.is_finite()) { pearson(&pooled.0, &pooled.2).ok() } else { None };
    Ok(KindCorrelation {
        kind,
        points: pooled.0.len(),
        pooled: r,
        pooled_wall: wall,
        per_scene: scenes
            .into_iter()
            .map(|(s, (m, c))| (s.to_string(), pearson(&m, &c).ok()))
            .collect(),
    })
}

/// Pearson r between relative measure and relative simulated trace cost for
/// secondary and shadow rays, pooled over methods, bounces and scenes and
/// per scene. Unsorted rows (always 1, 1) are left out.
pub fn correlate_report(rows: &[BenchRow]) -> Result<CorrelationSummary> {
    correlate_report_from(rows, 0)
}

/// [`correlate_report`] restricted to bounces `>= min_bounce`.
pub fn correlate_report_from(rows: &[BenchRow], min_bounce: u32) -> Result<CorrelationSummary> {
    let mut methods: Vec<&str> = rows
        .iter()
        .map(|r| r.method.as_str())
        .filter(|&m| m != KeyMethod::Unsorted.name())
        .collect();
    methods.sort_unstable();
    methods.dedup();
    if methods.len() < 2 {
        return Err(Error::InsufficientData("need at least 2 methods besides unsorted".into()));
    }
    Ok(CorrelationSummary {
        secondary: correlate_kind(rows, RayKind::Secondary, min_bounce)?,
        shadow: correlate_kind(rows, RayKind::Shadow, min_bounce)?,
    })
}
