use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use raysort::bench::{run_benchmark, write_csv, BenchConfig, SortedTracer};
use raysort::io::{load_table, read_rays, write_capsules_csv, write_ppm, write_rays};
use raysort::pipeline::{pipeline, us_to_ms, PipelineOptions};
use raysort::render::{path_trace_wavefront, path_trace_with, BounceBatch, RenderConfig};
use raysort::report::correlate_report;
use raysort::scene::Scene;
use raysort_core::coherence::{to_point, Point};
use raysort_core::estimator::{miss_termination, LengthHashTable};
use raysort_core::sort::SortPlan;
use raysort_core::tracer::closest_hit;
use raysort_core::{KeyBits, KeyBounds, KeyContext, KeyMethod, Ray, RayKind, Vec3};

#[derive(Parser)]
#[command(name = "raysort", version, about = "Ray sorting benchmark harness")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Render with every method and write per-batch metrics as CSV.
    Bench(BenchArgs),
    /// Render a scene to a binary PPM.
    Render(RenderArgs),
    /// Compute sorting keys for a ray batch.
    Keys(KeysArgs),
    /// Time the key/sort/reorder pipeline on random rays.
    Sortbench(SortbenchArgs),
    /// Dump fitted capsules of a reordered batch as CSV.
    Capsules(CapsulesArgs),
}

#[derive(Args, Clone)]
struct SceneArgs {
    /// OBJ path or `procedural:N`. Repeatable for `bench`.
    #[arg(long, default_value = "procedural:100")]
    scene: Vec<String>,
    #[arg(long, default_value_t = 256)]
    width: usize,
    #[arg(long, default_value_t = 256)]
    height: usize,
    #[arg(long, default_value_t = 8)]
    spp: usize,
    #[arg(long, default_value_t = 8)]
    bounces: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    scene: SceneArgs,
    /// Comma-separated method names or `all`.
    #[arg(long, default_value = "all")]
    methods: String,
    #[arg(long, default_value_t = 32)]
    key_bits: u32,
    /// 0 sorts globally; otherwise the block size.
    #[arg(long, default_value_t = 0)]
    segment: usize,
    #[arg(long, default_value_t = 64)]
    warp: usize,
    /// Keep shadow-ray lengths in a separate adaptive table.
    #[arg(long)]
    separate_shadow_table: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the coherence/cost correlation summary to stderr.
    #[arg(long)]
    correlate: bool,
}

#[derive(Args)]
struct RenderArgs {
    #[command(flatten)]
    scene: SceneArgs,
    #[arg(long, default_value = "render.ppm")]
    out: PathBuf,
    /// Trace every batch in this method's order (the image does not change).
    #[arg(long, default_value = "unsorted")]
    method: String,
}

#[derive(Args)]
struct BatchArgs {
    #[command(flatten)]
    scene: SceneArgs,
    /// Read rays from a RAYS dump instead of rendering.
    #[arg(long)]
    rays: Option<PathBuf>,
    /// Batch to capture when rendering.
    #[arg(long, default_value_t = 2)]
    bounce: u32,
    /// primary, secondary or shadow.
    #[arg(long, default_value = "secondary")]
    kind: String,
    /// Write the captured batch as a RAYS dump.
    #[arg(long)]
    dump_rays: Option<PathBuf>,
}

#[derive(Args)]
struct KeysArgs {
    #[command(flatten)]
    batch: BatchArgs,
    #[arg(long, default_value = "two-point-fixed")]
    method: String,
    #[arg(long, default_value_t = 32)]
    key_bits: u32,
    /// Adaptive-estimator snapshot (LHT1) to load.
    #[arg(long)]
    table: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SortbenchArgs {
    #[arg(long, default_value_t = 1_000_000)]
    n: usize,
    #[arg(long, default_value_t = 32)]
    key_bits: u32,
    #[arg(long, default_value_t = 0)]
    segment: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "origin")]
    method: String,
}

#[derive(Args)]
struct CapsulesArgs {
    #[command(flatten)]
    batch: BatchArgs,
    #[arg(long, default_value = "two-point-fixed")]
    method: String,
    #[arg(long, default_value_t = 64)]
    subset: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_methods(s: &str) -> Result<Vec<KeyMethod>> {
    if s == "all" {
        return Ok(KeyMethod::ALL.to_vec());
    }
    s.split(',')
        .map(|m| KeyMethod::from_str(m.trim()).map_err(|_| anyhow!("unknown method {m:?}")))
        .collect()
}

fn key_bits(b: u32) -> Result<KeyBits> {
    KeyBits::from_bits(b).ok_or_else(|| anyhow!("key bits must be 32 or 64"))
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn render_config(a: &SceneArgs) -> RenderConfig {
    RenderConfig {
        width: a.width,
        height: a.height,
        samples_per_pixel: a.spp,
        max_bounces: a.bounces,
        seed: a.seed,
        ..Default::default()
    }
}

fn first_scene(a: &SceneArgs) -> Result<Scene> {
    let spec = a.scene.first().ok_or_else(|| anyhow!("no scene given"))?;
    Ok(Scene::from_spec(spec, a.seed)?)
}

fn load_batch(a: &BatchArgs, scene: &Scene, bvh: &raysort_core::tracer::Bvh) -> Result<Vec<Ray>> {
    let rays = match &a.rays {
        Some(p) => read_rays(File::open(p).with_context(|| format!("opening {}", p.display()))?)?,
        None => {
            let kind = match a.kind.as_str() {
                "primary" => RayKind::Primary,
                "secondary" => RayKind::Secondary,
                "shadow" => RayKind::Shadow,
                k => bail!("unknown ray kind {k:?}"),
            };
            let mut cfg = render_config(&a.scene);
            cfg.keep_batches = true;
            cfg.max_bounces = cfg.max_bounces.max(a.bounce + 1);
            let out = path_trace_wavefront(scene, bvh, &cfg)?;
            let batch: BounceBatch = out
                .batches
                .into_iter()
                .find(|b| b.bounce == a.bounce && b.kind == kind)
                .ok_or_else(|| anyhow!("render produced no {} batch at bounce {}", a.kind, a.bounce))?;
            batch.rays
        }
    };
    if let Some(p) = &a.dump_rays {
        write_rays(&rays, BufWriter::new(File::create(p)?))?;
    }
    Ok(rays)
}

fn cmd_bench(a: BenchArgs) -> Result<()> {
    let bits = key_bits(a.key_bits)?;
    let mut render = render_config(&a.scene);
    render.methods = parse_methods(&a.methods)?;
    render.plan = SortPlan::new(a.segment, bits)?;
    render.warp_size = a.warp;
    let cfg = BenchConfig {
        render,
        separate_shadow_table: a.separate_shadow_table,
        ..Default::default()
    };
    let scenes = a
        .scene
        .scene
        .iter()
        .map(|s| Scene::from_spec(s, a.scene.seed))
        .collect::<raysort::Result<Vec<_>>>()?;
    let out = run_benchmark(&cfg, &scenes)?;
    write_csv(&out.rows, output(&a.out)?)?;
    if a.correlate {
        let s = correlate_report(&out.rows)?;
        for k in [&s.secondary, &s.shadow] {
            eprintln!("{}: r = {:.3} over {} points (wall time r = {:?})", k.kind.as_str(), k.pooled, k.points, k.pooled_wall);
            for (scene, r) in &k.per_scene {
                eprintln!("  {scene}: {r:?}");
            }
        }
    }
    Ok(())
}

fn cmd_render(a: RenderArgs) -> Result<()> {
    let scene = first_scene(&a.scene)?;
    let bvh = scene.build_bvh()?;
    let method = KeyMethod::from_str(&a.method).map_err(|_| anyhow!("unknown method {:?}", a.method))?;
    let cfg = render_config(&a.scene);
    let out = if method == KeyMethod::Unsorted {
        path_trace_wavefront(&scene, &bvh, &cfg)?
    } else {
        let mut tracer = SortedTracer::new(&scene, &bvh, method, cfg.plan)?;
        path_trace_with(&scene, &cfg, &mut tracer)?
    };
    write_ppm(&out.image, out.width, out.height, BufWriter::new(File::create(&a.out)?))?;
    for s in &out.summaries {
        eprintln!("bounce {} {}: {} rays", s.bounce, s.kind.as_str(), s.rays);
    }
    Ok(())
}

fn cmd_keys(a: KeysArgs) -> Result<()> {
    let scene = first_scene(&a.batch.scene)?;
    let bvh = scene.build_bvh()?;
    let rays = load_batch(&a.batch, &scene, &bvh)?;
    let bounds = KeyBounds::new(scene.bounds)?;
    let table = match &a.table {
        Some(p) => load_table(p, bounds)?,
        None => LengthHashTable::new(bounds),
    };
    let method = KeyMethod::from_str(&a.method).map_err(|_| anyhow!("unknown method {:?}", a.method))?;
    let ctx = KeyContext::new(bounds, key_bits(a.key_bits)?).with_table(&table).with_tracer(&bvh);
    let keys = raysort::par::compute_keys(&rays, method, &ctx)?;
    let mut w = output(&a.out)?;
    writeln!(w, "index,key")?;
    for (i, k) in keys.iter().enumerate() {
        writeln!(w, "{i},{k}")?;
    }
    Ok(())
}

fn cmd_sortbench(a: SortbenchArgs) -> Result<()> {
    let bits = key_bits(a.key_bits)?;
    let method = KeyMethod::from_str(&a.method).map_err(|_| anyhow!("unknown method {:?}", a.method))?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let rays = (0..a.n)
        .map(|_| {
            let o = Vec3::new(rng.random(), rng.random(), rng.random());
            let d = loop {
                let v = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                let l = v.length();
                if l > 1e-3 && l <= 1.0 {
                    break v / l;
                }
            };
            Ray::new(o, d, f32::INFINITY, RayKind::Secondary)
        })
        .collect::<raysort_core::Result<Vec<_>>>()?;
    let bounds = KeyBounds::new(raysort_core::Aabb::new(Vec3::ZERO, Vec3::ONE)?)?;
    let table = LengthHashTable::new(bounds);
    let ctx = KeyContext::new(bounds, bits).with_table(&table);
    let start = Instant::now();
    let rep = pipeline(&rays, method, &ctx, SortPlan::new(a.segment, bits)?, PipelineOptions::default())?;
    let wall = start.elapsed().as_secs_f64();
    let t = rep.timings;
    let mkeys = if t.sort_us == 0 { f64::NAN } else { a.n as f64 / t.sort_us as f64 };
    println!("n,key_bits,segment,method,code_ms,sort_ms,reorder_ms,accum_ms,total_ms,sort_mkeys_per_s,wall_s");
    println!(
        "{},{},{},{},{},{},{},{},{},{:.3},{:.3}",
        a.n,
        a.key_bits,
        a.segment,
        method,
        us_to_ms(t.code_us),
        us_to_ms(t.sort_us),
        us_to_ms(t.reorder_us),
        us_to_ms(t.accum_us),
        t.total_ms(),
        mkeys,
        wall
    );
    Ok(())
}

fn cmd_capsules(a: CapsulesArgs) -> Result<()> {
    let scene = first_scene(&a.batch.scene)?;
    let bvh = scene.build_bvh()?;
    let rays = load_batch(&a.batch, &scene, &bvh)?;
    let bounds = KeyBounds::new(scene.bounds)?;
    let table = LengthHashTable::new(bounds);
    let method = KeyMethod::from_str(&a.method).map_err(|_| anyhow!("unknown method {:?}", a.method))?;
    let ctx = KeyContext::new(bounds, KeyBits::B32).with_table(&table).with_tracer(&bvh);
    let rep = pipeline(&rays, method, &ctx, SortPlan::global(KeyBits::B32), PipelineOptions::default())?;
    let ordered = rep.rays.unwrap_or(rays);
    let origins: Vec<Point> = ordered.iter().map(|r| to_point(r.origin)).collect();
    let terms: Vec<Point> = ordered
        .iter()
        .map(|r| {
            let (h, _) = closest_hit(&bvh, r);
            to_point(if h.hit { r.at(h.t) } else { miss_termination(r, &scene.bounds) })
        })
        .collect();
    let n = write_capsules_csv(&origins, &terms, a.subset, output(&a.out)?)?;
    eprintln!("{n} capsules");
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global()?;
    }
    match cli.cmd {
        Cmd::Bench(a) => cmd_bench(a),
        Cmd::Render(a) => cmd_render(a),
        Cmd::Keys(a) => cmd_keys(a),
        Cmd::Sortbench(a) => cmd_sortbench(a),
        Cmd::Capsules(a) => cmd_capsules(a),
    }
}
