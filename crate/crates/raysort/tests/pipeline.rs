use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use raysort::pipeline::{pipeline, PipelineOptions};
use raysort::scene::gen_procedural_scene;
use raysort_core::estimator::LengthHashTable;
use raysort_core::sort::SortPlan;
use raysort_core::{KeyBits, KeyBounds, KeyContext, KeyMethod, Ray, RayKind, Vec3};

fn random_rays(seed: u64, n: usize, lo: Vec3, hi: Vec3) -> Vec<Ray> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let o = Vec3::new(rng.random_range(lo.x..hi.x), rng.random_range(lo.y..hi.y), rng.random_range(lo.z..hi.z));
            let d = loop {
                let v = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                let l = v.length();
                if l > 0.1 && l <= 1.0 {
                    break v / l;
                }
            };
            Ray::new(o, d, f32::INFINITY, RayKind::Secondary).unwrap()
        })
        .collect()
}

fn ray_bits(r: &Ray) -> [u32; 7] {
    let o = r.origin.to_array().map(f32::to_bits);
    let d = r.direction.to_array().map(f32::to_bits);
    [o[0], o[1], o[2], d[0], d[1], d[2], r.tmax.to_bits()]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn reordering_permutes_the_batch(
        seed in any::<u64>(),
        n in 0usize..3000,
        method in 0usize..KeyMethod::ALL.len(),
        segment in prop_oneof![Just(0usize), Just(64), Just(256), Just(1024)],
        wide in any::<bool>(),
    ) {
        let scene = gen_procedural_scene(seed % 7 + 1, 6).unwrap();
        let bvh = scene.build_bvh().unwrap();
        let bounds = KeyBounds::new(scene.bounds).unwrap();
        let bits = if wide { KeyBits::B64 } else { KeyBits::B32 };
        let table = LengthHashTable::new(bounds);
        let ctx = KeyContext::new(bounds, bits).with_table(&table).with_tracer(&bvh);
        let rays = random_rays(seed, n, scene.bounds.min, scene.bounds.max);
        let method = KeyMethod::ALL[method];
        let plan = SortPlan::new(segment, bits).unwrap();
        let rep = pipeline(&rays, method, &ctx, plan, PipelineOptions::default()).unwrap();
        let out = rep.rays.as_ref().unwrap();
        prop_assert_eq!(out.len(), n);
        let mut seen = vec![false; n];
        for (i, &o) in rep.order.iter().enumerate() {
            prop_assert!(!seen[o as usize]);
            seen[o as usize] = true;
            prop_assert_eq!(ray_bits(&out[i]), ray_bits(&rays[o as usize]));
            if segment > 0 {
                prop_assert_eq!(i / segment, o as usize / segment);
            }
        }
        let inv = rep.inverse.as_ref().unwrap();
        for (i, &p) in inv.iter().enumerate() {
            prop_assert_eq!(rep.order[p as usize] as usize, i);
        }
        let t = rep.timings;
        prop_assert_eq!(t.accum_us, 0);
        if method == KeyMethod::Unsorted {
            prop_assert_eq!(t.total_us(), 0);
            prop_assert!(rep.order.iter().enumerate().all(|(i, &o)| i == o as usize));
        }
        prop_assert_eq!(rep.pretrace.is_some(), method == KeyMethod::TwoPointReal);
    }
}

#[test]
fn indirect_mode_keeps_ray_data_in_place() {
    let scene = gen_procedural_scene(3, 10).unwrap();
    let bounds = KeyBounds::new(scene.bounds).unwrap();
    let ctx = KeyContext::new(bounds, KeyBits::B32);
    let rays = random_rays(1, 5000, scene.bounds.min, scene.bounds.max);
    let plan = SortPlan::global(KeyBits::B32);
    let direct = pipeline(&rays, KeyMethod::Aila, &ctx, plan, PipelineOptions::default()).unwrap();
    let indirect = pipeline(&rays, KeyMethod::Aila, &ctx, plan, PipelineOptions { indirect: true }).unwrap();
    assert_eq!(direct.order, indirect.order);
    assert!(indirect.rays.is_none() && indirect.inverse.is_none());
    assert_eq!(indirect.timings.reorder_us, 0);
}

#[test]
fn two_point_real_pretrace_counts_the_extra_trace() {
    let scene = gen_procedural_scene(4, 20).unwrap();
    let bvh = scene.build_bvh().unwrap();
    let bounds = KeyBounds::new(scene.bounds).unwrap();
    let rays = random_rays(2, 4000, scene.bounds.min, scene.bounds.max);
    let plan = SortPlan::global(KeyBits::B32);
    let no_tracer = KeyContext::new(bounds, KeyBits::B32);
    assert!(pipeline(&rays, KeyMethod::TwoPointReal, &no_tracer, plan, Default::default()).is_err());
    let ctx = no_tracer.with_tracer(&bvh);
    let rep = pipeline(&rays, KeyMethod::TwoPointReal, &ctx, plan, Default::default()).unwrap();
    let pre = rep.pretrace.unwrap();
    let expect: u64 = rays.iter().map(|r| raysort_core::tracer::closest_hit(&bvh, r).1.node_visits as u64).sum();
    assert_eq!(pre.node_visits, expect);
    assert!(pre.us <= rep.timings.code_us);
}

#[test]
fn plan_width_must_match_context() {
    let scene = gen_procedural_scene(1, 4).unwrap();
    let ctx = KeyContext::new(KeyBounds::new(scene.bounds).unwrap(), KeyBits::B64);
    let rays = random_rays(3, 10, scene.bounds.min, scene.bounds.max);
    assert!(pipeline(&rays, KeyMethod::Origin, &ctx, SortPlan::global(KeyBits::B32), Default::default()).is_err());
}
