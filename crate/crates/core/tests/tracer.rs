use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use raysort_core::tracer::{
    any_hit, brute_force, closest_hit, trace_batch, trace_ray, warp_efficiency, Bvh, CacheConfig, TraceMode,
    Triangle,
};
use raysort_core::{Ray, RayKind, Vec3};

fn unit(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let l = v.length();
        if l > 0.1 && l <= 1.0 {
            return v / l;
        }
    }
}

fn point(rng: &mut ChaCha8Rng, lo: f32, hi: f32) -> Vec3 {
    Vec3::new(rng.random_range(lo..hi), rng.random_range(lo..hi), rng.random_range(lo..hi))
}

/// Random triangle soup with an open box around it.
fn scene(seed: u64, n: usize) -> Vec<Triangle> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tris = Vec::new();
    for _ in 0..n {
        let c = point(&mut rng, -4.0, 4.0);
        let s = rng.random_range(0.05..0.8);
        tris.push(Triangle::new(c + unit(&mut rng) * s, c + unit(&mut rng) * s, c + unit(&mut rng) * s));
    }
    let q = |a: [f32; 3], b: [f32; 3], c: [f32; 3], d: [f32; 3]| {
        [Triangle::new(a.into(), b.into(), c.into()), Triangle::new(a.into(), c.into(), d.into())]
    };
    let f = 5.0;
    tris.extend(q([-f, -f, -f], [f, -f, -f], [f, -f, f], [-f, -f, f]));
    tris.extend(q([-f, -f, -f], [-f, f, -f], [-f, f, f], [-f, -f, f]));
    tris.extend(q([-f, -f, f], [f, -f, f], [f, f, f], [-f, f, f]));
    tris
}

fn rays(seed: u64, n: usize, short: bool) -> Vec<Ray> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let tmax = if short { rng.random_range(0.1..6.0) } else { f32::INFINITY };
            Ray::new(point(&mut rng, -4.5, 4.5), unit(&mut rng), tmax, RayKind::Secondary).unwrap()
        })
        .collect()
}

#[test]
fn bvh_agrees_with_brute_force() {
    for seed in [1u64, 2] {
        let tris = scene(seed, 800);
        let bvh = Bvh::build(&tris).unwrap();
        let mut hits = 0;
        for (i, r) in rays(seed + 100, 10_000, false).iter().enumerate() {
            let (h, c) = closest_hit(&bvh, r);
            let b = brute_force(&tris, r, TraceMode::Closest);
            assert_eq!(h.hit, b.hit, "ray {i}");
            if h.hit {
                hits += 1;
                assert!((h.t - b.t).abs() <= 1e-5 * b.t, "ray {i}: {} vs {}", h.t, b.t);
                if h.triangle != b.triangle {
                    // coincident hits on two triangles
                    assert_eq!(h.t, b.t);
                }
            }
            let (a, ac) = any_hit(&bvh, r);
            assert_eq!(a, b.hit, "ray {i}");
            assert!(ac.triangle_tests <= c.triangle_tests);
            assert!(c.node_visits >= 1);
        }
        assert!(hits > 5000, "{hits}");
    }
}

#[test]
fn bounded_rays_agree_with_brute_force() {
    let tris = scene(3, 500);
    let bvh = Bvh::build(&tris).unwrap();
    let mut occluded = 0;
    for r in rays(103, 10_000, true) {
        for mode in [TraceMode::Closest, TraceMode::Any] {
            let (h, _) = trace_ray(&bvh, &r, mode);
            let b = brute_force(&tris, &r, mode);
            assert_eq!(h.hit, b.hit);
            if mode == TraceMode::Closest && h.hit {
                assert!((h.t - b.t).abs() <= 1e-5 * b.t);
                assert!(h.t <= r.tmax);
            }
        }
        occluded += any_hit(&bvh, &r).0 as usize;
    }
    assert!(occluded > 1000 && occluded < 9000, "{occluded}");
}

#[test]
fn node_visits_invariant_under_reordering() {
    let tris = scene(4, 600);
    let bvh = Bvh::build(&tris).unwrap();
    let batch = rays(104, 4096, false);
    let cfg = CacheConfig::default();
    let (base, stats) = trace_batch(&bvh, &batch, TraceMode::Closest, 32, cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut order: Vec<usize> = (0..batch.len()).collect();
    for i in (1..order.len()).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    let shuffled: Vec<Ray> = order.iter().map(|&i| batch[i]).collect();
    let (again, s2) = trace_batch(&bvh, &shuffled, TraceMode::Closest, 32, cfg).unwrap();
    assert_eq!(stats.node_visits, s2.node_visits);
    assert_eq!(stats.triangle_tests, s2.triangle_tests);
    for (k, &i) in order.iter().enumerate() {
        assert_eq!(again[k], base[i]);
    }
}

#[test]
fn warp_efficiency_bounds_and_duplication() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for warp in [32usize, 64] {
        for _ in 0..200 {
            let n = warp * rng.random_range(1..6);
            let steps: Vec<u32> = (0..n).map(|_| rng.random_range(0..200)).collect();
            let e = warp_efficiency(&steps, warp).unwrap();
            assert!(e > 0.0 && e <= 1.0, "{e}");
            let doubled: Vec<u32> = steps.iter().chain(steps.iter()).copied().collect();
            let e2 = warp_efficiency(&doubled, warp).unwrap();
            assert!((e - e2).abs() < 1e-12, "{e} {e2}");
        }
        assert_eq!(warp_efficiency(&vec![17; warp], warp).unwrap(), 1.0);
    }
}
