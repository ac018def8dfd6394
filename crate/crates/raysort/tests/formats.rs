use std::io::Write;

use raysort::io::{load_table, read_rays, save_table, write_capsules_csv, write_ppm, write_rays};
use raysort::obj::load_obj;
use raysort::scene::Scene;
use raysort_core::estimator::LengthHashTable;
use raysort_core::{Aabb, KeyBounds, Ray, RayKind, Vec3};

#[test]
fn rays_round_trip() {
    let rays = vec![
        Ray::new(Vec3::new(1.0, -2.0, 3.5), Vec3::new(0.0, 1.0, 0.0), f32::INFINITY, RayKind::Primary).unwrap(),
        Ray::new(Vec3::ZERO, Vec3::new(0.6, 0.0, -0.8), 2.25, RayKind::Shadow).unwrap(),
    ];
    let mut buf = Vec::new();
    write_rays(&rays, &mut buf).unwrap();
    assert_eq!(buf.len(), 8 + 2 * 32);
    assert_eq!(read_rays(&buf[..]).unwrap(), rays);
    assert!(read_rays(&buf[..buf.len() - 1]).is_err());
    buf[0] = b'X';
    assert!(read_rays(&buf[..]).is_err());
}

#[test]
fn table_snapshot_round_trip() {
    let bounds = KeyBounds::new(Aabb::new(Vec3::ZERO, Vec3::splat(2.0)).unwrap()).unwrap();
    let mut t = LengthHashTable::new(bounds);
    let r = Ray::new(Vec3::splat(1.0), Vec3::new(1.0, 0.0, 0.0), f32::INFINITY, RayKind::Secondary).unwrap();
    t.accumulate(&[r, r], &[Some(0.25), Some(0.75)]).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("table.lht");
    save_table(&t, &path).unwrap();
    let back = load_table(&path, bounds).unwrap();
    assert_eq!(back.length(&r), t.length(&r));
    assert_eq!(back.cells(), t.cells());
    std::fs::write(&path, b"LHT1").unwrap();
    assert!(load_table(&path, bounds).is_err());
}

#[test]
fn ppm_layout() {
    let mut buf = Vec::new();
    write_ppm(&[0.0, 1.0, 4.0, -1.0, 0.5, 0.25], 3, 2, &mut buf).unwrap();
    let header = b"P6\n3 2\n255\n";
    assert_eq!(&buf[..header.len()], header);
    let px = &buf[header.len()..];
    assert_eq!(px.len(), 18);
    assert_eq!(&px[..12], &[0, 0, 0, 255, 255, 255, 255, 255, 255, 0, 0, 0]);
    assert_eq!(px[12], (0.5f64.powf(1.0 / 2.2) * 255.0).round() as u8);
    assert!(write_ppm(&[0.0; 5], 3, 2, &mut Vec::new()).is_err());
}

#[test]
fn obj_scene_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("quad.obj");
    let mut f = std::fs::File::create(&path).unwrap();
    writeln!(f, "# quad\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvn 0 0 1\nf 1//1 2//1 3//1 4//1\nf -4 -3 -3").unwrap();
    drop(f);
    let tris = load_obj(&path).unwrap();
    assert_eq!(tris.len(), 2);
    let scene = Scene::from_spec(path.to_str().unwrap(), 0).unwrap();
    assert_eq!(scene.triangles.len(), 2);
    assert_eq!(scene.bounds.max, Vec3::new(1.0, 1.0, 0.0));

    let bad = dir.path().join("bad.obj");
    std::fs::write(&bad, "v 0 0 0\nf 1 2 3\n").unwrap();
    let err = load_obj(&bad).unwrap_err().to_string();
    assert!(err.contains('2'), "{err}");
    assert!(load_obj(&dir.path().join("missing.obj")).is_err());
}

#[test]
fn capsule_csv_rows() {
    let o: Vec<[f64; 3]> = (0..130).map(|i| [i as f64, 0.0, 0.0]).collect();
    let t: Vec<[f64; 3]> = (0..130).map(|i| [i as f64, 5.0, 0.0]).collect();
    let mut buf = Vec::new();
    assert_eq!(write_capsules_csv(&o, &t, 64, &mut buf).unwrap(), 2);
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "subset,co_x,co_y,co_z,ct_x,ct_y,ct_z,r_o,r_t,area");
    assert_eq!(lines.count(), 2);
}
