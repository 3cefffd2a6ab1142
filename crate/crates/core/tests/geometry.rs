use std::f64::consts::TAU;

use amprint_core::features::{extract_features, gaussian_curvature, mean_curvature, total_angle_deficit};
use amprint_core::mesh::{load_mesh, save_mesh, Aabb, MeshFormat};
use amprint_core::registration::RigidTransform;
use amprint_core::{shapes, Point, TriangleMesh, Vector};
use proptest::prelude::*;

#[test]
fn icosphere_curvature_matches_sphere() {
    let r = 10.0;
    let sphere = shapes::icosphere(r, 4);
    assert_eq!(sphere.num_vertices(), 2562);
    for v in 0..sphere.num_vertices() {
        let kg = gaussian_curvature(&sphere, v).unwrap();
        let km = mean_curvature(&sphere, v).unwrap();
        assert!((kg - 1.0 / (r * r)).abs() <= 0.05 / (r * r), "vertex {v}: K = {kg}");
        assert!((km - 1.0 / r).abs() <= 0.05 / r, "vertex {v}: H = {km}");
    }
}

#[test]
fn gauss_bonnet_on_closed_meshes() {
    let meshes: Vec<TriangleMesh> = vec![
        shapes::icosphere(10.0, 4),
        shapes::cube(3.0),
        shapes::subdivide(&shapes::l_bracket(20.0, 5.0, 10.0), 2),
        shapes::cylinder(2.0, 5.0, 32, 6),
        shapes::dented_box(10.0, 4.0),
    ];
    for m in &meshes {
        let chi = m.euler_characteristic() as f64;
        assert!((total_angle_deficit(m) - TAU * chi).abs() < 1e-6);
    }
}

#[test]
fn bounding_box_matches_brute_force() {
    let m = shapes::translated(&shapes::icosphere(3.0, 3), Vector::new(1.0, -2.0, 7.5));
    let bb = m.bounding_box();
    let v = m.vertices();
    let min = |k: usize| v.iter().map(|p| p[k]).fold(f64::INFINITY, f64::min);
    let max = |k: usize| v.iter().map(|p| p[k]).fold(f64::NEG_INFINITY, f64::max);
    for k in 0..3 {
        assert_eq!(bb.min[k], min(k));
        assert_eq!(bb.max[k], max(k));
    }
    assert!(Aabb::from_points(std::iter::empty()).is_none());
}

#[test]
fn file_round_trip_in_every_format() {
    let dir = tempfile::tempdir().unwrap();
    let m = shapes::l_bracket(12.0, 3.0, 4.0);
    for (name, fmt) in [
        ("a.stl", MeshFormat::StlBinary),
        ("b.stl", MeshFormat::StlAscii),
        ("c.ply", MeshFormat::Ply),
        ("d.obj", MeshFormat::Obj),
    ] {
        let path = dir.path().join(name);
        save_mesh(&m, &path, fmt).unwrap();
        let back = load_mesh(&path, None).unwrap();
        assert_eq!(back.num_vertices(), m.num_vertices(), "{name}");
        assert_eq!(back.num_triangles(), m.num_triangles(), "{name}");
        assert!((back.surface_area() - m.surface_area()).abs() < 1e-4, "{name}");
    }
}

fn rigid(deg: f64, axis: Vector, t: Vector) -> RigidTransform {
    let r = nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), deg.to_radians());
    RigidTransform::from_parts(r.matrix(), &t)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn area_is_rigid_invariant(deg in -180.0..180.0f64, ax in -1.0..1.0f64, ay in -1.0..1.0f64,
                               tx in -50.0..50.0f64, ty in -50.0..50.0f64, tz in -50.0..50.0f64) {
        let m = shapes::subdivide(&shapes::l_bracket(10.0, 2.0, 3.0), 1);
        let tr = rigid(deg, Vector::new(ax, ay, 1.0), Vector::new(tx, ty, tz));
        let moved = m.map_vertices(|p| tr.apply(p));
        prop_assert!((moved.surface_area() - m.surface_area()).abs() < 1e-9 * m.surface_area());
    }

    #[test]
    fn features_respect_similarity_transforms(tx in -20.0..20.0f64, ty in -20.0..20.0f64, tz in -20.0..20.0f64,
                                              deg in -180.0..180.0f64, scale in 0.5..4.0f64) {
        let m = shapes::icosphere(4.0, 2);
        let base = extract_features(&m).unwrap();

        // translation changes only the coordinates
        let t = Vector::new(tx, ty, tz);
        let moved = extract_features(&shapes::translated(&m, t)).unwrap();
        for (a, b) in base.iter().zip(&moved) {
            prop_assert!((b.x - a.x - tx).abs() < 1e-9 && (b.z - a.z - tz).abs() < 1e-9);
            for (u, v) in a.to_array()[3..].iter().zip(&b.to_array()[3..]) {
                prop_assert!((u - v).abs() < 1e-7 * (1.0 + u.abs()));
            }
        }

        // rotation about the build axis keeps curvature, angles and nz
        let rz = RigidTransform::rotation_z(deg, Vector::zeros());
        let rotated = extract_features(&m.map_vertices(|p| rz.apply(p))).unwrap();
        for (a, b) in base.iter().zip(&rotated) {
            for k in 3..9 {
                prop_assert!((a.to_array()[k] - b.to_array()[k]).abs() < 1e-7 * (1.0 + a.to_array()[k].abs()));
            }
        }

        // uniform scaling: K ~ 1/s², H ~ 1/s, angles unchanged
        let scaled = extract_features(&m.map_vertices(|p| Point::from(p.coords * scale))).unwrap();
        for (a, b) in base.iter().zip(&scaled) {
            prop_assert!((b.kg * scale * scale - a.kg).abs() < 1e-7 * a.kg.abs().max(1e-12));
            prop_assert!((b.km * scale - a.km).abs() < 1e-7 * a.km.abs().max(1e-12));
            prop_assert!((b.amean - a.amean).abs() < 1e-12);
            prop_assert!((b.dbb - a.dbb * scale).abs() < 1e-9 * scale);
        }
    }
}
