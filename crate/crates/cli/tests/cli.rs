use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use amprint_core::features::{read_features_csv, write_features_csv, FeatureRow};
use amprint_core::mesh::{save_mesh, write_ply, MeshFormat};
use amprint_core::recon::DEFAULT_PITCH;
use amprint_core::registration::RigidTransform;
use amprint_core::{shapes, Vector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use tempfile::TempDir;

fn amprint(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_amprint")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Value {
    let mut full = vec!["--json"];
    full.extend_from_slice(args);
    let out = amprint(&full);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice::<Value>(&out.stdout).unwrap()["result"].clone()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn write_mesh(dir: &Path, name: &str, mesh: &amprint_core::TriangleMesh) -> PathBuf {
    let path = dir.join(name);
    let fmt = if name.ends_with(".ply") { MeshFormat::Ply } else { MeshFormat::StlBinary };
    save_mesh(mesh, &path, fmt).unwrap();
    path
}

/// Noise features with a target that depends on `dbb` only.
fn teacher_csv(path: &Path, n: usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let rows: Vec<FeatureRow> = (0..n)
        .map(|_| {
            let mut a = [0.0; 10];
            for v in a.iter_mut() {
                *v = rng.random_range(0.0..2.0);
            }
            FeatureRow::from_array(a)
        })
        .collect();
    let t: Vec<f64> = rows.iter().map(|r| 0.05 + 0.1 * r.dbb).collect();
    write_features_csv(&rows, Some(&t), fs::File::create(path).unwrap()).unwrap();
}

#[test]
fn help_for_every_subcommand() {
    let commands: [&[&str]; 16] = [
        &[],
        &["mesh"],
        &["mesh", "info"],
        &["features"],
        &["features", "extract"],
        &["ann"],
        &["ann", "train"],
        &["ann", "predict"],
        &["ann", "importance"],
        &["slice"],
        &["reconstruct"],
        &["register", "icp"],
        &["c2c"],
        &["printability", "score"],
        &["printability", "fit-c"],
        &["serve"],
    ];
    for c in commands {
        let mut args = c.to_vec();
        args.push("--help");
        let out = amprint(&args);
        assert_eq!(out.status.code(), Some(0), "{args:?}");
        assert!(String::from_utf8_lossy(&out.stdout).contains("Usage"), "{args:?}");
    }
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(amprint(&["slice", "--bogus"]).status.code(), Some(2));
    assert_eq!(amprint(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(amprint(&["printability", "fit-c"]).status.code(), Some(2));
    assert_eq!(amprint(&["printability", "fit-c", "--technology", "XYZ"]).status.code(), Some(2));
}

#[test]
fn cube_features_have_zero_box_distance() {
    let dir = TempDir::new().unwrap();
    let cube = write_mesh(dir.path(), "cube.stl", &shapes::cube(10.0));
    let out = dir.path().join("f.csv");
    let r = ok(&["features", "extract", s(&cube), "--out", s(&out)]);
    assert_eq!(r["rows"], 8);
    let (rows, targets) = read_features_csv(fs::File::open(&out).unwrap()).unwrap();
    assert_eq!(rows.len(), 8);
    assert!(targets.is_none());
    assert!(rows.iter().all(|r| r.dbb == 0.0));
}

#[test]
fn slice_reconstruct_c2c_round_trip() {
    let dir = TempDir::new().unwrap();
    let mesh = shapes::subdivide(&shapes::translated(&shapes::cube(10.0), Vector::new(20.0, 20.0, 0.0)), 2);
    let cube = write_mesh(dir.path(), "cube.stl", &mesh);
    let layers = dir.path().join("layers");
    let r = ok(&["slice", s(&cube), "--out", s(&layers)]);
    assert_eq!(r["layers"], 99);
    assert!(layers.join("stack.json").exists() && layers.join("layer_00098.png").exists());

    let cloud = dir.path().join("cube_recon.ply");
    let r = ok(&["reconstruct", s(&layers), "--out", s(&cloud)]);
    assert!(r["points"].as_u64().unwrap() > 1000);

    let stats = dir.path().join("stats.csv");
    let r = ok(&["c2c", "--source", s(&cube), "--target", s(&cloud), "--icp", "--out", s(&stats)]);
    let mae = r["mae"].as_f64().unwrap();
    assert!(mae <= 2.0 * DEFAULT_PITCH + 0.102, "{mae}");
    let text = fs::read_to_string(&stats).unwrap();
    assert!(text.starts_with("distance\n") && text.contains("# mae,") && text.contains("# std,"));
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), mesh.num_vertices() + 1);

    // reslicing into the same directory replaces the stack
    ok(&["slice", s(&cube), "--out", s(&layers), "--thickness", "0.2"]);
    assert!(!layers.join("layer_00098.png").exists());
}

#[test]
fn domain_errors_leave_no_files() {
    let dir = TempDir::new().unwrap();
    let open = write_mesh(dir.path(), "open.stl", &shapes::translated(&shapes::grid(5.0, 4), Vector::new(5.0, 5.0, 1.0)));
    let layers = dir.path().join("layers");
    let cloud = dir.path().join("cloud.ply");
    assert_eq!(amprint(&["slice", s(&open), "--out", s(&layers)]).status.code(), Some(1));
    assert_eq!(amprint(&["reconstruct", s(&open), "--out", s(&cloud)]).status.code(), Some(1));
    let out = amprint(&["--json", "reconstruct", s(&open), "--out", s(&cloud)]);
    let err: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(err["exit_code"], 1);
    assert!(err["error"].as_str().unwrap().contains("not closed"));

    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"technology": "BJ"}"#).unwrap();
    let report = dir.path().join("report.json");
    assert_eq!(amprint(&["printability", "score", "--config", s(&bad), "--out", s(&report)]).status.code(), Some(1));

    let names: Vec<_> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names.len(), 2, "{names:?}");
}

#[test]
fn seeded_outputs_are_identical() {
    let dir = TempDir::new().unwrap();
    let sphere = write_mesh(dir.path(), "s.ply", &shapes::translated(&shapes::icosphere(5.0, 3), Vector::new(10.0, 10.0, 5.0)));
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    ok(&["--seed", "7", "features", "extract", s(&sphere), "--sample", "0.5", "--out", s(&a)]);
    ok(&["--seed", "7", "features", "extract", s(&sphere), "--sample", "0.5", "--out", s(&b)]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let c = dir.path().join("c.csv");
    ok(&["--seed", "8", "features", "extract", s(&sphere), "--sample", "0.5", "--out", s(&c)]);
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());

    let data = dir.path().join("teacher.csv");
    teacher_csv(&data, 200);
    let mut files = Vec::new();
    for run in 0..2 {
        let model = dir.path().join(format!("m{run}.json"));
        let hist = dir.path().join(format!("h{run}.csv"));
        let imp = dir.path().join(format!("i{run}.csv"));
        ok(&["--seed", "3", "ann", "train", "--data", s(&data), "--out", s(&model), "--epochs", "5", "--history", s(&hist)]);
        ok(&["--seed", "3", "ann", "importance", "--model", s(&model), "--data", s(&data), "--out", s(&imp)]);
        files.push([model, hist, imp].map(|p| fs::read(p).unwrap()));
    }
    assert_eq!(files[0], files[1]);
}

#[test]
fn network_pipeline() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("teacher.csv");
    teacher_csv(&data, 400);
    let model = dir.path().join("model.json");
    let r = ok(&["ann", "train", "--data", s(&data), "--out", s(&model), "--epochs", "40", "--batch-size", "32"]);
    assert_eq!(r["history"].as_array().unwrap().len(), 40);

    let pred = dir.path().join("pred.csv");
    let r = ok(&["ann", "predict", "--model", s(&model), "--data", s(&data), "--out", s(&pred)]);
    assert_eq!(r["count"], 400);
    assert!(r["evaluation"]["mae"].as_f64().unwrap() < 0.02);
    assert!(fs::read_to_string(&pred).unwrap().starts_with("index,predicted,actual\n"));

    let imp = dir.path().join("imp.json");
    let r = ok(&["ann", "importance", "--model", s(&model), "--data", s(&data), "--out", s(&imp)]);
    let scores: Vec<f64> = r.as_array().unwrap().iter().map(|f| f["score"].as_f64().unwrap()).collect();
    let top = (0..10).max_by(|&a, &b| scores[a].total_cmp(&scores[b])).unwrap();
    assert_eq!(top, 9);

    // a mesh is accepted directly as prediction input
    let cube = write_mesh(dir.path(), "cube.stl", &shapes::cube(4.0));
    let r = ok(&["ann", "predict", "--model", s(&model), "--data", s(&cube), "--out", s(&pred)]);
    assert_eq!(r["count"], 8);
    assert!(r["evaluation"].is_null());
}

#[test]
fn icp_recovers_known_motion() {
    let dir = TempDir::new().unwrap();
    let mesh = shapes::subdivide(&shapes::l_bracket(20.0, 5.0, 10.0), 2);
    let motion = RigidTransform::rotation_z(10.0, Vector::new(1.0, 2.0, 3.0));
    let source = write_mesh(dir.path(), "src.stl", &mesh);
    let moved = dir.path().join("dst.ply");
    write_ply(&mesh.map_vertices(|p| motion.apply(p)), fs::File::create(&moved).unwrap()).unwrap();
    let tf = dir.path().join("t.json");
    ok(&["register", "icp", "--source", s(&source), "--target", s(&moved), "--out", s(&tf), "--max-iterations", "200", "--tolerance", "1e-12"]);
    let found: RigidTransform = serde_json::from_str(&fs::read_to_string(&tf).unwrap()).unwrap();
    assert!(found.max_difference(&motion) < 1e-3);

    let r = ok(&["c2c", "--source", s(&source), "--target", s(&moved), "--transform", s(&tf)]);
    assert!(r["mae"].as_f64().unwrap() < 1e-3);
    assert_eq!(amprint(&["c2c", "--source", s(&source), "--target", s(&moved), "--icp", "--transform", s(&tf)]).status.code(), Some(2));
}

#[test]
fn scores_configs_and_fits() {
    let woman = configs().join("woman_of_pindos.json");
    let r = ok(&["printability", "score", "--config", s(&woman)]);
    assert!((r["score_percent"].as_f64().unwrap() - 27.38).abs() <= 5.0);

    let out = Command::new(env!("CARGO_BIN_EXE_amprint"))
        .args(["--json", "printability", "score", "--config", "dodone_eagle.json"])
        .env("AMPRINT_CONFIG_DIR", configs())
        .current_dir(std::env::temp_dir())
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["result"]["score_percent"].as_f64().unwrap() - 91.28).abs() <= 0.5);

    let r = ok(&["printability", "fit-c", "--w", "2.0"]);
    let lib = amprint_core::printability::fit_coefficient(2.0, amprint_core::printability::Direction::Decreasing).unwrap();
    assert_eq!(r["c"].as_f64().unwrap(), lib.c);
    let r = ok(&["printability", "fit-c", "--technology", "BJ"]);
    assert_eq!(r.as_array().unwrap().len(), 5);
}

#[test]
fn mesh_info_reports_topology() {
    let dir = TempDir::new().unwrap();
    let cube = write_mesh(dir.path(), "cube.stl", &shapes::cube(10.0));
    let r = ok(&["mesh", "info", s(&cube)]);
    assert_eq!(r["vertices"], 8);
    assert_eq!(r["triangles"], 12);
    assert_eq!(r["closed"], true);
    assert_eq!(r["euler_characteristic"], 2);
    assert!((r["surface_area"].as_f64().unwrap() - 600.0).abs() < 1e-9);
    let wrong = amprint(&["mesh", "info", s(&cube), "--format", "obj"]);
    assert_eq!(wrong.status.code(), Some(1));
}
