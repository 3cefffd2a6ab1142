//! Acceptance suite. Prints one PASS/FAIL line per criterion with its pinned
//! tolerance, then exits non-zero if any criterion fails outside the
//! documented divergences listed in `KNOWN_DIVERGENCES`.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fs;
use std::path::PathBuf;
use std::process::{Command, ExitCode};
use std::time::Instant;

use amprint_core::features::{gaussian_curvature, mean_curvature, total_angle_deficit, FeatureRow};
use amprint_core::kdtree::{brute_force_nearest, KdTree};
use amprint_core::net::{permutation_importance, train, ErrorNet, TrainConfig, TrainingSample};
use amprint_core::printability::{
    count_local_minima, fit_coefficient, overall_printability, CharacteristicKind, Direction, EpsilonSource,
    GlobalCharacteristic, PartCharacteristic, PrintabilityConfig, Technology, Unit,
};
use amprint_core::recon::{reconstruct, slice_mesh, SliceConfig, DEFAULT_LAYER_THICKNESS, DEFAULT_PITCH};
use amprint_core::registration::{c2c_distance, icp_align, IcpConfig, RigidTransform};
use amprint_core::{shapes, Point, TriangleMesh, Vector};
use axum::body::Body;
use axum::http::Request;
use http_body_util::BodyExt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use tower::ServiceExt;

/// Table cells that miss their tolerance for reasons recorded in the project
/// notes: the published value cannot be reproduced together with the other
/// cells of the same table under one consistent set of inputs.
const KNOWN_DIVERGENCES: &[&str] = &["benchmark 1 / supported_wall 2.5"];

struct Outcome {
    pass: bool,
    detail: String,
    /// Out-of-tolerance items, by name.
    misses: Vec<String>,
}

impl Outcome {
    fn new(pass: bool, detail: String) -> Self {
        Outcome { pass, detail, misses: Vec::new() }
    }
}

fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn config(name: &str) -> PrintabilityConfig {
    serde_json::from_str(&fs::read_to_string(configs_dir().join(name)).unwrap()).unwrap()
}

// ---------------------------------------------------------------------------
// Printability

/// Reference `1 − P_F` per benchmark, keyed by characteristic label.
fn table_reference() -> [Vec<(&'static str, f64)>; 2] {
    [
        vec![
            ("hole 3", 0.9117),
            ("hole 2", 0.6604),
            ("pin 4", 0.9156),
            ("pin 2.5", 0.6248),
            ("unsupported_wall 6", 0.9189),
            ("unsupported_wall 3.5", 0.5878),
            ("supported_wall 4", 0.9162),
            ("supported_wall 2.5", 0.688),
            ("embossed 1", 0.8988),
            ("embossed 1.5", 0.9965),
            ("engraved 1", 0.8992),
            ("engraved 1.5", 0.9965),
            ("thin_part 4", 0.9135),
            ("thin_part 2.5", 0.6178),
        ],
        vec![
            ("hole 3.5", 0.9602),
            ("hole 4", 0.9822),
            ("pin 4.5", 0.9551),
            ("pin 5", 0.9759),
            ("unsupported_wall 6.5", 0.9457),
            ("unsupported_wall 7", 0.9634),
            ("supported_wall 5", 0.9752),
            ("supported_wall 4.5", 0.9553),
            ("embossed 1.5", 0.9960),
            ("embossed 2", 0.9999),
            ("engraved 1.5", 0.9960),
            ("engraved 2", 0.9999),
            ("thin_part 4.5", 0.9527),
            ("thin_part 5", 0.9755),
        ],
    ]
}

fn printability_tables() -> Outcome {
    let start = Instant::now();
    let reports: Vec<_> =
        (1..=3).map(|b| overall_printability(&config(&format!("benchmark_{b}.json"))).unwrap()).collect();
    let elapsed = start.elapsed().as_secs_f64();

    let mut misses = Vec::new();
    let mut worst: f64 = 0.0;
    let mut cells = 0;
    for (b, table) in table_reference().iter().enumerate() {
        for (label, expected) in table {
            let c = reports[b].characteristics.iter().find(|c| c.label.as_deref() == Some(label)).unwrap();
            let diff = (c.survival - expected).abs();
            cells += 1;
            if diff > 0.05 {
                misses.push(format!("benchmark {} / {label}", b + 1));
                println!("       miss: benchmark {} {label}: {:.4} vs {expected} (|Δ| {diff:.4})", b + 1, c.survival);
            } else {
                worst = worst.max(diff);
            }
        }
    }
    let overhang_ref = [0.6882, 0.7036, 0.7505];
    let mut oh_worst: f64 = 0.0;
    for (b, expected) in overhang_ref.iter().enumerate() {
        let c = reports[b].characteristics.iter().find(|c| c.kind == CharacteristicKind::Overhang).unwrap();
        let diff = (c.survival - expected).abs();
        oh_worst = oh_worst.max(diff);
        if diff > 0.02 {
            misses.push(format!("benchmark {} / overhang", b + 1));
        }
    }
    let fast = elapsed < 1.0;
    let detail = format!(
        "{}/{cells} cells within ±0.05 (worst in-tolerance |Δ| {worst:.4}); overhangs worst |Δ| {oh_worst:.4} (±0.02); {elapsed:.3} s (< 1 s)",
        cells - misses.iter().filter(|m| !m.ends_with("overhang")).count()
    );
    Outcome { pass: misses.is_empty() && fast, detail, misses: if fast { misses } else { vec!["runtime".into()] } }
}

fn global_probability() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut got = Vec::new();
    for (k, expected) in [(0.1, 0.99004), (0.5, 0.95089), (0.9, 0.91288)] {
        let s = overall_printability(&PrintabilityConfig::uniform(Technology::Bj, "any", k)).unwrap().global.survival;
        worst = worst.max((s - expected).abs());
        got.push(format!("{s:.5}"));
    }
    let mut alt = PrintabilityConfig::uniform(Technology::Bj, "any", 0.9);
    alt.defect_scores = GlobalCharacteristic::DEFAULT_SET.iter().map(|&x| (x, 0.03)).collect();
    let alt_s = overall_printability(&alt).unwrap().global.survival;
    let elapsed = start.elapsed().as_secs_f64();
    Outcome::new(
        worst <= 1e-3,
        format!(
            "(k=0.1,0.5,0.9) -> ({}) max |Δ| {worst:.2e} (±0.001); DS=0.03 at k=0.9 gives {alt_s:.5} (documented divergence from 0.91288); {:.1} ms",
            got.join(", "),
            elapsed * 1e3
        ),
    )
}

fn end_to_end_scores() -> Outcome {
    let cases = [
        ("woman_of_pindos.json", 27.38, 5.0),
        ("dodone_eagle.json", 91.28, 0.5),
        ("terracotta_warrior.json", 91.28, 0.5),
        ("benchmark_1.json", 3.05, 1.0),
    ];
    let mut parts = Vec::new();
    let mut pass = true;
    for (name, expected, tol) in cases {
        let got = overall_printability(&config(name)).unwrap().score_percent;
        let ok = (got - expected).abs() <= tol;
        pass &= ok;
        parts.push(format!("{} {got:.2}% (ref {expected}% ±{tol} pp){}", name.trim_end_matches(".json"), if ok { "" } else { " MISS" }));
    }
    Outcome::new(pass, parts.join("; "))
}

/// Squared gap between the linear ramp and the sigmoid, trapezoid rule on
/// 2048 samples over `[0.05, 2w]`.
fn oracle_objective(c: f64, w: f64, increasing: bool) -> f64 {
    let (lo, hi) = (0.05, 2.0 * w);
    let n = 2048;
    let h = (hi - lo) / (n - 1) as f64;
    let mut sum = 0.0;
    for i in 0..n {
        let x = lo + h * i as f64;
        let sig = 1.0 / (1.0 + ((w - x) * c).exp());
        let gap = if increasing { (x - lo) / (hi - lo) - sig } else { (hi - x) / (hi - lo) - (1.0 - sig) };
        let wt = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        sum += wt * gap * gap * h;
    }
    sum
}

fn oracle_c(w: f64, increasing: bool, grid: usize) -> f64 {
    let (a, b) = ((1e-6 / w).ln(), (1e3 / w).ln());
    let mut best = (f64::INFINITY, 0.0);
    for i in 0..grid {
        let c = (a + (b - a) * i as f64 / (grid - 1) as f64).exp();
        let v = oracle_objective(c, w, increasing);
        if v < best.0 {
            best = (v, c);
        }
    }
    best.1
}

fn coefficient_fitting() -> Outcome {
    let mut pairs: Vec<(f64, Direction)> = Vec::new();
    for t in [Technology::Fdm, Technology::Bj, Technology::Mj] {
        for cv in t.critical_values() {
            if !pairs.contains(&(cv.w, cv.direction)) {
                pairs.push((cv.w, cv.direction));
            }
        }
    }
    let mut worst: f64 = 0.0;
    let mut multimodal = Vec::new();
    for &(w, dir) in &pairs {
        let fit = fit_coefficient(w, dir).unwrap();
        let brute = oracle_c(w, dir == Direction::Increasing, 100_000);
        let rel = (fit.c - brute).abs() / brute;
        worst = worst.max(rel);
        let minima = count_local_minima(w, dir, 2000);
        println!("       w {w:<8} {:<10} c {:.6e} grid {brute:.6e} rel {rel:.2e} local minima {minima}", format!("{dir:?}").to_lowercase(), fit.c);
        if minima != 1 {
            multimodal.push(w);
        }
    }
    Outcome::new(
        worst <= 1e-3 && multimodal.is_empty(),
        format!(
            "{} (w, direction) pairs vs 1e5-point log grid: worst relative diff {worst:.2e} (≤ 1e-3); unimodal for {}/{}",
            pairs.len(),
            pairs.len() - multimodal.len(),
            pairs.len()
        ),
    )
}

// ---------------------------------------------------------------------------
// Geometry

fn round_trip_mae(mesh: &TriangleMesh, pitch: f64) -> f64 {
    let stack = slice_mesh(mesh, &SliceConfig::default().with_pitch(pitch)).unwrap();
    let cloud = reconstruct(&stack, Some(mesh.surface_area())).unwrap();
    let tree = KdTree::new(cloud.points);
    let icp = icp_align(mesh.vertices(), &tree, &IcpConfig::default()).unwrap();
    c2c_distance(&icp.transform.apply_all(mesh.vertices()), &tree).unwrap().mae
}

fn round_trip() -> Outcome {
    let off = Vector::new(20.0, 20.0, 0.0);
    let prims = [
        ("cube", shapes::subdivide(&shapes::translated(&shapes::cube(10.0), off), 3)),
        ("sphere", shapes::translated(&shapes::icosphere(5.0, 4), Vector::new(20.0, 20.0, 5.0))),
        ("l-bracket", shapes::subdivide(&shapes::translated(&shapes::l_bracket(20.0, 5.0, 10.0), off), 3)),
    ];
    let bound = 2.0 * DEFAULT_PITCH + DEFAULT_LAYER_THICKNESS;
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, mesh) in &prims {
        let start = Instant::now();
        let coarse = round_trip_mae(mesh, DEFAULT_PITCH);
        let fine = round_trip_mae(mesh, DEFAULT_PITCH / 2.0);
        let secs = start.elapsed().as_secs_f64();
        let ok = coarse <= bound && fine <= coarse * 1.05 && secs < 60.0;
        pass &= ok;
        parts.push(format!("{name} {coarse:.4} -> {fine:.4} mm ({secs:.1} s){}", if ok { "" } else { " MISS" }));
    }
    Outcome::new(pass, format!("MAE ≤ {bound:.4} mm, halved pitch ≤ +5%, < 60 s each: {}", parts.join("; ")))
}

fn registration() -> Outcome {
    let mesh = shapes::subdivide(&shapes::l_bracket(20.0, 5.0, 10.0), 3);
    let motion = RigidTransform::rotation_z(10.0, Vector::new(1.0, 2.0, 3.0));
    let tree = KdTree::new(motion.apply_all(mesh.vertices()));
    let cfg = IcpConfig { max_iterations: 200, tolerance: 1e-12, trim: None };
    let fit = icp_align(mesh.vertices(), &tree, &cfg).unwrap();
    let err = fit.transform.max_difference(&motion);

    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut pt = |s: f64| Point::new(rng.random_range(-s..s), rng.random_range(-s..s), rng.random_range(-s..s));
    let cloud: Vec<Point> = (0..5000).map(|_| pt(50.0)).collect();
    let queries: Vec<Point> = (0..1000).map(|_| pt(60.0)).collect();
    let kd = KdTree::new(cloud.clone());
    let mismatches = queries.iter().filter(|q| kd.nearest(q) != brute_force_nearest(&cloud, q)).count();
    Outcome::new(
        err <= 1e-3 && mismatches == 0,
        format!(
            "10° + (1,2,3) mm recovered to {err:.2e} (≤ 1e-3) in {} iterations; k-d tree vs brute force: {mismatches}/1000 mismatches (0)",
            fit.iterations
        ),
    )
}

fn curvature() -> Outcome {
    let r = 10.0;
    let sphere = shapes::icosphere(r, 4);
    let mut worst_k: f64 = 0.0;
    let mut worst_h: f64 = 0.0;
    for v in 0..sphere.num_vertices() {
        let k = gaussian_curvature(&sphere, v).unwrap();
        let h = mean_curvature(&sphere, v).unwrap();
        worst_k = worst_k.max((k * r * r - 1.0).abs());
        worst_h = worst_h.max((h * r - 1.0).abs());
    }
    let chi = sphere.euler_characteristic() as f64;
    let gb = (total_angle_deficit(&sphere) - TAU * chi).abs();
    Outcome::new(
        worst_k <= 0.05 && worst_h <= 0.05 && gb <= 1e-6,
        format!(
            "{} vertices: Gaussian worst {:.2}% and mean worst {:.2}% (≤ 5%); Gauss-Bonnet |Σ deficit − 2πχ| {gb:.1e} (≤ 1e-6)",
            sphere.num_vertices(),
            worst_k * 100.0,
            worst_h * 100.0
        ),
    )
}

// ---------------------------------------------------------------------------
// Error network

fn teacher(n: usize, seed: u64) -> Vec<TrainingSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let mut a = [0.0; 10];
            for v in a.iter_mut() {
                *v = rng.random_range(0.0..2.0);
            }
            let row = FeatureRow::from_array(a);
            TrainingSample::new(row, 0.05 + 0.1 * row.dbb)
        })
        .collect()
}

fn error_network() -> Outcome {
    let probe = teacher(10, 1);
    let x: Vec<[f64; 10]> = probe.iter().map(|s| s.features.to_array().map(|v| v - 1.0)).collect();
    let y: Vec<f64> = probe.iter().map(|s| s.target).collect();
    let grad = ErrorNet::initialized(21).gradient_check(&x, &y, 1e-5);

    let data = teacher(1300, 7);
    let (train_set, held_out) = data.split_at(1000);
    let cfg = TrainConfig { epochs: 200, batch_size: 32, seed: 3, ..TrainConfig::default() };
    let start = Instant::now();
    let out = train(train_set, &cfg).unwrap();
    let mse = out.net.mse(train_set).unwrap();
    let imp = permutation_importance(&out.net, held_out, 30, 11).unwrap();
    let top = imp.iter().max_by(|a, b| a.score.total_cmp(&b.score)).unwrap();
    let noise = &imp[0];
    Outcome::new(
        grad <= 1e-4 && mse < 1e-4 && top.feature == "dbb" && noise.score.abs() < 1.0,
        format!(
            "gradient check {grad:.1e} (≤ 1e-4); teacher train MSE {mse:.2e} (< 1e-4); top feature {} ({:.1}); noise feature x {:.2} (|·| < 1); {:.1} s",
            top.feature,
            top.score,
            noise.score,
            start.elapsed().as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------------------------
// CLI / HTTP equivalence

fn random_config(rng: &mut ChaCha8Rng) -> PrintabilityConfig {
    let tech = [Technology::Fdm, Technology::Bj, Technology::Mj][rng.random_range(0..3)];
    let mut cfg = PrintabilityConfig::uniform(tech, "random", 0.0);
    for k in cfg.application.sensitivity.values_mut() {
        *k = rng.random_range(0.0..=1.0);
    }
    if rng.random_bool(0.5) {
        cfg.defect_preset = amprint_core::printability::DefectPreset::Rated;
    }
    if rng.random_bool(0.3) {
        let cad: f64 = rng.random_range(100.0..1000.0);
        cfg.qs = None;
        cfg.mesh_area = Some(cad * rng.random_range(0.8..1.0));
        cfg.cad_area = Some(cad);
    } else {
        cfg.qs = Some(rng.random_range(0.5..=1.0));
    }
    let table = tech.critical_values();
    for i in 0..rng.random_range(0..8) {
        let cv = table[rng.random_range(0..table.len())];
        let mut c = PartCharacteristic::new(cv.kind, cv.dimension, cv.w * rng.random_range(0.3..3.0))
            .with_significance(rng.random_range(0.05..=1.0))
            .with_label(format!("c{i}"));
        if let Some(other) = table.iter().find(|o| o.kind == cv.kind && o.dimension != cv.dimension) {
            if rng.random_bool(0.5) {
                c = c.with_dimension(other.dimension, other.w * rng.random_range(0.3..3.0));
            }
        }
        if cv.unit == Unit::Millimetre && rng.random_bool(0.7) {
            c = c.with_epsilon(rng.random_range(0.0..0.3), EpsilonSource::Manual);
        }
        cfg.characteristics.push(c);
    }
    cfg
}

fn cli_http_equivalence() -> Outcome {
    let rt = tokio::runtime::Builder::new_current_thread().enable_all().build().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let app = amprint_service::router();
    let mut differing = 0;
    let mut failures: BTreeMap<String, usize> = BTreeMap::new();
    for i in 0..100 {
        let body = serde_json::to_vec(&random_config(&mut rng)).unwrap();
        let path = dir.path().join(format!("cfg{i}.json"));
        fs::write(&path, &body).unwrap();
        let out = Command::new(env!("CARGO_BIN_EXE_amprint"))
            .args(["--json", "printability", "score", "--config"])
            .arg(&path)
            .output()
            .unwrap();
        let cli: Value = serde_json::from_slice(&out.stdout).unwrap();
        let req = Request::post("/api/v1/score").body(Body::from(body)).unwrap();
        let http: Value = rt.block_on(async {
            let resp = app.clone().oneshot(req).await.unwrap();
            serde_json::from_slice(&resp.into_body().collect().await.unwrap().to_bytes()).unwrap()
        });
        if !out.status.success() {
            *failures.entry(http["code"].as_str().unwrap_or("?").to_string()).or_default() += 1;
        }
        let cli_result = if out.status.success() { &cli["result"] } else { &cli };
        let same = if out.status.success() { *cli_result == http } else { http["status"].is_number() && cli["exit_code"] == 1 };
        if !same {
            differing += 1;
        }
    }
    let rejected: usize = failures.values().sum();
    Outcome::new(
        differing == 0 && rejected == 0,
        format!("100 seeded random configs: {differing} differing JSON results (0), {rejected} rejected {failures:?}"),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("printability tables", printability_tables),
        ("global probability", global_probability),
        ("end-to-end scores", end_to_end_scores),
        ("coefficient fitting", coefficient_fitting),
        ("round-trip reconstruction", round_trip),
        ("registration", registration),
        ("curvature", curvature),
        ("error network", error_network),
        ("cli/service equivalence", cli_http_equivalence),
    ];
    println!("acceptance: {} criteria", criteria.len());
    let mut unexpected = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let out = check();
        let known = !out.pass && !out.misses.is_empty() && out.misses.iter().all(|m| KNOWN_DIVERGENCES.contains(&m.as_str()));
        let tag = if out.pass { "PASS" } else { "FAIL" };
        let note = if known { format!("  [known divergence: {}]", out.misses.join(", ")) } else { String::new() };
        println!("{tag} {:>2} {name}: {}{note}", i + 1, out.detail);
        if !out.pass && !known {
            unexpected += 1;
        }
    }
    if unexpected > 0 {
        println!("acceptance: {unexpected} unexpected failure(s)");
        ExitCode::FAILURE
    } else {
        println!("acceptance: no failures beyond documented divergences");
        ExitCode::SUCCESS
    }
}
