use std::fmt::Write as _;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use amprint_core::features::{extract_features, features_for, read_features_csv, write_features_csv, FeatureRow};
use amprint_core::kdtree::KdTree;
use amprint_core::mesh::{load_mesh, parse_ply_points, MeshFormat};
use amprint_core::net::{self, ErrorNet, TrainConfig, TrainingSample};
use amprint_core::printability::{fit_coefficient, Direction, Technology};
use amprint_core::recon::{reconstruct, slice_mesh, write_cloud_ply, LayerStack, SliceConfig};
use amprint_core::registration::{c2c_distance, icp_align, IcpConfig, RigidTransform};
use amprint_core::{Point, TriangleMesh};
use serde_json::json;

use crate::output::{read_file, write_atomic, write_dir_atomic, CliError, Outcome, TableFormat};
use crate::{
    AnnCommand, BedArgs, C2cArgs, Cli, Command, ExtractArgs, FeaturesCommand, FitArgs, IcpArgs, ImportanceArgs,
    MeshCommand, MeshFormatArg, MeshInput, PredictArgs, PrintabilityCommand, ReconstructArgs, RegisterCommand,
    ScoreArgs, ServeArgs, SliceArgs, TrainArgs,
};

pub const CONFIG_DIR_ENV: &str = "AMPRINT_CONFIG_DIR";

pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let seed = cli.seed;
    match &cli.command {
        Command::Mesh(MeshCommand::Info(a)) => mesh_info(a),
        Command::Features(FeaturesCommand::Extract(a)) => features_extract(a, seed),
        Command::Ann(AnnCommand::Train(a)) => ann_train(a, seed),
        Command::Ann(AnnCommand::Predict(a)) => ann_predict(a),
        Command::Ann(AnnCommand::Importance(a)) => ann_importance(a, seed),
        Command::Slice(a) => slice(a),
        Command::Reconstruct(a) => reconstruct_cmd(a),
        Command::Register(RegisterCommand::Icp(a)) => register_icp(a),
        Command::C2c(a) => c2c(a),
        Command::Printability(PrintabilityCommand::Score(a)) => score(a),
        Command::Printability(PrintabilityCommand::FitC(a)) => fit_c(a),
        Command::Serve(a) => serve(a),
    }
}

fn mesh_format(arg: Option<MeshFormatArg>) -> Option<MeshFormat> {
    arg.map(|f| match f {
        MeshFormatArg::Stl => MeshFormat::StlBinary,
        MeshFormatArg::StlAscii => MeshFormat::StlAscii,
        MeshFormatArg::Ply => MeshFormat::Ply,
        MeshFormatArg::Obj => MeshFormat::Obj,
    })
}

fn load(input: &MeshInput) -> Result<TriangleMesh, CliError> {
    Ok(load_mesh(&input.mesh, mesh_format(input.format))?)
}

fn has_ext(path: &Path, ext: &str) -> bool {
    path.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case(ext))
}

/// Vertices of a mesh, or the points of a PLY cloud (which may have no faces).
fn load_points(path: &Path) -> Result<Vec<Point>, CliError> {
    if has_ext(path, "ply") {
        return Ok(parse_ply_points(&read_file(path)?)?);
    }
    Ok(load_mesh(path, None)?.vertices().to_vec())
}

fn bed_config(b: &BedArgs) -> SliceConfig {
    SliceConfig { pitch: b.pitch, thickness: b.thickness, bed_width: b.bed_width, bed_depth: b.bed_depth }
}

fn mesh_info(a: &MeshInput) -> Result<Outcome, CliError> {
    let mesh = load(a)?;
    let bb = mesh.bounding_box();
    let result = json!({
        "vertices": mesh.num_vertices(),
        "triangles": mesh.num_triangles(),
        "edges": mesh.edge_count(),
        "surface_area": mesh.surface_area(),
        "bbox_min": [bb.min.x, bb.min.y, bb.min.z],
        "bbox_max": [bb.max.x, bb.max.y, bb.max.z],
        "closed": mesh.is_closed(),
        "euler_characteristic": mesh.euler_characteristic(),
    });
    let e = bb.extent();
    let summary = format!(
        "{}\n  vertices   {}\n  triangles  {}\n  area       {:.4} mm²\n  extent     {:.4} x {:.4} x {:.4} mm\n  closed     {} (χ = {})",
        a.mesh.display(),
        mesh.num_vertices(),
        mesh.num_triangles(),
        mesh.surface_area(),
        e.x,
        e.y,
        e.z,
        mesh.is_closed(),
        mesh.euler_characteristic()
    );
    Ok(Outcome::new("mesh info", summary, result))
}

fn features_extract(a: &ExtractArgs, seed: u64) -> Result<Outcome, CliError> {
    let mesh = load(&a.input)?;
    let vertices: Vec<usize> = match a.sample {
        Some(f) => mesh.sample_vertices(f, seed)?,
        None => (0..mesh.num_vertices()).collect(),
    };
    let rows = features_for(&mesh, &vertices)?;
    let mut targets = None;
    let mut icp_rms = None;
    if let Some(measured) = &a.measured {
        let tree = KdTree::new(load_points(measured)?);
        let fit = icp_align(mesh.vertices(), &tree, &IcpConfig::default())?;
        let moved: Vec<Point> = vertices.iter().map(|&v| fit.transform.apply(&mesh.vertices()[v])).collect();
        targets = Some(c2c_distance(&moved, &tree)?.distances);
        icp_rms = Some(fit.rms);
    }
    write_atomic(&a.out, |w| Ok(write_features_csv(&rows, targets.as_deref(), w)?))?;
    let mut summary = format!("{} feature rows from {} vertices", rows.len(), mesh.num_vertices());
    if let Some(rms) = icp_rms {
        let _ = write!(summary, "\nmeasured targets attached (ICP rms {rms:.5} mm)");
    }
    let result = json!({ "rows": rows.len(), "vertices": mesh.num_vertices(), "targets": targets.is_some(), "icp_rms": icp_rms });
    Ok(Outcome::new("features extract", summary, result).with_output(Some(&a.out)))
}

fn read_samples(path: &Path) -> Result<Vec<TrainingSample>, CliError> {
    let (rows, targets) = read_features_csv(read_file(path)?.as_slice())?;
    let targets = targets.ok_or_else(|| CliError::Usage(format!("{}: no 'target' column", path.display())))?;
    Ok(rows.into_iter().zip(targets).map(|(r, t)| TrainingSample::new(r, t)).collect())
}

fn load_model(path: &Path) -> Result<ErrorNet, CliError> {
    let text = String::from_utf8_lossy(&read_file(path)?).into_owned();
    Ok(ErrorNet::from_json(&text)?)
}

fn ann_train(a: &TrainArgs, seed: u64) -> Result<Outcome, CliError> {
    let samples = read_samples(&a.data)?;
    let cfg = TrainConfig {
        epochs: a.epochs,
        batch_size: a.batch_size,
        learning_rate: a.learning_rate,
        split: a.split,
        seed,
    };
    let out = net::train(&samples, &cfg)?;
    let model = out.net.to_json()?;
    write_atomic(&a.out, |w| w.write_all(model.as_bytes()).map_err(CliError::io(&a.out)))?;
    if let Some(h) = &a.history {
        write_atomic(h, |w| {
            let mut s = String::from("epoch,train_mse,validation_mse\n");
            for e in &out.history {
                let _ = writeln!(s, "{},{},{}", e.epoch, e.train_mse, e.validation_mse);
            }
            w.write_all(s.as_bytes()).map_err(CliError::io(h))
        })?;
    }
    let best = &out.history[out.best_epoch - 1];
    let summary = format!(
        "trained on {} samples for {} epochs\nbest epoch {}: train mse {:.6e}, validation mse {:.6e}",
        samples.len(),
        out.history.len(),
        out.best_epoch,
        best.train_mse,
        best.validation_mse
    );
    let result = json!({
        "samples": samples.len(),
        "best_epoch": out.best_epoch,
        "history": out.history,
    });
    Ok(Outcome::new("ann train", summary, result).with_output(Some(&a.out)))
}

/// Feature rows from a CSV, or from every vertex of a mesh.
fn load_rows(path: &Path, format: Option<MeshFormatArg>) -> Result<(Vec<FeatureRow>, Option<Vec<f64>>), CliError> {
    if format.is_none() && has_ext(path, "csv") {
        return Ok(read_features_csv(read_file(path)?.as_slice())?);
    }
    let mesh = load_mesh(path, mesh_format(format))?;
    Ok((extract_features(&mesh)?, None))
}

fn ann_predict(a: &PredictArgs) -> Result<Outcome, CliError> {
    let model = load_model(&a.model)?;
    let (rows, targets) = load_rows(&a.data, a.format)?;
    let pred = model.predict(&rows)?;
    write_atomic(&a.out, |w| {
        let mut s = String::new();
        s.push_str(if targets.is_some() { "index,predicted,actual\n" } else { "index,predicted\n" });
        for (i, p) in pred.iter().enumerate() {
            match &targets {
                Some(t) => writeln!(s, "{i},{p},{}", t[i]),
                None => writeln!(s, "{i},{p}"),
            }
            .expect("string write");
        }
        w.write_all(s.as_bytes()).map_err(CliError::io(&a.out))
    })?;
    let epsilon = pred.iter().sum::<f64>() / pred.len().max(1) as f64;
    let mut summary = format!("{} predictions, mean {:.5} mm", pred.len(), epsilon);
    let eval = targets.as_ref().map(|t| net::evaluate(&pred, t));
    if let Some(e) = &eval {
        let _ = write!(
            summary,
            "\nagainst targets: mae {:.5} mm, std {:.5} mm, mean actual {:.5} mm",
            e.mae, e.std, e.mean_actual
        );
    }
    let result = json!({ "count": pred.len(), "mean_prediction": epsilon, "evaluation": eval });
    Ok(Outcome::new("ann predict", summary, result).with_output(Some(&a.out)))
}

fn ann_importance(a: &ImportanceArgs, seed: u64) -> Result<Outcome, CliError> {
    let model = load_model(&a.model)?;
    let samples = read_samples(&a.data)?;
    let fmt = a.out.as_deref().map(TableFormat::from_path).transpose()?;
    let imp = net::permutation_importance(&model, &samples, a.repeats, seed)?;
    if let (Some(path), Some(fmt)) = (&a.out, fmt) {
        write_atomic(path, |w| {
            let text = match fmt {
                TableFormat::Json => serde_json::to_string_pretty(&imp)?,
                TableFormat::Csv => {
                    let mut s = String::from("feature,score,mean_delta,std_delta,zero_spread\n");
                    for f in &imp {
                        let _ = writeln!(s, "{},{},{},{},{}", f.feature, f.score, f.mean_delta, f.std_delta, f.zero_spread);
                    }
                    s
                }
            };
            w.write_all(text.as_bytes()).map_err(CliError::io(path))
        })?;
    }
    let mut summary = format!("permutation importance over {} samples, {} repeats\n", samples.len(), a.repeats);
    let mut ranked: Vec<_> = imp.iter().collect();
    ranked.sort_by(|x, y| y.score.total_cmp(&x.score));
    for f in ranked {
        let flag = if f.zero_spread { "  (zero spread)" } else { "" };
        let _ = writeln!(summary, "  {:<6} {:>10.3}{flag}", f.feature, f.score);
    }
    Ok(Outcome::new("ann importance", summary, serde_json::to_value(&imp)?).with_output(a.out.as_deref()))
}

fn slice(a: &SliceArgs) -> Result<Outcome, CliError> {
    let mesh = load(&a.input)?;
    let stack = slice_mesh(&mesh, &bed_config(&a.bed))?;
    write_dir_atomic(&a.out, |dir| Ok(stack.save(dir)?))?;
    let white: usize = stack.layers.iter().map(|l| l.count_white()).sum();
    let summary = format!(
        "{} layers of {} x {} px (pitch {} mm, thickness {} mm), {} solid pixels\nsynthetic layer images",
        stack.layers.len(),
        stack.width(),
        stack.height(),
        stack.pitch,
        stack.thickness,
        white
    );
    let result = json!({
        "layers": stack.layers.len(),
        "width": stack.width(),
        "height": stack.height(),
        "origin_px": stack.origin_px,
        "solid_pixels": white,
        "source": amprint_core::recon::SYNTHETIC_FLAG,
    });
    Ok(Outcome::new("slice", summary, result).with_output(Some(&a.out)))
}

fn reconstruct_cmd(a: &ReconstructArgs) -> Result<Outcome, CliError> {
    let (stack, mesh_area) = if a.input.is_dir() {
        (LayerStack::load(&a.input)?, None)
    } else {
        let mesh = load_mesh(&a.input, mesh_format(a.format))?;
        (slice_mesh(&mesh, &bed_config(&a.bed))?, Some(mesh.surface_area()))
    };
    let area = a.source_area.or(mesh_area);
    let cloud = reconstruct(&stack, area)?;
    write_atomic(&a.out, |w| Ok(write_cloud_ply(&cloud, w)?))?;
    let mut summary = format!("{} points from {} layers", cloud.len(), stack.layers.len());
    if area.is_some() {
        let _ = write!(summary, ", {:.1} points/mm²", cloud.density);
    }
    let result = json!({ "points": cloud.len(), "layers": stack.layers.len(), "density": area.map(|_| cloud.density) });
    Ok(Outcome::new("reconstruct", summary, result).with_output(Some(&a.out)))
}

fn register_icp(a: &IcpArgs) -> Result<Outcome, CliError> {
    let source = load_points(&a.source)?;
    let tree = KdTree::new(load_points(&a.target)?);
    let cfg = IcpConfig { max_iterations: a.max_iterations, tolerance: a.tolerance, trim: a.trim };
    let fit = icp_align(&source, &tree, &cfg)?;
    let text = serde_json::to_string_pretty(&fit.transform)?;
    write_atomic(&a.out, |w| w.write_all(text.as_bytes()).map_err(CliError::io(&a.out)))?;
    let summary = format!(
        "ICP: rms {:.6} -> {:.6} mm after {} iterations ({})",
        fit.initial_rms,
        fit.rms,
        fit.iterations,
        if fit.converged { "converged" } else { "iteration limit" }
    );
    let result = json!({
        "transform": fit.transform,
        "rms": fit.rms,
        "initial_rms": fit.initial_rms,
        "iterations": fit.iterations,
        "converged": fit.converged,
    });
    Ok(Outcome::new("register icp", summary, result).with_output(Some(&a.out)))
}

fn c2c(a: &C2cArgs) -> Result<Outcome, CliError> {
    let fmt = a.out.as_deref().map(TableFormat::from_path).transpose()?;
    let mut source = load_points(&a.source)?;
    let tree = KdTree::new(load_points(&a.target)?);
    let mut applied = None;
    if let Some(t) = &a.transform {
        let tf: RigidTransform = serde_json::from_slice(&read_file(t)?)?;
        applied = Some(tf);
    } else if a.icp {
        applied = Some(icp_align(&source, &tree, &IcpConfig::default())?.transform);
    }
    if let Some(tf) = &applied {
        source = tf.apply_all(&source);
    }
    let stats = c2c_distance(&source, &tree)?;
    if let (Some(path), Some(fmt)) = (&a.out, fmt) {
        write_atomic(path, |w| {
            let text = match fmt {
                TableFormat::Json => serde_json::to_string_pretty(&json!({
                    "distances": stats.distances,
                    "mae": stats.mae,
                    "std": stats.std,
                    "std_kind": "population",
                }))?,
                TableFormat::Csv => {
                    let mut s = String::from("distance\n");
                    for d in &stats.distances {
                        let _ = writeln!(s, "{d}");
                    }
                    let _ = writeln!(s, "# mae,{}\n# std,{}\n# std_kind,population", stats.mae, stats.std);
                    s
                }
            };
            w.write_all(text.as_bytes()).map_err(CliError::io(path))
        })?;
    }
    let summary = format!(
        "{} source points: MAE {:.5} mm, STD {:.5} mm, max {:.5} mm",
        stats.distances.len(),
        stats.mae,
        stats.std,
        stats.distances.iter().copied().fold(0.0, f64::max)
    );
    let result = json!({ "count": stats.distances.len(), "mae": stats.mae, "std": stats.std, "transform": applied });
    Ok(Outcome::new("c2c", summary, result).with_output(a.out.as_deref()))
}

/// Relative config paths that do not exist fall back to the config directory.
fn resolve_config(path: &Path) -> PathBuf {
    if path.exists() || path.is_absolute() {
        return path.to_path_buf();
    }
    match std::env::var_os(CONFIG_DIR_ENV) {
        Some(dir) => Path::new(&dir).join(path),
        None => path.to_path_buf(),
    }
}

fn score(a: &ScoreArgs) -> Result<Outcome, CliError> {
    let path = resolve_config(&a.config);
    let report = amprint_service::score_bytes(&read_file(&path)?)?;
    let value = serde_json::to_value(&report)?;
    if let Some(out) = &a.out {
        let text = serde_json::to_string_pretty(&report)?;
        write_atomic(out, |w| w.write_all(text.as_bytes()).map_err(CliError::io(out)))?;
    }
    let mut summary = format!("{} / {}\n", report.technology.name(), report.application);
    let _ = writeln!(summary, "  global              survival {:.4}", report.global.survival);
    for c in &report.characteristics {
        let name = c.label.clone().unwrap_or_else(|| c.kind.name().to_string());
        let _ = writeln!(
            summary,
            "  {:<20}{:>10.4} (w {}, eps {:.4}) survival {:.4}",
            name, c.value, c.critical_value, c.epsilon, c.survival
        );
    }
    let _ = write!(summary, "printability score {:.2}%", report.score_percent);
    Ok(Outcome::new("printability score", summary, value).with_output(a.out.as_deref()))
}

fn fit_c(a: &FitArgs) -> Result<Outcome, CliError> {
    let direction = Direction::parse(&a.direction).expect("validated by clap");
    let targets: Vec<(f64, Direction)> = match (&a.technology, a.w) {
        (Some(t), _) => {
            let tech =
                Technology::parse(t).ok_or_else(|| CliError::Usage(format!("unknown technology {t:?} (FDM, BJ or MJ)")))?;
            let mut v: Vec<(f64, Direction)> = Vec::new();
            for cv in tech.critical_values() {
                if !v.contains(&(cv.w, cv.direction)) {
                    v.push((cv.w, cv.direction));
                }
            }
            v
        }
        (None, Some(w)) => vec![(w, direction)],
        (None, None) => unreachable!("clap requires --w or --technology"),
    };
    let fits = targets.iter().map(|&(w, d)| fit_coefficient(w, d)).collect::<Result<Vec<_>, _>>()?;
    let mut summary = String::new();
    for f in &fits {
        let _ = writeln!(summary, "w {:<10} {:<10} c {:.6e} (objective {:.3e})", f.w, format!("{:?}", f.direction).to_lowercase(), f.c, f.objective);
    }
    let result = if fits.len() == 1 && a.technology.is_none() { serde_json::to_value(fits[0])? } else { serde_json::to_value(&fits)? };
    Ok(Outcome::new("printability fit-c", summary, result))
}

fn serve(a: &ServeArgs) -> Result<Outcome, CliError> {
    let addr = SocketAddr::new(a.host, a.port);
    let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Io { path: PathBuf::from("<runtime>"), source: e })?;
    rt.block_on(amprint_service::serve(addr))
        .map_err(|e| CliError::Io { path: PathBuf::from(addr.to_string()), source: e })?;
    Ok(Outcome::new("serve", "server stopped".into(), json!({ "address": addr.to_string() })))
}
