use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use amprint_core::features::FeatureError;
use amprint_core::net::NetError;
use amprint_core::printability::PrintabilityError;
use amprint_core::recon::ReconError;
use amprint_core::registration::RegistrationError;
use amprint_core::MeshError;
use amprint_service::ApiError;
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Features(#[from] FeatureError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Recon(#[from] ReconError),
    #[error(transparent)]
    Registration(#[from] RegistrationError),
    #[error(transparent)]
    Printability(#[from] PrintabilityError),
    #[error(transparent)]
    Api(#[from] ApiError),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }

    pub fn io(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
        move |source| CliError::Io { path: path.to_path_buf(), source }
    }
}

/// What a command hands back: the human summary, the machine result and the
/// file it wrote, if any.
pub struct Outcome {
    pub command: &'static str,
    pub summary: String,
    pub result: Value,
    pub output: Option<PathBuf>,
}

impl Outcome {
    pub fn new(command: &'static str, summary: String, result: Value) -> Self {
        Outcome { command, summary, result, output: None }
    }

    pub fn with_output(mut self, path: Option<&Path>) -> Self {
        self.output = path.map(Path::to_path_buf);
        self
    }

    pub fn print(&self, json: bool) {
        if json {
            let doc = serde_json::json!({
                "command": self.command,
                "output": self.output,
                "result": self.result,
            });
            println!("{doc}");
        } else {
            println!("{}", self.summary.trim_end());
            if let Some(p) = &self.output {
                println!("wrote {}", p.display());
            }
        }
    }
}

fn parent_dir(path: &Path) -> &Path {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    }
}

/// Writes through a temporary file in the destination directory and renames
/// it into place, so a failed command leaves nothing behind.
pub fn write_atomic<F>(path: &Path, fill: F) -> Result<(), CliError>
where
    F: FnOnce(&mut dyn Write) -> Result<(), CliError>,
{
    let tmp = tempfile::Builder::new()
        .prefix(".amprint-")
        .tempfile_in(parent_dir(path))
        .map_err(CliError::io(path))?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        fill(&mut w)?;
        w.flush().map_err(CliError::io(path))?;
    }
    tmp.persist(path).map_err(|e| CliError::Io { path: path.to_path_buf(), source: e.error })?;
    Ok(())
}

/// Directory counterpart of [`write_atomic`]. An existing target is only
/// replaced when it is empty or holds a previous layer stack.
pub fn write_dir_atomic<F>(path: &Path, fill: F) -> Result<(), CliError>
where
    F: FnOnce(&Path) -> Result<(), CliError>,
{
    if path.exists() {
        let empty = fs::read_dir(path).map_err(CliError::io(path))?.next().is_none();
        if !empty && !path.join("stack.json").exists() {
            return Err(CliError::Usage(format!(
                "{} exists and is not a layer stack; refusing to replace it",
                path.display()
            )));
        }
    }
    let tmp = tempfile::Builder::new()
        .prefix(".amprint-")
        .tempdir_in(parent_dir(path))
        .map_err(CliError::io(path))?;
    fill(tmp.path())?;
    if path.exists() {
        fs::remove_dir_all(path).map_err(CliError::io(path))?;
    }
    let kept = tmp.keep();
    fs::rename(&kept, path).map_err(CliError::io(path))?;
    Ok(())
}

pub fn read_file(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(CliError::io(path))
}

/// Output format picked from the extension.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Json,
}

impl TableFormat {
    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("csv") => Ok(TableFormat::Csv),
            Some("json") => Ok(TableFormat::Json),
            _ => Err(CliError::Usage(format!("{}: expected a .csv or .json output", path.display()))),
        }
    }
}
