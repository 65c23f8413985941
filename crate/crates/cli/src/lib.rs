//! Experiment runner behind the `magweyl` binary.

pub mod config;
pub mod output;
pub mod plot;
pub mod runner;

use config::{parse_config, ConfigError, Kind};
use magweyl_core::moyal::DEFAULT_NODE_BUDGET;
use output::{json_bytes, sha256_hex, write_file, Manifest};
use serde_json::json;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Io(PathBuf, std::io::Error),
    /// Invalid setup or a guard tripped before any check ran.
    Rejected(String),
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(e) => e.fmt(f),
            RunError::Io(p, e) => write!(f, "{}: {e}", p.display()),
            RunError::Rejected(m) => write!(f, "rejected: {m}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Invocation {
    pub kind: Kind,
    pub config: PathBuf,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub max_quadrature_nodes: Option<u64>,
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

fn io_err(p: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |e| RunError::Io(p.to_path_buf(), e)
}

/// Runs one experiment and writes its report, tables, plots and manifest.
pub fn execute(inv: &Invocation) -> Result<Manifest, RunError> {
    let bytes = fs::read(&inv.config).map_err(io_err(&inv.config))?;
    let text = String::from_utf8(bytes.clone()).map_err(|e| ConfigError {
        path: ".".into(),
        message: e.to_string(),
    })?;
    let cfg = parse_config(&text)?;
    if cfg.kind != inv.kind {
        return Err(RunError::Rejected(format!(
            "config is for `{}`, command was `{}`",
            cfg.kind, inv.kind
        )));
    }
    let out_dir = inv
        .out
        .clone()
        .or_else(|| cfg.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| Path::new("out").join(&cfg.id));
    let budget = inv.max_quadrature_nodes.unwrap_or(DEFAULT_NODE_BUDGET);

    let started = unix_now();
    let clock = Instant::now();
    let outcome = runner::run(&cfg, &runner::RunOptions { budget }).map_err(RunError::Rejected)?;

    fs::create_dir_all(&out_dir).map_err(io_err(&out_dir))?;
    let mut artifacts = Vec::new();
    let report = json!({"id": cfg.id, "kind": cfg.kind.name(), "seed": cfg.seed, "checks": outcome.checks, "result": outcome.report});
    let mut put = |name: &str, data: &[u8]| -> Result<(), RunError> {
        write_file(&out_dir, name, data).map_err(io_err(&out_dir.join(name)))?;
        artifacts.push(name.to_string());
        Ok(())
    };
    put("report.json", &json_bytes(&report))?;
    for t in &outcome.tables {
        put(&t.name, &t.to_bytes())?;
    }
    for (name, data) in &outcome.files {
        put(name, data)?;
    }

    let passed = outcome.checks.iter().all(|c| c.passed);
    let mut manifest = Manifest {
        id: cfg.id.clone(),
        kind: cfg.kind.name().into(),
        config_hash: sha256_hex(&bytes),
        code_version: env!("CARGO_PKG_VERSION").into(),
        seed: cfg.seed,
        threads: inv.threads,
        max_quadrature_nodes: budget,
        started_unix: started,
        finished_unix: 0.0,
        runtime_s: 0.0,
        passed,
        checks: outcome.checks,
        artifacts,
        out_dir: out_dir.clone(),
    };
    for svg in plot::emit_plots(&manifest).map_err(io_err(&out_dir))? {
        if let Some(name) = svg.file_name() {
            manifest.artifacts.push(name.to_string_lossy().into_owned());
        }
    }
    manifest.runtime_s = clock.elapsed().as_secs_f64();
    manifest.finished_unix = unix_now();
    if let Some(missing) = manifest.artifact_paths().into_iter().find(|p| !p.is_file()) {
        return Err(RunError::Io(
            missing,
            std::io::Error::new(std::io::ErrorKind::NotFound, "declared artifact missing"),
        ));
    }
    let path = out_dir.join("manifest.json");
    fs::write(&path, json_bytes(&manifest)).map_err(io_err(&path))?;
    Ok(manifest)
}
