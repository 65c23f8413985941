use clap::builder::PossibleValuesParser;
use clap::{Parser, ValueEnum};
use magweyl_cli::config::{schema_json, Kind};
use magweyl_cli::{execute, Invocation};
use std::path::PathBuf;
use std::process::ExitCode;

const SCHEMA: &str = "schema";

fn targets() -> Vec<&'static str> {
    let mut v: Vec<&'static str> = Kind::value_variants().iter().map(|k| k.name()).collect();
    v.push(SCHEMA);
    v
}

/// Runs magnetic Weyl calculus experiments from JSON configs.
///
/// Exit status: 0 when every check passes, 1 when a check fails, 2 on a
/// configuration or setup error. `magweyl schema` prints the config schema.
#[derive(Debug, Parser)]
#[command(name = "magweyl", version)]
struct Cli {
    /// Experiment kind, or `schema`.
    #[arg(value_parser = PossibleValuesParser::new(targets()))]
    kind: String,
    /// JSON experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; defaults to the config's `output_dir`, then `out/<id>`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; 1 runs sequentially.
    #[arg(long)]
    threads: Option<usize>,
    /// Cap on quadrature and lattice-sum node evaluations.
    #[arg(long)]
    max_quadrature_nodes: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.kind == SCHEMA {
        print!("{}", schema_json());
        return ExitCode::SUCCESS;
    }
    let kind = Kind::from_str(&cli.kind, false).expect("parser restricts values");
    let Some(config) = cli.config else {
        eprintln!("error: --config <path> is required for `{kind}`");
        return ExitCode::from(2);
    };
    if let Some(t) = cli.threads {
        if let Err(e) = magweyl_core::exec::set_threads(t) {
            eprintln!("error: --threads: {e}");
            return ExitCode::from(2);
        }
    }
    let inv = Invocation {
        kind,
        config,
        out: cli.out,
        threads: cli.threads,
        max_quadrature_nodes: cli.max_quadrature_nodes,
    };
    match execute(&inv) {
        Ok(m) => {
            for c in &m.checks {
                let mark = if c.passed { "PASS" } else { "FAIL" };
                let note = c.note.as_deref().map(|n| format!("  ({n})")).unwrap_or_default();
                println!("{mark} {:<40} {:>12.4e} <= {:e}{note}", c.name, c.value, c.tolerance);
            }
            println!("{} in {:.2}s -> {}", m.id, m.runtime_s, m.out_dir.display());
            if m.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
