//! Scenario runner for the chiral-router simulator.

// `!(x >= 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod run;
mod scenario;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use config::{allowed_keys, find_kind, Config, ConfigError, KINDS};

#[derive(Parser)]
#[command(name = "chiral-router", version, about = "Chiral excitation routing scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Directory receiving CSV files and manifests.
    #[arg(long, global = true, default_value = ".")]
    output_dir: PathBuf,
    /// Seed for optimizer restarts.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Suppress the run summary.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file.
    Run { config: PathBuf },
    /// List scenario kinds with their keys, or the keys of one kind.
    List { kind: Option<String> },
    /// Check a scenario file without running it.
    Validate { config: PathBuf },
}

enum Failure {
    Config(ConfigError),
    Physics(chiral_router::Error),
    Io(String),
}

impl Failure {
    fn report(&self) -> (String, u8) {
        match self {
            Failure::Config(e) => (format!("config error: {e}"), 2),
            Failure::Physics(e) => (format!("physics error: {e}"), 1),
            Failure::Io(e) => (format!("i/o error: {e}"), 1),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

impl From<chiral_router::Error> for Failure {
    fn from(e: chiral_router::Error) -> Self {
        match e {
            chiral_router::Error::Config { key, message } => Failure::Config(ConfigError::Invalid { key, message }),
            other => Failure::Physics(other),
        }
    }
}

fn list(kind: Option<&str>) -> Result<String, Failure> {
    let mut out = String::new();
    match kind {
        None => {
            for k in KINDS {
                let required: Vec<&str> = allowed_keys(k).iter().filter(|s| s.required && s.key != "kind").map(|s| s.key).collect();
                out.push_str(&format!("{:<16} {}\n", k.name, k.summary));
                let required = if required.is_empty() { "(none)".to_string() } else { required.join(", ") };
                out.push_str(&format!("{:<16} required: {required}\n", ""));
            }
        }
        Some(name) => {
            let k = find_kind(name)?;
            out.push_str(&format!("{}: {}\n", k.name, k.summary));
            for s in allowed_keys(k) {
                let tag = if s.required { "required" } else { "optional" };
                out.push_str(&format!("  {:<28} {tag:<8} {}\n", s.key, s.doc));
            }
        }
    }
    Ok(out)
}

fn csv_name(cfg: &Config, config_path: &Path) -> Result<String, Failure> {
    if let Some(p) = cfg.str("output.csv_path")? {
        if p.is_empty() || Path::new(&p).is_absolute() || p.contains("..") {
            return Err(ConfigError::invalid("output.csv_path", "must be a relative file name inside the output directory").into());
        }
        return Ok(p);
    }
    let stem = config_path.file_stem().and_then(|s| s.to_str()).unwrap_or("scenario");
    Ok(format!("{stem}.csv"))
}

fn tagged(csv: &str, tag: &str) -> String {
    if tag.is_empty() {
        return csv.to_string();
    }
    let stem = csv.strip_suffix(".csv").unwrap_or(csv);
    format!("{stem}_{tag}.csv")
}

fn run(cli: &Cli, path: &Path) -> Result<(), Failure> {
    let cfg = Config::load(path)?;
    let plan = scenario::resolve(&cfg)?;
    let csv = csv_name(&cfg, path)?;
    let outcome = run::execute(&plan, cli.seed)?;

    let dir = &cli.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| Failure::Io(format!("{}: {e}", dir.display())))?;
    let mut outputs = Vec::new();
    for (tag, bytes) in &outcome.tables {
        let name = tagged(&csv, tag);
        let target = dir.join(&name);
        if let Some(parent) = target.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Failure::Io(format!("{}: {e}", parent.display())))?;
        }
        std::fs::write(&target, bytes).map_err(|e| Failure::Io(format!("{}: {e}", target.display())))?;
        outputs.push(name);
    }
    let manifest = json!({
        "program": "chiral-router",
        "version": env!("CARGO_PKG_VERSION"),
        "config": path.file_name().map(|s| s.to_string_lossy().into_owned()),
        "kind": cfg.kind.name,
        "seed": cli.seed,
        "parameters": plan,
        "method": outcome.method,
        "results": outcome.results,
        "outputs": outputs,
    });
    let manifest_name = format!("{}.manifest.json", csv.strip_suffix(".csv").unwrap_or(&csv));
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    let target = dir.join(&manifest_name);
    std::fs::write(&target, text).map_err(|e| Failure::Io(format!("{}: {e}", target.display())))?;
    if !cli.quiet {
        println!("{}: {}", cfg.kind.name, path.display());
        for line in &outcome.summary {
            println!("  {line}");
        }
        for name in outputs.iter().chain(std::iter::once(&manifest_name)) {
            println!("  wrote {}", dir.join(name).display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { config } => run(&cli, config),
        Command::List { kind } => list(kind.as_deref()).map(|s| {
            // A closed pipe (e.g. `| head`) is not an error worth reporting.
            let _ = std::io::stdout().write_all(s.as_bytes());
        }),
        Command::Validate { config } => Config::load(config)
            .map_err(Failure::from)
            .and_then(|cfg| {
                scenario::resolve(&cfg)?;
                csv_name(&cfg, config)?;
                Ok(cfg.kind.name)
            })
            .map(|kind| {
                if !cli.quiet {
                    println!("ok: {} ({kind})", config.display());
                }
            }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (msg, code) = f.report();
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
