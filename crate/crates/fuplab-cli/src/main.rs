//! `fuplab <experiment> [--config FILE]` runs one experiment and writes its
//! results plus a manifest to the output directory.
//!
//! Exit codes: 0 all checks passed, 1 some check failed (results written),
//! 2 configuration error (nothing written), 3 numerical contract violated.

mod config;
mod experiments;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::Parser;
use serde::Serialize;

use config::{Kind, Overrides, Precision, Resolved};
use experiments::{Artifacts, Check, Failure};

#[derive(Parser, Debug)]
#[command(name = "fuplab", version, about = "Run a fuplab experiment")]
struct Cli {
    /// Experiment to run.
    #[arg(value_enum)]
    kind: Kind,
    /// TOML configuration file.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Output directory (overrides the file).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Recorded in the manifest; experiments run serially.
    #[arg(long)]
    threads: Option<usize>,
    /// Precision level emitted by the constants experiment.
    #[arg(long, value_enum)]
    precision: Option<Precision>,
    /// Root for default output directories.
    #[arg(long, env = "FUPLAB_OUT_ROOT")]
    out_root: Option<PathBuf>,
    /// Print the resolved configuration as JSON and exit.
    #[arg(long)]
    print_config: bool,
}

#[derive(Serialize)]
struct FileEntry<'a> {
    name: &'a str,
    bytes: usize,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    created_unix: u64,
    config: &'a Resolved,
    files: Vec<FileEntry<'a>>,
    checks: &'a [Check],
    status: &'static str,
}

fn write_outputs(dir: &Path, resolved: &Resolved, art: &Artifacts, pass: bool) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for (name, bytes) in &art.files {
        std::fs::write(dir.join(name), bytes)?;
    }
    let manifest = Manifest {
        tool: "fuplab",
        version: env!("CARGO_PKG_VERSION"),
        created_unix: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        config: resolved,
        files: art
            .files
            .iter()
            .map(|(name, b)| FileEntry { name, bytes: b.len() })
            .collect(),
        checks: &art.checks,
        status: if pass { "pass" } else { "fail" },
    };
    let mut bytes = serde_json::to_vec_pretty(&manifest)?;
    bytes.push(b'\n');
    std::fs::write(dir.join("manifest.json"), bytes)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let file = match config::load(cli.config.as_deref()) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    let over = Overrides {
        seed: cli.seed,
        out: cli.out,
        threads: cli.threads,
        precision: cli.precision,
        out_root: cli.out_root,
    };
    let mut resolved = match config::resolve(cli.kind, file, over) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    if cli.print_config {
        match serde_json::to_string_pretty(&resolved) {
            Ok(s) => println!("{s}"),
            Err(e) => {
                eprintln!("{e}");
                return ExitCode::from(1);
            }
        }
        return ExitCode::SUCCESS;
    }
    let art = match experiments::run(&mut resolved) {
        Ok(a) => a,
        Err(Failure::Config(e)) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
        Err(Failure::Contract(e)) => {
            eprintln!("{e}");
            return ExitCode::from(3);
        }
        Err(Failure::Internal(e)) => {
            eprintln!("internal error: {e}");
            return ExitCode::from(1);
        }
    };
    let pass = art.checks.iter().all(|c| c.pass);
    if let Err(e) = write_outputs(&resolved.out, &resolved, &art, pass) {
        eprintln!("cannot write to {}: {e}", resolved.out.display());
        return ExitCode::from(2);
    }
    for c in &art.checks {
        let mark = if c.pass { "ok  " } else { "FAIL" };
        if c.detail.is_empty() {
            println!("{mark} {}", c.name);
        } else {
            println!("{mark} {}: {}", c.name, c.detail);
        }
    }
    println!("wrote {}", resolved.out.display());
    if pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
