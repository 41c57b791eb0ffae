use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use delta_metrology::commands::{run, Command, Context};
use delta_metrology::config::LoadedConfig;
use delta_metrology::error::{exit, CliError, Result};
use delta_metrology::scan_io::ScanFormat;

/// Delta-layer metrology: XRF simulation and quantification, weak-localization
/// and Hall analysis.
#[derive(Debug, Parser)]
#[command(name = "delta-metrology", version)]
struct Cli {
    /// Run configuration (TOML). Without one every option takes its default.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory (default: the configured output_dir, else "out").
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads for per-pixel analysis.
    #[arg(long, global = true, env = "DELTA_METROLOGY_THREADS")]
    threads: Option<usize>,

    /// Scan container written by `simulate`.
    #[arg(long, global = true, value_enum, default_value = "csv")]
    format: ScanFormat,

    #[command(subcommand)]
    command: Command,
}

fn context(cli: &Cli) -> Result<Context> {
    let mut cfg = match &cli.config {
        Some(p) => LoadedConfig::load(p)?,
        None => LoadedConfig::defaults(),
    };
    if let Some(seed) = cli.seed {
        cfg.config.seed = seed;
    }
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.config.output_dir.as_ref().map(|p| cfg.resolve(p)))
        .unwrap_or_else(|| PathBuf::from("out"));
    Ok(Context {
        cfg,
        out,
        format: cli.format,
    })
}

fn out_dir(cli: &Cli) -> PathBuf {
    cli.out.clone().unwrap_or_else(|| PathBuf::from("out"))
}

fn execute(cli: &Cli) -> Result<Vec<String>> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let ctx = context(cli)?;
    std::fs::create_dir_all(&ctx.out).map_err(|e| CliError::io(&ctx.out, e))?;
    Ok(run(&ctx, cli.command)?.lines)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(lines) => {
            for l in lines {
                println!("{l}");
            }
            ExitCode::from(exit::OK as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            let dir = match context(&cli) {
                Ok(ctx) => ctx.out,
                Err(_) => out_dir(&cli),
            };
            let record = serde_json::to_string_pretty(&e.record()).expect("record serializes");
            if std::fs::create_dir_all(&dir).is_ok() {
                let _ = std::fs::write(dir.join("error.json"), record + "\n");
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
