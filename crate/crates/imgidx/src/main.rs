use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use imgidx::commands::{self, Precision, ProbeOptions};
use imgidx::config::FileConfig;
use imgidx::{CliError, Result};

/// Multi-image position encodings: dumps, assembly, gradient checks and the
/// identity probe.
#[derive(Parser, Debug)]
#[command(name = "imgidx", version)]
struct Cli {
    /// JSON configuration; missing sections use defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file, or output directory for `probe` and `extrapolate`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed; for `probe` and `extrapolate` it replaces the seed list.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Resolved configuration (defaults, file and flags) as canonical JSON.
    DumpConfig,
    /// Rotary frequency table as canonical JSON.
    DumpRope,
    /// Image-index embedding table as canonical JSON.
    DumpIndex {
        /// Number of images N.
        #[arg(long, default_value_t = 64)]
        images: usize,
    },
    /// Assemble a random multi-image sequence and report its layout.
    Assemble,
    /// Compare analytic and finite-difference gradients.
    Gradcheck {
        /// Run in single precision with relaxed tolerances.
        #[arg(long)]
        f32: bool,
        /// Debug: distort the analytic gradient of this block.
        #[arg(long, value_name = "BLOCK")]
        corrupt: Option<String>,
    },
    /// Train and evaluate the ablation grid.
    Probe {
        /// Also save every trained model under `checkpoints/`.
        #[arg(long)]
        checkpoints: bool,
    },
    /// Evaluate saved checkpoints on the extrapolated image counts.
    Extrapolate {
        /// Directory of checkpoint files.
        #[arg(long)]
        checkpoints: PathBuf,
    },
    /// Check a run directory against its manifest.
    Verify {
        dir: PathBuf,
    },
}

fn command_line() -> String {
    std::env::args().collect::<Vec<_>>().join(" ")
}

fn require_out(out: Option<&Path>, cmd: &str) -> Result<PathBuf> {
    out.map(Path::to_path_buf)
        .ok_or_else(|| CliError::BadInput(format!("{cmd} needs --out DIR")))
}

fn print(text: Option<String>) {
    if let Some(t) = text {
        print!("{t}");
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = FileConfig::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.probe.seeds = vec![seed];
    }
    let seed = cli.seed.unwrap_or(0);
    let out = cli.out.as_deref();
    match cli.command {
        Command::DumpConfig => print(commands::emit(imgidx::canon::to_canonical(&cfg)?, out)?),
        Command::DumpRope => print(commands::emit(commands::dump_rope(&cfg)?, out)?),
        Command::DumpIndex { images } => print(commands::emit(commands::dump_index(&cfg, images)?, out)?),
        Command::Assemble => print(commands::emit(commands::assemble_report(&cfg, seed)?, out)?),
        Command::Gradcheck { f32, corrupt } => {
            let precision = if f32 { Precision::F32 } else { Precision::F64 };
            let outcome = commands::gradcheck(&cfg, seed, precision, corrupt)?;
            print!("{}", outcome.render());
            if let Some(p) = out {
                commands::emit(imgidx::canon::to_canonical(&outcome.report)?, Some(p))?;
            }
            if !outcome.passed() {
                return Err(CliError::Failed("gradient check failed".into()));
            }
        }
        Command::Probe { checkpoints } => {
            let dir = require_out(out, "probe")?;
            let opts = ProbeOptions {
                config_path: cli.config.as_deref(),
                out: &dir,
                checkpoints,
                command: command_line(),
            };
            let (result, _) = commands::probe(&cfg, &opts)?;
            for r in &result.rows {
                let note = if r.failure.is_empty() { String::new() } else { format!("  FAILED: {}", r.failure) };
                println!("{:<11} seed {:<3} {:<12} {:.3}{note}", r.config.name(), r.seed, r.eval_set.name(), r.accuracy);
            }
            println!("wrote {}", dir.display());
        }
        Command::Extrapolate { checkpoints } => {
            let dir = require_out(out, "extrapolate")?;
            let result = commands::extrapolate(&cfg, &checkpoints, cli.config.as_deref(), &dir, command_line())?;
            for r in &result.rows {
                println!("{:<11} seed {:<3} {:.3}", r.config.name(), r.seed, r.accuracy);
            }
        }
        Command::Verify { dir } => {
            let mismatches = commands::verify(&dir)?;
            if mismatches.is_empty() {
                println!("ok");
            } else {
                for m in &mismatches {
                    println!("mismatch {}: {}", m.path, m.reason);
                }
                return Err(CliError::Failed(format!("{} file(s) do not match the manifest", mismatches.len())));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("imgidx: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
