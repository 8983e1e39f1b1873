//! Implementation of each subcommand. `main` only parses arguments and maps
//! errors to exit codes.

use std::path::{Path, PathBuf};
use std::time::Instant;

use imgidx_core::assembler::{assemble, sequence_report, validate_sequence, SeparatorToken};
use imgidx_core::index_embed::embedding_table;
use imgidx_core::model::{grad_check, init_params, GradCheckOptions, GradCheckReport, ModelConfig, ModelInput, Params, TokenGrid};
use imgidx_core::mrope::build_freq_table;
use imgidx_core::probe::{run_extrapolation, run_one_keep, ProbeResult, ProbeSpec};
use imgidx_core::{LatentImage, Matrix, Real, Rng};
use rayon::prelude::*;
use serde::Serialize;

use crate::canon::to_canonical;
use crate::checkpoint::Checkpoint;
use crate::config::FileConfig;
use crate::error::{CliError, Result};
use crate::manifest::{digest_file, verify_dir, FileDigest, Mismatch, RunManifest, RunTiming};
use crate::results::{curves_csv, results_csv, summary_json};

/// Caps the number of probe worker threads.
pub const WORKERS_ENV: &str = "IMGIDX_WORKERS";

pub const RESULTS_FILE: &str = "results.csv";
pub const CURVES_FILE: &str = "curves.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const CHECKPOINT_DIR: &str = "checkpoints";
pub const EXTRAPOLATION_FILE: &str = "extrapolation.csv";

// Streams for the random instances built by `assemble` and `gradcheck`.
const ASSEMBLE_STREAM: u64 = 10;
const GRADCHECK_STREAM: u64 = 11;

/// Write `text` to `out`, or return it for stdout.
pub fn emit(text: String, out: Option<&Path>) -> Result<Option<String>> {
    match out {
        None => Ok(Some(text)),
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
            }
            std::fs::write(p, text).map_err(|e| CliError::io(p, e))?;
            Ok(None)
        }
    }
}

#[derive(Serialize)]
struct RopeDump {
    axes_dim: [usize; 3],
    base: f64,
    head_dim: usize,
    frame: Vec<f64>,
    height: Vec<f64>,
    width: Vec<f64>,
}

/// Per-axis frequency table as canonical JSON.
pub fn dump_rope(cfg: &FileConfig) -> Result<String> {
    let table = build_freq_table(&cfg.rope)?;
    to_canonical(&RopeDump {
        axes_dim: cfg.rope.axes_dim,
        base: cfg.rope.base,
        head_dim: cfg.rope.head_dim(),
        frame: table.frame,
        height: table.height,
        width: table.width,
    })
}

#[derive(Serialize)]
struct IndexDump {
    tau: f64,
    channels: usize,
    images: usize,
    /// Row `j - 1` is the embedding of image `j`.
    table: Vec<Vec<f64>>,
}

/// Embeddings of images `1..=n` in a set of `n`, as canonical JSON.
pub fn dump_index(cfg: &FileConfig, n: usize) -> Result<String> {
    let t = embedding_table(n, &cfg.index_embed)?;
    to_canonical(&IndexDump {
        tau: cfg.index_embed.tau,
        channels: cfg.index_embed.channels,
        images: n,
        table: (0..n).map(|r| t.row(r).to_vec()).collect(),
    })
}

fn gaussian(rows: usize, cols: usize, rng: &mut Rng) -> Matrix<f64> {
    Matrix::from_fn(rows, cols, |_, _| rng.gaussian())
}

/// Assemble random token data on the configured grids and report the layout.
pub fn assemble_report(cfg: &FileConfig, seed: u64) -> Result<String> {
    let a = &cfg.assemble;
    let mut rng = Rng::for_stream(seed, ASSEMBLE_STREAM);
    let mut images = Vec::with_capacity(a.grids.len());
    for (i, g) in a.grids.iter().enumerate() {
        g.validate()?;
        images.push(LatentImage::new(i + 1, *g, gaussian(g.token_count(), a.channels, &mut rng))?);
    }
    let sep = SeparatorToken::init(a.separator_width, a.channels, &mut rng)?;
    let text = gaussian(a.text_len, a.channels, &mut rng);
    let seq = assemble(&images, &sep, &a.index_embed, &text, a.options)?;
    validate_sequence(&seq).map_err(|v| CliError::Failed(format!("assembled sequence is invalid: {v}")))?;
    to_canonical(&sequence_report(&seq))
}

/// Precision of a gradient check, with its default step, weight scale and
/// pass threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    F64,
    F32,
}

impl Precision {
    pub fn eps(self) -> f64 {
        match self {
            Precision::F64 => 1e-5,
            Precision::F32 => 1e-2,
        }
    }

    pub fn threshold(self) -> f64 {
        match self {
            Precision::F64 => 1e-4,
            Precision::F32 => 1e-2,
        }
    }

    /// `None` keeps the model's own init std. Single precision needs larger
    /// weights: at std 0.02 the attention-score gradients sit below f32
    /// resolution of the loss.
    pub fn init_std(self) -> Option<f64> {
        match self {
            Precision::F64 => None,
            Precision::F32 => Some(0.1),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckOutcome {
    pub report: GradCheckReport,
    pub threshold: f64,
}

impl GradCheckOutcome {
    pub fn passed(&self) -> bool {
        self.report.passes(self.threshold)
    }

    pub fn render(&self) -> String {
        let mut s = format!("precision {}  eps {:e}  threshold {:e}\n", self.report.precision, self.report.eps, self.threshold);
        for b in &self.report.blocks {
            s += &format!("  {:<14} {:>4} checked  rel err {:.3e}\n", b.name, b.checked, b.rel_error);
        }
        match (self.passed(), self.report.worst()) {
            (true, _) => s += &format!("PASS max rel err {:.3e}\n", self.report.max_rel_error()),
            (false, Some(w)) => {
                s += &format!(
                    "FAIL block {} rel err {:.3e} (index {}: analytic {:e}, numeric {:e})\n",
                    w.name, w.rel_error, w.worst_index, w.analytic, w.numeric
                )
            }
            (false, None) => s += "FAIL\n",
        }
        s
    }
}

fn check_in<F: Real>(
    cfg: &ModelConfig,
    input: &ModelInput,
    target: usize,
    rng: &mut Rng,
    opts: &GradCheckOptions,
) -> Result<GradCheckReport> {
    let params: Params<F> = init_params(cfg, rng)?;
    Ok(grad_check(&params, input, target, cfg, opts)?)
}

/// Finite-difference check of every parameter block on a random instance.
pub fn gradcheck(cfg: &FileConfig, seed: u64, precision: Precision, corrupt: Option<String>) -> Result<GradCheckOutcome> {
    let sec = &cfg.gradcheck;
    let mut model = cfg.model.clone();
    if let Some(std) = sec.init_std.or(precision.init_std()) {
        model.init_std = std;
    }
    model.validate()?;
    if sec.images == 0 {
        return Err(CliError::BadInput("gradcheck needs at least one image".into()));
    }
    let mut rng = Rng::for_stream(seed, GRADCHECK_STREAM);
    let grid = cfg.probe.grid;
    let mut images = Vec::with_capacity(sec.images);
    for _ in 0..sec.images {
        let ids = (0..grid.token_count()).map(|_| rng.below(model.vocab)).collect();
        images.push(TokenGrid::new(grid, ids)?);
    }
    let text = (0..sec.text_len).map(|_| rng.below(model.vocab)).collect();
    let input = ModelInput { images, text };
    let target = rng.below(model.vocab);
    let opts = GradCheckOptions {
        eps: sec.eps.unwrap_or(precision.eps()),
        samples_per_block: sec.samples_per_block,
        seed,
        corrupt,
    };
    let report = match precision {
        Precision::F64 => check_in::<f64>(&model, &input, target, &mut rng, &opts)?,
        Precision::F32 => check_in::<f32>(&model, &input, target, &mut rng, &opts)?,
    };
    Ok(GradCheckOutcome {
        report,
        threshold: precision.threshold(),
    })
}

/// Worker threads for the probe: the env cap if set, else all cores.
pub fn worker_count() -> Result<usize> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(CliError::BadInput(format!("{WORKERS_ENV} must be a positive integer, got {v:?}"))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_file(dir: &Path, rel: &str, contents: &[u8], outputs: &mut Vec<FileDigest>) -> Result<()> {
    let path = dir.join(rel);
    std::fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
    outputs.push(digest_file(&path, rel.to_string())?);
    Ok(())
}

fn input_digests(config_path: Option<&Path>) -> Result<Vec<FileDigest>> {
    config_path
        .map(|p| digest_file(p, p.display().to_string()))
        .into_iter()
        .collect()
}

fn resolved_config(cfg: &FileConfig) -> Result<serde_json::Value> {
    serde_json::to_value(cfg).map_err(|e| CliError::BadInput(format!("config not serializable: {e}")))
}

fn build_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Failed(format!("cannot start worker pool: {e}")))
}

#[derive(Debug, Clone)]
pub struct ProbeOptions<'a> {
    pub config_path: Option<&'a Path>,
    pub out: &'a Path,
    pub checkpoints: bool,
    /// Recorded in the manifest.
    pub command: String,
}

/// Train every arm and seed, evaluate, and write the run directory.
pub fn probe(cfg: &FileConfig, opts: &ProbeOptions<'_>) -> Result<(ProbeResult, RunManifest)> {
    let spec: &ProbeSpec = &cfg.probe;
    spec.validate()?;
    spec.check_model(&cfg.model)?;
    cfg.model.validate()?;
    ensure_dir(opts.out)?;
    if opts.checkpoints {
        ensure_dir(&opts.out.join(CHECKPOINT_DIR))?;
    }

    let jobs: Vec<_> = spec.configs.iter().flat_map(|&c| spec.seeds.iter().map(move |&s| (c, s))).collect();
    let workers = worker_count()?;
    let started = Instant::now();
    let outcomes = build_pool(workers)?.install(|| {
        jobs.par_iter()
            .map(|&(config, seed)| {
                let t = Instant::now();
                let (result, run) = run_one_keep(spec, &cfg.model, config, seed)?;
                let timing = RunTiming {
                    config: config.name().into(),
                    seed,
                    seconds: t.elapsed().as_secs_f64(),
                };
                Ok((result, run.map(|r| Checkpoint::from_run(&r)), timing))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let wall = started.elapsed().as_secs_f64();

    let mut result = ProbeResult::default();
    let mut runs = Vec::new();
    let mut outputs = Vec::new();
    let mut checkpoints = Vec::new();
    for (r, ck, timing) in outcomes {
        result.merge(r);
        runs.push(timing);
        checkpoints.extend(ck);
    }
    result.sort();

    write_file(opts.out, RESULTS_FILE, results_csv(spec, &result)?.as_bytes(), &mut outputs)?;
    write_file(opts.out, CURVES_FILE, curves_csv(&result)?.as_bytes(), &mut outputs)?;
    write_file(opts.out, SUMMARY_FILE, summary_json(spec, &result)?.as_bytes(), &mut outputs)?;
    if opts.checkpoints {
        checkpoints.sort_by_key(|c| (c.arm, c.seed));
        for ck in &checkpoints {
            let rel = format!("{CHECKPOINT_DIR}/{}", Checkpoint::file_name(ck.arm, ck.seed));
            write_file(opts.out, &rel, ck.to_json()?.as_bytes(), &mut outputs)?;
        }
    }

    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: opts.command.clone(),
        config: resolved_config(cfg)?,
        seeds: spec.seeds.clone(),
        inputs: input_digests(opts.config_path)?,
        outputs,
        workers,
        wall_clock_seconds: wall,
        runs,
    };
    manifest.write(opts.out)?;
    Ok((result, manifest))
}

/// Checkpoint files in `dir`, sorted by name.
pub fn list_checkpoints(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| CliError::io(dir, e))?.path();
        if path.extension().is_some_and(|x| x == "json") {
            paths.push(path);
        }
    }
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::BadInput(format!("no checkpoints in {}", dir.display())));
    }
    Ok(paths)
}

/// Re-evaluate saved checkpoints on the extrapolated image counts.
pub fn extrapolate(cfg: &FileConfig, checkpoint_dir: &Path, config_path: Option<&Path>, out: &Path, command: String) -> Result<ProbeResult> {
    let spec = &cfg.probe;
    spec.validate()?;
    ensure_dir(out)?;
    let started = Instant::now();
    let mut result = ProbeResult::default();
    let mut inputs = input_digests(config_path)?;
    for path in list_checkpoints(checkpoint_dir)? {
        inputs.push(digest_file(&path, path.display().to_string())?);
        let run = Checkpoint::read(&path)?.into_run();
        let row = run_extrapolation(spec, &run).map_err(|e| CliError::BadInput(format!("{}: {e}", path.display())))?;
        result.rows.push(row);
    }
    result.sort();
    let mut seeds = result.seeds();
    seeds.dedup();
    let mut outputs = Vec::new();
    write_file(out, EXTRAPOLATION_FILE, results_csv(spec, &result)?.as_bytes(), &mut outputs)?;
    RunManifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command,
        config: resolved_config(cfg)?,
        seeds,
        inputs,
        outputs,
        workers: 1,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        runs: Vec::new(),
    }
    .write(out)?;
    Ok(result)
}

/// Digest mismatches in a run directory; empty means it verifies.
pub fn verify(dir: &Path) -> Result<Vec<Mismatch>> {
    verify_dir(dir)
}
