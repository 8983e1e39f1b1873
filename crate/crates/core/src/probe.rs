//! Synthetic image-identity probe.
//!
//! Each episode shows `N` small images of vocabulary ids. Every image hides
//! one payload token at a random cell among filler tokens; payloads are
//! distinct across the episode. The text is a single instruction token naming
//! a target image, and the label is that image's payload. Because the payload
//! cell is random, the label cannot be read off the unordered image contents:
//! the model has to work out which image is the one named.
//!
//! Vocabulary layout: ids `0..8` are instruction tokens, the next
//! `filler_tokens` ids are fillers, and the rest are payloads.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::latent::GridShape;
use crate::model::{
    init_params, loss_and_backward_batch, opt_step, predict, AdamHyper, ModelConfig, ModelFlags, ModelInput,
    OptState, Params, TokenGrid,
};
use crate::real::Real;
use crate::rng::Rng;

/// Ids reserved for instruction tokens.
pub const INSTRUCTION_TOKENS: usize = 8;

/// How the instruction names the target image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum TargetScheme {
    /// "image k" for `k` uniform in `1..=N`; token id `k - 1`.
    Ordinal,
    /// "first image" (id 0) or "last image" (id 1), each with probability 1/2.
    #[default]
    Ends,
}

impl TargetScheme {
    pub fn instruction(&self, target: usize, n: usize) -> usize {
        match self {
            TargetScheme::Ordinal => target - 1,
            TargetScheme::Ends => usize::from(target == n && n > 1),
        }
    }
}

/// The four ablation arms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum AblationConfig {
    #[cfg_attr(feature = "serde", serde(rename = "rope-only"))]
    RopeOnly,
    #[cfg_attr(feature = "serde", serde(rename = "rope+sep"))]
    RopeSep,
    #[cfg_attr(feature = "serde", serde(rename = "rope+index"))]
    RopeIndex,
    #[cfg_attr(feature = "serde", serde(rename = "full"))]
    Full,
}

impl AblationConfig {
    pub const ALL: [AblationConfig; 4] = [
        AblationConfig::RopeOnly,
        AblationConfig::RopeSep,
        AblationConfig::RopeIndex,
        AblationConfig::Full,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            AblationConfig::RopeOnly => "rope-only",
            AblationConfig::RopeSep => "rope+sep",
            AblationConfig::RopeIndex => "rope+index",
            AblationConfig::Full => "full",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }

    pub fn flags(&self) -> ModelFlags {
        let (sep, idx) = match self {
            AblationConfig::RopeOnly => (false, false),
            AblationConfig::RopeSep => (true, false),
            AblationConfig::RopeIndex => (false, true),
            AblationConfig::Full => (true, true),
        };
        ModelFlags {
            use_separator: sep,
            use_index_embed: idx,
            use_rope: true,
            train_separator: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ProbeSpec {
    pub vocab: usize,
    pub grid: GridShape,
    pub filler_tokens: usize,
    pub target_scheme: TargetScheme,
    pub train_counts: Vec<usize>,
    pub eval_in_dist: Vec<usize>,
    pub eval_extrapolated: Vec<usize>,
    pub steps: usize,
    pub batch_size: usize,
    /// Held-out episodes per image count in each evaluation set.
    pub eval_episodes: usize,
    pub seeds: Vec<u64>,
    pub hyper: AdamHyper,
    /// Training loss is averaged over windows of this many steps.
    pub log_every: usize,
    pub configs: Vec<AblationConfig>,
}

impl Default for ProbeSpec {
    fn default() -> Self {
        Self {
            vocab: 64,
            grid: GridShape {
                frames: 1,
                height: 3,
                width: 3,
            },
            filler_tokens: 8,
            target_scheme: TargetScheme::default(),
            train_counts: vec![2, 3, 4],
            eval_in_dist: vec![2, 3, 4],
            eval_extrapolated: vec![5, 6],
            steps: 3000,
            batch_size: 16,
            eval_episodes: 200,
            seeds: vec![0, 1, 2, 3, 4],
            hyper: AdamHyper {
                warmup_steps: 200,
                decay_steps: 2800,
                min_lr_ratio: 0.1,
                ..AdamHyper::default()
            },
            log_every: 50,
            configs: AblationConfig::ALL.to_vec(),
        }
    }
}

impl ProbeSpec {
    pub fn payload_tokens(&self) -> usize {
        self.vocab.saturating_sub(INSTRUCTION_TOKENS + self.filler_tokens)
    }

    pub fn max_images(&self) -> usize {
        self.train_counts
            .iter()
            .chain(&self.eval_in_dist)
            .chain(&self.eval_extrapolated)
            .copied()
            .max()
            .unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if self.grid.token_count() < 2 {
            bail!(Spec, "images need at least two cells");
        }
        if self.filler_tokens == 0 {
            bail!(Spec, "filler_tokens must be >= 1");
        }
        if self.train_counts.is_empty() || self.eval_in_dist.is_empty() || self.eval_extrapolated.is_empty() {
            bail!(Spec, "image-count sets must be non-empty");
        }
        let counts = self.train_counts.iter().chain(&self.eval_in_dist).chain(&self.eval_extrapolated);
        if counts.clone().any(|&n| n < 2) {
            bail!(Spec, "every episode needs at least two images");
        }
        let train_max = *self.train_counts.iter().max().unwrap_or(&0);
        if self.eval_extrapolated.iter().any(|&n| n <= train_max) {
            bail!(Spec, "extrapolated counts must exceed the largest training count {train_max}");
        }
        if self.payload_tokens() < self.max_images() {
            bail!(
                Spec,
                "vocab {} leaves {} payload tokens, need {} distinct payloads",
                self.vocab,
                self.payload_tokens(),
                self.max_images()
            );
        }
        if self.target_scheme == TargetScheme::Ordinal && self.max_images() > INSTRUCTION_TOKENS {
            bail!(Spec, "ordinal instructions support at most {INSTRUCTION_TOKENS} images");
        }
        if self.steps == 0 || self.batch_size == 0 || self.eval_episodes == 0 || self.log_every == 0 {
            bail!(Spec, "steps, batch_size, eval_episodes and log_every must be >= 1");
        }
        if self.seeds.is_empty() || self.configs.is_empty() {
            bail!(Spec, "seeds and configs must be non-empty");
        }
        self.hyper.validate()?;
        Ok(())
    }

    /// Check that a model configuration fits this spec.
    pub fn check_model(&self, cfg: &ModelConfig) -> Result<()> {
        cfg.validate()?;
        if cfg.vocab != self.vocab {
            bail!(Spec, "model vocab {} differs from probe vocab {}", cfg.vocab, self.vocab);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ProbeEpisode {
    pub images: Vec<TokenGrid>,
    pub instruction: Vec<usize>,
    /// 1-based ordinal of the target image.
    pub target: usize,
    pub label: usize,
    /// Cell of each image's payload.
    pub payload_cells: Vec<usize>,
}

impl ProbeEpisode {
    pub fn input(&self) -> ModelInput {
        ModelInput {
            images: self.images.clone(),
            text: self.instruction.clone(),
        }
    }

    pub fn payloads(&self) -> Vec<usize> {
        self.images.iter().zip(&self.payload_cells).map(|(g, &c)| g.ids[c]).collect()
    }
}

/// Draw one episode with `n` images.
pub fn gen_episode(rng: &mut Rng, spec: &ProbeSpec, n: usize) -> Result<ProbeEpisode> {
    if n < 2 {
        bail!(Spec, "episodes need at least two images, got {n}");
    }
    let pool = spec.payload_tokens();
    if pool < n {
        bail!(Spec, "vocab {} gives {pool} payload tokens, cannot draw {n} distinct ones", spec.vocab);
    }
    if spec.target_scheme == TargetScheme::Ordinal && n > INSTRUCTION_TOKENS {
        bail!(Spec, "ordinal instructions support at most {INSTRUCTION_TOKENS} images");
    }
    spec.grid.validate()?;
    let payload_base = INSTRUCTION_TOKENS + spec.filler_tokens;
    let payloads: Vec<usize> = rng.sample_distinct(n, pool).into_iter().map(|p| p + payload_base).collect();
    let cells = spec.grid.token_count();
    let mut images = Vec::with_capacity(n);
    let mut payload_cells = Vec::with_capacity(n);
    for &payload in &payloads {
        let cell = rng.below(cells);
        let ids: Vec<usize> = (0..cells)
            .map(|i| {
                let filler = INSTRUCTION_TOKENS + rng.below(spec.filler_tokens);
                if i == cell {
                    payload
                } else {
                    filler
                }
            })
            .collect();
        images.push(TokenGrid { grid: spec.grid, ids });
        payload_cells.push(cell);
    }
    let target = match spec.target_scheme {
        TargetScheme::Ordinal => rng.below(n) + 1,
        TargetScheme::Ends => {
            if rng.below(2) == 0 {
                1
            } else {
                n
            }
        }
    };
    Ok(ProbeEpisode {
        instruction: vec![spec.target_scheme.instruction(target, n)],
        label: payloads[target - 1],
        target,
        images,
        payload_cells,
    })
}

/// Which evaluation set a row belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum EvalSet {
    InDist,
    Extrapolated,
}

impl EvalSet {
    pub fn name(&self) -> &'static str {
        match self {
            EvalSet::InDist => "in_dist",
            EvalSet::Extrapolated => "extrapolated",
        }
    }

    pub fn counts<'a>(&self, spec: &'a ProbeSpec) -> &'a [usize] {
        match self {
            EvalSet::InDist => &spec.eval_in_dist,
            EvalSet::Extrapolated => &spec.eval_extrapolated,
        }
    }

    /// Stream id for held-out episodes; disjoint from the training stream.
    fn stream(&self, n: usize) -> u64 {
        let base = match self {
            EvalSet::InDist => 1_000,
            EvalSet::Extrapolated => 2_000,
        };
        base + n as u64
    }
}

const TRAIN_STREAM: u64 = 1;
const INIT_STREAM: u64 = 0;

/// Held-out episodes for one seed and evaluation set, shared by all arms.
pub fn eval_episodes(spec: &ProbeSpec, seed: u64, set: EvalSet) -> Result<Vec<ProbeEpisode>> {
    let mut out = Vec::new();
    for &n in set.counts(spec) {
        let mut rng = Rng::for_stream(seed, set.stream(n));
        for _ in 0..spec.eval_episodes {
            out.push(gen_episode(&mut rng, spec, n)?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Accuracy {
    pub correct: usize,
    pub total: usize,
}

impl Accuracy {
    pub fn value(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.correct as f64 / self.total as f64
        }
    }
}

pub fn evaluate<F: Real>(params: &Params<F>, cfg: &ModelConfig, episodes: &[ProbeEpisode]) -> Result<Accuracy> {
    let mut correct = 0;
    for ep in episodes {
        if predict(params, &ep.input(), cfg)? == ep.label {
            correct += 1;
        }
    }
    Ok(Accuracy {
        correct,
        total: episodes.len(),
    })
}

/// Trained parameters of one arm and seed, with its loss curve.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedRun {
    pub config: AblationConfig,
    pub seed: u64,
    pub model: ModelConfig,
    pub params: Params<f64>,
    pub opt: OptState<f64>,
    /// `(step, mean loss over the preceding window)`.
    pub curve: Vec<(usize, f64)>,
}

/// Train one arm on episodes with the spec's training counts.
pub fn train_run(spec: &ProbeSpec, base: &ModelConfig, config: AblationConfig, seed: u64) -> Result<TrainedRun> {
    spec.validate()?;
    spec.check_model(base)?;
    let cfg = base.with_flags(config.flags());
    // Same initial weights for every arm of a seed.
    let mut params: Params<f64> = init_params(&cfg, &mut Rng::for_stream(seed, INIT_STREAM))?;
    let mut opt = OptState::new(&cfg);
    let mut rng = Rng::for_stream(seed, TRAIN_STREAM);
    let mut curve = Vec::new();
    let mut window = 0.0;
    let mut batch = Vec::with_capacity(spec.batch_size);
    for step in 1..=spec.steps {
        batch.clear();
        for _ in 0..spec.batch_size {
            let n = spec.train_counts[rng.below(spec.train_counts.len())];
            let ep = gen_episode(&mut rng, spec, n)?;
            batch.push((ep.input(), ep.label));
        }
        let (loss, grads) = loss_and_backward_batch(&params, &batch, &cfg)
            .map_err(|e| crate::Error::Training(format!("{} seed {seed} step {step}: {e}", config.name())))?;
        opt_step(&mut params, &grads, &mut opt, &spec.hyper)
            .map_err(|e| crate::Error::Training(format!("{} seed {seed} step {step}: {e}", config.name())))?;
        window += loss;
        if step % spec.log_every == 0 || step == spec.steps {
            let len = (step - 1) % spec.log_every + 1;
            curve.push((step, window / len as f64));
            window = 0.0;
        }
    }
    Ok(TrainedRun {
        config,
        seed,
        model: cfg,
        params,
        opt,
        curve,
    })
}

/// One CSV row: an arm, a seed and an evaluation set.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ProbeRow {
    pub config: AblationConfig,
    pub seed: u64,
    pub eval_set: EvalSet,
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
    pub final_loss: f64,
    /// Empty on success; the training error otherwise.
    pub failure: String,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainingCurve {
    pub config: AblationConfig,
    pub seed: u64,
    pub points: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ProbeResult {
    pub rows: Vec<ProbeRow>,
    pub curves: Vec<TrainingCurve>,
}

impl ProbeResult {
    /// Sort rows and curves by `(config, seed, eval set)`.
    pub fn sort(&mut self) {
        self.rows.sort_by_key(|r| (r.config, r.seed, r.eval_set));
        self.curves.sort_by_key(|c| (c.config, c.seed));
    }

    pub fn merge(&mut self, other: ProbeResult) {
        self.rows.extend(other.rows);
        self.curves.extend(other.curves);
    }

    pub fn accuracy(&self, config: AblationConfig, seed: u64, set: EvalSet) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.config == config && r.seed == seed && r.eval_set == set)
            .map(|r| r.accuracy)
    }

    pub fn seeds(&self) -> Vec<u64> {
        let mut s: Vec<u64> = self.rows.iter().map(|r| r.seed).collect();
        s.sort_unstable();
        s.dedup();
        s
    }
}

fn row(run: &TrainedRun, set: EvalSet, acc: Accuracy) -> ProbeRow {
    ProbeRow {
        config: run.config,
        seed: run.seed,
        eval_set: set,
        correct: acc.correct,
        total: acc.total,
        accuracy: acc.value(),
        final_loss: run.curve.last().map_or(f64::NAN, |p| p.1),
        failure: String::new(),
    }
}

fn failed_rows(config: AblationConfig, seed: u64, msg: &str) -> Vec<ProbeRow> {
    [EvalSet::InDist, EvalSet::Extrapolated]
        .into_iter()
        .map(|set| ProbeRow {
            config,
            seed,
            eval_set: set,
            correct: 0,
            total: 0,
            accuracy: 0.0,
            final_loss: f64::NAN,
            failure: String::from(msg),
        })
        .collect()
}

/// Evaluate a trained run on the 5-6 image episodes, without updating it.
/// The index embedding normalizes by each episode's own image count.
pub fn run_extrapolation(spec: &ProbeSpec, run: &TrainedRun) -> Result<ProbeRow> {
    spec.validate()?;
    spec.check_model(&run.model)?;
    if run.model.flags != run.config.flags() {
        bail!(Spec, "checkpoint flags do not match arm {}", run.config.name());
    }
    if !run.params.matches(&run.model) {
        bail!(Spec, "checkpoint parameters do not match its model configuration");
    }
    let episodes = eval_episodes(spec, run.seed, EvalSet::Extrapolated)?;
    let acc = evaluate(&run.params, &run.model, &episodes)?;
    Ok(row(run, EvalSet::Extrapolated, acc))
}

/// Train and evaluate one arm and seed. Training failures become rows with a
/// recorded failure rather than errors.
pub fn run_one(spec: &ProbeSpec, base: &ModelConfig, config: AblationConfig, seed: u64) -> Result<ProbeResult> {
    Ok(run_one_keep(spec, base, config, seed)?.0)
}

/// [`run_one`], also returning the trained run unless training failed.
pub fn run_one_keep(
    spec: &ProbeSpec,
    base: &ModelConfig,
    config: AblationConfig,
    seed: u64,
) -> Result<(ProbeResult, Option<TrainedRun>)> {
    spec.validate()?;
    spec.check_model(base)?;
    let run = match train_run(spec, base, config, seed) {
        Ok(run) => run,
        Err(crate::Error::Training(msg)) => {
            let failed = ProbeResult {
                rows: failed_rows(config, seed, &msg),
                curves: Vec::new(),
            };
            return Ok((failed, None));
        }
        Err(e) => return Err(e),
    };
    let in_dist = evaluate(&run.params, &run.model, &eval_episodes(spec, seed, EvalSet::InDist)?)?;
    let extra = run_extrapolation(spec, &run)?;
    let result = ProbeResult {
        rows: vec![row(&run, EvalSet::InDist, in_dist), extra],
        curves: vec![TrainingCurve {
            config,
            seed,
            points: run.curve.clone(),
        }],
    };
    Ok((result, Some(run)))
}

/// Every configured arm for every seed, sequentially, sorted.
pub fn run_ablation(spec: &ProbeSpec, base: &ModelConfig) -> Result<ProbeResult> {
    let mut out = ProbeResult::default();
    for &config in &spec.configs {
        for &seed in &spec.seeds {
            out.merge(run_one(spec, base, config, seed)?);
        }
    }
    out.sort();
    Ok(out)
}

/// Model configuration matching a probe spec's vocabulary.
pub fn probe_model_config(spec: &ProbeSpec) -> ModelConfig {
    ModelConfig {
        vocab: spec.vocab,
        ..ModelConfig::default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn payloads_distinct_and_label_consistent() {
        let spec = ProbeSpec::default();
        let mut rng = Rng::new(1);
        for n in 2..=6 {
            for _ in 0..200 {
                let ep = gen_episode(&mut rng, &spec, n).unwrap();
                let mut p = ep.payloads();
                assert_eq!(ep.label, p[ep.target - 1]);
                p.sort_unstable();
                p.dedup();
                assert_eq!(p.len(), n);
                assert!(p.iter().all(|&x| x >= INSTRUCTION_TOKENS + spec.filler_tokens && x < spec.vocab));
                // The instruction never carries the payload.
                assert!(ep.instruction.iter().all(|&t| t < INSTRUCTION_TOKENS));
                for (g, &c) in ep.images.iter().zip(&ep.payload_cells) {
                    let fillers = g.ids.iter().enumerate().filter(|&(i, _)| i != c);
                    for (_, &id) in fillers {
                        assert!((INSTRUCTION_TOKENS..INSTRUCTION_TOKENS + spec.filler_tokens).contains(&id));
                    }
                }
            }
        }
    }

    #[test]
    fn same_stream_same_episode() {
        let spec = ProbeSpec::default();
        let a = gen_episode(&mut Rng::for_stream(3, 7), &spec, 3).unwrap();
        let b = gen_episode(&mut Rng::for_stream(3, 7), &spec, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn too_small_vocab_is_spec_error() {
        let spec = ProbeSpec {
            vocab: INSTRUCTION_TOKENS + 8 + 2,
            ..ProbeSpec::default()
        };
        assert!(matches!(gen_episode(&mut Rng::new(0), &spec, 3), Err(crate::Error::Spec(_))));
        assert!(spec.validate().is_err());
        assert!(matches!(
            gen_episode(&mut Rng::new(0), &ProbeSpec::default(), 1),
            Err(crate::Error::Spec(_))
        ));
    }

    #[test]
    fn target_histogram_is_uniform() {
        // Chi-square style check: each bin within 3 sigma of n p.
        for (scheme, n, bins) in [(TargetScheme::Ordinal, 4, 4usize), (TargetScheme::Ends, 5, 2)] {
            let spec = ProbeSpec {
                target_scheme: scheme,
                ..ProbeSpec::default()
            };
            let mut rng = Rng::new(0);
            let draws = 10_000;
            let mut hist = vec![0usize; n + 1];
            for _ in 0..draws {
                hist[gen_episode(&mut rng, &spec, n).unwrap().target] += 1;
            }
            let p = 1.0 / bins as f64;
            let sigma = libm::sqrt(draws as f64 * p * (1.0 - p));
            let used: Vec<usize> = match scheme {
                TargetScheme::Ordinal => (1..=n).collect(),
                TargetScheme::Ends => vec![1, n],
            };
            assert_eq!(used.iter().map(|&k| hist[k]).sum::<usize>(), draws);
            for k in used {
                assert!((hist[k] as f64 - draws as f64 * p).abs() < 3.0 * sigma, "{scheme:?} {hist:?}");
            }
        }
    }

    #[test]
    fn four_arms() {
        let names: Vec<&str> = AblationConfig::ALL.iter().map(|c| c.name()).collect();
        assert_eq!(names, ["rope-only", "rope+sep", "rope+index", "full"]);
        assert!(AblationConfig::ALL.iter().all(|c| c.flags().use_rope));
        assert_eq!(AblationConfig::Full.flags(), ModelFlags::full());
        assert_eq!(AblationConfig::from_name("rope+sep"), Some(AblationConfig::RopeSep));
    }

    #[test]
    fn spec_validation() {
        ProbeSpec::default().validate().unwrap();
        let bad = ProbeSpec {
            eval_extrapolated: vec![4, 5],
            ..ProbeSpec::default()
        };
        assert!(bad.validate().is_err());
        let bad = ProbeSpec {
            train_counts: vec![1, 2],
            ..ProbeSpec::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn eval_sets_are_fixed_per_seed() {
        let spec = ProbeSpec {
            eval_episodes: 5,
            ..ProbeSpec::default()
        };
        let a = eval_episodes(&spec, 1, EvalSet::Extrapolated).unwrap();
        assert_eq!(a, eval_episodes(&spec, 1, EvalSet::Extrapolated).unwrap());
        assert_eq!(a.len(), 10);
        assert!(a.iter().all(|e| e.images.len() >= 5));
        assert_ne!(a, eval_episodes(&spec, 2, EvalSet::Extrapolated).unwrap());
    }
}
