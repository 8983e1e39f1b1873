use alloc::string::String;
use alloc::vec::Vec;

use super::{cross_entropy, embed_input, forward, loss_and_backward, ModelConfig, ModelInput, Params};
use crate::error::{bail, Result};
use crate::real::Real;
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GradCheckOptions {
    /// Central-difference step.
    pub eps: f64,
    /// Coordinates checked per block; blocks at most this large are checked in full.
    pub samples_per_block: usize,
    /// Seed for coordinate sampling.
    pub seed: u64,
    /// Debug hook: distort the analytic gradient of this block before comparing.
    pub corrupt: Option<String>,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            eps: 1e-5,
            samples_per_block: 32,
            seed: 0,
            corrupt: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BlockCheck {
    pub name: String,
    pub checked: usize,
    /// `max |a - n| / max(max |a|, max |n|)` over the checked coordinates.
    pub rel_error: f64,
    /// Coordinate with the largest absolute discrepancy.
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GradCheckReport {
    pub eps: f64,
    pub precision: String,
    pub blocks: Vec<BlockCheck>,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.blocks.iter().map(|b| b.rel_error).fold(0.0, f64::max)
    }

    /// Block with the largest relative error.
    pub fn worst(&self) -> Option<&BlockCheck> {
        self.blocks.iter().fold(None, |best: Option<&BlockCheck>, b| match best {
            Some(x) if x.rel_error >= b.rel_error => Some(x),
            _ => Some(b),
        })
    }

    pub fn passes(&self, threshold: f64) -> bool {
        self.blocks.iter().all(|b| b.rel_error < threshold)
    }
}

fn loss_at<F: Real>(params: &Params<F>, input: &ModelInput, target: usize, cfg: &ModelConfig) -> Result<F> {
    let seq = embed_input(params, cfg, input)?;
    let (logits, _) = forward(params, &seq, cfg)?;
    Ok(cross_entropy(&logits, target)?.0)
}

/// Compare analytic gradients with central differences, block by block.
///
/// Each block is scored by its largest absolute discrepancy relative to the
/// block's gradient scale, so coordinates whose true gradient is near zero
/// do not dominate through cancellation noise.
pub fn grad_check<F: Real>(
    params: &Params<F>,
    input: &ModelInput,
    target: usize,
    cfg: &ModelConfig,
    opts: &GradCheckOptions,
) -> Result<GradCheckReport> {
    if !(opts.eps > 0.0) || !opts.eps.is_finite() {
        bail!(Domain, "finite-difference step must be finite and > 0, got {}", opts.eps);
    }
    if opts.samples_per_block == 0 {
        bail!(Domain, "samples_per_block must be >= 1");
    }
    let (_, analytic) = loss_and_backward(params, input, target, cfg)?;
    if let Some(name) = &opts.corrupt {
        if !analytic.blocks().iter().any(|(n, _)| n == name) {
            bail!(Validation, "no parameter block named {name:?}");
        }
    }
    let mut rng = Rng::new(opts.seed);
    let eps = F::from_f64(opts.eps);
    let mut probe = params.clone();
    let mut blocks = Vec::new();
    let names: Vec<(String, Vec<F>)> = analytic.blocks().into_iter().map(|(n, b)| (n, b.to_vec())).collect();
    for (bi, (name, grad)) in names.iter().enumerate() {
        let corrupt = opts.corrupt.as_deref() == Some(name.as_str());
        let coords: Vec<usize> = if grad.len() <= opts.samples_per_block {
            (0..grad.len()).collect()
        } else {
            // Always include the largest analytic entry, then a uniform sample.
            let mut argmax = 0;
            for (i, g) in grad.iter().enumerate() {
                if g.abs() > grad[argmax].abs() {
                    argmax = i;
                }
            }
            let mut c = rng.sample_distinct(opts.samples_per_block - 1, grad.len());
            if !c.contains(&argmax) {
                c.push(argmax);
            }
            c.sort_unstable();
            c
        };
        let mut worst = (0usize, 0.0f64, 0.0f64, 0.0f64);
        let mut scale = 0.0f64;
        for (k, &i) in coords.iter().enumerate() {
            let orig = probe.blocks()[bi].1[i];
            let (hi, lo) = (orig + eps, orig - eps);
            probe.blocks_mut()[bi].1[i] = hi;
            let up = loss_at(&probe, input, target, cfg)?;
            probe.blocks_mut()[bi].1[i] = lo;
            let down = loss_at(&probe, input, target, cfg)?;
            probe.blocks_mut()[bi].1[i] = orig;
            // Divide by the step actually taken after rounding.
            let n = ((up - down) / (hi - lo)).to_f64();
            let mut a = grad[i].to_f64();
            if corrupt {
                a = 1.5 * a + 1e-3;
            }
            scale = scale.max(a.abs()).max(n.abs());
            let diff = (a - n).abs();
            if k == 0 || diff > worst.1 {
                worst = (i, diff, a, n);
            }
        }
        let rel_error = if scale > 0.0 { worst.1 / scale } else { 0.0 };
        blocks.push(BlockCheck {
            name: name.clone(),
            checked: coords.len(),
            rel_error,
            worst_index: worst.0,
            analytic: worst.2,
            numeric: worst.3,
        });
    }
    Ok(GradCheckReport {
        eps: opts.eps,
        precision: F::NAME.into(),
        blocks,
    })
}
