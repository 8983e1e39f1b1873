use alloc::vec::Vec;

use super::{backward_into, cross_entropy, forward, Gradients, ModelConfig, Params};
use crate::assembler::{assemble, AssembledSequence, SeparatorToken, SpanKind};
use crate::error::{bail, Result};
use crate::latent::{GridShape, LatentImage};
use crate::matrix::Matrix;
use crate::real::Real;

/// One image as a grid of vocabulary ids, in flattening order (frame-major,
/// then row, then column).
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TokenGrid {
    pub grid: GridShape,
    pub ids: Vec<usize>,
}

impl TokenGrid {
    pub fn new(grid: GridShape, ids: Vec<usize>) -> Result<Self> {
        grid.validate()?;
        if ids.len() != grid.token_count() {
            bail!(Validation, "grid {}x{}x{} needs {} ids, got {}", grid.frames, grid.height, grid.width, grid.token_count(), ids.len());
        }
        Ok(Self { grid, ids })
    }
}

/// Images followed by text, all as vocabulary ids.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModelInput {
    pub images: Vec<TokenGrid>,
    pub text: Vec<usize>,
}

fn lookup<F: Real>(emb: &Matrix<F>, ids: &[usize]) -> Result<Matrix<F>> {
    let c = emb.cols();
    let mut data = Vec::with_capacity(ids.len() * c);
    for &id in ids {
        if id >= emb.rows() {
            bail!(Validation, "token id {id} outside vocabulary of {}", emb.rows());
        }
        data.extend_from_slice(emb.row(id));
    }
    Matrix::from_vec(ids.len(), c, data)
}

/// Embed ids and assemble the model's input sequence.
pub fn embed_input<F: Real>(params: &Params<F>, cfg: &ModelConfig, input: &ModelInput) -> Result<AssembledSequence<F>> {
    let mut images = Vec::with_capacity(input.images.len());
    for (i, tg) in input.images.iter().enumerate() {
        if tg.ids.len() != tg.grid.token_count() {
            bail!(Validation, "image {} has {} ids for {} cells", i + 1, tg.ids.len(), tg.grid.token_count());
        }
        images.push(LatentImage::new(i + 1, tg.grid, lookup(&params.tok_emb, &tg.ids)?)?);
    }
    let text = lookup(&params.tok_emb, &input.text)?;
    let sep = SeparatorToken::new(params.separator.clone(), cfg.flags.train_separator)?;
    assemble(&images, &sep, &cfg.index_embed, &text, cfg.assembly_options())
}

/// Route token gradients back to the embedding rows and separator values.
fn scatter_token_grads<F: Real>(
    seq: &AssembledSequence<F>,
    input: &ModelInput,
    dtokens: &Matrix<F>,
    grads: &mut Gradients<F>,
    cfg: &ModelConfig,
) {
    let add_row = |dst: &mut [F], src: &[F]| {
        for (d, &s) in dst.iter_mut().zip(src) {
            *d += s;
        }
    };
    for span in seq.spans() {
        for r in 0..span.len {
            let src = dtokens.row(span.start + r);
            match span.kind {
                SpanKind::Image { image } => {
                    let id = input.images[image - 1].ids[r];
                    add_row(grads.tok_emb.row_mut(id), src);
                }
                SpanKind::Separator { .. } => {
                    if cfg.flags.train_separator {
                        add_row(grads.separator.row_mut(r), src);
                    }
                }
                SpanKind::Text => {
                    add_row(grads.tok_emb.row_mut(input.text[r]), src);
                }
            }
        }
    }
}

/// Loss of one example, accumulating its gradient into `grads`.
fn accumulate<F: Real>(
    params: &Params<F>,
    input: &ModelInput,
    target: usize,
    cfg: &ModelConfig,
    grads: &mut Gradients<F>,
) -> Result<F> {
    let seq = embed_input(params, cfg, input)?;
    let (logits, cache) = forward(params, &seq, cfg)?;
    let (loss, dlogits) = cross_entropy(&logits, target)?;
    let dtokens = backward_into(params, &cache, &dlogits, grads, cfg)?;
    scatter_token_grads(&seq, input, &dtokens, grads, cfg);
    Ok(loss)
}

/// Cross-entropy at the last token and the gradient for every parameter.
pub fn loss_and_backward<F: Real>(
    params: &Params<F>,
    input: &ModelInput,
    target: usize,
    cfg: &ModelConfig,
) -> Result<(F, Gradients<F>)> {
    let mut grads = Params::zeros(cfg);
    let loss = accumulate(params, input, target, cfg, &mut grads)?;
    if !grads.all_finite() {
        bail!(Training, "non-finite gradient (loss {})", loss.to_f64());
    }
    Ok((loss, grads))
}

/// Mean loss and mean gradient over a batch, summed in order.
pub fn loss_and_backward_batch<F: Real>(
    params: &Params<F>,
    batch: &[(ModelInput, usize)],
    cfg: &ModelConfig,
) -> Result<(F, Gradients<F>)> {
    if batch.is_empty() {
        bail!(Validation, "empty batch");
    }
    let mut grads = Params::zeros(cfg);
    let mut total = F::ZERO;
    for (input, target) in batch {
        total += accumulate(params, input, *target, cfg, &mut grads)?;
    }
    let inv = F::ONE / F::from_usize(batch.len());
    grads.scale(inv);
    if !grads.all_finite() {
        bail!(Training, "non-finite gradient (mean loss {})", (total * inv).to_f64());
    }
    Ok((total * inv, grads))
}

/// Arg-max of the logits; ties go to the smallest id.
pub fn predict<F: Real>(params: &Params<F>, input: &ModelInput, cfg: &ModelConfig) -> Result<usize> {
    let seq = embed_input(params, cfg, input)?;
    let (logits, _) = forward(params, &seq, cfg)?;
    let mut best = 0;
    for (i, &l) in logits.iter().enumerate() {
        if l > logits[best] {
            best = i;
        }
    }
    Ok(best)
}
