use alloc::vec;
use alloc::vec::Vec;

use super::{ModelConfig, Params};
use crate::assembler::{layout_positions, AssembledSequence};
use crate::error::{bail, Result};
use crate::matrix::Matrix;
use crate::mrope::{build_freq_table, position_angles, rotate_pairs};
use crate::real::Real;

const LN_EPS: f64 = 1e-5;
// sqrt(2 / pi)
const GELU_C: f64 = 0.797_884_560_802_865_4;
const GELU_A: f64 = 0.044_715;

/// `a (n x m) * w (m x k)` into `out (n x k)`, overwriting.
fn matmul<F: Real>(a: &[F], w: &[F], out: &mut [F], n: usize, m: usize, k: usize) {
    out.iter_mut().for_each(|x| *x = F::ZERO);
    for i in 0..n {
        let orow = &mut out[i * k..(i + 1) * k];
        for (p, &av) in a[i * m..(i + 1) * m].iter().enumerate() {
            if av == F::ZERO {
                continue;
            }
            for (o, &wv) in orow.iter_mut().zip(&w[p * k..(p + 1) * k]) {
                *o += av * wv;
            }
        }
    }
}

/// Backward of `y = a w`: `da = dy w^T` (overwritten), `dw += a^T dy`.
fn matmul_back<F: Real>(a: &[F], w: &[F], dy: &[F], da: &mut [F], dw: &mut [F], n: usize, m: usize, k: usize) {
    for i in 0..n {
        let dyrow = &dy[i * k..(i + 1) * k];
        for p in 0..m {
            let wrow = &w[p * k..(p + 1) * k];
            da[i * m + p] = wrow.iter().zip(dyrow).map(|(&x, &y)| x * y).sum();
            let av = a[i * m + p];
            if av != F::ZERO {
                for (g, &y) in dw[p * k..(p + 1) * k].iter_mut().zip(dyrow) {
                    *g += av * y;
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
struct NormCache<F> {
    xhat: Vec<F>,
    rstd: Vec<F>,
}

fn layer_norm<F: Real>(x: &[F], gain: &[F], bias: &[F], rows: usize, c: usize) -> (Vec<F>, NormCache<F>) {
    let eps = F::from_f64(LN_EPS);
    let cf = F::from_usize(c);
    let mut y = vec![F::ZERO; rows * c];
    let mut xhat = vec![F::ZERO; rows * c];
    let mut rstd = vec![F::ZERO; rows];
    for r in 0..rows {
        let xr = &x[r * c..(r + 1) * c];
        let mean = xr.iter().copied().sum::<F>() / cf;
        let var = xr.iter().map(|&v| (v - mean) * (v - mean)).sum::<F>() / cf;
        let s = F::ONE / (var + eps).sqrt();
        rstd[r] = s;
        for i in 0..c {
            let h = (xr[i] - mean) * s;
            xhat[r * c + i] = h;
            y[r * c + i] = h * gain[i] + bias[i];
        }
    }
    (y, NormCache { xhat, rstd })
}

/// Adds the input gradient into `dx`.
fn layer_norm_back<F: Real>(
    cache: &NormCache<F>,
    gain: &[F],
    dy: &[F],
    dx: &mut [F],
    dgain: &mut [F],
    dbias: &mut [F],
    rows: usize,
    c: usize,
) {
    let cf = F::from_usize(c);
    let mut dxhat = vec![F::ZERO; c];
    for r in 0..rows {
        let xh = &cache.xhat[r * c..(r + 1) * c];
        let dyr = &dy[r * c..(r + 1) * c];
        for i in 0..c {
            dgain[i] += dyr[i] * xh[i];
            dbias[i] += dyr[i];
            dxhat[i] = dyr[i] * gain[i];
        }
        let m1 = dxhat.iter().copied().sum::<F>() / cf;
        let m2 = dxhat.iter().zip(xh).map(|(&a, &b)| a * b).sum::<F>() / cf;
        let s = cache.rstd[r];
        for i in 0..c {
            dx[r * c + i] += s * (dxhat[i] - m1 - xh[i] * m2);
        }
    }
}

fn gelu<F: Real>(u: F) -> F {
    let half = F::from_f64(0.5);
    let s = F::from_f64(GELU_C) * (u + F::from_f64(GELU_A) * u * u * u);
    half * u * (F::ONE + s.tanh())
}

fn gelu_grad<F: Real>(u: F) -> F {
    let half = F::from_f64(0.5);
    let c = F::from_f64(GELU_C);
    let a = F::from_f64(GELU_A);
    let t = (c * (u + a * u * u * u)).tanh();
    half * (F::ONE + t) + half * u * (F::ONE - t * t) * c * (F::ONE + F::from_f64(3.0) * a * u * u)
}

#[derive(Debug, Clone)]
struct LayerCache<F> {
    ln1: NormCache<F>,
    h1: Vec<F>,
    /// Rotated queries/keys, `L x C`.
    q: Vec<F>,
    k: Vec<F>,
    v: Vec<F>,
    /// Attention weights, `heads x L x L`.
    probs: Vec<F>,
    attn: Vec<F>,
    ln2: NormCache<F>,
    h2: Vec<F>,
    u: Vec<F>,
    g: Vec<F>,
}

/// Activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct Cache<F> {
    len: usize,
    /// Per-token rotation tables, `L x head_dim/2`; empty when rotation is off.
    cos: Vec<F>,
    sin: Vec<F>,
    layers: Vec<LayerCache<F>>,
    lnf: NormCache<F>,
    hf: Vec<F>,
    pub logits: Vec<F>,
}

impl<F> Cache<F> {
    pub fn seq_len(&self) -> usize {
        self.len
    }
}

fn rotation_tables<F: Real>(seq: &AssembledSequence<F>, cfg: &ModelConfig) -> Result<(Vec<F>, Vec<F>)> {
    if !cfg.flags.use_rope {
        return Ok((Vec::new(), Vec::new()));
    }
    let table = build_freq_table(&cfg.rope)?;
    let positions = layout_positions(&seq.layout);
    let half = cfg.head_dim / 2;
    let mut cos = Vec::with_capacity(positions.len() * half);
    let mut sin = Vec::with_capacity(positions.len() * half);
    for p in &positions {
        for a in position_angles(p, &table) {
            cos.push(F::from_f64(libm::cos(a)));
            sin.push(F::from_f64(libm::sin(a)));
        }
    }
    Ok((cos, sin))
}

fn rotate_rows<F: Real>(x: &mut [F], cos: &[F], sin: &[F], len: usize, heads: usize, hd: usize, inverse: bool) {
    if cos.is_empty() {
        return;
    }
    let half = hd / 2;
    let c = heads * hd;
    for t in 0..len {
        let (ct, st) = (&cos[t * half..(t + 1) * half], &sin[t * half..(t + 1) * half]);
        for h in 0..heads {
            rotate_pairs(&mut x[t * c + h * hd..t * c + (h + 1) * hd], ct, st, inverse);
        }
    }
}

/// Logits at the last token of `seq`, plus the activation cache.
pub fn forward<F: Real>(params: &Params<F>, seq: &AssembledSequence<F>, cfg: &ModelConfig) -> Result<(Vec<F>, Cache<F>)> {
    let c = cfg.channels;
    if seq.channels() != c {
        bail!(Validation, "sequence has {} channels, model expects {c}", seq.channels());
    }
    if seq.is_empty() {
        bail!(Validation, "empty sequence");
    }
    if params.layers.len() != cfg.layers || params.tok_emb.cols() != c {
        bail!(Validation, "parameters do not match the model configuration");
    }
    let len = seq.len();
    let (heads, hd, hid) = (cfg.heads, cfg.head_dim, cfg.ffn_hidden);
    let scale = F::ONE / F::from_usize(hd).sqrt();
    let (cos, sin) = rotation_tables(seq, cfg)?;

    let mut x = seq.tokens.as_slice().to_vec();
    let mut layers = Vec::with_capacity(cfg.layers);
    for lp in &params.layers {
        let (h1, ln1) = layer_norm(&x, &lp.ln1_gain, &lp.ln1_bias, len, c);
        let mut q = vec![F::ZERO; len * c];
        let mut k = vec![F::ZERO; len * c];
        let mut v = vec![F::ZERO; len * c];
        matmul(&h1, lp.wq.as_slice(), &mut q, len, c, c);
        matmul(&h1, lp.wk.as_slice(), &mut k, len, c, c);
        matmul(&h1, lp.wv.as_slice(), &mut v, len, c, c);
        rotate_rows(&mut q, &cos, &sin, len, heads, hd, false);
        rotate_rows(&mut k, &cos, &sin, len, heads, hd, false);

        let mut probs = vec![F::ZERO; heads * len * len];
        let mut attn = vec![F::ZERO; len * c];
        for h in 0..heads {
            let off = h * hd;
            for i in 0..len {
                let qi = &q[i * c + off..i * c + off + hd];
                let row = &mut probs[(h * len + i) * len..(h * len + i + 1) * len];
                let mut max = F::from_f64(f64::NEG_INFINITY);
                for (j, s) in row.iter_mut().enumerate() {
                    let kj = &k[j * c + off..j * c + off + hd];
                    *s = qi.iter().zip(kj).map(|(&a, &b)| a * b).sum::<F>() * scale;
                    max = max.max(*s);
                }
                let mut z = F::ZERO;
                for s in row.iter_mut() {
                    *s = (*s - max).exp();
                    z += *s;
                }
                for s in row.iter_mut() {
                    *s /= z;
                }
                let out = &mut attn[i * c + off..i * c + off + hd];
                for (j, &p) in row.iter().enumerate() {
                    for (o, &vv) in out.iter_mut().zip(&v[j * c + off..j * c + off + hd]) {
                        *o += p * vv;
                    }
                }
            }
        }
        let mut proj = vec![F::ZERO; len * c];
        matmul(&attn, lp.wo.as_slice(), &mut proj, len, c, c);
        for (xv, p) in x.iter_mut().zip(&proj) {
            *xv += *p;
        }

        let (h2, ln2) = layer_norm(&x, &lp.ln2_gain, &lp.ln2_bias, len, c);
        let mut u = vec![F::ZERO; len * hid];
        matmul(&h2, lp.w1.as_slice(), &mut u, len, c, hid);
        for r in 0..len {
            for (uv, &b) in u[r * hid..(r + 1) * hid].iter_mut().zip(&lp.b1) {
                *uv += b;
            }
        }
        let g: Vec<F> = u.iter().map(|&uv| gelu(uv)).collect();
        let mut f = vec![F::ZERO; len * c];
        matmul(&g, lp.w2.as_slice(), &mut f, len, hid, c);
        for r in 0..len {
            for i in 0..c {
                x[r * c + i] += f[r * c + i] + lp.b2[i];
            }
        }
        layers.push(LayerCache {
            ln1,
            h1,
            q,
            k,
            v,
            probs,
            attn,
            ln2,
            h2,
            u,
            g,
        });
    }

    let last = &x[(len - 1) * c..len * c];
    let (hf, lnf) = layer_norm(last, &params.lnf_gain, &params.lnf_bias, 1, c);
    let vocab = cfg.vocab;
    let mut logits = vec![F::ZERO; vocab];
    matmul(&hf, params.w_head.as_slice(), &mut logits, 1, c, vocab);
    for (l, &b) in logits.iter_mut().zip(&params.b_head) {
        *l += b;
    }
    let cache = Cache {
        len,
        cos,
        sin,
        layers,
        lnf,
        hf,
        logits: logits.clone(),
    };
    Ok((logits, cache))
}

/// Cross-entropy of `logits` against `target`, with its logit gradient.
pub fn cross_entropy<F: Real>(logits: &[F], target: usize) -> Result<(F, Vec<F>)> {
    if target >= logits.len() {
        bail!(Validation, "target {target} outside vocabulary of {}", logits.len());
    }
    let max = logits.iter().copied().fold(F::from_f64(f64::NEG_INFINITY), F::max);
    let z: F = logits.iter().map(|&l| (l - max).exp()).sum();
    let lse = max + z.ln();
    let loss = lse - logits[target];
    if !loss.is_finite() {
        bail!(Training, "non-finite loss {} (max logit {})", loss.to_f64(), max.to_f64());
    }
    let mut grad: Vec<F> = logits.iter().map(|&l| (l - lse).exp()).collect();
    grad[target] -= F::ONE;
    Ok((loss, grad))
}

/// Accumulate parameter gradients for `dlogits` into `grads` and return the
/// gradient with respect to the input tokens (`L x C`).
pub fn backward_into<F: Real>(
    params: &Params<F>,
    cache: &Cache<F>,
    dlogits: &[F],
    grads: &mut Params<F>,
    cfg: &ModelConfig,
) -> Result<Matrix<F>> {
    let c = cfg.channels;
    let vocab = cfg.vocab;
    if dlogits.len() != vocab {
        bail!(Validation, "logit gradient has {} entries, vocabulary is {vocab}", dlogits.len());
    }
    let len = cache.len;
    let (heads, hd, hid) = (cfg.heads, cfg.head_dim, cfg.ffn_hidden);
    let scale = F::ONE / F::from_usize(hd).sqrt();

    for (b, &d) in grads.b_head.iter_mut().zip(dlogits) {
        *b += d;
    }
    let mut dhf = vec![F::ZERO; c];
    matmul_back(&cache.hf, params.w_head.as_slice(), dlogits, &mut dhf, grads.w_head.as_mut_slice(), 1, c, vocab);
    let mut dx = vec![F::ZERO; len * c];
    layer_norm_back(
        &cache.lnf,
        &params.lnf_gain,
        &dhf,
        &mut dx[(len - 1) * c..],
        &mut grads.lnf_gain,
        &mut grads.lnf_bias,
        1,
        c,
    );

    for (li, lc) in cache.layers.iter().enumerate().rev() {
        let lp = &params.layers[li];
        let gl = &mut grads.layers[li];

        // feed-forward branch
        for r in 0..len {
            for i in 0..c {
                gl.b2[i] += dx[r * c + i];
            }
        }
        let mut dg = vec![F::ZERO; len * hid];
        matmul_back(&lc.g, lp.w2.as_slice(), &dx, &mut dg, gl.w2.as_mut_slice(), len, hid, c);
        for (d, &u) in dg.iter_mut().zip(&lc.u) {
            *d *= gelu_grad(u);
        }
        for r in 0..len {
            for (b, &d) in gl.b1.iter_mut().zip(&dg[r * hid..(r + 1) * hid]) {
                *b += d;
            }
        }
        let mut dh2 = vec![F::ZERO; len * c];
        matmul_back(&lc.h2, lp.w1.as_slice(), &dg, &mut dh2, gl.w1.as_mut_slice(), len, c, hid);
        layer_norm_back(&lc.ln2, &lp.ln2_gain, &dh2, &mut dx, &mut gl.ln2_gain, &mut gl.ln2_bias, len, c);

        // attention branch
        let mut dattn = vec![F::ZERO; len * c];
        matmul_back(&lc.attn, lp.wo.as_slice(), &dx, &mut dattn, gl.wo.as_mut_slice(), len, c, c);
        let mut dq = vec![F::ZERO; len * c];
        let mut dk = vec![F::ZERO; len * c];
        let mut dv = vec![F::ZERO; len * c];
        let mut dp = vec![F::ZERO; len];
        for h in 0..heads {
            let off = h * hd;
            for i in 0..len {
                let p = &lc.probs[(h * len + i) * len..(h * len + i + 1) * len];
                let doi = &dattn[i * c + off..i * c + off + hd];
                let mut dot = F::ZERO;
                for j in 0..len {
                    let vj = &lc.v[j * c + off..j * c + off + hd];
                    dp[j] = doi.iter().zip(vj).map(|(&a, &b)| a * b).sum();
                    dot += dp[j] * p[j];
                    for (g, &d) in dv[j * c + off..j * c + off + hd].iter_mut().zip(doi) {
                        *g += p[j] * d;
                    }
                }
                for j in 0..len {
                    let ds = p[j] * (dp[j] - dot) * scale;
                    if ds == F::ZERO {
                        continue;
                    }
                    for t in 0..hd {
                        dq[i * c + off + t] += ds * lc.k[j * c + off + t];
                        dk[j * c + off + t] += ds * lc.q[i * c + off + t];
                    }
                }
            }
        }
        rotate_rows(&mut dq, &cache.cos, &cache.sin, len, heads, hd, true);
        rotate_rows(&mut dk, &cache.cos, &cache.sin, len, heads, hd, true);
        let mut dh1 = vec![F::ZERO; len * c];
        let mut tmp = vec![F::ZERO; len * c];
        matmul_back(&lc.h1, lp.wq.as_slice(), &dq, &mut tmp, gl.wq.as_mut_slice(), len, c, c);
        dh1.iter_mut().zip(&tmp).for_each(|(a, &b)| *a += b);
        matmul_back(&lc.h1, lp.wk.as_slice(), &dk, &mut tmp, gl.wk.as_mut_slice(), len, c, c);
        dh1.iter_mut().zip(&tmp).for_each(|(a, &b)| *a += b);
        matmul_back(&lc.h1, lp.wv.as_slice(), &dv, &mut tmp, gl.wv.as_mut_slice(), len, c, c);
        dh1.iter_mut().zip(&tmp).for_each(|(a, &b)| *a += b);
        layer_norm_back(&lc.ln1, &lp.ln1_gain, &dh1, &mut dx, &mut gl.ln1_gain, &mut gl.ln1_bias, len, c);
    }
    Matrix::from_vec(len, c, dx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{embed_input, init_params, ModelInput, TokenGrid};
    use crate::rng::Rng;
    use crate::GridShape;

    #[test]
    fn values_are_not_rotated() {
        // Scaling the value projection scales the first attention output
        // linearly, whatever the token positions.
        let cfg = ModelConfig::default();
        let mut rng = Rng::new(9);
        let p: Params<f64> = init_params(&cfg, &mut rng).unwrap();
        let g = GridShape::new(2, 2, 3).unwrap();
        let input = ModelInput {
            images: (0..3)
                .map(|_| TokenGrid::new(g, (0..12).map(|_| rng.below(64)).collect()).unwrap())
                .collect(),
            text: vec![1, 2, 3],
        };
        let seq = embed_input(&p, &cfg, &input).unwrap();
        let (_, base) = forward(&p, &seq, &cfg).unwrap();
        for alpha in [0.5, 3.0, -2.0] {
            let mut q = p.clone();
            q.layers[0].wv.as_mut_slice().iter_mut().for_each(|w| *w *= alpha);
            let (_, scaled) = forward(&q, &seq, &cfg).unwrap();
            assert_eq!(base.layers[0].probs, scaled.layers[0].probs);
            for (a, b) in base.layers[0].attn.iter().zip(&scaled.layers[0].attn) {
                assert!((alpha * a - b).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn softmax_survives_large_logits() {
        let (loss, grad) = cross_entropy(&[1000.0f64, 0.0, -1000.0], 0).unwrap();
        assert!(loss.abs() < 1e-12);
        assert!(grad.iter().all(|g| g.is_finite()));
        let (loss, _) = cross_entropy(&[1000.0f64, 0.0], 1).unwrap();
        assert!((loss - 1000.0).abs() < 1e-9);
        assert!(cross_entropy(&[0.0f64, f64::NAN], 0).is_err());
        assert!(cross_entropy(&[0.0f64; 4], 4).is_err());
    }

    #[test]
    fn gelu_matches_difference_quotient() {
        for u in [-3.0f64, -0.7, 0.0, 0.4, 2.5] {
            let h = 1e-6;
            let n = (gelu(u + h) - gelu(u - h)) / (2.0 * h);
            assert!((gelu_grad(u) - n).abs() < 1e-8);
        }
    }
}
