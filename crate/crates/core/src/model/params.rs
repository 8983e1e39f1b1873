use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::ModelConfig;
use crate::error::Result;
use crate::matrix::Matrix;
use crate::real::Real;
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LayerParams<F> {
    pub ln1_gain: Vec<F>,
    pub ln1_bias: Vec<F>,
    /// `C x C`, applied as `x W`.
    pub wq: Matrix<F>,
    pub wk: Matrix<F>,
    pub wv: Matrix<F>,
    pub wo: Matrix<F>,
    pub ln2_gain: Vec<F>,
    pub ln2_bias: Vec<F>,
    /// `C x hidden`.
    pub w1: Matrix<F>,
    pub b1: Vec<F>,
    /// `hidden x C`.
    pub w2: Matrix<F>,
    pub b2: Vec<F>,
}

/// All trainable state. Also used, with identical layout, for gradients and
/// optimizer moments.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Params<F> {
    /// `vocab x C`.
    pub tok_emb: Matrix<F>,
    /// `separator_width x C`, shared by every separator insertion.
    pub separator: Matrix<F>,
    pub layers: Vec<LayerParams<F>>,
    pub lnf_gain: Vec<F>,
    pub lnf_bias: Vec<F>,
    /// `C x vocab`.
    pub w_head: Matrix<F>,
    pub b_head: Vec<F>,
}

impl<F: Real> Params<F> {
    /// All-zero parameters (also the zero gradient).
    pub fn zeros(cfg: &ModelConfig) -> Self {
        let c = cfg.channels;
        let h = cfg.ffn_hidden;
        let layer = LayerParams {
            ln1_gain: vec![F::ZERO; c],
            ln1_bias: vec![F::ZERO; c],
            wq: Matrix::zeros(c, c),
            wk: Matrix::zeros(c, c),
            wv: Matrix::zeros(c, c),
            wo: Matrix::zeros(c, c),
            ln2_gain: vec![F::ZERO; c],
            ln2_bias: vec![F::ZERO; c],
            w1: Matrix::zeros(c, h),
            b1: vec![F::ZERO; h],
            w2: Matrix::zeros(h, c),
            b2: vec![F::ZERO; c],
        };
        Self {
            tok_emb: Matrix::zeros(cfg.vocab, c),
            separator: Matrix::zeros(cfg.separator_width, c),
            layers: vec![layer; cfg.layers],
            lnf_gain: vec![F::ZERO; c],
            lnf_bias: vec![F::ZERO; c],
            w_head: Matrix::zeros(c, cfg.vocab),
            b_head: vec![F::ZERO; cfg.vocab],
        }
    }

    /// Named views of every parameter block, in a fixed order.
    pub fn blocks(&self) -> Vec<(String, &[F])> {
        let mut out: Vec<(String, &[F])> = vec![
            ("tok_emb".into(), self.tok_emb.as_slice()),
            ("separator".into(), self.separator.as_slice()),
        ];
        for (i, l) in self.layers.iter().enumerate() {
            out.push((format!("layer{i}.ln1_gain"), &l.ln1_gain));
            out.push((format!("layer{i}.ln1_bias"), &l.ln1_bias));
            out.push((format!("layer{i}.wq"), l.wq.as_slice()));
            out.push((format!("layer{i}.wk"), l.wk.as_slice()));
            out.push((format!("layer{i}.wv"), l.wv.as_slice()));
            out.push((format!("layer{i}.wo"), l.wo.as_slice()));
            out.push((format!("layer{i}.ln2_gain"), &l.ln2_gain));
            out.push((format!("layer{i}.ln2_bias"), &l.ln2_bias));
            out.push((format!("layer{i}.w1"), l.w1.as_slice()));
            out.push((format!("layer{i}.b1"), &l.b1));
            out.push((format!("layer{i}.w2"), l.w2.as_slice()));
            out.push((format!("layer{i}.b2"), &l.b2));
        }
        out.push(("lnf_gain".into(), &self.lnf_gain));
        out.push(("lnf_bias".into(), &self.lnf_bias));
        out.push(("w_head".into(), self.w_head.as_slice()));
        out.push(("b_head".into(), &self.b_head));
        out
    }

    /// Mutable views in the same order as [`Params::blocks`].
    pub fn blocks_mut(&mut self) -> Vec<(String, &mut [F])> {
        let Self {
            tok_emb,
            separator,
            layers,
            lnf_gain,
            lnf_bias,
            w_head,
            b_head,
        } = self;
        let mut out: Vec<(String, &mut [F])> = vec![
            ("tok_emb".into(), tok_emb.as_mut_slice()),
            ("separator".into(), separator.as_mut_slice()),
        ];
        for (i, l) in layers.iter_mut().enumerate() {
            let LayerParams {
                ln1_gain,
                ln1_bias,
                wq,
                wk,
                wv,
                wo,
                ln2_gain,
                ln2_bias,
                w1,
                b1,
                w2,
                b2,
            } = l;
            out.push((format!("layer{i}.ln1_gain"), ln1_gain));
            out.push((format!("layer{i}.ln1_bias"), ln1_bias));
            out.push((format!("layer{i}.wq"), wq.as_mut_slice()));
            out.push((format!("layer{i}.wk"), wk.as_mut_slice()));
            out.push((format!("layer{i}.wv"), wv.as_mut_slice()));
            out.push((format!("layer{i}.wo"), wo.as_mut_slice()));
            out.push((format!("layer{i}.ln2_gain"), ln2_gain));
            out.push((format!("layer{i}.ln2_bias"), ln2_bias));
            out.push((format!("layer{i}.w1"), w1.as_mut_slice()));
            out.push((format!("layer{i}.b1"), b1));
            out.push((format!("layer{i}.w2"), w2.as_mut_slice()));
            out.push((format!("layer{i}.b2"), b2));
        }
        out.push(("lnf_gain".into(), lnf_gain));
        out.push(("lnf_bias".into(), lnf_bias));
        out.push(("w_head".into(), w_head.as_mut_slice()));
        out.push(("b_head".into(), b_head));
        out
    }

    pub fn num_values(&self) -> usize {
        self.blocks().iter().map(|(_, b)| b.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.blocks().iter().all(|(_, b)| b.iter().all(|x| x.is_finite()))
    }

    pub fn fill_zero(&mut self) {
        for (_, b) in self.blocks_mut() {
            b.iter_mut().for_each(|x| *x = F::ZERO);
        }
    }

    /// `self += alpha * other`, block by block.
    pub fn add_scaled(&mut self, other: &Self, alpha: F) {
        for ((_, dst), (_, src)) in self.blocks_mut().into_iter().zip(other.blocks()) {
            for (d, &s) in dst.iter_mut().zip(src) {
                *d += alpha * s;
            }
        }
    }

    pub fn scale(&mut self, alpha: F) {
        for (_, b) in self.blocks_mut() {
            b.iter_mut().for_each(|x| *x *= alpha);
        }
    }

    /// Whether the shapes agree with `cfg`.
    pub fn matches(&self, cfg: &ModelConfig) -> bool {
        let z = Params::<F>::zeros(cfg);
        let a = self.blocks();
        let b = z.blocks();
        a.len() == b.len() && a.iter().zip(&b).all(|((_, x), (_, y))| x.len() == y.len())
    }

    pub fn cast<G: Real>(&self) -> Params<G> {
        let conv_m = |m: &Matrix<F>| {
            Matrix::from_vec(m.rows(), m.cols(), m.as_slice().iter().map(|x| G::from_f64(x.to_f64())).collect())
                .expect("same shape")
        };
        let conv_v = |v: &Vec<F>| v.iter().map(|x| G::from_f64(x.to_f64())).collect::<Vec<G>>();
        Params {
            tok_emb: conv_m(&self.tok_emb),
            separator: conv_m(&self.separator),
            layers: self
                .layers
                .iter()
                .map(|l| LayerParams {
                    ln1_gain: conv_v(&l.ln1_gain),
                    ln1_bias: conv_v(&l.ln1_bias),
                    wq: conv_m(&l.wq),
                    wk: conv_m(&l.wk),
                    wv: conv_m(&l.wv),
                    wo: conv_m(&l.wo),
                    ln2_gain: conv_v(&l.ln2_gain),
                    ln2_bias: conv_v(&l.ln2_bias),
                    w1: conv_m(&l.w1),
                    b1: conv_v(&l.b1),
                    w2: conv_m(&l.w2),
                    b2: conv_v(&l.b2),
                })
                .collect(),
            lnf_gain: conv_v(&self.lnf_gain),
            lnf_bias: conv_v(&self.lnf_bias),
            w_head: conv_m(&self.w_head),
            b_head: conv_v(&self.b_head),
        }
    }
}

/// Gaussian weights with std `cfg.init_std` (token embeddings:
/// `cfg.embed_init_std`), unit layer-norm gains, zero biases.
///
/// Draw order is fixed (block order of [`Params::blocks`]), so a seed fully
/// determines the parameters.
pub fn init_params<F: Real>(cfg: &ModelConfig, rng: &mut Rng) -> Result<Params<F>> {
    cfg.validate()?;
    let mut p = Params::<F>::zeros(cfg);
    for (name, block) in p.blocks_mut() {
        let std = if name == "tok_emb" { cfg.embed_init_std } else { cfg.init_std };
        let leaf = name.rsplit('.').next().unwrap_or(&name);
        if leaf.ends_with("_gain") {
            block.iter_mut().for_each(|x| *x = F::ONE);
        } else if leaf.ends_with("bias") || leaf.starts_with('b') {
            // biases stay zero
        } else {
            block.iter_mut().for_each(|x| *x = F::from_f64(rng.normal(0.0, std)));
        }
    }
    Ok(p)
}
