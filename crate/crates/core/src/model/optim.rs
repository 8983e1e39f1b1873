use super::{Gradients, ModelConfig, Params};
use crate::error::{bail, Result};
use crate::real::Real;

/// Adaptive-moment hyperparameters and learning-rate schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Linear warm-up length in steps.
    pub warmup_steps: u64,
    /// Cosine decay horizon; 0 keeps the rate constant after warm-up.
    pub decay_steps: u64,
    /// Floor of the cosine decay as a fraction of `lr`.
    pub min_lr_ratio: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self {
            lr: 3e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            warmup_steps: 0,
            decay_steps: 0,
            min_lr_ratio: 0.0,
        }
    }
}

impl AdamHyper {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            bail!(Config, "learning rate must be finite and > 0");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            bail!(Config, "betas must lie in [0, 1)");
        }
        if !(self.eps > 0.0) {
            bail!(Config, "adam eps must be > 0");
        }
        if !(0.0..=1.0).contains(&self.min_lr_ratio) {
            bail!(Config, "min_lr_ratio must lie in [0, 1]");
        }
        Ok(())
    }

    /// Learning rate for 1-based step `t`.
    pub fn lr_at(&self, t: u64) -> f64 {
        if self.warmup_steps > 0 && t <= self.warmup_steps {
            return self.lr * t as f64 / self.warmup_steps as f64;
        }
        if self.decay_steps == 0 {
            return self.lr;
        }
        let done = (t - self.warmup_steps).min(self.decay_steps) as f64 / self.decay_steps as f64;
        let cosine = 0.5 * (1.0 + libm::cos(core::f64::consts::PI * done));
        self.lr * (self.min_lr_ratio + (1.0 - self.min_lr_ratio) * cosine)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OptState<F> {
    pub step: u64,
    pub m: Params<F>,
    pub v: Params<F>,
}

impl<F: Real> OptState<F> {
    pub fn new(cfg: &ModelConfig) -> Self {
        Self {
            step: 0,
            m: Params::zeros(cfg),
            v: Params::zeros(cfg),
        }
    }
}

/// One bias-corrected adaptive-moment update. On a non-finite result the
/// parameters and state are left as they were.
pub fn opt_step<F: Real>(
    params: &mut Params<F>,
    grads: &Gradients<F>,
    state: &mut OptState<F>,
    hyper: &AdamHyper,
) -> Result<()> {
    hyper.validate()?;
    if !grads.all_finite() {
        bail!(Training, "non-finite gradient at step {}", state.step + 1);
    }
    let backup = (params.clone(), state.clone());
    let t = state.step + 1;
    let (b1, b2) = (hyper.beta1, hyper.beta2);
    let bc1 = F::from_f64(1.0 - libm::pow(b1, t as f64));
    let bc2 = F::from_f64(1.0 - libm::pow(b2, t as f64));
    let lr = F::from_f64(hyper.lr_at(t));
    let eps = F::from_f64(hyper.eps);
    let (b1, b2) = (F::from_f64(b1), F::from_f64(b2));

    let pblocks = params.blocks_mut();
    let mblocks = state.m.blocks_mut();
    let vblocks = state.v.blocks_mut();
    for ((((_, p), (_, m)), (_, v)), (_, g)) in pblocks.into_iter().zip(mblocks).zip(vblocks).zip(grads.blocks()) {
        for i in 0..p.len() {
            m[i] = b1 * m[i] + (F::ONE - b1) * g[i];
            v[i] = b2 * v[i] + (F::ONE - b2) * g[i] * g[i];
            let mhat = m[i] / bc1;
            let vhat = v[i] / bc2;
            p[i] -= lr * mhat / (vhat.sqrt() + eps);
        }
    }
    state.step = t;
    if !params.all_finite() {
        (*params, *state) = backup;
        bail!(Training, "non-finite parameters after step {t}");
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::init_params;
    use crate::rng::Rng;

    #[test]
    fn zero_gradient_leaves_params() {
        let cfg = ModelConfig::default();
        let mut p: Params<f64> = init_params(&cfg, &mut Rng::new(3)).unwrap();
        let before = p.clone();
        let mut st = OptState::new(&cfg);
        for _ in 0..5 {
            opt_step(&mut p, &Params::zeros(&cfg), &mut st, &AdamHyper::default()).unwrap();
        }
        assert_eq!(p, before);
        assert_eq!(st.step, 5);
    }

    #[test]
    fn square_descends() {
        // f(w) = w^2 on the first head bias, gradient 2w.
        let cfg = ModelConfig::default();
        let mut p: Params<f64> = Params::zeros(&cfg);
        p.b_head[0] = 1.0;
        let mut st = OptState::new(&cfg);
        let hyper = AdamHyper {
            lr: 0.1,
            ..AdamHyper::default()
        };
        let mut g = Params::zeros(&cfg);
        g.b_head[0] = 2.0 * p.b_head[0];
        opt_step(&mut p, &g, &mut st, &hyper).unwrap();
        assert!(p.b_head[0] < 1.0);
        let mut w = p.b_head[0];
        for _ in 0..200 {
            let mut g = Params::zeros(&cfg);
            g.b_head[0] = 2.0 * w;
            opt_step(&mut p, &g, &mut st, &hyper).unwrap();
            w = p.b_head[0];
        }
        assert!(w.abs() < 0.1, "{w}");
    }

    #[test]
    fn non_finite_gradient_rejected() {
        let cfg = ModelConfig::default();
        let mut p: Params<f64> = Params::zeros(&cfg);
        let mut st = OptState::new(&cfg);
        let mut g = Params::zeros(&cfg);
        g.b_head[1] = f64::NAN;
        assert!(matches!(
            opt_step(&mut p, &g, &mut st, &AdamHyper::default()),
            Err(crate::Error::Training(_))
        ));
        assert_eq!(st.step, 0);
    }

    #[test]
    fn schedule_shape() {
        let h = AdamHyper {
            lr: 1.0,
            warmup_steps: 10,
            decay_steps: 100,
            ..AdamHyper::default()
        };
        assert_eq!(h.lr_at(5), 0.5);
        assert_eq!(h.lr_at(10), 1.0);
        assert!((h.lr_at(60) - 0.5).abs() < 1e-12);
        assert!(h.lr_at(110).abs() < 1e-12);
        assert!(h.lr_at(500).abs() < 1e-12);
    }
}
