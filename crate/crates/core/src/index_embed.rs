//! Sinusoidal image-index embeddings.
//!
//! Image `j` of `N` gets the fixed vector
//! `E[2k] = sin(j/N / tau^(2k/C))`, `E[2k+1] = cos(j/N / tau^(2k/C))`,
//! which is added to every token of that image. The index is normalized by
//! the size of the current input set, so `j/N` always lies in `(0, 1]`.

use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::matrix::Matrix;
use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct IndexEmbedConfig {
    /// Sinusoidal base.
    pub tau: f64,
    /// Embedding width; must match the token channel count.
    pub channels: usize,
}

impl Default for IndexEmbedConfig {
    fn default() -> Self {
        Self {
            tau: 10_000.0,
            channels: 32,
        }
    }
}

impl IndexEmbedConfig {
    pub fn new(tau: f64, channels: usize) -> Result<Self> {
        let cfg = Self { tau, channels };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 1.0) || !self.tau.is_finite() {
            bail!(Config, "index-embedding base must be a finite number > 1, got {}", self.tau);
        }
        if self.channels < 2 || self.channels % 2 != 0 {
            bail!(Config, "index-embedding width must be even and >= 2, got {}", self.channels);
        }
        Ok(())
    }

    /// Inverse wavelengths `tau^(-2k/C)` for `k = 0..C/2`.
    pub fn frequencies(&self) -> Vec<f64> {
        let c = self.channels as f64;
        (0..self.channels / 2)
            .map(|k| 1.0 / libm::pow(self.tau, (2 * k) as f64 / c))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexEmbedding {
    pub image_index: usize,
    pub total_images: usize,
    pub values: Vec<f64>,
}

fn check_index(j: usize, n: usize) -> Result<()> {
    if n == 0 {
        bail!(Domain, "image count must be >= 1");
    }
    if j == 0 || j > n {
        bail!(Domain, "image index {j} outside [1, {n}]");
    }
    Ok(())
}

fn embedding_values(j: usize, n: usize, cfg: &IndexEmbedConfig) -> Vec<f64> {
    let c = cfg.channels as f64;
    let normalized = j as f64 / n as f64;
    let mut values = Vec::with_capacity(cfg.channels);
    for k in 0..cfg.channels / 2 {
        let angle = normalized / libm::pow(cfg.tau, (2 * k) as f64 / c);
        values.push(libm::sin(angle));
        values.push(libm::cos(angle));
    }
    values
}

/// Embedding of image `j` (1-based) in a set of `n` images.
pub fn index_embedding(j: usize, n: usize, cfg: &IndexEmbedConfig) -> Result<IndexEmbedding> {
    cfg.validate()?;
    check_index(j, n)?;
    Ok(IndexEmbedding {
        image_index: j,
        total_images: n,
        values: embedding_values(j, n, cfg),
    })
}

/// `n x C` table whose row `j - 1` is the embedding of image `j`.
pub fn embedding_table(n: usize, cfg: &IndexEmbedConfig) -> Result<Matrix<f64>> {
    cfg.validate()?;
    if n == 0 {
        bail!(Domain, "embedding table needs at least one image");
    }
    let mut data = Vec::with_capacity(n * cfg.channels);
    for j in 1..=n {
        data.extend(embedding_values(j, n, cfg));
    }
    Matrix::from_vec(n, cfg.channels, data)
}

/// Add `e` to every row of `tokens` in place.
pub fn add_index_embedding_in_place<F: Real>(tokens: &mut Matrix<F>, e: &IndexEmbedding) -> Result<()> {
    if tokens.cols() != e.values.len() {
        bail!(
            Validation,
            "tokens have {} channels, index embedding has {}",
            tokens.cols(),
            e.values.len()
        );
    }
    let ev: Vec<F> = e.values.iter().map(|&v| F::from_f64(v)).collect();
    for r in 0..tokens.rows() {
        for (x, &v) in tokens.row_mut(r).iter_mut().zip(&ev) {
            *x += v;
        }
    }
    Ok(())
}

pub fn add_index_embedding<F: Real>(tokens: &Matrix<F>, e: &IndexEmbedding) -> Result<Matrix<F>> {
    let mut out = tokens.clone();
    add_index_embedding_in_place(&mut out, e)?;
    Ok(out)
}

/// Subtract `e` from every row. Undoes [`add_index_embedding_in_place`] up to
/// the rounding of the sums (exactly when every `x + e` was representable).
pub fn subtract_index_embedding_in_place<F: Real>(tokens: &mut Matrix<F>, e: &IndexEmbedding) -> Result<()> {
    if tokens.cols() != e.values.len() {
        bail!(
            Validation,
            "tokens have {} channels, index embedding has {}",
            tokens.cols(),
            e.values.len()
        );
    }
    let ev: Vec<F> = e.values.iter().map(|&v| F::from_f64(v)).collect();
    for r in 0..tokens.rows() {
        for (x, &v) in tokens.row_mut(r).iter_mut().zip(&ev) {
            *x -= v;
        }
    }
    Ok(())
}

/// Smallest Euclidean distance between any two rows.
pub fn min_pairwise_distance(table: &Matrix<f64>) -> f64 {
    let mut best = f64::INFINITY;
    for a in 0..table.rows() {
        for b in a + 1..table.rows() {
            let d2: f64 = table
                .row(a)
                .iter()
                .zip(table.row(b))
                .map(|(x, y)| (x - y) * (x - y))
                .sum();
            best = best.min(libm::sqrt(d2));
        }
    }
    best
}
