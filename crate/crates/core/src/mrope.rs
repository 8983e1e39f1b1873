//! Three-axis rotary position embedding over `(frame, height, width)`.
//!
//! The head dimension is split into three contiguous channel groups, one per
//! axis. Within a group, channel pair `(2i, 2i + 1)` rotates by
//! `coordinate * base^(-2i / group_width)`.

use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::latent::Position;
use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct RopeConfig {
    /// Channels given to the frame, height and width axes.
    pub axes_dim: [usize; 3],
    /// Rotation base.
    pub base: f64,
}

impl Default for RopeConfig {
    fn default() -> Self {
        Self {
            axes_dim: [8, 12, 12],
            base: 10_000.0,
        }
    }
}

impl RopeConfig {
    pub fn new(axes_dim: [usize; 3], base: f64) -> Result<Self> {
        let cfg = Self { axes_dim, base };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn head_dim(&self) -> usize {
        self.axes_dim.iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        for (name, d) in ["frame", "height", "width"].iter().zip(self.axes_dim) {
            if d < 2 || d % 2 != 0 {
                bail!(Config, "{name} axis dimension must be even and >= 2, got {d}");
            }
        }
        if !(self.base > 1.0) || !self.base.is_finite() {
            bail!(Config, "rotation base must be a finite number > 1, got {}", self.base);
        }
        Ok(())
    }
}

/// Per-axis inverse frequencies.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FrequencyTable {
    pub frame: Vec<f64>,
    pub height: Vec<f64>,
    pub width: Vec<f64>,
}

fn axis_freqs(dim: usize, base: f64) -> Vec<f64> {
    (0..dim / 2)
        .map(|i| libm::pow(base, -((2 * i) as f64) / dim as f64))
        .collect()
}

pub fn build_freq_table(cfg: &RopeConfig) -> Result<FrequencyTable> {
    cfg.validate()?;
    let [df, dh, dw] = cfg.axes_dim;
    Ok(FrequencyTable {
        frame: axis_freqs(df, cfg.base),
        height: axis_freqs(dh, cfg.base),
        width: axis_freqs(dw, cfg.base),
    })
}

impl FrequencyTable {
    /// Number of rotation angles per token (head_dim / 2).
    pub fn len(&self) -> usize {
        self.frame.len() + self.height.len() + self.width.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn head_dim(&self) -> usize {
        2 * self.len()
    }
}

/// Rotation angles for a token at `(f, h, w)`: frame, height and width groups
/// concatenated in that order.
pub fn token_frequencies(pos: (usize, usize, usize), table: &FrequencyTable) -> Vec<f64> {
    let (f, h, w) = pos;
    let mut out = Vec::with_capacity(table.len());
    out.extend(table.frame.iter().map(|&x| f as f64 * x));
    out.extend(table.height.iter().map(|&x| h as f64 * x));
    out.extend(table.width.iter().map(|&x| w as f64 * x));
    out
}

/// Angles for a [`Position`]; all zero when the position is marked unrotated.
pub fn position_angles(pos: &Position, table: &FrequencyTable) -> Vec<f64> {
    if pos.rotate {
        token_frequencies(pos.triple(), table)
    } else {
        alloc::vec![0.0; table.len()]
    }
}

/// Rotate interleaved channel pairs `(2i, 2i+1)` of `x` by `angles[i]`, in place.
pub fn apply_rope_in_place<F: Real>(x: &mut [F], angles: &[F]) -> Result<()> {
    if x.len() != 2 * angles.len() {
        bail!(
            Validation,
            "vector of length {} cannot take {} rotation angles",
            x.len(),
            angles.len()
        );
    }
    for (pair, &a) in x.chunks_exact_mut(2).zip(angles) {
        let (s, c) = (a.sin(), a.cos());
        let (e, o) = (pair[0], pair[1]);
        pair[0] = e * c - o * s;
        pair[1] = e * s + o * c;
    }
    Ok(())
}

pub fn apply_rope<F: Real>(x: &[F], angles: &[F]) -> Result<Vec<F>> {
    let mut out = x.to_vec();
    apply_rope_in_place(&mut out, angles)?;
    Ok(out)
}

/// Rotation with precomputed `cos`/`sin`; `inverse` rotates the other way.
#[inline]
pub(crate) fn rotate_pairs<F: Real>(x: &mut [F], cos: &[F], sin: &[F], inverse: bool) {
    for ((pair, &c), &s) in x.chunks_exact_mut(2).zip(cos).zip(sin) {
        let s = if inverse { -s } else { s };
        let (e, o) = (pair[0], pair[1]);
        pair[0] = e * c - o * s;
        pair[1] = e * s + o * c;
    }
}

/// Which formula [`apply_rope_with`] evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RotationForm {
    /// Proper 2D rotation of each channel pair.
    #[default]
    Pairwise,
    /// The one-line shorthand `x_even * cos(a) + x_odd * sin(a)`, taken
    /// literally. Returns `head_dim / 2` values and preserves neither norms nor
    /// relative offsets; kept only for comparison.
    LiteralShorthand,
}

pub fn apply_rope_with<F: Real>(form: RotationForm, x: &[F], angles: &[F]) -> Result<Vec<F>> {
    match form {
        RotationForm::Pairwise => apply_rope(x, angles),
        RotationForm::LiteralShorthand => {
            if x.len() != 2 * angles.len() {
                bail!(
                    Validation,
                    "vector of length {} cannot take {} rotation angles",
                    x.len(),
                    angles.len()
                );
            }
            Ok(x.chunks_exact(2)
                .zip(angles)
                .map(|(p, &a)| p[0] * a.cos() + p[1] * a.sin())
                .collect())
        }
    }
}

/// Rotate a query and a key by their own positions.
pub fn positions_to_rotated_qk(
    q: &[f64],
    k: &[f64],
    p_q: (usize, usize, usize),
    p_k: (usize, usize, usize),
    table: &FrequencyTable,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let q = apply_rope(q, &token_frequencies(p_q, table))?;
    let k = apply_rope(k, &token_frequencies(p_k, table))?;
    Ok((q, k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use alloc::vec;
    use core::f64::consts::FRAC_PI_2;

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    fn norm(a: &[f64]) -> f64 {
        libm::sqrt(dot(a, a))
    }

    #[test]
    fn height_table_d4() {
        let t = build_freq_table(&RopeConfig::new([2, 4, 2], 10_000.0).unwrap()).unwrap();
        assert_eq!(t.height.len(), 2);
        assert_eq!(t.height[0], 1.0);
        // 10000^(-2/4) = 1/100
        assert!((t.height[1] - 0.01).abs() < 1e-15);
        assert_eq!(t.frame, vec![1.0]);
    }

    #[test]
    fn first_entries_are_one_and_decreasing() {
        let t = build_freq_table(&RopeConfig::default()).unwrap();
        for axis in [&t.frame, &t.height, &t.width] {
            assert_eq!(axis[0], 1.0);
            assert!(axis.windows(2).all(|w| w[1] < w[0] && w[1] > 0.0));
        }
        assert_eq!(t.head_dim(), 32);
    }

    #[test]
    fn odd_or_bad_config_rejected() {
        assert!(matches!(RopeConfig::new([3, 4, 4], 10_000.0), Err(crate::Error::Config(_))));
        assert!(RopeConfig::new([0, 4, 4], 10_000.0).is_err());
        assert!(RopeConfig::new([2, 4, 4], 1.0).is_err());
        assert!(RopeConfig::new([2, 4, 4], f64::NAN).is_err());
    }

    #[test]
    fn token_frequency_examples() {
        let t = build_freq_table(&RopeConfig::default()).unwrap();
        assert!(token_frequencies((0, 0, 0), &t).iter().all(|&a| a == 0.0));

        let t = build_freq_table(&RopeConfig::new([2, 2, 2], 10_000.0).unwrap()).unwrap();
        assert_eq!(token_frequencies((2, 0, 0), &t), vec![2.0, 0.0, 0.0]);
        assert_eq!(token_frequencies((1, 3, 2), &t), vec![1.0, 3.0, 2.0]);
    }

    #[test]
    fn quarter_turn() {
        let out = apply_rope(&[1.0, 0.0], &[FRAC_PI_2]).unwrap();
        assert!(out[0].abs() < 1e-12 && (out[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_angles_identity() {
        let x = [0.3, -1.2, 4.0, 0.5];
        assert_eq!(apply_rope(&x, &[0.0, 0.0]).unwrap(), x.to_vec());
    }

    #[test]
    fn length_mismatch() {
        assert!(matches!(
            apply_rope(&[1.0, 2.0, 3.0], &[0.1]),
            Err(crate::Error::Validation(_))
        ));
    }

    #[test]
    fn norm_preserved_brute_force() {
        let mut rng = Rng::new(1);
        for _ in 0..1000 {
            let x: Vec<f64> = (0..32).map(|_| rng.gaussian()).collect();
            let a: Vec<f64> = (0..16).map(|_| rng.uniform() * 100.0).collect();
            let y = apply_rope(&x, &a).unwrap();
            assert!((norm(&x) - norm(&y)).abs() < 1e-12);
        }
    }

    #[test]
    fn equal_positions_preserve_dot() {
        let t = build_freq_table(&RopeConfig::default()).unwrap();
        let mut rng = Rng::new(2);
        let q: Vec<f64> = (0..32).map(|_| rng.gaussian()).collect();
        let k: Vec<f64> = (0..32).map(|_| rng.gaussian()).collect();
        let (q2, k2) = positions_to_rotated_qk(&q, &k, (3, 5, 7), (3, 5, 7), &t).unwrap();
        assert!((dot(&q2, &k2) - dot(&q, &k)).abs() < 1e-9);
    }

    #[test]
    fn swapping_positions_negates_offset() {
        // Oracle: the score depends only on p_k - p_q through explicit
        // per-pair rotation matrices R(-delta).
        let t = build_freq_table(&RopeConfig::default()).unwrap();
        let mut rng = Rng::new(4);
        for _ in 0..200 {
            let q: Vec<f64> = (0..32).map(|_| rng.gaussian()).collect();
            let k: Vec<f64> = (0..32).map(|_| rng.gaussian()).collect();
            let p1 = (rng.below(6), rng.below(9), rng.below(9));
            let p2 = (rng.below(6), rng.below(9), rng.below(9));
            let (a, b) = positions_to_rotated_qk(&q, &k, p1, p2, &t).unwrap();
            let (c, d) = positions_to_rotated_qk(&q, &k, p2, p1, &t).unwrap();
            let delta = |pa: (usize, usize, usize), pb: (usize, usize, usize)| {
                let fa = token_frequencies(pa, &t);
                let fb = token_frequencies(pb, &t);
                fb.iter().zip(&fa).map(|(x, y)| x - y).collect::<Vec<_>>()
            };
            let reference = |d: &[f64]| -> f64 {
                // <q, R(d) k> pairwise
                (0..16)
                    .map(|i| {
                        let (qe, qo, ke, ko) = (q[2 * i], q[2 * i + 1], k[2 * i], k[2 * i + 1]);
                        let (s, cs) = (libm::sin(d[i]), libm::cos(d[i]));
                        qe * (ke * cs - ko * s) + qo * (ke * s + ko * cs)
                    })
                    .sum()
            };
            assert!((dot(&a, &b) - reference(&delta(p1, p2))).abs() < 1e-9);
            assert!((dot(&c, &d) - reference(&delta(p2, p1))).abs() < 1e-9);
        }
    }

    #[test]
    fn composition_adds_angles() {
        let mut rng = Rng::new(9);
        for _ in 0..100 {
            let x: Vec<f64> = (0..8).map(|_| rng.gaussian()).collect();
            let a: Vec<f64> = (0..4).map(|_| rng.normal(0.0, 3.0)).collect();
            let b: Vec<f64> = (0..4).map(|_| rng.normal(0.0, 3.0)).collect();
            let ab: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
            let twice = apply_rope(&apply_rope(&x, &a).unwrap(), &b).unwrap();
            let once = apply_rope(&x, &ab).unwrap();
            for (u, v) in twice.iter().zip(&once) {
                assert!((u - v).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn literal_shorthand_is_not_norm_preserving() {
        let x = [1.0, 1.0];
        let y = apply_rope_with(RotationForm::LiteralShorthand, &x, &[core::f64::consts::FRAC_PI_4]).unwrap();
        assert_eq!(y.len(), 1);
        assert!((y[0] - libm::sqrt(2.0)).abs() < 1e-12);
        let y0 = apply_rope_with(RotationForm::LiteralShorthand, &x, &[0.0]).unwrap();
        assert!((norm(&y0) - norm(&x)).abs() > 0.1);
    }

    #[test]
    fn inverse_rotation_undoes() {
        let x = [0.7, -0.2, 1.5, 2.0];
        let a = [0.4, -1.3];
        let (c, s): (Vec<f64>, Vec<f64>) = a.iter().map(|v| (libm::cos(*v), libm::sin(*v))).unzip();
        let mut y = x;
        rotate_pairs(&mut y, &c, &s, false);
        rotate_pairs(&mut y, &c, &s, true);
        for (u, v) in y.iter().zip(x) {
            assert!((u - v).abs() < 1e-15);
        }
    }

    #[test]
    fn unrotated_position_gives_zero_angles() {
        let t = build_freq_table(&RopeConfig::default()).unwrap();
        let a = position_angles(&Position::unrotated(4, 1, 1), &t);
        assert!(a.iter().all(|&v| v == 0.0));
    }
}
