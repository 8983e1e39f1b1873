//! Token grids of reference images and per-token provenance.

use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::matrix::Matrix;
use crate::real::Real;

/// `(frames, height, width)` extent of one image in token units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GridShape {
    pub frames: usize,
    pub height: usize,
    pub width: usize,
}

impl GridShape {
    pub fn new(frames: usize, height: usize, width: usize) -> Result<Self> {
        let g = Self {
            frames,
            height,
            width,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.frames == 0 || self.height == 0 || self.width == 0 {
            bail!(
                Validation,
                "grid {}x{}x{} has an empty axis",
                self.frames,
                self.height,
                self.width
            );
        }
        Ok(())
    }

    pub fn token_count(&self) -> usize {
        self.frames * self.height * self.width
    }

    /// Grid cell of flattened row `i` (frame-major, then height, then width).
    pub fn cell(&self, i: usize) -> (usize, usize, usize) {
        let hw = self.height * self.width;
        (i / hw, (i % hw) / self.width, i % self.width)
    }

    /// Flattened row of grid cell `(f, h, w)`.
    pub fn row_of(&self, f: usize, h: usize, w: usize) -> usize {
        (f * self.height + h) * self.width + w
    }
}

/// Latent tokens of one reference image: one row per grid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentImage<F = f64> {
    /// 1-based ordinal `j` of the image within its input set.
    pub image_index: usize,
    pub grid: GridShape,
    pub data: Matrix<F>,
}

impl<F: Real> LatentImage<F> {
    pub fn new(image_index: usize, grid: GridShape, data: Matrix<F>) -> Result<Self> {
        let img = Self {
            image_index,
            grid,
            data,
        };
        img.validate()?;
        Ok(img)
    }

    pub fn channels(&self) -> usize {
        self.data.cols()
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if self.image_index == 0 {
            bail!(Validation, "image indices are 1-based, got 0");
        }
        if self.data.rows() != self.grid.token_count() {
            bail!(
                Validation,
                "image {} has {} token rows but its {}x{}x{} grid needs {}",
                self.image_index,
                self.data.rows(),
                self.grid.frames,
                self.grid.height,
                self.grid.width,
                self.grid.token_count()
            );
        }
        if !self.data.all_finite() {
            bail!(Validation, "image {} has non-finite entries", self.image_index);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum TokenKind {
    Image,
    Separator,
    Text,
}

/// Position of a token on the shared `(frame, height, width)` grid.
///
/// `rotate == false` means the token receives the identity rotation no matter
/// what coordinates it records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Position {
    pub frame: usize,
    pub height: usize,
    pub width: usize,
    pub rotate: bool,
}

impl Position {
    pub const fn new(frame: usize, height: usize, width: usize) -> Self {
        Self {
            frame,
            height,
            width,
            rotate: true,
        }
    }

    pub const fn unrotated(frame: usize, height: usize, width: usize) -> Self {
        Self {
            frame,
            height,
            width,
            rotate: false,
        }
    }

    pub fn triple(&self) -> (usize, usize, usize) {
        (self.frame, self.height, self.width)
    }
}

/// Provenance of one row of an assembled sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TokenMeta {
    pub kind: TokenKind,
    /// 1-based image ordinal; `None` for text.
    pub image_index: Option<usize>,
    /// Image tokens: grid cell within their own image. Separators: slot within
    /// the separator (`width` axis). Text: `(0, 0, t)` for text index `t`.
    pub cell: (usize, usize, usize),
}

/// Flatten an image into token rows in frame-major `(f, h, w)` order.
pub fn flatten_image<F: Real>(img: &LatentImage<F>) -> Result<(Matrix<F>, Vec<TokenMeta>)> {
    img.validate()?;
    let metas = (0..img.grid.token_count())
        .map(|i| TokenMeta {
            kind: TokenKind::Image,
            image_index: Some(img.image_index),
            cell: img.grid.cell(i),
        })
        .collect();
    Ok((img.data.clone(), metas))
}

/// Inverse of [`flatten_image`]: place rows back into a grid by their recorded cells.
pub fn refold_image<F: Real>(
    tokens: &Matrix<F>,
    metas: &[TokenMeta],
    grid: GridShape,
) -> Result<Matrix<F>> {
    if tokens.rows() != metas.len() || tokens.rows() != grid.token_count() {
        bail!(
            Validation,
            "cannot refold {} rows / {} metas into a grid of {} cells",
            tokens.rows(),
            metas.len(),
            grid.token_count()
        );
    }
    let mut out = Matrix::zeros(grid.token_count(), tokens.cols());
    for (i, m) in metas.iter().enumerate() {
        let (f, h, w) = m.cell;
        out.row_mut(grid.row_of(f, h, w)).copy_from_slice(tokens.row(i));
    }
    Ok(out)
}
