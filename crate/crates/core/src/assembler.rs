//! Unified multi-image token sequence.
//!
//! Layout for `N` images:
//!
//! ```text
//! [image 1 + E_1] [sep] [image 2 + E_2] [sep] ... [image N + E_N] [sep] [text]
//! ```
//!
//! The separator block (`d` rows) is one shared parameter; every insertion
//! point copies the same values. The trailing separator after image `N` can be
//! switched off, which leaves `N - 1` separators.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{bail, Result};
use crate::index_embed::{index_embedding, subtract_index_embedding_in_place, IndexEmbedConfig};
use crate::latent::{GridShape, LatentImage, Position, TokenKind, TokenMeta};
use crate::matrix::Matrix;
use crate::real::Real;
use crate::rng::Rng;

/// Standard deviation of the separator's Gaussian initialization.
pub const SEPARATOR_INIT_STD: f64 = 0.02;

#[derive(Debug, Clone, PartialEq)]
pub struct SeparatorToken<F = f64> {
    /// `d x C`.
    pub values: Matrix<F>,
    pub learnable: bool,
}

impl<F: Real> SeparatorToken<F> {
    pub fn new(values: Matrix<F>, learnable: bool) -> Result<Self> {
        if values.rows() == 0 {
            bail!(Validation, "separator width must be >= 1");
        }
        if !values.all_finite() {
            bail!(Validation, "separator values must be finite");
        }
        Ok(Self { values, learnable })
    }

    /// Zero-mean Gaussian initialization with std [`SEPARATOR_INIT_STD`].
    pub fn init(width: usize, channels: usize, rng: &mut Rng) -> Result<Self> {
        let values = Matrix::from_fn(width, channels, |_, _| F::from_f64(rng.normal(0.0, SEPARATOR_INIT_STD)));
        Self::new(values, true)
    }

    pub fn width(&self) -> usize {
        self.values.rows()
    }

    pub fn channels(&self) -> usize {
        self.values.cols()
    }
}

/// Where separators sit on the rotary grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SeparatorPositions {
    /// Identity rotation; the recorded coordinate is informational only.
    #[default]
    Unrotated,
    /// Rotate as if at `(frame of preceding image, 0, 0)`.
    InheritFrame,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct AssemblyOptions {
    pub use_separator: bool,
    pub use_index_embed: bool,
    /// Also place a separator after the last image.
    pub trailing_separator: bool,
    pub separator_positions: SeparatorPositions,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        Self {
            use_separator: true,
            use_index_embed: true,
            trailing_separator: true,
            separator_positions: SeparatorPositions::Unrotated,
        }
    }
}

impl AssemblyOptions {
    /// Plain concatenation: no separators, no index embedding.
    pub fn plain() -> Self {
        Self {
            use_separator: false,
            use_index_embed: false,
            ..Self::default()
        }
    }

    pub fn separator_count(&self, images: usize) -> usize {
        match (self.use_separator, self.trailing_separator) {
            (false, _) => 0,
            (true, true) => images,
            (true, false) => images.saturating_sub(1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum SpanKind {
    Image { image: usize },
    /// Separator following image `after`.
    Separator { after: usize },
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Span {
    #[cfg_attr(feature = "serde", serde(flatten))]
    pub kind: SpanKind,
    pub start: usize,
    pub len: usize,
}

impl Span {
    pub fn range(&self) -> core::ops::Range<usize> {
        self.start..self.start + self.len
    }
}

/// Planned layout of a sequence, independent of token values.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub spans: Vec<Span>,
    pub metas: Vec<TokenMeta>,
    pub grids: Vec<GridShape>,
    pub separator_width: usize,
    pub text_len: usize,
    pub options: AssemblyOptions,
}

impl Layout {
    pub fn len(&self) -> usize {
        self.metas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.metas.is_empty()
    }

    pub fn image_count(&self) -> usize {
        self.grids.len()
    }
}

/// Closed-form sequence length.
pub fn expected_length(grids: &[GridShape], separator_width: usize, text_len: usize, options: &AssemblyOptions) -> usize {
    grids.iter().map(GridShape::token_count).sum::<usize>()
        + options.separator_count(grids.len()) * separator_width
        + text_len
}

/// Span table and per-token provenance for the given image grids.
pub fn plan_layout(grids: &[GridShape], separator_width: usize, text_len: usize, options: AssemblyOptions) -> Result<Layout> {
    if grids.is_empty() {
        bail!(Validation, "cannot assemble an empty image list");
    }
    if options.use_separator && separator_width == 0 {
        bail!(Validation, "separator width must be >= 1");
    }
    let n = grids.len();
    let n_sep = options.separator_count(n);
    let mut spans = Vec::with_capacity(2 * n + 1);
    let mut metas = Vec::with_capacity(expected_length(grids, separator_width, text_len, &options));
    for (i, grid) in grids.iter().enumerate() {
        grid.validate()?;
        let j = i + 1;
        spans.push(Span {
            kind: SpanKind::Image { image: j },
            start: metas.len(),
            len: grid.token_count(),
        });
        metas.extend((0..grid.token_count()).map(|r| TokenMeta {
            kind: TokenKind::Image,
            image_index: Some(j),
            cell: grid.cell(r),
        }));
        if i < n_sep {
            spans.push(Span {
                kind: SpanKind::Separator { after: j },
                start: metas.len(),
                len: separator_width,
            });
            metas.extend((0..separator_width).map(|s| TokenMeta {
                kind: TokenKind::Separator,
                image_index: Some(j),
                cell: (0, 0, s),
            }));
        }
    }
    if text_len > 0 {
        spans.push(Span {
            kind: SpanKind::Text,
            start: metas.len(),
            len: text_len,
        });
        metas.extend((0..text_len).map(|t| TokenMeta {
            kind: TokenKind::Text,
            image_index: None,
            cell: (0, 0, t),
        }));
    }
    Ok(Layout {
        spans,
        metas,
        grids: grids.to_vec(),
        separator_width: if options.use_separator { separator_width } else { 0 },
        text_len,
        options,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssembledSequence<F = f64> {
    /// `L x C`.
    pub tokens: Matrix<F>,
    pub layout: Layout,
    /// Index-embedding settings used, when the embedding was added.
    pub index_embed: Option<IndexEmbedConfig>,
}

impl<F: Real> AssembledSequence<F> {
    pub fn len(&self) -> usize {
        self.tokens.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.rows() == 0
    }

    pub fn channels(&self) -> usize {
        self.tokens.cols()
    }

    pub fn image_count(&self) -> usize {
        self.layout.image_count()
    }

    pub fn metas(&self) -> &[TokenMeta] {
        &self.layout.metas
    }

    pub fn spans(&self) -> &[Span] {
        &self.layout.spans
    }
}

/// Build the unified sequence: index-embedded image blocks, shared separators,
/// then text tokens unchanged.
pub fn assemble<F: Real>(
    images: &[LatentImage<F>],
    sep: &SeparatorToken<F>,
    icfg: &IndexEmbedConfig,
    text: &Matrix<F>,
    options: AssemblyOptions,
) -> Result<AssembledSequence<F>> {
    if images.is_empty() {
        bail!(Validation, "cannot assemble an empty image list");
    }
    let channels = images[0].channels();
    for (i, img) in images.iter().enumerate() {
        img.validate()?;
        if img.image_index != i + 1 {
            bail!(
                Validation,
                "image indices must run 1..={} in order; position {} holds index {}",
                images.len(),
                i + 1,
                img.image_index
            );
        }
        if img.channels() != channels {
            bail!(
                Validation,
                "image {} has {} channels, image 1 has {channels}",
                img.image_index,
                img.channels()
            );
        }
    }
    if options.use_separator && sep.channels() != channels {
        bail!(Validation, "separator has {} channels, images have {channels}", sep.channels());
    }
    if text.rows() > 0 && text.cols() != channels {
        bail!(Validation, "text has {} channels, images have {channels}", text.cols());
    }
    if options.use_index_embed {
        icfg.validate()?;
        if icfg.channels != channels {
            bail!(Validation, "index embedding has {} channels, images have {channels}", icfg.channels);
        }
    }

    let grids: Vec<GridShape> = images.iter().map(|i| i.grid).collect();
    let layout = plan_layout(&grids, sep.width(), text.rows(), options)?;
    let n = images.len();
    let mut tokens = Matrix::zeros(layout.len(), channels);
    for span in &layout.spans {
        match span.kind {
            SpanKind::Image { image } => {
                let img = &images[image - 1];
                let e = if options.use_index_embed {
                    Some(index_embedding(image, n, icfg)?)
                } else {
                    None
                };
                for r in 0..span.len {
                    let dst = tokens.row_mut(span.start + r);
                    dst.copy_from_slice(img.data.row(r));
                    if let Some(e) = &e {
                        for (x, &v) in dst.iter_mut().zip(&e.values) {
                            *x += F::from_f64(v);
                        }
                    }
                }
            }
            SpanKind::Separator { .. } => {
                for r in 0..span.len {
                    tokens.row_mut(span.start + r).copy_from_slice(sep.values.row(r));
                }
            }
            SpanKind::Text => {
                for r in 0..span.len {
                    tokens.row_mut(span.start + r).copy_from_slice(text.row(r));
                }
            }
        }
    }
    Ok(AssembledSequence {
        tokens,
        layout,
        index_embed: options.use_index_embed.then_some(*icfg),
    })
}

/// Rotary-grid positions of a layout.
///
/// Image `j` starts at the frame after the last frame of image `j - 1`, so
/// with single-frame images cell `(0, h, w)` of image `j` sits at
/// `(j - 1, h, w)`. Text token `t` sits at `(frames + 1, 0, t)`.
pub fn layout_positions(layout: &Layout) -> Vec<Position> {
    let mut frame_base = Vec::with_capacity(layout.grids.len());
    let mut acc = 0;
    for g in &layout.grids {
        frame_base.push(acc);
        acc += g.frames;
    }
    let total_frames = acc;
    layout
        .metas
        .iter()
        .map(|m| match m.kind {
            TokenKind::Image => {
                let j = m.image_index.unwrap_or(1);
                let (f, h, w) = m.cell;
                Position::new(frame_base[j - 1] + f, h, w)
            }
            TokenKind::Separator => {
                let j = m.image_index.unwrap_or(1);
                let frame = frame_base[j - 1] + layout.grids[j - 1].frames - 1;
                match layout.options.separator_positions {
                    SeparatorPositions::Unrotated => Position::unrotated(frame, 0, 0),
                    SeparatorPositions::InheritFrame => Position::new(frame, 0, 0),
                }
            }
            TokenKind::Text => Position::new(total_frames + 1, 0, m.cell.2),
        })
        .collect()
}

pub fn assign_positions<F: Real>(seq: &AssembledSequence<F>) -> Vec<Position> {
    layout_positions(&seq.layout)
}

/// Per-image token matrices as they were before assembly.
pub fn recover_images<F: Real>(seq: &AssembledSequence<F>) -> Result<Vec<Matrix<F>>> {
    let n = seq.image_count();
    let mut out = Vec::with_capacity(n);
    for span in seq.spans() {
        if let SpanKind::Image { image } = span.kind {
            let mut block = seq.tokens.slice_rows(span.start, span.len);
            if let Some(icfg) = &seq.index_embed {
                subtract_index_embedding_in_place(&mut block, &index_embedding(image, n, icfg)?)?;
            }
            out.push(block);
        }
    }
    Ok(out)
}

/// First structural problem found in a sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation(pub String);

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

fn violation<T>(msg: impl Into<String>) -> core::result::Result<T, Violation> {
    Err(Violation(msg.into()))
}

/// Check provenance partition, block contiguity and separator placement.
pub fn validate_sequence<F: Real>(seq: &AssembledSequence<F>) -> core::result::Result<(), Violation> {
    let metas = seq.metas();
    let layout = &seq.layout;
    if metas.len() != seq.tokens.rows() {
        return violation(format!("{} metas for {} token rows", metas.len(), seq.tokens.rows()));
    }

    if let Some(first_sep) = metas.iter().position(|m| m.kind == TokenKind::Separator) {
        if !metas[..first_sep].iter().any(|m| m.kind == TokenKind::Image) {
            return violation("separator before first image");
        }
    }
    for j in 1..=layout.image_count() {
        let mut rows = metas
            .iter()
            .enumerate()
            .filter(|(_, m)| m.kind == TokenKind::Image && m.image_index == Some(j))
            .map(|(i, _)| i);
        if let Some(first) = rows.next() {
            let last = rows.last().unwrap_or(first);
            let count = metas[first..=last]
                .iter()
                .filter(|m| m.kind == TokenKind::Image && m.image_index == Some(j))
                .count();
            if count != last - first + 1 {
                return violation("non-contiguous image block");
            }
        }
    }

    let mut current: Option<usize> = None;
    let mut seen = Vec::new();
    let mut sep_run = 0usize;
    let mut text_started = false;
    for (i, m) in metas.iter().enumerate() {
        match m.kind {
            TokenKind::Image => {
                let Some(j) = m.image_index else {
                    return violation(format!("image token {i} carries no image index"));
                };
                if text_started {
                    return violation("image token after text");
                }
                if current != Some(j) {
                    if seen.contains(&j) {
                        return violation("non-contiguous image block");
                    }
                    if j != seen.len() + 1 {
                        return violation(format!("image block {j} out of order"));
                    }
                    if let Some(prev) = current {
                        if layout.options.use_separator && sep_run != layout.separator_width {
                            return violation(format!("missing separator after image {prev}"));
                        }
                    }
                    seen.push(j);
                    current = Some(j);
                } else if sep_run > 0 {
                    return violation("non-contiguous image block");
                }
                sep_run = 0;
            }
            TokenKind::Separator => {
                let Some(prev) = current else {
                    return violation("separator before first image");
                };
                if text_started {
                    return violation("separator after text");
                }
                if !layout.options.use_separator {
                    return violation("separator present while separators are disabled");
                }
                if m.image_index != Some(prev) {
                    return violation(format!("separator attributed to image {:?} follows image {prev}", m.image_index));
                }
                sep_run += 1;
                if sep_run > layout.separator_width {
                    return violation(format!("separator block after image {prev} wider than {}", layout.separator_width));
                }
            }
            TokenKind::Text => {
                if m.image_index.is_some() {
                    return violation(format!("text token {i} carries an image index"));
                }
                text_started = true;
            }
        }
    }
    if seen.is_empty() {
        return violation("sequence has no image tokens");
    }
    if seen.len() != layout.image_count() {
        return violation(format!("{} image blocks for {} images", seen.len(), layout.image_count()));
    }
    let expected_seps = layout.options.separator_count(layout.image_count()) * layout.separator_width;
    let seps = metas.iter().filter(|m| m.kind == TokenKind::Separator).count();
    if seps != expected_seps {
        return violation(format!("{seps} separator tokens, policy requires {expected_seps}"));
    }

    let mut cursor = 0;
    for span in &layout.spans {
        if span.start != cursor {
            return violation(format!("span table gap or overlap at row {cursor}"));
        }
        for m in &metas[span.range()] {
            let ok = match span.kind {
                SpanKind::Image { image } => m.kind == TokenKind::Image && m.image_index == Some(image),
                SpanKind::Separator { after } => m.kind == TokenKind::Separator && m.image_index == Some(after),
                SpanKind::Text => m.kind == TokenKind::Text,
            };
            if !ok {
                return violation(format!("span {:?} disagrees with token metadata", span.kind));
            }
        }
        cursor += span.len;
    }
    if cursor != metas.len() {
        return violation(format!("span table covers {cursor} of {} rows", metas.len()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SpanReport {
    #[cfg_attr(feature = "serde", serde(flatten))]
    pub span: Span,
    /// Rotary position of the span's first token.
    pub first_position: Position,
}

/// Deterministic description of an assembled layout.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SequenceReport {
    pub image_count: usize,
    pub length: usize,
    pub channels: usize,
    pub separator_width: usize,
    pub separator_count: usize,
    pub text_len: usize,
    pub use_separator: bool,
    pub use_index_embed: bool,
    pub trailing_separator: bool,
    pub separator_positions: SeparatorPositions,
    pub index_tau: Option<f64>,
    pub spans: Vec<SpanReport>,
}

pub fn sequence_report<F: Real>(seq: &AssembledSequence<F>) -> SequenceReport {
    layout_report(&seq.layout, seq.channels(), seq.index_embed.map(|c| c.tau))
}

pub fn layout_report(layout: &Layout, channels: usize, index_tau: Option<f64>) -> SequenceReport {
    let positions = layout_positions(layout);
    let spans = layout
        .spans
        .iter()
        .map(|s| SpanReport {
            span: *s,
            first_position: positions[s.start],
        })
        .collect();
    SequenceReport {
        image_count: layout.image_count(),
        length: layout.len(),
        channels,
        separator_width: layout.separator_width,
        separator_count: layout.options.separator_count(layout.image_count()),
        text_len: layout.text_len,
        use_separator: layout.options.use_separator,
        use_index_embed: layout.options.use_index_embed,
        trailing_separator: layout.options.trailing_separator,
        separator_positions: layout.options.separator_positions,
        index_tau: if layout.options.use_index_embed { index_tau } else { None },
        spans,
    }
}

fn on_off(b: bool) -> &'static str {
    if b {
        "on"
    } else {
        "off"
    }
}

impl fmt::Display for SequenceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "images: {}  length: {}  channels: {}  text: {}",
            self.image_count, self.length, self.channels, self.text_len
        )?;
        writeln!(
            f,
            "separator: {} (width {}, count {}, trailing {})  index_embed: {}",
            on_off(self.use_separator),
            self.separator_width,
            self.separator_count,
            on_off(self.trailing_separator),
            on_off(self.use_index_embed)
        )?;
        for s in &self.spans {
            let label = match s.span.kind {
                SpanKind::Image { image } => format!("image {image}"),
                SpanKind::Separator { after } => format!("sep after {after}"),
                SpanKind::Text => String::from("text"),
            };
            let p = s.first_position;
            writeln!(
                f,
                "  {label:<14} [{:>4}, {:>4})  pos ({}, {}, {}){}",
                s.span.start,
                s.span.start + s.span.len,
                p.frame,
                p.height,
                p.width,
                if p.rotate { "" } else { " unrotated" }
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    fn icfg(c: usize) -> IndexEmbedConfig {
        IndexEmbedConfig::new(10_000.0, c).unwrap()
    }

    fn images(grids: &[(usize, usize, usize)], c: usize, rng: &mut Rng) -> Vec<LatentImage> {
        grids
            .iter()
            .enumerate()
            .map(|(i, &(f, h, w))| {
                let g = GridShape::new(f, h, w).unwrap();
                let data = Matrix::from_fn(g.token_count(), c, |_, _| rng.gaussian());
                LatentImage::new(i + 1, g, data).unwrap()
            })
            .collect()
    }

    fn sep(d: usize, c: usize) -> SeparatorToken {
        SeparatorToken::init(d, c, &mut Rng::new(99)).unwrap()
    }

    #[test]
    fn two_images_d1_no_text() {
        let mut rng = Rng::new(0);
        let imgs = images(&[(1, 2, 2), (1, 2, 2)], 4, &mut rng);
        let seq = assemble(&imgs, &sep(1, 4), &icfg(4), &Matrix::zeros(0, 4), AssemblyOptions::default()).unwrap();
        assert_eq!(seq.len(), 10);
        let spans: Vec<_> = seq.spans().iter().map(|s| (s.kind, s.start, s.len)).collect();
        assert_eq!(
            spans,
            vec![
                (SpanKind::Image { image: 1 }, 0, 4),
                (SpanKind::Separator { after: 1 }, 4, 1),
                (SpanKind::Image { image: 2 }, 5, 4),
                (SpanKind::Separator { after: 2 }, 9, 1),
            ]
        );
        assert_eq!(validate_sequence(&seq), Ok(()));
    }

    #[test]
    fn one_image() {
        let mut rng = Rng::new(1);
        let imgs = images(&[(1, 3, 2)], 4, &mut rng);
        let seq = assemble(&imgs, &sep(1, 4), &icfg(4), &Matrix::zeros(0, 4), AssemblyOptions::default()).unwrap();
        assert_eq!(seq.len(), 7);
    }

    #[test]
    fn mixed_grids_d2_against_enumeration() {
        let mut rng = Rng::new(2);
        let grids = [(1, 2, 2), (1, 1, 3), (1, 3, 1)];
        let imgs = images(&grids, 4, &mut rng);
        let seq = assemble(&imgs, &sep(2, 4), &icfg(4), &Matrix::zeros(0, 4), AssemblyOptions::default()).unwrap();
        assert_eq!(seq.len(), 16);
        // Independent enumeration: walk images, append one label per token.
        let mut expected = Vec::new();
        for (j, &(f, h, w)) in grids.iter().enumerate() {
            for _ in 0..f * h * w {
                expected.push((TokenKind::Image, Some(j + 1)));
            }
            for _ in 0..2 {
                expected.push((TokenKind::Separator, Some(j + 1)));
            }
        }
        let got: Vec<_> = seq.metas().iter().map(|m| (m.kind, m.image_index)).collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn positions_follow_frame_offsets() {
        let mut rng = Rng::new(3);
        let imgs = images(&[(1, 2, 2), (1, 2, 2), (1, 2, 2)], 4, &mut rng);
        let text = Matrix::from_fn(2, 4, |_, _| 1.0);
        let seq = assemble(&imgs, &sep(1, 4), &icfg(4), &text, AssemblyOptions::default()).unwrap();
        let pos = assign_positions(&seq);
        // image 1, cell (0,1,1)
        assert_eq!(pos[3], Position::new(0, 1, 1));
        // image 3, cell (0,0,0)
        let img3 = seq.spans()[4].start;
        assert_eq!(pos[img3], Position::new(2, 0, 0));
        // separator after image 2
        let sep2 = seq.spans()[3].start;
        assert_eq!(pos[sep2], Position::unrotated(1, 0, 0));
        // text tokens after all frames
        assert_eq!(pos[seq.len() - 2], Position::new(4, 0, 0));
        assert_eq!(pos[seq.len() - 1], Position::new(4, 0, 1));
    }

    #[test]
    fn inherit_frame_policy_rotates_separators() {
        let mut rng = Rng::new(3);
        let imgs = images(&[(1, 1, 2), (1, 1, 2)], 4, &mut rng);
        let opts = AssemblyOptions {
            separator_positions: SeparatorPositions::InheritFrame,
            ..AssemblyOptions::default()
        };
        let seq = assemble(&imgs, &sep(1, 4), &icfg(4), &Matrix::zeros(0, 4), opts).unwrap();
        assert_eq!(assign_positions(&seq)[5], Position::new(1, 0, 0));
    }

    #[test]
    fn multi_frame_images_do_not_share_frames() {
        let layout = plan_layout(
            &[GridShape::new(2, 1, 1).unwrap(), GridShape::new(1, 1, 1).unwrap()],
            1,
            0,
            AssemblyOptions::default(),
        )
        .unwrap();
        let frames: Vec<_> = layout_positions(&layout).iter().map(|p| p.frame).collect();
        // image 1 frames 0,1 | sep | image 2 frame 2 | sep
        assert_eq!(frames, vec![0, 1, 1, 2, 2]);
    }

    #[test]
    fn text_is_untouched_and_separators_shared() {
        let mut rng = Rng::new(4);
        let imgs = images(&[(1, 1, 2), (1, 2, 1), (1, 1, 1)], 6, &mut rng);
        let text = Matrix::from_fn(3, 6, |r, c| (r * 6 + c) as f64 * 0.1);
        let s = sep(2, 6);
        let seq = assemble(&imgs, &s, &icfg(6), &text, AssemblyOptions::default()).unwrap();
        let t = seq.spans().last().unwrap();
        assert_eq!(seq.tokens.slice_rows(t.start, t.len), text);
        for span in seq.spans().iter().filter(|s| matches!(s.kind, SpanKind::Separator { .. })) {
            assert_eq!(seq.tokens.slice_rows(span.start, span.len), s.values);
        }
    }

    #[test]
    fn trailing_separator_off() {
        let mut rng = Rng::new(5);
        let imgs = images(&[(1, 1, 2), (1, 1, 2), (1, 1, 2)], 4, &mut rng);
        let opts = AssemblyOptions {
            trailing_separator: false,
            ..AssemblyOptions::default()
        };
        let seq = assemble(&imgs, &sep(1, 4), &icfg(4), &Matrix::zeros(0, 4), opts).unwrap();
        assert_eq!(seq.len(), 8);
        assert_eq!(validate_sequence(&seq), Ok(()));
    }

    #[test]
    fn plain_concatenation() {
        let mut rng = Rng::new(6);
        let imgs = images(&[(1, 1, 2), (1, 1, 2)], 4, &mut rng);
        let seq = assemble(&imgs, &sep(1, 4), &icfg(4), &Matrix::zeros(0, 4), AssemblyOptions::plain()).unwrap();
        assert_eq!(seq.len(), 4);
        assert_eq!(seq.tokens.slice_rows(0, 2), imgs[0].data);
        let report = sequence_report(&seq);
        assert_eq!(report.separator_count, 0);
        assert!(report.to_string().contains("index_embed: off"));
    }

    #[test]
    fn errors() {
        let mut rng = Rng::new(7);
        let mut imgs = images(&[(1, 1, 2), (1, 1, 2)], 4, &mut rng);
        let none = Matrix::zeros(0, 4);
        let opts = AssemblyOptions::default();
        assert!(assemble::<f64>(&[], &sep(1, 4), &icfg(4), &none, opts).is_err());
        assert!(assemble(&imgs, &sep(1, 6), &icfg(4), &none, opts).is_err());
        imgs[1].image_index = 3;
        assert!(assemble(&imgs, &sep(1, 4), &icfg(4), &none, opts).is_err());
    }

    #[test]
    fn violations() {
        let mut rng = Rng::new(8);
        let imgs = images(&[(1, 1, 2), (1, 1, 2)], 4, &mut rng);
        let good = assemble(&imgs, &sep(1, 4), &icfg(4), &Matrix::zeros(0, 4), AssemblyOptions::default()).unwrap();

        let mut bad = good.clone();
        bad.layout.metas.rotate_right(1); // separator now first
        assert_eq!(validate_sequence(&bad), Err(Violation("separator before first image".into())));

        let mut bad = good.clone();
        bad.layout.metas.swap(1, 3); // image 2 token inside image 1 block
        assert_eq!(validate_sequence(&bad), Err(Violation("non-contiguous image block".into())));
    }

    #[test]
    fn five_image_report() {
        let mut rng = Rng::new(9);
        let imgs = images(&[(1, 1, 1); 5], 4, &mut rng);
        let seq = assemble(&imgs, &sep(1, 4), &icfg(4), &Matrix::zeros(0, 4), AssemblyOptions::default()).unwrap();
        let r = sequence_report(&seq);
        assert_eq!(r.image_count, 5);
        assert_eq!(
            r.spans.iter().filter(|s| matches!(s.span.kind, SpanKind::Separator { .. })).count(),
            5
        );
    }

    #[test]
    fn recover_after_embedding() {
        let mut rng = Rng::new(10);
        let imgs = images(&[(1, 2, 2), (1, 1, 3)], 8, &mut rng);
        let seq = assemble(&imgs, &sep(1, 8), &icfg(8), &Matrix::zeros(0, 8), AssemblyOptions::default()).unwrap();
        let back = recover_images(&seq).unwrap();
        for (img, rec) in imgs.iter().zip(&back) {
            for (a, b) in img.data.as_slice().iter().zip(rec.as_slice()) {
                assert!((a - b).abs() <= 4.0 * f64::EPSILON * (1.0 + a.abs()));
            }
        }
    }
}
