//! Multi-image token-sequence encoding.
//!
//! Reference images are flattened into one token stream for a transformer.
//! This crate provides the pieces that let the model tell the images apart:
//!
//! - [`mrope`]: three-axis rotary positions (frame, height, width), with each
//!   image occupying its own frame;
//! - [`index_embed`]: a fixed sinusoidal embedding of the normalized image
//!   index `j / N`, shared by all tokens of image `j`;
//! - [`assembler`]: the unified sequence with a learnable separator block
//!   after each image;
//! - [`model`]: a small attention network with hand-written gradients that
//!   consumes such sequences and trains the separator;
//! - [`probe`]: a synthetic image-identity retrieval task with the ablation
//!   and extrapolation protocols.
//!
//! The crate is `no_std` + `alloc`; file formats and the CLI live in the
//! `imgidx` crate.

#![no_std]
extern crate alloc;

pub mod assembler;
pub mod error;
pub mod index_embed;
pub mod latent;
pub mod matrix;
pub mod model;
pub mod mrope;
pub mod probe;
pub mod real;
pub mod rng;

pub use error::{Error, Result};
pub use latent::{flatten_image, GridShape, LatentImage, Position, TokenKind, TokenMeta};
pub use matrix::Matrix;
pub use real::Real;
pub use rng::Rng;
