//! Progressive decoding of partially received streams.
//!
//! A decoded stream renders at the deepest stage its chunks support: the
//! first layer, the output layer (and the Fourier matrix when the family
//! needs one) are mandatory, and each consecutive hidden layer received
//! after that deepens the render by one stage. Hidden layers past the
//! first gap contribute nothing — the network has no path through a
//! missing layer — so they are ignored. The function is pure; calling it
//! again after more chunks arrive simply supersedes the last image.

use crate::error::FormatError;
use crate::image::Image;
use crate::models::{render_into, Family, Model};
use crate::stream::format::{build_partial_model, DecodedStream};

/// Result of a progressive decode.
#[derive(Clone, Debug)]
pub struct ProgressiveOutput {
    pub image: Image,
    /// Stage the render corresponds to: 1 ⇒ first + output layers only,
    /// `n + 1` ⇒ the full network.
    pub stage: usize,
    /// Layer indices that took part in the forward pass.
    pub active: Vec<usize>,
    /// The partially populated model (absent layers zero-filled).
    pub model: Model,
}

/// Render the deepest image the received chunks allow.
pub fn progressive_decode(
    ds: &DecodedStream,
    height: usize,
    width: usize,
) -> Result<ProgressiveOutput, FormatError> {
    let header = &ds.header;
    if header.family == Family::Fourier && !ds.chunks.contains_key(&0) {
        return Err(FormatError::Undecodable("feature matrix chunk not received"));
    }
    if !ds.chunks.contains_key(&1) {
        return Err(FormatError::Undecodable("first layer chunk not received"));
    }
    let out_id = header.output_chunk_id();
    if !ds.chunks.contains_key(&out_id) {
        return Err(FormatError::Undecodable("output layer chunk not received"));
    }

    // Longest contiguous run of hidden layers: chunk ids 2, 3, ...
    let mut prefix = 0usize;
    while prefix < header.n as usize && ds.chunks.contains_key(&(2 + prefix as u8)) {
        prefix += 1;
    }

    let model = build_partial_model(ds);
    let mut active: Vec<usize> = (0..=prefix).collect();
    active.push(model.output_index());
    let mut image = Image::new(height, width);
    render_into(&model, &mut image, Some(&active));
    Ok(ProgressiveOutput { image, stage: prefix + 1, active, model })
}
