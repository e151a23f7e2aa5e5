//! Minimal reverse-mode automatic differentiation over dense `f64` arrays.
//!
//! Only the operators the agents need are provided. A [`Graph`] records a
//! forward pass against a read-only [`ParamStore`]; [`Graph::backward`]
//! consumes the graph and returns gradients, which the store accumulates and
//! [`Adam`] applies.

mod checkpoint;
pub mod gradcheck;
mod graph;
mod init;
mod kernels;
mod layers;
mod optim;
mod params;
mod tensor;

pub use checkpoint::{CheckpointOptimizer, EncoderCheckpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use graph::{Gradients, Graph, Var};
pub use init::orthogonal;
pub use layers::{pixels_to_tensor, Conv2d, ConvLayerSpec, Encoder, EncoderSpec, Linear};
pub use optim::{clip_grad_norm, Adam, AdamState};
pub use params::{ParamId, ParamStore};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    Shape { op: &'static str, left: Vec<usize>, right: Vec<usize> },
    #[error("loss must be a scalar, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("parameter {0} has no gradient")]
    MissingGrad(String),
    #[error("invalid encoder spec: {0}")]
    InvalidSpec(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("index {index} out of range for {len} classes")]
    Index { index: usize, len: usize },
}

pub(crate) fn shape_err(op: &'static str, left: &[usize], right: &[usize]) -> NnError {
    NnError::Shape { op, left: left.to_vec(), right: right.to_vec() }
}

/// Draws an index from a categorical distribution given by `probs`.
pub fn sample_categorical(probs: &[f64], rng: &mut impl rand::Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Row-wise softmax of a `[rows, cols]` buffer.
pub fn softmax_rows(logits: &[f64], cols: usize) -> Vec<f64> {
    let mut out = logits.to_vec();
    for row in out.chunks_exact_mut(cols) {
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for v in row.iter_mut() {
            *v = (*v - m).exp();
            z += *v;
        }
        for v in row.iter_mut() {
            *v /= z;
        }
    }
    out
}

#[cfg(test)]
mod tests;
