//! Layer-tagged feature extraction and the 128-d embedding head.

pub mod io;
pub mod layers;
pub mod model;
pub mod spec;

pub use io::{load_weights, save_weights, DescriptorMatrix};
pub use model::{Descriptor, EmbeddingModel, Gradients, LinearHead, Trainable, EMBEDDING_DIM, HEAD_SOURCE};
pub use spec::{BackboneSpec, LayerKind, LayerSpec, INPUT_TAP};

use crate::error::Result;
use crate::image::Image;
use crate::parallel::Parallelism;

/// Extract `tap` features for many images; output order follows input order
/// and matches one-by-one extraction exactly.
pub fn extract_batch(m: &EmbeddingModel, images: &[&Image], tap: &str, par: &Parallelism) -> Result<Vec<Descriptor>> {
    par.map(images.len(), |i| m.extract_features(images[i], tap))
        .into_iter()
        .collect()
}

/// Embed many images through the head.
pub fn embed_batch(m: &EmbeddingModel, images: &[&Image], par: &Parallelism) -> Result<Vec<Descriptor>> {
    par.map(images.len(), |i| m.embed(images[i])).into_iter().collect()
}
