//! Appearance-invariant visual place recognition.
//!
//! The crate covers the whole protocol: curating aligned multi-season image
//! sequences ([`dataset`]), extracting layer-tagged CNN features and a 128-d
//! embedding ([`backbone`]), training that embedding with contrastive or
//! Wohlhart-Lepetit triplet losses ([`metric`]), and scoring cross-season
//! nearest-neighbor retrieval ([`retrieval`], [`report`]). The [`cli`] module
//! chains the stages behind the `seasonmatch` binary.

pub mod artifact;
pub mod backbone;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod image;
pub mod metric;
pub mod parallel;
pub mod report;
pub mod retrieval;

pub use error::{Error, Result};
pub use image::Image;
