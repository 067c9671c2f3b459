//! Cross-season evaluation: every ordered (input, reference) pair of
//! distinct traverses.

use super::index::{DescriptorIndex, MatchResult};
use super::metrics::{default_thresholds, fraction_correct, precision_recall, PrPoint};
use crate::backbone::EmbeddingModel;
use crate::dataset::AlignedCorpus;
use crate::error::{Error, Result};
use crate::parallel::Parallelism;

/// Number of threshold steps for the default precision-recall curves.
pub const PR_STEPS: usize = 50;

/// Results for one (input, reference) combination.
#[derive(Clone, Debug, PartialEq)]
pub struct Combination {
    pub input: String,
    pub reference: String,
    pub fc: f64,
    pub matches: Vec<MatchResult>,
    pub pr_curve: Vec<PrPoint>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    /// Season order as in the corpus.
    pub seasons: Vec<String>,
    /// Off-diagonal combinations in `(input, reference)` row-major order.
    pub combinations: Vec<Combination>,
}

impl EvalReport {
    pub fn fc(&self, input: &str, reference: &str) -> Option<f64> {
        self.combinations
            .iter()
            .find(|c| c.input == input && c.reference == reference)
            .map(|c| c.fc)
    }

    pub fn mean_fc(&self) -> f64 {
        if self.combinations.is_empty() {
            return 0.0;
        }
        self.combinations.iter().map(|c| c.fc).sum::<f64>() / self.combinations.len() as f64
    }
}

/// Which vector represents each image.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Representation {
    /// 128-d head output.
    Embedding,
    /// Raw flattened features at a backbone layer.
    Tap(String),
}

/// Query every input descriptor against the reference set.
/// `frame_indices[k]` is the corpus index of row `k` in both sets.
pub fn evaluate_pair(
    input: &[Vec<f32>],
    reference: &[Vec<f32>],
    frame_indices: &[usize],
    tolerance: usize,
    par: &Parallelism,
) -> Result<(f64, Vec<MatchResult>)> {
    if input.len() != frame_indices.len() {
        return Err(Error::data("input descriptors and frame indices differ in length"));
    }
    let index = DescriptorIndex::build(reference, frame_indices.to_vec())?;
    let mut matches = par
        .map(input.len(), |k| index.query_nearest(frame_indices[k], &input[k]))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let fc = fraction_correct(&mut matches, tolerance)?;
    Ok((fc, matches))
}

/// Build the report from per-traverse descriptor sets.
pub fn evaluate_descriptor_sets(
    seasons: &[String],
    sets: &[Vec<Vec<f32>>],
    frame_indices: &[usize],
    tolerance: usize,
    par: &Parallelism,
) -> Result<EvalReport> {
    if sets.len() < 2 || seasons.len() != sets.len() {
        return Err(Error::data("cross-season evaluation needs at least two labeled traverses"));
    }
    let mut combinations = Vec::new();
    for (qi, q) in sets.iter().enumerate() {
        for (ri, r) in sets.iter().enumerate() {
            if qi == ri {
                continue;
            }
            let (fc, matches) = evaluate_pair(q, r, frame_indices, tolerance, par)?;
            let pr_curve = precision_recall(&matches, &default_thresholds(&matches, PR_STEPS))?;
            combinations.push(Combination {
                input: seasons[qi].clone(),
                reference: seasons[ri].clone(),
                fc,
                matches,
                pr_curve,
            });
        }
    }
    Ok(EvalReport {
        seasons: seasons.to_vec(),
        combinations,
    })
}

/// Descriptors of `frame_indices` for every traverse.
pub fn describe_corpus(
    corpus: &AlignedCorpus,
    model: &EmbeddingModel,
    frame_indices: &[usize],
    repr: &Representation,
    par: &Parallelism,
) -> Result<Vec<Vec<Vec<f32>>>> {
    if let Some(&i) = frame_indices.iter().find(|&&i| i >= corpus.len()) {
        return Err(Error::data(format!("frame index {i} outside corpus of {}", corpus.len())));
    }
    (0..corpus.n_traverses())
        .map(|t| {
            par.map(frame_indices.len(), |k| {
                let img = corpus.image(t, frame_indices[k]);
                match repr {
                    Representation::Embedding => model.embed(img),
                    Representation::Tap(tap) => model.extract_features(img, tap),
                }
                .map(|d| d.values)
            })
            .into_iter()
            .collect()
        })
        .collect()
}

/// Embed the test frames of every traverse and evaluate all ordered
/// combinations of distinct traverses.
pub fn cross_season_matrix(
    corpus: &AlignedCorpus,
    model: &EmbeddingModel,
    test_indices: &[usize],
    tolerance: usize,
    par: &Parallelism,
) -> Result<EvalReport> {
    cross_season_matrix_with(corpus, model, test_indices, tolerance, &Representation::Embedding, par)
}

pub fn cross_season_matrix_with(
    corpus: &AlignedCorpus,
    model: &EmbeddingModel,
    test_indices: &[usize],
    tolerance: usize,
    repr: &Representation,
    par: &Parallelism,
) -> Result<EvalReport> {
    if corpus.n_traverses() < 2 {
        return Err(Error::data("cross-season evaluation needs at least two traverses"));
    }
    let sets = describe_corpus(corpus, model, test_indices, repr, par)?;
    evaluate_descriptor_sets(&corpus.seasons(), &sets, test_indices, tolerance, par)
}
