use std::path::Path;

use crate::backbone::DescriptorMatrix;
use crate::error::{Error, Result};

/// One retrieval outcome.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MatchResult {
    pub query_index: usize,
    pub retrieved_index: usize,
    pub distance: f64,
    /// Set by [`super::fraction_correct`].
    pub correct: bool,
}

/// Immutable exact-search database of descriptors.
#[derive(Clone, Debug, PartialEq)]
pub struct DescriptorIndex {
    dim: usize,
    data: Vec<f32>,
    frame_indices: Vec<usize>,
}

/// Squared Euclidean distance accumulated in double precision.
pub fn squared_distance(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = *x as f64 - *y as f64;
            d * d
        })
        .sum()
}

impl DescriptorIndex {
    pub fn build(descriptors: &[Vec<f32>], frame_indices: Vec<usize>) -> Result<Self> {
        let matrix = DescriptorMatrix::from_rows(descriptors)?;
        Self::from_matrix(matrix, frame_indices)
    }

    pub fn from_matrix(matrix: DescriptorMatrix, frame_indices: Vec<usize>) -> Result<Self> {
        if matrix.count == 0 {
            return Err(Error::data("descriptor index needs at least one descriptor"));
        }
        if matrix.count != frame_indices.len() {
            return Err(Error::data(format!(
                "{} descriptors but {} frame indices",
                matrix.count,
                frame_indices.len()
            )));
        }
        if let Some(i) = matrix.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("descriptor {} has a non-finite value", i / matrix.dim.max(1))));
        }
        Ok(DescriptorIndex {
            dim: matrix.dim,
            data: matrix.values,
            frame_indices,
        })
    }

    /// Load an `SMD1` file; row `k` gets frame index `k`.
    pub fn load(path: &Path) -> Result<Self> {
        let m = DescriptorMatrix::load(path)?;
        let idx = (0..m.count).collect();
        Self::from_matrix(m, idx)
    }

    pub fn to_matrix(&self) -> DescriptorMatrix {
        DescriptorMatrix {
            count: self.len(),
            dim: self.dim,
            values: self.data.clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.frame_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frame_indices.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn frame_indices(&self) -> &[usize] {
        &self.frame_indices
    }

    pub fn row(&self, k: usize) -> &[f32] {
        &self.data[k * self.dim..(k + 1) * self.dim]
    }

    /// Exact argmin of Euclidean distance; ties go to the lowest frame index.
    /// Returns `(frame_index, distance)`.
    pub fn nearest(&self, q: &[f32]) -> Result<(usize, f64)> {
        if q.len() != self.dim {
            return Err(Error::ShapeMismatch {
                name: "query".into(),
                expected: vec![self.dim],
                found: vec![q.len()],
            });
        }
        let mut best = (f64::INFINITY, usize::MAX);
        for (k, &fi) in self.frame_indices.iter().enumerate() {
            let d = squared_distance(q, self.row(k));
            if d < best.0 || (d == best.0 && fi < best.1) {
                best = (d, fi);
            }
        }
        Ok((best.1, best.0.sqrt()))
    }

    /// Nearest neighbor as a [`MatchResult`] with `correct` unset.
    pub fn query_nearest(&self, query_index: usize, q: &[f32]) -> Result<MatchResult> {
        let (retrieved_index, distance) = self.nearest(q)?;
        Ok(MatchResult {
            query_index,
            retrieved_index,
            distance,
            correct: false,
        })
    }
}
