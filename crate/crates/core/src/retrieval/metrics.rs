use super::index::MatchResult;
use crate::error::{Error, Result};

/// One point of a precision-recall curve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Share of matches whose retrieved frame lies within `tolerance` frames of
/// the query's own index. Stamps `correct` on every match.
pub fn fraction_correct(matches: &mut [MatchResult], tolerance: usize) -> Result<f64> {
    if matches.is_empty() {
        return Err(Error::data("fraction of correct matches needs at least one match"));
    }
    let mut correct = 0usize;
    for m in matches.iter_mut() {
        m.correct = m.retrieved_index.abs_diff(m.query_index) <= tolerance;
        correct += usize::from(m.correct);
    }
    Ok(correct as f64 / matches.len() as f64)
}

/// For each threshold `t`, accept matches with `distance <= t`. Precision is
/// correct/accepted (1.0 when nothing is accepted); recall is
/// correct/all matches. Output is sorted by threshold.
pub fn precision_recall(matches: &[MatchResult], thresholds: &[f64]) -> Result<Vec<PrPoint>> {
    if matches.is_empty() {
        return Err(Error::data("precision-recall needs at least one match"));
    }
    let mut by_distance: Vec<(f64, bool)> = matches.iter().map(|m| (m.distance, m.correct)).collect();
    by_distance.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut ts = thresholds.to_vec();
    ts.sort_by(f64::total_cmp);

    let total = matches.len() as f64;
    let (mut accepted, mut correct) = (0usize, 0usize);
    let mut out = Vec::with_capacity(ts.len());
    for t in ts {
        while accepted < by_distance.len() && by_distance[accepted].0 <= t {
            correct += usize::from(by_distance[accepted].1);
            accepted += 1;
        }
        out.push(PrPoint {
            threshold: t,
            precision: if accepted == 0 { 1.0 } else { correct as f64 / accepted as f64 },
            recall: correct as f64 / total,
        });
    }
    Ok(out)
}

/// `steps + 1` evenly spaced thresholds from 0 to the largest distance.
pub fn default_thresholds(matches: &[MatchResult], steps: usize) -> Vec<f64> {
    let max = matches.iter().map(|m| m.distance).fold(0.0, f64::max);
    let steps = steps.max(1);
    (0..=steps)
        .map(|i| if i == steps { max } else { max * i as f64 / steps as f64 })
        .collect()
}
