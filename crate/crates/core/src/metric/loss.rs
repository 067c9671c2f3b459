//! Pairwise contrastive and Wohlhart-Lepetit triplet losses on distances.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PairLabel {
    Positive,
    Negative,
}

/// Loss value with its derivative(s) with respect to the input distance(s).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairLoss {
    pub value: f64,
    pub d_distance: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TripletLoss {
    pub value: f64,
    /// d loss / d d_p
    pub d_positive: f64,
    /// d loss / d d_n
    pub d_negative: f64,
}

fn check_distance(d: f64, what: &str) -> Result<()> {
    if d.is_nan() || d < 0.0 {
        return Err(Error::data(format!("{what} must be a non-negative distance, got {d}")));
    }
    Ok(())
}

fn check_margin(m: f64) -> Result<()> {
    if !(m > 0.0) || !m.is_finite() {
        return Err(Error::config(format!("margin must be positive, got {m}")));
    }
    Ok(())
}

/// `d^2` for positives, `max(0, margin - d)^2` for negatives.
pub fn contrastive(d: f64, label: PairLabel, margin: f64) -> Result<PairLoss> {
    check_distance(d, "d")?;
    check_margin(margin)?;
    Ok(match label {
        PairLabel::Positive => PairLoss {
            value: d * d,
            d_distance: 2.0 * d,
        },
        PairLabel::Negative if d < margin => PairLoss {
            value: (margin - d).powi(2),
            d_distance: -2.0 * (margin - d),
        },
        PairLabel::Negative => PairLoss {
            value: 0.0,
            d_distance: 0.0,
        },
    })
}

pub fn contrastive_loss(d: f64, label: PairLabel, margin: f64) -> Result<f64> {
    contrastive(d, label, margin).map(|l| l.value)
}

/// `max{0, 1 - d_n / (margin + d_p)}`, bounded in `[0, 1]`. The zero branch
/// (including its boundary) has zero gradient.
pub fn wohlhart_lepetit(d_p: f64, d_n: f64, margin: f64) -> Result<TripletLoss> {
    check_distance(d_p, "d_p")?;
    check_distance(d_n, "d_n")?;
    check_margin(margin)?;
    let denom = margin + d_p;
    if d_n >= denom {
        return Ok(TripletLoss {
            value: 0.0,
            d_positive: 0.0,
            d_negative: 0.0,
        });
    }
    Ok(TripletLoss {
        value: 1.0 - d_n / denom,
        d_positive: d_n / (denom * denom),
        d_negative: -1.0 / denom,
    })
}

pub fn wohlhart_lepetit_loss(d_p: f64, d_n: f64, margin: f64) -> Result<f64> {
    wohlhart_lepetit(d_p, d_n, margin).map(|l| l.value)
}
