use super::traverse::Traverse;
use crate::error::{Error, Result};

/// Station and tunnel rejection thresholds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FilterThresholds {
    /// Frames slower than this (km/h) are treated as stopped at a station.
    pub speed_min: f64,
    /// Frames darker than this mean intensity are treated as tunnel interior.
    pub darkness_min: f64,
}

impl Default for FilterThresholds {
    fn default() -> Self {
        FilterThresholds {
            speed_min: 15.0,
            darkness_min: 0.2,
        }
    }
}

impl FilterThresholds {
    pub fn keeps(&self, speed: f64, mean_intensity: f64) -> bool {
        speed >= self.speed_min && mean_intensity >= self.darkness_min
    }
}

/// Keep frames with `speed >= speed_min` and mean intensity `>= darkness_min`,
/// re-indexing survivors from 0.
pub fn filter_frames(t: &Traverse, thresholds: FilterThresholds) -> Result<Traverse> {
    if !(thresholds.speed_min >= 0.0) || !(thresholds.darkness_min >= 0.0) {
        return Err(Error::config("filter thresholds must be non-negative"));
    }
    let mut out = Traverse {
        season: t.season.clone(),
        source_id: t.source_id.clone(),
        frames: Vec::with_capacity(t.len()),
    };
    for f in &t.frames {
        let intensity = f.image.mean_intensity();
        let keep = thresholds.keeps(f.speed, intensity);
        log::debug!(
            "{} frame {}: speed {:.2} intensity {:.4} -> {}",
            t.source_id,
            f.index,
            f.speed,
            intensity,
            if keep { "keep" } else { "drop" }
        );
        if keep {
            out.frames.push(f.clone());
        }
    }
    if out.frames.is_empty() {
        return Err(Error::data(format!(
            "{}: every frame was filtered out (speed_min {}, darkness_min {}); review the thresholds",
            t.source_id, thresholds.speed_min, thresholds.darkness_min
        )));
    }
    out.reindex();
    Ok(out)
}
