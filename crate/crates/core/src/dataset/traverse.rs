use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::image::Image;

/// One sampled frame of a traverse.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    /// Position within the traverse after filtering.
    pub index: usize,
    /// Seconds since epoch.
    pub timestamp: i64,
    pub lat: f64,
    pub lon: f64,
    /// km/h
    pub speed: f64,
    pub image: Image,
    pub image_path: PathBuf,
}

impl Frame {
    pub fn gps_valid(lat: f64, lon: f64, speed: f64) -> bool {
        lat.is_finite()
            && lon.is_finite()
            && speed.is_finite()
            && (-90.0..=90.0).contains(&lat)
            && (-180.0..=180.0).contains(&lon)
            && speed >= 0.0
    }
}

/// A single pass along the route under one appearance condition.
#[derive(Clone, Debug, PartialEq)]
pub struct Traverse {
    pub season: String,
    pub source_id: String,
    pub frames: Vec<Frame>,
}

impl Traverse {
    /// Builds a traverse, checking ordering, index, and image-shape invariants.
    pub fn new(season: impl Into<String>, source_id: impl Into<String>, frames: Vec<Frame>) -> Result<Self> {
        let t = Traverse {
            season: season.into(),
            source_id: source_id.into(),
            frames,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let Some(first) = self.frames.first() else {
            return Ok(());
        };
        let dims = first.image.dims();
        for (i, f) in self.frames.iter().enumerate() {
            if f.index != i {
                return Err(Error::data(format!(
                    "{}: frame at position {i} has index {}",
                    self.source_id, f.index
                )));
            }
            if f.image.dims() != dims {
                return Err(Error::data(format!(
                    "{}: frame {i} has image dims {:?}, expected {:?}",
                    self.source_id,
                    f.image.dims(),
                    dims
                )));
            }
            if !Frame::gps_valid(f.lat, f.lon, f.speed) {
                return Err(Error::data(format!("{}: frame {i} has invalid GPS", self.source_id)));
            }
        }
        for w in self.frames.windows(2) {
            if w[1].timestamp <= w[0].timestamp {
                return Err(Error::data(format!(
                    "{}: timestamps not strictly increasing at index {}",
                    self.source_id, w[1].index
                )));
            }
        }
        Ok(())
    }

    /// Reassign indices `0..len` in current order.
    pub(crate) fn reindex(&mut self) {
        for (i, f) in self.frames.iter_mut().enumerate() {
            f.index = i;
        }
    }
}

/// Traverses of equal length where equal indices depict the same place.
#[derive(Clone, Debug, PartialEq)]
pub struct AlignedCorpus {
    traverses: Vec<Traverse>,
    len: usize,
}

impl AlignedCorpus {
    pub fn new(traverses: Vec<Traverse>) -> Result<Self> {
        let Some(first) = traverses.first() else {
            return Err(Error::data("aligned corpus needs at least one traverse"));
        };
        let len = first.len();
        let dims = first.frames.first().map(|f| f.image.dims());
        for t in &traverses {
            t.validate()?;
            if t.len() != len {
                return Err(Error::data(format!(
                    "traverse {} has {} frames, expected {len}",
                    t.source_id,
                    t.len()
                )));
            }
            if t.frames.first().map(|f| f.image.dims()) != dims {
                return Err(Error::data(format!("traverse {} has mismatched image dims", t.source_id)));
            }
        }
        Ok(AlignedCorpus { traverses, len })
    }

    pub fn traverses(&self) -> &[Traverse] {
        &self.traverses
    }

    pub fn into_traverses(self) -> Vec<Traverse> {
        self.traverses
    }

    /// Frames per traverse.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn n_traverses(&self) -> usize {
        self.traverses.len()
    }

    pub fn image(&self, traverse: usize, index: usize) -> &Image {
        &self.traverses[traverse].frames[index].image
    }

    pub fn seasons(&self) -> Vec<String> {
        self.traverses.iter().map(|t| t.season.clone()).collect()
    }

    /// Largest great-circle distance (m) between frames sharing an index.
    pub fn max_alignment_error_m(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.len {
            for a in 0..self.traverses.len() {
                for b in a + 1..self.traverses.len() {
                    let fa = &self.traverses[a].frames[i];
                    let fb = &self.traverses[b].frames[i];
                    worst = worst.max(super::align::haversine_m(fa.lat, fa.lon, fb.lat, fb.lon));
                }
            }
        }
        worst
    }
}
