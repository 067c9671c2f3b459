use crate::error::{Error, Result};

/// Which frame pairs count as the same place.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PlaceLabeling {
    /// Maximum index separation labeled same-place.
    pub same_place_sep: usize,
    /// Sliding-window width used to group consecutive frames.
    pub window: usize,
}

impl Default for PlaceLabeling {
    fn default() -> Self {
        PlaceLabeling {
            same_place_sep: 3,
            window: 5,
        }
    }
}

impl PlaceLabeling {
    pub fn new(same_place_sep: usize, window: usize) -> Result<Self> {
        if window == 0 {
            return Err(Error::config("place window must be at least 1"));
        }
        Ok(PlaceLabeling {
            same_place_sep,
            window,
        })
    }

    /// Symmetric and reflexive, not transitive.
    pub fn same_place(&self, i: usize, j: usize) -> bool {
        i.abs_diff(j) <= self.same_place_sep
    }
}
