//! Traverse ingestion, filtering, cross-season alignment, place labels,
//! partitions, and the synthetic multi-condition corpus generator.

pub mod align;
pub mod filter;
pub mod labeling;
pub mod manifest;
pub mod partition;
pub mod synth;
pub mod traverse;

pub use align::{align, haversine_m};
pub use filter::{filter_frames, FilterThresholds};
pub use labeling::PlaceLabeling;
pub use manifest::{load_traverse, save_traverse, ImageShape, IngestStats};
pub use partition::Partition;
pub use synth::{synth_corpus, ConditionAppearance, SynthConfig};
pub use traverse::{AlignedCorpus, Frame, Traverse};
