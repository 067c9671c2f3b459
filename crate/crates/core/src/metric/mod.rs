//! Pair/triplet mining, the two metric-learning losses, and SGD training.

pub mod loss;
pub mod mining;
pub mod train;

pub use loss::{contrastive, contrastive_loss, wohlhart_lepetit, wohlhart_lepetit_loss, PairLabel, PairLoss, TripletLoss};
pub use mining::{FrameRef, Miner, PairRules, PairSample, TripletSample};
pub use train::{history_csv, mean_loss, train, EpochLog, LossKind, TrainConfig, TrainingSet};
