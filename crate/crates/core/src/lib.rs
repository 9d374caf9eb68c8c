//! Human-grounded image complexity for seabed imagery.
//!
//! Pairwise "which image is more complex" judgments are turned into Elo
//! scores by averaging over shuffled replays of the judgment log. Four
//! texture metrics (lacunarity, edge intensity, structural entropy and a
//! compression ratio) are computed per image chip, and the [`analysis`]
//! module measures how well each metric tracks the human-derived score.

pub mod analysis;
pub mod dataset;
pub mod elo;
pub mod metrics;
pub mod rating;
pub mod simulate;
pub mod stats;

pub use analysis::{ConsistencyMatrix, RegressionResult, SiteSummary};
pub use dataset::{ImageChip, QcFlag};
pub use elo::{Comparison, EloConfig, EloResult, Outcome, RatingState};
pub use metrics::{Image2D, MetricConfig, MetricVector};
