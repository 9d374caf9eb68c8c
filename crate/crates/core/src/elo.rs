//! Elo ratings from pairwise complexity judgments.
//!
//! A single pass over a judgment log depends on the order in which the
//! judgments are applied, so [`run_replicated`] replays the log many times
//! under independent shuffles and summarizes each image's rating
//! distribution.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stats;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EloError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid comparison: image {0} compared with itself")]
    SelfComparison(String),
    #[error("comparison references unknown image {0}")]
    UnknownImage(String),
}

pub type Result<T> = std::result::Result<T, EloError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EloConfig {
    /// Rating points moved per unit of surprise.
    pub k_factor: f64,
    pub initial_rating: f64,
    /// Rating difference at which the stronger side is expected to win 10:1.
    pub logistic_scale: f64,
    pub num_replications: usize,
    pub seed: u64,
    pub ci_level: f64,
}

impl Default for EloConfig {
    fn default() -> Self {
        Self {
            k_factor: 32.0,
            initial_rating: 1000.0,
            logistic_scale: 400.0,
            num_replications: 1000,
            seed: 0,
            ci_level: 0.95,
        }
    }
}

impl EloConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.k_factor > 0.0 && self.k_factor.is_finite()) {
            return Err(EloError::InvalidArgument(format!(
                "k_factor must be positive, got {}",
                self.k_factor
            )));
        }
        if !(self.logistic_scale > 0.0 && self.logistic_scale.is_finite()) {
            return Err(EloError::InvalidArgument(format!(
                "logistic_scale must be positive, got {}",
                self.logistic_scale
            )));
        }
        if !self.initial_rating.is_finite() {
            return Err(EloError::InvalidArgument("initial_rating must be finite".into()));
        }
        if self.num_replications == 0 {
            return Err(EloError::InvalidArgument("num_replications must be at least 1".into()));
        }
        if !(self.ci_level > 0.0 && self.ci_level < 1.0) {
            return Err(EloError::InvalidArgument(format!(
                "ci_level must lie in (0, 1), got {}",
                self.ci_level
            )));
        }
        Ok(())
    }
}

/// A rater's verdict on one displayed pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    #[serde(rename = "LEFT")]
    LeftMoreComplex,
    #[serde(rename = "RIGHT")]
    RightMoreComplex,
    #[serde(rename = "NEUTRAL")]
    Neutral,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::LeftMoreComplex => "LEFT",
            Outcome::RightMoreComplex => "RIGHT",
            Outcome::Neutral => "NEUTRAL",
        }
    }

    /// The same verdict after swapping which image is shown on the left.
    pub fn swapped(self) -> Self {
        match self {
            Outcome::LeftMoreComplex => Outcome::RightMoreComplex,
            Outcome::RightMoreComplex => Outcome::LeftMoreComplex,
            Outcome::Neutral => Outcome::Neutral,
        }
    }
}

impl std::str::FromStr for Outcome {
    type Err = EloError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "LEFT" => Ok(Outcome::LeftMoreComplex),
            "RIGHT" => Ok(Outcome::RightMoreComplex),
            "NEUTRAL" => Ok(Outcome::Neutral),
            other => Err(EloError::InvalidArgument(format!("unknown outcome {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Actual score of one side: 1 for the more complex image, 0.5 for a tie.
pub fn outcome_weight(outcome: Outcome, perspective: Side) -> f64 {
    let left = match outcome {
        Outcome::LeftMoreComplex => 1.0,
        Outcome::Neutral => 0.5,
        Outcome::RightMoreComplex => 0.0,
    };
    match perspective {
        Side::Left => left,
        Side::Right => 1.0 - left,
    }
}

/// One judgment. Serialized with the field names of the judgment log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Comparison {
    #[serde(rename = "comparison_id")]
    pub id: String,
    pub operator_id: String,
    pub left: String,
    pub right: String,
    pub outcome: Outcome,
    #[serde(rename = "unix_timestamp_ms")]
    pub timestamp_ms: i64,
    #[serde(default)]
    pub repeat_of: Option<String>,
}

/// Expected score of the side rated `r_i` against `r_j`.
pub fn expected_score(r_i: f64, r_j: f64, scale: f64) -> Result<f64> {
    if !r_i.is_finite() || !r_j.is_finite() {
        return Err(EloError::InvalidArgument("ratings must be finite".into()));
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(EloError::InvalidArgument(format!("scale must be positive, got {scale}")));
    }
    Ok(logistic(r_i - r_j, scale))
}

#[inline]
fn logistic(diff: f64, scale: f64) -> f64 {
    1.0 / (10f64.powf(-diff / scale) + 1.0)
}

/// Rating change of the left image. The right image moves by the negation,
/// which keeps the pair's total exactly constant.
#[inline]
fn left_delta(r_left: f64, r_right: f64, actual_left: f64, k: f64, scale: f64) -> f64 {
    k * (actual_left - logistic(r_left - r_right, scale))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingState {
    pub ratings: BTreeMap<String, f64>,
    pub events_applied: u64,
}

impl RatingState {
    pub fn new<S: AsRef<str>>(image_ids: &[S], initial_rating: f64) -> Self {
        Self {
            ratings: image_ids
                .iter()
                .map(|id| (id.as_ref().to_owned(), initial_rating))
                .collect(),
            events_applied: 0,
        }
    }

    pub fn rating(&self, id: &str) -> Option<f64> {
        self.ratings.get(id).copied()
    }

    pub fn total(&self) -> f64 {
        stats::compensated_sum(self.ratings.values().copied())
    }

    /// Applies one judgment in place, inserting unseen images at the initial rating.
    pub fn apply(&mut self, comparison: &Comparison, config: &EloConfig) -> Result<()> {
        if comparison.left == comparison.right {
            return Err(EloError::SelfComparison(comparison.left.clone()));
        }
        let r_left = *self
            .ratings
            .entry(comparison.left.clone())
            .or_insert(config.initial_rating);
        let r_right = *self
            .ratings
            .entry(comparison.right.clone())
            .or_insert(config.initial_rating);
        let delta = left_delta(
            r_left,
            r_right,
            outcome_weight(comparison.outcome, Side::Left),
            config.k_factor,
            config.logistic_scale,
        );
        self.ratings.insert(comparison.left.clone(), r_left + delta);
        self.ratings.insert(comparison.right.clone(), r_right - delta);
        self.events_applied += 1;
        Ok(())
    }
}

pub fn update_pair(
    mut state: RatingState,
    comparison: &Comparison,
    config: &EloConfig,
) -> Result<RatingState> {
    state.apply(comparison, config)?;
    Ok(state)
}

/// Folds the judgments over a fresh state in the given order.
pub fn run_sequence<S: AsRef<str>>(
    comparisons: &[Comparison],
    image_ids: &[S],
    config: &EloConfig,
) -> Result<RatingState> {
    let mut state = RatingState::new(image_ids, config.initial_rating);
    for c in comparisons {
        for id in [&c.left, &c.right] {
            if !state.ratings.contains_key(id) {
                return Err(EloError::UnknownImage(id.clone()));
            }
        }
        state.apply(c, config)?;
    }
    Ok(state)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRating {
    pub mean_rating: f64,
    pub std_rating: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub comparisons_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EloResult {
    pub ratings: BTreeMap<String, ImageRating>,
    pub replications: usize,
}

impl EloResult {
    pub fn get(&self, id: &str) -> Option<&ImageRating> {
        self.ratings.get(id)
    }

    pub fn means(&self) -> BTreeMap<String, f64> {
        self.ratings
            .iter()
            .map(|(id, r)| (id.clone(), r.mean_rating))
            .collect()
    }
}

/// Judgment log resolved to dense image indices.
struct IndexedLog {
    ids: Vec<String>,
    events: Vec<(usize, usize, f64)>,
    counts: Vec<usize>,
}

impl IndexedLog {
    fn build<S: AsRef<str>>(comparisons: &[Comparison], image_ids: &[S]) -> Result<Self> {
        let ids: Vec<String> = image_ids
            .iter()
            .map(|s| s.as_ref().to_owned())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        if ids.is_empty() {
            return Err(EloError::InvalidArgument("image set is empty".into()));
        }
        let index: HashMap<&str, usize> =
            ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        let mut counts = vec![0usize; ids.len()];
        let mut events = Vec::with_capacity(comparisons.len());
        for c in comparisons {
            if c.left == c.right {
                return Err(EloError::SelfComparison(c.left.clone()));
            }
            let l = *index
                .get(c.left.as_str())
                .ok_or_else(|| EloError::UnknownImage(c.left.clone()))?;
            let r = *index
                .get(c.right.as_str())
                .ok_or_else(|| EloError::UnknownImage(c.right.clone()))?;
            counts[l] += 1;
            counts[r] += 1;
            events.push((l, r, outcome_weight(c.outcome, Side::Left)));
        }
        Ok(Self { ids, events, counts })
    }

    fn replicate(&self, config: &EloConfig, replication: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(replication);
        let mut order: Vec<usize> = (0..self.events.len()).collect();
        order.shuffle(&mut rng);

        let mut ratings = vec![config.initial_rating; self.ids.len()];
        for &e in &order {
            let (l, r, actual) = self.events[e];
            let delta = left_delta(
                ratings[l],
                ratings[r],
                actual,
                config.k_factor,
                config.logistic_scale,
            );
            ratings[l] += delta;
            ratings[r] -= delta;
        }
        ratings
    }
}

/// Mean rating per image over `config.num_replications` shuffled replays.
///
/// Replication `k` shuffles with ChaCha8 stream `k` under `config.seed`, so
/// results do not depend on how replications are scheduled.
pub fn run_replicated<S: AsRef<str>>(
    comparisons: &[Comparison],
    image_ids: &[S],
    config: &EloConfig,
) -> Result<EloResult> {
    run_replicated_with_workers(comparisons, image_ids, config, 0)
}

/// As [`run_replicated`], on a dedicated pool of `workers` threads
/// (`0` uses the global pool, `1` runs inline).
pub fn run_replicated_with_workers<S: AsRef<str>>(
    comparisons: &[Comparison],
    image_ids: &[S],
    config: &EloConfig,
    workers: usize,
) -> Result<EloResult> {
    config.validate()?;
    let log = IndexedLog::build(comparisons, image_ids)?;
    let samples = replicate_all(&log, config, workers);

    let n_images = log.ids.len();
    let mut ratings = BTreeMap::new();
    let mut column = Vec::with_capacity(samples.len());
    for i in 0..n_images {
        column.clear();
        column.extend(samples.iter().map(|s| s[i]));
        ratings.insert(log.ids[i].clone(), summarize(&column, config.ci_level, log.counts[i]));
    }
    Ok(EloResult {
        ratings,
        replications: config.num_replications,
    })
}

#[cfg(feature = "parallel")]
fn replicate_all(log: &IndexedLog, config: &EloConfig, workers: usize) -> Vec<Vec<f64>> {
    use rayon::prelude::*;
    let n = config.num_replications as u64;
    let run = || -> Vec<Vec<f64>> {
        (0..n)
            .into_par_iter()
            .map(|k| log.replicate(config, k))
            .collect()
    };
    match workers {
        0 => run(),
        1 => (0..n).map(|k| log.replicate(config, k)).collect(),
        w => match rayon::ThreadPoolBuilder::new().num_threads(w).build() {
            Ok(pool) => pool.install(run),
            Err(_) => run(),
        },
    }
}

#[cfg(not(feature = "parallel"))]
fn replicate_all(log: &IndexedLog, config: &EloConfig, _workers: usize) -> Vec<Vec<f64>> {
    (0..config.num_replications as u64)
        .map(|k| log.replicate(config, k))
        .collect()
}

fn summarize(samples: &[f64], level: f64, comparisons_count: usize) -> ImageRating {
    let first = samples[0];
    if samples.iter().all(|&s| s == first) {
        return ImageRating {
            mean_rating: first,
            std_rating: 0.0,
            ci_low: first,
            ci_high: first,
            comparisons_count,
        };
    }
    let mean = stats::mean(samples);
    let std = stats::sample_std(samples);
    let (low, high) = percentile_interval(&stats::sorted_copy(samples), level);
    ImageRating {
        mean_rating: mean,
        std_rating: std,
        // a percentile interval of a skewed sample can exclude the mean
        ci_low: low.min(mean),
        ci_high: high.max(mean),
        comparisons_count,
    }
}

fn percentile_interval(sorted: &[f64], level: f64) -> (f64, f64) {
    let tail = (1.0 - level) / 2.0;
    (
        stats::quantile_sorted(sorted, tail),
        stats::quantile_sorted(sorted, 1.0 - tail),
    )
}

/// Empirical percentile interval at `level`, interpolating linearly
/// between order statistics.
pub fn confidence_interval(samples: &[f64], level: f64) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(EloError::InvalidArgument("no samples".into()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(EloError::InvalidArgument(format!("level must lie in (0, 1), got {level}")));
    }
    Ok(percentile_interval(&stats::sorted_copy(samples), level))
}
