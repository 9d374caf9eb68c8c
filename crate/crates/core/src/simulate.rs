//! Simulated raters for desk-scale experiments.
//!
//! Each rater perceives an image's latent complexity plus a fixed personal
//! offset, calls the pair NEUTRAL when the perceived difference is inside
//! the neutral band, and otherwise picks the more complex side under a
//! logistic (Bradley-Terry) choice rule.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::elo::{Comparison, Outcome};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimulationError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, SimulationError>;

pub const BASE_TIMESTAMP_MS: i64 = 1_600_000_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RaterModel {
    pub id: String,
    /// Logistic scale of the choice rule in latent units; 0 is noiseless.
    pub noise: f64,
    /// Standard deviation of the rater's per-image perception offsets.
    pub bias_sd: f64,
    /// Judges the opposite of what the rater perceives.
    #[serde(default)]
    pub contrarian: bool,
}

impl RaterModel {
    pub fn new(id: impl Into<String>, noise: f64) -> Self {
        Self {
            id: id.into(),
            noise,
            bias_sd: 0.0,
            contrarian: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationConfig {
    pub n_images: usize,
    pub n_comparisons: usize,
    pub raters: Vec<RaterModel>,
    /// Perceived differences smaller than this are judged NEUTRAL.
    pub neutral_band: f64,
    /// Chance that a judgment replays one of the rater's earlier pairs.
    pub p_repeat: f64,
    /// Latent complexities are uniform on `[center - spread/2, center + spread/2]`.
    pub latent_center: f64,
    pub latent_spread: f64,
    pub seed: u64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            n_images: 117,
            n_comparisons: 5722,
            raters: (1..=6).map(|i| RaterModel::new(format!("sim-rater-{i}"), 400.0)).collect(),
            neutral_band: 25.0,
            p_repeat: 0.0,
            latent_center: 1050.0,
            latent_spread: 500.0,
            seed: 0,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_images < 2 {
            return Err(SimulationError::InvalidArgument(format!(
                "need at least 2 images, got {}",
                self.n_images
            )));
        }
        if self.raters.is_empty() {
            return Err(SimulationError::InvalidArgument("need at least one rater".into()));
        }
        for r in &self.raters {
            if !(r.noise >= 0.0 && r.noise.is_finite()) || !(r.bias_sd >= 0.0 && r.bias_sd.is_finite()) {
                return Err(SimulationError::InvalidArgument(format!(
                    "rater {} has invalid noise parameters",
                    r.id
                )));
            }
        }
        if !(self.neutral_band >= 0.0) {
            return Err(SimulationError::InvalidArgument("neutral band must be non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.p_repeat) {
            return Err(SimulationError::InvalidArgument("p_repeat must lie in [0, 1]".into()));
        }
        if !(self.latent_spread >= 0.0) || !self.latent_center.is_finite() {
            return Err(SimulationError::InvalidArgument("invalid latent distribution".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Simulation {
    pub image_ids: Vec<String>,
    pub latent: Vec<f64>,
    pub records: Vec<Comparison>,
}

pub fn image_id(i: usize) -> String {
    format!("img-{i:03}")
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Latent complexities and a judgment log drawn from `cfg`.
pub fn simulate(cfg: &SimulationConfig) -> Result<Simulation> {
    cfg.validate()?;
    let mut rng = stream(cfg.seed, 0);
    let lo = cfg.latent_center - cfg.latent_spread / 2.0;
    let latent: Vec<f64> = (0..cfg.n_images)
        .map(|_| lo + cfg.latent_spread * rng.random::<f64>())
        .collect();
    let ids: Vec<String> = (0..cfg.n_images).map(image_id).collect();
    let records = simulate_judgments(&ids, &latent, cfg)?;
    Ok(Simulation {
        image_ids: ids,
        latent,
        records,
    })
}

/// Judgment log for given images and latent complexities. Raters take
/// turns; pairs are uniform over unordered pairs with random placement.
pub fn simulate_judgments(ids: &[String], latent: &[f64], cfg: &SimulationConfig) -> Result<Vec<Comparison>> {
    cfg.validate()?;
    if ids.len() != latent.len() || ids.len() < 2 {
        return Err(SimulationError::InvalidArgument(
            "need matching ids and latent values for at least 2 images".into(),
        ));
    }
    let n = ids.len();
    let mut bias_rng = stream(cfg.seed, 1);
    let offsets: Vec<Vec<f64>> = cfg
        .raters
        .iter()
        .map(|r| {
            (0..n)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut bias_rng);
                    r.bias_sd * z
                })
                .collect()
        })
        .collect();

    let mut rng = stream(cfg.seed, 2);
    let mut history: Vec<Vec<usize>> = vec![Vec::new(); cfg.raters.len()];
    let mut records: Vec<Comparison> = Vec::with_capacity(cfg.n_comparisons);
    let mut pairs: Vec<(usize, usize)> = Vec::with_capacity(cfg.n_comparisons);
    for k in 0..cfg.n_comparisons {
        let r = k % cfg.raters.len();
        let rater = &cfg.raters[r];
        let replay = !history[r].is_empty() && cfg.p_repeat > 0.0 && rng.random::<f64>() < cfg.p_repeat;
        let (left, right, repeat_of) = if replay {
            let orig = history[r][rng.random_range(0..history[r].len())];
            let (a, b) = pairs[orig];
            let (a, b) = if rng.random::<bool>() { (b, a) } else { (a, b) };
            (a, b, Some(records[orig].id.clone()))
        } else {
            let i = rng.random_range(0..n);
            let mut j = rng.random_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            (i, j, None)
        };

        let mut diff = (latent[left] + offsets[r][left]) - (latent[right] + offsets[r][right]);
        if rater.contrarian {
            diff = -diff;
        }
        let u: f64 = rng.random();
        let outcome = if diff.abs() < cfg.neutral_band {
            Outcome::Neutral
        } else if rater.noise == 0.0 {
            if diff > 0.0 { Outcome::LeftMoreComplex } else { Outcome::RightMoreComplex }
        } else {
            let p_left = 1.0 / (10f64.powf(-diff / rater.noise) + 1.0);
            if u < p_left { Outcome::LeftMoreComplex } else { Outcome::RightMoreComplex }
        };

        if repeat_of.is_none() {
            history[r].push(records.len());
        }
        pairs.push((left, right));
        records.push(Comparison {
            id: format!("c{:07}", k + 1),
            operator_id: rater.id.clone(),
            left: ids[left].clone(),
            right: ids[right].clone(),
            outcome,
            timestamp_ms: BASE_TIMESTAMP_MS + 1000 * k as i64,
            repeat_of,
        });
    }
    Ok(records)
}
