//! Run configuration: defaults, an optional TOML file, then environment
//! overrides for the service settings.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sonar_complexity::elo::EloConfig;
use sonar_complexity::metrics::MetricConfig;
use sonar_complexity::simulate::SimulationConfig;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServeConfig {
    pub listen: String,
    pub dataset: Option<PathBuf>,
    pub log: PathBuf,
    pub p_repeat: f64,
    pub seed: u64,
    /// Directory of web rater assets served at `/`.
    pub static_dir: Option<PathBuf>,
}

impl Default for ServeConfig {
    fn default() -> Self {
        Self {
            listen: "127.0.0.1:8080".into(),
            dataset: None,
            log: PathBuf::from("judgments.jsonl"),
            p_repeat: 0.1,
            seed: 0,
            static_dir: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub elo: EloConfig,
    pub metrics: MetricConfig,
    pub simulate: SimulationConfig,
    pub serve: ServeConfig,
}

pub const ENV_LISTEN: &str = "SONAR_LISTEN";
pub const ENV_DATASET: &str = "SONAR_DATASET";
pub const ENV_LOG: &str = "SONAR_LOG";
pub const ENV_P_REPEAT: &str = "SONAR_P_REPEAT";
pub const ENV_SEED: &str = "SONAR_SEED";
pub const ENV_STATIC: &str = "SONAR_STATIC_DIR";

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("bad config {}: {e}", path.display())))
    }

    /// Applies `SONAR_*` variables to the service section.
    pub fn apply_env(&mut self, get: impl Fn(&str) -> Option<String>) -> Result<()> {
        let s = &mut self.serve;
        if let Some(v) = get(ENV_LISTEN) {
            s.listen = v;
        }
        if let Some(v) = get(ENV_DATASET) {
            s.dataset = Some(v.into());
        }
        if let Some(v) = get(ENV_LOG) {
            s.log = v.into();
        }
        if let Some(v) = get(ENV_STATIC) {
            s.static_dir = Some(v.into());
        }
        if let Some(v) = get(ENV_P_REPEAT) {
            s.p_repeat = v
                .parse()
                .map_err(|_| CliError::Usage(format!("{ENV_P_REPEAT} is not a number: {v}")))?;
        }
        if let Some(v) = get(ENV_SEED) {
            s.seed = v
                .parse()
                .map_err(|_| CliError::Usage(format!("{ENV_SEED} is not an integer: {v}")))?;
        }
        Ok(())
    }
}
