//! Experiment configuration: one JSON file plus command-line overrides.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use splitree::levy_kernel::{Level, LifespanSpec, MeasureConfig};

use crate::error::CliError;

pub const SEED_ENV: &str = "SPLITREE_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub measure: MeasureConfig,
    /// Lifespan of the ancestor; `"inf"` is clipped to the cap.
    #[serde(default = "default_chi")]
    pub chi: Level,
    /// Analysis level.
    pub tau: f64,
    /// Truncation level of simulated trees, `tau` if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_cap: Option<f64>,
    #[serde(default = "default_replicates")]
    pub replicates: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default)]
    pub scale: ScaleOptions,
    #[serde(default)]
    pub verify: VerifyOptions,
    #[serde(default)]
    pub plot: PlotOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScaleOptions {
    pub x_max: f64,
    pub h: f64,
}

impl Default for ScaleOptions {
    fn default() -> Self {
        Self { x_max: 10.0, h: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyOptions {
    pub suites: Vec<String>,
    /// Birth rate used for the analytic reference laws; differs from the
    /// simulated one only in negative controls.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_b: Option<f64>,
    /// `horizon - tau` when deciding infinite descendance.
    pub horizon_margin: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            suites: crate::verify::SUITES.iter().map(|s| s.to_string()).collect(),
            reference_b: None,
            horizon_margin: 40.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlotOptions {
    pub bins: usize,
    /// Plot this tree (JSONL) instead of a simulated one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tree_file: Option<PathBuf>,
}

impl Default for PlotOptions {
    fn default() -> Self {
        Self { bins: 30, tree_file: None }
    }
}

fn default_chi() -> Level {
    Level(1.0)
}

fn default_replicates() -> u64 {
    100
}

/// Command-line overrides.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub replicates: Option<u64>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
}

/// A validated configuration with overrides applied.
#[derive(Debug, Clone)]
pub struct Run {
    pub config: ExperimentConfig,
    pub spec: LifespanSpec,
    pub chi: f64,
    pub tau: f64,
    pub cap: f64,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub config_hash: String,
}

impl Run {
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let env_seed = match std::env::var(SEED_ENV) {
            Ok(v) => Some(v.trim().parse::<u64>().map_err(|_| {
                CliError::Config(format!("{SEED_ENV}={v:?} is not an unsigned integer"))
            })?),
            Err(_) => None,
        };
        Self::from_json(&text, overrides, env_seed)
    }

    pub fn from_json(text: &str, overrides: &Overrides, env_seed: Option<u64>) -> Result<Self, CliError> {
        let mut config: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid config: {e}")))?;
        if let Some(r) = overrides.replicates {
            config.replicates = r;
        }
        if let Some(o) = &overrides.out {
            config.out = Some(o.clone());
        }
        if let Some(w) = overrides.workers {
            config.workers = Some(w);
        }
        // flag, then config file, then environment
        let seed = overrides.seed.or(config.seed).or(env_seed);
        config.seed = seed;

        let spec = config
            .measure
            .build()
            .map_err(|e| CliError::Config(format!("invalid measure: {e}")))?;
        let tau = config.tau;
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(CliError::Config(format!("tau must be positive and finite, got {tau}")));
        }
        let cap = config.tau_cap.unwrap_or(tau);
        if !(cap >= tau && cap.is_finite()) {
            return Err(CliError::Config(format!("tau_cap must be finite and at least tau, got {cap}")));
        }
        let chi = config.chi.0;
        if !(chi > 0.0) {
            return Err(CliError::Config(format!("chi must be positive, got {chi}")));
        }
        if config.workers == Some(0) {
            return Err(CliError::Config("workers must be at least 1".into()));
        }
        if config.plot.bins == 0 {
            return Err(CliError::Config("plot.bins must be at least 1".into()));
        }
        if !(config.verify.horizon_margin > 0.0) {
            return Err(CliError::Config("verify.horizon_margin must be positive".into()));
        }
        if let Some(b) = config.verify.reference_b {
            if !(b > 0.0 && b.is_finite()) {
                return Err(CliError::Config(format!("verify.reference_b must be positive, got {b}")));
            }
        }
        for s in &config.verify.suites {
            if !crate::verify::SUITES.contains(&s.as_str()) {
                return Err(CliError::Config(format!(
                    "unknown suite {s:?}; expected one of {}",
                    crate::verify::SUITES.join(", ")
                )));
            }
        }
        let out = config.out.clone().unwrap_or_else(|| PathBuf::from("out"));
        let config_hash = hash(&config);
        Ok(Self {
            spec,
            chi: chi.min(cap),
            tau,
            cap,
            out,
            seed,
            config_hash,
            config,
        })
    }

    pub fn replicates(&self) -> u64 {
        self.config.replicates
    }

    pub fn require_seed(&self) -> Result<u64, CliError> {
        self.seed.ok_or_else(|| {
            CliError::Config(format!(
                "no seed: pass --seed, set \"seed\" in the config or export {SEED_ENV}"
            ))
        })
    }

    /// Header recorded in every output file.
    pub fn header(&self, command: &str) -> String {
        let seed = self.seed.map_or("none".to_string(), |s| s.to_string());
        format!("command={command} config_sha256={} seed={seed}", self.config_hash)
    }

    pub fn pool(&self) -> Result<rayon::ThreadPool, CliError> {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(w) = self.config.workers {
            builder = builder.num_threads(w);
        }
        builder
            .build()
            .map_err(|e| CliError::Config(format!("cannot start workers: {e}")))
    }
}

/// SHA-256 of the configuration as it affects results: seed, output
/// directory and worker count are left out.
fn hash(config: &ExperimentConfig) -> String {
    let mut c = config.clone();
    c.seed = None;
    c.out = None;
    c.workers = None;
    let bytes = serde_json::to_vec(&c).expect("config serializes");
    Sha256::digest(&bytes).iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}
