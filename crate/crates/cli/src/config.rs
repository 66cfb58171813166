//! Pipeline configuration file.
//!
//! Relative paths are resolved against the directory holding the config
//! file. Every section has defaults, so `{}` plus a data source is a valid
//! config. Unknown fields are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tsp_core::data::InteractionFormat;
use tsp_core::io::{file_hash, json_hash};
use tsp_core::propagation::{LiftingMode, TspConfig};
use tsp_core::spectral::EnergyConfig;
use tsp_core::{TrainConfig, TspError};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub users: usize,
    pub items: usize,
    pub interactions_per_user: usize,
    pub popularity_exponent: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            users: 200,
            items: 100,
            interactions_per_user: 15,
            popularity_exponent: 1.2,
            seed: 7,
        }
    }
}

/// Exactly one of `path` and `synthetic` must be set.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub path: Option<PathBuf>,
    /// Inferred from the extension when absent.
    pub format: Option<InteractionFormat>,
    pub synthetic: Option<SyntheticSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub train_frac: f64,
    pub valid_frac: f64,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            train_frac: 0.8,
            valid_frac: 0.1,
            seed: 2024,
        }
    }
}

/// Data-driven choices made before propagation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuningConfig {
    /// Pick `θ` so the semantic graph keeps this many edges instead of using
    /// `tsp.theta`.
    pub theta_edges: Option<usize>,
    /// Fractions of the largest stable `β` tried on validation. Empty means
    /// `tsp.beta` is used as given.
    pub beta_fractions: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub k: usize,
    pub tail_fraction: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { k: 20, tail_fraction: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub data: DataConfig,
    pub split: SplitConfig,
    pub train: TrainConfig,
    pub diagnose: EnergyConfig,
    pub tsp: TspConfig,
    pub tuning: TuningConfig,
    pub eval: EvalConfig,
    pub output: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            data: DataConfig::default(),
            split: SplitConfig::default(),
            train: TrainConfig::default(),
            diagnose: EnergyConfig::default(),
            tsp: TspConfig::default(),
            tuning: TuningConfig::default(),
            eval: EvalConfig::default(),
            output: PathBuf::from("tsp_output"),
        }
    }
}

/// Command-line values that win over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    pub k: Option<usize>,
    pub tail_fraction: Option<f64>,
    pub mode: Option<LiftingMode>,
}

/// Pipeline stages in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Split,
    Train,
    Diagnose,
    Lift,
    Propagate,
    Evaluate,
}

impl Stage {
    pub fn command(self) -> &'static str {
        match self {
            Stage::Split => "split",
            Stage::Train => "train",
            Stage::Diagnose => "diagnose",
            Stage::Lift => "lift",
            Stage::Propagate => "propagate",
            Stage::Evaluate => "evaluate",
        }
    }
}

fn field(field: &str, message: impl Into<String>) -> CliError {
    CliError::Field {
        field: field.into(),
        message: message.into(),
    }
}

fn section(name: &str, result: tsp_core::Result<()>) -> CliResult<()> {
    match result {
        Err(TspError::Config(msg)) => Err(field(name, msg)),
        other => Ok(other?),
    }
}

impl PipelineConfig {
    /// Reads a config file and resolves its relative paths.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| TspError::io(format!("reading config {}", path.display()), e))?;
        let mut cfg: PipelineConfig = serde_json::from_str(&text).map_err(|e| CliError::Field {
            field: path.display().to_string(),
            message: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        if let Some(p) = &self.data.path {
            if p.is_relative() {
                self.data.path = Some(base.join(p));
            }
        }
        if self.output.is_relative() {
            self.output = base.join(&self.output);
        }
    }

    /// `--seed` reseeds the split and the backbone; the synthetic generator
    /// keeps its own seed so the dataset stays fixed.
    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.split.seed = seed;
            self.train.seed = seed;
        }
        if let Some(out) = &o.output {
            self.output = out.clone();
        }
        if let Some(k) = o.k {
            self.eval.k = k;
        }
        if let Some(f) = o.tail_fraction {
            self.eval.tail_fraction = f;
        }
        if let Some(m) = o.mode {
            self.tsp.lifting_mode = m;
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        match (&self.data.path, &self.data.synthetic) {
            (Some(_), Some(_)) => return Err(field("data", "set either path or synthetic, not both")),
            (None, None) => return Err(field("data", "a dataset path or a synthetic spec is required")),
            (Some(p), None) if !p.is_file() => {
                return Err(field("data.path", format!("{} does not exist", p.display())))
            }
            (None, Some(s)) => {
                if s.users == 0 || s.items == 0 || s.interactions_per_user == 0 {
                    return Err(field("data.synthetic", "users, items and interactions_per_user must be positive"));
                }
                if s.interactions_per_user > s.items {
                    return Err(field("data.synthetic.interactions_per_user", "must not exceed items"));
                }
                if !(s.popularity_exponent >= 0.0 && s.popularity_exponent.is_finite()) {
                    return Err(field("data.synthetic.popularity_exponent", "must be finite and >= 0"));
                }
            }
            _ => {}
        }
        let s = &self.split;
        if !(s.train_frac > 0.0 && s.train_frac < 1.0) {
            return Err(field("split.train_frac", format!("must lie in (0, 1), got {}", s.train_frac)));
        }
        if !(s.valid_frac > 0.0 && s.valid_frac < 1.0) {
            return Err(field("split.valid_frac", format!("must lie in (0, 1), got {}", s.valid_frac)));
        }
        if s.train_frac + s.valid_frac >= 1.0 {
            return Err(field("split", "train_frac + valid_frac must be < 1 to leave a test split"));
        }
        section("train", self.train.validate())?;
        section("diagnose", self.diagnose.validate())?;
        section("tsp", self.tsp.validate())?;
        if self.tuning.theta_edges == Some(0) {
            return Err(field("tuning.theta_edges", "must be at least 1"));
        }
        if let Some(f) = self.tuning.beta_fractions.iter().find(|&&f| !(f > 0.0 && f < 1.0)) {
            return Err(field("tuning.beta_fractions", format!("entries must lie in (0, 1), got {f}")));
        }
        if self.eval.k == 0 {
            return Err(field("eval.k", "must be at least 1"));
        }
        if !(self.eval.tail_fraction > 0.0 && self.eval.tail_fraction <= 1.0) {
            return Err(field(
                "eval.tail_fraction",
                format!("must lie in (0, 1], got {}", self.eval.tail_fraction),
            ));
        }
        Ok(())
    }

    /// Hash of everything a stage's outputs depend on, chained through its
    /// upstream stages. The dataset enters through its file contents, not
    /// its path.
    pub fn stage_hash(&self, stage: Stage) -> CliResult<String> {
        let h = match stage {
            Stage::Split => {
                let source = match &self.data.path {
                    Some(p) => serde_json::json!({ "file_sha256": file_hash(p)?, "format": self.data.format }),
                    None => serde_json::json!({ "synthetic": self.data.synthetic }),
                };
                json_hash(&("split", source, &self.split))?
            }
            Stage::Train => json_hash(&("train", self.stage_hash(Stage::Split)?, &self.train))?,
            Stage::Diagnose => json_hash(&("diagnose", self.stage_hash(Stage::Train)?, &self.diagnose))?,
            Stage::Lift => json_hash(&(
                "lift",
                self.stage_hash(Stage::Train)?,
                &self.tsp.semantic(),
                self.tsp.max_order,
                self.tsp.simplex_budget,
                self.tuning.theta_edges,
            ))?,
            Stage::Propagate => json_hash(&(
                "propagate",
                self.stage_hash(Stage::Lift)?,
                &self.tsp,
                &self.tuning,
                &self.eval,
            ))?,
            Stage::Evaluate => json_hash(&("evaluate", self.stage_hash(Stage::Propagate)?, &self.eval))?,
        };
        Ok(h)
    }

    pub fn interaction_format(&self) -> Option<InteractionFormat> {
        let path = self.data.path.as_ref()?;
        Some(self.data.format.unwrap_or_else(|| InteractionFormat::from_path(path)))
    }
}
