use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::attack::{AttackConfig, AttackFamily};
use crate::bayes::BnnTrainConfig;
use crate::dataset::TARGET_LABEL;
use crate::detect::DetectorConfig;
use crate::dsp::SmoothKind;
use crate::nn::{ModelConfig, TrainConfig};
use crate::{Error, Result};

/// JSON schema the configuration is validated against.
pub const CONFIG_SCHEMA: &str = include_str!("../../schema/config.schema.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    pub seed: u64,
    pub per_class: usize,
    /// Defaults to `<output_dir>/corpus`.
    pub dir: Option<PathBuf>,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            per_class: 100,
            dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    /// Seed of the parameter initialisation.
    pub init_seed: u64,
    pub architecture: ModelConfig,
    pub train: TrainConfig,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            init_seed: 7,
            architecture: ModelConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationConfig {
    /// Clean train-split clips forming the reference distribution.
    pub reference_clips: usize,
    /// Dev clips in the labelled threshold pool (clean, Gaussian and attacked).
    pub pool_clips: usize,
    /// Dev clips attacked per family for the threshold pool.
    pub attacked_clips: usize,
    /// Budget of the calibration attacks.
    pub attack_budget: usize,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            reference_clips: 100,
            pool_clips: 50,
            attacked_clips: 20,
            attack_budget: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DefenseConfig {
    pub ls_window: usize,
    pub ls_kind: SmoothKind,
    pub td_segments: usize,
}

impl Default for DefenseConfig {
    fn default() -> Self {
        Self {
            ls_window: 5,
            ls_kind: SmoothKind::Median,
            td_segments: crate::detect::TD_SEGMENTS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Task1Config {
    /// Eval clips per noise family in the mixed pool.
    pub pool_per_family: usize,
    pub gaussian_snr_db: f64,
    /// σ multipliers for the randomness-control sweep.
    pub sigma_sweep: Vec<f64>,
}

impl Default for Task1Config {
    fn default() -> Self {
        Self {
            pool_per_family: 100,
            gaussian_snr_db: 10.0,
            sigma_sweep: vec![1.0, 0.5, 0.25, 0.1, 0.0],
        }
    }
}

/// Defense conditions evaluated in the targeted task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DefenseKind {
    None,
    Ls,
    Ds,
    Td,
    Bnn,
}

impl DefenseKind {
    pub const ALL: [DefenseKind; 5] = [
        DefenseKind::None,
        DefenseKind::Ls,
        DefenseKind::Ds,
        DefenseKind::Td,
        DefenseKind::Bnn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DefenseKind::None => "none",
            DefenseKind::Ls => "ls",
            DefenseKind::Ds => "ds",
            DefenseKind::Td => "td",
            DefenseKind::Bnn => "bnn",
        }
    }
}

/// Per-family ℓ∞ bounds of the targeted attacks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FamilyBounds {
    pub evolutionary: f64,
    pub zeroth_order: f64,
}

impl Default for FamilyBounds {
    fn default() -> Self {
        Self {
            evolutionary: 0.01,
            zeroth_order: 0.02,
        }
    }
}

impl FamilyBounds {
    pub fn get(&self, family: AttackFamily) -> f64 {
        match family {
            AttackFamily::Evolutionary => self.evolutionary,
            AttackFamily::ZerothOrder => self.zeroth_order,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Task2Config {
    /// Eval clips (not already of the target class) attacked per cell.
    pub clips: usize,
    pub target: String,
    /// Replaces `attack.delta_max` for the targeted runs.
    pub delta_max: FamilyBounds,
    pub defenses: Vec<DefenseKind>,
}

impl Default for Task2Config {
    fn default() -> Self {
        Self {
            clips: 30,
            target: TARGET_LABEL.to_string(),
            delta_max: FamilyBounds::default(),
            defenses: DefenseKind::ALL.to_vec(),
        }
    }
}

/// Everything a task run depends on. Every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Seed for attacks, noise and detector passes.
    pub seed: u64,
    pub output_dir: PathBuf,
    pub corpus: CorpusConfig,
    pub model: ModelSection,
    pub bnn: BnnTrainConfig,
    pub detector: DetectorConfig,
    pub calibration: CalibrationConfig,
    pub attack: AttackConfig,
    pub defense: DefenseConfig,
    pub task1: Task1Config,
    pub task2: Task2Config,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            output_dir: PathBuf::from("runs/default"),
            corpus: CorpusConfig::default(),
            model: ModelSection::default(),
            bnn: BnnTrainConfig::default(),
            detector: DetectorConfig::default(),
            calibration: CalibrationConfig::default(),
            attack: AttackConfig::default(),
            defense: DefenseConfig::default(),
            task1: Task1Config::default(),
            task2: Task2Config::default(),
        }
    }
}

fn schema_check(instance: &serde_json::Value) -> Result<()> {
    let schema: serde_json::Value = serde_json::from_str(CONFIG_SCHEMA)?;
    let validator = jsonschema::validator_for(&schema).map_err(|e| Error::Schema(e.to_string()))?;
    let errors: Vec<String> = validator
        .iter_errors(instance)
        .map(|e| format!("{} at {}", e, e.instance_path))
        .collect();
    if errors.is_empty() {
        Ok(())
    } else {
        Err(Error::Schema(errors.join("; ")))
    }
}

impl ExperimentConfig {
    /// Parses TOML text, checking it against the committed schema first.
    pub fn from_toml(text: &str) -> Result<Self> {
        let value: toml::Value = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let json = serde_json::to_value(&value)?;
        schema_check(&json)?;
        let config: Self = value
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.attack.validate()?;
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        let seeds = [
            self.seed,
            self.corpus.seed,
            self.model.init_seed,
            self.model.train.seed,
            self.bnn.seed,
            self.detector.seed,
            self.attack.seed,
        ];
        if seeds.iter().any(|s| *s > i64::MAX as u64) {
            return bad("seeds must fit in a signed 64-bit TOML integer");
        }
        if self.detector.passes < 2 {
            return bad("detector.passes must be at least 2");
        }
        if self.defense.ls_window.is_multiple_of(2) {
            return bad("defense.ls_window must be odd");
        }
        if self.defense.td_segments < 2 {
            return bad("defense.td_segments must be at least 2");
        }
        if self.calibration.reference_clips == 0 {
            return bad("calibration.reference_clips must be positive");
        }
        if crate::dataset::CommandVocab.index(&self.task2.target).is_none() {
            return bad("task2.target is not a vocabulary label");
        }
        if self.task1.sigma_sweep.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
            return bad("task1.sigma_sweep entries must be finite and non-negative");
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form; stamps every artifact.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(bytes))
    }

    pub fn corpus_dir(&self) -> PathBuf {
        self.corpus
            .dir
            .clone()
            .unwrap_or_else(|| self.output_dir.join("corpus"))
    }

    pub fn target_index(&self) -> usize {
        crate::dataset::CommandVocab
            .index(&self.task2.target)
            .expect("validated target")
    }
}
