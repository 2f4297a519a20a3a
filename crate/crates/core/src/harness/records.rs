use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::attack::{AdversarialResult, ResultSummary};
use crate::dsp::AudioClip;
use crate::{Error, Result};

/// Noise condition of a Task-1 pool member.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Clean,
    Gaussian,
    Evolutionary,
    ZerothOrder,
}

impl Condition {
    pub const ALL: [Condition; 4] = [
        Condition::Clean,
        Condition::Gaussian,
        Condition::Evolutionary,
        Condition::ZerothOrder,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Condition::Clean => "clean",
            Condition::Gaussian => "gaussian",
            Condition::Evolutionary => "evolutionary",
            Condition::ZerothOrder => "zeroth_order",
        }
    }

    pub fn is_attack(self) -> bool {
        matches!(self, Condition::Evolutionary | Condition::ZerothOrder)
    }
}

/// Attack outcome as persisted: the summary plus its best-loss trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackRecord {
    #[serde(flatten)]
    pub summary: ResultSummary,
    pub loss_trace: Vec<f64>,
}

impl AttackRecord {
    pub fn new(result: &AdversarialResult, original: &AudioClip) -> Self {
        Self {
            summary: result.summary(original),
            loss_trace: result.loss_trace.clone(),
        }
    }
}

/// BNN detector output for one clip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BnnRecord {
    /// Configured dispersion statistic.
    pub statistic: f64,
    /// Mean per-unit hidden std, kept for distribution plots.
    pub hidden_std: f64,
    pub distance: f64,
    pub flagged: bool,
    /// Distances under the σ-scaled models of the sweep, in sweep order.
    pub sweep: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TdRecord {
    pub score: f64,
    pub flagged: bool,
}

/// One member of the Task-1 mixed pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolRecord {
    pub id: String,
    pub source: String,
    pub condition: Condition,
    pub label: usize,
    /// Deterministic classifier's prediction on the pool clip.
    pub predicted: usize,
    /// Ground truth for detection: a successful attack output.
    pub adversarial: bool,
    pub snr_db: Option<f64>,
    pub attack: Option<AttackRecord>,
    pub bnn: BnnRecord,
    pub td: TdRecord,
    pub wav: Option<String>,
    pub config_hash: String,
}

/// One targeted attack against one defense condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetedRecord {
    pub id: String,
    pub source: String,
    pub family: crate::attack::AttackFamily,
    pub defense: super::DefenseKind,
    pub label: usize,
    pub target: usize,
    /// The defended system output the target and, for detectors, did not flag.
    pub success: bool,
    /// Host model prediction equals the target, ignoring any detector.
    pub fooled: bool,
    /// Detector decision; `None` for preprocessing defenses.
    pub flagged: Option<bool>,
    pub attack: AttackRecord,
    pub wav: Option<String>,
    pub config_hash: String,
}

pub fn write_jsonl<T: Serialize>(path: impl AsRef<Path>, records: &[T]) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.push(b'\n');
    }
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&out).map_err(|e| Error::io(path, e))
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Record {
            line: i + 1,
            detail: e.to_string(),
        })?);
    }
    Ok(out)
}
