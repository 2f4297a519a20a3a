use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::DefenseKind;
use super::metrics::auc;
use super::records::{Condition, PoolRecord, TargetedRecord};
use crate::attack::AttackFamily;
use crate::{Error, Result};

/// JSON schema every emitted report validates against.
pub const REPORT_SCHEMA: &str = include_str!("../../schema/report.schema.json");
pub const REPORT_VERSION: u32 = 1;

/// The classification analogue of word error rate.
pub const ERROR_RATE_NOTE: &str = "error_rate is the classification error in percent; it stands in for word error rate";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionStats {
    pub count: usize,
    pub errors: usize,
    pub error_rate: Option<f64>,
    /// Error rate minus the clean error rate, in points.
    pub degradation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackStats {
    pub attempts: usize,
    pub successes: usize,
    pub success_rate: Option<f64>,
    pub mean_queries: Option<f64>,
    pub max_queries: usize,
    pub mean_snr_db: Option<f64>,
    pub mean_similarity: Option<f64>,
    pub max_linf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionMetrics {
    /// Successful attack outputs.
    pub positives: usize,
    /// Clean and Gaussian-noise clips.
    pub negatives: usize,
    /// Successful attack outputs against clean and Gaussian clips.
    pub auc: Option<f64>,
    /// Every attack output, successful or not, against the same negatives.
    pub auc_all_attacked: Option<f64>,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub false_positive_rate: Option<f64>,
    pub false_negative_rate: Option<f64>,
    pub true_positive_rate: Option<f64>,
    /// Pool members flagged, over the whole mixed pool.
    pub flagged: usize,
    pub retained: usize,
    pub error_rate_unfiltered: Option<f64>,
    pub error_rate_retained: Option<f64>,
    /// Unfiltered minus retained error rate, in points.
    pub error_rate_reduction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub sigma_scale: f64,
    pub auc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task1Metrics {
    pub conditions: BTreeMap<String, ConditionStats>,
    pub attacks: BTreeMap<String, AttackStats>,
    pub detection: BTreeMap<String, DetectionMetrics>,
    /// BNN minus TD, in AUC units.
    pub auc_delta: Option<f64>,
    /// BNN minus TD true-positive rate, in points.
    pub tpr_delta: Option<f64>,
    pub sigma_sweep: Vec<SweepPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UrCell {
    pub attempts: usize,
    pub successes: usize,
    /// Attacks that fooled the host model but were caught by the detector.
    pub caught: usize,
    pub unsuccessful_rate: Option<f64>,
    pub mean_queries: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task2Metrics {
    pub target: usize,
    pub target_label: String,
    /// family → defense → cell.
    pub unsuccessful_rate: BTreeMap<String, BTreeMap<String, UrCell>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub task: String,
    pub config_hash: String,
    pub seed: u64,
    pub error_rate_note: String,
    pub task1: Option<Task1Metrics>,
    pub task2: Option<Task2Metrics>,
    pub wall_clock_secs: f64,
    /// Summed single-worker time spent generating pool members (Task 1 only).
    #[serde(default)]
    pub attack_secs: Option<f64>,
}

/// Run metadata needed to rebuild a report from its records.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportMeta {
    pub config_hash: String,
    pub seed: u64,
    pub sigma_sweep: Vec<f64>,
    pub target: usize,
    pub target_label: String,
}

fn pct(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| 100.0 * num as f64 / den as f64)
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn error_stats(records: &[&PoolRecord]) -> (usize, usize) {
    (records.iter().filter(|r| r.predicted != r.label).count(), records.len())
}

fn detection(
    pool: &[PoolRecord],
    score: impl Fn(&PoolRecord) -> f64,
    flagged: impl Fn(&PoolRecord) -> bool,
) -> DetectionMetrics {
    let negatives: Vec<&PoolRecord> = pool.iter().filter(|r| !r.condition.is_attack()).collect();
    let positives: Vec<&PoolRecord> = pool.iter().filter(|r| r.adversarial).collect();
    let attacked: Vec<&PoolRecord> = pool.iter().filter(|r| r.condition.is_attack()).collect();
    let scores = |v: &[&PoolRecord]| v.iter().map(|r| score(r)).collect::<Vec<f64>>();
    let neg_scores = scores(&negatives);
    let false_positives = negatives.iter().filter(|r| flagged(r)).count();
    let false_negatives = positives.iter().filter(|r| !flagged(r)).count();
    let all: Vec<&PoolRecord> = pool.iter().collect();
    let retained: Vec<&PoolRecord> = pool.iter().filter(|r| !flagged(r)).collect();
    let (e_all, n_all) = error_stats(&all);
    let (e_ret, n_ret) = error_stats(&retained);
    let unfiltered = pct(e_all, n_all);
    let kept = pct(e_ret, n_ret);
    DetectionMetrics {
        positives: positives.len(),
        negatives: negatives.len(),
        auc: auc(&scores(&positives), &neg_scores),
        auc_all_attacked: auc(&scores(&attacked), &neg_scores),
        false_positives,
        false_negatives,
        false_positive_rate: pct(false_positives, negatives.len()),
        false_negative_rate: pct(false_negatives, positives.len()),
        true_positive_rate: pct(positives.len() - false_negatives, positives.len()),
        flagged: pool.len() - retained.len(),
        retained: retained.len(),
        error_rate_unfiltered: unfiltered,
        error_rate_retained: kept,
        error_rate_reduction: unfiltered.zip(kept).map(|(a, b)| a - b),
    }
}

/// Task-1 metrics from the persisted pool records.
pub fn task1_metrics(pool: &[PoolRecord], meta: &ReportMeta) -> Result<Task1Metrics> {
    let by_condition = |c: Condition| pool.iter().filter(move |r| r.condition == c);
    let clean: Vec<&PoolRecord> = by_condition(Condition::Clean).collect();
    let (ce, cn) = error_stats(&clean);
    let clean_rate = pct(ce, cn);
    let mut conditions = BTreeMap::new();
    let mut attacks = BTreeMap::new();
    for c in Condition::ALL {
        let members: Vec<&PoolRecord> = by_condition(c).collect();
        let (errors, count) = error_stats(&members);
        let rate = pct(errors, count);
        conditions.insert(
            c.name().to_string(),
            ConditionStats {
                count,
                errors,
                error_rate: rate,
                degradation: rate.zip(clean_rate).map(|(a, b)| a - b),
            },
        );
        if c.is_attack() {
            let results: Vec<_> = members.iter().filter_map(|r| r.attack.as_ref()).collect();
            if results.len() != members.len() {
                return Err(Error::Record {
                    line: 0,
                    detail: format!("{} record without attack outcome", c.name()),
                });
            }
            let successes = results.iter().filter(|a| a.summary.success).count();
            attacks.insert(
                c.name().to_string(),
                AttackStats {
                    attempts: results.len(),
                    successes,
                    success_rate: pct(successes, results.len()),
                    mean_queries: mean(results.iter().map(|a| a.summary.queries_used as f64)),
                    max_queries: results.iter().map(|a| a.summary.queries_used).max().unwrap_or(0),
                    mean_snr_db: mean(results.iter().filter_map(|a| a.summary.snr_db)),
                    mean_similarity: mean(results.iter().map(|a| a.summary.similarity)),
                    max_linf: results.iter().map(|a| a.summary.linf).fold(0.0, f64::max),
                },
            );
        }
    }
    let bnn = detection(pool, |r| r.bnn.distance, |r| r.bnn.flagged);
    let td = detection(pool, |r| r.td.score, |r| r.td.flagged);
    let auc_delta = bnn.auc.zip(td.auc).map(|(a, b)| a - b);
    let tpr_delta = bnn.true_positive_rate.zip(td.true_positive_rate).map(|(a, b)| a - b);
    let mut sigma_sweep = Vec::with_capacity(meta.sigma_sweep.len());
    for (k, &scale) in meta.sigma_sweep.iter().enumerate() {
        let get = |r: &PoolRecord| {
            r.bnn.sweep.get(k).copied().ok_or_else(|| Error::Record {
                line: 0,
                detail: format!("record {} lacks sweep entry {k}", r.id),
            })
        };
        let pos = pool
            .iter()
            .filter(|r| r.adversarial)
            .map(get)
            .collect::<Result<Vec<_>>>()?;
        let neg = pool
            .iter()
            .filter(|r| !r.condition.is_attack())
            .map(get)
            .collect::<Result<Vec<_>>>()?;
        sigma_sweep.push(SweepPoint {
            sigma_scale: scale,
            auc: auc(&pos, &neg),
        });
    }
    let mut detection_map = BTreeMap::new();
    detection_map.insert("bnn".to_string(), bnn);
    detection_map.insert("td".to_string(), td);
    Ok(Task1Metrics {
        conditions,
        attacks,
        detection: detection_map,
        auc_delta,
        tpr_delta,
        sigma_sweep,
    })
}

/// Task-2 unsuccessful-rate matrix from the persisted targeted records.
pub fn task2_metrics(
    records: &[TargetedRecord],
    families: &[AttackFamily],
    defenses: &[DefenseKind],
    meta: &ReportMeta,
) -> Task2Metrics {
    let mut matrix = BTreeMap::new();
    for &family in families {
        let mut row = BTreeMap::new();
        for &defense in defenses {
            let cell: Vec<&TargetedRecord> = records
                .iter()
                .filter(|r| r.family == family && r.defense == defense)
                .collect();
            let successes = cell.iter().filter(|r| r.success).count();
            row.insert(
                defense.name().to_string(),
                UrCell {
                    attempts: cell.len(),
                    successes,
                    caught: cell.iter().filter(|r| r.fooled && r.flagged == Some(true)).count(),
                    unsuccessful_rate: pct(cell.len() - successes, cell.len()),
                    mean_queries: mean(cell.iter().map(|r| r.attack.summary.queries_used as f64)),
                },
            );
        }
        matrix.insert(family.name().to_string(), row);
    }
    Task2Metrics {
        target: meta.target,
        target_label: meta.target_label.clone(),
        unsuccessful_rate: matrix,
    }
}

impl ExperimentReport {
    pub fn new(task: &str, meta: &ReportMeta) -> Self {
        Self {
            schema_version: REPORT_VERSION,
            task: task.to_string(),
            config_hash: meta.config_hash.clone(),
            seed: meta.seed,
            error_rate_note: ERROR_RATE_NOTE.to_string(),
            task1: None,
            task2: None,
            wall_clock_secs: 0.0,
            attack_secs: None,
        }
    }

    /// Canonical JSON text (pretty, trailing newline).
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// The report with timing fields cleared, for reproducibility comparisons.
    pub fn without_timing(&self) -> Self {
        Self {
            wall_clock_secs: 0.0,
            attack_secs: None,
            ..self.clone()
        }
    }

    /// Checks the schema and the internal rate bounds.
    pub fn validate(&self) -> Result<()> {
        let schema: serde_json::Value = serde_json::from_str(REPORT_SCHEMA)?;
        let validator = jsonschema::validator_for(&schema).map_err(|e| Error::Schema(e.to_string()))?;
        let instance = serde_json::to_value(self)?;
        let errors: Vec<String> = validator
            .iter_errors(&instance)
            .map(|e| format!("{} at {}", e, e.instance_path))
            .collect();
        if !errors.is_empty() {
            return Err(Error::Schema(errors.join("; ")));
        }
        if let Some(t1) = &self.task1 {
            for d in t1.detection.values() {
                let consistent = d.false_positive_rate == pct(d.false_positives, d.negatives)
                    && d.false_negative_rate == pct(d.false_negatives, d.positives);
                if !consistent {
                    return Err(Error::Schema("FP/FN rates disagree with their counts".into()));
                }
            }
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        self.validate()?;
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

/// Error-rate table: `condition,count,errors,error_rate,degradation`.
pub fn error_rate_csv(t1: &Task1Metrics) -> String {
    let mut out = String::from("condition,count,errors,error_rate,degradation\n");
    for c in Condition::ALL {
        if let Some(s) = t1.conditions.get(c.name()) {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                c.name(),
                s.count,
                s.errors,
                opt(s.error_rate),
                opt(s.degradation)
            ));
        }
    }
    out
}

/// Detection summary, one row per detector.
pub fn detection_csv(t1: &Task1Metrics) -> String {
    let mut out = String::from(
        "detector,auc,auc_all_attacked,fp_rate,fn_rate,tpr,error_rate_unfiltered,error_rate_retained,error_rate_reduction\n",
    );
    for (name, d) in &t1.detection {
        out.push_str(&format!(
            "{name},{},{},{},{},{},{},{},{}\n",
            opt(d.auc),
            opt(d.auc_all_attacked),
            opt(d.false_positive_rate),
            opt(d.false_negative_rate),
            opt(d.true_positive_rate),
            opt(d.error_rate_unfiltered),
            opt(d.error_rate_retained),
            opt(d.error_rate_reduction)
        ));
    }
    out
}

pub fn sweep_csv(t1: &Task1Metrics) -> String {
    let mut out = String::from("sigma_scale,auc\n");
    for p in &t1.sigma_sweep {
        out.push_str(&format!("{},{}\n", p.sigma_scale, opt(p.auc)));
    }
    out
}

/// Per-clip dispersion table.
pub fn dispersion_csv(pool: &[PoolRecord]) -> String {
    let mut out = String::from("clip_id,group,hidden_std,statistic,distance\n");
    for r in pool {
        let group = if r.condition.is_attack() && !r.adversarial {
            format!("{}_failed", r.condition.name())
        } else {
            r.condition.name().to_string()
        };
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.id, group, r.bnn.hidden_std, r.bnn.statistic, r.bnn.distance
        ));
    }
    out
}

/// Unsuccessful-rate matrix: one row per family, one column per defense.
pub fn ur_csv(t2: &Task2Metrics) -> String {
    let defenses: Vec<DefenseKind> = DefenseKind::ALL
        .into_iter()
        .filter(|d| t2.unsuccessful_rate.values().any(|row| row.contains_key(d.name())))
        .collect();
    let mut out = String::from("family");
    for d in &defenses {
        out.push(',');
        out.push_str(d.name());
    }
    out.push('\n');
    for (family, row) in &t2.unsuccessful_rate {
        out.push_str(family);
        for d in &defenses {
            out.push(',');
            out.push_str(&opt(row.get(d.name()).and_then(|c| c.unsuccessful_rate)));
        }
        out.push('\n');
    }
    out
}
