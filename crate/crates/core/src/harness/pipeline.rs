use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{DefenseKind, ExperimentConfig};
use super::metrics::{auc, youden_threshold};
use super::pool::with_workers;
use super::records::{
    read_jsonl, write_jsonl, AttackRecord, BnnRecord, Condition, PoolRecord, TargetedRecord, TdRecord,
};
use super::report::{
    detection_csv, dispersion_csv, error_rate_csv, sweep_csv, task1_metrics, task2_metrics, ur_csv, ExperimentReport,
    ReportMeta,
};
use crate::attack::{gaussian_baseline, run_attack, AttackConfig, AttackFamily, AttackMode, BlackBox, QueryOracle};
use crate::bayes::{load_bnn, save_bnn, train_bnn, BnnClassifier};
use crate::dataset::{ensure_corpus, CommandVocab, Manifest, Split};
use crate::detect::{
    calibrate, defense_wrap, score_prediction, td_detector, CalibrationReference, Defense, GuardedBnn, GuardedTd,
};
use crate::dsp::{save_wav, AudioClip};
use crate::nn::{argmax, checkpoint, train, write_curve_csv, ClassifierModel};
use crate::{seed, Error, Result};

const FAMILIES: [AttackFamily; 2] = [AttackFamily::Evolutionary, AttackFamily::ZerothOrder];

/// Trained models and detector calibration shared by both tasks.
pub struct Artifacts {
    pub manifest: Manifest,
    pub model: ClassifierModel,
    pub bnn: BnnClassifier,
    pub reference: CalibrationReference,
    pub calibration: CalibrationSummary,
}

/// Threshold-selection outcome on the dev pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSummary {
    pub stage_hash: String,
    pub bnn_threshold: f64,
    pub td_threshold: f64,
    pub positives: usize,
    pub negatives: usize,
    pub bnn_auc: Option<f64>,
    pub td_auc: Option<f64>,
}

fn stage_hash(parts: &[serde_json::Value]) -> String {
    let bytes = serde_json::to_vec(parts).expect("json values serialize");
    hex::encode(Sha256::digest(bytes))
}

fn stamp_matches(path: &Path, hash: &str) -> bool {
    path.is_file() && fs::read_to_string(stamp_path(path)).is_ok_and(|s| s.trim() == hash)
}

fn stamp_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".stamp");
    PathBuf::from(s)
}

fn write_stamp(path: &Path, hash: &str) -> Result<()> {
    let p = stamp_path(path);
    fs::write(&p, format!("{hash}\n")).map_err(|e| Error::io(&p, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn json<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("config sections serialize")
}

/// `k` indices spread evenly over `0..n` (all of them when `k >= n`).
pub fn spread(n: usize, k: usize) -> Vec<usize> {
    if k >= n {
        return (0..n).collect();
    }
    (0..k).map(|i| i * n / k).collect()
}

fn stem(clip_id: &str) -> String {
    clip_id.trim_end_matches(".wav").replace('/', "_")
}

pub fn load_or_train_model(config: &ExperimentConfig, manifest: &Manifest) -> Result<ClassifierModel> {
    let path = config.output_dir.join("model.ckpt");
    let hash = stage_hash(&[json(&config.corpus), json(&config.model)]);
    if stamp_matches(&path, &hash) {
        return checkpoint::load_classifier(&path);
    }
    let init = ClassifierModel::new(&config.model.architecture, config.model.init_seed);
    let (model, curve) = train(init, manifest, &config.model.train)?;
    checkpoint::save_classifier(&model, &path)?;
    write_curve_csv(config.output_dir.join("train_curve.csv"), &curve)?;
    write_stamp(&path, &hash)?;
    Ok(model)
}

pub fn load_or_train_bnn(
    config: &ExperimentConfig,
    manifest: &Manifest,
    model: &ClassifierModel,
) -> Result<BnnClassifier> {
    let path = config.output_dir.join("bnn.ckpt");
    let hash = stage_hash(&[json(&config.corpus), json(&config.model), json(&config.bnn)]);
    if stamp_matches(&path, &hash) {
        return load_bnn(&path);
    }
    let warm = BnnClassifier::from_classifier(model, config.bnn.init_sigma, config.bnn.prior_sigma)?;
    let train_set = manifest.load_split(Split::Train)?;
    let dev_set = manifest.load_split(Split::Dev)?;
    let (bnn, curve) = train_bnn(warm, &train_set, &dev_set, &config.bnn)?;
    save_bnn(&bnn, &path)?;
    write_curve_csv(config.output_dir.join("bnn_curve.csv"), &curve)?;
    write_stamp(&path, &hash)?;
    Ok(bnn)
}

fn untargeted(config: &ExperimentConfig, budget: usize, seed_value: u64) -> AttackConfig {
    AttackConfig {
        budget,
        mode: AttackMode::Untargeted,
        seed: seed_value,
        ..config.attack.clone()
    }
}

fn attack_clip(
    family: AttackFamily,
    oracle_model: &dyn BlackBox,
    clip: &AudioClip,
    label: usize,
    config: &AttackConfig,
) -> Result<crate::attack::AdversarialResult> {
    let mut oracle = QueryOracle::new(oracle_model, config.budget);
    run_attack(family, &mut oracle, clip, label, config)
}

/// Builds the clean reference and picks both detector thresholds on a
/// labelled dev pool: clean and Gaussian clips against successful attacks.
pub fn load_or_calibrate(
    config: &ExperimentConfig,
    manifest: &Manifest,
    model: &ClassifierModel,
    bnn: &BnnClassifier,
) -> Result<(CalibrationReference, CalibrationSummary)> {
    let ref_path = config.output_dir.join("reference.bin");
    let summary_path = config.output_dir.join("calibration.json");
    let hash = stage_hash(&[
        json(&config.corpus),
        json(&config.model),
        json(&config.bnn),
        json(&config.detector),
        json(&config.calibration),
        json(&config.attack),
        json(&config.defense),
        json(&config.seed),
        json(&config.task1.gaussian_snr_db),
    ]);
    if stamp_matches(&ref_path, &hash) && summary_path.is_file() {
        let reference = CalibrationReference::load(&ref_path)?;
        let text = fs::read_to_string(&summary_path).map_err(|e| Error::io(&summary_path, e))?;
        let summary: CalibrationSummary = serde_json::from_str(&text)?;
        if reference.config_hash == hash && summary.stage_hash == hash {
            return Ok((reference, summary));
        }
    }
    let cal = &config.calibration;
    let train_set = manifest.load_split(Split::Train)?;
    let clean: Vec<AudioClip> = spread(train_set.len(), cal.reference_clips)
        .into_iter()
        .map(|i| train_set[i].0.clone())
        .collect();
    let dev = manifest.load_split(Split::Dev)?;
    let mut pool: Vec<(AudioClip, bool)> = Vec::new();
    for i in spread(dev.len(), cal.pool_clips) {
        let (clip, _) = &dev[i];
        let noise_seed = seed::derive(config.seed, &[seed::tag("calibration-gaussian"), i as u64]);
        pool.push((clip.clone(), false));
        pool.push((
            gaussian_baseline(clip, config.task1.gaussian_snr_db, noise_seed)?,
            false,
        ));
    }
    let attacked_idx = spread(dev.len(), cal.attacked_clips);
    let jobs: Vec<(usize, AttackFamily)> = FAMILIES
        .iter()
        .flat_map(|&f| attacked_idx.iter().map(move |&i| (i, f)))
        .collect();
    let attacked = with_workers(|| {
        jobs.par_iter()
            .map(|&(i, family)| {
                let (clip, label) = &dev[i];
                let s = seed::derive(
                    config.seed,
                    &[seed::tag("calibration"), seed::tag(family.name()), i as u64],
                );
                attack_clip(family, model, clip, *label, &untargeted(config, cal.attack_budget, s))
            })
            .collect::<Result<Vec<_>>>()
    })??;
    pool.extend(attacked.into_iter().filter(|r| r.success).map(|r| (r.clip, true)));

    let mut reference = calibrate(bnn, &clean, &pool, &config.detector, &hash)?;
    reference.config_hash = hash.clone();
    let td_scores = with_workers(|| {
        pool.par_iter()
            .map(|(clip, _)| td_detector(model, clip, config.defense.td_segments))
            .collect::<Result<Vec<f64>>>()
    })??;
    let bnn_scores = with_workers(|| {
        pool.par_iter()
            .map(|(clip, _)| {
                let p = bnn.mc_predict(clip, reference.config.passes, reference.config.seed)?;
                Ok(score_prediction(&reference, &p)?.1)
            })
            .collect::<Result<Vec<f64>>>()
    })??;
    let split = |scores: &[f64]| {
        let pos: Vec<f64> = scores.iter().zip(&pool).filter(|(_, p)| p.1).map(|(s, _)| *s).collect();
        let neg: Vec<f64> = scores
            .iter()
            .zip(&pool)
            .filter(|(_, p)| !p.1)
            .map(|(s, _)| *s)
            .collect();
        (pos, neg)
    };
    let (tp, tn) = split(&td_scores);
    let (bp, bn) = split(&bnn_scores);
    let summary = CalibrationSummary {
        stage_hash: hash.clone(),
        bnn_threshold: reference.threshold,
        td_threshold: youden_threshold(&tp, &tn),
        positives: tp.len(),
        negatives: tn.len(),
        bnn_auc: auc(&bp, &bn),
        td_auc: auc(&tp, &tn),
    };
    reference.save(&ref_path)?;
    let text = serde_json::to_string_pretty(&summary)? + "\n";
    fs::write(&summary_path, text).map_err(|e| Error::io(&summary_path, e))?;
    write_stamp(&ref_path, &hash)?;
    Ok((reference, summary))
}

/// Corpus, classifier, BNN and detector calibration, each reused when its
/// stamp matches the configuration.
pub fn prepare(config: &ExperimentConfig) -> Result<Artifacts> {
    config.validate()?;
    create_dir(&config.output_dir)?;
    let manifest = ensure_corpus(config.corpus.seed, config.corpus.per_class, config.corpus_dir())?;
    let model = load_or_train_model(config, &manifest)?;
    let bnn = load_or_train_bnn(config, &manifest, &model)?;
    let (reference, calibration) = load_or_calibrate(config, &manifest, &model, &bnn)?;
    Ok(Artifacts {
        manifest,
        model,
        bnn,
        reference,
        calibration,
    })
}

fn meta(config: &ExperimentConfig) -> ReportMeta {
    ReportMeta {
        config_hash: config.hash(),
        seed: config.seed,
        sigma_sweep: config.task1.sigma_sweep.clone(),
        target: config.target_index(),
        target_label: config.task2.target.clone(),
    }
}

fn task_dir(config: &ExperimentConfig, task: &str) -> Result<PathBuf> {
    let dir = config.output_dir.join(task);
    create_dir(&dir.join("audio"))?;
    fs::write(dir.join("config.toml"), config.to_toml()?).map_err(|e| Error::io(dir.join("config.toml"), e))?;
    Ok(dir)
}

fn write_text(path: PathBuf, text: String) -> Result<()> {
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

fn save_audio(dir: &Path, rel: String, clip: &AudioClip) -> Result<Option<String>> {
    let path = dir.join(&rel);
    if let Some(parent) = path.parent() {
        create_dir(parent)?;
    }
    save_wav(clip, &path)?;
    Ok(Some(rel))
}

/// Rebuilds the Task-1 report from persisted records.
pub fn task1_report(pool: &[PoolRecord], config: &ExperimentConfig) -> Result<ExperimentReport> {
    let m = meta(config);
    let mut report = ExperimentReport::new("task1", &m);
    report.task1 = Some(task1_metrics(pool, &m)?);
    Ok(report)
}

/// Rebuilds the Task-2 report from persisted records.
pub fn task2_report(records: &[TargetedRecord], config: &ExperimentConfig) -> Result<ExperimentReport> {
    let m = meta(config);
    let mut report = ExperimentReport::new("task2", &m);
    report.task2 = Some(task2_metrics(records, &FAMILIES, &config.task2.defenses, &m));
    Ok(report)
}

fn write_task1_outputs(dir: &Path, report: &ExperimentReport, pool: &[PoolRecord]) -> Result<()> {
    report.save(dir.join("report.json"))?;
    let t1 = report.task1.as_ref().expect("task1 report");
    write_text(dir.join("error_rates.csv"), error_rate_csv(t1))?;
    write_text(dir.join("detection.csv"), detection_csv(t1))?;
    write_text(dir.join("sigma_sweep.csv"), sweep_csv(t1))?;
    write_text(dir.join("dispersion.csv"), dispersion_csv(pool))
}

/// Untargeted evaluation: error rates of clean, Gaussian and attacked clips
/// plus BNN and TD detection on the mixed pool.
pub fn run_task1(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    let art = prepare(config)?;
    let dir = task_dir(config, "task1")?;
    let hash = config.hash();
    let eval = art.manifest.load_split(Split::Eval)?;
    let sources = spread(eval.len(), config.task1.pool_per_family);

    let sweep_clean: Vec<AudioClip> = {
        let train_set = art.manifest.load_split(Split::Train)?;
        spread(train_set.len(), config.calibration.reference_clips)
            .into_iter()
            .map(|i| train_set[i].0.clone())
            .collect()
    };
    let sweep: Vec<(BnnClassifier, CalibrationReference)> = config
        .task1
        .sigma_sweep
        .iter()
        .map(|&s| {
            let scaled = art.bnn.with_sigma_scale(s);
            let reference = calibrate(&scaled, &sweep_clean, &[], &config.detector, &hash)?;
            Ok((scaled, reference))
        })
        .collect::<Result<_>>()?;

    let jobs: Vec<(usize, Condition)> = sources
        .iter()
        .flat_map(|&i| Condition::ALL.into_iter().map(move |c| (i, c)))
        .collect();
    let td_threshold = art.calibration.td_threshold;
    let timed = with_workers(|| {
        jobs.par_iter()
            .map(|&(i, condition)| {
                let (clip, label) = &eval[i];
                let label = *label;
                let job_seed = seed::derive(
                    config.seed,
                    &[seed::tag("task1"), seed::tag(condition.name()), i as u64],
                );
                let attack_start = Instant::now();
                let (member, attack) = match condition {
                    Condition::Clean => (clip.clone(), None),
                    Condition::Gaussian => (gaussian_baseline(clip, config.task1.gaussian_snr_db, job_seed)?, None),
                    Condition::Evolutionary | Condition::ZerothOrder => {
                        let family = if condition == Condition::Evolutionary {
                            AttackFamily::Evolutionary
                        } else {
                            AttackFamily::ZerothOrder
                        };
                        let cfg = untargeted(config, config.attack.budget, job_seed);
                        let r = attack_clip(family, &art.model, clip, label, &cfg)?;
                        (r.clip.clone(), Some(r))
                    }
                };
                let attack_secs = attack_start.elapsed().as_secs_f64();
                let id = format!("{}/{}", condition.name(), stem(clip.id()));
                let wav = match condition {
                    Condition::Clean => None,
                    _ => save_audio(&dir, format!("audio/{id}.wav"), &member)?,
                };
                let predicted = art.model.predict(&member)?;
                let det = &art.reference.config;
                let prediction = art.bnn.mc_predict(&member, det.passes, det.seed)?;
                let (statistic, distance) = score_prediction(&art.reference, &prediction)?;
                let hidden = prediction.hidden_std();
                let sweep_distances = sweep
                    .iter()
                    .map(|(m, r)| {
                        let p = m.mc_predict(&member, det.passes, det.seed)?;
                        Ok(score_prediction(r, &p)?.1)
                    })
                    .collect::<Result<Vec<f64>>>()?;
                let td_score = td_detector(&art.model, &member, config.defense.td_segments)?;
                let record = PoolRecord {
                    id,
                    source: clip.id().to_string(),
                    condition,
                    label,
                    predicted,
                    adversarial: attack.as_ref().is_some_and(|r| r.success),
                    snr_db: crate::attack::AdversarialResult::perturbation_snr(clip, &member),
                    attack: attack.as_ref().map(|r| AttackRecord::new(r, clip)),
                    bnn: BnnRecord {
                        statistic,
                        hidden_std: hidden.iter().sum::<f64>() / hidden.len().max(1) as f64,
                        distance,
                        flagged: distance > art.reference.threshold,
                        sweep: sweep_distances,
                    },
                    td: TdRecord {
                        score: td_score,
                        flagged: td_score > td_threshold,
                    },
                    wav,
                    config_hash: hash.clone(),
                };
                Ok((record, attack_secs))
            })
            .collect::<Result<Vec<(PoolRecord, f64)>>>()
    })??;
    let attack_secs = timed.iter().map(|(_, t)| t).sum();
    let mut pool: Vec<PoolRecord> = timed.into_iter().map(|(r, _)| r).collect();
    pool.sort_by(|a, b| a.id.cmp(&b.id));
    write_jsonl(dir.join("records.jsonl"), &pool)?;
    let mut report = task1_report(&pool, config)?;
    report.wall_clock_secs = start.elapsed().as_secs_f64();
    report.attack_secs = Some(attack_secs);
    write_task1_outputs(&dir, &report, &pool)?;
    Ok(report)
}

fn defense_oracle<'a>(kind: DefenseKind, config: &ExperimentConfig, art: &'a Artifacts) -> Box<dyn BlackBox + 'a> {
    let model = &art.model;
    match kind {
        DefenseKind::None => Box::new(model),
        DefenseKind::Ls => Box::new(defense_wrap(
            model,
            Defense::LocalSmoothing {
                window: config.defense.ls_window,
                smoothing: config.defense.ls_kind,
            },
        )),
        DefenseKind::Ds => Box::new(defense_wrap(model, Defense::Downsampling)),
        DefenseKind::Td => Box::new(GuardedTd {
            model,
            segments: config.defense.td_segments,
            threshold: art.calibration.td_threshold,
        }),
        DefenseKind::Bnn => Box::new(GuardedBnn {
            model: &art.bnn,
            reference: &art.reference,
        }),
    }
}

/// Host-model fooling and detector decision for a finished attack.
fn outcome(
    kind: DefenseKind,
    config: &ExperimentConfig,
    art: &Artifacts,
    clip: &AudioClip,
    target: usize,
) -> Result<(bool, Option<bool>)> {
    Ok(match kind {
        DefenseKind::None | DefenseKind::Ls | DefenseKind::Ds => {
            let oracle = defense_oracle(kind, config, art);
            (argmax(&oracle.posterior(clip)?) == target, None)
        }
        DefenseKind::Td => {
            let guard = GuardedTd {
                model: &art.model,
                segments: config.defense.td_segments,
                threshold: art.calibration.td_threshold,
            };
            (art.model.predict(clip)? == target, Some(guard.flags(clip)?))
        }
        DefenseKind::Bnn => {
            let det = &art.reference.config;
            let p = art.bnn.mc_predict(clip, det.passes, det.seed)?;
            let (_, d) = score_prediction(&art.reference, &p)?;
            (p.predicted() == target, Some(d > art.reference.threshold))
        }
    })
}

fn write_task2_outputs(dir: &Path, report: &ExperimentReport) -> Result<()> {
    report.save(dir.join("report.json"))?;
    write_text(
        dir.join("unsuccessful_rate.csv"),
        ur_csv(report.task2.as_ref().expect("task2 report")),
    )
}

/// Targeted evaluation: each attack family against each defense condition,
/// with the attacker querying the defended system.
pub fn run_task2(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    let art = prepare(config)?;
    let dir = task_dir(config, "task2")?;
    let hash = config.hash();
    let target = config.target_index();
    let eval = art.manifest.load_split(Split::Eval)?;
    let candidates: Vec<usize> = (0..eval.len()).filter(|&i| eval[i].1 != target).collect();
    let sources: Vec<usize> = spread(candidates.len(), config.task2.clips)
        .into_iter()
        .map(|k| candidates[k])
        .collect();
    let mut jobs: Vec<(AttackFamily, DefenseKind, usize)> = Vec::new();
    for &family in &FAMILIES {
        for &defense in &config.task2.defenses {
            jobs.extend(sources.iter().map(|&i| (family, defense, i)));
        }
    }
    let mut records = with_workers(|| {
        jobs.par_iter()
            .map(|&(family, defense, i)| {
                let (clip, label) = &eval[i];
                let s = seed::derive(config.seed, &[seed::tag("task2"), seed::tag(family.name()), i as u64]);
                let cfg = AttackConfig {
                    mode: AttackMode::Targeted(target),
                    delta_max: config.task2.delta_max.get(family),
                    seed: s,
                    ..config.attack.clone()
                };
                let oracle = defense_oracle(defense, config, &art);
                let r = attack_clip(family, oracle.as_ref(), clip, *label, &cfg)?;
                let (fooled, flagged) = outcome(defense, config, &art, &r.clip, target)?;
                let id = format!("{}/{}/{}", family.name(), defense.name(), stem(clip.id()));
                let wav = save_audio(&dir, format!("audio/{id}.wav"), &r.clip)?;
                Ok(TargetedRecord {
                    id,
                    source: clip.id().to_string(),
                    family,
                    defense,
                    label: *label,
                    target,
                    success: r.success,
                    fooled,
                    flagged,
                    attack: AttackRecord::new(&r, clip),
                    wav,
                    config_hash: hash.clone(),
                })
            })
            .collect::<Result<Vec<TargetedRecord>>>()
    })??;
    records.sort_by(|a, b| a.id.cmp(&b.id));
    write_jsonl(dir.join("records.jsonl"), &records)?;
    let mut report = task2_report(&records, config)?;
    report.wall_clock_secs = start.elapsed().as_secs_f64();
    write_task2_outputs(&dir, &report)?;
    Ok(report)
}

/// Rebuilds a task report from `records.jsonl` and `config.toml` in
/// `task_dir` and checks it against the persisted `report.json`.
pub fn recompute_report(task_dir: &Path) -> Result<ExperimentReport> {
    let config = ExperimentConfig::load(task_dir.join("config.toml"))?;
    let stored = ExperimentReport::load(task_dir.join("report.json"))?;
    let records_path = task_dir.join("records.jsonl");
    let rebuilt = match stored.task.as_str() {
        "task1" => task1_report(&read_jsonl::<PoolRecord>(&records_path)?, &config)?,
        "task2" => task2_report(&read_jsonl::<TargetedRecord>(&records_path)?, &config)?,
        other => return Err(Error::ReportMismatch(format!("unknown task {other:?}"))),
    };
    if rebuilt.without_timing() != stored.without_timing() {
        return Err(Error::ReportMismatch(format!(
            "{} does not match its records",
            task_dir.join("report.json").display()
        )));
    }
    Ok(rebuilt)
}

/// Writes the plot-data CSVs for an existing report into `out_dir`.
pub fn render_report(report: &ExperimentReport, out_dir: &Path) -> Result<Vec<PathBuf>> {
    create_dir(out_dir)?;
    let mut written = Vec::new();
    let mut put = |name: &str, text: String| -> Result<()> {
        let p = out_dir.join(name);
        write_text(p.clone(), text)?;
        written.push(p);
        Ok(())
    };
    if let Some(t1) = &report.task1 {
        put("error_rates.csv", error_rate_csv(t1))?;
        put("detection.csv", detection_csv(t1))?;
        put("sigma_sweep.csv", sweep_csv(t1))?;
    }
    if let Some(t2) = &report.task2 {
        put("unsuccessful_rate.csv", ur_csv(t2))?;
    }
    Ok(written)
}

/// Human-readable label of a class index.
pub fn label_name(index: usize) -> &'static str {
    CommandVocab.name(index).unwrap_or("?")
}
