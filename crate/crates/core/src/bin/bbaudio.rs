use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bbaudio::attack::{AttackConfig, AttackFamily, AttackMode, BlackBox};
use bbaudio::dataset::{ensure_corpus, generate_corpus, Split};
use bbaudio::detect::{defense_wrap, detect, write_detection_csv, Defense};
use bbaudio::dsp::{load_wav, save_wav, AudioClip, SmoothKind};
use bbaudio::harness::records::{write_jsonl, AttackRecord};
use bbaudio::harness::{
    label_name, load_or_train_bnn, load_or_train_model, prepare, recompute_report, render_report, run_task1, run_task2,
    spread, ExperimentConfig, ExperimentReport,
};
use bbaudio::nn::accuracy;
use bbaudio::{seed, Error, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

/// Black-box adversarial audio attacks and Bayesian dispersion detection.
#[derive(Parser)]
#[command(name = "bbaudio", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML experiment configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the experiment seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            config.seed = s;
        }
        if let Some(o) = &self.out {
            config.output_dir = o.clone();
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    #[value(alias = "evo")]
    Evolutionary,
    #[value(alias = "zo")]
    ZerothOrder,
}

#[derive(Clone, Copy, ValueEnum)]
enum DefenseArg {
    None,
    Ls,
    Ds,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic command corpus.
    GenData {
        #[arg(long, default_value_t = 100)]
        per_class: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value = "corpus")]
        out: PathBuf,
    },
    /// Train the classifier and its Bayesian variant.
    Train(Common),
    /// Attack eval clips of the trained classifier.
    Attack {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        family: FamilyArg,
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long)]
        delta_max: Option<f64>,
        /// Number of eval clips, spread over the classes.
        #[arg(long, default_value_t = 10)]
        clips: usize,
        /// Target label name; untargeted when omitted.
        #[arg(long)]
        target: Option<String>,
        /// Preprocessing in front of the attacked model.
        #[arg(long, value_enum, default_value = "none")]
        defense: DefenseArg,
    },
    /// Score clips with the calibrated BNN detector.
    Detect {
        #[command(flatten)]
        common: Common,
        /// WAV files to score; the clean eval split when omitted.
        inputs: Vec<PathBuf>,
    },
    /// Untargeted evaluation with detection (error rates, AUC, FP, FN).
    Task1(Common),
    /// Targeted evaluation across defenses (unsuccessful rates).
    Task2(Common),
    /// Render a report into plot-data CSVs, or audit it against its records.
    Report {
        /// Task directory holding report.json (and records.jsonl for --recompute).
        dir: PathBuf,
        /// Rebuild the report from the per-clip records and require a match.
        #[arg(long)]
        recompute: bool,
        /// Where to write the CSVs; defaults to the task directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Serialize)]
struct ErrorLine<'a> {
    error: &'a str,
    message: String,
}

fn kind(e: &Error) -> &'static str {
    match e {
        Error::Io { .. } => "io",
        Error::Config(_) | Error::Schema(_) => "config",
        Error::InvalidArgument(_) => "usage",
        Error::ReportMismatch(_) => "report_mismatch",
        Error::Manifest { .. } | Error::EmptyManifest => "manifest",
        Error::Checkpoint(_) => "checkpoint",
        Error::WavDecode { .. } | Error::WavEncode(_) => "wav",
        _ => "runtime",
    }
}

fn print_json<T: Serialize>(v: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn summarize(report: &ExperimentReport, dir: &Path) {
    println!("report: {}", dir.join("report.json").display());
    if let Some(t1) = &report.task1 {
        for (name, c) in &t1.conditions {
            println!("  error_rate[{name}] = {:?}", c.error_rate);
        }
        for (name, d) in &t1.detection {
            println!(
                "  {name}: auc {:?} fp {:?} fn {:?} retained error {:?} (from {:?})",
                d.auc, d.false_positive_rate, d.false_negative_rate, d.error_rate_retained, d.error_rate_unfiltered
            );
        }
    }
    if let Some(t2) = &report.task2 {
        for (family, row) in &t2.unsuccessful_rate {
            let cells: Vec<String> = row
                .iter()
                .map(|(d, c)| format!("{d}={:?}", c.unsuccessful_rate))
                .collect();
            println!("  UR[{family}] {}", cells.join(" "));
        }
    }
}

fn attack_command(
    common: &Common,
    family: FamilyArg,
    budget: Option<usize>,
    delta_max: Option<f64>,
    clips: usize,
    target: Option<String>,
    defense: DefenseArg,
) -> Result<()> {
    let config = common.load()?;
    let manifest = ensure_corpus(config.corpus.seed, config.corpus.per_class, config.corpus_dir())?;
    let model = load_or_train_model(&config, &manifest)?;
    let family = match family {
        FamilyArg::Evolutionary => AttackFamily::Evolutionary,
        FamilyArg::ZerothOrder => AttackFamily::ZerothOrder,
    };
    let mode = match target {
        Some(name) => AttackMode::Targeted(
            bbaudio::dataset::CommandVocab
                .index(&name)
                .ok_or_else(|| Error::InvalidArgument(format!("unknown target label {name:?}")))?,
        ),
        None => AttackMode::Untargeted,
    };
    let defense = match defense {
        DefenseArg::None => Defense::None,
        DefenseArg::Ls => Defense::LocalSmoothing {
            window: config.defense.ls_window,
            smoothing: SmoothKind::Median,
        },
        DefenseArg::Ds => Defense::Downsampling,
    };
    let oracle_model = defense_wrap(&model, defense);
    let eval = manifest.load_split(Split::Eval)?;
    let dir = config.output_dir.join("attack").join(family.name());
    std::fs::create_dir_all(dir.join("audio")).map_err(|e| Error::io(&dir, e))?;
    let hash = config.hash();

    #[derive(Serialize)]
    struct Line {
        clip_id: String,
        label: String,
        family: AttackFamily,
        defense: &'static str,
        mode: AttackMode,
        config_hash: String,
        #[serde(flatten)]
        outcome: AttackRecord,
        wav: String,
    }
    let mut lines = Vec::new();
    for i in spread(eval.len(), clips) {
        let (clip, label) = &eval[i];
        if let AttackMode::Targeted(t) = mode {
            if t == *label {
                continue;
            }
        }
        let cfg = AttackConfig {
            budget: budget.unwrap_or(config.attack.budget),
            delta_max: delta_max.unwrap_or(config.attack.delta_max),
            mode,
            seed: seed::derive(config.seed, &[seed::tag("attack"), i as u64]),
            ..config.attack.clone()
        };
        cfg.validate()?;
        let mut oracle = bbaudio::attack::QueryOracle::new(&oracle_model as &dyn BlackBox, cfg.budget);
        let r = bbaudio::attack::run_attack(family, &mut oracle, clip, *label, &cfg)?;
        let wav = format!("audio/{}.wav", clip.id().trim_end_matches(".wav").replace('/', "_"));
        save_wav(&r.clip, dir.join(&wav))?;
        println!(
            "{}  success {}  queries {}  similarity {:.3}  snr {:?}",
            clip.id(),
            r.success,
            r.queries_used,
            r.similarity,
            r.snr_db
        );
        lines.push(Line {
            clip_id: clip.id().to_string(),
            label: label_name(*label).to_string(),
            family,
            defense: defense.name(),
            mode,
            config_hash: hash.clone(),
            outcome: AttackRecord::new(&r, clip),
            wav,
        });
    }
    write_jsonl(dir.join("records.jsonl"), &lines)?;
    println!("records: {}", dir.join("records.jsonl").display());
    Ok(())
}

fn detect_command(common: &Common, inputs: &[PathBuf]) -> Result<()> {
    let config = common.load()?;
    let art = prepare(&config)?;
    let clips: Vec<(AudioClip, bool)> = if inputs.is_empty() {
        art.manifest
            .load_split(Split::Eval)?
            .into_iter()
            .map(|(c, _)| (c, false))
            .collect()
    } else {
        inputs
            .iter()
            .map(|p| Ok((load_wav(p)?.with_id(p.display().to_string()), false)))
            .collect::<Result<_>>()?
    };
    let mut rows = Vec::with_capacity(clips.len());
    for (clip, truth) in clips {
        let score = detect(&art.bnn, &art.reference, &clip)?;
        println!(
            "{}  distance {:.6}  {}",
            score.clip_id,
            score.distance,
            if score.adversarial { "adversarial" } else { "clean" }
        );
        rows.push((score, truth));
    }
    let path = config.output_dir.join("detections.csv");
    write_detection_csv(&path, &rows)?;
    println!("threshold {:.6}; csv: {}", art.reference.threshold, path.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData { per_class, seed, out } => {
            let m = generate_corpus(seed, per_class, &out)?;
            println!(
                "{} clips ({} train, {} dev, {} eval) in {}",
                m.entries.len(),
                m.count(Split::Train),
                m.count(Split::Dev),
                m.count(Split::Eval),
                out.display()
            );
        }
        Command::Train(common) => {
            let config = common.load()?;
            std::fs::create_dir_all(&config.output_dir).map_err(|e| Error::io(&config.output_dir, e))?;
            let manifest = ensure_corpus(config.corpus.seed, config.corpus.per_class, config.corpus_dir())?;
            let model = load_or_train_model(&config, &manifest)?;
            let bnn = load_or_train_bnn(&config, &manifest, &model)?;
            let eval = manifest.load_split(Split::Eval)?;
            print_json(&serde_json::json!({
                "model": config.output_dir.join("model.ckpt"),
                "bnn": config.output_dir.join("bnn.ckpt"),
                "eval_accuracy": accuracy(&model, &eval)?,
                "bnn_eval_accuracy": bbaudio::bayes::bnn_accuracy(&bnn, &eval, config.detector.passes, config.detector.seed)?,
            }))?;
        }
        Command::Attack {
            common,
            family,
            budget,
            delta_max,
            clips,
            target,
            defense,
        } => attack_command(&common, family, budget, delta_max, clips, target, defense)?,
        Command::Detect { common, inputs } => detect_command(&common, &inputs)?,
        Command::Task1(common) => {
            let config = common.load()?;
            let report = run_task1(&config)?;
            summarize(&report, &config.output_dir.join("task1"));
        }
        Command::Task2(common) => {
            let config = common.load()?;
            let report = run_task2(&config)?;
            summarize(&report, &config.output_dir.join("task2"));
        }
        Command::Report { dir, recompute, out } => {
            let report = if recompute {
                let r = recompute_report(&dir)?;
                println!("recomputed report matches {}", dir.join("report.json").display());
                r
            } else {
                ExperimentReport::load(dir.join("report.json"))?
            };
            for p in render_report(&report, out.as_deref().unwrap_or(&dir))? {
                println!("wrote {}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = ErrorLine {
                error: kind(&e),
                message: e.to_string(),
            };
            eprintln!("{}", serde_json::to_string(&line).unwrap_or_else(|_| e.to_string()));
            match e {
                Error::Config(_) | Error::Schema(_) | Error::InvalidArgument(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
