//! Synthetic spoken-command corpus and JSON-lines manifests.
//!
//! Each class is a fixed three-tone chord with a class-specific syllable-rate
//! amplitude envelope. Clips are jittered in phase, pitch, tone balance and
//! level, then mixed with white noise at 30 dB SNR.

use std::f64::consts::PI;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dsp::{load_wav, save_wav, scale_noise_to_snr, AudioClip, SAMPLE_RATE};
use crate::{seed, Error, Result};

pub const NUM_CLASSES: usize = 10;
pub const TARGET_LABEL: &str = "open_the_door";
pub const MANIFEST_FILE: &str = "manifest.jsonl";
const CORPUS_META_FILE: &str = "corpus.json";
const CLIP_SNR_DB: f64 = 30.0;
const PEAK_HEADROOM: f64 = 0.9;
const MIN_PER_CLASS: usize = 10;

/// Ordered command labels; indices are stable.
#[derive(Debug, Clone, Copy, Default)]
pub struct CommandVocab;

impl CommandVocab {
    pub const LABELS: [&'static str; NUM_CLASSES] = [
        "yes",
        "no",
        "up",
        "down",
        "left",
        "right",
        "stop",
        "go",
        "play",
        TARGET_LABEL,
    ];

    pub fn len(&self) -> usize {
        NUM_CLASSES
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn name(&self, index: usize) -> Option<&'static str> {
        Self::LABELS.get(index).copied()
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        Self::LABELS.iter().position(|l| *l == name)
    }

    pub fn target_index(&self) -> usize {
        NUM_CLASSES - 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Eval,
}

impl Split {
    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Eval => "eval",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    /// Path relative to the manifest directory.
    pub path: String,
    pub label: usize,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub root: PathBuf,
    pub entries: Vec<ManifestEntry>,
    pub seed: u64,
}

#[derive(Serialize, Deserialize)]
struct ManifestLine {
    path: String,
    label: LabelField,
    split: Split,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum LabelField {
    Name(String),
    Index(usize),
}

#[derive(Serialize, Deserialize)]
struct CorpusMeta {
    seed: u64,
    per_class: usize,
}

impl Manifest {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }

    pub fn count(&self, split: Split) -> usize {
        self.split(split).count()
    }

    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        self.root.join(&entry.path)
    }

    /// Loads every clip of a split in manifest order; clip ids are the relative paths.
    pub fn load_split(&self, split: Split) -> Result<Vec<(AudioClip, usize)>> {
        self.split(split)
            .map(|e| Ok((load_wav(self.resolve(e))?.with_id(e.path.clone()), e.label)))
            .collect()
    }

    pub fn write(&self) -> Result<PathBuf> {
        let path = self.root.join(MANIFEST_FILE);
        let mut out = String::new();
        for e in &self.entries {
            let line = ManifestLine {
                path: e.path.clone(),
                label: LabelField::Name(CommandVocab::LABELS[e.label].to_string()),
                split: e.split,
            };
            out.push_str(&serde_json::to_string(&line)?);
            out.push('\n');
        }
        fs::write(&path, out).map_err(|e| Error::io(&path, e))?;
        let meta_path = self.root.join(CORPUS_META_FILE);
        let meta = CorpusMeta {
            seed: self.seed,
            per_class: self.entries.len() / NUM_CLASSES,
        };
        fs::write(&meta_path, serde_json::to_vec_pretty(&meta)?).map_err(|e| Error::io(&meta_path, e))?;
        Ok(path)
    }
}

struct ClassTemplate {
    freqs: [f64; 3],
    weights: [f64; 3],
    am_rate: f64,
}

fn template(class: usize) -> ClassTemplate {
    let grid = |k: usize| 120.0 * 1.12f64.powi(k as i32);
    let base = [1.0, 0.7, 0.5];
    let r = class % 3;
    ClassTemplate {
        freqs: [grid(class), grid(class + 4), grid(class + 8)],
        weights: [base[r], base[(r + 1) % 3], base[(r + 2) % 3]],
        am_rate: 3.0 + 0.6 * class as f64,
    }
}

/// Synthesizes one clip of a class; fully determined by `clip_seed`.
pub fn synthesize_clip(class: usize, clip_seed: u64, id: impl Into<String>) -> Result<AudioClip> {
    let t = template(class);
    let mut rng = seed::rng(clip_seed);
    let n = SAMPLE_RATE as usize;
    let sr = SAMPLE_RATE as f64;
    let freqs: Vec<f64> = t.freqs.iter().map(|f| f * rng.gen_range(0.95..1.05)).collect();
    let amps: Vec<f64> = t.weights.iter().map(|w| w * rng.gen_range(0.5..1.5)).collect();
    let phases: Vec<f64> = (0..3).map(|_| rng.gen_range(0.0..2.0 * PI)).collect();
    let env_phase = rng.gen_range(0.0..2.0 * PI);
    let am_rate = t.am_rate * rng.gen_range(0.9..1.1);
    let level = rng.gen_range(0.03..0.09);
    let ramp = 0.05 * sr;

    let mut x: Vec<f64> = (0..n)
        .map(|i| {
            let ts = i as f64 / sr;
            let fade = (i as f64 / ramp).min((n - 1 - i) as f64 / ramp).min(1.0);
            let env = fade * (0.4 + 0.6 * 0.5 * (1.0 + (2.0 * PI * am_rate * ts + env_phase).sin()));
            let chord: f64 = (0..3)
                .map(|k| amps[k] * (2.0 * PI * freqs[k] * ts + phases[k]).sin())
                .sum();
            env * chord
        })
        .collect();
    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    x.iter_mut().for_each(|v| *v *= level / peak);

    let clean = AudioClip::new(x, SAMPLE_RATE, "tmp")?;
    let noise: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let noise = scale_noise_to_snr(&clean, &noise, CLIP_SNR_DB)?;
    let mut mixed: Vec<f64> = clean.samples().iter().zip(&noise).map(|(a, b)| a + b).collect();
    let peak = mixed.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > PEAK_HEADROOM {
        mixed.iter_mut().for_each(|v| *v *= PEAK_HEADROOM / peak);
    }
    AudioClip::new(mixed, SAMPLE_RATE, id)
}

/// Generates `per_class` clips per command under `out_dir/<label>/<index>.wav`
/// and writes the manifest. Splits are 80/10/10 within every class.
pub fn generate_corpus(seed_value: u64, per_class: usize, out_dir: impl AsRef<Path>) -> Result<Manifest> {
    if per_class < MIN_PER_CLASS {
        return Err(Error::InvalidArgument(format!(
            "per_class must be at least {MIN_PER_CLASS}, got {per_class}"
        )));
    }
    let out_dir = out_dir.as_ref();
    for label in CommandVocab::LABELS {
        let dir = out_dir.join(label);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }

    let jobs: Vec<(usize, usize)> = (0..NUM_CLASSES)
        .flat_map(|c| (0..per_class).map(move |i| (c, i)))
        .collect();
    let entries_paths = jobs
        .par_iter()
        .map(|&(class, index)| {
            let rel = format!("{}/{index:04}.wav", CommandVocab::LABELS[class]);
            let clip_seed = seed::derive(seed_value, &[class as u64, index as u64]);
            let clip = synthesize_clip(class, clip_seed, rel.clone())?;
            save_wav(&clip, out_dir.join(&rel))?;
            Ok(rel)
        })
        .collect::<Result<Vec<_>>>()?;

    let n_train = per_class * 8 / 10;
    let n_dev = per_class / 10;
    let mut entries = Vec::with_capacity(jobs.len());
    for class in 0..NUM_CLASSES {
        let mut order: Vec<usize> = (0..per_class).collect();
        let mut rng = seed::rng(seed::derive(seed_value, &[seed::tag("split"), class as u64]));
        for i in (1..order.len()).rev() {
            order.swap(i, rng.gen_range(0..=i));
        }
        let mut split_of = vec![Split::Eval; per_class];
        for (rank, &idx) in order.iter().enumerate() {
            split_of[idx] = if rank < n_train {
                Split::Train
            } else if rank < n_train + n_dev {
                Split::Dev
            } else {
                Split::Eval
            };
        }
        for (index, split) in split_of.into_iter().enumerate() {
            entries.push(ManifestEntry {
                path: entries_paths[class * per_class + index].clone(),
                label: class,
                split,
            });
        }
    }
    let manifest = Manifest {
        root: out_dir.to_path_buf(),
        entries,
        seed: seed_value,
    };
    manifest.write()?;
    Ok(manifest)
}

/// Reads and validates a JSON-lines manifest. Paths resolve relative to the
/// manifest's directory and must exist.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let vocab = CommandVocab;
    let mut entries = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |detail: String| Error::Manifest { line: lineno, detail };
        let parsed: ManifestLine = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
        let label = match parsed.label {
            LabelField::Name(name) => vocab
                .index(&name)
                .ok_or_else(|| bad(format!("unknown label {name:?}")))?,
            LabelField::Index(i) if i < vocab.len() => i,
            LabelField::Index(i) => return Err(bad(format!("label index {i} out of range"))),
        };
        if !root.join(&parsed.path).is_file() {
            return Err(bad(format!("missing file {}", parsed.path)));
        }
        entries.push(ManifestEntry {
            path: parsed.path,
            label,
            split: parsed.split,
        });
    }
    if entries.is_empty() {
        return Err(Error::EmptyManifest);
    }
    let meta_path = root.join(CORPUS_META_FILE);
    let seed = match fs::read(&meta_path) {
        Ok(bytes) => serde_json::from_slice::<CorpusMeta>(&bytes)?.seed,
        Err(_) => 0,
    };
    Ok(Manifest { root, entries, seed })
}

/// Loads the manifest in `dir`, generating the corpus first when absent.
pub fn ensure_corpus(seed_value: u64, per_class: usize, dir: impl AsRef<Path>) -> Result<Manifest> {
    let dir = dir.as_ref();
    let path = dir.join(MANIFEST_FILE);
    if path.is_file() {
        let m = load_manifest(&path)?;
        if m.seed == seed_value && m.entries.len() == per_class * NUM_CLASSES {
            return Ok(m);
        }
    }
    generate_corpus(seed_value, per_class, dir)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vocab_is_stable() {
        let v = CommandVocab;
        assert_eq!(v.len(), 10);
        assert_eq!(v.index(TARGET_LABEL), Some(9));
        assert_eq!(v.target_index(), 9);
        let mut sorted = CommandVocab::LABELS.to_vec();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), 10);
    }

    #[test]
    fn clips_respect_headroom() {
        for class in 0..NUM_CLASSES {
            let c = synthesize_clip(class, 99 + class as u64, "x").unwrap();
            assert_eq!(c.len(), 16000);
            assert!(c.peak() <= PEAK_HEADROOM + 1e-12);
        }
    }

    #[test]
    fn rejects_tiny_corpus() {
        let dir = tempfile::tempdir().unwrap();
        assert!(generate_corpus(1, 5, dir.path()).is_err());
    }

    #[test]
    fn manifest_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.jsonl");
        fs::write(&p, "").unwrap();
        assert!(matches!(load_manifest(&p), Err(Error::EmptyManifest)));

        let wav = dir.path().join("a.wav");
        save_wav(&AudioClip::new(vec![0.0; 10], 16000, "a").unwrap(), &wav).unwrap();
        fs::write(
            &p,
            "{\"path\":\"a.wav\",\"label\":\"yes\",\"split\":\"train\"}\n{\"path\":\"a.wav\",\"label\":10,\"split\":\"dev\"}\n",
        )
        .unwrap();
        match load_manifest(&p) {
            Err(Error::Manifest { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        fs::write(&p, "{\"path\":\"a.wav\",\"label\":\"maybe\",\"split\":\"train\"}\n").unwrap();
        assert!(matches!(load_manifest(&p), Err(Error::Manifest { line: 1, .. })));
        fs::write(&p, "{\"path\":\"b.wav\",\"label\":\"yes\",\"split\":\"train\"}\n").unwrap();
        assert!(matches!(load_manifest(&p), Err(Error::Manifest { line: 1, .. })));
        fs::write(&p, "not json\n").unwrap();
        assert!(matches!(load_manifest(&p), Err(Error::Manifest { line: 1, .. })));
    }
}
