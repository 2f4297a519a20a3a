//! 16-bit PCM mono WAV reader/writer.

use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use super::AudioClip;
use crate::{Error, Result};

const PCM_SCALE: f64 = 32768.0;

pub fn load_wav(path: impl AsRef<Path>) -> Result<AudioClip> {
    let path = path.as_ref();
    let mut reader = WavReader::open(path).map_err(|e| match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::WavDecode {
            field: "header",
            detail: other.to_string(),
        },
    })?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::WavDecode {
            field: "channels",
            detail: format!("channels={} unsupported", spec.channels),
        });
    }
    if spec.sample_format != SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(Error::WavDecode {
            field: "bits_per_sample",
            detail: format!(
                "bits_per_sample={} ({:?}) unsupported",
                spec.bits_per_sample, spec.sample_format
            ),
        });
    }
    let samples = reader
        .samples::<i16>()
        .map(|s| s.map(|v| v as f64 / PCM_SCALE))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::WavDecode {
            field: "data",
            detail: e.to_string(),
        })?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    AudioClip::new(samples, spec.sample_rate, id)
}

/// Quantizes to int16 with saturation (1.0 maps to 32767).
pub fn quantize(sample: f64) -> i16 {
    (sample * PCM_SCALE).round().clamp(i16::MIN as f64, i16::MAX as f64) as i16
}

pub fn save_wav(clip: &AudioClip, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if clip.is_empty() {
        return Err(Error::WavEncode("empty clip".into()));
    }
    let spec = WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate(),
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let to_err = |e: hound::Error| match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::WavEncode(other.to_string()),
    };
    let mut writer = WavWriter::create(path, spec).map_err(to_err)?;
    for &s in clip.samples() {
        writer.write_sample(quantize(s)).map_err(to_err)?;
    }
    writer.finalize().map_err(to_err)
}
