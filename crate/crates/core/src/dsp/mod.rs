//! Deterministic signal-processing frontend.

mod clip;
pub mod defense;
pub mod features;
pub mod fft;
mod snr;
pub mod wav;

pub use clip::AudioClip;
pub use defense::{downsample_defense, local_smooth, SmoothKind};
pub use features::{
    cosine_similarity, log_mel, mfcc, mfcc_cosine_similarity, FrameConfig, MelFilterbank, MfccExtractor, MfccMatrix,
    LOG_FLOOR,
};
pub use snr::{mean_power, scale_noise_to_snr, snr_db};
pub use wav::{load_wav, save_wav};

/// Sample rate every model and defense in this crate is built around.
pub const SAMPLE_RATE: u32 = 16_000;
