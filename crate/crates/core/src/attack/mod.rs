//! Query-only adversarial example generation.
//!
//! Attacks see the victim exclusively through [`QueryOracle`], which exposes
//! input → posterior and nothing else, and charges every call against a fixed
//! query budget.

mod config;
mod evolution;
mod gaussian;
mod loss;
mod oracle;
mod project;
mod result;
mod zeroth;

pub use config::{AttackConfig, AttackFamily, EvolutionParams, ZerothParams};
pub use evolution::evolutionary_attack;
pub use gaussian::gaussian_baseline;
pub use loss::{attack_loss, is_success, AttackMode};
pub use oracle::{BlackBox, QueryOracle};
pub use project::project_linf;
pub use result::{AdversarialResult, ResultSummary};
pub use zeroth::{estimate_gradient, upsample_linear, zeroth_order_attack};

use crate::dsp::AudioClip;
use crate::Result;

/// Runs the configured attack family against `oracle`.
pub fn run_attack(
    family: AttackFamily,
    oracle: &mut QueryOracle,
    clip: &AudioClip,
    label: usize,
    config: &AttackConfig,
) -> Result<AdversarialResult> {
    match family {
        AttackFamily::Evolutionary => evolutionary_attack(oracle, clip, label, config),
        AttackFamily::ZerothOrder => zeroth_order_attack(oracle, clip, label, config),
    }
}
