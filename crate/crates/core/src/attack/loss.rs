use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "target")]
pub enum AttackMode {
    Untargeted,
    Targeted(usize),
}

fn safe_ln(p: f64) -> f64 {
    p.max(f64::MIN_POSITIVE).ln()
}

fn best_excluding(probs: &[f64], skip: usize) -> f64 {
    probs
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != skip)
        .map(|(_, p)| *p)
        .fold(0.0, f64::max)
}

/// Log-margin loss; the attack has reached its goal once this is below zero.
///
/// Untargeted: `ln p(true) − ln max_{j≠true} p(j)`.
/// Targeted: `ln max_{j≠target} p(j) − ln p(target)`.
pub fn attack_loss(probs: &[f64], true_label: usize, mode: AttackMode) -> f64 {
    match mode {
        AttackMode::Untargeted => safe_ln(probs[true_label]) - safe_ln(best_excluding(probs, true_label)),
        AttackMode::Targeted(t) => safe_ln(best_excluding(probs, t)) - safe_ln(probs[t]),
    }
}

pub fn is_success(loss: f64) -> bool {
    loss < 0.0
}
