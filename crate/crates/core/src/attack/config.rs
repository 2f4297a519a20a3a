use serde::{Deserialize, Serialize};

use super::AttackMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackFamily {
    Evolutionary,
    ZerothOrder,
}

impl AttackFamily {
    pub fn name(self) -> &'static str {
        match self {
            AttackFamily::Evolutionary => "evolutionary",
            AttackFamily::ZerothOrder => "zeroth_order",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolutionParams {
    pub population: usize,
    /// Per-sample mutation probability.
    pub mutation_rate: f64,
    /// Mutation amplitude as a fraction of `delta_max`.
    pub mutation_scale: f64,
    /// Weight of the similarity-shortfall penalty in the fitness.
    pub similarity_weight: f64,
    /// Softmax temperature for parent selection.
    pub selection_temperature: f64,
}

impl Default for EvolutionParams {
    fn default() -> Self {
        Self {
            population: 20,
            mutation_rate: 0.05,
            mutation_scale: 0.2,
            similarity_weight: 10.0,
            selection_temperature: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ZerothParams {
    pub latent_dim: usize,
    /// Number of random directions per gradient estimate.
    pub directions: usize,
    /// Finite-difference smoothing radius in latent space.
    pub smoothing: f64,
    /// Scalar multiplier on the estimator (1 or the latent dimension).
    pub scaling: f64,
    pub step_size: f64,
}

impl Default for ZerothParams {
    fn default() -> Self {
        Self {
            latent_dim: 512,
            directions: 8,
            smoothing: 1e-3,
            scaling: 1.0,
            step_size: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackConfig {
    pub delta_max: f64,
    pub budget: usize,
    pub mode: AttackMode,
    pub similarity_min: f64,
    pub evolution: EvolutionParams,
    pub zeroth: ZerothParams,
    pub seed: u64,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            delta_max: 0.01,
            budget: 10_000,
            mode: AttackMode::Untargeted,
            similarity_min: 0.95,
            evolution: EvolutionParams::default(),
            zeroth: ZerothParams::default(),
            seed: 0,
        }
    }
}

impl AttackConfig {
    pub fn validate(&self) -> crate::Result<()> {
        let bad = |m: &str| Err(crate::Error::InvalidArgument(m.to_string()));
        if !(self.delta_max > 0.0 && self.delta_max <= 1.0) {
            return bad("delta_max must lie in (0, 1]");
        }
        if self.budget == 0 {
            return bad("budget must be positive");
        }
        if !(0.0..=1.0).contains(&self.similarity_min) {
            return bad("similarity_min must lie in [0, 1]");
        }
        if self.evolution.population < 2 {
            return bad("population must be at least 2");
        }
        if !(self.evolution.selection_temperature > 0.0) {
            return bad("selection_temperature must be positive");
        }
        if !(0.0..=1.0).contains(&self.evolution.mutation_rate) {
            return bad("mutation_rate must lie in [0, 1]");
        }
        if self.zeroth.latent_dim < 2 || self.zeroth.directions == 0 {
            return bad("latent_dim must be >= 2 and directions >= 1");
        }
        if !(self.zeroth.smoothing > 0.0) {
            return bad("smoothing must be positive");
        }
        Ok(())
    }
}
