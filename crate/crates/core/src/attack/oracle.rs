use crate::dsp::AudioClip;
use crate::nn::ClassifierModel;
use crate::{Error, Result};

/// Anything that maps an input clip to a class posterior.
///
/// This is the only capability an attack is ever handed; there is no path to
/// parameters or gradients through it.
pub trait BlackBox: Send + Sync {
    fn posterior(&self, clip: &AudioClip) -> Result<Vec<f64>>;
}

impl BlackBox for ClassifierModel {
    fn posterior(&self, clip: &AudioClip) -> Result<Vec<f64>> {
        self.forward(clip)
    }
}

impl<T: BlackBox + ?Sized> BlackBox for &T {
    fn posterior(&self, clip: &AudioClip) -> Result<Vec<f64>> {
        (**self).posterior(clip)
    }
}

/// Budgeted query access to a black-box model.
pub struct QueryOracle<'a> {
    model: &'a dyn BlackBox,
    count: usize,
    budget: usize,
}

impl<'a> QueryOracle<'a> {
    pub fn new(model: &'a dyn BlackBox, budget: usize) -> Self {
        Self {
            model,
            count: 0,
            budget,
        }
    }

    /// Charges one query. Once the budget is spent every call returns
    /// [`Error::BudgetExhausted`] without touching the model.
    pub fn query(&mut self, clip: &AudioClip) -> Result<Vec<f64>> {
        if self.count >= self.budget {
            return Err(Error::BudgetExhausted { budget: self.budget });
        }
        self.count += 1;
        self.model.posterior(clip)
    }

    pub fn queries_used(&self) -> usize {
        self.count
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn remaining(&self) -> usize {
        self.budget - self.count
    }

    pub fn exhausted(&self) -> bool {
        self.count >= self.budget
    }
}
