use rand::Rng;
use rand_distr::StandardNormal;

use crate::{seed, Error, Result};

/// Number of quantiles used when the exact sorted formula does not apply.
pub const QUANTILES: usize = 256;
/// Default number of random projections for the sliced distance.
pub const SLICES: usize = 64;

/// Uniformly weighted finite sample, kept sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDist {
    sorted: Vec<f64>,
}

impl EmpiricalDist {
    pub fn new(mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidArgument("empirical distribution needs samples".into()));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite sample".into()));
        }
        samples.sort_by(f64::total_cmp);
        Ok(Self { sorted: samples })
    }

    pub fn point(value: f64) -> Result<Self> {
        Self::new(vec![value])
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    pub fn mean(&self) -> f64 {
        self.sorted.iter().sum::<f64>() / self.sorted.len() as f64
    }

    /// Left-continuous empirical quantile function.
    pub fn quantile(&self, p: f64) -> f64 {
        let n = self.sorted.len();
        let idx = ((p * n as f64).ceil() as usize).clamp(1, n) - 1;
        self.sorted[idx]
    }
}

/// 1-Wasserstein distance between two empirical distributions.
///
/// Equal sizes up to [`QUANTILES`] use `(1/n) Σ |a_(i) − b_(i)|`; otherwise
/// both quantile functions are sampled at `QUANTILES` midpoints.
pub fn wasserstein_1d(a: &EmpiricalDist, b: &EmpiricalDist) -> f64 {
    let (sa, sb) = (a.sorted(), b.sorted());
    if sa.len() == sb.len() && sa.len() <= QUANTILES {
        return sa.iter().zip(sb).map(|(x, y)| (x - y).abs()).sum::<f64>() / sa.len() as f64;
    }
    (0..QUANTILES)
        .map(|k| {
            let p = (k as f64 + 0.5) / QUANTILES as f64;
            (a.quantile(p) - b.quantile(p)).abs()
        })
        .sum::<f64>()
        / QUANTILES as f64
}

fn centered(set: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let d = set[0].len();
    let n = set.len() as f64;
    let mean: Vec<f64> = (0..d).map(|j| set.iter().map(|v| v[j]).sum::<f64>() / n).collect();
    set.iter()
        .map(|v| v.iter().zip(&mean).map(|(x, m)| x - m).collect())
        .collect()
}

/// Mean 1-D Wasserstein distance over `slices` random unit directions.
/// With `translation_invariant`, each set is centred before projecting.
pub fn sliced_wasserstein(
    a: &[Vec<f64>],
    b: &[Vec<f64>],
    slices: usize,
    seed_value: u64,
    translation_invariant: bool,
) -> Result<f64> {
    if a.is_empty() || b.is_empty() || slices == 0 {
        return Err(Error::InvalidArgument(
            "sliced distance needs samples and slices".into(),
        ));
    }
    let d = a[0].len();
    if a.iter().chain(b).any(|v| v.len() != d) {
        return Err(Error::Shape("vector sets differ in dimension".into()));
    }
    let (ca, cb);
    let (a, b) = if translation_invariant {
        ca = centered(a);
        cb = centered(b);
        (ca.as_slice(), cb.as_slice())
    } else {
        (a, b)
    };
    let mut rng = seed::rng(seed_value);
    let mut total = 0.0;
    for _ in 0..slices {
        let dir = loop {
            let u: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                break u.into_iter().map(|x| x / norm).collect::<Vec<_>>();
            }
        };
        let project = |set: &[Vec<f64>]| -> Vec<f64> {
            set.iter()
                .map(|v| v.iter().zip(&dir).map(|(x, u)| x * u).sum())
                .collect()
        };
        total += wasserstein_1d(&EmpiricalDist::new(project(a))?, &EmpiricalDist::new(project(b))?);
    }
    Ok(total / slices as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(v: &[f64]) -> EmpiricalDist {
        EmpiricalDist::new(v.to_vec()).unwrap()
    }

    #[test]
    fn closed_form_cases() {
        assert_eq!(wasserstein_1d(&dist(&[1.0, 2.0]), &dist(&[2.0, 1.0])), 0.0);
        assert_eq!(wasserstein_1d(&dist(&[0.0]), &dist(&[3.0])), 3.0);
        assert_eq!(wasserstein_1d(&dist(&[0.0, 1.0]), &dist(&[1.0, 2.0])), 1.0);
        assert!(EmpiricalDist::new(vec![]).is_err());
        assert!(EmpiricalDist::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn point_mass_against_sample_is_mean_abs_deviation() {
        let r = dist(&[0.0, 1.0, 5.0, 2.0]);
        let w = wasserstein_1d(&EmpiricalDist::point(1.5).unwrap(), &r);
        assert!((w - (1.5 + 0.5 + 3.5 + 0.5) / 4.0).abs() < 1e-12);
    }

    #[test]
    fn sliced_degenerate_cases() {
        let a = vec![vec![0.0, 1.0], vec![2.0, -1.0], vec![0.5, 0.5]];
        assert_eq!(sliced_wasserstein(&a, &a, 16, 1, false).unwrap(), 0.0);
        let b: Vec<Vec<f64>> = a.iter().map(|v| vec![v[0] + 3.0, v[1] - 7.0]).collect();
        assert!(sliced_wasserstein(&a, &b, 16, 1, true).unwrap() < 1e-9);
        assert!(sliced_wasserstein(&a, &b, 16, 1, false).unwrap() > 1.0);
        let x = vec![vec![1.0], vec![4.0]];
        let y = vec![vec![0.0], vec![2.0]];
        let exact = wasserstein_1d(&dist(&[1.0, 4.0]), &dist(&[0.0, 2.0]));
        assert!((sliced_wasserstein(&x, &y, 5, 3, false).unwrap() - exact).abs() < 1e-12);
    }
}
