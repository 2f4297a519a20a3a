use serde::{Deserialize, Serialize};

/// ROC AUC by pair counting: the probability that a random positive scores
/// above a random negative, ties counting one half. `None` when either class
/// is empty.
pub fn auc(positives: &[f64], negatives: &[f64]) -> Option<f64> {
    if positives.is_empty() || negatives.is_empty() {
        return None;
    }
    let mut neg = negatives.to_vec();
    neg.sort_by(f64::total_cmp);
    let mut wins = 0.0;
    for &p in positives {
        let below = neg.partition_point(|&n| n < p);
        let not_above = neg.partition_point(|&n| n <= p);
        wins += below as f64 + 0.5 * (not_above - below) as f64;
    }
    Some(wins / (positives.len() * negatives.len()) as f64)
}

/// False-positive and false-negative rates of `score > threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfusionRates {
    /// Fraction of negatives flagged; `None` without negatives.
    pub false_positive: Option<f64>,
    /// Fraction of positives missed; `None` without positives.
    pub false_negative: Option<f64>,
}

pub fn confusion_rates(positives: &[f64], negatives: &[f64], threshold: f64) -> ConfusionRates {
    let frac = |v: &[f64], pred: &dyn Fn(f64) -> bool| {
        (!v.is_empty()).then(|| v.iter().filter(|&&x| pred(x)).count() as f64 / v.len() as f64)
    };
    ConfusionRates {
        false_positive: frac(negatives, &|x| x > threshold),
        false_negative: frac(positives, &|x| x <= threshold),
    }
}

/// Threshold maximising Youden's J = TPR − FPR for the rule `score > t`.
///
/// Candidates are midpoints between consecutive distinct scores plus one
/// value below the minimum; ties in J resolve to the lowest threshold.
pub fn youden_threshold(positives: &[f64], negatives: &[f64]) -> f64 {
    let mut all: Vec<f64> = positives.iter().chain(negatives).copied().collect();
    all.sort_by(f64::total_cmp);
    all.dedup();
    if all.is_empty() {
        return 0.0;
    }
    let mut candidates = vec![all[0] - 1.0];
    candidates.extend(all.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    candidates.push(all[all.len() - 1]);
    let rate = |v: &[f64], t: f64| {
        if v.is_empty() {
            0.0
        } else {
            v.iter().filter(|&&x| x > t).count() as f64 / v.len() as f64
        }
    };
    let mut best = (f64::NEG_INFINITY, candidates[0]);
    for t in candidates {
        let j = rate(positives, t) - rate(negatives, t);
        if j > best.0 {
            best = (j, t);
        }
    }
    best.1
}

/// Fraction of attacks that did not achieve their goal.
pub fn unsuccessful_rate(successes: &[bool]) -> Option<f64> {
    (!successes.is_empty()).then(|| successes.iter().filter(|s| !**s).count() as f64 / successes.len() as f64)
}

/// Error rate of `(predicted, truth)` pairs.
pub fn error_rate(pairs: &[(usize, usize)]) -> Option<f64> {
    (!pairs.is_empty()).then(|| pairs.iter().filter(|(p, t)| p != t).count() as f64 / pairs.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auc_cases() {
        assert_eq!(auc(&[2.0, 3.0], &[0.0, 1.0]), Some(1.0));
        assert_eq!(auc(&[0.0], &[1.0]), Some(0.0));
        assert_eq!(auc(&[1.0, 1.0], &[1.0]), Some(0.5));
        assert_eq!(auc(&[], &[1.0]), None);
    }

    #[test]
    fn separated_scores_give_zero_errors() {
        let pos = [5.0, 6.0, 7.0];
        let neg = [1.0, 2.0, 3.0];
        let t = youden_threshold(&pos, &neg);
        let r = confusion_rates(&pos, &neg, t);
        assert_eq!(r.false_positive, Some(0.0));
        assert_eq!(r.false_negative, Some(0.0));
    }

    #[test]
    fn empty_class_rates_are_undefined() {
        let r = confusion_rates(&[1.0], &[], 0.0);
        assert_eq!(r.false_positive, None);
        assert_eq!(r.false_negative, Some(0.0));
        assert_eq!(unsuccessful_rate(&[]), None);
        assert_eq!(unsuccessful_rate(&[true, false, false, false]), Some(0.75));
    }
}
