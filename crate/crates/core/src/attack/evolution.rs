use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;

use super::loss::{attack_loss, is_success};
use super::{project_linf, AdversarialResult, AttackConfig, QueryOracle};
use crate::dsp::{cosine_similarity, AudioClip, MfccExtractor, MfccMatrix};
use crate::{seed, Error, Result};

#[derive(Clone)]
struct Member {
    delta: Vec<f64>,
    clip: AudioClip,
    loss: f64,
    similarity: f64,
    fitness: f64,
}

struct Scorer<'a> {
    original: &'a AudioClip,
    label: usize,
    config: &'a AttackConfig,
    extractor: MfccExtractor,
    reference: MfccMatrix,
}

impl Scorer<'_> {
    /// `Ok(None)` once the oracle refuses further queries.
    fn evaluate(&self, oracle: &mut QueryOracle, candidate: &[f64]) -> Result<Option<Member>> {
        let clip = project_linf(self.original, candidate, self.config.delta_max)?;
        let probs = match oracle.query(&clip) {
            Ok(p) => p,
            Err(Error::BudgetExhausted { .. }) => return Ok(None),
            Err(e) => return Err(e),
        };
        let loss = attack_loss(&probs, self.label, self.config.mode);
        let feats = self.extractor.compute(clip.samples())?;
        let similarity = cosine_similarity(self.reference.as_flat(), feats.as_flat())?;
        let shortfall = (self.config.similarity_min - similarity).max(0.0);
        let fitness = -loss - self.config.evolution.similarity_weight * shortfall;
        let delta = clip
            .samples()
            .iter()
            .zip(self.original.samples())
            .map(|(a, o)| a - o)
            .collect();
        Ok(Some(Member {
            delta,
            clip,
            loss,
            similarity,
            fitness,
        }))
    }

    fn feasible(&self, m: &Member) -> bool {
        m.similarity >= self.config.similarity_min
    }

    fn succeeded(&self, m: &Member) -> bool {
        is_success(m.loss) && self.feasible(m)
    }

    /// Keeps the lowest-loss member that satisfies the similarity floor.
    fn track(&self, fallback: &mut Member, m: &Member) {
        if self.feasible(m) && m.loss < fallback.loss {
            *fallback = m.clone();
        }
    }

    fn candidate(&self, delta: &[f64]) -> Vec<f64> {
        self.original.samples().iter().zip(delta).map(|(o, d)| o + d).collect()
    }
}

fn finish(m: Member, success: bool, queries: usize, original: &AudioClip, trace: Vec<f64>) -> AdversarialResult {
    AdversarialResult {
        snr_db: AdversarialResult::perturbation_snr(original, &m.clip),
        clip: m.clip,
        queries_used: queries,
        success,
        final_loss: m.loss,
        similarity: m.similarity,
        loss_trace: trace,
    }
}

fn best_index(pop: &[Member]) -> usize {
    let mut best = 0;
    for (i, m) in pop.iter().enumerate() {
        if m.fitness > pop[best].fitness {
            best = i;
        }
    }
    best
}

/// Population-based attack with elitism, softmax parent selection, uniform
/// crossover and sparse uniform mutation.
///
/// Fitness is the negated attack loss minus a penalty on MFCC similarity
/// below `similarity_min`. Returns as soon as one evaluated member reaches
/// the attack goal while satisfying the similarity constraint. The first
/// query scores the unperturbed clip; on failure the result is the
/// lowest-loss member that satisfied the constraint.
pub fn evolutionary_attack(
    oracle: &mut QueryOracle,
    original: &AudioClip,
    label: usize,
    config: &AttackConfig,
) -> Result<AdversarialResult> {
    config.validate()?;
    let extractor = MfccExtractor::new(
        original.sample_rate(),
        crate::dsp::features::DEFAULT_MFCC_MELS,
        crate::dsp::features::DEFAULT_MFCC_COEFFS,
    );
    let reference = extractor.compute(original.samples())?;
    let scorer = Scorer {
        original,
        label,
        config,
        extractor,
        reference,
    };
    let params = &config.evolution;
    let dmax = config.delta_max;
    let mut rng = seed::rng(config.seed);
    let start = oracle.queries_used();
    let used = |o: &QueryOracle| o.queries_used() - start;
    let n = original.len();
    let mut trace = Vec::new();

    let mut fallback = match scorer.evaluate(oracle, original.samples())? {
        Some(m) if scorer.succeeded(&m) => return Ok(finish(m, true, used(oracle), original, trace)),
        Some(m) => m,
        None => {
            return Err(Error::BudgetExhausted {
                budget: oracle.budget(),
            })
        }
    };

    let mut pop: Vec<Member> = Vec::with_capacity(params.population);
    for _ in 0..params.population {
        let delta: Vec<f64> = (0..n).map(|_| rng.gen_range(-dmax..=dmax)).collect();
        match scorer.evaluate(oracle, &scorer.candidate(&delta))? {
            Some(m) if scorer.succeeded(&m) => return Ok(finish(m, true, used(oracle), original, trace)),
            Some(m) => {
                scorer.track(&mut fallback, &m);
                pop.push(m);
            }
            None => break,
        }
    }
    if pop.is_empty() {
        return Ok(finish(fallback, false, used(oracle), original, trace));
    }
    let mut exhausted = pop.len() < params.population;

    while !exhausted {
        let elite = best_index(&pop);
        trace.push(-pop[elite].fitness);
        let top = pop[elite].fitness;
        let weights: Vec<f64> = pop
            .iter()
            .map(|m| ((m.fitness - top) / params.selection_temperature).exp())
            .collect();
        let picker = WeightedIndex::new(&weights).map_err(|e| Error::InvalidArgument(e.to_string()))?;

        let mut next = Vec::with_capacity(params.population);
        for _ in 1..params.population {
            let a = &pop[picker.sample(&mut rng)].delta;
            let b = &pop[picker.sample(&mut rng)].delta;
            let mut child = Vec::with_capacity(n);
            let mut bits = 0u64;
            for i in 0..n {
                if i % 64 == 0 {
                    bits = rng.gen();
                }
                child.push(if bits & 1 == 1 { a[i] } else { b[i] });
                bits >>= 1;
            }
            let amp = params.mutation_scale * dmax;
            for v in child.iter_mut() {
                if rng.gen::<f64>() < params.mutation_rate {
                    *v += rng.gen_range(-amp..=amp);
                }
            }
            match scorer.evaluate(oracle, &scorer.candidate(&child))? {
                Some(m) if scorer.succeeded(&m) => {
                    trace.push(-m.fitness.max(top));
                    return Ok(finish(m, true, used(oracle), original, trace));
                }
                Some(m) => {
                    scorer.track(&mut fallback, &m);
                    next.push(m);
                }
                None => {
                    exhausted = true;
                    break;
                }
            }
        }
        let elite_member = pop.swap_remove(elite);
        if exhausted {
            next.push(elite_member);
            pop = next;
            break;
        }
        next.insert(0, elite_member);
        pop = next;
    }

    trace.push(-pop[best_index(&pop)].fitness);
    Ok(finish(fallback, false, used(oracle), original, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attack::BlackBox;

    /// Posterior that moves toward class 1 with perturbation energy.
    struct Energy;

    impl BlackBox for Energy {
        fn posterior(&self, clip: &AudioClip) -> Result<Vec<f64>> {
            let e = clip.samples().iter().map(|v| v.abs()).sum::<f64>() / clip.len() as f64;
            let p1 = (e * 5.0).min(0.49);
            Ok(vec![1.0 - p1, p1])
        }
    }

    fn tone() -> AudioClip {
        let s = (0..16_000).map(|i| 0.3 * (i as f64 * 0.05).sin()).collect();
        AudioClip::new(s, 16_000, "tone").unwrap()
    }

    #[test]
    fn failed_attack_still_meets_similarity_floor() {
        let clip = tone();
        let cfg = AttackConfig {
            delta_max: 0.2,
            budget: 30,
            ..AttackConfig::default()
        };
        let mut oracle = QueryOracle::new(&Energy, cfg.budget);
        let r = evolutionary_attack(&mut oracle, &clip, 0, &cfg).unwrap();
        assert!(!r.success);
        assert!(r.similarity >= cfg.similarity_min, "{}", r.similarity);
        assert!(r.queries_used <= cfg.budget);
    }

    #[test]
    fn single_query_budget_returns_the_original() {
        let clip = tone();
        let cfg = AttackConfig {
            budget: 1,
            ..AttackConfig::default()
        };
        let mut oracle = QueryOracle::new(&Energy, 1);
        let r = evolutionary_attack(&mut oracle, &clip, 0, &cfg).unwrap();
        assert_eq!(r.clip.samples(), clip.samples());
        assert_eq!(r.queries_used, 1);
    }
}
