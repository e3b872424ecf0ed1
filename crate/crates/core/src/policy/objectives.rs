use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::check_tau;
use super::{FeedbackEntry, Policy, Sample};
use crate::autodiff::{Adam, AdamConfig, Gradients, Graph, Matrix};
use crate::error::{Error, Result};
use crate::text::Sentence;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub objective: f64,
    /// Gradient norm before clipping.
    pub grad_norm: f64,
    pub n_samples: usize,
    pub skipped: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_reward: Option<f64>,
}

fn apply(policy: &mut Policy, opt: &mut Adam, mut grads: Gradients, clip: Option<f64>) -> Result<f64> {
    let norm = match clip {
        Some(c) => grads.clip_norm(c),
        None => grads.norm(),
    };
    if !norm.is_finite() {
        return Err(Error::Numerical("non-finite policy gradient".into()));
    }
    opt.ascend(&mut policy.params, &grads);
    if !policy.params.all_finite() {
        return Err(Error::Numerical("non-finite policy weights".into()));
    }
    Ok(norm)
}

/// Mean teacher-forced log-likelihood of the references and its gradient.
pub fn mle_objective_and_grad(policy: &Policy, batch: &[(Sentence, Sentence)]) -> Result<(f64, Gradients)> {
    if batch.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    let mut grads = policy.params.zeros_like();
    let mut total = 0.0;
    let w = 1.0 / batch.len() as f64;
    for (x, y) in batch {
        let src = policy.source_ids(x)?;
        let outs = policy.target_outputs(y)?;
        let mut g = Graph::new(&policy.params);
        let enc = policy.encode(&mut g, &src);
        let lp = policy.forced_log_prob(&mut g, &enc, &outs, None);
        total += g.scalar(lp);
        g.backward_into(lp, w, &mut grads);
    }
    Ok((total * w, grads))
}

/// One clipped ascent step on the batch log-likelihood.
pub fn mle_step(policy: &mut Policy, opt: &mut Adam, batch: &[(Sentence, Sentence)], clip: Option<f64>) -> Result<StepReport> {
    let (obj, grads) = mle_objective_and_grad(policy, batch)?;
    let grad_norm = apply(policy, opt, grads, clip)?;
    Ok(StepReport { objective: obj, grad_norm, n_samples: batch.len(), ..Default::default() })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RlConfig {
    /// Samples per source.
    pub k: usize,
    /// Sampling temperature; `inf` samples uniformly.
    pub tau: f64,
    /// Differentiate the tempered log-probability instead of the plain one.
    pub tempered_gradients: bool,
    pub batch_size: usize,
    pub clip: Option<f64>,
    pub adam: AdamConfig,
}

impl Default for RlConfig {
    fn default() -> Self {
        RlConfig {
            k: 5,
            tau: 0.5,
            tempered_gradients: false,
            batch_size: 10,
            clip: Some(1.0),
            adam: AdamConfig { lr: 1e-5, ..AdamConfig::default() },
        }
    }
}

impl RlConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        check_tau(self.tau)?;
        if self.tempered_gradients && self.tau.is_infinite() {
            return Err(Error::invalid("tempered gradients need a finite temperature"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be positive"));
        }
        Ok(())
    }

    fn grad_tau(&self) -> Option<f64> {
        self.tempered_gradients.then_some(self.tau)
    }
}

/// Running mean of every reward seen so far.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    pub mean: f64,
    pub count: u64,
}

impl Baseline {
    pub fn update(&mut self, r: f64) {
        self.count += 1;
        self.mean += (r - self.mean) / self.count as f64;
    }
}

/// Reward callback; an error skips that sample.
pub type RewardFn<'a> = dyn FnMut(&Sentence, &Sentence) -> Result<f64> + 'a;

/// REINFORCE step: `k` samples per source from `softmax(o / tau)`, gradient
/// `mean (r - b) grad log p(y|x)` with `b` the running mean before this
/// batch, then the baseline absorbs the new rewards.
pub fn rl_step(
    policy: &mut Policy,
    opt: &mut Adam,
    sources: &[Sentence],
    reward_fn: &mut RewardFn,
    cfg: &RlConfig,
    baseline: &mut Baseline,
    rng: &mut ChaCha8Rng,
) -> Result<StepReport> {
    cfg.validate()?;
    if sources.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    let b = baseline.mean;
    let mut grads = policy.params.zeros_like();
    let mut rewards = Vec::new();
    let mut skipped = 0;
    let mut objective = 0.0;
    for x in sources {
        let src = policy.source_ids(x)?;
        let mut src_rng = ChaCha8Rng::seed_from_u64(rng.next_u64());
        let mut g = Graph::new(&policy.params);
        let enc = policy.encode(&mut g, &src);
        let mut terms = Vec::with_capacity(cfg.k);
        for _ in 0..cfg.k {
            let (outs, lp, _, _) = policy.rollout(&mut g, &enc, cfg.tau, cfg.grad_tau(), &mut src_rng);
            let y = policy.outputs_to_sentence(&outs);
            match reward_fn(x, &y) {
                Ok(r) if r.is_finite() => {
                    rewards.push(r);
                    terms.push((lp, r - b));
                }
                Ok(r) => {
                    tracing::warn!(reward = r, "non-finite reward; sample skipped");
                    skipped += 1;
                }
                Err(e) => {
                    tracing::warn!(error = %e, "reward function failed; sample skipped");
                    skipped += 1;
                }
            }
        }
        if terms.is_empty() {
            continue;
        }
        let weighted: Vec<_> = terms.iter().map(|&(lp, a)| g.scale(lp, a)).collect();
        let all = g.concat_rows(&weighted);
        let sum = g.sum(all);
        objective += g.scalar(sum);
        g.backward_into(sum, 1.0, &mut grads);
    }
    let n = rewards.len();
    if n == 0 {
        return Ok(StepReport { skipped, ..Default::default() });
    }
    grads.scale(1.0 / n as f64);
    let grad_norm = apply(policy, opt, grads, cfg.clip)?;
    for &r in &rewards {
        baseline.update(r);
    }
    Ok(StepReport {
        objective: objective / n as f64,
        grad_norm,
        n_samples: n,
        skipped,
        mean_reward: Some(rewards.iter().sum::<f64>() / n as f64),
    })
}

/// `(1/n) sum w_i log p(y_i|x_i)` for fixed samples and weights: the
/// surrogate whose gradient is the REINFORCE update.
pub fn rl_surrogate_and_grad(
    policy: &Policy,
    samples: &[(Sentence, Sentence, f64)],
    grad_tau: Option<f64>,
) -> Result<(f64, Gradients)> {
    if samples.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    let mut grads = policy.params.zeros_like();
    let mut total = 0.0;
    let n = samples.len() as f64;
    for (x, y, w) in samples {
        let src = policy.source_ids(x)?;
        let outs = policy.target_outputs(y)?;
        let mut g = Graph::new(&policy.params);
        let enc = policy.encode(&mut g, &src);
        let lp = policy.forced_log_prob(&mut g, &enc, &outs, grad_tau);
        total += w * g.scalar(lp);
        g.backward_into(lp, w / n, &mut grads);
    }
    Ok((total / n, grads))
}

/// One sample and `grad log p(y|x)` (of `p_tau` if `grad_tau` is set).
pub fn sample_with_score_grad(
    policy: &Policy,
    x: &Sentence,
    tau: f64,
    grad_tau: Option<f64>,
    rng: &mut (impl Rng + ?Sized),
) -> Result<(Sample, Gradients)> {
    check_tau(tau)?;
    let src = policy.source_ids(x)?;
    let mut g = Graph::new(&policy.params);
    let enc = policy.encode(&mut g, &src);
    let (outs, lp, plain, tempered) = policy.rollout(&mut g, &enc, tau, grad_tau, rng);
    let grads = g.backward(lp);
    let s = Sample { translation: policy.outputs_to_sentence(&outs), log_prob: plain, tempered_log_prob: tempered };
    Ok((s, grads))
}

/// Self-normalized off-policy objective `sum_h r_h p_h / sum_b p_b` over
/// the minibatch, and its gradient.
pub fn opl_objective_and_grad(policy: &Policy, batch: &[FeedbackEntry]) -> Result<(f64, Gradients)> {
    if batch.is_empty() {
        return Err(Error::invalid("empty minibatch"));
    }
    let mut g = Graph::new(&policy.params);
    let mut lps = Vec::with_capacity(batch.len());
    for e in batch {
        e.validate()?;
        let src = policy.source_ids(&e.source)?;
        let outs = policy.target_outputs(&e.translation)?;
        let enc = policy.encode(&mut g, &src);
        lps.push(policy.forced_log_prob(&mut g, &enc, &outs, None));
    }
    let col = g.concat_rows(&lps);
    let row = g.transpose(col);
    let weights = g.softmax(row);
    let r: Vec<f64> = batch.iter().map(|e| e.reward).collect();
    let value: f64 = g.value(weights).data.iter().zip(&r).map(|(w, r)| w * r).sum();
    // centred rewards: same gradient since the weights sum to one
    let mean = r.iter().sum::<f64>() / r.len() as f64;
    let centred = g.mul_const(weights, Matrix::row(r.iter().map(|x| x - mean).collect()));
    let obj = g.sum(centred);
    Ok((value, g.backward(obj)))
}

pub fn opl_step(policy: &mut Policy, opt: &mut Adam, batch: &[FeedbackEntry], clip: Option<f64>) -> Result<StepReport> {
    let (obj, grads) = opl_objective_and_grad(policy, batch)?;
    let grad_norm = apply(policy, opt, grads, clip)?;
    let mean = batch.iter().map(|e| e.reward).sum::<f64>() / batch.len() as f64;
    Ok(StepReport { objective: obj, grad_norm, n_samples: batch.len(), skipped: 0, mean_reward: Some(mean) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::model::tests::toy;

    fn fe(x: &str, y: &str, r: f64) -> FeedbackEntry {
        FeedbackEntry { source: Sentence::parse(x), translation: Sentence::parse(y), reward: r }
    }

    #[test]
    fn zero_learning_rate_leaves_params() {
        let mut p = toy(4, 1);
        let before = p.params.clone();
        let mut opt = Adam::new(&p.params, AdamConfig { lr: 0.0, ..Default::default() });
        mle_step(&mut p, &mut opt, &[(Sentence::parse("x"), Sentence::parse("a b"))], Some(1.0)).unwrap();
        assert_eq!(p.params, before);
    }

    #[test]
    fn reward_equal_to_baseline_gives_no_update() {
        let mut p = toy(4, 2);
        let before = p.params.clone();
        let mut opt = Adam::new(&p.params, AdamConfig { lr: 0.1, ..Default::default() });
        let mut base = Baseline { mean: 0.3, count: 10 };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cfg = RlConfig::default();
        let rep = rl_step(&mut p, &mut opt, &[Sentence::parse("x y")], &mut |_, _| Ok(0.3), &cfg, &mut base, &mut rng).unwrap();
        assert_eq!(rep.grad_norm, 0.0);
        assert_eq!(p.params, before);
        assert_eq!(base.count, 15);
    }

    #[test]
    fn failed_rewards_are_skipped_and_counted() {
        let mut p = toy(4, 2);
        let mut opt = Adam::new(&p.params, AdamConfig::default());
        let mut base = Baseline::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut calls = 0;
        let mut f = |_: &Sentence, _: &Sentence| {
            calls += 1;
            if calls % 2 == 0 { Err(Error::invalid("no")) } else { Ok(1.0) }
        };
        let cfg = RlConfig { k: 4, ..Default::default() };
        let rep = rl_step(&mut p, &mut opt, &[Sentence::parse("x")], &mut f, &cfg, &mut base, &mut rng).unwrap();
        assert_eq!((rep.n_samples, rep.skipped), (2, 2));
        assert_eq!(base.count, 2);
    }

    #[test]
    fn opl_degenerate_cases_have_zero_gradient() {
        let p = toy(4, 3);
        let (_, g1) = opl_objective_and_grad(&p, &[fe("x", "a", 0.9)]).unwrap();
        assert!(g1.is_zero());
        let (v, g2) = opl_objective_and_grad(&p, &[fe("x", "a", 0.4), fe("y", "b a", 0.4)]).unwrap();
        assert!(g2.is_zero());
        assert!((v - 0.4).abs() < 1e-15);
        assert!(opl_objective_and_grad(&p, &[]).is_err());
    }

    #[test]
    fn opl_invariant_to_duplication() {
        let p = toy(4, 3);
        let b = vec![fe("x", "a", 0.9), fe("y", "b a", 0.1), fe("x y", "", 0.5)];
        let mut d = b.clone();
        d.extend(b.clone());
        let (v1, _) = opl_objective_and_grad(&p, &b).unwrap();
        let (v2, _) = opl_objective_and_grad(&p, &d).unwrap();
        assert!((v1 - v2).abs() < 1e-12);
    }

    #[test]
    fn rl_deterministic_under_seed() {
        let run = || {
            let mut p = toy(4, 5);
            let mut opt = Adam::new(&p.params, AdamConfig { lr: 1e-2, ..Default::default() });
            let mut base = Baseline::default();
            let mut rng = ChaCha8Rng::seed_from_u64(42);
            let cfg = RlConfig { k: 3, ..Default::default() };
            let mut f = |_: &Sentence, y: &Sentence| Ok(y.len() as f64 / 4.0);
            for _ in 0..3 {
                rl_step(&mut p, &mut opt, &[Sentence::parse("x"), Sentence::parse("y x")], &mut f, &cfg, &mut base, &mut rng).unwrap();
            }
            (p.params, base)
        };
        assert_eq!(run(), run());
    }
}
