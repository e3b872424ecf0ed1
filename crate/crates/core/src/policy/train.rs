use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{mle_step, opl_step, rl_step, Baseline, FeedbackEntry, FeedbackLog, Policy, RewardFn, RlConfig, StepReport};
use crate::autodiff::{Adam, AdamConfig};
use crate::error::{Error, Result};
use crate::metrics::{corpus_score, gleu, sbleu, Metric, MetricConfig};
use crate::text::Sentence;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Mle,
    Rl,
    Opl,
}

/// One line of training progress.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProgressRecord {
    pub phase: Phase,
    pub step: usize,
    #[serde(flatten)]
    pub report: StepReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MleConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub clip: Option<f64>,
    pub adam: AdamConfig,
    pub seed: u64,
}

impl Default for MleConfig {
    fn default() -> Self {
        MleConfig { epochs: 10, batch_size: 16, clip: Some(1.0), adam: AdamConfig { lr: 1e-3, ..AdamConfig::default() }, seed: 1 }
    }
}

/// Shuffled-minibatch MLE for `epochs` passes.
pub fn train_mle(policy: &mut Policy, pairs: &[(Sentence, Sentence)], cfg: &MleConfig) -> Result<Vec<ProgressRecord>> {
    if cfg.batch_size == 0 {
        return Err(Error::invalid("batch_size must be positive"));
    }
    if pairs.is_empty() && cfg.epochs > 0 {
        return Err(Error::invalid("no training pairs"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut opt = Adam::new(&policy.params, cfg.adam);
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut out = Vec::new();
    let mut step = 0;
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<_> = chunk.iter().map(|&i| pairs[i].clone()).collect();
            step += 1;
            let report = mle_step(policy, &mut opt, &batch, cfg.clip)?;
            out.push(ProgressRecord { phase: Phase::Mle, step, report });
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RlTrainConfig {
    pub rl: RlConfig,
    pub steps: usize,
    pub seed: u64,
}

/// `steps` REINFORCE updates over shuffled passes through `sources`.
pub fn train_rl(
    policy: &mut Policy,
    sources: &[Sentence],
    reward_fn: &mut RewardFn,
    cfg: &RlTrainConfig,
) -> Result<(Vec<ProgressRecord>, Baseline)> {
    cfg.rl.validate()?;
    if sources.is_empty() && cfg.steps > 0 {
        return Err(Error::invalid("no training sources"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut opt = Adam::new(&policy.params, cfg.rl.adam);
    let mut baseline = Baseline::default();
    let mut out = Vec::with_capacity(cfg.steps);
    let mut queue: Vec<usize> = Vec::new();
    for step in 1..=cfg.steps {
        let mut batch = Vec::with_capacity(cfg.rl.batch_size);
        while batch.len() < cfg.rl.batch_size.min(sources.len()) {
            if queue.is_empty() {
                queue = (0..sources.len()).collect();
                queue.shuffle(&mut rng);
            }
            batch.push(sources[queue.pop().expect("refilled")].clone());
        }
        let report = rl_step(policy, &mut opt, &batch, reward_fn, &cfg.rl, &mut baseline, &mut rng)?;
        out.push(ProgressRecord { phase: Phase::Rl, step, report });
    }
    Ok((out, baseline))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OplConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub clip: Option<f64>,
    pub adam: AdamConfig,
    pub seed: u64,
}

impl Default for OplConfig {
    fn default() -> Self {
        OplConfig { steps: 100, batch_size: 16, clip: Some(1.0), adam: AdamConfig { lr: 1e-5, ..AdamConfig::default() }, seed: 1 }
    }
}

/// `steps` off-policy updates on shuffled minibatches of the log.
pub fn train_opl(policy: &mut Policy, log: &FeedbackLog, cfg: &OplConfig) -> Result<Vec<ProgressRecord>> {
    if cfg.batch_size == 0 {
        return Err(Error::invalid("batch_size must be positive"));
    }
    if log.is_empty() && cfg.steps > 0 {
        return Err(Error::invalid("feedback log is empty"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut opt = Adam::new(&policy.params, cfg.adam);
    let mut queue: Vec<usize> = Vec::new();
    let mut out = Vec::with_capacity(cfg.steps);
    for step in 1..=cfg.steps {
        let mut batch = Vec::with_capacity(cfg.batch_size);
        while batch.len() < cfg.batch_size.min(log.len()) {
            if queue.is_empty() {
                queue = (0..log.len()).collect();
                queue.shuffle(&mut rng);
            }
            batch.push(log.entries[queue.pop().expect("refilled")].clone());
        }
        let report = opl_step(policy, &mut opt, &batch, cfg.clip)?;
        out.push(ProgressRecord { phase: Phase::Opl, step, report });
    }
    Ok(out)
}

/// Reward from a sentence-level metric against the reference of the source.
/// Repeated sources keep their first reference.
pub struct ReferenceReward {
    refs: HashMap<Sentence, Sentence>,
    metric: Metric,
    cfg: MetricConfig,
}

impl ReferenceReward {
    pub fn new(pairs: &[(Sentence, Sentence)], metric: Metric, cfg: MetricConfig) -> Result<Self> {
        if !matches!(metric, Metric::Gleu | Metric::Sbleu | Metric::Bleu) {
            return Err(Error::invalid(format!("{} is not usable as a direct reward", metric.name())));
        }
        let mut refs = HashMap::new();
        for (x, y) in pairs {
            refs.entry(x.clone()).or_insert_with(|| y.clone());
        }
        Ok(ReferenceReward { refs, metric, cfg })
    }

    pub fn reward(&self, x: &Sentence, y: &Sentence) -> Result<f64> {
        let r = self.refs.get(x).ok_or_else(|| Error::NotFound(format!("no reference for source `{x}`")))?;
        Ok(match self.metric {
            Metric::Gleu => gleu(y.tokens(), r.tokens(), &self.cfg),
            _ => sbleu(y.tokens(), r.tokens(), &self.cfg),
        })
    }
}

/// Deterministic logged feedback: the logging policy's greedy output for
/// each source, rewarded by a sentence metric against the reference.
/// Empty outputs are not logged.
pub fn simulate_feedback_log(
    logging: &Policy,
    pairs: &[(Sentence, Sentence)],
    metric: Metric,
    cfg: &MetricConfig,
) -> Result<FeedbackLog> {
    let reward = ReferenceReward::new(pairs, metric, cfg.clone())?;
    let mut entries = Vec::with_capacity(pairs.len());
    for (x, _) in pairs {
        let y = logging.greedy_decode(x)?.translation;
        if y.is_empty() {
            continue;
        }
        let r = reward.reward(x, &y)?;
        entries.push(FeedbackEntry { source: x.clone(), translation: y, reward: r });
    }
    FeedbackLog::new(entries)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decoding {
    Greedy,
    Beam { width: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub scores: BTreeMap<String, f64>,
    pub hypotheses: Vec<Sentence>,
}

pub fn decode_all(policy: &Policy, sources: &[Sentence], decoding: Decoding) -> Result<Vec<Sentence>> {
    sources
        .iter()
        .map(|x| match decoding {
            Decoding::Greedy => Ok(policy.greedy_decode(x)?.translation),
            Decoding::Beam { width } => Ok(policy.beam_decode(x, width, false)?.remove(0).translation),
        })
        .collect()
}

/// Decodes every source and scores the outputs with each corpus metric.
pub fn evaluate_policy(
    policy: &Policy,
    pairs: &[(Sentence, Sentence)],
    metrics: &[Metric],
    decoding: Decoding,
    cfg: &MetricConfig,
) -> Result<Evaluation> {
    let sources: Vec<Sentence> = pairs.iter().map(|p| p.0.clone()).collect();
    let hypotheses = decode_all(policy, &sources, decoding)?;
    let scores = score_outputs(&hypotheses, pairs, metrics, cfg)?;
    Ok(Evaluation { scores, hypotheses })
}

pub fn score_outputs(
    hypotheses: &[Sentence],
    pairs: &[(Sentence, Sentence)],
    metrics: &[Metric],
    cfg: &MetricConfig,
) -> Result<BTreeMap<String, f64>> {
    let hyps: Vec<&[String]> = hypotheses.iter().map(Sentence::tokens).collect();
    let refs: Vec<&[String]> = pairs.iter().map(|p| p.1.tokens()).collect();
    metrics.iter().map(|&m| Ok((m.name().to_owned(), corpus_score(m, &hyps, &refs, cfg)?))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::Vocab;
    use crate::policy::PolicyConfig;

    fn copy_task() -> (Policy, Vec<(Sentence, Sentence)>) {
        let words = ["a", "b", "c", "d"];
        let v = Vocab::from_words(words);
        let p = Policy::new(PolicyConfig { emb_dim: 8, hidden: 12, attn_dim: 8, max_len: 8 }, v.clone(), v, 3).unwrap();
        let mut pairs = vec![];
        for i in 0..20 {
            let s: Vec<String> = (0..2 + i % 3).map(|j| words[(i * 7 + j * 3) % 4].to_owned()).collect();
            pairs.push((Sentence::new(s.clone()), Sentence::new(s)));
        }
        (p, pairs)
    }

    #[test]
    fn copy_task_loss_improves() {
        let (mut p, pairs) = copy_task();
        let cfg = MleConfig { epochs: 50, batch_size: 20, adam: AdamConfig { lr: 1e-2, ..Default::default() }, ..Default::default() };
        let recs = train_mle(&mut p, &pairs, &cfg).unwrap();
        assert_eq!(recs.len(), 50);
        assert!(recs.last().unwrap().report.objective > recs[0].report.objective + 1.0);
    }

    #[test]
    fn zero_rl_steps_leave_policy_unchanged() {
        let (mut p, pairs) = copy_task();
        let before = p.params.clone();
        let rr = ReferenceReward::new(&pairs, Metric::Gleu, MetricConfig::default()).unwrap();
        let srcs: Vec<Sentence> = pairs.iter().map(|p| p.0.clone()).collect();
        let cfg = RlTrainConfig { steps: 0, ..Default::default() };
        train_rl(&mut p, &srcs, &mut |x, y| rr.reward(x, y), &cfg).unwrap();
        assert_eq!(p.params, before);
    }

    #[test]
    fn reference_scores_itself_perfectly() {
        let (_, pairs) = copy_task();
        let hyps: Vec<Sentence> = pairs.iter().map(|p| p.1.clone()).collect();
        let s = score_outputs(&hyps, &pairs, &[Metric::Bleu, Metric::Gleu, Metric::Ter], &MetricConfig::default()).unwrap();
        assert_eq!(s["bleu"], 1.0);
        assert_eq!(s["gleu"], 1.0);
        assert_eq!(s["ter"], 0.0);
    }
}
