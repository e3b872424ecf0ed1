use super::{simulated_q, EstimatorData, PreferencePair, RewardExample};
use crate::error::{Error, Result};
use crate::metrics::{sbleu, MetricConfig};
use crate::policy::Policy;
use crate::text::Sentence;

/// Simulated supervision from beam ranks: for each of the first
/// `n_sources` pairs, up to `n_ranks` distinct beam hypotheses are scored by
/// sBLEU against the reference. Consecutive ranks form preference pairs
/// with `q` from [`simulated_q`].
pub fn make_aux_data(
    pairs: &[(Sentence, Sentence)],
    policy: &Policy,
    n_sources: usize,
    n_ranks: usize,
    cfg: &MetricConfig,
) -> Result<EstimatorData> {
    if n_ranks == 0 {
        return Err(Error::invalid("n_ranks must be at least 1"));
    }
    let mut data = EstimatorData::default();
    for (x, r) in pairs.iter().take(n_sources) {
        let hyps: Vec<Sentence> = policy
            .beam_decode(x, n_ranks, false)?
            .into_iter()
            .map(|h| h.translation)
            .filter(|y| !y.is_empty())
            .collect();
        for y in &hyps {
            data.rewards.push(RewardExample {
                source: x.clone(),
                target: y.clone(),
                reward: sbleu(y.tokens(), r.tokens(), cfg),
            });
        }
        for w in hyps.windows(2) {
            data.prefs.push(PreferencePair {
                source: x.clone(),
                target_1: w[0].clone(),
                target_2: w[1].clone(),
                q: simulated_q(&w[0], &w[1], r, cfg),
            });
        }
    }
    Ok(data)
}
