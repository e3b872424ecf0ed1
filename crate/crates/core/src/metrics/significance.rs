use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::bleu::{bleu_from_stats, BleuStats};
use super::gleu::gleu_from_stats;
use crate::error::{Error, Result};

/// How per-sentence statistic vectors combine into a corpus score.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CorpusStat {
    /// Each vector is `[score]`; the corpus score is the mean.
    Mean,
    /// Vectors from [`BleuStats::to_vec`]; unsmoothed pooled BLEU.
    Bleu,
    /// Vectors from [`super::gleu_stats`]; pooled GLEU.
    Gleu,
    /// Each vector is `[numerator, denominator]`; the corpus score is the
    /// ratio of sums (pooled TER).
    Ratio,
}

impl CorpusStat {
    /// Corpus score of a set of per-sentence statistic vectors.
    pub fn combine(self, stats: &[Vec<f64>]) -> f64 {
        let mut sum = vec![0.0; stats.first().map_or(0, Vec::len)];
        for v in stats {
            for (s, x) in sum.iter_mut().zip(v) {
                *s += x;
            }
        }
        self.score(&sum, stats.len())
    }

    fn score(self, sum: &[f64], n: usize) -> f64 {
        match self {
            CorpusStat::Mean => sum[0] / n as f64,
            CorpusStat::Bleu => bleu_from_stats(&BleuStats::from_slice(sum), None),
            CorpusStat::Gleu => gleu_from_stats(sum),
            CorpusStat::Ratio => sum[0] / sum[1],
        }
    }
}

const EXACT_LIMIT: usize = 20;

fn delta(a: &[Vec<f64>], b: &[Vec<f64>], swap: impl Fn(usize) -> bool, stat: CorpusStat) -> f64 {
    let width = a[0].len();
    let mut sa = vec![0.0; width];
    let mut sb = vec![0.0; width];
    for i in 0..a.len() {
        let (x, y) = if swap(i) { (&b[i], &a[i]) } else { (&a[i], &b[i]) };
        for k in 0..width {
            sa[k] += x[k];
            sb[k] += y[k];
        }
    }
    stat.score(&sa, a.len()) - stat.score(&sb, a.len())
}

/// Paired approximate randomization test on per-sentence statistics.
///
/// Each permutation swaps every sentence's system assignment with
/// probability 1/2; the p-value is `(1 + hits) / (1 + n_perm)` where hits
/// counts permutations with `|delta| >= |delta_observed|`. When `n_perm`
/// covers all `2^n` assignments (and `n <= 20`) the assignments are
/// enumerated instead and the exact permutation p-value `hits / 2^n` is
/// returned.
pub fn approx_randomization_test(
    scores_a: &[Vec<f64>],
    scores_b: &[Vec<f64>],
    stat: CorpusStat,
    n_perm: usize,
    seed: u64,
) -> Result<f64> {
    if n_perm < 1 {
        return Err(Error::invalid("approximate randomization needs at least one permutation"));
    }
    if scores_a.len() != scores_b.len() || scores_a.is_empty() {
        return Err(Error::invalid("paired samples must be non-empty and of equal length"));
    }
    let width = scores_a[0].len();
    if scores_a.iter().chain(scores_b).any(|v| v.len() != width) {
        return Err(Error::invalid("all statistic vectors must have the same width"));
    }
    let n = scores_a.len();
    let observed = delta(scores_a, scores_b, |_| false, stat).abs();
    // absorb float noise from reordered summation
    let threshold = observed - 1e-12 * observed.max(1.0);

    if n <= EXACT_LIMIT && n_perm >= 1usize << n {
        let total = 1usize << n;
        let hits = (0..total)
            .filter(|mask| delta(scores_a, scores_b, |i| mask >> i & 1 == 1, stat).abs() >= threshold)
            .count();
        return Ok(hits as f64 / total as f64);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0usize;
    let mut flips = vec![false; n];
    for _ in 0..n_perm {
        for f in flips.iter_mut() {
            *f = rng.gen_bool(0.5);
        }
        if delta(scores_a, scores_b, |i| flips[i], stat).abs() >= threshold {
            hits += 1;
        }
    }
    Ok((1 + hits) as f64 / (1 + n_perm) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_systems_give_p_one() {
        let a: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64 / 30.0]).collect();
        let p = approx_randomization_test(&a, &a, CorpusStat::Mean, 1000, 3).unwrap();
        assert_eq!(p, 1.0);
    }

    #[test]
    fn zero_permutations_is_an_error() {
        let a = vec![vec![1.0]];
        assert!(approx_randomization_test(&a, &a, CorpusStat::Mean, 0, 0).is_err());
    }

    #[test]
    fn deterministic_under_seed() {
        let a: Vec<Vec<f64>> = (0..40).map(|i| vec![(i % 7) as f64]).collect();
        let b: Vec<Vec<f64>> = (0..40).map(|i| vec![(i % 5) as f64]).collect();
        let p1 = approx_randomization_test(&a, &b, CorpusStat::Mean, 500, 9).unwrap();
        let p2 = approx_randomization_test(&a, &b, CorpusStat::Mean, 500, 9).unwrap();
        assert_eq!(p1, p2);
    }
}
