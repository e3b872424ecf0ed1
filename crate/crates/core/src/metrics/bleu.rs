use super::ngrams::clipped_matches;
use super::MetricConfig;

/// Sufficient statistics for BLEU: per-order clipped matches and totals
/// plus hypothesis and reference lengths. Statistics add across sentences.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BleuStats {
    pub matches: Vec<f64>,
    pub totals: Vec<f64>,
    pub hyp_len: f64,
    pub ref_len: f64,
}

impl BleuStats {
    pub fn add(&mut self, other: &BleuStats) {
        if self.matches.is_empty() {
            *self = other.clone();
            return;
        }
        for (a, b) in self.matches.iter_mut().zip(&other.matches) {
            *a += b;
        }
        for (a, b) in self.totals.iter_mut().zip(&other.totals) {
            *a += b;
        }
        self.hyp_len += other.hyp_len;
        self.ref_len += other.ref_len;
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.matches.clone();
        v.extend(&self.totals);
        v.push(self.hyp_len);
        v.push(self.ref_len);
        v
    }

    pub fn from_slice(v: &[f64]) -> Self {
        let n = (v.len() - 2) / 2;
        BleuStats {
            matches: v[..n].to_vec(),
            totals: v[n..2 * n].to_vec(),
            hyp_len: v[2 * n],
            ref_len: v[2 * n + 1],
        }
    }
}

pub fn bleu_stats<T: Eq + std::hash::Hash>(hyp: &[T], reference: &[T], max_n: usize) -> BleuStats {
    let mut s = BleuStats {
        matches: Vec::with_capacity(max_n),
        totals: Vec::with_capacity(max_n),
        hyp_len: hyp.len() as f64,
        ref_len: reference.len() as f64,
    };
    for n in 1..=max_n {
        let (m, t) = clipped_matches(hyp, reference, n);
        s.matches.push(m as f64);
        s.totals.push(t as f64);
    }
    s
}

/// BLEU from pooled statistics. `smoothing` is added to numerator and
/// denominator of every order n >= 2; with `None` any zero precision
/// yields 0.
pub fn bleu_from_stats(s: &BleuStats, smoothing: Option<f64>) -> f64 {
    if s.hyp_len == 0.0 {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for (i, (&m, &t)) in s.matches.iter().zip(&s.totals).enumerate() {
        let (m, t) = match smoothing {
            Some(eps) if i > 0 => (m + eps, t + eps),
            _ => (m, t),
        };
        if m <= 0.0 || t <= 0.0 {
            return 0.0;
        }
        log_sum += (m / t).ln();
    }
    let geo = (log_sum / s.matches.len() as f64).exp();
    let bp = if s.hyp_len < s.ref_len {
        (1.0 - s.ref_len / s.hyp_len).exp()
    } else {
        1.0
    };
    (geo * bp).min(1.0)
}

/// Smoothed sentence BLEU in `[0, 1]`.
pub fn sbleu<T: Eq + std::hash::Hash>(hyp: &[T], reference: &[T], cfg: &MetricConfig) -> f64 {
    if hyp.is_empty() || reference.is_empty() {
        return 0.0;
    }
    bleu_from_stats(&bleu_stats(hyp, reference, cfg.max_ngram), Some(cfg.smoothing_epsilon))
}

/// Unsmoothed corpus BLEU over pooled counts.
pub fn corpus_bleu<S: AsRef<[String]>>(hyps: &[S], refs: &[S], cfg: &MetricConfig) -> f64 {
    let mut total = BleuStats::default();
    for (h, r) in hyps.iter().zip(refs) {
        total.add(&bleu_stats(h.as_ref(), r.as_ref(), cfg.max_ngram));
    }
    if total.matches.is_empty() {
        return 0.0;
    }
    bleu_from_stats(&total, None)
}
