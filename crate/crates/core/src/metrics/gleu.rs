use super::ngrams::clipped_matches;
use super::MetricConfig;

/// `[matches, hyp_ngrams, ref_ngrams]` over orders `1..=max_ngram`.
pub fn gleu_stats<T: Eq + std::hash::Hash>(hyp: &[T], reference: &[T], max_n: usize) -> [f64; 3] {
    let mut s = [0.0; 3];
    for n in 1..=max_n {
        let (m, t) = clipped_matches(hyp, reference, n);
        s[0] += m as f64;
        s[1] += t as f64;
        s[2] += reference.len().saturating_sub(n - 1) as f64;
    }
    s
}

pub(crate) fn gleu_from_stats(s: &[f64]) -> f64 {
    if s[1] == 0.0 || s[2] == 0.0 {
        return 0.0;
    }
    (s[0] / s[1]).min(s[0] / s[2])
}

/// Sentence GLEU: min(precision, recall) over all n-grams of order
/// `1..=max_ngram`.
pub fn gleu<T: Eq + std::hash::Hash>(hyp: &[T], reference: &[T], cfg: &MetricConfig) -> f64 {
    if hyp.is_empty() {
        return 0.0;
    }
    gleu_from_stats(&gleu_stats(hyp, reference, cfg.max_ngram))
}

/// Corpus GLEU with pooled n-gram statistics.
pub fn corpus_gleu<S: AsRef<[String]>>(hyps: &[S], refs: &[S], cfg: &MetricConfig) -> f64 {
    let mut total = [0.0; 3];
    for (h, r) in hyps.iter().zip(refs) {
        let s = gleu_stats(h.as_ref(), r.as_ref(), cfg.max_ngram);
        for i in 0..3 {
            total[i] += s[i];
        }
    }
    gleu_from_stats(&total)
}
