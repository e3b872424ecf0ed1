use std::collections::HashMap;

pub(crate) fn counts<T: Eq + std::hash::Hash>(tokens: &[T], n: usize) -> HashMap<&[T], usize> {
    let mut out = HashMap::new();
    if n == 0 || tokens.len() < n {
        return out;
    }
    for w in tokens.windows(n) {
        *out.entry(w).or_insert(0) += 1;
    }
    out
}

/// Clipped matches of order `n` and the hypothesis n-gram total.
pub(crate) fn clipped_matches<T: Eq + std::hash::Hash>(hyp: &[T], reference: &[T], n: usize) -> (usize, usize) {
    let h = counts(hyp, n);
    let r = counts(reference, n);
    let matches = h
        .iter()
        .map(|(g, &c)| c.min(r.get(g).copied().unwrap_or(0)))
        .sum();
    (matches, hyp.len().saturating_sub(n - 1))
}
