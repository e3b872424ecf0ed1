use super::MetricConfig;
use crate::error::{Error, Result};

const MAX_BLOCK: usize = 10;

/// Word-level Levenshtein distance (unit costs).
pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

fn contains_phrase<T: PartialEq>(haystack: &[T], needle: &[T]) -> bool {
    needle.len() <= haystack.len() && haystack.windows(needle.len()).any(|w| w == needle)
}

/// Moves `hyp[start..start + len]` so that it begins at `dest` in the
/// sequence left after removing it.
pub(crate) fn apply_shift<T: Clone>(hyp: &[T], start: usize, len: usize, dest: usize) -> Vec<T> {
    let block = &hyp[start..start + len];
    let mut rest: Vec<T> = hyp[..start].iter().chain(&hyp[start + len..]).cloned().collect();
    let tail = rest.split_off(dest);
    rest.extend_from_slice(block);
    rest.extend(tail);
    rest
}

/// Number of edits (shifts plus word edits) needed to turn `hyp` into
/// `reference`. Shifts are chosen greedily: the single block move that
/// minimizes the remaining edit distance is taken while it strictly
/// reduces it.
pub fn ter_edits<T: PartialEq + Clone>(hyp: &[T], reference: &[T], cfg: &MetricConfig) -> usize {
    let mut cur = hyp.to_vec();
    let mut dist = edit_distance(&cur, reference);
    let mut shifts = 0;
    if !cfg.ter_enable_shifts {
        return dist;
    }
    while dist > 0 {
        let mut best: Option<(usize, Vec<T>)> = None;
        for start in 0..cur.len() {
            for len in 1..=MAX_BLOCK.min(cur.len() - start) {
                let block = &cur[start..start + len];
                if !contains_phrase(reference, block) {
                    break;
                }
                let rest_len = cur.len() - len;
                let lo = start.saturating_sub(cfg.ter_max_shift_distance);
                let hi = (start + cfg.ter_max_shift_distance).min(rest_len);
                for dest in lo..=hi {
                    if dest == start {
                        continue;
                    }
                    let cand = apply_shift(&cur, start, len, dest);
                    let d = edit_distance(&cand, reference);
                    if d < best.as_ref().map_or(dist, |b| b.0) {
                        best = Some((d, cand));
                    }
                }
            }
        }
        match best {
            Some((d, cand)) => {
                cur = cand;
                dist = d;
                shifts += 1;
            }
            None => break,
        }
    }
    shifts + dist
}

/// Translation edit rate: edits divided by reference length.
pub fn ter<T: PartialEq + Clone>(hyp: &[T], reference: &[T], cfg: &MetricConfig) -> Result<f64> {
    if reference.is_empty() {
        return Err(Error::invalid("TER is undefined for an empty reference"));
    }
    Ok(ter_edits(hyp, reference, cfg) as f64 / reference.len() as f64)
}

/// Total edits over total reference length.
pub fn corpus_ter<S: AsRef<[String]>>(hyps: &[S], refs: &[S], cfg: &MetricConfig) -> Result<f64> {
    let (mut edits, mut len) = (0usize, 0usize);
    for (h, r) in hyps.iter().zip(refs) {
        edits += ter_edits(h.as_ref(), r.as_ref(), cfg);
        len += r.as_ref().len();
    }
    if len == 0 {
        return Err(Error::invalid("TER is undefined for empty references"));
    }
    Ok(edits as f64 / len as f64)
}
