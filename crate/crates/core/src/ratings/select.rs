use std::cmp::Ordering;
use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{ItemPair, SystemTag, TranslationItem};
use crate::error::{Error, Result};
use crate::metrics::{chrf, MetricConfig};
use crate::text::Sentence;

/// Maximum relative target-length difference for a pair to be eligible.
pub const MAX_RELATIVE_LENGTH_DIFF: f64 = 0.10;

/// Out-of-domain and in-domain translations of one source with its
/// reference.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidatePair {
    pub pair_id: String,
    pub source: Sentence,
    pub out_domain: Sentence,
    pub in_domain: Sentence,
    pub reference: Sentence,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoredCandidate {
    pub pair_id: String,
    pub delta_chrf: f64,
    pub delta_len: usize,
}

fn selection_order(a: &ScoredCandidate, b: &ScoredCandidate) -> Ordering {
    b.delta_chrf
        .total_cmp(&a.delta_chrf)
        .then(a.delta_len.cmp(&b.delta_len))
        .then_with(|| a.pair_id.cmp(&b.pair_id))
}

/// Orders candidates by chrF difference (descending), then length
/// difference (ascending), then pair id.
pub fn rank_candidates(mut scored: Vec<ScoredCandidate>) -> Vec<ScoredCandidate> {
    scored.sort_by(selection_order);
    scored
}

fn relative_len_diff(a: &Sentence, b: &Sentence) -> f64 {
    let (la, lb) = (a.len() as f64, b.len() as f64);
    (la - lb).abs() / la.max(lb)
}

/// Picks the `n_select` pairs of similar length but most different quality.
///
/// Pairs are kept when the reference has `len_lo..=len_hi` tokens, the two
/// translations differ, and their token lengths differ by at most 10%.
pub fn select_rating_items(
    pairs: &[CandidatePair],
    n_select: usize,
    len_lo: usize,
    len_hi: usize,
    cfg: &MetricConfig,
) -> Result<Vec<ItemPair>> {
    let mut ids = HashSet::new();
    for p in pairs {
        if !ids.insert(p.pair_id.as_str()) {
            return Err(Error::invalid(format!("duplicate pair id `{}`", p.pair_id)));
        }
    }
    let eligible: Vec<&CandidatePair> = pairs
        .iter()
        .filter(|p| (len_lo..=len_hi).contains(&p.reference.len()))
        .filter(|p| p.out_domain != p.in_domain)
        .filter(|p| !p.out_domain.is_empty() && !p.in_domain.is_empty())
        .filter(|p| relative_len_diff(&p.out_domain, &p.in_domain) <= MAX_RELATIVE_LENGTH_DIFF)
        .collect();
    if eligible.len() < n_select {
        return Err(Error::Shortage {
            total: pairs.len(),
            eligible: eligible.len(),
            requested: n_select,
        });
    }
    let scored: Vec<ScoredCandidate> = eligible
        .iter()
        .map(|p| ScoredCandidate {
            pair_id: p.pair_id.clone(),
            delta_chrf: (chrf(p.out_domain.tokens(), p.reference.tokens(), cfg)
                - chrf(p.in_domain.tokens(), p.reference.tokens(), cfg))
            .abs(),
            delta_len: p.out_domain.len().abs_diff(p.in_domain.len()),
        })
        .collect();
    let ranked = rank_candidates(scored);
    let by_id: std::collections::HashMap<&str, &CandidatePair> =
        eligible.iter().map(|p| (p.pair_id.as_str(), *p)).collect();
    Ok(ranked
        .into_iter()
        .take(n_select)
        .map(|s| {
            let p = by_id[s.pair_id.as_str()];
            ItemPair {
                pair_id: p.pair_id.clone(),
                source: p.source.clone(),
                target_a: p.out_domain.clone(),
                target_b: p.in_domain.clone(),
                reference: Some(p.reference.clone()),
            }
        })
        .collect())
}

/// Splits pairs into individual translations with ids `<pair>/a` and
/// `<pair>/b`.
pub fn items_from_pairs(pairs: &[ItemPair]) -> Vec<TranslationItem> {
    pairs
        .iter()
        .flat_map(|p| {
            [
                (format!("{}/a", p.pair_id), &p.target_a, SystemTag::OutDomain),
                (format!("{}/b", p.pair_id), &p.target_b, SystemTag::InDomain),
            ]
            .into_iter()
            .map(|(item_id, target, tag)| TranslationItem {
                item_id,
                source: p.source.clone(),
                target: target.clone(),
                system_tag: tag,
                reference: p.reference.clone(),
            })
        })
        .collect()
}
