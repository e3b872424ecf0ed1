use std::collections::BTreeMap;

use super::{krippendorff_alpha, ReliabilityMatrix, ReliabilityReport, Scale};
use crate::error::{Error, Result};
use crate::ratings::{RatingRecord, SessionPlan, TaskKind};

/// Self-consistency of one rater: alpha over a two-row matrix (first vs
/// second occurrence) of the plan's repeated units. Interval scale for
/// cardinal plans, ordinal for pairwise.
pub fn intra_rater_alpha(records: &[RatingRecord], plan: &SessionPlan) -> Result<ReliabilityReport> {
    if let Some(first) = records.first() {
        if records.iter().any(|r| r.rater_id != first.rater_id) {
            return Err(Error::invalid("intra-rater alpha expects records of a single rater"));
        }
    }
    let mut occ: BTreeMap<&str, [Option<f64>; 2]> = BTreeMap::new();
    for r in records.iter().filter(|r| r.task_kind == plan.task_kind) {
        if plan.repeat_pool.contains(&r.id) && r.occurrence < 2 {
            occ.entry(&r.id).or_default()[r.occurrence as usize] = Some(r.value.numeric());
        }
    }
    let scale = match plan.task_kind {
        TaskKind::Cardinal => Scale::Interval,
        TaskKind::Pairwise => Scale::Ordinal,
    };
    let mut m = ReliabilityMatrix::new(scale);
    let mut usable = 0;
    for (id, [a, b]) in occ {
        if let (Some(a), Some(b)) = (a, b) {
            m.add("first", id, a)?;
            m.add("second", id, b)?;
            usable += 1;
        }
    }
    if usable < 2 {
        return Err(Error::UndefinedAlpha(format!(
            "only {usable} repeated units were rated twice"
        )));
    }
    krippendorff_alpha(&m)
}

/// Intra-rater alpha for every rater appearing in `records`; raters whose
/// alpha is undefined are omitted.
pub fn intra_rater_alphas(records: &[RatingRecord], plan: &SessionPlan) -> BTreeMap<String, f64> {
    let mut by_rater: BTreeMap<&str, Vec<RatingRecord>> = BTreeMap::new();
    for r in records {
        by_rater.entry(&r.rater_id).or_default().push(r.clone());
    }
    by_rater
        .into_iter()
        .filter_map(|(rater, recs)| {
            intra_rater_alpha(&recs, plan)
                .ok()
                .map(|rep| (rater.to_owned(), rep.alpha))
        })
        .collect()
}

/// Alpha for every pair of raters, restricted to the two raters' values.
/// Pairs without a shared unit are skipped.
pub fn rater_pair_alphas(m: &ReliabilityMatrix) -> Vec<f64> {
    let raters = m.raters();
    let mut out = Vec::new();
    for i in 0..raters.len() {
        for j in i + 1..raters.len() {
            let keep = [raters[i].as_str(), raters[j].as_str()].into_iter().collect();
            if let Ok(r) = krippendorff_alpha(&m.retain_raters(&keep)) {
                out.push(r.alpha);
            }
        }
    }
    out
}
