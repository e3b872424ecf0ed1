use std::collections::BTreeMap;

use serde::Serialize;

use super::{
    anova_oneway, consistency_filter_sweep, intra_rater_alphas, item_variance_filter_sweep, krippendorff_alpha,
    rater_pair_alphas, unit_grid, welch_t_test, zscore_normalize, AnovaResult, FilterCurve, ReliabilityMatrix,
    RepeatPolicy, WelchResult,
};
use crate::error::{Error, Result};
use crate::ratings::{RatingRecord, SessionPlan, TaskKind};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IntraSummary {
    pub per_rater: BTreeMap<String, f64>,
    pub mean: Option<f64>,
    pub stdev: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TaskReliability {
    pub n_raters: usize,
    pub n_units: usize,
    pub alpha: Option<f64>,
    /// Cardinal only: alpha after per-rater standardization.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_normalized: Option<f64>,
    pub intra: Option<IntraSummary>,
    pub consistency_curve: Option<FilterCurve>,
    pub item_variance_curve: FilterCurve,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReliabilityAnalysis {
    pub cardinal: Option<TaskReliability>,
    pub pairwise: Option<TaskReliability>,
    /// Intra-rater alphas, cardinal against pairwise.
    pub welch: Option<WelchResult>,
    /// Rater-pair alphas grouped as cardinal raw, cardinal normalized, pairwise.
    pub anova: Option<AnovaResult>,
}

fn alpha_opt(m: &ReliabilityMatrix) -> Result<Option<f64>> {
    match krippendorff_alpha(m) {
        Ok(r) => Ok(Some(r.alpha)),
        Err(Error::UndefinedAlpha(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

fn summarize(per_rater: BTreeMap<String, f64>) -> IntraSummary {
    let v: Vec<f64> = per_rater.values().copied().collect();
    let n = v.len() as f64;
    let mean = (!v.is_empty()).then(|| v.iter().sum::<f64>() / n);
    let stdev = mean.filter(|_| v.len() >= 2).map(|m| (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
    IntraSummary { per_rater, mean, stdev }
}

fn task(records: &[RatingRecord], kind: TaskKind, plan: Option<&SessionPlan>, grid: &[f64]) -> Result<Option<(TaskReliability, ReliabilityMatrix)>> {
    let recs: Vec<RatingRecord> = records.iter().filter(|r| r.task_kind == kind).cloned().collect();
    if recs.is_empty() {
        return Ok(None);
    }
    let raw = ReliabilityMatrix::from_records(&recs, kind, RepeatPolicy::AllOccurrences)?;
    let (analysed, alpha_normalized, warnings) = match kind {
        TaskKind::Cardinal => {
            let n = zscore_normalize(&raw);
            let a = alpha_opt(&n.matrix)?;
            (n.matrix, a, n.warnings)
        }
        TaskKind::Pairwise => (raw.clone(), None, Vec::new()),
    };
    let intra = plan.map(|p| intra_rater_alphas(&recs, p));
    let consistency_curve = match &intra {
        Some(i) => Some(consistency_filter_sweep(&analysed, i, grid)?),
        None => None,
    };
    let rep = TaskReliability {
        n_raters: raw.raters().len(),
        n_units: raw.units().len(),
        alpha: alpha_opt(&raw)?,
        alpha_normalized,
        intra: intra.map(summarize),
        consistency_curve,
        item_variance_curve: item_variance_filter_sweep(&analysed, grid)?,
        warnings,
    };
    Ok(Some((rep, raw)))
}

/// Full reliability analysis over a mixed stream of rating records.
///
/// Filter sweeps run on the standardized matrix for cardinal ratings and on
/// the raw one for pairwise ratings. Intra-rater alphas and the consistency
/// sweep need the plan of the task. `grid_steps` gives `grid_steps + 1`
/// thresholds over `[0, 1]`.
pub fn analyze_reliability(
    records: &[RatingRecord],
    cardinal_plan: Option<&SessionPlan>,
    pairwise_plan: Option<&SessionPlan>,
    grid_steps: usize,
) -> Result<ReliabilityAnalysis> {
    if grid_steps == 0 {
        return Err(Error::invalid("grid needs at least one step"));
    }
    let grid = unit_grid(grid_steps);
    let card = task(records, TaskKind::Cardinal, cardinal_plan, &grid)?;
    let pair = task(records, TaskKind::Pairwise, pairwise_plan, &grid)?;

    let intra_values = |t: &Option<(TaskReliability, ReliabilityMatrix)>| -> Vec<f64> {
        t.as_ref()
            .and_then(|(r, _)| r.intra.as_ref())
            .map(|i| i.per_rater.values().copied().collect())
            .unwrap_or_default()
    };
    let (ia, ib) = (intra_values(&card), intra_values(&pair));
    let welch = if ia.len() >= 2 && ib.len() >= 2 { welch_t_test(&ia, &ib).ok() } else { None };

    let anova = match (&card, &pair) {
        (Some((_, c)), Some((_, p))) => {
            let groups = vec![rater_pair_alphas(c), rater_pair_alphas(&zscore_normalize(c).matrix), rater_pair_alphas(p)];
            if groups.iter().all(|g| g.len() >= 2) {
                anova_oneway(&groups).ok()
            } else {
                None
            }
        }
        _ => None,
    };
    Ok(ReliabilityAnalysis { cardinal: card.map(|c| c.0), pairwise: pair.map(|p| p.0), welch, anova })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratings::{build_sections, Preference, RatingValue};

    fn records(kind: TaskKind, plan: &SessionPlan, raters: usize) -> Vec<RatingRecord> {
        let mut out = Vec::new();
        for r in 0..raters {
            for (section, a) in plan.iter() {
                let k: usize = a.id[1..].parse().unwrap();
                let value = match kind {
                    TaskKind::Cardinal => RatingValue::Score(((k + r * a.occurrence as usize) % 5 + 1) as u8),
                    TaskKind::Pairwise => RatingValue::Preference(if (k + r) % 3 == 0 { Preference::PreferA } else { Preference::PreferB }),
                };
                out.push(RatingRecord {
                    rater_id: format!("{kind}{r}"),
                    id: a.id.clone(),
                    occurrence: a.occurrence,
                    task_kind: kind,
                    value,
                    section_index: section,
                    timestamp: 0,
                });
            }
        }
        out
    }

    fn plan(kind: TaskKind) -> SessionPlan {
        let ids: Vec<String> = (0..12).map(|i| format!("u{i}")).collect();
        build_sections(kind, &ids, &ids[..4], 2, 5).unwrap()
    }

    #[test]
    fn mixed_analysis_has_every_part() {
        let (pc, pp) = (plan(TaskKind::Cardinal), plan(TaskKind::Pairwise));
        let mut recs = records(TaskKind::Cardinal, &pc, 4);
        recs.extend(records(TaskKind::Pairwise, &pp, 3));
        let a = analyze_reliability(&recs, Some(&pc), Some(&pp), 10).unwrap();
        let c = a.cardinal.unwrap();
        assert_eq!((c.n_raters, c.n_units), (4, 12));
        assert_eq!(c.intra.as_ref().unwrap().per_rater["cardinal0"], 1.0);
        assert_eq!(c.item_variance_curve.points.len(), 11);
        let p = a.pairwise.unwrap();
        assert_eq!(p.intra.unwrap().mean, Some(1.0));
        assert!(p.alpha_normalized.is_none());
        assert!(a.anova.is_some());
    }

    #[test]
    fn without_plans_no_intra() {
        let pc = plan(TaskKind::Cardinal);
        let a = analyze_reliability(&records(TaskKind::Cardinal, &pc, 3), None, None, 4).unwrap();
        let c = a.cardinal.unwrap();
        assert!(c.intra.is_none() && c.consistency_curve.is_none());
        assert!(a.pairwise.is_none() && a.welch.is_none() && a.anova.is_none());
    }
}
