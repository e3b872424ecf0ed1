use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{krippendorff_alpha, ReliabilityMatrix};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterPoint {
    pub threshold: f64,
    /// `None` when nothing usable survives the filter.
    pub alpha: Option<f64>,
    /// Raters (consistency filter) or units (variance filter) kept.
    pub retained: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FilterCurve {
    pub points: Vec<FilterPoint>,
}

impl FilterCurve {
    /// Tab-separated `threshold alpha retained` rows with a header;
    /// undefined alphas print as `NA`.
    pub fn to_table(&self) -> String {
        let mut out = String::from("threshold\talpha\tretained\n");
        for p in &self.points {
            let a = p.alpha.map_or_else(|| "NA".to_owned(), |a| format!("{a:.6}"));
            out.push_str(&format!("{:.4}\t{a}\t{}\n", p.threshold, p.retained));
        }
        out
    }

    /// First point whose retained count is at least `min_retained`,
    /// scanning from the strictest threshold.
    pub fn strictest_with_at_least(&self, min_retained: usize) -> Option<&FilterPoint> {
        self.points.iter().rev().find(|p| p.retained >= min_retained)
    }
}

fn check_grid(thresholds: &[f64]) -> Result<()> {
    if thresholds.is_empty() {
        return Err(Error::invalid("threshold grid is empty"));
    }
    if thresholds.iter().any(|t| !t.is_finite()) || thresholds.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("thresholds must be finite and strictly increasing"));
    }
    Ok(())
}

fn alpha_or_none(m: &ReliabilityMatrix) -> Result<Option<f64>> {
    match krippendorff_alpha(m) {
        Ok(r) => Ok(Some(r.alpha)),
        Err(Error::UndefinedAlpha(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Inter-rater alpha after dropping raters whose intra-rater alpha is below
/// each threshold. A threshold of 0 or below keeps every rater; above 0,
/// raters without an intra-rater alpha are dropped.
pub fn consistency_filter_sweep(
    m: &ReliabilityMatrix,
    intra: &BTreeMap<String, f64>,
    thresholds: &[f64],
) -> Result<FilterCurve> {
    check_grid(thresholds)?;
    let mut points = Vec::with_capacity(thresholds.len());
    for &t in thresholds {
        let keep: BTreeSet<&str> = m
            .raters()
            .iter()
            .map(String::as_str)
            .filter(|r| t <= 0.0 || intra.get(*r).is_some_and(|a| *a >= t))
            .collect();
        let sub = if t <= 0.0 { m.clone() } else { m.retain_raters(&keep) };
        points.push(FilterPoint {
            threshold: t,
            alpha: alpha_or_none(&sub)?,
            retained: keep.len(),
        });
    }
    Ok(FilterCurve { points })
}

fn sample_variance(vs: &[f64]) -> f64 {
    let n = vs.len() as f64;
    let mean = vs.iter().sum::<f64>() / n;
    vs.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
}

/// Per-unit agreement score `1 - v~` where `v~` is the unit's sample
/// variance min-max scaled to `[0, 1]` over units with two or more values.
pub fn unit_agreement_scores(m: &ReliabilityMatrix) -> Vec<(String, f64)> {
    let vars: Vec<(String, f64)> = m
        .values_by_unit()
        .into_iter()
        .filter(|(_, vs)| vs.len() >= 2)
        .map(|(u, vs)| (u.to_owned(), sample_variance(&vs)))
        .collect();
    let lo = vars.iter().map(|v| v.1).fold(f64::INFINITY, f64::min);
    let hi = vars.iter().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max);
    vars.into_iter()
        .map(|(u, v)| {
            let norm = if hi > lo { (v - lo) / (hi - lo) } else { 0.0 };
            (u, 1.0 - norm)
        })
        .collect()
}

/// Inter-rater alpha on the units whose agreement score `1 - v~` is at
/// least each threshold.
pub fn item_variance_filter_sweep(m: &ReliabilityMatrix, thresholds: &[f64]) -> Result<FilterCurve> {
    check_grid(thresholds)?;
    let scores = unit_agreement_scores(m);
    let mut points = Vec::with_capacity(thresholds.len());
    for &t in thresholds {
        let keep: BTreeSet<&str> = scores.iter().filter(|s| s.1 >= t).map(|s| s.0.as_str()).collect();
        let sub = m.retain_units(&keep);
        points.push(FilterPoint {
            threshold: t,
            alpha: if keep.is_empty() { None } else { alpha_or_none(&sub)? },
            retained: keep.len(),
        });
    }
    Ok(FilterCurve { points })
}

/// `n + 1` evenly spaced thresholds over `[0, 1]`.
pub fn unit_grid(n: usize) -> Vec<f64> {
    (0..=n).map(|i| i as f64 / n as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reliability::Scale;

    fn toy() -> ReliabilityMatrix {
        ReliabilityMatrix::from_rows(
            Scale::Interval,
            &[
                vec![Some(1.0), Some(2.0), Some(3.0), Some(4.0), Some(5.0)],
                vec![Some(1.0), Some(2.0), Some(3.0), Some(5.0), Some(1.0)],
                vec![Some(2.0), Some(2.0), Some(4.0), Some(4.0), Some(5.0)],
            ],
        )
        .unwrap()
    }

    #[test]
    fn zero_threshold_is_a_no_op() {
        let m = toy();
        let base = krippendorff_alpha(&m).unwrap().alpha;
        let intra: BTreeMap<String, f64> = [("r0".to_owned(), -0.2)].into_iter().collect();
        let c = consistency_filter_sweep(&m, &intra, &[0.0, 0.5]).unwrap();
        assert_eq!(c.points[0].alpha, Some(base));
        assert_eq!(c.points[0].retained, 3);
        // r1, r2 lack an intra alpha and r0 is below 0.5
        assert_eq!(c.points[1].retained, 0);
        assert_eq!(c.points[1].alpha, None);
        let v = item_variance_filter_sweep(&m, &[0.0, 1.0]).unwrap();
        assert_eq!(v.points[0].alpha, Some(base));
    }

    #[test]
    fn grid_must_increase() {
        let m = toy();
        assert!(item_variance_filter_sweep(&m, &[0.5, 0.5]).is_err());
        assert!(item_variance_filter_sweep(&m, &[]).is_err());
    }

    #[test]
    fn dropping_noisy_unit_raises_alpha() {
        let m = toy();
        let base = krippendorff_alpha(&m).unwrap().alpha;
        let c = item_variance_filter_sweep(&m, &unit_grid(10)).unwrap();
        let best = c.points.iter().filter_map(|p| p.alpha).fold(f64::MIN, f64::max);
        assert!(best > base);
        assert!(c.points.windows(2).all(|w| w[0].retained >= w[1].retained));
    }

    #[test]
    fn table_has_header_and_rows() {
        let c = item_variance_filter_sweep(&toy(), &[0.0, 0.5]).unwrap();
        let t = c.to_table();
        assert!(t.starts_with("threshold\talpha\tretained\n"));
        assert_eq!(t.lines().count(), 3);
    }
}
