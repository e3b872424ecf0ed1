use serde::{Deserialize, Serialize};

use super::{ReliabilityMatrix, Scale};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityReport {
    pub alpha: f64,
    pub n_units_used: usize,
    pub n_values_used: usize,
    /// Expected disagreement was zero (every pairable value identical);
    /// alpha is reported as 1.
    pub degenerate: bool,
}

/// Krippendorff's alpha, `1 - D_o / D_e`, over the coincidence matrix of
/// all pairable values. Units with fewer than two values are ignored.
pub fn krippendorff_alpha(m: &ReliabilityMatrix) -> Result<ReliabilityReport> {
    let units: Vec<Vec<f64>> = m
        .values_by_unit()
        .into_iter()
        .map(|(_, v)| v)
        .filter(|v| v.len() >= 2)
        .collect();
    if units.is_empty() {
        return Err(Error::UndefinedAlpha("no unit has two or more values".into()));
    }
    let n: usize = units.iter().map(Vec::len).sum();
    let (d_o, d_e) = match m.scale {
        Scale::Interval => interval_disagreements(&units, n),
        Scale::Ordinal | Scale::Nominal => categorical_disagreements(&units, n, m.scale),
    };
    let report = |alpha, degenerate| ReliabilityReport {
        alpha,
        n_units_used: units.len(),
        n_values_used: n,
        degenerate,
    };
    if d_e <= 0.0 {
        return Ok(report(1.0, true));
    }
    Ok(report((1.0 - d_o / d_e).min(1.0), false))
}

/// Closed form for the squared-difference metric: the sum of squared
/// differences over ordered pairs of `k` values is `2k * sum((v - mean)^2)`.
fn interval_disagreements(units: &[Vec<f64>], n: usize) -> (f64, f64) {
    let pair_sum = |vs: &[f64]| {
        let k = vs.len() as f64;
        let mean = vs.iter().sum::<f64>() / k;
        2.0 * k * vs.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
    };
    let n_f = n as f64;
    let d_o = units.iter().map(|u| pair_sum(u) / (u.len() as f64 - 1.0)).sum::<f64>() / n_f;
    let all: Vec<f64> = units.iter().flatten().copied().collect();
    let d_e = pair_sum(&all) / (n_f * (n_f - 1.0));
    (d_o, d_e)
}

fn categorical_disagreements(units: &[Vec<f64>], n: usize, scale: Scale) -> (f64, f64) {
    let mut cats: Vec<f64> = units.iter().flatten().copied().collect();
    cats.sort_by(f64::total_cmp);
    cats.dedup();
    let k = cats.len();
    let index = |v: f64| cats.binary_search_by(|c| c.total_cmp(&v)).expect("value is a category");

    let mut o = vec![vec![0.0; k]; k];
    for u in units {
        let mut cnt = vec![0.0; k];
        for &v in u {
            cnt[index(v)] += 1.0;
        }
        let w = 1.0 / (u.len() as f64 - 1.0);
        for c in 0..k {
            if cnt[c] == 0.0 {
                continue;
            }
            for kk in 0..k {
                let pairs = if c == kk { cnt[c] * (cnt[c] - 1.0) } else { cnt[c] * cnt[kk] };
                o[c][kk] += pairs * w;
            }
        }
    }
    let marg: Vec<f64> = o.iter().map(|row| row.iter().sum()).collect();
    let delta2 = |c: usize, kk: usize| -> f64 {
        match scale {
            Scale::Nominal => f64::from(u8::from(c != kk)),
            Scale::Ordinal => {
                let (lo, hi) = if c <= kk { (c, kk) } else { (kk, c) };
                let s: f64 = marg[lo..=hi].iter().sum::<f64>() - (marg[lo] + marg[hi]) / 2.0;
                s * s
            }
            Scale::Interval => (cats[c] - cats[kk]).powi(2),
        }
    };
    let n_f = n as f64;
    let (mut d_o, mut d_e) = (0.0, 0.0);
    for c in 0..k {
        for kk in 0..k {
            let d = delta2(c, kk);
            d_o += o[c][kk] * d;
            d_e += marg[c] * marg[kk] * d;
        }
    }
    (d_o / n_f, d_e / (n_f * (n_f - 1.0)))
}
