use std::collections::BTreeMap;

use super::{ReliabilityMatrix, Scale};

#[derive(Clone, Debug, PartialEq)]
pub struct Normalized {
    pub matrix: ReliabilityMatrix,
    /// Raters whose values had zero variance (normalized to 0).
    pub warnings: Vec<String>,
}

/// Per-rater standardization `(v - mean) / sd` with the sample (n - 1)
/// standard deviation over the rater's own values.
pub fn zscore_normalize(m: &ReliabilityMatrix) -> Normalized {
    let mut moments: BTreeMap<String, Option<(f64, f64)>> = BTreeMap::new();
    let mut warnings = Vec::new();
    for (rater, vs) in m.values_by_rater() {
        let n = vs.len() as f64;
        let mean = vs.iter().sum::<f64>() / n;
        let var = if vs.len() > 1 {
            vs.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        if var > 0.0 {
            moments.insert(rater.to_owned(), Some((mean, var.sqrt())));
        } else {
            tracing::warn!(rater, "rater has zero rating variance; normalized values set to 0");
            warnings.push(format!("rater `{rater}` has zero variance; values set to 0"));
            moments.insert(rater.to_owned(), None);
        }
    }
    let matrix = m
        .map_rater_values(|rater, v| match moments[rater] {
            Some((mean, sd)) => (v - mean) / sd,
            None => 0.0,
        })
        .with_scale(Scale::Interval);
    Normalized { matrix, warnings }
}
