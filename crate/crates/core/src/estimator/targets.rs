use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{sbleu, MetricConfig};
use crate::ratings::{ItemPair, Preference, RatingRecord, RatingValue, TaskKind, TranslationItem};
use crate::reliability::{zscore_normalize, ReliabilityMatrix, RepeatPolicy};
use crate::text::Sentence;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardExample {
    pub source: Sentence,
    pub target: Sentence,
    pub reward: f64,
}

impl RewardExample {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.reward) {
            return Err(Error::invalid(format!("reward {} outside [0, 1]", self.reward)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreferencePair {
    pub source: Sentence,
    pub target_1: Sentence,
    pub target_2: Sentence,
    pub q: f64,
}

impl PreferencePair {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.q) {
            return Err(Error::invalid(format!("preference probability {} outside [0, 1]", self.q)));
        }
        if self.target_1 == self.target_2 {
            return Err(Error::invalid("preference pair has identical targets"));
        }
        Ok(())
    }
}

/// Bradley-Terry probability from sBLEU: `e^s1 / (e^s1 + e^s2)`.
pub fn simulated_q(y1: &Sentence, y2: &Sentence, reference: &Sentence, cfg: &MetricConfig) -> f64 {
    let s1 = sbleu(y1.tokens(), reference.tokens(), cfg);
    let s2 = sbleu(y2.tokens(), reference.tokens(), cfg);
    q_from_scores(s1, s2)
}

pub fn q_from_scores(s1: f64, s2: f64) -> f64 {
    1.0 / (1.0 + (s2 - s1).exp())
}

/// Relative frequency of the first target winning, ties counted half.
pub fn human_q(prefer_1: u32, prefer_2: u32, ties: u32) -> Result<f64> {
    let total = prefer_1 + prefer_2 + ties;
    if total == 0 {
        return Err(Error::invalid("no judgments for this pair"));
    }
    Ok((prefer_1 as f64 + ties as f64 / 2.0) / total as f64)
}

/// Pools every rater's pairwise judgments per pair id into one `q` for
/// `target_a` over `target_b`.
pub fn aggregate_preferences(records: &[RatingRecord]) -> Result<BTreeMap<String, f64>> {
    let mut counts: BTreeMap<&str, [u32; 3]> = BTreeMap::new();
    for r in records {
        if let RatingValue::Preference(p) = r.value {
            let c = counts.entry(&r.id).or_default();
            match p {
                Preference::PreferA => c[0] += 1,
                Preference::PreferB => c[1] += 1,
                Preference::NoPreference => c[2] += 1,
            }
        }
    }
    counts
        .into_iter()
        .map(|(id, [a, b, t])| Ok((id.to_owned(), human_q(a, b, t)?)))
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct CardinalTargets {
    /// `(unit, reward)` in unit order.
    pub targets: Vec<(String, f64)>,
    pub warnings: Vec<String>,
}

/// Per-rater standardization, mean over raters per unit, then min-max
/// scaling of the unit means onto `[0, 1]`.
pub fn prepare_cardinal_targets(m: &ReliabilityMatrix) -> Result<CardinalTargets> {
    if m.is_empty() {
        return Err(Error::invalid("no ratings to prepare targets from"));
    }
    let norm = zscore_normalize(m);
    let mut warnings = norm.warnings;
    let means: Vec<(String, f64)> = norm
        .matrix
        .values_by_unit()
        .into_iter()
        .map(|(u, vs)| (u.to_owned(), vs.iter().sum::<f64>() / vs.len() as f64))
        .collect();
    let lo = means.iter().map(|m| m.1).fold(f64::INFINITY, f64::min);
    let hi = means.iter().map(|m| m.1).fold(f64::NEG_INFINITY, f64::max);
    let targets = if hi > lo {
        means.into_iter().map(|(u, v)| (u, (v - lo) / (hi - lo))).collect()
    } else {
        tracing::warn!("all item means are equal; targets set to 0.5");
        warnings.push("all item means are equal; targets set to 0.5".into());
        means.into_iter().map(|(u, _)| (u, 0.5)).collect()
    };
    Ok(CardinalTargets { targets, warnings })
}

/// Estimator supervision from human ratings: cardinal ratings become
/// normalized rewards over `items`, pairwise ratings become pooled
/// preferences over `pairs`. Ids missing from the lookup are an error.
pub fn human_estimator_data(
    records: &[RatingRecord],
    items: &[TranslationItem],
    pairs: &[ItemPair],
) -> Result<super::EstimatorData> {
    let mut data = super::EstimatorData::default();
    let card: Vec<RatingRecord> = records.iter().filter(|r| r.task_kind == TaskKind::Cardinal).cloned().collect();
    if !card.is_empty() {
        let by_id: BTreeMap<&str, &TranslationItem> = items.iter().map(|i| (i.item_id.as_str(), i)).collect();
        let m = ReliabilityMatrix::from_records(&card, TaskKind::Cardinal, RepeatPolicy::AllOccurrences)?;
        for (id, reward) in prepare_cardinal_targets(&m)?.targets {
            let it = by_id.get(id.as_str()).ok_or_else(|| Error::NotFound(format!("item `{id}`")))?;
            data.rewards.push(RewardExample { source: it.source.clone(), target: it.target.clone(), reward });
        }
    }
    let by_id: BTreeMap<&str, &ItemPair> = pairs.iter().map(|p| (p.pair_id.as_str(), p)).collect();
    for (id, q) in aggregate_preferences(records)? {
        let p = by_id.get(id.as_str()).ok_or_else(|| Error::NotFound(format!("pair `{id}`")))?;
        let pref = PreferencePair { source: p.source.clone(), target_1: p.target_a.clone(), target_2: p.target_b.clone(), q };
        pref.validate()?;
        data.prefs.push(pref);
    }
    Ok(data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reliability::Scale;

    #[test]
    fn simulated_q_values() {
        let cfg = MetricConfig::default();
        let r = Sentence::parse("a b c d");
        assert_eq!(simulated_q(&r, &r, &r, &cfg), 0.5);
        let e = std::f64::consts::E;
        assert!((q_from_scores(1.0, 0.0) - e / (e + 1.0)).abs() < 1e-15);
        let y = Sentence::parse("a b x d");
        assert!((simulated_q(&r, &y, &r, &cfg) + simulated_q(&y, &r, &r, &cfg) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn human_q_cases() {
        assert_eq!(human_q(3, 1, 0).unwrap(), 0.75);
        assert_eq!(human_q(0, 0, 4).unwrap(), 0.5);
        assert!(human_q(0, 0, 0).is_err());
    }

    #[test]
    fn cardinal_targets_hand_case() {
        let mut m = ReliabilityMatrix::new(Scale::Interval);
        m.add("r", "x", 1.0).unwrap();
        m.add("r", "y", 5.0).unwrap();
        let t = prepare_cardinal_targets(&m).unwrap();
        assert_eq!(t.targets, vec![("x".to_owned(), 0.0), ("y".to_owned(), 1.0)]);
    }

    #[test]
    fn constant_ratings_give_half() {
        let mut m = ReliabilityMatrix::new(Scale::Interval);
        for u in ["x", "y", "z"] {
            m.add("r", u, 3.0).unwrap();
        }
        let t = prepare_cardinal_targets(&m).unwrap();
        assert!(t.targets.iter().all(|(_, v)| *v == 0.5));
        assert!(!t.warnings.is_empty());
    }

    #[test]
    fn human_data_from_ratings() {
        use crate::ratings::SystemTag;
        let rec = |rater: &str, id: &str, kind, value| RatingRecord {
            rater_id: rater.into(),
            id: id.into(),
            occurrence: 0,
            task_kind: kind,
            value,
            section_index: 0,
            timestamp: 0,
        };
        let items: Vec<TranslationItem> = ["a", "b"]
            .iter()
            .map(|id| TranslationItem {
                item_id: (*id).into(),
                source: Sentence::parse("x"),
                target: Sentence::parse(id),
                system_tag: SystemTag::InDomain,
                reference: None,
            })
            .collect();
        let pairs = vec![ItemPair {
            pair_id: "p".into(),
            source: Sentence::parse("x"),
            target_a: Sentence::parse("a"),
            target_b: Sentence::parse("b"),
            reference: None,
        }];
        let records = vec![
            rec("r", "a", TaskKind::Cardinal, RatingValue::Score(5)),
            rec("r", "b", TaskKind::Cardinal, RatingValue::Score(1)),
            rec("s", "p", TaskKind::Pairwise, RatingValue::Preference(Preference::PreferA)),
            rec("t", "p", TaskKind::Pairwise, RatingValue::Preference(Preference::NoPreference)),
        ];
        let d = human_estimator_data(&records, &items, &pairs).unwrap();
        assert_eq!(d.rewards.len(), 2);
        assert_eq!((d.rewards[0].target.text(), d.rewards[0].reward), ("a".into(), 1.0));
        assert_eq!(d.rewards[1].reward, 0.0);
        assert_eq!(d.prefs[0].q, 0.75);
        assert!(human_estimator_data(&records, &items[..1], &pairs).is_err());
    }
}
