//! Rating corpus construction: item selection, session plans with
//! controlled repetition, and the persistent record formats.

mod jsonl;
mod select;
mod sessions;

use serde::{Deserialize, Serialize};

pub use jsonl::{export_jsonl, import_jsonl, read_jsonl_file, write_jsonl_file};
pub use select::{items_from_pairs, rank_candidates, select_rating_items, CandidatePair, ScoredCandidate};
pub use sessions::{build_sections, build_sections_cardinal, build_sections_pairwise, Assignment, PlanLine, SessionPlan};

use crate::error::{Error, Result};
use crate::text::Sentence;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Cardinal,
    Pairwise,
}

impl std::str::FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cardinal" | "5-point" => Ok(TaskKind::Cardinal),
            "pairwise" => Ok(TaskKind::Pairwise),
            _ => Err(Error::invalid(format!("unknown task kind `{s}`"))),
        }
    }
}

impl std::fmt::Display for TaskKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TaskKind::Cardinal => "cardinal",
            TaskKind::Pairwise => "pairwise",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemTag {
    OutDomain,
    InDomain,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranslationItem {
    pub item_id: String,
    pub source: Sentence,
    pub target: Sentence,
    pub system_tag: SystemTag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<Sentence>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemPair {
    pub pair_id: String,
    pub source: Sentence,
    pub target_a: Sentence,
    pub target_b: Sentence,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<Sentence>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preference {
    PreferA,
    NoPreference,
    PreferB,
}

/// A rater's answer: a 1..=5 score or a pairwise preference.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RatingValue {
    Score(u8),
    Preference(Preference),
}

impl RatingValue {
    pub fn validate(&self, kind: TaskKind) -> Result<()> {
        match (kind, self) {
            (TaskKind::Cardinal, RatingValue::Score(s)) if (1..=5).contains(s) => Ok(()),
            (TaskKind::Cardinal, RatingValue::Score(s)) => {
                Err(Error::Validation(format!("score {s} outside 1..=5")))
            }
            (TaskKind::Pairwise, RatingValue::Preference(_)) => Ok(()),
            (kind, v) => Err(Error::Validation(format!("value {v:?} is not legal for a {kind} task"))),
        }
    }

    /// Scores map to themselves; preferences to -1 (a), 0 (none), +1 (b).
    pub fn numeric(&self) -> f64 {
        match self {
            RatingValue::Score(s) => f64::from(*s),
            RatingValue::Preference(Preference::PreferA) => -1.0,
            RatingValue::Preference(Preference::NoPreference) => 0.0,
            RatingValue::Preference(Preference::PreferB) => 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RatingRecord {
    pub rater_id: String,
    /// Item id (cardinal) or pair id (pairwise).
    pub id: String,
    pub occurrence: u8,
    pub task_kind: TaskKind,
    pub value: RatingValue,
    pub section_index: usize,
    /// Milliseconds since the Unix epoch.
    pub timestamp: u64,
}

impl RatingRecord {
    pub fn validate(&self) -> Result<()> {
        if self.rater_id.is_empty() || self.id.is_empty() {
            return Err(Error::Validation("rater and assignment ids must be non-empty".into()));
        }
        if self.occurrence > 1 {
            return Err(Error::Validation("occurrence index must be 0 or 1".into()));
        }
        self.value.validate(self.task_kind)
    }

    pub fn key(&self) -> (&str, &str, u8) {
        (&self.rater_id, &self.id, self.occurrence)
    }
}
