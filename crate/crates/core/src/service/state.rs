use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::prepare_cardinal_targets;
use crate::policy::{FeedbackEntry, FeedbackLog};
use crate::ratings::{ItemPair, RatingRecord, SessionPlan, TaskKind, TranslationItem};
use crate::reliability::{ReliabilityMatrix, RepeatPolicy};
use crate::text::Sentence;

/// One line of the append-only service log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum LogEvent {
    Rating(RatingRecord),
    Difficulty { rater_id: String, score: u8, timestamp: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RaterSession {
    pub rater_id: String,
    pub task_kind: TaskKind,
    /// Index of the next assignment in plan order.
    pub cursor: usize,
    pub difficulty_score: Option<u8>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TaskContent {
    Item { source: Sentence, target: Sentence },
    Pair { source: Sentence, target_a: Sentence, target_b: Sentence },
}

/// What `next` hands to a rater. References are never included.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum NextTask {
    Task {
        task_kind: TaskKind,
        index: usize,
        total: usize,
        section: usize,
        position: usize,
        section_size: usize,
        id: String,
        occurrence: u8,
        content: TaskContent,
    },
    Done { total: usize, difficulty_submitted: bool },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Progress {
    pub completed: usize,
    pub total: usize,
    /// Section of the next assignment; `None` once done.
    pub section: Option<usize>,
    pub done: bool,
}

/// In-memory service state; always the fold of the event log.
#[derive(Clone, Debug)]
pub struct ServiceState {
    plans: HashMap<TaskKind, SessionPlan>,
    items: HashMap<String, TranslationItem>,
    pairs: HashMap<String, ItemPair>,
    sessions: BTreeMap<String, RaterSession>,
    records: Vec<RatingRecord>,
    seen: HashSet<(String, String, u8)>,
}

impl ServiceState {
    /// `raters` maps rater id to task kind. Every plan id must resolve to an
    /// item or pair.
    pub fn new(
        plans: HashMap<TaskKind, SessionPlan>,
        items: Vec<TranslationItem>,
        pairs: Vec<ItemPair>,
        raters: &[(String, TaskKind)],
    ) -> Result<Self> {
        let items: HashMap<_, _> = items.into_iter().map(|i| (i.item_id.clone(), i)).collect();
        let pairs: HashMap<_, _> = pairs.into_iter().map(|p| (p.pair_id.clone(), p)).collect();
        for (kind, plan) in &plans {
            plan.validate()?;
            if plan.task_kind != *kind {
                return Err(Error::Validation(format!("plan registered as {kind} holds {} tasks", plan.task_kind)));
            }
            for (_, a) in plan.iter() {
                let known = match kind {
                    TaskKind::Cardinal => items.contains_key(&a.id),
                    TaskKind::Pairwise => pairs.contains_key(&a.id),
                };
                if !known {
                    return Err(Error::Validation(format!("plan refers to unknown {kind} id `{}`", a.id)));
                }
            }
        }
        let mut sessions = BTreeMap::new();
        for (id, kind) in raters {
            if !plans.contains_key(kind) {
                return Err(Error::Validation(format!("rater `{id}` needs a {kind} plan")));
            }
            let s = RaterSession { rater_id: id.clone(), task_kind: *kind, cursor: 0, difficulty_score: None };
            if sessions.insert(id.clone(), s).is_some() {
                return Err(Error::Duplicate(format!("rater `{id}` configured twice")));
            }
        }
        Ok(ServiceState { plans, items, pairs, sessions, records: vec![], seen: HashSet::new() })
    }

    fn session(&self, rater: &str) -> Result<&RaterSession> {
        self.sessions.get(rater).ok_or_else(|| Error::NotFound(format!("unknown rater `{rater}`")))
    }

    fn plan(&self, kind: TaskKind) -> &SessionPlan {
        &self.plans[&kind]
    }

    pub fn sessions(&self) -> impl Iterator<Item = &RaterSession> {
        self.sessions.values()
    }

    pub fn records(&self) -> &[RatingRecord] {
        &self.records
    }

    pub fn next_task(&self, rater: &str) -> Result<NextTask> {
        let s = self.session(rater)?;
        let plan = self.plan(s.task_kind);
        let Some((section, position, a)) = plan.get(s.cursor) else {
            return Ok(NextTask::Done { total: plan.total(), difficulty_submitted: s.difficulty_score.is_some() });
        };
        let content = match s.task_kind {
            TaskKind::Cardinal => {
                let i = &self.items[&a.id];
                TaskContent::Item { source: i.source.clone(), target: i.target.clone() }
            }
            TaskKind::Pairwise => {
                let p = &self.pairs[&a.id];
                TaskContent::Pair { source: p.source.clone(), target_a: p.target_a.clone(), target_b: p.target_b.clone() }
            }
        };
        Ok(NextTask::Task {
            task_kind: s.task_kind,
            index: s.cursor,
            total: plan.total(),
            section,
            position,
            section_size: plan.sections[section].len(),
            id: a.id.clone(),
            occurrence: a.occurrence,
            content,
        })
    }

    pub fn progress(&self, rater: &str) -> Result<Progress> {
        let s = self.session(rater)?;
        let plan = self.plan(s.task_kind);
        Ok(Progress {
            completed: s.cursor,
            total: plan.total(),
            section: plan.get(s.cursor).map(|g| g.0),
            done: s.cursor >= plan.total(),
        })
    }

    /// Checks an event without changing anything.
    pub fn check(&self, ev: &LogEvent) -> Result<()> {
        match ev {
            LogEvent::Rating(r) => {
                let s = self.session(&r.rater_id)?;
                if self.seen.contains(&(r.rater_id.clone(), r.id.clone(), r.occurrence)) {
                    return Err(Error::Duplicate(format!(
                        "rating for `{}` (occurrence {}) already recorded",
                        r.id, r.occurrence
                    )));
                }
                r.validate()?;
                if r.task_kind != s.task_kind {
                    return Err(Error::Validation(format!("rater `{}` works on {} tasks", r.rater_id, s.task_kind)));
                }
                let plan = self.plan(s.task_kind);
                let Some((section, _, a)) = plan.get(s.cursor) else {
                    return Err(Error::Validation("session already complete".into()));
                };
                if a.id != r.id || a.occurrence != r.occurrence || section != r.section_index {
                    return Err(Error::Validation(format!(
                        "out of order: expected `{}` occurrence {} in section {}",
                        a.id, a.occurrence, section
                    )));
                }
                Ok(())
            }
            LogEvent::Difficulty { rater_id, score, .. } => {
                let s = self.session(rater_id)?;
                if !(1..=10).contains(score) {
                    return Err(Error::Validation(format!("difficulty {score} outside 1..=10")));
                }
                if s.difficulty_score.is_some() {
                    return Err(Error::Duplicate("difficulty already recorded".into()));
                }
                if s.cursor < self.plan(s.task_kind).total() {
                    return Err(Error::Validation("difficulty is asked after the last task".into()));
                }
                Ok(())
            }
        }
    }

    pub fn apply(&mut self, ev: LogEvent) -> Result<()> {
        self.check(&ev)?;
        match ev {
            LogEvent::Rating(r) => {
                self.seen.insert((r.rater_id.clone(), r.id.clone(), r.occurrence));
                self.sessions.get_mut(&r.rater_id).expect("checked").cursor += 1;
                self.records.push(r);
            }
            LogEvent::Difficulty { rater_id, score, .. } => {
                self.sessions.get_mut(&rater_id).expect("checked").difficulty_score = Some(score);
            }
        }
        Ok(())
    }

    pub fn export_matrix(&self, kind: TaskKind) -> Result<ReliabilityMatrix> {
        ReliabilityMatrix::from_records(&self.records, kind, RepeatPolicy::AllOccurrences)
    }

    /// Cardinal ratings turned into rewarded translations.
    pub fn export_feedback_log(&self) -> Result<FeedbackLog> {
        let m = self.export_matrix(TaskKind::Cardinal)?;
        if m.is_empty() {
            return Ok(FeedbackLog::default());
        }
        let targets = prepare_cardinal_targets(&m)?;
        let entries = targets
            .targets
            .into_iter()
            .map(|(id, reward)| {
                let item = &self.items[&id];
                FeedbackEntry { source: item.source.clone(), translation: item.target.clone(), reward }
            })
            .collect();
        FeedbackLog::new(entries)
    }
}
