use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ItemPair, TaskKind, TranslationItem};
use crate::error::{Error, Result};

/// One served occurrence of an item or pair.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Assignment {
    pub id: String,
    pub occurrence: u8,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionPlan {
    pub task_kind: TaskKind,
    pub sections: Vec<Vec<Assignment>>,
    pub repeat_pool: BTreeSet<String>,
}

/// Flat line-delimited representation of a plan.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanLine {
    pub task_kind: TaskKind,
    pub section: usize,
    pub position: usize,
    pub id: String,
    pub occurrence: u8,
}

impl SessionPlan {
    pub fn total(&self) -> usize {
        self.sections.iter().map(Vec::len).sum()
    }

    /// Assignments in serving order with their section index.
    pub fn iter(&self) -> impl Iterator<Item = (usize, &Assignment)> {
        self.sections
            .iter()
            .enumerate()
            .flat_map(|(s, sec)| sec.iter().map(move |a| (s, a)))
    }

    pub fn get(&self, index: usize) -> Option<(usize, usize, &Assignment)> {
        let mut rest = index;
        for (s, sec) in self.sections.iter().enumerate() {
            if rest < sec.len() {
                return Some((s, rest, &sec[rest]));
            }
            rest -= sec.len();
        }
        None
    }

    pub fn validate(&self) -> Result<()> {
        let mut counts: BTreeMap<&str, Vec<(usize, u8)>> = BTreeMap::new();
        for (s, sec) in self.sections.iter().enumerate() {
            let mut seen = HashSet::new();
            for a in sec {
                if !seen.insert(a.id.as_str()) {
                    return Err(Error::invalid(format!("`{}` occurs twice in section {s}", a.id)));
                }
                counts.entry(&a.id).or_default().push((s, a.occurrence));
            }
        }
        for (id, occ) in &counts {
            let expected = if self.repeat_pool.contains(*id) { 2 } else { 1 };
            if occ.len() != expected {
                return Err(Error::invalid(format!(
                    "`{id}` occurs {} times, expected {expected}",
                    occ.len()
                )));
            }
            let idx: Vec<u8> = occ.iter().map(|o| o.1).collect();
            let want: Vec<u8> = (0..expected as u8).collect();
            if idx != want {
                return Err(Error::invalid(format!("`{id}` has occurrence indices {idx:?}")));
            }
        }
        for id in &self.repeat_pool {
            if !counts.contains_key(id.as_str()) {
                return Err(Error::invalid(format!("repeat `{id}` never occurs")));
            }
        }
        Ok(())
    }

    /// Shuffles the order inside every section; section membership and
    /// occurrence indices are unchanged.
    pub fn reorder_within_sections(&self, seed: u64) -> SessionPlan {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = self.clone();
        for sec in &mut out.sections {
            sec.shuffle(&mut rng);
        }
        out
    }

    pub fn to_lines(&self) -> Vec<PlanLine> {
        self.sections
            .iter()
            .enumerate()
            .flat_map(|(s, sec)| {
                sec.iter().enumerate().map(move |(p, a)| PlanLine {
                    task_kind: self.task_kind,
                    section: s,
                    position: p,
                    id: a.id.clone(),
                    occurrence: a.occurrence,
                })
            })
            .collect()
    }

    pub fn from_lines(lines: &[PlanLine]) -> Result<SessionPlan> {
        let first = lines.first().ok_or_else(|| Error::invalid("empty session plan"))?;
        let task_kind = first.task_kind;
        let n_sections = lines.iter().map(|l| l.section).max().unwrap_or(0) + 1;
        let mut sections: Vec<Vec<(usize, Assignment)>> = vec![Vec::new(); n_sections];
        let mut repeat_pool = BTreeSet::new();
        for l in lines {
            if l.task_kind != task_kind {
                return Err(Error::invalid("plan mixes task kinds"));
            }
            if l.occurrence == 1 {
                repeat_pool.insert(l.id.clone());
            }
            sections[l.section].push((
                l.position,
                Assignment {
                    id: l.id.clone(),
                    occurrence: l.occurrence,
                },
            ));
        }
        let sections = sections
            .into_iter()
            .map(|mut s| {
                s.sort_by_key(|p| p.0);
                s.into_iter().map(|p| p.1).collect()
            })
            .collect();
        let plan = SessionPlan {
            task_kind,
            sections,
            repeat_pool,
        };
        plan.validate()?;
        Ok(plan)
    }
}

/// Lays out `ids` over `n_sections` equally sized sections where every id
/// in `repeats` appears twice, in two different sections, and every other
/// id once.
pub fn build_sections(
    task_kind: TaskKind,
    ids: &[String],
    repeats: &[String],
    n_sections: usize,
    rng_seed: u64,
) -> Result<SessionPlan> {
    if n_sections == 0 {
        return Err(Error::Infeasible("at least one section is required".into()));
    }
    let mut unique = HashSet::new();
    for id in ids {
        if !unique.insert(id.as_str()) {
            return Err(Error::invalid(format!("duplicate id `{id}`")));
        }
    }
    let repeat_set: BTreeSet<String> = repeats.iter().cloned().collect();
    if repeat_set.len() != repeats.len() {
        return Err(Error::invalid("repeat pool contains duplicates"));
    }
    if let Some(r) = repeat_set.iter().find(|r| !unique.contains(r.as_str())) {
        return Err(Error::invalid(format!("repeat `{r}` is not a known id")));
    }
    let total = ids.len() + repeats.len();
    if total % n_sections != 0 {
        return Err(Error::Infeasible(format!(
            "{total} assignments do not divide into {n_sections} sections"
        )));
    }
    if !repeats.is_empty() && n_sections < 2 {
        return Err(Error::Infeasible("repeated ids need at least two sections".into()));
    }
    let size = total / n_sections;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);

    let mut rep: Vec<String> = repeat_set.iter().cloned().collect();
    rep.shuffle(&mut rng);
    let mut sections: Vec<Vec<String>> = vec![Vec::with_capacity(size); n_sections];
    for (j, id) in rep.iter().enumerate() {
        let first = j % n_sections;
        let second = (j / n_sections + 1 + first) % n_sections;
        let second = if second == first { (first + 1) % n_sections } else { second };
        sections[first].push(id.clone());
        sections[second].push(id.clone());
    }
    if let Some((s, sec)) = sections.iter().enumerate().find(|(_, sec)| sec.len() > size) {
        return Err(Error::Infeasible(format!(
            "section {s} needs {} repeated slots but holds only {size}",
            sec.len()
        )));
    }

    let mut singles: Vec<String> = ids.iter().filter(|id| !repeat_set.contains(*id)).cloned().collect();
    singles.shuffle(&mut rng);
    let mut it = singles.into_iter();
    for sec in &mut sections {
        while sec.len() < size {
            sec.push(it.next().expect("slot count matches id count"));
        }
        sec.shuffle(&mut rng);
    }

    let mut seen: HashSet<String> = HashSet::new();
    let sections = sections
        .into_iter()
        .map(|sec| {
            sec.into_iter()
                .map(|id| {
                    let occurrence = u8::from(!seen.insert(id.clone()));
                    Assignment { id, occurrence }
                })
                .collect()
        })
        .collect();
    let plan = SessionPlan {
        task_kind,
        sections,
        repeat_pool: repeat_set,
    };
    plan.validate()?;
    Ok(plan)
}

/// Cardinal plan over individual translations with `n_repeat` randomly
/// chosen repeated items.
pub fn build_sections_cardinal(
    items: &[TranslationItem],
    n_repeat: usize,
    n_sections: usize,
    rng_seed: u64,
) -> Result<SessionPlan> {
    let ids: Vec<String> = items.iter().map(|i| i.item_id.clone()).collect();
    let repeats = pick_repeats(&ids, n_repeat, rng_seed)?;
    build_sections(TaskKind::Cardinal, &ids, &repeats, n_sections, rng_seed)
}

/// Pairwise plan over item pairs with `n_repeat` randomly chosen repeated
/// pairs.
pub fn build_sections_pairwise(
    pairs: &[ItemPair],
    n_repeat: usize,
    n_sections: usize,
    rng_seed: u64,
) -> Result<SessionPlan> {
    let ids: Vec<String> = pairs.iter().map(|p| p.pair_id.clone()).collect();
    let repeats = pick_repeats(&ids, n_repeat, rng_seed)?;
    build_sections(TaskKind::Pairwise, &ids, &repeats, n_sections, rng_seed)
}

fn pick_repeats(ids: &[String], n_repeat: usize, seed: u64) -> Result<Vec<String>> {
    if n_repeat > ids.len() {
        return Err(Error::Infeasible(format!(
            "{n_repeat} repeats requested from {} ids",
            ids.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5eed);
    let mut chosen: Vec<String> = ids.choose_multiple(&mut rng, n_repeat).cloned().collect();
    chosen.sort();
    Ok(chosen)
}
