use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ratings::{RatingRecord, TaskKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Nominal,
    Ordinal,
    Interval,
}

/// How repeated occurrences of a unit by the same rater enter the matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepeatPolicy {
    /// Both occurrences are separate values of the same unit.
    #[default]
    AllOccurrences,
    /// Only the first occurrence is kept.
    FirstOnly,
}

/// Raters x units grid of (possibly several) values per cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixRepr", into = "MatrixRepr")]
pub struct ReliabilityMatrix {
    pub scale: Scale,
    raters: Vec<String>,
    units: Vec<String>,
    cells: BTreeMap<(usize, usize), Vec<f64>>,
    rater_index: HashMap<String, usize>,
    unit_index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct MatrixRepr {
    scale: Scale,
    entries: Vec<MatrixEntry>,
}

impl TryFrom<MatrixRepr> for ReliabilityMatrix {
    type Error = Error;

    fn try_from(r: MatrixRepr) -> Result<Self> {
        ReliabilityMatrix::from_entries(r.scale, &r.entries)
    }
}

impl From<ReliabilityMatrix> for MatrixRepr {
    fn from(m: ReliabilityMatrix) -> Self {
        MatrixRepr {
            scale: m.scale,
            entries: m.entries(),
        }
    }
}

/// One serialized cell value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixEntry {
    pub rater: String,
    pub unit: String,
    pub value: f64,
}

impl ReliabilityMatrix {
    pub fn new(scale: Scale) -> Self {
        ReliabilityMatrix {
            scale,
            raters: Vec::new(),
            units: Vec::new(),
            cells: BTreeMap::new(),
            rater_index: HashMap::new(),
            unit_index: HashMap::new(),
        }
    }

    /// Builds a matrix from a dense raters x units table where `None`
    /// marks a missing value.
    pub fn from_rows(scale: Scale, rows: &[Vec<Option<f64>>]) -> Result<Self> {
        let mut m = ReliabilityMatrix::new(scale);
        for (r, row) in rows.iter().enumerate() {
            for (u, v) in row.iter().enumerate() {
                if let Some(v) = v {
                    m.add(&format!("r{r}"), &format!("u{u}"), *v)?;
                }
            }
        }
        Ok(m)
    }

    pub fn from_entries(scale: Scale, entries: &[MatrixEntry]) -> Result<Self> {
        let mut m = ReliabilityMatrix::new(scale);
        for e in entries {
            m.add(&e.rater, &e.unit, e.value)?;
        }
        Ok(m)
    }

    /// Cardinal records at interval scale, pairwise records (coded
    /// -1/0/+1) at ordinal scale.
    pub fn from_records(records: &[RatingRecord], kind: TaskKind, policy: RepeatPolicy) -> Result<Self> {
        let scale = match kind {
            TaskKind::Cardinal => Scale::Interval,
            TaskKind::Pairwise => Scale::Ordinal,
        };
        let mut m = ReliabilityMatrix::new(scale);
        for r in records.iter().filter(|r| r.task_kind == kind) {
            if policy == RepeatPolicy::FirstOnly && r.occurrence > 0 {
                continue;
            }
            m.add(&r.rater_id, &r.id, r.value.numeric())?;
        }
        Ok(m)
    }

    pub fn add(&mut self, rater: &str, unit: &str, value: f64) -> Result<()> {
        if !value.is_finite() {
            return Err(Error::invalid(format!("non-finite value for ({rater}, {unit})")));
        }
        let r = intern(&mut self.raters, &mut self.rater_index, rater);
        let u = intern(&mut self.units, &mut self.unit_index, unit);
        self.cells.entry((r, u)).or_default().push(value);
        Ok(())
    }

    pub fn raters(&self) -> &[String] {
        &self.raters
    }

    pub fn units(&self) -> &[String] {
        &self.units
    }

    pub fn n_values(&self) -> usize {
        self.cells.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn entries(&self) -> Vec<MatrixEntry> {
        self.cells
            .iter()
            .flat_map(|(&(r, u), vs)| {
                vs.iter().map(move |&value| MatrixEntry {
                    rater: self.raters[r].clone(),
                    unit: self.units[u].clone(),
                    value,
                })
            })
            .collect()
    }

    pub fn cell(&self, rater: &str, unit: &str) -> Option<&[f64]> {
        let r = self.rater_index.get(rater)?;
        let u = self.unit_index.get(unit)?;
        self.cells.get(&(*r, *u)).map(Vec::as_slice)
    }

    /// All values of each unit, in unit order. Units without values are
    /// omitted.
    pub fn values_by_unit(&self) -> Vec<(&str, Vec<f64>)> {
        let mut by_unit: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        for (&(_, u), vs) in &self.cells {
            by_unit.entry(u).or_default().extend_from_slice(vs);
        }
        by_unit.into_iter().map(|(u, vs)| (self.units[u].as_str(), vs)).collect()
    }

    /// All values of each rater.
    pub fn values_by_rater(&self) -> BTreeMap<&str, Vec<f64>> {
        let mut out: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
        for (&(r, _), vs) in &self.cells {
            out.entry(self.raters[r].as_str()).or_default().extend_from_slice(vs);
        }
        out
    }

    pub fn map_rater_values(&self, mut f: impl FnMut(&str, f64) -> f64) -> ReliabilityMatrix {
        let mut out = self.clone();
        for (&(r, _), vs) in out.cells.iter_mut() {
            for v in vs.iter_mut() {
                *v = f(&self.raters[r], *v);
            }
        }
        out
    }

    pub fn retain_raters(&self, keep: &BTreeSet<&str>) -> ReliabilityMatrix {
        self.filter(|r, _| keep.contains(r))
    }

    pub fn retain_units(&self, keep: &BTreeSet<&str>) -> ReliabilityMatrix {
        self.filter(|_, u| keep.contains(u))
    }

    fn filter(&self, pred: impl Fn(&str, &str) -> bool) -> ReliabilityMatrix {
        let mut out = ReliabilityMatrix::new(self.scale);
        for (&(r, u), vs) in &self.cells {
            let (rn, un) = (&self.raters[r], &self.units[u]);
            if pred(rn, un) {
                for &v in vs {
                    out.add(rn, un, v).expect("values already validated");
                }
            }
        }
        out
    }

    pub fn with_scale(mut self, scale: Scale) -> Self {
        self.scale = scale;
        self
    }
}

fn intern(names: &mut Vec<String>, index: &mut HashMap<String, usize>, name: &str) -> usize {
    if let Some(&i) = index.get(name) {
        return i;
    }
    names.push(name.to_owned());
    index.insert(name.to_owned(), names.len() - 1);
    names.len() - 1
}
