//! Reference-based translation metrics and comparators. Every score lives
//! on a `[0, 1]` scale (TER is an unbounded rate).

mod bleu;
mod chrf;
mod gleu;
mod ngrams;
mod significance;
mod spearman;
mod ter;

use serde::{Deserialize, Serialize};

pub use bleu::{bleu_from_stats, bleu_stats, corpus_bleu, sbleu, BleuStats};
pub use chrf::chrf;
pub use gleu::{corpus_gleu, gleu, gleu_stats};
pub use significance::{approx_randomization_test, CorpusStat};
pub use spearman::{average_ranks, pearson, spearman_rho};
pub use ter::{corpus_ter, edit_distance, ter, ter_edits};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricConfig {
    pub max_ngram: usize,
    /// Added to numerator and denominator of n-gram precisions for n >= 2.
    pub smoothing_epsilon: f64,
    pub chrf_beta: f64,
    pub chrf_max_n: usize,
    pub ter_enable_shifts: bool,
    pub ter_max_shift_distance: usize,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            max_ngram: 4,
            smoothing_epsilon: 0.1,
            chrf_beta: 3.0,
            chrf_max_n: 6,
            ter_enable_shifts: true,
            ter_max_shift_distance: 10,
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_ngram == 0 || self.chrf_max_n == 0 {
            return Err(Error::invalid("n-gram orders must be at least 1"));
        }
        if !(self.chrf_beta > 0.0) {
            return Err(Error::invalid("chrF beta must be positive"));
        }
        if !(self.smoothing_epsilon > 0.0) {
            return Err(Error::invalid("smoothing epsilon must be positive"));
        }
        Ok(())
    }
}

/// Named metric, used by the CLI and corpus evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Bleu,
    Sbleu,
    Gleu,
    Chrf,
    Ter,
}

impl Metric {
    pub const ALL: [Metric; 5] = [Metric::Bleu, Metric::Sbleu, Metric::Gleu, Metric::Chrf, Metric::Ter];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Bleu => "bleu",
            Metric::Sbleu => "sbleu",
            Metric::Gleu => "gleu",
            Metric::Chrf => "chrf",
            Metric::Ter => "ter",
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown metric `{s}`")))
    }
}

/// Per-sentence statistic vectors whose [`CorpusStat`] combination equals
/// [`corpus_score`], for paired significance tests.
pub fn sentence_statistics<S: AsRef<[String]>>(
    metric: Metric,
    hyps: &[S],
    refs: &[S],
    cfg: &MetricConfig,
) -> Result<(Vec<Vec<f64>>, CorpusStat)> {
    if hyps.len() != refs.len() || hyps.is_empty() {
        return Err(Error::invalid("need equally many hypotheses and references, at least one"));
    }
    let pairs = hyps.iter().zip(refs).map(|(h, r)| (h.as_ref(), r.as_ref()));
    Ok(match metric {
        Metric::Bleu => (pairs.map(|(h, r)| bleu_stats(h, r, cfg.max_ngram).to_vec()).collect(), CorpusStat::Bleu),
        Metric::Gleu => (pairs.map(|(h, r)| gleu_stats(h, r, cfg.max_ngram).to_vec()).collect(), CorpusStat::Gleu),
        Metric::Sbleu => (pairs.map(|(h, r)| vec![sbleu(h, r, cfg)]).collect(), CorpusStat::Mean),
        Metric::Chrf => (pairs.map(|(h, r)| vec![chrf(h, r, cfg)]).collect(), CorpusStat::Mean),
        Metric::Ter => (
            pairs.map(|(h, r)| vec![ter_edits(h, r, cfg) as f64, r.len() as f64]).collect(),
            CorpusStat::Ratio,
        ),
    })
}

/// Corpus-level score. BLEU and GLEU pool n-gram statistics; sBLEU and
/// chrF average sentence scores; TER pools edits over reference length.
pub fn corpus_score<S: AsRef<[String]>>(metric: Metric, hyps: &[S], refs: &[S], cfg: &MetricConfig) -> Result<f64> {
    if hyps.len() != refs.len() {
        return Err(Error::invalid(format!(
            "{} hypotheses but {} references",
            hyps.len(),
            refs.len()
        )));
    }
    if hyps.is_empty() {
        return Err(Error::invalid("empty corpus"));
    }
    let mean = |f: &dyn Fn(&[String], &[String]) -> f64| {
        hyps.iter().zip(refs).map(|(h, r)| f(h.as_ref(), r.as_ref())).sum::<f64>() / hyps.len() as f64
    };
    Ok(match metric {
        Metric::Bleu => corpus_bleu(hyps, refs, cfg),
        Metric::Gleu => corpus_gleu(hyps, refs, cfg),
        Metric::Sbleu => mean(&|h, r| sbleu(h, r, cfg)),
        Metric::Chrf => mean(&|h, r| chrf(h, r, cfg)),
        Metric::Ter => corpus_ter(hyps, refs, cfg)?,
    })
}
