use std::path::PathBuf;

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use banditmt::estimator::Estimator;
use banditmt::metrics::{approx_randomization_test, sentence_statistics, Metric, MetricConfig};
use banditmt::policy::{
    decode_all, score_outputs, simulate_feedback_log, train_mle, train_opl, train_rl, Decoding, FeedbackLog, MleConfig,
    OplConfig, Policy, PolicyConfig, ProgressRecord, ReferenceReward, RlTrainConfig,
};
use banditmt::text::{Sentence, Vocab};
use banditmt::Error;

use super::io::{
    check_finite, load_config, manifest_path, read_corpus, read_json, read_lines, write_json, write_jsonl, write_lines,
    Manifest,
};
use super::{usage, CliResult};

fn parse_metric(s: &str) -> Result<Metric, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_decoding(s: &str) -> Result<Decoding, String> {
    match s.split_once(':') {
        None if s == "greedy" => Ok(Decoding::Greedy),
        Some(("beam", w)) => match w.parse() {
            Ok(width) if width > 0 => Ok(Decoding::Beam { width }),
            _ => Err(format!("bad beam width `{w}`")),
        },
        _ => Err(format!("unknown decoding `{s}` (greedy | beam:N)")),
    }
}

fn finish_training(records: &[ProgressRecord], policy: &Policy, a_out: &PathBuf, progress: &Option<PathBuf>, m: &mut Manifest) -> CliResult<()> {
    check_finite("training objective", records.iter().map(|r| &r.report.objective))?;
    policy.save(a_out)?;
    m.output(a_out);
    if let Some(p) = progress {
        write_jsonl(p, records)?;
        m.output(p);
    }
    m.write(&manifest_path(a_out))?;
    Ok(())
}

/// `[model]` and `[train]` tables of the MLE config file.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MleFileConfig {
    pub model: PolicyConfig,
    pub train: MleConfig,
}

#[derive(Debug, Args)]
pub struct MleArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Parallel corpus TSV.
    #[arg(long)]
    train: PathBuf,
    /// Continue from a policy checkpoint.
    #[arg(long)]
    init: Option<PathBuf>,
    /// Vocabulary JSON files; built from the training corpus otherwise.
    #[arg(long)]
    src_vocab: Option<PathBuf>,
    #[arg(long)]
    tgt_vocab: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    max_len: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    /// Per-step progress JSONL.
    #[arg(long)]
    progress: Option<PathBuf>,
}

pub fn mle(a: MleArgs) -> CliResult<()> {
    let mut cfg: MleFileConfig = load_config(a.config.as_deref())?;
    if let Some(e) = a.epochs {
        cfg.train.epochs = e;
    }
    if let Some(lr) = a.lr {
        cfg.train.adam.lr = lr;
    }
    if let Some(b) = a.batch_size {
        cfg.train.batch_size = b;
    }
    if let Some(l) = a.max_len {
        cfg.model.max_len = l;
    }
    if let Some(s) = a.seed {
        cfg.train.seed = s;
    }
    let mut m = Manifest::new("train-mle", cfg.train.seed, &cfg);
    m.inputs(a.config.iter())?;
    let pairs = read_corpus(&a.train)?;
    m.input(&a.train)?;
    let mut policy = match &a.init {
        Some(p) => {
            m.input(p)?;
            Policy::load(p)?
        }
        None => {
            let src: Vocab = match &a.src_vocab {
                Some(p) => {
                    m.input(p)?;
                    read_json(p)?
                }
                None => Vocab::build(pairs.iter().map(|p| &p.0)),
            };
            let tgt: Vocab = match &a.tgt_vocab {
                Some(p) => {
                    m.input(p)?;
                    read_json(p)?
                }
                None => Vocab::build(pairs.iter().map(|p| &p.1)),
            };
            Policy::new(cfg.model.clone(), src, tgt, cfg.train.seed)?
        }
    };
    let records = train_mle(&mut policy, &pairs, &cfg.train)?;
    finish_training(&records, &policy, &a.out, &a.progress, &mut m)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RewardSource {
    /// Sentence metric against the reference of each source.
    SimulatedDirect,
    /// Trained reward estimator, clamped to [0, 1].
    Estimator,
    /// Constant zero reward.
    None,
}

#[derive(Debug, Args)]
pub struct RlArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Warm-start policy checkpoint.
    #[arg(long)]
    init: PathBuf,
    /// Parallel corpus TSV; references are used only by simulated-direct.
    #[arg(long)]
    sources: PathBuf,
    #[arg(long, value_enum)]
    reward: RewardSource,
    /// Metric for simulated-direct rewards.
    #[arg(long, value_parser = parse_metric, default_value = "gleu")]
    metric: Metric,
    /// Estimator checkpoint for the estimator reward.
    #[arg(long)]
    estimator: Option<PathBuf>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    progress: Option<PathBuf>,
}

#[derive(Serialize)]
struct RlRunConfig<'a> {
    reward: RewardSource,
    metric: Metric,
    train: &'a RlTrainConfig,
}

pub fn rl(a: RlArgs) -> CliResult<()> {
    let mut cfg: RlTrainConfig = load_config(a.config.as_deref())?;
    if let Some(s) = a.steps {
        cfg.steps = s;
    }
    if let Some(lr) = a.lr {
        cfg.rl.adam.lr = lr;
    }
    if let Some(k) = a.k {
        cfg.rl.k = k;
    }
    if let Some(t) = a.tau {
        cfg.rl.tau = t;
    }
    if let Some(b) = a.batch_size {
        cfg.rl.batch_size = b;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    let mut m = Manifest::new("train-rl", cfg.seed, &RlRunConfig { reward: a.reward, metric: a.metric, train: &cfg });
    m.inputs(a.config.iter())?;
    let mut policy = Policy::load(&a.init)?;
    m.input(&a.init)?;
    let pairs = read_corpus(&a.sources)?;
    m.input(&a.sources)?;
    let sources: Vec<Sentence> = pairs.iter().map(|p| p.0.clone()).collect();
    let (records, _) = match a.reward {
        RewardSource::SimulatedDirect => {
            let rf = ReferenceReward::new(&pairs, a.metric, MetricConfig::default())?;
            train_rl(&mut policy, &sources, &mut |x, y| rf.reward(x, y), &cfg)?
        }
        RewardSource::Estimator => {
            let path = a.estimator.as_ref().ok_or_else(|| usage("--reward estimator needs --estimator"))?;
            let est = Estimator::load(path)?;
            m.input(path)?;
            train_rl(&mut policy, &sources, &mut |x, y| est.reward(x, y), &cfg)?
        }
        RewardSource::None => train_rl(&mut policy, &sources, &mut |_, _| Ok(0.0), &cfg)?,
    };
    finish_training(&records, &policy, &a.out, &a.progress, &mut m)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LogSource {
    /// Greedy outputs of the initial policy rewarded against references.
    Simulated,
    /// Feedback log exported from the rating service.
    ExportedHuman,
}

#[derive(Debug, Args)]
pub struct OplArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    init: PathBuf,
    #[arg(long, value_enum)]
    log_source: LogSource,
    /// Feedback log JSONL (exported-human).
    #[arg(long)]
    log: Option<PathBuf>,
    /// Parallel corpus TSV to simulate the log from.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Number of logged entries to simulate.
    #[arg(long)]
    log_size: Option<usize>,
    #[arg(long, value_parser = parse_metric, default_value = "sbleu")]
    metric: Metric,
    /// Where to keep the simulated log.
    #[arg(long)]
    log_out: Option<PathBuf>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    progress: Option<PathBuf>,
}

#[derive(Serialize)]
struct OplRunConfig<'a> {
    log_source: LogSource,
    metric: Metric,
    log_size: Option<usize>,
    train: &'a OplConfig,
}

pub fn opl(a: OplArgs) -> CliResult<()> {
    let mut cfg: OplConfig = load_config(a.config.as_deref())?;
    if let Some(s) = a.steps {
        cfg.steps = s;
    }
    if let Some(lr) = a.lr {
        cfg.adam.lr = lr;
    }
    if let Some(b) = a.batch_size {
        cfg.batch_size = b;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    let mut m = Manifest::new(
        "train-opl",
        cfg.seed,
        &OplRunConfig { log_source: a.log_source, metric: a.metric, log_size: a.log_size, train: &cfg },
    );
    m.inputs(a.config.iter())?;
    let mut policy = Policy::load(&a.init)?;
    m.input(&a.init)?;
    let log = match a.log_source {
        LogSource::ExportedHuman => {
            let p = a.log.as_ref().ok_or_else(|| usage("--log-source exported-human needs --log"))?;
            m.input(p)?;
            FeedbackLog::load(p)?
        }
        LogSource::Simulated => {
            let p = a.corpus.as_ref().ok_or_else(|| usage("--log-source simulated needs --corpus"))?;
            m.input(p)?;
            let mut pairs = read_corpus(p)?;
            if let Some(n) = a.log_size {
                pairs.truncate(n);
            }
            let log = simulate_feedback_log(&policy, &pairs, a.metric, &MetricConfig::default())?;
            if let Some(out) = &a.log_out {
                log.save(out)?;
                m.output(out);
            }
            log
        }
    };
    let records = train_opl(&mut policy, &log, &cfg)?;
    finish_training(&records, &policy, &a.out, &a.progress, &mut m)
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Test corpus TSV.
    #[arg(long)]
    test: PathBuf,
    /// System to score: a policy checkpoint ...
    #[arg(long, required_unless_present = "hypotheses")]
    policy: Option<PathBuf>,
    /// ... or one hypothesis per line.
    #[arg(long, conflicts_with = "policy")]
    hypotheses: Option<PathBuf>,
    /// Optional comparison system for approximate randomization.
    #[arg(long)]
    baseline: Option<PathBuf>,
    #[arg(long, conflicts_with = "baseline")]
    baseline_hypotheses: Option<PathBuf>,
    #[arg(long, value_parser = parse_metric, value_delimiter = ',', default_value = "bleu,gleu,chrf,ter")]
    metrics: Vec<Metric>,
    #[arg(long, value_parser = parse_decoding, default_value = "greedy")]
    decoding: Decoding,
    #[arg(long, default_value_t = 10_000)]
    n_perm: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Results JSON.
    #[arg(long)]
    out: PathBuf,
    /// Write the system's hypotheses, one per line.
    #[arg(long)]
    out_hypotheses: Option<PathBuf>,
}

#[derive(Serialize)]
struct EvaluateConfig<'a> {
    metrics: &'a [Metric],
    decoding: Decoding,
    n_perm: usize,
}

#[derive(Serialize)]
struct Comparison {
    baseline: std::collections::BTreeMap<String, f64>,
    p_values: std::collections::BTreeMap<String, f64>,
}

#[derive(Serialize)]
struct EvaluateResult {
    n: usize,
    scores: std::collections::BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    comparison: Option<Comparison>,
}

fn system_outputs(
    policy: &Option<PathBuf>,
    hyps: &Option<PathBuf>,
    sources: &[Sentence],
    decoding: Decoding,
    m: &mut Manifest,
) -> CliResult<Option<Vec<Sentence>>> {
    let out = match (policy, hyps) {
        (Some(p), _) => {
            m.input(p)?;
            Some(decode_all(&Policy::load(p)?, sources, decoding)?)
        }
        (None, Some(h)) => {
            m.input(h)?;
            let lines = read_lines(h)?;
            if lines.len() != sources.len() {
                return Err(Error::invalid(format!("{} hypotheses for {} test sentences", lines.len(), sources.len())).into());
            }
            Some(lines)
        }
        (None, None) => None,
    };
    Ok(out)
}

pub fn evaluate(a: EvaluateArgs) -> CliResult<()> {
    if a.metrics.is_empty() {
        return Err(usage("no metrics requested"));
    }
    let mut metrics = a.metrics.clone();
    metrics.sort();
    metrics.dedup();
    let mut m = Manifest::new(
        "evaluate",
        a.seed,
        &EvaluateConfig { metrics: &metrics, decoding: a.decoding, n_perm: a.n_perm },
    );
    let pairs = read_corpus(&a.test)?;
    m.input(&a.test)?;
    let sources: Vec<Sentence> = pairs.iter().map(|p| p.0.clone()).collect();
    let mcfg = MetricConfig::default();
    let hyps = system_outputs(&a.policy, &a.hypotheses, &sources, a.decoding, &mut m)?.expect("required by clap");
    let scores = score_outputs(&hyps, &pairs, &metrics, &mcfg)?;
    let base = system_outputs(&a.baseline, &a.baseline_hypotheses, &sources, a.decoding, &mut m)?;
    let comparison = match base {
        Some(b) => {
            let refs: Vec<&[String]> = pairs.iter().map(|p| p.1.tokens()).collect();
            let sys: Vec<&[String]> = hyps.iter().map(Sentence::tokens).collect();
            let bas: Vec<&[String]> = b.iter().map(Sentence::tokens).collect();
            let mut p_values = std::collections::BTreeMap::new();
            for &metric in &metrics {
                let (sa, how) = sentence_statistics(metric, &sys, &refs, &mcfg)?;
                let (sb, _) = sentence_statistics(metric, &bas, &refs, &mcfg)?;
                p_values.insert(metric.name().to_owned(), approx_randomization_test(&sa, &sb, how, a.n_perm, a.seed)?);
            }
            Some(Comparison { baseline: score_outputs(&b, &pairs, &metrics, &mcfg)?, p_values })
        }
        None => None,
    };
    let res = EvaluateResult { n: pairs.len(), scores, comparison };
    for (k, v) in &res.scores {
        println!("{k}\t{v:.4}");
    }
    write_json(&a.out, &res)?;
    m.output(&a.out);
    if let Some(p) = &a.out_hypotheses {
        write_lines(p, &hyps)?;
        m.output(p);
    }
    m.write(&manifest_path(&a.out))?;
    Ok(())
}
