use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};

use banditmt::estimator::{
    evaluate_estimator, human_estimator_data, make_aux_data, train_estimator, Estimator, EstimatorConfig, EstimatorData,
    EstimatorTrainConfig, EvalExample, Objective,
};
use banditmt::metrics::{ter, MetricConfig};
use banditmt::policy::{decode_all, Decoding, Policy};
use banditmt::ratings::{ItemPair, RatingRecord, TranslationItem};
use banditmt::text::{Sentence, Vocab};

use super::io::{check_finite, load_config, manifest_path, read_corpus, read_json, read_jsonl, write_json, write_jsonl, Manifest};
use super::{usage, CliResult};

/// `[model]` and `[train]` tables of the estimator config file.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorFileConfig {
    pub model: EstimatorConfig,
    pub train: EstimatorTrainConfig,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Human supervision as estimator data JSON.
    #[arg(long)]
    human: Option<PathBuf>,
    /// Human rating records JSONL, turned into supervision with --items/--pairs.
    #[arg(long, conflicts_with = "human")]
    ratings: Option<PathBuf>,
    #[arg(long)]
    items: Option<PathBuf>,
    #[arg(long)]
    pairs: Option<PathBuf>,
    /// Auxiliary simulated supervision as estimator data JSON.
    #[arg(long)]
    aux: Option<PathBuf>,
    /// Dev examples JSONL for early stopping.
    #[arg(long)]
    dev: Option<PathBuf>,
    /// Continue from an estimator checkpoint.
    #[arg(long)]
    init: Option<PathBuf>,
    /// Vocabulary JSON files; built from the training data otherwise.
    #[arg(long)]
    src_vocab: Option<PathBuf>,
    #[arg(long)]
    tgt_vocab: Option<PathBuf>,
    #[arg(long, value_parser = parse_objective)]
    objective: Option<Objective>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    p_aux: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output checkpoint.
    #[arg(long)]
    out: PathBuf,
    /// Training report JSON.
    #[arg(long)]
    report: Option<PathBuf>,
}

fn parse_objective(s: &str) -> Result<Objective, String> {
    s.parse().map_err(|e: banditmt::Error| e.to_string())
}

fn data_sentences(d: &EstimatorData) -> (Vec<&Sentence>, Vec<&Sentence>) {
    let mut src = Vec::new();
    let mut tgt = Vec::new();
    for r in &d.rewards {
        src.push(&r.source);
        tgt.push(&r.target);
    }
    for p in &d.prefs {
        src.push(&p.source);
        tgt.push(&p.target_1);
        tgt.push(&p.target_2);
    }
    (src, tgt)
}

pub fn train(a: TrainArgs) -> CliResult<()> {
    let mut cfg: EstimatorFileConfig = load_config(a.config.as_deref())?;
    let t = &mut cfg.train;
    if let Some(o) = a.objective {
        t.objective = o;
    }
    if let Some(s) = a.steps {
        t.max_steps = s;
    }
    if let Some(lr) = a.lr {
        t.adam.lr = lr;
    }
    if let Some(p) = a.p_aux {
        t.p_aux = p;
    }
    if let Some(b) = a.batch_size {
        t.batch_size = b;
    }
    if let Some(s) = a.seed {
        t.seed = s;
    }
    if a.aux.is_none() && a.p_aux.is_none() && a.config.is_none() {
        t.p_aux = 0.0;
    }
    let mut m = Manifest::new("train-estimator", cfg.train.seed, &cfg);
    m.inputs(a.config.iter())?;

    let human = match (&a.human, &a.ratings) {
        (Some(p), _) => {
            m.input(p)?;
            read_json(p)?
        }
        (None, Some(r)) => {
            let records: Vec<RatingRecord> = read_jsonl(r)?;
            let items: Vec<TranslationItem> = a.items.as_deref().map(read_jsonl).transpose()?.unwrap_or_default();
            let pairs: Vec<ItemPair> = a.pairs.as_deref().map(read_jsonl).transpose()?.unwrap_or_default();
            m.input(r)?;
            m.inputs(a.items.iter().chain(&a.pairs))?;
            human_estimator_data(&records, &items, &pairs)?
        }
        (None, None) => EstimatorData::default(),
    };
    let aux: EstimatorData = match &a.aux {
        Some(p) => {
            m.input(p)?;
            read_json(p)?
        }
        None => EstimatorData::default(),
    };
    let dev: Vec<EvalExample> = match &a.dev {
        Some(p) => {
            m.input(p)?;
            read_jsonl(p)?
        }
        None => Vec::new(),
    };
    let mut est = match &a.init {
        Some(p) => {
            m.input(p)?;
            Estimator::load(p)?
        }
        None => {
            let (hs, ht) = data_sentences(&human);
            let (xs, xt) = data_sentences(&aux);
            let src_vocab = match &a.src_vocab {
                Some(p) => {
                    m.input(p)?;
                    read_json(p)?
                }
                None => Vocab::build(hs.into_iter().chain(xs)),
            };
            let tgt_vocab = match &a.tgt_vocab {
                Some(p) => {
                    m.input(p)?;
                    read_json(p)?
                }
                None => Vocab::build(ht.into_iter().chain(xt)),
            };
            Estimator::new(cfg.model.clone(), src_vocab, tgt_vocab, cfg.train.seed)?
        }
    };
    let report = train_estimator(&mut est, &human, &aux, &dev, &cfg.train)?;
    check_finite("estimator loss", report.records.iter().map(|r| &r.loss))?;
    est.save(&a.out)?;
    m.output(&a.out);
    if let Some(r) = &a.report {
        write_json(r, &report)?;
        m.output(r);
    }
    m.write(&manifest_path(&a.out))?;
    Ok(())
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    /// Examples JSONL with source, hypothesis and reference.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Serialize)]
struct EstimatorEval {
    n: usize,
    spearman_ter: f64,
    predictions: Vec<f64>,
    ter: Vec<f64>,
}

pub fn eval(a: EvalArgs) -> CliResult<()> {
    let est = Estimator::load(&a.model)?;
    let data: Vec<EvalExample> = read_jsonl(&a.data)?;
    let mcfg = MetricConfig::default();
    let rho = evaluate_estimator(&est, &data, &mcfg)?;
    let predictions = data.iter().map(|e| est.predict(&e.source, &e.hypothesis)).collect::<banditmt::Result<Vec<_>>>()?;
    let ters = data.iter().map(|e| ter(e.hypothesis.tokens(), e.reference.tokens(), &mcfg)).collect::<banditmt::Result<Vec<_>>>()?;
    let res = EstimatorEval { n: data.len(), spearman_ter: rho, predictions, ter: ters };
    write_json(&a.out, &res)?;
    println!("spearman_ter\t{rho:.4}");
    let mut m = Manifest::new("eval-estimator", 0, &());
    m.input(&a.model)?;
    m.input(&a.data)?;
    m.output(&a.out);
    m.write(&manifest_path(&a.out))?;
    Ok(())
}

#[derive(Debug, Args)]
pub struct AuxArgs {
    /// Policy checkpoint producing the beam hypotheses.
    #[arg(long)]
    policy: PathBuf,
    /// Parallel corpus TSV supplying sources and references.
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    n_sources: usize,
    #[arg(long, default_value_t = 9)]
    n_ranks: usize,
    /// Estimator data JSON.
    #[arg(long)]
    out: PathBuf,
    /// Also write greedy hypotheses with references as estimator dev examples.
    #[arg(long)]
    out_eval: Option<PathBuf>,
}

#[derive(Serialize)]
struct AuxConfig {
    n_sources: usize,
    n_ranks: usize,
}

pub fn aux(a: AuxArgs) -> CliResult<()> {
    if a.n_sources == 0 {
        return Err(usage("--n-sources must be positive"));
    }
    let policy = Policy::load(&a.policy)?;
    let pairs = read_corpus(&a.corpus)?;
    let mcfg = MetricConfig::default();
    let data = make_aux_data(&pairs, &policy, a.n_sources, a.n_ranks, &mcfg)?;
    write_json(&a.out, &data)?;
    let mut m = Manifest::new("make-aux-data", 0, &AuxConfig { n_sources: a.n_sources, n_ranks: a.n_ranks });
    m.input(&a.policy)?;
    m.input(&a.corpus)?;
    m.output(&a.out);
    if let Some(p) = &a.out_eval {
        let used = &pairs[..a.n_sources.min(pairs.len())];
        let sources: Vec<Sentence> = used.iter().map(|p| p.0.clone()).collect();
        let hyps = decode_all(&policy, &sources, Decoding::Greedy)?;
        let ex: Vec<EvalExample> = used
            .iter()
            .zip(hyps)
            .filter(|(_, h)| !h.is_empty())
            .map(|((x, r), h)| EvalExample { source: x.clone(), hypothesis: h, reference: r.clone() })
            .collect();
        write_jsonl(p, &ex)?;
        m.output(p);
    }
    m.write(&manifest_path(&a.out))?;
    Ok(())
}
