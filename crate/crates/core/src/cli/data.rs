use std::path::PathBuf;

use clap::Args;
use serde::Serialize;

use banditmt::metrics::MetricConfig;
use banditmt::ratings::{
    build_sections_cardinal, build_sections_pairwise, items_from_pairs, select_rating_items, CandidatePair, ItemPair,
    TaskKind, TranslationItem,
};
use banditmt::synthetic::{generate, SyntheticConfig};

use super::io::{load_config, manifest_path, read_jsonl, write_corpus, write_json, write_jsonl, Manifest};
use super::CliResult;

#[derive(Debug, Args)]
pub struct GenSyntheticArgs {
    /// Directory for the corpora and vocabularies.
    #[arg(long)]
    out_dir: PathBuf,
    /// TOML file with synthetic task settings.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_train: Option<usize>,
}

pub fn gen_synthetic(a: GenSyntheticArgs) -> CliResult<()> {
    let mut cfg: SyntheticConfig = load_config(a.config.as_deref())?;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(n) = a.n_train {
        cfg.n_train = n;
    }
    let task = generate(&cfg)?;
    let mut m = Manifest::new("gen-synthetic", cfg.seed, &cfg);
    if let Some(c) = &a.config {
        m.input(c)?;
    }
    for (name, pairs) in [("ood_train", &task.ood_train), ("train", &task.train), ("dev", &task.dev), ("test", &task.test)] {
        let p = a.out_dir.join(format!("{name}.tsv"));
        write_corpus(&p, pairs)?;
        m.output(&p);
    }
    for (name, v) in [("src_vocab", &task.src_vocab), ("tgt_vocab", &task.tgt_vocab)] {
        let p = a.out_dir.join(format!("{name}.json"));
        write_json(&p, v)?;
        m.output(&p);
    }
    m.write(&a.out_dir.join("manifest.json"))?;
    Ok(())
}

#[derive(Debug, Args)]
pub struct PrepareItemsArgs {
    /// JSONL of candidate pairs (source, out_domain, in_domain, reference).
    #[arg(long)]
    candidates: PathBuf,
    /// Number of pairs to select.
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// Reference length range, inclusive.
    #[arg(long, default_value_t = 20)]
    len_lo: usize,
    #[arg(long, default_value_t = 40)]
    len_hi: usize,
    /// Output JSONL of selected pairs.
    #[arg(long)]
    out_pairs: PathBuf,
    /// Output JSONL of the individual translations.
    #[arg(long)]
    out_items: PathBuf,
}

#[derive(Serialize)]
struct PrepareConfig {
    n: usize,
    len_lo: usize,
    len_hi: usize,
}

pub fn prepare_items(a: PrepareItemsArgs) -> CliResult<()> {
    let cands: Vec<CandidatePair> = read_jsonl(&a.candidates)?;
    let pairs = select_rating_items(&cands, a.n, a.len_lo, a.len_hi, &MetricConfig::default())?;
    let items = items_from_pairs(&pairs);
    write_jsonl(&a.out_pairs, &pairs)?;
    write_jsonl(&a.out_items, &items)?;
    let mut m = Manifest::new("prepare-items", 0, &PrepareConfig { n: a.n, len_lo: a.len_lo, len_hi: a.len_hi });
    m.input(&a.candidates)?;
    m.output(&a.out_pairs);
    m.output(&a.out_items);
    m.write(&manifest_path(&a.out_pairs))?;
    Ok(())
}

#[derive(Debug, Args)]
pub struct BuildSessionsArgs {
    #[arg(long, value_parser = parse_task)]
    task: TaskKind,
    /// Items JSONL (cardinal) or pairs JSONL (pairwise).
    #[arg(long)]
    input: PathBuf,
    /// Number of ids shown twice.
    #[arg(long, default_value_t = 0)]
    repeats: usize,
    #[arg(long, default_value_t = 1)]
    sections: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output plan JSONL.
    #[arg(long)]
    out: PathBuf,
}

pub fn parse_task(s: &str) -> Result<TaskKind, String> {
    s.parse().map_err(|e: banditmt::Error| e.to_string())
}

#[derive(Serialize)]
struct SessionsConfig {
    task: TaskKind,
    repeats: usize,
    sections: usize,
}

pub fn build_sessions(a: BuildSessionsArgs) -> CliResult<()> {
    let plan = match a.task {
        TaskKind::Cardinal => {
            let items: Vec<TranslationItem> = read_jsonl(&a.input)?;
            build_sections_cardinal(&items, a.repeats, a.sections, a.seed)?
        }
        TaskKind::Pairwise => {
            let pairs: Vec<ItemPair> = read_jsonl(&a.input)?;
            build_sections_pairwise(&pairs, a.repeats, a.sections, a.seed)?
        }
    };
    write_jsonl(&a.out, &plan.to_lines())?;
    let mut m = Manifest::new(
        "build-sessions",
        a.seed,
        &SessionsConfig { task: a.task, repeats: a.repeats, sections: a.sections },
    );
    m.input(&a.input)?;
    m.output(&a.out);
    m.write(&manifest_path(&a.out))?;
    Ok(())
}
