use std::path::PathBuf;

use clap::Args;
use serde::Serialize;

use banditmt::ratings::{PlanLine, RatingRecord, SessionPlan};
use banditmt::reliability::{analyze_reliability, FilterCurve};

use super::io::{manifest_path, read_jsonl, write_json, write_text, Manifest};
use super::CliResult;

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Rating records JSONL (cardinal and/or pairwise).
    #[arg(long)]
    ratings: PathBuf,
    /// Cardinal plan JSONL, enables intra-rater alpha and the consistency sweep.
    #[arg(long)]
    cardinal_plan: Option<PathBuf>,
    #[arg(long)]
    pairwise_plan: Option<PathBuf>,
    /// Threshold grid resolution.
    #[arg(long, default_value_t = 100)]
    grid_steps: usize,
    /// Report JSON.
    #[arg(long)]
    out: PathBuf,
    /// Directory for the filter curves as tab-separated tables.
    #[arg(long)]
    curves_dir: Option<PathBuf>,
}

#[derive(Serialize)]
struct AnalyzeConfig {
    grid_steps: usize,
}

fn load_plan(p: &Option<PathBuf>) -> CliResult<Option<SessionPlan>> {
    match p {
        Some(p) => Ok(Some(SessionPlan::from_lines(&read_jsonl::<PlanLine>(p)?)?)),
        None => Ok(None),
    }
}

pub fn analyze(a: AnalyzeArgs) -> CliResult<()> {
    let records: Vec<RatingRecord> = read_jsonl(&a.ratings)?;
    let cp = load_plan(&a.cardinal_plan)?;
    let pp = load_plan(&a.pairwise_plan)?;
    let report = analyze_reliability(&records, cp.as_ref(), pp.as_ref(), a.grid_steps)?;
    write_json(&a.out, &report)?;
    let mut m = Manifest::new("analyze-reliability", 0, &AnalyzeConfig { grid_steps: a.grid_steps });
    m.input(&a.ratings)?;
    m.inputs(a.cardinal_plan.iter().chain(&a.pairwise_plan))?;
    m.output(&a.out);
    if let Some(dir) = &a.curves_dir {
        let mut curves: Vec<(&str, &FilterCurve)> = Vec::new();
        if let Some(c) = &report.cardinal {
            curves.push(("cardinal_item_variance", &c.item_variance_curve));
            if let Some(cc) = &c.consistency_curve {
                curves.push(("cardinal_consistency", cc));
            }
        }
        if let Some(p) = &report.pairwise {
            curves.push(("pairwise_item_variance", &p.item_variance_curve));
            if let Some(pc) = &p.consistency_curve {
                curves.push(("pairwise_consistency", pc));
            }
        }
        for (name, c) in curves {
            let path = dir.join(format!("{name}.tsv"));
            write_text(&path, &c.to_table())?;
            m.output(&path);
        }
    }
    m.write(&manifest_path(&a.out))?;
    Ok(())
}
