use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use banditmt::ratings::{build_sections, RatingRecord, RatingValue, TaskKind};
use banditmt::reliability::analyze_reliability;
use sha1::{Digest, Sha1};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_banditmt"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn banditmt")
}

fn ok(args: &[&str]) -> Output {
    let o = run(args);
    assert!(o.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&o.stderr));
    o
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const TINY: &str = "[model]\nemb_dim = 8\nhidden = 8\nattn_dim = 8\nmax_len = 12\n\n[train]\nepochs = 2\nbatch_size = 8\n\n[train.adam]\nlr = 0.01\n";

/// Synthetic data plus a one-epoch tiny policy.
fn tiny_setup(dir: &Path) -> PathBuf {
    let data = dir.join("data");
    ok(&["gen-synthetic", "--out-dir", s(&data), "--n-train", "40"]);
    let cfg = dir.join("tiny.toml");
    fs::write(&cfg, TINY).unwrap();
    let warm = dir.join("warm.json");
    ok(&[
        "train-mle",
        "--config",
        s(&cfg),
        "--train",
        s(&data.join("ood_train.tsv")),
        "--src-vocab",
        s(&data.join("src_vocab.json")),
        "--tgt-vocab",
        s(&data.join("tgt_vocab.json")),
        "--out",
        s(&warm),
    ]);
    warm
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(run(&[]).status.code(), Some(1));
    assert_eq!(run(&["evaluate", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    let o = run(&["eval-estimator", "--model", "/nonexistent/m.json", "--data", "/nonexistent/d.jsonl", "--out", "/tmp/x"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn bad_data_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.jsonl");
    fs::write(&bad, "{\"not\": \"a record\"}\n").unwrap();
    let o = run(&["analyze-reliability", "--ratings", s(&bad), "--out", s(&dir.path().join("r.json"))]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    let tsv = dir.path().join("c.tsv");
    fs::write(&tsv, "no tab here\n").unwrap();
    let o = run(&["train-mle", "--train", s(&tsv), "--out", s(&dir.path().join("p.json"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn divergence_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    ok(&["gen-synthetic", "--out-dir", s(&data), "--n-train", "40"]);
    let cfg = dir.path().join("tiny.toml");
    fs::write(&cfg, TINY.replace("epochs = 2", "epochs = 3")).unwrap();
    let o = run(&[
        "train-mle",
        "--config",
        s(&cfg),
        "--train",
        s(&data.join("train.tsv")),
        "--lr",
        "1e300",
        "--out",
        s(&dir.path().join("p.json")),
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn zero_step_rl_keeps_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let warm = tiny_setup(dir.path());
    let out = dir.path().join("rl.json");
    let train = dir.path().join("data/train.tsv");
    ok(&["train-rl", "--init", s(&warm), "--sources", s(&train), "--reward", "simulated-direct", "--steps", "0", "--out", s(&out)]);
    assert_eq!(fs::read(&warm).unwrap(), fs::read(&out).unwrap());
    let o = run(&["train-rl", "--init", s(&warm), "--sources", s(&train), "--reward", "estimator", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(1));
}

fn pipeline(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let warm = tiny_setup(dir);
    let train = dir.join("data/train.tsv");
    let test = dir.join("data/test.tsv");
    let rl = dir.join("rl.json");
    ok(&["train-rl", "--init", s(&warm), "--sources", s(&train), "--reward", "simulated-direct", "--steps", "3", "--k", "2", "--out", s(&rl)]);
    let opl = dir.join("opl.json");
    ok(&[
        "train-opl",
        "--init",
        s(&warm),
        "--log-source",
        "simulated",
        "--corpus",
        s(&train),
        "--log-size",
        "20",
        "--steps",
        "3",
        "--out",
        s(&opl),
    ]);
    let aux = dir.join("aux.json");
    let dev = dir.join("dev.jsonl");
    ok(&["make-aux-data", "--policy", s(&warm), "--corpus", s(&train), "--n-sources", "10", "--n-ranks", "2", "--out", s(&aux), "--out-eval", s(&dev)]);
    let est = dir.join("est.json");
    ok(&["train-estimator", "--human", s(&aux), "--objective", "mse", "--steps", "3", "--out", s(&est)]);
    let eval = dir.join("eval.json");
    ok(&["evaluate", "--policy", s(&rl), "--baseline", s(&warm), "--test", s(&test), "--n-perm", "200", "--out", s(&eval)]);
    ["warm.json", "rl.json", "opl.json", "aux.json", "est.json", "eval.json"]
        .iter()
        .map(|f| (f.to_string(), fs::read(dir.join(f)).unwrap()))
        .collect()
}

#[test]
fn identical_runs_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ra = pipeline(a.path());
    let rb = pipeline(b.path());
    for ((name, x), (_, y)) in ra.iter().zip(&rb) {
        assert!(x == y, "{name} differs between identical runs");
    }
    let eval: serde_json::Value = serde_json::from_slice(&ra[5].1).unwrap();
    assert!(eval["comparison"]["p_values"]["gleu"].as_f64().unwrap() <= 1.0);
}

#[test]
fn manifest_records_git_blob_hashes() {
    let dir = tempfile::tempdir().unwrap();
    let warm = tiny_setup(dir.path());
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("warm.json.manifest.json")).unwrap()).unwrap();
    assert_eq!(m["command"], "train-mle");
    assert_eq!(m["config"]["model"]["emb_dim"], 8);
    let inputs = m["inputs"].as_array().unwrap();
    assert_eq!(inputs.len(), 4);
    for i in inputs {
        let bytes = fs::read(i["path"].as_str().unwrap()).unwrap();
        let mut h = Sha1::new();
        h.update(format!("blob {}\0", bytes.len()));
        h.update(&bytes);
        assert_eq!(i["sha1"], hex::encode(h.finalize()));
    }
    assert_eq!(m["outputs"][0], s(&warm));
}

#[test]
fn analyze_reliability_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let ids: Vec<String> = (0..10).map(|i| format!("u{i}")).collect();
    let plan = build_sections(TaskKind::Cardinal, &ids, &ids[..4], 2, 3).unwrap();
    let mut recs = Vec::new();
    for r in 0..3u8 {
        for (section, a) in plan.iter() {
            let k: u8 = a.id[1..].parse().unwrap();
            recs.push(RatingRecord {
                rater_id: format!("r{r}"),
                id: a.id.clone(),
                occurrence: a.occurrence,
                task_kind: TaskKind::Cardinal,
                value: RatingValue::Score((k + r * a.occurrence + r) % 5 + 1),
                section_index: section,
                timestamp: 0,
            });
        }
    }
    let ratings = dir.path().join("ratings.jsonl");
    banditmt::ratings::write_jsonl_file(&ratings, &recs).unwrap();
    let plan_path = dir.path().join("plan.jsonl");
    banditmt::ratings::write_jsonl_file(&plan_path, &plan.to_lines()).unwrap();
    let out = dir.path().join("rel.json");
    let curves = dir.path().join("curves");
    ok(&[
        "analyze-reliability",
        "--ratings",
        s(&ratings),
        "--cardinal-plan",
        s(&plan_path),
        "--grid-steps",
        "20",
        "--out",
        s(&out),
        "--curves-dir",
        s(&curves),
    ]);
    let got: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    let want = serde_json::to_value(analyze_reliability(&recs, Some(&plan), None, 20).unwrap()).unwrap();
    assert_eq!(got, want);
    let table = fs::read_to_string(curves.join("cardinal_consistency.tsv")).unwrap();
    assert_eq!(table.lines().count(), 22);
}

#[test]
fn session_building_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cands = dir.path().join("cands.jsonl");
    let mut lines = String::new();
    for i in 0..8 {
        let good = (0..6).map(|j| format!("w{j}")).collect::<Vec<_>>().join(" ");
        let bad = (0..6).map(|j| if j < i % 6 { format!("w{j}") } else { format!("x{j}") }).collect::<Vec<_>>().join(" ");
        lines.push_str(&format!(
            "{{\"pair_id\":\"p{i}\",\"source\":\"s\",\"out_domain\":\"{bad}\",\"in_domain\":\"{good}\",\"reference\":\"{good}\"}}\n"
        ));
    }
    fs::write(&cands, lines).unwrap();
    let (pairs, items) = (dir.path().join("pairs.jsonl"), dir.path().join("items.jsonl"));
    ok(&["prepare-items", "--candidates", s(&cands), "--n", "4", "--len-lo", "1", "--len-hi", "10", "--out-pairs", s(&pairs), "--out-items", s(&items)]);
    assert_eq!(fs::read_to_string(&pairs).unwrap().lines().count(), 4);
    assert_eq!(fs::read_to_string(&items).unwrap().lines().count(), 8);
    let plan = dir.path().join("plan.jsonl");
    ok(&["build-sessions", "--task", "cardinal", "--input", s(&items), "--repeats", "2", "--sections", "2", "--out", s(&plan)]);
    assert_eq!(fs::read_to_string(&plan).unwrap().lines().count(), 10);
    let o = run(&["build-sessions", "--task", "cardinal", "--input", s(&items), "--repeats", "1", "--sections", "2", "--out", s(&plan)]);
    assert_eq!(o.status.code(), Some(2));
}
