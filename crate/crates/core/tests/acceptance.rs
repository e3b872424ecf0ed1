//! Acceptance checks. Each test prints one `PASS`/`FAIL`/`SKIP` line; run with
//! `cargo test -p banditmt --release --test acceptance -- --nocapture --test-threads=1`.

use std::path::Path;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use banditmt::autodiff::{AdamConfig, Gradients, ParamSet};
use banditmt::estimator::{
    evaluate_estimator, mse_loss_and_grad, pw_loss_and_grad, simulated_q, train_estimator, Estimator,
    EstimatorConfig, EstimatorData, EstimatorTrainConfig, EvalExample, Objective, PreferencePair, RewardExample,
};
use banditmt::metrics::{
    approx_randomization_test, chrf, corpus_score, gleu, sbleu, sentence_statistics, ter, Metric,
    MetricConfig,
};
use banditmt::policy::{
    evaluate_policy, mle_objective_and_grad, opl_objective_and_grad, rl_surrogate_and_grad, sample_with_score_grad,
    train_mle, train_opl, train_rl, Decoding, FeedbackEntry, FeedbackLog, MleConfig, OplConfig, Policy, PolicyConfig,
    RlConfig, RlTrainConfig,
};
use banditmt::ratings::{read_jsonl_file, PlanLine, RatingRecord, SessionPlan};
use banditmt::reliability::{analyze_reliability, krippendorff_alpha, ReliabilityMatrix, Scale};
use banditmt::synthetic::{generate, SyntheticConfig, SyntheticTask};
use banditmt::text::{Sentence, Vocab};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(name: &str, pass: bool, detail: impl AsRef<str>) -> bool {
    println!("{} {name}: {}", if pass { "PASS" } else { "FAIL" }, detail.as_ref());
    pass
}

// ---------------------------------------------------------------- alpha

fn oracle_alpha(scale: Scale, rows: &[Vec<Option<f64>>]) -> f64 {
    let units: Vec<Vec<f64>> = (0..rows[0].len())
        .map(|u| rows.iter().filter_map(|r| r[u]).collect::<Vec<_>>())
        .filter(|v| v.len() >= 2)
        .collect();
    let pooled: Vec<f64> = units.iter().flatten().copied().collect();
    let n = pooled.len() as f64;
    let count = |lo: f64, hi: f64| pooled.iter().filter(|x| **x >= lo && **x <= hi).count() as f64;
    let d2 = |a: f64, b: f64| match scale {
        Scale::Interval => (a - b).powi(2),
        Scale::Nominal => f64::from(u8::from(a != b)),
        Scale::Ordinal => {
            let (lo, hi) = (a.min(b), a.max(b));
            (count(lo, hi) - (count(lo, lo) + count(hi, hi)) / 2.0).powi(2)
        }
    };
    let mut d_o = 0.0;
    for u in &units {
        for (i, a) in u.iter().enumerate() {
            for (j, b) in u.iter().enumerate() {
                if i != j {
                    d_o += d2(*a, *b) / (u.len() as f64 - 1.0);
                }
            }
        }
    }
    let mut d_e = 0.0;
    for (i, a) in pooled.iter().enumerate() {
        for (j, b) in pooled.iter().enumerate() {
            if i != j {
                d_e += d2(*a, *b);
            }
        }
    }
    1.0 - (d_o / n) / (d_e / (n * (n - 1.0)))
}

fn alpha(scale: Scale, rows: &[Vec<Option<f64>>]) -> f64 {
    krippendorff_alpha(&ReliabilityMatrix::from_rows(scale, rows).unwrap()).unwrap().alpha
}

#[test]
fn alpha_correctness() {
    let t = Instant::now();
    let perfect: Vec<Vec<Option<f64>>> = vec![[1.0, 3.0, 5.0, 2.0, 2.0].map(Some).to_vec(); 4];
    let perfect_ok = [Scale::Interval, Scale::Ordinal, Scale::Nominal].iter().all(|s| alpha(*s, &perfect) == 1.0);

    let mut rng = ChaCha8Rng::seed_from_u64(2018);
    let random: Vec<Vec<Option<f64>>> =
        (0..20).map(|_| (0..500).map(|_| Some(f64::from(rng.gen_range(1u8..=5)))).collect()).collect();
    let random_alphas: Vec<f64> =
        [Scale::Interval, Scale::Ordinal, Scale::Nominal].iter().map(|s| alpha(*s, &random)).collect();
    let random_ok = random_alphas.iter().all(|a| a.abs() < 0.05);

    // worked by hand: D_o = 1/4, D_e = 9/4 (interval); D_o = 1, D_e = 78/7 (ordinal)
    let small = vec![[1.0, 2.0, 3.0, 4.0].map(Some).to_vec(), [1.0, 2.0, 3.0, 3.0].map(Some).to_vec()];
    let cases = [(Scale::Interval, 8.0 / 9.0), (Scale::Ordinal, 71.0 / 78.0)];
    let small_err = cases
        .iter()
        .map(|(s, hand)| (alpha(*s, &small) - hand).abs().max((oracle_alpha(*s, &small) - hand).abs()))
        .fold(0.0, f64::max);
    let small_ok = small_err < 1e-9;

    let pass = perfect_ok && random_ok && small_ok && t.elapsed() < Duration::from_secs(30);
    let ok = report(
        "alpha correctness",
        pass,
        format!(
            "perfect=1 {perfect_ok}; random 20x500 alphas {random_alphas:.4?} (|a|<0.05); 2x4 max err {small_err:.1e} (<1e-9); {:.1?}",
            t.elapsed()
        ),
    );
    assert!(ok);
}

// ---------------------------------------------------------------- released ratings

#[test]
fn released_ratings_reproduction() {
    let Some(dir) = std::env::var_os("HUMANMT_DIR") else {
        println!("SKIP released ratings reproduction: set HUMANMT_DIR to a directory with ratings.jsonl, cardinal_plan.jsonl and pairwise_plan.jsonl");
        return;
    };
    let dir = Path::new(&dir);
    let records: Vec<RatingRecord> = read_jsonl_file(&dir.join("ratings.jsonl")).unwrap();
    let plan = |name: &str| -> SessionPlan {
        let lines: Vec<PlanLine> = read_jsonl_file(&dir.join(name)).unwrap();
        SessionPlan::from_lines(&lines).unwrap()
    };
    let (cp, pp) = (plan("cardinal_plan.jsonl"), plan("pairwise_plan.jsonl"));
    let a = analyze_reliability(&records, Some(&cp), Some(&pp), 100).unwrap();
    let card = a.cardinal.as_ref().unwrap();
    let pw = a.pairwise.as_ref().unwrap();
    let near = |x: Option<f64>, want: f64, tol: f64| x.is_some_and(|x| (x - want).abs() <= tol);
    let at = |t: &banditmt::reliability::TaskReliability, thr: f64| {
        t.consistency_curve
            .as_ref()
            .and_then(|c| c.points.iter().find(|p| (p.threshold - thr).abs() < 1e-9).cloned())
    };
    let (c49, p66) = (at(card, 0.49), at(pw, 0.66));
    let welch = a.welch.unwrap();
    let checks = [
        near(card.alpha, 0.2308, 0.005),
        near(card.alpha_normalized, 0.2820, 0.005),
        near(pw.alpha, 0.2385, 0.005),
        c49.as_ref().is_some_and(|p| p.retained == 8 && near(p.alpha, 0.5059, 0.005)),
        p66.as_ref().is_some_and(|p| p.retained == 5 && near(p.alpha, 0.3912, 0.005)),
        (welch.t.abs() - 1.4362).abs() <= 0.005 && (welch.df - 26.92).abs() <= 0.05,
        (welch.p_two_sided - 0.1625).abs() <= 0.01,
    ];
    let ok = report(
        "released ratings reproduction",
        checks.iter().all(|c| *c),
        format!(
            "alpha raw {:?} norm {:?} pairwise {:?}; filtered 0.49 {:?}; 0.66 {:?}; welch t({:.2})={:.4} p={:.4}",
            card.alpha,
            card.alpha_normalized,
            pw.alpha,
            c49.map(|p| (p.alpha, p.retained)),
            p66.map(|p| (p.alpha, p.retained)),
            welch.df,
            welch.t,
            welch.p_two_sided
        ),
    );
    assert!(ok);
}

// ---------------------------------------------------------------- gradients

/// Central differences on `n` randomly chosen scalars with a sizable
/// analytic gradient; returns the largest relative error.
fn fd_check<M: Clone>(
    model: &M,
    params: fn(&mut M) -> &mut ParamSet,
    grads: &Gradients,
    f: impl Fn(&M) -> f64,
    n: usize,
    seed: u64,
) -> (f64, usize) {
    let mut coords: Vec<(usize, usize, f64)> = grads
        .iter()
        .enumerate()
        .flat_map(|(p, (_, m))| m.data.iter().enumerate().map(move |(i, g)| (p, i, *g)))
        .filter(|c| c.2.abs() > 1e-5)
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rand::seq::SliceRandom::shuffle(&mut coords[..], &mut rng);
    coords.truncate(n);
    let ids: Vec<_> = grads.iter().map(|(id, _)| id).collect();
    let h = 1e-5;
    let mut worst = 0.0f64;
    for &(p, i, analytic) in &coords {
        let mut plus = model.clone();
        params(&mut plus).get_mut(ids[p]).data[i] += h;
        let mut minus = model.clone();
        params(&mut minus).get_mut(ids[p]).data[i] -= h;
        let numeric = (f(&plus) - f(&minus)) / (2.0 * h);
        worst = worst.max((analytic - numeric).abs() / analytic.abs().max(numeric.abs()));
    }
    (worst, coords.len())
}

fn est_params(e: &mut Estimator) -> &mut ParamSet {
    &mut e.params
}

fn pol_params(p: &mut Policy) -> &mut ParamSet {
    &mut p.params
}

fn toy_sentence(rng: &mut ChaCha8Rng, vocab: &Vocab, lo: usize, hi: usize) -> Sentence {
    let len = rng.gen_range(lo..=hi);
    Sentence::new((0..len).map(|_| vocab.token(rng.gen_range(4..vocab.len())).to_owned()).collect())
}

#[test]
fn gradient_integrity() {
    let t = Instant::now();
    let src = Vocab::from_words((0..12).map(|i| format!("s{i}")));
    let tgt = Vocab::from_words((0..12).map(|i| format!("t{i}")));
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let pairs: Vec<(Sentence, Sentence)> =
        (0..4).map(|_| (toy_sentence(&mut rng, &src, 3, 7), toy_sentence(&mut rng, &tgt, 3, 7))).collect();
    let mut results = Vec::new();

    let est = Estimator::new(EstimatorConfig::default(), src.clone(), tgt.clone(), 3).unwrap();
    let rewards: Vec<RewardExample> = pairs
        .iter()
        .map(|(x, y)| RewardExample { source: x.clone(), target: y.clone(), reward: rng.gen() })
        .collect();
    let mse = |e: &Estimator| {
        let mut drop = ChaCha8Rng::seed_from_u64(5);
        mse_loss_and_grad(e, &rewards, Some(&mut drop)).unwrap()
    };
    results.push(("mse", fd_check(&est, est_params, &mse(&est).1, |e| mse(e).0, 60, 1)));
    let prefs: Vec<PreferencePair> = pairs
        .iter()
        .map(|(x, y)| PreferencePair {
            source: x.clone(),
            target_1: y.clone(),
            target_2: toy_sentence(&mut rng, &tgt, 3, 7),
            q: rng.gen(),
        })
        .filter(|p| p.target_1 != p.target_2)
        .collect();
    let pw = |e: &Estimator| {
        let mut drop = ChaCha8Rng::seed_from_u64(6);
        pw_loss_and_grad(e, &prefs, Some(&mut drop)).unwrap()
    };
    results.push(("pw", fd_check(&est, est_params, &pw(&est).1, |e| pw(e).0, 60, 2)));

    let cfg = PolicyConfig { emb_dim: 32, hidden: 64, attn_dim: 64, max_len: 20 };
    let pol = Policy::new(cfg, src, tgt.clone(), 4).unwrap();
    let mle = |p: &Policy| mle_objective_and_grad(p, &pairs).unwrap();
    results.push(("mle", fd_check(&pol, pol_params, &mle(&pol).1, |p| mle(p).0, 60, 3)));
    let weighted: Vec<(Sentence, Sentence, f64)> =
        pairs.iter().map(|(x, y)| (x.clone(), y.clone(), rng.gen_range(-1.0..1.0))).collect();
    for (name, tau) in [("rl", None), ("rl tempered", Some(0.5))] {
        let rl = |p: &Policy| rl_surrogate_and_grad(p, &weighted, tau).unwrap();
        results.push((name, fd_check(&pol, pol_params, &rl(&pol).1, |p| rl(p).0, 60, 4)));
    }
    let log: Vec<FeedbackEntry> = pairs
        .iter()
        .map(|(x, y)| FeedbackEntry { source: x.clone(), translation: y.clone(), reward: rng.gen() })
        .collect();
    let opl = |p: &Policy| opl_objective_and_grad(p, &log).unwrap();
    results.push(("opl", fd_check(&pol, pol_params, &opl(&pol).1, |p| opl(p).0, 60, 5)));

    let pass = results.iter().all(|(_, (err, n))| *err < 1e-4 && *n >= 50) && t.elapsed() < Duration::from_secs(120);
    let detail: Vec<String> = results.iter().map(|(k, (e, n))| format!("{k} {e:.1e} over {n}")).collect();
    let ok = report("gradient integrity", pass, format!("{} (<1e-4, >=50 each); {:.1?}", detail.join(", "), t.elapsed()));
    assert!(ok);
}

// ---------------------------------------------------------------- REINFORCE

/// Every output of at most `max_len` steps over the given words.
fn enumerate(words: &[&str], max_len: usize) -> Vec<Sentence> {
    let mut out = vec![Sentence::new(vec![])];
    let mut frontier: Vec<Vec<String>> = vec![vec![]];
    for _ in 0..max_len {
        let next: Vec<Vec<String>> = frontier
            .iter()
            .flat_map(|f| words.iter().map(move |w| [f.clone(), vec![w.to_string()]].concat()))
            .collect();
        out.extend(next.iter().cloned().map(Sentence::new));
        frontier = next;
    }
    out
}

fn flat(g: &Gradients) -> Vec<f64> {
    g.iter().flat_map(|(_, m)| m.data.clone()).collect()
}

#[test]
fn reinforce_unbiasedness() {
    let t = Instant::now();
    // outputs: `</s>`, `a`, `b`
    let cfg = PolicyConfig { emb_dim: 4, hidden: 5, attn_dim: 4, max_len: 3 };
    let policy = Policy::new(cfg, Vocab::from_words(["x", "y"]), Vocab::from_words(["a", "b"]), 9).unwrap();
    let x = Sentence::parse("x y x");
    let reference = Sentence::parse("a b");
    let mcfg = MetricConfig::default();
    let reward = |y: &Sentence| gleu(y.tokens(), reference.tokens(), &mcfg) + 0.1 * y.len() as f64;
    let outputs = enumerate(&["a", "b"], 3);
    let n_samples = 100_000;
    let mut lines = Vec::new();
    let mut pass = true;
    for tau in [0.5, 1.0] {
        let grad_tau = Some(tau);
        let mut mass = 0.0;
        let mut exact: Vec<f64> = vec![];
        for y in &outputs {
            let p = policy.score_tempered(&x, y, tau).unwrap().1.exp();
            mass += p;
            let g = flat(&rl_surrogate_and_grad(&policy, &[(x.clone(), y.clone(), 1.0)], grad_tau).unwrap().1);
            exact.resize(g.len(), 0.0);
            for (e, gi) in exact.iter_mut().zip(&g) {
                *e += p * reward(y) * gi;
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut dirs: Vec<Vec<f64>> =
            (0..8).map(|_| (0..exact.len()).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        dirs.push(exact.clone());
        let (mut sum, mut sum_sq) = (vec![0.0; dirs.len()], vec![0.0; dirs.len()]);
        for _ in 0..n_samples {
            let (s, g) = sample_with_score_grad(&policy, &x, tau, grad_tau, &mut rng).unwrap();
            let g = flat(&g);
            let r = reward(&s.translation);
            for (k, d) in dirs.iter().enumerate() {
                let z = r * g.iter().zip(d).map(|(a, b)| a * b).sum::<f64>();
                sum[k] += z;
                sum_sq[k] += z * z;
            }
        }
        let n = n_samples as f64;
        let mut worst_z = 0.0f64;
        for (k, d) in dirs.iter().enumerate() {
            let mean = sum[k] / n;
            let sd = ((sum_sq[k] / n - mean * mean) * n / (n - 1.0)).sqrt();
            let target: f64 = exact.iter().zip(d).map(|(a, b)| a * b).sum();
            worst_z = worst_z.max((mean - target).abs() / (sd / n.sqrt()));
        }
        pass &= worst_z <= 3.0 && (mass - 1.0).abs() < 1e-9;
        lines.push(format!("tau {tau}: mass {mass:.12}, max |z| {worst_z:.2} over {} projections", dirs.len()));
    }
    let ok = report(
        "REINFORCE unbiasedness",
        pass,
        format!("{} ({n_samples} samples, 15 enumerable outputs); {:.1?}", lines.join("; "), t.elapsed()),
    );
    assert!(ok);
}

// ---------------------------------------------------------------- synthetic task

struct Warm {
    task: SyntheticTask,
    policy: Policy,
    gleu: f64,
    elapsed: Duration,
}

fn corpus_gleu_of(p: &Policy, pairs: &[(Sentence, Sentence)]) -> f64 {
    evaluate_policy(p, pairs, &[Metric::Gleu], Decoding::Greedy, &MetricConfig::default()).unwrap().scores["gleu"]
}

fn warm() -> &'static Warm {
    static WARM: OnceLock<Warm> = OnceLock::new();
    WARM.get_or_init(|| {
        let t = Instant::now();
        let task = generate(&SyntheticConfig::default()).unwrap();
        let cfg = PolicyConfig { emb_dim: 32, hidden: 64, attn_dim: 64, max_len: 20 };
        let mut policy = Policy::new(cfg, task.src_vocab.clone(), task.tgt_vocab.clone(), 1).unwrap();
        let mle = MleConfig {
            epochs: 30,
            batch_size: 16,
            seed: 1,
            adam: AdamConfig { lr: 3e-3, ..AdamConfig::default() },
            ..MleConfig::default()
        };
        train_mle(&mut policy, &task.ood_train, &mle).unwrap();
        let gleu = corpus_gleu_of(&policy, &task.test);
        Warm { task, policy, gleu, elapsed: t.elapsed() }
    })
}

fn rl_config(seed: u64) -> RlTrainConfig {
    RlTrainConfig { rl: RlConfig { adam: AdamConfig { lr: 3e-4, ..AdamConfig::default() }, ..RlConfig::default() }, steps: 200, seed }
}

fn sources(task: &SyntheticTask) -> Vec<Sentence> {
    task.train.iter().map(|p| p.0.clone()).collect()
}

/// 800 simulated ratings: two samples for each of the first 400 training
/// sources, scored by sBLEU, plus the pairwise preferences between them.
fn simulated_ratings(w: &Warm, seed: u64) -> (EstimatorData, Vec<EvalExample>) {
    let mc = MetricConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut rewards, mut prefs) = (vec![], vec![]);
    for (x, r) in w.task.train.iter().take(400) {
        let s = w.policy.sample(x, 2, 1.0, &mut rng).unwrap();
        let (a, b) = (&s[0].translation, &s[1].translation);
        for y in [a, b] {
            rewards.push(RewardExample { source: x.clone(), target: y.clone(), reward: sbleu(y.tokens(), r.tokens(), &mc) });
        }
        if a != b && !a.is_empty() && !b.is_empty() {
            prefs.push(PreferencePair { source: x.clone(), target_1: a.clone(), target_2: b.clone(), q: simulated_q(a, b, r, &mc) });
        }
    }
    rewards.retain(|e| !e.target.is_empty());
    let dev = held_out(w, &w.task.dev, &mut rng);
    (EstimatorData { rewards, prefs }, dev)
}

fn held_out(w: &Warm, pairs: &[(Sentence, Sentence)], rng: &mut ChaCha8Rng) -> Vec<EvalExample> {
    pairs
        .iter()
        .map(|(x, r)| EvalExample {
            source: x.clone(),
            hypothesis: w.policy.sample(x, 1, 1.0, rng).unwrap()[0].translation.clone(),
            reference: r.clone(),
        })
        .filter(|e| !e.hypothesis.is_empty())
        .collect()
}

fn train_est(w: &Warm, data: &EstimatorData, dev: &[EvalExample], objective: Objective, seed: u64) -> Estimator {
    let mut est = Estimator::new(EstimatorConfig::default(), w.task.src_vocab.clone(), w.task.tgt_vocab.clone(), seed + 10).unwrap();
    let cfg = EstimatorTrainConfig {
        objective,
        p_aux: 0.0,
        batch_size: 16,
        adam: AdamConfig { lr: 1e-3, ..AdamConfig::default() },
        max_steps: 300,
        eval_every: 50,
        patience: 4,
        clip_norm: None,
        seed,
    };
    train_estimator(&mut est, data, &EstimatorData::default(), dev, &cfg).unwrap();
    est
}

#[test]
fn rl_improvement() {
    let w = warm();
    let srcs = sources(&w.task);
    let mc = MetricConfig::default();
    let t = Instant::now();
    let mut direct = w.policy.clone();
    let refs: std::collections::HashMap<&Sentence, &Sentence> = w.task.train.iter().map(|(x, r)| (x, r)).collect();
    let mut reward = |x: &Sentence, y: &Sentence| Ok(gleu(y.tokens(), refs[x].tokens(), &mc));
    train_rl(&mut direct, &srcs, &mut reward, &rl_config(1)).unwrap();
    let direct_gleu = corpus_gleu_of(&direct, &w.task.test);
    let direct_time = w.elapsed + t.elapsed();

    let mut per_seed = Vec::new();
    for seed in 1..=5u64 {
        let (data, dev) = simulated_ratings(w, seed);
        let mut finals = [0.0; 2];
        for (k, obj) in [Objective::Mse, Objective::Pw].into_iter().enumerate() {
            let est = train_est(w, &data, &dev, obj, seed);
            let mut p = w.policy.clone();
            train_rl(&mut p, &srcs, &mut |x, y| est.reward(x, y), &rl_config(seed)).unwrap();
            finals[k] = corpus_gleu_of(&p, &w.task.test);
        }
        per_seed.push(finals);
    }
    let mse_wins = per_seed.iter().filter(|f| f[0] >= f[1]).count();
    let est_gain = per_seed[0][0] - w.gleu;
    let checks = [
        direct_gleu - w.gleu >= 0.05 && direct_time < Duration::from_secs(600),
        est_gain >= 0.01,
        mse_wins >= 4,
    ];
    let seeds: Vec<String> = per_seed.iter().map(|f| format!("{:.4}/{:.4}", f[0], f[1])).collect();
    let ok = report(
        "RL improvement",
        checks.iter().all(|c| *c),
        format!(
            "warm {:.4}; direct GLEU RL {direct_gleu:.4} (+{:.1} pts, >=5) in {direct_time:.1?}; MSE-estimator RL seed 1 +{:.1} pts (>=1); MSE/PW per seed [{}] MSE>=PW in {mse_wins}/5 (>=4)",
            w.gleu,
            100.0 * (direct_gleu - w.gleu),
            100.0 * est_gain,
            seeds.join(", ")
        ),
    );
    assert!(ok);
}

#[test]
fn opl_sanity() {
    let w = warm();
    let x = &w.task.train[0].0;
    let y = &w.task.train[0].1;
    let single = [FeedbackEntry { source: x.clone(), translation: y.clone(), reward: 0.7 }];
    let single_zero = opl_objective_and_grad(&w.policy, &single).unwrap().1.is_zero();
    let uniform: Vec<FeedbackEntry> = w.task.train[..6]
        .iter()
        .map(|(x, y)| FeedbackEntry { source: x.clone(), translation: y.clone(), reward: 0.4 })
        .collect();
    let uniform_zero = opl_objective_and_grad(&w.policy, &uniform).unwrap().1.is_zero();

    let mc = MetricConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut entries = Vec::new();
    for (x, r) in w.task.train.iter().cycle() {
        if entries.len() == 800 {
            break;
        }
        let y = w.policy.sample(x, 1, 1.0, &mut rng).unwrap().remove(0).translation;
        if !y.is_empty() {
            entries.push(FeedbackEntry { source: x.clone(), reward: sbleu(y.tokens(), r.tokens(), &mc), translation: y });
        }
    }
    let log = FeedbackLog::new(entries).unwrap();
    let mut p = w.policy.clone();
    let cfg = OplConfig { steps: 100, batch_size: 16, adam: AdamConfig { lr: 1e-4, ..AdamConfig::default() }, seed: 1, ..OplConfig::default() };
    train_opl(&mut p, &log, &cfg).unwrap();
    let after = corpus_gleu_of(&p, &w.task.test);
    let ok = report(
        "OPL sanity",
        single_zero && uniform_zero && after >= w.gleu,
        format!(
            "|B|=1 zero grad {single_zero}; uniform rewards zero grad {uniform_zero}; {}-entry log GLEU {after:.4} vs warm {:.4}",
            log.len(),
            w.gleu
        ),
    );
    assert!(ok);
}

#[test]
fn estimator_direction() {
    let w = warm();
    let (data, dev) = simulated_ratings(w, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let test = held_out(w, &w.task.test, &mut rng);
    let mut rhos = Vec::new();
    for obj in [Objective::Mse, Objective::Pw] {
        let est = train_est(w, &data, &dev, obj, 1);
        rhos.push(evaluate_estimator(&est, &test, &MetricConfig::default()).unwrap());
    }
    let ok = report(
        "estimator direction",
        rhos.iter().all(|r| *r < 0.0),
        format!("held-out Spearman rho(r_hat, TER): MSE {:.4}, PW {:.4} over {} examples (<0)", rhos[0], rhos[1], test.len()),
    );
    assert!(ok);
}

// ---------------------------------------------------------------- metrics

fn toks(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_owned).collect()
}

/// Exact permutation p-value by swapping hypotheses and rescoring the corpus.
fn enumerated_p(metric: Metric, a: &[Vec<String>], b: &[Vec<String>], refs: &[Vec<String>]) -> f64 {
    let cfg = MetricConfig::default();
    let diff = |x: &[Vec<String>], y: &[Vec<String>]| {
        corpus_score(metric, x, refs, &cfg).unwrap() - corpus_score(metric, y, refs, &cfg).unwrap()
    };
    let observed = diff(a, b).abs();
    let n = a.len();
    let mut hits = 0;
    for mask in 0..1usize << n {
        let (x, y): (Vec<_>, Vec<_>) =
            (0..n).map(|i| if mask >> i & 1 == 1 { (b[i].clone(), a[i].clone()) } else { (a[i].clone(), b[i].clone()) }).unzip();
        if diff(&x, &y).abs() >= observed - 1e-9 {
            hits += 1;
        }
    }
    hits as f64 / (1usize << n) as f64
}

#[test]
fn metrics() {
    let cfg = MetricConfig::default();
    let refs = [toks("the cat sat on the mat"), toks("a quick brown fox jumps"), toks("we rate translations")];
    let h = refs.to_vec();
    let sentence_ok = refs.iter().all(|r| {
        sbleu(r, r, &cfg) == 1.0 && gleu(r, r, &cfg) == 1.0 && chrf(r, r, &cfg) == 1.0 && ter(r, r, &cfg).unwrap() == 0.0
    });
    let corpus: Vec<f64> =
        [Metric::Bleu, Metric::Gleu, Metric::Chrf, Metric::Ter].iter().map(|m| corpus_score(*m, &h, &refs, &cfg).unwrap()).collect();
    let identity_ok = sentence_ok && corpus == [1.0, 1.0, 1.0, 0.0];

    let mut p_same = vec![];
    for m in [Metric::Bleu, Metric::Gleu, Metric::Chrf, Metric::Ter] {
        let (s, stat) = sentence_statistics(m, &h, &refs, &cfg).unwrap();
        p_same.push(approx_randomization_test(&s, &s, stat, 10_000, 1).unwrap());
    }
    let same_ok = p_same.iter().all(|p| *p == 1.0);

    let a = vec![toks("the cat sat on mat"), toks("a quick fox jumps"), toks("we rate the translations")];
    let b = vec![toks("cat the sat on a mat"), toks("a brown fox jumped"), toks("we rate translations")];
    let mut enum_lines = vec![];
    let mut enum_ok = true;
    for m in [Metric::Bleu, Metric::Gleu, Metric::Chrf, Metric::Ter] {
        let (sa, stat) = sentence_statistics(m, &a, &refs, &cfg).unwrap();
        let (sb, _) = sentence_statistics(m, &b, &refs, &cfg).unwrap();
        let combined_ok = (stat.combine(&sa) - corpus_score(m, &a, &refs, &cfg).unwrap()).abs() < 1e-12;
        let lib = approx_randomization_test(&sa, &sb, stat, 8, 1).unwrap();
        let oracle = enumerated_p(m, &a, &b, &refs);
        enum_ok &= combined_ok && (lib - oracle).abs() < 1e-12;
        enum_lines.push(format!("{} {lib:.3}/{oracle:.3}", m.name()));
    }
    let ok = report(
        "metrics",
        identity_ok && same_ok && enum_ok,
        format!(
            "identity corpus BLEU/GLEU/chrF/TER {corpus:?}; identical systems p {p_same:?}; 3-sentence exact p lib/oracle [{}]",
            enum_lines.join(", ")
        ),
    );
    assert!(ok);
}
