use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{log_softmax_rows, Graph, Matrix, ParamId, ParamSet, Var};
use crate::error::{Error, Result};
use crate::nn::{init_scale, Gru, Linear};
use crate::text::{Sentence, Vocab, BOS_ID, EOS_ID, FIRST_EMITTABLE};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyConfig {
    pub emb_dim: usize,
    pub hidden: usize,
    pub attn_dim: usize,
    /// Maximum decoding steps; an output reaching it without `</s>` is cut.
    pub max_len: usize,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        // original experiments: 1024 GRUs per direction
        PolicyConfig { emb_dim: 32, hidden: 64, attn_dim: 64, max_len: 60 }
    }
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.emb_dim == 0 || self.hidden == 0 || self.attn_dim == 0 || self.max_len == 0 {
            return Err(Error::invalid("policy dimensions must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
struct Layers {
    src_emb: ParamId,
    tgt_emb: ParamId,
    enc_fwd: Gru,
    enc_bwd: Gru,
    init: Linear,
    att_keys: ParamId,
    att_query: Linear,
    att_v: ParamId,
    dec: Gru,
    out: Linear,
}

/// Attention encoder-decoder `p(y | x)`: bidirectional GRU encoder, additive
/// attention and a single GRU decoder layer. Output index `k` stands for
/// target id `k + 3` (`</s>` first, then words).
#[derive(Clone, Debug)]
pub struct Policy {
    pub cfg: PolicyConfig,
    pub src_vocab: Vocab,
    pub tgt_vocab: Vocab,
    pub params: ParamSet,
    layers: Layers,
}

pub(crate) struct EncState {
    henc: Var,
    keys: Var,
    pub s0: Var,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceScore {
    pub log_prob: f64,
    pub per_token: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub translation: Sentence,
    /// `log p(y|x)` under the untempered model.
    pub log_prob: f64,
    /// `log p_tau(y|x)`, the distribution actually sampled from.
    pub tempered_log_prob: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub translation: Sentence,
    pub log_prob: f64,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    kind: String,
    config: PolicyConfig,
    src_vocab: Vocab,
    tgt_vocab: Vocab,
    params: ParamSet,
}

const CHECKPOINT_KIND: &str = "policy";

/// Row-vector log-softmax of `logits / tau`; `tau = inf` is uniform.
pub fn tempered_log_softmax(logits: &[f64], tau: f64) -> Vec<f64> {
    if tau.is_infinite() {
        return vec![-(logits.len() as f64).ln(); logits.len()];
    }
    log_softmax_rows(&Matrix::row(logits.iter().map(|o| o / tau).collect())).data
}

pub(crate) fn draw(log_probs: &[f64], rng: &mut (impl Rng + ?Sized)) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (k, lp) in log_probs.iter().enumerate() {
        acc += lp.exp();
        if u < acc {
            return k;
        }
    }
    // rounding left u above the cumulative mass; take the last positive entry
    log_probs.iter().rposition(|lp| lp.exp() > 0.0).unwrap_or(0)
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (k, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = k;
        }
    }
    best
}

impl Policy {
    pub fn new(cfg: PolicyConfig, src_vocab: Vocab, tgt_vocab: Vocab, seed: u64) -> Result<Self> {
        cfg.validate()?;
        if tgt_vocab.n_emittable() < 1 {
            return Err(Error::invalid("target vocabulary has no end symbol"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ps = ParamSet::new();
        let (e, h, a) = (cfg.emb_dim, cfg.hidden, cfg.attn_dim);
        let n_out = tgt_vocab.n_emittable();
        let src_emb = ps.add("src_emb", Matrix::uniform(src_vocab.len(), e, 0.1, &mut rng));
        let tgt_emb = ps.add("tgt_emb", Matrix::uniform(tgt_vocab.len(), e, 0.1, &mut rng));
        let enc_fwd = Gru::new(&mut ps, "enc_fwd", e, h, &mut rng);
        let enc_bwd = Gru::new(&mut ps, "enc_bwd", e, h, &mut rng);
        let init = Linear::new(&mut ps, "dec_init", 2 * h, h, &mut rng);
        let att_keys = ps.add("att_keys", Matrix::uniform(2 * h, a, init_scale(2 * h), &mut rng));
        let att_query = Linear::new(&mut ps, "att_query", h, a, &mut rng);
        let att_v = ps.add("att_v", Matrix::uniform(a, 1, init_scale(a), &mut rng));
        let dec = Gru::new(&mut ps, "dec", e + 2 * h, h, &mut rng);
        let out = Linear::new(&mut ps, "out", 3 * h, n_out, &mut rng);
        let layers = Layers { src_emb, tgt_emb, enc_fwd, enc_bwd, init, att_keys, att_query, att_v, dec, out };
        Ok(Policy { cfg, src_vocab, tgt_vocab, params: ps, layers })
    }

    /// Number of output symbols (`</s>` plus target words).
    pub fn n_outputs(&self) -> usize {
        self.tgt_vocab.n_emittable()
    }

    pub fn output_token(&self, k: usize) -> &str {
        self.tgt_vocab.token(k + FIRST_EMITTABLE)
    }

    pub(crate) fn source_ids(&self, x: &Sentence) -> Result<Vec<usize>> {
        if x.is_empty() {
            return Err(Error::invalid("empty source sentence"));
        }
        if x.len() > self.cfg.max_len {
            return Err(Error::invalid(format!("source has {} tokens, limit is {}", x.len(), self.cfg.max_len)));
        }
        Ok(self.src_vocab.encode(x))
    }

    /// Output indices for a target, ending with `</s>` unless the target
    /// fills all `max_len` steps.
    pub(crate) fn target_outputs(&self, y: &Sentence) -> Result<Vec<usize>> {
        if y.len() > self.cfg.max_len {
            return Err(Error::invalid(format!("target has {} tokens, limit is {}", y.len(), self.cfg.max_len)));
        }
        let mut outs = Vec::with_capacity(y.len() + 1);
        for tok in y.tokens() {
            match self.tgt_vocab.get(tok) {
                Some(id) if id > EOS_ID => outs.push(id - FIRST_EMITTABLE),
                _ => return Err(Error::invalid(format!("target token `{tok}` cannot be produced by the policy"))),
            }
        }
        if outs.len() < self.cfg.max_len {
            outs.push(EOS_ID - FIRST_EMITTABLE);
        }
        Ok(outs)
    }

    pub(crate) fn outputs_to_sentence(&self, outs: &[usize]) -> Sentence {
        Sentence::new(
            outs.iter()
                .filter(|&&k| k + FIRST_EMITTABLE != EOS_ID)
                .map(|&k| self.output_token(k).to_owned())
                .collect(),
        )
    }

    pub(crate) fn encode(&self, g: &mut Graph, src: &[usize]) -> EncState {
        let l = &self.layers;
        let x = g.gather(l.src_emb, src);
        let hf = l.enc_fwd.run(g, x, false);
        let hb = l.enc_bwd.run(g, x, true);
        let henc = g.concat_cols(&[hf, hb]);
        let wk = g.param(l.att_keys);
        let keys = g.matmul(henc, wk);
        let mean = g.mean_rows(henc);
        let s0 = l.init.apply(g, mean);
        let s0 = g.tanh(s0);
        EncState { henc, keys, s0 }
    }

    /// One decoder step from state `s` after emitting target id `prev`;
    /// returns the new state and the 1 × n_outputs logits.
    pub(crate) fn step(&self, g: &mut Graph, enc: &EncState, s: Var, prev: usize) -> (Var, Var) {
        let l = &self.layers;
        let q = l.att_query.apply(g, s);
        let e = g.add_row(enc.keys, q);
        let e = g.tanh(e);
        let v = g.param(l.att_v);
        let scores = g.matmul(e, v);
        let scores = g.transpose(scores);
        let att = g.softmax(scores);
        let ctx = g.matmul(att, enc.henc);
        let emb = g.gather(l.tgt_emb, &[prev]);
        let inp = g.concat_cols(&[emb, ctx]);
        let xw = l.dec.input.apply(g, inp);
        let s_new = l.dec.step(g, xw, s);
        let feat = g.concat_cols(&[s_new, ctx]);
        let logits = l.out.apply(g, feat);
        (s_new, logits)
    }

    /// Teacher-forced `log p(outs | x)` node, with logits divided by
    /// `grad_tau` when given.
    pub(crate) fn forced_log_prob(&self, g: &mut Graph, enc: &EncState, outs: &[usize], grad_tau: Option<f64>) -> Var {
        let mut s = enc.s0;
        let mut prev = BOS_ID;
        let mut rows = Vec::with_capacity(outs.len());
        for &k in outs {
            let (s_new, logits) = self.step(g, enc, s, prev);
            rows.push(logits);
            s = s_new;
            prev = k + FIRST_EMITTABLE;
        }
        let mut all = g.concat_rows(&rows);
        if let Some(tau) = grad_tau {
            all = g.scale(all, 1.0 / tau);
        }
        let lp = g.log_softmax(all);
        let picks: Vec<Var> = outs.iter().enumerate().map(|(t, &k)| g.pick(lp, t, k)).collect();
        let picked = g.concat_rows(&picks);
        g.sum(picked)
    }

    /// Teacher-forced log-probability with per-step terms.
    pub fn log_prob(&self, x: &Sentence, y: &Sentence) -> Result<SequenceScore> {
        let (lp, _) = self.score_tempered(x, y, 1.0)?;
        Ok(lp)
    }

    /// Untempered score plus `log p_tau(y|x)`.
    pub fn score_tempered(&self, x: &Sentence, y: &Sentence, tau: f64) -> Result<(SequenceScore, f64)> {
        check_tau(tau)?;
        let src = self.source_ids(x)?;
        let outs = self.target_outputs(y)?;
        let mut g = Graph::new(&self.params);
        let enc = self.encode(&mut g, &src);
        let mut s = enc.s0;
        let mut prev = BOS_ID;
        let mut per_token = Vec::with_capacity(outs.len());
        let mut tempered = 0.0;
        for &k in &outs {
            let (s_new, logits) = self.step(&mut g, &enc, s, prev);
            let o = &g.value(logits).data;
            per_token.push(tempered_log_softmax(o, 1.0)[k]);
            tempered += tempered_log_softmax(o, tau)[k];
            s = s_new;
            prev = k + FIRST_EMITTABLE;
        }
        Ok((SequenceScore { log_prob: per_token.iter().sum(), per_token }, tempered))
    }

    /// Ancestral sampling inside `g`; returns the outputs, the scored
    /// log-probability node (divided by `grad_tau` if given), and the
    /// untempered and tempered log-probabilities.
    pub(crate) fn rollout(
        &self,
        g: &mut Graph,
        enc: &EncState,
        tau: f64,
        grad_tau: Option<f64>,
        rng: &mut (impl Rng + ?Sized),
    ) -> (Vec<usize>, Var, f64, f64) {
        let mut s = enc.s0;
        let mut prev = BOS_ID;
        let mut outs = Vec::new();
        let mut picks = Vec::new();
        let (mut lp_plain, mut lp_temp) = (0.0, 0.0);
        while outs.len() < self.cfg.max_len {
            let (s_new, logits) = self.step(g, enc, s, prev);
            let o = g.value(logits).data.clone();
            let temp = tempered_log_softmax(&o, tau);
            let k = draw(&temp, rng);
            lp_temp += temp[k];
            lp_plain += tempered_log_softmax(&o, 1.0)[k];
            let scored = match grad_tau {
                Some(t) => g.scale(logits, 1.0 / t),
                None => logits,
            };
            let lsm = g.log_softmax(scored);
            picks.push(g.pick(lsm, 0, k));
            outs.push(k);
            s = s_new;
            prev = k + FIRST_EMITTABLE;
            if prev == EOS_ID {
                break;
            }
        }
        let all = g.concat_rows(&picks);
        let total = g.sum(all);
        (outs, total, lp_plain, lp_temp)
    }

    /// `k` independent samples from `softmax(o / tau)`; duplicates are kept.
    pub fn sample(&self, x: &Sentence, k: usize, tau: f64, rng: &mut (impl Rng + ?Sized)) -> Result<Vec<Sample>> {
        check_tau(tau)?;
        let src = self.source_ids(x)?;
        let mut g = Graph::new(&self.params);
        let enc = self.encode(&mut g, &src);
        Ok((0..k)
            .map(|_| {
                let (outs, _, lp, lpt) = self.rollout(&mut g, &enc, tau, None, rng);
                Sample { translation: self.outputs_to_sentence(&outs), log_prob: lp, tempered_log_prob: lpt }
            })
            .collect())
    }

    fn greedy_outputs(&self, g: &mut Graph, enc: &EncState) -> (Vec<usize>, f64) {
        let mut s = enc.s0;
        let mut prev = BOS_ID;
        let mut outs = Vec::new();
        let mut lp = 0.0;
        while outs.len() < self.cfg.max_len {
            let (s_new, logits) = self.step(g, enc, s, prev);
            let o = &g.value(logits).data;
            let k = argmax(o);
            lp += tempered_log_softmax(o, 1.0)[k];
            outs.push(k);
            s = s_new;
            prev = k + FIRST_EMITTABLE;
            if prev == EOS_ID {
                break;
            }
        }
        (outs, lp)
    }

    pub fn greedy_decode(&self, x: &Sentence) -> Result<Hypothesis> {
        let src = self.source_ids(x)?;
        let mut g = Graph::new(&self.params);
        let enc = self.encode(&mut g, &src);
        let (outs, lp) = self.greedy_outputs(&mut g, &enc);
        Ok(Hypothesis { translation: self.outputs_to_sentence(&outs), log_prob: lp })
    }

    /// Up to `width` distinct complete hypotheses, best first, ranked by
    /// total log-probability (or per-token average with `length_norm`).
    pub fn beam_decode(&self, x: &Sentence, width: usize, length_norm: bool) -> Result<Vec<Hypothesis>> {
        if width == 0 {
            return Err(Error::invalid("beam width must be positive"));
        }
        let src = self.source_ids(x)?;
        let mut g = Graph::new(&self.params);
        let enc = self.encode(&mut g, &src);
        let rank = |outs: &[usize], lp: f64| if length_norm { lp / outs.len() as f64 } else { lp };

        struct Live {
            outs: Vec<usize>,
            lp: f64,
            s: Var,
        }
        let mut alive = vec![Live { outs: vec![], lp: 0.0, s: enc.s0 }];
        let mut done: Vec<(Vec<usize>, f64)> = Vec::new();
        while !alive.is_empty() {
            let mut cands: Vec<(usize, usize, f64, Var)> = Vec::new();
            for (i, h) in alive.iter().enumerate() {
                let prev = h.outs.last().map_or(BOS_ID, |k| k + FIRST_EMITTABLE);
                let (s_new, logits) = self.step(&mut g, &enc, h.s, prev);
                let lsm = tempered_log_softmax(&g.value(logits).data, 1.0);
                for (k, l) in lsm.into_iter().enumerate() {
                    cands.push((i, k, h.lp + l, s_new));
                }
            }
            cands.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
            let mut next = Vec::new();
            for (i, k, lp, s) in cands.into_iter().take(width) {
                let mut outs = alive[i].outs.clone();
                outs.push(k);
                if k + FIRST_EMITTABLE == EOS_ID || outs.len() == self.cfg.max_len {
                    done.push((outs, lp));
                } else {
                    next.push(Live { outs, lp, s });
                }
            }
            alive = next;
            done.sort_by(|a, b| rank(&b.0, b.1).total_cmp(&rank(&a.0, a.1)).then(a.0.cmp(&b.0)));
            done.truncate(width);
            // extensions only lower the unnormalized score
            if !length_norm && done.len() == width {
                let worst = done[width - 1].1;
                alive.retain(|h| h.lp > worst);
            }
        }
        let (greedy, glp) = self.greedy_outputs(&mut g, &enc);
        if !done.iter().any(|d| d.0 == greedy) && done.first().map_or(true, |d| rank(&greedy, glp) > rank(&d.0, d.1)) {
            done.insert(0, (greedy, glp));
            done.truncate(width);
        }
        Ok(done
            .into_iter()
            .map(|(outs, lp)| Hypothesis { translation: self.outputs_to_sentence(&outs), log_prob: lp })
            .collect())
    }

    pub fn to_json(&self) -> Result<String> {
        let ck = Checkpoint {
            kind: CHECKPOINT_KIND.into(),
            config: self.cfg.clone(),
            src_vocab: self.src_vocab.clone(),
            tgt_vocab: self.tgt_vocab.clone(),
            params: self.params.clone(),
        };
        Ok(serde_json::to_string(&ck)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(text)?;
        if ck.kind != CHECKPOINT_KIND {
            return Err(Error::invalid(format!("checkpoint holds a `{}`, not a policy", ck.kind)));
        }
        let mut p = Policy::new(ck.config, ck.src_vocab, ck.tgt_vocab, 0)?;
        p.params.load_from(&ck.params).map_err(Error::Validation)?;
        if !p.params.all_finite() {
            return Err(Error::Numerical("checkpoint contains non-finite weights".into()));
        }
        Ok(p)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::file(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Self::from_json(&text)
    }
}

pub(crate) fn check_tau(tau: f64) -> Result<()> {
    if tau.is_nan() || tau <= 0.0 {
        return Err(Error::invalid(format!("temperature must be > 0, got {tau}")));
    }
    Ok(())
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    /// Two words plus `</s>`: three outputs.
    pub(crate) fn toy(max_len: usize, seed: u64) -> Policy {
        let cfg = PolicyConfig { emb_dim: 3, hidden: 3, attn_dim: 2, max_len };
        Policy::new(cfg, Vocab::from_words(["x", "y"]), Vocab::from_words(["a", "b"]), seed).unwrap()
    }

    /// Every output sequence of at most `max_len` steps.
    pub(crate) fn all_outputs(p: &Policy) -> Vec<Sentence> {
        let words = ["a", "b"];
        let mut out = vec![Sentence::new(vec![])];
        let mut frontier = vec![vec![]];
        for _ in 0..p.cfg.max_len {
            let mut next = vec![];
            for f in &frontier {
                for w in words {
                    let mut s: Vec<String> = f.clone();
                    s.push(w.to_owned());
                    out.push(Sentence::new(s.clone()));
                    next.push(s);
                }
            }
            frontier = next;
        }
        out
    }

    #[test]
    fn enumeration_sums_to_one() {
        let p = toy(3, 4);
        let x = Sentence::parse("x y x");
        let total: f64 = all_outputs(&p).iter().map(|y| p.log_prob(&x, y).unwrap().log_prob.exp()).sum();
        assert!((total - 1.0).abs() < 1e-12, "{total}");
    }

    #[test]
    fn single_output_has_zero_log_prob() {
        let cfg = PolicyConfig { emb_dim: 3, hidden: 3, attn_dim: 2, max_len: 5 };
        let p = Policy::new(cfg, Vocab::from_words(["x"]), Vocab::from_words(Vec::<&str>::new()), 1).unwrap();
        let s = p.log_prob(&Sentence::parse("x"), &Sentence::new(vec![])).unwrap();
        assert_eq!(s.per_token, vec![0.0]);
    }

    #[test]
    fn unknown_target_token_rejected() {
        let p = toy(3, 1);
        assert!(p.log_prob(&Sentence::parse("x"), &Sentence::parse("zzz")).is_err());
        assert!(p.log_prob(&Sentence::parse("x"), &Sentence::parse("a a a a")).is_err());
    }

    #[test]
    fn near_zero_temperature_is_greedy() {
        let p = toy(4, 2);
        let x = Sentence::parse("y x");
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let g = p.greedy_decode(&x).unwrap();
        for s in p.sample(&x, 5, 1e-6, &mut rng).unwrap() {
            assert_eq!(s.translation, g.translation);
        }
        assert!(p.sample(&x, 1, 0.0, &mut rng).is_err());
    }

    #[test]
    fn infinite_temperature_is_uniform() {
        let p = toy(1, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = p.sample(&Sentence::parse("x"), 3, f64::INFINITY, &mut rng).unwrap();
        assert!(s.iter().all(|s| (s.tempered_log_prob + 3f64.ln()).abs() < 1e-12));
    }

    #[test]
    fn beam_matches_exhaustive_ranking() {
        let p = toy(3, 5);
        let x = Sentence::parse("x y");
        let mut all: Vec<(Sentence, f64)> =
            all_outputs(&p).into_iter().map(|y| (y.clone(), p.log_prob(&x, &y).unwrap().log_prob)).collect();
        all.sort_by(|a, b| b.1.total_cmp(&a.1));
        let beam = p.beam_decode(&x, all.len(), false).unwrap();
        assert_eq!(beam.len(), all.len());
        for (h, (y, lp)) in beam.iter().zip(&all) {
            assert!((h.log_prob - lp).abs() < 1e-12);
            assert!((p.log_prob(&x, &h.translation).unwrap().log_prob - h.log_prob).abs() < 1e-12);
            let _ = y;
        }
    }

    #[test]
    fn width_one_is_greedy_and_beam_dominates() {
        let p = toy(4, 8);
        for x in ["x", "y y", "x y x"] {
            let x = Sentence::parse(x);
            let g = p.greedy_decode(&x).unwrap();
            assert_eq!(p.beam_decode(&x, 1, false).unwrap()[0], g);
            assert!(p.beam_decode(&x, 3, false).unwrap()[0].log_prob >= g.log_prob);
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        let p = toy(3, 9);
        let q = Policy::from_json(&p.to_json().unwrap()).unwrap();
        assert_eq!(p.params, q.params);
    }
}
