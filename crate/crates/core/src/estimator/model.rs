use std::path::Path;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, Matrix, ParamId, ParamSet, Var};
use crate::error::{Error, Result};
use crate::nn::{dropout_mask, Linear, Lstm};
use crate::text::{Sentence, Vocab};

/// Token suffix marking a word piece that continues into the next token.
pub const CONTINUATION_SUFFIX: &str = "@@";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorConfig {
    pub emb_dim: usize,
    pub feat_dim: usize,
    pub hidden: usize,
    pub n_filters: usize,
    pub min_width: usize,
    pub max_width: usize,
    pub dropout: f64,
    pub max_len: usize,
    pub output_slope: f64,
    pub freeze_embeddings: bool,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            emb_dim: 32,
            feat_dim: 2,
            hidden: 32,
            n_filters: 8,
            min_width: 2,
            max_width: 5,
            dropout: 0.5,
            max_len: 100,
            output_slope: 0.01,
            freeze_embeddings: false,
        }
    }
}

impl EstimatorConfig {
    /// Sizes used in the original experiments (500-dim embeddings, 50 filters
    /// of widths 2..15).
    pub fn full_scale() -> Self {
        EstimatorConfig {
            emb_dim: 500,
            feat_dim: 10,
            hidden: 250,
            n_filters: 50,
            min_width: 2,
            max_width: 15,
            ..Self::default()
        }
    }

    pub fn pooled_width(&self) -> usize {
        self.n_filters * (self.max_width - self.min_width + 1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.emb_dim == 0 || self.feat_dim == 0 || self.hidden == 0 || self.n_filters == 0 {
            return Err(Error::invalid("estimator dimensions must be positive"));
        }
        if self.min_width == 0 || self.min_width > self.max_width {
            return Err(Error::invalid("filter widths need 1 <= min_width <= max_width"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::invalid("dropout must lie in [0, 1)"));
        }
        if self.max_len == 0 {
            return Err(Error::invalid("max_len must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
struct Layers {
    src_emb: ParamId,
    tgt_emb: ParamId,
    marker: ParamId,
    src_fwd: Lstm,
    src_bwd: Lstm,
    tgt_fwd: Lstm,
    tgt_bwd: Lstm,
    conv: Vec<(usize, Linear)>,
    out: Linear,
}

/// Bilingual reward model `r(x, y)`: biLSTM per side, convolution bank over
/// the joined states, max-over-time pooling and one leaky-ReLU unit.
#[derive(Clone, Debug)]
pub struct Estimator {
    pub cfg: EstimatorConfig,
    pub src_vocab: Vocab,
    pub tgt_vocab: Vocab,
    pub params: ParamSet,
    layers: Layers,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    kind: String,
    config: EstimatorConfig,
    src_vocab: Vocab,
    tgt_vocab: Vocab,
    params: ParamSet,
}

const CHECKPOINT_KIND: &str = "reward_estimator";

/// Token ids plus the binary continuation feature.
#[derive(Clone, Debug, PartialEq)]
pub struct Encoded {
    pub ids: Vec<usize>,
    pub marks: Vec<usize>,
}

impl Estimator {
    pub fn new(cfg: EstimatorConfig, src_vocab: Vocab, tgt_vocab: Vocab, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ps = ParamSet::new();
        let (e, f, h) = (cfg.emb_dim, cfg.feat_dim, cfg.hidden);
        let src_emb = ps.add("src_emb", Matrix::uniform(src_vocab.len(), e, 0.1, &mut rng));
        let tgt_emb = ps.add("tgt_emb", Matrix::uniform(tgt_vocab.len(), e, 0.1, &mut rng));
        let marker = ps.add("marker_emb", Matrix::uniform(2, f, 0.1, &mut rng));
        let src_fwd = Lstm::new(&mut ps, "src_fwd", e + f, h, &mut rng);
        let src_bwd = Lstm::new(&mut ps, "src_bwd", e + f, h, &mut rng);
        let tgt_fwd = Lstm::new(&mut ps, "tgt_fwd", e + f, h, &mut rng);
        let tgt_bwd = Lstm::new(&mut ps, "tgt_bwd", e + f, h, &mut rng);
        let conv = (cfg.min_width..=cfg.max_width)
            .map(|w| (w, Linear::new(&mut ps, &format!("conv{w}"), w * 4 * h, cfg.n_filters, &mut rng)))
            .collect();
        let out = Linear::new(&mut ps, "out", cfg.pooled_width(), 1, &mut rng);
        // small positive bias keeps the output unit in its linear region
        ps.get_mut(out.b).data[0] = 0.5;
        let layers = Layers { src_emb, tgt_emb, marker, src_fwd, src_bwd, tgt_fwd, tgt_bwd, conv, out };
        let mut est = Estimator { cfg, src_vocab, tgt_vocab, params: ps, layers };
        est.apply_freeze();
        Ok(est)
    }

    fn apply_freeze(&mut self) {
        let frozen = self.cfg.freeze_embeddings;
        self.params.set_frozen(self.layers.src_emb, frozen);
        self.params.set_frozen(self.layers.tgt_emb, frozen);
    }

    pub fn set_freeze_embeddings(&mut self, frozen: bool) {
        self.cfg.freeze_embeddings = frozen;
        self.apply_freeze();
    }

    fn encode(&self, vocab: &Vocab, s: &Sentence, side: &str) -> Result<Encoded> {
        if s.is_empty() {
            return Err(Error::invalid(format!("empty {side} sentence")));
        }
        if s.len() > self.cfg.max_len {
            return Err(Error::invalid(format!(
                "{side} sentence has {} tokens, limit is {}",
                s.len(),
                self.cfg.max_len
            )));
        }
        Ok(Encoded {
            ids: vocab.encode(s),
            marks: s.tokens().iter().map(|t| t.ends_with(CONTINUATION_SUFFIX) as usize).collect(),
        })
    }

    pub fn encode_pair(&self, source: &Sentence, target: &Sentence) -> Result<(Encoded, Encoded)> {
        Ok((self.encode(&self.src_vocab, source, "source")?, self.encode(&self.tgt_vocab, target, "target")?))
    }

    fn side(&self, g: &mut Graph, emb: ParamId, enc: &Encoded, fwd: &Lstm, bwd: &Lstm) -> Var {
        let e = g.gather(emb, &enc.ids);
        let m = g.gather(self.layers.marker, &enc.marks);
        let x = g.concat_cols(&[e, m]);
        let hf = fwd.run(g, x, false);
        let hb = bwd.run(g, x, true);
        g.concat_cols(&[hf, hb])
    }

    fn pad_rows(g: &mut Graph, a: Var, rows: usize) -> Var {
        let (r, c) = (g.value(a).rows, g.value(a).cols);
        if r == rows {
            return a;
        }
        let z = g.constant(Matrix::zeros(rows - r, c));
        g.concat_rows(&[a, z])
    }

    /// Pooled convolution features (1 × pooled_width) before dropout.
    pub fn pooled(&self, g: &mut Graph, src: &Encoded, tgt: &Encoded) -> Var {
        let l = &self.layers;
        let hs = self.side(g, l.src_emb, src, &l.src_fwd, &l.src_bwd);
        let ht = self.side(g, l.tgt_emb, tgt, &l.tgt_fwd, &l.tgt_bwd);
        let t_len = src.ids.len().max(tgt.ids.len()).max(self.cfg.max_width);
        let hs = Self::pad_rows(g, hs, t_len);
        let ht = Self::pad_rows(g, ht, t_len);
        let joint = g.concat_cols(&[hs, ht]);
        let width = 4 * self.cfg.hidden;
        let mut pooled = Vec::with_capacity(l.conv.len());
        for (w, lin) in &l.conv {
            let n_pos = t_len - w + 1;
            let wm = g.param(lin.w);
            let mut acc = None;
            for k in 0..*w {
                let xs = g.slice_rows(joint, k, n_pos);
                let wk = g.slice_rows(wm, k * width, width);
                let y = g.matmul(xs, wk);
                acc = Some(match acc {
                    None => y,
                    Some(a) => g.add(a, y),
                });
            }
            let b = g.param(lin.b);
            let z = g.add_row(acc.expect("width >= 1"), b);
            let z = g.tanh(z);
            pooled.push(g.max_rows(z));
        }
        g.concat_cols(&pooled)
    }

    /// Scalar reward node. `dropout_rng` switches on training mode.
    pub fn forward(&self, g: &mut Graph, src: &Encoded, tgt: &Encoded, dropout_rng: Option<&mut (dyn RngCore + '_)>) -> Var {
        let mut feats = self.pooled(g, src, tgt);
        if let Some(rng) = dropout_rng {
            if self.cfg.dropout > 0.0 {
                let mask = dropout_mask(1, self.cfg.pooled_width(), self.cfg.dropout, rng);
                feats = g.mul_const(feats, mask);
            }
        }
        let z = self.layers.out.apply(g, feats);
        g.leaky_relu(z, self.cfg.output_slope)
    }

    pub fn predict(&self, source: &Sentence, target: &Sentence) -> Result<f64> {
        let (s, t) = self.encode_pair(source, target)?;
        let mut g = Graph::new(&self.params);
        let r = self.forward(&mut g, &s, &t, None);
        Ok(g.scalar(r))
    }

    /// Prediction clamped to the reward range [0, 1].
    pub fn reward(&self, source: &Sentence, target: &Sentence) -> Result<f64> {
        Ok(self.predict(source, target)?.clamp(0.0, 1.0))
    }

    pub fn predict_batch(&self, pairs: &[(Sentence, Sentence)]) -> Result<Vec<f64>> {
        pairs.iter().map(|(s, t)| self.predict(s, t)).collect()
    }

    /// Pooled features in evaluation mode.
    pub fn pooled_features(&self, source: &Sentence, target: &Sentence) -> Result<Vec<f64>> {
        let (s, t) = self.encode_pair(source, target)?;
        let mut g = Graph::new(&self.params);
        let p = self.pooled(&mut g, &s, &t);
        Ok(g.value(p).data.clone())
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
            return Err(Error::invalid(format!("checkpoint holds a `{}`, not a reward estimator", ck.kind)));
        }
        let mut est = Estimator::new(ck.config, ck.src_vocab, ck.tgt_vocab, 0)?;
        est.params.load_from(&ck.params).map_err(Error::Validation)?;
        if !est.params.all_finite() {
            return Err(Error::Numerical("checkpoint contains non-finite weights".into()));
        }
        Ok(est)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::file(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Self::from_json(&text)
    }
}
