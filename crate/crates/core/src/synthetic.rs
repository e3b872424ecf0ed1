//! Token-substitution translation task with a lexical domain shift.
//!
//! In-domain, source word `sNN` always becomes `tNN`. In the out-of-domain
//! corpus the first `n_ambiguous` source words become the variant `uNN`
//! with probability `ood_variant_rate`, so a policy trained there prefers the
//! wrong word in-domain.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::{Sentence, Vocab};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub n_words: usize,
    pub n_ambiguous: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub ood_variant_rate: f64,
    pub n_ood_train: usize,
    pub n_train: usize,
    pub n_dev: usize,
    pub n_test: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_words: 30,
            n_ambiguous: 8,
            min_len: 4,
            max_len: 8,
            ood_variant_rate: 0.6,
            n_ood_train: 500,
            n_train: 500,
            n_dev: 100,
            n_test: 100,
            seed: 1,
        }
    }
}

pub type Pairs = Vec<(Sentence, Sentence)>;

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticTask {
    pub ood_train: Pairs,
    pub train: Pairs,
    pub dev: Pairs,
    pub test: Pairs,
    pub src_vocab: Vocab,
    pub tgt_vocab: Vocab,
}

pub fn src_word(i: usize) -> String {
    format!("s{i:02}")
}

pub fn tgt_word(i: usize) -> String {
    format!("t{i:02}")
}

pub fn variant_word(i: usize) -> String {
    format!("u{i:02}")
}

fn pair(cfg: &SyntheticConfig, rng: &mut ChaCha8Rng, out_of_domain: bool) -> (Sentence, Sentence) {
    let n = rng.gen_range(cfg.min_len..=cfg.max_len);
    let mut src = Vec::with_capacity(n);
    let mut tgt = Vec::with_capacity(n);
    for _ in 0..n {
        let w = rng.gen_range(0..cfg.n_words);
        src.push(src_word(w));
        let variant = out_of_domain && w < cfg.n_ambiguous && rng.gen::<f64>() < cfg.ood_variant_rate;
        tgt.push(if variant { variant_word(w) } else { tgt_word(w) });
    }
    (Sentence::new(src), Sentence::new(tgt))
}

pub fn generate(cfg: &SyntheticConfig) -> Result<SyntheticTask> {
    if cfg.n_words == 0 || cfg.n_ambiguous > cfg.n_words {
        return Err(Error::invalid("need 0 <= n_ambiguous <= n_words and n_words > 0"));
    }
    if cfg.min_len == 0 || cfg.min_len > cfg.max_len {
        return Err(Error::invalid("need 1 <= min_len <= max_len"));
    }
    if !(0.0..=1.0).contains(&cfg.ood_variant_rate) {
        return Err(Error::invalid("ood_variant_rate must lie in [0, 1]"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let ood_train = (0..cfg.n_ood_train).map(|_| pair(cfg, &mut rng, true)).collect();
    let train = (0..cfg.n_train).map(|_| pair(cfg, &mut rng, false)).collect();
    let dev = (0..cfg.n_dev).map(|_| pair(cfg, &mut rng, false)).collect();
    let test = (0..cfg.n_test).map(|_| pair(cfg, &mut rng, false)).collect();
    let src_vocab = Vocab::from_words((0..cfg.n_words).map(src_word));
    let tgt_vocab = Vocab::from_words((0..cfg.n_words).map(tgt_word).chain((0..cfg.n_ambiguous).map(variant_word)));
    Ok(SyntheticTask { ood_train, train, dev, test, src_vocab, tgt_vocab })
}
