//! Tokenized sentences, vocabularies and parallel corpora.
//!
//! Tokenization is whitespace splitting. A sentence serializes as its
//! space-joined text so that every on-disk format stays human readable.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Sentence(Vec<String>);

impl Sentence {
    pub fn new(tokens: Vec<String>) -> Self {
        Sentence(tokens)
    }

    pub fn parse(text: &str) -> Self {
        Sentence(text.split_whitespace().map(str::to_owned).collect())
    }

    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn text(&self) -> String {
        self.0.join(" ")
    }
}

impl fmt::Display for Sentence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text())
    }
}

impl From<&str> for Sentence {
    fn from(s: &str) -> Self {
        Sentence::parse(s)
    }
}

impl Serialize for Sentence {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.text())
    }
}

impl<'de> Deserialize<'de> for Sentence {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Ok(Sentence::parse(&s))
    }
}

pub const PAD: &str = "<pad>";
pub const BOS: &str = "<s>";
pub const UNK: &str = "<unk>";
pub const EOS: &str = "</s>";

pub const PAD_ID: usize = 0;
pub const BOS_ID: usize = 1;
pub const UNK_ID: usize = 2;
pub const EOS_ID: usize = 3;
/// Ids at or above this value can be emitted by a decoder (`</s>` and words).
pub const FIRST_EMITTABLE: usize = EOS_ID;

/// Closed vocabulary with the four reserved symbols at ids 0..4.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    pub fn from_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut tokens: Vec<String> = [PAD, BOS, UNK, EOS].iter().map(|s| s.to_string()).collect();
        let mut seen: std::collections::BTreeSet<String> = std::collections::BTreeSet::new();
        for w in words {
            let w = w.as_ref();
            if !tokens[..4].iter().any(|t| t == w) {
                seen.insert(w.to_owned());
            }
        }
        tokens.extend(seen);
        Vocab::from(tokens)
    }

    pub fn build<'a>(sentences: impl IntoIterator<Item = &'a Sentence>) -> Self {
        Vocab::from_words(sentences.into_iter().flat_map(|s| s.tokens().iter()))
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: usize) -> &str {
        self.tokens.get(id).map(String::as_str).unwrap_or(UNK)
    }

    pub fn encode(&self, s: &Sentence) -> Vec<usize> {
        s.tokens().iter().map(|t| self.id(t)).collect()
    }

    pub fn decode(&self, ids: &[usize]) -> Sentence {
        Sentence(ids.iter().map(|&i| self.token(i).to_owned()).collect())
    }

    /// Number of ids a decoder may emit: `</s>` plus every word.
    pub fn n_emittable(&self) -> usize {
        self.tokens.len() - FIRST_EMITTABLE
    }
}

impl From<Vec<String>> for Vocab {
    fn from(tokens: Vec<String>) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocab { tokens, index }
    }
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Self {
        v.tokens
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    #[default]
    Train,
    Dev,
    Test,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParallelCorpus {
    pub pairs: Vec<(Sentence, Sentence)>,
    pub split: Split,
}

impl ParallelCorpus {
    pub fn new(pairs: Vec<(Sentence, Sentence)>, split: Split) -> Self {
        ParallelCorpus { pairs, split }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn sources(&self) -> impl Iterator<Item = &Sentence> {
        self.pairs.iter().map(|p| &p.0)
    }

    pub fn targets(&self) -> impl Iterator<Item = &Sentence> {
        self.pairs.iter().map(|p| &p.1)
    }

    /// Parses `source<TAB>target` lines. Blank lines are skipped.
    pub fn parse_tsv(text: &str, split: Split) -> Result<Self> {
        let mut pairs = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (src, tgt) = line.split_once('\t').ok_or_else(|| Error::Parse {
                line: i + 1,
                message: "expected a tab-separated source/target pair".into(),
            })?;
            pairs.push((Sentence::parse(src), Sentence::parse(tgt)));
        }
        Ok(ParallelCorpus { pairs, split })
    }

    pub fn read_tsv(path: &Path, split: Split) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Self::parse_tsv(&text, split)
    }

    /// Reads twin files with one sentence per line; line counts must agree.
    pub fn read_twin(src: &Path, tgt: &Path, split: Split) -> Result<Self> {
        let a = fs::read_to_string(src).map_err(|e| Error::file(src, e))?;
        let b = fs::read_to_string(tgt).map_err(|e| Error::file(tgt, e))?;
        let a: Vec<&str> = a.lines().collect();
        let b: Vec<&str> = b.lines().collect();
        if a.len() != b.len() {
            return Err(Error::invalid(format!(
                "parallel files are not aligned: {} vs {} lines",
                a.len(),
                b.len()
            )));
        }
        let pairs = a
            .into_iter()
            .zip(b)
            .map(|(x, y)| (Sentence::parse(x), Sentence::parse(y)))
            .collect();
        Ok(ParallelCorpus { pairs, split })
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (x, y) in &self.pairs {
            out.push_str(&x.text());
            out.push('\t');
            out.push_str(&y.text());
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vocab_reserves_specials() {
        let v = Vocab::build([&Sentence::parse("b a b")]);
        assert_eq!(v.len(), 6);
        assert_eq!(v.id(PAD), PAD_ID);
        assert_eq!(v.id(EOS), EOS_ID);
        assert_eq!(v.id("a"), 4);
        assert_eq!(v.id("zzz"), UNK_ID);
        assert_eq!(v.n_emittable(), 3);
    }

    #[test]
    fn tsv_reports_line_of_missing_tab() {
        let err = ParallelCorpus::parse_tsv("a\tb\nno tab here\n", Split::Train).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn sentence_serializes_as_text() {
        let s = Sentence::parse("  hello   world ");
        assert_eq!(serde_json::to_string(&s).unwrap(), "\"hello world\"");
    }
}
