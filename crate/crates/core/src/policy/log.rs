use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ratings::{export_jsonl, import_jsonl, read_jsonl_file, write_jsonl_file};
use crate::text::Sentence;

/// One logged translation with its reward.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeedbackEntry {
    pub source: Sentence,
    pub translation: Sentence,
    pub reward: f64,
}

impl FeedbackEntry {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.reward) {
            return Err(Error::invalid(format!("logged reward {} outside [0, 1]", self.reward)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FeedbackLog {
    pub entries: Vec<FeedbackEntry>,
}

impl FeedbackLog {
    pub fn new(entries: Vec<FeedbackEntry>) -> Result<Self> {
        entries.iter().try_for_each(FeedbackEntry::validate)?;
        Ok(FeedbackLog { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn write_jsonl(&self, out: impl Write) -> Result<()> {
        export_jsonl(&self.entries, out)
    }

    pub fn read_jsonl(input: impl BufRead) -> Result<Self> {
        Self::new(import_jsonl(input)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::new(read_jsonl_file(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_jsonl_file(path, &self.entries)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_round_trip_and_validation() {
        let log = FeedbackLog::new(vec![FeedbackEntry {
            source: Sentence::parse("x y"),
            translation: Sentence::parse("a"),
            reward: 0.25,
        }])
        .unwrap();
        let mut buf = Vec::new();
        log.write_jsonl(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "{\"source\":\"x y\",\"translation\":\"a\",\"reward\":0.25}\n");
        assert_eq!(FeedbackLog::read_jsonl(&buf[..]).unwrap(), log);
        let bad = b"{\"source\":\"x\",\"translation\":\"a\",\"reward\":1.5}\n";
        assert!(FeedbackLog::read_jsonl(&bad[..]).is_err());
    }
}
