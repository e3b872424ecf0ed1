use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha1::{Digest, Sha1};

use banditmt::text::{ParallelCorpus, Sentence, Split};
use banditmt::{Error, Result};

use super::{usage, CliResult};

/// Content hash in git's blob format: `sha1("blob <len>\0" ++ bytes)`.
pub fn git_blob_sha1(bytes: &[u8]) -> String {
    let mut h = Sha1::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    hex::encode(h.finalize())
}

#[derive(Serialize)]
struct InputHash {
    path: String,
    sha1: String,
}

/// Reproducibility record written next to every run's primary output.
#[derive(Serialize)]
pub struct Manifest {
    command: String,
    version: &'static str,
    seed: u64,
    config: serde_json::Value,
    inputs: Vec<InputHash>,
    outputs: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, seed: u64, config: &impl Serialize) -> Self {
        Manifest {
            command: command.to_owned(),
            version: env!("CARGO_PKG_VERSION"),
            seed,
            config: serde_json::to_value(config).unwrap_or(serde_json::Value::Null),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        let bytes = fs::read(path).map_err(|e| Error::file(path, e))?;
        self.inputs.push(InputHash { path: path.display().to_string(), sha1: git_blob_sha1(&bytes) });
        Ok(())
    }

    pub fn inputs<'a>(&mut self, paths: impl IntoIterator<Item = &'a PathBuf>) -> Result<()> {
        for p in paths {
            self.input(p)?;
        }
        Ok(())
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

/// Reads a TOML file into `T`, or `T::default()` without one.
pub fn load_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> CliResult<T> {
    let Some(path) = path else { return Ok(T::default()) };
    let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    toml::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
    }
    Ok(())
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    ensure_parent(path)?;
    fs::write(path, text).map_err(|e| Error::file(path, e))
}

pub fn read_corpus(path: &Path) -> Result<Vec<(Sentence, Sentence)>> {
    Ok(ParallelCorpus::read_tsv(path, Split::Train)?.pairs)
}

pub fn write_corpus(path: &Path, pairs: &[(Sentence, Sentence)]) -> Result<()> {
    let text: String = pairs.iter().map(|(x, y)| format!("{x}\t{y}\n")).collect();
    write_text(path, &text)
}

pub fn read_lines(path: &Path) -> Result<Vec<Sentence>> {
    let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    Ok(text.lines().map(Sentence::parse).collect())
}

pub fn write_lines(path: &Path, sents: &[Sentence]) -> Result<()> {
    let text: String = sents.iter().map(|s| format!("{s}\n")).collect();
    write_text(path, &text)
}

pub fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    ensure_parent(path)?;
    banditmt::ratings::write_jsonl_file(path, rows)
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    banditmt::ratings::read_jsonl_file(path)
}

/// Fails with a numerical error when any reported value is not finite.
pub fn check_finite<'a>(what: &str, values: impl IntoIterator<Item = &'a f64>) -> Result<()> {
    if values.into_iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!("{what} diverged to a non-finite value")));
    }
    Ok(())
}
