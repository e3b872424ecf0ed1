use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ServiceState;
use crate::error::{Error, Result};
use crate::ratings::{read_jsonl_file, ItemPair, PlanLine, SessionPlan, TaskKind, TranslationItem};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RaterConfig {
    pub id: String,
    pub token: String,
    pub task: TaskKind,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanPaths {
    pub cardinal: Option<PathBuf>,
    pub pairwise: Option<PathBuf>,
}

/// Service configuration file (TOML). Relative paths are resolved against
/// the file's directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    #[serde(default = "default_bind")]
    pub bind: String,
    pub log_path: PathBuf,
    #[serde(default)]
    pub items: Option<PathBuf>,
    #[serde(default)]
    pub pairs: Option<PathBuf>,
    #[serde(default)]
    pub plans: PlanPaths,
    #[serde(default)]
    pub static_dir: Option<PathBuf>,
    /// Bearer token for the export endpoints.
    pub admin_token: String,
    #[serde(default)]
    pub raters: Vec<RaterConfig>,
}

fn default_bind() -> String {
    "127.0.0.1:8080".into()
}

impl ServiceConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::invalid(format!("service config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve(base);
        Ok(cfg)
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.log_path);
        for p in [&mut self.items, &mut self.pairs, &mut self.plans.cardinal, &mut self.plans.pairwise, &mut self.static_dir]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.admin_token.is_empty() || self.raters.iter().any(|r| r.token.is_empty()) {
            return Err(Error::invalid("tokens must be non-empty"));
        }
        Ok(())
    }

    /// Fresh (not yet replayed) state from the configured files.
    pub fn build_state(&self) -> Result<ServiceState> {
        self.validate()?;
        let mut plans = HashMap::new();
        for (kind, path) in [(TaskKind::Cardinal, &self.plans.cardinal), (TaskKind::Pairwise, &self.plans.pairwise)] {
            if let Some(p) = path {
                let lines: Vec<PlanLine> = read_jsonl_file(p)?;
                plans.insert(kind, SessionPlan::from_lines(&lines)?);
            }
        }
        let items: Vec<TranslationItem> = match &self.items {
            Some(p) => read_jsonl_file(p)?,
            None => vec![],
        };
        let pairs: Vec<ItemPair> = match &self.pairs {
            Some(p) => read_jsonl_file(p)?,
            None => vec![],
        };
        let raters: Vec<(String, TaskKind)> = self.raters.iter().map(|r| (r.id.clone(), r.task)).collect();
        ServiceState::new(plans, items, pairs, &raters)
    }
}
