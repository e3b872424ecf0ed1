use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{mse_loss_and_grad, pw_loss_and_grad, Estimator, PreferencePair, RewardExample};
use crate::autodiff::{Adam, AdamConfig, ParamSet};
use crate::error::{Error, Result};
use crate::metrics::{spearman_rho, ter, MetricConfig};
use crate::text::Sentence;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    #[default]
    Mse,
    Pw,
}

impl std::str::FromStr for Objective {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mse" => Ok(Objective::Mse),
            "pw" => Ok(Objective::Pw),
            _ => Err(Error::invalid(format!("unknown objective `{s}` (mse|pw)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorTrainConfig {
    pub objective: Objective,
    pub p_aux: f64,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub max_steps: usize,
    /// Dev evaluation interval in steps; 0 disables early stopping.
    pub eval_every: usize,
    pub patience: usize,
    pub clip_norm: Option<f64>,
    pub seed: u64,
}

impl Default for EstimatorTrainConfig {
    fn default() -> Self {
        EstimatorTrainConfig {
            objective: Objective::Mse,
            p_aux: 0.8,
            batch_size: 16,
            adam: AdamConfig::default(),
            max_steps: 1000,
            eval_every: 100,
            patience: 5,
            clip_norm: None,
            seed: 1,
        }
    }
}

impl EstimatorTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p_aux) {
            return Err(Error::invalid("p_aux must lie in [0, 1]"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be positive"));
        }
        Ok(())
    }
}

/// Supervision for one data source; the objective picks which list is used.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EstimatorData {
    pub rewards: Vec<RewardExample>,
    pub prefs: Vec<PreferencePair>,
}

impl EstimatorData {
    fn len_for(&self, obj: Objective) -> usize {
        match obj {
            Objective::Mse => self.rewards.len(),
            Objective::Pw => self.prefs.len(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalExample {
    pub source: Sentence,
    pub hypothesis: Sentence,
    pub reference: Sentence,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatchSource {
    Human,
    Aux,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub step: usize,
    pub source: BatchSource,
    pub loss: f64,
    pub grad_norm: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dev_rho: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub records: Vec<TrainRecord>,
    pub best_step: usize,
    pub best_dev_rho: Option<f64>,
    pub stopped_early: bool,
}

/// Spearman correlation of predicted rewards with TER against references.
/// Good estimators give negative values.
pub fn evaluate_estimator(est: &Estimator, data: &[EvalExample], mcfg: &MetricConfig) -> Result<f64> {
    if data.len() < 2 {
        return Err(Error::invalid("need at least two evaluation examples"));
    }
    let mut preds = Vec::with_capacity(data.len());
    let mut ters = Vec::with_capacity(data.len());
    for ex in data {
        preds.push(est.predict(&ex.source, &ex.hypothesis)?);
        ters.push(ter(ex.hypothesis.tokens(), ex.reference.tokens(), mcfg)?);
    }
    spearman_rho(&preds, &ters)
}

/// Adam on the MSE or pairwise loss. Each step draws its minibatch from the
/// auxiliary data with probability `p_aux`, else from the human data. With a
/// dev set and `eval_every > 0`, the weights with the most negative dev
/// Spearman-vs-TER are kept and training stops after `patience` evaluations
/// without improvement.
pub fn train_estimator(
    est: &mut Estimator,
    human: &EstimatorData,
    aux: &EstimatorData,
    dev: &[EvalExample],
    cfg: &EstimatorTrainConfig,
) -> Result<TrainReport> {
    cfg.validate()?;
    let obj = cfg.objective;
    if cfg.p_aux < 1.0 && human.len_for(obj) == 0 {
        return Err(Error::invalid("no human training data for the chosen objective and p_aux < 1"));
    }
    if cfg.p_aux > 0.0 && aux.len_for(obj) == 0 {
        return Err(Error::invalid("no auxiliary training data for the chosen objective and p_aux > 0"));
    }
    let mcfg = MetricConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut opt = Adam::new(&est.params, cfg.adam.clone());
    let mut report = TrainReport::default();
    let mut best: Option<(f64, ParamSet)> = None;
    let mut since_best = 0;
    let use_dev = cfg.eval_every > 0 && dev.len() >= 2;

    for step in 1..=cfg.max_steps {
        let from_aux = rng.gen::<f64>() < cfg.p_aux;
        let (data, source) = if from_aux { (aux, BatchSource::Aux) } else { (human, BatchSource::Human) };
        let (loss, mut grads) = match obj {
            Objective::Mse => {
                let batch: Vec<RewardExample> =
                    (0..cfg.batch_size).map(|_| data.rewards.choose(&mut rng).cloned().expect("non-empty")).collect();
                mse_loss_and_grad(est, &batch, Some(&mut rng))?
            }
            Objective::Pw => {
                let batch: Vec<PreferencePair> =
                    (0..cfg.batch_size).map(|_| data.prefs.choose(&mut rng).cloned().expect("non-empty")).collect();
                pw_loss_and_grad(est, &batch, Some(&mut rng))?
            }
        };
        let grad_norm = match cfg.clip_norm {
            Some(c) => grads.clip_norm(c),
            None => grads.norm(),
        };
        opt.descend(&mut est.params, &grads);
        if !est.params.all_finite() {
            return Err(Error::Numerical(format!("non-finite estimator weights at step {step}")));
        }
        let mut rec = TrainRecord { step, source, loss, grad_norm, dev_rho: None };
        if use_dev && step % cfg.eval_every == 0 {
            let rho = evaluate_estimator(est, dev, &mcfg).ok();
            rec.dev_rho = rho;
            match (rho, &best) {
                (Some(r), Some((b, _))) if r >= *b => since_best += 1,
                (None, _) => since_best += 1,
                (Some(r), _) => {
                    best = Some((r, est.params.clone()));
                    report.best_step = step;
                    report.best_dev_rho = Some(r);
                    since_best = 0;
                }
            }
        }
        tracing::debug!(step, loss, "estimator step");
        report.records.push(rec);
        if use_dev && cfg.patience > 0 && since_best >= cfg.patience {
            report.stopped_early = true;
            break;
        }
    }
    if let Some((_, params)) = best {
        est.params = params;
        est.set_freeze_embeddings(est.cfg.freeze_embeddings);
    } else {
        report.best_step = report.records.len();
    }
    Ok(report)
}
