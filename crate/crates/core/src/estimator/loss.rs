use rand::RngCore;

use super::{Estimator, PreferencePair, RewardExample};
use crate::autodiff::{Gradients, Graph};
use crate::error::{Error, Result};

/// `(1/n) sum (r - r_hat)^2` and its gradient. A `dropout_rng` enables
/// training-mode dropout.
pub fn mse_loss_and_grad(
    est: &Estimator,
    batch: &[RewardExample],
    mut dropout_rng: Option<&mut (dyn RngCore + '_)>,
) -> Result<(f64, Gradients)> {
    if batch.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    let mut g = Graph::new(&est.params);
    let mut terms = Vec::with_capacity(batch.len());
    for ex in batch {
        ex.validate()?;
        let (s, t) = est.encode_pair(&ex.source, &ex.target)?;
        let r_hat = est.forward(&mut g, &s, &t, dropout_rng.as_deref_mut());
        let diff = g.add_const(r_hat, -ex.reward);
        terms.push(g.mul(diff, diff));
    }
    let all = g.concat_rows(&terms);
    let total = g.sum(all);
    let loss = g.scale(total, 1.0 / batch.len() as f64);
    finish(&g, loss)
}

/// Bradley-Terry cross-entropy
/// `-(1/n) sum q log P + (1 - q) log(1 - P)` with
/// `P = sigmoid(r_hat(y1) - r_hat(y2))`.
pub fn pw_loss_and_grad(
    est: &Estimator,
    batch: &[PreferencePair],
    mut dropout_rng: Option<&mut (dyn RngCore + '_)>,
) -> Result<(f64, Gradients)> {
    if batch.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    let mut g = Graph::new(&est.params);
    let mut terms = Vec::with_capacity(batch.len());
    for p in batch {
        p.validate()?;
        let (s, t1) = est.encode_pair(&p.source, &p.target_1)?;
        let t2 = est.encode_pair(&p.source, &p.target_2)?.1;
        let r1 = est.forward(&mut g, &s, &t1, dropout_rng.as_deref_mut());
        let r2 = est.forward(&mut g, &s, &t2, dropout_rng.as_deref_mut());
        let d = g.sub(r1, r2);
        let log_p = g.log_sigmoid(d);
        let neg = g.scale(d, -1.0);
        let log_not_p = g.log_sigmoid(neg);
        let a = g.scale(log_p, p.q);
        let b = g.scale(log_not_p, 1.0 - p.q);
        terms.push(g.add(a, b));
    }
    let all = g.concat_rows(&terms);
    let total = g.sum(all);
    let loss = g.scale(total, -1.0 / batch.len() as f64);
    finish(&g, loss)
}

fn finish(g: &Graph, loss: crate::autodiff::Var) -> Result<(f64, Gradients)> {
    let value = g.scalar(loss);
    if !value.is_finite() {
        return Err(Error::Numerical(format!("loss is {value}")));
    }
    Ok((value, g.backward(loss)))
}

/// Model preference probability `P(y1 > y2 | x)`.
pub fn preference_probability(est: &Estimator, p: &PreferencePair) -> Result<f64> {
    let r1 = est.predict(&p.source, &p.target_1)?;
    let r2 = est.predict(&p.source, &p.target_2)?;
    Ok(crate::autodiff::sigmoid(r1 - r2))
}
