use serde::{Deserialize, Serialize};

use super::{Gradients, Matrix, ParamSet};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub l2: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            l2: 0.0,
        }
    }
}

/// Adaptive-moment optimizer. Steps are **ascent** or **descent** as the
/// caller chooses through [`Adam::descend`] / [`Adam::ascend`].
#[derive(Clone, Debug)]
pub struct Adam {
    pub cfg: AdamConfig,
    m: Vec<Matrix>,
    v: Vec<Matrix>,
    t: u64,
}

impl Adam {
    pub fn new(params: &ParamSet, cfg: AdamConfig) -> Self {
        let zeros: Vec<Matrix> = params
            .ids()
            .map(|id| {
                let p = params.get(id);
                Matrix::zeros(p.rows, p.cols)
            })
            .collect();
        Adam {
            cfg,
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn descend(&mut self, params: &mut ParamSet, grads: &Gradients) {
        self.update(params, grads, -1.0);
    }

    pub fn ascend(&mut self, params: &mut ParamSet, grads: &Gradients) {
        self.update(params, grads, 1.0);
    }

    fn update(&mut self, params: &mut ParamSet, grads: &Gradients, sign: f64) {
        if self.cfg.lr == 0.0 {
            return;
        }
        self.t += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
            l2,
        } = self.cfg;
        let bc1 = 1.0 - beta1.powi(self.t as i32);
        let bc2 = 1.0 - beta2.powi(self.t as i32);
        for id in params.ids().collect::<Vec<_>>() {
            if params.is_frozen(id) {
                continue;
            }
            let g = grads.get(id);
            let m = &mut self.m[id.0];
            let v = &mut self.v[id.0];
            let p = params.get_mut(id);
            for i in 0..p.data.len() {
                // l2 pulls toward zero regardless of ascent/descent
                let gi = g.data[i] - sign * l2 * p.data[i];
                m.data[i] = beta1 * m.data[i] + (1.0 - beta1) * gi;
                v.data[i] = beta2 * v.data[i] + (1.0 - beta2) * gi * gi;
                let mh = m.data[i] / bc1;
                let vh = v.data[i] / bc2;
                p.data[i] += sign * lr * mh / (vh.sqrt() + eps);
            }
        }
    }
}

/// Plain gradient step, `params += sign * lr * grads`.
pub fn sgd_step(params: &mut ParamSet, grads: &Gradients, lr: f64, sign: f64) {
    for (id, g) in grads.iter() {
        if params.is_frozen(id) {
            continue;
        }
        let p = params.get_mut(id);
        for (a, b) in p.data.iter_mut().zip(&g.data) {
            *a += sign * lr * b;
        }
    }
}
