//! Recurrent and dense blocks shared by the estimator and the policy.

use rand::Rng;

use crate::autodiff::{Graph, Matrix, ParamId, ParamSet, Var};

pub(crate) fn init_scale(fan_in: usize) -> f64 {
    1.0 / (fan_in.max(1) as f64).sqrt()
}

/// `x W + b` with `W: in × out`.
#[derive(Clone, Debug)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
}

impl Linear {
    pub fn new(ps: &mut ParamSet, name: &str, input: usize, output: usize, rng: &mut impl Rng) -> Self {
        Linear {
            w: ps.add(format!("{name}.w"), Matrix::uniform(input, output, init_scale(input), rng)),
            b: ps.add(format!("{name}.b"), Matrix::zeros(1, output)),
        }
    }

    pub fn apply(&self, g: &mut Graph, x: Var) -> Var {
        let w = g.param(self.w);
        let b = g.param(self.b);
        let xw = g.matmul(x, w);
        g.add_row(xw, b)
    }
}

/// Single-direction LSTM with gate order `i f g o`.
#[derive(Clone, Debug)]
pub struct Lstm {
    pub input: Linear,
    pub recur: ParamId,
    pub hidden: usize,
}

impl Lstm {
    pub fn new(ps: &mut ParamSet, name: &str, input: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let lin = Linear::new(ps, &format!("{name}.x"), input, 4 * hidden, rng);
        let mut b = Matrix::zeros(1, 4 * hidden);
        for c in hidden..2 * hidden {
            b.data[c] = 1.0;
        }
        *ps.get_mut(lin.b) = b;
        let recur = ps.add(format!("{name}.h"), Matrix::uniform(hidden, 4 * hidden, init_scale(hidden), rng));
        Lstm { input: lin, recur, hidden }
    }

    /// Runs over the rows of `xs` (T × in); returns T × hidden in input order.
    pub fn run(&self, g: &mut Graph, xs: Var, reverse: bool) -> Var {
        let t_len = g.value(xs).rows;
        let h = self.hidden;
        let xw = self.input.apply(g, xs);
        let u = g.param(self.recur);
        let mut hs = g.constant(Matrix::zeros(1, h));
        let mut cs = g.constant(Matrix::zeros(1, h));
        let mut out = vec![hs; t_len];
        let order: Vec<usize> = if reverse { (0..t_len).rev().collect() } else { (0..t_len).collect() };
        for t in order {
            let xt = g.slice_rows(xw, t, 1);
            let hu = g.matmul(hs, u);
            let gates = g.add(xt, hu);
            let i = g.slice_cols(gates, 0, h);
            let i = g.sigmoid(i);
            let f = g.slice_cols(gates, h, h);
            let f = g.sigmoid(f);
            let c_new = g.slice_cols(gates, 2 * h, h);
            let c_new = g.tanh(c_new);
            let o = g.slice_cols(gates, 3 * h, h);
            let o = g.sigmoid(o);
            let keep = g.mul(f, cs);
            let write = g.mul(i, c_new);
            cs = g.add(keep, write);
            let tc = g.tanh(cs);
            hs = g.mul(o, tc);
            out[t] = hs;
        }
        g.concat_rows(&out)
    }
}

/// GRU cell: `z, r` gates and candidate `n = tanh(x Wn + r * (h Un))`,
/// `h' = n + z * (h - n)`.
#[derive(Clone, Debug)]
pub struct Gru {
    pub input: Linear,
    pub recur: Linear,
    pub hidden: usize,
}

impl Gru {
    pub fn new(ps: &mut ParamSet, name: &str, input: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        Gru {
            input: Linear::new(ps, &format!("{name}.x"), input, 3 * hidden, rng),
            recur: Linear::new(ps, &format!("{name}.h"), hidden, 3 * hidden, rng),
            hidden,
        }
    }

    /// One step given the precomputed input projection `xw` (1 × 3H).
    pub fn step(&self, g: &mut Graph, xw: Var, h_prev: Var) -> Var {
        let h = self.hidden;
        let hu = self.recur.apply(g, h_prev);
        let xz = g.slice_cols(xw, 0, 2 * h);
        let hz = g.slice_cols(hu, 0, 2 * h);
        let zr = g.add(xz, hz);
        let zr = g.sigmoid(zr);
        let z = g.slice_cols(zr, 0, h);
        let r = g.slice_cols(zr, h, h);
        let xn = g.slice_cols(xw, 2 * h, h);
        let hn = g.slice_cols(hu, 2 * h, h);
        let rhn = g.mul(r, hn);
        let n = g.add(xn, rhn);
        let n = g.tanh(n);
        let diff = g.sub(h_prev, n);
        let zd = g.mul(z, diff);
        g.add(n, zd)
    }

    /// Runs over the rows of `xs`; returns T × hidden in input order.
    pub fn run(&self, g: &mut Graph, xs: Var, reverse: bool) -> Var {
        let t_len = g.value(xs).rows;
        let xw = self.input.apply(g, xs);
        let mut hs = g.constant(Matrix::zeros(1, self.hidden));
        let mut out = vec![hs; t_len];
        let order: Vec<usize> = if reverse { (0..t_len).rev().collect() } else { (0..t_len).collect() };
        for t in order {
            let xt = g.slice_rows(xw, t, 1);
            hs = self.step(g, xt, hs);
            out[t] = hs;
        }
        g.concat_rows(&out)
    }
}

/// Inverted dropout mask with keep probability `1 - p`.
pub(crate) fn dropout_mask<R: Rng + ?Sized>(rows: usize, cols: usize, p: f64, rng: &mut R) -> Matrix {
    let keep = 1.0 - p;
    Matrix::from_vec(
        rows,
        cols,
        (0..rows * cols).map(|_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 }).collect(),
    )
}
