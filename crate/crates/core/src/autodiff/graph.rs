use super::{Gradients, Matrix, ParamId, ParamSet};

/// Handle to a node recorded on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Const,
    Param(ParamId),
    Gather(ParamId, Vec<usize>),
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    AddConst(Var),
    MulConst(Var, Matrix),
    Sigmoid(Var),
    Tanh(Var),
    LeakyRelu(Var, f64),
    Exp(Var),
    LogSigmoid(Var),
    LogSoftmax(Var),
    Softmax(Var),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceCols(Var, usize),
    SliceRows(Var, usize),
    Transpose(Var),
    Sum(Var),
    MeanRows(Var),
    MaxRows(Var, Vec<usize>),
    Pick(Var, usize, usize),
}

#[derive(Debug)]
struct Node {
    value: Matrix,
    op: Op,
}

/// Reverse-mode tape over dense matrices.
///
/// Parameters are read from a borrowed [`ParamSet`]; [`Graph::backward`]
/// returns gradients laid out like that set. A graph is built per example
/// (or per source sentence) and dropped afterwards.
pub struct Graph<'p> {
    params: &'p ParamSet,
    nodes: Vec<Node>,
    param_vars: Vec<Option<Var>>,
}

impl<'p> Graph<'p> {
    pub fn new(params: &'p ParamSet) -> Self {
        Graph {
            params,
            nodes: Vec::with_capacity(256),
            param_vars: vec![None; params.len()],
        }
    }

    pub fn params(&self) -> &'p ParamSet {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Matrix, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        let m = self.value(v);
        debug_assert_eq!(m.len(), 1);
        m.data[0]
    }

    pub fn constant(&mut self, m: Matrix) -> Var {
        self.push(m, Op::Const)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_vars[id.0] {
            return v;
        }
        let v = self.push(self.params.get(id).clone(), Op::Param(id));
        self.param_vars[id.0] = Some(v);
        v
    }

    /// Embedding lookup: one row of the parameter per index.
    pub fn gather(&mut self, id: ParamId, rows: &[usize]) -> Var {
        let table = self.params.get(id);
        let mut out = Matrix::zeros(rows.len(), table.cols);
        for (i, &r) in rows.iter().enumerate() {
            out.data[i * table.cols..(i + 1) * table.cols].copy_from_slice(table.row_slice(r));
        }
        self.push(out, Op::Gather(id, rows.to_vec()))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).matmul(self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).zip_map(self.value(b), |x, y| x + y);
        self.push(v, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).zip_map(self.value(b), |x, y| x - y);
        self.push(v, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).zip_map(self.value(b), |x, y| x * y);
        self.push(v, Op::Mul(a, b))
    }

    /// `a + row` with `row` (1 x c) broadcast over every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let (av, rv) = (self.value(a), self.value(row));
        assert_eq!(rv.rows, 1, "add_row expects a row vector");
        assert_eq!(av.cols, rv.cols, "add_row width mismatch");
        let mut out = av.clone();
        for r in 0..out.rows {
            for (o, b) in out.data[r * out.cols..(r + 1) * out.cols].iter_mut().zip(&rv.data) {
                *o += b;
            }
        }
        self.push(out, Op::AddRow(a, row))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let v = self.value(a).map(|x| x * s);
        self.push(v, Op::Scale(a, s))
    }

    pub fn add_const(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a).map(|x| x + c);
        self.push(v, Op::AddConst(a))
    }

    /// Elementwise product with a constant (dropout masks, reward weights).
    pub fn mul_const(&mut self, a: Var, m: Matrix) -> Var {
        let v = self.value(a).zip_map(&m, |x, y| x * y);
        self.push(v, Op::MulConst(a, m))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.value(a).map(sigmoid);
        self.push(v, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.value(a).map(f64::tanh);
        self.push(v, Op::Tanh(a))
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Var {
        let v = self.value(a).map(|x| if x > 0.0 { x } else { slope * x });
        self.push(v, Op::LeakyRelu(a, slope))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let v = self.value(a).map(f64::exp);
        self.push(v, Op::Exp(a))
    }

    pub fn log_sigmoid(&mut self, a: Var) -> Var {
        let v = self.value(a).map(log_sigmoid);
        self.push(v, Op::LogSigmoid(a))
    }

    /// Row-wise log-softmax.
    pub fn log_softmax(&mut self, a: Var) -> Var {
        let v = log_softmax_rows(self.value(a));
        self.push(v, Op::LogSoftmax(a))
    }

    /// Row-wise softmax.
    pub fn softmax(&mut self, a: Var) -> Var {
        let v = log_softmax_rows(self.value(a)).map(f64::exp);
        self.push(v, Op::Softmax(a))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let rows = self.value(parts[0]).rows;
        let cols: usize = parts.iter().map(|p| self.value(*p).cols).sum();
        let mut out = Matrix::zeros(rows, cols);
        let mut off = 0;
        for p in parts {
            let m = self.value(*p);
            assert_eq!(m.rows, rows, "concat_cols row mismatch");
            for r in 0..rows {
                out.data[r * cols + off..r * cols + off + m.cols].copy_from_slice(m.row_slice(r));
            }
            off += m.cols;
        }
        self.push(out, Op::ConcatCols(parts.to_vec()))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        let cols = self.value(parts[0]).cols;
        let mut data = Vec::new();
        for p in parts {
            let m = self.value(*p);
            assert_eq!(m.cols, cols, "concat_rows column mismatch");
            data.extend_from_slice(&m.data);
        }
        let rows = data.len() / cols.max(1);
        self.push(Matrix::from_vec(rows, cols, data), Op::ConcatRows(parts.to_vec()))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Var {
        let m = self.value(a);
        assert!(start + len <= m.cols, "slice_cols out of range");
        let mut out = Matrix::zeros(m.rows, len);
        for r in 0..m.rows {
            out.data[r * len..(r + 1) * len]
                .copy_from_slice(&m.data[r * m.cols + start..r * m.cols + start + len]);
        }
        self.push(out, Op::SliceCols(a, start))
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, len: usize) -> Var {
        let m = self.value(a);
        assert!(start + len <= m.rows, "slice_rows out of range");
        let out = Matrix::from_vec(len, m.cols, m.data[start * m.cols..(start + len) * m.cols].to_vec());
        self.push(out, Op::SliceRows(a, start))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let v = self.value(a).transpose();
        self.push(v, Op::Transpose(a))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let v = Matrix::scalar(self.value(a).sum());
        self.push(v, Op::Sum(a))
    }

    /// Column means, `r x c -> 1 x c`.
    pub fn mean_rows(&mut self, a: Var) -> Var {
        let m = self.value(a);
        let mut out = Matrix::zeros(1, m.cols);
        for r in 0..m.rows {
            for (o, x) in out.data.iter_mut().zip(m.row_slice(r)) {
                *o += x;
            }
        }
        out.scale_assign(1.0 / m.rows as f64);
        self.push(out, Op::MeanRows(a))
    }

    /// Column maxima (max-over-time pooling), `r x c -> 1 x c`.
    pub fn max_rows(&mut self, a: Var) -> Var {
        let m = self.value(a);
        let mut out = Matrix::from_vec(1, m.cols, vec![f64::NEG_INFINITY; m.cols]);
        let mut arg = vec![0; m.cols];
        for r in 0..m.rows {
            for c in 0..m.cols {
                let x = m.at(r, c);
                if x > out.data[c] {
                    out.data[c] = x;
                    arg[c] = r;
                }
            }
        }
        self.push(out, Op::MaxRows(a, arg))
    }

    pub fn pick(&mut self, a: Var, r: usize, c: usize) -> Var {
        let v = Matrix::scalar(self.value(a).at(r, c));
        self.push(v, Op::Pick(a, r, c))
    }

    /// Gradients of the scalar `root` with respect to every parameter.
    pub fn backward(&self, root: Var) -> Gradients {
        let mut out = self.params.zeros_like();
        self.backward_into(root, 1.0, &mut out);
        out
    }

    /// Accumulates `seed * d root / d params` into `out`.
    pub fn backward_into(&self, root: Var, seed: f64, out: &mut Gradients) {
        assert_eq!(self.value(root).len(), 1, "backward needs a scalar root");
        let mut grads: Vec<Option<Matrix>> = Vec::with_capacity(root.0 + 1);
        grads.resize_with(root.0 + 1, || None);
        grads[root.0] = Some(Matrix::scalar(seed));

        for i in (0..=root.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Const => {}
                Op::Param(id) => out.get_mut(*id).add_assign(&g),
                Op::Gather(id, rows) => {
                    let t = out.get_mut(*id);
                    let cols = t.cols;
                    for (k, &r) in rows.iter().enumerate() {
                        for (o, x) in t.data[r * cols..(r + 1) * cols].iter_mut().zip(g.row_slice(k)) {
                            *o += x;
                        }
                    }
                }
                Op::MatMul(a, b) => {
                    let ga = g.matmul_t(self.value(*b));
                    let gb = self.value(*a).t_matmul(&g);
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *a, g.clone());
                    acc(&mut grads, *b, g);
                }
                Op::Sub(a, b) => {
                    acc(&mut grads, *b, g.map(|x| -x));
                    acc(&mut grads, *a, g);
                }
                Op::Mul(a, b) => {
                    let ga = g.zip_map(self.value(*b), |x, y| x * y);
                    let gb = g.zip_map(self.value(*a), |x, y| x * y);
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::AddRow(a, row) => {
                    let mut gr = Matrix::zeros(1, g.cols);
                    for r in 0..g.rows {
                        for (o, x) in gr.data.iter_mut().zip(g.row_slice(r)) {
                            *o += x;
                        }
                    }
                    acc(&mut grads, *row, gr);
                    acc(&mut grads, *a, g);
                }
                Op::Scale(a, s) => acc(&mut grads, *a, g.map(|x| x * s)),
                Op::AddConst(a) => acc(&mut grads, *a, g),
                Op::MulConst(a, m) => acc(&mut grads, *a, g.zip_map(m, |x, y| x * y)),
                Op::Sigmoid(a) => {
                    let d = g.zip_map(&node.value, |x, s| x * s * (1.0 - s));
                    acc(&mut grads, *a, d);
                }
                Op::Tanh(a) => {
                    let d = g.zip_map(&node.value, |x, t| x * (1.0 - t * t));
                    acc(&mut grads, *a, d);
                }
                Op::LeakyRelu(a, slope) => {
                    let s = *slope;
                    let d = g.zip_map(self.value(*a), |x, z| if z > 0.0 { x } else { s * x });
                    acc(&mut grads, *a, d);
                }
                Op::Exp(a) => acc(&mut grads, *a, g.zip_map(&node.value, |x, e| x * e)),
                Op::LogSigmoid(a) => {
                    let d = g.zip_map(self.value(*a), |x, z| x * sigmoid(-z));
                    acc(&mut grads, *a, d);
                }
                Op::LogSoftmax(a) => {
                    // dz = g - softmax * rowsum(g)
                    let y = &node.value;
                    let mut d = g.clone();
                    for r in 0..g.rows {
                        let s: f64 = g.row_slice(r).iter().sum();
                        for c in 0..g.cols {
                            *d.at_mut(r, c) -= y.at(r, c).exp() * s;
                        }
                    }
                    acc(&mut grads, *a, d);
                }
                Op::Softmax(a) => {
                    // dz = y * (g - <g, y>)
                    let y = &node.value;
                    let mut d = Matrix::zeros(g.rows, g.cols);
                    for r in 0..g.rows {
                        let dot: f64 = g.row_slice(r).iter().zip(y.row_slice(r)).map(|(a, b)| a * b).sum();
                        for c in 0..g.cols {
                            *d.at_mut(r, c) = y.at(r, c) * (g.at(r, c) - dot);
                        }
                    }
                    acc(&mut grads, *a, d);
                }
                Op::ConcatCols(parts) => {
                    let mut off = 0;
                    for p in parts {
                        let w = self.value(*p).cols;
                        let mut d = Matrix::zeros(g.rows, w);
                        for r in 0..g.rows {
                            d.data[r * w..(r + 1) * w]
                                .copy_from_slice(&g.data[r * g.cols + off..r * g.cols + off + w]);
                        }
                        off += w;
                        acc(&mut grads, *p, d);
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut off = 0;
                    for p in parts {
                        let h = self.value(*p).rows;
                        let d = Matrix::from_vec(h, g.cols, g.data[off * g.cols..(off + h) * g.cols].to_vec());
                        off += h;
                        acc(&mut grads, *p, d);
                    }
                }
                Op::SliceCols(a, start) => {
                    let src = self.value(*a);
                    let mut d = Matrix::zeros(src.rows, src.cols);
                    for r in 0..g.rows {
                        d.data[r * src.cols + start..r * src.cols + start + g.cols].copy_from_slice(g.row_slice(r));
                    }
                    acc(&mut grads, *a, d);
                }
                Op::SliceRows(a, start) => {
                    let src = self.value(*a);
                    let mut d = Matrix::zeros(src.rows, src.cols);
                    d.data[start * src.cols..start * src.cols + g.len()].copy_from_slice(&g.data);
                    acc(&mut grads, *a, d);
                }
                Op::Transpose(a) => acc(&mut grads, *a, g.transpose()),
                Op::Sum(a) => {
                    let src = self.value(*a);
                    let d = Matrix::from_vec(src.rows, src.cols, vec![g.data[0]; src.len()]);
                    acc(&mut grads, *a, d);
                }
                Op::MeanRows(a) => {
                    let src = self.value(*a);
                    let k = 1.0 / src.rows as f64;
                    let mut d = Matrix::zeros(src.rows, src.cols);
                    for r in 0..src.rows {
                        for c in 0..src.cols {
                            *d.at_mut(r, c) = g.data[c] * k;
                        }
                    }
                    acc(&mut grads, *a, d);
                }
                Op::MaxRows(a, arg) => {
                    let src = self.value(*a);
                    let mut d = Matrix::zeros(src.rows, src.cols);
                    for (c, &r) in arg.iter().enumerate() {
                        *d.at_mut(r, c) = g.data[c];
                    }
                    acc(&mut grads, *a, d);
                }
                Op::Pick(a, r, c) => {
                    let src = self.value(*a);
                    let mut d = Matrix::zeros(src.rows, src.cols);
                    *d.at_mut(*r, *c) = g.data[0];
                    acc(&mut grads, *a, d);
                }
            }
        }
    }
}

fn acc(grads: &mut [Option<Matrix>], v: Var, g: Matrix) {
    match &mut grads[v.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(sigmoid(x))` without overflow.
#[inline]
pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

pub fn log_softmax_rows(m: &Matrix) -> Matrix {
    let mut out = m.clone();
    for r in 0..m.rows {
        let row = &mut out.data[r * m.cols..(r + 1) * m.cols];
        let mx = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = mx + row.iter().map(|x| (x - mx).exp()).sum::<f64>().ln();
        for x in row.iter_mut() {
            *x -= lse;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fd_check(params: &ParamSet, f: impl Fn(&ParamSet) -> f64, analytic: &Gradients) {
        let h = 1e-6;
        for id in params.ids() {
            for i in 0..params.get(id).len() {
                let mut p = params.clone();
                p.get_mut(id).data[i] += h;
                let up = f(&p);
                p.get_mut(id).data[i] -= 2.0 * h;
                let down = f(&p);
                let num = (up - down) / (2.0 * h);
                let ana = analytic.get(id).data[i];
                let err = (num - ana).abs() / num.abs().max(ana.abs()).max(1e-6);
                assert!(err < 1e-5, "{}[{i}]: numeric {num} analytic {ana}", params.name(id));
            }
        }
    }

    #[test]
    fn every_op_backpropagates() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut ps = ParamSet::new();
        let emb = ps.add("emb", Matrix::uniform(5, 3, 1.0, &mut rng));
        let w = ps.add("w", Matrix::uniform(3, 4, 1.0, &mut rng));
        let b = ps.add("b", Matrix::uniform(1, 4, 1.0, &mut rng));
        let u = ps.add("u", Matrix::uniform(4, 2, 1.0, &mut rng));

        let f = |p: &ParamSet| -> (f64, Gradients) {
            let mut g = Graph::new(p);
            let x = g.gather(emb, &[0, 3, 3, 1]);
            let wv = g.param(w);
            let bv = g.param(b);
            let h = g.matmul(x, wv);
            let h = g.add_row(h, bv);
            let s = g.sigmoid(h);
            let t = g.tanh(h);
            let m = g.mul(s, t);
            let l = g.leaky_relu(h, 0.1);
            let d = g.sub(m, l);
            let d2 = g.add(d, m);
            let uv = g.param(u);
            let o = g.matmul(d2, uv);
            let ls = g.log_softmax(o);
            let sm = g.softmax(o);
            let top = g.slice_rows(ls, 1, 2);
            let left = g.slice_cols(sm, 0, 1);
            let tt = g.transpose(top);
            let pooled = g.max_rows(d2);
            let mean = g.mean_rows(x);
            let cat = g.concat_cols(&[pooled, mean]);
            let cat2 = g.concat_rows(&[cat, cat]);
            let e = g.exp(cat2);
            let e = g.scale(e, 0.3);
            let e = g.add_const(e, 1.0);
            let ls2 = g.log_sigmoid(e);
            let masked = g.mul_const(ls2, Matrix::from_vec(2, 7, (0..14).map(|i| i as f64 / 7.0).collect()));
            let parts = [g.sum(tt), g.sum(left), g.sum(masked), g.pick(o, 2, 1)];
            let all = g.concat_cols(&parts);
            let root = g.sum(all);
            (g.scalar(root), g.backward(root))
        };
        let (_, grads) = f(&ps);
        fd_check(&ps, |p| f(p).0, &grads);
    }

    #[test]
    fn log_softmax_of_single_logit_is_zero() {
        let ps = ParamSet::new();
        let mut g = Graph::new(&ps);
        let x = g.constant(Matrix::scalar(3.7));
        let y = g.log_softmax(x);
        assert_eq!(g.scalar(y), 0.0);
    }

    #[test]
    fn log_sigmoid_is_stable() {
        assert!((log_sigmoid(-800.0) + 800.0).abs() < 1e-9);
        assert!(log_sigmoid(800.0).abs() < 1e-300);
        assert!((log_sigmoid(0.0) + std::f64::consts::LN_2).abs() < 1e-15);
    }
}
