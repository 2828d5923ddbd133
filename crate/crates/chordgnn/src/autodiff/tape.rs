//! The op tape. Ops execute eagerly and record a backward rule; `backward`
//! replays the tape in exact reverse execution order, accumulating into
//! every tensor that requires a gradient.

use std::rc::Rc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Handle to a value on a [`Tape`]. Cheap to copy; shape carried for
/// convenience.
#[derive(Clone, Copy, Debug)]
pub struct Tensor {
    pub(crate) id: usize,
    pub rows: usize,
    pub cols: usize,
}

impl Tensor {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

enum Op {
    Leaf,
    Matmul(usize, usize),
    /// Same-shape add, or row-broadcast bias add when rhs is 1 x d.
    Add(usize, usize),
    Mul(usize, usize),
    ConcatRows(usize, usize),
    ConcatCols(usize, usize),
    MeanRows(usize, Rc<Vec<usize>>),
    Relu(usize),
    Sigmoid(usize),
    Tanh(usize),
    SoftmaxRows(usize),
    /// Pre-sampled inverted-dropout mask (entries 0 or 1/(1-p)).
    Dropout(usize, Rc<Vec<f64>>),
    GatherRows(usize, Rc<Vec<usize>>),
    ScatterAddRows(usize, Rc<Vec<usize>>),
    Log(usize),
    Recip(usize),
    Scale(usize, f64),
    AddScalar(usize),
    ScaleRows(usize, Rc<Vec<f64>>),
    SumAll(usize),
    CrossEntropy(usize, Rc<Vec<usize>>),
}

struct Node {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    requires_grad: bool,
    op: Op,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Vec<f64>>,
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    fn push(&mut self, rows: usize, cols: usize, data: Vec<f64>, requires_grad: bool, op: Op) -> Tensor {
        debug_assert_eq!(data.len(), rows * cols);
        debug_assert!(data.iter().all(|x| x.is_finite()), "non-finite tensor entries");
        let id = self.nodes.len();
        self.nodes.push(Node { rows, cols, data, requires_grad, op });
        Tensor { id, rows, cols }
    }

    fn requires(&self, id: usize) -> bool {
        self.nodes[id].requires_grad
    }

    pub fn value(&self, t: Tensor) -> &[f64] {
        &self.nodes[t.id].data
    }

    pub fn scalar(&self, t: Tensor) -> f64 {
        assert_eq!((t.rows, t.cols), (1, 1), "scalar() on non-scalar tensor");
        self.nodes[t.id].data[0]
    }

    /// Gradient of the last `backward` target w.r.t. `t`.
    pub fn grad(&self, t: Tensor) -> &[f64] {
        &self.grads[t.id]
    }

    pub fn all_finite(&self, t: Tensor) -> bool {
        self.nodes[t.id].data.iter().all(|x| x.is_finite())
    }

    // ---- leaves -----------------------------------------------------------

    pub fn leaf(&mut self, rows: usize, cols: usize, data: Vec<f64>, requires_grad: bool) -> Tensor {
        assert_eq!(data.len(), rows * cols, "leaf data length mismatch");
        self.push(rows, cols, data, requires_grad, Op::Leaf)
    }

    pub fn constant(&mut self, rows: usize, cols: usize, data: Vec<f64>) -> Tensor {
        self.leaf(rows, cols, data, false)
    }

    pub fn scalar_const(&mut self, x: f64) -> Tensor {
        self.constant(1, 1, vec![x])
    }

    pub fn zeros(&mut self, rows: usize, cols: usize) -> Tensor {
        self.constant(rows, cols, vec![0.0; rows * cols])
    }

    // ---- primitive ops ----------------------------------------------------

    pub fn matmul(&mut self, a: Tensor, b: Tensor) -> Tensor {
        assert_eq!(a.cols, b.rows, "matmul shape mismatch: {}x{} . {}x{}", a.rows, a.cols, b.rows, b.cols);
        let (n, k, m) = (a.rows, a.cols, b.cols);
        let mut out = vec![0.0; n * m];
        {
            let av = &self.nodes[a.id].data;
            let bv = &self.nodes[b.id].data;
            for i in 0..n {
                for p in 0..k {
                    let aip = av[i * k + p];
                    if aip == 0.0 {
                        continue;
                    }
                    let brow = &bv[p * m..(p + 1) * m];
                    let orow = &mut out[i * m..(i + 1) * m];
                    for j in 0..m {
                        orow[j] += aip * brow[j];
                    }
                }
            }
        }
        let rg = self.requires(a.id) || self.requires(b.id);
        self.push(n, m, out, rg, Op::Matmul(a.id, b.id))
    }

    pub fn add(&mut self, a: Tensor, b: Tensor) -> Tensor {
        let bias = b.rows == 1 && a.rows > 1;
        assert!(
            (a.rows == b.rows && a.cols == b.cols) || (bias && a.cols == b.cols),
            "add shape mismatch: {}x{} + {}x{}",
            a.rows, a.cols, b.rows, b.cols
        );
        let mut out = Vec::with_capacity(a.len());
        {
            let av = &self.nodes[a.id].data;
            let bv = &self.nodes[b.id].data;
            for i in 0..a.rows {
                for j in 0..a.cols {
                    let bj = if bias { bv[j] } else { bv[i * a.cols + j] };
                    out.push(av[i * a.cols + j] + bj);
                }
            }
        }
        let rg = self.requires(a.id) || self.requires(b.id);
        self.push(a.rows, a.cols, out, rg, Op::Add(a.id, b.id))
    }

    pub fn mul(&mut self, a: Tensor, b: Tensor) -> Tensor {
        assert!(a.rows == b.rows && a.cols == b.cols, "mul shape mismatch");
        let out: Vec<f64> = self.nodes[a.id]
            .data
            .iter()
            .zip(&self.nodes[b.id].data)
            .map(|(x, y)| x * y)
            .collect();
        let rg = self.requires(a.id) || self.requires(b.id);
        self.push(a.rows, a.cols, out, rg, Op::Mul(a.id, b.id))
    }

    pub fn concat_rows(&mut self, a: Tensor, b: Tensor) -> Tensor {
        assert_eq!(a.cols, b.cols, "concat_rows column mismatch");
        let mut out = self.nodes[a.id].data.clone();
        out.extend_from_slice(&self.nodes[b.id].data);
        let rg = self.requires(a.id) || self.requires(b.id);
        self.push(a.rows + b.rows, a.cols, out, rg, Op::ConcatRows(a.id, b.id))
    }

    pub fn concat_cols(&mut self, a: Tensor, b: Tensor) -> Tensor {
        assert_eq!(a.rows, b.rows, "concat_cols row mismatch");
        let mut out = Vec::with_capacity(a.len() + b.len());
        for i in 0..a.rows {
            out.extend_from_slice(&self.nodes[a.id].data[i * a.cols..(i + 1) * a.cols]);
            out.extend_from_slice(&self.nodes[b.id].data[i * b.cols..(i + 1) * b.cols]);
        }
        let rg = self.requires(a.id) || self.requires(b.id);
        self.push(a.rows, a.cols + b.cols, out, rg, Op::ConcatCols(a.id, b.id))
    }

    /// Mean of the selected rows, as a 1 x d row. Empty selection gives zeros.
    pub fn mean_rows(&mut self, a: Tensor, sel: Rc<Vec<usize>>) -> Tensor {
        let mut out = vec![0.0; a.cols];
        if !sel.is_empty() {
            for &i in sel.iter() {
                assert!(i < a.rows, "mean_rows index out of range");
                for j in 0..a.cols {
                    out[j] += self.nodes[a.id].data[i * a.cols + j];
                }
            }
            let inv = 1.0 / sel.len() as f64;
            for v in &mut out {
                *v *= inv;
            }
        }
        let rg = self.requires(a.id);
        self.push(1, a.cols, out, rg, Op::MeanRows(a.id, sel))
    }

    pub fn relu(&mut self, a: Tensor) -> Tensor {
        let out: Vec<f64> = self.nodes[a.id].data.iter().map(|&x| x.max(0.0)).collect();
        let rg = self.requires(a.id);
        self.push(a.rows, a.cols, out, rg, Op::Relu(a.id))
    }

    pub fn sigmoid(&mut self, a: Tensor) -> Tensor {
        let out: Vec<f64> = self.nodes[a.id].data.iter().map(|&x| 1.0 / (1.0 + (-x).exp())).collect();
        let rg = self.requires(a.id);
        self.push(a.rows, a.cols, out, rg, Op::Sigmoid(a.id))
    }

    pub fn tanh(&mut self, a: Tensor) -> Tensor {
        let out: Vec<f64> = self.nodes[a.id].data.iter().map(|&x| x.tanh()).collect();
        let rg = self.requires(a.id);
        self.push(a.rows, a.cols, out, rg, Op::Tanh(a.id))
    }

    pub fn softmax_rows(&mut self, a: Tensor) -> Tensor {
        let mut out = vec![0.0; a.len()];
        for i in 0..a.rows {
            let row = &self.nodes[a.id].data[i * a.cols..(i + 1) * a.cols];
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for (j, &x) in row.iter().enumerate() {
                let e = (x - m).exp();
                out[i * a.cols + j] = e;
                sum += e;
            }
            for j in 0..a.cols {
                out[i * a.cols + j] /= sum;
            }
        }
        let rg = self.requires(a.id);
        self.push(a.rows, a.cols, out, rg, Op::SoftmaxRows(a.id))
    }

    /// Inverted dropout: at train time zeroes entries with probability `p`
    /// and scales survivors by 1/(1-p); identity otherwise.
    pub fn dropout(&mut self, a: Tensor, p: f64, train: bool, rng: &mut ChaCha8Rng) -> Tensor {
        assert!((0.0..1.0).contains(&p), "dropout p={p} outside [0,1)");
        if !train || p == 0.0 {
            let data = self.nodes[a.id].data.clone();
            let rg = self.requires(a.id);
            let mask = Rc::new(vec![1.0; a.len()]);
            return self.push(a.rows, a.cols, data, rg, Op::Dropout(a.id, mask));
        }
        let keep = 1.0 / (1.0 - p);
        let mask: Vec<f64> = (0..a.len())
            .map(|_| if rng.gen::<f64>() < p { 0.0 } else { keep })
            .collect();
        let out: Vec<f64> = self.nodes[a.id].data.iter().zip(&mask).map(|(x, m)| x * m).collect();
        let rg = self.requires(a.id);
        self.push(a.rows, a.cols, out, rg, Op::Dropout(a.id, Rc::new(mask)))
    }

    pub fn gather_rows(&mut self, a: Tensor, idx: Rc<Vec<usize>>) -> Tensor {
        let mut out = Vec::with_capacity(idx.len() * a.cols);
        for &i in idx.iter() {
            assert!(i < a.rows, "gather_rows index {i} out of range for {} rows", a.rows);
            out.extend_from_slice(&self.nodes[a.id].data[i * a.cols..(i + 1) * a.cols]);
        }
        let rg = self.requires(a.id);
        self.push(idx.len(), a.cols, out, rg, Op::GatherRows(a.id, idx))
    }

    /// out[idx[i]] += a[i], with `out_rows` output rows.
    pub fn scatter_add_rows(&mut self, a: Tensor, idx: Rc<Vec<usize>>, out_rows: usize) -> Tensor {
        assert_eq!(idx.len(), a.rows, "scatter_add_rows needs one index per input row");
        let mut out = vec![0.0; out_rows * a.cols];
        for (i, &dst) in idx.iter().enumerate() {
            assert!(dst < out_rows, "scatter_add_rows index {dst} out of range");
            for j in 0..a.cols {
                out[dst * a.cols + j] += self.nodes[a.id].data[i * a.cols + j];
            }
        }
        let rg = self.requires(a.id);
        self.push(out_rows, a.cols, out, rg, Op::ScatterAddRows(a.id, idx))
    }

    pub fn log(&mut self, a: Tensor) -> Tensor {
        let out: Vec<f64> = self.nodes[a.id].data.iter().map(|&x| x.ln()).collect();
        let rg = self.requires(a.id);
        self.push(a.rows, a.cols, out, rg, Op::Log(a.id))
    }

    pub fn recip(&mut self, a: Tensor) -> Tensor {
        let out: Vec<f64> = self.nodes[a.id].data.iter().map(|&x| 1.0 / x).collect();
        let rg = self.requires(a.id);
        self.push(a.rows, a.cols, out, rg, Op::Recip(a.id))
    }

    pub fn scale(&mut self, a: Tensor, c: f64) -> Tensor {
        let out: Vec<f64> = self.nodes[a.id].data.iter().map(|&x| x * c).collect();
        let rg = self.requires(a.id);
        self.push(a.rows, a.cols, out, rg, Op::Scale(a.id, c))
    }

    pub fn add_scalar(&mut self, a: Tensor, c: f64) -> Tensor {
        let out: Vec<f64> = self.nodes[a.id].data.iter().map(|&x| x + c).collect();
        let rg = self.requires(a.id);
        self.push(a.rows, a.cols, out, rg, Op::AddScalar(a.id))
    }

    /// Row i scaled by the constant `factors[i]` (not differentiated w.r.t.
    /// the factors).
    pub fn scale_rows(&mut self, a: Tensor, factors: Rc<Vec<f64>>) -> Tensor {
        assert_eq!(factors.len(), a.rows, "scale_rows factor count mismatch");
        let mut out = Vec::with_capacity(a.len());
        for i in 0..a.rows {
            for j in 0..a.cols {
                out.push(self.nodes[a.id].data[i * a.cols + j] * factors[i]);
            }
        }
        let rg = self.requires(a.id);
        self.push(a.rows, a.cols, out, rg, Op::ScaleRows(a.id, factors))
    }

    pub fn sum_all(&mut self, a: Tensor) -> Tensor {
        let s: f64 = self.nodes[a.id].data.iter().sum();
        let rg = self.requires(a.id);
        self.push(1, 1, vec![s], rg, Op::SumAll(a.id))
    }

    /// Mean over rows of -log softmax(logits)[target].
    pub fn cross_entropy(&mut self, logits: Tensor, targets: &[usize]) -> Tensor {
        assert_eq!(targets.len(), logits.rows, "one target per logit row");
        for &t in targets {
            assert!(t < logits.cols, "target {t} out of range for {} classes", logits.cols);
        }
        let mut loss = 0.0;
        for (i, &t) in targets.iter().enumerate() {
            let row = &self.nodes[logits.id].data[i * logits.cols..(i + 1) * logits.cols];
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + row.iter().map(|&x| (x - m).exp()).sum::<f64>().ln();
            loss += lse - row[t];
        }
        loss /= logits.rows as f64;
        let rg = self.requires(logits.id);
        self.push(1, 1, vec![loss], rg, Op::CrossEntropy(logits.id, Rc::new(targets.to_vec())))
    }

    // ---- backward ---------------------------------------------------------

    /// Reverse-mode sweep from the scalar `loss`. After this, `grad` is
    /// populated for every tensor on the path that requires a gradient.
    pub fn backward(&mut self, loss: Tensor) {
        assert_eq!((loss.rows, loss.cols), (1, 1), "backward target must be scalar");
        self.grads = self.nodes.iter().map(|n| vec![0.0; n.data.len()]).collect();
        self.grads[loss.id][0] = 1.0;
        for id in (0..self.nodes.len()).rev() {
            if !self.nodes[id].requires_grad {
                continue;
            }
            if self.grads[id].iter().all(|&g| g == 0.0) {
                continue;
            }
            self.backward_node(id);
        }
    }

    fn backward_node(&mut self, id: usize) {
        let (rows, cols) = (self.nodes[id].rows, self.nodes[id].cols);
        let g = std::mem::take(&mut self.grads[id]);
        match &self.nodes[id].op {
            Op::Leaf => {}
            Op::Matmul(a, b) => {
                let (a, b) = (*a, *b);
                let k = self.nodes[a].cols;
                if self.requires(a) {
                    // dA = dC . B^T
                    let bv = &self.nodes[b].data;
                    let m = cols;
                    let mut da = vec![0.0; rows * k];
                    for i in 0..rows {
                        for p in 0..k {
                            let mut s = 0.0;
                            for j in 0..m {
                                s += g[i * m + j] * bv[p * m + j];
                            }
                            da[i * k + p] = s;
                        }
                    }
                    accumulate(&mut self.grads[a], &da);
                }
                if self.requires(b) {
                    // dB = A^T . dC
                    let av = &self.nodes[a].data;
                    let m = cols;
                    let mut db = vec![0.0; k * m];
                    for i in 0..rows {
                        for p in 0..k {
                            let aip = av[i * k + p];
                            if aip == 0.0 {
                                continue;
                            }
                            for j in 0..m {
                                db[p * m + j] += aip * g[i * m + j];
                            }
                        }
                    }
                    accumulate(&mut self.grads[b], &db);
                }
            }
            Op::Add(a, b) => {
                let (a, b) = (*a, *b);
                if self.requires(a) {
                    accumulate(&mut self.grads[a], &g);
                }
                if self.requires(b) {
                    if self.nodes[b].rows == 1 && rows > 1 {
                        let mut db = vec![0.0; cols];
                        for i in 0..rows {
                            for j in 0..cols {
                                db[j] += g[i * cols + j];
                            }
                        }
                        accumulate(&mut self.grads[b], &db);
                    } else {
                        accumulate(&mut self.grads[b], &g);
                    }
                }
            }
            Op::Mul(a, b) => {
                let (a, b) = (*a, *b);
                if self.requires(a) {
                    let db: Vec<f64> = g.iter().zip(&self.nodes[b].data).map(|(gi, y)| gi * y).collect();
                    accumulate(&mut self.grads[a], &db);
                }
                if self.requires(b) {
                    let da: Vec<f64> = g.iter().zip(&self.nodes[a].data).map(|(gi, x)| gi * x).collect();
                    accumulate(&mut self.grads[b], &da);
                }
            }
            Op::ConcatRows(a, b) => {
                let (a, b) = (*a, *b);
                let split = self.nodes[a].data.len();
                if self.requires(a) {
                    accumulate(&mut self.grads[a], &g[..split]);
                }
                if self.requires(b) {
                    accumulate(&mut self.grads[b], &g[split..]);
                }
            }
            Op::ConcatCols(a, b) => {
                let (a, b) = (*a, *b);
                let (ca, cb) = (self.nodes[a].cols, self.nodes[b].cols);
                if self.requires(a) {
                    let mut da = vec![0.0; rows * ca];
                    for i in 0..rows {
                        da[i * ca..(i + 1) * ca].copy_from_slice(&g[i * cols..i * cols + ca]);
                    }
                    accumulate(&mut self.grads[a], &da);
                }
                if self.requires(b) {
                    let mut db = vec![0.0; rows * cb];
                    for i in 0..rows {
                        db[i * cb..(i + 1) * cb].copy_from_slice(&g[i * cols + ca..(i + 1) * cols]);
                    }
                    accumulate(&mut self.grads[b], &db);
                }
            }
            Op::MeanRows(a, sel) => {
                let a = *a;
                let sel = Rc::clone(sel);
                if self.requires(a) && !sel.is_empty() {
                    let inv = 1.0 / sel.len() as f64;
                    let ca = self.nodes[a].cols;
                    let da = &mut self.grads[a];
                    for &i in sel.iter() {
                        for j in 0..ca {
                            da[i * ca + j] += g[j] * inv;
                        }
                    }
                }
            }
            Op::Relu(a) => {
                let a = *a;
                if self.requires(a) {
                    let da: Vec<f64> = g
                        .iter()
                        .zip(&self.nodes[a].data)
                        .map(|(gi, &x)| if x > 0.0 { *gi } else { 0.0 })
                        .collect();
                    accumulate(&mut self.grads[a], &da);
                }
            }
            Op::Sigmoid(a) => {
                let a = *a;
                if self.requires(a) {
                    let da: Vec<f64> = g
                        .iter()
                        .zip(&self.nodes[id].data)
                        .map(|(gi, &y)| gi * y * (1.0 - y))
                        .collect();
                    accumulate(&mut self.grads[a], &da);
                }
            }
            Op::Tanh(a) => {
                let a = *a;
                if self.requires(a) {
                    let da: Vec<f64> = g
                        .iter()
                        .zip(&self.nodes[id].data)
                        .map(|(gi, &y)| gi * (1.0 - y * y))
                        .collect();
                    accumulate(&mut self.grads[a], &da);
                }
            }
            Op::SoftmaxRows(a) => {
                let a = *a;
                if self.requires(a) {
                    let y = &self.nodes[id].data;
                    let mut da = vec![0.0; rows * cols];
                    for i in 0..rows {
                        let dot: f64 = (0..cols).map(|j| g[i * cols + j] * y[i * cols + j]).sum();
                        for j in 0..cols {
                            da[i * cols + j] = y[i * cols + j] * (g[i * cols + j] - dot);
                        }
                    }
                    accumulate(&mut self.grads[a], &da);
                }
            }
            Op::Dropout(a, mask) => {
                let a = *a;
                let mask = Rc::clone(mask);
                if self.requires(a) {
                    let da: Vec<f64> = g.iter().zip(mask.iter()).map(|(gi, m)| gi * m).collect();
                    accumulate(&mut self.grads[a], &da);
                }
            }
            Op::GatherRows(a, idx) => {
                let a = *a;
                let idx = Rc::clone(idx);
                if self.requires(a) {
                    let ca = self.nodes[a].cols;
                    let da = &mut self.grads[a];
                    for (i, &src) in idx.iter().enumerate() {
                        for j in 0..ca {
                            da[src * ca + j] += g[i * ca + j];
                        }
                    }
                }
            }
            Op::ScatterAddRows(a, idx) => {
                let a = *a;
                let idx = Rc::clone(idx);
                if self.requires(a) {
                    let ca = self.nodes[a].cols;
                    let da = &mut self.grads[a];
                    for (i, &dst) in idx.iter().enumerate() {
                        for j in 0..ca {
                            da[i * ca + j] += g[dst * ca + j];
                        }
                    }
                }
            }
            Op::Log(a) => {
                let a = *a;
                if self.requires(a) {
                    let da: Vec<f64> = g.iter().zip(&self.nodes[a].data).map(|(gi, &x)| gi / x).collect();
                    accumulate(&mut self.grads[a], &da);
                }
            }
            Op::Recip(a) => {
                let a = *a;
                if self.requires(a) {
                    let da: Vec<f64> = g
                        .iter()
                        .zip(&self.nodes[a].data)
                        .map(|(gi, &x)| -gi / (x * x))
                        .collect();
                    accumulate(&mut self.grads[a], &da);
                }
            }
            Op::Scale(a, c) => {
                let (a, c) = (*a, *c);
                if self.requires(a) {
                    let da: Vec<f64> = g.iter().map(|gi| gi * c).collect();
                    accumulate(&mut self.grads[a], &da);
                }
            }
            Op::AddScalar(a) => {
                let a = *a;
                if self.requires(a) {
                    accumulate(&mut self.grads[a], &g);
                }
            }
            Op::ScaleRows(a, factors) => {
                let a = *a;
                let factors = Rc::clone(factors);
                if self.requires(a) {
                    let mut da = vec![0.0; rows * cols];
                    for i in 0..rows {
                        for j in 0..cols {
                            da[i * cols + j] = g[i * cols + j] * factors[i];
                        }
                    }
                    accumulate(&mut self.grads[a], &da);
                }
            }
            Op::SumAll(a) => {
                let a = *a;
                if self.requires(a) {
                    let da = vec![g[0]; self.nodes[a].data.len()];
                    accumulate(&mut self.grads[a], &da);
                }
            }
            Op::CrossEntropy(a, targets) => {
                let a = *a;
                let targets = Rc::clone(targets);
                if self.requires(a) {
                    let (n, k) = (self.nodes[a].rows, self.nodes[a].cols);
                    let mut da = vec![0.0; n * k];
                    for (i, &t) in targets.iter().enumerate() {
                        let row = &self.nodes[a].data[i * k..(i + 1) * k];
                        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                        let sum: f64 = row.iter().map(|&x| (x - m).exp()).sum();
                        for j in 0..k {
                            let p = (row[j] - m).exp() / sum;
                            da[i * k + j] = g[0] * (p - if j == t { 1.0 } else { 0.0 }) / n as f64;
                        }
                    }
                    accumulate(&mut self.grads[a], &da);
                }
            }
        }
        self.grads[id] = g;
    }
}

fn accumulate(dst: &mut [f64], src: &[f64]) {
    debug_assert_eq!(dst.len(), src.len());
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}
