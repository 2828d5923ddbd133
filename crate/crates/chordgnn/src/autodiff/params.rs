//! Named parameter storage and the per-piece execution context that binds
//! parameters onto a fresh tape.

use indexmap::IndexMap;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::tape::{Tape, Tensor};

/// One named parameter: a dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

/// Ordered map of named parameters. Insertion order is the checkpoint and
/// optimizer iteration order, so runs are reproducible.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    pub entries: IndexMap<String, Param>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Weight matrix initialized LeCun uniform(-sqrt(3/fan_in), sqrt(3/fan_in)): variance 1/fan_in,
    /// preserving activation scale through deep stacks.
    pub fn init_weight(&mut self, name: &str, rows: usize, cols: usize, rng: &mut ChaCha8Rng) {
        let bound = (6.0 / rows as f64).sqrt();
        let data: Vec<f64> = (0..rows * cols).map(|_| rng.gen_range(-bound..bound)).collect();
        self.entries.insert(name.to_string(), Param { rows, cols, data });
    }

    /// Bias (or any parameter) initialized to zeros.
    pub fn init_zeros(&mut self, name: &str, rows: usize, cols: usize) {
        self.entries.insert(name.to_string(), Param { rows, cols, data: vec![0.0; rows * cols] });
    }

    pub fn init_const(&mut self, name: &str, rows: usize, cols: usize, value: f64) {
        self.entries
            .insert(name.to_string(), Param { rows, cols, data: vec![value; rows * cols] });
    }

    pub fn get(&self, name: &str) -> &Param {
        self.entries
            .get(name)
            .unwrap_or_else(|| panic!("unknown parameter `{name}`"))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// A single unit of forward/backward work: a fresh tape, the parameter
/// store it reads from, the train-mode flag, and the RNG that drives
/// dropout. Not shared across threads.
pub struct Ctx<'a> {
    pub tape: Tape,
    store: &'a ParamStore,
    bound: IndexMap<String, Tensor>,
    pub rng: ChaCha8Rng,
    pub train: bool,
    pub dropout_p: f64,
}

impl<'a> Ctx<'a> {
    pub fn new(store: &'a ParamStore, rng: ChaCha8Rng, train: bool, dropout_p: f64) -> Self {
        Ctx { tape: Tape::new(), store, bound: IndexMap::new(), rng, train, dropout_p }
    }

    /// Bind a named parameter onto the tape (once per name per context).
    pub fn param(&mut self, name: &str) -> Tensor {
        if let Some(t) = self.bound.get(name) {
            return *t;
        }
        let p = self.store.get(name);
        let t = self.tape.leaf(p.rows, p.cols, p.data.clone(), true);
        self.bound.insert(name.to_string(), t);
        t
    }

    /// Constant (non-differentiated) input.
    pub fn input(&mut self, rows: usize, cols: usize, data: Vec<f64>) -> Tensor {
        self.tape.constant(rows, cols, data)
    }

    /// Dropout using the context's train flag, rate, and RNG.
    pub fn dropout(&mut self, x: Tensor) -> Tensor {
        self.tape.dropout(x, self.dropout_p, self.train, &mut self.rng)
    }

    /// Gradients of every bound parameter after `tape.backward`.
    pub fn grads(&self) -> IndexMap<String, Vec<f64>> {
        self.bound
            .iter()
            .map(|(name, t)| (name.clone(), self.tape.grad(*t).to_vec()))
            .collect()
    }
}
