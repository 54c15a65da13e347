use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{symbol_index, Error, Result};

/// Input neurons: one per binary symbol plus the end-of-string marker.
pub const INPUT_SIZE: usize = 3;
/// Input index of the end-of-string marker.
pub const STOP: usize = 2;
/// Hidden unit read out as the classifier output after the stop step.
pub const RESPONSE_INDEX: usize = 0;

/// Dot product with four independent accumulators so the adds pipeline.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for l in 0..4 {
            acc[l] += x[l] * y[l];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Decodes a binary string into input indices, appending the stop symbol.
pub fn encode(s: &str) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(s.len() + 1);
    for b in s.bytes() {
        out.push(symbol_index(b)?);
    }
    out.push(STOP);
    Ok(out)
}

/// Second-order recurrent network with sigmoid units:
/// `h'_i = sigmoid(sum_j W[i][j][k] * h_j)` where `k` is the active input.
///
/// Weights are stored input-major (`[k][i][j]`) so that each input selects one
/// contiguous `N x N` matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SecondOrderRnn {
    hidden: usize,
    weights: Vec<f64>,
    h_init: Vec<f64>,
}

/// Hidden states visited while reading one string: the initial state, one
/// state per binary symbol, and the state after the stop symbol.
#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub hidden: usize,
    /// `(len + 2) * hidden` values, row-major by time step.
    pub states: Vec<f64>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.states.len() / self.hidden
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state(&self, t: usize) -> &[f64] {
        &self.states[t * self.hidden..(t + 1) * self.hidden]
    }

    pub fn readout(&self) -> f64 {
        self.state(self.len() - 1)[RESPONSE_INDEX]
    }
}

impl SecondOrderRnn {
    /// All-zero weights with the given initial hidden state.
    pub fn zeros(h_init: Vec<f64>) -> Result<Self> {
        let hidden = h_init.len();
        Self::from_parts(h_init, vec![0.0; hidden * hidden * INPUT_SIZE])
    }

    pub fn from_parts(h_init: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let hidden = h_init.len();
        if hidden == 0 {
            return Err(Error::InvalidConfig("hidden size must be positive".into()));
        }
        if weights.len() != hidden * hidden * INPUT_SIZE {
            return Err(Error::InvalidConfig(format!(
                "expected {} weights for N = {hidden}, got {}",
                hidden * hidden * INPUT_SIZE,
                weights.len()
            )));
        }
        if let Some(v) = h_init.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidConfig(format!(
                "initial hidden value {v} outside [0, 1]"
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidConfig("non-finite weight".into()));
        }
        Ok(Self {
            hidden,
            weights,
            h_init,
        })
    }

    /// Weights drawn uniformly from `[-scale, scale]`.
    pub fn random(h_init: Vec<f64>, scale: f64, seed: u64) -> Result<Self> {
        let hidden = h_init.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weights = (0..hidden * hidden * INPUT_SIZE)
            .map(|_| rng.random_range(-scale..=scale))
            .collect();
        Self::from_parts(h_init, weights)
    }

    /// `(1, 0, ..., 0)`, the default starting state.
    pub fn default_h_init(hidden: usize) -> Vec<f64> {
        let mut h = vec![0.0; hidden];
        if let Some(first) = h.first_mut() {
            *first = 1.0;
        }
        h
    }

    /// Initial state with every entry uniform in `[0, 1]`.
    pub fn random_h_init(hidden: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..hidden).map(|_| rng.random_range(0.0..=1.0)).collect()
    }

    pub fn hidden_size(&self) -> usize {
        self.hidden
    }

    pub fn input_size(&self) -> usize {
        INPUT_SIZE
    }

    pub fn h_init(&self) -> &[f64] {
        &self.h_init
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub(crate) fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    #[inline]
    fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.hidden + i) * self.hidden + j
    }

    pub fn weight(&self, i: usize, j: usize, k: usize) -> f64 {
        self.weights[self.index(i, j, k)]
    }

    pub fn set_weight(&mut self, i: usize, j: usize, k: usize, value: f64) {
        let idx = self.index(i, j, k);
        self.weights[idx] = value;
    }

    /// The `N x N` matrix selected by input `k`.
    #[inline]
    pub(crate) fn slice(&self, k: usize) -> &[f64] {
        let n2 = self.hidden * self.hidden;
        &self.weights[k * n2..(k + 1) * n2]
    }

    /// One transition; writes the next state into `out`.
    #[inline]
    pub fn step_into(&self, h: &[f64], symbol: usize, out: &mut [f64]) {
        let n = self.hidden;
        let w = self.slice(symbol);
        for (i, o) in out.iter_mut().enumerate() {
            *o = sigmoid(dot(&w[i * n..(i + 1) * n], h));
        }
    }

    pub fn step(&self, h: &[f64], symbol: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.hidden];
        self.step_into(h, symbol, &mut out);
        out
    }

    /// Reads pre-decoded symbols (ending in [`STOP`]) and returns every state visited.
    pub fn run_encoded(&self, symbols: &[usize]) -> Trace {
        let n = self.hidden;
        let mut states = Vec::with_capacity((symbols.len() + 1) * n);
        states.extend_from_slice(&self.h_init);
        for (t, &k) in symbols.iter().enumerate() {
            states.resize((t + 2) * n, 0.0);
            let (prev, next) = states.split_at_mut((t + 1) * n);
            self.step_into(&prev[t * n..], k, next);
        }
        Trace { hidden: n, states }
    }

    /// Reads `s` followed by the stop symbol.
    pub fn run(&self, s: &str) -> Result<Trace> {
        Ok(self.run_encoded(&encode(s)?))
    }

    /// Response-neuron value after the stop step, without storing the trace.
    pub fn readout(&self, s: &str) -> Result<f64> {
        let mut h = self.h_init.clone();
        let mut next = vec![0.0; self.hidden];
        for b in s.bytes() {
            self.step_into(&h, symbol_index(b)?, &mut next);
            std::mem::swap(&mut h, &mut next);
        }
        self.step_into(&h, STOP, &mut next);
        Ok(next[RESPONSE_INDEX])
    }

    pub fn classify(&self, s: &str) -> Result<bool> {
        Ok(self.readout(s)? > 0.5)
    }

    /// Fraction of items whose classification matches the label.
    pub fn accuracy(&self, data: &LabeledDataset) -> f64 {
        if data.is_empty() {
            return 0.0;
        }
        let correct = data
            .iter()
            .filter(|item| {
                self.classify(&item.string)
                    .expect("dataset strings are validated on construction")
                    == item.label
            })
            .count();
        correct as f64 / data.len() as f64
    }

    /// Squared-error loss of one string and its gradient with respect to every
    /// weight, by backpropagation through the whole unrolled sequence.
    /// `grad` must have the same length as the weight vector; it is overwritten.
    pub fn loss_and_gradient(&self, symbols: &[usize], label: bool, grad: &mut [f64]) -> f64 {
        let mut scratch = Scratch::new(self.hidden);
        self.loss_and_gradient_with(symbols, label, grad, &mut scratch)
    }

    pub(crate) fn loss_and_gradient_with(
        &self,
        symbols: &[usize],
        label: bool,
        grad: &mut [f64],
        scratch: &mut Scratch,
    ) -> f64 {
        let n = self.hidden;
        let n2 = n * n;
        grad.iter_mut().for_each(|g| *g = 0.0);

        let states = &mut scratch.states;
        states.clear();
        states.extend_from_slice(&self.h_init);
        for (t, &k) in symbols.iter().enumerate() {
            states.resize((t + 2) * n, 0.0);
            let (prev, next) = states.split_at_mut((t + 1) * n);
            self.step_into(&prev[t * n..], k, next);
        }

        let steps = symbols.len();
        let readout = states[steps * n + RESPONSE_INDEX];
        let target = if label { 1.0 } else { 0.0 };
        let value = loss(readout, label);

        // dC/dh at the current time step
        let delta = &mut scratch.delta;
        delta.iter_mut().for_each(|d| *d = 0.0);
        delta[RESPONSE_INDEX] = readout - target;
        let dz = &mut scratch.dz;

        for t in (0..steps).rev() {
            let k = symbols[t];
            let h_prev = &states[t * n..(t + 1) * n];
            let h_next = &states[(t + 1) * n..(t + 2) * n];
            for i in 0..n {
                dz[i] = delta[i] * h_next[i] * (1.0 - h_next[i]);
            }
            let g = &mut grad[k * n2..(k + 1) * n2];
            for i in 0..n {
                let d = dz[i];
                if d == 0.0 {
                    continue;
                }
                let row = &mut g[i * n..(i + 1) * n];
                for (gij, &hj) in row.iter_mut().zip(h_prev) {
                    *gij += d * hj;
                }
            }
            if t > 0 {
                let w = self.slice(k);
                delta.iter_mut().for_each(|d| *d = 0.0);
                for i in 0..n {
                    let d = dz[i];
                    let row = &w[i * n..(i + 1) * n];
                    for (acc, &wij) in delta.iter_mut().zip(row) {
                        *acc += wij * d;
                    }
                }
            }
        }
        value
    }

    /// Writes the model file (JSON, versioned).
    pub fn save(&self, path: &Path, seed: Option<u64>) -> Result<()> {
        let file = ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            hidden: self.hidden,
            inputs: INPUT_SIZE,
            response_index: RESPONSE_INDEX,
            seed,
            h_init: self.h_init.clone(),
            weights: self.weights.clone(),
        };
        let text = serde_json::to_string_pretty(&file).map_err(|source| Error::Json {
            path: path.into(),
            source,
        })?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    /// Reads a model file; returns the model and its recorded seed.
    pub fn load(path: &Path) -> Result<(Self, Option<u64>)> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: ModelFile = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.into(),
            source,
        })?;
        if file.format != MODEL_FORMAT || file.version != MODEL_VERSION {
            return Err(Error::InvalidConfig(format!(
                "{}: unsupported model format {} v{}",
                path.display(),
                file.format,
                file.version
            )));
        }
        if file.inputs != INPUT_SIZE || file.response_index != RESPONSE_INDEX || file.hidden != file.h_init.len() {
            return Err(Error::InvalidConfig(format!(
                "{}: inconsistent model dimensions",
                path.display()
            )));
        }
        Ok((Self::from_parts(file.h_init, file.weights)?, file.seed))
    }
}

const MODEL_FORMAT: &str = "dfaforge-second-order-rnn";
const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    hidden: usize,
    inputs: usize,
    response_index: usize,
    seed: Option<u64>,
    h_init: Vec<f64>,
    weights: Vec<f64>,
}

/// Reusable buffers for gradient computation.
pub(crate) struct Scratch {
    states: Vec<f64>,
    delta: Vec<f64>,
    dz: Vec<f64>,
}

impl Scratch {
    pub(crate) fn new(hidden: usize) -> Self {
        Self {
            states: Vec::new(),
            delta: vec![0.0; hidden],
            dz: vec![0.0; hidden],
        }
    }
}

/// `0.5 * (y - readout)^2` with `y` = 1 for positive strings, 0 otherwise.
pub fn loss(readout: f64, label: bool) -> f64 {
    let y = if label { 1.0 } else { 0.0 };
    0.5 * (y - readout) * (y - readout)
}
