//! A small two-layer LSTM regressor trained from scratch.
//!
//! Layer 1 reads the scalar input sequence, layer 2 reads layer 1's hidden
//! states, and a linear head maps the final hidden state to the prediction.
//! Training is full backpropagation through time with Adam updates, optional
//! variational recurrent dropout on layer 2 (one mask per sequence per
//! epoch, the same at every time step), and an L2 penalty on the dense
//! kernel only.

use crate::metrics::{self, MetricError};
use crate::series::SupervisedWindow;
use ndarray::{Array1, Array2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum LstmError {
    #[error("bad config: {0}")]
    BadConfig(String),
    #[error("no training windows")]
    NoWindows,
    #[error("window {index} has {got} inputs, expected lookback {expected}")]
    BadWindow {
        index: usize,
        got: usize,
        expected: usize,
    },
    #[error("training loss became non-finite at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("history has {len} values, need at least the lookback {lookback}")]
    ShortHistory { len: usize, lookback: usize },
    #[error("forecast horizon must be positive")]
    BadHorizon,
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("cannot decode model: {0}")]
    BadModel(String),
}

/// Activation for the cell candidate and the cell output. The product
/// network uses ReLU; tanh is kept for gradient checking, where the kink at
/// zero would otherwise poison finite differences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
        }
    }

    // ReLU takes the zero subgradient at the kink.
    fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - x.tanh().powi(2),
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmConfig {
    pub units: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub recurrent_dropout: f64,
    pub l2_lambda: f64,
    pub lookback: usize,
    pub learning_rate: f64,
    pub seed: u64,
    #[serde(default)]
    pub activation: Activation,
}

impl Default for LstmConfig {
    fn default() -> Self {
        LstmConfig {
            units: 250,
            epochs: 1000,
            batch_size: 1,
            recurrent_dropout: 0.1,
            l2_lambda: 0.01,
            lookback: 4,
            learning_rate: 0.001,
            seed: 42,
            activation: Activation::Relu,
        }
    }
}

impl LstmConfig {
    pub fn validate(&self) -> Result<(), LstmError> {
        if self.units == 0 {
            return Err(LstmError::BadConfig("units must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(LstmError::BadConfig("batch_size must be positive".into()));
        }
        if self.lookback == 0 {
            return Err(LstmError::BadConfig("lookback must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.recurrent_dropout) {
            return Err(LstmError::BadConfig(
                "recurrent_dropout must be in [0, 1)".into(),
            ));
        }
        if !(self.l2_lambda >= 0.0) || !self.l2_lambda.is_finite() {
            return Err(LstmError::BadConfig("l2_lambda must be finite and >= 0".into()));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(LstmError::BadConfig("learning_rate must be positive".into()));
        }
        Ok(())
    }
}

mod mat_json {
    use ndarray::Array2;
    use serde::de::Error;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Matrix {
        rows: usize,
        cols: usize,
        data: Vec<f64>,
    }

    pub fn serialize<S: Serializer>(m: &Array2<f64>, s: S) -> Result<S::Ok, S::Error> {
        Matrix {
            rows: m.nrows(),
            cols: m.ncols(),
            data: m.iter().copied().collect(),
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Array2<f64>, D::Error> {
        let m = Matrix::deserialize(d)?;
        if m.data.len() != m.rows * m.cols {
            return Err(D::Error::custom(format!(
                "matrix data length {} does not match {}x{}",
                m.data.len(),
                m.rows,
                m.cols
            )));
        }
        Array2::from_shape_vec((m.rows, m.cols), m.data).map_err(D::Error::custom)
    }
}

mod vec_json {
    use ndarray::Array1;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &Array1<f64>, s: S) -> Result<S::Ok, S::Error> {
        v.to_vec().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Array1<f64>, D::Error> {
        Ok(Array1::from_vec(Vec::<f64>::deserialize(d)?))
    }
}

/// One gate's parameters: input kernel, recurrent kernel, bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateWeights {
    #[serde(with = "mat_json")]
    pub w: Array2<f64>,
    #[serde(with = "mat_json")]
    pub u: Array2<f64>,
    #[serde(with = "vec_json")]
    pub b: Array1<f64>,
}

impl GateWeights {
    fn zeros(units: usize, input_dim: usize) -> Self {
        GateWeights {
            w: Array2::zeros((units, input_dim)),
            u: Array2::zeros((units, units)),
            b: Array1::zeros(units),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerWeights {
    pub input: GateWeights,
    pub forget: GateWeights,
    pub cell: GateWeights,
    pub output: GateWeights,
}

impl LayerWeights {
    fn zeros(units: usize, input_dim: usize) -> Self {
        LayerWeights {
            input: GateWeights::zeros(units, input_dim),
            forget: GateWeights::zeros(units, input_dim),
            cell: GateWeights::zeros(units, input_dim),
            output: GateWeights::zeros(units, input_dim),
        }
    }

    pub fn units(&self) -> usize {
        self.input.u.nrows()
    }

    fn gates(&self) -> [&GateWeights; 4] {
        [&self.input, &self.forget, &self.cell, &self.output]
    }
}

/// All trainable parameters of the two-layer network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmWeights {
    pub layer1: LayerWeights,
    pub layer2: LayerWeights,
    #[serde(with = "vec_json")]
    pub dense_w: Array1<f64>,
    pub dense_b: f64,
}

impl LstmWeights {
    pub fn zeros(units: usize) -> Self {
        LstmWeights {
            layer1: LayerWeights::zeros(units, 1),
            layer2: LayerWeights::zeros(units, units),
            dense_w: Array1::zeros(units),
            dense_b: 0.0,
        }
    }

    /// Seeded Glorot-uniform kernels, zero biases except the forget bias
    /// at one. Draw order is fixed: per layer, gates i/f/g/o with the
    /// input kernel before the recurrent kernel, then the dense kernel.
    pub fn glorot(units: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut weights = LstmWeights::zeros(units);
        for layer in [&mut weights.layer1, &mut weights.layer2] {
            for gate in [
                &mut layer.input,
                &mut layer.forget,
                &mut layer.cell,
                &mut layer.output,
            ] {
                fill_glorot(&mut gate.w, rng);
                fill_glorot(&mut gate.u, rng);
            }
            layer.forget.b.fill(1.0);
        }
        let limit = (6.0 / (units as f64 + 1.0)).sqrt();
        for v in weights.dense_w.iter_mut() {
            *v = rng.random_range(-limit..limit);
        }
        weights
    }

    pub fn units(&self) -> usize {
        self.layer1.units()
    }

    /// Canonical flat view of every parameter, in the glorot draw order
    /// with biases after each gate's kernels.
    pub fn param_slices(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(25);
        for layer in [&self.layer1, &self.layer2] {
            for gate in layer.gates() {
                out.push(gate.w.as_slice().unwrap());
                out.push(gate.u.as_slice().unwrap());
                out.push(gate.b.as_slice().unwrap());
            }
        }
        out.push(self.dense_w.as_slice().unwrap());
        out.push(std::slice::from_ref(&self.dense_b));
        out
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::with_capacity(25);
        for layer in [&mut self.layer1, &mut self.layer2] {
            for gate in [
                &mut layer.input,
                &mut layer.forget,
                &mut layer.cell,
                &mut layer.output,
            ] {
                out.push(gate.w.as_slice_mut().unwrap());
                out.push(gate.u.as_slice_mut().unwrap());
                out.push(gate.b.as_slice_mut().unwrap());
            }
        }
        out.push(self.dense_w.as_slice_mut().unwrap());
        out.push(std::slice::from_mut(&mut self.dense_b));
        out
    }

    pub fn n_params(&self) -> usize {
        self.param_slices().iter().map(|s| s.len()).sum()
    }
}

fn fill_glorot(m: &mut Array2<f64>, rng: &mut ChaCha8Rng) {
    let fan_in = m.ncols() as f64;
    let fan_out = m.nrows() as f64;
    let limit = (6.0 / (fan_in + fan_out)).sqrt();
    for v in m.iter_mut() {
        *v = rng.random_range(-limit..limit);
    }
}

/// Hidden and cell state of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct CellState {
    pub h: Array1<f64>,
    pub c: Array1<f64>,
}

impl CellState {
    pub fn zeros(units: usize) -> Self {
        CellState {
            h: Array1::zeros(units),
            c: Array1::zeros(units),
        }
    }
}

/// Everything the backward pass needs from one cell step.
#[derive(Debug, Clone)]
pub struct GateCache {
    pub x: Array1<f64>,
    /// The recurrent input as the gates saw it (masked during training).
    pub h_prev: Array1<f64>,
    pub c_prev: Array1<f64>,
    pub i: Array1<f64>,
    pub f: Array1<f64>,
    pub g: Array1<f64>,
    pub o: Array1<f64>,
    pub a_g: Array1<f64>,
    pub c: Array1<f64>,
    pub act_c: Array1<f64>,
}

/// One cell step: `i,f,o` are logistic gates, the candidate and the cell
/// output use `activation`, and `c' = f*c + i*g`, `h' = o*act(c')`.
pub fn cell_forward(
    layer: &LayerWeights,
    x: &Array1<f64>,
    state: &CellState,
    masked_h: &Array1<f64>,
    activation: Activation,
) -> (CellState, GateCache) {
    let pre = |gate: &GateWeights| gate.w.dot(x) + gate.u.dot(masked_h) + &gate.b;
    let a_i = pre(&layer.input);
    let a_f = pre(&layer.forget);
    let a_g = pre(&layer.cell);
    let a_o = pre(&layer.output);

    let i = a_i.mapv(sigmoid);
    let f = a_f.mapv(sigmoid);
    let g = a_g.mapv(|v| activation.apply(v));
    let o = a_o.mapv(sigmoid);

    let c = &f * &state.c + &i * &g;
    let act_c = c.mapv(|v| activation.apply(v));
    let h = &o * &act_c;

    let cache = GateCache {
        x: x.clone(),
        h_prev: masked_h.clone(),
        c_prev: state.c.clone(),
        i,
        f,
        g,
        o,
        a_g,
        c: c.clone(),
        act_c,
    };
    (CellState { h, c }, cache)
}

#[derive(Debug, Clone)]
struct LayerTrace {
    steps: Vec<GateCache>,
    h_last: Array1<f64>,
}

/// Per-sequence forward cache for backpropagation through time.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    layer1: LayerTrace,
    layer2: LayerTrace,
    /// The dropout mask applied to layer 2's recurrent input, if any.
    mask: Option<Array1<f64>>,
    activation: Activation,
    pub prediction: f64,
}

/// Run the network over one input window. `mask` is the variational
/// dropout mask for layer 2's recurrent input; pass `None` in evaluation.
pub fn forward(
    weights: &LstmWeights,
    inputs: &[f64],
    mask: Option<&Array1<f64>>,
    activation: Activation,
) -> ForwardCache {
    let units = weights.units();
    let mut state1 = CellState::zeros(units);
    let mut state2 = CellState::zeros(units);
    let mut steps1 = Vec::with_capacity(inputs.len());
    let mut steps2 = Vec::with_capacity(inputs.len());

    for &value in inputs {
        let x = Array1::from_vec(vec![value]);
        let (next1, cache1) = cell_forward(&weights.layer1, &x, &state1, &state1.h, activation);
        let masked = match mask {
            Some(m) => m * &state2.h,
            None => state2.h.clone(),
        };
        let (next2, cache2) = cell_forward(&weights.layer2, &next1.h, &state2, &masked, activation);
        steps1.push(cache1);
        steps2.push(cache2);
        state1 = next1;
        state2 = next2;
    }

    let prediction = weights.dense_w.dot(&state2.h) + weights.dense_b;
    ForwardCache {
        layer1: LayerTrace {
            steps: steps1,
            h_last: state1.h,
        },
        layer2: LayerTrace {
            steps: steps2,
            h_last: state2.h,
        },
        mask: mask.cloned(),
        activation,
        prediction,
    }
}

fn accumulate_gate(gate: &mut GateWeights, da: &Array1<f64>, x: &Array1<f64>, h: &Array1<f64>) {
    for (row, &dv) in da.iter().enumerate() {
        if dv != 0.0 {
            gate.w.row_mut(row).scaled_add(dv, x);
            gate.u.row_mut(row).scaled_add(dv, h);
        }
    }
    gate.b += da;
}

/// BPTT through one layer. `dh_steps[t]` is the external gradient flowing
/// into `h_t` (from the dense head or the layer above); the return value is
/// the gradient with respect to each step's input.
fn backward_layer(
    layer: &LayerWeights,
    trace: &LayerTrace,
    dh_steps: &[Array1<f64>],
    mask: Option<&Array1<f64>>,
    activation: Activation,
    grads: &mut LayerWeights,
) -> Vec<Array1<f64>> {
    let units = layer.units();
    let steps = trace.steps.len();
    let mut dx_steps = vec![Array1::<f64>::zeros(layer.input.w.ncols()); steps];
    let mut dh_rec = Array1::<f64>::zeros(units);
    let mut dc_next = Array1::<f64>::zeros(units);

    for t in (0..steps).rev() {
        let cache = &trace.steps[t];
        let dh = &dh_steps[t] + &dh_rec;

        let do_ = &dh * &cache.act_c;
        let da_o = &do_ * &cache.o * &cache.o.mapv(|v| 1.0 - v);

        let act_prime_c = cache.c.mapv(|v| activation.derivative(v));
        let mut dc = &dh * &cache.o * &act_prime_c;
        dc += &dc_next;

        let df = &dc * &cache.c_prev;
        let da_f = &df * &cache.f * &cache.f.mapv(|v| 1.0 - v);

        let di = &dc * &cache.g;
        let da_i = &di * &cache.i * &cache.i.mapv(|v| 1.0 - v);

        let dg = &dc * &cache.i;
        let da_g = &dg * &cache.a_g.mapv(|v| activation.derivative(v));

        accumulate_gate(&mut grads.input, &da_i, &cache.x, &cache.h_prev);
        accumulate_gate(&mut grads.forget, &da_f, &cache.x, &cache.h_prev);
        accumulate_gate(&mut grads.cell, &da_g, &cache.x, &cache.h_prev);
        accumulate_gate(&mut grads.output, &da_o, &cache.x, &cache.h_prev);

        dx_steps[t] = layer.input.w.t().dot(&da_i)
            + layer.forget.w.t().dot(&da_f)
            + layer.cell.w.t().dot(&da_g)
            + layer.output.w.t().dot(&da_o);

        let dh_prev_seen = layer.input.u.t().dot(&da_i)
            + layer.forget.u.t().dot(&da_f)
            + layer.cell.u.t().dot(&da_g)
            + layer.output.u.t().dot(&da_o);
        dh_rec = match mask {
            Some(m) => m * &dh_prev_seen,
            None => dh_prev_seen,
        };
        dc_next = &dc * &cache.f;
    }
    dx_steps
}

/// Accumulate gradients for a batch of cached forward passes, given the
/// loss gradient with respect to each prediction.
pub fn backward(
    weights: &LstmWeights,
    caches: &[ForwardCache],
    dpredictions: &[f64],
) -> LstmWeights {
    assert_eq!(caches.len(), dpredictions.len());
    let units = weights.units();
    let mut grads = LstmWeights::zeros(units);

    for (cache, &dpred) in caches.iter().zip(dpredictions) {
        grads.dense_b += dpred;
        grads.dense_w.scaled_add(dpred, &cache.layer2.h_last);

        let steps = cache.layer2.steps.len();
        let mut dh2 = vec![Array1::<f64>::zeros(units); steps];
        dh2[steps - 1] = weights.dense_w.mapv(|v| v * dpred);
        let activation = cache.activation;
        let dh1 = backward_layer(
            &weights.layer2,
            &cache.layer2,
            &dh2,
            cache.mask.as_ref(),
            activation,
            &mut grads.layer2,
        );
        backward_layer(
            &weights.layer1,
            &cache.layer1,
            &dh1,
            None,
            activation,
            &mut grads.layer1,
        );
    }
    grads
}

/// Batch loss (mean squared error plus the dense-kernel L2 penalty) and
/// its gradients.
pub fn batch_loss_and_gradients(
    weights: &LstmWeights,
    batch: &[SupervisedWindow],
    masks: Option<&[Array1<f64>]>,
    l2_lambda: f64,
    activation: Activation,
) -> (f64, LstmWeights) {
    let b = batch.len() as f64;
    let caches: Vec<ForwardCache> = batch
        .iter()
        .enumerate()
        .map(|(i, window)| {
            let mask = masks.map(|m| &m[i]);
            forward(weights, &window.inputs, mask, activation)
        })
        .collect();

    let mse: f64 = caches
        .iter()
        .zip(batch)
        .map(|(c, w)| (c.prediction - w.target).powi(2))
        .sum::<f64>()
        / b;
    let penalty = l2_lambda * weights.dense_w.dot(&weights.dense_w);
    let loss = mse + penalty;

    let dpreds: Vec<f64> = caches
        .iter()
        .zip(batch)
        .map(|(c, w)| 2.0 * (c.prediction - w.target) / b)
        .collect();

    let mut grads = backward(weights, &caches, &dpreds);
    grads.dense_w.scaled_add(2.0 * l2_lambda, &weights.dense_w);
    (loss, grads)
}

/// Adam state over the canonical parameter ordering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(n_params: usize) -> Self {
        AdamState {
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-7,
        }
    }
}

/// One Adam update with bias correction.
pub fn adam_step(
    weights: &mut LstmWeights,
    grads: &LstmWeights,
    state: &mut AdamState,
    learning_rate: f64,
) {
    state.t += 1;
    let t = state.t as i32;
    let m_hat_scale = 1.0 / (1.0 - state.beta1.powi(t));
    let v_hat_scale = 1.0 / (1.0 - state.beta2.powi(t));
    let mut cursor = 0usize;
    let grad_slices = grads.param_slices();
    for (w_slice, g_slice) in weights.param_slices_mut().into_iter().zip(grad_slices) {
        for (w, &g) in w_slice.iter_mut().zip(g_slice) {
            let m = &mut state.m[cursor];
            let v = &mut state.v[cursor];
            *m = state.beta1 * *m + (1.0 - state.beta1) * g;
            *v = state.beta2 * *v + (1.0 - state.beta2) * g * g;
            let m_hat = *m * m_hat_scale;
            let v_hat = *v * v_hat_scale;
            *w -= learning_rate * m_hat / (v_hat.sqrt() + state.epsilon);
            cursor += 1;
        }
    }
}

/// Variational dropout mask: kept units are scaled by `1/(1-rate)`.
pub fn dropout_mask(rng: &mut ChaCha8Rng, units: usize, rate: f64) -> Array1<f64> {
    let keep = 1.0 - rate;
    Array1::from_iter((0..units).map(|_| {
        if rng.random::<f64>() < keep {
            1.0 / keep
        } else {
            0.0
        }
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub mse: f64,
    pub mae: f64,
    /// None when a training target is exactly zero, as standardized
    /// series can be; percentage error is undefined there.
    pub mape: Option<f64>,
}

/// Per-epoch training metrics, computed with dropout off.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmModel {
    pub config: LstmConfig,
    pub weights: LstmWeights,
}

impl LstmModel {
    /// Evaluation-mode prediction for one window of `lookback` inputs.
    pub fn predict(&self, inputs: &[f64]) -> f64 {
        forward(&self.weights, inputs, None, self.config.activation).prediction
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, LstmError> {
        serde_json::from_str(text).map_err(|e| LstmError::BadModel(e.to_string()))
    }
}

/// Train on the windows in temporal order. Masks are drawn once per
/// sequence per epoch before the batch loop, so the mask stream does not
/// depend on the batch size.
pub fn train(
    config: &LstmConfig,
    windows: &[SupervisedWindow],
) -> Result<(LstmModel, TrainHistory), LstmError> {
    config.validate()?;
    if windows.is_empty() {
        return Err(LstmError::NoWindows);
    }
    for (index, w) in windows.iter().enumerate() {
        if w.inputs.len() != config.lookback {
            return Err(LstmError::BadWindow {
                index,
                got: w.inputs.len(),
                expected: config.lookback,
            });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut weights = LstmWeights::glorot(config.units, &mut rng);
    let mut adam = AdamState::new(weights.n_params());
    let mut history = TrainHistory::default();
    let use_dropout = config.recurrent_dropout > 0.0;

    for epoch in 0..config.epochs {
        let masks: Option<Vec<Array1<f64>>> = use_dropout.then(|| {
            windows
                .iter()
                .map(|_| dropout_mask(&mut rng, config.units, config.recurrent_dropout))
                .collect()
        });

        let mut offset = 0;
        for batch in windows.chunks(config.batch_size) {
            let batch_masks = masks
                .as_ref()
                .map(|all| &all[offset..offset + batch.len()]);
            let (loss, grads) = batch_loss_and_gradients(
                &weights,
                batch,
                batch_masks,
                config.l2_lambda,
                config.activation,
            );
            if !loss.is_finite() {
                return Err(LstmError::NonFiniteLoss { epoch });
            }
            adam_step(&mut weights, &grads, &mut adam, config.learning_rate);
            offset += batch.len();
        }

        let (actuals, predictions): (Vec<f64>, Vec<f64>) = windows
            .iter()
            .map(|w| {
                let pred = forward(&weights, &w.inputs, None, config.activation).prediction;
                (w.target, pred)
            })
            .unzip();
        if predictions.iter().any(|p| !p.is_finite()) {
            return Err(LstmError::NonFiniteLoss { epoch });
        }
        history.epochs.push(EpochMetrics {
            epoch,
            mse: metrics::mse(&actuals, &predictions)?,
            mae: metrics::mae(&actuals, &predictions)?,
            mape: metrics::mape(&actuals, &predictions).ok(),
        });
    }

    Ok((
        LstmModel {
            config: config.clone(),
            weights,
        },
        history,
    ))
}

/// Recursive multi-step forecast: each prediction is appended to the
/// window for the next step.
pub fn forecast_recursive(
    model: &LstmModel,
    history: &[f64],
    horizon: usize,
) -> Result<Vec<f64>, LstmError> {
    if horizon == 0 {
        return Err(LstmError::BadHorizon);
    }
    let lookback = model.config.lookback;
    if history.len() < lookback {
        return Err(LstmError::ShortHistory {
            len: history.len(),
            lookback,
        });
    }
    let mut window: Vec<f64> = history[history.len() - lookback..].to_vec();
    let mut out = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let pred = model.predict(&window);
        out.push(pred);
        window.remove(0);
        window.push(pred);
    }
    Ok(out)
}
