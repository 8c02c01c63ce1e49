//! Dense feed-forward network with swish hidden layers, the Jacobian loss,
//! its hand-derived reverse-mode gradient, Adam and the max-norm constraint.
//!
//! Weights are stored row-major as `(outputs × inputs)`, so row `n` of a
//! layer's weight matrix is the incoming-weight vector of neuron `n`.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{check_len, invalid, Error, ParamKind, Result};
use crate::linalg::{gemm, Matrix, Strided};

/// Upper bound on `|swish'(x)|` over the real line (the supremum is ≈ 1.0998).
pub const SWISH_LIPSCHITZ: f64 = 1.1;

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

/// `x · σ(x)`.
pub fn swish(x: f64) -> f64 {
    x * sigmoid(x)
}

/// Derivative of [`swish`]: `σ(x) (1 + x (1 - σ(x)))`.
pub fn swish_derivative(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 + x * (1.0 - s))
}

/// Activation applied elementwise after a layer's affine map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    /// `x · σ(x)`, used by every hidden layer.
    Swish,
    /// Used by the output layer.
    Identity,
}

impl Activation {
    /// Applies the activation to a pre-activation value.
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Swish => swish(z),
            Activation::Identity => z,
        }
    }

    /// Derivative at a pre-activation value.
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Swish => swish_derivative(z),
            Activation::Identity => 1.0,
        }
    }

    /// Global Lipschitz constant used by [`lipschitz_upper_bound`].
    pub fn lipschitz(self) -> f64 {
        match self {
            Activation::Swish => SWISH_LIPSCHITZ,
            Activation::Identity => 1.0,
        }
    }

    /// Stable lowercase tag used in model files.
    pub fn tag(self) -> &'static str {
        match self {
            Activation::Swish => "swish",
            Activation::Identity => "identity",
        }
    }

    /// Inverse of [`Activation::tag`].
    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "swish" => Some(Activation::Swish),
            "identity" => Some(Activation::Identity),
            _ => None,
        }
    }
}

/// One dense layer `a ↦ act(W a + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    inputs: usize,
    outputs: usize,
    weights: Vec<f64>,
    biases: Vec<f64>,
    activation: Activation,
}

impl Layer {
    /// `weights` is row-major `(outputs × inputs)`.
    pub fn new(
        inputs: usize,
        outputs: usize,
        weights: Vec<f64>,
        biases: Vec<f64>,
        activation: Activation,
    ) -> Result<Self> {
        if inputs == 0 || outputs == 0 {
            return Err(invalid("layer", "widths must be positive"));
        }
        check_len("layer weights", inputs * outputs, weights.len())?;
        check_len("layer biases", outputs, biases.len())?;
        if !weights.iter().chain(&biases).all(|v| v.is_finite()) {
            return Err(Error::NonFinite { what: "layer parameters" });
        }
        Ok(Self {
            inputs,
            outputs,
            weights,
            biases,
            activation,
        })
    }

    /// Glorot-uniform weights, zero biases.
    pub fn glorot<R: Rng + ?Sized>(inputs: usize, outputs: usize, activation: Activation, rng: &mut R) -> Self {
        let limit = libm::sqrt(6.0 / (inputs + outputs) as f64);
        let weights = (0..inputs * outputs)
            .map(|_| rng.random_range(-limit..limit))
            .collect();
        Self {
            inputs,
            outputs,
            weights,
            biases: vec![0.0; outputs],
            activation,
        }
    }

    /// Input width.
    pub fn inputs(&self) -> usize {
        self.inputs
    }

    /// Output width.
    pub fn outputs(&self) -> usize {
        self.outputs
    }

    /// Row-major `(outputs × inputs)` weights.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Bias vector.
    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    /// Activation kind.
    pub fn activation(&self) -> Activation {
        self.activation
    }

    /// Weights as a matrix.
    pub fn weight_matrix(&self) -> Matrix {
        Matrix::from_row_major(self.outputs, self.inputs, self.weights.clone())
            .expect("layer shape is checked on construction")
    }

    /// Batched forward: returns (pre-activations, activations), both `rows × outputs`.
    /// Activations for `rows` inputs and, when asked, the activation slopes
    /// at the pre-activations (`None` for the identity).
    fn forward_rows(&self, input: &[f64], rows: usize, slopes: bool) -> (Vec<f64>, Option<Vec<f64>>) {
        let mut z = vec![0.0; rows * self.outputs];
        for r in z.chunks_exact_mut(self.outputs) {
            r.copy_from_slice(&self.biases);
        }
        gemm(
            rows,
            self.inputs,
            self.outputs,
            Strided::row_major(input, self.inputs),
            Strided::transposed(&self.weights, self.inputs),
            1.0,
            &mut z,
        );
        match self.activation {
            Activation::Identity => (z, None),
            Activation::Swish if slopes => {
                let mut ds = vec![0.0; z.len()];
                for (v, d) in z.iter_mut().zip(&mut ds) {
                    let s = sigmoid(*v);
                    *d = s * (1.0 + *v * (1.0 - s));
                    *v *= s;
                }
                (z, Some(ds))
            }
            act => {
                z.iter_mut().for_each(|v| *v = act.apply(*v));
                (z, None)
            }
        }
    }
}

/// The estimator network `Ĵ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<Layer>,
}

impl Network {
    /// Chains layers; each layer's input width must equal the previous output width.
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(invalid("network", "needs at least one layer"));
        }
        for w in layers.windows(2) {
            check_len("layer chain", w[0].outputs, w[1].inputs)?;
        }
        Ok(Self { layers })
    }

    /// Glorot-initialized `d → hidden… → c·d` network: swish hidden layers, identity output.
    pub fn for_jacobian<R: Rng + ?Sized>(
        input_dim: usize,
        output_dim: usize,
        hidden: &[usize],
        rng: &mut R,
    ) -> Result<Self> {
        if input_dim == 0 || output_dim == 0 || hidden.contains(&0) {
            return Err(invalid("layer widths", "must be positive"));
        }
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut prev = input_dim;
        for &h in hidden {
            layers.push(Layer::glorot(prev, h, Activation::Swish, rng));
            prev = h;
        }
        layers.push(Layer::glorot(prev, input_dim * output_dim, Activation::Identity, rng));
        Ok(Self { layers })
    }

    /// Layers in evaluation order.
    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// `[n_0, n_1, …, n_out]`.
    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.input_dim()];
        dims.extend(self.layers.iter().map(|l| l.outputs));
        dims
    }

    /// Width of the input layer.
    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    /// Width of the output layer.
    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }

    /// Total number of trainable scalars.
    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    /// Forward pass for one input.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.forward_batch(x, 1)
    }

    /// Forward pass for `rows` inputs stored row-major.
    pub fn forward_batch(&self, xs: &[f64], rows: usize) -> Result<Vec<f64>> {
        check_len("network input", rows * self.input_dim(), xs.len())?;
        let mut cur = xs.to_vec();
        for layer in &self.layers {
            cur = layer.forward_rows(&cur, rows, false).0;
        }
        Ok(cur)
    }

    /// Forward pass keeping every layer's activations and activation slopes.
    fn forward_trace(&self, xs: &[f64], rows: usize) -> Vec<(Vec<f64>, Option<Vec<f64>>)> {
        let mut trace: Vec<(Vec<f64>, Option<Vec<f64>>)> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let input = trace.last().map_or(xs, |t| t.0.as_slice());
            trace.push(layer.forward_rows(input, rows, true));
        }
        trace
    }
}

/// Rows `(x_i, u, v)` with `u = (x_j - x_i)/‖x_j - x_i‖` and `v = (y_j - y_i)/‖x_j - x_i‖`.
#[derive(Debug, Clone, PartialEq)]
pub struct LossBatch {
    input_dim: usize,
    output_dim: usize,
    bases: Vec<f64>,
    directions: Vec<f64>,
    deltas: Vec<f64>,
}

/// Allowed deviation of `‖u‖` from 1.
pub const UNIT_TOLERANCE: f64 = 1e-12;

impl LossBatch {
    /// Empty batch for `R^d → R^c`.
    pub fn new(input_dim: usize, output_dim: usize) -> Self {
        Self {
            input_dim,
            output_dim,
            bases: Vec::new(),
            directions: Vec::new(),
            deltas: Vec::new(),
        }
    }

    /// Appends a row; `direction` must be a unit vector.
    pub fn push(&mut self, base: &[f64], direction: &[f64], delta: &[f64]) -> Result<()> {
        check_len("batch base point", self.input_dim, base.len())?;
        check_len("batch direction", self.input_dim, direction.len())?;
        check_len("batch delta", self.output_dim, delta.len())?;
        let n = crate::linalg::norm(direction);
        if !(libm::fabs(n - 1.0) <= UNIT_TOLERANCE) {
            return Err(invalid("direction", "must have unit norm"));
        }
        self.bases.extend_from_slice(base);
        self.directions.extend_from_slice(direction);
        self.deltas.extend_from_slice(delta);
        Ok(())
    }

    /// Number of rows.
    pub fn len(&self) -> usize {
        self.deltas.len() / self.output_dim.max(1)
    }

    /// True for a batch with no rows.
    pub fn is_empty(&self) -> bool {
        self.deltas.is_empty()
    }

    /// Domain dimension `d`.
    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    /// Codomain dimension `c`.
    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    /// Base point of row `r`.
    pub fn base(&self, r: usize) -> &[f64] {
        &self.bases[r * self.input_dim..(r + 1) * self.input_dim]
    }

    /// Unit direction of row `r`.
    pub fn direction(&self, r: usize) -> &[f64] {
        &self.directions[r * self.input_dim..(r + 1) * self.input_dim]
    }

    /// Scaled output difference of row `r`.
    pub fn delta(&self, r: usize) -> &[f64] {
        &self.deltas[r * self.output_dim..(r + 1) * self.output_dim]
    }

    /// All base points, row-major.
    pub fn bases(&self) -> &[f64] {
        &self.bases
    }
}

/// Sum of squared residuals `v - Ĵ u` and, optionally, their gradient with
/// respect to the flat predictions.
fn residuals(predicted: &[f64], batch: &LossBatch, mut grad: Option<&mut [f64]>) -> f64 {
    let (d, c) = (batch.input_dim, batch.output_dim);
    let rows = batch.len();
    let scale = -2.0 / (rows * c) as f64;
    let mut sum = 0.0;
    for b in 0..rows {
        let p = &predicted[b * c * d..(b + 1) * c * d];
        let u = batch.direction(b);
        let v = batch.delta(b);
        for r in 0..c {
            let jr = &p[r * d..(r + 1) * d];
            let res = v[r] - crate::linalg::dot(jr, u);
            sum += res * res;
            if let Some(g) = grad.as_deref_mut() {
                let gr = &mut g[b * c * d + r * d..b * c * d + (r + 1) * d];
                for (gk, uk) in gr.iter_mut().zip(u) {
                    *gk = scale * res * uk;
                }
            }
        }
    }
    sum
}

fn check_batch(batch: &LossBatch, flat_width: usize) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    check_len(
        "network output width",
        batch.input_dim * batch.output_dim,
        flat_width,
    )
}

/// Mean over rows and codomain components of `(v - Ĵ(x_i) u)²`.
///
/// `predicted` holds one flat `c·d` prediction per batch row; each is read
/// row-major as a `c×d` matrix.
pub fn jacobian_loss(predicted: &[f64], batch: &LossBatch) -> Result<f64> {
    check_batch(batch, batch.input_dim * batch.output_dim)?;
    check_len(
        "predictions",
        batch.len() * batch.input_dim * batch.output_dim,
        predicted.len(),
    )?;
    Ok(residuals(predicted, batch, None) / (batch.len() * batch.output_dim) as f64)
}

/// Gradient of a scalar with respect to every weight and bias, shaped like the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    layers: Vec<(Vec<f64>, Vec<f64>)>,
}

impl Gradients {
    /// Zeros shaped like `net`.
    pub fn zeros_like(net: &Network) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| (vec![0.0; l.weights.len()], vec![0.0; l.biases.len()]))
                .collect(),
        }
    }

    /// Weight gradient of layer `j`, row-major like [`Layer::weights`].
    pub fn weights(&self, j: usize) -> &[f64] {
        &self.layers[j].0
    }

    /// Bias gradient of layer `j`.
    pub fn biases(&self, j: usize) -> &[f64] {
        &self.layers[j].1
    }

    /// Number of layers.
    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|(w, b)| w.iter().chain(b))
            .fold(0.0, |m, v| m.max(libm::fabs(*v)))
    }

    fn blocks(&self) -> impl Iterator<Item = (usize, ParamKind, &Vec<f64>)> {
        self.layers.iter().enumerate().flat_map(|(j, (w, b))| {
            [(j, ParamKind::Weight, w), (j, ParamKind::Bias, b)]
        })
    }
}

/// Loss and its exact gradient with respect to all parameters of `net`.
pub fn loss_and_gradient(net: &Network, batch: &LossBatch) -> Result<(f64, Gradients)> {
    check_batch(batch, net.output_dim())?;
    check_len("network input", batch.input_dim, net.input_dim())?;
    let rows = batch.len();
    let trace = net.forward_trace(batch.bases(), rows);
    let out = &trace.last().expect("network has layers").0;
    let mut delta = vec![0.0; out.len()];
    let loss = residuals(out, batch, Some(&mut delta)) / (rows * batch.output_dim) as f64;

    let mut grads = Gradients::zeros_like(net);
    for (j, layer) in net.layers.iter().enumerate().rev() {
        // delta: dL/d(activation output) of layer j -> dL/d(pre-activation).
        if let Some(slopes) = &trace[j].1 {
            for (g, s) in delta.iter_mut().zip(slopes) {
                *g *= s;
            }
        }
        let input = if j == 0 { batch.bases() } else { trace[j - 1].0.as_slice() };
        let (gw, gb) = &mut grads.layers[j];
        // dW = deltaᵀ (outputs × rows) · input (rows × inputs)
        gemm(
            layer.outputs,
            rows,
            layer.inputs,
            Strided::transposed(&delta, layer.outputs),
            Strided::row_major(input, layer.inputs),
            0.0,
            gw,
        );
        for r in delta.chunks_exact(layer.outputs) {
            for (b, g) in gb.iter_mut().zip(r) {
                *b += g;
            }
        }
        if j > 0 {
            // dA_{j-1} = delta (rows × outputs) · W (outputs × inputs)
            let mut prev = vec![0.0; rows * layer.inputs];
            gemm(
                rows,
                layer.outputs,
                layer.inputs,
                Strided::row_major(&delta, layer.outputs),
                Strided::row_major(&layer.weights, layer.inputs),
                0.0,
                &mut prev,
            );
            delta = prev;
        }
    }
    Ok((loss, grads))
}

/// Exact gradient of [`jacobian_loss`]` ∘ forward` with respect to all parameters.
pub fn loss_gradient(net: &Network, batch: &LossBatch) -> Result<Gradients> {
    loss_and_gradient(net, batch).map(|(_, g)| g)
}

/// Adam moments and hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    first: Gradients,
    second: Gradients,
    step: u64,
    /// First-moment decay.
    pub beta1: f64,
    /// Second-moment decay.
    pub beta2: f64,
    /// Added to `sqrt(v)` in the denominator.
    pub epsilon: f64,
}

impl AdamState {
    /// Fresh state with β1 = 0.9, β2 = 0.999, ε = 1e-7.
    pub fn new(net: &Network) -> Self {
        Self::with_hyperparameters(net, 0.9, 0.999, 1e-7)
    }

    /// Fresh state with explicit hyperparameters.
    pub fn with_hyperparameters(net: &Network, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        Self {
            first: Gradients::zeros_like(net),
            second: Gradients::zeros_like(net),
            step: 0,
            beta1,
            beta2,
            epsilon,
        }
    }

    /// Number of updates applied so far.
    pub fn step(&self) -> u64 {
        self.step
    }

    /// First-moment accumulator.
    pub fn first_moment(&self) -> &Gradients {
        &self.first
    }

    /// Second-moment accumulator.
    pub fn second_moment(&self) -> &Gradients {
        &self.second
    }
}

/// One bias-corrected Adam update, in the form
/// `θ -= lr·sqrt(1-β2^t)/(1-β1^t) · m / (sqrt(v) + ε)`.
///
/// Nothing is modified when a gradient entry is not finite.
pub fn adam_step(net: &mut Network, grads: &Gradients, state: &mut AdamState, lr: f64) -> Result<()> {
    if !(lr > 0.0 && lr.is_finite()) {
        return Err(invalid("learning rate", "must be positive and finite"));
    }
    check_len("gradient layers", net.layers.len(), grads.layers.len())?;
    check_len("adam state layers", net.layers.len(), state.first.layers.len())?;
    for (l, (gw, gb)) in net.layers.iter().zip(&grads.layers) {
        check_len("weight gradient", l.weights.len(), gw.len())?;
        check_len("bias gradient", l.biases.len(), gb.len())?;
    }
    for (layer, kind, block) in grads.blocks() {
        if let Some(index) = block.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteGradient { layer, kind, index });
        }
    }

    state.step += 1;
    let t = state.step as f64;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.epsilon);
    let lr_t = lr * libm::sqrt(1.0 - libm::pow(b2, t)) / (1.0 - libm::pow(b1, t));
    let update = |theta: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
        for (((p, g), m), v) in theta.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p -= lr_t * *m / (libm::sqrt(*v) + eps);
        }
    };
    for (j, layer) in net.layers.iter_mut().enumerate() {
        let (gw, gb) = &grads.layers[j];
        let (mw, mb) = &mut state.first.layers[j];
        let (vw, vb) = &mut state.second.layers[j];
        update(&mut layer.weights, gw, mw, vw);
        update(&mut layer.biases, gb, mb, vb);
    }
    Ok(())
}

/// Rescales every neuron's incoming-weight vector to norm at most `max_w`.
/// `max_w == 0` disables the constraint; biases are never touched.
pub fn apply_max_norm(net: &mut Network, max_w: f64) {
    if !(max_w > 0.0) {
        return;
    }
    for layer in &mut net.layers {
        for row in layer.weights.chunks_exact_mut(layer.inputs) {
            let n = crate::linalg::norm(row);
            if n > max_w {
                let s = max_w / n;
                row.iter_mut().for_each(|w| *w *= s);
            }
        }
    }
}

/// Product over layers of `‖W_j‖₂ · Lip(act_j)`.
///
/// Biases do not change a Lipschitz constant, and the operator norm of the
/// reshaped `c×d` output is at most the Euclidean norm of the flat output, so
/// the result bounds `‖Ĵ(x) - Ĵ(y)‖ / ‖x - y‖` in operator norm.
pub fn lipschitz_upper_bound(net: &Network) -> f64 {
    net.layers
        .iter()
        .map(|l| l.weight_matrix().operator_norm() * l.activation.lipschitz())
        .product()
}
