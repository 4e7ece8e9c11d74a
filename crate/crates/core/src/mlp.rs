//! Feed-forward network used as the co-supervising teacher.
//!
//! Hidden layer `l` computes `z⁽ˡ⁾ = σ(W⁽ˡ⁾ z⁽ˡ⁻¹⁾ + b⁽ˡ⁾)`; a single output
//! unit is passed through the link (identity for regression, logistic for
//! binary classification). Training is plain mini-batch SGD on the mean
//! squared error or the mean cross-entropy.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{Dataset, Task};
use crate::scalar::{sigmoid, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MlpError {
    #[error("at least one hidden layer width is required")]
    EmptyWidths,
    #[error("hidden layer widths must be positive")]
    ZeroWidth,
    #[error("epochs must be at least 1")]
    ZeroEpochs,
    #[error("batch size must be at least 1")]
    ZeroBatch,
    #[error("learning rate {0} must be finite and non-negative")]
    BadLearningRate(f64),
    #[error("input has dimension {got}, network expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("training loss became non-finite at epoch {epoch}; lower the learning rate")]
    DivergedLoss { epoch: usize },
}

pub type Result<T> = std::result::Result<T, MlpError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
    Sigmoid,
    /// Linear units; only useful for testing the trainer.
    Identity,
}

impl Activation {
    #[inline]
    fn apply<T: Scalar>(self, a: T) -> T {
        match self {
            Activation::Relu => {
                if a > T::zero() {
                    a
                } else {
                    T::zero()
                }
            }
            Activation::Tanh => a.tanh(),
            Activation::Sigmoid => sigmoid(a),
            Activation::Identity => a,
        }
    }

    /// Derivative expressed through the pre-activation `a` and output `z`.
    /// The ReLU subgradient at 0 is 0.
    #[inline]
    fn derivative<T: Scalar>(self, a: T, z: T) -> T {
        match self {
            Activation::Relu => {
                if a > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Tanh => T::one() - z * z,
            Activation::Sigmoid => z * (T::one() - z),
            Activation::Identity => T::one(),
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            "sigmoid" => Ok(Activation::Sigmoid),
            "identity" | "linear" => Ok(Activation::Identity),
            other => Err(format!("unknown activation `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputLink {
    Linear,
    Sigmoid,
}

impl OutputLink {
    pub fn for_task(task: Task) -> Self {
        match task {
            Task::Regression => OutputLink::Linear,
            Task::BinaryClassification => OutputLink::Sigmoid,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub widths: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub activation: Activation,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            widths: vec![16, 16],
            epochs: 200,
            batch_size: 32,
            learning_rate: 0.05,
            activation: Activation::Relu,
            seed: 0,
        }
    }
}

impl MlpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.widths.is_empty() {
            return Err(MlpError::EmptyWidths);
        }
        if self.widths.contains(&0) {
            return Err(MlpError::ZeroWidth);
        }
        if self.epochs == 0 {
            return Err(MlpError::ZeroEpochs);
        }
        if self.batch_size == 0 {
            return Err(MlpError::ZeroBatch);
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(MlpError::BadLearningRate(self.learning_rate));
        }
        Ok(())
    }
}

/// Network parameters. `weights[l]` has shape `p_{l+1} × p_l`; the last
/// entry is the `1 × p_L` output layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct MlpModel<T> {
    pub weights: Vec<Array2<T>>,
    pub biases: Vec<Array1<T>>,
    pub activation: Activation,
    pub output_link: OutputLink,
    pub layer_widths: Vec<usize>,
    /// Full-training-set loss after each epoch.
    #[serde(default)]
    pub loss_history: Vec<T>,
}

/// Parameter gradients with the same layout as the model.
#[derive(Debug, Clone)]
pub struct Gradients<T> {
    pub weights: Vec<Array2<T>>,
    pub biases: Vec<Array1<T>>,
}

impl<T: Scalar> MlpModel<T> {
    /// Glorot-uniform weights, zero biases.
    pub fn init(
        input_dim: usize,
        widths: &[usize],
        activation: Activation,
        output_link: OutputLink,
        seed: u64,
    ) -> Result<Self> {
        if widths.is_empty() {
            return Err(MlpError::EmptyWidths);
        }
        if widths.contains(&0) || input_dim == 0 {
            return Err(MlpError::ZeroWidth);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut dims = vec![input_dim];
        dims.extend_from_slice(widths);
        dims.push(1);
        let mut weights = Vec::with_capacity(dims.len() - 1);
        let mut biases = Vec::with_capacity(dims.len() - 1);
        for pair in dims.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let w =
                Array2::from_shape_simple_fn((fan_out, fan_in), || T::lit(rng.random_range(-a..a)));
            weights.push(w);
            biases.push(Array1::zeros(fan_out));
        }
        Ok(MlpModel {
            weights,
            biases,
            activation,
            output_link,
            layer_widths: widths.to_vec(),
            loss_history: Vec::new(),
        })
    }

    pub fn input_dim(&self) -> usize {
        self.weights[0].ncols()
    }

    pub fn n_hidden(&self) -> usize {
        self.layer_widths.len()
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.input_dim() {
            return Err(MlpError::DimensionMismatch {
                expected: self.input_dim(),
                got,
            });
        }
        Ok(())
    }

    fn link(&self, o: T) -> T {
        match self.output_link {
            OutputLink::Linear => o,
            OutputLink::Sigmoid => sigmoid(o),
        }
    }

    /// Post-activation outputs `z⁽¹⁾…z⁽ᴸ⁾`.
    pub fn hidden_outputs(&self, x: ArrayView1<T>) -> Result<Vec<Array1<T>>> {
        self.check_dim(x.len())?;
        let mut out = Vec::with_capacity(self.n_hidden());
        let mut z = x.to_owned();
        for l in 0..self.n_hidden() {
            let mut a = self.weights[l].dot(&z) + &self.biases[l];
            a.mapv_inplace(|v| self.activation.apply(v));
            out.push(a.clone());
            z = a;
        }
        Ok(out)
    }

    /// Applies the output layer and link to a last-hidden-layer vector.
    pub fn output_from_hidden(&self, z_last: ArrayView1<T>) -> T {
        let w = self.weights.last().expect("output layer");
        let b = self.biases.last().expect("output layer");
        self.link(w.row(0).dot(&z_last) + b[0])
    }

    pub fn predict(&self, x: ArrayView1<T>) -> Result<T> {
        let hidden = self.hidden_outputs(x)?;
        Ok(self.output_from_hidden(hidden.last().expect("L >= 1").view()))
    }

    /// Hidden outputs for every row, one matrix per layer.
    pub fn hidden_outputs_batch(&self, x: ArrayView2<T>) -> Result<Vec<Array2<T>>> {
        self.check_dim(x.ncols())?;
        let mut out: Vec<Array2<T>> = Vec::with_capacity(self.n_hidden());
        for l in 0..self.n_hidden() {
            let input = if l == 0 { x } else { out[l - 1].view() };
            let mut a = input.dot(&self.weights[l].t()) + &self.biases[l];
            a.mapv_inplace(|v| self.activation.apply(v));
            out.push(a);
        }
        Ok(out)
    }

    pub fn predict_batch(&self, x: ArrayView2<T>) -> Result<Array1<T>> {
        let hidden = self.hidden_outputs_batch(x)?;
        let last = hidden.last().expect("L >= 1");
        let w = self.weights.last().expect("output layer");
        let b = self.biases.last().expect("output layer")[0];
        Ok(last.dot(&w.row(0)).mapv(|o| self.link(o + b)))
    }

    /// Mean training loss: squared error or cross-entropy, by output link.
    pub fn loss(&self, x: ArrayView2<T>, y: ArrayView1<T>) -> Result<T> {
        Ok(self.loss_and_gradients(x, y, false)?.0)
    }

    pub fn gradients(&self, x: ArrayView2<T>, y: ArrayView1<T>) -> Result<(T, Gradients<T>)> {
        let (loss, g) = self.loss_and_gradients(x, y, true)?;
        Ok((loss, g.expect("requested")))
    }

    fn loss_and_gradients(
        &self,
        x: ArrayView2<T>,
        y: ArrayView1<T>,
        want_grad: bool,
    ) -> Result<(T, Option<Gradients<T>>)> {
        self.check_dim(x.ncols())?;
        let b = x.nrows();
        let nb = T::from_count(b.max(1));
        let mut pre: Vec<Array2<T>> = Vec::with_capacity(self.n_hidden());
        let mut post: Vec<Array2<T>> = Vec::with_capacity(self.n_hidden());
        for l in 0..self.n_hidden() {
            let input = if l == 0 { x } else { post[l - 1].view() };
            let a = input.dot(&self.weights[l].t()) + &self.biases[l];
            let z = a.mapv(|v| self.activation.apply(v));
            pre.push(a);
            post.push(z);
        }
        let last = post.last().expect("L >= 1");
        let w_out = self.weights.last().expect("output layer");
        let b_out = self.biases.last().expect("output layer")[0];
        let o = last.dot(&w_out.row(0)).mapv(|v| v + b_out);

        let mut loss = T::zero();
        let mut d_o = Array1::<T>::zeros(b);
        match self.output_link {
            OutputLink::Linear => {
                for i in 0..b {
                    let r = o[i] - y[i];
                    loss += r * r;
                    d_o[i] = T::lit(2.0) * r / nb;
                }
            }
            OutputLink::Sigmoid => {
                for i in 0..b {
                    // -[y ln σ(o) + (1-y) ln(1-σ(o))] = softplus(o) - y·o
                    let softplus = if o[i] > T::zero() {
                        o[i] + (-o[i]).exp().ln_1p()
                    } else {
                        o[i].exp().ln_1p()
                    };
                    loss += softplus - y[i] * o[i];
                    d_o[i] = (sigmoid(o[i]) - y[i]) / nb;
                }
            }
        }
        loss /= nb;
        if !want_grad {
            return Ok((loss, None));
        }

        let n_layers = self.weights.len();
        let mut gw: Vec<Array2<T>> = self
            .weights
            .iter()
            .map(|w| Array2::zeros(w.raw_dim()))
            .collect();
        let mut gb: Vec<Array1<T>> = self
            .biases
            .iter()
            .map(|v| Array1::zeros(v.raw_dim()))
            .collect();

        // output layer
        let d_out = d_o.insert_axis(Axis(1)); // b x 1
        gw[n_layers - 1] = d_out.t().dot(last);
        gb[n_layers - 1] = d_out.sum_axis(Axis(0));
        let mut delta = d_out.dot(w_out); // b x p_L, gradient w.r.t. z_L
        for l in (0..self.n_hidden()).rev() {
            let mut d_a = delta;
            ndarray::Zip::from(&mut d_a)
                .and(&pre[l])
                .and(&post[l])
                .for_each(|d, &a, &z| *d *= self.activation.derivative(a, z));
            let input = if l == 0 { x } else { post[l - 1].view() };
            gw[l] = d_a.t().dot(&input);
            gb[l] = d_a.sum_axis(Axis(0));
            delta = d_a.dot(&self.weights[l]);
        }
        Ok((
            loss,
            Some(Gradients {
                weights: gw,
                biases: gb,
            }),
        ))
    }

    fn apply_step(&mut self, g: &Gradients<T>, lr: T) {
        for (w, gw) in self.weights.iter_mut().zip(&g.weights) {
            w.scaled_add(-lr, gw);
        }
        for (b, gb) in self.biases.iter_mut().zip(&g.biases) {
            b.scaled_add(-lr, gb);
        }
    }

    /// Runs mini-batch SGD from the current parameters.
    pub fn fit(&mut self, x: ArrayView2<T>, y: ArrayView1<T>, cfg: &MlpConfig) -> Result<()> {
        cfg.validate()?;
        self.check_dim(x.ncols())?;
        let n = x.nrows();
        let lr = T::lit(cfg.learning_rate);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x5eed));
        let mut order: Vec<usize> = (0..n).collect();
        for epoch in 1..=cfg.epochs {
            order.shuffle(&mut rng);
            for chunk in order.chunks(cfg.batch_size) {
                let bx = x.select(Axis(0), chunk);
                let by = y.select(Axis(0), chunk);
                let (_, g) = self.gradients(bx.view(), by.view())?;
                self.apply_step(&g, lr);
            }
            let loss = self.loss(x, y)?;
            if !loss.is_finite() {
                return Err(MlpError::DivergedLoss { epoch });
            }
            self.loss_history.push(loss);
        }
        Ok(())
    }

    pub fn parameters(&self) -> impl Iterator<Item = &T> {
        self.weights
            .iter()
            .flat_map(|w| w.iter())
            .chain(self.biases.iter().flat_map(|b| b.iter()))
    }
}

/// Initializes and trains a network on a dataset.
pub fn train_mlp<T: Scalar>(train: &Dataset<T>, cfg: &MlpConfig) -> Result<MlpModel<T>> {
    cfg.validate()?;
    let mut model = MlpModel::init(
        train.n_features(),
        &cfg.widths,
        cfg.activation,
        OutputLink::for_task(train.task),
        cfg.seed,
    )?;
    model.fit(train.x.view(), train.y.view(), cfg)?;
    if let Some(last) = model.loss_history.last() {
        log::info!("mlp trained for {} epochs, final loss {}", cfg.epochs, last);
    }
    Ok(model)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientCheck<T> {
    pub max_rel_error: T,
    /// False when a non-finite gradient or loss was encountered.
    pub finite: bool,
}

/// Compares backprop gradients against central differences for every parameter.
///
/// The relative error of a pair `(a, b)` is `|a − b| / max(|a|, |b|, 1e-6)`.
pub fn gradient_check<T: Scalar>(
    model: &MlpModel<T>,
    x: ArrayView2<T>,
    y: ArrayView1<T>,
    h: T,
) -> Result<GradientCheck<T>> {
    let (_, g) = model.gradients(x, y)?;
    let floor = T::lit(1e-6);
    let mut probe = model.clone();
    let mut worst = T::zero();
    let mut finite = true;
    let two_h = h + h;
    let mut compare = |analytic: T, plus: T, minus: T| {
        let numeric = (plus - minus) / two_h;
        if !(analytic.is_finite() && numeric.is_finite()) {
            finite = false;
            return T::nan();
        }
        let denom = analytic.abs().max(numeric.abs()).max(floor);
        (analytic - numeric).abs() / denom
    };
    for l in 0..model.weights.len() {
        let (rows, cols) = model.weights[l].dim();
        for r in 0..rows {
            for c in 0..cols {
                let orig = model.weights[l][[r, c]];
                probe.weights[l][[r, c]] = orig + h;
                let plus = probe.loss(x, y)?;
                probe.weights[l][[r, c]] = orig - h;
                let minus = probe.loss(x, y)?;
                probe.weights[l][[r, c]] = orig;
                let e = compare(g.weights[l][[r, c]], plus, minus);
                worst = if e.is_nan() || e > worst { e } else { worst };
            }
        }
        for r in 0..model.biases[l].len() {
            let orig = model.biases[l][r];
            probe.biases[l][r] = orig + h;
            let plus = probe.loss(x, y)?;
            probe.biases[l][r] = orig - h;
            let minus = probe.loss(x, y)?;
            probe.biases[l][r] = orig;
            let e = compare(g.biases[l][r], plus, minus);
            worst = if e.is_nan() || e > worst { e } else { worst };
        }
    }
    Ok(GradientCheck {
        max_rel_error: worst,
        finite: finite && !worst.is_nan(),
    })
}
