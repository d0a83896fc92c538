//! Small fully connected regression network with analytic backpropagation,
//! inverted dropout on hidden layers and mini-batch SGD.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{LabeledDataset, RngSeed};
use crate::uq_methods::evidential::{evidential_loss_raw_gradient, sigmoid, softplus};

pub const MAX_DROPOUT_RATE: f64 = 0.5;
/// Above this evidential weight training is known to become unstable.
pub const LAMBDA_WARN_ABOVE: f64 = 0.2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NeuralError {
    #[error("input has {found} features, network expects {expected}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("invalid network configuration: {0}")]
    InvalidConfig(String),
    #[error("non-finite loss at sample `{id}`")]
    NonFiniteLoss { id: String },
    #[error("parameters became non-finite during epoch {epoch}")]
    Divergence { epoch: usize },
    #[error("batch is empty")]
    EmptyBatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
    Softplus,
    /// Identity; used to check dropout expectations on linear networks.
    Linear,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Self::Relu => z.max(0.0),
            Self::Tanh => z.tanh(),
            Self::Softplus => softplus(z),
            Self::Linear => z,
        }
    }

    fn derivative(self, z: f64) -> f64 {
        match self {
            Self::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Tanh => 1.0 - z.tanh().powi(2),
            Self::Softplus => sigmoid(z),
            Self::Linear => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpConfig {
    /// Input width, one or more hidden widths, output width (1 or 4).
    pub layer_widths: Vec<usize>,
    pub activation: Activation,
    pub dropout_rate: f64,
    pub seed: RngSeed,
}

impl MlpConfig {
    pub fn validate(&self) -> Result<(), NeuralError> {
        let w = &self.layer_widths;
        if w.len() < 3 {
            return Err(NeuralError::InvalidConfig(
                "need an input width, at least one hidden layer and an output width".into(),
            ));
        }
        if w.contains(&0) {
            return Err(NeuralError::InvalidConfig("layer widths must be positive".into()));
        }
        let out = *w.last().unwrap();
        if out != 1 && out != 4 {
            return Err(NeuralError::InvalidConfig(format!(
                "output width must be 1 or 4, got {out}"
            )));
        }
        if !(0.0..=MAX_DROPOUT_RATE).contains(&self.dropout_rate) {
            return Err(NeuralError::InvalidConfig(format!(
                "dropout rate {} outside [0, {MAX_DROPOUT_RATE}]",
                self.dropout_rate
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LossKind {
    SquaredError,
    Evidential { lambda: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    #[default]
    Sgd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub loss: LossKind,
    #[serde(default)]
    pub optimizer: Optimizer,
    pub seed: RngSeed,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NeuralError> {
        if self.batch_size == 0 {
            return Err(NeuralError::InvalidConfig("batch size must be positive".into()));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(NeuralError::InvalidConfig("learning rate must be positive".into()));
        }
        if let LossKind::Evidential { lambda } = self.loss {
            if !(lambda >= 0.0) || !lambda.is_finite() {
                return Err(NeuralError::InvalidConfig(format!(
                    "lambda must be nonnegative, got {lambda}"
                )));
            }
            if lambda > LAMBDA_WARN_ABOVE {
                log::warn!("evidential lambda {lambda} exceeds {LAMBDA_WARN_ABOVE}; training may not converge");
            }
        }
        Ok(())
    }
}

/// Dense layer; `weights` is row-major `n_out × n_in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DenseLayer {
    pub n_in: usize,
    pub n_out: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl DenseLayer {
    fn zeros(n_in: usize, n_out: usize) -> Self {
        Self {
            n_in,
            n_out,
            weights: vec![0.0; n_in * n_out],
            biases: vec![0.0; n_out],
        }
    }

    fn affine(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.n_in)
            .zip(&self.biases)
            .map(|(row, b)| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b)
            .collect()
    }
}

/// Parameter gradients, laid out like the model's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<DenseLayer>,
}

impl Gradients {
    fn zeros_like(m: &MlpModel) -> Self {
        Self {
            layers: m.layers.iter().map(|l| DenseLayer::zeros(l.n_in, l.n_out)).collect(),
        }
    }

    fn scale(&mut self, s: f64) {
        for l in &mut self.layers {
            l.weights.iter_mut().for_each(|w| *w *= s);
            l.biases.iter_mut().for_each(|b| *b *= s);
        }
    }

    /// All entries flattened in layer order, weights before biases.
    pub fn flatten(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.biases).copied())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpModel {
    pub config: MlpConfig,
    pub layers: Vec<DenseLayer>,
}

/// Per-layer multipliers for hidden units: 0 for dropped units and
/// `1/(1 − rate)` for survivors.
type Masks = Vec<Vec<f64>>;

struct Trace {
    /// Input followed by each hidden layer's post-dropout activations.
    inputs: Vec<Vec<f64>>,
    /// Pre-activations of each hidden layer.
    pre: Vec<Vec<f64>>,
    output: Vec<f64>,
}

impl MlpModel {
    /// Kaiming-style uniform initialization, `U(±√(6/fan_in))`, zero biases.
    pub fn new(config: MlpConfig) -> Result<Self, NeuralError> {
        config.validate()?;
        let mut rng = config.seed.rng();
        let layers = config
            .layer_widths
            .windows(2)
            .map(|w| {
                let (n_in, n_out) = (w[0], w[1]);
                let bound = (6.0 / n_in as f64).sqrt();
                DenseLayer {
                    n_in,
                    n_out,
                    weights: (0..n_in * n_out).map(|_| rng.random_range(-bound..bound)).collect(),
                    biases: vec![0.0; n_out],
                }
            })
            .collect();
        Ok(Self { config, layers })
    }

    pub fn input_width(&self) -> usize {
        self.config.layer_widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.config.layer_widths.last().unwrap()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    pub fn parameters(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.biases).copied())
            .collect()
    }

    pub fn set_parameters(&mut self, params: &[f64]) {
        let mut it = params.iter().copied();
        for l in &mut self.layers {
            for w in l.weights.iter_mut().chain(l.biases.iter_mut()) {
                *w = it.next().expect("parameter vector too short");
            }
        }
    }

    fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.biases).all(|v| v.is_finite()))
    }

    fn masks(&self, rate: f64, seed: RngSeed) -> Masks {
        let mut rng = seed.rng();
        let keep_scale = 1.0 / (1.0 - rate);
        self.layers[..self.layers.len() - 1]
            .iter()
            .map(|l| {
                (0..l.n_out)
                    .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep_scale })
                    .collect()
            })
            .collect()
    }

    fn check_input(&self, x: &[f64]) -> Result<(), NeuralError> {
        if x.len() != self.input_width() {
            return Err(NeuralError::ShapeMismatch {
                expected: self.input_width(),
                found: x.len(),
            });
        }
        Ok(())
    }

    fn trace(&self, x: &[f64], masks: Option<&Masks>) -> Trace {
        let act = self.config.activation;
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(last);
        let mut current = x.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            let z = layer.affine(&current);
            inputs.push(current);
            if i == last {
                return Trace { inputs, pre, output: z };
            }
            let mut h: Vec<f64> = z.iter().map(|&v| act.apply(v)).collect();
            if let Some(m) = masks {
                h.iter_mut().zip(&m[i]).for_each(|(v, k)| *v *= k);
            }
            pre.push(z);
            current = h;
        }
        unreachable!("network has at least one layer")
    }

    /// Raw network output. With `dropout_active`, every hidden unit is
    /// dropped independently with the configured rate, using a mask drawn
    /// from `seed`.
    pub fn forward(&self, x: &[f64], dropout_active: bool, seed: RngSeed) -> Result<Vec<f64>, NeuralError> {
        self.forward_with_rate(x, dropout_active.then_some(self.config.dropout_rate), seed)
    }

    /// Like [`MlpModel::forward`] with an explicit dropout rate (`None` turns
    /// dropout off).
    pub fn forward_with_rate(&self, x: &[f64], rate: Option<f64>, seed: RngSeed) -> Result<Vec<f64>, NeuralError> {
        self.check_input(x)?;
        let masks = match rate {
            Some(r) if r > 0.0 => Some(self.masks(r, seed)),
            _ => None,
        };
        Ok(self.trace(x, masks.as_ref()).output)
    }

    /// Deterministic forward pass.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>, NeuralError> {
        self.check_input(x)?;
        Ok(self.trace(x, None).output)
    }

    fn backward(&self, t: &Trace, masks: Option<&Masks>, d_out: &[f64], grads: &mut Gradients) {
        let act = self.config.activation;
        let mut delta = d_out.to_vec();
        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            let input = &t.inputs[i];
            let g = &mut grads.layers[i];
            for (o, &d) in delta.iter().enumerate() {
                g.biases[o] += d;
                let row = &mut g.weights[o * layer.n_in..(o + 1) * layer.n_in];
                row.iter_mut().zip(input).for_each(|(w, x)| *w += d * x);
            }
            if i == 0 {
                break;
            }
            let mut prev = vec![0.0; layer.n_in];
            for (o, &d) in delta.iter().enumerate() {
                let row = &layer.weights[o * layer.n_in..(o + 1) * layer.n_in];
                prev.iter_mut().zip(row).for_each(|(p, w)| *p += w * d);
            }
            let z = &t.pre[i - 1];
            for (j, p) in prev.iter_mut().enumerate() {
                *p *= act.derivative(z[j]);
                if let Some(m) = masks {
                    *p *= m[i - 1][j];
                }
            }
            delta = prev;
        }
    }

    fn sample_loss(&self, output: &[f64], y: f64, loss: LossKind) -> (f64, Vec<f64>) {
        match loss {
            LossKind::SquaredError => {
                let e = output[0] - y;
                let mut d = vec![0.0; output.len()];
                d[0] = 2.0 * e;
                (e * e, d)
            }
            LossKind::Evidential { lambda } => {
                let (l, g) = evidential_loss_raw_gradient(output, y, lambda);
                (l, g.to_vec())
            }
        }
    }

    /// Mean loss over `rows` of `data` and its exact gradient. When
    /// `dropout` is given, sample `k` of the batch uses the mask drawn from
    /// `dropout.derive(k)`.
    pub fn loss_and_gradient(
        &self,
        data: &LabeledDataset,
        rows: &[usize],
        loss: LossKind,
        dropout: Option<RngSeed>,
    ) -> Result<(f64, Gradients), NeuralError> {
        if rows.is_empty() {
            return Err(NeuralError::EmptyBatch);
        }
        if loss == LossKind::SquaredError && self.output_width() != 1 {
            return Err(NeuralError::InvalidConfig("squared error needs a single output".into()));
        }
        if matches!(loss, LossKind::Evidential { .. }) && self.output_width() != 4 {
            return Err(NeuralError::InvalidConfig("evidential loss needs a 4-wide head".into()));
        }
        let rate = self.config.dropout_rate;
        let mut grads = Gradients::zeros_like(self);
        let mut total = 0.0;
        for (k, &r) in rows.iter().enumerate() {
            let x = &data.features[r];
            self.check_input(x)?;
            let masks = dropout
                .filter(|_| rate > 0.0)
                .map(|s| self.masks(rate, s.derive(k as u64)));
            let t = self.trace(x, masks.as_ref());
            let (l, d_out) = self.sample_loss(&t.output, data.targets[r], loss);
            if !l.is_finite() {
                return Err(NeuralError::NonFiniteLoss {
                    id: data.ids[r].clone(),
                });
            }
            total += l;
            self.backward(&t, masks.as_ref(), &d_out, &mut grads);
        }
        let inv = 1.0 / rows.len() as f64;
        grads.scale(inv);
        Ok((total * inv, grads))
    }

    fn sgd_step(&mut self, grads: &Gradients, lr: f64) {
        for (l, g) in self.layers.iter_mut().zip(&grads.layers) {
            l.weights.iter_mut().zip(&g.weights).for_each(|(w, d)| *w -= lr * d);
            l.biases.iter_mut().zip(&g.biases).for_each(|(b, d)| *b -= lr * d);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: MlpModel,
    /// Mean training loss of each epoch, accumulated over its batches.
    pub loss_history: Vec<f64>,
}

/// Mini-batch SGD. Each epoch reshuffles rows with a stream derived from
/// `(cfg.seed, epoch)`; dropout masks (when the model has a nonzero rate)
/// come from further derived streams, so training is fully reproducible.
pub fn train(model: MlpModel, data: &LabeledDataset, cfg: &TrainConfig) -> Result<TrainOutcome, NeuralError> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(NeuralError::EmptyBatch);
    }
    if data.dim() != model.input_width() {
        return Err(NeuralError::ShapeMismatch {
            expected: model.input_width(),
            found: data.dim(),
        });
    }
    let mut model = model;
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..data.len()).collect();
    for epoch in 0..cfg.epochs {
        let epoch_seed = cfg.seed.derive(epoch as u64);
        order.shuffle(&mut epoch_seed.derive(u64::MAX).rng());
        let mut epoch_loss = 0.0;
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let (loss, grads) = model.loss_and_gradient(data, batch, cfg.loss, Some(epoch_seed.derive(b as u64)))?;
            epoch_loss += loss * batch.len() as f64;
            match cfg.optimizer {
                Optimizer::Sgd => model.sgd_step(&grads, cfg.learning_rate),
            }
            if !model.all_finite() {
                return Err(NeuralError::Divergence { epoch });
            }
        }
        history.push(epoch_loss / data.len() as f64);
    }
    Ok(TrainOutcome {
        model,
        loss_history: history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::uq_methods::evidential::{evidential_loss, EvidentialParams};

    fn config(widths: &[usize], act: Activation, rate: f64, seed: u64) -> MlpConfig {
        MlpConfig {
            layer_widths: widths.to_vec(),
            activation: act,
            dropout_rate: rate,
            seed: RngSeed::new(seed),
        }
    }

    fn dataset(xs: Vec<Vec<f64>>, ys: Vec<f64>) -> LabeledDataset {
        let ids = (0..ys.len()).map(|i| format!("s{i}")).collect();
        LabeledDataset::new(ids, xs, ys, None).unwrap()
    }

    fn random_batch(seed: u64, n: usize, d: usize) -> LabeledDataset {
        let mut rng = RngSeed::new(seed).rng();
        let xs = (0..n)
            .map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let ys = (0..n).map(|_| rng.random_range(-1.5..1.5)).collect();
        dataset(xs, ys)
    }

    fn max_rel_fd_error(m: &MlpModel, data: &LabeledDataset, loss: LossKind) -> f64 {
        let rows: Vec<usize> = (0..data.len()).collect();
        let (_, g) = m.loss_and_gradient(data, &rows, loss, None).unwrap();
        let analytic = g.flatten();
        let base = m.parameters();
        let h = 1e-5;
        let mut worst = 0.0_f64;
        let mut probe = m.clone();
        for k in 0..base.len() {
            let mut p = base.clone();
            p[k] += h;
            probe.set_parameters(&p);
            let up = probe.loss_and_gradient(data, &rows, loss, None).unwrap().0;
            p[k] -= 2.0 * h;
            probe.set_parameters(&p);
            let dn = probe.loss_and_gradient(data, &rows, loss, None).unwrap().0;
            let fd = (up - dn) / (2.0 * h);
            let rel = (fd - analytic[k]).abs() / fd.abs().max(analytic[k].abs()).max(1e-3);
            worst = worst.max(rel);
        }
        worst
    }

    #[test]
    fn zero_network_outputs_zero() {
        let mut m = MlpModel::new(config(&[3, 5, 1], Activation::Tanh, 0.0, 1)).unwrap();
        m.set_parameters(&vec![0.0; m.parameter_count()]);
        assert_eq!(m.predict(&[1.0, -7.0, 3.0]).unwrap(), vec![0.0]);
        assert_eq!(m.predict(&[0.0, 0.0, 0.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn zero_rate_dropout_is_a_no_op() {
        let m = MlpModel::new(config(&[2, 16, 16, 1], Activation::Relu, 0.0, 2)).unwrap();
        let x = [0.3, -1.1];
        assert_eq!(
            m.forward(&x, true, RngSeed::new(5)).unwrap(),
            m.forward(&x, false, RngSeed::new(5)).unwrap()
        );
    }

    #[test]
    fn dropout_mask_repeats_for_fixed_seed() {
        let m = MlpModel::new(config(&[2, 32, 1], Activation::Relu, 0.5, 3)).unwrap();
        let x = [0.8, 0.4];
        let a = m.forward(&x, true, RngSeed::new(9)).unwrap();
        assert_eq!(a, m.forward(&x, true, RngSeed::new(9)).unwrap());
        let outputs: std::collections::HashSet<u64> = (0..20)
            .map(|s| m.forward(&x, true, RngSeed::new(s)).unwrap()[0].to_bits())
            .collect();
        assert!(outputs.len() > 10);
    }

    #[test]
    fn shape_mismatch() {
        let m = MlpModel::new(config(&[2, 4, 1], Activation::Relu, 0.0, 1)).unwrap();
        assert_eq!(
            m.predict(&[1.0]),
            Err(NeuralError::ShapeMismatch { expected: 2, found: 1 })
        );
    }

    #[test]
    fn config_validation() {
        assert!(MlpModel::new(config(&[2, 1], Activation::Relu, 0.0, 1)).is_err());
        assert!(MlpModel::new(config(&[2, 4, 2], Activation::Relu, 0.0, 1)).is_err());
        assert!(MlpModel::new(config(&[2, 4, 1], Activation::Relu, 0.6, 1)).is_err());
        assert!(MlpModel::new(config(&[2, 4, 4], Activation::Relu, 0.5, 1)).is_ok());
    }

    #[test]
    fn perfect_fit_has_zero_loss_and_gradient() {
        let mut m = MlpModel::new(config(&[1, 3, 1], Activation::Tanh, 0.0, 4)).unwrap();
        m.set_parameters(&vec![0.0; m.parameter_count()]);
        let last = m.layers.len() - 1;
        m.layers[last].biases[0] = 1.5;
        let data = dataset(vec![vec![0.1], vec![2.0]], vec![1.5, 1.5]);
        let (l, g) = m
            .loss_and_gradient(&data, &[0, 1], LossKind::SquaredError, None)
            .unwrap();
        assert_eq!(l, 0.0);
        assert!(g.flatten().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn squared_error_gradient_matches_fd_on_2_8_1() {
        let m = MlpModel::new(config(&[2, 8, 1], Activation::Tanh, 0.0, 10)).unwrap();
        let data = random_batch(11, 6, 2);
        assert!(max_rel_fd_error(&m, &data, LossKind::SquaredError) < 1e-5);
    }

    #[test]
    fn gradient_check_over_random_draws() {
        for draw in 0..50u64 {
            let act = [Activation::Tanh, Activation::Softplus][draw as usize % 2];
            let sq = MlpModel::new(config(&[3, 6, 5, 1], act, 0.0, 100 + draw)).unwrap();
            let data = random_batch(200 + draw, 5, 3);
            let e = max_rel_fd_error(&sq, &data, LossKind::SquaredError);
            assert!(e <= 1e-6, "draw {draw}: squared error rel err {e}");

            let ev = MlpModel::new(config(&[3, 6, 4], act, 0.0, 300 + draw)).unwrap();
            let lambda = [0.0, 0.05, 0.2][draw as usize % 3];
            let e = max_rel_fd_error(&ev, &data, LossKind::Evidential { lambda });
            assert!(e <= 1e-4, "draw {draw}: evidential rel err {e}");
        }
    }

    #[test]
    fn gradient_with_fixed_dropout_mask_matches_fd() {
        // Masks are a deterministic function of the seed, so the FD oracle
        // sees the same sub-network.
        let m = MlpModel::new(config(&[2, 10, 1], Activation::Tanh, 0.3, 12)).unwrap();
        let data = random_batch(13, 4, 2);
        let rows = [0, 1, 2, 3];
        let seed = Some(RngSeed::new(77));
        let (_, g) = m.loss_and_gradient(&data, &rows, LossKind::SquaredError, seed).unwrap();
        let base = m.parameters();
        let analytic = g.flatten();
        let mut probe = m.clone();
        for k in 0..base.len() {
            let mut p = base.clone();
            p[k] += 1e-5;
            probe.set_parameters(&p);
            let up = probe
                .loss_and_gradient(&data, &rows, LossKind::SquaredError, seed)
                .unwrap()
                .0;
            p[k] -= 2e-5;
            probe.set_parameters(&p);
            let dn = probe
                .loss_and_gradient(&data, &rows, LossKind::SquaredError, seed)
                .unwrap()
                .0;
            let fd = (up - dn) / 2e-5;
            assert!((fd - analytic[k]).abs() <= 1e-6 * fd.abs().max(1.0));
        }
    }

    #[test]
    fn evidential_loss_through_pinned_head() {
        // Zero weights and head biases set so that (γ, ν, α, β) = (y, 1, 2, 1).
        let y = 0.42;
        let mut m = MlpModel::new(config(&[2, 3, 4], Activation::Relu, 0.0, 5)).unwrap();
        m.set_parameters(&vec![0.0; m.parameter_count()]);
        let pinned = EvidentialParams::new(y, 1.0, 2.0, 1.0).unwrap();
        let last = m.layers.len() - 1;
        m.layers[last].biases = pinned.to_raw().to_vec();
        let data = dataset(vec![vec![1.0, -1.0]], vec![y]);
        for lambda in [0.0, 0.05, 0.2] {
            let (l, _) = m
                .loss_and_gradient(&data, &[0], LossKind::Evidential { lambda }, None)
                .unwrap();
            let params = EvidentialParams::from_raw(&m.predict(&[1.0, -1.0]).unwrap());
            assert!((l - evidential_loss(&params, y, lambda)).abs() < 1e-12);
            assert!((l - 0.9808).abs() < 1e-3);
        }
    }

    #[test]
    fn learns_a_line() {
        let mut rng = RngSeed::new(21).rng();
        let xs: Vec<Vec<f64>> = (0..1000).map(|_| vec![rng.random_range(-1.0..1.0)]).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x[0] + 1.0).collect();
        let data = dataset(xs, ys);
        let m = MlpModel::new(config(&[1, 16, 1], Activation::Tanh, 0.0, 22)).unwrap();
        let cfg = TrainConfig {
            epochs: 200,
            batch_size: 16,
            learning_rate: 0.02,
            loss: LossKind::SquaredError,
            optimizer: Optimizer::Sgd,
            seed: RngSeed::new(23),
        };
        let out = train(m, &data, &cfg).unwrap();
        let rows: Vec<usize> = (0..data.len()).collect();
        let mse = out
            .model
            .loss_and_gradient(&data, &rows, LossKind::SquaredError, None)
            .unwrap()
            .0;
        assert!(mse < 1e-3, "final mse {mse}");
    }

    #[test]
    fn zero_epochs_leaves_model_unchanged() {
        let data = random_batch(1, 10, 2);
        let m = MlpModel::new(config(&[2, 4, 1], Activation::Relu, 0.0, 1)).unwrap();
        let cfg = TrainConfig {
            epochs: 0,
            batch_size: 4,
            learning_rate: 0.1,
            loss: LossKind::SquaredError,
            optimizer: Optimizer::Sgd,
            seed: RngSeed::new(0),
        };
        let out = train(m.clone(), &data, &cfg).unwrap();
        assert_eq!(out.model, m);
        assert!(out.loss_history.is_empty());
    }

    #[test]
    fn training_is_deterministic() {
        let data = random_batch(2, 64, 2);
        let run = || {
            let m = MlpModel::new(config(&[2, 8, 8, 4], Activation::Relu, 0.1, 3)).unwrap();
            let cfg = TrainConfig {
                epochs: 5,
                batch_size: 8,
                learning_rate: 0.01,
                loss: LossKind::Evidential { lambda: 0.05 },
                optimizer: Optimizer::Sgd,
                seed: RngSeed::new(4),
            };
            train(m, &data, &cfg).unwrap()
        };
        let (a, b) = (run(), run());
        let bits = |h: &[f64]| h.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.loss_history), bits(&b.loss_history));
        assert_eq!(a.model, b.model);
    }

    #[test]
    fn loss_is_essentially_nonincreasing_on_linear_task() {
        let mut rng = RngSeed::new(31).rng();
        let xs: Vec<Vec<f64>> = (0..400)
            .map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
            .collect();
        let ys: Vec<f64> = xs.iter().map(|x| 0.5 * x[0] - 1.5 * x[1] + 0.2).collect();
        let data = dataset(xs, ys);
        let m = MlpModel::new(config(&[2, 8, 1], Activation::Tanh, 0.0, 32)).unwrap();
        let cfg = TrainConfig {
            epochs: 60,
            batch_size: 20,
            learning_rate: 0.005,
            loss: LossKind::SquaredError,
            optimizer: Optimizer::Sgd,
            seed: RngSeed::new(33),
        };
        let h = train(m, &data, &cfg).unwrap().loss_history;
        for w in h.windows(2) {
            assert!(w[1] <= w[0] * 1.01, "{} -> {}", w[0], w[1]);
        }
        assert!(h.last().unwrap() < &(0.2 * h[0]));
    }

    #[test]
    fn inverted_dropout_preserves_expectation_on_linear_net() {
        let m = MlpModel::new(config(&[2, 6, 6, 1], Activation::Linear, 0.3, 41)).unwrap();
        let x = [0.7, -0.4];
        let exact = m.predict(&x).unwrap()[0];
        let n = 100_000;
        let base = RngSeed::new(42);
        let mean: f64 = (0..n)
            .map(|k| m.forward(&x, true, base.derive(k)).unwrap()[0])
            .sum::<f64>()
            / n as f64;
        assert!(
            (mean - exact).abs() <= 0.01 * exact.abs().max(1e-3),
            "{mean} vs {exact}"
        );
    }

    #[test]
    fn nan_guard_reports_divergence() {
        let data = dataset(vec![vec![1e6], vec![-1e6]], vec![1e6, -1e6]);
        let m = MlpModel::new(config(&[1, 4, 1], Activation::Linear, 0.0, 1)).unwrap();
        let cfg = TrainConfig {
            epochs: 50,
            batch_size: 1,
            learning_rate: 10.0,
            loss: LossKind::SquaredError,
            optimizer: Optimizer::Sgd,
            seed: RngSeed::new(0),
        };
        let err = train(m, &data, &cfg).unwrap_err();
        assert!(matches!(
            err,
            NeuralError::Divergence { .. } | NeuralError::NonFiniteLoss { .. }
        ));
    }
}
