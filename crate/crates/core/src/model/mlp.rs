use crate::error::{Error, Result};
use crate::model::loss::{loss_grad, LossKind};
use crate::numkit::{ActivationSpec, Matrix, Rng};
use crate::scalar::Scalar;

/// A fully-connected network `x -> rho(W^1 x) -> ... -> rho(W^P .) -> V .`.
///
/// Weight matrices are stored `out x in`, so row `m` of a hidden matrix is the
/// unit vector `w_m`. The output layer is linear. Biases are off unless
/// explicitly enabled; the generalization bounds assume a bias-free network.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel<T> {
    layer_weights: Vec<Matrix<T>>,
    biases: Option<Vec<Vec<T>>>,
    activation: ActivationSpec,
    widths: Vec<usize>,
    seed: u64,
}

/// Everything a forward pass produced for one batch.
#[derive(Debug, Clone)]
pub struct ForwardTrace<T> {
    pub inputs: Matrix<T>,
    /// Pre-activations of each hidden layer, `batch x M^(p)`.
    pub pre_activations: Vec<Matrix<T>>,
    /// Post-activation features of each hidden layer, `batch x M^(p)`.
    pub features: Vec<Matrix<T>>,
    pub outputs: Matrix<T>,
}

/// Gradients with the same shapes as the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub weights: Vec<Matrix<T>>,
    pub biases: Option<Vec<Vec<T>>>,
}

/// Draws weights uniformly from `+-sqrt(6 / fan_in)`, layer by layer in row-major order.
pub fn init_model<T: Scalar>(
    widths: &[usize],
    d_in: usize,
    d_out: usize,
    activation: ActivationSpec,
    seed: u64,
) -> Result<MlpModel<T>> {
    if widths.is_empty() {
        return Err(Error::invalid("a model needs at least one hidden layer"));
    }
    if d_in == 0 || d_out == 0 || widths.contains(&0) {
        return Err(Error::invalid(format!(
            "layer sizes must be positive (d_in={d_in}, widths={widths:?}, d_out={d_out})"
        )));
    }
    let mut rng = Rng::new(seed);
    let mut fan_in = d_in;
    let mut layer_weights = Vec::with_capacity(widths.len() + 1);
    for &fan_out in widths.iter().chain(std::iter::once(&d_out)) {
        let r = (6.0 / fan_in as f64).sqrt();
        layer_weights.push(Matrix::random_uniform(fan_out, fan_in, -r, r, &mut rng));
        fan_in = fan_out;
    }
    Ok(MlpModel {
        layer_weights,
        biases: None,
        activation,
        widths: widths.to_vec(),
        seed,
    })
}

impl<T: Scalar> MlpModel<T> {
    /// Assembles a model from explicit weights (hidden layers first, output layer last).
    pub fn from_weights(layer_weights: Vec<Matrix<T>>, activation: ActivationSpec) -> Result<Self> {
        if layer_weights.len() < 2 {
            return Err(Error::invalid("need at least one hidden layer and an output layer"));
        }
        for pair in layer_weights.windows(2) {
            if pair[1].cols() != pair[0].rows() {
                return Err(Error::Shape {
                    op: "model layers",
                    left: pair[0].shape(),
                    right: pair[1].shape(),
                });
            }
        }
        if layer_weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite("model weights"));
        }
        let widths = layer_weights[..layer_weights.len() - 1]
            .iter()
            .map(Matrix::rows)
            .collect();
        Ok(Self {
            layer_weights,
            biases: None,
            activation,
            widths,
            seed: 0,
        })
    }

    /// Adds zero-initialized biases to every layer.
    pub fn with_biases(mut self) -> Self {
        self.biases = Some(self.layer_weights.iter().map(|w| vec![T::zero(); w.rows()]).collect());
        self
    }

    pub(crate) fn set_biases(&mut self, biases: Option<Vec<Vec<T>>>) -> Result<()> {
        if let Some(b) = &biases {
            if b.len() != self.layer_weights.len()
                || b.iter().zip(&self.layer_weights).any(|(b, w)| b.len() != w.rows())
            {
                return Err(Error::invalid("bias vectors do not match the layer shapes"));
            }
        }
        self.biases = biases;
        Ok(())
    }

    pub(crate) fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
    }

    pub fn layer_weights(&self) -> &[Matrix<T>] {
        &self.layer_weights
    }

    /// Hidden weight matrices `W^1..W^P`.
    pub fn hidden_weights(&self) -> &[Matrix<T>] {
        &self.layer_weights[..self.layer_weights.len() - 1]
    }

    /// The linear output layer, `d_out x M^(P)`.
    pub fn output_weights(&self) -> &Matrix<T> {
        self.layer_weights.last().unwrap()
    }

    pub fn biases(&self) -> Option<&[Vec<T>]> {
        self.biases.as_deref()
    }

    pub fn includes_bias(&self) -> bool {
        self.biases.is_some()
    }

    pub fn activation(&self) -> ActivationSpec {
        self.activation
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn depth(&self) -> usize {
        self.widths.len()
    }

    pub fn input_dim(&self) -> usize {
        self.layer_weights[0].cols()
    }

    pub fn output_dim(&self) -> usize {
        self.output_weights().rows()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn parameter_count(&self) -> usize {
        self.layer_weights.iter().map(|w| w.rows() * w.cols()).sum::<usize>()
            + self.biases.as_ref().map_or(0, |b| b.iter().map(Vec::len).sum())
    }

    /// `params -= lr * grads`.
    pub fn apply_gradients(&mut self, grads: &Gradients<T>, lr: T) -> Result<()> {
        if grads.weights.len() != self.layer_weights.len() {
            return Err(Error::invalid("gradient layer count does not match the model"));
        }
        for (w, g) in self.layer_weights.iter_mut().zip(&grads.weights) {
            w.axpy(-lr, g)?;
        }
        if let (Some(bs), Some(gbs)) = (self.biases.as_mut(), grads.biases.as_ref()) {
            for (b, gb) in bs.iter_mut().zip(gbs) {
                for (bi, &gi) in b.iter_mut().zip(gb) {
                    *bi -= lr * gi;
                }
            }
        }
        Ok(())
    }

    /// Mutable access for tests and oracles that perturb single weights.
    pub fn layer_weights_mut(&mut self) -> &mut [Matrix<T>] {
        &mut self.layer_weights
    }

    pub fn cast<U: Scalar>(&self) -> MlpModel<U> {
        MlpModel {
            layer_weights: self.layer_weights.iter().map(Matrix::cast).collect(),
            biases: self.biases.as_ref().map(|bs| {
                bs.iter()
                    .map(|b| b.iter().map(|&v| U::lit(v.to_f64_lossy())).collect())
                    .collect()
            }),
            activation: self.activation,
            widths: self.widths.clone(),
            seed: self.seed,
        }
    }
}

fn add_bias<T: Scalar>(m: &mut Matrix<T>, bias: &[T]) {
    for r in 0..m.rows() {
        for (v, &b) in m.row_mut(r).iter_mut().zip(bias) {
            *v += b;
        }
    }
}

/// Runs the network on a batch and keeps every hidden layer's features.
pub fn forward<T: Scalar>(model: &MlpModel<T>, inputs: &Matrix<T>) -> Result<ForwardTrace<T>> {
    if inputs.cols() != model.input_dim() {
        return Err(Error::Shape {
            op: "forward",
            left: inputs.shape(),
            right: model.layer_weights[0].shape(),
        });
    }
    let spec = model.activation;
    let mut pre_activations = Vec::with_capacity(model.depth());
    let mut features: Vec<Matrix<T>> = Vec::with_capacity(model.depth());
    for (p, w) in model.hidden_weights().iter().enumerate() {
        let prev = features.last().unwrap_or(inputs);
        let mut z = prev.matmul_bt(w)?;
        if let Some(bs) = &model.biases {
            add_bias(&mut z, &bs[p]);
        }
        features.push(z.map(|v| spec.eval(v)));
        pre_activations.push(z);
    }
    let mut outputs = features.last().unwrap().matmul_bt(model.output_weights())?;
    if let Some(bs) = &model.biases {
        add_bias(&mut outputs, bs.last().unwrap());
    }
    Ok(ForwardTrace {
        inputs: inputs.clone(),
        pre_activations,
        features,
        outputs,
    })
}

/// Post-activation features of hidden layer `layer` (0-based) for a batch,
/// computed exactly as [`forward`] does but without the later layers.
pub fn hidden_features<T: Scalar>(model: &MlpModel<T>, inputs: &Matrix<T>, layer: usize) -> Result<Matrix<T>> {
    if layer >= model.depth() {
        return Err(Error::invalid(format!(
            "layer index {layer} out of range for a model with {} hidden layers",
            model.depth()
        )));
    }
    if inputs.cols() != model.input_dim() {
        return Err(Error::Shape {
            op: "hidden_features",
            left: inputs.shape(),
            right: model.layer_weights[0].shape(),
        });
    }
    let spec = model.activation;
    let mut h = inputs.clone();
    for (p, w) in model.hidden_weights()[..=layer].iter().enumerate() {
        let mut z = h.matmul_bt(w)?;
        if let Some(bs) = &model.biases {
            add_bias(&mut z, &bs[p]);
        }
        h = z.map(|v| spec.eval(v));
    }
    Ok(h)
}

/// Exact gradients of the batch-mean loss with respect to every parameter.
pub fn backward<T: Scalar>(
    model: &MlpModel<T>,
    trace: &ForwardTrace<T>,
    targets: &Matrix<T>,
    kind: LossKind,
) -> Result<Gradients<T>> {
    if trace.features.len() != model.depth() || trace.inputs.cols() != model.input_dim() {
        return Err(Error::invalid("forward trace does not belong to this model"));
    }
    let spec = model.activation;
    let depth = model.depth();
    let mut weights = vec![Matrix::zeros(0, 0); depth + 1];
    let mut bias_grads = model.biases.as_ref().map(|_| vec![Vec::new(); depth + 1]);

    // Gradient w.r.t. the pre-activation of the current layer.
    let mut delta = loss_grad(kind, &trace.outputs, targets)?;
    for layer in (0..=depth).rev() {
        let input = if layer == 0 { &trace.inputs } else { &trace.features[layer - 1] };
        // (input^T delta)^T: same per-cell sums as delta^T input, but the zero
        // skipping runs over the sparse input side.
        weights[layer] = input.matmul_at(&delta)?.transpose();
        if let Some(bg) = bias_grads.as_mut() {
            let mut col = vec![T::zero(); delta.cols()];
            for r in delta.row_iter() {
                for (c, &v) in col.iter_mut().zip(r) {
                    *c += v;
                }
            }
            bg[layer] = col;
        }
        if layer > 0 {
            let back = delta.matmul(&model.layer_weights[layer])?;
            let pre = &trace.pre_activations[layer - 1];
            delta = back.hadamard(&pre.map(|v| spec.derivative(v)))?;
        }
    }
    Ok(Gradients {
        weights,
        biases: bias_grads,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::loss::loss_value;

    fn m(rows: &[Vec<f64>]) -> Matrix<f64> {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn init_is_deterministic_with_expected_shapes() {
        let a = init_model::<f64>(&[4], 2, 1, ActivationSpec::relu(), 3).unwrap();
        let b = init_model::<f64>(&[4], 2, 1, ActivationSpec::relu(), 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.layer_weights()[0].shape(), (4, 2));
        assert_eq!(a.layer_weights()[1].shape(), (1, 4));
    }

    #[test]
    fn init_rejects_zero_width() {
        assert!(init_model::<f64>(&[4, 0], 2, 1, ActivationSpec::relu(), 0).is_err());
        assert!(init_model::<f64>(&[], 2, 1, ActivationSpec::relu(), 0).is_err());
    }

    #[test]
    fn init_norms_respect_the_range() {
        let model = init_model::<f64>(&[32, 16], 50, 3, ActivationSpec::relu(), 1).unwrap();
        let mut fan_in = 50;
        for w in model.layer_weights() {
            let r = (6.0 / fan_in as f64).sqrt();
            let n = w.norms();
            assert!(n.linf <= r);
            for l2 in n.l2_per_row {
                assert!(l2 <= r * (fan_in as f64).sqrt());
            }
            fan_in = w.rows();
        }
    }

    #[test]
    fn zero_input_gives_zero_features_for_relu() {
        let model = init_model::<f64>(&[5], 3, 2, ActivationSpec::relu(), 0).unwrap();
        let t = forward(&model, &Matrix::zeros(4, 3)).unwrap();
        assert!(t.features[0].as_slice().iter().all(|&v| v == 0.0));
        assert!(t.outputs.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn hand_set_network() {
        let model = MlpModel::from_weights(vec![m(&[vec![1.0], vec![-1.0]]), m(&[vec![1.0, 1.0]])], ActivationSpec::relu())
            .unwrap();
        let t = forward(&model, &m(&[vec![2.0]])).unwrap();
        assert_eq!(t.features[0].as_slice(), &[2.0, 0.0]);
        assert_eq!(t.outputs.as_slice(), &[2.0]);
    }

    #[test]
    fn forward_matches_per_sample_loop() {
        let mut rng = Rng::new(4);
        let model = init_model::<f64>(&[6, 5], 4, 3, ActivationSpec::tanh(), 9).unwrap();
        let x = Matrix::random_uniform(7, 4, -1.0, 1.0, &mut rng);
        let t = forward(&model, &x).unwrap();
        for s in 0..7 {
            let mut h: Vec<f64> = x.row(s).to_vec();
            for w in model.hidden_weights() {
                h = (0..w.rows())
                    .map(|i| model.activation().eval((0..w.cols()).map(|j| w.get(i, j) * h[j]).sum::<f64>()))
                    .collect();
            }
            let v = model.output_weights();
            for k in 0..3 {
                let f: f64 = (0..v.cols()).map(|j| v.get(k, j) * h[j]).sum();
                let got = t.outputs.get(s, k);
                assert!((got - f).abs() <= 1e-12 * f.abs().max(1e-12), "{got} vs {f}");
            }
        }
    }

    #[test]
    fn forward_rejects_wrong_input_dim() {
        let model = init_model::<f64>(&[3], 2, 1, ActivationSpec::relu(), 0).unwrap();
        assert!(forward(&model, &Matrix::zeros(1, 3)).is_err());
    }

    #[test]
    fn perfect_fit_has_zero_gradient() {
        let model = init_model::<f64>(&[4], 3, 2, ActivationSpec::sigmoid(), 2).unwrap();
        let x = Matrix::random_uniform(5, 3, -1.0, 1.0, &mut Rng::new(1));
        let t = forward(&model, &x).unwrap();
        let g = backward(&model, &t, &t.outputs.clone(), LossKind::Mse).unwrap();
        for w in &g.weights {
            assert!(w.as_slice().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn biases_receive_gradients() {
        let model = init_model::<f64>(&[3], 2, 1, ActivationSpec::sigmoid(), 2).unwrap().with_biases();
        let x = Matrix::random_uniform(4, 2, -1.0, 1.0, &mut Rng::new(1));
        let y = Matrix::filled(4, 1, 1.0);
        let t = forward(&model, &x).unwrap();
        let g = backward(&model, &t, &y, LossKind::Mse).unwrap();
        let bg = g.biases.unwrap();
        // Output bias gradient of the mean MSE is the mean residual.
        let mean_res = (0..4).map(|i| t.outputs.get(i, 0) - 1.0).sum::<f64>() / 4.0;
        assert!((bg[1][0] - mean_res).abs() < 1e-14);
        let base = loss_value(LossKind::Mse, &t.outputs, &y).unwrap();
        assert!(base.is_finite());
    }
}
