use serde::{Deserialize, Serialize};

use super::{gemm, Matrix, RngStream};
use crate::error::{DcmaError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the activated value.
    #[inline]
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
        }
    }
}

/// Affine layer `x · weight + bias`, with `weight` stored as `in_dim x out_dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn new(weight: Matrix, bias: Vec<f64>) -> Result<Self> {
        if bias.len() != weight.cols() {
            return Err(DcmaError::shape(format!(
                "bias has {} entries but weight has {} output columns",
                bias.len(),
                weight.cols()
            )));
        }
        Ok(Layer { weight, bias })
    }

    pub fn in_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.cols()
    }
}

/// Parameters of a fully connected network. Hidden layers use `hidden`; the
/// last layer is linear unless `output` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    layers: Vec<Layer>,
    hidden: Activation,
    output: Option<Activation>,
}

impl MlpParams {
    pub fn new(layers: Vec<Layer>, hidden: Activation, output: Option<Activation>) -> Result<Self> {
        if layers.is_empty() {
            return Err(DcmaError::shape("network needs at least one layer"));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(DcmaError::shape(format!(
                    "layer {i} emits {} features but layer {} expects {}",
                    pair[0].out_dim(),
                    i + 1,
                    pair[1].in_dim()
                )));
            }
        }
        let params = MlpParams {
            layers,
            hidden,
            output,
        };
        if let Some(name) = params.first_non_finite() {
            return Err(DcmaError::arg(format!("non-finite parameter {name}")));
        }
        Ok(params)
    }

    /// Random initialization for layer widths `sizes` (input first, output last).
    /// He-uniform for relu, Glorot-uniform for tanh, zero biases.
    pub fn init(
        sizes: &[usize],
        hidden: Activation,
        output: Option<Activation>,
        stream: &mut RngStream,
    ) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(DcmaError::shape("need at least input and output widths"));
        }
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = match hidden {
                    Activation::Relu => (6.0 / fan_in.max(1) as f64).sqrt(),
                    Activation::Tanh => (6.0 / (fan_in + fan_out).max(1) as f64).sqrt(),
                };
                let data = (0..fan_in * fan_out)
                    .map(|_| (2.0 * stream.uniform() - 1.0) * limit)
                    .collect();
                Layer {
                    weight: Matrix::from_vec(fan_in, fan_out, data).expect("sized"),
                    bias: vec![0.0; fan_out],
                }
            })
            .collect();
        Ok(MlpParams {
            layers,
            hidden,
            output,
        })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden
    }

    pub fn output_activation(&self) -> Option<Activation> {
        self.output
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn n_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.as_slice().len() + l.bias.len())
            .sum()
    }

    fn activation_of(&self, layer: usize) -> Option<Activation> {
        if layer + 1 == self.layers.len() {
            self.output
        } else {
            Some(self.hidden)
        }
    }

    /// Parameter tensors in canonical order: weight then bias, layer by layer.
    pub fn tensors(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weight.as_slice(), l.bias.as_slice()])
            .collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weight.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }

    /// Human-readable path of the tensor at canonical position `t`.
    pub fn tensor_name(t: usize) -> String {
        let kind = if t.is_multiple_of(2) { "weight" } else { "bias" };
        format!("layers[{}].{kind}", t / 2)
    }

    fn first_non_finite(&self) -> Option<String> {
        self.tensors().iter().enumerate().find_map(|(t, xs)| {
            xs.iter()
                .position(|v| !v.is_finite())
                .map(|k| format!("{}[{k}]", Self::tensor_name(t)))
        })
    }
}

/// Gradient with the same layout as [`MlpParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    pub layers: Vec<Layer>,
}

impl MlpGrads {
    pub fn zeros_like(params: &MlpParams) -> Self {
        MlpGrads {
            layers: params
                .layers
                .iter()
                .map(|l| Layer {
                    weight: Matrix::zeros(l.in_dim(), l.out_dim()),
                    bias: vec![0.0; l.out_dim()],
                })
                .collect(),
        }
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weight.as_slice(), l.bias.as_slice()])
            .collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weight.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }

    pub fn scale(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            for v in t {
                *v *= factor;
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|&v| v == 0.0))
    }
}

/// Activations retained from a forward pass; `acts[0]` is the input.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    acts: Vec<Matrix>,
}

impl ForwardCache {
    pub fn output(&self) -> &Matrix {
        self.acts.last().expect("cache holds at least the input")
    }
}

fn check_input(params: &MlpParams, input: &Matrix) -> Result<()> {
    if input.cols() != params.in_dim() {
        return Err(DcmaError::shape(format!(
            "layer 0 expects {} input columns, got {}",
            params.in_dim(),
            input.cols()
        )));
    }
    Ok(())
}

fn affine(layer: &Layer, x: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(x.rows(), layer.out_dim());
    for r in 0..out.rows() {
        out.row_mut(r).copy_from_slice(&layer.bias);
    }
    gemm(1.0, x, false, &layer.weight, false, 1.0, &mut out).expect("shapes checked");
    out
}

/// Evaluates the network on every row of `input`.
pub fn mlp_forward(params: &MlpParams, input: &Matrix) -> Result<Matrix> {
    check_input(params, input)?;
    let mut x = affine(&params.layers[0], input);
    if let Some(act) = params.activation_of(0) {
        x.map_inplace(|v| act.apply(v));
    }
    for (l, layer) in params.layers.iter().enumerate().skip(1) {
        x = affine(layer, &x);
        if let Some(act) = params.activation_of(l) {
            x.map_inplace(|v| act.apply(v));
        }
    }
    Ok(x)
}

pub fn mlp_forward_cached(params: &MlpParams, input: &Matrix) -> Result<ForwardCache> {
    check_input(params, input)?;
    let mut acts = Vec::with_capacity(params.layers.len() + 1);
    acts.push(input.clone());
    for (l, layer) in params.layers.iter().enumerate() {
        let mut x = affine(layer, &acts[l]);
        if let Some(act) = params.activation_of(l) {
            x.map_inplace(|v| act.apply(v));
        }
        acts.push(x);
    }
    Ok(ForwardCache { acts })
}

/// Reverse pass over a cached forward pass.
pub fn mlp_backward_cached(
    params: &MlpParams,
    cache: &ForwardCache,
    upstream_grad: &Matrix,
) -> Result<MlpGrads> {
    let out = cache.output();
    if upstream_grad.shape() != out.shape() {
        return Err(DcmaError::shape(format!(
            "upstream gradient is {}x{}, network output is {}x{}",
            upstream_grad.rows(),
            upstream_grad.cols(),
            out.rows(),
            out.cols()
        )));
    }
    let n_layers = params.layers.len();
    let mut grads = MlpGrads::zeros_like(params);
    let mut delta = upstream_grad.clone();
    for l in (0..n_layers).rev() {
        if let Some(act) = params.activation_of(l) {
            let y = cache.acts[l + 1].as_slice();
            for (d, &yv) in delta.as_mut_slice().iter_mut().zip(y) {
                *d *= act.derivative_from_output(yv);
            }
        }
        let g = &mut grads.layers[l];
        gemm(1.0, &cache.acts[l], true, &delta, false, 0.0, &mut g.weight)?;
        for row in delta.iter_rows() {
            for (b, &d) in g.bias.iter_mut().zip(row) {
                *b += d;
            }
        }
        if l > 0 {
            let mut prev = Matrix::zeros(delta.rows(), params.layers[l].in_dim());
            gemm(1.0, &delta, false, &params.layers[l].weight, true, 0.0, &mut prev)?;
            delta = prev;
        }
    }
    Ok(grads)
}

/// Reverse-mode gradient of `sum(upstream_grad ⊙ mlp_forward(params, input))`
/// with respect to every parameter.
pub fn mlp_backward(params: &MlpParams, input: &Matrix, upstream_grad: &Matrix) -> Result<MlpGrads> {
    let cache = mlp_forward_cached(params, input)?;
    mlp_backward_cached(params, &cache, upstream_grad)
}
