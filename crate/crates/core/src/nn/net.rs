use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::adam::AdamState;
use super::rng::Rng;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Identity,
    Sigmoid,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Identity => z,
            Activation::Sigmoid => super::loss::sigmoid(z),
        }
    }

    /// Derivative in terms of the pre-activation; relu uses 0 at the kink.
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
            Activation::Sigmoid => {
                let s = super::loss::sigmoid(z);
                s * (1.0 - s)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// out × in
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
    pub activation: Activation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads {
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
}

/// Per-layer inputs and pre-activations from a batched forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    inputs: Vec<Array2<f64>>,
    pre: Vec<Array2<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "NetSnapshot", try_from = "NetSnapshot")]
pub struct DenseNet {
    pub layers: Vec<Layer>,
}

/// Flat, serializable form of a [`DenseNet`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetSnapshot {
    /// Input width followed by each layer's output width.
    pub dims: Vec<usize>,
    pub activations: Vec<Activation>,
    pub params: Vec<f64>,
}

impl DenseNet {
    /// He-uniform weights (limit sqrt(6 / fan_in)), zero biases.
    pub fn new(dims: &[usize], activations: &[Activation], rng: &mut Rng) -> Result<Self> {
        if dims.len() < 2 || activations.len() != dims.len() - 1 || dims.contains(&0) {
            return Err(Error::Shape(format!(
                "need n+1 positive widths for n activations, got dims {dims:?} and {} activations",
                activations.len()
            )));
        }
        let layers = dims
            .windows(2)
            .zip(activations)
            .map(|(w, &activation)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (6.0 / fan_in as f64).sqrt();
                Layer {
                    weights: Array2::from_shape_simple_fn((fan_out, fan_in), || rng.random_range(-limit..limit)),
                    biases: Array1::zeros(fan_out),
                    activation,
                }
            })
            .collect();
        Ok(DenseNet { layers })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weights.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].weights.nrows()
    }

    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(|l| l.weights.nrows()))
            .collect()
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    fn check_input(&self, x: &ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(Error::Shape(format!(
                "network expects {} inputs, got {}",
                self.input_dim(),
                x.ncols()
            )));
        }
        Ok(())
    }

    /// Batched forward pass; rows are samples.
    pub fn forward(&self, x: ArrayView2<f64>) -> Result<(Array2<f64>, ForwardCache)> {
        self.check_input(&x)?;
        let mut cache = ForwardCache {
            inputs: Vec::with_capacity(self.layers.len()),
            pre: Vec::with_capacity(self.layers.len()),
        };
        let mut h = x.to_owned();
        for layer in &self.layers {
            let z = h.dot(&layer.weights.t()) + &layer.biases;
            let a = z.mapv(|v| layer.activation.apply(v));
            cache.inputs.push(h);
            cache.pre.push(z);
            h = a;
        }
        Ok((h, cache))
    }

    /// Forward pass without keeping intermediates.
    pub fn infer(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(&x)?;
        let mut h = x.to_owned();
        for layer in &self.layers {
            let mut z = h.dot(&layer.weights.t()) + &layer.biases;
            z.mapv_inplace(|v| layer.activation.apply(v));
            h = z;
        }
        Ok(h)
    }

    pub fn infer_one(&self, x: &[f64]) -> Result<Vec<f64>> {
        let view = ArrayView2::from_shape((1, x.len()), x).map_err(|e| Error::Shape(e.to_string()))?;
        Ok(self.infer(view)?.into_raw_vec_and_offset().0)
    }

    /// Gradients of a scalar objective given d objective / d output (summed over rows).
    pub fn backward(&self, cache: &ForwardCache, output_grad: ArrayView2<f64>) -> Result<(Array2<f64>, Vec<LayerGrads>)> {
        let last = cache.pre.last().ok_or_else(|| Error::Shape("empty forward cache".into()))?;
        if output_grad.dim() != last.dim() {
            return Err(Error::Shape(format!(
                "output gradient shape {:?} differs from output shape {:?}",
                output_grad.dim(),
                last.dim()
            )));
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut g = output_grad.to_owned();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let act = layer.activation;
            let dz = if act == Activation::Identity {
                g
            } else {
                let mut d = cache.pre[i].mapv(|z| act.derivative(z));
                d *= &g;
                d
            };
            grads.push(LayerGrads {
                weights: dz.t().dot(&cache.inputs[i]),
                biases: dz.sum_axis(Axis(0)),
            });
            g = dz.dot(&layer.weights);
        }
        grads.reverse();
        Ok((g, grads))
    }

    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            out.extend(l.weights.iter());
            out.extend(l.biases.iter());
        }
        out
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.n_params() {
            return Err(Error::Shape(format!(
                "expected {} parameters, got {}",
                self.n_params(),
                params.len()
            )));
        }
        let mut rest = params;
        for l in &mut self.layers {
            let (w, tail) = rest.split_at(l.weights.len());
            let (b, tail) = tail.split_at(l.biases.len());
            l.weights.iter_mut().zip(w).for_each(|(a, v)| *a = *v);
            l.biases.iter_mut().zip(b).for_each(|(a, v)| *a = *v);
            rest = tail;
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.biases.iter()).all(|w| w.is_finite()))
    }

    /// Applies one Adam step with gradients in layer order.
    pub fn adam_step(&mut self, grads: &[LayerGrads], state: &mut AdamState) -> Result<()> {
        let flat = flatten_grads(grads);
        let mut p = self.params();
        state.step(&mut p, &flat)?;
        self.set_params(&p)
    }
}

pub fn flatten_grads(grads: &[LayerGrads]) -> Vec<f64> {
    let mut out = Vec::new();
    for g in grads {
        out.extend(g.weights.iter());
        out.extend(g.biases.iter());
    }
    out
}

impl From<DenseNet> for NetSnapshot {
    fn from(net: DenseNet) -> Self {
        NetSnapshot {
            dims: net.dims(),
            activations: net.layers.iter().map(|l| l.activation).collect(),
            params: net.params(),
        }
    }
}

impl TryFrom<NetSnapshot> for DenseNet {
    type Error = Error;

    fn try_from(s: NetSnapshot) -> Result<Self> {
        if s.dims.len() < 2 || s.activations.len() != s.dims.len() - 1 {
            return Err(Error::Shape(format!("snapshot dims {:?} do not match activations", s.dims)));
        }
        let layers = s
            .dims
            .windows(2)
            .zip(&s.activations)
            .map(|(w, &activation)| Layer {
                weights: Array2::zeros((w[1], w[0])),
                biases: Array1::zeros(w[1]),
                activation,
            })
            .collect();
        let mut net = DenseNet { layers };
        net.set_params(&s.params)?;
        if !net.is_finite() {
            return Err(Error::InvalidInput("snapshot has non-finite parameters".into()));
        }
        Ok(net)
    }
}


#[cfg(test)]
mod tests {
    use super::super::{grad_check, seeded};
    use super::*;
    use ndarray::{array, Array2};

    fn sum_of_squares_grad(net: &DenseNet, x: &Array2<f64>) -> (f64, Vec<f64>) {
        let (y, cache) = net.forward(x.view()).unwrap();
        let l = y.iter().map(|v| 0.5 * v * v).sum();
        let (_, g) = net.backward(&cache, y.view()).unwrap();
        (l, flatten_grads(&g))
    }

    #[test]
    fn identity_layer_passes_input() {
        let mut net = DenseNet::new(&[3, 3], &[Activation::Identity], &mut seeded(0)).unwrap();
        net.layers[0].weights = Array2::eye(3);
        let x = array![[1.0, -2.0, 0.5]];
        assert_eq!(net.infer(x.view()).unwrap(), x);
    }

    #[test]
    fn relu_blocks_negative_units() {
        let mut net = DenseNet::new(&[1, 1], &[Activation::Relu], &mut seeded(0)).unwrap();
        net.layers[0].weights = array![[1.0]];
        let x = array![[-3.0]];
        let (y, cache) = net.forward(x.view()).unwrap();
        assert_eq!(y[[0, 0]], 0.0);
        let (gx, g) = net.backward(&cache, array![[1.0]].view()).unwrap();
        assert_eq!(gx[[0, 0]], 0.0);
        assert_eq!(g[0].weights[[0, 0]], 0.0);
    }

    #[test]
    fn small_net_gradients_match_finite_differences() {
        let mut rng = seeded(3);
        let net = DenseNet::new(&[5, 4, 3], &[Activation::Relu, Activation::Sigmoid], &mut rng).unwrap();
        let x = Array2::from_shape_simple_fn((6, 5), || rng.random_range(-2.0..2.0));
        let analytic = sum_of_squares_grad(&net, &x).1;
        let err = grad_check(
            |p| {
                let mut n = net.clone();
                n.set_params(p).unwrap();
                sum_of_squares_grad(&n, &x).0
            },
            &analytic,
            &net.params(),
            1e-5,
        );
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn shape_errors() {
        let net = DenseNet::new(&[2, 1], &[Activation::Identity], &mut seeded(0)).unwrap();
        assert!(net.infer(array![[1.0, 2.0, 3.0]].view()).is_err());
        assert!(DenseNet::new(&[2], &[], &mut seeded(0)).is_err());
        assert!(DenseNet::new(&[2, 3], &[], &mut seeded(0)).is_err());
    }

    #[test]
    fn snapshot_round_trip() {
        let net = DenseNet::new(&[4, 3, 2], &[Activation::Relu, Activation::Identity], &mut seeded(11)).unwrap();
        let json = serde_json::to_string(&net).unwrap();
        let back: DenseNet = serde_json::from_str(&json).unwrap();
        assert_eq!(net, back);
    }
}
