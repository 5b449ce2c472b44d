//! Fully connected perceptrons with hand-written backpropagation.
//!
//! A layer computes `y = act(x · W + b)` with `W` stored as an
//! `(in_dim × out_dim)` matrix so batches stay row-major end to end.

use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::{Matrix, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    fn apply<T: Scalar>(self, v: T) -> T {
        match self {
            Activation::Identity => v,
            // Written as a comparison so NaN propagates instead of becoming 0.
            Activation::Relu => {
                if v < T::zero() {
                    T::zero()
                } else {
                    v
                }
            }
            Activation::Tanh => v.tanh(),
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `y`.
    #[inline]
    fn derivative<T: Scalar>(self, z: T, y: T) -> T {
        match self {
            Activation::Identity => T::one(),
            Activation::Relu => {
                if z > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Tanh => T::one() - y * y,
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Activation::Identity => 0,
            Activation::Relu => 1,
            Activation::Tanh => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Activation::Identity),
            1 => Some(Activation::Relu),
            2 => Some(Activation::Tanh),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer<T = f32> {
    pub weight: Matrix<T>,
    pub bias: Vec<T>,
    pub activation: Activation,
}

impl<T: Scalar> DenseLayer<T> {
    pub fn new(weight: Matrix<T>, bias: Vec<T>, activation: Activation) -> Result<Self> {
        if bias.len() != weight.cols() {
            return Err(Error::shape(format!(
                "bias of length {} for a layer with {} outputs",
                bias.len(),
                weight.cols()
            )));
        }
        Ok(Self {
            weight,
            bias,
            activation,
        })
    }

    /// Uniform init in `[-1/√fan_in, 1/√fan_in]` for weights and biases.
    pub fn init<R: Rng + ?Sized>(
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let bound = 1.0 / (in_dim.max(1) as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
        let weight: Vec<T> = (0..in_dim * out_dim)
            .map(|_| T::from_f64(dist.sample(rng)))
            .collect();
        let bias = (0..out_dim)
            .map(|_| T::from_f64(dist.sample(rng)))
            .collect();
        Self {
            weight: Matrix::from_vec(in_dim, out_dim, weight).expect("sized above"),
            bias,
            activation,
        }
    }

    #[inline]
    pub fn in_dim(&self) -> usize {
        self.weight.rows()
    }

    #[inline]
    pub fn out_dim(&self) -> usize {
        self.weight.cols()
    }
}

/// A feed-forward network of dense layers.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpNet<T = f32> {
    layers: Vec<DenseLayer<T>>,
}

/// Activations recorded during [`MlpNet::forward`].
#[derive(Debug, Clone)]
pub struct MlpCache<T = f32> {
    input: Matrix<T>,
    pre: Vec<Matrix<T>>,
    post: Vec<Matrix<T>>,
}

impl<T: Scalar> MlpCache<T> {
    pub fn input(&self) -> &Matrix<T> {
        &self.input
    }
}

/// Per-layer parameter gradients, shaped like the network.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads<T = f32> {
    pub layers: Vec<(Matrix<T>, Vec<T>)>,
}

impl<T: Scalar> MlpGrads<T> {
    pub fn zeros_like(net: &MlpNet<T>) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| {
                    (
                        Matrix::zeros(l.in_dim(), l.out_dim()),
                        vec![T::zero(); l.out_dim()],
                    )
                })
                .collect(),
        }
    }

    pub fn accumulate(&mut self, other: &MlpGrads<T>) -> Result<()> {
        if self.layers.len() != other.layers.len() {
            return Err(Error::shape("gradient layer counts differ"));
        }
        for ((w, b), (ow, ob)) in self.layers.iter_mut().zip(&other.layers) {
            w.add_assign(ow)?;
            if b.len() != ob.len() {
                return Err(Error::shape("bias gradient lengths differ"));
            }
            for (x, &y) in b.iter_mut().zip(ob) {
                *x = *x + y;
            }
        }
        Ok(())
    }

    /// Flattened in the same order as [`MlpNet::write_params`].
    pub fn write_flat(&self, out: &mut Vec<T>) {
        for (w, b) in &self.layers {
            out.extend_from_slice(w.as_slice());
            out.extend_from_slice(b);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.layers.iter().all(|(w, b)| {
            w.as_slice().iter().all(|v| *v == T::zero()) && b.iter().all(|v| *v == T::zero())
        })
    }
}

impl<T: Scalar> MlpNet<T> {
    pub fn new(layers: Vec<DenseLayer<T>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Usage("a network needs at least one layer".into()));
        }
        for (k, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::shape(format!(
                    "layer {k} emits {} features but layer {} expects {}",
                    pair[0].out_dim(),
                    k + 1,
                    pair[1].in_dim()
                )));
            }
        }
        Ok(Self { layers })
    }

    /// Two affine layers: `in → hidden` with `hidden_act`, `hidden → out` with `output_act`.
    pub fn two_layer<R: Rng + ?Sized>(
        in_dim: usize,
        hidden: usize,
        out_dim: usize,
        hidden_act: Activation,
        output_act: Activation,
        rng: &mut R,
    ) -> Self {
        Self {
            layers: vec![
                DenseLayer::init(in_dim, hidden, hidden_act, rng),
                DenseLayer::init(hidden, out_dim, output_act, rng),
            ],
        }
    }

    pub fn layers(&self) -> &[DenseLayer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer<T>] {
        &mut self.layers
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.as_slice().len() + l.bias.len())
            .sum()
    }

    pub fn write_params(&self, out: &mut Vec<T>) {
        for l in &self.layers {
            out.extend_from_slice(l.weight.as_slice());
            out.extend_from_slice(&l.bias);
        }
    }

    /// Overwrites all parameters from `src`, returning how many values were consumed.
    pub fn read_params(&mut self, src: &[T]) -> Result<usize> {
        let needed = self.param_count();
        if src.len() < needed {
            return Err(Error::shape(format!(
                "need {needed} parameters, got {}",
                src.len()
            )));
        }
        let mut at = 0;
        for l in &mut self.layers {
            let n = l.weight.as_slice().len();
            l.weight.as_mut_slice().copy_from_slice(&src[at..at + n]);
            at += n;
            let n = l.bias.len();
            l.bias.copy_from_slice(&src[at..at + n]);
            at += n;
        }
        Ok(at)
    }

    pub fn cast<U: Scalar>(&self) -> MlpNet<U> {
        MlpNet {
            layers: self
                .layers
                .iter()
                .map(|l| DenseLayer {
                    weight: l.weight.cast(),
                    bias: l.bias.iter().map(|&v| U::from_f64(v.to_f64())).collect(),
                    activation: l.activation,
                })
                .collect(),
        }
    }

    pub fn forward(&self, batch: &Matrix<T>) -> Result<(Matrix<T>, MlpCache<T>)> {
        if batch.cols() != self.in_dim() {
            return Err(Error::shape(format!(
                "batch has {} features, network expects {}",
                batch.cols(),
                self.in_dim()
            )));
        }
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut post = Vec::with_capacity(self.layers.len());
        let mut current = batch.clone();
        for layer in &self.layers {
            let mut z = current.matmul(&layer.weight)?;
            z.add_row_vector(&layer.bias)?;
            let act = layer.activation;
            let y = z.map(|v| act.apply(v));
            pre.push(z);
            post.push(y.clone());
            current = y;
        }
        Ok((
            current,
            MlpCache {
                input: batch.clone(),
                pre,
                post,
            },
        ))
    }

    /// Output only; skips recording the cache.
    pub fn predict(&self, batch: &Matrix<T>) -> Result<Matrix<T>> {
        if batch.cols() != self.in_dim() {
            return Err(Error::shape(format!(
                "batch has {} features, network expects {}",
                batch.cols(),
                self.in_dim()
            )));
        }
        let mut current = batch.clone();
        for layer in &self.layers {
            let mut z = current.matmul(&layer.weight)?;
            z.add_row_vector(&layer.bias)?;
            let act = layer.activation;
            current = z.map(|v| act.apply(v));
        }
        Ok(current)
    }

    pub fn backward(
        &self,
        cache: &MlpCache<T>,
        grad_output: &Matrix<T>,
    ) -> Result<(MlpGrads<T>, Matrix<T>)> {
        if cache.pre.len() != self.layers.len()
            || cache.input.cols() != self.in_dim()
            || cache
                .pre
                .iter()
                .zip(&self.layers)
                .any(|(z, l)| z.cols() != l.out_dim() || z.rows() != cache.input.rows())
        {
            return Err(Error::shape(
                "activation cache does not belong to this network",
            ));
        }
        let out_shape = (cache.input.rows(), self.out_dim());
        if grad_output.shape() != out_shape {
            return Err(Error::shape(format!(
                "output gradient is {}x{}, forward output was {}x{}",
                grad_output.rows(),
                grad_output.cols(),
                out_shape.0,
                out_shape.1
            )));
        }

        let mut grads = Vec::with_capacity(self.layers.len());
        let mut upstream = grad_output.clone();
        for k in (0..self.layers.len()).rev() {
            let layer = &self.layers[k];
            let act = layer.activation;
            let mut delta = upstream;
            delta.ensure_same_shape(&cache.pre[k], "backward")?;
            let z = cache.pre[k].as_slice();
            let y = cache.post[k].as_slice();
            for (i, v) in delta.as_mut_slice().iter_mut().enumerate() {
                *v = *v * act.derivative(z[i], y[i]);
            }
            let layer_input = if k == 0 {
                &cache.input
            } else {
                &cache.post[k - 1]
            };
            let grad_w = layer_input.t_matmul(&delta)?;
            let grad_b = delta.sum_rows();
            upstream = delta.matmul_t(&layer.weight)?;
            grads.push((grad_w, grad_b));
        }
        grads.reverse();
        Ok((MlpGrads { layers: grads }, upstream))
    }
}
