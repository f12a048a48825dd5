use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{matvec, matvec_t_add, outer_add, sigmoid, uniform_vec, visit_prefixed, visit_prefixed_mut, Parameters};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
    Sigmoid,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
            Activation::Sigmoid => sigmoid(x),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the activation's output.
    #[inline]
    pub fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Identity => 1.0,
        }
    }
}

/// Affine layer `activation(W x + b)` with row-major `W` of shape `outputs × inputs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Dense {
    /// Glorot-uniform weights, zero bias.
    pub fn new<R: Rng + ?Sized>(inputs: usize, outputs: usize, activation: Activation, rng: &mut R) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        Self {
            inputs,
            outputs,
            weights: uniform_vec(rng, inputs * outputs, limit),
            bias: vec![0.0; outputs],
            activation,
        }
    }

    pub fn zeros(inputs: usize, outputs: usize, activation: Activation) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
            activation,
        }
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.inputs {
            return Err(Error::shape("dense input", self.inputs, x.len()));
        }
        let mut out = vec![0.0; self.outputs];
        self.forward_into(x, &mut out);
        Ok(out)
    }

    /// Unchecked forward; `out.len()` must equal `outputs`.
    pub fn forward_into(&self, x: &[f64], out: &mut [f64]) {
        matvec(&self.weights, x, out);
        for (o, b) in out.iter_mut().zip(&self.bias) {
            *o = self.activation.apply(*o + b);
        }
    }

    /// Accumulates parameter gradients into `grad` given the forward input `x`,
    /// output `y` and output gradient `dy`. Writes the input gradient to `dx`
    /// when provided.
    pub fn backward(&self, x: &[f64], y: &[f64], dy: &[f64], grad: &mut Dense, dx: Option<&mut [f64]>) {
        let dz: Vec<f64> = dy
            .iter()
            .zip(y)
            .map(|(&g, &out)| g * self.activation.derivative_from_output(out))
            .collect();
        self.backward_preactivation(x, &dz, grad, dx);
    }

    pub(crate) fn backward_preactivation(&self, x: &[f64], dz: &[f64], grad: &mut Dense, dx: Option<&mut [f64]>) {
        for (gb, d) in grad.bias.iter_mut().zip(dz) {
            *gb += d;
        }
        outer_add(&mut grad.weights, dz, x);
        if let Some(dx) = dx {
            dx.fill(0.0);
            matvec_t_add(&self.weights, dz, dx);
        }
    }
}

impl Parameters for Dense {
    fn visit(&self, f: &mut dyn FnMut(&str, &[usize], &[f64])) {
        f("weight", &[self.outputs, self.inputs], &self.weights);
        f("bias", &[self.outputs], &self.bias);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &[usize], &mut [f64])) {
        f("weight", &[self.outputs, self.inputs], &mut self.weights);
        f("bias", &[self.outputs], &mut self.bias);
    }
}

/// A stack of dense layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

/// Layer activations of one forward pass; `activations[0]` is the input.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpTrace {
    pub activations: Vec<Vec<f64>>,
}

impl MlpTrace {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("trace holds at least the input")
    }
}

impl Mlp {
    /// `widths[0]` is the input size; one layer per following width. Hidden
    /// layers use `hidden`, the last layer `last`.
    pub fn new<R: Rng + ?Sized>(widths: &[usize], hidden: Activation, last: Activation, rng: &mut R) -> Self {
        let n = widths.len() - 1;
        let layers = (0..n)
            .map(|i| Dense::new(widths[i], widths[i + 1], if i + 1 == n { last } else { hidden }, rng))
            .collect();
        Self { layers }
    }

    pub fn inputs(&self) -> usize {
        self.layers.first().map_or(0, |l| l.inputs)
    }

    pub fn outputs(&self) -> usize {
        self.layers.last().map_or(0, |l| l.outputs)
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_trace(x)?.activations.pop().unwrap())
    }

    pub fn forward_trace(&self, x: &[f64]) -> Result<MlpTrace> {
        if x.len() != self.inputs() {
            return Err(Error::shape("mlp input", self.inputs(), x.len()));
        }
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.to_vec());
        for layer in &self.layers {
            let mut out = vec![0.0; layer.outputs];
            layer.forward_into(activations.last().unwrap(), &mut out);
            activations.push(out);
        }
        Ok(MlpTrace { activations })
    }

    /// Accumulates gradients into `grad`; returns the input gradient.
    pub fn backward(&self, trace: &MlpTrace, dy: &[f64], grad: &mut Mlp) -> Result<Vec<f64>> {
        if trace.activations.len() != self.layers.len() + 1 {
            return Err(Error::MissingTrace("mlp trace does not match layer count".into()));
        }
        if dy.len() != self.outputs() {
            return Err(Error::shape("mlp output gradient", self.outputs(), dy.len()));
        }
        let mut upstream = dy.to_vec();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let mut dx = vec![0.0; layer.inputs];
            layer.backward(
                &trace.activations[i],
                &trace.activations[i + 1],
                &upstream,
                &mut grad.layers[i],
                Some(&mut dx),
            );
            upstream = dx;
        }
        Ok(upstream)
    }
}

impl Parameters for Mlp {
    fn visit(&self, f: &mut dyn FnMut(&str, &[usize], &[f64])) {
        for (i, l) in self.layers.iter().enumerate() {
            visit_prefixed(l, &format!("layer{i}"), f);
        }
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &[usize], &mut [f64])) {
        for (i, l) in self.layers.iter_mut().enumerate() {
            visit_prefixed_mut(l, &format!("layer{i}"), f);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;

    #[test]
    fn identity_layer_passes_input() {
        let mut d = Dense::zeros(3, 3, Activation::Identity);
        for i in 0..3 {
            d.weights[i * 3 + i] = 1.0;
        }
        assert_eq!(d.forward(&[0.5, -2.0, 3.0]).unwrap(), vec![0.5, -2.0, 3.0]);
    }

    #[test]
    fn zero_tanh_layer_outputs_zero() {
        let d = Dense::zeros(4, 2, Activation::Tanh);
        assert_eq!(d.forward(&[1.0, 2.0, 3.0, 4.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let d = Dense::new(4, 2, Activation::Tanh, &mut rng_from(&[1]));
        assert!(matches!(d.forward(&[1.0]), Err(Error::Shape { .. })));
    }

    #[test]
    fn linear_gradient_is_outer_product() {
        let d = Dense::new(3, 2, Activation::Identity, &mut rng_from(&[2]));
        let x = [0.3, -1.0, 2.0];
        let y = d.forward(&x).unwrap();
        let dy = [0.7, -0.2];
        let mut g = d.zeros_like();
        d.backward(&x, &y, &dy, &mut g, None);
        for r in 0..2 {
            for c in 0..3 {
                assert_eq!(g.weights[r * 3 + c], dy[r] * x[c]);
            }
            assert_eq!(g.bias[r], dy[r]);
        }
    }

    #[test]
    fn zero_upstream_gives_zero_gradient() {
        let m = Mlp::new(&[5, 4, 3], Activation::Tanh, Activation::Identity, &mut rng_from(&[3]));
        let trace = m.forward_trace(&[0.1, 0.2, 0.3, 0.4, 0.5]).unwrap();
        let mut g = m.zeros_like();
        let dx = m.backward(&trace, &[0.0; 3], &mut g).unwrap();
        assert!(g.to_flat().iter().all(|&v| v == 0.0));
        assert!(dx.iter().all(|&v| v == 0.0));
    }
}
