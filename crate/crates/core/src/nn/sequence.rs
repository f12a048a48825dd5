use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{visit_prefixed, visit_prefixed_mut, Activation, Dense, Lstm, LstmStep, Mlp, MlpTrace, Parameters};
use crate::error::{Error, Result};

/// Per-step MLP, then stacked LSTM cells, then a linear head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceModel {
    pub encoder: Mlp,
    pub cells: Vec<Lstm>,
    pub head: Dense,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceTrace {
    pub encoder: Vec<MlpTrace>,
    pub cells: Vec<Vec<LstmStep>>,
    pub outputs: Vec<Vec<f64>>,
}

impl SequenceModel {
    /// `encoder_widths[0]` is the input size.
    pub fn new<R: Rng + ?Sized>(
        encoder_widths: &[usize],
        hidden: usize,
        cells: usize,
        outputs: usize,
        rng: &mut R,
    ) -> Self {
        let encoder = Mlp::new(encoder_widths, Activation::Tanh, Activation::Tanh, rng);
        let mut inputs = encoder.outputs();
        let cells = (0..cells)
            .map(|_| {
                let c = Lstm::new(inputs, hidden, rng);
                inputs = hidden;
                c
            })
            .collect();
        let head = Dense::new(inputs, outputs, Activation::Identity, rng);
        Self { encoder, cells, head }
    }

    pub fn forward_trace(&self, xs: &[Vec<f64>]) -> Result<SequenceTrace> {
        let encoder = xs.iter().map(|x| self.encoder.forward_trace(x)).collect::<Result<Vec<_>>>()?;
        let mut layer_in: Vec<Vec<f64>> = encoder.iter().map(|t| t.output().to_vec()).collect();
        let mut cells = Vec::with_capacity(self.cells.len());
        for cell in &self.cells {
            let steps = cell.forward_sequence(&layer_in, &cell.zero_state())?;
            layer_in = steps.iter().map(|s| s.h.clone()).collect();
            cells.push(steps);
        }
        let outputs = layer_in.iter().map(|h| self.head.forward(h)).collect::<Result<Vec<_>>>()?;
        Ok(SequenceTrace { encoder, cells, outputs })
    }

    /// Accumulates gradients of a loss with output gradients `douts` into `grad`
    /// and returns the per-step input gradients.
    pub fn backward(&self, trace: &SequenceTrace, douts: &[Vec<f64>], grad: &mut SequenceModel) -> Result<Vec<Vec<f64>>> {
        if trace.outputs.is_empty() || trace.cells.len() != self.cells.len() {
            return Err(Error::MissingTrace("sequence model trace is empty or incomplete".into()));
        }
        if douts.len() != trace.outputs.len() {
            return Err(Error::shape("sequence output gradients", trace.outputs.len(), douts.len()));
        }
        let last_h = |t: usize| -> &[f64] {
            match trace.cells.last() {
                Some(steps) => &steps[t].h,
                None => trace.encoder[t].output(),
            }
        };
        let mut upstream = Vec::with_capacity(douts.len());
        for (t, dy) in douts.iter().enumerate() {
            let mut dh = vec![0.0; self.head.inputs];
            self.head.backward(last_h(t), &trace.outputs[t], dy, &mut grad.head, Some(&mut dh));
            upstream.push(dh);
        }
        for (k, cell) in self.cells.iter().enumerate().rev() {
            upstream = cell.backward_sequence(&trace.cells[k], &upstream, &mut grad.cells[k])?;
        }
        trace
            .encoder
            .iter()
            .zip(&upstream)
            .map(|(tr, d)| self.encoder.backward(tr, d, &mut grad.encoder))
            .collect()
    }
}

impl Parameters for SequenceModel {
    fn visit(&self, f: &mut dyn FnMut(&str, &[usize], &[f64])) {
        visit_prefixed(&self.encoder, "encoder", f);
        visit_prefixed(&self.cells, "cells", f);
        visit_prefixed(&self.head, "head", f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &[usize], &mut [f64])) {
        visit_prefixed_mut(&mut self.encoder, "encoder", f);
        visit_prefixed_mut(&mut self.cells, "cells", f);
        visit_prefixed_mut(&mut self.head, "head", f);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::{check_gradients, STEP};
    use crate::rng::rng_from;
    use rand::Rng;

    #[test]
    fn bptt_matches_finite_differences() {
        let mut rng = rng_from(&[11]);
        let model = SequenceModel::new(&[5, 8, 8, 6], 7, 2, 4, &mut rng);
        let xs: Vec<Vec<f64>> = (0..20).map(|_| (0..5).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let proj: Vec<Vec<f64>> = (0..20).map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let loss = |m: &SequenceModel| -> f64 {
            let tr = m.forward_trace(&xs).unwrap();
            tr.outputs.iter().zip(&proj).map(|(y, w)| y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>()).sum()
        };
        let trace = model.forward_trace(&xs).unwrap();
        let mut grad = model.zeros_like();
        model.backward(&trace, &proj, &mut grad).unwrap();
        let report = check_gradients(&model, &grad, loss, STEP, 1);
        assert!(report.passes(1e-4), "{report:?}");
    }
}
