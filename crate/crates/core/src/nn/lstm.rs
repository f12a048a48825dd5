use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{matvec_add, matvec_t_add, outer_add, sigmoid, uniform_vec, Parameters};
use crate::error::{Error, Result};

/// Single LSTM cell with gate blocks ordered input, forget, cell, output.
///
/// `w_x` is `4H × inputs`, `w_h` is `4H × H`, both row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lstm {
    pub inputs: usize,
    pub hidden: usize,
    pub w_x: Vec<f64>,
    pub w_h: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            h: vec![0.0; hidden],
            c: vec![0.0; hidden],
        }
    }
}

/// Everything the backward pass needs from one forward step.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmStep {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    /// Activated gates `[i, f, g, o]`.
    pub gates: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub h: Vec<f64>,
}

impl LstmStep {
    pub fn state(&self) -> LstmState {
        LstmState {
            h: self.h.clone(),
            c: self.c.clone(),
        }
    }
}

impl Lstm {
    /// Uniform `±1/√H` weights with the forget-gate bias set to one.
    pub fn new<R: Rng + ?Sized>(inputs: usize, hidden: usize, rng: &mut R) -> Self {
        let k = 1.0 / (hidden as f64).sqrt();
        let mut bias = uniform_vec(rng, 4 * hidden, k);
        bias[hidden..2 * hidden].fill(1.0);
        Self {
            inputs,
            hidden,
            w_x: uniform_vec(rng, 4 * hidden * inputs, k),
            w_h: uniform_vec(rng, 4 * hidden * hidden, k),
            bias,
        }
    }

    pub fn zero_state(&self) -> LstmState {
        LstmState::zeros(self.hidden)
    }

    pub fn step(&self, x: &[f64], state: &LstmState) -> Result<LstmStep> {
        if x.len() != self.inputs {
            return Err(Error::shape("lstm input", self.inputs, x.len()));
        }
        if state.h.len() != self.hidden || state.c.len() != self.hidden {
            return Err(Error::shape("lstm state", self.hidden, state.h.len()));
        }
        Ok(self.step_unchecked(x, state))
    }

    pub(crate) fn step_unchecked(&self, x: &[f64], state: &LstmState) -> LstmStep {
        let h = self.hidden;
        let mut z = self.bias.clone();
        matvec_add(&self.w_x, x, &mut z);
        matvec_add(&self.w_h, &state.h, &mut z);
        for (k, v) in z.iter_mut().enumerate() {
            *v = if (2 * h..3 * h).contains(&k) { v.tanh() } else { sigmoid(*v) };
        }
        let mut c = vec![0.0; h];
        let mut tanh_c = vec![0.0; h];
        let mut h_new = vec![0.0; h];
        for j in 0..h {
            c[j] = z[h + j] * state.c[j] + z[j] * z[2 * h + j];
            tanh_c[j] = c[j].tanh();
            h_new[j] = z[3 * h + j] * tanh_c[j];
        }
        LstmStep {
            x: x.to_vec(),
            h_prev: state.h.clone(),
            c_prev: state.c.clone(),
            gates: z,
            c,
            tanh_c,
            h: h_new,
        }
    }

    /// Runs a whole sequence from `init`, returning one cache per step.
    pub fn forward_sequence(&self, xs: &[Vec<f64>], init: &LstmState) -> Result<Vec<LstmStep>> {
        let mut state = init.clone();
        let mut steps = Vec::with_capacity(xs.len());
        for x in xs {
            let s = self.step(x, &state)?;
            state = s.state();
            steps.push(s);
        }
        Ok(steps)
    }

    /// Backpropagation through time.
    ///
    /// `dh[t]` is the external gradient on the hidden output of step `t`.
    /// Parameter gradients accumulate into `grad`; the returned vector holds
    /// the gradient with respect to every step's input.
    pub fn backward_sequence(&self, steps: &[LstmStep], dh: &[Vec<f64>], grad: &mut Lstm) -> Result<Vec<Vec<f64>>> {
        if steps.is_empty() {
            return Err(Error::MissingTrace("lstm backward called without a forward trace".into()));
        }
        if dh.len() != steps.len() {
            return Err(Error::shape("lstm output gradients", steps.len(), dh.len()));
        }
        let h = self.hidden;
        let mut dh_next = vec![0.0; h];
        let mut dc_next = vec![0.0; h];
        let mut dxs = vec![Vec::new(); steps.len()];
        for t in (0..steps.len()).rev() {
            if dh[t].len() != h {
                return Err(Error::shape("lstm output gradient", h, dh[t].len()));
            }
            dh_next.iter_mut().zip(&dh[t]).for_each(|(a, b)| *a += b);
            let (dx, dh_prev) = self.backward_step(&steps[t], &dh_next, &mut dc_next, grad);
            dxs[t] = dx;
            dh_next = dh_prev;
        }
        Ok(dxs)
    }

    /// Backward through one step. `dh` is the total gradient on this step's
    /// hidden output and `dc` the gradient on its cell state, replaced by the
    /// gradient on the previous cell state. Returns `(dx, dh_prev)`.
    pub fn backward_step(&self, s: &LstmStep, dh: &[f64], dc: &mut [f64], grad: &mut Lstm) -> (Vec<f64>, Vec<f64>) {
        let h = self.hidden;
        let g = &s.gates;
        let mut dz = vec![0.0; 4 * h];
        for j in 0..h {
            let (i, f, gg, o) = (g[j], g[h + j], g[2 * h + j], g[3 * h + j]);
            let dc_j = dc[j] + dh[j] * o * (1.0 - s.tanh_c[j] * s.tanh_c[j]);
            dz[j] = dc_j * gg * i * (1.0 - i);
            dz[h + j] = dc_j * s.c_prev[j] * f * (1.0 - f);
            dz[2 * h + j] = dc_j * i * (1.0 - gg * gg);
            dz[3 * h + j] = dh[j] * s.tanh_c[j] * o * (1.0 - o);
            dc[j] = dc_j * f;
        }
        for (b, d) in grad.bias.iter_mut().zip(&dz) {
            *b += d;
        }
        outer_add(&mut grad.w_x, &dz, &s.x);
        outer_add(&mut grad.w_h, &dz, &s.h_prev);
        let mut dx = vec![0.0; self.inputs];
        matvec_t_add(&self.w_x, &dz, &mut dx);
        let mut dh_prev = vec![0.0; h];
        matvec_t_add(&self.w_h, &dz, &mut dh_prev);
        (dx, dh_prev)
    }

    /// Hidden output only, without keeping caches.
    pub fn advance(&self, x: &[f64], state: &mut LstmState) -> Result<()> {
        let s = self.step(x, state)?;
        state.h = s.h;
        state.c = s.c;
        Ok(())
    }
}

impl Parameters for Lstm {
    fn visit(&self, f: &mut dyn FnMut(&str, &[usize], &[f64])) {
        f("w_x", &[4 * self.hidden, self.inputs], &self.w_x);
        f("w_h", &[4 * self.hidden, self.hidden], &self.w_h);
        f("bias", &[4 * self.hidden], &self.bias);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &[usize], &mut [f64])) {
        f("w_x", &[4 * self.hidden, self.inputs], &mut self.w_x);
        f("w_h", &[4 * self.hidden, self.hidden], &mut self.w_h);
        f("bias", &[4 * self.hidden], &mut self.bias);
    }
}
