//! Teacher and student policies with the attention-gated belief encoder.
//!
//! Student data flow per step, for proprioception `o_p` and noisy foot samples
//! `n_l`, `n_r`:
//!
//! ```text
//! l   = [f_e(n_l), f_e(n_r)]            shared-weight per-foot encoder
//! α   = σ(W_g l + b_g)                   attention gate
//! g   = α ⊙ l
//! h_b = LSTM_b([g, o_p])                 belief recurrence
//! b   = tanh(W_f [h_b, g] + b_f)         belief vector
//! r   = f_d(h_b)                         reconstruction of both clean samples
//! a   = head(LSTM_2(LSTM_1([o_p, b])))   action
//! ```
//!
//! The gate may instead read `h_b(t-1)`, alone or with `l`, through a small
//! MLP, and the decoder may also read `g`; see [`ArchConfig`].
//!
//! The teacher runs the same encoder on clean samples and feeds `[o_p, l]`
//! straight into an identical trunk.

mod train;

pub use train::{
    evaluate, train_student, train_student_from, Dataset, EpochMetrics, EvalMetrics, StudentTrainConfig, TrainOutcome,
};

use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{
    visit_prefixed, visit_prefixed_mut, Activation, Dense, Lstm, LstmState, LstmStep, Mlp, MlpTrace, Parameters,
};
use crate::rng::rng_from;
use crate::state::{ActionVector, ACTION_DIM, PROPRIO_DIM};

/// What the attention gate reads at step `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateInput {
    /// The current extero latent only.
    #[default]
    Latent,
    /// The latent and the belief hidden state of step `t - 1`.
    LatentAndMemory,
    /// The belief hidden state of step `t - 1` only.
    Memory,
}

/// Layer sizes shared by teacher and student.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchConfig {
    pub pattern_points: usize,
    /// Per-foot encoder widths; the last entry is the per-foot latent size.
    pub encoder_widths: Vec<usize>,
    pub belief_hidden: usize,
    pub belief_dim: usize,
    /// Hidden widths of the decoder; its output is always `2 × pattern_points`.
    pub decoder_widths: Vec<usize>,
    pub trunk_hidden: usize,
    pub trunk_layers: usize,
    #[serde(default)]
    pub gate_input: GateInput,
    /// Hidden widths of the gate head; empty means one dense layer.
    #[serde(default)]
    pub gate_widths: Vec<usize>,
    /// Also feed the gated latent to the decoder.
    #[serde(default)]
    pub decoder_skip: bool,
}

impl ArchConfig {
    pub fn paper() -> Self {
        Self {
            pattern_points: crate::extero::FULL_PATTERN_POINTS,
            encoder_widths: vec![256, 160, 96],
            belief_hidden: 256,
            belief_dim: 192,
            decoder_widths: vec![256],
            trunk_hidden: 256,
            trunk_layers: 2,
            gate_input: GateInput::Latent,
            gate_widths: Vec::new(),
            decoder_skip: false,
        }
    }

    pub fn desk() -> Self {
        Self {
            pattern_points: crate::extero::SamplePattern::desk().len(),
            encoder_widths: vec![32, 24, 16],
            belief_hidden: 48,
            belief_dim: 24,
            decoder_widths: vec![48],
            trunk_hidden: 32,
            trunk_layers: 2,
            gate_input: GateInput::Latent,
            gate_widths: Vec::new(),
            decoder_skip: false,
        }
    }

    pub fn foot_latent(&self) -> usize {
        *self.encoder_widths.last().unwrap_or(&0)
    }

    pub fn decoder_inputs(&self) -> usize {
        self.belief_hidden + if self.decoder_skip { self.latent_dim() } else { 0 }
    }

    pub fn gate_inputs(&self) -> usize {
        match self.gate_input {
            GateInput::Latent => self.latent_dim(),
            GateInput::LatentAndMemory => self.latent_dim() + self.belief_hidden,
            GateInput::Memory => self.belief_hidden,
        }
    }

    /// Length of `l^e`, both feet concatenated.
    pub fn latent_dim(&self) -> usize {
        2 * self.foot_latent()
    }

    pub fn reconstruction_dim(&self) -> usize {
        2 * self.pattern_points
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("pattern_points", self.pattern_points),
            ("belief_hidden", self.belief_hidden),
            ("belief_dim", self.belief_dim),
            ("trunk_hidden", self.trunk_hidden),
            ("trunk_layers", self.trunk_layers),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::invalid(name, "must be positive"));
            }
        }
        if self.encoder_widths.is_empty() || self.encoder_widths.contains(&0) {
            return Err(Error::invalid("encoder_widths", "need at least one positive width"));
        }
        if self.decoder_widths.contains(&0) {
            return Err(Error::invalid("decoder_widths", "widths must be positive"));
        }
        if self.gate_widths.contains(&0) {
            return Err(Error::invalid("gate_widths", "widths must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Desk,
    Paper,
}

impl Profile {
    pub fn arch(self) -> ArchConfig {
        match self {
            Profile::Desk => ArchConfig::desk(),
            Profile::Paper => ArchConfig::paper(),
        }
    }

    pub fn pattern(self) -> crate::extero::SamplePattern {
        match self {
            Profile::Desk => crate::extero::SamplePattern::desk(),
            Profile::Paper => crate::extero::SamplePattern::full(),
        }
    }
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Profile::Desk),
            "paper" => Ok(Profile::Paper),
            other => Err(Error::invalid("profile", format!("unknown profile `{other}` (desk|paper)"))),
        }
    }
}

fn concat(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut v = Vec::with_capacity(a.len() + b.len());
    v.extend_from_slice(a);
    v.extend_from_slice(b);
    v
}

fn check_len(context: &str, expected: usize, values: &[f64]) -> Result<()> {
    if values.len() != expected {
        return Err(Error::shape(context, expected, values.len()));
    }
    Ok(())
}

fn new_encoder<R: Rng + ?Sized>(arch: &ArchConfig, rng: &mut R) -> Mlp {
    let mut widths = vec![arch.pattern_points];
    widths.extend_from_slice(&arch.encoder_widths);
    Mlp::new(&widths, Activation::Tanh, Activation::Tanh, rng)
}

/// Stacked LSTM cells with a linear action head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecurrentTrunk {
    pub cells: Vec<Lstm>,
    pub head: Dense,
}

/// Per-step caches of every trunk cell plus head outputs.
#[derive(Debug, Clone, Default)]
pub struct TrunkTrace {
    pub cells: Vec<Vec<LstmStep>>,
    pub actions: Vec<Vec<f64>>,
}

impl RecurrentTrunk {
    pub fn new<R: Rng + ?Sized>(inputs: usize, hidden: usize, layers: usize, rng: &mut R) -> Self {
        let mut n_in = inputs;
        let cells = (0..layers)
            .map(|_| {
                let c = Lstm::new(n_in, hidden, rng);
                n_in = hidden;
                c
            })
            .collect();
        let head = Dense::new(hidden, ACTION_DIM, Activation::Identity, rng);
        Self { cells, head }
    }

    pub fn inputs(&self) -> usize {
        self.cells[0].inputs
    }

    pub fn zero_state(&self) -> Vec<LstmState> {
        self.cells.iter().map(Lstm::zero_state).collect()
    }

    fn step_traced(&self, x: Vec<f64>, states: &mut [LstmState], trace: &mut TrunkTrace) -> Vec<f64> {
        if trace.cells.len() != self.cells.len() {
            trace.cells = vec![Vec::new(); self.cells.len()];
        }
        let mut input = x;
        for (k, cell) in self.cells.iter().enumerate() {
            let s = cell.step_unchecked(&input, &states[k]);
            states[k] = s.state();
            input = s.h.clone();
            trace.cells[k].push(s);
        }
        let mut a = vec![0.0; ACTION_DIM];
        self.head.forward_into(&input, &mut a);
        trace.actions.push(a.clone());
        a
    }

    /// Accumulates into `grad`; returns per-step input gradients.
    fn backward(&self, trace: &TrunkTrace, d_actions: &[Vec<f64>], grad: &mut RecurrentTrunk) -> Result<Vec<Vec<f64>>> {
        if trace.actions.is_empty() || trace.cells.len() != self.cells.len() {
            return Err(Error::MissingTrace("trunk trace is empty".into()));
        }
        let last = trace.cells.last().unwrap();
        let mut upstream: Vec<Vec<f64>> = d_actions
            .iter()
            .enumerate()
            .map(|(t, dy)| {
                let mut dh = vec![0.0; self.head.inputs];
                self.head.backward(&last[t].h, &trace.actions[t], dy, &mut grad.head, Some(&mut dh));
                dh
            })
            .collect();
        for (k, cell) in self.cells.iter().enumerate().rev() {
            upstream = cell.backward_sequence(&trace.cells[k], &upstream, &mut grad.cells[k])?;
        }
        Ok(upstream)
    }
}

impl Parameters for RecurrentTrunk {
    fn visit(&self, f: &mut dyn FnMut(&str, &[usize], &[f64])) {
        visit_prefixed(&self.cells, "lstm", f);
        visit_prefixed(&self.head, "head", f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &[usize], &mut [f64])) {
        visit_prefixed_mut(&mut self.cells, "lstm", f);
        visit_prefixed_mut(&mut self.head, "head", f);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeacherPolicy {
    pub arch: ArchConfig,
    pub encoder: Mlp,
    pub trunk: RecurrentTrunk,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TeacherState {
    pub trunk: Vec<LstmState>,
}

impl TeacherPolicy {
    pub fn new<R: Rng + ?Sized>(arch: &ArchConfig, rng: &mut R) -> Result<Self> {
        arch.validate()?;
        let encoder = new_encoder(arch, rng);
        let trunk = RecurrentTrunk::new(PROPRIO_DIM + arch.latent_dim(), arch.trunk_hidden, arch.trunk_layers, rng);
        Ok(Self {
            arch: arch.clone(),
            encoder,
            trunk,
        })
    }

    pub fn initial_state(&self) -> TeacherState {
        TeacherState {
            trunk: self.trunk.zero_state(),
        }
    }

    /// Concatenated per-foot latents `[f_e(e_l), f_e(e_r)]`.
    pub fn latent(&self, e_l: &[f64], e_r: &[f64]) -> Result<Vec<f64>> {
        Ok(concat(&self.encoder.forward(e_l)?, &self.encoder.forward(e_r)?))
    }

    pub fn forward(&self, o_p: &[f64], e_l: &[f64], e_r: &[f64], state: &mut TeacherState) -> Result<ActionVector> {
        check_len("teacher proprio", PROPRIO_DIM, o_p)?;
        check_len("teacher left samples", self.arch.pattern_points, e_l)?;
        check_len("teacher right samples", self.arch.pattern_points, e_r)?;
        let x = concat(o_p, &self.latent(e_l, e_r)?);
        let mut trace = TrunkTrace::default();
        let a = self.trunk.step_traced(x, &mut state.trunk, &mut trace);
        ActionVector::from_slice(&a)
    }
}

impl Parameters for TeacherPolicy {
    fn visit(&self, f: &mut dyn FnMut(&str, &[usize], &[f64])) {
        visit_prefixed(&self.encoder, "encoder", f);
        visit_prefixed(&self.trunk, "trunk", f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &[usize], &mut [f64])) {
        visit_prefixed_mut(&mut self.encoder, "encoder", f);
        visit_prefixed_mut(&mut self.trunk, "trunk", f);
    }
}

/// A frozen randomly initialized teacher standing in for a trained one.
pub fn make_synthetic_teacher(arch: &ArchConfig, seed: u64) -> Result<TeacherPolicy> {
    TeacherPolicy::new(arch, &mut rng_from(&[seed, 0x7EAC_4E12]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudentPolicy {
    pub arch: ArchConfig,
    pub encoder: Mlp,
    pub gate: Mlp,
    pub belief_cell: Lstm,
    pub fusion: Dense,
    pub decoder: Mlp,
    pub trunk: RecurrentTrunk,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudentState {
    pub belief: LstmState,
    pub trunk: Vec<LstmState>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudentOutput {
    pub action: ActionVector,
    pub belief: Vec<f64>,
    pub reconstruction: Vec<f64>,
    pub gate: Vec<f64>,
}

/// Which heads a traced pass needs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Heads {
    pub action: bool,
    pub reconstruction: bool,
}

/// Per-step caches for a whole student sequence.
#[derive(Debug, Clone, Default)]
pub(crate) struct StudentTrace {
    pub encoder: Vec<[MlpTrace; 2]>,
    pub latent: Vec<Vec<f64>>,
    pub gate: Vec<MlpTrace>,
    pub alpha: Vec<Vec<f64>>,
    pub gated: Vec<Vec<f64>>,
    pub belief_steps: Vec<LstmStep>,
    pub fusion_in: Vec<Vec<f64>>,
    pub belief: Vec<Vec<f64>>,
    pub decoder: Vec<MlpTrace>,
    pub trunk: TrunkTrace,
}

impl StudentPolicy {
    pub fn new<R: Rng + ?Sized>(arch: &ArchConfig, rng: &mut R) -> Result<Self> {
        arch.validate()?;
        let l = arch.latent_dim();
        let encoder = new_encoder(arch, rng);
        let mut gate_widths = vec![arch.gate_inputs()];
        gate_widths.extend_from_slice(&arch.gate_widths);
        gate_widths.push(l);
        let gate = Mlp::new(&gate_widths, Activation::Tanh, Activation::Sigmoid, rng);
        let belief_cell = Lstm::new(l + PROPRIO_DIM, arch.belief_hidden, rng);
        let fusion = Dense::new(arch.belief_hidden + l, arch.belief_dim, Activation::Tanh, rng);
        let mut dec_widths = vec![arch.decoder_inputs()];
        dec_widths.extend_from_slice(&arch.decoder_widths);
        dec_widths.push(arch.reconstruction_dim());
        let decoder = Mlp::new(&dec_widths, Activation::Tanh, Activation::Identity, rng);
        let trunk = RecurrentTrunk::new(PROPRIO_DIM + arch.belief_dim, arch.trunk_hidden, arch.trunk_layers, rng);
        Ok(Self {
            arch: arch.clone(),
            encoder,
            gate,
            belief_cell,
            fusion,
            decoder,
            trunk,
        })
    }

    pub fn seeded(arch: &ArchConfig, seed: u64) -> Result<Self> {
        Self::new(arch, &mut rng_from(&[seed, 0x57D3_E417]))
    }

    pub fn initial_state(&self) -> StudentState {
        StudentState {
            belief: self.belief_cell.zero_state(),
            trunk: self.trunk.zero_state(),
        }
    }

    /// Copies the teacher's extero encoder weights into this student.
    pub fn load_teacher_encoder(&mut self, teacher: &TeacherPolicy) -> Result<()> {
        if teacher.arch.pattern_points != self.arch.pattern_points
            || teacher.arch.encoder_widths != self.arch.encoder_widths
        {
            return Err(Error::invalid("encoder", "teacher and student encoder shapes differ"));
        }
        self.encoder = teacher.encoder.clone();
        Ok(())
    }

    /// Saturates the gate pre-activation so `α` is exactly `value` (0 or 1).
    pub fn force_gate(&mut self, open: bool) {
        let last = self.gate.layers.last_mut().expect("gate has a layer");
        last.weights.fill(0.0);
        last.bias.fill(if open { 1e3 } else { -1e3 });
    }

    /// One inference step; `state` advances in place.
    pub fn forward(&self, o_p: &[f64], n_l: &[f64], n_r: &[f64], state: &mut StudentState) -> Result<StudentOutput> {
        check_len("student proprio", PROPRIO_DIM, o_p)?;
        check_len("student left samples", self.arch.pattern_points, n_l)?;
        check_len("student right samples", self.arch.pattern_points, n_r)?;
        let mut trace = StudentTrace::default();
        let heads = Heads {
            action: true,
            reconstruction: true,
        };
        self.step_traced(o_p, n_l, n_r, state, heads, &mut trace);
        Ok(StudentOutput {
            action: ActionVector::from_slice(&trace.trunk.actions[0])?,
            belief: trace.belief.pop().unwrap(),
            reconstruction: trace.decoder.pop().unwrap().activations.pop().unwrap(),
            gate: trace.alpha.pop().unwrap(),
        })
    }

    pub(crate) fn step_traced(
        &self,
        o_p: &[f64],
        n_l: &[f64],
        n_r: &[f64],
        state: &mut StudentState,
        heads: Heads,
        trace: &mut StudentTrace,
    ) {
        let enc_l = self.encoder.forward_trace(n_l).expect("checked shape");
        let enc_r = self.encoder.forward_trace(n_r).expect("checked shape");
        let latent = concat(enc_l.output(), enc_r.output());
        let gate_in = match self.arch.gate_input {
            GateInput::Latent => latent.clone(),
            GateInput::LatentAndMemory => concat(&latent, &state.belief.h),
            GateInput::Memory => state.belief.h.clone(),
        };
        let gate_trace = self.gate.forward_trace(&gate_in).expect("checked shape");
        let alpha = gate_trace.output().to_vec();
        let gated: Vec<f64> = alpha.iter().zip(&latent).map(|(a, l)| a * l).collect();
        let step = self.belief_cell.step_unchecked(&concat(&gated, o_p), &state.belief);
        state.belief = step.state();
        if heads.reconstruction {
            let dec_in = if self.arch.decoder_skip { concat(&step.h, &gated) } else { step.h.clone() };
            trace.decoder.push(self.decoder.forward_trace(&dec_in).expect("checked shape"));
        }
        if heads.action {
            let fusion_in = concat(&step.h, &gated);
            let mut b = vec![0.0; self.arch.belief_dim];
            self.fusion.forward_into(&fusion_in, &mut b);
            let a_in = concat(o_p, &b);
            self.trunk.step_traced(a_in, &mut state.trunk, &mut trace.trunk);
            trace.fusion_in.push(fusion_in);
            trace.belief.push(b);
        }
        trace.belief_steps.push(step);
        trace.encoder.push([enc_l, enc_r]);
        trace.latent.push(latent);
        trace.gate.push(gate_trace);
        trace.alpha.push(alpha);
        trace.gated.push(gated);
    }

    pub(crate) fn forward_sequence(&self, seq: &Sequence, heads: Heads) -> StudentTrace {
        let mut state = self.initial_state();
        let mut trace = StudentTrace::default();
        for t in 0..seq.len() {
            let (n_l, n_r) = seq.noisy(t);
            self.step_traced(seq.proprio(t), n_l, n_r, &mut state, heads, &mut trace);
        }
        trace
    }

    /// Backward pass given per-step gradients on actions and reconstructions
    /// (either may be absent if the matching head was not traced).
    pub(crate) fn backward_sequence(
        &self,
        trace: &StudentTrace,
        d_actions: Option<&[Vec<f64>]>,
        d_recs: Option<&[Vec<f64>]>,
        d_gate: f64,
        grad: &mut StudentPolicy,
    ) -> Result<()> {
        let steps = trace.belief_steps.len();
        if steps == 0 {
            return Err(Error::MissingTrace("student trace is empty".into()));
        }
        let l = self.arch.latent_dim();
        let hb = self.arch.belief_hidden;
        let mut dh_b = vec![vec![0.0; hb]; steps];
        let mut dg = vec![vec![0.0; l]; steps];

        if let Some(d_actions) = d_actions {
            if trace.belief.len() != steps {
                return Err(Error::MissingTrace("action head was not traced".into()));
            }
            let d_in = self.trunk.backward(&trace.trunk, d_actions, &mut grad.trunk)?;
            for t in 0..steps {
                let db = &d_in[t][PROPRIO_DIM..];
                let mut d_fusion_in = vec![0.0; hb + l];
                self.fusion
                    .backward(&trace.fusion_in[t], &trace.belief[t], db, &mut grad.fusion, Some(&mut d_fusion_in));
                dh_b[t].iter_mut().zip(&d_fusion_in[..hb]).for_each(|(a, b)| *a += b);
                dg[t].iter_mut().zip(&d_fusion_in[hb..]).for_each(|(a, b)| *a += b);
            }
        }
        if let Some(d_recs) = d_recs {
            if trace.decoder.len() != steps {
                return Err(Error::MissingTrace("reconstruction head was not traced".into()));
            }
            for t in 0..steps {
                let d = self.decoder.backward(&trace.decoder[t], &d_recs[t], &mut grad.decoder)?;
                dh_b[t].iter_mut().zip(&d[..hb]).for_each(|(a, b)| *a += b);
                if self.arch.decoder_skip {
                    dg[t].iter_mut().zip(&d[hb..]).for_each(|(a, b)| *a += b);
                }
            }
        }
        // Reverse sweep over the belief cell. With gate context, the gate at
        // step t also feeds gradient into the hidden state of step t - 1.
        let p = self.arch.foot_latent();
        let mut dh_next = vec![0.0; hb];
        let mut dc_next = vec![0.0; hb];
        for t in (0..steps).rev() {
            dh_next.iter_mut().zip(&dh_b[t]).for_each(|(a, b)| *a += b);
            let (dx, dh_prev) =
                self.belief_cell
                    .backward_step(&trace.belief_steps[t], &dh_next, &mut dc_next, &mut grad.belief_cell);
            dh_next = dh_prev;
            let dg_t: Vec<f64> = dg[t].iter().zip(&dx[..l]).map(|(a, b)| a + b).collect();
            let alpha = &trace.alpha[t];
            let latent = &trace.latent[t];
            let d_alpha: Vec<f64> = dg_t.iter().zip(latent).map(|(d, x)| d * x + d_gate).collect();
            let d_gate_in = self.gate.backward(&trace.gate[t], &d_alpha, &mut grad.gate)?;
            let (d_latent_gate, d_memory) = match self.arch.gate_input {
                GateInput::Latent => (&d_gate_in[..], &[][..]),
                GateInput::LatentAndMemory => d_gate_in.split_at(l),
                GateInput::Memory => (&[][..], &d_gate_in[..]),
            };
            dh_next.iter_mut().zip(d_memory).for_each(|(a, b)| *a += b);
            let d_latent: Vec<f64> = (0..l)
                .map(|j| d_latent_gate.get(j).copied().unwrap_or(0.0) + dg_t[j] * alpha[j])
                .collect();
            let [enc_l, enc_r] = &trace.encoder[t];
            self.encoder.backward(enc_l, &d_latent[..p], &mut grad.encoder)?;
            self.encoder.backward(enc_r, &d_latent[p..], &mut grad.encoder)?;
        }
        Ok(())
    }
}

impl Parameters for StudentPolicy {
    fn visit(&self, f: &mut dyn FnMut(&str, &[usize], &[f64])) {
        visit_prefixed(&self.encoder, "encoder", f);
        visit_prefixed(&self.gate, "gate", f);
        visit_prefixed(&self.belief_cell, "belief", f);
        visit_prefixed(&self.fusion, "fusion", f);
        visit_prefixed(&self.decoder, "decoder", f);
        visit_prefixed(&self.trunk, "trunk", f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &[usize], &mut [f64])) {
        visit_prefixed_mut(&mut self.encoder, "encoder", f);
        visit_prefixed_mut(&mut self.gate, "gate", f);
        visit_prefixed_mut(&mut self.belief_cell, "belief", f);
        visit_prefixed_mut(&mut self.fusion, "fusion", f);
        visit_prefixed_mut(&mut self.decoder, "decoder", f);
        visit_prefixed_mut(&mut self.trunk, "trunk", f);
    }
}

/// One training episode stored as flat row-major blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sequence {
    pub pattern_points: usize,
    /// `len × 44`.
    pub proprio: Vec<f64>,
    /// `len × 2P`, left samples then right samples per step.
    pub noisy: Vec<f64>,
    /// `len × 2P`.
    pub clean: Vec<f64>,
    /// `len × 10`, or empty when no teacher was run.
    pub teacher_actions: Vec<f64>,
}

impl Sequence {
    pub fn len(&self) -> usize {
        self.proprio.len() / PROPRIO_DIM
    }

    pub fn is_empty(&self) -> bool {
        self.proprio.is_empty()
    }

    pub fn proprio(&self, t: usize) -> &[f64] {
        &self.proprio[t * PROPRIO_DIM..(t + 1) * PROPRIO_DIM]
    }

    pub fn noisy(&self, t: usize) -> (&[f64], &[f64]) {
        let p = self.pattern_points;
        let row = &self.noisy[2 * p * t..2 * p * (t + 1)];
        row.split_at(p)
    }

    pub fn clean(&self, t: usize) -> &[f64] {
        let p2 = 2 * self.pattern_points;
        &self.clean[p2 * t..p2 * (t + 1)]
    }

    pub fn clean_feet(&self, t: usize) -> (&[f64], &[f64]) {
        self.clean(t).split_at(self.pattern_points)
    }

    pub fn has_teacher_actions(&self) -> bool {
        !self.teacher_actions.is_empty()
    }

    pub fn teacher_action(&self, t: usize) -> &[f64] {
        &self.teacher_actions[t * ACTION_DIM..(t + 1) * ACTION_DIM]
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        if n == 0 {
            return Err(Error::invalid("sequence", "no steps"));
        }
        if self.proprio.len() != n * PROPRIO_DIM {
            return Err(Error::shape("sequence proprio", n * PROPRIO_DIM, self.proprio.len()));
        }
        let p2 = 2 * self.pattern_points;
        if self.noisy.len() != n * p2 {
            return Err(Error::shape("sequence noisy samples", n * p2, self.noisy.len()));
        }
        if self.clean.len() != n * p2 {
            return Err(Error::shape("sequence clean samples", n * p2, self.clean.len()));
        }
        if self.has_teacher_actions() && self.teacher_actions.len() != n * ACTION_DIM {
            return Err(Error::shape("sequence teacher actions", n * ACTION_DIM, self.teacher_actions.len()));
        }
        Ok(())
    }

    /// Fills `teacher_actions` by running `teacher` over the clean samples.
    pub fn label_with(&mut self, teacher: &TeacherPolicy) -> Result<()> {
        let mut state = teacher.initial_state();
        let mut actions = Vec::with_capacity(self.len() * ACTION_DIM);
        for t in 0..self.len() {
            let (e_l, e_r) = self.clean_feet(t);
            actions.extend_from_slice(&teacher.forward(self.proprio(t), e_l, e_r, &mut state)?.0);
        }
        self.teacher_actions = actions;
        Ok(())
    }

    /// Prefix of the first `len` steps.
    pub fn truncated(&self, len: usize) -> Sequence {
        let n = len.min(self.len());
        let p2 = 2 * self.pattern_points;
        Sequence {
            pattern_points: self.pattern_points,
            proprio: self.proprio[..n * PROPRIO_DIM].to_vec(),
            noisy: self.noisy[..n * p2].to_vec(),
            clean: self.clean[..n * p2].to_vec(),
            teacher_actions: if self.has_teacher_actions() {
                self.teacher_actions[..n * ACTION_DIM].to_vec()
            } else {
                Vec::new()
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub imitation: f64,
    pub reconstruction: f64,
    /// Cost on the mean gate activation, charging the student for every
    /// unit of extero information it lets in.
    #[serde(default)]
    pub gate: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            imitation: 1.0,
            reconstruction: 0.5,
            gate: 0.0,
        }
    }
}

/// Unweighted per-step mean errors summed over a batch.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossParts {
    pub steps: usize,
    pub imitation_sum: f64,
    pub reconstruction_sum: f64,
    pub gate_sum: f64,
}

impl LossParts {
    pub fn imitation_mse(&self) -> f64 {
        self.imitation_sum / self.steps.max(1) as f64
    }

    pub fn reconstruction_mse(&self) -> f64 {
        self.reconstruction_sum / self.steps.max(1) as f64
    }

    pub fn mean_gate(&self) -> f64 {
        self.gate_sum / self.steps.max(1) as f64
    }

    pub fn total(&self, w: &LossWeights) -> f64 {
        w.imitation * self.imitation_mse() + w.reconstruction * self.reconstruction_mse() + w.gate * self.mean_gate()
    }

    pub fn merge(&mut self, other: &LossParts) {
        self.steps += other.steps;
        self.imitation_sum += other.imitation_sum;
        self.reconstruction_sum += other.reconstruction_sum;
        self.gate_sum += other.gate_sum;
    }
}

fn mse_and_grad(pred: &[f64], target: &[f64], weight: f64) -> (f64, Vec<f64>) {
    let n = pred.len() as f64;
    let mut sse = 0.0;
    let grad = pred
        .iter()
        .zip(target)
        .map(|(p, t)| {
            let e = p - t;
            sse += e * e;
            weight * 2.0 * e / n
        })
        .collect();
    (sse / n, grad)
}

/// Loss parts of one sequence and, when `grad` is given, gradients of
/// `scale · Σ_t (w_im · im_t + w_rec · rec_t + w_gate · mean(α_t))` accumulated into it.
pub fn sequence_loss(
    policy: &StudentPolicy,
    seq: &Sequence,
    weights: &LossWeights,
    scale: f64,
    grad: Option<&mut StudentPolicy>,
) -> Result<LossParts> {
    seq.validate()?;
    if seq.pattern_points != policy.arch.pattern_points {
        return Err(Error::shape("sequence pattern size", policy.arch.pattern_points, seq.pattern_points));
    }
    let want_action = weights.imitation > 0.0;
    if want_action && !seq.has_teacher_actions() {
        return Err(Error::invalid("sequence", "imitation loss needs teacher actions"));
    }
    let heads = Heads {
        action: want_action,
        reconstruction: true,
    };
    let trace = policy.forward_sequence(seq, heads);
    let mut parts = LossParts {
        steps: seq.len(),
        ..Default::default()
    };
    let mut d_recs = Vec::with_capacity(seq.len());
    let mut d_actions = Vec::with_capacity(if want_action { seq.len() } else { 0 });
    for t in 0..seq.len() {
        let rec = trace.decoder[t].output();
        let (e, g) = mse_and_grad(rec, seq.clean(t), weights.reconstruction * scale);
        parts.reconstruction_sum += e;
        d_recs.push(g);
        if want_action {
            let (e, g) = mse_and_grad(&trace.trunk.actions[t], seq.teacher_action(t), weights.imitation * scale);
            parts.imitation_sum += e;
            d_actions.push(g);
        }
        parts.gate_sum += trace.alpha[t].iter().sum::<f64>() / trace.alpha[t].len() as f64;
    }
    if let Some(grad) = grad {
        policy.backward_sequence(
            &trace,
            want_action.then_some(d_actions.as_slice()),
            Some(d_recs.as_slice()),
            weights.gate * scale / policy.arch.latent_dim() as f64,
            grad,
        )?;
    }
    Ok(parts)
}

/// Batch loss (averaged over every step of every sequence) with its gradient.
pub fn student_loss(
    policy: &StudentPolicy,
    batch: &[Sequence],
    weights: &LossWeights,
) -> Result<(f64, LossParts, StudentPolicy)> {
    use rayon::prelude::*;
    if batch.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let total_steps: usize = batch.iter().map(Sequence::len).sum();
    let scale = 1.0 / total_steps.max(1) as f64;
    let results: Vec<Result<(LossParts, StudentPolicy)>> = batch
        .par_iter()
        .map(|seq| {
            let mut g = policy.zeros_like();
            let parts = sequence_loss(policy, seq, weights, scale, Some(&mut g))?;
            Ok((parts, g))
        })
        .collect();
    let mut grad = policy.zeros_like();
    let mut parts = LossParts::default();
    for r in results {
        let (p, g) = r?;
        parts.merge(&p);
        grad.accumulate(&g);
    }
    Ok((parts.total(weights), parts, grad))
}
