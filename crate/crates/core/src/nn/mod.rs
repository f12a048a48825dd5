//! Dense and recurrent layers in f64 with exact reverse-mode gradients,
//! including backpropagation through time, plus Adam and finite-difference
//! gradient verification.
//!
//! Gradients are stored in a value of the same type as the parameters
//! (see [`Parameters::zeros_like`]), so every container that can be optimized
//! or checkpointed only has to describe its tensors once via [`Parameters`].

mod adam;
pub mod checkpoint;
mod dense;
pub mod gradcheck;
mod lstm;
mod sequence;

pub use adam::{Adam, AdamConfig};
pub use dense::{Activation, Dense, Mlp, MlpTrace};
pub use lstm::{Lstm, LstmState, LstmStep};
pub use sequence::{SequenceModel, SequenceTrace};

use rand::Rng;

/// A container of named f64 tensors.
///
/// `visit` and `visit_mut` must enumerate the same tensors in the same order.
pub trait Parameters {
    fn visit(&self, f: &mut dyn FnMut(&str, &[usize], &[f64]));
    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &[usize], &mut [f64]));

    fn param_count(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |_, _, d| n += d.len());
        n
    }

    fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        self.visit(&mut |_, _, d| out.extend_from_slice(d));
        out
    }

    fn set_flat(&mut self, values: &[f64]) {
        let mut offset = 0;
        self.visit_mut(&mut |_, _, d| {
            d.copy_from_slice(&values[offset..offset + d.len()]);
            offset += d.len();
        });
    }

    fn fill(&mut self, value: f64) {
        self.visit_mut(&mut |_, _, d| d.fill(value));
    }

    fn scale(&mut self, factor: f64) {
        self.visit_mut(&mut |_, _, d| d.iter_mut().for_each(|v| *v *= factor));
    }

    /// `self += other`, tensor by tensor.
    fn accumulate(&mut self, other: &Self)
    where
        Self: Sized,
    {
        let mut chunks = Vec::new();
        other.visit(&mut |_, _, d| chunks.push(d.to_vec()));
        let mut it = chunks.into_iter();
        self.visit_mut(&mut |_, _, d| {
            let src = it.next().expect("matching parameter layout");
            d.iter_mut().zip(src).for_each(|(a, b)| *a += b);
        });
    }

    fn zeros_like(&self) -> Self
    where
        Self: Clone,
    {
        let mut z = self.clone();
        z.fill(0.0);
        z
    }

    fn names(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.visit(&mut |n, _, _| out.push(n.to_string()));
        out
    }
}

/// Visits `child` with `prefix.` prepended to every tensor name.
pub fn visit_prefixed<P: Parameters + ?Sized>(
    child: &P,
    prefix: &str,
    f: &mut dyn FnMut(&str, &[usize], &[f64]),
) {
    child.visit(&mut |n, s, d| f(&format!("{prefix}.{n}"), s, d));
}

pub fn visit_prefixed_mut<P: Parameters + ?Sized>(
    child: &mut P,
    prefix: &str,
    f: &mut dyn FnMut(&str, &[usize], &mut [f64]),
) {
    child.visit_mut(&mut |n, s, d| f(&format!("{prefix}.{n}"), s, d));
}

impl<P: Parameters> Parameters for Vec<P> {
    fn visit(&self, f: &mut dyn FnMut(&str, &[usize], &[f64])) {
        for (i, p) in self.iter().enumerate() {
            visit_prefixed(p, &i.to_string(), f);
        }
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &[usize], &mut [f64])) {
        for (i, p) in self.iter_mut().enumerate() {
            visit_prefixed_mut(p, &i.to_string(), f);
        }
    }
}

pub(crate) fn uniform_vec<R: Rng + ?Sized>(rng: &mut R, n: usize, limit: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-limit..=limit)).collect()
}

/// `out = W x` for row-major `W` of shape `out.len() × x.len()`.
#[inline]
pub(crate) fn matvec(w: &[f64], x: &[f64], out: &mut [f64]) {
    let cols = x.len();
    for (o, row) in out.iter_mut().zip(w.chunks_exact(cols)) {
        *o = dot(row, x);
    }
}

/// `out += W x`.
#[inline]
pub(crate) fn matvec_add(w: &[f64], x: &[f64], out: &mut [f64]) {
    let cols = x.len();
    for (o, row) in out.iter_mut().zip(w.chunks_exact(cols)) {
        *o += dot(row, x);
    }
}

/// `out += Wᵀ y`.
#[inline]
pub(crate) fn matvec_t_add(w: &[f64], y: &[f64], out: &mut [f64]) {
    let cols = out.len();
    for (&yr, row) in y.iter().zip(w.chunks_exact(cols)) {
        if yr != 0.0 {
            axpy(yr, row, out);
        }
    }
}

/// `G += y xᵀ`.
#[inline]
pub(crate) fn outer_add(g: &mut [f64], y: &[f64], x: &[f64]) {
    let cols = x.len();
    for (&yr, row) in y.iter().zip(g.chunks_exact_mut(cols)) {
        if yr != 0.0 {
            axpy(yr, x, row);
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}
