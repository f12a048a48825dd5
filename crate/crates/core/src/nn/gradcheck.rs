//! Central finite-difference verification of analytic gradients.

use serde::{Deserialize, Serialize};

use super::Parameters;

/// Default finite-difference step.
pub const STEP: f64 = 1e-5;
/// Magnitude below which gradients are compared absolutely rather than relatively.
pub const FLOOR: f64 = 1e-6;

/// `|a - n| / max(|a|, |n|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_relative_error: f64,
    pub worst_parameter: String,
    pub worst_index: usize,
    pub analytic_at_worst: f64,
    pub numeric_at_worst: f64,
}

impl GradCheckReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_relative_error < tolerance
    }
}

/// Compares `analytic` against central differences of `loss` around `params`
/// for every parameter (or every `stride`-th one when `stride > 1`).
pub fn check_gradients<P, F>(params: &P, analytic: &P, loss: F, step: f64, stride: usize) -> GradCheckReport
where
    P: Parameters + Clone,
    F: Fn(&P) -> f64,
{
    let mut layout = Vec::new();
    params.visit(&mut |name, _, d| layout.push((name.to_string(), d.len())));
    let analytic_flat = analytic.to_flat();
    let base = params.to_flat();
    let mut work = params.clone();
    let mut report = GradCheckReport {
        checked: 0,
        max_relative_error: 0.0,
        worst_parameter: String::new(),
        worst_index: 0,
        analytic_at_worst: 0.0,
        numeric_at_worst: 0.0,
    };
    let stride = stride.max(1);
    let mut offset = 0;
    for (name, len) in &layout {
        for j in (0..*len).step_by(stride) {
            let i = offset + j;
            set_one(&mut work, i, base[i] + step);
            let plus = loss(&work);
            set_one(&mut work, i, base[i] - step);
            let minus = loss(&work);
            set_one(&mut work, i, base[i]);
            let numeric = (plus - minus) / (2.0 * step);
            let err = relative_error(analytic_flat[i], numeric, FLOOR);
            report.checked += 1;
            if err > report.max_relative_error || report.worst_parameter.is_empty() {
                report.max_relative_error = err.max(report.max_relative_error);
                report.worst_parameter = name.clone();
                report.worst_index = j;
                report.analytic_at_worst = analytic_flat[i];
                report.numeric_at_worst = numeric;
            }
        }
        offset += len;
    }
    report
}

fn set_one<P: Parameters>(p: &mut P, index: usize, value: f64) {
    let mut offset = 0;
    p.visit_mut(&mut |_, _, d| {
        if (offset..offset + d.len()).contains(&index) {
            d[index - offset] = value;
        }
        offset += d.len();
    });
}
