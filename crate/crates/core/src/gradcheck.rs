//! Central finite-difference gradient verification.
//!
//! Used by test suites to compare analytic reverse-mode gradients against
//! numeric differences. The closure must rebuild its computation from the
//! current parameter values and be deterministic (seed any dropout RNG
//! inside the closure).

use alloc::string::String;
use alloc::vec::Vec;

use crate::fmath;
use crate::nn::Parameter;

#[derive(Debug, Clone, PartialEq)]
pub struct GradMismatch {
    pub param: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

/// Compare analytic gradients to central differences with step `h`.
///
/// `loss_fn` computes the scalar loss forward-only; `grad_fn` computes it
/// and runs backward. Relative error uses max(1, |a|, |n|) in the
/// denominator.
pub fn check_gradients(
    params: &[Parameter],
    mut loss_fn: impl FnMut() -> f64,
    mut grad_fn: impl FnMut() -> f64,
    h: f64,
    rel_tol: f64,
) -> Result<(), Vec<GradMismatch>> {
    for p in params {
        p.zero_grad();
    }
    let _ = grad_fn();
    let analytic: Vec<(String, Vec<f64>)> =
        params.iter().map(|p| (p.name(), p.grad().data)).collect();

    let mut mismatches = Vec::new();
    for (pi, p) in params.iter().enumerate() {
        let base = p.value();
        for k in 0..base.len() {
            let mut plus = base.clone();
            plus.data[k] += h;
            p.set_value(plus);
            let f_plus = loss_fn();
            let mut minus = base.clone();
            minus.data[k] -= h;
            p.set_value(minus);
            let f_minus = loss_fn();
            p.set_value(base.clone());

            let numeric = (f_plus - f_minus) / (2.0 * h);
            let a = analytic[pi].1[k];
            let denom = 1.0_f64.max(fmath::abs(a)).max(fmath::abs(numeric));
            if fmath::abs(a - numeric) / denom > rel_tol {
                mismatches.push(GradMismatch {
                    param: analytic[pi].0.clone(),
                    index: k,
                    analytic: a,
                    numeric,
                });
            }
        }
    }
    if mismatches.is_empty() {
        Ok(())
    } else {
        Err(mismatches)
    }
}
