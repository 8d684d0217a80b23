//! Small-scale numerical kernels: depthwise and separable convolution,
//! deformable convolution with bilinear sampling, the multi-branch spatial
//! attention block, and finite-difference gradient checking.
//!
//! Every op uses zero "same" padding and returns a tensor of its input shape.

mod attention;
mod conv;
mod deform;
mod grad;
mod tensor;

pub use attention::{
    multiply_backward, spatial_attention_forward, AttentionTrace, SpatialAttentionParams, BRANCH_LENGTHS,
};
pub use conv::{conv2d_depthwise, conv2d_depthwise_backward, separable_pair, Kernel2, Pointwise, SeparablePair};
pub use deform::{bilinear_sample, deformable_conv_forward, DeformableParams};
pub use grad::{grad_check, relative_error, DepthwiseConv, DifferentiableOp, Gate, GradCheckReport, RELATIVE_ERROR_FLOOR};
pub use tensor::Tensor3;

use crate::error::Result;

/// Outcome of one invariant in [`run_invariant_checks`].
#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    /// Measured quantity (an error or a count) next to its bound.
    pub detail: String,
}

fn outcome(name: &'static str, value: f64, bound: f64) -> CheckOutcome {
    CheckOutcome {
        name,
        passed: value <= bound,
        detail: format!("{value:.3e} <= {bound:.0e}"),
    }
}

/// Runs the kernel invariants on seeded random data.
pub fn run_invariant_checks(seed: u64) -> Result<Vec<CheckOutcome>> {
    let mut out = Vec::new();

    let x = Tensor3::random(3, 12, 10, seed);
    let kernels: Vec<Kernel2> = (0..3)
        .map(|c| Kernel2::new(3, 3, Tensor3::random(1, 3, 3, seed + 1 + c).data().to_vec()))
        .collect::<Result<_>>()?;
    let offsets = DeformableParams::uniform_offsets(3, 12, 10, 0.0, 0.0);
    let deform = deformable_conv_forward(&x, &DeformableParams::new(kernels.clone(), offsets)?)?;
    out.push(outcome(
        "deformable, zero offsets = depthwise conv",
        deform.max_abs_diff(&conv2d_depthwise(&x, &kernels)?)?,
        1e-12,
    ));

    let mut worst: f64 = 0.0;
    for (i, len) in BRANCH_LENGTHS.iter().enumerate() {
        let pair = SeparablePair::random(3, *len, seed + 10 + i as u64)?;
        let full = conv2d_depthwise(&x, &pair.full_kernels()?)?;
        worst = worst.max(pair.forward(&x)?.max_abs_diff(&full)?);
    }
    out.push(outcome("separable pair = rank-1 full kernel", worst, 1e-9));

    let y = Tensor3::random(3, 12, 10, seed + 20);
    let (a, b) = (0.7, -1.3);
    let mix = x.scale(a).add(&y.scale(b))?;
    let pair = SeparablePair::random(3, 7, seed + 21)?;
    let lhs = pair.forward(&mix)?;
    let rhs = pair.forward(&x)?.scale(a).add(&pair.forward(&y)?.scale(b))?;
    out.push(outcome("separable pair is linear", lhs.max_abs_diff(&rhs)?, 1e-9));

    let mut mismatched = 0usize;
    for (i, (c, h, w)) in [(1, 1, 1), (2, 6, 6), (2, 8, 8), (3, 7, 13), (4, 16, 5), (8, 32, 32)]
        .into_iter()
        .enumerate()
    {
        let params = SpatialAttentionParams::random(c, seed + 30 + i as u64)?;
        if params.forward(&Tensor3::random(c, h, w, seed + 40 + i as u64))?.shape() != (c, h, w) {
            mismatched += 1;
        }
    }
    out.push(CheckOutcome {
        name: "spatial attention preserves shape",
        passed: mismatched == 0,
        detail: format!("{mismatched} of 6 shapes changed"),
    });

    let params = SpatialAttentionParams::random(2, seed + 50)?;
    let report = grad_check(&params, &Tensor3::random(2, 6, 6, seed + 51), 1e-5, seed + 52)?;
    out.push(outcome(
        "spatial attention gradient check",
        report.max_relative_error,
        1e-4,
    ));

    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn invariants_hold() {
        for c in run_invariant_checks(2024).unwrap() {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
