use super::attention::{multiply_backward, SpatialAttentionParams};
use super::conv::{conv2d_depthwise, conv2d_depthwise_backward, Kernel2, Pointwise, SeparablePair};
use super::tensor::Tensor3;
use crate::error::{Error, Result};

/// Denominator floor for the relative error, so entries whose true gradient
/// is zero are judged on absolute error instead of amplified round-off.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-3;

/// An operation with hand-written gradients for its input and parameters.
pub trait DifferentiableOp {
    fn forward(&self, x: &Tensor3) -> Result<Tensor3>;

    /// Returns `(∂L/∂x, ∂L/∂θ)` given `∂L/∂y`; `θ` is ordered as in [`parameters`](Self::parameters).
    fn backward(&self, x: &Tensor3, grad_out: &Tensor3) -> Result<(Tensor3, Vec<f64>)>;

    fn parameters(&self) -> Vec<f64>;

    fn set_parameters(&mut self, values: &[f64]) -> Result<()>;
}

/// Depthwise convolution as an op.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthwiseConv {
    pub kernels: Vec<Kernel2>,
}

impl DifferentiableOp for DepthwiseConv {
    fn forward(&self, x: &Tensor3) -> Result<Tensor3> {
        conv2d_depthwise(x, &self.kernels)
    }

    fn backward(&self, x: &Tensor3, grad_out: &Tensor3) -> Result<(Tensor3, Vec<f64>)> {
        let (gx, gk) = conv2d_depthwise_backward(x, &self.kernels, grad_out)?;
        Ok((gx, gk.iter().flat_map(|k| k.weights().iter().copied()).collect()))
    }

    fn parameters(&self) -> Vec<f64> {
        self.kernels.iter().flat_map(|k| k.weights().iter().copied()).collect()
    }

    fn set_parameters(&mut self, values: &[f64]) -> Result<()> {
        let total: usize = self.kernels.iter().map(|k| k.weights().len()).sum();
        if values.len() != total {
            return Err(Error::Config(format!("{} values for {total} kernel weights", values.len())));
        }
        let mut rest = values;
        for k in &mut self.kernels {
            let (head, tail) = rest.split_at(k.weights().len());
            *k = Kernel2::new(k.rows(), k.cols(), head.to_vec())?;
            rest = tail;
        }
        Ok(())
    }
}

impl DifferentiableOp for SeparablePair {
    fn forward(&self, x: &Tensor3) -> Result<Tensor3> {
        SeparablePair::forward(self, x)
    }

    fn backward(&self, x: &Tensor3, grad_out: &Tensor3) -> Result<(Tensor3, Vec<f64>)> {
        let (gx, gp) = SeparablePair::backward(self, x, grad_out)?;
        Ok((gx, gp.flatten()))
    }

    fn parameters(&self) -> Vec<f64> {
        self.flatten()
    }

    fn set_parameters(&mut self, values: &[f64]) -> Result<()> {
        self.load(values)
    }
}

impl DifferentiableOp for Pointwise {
    fn forward(&self, x: &Tensor3) -> Result<Tensor3> {
        Pointwise::forward(self, x)
    }

    fn backward(&self, x: &Tensor3, grad_out: &Tensor3) -> Result<(Tensor3, Vec<f64>)> {
        let (gx, gp) = Pointwise::backward(self, x, grad_out)?;
        Ok((gx, gp.flatten()))
    }

    fn parameters(&self) -> Vec<f64> {
        self.flatten()
    }

    fn set_parameters(&mut self, values: &[f64]) -> Result<()> {
        self.load(values)
    }
}

/// Element-wise multiply by a learned gate tensor: `y = g ⊙ x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    pub gate: Tensor3,
}

impl DifferentiableOp for Gate {
    fn forward(&self, x: &Tensor3) -> Result<Tensor3> {
        self.gate.mul(x)
    }

    fn backward(&self, x: &Tensor3, grad_out: &Tensor3) -> Result<(Tensor3, Vec<f64>)> {
        let (gx, gg) = multiply_backward(&self.gate, x, grad_out)?;
        Ok((gx, gg.data().to_vec()))
    }

    fn parameters(&self) -> Vec<f64> {
        self.gate.data().to_vec()
    }

    fn set_parameters(&mut self, values: &[f64]) -> Result<()> {
        let (c, h, w) = self.gate.shape();
        self.gate = Tensor3::new(c, h, w, values.to_vec())?;
        Ok(())
    }
}

impl DifferentiableOp for SpatialAttentionParams {
    fn forward(&self, x: &Tensor3) -> Result<Tensor3> {
        SpatialAttentionParams::forward(self, x)
    }

    fn backward(&self, x: &Tensor3, grad_out: &Tensor3) -> Result<(Tensor3, Vec<f64>)> {
        let (gx, gp) = SpatialAttentionParams::backward(self, x, grad_out)?;
        Ok((gx, gp.flatten()))
    }

    fn parameters(&self) -> Vec<f64> {
        self.flatten()
    }

    fn set_parameters(&mut self, values: &[f64]) -> Result<()> {
        self.load(values)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub input_max_relative_error: f64,
    pub parameter_max_relative_error: f64,
    /// Number of scalar gradient entries compared.
    pub checked: usize,
}

/// `|a − n| / max(|a|, |n|, RELATIVE_ERROR_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_ERROR_FLOOR)
}

fn projected_loss<O: DifferentiableOp + ?Sized>(op: &O, x: &Tensor3, probe: &Tensor3) -> Result<f64> {
    let y = op.forward(x)?;
    let l = y.dot(probe)?;
    if !l.is_finite() {
        return Err(Error::Numerical("non-finite loss during finite differencing".into()));
    }
    Ok(l)
}

/// Compares analytic gradients of `L = Σ r ⊙ op(x)` (with `r` drawn from
/// `seed`) against central differences of step `epsilon`, over every input
/// entry and every parameter.
pub fn grad_check<O: DifferentiableOp + Clone>(
    op: &O,
    x: &Tensor3,
    epsilon: f64,
    seed: u64,
) -> Result<GradCheckReport> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::Config(format!("finite-difference step {epsilon} must be positive")));
    }
    let y = op.forward(x)?;
    let (c, h, w) = y.shape();
    let probe = Tensor3::random(c, h, w, seed);
    let (gx, gp) = op.backward(x, &probe)?;
    if !gx.is_finite() || gp.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("analytic gradient is not finite".into()));
    }
    let params = op.parameters();
    if gp.len() != params.len() || gx.shape() != x.shape() {
        return Err(Error::Config("gradient shapes do not match input and parameters".into()));
    }

    let mut input_err: f64 = 0.0;
    let mut xp = x.clone();
    for i in 0..x.data().len() {
        let orig = x.data()[i];
        xp.data_mut()[i] = orig + epsilon;
        let up = projected_loss(op, &xp, &probe)?;
        xp.data_mut()[i] = orig - epsilon;
        let down = projected_loss(op, &xp, &probe)?;
        xp.data_mut()[i] = orig;
        input_err = input_err.max(relative_error(gx.data()[i], (up - down) / (2.0 * epsilon)));
    }

    let mut param_err: f64 = 0.0;
    let mut shifted = op.clone();
    let mut theta = params.clone();
    for i in 0..params.len() {
        theta[i] = params[i] + epsilon;
        shifted.set_parameters(&theta)?;
        let up = projected_loss(&shifted, x, &probe)?;
        theta[i] = params[i] - epsilon;
        shifted.set_parameters(&theta)?;
        let down = projected_loss(&shifted, x, &probe)?;
        theta[i] = params[i];
        param_err = param_err.max(relative_error(gp[i], (up - down) / (2.0 * epsilon)));
    }

    Ok(GradCheckReport {
        max_relative_error: input_err.max(param_err),
        input_max_relative_error: input_err,
        parameter_max_relative_error: param_err,
        checked: x.data().len() + params.len(),
    })
}
