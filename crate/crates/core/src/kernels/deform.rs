use super::conv::Kernel2;
use super::tensor::Tensor3;
use crate::error::{Error, Result};

/// Depthwise `k×k` weights plus per-location, per-tap offsets.
///
/// Offsets have shape `(2·k², H, W)`; tap `n = a·k + b` reads its `(dy, dx)`
/// from channels `2n` and `2n + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeformableParams {
    size: usize,
    weights: Vec<Kernel2>,
    offsets: Tensor3,
}

impl DeformableParams {
    pub fn new(weights: Vec<Kernel2>, offsets: Tensor3) -> Result<Self> {
        let Some(first) = weights.first() else {
            return Err(Error::Config("no deformable kernels".into()));
        };
        let size = first.rows();
        if weights.iter().any(|k| k.rows() != size || k.cols() != size) {
            return Err(Error::Config("deformable kernels must all be square and equal size".into()));
        }
        if offsets.channels() != 2 * size * size {
            return Err(Error::Config(format!(
                "offset tensor has {} channels, expected {}",
                offsets.channels(),
                2 * size * size
            )));
        }
        Ok(DeformableParams {
            size,
            weights,
            offsets,
        })
    }

    /// Same offset `(dy, dx)` at every tap and location.
    pub fn uniform_offsets(size: usize, height: usize, width: usize, dy: f64, dx: f64) -> Tensor3 {
        Tensor3::from_fn(2 * size * size, height, width, |c, _, _| if c % 2 == 0 { dy } else { dx })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn weights(&self) -> &[Kernel2] {
        &self.weights
    }

    pub fn offsets(&self) -> &Tensor3 {
        &self.offsets
    }
}

/// Bilinear read of channel `c` at real coordinates; corners outside the map count as 0.
///
/// At integer coordinates the three off-grid corner weights are exactly zero,
/// so the grid value comes back untouched.
pub fn bilinear_sample(x: &Tensor3, c: usize, py: f64, px: f64) -> f64 {
    let y0 = py.floor();
    let x0 = px.floor();
    let ly = py - y0;
    let lx = px - x0;
    let (iy, ix) = (y0 as isize, x0 as isize);
    let v00 = x.get_or_zero(c, iy, ix);
    if ly == 0.0 && lx == 0.0 {
        return v00;
    }
    let v01 = x.get_or_zero(c, iy, ix + 1);
    let v10 = x.get_or_zero(c, iy + 1, ix);
    let v11 = x.get_or_zero(c, iy + 1, ix + 1);
    (1.0 - ly) * ((1.0 - lx) * v00 + lx * v01) + ly * ((1.0 - lx) * v10 + lx * v11)
}

/// `z(p0) = Σ_n w(p_n) · x(p0 + p_n + Δp_n)` per channel, zero outside the map.
pub fn deformable_conv_forward(x: &Tensor3, params: &DeformableParams) -> Result<Tensor3> {
    let (c_n, h, w) = x.shape();
    if params.weights.len() != c_n {
        return Err(Error::Config(format!(
            "{} deformable kernels for {c_n} channels",
            params.weights.len()
        )));
    }
    if (params.offsets.height(), params.offsets.width()) != (h, w) {
        return Err(Error::Config(format!(
            "offset map {}x{} does not match input {h}x{w}",
            params.offsets.height(),
            params.offsets.width()
        )));
    }
    let k = params.size;
    let half = (k / 2) as f64;
    let mut out = Tensor3::zeros(c_n, h, w);
    for (c, kernel) in params.weights.iter().enumerate() {
        for y in 0..h {
            for xx in 0..w {
                let mut acc = 0.0;
                for a in 0..k {
                    for b in 0..k {
                        let n = a * k + b;
                        let dy = params.offsets.at(2 * n, y, xx);
                        let dx = params.offsets.at(2 * n + 1, y, xx);
                        let py = y as f64 + a as f64 - half + dy;
                        let px = xx as f64 + b as f64 - half + dx;
                        acc += kernel.at(a, b) * bilinear_sample(x, c, py, px);
                    }
                }
                *out.at_mut(c, y, xx) = acc;
            }
        }
    }
    Ok(out)
}
