use super::tensor::Tensor3;
use crate::error::{Error, Result};

/// One 2-D kernel, `rows × cols`, both odd.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel2 {
    rows: usize,
    cols: usize,
    weights: Vec<f64>,
}

impl Kernel2 {
    pub fn new(rows: usize, cols: usize, weights: Vec<f64>) -> Result<Self> {
        if rows % 2 == 0 || cols % 2 == 0 {
            return Err(Error::Config(format!("kernel {rows}x{cols} must have odd dimensions")));
        }
        if weights.len() != rows * cols {
            return Err(Error::Config(format!("{} weights for a {rows}x{cols} kernel", weights.len())));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Numerical("non-finite kernel weight".into()));
        }
        Ok(Kernel2 { rows, cols, weights })
    }

    /// Single 1 at the centre.
    pub fn identity(rows: usize, cols: usize) -> Result<Self> {
        let mut w = vec![0.0; rows * cols];
        if let Some(v) = w.get_mut((rows / 2) * cols + cols / 2) {
            *v = 1.0;
        }
        Kernel2::new(rows, cols, w)
    }

    /// Outer product `u vᵀ`.
    pub fn outer(u: &[f64], v: &[f64]) -> Result<Self> {
        let w = u.iter().flat_map(|a| v.iter().map(move |b| a * b)).collect();
        Kernel2::new(u.len(), v.len(), w)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    pub fn at(&self, a: usize, b: usize) -> f64 {
        self.weights[a * self.cols + b]
    }
}

fn check_kernels(x: &Tensor3, kernels: &[Kernel2]) -> Result<()> {
    if kernels.len() != x.channels() {
        return Err(Error::Config(format!(
            "{} kernels for {} channels",
            kernels.len(),
            x.channels()
        )));
    }
    Ok(())
}

/// Per-channel cross-correlation with zero "same" padding.
pub fn conv2d_depthwise(x: &Tensor3, kernels: &[Kernel2]) -> Result<Tensor3> {
    check_kernels(x, kernels)?;
    let (c_n, h, w) = x.shape();
    let mut out = Tensor3::zeros(c_n, h, w);
    for (c, k) in kernels.iter().enumerate() {
        let (pr, pc) = ((k.rows / 2) as isize, (k.cols / 2) as isize);
        for y in 0..h {
            for xx in 0..w {
                let mut acc = 0.0;
                for a in 0..k.rows {
                    for b in 0..k.cols {
                        let sy = y as isize + a as isize - pr;
                        let sx = xx as isize + b as isize - pc;
                        acc += k.at(a, b) * x.get_or_zero(c, sy, sx);
                    }
                }
                *out.at_mut(c, y, xx) = acc;
            }
        }
    }
    Ok(out)
}

/// Gradients of [`conv2d_depthwise`] with respect to its input and kernels.
pub fn conv2d_depthwise_backward(
    x: &Tensor3,
    kernels: &[Kernel2],
    grad_out: &Tensor3,
) -> Result<(Tensor3, Vec<Kernel2>)> {
    check_kernels(x, kernels)?;
    if grad_out.shape() != x.shape() {
        return Err(Error::Config("gradient shape differs from input".into()));
    }
    let (c_n, h, w) = x.shape();
    let mut gx = Tensor3::zeros(c_n, h, w);
    let mut gk = Vec::with_capacity(c_n);
    for (c, k) in kernels.iter().enumerate() {
        let (pr, pc) = ((k.rows / 2) as isize, (k.cols / 2) as isize);
        let mut gw = vec![0.0; k.weights.len()];
        for y in 0..h {
            for xx in 0..w {
                let g = grad_out.at(c, y, xx);
                for a in 0..k.rows {
                    for b in 0..k.cols {
                        let sy = y as isize + a as isize - pr;
                        let sx = xx as isize + b as isize - pc;
                        if sy < 0 || sx < 0 || sy as usize >= h || sx as usize >= w {
                            continue;
                        }
                        let (sy, sx) = (sy as usize, sx as usize);
                        gw[a * k.cols + b] += g * x.at(c, sy, sx);
                        *gx.at_mut(c, sy, sx) += g * k.at(a, b);
                    }
                }
            }
        }
        gk.push(Kernel2 {
            rows: k.rows,
            cols: k.cols,
            weights: gw,
        });
    }
    Ok((gx, gk))
}

/// Depthwise spatial-separable pair: a `k×1` pass then a `1×k` pass, per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparablePair {
    length: usize,
    vertical: Vec<Kernel2>,
    horizontal: Vec<Kernel2>,
}

impl SeparablePair {
    /// `vertical[c]` and `horizontal[c]` hold the `length` taps for channel `c`.
    pub fn new(length: usize, vertical: Vec<Vec<f64>>, horizontal: Vec<Vec<f64>>) -> Result<Self> {
        if vertical.len() != horizontal.len() {
            return Err(Error::Config("vertical and horizontal channel counts differ".into()));
        }
        let vertical = vertical
            .into_iter()
            .map(|u| Kernel2::new(length, 1, u))
            .collect::<Result<_>>()?;
        let horizontal = horizontal
            .into_iter()
            .map(|v| Kernel2::new(1, length, v))
            .collect::<Result<_>>()?;
        Ok(SeparablePair {
            length,
            vertical,
            horizontal,
        })
    }

    pub fn identity(channels: usize, length: usize) -> Result<Self> {
        let mut taps = vec![0.0; length];
        if let Some(t) = taps.get_mut(length / 2) {
            *t = 1.0;
        }
        SeparablePair::new(length, vec![taps.clone(); channels], vec![taps; channels])
    }

    pub fn zeros(channels: usize, length: usize) -> Result<Self> {
        SeparablePair::new(length, vec![vec![0.0; length]; channels], vec![vec![0.0; length]; channels])
    }

    pub fn random(channels: usize, length: usize, seed: u64) -> Result<Self> {
        let v = Tensor3::random(channels, 1, length, seed);
        let h = Tensor3::random(channels, 1, length, seed.wrapping_add(1));
        let rows = |t: &Tensor3| (0..channels).map(|c| t.channel(c).to_vec()).collect();
        SeparablePair::new(length, rows(&v), rows(&h))
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn channels(&self) -> usize {
        self.vertical.len()
    }

    pub fn vertical(&self) -> &[Kernel2] {
        &self.vertical
    }

    pub fn horizontal(&self) -> &[Kernel2] {
        &self.horizontal
    }

    /// The equivalent full `k×k` kernels `u vᵀ`.
    pub fn full_kernels(&self) -> Result<Vec<Kernel2>> {
        self.vertical
            .iter()
            .zip(&self.horizontal)
            .map(|(u, v)| Kernel2::outer(u.weights(), v.weights()))
            .collect()
    }

    pub fn forward(&self, x: &Tensor3) -> Result<Tensor3> {
        let mid = conv2d_depthwise(x, &self.vertical)?;
        conv2d_depthwise(&mid, &self.horizontal)
    }

    /// Returns the input gradient and the parameter gradient shaped like `self`.
    pub fn backward(&self, x: &Tensor3, grad_out: &Tensor3) -> Result<(Tensor3, SeparablePair)> {
        let mid = conv2d_depthwise(x, &self.vertical)?;
        let (g_mid, g_h) = conv2d_depthwise_backward(&mid, &self.horizontal, grad_out)?;
        let (g_x, g_v) = conv2d_depthwise_backward(x, &self.vertical, &g_mid)?;
        Ok((
            g_x,
            SeparablePair {
                length: self.length,
                vertical: g_v,
                horizontal: g_h,
            },
        ))
    }

    pub(crate) fn flatten(&self) -> Vec<f64> {
        self.vertical
            .iter()
            .chain(&self.horizontal)
            .flat_map(|k| k.weights.iter().copied())
            .collect()
    }

    pub(crate) fn param_count(&self) -> usize {
        2 * self.channels() * self.length
    }

    pub(crate) fn load(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.param_count() {
            return Err(Error::Config(format!(
                "{} values for {} separable parameters",
                values.len(),
                self.param_count()
            )));
        }
        for (k, chunk) in self
            .vertical
            .iter_mut()
            .chain(self.horizontal.iter_mut())
            .zip(values.chunks(self.length))
        {
            k.weights.copy_from_slice(chunk);
        }
        Ok(())
    }
}

/// Free-function form of [`SeparablePair::forward`].
pub fn separable_pair(x: &Tensor3, params: &SeparablePair) -> Result<Tensor3> {
    params.forward(x)
}

/// 1×1 convolution `y[o] = Σ_i W[o][i] x[i] + b[o]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Pointwise {
    in_channels: usize,
    out_channels: usize,
    weight: Vec<f64>,
    bias: Vec<f64>,
}

impl Pointwise {
    /// `weight` is row-major `out × in`.
    pub fn new(in_channels: usize, out_channels: usize, weight: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if weight.len() != in_channels * out_channels || bias.len() != out_channels {
            return Err(Error::Config(format!(
                "pointwise {in_channels}->{out_channels} given {} weights and {} biases",
                weight.len(),
                bias.len()
            )));
        }
        if weight.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite pointwise parameter".into()));
        }
        Ok(Pointwise {
            in_channels,
            out_channels,
            weight,
            bias,
        })
    }

    pub fn zeros(in_channels: usize, out_channels: usize) -> Self {
        Pointwise {
            in_channels,
            out_channels,
            weight: vec![0.0; in_channels * out_channels],
            bias: vec![0.0; out_channels],
        }
    }

    pub fn random(in_channels: usize, out_channels: usize, seed: u64) -> Self {
        let w = Tensor3::random(1, out_channels, in_channels, seed);
        let b = Tensor3::random(1, 1, out_channels, seed.wrapping_add(1));
        Pointwise {
            in_channels,
            out_channels,
            weight: w.data().to_vec(),
            bias: b.data().to_vec(),
        }
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn weight(&self) -> &[f64] {
        &self.weight
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn forward(&self, x: &Tensor3) -> Result<Tensor3> {
        if x.channels() != self.in_channels {
            return Err(Error::Config(format!(
                "pointwise expects {} channels, got {}",
                self.in_channels,
                x.channels()
            )));
        }
        let (_, h, w) = x.shape();
        let plane = h * w;
        let mut out = Tensor3::zeros(self.out_channels, h, w);
        let dst = out.data_mut();
        for o in 0..self.out_channels {
            let row = &mut dst[o * plane..(o + 1) * plane];
            row.fill(self.bias[o]);
            for i in 0..self.in_channels {
                let wi = self.weight[o * self.in_channels + i];
                for (d, s) in row.iter_mut().zip(x.channel(i)) {
                    *d += wi * s;
                }
            }
        }
        Ok(out)
    }

    pub fn backward(&self, x: &Tensor3, grad_out: &Tensor3) -> Result<(Tensor3, Pointwise)> {
        if x.channels() != self.in_channels || grad_out.channels() != self.out_channels {
            return Err(Error::Config("pointwise backward channel mismatch".into()));
        }
        if (x.height(), x.width()) != (grad_out.height(), grad_out.width()) {
            return Err(Error::Config("pointwise backward spatial mismatch".into()));
        }
        let (_, h, w) = x.shape();
        let plane = h * w;
        let mut gx = Tensor3::zeros(self.in_channels, h, w);
        let mut gw = vec![0.0; self.weight.len()];
        let mut gb = vec![0.0; self.out_channels];
        for o in 0..self.out_channels {
            let g = grad_out.channel(o);
            gb[o] = g.iter().sum();
            for i in 0..self.in_channels {
                let xi = x.channel(i);
                gw[o * self.in_channels + i] = g.iter().zip(xi).map(|(a, b)| a * b).sum();
                let wi = self.weight[o * self.in_channels + i];
                let dst = &mut gx.data_mut()[i * plane..(i + 1) * plane];
                for (d, gv) in dst.iter_mut().zip(g) {
                    *d += wi * gv;
                }
            }
        }
        Ok((
            gx,
            Pointwise {
                in_channels: self.in_channels,
                out_channels: self.out_channels,
                weight: gw,
                bias: gb,
            },
        ))
    }

    pub(crate) fn flatten(&self) -> Vec<f64> {
        self.weight.iter().chain(&self.bias).copied().collect()
    }

    pub(crate) fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    pub(crate) fn load(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.param_count() {
            return Err(Error::Config(format!(
                "{} values for {} pointwise parameters",
                values.len(),
                self.param_count()
            )));
        }
        let (w, b) = values.split_at(self.weight.len());
        self.weight.copy_from_slice(w);
        self.bias.copy_from_slice(b);
        Ok(())
    }
}
