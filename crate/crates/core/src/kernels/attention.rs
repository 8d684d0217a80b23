use super::conv::{Pointwise, SeparablePair};
use super::tensor::Tensor3;
use crate::error::{Error, Result};

/// Branch kernel lengths of the attention block.
pub const BRANCH_LENGTHS: [usize; 3] = [7, 11, 21];

/// Three separable branches, concatenated, projected `3C → C` by a 1×1 conv;
/// the projection gates the block input element-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialAttentionParams {
    branches: Vec<SeparablePair>,
    projection: Pointwise,
}

/// Intermediate values kept for the backward pass.
#[derive(Debug, Clone)]
pub struct AttentionTrace {
    pub branch_outputs: Vec<Tensor3>,
    pub concat: Tensor3,
    pub attention: Tensor3,
    pub output: Tensor3,
}

impl SpatialAttentionParams {
    pub fn new(branches: Vec<SeparablePair>, projection: Pointwise) -> Result<Self> {
        let Some(first) = branches.first() else {
            return Err(Error::Config("attention needs at least one branch".into()));
        };
        let c = first.channels();
        if branches.iter().any(|b| b.channels() != c) {
            return Err(Error::Config("branches disagree on channel count".into()));
        }
        if projection.in_channels() != c * branches.len() || projection.out_channels() != c {
            return Err(Error::Config(format!(
                "projection {}->{} cannot follow {} branches of {c} channels",
                projection.in_channels(),
                projection.out_channels(),
                branches.len()
            )));
        }
        Ok(SpatialAttentionParams { branches, projection })
    }

    /// Seeded parameters with the default 7/11/21 branches.
    pub fn random(channels: usize, seed: u64) -> Result<Self> {
        let branches = BRANCH_LENGTHS
            .iter()
            .enumerate()
            .map(|(i, &len)| SeparablePair::random(channels, len, seed.wrapping_add(10 * i as u64)))
            .collect::<Result<_>>()?;
        let projection = Pointwise::random(3 * channels, channels, seed.wrapping_add(100));
        SpatialAttentionParams::new(branches, projection)
    }

    pub fn zeros(channels: usize) -> Result<Self> {
        let branches = BRANCH_LENGTHS
            .iter()
            .map(|&len| SeparablePair::zeros(channels, len))
            .collect::<Result<_>>()?;
        SpatialAttentionParams::new(branches, Pointwise::zeros(3 * channels, channels))
    }

    pub fn channels(&self) -> usize {
        self.projection.out_channels()
    }

    pub fn branches(&self) -> &[SeparablePair] {
        &self.branches
    }

    pub fn projection(&self) -> &Pointwise {
        &self.projection
    }

    pub fn trace(&self, x: &Tensor3) -> Result<AttentionTrace> {
        if x.channels() != self.channels() {
            return Err(Error::Config(format!(
                "attention block built for {} channels, input has {}",
                self.channels(),
                x.channels()
            )));
        }
        let branch_outputs = self.branches.iter().map(|b| b.forward(x)).collect::<Result<Vec<_>>>()?;
        let concat = Tensor3::concat_channels(&branch_outputs)?;
        let attention = self.projection.forward(&concat)?;
        let output = attention.mul(x)?;
        Ok(AttentionTrace {
            branch_outputs,
            concat,
            attention,
            output,
        })
    }

    pub fn forward(&self, x: &Tensor3) -> Result<Tensor3> {
        Ok(self.trace(x)?.output)
    }

    pub fn backward(&self, x: &Tensor3, grad_out: &Tensor3) -> Result<(Tensor3, SpatialAttentionParams)> {
        let t = self.trace(x)?;
        let (g_x_direct, g_attention) = multiply_backward(&t.attention, x, grad_out)?;
        let (g_concat, g_proj) = self.projection.backward(&t.concat, &g_attention)?;
        let sizes = vec![self.channels(); self.branches.len()];
        let mut g_x = g_x_direct;
        let mut g_branches = Vec::with_capacity(self.branches.len());
        for (branch, g) in self.branches.iter().zip(g_concat.split_channels(&sizes)?) {
            let (gx, gp) = branch.backward(x, &g)?;
            g_x = g_x.add(&gx)?;
            g_branches.push(gp);
        }
        Ok((
            g_x,
            SpatialAttentionParams {
                branches: g_branches,
                projection: g_proj,
            },
        ))
    }

    pub(crate) fn flatten(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.branches.iter().flat_map(|b| b.flatten()).collect();
        v.extend(self.projection.flatten());
        v
    }

    pub(crate) fn param_count(&self) -> usize {
        self.branches.iter().map(|b| b.param_count()).sum::<usize>() + self.projection.param_count()
    }

    pub(crate) fn load(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.param_count() {
            return Err(Error::Config(format!(
                "{} values for {} attention parameters",
                values.len(),
                self.param_count()
            )));
        }
        let mut rest = values;
        for b in &mut self.branches {
            let (head, tail) = rest.split_at(b.param_count());
            b.load(head)?;
            rest = tail;
        }
        self.projection.load(rest)
    }
}

/// Gradients of `a ⊙ b`: returns `(∂/∂b, ∂/∂a)` as `(g ⊙ a, g ⊙ b)`.
pub fn multiply_backward(a: &Tensor3, b: &Tensor3, grad_out: &Tensor3) -> Result<(Tensor3, Tensor3)> {
    Ok((grad_out.mul(a)?, grad_out.mul(b)?))
}

pub fn spatial_attention_forward(x: &Tensor3, params: &SpatialAttentionParams) -> Result<Tensor3> {
    params.forward(x)
}
