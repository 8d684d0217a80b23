use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Dense `(C, H, W)` tensor of finite doubles, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != channels * height * width {
            return Err(Error::Config(format!(
                "{} values for shape ({channels}, {height}, {width})",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite value at flat index {i}")));
        }
        Ok(Tensor3 {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Tensor3 {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    pub fn from_fn(channels: usize, height: usize, width: usize, f: impl Fn(usize, usize, usize) -> f64) -> Self {
        let mut t = Tensor3::zeros(channels, height, width);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    *t.at_mut(c, y, x) = f(c, y, x);
                }
            }
        }
        t
    }

    /// Uniform values in `[-1, 1)` from a seeded generator.
    pub fn random(channels: usize, height: usize, width: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..channels * height * width).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Tensor3 {
            channels,
            height,
            width,
            data,
        }
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    fn index(&self, c: usize, y: usize, x: usize) -> usize {
        (c * self.height + y) * self.width + x
    }

    #[inline]
    pub fn at(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[self.index(c, y, x)]
    }

    #[inline]
    pub fn at_mut(&mut self, c: usize, y: usize, x: usize) -> &mut f64 {
        let i = self.index(c, y, x);
        &mut self.data[i]
    }

    /// Value at signed coordinates, zero outside the map.
    #[inline]
    pub fn get_or_zero(&self, c: usize, y: isize, x: isize) -> f64 {
        if y < 0 || x < 0 || y as usize >= self.height || x as usize >= self.width {
            0.0
        } else {
            self.at(c, y as usize, x as usize)
        }
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    /// Stacks tensors of equal spatial size along the channel axis.
    pub fn concat_channels(parts: &[Tensor3]) -> Result<Tensor3> {
        let Some(first) = parts.first() else {
            return Err(Error::Config("nothing to concatenate".into()));
        };
        if parts.iter().any(|p| p.height != first.height || p.width != first.width) {
            return Err(Error::Config("spatial sizes differ".into()));
        }
        let channels = parts.iter().map(|p| p.channels).sum();
        let data = parts.iter().flat_map(|p| p.data.iter().copied()).collect();
        Ok(Tensor3 {
            channels,
            height: first.height,
            width: first.width,
            data,
        })
    }

    /// Splits along the channel axis into chunks of the given sizes.
    pub fn split_channels(&self, sizes: &[usize]) -> Result<Vec<Tensor3>> {
        if sizes.iter().sum::<usize>() != self.channels {
            return Err(Error::Config(format!("split {sizes:?} of {} channels", self.channels)));
        }
        let plane = self.height * self.width;
        let mut start = 0;
        Ok(sizes
            .iter()
            .map(|&n| {
                let t = Tensor3 {
                    channels: n,
                    height: self.height,
                    width: self.width,
                    data: self.data[start * plane..(start + n) * plane].to_vec(),
                };
                start += n;
                t
            })
            .collect())
    }

    fn zip_with(&self, other: &Tensor3, f: impl Fn(f64, f64) -> f64) -> Result<Tensor3> {
        if self.shape() != other.shape() {
            return Err(Error::Config(format!("shape {:?} vs {:?}", self.shape(), other.shape())));
        }
        Ok(Tensor3 {
            data: self.data.iter().zip(&other.data).map(|(a, b)| f(*a, *b)).collect(),
            ..*self
        })
    }

    pub fn mul(&self, other: &Tensor3) -> Result<Tensor3> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn add(&self, other: &Tensor3) -> Result<Tensor3> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn scale(&self, k: f64) -> Tensor3 {
        Tensor3 {
            data: self.data.iter().map(|v| v * k).collect(),
            ..*self
        }
    }

    pub fn dot(&self, other: &Tensor3) -> Result<f64> {
        Ok(self.zip_with(other, |a, b| a * b)?.data.iter().sum())
    }

    pub fn max_abs_diff(&self, other: &Tensor3) -> Result<f64> {
        Ok(self.zip_with(other, |a, b| (a - b).abs())?.data.iter().fold(0.0, |m, v| m.max(*v)))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn construction_checks() {
        assert!(Tensor3::new(1, 2, 2, vec![0.0; 3]).is_err());
        assert!(matches!(Tensor3::new(1, 1, 1, vec![f64::NAN]), Err(Error::Numerical(_))));
        let t = Tensor3::new(2, 1, 2, vec![1., 2., 3., 4.]).unwrap();
        assert_eq!(t.at(1, 0, 0), 3.0);
        assert_eq!(t.get_or_zero(0, -1, 0), 0.0);
    }

    #[test]
    fn concat_then_split() {
        let a = Tensor3::random(2, 3, 3, 1);
        let b = Tensor3::random(1, 3, 3, 2);
        let joined = Tensor3::concat_channels(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(joined.shape(), (3, 3, 3));
        let parts = joined.split_channels(&[2, 1]).unwrap();
        assert_eq!(parts, vec![a, b]);
    }

    #[test]
    fn random_is_seeded() {
        assert_eq!(Tensor3::random(1, 4, 4, 9), Tensor3::random(1, 4, 4, 9));
        assert_ne!(Tensor3::random(1, 4, 4, 9), Tensor3::random(1, 4, 4, 10));
    }
}
