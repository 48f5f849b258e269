use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// Weights of a tanh multilayer perceptron with an affine output layer.
///
/// `weights[l]` maps layer `l` (width `sizes[l]`) to layer `l + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub sizes: Vec<usize>,
    pub weights: Vec<DMatrix<f64>>,
    pub biases: Vec<DVector<f64>>,
}

impl MlpParams {
    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::InvalidConfig(format!("bad layer sizes {sizes:?}")));
        }
        let weights = sizes.windows(2).map(|w| DMatrix::zeros(w[1], w[0])).collect();
        let biases = sizes[1..].iter().map(|&m| DVector::zeros(m)).collect();
        Ok(MlpParams {
            sizes: sizes.to_vec(),
            weights,
            biases,
        })
    }

    /// Every entry drawn from `U[-1, 1]`.
    pub fn uniform(sizes: &[usize], seed: u64) -> Result<Self> {
        let mut p = Self::zeros(sizes)?;
        let mut rng = rng_from_seed(seed);
        for (w, b) in p.weights.iter_mut().zip(p.biases.iter_mut()) {
            w.iter_mut().for_each(|x| *x = rng.random_range(-1.0..=1.0));
            b.iter_mut().for_each(|x| *x = rng.random_range(-1.0..=1.0));
        }
        Ok(p)
    }

    /// `[d, width; hidden, d]`.
    pub fn pinn_sizes(d: usize, width: usize, hidden: usize) -> Vec<usize> {
        let mut s = vec![d];
        s.extend(std::iter::repeat_n(width, hidden));
        s.push(d);
        s
    }

    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("at least two sizes")
    }

    pub fn num_entries(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>()
            + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|x| x.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|x| x.is_finite()))
    }

    /// All entries, layer by layer, weights (column-major) before biases.
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_entries());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter());
            out.extend(b.iter());
        }
        out
    }

    pub fn flat_mut(&mut self) -> Vec<&mut f64> {
        let mut out = Vec::with_capacity(self.num_entries());
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            out.extend(w.iter_mut());
            out.extend(b.iter_mut());
        }
        out
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                found: input.len(),
            });
        }
        let mut a = DVector::from_column_slice(input);
        let last = self.num_layers() - 1;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = w * &a + b;
            if l < last {
                z.apply(|x| *x = x.tanh());
            }
            a = z;
        }
        Ok(a.iter().copied().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_network_outputs_zero() {
        let p = MlpParams::zeros(&MlpParams::pinn_sizes(3, 5, 2)).unwrap();
        assert_eq!(p.forward(&[0.3, -1.0, 2.0]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn uniform_is_bounded_and_seeded() {
        let sizes = MlpParams::pinn_sizes(3, 6, 2);
        let a = MlpParams::uniform(&sizes, 5).unwrap();
        assert_eq!(a, MlpParams::uniform(&sizes, 5).unwrap());
        assert_ne!(a, MlpParams::uniform(&sizes, 6).unwrap());
        assert!(a.flat().iter().all(|x| (-1.0..=1.0).contains(x)));
        assert_eq!(a.num_entries(), 3 * 6 + 6 + 6 * 6 + 6 + 6 * 3 + 3);
    }

    #[test]
    fn finite_for_large_inputs() {
        let p = MlpParams::uniform(&MlpParams::pinn_sizes(2, 8, 2), 1).unwrap();
        let y = p.forward(&[1e8, -1e8]).unwrap();
        assert!(y.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn lipschitz_bound_holds() {
        let p = MlpParams::uniform(&MlpParams::pinn_sizes(3, 4, 2), 2).unwrap();
        let x = [0.1, 0.4, -0.2];
        let delta = 1e-3;
        let xp = [x[0] + delta, x[1] - delta, x[2] + delta];
        let y0 = p.forward(&x).unwrap();
        let y1 = p.forward(&xp).unwrap();
        let wmax = p.weights.iter().flat_map(|w| w.iter()).fold(0.0f64, |m, v| m.max(v.abs()));
        let width = *p.sizes.iter().max().unwrap() as f64;
        let bound = (wmax * width).powi(p.num_layers() as i32) * delta;
        let diff = y0.iter().zip(&y1).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(diff <= bound);
    }

    #[test]
    fn input_dimension_checked() {
        let p = MlpParams::zeros(&[2, 3, 2]).unwrap();
        assert!(p.forward(&[1.0]).is_err());
        assert!(MlpParams::zeros(&[2]).is_err());
    }
}
