use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Elementwise activation with `σ(0) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Tanh,
}

impl Activation {
    #[inline]
    pub fn apply(self, s: f64) -> f64 {
        match self {
            Activation::Tanh => s.tanh(),
        }
    }

    /// Derivative expressed through the activation value `a = σ(s)`.
    #[inline]
    pub(crate) fn derivative_from_value(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
        }
    }
}

/// One residual layer `x ↦ x + σ(A x + b)`.
///
/// `a` stores the `d×d` matrix column-major, i.e. `A[i][j] = a[j*d + i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl Layer {
    pub fn zeros(dim: usize) -> Self {
        Self {
            a: vec![0.0; dim * dim],
            b: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    #[inline]
    pub fn a_entry(&self, row: usize, col: usize) -> f64 {
        self.a[col * self.dim() + row]
    }

    /// The control vector `u = (vect(A), b)` of length `d² + d`.
    pub fn to_control(&self) -> Vec<f64> {
        let mut u = Vec::with_capacity(self.a.len() + self.b.len());
        u.extend_from_slice(&self.a);
        u.extend_from_slice(&self.b);
        u
    }

    pub fn from_control(dim: usize, u: &[f64]) -> Result<Self> {
        check_len("control vector", dim * dim + dim, u.len())?;
        let (a, b) = u.split_at(dim * dim);
        Ok(Self {
            a: a.to_vec(),
            b: b.to_vec(),
        })
    }

    /// `A x + b` written into `out`.
    #[inline]
    pub(crate) fn affine_into(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim();
        out.copy_from_slice(&self.b);
        for (col, &xc) in x.iter().enumerate() {
            let column = &self.a[col * d..(col + 1) * d];
            for (o, &aij) in out.iter_mut().zip(column) {
                *o += aij * xc;
            }
        }
    }
}

/// Weights of a constant-width residual network of depth `N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkWeights {
    dim: usize,
    layers: Vec<Layer>,
}

impl NetworkWeights {
    pub fn new(dim: usize, layers: Vec<Layer>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("network width must be positive".into()));
        }
        for layer in &layers {
            check_len("layer matrix", dim * dim, layer.a.len())?;
            check_len("layer bias", dim, layer.b.len())?;
            if layer.a.iter().chain(&layer.b).any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("network weights"));
            }
        }
        Ok(Self { dim, layers })
    }

    pub fn zeros(dim: usize, depth: usize) -> Self {
        Self {
            dim,
            layers: (0..depth).map(|_| Layer::zeros(dim)).collect(),
        }
    }

    pub fn from_controls(dim: usize, controls: &[Vec<f64>]) -> Result<Self> {
        let layers = controls
            .iter()
            .map(|u| Layer::from_control(dim, u))
            .collect::<Result<Vec<_>>>()?;
        Self::new(dim, layers)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layer(&self, k: usize) -> &Layer {
        &self.layers[k]
    }

    pub fn controls(&self) -> Vec<Vec<f64>> {
        self.layers.iter().map(Layer::to_control).collect()
    }

    /// Number of scalar weights, `N·(d² + d)`.
    pub fn num_params(&self) -> usize {
        self.depth() * (self.dim * self.dim + self.dim)
    }

    /// All controls concatenated layer by layer.
    pub fn to_flat(&self) -> Vec<f64> {
        self.layers.iter().flat_map(Layer::to_control).collect()
    }

    pub fn from_flat(dim: usize, depth: usize, flat: &[f64]) -> Result<Self> {
        let per = dim * dim + dim;
        check_len("flat weights", per * depth, flat.len())?;
        let layers = flat
            .chunks_exact(per.max(1))
            .take(depth)
            .map(|u| Layer::from_control(dim, u))
            .collect::<Result<Vec<_>>>()?;
        Self::new(dim, layers)
    }

    /// Propagates a single sample through every layer.
    pub fn propagate(&self, x: &[f64], act: Activation) -> Result<Vec<f64>> {
        check_len("network input", self.dim, x.len())?;
        let mut state = x.to_vec();
        let mut scratch = vec![0.0; self.dim];
        for layer in &self.layers {
            layer.affine_into(&state, &mut scratch);
            for (s, z) in state.iter_mut().zip(&scratch) {
                *s += act.apply(*z);
            }
        }
        Ok(state)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn control_layout_is_column_major_then_bias() {
        // A = [[1, 2], [3, 4]]
        let layer = Layer {
            a: vec![1.0, 3.0, 2.0, 4.0],
            b: vec![5.0, 6.0],
        };
        assert_eq!(layer.a_entry(0, 1), 2.0);
        assert_eq!(layer.a_entry(1, 0), 3.0);
        assert_eq!(layer.to_control(), vec![1.0, 3.0, 2.0, 4.0, 5.0, 6.0]);
        let mut out = [0.0; 2];
        layer.affine_into(&[1.0, 1.0], &mut out);
        assert_eq!(out, [1.0 + 2.0 + 5.0, 3.0 + 4.0 + 6.0]);
        assert_eq!(Layer::from_control(2, &layer.to_control()).unwrap(), layer);
    }

    #[test]
    fn flat_round_trip() {
        let w = NetworkWeights::from_flat(2, 2, &(0..12).map(f64::from).collect::<Vec<_>>()).unwrap();
        assert_eq!(w.layer(1).b, vec![10.0, 11.0]);
        assert_eq!(w.to_flat().len(), w.num_params());
        assert!(NetworkWeights::from_flat(2, 2, &[0.0; 11]).is_err());
    }

    #[test]
    fn rejects_non_finite_weights() {
        let mut l = Layer::zeros(1);
        l.b[0] = f64::NAN;
        assert!(NetworkWeights::new(1, vec![l]).is_err());
    }

    #[test]
    fn activation_vanishes_at_zero() {
        assert_eq!(Activation::Tanh.apply(0.0), 0.0);
    }
}
