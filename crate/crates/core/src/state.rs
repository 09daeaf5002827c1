use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Stacked states of all `D` samples, each of width `d`.
///
/// Sample `i` occupies `data[i*d .. (i+1)*d]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleState {
    dim: usize,
    data: Vec<f64>,
}

impl EnsembleState {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("state width must be positive".into()));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                context: "ensemble state",
                expected: (data.len() / dim + 1) * dim,
                found: data.len(),
            });
        }
        Ok(Self { dim, data })
    }

    pub fn zeros(dim: usize, samples: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * samples],
        }
    }

    /// Stacks per-sample vectors, all of which must have length `dim`.
    pub fn from_samples<'a, I>(dim: usize, samples: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let mut data = Vec::new();
        for s in samples {
            crate::error::check_len("ensemble sample", dim, s.len())?;
            data.extend_from_slice(s);
        }
        Self::new(dim, data)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_samples(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn sample_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn samples(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Elementwise `self - other`.
    pub fn deviation(&self, other: &EnsembleState) -> Result<Vec<f64>> {
        crate::error::check_len("ensemble deviation", self.len(), other.len())?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect())
    }
}
