//! Sparse feature vectors and labeled samples.

use crate::error::{Error, Result};
use crate::instrument;

/// Index/value feature vector in canonical form: indices strictly increasing,
/// all below the declared dimensionality, no stored zeros.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseVector {
    entries: Vec<(usize, f64)>,
    dim: usize,
}

impl SparseVector {
    pub fn empty(dim: usize) -> Self {
        Self {
            entries: Vec::new(),
            dim,
        }
    }

    /// Builds a canonical vector from arbitrary (index, value) pairs.
    /// Duplicate indices are summed, then zero values dropped, so tolerant
    /// ingestion of real-world files produces the same canonical form as
    /// clean input.
    pub fn from_pairs(dim: usize, pairs: impl IntoIterator<Item = (usize, f64)>) -> Result<Self> {
        let mut raw: Vec<(usize, f64)> = pairs.into_iter().collect();
        raw.sort_by_key(|&(index, _)| index);
        let mut entries: Vec<(usize, f64)> = Vec::with_capacity(raw.len());
        for (index, value) in raw {
            if index >= dim {
                return Err(Error::IndexOutOfRange { index, dim });
            }
            if !value.is_finite() {
                return Err(Error::NonFinite {
                    what: "sparse vector entry",
                });
            }
            match entries.last_mut() {
                Some(last) if last.0 == index => last.1 += value,
                _ => entries.push((index, value)),
            }
        }
        entries.retain(|&(_, value)| value != 0.0);
        Ok(Self { entries, dim })
    }

    /// Sparse view of a dense slice; zeros are skipped.
    pub fn from_dense(values: &[f64]) -> Self {
        let entries = values
            .iter()
            .enumerate()
            .filter(|&(_, &v)| v != 0.0)
            .map(|(i, &v)| (i, v))
            .collect();
        Self {
            entries,
            dim: values.len(),
        }
    }

    /// Re-declares the dimensionality; it must still cover every index.
    pub fn with_dim(mut self, dim: usize) -> Result<Self> {
        if let Some(&(index, _)) = self.entries.last() {
            if index >= dim {
                return Err(Error::IndexOutOfRange { index, dim });
            }
        }
        self.dim = dim;
        Ok(self)
    }

    /// Entries in strictly increasing index order, zero-free.
    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn squared_norm(&self) -> f64 {
        self.entries.iter().map(|&(_, v)| v * v).sum()
    }

    /// Inner product against a dense weight slice. Touches exactly nnz
    /// coordinates.
    pub fn dot(&self, weights: &[f64]) -> Result<f64> {
        self.check_bounds(weights.len())?;
        instrument::add_touches(self.nnz());
        Ok(self.entries.iter().map(|&(i, v)| v * weights[i]).sum())
    }

    /// `weights[i] += scale * value` for each stored entry; no other
    /// coordinate is read or written.
    pub fn axpy(&self, scale: f64, weights: &mut [f64]) -> Result<()> {
        if !scale.is_finite() {
            return Err(Error::NonFinite { what: "axpy scale" });
        }
        self.check_bounds(weights.len())?;
        instrument::add_touches(self.nnz());
        for &(i, v) in &self.entries {
            weights[i] += scale * v;
        }
        Ok(())
    }

    fn check_bounds(&self, len: usize) -> Result<()> {
        match self.entries.last() {
            Some(&(index, _)) if index >= len => Err(Error::IndexOutOfRange { index, dim: len }),
            _ => Ok(()),
        }
    }
}

/// One labeled observation: classification labels live in {-1, +1},
/// regression labels are arbitrary reals.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub features: SparseVector,
    pub label: f64,
}

impl Sample {
    pub fn new(features: SparseVector, label: f64) -> Self {
        Self { features, label }
    }
}
