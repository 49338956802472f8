//! Sample sets of real-valued embedding vectors.

use crate::error::{Error, Result};

/// An ordered set of `count` vectors of dimension `dim`, stored row-major.
///
/// Sample index `i` is row `i` in the order the vectors were supplied or
/// read from disk. All values are finite.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    data: Vec<f64>,
    count: usize,
    dim: usize,
    label: String,
}

impl EmbeddingSet {
    /// Wraps a row-major buffer of `data.len() / dim` vectors.
    pub fn new(label: impl Into<String>, dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidSet("dimension must be at least 1".into()));
        }
        if data.is_empty() {
            return Err(Error::EmptyInput("embedding set has no vectors".into()));
        }
        if data.len() % dim != 0 {
            return Err(Error::InvalidSet(format!(
                "{} values do not split into rows of dimension {dim}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / dim,
                column: pos % dim,
            });
        }
        let count = data.len() / dim;
        Ok(Self {
            data,
            count,
            dim,
            label: label.into(),
        })
    }

    pub fn from_rows<R: AsRef<[f64]>>(label: impl Into<String>, rows: &[R]) -> Result<Self> {
        let dim = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::RaggedRow {
                    line: i + 1,
                    expected: dim,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        if rows.is_empty() {
            return Err(Error::EmptyInput("embedding set has no vectors".into()));
        }
        Self::new(label, dim, data)
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    /// Row-major view of every value.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// A new set holding the given rows, in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            if i >= self.count {
                return Err(Error::InvalidParameter(format!(
                    "row {i} out of range for {} vectors",
                    self.count
                )));
            }
            data.extend_from_slice(self.row(i));
        }
        Self::new(self.label.clone(), self.dim, data)
    }

    /// Concatenates the rows of `other` after the rows of `self`.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch(self.dim, other.dim));
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Self::new(self.label.clone(), self.dim, data)
    }
}
