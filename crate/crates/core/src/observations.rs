use serde::{Deserialize, Serialize};

use crate::{Error, Real, Result};

/// A block of `len` observations of dimension `dim`, stored row-major.
///
/// Row `i` is the observation at (zero-based) time `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observations<T> {
    dim: usize,
    data: Vec<T>,
}

impl<T: Real> Observations<T> {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            data: Vec::new(),
        }
    }

    pub fn with_capacity(dim: usize, rows: usize) -> Self {
        Self {
            dim,
            data: Vec::with_capacity(dim * rows),
        }
    }

    /// Builds from a flat row-major buffer. Fails on a ragged length or a
    /// non-finite entry.
    pub fn from_flat(dim: usize, data: Vec<T>) -> Result<Self> {
        if dim == 0 {
            if !data.is_empty() {
                return Err(Error::Input("dimension 0 with non-empty data".into()));
            }
        } else if !data.len().is_multiple_of(dim) {
            return Err(Error::Input(format!(
                "buffer of length {} is not a multiple of dimension {dim}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Input(format!(
                "non-finite value at row {}, column {}",
                pos / dim.max(1),
                pos % dim.max(1)
            )));
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows<R: AsRef<[T]>>(dim: usize, rows: &[R]) -> Result<Self> {
        let mut out = Self::with_capacity(dim, rows.len());
        for r in rows {
            out.push(r.as_ref())?;
        }
        Ok(out)
    }

    pub fn push(&mut self, row: &[T]) -> Result<()> {
        check_row(self.dim, row)?;
        self.data.extend_from_slice(row);
        Ok(())
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of observations. Zero-dimensional streams always report zero rows.
    #[inline]
    pub fn len(&self) -> usize {
        self.data.len().checked_div(self.dim).unwrap_or(0)
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[T]> + '_ {
        (0..self.len()).map(move |i| self.row(i))
    }

    pub fn as_flat(&self) -> &[T] {
        &self.data
    }

    /// Rows `start..end` as a new block.
    pub fn slice(&self, start: usize, end: usize) -> Self {
        Self {
            dim: self.dim,
            data: self.data[start * self.dim..end * self.dim].to_vec(),
        }
    }

    pub fn mean(&self) -> Vec<T> {
        let n = self.len();
        let mut m = vec![T::zero(); self.dim];
        if n == 0 {
            return m;
        }
        for row in self.rows() {
            for (acc, &v) in m.iter_mut().zip(row) {
                *acc = *acc + v;
            }
        }
        let inv = T::one() / T::of_usize(n);
        m.iter_mut().for_each(|v| *v = *v * inv);
        m
    }

    /// Every row minus `mean`.
    pub fn centered(&self, mean: &[T]) -> Result<Self> {
        check_dim(self.dim, mean.len(), "mean")?;
        let mut data = self.data.clone();
        if self.dim > 0 {
            for row in data.chunks_exact_mut(self.dim) {
                for (v, &m) in row.iter_mut().zip(mean) {
                    *v = *v - m;
                }
            }
        }
        Ok(Self {
            dim: self.dim,
            data,
        })
    }

    /// Multiplies every entry by `c`.
    pub fn scaled(&self, c: T) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|&v| v * c).collect(),
        }
    }
}

pub(crate) fn check_dim(expected: usize, got: usize, what: &str) -> Result<()> {
    if expected != got {
        return Err(Error::Input(format!(
            "{what} has dimension {got}, expected {expected}"
        )));
    }
    Ok(())
}

pub(crate) fn check_row<T: Real>(dim: usize, row: &[T]) -> Result<()> {
    check_dim(dim, row.len(), "observation")?;
    if let Some(k) = row.iter().position(|v| !v.is_finite()) {
        return Err(Error::Input(format!("non-finite value in column {k}")));
    }
    Ok(())
}

#[inline]
pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut lanes = [T::zero(); 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .fold(T::zero(), |acc, (&x, &y)| acc + x * y);
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            lanes[k] = lanes[k] + x[k] * y[k];
        }
    }
    (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]) + tail
}
