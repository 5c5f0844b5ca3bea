//! Sliding window over the most recent `H` centered observations with a
//! cached matrix of squared inner products.

use crate::observations::{check_dim, check_row, dot};
use crate::statistic::weighted_sum;
use crate::{Error, Observations, Real, Result, WeightPlan};

/// Ring buffer of centered observations plus the squared Gram cache.
///
/// Physical slots are reused in ring order; logical position 0 is always the
/// oldest buffered observation. Each push computes exactly one new row and
/// column of the cache.
#[derive(Debug, Clone)]
pub struct WindowState<T> {
    capacity: usize,
    dim: usize,
    mean: Vec<T>,
    buffer: Vec<T>,
    gram_sq: Vec<T>,
    head: usize,
    filled: usize,
    count: usize,
}

impl<T: Real> WindowState<T> {
    /// An empty window. `mean` is subtracted from every pushed observation
    /// and never changes afterwards.
    pub fn new(capacity: usize, mean: Vec<T>) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("window capacity must be positive".into()));
        }
        if let Some(k) = mean.iter().position(|v| !v.is_finite()) {
            return Err(Error::Input(format!("non-finite mean in column {k}")));
        }
        let dim = mean.len();
        Ok(Self {
            capacity,
            dim,
            mean,
            buffer: vec![T::zero(); capacity * dim],
            gram_sq: vec![T::zero(); capacity * capacity],
            head: 0,
            filled: 0,
            count: 0,
        })
    }

    pub fn push(&mut self, x: &[T]) -> Result<()> {
        check_row(self.dim, x)?;
        let slot = if self.filled < self.capacity {
            let s = (self.head + self.filled) % self.capacity;
            self.filled += 1;
            s
        } else {
            let s = self.head;
            self.head = (self.head + 1) % self.capacity;
            s
        };
        let p = self.dim;
        for ((dst, &v), &m) in self.buffer[slot * p..(slot + 1) * p]
            .iter_mut()
            .zip(x)
            .zip(&self.mean)
        {
            *dst = v - m;
        }
        let h = self.capacity;
        let new_row = &self.buffer[slot * p..(slot + 1) * p];
        for k in 0..self.filled {
            let other = (self.head + k) % h;
            let d = dot(new_row, &self.buffer[other * p..(other + 1) * p]);
            let v = d * d;
            self.gram_sq[slot * h + other] = v;
            self.gram_sq[other * h + slot] = v;
        }
        self.count += 1;
        Ok(())
    }

    #[inline]
    pub fn capacity(&self) -> usize {
        self.capacity
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Observations pushed since construction.
    #[inline]
    pub fn count(&self) -> usize {
        self.count
    }

    /// Observations currently buffered, at most `capacity`.
    #[inline]
    pub fn len(&self) -> usize {
        self.filled
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.filled == 0
    }

    #[inline]
    pub fn is_full(&self) -> bool {
        self.filled == self.capacity
    }

    pub fn mean(&self) -> &[T] {
        &self.mean
    }

    #[inline]
    fn slot(&self, logical: usize) -> usize {
        (self.head + logical) % self.capacity
    }

    /// Cached `((x_i - mean)^T (x_j - mean))^2` for logical positions (0-based,
    /// oldest first).
    pub fn gram_sq(&self, i: usize, j: usize) -> T {
        assert!(i < self.filled && j < self.filled, "position outside buffered range");
        self.gram_sq[self.slot(i) * self.capacity + self.slot(j)]
    }

    /// Buffered centered observations, oldest first.
    pub fn contents(&self) -> Observations<T> {
        let mut out = Observations::with_capacity(self.dim, self.filled);
        for k in 0..self.filled {
            let s = self.slot(k);
            out.push(&self.buffer[s * self.dim..(s + 1) * self.dim])
                .expect("buffered rows are finite and well-formed");
        }
        out
    }

    /// The windowed statistic over the buffered observations. Returns `None`
    /// while the window is not yet full.
    pub fn statistic(&self, plan: &WeightPlan<T>) -> Result<Option<T>> {
        check_dim(self.capacity, plan.length(), "weight plan length")?;
        if !self.is_full() {
            return Ok(None);
        }
        let h = self.capacity;
        let slots: Vec<usize> = (0..h).map(|k| self.slot(k)).collect();
        Ok(Some(weighted_sum(plan, |i, j| {
            self.gram_sq[slots[i] * h + slots[j]]
        })))
    }
}
