use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform grid `start + i * step`, `i = 0..len`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniformGrid {
    pub start: f64,
    pub step: f64,
    pub len: usize,
}

impl UniformGrid {
    pub fn new(start: f64, step: f64, len: usize) -> Result<Self> {
        if !(step > 0.0) || !step.is_finite() || !start.is_finite() {
            return Err(Error::Domain(format!("invalid grid step {step} / start {start}")));
        }
        if len < 2 {
            return Err(Error::Domain("a grid needs at least two nodes".into()));
        }
        Ok(Self { start, step, len })
    }

    /// Grid from `start` with the given step whose last node is the first one at or beyond `end`.
    pub fn covering(start: f64, end: f64, step: f64) -> Result<Self> {
        if end <= start {
            return Err(Error::Domain(format!("empty interval [{start}, {end}]")));
        }
        let n = ((end - start) / step - 1e-9).ceil() as usize + 1;
        Self::new(start, step, n.max(2))
    }

    #[inline]
    pub fn point(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    pub fn end(&self) -> f64 {
        self.point(self.len - 1)
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len).map(move |i| self.point(i))
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.points().collect()
    }

    /// Index of the node at `x`, if `x` is a node up to rounding.
    pub fn node_index(&self, x: f64) -> Option<usize> {
        let r = (x - self.start) / self.step;
        let i = r.round();
        if i < 0.0 || i as usize >= self.len || (r - i).abs() > 1e-8 {
            None
        } else {
            Some(i as usize)
        }
    }

    /// Same step and node positions (up to rounding), possibly different extent.
    pub fn is_aligned_with(&self, other: &UniformGrid) -> bool {
        (self.step - other.step).abs() <= 1e-12 * self.step && {
            let r = (other.start - self.start) / self.step;
            (r - r.round()).abs() < 1e-8
        }
    }

    pub fn with_len(&self, len: usize) -> Self {
        Self { len, ..*self }
    }
}
