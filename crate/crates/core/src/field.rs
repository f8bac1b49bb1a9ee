use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::UniformGrid;
use crate::quadrature::{interp_cubic, trapezoid};

type C64 = Complex64;

/// Complex samples `u(x, t)` on a uniform spatial grid at one time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaveField {
    pub grid: UniformGrid,
    pub values: Vec<C64>,
    pub time: f64,
}

impl WaveField {
    pub fn new(grid: UniformGrid, values: Vec<C64>, time: f64) -> Result<Self> {
        if values.len() != grid.len {
            return Err(Error::GridMismatch(format!("{} values for a grid of {} nodes", values.len(), grid.len)));
        }
        Ok(Self { grid, values, time })
    }

    pub fn zeros(grid: UniformGrid) -> Self {
        Self { grid, values: vec![C64::new(0.0, 0.0); grid.len], time: 0.0 }
    }

    pub fn from_fn<F: Fn(f64) -> C64>(grid: UniformGrid, f: F) -> Self {
        Self { grid, values: grid.points().map(f).collect(), time: 0.0 }
    }

    pub fn from_real_fn<F: Fn(f64) -> f64>(grid: UniformGrid, f: F) -> Self {
        Self::from_fn(grid, |x| C64::new(f(x), 0.0))
    }

    pub fn at_time(mut self, t: f64) -> Self {
        self.time = t;
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn x(&self, i: usize) -> f64 {
        self.grid.point(i)
    }

    fn check_same_grid(&self, other: &WaveField) -> Result<()> {
        if self.grid.len != other.grid.len || !self.grid.is_aligned_with(&other.grid) || (self.grid.start - other.grid.start).abs() > 1e-9 * self.grid.step {
            return Err(Error::GridMismatch("fields live on different grids".into()));
        }
        Ok(())
    }

    /// `int u conj(w) dx` by the trapezoid rule.
    pub fn inner(&self, other: &WaveField) -> Result<C64> {
        self.check_same_grid(other)?;
        let prod: Vec<C64> = self.values.iter().zip(&other.values).map(|(a, b)| a * b.conj()).collect();
        Ok(trapezoid(&prod, self.grid.step))
    }

    pub fn norm_l2(&self) -> f64 {
        let sq: Vec<f64> = self.values.iter().map(|v| v.norm_sqr()).collect();
        trapezoid(&sq, self.grid.step).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    pub fn sub(&self, other: &WaveField) -> Result<WaveField> {
        self.check_same_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(WaveField { grid: self.grid, values, time: self.time })
    }

    pub fn add(&self, other: &WaveField) -> Result<WaveField> {
        self.check_same_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        Ok(WaveField { grid: self.grid, values, time: self.time })
    }

    pub fn scale(&self, c: C64) -> WaveField {
        WaveField { grid: self.grid, values: self.values.iter().map(|v| v * c).collect(), time: self.time }
    }

    pub fn conj(&self) -> WaveField {
        WaveField { grid: self.grid, values: self.values.iter().map(|v| v.conj()).collect(), time: self.time }
    }

    /// `||self - other|| / ||other||` in L^2.
    pub fn relative_l2_error(&self, reference: &WaveField) -> Result<f64> {
        let d = self.sub(reference)?.norm_l2();
        let r = reference.norm_l2();
        Ok(if r == 0.0 { d } else { d / r })
    }

    /// Cubic interpolation onto `target`; zero beyond the sampled range.
    pub fn resample(&self, target: UniformGrid) -> WaveField {
        let end = self.grid.end();
        let values = target
            .points()
            .map(|x| {
                if x < self.grid.start - 1e-12 || x > end + 1e-12 {
                    C64::new(0.0, 0.0)
                } else {
                    interp_cubic(&self.values, self.grid.start, self.grid.step, x)
                }
            })
            .collect();
        WaveField { grid: target, values, time: self.time }
    }

    /// Same grid step, truncated or zero-extended to `len` nodes.
    pub fn with_len(&self, len: usize) -> WaveField {
        let mut values = self.values.clone();
        values.resize(len, C64::new(0.0, 0.0));
        WaveField { grid: self.grid.with_len(len), values, time: self.time }
    }

    /// Index one past the last node with `|u| > rel * max|u|`.
    pub fn support_len(&self, rel: f64) -> usize {
        let thr = rel * self.max_abs();
        self.values.iter().rposition(|v| v.norm() > thr).map(|i| i + 1).unwrap_or(0)
    }

    /// Rows `x,re,im`.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["x", "re", "im"])?;
        for (i, v) in self.values.iter().enumerate() {
            wr.write_record([format!("{:.17e}", self.x(i)), format!("{:.17e}", v.re), format!("{:.17e}", v.im)])?;
        }
        wr.flush()?;
        Ok(())
    }
}
