//! Spectral (Parseval) representation of `e^{-itH} P_c`.
//!
//! `u(x,t) = (1/2 pi) int e^{-itk^2} f(k,x) Phi(k) dk` with
//! `Phi(k) = int [f(-k,y) - S(k) f(k,y)] phi(y) dy`, evaluated by the
//! trapezoid rule on a symmetric uniform k-grid.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::WaveField;
use crate::grid::UniformGrid;
use crate::jost::solve_jost_ode;
use crate::potential::Potential;
use crate::quadrature::{filon_chirp, filon_chirp_split, gregory_split};
use crate::scattering::KGrid;

type C64 = Complex64;
const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Jost solutions for the positive half of a k-grid, sampled on the nodes
/// `i * step` up to the first node at or beyond `L_V`.
#[derive(Clone, Debug)]
pub struct ContinuumBasis {
    pub k_grid: KGrid,
    pub step: f64,
    k: Vec<f64>,
    n_int: usize,
    /// `f(k_j, x_i)` at `j * n_int + i`.
    f: Vec<C64>,
    /// `d/dx f(k_j, x_i)`, same layout.
    fp: Vec<C64>,
    s: Vec<C64>,
    kinks: Vec<usize>,
}

/// Spectral coefficients `Phi(k)` on the positive and negative k.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectralCoefficients {
    pub plus: Vec<C64>,
    pub minus: Vec<C64>,
}

impl SpectralCoefficients {
    pub fn zeros(n: usize) -> Self {
        Self { plus: vec![C64::new(0.0, 0.0); n], minus: vec![C64::new(0.0, 0.0); n] }
    }

    pub fn add_scaled(&mut self, other: &SpectralCoefficients, c: C64) {
        self.plus.iter_mut().zip(&other.plus).for_each(|(a, b)| *a += b * c);
        self.minus.iter_mut().zip(&other.minus).for_each(|(a, b)| *a += b * c);
    }

    /// Largest `|k|` with a coefficient above `rel` of the maximum.
    pub fn k_cut(&self, k: &[f64], rel: f64) -> f64 {
        let m = self.plus.iter().chain(&self.minus).fold(0.0f64, |m, v| m.max(v.norm()));
        let mut cut = 0.0f64;
        for (j, &kk) in k.iter().enumerate() {
            if self.plus[j].norm() > rel * m || self.minus[j].norm() > rel * m {
                cut = kk;
            }
        }
        cut
    }
}

impl ContinuumBasis {
    pub fn new(p: &Potential, k_grid: KGrid, step: f64) -> Result<Self> {
        let n_int = (p.support / step - 1e-9).ceil() as usize + 1;
        let xs: Vec<f64> = (0..n_int).map(|i| i as f64 * step).collect();
        let k = k_grid.positive();
        let rows: Vec<(Vec<C64>, Vec<C64>, C64)> = k
            .par_iter()
            .map(|&kk| {
                let s = solve_jost_ode(p, C64::new(kk, 0.0), &xs)?;
                let f0 = s.f_values[0];
                if f0.norm() < 1e-12 {
                    return Err(Error::Conditioning { k: kk, magnitude: f0.norm() });
                }
                Ok((s.f_values, s.f_prime_values, f0.conj() / f0))
            })
            .collect::<Result<_>>()?;
        let mut f = Vec::with_capacity(k.len() * n_int);
        let mut fp = Vec::with_capacity(k.len() * n_int);
        let mut s = Vec::with_capacity(k.len());
        for (row, drow, sv) in rows {
            f.extend(row);
            fp.extend(drow);
            s.push(sv);
        }
        let g = UniformGrid { start: 0.0, step, len: n_int };
        let kinks = p.breakpoints().iter().filter_map(|&b| g.node_index(b)).collect();
        Ok(Self { k_grid, step, k, n_int, f, fp, s, kinks })
    }

    pub fn k(&self) -> &[f64] {
        &self.k
    }

    fn check_grid(&self, g: &UniformGrid) -> Result<()> {
        if g.start.abs() > 1e-12 || (g.step - self.step).abs() > 1e-12 * self.step {
            return Err(Error::GridMismatch(format!(
                "field grid (start {}, step {}) does not match the spectral basis step {}",
                g.start, g.step, self.step
            )));
        }
        Ok(())
    }

    /// `Phi(+-k)` for the positive grid wavenumbers.
    pub fn analyze(&self, phi: &WaveField) -> Result<SpectralCoefficients> {
        self.check_grid(&phi.grid)?;
        let n_phi = phi.support_len(1e-15).max(2).min(phi.len());
        let vals = &phi.values[..n_phi];
        let n_in = self.n_int.min(n_phi);
        let ext = if n_phi > self.n_int { Some(&vals[self.n_int - 1..]) } else { None };
        let x_ext = (self.n_int - 1) as f64 * self.step;
        let pairs: Vec<(C64, C64)> = (0..self.k.len())
            .into_par_iter()
            .map(|j| {
                let kk = self.k[j];
                let (mut a, mut b) = self.interior(j, &vals[..n_in])?;
                if let Some(e) = ext {
                    a += filon_chirp(e, x_ext, self.step, 0.0, kk, 0.0)?;
                    b += filon_chirp(e, x_ext, self.step, 0.0, -kk, 0.0)?;
                }
                let s = self.s[j];
                Ok((b - s * a, a - s.conj() * b))
            })
            .collect::<Result<_>>()?;
        Ok(SpectralCoefficients {
            plus: pairs.iter().map(|p| p.0).collect(),
            minus: pairs.iter().map(|p| p.1).collect(),
        })
    }

    /// `int f(k_j, y) phi(y) dy` and `int conj f(k_j, y) phi(y) dy` over the
    /// interior nodes. For `k h` not small, `f` is split into slowly varying
    /// amplitudes of `e^{+-iky}` and integrated by Filon.
    fn interior(&self, j: usize, vals: &[C64]) -> Result<(C64, C64)> {
        let kk = self.k[j];
        let row = &self.f[j * self.n_int..j * self.n_int + vals.len()];
        if kk * self.step < 0.05 {
            let pa: Vec<C64> = row.iter().zip(vals).map(|(f, v)| f * v).collect();
            let pb: Vec<C64> = row.iter().zip(vals).map(|(f, v)| f.conj() * v).collect();
            return Ok((gregory_split(&pa, self.step, &self.kinks), gregory_split(&pb, self.step, &self.kinks)));
        }
        let drow = &self.fp[j * self.n_int..j * self.n_int + vals.len()];
        let ik = C64::new(0.0, kk);
        let mut up = Vec::with_capacity(vals.len());
        let mut down = Vec::with_capacity(vals.len());
        let mut up_c = Vec::with_capacity(vals.len());
        let mut down_c = Vec::with_capacity(vals.len());
        for (i, ((f, d), v)) in row.iter().zip(drow).zip(vals).enumerate() {
            let e = C64::from_polar(1.0, kk * i as f64 * self.step);
            let alpha = (ik * f + d) / (ik * 2.0) * e.conj();
            let beta = (ik * f - d) / (ik * 2.0) * e;
            up.push(alpha * v);
            down.push(beta * v);
            up_c.push(alpha.conj() * v);
            down_c.push(beta.conj() * v);
        }
        let q = |g: &[C64], sign: f64| filon_chirp_split(g, 0.0, self.step, &self.kinks, 0.0, sign * kk, 0.0);
        Ok((q(&up, 1.0)? + q(&down, -1.0)?, q(&up_c, -1.0)? + q(&down_c, 1.0)?))
    }

    /// Synthesis at several times on `out` (must start at 0 with the basis step).
    pub fn synthesize_many(&self, c: &SpectralCoefficients, times: &[f64], out: &UniformGrid) -> Result<Vec<WaveField>> {
        self.check_grid(out)?;
        let dk = self.k_grid.dk();
        let nk = self.k.len();
        let nt = times.len();
        // per-time weighted coefficients
        let w: Vec<Vec<(C64, C64)>> = times
            .iter()
            .map(|&t| {
                (0..nk)
                    .map(|j| {
                        let e = C64::from_polar(dk / TWO_PI, -t * self.k[j] * self.k[j]);
                        (e * c.plus[j], e * c.minus[j])
                    })
                    .collect()
            })
            .collect();
        let n_in = self.n_int.min(out.len);
        let n_ext = out.len - n_in;
        let chirp = (n_ext > 0).then(|| ChirpZ::new(nk + 1, n_ext, dk * self.step));
        let fields = (0..nt)
            .into_par_iter()
            .map(|ti| {
                let wt = &w[ti];
                let mut values: Vec<C64> = (0..n_in)
                    .map(|i| (0..nk).fold(C64::new(0.0, 0.0), |acc, j| {
                        let f = self.f[j * self.n_int + i];
                        acc + f * wt[j].0 + f.conj() * wt[j].1
                    }))
                    .collect();
                if let Some(cz) = &chirp {
                    // sum_j A_j e^{i k_j x} + B_j e^{-i k_j x} for x = (n_in + r) h
                    let theta = dk * self.step;
                    let shift = |j: usize| C64::from_polar(1.0, theta * (j as f64) * (n_in as f64));
                    let mut a = vec![C64::new(0.0, 0.0); nk + 1];
                    let mut b = vec![C64::new(0.0, 0.0); nk + 1];
                    for j in 0..nk {
                        let s = shift(j + 1);
                        a[j + 1] = wt[j].0 * s;
                        b[j + 1] = wt[j].1.conj() * s;
                    }
                    let ea = cz.apply(&a);
                    let eb = cz.apply(&b);
                    values.extend(ea.iter().zip(&eb).map(|(x, y)| x + y.conj()));
                }
                WaveField { grid: *out, values, time: times[ti] }
            })
            .collect();
        Ok(fields)
    }

    pub fn synthesize(&self, c: &SpectralCoefficients, t: f64, out: &UniformGrid) -> Result<WaveField> {
        Ok(self.synthesize_many(c, &[t], out)?.remove(0))
    }

    /// Smallest `k` with at most `frac` of `sum |Phi|^2` beyond `|k|`.
    pub fn extent(&self, c: &SpectralCoefficients, frac: f64) -> f64 {
        let mass: Vec<f64> = c.plus.iter().zip(&c.minus).map(|(a, b)| a.norm_sqr() + b.norm_sqr()).collect();
        let total: f64 = mass.iter().sum();
        let mut tail = 0.0;
        for j in (0..mass.len()).rev() {
            tail += mass[j];
            if tail > frac * total {
                return self.k[j];
            }
        }
        0.0
    }

    /// Spatial period of the k-quadrature; fields must stay well inside half of it.
    pub fn alias_period(&self) -> f64 {
        TWO_PI / self.k_grid.dk()
    }
}

/// `X_r = sum_{j < n} a_j e^{i theta j r}` for `r < count` by Bluestein's algorithm.
struct ChirpZ {
    n: usize,
    count: usize,
    theta: f64,
    len: usize,
    kernel_hat: Vec<C64>,
    forward: std::sync::Arc<dyn rustfft::Fft<f64>>,
    inverse: std::sync::Arc<dyn rustfft::Fft<f64>>,
}

impl ChirpZ {
    fn new(n: usize, count: usize, theta: f64) -> Self {
        let len = (n + count - 1).next_power_of_two();
        let mut planner = rustfft::FftPlanner::new();
        let forward = planner.plan_fft_forward(len);
        let inverse = planner.plan_fft_inverse(len);
        let chirp = |m: usize| C64::from_polar(1.0, -0.5 * theta * (m as f64) * (m as f64));
        let mut kernel_hat = vec![C64::new(0.0, 0.0); len];
        for m in 0..count {
            kernel_hat[m] = chirp(m);
        }
        for m in 1..n {
            kernel_hat[len - m] = chirp(m);
        }
        forward.process(&mut kernel_hat);
        Self { n, count, theta, len, kernel_hat, forward, inverse }
    }

    fn apply(&self, a: &[C64]) -> Vec<C64> {
        debug_assert_eq!(a.len(), self.n);
        let half = |m: usize| C64::from_polar(1.0, 0.5 * self.theta * (m as f64) * (m as f64));
        let mut y = vec![C64::new(0.0, 0.0); self.len];
        for (j, v) in a.iter().enumerate() {
            y[j] = v * half(j);
        }
        self.forward.process(&mut y);
        y.iter_mut().zip(&self.kernel_hat).for_each(|(u, v)| *u *= v);
        self.inverse.process(&mut y);
        let scale = 1.0 / self.len as f64;
        (0..self.count).map(|r| y[r] * half(r) * scale).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propagator::fresnel::free_evolution;

    #[test]
    fn free_synthesis_matches_image_method() {
        let p = Potential::zero();
        let step = 1.0 / 32.0;
        let basis = ContinuumBasis::new(&p, KGrid::default(), step).unwrap();
        let g = UniformGrid::covering(0.0, 8.0, step).unwrap();
        let phi = WaveField::from_real_fn(g, |x| x * (-x * x).exp());
        let c = basis.analyze(&phi).unwrap();
        let out = UniformGrid::covering(0.0, 60.0, step).unwrap();
        let times = [0.5, 1.0, 4.0];
        let fields = basis.synthesize_many(&c, &times, &out).unwrap();
        for (u, &t) in fields.iter().zip(&times) {
            let exact = free_evolution(&phi, t, &out).unwrap();
            let err = u.sub(&exact).unwrap().max_abs();
            assert!(err < 1e-6, "t = {t}: max error {err:e}");
        }
    }

    #[test]
    fn chirp_z_matches_direct_sum() {
        let a: Vec<C64> = (0..37).map(|j| C64::new((j as f64).sin(), (0.3 * j as f64).cos())).collect();
        let theta = 0.0123;
        let cz = ChirpZ::new(a.len(), 50, theta);
        let fast = cz.apply(&a);
        for (r, v) in fast.iter().enumerate() {
            let slow = a.iter().enumerate().fold(C64::new(0.0, 0.0), |s, (j, x)| s + x * C64::from_polar(1.0, theta * (j * r) as f64));
            assert!((v - slow).norm() < 1e-12, "r = {r}");
        }
    }
}
