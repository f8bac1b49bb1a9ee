//! Pointwise values of the propagator kernel and its pieces.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::assembled::apply_t_term;
use super::fresnel::{fresnel_prefactor, free_kernel};
use crate::error::{Error, Result};
use crate::field::WaveField;
use crate::grid::UniformGrid;
use crate::jost::{jost_from_kernel, solve_jost_ode, KernelField};
use crate::potential::Potential;
use crate::quadrature::{filon_chirp_split, gregory_split, trapezoid};
use crate::scattering::{KGrid, ScatteringData};

type C64 = Complex64;
const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

fn line_c(kernel: &KernelField, x: f64) -> Result<(Vec<C64>, Vec<usize>)> {
    let (v, k) = kernel.line(x)?;
    if x + (v.len().max(1) - 1) as f64 * kernel.dx() > kernel.x_max + kernel.x_max {
        return Err(Error::Coverage("kernel line leaves the grid".into()));
    }
    Ok((v.into_iter().map(|a| C64::new(a, 0.0)).collect(), k))
}

/// `int_x K(x, z) f_t(z - c) dz`.
fn line_fresnel(kernel: &KernelField, t: f64, x: f64, c: f64) -> Result<C64> {
    let (v, k) = line_c(kernel, x)?;
    if v.len() < 2 {
        return Ok(C64::new(0.0, 0.0));
    }
    Ok(fresnel_prefactor(t)? * filon_chirp_split(&v, x, kernel.dx(), &k, 1.0 / (4.0 * t), 0.0, c)?)
}

/// `b_t(x,y) = int_x f_t(y - z) K(x,z) dz`.
pub fn correction_b(kernel: &KernelField, t: f64, x: f64, y: f64) -> Result<C64> {
    line_fresnel(kernel, t, x, y)
}

/// `int_x f_t(y + z) K(x,z) dz`.
pub fn correction_b_reflected(kernel: &KernelField, t: f64, x: f64, y: f64) -> Result<C64> {
    line_fresnel(kernel, t, x, -y)
}

/// `c_t(x,y) = int_y f_t(x - z) K(y,z) dz`.
pub fn correction_c(kernel: &KernelField, t: f64, x: f64, y: f64) -> Result<C64> {
    line_fresnel(kernel, t, y, x)
}

/// `int_y f_t(x + z) K(y,z) dz`.
pub fn correction_c_reflected(kernel: &KernelField, t: f64, x: f64, y: f64) -> Result<C64> {
    line_fresnel(kernel, t, y, -x)
}

fn double_fresnel(kernel: &KernelField, t: f64, x: f64, y: f64, sign: f64) -> Result<C64> {
    let (vx, kx) = kernel.line(x)?;
    if vx.len() < 2 {
        return Ok(C64::new(0.0, 0.0));
    }
    let dz = kernel.dx();
    let inner: Vec<C64> = (0..vx.len())
        .into_par_iter()
        .map(|m| line_fresnel(kernel, t, y, sign * (x + m as f64 * dz)))
        .collect::<Result<_>>()?;
    let prod: Vec<C64> = inner.iter().zip(&vx).map(|(a, &k)| a * k).collect();
    Ok(gregory_split(&prod, dz, &kx))
}

/// `e_t(x, y)` for one `y` and every `x` in `xs`, with the inner transform
/// in `y` tabulated once on the kernel lattice.
pub fn correction_e_row(kernel: &KernelField, t: f64, xs: &[f64], y: f64) -> Result<Vec<C64>> {
    let dz = kernel.dx();
    let reach = xs
        .iter()
        .map(|&x| kernel.line(x).map(|(v, _)| ((x / dz).round() as usize) + v.len()))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .max()
        .unwrap_or(0);
    let inner: Vec<C64> = (0..reach).into_par_iter().map(|j| line_fresnel(kernel, t, y, j as f64 * dz)).collect::<Result<_>>()?;
    xs.iter()
        .map(|&x| {
            let (vx, kx) = kernel.line(x)?;
            if vx.len() < 2 {
                return Ok(C64::new(0.0, 0.0));
            }
            let i0 = (x / dz).round() as usize;
            let prod: Vec<C64> = vx.iter().enumerate().map(|(m, &k)| inner[i0 + m] * k).collect();
            Ok(gregory_split(&prod, dz, &kx))
        })
        .collect()
}

/// `e_t(x,y) = int int K(x,z1) K(y,z2) f_t(z1 - z2) dz1 dz2`.
pub fn correction_e(kernel: &KernelField, t: f64, x: f64, y: f64) -> Result<C64> {
    double_fresnel(kernel, t, x, y, 1.0)
}

/// `int int K(x,z1) K(y,z2) f_t(z1 + z2) dz1 dz2`.
pub fn correction_e_reflected(kernel: &KernelField, t: f64, x: f64, y: f64) -> Result<C64> {
    double_fresnel(kernel, t, x, y, -1.0)
}

/// `k_{t,3}(x,y) = -int T~(z) f_t(x + y - z) dz`.
pub fn t3_kernel(scat: &ScatteringData, t: f64, x: f64, y: f64) -> Result<C64> {
    let g = &scat.t_hat.grid;
    let v: Vec<C64> = scat.t_hat.values.iter().map(|&a| C64::new(a, 0.0)).collect();
    Ok(-fresnel_prefactor(t)? * filon_chirp_split(&v, g.start, g.step, &[], 1.0 / (4.0 * t), 0.0, x + y)?)
}

/// Gaussian-regularized `(1/2 pi) int e^{-itk^2} r(k) dk`, extrapolated to
/// zero regularization.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Regularization {
    pub eps: [f64; 3],
    pub weights: [f64; 3],
}

impl Default for Regularization {
    fn default() -> Self {
        Self { eps: [1e-2, 5e-3, 2.5e-3], weights: [1.0 / 3.0, -2.0, 8.0 / 3.0] }
    }
}

impl Regularization {
    /// `k` increasing, uniform with step `dk`, symmetric, zero excluded;
    /// `r0` is the integrand at `k = 0`.
    pub fn integrate(&self, k: &[f64], dk: f64, r: &[C64], r0: C64, t: f64) -> C64 {
        let n = k.len();
        let kmax = k[n - 1];
        let mut total = C64::new(0.0, 0.0);
        for (&eps, &w) in self.eps.iter().zip(&self.weights) {
            let s = C64::new(eps, t);
            let mut acc = r0;
            for (j, (&kk, &rv)) in k.iter().zip(r).enumerate() {
                let wt = if j == 0 || j + 1 == n { 0.5 } else { 1.0 };
                acc += rv * (-s * kk * kk).exp() * wt;
            }
            acc *= dk;
            let edge = (-s * kmax * kmax).exp() / (s * (2.0 * kmax));
            acc += (r[0] + r[n - 1]) * edge;
            total += acc * w;
        }
        total / TWO_PI
    }
}

/// Cross terms of `k_{t,2}` carrying `T(k)`:
/// `-(1/2 pi) int e^{-itk^2} T(k) [d(k,x) e^{iky} + e^{ikx} d(k,y) + d(k,x) d(k,y)] dk`.
pub fn t_cross_kernel(scat: &ScatteringData, kernel: &KernelField, t: f64, x: f64, y: f64, reg: &Regularization) -> Result<C64> {
    let n = scat.k.len();
    let half = n / 2;
    let pos = &scat.k[half..];
    let dpair: Vec<(C64, C64)> = pos
        .par_iter()
        .map(|&kk| {
            let k = C64::new(kk, 0.0);
            let dx = jost_from_kernel(kernel, k, x)? - C64::from_polar(1.0, kk * x);
            let dy = jost_from_kernel(kernel, k, y)? - C64::from_polar(1.0, kk * y);
            Ok((dx, dy))
        })
        .collect::<Result<_>>()?;
    let r: Vec<C64> = (0..n)
        .map(|i| {
            let kk = scat.k[i];
            let (dx, dy) = if i >= half { dpair[i - half] } else { (dpair[half - 1 - i].0.conj(), dpair[half - 1 - i].1.conj()) };
            let ex = C64::from_polar(1.0, kk * x);
            let ey = C64::from_polar(1.0, kk * y);
            -scat.t_values[i] * (dx * ey + ex * dy + dx * dy)
        })
        .collect();
    Ok(reg.integrate(&scat.k, scat.k_grid.dk(), &r, C64::new(0.0, 0.0), t))
}

/// All pieces of the kernel decomposition at one `(x, y, t)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PropagatorKernelSample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub k0: C64,
    pub b: C64,
    pub c: C64,
    pub e: C64,
    pub b_reflected: C64,
    pub c_reflected: C64,
    pub e_reflected: C64,
    pub t_cross: C64,
    pub t3: C64,
    pub k2: C64,
    pub k1: C64,
    pub total: C64,
}

pub fn kernel_sample(kernel: &KernelField, scat: &ScatteringData, t: f64, x: f64, y: f64, reg: &Regularization) -> Result<PropagatorKernelSample> {
    let k0 = free_kernel(t, x, y)?;
    let b = correction_b(kernel, t, x, y)?;
    let c = correction_c(kernel, t, x, y)?;
    let e = correction_e(kernel, t, x, y)?;
    let b_reflected = correction_b_reflected(kernel, t, x, y)?;
    let c_reflected = correction_c_reflected(kernel, t, x, y)?;
    let e_reflected = correction_e_reflected(kernel, t, x, y)?;
    let t_cross = t_cross_kernel(scat, kernel, t, x, y, reg)?;
    let t3 = t3_kernel(scat, t, x, y)?;
    let k2 = b + c + e - b_reflected - c_reflected - e_reflected + t_cross;
    let k1 = k2 + t3;
    Ok(PropagatorKernelSample { t, x, y, k0, b, c, e, b_reflected, c_reflected, e_reflected, t_cross, t3, k2, k1, total: k0 + k1 })
}

/// `k_t(x,y)` straight from the Parseval integral with ODE Jost data:
/// the free part in closed form plus the regularized remainder.
/// Returns `[pair][time]`.
pub fn direct_kernel(p: &Potential, pairs: &[(f64, f64)], times: &[f64], k_grid: &KGrid, reg: &Regularization) -> Result<Vec<Vec<C64>>> {
    let mut xs: Vec<f64> = pairs.iter().flat_map(|&(a, b)| [a, b]).chain(std::iter::once(0.0)).collect();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    xs.dedup();
    let idx = |x: f64| xs.iter().position(|&v| v == x).unwrap();
    let pos = k_grid.positive();
    let rows: Vec<Vec<C64>> = pos
        .par_iter()
        .map(|&kk| Ok(solve_jost_ode(p, C64::new(kk, 0.0), &xs)?.f_values))
        .collect::<Result<_>>()?;
    let k_full = k_grid.full();
    let half = pos.len();
    let dk = k_grid.dk();
    let i0 = idx(0.0);
    pairs
        .iter()
        .map(|&(x, y)| {
            let (ix, iy) = (idx(x), idx(y));
            let r: Vec<C64> = k_full
                .iter()
                .enumerate()
                .map(|(i, &kk)| {
                    let (row, neg) = if i >= half { (&rows[i - half], false) } else { (&rows[half - 1 - i], true) };
                    let cj = |v: C64| if neg { v.conj() } else { v };
                    let (fx, fy, f0) = (cj(row[ix]), cj(row[iy]), cj(row[i0]));
                    let s = f0.conj() / f0;
                    fx * fy.conj() - s * fx * fy - C64::from_polar(1.0, kk * (x - y)) + C64::from_polar(1.0, kk * (x + y))
                })
                .collect();
            times
                .iter()
                .map(|&t| Ok(free_kernel(t, x, y)? + reg.integrate(&k_full, dk, &r, C64::new(0.0, 0.0), t)))
                .collect()
        })
        .collect()
}

/// Relative slack allowed when comparing a computed piece with its bound.
pub const BOUND_SLACK: f64 = 1e-6;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PieceViolation {
    pub piece: String,
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub value: f64,
    pub bound: f64,
}

/// Largest `|piece| / bound` seen for each piece, and every sample over
/// its bound.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct PieceBoundReport {
    pub samples: usize,
    pub k0: f64,
    pub b: f64,
    pub c: f64,
    pub e: f64,
    pub t3: f64,
    pub t_hat_l1: f64,
    pub violations: Vec<PieceViolation>,
}

impl PieceBoundReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    fn record(&mut self, piece: &str, t: f64, x: f64, y: f64, value: f64, bound: f64) {
        let ratio = if bound > 0.0 { value / bound } else if value > 0.0 { f64::INFINITY } else { 0.0 };
        let slot = match piece {
            "k0" => &mut self.k0,
            "b" => &mut self.b,
            "c" => &mut self.c,
            "e" => &mut self.e,
            _ => &mut self.t3,
        };
        *slot = slot.max(ratio);
        if value > bound * (1.0 + BOUND_SLACK) + 1e-14 {
            self.violations.push(PieceViolation { piece: piece.into(), t, x, y, value, bound });
        }
    }
}

/// Checks `|k0|`, `|b|`, `|c|`, `|e|` against their `|t|^{-1/2}` bounds on
/// the lattice `xs x xs`, and `||T_{t,3} phi||_inf <= (4 pi |t|)^{-1/2}
/// ||T~||_1 ||phi||_1`. Rows where `K(x, .)` vanishes give `b = e = 0`
/// exactly and are not evaluated.
pub fn piece_bound_check(kernel: &KernelField, scat: &ScatteringData, xs: &[f64], times: &[f64], phi: &WaveField) -> Result<PieceBoundReport> {
    let mut rep = PieceBoundReport::default();
    let l1: Vec<f64> = xs.iter().map(|&x| if x >= kernel.support { Ok(0.0) } else { kernel.line_l1(x) }).collect::<Result<_>>()?;
    let live: Vec<usize> = (0..xs.len()).filter(|&i| l1[i] > 0.0).collect();
    let abs_t: Vec<f64> = scat.t_hat.values.iter().map(|v| v.abs()).collect();
    rep.t_hat_l1 = trapezoid(&abs_t, scat.t_hat.grid.step);
    let abs_phi: Vec<f64> = phi.values.iter().map(|v| v.norm()).collect();
    let phi_l1 = trapezoid(&abs_phi, phi.grid.step);
    let out = UniformGrid::covering(0.0, xs.iter().fold(0.0, |m: f64, &x| m.max(x)), phi.grid.step)?;
    let live_x: Vec<f64> = live.iter().map(|&i| xs[i]).collect();
    for &t in times {
        let f = (4.0 * std::f64::consts::PI * t.abs()).sqrt().recip();
        let k0_bound = (std::f64::consts::PI * t.abs()).sqrt().recip();
        let k0_max: Vec<(f64, usize)> = xs
            .par_iter()
            .map(|&x| {
                xs.iter().enumerate().try_fold((0.0, 0), |(m, jm), (j, &y)| {
                    let v = free_kernel(t, x, y)?.norm();
                    Ok::<_, Error>(if v > m { (v, j) } else { (m, jm) })
                })
            })
            .collect::<Result<_>>()?;
        for (i, &(v, j)) in k0_max.iter().enumerate() {
            rep.record("k0", t, xs[i], xs[j], v, k0_bound);
        }
        // c(x, y) = b(y, x) on a square lattice
        let b_rows: Vec<Vec<C64>> =
            live.par_iter().map(|&i| xs.iter().map(|&y| correction_b(kernel, t, xs[i], y)).collect::<Result<_>>()).collect::<Result<_>>()?;
        for (r, &i) in live.iter().enumerate() {
            for (j, b) in b_rows[r].iter().enumerate() {
                rep.record("b", t, xs[i], xs[j], b.norm(), f * l1[i]);
                rep.record("c", t, xs[j], xs[i], b.norm(), f * l1[i]);
            }
        }
        for &j in &live {
            let row = correction_e_row(kernel, t, &live_x, xs[j])?;
            for (r, e) in row.iter().enumerate() {
                let i = live[r];
                rep.record("e", t, xs[i], xs[j], e.norm(), f * l1[i] * l1[j]);
            }
        }
        rep.samples += xs.len() * xs.len();
        let t3 = apply_t_term(scat, phi, t, &out)?;
        rep.record("t3", t, f64::NAN, f64::NAN, t3.max_abs(), f * rep.t_hat_l1 * phi_l1);
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propagator::fresnel::fresnel_kernel;

    #[test]
    fn e_row_matches_pointwise_values() {
        let p = Potential::square_well(4.0, 1.0).unwrap();
        let kernel = crate::jost::solve_marchenko_kernel(&p, 4.0, &Default::default()).unwrap();
        let xs = [0.0, 0.25, 0.5, 1.5];
        let row = correction_e_row(&kernel, 0.7, &xs, 0.5).unwrap();
        for (&x, r) in xs.iter().zip(&row) {
            let e = correction_e(&kernel, 0.7, x, 0.5).unwrap();
            assert!((r - e).norm() <= 1e-12 * e.norm().max(1e-12), "x = {x}: {r} vs {e}");
        }
    }

    #[test]
    fn regularized_fresnel_matches_closed_form() {
        let g = KGrid::new(32.0, 8192).unwrap();
        let k = g.full();
        let r: Vec<C64> = k.iter().map(|&kk| C64::from_polar(1.0, -2.0 * kk)).collect();
        let v = Regularization::default().integrate(&k, g.dk(), &r, C64::new(1.0, 0.0), 1.0);
        let e = fresnel_kernel(1.0, 2.0).unwrap();
        assert!((v - e).norm() < 1e-4, "{v} vs {e}");
    }
}
