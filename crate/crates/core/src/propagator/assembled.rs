//! `e^{-itH} P_c` assembled from the free image kernel, Fresnel
//! convolutions against the transformation kernel, and the T-terms.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fresnel::{fresnel_on_grid, trimmed, Samples};
use crate::error::{Error, Result};
use crate::field::WaveField;
use crate::grid::UniformGrid;
use crate::jost::KernelField;
use crate::quadrature::{filon_chirp, gregory_split};
use crate::scattering::ScatteringData;

type C64 = Complex64;
const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Contributions to `e^{-itH} P_c phi` on the output grid.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AssembledPieces {
    /// Free Dirichlet evolution.
    pub free: WaveField,
    /// `b - b^-` terms: `int K(x,z) [F_t phi](+-z) dz`.
    pub b: WaveField,
    /// `c - c^-` terms: Fresnel transform of `K^T phi` at `+-x`.
    pub c: WaveField,
    /// `e - e^-` terms.
    pub e: WaveField,
    /// Cross terms carrying `T(k) d(k, .)`, evaluated in k-space.
    pub t_cross: WaveField,
    /// `T_{t,3} phi`.
    pub t3: WaveField,
    pub total: WaveField,
}

fn check_setup(kernel: &KernelField, phi: &WaveField, out: &UniformGrid) -> Result<f64> {
    let h = phi.grid.step;
    if phi.grid.start.abs() > 1e-12 || out.start.abs() > 1e-12 {
        return Err(Error::GridMismatch("fields must be sampled from x = 0".into()));
    }
    if (out.step - h).abs() > 1e-12 * h {
        return Err(Error::GridMismatch(format!("output step {} differs from the input step {h}", out.step)));
    }
    kernel.line_at(0.0, h).map(|_| h)
}

/// `(K^T g)(z) = int_0^z K(y, z) g(y) dy` on `z = 0, h, .. < 2 L_V`.
pub(crate) fn kernel_transpose_apply(kernel: &KernelField, g: &[C64], h: f64) -> Result<Vec<C64>> {
    let nz = (2.0 * kernel.support / h).ceil() as usize + 1;
    (0..nz)
        .into_par_iter()
        .map(|m| {
            let (col, kinks) = kernel.column_at(m as f64 * h, h)?;
            let prod: Vec<C64> = col.iter().enumerate().map(|(i, &kv)| g.get(i).copied().unwrap_or_default() * kv).collect();
            Ok(gregory_split(&prod, h, &kinks))
        })
        .collect()
}

/// `(K g)(x_i) = int_x K(x, z) g(z) dz` for `x_i = i h < L_V`, where
/// `g_at(m)` returns `g` at the node `z = m h`.
pub(crate) fn kernel_apply<G: Fn(usize) -> C64 + Sync>(kernel: &KernelField, g_at: G, h: f64, n_out: usize) -> Result<Vec<C64>> {
    (0..n_out)
        .into_par_iter()
        .map(|i| {
            let x = i as f64 * h;
            if x >= kernel.support {
                return Ok(C64::new(0.0, 0.0));
            }
            let (line, kinks) = kernel.line_at(x, h)?;
            let prod: Vec<C64> = line.iter().enumerate().map(|(m, &kv)| g_at(i + m) * kv).collect();
            Ok(gregory_split(&prod, h, &kinks))
        })
        .collect()
}

/// `g^(k) = int e^{iky} g(y) dy` for every grid wavenumber.
fn fourier(g: &[C64], h: f64, k: &[f64]) -> Result<Vec<C64>> {
    k.par_iter().map(|&kk| filon_chirp(g, 0.0, h, 0.0, kk, 0.0)).collect()
}

/// `G(g)(x) = (1/2 pi) int e^{-itk^2} T(k) e^{ikx} g^(k) dk` at `x = i h`.
fn t_multiplier(scat: &ScatteringData, g: &[C64], h: f64, t: f64, n_out: usize) -> Result<Vec<C64>> {
    let dk = scat.k_grid.dk();
    let gh = fourier(g, h, &scat.k)?;
    let w: Vec<(f64, C64)> = scat
        .k
        .iter()
        .zip(&scat.t_values)
        .zip(&gh)
        .map(|((&kk, &tk), &g)| (kk, C64::from_polar(dk / TWO_PI, -t * kk * kk) * tk * g))
        .collect();
    Ok((0..n_out)
        .into_par_iter()
        .map(|i| {
            let x = i as f64 * h;
            w.iter().fold(C64::new(0.0, 0.0), |acc, &(kk, c)| acc + c * C64::from_polar(1.0, kk * x))
        })
        .collect())
}

/// `-int T~(z) F(z - x_i) dz` where `F` is tabulated on `w_grid`.
fn t_hat_correlate(scat: &ScatteringData, f: &[C64], w_grid: &UniformGrid, out: &UniformGrid) -> Result<Vec<C64>> {
    let tg = scat.t_hat.grid;
    let h = out.step;
    if (tg.step - h).abs() > 1e-12 * h {
        return Err(Error::GridMismatch(format!("T~ step {} differs from the field step {h}", tg.step)));
    }
    let off = (tg.start - w_grid.start) / h;
    let off_i = off.round() as isize;
    Ok((0..out.len)
        .into_par_iter()
        .map(|i| {
            let mut acc = C64::new(0.0, 0.0);
            for (m, &tv) in scat.t_hat.values.iter().enumerate() {
                let idx = off_i + m as isize - i as isize;
                if idx >= 0 && (idx as usize) < f.len() {
                    let wgt = if m == 0 || m + 1 == tg.len { 0.5 } else { 1.0 };
                    acc += f[idx as usize] * (tv * wgt);
                }
            }
            -acc * h
        })
        .collect())
}

/// `T_{t,3} phi (x) = - int T~(z) int_0^inf f_t(x + y - z) phi(y) dy dz` on `out`.
pub fn apply_t_term(scat: &ScatteringData, phi: &WaveField, t: f64, out: &UniformGrid) -> Result<WaveField> {
    let h = phi.grid.step;
    let vals = trimmed(phi);
    let g = Samples::new(vals, 0.0, h);
    let tg = scat.t_hat.grid;
    let w_grid = UniformGrid::covering(tg.start - out.end(), tg.end(), h)?;
    let fphi = fresnel_on_grid(&g, t, &w_grid)?;
    let values = t_hat_correlate(scat, &fphi, &w_grid, out)?;
    Ok(WaveField { grid: *out, values, time: t })
}

/// Assembles all pieces at time `t != 0`.
pub fn evolve_assembled(kernel: &KernelField, scat: &ScatteringData, phi: &WaveField, t: f64, out: &UniformGrid) -> Result<AssembledPieces> {
    let h = check_setup(kernel, phi, out)?;
    let vals = trimmed(phi);
    let two_l = 2.0 * kernel.support;
    let n_line = (two_l / h).ceil() as usize + 1;

    // K^T phi and phi + K^T phi
    let psi1 = kernel_transpose_apply(kernel, vals, h)?;
    let n_psi = vals.len().max(psi1.len());
    let psi: Vec<C64> = (0..n_psi)
        .map(|i| vals.get(i).copied().unwrap_or_default() + psi1.get(i).copied().unwrap_or_default())
        .collect();

    // Fresnel transforms: phi on a grid wide enough for T~, psi1 on +-max(X, 2L)
    let tg = scat.t_hat.grid;
    let x_big = out.end().max(two_l);
    let w_phi = UniformGrid::covering(tg.start - out.end(), tg.end().max(x_big), h)?;
    let f_phi = fresnel_on_grid(&Samples::new(vals, 0.0, h), t, &w_phi)?;
    let w_psi = UniformGrid::covering(-x_big, x_big, h)?;
    let f_psi1 = fresnel_on_grid(&Samples::new(&psi1, 0.0, h), t, &w_psi)?;
    let at = |f: &[C64], g: &UniformGrid, w: f64| -> C64 {
        let idx = ((w - g.start) / h).round() as usize;
        f[idx]
    };
    let reflect = |f: &[C64], g: &UniformGrid, m: usize| -> C64 {
        let w = m as f64 * h;
        at(f, g, w) - at(f, g, -w)
    };

    let n = out.len;
    let free: Vec<C64> = (0..n).map(|i| reflect(&f_phi, &w_phi, i)).collect();
    let c: Vec<C64> = (0..n).map(|i| reflect(&f_psi1, &w_psi, i)).collect();
    let b = kernel_apply(kernel, |m| if m < n_line { reflect(&f_phi, &w_phi, m) } else { C64::default() }, h, n)?;
    let e = kernel_apply(kernel, |m| if m < n_line { reflect(&f_psi1, &w_psi, m) } else { C64::default() }, h, n)?;

    // T-terms
    let t3 = t_hat_correlate(scat, &f_phi, &w_phi, out)?;
    let g_psi1 = t_multiplier(scat, &psi1, h, t, n)?;
    let g_psi = t_multiplier(scat, &psi, h, t, n_line)?;
    let kg = kernel_apply(kernel, |m| g_psi.get(m).copied().unwrap_or_default(), h, n)?;
    let t_cross: Vec<C64> = g_psi1.iter().zip(&kg).map(|(a, b)| -(a + b)).collect();

    let total: Vec<C64> = (0..n).map(|i| free[i] + b[i] + c[i] + e[i] + t_cross[i] + t3[i]).collect();
    let wf = |v: Vec<C64>| WaveField { grid: *out, values: v, time: t };
    Ok(AssembledPieces { free: wf(free), b: wf(b), c: wf(c), e: wf(e), t_cross: wf(t_cross), t3: wf(t3), total: wf(total) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jost::{solve_jost_ode, solve_marchenko_kernel, KernelOptions};
    use crate::potential::Potential;

    #[test]
    fn transpose_kernel_moves_jost_to_plane_waves() {
        // int f(k,y) phi(y) dy = int e^{ikz} (phi + K^T phi)(z) dz
        let p = Potential::square_well(20.0, 1.0).unwrap();
        let kernel = solve_marchenko_kernel(&p, 12.0, &KernelOptions::resolved_for(&p)).unwrap();
        let h = 1.0 / 64.0;
        let g = UniformGrid::covering(0.0, 8.0, h).unwrap();
        let phi: Vec<C64> = g.points().map(|x| C64::new(x * (-x * x).exp(), 0.0)).collect();
        for &z in &[0.5, 1.0, 1.5] {
            let (col, _) = kernel.column_at(z, h).unwrap();
            for (m, v) in col.iter().enumerate() {
                let y = m as f64 * h;
                let (line, _) = kernel.line_at(y, h).unwrap();
                let lv = line.get(((z - y) / h).round() as usize).copied().unwrap_or(0.0);
                assert!((v - lv).abs() < 1e-12, "z={z} y={y}: column {v} line {lv}");
            }
        }
        let psi1 = kernel_transpose_apply(&kernel, &phi, h).unwrap();
        let psi: Vec<C64> = (0..phi.len()).map(|i| phi[i] + psi1.get(i).copied().unwrap_or_default()).collect();
        for &k in &[0.5, 2.0, 7.0] {
            let xs: Vec<f64> = g.points().collect();
            let f = solve_jost_ode(&p, C64::new(k, 0.0), &xs).unwrap().f_values;
            let prod: Vec<C64> = f.iter().zip(&phi).map(|(a, b)| a * b).collect();
            let lhs = gregory_split(&prod, h, &[64]);
            let rhs = filon_chirp(&psi, 0.0, h, 0.0, k, 0.0).unwrap();
            assert!((lhs - rhs).norm() < 1e-4 * lhs.norm().max(1e-3), "k={k}: {lhs} vs {rhs}");
        }
    }
}
