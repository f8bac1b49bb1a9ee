//! Finite-difference ground truth: three-point Dirichlet Laplacian plus
//! cell-averaged potential on `x_i = i h`, `i = 1..N`, diagonalized with
//! LAPACK's MRRR tridiagonal solver.

use std::os::raw::{c_char, c_int};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::WaveField;
use crate::grid::UniformGrid;
use crate::potential::Potential;

type C64 = Complex64;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleOptions {
    pub l_box: f64,
    /// Number of cells; the grid has `cells - 1` interior nodes.
    pub cells: usize,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self { l_box: 200.0, cells: 8192 }
    }
}

impl OracleOptions {
    pub fn step(&self) -> f64 {
        self.l_box / self.cells as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subspace {
    All,
    /// `lambda < 0`.
    Pp,
    /// `lambda >= 0`.
    Continuous,
}

impl Subspace {
    fn keeps(self, lambda: f64) -> bool {
        match self {
            Subspace::All => true,
            Subspace::Pp => lambda < 0.0,
            Subspace::Continuous => lambda >= 0.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct DiscreteHamiltonian {
    pub potential_id: String,
    pub options: OracleOptions,
    pub diagonal: Vec<f64>,
    /// Constant off-diagonal `-1/h^2`.
    pub off_diagonal: f64,
    pub eigenvalues: Vec<f64>,
    /// Eigenvector `n` at `n * dim .. (n + 1) * dim`, orthonormal in `l^2`.
    eigenvectors: Vec<f64>,
}

fn tridiagonal_eigen(diag: &[f64], off: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = diag.len() as c_int;
    let mut d = diag.to_vec();
    let mut e = vec![off; diag.len()];
    let mut m: c_int = 0;
    let mut w = vec![0.0; diag.len()];
    let mut z = vec![0.0; diag.len() * diag.len()];
    let mut isuppz = vec![0 as c_int; 2 * diag.len()];
    let mut tryrac: c_int = 1;
    let mut info: c_int = 0;
    let (jobz, range) = (b'V' as c_char, b'A' as c_char);
    let (vl, vu, il, iu) = (0.0, 0.0, 0 as c_int, 0 as c_int);
    let mut wq = [0.0f64; 1];
    let mut iwq = [0 as c_int; 1];
    let query: c_int = -1;
    // SAFETY: all buffers have the sizes dstemr documents for JOBZ='V', RANGE='A'.
    unsafe {
        lapack_sys::dstemr_(
            &jobz, &range, &n, d.as_mut_ptr(), e.as_mut_ptr(), &vl, &vu, &il, &iu, &mut m, w.as_mut_ptr(), z.as_mut_ptr(), &n,
            &n, isuppz.as_mut_ptr(), &mut tryrac, wq.as_mut_ptr(), &query, iwq.as_mut_ptr(), &query, &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Numerical(format!("dstemr workspace query failed (info {info})")));
    }
    let lwork = wq[0] as c_int;
    let liwork = iwq[0];
    let mut work = vec![0.0; lwork as usize];
    let mut iwork = vec![0 as c_int; liwork as usize];
    // SAFETY: as above, with the queried workspace sizes.
    unsafe {
        lapack_sys::dstemr_(
            &jobz, &range, &n, d.as_mut_ptr(), e.as_mut_ptr(), &vl, &vu, &il, &iu, &mut m, w.as_mut_ptr(), z.as_mut_ptr(), &n,
            &n, isuppz.as_mut_ptr(), &mut tryrac, work.as_mut_ptr(), &lwork, iwork.as_mut_ptr(), &liwork, &mut info,
        );
    }
    if info != 0 || m != n {
        return Err(Error::Numerical(format!("dstemr failed (info {info}, {m} of {n} eigenpairs)")));
    }
    Ok((w, z))
}

/// Discretizes `-d^2/dx^2 + V` with Dirichlet ends at `0` and `L_box` and
/// diagonalizes it.
pub fn build_hamiltonian(p: &Potential, opts: &OracleOptions) -> Result<DiscreteHamiltonian> {
    p.validate()?;
    if opts.cells < 3 || !(opts.l_box > 0.0) {
        return Err(Error::Domain(format!("oracle box needs l_box > 0 and at least 3 cells, got {opts:?}")));
    }
    if opts.l_box < p.support + 10.0 {
        return Err(Error::Domain(format!("oracle box {} too short for support {}", opts.l_box, p.support)));
    }
    let h = opts.step();
    let dim = opts.cells - 1;
    let diagonal: Vec<f64> = (1..=dim)
        .into_par_iter()
        .map(|i| {
            let x = i as f64 * h;
            2.0 / (h * h) + p.integral(x - 0.5 * h, x + 0.5 * h) / h
        })
        .collect();
    let off_diagonal = -1.0 / (h * h);
    let (eigenvalues, eigenvectors) = tridiagonal_eigen(&diagonal, off_diagonal)?;
    Ok(DiscreteHamiltonian { potential_id: p.id(), options: *opts, diagonal, off_diagonal, eigenvalues, eigenvectors })
}

impl DiscreteHamiltonian {
    pub fn dim(&self) -> usize {
        self.diagonal.len()
    }

    pub fn step(&self) -> f64 {
        self.options.step()
    }

    /// Interior nodes `h, 2h, .., (N-1) h`.
    pub fn grid(&self) -> UniformGrid {
        UniformGrid { start: self.step(), step: self.step(), len: self.dim() }
    }

    pub fn eigenvector(&self, n: usize) -> &[f64] {
        &self.eigenvectors[n * self.dim()..(n + 1) * self.dim()]
    }

    pub fn negative_count(&self) -> usize {
        self.eigenvalues.iter().filter(|&&l| l < 0.0).count()
    }

    /// Eigenfunction normalized in `L^2` (`l^2` vector over `sqrt h`).
    pub fn eigenfunction(&self, n: usize) -> WaveField {
        let s = 1.0 / self.step().sqrt();
        WaveField { grid: self.grid(), values: self.eigenvector(n).iter().map(|&v| C64::new(v * s, 0.0)).collect(), time: 0.0 }
    }

    /// Largest `|<e_m, e_n>| - delta_mn` over a sample of index pairs.
    pub fn orthonormality_defect(&self, stride: usize) -> f64 {
        let idx: Vec<usize> = (0..self.dim()).step_by(stride.max(1)).collect();
        idx.par_iter()
            .map(|&a| {
                idx.iter().fold(0.0f64, |m, &b| {
                    let d: f64 = self.eigenvector(a).iter().zip(self.eigenvector(b)).map(|(x, y)| x * y).sum();
                    m.max((d - if a == b { 1.0 } else { 0.0 }).abs())
                })
            })
            .reduce(|| 0.0, f64::max)
    }

    /// Samples `phi` on the oracle grid (cubic interpolation, zero outside).
    pub fn sample(&self, phi: &WaveField) -> WaveField {
        if phi.grid == self.grid() {
            return phi.clone();
        }
        phi.resample(self.grid())
    }

    fn check(&self, phi: &WaveField) -> Result<()> {
        if phi.grid != self.grid() {
            return Err(Error::GridMismatch("field is not on the oracle grid; use DiscreteHamiltonian::sample".into()));
        }
        Ok(())
    }

    /// Expansion coefficients `(phi, e_n)` in `l^2`.
    pub fn coefficients(&self, phi: &WaveField) -> Result<Vec<C64>> {
        self.check(phi)?;
        Ok((0..self.dim())
            .into_par_iter()
            .map(|n| self.eigenvector(n).iter().zip(&phi.values).map(|(&e, &v)| v * e).sum())
            .collect())
    }

    fn synthesize(&self, coeffs: &[C64]) -> Vec<C64> {
        let dim = self.dim();
        const BLOCK: usize = 256;
        (0..dim.div_ceil(BLOCK))
            .into_par_iter()
            .map(|b| {
                let mut acc = vec![C64::new(0.0, 0.0); dim];
                for n in b * BLOCK..((b + 1) * BLOCK).min(dim) {
                    let c = coeffs[n];
                    if c == C64::new(0.0, 0.0) {
                        continue;
                    }
                    acc.iter_mut().zip(self.eigenvector(n)).for_each(|(a, &e)| *a += c * e);
                }
                acc
            })
            .reduce(
                || vec![C64::new(0.0, 0.0); dim],
                |mut a, b| {
                    a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                    a
                },
            )
    }

    /// `sum_n e^{-i lambda_n t} (phi, e_n) e_n` over the chosen subspace, at
    /// several times.
    pub fn evolve_many(&self, phi: &WaveField, times: &[f64], subspace: Subspace) -> Result<Vec<WaveField>> {
        let c = self.coefficients(phi)?;
        Ok(times
            .iter()
            .map(|&t| {
                let ct: Vec<C64> = c
                    .iter()
                    .zip(&self.eigenvalues)
                    .map(|(&a, &l)| if subspace.keeps(l) { a * C64::from_polar(1.0, -l * t) } else { C64::new(0.0, 0.0) })
                    .collect();
                WaveField { grid: self.grid(), values: self.synthesize(&ct), time: t }
            })
            .collect())
    }

    /// Projection onto `lambda < 0` eigenvectors.
    pub fn project_pp(&self, phi: &WaveField) -> Result<WaveField> {
        Ok(self.evolve_many(phi, &[0.0], Subspace::Pp)?.remove(0))
    }

    /// Projection onto `lambda >= 0` eigenvectors.
    pub fn project_continuous(&self, phi: &WaveField) -> Result<WaveField> {
        Ok(self.evolve_many(phi, &[0.0], Subspace::Continuous)?.remove(0))
    }

    /// `(x, y)` entry of the discrete propagator, as a kernel (divided by `h`).
    pub fn propagator_entry(&self, t: f64, x: f64, y: f64) -> Result<C64> {
        let h = self.step();
        let i = (x / h).round() as usize;
        let j = (y / h).round() as usize;
        if i == 0 || j == 0 || i > self.dim() || j > self.dim() || (x - i as f64 * h).abs() > 1e-9 || (y - j as f64 * h).abs() > 1e-9 {
            return Err(Error::GridMismatch(format!("({x}, {y}) is not an interior oracle node")));
        }
        Ok((0..self.dim())
            .into_par_iter()
            .map(|n| {
                let e = self.eigenvector(n);
                C64::from_polar(e[i - 1] * e[j - 1], -self.eigenvalues[n] * t)
            })
            .sum::<C64>()
            / h)
    }

    /// Discrete `L^2` norm `(h sum |u_i|^2)^{1/2}`: the trapezoid rule with the
    /// zero boundary values included.
    pub fn norm_l2(&self, u: &WaveField) -> f64 {
        (self.step() * u.values.iter().map(|v| v.norm_sqr()).sum::<f64>()).sqrt()
    }

    /// Applies the discrete operator.
    pub fn apply(&self, u: &[C64]) -> Vec<C64> {
        let n = u.len();
        (0..n)
            .map(|i| {
                let mut v = u[i] * self.diagonal[i];
                if i > 0 {
                    v += u[i - 1] * self.off_diagonal;
                }
                if i + 1 < n {
                    v += u[i + 1] * self.off_diagonal;
                }
                v
            })
            .collect()
    }
}

/// Crank-Nicolson steps `(1 + i tau H/2) u' = (1 - i tau H/2) u`.
pub fn crank_nicolson(ham: &DiscreteHamiltonian, phi: &WaveField, t: f64, steps: usize) -> Result<WaveField> {
    if steps == 0 {
        return Err(Error::Domain("crank_nicolson needs at least one step".into()));
    }
    ham.check(phi)?;
    let n = ham.dim();
    let tau = t / steps as f64;
    let a = C64::new(0.0, 0.5 * tau);
    let off = a * ham.off_diagonal;
    // forward elimination factors for the constant-off-diagonal system
    let mut cp = vec![C64::new(0.0, 0.0); n];
    let mut denom = vec![C64::new(0.0, 0.0); n];
    for i in 0..n {
        let b = C64::new(1.0, 0.0) + a * ham.diagonal[i];
        let d = if i == 0 { b } else { b - off * cp[i - 1] };
        if d.norm() < 1e-300 {
            return Err(Error::Numerical("singular Crank-Nicolson system".into()));
        }
        denom[i] = d;
        cp[i] = off / d;
    }
    let mut u = phi.values.clone();
    let mut rhs = vec![C64::new(0.0, 0.0); n];
    for _ in 0..steps {
        for i in 0..n {
            let mut r = u[i] * (C64::new(1.0, 0.0) - a * ham.diagonal[i]);
            if i > 0 {
                r -= off * u[i - 1];
            }
            if i + 1 < n {
                r -= off * u[i + 1];
            }
            rhs[i] = r;
        }
        // forward sweep then back substitution
        for i in 0..n {
            let prev = if i == 0 { C64::new(0.0, 0.0) } else { off * u[i - 1] };
            u[i] = (rhs[i] - prev) / denom[i];
        }
        for i in (0..n - 1).rev() {
            let next = cp[i] * u[i + 1];
            u[i] -= next;
        }
    }
    Ok(WaveField { grid: phi.grid, values: u, time: t })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_free_box_spectrum() {
        let opts = OracleOptions { l_box: 20.0, cells: 400 };
        let h = build_hamiltonian(&Potential::zero(), &opts).unwrap();
        assert_eq!(h.negative_count(), 0);
        for n in 1..=10 {
            let e = (n as f64 * std::f64::consts::PI / 20.0).powi(2);
            assert!((h.eigenvalues[n - 1] - e).abs() < 1e-3 * e);
        }
        assert!(h.orthonormality_defect(7) < 1e-10);
    }

    #[test]
    fn crank_nicolson_is_unitary_and_second_order() {
        let opts = OracleOptions { l_box: 20.0, cells: 400 };
        let data = WaveField::from_real_fn(UniformGrid::covering(0.0, 8.0, 0.01).unwrap(), |x| x * (-x * x).exp());
        let well = build_hamiltonian(&Potential::square_well(4.0, 1.0).unwrap(), &opts).unwrap();
        let phi = well.sample(&data);
        let u = crank_nicolson(&well, &phi, 1.0, 50).unwrap();
        assert!((well.norm_l2(&u) - well.norm_l2(&phi)).abs() < 1e-12);

        let ham = build_hamiltonian(&Potential::zero(), &opts).unwrap();
        let phi = ham.sample(&data);
        let exact = ham.evolve_many(&phi, &[1.0], Subspace::All).unwrap().remove(0);
        assert!((ham.norm_l2(&exact) - ham.norm_l2(&phi)).abs() < 1e-12);
        let r1 = ham.norm_l2(&crank_nicolson(&ham, &phi, 1.0, 200).unwrap().sub(&exact).unwrap());
        let r2 = ham.norm_l2(&crank_nicolson(&ham, &phi, 1.0, 400).unwrap().sub(&exact).unwrap());
        assert!((r1 / r2 - 4.0).abs() < 0.2, "{r1} {r2}");
    }
}
