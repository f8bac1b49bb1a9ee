//! Scattering matrix, its Fourier transform, bound states and the
//! pure-point projector.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::WaveField;
use crate::grid::UniformGrid;
use crate::jost::{jost_at_origin, solve_jost_ode};
use crate::potential::Potential;
use crate::quadrature::gregory_split;

type C64 = Complex64;
const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Symmetric wavenumber grid `k = +-j dk`, `j = 1..=n_per_sign`, `dk = k_max / n_per_sign`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KGrid {
    pub k_max: f64,
    pub n_per_sign: usize,
}

impl Default for KGrid {
    fn default() -> Self {
        Self { k_max: 32.0, n_per_sign: 4096 }
    }
}

impl KGrid {
    pub fn new(k_max: f64, n_per_sign: usize) -> Result<Self> {
        if !(k_max > 0.0) || n_per_sign == 0 {
            return Err(Error::Domain("k grid needs k_max > 0 and at least one point".into()));
        }
        Ok(Self { k_max, n_per_sign })
    }

    pub fn dk(&self) -> f64 {
        self.k_max / self.n_per_sign as f64
    }

    pub fn positive(&self) -> Vec<f64> {
        let dk = self.dk();
        (1..=self.n_per_sign).map(|j| j as f64 * dk).collect()
    }

    /// All grid points in increasing order.
    pub fn full(&self) -> Vec<f64> {
        let pos = self.positive();
        pos.iter().rev().map(|k| -k).chain(pos.iter().copied()).collect()
    }

    /// Raised-cosine taper over the outer `fraction` of `[0, k_max]`.
    pub fn window(&self, k: f64, fraction: f64) -> f64 {
        let a = k.abs();
        let start = (1.0 - fraction) * self.k_max;
        if a <= start || fraction <= 0.0 {
            1.0
        } else if a >= self.k_max {
            0.0
        } else {
            0.5 * (1.0 + (std::f64::consts::PI * (a - start) / (fraction * self.k_max)).cos())
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ScatteringOptions {
    pub window_fraction: f64,
    pub z_max: f64,
    pub dz: f64,
}

impl Default for ScatteringOptions {
    fn default() -> Self {
        Self { window_fraction: 0.1, z_max: 200.0, dz: 1.0 / 32.0 }
    }
}

/// Samples of `T~(z) = (1/2 pi) int T(k) e^{ikz} dk` on `z = z0 + i dz`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct THat {
    pub grid: UniformGrid,
    pub values: Vec<f64>,
}

impl THat {
    pub fn value(&self, z: f64) -> f64 {
        let r = (z - self.grid.start) / self.grid.step;
        if r < 0.0 || r > (self.grid.len - 1) as f64 {
            return 0.0;
        }
        crate::quadrature::interp_cubic(&self.values, self.grid.start, self.grid.step, z)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScatteringData {
    pub potential_id: String,
    pub k_grid: KGrid,
    /// Increasing wavenumbers `-k_max .. k_max` (zero excluded).
    pub k: Vec<f64>,
    /// `f(k, 0)`.
    pub jost_zero: Vec<C64>,
    pub s_values: Vec<C64>,
    pub t_values: Vec<C64>,
    pub t_hat: THat,
    pub t_hat_l1: f64,
    /// `int |T~|` over `|z| > z_max / 2`.
    pub t_hat_tail_mass: f64,
    /// Largest imaginary residue of the transform (zero in exact arithmetic).
    pub t_hat_imag_residue: f64,
    /// `|T(k)|` at the largest grid wavenumber.
    pub t_edge: f64,
    /// `|f(0, 0)|`.
    pub jost_zero_energy: f64,
    pub options: ScatteringOptions,
}

impl ScatteringData {
    /// `max | |S| - 1 |` over the grid.
    pub fn unimodularity_defect(&self) -> f64 {
        self.s_values.iter().fold(0.0, |m, s| m.max((s.norm() - 1.0).abs()))
    }

    /// `max |S(-k) - conj S(k)|` over the grid.
    pub fn conjugation_defect(&self) -> f64 {
        let n = self.k.len();
        (0..n / 2).fold(0.0, |m, j| m.max((self.s_values[j] - self.s_values[n - 1 - j].conj()).norm()))
    }

    /// Index of `k` in [`Self::k`], if it is a grid point.
    pub fn index_of(&self, k: f64) -> Option<usize> {
        let dk = self.k_grid.dk();
        let j = (k.abs() / dk).round();
        if j < 1.0 || j as usize > self.k_grid.n_per_sign || (k.abs() / dk - j).abs() > 1e-9 {
            return None;
        }
        let j = j as usize;
        let n = self.k_grid.n_per_sign;
        Some(if k > 0.0 { n - 1 + j } else { n - j })
    }

    pub fn write_json<W: std::io::Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }
}

/// `S(k) = f(-k,0)/f(k,0)` on the grid, with both Jost values integrated
/// independently, and the windowed transform of `T = S - 1`.
pub fn scattering_matrix(p: &Potential, grid: &KGrid, opts: &ScatteringOptions) -> Result<ScatteringData> {
    let (f00, _) = jost_at_origin(p, C64::new(0.0, 0.0))?;
    if f00.norm() < 1e-8 {
        return Err(Error::Resonance { magnitude: f00.norm() });
    }
    let k = grid.full();
    let jost: Vec<C64> = k
        .par_iter()
        .map(|&kk| jost_at_origin_signed(p, kk))
        .collect::<Result<Vec<C64>>>()?;
    for (&kk, f) in k.iter().zip(&jost) {
        if f.norm() < 1e-12 {
            return Err(Error::Conditioning { k: kk, magnitude: f.norm() });
        }
    }
    let n = k.len();
    let s_values: Vec<C64> = (0..n).map(|i| jost[n - 1 - i] / jost[i]).collect();
    let t_values: Vec<C64> = s_values.iter().map(|s| s - 1.0).collect();

    let dk = grid.dk();
    let weighted: Vec<(f64, C64)> =
        k.iter().zip(&t_values).map(|(&kk, &t)| (kk, t * grid.window(kk, opts.window_fraction) * (dk / TWO_PI))).collect();
    let zgrid = UniformGrid::covering(-opts.z_max, opts.z_max, opts.dz)?;
    let transform: Vec<C64> = (0..zgrid.len)
        .into_par_iter()
        .map(|i| {
            let z = zgrid.point(i);
            let mut acc = C64::new(0.0, 0.0);
            for &(kk, w) in &weighted {
                acc += w * C64::from_polar(1.0, kk * z);
            }
            acc
        })
        .collect();
    let t_hat_imag_residue = transform.iter().fold(0.0f64, |m, v| m.max(v.im.abs()));
    let values: Vec<f64> = transform.iter().map(|v| v.re).collect();
    let abs: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    let t_hat_l1 = crate::quadrature::trapezoid(&abs, opts.dz);
    let tail: Vec<f64> = zgrid.points().zip(&abs).map(|(z, a)| if z.abs() > 0.5 * opts.z_max { *a } else { 0.0 }).collect();
    let t_hat_tail_mass = crate::quadrature::trapezoid(&tail, opts.dz);
    Ok(ScatteringData {
        potential_id: p.id(),
        k_grid: *grid,
        t_edge: t_values[n - 1].norm(),
        k,
        jost_zero: jost,
        s_values,
        t_values,
        t_hat: THat { grid: zgrid, values },
        t_hat_l1,
        t_hat_tail_mass,
        t_hat_imag_residue,
        jost_zero_energy: f00.norm(),
        options: *opts,
    })
}

/// `f(k, 0)` for real `k` of either sign. Negative `k` is integrated with
/// the same ODE solver (real `k` keeps `Im k = 0`).
fn jost_at_origin_signed(p: &Potential, k: f64) -> Result<C64> {
    Ok(jost_at_origin(p, C64::new(k, 0.0))?.0)
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct BoundStateOptions {
    pub scan_points: usize,
    pub kappa_min: f64,
    pub tol: f64,
    pub sample_step: f64,
}

impl Default for BoundStateOptions {
    fn default() -> Self {
        Self { scan_points: 2000, kappa_min: 1e-6, tol: 1e-10, sample_step: 1.0 / 256.0 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundStateSet {
    pub potential: Potential,
    pub kappas: Vec<f64>,
    pub energies: Vec<f64>,
    /// `||f(i kappa_j, .)||_2`.
    pub raw_norms: Vec<f64>,
    pub sample_grid: Option<UniformGrid>,
    /// Normalized eigenfunctions on `sample_grid`.
    pub eigenfunctions: Vec<Vec<f64>>,
    /// `f(i kappa_j, 0)` after normalization.
    pub boundary_values: Vec<f64>,
    pub warnings: Vec<String>,
}

impl BoundStateSet {
    pub fn len(&self) -> usize {
        self.kappas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kappas.is_empty()
    }

    /// Normalized eigenfunction `j` sampled on an arbitrary grid.
    pub fn eigenfunction_on(&self, j: usize, grid: &UniformGrid) -> Result<Vec<f64>> {
        let kappa = self.kappas[j];
        let xs: Vec<f64> = grid.points().collect();
        if xs[0] < 0.0 {
            return Err(Error::Domain("eigenfunctions live on x >= 0".into()));
        }
        let s = solve_jost_ode(&self.potential, C64::new(0.0, kappa), &xs)?;
        Ok(s.f_values.iter().map(|f| f.re / self.raw_norms[j]).collect())
    }

    /// `max_j |<f_j, f_l> - delta_jl|` on the sample grid.
    pub fn orthonormality_defect(&self) -> f64 {
        let Some(g) = self.sample_grid else { return 0.0 };
        let splits = split_indices(&self.potential, &g);
        let mut worst = 0.0f64;
        for a in 0..self.len() {
            for b in 0..self.len() {
                let prod: Vec<f64> =
                    self.eigenfunctions[a].iter().zip(&self.eigenfunctions[b]).map(|(x, y)| x * y).collect();
                let v = gregory_split(&prod, g.step, &splits) + tail_overlap(self, a, b, g.end());
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((v - target).abs());
            }
        }
        worst
    }

    /// Right end of the range a projector grid must cover: the eigenfunctions
    /// have decayed by `1e-6` there.
    pub fn required_extent(&self) -> f64 {
        let kappa_min = self.kappas.iter().cloned().fold(f64::INFINITY, f64::min);
        if kappa_min.is_finite() {
            self.potential.support + (1e6f64).ln() / kappa_min
        } else {
            0.0
        }
    }

    /// Projector onto the span of the eigenfunctions, orthonormalized in
    /// the trapezoid inner product of `grid` so that it is an exact
    /// orthogonal projector there.
    pub fn projector_on(&self, grid: &UniformGrid) -> Result<DiscreteProjector> {
        if self.is_empty() {
            return Ok(DiscreteProjector { grid: *grid, vectors: Vec::new() });
        }
        if grid.start.abs() > 1e-12 {
            return Err(Error::GridMismatch("the projector needs a grid starting at x = 0".into()));
        }
        let needed = self.required_extent();
        if grid.end() < needed {
            return Err(Error::Coverage(format!(
                "grid ends at {} but the eigenfunctions need x up to {needed:.2}",
                grid.end()
            )));
        }
        let mut vectors: Vec<Vec<f64>> = Vec::new();
        let ip = |a: &[f64], b: &[f64]| {
            let prod: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
            crate::quadrature::trapezoid(&prod, grid.step)
        };
        for j in 0..self.len() {
            let mut v = self.eigenfunction_on(j, grid)?;
            for _ in 0..2 {
                for q in &vectors {
                    let c = ip(&v, q);
                    v.iter_mut().zip(q).for_each(|(a, b)| *a -= c * b);
                }
            }
            let nrm = ip(&v, &v).sqrt();
            v.iter_mut().for_each(|a| *a /= nrm);
            vectors.push(v);
        }
        Ok(DiscreteProjector { grid: *grid, vectors })
    }
}

/// Finite-rank projector `sum_j e_j (phi, e_j)` on one grid.
#[derive(Clone, Debug)]
pub struct DiscreteProjector {
    pub grid: UniformGrid,
    pub vectors: Vec<Vec<f64>>,
}

impl DiscreteProjector {
    pub fn apply(&self, phi: &WaveField) -> Result<WaveField> {
        if phi.grid != self.grid {
            return Err(Error::GridMismatch("field and projector grids differ".into()));
        }
        let mut out = vec![C64::new(0.0, 0.0); phi.len()];
        for e in &self.vectors {
            let prod: Vec<C64> = phi.values.iter().zip(e).map(|(a, b)| a * *b).collect();
            let c = crate::quadrature::trapezoid(&prod, self.grid.step);
            out.iter_mut().zip(e).for_each(|(o, b)| *o += c * *b);
        }
        Ok(WaveField { grid: phi.grid, values: out, time: phi.time })
    }

    /// `phi - P phi`.
    pub fn complement(&self, phi: &WaveField) -> Result<WaveField> {
        phi.sub(&self.apply(phi)?)
    }
}

/// `P_pp phi = sum_j f_j (phi, f_j)`.
pub fn apply_pp_projector(bound: &BoundStateSet, phi: &WaveField) -> Result<WaveField> {
    bound.projector_on(&phi.grid)?.apply(phi)
}

/// `P_c phi = phi - P_pp phi`.
pub fn apply_pc_projector(bound: &BoundStateSet, phi: &WaveField) -> Result<WaveField> {
    bound.projector_on(&phi.grid)?.complement(phi)
}

fn split_indices(p: &Potential, g: &UniformGrid) -> Vec<usize> {
    p.breakpoints().iter().filter_map(|&b| g.node_index(b)).collect()
}

/// `int_X^inf f_a f_b` where both are pure exponentials.
fn tail_overlap(bs: &BoundStateSet, a: usize, b: usize, x: f64) -> f64 {
    let (ka, kb) = (bs.kappas[a], bs.kappas[b]);
    (-(ka + kb) * x).exp() / (ka + kb) / (bs.raw_norms[a] * bs.raw_norms[b])
}

/// Zeros of `kappa -> f(i kappa, 0)` on `(kappa_min, kappa_max]`.
pub fn find_bound_states(p: &Potential, kappa_max: Option<f64>, opts: &BoundStateOptions) -> Result<BoundStateSet> {
    let depth = p.max_well_depth();
    let kmax = kappa_max.unwrap_or(1.01 * depth.sqrt() + 0.01);
    if !(kmax > 0.0) {
        return Err(Error::Domain("kappa_max must be positive".into()));
    }
    let mut set = BoundStateSet {
        potential: p.clone(),
        kappas: Vec::new(),
        energies: Vec::new(),
        raw_norms: Vec::new(),
        sample_grid: None,
        eigenfunctions: Vec::new(),
        boundary_values: Vec::new(),
        warnings: Vec::new(),
    };
    if depth == 0.0 && kappa_max.is_none() {
        return Ok(set);
    }
    let g = |kappa: f64| -> Result<f64> { Ok(jost_at_origin(p, C64::new(0.0, kappa))?.0.re) };
    let n = opts.scan_points.max(10);
    let lo = opts.kappa_min;
    let kappas: Vec<f64> = (0..=n).map(|i| lo + (kmax - lo) * i as f64 / n as f64).collect();
    let vals: Vec<f64> = kappas.par_iter().map(|&k| g(k)).collect::<Result<Vec<f64>>>()?;
    let scale = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut roots = Vec::new();
    for i in 0..n {
        let (a, b) = (vals[i], vals[i + 1]);
        if a == 0.0 {
            roots.push(kappas[i]);
            continue;
        }
        if a * b < 0.0 {
            let (mut x0, mut x1, mut f0) = (kappas[i], kappas[i + 1], a);
            while x1 - x0 > opts.tol {
                let m = 0.5 * (x0 + x1);
                let fm = g(m)?;
                if fm == 0.0 {
                    x0 = m;
                    x1 = m;
                    break;
                }
                if (fm < 0.0) == (f0 < 0.0) {
                    x0 = m;
                    f0 = fm;
                } else {
                    x1 = m;
                }
            }
            let root = 0.5 * (x0 + x1);
            if i + 2 >= n {
                set.warnings.push(format!("root kappa = {root:.6} lies at the search window edge {kmax:.6}"));
            }
            roots.push(root);
        } else if i > 0 && i + 1 < n && vals[i - 1] * a > 0.0 {
            // local minimum of |g| without a sign change on either side
            let (p0, p1, p2) = (vals[i - 1].abs(), a.abs(), b.abs());
            if p1 < p0 && p1 < p2 && p1 < 1e-3 * scale {
                set.warnings.push(format!(
                    "possible double root near kappa = {:.6} (|f| = {p1:.3e}); refine the scan",
                    kappas[i]
                ));
            }
        }
    }
    if vals[n].abs() < 1e-6 * scale {
        set.warnings.push(format!("f(i kappa, 0) nearly vanishes at the window edge kappa = {kmax}"));
    }
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if roots.is_empty() {
        return Ok(set);
    }
    let kappa_min = roots[0];
    let tail = (1e12f64).ln() / (2.0 * kappa_min);
    let grid = UniformGrid::covering(0.0, p.support + tail, opts.sample_step)?;
    let xs: Vec<f64> = grid.points().collect();
    let splits = split_indices(p, &grid);
    let i_end = grid.len - 1;
    let x_end = grid.end();
    for &kappa in &roots {
        let s = solve_jost_ode(p, C64::new(0.0, kappa), &xs)?;
        let f: Vec<f64> = s.f_values.iter().map(|v| v.re).collect();
        let sq: Vec<f64> = f.iter().map(|v| v * v).collect();
        let norm2 = gregory_split(&sq[..=i_end], grid.step, &splits) + (-2.0 * kappa * x_end).exp() / (2.0 * kappa);
        let nrm = norm2.sqrt();
        set.boundary_values.push(f[0] / nrm);
        set.eigenfunctions.push(f.iter().map(|v| v / nrm).collect());
        set.kappas.push(kappa);
        set.energies.push(-kappa * kappa);
        set.raw_norms.push(nrm);
    }
    set.sample_grid = Some(grid);
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_scattering_is_trivial() {
        let d = scattering_matrix(&Potential::zero(), &KGrid::new(8.0, 256).unwrap(), &ScatteringOptions::default()).unwrap();
        assert!(d.t_values.iter().all(|t| t.norm() < 1e-12));
        assert!(d.t_hat_l1 < 1e-10);
        assert!(find_bound_states(&Potential::zero(), None, &BoundStateOptions::default()).unwrap().is_empty());
    }

    #[test]
    fn grid_indexing() {
        let g = KGrid::new(4.0, 8).unwrap();
        let full = g.full();
        assert_eq!(full.len(), 16);
        assert_eq!(full[0], -4.0);
        assert_eq!(full[8], 0.5);
        assert!((g.window(3.8, 0.1) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn deep_well_bound_states_are_orthonormal() {
        let p = Potential::square_well(25.0, 1.0).unwrap();
        let b = find_bound_states(&p, None, &BoundStateOptions::default()).unwrap();
        assert_eq!(b.len(), 2);
        assert!(b.orthonormality_defect() < 1e-6, "{}", b.orthonormality_defect());
        assert!(b.boundary_values.iter().all(|v| v.abs() < 1e-8));
    }
}
