//! Jost solutions by backward ODE integration and through the Marchenko
//! transformation kernel `K(x,y) = h((x+y)/2, (y-x)/2)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{integrate, OdeOptions};
use crate::potential::{MomentProfile, Potential};
use crate::quadrature::filon_chirp_split;

type C64 = Complex64;
const I: C64 = C64 { re: 0.0, im: 1.0 };

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct JostSolution {
    pub k: C64,
    pub x_grid: Vec<f64>,
    pub f_values: Vec<C64>,
    pub f_prime_values: Vec<C64>,
}

impl JostSolution {
    /// `d(k,x) = f(k,x) - e^{ikx}`.
    pub fn d_values(&self) -> Vec<C64> {
        self.x_grid.iter().zip(&self.f_values).map(|(&x, &f)| f - (I * self.k * x).exp()).collect()
    }

    /// Wronskian `f g' - f' g` against another solution on the same grid.
    pub fn wronskian_with(&self, other: &JostSolution) -> Vec<C64> {
        (0..self.x_grid.len())
            .map(|i| self.f_values[i] * other.f_prime_values[i] - self.f_prime_values[i] * other.f_values[i])
            .collect()
    }
}

fn check_k(k: C64) -> Result<()> {
    if !(k.re.is_finite() && k.im.is_finite()) {
        return Err(Error::Domain(format!("non-finite wavenumber {k}")));
    }
    if k.im < 0.0 {
        return Err(Error::Domain(format!("Jost solutions need Im k >= 0, got k = {k}")));
    }
    Ok(())
}

/// Integration stops (descending) for the nodes below `L_V`, with every
/// breakpoint inserted; returns the stops and, per stop, the grid index it
/// came from.
fn backward_stops(p: &Potential, nodes: &[f64]) -> (Vec<f64>, Vec<Option<usize>>) {
    let l = p.support;
    let mut items: Vec<(f64, Option<usize>)> =
        nodes.iter().enumerate().filter(|(_, &x)| x < l).map(|(i, &x)| (x, Some(i))).collect();
    let lowest = items.iter().map(|t| t.0).fold(l, f64::min);
    for b in p.breakpoints() {
        if b < l && b > lowest {
            items.push((b, None));
        }
    }
    items.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    (items.iter().map(|t| t.0).collect(), items.iter().map(|t| t.1).collect())
}

/// Integrates the Jost solution backward from `L_V` and samples it on `x_grid`.
pub fn solve_jost_ode(p: &Potential, k: C64, x_grid: &[f64]) -> Result<JostSolution> {
    solve_jost_ode_with(p, k, x_grid, &OdeOptions::default())
}

pub fn solve_jost_ode_with(p: &Potential, k: C64, x_grid: &[f64], opts: &OdeOptions) -> Result<JostSolution> {
    check_k(k)?;
    if x_grid.iter().any(|&x| x < 0.0 || !x.is_finite()) {
        return Err(Error::Domain("x_grid must be finite and non-negative".into()));
    }
    if x_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("x_grid must be increasing".into()));
    }
    let l = p.support;
    let n = x_grid.len();
    let mut f = vec![C64::new(0.0, 0.0); n];
    let mut fp = vec![C64::new(0.0, 0.0); n];
    for (i, &x) in x_grid.iter().enumerate() {
        if x >= l {
            let e = (I * k * x).exp();
            f[i] = e;
            fp[i] = I * k * e;
        }
    }
    let (stops, origin) = backward_stops(p, x_grid);
    if p.is_zero() {
        for (i, &x) in x_grid.iter().enumerate() {
            f[i] = (I * k * x).exp();
            fp[i] = I * k * f[i];
        }
    } else if !stops.is_empty() {
        let e = (I * k * l).exp();
        let y0 = [e, I * k * e];
        let v = |x: f64, lo: f64, hi: f64| p.value_in(x, lo, hi);
        let states = integrate(&v, k * k, l, y0, &stops, opts)?;
        for (s, o) in states.iter().zip(&origin) {
            if let Some(i) = *o {
                f[i] = s[0];
                fp[i] = s[1];
            }
        }
    }
    Ok(JostSolution { k, x_grid: x_grid.to_vec(), f_values: f, f_prime_values: fp })
}

/// `(f(k,0), f'(k,0))`.
pub fn jost_at_origin(p: &Potential, k: C64) -> Result<(C64, C64)> {
    let s = solve_jost_ode(p, k, &[0.0])?;
    Ok((s.f_values[0], s.f_prime_values[0]))
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct KernelOptions {
    /// Spacing of the `(x, y)` lattice; the `(u, v)` lattice uses half of it.
    pub dx: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Combine solutions at two resolutions to cancel the leading error term.
    pub richardson: bool,
}

impl Default for KernelOptions {
    fn default() -> Self {
        Self { dx: 1.0 / 64.0, tol: 1e-10, max_iter: 200, richardson: true }
    }
}

impl KernelOptions {
    /// Default options with the lattice halved until `max|V| dx^2` is small
    /// enough for the kernel's oscillation scale `1/sqrt(max|V|)`.
    pub fn resolved_for(p: &Potential) -> Self {
        let mut o = Self::default();
        let vmax = p.max_abs_value();
        while vmax * o.dx * o.dx > 2e-3 && o.dx > 1.0 / 1024.0 {
            o.dx *= 0.5;
        }
        o
    }
}

/// Sampled `h(u, v)` on `u = i delta, v = j delta`, `0 <= j <= i <= n`,
/// with `h = 0` for `u >= L_V`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KernelField {
    pub delta: f64,
    pub n: usize,
    pub support: f64,
    pub x_max: f64,
    pub breakpoints: Vec<f64>,
    h: Vec<f64>,
    /// Successive sup-norm increments of the Picard sweep (coarse grid).
    pub increments: Vec<f64>,
    /// Last observed increment ratio.
    pub contraction: f64,
    pub iterations: usize,
}

#[inline]
fn tri(i: usize, j: usize) -> usize {
    i * (i + 1) / 2 + j
}

struct PicardResult {
    h: Vec<f64>,
    increments: Vec<f64>,
}

/// Trapezoid discretization of the integral equation, iterated from the
/// source term.
fn picard(p: &Potential, delta: f64, n: usize, tol: f64, max_iter: usize) -> Result<PicardResult> {
    let size = tri(n, n) + 1;
    let node = |i: usize| i as f64 * delta;
    let vr: Vec<f64> = (0..=n).map(|i| p.value_side(node(i), crate::potential::Side::Right)).collect();
    let vl: Vec<f64> = (0..=n).map(|i| p.value_side(node(i), crate::potential::Side::Left)).collect();
    // h0(u) = 1/2 int_u^L V, by exact cell integrals
    let mut h0 = vec![0.0; n + 1];
    for i in (0..n).rev() {
        h0[i] = h0[i + 1] + 0.5 * p.integral(node(i), node(i + 1));
    }
    let mut h = vec![0.0; size];
    for i in 0..=n {
        for j in 0..=i {
            h[tri(i, j)] = h0[i];
        }
    }
    let mut g = vec![0.0; size];
    let mut a_row = vec![0.0; n + 1];
    let mut increments = Vec::new();
    let half = 0.5 * delta;
    for _ in 0..max_iter {
        // g(m, j) = int_0^{v_j} V(s_m - t) h(s_m, t) dt
        for m in 0..=n {
            let base = tri(m, 0);
            g[base] = 0.0;
            for j in 1..=m {
                let val = g[base + j - 1] + half * (vl[m - j + 1] * h[base + j - 1] + vr[m - j] * h[base + j]);
                g[base + j] = val;
            }
        }
        // new h(i, j) = h0(i) + int_{u_i}^{L} g(s, v_j) ds, accumulated from the top row
        let mut diff = 0.0f64;
        let mut sup = 0.0f64;
        a_row.iter_mut().for_each(|a| *a = 0.0);
        for i in (0..=n).rev() {
            let base = tri(i, 0);
            for j in 0..=i {
                let upper = if i < n && j <= i + 1 { g[tri(i + 1, j)] } else { 0.0 };
                if i < n {
                    a_row[j] += half * (g[base + j] + upper);
                }
                let new = h0[i] + a_row[j];
                diff = diff.max((new - h[base + j]).abs());
                sup = sup.max(new.abs());
                h[base + j] = new;
            }
        }
        increments.push(diff);
        if !diff.is_finite() {
            break;
        }
        if diff < tol * sup.max(1.0) {
            return Ok(PicardResult { h, increments });
        }
    }
    let k = increments.len();
    let contraction = if k >= 2 { increments[k - 1] / increments[k - 2] } else { f64::NAN };
    Err(Error::Iteration { iterations: k, last_increment: increments.last().copied().unwrap_or(f64::NAN), contraction })
}

/// Solves the kernel equation on the `(u, v)` lattice.
pub fn solve_marchenko_kernel(p: &Potential, x_max: f64, opts: &KernelOptions) -> Result<KernelField> {
    if x_max < p.support {
        return Err(Error::Domain(format!("X_max = {x_max} is below L_V = {}", p.support)));
    }
    if !(opts.dx > 0.0) {
        return Err(Error::Domain("kernel lattice spacing must be positive".into()));
    }
    let first = p.first_moment();
    if !first.is_finite() {
        return Err(Error::Data("first moment is not finite".into()));
    }
    let delta = 0.5 * opts.dx;
    let n = (p.support / delta - 1e-9).ceil() as usize;
    let coarse = picard(p, delta, n, opts.tol, opts.max_iter)?;
    let increments = coarse.increments.clone();
    let mut h = coarse.h;
    if opts.richardson && !p.is_zero() {
        let fine = picard(p, 0.5 * delta, 2 * n, opts.tol, opts.max_iter)?;
        for i in 0..=n {
            for j in 0..=i {
                let c = h[tri(i, j)];
                let f = fine.h[tri(2 * i, 2 * j)];
                h[tri(i, j)] = (4.0 * f - c) / 3.0;
            }
        }
    }
    let k = increments.len();
    let contraction = if k >= 2 && increments[k - 2] > 0.0 { increments[k - 1] / increments[k - 2] } else { 0.0 };
    let breakpoints = p.breakpoints();
    Ok(KernelField { delta, n, support: p.support, x_max, breakpoints, h, increments, contraction, iterations: k })
}

impl KernelField {
    pub fn dx(&self) -> f64 {
        2.0 * self.delta
    }

    /// `h` at lattice node `(i, j)`.
    #[inline]
    pub fn h_node(&self, i: usize, j: usize) -> f64 {
        if j > i || i >= self.n {
            0.0
        } else {
            self.h[tri(i, j)]
        }
    }

    /// Bilinear interpolation of `h(u, v)`; zero outside `0 <= v <= u < L_V`.
    pub fn h_at(&self, u: f64, v: f64) -> f64 {
        if v < 0.0 || v > u || u >= self.support {
            return 0.0;
        }
        let ru = u / self.delta;
        let rv = v / self.delta;
        let i = (ru.floor() as usize).min(self.n);
        let j = (rv.floor() as usize).min(i);
        let wu = ru - i as f64;
        let wv = rv - j as f64;
        let h00 = self.h_node(i, j);
        let h10 = self.h_node(i + 1, j);
        let h01 = if j + 1 <= i { self.h_node(i, j + 1) } else { self.h_node(i + 1, j + 1) };
        let h11 = self.h_node(i + 1, j + 1);
        h00 * (1.0 - wu) * (1.0 - wv) + h10 * wu * (1.0 - wv) + h01 * (1.0 - wu) * wv + h11 * wu * wv
    }

    /// `K(x, y)`; zero for `y < x`.
    pub fn k_at(&self, x: f64, y: f64) -> f64 {
        if y < x || x < 0.0 {
            return 0.0;
        }
        self.h_at(0.5 * (x + y), 0.5 * (y - x))
    }

    /// Samples of `K(x, x + m dx)` for `m = 0..`, up to the end of the
    /// support line `x + y = 2 L_V`, and the sample indices where the line
    /// crosses a breakpoint (kinks). `x` must lie on the `delta` lattice.
    pub fn line(&self, x: f64) -> Result<(Vec<f64>, Vec<usize>)> {
        if x < 0.0 || x > self.x_max + 1e-12 {
            return Err(Error::Domain(format!("x = {x} outside the kernel grid [0, {}]", self.x_max)));
        }
        if x >= self.support {
            return Ok((Vec::new(), Vec::new()));
        }
        let r = x / self.delta;
        let i = r.round();
        if (r - i).abs() > 1e-9 {
            return Err(Error::GridMismatch(format!("x = {x} is not a multiple of the kernel step {}", self.delta)));
        }
        let i = i as usize;
        let len = self.n - i + 1;
        let vals: Vec<f64> = (0..len).map(|m| self.h_node(i + m, m)).collect();
        let kinks = self
            .breakpoints
            .iter()
            .filter_map(|&b| {
                let m = b / self.delta - i as f64;
                let mr = m.round();
                ((m - mr).abs() < 1e-9 && mr > 0.0 && (mr as usize) < len - 1).then_some(mr as usize)
            })
            .collect();
        Ok((vals, kinks))
    }

    fn ratio(&self, step: f64) -> Result<usize> {
        let r = step / self.dx();
        let rr = r.round();
        if rr < 1.0 || (r - rr).abs() > 1e-9 {
            return Err(Error::GridMismatch(format!(
                "step {step} is not a multiple of the kernel lattice spacing {}",
                self.dx()
            )));
        }
        Ok(rr as usize)
    }

    /// [`Self::line`] subsampled to `K(x, x + m step)`; `step` must be a
    /// multiple of the lattice spacing.
    pub fn line_at(&self, x: f64, step: f64) -> Result<(Vec<f64>, Vec<usize>)> {
        let r = self.ratio(step)?;
        let (vals, kinks) = self.line(x)?;
        if r == 1 {
            return Ok((vals, kinks));
        }
        let sub: Vec<f64> = vals.iter().step_by(r).copied().collect();
        let k = kinks.iter().filter(|&&m| m % r == 0).map(|&m| m / r).collect();
        Ok((sub, k))
    }

    /// `K(m step, z)` for `m = 0..` while `y <= z` and `y + z < 2 L_V`,
    /// with the kink indices in `m`.
    pub fn column_at(&self, z: f64, step: f64) -> Result<(Vec<f64>, Vec<usize>)> {
        let r = self.ratio(step)?;
        let rz = z / step;
        let mz = rz.round();
        if z < 0.0 || (rz - mz).abs() > 1e-9 {
            return Err(Error::GridMismatch(format!("z = {z} is not a node of the step-{step} grid")));
        }
        let mz = mz as usize;
        let mut out = Vec::new();
        for m in 0..=mz {
            let (i, j) = (r * (m + mz), r * (mz - m));
            out.push(self.h_node(i, j));
            if i >= self.n {
                break;
            }
        }
        let mut kinks = Vec::new();
        for &b in &self.breakpoints {
            for y in [b, 2.0 * b - z] {
                let ry = y / step;
                if ry > 0.0 && (ry - ry.round()).abs() < 1e-9 && (ry.round() as usize) + 1 < out.len() {
                    kinks.push(ry.round() as usize);
                }
            }
        }
        Ok((out, kinks))
    }

    pub fn is_zero(&self) -> bool {
        self.h.iter().all(|&v| v == 0.0)
    }

    pub fn sup_abs(&self) -> f64 {
        self.h.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `int |K(x, z)| dz` along the line through `x`.
    pub fn line_l1(&self, x: f64) -> Result<f64> {
        let (vals, kinks) = self.line(x)?;
        let abs: Vec<f64> = vals.iter().map(|v| v.abs()).collect();
        Ok(crate::quadrature::gregory_split(&abs, self.dx(), &kinks))
    }

    /// Writes the triangular lattice as CSV rows `u,v,h` after a header
    /// carrying `X_max` and the lattice spacing.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# X_max={},dx={},delta={},L_V={}", self.x_max, self.dx(), self.delta, self.support)?;
        writeln!(w, "u,v,h")?;
        for i in 0..=self.n {
            for j in 0..=i {
                writeln!(w, "{},{},{:e}", i as f64 * self.delta, j as f64 * self.delta, self.h_node(i, j))?;
            }
        }
        Ok(())
    }
}

/// `f(k, x) = e^{ikx} + int_x^inf K(x, z) e^{ikz} dz`.
pub fn jost_from_kernel(kernel: &KernelField, k: C64, x: f64) -> Result<C64> {
    check_k(k)?;
    let plane = (I * k * x).exp();
    let (vals, kinks) = kernel.line(x)?;
    if vals.len() < 2 {
        return Ok(plane);
    }
    let dz = kernel.dx();
    let damped: Vec<C64> =
        vals.iter().enumerate().map(|(m, &kv)| C64::new(kv * (-k.im * (x + m as f64 * dz)).exp(), 0.0)).collect();
    let integral = filon_chirp_split(&damped, x, dz, &kinks, 0.0, k.re, 0.0)?;
    Ok(plane + integral)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KernelBoundReport {
    pub nodes_checked: usize,
    /// Violations of the pointwise kernel bound beyond the tolerance.
    pub kernel_violations: usize,
    /// Smallest `bound - |h|` over the lattice.
    pub kernel_min_margin: f64,
    pub du_violations: usize,
    pub dv_violations: usize,
    pub du_min_margin: f64,
    pub dv_min_margin: f64,
    /// Largest discretization allowance applied to a derivative check.
    pub max_discretization_term: f64,
    pub tolerance: f64,
}

impl KernelBoundReport {
    pub fn passed(&self) -> bool {
        self.kernel_violations == 0 && self.du_violations == 0 && self.dv_violations == 0
    }
}

/// Checks `|h| <= q`, and the derivative bounds on finite differences,
/// at every lattice node.
pub fn kernel_bound_check(kernel: &KernelField, p: &Potential, moments: &MomentProfile, tol: f64) -> KernelBoundReport {
    let d = kernel.delta;
    let n = kernel.n;
    let sig = |u: f64| moments.sigma_at(u);
    let sig1 = |u: f64| moments.sigma1_at(u);
    let q = |u: f64, v: f64| 0.5 * sig(u) * (sig1(u - v) - sig1(u)).exp();
    let mut rep = KernelBoundReport {
        nodes_checked: 0,
        kernel_violations: 0,
        kernel_min_margin: f64::INFINITY,
        du_violations: 0,
        dv_violations: 0,
        du_min_margin: f64::INFINITY,
        dv_min_margin: f64::INFINITY,
        max_discretization_term: 0.0,
        tolerance: tol,
    };
    let vmax = |a: f64, b: f64| {
        use crate::potential::Side::*;
        p.value_side(a, Right).abs().max(p.value_side(b, Left).abs())
    };
    for i in 0..=n {
        let u = i as f64 * d;
        for j in 0..=i {
            let v = j as f64 * d;
            rep.nodes_checked += 1;
            let hv = kernel.h_node(i, j).abs();
            let m = q(u, v) - hv;
            rep.kernel_min_margin = rep.kernel_min_margin.min(m);
            if m < -tol {
                rep.kernel_violations += 1;
            }
            if i + 2 <= n {
                // forward difference in u approximates the derivative inside [u, u + d]
                let fd = (kernel.h_node(i + 1, j) - kernel.h_node(i, j)) / d;
                let curv = (kernel.h_node(i + 2, j) - 2.0 * kernel.h_node(i + 1, j) + kernel.h_node(i, j)).abs() / d;
                let bound = 0.5 * vmax(u, u + d) + sig(u - v).max(sig((u - v + d).max(0.0))) * q(u, v).max(q(u + d, v));
                let allowance = curv + tol;
                rep.max_discretization_term = rep.max_discretization_term.max(curv);
                let mu = bound + allowance - fd.abs();
                rep.du_min_margin = rep.du_min_margin.min(bound - fd.abs());
                if mu < 0.0 {
                    rep.du_violations += 1;
                }
            }
            if j + 2 <= i {
                let fd = (kernel.h_node(i, j + 1) - kernel.h_node(i, j)) / d;
                let curv = (kernel.h_node(i, j + 2) - 2.0 * kernel.h_node(i, j + 1) + kernel.h_node(i, j)).abs() / d;
                let lo = (u - v - d).max(0.0);
                let bound = sig(lo) * q(u, v).max(q(u, v + d));
                let allowance = curv + tol;
                rep.max_discretization_term = rep.max_discretization_term.max(curv);
                rep.dv_min_margin = rep.dv_min_margin.min(bound - fd.abs());
                if bound + allowance - fd.abs() < 0.0 {
                    rep.dv_violations += 1;
                }
            }
        }
    }
    rep
}
