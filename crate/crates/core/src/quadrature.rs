//! Quadrature rules: adaptive Romberg for smooth pieces, end-corrected
//! uniform rules for sampled data, and a Filon-type rule for integrands of
//! the form `g(z) * exp(i (alpha (z-c)^2 + beta (z-c)))` with `g` sampled.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

type C64 = Complex64;

/// Scalars the sampled-data rules work over.
pub trait Scalar:
    Copy + Default + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> + Send + Sync
{
}
impl Scalar for f64 {}
impl Scalar for C64 {}

const ROMBERG_MAX_LEVELS: usize = 22;

/// Romberg integration of `f` on `[a, b]`: trapezoid halving with Richardson
/// extrapolation until successive diagonal entries agree to `rel_tol`.
pub fn romberg<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, rel_tol: f64) -> f64 {
    if b == a {
        return 0.0;
    }
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(ROMBERG_MAX_LEVELS);
    let mut h = b - a;
    let mut trap = 0.5 * h * (f(a) + f(b));
    rows.push(vec![trap]);
    for level in 1..ROMBERG_MAX_LEVELS {
        let n_new = 1usize << (level - 1);
        h *= 0.5;
        let mut s = 0.0;
        for i in 0..n_new {
            s += f(a + (2 * i + 1) as f64 * h);
        }
        trap = 0.5 * trap + h * s;
        let prev = &rows[level - 1];
        let mut row = Vec::with_capacity(level + 1);
        row.push(trap);
        let mut factor = 1.0;
        for j in 1..=level {
            factor *= 4.0;
            let r = row[j - 1] + (row[j - 1] - prev[j - 1]) / (factor - 1.0);
            row.push(r);
        }
        let cur = row[level];
        let old = prev[level - 1];
        rows.push(row);
        if level >= 4 {
            let scale = cur.abs().max(old.abs());
            if (cur - old).abs() <= rel_tol * scale || (cur - old).abs() < 1e-300 {
                return cur;
            }
        }
    }
    rows.last().map(|r| *r.last().unwrap()).unwrap_or(0.0)
}

/// Romberg on `[a, b]` split at the given points so each piece is smooth.
pub fn romberg_split<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    splits: &[f64],
    rel_tol: f64,
) -> f64 {
    if b <= a {
        return 0.0;
    }
    let mut cuts: Vec<f64> = splits.iter().copied().filter(|&s| s > a && s < b).collect();
    cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    cuts.dedup_by(|x, y| (*x - *y).abs() < 1e-14);
    let mut total = 0.0;
    let mut lo = a;
    for c in cuts.into_iter().chain(std::iter::once(b)) {
        total += romberg(f, lo, c, rel_tol);
        lo = c;
    }
    total
}

pub fn trapezoid<T: Scalar>(values: &[T], h: f64) -> T {
    let n = values.len();
    if n < 2 {
        return T::default();
    }
    let mut s = (values[0] + values[n - 1]) * 0.5;
    for &v in &values[1..n - 1] {
        s = s + v;
    }
    s * h
}

/// Gregory end-corrected trapezoid (fourth order for smooth data).
/// Falls back to Simpson or trapezoid on short inputs.
pub fn gregory<T: Scalar>(values: &[T], h: f64) -> T {
    let n = values.len();
    match n {
        0 | 1 => T::default(),
        2 => (values[0] + values[1]) * (0.5 * h),
        3 => (values[0] + values[1] * 4.0 + values[2]) * (h / 3.0),
        4 => (values[0] + values[1] * 3.0 + values[2] * 3.0 + values[3]) * (3.0 * h / 8.0),
        5 | 6 | 7 => {
            // composite Simpson with a 3/8 tail for even counts
            let (body, tail) = if n % 2 == 1 { (n, 0) } else { (n - 3, 3) };
            let mut s = values[0] + values[body - 1];
            for i in 1..body - 1 {
                s = s + values[i] * if i % 2 == 1 { 4.0 } else { 2.0 };
            }
            let mut total = s * (h / 3.0);
            if tail > 0 {
                total = total + gregory(&values[body - 1..], h);
            }
            total
        }
        _ => {
            const W: [f64; 3] = [3.0 / 8.0, 7.0 / 6.0, 23.0 / 24.0];
            let mut s = T::default();
            for i in 0..3 {
                s = s + (values[i] + values[n - 1 - i]) * W[i];
            }
            for &v in &values[3..n - 3] {
                s = s + v;
            }
            s * h
        }
    }
}

/// Gregory rule applied separately on the sub-ranges delimited by the node
/// indices in `splits` (kinks of the integrand).
pub fn gregory_split<T: Scalar>(values: &[T], h: f64, splits: &[usize]) -> T {
    let n = values.len();
    if n < 2 {
        return T::default();
    }
    let mut cuts: Vec<usize> = splits.iter().copied().filter(|&s| s > 0 && s < n - 1).collect();
    cuts.sort_unstable();
    cuts.dedup();
    let mut total = T::default();
    let mut lo = 0;
    for c in cuts.into_iter().chain(std::iter::once(n - 1)) {
        total = total + gregory(&values[lo..=c], h);
        lo = c;
    }
    total
}

/// Four-point Lagrange interpolation of uniform samples at `x`
/// (one-sided stencils at the ends, clamped outside).
pub fn interp_cubic<T: Scalar>(values: &[T], start: f64, h: f64, x: f64) -> T {
    let n = values.len();
    if n == 0 {
        return T::default();
    }
    if n == 1 {
        return values[0];
    }
    let r = ((x - start) / h).clamp(0.0, (n - 1) as f64);
    if n < 4 {
        let i = (r.floor() as usize).min(n - 2);
        let w = r - i as f64;
        return values[i] * (1.0 - w) + values[i + 1] * w;
    }
    let i = (r.floor() as usize).min(n - 2);
    let base = i.saturating_sub(1).min(n - 4);
    let s = r - base as f64;
    let w = lagrange4(s);
    values[base] * w[0] + values[base + 1] * w[1] + values[base + 2] * w[2] + values[base + 3] * w[3]
}

/// Lagrange weights for nodes 0,1,2,3 at position `s`.
#[inline]
fn lagrange4(s: f64) -> [f64; 4] {
    let (a, b, c, d) = (s, s - 1.0, s - 2.0, s - 3.0);
    [-b * c * d / 6.0, a * c * d / 2.0, -a * b * d / 2.0, a * b * c / 6.0]
}

const SERIES_CUTOFF: f64 = 4.0;
const MOMENTS: usize = 20;

/// `mu_n(b) = int_{-1/2}^{1/2} s^n e^{i b s} ds` for `n < count`.
fn phase_moments(b: f64, out: &mut [C64; MOMENTS], count: usize) {
    let ib = C64::new(0.0, b);
    let ep = C64::from_polar(1.0, 0.5 * b);
    let em = ep.conj();
    // boundary term of the integration by parts: s^n e^{ibs} at +-1/2
    let bdry = |n: usize| {
        let hp = 0.5f64.powi(n as i32);
        let sgn = if n % 2 == 0 { 1.0 } else { -1.0 };
        ep * hp - em * (sgn * hp)
    };
    // upward recurrence loses accuracy once n exceeds |b|
    if b.abs() <= SERIES_CUTOFF || (b.abs() < 24.0 && (count - 1) as f64 > b.abs()) {
        // top moment by its power series, then the stable downward recurrence
        let n = count - 1;
        let mut acc = C64::new(0.0, 0.0);
        let mut term = C64::new(1.0, 0.0);
        for m in 0..200 {
            let e = n + m;
            if e % 2 == 0 {
                acc += term * (0.5f64.powi(e as i32) / (e as f64 + 1.0));
            }
            term = term * ib / (m as f64 + 1.0);
            if m > 2 && term.norm() < 1e-18 * acc.norm().max(1e-300) {
                break;
            }
        }
        out[n] = acc;
        for k in (1..=n).rev() {
            out[k - 1] = (bdry(k) - ib * out[k]) / k as f64;
        }
    } else {
        out[0] = C64::new(2.0 * (0.5 * b).sin() / b, 0.0);
        for n in 1..count {
            out[n] = bdry(n) / ib - out[n - 1] * (n as f64) / ib;
        }
    }
}

/// Integral of `g(z) exp(i (alpha (z-c)^2 + beta (z-c)))` over the sample
/// range, with `g` given at `z0 + j h` and interpolated by piecewise cubics.
///
/// The quadratic phase is expanded in a short Taylor series per panel, so
/// `|alpha| h^2` must stay moderate; otherwise an accuracy error is returned.
pub fn filon_chirp(values: &[C64], z0: f64, h: f64, alpha: f64, beta: f64, c: f64) -> Result<C64> {
    let n = values.len();
    if n < 2 {
        return Ok(C64::new(0.0, 0.0));
    }
    let at = alpha * h * h;
    if at.abs() > 1.0 {
        return Err(Error::Accuracy(format!(
            "chirp too fast for the sample step (alpha h^2 = {at:.3})"
        )));
    }
    // number of Taylor terms in (i at s^2)^q/q! for |s| <= 1/2
    let q_max = {
        let x = 0.25 * at.abs();
        let mut q = 0;
        let mut term = 1.0;
        while q < 7 && term > 1e-16 {
            q += 1;
            term *= x / q as f64;
        }
        q
    };
    let mut mu = [C64::new(0.0, 0.0); MOMENTS];
    let mut total = C64::new(0.0, 0.0);
    if alpha == 0.0 {
        // linear phase: the same moments on every panel
        phase_moments(beta * h, &mut mu, 4);
        let rot = C64::from_polar(1.0, beta * h);
        let mut phase = C64::new(1.0, 0.0);
        for p in 0..n - 1 {
            if p % 64 == 0 {
                phase = C64::from_polar(1.0, beta * (z0 + (p as f64 + 0.5) * h - c));
            }
            let coeffs = panel_cubic(values, p);
            let acc = coeffs[0] * mu[0] + coeffs[1] * mu[1] + coeffs[2] * mu[2] + coeffs[3] * mu[3];
            total += phase * acc;
            phase *= rot;
        }
        return Ok(total * h);
    }
    for p in 0..n - 1 {
        // cubic through 4 nodes, expressed in s in [-1/2, 1/2] on panel [p, p+1]
        let coeffs = panel_cubic(values, p);
        let w = z0 + (p as f64 + 0.5) * h - c;
        let bt = (2.0 * alpha * w + beta) * h;
        phase_moments(bt, &mut mu, 4 + 2 * q_max);
        let mut acc = C64::new(0.0, 0.0);
        let mut pow = C64::new(1.0, 0.0); // (i at)^q / q!
        for q in 0..=q_max {
            let mut inner = C64::new(0.0, 0.0);
            for (j, cj) in coeffs.iter().enumerate() {
                inner += cj * mu[j + 2 * q];
            }
            acc += pow * inner;
            pow = pow * C64::new(0.0, at) / (q as f64 + 1.0);
        }
        let phase = C64::from_polar(1.0, alpha * w * w + beta * w);
        total += phase * acc * h;
    }
    Ok(total)
}

/// Cubic interpolant on panel `[p, p+1]` as monomial coefficients in
/// `s = local - 1/2`, `local` in `[0, 1]`.
fn panel_cubic(values: &[C64], p: usize) -> [C64; 4] {
    let n = values.len();
    if n < 4 {
        // linear
        let a = values[p];
        let b = values[p + 1];
        return [(a + b) * 0.5, b - a, C64::new(0.0, 0.0), C64::new(0.0, 0.0)];
    }
    let base = p.saturating_sub(1).min(n - 4);
    let off = (p - base) as f64 + 0.5; // node positions relative to panel centre: j - off
    let y = [values[base], values[base + 1], values[base + 2], values[base + 3]];
    // Newton divided differences on nodes t_j = j - off
    let t = [-off, 1.0 - off, 2.0 - off, 3.0 - off];
    let d1 = [y[1] - y[0], y[2] - y[1], y[3] - y[2]];
    let d2 = [(d1[1] - d1[0]) * 0.5, (d1[2] - d1[1]) * 0.5];
    let d3 = (d2[1] - d2[0]) * (1.0 / 3.0);
    // P(s) = y0 + d1_0 (s-t0) + d2_0 (s-t0)(s-t1) + d3 (s-t0)(s-t1)(s-t2)
    let (t0, t1, t2) = (t[0], t[1], t[2]);
    let c0 = y[0] - d1[0] * t0 + d2[0] * (t0 * t1) - d3 * (t0 * t1 * t2);
    let c1 = d1[0] - d2[0] * (t0 + t1) + d3 * (t0 * t1 + t0 * t2 + t1 * t2);
    let c2 = d2[0] - d3 * (t0 + t1 + t2);
    [c0, c1, c2, d3]
}

/// [`filon_chirp`] applied on sub-ranges split at node indices where the
/// sampled function has kinks.
pub fn filon_chirp_split(
    values: &[C64],
    z0: f64,
    h: f64,
    splits: &[usize],
    alpha: f64,
    beta: f64,
    c: f64,
) -> Result<C64> {
    let n = values.len();
    if n < 2 {
        return Ok(C64::new(0.0, 0.0));
    }
    let mut cuts: Vec<usize> = splits.iter().copied().filter(|&s| s > 0 && s < n - 1).collect();
    cuts.sort_unstable();
    cuts.dedup();
    let mut total = C64::new(0.0, 0.0);
    let mut lo = 0;
    for hi in cuts.into_iter().chain(std::iter::once(n - 1)) {
        total += filon_chirp(&values[lo..=hi], z0 + lo as f64 * h, h, alpha, beta, c)?;
        lo = hi;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn romberg_polynomial_and_exp() {
        let v = romberg(&|x: f64| x.powi(5), 0.0, 2.0, 1e-12);
        assert!((v - 64.0 / 6.0).abs() < 1e-10);
        let e = romberg(&|x: f64| (-x).exp(), 0.0, 30.0, 1e-12);
        assert!((e - (1.0 - (-30.0f64).exp())).abs() < 1e-11);
    }

    #[test]
    fn gregory_is_fourth_order() {
        let f = |x: f64| (3.0 * x).sin();
        let exact = (1.0 - 6.0f64.cos()) / 3.0;
        let err = |n: usize| {
            let h = 2.0 / (n - 1) as f64;
            let v: Vec<f64> = (0..n).map(|i| f(i as f64 * h)).collect();
            (gregory(&v, h) - exact).abs()
        };
        let (e1, e2) = (err(41), err(81));
        assert!(e1 / e2 > 12.0, "ratio {}", e1 / e2);
    }

    #[test]
    fn filon_matches_closed_form_for_linear_phase() {
        // int_0^3 z e^{i 40 z} dz
        let h = 0.05;
        let n = 61;
        let v: Vec<C64> = (0..n).map(|j| C64::new(j as f64 * h, 0.0)).collect();
        let got = filon_chirp(&v, 0.0, h, 0.0, 40.0, 0.0).unwrap();
        let b = C64::new(0.0, 40.0);
        let exact = (b * 3.0).exp() * (3.0 / b - 1.0 / (b * b)) + 1.0 / (b * b);
        assert!((got - exact).norm() < 1e-12, "{got} {exact}");
    }

    #[test]
    fn filon_handles_quadratic_phase() {
        // Gaussian times chirp: int e^{-z^2} e^{i a z^2} dz = sqrt(pi/(1 - i a))
        let a = 0.7;
        let exact = (C64::new(std::f64::consts::PI, 0.0) / C64::new(1.0, -a)).sqrt();
        let err = |h: f64| {
            let n = (24.0 / h).round() as usize + 1;
            let v: Vec<C64> = (0..n)
                .map(|j| {
                    let z = -12.0 + j as f64 * h;
                    C64::new((-z * z).exp(), 0.0)
                })
                .collect();
            (filon_chirp(&v, -12.0, h, a, 0.0, 0.0).unwrap() - exact).norm()
        };
        let (e1, e2) = (err(0.02), err(0.01));
        assert!(e2 < 2e-9, "{e2}");
        assert!(e1 / e2 > 14.0, "order ratio {}", e1 / e2);
    }

    #[test]
    fn moments_match_direct_quadrature() {
        for &b in &[0.0, 1e-3, 0.7, 3.9, 4.1, 9.0, 23.0, 30.0] {
            let mut mu = [C64::new(0.0, 0.0); MOMENTS];
            phase_moments(b, &mut mu, 18);
            for n in 0..18 {
                let re = romberg(&|s: f64| s.powi(n as i32) * (b * s).cos(), -0.5, 0.5, 1e-14);
                let im = romberg(&|s: f64| s.powi(n as i32) * (b * s).sin(), -0.5, 0.5, 1e-14);
                let e = C64::new(re, im);
                assert!((mu[n] - e).norm() < 1e-13 * e.norm().max(1e-30) + 1e-15, "b={b} n={n}: {} vs {e}", mu[n]);
            }
        }
    }

    #[test]
    fn small_and_large_moment_branches_agree() {
        let mut a = [C64::new(0.0, 0.0); MOMENTS];
        let mut b = [C64::new(0.0, 0.0); MOMENTS];
        phase_moments(SERIES_CUTOFF, &mut a, MOMENTS);
        phase_moments(SERIES_CUTOFF * (1.0 + 1e-12), &mut b, MOMENTS);
        for n in 0..12 {
            assert!((a[n] - b[n]).norm() < 1e-10, "n={n}: {} vs {}", a[n], b[n]);
        }
    }

    #[test]
    fn cubic_interp_reproduces_cubics() {
        let f = |x: f64| 1.0 + x - 2.0 * x * x + 0.5 * x * x * x;
        let v: Vec<f64> = (0..10).map(|i| f(i as f64 * 0.3)).collect();
        for &x in &[0.05, 0.31, 1.7, 2.69] {
            assert!((interp_cubic(&v, 0.0, 0.3, x) - f(x)).abs() < 1e-12);
        }
    }
}
