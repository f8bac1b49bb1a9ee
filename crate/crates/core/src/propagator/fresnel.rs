//! The free Schrodinger kernel and Fresnel transforms of sampled data.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::WaveField;
use crate::grid::UniformGrid;
use crate::quadrature::filon_chirp_split;

type C64 = Complex64;

fn check_t(t: f64) -> Result<()> {
    if t == 0.0 || !t.is_finite() {
        return Err(Error::Domain(format!("the Fresnel kernel needs finite t != 0, got {t}")));
    }
    Ok(())
}

/// `1 / sqrt(4 pi i t)` on the principal branch.
pub fn fresnel_prefactor(t: f64) -> Result<C64> {
    check_t(t)?;
    let phase = -std::f64::consts::FRAC_PI_4 * t.signum();
    Ok(C64::from_polar(1.0 / (4.0 * std::f64::consts::PI * t.abs()).sqrt(), phase))
}

/// `f_t(z) = e^{i z^2 / 4t} / sqrt(4 pi i t)`.
pub fn fresnel_kernel(t: f64, z: f64) -> Result<C64> {
    Ok(fresnel_prefactor(t)? * C64::from_polar(1.0, z * z / (4.0 * t)))
}

/// Dirichlet free kernel `f_t(x - y) - f_t(x + y)`.
pub fn free_kernel(t: f64, x: f64, y: f64) -> Result<C64> {
    let pre = fresnel_prefactor(t)?;
    let a = C64::from_polar(1.0, (x - y) * (x - y) / (4.0 * t));
    let b = C64::from_polar(1.0, (x + y) * (x + y) / (4.0 * t));
    Ok(pre * (a - b))
}

/// Sampled function `g(y)` on `y = y0 + j h`, with kink indices.
#[derive(Clone, Copy, Debug)]
pub struct Samples<'a> {
    pub values: &'a [C64],
    pub y0: f64,
    pub h: f64,
    pub kinks: &'a [usize],
}

impl<'a> Samples<'a> {
    pub fn new(values: &'a [C64], y0: f64, h: f64) -> Self {
        Self { values, y0, h, kinks: &[] }
    }
}

/// `int f_t(w - y) g(y) dy`.
pub fn fresnel_at(g: &Samples, t: f64, w: f64) -> Result<C64> {
    let pre = fresnel_prefactor(t)?;
    Ok(pre * filon_chirp_split(g.values, g.y0, g.h, g.kinks, 1.0 / (4.0 * t), 0.0, w)?)
}

/// [`fresnel_at`] on every node of `w_grid`.
pub fn fresnel_on_grid(g: &Samples, t: f64, w_grid: &UniformGrid) -> Result<Vec<C64>> {
    (0..w_grid.len).into_par_iter().map(|i| fresnel_at(g, t, w_grid.point(i))).collect()
}

/// Trimmed view of a field: the samples up to its numerical support.
pub(crate) fn trimmed(phi: &WaveField) -> &[C64] {
    let n = phi.support_len(1e-15).max(2).min(phi.len());
    &phi.values[..n]
}

/// Free Dirichlet evolution `(F_t phi)(x) - (F_t phi)(-x)` on `out`.
pub fn free_evolution(phi: &WaveField, t: f64, out: &UniformGrid) -> Result<WaveField> {
    if phi.grid.start.abs() > 1e-12 {
        return Err(Error::GridMismatch("initial data must be sampled from x = 0".into()));
    }
    let vals = trimmed(phi);
    let g = Samples::new(vals, 0.0, phi.grid.step);
    let values: Vec<C64> = (0..out.len)
        .into_par_iter()
        .map(|i| {
            let x = out.point(i);
            Ok(fresnel_at(&g, t, x)? - fresnel_at(&g, t, -x)?)
        })
        .collect::<Result<_>>()?;
    Ok(WaveField { grid: *out, values, time: t })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_values() {
        let v = fresnel_kernel(1.0, 0.0).unwrap();
        let e = C64::from_polar(0.5 / std::f64::consts::PI.sqrt(), -std::f64::consts::FRAC_PI_4);
        assert!((v - e).norm() < 1e-15);
        assert_eq!(free_kernel(2.0, 0.0, 1.3).unwrap(), C64::new(0.0, 0.0));
        assert!(fresnel_kernel(0.0, 1.0).is_err());
    }

    #[test]
    fn free_evolution_of_odd_gaussian() {
        // u = x (1 + 4 i t)^{-3/2} exp(-x^2 / (1 + 4 i t))
        let g = UniformGrid::covering(0.0, 8.0, 1.0 / 32.0).unwrap();
        let phi = WaveField::from_real_fn(g, |x| x * (-x * x).exp());
        let t = 0.7;
        let out = UniformGrid::covering(0.0, 10.0, 1.0 / 32.0).unwrap();
        let u = free_evolution(&phi, t, &out).unwrap();
        let a = C64::new(1.0, 4.0 * t);
        for (i, v) in u.values.iter().enumerate() {
            let x = out.point(i);
            let e = x * a.powf(-1.5) * (-x * x / a).exp();
            assert!((v - e).norm() < 1e-6, "x={x} {v} {e}");
        }
    }
}
