//! Adaptive DOP853 integration of `f'' = (V(x) - k^2) f` for complex `k`.

use num_complex::Complex64;

use crate::dop853_tableau::{A, B, C, E3, E5, STAGES};
use crate::error::{Error, Result};

type C64 = Complex64;
pub type State = [C64; 2];

#[derive(Clone, Copy, Debug)]
pub struct OdeOptions {
    pub rtol: f64,
    /// Absolute tolerance as a fraction of the initial state magnitude.
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-14, max_steps: 2_000_000 }
    }
}

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 10.0;

/// Integrates from `x0` through the monotone sequence `stops`, returning
/// the state at each stop. Between consecutive stops the potential is
/// queried as `v(x, lo, hi)` with `x` in `[lo, hi]`, so a piecewise
/// potential can return one-sided limits at the segment ends.
pub fn integrate<V>(v: &V, k2: C64, x0: f64, y0: State, stops: &[f64], opts: &OdeOptions) -> Result<Vec<State>>
where
    V: Fn(f64, f64, f64) -> f64,
{
    let mut out = Vec::with_capacity(stops.len());
    let mut x = x0;
    let mut y = y0;
    let kmag = k2.norm().sqrt();
    let mut h_abs = 0.1 / (1.0 + kmag);
    let mut steps = 0usize;
    // absolute tolerance relative to the initial magnitude, so decaying
    // solutions started from tiny values keep full relative accuracy
    let atol = opts.atol * (y0[0].norm() + y0[1].norm()).max(f64::MIN_POSITIVE);
    for &target in stops {
        if target == x {
            out.push(y);
            continue;
        }
        let dir = (target - x).signum();
        let (lo, hi) = if dir > 0.0 { (x, target) } else { (target, x) };
        let rhs = |xx: f64, s: &State| -> State { [s[1], (v(xx, lo, hi) - k2) * s[0]] };
        let mut k = [[C64::new(0.0, 0.0); 2]; STAGES];
        while (target - x) * dir > 0.0 {
            steps += 1;
            if steps > opts.max_steps {
                return Err(Error::Stiffness { x, k: format!("{}", k2.sqrt()) });
            }
            let remaining = (target - x).abs();
            let mut last = false;
            let mut h_try = h_abs;
            if h_try >= remaining * (1.0 - 1e-12) {
                h_try = remaining;
                last = true;
            }
            if h_try < 1e-14 * (1.0 + x.abs()) {
                return Err(Error::Stiffness { x, k: format!("{}", k2.sqrt()) });
            }
            let h = h_try * dir;
            k[0] = rhs(x, &y);
            for s in 1..STAGES {
                let mut ys = y;
                for (j, kj) in k.iter().enumerate().take(s) {
                    let a = A[s][j];
                    if a != 0.0 {
                        ys[0] += kj[0] * (a * h);
                        ys[1] += kj[1] * (a * h);
                    }
                }
                let xs = if s == STAGES - 1 { x + h } else { x + C[s] * h };
                let xs = xs.clamp(lo, hi);
                k[s] = rhs(xs, &ys);
            }
            let mut y_new = y;
            let mut e3 = [C64::new(0.0, 0.0); 2];
            let mut e5 = [C64::new(0.0, 0.0); 2];
            for s in 0..STAGES {
                for c in 0..2 {
                    y_new[c] += k[s][c] * (B[s] * h);
                    e3[c] += k[s][c] * E3[s];
                    e5[c] += k[s][c] * E5[s];
                }
            }
            let mut n3 = 0.0;
            let mut n5 = 0.0;
            for c in 0..2 {
                let scale = atol + opts.rtol * y[c].norm().max(y_new[c].norm());
                n3 += (e3[c].norm() / scale).powi(2);
                n5 += (e5[c].norm() / scale).powi(2);
            }
            let err = if n3 == 0.0 && n5 == 0.0 {
                0.0
            } else {
                h_try * n5 / ((n5 + 0.01 * n3) * 2.0).sqrt()
            };
            if !err.is_finite() {
                h_abs = h_try * MIN_FACTOR;
                continue;
            }
            if err <= 1.0 {
                let factor = if err == 0.0 {
                    MAX_FACTOR
                } else {
                    (SAFETY * err.powf(-1.0 / 8.0)).min(MAX_FACTOR)
                };
                x = if last { target } else { x + h };
                y = y_new;
                if !last || factor < 1.0 {
                    h_abs = h_try * factor;
                }
            } else {
                h_abs = h_try * (SAFETY * err.powf(-1.0 / 8.0)).max(MIN_FACTOR);
            }
        }
        out.push(y);
    }
    Ok(out)
}
