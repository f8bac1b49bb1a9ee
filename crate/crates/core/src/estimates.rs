//! Norms, decay-exponent fits, Strichartz norms on the admissible segment,
//! the Duhamel operator and the relative form-bound check.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::WaveField;
use crate::grid::UniformGrid;
use crate::oracle::{DiscreteHamiltonian, Subspace};
use crate::potential::Potential;
use crate::propagator::{Propagator, PropagatorConfig, SpectralCoefficients};
use crate::quadrature::trapezoid;
use crate::scattering::KGrid;

type C64 = Complex64;

/// `(int |u|^p)^{1/p}` by the trapezoid rule; `p = inf` is the grid maximum.
pub fn lp_norm(field: &WaveField, p: f64) -> f64 {
    lp_norm_values(&field.values, field.grid.step, p)
}

fn lp_norm_values(values: &[C64], h: f64, p: f64) -> f64 {
    assert!(p >= 1.0, "L^p exponent must be at least 1, got {p}");
    let m = values.iter().fold(0.0, |a: f64, v| a.max(v.norm()));
    if m == 0.0 || p.is_infinite() {
        return m;
    }
    let s: Vec<f64> = values.iter().map(|v| (v.norm() / m).powf(p)).collect();
    m * trapezoid(&s, h).powf(1.0 / p)
}

/// `u'` by centred differences, second-order one-sided at the ends.
pub fn derivative(field: &WaveField) -> WaveField {
    let v = &field.values;
    let n = v.len();
    let h = field.grid.step;
    let mut d = vec![C64::new(0.0, 0.0); n];
    if n >= 3 {
        d[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h);
        d[n - 1] = (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) / (2.0 * h);
        for i in 1..n - 1 {
            d[i] = (v[i + 1] - v[i - 1]) / (2.0 * h);
        }
    } else if n == 2 {
        d[0] = (v[1] - v[0]) / h;
        d[1] = d[0];
    }
    WaveField { grid: field.grid, values: d, time: field.time }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SobolevNorm {
    /// `||u||_p + ||u'||_p`.
    pub value: f64,
    pub lp: f64,
    pub derivative_lp: f64,
    /// `|u(0)|`; zero for members of the Dirichlet subspace.
    pub trace: f64,
}

pub fn sobolev_norm(field: &WaveField, p: f64) -> SobolevNorm {
    let lp = lp_norm(field, p);
    let derivative_lp = lp_norm(&derivative(field), p);
    let trace = if field.grid.start.abs() < 1e-12 { field.values.first().map_or(0.0, |v| v.norm()) } else { f64::NAN };
    SobolevNorm { value: lp + derivative_lp, lp, derivative_lp, trace }
}

/// Dual exponent `p / (p - 1)`.
pub fn dual_exponent(p: f64) -> f64 {
    if p == 1.0 {
        f64::INFINITY
    } else if p.is_infinite() {
        1.0
    } else {
        p / (p - 1.0)
    }
}

/// Least-squares fit of `log y = log C - alpha log t`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PowerFit {
    pub alpha: f64,
    pub constant: f64,
    pub residual_rms: f64,
    pub samples: usize,
}

/// Minimum number of samples with `t >= 1` a fit accepts.
pub const MIN_FIT_SAMPLES: usize = 6;

/// Fits `y ~ C t^{-alpha}` using the samples with `t >= 1` only.
pub fn fit_power_law(times: &[f64], values: &[f64]) -> Result<PowerFit> {
    if times.len() != values.len() {
        return Err(Error::Data("times and values differ in length".into()));
    }
    let pts: Vec<(f64, f64)> = times.iter().zip(values).filter(|(&t, _)| t >= 1.0).map(|(&t, &y)| (t.ln(), y)).collect();
    if pts.len() < MIN_FIT_SAMPLES {
        return Err(Error::Data(format!("a decay fit needs at least {MIN_FIT_SAMPLES} samples with t >= 1, got {}", pts.len())));
    }
    if pts.iter().any(|&(_, y)| !(y > 0.0) || !y.is_finite()) {
        return Err(Error::Data("decay fit needs positive finite norms".into()));
    }
    let n = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), &(x, y)| (a + x, b + y.ln()));
    let (mx, my) = (sx / n, sy / n);
    let (sxx, sxy) = pts.iter().fold((0.0, 0.0), |(a, b), &(x, y)| (a + (x - mx).powi(2), b + (x - mx) * (y.ln() - my)));
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = pts.iter().map(|&(x, y)| (y.ln() - intercept - slope * x).powi(2)).sum();
    Ok(PowerFit { alpha: -slope, constant: intercept.exp(), residual_rms: (rss / n).sqrt(), samples: pts.len() })
}

/// Geometric fit times `2^j`, `j = 0..=6`.
pub fn default_decay_times() -> Vec<f64> {
    (0..=6).map(|j| f64::powi(2.0, j)).collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecayOptions {
    pub times: Vec<f64>,
    /// Evolve `P_c phi` (true) or `phi` itself with its bound-state phases.
    pub project: bool,
    /// Also fit the `W^{1,p} -> W^{1,p'}` variant.
    pub sobolev: bool,
    /// Spectral mass allowed to leave the output grid by the last time.
    pub tail_fraction: f64,
    pub config: PropagatorConfig,
}

impl Default for DecayOptions {
    fn default() -> Self {
        Self { times: default_decay_times(), project: true, sobolev: true, tail_fraction: 1e-6, config: PropagatorConfig::default() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SobolevDecay {
    pub data_norm: SobolevNorm,
    pub norms: Vec<f64>,
    pub fit: PowerFit,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecayReport {
    pub potential_id: String,
    pub p: f64,
    /// `1/p - 1/2`.
    pub target: f64,
    pub projected: bool,
    pub data_norm: f64,
    pub times: Vec<f64>,
    /// `||u(t)||_{p'}`.
    pub norms: Vec<f64>,
    pub fit: PowerFit,
    pub sobolev: Option<SobolevDecay>,
    pub cross_check: Vec<CrossCheck>,
}

impl DecayReport {
    pub fn exponent_error(&self) -> f64 {
        (self.fit.alpha - self.target).abs()
    }

    pub fn sobolev_exponent_error(&self) -> Option<f64> {
        self.sobolev.as_ref().map(|s| (s.fit.alpha - self.target).abs())
    }
}

/// Relative L2 distance between the propagator and the oracle at one time.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CrossCheck {
    pub t: f64,
    pub relative_l2: f64,
}

/// A propagator whose k-grid keeps the data alias-free up to `t_max`.
pub fn horizon_propagator(potential: &Potential, phi: &WaveField, t_max: f64, tail: f64, config: &PropagatorConfig) -> Result<Propagator> {
    let base = Propagator::new(potential, config.clone())?;
    let (basis, c) = base.spectral(phi)?;
    let x = base.required_range(phi, &basis, &c, t_max, tail);
    if x <= 0.5 * basis.alias_period() - phi.grid.step {
        return Ok(base);
    }
    let k_max = (1.25 * basis.extent(&c, tail)).clamp(1.0, config.k_grid.k_max);
    let dk = std::f64::consts::PI / (x + phi.grid.step);
    let mut cfg = config.clone();
    cfg.k_grid = KGrid::new(k_max, (k_max / dk).ceil() as usize)?;
    Propagator::new(potential, cfg)
}

/// Decay fits for several `p` from one set of evolutions.
pub fn decay_study(potential: &Potential, phi: &WaveField, ps: &[f64], opts: &DecayOptions, oracle: Option<&DiscreteHamiltonian>) -> Result<Vec<DecayReport>> {
    if let Some(&p) = ps.iter().find(|&&p| !(1.0..=2.0).contains(&p)) {
        return Err(Error::Domain(format!("decay exponents are defined for p in [1, 2], got {p}")));
    }
    let t_max = opts.times.iter().cloned().fold(0.0, f64::max);
    let prop = horizon_propagator(potential, phi, t_max, opts.tail_fraction, &opts.config)?;
    let traj = prop.evolve_many(phi, &opts.times, !opts.project, opts.tail_fraction)?;
    let cross_check = match oracle {
        Some(h) => oracle_cross_check(&prop, h, phi, &opts.times.iter().copied().filter(|&t| t <= 8.0).collect::<Vec<_>>(), opts.project)?,
        None => Vec::new(),
    };
    ps.iter()
        .map(|&p| {
            let q = dual_exponent(p);
            let norms: Vec<f64> = traj.iter().map(|u| lp_norm(u, q)).collect();
            let fit = fit_power_law(&opts.times, &norms)?;
            let sobolev = if opts.sobolev {
                let norms: Vec<f64> = traj.iter().map(|u| sobolev_norm(u, q).value).collect();
                Some(SobolevDecay { data_norm: sobolev_norm(phi, p), fit: fit_power_law(&opts.times, &norms)?, norms })
            } else {
                None
            };
            Ok(DecayReport {
                potential_id: potential.id(),
                p,
                target: 1.0 / p - 0.5,
                projected: opts.project,
                data_norm: lp_norm(phi, p),
                times: opts.times.clone(),
                norms,
                fit,
                sobolev,
                cross_check: cross_check.clone(),
            })
        })
        .collect()
}

pub fn decay_fit(potential: &Potential, phi: &WaveField, p: f64, opts: &DecayOptions) -> Result<DecayReport> {
    Ok(decay_study(potential, phi, &[p], opts, None)?.remove(0))
}

/// Direct-mode evolution against the oracle's spectral evolution.
pub fn oracle_cross_check(prop: &Propagator, ham: &DiscreteHamiltonian, phi: &WaveField, times: &[f64], project: bool) -> Result<Vec<CrossCheck>> {
    let subspace = if project { Subspace::Continuous } else { Subspace::All };
    let reference = ham.evolve_many(&ham.sample(phi), times, subspace)?;
    let ours = prop.evolve_many(phi, times, !project, 1e-9)?;
    times
        .iter()
        .zip(reference.iter().zip(&ours))
        .map(|(&t, (r, u))| {
            let end = u.grid.end().min(r.grid.end());
            let g = UniformGrid::covering(0.0, end, u.grid.step)?;
            let a = u.resample(g);
            let b = r.resample(g);
            Ok(CrossCheck { t, relative_l2: a.relative_l2_error(&b)? })
        })
        .collect()
}

/// A point `(1/p, 1/r)` of the admissible segment `1/p + 2/r = 1/2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdmissiblePoint {
    pub inv_p: f64,
    pub inv_r: f64,
}

impl AdmissiblePoint {
    pub fn new(inv_p: f64) -> Result<Self> {
        if !(0.0..=0.5).contains(&inv_p) {
            return Err(Error::Domain(format!("1/p = {inv_p} is off the admissible segment")));
        }
        Ok(Self { inv_p, inv_r: 0.25 - 0.5 * inv_p })
    }

    /// `(p, r) = (2, inf)`.
    pub fn b() -> Self {
        Self { inv_p: 0.5, inv_r: 0.0 }
    }

    /// `(p, r) = (inf, 4)`.
    pub fn c() -> Self {
        Self { inv_p: 0.0, inv_r: 0.25 }
    }

    pub fn p(&self) -> f64 {
        1.0 / self.inv_p
    }

    pub fn r(&self) -> f64 {
        1.0 / self.inv_r
    }

    /// `(1/p', 1/r') = (1 - 1/p, 1 - 1/r)`.
    pub fn dual(&self) -> (f64, f64) {
        (1.0 - self.inv_p, 1.0 - self.inv_r)
    }

    pub fn on_segment(&self) -> bool {
        (0.0..=0.5).contains(&self.inv_p) && (self.inv_p + 2.0 * self.inv_r - 0.5).abs() < 1e-14
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MixedNorm {
    pub value: f64,
    pub samples: usize,
    pub warning: Option<String>,
}

/// Jump of the integrand between neighbouring samples, relative to its
/// maximum, above which the time grid is reported as too coarse.
pub const RESOLUTION_WARNING: f64 = 0.1;

/// `||u||_{L^r([0,T], L^p)}` from samples with `u.time` in `[0, T]`;
/// the spatial exponent is `1/inv_p` and the time exponent `1/inv_r`.
pub fn mixed_norm(trajectory: &[WaveField], inv_p: f64, inv_r: f64, t_end: f64) -> Result<MixedNorm> {
    let pts: Vec<(f64, f64)> = trajectory
        .iter()
        .filter(|u| u.time <= t_end * (1.0 + 1e-12))
        .map(|u| (u.time, lp_norm(u, if inv_p == 0.0 { f64::INFINITY } else { 1.0 / inv_p })))
        .collect();
    if pts.is_empty() {
        return Err(Error::Domain("trajectory has no samples in [0, T]".into()));
    }
    if pts.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(Error::Data("trajectory times must increase".into()));
    }
    if inv_r == 0.0 {
        let value = pts.iter().map(|p| p.1).fold(0.0, f64::max);
        return Ok(MixedNorm { value, samples: pts.len(), warning: None });
    }
    let (t0, t1) = (pts[0].0, pts[pts.len() - 1].0);
    if t0.abs() > 1e-12 || (t1 - t_end).abs() > 1e-9 * t_end.max(1.0) {
        return Err(Error::Domain(format!("trajectory covers [{t0}, {t1}], not [0, {t_end}]")));
    }
    let r = 1.0 / inv_r;
    let g: Vec<f64> = pts.iter().map(|p| p.1.powf(r)).collect();
    let integral: f64 = pts.windows(2).zip(g.windows(2)).map(|(t, v)| 0.5 * (t[1].0 - t[0].0) * (v[0] + v[1])).sum();
    let gmax = g.iter().cloned().fold(0.0, f64::max);
    let jump = g.windows(2).map(|v| (v[1] - v[0]).abs()).fold(0.0, f64::max);
    let warning = (gmax > 0.0 && jump > RESOLUTION_WARNING * gmax)
        .then(|| format!("time grid too coarse: integrand jumps by {:.1}% of its maximum between samples", 100.0 * jump / gmax));
    Ok(MixedNorm { value: integral.powf(inv_r), samples: pts.len(), warning })
}

/// `||u||_{L^r([0,T], L^p)}` at an admissible point.
pub fn strichartz_norm(trajectory: &[WaveField], point: AdmissiblePoint, t_end: f64) -> Result<MixedNorm> {
    mixed_norm(trajectory, point.inv_p, point.inv_r, t_end)
}

/// Step `1/16` on `[0, 1]`, then eight samples per octave up to `t_max`.
pub fn strichartz_times(t_max: f64) -> Vec<f64> {
    let mut t: Vec<f64> = (0..=16).map(|j| j as f64 / 16.0).filter(|&s| s <= t_max).collect();
    let mut j = 1;
    loop {
        let s = f64::powf(2.0, j as f64 / 8.0);
        if s > t_max * (1.0 + 1e-12) {
            break;
        }
        t.push(s);
        j += 1;
    }
    if t.last().is_some_and(|&s| (s - t_max).abs() > 1e-12 * t_max) {
        t.push(t_max);
    }
    t
}

/// Samples of a forcing `f(tau, x)` on a uniform time grid starting at 0;
/// `f` vanishes after the last sample.
#[derive(Clone, Debug)]
pub struct Forcing {
    pub dt: f64,
    pub fields: Vec<WaveField>,
}

impl Forcing {
    pub fn new(dt: f64, fields: Vec<WaveField>) -> Result<Self> {
        if !(dt > 0.0) || fields.len() < 2 {
            return Err(Error::Domain("forcing needs dt > 0 and at least two samples".into()));
        }
        let step = fields[0].grid.step;
        if fields.iter().any(|f| f.grid.start != 0.0 || (f.grid.step - step).abs() > 1e-15) {
            return Err(Error::GridMismatch("forcing samples must share one step and start at 0".into()));
        }
        Ok(Self { dt, fields })
    }

    pub fn end(&self) -> f64 {
        (self.fields.len() - 1) as f64 * self.dt
    }

    pub fn trajectory(&self) -> Vec<WaveField> {
        self.fields.iter().enumerate().map(|(j, f)| f.clone().at_time(j as f64 * self.dt)).collect()
    }
}

/// Random smooth forcing supported in `tau in [0, duration]`, `x in [1, 7]`.
pub fn random_forcing(seed: u64, duration: f64, dt: f64, step: f64) -> Result<Forcing> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let modes: Vec<(f64, f64, f64, f64)> =
        (0..4).map(|_| (rng.gen_range(2.0..6.0), rng.gen_range(0.5..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-3.0..3.0))).collect();
    let grid = UniformGrid::covering(0.0, 8.0, step)?;
    let n = (duration / dt).round() as usize;
    let fields = (0..=n)
        .map(|j| {
            let tau = j as f64 * dt;
            let env = (std::f64::consts::PI * tau / duration).sin().powi(2);
            WaveField::from_fn(grid, |x| {
                modes.iter().fold(C64::new(0.0, 0.0), |acc, &(c, w, a, om)| {
                    let s = (x - c) / w;
                    let bump = if s.abs() < 1.0 { (1.0 - 1.0 / (1.0 - s * s)).exp() } else { 0.0 };
                    acc + C64::from_polar(a * env * bump, om * tau)
                })
            })
        })
        .collect();
    Forcing::new(dt, fields)
}

/// `(Gf)(t) = int_0^t e^{-i(t - tau)H} P_c f(tau) d tau` at each of `times`
/// (trapezoid in `tau`). Times inside the forcing window must be nodes of
/// its time grid.
pub fn duhamel_trajectory(prop: &Propagator, forcing: &Forcing, times: &[f64], tail: f64) -> Result<Vec<WaveField>> {
    let step = forcing.fields[0].grid.step;
    let basis = prop.basis(step)?;
    let coeffs: Vec<SpectralCoefficients> = forcing.fields.iter().map(|f| basis.analyze(f)).collect::<Result<_>>()?;
    let k = prop.config.k_grid.positive();
    let x_supp = forcing.fields.iter().map(|f| f.x(f.support_len(1e-12).max(1) - 1)).fold(0.0, f64::max);
    // running trapezoid sums of e^{i tau k^2} Phi_tau(k)
    let n = coeffs.len();
    let mut partial: Vec<SpectralCoefficients> = Vec::with_capacity(n);
    let zero = SpectralCoefficients { plus: vec![C64::new(0.0, 0.0); k.len()], minus: vec![C64::new(0.0, 0.0); k.len()] };
    let phase = |j: usize, c: &SpectralCoefficients| -> SpectralCoefficients {
        let tau = j as f64 * forcing.dt;
        let e: Vec<C64> = k.iter().map(|&kk| C64::from_polar(1.0, tau * kk * kk)).collect();
        SpectralCoefficients {
            plus: c.plus.iter().zip(&e).map(|(a, b)| a * b).collect(),
            minus: c.minus.iter().zip(&e).map(|(a, b)| a * b).collect(),
        }
    };
    let weighted: Vec<SpectralCoefficients> = coeffs.iter().enumerate().map(|(j, c)| phase(j, c)).collect();
    partial.push(zero.clone());
    for j in 1..n {
        let prev = &partial[j - 1];
        let h = 0.5 * forcing.dt;
        let add = |a: &[C64], b: &[C64], c: &[C64]| -> Vec<C64> { a.iter().zip(b).zip(c).map(|((p, x), y)| p + (x + y) * h).collect() };
        partial.push(SpectralCoefficients {
            plus: add(&prev.plus, &weighted[j - 1].plus, &weighted[j].plus),
            minus: add(&prev.minus, &weighted[j - 1].minus, &weighted[j].minus),
        });
    }
    let all_c = &partial[n - 1];
    let k_cut = basis.extent(all_c, tail).max(1.0);
    times
        .iter()
        .map(|&t| {
            let acc = if t >= forcing.end() - 1e-12 {
                all_c
            } else {
                let r = t / forcing.dt;
                let j = r.round();
                if (r - j).abs() > 1e-9 || t < 0.0 {
                    return Err(Error::GridMismatch(format!("t = {t} is not a node of the forcing time grid")));
                }
                &partial[j as usize]
            };
            let x = x_supp.max(prop.potential.support) + 2.0 * t * k_cut + prop.config.margin;
            let x = x.min(0.5 * basis.alias_period() - step);
            let out = UniformGrid::new(0.0, step, (x / step).floor() as usize + 1)?;
            basis.synthesize(acc, t, &out)
        })
        .collect()
}

pub fn duhamel_apply(prop: &Propagator, forcing: &Forcing, t: f64) -> Result<WaveField> {
    Ok(duhamel_trajectory(prop, forcing, &[t], 1e-9)?.remove(0))
}

/// `max(0, 1 - |x - center| / half_width)` restricted to `x >= 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tent {
    pub center: f64,
    pub half_width: f64,
}

impl Tent {
    pub fn value(&self, x: f64) -> f64 {
        (1.0 - (x - self.center).abs() / self.half_width).max(0.0)
    }

    fn support(&self) -> (f64, f64) {
        ((self.center - self.half_width).max(0.0), self.center + self.half_width)
    }

    /// `int_0^inf |phi|^2`.
    pub fn norm_sq(&self) -> f64 {
        let w = self.half_width;
        let side = |d: f64| {
            // int_0^d (1 - s/w)^2 ds
            let d = d.clamp(0.0, w);
            w / 3.0 * (1.0 - (1.0 - d / w).powi(3))
        };
        side(w) + side(self.center)
    }

    /// `int_0^inf |phi'|^2`.
    pub fn derivative_norm_sq(&self) -> f64 {
        let (a, b) = self.support();
        (b - a) / (self.half_width * self.half_width)
    }

    /// `phi_lambda(x) = sqrt(lambda) phi(lambda x)` up to the normalisation,
    /// which cancels in the form-bound quotient.
    pub fn scaled(&self, lambda: f64) -> Tent {
        Tent { center: self.center / lambda, half_width: self.half_width / lambda }
    }

    pub fn potential_energy(&self, v: &Potential) -> f64 {
        let (a, b) = self.support();
        v.integrate_with(a, b, &[self.center], |x, vx| vx.abs() * self.value(x).powi(2))
    }
}

/// Tents with half-widths `2^-m`, `m = -1..=5`, centred on a `1/8` lattice
/// over `[0, span]`.
pub fn tent_family(span: f64) -> Vec<Tent> {
    let mut out = Vec::new();
    for m in -1..=5 {
        let w = f64::powi(2.0, -m);
        let mut c = 0.0;
        while c <= span + 1e-12 {
            out.push(Tent { center: c, half_width: w });
            c += 0.125;
        }
    }
    out
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScaledFormBound {
    pub lambda: f64,
    pub measured: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FormBoundReport {
    pub epsilon: f64,
    /// `sup_s int_s^{s+1} |V|`.
    pub local_l1: f64,
    pub delta: f64,
    /// `C (1 + 1/delta)` with `delta = epsilon / C`.
    pub constructive: f64,
    /// `max(0, sup (int |V||phi|^2 - epsilon ||phi'||^2) / ||phi||^2)` over the family.
    pub measured: f64,
    pub worst: Option<Tent>,
    pub sweep: Vec<ScaledFormBound>,
    pub holds: bool,
}

fn measured_constant(v: &Potential, family: &[Tent], epsilon: f64) -> (f64, Option<Tent>) {
    family.iter().fold((0.0, None), |(best, arg), tent| {
        let q = (tent.potential_energy(v) - epsilon * tent.derivative_norm_sq()) / tent.norm_sq();
        if q > best {
            (q, Some(*tent))
        } else {
            (best, arg)
        }
    })
}

/// Measures `K(epsilon)` on `family` and on its dilations by `lambdas`
/// against the constructive constant.
pub fn form_bound_check(v: &Potential, family: &[Tent], epsilon: f64, lambdas: &[f64]) -> Result<FormBoundReport> {
    if !(epsilon > 0.0) {
        return Err(Error::Domain(format!("epsilon must be positive, got {epsilon}")));
    }
    let c = v.local_l1_sup();
    let (delta, constructive) = if c > 0.0 { (epsilon / c, c * (1.0 + c / epsilon)) } else { (f64::INFINITY, 0.0) };
    let slack = 1e-12 * constructive.max(1.0);
    let (measured, worst) = measured_constant(v, family, epsilon);
    let sweep: Vec<ScaledFormBound> = lambdas
        .iter()
        .map(|&lambda| {
            let scaled: Vec<Tent> = family.iter().map(|t| t.scaled(lambda)).collect();
            let (m, _) = measured_constant(v, &scaled, epsilon);
            ScaledFormBound { lambda, measured: m, holds: m <= constructive + slack }
        })
        .collect();
    let holds = measured <= constructive + slack && sweep.iter().all(|s| s.holds);
    Ok(FormBoundReport { epsilon, local_l1: c, delta, constructive, measured, worst, sweep, holds })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indicator_has_unit_norms() {
        let g = UniformGrid::covering(0.0, 1.0, 1.0 / 64.0).unwrap();
        let f = WaveField::from_real_fn(g, |_| 1.0);
        for p in [1.0, 1.5, 2.0, 4.0, f64::INFINITY] {
            assert!((lp_norm(&f, p) - 1.0).abs() < 1e-14, "p = {p}");
        }
    }

    #[test]
    fn fit_recovers_power_law() {
        let t = default_decay_times();
        let y: Vec<f64> = t.iter().map(|s| 3.0 * s.powf(-0.37)).collect();
        let f = fit_power_law(&t, &y).unwrap();
        assert!((f.alpha - 0.37).abs() < 1e-12 && (f.constant - 3.0).abs() < 1e-12 && f.residual_rms < 1e-12);
    }

    #[test]
    fn fit_ignores_early_times_and_counts_samples() {
        let t = [0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0];
        let y = [100.0, 50.0, 1.0, 0.5, 0.25, 0.125, 0.0625];
        assert!(fit_power_law(&t, &y).is_err());
        let t = [0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0];
        let y = [100.0, 1.0, 0.5, 0.25, 0.125, 0.0625, 0.03125];
        assert!((fit_power_law(&t, &y).unwrap().alpha - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tent_integrals_match_quadrature() {
        for tent in [Tent { center: 1.0, half_width: 0.5 }, Tent { center: 0.25, half_width: 1.0 }] {
            let g = UniformGrid::covering(0.0, 3.0, 1.0 / 4096.0).unwrap();
            let f = WaveField::from_real_fn(g, |x| tent.value(x));
            assert!((lp_norm(&f, 2.0).powi(2) - tent.norm_sq()).abs() < 1e-6);
            let d = derivative(&f);
            assert!((lp_norm(&d, 2.0).powi(2) - tent.derivative_norm_sq()).abs() < 2e-3);
        }
    }
}
