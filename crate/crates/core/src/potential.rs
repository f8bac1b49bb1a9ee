//! Compactly supported half-line potentials and their moment functions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::romberg;

/// Relative tolerance for all potential quadratures.
pub const QUAD_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum PotentialKind {
    Zero,
    /// `V = -depth` on `[0, width]`.
    SquareWell { depth: f64, width: f64 },
    /// `V = amplitude * exp(-decay * x)`.
    Exp { amplitude: f64, decay: f64 },
    /// `V = amplitude * exp(-((x - center)/width)^2 / 2)`.
    Gaussian { amplitude: f64, center: f64, width: f64 },
    /// Piecewise-linear through `(x[i], v[i])`; `x[0]` must be 0.
    Table { x: Vec<f64>, v: Vec<f64> },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// A real potential on the half-line, zero beyond `support`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    #[serde(flatten)]
    pub kind: PotentialKind,
    #[serde(rename = "L_V")]
    pub support: f64,
    #[serde(default = "default_dx")]
    pub dx: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

fn default_dx() -> f64 {
    1.0 / 64.0
}

impl Potential {
    pub fn new(kind: PotentialKind, support: f64) -> Result<Self> {
        let p = Self { kind, support, dx: default_dx(), name: None };
        p.validate()?;
        Ok(p)
    }

    pub fn zero() -> Self {
        Self { kind: PotentialKind::Zero, support: 1.0, dx: default_dx(), name: Some("free".into()) }
    }

    /// Square well of the given depth on `[0, width]`; the support is the width.
    pub fn square_well(depth: f64, width: f64) -> Result<Self> {
        Self::new(PotentialKind::SquareWell { depth, width }, width)
    }

    pub fn exponential(amplitude: f64, decay: f64, support: f64) -> Result<Self> {
        Self::new(PotentialKind::Exp { amplitude, decay }, support)
    }

    pub fn gaussian(amplitude: f64, center: f64, width: f64, support: f64) -> Result<Self> {
        Self::new(PotentialKind::Gaussian { amplitude, center, width }, support)
    }

    pub fn table(x: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        let support = x.last().copied().unwrap_or(0.0);
        Self::new(PotentialKind::Table { x, v }, support)
    }

    pub fn with_name(mut self, name: &str) -> Self {
        self.name = Some(name.to_string());
        self
    }

    pub fn with_dx(mut self, dx: f64) -> Self {
        self.dx = dx;
        self
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: Potential = serde_json::from_str(text)?;
        p.validate()?;
        Ok(p)
    }

    pub fn id(&self) -> String {
        if let Some(n) = &self.name {
            return n.clone();
        }
        match &self.kind {
            PotentialKind::Zero => "zero".into(),
            PotentialKind::SquareWell { depth, width } => format!("square_well(V0={depth},a={width})"),
            PotentialKind::Exp { amplitude, decay } => format!("exp(A={amplitude},b={decay},L={})", self.support),
            PotentialKind::Gaussian { amplitude, center, width } => {
                format!("gaussian(A={amplitude},c={center},s={width},L={})", self.support)
            }
            PotentialKind::Table { x, .. } => format!("table({} nodes)", x.len()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.support > 0.0) || !self.support.is_finite() {
            return Err(Error::Data(format!("support bound L_V must be positive, got {}", self.support)));
        }
        if !(self.dx > 0.0) || !self.dx.is_finite() {
            return Err(Error::Data(format!("dx must be positive, got {}", self.dx)));
        }
        let finite = |xs: &[f64]| xs.iter().all(|v| v.is_finite());
        match &self.kind {
            PotentialKind::Zero => {}
            PotentialKind::SquareWell { depth, width } => {
                if !finite(&[*depth, *width]) || *width <= 0.0 {
                    return Err(Error::Data("square well needs finite depth and positive width".into()));
                }
            }
            PotentialKind::Exp { amplitude, decay } => {
                if !finite(&[*amplitude, *decay]) {
                    return Err(Error::Data("non-finite exponential parameters".into()));
                }
            }
            PotentialKind::Gaussian { amplitude, center, width } => {
                if !finite(&[*amplitude, *center, *width]) || *width <= 0.0 {
                    return Err(Error::Data("gaussian needs finite parameters and positive width".into()));
                }
            }
            PotentialKind::Table { x, v } => {
                if x.len() != v.len() || x.len() < 2 {
                    return Err(Error::Data("table arrays must have equal length >= 2".into()));
                }
                if !finite(x) || !finite(v) {
                    return Err(Error::Data("non-finite table samples".into()));
                }
                if x[0] != 0.0 {
                    return Err(Error::Data("table must start at x = 0".into()));
                }
                if x.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::Data("table abscissae must be strictly increasing".into()));
                }
                if self.support > x[x.len() - 1] + 1e-12 {
                    return Err(Error::Data("L_V exceeds the table range".into()));
                }
            }
        }
        let m = self.first_moment();
        if !m.is_finite() {
            return Err(Error::Data("first moment is not finite".into()));
        }
        Ok(())
    }

    /// Value of the smooth piece active at `x` (no truncation), taking the
    /// given one-sided limit at internal jumps.
    fn raw(&self, x: f64, side: Side) -> f64 {
        match &self.kind {
            PotentialKind::Zero => 0.0,
            PotentialKind::SquareWell { depth, width } => {
                if x < *width || (x == *width && side == Side::Left) {
                    -depth
                } else {
                    0.0
                }
            }
            PotentialKind::Exp { amplitude, decay } => amplitude * (-decay * x).exp(),
            PotentialKind::Gaussian { amplitude, center, width } => {
                let r = (x - center) / width;
                amplitude * (-0.5 * r * r).exp()
            }
            PotentialKind::Table { x: xs, v } => {
                let n = xs.len();
                if x <= xs[0] {
                    return v[0];
                }
                if x >= xs[n - 1] {
                    return v[n - 1];
                }
                let i = xs.partition_point(|&t| t <= x) - 1;
                let w = (x - xs[i]) / (xs[i + 1] - xs[i]);
                v[i] * (1.0 - w) + v[i + 1] * w
            }
        }
    }

    /// One-sided value at `x`.
    pub fn value_side(&self, x: f64, side: Side) -> f64 {
        if x < 0.0 || x > self.support || (x == self.support && side == Side::Right) {
            return 0.0;
        }
        self.raw(x, side)
    }

    /// Right-continuous value of `V` (zero for `x >= L_V`).
    pub fn value(&self, x: f64) -> f64 {
        self.value_side(x, Side::Right)
    }

    /// Value for a point of the closed segment `[lo, hi]`, which must not
    /// contain a breakpoint in its interior: the ends give one-sided limits.
    #[inline]
    pub fn value_in(&self, x: f64, lo: f64, hi: f64) -> f64 {
        if x <= lo {
            self.value_side(lo, Side::Right)
        } else if x >= hi {
            self.value_side(hi, Side::Left)
        } else {
            self.raw(x, Side::Right)
        }
    }

    /// Points in `(0, L_V]` where `V` or `|V|` is not smooth; always ends with `L_V`.
    pub fn breakpoints(&self) -> Vec<f64> {
        let l = self.support;
        let mut b = Vec::new();
        match &self.kind {
            PotentialKind::SquareWell { width, .. } if *width < l => b.push(*width),
            PotentialKind::Table { x, v } => {
                for i in 0..x.len() - 1 {
                    if x[i] > 0.0 && x[i] < l {
                        b.push(x[i]);
                    }
                    if v[i] * v[i + 1] < 0.0 {
                        let z = x[i] + (x[i + 1] - x[i]) * v[i] / (v[i] - v[i + 1]);
                        if z > 0.0 && z < l {
                            b.push(z);
                        }
                    }
                }
            }
            _ => {}
        }
        b.push(l);
        b.sort_by(|p, q| p.partial_cmp(q).unwrap());
        b.dedup_by(|p, q| (*p - *q).abs() < 1e-14);
        b
    }

    /// Integrates `g(x, V(x))` over `[a, b]`, splitting at breakpoints and at `extra`.
    pub fn integrate_with<G: Fn(f64, f64) -> f64>(&self, a: f64, b: f64, extra: &[f64], g: G) -> f64 {
        let b = b.min(self.support);
        if b <= a {
            return 0.0;
        }
        let mut cuts: Vec<f64> = self
            .breakpoints()
            .into_iter()
            .chain(extra.iter().copied())
            .filter(|&c| c > a && c < b)
            .collect();
        cuts.sort_by(|p, q| p.partial_cmp(q).unwrap());
        cuts.dedup_by(|p, q| (*p - *q).abs() < 1e-14);
        let mut total = 0.0;
        let mut lo = a;
        for hi in cuts.into_iter().chain(std::iter::once(b)) {
            let f = |x: f64| g(x, self.value_in(x, lo, hi));
            total += romberg(&f, lo, hi, QUAD_TOL);
            lo = hi;
        }
        total
    }

    /// `int_a^b V`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        self.integrate_with(a, b, &[], |_, v| v)
    }

    /// `int_a^b |V|`.
    pub fn abs_integral(&self, a: f64, b: f64) -> f64 {
        self.integrate_with(a, b, &[], |_, v| v.abs())
    }

    /// `sigma(x) = int_x^inf |V|`.
    pub fn sigma(&self, x: f64) -> Result<f64> {
        if x < 0.0 {
            return Err(Error::Domain(format!("sigma needs x >= 0, got {x}")));
        }
        if x >= self.support {
            return Ok(0.0);
        }
        Ok(self.abs_integral(x, self.support))
    }

    /// `int_0^inf x |V(x)| dx`.
    pub fn first_moment(&self) -> f64 {
        self.integrate_with(0.0, self.support, &[], |x, v| x * v.abs())
    }

    /// `max over s` of `int_s^{s+1} |V|`: scanned on the `dx` grid, then
    /// refined by golden-section search around the best grid start.
    pub fn local_l1_sup(&self) -> f64 {
        let mass = |s: f64| self.abs_integral(s.max(0.0), s.max(0.0) + 1.0);
        let n = (self.support / self.dx).ceil() as usize;
        let mut best = (0.0, mass(0.0));
        for i in 1..=n {
            let s = i as f64 * self.dx;
            let m = mass(s);
            if m > best.1 {
                best = (s, m);
            }
        }
        let (mut a, mut b) = ((best.0 - self.dx).max(0.0), best.0 + self.dx);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let mut c = b - g * (b - a);
        let mut d = a + g * (b - a);
        let (mut fc, mut fd) = (mass(c), mass(d));
        for _ in 0..60 {
            if fc > fd {
                b = d;
                d = c;
                fd = fc;
                c = b - g * (b - a);
                fc = mass(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + g * (b - a);
                fd = mass(d);
            }
        }
        best.1.max(fc).max(fd).max(mass(0.5 * (a + b)))
    }

    /// Largest `-V` (zero if `V >= 0`), used to size bound-state searches.
    pub fn max_well_depth(&self) -> f64 {
        let n = (self.support / self.dx).ceil() as usize * 4;
        let mut m = 0.0f64;
        for i in 0..=n {
            let x = self.support * i as f64 / n as f64;
            m = m.max(-self.value_side(x, Side::Left)).max(-self.value_side(x, Side::Right));
        }
        if let PotentialKind::Table { v, .. } = &self.kind {
            for &vi in v {
                m = m.max(-vi);
            }
        }
        m
    }

    /// `max |V|` on `[0, L_V]`.
    pub fn max_abs_value(&self) -> f64 {
        let n = (self.support / self.dx).ceil() as usize * 4;
        let mut m = 0.0f64;
        for i in 0..=n {
            let x = self.support * i as f64 / n as f64;
            m = m.max(self.value_side(x, Side::Left).abs()).max(self.value_side(x, Side::Right).abs());
        }
        if let PotentialKind::Table { v, .. } = &self.kind {
            m = v.iter().fold(m, |a, b| a.max(b.abs()));
        }
        m
    }

    pub fn is_zero(&self) -> bool {
        match &self.kind {
            PotentialKind::Zero => true,
            PotentialKind::SquareWell { depth, .. } => *depth == 0.0,
            PotentialKind::Exp { amplitude, .. } | PotentialKind::Gaussian { amplitude, .. } => *amplitude == 0.0,
            PotentialKind::Table { v, .. } => v.iter().all(|&x| x == 0.0),
        }
    }

    pub fn moments(&self, step: f64) -> MomentProfile {
        MomentProfile::new(self, step)
    }
}

/// `sigma` and `sigma_1` tabulated on the nodes `i * step`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MomentProfile {
    pub step: f64,
    pub support: f64,
    pub sigma: Vec<f64>,
    pub sigma1: Vec<f64>,
    pub first_moment: f64,
}

impl MomentProfile {
    pub fn new(p: &Potential, step: f64) -> Self {
        let n = (p.support / step - 1e-9).ceil() as usize;
        let mut sigma = vec![0.0; n + 1];
        let mut sigma1 = vec![0.0; n + 1];
        for i in (0..n).rev() {
            let a = i as f64 * step;
            let b = ((i + 1) as f64 * step).min(p.support);
            let cell = p.abs_integral(a, b);
            let first = p.integrate_with(a, b, &[], |y, v| (y - a) * v.abs());
            sigma[i] = sigma[i + 1] + cell;
            sigma1[i] = sigma1[i + 1] + (b - a) * sigma[i + 1] + first;
        }
        Self { step, support: p.support, sigma, sigma1, first_moment: p.first_moment() }
    }

    fn lookup(table: &[f64], step: f64, support: f64, x: f64) -> f64 {
        if x >= support || x < 0.0 {
            return if x < 0.0 { table[0] } else { 0.0 };
        }
        let r = x / step;
        let i = r.floor() as usize;
        if i + 1 >= table.len() {
            return table[table.len() - 1];
        }
        let w = r - i as f64;
        table[i] * (1.0 - w) + table[i + 1] * w
    }

    pub fn sigma_at(&self, x: f64) -> f64 {
        Self::lookup(&self.sigma, self.step, self.support, x)
    }

    pub fn sigma1_at(&self, x: f64) -> f64 {
        Self::lookup(&self.sigma1, self.step, self.support, x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_values() {
        let z = Potential::zero();
        assert_eq!(z.sigma(0.3).unwrap(), 0.0);
        assert_eq!(z.first_moment(), 0.0);
        assert_eq!(z.local_l1_sup(), 0.0);
        let w = Potential::square_well(1.0, 1.0).unwrap();
        assert!((w.sigma(0.0).unwrap() - 1.0).abs() < 1e-14);
        let w2 = Potential::square_well(2.0, 1.0).unwrap();
        assert!((w2.first_moment() - 1.0).abs() < 1e-14);
        let w3 = Potential::square_well(3.0, 0.5).unwrap();
        assert!((w3.local_l1_sup() - 1.5).abs() < 1e-12);
        assert!(w.sigma(-1.0).is_err());
    }

    #[test]
    fn exponential_moments() {
        let p = Potential::exponential(1.0, 1.0, 30.0).unwrap();
        let expect = (-1.0f64).exp() - (-30.0f64).exp();
        assert!((p.sigma(1.0).unwrap() - expect).abs() < 1e-12);
        assert!((p.first_moment() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn one_sided_limits_at_the_jump() {
        let p = Potential::new(PotentialKind::SquareWell { depth: 4.0, width: 1.0 }, 2.0).unwrap();
        assert_eq!(p.value_side(1.0, Side::Left), -4.0);
        assert_eq!(p.value_side(1.0, Side::Right), 0.0);
        assert_eq!(p.breakpoints(), vec![1.0, 2.0]);
    }

    #[test]
    fn table_zero_crossings_are_breakpoints() {
        let p = Potential::table(vec![0.0, 1.0, 2.0], vec![-1.0, 1.0, 0.0]).unwrap();
        assert_eq!(p.breakpoints(), vec![0.5, 1.0, 2.0]);
        assert!((p.abs_integral(0.0, 2.0) - 1.0).abs() < 1e-13);
    }

    #[test]
    fn json_round_trip() {
        let text = r#"{"kind":"square_well","params":{"depth":4.0,"width":1.0},"L_V":1.0,"dx":0.015625}"#;
        let p = Potential::from_json(text).unwrap();
        assert_eq!(p.kind, PotentialKind::SquareWell { depth: 4.0, width: 1.0 });
        let back = Potential::from_json(&serde_json::to_string(&p).unwrap()).unwrap();
        assert_eq!(back, p);
    }
}
