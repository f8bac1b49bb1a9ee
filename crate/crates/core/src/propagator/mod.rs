//! `e^{-itH} P_c` by two independent routes: direct k-quadrature of the
//! Parseval kernel, and assembly from the kernel decomposition.

pub mod assembled;
pub mod direct;
pub mod fresnel;
pub mod pieces;

use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::WaveField;
use crate::grid::UniformGrid;
use crate::jost::{jost_at_origin, solve_marchenko_kernel, KernelField, KernelOptions};
use crate::potential::Potential;
use crate::scattering::{find_bound_states, scattering_matrix, BoundStateOptions, BoundStateSet, KGrid, ScatteringData, ScatteringOptions};

pub use assembled::{apply_t_term, evolve_assembled, AssembledPieces};
pub use direct::{ContinuumBasis, SpectralCoefficients};
pub use fresnel::{free_evolution, free_kernel, fresnel_kernel};
pub use pieces::{
    correction_b, correction_b_reflected, correction_c, correction_c_reflected, correction_e, correction_e_reflected,
    correction_e_row, direct_kernel, kernel_sample, piece_bound_check, t3_kernel, t_cross_kernel, PieceBoundReport, PieceViolation, PropagatorKernelSample,
    Regularization,
};

type C64 = Complex64;

/// Fraction of the spectral mass allowed to leave an automatic output grid.
pub const TAIL_FRACTION: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// k-quadrature of the Parseval kernel.
    Direct,
    /// Free kernel + Fresnel convolutions + T-terms.
    Assembled,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PropagatorConfig {
    pub k_grid: KGrid,
    pub kernel: Option<KernelOptions>,
    pub scattering: ScatteringOptions,
    pub bound_states: BoundStateOptions,
    /// Spatial margin added to automatically sized output grids.
    pub margin: f64,
}

impl Default for PropagatorConfig {
    fn default() -> Self {
        Self {
            k_grid: KGrid::default(),
            kernel: None,
            scattering: ScatteringOptions::default(),
            bound_states: BoundStateOptions::default(),
            margin: 10.0,
        }
    }
}

/// Shared scattering objects for one potential; the kernel and the
/// scattering data are built on first use.
pub struct Propagator {
    pub potential: Potential,
    pub config: PropagatorConfig,
    pub bound_states: BoundStateSet,
    kernel: OnceLock<KernelField>,
    scattering: OnceLock<ScatteringData>,
}

fn get_or_try<T, F: FnOnce() -> Result<T>>(cell: &OnceLock<T>, f: F) -> Result<&T> {
    if let Some(v) = cell.get() {
        return Ok(v);
    }
    let v = f()?;
    let _ = cell.set(v);
    Ok(cell.get().expect("just set"))
}

impl Propagator {
    pub fn new(potential: &Potential, config: PropagatorConfig) -> Result<Self> {
        potential.validate()?;
        let (f00, _) = jost_at_origin(potential, C64::new(0.0, 0.0))?;
        if f00.norm() < 1e-8 {
            return Err(Error::Resonance { magnitude: f00.norm() });
        }
        let bound_states = find_bound_states(potential, None, &config.bound_states)?;
        Ok(Self { potential: potential.clone(), config, bound_states, kernel: OnceLock::new(), scattering: OnceLock::new() })
    }

    pub fn kernel(&self) -> Result<&KernelField> {
        get_or_try(&self.kernel, || {
            let opts = self.config.kernel.unwrap_or_else(|| KernelOptions::resolved_for(&self.potential));
            solve_marchenko_kernel(&self.potential, self.potential.support + 10.0, &opts)
        })
    }

    pub fn scattering(&self) -> Result<&ScatteringData> {
        get_or_try(&self.scattering, || scattering_matrix(&self.potential, &self.config.k_grid, &self.config.scattering))
    }

    pub fn basis(&self, step: f64) -> Result<ContinuumBasis> {
        ContinuumBasis::new(&self.potential, self.config.k_grid, step)
    }

    /// `phi` padded with zeros so that its grid covers the bound states.
    fn padded(&self, phi: &WaveField) -> WaveField {
        let need = self.bound_states.required_extent();
        if phi.grid.end() >= need {
            return phi.clone();
        }
        let len = ((need - phi.grid.start) / phi.grid.step).ceil() as usize + 1;
        phi.with_len(len)
    }

    /// `P_c phi`, on a grid extended if the bound states need it.
    pub fn project_continuous(&self, phi: &WaveField) -> Result<WaveField> {
        if self.bound_states.is_empty() {
            return Ok(phi.clone());
        }
        let phi = self.padded(phi);
        self.bound_states.projector_on(&phi.grid)?.complement(&phi)
    }

    /// `P_pp phi`, on a grid extended if the bound states need it.
    pub fn project_bound(&self, phi: &WaveField) -> Result<WaveField> {
        let phi = self.padded(phi);
        self.bound_states.projector_on(&phi.grid)?.apply(&phi)
    }

    /// Continuum coefficients of `phi` on a basis matching its step.
    pub fn spectral(&self, phi: &WaveField) -> Result<(ContinuumBasis, SpectralCoefficients)> {
        let basis = self.basis(phi.grid.step)?;
        let c = basis.analyze(phi)?;
        Ok((basis, c))
    }

    /// Output grid from 0 wide enough for the continuous part to disperse
    /// until `t`, capped at the alias-free range of the k-quadrature.
    pub fn auto_grid(&self, phi: &WaveField, t: f64) -> Result<UniformGrid> {
        let (basis, c) = self.spectral(phi)?;
        self.grid_for(phi, &basis, &c, t, TAIL_FRACTION)
    }

    /// As [`Propagator::auto_grid`], letting `tail` of the spectral mass escape.
    pub fn grid_for(&self, phi: &WaveField, basis: &ContinuumBasis, c: &SpectralCoefficients, t: f64, tail: f64) -> Result<UniformGrid> {
        let x = self.required_range(phi, basis, c, t, tail);
        let x = x.min(0.5 * basis.alias_period() - phi.grid.step);
        let n = (x / phi.grid.step).floor() as usize + 1;
        UniformGrid::new(0.0, phi.grid.step, n)
    }

    /// Uncapped range that keeps all but `tail` of the spectral mass until `t`.
    pub fn required_range(&self, phi: &WaveField, basis: &ContinuumBasis, c: &SpectralCoefficients, t: f64, tail: f64) -> f64 {
        let x_supp = phi.x(phi.support_len(1e-12).max(2) - 1);
        let k_cut = basis.extent(c, tail).max(1.0);
        x_supp.max(self.potential.support) + 2.0 * t.abs() * k_cut + self.config.margin
    }

    /// Direct-mode evolution at several times, each on its own automatic
    /// grid. With `include_bound` the bound-state phases are added back.
    pub fn evolve_many(&self, phi: &WaveField, times: &[f64], include_bound: bool, tail: f64) -> Result<Vec<WaveField>> {
        let (basis, c) = self.spectral(phi)?;
        times
            .iter()
            .map(|&t| {
                let out = self.grid_for(phi, &basis, &c, t, tail)?;
                let cont = if t == 0.0 {
                    self.project_continuous(phi)?.resample(out).at_time(0.0)
                } else {
                    basis.synthesize(&c, t, &out)?
                };
                if include_bound {
                    self.add_bound(phi, cont, t)
                } else {
                    Ok(cont)
                }
            })
            .collect()
    }

    /// `e^{-itH} P_c phi` on `out` (or an automatic grid).
    pub fn evolve(&self, phi: &WaveField, t: f64, mode: Mode, out: Option<UniformGrid>) -> Result<WaveField> {
        let spectral = match (mode, out) {
            (Mode::Direct, _) | (_, None) => {
                let basis = self.basis(phi.grid.step)?;
                let c = basis.analyze(phi)?;
                Some((basis, c))
            }
            _ => None,
        };
        let out = match (out, &spectral) {
            (Some(g), _) => g,
            (None, Some((basis, c))) => self.grid_for(phi, basis, c, t, TAIL_FRACTION)?,
            (None, None) => unreachable!(),
        };
        if t == 0.0 {
            let pc = self.project_continuous(phi)?;
            return Ok(pc.resample(out).at_time(0.0));
        }
        match mode {
            Mode::Direct => {
                let (basis, c) = spectral.expect("analysed above");
                check_alias(&basis, &out)?;
                basis.synthesize(&c, t, &out)
            }
            Mode::Assembled => {
                let kernel = self.kernel()?;
                let scat = self.scattering()?;
                Ok(evolve_assembled(kernel, scat, phi, t, &out)?.total)
            }
        }
    }

    /// Full evolution `e^{-itH} phi`: the continuous part plus the phases
    /// of the bound-state components.
    pub fn evolve_full(&self, phi: &WaveField, t: f64, mode: Mode, out: Option<UniformGrid>) -> Result<WaveField> {
        let cont = self.evolve(phi, t, mode, out)?;
        self.add_bound(phi, cont, t)
    }

    /// `cont + sum_j e^{-i E_j t} (phi, e_j) e_j`.
    fn add_bound(&self, phi: &WaveField, cont: WaveField, t: f64) -> Result<WaveField> {
        if self.bound_states.is_empty() {
            return Ok(cont);
        }
        let phi = self.padded(phi);
        let proj = self.bound_states.projector_on(&phi.grid)?;
        let mut values = cont.values;
        for (j, e) in proj.vectors.iter().enumerate() {
            let prod: Vec<C64> = phi.values.iter().zip(e).map(|(a, b)| a * *b).collect();
            let c = crate::quadrature::trapezoid(&prod, phi.grid.step) * C64::from_polar(1.0, -self.bound_states.energies[j] * t);
            let mut ej = WaveField::zeros(phi.grid);
            ej.values.iter_mut().zip(e).for_each(|(v, b)| *v = C64::new(*b, 0.0));
            let ej = ej.resample(cont.grid);
            values.iter_mut().zip(&ej.values).for_each(|(v, f)| *v += c * f);
        }
        Ok(WaveField { grid: cont.grid, values, time: t })
    }
}

fn check_alias(basis: &ContinuumBasis, out: &UniformGrid) -> Result<()> {
    if out.end() > 0.5 * basis.alias_period() {
        return Err(Error::Accuracy(format!(
            "output range {} exceeds half the k-quadrature period {}; refine the k-grid",
            out.end(),
            basis.alias_period()
        )));
    }
    Ok(())
}

/// Convenience wrapper building a [`Propagator`] with default settings.
pub fn evolve_continuous(p: &Potential, phi: &WaveField, t: f64, mode: Mode) -> Result<WaveField> {
    Propagator::new(p, PropagatorConfig::default())?.evolve(phi, t, mode, None)
}
