//! Scattering theory and dispersive estimates for `H = -d^2/dx^2 + V` on the
//! half-line with a Dirichlet condition at the origin.

pub mod checks;
mod dop853_tableau;
pub mod error;
pub mod estimates;
pub mod field;
pub mod grid;
pub mod io;
pub mod jost;
pub mod ode;
pub mod oracle;
pub mod potential;
pub mod presets;
pub mod profiles;
pub mod propagator;
pub mod quadrature;
pub mod scattering;

pub use error::{Error, Result};
pub use field::WaveField;
pub use grid::UniformGrid;
pub use num_complex::Complex64 as C64;
pub use potential::{MomentProfile, Potential, PotentialKind};
pub use presets::Preset;
