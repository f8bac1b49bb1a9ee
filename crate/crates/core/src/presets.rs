//! Named test potentials.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::potential::Potential;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// `V = 0`.
    Free,
    /// `V = -1` on `[0, 1]`; no bound state.
    ShallowWell,
    /// `V = -4` on `[0, 1]`; one bound state.
    BoundWell,
    /// `V = -20` on `[0, 1]`; one bound state.
    DeepWell,
    /// `V = e^{-x}` truncated at 12.
    Exp,
    /// `V = -2 e^{-(x-2)^2/(2 * 0.5^2)}` truncated at 6.
    Gaussian,
}

impl Preset {
    pub const ALL: [Preset; 6] = [Preset::Free, Preset::ShallowWell, Preset::BoundWell, Preset::DeepWell, Preset::Exp, Preset::Gaussian];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Free => "free",
            Preset::ShallowWell => "shallow-well",
            Preset::BoundWell => "bound-well",
            Preset::DeepWell => "deep-well",
            Preset::Exp => "exp",
            Preset::Gaussian => "gaussian",
        }
    }

    pub fn potential(self) -> Potential {
        let p = match self {
            Preset::Free => return Potential::zero(),
            Preset::ShallowWell => Potential::square_well(1.0, 1.0),
            Preset::BoundWell => Potential::square_well(4.0, 1.0),
            Preset::DeepWell => Potential::square_well(20.0, 1.0),
            Preset::Exp => Potential::exponential(1.0, 1.0, 12.0),
            Preset::Gaussian => Potential::gaussian(-2.0, 2.0, 0.5, 6.0),
        };
        p.expect("preset parameters are valid").with_name(self.name())
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown preset '{s}' (known: {})", Preset::ALL.map(|p| p.name()).join(", "))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for p in Preset::ALL {
            assert_eq!(p.name().parse::<Preset>().unwrap(), p);
            assert_eq!(p.potential().id(), p.name());
        }
        assert!("deep".parse::<Preset>().is_err());
    }
}
