//! Experiment configuration files.

use std::path::{Path, PathBuf};

use halfline::oracle::OracleOptions;
use halfline::profiles::InitialData;
use halfline::{Error, Potential, Preset, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum RunMode {
    Kernel,
    Oracle,
    Both,
}

impl RunMode {
    pub fn kernel(self) -> bool {
        self != RunMode::Oracle
    }

    pub fn oracle(self) -> bool {
        self != RunMode::Kernel
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Route {
    Direct,
    Assembled,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PotentialSpec {
    Preset(Preset),
    File {
        file: PathBuf,
    },
    Inline(Potential),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Allowed `|alpha - (1/p - 1/2)|`.
    pub exponent: f64,
    /// Kernel against oracle, relative L2.
    pub cross_check: f64,
    /// Relative change of a Strichartz ratio from `T/2` to `T`.
    pub strichartz_change: f64,
    /// Spectral mass allowed to leave automatic output grids.
    pub tail_fraction: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { exponent: 0.1, cross_check: 1e-2, strichartz_change: 0.05, tail_fraction: 1e-6 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StrichartzConfig {
    pub t_max: f64,
    /// `1/p` of the sampled admissible points.
    pub points: Vec<f64>,
    pub duhamel: bool,
    pub forcing_duration: f64,
    pub forcing_dt: f64,
}

impl Default for StrichartzConfig {
    fn default() -> Self {
        Self { t_max: 64.0, points: vec![0.5, 0.25, 0.0], duhamel: true, forcing_duration: 2.0, forcing_dt: 1.0 / 32.0 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub potential: Option<PotentialSpec>,
    #[serde(default)]
    pub initial_data: Option<InitialData>,
    /// Data for the kernel-against-oracle comparison.
    #[serde(default = "default_cross_check_data")]
    pub cross_check_data: InitialData,
    #[serde(default = "default_mode")]
    pub mode: RunMode,
    #[serde(default = "default_route")]
    pub route: Route,
    #[serde(default = "default_p_list")]
    pub p_list: Vec<f64>,
    #[serde(default)]
    pub times: Option<Vec<f64>>,
    #[serde(default = "default_true")]
    pub project: bool,
    /// Also fit `p = 1` without removing the bound states.
    #[serde(default = "default_true")]
    pub compare_unprojected: bool,
    #[serde(default = "default_true")]
    pub sobolev: bool,
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub strichartz: StrichartzConfig,
    #[serde(default)]
    pub oracle: OracleOptions,
}

fn default_cross_check_data() -> InitialData {
    InitialData::Gaussian { center: 6.0, width: 1.5 }
}

fn default_mode() -> RunMode {
    RunMode::Kernel
}

fn default_route() -> Route {
    Route::Direct
}

fn default_p_list() -> Vec<f64> {
    vec![1.0, 4.0 / 3.0, 2.0]
}

fn default_true() -> bool {
    true
}

fn default_step() -> f64 {
    1.0 / 32.0
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

impl ExperimentConfig {
    /// Parses `path`; relative potential files are resolved against its
    /// directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: ExperimentConfig = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if let Some(PotentialSpec::File { file }) = &mut cfg.potential {
            if file.is_relative() {
                *file = path.parent().unwrap_or(Path::new(".")).join(&*file);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.potential.is_none() {
            return bad("no potential given: set \"potential\" in the config or pass --preset".into());
        }
        if let Some(d) = &self.initial_data {
            d.validate()?;
        }
        self.cross_check_data.validate()?;
        if self.p_list.is_empty() || self.p_list.iter().any(|p| !(1.0..=2.0).contains(p)) {
            return bad(format!("p_list must be a non-empty subset of [1, 2], got {:?}", self.p_list));
        }
        if let Some(t) = &self.times {
            if t.is_empty() || t.iter().any(|t| !t.is_finite() || *t < 0.0) || t.windows(2).any(|w| w[1] <= w[0]) {
                return bad(format!("times must be non-negative and increasing, got {t:?}"));
            }
        }
        if !(self.step > 0.0 && self.step <= 0.25) {
            return bad(format!("step must lie in (0, 0.25], got {}", self.step));
        }
        let t = &self.tolerances;
        if [t.exponent, t.cross_check, t.strichartz_change, t.tail_fraction].iter().any(|v| !(*v > 0.0)) {
            return bad("tolerances must be positive".into());
        }
        let s = &self.strichartz;
        if !(s.t_max > 0.0) || s.points.iter().any(|p| !(0.0..=0.5).contains(p)) || !(s.forcing_dt > 0.0 && s.forcing_duration > 0.0) {
            return bad("strichartz: need t_max > 0, points in [0, 1/2] and a positive forcing grid".into());
        }
        if !(self.oracle.l_box > 0.0) || self.oracle.cells < 16 {
            return bad("oracle: need l_box > 0 and at least 16 cells".into());
        }
        self.potential()?;
        Ok(())
    }

    pub fn potential(&self) -> Result<Potential> {
        match self.potential.as_ref() {
            None => Err(Error::Config("no potential given".into())),
            Some(PotentialSpec::Preset(p)) => Ok(p.potential()),
            Some(PotentialSpec::File { file }) => {
                let text = std::fs::read_to_string(file).map_err(|e| Error::Config(format!("cannot read {}: {e}", file.display())))?;
                Potential::from_json(&text)
            }
            Some(PotentialSpec::Inline(p)) => {
                p.validate()?;
                Ok(p.clone())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse_by_name() {
        let c: ExperimentConfig = serde_json::from_str(r#"{"potential": "deep-well"}"#).unwrap();
        assert_eq!(c.potential().unwrap().id(), "deep-well");
        assert_eq!(c.mode, RunMode::Kernel);
    }

    #[test]
    fn inline_potentials_parse() {
        let c: ExperimentConfig =
            serde_json::from_str(r#"{"potential": {"kind": "square_well", "params": {"depth": 2.0, "width": 1.0}, "L_V": 1.0}}"#).unwrap();
        c.validate().unwrap();
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"potential": "free", "p_lst": [1]}"#).is_err());
    }

    #[test]
    fn p_outside_range_is_rejected() {
        let c: ExperimentConfig = serde_json::from_str(r#"{"potential": "free", "p_list": [3.0]}"#).unwrap();
        assert!(c.validate().is_err());
    }
}
