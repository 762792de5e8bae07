// SPDX-License-Identifier: Apache-2.0

//! Scenario configuration: a single TOML file with `model`,
//! `discretization`, `force`, `filter`, `experiment` and `output` sections.
//!
//! ```toml
//! [model]
//! kind = "optomechanical"   # or "raw" with a0/b0/h0/q0/r0 row matrices
//! mass = 5.88e-4
//! omega_m = 1.76e5
//! noise_intensity = 1e-14
//!
//! [discretization]
//! dt = 1e-4
//!
//! [force]
//! kind = "gaussian_iid"     # constant | sinusoid | gaussian_iid
//!                           # | piecewise | from_file
//! mean = 1.0
//! variance = 0.5
//!
//! [filter]
//! init = "truth"            # "truth" | "measurement" | [x1, x2, ...]
//! p0_scale = 1e-10
//!
//! [experiment]
//! steps = 1000
//! seed = 20260401
//! n_runs = 100
//! x0 = [1e-6, 1e-6]
//! # steady_from = 50
//!
//! [output]
//! # dir = "out"
//! ```
//!
//! Everything a run produces is a deterministic function of this file (plus
//! command-line overrides for seed, run count and output directory).

use std::path::{Path, PathBuf};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::discretize::{discretize, DiscreteModel};
use crate::error::{Error, Result};
use crate::experiment::{FilterInit, InitMode, DEFAULT_STEADY_FROM};
use crate::matkernel;
use crate::model::{build_optomechanical, ContinuousModel, OptoParams};
use crate::simkit::ForceSignal;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Optomechanical {
        mass: f64,
        omega_m: f64,
        noise_intensity: f64,
    },
    Raw {
        a0: Vec<Vec<f64>>,
        b0: Vec<Vec<f64>>,
        h0: Vec<Vec<f64>>,
        q0: Vec<Vec<f64>>,
        r0: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscretizationSpec {
    /// Sampling period in seconds.
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ForceSpec {
    Constant {
        value: f64,
    },
    Sinusoid {
        amplitude: f64,
        /// Radians per step.
        frequency: f64,
        phase: f64,
    },
    GaussianIid {
        mean: f64,
        variance: f64,
    },
    Piecewise {
        /// `[step, value]` pairs with strictly increasing steps.
        segments: Vec<(u64, f64)>,
    },
    FromFile {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitSpec {
    /// `"truth"` or `"measurement"`.
    Named(String),
    /// Explicit initial estimate.
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSpec {
    pub init: InitSpec,
    #[serde(default = "default_p0_scale")]
    pub p0_scale: f64,
}

fn default_p0_scale() -> f64 {
    1e-10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    /// Number of recorded steps (so `steps - 1` filter updates).
    pub steps: usize,
    /// Base seed for all noise sub-streams.
    pub seed: u64,
    /// Ensemble size for Monte Carlo runs.
    #[serde(default = "default_n_runs")]
    pub n_runs: usize,
    /// True initial state of the simulation.
    pub x0: Vec<f64>,
    /// First step of the steady-state window.
    #[serde(default = "default_steady_from")]
    pub steady_from: usize,
}

fn default_n_runs() -> usize {
    100
}

fn default_steady_from() -> usize {
    DEFAULT_STEADY_FROM
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Output directory for CSV/JSON artifacts; defaults to the working
    /// directory.
    #[serde(default)]
    pub dir: Option<PathBuf>,
}

/// A fully described experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub model: ModelSpec,
    pub discretization: DiscretizationSpec,
    pub force: ForceSpec,
    pub filter: FilterSpec,
    pub experiment: ExperimentSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

impl Scenario {
    /// Parses a scenario from TOML text.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("scenario parse error: {e}")))
    }

    /// Loads a scenario file and resolves any relative force-file path
    /// against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut scenario = Self::from_toml_str(&text)?;
        if let ForceSpec::FromFile { path: force_path } = &mut scenario.force {
            if force_path.is_relative() {
                if let Some(dir) = path.parent() {
                    *force_path = dir.join(&*force_path);
                }
            }
        }
        Ok(scenario)
    }

    /// Serializes back to TOML.
    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(format!("scenario encode: {e}")))
    }

    /// Builds and validates the continuous model.
    pub fn build_continuous(&self) -> Result<ContinuousModel> {
        let cm = match &self.model {
            ModelSpec::Optomechanical {
                mass,
                omega_m,
                noise_intensity,
            } => build_optomechanical(&OptoParams {
                mass: *mass,
                omega_m: *omega_m,
                noise_intensity: *noise_intensity,
            })?,
            ModelSpec::Raw { a0, b0, h0, q0, r0 } => ContinuousModel::new(
                matkernel::matrix_from_rows(a0)?,
                matkernel::matrix_from_rows(b0)?,
                matkernel::matrix_from_rows(h0)?,
                matkernel::matrix_from_rows(q0)?,
                matkernel::matrix_from_rows(r0)?,
            )?,
        };
        cm.validated()
    }

    /// Builds the discrete model at the configured sampling period.
    pub fn build_discrete(&self) -> Result<DiscreteModel> {
        discretize(&self.build_continuous()?, self.discretization.dt)
    }

    /// Builds the force signal, reading sample files when needed.
    pub fn build_force(&self) -> Result<ForceSignal> {
        let signal = match &self.force {
            ForceSpec::Constant { value } => ForceSignal::Constant(*value),
            ForceSpec::Sinusoid {
                amplitude,
                frequency,
                phase,
            } => ForceSignal::Sinusoid {
                amplitude: *amplitude,
                frequency: *frequency,
                phase: *phase,
            },
            ForceSpec::GaussianIid { mean, variance } => ForceSignal::GaussianIid {
                mean: *mean,
                variance: *variance,
            },
            ForceSpec::Piecewise { segments } => ForceSignal::Piecewise(segments.clone()),
            ForceSpec::FromFile { path } => ForceSignal::from_file(path)?,
        };
        signal.validate()?;
        Ok(signal)
    }

    /// Builds the filter initialization.
    pub fn build_filter_init(&self) -> Result<FilterInit> {
        let mode = match &self.filter.init {
            InitSpec::Named(name) => match name.as_str() {
                "truth" => InitMode::Truth,
                "measurement" => InitMode::FromMeasurement,
                other => {
                    return Err(Error::Config(format!(
                        "filter.init must be \"truth\", \"measurement\" or an explicit vector, got {other:?}"
                    )))
                }
            },
            InitSpec::Explicit(values) => {
                InitMode::Explicit(DVector::from_row_slice(values))
            }
        };
        FilterInit::new(mode, self.filter.p0_scale)
    }

    /// True initial state.
    pub fn x0(&self) -> DVector<f64> {
        DVector::from_row_slice(&self.experiment.x0)
    }

    /// Structural validation of the scalar fields that the type system does
    /// not cover.
    pub fn validate(&self) -> Result<()> {
        if !(self.discretization.dt > 0.0 && self.discretization.dt.is_finite()) {
            return Err(Error::Config(format!(
                "discretization.dt must be positive, got {}",
                self.discretization.dt
            )));
        }
        if self.experiment.steps == 0 {
            return Err(Error::Config("experiment.steps must be >= 1".into()));
        }
        if self.experiment.x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("experiment.x0 must be finite".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BENCH_TOML: &str = r#"
        [model]
        kind = "optomechanical"
        mass = 5.88e-4
        omega_m = 1.76e5
        noise_intensity = 1e-14

        [discretization]
        dt = 1e-4

        [force]
        kind = "gaussian_iid"
        mean = 1.0
        variance = 0.5

        [filter]
        init = "truth"
        p0_scale = 1e-10

        [experiment]
        steps = 1000
        seed = 20260401
        n_runs = 100
        x0 = [1e-6, 1e-6]
    "#;

    #[test]
    fn parses_and_builds_the_bench_scenario() {
        let s = Scenario::from_toml_str(BENCH_TOML).unwrap();
        s.validate().unwrap();
        let dm = s.build_discrete().unwrap();
        assert_eq!(dm.n_states(), 2);
        assert_eq!(s.experiment.steady_from, 50);
        assert_eq!(s.experiment.n_runs, 100);
        assert!(matches!(s.build_force().unwrap(), ForceSignal::GaussianIid { .. }));
        let init = s.build_filter_init().unwrap();
        assert_eq!(init.p0_scale, 1e-10);
    }

    #[test]
    fn missing_dt_names_the_field() {
        let text = BENCH_TOML.replace("dt = 1e-4", "");
        let err = Scenario::from_toml_str(&text).unwrap_err();
        assert!(err.to_string().contains("dt"), "{err}");
    }

    #[test]
    fn zero_noise_intensity_reports_r0() {
        let text = BENCH_TOML.replace("noise_intensity = 1e-14", "noise_intensity = 0.0");
        let s = Scenario::from_toml_str(&text).unwrap();
        let err = s.build_continuous().unwrap_err();
        assert!(err.to_string().contains("noise intensity must be positive"), "{err}");

        // The same violation through the raw-matrix route reports the
        // R0 invariant directly.
        let raw = r#"
            [model]
            kind = "raw"
            a0 = [[0.0, 1.0], [-1.0, 0.0]]
            b0 = [[0.0], [1.0]]
            h0 = [[1.0, 0.0]]
            q0 = [[0.0, 0.0], [0.0, 1.0]]
            r0 = [[0.0]]

            [discretization]
            dt = 0.1

            [force]
            kind = "constant"
            value = 0.0

            [filter]
            init = "truth"

            [experiment]
            steps = 10
            seed = 1
            x0 = [0.0, 0.0]
        "#;
        let s = Scenario::from_toml_str(raw).unwrap();
        let err = s.build_continuous().unwrap_err();
        assert!(err.to_string().contains("R0 not positive definite"), "{err}");
    }

    #[test]
    fn toml_round_trip_is_equivalent(){
        let s = Scenario::from_toml_str(BENCH_TOML).unwrap();
        let text = s.to_toml_string().unwrap();
        let again = Scenario::from_toml_str(&text).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn explicit_init_vector_parses() {
        let text = BENCH_TOML.replace("init = \"truth\"", "init = [1e-6, 1e-6]");
        let s = Scenario::from_toml_str(&text).unwrap();
        let init = s.build_filter_init().unwrap();
        assert!(matches!(init.mode, InitMode::Explicit(_)));

        let text = BENCH_TOML.replace("init = \"truth\"", "init = \"bogus\"");
        let s = Scenario::from_toml_str(&text).unwrap();
        assert!(s.build_filter_init().is_err());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = format!("{BENCH_TOML}\n[output]\ntypo_field = 3\n");
        assert!(Scenario::from_toml_str(&text).is_err());
    }
}
