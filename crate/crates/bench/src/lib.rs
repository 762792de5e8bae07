// SPDX-License-Identifier: Apache-2.0

//! Shared fixtures for the criterion benchmarks.

use forcetrack::discretize::{discretize, DiscreteModel};
use forcetrack::model::{build_optomechanical, OptoParams};

/// The optomechanical benchmark model at its standard sampling period.
pub fn bench_discrete() -> DiscreteModel {
    let cm = build_optomechanical(&OptoParams {
        mass: 5.88e-4,
        omega_m: 1.76e5,
        noise_intensity: 1e-14,
    })
    .unwrap();
    discretize(&cm, 1e-4).unwrap()
}
