// SPDX-License-Identifier: Apache-2.0

//! CSV and JSON artifact writers.
//!
//! Numeric fields are written with `f64`'s `Display`, the shortest
//! representation that parses back to the identical value, so identical
//! scenarios produce byte-identical files.

use std::fmt::Write as _;

use forcetrack::experiment::{MonteCarloReport, RunResult};
use forcetrack::Scenario;
use serde::Serialize;

/// Column names for the state vector: `q, p` for the two-dimensional
/// oscillator, `x1..xn` otherwise.
fn state_names(n: usize) -> Vec<String> {
    if n == 2 {
        vec!["q".into(), "p".into()]
    } else {
        (1..=n).map(|i| format!("x{i}")).collect()
    }
}

fn push_float(line: &mut String, v: f64) {
    let _ = write!(line, ",{v}");
}

/// Renders a single run as CSV. For the oscillator scenario the header is
/// exactly
///
/// ```text
/// k,t,q_true,p_true,q_est,p_est,y,f_true,f_est,f_err,mse_theory
/// ```
///
/// with one row per step; the force columns are empty on the final row
/// because the estimate of `f_k` needs the measurement at `k + 1`.
pub fn run_csv(result: &RunResult, n: usize, p: usize, m: usize) -> String {
    let states = state_names(n);
    let mut header = String::from("k,t");
    for s in &states {
        header.push_str(&format!(",{s}_true"));
    }
    for s in &states {
        header.push_str(&format!(",{s}_est"));
    }
    if p == 1 {
        header.push_str(",y");
    } else {
        for i in 1..=p {
            header.push_str(&format!(",y{i}"));
        }
    }
    let force_cols: Vec<String> = if m == 1 {
        vec!["f_true".into(), "f_est".into(), "f_err".into(), "mse_theory".into()]
    } else {
        let mut cols = Vec::new();
        for i in 1..=m {
            cols.push(format!("f{i}_true"));
        }
        for i in 1..=m {
            cols.push(format!("f{i}_est"));
        }
        for i in 1..=m {
            cols.push(format!("f{i}_err"));
        }
        for i in 1..=m {
            cols.push(format!("mse{i}_theory"));
        }
        cols
    };
    for c in &force_cols {
        header.push_str(&format!(",{c}"));
    }

    let steps = result.trajectory.steps();
    let mut out = String::with_capacity(steps * 96);
    out.push_str(&header);
    out.push('\n');
    for k in 0..steps {
        let mut line = format!("{k}");
        push_float(&mut line, result.trajectory.time(k));
        for i in 0..n {
            push_float(&mut line, result.trajectory.states[k][i]);
        }
        for i in 0..n {
            push_float(&mut line, result.x_hat[k][i]);
        }
        for i in 0..p {
            push_float(&mut line, result.trajectory.measurements[k][i]);
        }
        if k + 1 < steps {
            for i in 0..m {
                push_float(&mut line, result.trajectory.forces[k][i]);
            }
            for i in 0..m {
                push_float(&mut line, result.f_hat[k][i]);
            }
            for i in 0..m {
                push_float(&mut line, result.f_err[k][i]);
            }
            for i in 0..m {
                push_float(&mut line, result.mse_theory[k][(i, i)]);
            }
        } else {
            for _ in 0..4 * m {
                line.push(',');
            }
        }
        out.push_str(&line);
        out.push('\n');
    }
    out
}

/// Renders a Monte Carlo report as CSV with header
///
/// ```text
/// k,t,mse_theory,v_numerical,ratio,bias_f
/// ```
///
/// one row per force step (so `steps - 1` rows).
pub fn accuracy_csv(report: &MonteCarloReport, dt: f64, m: usize) -> String {
    let mut header = String::from("k,t");
    if m == 1 {
        header.push_str(",mse_theory,v_numerical,ratio,bias_f");
    } else {
        for i in 1..=m {
            header.push_str(&format!(",mse{i}_theory"));
        }
        for i in 1..=m {
            header.push_str(&format!(",v{i}_numerical"));
        }
        header.push_str(",ratio");
        for i in 1..=m {
            header.push_str(&format!(",bias_f{i}"));
        }
    }

    let mut out = String::with_capacity(report.v_numerical.len() * 64);
    out.push_str(&header);
    out.push('\n');
    for k in 0..report.v_numerical.len() {
        let mut line = format!("{k}");
        push_float(&mut line, k as f64 * dt);
        for i in 0..m {
            push_float(&mut line, report.mse_theory[k][(i, i)]);
        }
        for i in 0..m {
            push_float(&mut line, report.v_numerical[k][(i, i)]);
        }
        push_float(&mut line, report.ratio[k]);
        for i in 0..m {
            push_float(&mut line, report.bias_f[k][i]);
        }
        out.push_str(&line);
        out.push('\n');
    }
    out
}

/// Summary of a single run.
#[derive(Serialize)]
pub struct RunSummary<'a> {
    pub command: &'static str,
    pub seed: u64,
    /// Time average of the force estimation error.
    pub e_t_bias: f64,
    /// Root mean squared force estimation error.
    pub rms_force_error: f64,
    /// Theoretical force MSE averaged over the steady-state window.
    pub steady_state_force_mse: f64,
    /// The effective configuration (command-line overrides applied).
    pub config: &'a Scenario,
}

/// Summary of a Monte Carlo ensemble.
#[derive(Serialize)]
pub struct MonteCarloSummary<'a> {
    pub command: &'static str,
    pub seed: u64,
    pub n_runs: usize,
    pub steady_from: usize,
    /// Steady-state mean of the per-step ratio `V_N / eps2_f`.
    pub grand_ratio: f64,
    /// Time average of the ensemble force bias.
    pub grand_bias_f: f64,
    pub config: &'a Scenario,
}
