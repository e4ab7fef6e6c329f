//! Benchmarking protocols: equilibration, Bloch-direction preparation,
//! direction-averaged gate error, baselines, power-law sweeps, lifetime fits
//! and the readout pointer study.

mod fit;
mod pointer;
mod protocol;

use serde::{Deserialize, Serialize};

pub use fit::{fit_exponential, fit_line, fit_power_law, ExpFit, SweepReport};
pub use pointer::{measurement_pointer_study, MeasurementConfig, PointerReport};
pub use protocol::{
    coherent_gate_error, direction_unitary, equilibrate, gate_error, gate_error_with_channel, prepare_direction,
    BlochDirection, Equilibrium, ErrorMode, GateErrorReport,
};

use crate::dynamics::IntegratorConfig;
use crate::error::{Result, VslqError};
use crate::model::VslqParams;
use crate::pulse::{
    build_czz_schedule, build_idle_schedule, build_single_qubit_schedule, build_xcx_schedule, GateSchedule,
    PulseConfig, SingleGate,
};

/// Gate under test.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateKind {
    Idle,
    X,
    Z,
    Hadamard,
    Xcx,
    Czz,
}

impl GateKind {
    pub fn copies(self) -> usize {
        match self {
            GateKind::Xcx | GateKind::Czz => 2,
            _ => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GateKind::Idle => "idle",
            GateKind::X => "x_l",
            GateKind::Z => "z_l",
            GateKind::Hadamard => "hadamard",
            GateKind::Xcx => "xcx",
            GateKind::Czz => "czz",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchmarkConfig {
    pub gate: GateKind,
    pub n_cycles: usize,
    /// T1P grid, µs.
    pub t1p_grid: Vec<f64>,
    pub equilibration_cycles: usize,
    pub mode: ErrorMode,
    /// With `false`, all collapse rates are zero (coherent error only).
    pub dissipation: bool,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            gate: GateKind::Czz,
            n_cycles: 2,
            t1p_grid: vec![8.0, 16.0, 32.0, 64.0],
            equilibration_cycles: 10,
            mode: ErrorMode::Heisenberg,
            dissipation: true,
        }
    }
}

impl BenchmarkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.t1p_grid.is_empty() || self.t1p_grid.iter().any(|t| !(*t > 0.0)) {
            return Err(VslqError::InvalidParameter("T1P grid must be nonempty and positive".into()));
        }
        if self.n_cycles == 0 {
            return Err(VslqError::InvalidParameter("n_cycles must be positive".into()));
        }
        Ok(())
    }
}

/// Schedule of `gate` over `n_cycles` EC cycles.
pub fn gate_schedule(params: &VslqParams, pulse: &PulseConfig, gate: GateKind, n_cycles: usize) -> Result<GateSchedule> {
    match gate {
        GateKind::Idle => build_idle_schedule(params, pulse, 1, n_cycles),
        GateKind::X => build_single_qubit_schedule(params, pulse, SingleGate::X, n_cycles),
        GateKind::Z => build_single_qubit_schedule(params, pulse, SingleGate::Z, n_cycles),
        GateKind::Hadamard => build_single_qubit_schedule(params, pulse, SingleGate::Hadamard, n_cycles),
        GateKind::Xcx => build_xcx_schedule(params, pulse, n_cycles),
        GateKind::Czz => build_czz_schedule(params, pulse, n_cycles),
    }
}

/// Full protocol at one T1P: equilibrate, then measure the direction-averaged
/// error of one gate application.
pub fn benchmark_point(
    params: &VslqParams,
    pulse: &PulseConfig,
    bench: &BenchmarkConfig,
    icfg: &IntegratorConfig,
) -> Result<GateErrorReport> {
    let params = VslqParams { copies: bench.gate.copies(), ..params.clone() };
    let mut schedule = gate_schedule(&params, pulse, bench.gate, bench.n_cycles)?;
    if !bench.dissipation {
        schedule = schedule.noiseless();
    }
    let eq = equilibrate(&params, pulse, bench.equilibration_cycles, bench.dissipation, icfg)?;
    let mut report = gate_error(&params, &schedule, &eq.state, icfg, bench.mode)?;
    report.gate = bench.gate.name().into();
    Ok(report)
}

/// Runs [`benchmark_point`] over the T1P grid and fits `p = a/T + b/T²`.
pub fn sweep_and_fit(
    params: &VslqParams,
    pulse: &PulseConfig,
    bench: &BenchmarkConfig,
    icfg: &IntegratorConfig,
) -> Result<(Vec<GateErrorReport>, SweepReport)> {
    bench.validate()?;
    let reports = bench
        .t1p_grid
        .iter()
        .map(|&t| benchmark_point(&params.with_t1p(t), pulse, bench, icfg))
        .collect::<Result<Vec<_>>>()?;
    let points: Vec<(f64, f64)> = reports.iter().map(|r| (r.t1p, r.p)).collect();
    Ok((reports, fit_power_law(&points)?))
}

/// Error of an ordinary two-qubit gate of duration `tg_ns`: `1 − e^{−T_g/T1P}`.
pub fn bare_two_qubit_error(tg_ns: f64, t1p_us: f64) -> f64 {
    -(-tg_ns / (t1p_us * 1e3)).exp_m1()
}

/// Error of an ordinary single-qubit gate: `1 − e^{−T_g/2T1P}`.
pub fn bare_single_qubit_error(tg_ns: f64, t1p_us: f64) -> f64 {
    -(-tg_ns / (2.0 * t1p_us * 1e3)).exp_m1()
}

/// Baseline rows `(T1P, T_g, error)` for every grid point and duration.
pub fn baseline_table(grid: &[f64], durations: &[f64], two_qubit: bool) -> Vec<(f64, f64, f64)> {
    grid.iter()
        .flat_map(|&t| {
            durations.iter().map(move |&tg| {
                let e = if two_qubit { bare_two_qubit_error(tg, t) } else { bare_single_qubit_error(tg, t) };
                (t, tg, e)
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn baselines_closed_form() {
        assert!((bare_two_qubit_error(40.0, 64.0) - (1.0 - (-40.0f64 / 64000.0).exp())).abs() < 1e-16);
        assert!((bare_single_qubit_error(20.0, 8.0) - (1.0 - (-20.0f64 / 16000.0).exp())).abs() < 1e-16);
        let t = baseline_table(&[8.0, 64.0], &[40.0, 200.0, 400.0], true);
        assert_eq!(t.len(), 6);
        assert!(t.iter().all(|r| r.2 > 0.0 && r.2 < 0.06));
    }

    #[test]
    fn config_validation() {
        let mut c = BenchmarkConfig::default();
        assert!(c.validate().is_ok());
        c.t1p_grid = vec![8.0, -1.0];
        assert!(c.validate().is_err());
    }
}
