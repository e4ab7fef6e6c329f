//! Python bindings for the `vslq` simulator.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use vslq::bench::{self, BenchmarkConfig, GateKind};
use vslq::cli::{self, Experiment};
use vslq::dynamics::IntegratorConfig;
use vslq::model::{self, CouplerShiftTable, VslqParams};
use vslq::noise::{self, DephasingSetup, NoiseSpec};
use vslq::pulse::{self, PulseConfig};
use vslq::VslqError;

fn to_py(e: VslqError) -> PyErr {
    match e {
        VslqError::Config(_) | VslqError::InvalidParameter(_) | VslqError::UnknownLabel(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn gate_kind(name: &str) -> PyResult<GateKind> {
    toml::Value::String(name.to_string())
        .try_into()
        .map_err(|_| PyValueError::new_err(format!("unknown gate `{name}` (idle, x, z, hadamard, xcx, czz)")))
}

fn experiment(name: &str) -> PyResult<Experiment> {
    toml::Value::String(name.to_string()).try_into().map_err(|_| PyValueError::new_err(format!("unknown experiment `{name}`")))
}

fn pulse_from(text: Option<&str>) -> PyResult<PulseConfig> {
    match text {
        None => Ok(PulseConfig::default()),
        Some(t) => toml::from_str(t).map_err(|e| PyValueError::new_err(e.to_string())),
    }
}

/// Physical parameters of one VSLQ (MHz, µs).
#[pyclass(name = "Params")]
#[derive(Clone)]
struct PyParams(VslqParams);

#[pymethods]
impl PyParams {
    #[new]
    #[pyo3(signature = (w=25.0, delta=300.0, t1p=64.0, omega_s=None, shadow_dim=2))]
    fn new(w: f64, delta: f64, t1p: f64, omega_s: Option<f64>, shadow_dim: usize) -> PyResult<Self> {
        let p = VslqParams { w, delta, t1p, omega_s, shadow_dim, copies: 1 };
        p.validate().map_err(to_py)?;
        Ok(Self(p))
    }

    #[getter]
    fn w(&self) -> f64 {
        self.0.w
    }
    #[getter]
    fn delta(&self) -> f64 {
        self.0.delta
    }
    #[getter]
    fn t1p(&self) -> f64 {
        self.0.t1p
    }
    #[setter]
    fn set_t1p(&mut self, v: f64) {
        self.0.t1p = v;
    }
    #[getter]
    fn omega_s(&self) -> f64 {
        self.0.omega_s()
    }

    fn __repr__(&self) -> String {
        format!("Params(w={}, delta={}, t1p={}, omega_s={})", self.0.w, self.0.delta, self.0.t1p, self.0.omega_s())
    }
}

/// A full run configuration, round-tripping through TOML.
#[pyclass(name = "RunConfig")]
struct PyRunConfig(cli::RunConfig);

#[pymethods]
impl PyRunConfig {
    #[staticmethod]
    fn defaults(experiment_name: &str) -> PyResult<Self> {
        Ok(Self(cli::RunConfig::new(experiment(experiment_name)?)))
    }

    #[staticmethod]
    #[pyo3(signature = (text, overrides=Vec::new()))]
    fn from_toml(text: &str, overrides: Vec<String>) -> PyResult<Self> {
        cli::parse_config(text, &overrides).map(Self).map_err(to_py)
    }

    fn to_toml(&self) -> PyResult<String> {
        self.0.to_toml().map_err(to_py)
    }

    /// Applies `section.key=value` overrides in place.
    fn set(&mut self, overrides: Vec<String>) -> PyResult<()> {
        let text = self.0.to_toml().map_err(to_py)?;
        self.0 = cli::parse_config(&text, &overrides).map_err(to_py)?;
        Ok(())
    }

    /// Diagnostics as `"severity: key: message"` strings.
    fn validate(&self) -> Vec<String> {
        cli::validate(&self.0).iter().map(ToString::to_string).collect()
    }

    /// Runs the experiment; returns the process-style exit code.
    #[pyo3(signature = (output_dir=None))]
    fn run(&self, py: Python<'_>, output_dir: Option<String>) -> i32 {
        let mut cfg = self.0.clone();
        if let Some(d) = output_dir {
            cfg.run.output_dir = Some(d.into());
        }
        py.allow_threads(|| cli::run_config(&cfg))
    }
}

#[pyfunction]
fn bare_two_qubit_error(tg_ns: f64, t1p_us: f64) -> f64 {
    bench::bare_two_qubit_error(tg_ns, t1p_us)
}

#[pyfunction]
fn bare_single_qubit_error(tg_ns: f64, t1p_us: f64) -> f64 {
    bench::bare_single_qubit_error(tg_ns, t1p_us)
}

/// Least-squares `p = a/T + b/T²`; returns `(a, b, residual_rms)`.
#[pyfunction]
fn fit_power_law(t1p: Vec<f64>, p: Vec<f64>) -> PyResult<(f64, f64, f64)> {
    if t1p.len() != p.len() {
        return Err(PyValueError::new_err("t1p and p differ in length"));
    }
    let pts: Vec<(f64, f64)> = t1p.into_iter().zip(p).collect();
    let f = bench::fit_power_law(&pts).map_err(to_py)?;
    Ok((f.a, f.b, f.residual_rms))
}

/// One 1/f frequency trace (MHz) sampled every `dt` ns.
#[pyfunction]
fn synthesize_noise(f_min: f64, f_max: f64, amplitude: f64, seed: u64, duration: f64, dt: f64) -> PyResult<Vec<f64>> {
    let spec = NoiseSpec::new(f_min, f_max, amplitude, seed);
    Ok(noise::synthesize_trace(&spec, duration, dt).map_err(to_py)?.samples)
}

/// Ensemble Ramsey 1/e time (µs) of a transmon under 1/f noise.
#[pyfunction]
#[pyo3(signature = (amplitude, f_min, f_max, window, dt=1.0, n_traces=200, seed=1))]
fn ramsey_t2r(amplitude: f64, f_min: f64, f_max: f64, window: f64, dt: f64, n_traces: usize, seed: u64) -> PyResult<f64> {
    let setup = DephasingSetup { f_min, f_max, dt, n_traces, master_seed: seed };
    noise::ramsey_t2r(amplitude, &setup, window).map_err(to_py)
}

/// Splits a 3×3 coupler shift table into `{c0, c1, cz, czz, c11, residual}`.
#[pyfunction]
fn decompose_shift_table<'py>(py: Python<'py>, table: [[f64; 3]; 3], target_czz: f64) -> PyResult<Bound<'py, PyDict>> {
    let d = model::decompose_shift_table(&CouplerShiftTable { c: table }, target_czz).map_err(to_py)?;
    let out = PyDict::new(py);
    for (k, v) in [("c0", d.c0), ("c1", d.c1), ("cz", d.cz), ("czz", d.czz), ("c11", d.c11), ("residual", d.residual)] {
        out.set_item(k, v)?;
    }
    Ok(out)
}

/// Peak EC drive (MHz) maximizing one-cycle recovery; returns `(amplitude, fidelity)`.
#[pyfunction]
#[pyo3(signature = (params, dt=0.25))]
fn calibrate_ec_amplitude(py: Python<'_>, params: &PyParams, dt: f64) -> PyResult<(f64, f64)> {
    let p = params.0.clone();
    let cal = py
        .allow_threads(|| pulse::calibrate_ec_amplitude(&p, &PulseConfig::default().ec, &IntegratorConfig::interaction(dt)))
        .map_err(to_py)?;
    Ok((cal.amplitude, cal.fidelity))
}

/// No-noise error of a gate schedule; `pulse` is a TOML `[pulse]` body.
#[pyfunction]
#[pyo3(signature = (gate, params, n_cycles=2, pulse=None, dt=0.25))]
fn coherent_error(py: Python<'_>, gate: &str, params: &PyParams, n_cycles: usize, pulse: Option<&str>, dt: f64) -> PyResult<f64> {
    let kind = gate_kind(gate)?;
    let cfg = pulse_from(pulse)?;
    let p = VslqParams { copies: kind.copies(), ..params.0.clone() };
    py.allow_threads(|| {
        let schedule = bench::gate_schedule(&p, &cfg, kind, n_cycles)?;
        pulse::coherent_error(&p, &schedule, &IntegratorConfig::interaction(dt))
    })
    .map_err(to_py)
}

/// Direction-averaged gate error at `params.t1p`; returns a dict with `p`
/// and the per-direction fidelities.
#[pyfunction]
#[pyo3(signature = (gate, params, n_cycles=2, pulse=None, dt=0.25, equilibration_cycles=10))]
fn benchmark_point<'py>(
    py: Python<'py>,
    gate: &str,
    params: &PyParams,
    n_cycles: usize,
    pulse: Option<&str>,
    dt: f64,
    equilibration_cycles: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let kind = gate_kind(gate)?;
    let cfg = pulse_from(pulse)?;
    let p = params.0.clone();
    let bench_cfg = BenchmarkConfig { gate: kind, n_cycles, t1p_grid: vec![p.t1p], equilibration_cycles, ..Default::default() };
    let r = py
        .allow_threads(|| {
            let mut cfg = cfg;
            if cfg.ec.amplitude.is_none() {
                cfg.ec.amplitude = Some(pulse::calibrate_ec_amplitude(&p, &cfg.ec, &IntegratorConfig::interaction(dt))?.amplitude);
            }
            bench::benchmark_point(&p, &cfg, &bench_cfg, &IntegratorConfig::interaction(dt))
        })
        .map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("gate", r.gate)?;
    out.set_item("t1p", r.t1p)?;
    out.set_item("duration", r.duration)?;
    out.set_item("p", r.p)?;
    out.set_item("labels", r.labels)?;
    out.set_item("fidelity_before", r.fidelity_before)?;
    out.set_item("fidelity_after", r.fidelity_after)?;
    Ok(out)
}

/// Error-transparency residuals `‖[a_q, O_L]|ψ⟩‖` over `q ∈ {l, r}`, both
/// logical states and `O ∈ {X_L, Z_L}`; returns `(error_transparent_max, bare_min)`.
#[pyfunction]
fn transparency_check() -> PyResult<(f64, f64)> {
    model::transparency_residuals().map_err(to_py)
}

#[pymodule]
fn vslq_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyParams>()?;
    m.add_class::<PyRunConfig>()?;
    m.add_function(wrap_pyfunction!(bare_two_qubit_error, m)?)?;
    m.add_function(wrap_pyfunction!(bare_single_qubit_error, m)?)?;
    m.add_function(wrap_pyfunction!(fit_power_law, m)?)?;
    m.add_function(wrap_pyfunction!(synthesize_noise, m)?)?;
    m.add_function(wrap_pyfunction!(ramsey_t2r, m)?)?;
    m.add_function(wrap_pyfunction!(decompose_shift_table, m)?)?;
    m.add_function(wrap_pyfunction!(calibrate_ec_amplitude, m)?)?;
    m.add_function(wrap_pyfunction!(coherent_error, m)?)?;
    m.add_function(wrap_pyfunction!(benchmark_point, m)?)?;
    m.add_function(wrap_pyfunction!(transparency_check, m)?)?;
    Ok(())
}
