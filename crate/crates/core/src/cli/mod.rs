//! Experiment runner: one TOML file per run, with `--set section.key=value`
//! overrides. Exit codes: 0 success, 2 config error, 3 numerical failure.

mod svg;
pub mod tables;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::bench::{
    bare_single_qubit_error, bare_two_qubit_error, benchmark_point, fit_power_law, measurement_pointer_study,
    BenchmarkConfig, GateErrorReport, GateKind, MeasurementConfig, SweepReport,
};
use crate::dynamics::IntegratorConfig;
use crate::error::{Result, VslqError};
use crate::model::VslqParams;
use crate::noise::{lifetime_under_1f, LifetimeConfig, LifetimeReport};
use crate::pulse::{
    calibrate_ec_amplitude, czz_peak_mhz, tune_czz, tune_single, tune_xcx, EcCalibration, PulseConfig, SingleGate,
    TuneReport,
};
use crate::units::angular;
use tables::*;

/// Environment variable naming the default output root.
pub const OUTPUT_ROOT_ENV: &str = "VSLQ_OUTPUT_ROOT";

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Idle,
    Gate1q,
    Gate2q,
    Sweep,
    NoiseLifetime,
    Measure,
    Calibrate,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Idle => "idle",
            Experiment::Gate1q => "gate1q",
            Experiment::Gate2q => "gate2q",
            Experiment::Sweep => "sweep",
            Experiment::NoiseLifetime => "noise-lifetime",
            Experiment::Measure => "measure",
            Experiment::Calibrate => "calibrate",
        }
    }
}

/// Output location and worker count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    /// Output directory; defaults to `$VSLQ_OUTPUT_ROOT/<experiment>` or
    /// `vslq-output/<experiment>`.
    pub output_dir: Option<PathBuf>,
    pub svg: bool,
    /// Worker threads; 0 uses all cores.
    pub threads: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        Self { output_dir: None, svg: true, threads: 0 }
    }
}

/// What `calibrate` tunes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrateSection {
    /// Recalibrate the EC amplitude even if one is set.
    pub ec: bool,
    /// Gates whose angles are fine-tuned (no-noise error minimization).
    pub gates: Vec<GateKind>,
    /// EC cycles per two-copy gate during tuning.
    pub n_cycles: usize,
    /// EC cycles per single-copy gate during tuning.
    pub single_cycles: usize,
}

impl Default for CalibrateSection {
    fn default() -> Self {
        Self { ec: true, gates: vec![GateKind::Czz, GateKind::Xcx, GateKind::X], n_cycles: 2, single_cycles: 2 }
    }
}

/// Everything a run needs; unknown keys are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub params: VslqParams,
    #[serde(default)]
    pub pulse: PulseConfig,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub bench: BenchmarkConfig,
    #[serde(default)]
    pub noise: LifetimeConfig,
    #[serde(default)]
    pub measure: MeasurementConfig,
    #[serde(default)]
    pub calibrate: CalibrateSection,
    #[serde(default)]
    pub run: RunSection,
}

impl RunConfig {
    pub fn new(experiment: Experiment) -> Self {
        Self {
            experiment,
            params: VslqParams::default(),
            pulse: PulseConfig::default(),
            integrator: IntegratorConfig::default(),
            bench: BenchmarkConfig::default(),
            noise: LifetimeConfig::default(),
            measure: MeasurementConfig::default(),
            calibrate: CalibrateSection::default(),
            run: RunSection::default(),
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| VslqError::Config(e.to_string()))
    }
}

/// Parses `text`, applies `section.key=value` overrides (values in TOML
/// syntax; bare words are taken as strings) and deserializes.
pub fn parse_config(text: &str, overrides: &[String]) -> Result<RunConfig> {
    let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| VslqError::Config(e.to_string()))?;
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    let merged = toml::to_string(&table).map_err(|e| VslqError::Config(e.to_string()))?;
    let source = if overrides.is_empty() { text } else { merged.as_str() };
    toml::from_str(source).map_err(|e| VslqError::Config(e.to_string()))
}

fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| VslqError::Config(format!("override `{spec}` is not of the form key=value")))?;
    let value: toml::Value = match format!("v = {}", raw.trim()).parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.trim().to_string()),
    };
    let parts: Vec<&str> = key.trim().split('.').collect();
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        cur = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| VslqError::Config(format!("override `{key}`: `{p}` is not a section")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub key: String,
    pub message: String,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{s}: {}: {}", self.key, self.message)
    }
}

/// Schema and physics sanity checks without running anything.
pub fn validate(cfg: &RunConfig) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut err = |key: &str, r: Result<()>| {
        if let Err(e) = r {
            out.push(Diagnostic { severity: Severity::Error, key: key.into(), message: e.to_string() });
        }
    };
    err("params", cfg.params.validate());
    err("pulse", cfg.pulse.validate());
    err("integrator", cfg.integrator.validate());
    err("bench", cfg.bench.validate());
    let experiment_gate = match cfg.experiment {
        Experiment::Gate1q if cfg.bench.gate.copies() != 1 => Some("gate1q needs a single-copy gate"),
        Experiment::Gate2q | Experiment::Sweep if cfg.bench.gate.copies() != 2 && cfg.experiment == Experiment::Gate2q => {
            Some("gate2q needs xcx or czz")
        }
        _ => None,
    };
    if let Some(m) = experiment_gate {
        out.push(Diagnostic { severity: Severity::Error, key: "bench.gate".into(), message: m.into() });
    }
    if cfg.noise.n_traces == 0 {
        out.push(Diagnostic { severity: Severity::Error, key: "noise.n_traces".into(), message: "must be positive".into() });
    }
    if let Some(r) = cfg.noise.t2r_ratio {
        if !(r > 0.0) {
            out.push(Diagnostic { severity: Severity::Error, key: "noise.t2r_ratio".into(), message: "must be positive".into() });
        }
    }
    if cfg.params.delta.is_finite() && cfg.integrator.dt.is_finite() {
        let phase = angular(cfg.params.delta) * cfg.integrator.dt;
        if phase > 1.0 {
            out.push(Diagnostic {
                severity: Severity::Warning,
                key: "integrator.dt".into(),
                message: format!("δ·dt = {phase:.2} rad per step exceeds 1; reduce dt"),
            });
        }
    }
    let benches = matches!(cfg.experiment, Experiment::Gate2q | Experiment::Sweep);
    if benches && cfg.bench.gate == GateKind::Czz && cfg.params.validate().is_ok() && cfg.pulse.validate().is_ok() {
        let duration = cfg.pulse.ec.period * cfg.bench.n_cycles as f64;
        let peak = czz_peak_mhz(&cfg.params, &cfg.pulse.czz, duration) * cfg.pulse.czz.scale_g.max(0.0).sqrt();
        if peak > cfg.params.w / 2.0 {
            out.push(Diagnostic {
                severity: Severity::Error,
                key: "bench.n_cycles".into(),
                message: format!("CZZ peak coupling {peak:.2} MHz exceeds W/2"),
            });
        } else if peak > cfg.params.w / 4.0 {
            out.push(Diagnostic {
                severity: Severity::Warning,
                key: "bench.n_cycles".into(),
                message: format!("CZZ peak coupling {peak:.2} MHz exceeds W/4; higher-order terms are tuned out numerically"),
            });
        }
    }
    out
}

#[derive(Parser, Debug)]
#[command(name = "vslq", about = "Pulse-level simulations of very small logical qubits")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        /// `section.key=value` override (repeatable).
        #[arg(long = "set")]
        overrides: Vec<String>,
        /// Output directory (overrides the config).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a config without running it.
    Validate {
        config: PathBuf,
        #[arg(long = "set")]
        overrides: Vec<String>,
    },
    /// Print a config with every default filled in.
    Defaults {
        #[arg(long, default_value = "sweep")]
        experiment: String,
    },
}

/// Entry point of the binary; returns the process exit code.
pub fn main_with_args(args: impl IntoIterator<Item = String>) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match cli.command {
        Command::Defaults { experiment } => {
            let exp: std::result::Result<Experiment, _> = toml::Value::String(experiment.clone()).try_into();
            match exp {
                Ok(e) => match RunConfig::new(e).to_toml() {
                    Ok(s) => {
                        print!("{s}");
                        EXIT_OK
                    }
                    Err(e) => {
                        eprintln!("{e}");
                        EXIT_NUMERICAL
                    }
                },
                Err(_) => {
                    eprintln!("error: unknown experiment `{experiment}`");
                    EXIT_CONFIG
                }
            }
        }
        Command::Validate { config, overrides } => match load(&config, &overrides) {
            Err(e) => {
                eprintln!("error: {}: {e}", config.display());
                EXIT_CONFIG
            }
            Ok(cfg) => {
                let diags = validate(&cfg);
                for d in &diags {
                    println!("{d}");
                }
                if diags.iter().any(|d| d.severity == Severity::Error) {
                    EXIT_CONFIG
                } else {
                    EXIT_OK
                }
            }
        },
        Command::Run { config, overrides, out } => {
            let mut cfg = match load(&config, &overrides) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {}: {e}", config.display());
                    return EXIT_CONFIG;
                }
            };
            if out.is_some() {
                cfg.run.output_dir = out;
            }
            run_config(&cfg)
        }
    }
}

fn load(path: &Path, overrides: &[String]) -> Result<RunConfig> {
    parse_config(&std::fs::read_to_string(path)?, overrides)
}

/// Output directory of a run.
pub fn output_dir(cfg: &RunConfig) -> PathBuf {
    if let Some(d) = &cfg.run.output_dir {
        return d.clone();
    }
    let root = std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("vslq-output"));
    root.join(cfg.experiment.name())
}

/// Validates and runs `cfg`, writing artifacts; returns the exit code.
pub fn run_config(cfg: &RunConfig) -> i32 {
    let diags = validate(cfg);
    for d in &diags {
        eprintln!("{d}");
    }
    if diags.iter().any(|d| d.severity == Severity::Error) {
        return EXIT_CONFIG;
    }
    let dir = output_dir(cfg);
    if let Err(e) = std::fs::create_dir_all(&dir) {
        eprintln!("error: cannot create {}: {e}", dir.display());
        return EXIT_CONFIG;
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.run.threads).build();
    let result = match pool {
        Ok(p) => p.install(|| execute(cfg, &dir)),
        Err(e) => Err(VslqError::Config(format!("thread pool: {e}"))),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            let report = serde_json::json!({ "experiment": cfg.experiment.name(), "error": e.to_string() });
            let _ = std::fs::write(dir.join("failure.json"), serde_json::to_string_pretty(&report).unwrap_or_default());
            match e {
                VslqError::Config(_) | VslqError::InvalidParameter(_) => EXIT_CONFIG,
                _ => EXIT_NUMERICAL,
            }
        }
    }
}

#[derive(Serialize)]
struct BenchOutput<'a> {
    experiment: &'a str,
    reports: &'a [GateErrorReport],
    fit: Option<&'a SweepReport>,
    baselines: &'a [BaselineRow],
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CalibrationOutput {
    pub ec: Option<EcCalibration>,
    pub tuning: Vec<(GateKind, TuneReport)>,
    pub pulse: PulseConfig,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    std::fs::write(path, s)?;
    Ok(())
}

/// Fills in the EC amplitude if it is unset.
fn resolve_pulse(cfg: &RunConfig) -> Result<(PulseConfig, Option<EcCalibration>)> {
    let mut pulse = cfg.pulse.clone();
    if pulse.ec.amplitude.is_some() {
        return Ok((pulse, None));
    }
    let cal = calibrate_ec_amplitude(&cfg.params, &pulse.ec, &cfg.integrator)?;
    pulse.ec.amplitude = Some(cal.amplitude);
    Ok((pulse, Some(cal)))
}

fn execute(cfg: &RunConfig, dir: &Path) -> Result<()> {
    let mut resolved = cfg.clone();
    resolved.run.output_dir = None;
    match cfg.experiment {
        Experiment::Idle | Experiment::Gate1q | Experiment::Gate2q | Experiment::Sweep => {
            let (pulse, _) = resolve_pulse(cfg)?;
            resolved.pulse = pulse.clone();
            if cfg.experiment == Experiment::Idle {
                resolved.bench.gate = GateKind::Idle;
            }
            std::fs::write(dir.join("config.resolved.toml"), resolved.to_toml()?)?;
            run_bench(&resolved, &pulse, dir)
        }
        Experiment::Calibrate => {
            let out = calibrate_all(cfg)?;
            resolved.pulse = out.pulse.clone();
            std::fs::write(dir.join("config.resolved.toml"), resolved.to_toml()?)?;
            write_json(&dir.join("calibration.json"), &out)?;
            // Same config with the calibrated pulse section, ready for reuse.
            std::fs::write(dir.join("calibrated.toml"), resolved.to_toml()?)?;
            Ok(())
        }
        Experiment::NoiseLifetime => {
            std::fs::write(dir.join("config.resolved.toml"), resolved.to_toml()?)?;
            let noisy = lifetime_under_1f(&cfg.params, &cfg.noise, &cfg.integrator)?;
            let clean = lifetime_under_1f(&cfg.params, &LifetimeConfig { t2r_ratio: None, ..cfg.noise.clone() }, &cfg.integrator)?;
            let reports: Vec<&LifetimeReport> = if cfg.noise.t2r_ratio.is_some() { vec![&clean, &noisy] } else { vec![&clean] };
            let rows: Vec<LifetimeRow> = reports
                .iter()
                .map(|r| LifetimeRow {
                    t2r_ratio: r.t2r_ratio,
                    t1p_us: r.t1p,
                    n_traces: r.n_traces,
                    t_l_us: r.t_l,
                    ratio: r.ratio,
                    fit_r2: r.fit_r2,
                    master_seed: r.master_seed,
                })
                .collect();
            write_rows(&dir.join("lifetime.csv"), &rows)?;
            let curve: Vec<CurveRow> = reports
                .iter()
                .flat_map(|r| r.times.iter().zip(&r.curve).map(move |(&t, &x)| CurveRow { t2r_ratio: r.t2r_ratio, t_us: t, x_l: x }))
                .collect();
            write_rows(&dir.join("lifetime_curve.csv"), &curve)?;
            write_json(&dir.join("report.json"), &reports)?;
            if cfg.run.svg {
                let series: Vec<svg::Series> = reports
                    .iter()
                    .map(|r| svg::Series {
                        name: r.t2r_ratio.map_or("no dephasing".into(), |x| format!("T2R = {x}·T1P")),
                        points: r.times.iter().copied().zip(r.curve.iter().copied()).collect(),
                    })
                    .collect();
                std::fs::write(dir.join("lifetime.svg"), svg::line_plot("Logical X decay", "t (µs)", "<X_L>", &series, false, true))?;
            }
            Ok(())
        }
        Experiment::Measure => {
            std::fs::write(dir.join("config.resolved.toml"), resolved.to_toml()?)?;
            let r = measurement_pointer_study(&cfg.params, &cfg.measure, &cfg.integrator)?;
            let rows: Vec<PointerRow> = (0..r.times.len())
                .map(|k| PointerRow { t_ns: r.times[k], intact: r.intact[k], intact_minus: r.intact_minus[k], lost: r.lost[k] })
                .collect();
            write_rows(&dir.join("pointer.csv"), &rows)?;
            write_json(&dir.join("report.json"), &r)?;
            if cfg.run.svg {
                let col = |v: &[f64]| r.times.iter().copied().zip(v.iter().copied()).collect();
                let series = vec![
                    svg::Series { name: "|0_L>".into(), points: col(&r.intact) },
                    svg::Series { name: "|1_L>".into(), points: col(&r.intact_minus) },
                    svg::Series { name: "a_l|0_L>".into(), points: col(&r.lost) },
                ];
                std::fs::write(dir.join("pointer.svg"), svg::line_plot("Pointer quadrature", "t (ns)", "<i(a - a†)>", &series, false, false))?;
            }
            Ok(())
        }
    }
}

fn run_bench(cfg: &RunConfig, pulse: &PulseConfig, dir: &Path) -> Result<()> {
    let bench = &cfg.bench;
    let reports = bench
        .t1p_grid
        .iter()
        .map(|&t| benchmark_point(&cfg.params.with_t1p(t), pulse, bench, &cfg.integrator))
        .collect::<Result<Vec<_>>>()?;
    let fit = if cfg.experiment == Experiment::Sweep {
        Some(fit_power_law(&reports.iter().map(|r| (r.t1p, r.p)).collect::<Vec<_>>())?)
    } else {
        None
    };
    let two = bench.gate.copies() == 2;
    let (kind, durations): (&str, &[f64]) = if two { ("two_qubit", &[40.0, 200.0, 400.0]) } else { ("single_qubit", &[20.0, 40.0]) };
    let baselines: Vec<BaselineRow> = bench
        .t1p_grid
        .iter()
        .flat_map(|&t| {
            durations.iter().map(move |&tg| BaselineRow {
                kind: kind.into(),
                t1p_us: t,
                tg_ns: tg,
                error: if two { bare_two_qubit_error(tg, t) } else { bare_single_qubit_error(tg, t) },
            })
        })
        .collect();
    let rows: Vec<GateErrorRow> = reports
        .iter()
        .map(|r| GateErrorRow { gate: r.gate.clone(), t1p_us: r.t1p, duration_ns: r.duration, n_cycles: r.n_cycles, p: r.p })
        .collect();
    write_rows(&dir.join("gate_errors.csv"), &rows)?;
    let dirs: Vec<DirectionRow> = reports
        .iter()
        .flat_map(|r| {
            (0..r.labels.len()).map(move |k| DirectionRow {
                gate: r.gate.clone(),
                t1p_us: r.t1p,
                label: r.labels[k].clone(),
                fidelity_before: r.fidelity_before[k],
                fidelity_after: r.fidelity_after[k],
                delta: r.deltas[k],
            })
        })
        .collect();
    write_rows(&dir.join("directions.csv"), &dirs)?;
    write_rows(&dir.join("baselines.csv"), &baselines)?;
    if let Some(f) = &fit {
        write_rows(&dir.join("fit.csv"), &[FitRow { gate: bench.gate.name().into(), a: f.a, b: f.b, residual_rms: f.residual_rms }])?;
    }
    write_json(
        &dir.join("report.json"),
        &BenchOutput { experiment: cfg.experiment.name(), reports: &reports, fit: fit.as_ref(), baselines: &baselines },
    )?;
    if cfg.run.svg {
        let mut series = vec![svg::Series { name: bench.gate.name().into(), points: reports.iter().map(|r| (r.t1p, r.p)).collect() }];
        if let Some(f) = &fit {
            series.push(svg::Series { name: "fit".into(), points: bench.t1p_grid.iter().map(|&t| (t, f.predict(t))).collect() });
        }
        for &tg in durations {
            series.push(svg::Series {
                name: format!("bare {tg} ns"),
                points: baselines.iter().filter(|b| b.tg_ns == tg).map(|b| (b.t1p_us, b.error)).collect(),
            });
        }
        std::fs::write(dir.join("error_vs_t1p.svg"), svg::line_plot("Gate error", "T1P (µs)", "p", &series, true, true))?;
        let schedule = crate::bench::gate_schedule(&cfg.params, pulse, bench.gate, bench.n_cycles)?;
        let n = 400;
        let mut env_rows = Vec::new();
        let mut env_series = Vec::new();
        for (i, d) in schedule.drives.iter().enumerate() {
            let name = format!("{i}:{}", serde_json::to_value(&d.op)?.get("kind").and_then(|v| v.as_str()).unwrap_or("drive"));
            let pts: Vec<(f64, f64)> = (0..=n).map(|k| {
                let t = schedule.duration * k as f64 / n as f64;
                (t, d.envelope.eval(t))
            }).collect();
            env_rows.extend(pts.iter().map(|&(t, v)| EnvelopeRow { drive: name.clone(), t_ns: t, value: v }));
            env_series.push(svg::Series { name, points: pts });
        }
        write_rows(&dir.join("envelopes.csv"), &env_rows)?;
        std::fs::write(dir.join("envelopes.svg"), svg::line_plot("Drive envelopes", "t (ns)", "MHz", &env_series, false, false))?;
    }
    Ok(())
}

/// EC amplitude plus no-noise angle tuning for the configured gates.
pub fn calibrate_all(cfg: &RunConfig) -> Result<CalibrationOutput> {
    let mut pulse = cfg.pulse.clone();
    let mut ec = None;
    if cfg.calibrate.ec || pulse.ec.amplitude.is_none() {
        let cal = calibrate_ec_amplitude(&cfg.params, &pulse.ec, &cfg.integrator)?;
        pulse.ec.amplitude = Some(cal.amplitude);
        ec = Some(cal);
    }
    let mut tuning = Vec::new();
    for &g in &cfg.calibrate.gates {
        let r = match g {
            GateKind::Czz => tune_czz(&cfg.params, &mut pulse, cfg.calibrate.n_cycles, &cfg.integrator)?,
            GateKind::Xcx => tune_xcx(&cfg.params, &mut pulse, cfg.calibrate.n_cycles, &cfg.integrator)?,
            GateKind::X => tune_single(&cfg.params, &mut pulse, SingleGate::X, cfg.calibrate.single_cycles, &cfg.integrator)?,
            GateKind::Z => tune_single(&cfg.params, &mut pulse, SingleGate::Z, cfg.calibrate.single_cycles, &cfg.integrator)?,
            GateKind::Hadamard => {
                tune_single(&cfg.params, &mut pulse, SingleGate::Hadamard, cfg.calibrate.single_cycles, &cfg.integrator)?
            }
            GateKind::Idle => continue,
        };
        tuning.push((g, r));
    }
    Ok(CalibrationOutput { ec, tuning, pulse })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_clean() {
        let cfg = RunConfig::new(Experiment::Measure);
        assert!(validate(&cfg).is_empty(), "{:?}", validate(&cfg));
    }

    #[test]
    fn coarse_step_warns() {
        let mut cfg = RunConfig::new(Experiment::Measure);
        cfg.integrator.dt = 1.0;
        let d = validate(&cfg);
        assert!(d.iter().any(|d| d.severity == Severity::Warning && d.key == "integrator.dt"));
    }

    #[test]
    fn negative_t1p_is_error() {
        let cfg = parse_config("experiment = \"measure\"\n[params]\nt1p = -4.0\n", &[]).unwrap();
        assert!(validate(&cfg).iter().any(|d| d.severity == Severity::Error && d.key == "params"));
    }

    #[test]
    fn unknown_keys_rejected_with_location() {
        let e = parse_config("experiment = \"sweep\"\n[params]\nw = 25.0\nbogus = 1\n", &[]).unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("bogus") && msg.contains("line 4"), "{msg}");
        assert!(parse_config("experiment = \"nope\"\n", &[]).is_err());
        assert!(parse_config("experiment = \"sweep\"\n[params]\nw = \"big\"\n", &[]).is_err());
    }

    #[test]
    fn overrides_apply() {
        let cfg = parse_config(
            "experiment = \"sweep\"\n",
            &["params.t1p=16".into(), "bench.gate=xcx".into(), "bench.t1p_grid=[8, 64]".into()],
        )
        .unwrap();
        assert_eq!(cfg.params.t1p, 16.0);
        assert_eq!(cfg.bench.gate, GateKind::Xcx);
        assert_eq!(cfg.bench.t1p_grid, vec![8.0, 64.0]);
        assert!(parse_config("experiment = \"sweep\"\n", &["params".into()]).is_err());
    }

    #[test]
    fn resolved_config_round_trips() {
        let mut cfg = RunConfig::new(Experiment::Sweep);
        cfg.pulse.ec.amplitude = Some(7.25);
        let back = parse_config(&cfg.to_toml().unwrap(), &[]).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn output_dir_precedence() {
        let mut cfg = RunConfig::new(Experiment::Idle);
        cfg.run.output_dir = Some("x/y".into());
        assert_eq!(output_dir(&cfg), PathBuf::from("x/y"));
    }
}
