//! 1/f dephasing noise: spectral synthesis, Ramsey calibration and
//! trajectory-averaged logical lifetimes.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::bench::{fit_exponential, ExpFit};
use crate::dynamics::{evolve_sampled, DensityState, IntegratorConfig};
use crate::error::{Result, VslqError};
use crate::model::{build_logical_ops, VslqParams};
use crate::pulse::{assemble_model, build_continuous_ec_schedule, DriveOperatorId, DriveSpec, Envelope};
use crate::qalg::{logical_basis, Copy};
use crate::units::angular;

/// Largest FFT length used for synthesis.
const MAX_FFT_LEN: usize = 1 << 24;

/// `S(f) ∝ 1/f` over `[f_min, f_max]` (MHz) with rms `amplitude` (MHz).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    /// Spectral exponent; only 1 is supported.
    #[serde(default = "one")]
    pub exponent: f64,
    pub f_min: f64,
    pub f_max: f64,
    pub amplitude: f64,
    pub seed: u64,
}

fn one() -> f64 {
    1.0
}

impl NoiseSpec {
    pub fn new(f_min: f64, f_max: f64, amplitude: f64, seed: u64) -> Self {
        Self { exponent: 1.0, f_min, f_max, amplitude, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.exponent != 1.0 {
            return Err(VslqError::InvalidParameter("only 1/f noise (exponent 1) is supported".into()));
        }
        if !(self.f_min > 0.0 && self.f_min < self.f_max && self.f_max.is_finite()) {
            return Err(VslqError::InvalidParameter(format!("noise band needs 0 < f_min < f_max, got [{}, {}]", self.f_min, self.f_max)));
        }
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return Err(VslqError::InvalidParameter("noise amplitude must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Default band for a run of `total` ns sampled every `dt` ns: a decade of
/// margin below `1/total` and below the Nyquist frequency. Returns MHz.
pub fn default_band(total: f64, dt: f64) -> (f64, f64) {
    (1e3 / (10.0 * total), 1e3 / (2.0 * dt * 10.0))
}

/// Samples `h(t_k)`, `t_k = k·dt`, in MHz.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseTrace {
    pub dt: f64,
    pub samples: Vec<f64>,
}

impl NoiseTrace {
    pub fn duration(&self) -> f64 {
        self.dt * (self.samples.len() - 1) as f64
    }

    /// Linear interpolation of the samples.
    pub fn envelope(&self) -> Envelope {
        Envelope::Piecewise { t0: 0.0, dt: self.dt, samples: self.samples.clone() }
    }

    /// `φ(t_k) = ∫₀^{t_k} 2π·h dt` (rad), exact for the interpolated trace.
    pub fn phase(&self) -> Vec<f64> {
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(self.samples.len());
        out.push(0.0);
        for w in self.samples.windows(2) {
            acc += 0.5 * (angular(w[0]) + angular(w[1])) * self.dt;
            out.push(acc);
        }
        out
    }
}

/// Seed of stream `index` derived from `master` (SplitMix64 of
/// `master + index·0x9E3779B97F4A7C15`).
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Spectral synthesis: amplitudes `∝ 1/√f` with uniform random phases on the
/// FFT bins inside the band, inverse-transformed. The FFT period is at least
/// `1/f_min`, and the first `duration/dt + 1` samples are returned. The rms
/// over one FFT period equals `spec.amplitude` exactly.
pub fn synthesize_trace(spec: &NoiseSpec, duration: f64, dt: f64) -> Result<NoiseTrace> {
    spec.validate()?;
    if !(dt > 0.0 && duration > 0.0) {
        return Err(VslqError::InvalidParameter("noise trace needs positive duration and dt".into()));
    }
    let n = (duration / dt).ceil() as usize + 1;
    if n < 16 {
        return Err(VslqError::InvalidParameter(format!("noise trace needs at least 16 samples, got {n}")));
    }
    let nyquist = 1e3 / (2.0 * dt);
    if spec.f_max > nyquist {
        return Err(VslqError::InvalidParameter(format!(
            "band edge {} MHz above the Nyquist frequency {nyquist} MHz",
            spec.f_max
        )));
    }
    let period_len = (1e3 / (spec.f_min * dt)).ceil();
    if !(period_len <= MAX_FFT_LEN as f64) {
        return Err(VslqError::InvalidParameter(format!("f_min = {} MHz needs an FFT longer than 2^24", spec.f_min)));
    }
    let m = n.max(period_len as usize).next_power_of_two();
    let df = 1e3 / (m as f64 * dt);
    let bins: Vec<usize> = (1..m / 2).filter(|&k| (spec.f_min..=spec.f_max).contains(&(k as f64 * df))).collect();
    if bins.is_empty() {
        return Err(VslqError::InvalidParameter("no frequency bins inside the noise band".into()));
    }
    if spec.amplitude == 0.0 {
        return Ok(NoiseTrace { dt, samples: vec![0.0; n] });
    }
    let norm: f64 = bins.iter().map(|&k| 1.0 / (k as f64 * df)).sum();
    let c = spec.amplitude / (2.0 * norm).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut spectrum = vec![C64::new(0.0, 0.0); m];
    for &k in &bins {
        let phi = rng.random::<f64>() * std::f64::consts::TAU;
        let v = C64::from_polar(c / (k as f64 * df).sqrt(), phi);
        spectrum[k] = v;
        spectrum[m - k] = v.conj();
    }
    FftPlanner::new().plan_fft_inverse(m).process(&mut spectrum);
    Ok(NoiseTrace { dt, samples: spectrum[..n].iter().map(|v| v.re).collect() })
}

/// Synthesis grid and ensemble of a dephasing study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DephasingSetup {
    /// Band, MHz.
    pub f_min: f64,
    pub f_max: f64,
    /// Trace sample step, ns.
    pub dt: f64,
    pub n_traces: usize,
    pub master_seed: u64,
}

impl Default for DephasingSetup {
    fn default() -> Self {
        let (f_min, f_max) = default_band(40_000.0, 1.0);
        Self { f_min, f_max, dt: 1.0, n_traces: 200, master_seed: 1 }
    }
}

fn unit_phases(setup: &DephasingSetup, window: f64, stream: u64) -> Result<Vec<Vec<f64>>> {
    (0..setup.n_traces)
        .into_par_iter()
        .map(|i| {
            let seed = derive_seed(setup.master_seed, stream.wrapping_mul(1 << 32).wrapping_add(i as u64));
            let spec = NoiseSpec::new(setup.f_min, setup.f_max, 1.0, seed);
            Ok(synthesize_trace(&spec, window, setup.dt)?.phase())
        })
        .collect()
}

/// `|⟨e^{−i·scale·φ(t)}⟩|` over the ensemble.
fn coherence(phases: &[Vec<f64>], scale: f64) -> Vec<f64> {
    let len = phases[0].len();
    (0..len)
        .map(|k| {
            let s: C64 = phases.iter().map(|p| C64::from_polar(1.0, -scale * p[k])).sum();
            s.norm() / phases.len() as f64
        })
        .collect()
}

/// First 1/e crossing (ns), linearly interpolated; infinite if none.
fn one_over_e_time(curve: &[f64], dt: f64) -> f64 {
    let thr = (-1.0f64).exp();
    for k in 1..curve.len() {
        if curve[k] < thr {
            let frac = (curve[k - 1] - thr) / (curve[k - 1] - curve[k]);
            return dt * ((k - 1) as f64 + frac);
        }
    }
    f64::INFINITY
}

/// Ramsey `T2R` (µs) of a two-level qubit with `H = h(t)|1⟩⟨1|`, where `h`
/// has rms `amplitude`: the 1/e time of `|⟨σ₊⟩|`, whose exact value per
/// trace is `e^{−iφ(t)}`. Infinite if no crossing inside `window` ns.
pub fn ramsey_t2r(amplitude: f64, setup: &DephasingSetup, window: f64) -> Result<f64> {
    let phases = unit_phases(setup, window, 0)?;
    Ok(one_over_e_time(&coherence(&phases, amplitude), setup.dt) / 1e3)
}

/// Coherence decay `|⟨e^{−i·level·φ}⟩|` of a `|0⟩ + |level⟩` superposition.
pub fn superposition_coherence(amplitude: f64, level: f64, setup: &DephasingSetup, window: f64) -> Result<Vec<f64>> {
    let phases = unit_phases(setup, window, 0)?;
    Ok(coherence(&phases, amplitude * level))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct T2rCalibration {
    pub target_t2r: f64,
    /// rms amplitude, MHz.
    pub amplitude: f64,
    /// Fitted T2R at that amplitude, µs.
    pub t2r: f64,
}

/// Bisection (in log amplitude) for the rms amplitude whose Ramsey 1/e time
/// is `target_t2r` µs. Uses one fixed ensemble, so the fitted T2R is
/// monotone in the amplitude.
pub fn calibrate_amplitude_to_t2r(target_t2r: f64, setup: &DephasingSetup) -> Result<T2rCalibration> {
    if !(target_t2r > 0.0 && target_t2r.is_finite()) {
        return Err(VslqError::InvalidParameter("target T2R must be positive".into()));
    }
    let window = 3.0 * target_t2r * 1e3;
    let phases = unit_phases(setup, window, 0)?;
    let t2r = |a: f64| one_over_e_time(&coherence(&phases, a), setup.dt) / 1e3;
    // Quasi-static estimate: rms phase 1 rad at the target time.
    let guess = 1.0 / angular(target_t2r * 1e3);
    let (mut lo, mut hi) = (guess, guess);
    let mut tries = 0;
    while t2r(lo) < target_t2r {
        lo /= 2.0;
        tries += 1;
        if tries > 60 {
            return Err(VslqError::CalibrationFailed("could not bracket the T2R target from below".into()));
        }
    }
    while t2r(hi) > target_t2r {
        hi *= 2.0;
        tries += 1;
        if tries > 120 {
            return Err(VslqError::CalibrationFailed("could not bracket the T2R target from above".into()));
        }
    }
    for _ in 0..60 {
        let mid = (lo * hi).sqrt();
        if t2r(mid) > target_t2r {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo < 1.0 + 1e-9 {
            break;
        }
    }
    let amplitude = (lo * hi).sqrt();
    Ok(T2rCalibration { target_t2r, amplitude, t2r: t2r(amplitude) })
}

/// Continuous-EC lifetime study with independent 1/f noise on both primaries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LifetimeConfig {
    /// `T2R / T1P`; `None` disables dephasing.
    pub t2r_ratio: Option<f64>,
    pub n_traces: usize,
    /// Constant EC drive, MHz.
    pub omega: f64,
    /// Shadow loss rate, 1/µs.
    pub gamma_s: f64,
    /// Simulated time, µs.
    pub duration: f64,
    /// Initial transient excluded from the fit, µs.
    pub skip: f64,
    /// Noise sample step, ns.
    pub noise_dt: f64,
    /// Curve sample stride, ns.
    pub sample_every: f64,
    pub master_seed: u64,
    pub n_bootstrap: usize,
}

impl Default for LifetimeConfig {
    fn default() -> Self {
        Self {
            t2r_ratio: Some(1.0),
            n_traces: 100,
            omega: 2.63,
            gamma_s: 23.3,
            duration: 16.0,
            skip: 1.0,
            noise_dt: 1.0,
            sample_every: 100.0,
            master_seed: 7,
            n_bootstrap: 200,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LifetimeReport {
    pub t2r_ratio: Option<f64>,
    pub t1p: f64,
    pub n_traces: usize,
    /// Noise rms amplitude, MHz.
    pub amplitude: f64,
    /// Logical lifetime, µs.
    pub t_l: f64,
    /// `T_L / T1P`.
    pub ratio: f64,
    pub fit_r2: f64,
    /// Bootstrap standard error of `t_l` over traces, µs.
    pub t_l_stderr: f64,
    pub master_seed: u64,
    /// Sample times, µs, and the trajectory-averaged `⟨X_L⟩`.
    pub times: Vec<f64>,
    pub curve: Vec<f64>,
}

fn fit_curve(times: &[f64], curve: &[f64], skip: f64) -> Result<ExpFit> {
    let (t, y): (Vec<f64>, Vec<f64>) = times.iter().zip(curve).filter(|(t, _)| **t >= skip).map(|(t, y)| (*t, *y)).unzip();
    fit_exponential(&t, &y)
}

/// Averages `⟨X_L⟩(t)` over `n_traces` noise realizations, starting from
/// `|0_L⟩`, and fits its exponential decay.
pub fn lifetime_under_1f(params: &VslqParams, cfg: &LifetimeConfig, icfg: &IntegratorConfig) -> Result<LifetimeReport> {
    let single = VslqParams { copies: 1, ..params.clone() };
    let layout = single.layout()?;
    let total = cfg.duration * 1e3;
    let base = build_continuous_ec_schedule(&single, cfg.omega, cfg.gamma_s, total)?;
    let x_l = build_logical_ops(&layout, Copy::Solo)?.x;
    let (zero, _) = logical_basis(&layout, Copy::Solo)?;
    let rho0 = DensityState::from_pure(&zero);
    let icfg = IntegratorConfig { sample_every: cfg.sample_every, ..icfg.clone() };
    let (f_min, f_max) = default_band(total, cfg.noise_dt);
    let setup = DephasingSetup { f_min, f_max, dt: cfg.noise_dt, n_traces: cfg.n_traces.max(1), master_seed: cfg.master_seed };
    let amplitude = match cfg.t2r_ratio {
        None => 0.0,
        Some(r) => calibrate_amplitude_to_t2r(r * params.t1p, &DephasingSetup { n_traces: 200, ..setup.clone() })?.amplitude,
    };

    let run = |schedule: &crate::pulse::GateSchedule| -> Result<(Vec<f64>, Vec<f64>)> {
        let model = assemble_model(&single, &layout, schedule)?;
        let (_, traj) = evolve_sampled(&rho0, &model, 0.0, total, &icfg, &[("x_l".into(), x_l.clone())])?;
        Ok((traj.times.iter().map(|t| t / 1e3).collect(), traj.column("x_l").unwrap_or_default()))
    };
    let (times, curves) = if amplitude == 0.0 {
        let (t, c) = run(&base)?;
        (t, vec![c])
    } else {
        let results: Vec<(Vec<f64>, Vec<f64>)> = (0..setup.n_traces)
            .into_par_iter()
            .map(|i| {
                let mut schedule = base.clone();
                for (q, label) in ["l", "r"].iter().enumerate() {
                    let seed = derive_seed(cfg.master_seed, (1u64 << 32) + 2 * i as u64 + q as u64);
                    let trace = synthesize_trace(&NoiseSpec::new(f_min, f_max, amplitude, seed), total, cfg.noise_dt)?;
                    schedule.drives.push(DriveSpec { op: DriveOperatorId::Number { label: label.to_string() }, envelope: trace.envelope() });
                }
                run(&schedule)
            })
            .collect::<Result<_>>()?;
        let times = results[0].0.clone();
        (times, results.into_iter().map(|r| r.1).collect())
    };
    let average = |idx: &[usize]| -> Vec<f64> {
        let mut acc = vec![0.0; times.len()];
        for &i in idx {
            for (a, v) in acc.iter_mut().zip(&curves[i]) {
                *a += v;
            }
        }
        acc.iter().map(|a| a / idx.len() as f64).collect()
    };
    let all: Vec<usize> = (0..curves.len()).collect();
    let curve = average(&all);
    let fit = fit_curve(&times, &curve, cfg.skip)?;
    let t_l_stderr = if curves.len() > 1 && cfg.n_bootstrap > 1 {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.master_seed, u64::MAX));
        let taus: Vec<f64> = (0..cfg.n_bootstrap)
            .filter_map(|_| {
                let idx: Vec<usize> = (0..curves.len()).map(|_| rng.random_range(0..curves.len())).collect();
                fit_curve(&times, &average(&idx), cfg.skip).ok().map(|f| f.tau)
            })
            .collect();
        let m = taus.iter().sum::<f64>() / taus.len() as f64;
        (taus.iter().map(|t| (t - m).powi(2)).sum::<f64>() / (taus.len() - 1).max(1) as f64).sqrt()
    } else {
        0.0
    };
    Ok(LifetimeReport {
        t2r_ratio: cfg.t2r_ratio,
        t1p: params.t1p,
        n_traces: curves.len(),
        amplitude,
        t_l: fit.tau,
        ratio: fit.tau / params.t1p,
        fit_r2: fit.r2,
        t_l_stderr,
        master_seed: cfg.master_seed,
        times,
        curve,
    })
}
