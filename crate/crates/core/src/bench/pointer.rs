use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::fit::fit_line;
use crate::dynamics::{evolve_sampled, DensityState, IntegratorConfig};
use crate::error::{Result, VslqError};
use crate::model::{lowering, VslqParams};
use crate::pulse::{assemble_model, build_measurement_schedule};
use crate::qalg::{embed1, logical_basis, projector, Copy, PureState, SystemLayout, DEFAULT_RESONATOR_DIM};

/// Readout drive `m(t)(X̃_l + X̃_r)(a_R + a_R†)` and resonator loss.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeasurementConfig {
    pub resonator_dim: usize,
    /// Resonator loss rate κ, 1/µs.
    pub kappa: f64,
    /// Plateau of `m(t)`, MHz.
    pub m_peak: f64,
    /// Ramp time of `m(t)`, ns.
    pub ramp: f64,
    pub duration: f64,
}

impl Default for MeasurementConfig {
    fn default() -> Self {
        Self { resonator_dim: DEFAULT_RESONATOR_DIM + 2, kappa: 1.0, m_peak: 0.5, ramp: 10.0, duration: 80.0 }
    }
}

/// Pointer displacement for the intact logical states and after one loss.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointerReport {
    pub times: Vec<f64>,
    /// `⟨i(a_R − a_R†)⟩` for `|0_L⟩`, `|1_L⟩` and `a_l|0_L⟩`.
    pub intact: Vec<f64>,
    pub intact_minus: Vec<f64>,
    pub lost: Vec<f64>,
    /// Fitted slopes on the plateau of `m(t)`, 1/ns.
    pub intact_slope: f64,
    pub intact_minus_slope: f64,
    pub lost_slope: f64,
    /// `lost_slope / intact_slope`.
    pub ratio: f64,
    /// Largest population of the top resonator level over the three runs.
    pub top_population: f64,
}

/// Evolves the readout for the two logical states and for `|0_L⟩` after an
/// `a_l` loss. The coupling is real, so starting from vacuum the displacement
/// is imaginary and shows up in the `i(a − a†)` quadrature.
pub fn measurement_pointer_study(params: &VslqParams, cfg: &MeasurementConfig, icfg: &IntegratorConfig) -> Result<PointerReport> {
    if !(cfg.duration > 2.0 * cfg.ramp && cfg.ramp > 0.0 && cfg.kappa >= 0.0) {
        return Err(VslqError::InvalidParameter("measurement needs duration > 2·ramp > 0 and κ ≥ 0".into()));
    }
    let single = VslqParams { copies: 1, ..params.clone() };
    let layout = SystemLayout::bare_pair().with_resonator(cfg.resonator_dim)?;
    let schedule = build_measurement_schedule(cfg.ramp, cfg.m_peak, cfg.kappa, cfg.duration);
    let model = assemble_model(&single, &layout, &schedule)?;
    let a = lowering(&layout, "R")?;
    let quad = (&a - &a.adjoint()).scale(C64::new(0.0, 1.0));
    let top = embed1(&projector(cfg.resonator_dim, cfg.resonator_dim - 1)?, "R", &layout)?;
    let observables = vec![("pointer".to_string(), quad), ("top".to_string(), top)];
    let (zero, one) = logical_basis(&layout, Copy::Solo)?;
    let lost = zero.apply_and_normalize(&lowering(&layout, "l")?)?;

    let run = |psi: &PureState| -> Result<(Vec<f64>, Vec<f64>, f64)> {
        let (_, traj) = evolve_sampled(&DensityState::from_pure(psi), &model, 0.0, cfg.duration, icfg, &observables)?;
        let p = traj.column("pointer").unwrap_or_default();
        let top = traj.column("top").unwrap_or_default().into_iter().fold(0.0, f64::max);
        Ok((traj.times, p, top))
    };
    let (times, intact, top0) = run(&zero)?;
    let (_, intact_minus, top1) = run(&one)?;
    let (_, lost_curve, top2) = run(&lost)?;
    let top_population = top0.max(top1).max(top2);
    if top_population > 1e-3 {
        return Err(VslqError::ResonatorSaturated(top_population));
    }
    let window: Vec<usize> = times.iter().enumerate().filter(|(_, t)| **t >= 2.0 * cfg.ramp).map(|(i, _)| i).collect();
    let slope = |y: &[f64]| {
        let ts: Vec<f64> = window.iter().map(|&i| times[i]).collect();
        let ys: Vec<f64> = window.iter().map(|&i| y[i]).collect();
        fit_line(&ts, &ys).0
    };
    let (s0, s1, sl) = (slope(&intact), slope(&intact_minus), slope(&lost_curve));
    Ok(PointerReport {
        ratio: sl / s0,
        times,
        intact,
        intact_minus,
        lost: lost_curve,
        intact_slope: s0,
        intact_minus_slope: s1,
        lost_slope: sl,
        top_population,
    })
}
