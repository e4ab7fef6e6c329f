//! Numerical calibration of drive amplitudes and gate angles.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use super::{
    assemble_model, build_czz_schedule, build_ec_cycle, build_single_qubit_schedule, build_xcx_schedule,
    EcCycleConfig, PulseConfig, SingleGate,
};
use crate::bench::coherent_gate_error;
use crate::dynamics::{evolve, DensityState, IntegratorConfig};
use crate::error::{Result, VslqError};
use crate::model::{half_projector, lowering, VslqParams};
use crate::qalg::{embed, expectation, logical_basis, Copy, Operator, SystemLayout};
use crate::units::angular;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EcCalibration {
    /// Peak Ω, MHz.
    pub amplitude: f64,
    /// Recovery fidelity at that amplitude.
    pub fidelity: f64,
    pub t1p: f64,
}

/// Overlap with `|0_L⟩` (shadows traced out) after one EC cycle started from
/// the normalized `a_l|0_L⟩`.
pub fn ec_recovery_fidelity(params: &VslqParams, ec: &EcCycleConfig, amplitude: f64, icfg: &IntegratorConfig) -> Result<f64> {
    let single = VslqParams { copies: 1, ..params.clone() };
    let layout = single.layout()?;
    let schedule = build_ec_cycle(&single, ec, amplitude)?;
    let model = assemble_model(&single, &layout, &schedule)?;
    let (zero, _) = logical_basis(&layout, Copy::Solo)?;
    let lost = zero.apply_and_normalize(&lowering(&layout, "l")?)?;
    let rho = evolve(&DensityState::from_pure(&lost), &model, 0.0, schedule.duration, icfg)?;
    expectation(&rho, &logical_zero_projector(&layout)?).map(|v| v.re)
}

/// `|0_L⟩⟨0_L|` on `(l, r)`, identity on every other subsystem.
pub fn logical_zero_projector(layout: &SystemLayout) -> Result<Operator> {
    let pair = SystemLayout::bare_pair();
    let (zero, _) = logical_basis(&pair, Copy::Solo)?;
    let a = zero.amps();
    let triplets = (0..9).flat_map(|i| (0..9).map(move |j| (i, j, a[i] * a[j].conj())));
    let local = Operator::from_triplets(9, triplets.filter(|t| t.2.norm() > 0.0));
    embed(&local, &["l", "r"], layout)
}

/// Golden-section search of the Gaussian peak amplitude maximizing the
/// one-cycle recovery fidelity, bracketed around the π-transfer estimate
/// `2π·A·∫shape = π/2`.
pub fn calibrate_ec_amplitude(params: &VslqParams, ec: &EcCycleConfig, icfg: &IntegratorConfig) -> Result<EcCalibration> {
    ec.validate()?;
    let area = ec.unit_profile().integral(0.0, ec.period);
    let guess = FRAC_PI_2 / angular(area);
    let f = |a: f64| ec_recovery_fidelity(params, ec, a, icfg).map(|v| -v);
    let (amplitude, neg) = golden_min(f, 0.5 * guess, 1.6 * guess, 1e-4 * guess)?;
    let fidelity = -neg;
    if fidelity < 0.9 {
        return Err(VslqError::CalibrationFailed(format!(
            "best EC recovery fidelity {fidelity:.4} at Ω = {amplitude:.3} MHz is below 0.9"
        )));
    }
    Ok(EcCalibration { amplitude, fidelity, t1p: params.t1p })
}

fn golden_min(mut f: impl FnMut(f64) -> Result<f64>, mut a: f64, mut b: f64, tol: f64) -> Result<(f64, f64)> {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d)?;
        }
    }
    Ok(if fc < fd { (c, fc) } else { (d, fd) })
}

/// Result of a gate-angle fine-tune.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuneReport {
    /// Tuned multipliers, in the order documented by each tuner.
    pub scales: Vec<f64>,
    /// No-noise gate error before and after tuning.
    pub initial_error: f64,
    pub error: f64,
    pub evaluations: usize,
}

/// Nelder–Mead on a small number of multipliers.
fn nelder_mead(mut f: impl FnMut(&[f64]) -> Result<f64>, start: &[f64], step: f64, tol: f64, max_eval: usize) -> Result<(Vec<f64>, f64, usize)> {
    let n = start.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((start.to_vec(), f(start)?));
    for i in 0..n {
        let mut p = start.to_vec();
        p[i] += step;
        let v = f(&p)?;
        simplex.push((p, v));
    }
    let mut evals = n + 1;
    while evals < max_eval {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        if simplex[n].1 - simplex[0].1 <= tol * simplex[0].1.abs().max(1e-300) || simplex[0].1 < 1e-13 {
            break;
        }
        let centroid: Vec<f64> = (0..n).map(|k| simplex[..n].iter().map(|p| p.0[k]).sum::<f64>() / n as f64).collect();
        let along = |t: f64| -> Vec<f64> { (0..n).map(|k| centroid[k] + t * (simplex[n].0[k] - centroid[k])).collect() };
        let xr = along(-1.0);
        let fr = f(&xr)?;
        evals += 1;
        if fr < simplex[0].1 {
            let xe = along(-2.0);
            let fe = f(&xe)?;
            evals += 1;
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let xc = if fr < simplex[n].1 { along(-0.5) } else { along(0.5) };
            let fc = f(&xc)?;
            evals += 1;
            if fc < simplex[n].1.min(fr) {
                simplex[n] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for p in simplex.iter_mut().skip(1) {
                    p.0 = (0..n).map(|k| best[k] + 0.5 * (p.0[k] - best[k])).collect();
                    p.1 = f(&p.0)?;
                    evals += 1;
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, v) = simplex.swap_remove(0);
    Ok((x, v, evals))
}

/// No-noise error of a schedule.
pub fn coherent_error(params: &VslqParams, schedule: &super::GateSchedule, icfg: &IntegratorConfig) -> Result<f64> {
    let p = VslqParams { copies: schedule.copies, ..params.clone() };
    coherent_gate_error(&p, &p.layout()?, schedule, icfg)
}

/// Tunes `(scale_f, scale_g)` of the XCX schedule to minimize the no-noise
/// error, writing the result into `cfg.xcx`.
pub fn tune_xcx(params: &VslqParams, cfg: &mut PulseConfig, n_cycles: usize, icfg: &IntegratorConfig) -> Result<TuneReport> {
    let base = cfg.clone();
    let eval = |s: &[f64]| {
        let mut c = base.clone();
        c.xcx.scale_f = s[0];
        c.xcx.scale_g = s[1];
        coherent_error(params, &build_xcx_schedule(params, &c, n_cycles)?, icfg)
    };
    let start = [cfg.xcx.scale_f, cfg.xcx.scale_g];
    let report = tune(eval, &start)?;
    cfg.xcx.scale_f = report.scales[0];
    cfg.xcx.scale_g = report.scales[1];
    Ok(report)
}

/// Tunes `(scale_g, scale_f)` of the CZZ schedule, writing into `cfg.czz`.
pub fn tune_czz(params: &VslqParams, cfg: &mut PulseConfig, n_cycles: usize, icfg: &IntegratorConfig) -> Result<TuneReport> {
    let base = cfg.clone();
    let eval = |s: &[f64]| {
        let mut c = base.clone();
        c.czz.scale_g = s[0];
        c.czz.scale_f = s[1];
        coherent_error(params, &build_czz_schedule(params, &c, n_cycles)?, icfg)
    };
    let start = [cfg.czz.scale_g, cfg.czz.scale_f];
    let report = tune(eval, &start)?;
    cfg.czz.scale_g = report.scales[0];
    cfg.czz.scale_f = report.scales[1];
    Ok(report)
}

/// Tunes the single-copy rotation area, writing into `cfg.single_scale`.
pub fn tune_single(params: &VslqParams, cfg: &mut PulseConfig, gate: SingleGate, n_cycles: usize, icfg: &IntegratorConfig) -> Result<TuneReport> {
    let base = cfg.clone();
    let eval = |s: &[f64]| {
        let mut c = base.clone();
        c.single_scale = s[0];
        coherent_error(params, &build_single_qubit_schedule(params, &c, gate, n_cycles)?, icfg)
    };
    let report = tune(eval, &[cfg.single_scale])?;
    cfg.single_scale = report.scales[0];
    Ok(report)
}

fn tune(mut eval: impl FnMut(&[f64]) -> Result<f64>, start: &[f64]) -> Result<TuneReport> {
    let initial_error = eval(start)?;
    let (scales, error, evaluations) = nelder_mead(&mut eval, start, 0.01, 1e-6, 150)?;
    Ok(TuneReport { scales, initial_error, error, evaluations: evaluations + 1 })
}

/// `(1 + X_L)/2` on a single-copy layout; used by calibration reports.
pub fn logical_x_projector(layout: &SystemLayout) -> Result<Operator> {
    Ok(half_projector(&crate::model::build_logical_ops(layout, Copy::Solo)?.x, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_finds_parabola_minimum() {
        let (x, v) = golden_min(|x| Ok((x - 1.3).powi(2) + 2.0), 0.0, 3.0, 1e-8).unwrap();
        assert!((x - 1.3).abs() < 1e-6 && (v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn nelder_mead_quadratic() {
        let (x, v, _) = nelder_mead(|p| Ok((p[0] - 1.0).powi(2) + 3.0 * (p[1] + 0.5).powi(2) + 1e-6), &[0.0, 0.0], 0.1, 1e-9, 500).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-3 && (x[1] + 0.5).abs() < 1e-3, "{x:?}");
        assert!(v < 1.1e-6);
    }

    #[test]
    fn zero_projector_selects_logical_zero() {
        let layout = SystemLayout::single_vslq(2).unwrap();
        let p = logical_zero_projector(&layout).unwrap();
        let (zero, one) = logical_basis(&layout, Copy::Solo).unwrap();
        assert!((zero.expectation(&p).unwrap().re - 1.0).abs() < 1e-14);
        assert!(one.expectation(&p).unwrap().norm() < 1e-14);
    }
}
