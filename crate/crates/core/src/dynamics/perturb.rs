use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::{integrate, sample_grid, CompileOptions, CompiledModel, Direction, IntegratorConfig, LindbladModel, PureFlow};
use crate::error::{Result, VslqError};
use crate::model::{build_hp, czz_drive_ops, lowering, VslqParams};
use crate::pulse::Envelope;
use crate::qalg::{Copy, PureState, SystemLayout, ZVariant};
use crate::units::angular;

/// Relative phase between the `Z_LA Z_LB = ±1` sectors under a constant CZZ
/// coupling.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseCheck {
    pub g_mhz: f64,
    pub duration: f64,
    pub loss_at: Option<f64>,
    /// Fitted `d(φ₊ − φ₋)/dt` in rad/ns over the whole run (before the loss
    /// when one is applied).
    pub rate: f64,
    /// Fitted rate after the photon loss.
    pub rate_after_loss: Option<f64>,
    /// `g²/W` in rad/ns.
    pub expected_rate: f64,
    /// Unwrapped `φ₊ − φ₋` accumulated over the run, rad.
    pub accumulated_phase: f64,
    /// Probability left in the two tracked sector states at the end.
    pub final_overlap: f64,
}

/// Evolves `(|Z+⟩_A|Z+⟩_B + |Z+⟩_A|Z−⟩_B)/√2` under both copies' `H_P` plus
/// `g(Z̃''_lA Z̃''_lB + Z̃''_rA Z̃''_rB)` and tracks the relative sector phase.
/// With `loss_at`, `a_lA` is applied at that time and tracking continues
/// against the correspondingly transformed sector states. The shadow
/// transmons play no part and are left out of the layout.
pub fn perturbative_phase_check(
    params: &VslqParams,
    g_mhz: f64,
    duration: f64,
    loss_at: Option<f64>,
    cfg: &IntegratorConfig,
) -> Result<PhaseCheck> {
    params.validate()?;
    if !(g_mhz.abs() <= params.w / 4.0) {
        return Err(VslqError::InvalidParameter(format!(
            "g = {g_mhz} MHz exceeds the perturbative guard W/4 = {} MHz",
            params.w / 4.0
        )));
    }
    if !(duration > 0.0) {
        return Err(VslqError::InvalidParameter("duration must be positive".into()));
    }
    if let Some(tl) = loss_at {
        if !(tl > 0.0 && tl < duration) {
            return Err(VslqError::InvalidParameter("loss time must lie inside the run".into()));
        }
    }
    let layout = SystemLayout::new([("lA", 3), ("rA", 3), ("lB", 3), ("rB", 3)])?;
    let h0 = &build_hp(params, &layout, Copy::A)? + &build_hp(params, &layout, Copy::B)?;
    let model = LindbladModel::new(h0).with_drive(czz_drive_ops(&layout, ZVariant::DoublePrime)?, Envelope::constant(g_mhz));
    let compiled = CompiledModel::new(
        &model,
        CompileOptions {
            split_diagonal: cfg.method == super::Method::Rk4Interaction,
            dissipation: false,
            direction: Direction::Forward,
        },
    );

    let (zp, zm) = (z_eigenstate(1.0), z_eigenstate(-1.0));
    let plus = zp.kron(&zp);
    let minus = zp.kron(&zm);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let psi0: Vec<C64> = plus.amps().iter().zip(minus.amps()).map(|(a, b)| s * (a + b)).collect();

    let stride = cfg.sample_every.min(duration / 50.0);
    let mut segments = vec![(0.0, loss_at.unwrap_or(duration))];
    if let Some(tl) = loss_at {
        segments.push((tl, duration));
    }
    let a_la = lowering(&layout, "lA")?;
    let mut refs = (plus, minus);
    let mut x = psi0;
    let mut rates = Vec::new();
    let mut phase_offset = 0.0;
    let mut last_phase = None;
    let mut final_overlap = 0.0;
    for (k, &(a, b)) in segments.iter().enumerate() {
        if k > 0 {
            x = a_la.apply(&x);
            let norm = x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            x.iter_mut().for_each(|v| *v /= norm);
            refs = (refs.0.apply_and_normalize(&a_la)?, refs.1.apply_and_normalize(&a_la)?);
        }
        let mut ts = Vec::new();
        let mut phases = Vec::new();
        let mut flow = PureFlow::new(&compiled);
        let samples = sample_grid(a, b, stride);
        integrate(&mut flow, &mut x, a, b, cfg, &samples, |t, psi| {
            let cp: C64 = refs.0.amps().iter().zip(psi).map(|(r, v)| r.conj() * v).sum();
            let cm: C64 = refs.1.amps().iter().zip(psi).map(|(r, v)| r.conj() * v).sum();
            let raw = cp.arg() - cm.arg();
            let unwrapped = match last_phase {
                None => raw,
                Some(prev) => prev + wrap(raw - prev),
            };
            last_phase = Some(unwrapped);
            ts.push(t);
            phases.push(unwrapped);
            final_overlap = cp.norm_sqr() + cm.norm_sqr();
            Ok(())
        })?;
        rates.push(slope(&ts, &phases));
        if k == 0 {
            phase_offset = phases[0];
        }
    }
    Ok(PhaseCheck {
        g_mhz,
        duration,
        loss_at,
        rate: rates[0],
        rate_after_loss: rates.get(1).copied(),
        expected_rate: angular(g_mhz).powi(2) / angular(params.w),
        accumulated_phase: last_phase.unwrap_or(0.0) - phase_offset,
        final_overlap,
    })
}

/// `Z_L = ±1` eigenstate of one copy on its `(l, r)` pair:
/// `(|0_L⟩ ± |1_L⟩)/√2`, i.e. `(|00⟩ + |22⟩)/√2` or `(|02⟩ + |20⟩)/√2`.
fn z_eigenstate(sign: f64) -> PureState {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut v = vec![C64::new(0.0, 0.0); 9];
    if sign > 0.0 {
        v[0] = C64::new(s, 0.0);
        v[8] = C64::new(s, 0.0);
    } else {
        v[2] = C64::new(s, 0.0);
        v[6] = C64::new(s, 0.0);
    }
    PureState::new(v).expect("normalized")
}

fn wrap(x: f64) -> f64 {
    use std::f64::consts::PI;
    (x + PI).rem_euclid(2.0 * PI) - PI
}

fn slope(t: &[f64], y: &[f64]) -> f64 {
    let n = t.len() as f64;
    let (mt, my) = (t.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = t.iter().zip(y).map(|(a, b)| (a - mt) * (b - my)).sum();
    let sxx: f64 = t.iter().map(|a| (a - mt).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_logical_ops;

    #[test]
    fn z_eigenstates_match_logical_operator() {
        let layout = SystemLayout::bare_pair();
        let z = build_logical_ops(&layout, Copy::Solo).unwrap().z;
        for sign in [1.0, -1.0] {
            let psi = z_eigenstate(sign);
            assert!((psi.expectation(&z).unwrap().re - sign).abs() < 1e-15);
        }
    }

    #[test]
    fn guard_rejects_strong_coupling() {
        let p = VslqParams::default();
        assert!(perturbative_phase_check(&p, 7.0, 100.0, None, &IntegratorConfig::default()).is_err());
    }

    #[test]
    fn zero_coupling_gives_no_phase() {
        let p = VslqParams::default();
        let r = perturbative_phase_check(&p, 0.0, 200.0, None, &IntegratorConfig::default()).unwrap();
        assert!(r.accumulated_phase.abs() < 1e-10);
    }
}
