//! Drive envelopes and gate schedules: pulsed error-correction cycles, the
//! timed XCX gate, the second-order CZZ gate and single-copy rotations.

mod calibrate;
mod envelope;

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4};

use serde::{Deserialize, Serialize};

pub use calibrate::{
    calibrate_ec_amplitude, coherent_error, ec_recovery_fidelity, logical_x_projector, logical_zero_projector, tune_czz, tune_single, tune_xcx, EcCalibration,
    TuneReport,
};
pub use envelope::{integrate, Envelope};

use crate::dynamics::LindbladModel;
use crate::error::{Result, VslqError};
use crate::model::{
    build_ec_drive, build_logical_ops, czz_drive_ops, czz_single_ops, ideal_czz, ideal_xcx, lowering,
    measurement_hamiltonian, number_op, static_hamiltonian, xcx_drive_ops, Axis, VslqParams,
};
use crate::qalg::{exp_i_hermitian, Copy, Operator, Side, SystemLayout, ZVariant};
use crate::units::{angular, mhz_from_angular, rate_from_lifetime};

/// Pulsed error-correction cycle geometry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EcCycleConfig {
    /// Cycle period `T_R`, ns.
    pub period: f64,
    /// Fraction of the cycle during which the correction drive runs.
    pub drive_fraction: f64,
    /// Gaussian center as a fraction of the period.
    pub center_fraction: f64,
    /// Gaussian width σ as a fraction of the period.
    pub width_fraction: f64,
    /// Shadow loss rate during the dump window, 1/µs.
    pub gamma_fast: f64,
    /// Peak drive amplitude Ω, MHz. `None` means calibrate.
    pub amplitude: Option<f64>,
}

impl Default for EcCycleConfig {
    fn default() -> Self {
        Self {
            period: 100.0,
            drive_fraction: 0.7,
            center_fraction: 0.35,
            width_fraction: 0.15,
            gamma_fast: 25.0,
            amplitude: None,
        }
    }
}

impl EcCycleConfig {
    pub fn drive_end(&self) -> f64 {
        self.drive_fraction * self.period
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.period > 0.0
            && (0.0..1.0).contains(&self.drive_fraction)
            && self.center_fraction > 0.0
            && self.center_fraction < self.drive_fraction
            && self.width_fraction > 0.0
            && self.gamma_fast >= 0.0
            && self.amplitude.is_none_or(|a| a.is_finite());
        if ok {
            Ok(())
        } else {
            Err(VslqError::InvalidParameter(format!("inconsistent EC cycle configuration {self:?}")))
        }
    }

    /// Unit-peak drive profile of a single cycle.
    pub fn unit_profile(&self) -> Envelope {
        Envelope::Gaussian {
            amplitude: 1.0,
            center: self.center_fraction * self.period,
            width: self.width_fraction * self.period,
            start: 0.0,
            end: self.drive_end(),
        }
    }
}

/// XCX pulse shape; per-cycle Gaussians in the last part of each drive window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct XcxShape {
    /// Center as a fraction of the EC drive window.
    pub center_fraction: f64,
    /// σ as a fraction of the cycle period.
    pub width_fraction: f64,
    /// Fine-tuning multipliers on the single-copy and coupling areas.
    pub scale_f: f64,
    pub scale_g: f64,
}

impl Default for XcxShape {
    fn default() -> Self {
        Self { center_fraction: 0.85, width_fraction: 0.08, scale_f: 1.0, scale_g: 1.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CzzProfile {
    QuadraticArch,
    TanhWindow,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CzzShape {
    pub profile: CzzProfile,
    /// Edge time constant of the tanh window, ns.
    pub steepness: f64,
    pub scale_g: f64,
    pub scale_f: f64,
}

impl Default for CzzShape {
    fn default() -> Self {
        Self { profile: CzzProfile::QuadraticArch, steepness: 5.0, scale_g: 1.0, scale_f: 1.0 }
    }
}

/// Shape knobs of every schedule builder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PulseConfig {
    pub ec: EcCycleConfig,
    pub xcx: XcxShape,
    pub czz: CzzShape,
    /// Area multiplier for single-copy rotations.
    pub single_scale: f64,
    /// Allow cycle counts other than 2 and 4 for two-copy gates.
    pub allow_any_cycles: bool,
}

impl Default for PulseConfig {
    fn default() -> Self {
        Self {
            ec: EcCycleConfig::default(),
            xcx: XcxShape::default(),
            czz: CzzShape::default(),
            single_scale: 1.0,
            allow_any_cycles: false,
        }
    }
}

impl PulseConfig {
    pub fn validate(&self) -> Result<()> {
        self.ec.validate()?;
        let scales = [self.xcx.scale_f, self.xcx.scale_g, self.czz.scale_f, self.czz.scale_g, self.single_scale];
        if scales.iter().any(|s| !s.is_finite()) || !(self.czz.steepness > 0.0) {
            return Err(VslqError::InvalidParameter("pulse scales must be finite".into()));
        }
        Ok(())
    }
}

/// Symbolic drive operator, resolved against a layout at assembly time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DriveOperatorId {
    /// `a_q† a_Sq† + h.c.`
    EcDrive { copy: Copy, side: Side },
    /// `X_LA − X_LB`
    XcxSingle,
    /// `−X̃_lA X̃_lB` (sign of the coupling term included)
    XcxLeft,
    /// `−X̃_rA X̃_rB`
    XcxRight,
    /// `Z̃Z̃ + Z̃Z̃` coupling with the given Z variant on both pairs
    CzzCoupling { variant: ZVariant },
    /// `Z_LA − Z_LB`
    CzzSingle,
    Logical { copy: Copy, axis: Axis },
    /// `(X_L + Z_L)/√2`
    Hadamard { copy: Copy },
    /// `(X̃_l + X̃_r)(a_R + a_R†)`
    Readout { copy: Copy },
    /// Number operator of one subsystem (dephasing).
    Number { label: String },
}

/// Symbolic collapse channel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChannelId {
    PrimaryLoss { copy: Copy, side: Side },
    ShadowLoss { copy: Copy, side: Side },
    Resonator,
}

impl ChannelId {
    pub fn label(&self) -> String {
        match self {
            ChannelId::PrimaryLoss { copy, side } => format!("loss_{}", copy.label(side.primary())),
            ChannelId::ShadowLoss { copy, side } => format!("loss_{}", copy.label(side.shadow())),
            ChannelId::Resonator => "loss_R".into(),
        }
    }
}

/// Unitary that a schedule implements on the logical manifold when every
/// collapse rate is zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetGate {
    Identity,
    /// `exp(−iθ·O_L)`
    Rotation { copy: Copy, axis: Axis, angle: f64 },
    /// `exp(−iθ(X_L + Z_L)/√2)`
    HadamardRotation { copy: Copy, angle: f64 },
    /// `XCX†` (the timed drive implements the inverse of the ideal gate)
    XcxInverse,
    /// `CZZ†`
    CzzInverse,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriveSpec {
    pub op: DriveOperatorId,
    pub envelope: Envelope,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateSpec {
    pub channel: ChannelId,
    /// Rate Γ(t), 1/µs.
    pub envelope: Envelope,
}

/// Drive terms and collapse-rate schedules over `[0, duration]`, plus the
/// ideal gate the drive implements. Plain data: it serializes completely and
/// is resolved into operators by [`assemble_model`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateSchedule {
    pub duration: f64,
    pub copies: usize,
    pub drives: Vec<DriveSpec>,
    pub rates: Vec<RateSpec>,
    pub ec_cycle_count: usize,
    pub target: TargetGate,
}

impl GateSchedule {
    pub fn drive_envelope(&self, op: &DriveOperatorId) -> Option<&Envelope> {
        self.drives.iter().find(|d| &d.op == op).map(|d| &d.envelope)
    }

    pub fn rate_envelope(&self, channel: &ChannelId) -> Option<&Envelope> {
        self.rates.iter().find(|r| &r.channel == channel).map(|r| &r.envelope)
    }

    /// Every rate is nonnegative on a fine grid.
    pub fn rates_nonnegative(&self) -> bool {
        let n = 4000;
        self.rates.iter().all(|r| (0..=n).all(|k| r.envelope.eval(self.duration * k as f64 / n as f64) >= 0.0))
    }

    /// Same schedule with all collapse rates removed.
    pub fn noiseless(&self) -> Self {
        Self { rates: Vec::new(), ..self.clone() }
    }
}

fn copies_of(n: usize) -> Vec<Copy> {
    if n == 1 {
        vec![Copy::Solo]
    } else {
        vec![Copy::A, Copy::B]
    }
}

/// EC drive and loss schedules for `n_cycles` cycles on each copy.
fn ec_terms(params: &VslqParams, ec: &EcCycleConfig, amplitude: f64, copies: usize, n_cycles: usize) -> (Vec<DriveSpec>, Vec<RateSpec>) {
    let drive = Envelope::Periodic { period: ec.period, count: n_cycles, inner: Box::new(ec.unit_profile().scaled(amplitude)) };
    let slow = rate_from_lifetime(params.t1p);
    let shadow = Envelope::Periodic {
        period: ec.period,
        count: n_cycles,
        inner: Box::new(Envelope::Steps { times: vec![ec.drive_end()], values: vec![slow, ec.gamma_fast] }),
    };
    let mut drives = Vec::new();
    let mut rates = Vec::new();
    for copy in copies_of(copies) {
        for side in [Side::L, Side::R] {
            drives.push(DriveSpec { op: DriveOperatorId::EcDrive { copy, side }, envelope: drive.clone() });
            rates.push(RateSpec { channel: ChannelId::PrimaryLoss { copy, side }, envelope: Envelope::constant(slow) });
            rates.push(RateSpec { channel: ChannelId::ShadowLoss { copy, side }, envelope: shadow.clone() });
        }
    }
    (drives, rates)
}

fn ec_amplitude(ec: &EcCycleConfig) -> Result<f64> {
    ec.amplitude.ok_or_else(|| {
        VslqError::InvalidParameter("EC amplitude not set; run the EC calibration first".into())
    })
}

/// One EC cycle on a single copy with the given peak amplitude (MHz). The
/// shadow rate is `1/T1P` during the drive and `gamma_fast` afterwards.
pub fn build_ec_cycle(params: &VslqParams, ec: &EcCycleConfig, amplitude: f64) -> Result<GateSchedule> {
    params.validate()?;
    ec.validate()?;
    let (drives, rates) = ec_terms(params, ec, amplitude, 1, 1);
    Ok(GateSchedule { duration: ec.period, copies: 1, drives, rates, ec_cycle_count: 1, target: TargetGate::Identity })
}

/// Idle schedule: EC cycles only.
pub fn build_idle_schedule(params: &VslqParams, cfg: &PulseConfig, copies: usize, n_cycles: usize) -> Result<GateSchedule> {
    cfg.validate()?;
    let (drives, rates) = ec_terms(params, &cfg.ec, ec_amplitude(&cfg.ec)?, copies, n_cycles);
    Ok(GateSchedule {
        duration: cfg.ec.period * n_cycles as f64,
        copies,
        drives,
        rates,
        ec_cycle_count: n_cycles,
        target: TargetGate::Identity,
    })
}

/// Continuous error correction on one copy: constant drive `omega` (MHz) on
/// both sides and constant shadow loss `gamma_s` (1/µs).
pub fn build_continuous_ec_schedule(params: &VslqParams, omega: f64, gamma_s: f64, duration: f64) -> Result<GateSchedule> {
    params.validate()?;
    if !(duration > 0.0 && gamma_s >= 0.0 && omega.is_finite()) {
        return Err(VslqError::InvalidParameter("continuous EC needs duration > 0, Γ_S ≥ 0".into()));
    }
    let slow = rate_from_lifetime(params.t1p);
    let mut drives = Vec::new();
    let mut rates = Vec::new();
    for side in [Side::L, Side::R] {
        let copy = Copy::Solo;
        drives.push(DriveSpec { op: DriveOperatorId::EcDrive { copy, side }, envelope: Envelope::constant(omega) });
        rates.push(RateSpec { channel: ChannelId::PrimaryLoss { copy, side }, envelope: Envelope::constant(slow) });
        rates.push(RateSpec { channel: ChannelId::ShadowLoss { copy, side }, envelope: Envelope::constant(gamma_s) });
    }
    Ok(GateSchedule { duration, copies: 1, drives, rates, ec_cycle_count: 0, target: TargetGate::Identity })
}

fn check_cycles(cfg: &PulseConfig, n_cycles: usize) -> Result<()> {
    if n_cycles == 0 || (!cfg.allow_any_cycles && n_cycles != 2 && n_cycles != 4) {
        return Err(VslqError::InvalidParameter(format!(
            "two-copy gates run over 2 or 4 EC cycles (got {n_cycles}; set allow_any_cycles to override)"
        )));
    }
    Ok(())
}

/// Per-cycle unit-area Gaussian window of the XCX pulses.
fn xcx_unit_pulse(cfg: &PulseConfig) -> Envelope {
    let ec = &cfg.ec;
    let end = ec.drive_end();
    let center = cfg.xcx.center_fraction * end;
    let half = end - center;
    let shape = Envelope::Gaussian {
        amplitude: 1.0,
        center,
        width: cfg.xcx.width_fraction * ec.period,
        start: center - half,
        end,
    };
    let area = shape.integral(0.0, ec.period);
    shape.scaled(1.0 / area)
}

/// Timed XCX over `n_cycles` EC cycles. The pulse areas are
/// `∫f = π/4` and `∫g1 = ∫g2 = π/8` (rad), split evenly across cycles, so the
/// drive implements `XCX†` on the logical manifold.
pub fn build_xcx_schedule(params: &VslqParams, cfg: &PulseConfig, n_cycles: usize) -> Result<GateSchedule> {
    cfg.validate()?;
    check_cycles(cfg, n_cycles)?;
    let (mut drives, rates) = ec_terms(params, &cfg.ec, ec_amplitude(&cfg.ec)?, 2, n_cycles);
    let per_cycle = |area_rad: f64| Envelope::Periodic {
        period: cfg.ec.period,
        count: n_cycles,
        inner: Box::new(xcx_unit_pulse(cfg).scaled(mhz_from_angular(area_rad) / n_cycles as f64)),
    };
    drives.push(DriveSpec { op: DriveOperatorId::XcxSingle, envelope: per_cycle(FRAC_PI_4 * cfg.xcx.scale_f) });
    let g_area = FRAC_PI_4 / 2.0 * cfg.xcx.scale_g;
    drives.push(DriveSpec { op: DriveOperatorId::XcxLeft, envelope: per_cycle(g_area) });
    drives.push(DriveSpec { op: DriveOperatorId::XcxRight, envelope: per_cycle(g_area) });
    Ok(GateSchedule {
        duration: cfg.ec.period * n_cycles as f64,
        copies: 2,
        drives,
        rates,
        ec_cycle_count: n_cycles,
        target: TargetGate::XcxInverse,
    })
}

/// Unit-peak CZZ coupling profile over `[0, duration]`.
pub fn czz_unit_profile(shape: &CzzShape, duration: f64) -> Envelope {
    match shape.profile {
        CzzProfile::QuadraticArch => Envelope::QuadraticArch { amplitude: 1.0, start: 0.0, end: duration },
        CzzProfile::TanhWindow => {
            // Edges placed so the window is ~1e-6 of its plateau at t = 0 and T.
            let margin = 7.5 * shape.steepness;
            Envelope::TanhWindow { amplitude: 1.0, rise: margin, fall: duration - margin, steepness: shape.steepness }
        }
    }
}

/// Peak CZZ coupling (MHz) giving `∫ g²/W dt = π/2` (rad) for the profile.
pub fn czz_peak_mhz(params: &VslqParams, shape: &CzzShape, duration: f64) -> f64 {
    let unit = czz_unit_profile(shape, duration);
    let sq = unit.integral_of_square(0.0, duration);
    mhz_from_angular((FRAC_PI_2 * angular(params.w) / sq).sqrt())
}

/// Second-order CZZ over `n_cycles` EC cycles. The `Z̃''` coupling satisfies
/// `∫ g²/W dt = π/2`, which produces `exp(+iπ/4 Z_LA Z_LB)`; the single-copy
/// term `f(Z_LA − Z_LB)` with `∫f = π/4` completes `CZZ†`.
pub fn build_czz_schedule(params: &VslqParams, cfg: &PulseConfig, n_cycles: usize) -> Result<GateSchedule> {
    cfg.validate()?;
    check_cycles(cfg, n_cycles)?;
    let duration = cfg.ec.period * n_cycles as f64;
    let (mut drives, rates) = ec_terms(params, &cfg.ec, ec_amplitude(&cfg.ec)?, 2, n_cycles);
    let unit = czz_unit_profile(&cfg.czz, duration);
    let peak = czz_peak_mhz(params, &cfg.czz, duration) * cfg.czz.scale_g.sqrt();
    if peak > params.w / 2.0 {
        return Err(VslqError::InvalidParameter(format!(
            "CZZ peak coupling {peak:.2} MHz exceeds W/2; use a longer gate"
        )));
    }
    drives.push(DriveSpec {
        op: DriveOperatorId::CzzCoupling { variant: ZVariant::DoublePrime },
        envelope: unit.clone().scaled(peak),
    });
    let f_area = unit.integral(0.0, duration);
    drives.push(DriveSpec {
        op: DriveOperatorId::CzzSingle,
        envelope: unit.scaled(mhz_from_angular(FRAC_PI_4 * cfg.czz.scale_f) / f_area),
    });
    Ok(GateSchedule { duration, copies: 2, drives, rates, ec_cycle_count: n_cycles, target: TargetGate::CzzInverse })
}

/// Single-copy gate kinds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SingleGate {
    Idle,
    X,
    Z,
    Hadamard,
}

/// Single-copy rotation `g(t)·O` with `∫g = π/2` (so `exp(−iπ/2·O) = −iO`),
/// spread over `n_cycles` EC cycles using the EC drive-window shape.
pub fn build_single_qubit_schedule(params: &VslqParams, cfg: &PulseConfig, gate: SingleGate, n_cycles: usize) -> Result<GateSchedule> {
    let mut schedule = build_idle_schedule(params, cfg, 1, n_cycles)?;
    let op = match gate {
        SingleGate::Idle => return Ok(schedule),
        SingleGate::X => DriveOperatorId::Logical { copy: Copy::Solo, axis: Axis::X },
        SingleGate::Z => DriveOperatorId::Logical { copy: Copy::Solo, axis: Axis::Z },
        SingleGate::Hadamard => DriveOperatorId::Hadamard { copy: Copy::Solo },
    };
    let angle = FRAC_PI_2 * cfg.single_scale;
    let duration = schedule.duration;
    let unit = Envelope::TanhWindow { amplitude: 1.0, rise: 15.0, fall: duration - 15.0, steepness: 2.0 };
    let area = unit.integral(0.0, duration);
    schedule.drives.push(DriveSpec { op, envelope: unit.scaled(mhz_from_angular(angle) / area) });
    schedule.target = match gate {
        SingleGate::X => TargetGate::Rotation { copy: Copy::Solo, axis: Axis::X, angle: FRAC_PI_2 },
        SingleGate::Z => TargetGate::Rotation { copy: Copy::Solo, axis: Axis::Z, angle: FRAC_PI_2 },
        _ => TargetGate::HadamardRotation { copy: Copy::Solo, angle: FRAC_PI_2 },
    };
    Ok(schedule)
}

/// Readout schedule: `m(t)` ramp on the readout coupling and resonator loss κ.
pub fn build_measurement_schedule(ramp: f64, m_peak: f64, kappa: f64, duration: f64) -> GateSchedule {
    let m = Envelope::TanhWindow { amplitude: m_peak, rise: ramp, fall: duration + 10.0 * ramp, steepness: ramp / 3.0 };
    GateSchedule {
        duration,
        copies: 1,
        drives: vec![DriveSpec { op: DriveOperatorId::Readout { copy: Copy::Solo }, envelope: m }],
        rates: vec![RateSpec { channel: ChannelId::Resonator, envelope: Envelope::constant(kappa) }],
        ec_cycle_count: 0,
        target: TargetGate::Identity,
    }
}

fn resolve_drive(id: &DriveOperatorId, layout: &SystemLayout) -> Result<Operator> {
    Ok(match id {
        DriveOperatorId::EcDrive { copy, side } => build_ec_drive(layout, *copy, *side)?,
        DriveOperatorId::XcxSingle => xcx_drive_ops(layout)?.single,
        DriveOperatorId::XcxLeft => xcx_drive_ops(layout)?.left.scale_re(-1.0),
        DriveOperatorId::XcxRight => xcx_drive_ops(layout)?.right.scale_re(-1.0),
        DriveOperatorId::CzzCoupling { variant } => czz_drive_ops(layout, *variant)?,
        DriveOperatorId::CzzSingle => czz_single_ops(layout)?,
        DriveOperatorId::Logical { copy, axis } => build_logical_ops(layout, *copy)?.get(*axis).clone(),
        DriveOperatorId::Hadamard { copy } => {
            let ops = build_logical_ops(layout, *copy)?;
            (&ops.x + &ops.z).scale_re(FRAC_1_SQRT_2)
        }
        DriveOperatorId::Readout { copy } => measurement_hamiltonian(layout, *copy)?.0,
        DriveOperatorId::Number { label } => number_op(layout, label)?,
    })
}

fn resolve_channel(id: &ChannelId, layout: &SystemLayout) -> Result<Operator> {
    match id {
        ChannelId::PrimaryLoss { copy, side } => lowering(layout, &copy.label(side.primary())),
        ChannelId::ShadowLoss { copy, side } => lowering(layout, &copy.label(side.shadow())),
        ChannelId::Resonator => lowering(layout, "R"),
    }
}

/// Resolves a schedule into a Lindblad model on `layout`, with the static
/// Hamiltonian of every copy present.
pub fn assemble_model(params: &VslqParams, layout: &SystemLayout, schedule: &GateSchedule) -> Result<LindbladModel> {
    let mut model = LindbladModel::new(static_hamiltonian(params, layout)?);
    for d in &schedule.drives {
        model = model.with_drive(resolve_drive(&d.op, layout)?, d.envelope.clone());
    }
    for r in &schedule.rates {
        model = model.with_channel(r.channel.label(), resolve_channel(&r.channel, layout)?, r.envelope.clone());
    }
    Ok(model)
}

/// Unitary of the schedule's target gate on `layout`.
pub fn target_unitary(target: &TargetGate, layout: &SystemLayout) -> Result<Operator> {
    match target {
        TargetGate::Identity => Ok(Operator::identity(layout.dim())),
        TargetGate::Rotation { copy, axis, angle } => exp_i_hermitian(build_logical_ops(layout, *copy)?.get(*axis), -angle),
        TargetGate::HadamardRotation { copy, angle } => {
            let ops = build_logical_ops(layout, *copy)?;
            exp_i_hermitian(&(&ops.x + &ops.z).scale_re(FRAC_1_SQRT_2), -angle)
        }
        TargetGate::XcxInverse => Ok(ideal_xcx(layout)?.adjoint()),
        TargetGate::CzzInverse => Ok(ideal_czz(layout)?.adjoint()),
    }
}
