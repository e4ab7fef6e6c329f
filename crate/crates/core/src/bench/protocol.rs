use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{evolve, evolve_adjoint, evolve_pure, DensityState, IntegratorConfig};
use crate::error::{Result, VslqError};
use crate::model::{build_logical_ops, half_projector, number_op, Axis, VslqParams};
use crate::pulse::{assemble_model, build_idle_schedule, target_unitary, GateSchedule, PulseConfig};
use crate::qalg::{exp_i_hermitian, expectation, logical_basis, logical_product, Copy, Logical, Operator, PureState, SystemLayout};

/// Canonical preparation directions on the logical Bloch sphere.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BlochDirection {
    #[serde(rename = "+X")]
    PlusX,
    #[serde(rename = "-X")]
    MinusX,
    #[serde(rename = "+Y")]
    PlusY,
    #[serde(rename = "-Y")]
    MinusY,
    #[serde(rename = "+Z")]
    PlusZ,
    #[serde(rename = "-Z")]
    MinusZ,
}

impl BlochDirection {
    pub const ALL: [BlochDirection; 6] = [
        BlochDirection::PlusX,
        BlochDirection::MinusX,
        BlochDirection::PlusY,
        BlochDirection::MinusY,
        BlochDirection::PlusZ,
        BlochDirection::MinusZ,
    ];

    pub fn axis(self) -> Axis {
        match self {
            BlochDirection::PlusX | BlochDirection::MinusX => Axis::X,
            BlochDirection::PlusY | BlochDirection::MinusY => Axis::Y,
            BlochDirection::PlusZ | BlochDirection::MinusZ => Axis::Z,
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            BlochDirection::PlusX | BlochDirection::PlusY | BlochDirection::PlusZ => 1.0,
            _ => -1.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            BlochDirection::PlusX => "+X",
            BlochDirection::MinusX => "-X",
            BlochDirection::PlusY => "+Y",
            BlochDirection::MinusY => "-Y",
            BlochDirection::PlusZ => "+Z",
            BlochDirection::MinusZ => "-Z",
        }
    }
}

impl std::str::FromStr for BlochDirection {
    type Err = VslqError;

    fn from_str(s: &str) -> Result<Self> {
        BlochDirection::ALL
            .into_iter()
            .find(|d| d.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| VslqError::InvalidParameter(format!("unknown direction `{s}`")))
    }
}

/// Rotation taking `|0_L⟩` (the `X_L = +1` state) to `dir`:
///
/// | dir | unitary |
/// |-----|---------|
/// | +X  | 1 |
/// | −X  | exp(−i(π/2) Z_L) |
/// | +Y  | exp(−i(π/4) Z_L) |
/// | −Y  | exp(+i(π/4) Z_L) |
/// | +Z  | exp(+i(π/4) Y_L) |
/// | −Z  | exp(−i(π/4) Y_L) |
pub fn direction_unitary(layout: &SystemLayout, copy: Copy, dir: BlochDirection) -> Result<Operator> {
    let ops = build_logical_ops(layout, copy)?;
    match dir {
        BlochDirection::PlusX => Ok(Operator::identity(layout.dim())),
        BlochDirection::MinusX => exp_i_hermitian(&ops.z, -FRAC_PI_2),
        BlochDirection::PlusY => exp_i_hermitian(&ops.z, -FRAC_PI_4),
        BlochDirection::MinusY => exp_i_hermitian(&ops.z, FRAC_PI_4),
        BlochDirection::PlusZ => exp_i_hermitian(&ops.y, FRAC_PI_4),
        BlochDirection::MinusZ => exp_i_hermitian(&ops.y, -FRAC_PI_4),
    }
}

/// Applies the exact direction rotation to `copy`.
pub fn prepare_direction(rho: &DensityState, layout: &SystemLayout, copy: Copy, dir: BlochDirection) -> Result<DensityState> {
    rho.apply_unitary(&direction_unitary(layout, copy, dir)?)
}

/// Equilibrated single-copy state at a cycle boundary.
#[derive(Clone, Debug)]
pub struct Equilibrium {
    pub state: DensityState,
    /// `⟨(1 + X_L)/2⟩` after the last cycle.
    pub fidelity: f64,
    /// Change of that fidelity over the last cycle.
    pub drift: f64,
    /// Total shadow excitation at the last cycle boundary.
    pub shadow_population: f64,
}

/// Runs `n_cycles` EC cycles on one copy starting from `|0_L⟩`. Copies are
/// uncoupled between gates, so a two-copy initial state is the tensor
/// product of two such states. Without dissipation the result is `|0_L⟩`.
pub fn equilibrate(
    params: &VslqParams,
    pulse: &PulseConfig,
    n_cycles: usize,
    dissipation: bool,
    icfg: &IntegratorConfig,
) -> Result<Equilibrium> {
    let single = VslqParams { copies: 1, ..params.clone() };
    let layout = single.layout()?;
    let (zero, _) = logical_basis(&layout, Copy::Solo)?;
    let mut rho = DensityState::from_pure(&zero);
    if !dissipation || n_cycles == 0 {
        return Ok(Equilibrium { state: rho, fidelity: 1.0, drift: 0.0, shadow_population: 0.0 });
    }
    let schedule = build_idle_schedule(&single, pulse, 1, 1)?;
    let model = assemble_model(&single, &layout, &schedule)?;
    let px = half_projector(&build_logical_ops(&layout, Copy::Solo)?.x, 1.0);
    let mut prev = 1.0;
    let mut fidelity = 1.0;
    for _ in 0..n_cycles {
        rho = evolve(&rho, &model, 0.0, schedule.duration, icfg)?.with_time(0.0);
        prev = fidelity;
        fidelity = expectation(&rho, &px)?.re;
    }
    let shadows = &number_op(&layout, "Sl")? + &number_op(&layout, "Sr")?;
    let shadow_population = expectation(&rho, &shadows)?.re;
    if fidelity < 0.9 {
        return Err(VslqError::EquilibrationFailed { fidelity, threshold: 0.9 });
    }
    Ok(Equilibrium { state: rho, fidelity, drift: (fidelity - prev).abs(), shadow_population })
}

/// How the after-gate fidelities are computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorMode {
    /// Evolve each prepared state forward.
    Forward,
    /// Evolve the (undone) projector span backwards once per Pauli product
    /// and contract with every prepared state. Identical results, fewer
    /// evolutions for two copies (15 instead of 36).
    Heisenberg,
}

/// Direction-averaged fidelity loss of one gate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateErrorReport {
    pub gate: String,
    pub t1p: f64,
    /// Gate duration, ns.
    pub duration: f64,
    pub n_cycles: usize,
    pub mode: ErrorMode,
    /// One label per initial condition, e.g. `+X` or `+X,-Z`.
    pub labels: Vec<String>,
    pub fidelity_before: Vec<f64>,
    pub fidelity_after: Vec<f64>,
    /// `fidelity_before − fidelity_after` per initial condition.
    pub deltas: Vec<f64>,
    /// Mean of `deltas`.
    pub p: f64,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn copies_for(n: usize) -> Vec<Copy> {
    if n == 1 {
        vec![Copy::Solo]
    } else {
        vec![Copy::A, Copy::B]
    }
}

/// Every direction assignment, copy-major.
fn direction_grid(n_copies: usize) -> Vec<Vec<BlochDirection>> {
    let mut grid = vec![Vec::new()];
    for _ in 0..n_copies {
        grid = grid
            .into_iter()
            .flat_map(|g| {
                BlochDirection::ALL.into_iter().map(move |d| {
                    let mut n = g.clone();
                    n.push(d);
                    n
                })
            })
            .collect();
    }
    grid
}

fn grid_label(dirs: &[BlochDirection]) -> String {
    dirs.iter().map(|d| d.label()).collect::<Vec<_>>().join(",")
}

struct Setup {
    layout: SystemLayout,
    copies: Vec<Copy>,
    grid: Vec<Vec<BlochDirection>>,
    prep: Vec<Operator>,
    proj: Vec<Operator>,
}

impl Setup {
    fn new(layout: SystemLayout, n_copies: usize) -> Result<Self> {
        let copies = copies_for(n_copies);
        let ops: Vec<_> = copies.iter().map(|&c| build_logical_ops(&layout, c)).collect::<Result<_>>()?;
        let grid = direction_grid(n_copies);
        let mut prep = Vec::with_capacity(grid.len());
        let mut proj = Vec::with_capacity(grid.len());
        for dirs in &grid {
            let mut v = Operator::identity(layout.dim());
            let mut p = Operator::identity(layout.dim());
            for ((&c, &d), o) in copies.iter().zip(dirs).zip(&ops) {
                v = &v * &direction_unitary(&layout, c, d)?;
                p = &p * &o.projector(d.axis(), d.sign());
            }
            prep.push(v);
            proj.push(p);
        }
        Ok(Self { layout, copies, grid, prep, proj })
    }
}

fn two_copy_state(rho_single: &DensityState, n_copies: usize) -> DensityState {
    if n_copies == 1 {
        rho_single.clone()
    } else {
        rho_single.kron(rho_single)
    }
}

fn finish(
    setup: &Setup,
    schedule: &GateSchedule,
    t1p: f64,
    mode: ErrorMode,
    before: Vec<f64>,
    after: Vec<f64>,
) -> GateErrorReport {
    let deltas: Vec<f64> = before.iter().zip(&after).map(|(b, a)| b - a).collect();
    GateErrorReport {
        gate: String::new(),
        t1p,
        duration: schedule.duration,
        n_cycles: schedule.ec_cycle_count,
        mode,
        labels: setup.grid.iter().map(|d| grid_label(d)).collect(),
        p: mean(&deltas),
        fidelity_before: before,
        fidelity_after: after,
        deltas,
    }
}

fn labeled<T>(label: impl Into<String>, r: Result<T>) -> Result<T> {
    r.map_err(|e| VslqError::InitialCondition { label: label.into(), source: Box::new(e) })
}

/// The measurement protocol with an arbitrary physical channel in place of
/// the simulated gate: prepare each direction from `rho0_single`, measure
/// the matching projector, apply `channel`, undo with `target†`, measure
/// again.
pub fn gate_error_with_channel<F>(
    layout: &SystemLayout,
    n_copies: usize,
    rho0_single: &DensityState,
    target: &Operator,
    channel: F,
) -> Result<(Vec<String>, Vec<f64>, Vec<f64>)>
where
    F: Fn(&DensityState) -> Result<DensityState> + Sync,
{
    let setup = Setup::new(layout.clone(), n_copies)?;
    let rho0 = two_copy_state(rho0_single, n_copies);
    let undo = target.adjoint();
    let rows: Vec<(f64, f64)> = (0..setup.grid.len())
        .into_par_iter()
        .map(|k| {
            let label = grid_label(&setup.grid[k]);
            labeled(label, (|| {
                let rho = rho0.apply_unitary(&setup.prep[k])?;
                let before = expectation(&rho, &setup.proj[k])?.re;
                let out = channel(&rho)?.apply_unitary(&undo)?;
                Ok((before, expectation(&out, &setup.proj[k])?.re))
            })())
        })
        .collect::<Result<_>>()?;
    let labels = setup.grid.iter().map(|d| grid_label(d)).collect();
    Ok((labels, rows.iter().map(|r| r.0).collect(), rows.iter().map(|r| r.1).collect()))
}

/// Direction-averaged error of `schedule` starting from the equilibrated
/// single-copy state (replicated on both copies for two-copy gates).
pub fn gate_error(
    params: &VslqParams,
    schedule: &GateSchedule,
    rho0_single: &DensityState,
    icfg: &IntegratorConfig,
    mode: ErrorMode,
) -> Result<GateErrorReport> {
    let params = VslqParams { copies: schedule.copies, ..params.clone() };
    let layout = params.layout()?;
    let model = assemble_model(&params, &layout, schedule)?;
    let target = target_unitary(&schedule.target, &layout)?;
    let duration = schedule.duration;
    let setup = Setup::new(layout, schedule.copies)?;
    match mode {
        ErrorMode::Forward => {
            let (_, before, after) =
                gate_error_with_channel(&setup.layout, schedule.copies, rho0_single, &target, |rho| {
                    evolve(rho, &model, 0.0, duration, icfg)
                })?;
            Ok(finish(&setup, schedule, params.t1p, mode, before, after))
        }
        ErrorMode::Heisenberg => {
            let rho0 = two_copy_state(rho0_single, schedule.copies);
            let evolved = heisenberg_span(&setup, &target, |op| evolve_adjoint(op, &model, 0.0, duration, icfg))?;
            let n = setup.layout.dim();
            let (before, after): (Vec<f64>, Vec<f64>) = (0..setup.grid.len())
                .into_par_iter()
                .map(|k| {
                    let rho = rho0.apply_unitary(&setup.prep[k])?;
                    let before = expectation(&rho, &setup.proj[k])?.re;
                    let after: f64 = projector_coefficients(&setup.grid[k])
                        .into_iter()
                        .map(|(key, coef)| match evolved.iter().find(|e| e.0 == key) {
                            None => coef,
                            Some((_, a)) => coef * trace_product(a, rho.data(), n),
                        })
                        .sum();
                    Ok((before, after))
                })
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .unzip();
            Ok(finish(&setup, schedule, params.t1p, mode, before, after))
        }
    }
}

/// Pauli index per copy: 0 = identity, 1..=3 = X, Y, Z.
type PauliKey = Vec<usize>;

fn axis_index(a: Axis) -> usize {
    match a {
        Axis::X => 1,
        Axis::Y => 2,
        Axis::Z => 3,
    }
}

/// Expansion of `∏ (1 + s_c O_c)/2` over Pauli products.
fn projector_coefficients(dirs: &[BlochDirection]) -> Vec<(PauliKey, f64)> {
    let mut terms: Vec<(PauliKey, f64)> = vec![(Vec::new(), 1.0)];
    for d in dirs {
        terms = terms
            .into_iter()
            .flat_map(|(k, c)| {
                let mut id = k.clone();
                id.push(0);
                let mut ax = k;
                ax.push(axis_index(d.axis()));
                [(id, 0.5 * c), (ax, 0.5 * c * d.sign())]
            })
            .collect();
    }
    terms
}

/// Heisenberg-evolved `T·B·T†` for every non-identity Pauli product `B`.
fn heisenberg_span<F>(setup: &Setup, target: &Operator, adjoint: F) -> Result<Vec<(PauliKey, Vec<C64>)>>
where
    F: Fn(&[C64]) -> Result<Vec<C64>> + Sync,
{
    let layout = &setup.layout;
    let ops: Vec<_> = setup.copies.iter().map(|&c| build_logical_ops(layout, c)).collect::<Result<_>>()?;
    let mut keys: Vec<PauliKey> = vec![Vec::new()];
    for _ in &setup.copies {
        keys = keys.into_iter().flat_map(|k| (0..4).map(move |i| [k.clone(), vec![i]].concat())).collect();
    }
    keys.retain(|k| k.iter().any(|&i| i != 0));
    let undo = target.adjoint();
    keys.into_par_iter()
        .map(|key| {
            let mut b = Operator::identity(layout.dim());
            for (o, &i) in ops.iter().zip(&key) {
                if i > 0 {
                    let axis = [Axis::X, Axis::Y, Axis::Z][i - 1];
                    b = &b * o.get(axis);
                }
            }
            let conj = &(target * &b) * &undo;
            let label = key.iter().map(|i| ["I", "X", "Y", "Z"][*i]).collect::<Vec<_>>().join("");
            let a = labeled(format!("observable {label}"), adjoint(&conj.to_dense()))?;
            Ok((key, a))
        })
        .collect()
}

/// `Tr(A ρ)` for dense row-major matrices; real part.
fn trace_product(a: &[C64], rho: &[C64], n: usize) -> f64 {
    (0..n).map(|r| (0..n).map(|c| (a[r * n + c] * rho[c * n + r]).re).sum::<f64>()).sum()
}

/// Largest step used for pure-state evolution. Coherent errors are tuned down
/// to ~1e-7, so the state vector is stepped more finely than density matrices.
pub const COHERENT_MAX_DT: f64 = 0.05;

/// No-noise error of `schedule` on the logical manifold: the logical basis
/// states are evolved as pure states and every prepared direction is
/// recombined from them.
pub fn coherent_gate_error(params: &VslqParams, layout: &SystemLayout, schedule: &GateSchedule, icfg: &IntegratorConfig) -> Result<f64> {
    let icfg = &IntegratorConfig { dt: icfg.dt.min(COHERENT_MAX_DT), ..icfg.clone() };
    let n_copies = schedule.copies;
    let setup = Setup::new(layout.clone(), n_copies)?;
    let model = assemble_model(params, layout, schedule)?;
    let target = target_unitary(&schedule.target, layout)?;
    let undo = target.adjoint();
    let copies = &setup.copies;
    let basis: Vec<PureState> = (0..1usize << n_copies)
        .map(|bits| {
            let spec: Vec<(Copy, Logical)> = copies
                .iter()
                .enumerate()
                .map(|(i, &c)| (c, if bits >> (n_copies - 1 - i) & 1 == 1 { Logical::One } else { Logical::Zero }))
                .collect();
            logical_product(layout, &spec)
        })
        .collect::<Result<_>>()?;
    let evolved: Vec<PureState> = basis
        .par_iter()
        .map(|s| evolve_pure(s, &model, 0.0, schedule.duration, icfg))
        .collect::<Result<_>>()?;
    let start = &basis[0];
    let deltas = (0..setup.grid.len())
        .map(|k| {
            let psi = setup.prep[k].apply(start.amps());
            let coeffs: Vec<C64> = basis.iter().map(|b| b.amps().iter().zip(&psi).map(|(x, y)| x.conj() * y).sum()).collect();
            let captured: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
            if (captured - 1.0).abs() > 1e-10 {
                return Err(VslqError::InvalidParameter(format!(
                    "prepared state {} leaves the logical manifold",
                    grid_label(&setup.grid[k])
                )));
            }
            let mut out = vec![C64::new(0.0, 0.0); layout.dim()];
            for (c, e) in coeffs.iter().zip(&evolved) {
                for (o, v) in out.iter_mut().zip(e.amps()) {
                    *o += c * v;
                }
            }
            let back = undo.apply(&out);
            let pb = setup.proj[k].apply(&back);
            let after: f64 = back.iter().zip(&pb).map(|(x, y)| (x.conj() * y).re).sum();
            let pp = setup.proj[k].apply(&psi);
            let before: f64 = psi.iter().zip(&pp).map(|(x, y)| (x.conj() * y).re).sum();
            Ok(before - after)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(mean(&deltas))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layout1() -> SystemLayout {
        SystemLayout::single_vslq(2).unwrap()
    }

    #[test]
    fn bloch_algebra_of_direction_table() {
        let layout = layout1();
        let ops = build_logical_ops(&layout, Copy::Solo).unwrap();
        let (zero, _) = logical_basis(&layout, Copy::Solo).unwrap();
        for prep in BlochDirection::ALL {
            let psi = PureState::new(direction_unitary(&layout, Copy::Solo, prep).unwrap().apply(zero.amps())).unwrap();
            for meas in [Axis::X, Axis::Y, Axis::Z] {
                let v = psi.expectation(ops.get(meas)).unwrap();
                let expected = if meas == prep.axis() { prep.sign() } else { 0.0 };
                assert!((v.re - expected).abs() < 1e-12 && v.im.abs() < 1e-12, "{prep:?} {meas:?} {v}");
            }
        }
    }

    #[test]
    fn plus_x_leaves_zero_unchanged() {
        let layout = layout1();
        let (zero, _) = logical_basis(&layout, Copy::Solo).unwrap();
        let rho = DensityState::from_pure(&zero);
        let out = prepare_direction(&rho, &layout, Copy::Solo, BlochDirection::PlusX).unwrap();
        assert!(out.data().iter().zip(rho.data()).all(|(a, b)| (a - b).norm() < 1e-15));
        let z = prepare_direction(&rho, &layout, Copy::Solo, BlochDirection::PlusZ).unwrap();
        let pz = build_logical_ops(&layout, Copy::Solo).unwrap().projector(Axis::Z, 1.0);
        assert!((expectation(&z, &pz).unwrap().re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn projector_expansion_matches_product() {
        let layout = SystemLayout::new([("lA", 3), ("rA", 3), ("lB", 3), ("rB", 3)]).unwrap();
        let a = build_logical_ops(&layout, Copy::A).unwrap();
        let b = build_logical_ops(&layout, Copy::B).unwrap();
        let dirs = [BlochDirection::MinusY, BlochDirection::PlusZ];
        let direct = &a.projector(Axis::Y, -1.0) * &b.projector(Axis::Z, 1.0);
        let mut sum = Operator::zeros(layout.dim());
        for (key, c) in projector_coefficients(&dirs) {
            let mut t = Operator::identity(layout.dim());
            for (o, &i) in [&a, &b].iter().zip(&key) {
                if i > 0 {
                    t = &t * o.get([Axis::X, Axis::Y, Axis::Z][i - 1]);
                }
            }
            sum = &sum + &t.scale_re(c);
        }
        assert!(sum.max_abs_diff(&direct) < 1e-14);
    }

    #[test]
    fn grid_sizes() {
        assert_eq!(direction_grid(1).len(), 6);
        let g = direction_grid(2);
        assert_eq!(g.len(), 36);
        assert_eq!(grid_label(&g[7]), "-X,-X");
    }

    #[test]
    fn ideal_channel_gives_zero_error() {
        let layout = layout1();
        let ops = build_logical_ops(&layout, Copy::Solo).unwrap();
        let t = exp_i_hermitian(&ops.x, -FRAC_PI_2).unwrap();
        let (zero, _) = logical_basis(&layout, Copy::Solo).unwrap();
        let rho = DensityState::from_pure(&zero);
        let (_, b, a) = gate_error_with_channel(&layout, 1, &rho, &t, |r| r.apply_unitary(&t)).unwrap();
        assert!(b.iter().zip(&a).all(|(x, y)| (x - y).abs() < 1e-12));
    }
}
