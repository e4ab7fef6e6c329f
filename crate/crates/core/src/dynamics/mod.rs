//! Time-dependent Lindblad evolution.

mod blocked;
mod compiled;
mod integrate;
mod perturb;
mod state;

use std::io::Write;

use num_complex::Complex64 as C64;

use crate::error::{Result, VslqError};
use crate::pulse::Envelope;
use crate::qalg::{Operator, PureState};
use crate::units::{ANGULAR_PER_MHZ, RATE_PER_MHZ};

pub use blocked::{dense_pattern, invariant_partition, BlockPartition, BlockedFlow, PATTERN_TOL};
pub use compiled::{CompileOptions, CompiledModel, DensityFlow, Direction, Flow, PureFlow};
pub use integrate::{integrate, IntegratorConfig, Method};
pub use perturb::{perturbative_phase_check, PhaseCheck};
pub use state::{DensityState, HERMITICITY_TOL, POSITIVITY_TOL, TRACE_TOL, UNITARITY_TOL};

/// `H(t) += 2π·1e-3 · envelope(t) · op` (envelope in MHz).
#[derive(Clone, Debug)]
pub struct DriveTerm {
    pub op: Operator,
    pub envelope: Envelope,
}

/// Dissipator `γ(t)(LρL† − ½{L†L, ρ})` with `γ` in 1/µs.
#[derive(Clone, Debug)]
pub struct CollapseChannel {
    pub label: String,
    pub op: Operator,
    pub rate: Envelope,
}

/// Static Hamiltonian (rad/ns), drive terms and collapse channels.
#[derive(Clone, Debug)]
pub struct LindbladModel {
    pub static_h: Operator,
    pub drives: Vec<DriveTerm>,
    pub channels: Vec<CollapseChannel>,
}

impl LindbladModel {
    pub fn new(static_h: Operator) -> Self {
        Self { static_h, drives: Vec::new(), channels: Vec::new() }
    }

    pub fn with_drive(mut self, op: Operator, envelope: Envelope) -> Self {
        self.drives.push(DriveTerm { op, envelope });
        self
    }

    pub fn with_channel(mut self, label: impl Into<String>, op: Operator, rate: Envelope) -> Self {
        self.channels.push(CollapseChannel { label: label.into(), op, rate });
        self
    }

    pub fn dim(&self) -> usize {
        self.static_h.dim()
    }

    /// Checks shared dimensions, Hermitian drives and nonnegative rates on a
    /// grid over `[t0, t1]`.
    pub fn validate(&self, t0: f64, t1: f64) -> Result<()> {
        let n = self.dim();
        for op in self.drives.iter().map(|d| &d.op).chain(self.channels.iter().map(|c| &c.op)) {
            if op.dim() != n {
                return Err(VslqError::DimensionMismatch { expected: n, found: op.dim() });
            }
        }
        if !self.static_h.is_hermitian(1e-12) || self.drives.iter().any(|d| !d.op.is_hermitian(1e-12)) {
            return Err(VslqError::InvalidParameter("Hamiltonian terms must be Hermitian".into()));
        }
        for c in &self.channels {
            c.rate.validate()?;
            let grid = 2000;
            for k in 0..=grid {
                let t = t0 + (t1 - t0) * k as f64 / grid as f64;
                if c.rate.eval(t) < 0.0 {
                    return Err(VslqError::InvalidParameter(format!("rate of `{}` negative at t = {t}", c.label)));
                }
            }
        }
        self.drives.iter().try_for_each(|d| d.envelope.validate())
    }

    /// `H(t)` in rad/ns.
    pub fn hamiltonian_at(&self, t: f64) -> Operator {
        self.drives
            .iter()
            .fold(self.static_h.clone(), |h, d| &h + &d.op.scale_re(ANGULAR_PER_MHZ * d.envelope.eval(t)))
    }

    /// Copy with every collapse channel removed.
    pub fn without_dissipation(&self) -> Self {
        Self { channels: Vec::new(), ..self.clone() }
    }
}

/// Reference `dρ/dt` built directly from the operator algebra. The
/// integrators use the compiled kernel; this is the oracle it is tested
/// against.
pub fn lindblad_rhs(rho: &DensityState, model: &LindbladModel, t: f64) -> Result<Vec<C64>> {
    let n = rho.dim();
    if model.dim() != n {
        return Err(VslqError::DimensionMismatch { expected: n, found: model.dim() });
    }
    let h = model.hamiltonian_at(t);
    let x = rho.data();
    let hx = state::left_multiply(&h, x, n);
    let xh = state::dagger(&state::left_multiply(&h, &state::dagger(x, n), n), n);
    let mut out: Vec<C64> = hx.iter().zip(&xh).map(|(a, b)| C64::new(0.0, -1.0) * (a - b)).collect();
    for ch in &model.channels {
        let g = ch.rate.eval(t) * RATE_PER_MHZ;
        if g == 0.0 {
            continue;
        }
        let jump = state::conjugate_by(&ch.op, x, n);
        let ltl = &ch.op.adjoint() * &ch.op;
        let left = state::left_multiply(&ltl, x, n);
        let right = state::dagger(&state::left_multiply(&ltl, &state::dagger(x, n), n), n);
        for i in 0..n * n {
            out[i] += g * (jump[i] - 0.5 * (left[i] + right[i]));
        }
    }
    Ok(out)
}

/// Expectation values sampled during an evolution.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    pub labels: Vec<String>,
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn column(&self, label: &str) -> Option<Vec<f64>> {
        let k = self.labels.iter().position(|l| l == label)?;
        Some(self.values.iter().map(|row| row[k]).collect())
    }

    /// CSV with header `t_ns,<labels...>`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t_ns".to_string()];
        header.extend(self.labels.iter().cloned());
        w.write_record(&header)?;
        for (t, row) in self.times.iter().zip(&self.values) {
            let mut rec = vec![format!("{t}")];
            rec.extend(row.iter().map(|v| format!("{v:e}")));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Sample times `t0, t0 + stride, …, t1`.
pub fn sample_grid(t0: f64, t1: f64, stride: f64) -> Vec<f64> {
    let n = ((t1 - t0) / stride + 1e-9).floor() as usize;
    let mut out: Vec<f64> = (0..=n).map(|k| t0 + k as f64 * stride).collect();
    if (out.last().copied().unwrap_or(t0) - t1).abs() > 1e-9 {
        out.push(t1);
    }
    out
}

fn compile_for(model: &LindbladModel, cfg: &IntegratorConfig, direction: Direction, dissipation: bool) -> CompiledModel {
    CompiledModel::new(
        model,
        CompileOptions { split_diagonal: cfg.method == Method::Rk4Interaction, dissipation, direction },
    )
}

/// Block-diagonal flow for an initial matrix, if the generator and the
/// matrix's pattern split the space into more than one block.
fn blocked_flow<'a>(compiled: &'a CompiledModel, x0: &[C64]) -> Option<BlockedFlow<'a>> {
    let part = invariant_partition(compiled, &dense_pattern(x0, compiled.dim()))?;
    (part.len() > 1).then(|| BlockedFlow::new(compiled, part))
}

/// Evolves `rho0` from `t0` to `t1` under `model`.
pub fn evolve(rho0: &DensityState, model: &LindbladModel, t0: f64, t1: f64, cfg: &IntegratorConfig) -> Result<DensityState> {
    Ok(evolve_sampled(rho0, model, t0, t1, cfg, &[])?.0)
}

/// As [`evolve`], recording `Tr(ρ O)` (real part) for each named observable
/// every `cfg.sample_every` ns.
pub fn evolve_sampled(
    rho0: &DensityState,
    model: &LindbladModel,
    t0: f64,
    t1: f64,
    cfg: &IntegratorConfig,
    observables: &[(String, Operator)],
) -> Result<(DensityState, Trajectory)> {
    let n = rho0.dim();
    if model.dim() != n {
        return Err(VslqError::DimensionMismatch { expected: n, found: model.dim() });
    }
    if !(t1 > t0) {
        return Err(VslqError::InvalidParameter(format!("evolve needs t1 > t0, got [{t0}, {t1}]")));
    }
    let compiled = compile_for(model, cfg, Direction::Forward, true);
    let mut traj = Trajectory { labels: observables.iter().map(|(l, _)| l.clone()).collect(), ..Default::default() };
    let samples = if observables.is_empty() { Vec::new() } else { sample_grid(t0, t1, cfg.sample_every) };
    let mut record = |t: f64, dense: Vec<C64>| -> Result<()> {
        let snapshot = DensityState::from_raw(n, dense, t);
        let row = observables
            .iter()
            .map(|(_, op)| crate::qalg::expectation(&snapshot, op).map(|v| v.re))
            .collect::<Result<Vec<_>>>()?;
        traj.times.push(t);
        traj.values.push(row);
        Ok(())
    };
    let data = match blocked_flow(&compiled, rho0.data()) {
        Some(mut flow) => {
            let part = flow.partition().clone();
            let (mut x, _) = part.pack(rho0.data());
            integrate(&mut flow, &mut x, t0, t1, cfg, &samples, |t, x| record(t, part.unpack(x)))?;
            part.unpack(&x)
        }
        None => {
            let mut flow = DensityFlow::new(&compiled);
            let mut x = rho0.data().to_vec();
            integrate(&mut flow, &mut x, t0, t1, cfg, &samples, |t, x| record(t, x.to_vec()))?;
            x
        }
    };
    let out = DensityState::from_raw(n, data, t1);
    out.check(t1)?;
    Ok((out, traj))
}

/// Heisenberg-picture observable at `t0` whose expectation in any state at
/// `t0` equals that of `op_t1` after evolving the state to `t1`:
/// `Tr(A(t0) ρ) = Tr(op_t1 · E_{t0→t1}(ρ))`.
pub fn evolve_adjoint(op_t1: &[C64], model: &LindbladModel, t0: f64, t1: f64, cfg: &IntegratorConfig) -> Result<Vec<C64>> {
    let n = model.dim();
    if op_t1.len() != n * n {
        return Err(VslqError::DimensionMismatch { expected: n * n, found: op_t1.len() });
    }
    // Integration variable s = t1 − t runs over [0, t1 − t0].
    let compiled = compile_for(model, cfg, Direction::Adjoint { end: t1 }, true);
    let x = match blocked_flow(&compiled, op_t1) {
        Some(mut flow) => {
            let part = flow.partition().clone();
            let (mut x, _) = part.pack(op_t1);
            integrate(&mut flow, &mut x, 0.0, t1 - t0, cfg, &[], |_, _| Ok(()))?;
            part.unpack(&x)
        }
        None => {
            let mut flow = DensityFlow::new(&compiled);
            let mut x = op_t1.to_vec();
            integrate(&mut flow, &mut x, 0.0, t1 - t0, cfg, &[], |_, _| Ok(()))?;
            x
        }
    };
    let herm = state::hermiticity_defect(&x, n);
    if herm > HERMITICITY_TOL {
        return Err(VslqError::IntegrationDiverged { time: t0, reason: format!("hermiticity defect {herm:.3e}") });
    }
    Ok(x)
}

/// Closed-system evolution of a state vector (all collapse channels ignored).
pub fn evolve_pure(psi0: &PureState, model: &LindbladModel, t0: f64, t1: f64, cfg: &IntegratorConfig) -> Result<PureState> {
    if model.dim() != psi0.dim() {
        return Err(VslqError::DimensionMismatch { expected: psi0.dim(), found: model.dim() });
    }
    let compiled = compile_for(model, cfg, Direction::Forward, false);
    let mut flow = PureFlow::new(&compiled);
    let mut x = psi0.amps().to_vec();
    integrate(&mut flow, &mut x, t0, t1, cfg, &[], |_, _| Ok(()))?;
    let norm = state_norm(&x);
    if (norm - 1.0).abs() > 1e-8 {
        return Err(VslqError::IntegrationDiverged { time: t1, reason: format!("state norm drifted to {norm}") });
    }
    PureState::normalized(x)
}

/// Evolves several pure states at once, returning them in order.
pub fn evolve_pure_many(
    states: &[PureState],
    model: &LindbladModel,
    t0: f64,
    t1: f64,
    cfg: &IntegratorConfig,
) -> Result<Vec<PureState>> {
    states.iter().map(|s| evolve_pure(s, model, t0, t1, cfg)).collect()
}

fn state_norm(x: &[C64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qalg::annihilation;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn excited_qubit() -> DensityState {
        DensityState::from_pure(&PureState::basis(2, 1))
    }

    fn decay_model(gamma_per_us: f64) -> LindbladModel {
        LindbladModel::new(Operator::zeros(2)).with_channel("a", annihilation(2).unwrap(), Envelope::constant(gamma_per_us))
    }

    #[test]
    fn rhs_decay_element() {
        let rhs = lindblad_rhs(&excited_qubit(), &decay_model(1000.0), 0.0).unwrap();
        // γ = 1000/µs = 1/ns.
        assert!((rhs[3] - c(-1.0)).norm() < 1e-15);
        assert!((rhs[0] - c(1.0)).norm() < 1e-15);
    }

    fn random_state(n: usize, seed: u64) -> DensityState {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let amps: Vec<C64> = (0..n * 2).map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
        let a = PureState::normalized(amps[..n].to_vec()).unwrap();
        let b = PureState::normalized(amps[n..].to_vec()).unwrap();
        let (ra, rb) = (DensityState::from_pure(&a), DensityState::from_pure(&b));
        let data = ra.data().iter().zip(rb.data()).map(|(x, y)| 0.3 * x + 0.7 * y).collect();
        DensityState::from_data(n, data, 0.0).unwrap()
    }

    fn test_model() -> LindbladModel {
        let a = annihilation(4).unwrap();
        let n = &a.adjoint() * &a;
        let x = &a + &a.adjoint();
        let mut coupling = Operator::from_triplets(4, [(0, 2, C64::new(0.3, 0.2)), (1, 3, C64::new(0.0, 0.5))]);
        coupling = &coupling + &coupling.adjoint();
        LindbladModel::new(n.scale_re(0.7))
            .with_drive(x, Envelope::QuadraticArch { amplitude: 40.0, start: 0.0, end: 10.0 })
            .with_drive(coupling, Envelope::constant(10.0))
            .with_channel("a", a.clone(), Envelope::Steps { times: vec![5.0], values: vec![30.0, 90.0] })
            .with_channel("n", n, Envelope::constant(20.0))
    }

    #[test]
    fn compiled_kernel_matches_reference() {
        let model = test_model();
        let rho = random_state(4, 7);
        for &t in &[0.0, 2.5, 7.0] {
            let reference = lindblad_rhs(&rho, &model, t).unwrap();
            for split in [false, true] {
                let compiled = CompiledModel::new(
                    &model,
                    CompileOptions { split_diagonal: split, dissipation: true, direction: Direction::Forward },
                );
                let mut flow = DensityFlow::new(&compiled);
                let mut out = vec![C64::new(0.0, 0.0); 16];
                flow.rhs(t, rho.data(), &mut out);
                if split {
                    // The kernel omits −i[D, ρ]; add it back.
                    let d = model.static_h.diag();
                    for i in 0..4 {
                        for j in 0..4 {
                            out[i * 4 + j] += C64::new(0.0, -1.0) * (d[i] - d[j]) * rho.get(i, j);
                        }
                    }
                }
                let err = out.iter().zip(&reference).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
                assert!(err < 1e-14, "t = {t}, split = {split}: {err}");
            }
            let tr: C64 = (0..4).map(|i| reference[i * 4 + i]).sum();
            assert!(tr.norm() < 1e-14);
        }
    }

    #[test]
    fn two_level_decay_is_exponential() {
        let gamma = 200.0; // 1/µs → 0.2 /ns
        for cfg in [IntegratorConfig::rk4(0.05), IntegratorConfig::interaction(0.05), IntegratorConfig::adaptive(1e-10, 1e-12)] {
            let (_, traj) = evolve_sampled(
                &excited_qubit(),
                &decay_model(gamma),
                0.0,
                25.0,
                &IntegratorConfig { sample_every: 5.0, ..cfg.clone() },
                &[("p1".into(), Operator::real_diagonal(&[0.0, 1.0]))],
            )
            .unwrap();
            for (t, row) in traj.times.iter().zip(&traj.values) {
                assert!((row[0] - (-0.2 * t).exp()).abs() < 1e-8, "{:?} t={t}", cfg.method);
            }
        }
    }

    #[test]
    fn adjoint_evolution_matches_forward() {
        let model = test_model();
        let rho = random_state(4, 3);
        let obs = Operator::from_triplets(4, [(0, 1, C64::new(0.2, 0.1)), (1, 0, C64::new(0.2, -0.1)), (3, 3, c(1.0))]);
        let cfg = IntegratorConfig::interaction(0.01);
        let forward = evolve(&rho, &model, 0.0, 10.0, &cfg).unwrap();
        let lhs = crate::qalg::expectation(&forward, &obs).unwrap();
        let heis = evolve_adjoint(&obs.to_dense(), &model, 0.0, 10.0, &cfg).unwrap();
        // Tr(A ρ) with A row-major.
        let rhs: C64 = (0..4).flat_map(|i| (0..4).map(move |j| (i, j))).map(|(i, j)| heis[i * 4 + j] * rho.get(j, i)).sum();
        assert!((lhs - rhs).norm() < 1e-9, "{lhs} vs {rhs}");
    }

    #[test]
    fn closed_evolution_conserves_purity() {
        let model = test_model().without_dissipation();
        let rho = DensityState::from_pure(&PureState::basis(4, 1));
        let out = evolve(&rho, &model, 0.0, 10.0, &IntegratorConfig::interaction(0.02)).unwrap();
        assert!((out.purity() - 1.0).abs() < 1e-8);
        let psi = evolve_pure(&PureState::basis(4, 1), &model, 0.0, 10.0, &IntegratorConfig::interaction(0.02)).unwrap();
        let from_pure = DensityState::from_pure(&psi);
        let err = from_pure.data().iter().zip(out.data()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-9);
    }

    #[test]
    fn trajectory_csv_layout() {
        let traj = Trajectory { labels: vec!["x".into()], times: vec![0.0, 1.0], values: vec![vec![1.0], vec![0.5]] };
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t_ns,x\n0,1e0\n1,5e-1\n"));
    }
}
