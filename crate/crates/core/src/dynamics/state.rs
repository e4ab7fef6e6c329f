use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Result, VslqError};
use crate::qalg::{Operator, PureState};

pub const HERMITICITY_TOL: f64 = 1e-9;
pub const TRACE_TOL: f64 = 1e-8;
pub const POSITIVITY_TOL: f64 = 1e-7;
pub const UNITARITY_TOL: f64 = 1e-8;

/// Density matrix, dense row-major, at simulation time `time` (ns).
#[derive(Clone, Debug, PartialEq)]
pub struct DensityState {
    dim: usize,
    data: Vec<C64>,
    time: f64,
}

impl DensityState {
    /// Wraps a row-major matrix after checking the density-matrix invariants
    /// that are cheap to test (Hermiticity and unit trace).
    pub fn from_data(dim: usize, data: Vec<C64>, time: f64) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(VslqError::DimensionMismatch { expected: dim * dim, found: data.len() });
        }
        let state = Self { dim, data, time };
        state.check(time)?;
        Ok(state)
    }

    pub(crate) fn from_raw(dim: usize, data: Vec<C64>, time: f64) -> Self {
        Self { dim, data, time }
    }

    pub fn from_pure(psi: &PureState) -> Self {
        let a = psi.amps();
        let data = a.iter().flat_map(|x| a.iter().map(move |y| x * y.conj())).collect();
        Self { dim: a.len(), data, time: 0.0 }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        let mut data = vec![C64::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            data[i * dim + i] = C64::new(1.0 / dim as f64, 0.0);
        }
        Self { dim, data, time: 0.0 }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn with_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.data[r * self.dim + c]
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self.data[i * self.dim + i]).sum()
    }

    pub fn purity(&self) -> f64 {
        // Tr(ρ²) = Σ |ρ_ij|² for Hermitian ρ.
        self.data.iter().map(|v| v.norm_sqr()).sum()
    }

    /// `max |ρ − ρ†|`.
    pub fn hermiticity_defect(&self) -> f64 {
        hermiticity_defect(&self.data, self.dim)
    }

    pub fn symmetrize(&mut self) {
        symmetrize(&mut self.data, self.dim);
    }

    /// Smallest eigenvalue (dense Hermitian diagonalization; O(dim³)).
    pub fn min_eigenvalue(&self) -> f64 {
        let n = self.dim;
        let m = DMatrix::from_fn(n, n, |r, c| 0.5 * (self.data[r * n + c] + self.data[c * n + r].conj()));
        m.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn kron(&self, other: &DensityState) -> DensityState {
        let (n, m) = (self.dim, other.dim);
        let d = n * m;
        let mut data = vec![C64::new(0.0, 0.0); d * d];
        for i in 0..n {
            for j in 0..n {
                let a = self.data[i * n + j];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                for k in 0..m {
                    let row = (i * m + k) * d + j * m;
                    for (l, b) in other.data[k * m..(k + 1) * m].iter().enumerate() {
                        data[row + l] = a * b;
                    }
                }
            }
        }
        DensityState { dim: d, data, time: self.time }
    }

    /// `U ρ U†`; rejects `U` with `‖U†U − I‖ > 1e-8`.
    pub fn apply_unitary(&self, u: &Operator) -> Result<DensityState> {
        if u.dim() != self.dim {
            return Err(VslqError::DimensionMismatch { expected: self.dim, found: u.dim() });
        }
        let defect = u.unitarity_defect();
        if defect > UNITARITY_TOL {
            return Err(VslqError::NotUnitary(defect));
        }
        Ok(DensityState { dim: self.dim, data: conjugate_by(u, &self.data, self.dim), time: self.time })
    }

    /// `P ρ P† / Tr(...)`, the conditional state after a jump or projection.
    pub fn apply_jump(&self, op: &Operator) -> Result<DensityState> {
        if op.dim() != self.dim {
            return Err(VslqError::DimensionMismatch { expected: self.dim, found: op.dim() });
        }
        let mut data = conjugate_by(op, &self.data, self.dim);
        let n = self.dim;
        let tr: f64 = (0..n).map(|i| data[i * n + i].re).sum();
        if !(tr > 1e-300) {
            return Err(VslqError::InvalidParameter("jump operator annihilates the state".into()));
        }
        data.iter_mut().for_each(|v| *v /= tr);
        Ok(DensityState { dim: n, data, time: self.time })
    }

    /// Checks Hermiticity and trace; reported as a divergence at `time`.
    pub fn check(&self, time: f64) -> Result<()> {
        if self.data.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(VslqError::IntegrationDiverged { time, reason: "non-finite matrix entries".into() });
        }
        let herm = self.hermiticity_defect();
        if herm > HERMITICITY_TOL {
            return Err(VslqError::IntegrationDiverged { time, reason: format!("hermiticity defect {herm:.3e}") });
        }
        let tr = self.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > TRACE_TOL {
            return Err(VslqError::IntegrationDiverged { time, reason: format!("trace {tr} deviates from 1") });
        }
        Ok(())
    }

    /// Full invariant check including positivity (dense diagonalization).
    pub fn check_positive(&self) -> Result<()> {
        self.check(self.time)?;
        let lo = self.min_eigenvalue();
        if lo < -POSITIVITY_TOL {
            return Err(VslqError::IntegrationDiverged {
                time: self.time,
                reason: format!("negative eigenvalue {lo:.3e}"),
            });
        }
        Ok(())
    }
}

pub(crate) fn hermiticity_defect(x: &[C64], n: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((x[i * n + j] - x[j * n + i].conj()).norm());
        }
    }
    worst
}

pub(crate) fn symmetrize(x: &mut [C64], n: usize) {
    for i in 0..n {
        let d = i * n + i;
        x[d] = C64::new(x[d].re, 0.0);
        for j in i + 1..n {
            let avg = 0.5 * (x[i * n + j] + x[j * n + i].conj());
            x[i * n + j] = avg;
            x[j * n + i] = avg.conj();
        }
    }
}

/// `op · x` for a dense row-major `x`.
pub(crate) fn left_multiply(op: &Operator, x: &[C64], n: usize) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); n * n];
    for i in 0..n {
        let dst = &mut out[i * n..(i + 1) * n];
        for (k, v) in op.row(i) {
            for (d, s) in dst.iter_mut().zip(&x[k * n..(k + 1) * n]) {
                *d += v * s;
            }
        }
    }
    out
}

pub(crate) fn dagger(x: &[C64], n: usize) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); n * n];
    for i in 0..n {
        for j in 0..n {
            out[j * n + i] = x[i * n + j].conj();
        }
    }
    out
}

/// `op · x · op†`.
pub(crate) fn conjugate_by(op: &Operator, x: &[C64], n: usize) -> Vec<C64> {
    let t = left_multiply(op, x, n);
    dagger(&left_multiply(op, &dagger(&t, n), n), n)
}
