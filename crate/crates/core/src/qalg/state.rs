use num_complex::Complex64 as C64;

use super::{Operator, SystemLayout};
use crate::error::{Result, VslqError};

const NORM_TOL: f64 = 1e-12;

/// Unit-norm state vector.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    amps: Vec<C64>,
}

impl PureState {
    /// Wraps an amplitude vector that must already be normalized.
    pub fn new(amps: Vec<C64>) -> Result<Self> {
        let norm = norm(&amps);
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(VslqError::InvalidParameter(format!("state norm {norm} is not 1")));
        }
        Ok(Self { amps })
    }

    /// Normalizes `amps`; fails on the zero vector.
    pub fn normalized(mut amps: Vec<C64>) -> Result<Self> {
        let n = norm(&amps);
        if n == 0.0 || !n.is_finite() {
            return Err(VslqError::InvalidParameter("cannot normalize a zero vector".into()));
        }
        amps.iter_mut().for_each(|a| *a /= n);
        Ok(Self { amps })
    }

    /// Basis state `|index⟩`.
    pub fn basis(dim: usize, index: usize) -> Self {
        let mut amps = vec![C64::new(0.0, 0.0); dim];
        amps[index] = C64::new(1.0, 0.0);
        Self { amps }
    }

    /// Tensor product of local states in layout order; unspecified
    /// subsystems are in `|0⟩`.
    pub fn product(layout: &SystemLayout, locals: &[(&str, &[C64])]) -> Result<Self> {
        let mut factors: Vec<Vec<C64>> = layout
            .subsystems()
            .iter()
            .map(|s| {
                let mut v = vec![C64::new(0.0, 0.0); s.dim];
                v[0] = C64::new(1.0, 0.0);
                v
            })
            .collect();
        for &(label, amps) in locals {
            let k = layout.index_of(label)?;
            if amps.len() != factors[k].len() {
                return Err(VslqError::DimensionMismatch { expected: factors[k].len(), found: amps.len() });
            }
            factors[k] = amps.to_vec();
        }
        let mut amps = vec![C64::new(1.0, 0.0)];
        for f in &factors {
            amps = amps.iter().flat_map(|a| f.iter().map(move |b| a * b)).collect();
        }
        Self::normalized(amps)
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amps(&self) -> &[C64] {
        &self.amps
    }

    pub fn into_amps(self) -> Vec<C64> {
        self.amps
    }

    pub fn inner(&self, other: &PureState) -> C64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn kron(&self, other: &PureState) -> PureState {
        PureState { amps: self.amps.iter().flat_map(|a| other.amps.iter().map(move |b| a * b)).collect() }
    }

    pub fn expectation(&self, op: &Operator) -> Result<C64> {
        if op.dim() != self.dim() {
            return Err(VslqError::DimensionMismatch { expected: self.dim(), found: op.dim() });
        }
        let img = op.apply(&self.amps);
        Ok(self.amps.iter().zip(&img).map(|(a, b)| a.conj() * b).sum())
    }

    /// Applies `op` and renormalizes (a quantum jump).
    pub fn apply_and_normalize(&self, op: &Operator) -> Result<PureState> {
        Self::normalized(op.apply(&self.amps))
    }
}

pub(crate) fn norm(v: &[C64]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}
