//! Truncated bosonic operator algebra on composite Hilbert spaces.
//!
//! Local operators are built on a single subsystem and lifted to the full
//! space with [`embed`]. Every Hamiltonian and collapse operator in the crate
//! goes through this module.

mod expm;
mod layout;
mod sparse;
mod state;

use std::str::FromStr;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::dynamics::DensityState;
use crate::error::{Result, VslqError};

pub use expm::{exp_i_hermitian, exp_minus_i_hermitian};
pub use layout::{Copy, Side, Subsystem, SystemLayout, DEFAULT_RESONATOR_DIM};
pub use sparse::Operator;
pub use state::PureState;

fn check_dim(d: usize) -> Result<()> {
    if d < 2 {
        return Err(VslqError::InvalidDimension(format!("local dimension {d} < 2")));
    }
    Ok(())
}

/// Truncated lowering operator, `A[n-1, n] = sqrt(n)`.
pub fn annihilation(d: usize) -> Result<Operator> {
    check_dim(d)?;
    Ok(Operator::from_triplets(d, (1..d).map(|n| (n - 1, n, C64::new((n as f64).sqrt(), 0.0)))))
}

pub fn creation(d: usize) -> Result<Operator> {
    Ok(annihilation(d)?.adjoint())
}

pub fn number(d: usize) -> Result<Operator> {
    check_dim(d)?;
    Ok(Operator::real_diagonal(&(0..d).map(|n| n as f64).collect::<Vec<_>>()))
}

/// Projector `P^j` onto exactly `j` photons.
pub fn projector(d: usize, j: usize) -> Result<Operator> {
    check_dim(d)?;
    if j >= d {
        return Err(VslqError::InvalidDimension(format!("level {j} outside dimension {d}")));
    }
    Ok(Operator::from_triplets(d, [(j, j, C64::new(1.0, 0.0))]))
}

/// Two-photon flip `(a†a† + a a)/sqrt(2)`. For `d = 3` this swaps `|0⟩` and
/// `|2⟩` and annihilates `|1⟩`.
pub fn xtilde(d: usize) -> Result<Operator> {
    let a = annihilation(d)?;
    let ad = a.adjoint();
    Ok((&(&ad * &ad) + &(&a * &a)).scale_re(std::f64::consts::FRAC_1_SQRT_2))
}

/// Diagonal Z-type operators on a three-level transmon.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ZVariant {
    /// `P² − P⁰`: diag(−1, 0, 1).
    Bare,
    /// `P² + P¹ − P⁰`: diag(−1, 1, 1).
    Prime,
    /// `P² + ½P¹ − P⁰`: diag(−1, ½, 1).
    DoublePrime,
}

impl ZVariant {
    pub fn diagonal(self) -> [f64; 3] {
        match self {
            ZVariant::Bare => [-1.0, 0.0, 1.0],
            ZVariant::Prime => [-1.0, 1.0, 1.0],
            ZVariant::DoublePrime => [-1.0, 0.5, 1.0],
        }
    }
}

impl FromStr for ZVariant {
    type Err = VslqError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bare" => Ok(ZVariant::Bare),
            "prime" => Ok(ZVariant::Prime),
            "doubleprime" | "double_prime" => Ok(ZVariant::DoublePrime),
            other => Err(VslqError::InvalidParameter(format!("unknown Z variant `{other}`"))),
        }
    }
}

pub fn ztilde(d: usize, variant: ZVariant) -> Result<Operator> {
    if d != 3 {
        return Err(VslqError::InvalidDimension(format!("Z-tilde operators need d = 3, got {d}")));
    }
    Ok(Operator::real_diagonal(&variant.diagonal()))
}

/// Lifts a local operator acting on `targets` (in the given order) to the full
/// layout, with identities on every other subsystem.
pub fn embed(op: &Operator, targets: &[&str], layout: &SystemLayout) -> Result<Operator> {
    let positions = targets.iter().map(|t| layout.index_of(t)).collect::<Result<Vec<_>>>()?;
    for (i, p) in positions.iter().enumerate() {
        if positions[..i].contains(p) {
            return Err(VslqError::InvalidLayout(format!("target `{}` repeated", targets[i])));
        }
    }
    let dims = layout.dims();
    let tdims: Vec<usize> = positions.iter().map(|&p| dims[p]).collect();
    let local_dim: usize = tdims.iter().product();
    if local_dim != op.dim() {
        return Err(VslqError::DimensionMismatch { expected: local_dim, found: op.dim() });
    }
    let strides = layout.strides();
    let gstrides: Vec<usize> = positions.iter().map(|&p| strides[p]).collect();
    let mut lstrides = vec![1usize; tdims.len()];
    for k in (0..tdims.len().saturating_sub(1)).rev() {
        lstrides[k] = lstrides[k + 1] * tdims[k + 1];
    }
    // Global offset contributed by each local index.
    let offsets: Vec<usize> = (0..local_dim)
        .map(|li| (0..tdims.len()).map(|k| ((li / lstrides[k]) % tdims[k]) * gstrides[k]).sum())
        .collect();
    let mut by_col: Vec<Vec<(usize, C64)>> = vec![Vec::new(); local_dim];
    for (r, c, v) in op.triplets() {
        by_col[c].push((r, v));
    }
    let dim = layout.dim();
    let mut triplets = Vec::with_capacity(dim * (op.nnz() / local_dim.max(1) + 1));
    for g in 0..dim {
        let lc: usize = (0..tdims.len()).map(|k| ((g / gstrides[k]) % tdims[k]) * lstrides[k]).sum();
        let base = g - offsets[lc];
        for &(lr, v) in &by_col[lc] {
            triplets.push((base + offsets[lr], g, v));
        }
    }
    Ok(Operator::from_triplets(dim, triplets))
}

/// Embeds a local operator on a single named subsystem.
pub fn embed1(op: &Operator, target: &str, layout: &SystemLayout) -> Result<Operator> {
    embed(op, &[target], layout)
}

/// Local single-transmon state `(|0⟩ ± |2⟩)/sqrt(2)`.
pub fn plus_minus(sign: f64) -> Vec<C64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    vec![C64::new(s, 0.0), C64::new(0.0, 0.0), C64::new(sign * s, 0.0)]
}

/// Logical basis label of one copy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Logical {
    Zero,
    One,
}

/// Product state with the listed copies in logical states and every other
/// subsystem in vacuum.
pub fn logical_product(layout: &SystemLayout, copies: &[(Copy, Logical)]) -> Result<PureState> {
    let mut locals: Vec<(String, Vec<C64>)> = Vec::new();
    for &(copy, which) in copies {
        layout.require_copy(copy)?;
        let sign = match which {
            Logical::Zero => 1.0,
            Logical::One => -1.0,
        };
        locals.push((copy.label("l"), plus_minus(sign)));
        locals.push((copy.label("r"), plus_minus(sign)));
    }
    let refs: Vec<(&str, &[C64])> = locals.iter().map(|(l, v)| (l.as_str(), v.as_slice())).collect();
    PureState::product(layout, &refs)
}

/// Logical basis of `copy`: `|0_L⟩ = |+⟩_l|+⟩_r`, `|1_L⟩ = |−⟩_l|−⟩_r`, where
/// `|±⟩ = (|0⟩ ± |2⟩)/sqrt(2)`. Both satisfy `X̃_l X̃_r = +1`. Any other copy
/// in the layout is placed in `|0_L⟩`; shadows and resonators are in vacuum.
///
/// Sign convention: `Z̃'|±⟩ = −|∓⟩`, so `Z_L|0_L⟩ = +|1_L⟩` and
/// `Z_L|1_L⟩ = +|0_L⟩`. In the ordered basis (|0_L⟩, |1_L⟩) the logical
/// operators act as `X_L = σz`, `Z_L = σx`, `Y_L = i X_L Z_L = −σy`.
pub fn logical_basis(layout: &SystemLayout, copy: Copy) -> Result<(PureState, PureState)> {
    layout.require_copy(copy)?;
    let others: Vec<(Copy, Logical)> =
        layout.copies().into_iter().filter(|&c| c != copy).map(|c| (c, Logical::Zero)).collect();
    let build = |which| {
        let mut spec = others.clone();
        spec.push((copy, which));
        logical_product(layout, &spec)
    };
    Ok((build(Logical::Zero)?, build(Logical::One)?))
}

/// `Tr(ρ · op)`.
pub fn expectation(rho: &DensityState, op: &Operator) -> Result<C64> {
    if rho.dim() != op.dim() {
        return Err(VslqError::DimensionMismatch { expected: rho.dim(), found: op.dim() });
    }
    let n = rho.dim();
    let data = rho.data();
    Ok(op.triplets().map(|(r, c, v)| v * data[c * n + r]).sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: C64, b: f64) -> bool {
        (a - C64::new(b, 0.0)).norm() < 1e-14
    }

    #[test]
    fn ladder_entries() {
        let a2 = annihilation(2).unwrap();
        assert_eq!(a2.to_dense(), vec![0.0, 1.0, 0.0, 0.0].into_iter().map(|x| C64::new(x, 0.0)).collect::<Vec<_>>());
        let a3 = annihilation(3).unwrap();
        assert!(close(a3.get(0, 1), 1.0));
        assert!(close(a3.get(1, 2), 2f64.sqrt()));
        assert_eq!(a3.nnz(), 2);
        let n = &a3.adjoint() * &a3;
        for (k, d) in n.diag().into_iter().enumerate() {
            assert!((d - C64::new(k as f64, 0.0)).norm() < 1e-14);
        }
        assert!(annihilation(1).is_err());
    }

    #[test]
    fn xtilde_action() {
        let x = xtilde(3).unwrap();
        let zero = vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)];
        let one = vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
        let out = x.apply(&zero);
        assert!(close(out[2], 1.0) && close(out[0], 0.0) && close(out[1], 0.0));
        assert!(x.apply(&one).iter().all(|v| v.norm() < 1e-15));
        let x2 = &x * &x;
        let p02 = &projector(3, 0).unwrap() + &projector(3, 2).unwrap();
        assert!(x2.max_abs_diff(&p02) < 1e-15);
        assert!(x.is_hermitian(0.0));
        assert!((&x2 * &x).max_abs_diff(&x) < 1e-15);
    }

    #[test]
    fn ztilde_family() {
        assert_eq!(ztilde(3, ZVariant::Bare).unwrap().diag()[1], C64::new(0.0, 0.0));
        assert_eq!(ztilde(3, ZVariant::Prime).unwrap().diag()[1], C64::new(1.0, 0.0));
        assert_eq!(ztilde(3, ZVariant::DoublePrime).unwrap().diag()[1], C64::new(0.5, 0.0));
        assert!("sideways".parse::<ZVariant>().is_err());
        assert!(ztilde(4, ZVariant::Bare).is_err());
    }

    #[test]
    fn embed_identity_and_number() {
        let layout = SystemLayout::single_vslq(2).unwrap();
        let id = embed(&Operator::identity(3), &["r"], &layout).unwrap();
        assert!(id.max_abs_diff(&Operator::identity(36)) < 1e-15);
        let a = embed1(&annihilation(3).unwrap(), "l", &layout).unwrap();
        let n = &a.adjoint() * &a;
        let direct = embed1(&number(3).unwrap(), "l", &layout).unwrap();
        assert!(n.max_abs_diff(&direct) < 1e-15);
    }

    #[test]
    fn embed_product_equals_joint_embedding() {
        let layout = SystemLayout::single_vslq(2).unwrap();
        let x = xtilde(3).unwrap();
        let separate = &embed1(&x, "l", &layout).unwrap() * &embed1(&x, "r", &layout).unwrap();
        let joint = embed(&x.kron(&x), &["l", "r"], &layout).unwrap();
        assert!(separate.max_abs_diff(&joint) < 1e-15);
        // Reversed target order transposes the tensor factors.
        let a = annihilation(3).unwrap();
        let j1 = embed(&a.kron(&x), &["l", "r"], &layout).unwrap();
        let j2 = embed(&x.kron(&a), &["r", "l"], &layout).unwrap();
        assert!(j1.max_abs_diff(&j2) < 1e-15);
    }

    #[test]
    fn embed_errors() {
        let layout = SystemLayout::single_vslq(2).unwrap();
        assert!(matches!(embed1(&Operator::identity(2), "l", &layout), Err(VslqError::DimensionMismatch { .. })));
        assert!(matches!(embed1(&Operator::identity(3), "q", &layout), Err(VslqError::UnknownLabel(_))));
    }

    #[test]
    fn logical_basis_conventions() {
        let layout = SystemLayout::single_vslq(2).unwrap();
        let (z, o) = logical_basis(&layout, Copy::Solo).unwrap();
        let x = xtilde(3).unwrap();
        let xx = embed(&x.kron(&x), &["l", "r"], &layout).unwrap();
        for s in [&z, &o] {
            let img = xx.apply(s.amps());
            assert!(img.iter().zip(s.amps()).all(|(a, b)| (a - b).norm() < 1e-15));
        }
        assert!(z.inner(&o).norm() < 1e-15);
        let zp = ztilde(3, ZVariant::Prime).unwrap();
        let zl = embed(&zp.kron(&zp), &["l", "r"], &layout).unwrap();
        let img = zl.apply(z.amps());
        assert!(img.iter().zip(o.amps()).all(|(a, b)| (a - b).norm() < 1e-15));
        let zb = ztilde(3, ZVariant::Bare).unwrap();
        let zlb = embed(&zb.kron(&zb), &["l", "r"], &layout).unwrap();
        let img = zlb.apply(z.amps());
        assert!(img.iter().zip(o.amps()).all(|(a, b)| (a - b).norm() < 1e-15));
        let p1 = embed1(&projector(3, 1).unwrap(), "l", &layout).unwrap();
        assert_eq!(z.expectation(&p1).unwrap(), C64::new(0.0, 0.0));
    }

    #[test]
    fn expectation_values() {
        let layout = SystemLayout::single_vslq(2).unwrap();
        let (z, _) = logical_basis(&layout, Copy::Solo).unwrap();
        let x = xtilde(3).unwrap();
        let xx = embed(&x.kron(&x), &["l", "r"], &layout).unwrap();
        let rho = DensityState::from_pure(&z);
        assert!(close(expectation(&rho, &xx).unwrap(), 1.0));

        let mixed = DensityState::maximally_mixed(36);
        let traceless = embed1(&ztilde(3, ZVariant::Bare).unwrap(), "l", &layout).unwrap();
        assert!(expectation(&mixed, &traceless).unwrap().norm() < 1e-15);

        let one = PureState::new(vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0)]).unwrap();
        let rho1 = DensityState::from_pure(&one);
        assert!(close(expectation(&rho1, &ztilde(3, ZVariant::Prime).unwrap()).unwrap(), 1.0));
        assert!(expectation(&rho1, &Operator::identity(2)).is_err());
    }
}
