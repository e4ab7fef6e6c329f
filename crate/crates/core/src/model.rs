//! Hamiltonians, logical operators, ideal gates and drive operators for one
//! or two VSLQ copies.

use std::f64::consts::FRAC_PI_4;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, VslqError};
use crate::qalg::{
    annihilation, embed, embed1, exp_i_hermitian, logical_basis, number, projector, xtilde, ztilde, Copy, Operator,
    PureState, Side, SystemLayout, ZVariant,
};
use crate::units::angular;

/// Device parameters. Frequencies in MHz (ordinary), lifetime in µs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VslqParams {
    /// Two-photon exchange strength `W`.
    pub w: f64,
    /// Anharmonic penalty `δ` on singly excited transmons.
    pub delta: f64,
    /// Primary photon-loss lifetime.
    pub t1p: f64,
    /// Shadow frequency; `None` means the resonant default `W + δ/2`.
    pub omega_s: Option<f64>,
    pub shadow_dim: usize,
    pub copies: usize,
}

impl Default for VslqParams {
    fn default() -> Self {
        Self { w: 25.0, delta: 300.0, t1p: 64.0, omega_s: None, shadow_dim: 2, copies: 1 }
    }
}

impl VslqParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(VslqError::InvalidParameter(m.to_string()));
        if !(self.w > 0.0 && self.w.is_finite()) {
            return bad("W must be positive");
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return bad("delta must be positive");
        }
        if !(self.t1p > 0.0) {
            return bad("T1P must be positive");
        }
        if self.shadow_dim < 2 {
            return bad("shadow_dim must be at least 2");
        }
        if !(self.copies == 1 || self.copies == 2) {
            return bad("copies must be 1 or 2");
        }
        if let Some(ws) = self.omega_s {
            if !ws.is_finite() {
                return bad("omega_s must be finite");
            }
        }
        Ok(())
    }

    /// Shadow frequency in MHz. The default places the corrected state
    /// (`−W + ω_S`) on resonance with the post-loss state (`δ/2`).
    pub fn omega_s(&self) -> f64 {
        self.omega_s.unwrap_or(self.w + self.delta / 2.0)
    }

    pub fn with_t1p(&self, t1p: f64) -> Self {
        Self { t1p, ..self.clone() }
    }

    pub fn layout(&self) -> Result<SystemLayout> {
        match self.copies {
            1 => SystemLayout::single_vslq(self.shadow_dim),
            _ => SystemLayout::two_copy(self.shadow_dim),
        }
    }
}

fn local(layout: &SystemLayout, op: &Operator, copy: Copy, base: &str) -> Result<Operator> {
    embed1(op, &copy.label(base), layout)
}

/// `H_P = −W X̃_l X̃_r + (δ/2)(P¹_l + P¹_r)` in rad/ns.
pub fn build_hp(params: &VslqParams, layout: &SystemLayout, copy: Copy) -> Result<Operator> {
    layout.require_copy(copy)?;
    let x = xtilde(3)?;
    let p1 = projector(3, 1)?;
    let xx = embed(&x.kron(&x), &[&copy.label("l"), &copy.label("r")], layout)?;
    let p1s = &local(layout, &p1, copy, "l")? + &local(layout, &p1, copy, "r")?;
    Ok(&xx.scale_re(-angular(params.w)) + &p1s.scale_re(angular(params.delta) / 2.0))
}

/// `H_S = ω_S (n_Sl + n_Sr)` in rad/ns.
pub fn build_hs(params: &VslqParams, layout: &SystemLayout, copy: Copy) -> Result<Operator> {
    layout.require_shadows(copy)?;
    let ns = |base: &str| -> Result<Operator> {
        let label = copy.label(base);
        embed1(&number(layout.local_dim(&label)?)?, &label, layout)
    };
    Ok((&ns("Sl")? + &ns("Sr")?).scale_re(angular(params.omega_s())))
}

/// Time-independent factor of the correction drive on one side,
/// `a_q† a_Sq† + a_q a_Sq` (dimensionless; the envelope supplies Ω(t)).
pub fn build_ec_drive(layout: &SystemLayout, copy: Copy, side: Side) -> Result<Operator> {
    layout.require_copy(copy)?;
    layout.require_shadows(copy)?;
    let shadow = copy.label(side.shadow());
    let a = annihilation(3)?;
    let a_s = annihilation(layout.local_dim(&shadow)?)?;
    let lower = embed(&a.kron(&a_s), &[&copy.label(side.primary()), &shadow], layout)?;
    Ok(&lower.adjoint() + &lower)
}

/// Static Hamiltonian of every copy in the layout: `Σ (H_P + H_S)`.
pub fn static_hamiltonian(params: &VslqParams, layout: &SystemLayout) -> Result<Operator> {
    let mut h = Operator::zeros(layout.dim());
    for copy in layout.copies() {
        h = &h + &build_hp(params, layout, copy)?;
        if layout.contains(&copy.label("Sl")) {
            h = &h + &build_hs(params, layout, copy)?;
        }
    }
    Ok(h)
}

/// Lowering operator of a named subsystem.
pub fn lowering(layout: &SystemLayout, label: &str) -> Result<Operator> {
    embed1(&annihilation(layout.local_dim(label)?)?, label, layout)
}

/// Number operator of a named subsystem.
pub fn number_op(layout: &SystemLayout, label: &str) -> Result<Operator> {
    embed1(&number(layout.local_dim(label)?)?, label, layout)
}

/// Logical operators of one copy.
#[derive(Clone, Debug)]
pub struct LogicalOperatorSet {
    pub x: Operator,
    pub y: Operator,
    pub z: Operator,
    pub x_bare: Operator,
    pub z_bare: Operator,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl LogicalOperatorSet {
    pub fn get(&self, axis: Axis) -> &Operator {
        match axis {
            Axis::X => &self.x,
            Axis::Y => &self.y,
            Axis::Z => &self.z,
        }
    }

    /// `(1 + sign·O)/2`.
    pub fn projector(&self, axis: Axis, sign: f64) -> Operator {
        half_projector(self.get(axis), sign)
    }
}

/// `(1 + sign·O)/2`.
pub fn half_projector(op: &Operator, sign: f64) -> Operator {
    (&Operator::identity(op.dim()) + &op.scale_re(sign)).scale_re(0.5)
}

/// Error-transparent `X_L = X̃_l + P¹_l X̃_r`, `Z_L = Z̃'_l Z̃'_r`,
/// `Y_L = i X_L Z_L`, and the bare `X̃_l`, `Z̃_l Z̃_r`.
///
/// `X_L` and `Z_L` anticommute on the whole space, so `Y_L` is Hermitian.
pub fn build_logical_ops(layout: &SystemLayout, copy: Copy) -> Result<LogicalOperatorSet> {
    layout.require_copy(copy)?;
    let (l, r) = (copy.label("l"), copy.label("r"));
    let x = xtilde(3)?;
    let p1 = projector(3, 1)?;
    let zp = ztilde(3, ZVariant::Prime)?;
    let zb = ztilde(3, ZVariant::Bare)?;
    let x_bare = embed1(&x, &l, layout)?;
    let x_l = &x_bare + &embed(&p1.kron(&x), &[&l, &r], layout)?;
    let z_l = embed(&zp.kron(&zp), &[&l, &r], layout)?;
    let z_bare = embed(&zb.kron(&zb), &[&l, &r], layout)?;
    let y_l = (&x_l * &z_l).scale(C64::new(0.0, 1.0));
    Ok(LogicalOperatorSet { x: x_l, y: y_l, z: z_l, x_bare, z_bare })
}

/// `‖(AB − BA)|ψ⟩‖`.
pub fn commutator_norm(a: &Operator, b: &Operator, psi: &PureState) -> f64 {
    let ab = a.apply(&b.apply(psi.amps()));
    let ba = b.apply(&a.apply(psi.amps()));
    ab.iter().zip(&ba).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
}

/// Error-transparency residuals on one copy: the largest `‖[a_q, O]|ψ⟩‖`
/// over `q ∈ {l, r}`, `O ∈ {X_L, Z_L}` and both logical states, and the
/// smallest one for the bare operators (`X̃_l` against `a_l`, `Z̃_l Z̃_r`
/// against `a_l` and `a_r`).
pub fn transparency_residuals() -> Result<(f64, f64)> {
    let layout = SystemLayout::single_vslq(2)?;
    let ops = build_logical_ops(&layout, Copy::Solo)?;
    let (zero, one) = logical_basis(&layout, Copy::Solo)?;
    let (a_l, a_r) = (lowering(&layout, "l")?, lowering(&layout, "r")?);
    let mut transparent: f64 = 0.0;
    let mut bare = f64::INFINITY;
    for psi in [&zero, &one] {
        for a in [&a_l, &a_r] {
            transparent = transparent.max(commutator_norm(a, &ops.x, psi)).max(commutator_norm(a, &ops.z, psi));
            bare = bare.min(commutator_norm(a, &ops.z_bare, psi));
        }
        bare = bare.min(commutator_norm(&a_l, &ops.x_bare, psi));
    }
    Ok((transparent, bare))
}

fn entangling_generator(oa: &Operator, ob: &Operator) -> Operator {
    &(oa - ob) - &(oa * ob)
}

/// `XCX = exp[i(π/4)(X_LA − X_LB − X_LA X_LB)]`.
pub fn ideal_xcx(layout: &SystemLayout) -> Result<Operator> {
    two_copy_ideal(layout, Axis::X)
}

/// `CZZ = exp[i(π/4)(Z_LA − Z_LB − Z_LA Z_LB)]`.
pub fn ideal_czz(layout: &SystemLayout) -> Result<Operator> {
    two_copy_ideal(layout, Axis::Z)
}

fn two_copy_ideal(layout: &SystemLayout, axis: Axis) -> Result<Operator> {
    layout.require_two_copies().map_err(|_| VslqError::InvalidLayout("entangling gates need two copies".into()))?;
    let a = build_logical_ops(layout, Copy::A)?;
    let b = build_logical_ops(layout, Copy::B)?;
    exp_i_hermitian(&entangling_generator(a.get(axis), b.get(axis)), FRAC_PI_4)
}

/// Drive operators of the timed XCX gate, paired with envelopes `f`, `g1`,
/// `g2`: `f(X_LA − X_LB) − (g1 X̃_lA X̃_lB + g2 X̃_rA X̃_rB)`.
#[derive(Clone, Debug)]
pub struct XcxDriveOps {
    pub single: Operator,
    pub left: Operator,
    pub right: Operator,
}

pub fn xcx_drive_ops(layout: &SystemLayout) -> Result<XcxDriveOps> {
    layout.require_two_copies()?;
    let a = build_logical_ops(layout, Copy::A)?;
    let b = build_logical_ops(layout, Copy::B)?;
    let x = xtilde(3)?;
    let xx = x.kron(&x);
    Ok(XcxDriveOps {
        single: &a.x - &b.x,
        left: embed(&xx, &["lA", "lB"], layout)?,
        right: embed(&xx, &["rA", "rB"], layout)?,
    })
}

/// `Z̃''_lA Z̃''_lB + Z̃''_rA Z̃''_rB` (or the bare `Z̃` form for comparison).
pub fn czz_drive_ops(layout: &SystemLayout, variant: ZVariant) -> Result<Operator> {
    layout.require_two_copies()?;
    let z = ztilde(3, variant)?;
    let zz = z.kron(&z);
    Ok(&embed(&zz, &["lA", "lB"], layout)? + &embed(&zz, &["rA", "rB"], layout)?)
}

/// Single-copy correction `Z_LA − Z_LB` applied alongside the CZZ coupling.
pub fn czz_single_ops(layout: &SystemLayout) -> Result<Operator> {
    layout.require_two_copies()?;
    Ok(&build_logical_ops(layout, Copy::A)?.z - &build_logical_ops(layout, Copy::B)?.z)
}

/// Readout coupling `(X̃_l + X̃_r)(a_R† + a_R)` and the resonator lowering
/// operator (its collapse channel).
pub fn measurement_hamiltonian(layout: &SystemLayout, copy: Copy) -> Result<(Operator, Operator)> {
    if !layout.has_resonator() {
        return Err(VslqError::InvalidLayout("measurement needs a readout resonator `R`".into()));
    }
    layout.require_copy(copy)?;
    let x = xtilde(3)?;
    let xs = &embed1(&x, &copy.label("l"), layout)? + &embed1(&x, &copy.label("r"), layout)?;
    let a_r = lowering(layout, "R")?;
    let quad = &a_r + &a_r.adjoint();
    Ok((&xs * &quad, a_r))
}

/// Second-order energy shifts `C[i][j]` multiplying `P^i_A P^j_B`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplerShiftTable {
    pub c: [[f64; 3]; 3],
}

/// Coefficients of
/// `c1(P¹_A + P¹_B) + cZZ Z̃''_A Z̃''_B + cZ(Z̃_A + Z̃_B) + c11 P¹_A P¹_B + c0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftDecomposition {
    pub c0: f64,
    pub c1: f64,
    pub cz: f64,
    pub czz: f64,
    pub c11: f64,
    /// RMS misfit of the model over every entry except `C11` (which `c11`
    /// absorbs exactly).
    pub residual: f64,
    /// `cZZ − target`.
    pub czz_error: f64,
}

const Z2: [f64; 3] = [-1.0, 0.5, 1.0];
const ZB: [f64; 3] = [-1.0, 0.0, 1.0];
const P1: [f64; 3] = [0.0, 1.0, 0.0];

impl ShiftDecomposition {
    /// Table entry predicted by the coefficients.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.c1 * (P1[i] + P1[j])
            + self.czz * Z2[i] * Z2[j]
            + self.cz * (ZB[i] + ZB[j])
            + self.c11 * P1[i] * P1[j]
            + self.c0
    }

    pub fn synthesize(c0: f64, c1: f64, cz: f64, czz: f64, c11: f64) -> CouplerShiftTable {
        let d = ShiftDecomposition { c0, c1, cz, czz, c11, residual: 0.0, czz_error: 0.0 };
        let mut c = [[0.0; 3]; 3];
        for (i, row) in c.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = d.entry(i, j);
            }
        }
        CouplerShiftTable { c }
    }
}

/// Fits the coefficient expansion to a shift table. `(c0, c1, cZ, cZZ)` come
/// from the five entries C00, C01, C02, C12, C22 (least squares; exact for
/// tables in the model span); `c11` from C11.
pub fn decompose_shift_table(table: &CouplerShiftTable, target_czz: f64) -> Result<ShiftDecomposition> {
    if table.c.iter().flatten().any(|v| !v.is_finite()) {
        return Err(VslqError::InvalidParameter("shift table has non-finite entries".into()));
    }
    const FOCUS: [(usize, usize); 5] = [(0, 0), (0, 1), (0, 2), (1, 2), (2, 2)];
    // Columns: c0, c1, cZ, cZZ.
    let design = DMatrix::from_fn(5, 4, |row, col| {
        let (i, j) = FOCUS[row];
        match col {
            0 => 1.0,
            1 => P1[i] + P1[j],
            2 => ZB[i] + ZB[j],
            _ => Z2[i] * Z2[j],
        }
    });
    let rhs = DVector::from_fn(5, |row, _| {
        let (i, j) = FOCUS[row];
        table.c[i][j]
    });
    let svd = design.clone().svd(true, true);
    let smin = svd.singular_values.iter().copied().fold(f64::INFINITY, f64::min);
    if smin < 1e-10 {
        return Err(VslqError::Singular(format!("shift-table design matrix has singular value {smin:.3e}")));
    }
    let x = svd.solve(&rhs, 1e-12).map_err(|e| VslqError::Singular(e.to_string()))?;
    let mut d = ShiftDecomposition {
        c0: x[0],
        c1: x[1],
        cz: x[2],
        czz: x[3],
        c11: 0.0,
        residual: 0.0,
        czz_error: 0.0,
    };
    d.c11 = table.c[1][1] - d.entry(1, 1);
    let mut sq = 0.0;
    let mut n = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            if (i, j) != (1, 1) {
                sq += (table.c[i][j] - d.entry(i, j)).powi(2);
                n += 1.0;
            }
        }
    }
    d.residual = (sq / n).sqrt();
    d.czz_error = d.czz - target_czz;
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single() -> SystemLayout {
        SystemLayout::single_vslq(2).unwrap()
    }

    #[test]
    fn hp_energies() {
        let p = VslqParams::default();
        let layout = single();
        let hp = build_hp(&p, &layout, Copy::Solo).unwrap();
        let (z, _) = logical_basis(&layout, Copy::Solo).unwrap();
        assert!((z.expectation(&hp).unwrap().re + angular(25.0)).abs() < 1e-12);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let one = [C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
        let plus = [C64::new(s, 0.0), C64::new(0.0, 0.0), C64::new(s, 0.0)];
        let psi = PureState::product(&layout, &[("l", &one), ("r", &plus)]).unwrap();
        assert!((psi.expectation(&hp).unwrap().re - angular(150.0)).abs() < 1e-12);
    }

    #[test]
    fn logical_ops_are_error_transparent() {
        let layout = single();
        let ops = build_logical_ops(&layout, Copy::Solo).unwrap();
        let (z, o) = logical_basis(&layout, Copy::Solo).unwrap();
        for q in ["l", "r"] {
            let a = lowering(&layout, q).unwrap();
            for psi in [&z, &o] {
                assert!(commutator_norm(&a, &ops.x, psi) < 1e-14);
                assert!(commutator_norm(&a, &ops.z, psi) < 1e-14);
            }
        }
        let a_l = lowering(&layout, "l").unwrap();
        assert!(commutator_norm(&a_l, &ops.x_bare, &z) >= 0.5);
        assert!(commutator_norm(&a_l, &ops.z_bare, &z) >= 0.5);
    }

    #[test]
    fn logical_ops_anticommute_and_y_is_hermitian() {
        let ops = build_logical_ops(&single(), Copy::Solo).unwrap();
        let anti = &(&ops.x * &ops.z) + &(&ops.z * &ops.x);
        assert!(anti.max_abs() < 1e-15);
        assert!(ops.y.is_hermitian(1e-15));
        assert!(ops.x.is_hermitian(0.0) && ops.z.is_hermitian(0.0));
    }

    #[test]
    fn ec_drive_elements() {
        let layout = single();
        let d = build_ec_drive(&layout, Copy::Solo, Side::L).unwrap();
        assert!(d.is_hermitian(0.0));
        let idx = |l: usize, r: usize, sl: usize, sr: usize| ((l * 3 + r) * 2 + sl) * 2 + sr;
        assert!((d.get(idx(2, 0, 1, 0), idx(1, 0, 0, 0)) - C64::new(2f64.sqrt(), 0.0)).norm() < 1e-15);
        // Primary at |2⟩ with shadow excited only couples downward.
        let col: Vec<(usize, C64)> = d.adjoint().row(idx(2, 0, 1, 0)).collect();
        assert_eq!(col.len(), 1);
        let hs = build_hs(&VslqParams::default(), &layout, Copy::Solo).unwrap();
        assert!((hs.get(idx(0, 0, 1, 0), idx(0, 0, 1, 0)).re - angular(175.0)).abs() < 1e-12);
    }

    #[test]
    fn decomposition_round_trip() {
        let t = ShiftDecomposition::synthesize(1.0, 2.0, 3.0, 4.0, 5.0);
        let d = decompose_shift_table(&t, 4.0).unwrap();
        for (got, want) in [(d.c0, 1.0), (d.c1, 2.0), (d.cz, 3.0), (d.czz, 4.0), (d.c11, 5.0)] {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
        assert!(d.residual < 1e-12 && d.czz_error.abs() < 1e-12);
        let zero = decompose_shift_table(&CouplerShiftTable { c: [[0.0; 3]; 3] }, 0.0).unwrap();
        assert!([zero.c0, zero.c1, zero.cz, zero.czz, zero.c11].iter().all(|v| v.abs() < 1e-15));
        let mut bad = t.clone();
        bad.c[0][0] = f64::NAN;
        assert!(decompose_shift_table(&bad, 0.0).is_err());
    }
}
