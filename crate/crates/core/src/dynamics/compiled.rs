//! Flattened Lindblad generator for the time-stepping kernels.
//!
//! Every coherent term and every anti-Hermitian decay term `−½γL†L` is merged
//! into one CSR pattern whose values are recombined at each evaluation time,
//! so the hot loop is a single sparse × dense product `M = G·ρ` followed by
//! `M + M† + Σ γ LρL†`. Jumps through monomial operators (every ladder
//! operator here) are gathers.

use num_complex::Complex64 as C64;

use super::{CollapseChannel, LindbladModel};
use crate::pulse::Envelope;
use crate::qalg::Operator;
use crate::units::{ANGULAR_PER_MHZ, RATE_PER_MHZ};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Direction of the generator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Direction {
    /// Schrödinger picture, `ρ̇ = L_t(ρ)`.
    Forward,
    /// Heisenberg picture run backwards from `end`: with `s = end − t`,
    /// `dA/ds = L†_{end−s}(A)`.
    Adjoint { end: f64 },
}

#[derive(Clone, Copy, Debug)]
pub struct CompileOptions {
    /// Pull the static diagonal of `H` out into an exactly integrated linear part.
    pub split_diagonal: bool,
    pub dissipation: bool,
    pub direction: Direction,
}

impl Default for CompileOptions {
    fn default() -> Self {
        Self { split_diagonal: true, dissipation: true, direction: Direction::Forward }
    }
}

enum Coeff {
    /// Drive envelope (MHz) times `−i·2π·1e-3`, or `+i` for the adjoint.
    Drive(Envelope),
    /// `−½ γ(t)` with `γ` in 1/µs.
    Decay(Envelope),
}

struct Term {
    coeff: Coeff,
    entries: Vec<(u32, C64)>,
}

pub(super) enum JumpKind {
    /// `(LρL†)_ab = amp_a conj(amp_b) ρ[src_a, src_b]` over rows holding an entry.
    Monomial { rows: Vec<u32>, src: Vec<u32>, amp: Vec<C64> },
    General { op: Operator },
}

pub(super) struct Jump {
    rate: Envelope,
    pub(super) kind: JumpKind,
}

pub struct CompiledModel {
    pub(super) n: usize,
    pub(super) diag: Vec<f64>,
    pub(super) row_ptr: Vec<u32>,
    pub(super) cols: Vec<u32>,
    base: Vec<C64>,
    terms: Vec<Term>,
    pub(super) jumps: Vec<Jump>,
    breaks: Vec<Envelope>,
    direction: Direction,
}

impl CompiledModel {
    pub fn new(model: &LindbladModel, opts: CompileOptions) -> Self {
        let n = model.dim();
        let sign = match opts.direction {
            Direction::Forward => 1.0,
            Direction::Adjoint { .. } => -1.0,
        };
        // G = −i·sign·H_off − ½K.
        let minus_i = C64::new(0.0, -sign);
        let static_h = &model.static_h;
        let mut diag = vec![0.0; n];
        let mut static_entries: Vec<(usize, usize, C64)> = Vec::new();
        for (r, c, v) in static_h.triplets() {
            if opts.split_diagonal && r == c {
                diag[r] = sign * v.re;
                // Any anti-Hermitian diagonal part stays in G.
                if v.im != 0.0 {
                    static_entries.push((r, c, minus_i * C64::new(0.0, v.im)));
                }
            } else {
                static_entries.push((r, c, minus_i * v));
            }
        }
        let mut raw_terms: Vec<(Coeff, Vec<(usize, usize, C64)>)> = Vec::new();
        for d in &model.drives {
            let entries = d.op.triplets().map(|(r, c, v)| (r, c, minus_i * v * ANGULAR_PER_MHZ)).collect();
            raw_terms.push((Coeff::Drive(d.envelope.clone()), entries));
        }
        let mut jumps = Vec::new();
        if opts.dissipation {
            for ch in &model.channels {
                let ltl = &ch.op.adjoint() * &ch.op;
                let entries = ltl.triplets().map(|(r, c, v)| (r, c, -0.5 * v * RATE_PER_MHZ)).collect();
                raw_terms.push((Coeff::Decay(ch.rate.clone()), entries));
                jumps.push(compile_jump(ch, opts.direction));
            }
        }

        // Union pattern.
        let mut rows: Vec<Vec<u32>> = vec![Vec::new(); n];
        for &(r, c, _) in static_entries.iter().chain(raw_terms.iter().flat_map(|(_, e)| e.iter())) {
            rows[r].push(c as u32);
        }
        let mut row_ptr = vec![0u32; n + 1];
        let mut cols = Vec::new();
        for (r, list) in rows.iter_mut().enumerate() {
            list.sort_unstable();
            list.dedup();
            cols.extend_from_slice(list);
            row_ptr[r + 1] = cols.len() as u32;
        }
        let position = |r: usize, c: usize| -> u32 {
            let (lo, hi) = (row_ptr[r] as usize, row_ptr[r + 1] as usize);
            lo as u32 + cols[lo..hi].binary_search(&(c as u32)).expect("entry in union pattern") as u32
        };
        let mut base = vec![ZERO; cols.len()];
        for &(r, c, v) in &static_entries {
            base[position(r, c) as usize] += v;
        }
        let terms = raw_terms
            .into_iter()
            .map(|(coeff, e)| Term { coeff, entries: e.into_iter().map(|(r, c, v)| (position(r, c), v)).collect() })
            .collect();
        let breaks = model
            .drives
            .iter()
            .map(|d| d.envelope.clone())
            .chain(model.channels.iter().map(|c| c.rate.clone()))
            .collect();
        Self { n, diag, row_ptr, cols, base, terms, jumps, breaks, direction: opts.direction }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    pub fn has_linear(&self) -> bool {
        self.diag.iter().any(|&d| d != 0.0)
    }

    fn physical_time(&self, t: f64) -> f64 {
        match self.direction {
            Direction::Forward => t,
            Direction::Adjoint { end } => end - t,
        }
    }

    /// Envelope discontinuities inside `(t0, t1)` in integration time.
    pub fn breakpoints(&self, t0: f64, t1: f64) -> Vec<f64> {
        let (p0, p1) = {
            let (a, b) = (self.physical_time(t0), self.physical_time(t1));
            (a.min(b), a.max(b))
        };
        let mut out: Vec<f64> = self
            .breaks
            .iter()
            .flat_map(|e| e.breakpoints(p0, p1))
            .map(|b| self.physical_time(b))
            .filter(|&b| b > t0 && b < t1)
            .collect();
        out.sort_by(f64::total_cmp);
        out.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        out
    }

    /// Values of `G(t)` on the union pattern, and jump rates in 1/ns.
    pub(super) fn assemble(&self, t: f64, vals: &mut Vec<C64>, rates: &mut Vec<f64>) {
        let tp = self.physical_time(t);
        vals.clear();
        vals.extend_from_slice(&self.base);
        for term in &self.terms {
            let k = match &term.coeff {
                Coeff::Drive(e) => e.eval(tp),
                Coeff::Decay(e) => e.eval(tp),
            };
            if k != 0.0 {
                for &(p, v) in &term.entries {
                    vals[p as usize] += k * v;
                }
            }
        }
        rates.clear();
        rates.extend(self.jumps.iter().map(|j| j.rate.eval(tp) * RATE_PER_MHZ));
    }

    fn linear_phases(&self, h: f64) -> Vec<C64> {
        self.diag.iter().map(|&d| C64::new(0.0, -d * h).exp()).collect()
    }
}

fn compile_jump(ch: &CollapseChannel, direction: Direction) -> Jump {
    let op = match direction {
        Direction::Forward => ch.op.clone(),
        Direction::Adjoint { .. } => ch.op.adjoint(),
    };
    let kind = if op.is_monomial() {
        let mut rows = Vec::new();
        let mut src = Vec::new();
        let mut amp = Vec::new();
        for r in 0..op.dim() {
            if let Some((c, v)) = op.row(r).next() {
                rows.push(r as u32);
                src.push(c as u32);
                amp.push(v);
            }
        }
        JumpKind::Monomial { rows, src, amp }
    } else {
        JumpKind::General { op }
    };
    Jump { rate: ch.rate.clone(), kind }
}

/// A linear ODE `ẋ = A x + N(t, x)` with an optional exactly solvable diagonal
/// part `A`.
pub trait Flow {
    fn len(&self) -> usize;
    fn rhs(&mut self, t: f64, x: &[C64], out: &mut [C64]);
    fn has_linear(&self) -> bool;
    /// `x ← exp(A h) x`.
    fn propagate_linear(&self, h: f64, x: &mut [C64]);
    fn breakpoints(&self, t0: f64, t1: f64) -> Vec<f64>;
    /// Called after each accepted step.
    fn finish_step(&self, _x: &mut [C64]) {}
}

/// Density-matrix (or Heisenberg-operator) flow.
pub struct DensityFlow<'a> {
    model: &'a CompiledModel,
    m: Vec<C64>,
    vals: Vec<C64>,
    rates: Vec<f64>,
}

impl<'a> DensityFlow<'a> {
    pub fn new(model: &'a CompiledModel) -> Self {
        let n = model.n;
        Self { model, m: vec![ZERO; n * n], vals: Vec::new(), rates: Vec::new() }
    }
}

impl Flow for DensityFlow<'_> {
    fn len(&self) -> usize {
        self.model.n * self.model.n
    }

    fn rhs(&mut self, t: f64, x: &[C64], out: &mut [C64]) {
        let model = self.model;
        let n = model.n;
        model.assemble(t, &mut self.vals, &mut self.rates);
        sparse_times_dense(&model.row_ptr, &model.cols, &self.vals, x, &mut self.m, n);
        add_hermitian_part(&self.m, out, n);
        for (jump, &rate) in model.jumps.iter().zip(&self.rates) {
            if rate == 0.0 {
                continue;
            }
            match &jump.kind {
                JumpKind::Monomial { rows, src, amp } => {
                    for (ia, (&a, &sa)) in rows.iter().zip(src).enumerate() {
                        let (a, sa) = (a as usize, sa as usize);
                        let ka = rate * amp[ia];
                        let xrow = &x[sa * n..(sa + 1) * n];
                        let orow = &mut out[a * n..(a + 1) * n];
                        // Upper triangle only; mirrored below.
                        let first = rows.partition_point(|&b| (b as usize) < a);
                        for ib in first..rows.len() {
                            orow[rows[ib] as usize] += ka * amp[ib].conj() * xrow[src[ib] as usize];
                        }
                    }
                }
                JumpKind::General { op } => {
                    let j = super::state::conjugate_by(op, x, n);
                    for i in 0..n {
                        for k in i..n {
                            out[i * n + k] += rate * j[i * n + k];
                        }
                    }
                }
            }
        }
        mirror_upper(out, n);
    }

    fn has_linear(&self) -> bool {
        self.model.has_linear()
    }

    fn propagate_linear(&self, h: f64, x: &mut [C64]) {
        let n = self.model.n;
        let p = self.model.linear_phases(h);
        for i in 0..n {
            let pi = p[i];
            for (v, pj) in x[i * n..(i + 1) * n].iter_mut().zip(&p) {
                *v *= pi * pj.conj();
            }
        }
    }

    fn breakpoints(&self, t0: f64, t1: f64) -> Vec<f64> {
        self.model.breakpoints(t0, t1)
    }

    fn finish_step(&self, x: &mut [C64]) {
        super::state::symmetrize(x, self.model.n);
    }
}

/// State-vector flow `ψ̇ = −iH(t)ψ` (dissipation must be compiled out).
pub struct PureFlow<'a> {
    model: &'a CompiledModel,
    vals: Vec<C64>,
    rates: Vec<f64>,
}

impl<'a> PureFlow<'a> {
    pub fn new(model: &'a CompiledModel) -> Self {
        Self { model, vals: Vec::new(), rates: Vec::new() }
    }
}

impl Flow for PureFlow<'_> {
    fn len(&self) -> usize {
        self.model.n
    }

    fn rhs(&mut self, t: f64, x: &[C64], out: &mut [C64]) {
        let model = self.model;
        model.assemble(t, &mut self.vals, &mut self.rates);
        for (r, o) in out.iter_mut().enumerate() {
            let (lo, hi) = (model.row_ptr[r] as usize, model.row_ptr[r + 1] as usize);
            *o = model.cols[lo..hi].iter().zip(&self.vals[lo..hi]).map(|(&c, v)| v * x[c as usize]).sum();
        }
    }

    fn has_linear(&self) -> bool {
        self.model.has_linear()
    }

    fn propagate_linear(&self, h: f64, x: &mut [C64]) {
        for (v, d) in x.iter_mut().zip(&self.model.diag) {
            *v *= C64::new(0.0, -d * h).exp();
        }
    }

    fn breakpoints(&self, t0: f64, t1: f64) -> Vec<f64> {
        self.model.breakpoints(t0, t1)
    }
}

fn sparse_times_dense(row_ptr: &[u32], cols: &[u32], vals: &[C64], x: &[C64], out: &mut [C64], n: usize) {
    for (i, dst) in out.chunks_exact_mut(n).enumerate() {
        dst.fill(ZERO);
        let (lo, hi) = (row_ptr[i] as usize, row_ptr[i + 1] as usize);
        for (&k, &g) in cols[lo..hi].iter().zip(&vals[lo..hi]) {
            let src = &x[k as usize * n..(k as usize + 1) * n];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += g * s;
            }
        }
    }
}

/// Upper triangle of `M + M†` into `out` (lower triangle left untouched).
fn add_hermitian_part(m: &[C64], out: &mut [C64], n: usize) {
    const B: usize = 32;
    for bi in (0..n).step_by(B) {
        for bj in (bi..n).step_by(B) {
            for i in bi..(bi + B).min(n) {
                for j in bj.max(i)..(bj + B).min(n) {
                    out[i * n + j] = m[i * n + j] + m[j * n + i].conj();
                }
            }
        }
    }
}

fn mirror_upper(out: &mut [C64], n: usize) {
    const B: usize = 32;
    for bi in (0..n).step_by(B) {
        for bj in (bi..n).step_by(B) {
            for i in bi..(bi + B).min(n) {
                let start = bj.max(i + 1);
                for j in start..(bj + B).min(n) {
                    out[j * n + i] = out[i * n + j].conj();
                }
            }
        }
        for i in bi..(bi + B).min(n) {
            let d = i * n + i;
            out[d] = C64::new(out[d].re, 0.0);
        }
    }
}
