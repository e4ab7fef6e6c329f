//! Block-diagonal density flow.
//!
//! When the generator never couples basis states of different blocks (every
//! Hamiltonian term is block-diagonal and every jump maps a whole block into
//! a single block), block-diagonal operators stay block-diagonal. Only the
//! diagonal blocks are then stored and evolved. For two VSLQ copies the four
//! parity charges `level + n_S (mod 2)` split the 1296-dimensional space into
//! 16 blocks of 81, so each step touches 1/16 of the dense matrix.

use num_complex::Complex64 as C64;

use super::compiled::{CompiledModel, Flow, JumpKind};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Entries below this fraction of the largest magnitude are treated as zero
/// when deciding which basis states share a block.
pub const PATTERN_TOL: f64 = 1e-13;

/// Partition of the basis into invariant blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockPartition {
    blocks: Vec<Vec<u32>>,
    block_of: Vec<u32>,
    local: Vec<u32>,
}

impl BlockPartition {
    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(Vec::len).collect()
    }

    /// Diagonal blocks of a dense matrix, plus the largest discarded entry.
    pub fn pack(&self, dense: &[C64]) -> (Vec<C64>, f64) {
        let n = self.block_of.len();
        let offsets = self.offsets();
        let mut out = vec![ZERO; self.stored()];
        for (b, members) in self.blocks.iter().enumerate() {
            let k = members.len();
            for (i, &gi) in members.iter().enumerate() {
                for (j, &gj) in members.iter().enumerate() {
                    out[offsets[b] + i * k + j] = dense[gi as usize * n + gj as usize];
                }
            }
        }
        let mut dropped: f64 = 0.0;
        for r in 0..n {
            for c in 0..n {
                if self.block_of[r] != self.block_of[c] {
                    dropped = dropped.max(dense[r * n + c].norm());
                }
            }
        }
        (out, dropped)
    }

    pub fn unpack(&self, flat: &[C64]) -> Vec<C64> {
        let n = self.block_of.len();
        let offsets = self.offsets();
        let mut out = vec![ZERO; n * n];
        for (b, members) in self.blocks.iter().enumerate() {
            let k = members.len();
            for (i, &gi) in members.iter().enumerate() {
                for (j, &gj) in members.iter().enumerate() {
                    out[gi as usize * n + gj as usize] = flat[offsets[b] + i * k + j];
                }
            }
        }
        out
    }

    fn offsets(&self) -> Vec<usize> {
        let mut acc = 0;
        let mut out: Vec<usize> = self.blocks.iter().map(|b| {
            let o = acc;
            acc += b.len() * b.len();
            o
        }).collect();
        out.push(acc);
        out
    }

    /// Number of stored entries, `Σ n_b²`.
    pub fn stored(&self) -> usize {
        self.blocks.iter().map(|b| b.len() * b.len()).sum()
    }
}

struct UnionFind(Vec<u32>);

impl UnionFind {
    fn find(&mut self, mut i: u32) -> u32 {
        while self.0[i as usize] != i {
            let up = self.0[self.0[i as usize] as usize];
            self.0[i as usize] = up;
            i = up;
        }
        i
    }

    fn union(&mut self, a: u32, b: u32) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.0[ra.max(rb) as usize] = ra.min(rb);
        true
    }
}

/// Pairs `(r, c)` holding a non-negligible entry of a dense row-major matrix.
pub fn dense_pattern(x: &[C64], n: usize) -> Vec<(u32, u32)> {
    let scale = x.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let cut = PATTERN_TOL * scale;
    let mut out = Vec::new();
    for r in 0..n {
        for c in 0..n {
            if r != c && x[r * n + c].norm() > cut {
                out.push((r as u32, c as u32));
            }
        }
    }
    out
}

/// Finest partition keeping `model` block-diagonal and joining every pair in
/// `seed`. `None` if some jump is not monomial.
pub fn invariant_partition(model: &CompiledModel, seed: &[(u32, u32)]) -> Option<BlockPartition> {
    let n = model.n;
    let mut uf = UnionFind((0..n as u32).collect());
    for r in 0..n {
        for &c in &model.cols[model.row_ptr[r] as usize..model.row_ptr[r + 1] as usize] {
            uf.union(r as u32, c);
        }
    }
    for &(a, b) in seed {
        uf.union(a, b);
    }
    let mut maps = Vec::new();
    for j in &model.jumps {
        match &j.kind {
            JumpKind::Monomial { rows, src, .. } => maps.push((rows, src)),
            JumpKind::General { .. } => return None,
        }
    }
    // Images of one block must land in one block.
    loop {
        let mut changed = false;
        for (rows, src) in &maps {
            let mut image: Vec<Option<u32>> = vec![None; n];
            for (&a, &s) in rows.iter().zip(src.iter()) {
                let root = uf.find(s) as usize;
                match image[root] {
                    None => image[root] = Some(a),
                    Some(first) => changed |= uf.union(first, a),
                }
            }
        }
        if !changed {
            break;
        }
    }
    let mut index = vec![u32::MAX; n];
    let mut blocks: Vec<Vec<u32>> = Vec::new();
    for i in 0..n as u32 {
        let root = uf.find(i) as usize;
        if index[root] == u32::MAX {
            index[root] = blocks.len() as u32;
            blocks.push(Vec::new());
        }
        blocks[index[root] as usize].push(i);
    }
    let mut block_of = vec![0; n];
    let mut local = vec![0; n];
    for (b, members) in blocks.iter().enumerate() {
        for (k, &i) in members.iter().enumerate() {
            block_of[i as usize] = b as u32;
            local[i as usize] = k as u32;
        }
    }
    Some(BlockPartition { blocks, block_of, local })
}

struct BlockRows {
    row_ptr: Vec<u32>,
    /// (local column, index into the assembled value array).
    entries: Vec<(u32, u32)>,
}

struct BlockJump {
    jump: usize,
    src_block: usize,
    dst_block: usize,
    dst: Vec<u32>,
    src: Vec<u32>,
    amp: Vec<C64>,
}

/// Density flow over the diagonal blocks of a [`BlockPartition`].
pub struct BlockedFlow<'a> {
    model: &'a CompiledModel,
    part: BlockPartition,
    offsets: Vec<usize>,
    rows: Vec<BlockRows>,
    jumps: Vec<BlockJump>,
    vals: Vec<C64>,
    rates: Vec<f64>,
    m: Vec<C64>,
}

impl<'a> BlockedFlow<'a> {
    pub fn new(model: &'a CompiledModel, part: BlockPartition) -> Self {
        let offsets = part.offsets();
        let rows = part
            .blocks
            .iter()
            .map(|members| {
                let mut row_ptr = vec![0u32];
                let mut entries = Vec::new();
                for &g in members {
                    let (lo, hi) = (model.row_ptr[g as usize] as usize, model.row_ptr[g as usize + 1] as usize);
                    for p in lo..hi {
                        let c = model.cols[p] as usize;
                        debug_assert_eq!(part.block_of[c], part.block_of[g as usize]);
                        entries.push((part.local[c], p as u32));
                    }
                    row_ptr.push(entries.len() as u32);
                }
                BlockRows { row_ptr, entries }
            })
            .collect();
        let mut jumps = Vec::new();
        for (ji, j) in model.jumps.iter().enumerate() {
            let JumpKind::Monomial { rows, src, amp } = &j.kind else {
                unreachable!("partition rejects general jumps")
            };
            let mut per_block: Vec<Option<BlockJump>> = (0..part.len()).map(|_| None).collect();
            for k in 0..rows.len() {
                let (a, s) = (rows[k] as usize, src[k] as usize);
                let sb = part.block_of[s] as usize;
                let entry = per_block[sb].get_or_insert_with(|| BlockJump {
                    jump: ji,
                    src_block: sb,
                    dst_block: part.block_of[a] as usize,
                    dst: Vec::new(),
                    src: Vec::new(),
                    amp: Vec::new(),
                });
                debug_assert_eq!(entry.dst_block, part.block_of[a] as usize);
                entry.dst.push(part.local[a]);
                entry.src.push(part.local[s]);
                entry.amp.push(amp[k]);
            }
            jumps.extend(per_block.into_iter().flatten());
        }
        let largest = part.blocks.iter().map(Vec::len).max().unwrap_or(0);
        Self { model, part, offsets, rows, jumps, vals: Vec::new(), rates: Vec::new(), m: vec![ZERO; largest * largest] }
    }

    pub fn partition(&self) -> &BlockPartition {
        &self.part
    }

    fn block<'x>(&self, x: &'x [C64], b: usize) -> &'x [C64] {
        &x[self.offsets[b]..self.offsets[b + 1]]
    }
}

impl Flow for BlockedFlow<'_> {
    fn len(&self) -> usize {
        self.offsets[self.part.len()]
    }

    fn rhs(&mut self, t: f64, x: &[C64], out: &mut [C64]) {
        self.model.assemble(t, &mut self.vals, &mut self.rates);
        for (b, rows) in self.rows.iter().enumerate() {
            let k = self.part.blocks[b].len();
            let xb = &x[self.offsets[b]..self.offsets[b + 1]];
            let m = &mut self.m[..k * k];
            for i in 0..k {
                let dst = &mut m[i * k..(i + 1) * k];
                dst.fill(ZERO);
                for &(c, p) in &rows.entries[rows.row_ptr[i] as usize..rows.row_ptr[i + 1] as usize] {
                    let g = self.vals[p as usize];
                    for (d, s) in dst.iter_mut().zip(&xb[c as usize * k..(c as usize + 1) * k]) {
                        *d += g * s;
                    }
                }
            }
            let ob = &mut out[self.offsets[b]..self.offsets[b + 1]];
            for i in 0..k {
                for j in 0..k {
                    ob[i * k + j] = m[i * k + j] + m[j * k + i].conj();
                }
            }
        }
        for bj in &self.jumps {
            let rate = self.rates[bj.jump];
            if rate == 0.0 {
                continue;
            }
            let ks = self.part.blocks[bj.src_block].len();
            let kd = self.part.blocks[bj.dst_block].len();
            let (lo, hi) = (self.offsets[bj.src_block], self.offsets[bj.src_block + 1]);
            let xs = &x[lo..hi];
            let od = self.offsets[bj.dst_block];
            for (ia, (&a, &sa)) in bj.dst.iter().zip(&bj.src).enumerate() {
                let ka = rate * bj.amp[ia];
                let xrow = &xs[sa as usize * ks..(sa as usize + 1) * ks];
                let orow = &mut out[od + a as usize * kd..od + (a as usize + 1) * kd];
                for ib in 0..bj.dst.len() {
                    orow[bj.dst[ib] as usize] += ka * bj.amp[ib].conj() * xrow[bj.src[ib] as usize];
                }
            }
        }
    }

    fn has_linear(&self) -> bool {
        self.model.has_linear()
    }

    fn propagate_linear(&self, h: f64, x: &mut [C64]) {
        for (b, members) in self.part.blocks.iter().enumerate() {
            let k = members.len();
            let p: Vec<C64> = members.iter().map(|&g| C64::new(0.0, -self.model.diag[g as usize] * h).exp()).collect();
            let xb = &mut x[self.offsets[b]..self.offsets[b + 1]];
            for i in 0..k {
                for (v, pj) in xb[i * k..(i + 1) * k].iter_mut().zip(&p) {
                    *v *= p[i] * pj.conj();
                }
            }
        }
    }

    fn breakpoints(&self, t0: f64, t1: f64) -> Vec<f64> {
        self.model.breakpoints(t0, t1)
    }

    fn finish_step(&self, x: &mut [C64]) {
        for (b, members) in self.part.blocks.iter().enumerate() {
            let k = members.len();
            let xb = &mut x[self.offsets[b]..self.offsets[b + 1]];
            super::state::symmetrize(xb, k);
        }
    }
}

impl BlockedFlow<'_> {
    /// `Tr(A ρ)` over the stored blocks, both in packed form.
    pub fn trace_product(&self, a: &[C64], rho: &[C64]) -> C64 {
        (0..self.part.len())
            .map(|b| {
                let k = self.part.blocks[b].len();
                let (ab, rb) = (self.block(a, b), self.block(rho, b));
                (0..k).flat_map(|i| (0..k).map(move |j| ab[i * k + j] * rb[j * k + i])).sum::<C64>()
            })
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{integrate, CompileOptions, DensityFlow, DensityState, IntegratorConfig};
    use crate::model::VslqParams;
    use crate::pulse::{assemble_model, build_ec_cycle};
    use crate::qalg::{logical_product, Copy, Logical};

    fn single_copy_model() -> (CompiledModel, DensityState) {
        let p = VslqParams { t1p: 2.0, ..VslqParams::default() };
        let layout = p.layout().unwrap();
        let s = build_ec_cycle(&p, &Default::default(), 7.0).unwrap();
        let model = assemble_model(&p, &layout, &s).unwrap();
        let psi = logical_product(&layout, &[(Copy::Solo, Logical::Zero)]).unwrap();
        (CompiledModel::new(&model, CompileOptions::default()), DensityState::from_pure(&psi))
    }

    #[test]
    fn parity_sectors_of_one_copy() {
        let (m, rho) = single_copy_model();
        let part = invariant_partition(&m, &dense_pattern(rho.data(), rho.dim())).unwrap();
        // Two parity charges, nine states each.
        assert_eq!(part.block_sizes(), vec![9; 4]);
        let (packed, dropped) = part.pack(rho.data());
        assert_eq!(dropped, 0.0);
        assert_eq!(part.unpack(&packed), rho.data());
    }

    #[test]
    fn blocked_matches_dense() {
        let (m, rho) = single_copy_model();
        let n = rho.dim();
        let cfg = IntegratorConfig::interaction(0.25);
        let mut dense = rho.data().to_vec();
        integrate(&mut DensityFlow::new(&m), &mut dense, 0.0, 100.0, &cfg, &[], |_, _| Ok(())).unwrap();
        let part = invariant_partition(&m, &dense_pattern(rho.data(), n)).unwrap();
        let mut flow = BlockedFlow::new(&m, part.clone());
        let (mut x, _) = part.pack(rho.data());
        integrate(&mut flow, &mut x, 0.0, 100.0, &cfg, &[], |_, _| Ok(())).unwrap();
        let back = part.unpack(&x);
        let diff = back.iter().zip(&dense).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(diff < 1e-13, "{diff}");
        let tr = flow.trace_product(&part.pack(&dense).0, &x);
        let direct: C64 = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| dense[i * n + j] * dense[j * n + i]).sum();
        assert!((tr - direct).norm() < 1e-12);
    }

    #[test]
    fn dense_seed_merges_everything() {
        let (m, rho) = single_copy_model();
        let n = rho.dim();
        let full: Vec<(u32, u32)> = (0..n as u32).map(|i| (0, i)).collect();
        assert_eq!(invariant_partition(&m, &full).unwrap().len(), 1);
    }
}
