//! Exponentials of sparse Hermitian generators.
//!
//! The generators used here (logical Paulis and their products) only couple
//! small clusters of basis states, so the exponential is computed exactly per
//! connected component of the sparsity graph with a dense eigendecomposition.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use super::Operator;
use crate::error::{Result, VslqError};

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Groups basis indices into the connected components of `g`'s sparsity graph.
fn components(g: &Operator) -> Vec<Vec<usize>> {
    let n = g.dim();
    let mut parent: Vec<usize> = (0..n).collect();
    for (r, c, _) in g.triplets() {
        let (a, b) = (find(&mut parent, r), find(&mut parent, c));
        if a != b {
            parent[a.max(b)] = a.min(b);
        }
    }
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        let root = find(&mut parent, i);
        groups[root].push(i);
    }
    groups.into_iter().filter(|g| !g.is_empty()).collect()
}

/// `exp(iθG)` for Hermitian `G`.
pub fn exp_i_hermitian(g: &Operator, theta: f64) -> Result<Operator> {
    let herm_defect = g.max_abs_diff(&g.adjoint());
    if herm_defect > 1e-12 * g.max_abs().max(1.0) {
        return Err(VslqError::InvalidParameter(format!("generator is not Hermitian (defect {herm_defect:.3e})")));
    }
    let mut triplets = Vec::new();
    for comp in components(g) {
        if comp.len() == 1 {
            let i = comp[0];
            triplets.push((i, i, C64::new(0.0, theta * g.get(i, i).re).exp()));
            continue;
        }
        let m = comp.len();
        let block = DMatrix::<C64>::from_fn(m, m, |a, b| g.get(comp[a], comp[b]));
        let eig = block.symmetric_eigen();
        let phases = DMatrix::<C64>::from_diagonal(&eig.eigenvalues.map(|l| C64::new(0.0, theta * l).exp()));
        let u = &eig.eigenvectors * phases * eig.eigenvectors.adjoint();
        for a in 0..m {
            for b in 0..m {
                let v = u[(a, b)];
                if v.norm() > 1e-15 {
                    triplets.push((comp[a], comp[b], v));
                }
            }
        }
    }
    Ok(Operator::from_triplets(g.dim(), triplets))
}

/// `exp(−iθG)` for Hermitian `G`.
pub fn exp_minus_i_hermitian(g: &Operator, theta: f64) -> Result<Operator> {
    exp_i_hermitian(g, -theta)
}
