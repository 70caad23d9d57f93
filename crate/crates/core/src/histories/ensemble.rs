use rayon::prelude::*;

use crate::hilbert::{cr, Bipartition, CMatrix, CVector, TensorSpace, C64};

use super::functional::DecoherenceMatrix;
use super::History;

/// Branch vectors `C_α|z⟩` for an eigen-ensemble `ρ = Σ_z λ_z |z⟩⟨z|`.
///
/// Every functional of the set (ordinary, partial-trace, conditional states)
/// is a contraction of these vectors, so nothing quadratic in the total
/// dimension is ever formed.
#[derive(Clone, Debug)]
pub struct BranchEnsemble {
    space: TensorSpace,
    eval_time: usize,
    histories: Vec<History>,
    labels: Vec<String>,
    weights: Vec<f64>,
    states: Vec<CVector>,
    branches: Vec<Vec<CVector>>,
    pure: bool,
}

impl BranchEnsemble {
    /// `branches[α][z]` must line up with `weights[z]` and `states[z]`.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        space: &TensorSpace,
        eval_time: usize,
        histories: Vec<History>,
        labels: Vec<String>,
        weights: Vec<f64>,
        states: Vec<CVector>,
        branches: Vec<Vec<CVector>>,
        pure: bool,
    ) -> Self {
        debug_assert_eq!(weights.len(), states.len());
        debug_assert!(branches.iter().all(|b| b.len() == weights.len()));
        debug_assert_eq!(labels.len(), branches.len());
        Self {
            space: space.clone(),
            eval_time,
            histories,
            labels,
            weights,
            states,
            branches,
            pure,
        }
    }

    pub fn space(&self) -> &TensorSpace {
        &self.space
    }

    pub fn eval_time(&self) -> usize {
        self.eval_time
    }

    pub fn len(&self) -> usize {
        self.branches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.branches.is_empty()
    }

    /// Fine histories, empty for coarse-grained ensembles.
    pub fn histories(&self) -> &[History] {
        &self.histories
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `U(0 → t)|z⟩` for each ensemble member.
    pub fn states(&self) -> &[CVector] {
        &self.states
    }

    pub fn branches(&self, i: usize) -> &[CVector] {
        &self.branches[i]
    }

    /// Whether the global state is a single pure vector.
    pub fn is_pure(&self) -> bool {
        self.pure
    }

    pub fn probability(&self, i: usize) -> f64 {
        self.weights
            .iter()
            .zip(&self.branches[i])
            .map(|(w, b)| w * b.norm_squared())
            .sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.probability(i)).collect()
    }

    /// `D(i, j) = Σ_z λ_z ⟨b_{j,z}|b_{i,z}⟩`.
    pub fn overlap(&self, i: usize, j: usize) -> C64 {
        self.weights
            .iter()
            .zip(self.branches[i].iter().zip(&self.branches[j]))
            .map(|(w, (bi, bj))| bj.dotc(bi) * w)
            .sum()
    }

    pub fn decoherence_matrix(&self) -> DecoherenceMatrix {
        let n = self.len();
        let rows: Vec<Vec<C64>> = (0..n)
            .into_par_iter()
            .map(|i| (0..n).map(|j| self.overlap(i, j)).collect())
            .collect();
        let entries = CMatrix::from_fn(n, n, |i, j| rows[i][j]);
        DecoherenceMatrix::new(self.labels.clone(), entries, self.eval_time)
    }

    /// `[√λ_z · reshape(b_{i,z})]_z` side by side, so that
    /// `Tr_T[C_i ρ C_j†] = L_i L_j†`.
    pub fn factor(&self, i: usize, bp: &Bipartition) -> CMatrix {
        let blocks: Vec<CMatrix> = self
            .weights
            .iter()
            .zip(&self.branches[i])
            .map(|(w, b)| bp.reshape(b) * cr(w.sqrt()))
            .collect();
        hstack(&blocks, bp.dim_keep())
    }

    /// `Tr_T[C_i ρ C_j†]` as an operator on the kept factors.
    pub fn pt_entry(&self, i: usize, j: usize, bp: &Bipartition) -> CMatrix {
        let mut out = CMatrix::zeros(bp.dim_keep(), bp.dim_keep());
        for ((w, bi), bj) in self
            .weights
            .iter()
            .zip(&self.branches[i])
            .zip(&self.branches[j])
        {
            out += bp.trace_out_outer(bi, bj) * cr(*w);
        }
        out
    }

    /// Unnormalized conditional state `Tr_T[C_i ρ C_i†]`.
    pub fn conditional_unnormalized(&self, i: usize, bp: &Bipartition) -> CMatrix {
        self.pt_entry(i, i, bp)
    }

    /// `Tr_T[ρ(t)]`.
    pub fn reduced_state(&self, bp: &Bipartition) -> CMatrix {
        let mut out = CMatrix::zeros(bp.dim_keep(), bp.dim_keep());
        for (w, z) in self.weights.iter().zip(&self.states) {
            out += bp.trace_out_outer(z, z) * cr(*w);
        }
        out
    }

    /// Sums branches within each group.
    pub fn coarse(&self, groups: &[Vec<usize>], labels: Vec<String>) -> BranchEnsemble {
        let nz = self.weights.len();
        let n = self.space.total_dim();
        let branches = groups
            .iter()
            .map(|g| {
                (0..nz)
                    .map(|z| {
                        g.iter()
                            .fold(CVector::zeros(n), |acc, &i| acc + &self.branches[i][z])
                    })
                    .collect()
            })
            .collect();
        BranchEnsemble {
            space: self.space.clone(),
            eval_time: self.eval_time,
            histories: Vec::new(),
            labels,
            weights: self.weights.clone(),
            states: self.states.clone(),
            branches,
            pure: self.pure,
        }
    }
}

pub(crate) fn hstack(blocks: &[CMatrix], rows: usize) -> CMatrix {
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = CMatrix::zeros(rows, cols);
    let mut at = 0;
    for b in blocks {
        out.columns_mut(at, b.ncols()).copy_from(b);
        at += b.ncols();
    }
    out
}
