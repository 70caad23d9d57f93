use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hilbert::{
    fidelity_of_matrices, spectral_norm, trace, trace_norm, trace_norm_of_product, Bipartition,
    CMatrix, Fragment, C64,
};
use crate::histories::{BranchEnsemble, DecoherenceMatrix, HistorySet};

/// `D_B(α, β) = Tr_B[C_α ρ C_β†]` for every pair, as operators on the kept
/// factors.
#[derive(Clone, Debug)]
pub struct PtDecoherenceFunctional {
    pub traced: Fragment,
    pub kept: Fragment,
    pub labels: Vec<String>,
    pub eval_time: usize,
    pub probabilities: Vec<f64>,
    entries: Vec<CMatrix>,
}

impl PtDecoherenceFunctional {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn entry(&self, i: usize, j: usize) -> &CMatrix {
        &self.entries[i * self.len() + j]
    }

    /// `max |Tr D_B(α,β) − D(α,β)|`.
    pub fn trace_defect(&self, d: &DecoherenceMatrix) -> f64 {
        let n = self.len();
        let mut m = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                m = m.max((trace(self.entry(i, j)) - d.get(i, j)).norm());
            }
        }
        m
    }

    /// Largest entry of `|D_B(β,α) − D_B(α,β)†|`.
    pub fn adjoint_defect(&self) -> f64 {
        let n = self.len();
        let mut m = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let diff = self.entry(j, i) - self.entry(i, j).adjoint();
                m = m.max(diff.iter().map(|z| z.norm()).fold(0.0, f64::max));
            }
        }
        m
    }

    /// Largest entry of `|Σ_{αβ} D_B(α,β) − ρ^K|`.
    pub fn sum_defect(&self, reduced: &CMatrix) -> f64 {
        let sum = self
            .entries
            .iter()
            .fold(CMatrix::zeros(reduced.nrows(), reduced.ncols()), |acc, e| acc + e);
        (sum - reduced).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_offdiag_trace_norm(&self) -> f64 {
        let n = self.len();
        let mut m = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    m = m.max(trace_norm(self.entry(i, j)));
                }
            }
        }
        m
    }
}

fn check_fragment(hs: &HistorySet, f: &Fragment) -> Result<()> {
    if f.space() != hs.space() {
        return Err(Error::ShapeMismatch("fragment belongs to a different space".into()));
    }
    Ok(())
}

/// Full partial-trace functional. Memory grows as `N² · dim(kept)²`; use
/// [`check_pt_consistency`] when only norms are needed.
pub fn pt_decoherence_functional(hs: &HistorySet, traced: &Fragment, eval_time: usize) -> Result<PtDecoherenceFunctional> {
    check_fragment(hs, traced)?;
    if traced.is_full() {
        return Err(Error::FullTrace);
    }
    let kept = traced.complement();
    let ens = hs.ensemble(eval_time)?;
    let bp = Bipartition::new(&kept);
    let n = ens.len();
    let entries: Vec<CMatrix> = (0..n * n)
        .into_par_iter()
        .map(|k| ens.pt_entry(k / n, k % n, &bp))
        .collect();
    Ok(PtDecoherenceFunctional {
        traced: traced.clone(),
        kept,
        labels: ens.labels().to_vec(),
        eval_time,
        probabilities: ens.probabilities(),
        entries,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct PtPair {
    pub alpha: String,
    pub beta: String,
    /// `‖CF^B_{αβ}‖₁`
    pub trace_norm: f64,
    /// `‖CF^B_{αβ}‖_∞`, reported for diagnostics.
    pub spectral_norm: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct PtConsistencyReport {
    pub traced: String,
    pub eval_time: usize,
    pub epsilon: f64,
    pub consistent: bool,
    pub max_trace_norm: f64,
    /// Every tested pair `α < β`, in lexicographic order.
    pub pairs: Vec<PtPair>,
    pub violations: Vec<PtPair>,
    pub zero_probability: Vec<String>,
}

/// Normalized factors `L_α / √p_α` over histories with nonzero probability.
pub(crate) fn normalized_factors(ens: &BranchEnsemble, bp: &Bipartition, zero_p: f64) -> (Vec<usize>, Vec<CMatrix>, Vec<usize>) {
    let probs = ens.probabilities();
    let live: Vec<usize> = (0..ens.len()).filter(|&i| probs[i] >= zero_p).collect();
    let dead: Vec<usize> = (0..ens.len()).filter(|&i| probs[i] < zero_p).collect();
    let factors = live
        .par_iter()
        .map(|&i| ens.factor(i, bp) / C64::new(probs[i].sqrt(), 0.0))
        .collect();
    (live, factors, dead)
}

/// Tests `‖CF^B_{αβ}‖₁ ≤ ε` for all pairs with nonzero probabilities.
pub fn check_pt_consistency(hs: &HistorySet, traced: &Fragment, eval_time: usize, epsilon: f64) -> Result<PtConsistencyReport> {
    check_fragment(hs, traced)?;
    if traced.is_full() {
        return Err(Error::FullTrace);
    }
    let ens = hs.ensemble(eval_time)?;
    let bp = Bipartition::new(&traced.complement());
    let (live, factors, dead) = normalized_factors(&ens, &bp, hs.tolerances().zero_probability);
    let idx: Vec<(usize, usize)> = (0..live.len())
        .flat_map(|a| (a + 1..live.len()).map(move |b| (a, b)))
        .collect();
    let labels = ens.labels();
    let pairs: Vec<PtPair> = idx
        .par_iter()
        .map(|&(a, b)| {
            let (tn, sn) = trace_norm_of_product(&factors[a], &factors[b]);
            PtPair {
                alpha: labels[live[a]].clone(),
                beta: labels[live[b]].clone(),
                trace_norm: tn,
                spectral_norm: sn,
            }
        })
        .collect();
    let max_trace_norm = pairs.iter().map(|p| p.trace_norm).fold(0.0, f64::max);
    let violations: Vec<PtPair> = pairs.iter().filter(|p| p.trace_norm > epsilon).cloned().collect();
    Ok(PtConsistencyReport {
        traced: traced.to_string(),
        eval_time,
        epsilon,
        consistent: violations.is_empty(),
        max_trace_norm,
        pairs,
        violations,
        zero_probability: dead.iter().map(|&i| labels[i].clone()).collect(),
    })
}

#[derive(Clone, Debug)]
pub struct PtFactor {
    pub kept: Fragment,
    /// `CF^B_{αβ}` on the kept factors.
    pub operator: CMatrix,
    pub trace_norm: f64,
    pub spectral_norm: f64,
}

/// `CF^B_{αβ} = Tr_B[C_α ρ C_β†] / √(p_α p_β)`.
pub fn pt_consistency_factor(
    hs: &HistorySet,
    traced: &Fragment,
    alpha: &[usize],
    beta: &[usize],
    eval_time: usize,
) -> Result<PtFactor> {
    check_fragment(hs, traced)?;
    if traced.is_full() {
        return Err(Error::FullTrace);
    }
    let i = hs.history_index(alpha)?;
    let j = hs.history_index(beta)?;
    let ens = hs.ensemble(eval_time)?;
    let (pi, pj) = (ens.probability(i), ens.probability(j));
    for (p, h) in [(pi, alpha), (pj, beta)] {
        if p < hs.tolerances().zero_probability {
            return Err(Error::ZeroProbability(hs.history_label(h)));
        }
    }
    let kept = traced.complement();
    let bp = Bipartition::new(&kept);
    let operator = ens.pt_entry(i, j, &bp) / C64::new((pi * pj).sqrt(), 0.0);
    Ok(PtFactor {
        kept,
        trace_norm: trace_norm(&operator),
        spectral_norm: spectral_norm(&operator),
        operator,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct IdentityCheck {
    pub alpha: String,
    pub beta: String,
    pub cut: String,
    /// `F(ρ^A_α, ρ^A_β)` on the cut.
    pub lhs: f64,
    /// `‖CF^A_{αβ}‖₁`, tracing the cut out.
    pub rhs: f64,
    pub gap: f64,
}

/// Compares the fidelity of conditional states on `cut` with the trace norm
/// of the consistency factor obtained by tracing `cut` out. The two agree for
/// pure global states.
pub fn fidelity_identity_check(
    hs: &HistorySet,
    cut: &Fragment,
    alpha: &[usize],
    beta: &[usize],
    eval_time: usize,
) -> Result<IdentityCheck> {
    check_fragment(hs, cut)?;
    if !hs.is_pure() {
        return Err(Error::RequiresPureState);
    }
    let i = hs.history_index(alpha)?;
    let j = hs.history_index(beta)?;
    let ens = hs.ensemble(eval_time)?;
    let (pi, pj) = (ens.probability(i), ens.probability(j));
    for (p, h) in [(pi, alpha), (pj, beta)] {
        if p < hs.tolerances().zero_probability {
            return Err(Error::ZeroProbability(hs.history_label(h)));
        }
    }
    let on_cut = Bipartition::new(cut);
    let rho_a = ens.conditional_unnormalized(i, &on_cut) / C64::new(pi, 0.0);
    let rho_b = ens.conditional_unnormalized(j, &on_cut) / C64::new(pj, 0.0);
    let lhs = fidelity_of_matrices(&rho_a, &rho_b, hs.tolerances().psd)?;
    let off_cut = Bipartition::new(&cut.complement());
    let (rhs_raw, _) = trace_norm_of_product(&ens.factor(i, &off_cut), &ens.factor(j, &off_cut));
    let rhs = rhs_raw / (pi * pj).sqrt();
    Ok(IdentityCheck {
        alpha: hs.history_label(alpha),
        beta: hs.history_label(beta),
        cut: cut.to_string(),
        lhs,
        rhs,
        gap: (lhs - rhs).abs(),
    })
}
