use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hilbert::{trace_norm, trace_norm_of_product, Bipartition, CMatrix, Fragment};
use crate::histories::HistorySet;

fn kept_of(hs: &HistorySet, traced: &Fragment) -> Result<Fragment> {
    if traced.space() != hs.space() {
        return Err(Error::ShapeMismatch("fragment belongs to a different space".into()));
    }
    if traced.is_full() {
        return Err(Error::FullTrace);
    }
    Ok(traced.complement())
}

/// `max_{a≠b} ‖P_a ρ^K P_b‖₁` for the final-event projectors, where `ρ^K` is
/// the state at the final event time with `traced` removed.
pub fn block_diagonal_defect(hs: &HistorySet, traced: &Fragment) -> Result<f64> {
    let kept = kept_of(hs, traced)?;
    let last = hs
        .events()
        .last()
        .ok_or_else(|| Error::InvalidHistory("block structure needs at least one event".into()))?;
    let ens = hs.ensemble(hs.final_time())?;
    let rho = ens.reduced_state(&Bipartition::new(&kept));
    let projectors: Vec<CMatrix> = last
        .family
        .projectors()
        .iter()
        .map(|p| Ok(p.restricted_to(&kept)?.to_dense()))
        .collect::<Result<_>>()?;
    let mut worst = 0.0f64;
    for (a, pa) in projectors.iter().enumerate() {
        for (b, pb) in projectors.iter().enumerate() {
            if a != b {
                worst = worst.max(trace_norm(&(pa * &rho * pb)));
            }
        }
    }
    Ok(worst)
}

/// Largest entry of `|p_{α∨β} ρ_{α∨β} − p_α ρ_α − p_β ρ_β|` over pairs of
/// distinct histories, with conditional states on the complement of `traced`.
pub fn generalized_sum_rule_defect(hs: &HistorySet, traced: &Fragment, eval_time: usize) -> Result<f64> {
    let kept = kept_of(hs, traced)?;
    let bp = Bipartition::new(&kept);
    let ens = hs.ensemble(eval_time)?;
    let n = ens.len();
    let singles: Vec<CMatrix> = (0..n)
        .into_par_iter()
        .map(|i| ens.conditional_unnormalized(i, &bp))
        .collect();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
    let worst = pairs
        .par_iter()
        .map(|&(a, b)| {
            let joined = ens.coarse(&[vec![a, b]], vec![String::new()]);
            let both = joined.conditional_unnormalized(0, &bp);
            (both - &singles[a] - &singles[b])
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max);
    Ok(worst)
}

/// `max ‖D_F(α∧α′, β∧β′)‖₁` over extended histories whose base parts differ.
///
/// `extended` must share the initial state of `base` and carry its events as
/// a prefix.
pub fn extension_defect(base: &HistorySet, extended: &HistorySet, traced: &Fragment, eval_time: usize) -> Result<f64> {
    let kept = kept_of(extended, traced)?;
    let m = base.events().len();
    if extended.events().len() < m
        || base
            .events()
            .iter()
            .zip(extended.events())
            .any(|(a, b)| a.time != b.time || a.family.labels() != b.family.labels())
    {
        return Err(Error::InvalidHistory("extended set does not continue the base events".into()));
    }
    let bp = Bipartition::new(&kept);
    let ens = extended.ensemble(eval_time)?;
    let histories = extended.histories();
    let factors: Vec<CMatrix> = (0..ens.len()).into_par_iter().map(|i| ens.factor(i, &bp)).collect();
    let pairs: Vec<(usize, usize)> = (0..histories.len())
        .flat_map(|a| (a + 1..histories.len()).map(move |b| (a, b)))
        .filter(|&(a, b)| histories[a][..m] != histories[b][..m])
        .collect();
    Ok(pairs
        .par_iter()
        .map(|&(a, b)| trace_norm_of_product(&factors[a], &factors[b]).0)
        .reduce(|| 0.0, f64::max))
}

/// Largest `|⟨i|D(α,β)|j⟩|² − ⟨i|D(α,α)|i⟩⟨j|D(β,β)|j⟩` over all pairs and
/// all basis indices, with `basis` a unitary whose columns are `|i⟩` on the
/// complement of `traced`.
pub fn matrix_element_bound_excess(hs: &HistorySet, traced: &Fragment, eval_time: usize, basis: &CMatrix) -> Result<f64> {
    let kept = kept_of(hs, traced)?;
    let bp = Bipartition::new(&kept);
    if basis.nrows() != bp.dim_keep() || basis.ncols() != bp.dim_keep() {
        return Err(Error::ShapeMismatch(format!(
            "basis is {}x{}, kept part has dimension {}",
            basis.nrows(),
            basis.ncols(),
            bp.dim_keep()
        )));
    }
    let ens = hs.ensemble(eval_time)?;
    let n = ens.len();
    let rotate = |m: CMatrix| basis.adjoint() * m * basis;
    let diag: Vec<CMatrix> = (0..n).map(|i| rotate(ens.pt_entry(i, i, &bp))).collect();
    let worst = (0..n * n)
        .into_par_iter()
        .map(|k| {
            let (a, b) = (k / n, k % n);
            let d = rotate(ens.pt_entry(a, b, &bp));
            let mut w = f64::NEG_INFINITY;
            for i in 0..d.nrows() {
                for j in 0..d.ncols() {
                    let bound = diag[a][(i, i)].re * diag[b][(j, j)].re;
                    w = w.max(d[(i, j)].norm_sqr() - bound);
                }
            }
            w
        })
        .reduce(|| f64::NEG_INFINITY, f64::max);
    Ok(worst)
}
