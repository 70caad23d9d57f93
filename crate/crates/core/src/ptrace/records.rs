use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hilbert::{cr, hermitian_eigen, Bipartition, CMatrix, CVector, Fragment, SQRT_FLOOR};
use crate::histories::{BranchEnsemble, HistorySet};
use crate::tolerance::Tolerances;

use super::functional::check_pt_consistency;

/// Evidence for (or against) a record of each history in a fragment.
#[derive(Clone, Debug, Serialize)]
pub struct RecordCertificate {
    pub fragment: String,
    pub eval_time: usize,
    pub delta: f64,
    /// `max(δ, tol.ortho)`, the value every condition is compared against.
    pub threshold: f64,
    /// Histories with nonzero probability, in order.
    pub histories: Vec<String>,
    pub ranks: Vec<usize>,
    pub worst_fidelity: f64,
    pub worst_pair: Option<(String, String)>,
    /// `max ‖Π_α Π_β‖₁` over supports of distinct conditional states.
    pub support_overlap: f64,
    /// `max ‖(I⊗R_α)ρ − C_α ρ‖₁` with `R_α` the support projector.
    pub projector_defect: f64,
    pub orthogonal_supports: bool,
    pub fidelity_bound: bool,
    pub projector_condition: bool,
    /// The fidelity condition; the other two are reported alongside.
    pub has_record: bool,
    pub zero_probability: Vec<String>,
    /// Support projectors on the fragment, one per entry of `histories`.
    #[serde(skip)]
    pub record_projectors: Vec<CMatrix>,
}

impl RecordCertificate {
    pub fn conditions_agree(&self) -> bool {
        self.orthogonal_supports == self.fidelity_bound && self.fidelity_bound == self.projector_condition
    }
}

/// Eigen-pairs of `L L†`, through whichever of `L L†` or `L` is smaller.
fn gram_spectrum(l: &CMatrix) -> (Vec<f64>, CMatrix) {
    if l.ncols() >= l.nrows() {
        let (values, vectors) = hermitian_eigen(&(l * l.adjoint()));
        (values.into_iter().map(|v| v.max(0.0)).collect(), vectors)
    } else {
        let svd = l.clone().svd(true, false);
        let values = svd.singular_values.iter().map(|s| s * s).collect();
        (values, svd.u.expect("left singular vectors requested"))
    }
}

struct Conditional {
    sqrt: CMatrix,
    support: CMatrix,
}

fn select(values: &[f64], vectors: &CMatrix, floor: f64, scale: bool) -> CMatrix {
    let cols: Vec<CVector> = values
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > floor)
        .map(|(k, &v)| {
            let col = vectors.column(k).into_owned();
            if scale {
                col * cr(v.sqrt())
            } else {
                col
            }
        })
        .collect();
    if cols.is_empty() {
        CMatrix::zeros(vectors.nrows(), 0)
    } else {
        CMatrix::from_columns(&cols)
    }
}

fn conditional(ens: &BranchEnsemble, i: usize, p: f64, bp: &Bipartition, tol: &Tolerances) -> Conditional {
    let l = ens.factor(i, bp) * cr(1.0 / p.sqrt());
    let (values, vectors) = gram_spectrum(&l);
    let top = values.iter().copied().fold(0.0, f64::max);
    Conditional {
        sqrt: select(&values, &vectors, SQRT_FLOOR * top.max(1.0), true),
        support: select(&values, &vectors, tol.rank, false),
    }
}

fn sum_sv(m: &CMatrix) -> f64 {
    if m.is_empty() {
        0.0
    } else {
        m.singular_values().iter().sum()
    }
}

fn fidelity_of(a: &Conditional, b: &Conditional) -> f64 {
    sum_sv(&(a.sqrt.adjoint() * &b.sqrt))
}

fn overlap_of(a: &CMatrix, b: &CMatrix) -> f64 {
    sum_sv(&(a.adjoint() * b))
}

/// Checks for records of every history in `fragment` at `eval_time`.
pub fn detect_records(hs: &HistorySet, fragment: &Fragment, eval_time: usize, delta: f64) -> Result<RecordCertificate> {
    if fragment.space() != hs.space() {
        return Err(Error::ShapeMismatch("fragment belongs to a different space".into()));
    }
    let ens = hs.ensemble(eval_time)?;
    detect_records_in(&ens, fragment, delta, hs.tolerances())
}

/// Record detection on an explicit branch ensemble.
pub fn detect_records_in(ens: &BranchEnsemble, fragment: &Fragment, delta: f64, tol: &Tolerances) -> Result<RecordCertificate> {
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::InvalidState(format!("record tolerance {delta} is outside [0, 1)")));
    }
    let bp = Bipartition::new(fragment);
    let probs = ens.probabilities();
    let labels = ens.labels();
    let live: Vec<usize> = (0..ens.len()).filter(|&i| probs[i] >= tol.zero_probability).collect();
    let conds: Vec<Conditional> = live
        .par_iter()
        .map(|&i| conditional(ens, i, probs[i], &bp, tol))
        .collect();

    let pairs: Vec<(usize, usize)> = (0..live.len())
        .flat_map(|a| (a + 1..live.len()).map(move |b| (a, b)))
        .collect();
    let measured: Vec<(f64, f64)> = pairs
        .par_iter()
        .map(|&(a, b)| (fidelity_of(&conds[a], &conds[b]), overlap_of(&conds[a].support, &conds[b].support)))
        .collect();
    let mut worst_fidelity = 0.0f64;
    let mut worst_pair = None;
    let mut support_overlap = 0.0f64;
    for (&(a, b), &(f, o)) in pairs.iter().zip(&measured) {
        if f > worst_fidelity || worst_pair.is_none() {
            worst_fidelity = f;
            worst_pair = Some((labels[live[a]].clone(), labels[live[b]].clone()));
        }
        support_overlap = support_overlap.max(o);
    }

    let projectors: Vec<CMatrix> = conds.iter().map(|c| &c.support * c.support.adjoint()).collect();
    let defects: Vec<f64> = live
        .par_iter()
        .zip(&projectors)
        .map(|(&i, r)| {
            let cols: Vec<CVector> = ens
                .weights()
                .iter()
                .zip(ens.states())
                .zip(ens.branches(i))
                .map(|((&w, s), b)| (bp.apply_keep(r, s) - b) * cr(w))
                .collect();
            if cols.is_empty() {
                0.0
            } else {
                sum_sv(&CMatrix::from_columns(&cols))
            }
        })
        .collect();
    let projector_defect = defects.iter().copied().fold(0.0, f64::max);

    let threshold = delta.max(tol.ortho);
    let fidelity_bound = worst_fidelity <= threshold;
    Ok(RecordCertificate {
        fragment: fragment.to_string(),
        eval_time: ens.eval_time(),
        delta,
        threshold,
        histories: live.iter().map(|&i| labels[i].clone()).collect(),
        ranks: conds.iter().map(|c| c.support.ncols()).collect(),
        worst_fidelity,
        worst_pair,
        support_overlap,
        projector_defect,
        orthogonal_supports: support_overlap <= threshold,
        fidelity_bound,
        projector_condition: projector_defect <= threshold,
        has_record: fidelity_bound,
        zero_probability: (0..ens.len())
            .filter(|&i| probs[i] < tol.zero_probability)
            .map(|i| labels[i].clone())
            .collect(),
        record_projectors: projectors,
    })
}

/// Record structure after coarse-graining over all events past `level`.
#[derive(Clone, Debug, Serialize)]
pub struct LevelReport {
    pub level: usize,
    pub prefixes: Vec<String>,
    pub ranks: Vec<usize>,
    /// `max ‖Π_p Π_q‖₁` between level subspaces built from the finest supports.
    pub subspace_overlap: f64,
    /// `max ‖Q_p† Q_q‖₁` between supports of the coarse conditional states.
    pub coarse_overlap: f64,
    /// `max ‖(I − Π_p) Q_p‖₁`: coarse support inside the sum of finer supports.
    pub containment_defect: f64,
    /// `max ‖Π_p − Q_p Q_p†‖₁`, zero when the finer supports sum exactly to
    /// the coarse one.
    pub equality_defect: f64,
    /// Smallest part of the fragment that already distinguishes the prefixes.
    pub distinguishing: Option<String>,
    pub passes: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct RecordsInTimeReport {
    pub fragment: String,
    pub eval_time: usize,
    pub levels: Vec<LevelReport>,
    pub all_pass: bool,
}

const SUBFRAGMENT_SEARCH_CAP: usize = 12;

/// Nested record subspaces for each number of leading events.
pub fn records_in_time(hs: &HistorySet, fragment: &Fragment, eval_time: usize) -> Result<RecordsInTimeReport> {
    if fragment.space() != hs.space() {
        return Err(Error::ShapeMismatch("fragment belongs to a different space".into()));
    }
    if !hs.is_pure() {
        return Err(Error::RequiresPureState);
    }
    let tol = *hs.tolerances();
    let max_norm = if fragment.is_full() {
        let d = hs.ensemble(eval_time)?.decoherence_matrix();
        d.check_consistency(tol.ortho, &tol).max_offdiag_cf
    } else {
        check_pt_consistency(hs, fragment, eval_time, tol.ortho)?.max_trace_norm
    };
    if max_norm > tol.ortho {
        return Err(Error::NotConsistent {
            fragment: fragment.to_string(),
            max_norm,
        });
    }

    let ens = hs.ensemble(eval_time)?;
    let bp = Bipartition::new(fragment);
    let probs = ens.probabilities();
    let histories = hs.histories();
    let finest: Vec<Option<CMatrix>> = (0..ens.len())
        .into_par_iter()
        .map(|i| {
            (probs[i] >= tol.zero_probability).then(|| {
                let c = conditional(&ens, i, probs[i], &bp, &tol);
                &c.support * c.support.adjoint()
            })
        })
        .collect();

    let mut levels = Vec::new();
    for level in 1..=hs.events().len() {
        let mut prefixes: Vec<Vec<usize>> = Vec::new();
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for (i, h) in histories.iter().enumerate() {
            let p = h[..level].to_vec();
            match prefixes.iter().position(|q| *q == p) {
                Some(k) => groups[k].push(i),
                None => {
                    prefixes.push(p);
                    groups.push(vec![i]);
                }
            }
        }
        let labels: Vec<String> = prefixes.iter().map(|p| hs.history_label(p)).collect();
        let coarse = ens.coarse(&groups, labels.clone());
        let cprobs = coarse.probabilities();
        let live: Vec<usize> = (0..coarse.len()).filter(|&k| cprobs[k] >= tol.zero_probability).collect();

        let d = bp.dim_keep();
        let spans: Vec<CMatrix> = live
            .iter()
            .map(|&k| {
                groups[k]
                    .iter()
                    .filter_map(|&i| finest[i].as_ref())
                    .fold(CMatrix::zeros(d, d), |acc, p| acc + p)
            })
            .collect();
        let supports: Vec<CMatrix> = live
            .iter()
            .map(|&k| conditional(&coarse, k, cprobs[k], &bp, &tol).support)
            .collect();

        let mut subspace_overlap = 0.0f64;
        let mut coarse_overlap = 0.0f64;
        for a in 0..live.len() {
            for b in a + 1..live.len() {
                subspace_overlap = subspace_overlap.max(sum_sv(&(&spans[a] * &spans[b])));
                coarse_overlap = coarse_overlap.max(overlap_of(&supports[a], &supports[b]));
            }
        }
        let mut containment_defect = 0.0f64;
        let mut equality_defect = 0.0f64;
        for (span, q) in spans.iter().zip(&supports) {
            containment_defect = containment_defect.max(sum_sv(&(q - span * q)));
            equality_defect = equality_defect.max(sum_sv(&(span - q * q.adjoint())));
        }
        let distinguishing = if fragment.len() <= SUBFRAGMENT_SEARCH_CAP {
            smallest_distinguishing(&coarse, fragment, &tol)?
        } else {
            None
        };
        levels.push(LevelReport {
            level,
            prefixes: live.iter().map(|&k| labels[k].clone()).collect(),
            ranks: supports.iter().map(|q| q.ncols()).collect(),
            subspace_overlap,
            coarse_overlap,
            containment_defect,
            equality_defect,
            distinguishing,
            passes: subspace_overlap <= tol.ortho
                && coarse_overlap <= tol.ortho
                && containment_defect <= tol.ortho,
        });
    }
    let all_pass = levels.iter().all(|l| l.passes);
    Ok(RecordsInTimeReport {
        fragment: fragment.to_string(),
        eval_time,
        levels,
        all_pass,
    })
}

/// Subsets of `fragment` in order of size, then lexicographically by factor
/// position; the first one holding a record of every coarse branch.
fn smallest_distinguishing(coarse: &BranchEnsemble, fragment: &Fragment, tol: &Tolerances) -> Result<Option<String>> {
    let members = fragment.indices();
    let n = members.len();
    for size in 1..=n {
        let mut subsets: Vec<Vec<usize>> = Vec::new();
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize == size {
                subsets.push((0..n).filter(|b| mask & (1 << b) != 0).map(|b| members[b]).collect());
            }
        }
        subsets.sort();
        for s in subsets {
            let sub = Fragment::from_indices(fragment.space(), &s)?;
            if detect_records_in(coarse, &sub, 0.0, tol)?.has_record {
                return Ok(Some(sub.to_string()));
            }
        }
    }
    Ok(None)
}
