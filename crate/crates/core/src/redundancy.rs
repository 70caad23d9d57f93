//! Counting disjoint environment fragments that each hold a record.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{cr, CMatrix, CVector, Fragment, TensorSpace};
use crate::histories::{BranchEnsemble, HistorySet};
use crate::models::random::haar_unitary;
use crate::ptrace::{detect_records_in, RecordCertificate};
use crate::tolerance::Tolerances;

/// Largest pool for which exact packing is attempted.
pub const EXHAUSTIVE_CAP: usize = 12;

pub const DEFAULT_THRESHOLD: usize = 3;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    Exhaustive,
    Greedy,
    /// Exhaustive up to [`EXHAUSTIVE_CAP`] subsystems, greedy beyond.
    #[default]
    Auto,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RedundancyOptions {
    pub delta: f64,
    pub mode: SearchMode,
    pub max_fragment_size: usize,
    pub include_system: bool,
    pub excluded_labels: Vec<String>,
}

impl Default for RedundancyOptions {
    fn default() -> Self {
        Self {
            delta: 1e-9,
            mode: SearchMode::Auto,
            max_fragment_size: 3,
            include_system: false,
            excluded_labels: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RedundancyReport {
    pub delta: f64,
    pub eval_time: usize,
    /// The mode actually used; never `auto`.
    pub search_mode: SearchMode,
    pub max_fragment_size: usize,
    pub pool: Vec<String>,
    pub fragments: Vec<Vec<String>>,
    pub count: usize,
    pub candidates_checked: usize,
    pub certificates: Vec<RecordCertificate>,
}

fn pool_of(hs: &HistorySet, opts: &RedundancyOptions) -> Result<Vec<usize>> {
    let space = hs.space();
    for l in &opts.excluded_labels {
        space.index_of(l)?;
    }
    let mut pool: Vec<usize> = hs.environment().indices().to_vec();
    if opts.include_system {
        pool.extend_from_slice(hs.system().indices());
        pool.sort_unstable();
    }
    pool.retain(|&i| !opts.excluded_labels.iter().any(|l| *l == space.labels()[i]));
    Ok(pool)
}

/// Counts disjoint record-holding fragments for the histories of `hs`.
pub fn redundancy_count(hs: &HistorySet, eval_time: usize, opts: &RedundancyOptions) -> Result<RedundancyReport> {
    let pool = pool_of(hs, opts)?;
    let ens = hs.ensemble(eval_time)?;
    redundancy_count_in(&ens, &pool, opts, hs.tolerances())
}

pub fn is_redundantly_consistent(
    hs: &HistorySet,
    eval_time: usize,
    opts: &RedundancyOptions,
    threshold: usize,
) -> Result<(bool, RedundancyReport)> {
    let report = redundancy_count(hs, eval_time, opts)?;
    Ok((report.count >= threshold, report))
}

fn mask_of(members: &[usize]) -> u64 {
    members.iter().fold(0, |m, &b| m | (1 << b))
}

/// Subsets of `0..n` with exactly `size` members, in lexicographic order.
fn subsets(n: usize, size: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, size: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < size - cur.len() {
                break;
            }
            cur.push(i);
            go(i + 1, n, size, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, size, &mut Vec::new(), &mut out);
    out
}

/// Redundancy count over an explicit ensemble, with `pool` the factor
/// indices fragments may draw from.
pub fn redundancy_count_in(
    ens: &BranchEnsemble,
    pool: &[usize],
    opts: &RedundancyOptions,
    tol: &Tolerances,
) -> Result<RedundancyReport> {
    let space = ens.space();
    let n = pool.len();
    let mode = match opts.mode {
        SearchMode::Auto if n <= EXHAUSTIVE_CAP => SearchMode::Exhaustive,
        SearchMode::Auto => SearchMode::Greedy,
        SearchMode::Exhaustive if n > EXHAUSTIVE_CAP => {
            return Err(Error::SearchTooLarge {
                subsystems: n,
                cap: EXHAUSTIVE_CAP,
            })
        }
        m => m,
    };
    let max_size = opts.max_fragment_size.min(n);
    let certify = |local: &[usize]| -> Result<RecordCertificate> {
        let idx: Vec<usize> = local.iter().map(|&k| pool[k]).collect();
        let f = Fragment::from_indices(space, &idx)?;
        detect_records_in(ens, &f, opts.delta, tol)
    };

    let mut checked = 0;
    let (chosen, certificates) = match mode {
        SearchMode::Greedy => {
            let mut used = 0u64;
            let mut chosen = Vec::new();
            let mut certs = Vec::new();
            for size in 1..=max_size {
                for s in subsets(n, size) {
                    if mask_of(&s) & used != 0 {
                        continue;
                    }
                    checked += 1;
                    let cert = certify(&s)?;
                    if cert.has_record {
                        used |= mask_of(&s);
                        chosen.push(s);
                        certs.push(cert);
                    }
                }
            }
            (chosen, certs)
        }
        _ => {
            let mut minimal: Vec<(Vec<usize>, RecordCertificate)> = Vec::new();
            for size in 1..=max_size {
                let fresh: Vec<Vec<usize>> = subsets(n, size)
                    .into_iter()
                    .filter(|s| {
                        let m = mask_of(s);
                        minimal.iter().all(|(c, _)| mask_of(c) & m != mask_of(c))
                    })
                    .collect();
                checked += fresh.len();
                let certs: Vec<RecordCertificate> = fresh
                    .par_iter()
                    .map(|s| certify(s))
                    .collect::<Result<_>>()?;
                minimal.extend(fresh.into_iter().zip(certs).filter(|(_, c)| c.has_record));
            }
            let masks: Vec<u64> = minimal.iter().map(|(s, _)| mask_of(s)).collect();
            let best = max_packing(&masks, n);
            let mut picked: Vec<(Vec<usize>, RecordCertificate)> =
                best.into_iter().map(|k| minimal[k].clone()).collect();
            picked.sort_by(|a, b| a.0.cmp(&b.0));
            picked.into_iter().unzip()
        }
    };

    let labels = space.labels();
    let fragments: Vec<Vec<String>> = chosen
        .iter()
        .map(|s| s.iter().map(|&k| labels[pool[k]].clone()).collect())
        .collect();
    Ok(RedundancyReport {
        delta: opts.delta,
        eval_time: ens.eval_time(),
        search_mode: mode,
        max_fragment_size: opts.max_fragment_size,
        pool: pool.iter().map(|&i| labels[i].clone()).collect(),
        count: fragments.len(),
        fragments,
        candidates_checked: checked,
        certificates,
    })
}

/// Largest set of pairwise disjoint masks, as indices into `masks`.
fn max_packing(masks: &[u64], n: usize) -> Vec<usize> {
    struct Search<'a> {
        masks: &'a [u64],
        min_size: u32,
        best: Vec<usize>,
    }
    impl Search<'_> {
        fn go(&mut self, blocked: u64, n: usize, cur: &mut Vec<usize>) {
            let free = (0..n).filter(|&b| blocked & (1 << b) == 0).count() as u32;
            if cur.len() + (free / self.min_size) as usize <= self.best.len() {
                return;
            }
            let Some(e) = (0..n).find(|&b| blocked & (1 << b) == 0) else {
                return;
            };
            for (k, &m) in self.masks.iter().enumerate() {
                if m & (1 << e) != 0 && m & blocked == 0 {
                    cur.push(k);
                    if cur.len() > self.best.len() {
                        self.best = cur.clone();
                    }
                    self.go(blocked | m, n, cur);
                    cur.pop();
                }
            }
            self.go(blocked | (1 << e), n, cur);
        }
    }
    if masks.is_empty() {
        return Vec::new();
    }
    let mut s = Search {
        masks,
        min_size: masks.iter().map(|m| m.count_ones()).min().unwrap_or(1).max(1),
        best: Vec::new(),
    };
    s.go(0, n, &mut Vec::new());
    s.best
}

#[derive(Clone, Debug, Serialize)]
pub struct ProbeTrial {
    pub kind: String,
    pub count: usize,
    pub redundant: bool,
    /// Every nonzero branch is a sum of canonical branches.
    pub matches_canonical: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ProbeReport {
    pub eval_time: usize,
    pub threshold: usize,
    pub canonical_count: usize,
    pub canonical_redundant: bool,
    pub trials: Vec<ProbeTrial>,
    /// Redundant decompositions that are not coarse-grainings of the
    /// canonical branches.
    pub redundant_alternatives: usize,
}

/// Canonical branch vectors with nonzero norm.
fn canonical_branches(hs: &HistorySet, eval_time: usize) -> Result<(Vec<CVector>, CVector)> {
    if !hs.is_pure() {
        return Err(Error::RequiresPureState);
    }
    let ens = hs.ensemble(eval_time)?;
    let zero = hs.tolerances().zero_probability;
    let psi = ens.states()[0].clone();
    let branches = (0..ens.len())
        .filter(|&i| ens.probability(i) >= zero)
        .map(|i| ens.branches(i)[0].clone())
        .collect();
    Ok((branches, psi))
}

/// Decomposes `ψ` along the orthonormal frame `Σ_i U_ij f_i`, with `f_i` the
/// normalized canonical branches.
fn rotated_ensemble(space: &TensorSpace, eval_time: usize, canon: &[CVector], psi: &CVector, u: &CMatrix) -> BranchEnsemble {
    let frame: Vec<CVector> = canon.iter().map(|b| b.normalize()).collect();
    let branches: Vec<Vec<CVector>> = (0..u.ncols())
        .map(|j| {
            let g = frame
                .iter()
                .enumerate()
                .fold(CVector::zeros(psi.len()), |acc, (i, f)| acc + f * u[(i, j)]);
            let amp = g.dotc(psi);
            vec![g * amp]
        })
        .collect();
    let labels = (0..u.ncols()).map(|j| format!("g{j}")).collect();
    BranchEnsemble::from_parts(space, eval_time, Vec::new(), labels, vec![1.0], vec![psi.clone()], branches, true)
}

fn matches_canonical(ens: &BranchEnsemble, canon: &[CVector], tol: &Tolerances) -> bool {
    (0..ens.len()).all(|j| {
        let b = &ens.branches(j)[0];
        if b.norm_squared() < tol.zero_probability {
            return true;
        }
        let recon = canon.iter().fold(CVector::zeros(b.len()), |acc, c| {
            let coeff = c.dotc(b) / cr(c.norm_squared());
            if coeff.re > 0.5 {
                acc + c
            } else {
                acc
            }
        });
        (b - recon).norm() <= tol.recon
    })
}

/// Rotation by `theta` within consecutive pairs of canonical branches.
pub fn pair_rotation(k: usize, theta: f64) -> CMatrix {
    let mut u = CMatrix::identity(k, k);
    let (c, s) = (theta.cos(), theta.sin());
    for a in (0..k.saturating_sub(1)).step_by(2) {
        u[(a, a)] = cr(c);
        u[(a + 1, a)] = cr(s);
        u[(a, a + 1)] = cr(-s);
        u[(a + 1, a + 1)] = cr(c);
    }
    u
}

/// Redundancy of the decomposition obtained from rotation `u` of the
/// canonical frame.
pub fn probe_rotation(hs: &HistorySet, eval_time: usize, u: &CMatrix, opts: &RedundancyOptions, threshold: usize) -> Result<ProbeTrial> {
    let (canon, psi) = canonical_branches(hs, eval_time)?;
    if u.nrows() != canon.len() || u.ncols() != canon.len() {
        return Err(Error::ShapeMismatch(format!(
            "rotation is {}x{}, there are {} canonical branches",
            u.nrows(),
            u.ncols(),
            canon.len()
        )));
    }
    trial(hs, eval_time, &canon, &psi, u, "custom".into(), opts, threshold)
}

#[allow(clippy::too_many_arguments)]
fn trial(
    hs: &HistorySet,
    eval_time: usize,
    canon: &[CVector],
    psi: &CVector,
    u: &CMatrix,
    kind: String,
    opts: &RedundancyOptions,
    threshold: usize,
) -> Result<ProbeTrial> {
    let ens = rotated_ensemble(hs.space(), eval_time, canon, psi, u);
    let pool = pool_of(hs, opts)?;
    let report = redundancy_count_in(&ens, &pool, opts, hs.tolerances())?;
    Ok(ProbeTrial {
        kind,
        count: report.count,
        redundant: report.count >= threshold,
        matches_canonical: matches_canonical(&ens, canon, hs.tolerances()),
    })
}

/// Looks for alternative orthogonal decompositions of the global state that
/// are redundantly recorded: the identity, a pairwise rotation by π/5 and
/// `trials` Haar-random frames within the branch span.
pub fn branch_uniqueness_probe<R: Rng>(
    hs: &HistorySet,
    eval_time: usize,
    trials: usize,
    rng: &mut R,
    opts: &RedundancyOptions,
    threshold: usize,
) -> Result<ProbeReport> {
    let (canon, psi) = canonical_branches(hs, eval_time)?;
    let k = canon.len();
    let base = redundancy_count(hs, eval_time, opts)?;
    let mut frames = vec![
        ("identity".to_string(), CMatrix::identity(k, k)),
        ("pair_rotation".to_string(), pair_rotation(k, std::f64::consts::PI / 5.0)),
    ];
    for t in 0..trials {
        frames.push((format!("haar_{t}"), haar_unitary(k, rng)));
    }
    let results = frames
        .into_iter()
        .map(|(kind, u)| trial(hs, eval_time, &canon, &psi, &u, kind, opts, threshold))
        .collect::<Result<Vec<_>>>()?;
    Ok(ProbeReport {
        eval_time,
        threshold,
        canonical_count: base.count,
        canonical_redundant: base.count >= threshold,
        redundant_alternatives: results.iter().filter(|t| t.redundant && !t.matches_canonical).count(),
        trials: results,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::random::seeded;
    use crate::models::{
        build_appendix_alternate_set, build_cnot_model, build_mixed_record_counterexample,
        AppendixKind, CnotModelConfig, MixedRecordVariant,
    };

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn opts(max: usize) -> RedundancyOptions {
        RedundancyOptions {
            delta: 0.0,
            max_fragment_size: max,
            ..RedundancyOptions::default()
        }
    }

    #[test]
    fn subsets_are_lexicographic() {
        assert_eq!(subsets(4, 2), vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]);
        assert_eq!(subsets(3, 0), vec![Vec::<usize>::new()]);
    }

    #[test]
    fn packing_finds_maximum() {
        // {0,1} blocks both {0,2} and {1,3}; the optimum avoids it.
        let masks = [0b0011, 0b0101, 0b1010];
        let best = max_packing(&masks, 4);
        assert_eq!(best.len(), 2);
        assert!(best.contains(&1) && best.contains(&2));
    }

    #[test]
    fn three_spin_cnot_is_redundant() {
        let model = build_cnot_model(&CnotModelConfig::pure(3, 3), &tol()).unwrap();
        let hs = &model.histories;
        let (ok, report) = is_redundantly_consistent(hs, hs.final_time(), &opts(3), DEFAULT_THRESHOLD).unwrap();
        assert!(ok);
        assert_eq!(report.count, 3);
        assert_eq!(report.search_mode, SearchMode::Exhaustive);
        for f in &report.fragments {
            assert_eq!(f.len(), 3);
            for m in 1..=3 {
                assert_eq!(f.iter().filter(|l| l.starts_with(&format!("E{m}_"))).count(), 1);
            }
        }
        let greedy = redundancy_count(hs, hs.final_time(), &RedundancyOptions { mode: SearchMode::Greedy, ..opts(3) }).unwrap();
        assert_eq!(greedy.count, 3);
        assert_eq!(redundancy_count(hs, hs.final_time(), &opts(2)).unwrap().count, 0);
    }

    #[test]
    fn single_copy_records_count_once() {
        let model = build_cnot_model(&CnotModelConfig::pure(2, 1), &tol()).unwrap();
        let hs = &model.histories;
        let report = redundancy_count(hs, hs.final_time(), &opts(3)).unwrap();
        assert_eq!(report.count, 1);
        assert_eq!(report.fragments, vec![vec!["E1_1".to_string(), "E2_1".to_string()]]);
    }

    #[test]
    fn theta_family_has_one_record() {
        let set = build_appendix_alternate_set(AppendixKind::ThetaPhi { theta: 0.4, phi: 0.4 }, 2, &tol()).unwrap();
        let hs = &set.histories;
        let env = hs.environment().len();
        let (ok, report) = is_redundantly_consistent(hs, hs.final_time(), &opts(env), DEFAULT_THRESHOLD).unwrap();
        assert!(!ok);
        assert_eq!(report.count, 1);
        // Coherence across the whole of E1 is needed, plus one spin of E2.
        let f = &report.fragments[0];
        assert!(set.base.subenvs[0].iter().all(|l| f.contains(l)));
        assert!(set.base.subenvs[1].iter().any(|l| f.contains(l)));
    }

    #[test]
    fn maximally_mixed_environment_holds_no_record() {
        let hs = build_mixed_record_counterexample(MixedRecordVariant::Mixed, &tol()).unwrap();
        for delta in [0.0, 0.5, 0.99] {
            let o = RedundancyOptions { delta, ..opts(1) };
            let (ok, report) = is_redundantly_consistent(&hs, 1, &o, DEFAULT_THRESHOLD).unwrap();
            assert!(!ok);
            assert_eq!(report.count, 0);
        }
    }

    #[test]
    fn system_joins_pool_on_request() {
        let hs = build_mixed_record_counterexample(MixedRecordVariant::Ghz, &tol()).unwrap();
        let plain = redundancy_count(&hs, 1, &opts(1)).unwrap();
        assert_eq!(plain.count, 2);
        let with_s = redundancy_count(&hs, 1, &RedundancyOptions { include_system: true, ..opts(1) }).unwrap();
        assert_eq!(with_s.count, 3);
        let excluded = RedundancyOptions {
            excluded_labels: vec!["X".into()],
            ..opts(1)
        };
        assert_eq!(redundancy_count(&hs, 1, &excluded).unwrap().count, 1);
        let unknown = RedundancyOptions {
            excluded_labels: vec!["Q".into()],
            ..opts(1)
        };
        assert!(redundancy_count(&hs, 1, &unknown).is_err());
    }

    #[test]
    fn exhaustive_search_is_capped() {
        let model = build_cnot_model(&CnotModelConfig::pure(1, 13), &tol()).unwrap();
        let hs = &model.histories;
        let o = RedundancyOptions { mode: SearchMode::Exhaustive, ..opts(1) };
        assert!(matches!(
            redundancy_count(hs, 2, &o),
            Err(Error::SearchTooLarge { subsystems: 13, cap: EXHAUSTIVE_CAP })
        ));
        let auto = redundancy_count(hs, 2, &opts(1)).unwrap();
        assert_eq!(auto.search_mode, SearchMode::Greedy);
        assert_eq!(auto.count, 13);
    }

    #[test]
    fn probe_separates_canonical_from_rotated() {
        let model = build_cnot_model(&CnotModelConfig::pure(3, 3), &tol()).unwrap();
        let hs = &model.histories;
        let mut rng = seeded(3);
        let report = branch_uniqueness_probe(hs, hs.final_time(), 3, &mut rng, &opts(3), DEFAULT_THRESHOLD).unwrap();
        assert!(report.canonical_redundant);
        let identity = &report.trials[0];
        assert!(identity.redundant && identity.matches_canonical);
        let rotated = &report.trials[1];
        assert!(!rotated.redundant && !rotated.matches_canonical);
        assert_eq!(report.redundant_alternatives, 0);
    }
}
