use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{cr, CVector};
use crate::histories::{Event, HistorySet, ProjectorFamily};
use crate::tolerance::Tolerances;

use super::cnot::{build_cnot_model, CnotModel, CnotModelConfig};

/// Alternative consistent sets on the two-branching CNOT model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AppendixKind {
    /// Delocalized branches `A, B` at the first step and `W, X, Y, Z` at the
    /// second.
    Abwxyz,
    /// Branches rotated within each pointer sector of `E` by `θ` and `φ`.
    ThetaPhi { theta: f64, phi: f64 },
}

#[derive(Clone, Debug)]
pub struct AppendixSet {
    pub histories: HistorySet,
    pub base: CnotModel,
    /// Named unnormalized vectors the families are built from.
    pub vectors: BTreeMap<String, CVector>,
}

/// `|s⟩_S |α = ab⟩_E` on the base model: all `E_1` spins `a`, all `E_2`
/// spins `b`.
pub fn sector_ket(base: &CnotModel, s: usize, a: usize, b: usize) -> Result<CVector> {
    let space = base.histories.space();
    let mut digits = vec![0usize; space.len()];
    digits[0] = s;
    for (m, bit) in [(0, a), (1, b)] {
        for k in &base.subenvs[m] {
            digits[space.index_of(k)?] = bit;
        }
    }
    let mut v = CVector::zeros(space.total_dim());
    v[space.index_from_digits(&digits)?] = cr(1.0);
    Ok(v)
}

/// The `A … Z` vectors, with `Z` carrying coefficient 2 on `|0⟩|10⟩` so that
/// `{W,X,Y,Z}` is orthogonal and sums to the final state.
pub fn abwxyz_vectors(base: &CnotModel) -> Result<BTreeMap<String, CVector>> {
    let k = |s, a, b| sector_ket(base, s, a, b);
    let (k000, k010, k011) = (k(0, 0, 0)?, k(0, 1, 0)?, k(0, 1, 1)?);
    let (k101, k110, k111) = (k(1, 0, 1)?, k(1, 1, 0)?, k(1, 1, 1)?);
    let r = 1.0 / (3.0 * 2f64.sqrt());
    let mut v = BTreeMap::new();
    v.insert("A".into(), (&k000 * cr(2.0) + &k110 + &k011 * cr(2.0)) * cr(r));
    v.insert("B".into(), (&k000 + &k110 * cr(2.0) - &k011 * cr(2.0)) * cr(r));
    let s = 1.0 / 6.0;
    v.insert("W".into(), (&k000 * cr(2.0) + &k101 * cr(2.0) + &k110 * cr(2.0)) * cr(s));
    v.insert("X".into(), (&k000 + &k101 - &k110 * cr(2.0)) * cr(s));
    v.insert("Y".into(), (&k010 - &k111 + &k011 * cr(2.0)) * cr(s));
    v.insert("Z".into(), (&k010 * cr(2.0) - &k111 * cr(2.0) - &k011 * cr(2.0)) * cr(s));
    Ok(v)
}

/// `½|0⟩|θ⟩, ½|0⟩|θ̄⟩, ½|1⟩|φ⟩, ½|1⟩|φ̄⟩`, which sum to the final state.
pub fn theta_phi_vectors(base: &CnotModel, theta: f64, phi: f64) -> Result<BTreeMap<String, CVector>> {
    let k = |s, a, b| sector_ket(base, s, a, b);
    let (ct, st) = (theta.cos(), theta.sin());
    let (cp, sp) = (phi.cos(), phi.sin());
    let theta_v = (&k(0, 0, 0)? * cr(ct) + &k(0, 1, 0)? * cr(st)) * cr(ct + st);
    let theta_bar = (&k(0, 0, 0)? * cr(st) - &k(0, 1, 0)? * cr(ct)) * cr(st - ct);
    // |01⟩ − |11⟩ split the same way: the minus sign moves onto |11⟩.
    let phi_v = (&k(1, 0, 1)? * cr(cp) + &k(1, 1, 1)? * cr(sp)) * cr(cp - sp);
    let phi_bar = (&k(1, 0, 1)? * cr(sp) - &k(1, 1, 1)? * cr(cp)) * cr(sp + cp);
    let mut v = BTreeMap::new();
    v.insert("0t".into(), theta_v * cr(0.5));
    v.insert("0tb".into(), theta_bar * cr(0.5));
    v.insert("1p".into(), phi_v * cr(0.5));
    v.insert("1pb".into(), phi_bar * cr(0.5));
    Ok(v)
}

/// Builds the alternative set on the pure two-branching model with
/// `spins` spins per sub-environment. Events sit at `t = 2` and `t = 4`.
pub fn build_appendix_alternate_set(kind: AppendixKind, spins: usize, tol: &Tolerances) -> Result<AppendixSet> {
    let base = build_cnot_model(&CnotModelConfig::pure(2, spins), tol)?;
    let space = base.histories.space().clone();
    let all: Vec<String> = space.labels().to_vec();
    let (vectors, first, second) = match kind {
        AppendixKind::Abwxyz => {
            let v = abwxyz_vectors(&base)?;
            let first = ProjectorFamily::from_subspaces(
                &space,
                &all,
                vec![vec![v["A"].clone()], vec![v["B"].clone()]],
                vec!["A".into(), "B".into()],
                Some("notAB"),
                tol,
            )?;
            let names = ["W", "X", "Y", "Z"];
            let second = ProjectorFamily::from_subspaces(
                &space,
                &all,
                names.iter().map(|n| vec![v[*n].clone()]).collect(),
                names.iter().map(|n| n.to_string()).collect(),
                Some("notWXYZ"),
                tol,
            )?;
            (v, first, second)
        }
        AppendixKind::ThetaPhi { theta, phi } => {
            let v = theta_phi_vectors(&base, theta, phi)?;
            for (name, vec) in &v {
                if vec.norm() < 1e-12 {
                    return Err(Error::InvalidModel(format!(
                        "branch `{name}` vanishes for theta = {theta}, phi = {phi}"
                    )));
                }
            }
            let names = ["0t", "0tb", "1p", "1pb"];
            let second = ProjectorFamily::from_subspaces(
                &space,
                &all,
                names.iter().map(|n| vec![v[*n].clone()]).collect(),
                names.iter().map(|n| n.to_string()).collect(),
                Some("rest"),
                tol,
            )?;
            // Group projectors at t = 4 pulled back to t = 2.
            let u = base.histories.schedule().propagator(2, 4);
            let back = |n: &str| u.adjoint() * &v[n];
            let first = ProjectorFamily::from_subspaces(
                &space,
                &all,
                vec![vec![back("0t"), back("0tb")], vec![back("1p"), back("1pb")]],
                vec!["g0".into(), "g1".into()],
                Some("rest"),
                tol,
            )?;
            (v, first, second)
        }
    };
    let events = vec![
        Event { time: 2, family: first },
        Event { time: 4, family: second },
    ];
    let histories = base.histories.with_events(events)?;
    Ok(AppendixSet {
        histories,
        base,
        vectors,
    })
}
