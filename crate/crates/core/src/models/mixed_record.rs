use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::hilbert::{cr, CMatrix, CVector, LocalOp, Payload, QState, TensorSpace};
use crate::histories::{Event, HistorySet, ProjectorFamily, Schedule};
use crate::tolerance::Tolerances;

use super::gates::{cnot, ket};

/// Variants of a single system qubit decohered by one CNOT.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MixedRecordVariant {
    /// `S ⊗ E` with `ρ_E = I/2`: decoherence without a record in `E`.
    #[default]
    Mixed,
    /// The same with `E` purified by `X` through `(|00⟩ + |11⟩)/√2`.
    Purified,
    /// `S`, `E`, `X` from `|+⟩|0⟩|0⟩` with CNOTs into both: a GHZ state with
    /// records in `E` and in `X`.
    Ghz,
    /// [`MixedRecordVariant::Ghz`] followed by an `E`–`X` unitary that hides
    /// the record in the `E`–`X` correlation.
    GhzScrambled,
}

/// Maps `|00⟩ → (|00⟩+|11⟩)/√2` and `|11⟩ → (|10⟩+|01⟩)/√2`, completed to a
/// unitary on the other two basis states.
pub fn scrambler() -> CMatrix {
    let h = 0.5f64.sqrt();
    let cols = [
        [h, 0.0, 0.0, h],  // |00⟩
        [h, 0.0, 0.0, -h], // |01⟩
        [0.0, -h, h, 0.0], // |10⟩
        [0.0, h, h, 0.0],  // |11⟩
    ];
    CMatrix::from_fn(4, 4, |r, c| cr(cols[c][r]))
}

/// A single pointer measurement on `S` after the interaction.
pub fn build_mixed_record_counterexample(variant: MixedRecordVariant, tol: &Tolerances) -> Result<HistorySet> {
    let h = 0.5f64.sqrt();
    let plus = CVector::from_vec(vec![cr(h), cr(h)]);
    let (space, initial, segments) = match variant {
        MixedRecordVariant::Mixed => {
            let space = TensorSpace::qubits(&["S", "E"])?;
            let parts = [
                Payload::Vector(plus),
                Payload::Matrix(CMatrix::identity(2, 2) * cr(0.5)),
            ];
            let initial = QState::product(&space, &parts, tol)?;
            let seg = vec![vec![LocalOp::new(&space, &["S", "E"], cnot())?]];
            (space, initial, seg)
        }
        MixedRecordVariant::Purified => {
            let space = TensorSpace::qubits(&["S", "E", "X"])?;
            let bell = (ket(4, 0) + ket(4, 3)) * cr(h);
            let initial = QState::pure(&space, plus.kronecker(&bell), tol)?;
            let seg = vec![vec![LocalOp::new(&space, &["S", "E"], cnot())?]];
            (space, initial, seg)
        }
        MixedRecordVariant::Ghz | MixedRecordVariant::GhzScrambled => {
            let space = TensorSpace::qubits(&["S", "E", "X"])?;
            let initial = QState::pure(&space, plus.kronecker(&ket(4, 0)), tol)?;
            let mut seg = vec![vec![
                LocalOp::new(&space, &["S", "E"], cnot())?,
                LocalOp::new(&space, &["S", "X"], cnot())?,
            ]];
            if variant == MixedRecordVariant::GhzScrambled {
                seg.push(vec![LocalOp::new(&space, &["E", "X"], scrambler())?]);
            }
            (space, initial, seg)
        }
    };
    let horizon = segments.len();
    let schedule = Schedule::new(&space, segments, tol)?;
    let events = vec![Event {
        time: horizon,
        family: ProjectorFamily::pointer(&space, "S", tol)?,
    }];
    HistorySet::new(schedule, events, initial, *tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::unitary_defect;

    #[test]
    fn scrambler_is_unitary_and_maps_records() {
        let u = scrambler();
        assert!(unitary_defect(&u) < 1e-15);
        let h = 0.5f64.sqrt();
        let img00 = &u * ket(4, 0);
        assert!((img00 - (ket(4, 0) + ket(4, 3)) * cr(h)).norm() < 1e-15);
        let img11 = &u * ket(4, 3);
        assert!((img11 - (ket(4, 2) + ket(4, 1)) * cr(h)).norm() < 1e-15);
    }
}
