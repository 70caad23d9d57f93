use crate::error::Result;
use crate::hilbert::{cr, CVector, LocalOp, QState, TensorSpace};
use crate::histories::{Event, HistorySet, ProjectorFamily, Schedule};
use crate::tolerance::Tolerances;

use super::gates::cnot;

/// `|±⟩` projectors on `S` at `t = 0` before a CNOT into `E`, then pointer
/// projectors at `t = 1`. Starts from `|0⟩_S|0⟩_E`; the two histories ending
/// in `0` interfere.
pub fn build_interference_model(tol: &Tolerances) -> Result<HistorySet> {
    let space = TensorSpace::qubits(&["S", "E"])?;
    let h = 0.5f64.sqrt();
    let plus = CVector::from_vec(vec![cr(h), cr(h)]);
    let minus = CVector::from_vec(vec![cr(h), cr(-h)]);
    let pm = ProjectorFamily::new(
        &space,
        &["S"],
        vec![&plus * plus.adjoint(), &minus * minus.adjoint()],
        vec!["+".into(), "-".into()],
        tol,
    )?;
    let schedule = Schedule::new(&space, vec![vec![LocalOp::new(&space, &["S", "E"], cnot())?]], tol)?;
    let events = vec![
        Event { time: 0, family: pm },
        Event {
            time: 1,
            family: ProjectorFamily::pointer(&space, "S", tol)?,
        },
    ];
    let initial = QState::basis(&space, &[0, 0])?;
    HistorySet::new(schedule, events, initial, *tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histories_ending_in_zero_interfere() {
        let tol = Tolerances::default();
        let hs = build_interference_model(&tol).unwrap();
        let d = hs.decoherence_functional(1).unwrap();
        let (a, b) = (hs.history_index(&[0, 0]).unwrap(), hs.history_index(&[1, 0]).unwrap());
        assert!((d.get(a, b).re - 0.25).abs() < 1e-12);
        let cf = hs.consistency_factor(&[0, 0], &[1, 0]).unwrap();
        assert!((cf.norm() - 1.0).abs() < 1e-12);
        assert!(!hs.check_consistency(1e-9).unwrap().consistent);
    }
}
