//! Small fixed matrices used by the model builders.

use crate::hilbert::{cr, CMatrix, CVector};

pub fn hadamard() -> CMatrix {
    let s = 0.5f64.sqrt();
    CMatrix::from_row_slice(2, 2, &[cr(s), cr(s), cr(s), cr(-s)])
}

pub fn pauli_x() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[cr(0.0), cr(1.0), cr(1.0), cr(0.0)])
}

/// Control on the first qubit, target on the second.
pub fn cnot() -> CMatrix {
    controlled(&[CMatrix::identity(2, 2), pauli_x()])
}

/// `Σ_s |s⟩⟨s| ⊗ U_s`, control first.
pub fn controlled(unitaries: &[CMatrix]) -> CMatrix {
    let k = unitaries.len();
    let d = unitaries[0].nrows();
    let mut m = CMatrix::zeros(k * d, k * d);
    for (s, u) in unitaries.iter().enumerate() {
        m.view_mut((s * d, s * d), (d, d)).copy_from(u);
    }
    m
}

pub fn ket(dim: usize, k: usize) -> CVector {
    let mut v = CVector::zeros(dim);
    v[k] = cr(1.0);
    v
}

/// `|v⟩⟨v| / ⟨v|v⟩`
pub fn projector_onto(v: &CVector) -> CMatrix {
    v * v.adjoint() / cr(v.norm_squared())
}

pub fn diag(values: &[f64]) -> CMatrix {
    CMatrix::from_diagonal(&CVector::from_iterator(
        values.len(),
        values.iter().map(|&x| cr(x)),
    ))
}
