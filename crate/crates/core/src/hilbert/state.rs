use crate::error::{Error, Result};
use crate::tolerance::Tolerances;

use super::linalg::{hermitian_defect, psd_eigen, trace};
use super::{cr, Bipartition, CMatrix, CVector, Fragment, TensorSpace};

#[derive(Clone, Debug, PartialEq)]
pub enum Payload {
    Vector(CVector),
    Matrix(CMatrix),
}

/// A pure state vector or a density matrix on a [`TensorSpace`].
///
/// Unnormalized intermediates (branch vectors, partial-trace entries) carry
/// `normalized == false` and skip the norm checks.
#[derive(Clone, Debug, PartialEq)]
pub struct QState {
    space: TensorSpace,
    payload: Payload,
    normalized: bool,
}

impl QState {
    pub fn pure(space: &TensorSpace, v: CVector, tol: &Tolerances) -> Result<Self> {
        space.check_vector(&v)?;
        let norm = v.norm();
        if (norm - 1.0).abs() > tol.norm {
            return Err(Error::InvalidState(format!("state norm is {norm}, expected 1")));
        }
        Ok(Self {
            space: space.clone(),
            payload: Payload::Vector(v),
            normalized: true,
        })
    }

    /// Normalizes `v` before wrapping it.
    pub fn pure_normalized(space: &TensorSpace, v: CVector) -> Result<Self> {
        space.check_vector(&v)?;
        let norm = v.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidState("cannot normalize a zero vector".into()));
        }
        Ok(Self {
            space: space.clone(),
            payload: Payload::Vector(v / cr(norm)),
            normalized: true,
        })
    }

    pub fn mixed(space: &TensorSpace, m: CMatrix, tol: &Tolerances) -> Result<Self> {
        space.check_matrix(&m)?;
        let herm = hermitian_defect(&m);
        if herm > tol.ortho {
            return Err(Error::NotHermitian(herm));
        }
        psd_eigen(&m, tol.psd)?;
        let tr = trace(&m);
        if (tr.re - 1.0).abs() > tol.norm || tr.im.abs() > tol.norm {
            return Err(Error::InvalidState(format!("density matrix trace is {tr}")));
        }
        Ok(Self {
            space: space.clone(),
            payload: Payload::Matrix(m),
            normalized: true,
        })
    }

    pub fn unnormalized_vector(space: &TensorSpace, v: CVector) -> Result<Self> {
        space.check_vector(&v)?;
        Ok(Self {
            space: space.clone(),
            payload: Payload::Vector(v),
            normalized: false,
        })
    }

    pub fn unnormalized_matrix(space: &TensorSpace, m: CMatrix) -> Result<Self> {
        space.check_matrix(&m)?;
        Ok(Self {
            space: space.clone(),
            payload: Payload::Matrix(m),
            normalized: false,
        })
    }

    /// The product basis state with one digit per factor.
    pub fn basis(space: &TensorSpace, digits: &[usize]) -> Result<Self> {
        let idx = space.index_from_digits(digits)?;
        let mut v = CVector::zeros(space.total_dim());
        v[idx] = cr(1.0);
        Ok(Self {
            space: space.clone(),
            payload: Payload::Vector(v),
            normalized: true,
        })
    }

    /// Tensor product of per-factor states, in factor order of `space`.
    pub fn product(space: &TensorSpace, parts: &[Payload], tol: &Tolerances) -> Result<Self> {
        if parts.len() != space.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} factor states for {} factors",
                parts.len(),
                space.len()
            )));
        }
        let all_pure = parts.iter().all(|p| matches!(p, Payload::Vector(_)));
        for (p, &d) in parts.iter().zip(space.dims()) {
            let ok = match p {
                Payload::Vector(v) => v.len() == d,
                Payload::Matrix(m) => m.nrows() == d && m.ncols() == d,
            };
            if !ok {
                return Err(Error::ShapeMismatch("factor state has wrong dimension".into()));
            }
        }
        if all_pure {
            let mut v = CVector::from_element(1, cr(1.0));
            for p in parts {
                if let Payload::Vector(f) = p {
                    v = v.kronecker(f);
                }
            }
            Self::pure(space, v, tol)
        } else {
            let mut m = CMatrix::from_element(1, 1, cr(1.0));
            for p in parts {
                let f = match p {
                    Payload::Vector(f) => f * f.adjoint(),
                    Payload::Matrix(f) => f.clone(),
                };
                m = m.kronecker(&f);
            }
            Self::mixed(space, m, tol)
        }
    }

    pub fn space(&self) -> &TensorSpace {
        &self.space
    }

    pub fn payload(&self) -> &Payload {
        &self.payload
    }

    pub fn is_pure(&self) -> bool {
        matches!(self.payload, Payload::Vector(_))
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn vector(&self) -> Option<&CVector> {
        match &self.payload {
            Payload::Vector(v) => Some(v),
            Payload::Matrix(_) => None,
        }
    }

    pub fn matrix(&self) -> Option<&CMatrix> {
        match &self.payload {
            Payload::Vector(_) => None,
            Payload::Matrix(m) => Some(m),
        }
    }

    pub fn density_matrix(&self) -> CMatrix {
        match &self.payload {
            Payload::Vector(v) => v * v.adjoint(),
            Payload::Matrix(m) => m.clone(),
        }
    }

    /// `⟨ψ|ψ⟩` or `Tr ρ`.
    pub fn weight(&self) -> f64 {
        match &self.payload {
            Payload::Vector(v) => v.norm_squared(),
            Payload::Matrix(m) => trace(m).re,
        }
    }

    /// Decomposes the state as `Σ_z λ_z |z⟩⟨z|` with orthonormal `|z⟩`.
    ///
    /// Weights below `cutoff` relative to the largest are dropped. Diagonal
    /// matrices skip the eigensolver so basis structure is preserved exactly.
    pub fn ensemble(&self, tol: &Tolerances) -> Result<Vec<(f64, CVector)>> {
        match &self.payload {
            Payload::Vector(v) => Ok(vec![(1.0, v.clone())]),
            Payload::Matrix(m) => {
                let n = m.nrows();
                let off_diagonal = (0..n)
                    .flat_map(|r| (0..n).map(move |c| (r, c)))
                    .filter(|(r, c)| r != c)
                    .any(|(r, c)| m[(r, c)].norm() > 0.0);
                let mut out = Vec::new();
                if !off_diagonal {
                    for i in 0..n {
                        let w = m[(i, i)].re;
                        if w < -tol.psd {
                            return Err(Error::NotPsd(w));
                        }
                        if w > tol.zero_probability * 1e-2 {
                            let mut e = CVector::zeros(n);
                            e[i] = cr(1.0);
                            out.push((w, e));
                        }
                    }
                } else {
                    let (values, vectors) = psd_eigen(m, tol.psd)?;
                    for (i, &w) in values.iter().enumerate() {
                        if w > tol.zero_probability * 1e-2 {
                            out.push((w, vectors.column(i).into_owned()));
                        }
                    }
                }
                Ok(out)
            }
        }
    }
}

/// Reduced state on `keep`, with factors in their original order.
pub fn partial_trace(state: &QState, keep: &Fragment) -> Result<QState> {
    if keep.space() != state.space() {
        return Err(Error::ShapeMismatch("fragment belongs to a different space".into()));
    }
    if keep.is_empty() {
        return Err(Error::ShapeMismatch("cannot keep an empty fragment".into()));
    }
    let space = keep.as_space()?;
    let bp = Bipartition::new(keep);
    let reduced = match state.payload() {
        Payload::Vector(v) => bp.trace_out_outer(v, v),
        Payload::Matrix(m) => bp.trace_out(m),
    };
    Ok(QState {
        space,
        payload: Payload::Matrix(reduced),
        normalized: state.is_normalized(),
    })
}
