use crate::error::{Error, Result};

use super::{cr, CMatrix, CVector, QState, C64};

/// Relative floor below which eigenvalues of a density matrix are treated as
/// exact zeros when taking square roots.
pub(crate) const SQRT_FLOOR: f64 = 1e-13;

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn kron_all(factors: &[CMatrix]) -> CMatrix {
    factors
        .iter()
        .fold(CMatrix::identity(1, 1), |acc, f| acc.kronecker(f))
}

/// `|u⟩⟨v|`
pub fn outer(u: &CVector, v: &CVector) -> CMatrix {
    u * v.adjoint()
}

pub fn trace(m: &CMatrix) -> C64 {
    m.diagonal().iter().sum()
}

/// Largest entry of `|M − M†|`.
pub fn hermitian_defect(m: &CMatrix) -> f64 {
    (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest entry of `|U†U − I|`.
pub fn unitary_defect(u: &CMatrix) -> f64 {
    if u.nrows() != u.ncols() {
        return f64::INFINITY;
    }
    (u.adjoint() * u - identity(u.nrows()))
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Eigen-decomposition of the Hermitian part of `m`, eigenvalues descending.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let h = (m + m.adjoint()) * cr(0.5);
    let eig = h.symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Eigen-decomposition of a positive semidefinite matrix.
///
/// Eigenvalues in `[-tol_psd, 0)` are clipped to zero; anything lower is an
/// error.
pub fn psd_eigen(m: &CMatrix, tol_psd: f64) -> Result<(Vec<f64>, CMatrix)> {
    let (mut values, vectors) = hermitian_eigen(m);
    if let Some(&min) = values.last() {
        if min < -tol_psd {
            return Err(Error::NotPsd(min));
        }
    }
    for v in &mut values {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    Ok((values, vectors))
}

pub fn trace_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().iter().sum()
}

pub fn spectral_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().iter().copied().fold(0.0, f64::max)
}

/// Trace norm and spectral norm of `L R†` for tall `L`, `R` with the same
/// shape, computed through thin QR factors when that is cheaper.
pub fn trace_norm_of_product(l: &CMatrix, r: &CMatrix) -> (f64, f64) {
    let (n, k) = l.shape();
    let sv = if k >= n {
        (l * r.adjoint()).singular_values()
    } else {
        let ql = l.clone().qr();
        let qr = r.clone().qr();
        (ql.r() * qr.r().adjoint()).singular_values()
    };
    (sv.iter().sum(), sv.iter().copied().fold(0.0, f64::max))
}

fn sqrt_factor(m: &CMatrix, tol_psd: f64) -> Result<CMatrix> {
    let (values, vectors) = psd_eigen(m, tol_psd)?;
    let floor = SQRT_FLOOR * values.first().copied().unwrap_or(0.0).max(1.0);
    let cols: Vec<CVector> = values
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > floor)
        .map(|(i, &v)| vectors.column(i) * cr(v.sqrt()))
        .collect();
    if cols.is_empty() {
        return Ok(CMatrix::zeros(m.nrows(), 0));
    }
    Ok(CMatrix::from_columns(&cols))
}

/// `‖√ρ √σ‖₁` for two positive semidefinite matrices.
///
/// With `√ρ = A A†`-style factors `A = V_ρ √Λ`, the trace norm reduces to the
/// sum of singular values of the small matrix `A† B`.
pub fn fidelity_of_matrices(rho: &CMatrix, sigma: &CMatrix, tol_psd: f64) -> Result<f64> {
    if rho.shape() != sigma.shape() || rho.nrows() != rho.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "fidelity of {:?} and {:?} matrices",
            rho.shape(),
            sigma.shape()
        )));
    }
    let a = sqrt_factor(rho, tol_psd)?;
    let b = sqrt_factor(sigma, tol_psd)?;
    if a.ncols() == 0 || b.ncols() == 0 {
        return Ok(0.0);
    }
    Ok((a.adjoint() * b).singular_values().iter().sum())
}

/// Un-squared fidelity `F(ρ,σ) = ‖√ρ √σ‖₁`.
pub fn fidelity(rho: &QState, sigma: &QState, tol_psd: f64) -> Result<f64> {
    if rho.space() != sigma.space() {
        return Err(Error::ShapeMismatch("fidelity of states on different spaces".into()));
    }
    fidelity_of_matrices(&rho.density_matrix(), &sigma.density_matrix(), tol_psd)
}

/// Orthonormal basis (as columns) of the eigenspace with eigenvalues above
/// `rank_tol`.
pub(crate) fn support_basis(m: &CMatrix, rank_tol: f64) -> CMatrix {
    let (values, vectors) = hermitian_eigen(m);
    let cols: Vec<CVector> = values
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > rank_tol)
        .map(|(i, _)| vectors.column(i).into_owned())
        .collect();
    if cols.is_empty() {
        CMatrix::zeros(m.nrows(), 0)
    } else {
        CMatrix::from_columns(&cols)
    }
}

pub fn support_projector_of(m: &CMatrix, rank_tol: f64) -> CMatrix {
    let basis = support_basis(m, rank_tol);
    &basis * basis.adjoint()
}

pub fn support_projector(rho: &QState, rank_tol: f64) -> CMatrix {
    support_projector_of(&rho.density_matrix(), rank_tol)
}

#[cfg(test)]
mod tests {
    use super::super::c;
    use super::*;

    fn max_abs(m: &CMatrix) -> f64 {
        m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn trace_norm_examples() {
        assert!((trace_norm(&identity(5)) - 5.0).abs() < 1e-12);
        let d = CMatrix::from_diagonal(&CVector::from_vec(vec![cr(1.0), cr(-2.0)]));
        assert!((trace_norm(&d) - 3.0).abs() < 1e-12);
        let a = CVector::from_vec(vec![c(0.6, 0.0), c(0.0, 0.8)]);
        let b = CVector::from_vec(vec![c(0.0, 1.0), cr(0.0)]);
        assert!((trace_norm(&outer(&a, &b)) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn product_trace_norm_matches_dense() {
        let l = CMatrix::from_fn(6, 2, |r, k| c(r as f64 - k as f64, 0.3 * (r * k) as f64));
        let r = CMatrix::from_fn(6, 2, |r, k| c((r + k) as f64 * 0.1, -(r as f64)));
        let (tn, sn) = trace_norm_of_product(&l, &r);
        let dense = &l * r.adjoint();
        assert!((tn - trace_norm(&dense)).abs() < 1e-10);
        assert!((sn - spectral_norm(&dense)).abs() < 1e-10);
    }

    #[test]
    fn fidelity_basics() {
        let p0 = CMatrix::from_diagonal(&CVector::from_vec(vec![cr(1.0), cr(0.0)]));
        let p1 = CMatrix::from_diagonal(&CVector::from_vec(vec![cr(0.0), cr(1.0)]));
        let mix = identity(2) * cr(0.5);
        assert!(fidelity_of_matrices(&p0, &p1, 1e-9).unwrap().abs() < 1e-12);
        assert!((fidelity_of_matrices(&mix, &mix, 1e-9).unwrap() - 1.0).abs() < 1e-12);
        // F(|0⟩⟨0|, I/2) = √(1/2)
        let f = fidelity_of_matrices(&p0, &mix, 1e-9).unwrap();
        assert!((f - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn fidelity_of_flipped_mixed_spin() {
        let p0 = 0.7;
        let a = CMatrix::from_diagonal(&CVector::from_vec(vec![cr(p0), cr(1.0 - p0)]));
        let b = CMatrix::from_diagonal(&CVector::from_vec(vec![cr(1.0 - p0), cr(p0)]));
        let f = fidelity_of_matrices(&a, &b, 1e-9).unwrap();
        assert!((f - 0.916515138991168).abs() < 1e-12);
    }

    #[test]
    fn psd_check_rejects_negative() {
        let m = CMatrix::from_diagonal(&CVector::from_vec(vec![cr(1.0), cr(-1e-3)]));
        assert!(matches!(psd_eigen(&m, 1e-9), Err(Error::NotPsd(_))));
        let m = CMatrix::from_diagonal(&CVector::from_vec(vec![cr(1.0), cr(-1e-12)]));
        let (vals, _) = psd_eigen(&m, 1e-9).unwrap();
        assert_eq!(vals, vec![1.0, 0.0]);
    }

    #[test]
    fn support_of_mixed_and_pure() {
        let mix = identity(2) * cr(0.5);
        assert!(max_abs(&(support_projector_of(&mix, 1e-9) - identity(2))) < 1e-12);
        let p0 = CMatrix::from_diagonal(&CVector::from_vec(vec![cr(1.0), cr(0.0)]));
        assert!(max_abs(&(support_projector_of(&p0, 1e-9) - &p0)) < 1e-12);
    }

    #[test]
    fn kron_is_big_endian() {
        let x = CMatrix::from_row_slice(2, 2, &[cr(0.0), cr(1.0), cr(1.0), cr(0.0)]);
        let k = kron(&x, &identity(2));
        // X on the first factor maps |00⟩ (index 0) to |10⟩ (index 2).
        assert_eq!(k[(2, 0)], cr(1.0));
        assert_eq!(kron_all(&[x.clone(), identity(2)]), k);
    }
}
