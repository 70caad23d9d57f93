use crate::error::{Error, Result};

use super::{cr, Bipartition, CMatrix, CVector, Fragment, QState};

/// Singular values below this fraction of the largest are dropped.
const DROP_REL: f64 = 1e-13;

/// `|ψ⟩ = Σ_i √d_i |A_i⟩|B_i⟩` with `d_i` nonincreasing.
#[derive(Clone, Debug)]
pub struct SchmidtDecomposition {
    pub coefficients: Vec<f64>,
    /// Columns are `|A_i⟩` on the cut.
    pub left: CMatrix,
    /// Columns are `|B_i⟩` on the complement.
    pub right: CMatrix,
    bipartition: Bipartition,
}

impl SchmidtDecomposition {
    pub fn rank(&self) -> usize {
        self.coefficients.len()
    }

    pub fn reconstruct(&self) -> CVector {
        let mut m = CMatrix::zeros(self.left.nrows(), self.right.nrows());
        for (i, d) in self.coefficients.iter().enumerate() {
            m += self.left.column(i) * self.right.column(i).transpose() * cr(d.sqrt());
        }
        self.bipartition.flatten(&m)
    }
}

/// Schmidt decomposition of a pure state across `cut | complement`.
pub fn schmidt(psi: &QState, cut: &Fragment) -> Result<SchmidtDecomposition> {
    let v = psi.vector().ok_or(Error::RequiresPureState)?;
    if cut.space() != psi.space() {
        return Err(Error::ShapeMismatch("cut belongs to a different space".into()));
    }
    Ok(schmidt_vector(v, cut))
}

/// Schmidt decomposition of a raw (possibly unnormalized) vector.
pub fn schmidt_vector(v: &CVector, cut: &Fragment) -> SchmidtDecomposition {
    let bp = Bipartition::new(cut);
    let m = bp.reshape(v);
    let svd = m.svd(true, true);
    let u = svd.u.expect("left singular vectors");
    let v_t = svd.v_t.expect("right singular vectors");
    let sv = svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    // stable: ties keep the solver's order
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));
    let smax = order.first().map(|&i| sv[i]).unwrap_or(0.0);
    let keep: Vec<usize> = order
        .into_iter()
        .filter(|&i| sv[i] > DROP_REL * smax.max(f64::MIN_POSITIVE))
        .collect();
    let coefficients = keep.iter().map(|&i| sv[i] * sv[i]).collect();
    let left_cols: Vec<CVector> = keep.iter().map(|&i| u.column(i).into_owned()).collect();
    let right_cols: Vec<CVector> = keep
        .iter()
        .map(|&i| v_t.row(i).transpose().into_owned())
        .collect();
    let build = |cols: &[CVector], rows: usize| {
        if cols.is_empty() {
            CMatrix::zeros(rows, 0)
        } else {
            CMatrix::from_columns(cols)
        }
    };
    SchmidtDecomposition {
        coefficients,
        left: build(&left_cols, bp.dim_keep()),
        right: build(&right_cols, bp.dim_traced()),
        bipartition: bp,
    }
}
