use crate::error::{Error, Result};

use super::linalg::unitary_defect;
use super::{Bipartition, CMatrix, CVector, Fragment, TensorSpace, C64};

/// An operator acting on a subset of factors, identity elsewhere.
///
/// Application costs `O(total_dim · local_dim)` instead of the dense
/// `O(total_dim²)`.
#[derive(Clone, Debug)]
pub struct LocalOp {
    targets: Fragment,
    matrix: CMatrix,
    offsets: Vec<usize>,
    bases: Vec<usize>,
}

impl LocalOp {
    /// `matrix` is written in the basis of `labels` taken in the given order.
    pub fn new<S: AsRef<str>>(space: &TensorSpace, labels: &[S], matrix: CMatrix) -> Result<Self> {
        let idx = labels
            .iter()
            .map(|l| space.index_of(l.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        Self::from_indices(space, &idx, matrix)
    }

    pub fn from_indices(space: &TensorSpace, idx: &[usize], matrix: CMatrix) -> Result<Self> {
        let mut seen = idx.to_vec();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != idx.len() {
            return Err(Error::ShapeMismatch("repeated target factor".into()));
        }
        let dims: Vec<usize> = idx.iter().map(|&i| space.dims()[i]).collect();
        let d: usize = dims.iter().product();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} matrix on factors of total dimension {d}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let targets = Fragment::from_indices(space, idx)?;
        let matrix = if seen == idx {
            matrix
        } else {
            let perm = local_permutation(idx, &dims, &seen);
            CMatrix::from_fn(d, d, |r, c| matrix[(perm[r], perm[c])])
        };
        let bp = Bipartition::new(&targets);
        let offsets = (0..bp.dim_keep()).map(|k| bp.global(k, 0)).collect();
        let bases = (0..bp.dim_traced()).map(|t| bp.global(0, t)).collect();
        Ok(Self {
            targets,
            matrix,
            offsets,
            bases,
        })
    }

    /// A dense operator on the whole space.
    pub fn global(space: &TensorSpace, matrix: CMatrix) -> Result<Self> {
        let all: Vec<usize> = (0..space.len()).collect();
        Self::from_indices(space, &all, matrix)
    }

    pub fn identity(space: &TensorSpace) -> Self {
        let d = space.dims()[0];
        Self::from_indices(space, &[0], CMatrix::identity(d, d)).expect("identity on one factor")
    }

    pub fn space(&self) -> &TensorSpace {
        self.targets.space()
    }

    pub fn targets(&self) -> &Fragment {
        &self.targets
    }

    /// Local matrix in ascending factor order of [`LocalOp::targets`].
    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn local_dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn unitary_defect(&self) -> f64 {
        unitary_defect(&self.matrix)
    }

    pub fn adjoint(&self) -> Self {
        Self {
            targets: self.targets.clone(),
            matrix: self.matrix.adjoint(),
            offsets: self.offsets.clone(),
            bases: self.bases.clone(),
        }
    }

    pub fn apply_in_place(&self, v: &mut CVector) {
        let d = self.local_dim();
        let mut buf = vec![C64::new(0.0, 0.0); d];
        for &base in &self.bases {
            for (b, &o) in buf.iter_mut().zip(&self.offsets) {
                *b = v[base + o];
            }
            for (r, &o) in self.offsets.iter().enumerate() {
                let mut acc = C64::new(0.0, 0.0);
                for (c, b) in buf.iter().enumerate() {
                    let m = self.matrix[(r, c)];
                    if m.re != 0.0 || m.im != 0.0 {
                        acc += m * b;
                    }
                }
                v[base + o] = acc;
            }
        }
    }

    pub fn apply(&self, v: &CVector) -> CVector {
        let mut out = v.clone();
        self.apply_in_place(&mut out);
        out
    }

    /// `O · M`, applying the operator to every column.
    pub fn left_mul(&self, m: &CMatrix) -> CMatrix {
        let mut out = m.clone();
        for mut col in out.column_iter_mut() {
            let mut v = col.clone_owned();
            self.apply_in_place(&mut v);
            col.copy_from(&v);
        }
        out
    }

    /// The operator on the full space.
    pub fn to_dense(&self) -> CMatrix {
        self.left_mul(&CMatrix::identity(
            self.space().total_dim(),
            self.space().total_dim(),
        ))
    }

    /// The same operator on the standalone space of `within`, which must
    /// contain the targets.
    pub fn restricted_to(&self, within: &Fragment) -> Result<LocalOp> {
        if !self.targets.is_subset(within) {
            return Err(Error::ShapeMismatch(format!(
                "operator on {} does not fit inside {}",
                self.targets, within
            )));
        }
        let sub = within.as_space()?;
        let idx: Vec<usize> = self
            .targets
            .indices()
            .iter()
            .map(|t| within.indices().iter().position(|w| w == t).unwrap())
            .collect();
        LocalOp::from_indices(&sub, &idx, self.matrix.clone())
    }
}

/// For each local index in ascending-factor order, the index of the same basis
/// state in the caller's factor order.
fn local_permutation(order: &[usize], dims: &[usize], sorted: &[usize]) -> Vec<usize> {
    let d: usize = dims.iter().product();
    let sorted_dims: Vec<usize> = sorted
        .iter()
        .map(|s| dims[order.iter().position(|o| o == s).unwrap()])
        .collect();
    (0..d)
        .map(|i| {
            let mut rem = i;
            let mut digits = vec![0; sorted.len()];
            for k in (0..sorted.len()).rev() {
                digits[k] = rem % sorted_dims[k];
                rem /= sorted_dims[k];
            }
            let mut j = 0;
            for (p, &f) in order.iter().enumerate() {
                let k = sorted.iter().position(|&s| s == f).unwrap();
                j = j * dims[p] + digits[k];
            }
            j
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::super::{cr, kron_all};
    use super::*;

    fn x() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[cr(0.0), cr(1.0), cr(1.0), cr(0.0)])
    }

    fn cnot() -> CMatrix {
        let mut m = CMatrix::zeros(4, 4);
        for (r, c) in [(0, 0), (1, 1), (2, 3), (3, 2)] {
            m[(r, c)] = cr(1.0);
        }
        m
    }

    #[test]
    fn single_factor_matches_kron() {
        let s = TensorSpace::qubits(&["a", "b", "c"]).unwrap();
        let op = LocalOp::new(&s, &["b"], x()).unwrap();
        let i = CMatrix::identity(2, 2);
        assert_eq!(op.to_dense(), kron_all(&[i.clone(), x(), i]));
    }

    #[test]
    fn reversed_targets_are_permuted() {
        let s = TensorSpace::qubits(&["a", "b", "c"]).unwrap();
        // control c, target a
        let op = LocalOp::new(&s, &["c", "a"], cnot()).unwrap();
        let dense = op.to_dense();
        for i in 0..8 {
            let d = s.digits_of(i);
            let out = if d[2] == 1 { i ^ 4 } else { i };
            assert_eq!(dense[(out, i)], cr(1.0));
        }
    }

    #[test]
    fn restriction_keeps_action() {
        let s = TensorSpace::qubits(&["a", "b", "c"]).unwrap();
        let op = LocalOp::new(&s, &["c", "a"], cnot()).unwrap();
        let within = s.fragment(&["a", "c"]).unwrap();
        let r = op.restricted_to(&within).unwrap();
        let dense = r.to_dense();
        // on (a,c): control c (low bit) flips a (high bit)
        assert_eq!(dense[(3, 1)], cr(1.0));
        assert!(op.restricted_to(&s.fragment(&["a"]).unwrap()).is_err());
    }

    #[test]
    fn global_op_round_trips() {
        let s = TensorSpace::new([("a", 3)]).unwrap();
        let m = CMatrix::from_fn(3, 3, |r, c| cr((r * 3 + c) as f64));
        assert_eq!(LocalOp::global(&s, m.clone()).unwrap().to_dense(), m);
    }
}
