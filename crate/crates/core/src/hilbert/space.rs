use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

use super::{CMatrix, CVector};

/// Environment variable overriding the total-dimension cap.
pub const DIM_CAP_ENV: &str = "HISTCON_DIM_CAP";
const DEFAULT_DIM_CAP: usize = 1 << 14;

/// Largest total dimension any [`TensorSpace`] may have.
pub fn dimension_cap() -> usize {
    std::env::var(DIM_CAP_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&cap| cap > 0)
        .unwrap_or(DEFAULT_DIM_CAP)
}

#[derive(Debug, PartialEq, Eq)]
struct SpaceInner {
    labels: Vec<String>,
    dims: Vec<usize>,
    total: usize,
}

/// An ordered product of labelled finite-dimensional factors.
///
/// Cheap to clone; factors are shared behind an `Arc`.
#[derive(Clone, PartialEq, Eq)]
pub struct TensorSpace {
    inner: Arc<SpaceInner>,
}

impl fmt::Debug for TensorSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut list = f.debug_list();
        for (l, d) in self.factors() {
            list.entry(&format_args!("{l}:{d}"));
        }
        list.finish()
    }
}

impl TensorSpace {
    pub fn new<I, S>(factors: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, usize)>,
        S: Into<String>,
    {
        let mut labels = Vec::new();
        let mut dims = Vec::new();
        let cap = dimension_cap();
        let mut total: usize = 1;
        for (label, dim) in factors {
            let label = label.into();
            if label.is_empty() {
                return Err(Error::InvalidDimension { label, dim });
            }
            if dim == 0 {
                return Err(Error::InvalidDimension { label, dim });
            }
            if labels.contains(&label) {
                return Err(Error::DuplicateLabel(label));
            }
            total = total
                .checked_mul(dim)
                .filter(|&t| t <= cap)
                .ok_or(Error::DimensionOverflow {
                    dim: total.saturating_mul(dim),
                    cap,
                })?;
            labels.push(label);
            dims.push(dim);
        }
        if labels.is_empty() {
            return Err(Error::ShapeMismatch("a space needs at least one factor".into()));
        }
        Ok(Self {
            inner: Arc::new(SpaceInner { labels, dims, total }),
        })
    }

    pub fn qubits<S: AsRef<str>>(labels: &[S]) -> Result<Self> {
        Self::new(labels.iter().map(|l| (l.as_ref().to_string(), 2)))
    }

    pub fn labels(&self) -> &[String] {
        &self.inner.labels
    }

    pub fn dims(&self) -> &[usize] {
        &self.inner.dims
    }

    pub fn total_dim(&self) -> usize {
        self.inner.total
    }

    pub fn len(&self) -> usize {
        self.inner.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn factors(&self) -> impl Iterator<Item = (&str, usize)> {
        self.inner
            .labels
            .iter()
            .map(String::as_str)
            .zip(self.inner.dims.iter().copied())
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.inner
            .labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    /// Place value of each factor in a global basis index.
    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.len()];
        for k in (0..self.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * self.inner.dims[k + 1];
        }
        strides
    }

    /// Global index of a product basis state given one digit per factor.
    pub fn index_from_digits(&self, digits: &[usize]) -> Result<usize> {
        if digits.len() != self.len() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} digits, got {}",
                self.len(),
                digits.len()
            )));
        }
        let mut idx = 0;
        for (k, (&d, &dim)) in digits.iter().zip(self.dims()).enumerate() {
            if d >= dim {
                return Err(Error::ShapeMismatch(format!(
                    "digit {d} out of range for factor `{}`",
                    self.inner.labels[k]
                )));
            }
            idx = idx * dim + d;
        }
        Ok(idx)
    }

    pub fn digits_of(&self, mut index: usize) -> Vec<usize> {
        let mut digits = vec![0; self.len()];
        for k in (0..self.len()).rev() {
            digits[k] = index % self.inner.dims[k];
            index /= self.inner.dims[k];
        }
        digits
    }

    /// The space restricted to `indices`, kept in original order.
    pub fn subspace(&self, indices: &[usize]) -> Result<TensorSpace> {
        let mut sorted = indices.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        TensorSpace::new(
            sorted
                .iter()
                .map(|&i| (self.inner.labels[i].clone(), self.inner.dims[i])),
        )
    }

    pub fn fragment<S: AsRef<str>>(&self, labels: &[S]) -> Result<Fragment> {
        Fragment::new(self, labels)
    }

    pub fn full(&self) -> Fragment {
        Fragment {
            space: self.clone(),
            members: (0..self.len()).collect(),
        }
    }

    pub fn empty_fragment(&self) -> Fragment {
        Fragment {
            space: self.clone(),
            members: Vec::new(),
        }
    }

    pub(crate) fn check_vector(&self, v: &CVector) -> Result<()> {
        if v.len() != self.total_dim() {
            return Err(Error::ShapeMismatch(format!(
                "vector of length {} on a space of dimension {}",
                v.len(),
                self.total_dim()
            )));
        }
        Ok(())
    }

    pub(crate) fn check_matrix(&self, m: &CMatrix) -> Result<()> {
        let n = self.total_dim();
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} matrix on a space of dimension {n}",
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(())
    }
}

/// A subset of the factors of a [`TensorSpace`].
#[derive(Clone, PartialEq, Eq)]
pub struct Fragment {
    space: TensorSpace,
    members: Vec<usize>,
}

impl fmt::Debug for Fragment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Fragment{self}")
    }
}

impl fmt::Display for Fragment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.labels().join(","))
    }
}

impl Fragment {
    pub fn new<S: AsRef<str>>(space: &TensorSpace, labels: &[S]) -> Result<Self> {
        let mut members = labels
            .iter()
            .map(|l| space.index_of(l.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        members.sort_unstable();
        members.dedup();
        Ok(Self {
            space: space.clone(),
            members,
        })
    }

    pub fn from_indices(space: &TensorSpace, indices: &[usize]) -> Result<Self> {
        let mut members = indices.to_vec();
        members.sort_unstable();
        members.dedup();
        if let Some(&bad) = members.iter().find(|&&i| i >= space.len()) {
            return Err(Error::UnknownLabel(format!("#{bad}")));
        }
        Ok(Self {
            space: space.clone(),
            members,
        })
    }

    pub fn space(&self) -> &TensorSpace {
        &self.space
    }

    /// Factor indices, ascending.
    pub fn indices(&self) -> &[usize] {
        &self.members
    }

    pub fn labels(&self) -> Vec<&str> {
        self.members
            .iter()
            .map(|&i| self.space.labels()[i].as_str())
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.members.iter().map(|&i| self.space.dims()[i]).product()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.members.len() == self.space.len()
    }

    pub fn contains(&self, label: &str) -> bool {
        self.space
            .index_of(label)
            .map(|i| self.members.binary_search(&i).is_ok())
            .unwrap_or(false)
    }

    pub fn contains_index(&self, index: usize) -> bool {
        self.members.binary_search(&index).is_ok()
    }

    pub fn complement(&self) -> Fragment {
        Fragment {
            space: self.space.clone(),
            members: (0..self.space.len())
                .filter(|i| self.members.binary_search(i).is_err())
                .collect(),
        }
    }

    pub fn union(&self, other: &Fragment) -> Fragment {
        let mut members = self.members.clone();
        members.extend_from_slice(&other.members);
        members.sort_unstable();
        members.dedup();
        Fragment {
            space: self.space.clone(),
            members,
        }
    }

    pub fn is_disjoint(&self, other: &Fragment) -> bool {
        self.members.iter().all(|m| !other.contains_index(*m))
    }

    pub fn is_subset(&self, other: &Fragment) -> bool {
        self.members.iter().all(|m| other.contains_index(*m))
    }

    /// The factors of this fragment as a standalone space.
    pub fn as_space(&self) -> Result<TensorSpace> {
        self.space.subspace(&self.members)
    }
}

/// Index bookkeeping for splitting the global space into a kept part `K`
/// and a traced part `T`.
///
/// `table[k * dim_t + t]` is the global index of `|k⟩_K|t⟩_T`, where `k` and
/// `t` are big-endian indices over the respective factor subsets.
#[derive(Clone, Debug)]
pub struct Bipartition {
    keep: Fragment,
    traced: Fragment,
    dim_k: usize,
    dim_t: usize,
    table: Vec<usize>,
}

impl Bipartition {
    pub fn new(keep: &Fragment) -> Self {
        let space = keep.space();
        let traced = keep.complement();
        let strides = space.strides();
        let offsets = |frag: &Fragment| -> Vec<usize> {
            let mut offs = vec![0usize];
            for &f in frag.indices() {
                let d = space.dims()[f];
                let mut next = Vec::with_capacity(offs.len() * d);
                for &o in &offs {
                    for digit in 0..d {
                        next.push(o + digit * strides[f]);
                    }
                }
                offs = next;
            }
            offs
        };
        let ok = offsets(keep);
        let ot = offsets(&traced);
        let mut table = Vec::with_capacity(ok.len() * ot.len());
        for &a in &ok {
            for &b in &ot {
                table.push(a + b);
            }
        }
        Self {
            keep: keep.clone(),
            traced,
            dim_k: ok.len(),
            dim_t: ot.len(),
            table,
        }
    }

    pub fn keep(&self) -> &Fragment {
        &self.keep
    }

    pub fn traced(&self) -> &Fragment {
        &self.traced
    }

    pub fn dim_keep(&self) -> usize {
        self.dim_k
    }

    pub fn dim_traced(&self) -> usize {
        self.dim_t
    }

    pub fn global(&self, k: usize, t: usize) -> usize {
        self.table[k * self.dim_t + t]
    }

    /// Reshapes a global vector into a `dim_keep × dim_traced` matrix.
    pub fn reshape(&self, v: &CVector) -> CMatrix {
        CMatrix::from_fn(self.dim_k, self.dim_t, |k, t| v[self.global(k, t)])
    }

    /// Inverse of [`Bipartition::reshape`].
    pub fn flatten(&self, m: &CMatrix) -> CVector {
        let mut v = CVector::zeros(self.dim_k * self.dim_t);
        for k in 0..self.dim_k {
            for t in 0..self.dim_t {
                v[self.global(k, t)] = m[(k, t)];
            }
        }
        v
    }

    /// `Tr_T[X]` for a global operator `X`.
    pub fn trace_out(&self, x: &CMatrix) -> CMatrix {
        CMatrix::from_fn(self.dim_k, self.dim_k, |a, b| {
            (0..self.dim_t)
                .map(|t| x[(self.global(a, t), self.global(b, t))])
                .sum()
        })
    }

    /// `Tr_T[|u⟩⟨v|]` without forming the global outer product.
    pub fn trace_out_outer(&self, u: &CVector, v: &CVector) -> CMatrix {
        self.reshape(u) * self.reshape(v).adjoint()
    }

    /// `X_K ⊗ I_T` as a global operator.
    pub fn embed(&self, x: &CMatrix) -> CMatrix {
        let n = self.dim_k * self.dim_t;
        let mut out = CMatrix::zeros(n, n);
        for a in 0..self.dim_k {
            for b in 0..self.dim_k {
                let val = x[(a, b)];
                if val.norm_sqr() == 0.0 {
                    continue;
                }
                for t in 0..self.dim_t {
                    out[(self.global(a, t), self.global(b, t))] = val;
                }
            }
        }
        out
    }

    /// `(X_K ⊗ I_T) v` without forming the global operator.
    pub fn apply_keep(&self, x: &CMatrix, v: &CVector) -> CVector {
        self.flatten(&(x * self.reshape(v)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_factors() {
        assert!(matches!(
            TensorSpace::new([("a", 2), ("a", 2)]),
            Err(Error::DuplicateLabel(_))
        ));
        assert!(matches!(
            TensorSpace::new([("a", 0)]),
            Err(Error::InvalidDimension { .. })
        ));
        assert!(matches!(
            TensorSpace::new((0..15).map(|i| (format!("q{i}"), 2))),
            Err(Error::DimensionOverflow { .. })
        ));
    }

    #[test]
    fn digits_round_trip() {
        let s = TensorSpace::new([("a", 2), ("b", 3), ("c", 2)]).unwrap();
        assert_eq!(s.total_dim(), 12);
        assert_eq!(s.strides(), vec![6, 2, 1]);
        for i in 0..12 {
            assert_eq!(s.index_from_digits(&s.digits_of(i)).unwrap(), i);
        }
        assert_eq!(s.index_from_digits(&[1, 2, 0]).unwrap(), 10);
    }

    #[test]
    fn fragment_complement_and_order() {
        let s = TensorSpace::qubits(&["S", "E1", "E2"]).unwrap();
        let f = s.fragment(&["E2", "S"]).unwrap();
        assert_eq!(f.labels(), vec!["S", "E2"]);
        assert_eq!(f.complement().labels(), vec!["E1"]);
        assert!(f.is_disjoint(&f.complement()));
        assert_eq!(f.to_string(), "{S,E2}");
        assert!(s.fragment(&["X"]).is_err());
    }

    #[test]
    fn bipartition_table_matches_digits() {
        let s = TensorSpace::new([("a", 2), ("b", 3), ("c", 2)]).unwrap();
        let keep = s.fragment(&["a", "c"]).unwrap();
        let bp = Bipartition::new(&keep);
        assert_eq!((bp.dim_keep(), bp.dim_traced()), (4, 3));
        for k in 0..4 {
            for t in 0..3 {
                let g = bp.global(k, t);
                let d = s.digits_of(g);
                assert_eq!(d[0] * 2 + d[2], k);
                assert_eq!(d[1], t);
            }
        }
    }
}
