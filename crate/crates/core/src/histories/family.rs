use crate::error::{Error, Result};
use crate::hilbert::{hermitian_defect, CMatrix, CVector, Fragment, LocalOp, TensorSpace, C64};
use crate::tolerance::Tolerances;

/// A complete set of mutually orthogonal projectors, one per outcome.
#[derive(Clone, Debug)]
pub struct ProjectorFamily {
    targets: Fragment,
    projectors: Vec<LocalOp>,
    labels: Vec<String>,
}

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

impl ProjectorFamily {
    /// Projectors written on the factors `targets`, in the given order.
    pub fn new<S: AsRef<str>>(
        space: &TensorSpace,
        targets: &[S],
        matrices: Vec<CMatrix>,
        labels: Vec<String>,
        tol: &Tolerances,
    ) -> Result<Self> {
        if matrices.is_empty() {
            return Err(Error::InvalidFamily("a family needs at least one projector".into()));
        }
        if labels.len() != matrices.len() {
            return Err(Error::InvalidFamily(format!(
                "{} labels for {} projectors",
                labels.len(),
                matrices.len()
            )));
        }
        for (i, l) in labels.iter().enumerate() {
            if l.is_empty() || labels[..i].contains(l) {
                return Err(Error::InvalidFamily(format!("bad or repeated outcome label `{l}`")));
            }
        }
        for (l, m) in labels.iter().zip(&matrices) {
            let h = hermitian_defect(m);
            if h > tol.ortho {
                return Err(Error::InvalidFamily(format!(
                    "projector `{l}` is not Hermitian (defect {h:e})"
                )));
            }
        }
        for i in 0..matrices.len() {
            for j in i..matrices.len() {
                let prod = &matrices[i] * &matrices[j];
                let defect = if i == j {
                    max_abs(&(prod - &matrices[i]))
                } else {
                    max_abs(&prod)
                };
                if defect > tol.ortho {
                    return Err(Error::InvalidFamily(format!(
                        "projectors `{}` and `{}` violate P_a P_b = δ_ab P_a (defect {defect:e})",
                        labels[i], labels[j]
                    )));
                }
            }
        }
        let d = matrices[0].nrows();
        let sum = matrices
            .iter()
            .fold(CMatrix::zeros(d, d), |acc, m| acc + m);
        let completeness = max_abs(&(sum - CMatrix::identity(d, d)));
        if completeness > tol.ortho {
            return Err(Error::InvalidFamily(format!(
                "projectors do not sum to the identity (defect {completeness:e})"
            )));
        }
        let projectors = matrices
            .into_iter()
            .map(|m| LocalOp::new(space, targets, m))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            targets: projectors[0].targets().clone(),
            projectors,
            labels,
        })
    }

    /// Projectors written on the whole space.
    pub fn global(
        space: &TensorSpace,
        matrices: Vec<CMatrix>,
        labels: Vec<String>,
        tol: &Tolerances,
    ) -> Result<Self> {
        let all: Vec<&str> = space.labels().iter().map(String::as_str).collect();
        Self::new(space, &all, matrices, labels, tol)
    }

    /// Computational-basis projectors on one factor, labelled `0`, `1`, ….
    pub fn pointer(space: &TensorSpace, factor: &str, tol: &Tolerances) -> Result<Self> {
        let d = space.dims()[space.index_of(factor)?];
        let matrices = (0..d)
            .map(|k| {
                let mut m = CMatrix::zeros(d, d);
                m[(k, k)] = C64::new(1.0, 0.0);
                m
            })
            .collect();
        let labels = (0..d).map(|k| k.to_string()).collect();
        Self::new(space, &[factor], matrices, labels, tol)
    }

    /// The single-outcome family `{I}`.
    pub fn trivial(space: &TensorSpace, tol: &Tolerances) -> Result<Self> {
        let first = space.labels()[0].clone();
        let d = space.dims()[0];
        Self::new(
            space,
            &[first],
            vec![CMatrix::identity(d, d)],
            vec!["I".to_string()],
            tol,
        )
    }

    /// Projectors onto the spans of the given vector sets.
    ///
    /// Each set is orthonormalized. When `complement` is given and the spans
    /// do not fill the target space, the orthogonal complement is appended
    /// under that label.
    pub fn from_subspaces<S: AsRef<str>>(
        space: &TensorSpace,
        targets: &[S],
        spans: Vec<Vec<CVector>>,
        labels: Vec<String>,
        complement: Option<&str>,
        tol: &Tolerances,
    ) -> Result<Self> {
        let mut matrices = Vec::with_capacity(spans.len() + 1);
        let mut labels = labels;
        let mut d = 0;
        for span in &spans {
            let q = orthonormal_span(span, tol.rank)?;
            d = q.nrows();
            matrices.push(&q * q.adjoint());
        }
        if matrices.is_empty() {
            return Err(Error::InvalidFamily("no subspaces given".into()));
        }
        if let Some(label) = complement {
            let covered = matrices
                .iter()
                .fold(CMatrix::zeros(d, d), |acc, m| acc + m);
            let rest = CMatrix::identity(d, d) - covered;
            let rank: f64 = rest.diagonal().iter().map(|z| z.re).sum();
            if rank > 0.5 {
                matrices.push(rest);
                labels.push(label.to_string());
            }
        }
        Self::new(space, targets, matrices, labels, tol)
    }

    pub fn len(&self) -> usize {
        self.projectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.projectors.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn targets(&self) -> &Fragment {
        &self.targets
    }

    pub fn projector(&self, a: usize) -> &LocalOp {
        &self.projectors[a]
    }

    pub fn projectors(&self) -> &[LocalOp] {
        &self.projectors
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

/// Orthonormal basis of the span of `vectors`, as columns.
pub(crate) fn orthonormal_span(vectors: &[CVector], rank_tol: f64) -> Result<CMatrix> {
    if vectors.is_empty() {
        return Err(Error::InvalidFamily("empty subspace".into()));
    }
    let m = CMatrix::from_columns(vectors);
    let svd = m.svd(true, false);
    let u = svd.u.expect("left singular vectors");
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return Err(Error::InvalidFamily("subspace spanned by zero vectors".into()));
    }
    let cols: Vec<CVector> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > rank_tol.max(1e-12) * smax)
        .map(|i| u.column(i).into_owned())
        .collect();
    Ok(CMatrix::from_columns(&cols))
}
