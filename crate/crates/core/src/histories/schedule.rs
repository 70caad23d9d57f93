use crate::error::{Error, Result};
use crate::hilbert::{CMatrix, CVector, LocalOp, TensorSpace};
use crate::tolerance::Tolerances;

/// The unitary for one time step, as gates applied left to right.
pub type Segment = Vec<LocalOp>;

/// Unitary evolution over integer steps `0..=horizon`.
#[derive(Clone, Debug)]
pub struct Schedule {
    space: TensorSpace,
    segments: Vec<Segment>,
}

impl Schedule {
    pub fn new(space: &TensorSpace, segments: Vec<Segment>, tol: &Tolerances) -> Result<Self> {
        for (k, seg) in segments.iter().enumerate() {
            for op in seg {
                if op.space() != space {
                    return Err(Error::InvalidSchedule(format!(
                        "segment {k} has a gate on a different space"
                    )));
                }
                let defect = op.unitary_defect();
                if defect > tol.ortho {
                    return Err(Error::NotUnitary(defect));
                }
            }
        }
        Ok(Self {
            space: space.clone(),
            segments,
        })
    }

    /// A schedule of `steps` identity segments.
    pub fn idle(space: &TensorSpace, steps: usize) -> Self {
        Self {
            space: space.clone(),
            segments: vec![Vec::new(); steps],
        }
    }

    pub fn space(&self) -> &TensorSpace {
        &self.space
    }

    pub fn horizon(&self) -> usize {
        self.segments.len()
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn appended(&self, more: Vec<Segment>, tol: &Tolerances) -> Result<Self> {
        let mut segments = self.segments.clone();
        segments.extend(more);
        Self::new(&self.space, segments, tol)
    }

    /// `U(from → to) v` for `from ≤ to`.
    pub fn evolve(&self, v: &mut CVector, from: usize, to: usize) {
        for seg in &self.segments[from..to] {
            for op in seg {
                op.apply_in_place(v);
            }
        }
    }

    /// `U(to → from)† v` for `from ≥ to`.
    pub fn evolve_back(&self, v: &mut CVector, from: usize, to: usize) {
        for seg in self.segments[to..from].iter().rev() {
            for op in seg.iter().rev() {
                op.adjoint().apply_in_place(v);
            }
        }
    }

    /// Dense propagator `U(from → to)`.
    pub fn propagator(&self, from: usize, to: usize) -> CMatrix {
        let n = self.space.total_dim();
        let mut u = CMatrix::identity(n, n);
        for seg in &self.segments[from..to] {
            for op in seg {
                u = op.left_mul(&u);
            }
        }
        u
    }
}
