use crate::error::{Error, Result};
use crate::hilbert::{kron_all, trace, unitary_defect, CMatrix, CVector, LocalOp, Payload, QState, TensorSpace, C64};
use crate::histories::{Event, HistorySet, ProjectorFamily, Schedule};
use crate::tolerance::Tolerances;

use super::gates::controlled;

/// One non-interacting environment component.
#[derive(Clone, Debug)]
pub struct EnvComponent {
    pub label: String,
    /// `U_s^k`, one per pointer state.
    pub unitaries: Vec<CMatrix>,
    /// `ρ^{k,0}` (a vector is a pure state).
    pub init: Payload,
}

#[derive(Clone, Debug)]
pub struct PureDecoherenceModel {
    pub histories: HistorySet,
    pub amplitudes: Vec<C64>,
    pub components: Vec<EnvComponent>,
}

fn init_matrix(p: &Payload) -> CMatrix {
    match p {
        Payload::Vector(v) => v * v.adjoint(),
        Payload::Matrix(m) => m.clone(),
    }
}

/// `S` in `Σ_s c_s|s⟩` coupled by `Σ_s |s⟩⟨s| ⊗ U_s^k` to each component,
/// followed by pointer projectors on `S`.
pub fn build_pure_decoherence_model(
    amplitudes: &[C64],
    components: Vec<EnvComponent>,
    tol: &Tolerances,
) -> Result<PureDecoherenceModel> {
    let pointer_dim = amplitudes.len();
    if pointer_dim == 0 || components.is_empty() {
        return Err(Error::InvalidModel("need a pointer basis and at least one component".into()));
    }
    let mut factors = vec![("S".to_string(), pointer_dim)];
    for c in &components {
        if c.unitaries.len() != pointer_dim {
            return Err(Error::InvalidModel(format!(
                "component `{}` has {} unitaries for {pointer_dim} pointer states",
                c.label,
                c.unitaries.len()
            )));
        }
        let d = c.unitaries[0].nrows();
        for u in &c.unitaries {
            if u.nrows() != d || u.ncols() != d {
                return Err(Error::InvalidModel(format!("component `{}` has mismatched unitaries", c.label)));
            }
            let defect = unitary_defect(u);
            if defect > tol.ortho {
                return Err(Error::NotUnitary(defect));
            }
        }
        factors.push((c.label.clone(), d));
    }
    let space = TensorSpace::new(factors)?;
    let system = QState::pure_normalized(
        &TensorSpace::new([("S", pointer_dim)])?,
        CVector::from_column_slice(amplitudes),
    )?;
    let mut parts = vec![system.payload().clone()];
    parts.extend(components.iter().map(|c| c.init.clone()));
    let initial = QState::product(&space, &parts, tol)?;
    let segment = components
        .iter()
        .map(|c| LocalOp::new(&space, &["S", c.label.as_str()], controlled(&c.unitaries)))
        .collect::<Result<Vec<_>>>()?;
    let schedule = Schedule::new(&space, vec![segment], tol)?;
    let events = vec![Event {
        time: 1,
        family: ProjectorFamily::pointer(&space, "S", tol)?,
    }];
    let histories = HistorySet::new(schedule, events, initial, *tol)?;
    let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    Ok(PureDecoherenceModel {
        histories,
        amplitudes: amplitudes.iter().map(|a| a / norm).collect(),
        components,
    })
}

impl PureDecoherenceModel {
    /// `Γ_{ss′} = Tr[U_s ρ^{E,0} U_{s′}†]` from the full environment
    /// operators.
    pub fn decoherence_factor(&self, s: usize, s2: usize) -> C64 {
        let us = kron_all(&self.components.iter().map(|c| c.unitaries[s].clone()).collect::<Vec<_>>());
        let ut = kron_all(&self.components.iter().map(|c| c.unitaries[s2].clone()).collect::<Vec<_>>());
        let rho = kron_all(&self.components.iter().map(|c| init_matrix(&c.init)).collect::<Vec<_>>());
        trace(&(us * rho * ut.adjoint()))
    }

    /// `Γ^F_{ss′}` as a product over the components named in `fragment`.
    pub fn fragment_decoherence_factor<S: AsRef<str>>(&self, fragment: &[S], s: usize, s2: usize) -> Result<C64> {
        let mut g = C64::new(1.0, 0.0);
        for name in fragment {
            let c = self
                .components
                .iter()
                .find(|c| c.label == name.as_ref())
                .ok_or_else(|| Error::UnknownLabel(name.as_ref().to_string()))?;
            let rho = init_matrix(&c.init);
            g *= trace(&(&c.unitaries[s] * rho * c.unitaries[s2].adjoint()));
        }
        Ok(g)
    }

    pub fn component_labels(&self) -> Vec<String> {
        self.components.iter().map(|c| c.label.clone()).collect()
    }
}
