use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{cr, CMatrix, CVector, LocalOp, Payload, QState, TensorSpace};
use crate::histories::{Event, HistorySet, ProjectorFamily, Schedule, Segment};
use crate::tolerance::Tolerances;

use super::gates::{cnot, diag, hadamard};

/// Initial state of every environment spin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvInit {
    /// `|0⟩`
    Pure,
    /// `diag(p0, 1 − p0)`
    Mixed { p0: f64 },
}

/// Where the pointer projectors sit relative to each branching step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventPlacement {
    /// After the sub-environment has copied the pointer state (`t = 2m`).
    #[default]
    AfterRecording,
    /// Right after the Hadamard, before recording (`t = 2m − 1`).
    AfterBranching,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CnotModelConfig {
    /// Spins in each sub-environment; its length is the number of branching
    /// events.
    pub spins_per_subenv: Vec<usize>,
    pub env_init: EnvInit,
    /// Purify mixed spins with one auxiliary spin each (labels `X{m}_{k}`).
    #[serde(default)]
    pub purify: bool,
    #[serde(default)]
    pub placement: EventPlacement,
}

impl CnotModelConfig {
    pub fn pure(branchings: usize, spins: usize) -> Self {
        Self {
            spins_per_subenv: vec![spins; branchings],
            env_init: EnvInit::Pure,
            purify: false,
            placement: EventPlacement::AfterRecording,
        }
    }

    pub fn mixed(branchings: usize, spins: usize, p0: f64) -> Self {
        Self {
            env_init: EnvInit::Mixed { p0 },
            ..Self::pure(branchings, spins)
        }
    }

    pub fn branchings(&self) -> usize {
        self.spins_per_subenv.len()
    }
}

#[derive(Clone, Debug)]
pub struct CnotModel {
    pub histories: HistorySet,
    /// Labels of the spins of `E_1, …, E_M`.
    pub subenvs: Vec<Vec<String>>,
    /// Purifier labels per sub-environment, empty unless purified.
    pub purifiers: Vec<Vec<String>>,
    pub config: CnotModelConfig,
}

impl CnotModel {
    pub fn environment_labels(&self) -> Vec<String> {
        self.subenvs.iter().flatten().cloned().collect()
    }

    /// One spin from each sub-environment, taking the `k`-th of each.
    pub fn transversal_fragment(&self, k: usize) -> Vec<String> {
        self.subenvs.iter().map(|e| e[k].clone()).collect()
    }
}

pub fn subenv_label(m: usize, k: usize) -> String {
    format!("E{m}_{k}")
}

pub fn purifier_label(m: usize, k: usize) -> String {
    format!("X{m}_{k}")
}

/// The system qubit `S` alternately branched by a Hadamard and copied by
/// CNOTs into successive sub-environments.
pub fn build_cnot_model(cfg: &CnotModelConfig, tol: &Tolerances) -> Result<CnotModel> {
    let m_total = cfg.branchings();
    if m_total == 0 {
        return Err(Error::InvalidModel("at least one branching event is required".into()));
    }
    if cfg.spins_per_subenv.contains(&0) {
        return Err(Error::InvalidModel("every sub-environment needs at least one spin".into()));
    }
    let p0 = match cfg.env_init {
        EnvInit::Pure => 1.0,
        EnvInit::Mixed { p0 } => {
            if !(0.0..=1.0).contains(&p0) {
                return Err(Error::InvalidModel(format!("p0 = {p0} is not a probability")));
            }
            p0
        }
    };
    let subenvs: Vec<Vec<String>> = cfg
        .spins_per_subenv
        .iter()
        .enumerate()
        .map(|(m, &n)| (1..=n).map(|k| subenv_label(m + 1, k)).collect())
        .collect();
    let purifiers: Vec<Vec<String>> = if cfg.purify {
        cfg.spins_per_subenv
            .iter()
            .enumerate()
            .map(|(m, &n)| (1..=n).map(|k| purifier_label(m + 1, k)).collect())
            .collect()
    } else {
        vec![Vec::new(); m_total]
    };
    let mut labels = vec!["S".to_string()];
    labels.extend(subenvs.iter().flatten().cloned());
    labels.extend(purifiers.iter().flatten().cloned());
    let space = TensorSpace::qubits(&labels)?;

    let n_env: usize = cfg.spins_per_subenv.iter().sum();
    let initial = if matches!(cfg.env_init, EnvInit::Mixed { .. }) && !cfg.purify {
        let mut parts = vec![Payload::Vector(CVector::from_vec(vec![cr(1.0), cr(0.0)]))];
        parts.extend((0..n_env).map(|_| Payload::Matrix(diag(&[p0, 1.0 - p0]))));
        QState::product(&space, &parts, tol)?
    } else {
        // Σ_e Π_k √p_{e_k} |0⟩_S |e⟩_E (|e⟩_X when purified)
        let amps = [p0.sqrt(), (1.0 - p0).sqrt()];
        let mut psi = CVector::zeros(space.total_dim());
        for e_bits in 0..(1usize << n_env) {
            let bits: Vec<usize> = (0..n_env).rev().map(|k| (e_bits >> k) & 1).collect();
            let amp: f64 = bits.iter().map(|&b| amps[b]).product();
            if amp == 0.0 {
                continue;
            }
            let mut digits = vec![0usize];
            digits.extend(&bits);
            if cfg.purify {
                digits.extend(&bits);
            }
            psi[space.index_from_digits(&digits)?] = cr(amp);
        }
        QState::pure(&space, psi, tol)?
    };

    let mut segments: Vec<Segment> = Vec::with_capacity(2 * m_total);
    for spins in &subenvs {
        segments.push(vec![LocalOp::new(&space, &["S"], hadamard())?]);
        let recording = spins
            .iter()
            .map(|k| LocalOp::new(&space, &["S", k.as_str()], cnot()))
            .collect::<Result<Vec<_>>>()?;
        segments.push(recording);
    }
    let schedule = Schedule::new(&space, segments, tol)?;
    let pointer = ProjectorFamily::pointer(&space, "S", tol)?;
    let events = (1..=m_total)
        .map(|m| Event {
            time: match cfg.placement {
                EventPlacement::AfterRecording => 2 * m,
                EventPlacement::AfterBranching => 2 * m - 1,
            },
            family: pointer.clone(),
        })
        .collect();
    let histories = HistorySet::new(schedule, events, initial, *tol)?;
    Ok(CnotModel {
        histories,
        subenvs,
        purifiers,
        config: cfg.clone(),
    })
}

/// Amplitude of the branch `α` in the pure model: `2^{−M/2}` times a sign
/// `(−1)` for every consecutive pair `a_{m−1} = a_m = 1` (with `a_0 = 0`).
pub fn branch_amplitude(alpha: &[usize]) -> f64 {
    let mut prev = 0;
    let mut sign = 1.0;
    for &a in alpha {
        if prev == 1 && a == 1 {
            sign = -sign;
        }
        prev = a;
    }
    sign * 0.5f64.powf(alpha.len() as f64 / 2.0)
}

/// Expected pure-model branch `amp(α) |a_M⟩_S |α⟩_E` as a global vector.
pub fn expected_branch(model: &CnotModel, alpha: &[usize]) -> Result<CVector> {
    let space = model.histories.space();
    let mut digits = vec![0usize; space.len()];
    digits[0] = *alpha.last().unwrap_or(&0);
    for (m, spins) in model.subenvs.iter().enumerate() {
        for k in spins {
            digits[space.index_of(k)?] = alpha[m];
        }
    }
    let mut v = CVector::zeros(space.total_dim());
    v[space.index_from_digits(&digits)?] = cr(branch_amplitude(alpha));
    Ok(v)
}

/// Dense `U(0 → t)` for the model, handy for cross-checks.
pub fn model_propagator(model: &CnotModel, t: usize) -> CMatrix {
    model.histories.schedule().propagator(0, t)
}
