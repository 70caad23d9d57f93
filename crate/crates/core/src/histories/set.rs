use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, RwLock};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hilbert::{Bipartition, CMatrix, CVector, Fragment, QState, TensorSpace, C64};
use crate::tolerance::Tolerances;

use super::{
    enumerate_histories, BranchEnsemble, ConsistencyReport, DecoherenceMatrix, History,
    ProjectorFamily, Schedule, Segment,
};

#[derive(Clone, Debug)]
pub struct Event {
    pub time: usize,
    pub family: ProjectorFamily,
}

/// A disjoint union of fine histories, `C = Σ_α C_α`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoarseHistory {
    pub label: String,
    pub members: Vec<History>,
}

type OpCache = RwLock<HashMap<(History, usize), Arc<CMatrix>>>;
type EnsembleCache = RwLock<HashMap<usize, Arc<BranchEnsemble>>>;

/// A schedule, its events and an initial state at step 0.
pub struct HistorySet {
    schedule: Schedule,
    events: Vec<Event>,
    initial: QState,
    system: Fragment,
    tol: Tolerances,
    class_ops: OpCache,
    ensembles: EnsembleCache,
}

impl Clone for HistorySet {
    fn clone(&self) -> Self {
        Self {
            schedule: self.schedule.clone(),
            events: self.events.clone(),
            initial: self.initial.clone(),
            system: self.system.clone(),
            tol: self.tol,
            class_ops: RwLock::default(),
            ensembles: RwLock::default(),
        }
    }
}

impl fmt::Debug for HistorySet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HistorySet")
            .field("space", self.space())
            .field("horizon", &self.schedule.horizon())
            .field("event_times", &self.event_times())
            .field("pure", &self.initial.is_pure())
            .finish()
    }
}

impl HistorySet {
    pub fn new(
        schedule: Schedule,
        events: Vec<Event>,
        initial: QState,
        tol: Tolerances,
    ) -> Result<Self> {
        let space = schedule.space().clone();
        if initial.space() != &space {
            return Err(Error::InvalidState("initial state lives on a different space".into()));
        }
        if !initial.is_normalized() {
            return Err(Error::InvalidState("initial state must be normalized".into()));
        }
        let mut last: Option<usize> = None;
        for ev in &events {
            if ev.family.targets().space() != &space {
                return Err(Error::InvalidFamily(format!(
                    "family at t={} lives on a different space",
                    ev.time
                )));
            }
            if let Some(prev) = last {
                if ev.time <= prev {
                    return Err(Error::InvalidSchedule(format!(
                        "event times must increase strictly ({prev} then {})",
                        ev.time
                    )));
                }
            }
            if ev.time > schedule.horizon() {
                return Err(Error::InvalidSchedule(format!(
                    "event at t={} beyond horizon {}",
                    ev.time,
                    schedule.horizon()
                )));
            }
            last = Some(ev.time);
        }
        let system = Fragment::from_indices(&space, &[0])?;
        Ok(Self {
            schedule,
            events,
            initial,
            system,
            tol,
            class_ops: RwLock::default(),
            ensembles: RwLock::default(),
        })
    }

    /// Marks which factors form the system; the rest is environment.
    pub fn with_system(mut self, system: Fragment) -> Result<Self> {
        if system.space() != self.space() || system.is_empty() {
            return Err(Error::InvalidModel("system fragment must be nonempty and on this space".into()));
        }
        self.system = system;
        Ok(self)
    }

    pub fn with_tolerances(mut self, tol: Tolerances) -> Self {
        self.tol = tol;
        self
    }

    pub fn space(&self) -> &TensorSpace {
        self.schedule.space()
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn initial_state(&self) -> &QState {
        &self.initial
    }

    pub fn is_pure(&self) -> bool {
        self.initial.is_pure()
    }

    pub fn system(&self) -> &Fragment {
        &self.system
    }

    pub fn environment(&self) -> Fragment {
        self.system.complement()
    }

    pub fn tolerances(&self) -> &Tolerances {
        &self.tol
    }

    pub fn event_times(&self) -> Vec<usize> {
        self.events.iter().map(|e| e.time).collect()
    }

    /// `t_M`, or 0 when there are no events.
    pub fn final_time(&self) -> usize {
        self.events.last().map(|e| e.time).unwrap_or(0)
    }

    pub fn horizon(&self) -> usize {
        self.schedule.horizon()
    }

    pub fn outcome_counts(&self) -> Vec<usize> {
        self.events.iter().map(|e| e.family.len()).collect()
    }

    pub fn histories(&self) -> Vec<History> {
        enumerate_histories(&self.outcome_counts())
    }

    pub fn history_count(&self) -> usize {
        self.outcome_counts().iter().product()
    }

    pub fn validate_history(&self, alpha: &[usize]) -> Result<()> {
        if alpha.len() != self.events.len() {
            return Err(Error::InvalidHistory(format!(
                "history has {} indices for {} events",
                alpha.len(),
                self.events.len()
            )));
        }
        for (m, (&a, ev)) in alpha.iter().zip(&self.events).enumerate() {
            if a >= ev.family.len() {
                return Err(Error::InvalidHistory(format!(
                    "outcome {a} out of range at event {}",
                    m + 1
                )));
            }
        }
        Ok(())
    }

    /// Row index of `alpha` in [`HistorySet::histories`].
    pub fn history_index(&self, alpha: &[usize]) -> Result<usize> {
        self.validate_history(alpha)?;
        Ok(alpha
            .iter()
            .zip(&self.events)
            .fold(0, |acc, (&a, ev)| acc * ev.family.len() + a))
    }

    /// Outcome labels concatenated, or comma-joined when any label is longer
    /// than one character.
    pub fn history_label(&self, alpha: &[usize]) -> String {
        let parts: Vec<&str> = alpha
            .iter()
            .zip(&self.events)
            .map(|(&a, ev)| ev.family.labels()[a].as_str())
            .collect();
        if parts.iter().all(|p| p.chars().count() == 1) {
            parts.concat()
        } else {
            parts.join(",")
        }
    }

    pub fn history_labels(&self) -> Vec<String> {
        self.histories().iter().map(|h| self.history_label(h)).collect()
    }

    /// Parses a label produced by [`HistorySet::history_label`].
    pub fn parse_history(&self, label: &str) -> Result<History> {
        let single = self
            .events
            .iter()
            .all(|e| e.family.labels().iter().all(|l| l.chars().count() == 1));
        let parts: Vec<String> = if single {
            label.chars().map(|c| c.to_string()).collect()
        } else {
            label.split(',').map(|s| s.trim().to_string()).collect()
        };
        if parts.len() != self.events.len() {
            return Err(Error::InvalidHistory(format!("cannot parse history `{label}`")));
        }
        parts
            .iter()
            .zip(&self.events)
            .map(|(p, ev)| {
                ev.family
                    .index_of(p)
                    .ok_or_else(|| Error::InvalidHistory(format!("unknown outcome `{p}` in `{label}`")))
            })
            .collect()
    }

    pub fn check_eval_time(&self, eval_time: usize) -> Result<()> {
        if eval_time < self.final_time() {
            return Err(Error::EvalTimeBeforeLastEvent {
                eval: eval_time,
                last: self.final_time(),
            });
        }
        if eval_time > self.horizon() {
            return Err(Error::EvalTimeBeyondHorizon {
                eval: eval_time,
                horizon: self.horizon(),
            });
        }
        Ok(())
    }

    /// Keeps only events at or before `eval_time`.
    pub fn truncated(&self, eval_time: usize) -> Result<HistorySet> {
        if eval_time > self.horizon() {
            return Err(Error::EvalTimeBeyondHorizon {
                eval: eval_time,
                horizon: self.horizon(),
            });
        }
        let events = self
            .events
            .iter()
            .filter(|e| e.time <= eval_time)
            .cloned()
            .collect();
        self.with_events(events)
    }

    /// Drops the final event: `Ĉ = P^(M−1) ⋯ P^(1)`.
    pub fn without_final_event(&self) -> Result<HistorySet> {
        let mut events = self.events.clone();
        events.pop();
        self.with_events(events)
    }

    pub fn with_events(&self, events: Vec<Event>) -> Result<HistorySet> {
        HistorySet::new(
            self.schedule.clone(),
            events,
            self.initial.clone(),
            self.tol,
        )?
        .with_system(self.system.clone())
    }

    pub fn with_post_segments(&self, segments: Vec<Segment>) -> Result<HistorySet> {
        self.extended(segments, Vec::new())
    }

    /// Appends evolution segments and later events.
    pub fn extended(&self, segments: Vec<Segment>, more: Vec<Event>) -> Result<HistorySet> {
        let schedule = self.schedule.appended(segments, &self.tol)?;
        let mut events = self.events.clone();
        events.extend(more);
        HistorySet::new(schedule, events, self.initial.clone(), self.tol)?
            .with_system(self.system.clone())
    }

    /// Applies the Heisenberg-picture class operator `C_α(t)` to `v`.
    pub fn apply_class_operator(&self, alpha: &[usize], eval_time: usize, v: &CVector) -> Result<CVector> {
        self.validate_history(alpha)?;
        self.check_eval_time(eval_time)?;
        Ok(self.apply_unchecked(alpha, eval_time, v))
    }

    fn apply_unchecked(&self, alpha: &[usize], eval_time: usize, v: &CVector) -> CVector {
        let mut w = v.clone();
        let mut now = eval_time;
        for (ev, &a) in self.events.iter().zip(alpha) {
            if ev.time <= now {
                self.schedule.evolve_back(&mut w, now, ev.time);
            } else {
                self.schedule.evolve(&mut w, now, ev.time);
            }
            now = ev.time;
            ev.family.projector(a).apply_in_place(&mut w);
        }
        self.schedule.evolve(&mut w, now, eval_time);
        w
    }

    /// Dense `C_α(t)`, cached per `(α, t)`.
    pub fn class_operator(&self, alpha: &[usize], eval_time: usize) -> Result<Arc<CMatrix>> {
        self.validate_history(alpha)?;
        self.check_eval_time(eval_time)?;
        let key = (alpha.to_vec(), eval_time);
        if let Some(op) = self.class_ops.read().expect("cache lock").get(&key) {
            return Ok(op.clone());
        }
        let n = self.space().total_dim();
        let cols: Vec<CVector> = (0..n)
            .into_par_iter()
            .map(|k| {
                let mut e = CVector::zeros(n);
                e[k] = C64::new(1.0, 0.0);
                self.apply_unchecked(alpha, eval_time, &e)
            })
            .collect();
        let op = Arc::new(CMatrix::from_columns(&cols));
        self.class_ops
            .write()
            .expect("cache lock")
            .insert(key, op.clone());
        Ok(op)
    }

    /// `ρ(t) = U(0 → t) ρ⁰ U(0 → t)†` as a dense matrix.
    pub fn state_at(&self, eval_time: usize) -> CMatrix {
        let u = self.schedule.propagator(0, eval_time);
        &u * self.initial.density_matrix() * u.adjoint()
    }

    /// Branch vectors `C_α|z⟩` at `eval_time` for the eigen-ensemble of the
    /// initial state, cached per evaluation time.
    pub fn ensemble(&self, eval_time: usize) -> Result<Arc<BranchEnsemble>> {
        self.check_eval_time(eval_time)?;
        if let Some(e) = self.ensembles.read().expect("cache lock").get(&eval_time) {
            return Ok(e.clone());
        }
        let members = self.initial.ensemble(&self.tol)?;
        let per_member: Vec<(CVector, Vec<CVector>)> = members
            .par_iter()
            .map(|(_, z0)| {
                let mut level = vec![z0.clone()];
                let mut now = 0;
                for ev in &self.events {
                    for v in &mut level {
                        self.schedule.evolve(v, now, ev.time);
                    }
                    now = ev.time;
                    level = level
                        .iter()
                        .flat_map(|v| ev.family.projectors().iter().map(move |p| p.apply(v)))
                        .collect();
                }
                for v in &mut level {
                    self.schedule.evolve(v, now, eval_time);
                }
                let mut z = z0.clone();
                self.schedule.evolve(&mut z, 0, eval_time);
                (z, level)
            })
            .collect();
        let count = self.history_count();
        let mut branches: Vec<Vec<CVector>> = vec![Vec::with_capacity(members.len()); count];
        let mut states = Vec::with_capacity(members.len());
        for (z, level) in per_member {
            states.push(z);
            for (i, b) in level.into_iter().enumerate() {
                branches[i].push(b);
            }
        }
        let ens = Arc::new(BranchEnsemble::from_parts(
            self.space(),
            eval_time,
            self.histories(),
            self.history_labels(),
            members.iter().map(|(w, _)| *w).collect(),
            states,
            branches,
            self.initial.is_pure(),
        ));
        self.ensembles
            .write()
            .expect("cache lock")
            .insert(eval_time, ens.clone());
        Ok(ens)
    }

    /// `C_α|ψ⟩` at `eval_time`, flagged unnormalized.
    pub fn branch_state(&self, alpha: &[usize], eval_time: usize) -> Result<QState> {
        if !self.is_pure() {
            return Err(Error::RequiresPureState);
        }
        let i = self.history_index(alpha)?;
        let ens = self.ensemble(eval_time)?;
        QState::unnormalized_vector(self.space(), ens.branches(i)[0].clone())
    }

    pub fn decoherence_functional(&self, eval_time: usize) -> Result<DecoherenceMatrix> {
        Ok(self.ensemble(eval_time)?.decoherence_matrix())
    }

    /// `Tr[C_α ρ(t) C_β†]` from cached dense class operators.
    ///
    /// Quadratic memory in the total dimension; meant for small spaces and
    /// cross-checks.
    pub fn decoherence_functional_dense(&self, eval_time: usize) -> Result<DecoherenceMatrix> {
        self.check_eval_time(eval_time)?;
        let rho = self.state_at(eval_time);
        let hist = self.histories();
        let ops = hist
            .iter()
            .map(|h| self.class_operator(h, eval_time))
            .collect::<Result<Vec<_>>>()?;
        let left: Vec<CMatrix> = ops.iter().map(|c| c.as_ref() * &rho).collect();
        let n = hist.len();
        let entries = CMatrix::from_fn(n, n, |i, j| {
            left[i]
                .iter()
                .zip(ops[j].iter())
                .map(|(a, b)| a * b.conj())
                .sum()
        });
        Ok(DecoherenceMatrix::new(self.history_labels(), entries, eval_time))
    }

    /// `p_α` at the final event time.
    pub fn probability(&self, alpha: &[usize]) -> Result<f64> {
        let i = self.history_index(alpha)?;
        Ok(self.ensemble(self.final_time())?.probability(i))
    }

    pub fn consistency_factor(&self, alpha: &[usize], beta: &[usize]) -> Result<C64> {
        let i = self.history_index(alpha)?;
        let j = self.history_index(beta)?;
        let ens = self.ensemble(self.final_time())?;
        for (k, h) in [(i, alpha), (j, beta)] {
            if ens.probability(k) < self.tol.zero_probability {
                return Err(Error::ZeroProbability(self.history_label(h)));
            }
        }
        Ok(ens.overlap(i, j) / (ens.probability(i) * ens.probability(j)).sqrt())
    }

    pub fn check_consistency(&self, epsilon: f64) -> Result<ConsistencyReport> {
        Ok(self
            .decoherence_functional(self.final_time())?
            .check_consistency(epsilon, &self.tol))
    }

    pub fn coarse_grain(&self, members: Vec<History>) -> Result<CoarseHistory> {
        let mut seen = Vec::with_capacity(members.len());
        for h in &members {
            self.validate_history(h)?;
            if seen.contains(h) {
                return Err(Error::OverlappingCoarseGraining(self.history_label(h)));
            }
            seen.push(h.clone());
        }
        let label = members
            .iter()
            .map(|h| self.history_label(h))
            .collect::<Vec<_>>()
            .join("|");
        Ok(CoarseHistory { label, members })
    }

    /// Groups histories by all but the final outcome.
    pub fn coarse_over_final(&self) -> Result<Vec<CoarseHistory>> {
        if self.events.is_empty() {
            return Err(Error::InvalidHistory("no events to coarse-grain over".into()));
        }
        let last = self.events.last().unwrap().family.len();
        let hatted = self.without_final_event()?;
        Ok(hatted
            .histories()
            .into_iter()
            .map(|prefix| {
                let members = (0..last)
                    .map(|a| {
                        let mut h = prefix.clone();
                        h.push(a);
                        h
                    })
                    .collect();
                CoarseHistory {
                    label: hatted.history_label(&prefix),
                    members,
                }
            })
            .collect())
    }

    /// Ensemble of summed branches for mutually disjoint coarse histories.
    pub fn coarse_ensemble(&self, coarse: &[CoarseHistory], eval_time: usize) -> Result<BranchEnsemble> {
        let mut groups = Vec::with_capacity(coarse.len());
        let mut used = vec![false; self.history_count()];
        for c in coarse {
            let mut g = Vec::with_capacity(c.members.len());
            for h in &c.members {
                let i = self.history_index(h)?;
                if used[i] {
                    return Err(Error::OverlappingCoarseGraining(self.history_label(h)));
                }
                used[i] = true;
                g.push(i);
            }
            groups.push(g);
        }
        let labels = coarse.iter().map(|c| c.label.clone()).collect();
        Ok(self.ensemble(eval_time)?.coarse(&groups, labels))
    }

    pub fn coarse_probability(&self, coarse: &CoarseHistory, eval_time: usize) -> Result<f64> {
        Ok(self
            .coarse_ensemble(std::slice::from_ref(coarse), eval_time)?
            .probability(0))
    }

    /// Dense `Σ_α C_α(t)` over the members.
    pub fn coarse_class_operator(&self, coarse: &CoarseHistory, eval_time: usize) -> Result<CMatrix> {
        let n = self.space().total_dim();
        let mut sum = CMatrix::zeros(n, n);
        for h in &coarse.members {
            sum += self.class_operator(h, eval_time)?.as_ref();
        }
        Ok(sum)
    }

    /// `ρ_α^K = Tr_{K̄}[C_α ρ C_α†] / p_α`.
    pub fn conditional_state(&self, alpha: &[usize], keep: &Fragment, eval_time: usize) -> Result<QState> {
        let i = self.history_index(alpha)?;
        let ens = self.ensemble(eval_time)?;
        let p = ens.probability(i);
        if p < self.tol.zero_probability {
            return Err(Error::ZeroProbability(self.history_label(alpha)));
        }
        if keep.is_empty() {
            return Err(Error::ShapeMismatch("cannot keep an empty fragment".into()));
        }
        let bp = Bipartition::new(keep);
        let m = ens.conditional_unnormalized(i, &bp) / C64::new(p, 0.0);
        QState::mixed(&keep.as_space()?, m, &self.tol)
    }
}
