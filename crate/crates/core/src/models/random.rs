//! Seeded random instances for property tests and probes.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::hilbert::{cr, CMatrix, CVector, LocalOp, QState, TensorSpace, C64};
use crate::histories::{Event, HistorySet, ProjectorFamily, Schedule};
use crate::tolerance::Tolerances;

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian<R: Rng>(rng: &mut R) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Haar-distributed unitary via QR of a complex Ginibre matrix.
pub fn haar_unitary<R: Rng>(d: usize, rng: &mut R) -> CMatrix {
    let g = CMatrix::from_fn(d, d, |_, _| gaussian(rng));
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    let mut u = q;
    for k in 0..d {
        let rkk = r[(k, k)];
        let phase = if rkk.norm() > 0.0 { rkk / rkk.norm() } else { cr(1.0) };
        let mut col = u.column_mut(k);
        col *= phase;
    }
    u
}

pub fn random_pure_vector<R: Rng>(d: usize, rng: &mut R) -> CVector {
    let v = CVector::from_fn(d, |_, _| gaussian(rng));
    let n = v.norm();
    v / cr(n)
}

/// Random density matrix of the given rank (`G G† / Tr`).
pub fn random_density<R: Rng>(d: usize, rank: usize, rng: &mut R) -> CMatrix {
    let g = CMatrix::from_fn(d, rank.max(1), |_, _| gaussian(rng));
    let m = &g * g.adjoint();
    let tr: f64 = m.diagonal().iter().map(|z| z.re).sum();
    m / cr(tr)
}

/// Random complete family on `targets` with `outcomes` projectors of random
/// nonzero rank.
pub fn random_family<R: Rng, S: AsRef<str>>(
    space: &TensorSpace,
    targets: &[S],
    outcomes: usize,
    rng: &mut R,
    tol: &Tolerances,
) -> Result<ProjectorFamily> {
    let d: usize = targets
        .iter()
        .map(|t| space.index_of(t.as_ref()).map(|i| space.dims()[i]))
        .product::<Result<usize>>()?;
    if outcomes == 0 || outcomes > d {
        return Err(Error::InvalidFamily(format!("{outcomes} outcomes on dimension {d}")));
    }
    let u = haar_unitary(d, rng);
    // every outcome gets one column, the rest are dealt at random
    let mut owner: Vec<usize> = (0..outcomes).collect();
    owner.extend((outcomes..d).map(|_| rng.random_range(0..outcomes)));
    owner.shuffle(rng);
    let matrices = (0..outcomes)
        .map(|a| {
            let mut p = CMatrix::zeros(d, d);
            for (k, _) in owner.iter().enumerate().filter(|(_, &o)| o == a) {
                let col = u.column(k);
                p += col * col.adjoint();
            }
            p
        })
        .collect();
    let labels = (0..outcomes).map(|a| a.to_string()).collect();
    ProjectorFamily::new(space, targets, matrices, labels, tol)
}

#[derive(Clone, Copy, Debug)]
pub struct RandomSetConfig {
    pub qubits: usize,
    pub events: usize,
    pub outcomes: usize,
    pub pure: bool,
    /// Extra idle-or-unitary segments beyond the minimum needed for events.
    pub slack: usize,
}

/// Random qubit history set: Haar segment unitaries on the whole space,
/// families on random qubit subsets, random strictly increasing event times.
pub fn random_history_set<R: Rng>(cfg: &RandomSetConfig, rng: &mut R, tol: &Tolerances) -> Result<HistorySet> {
    let labels: Vec<String> = (0..cfg.qubits).map(|q| format!("q{q}")).collect();
    let space = TensorSpace::qubits(&labels)?;
    let n = space.total_dim();
    let horizon = cfg.events + cfg.slack;
    let segments = (0..horizon)
        .map(|_| Ok(vec![LocalOp::global(&space, haar_unitary(n, rng))?]))
        .collect::<Result<Vec<_>>>()?;
    let schedule = Schedule::new(&space, segments, tol)?;
    let mut times: Vec<usize> = (0..=horizon).collect();
    times.shuffle(rng);
    let mut times: Vec<usize> = times.into_iter().take(cfg.events).collect();
    times.sort_unstable();
    let mut events = Vec::with_capacity(cfg.events);
    for t in times {
        let mut targets = labels.clone();
        targets.shuffle(rng);
        let k = rng.random_range(1..=cfg.qubits);
        targets.truncate(k);
        let outcomes = cfg.outcomes.min(1 << k);
        events.push(Event {
            time: t,
            family: random_family(&space, &targets, outcomes, rng, tol)?,
        });
    }
    let initial = if cfg.pure {
        QState::pure(&space, random_pure_vector(n, rng), tol)?
    } else {
        let rank = rng.random_range(1..=n);
        QState::mixed(&space, random_density(n, rank, rng), tol)?
    };
    HistorySet::new(schedule, events, initial, *tol)
}
