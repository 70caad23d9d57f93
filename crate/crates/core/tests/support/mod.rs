//! Reference implementations shared by the integration targets. Nothing here
//! calls the library's evolution or trace code; operators are rebuilt from raw
//! gate matrices and contracted densely.

#![allow(dead_code)]

use histcon::hilbert::LocalOp;
use histcon::{CMatrix, HistorySet, C64};

/// Embeds a gate into the full space by comparing basis digits.
pub fn embed(op: &LocalOp, dims: &[usize]) -> CMatrix {
    let n: usize = dims.iter().product();
    let targets = op.targets().indices().to_vec();
    let digits = |mut k: usize| {
        let mut d = vec![0; dims.len()];
        for f in (0..dims.len()).rev() {
            d[f] = k % dims[f];
            k /= dims[f];
        }
        d
    };
    let local = |d: &[usize]| targets.iter().fold(0, |acc, &t| acc * dims[t] + d[t]);
    let m = op.matrix();
    CMatrix::from_fn(n, n, |r, c| {
        let (dr, dc) = (digits(r), digits(c));
        let spectators_agree = (0..dims.len())
            .filter(|f| !targets.contains(f))
            .all(|f| dr[f] == dc[f]);
        if spectators_agree {
            m[(local(&dr), local(&dc))]
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

/// Dense step unitaries, gates applied left to right.
pub fn step_unitaries(hs: &HistorySet) -> Vec<CMatrix> {
    let dims = hs.space().dims().to_vec();
    let n: usize = dims.iter().product();
    hs.schedule()
        .segments()
        .iter()
        .map(|seg| {
            seg.iter()
                .fold(CMatrix::identity(n, n), |acc, g| embed(g, &dims) * acc)
        })
        .collect()
}

fn evolve_steps(steps: &[CMatrix], from: usize, to: usize, n: usize) -> CMatrix {
    (from..to).fold(CMatrix::identity(n, n), |acc, k| &steps[k] * acc)
}

/// Schrödinger-picture chain `U(t_M → t) P_{α_M} ⋯ P_{α_1} U(0 → t_1)`.
pub fn chain(hs: &HistorySet, steps: &[CMatrix], alpha: &[usize], eval_time: usize) -> CMatrix {
    let dims = hs.space().dims().to_vec();
    let n: usize = dims.iter().product();
    let mut k = CMatrix::identity(n, n);
    let mut now = 0;
    for (ev, &a) in hs.events().iter().zip(alpha) {
        k = evolve_steps(steps, now, ev.time, n) * k;
        k = embed(ev.family.projector(a), &dims) * k;
        now = ev.time;
    }
    evolve_steps(steps, now, eval_time, n) * k
}

/// `D(α, β) = Tr[K_α ρ K_β†]` over all history pairs.
pub fn oracle_functional(hs: &HistorySet, eval_time: usize) -> CMatrix {
    let steps = step_unitaries(hs);
    let rho = hs.initial_state().density_matrix();
    let chains: Vec<CMatrix> = hs
        .histories()
        .iter()
        .map(|h| chain(hs, &steps, h, eval_time))
        .collect();
    let m = chains.len();
    CMatrix::from_fn(m, m, |i, j| (&chains[i] * &rho * chains[j].adjoint()).trace())
}

/// Partial trace of a dense operator over the factors not in `keep`.
pub fn partial_trace(m: &CMatrix, dims: &[usize], keep: &[usize]) -> CMatrix {
    let n: usize = dims.iter().product();
    let dk: usize = keep.iter().map(|&k| dims[k]).product();
    let digits = |mut k: usize| {
        let mut d = vec![0; dims.len()];
        for f in (0..dims.len()).rev() {
            d[f] = k % dims[f];
            k /= dims[f];
        }
        d
    };
    let local = |d: &[usize]| keep.iter().fold(0, |acc, &t| acc * dims[t] + d[t]);
    let mut out = CMatrix::zeros(dk, dk);
    for r in 0..n {
        let dr = digits(r);
        for c in 0..n {
            let dc = digits(c);
            let traced_agree = (0..dims.len())
                .filter(|f| !keep.contains(f))
                .all(|f| dr[f] == dc[f]);
            if traced_agree {
                out[(local(&dr), local(&dc))] += m[(r, c)];
            }
        }
    }
    out
}

/// Operator-valued functional `Tr_T[K_α ρ K_β†]` keeping `keep`.
pub fn oracle_pt_entry(hs: &HistorySet, keep: &[usize], alpha: &[usize], beta: &[usize], eval_time: usize) -> CMatrix {
    let steps = step_unitaries(hs);
    let rho = hs.initial_state().density_matrix();
    let ka = chain(hs, &steps, alpha, eval_time);
    let kb = chain(hs, &steps, beta, eval_time);
    partial_trace(&(ka * rho * kb.adjoint()), hs.space().dims(), keep)
}

/// Trace norm via eigenvalues of `A†A`.
pub fn trace_norm(m: &CMatrix) -> f64 {
    let g = m.adjoint() * m;
    g.symmetric_eigenvalues().iter().map(|&e| e.max(0.0).sqrt()).sum()
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}
