use crate::error::Result;
use crate::hilbert::Bipartition;
use crate::models::random::{random_history_set, seeded, RandomSetConfig};
use crate::models::{
    build_appendix_alternate_set, build_cnot_model, build_mixed_record_counterexample,
    AppendixKind, CnotModelConfig, MixedRecordVariant,
};
use crate::ptrace::{check_pt_consistency, detect_records, fidelity_identity_check, pt_decoherence_functional};
use crate::redundancy::{redundancy_count, RedundancyOptions};
use crate::tolerance::Tolerances;

pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, f: impl FnOnce() -> Result<(bool, String)>) -> Check {
    match f() {
        Ok((passed, detail)) => Check { name, passed, detail },
        Err(e) => Check {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

/// A quick pass over the main invariants on small instances.
pub fn selftest() -> Vec<Check> {
    let tol = Tolerances::default();
    vec![
        check("cnot_uniform_probabilities", || {
            let m = build_cnot_model(&CnotModelConfig::pure(3, 3), &tol)?;
            let d = m.histories.decoherence_functional(6)?;
            let dev = d.probabilities().iter().map(|p| (p - 0.125).abs()).fold(0.0, f64::max);
            let off = d.max_offdiag();
            Ok((d.len() == 8 && dev < 1e-12 && off < 1e-12, format!("max |p-1/8| {dev:e}, max offdiag {off:e}")))
        }),
        check("cnot_redundancy", || {
            let m = build_cnot_model(&CnotModelConfig::pure(3, 3), &tol)?;
            let r = redundancy_count(&m.histories, 6, &RedundancyOptions::default())?;
            Ok((r.count == 3, format!("count {}", r.count)))
        }),
        check("mixed_record_fidelity", || {
            let mut worst = 0.0f64;
            for p0 in [0.5, 0.6, 0.7, 0.9] {
                for n in 1..=3 {
                    let m = build_cnot_model(&CnotModelConfig::mixed(1, n, p0), &tol)?;
                    let e1 = m.histories.space().fragment(&m.subenvs[0])?;
                    let c = detect_records(&m.histories, &e1, 2, 0.0)?;
                    let expect = (2.0 * (p0 * (1.0 - p0)).sqrt()).powi(n as i32);
                    worst = worst.max((c.worst_fidelity - expect).abs());
                }
            }
            Ok((worst < 1e-10, format!("max deviation {worst:e}")))
        }),
        check("fidelity_identity_random", || {
            let mut rng = seeded(1);
            let mut worst = 0.0f64;
            for k in 0..20 {
                let cfg = RandomSetConfig { qubits: 2 + k % 3, events: 1 + k % 2, outcomes: 2, pure: true, slack: 1 };
                let hs = random_history_set(&cfg, &mut rng, &tol)?;
                let t = hs.horizon();
                let cut = hs.space().fragment(&["q0"])?;
                let hist = hs.histories();
                for a in &hist {
                    for b in &hist {
                        if hs.probability(a)? > 1e-8 && hs.probability(b)? > 1e-8 {
                            worst = worst.max(fidelity_identity_check(&hs, &cut, a, b, t)?.gap);
                        }
                    }
                }
            }
            Ok((worst < 1e-10, format!("max gap {worst:e}")))
        }),
        check("partial_trace_relations", || {
            let mut rng = seeded(2);
            let mut worst = 0.0f64;
            for k in 0..10 {
                let cfg = RandomSetConfig { qubits: 3, events: 2, outcomes: 2, pure: k % 2 == 0, slack: 1 };
                let hs = random_history_set(&cfg, &mut rng, &tol)?;
                let t = hs.horizon();
                let traced = hs.space().fragment(&["q1"])?;
                let d = pt_decoherence_functional(&hs, &traced, t)?;
                let reduced = hs.ensemble(t)?.reduced_state(&Bipartition::new(&traced.complement()));
                worst = worst
                    .max(d.trace_defect(&hs.decoherence_functional(t)?))
                    .max(d.adjoint_defect())
                    .max(d.sum_defect(&reduced));
            }
            Ok((worst < 1e-10, format!("max defect {worst:e}")))
        }),
        check("appendix_consistency", || {
            let ab = build_appendix_alternate_set(AppendixKind::Abwxyz, 1, &tol)?;
            let th = build_appendix_alternate_set(AppendixKind::ThetaPhi { theta: 0.4, phi: 0.4 }, 1, &tol)?;
            let a = ab.histories.check_consistency(1e-9)?.consistent;
            let b = th.histories.check_consistency(1e-9)?.consistent;
            let env = th.histories.environment();
            let e = check_pt_consistency(&th.histories, &env, 4, 1e-9)?.consistent;
            Ok((a && b && e, format!("abwxyz {a}, theta {b}, theta E-consistent {e}")))
        }),
        check("mixed_environment_without_record", || {
            let hs = build_mixed_record_counterexample(MixedRecordVariant::Mixed, &tol)?;
            let e = hs.space().fragment(&["E"])?;
            let consistent = check_pt_consistency(&hs, &e, 1, 1e-9)?.consistent;
            let f = detect_records(&hs, &e, 1, 0.0)?.worst_fidelity;
            Ok((consistent && (f - 1.0).abs() < 1e-10, format!("E-consistent {consistent}, fidelity {f}")))
        }),
        check("cached_operators_match_branches", || {
            let mut rng = seeded(3);
            let mut worst = 0.0f64;
            for k in 0..10 {
                let cfg = RandomSetConfig { qubits: 1 + k % 3, events: 2, outcomes: 2, pure: k % 2 == 1, slack: 1 };
                let hs = random_history_set(&cfg, &mut rng, &tol)?;
                let t = hs.horizon();
                let a = hs.decoherence_functional(t)?;
                let b = hs.decoherence_functional_dense(t)?;
                worst = worst.max((a.entries() - b.entries()).iter().map(|z| z.norm()).fold(0.0, f64::max));
            }
            Ok((worst < 1e-12, format!("max difference {worst:e}")))
        }),
    ]
}
