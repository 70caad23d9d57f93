//! Partial-trace decoherence functionals and records.
//!
//! Tracing over a fragment `B` of `C_α ρ C_β†` leaves an operator on the
//! complement. Its vanishing for `α ≠ β` is `B`-consistency; for a pure
//! global state this is equivalent to orthogonal conditional states on `B`,
//! that is, to a record of the history in `B`.

mod functional;
mod properties;
mod records;

pub use functional::{
    check_pt_consistency, fidelity_identity_check, pt_consistency_factor,
    pt_decoherence_functional, IdentityCheck, PtConsistencyReport, PtDecoherenceFunctional,
    PtFactor, PtPair,
};
pub use properties::{
    block_diagonal_defect, extension_defect, generalized_sum_rule_defect,
    matrix_element_bound_excess,
};
pub use records::{
    detect_records, detect_records_in, records_in_time, LevelReport, RecordCertificate,
    RecordsInTimeReport,
};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{c, trace, CMatrix, Fragment, LocalOp, Payload};
    use crate::histories::{Event, HistorySet, ProjectorFamily};
    use crate::models::gates::{cnot, ket};
    use crate::models::random::{haar_unitary, random_history_set, seeded, RandomSetConfig};
    use crate::models::{
        build_cnot_model, build_mixed_record_counterexample, build_pure_decoherence_model,
        CnotModel, CnotModelConfig, EnvComponent, EnvInit, EventPlacement, MixedRecordVariant,
    };
    use crate::tolerance::Tolerances;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn cnot_model(m: usize, spins: usize) -> CnotModel {
        build_cnot_model(&CnotModelConfig::pure(m, spins), &tol()).unwrap()
    }

    fn frag(hs: &HistorySet, labels: &[String]) -> Fragment {
        hs.space().fragment(labels).unwrap()
    }

    fn max_abs(m: &CMatrix) -> f64 {
        m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn empty_trace_gives_full_operators() {
        let model = cnot_model(2, 1);
        let hs = &model.histories;
        let t = hs.final_time();
        let d = pt_decoherence_functional(hs, &hs.space().empty_fragment(), t).unwrap();
        let rho = hs.state_at(0);
        let hist = hs.histories();
        for (i, a) in hist.iter().enumerate() {
            for (j, b) in hist.iter().enumerate() {
                let ca = hs.class_operator(a, t).unwrap();
                let cb = hs.class_operator(b, t).unwrap();
                let u = hs.schedule().propagator(0, t);
                let expect = ca.as_ref() * &u * &rho * u.adjoint() * cb.adjoint();
                assert!(max_abs(&(d.entry(i, j) - expect)) < 1e-12);
            }
        }
    }

    #[test]
    fn full_trace_is_rejected() {
        let model = cnot_model(1, 1);
        let hs = &model.histories;
        assert!(matches!(
            pt_decoherence_functional(hs, &hs.space().full(), 2),
            Err(crate::Error::FullTrace)
        ));
    }

    #[test]
    fn tracing_environment_leaves_pointer_blocks() {
        let model = cnot_model(2, 2);
        let hs = &model.histories;
        let t = hs.final_time();
        let env = frag(hs, &model.environment_labels());
        let d = pt_decoherence_functional(hs, &env, t).unwrap();
        let full = hs.decoherence_functional(t).unwrap();
        assert!(d.trace_defect(&full) < 1e-12);
        assert!(d.adjoint_defect() < 1e-12);
        let reduced = hs.ensemble(t).unwrap().reduced_state(&crate::hilbert::Bipartition::new(&env.complement()));
        assert!(d.sum_defect(&reduced) < 1e-12);
        for (i, h) in hs.histories().iter().enumerate() {
            let last = *h.last().unwrap();
            let mut expect = CMatrix::zeros(2, 2);
            expect[(last, last)] = c(d.probabilities[i], 0.0);
            assert!(max_abs(&(d.entry(i, i) - expect)) < 1e-12);
        }
        assert!(d.max_offdiag_trace_norm() < 1e-12);
    }

    #[test]
    fn partial_trace_functional_depends_on_time() {
        let mut cfg = CnotModelConfig::pure(1, 1);
        cfg.placement = EventPlacement::AfterBranching;
        let model = build_cnot_model(&cfg, &tol()).unwrap();
        let hs = &model.histories;
        let env = frag(hs, &model.environment_labels());
        let before = check_pt_consistency(hs, &env, 1, 1e-9).unwrap();
        let after = check_pt_consistency(hs, &env, 2, 1e-9).unwrap();
        assert!((before.max_trace_norm - 1.0).abs() < 1e-12);
        assert!(!before.consistent);
        assert!(after.consistent);
    }

    #[test]
    fn relations_hold_for_random_sets() {
        let mut rng = seeded(11);
        for pure in [true, false] {
            let cfg = RandomSetConfig { qubits: 3, events: 2, outcomes: 2, pure, slack: 1 };
            let hs = random_history_set(&cfg, &mut rng, &tol()).unwrap();
            let t = hs.horizon();
            let traced = hs.space().fragment(&["q1"]).unwrap();
            let d = pt_decoherence_functional(&hs, &traced, t).unwrap();
            let full = hs.decoherence_functional(t).unwrap();
            let bp = crate::hilbert::Bipartition::new(&traced.complement());
            let reduced = hs.ensemble(t).unwrap().reduced_state(&bp);
            assert!(d.trace_defect(&full) < 1e-12);
            assert!(d.adjoint_defect() < 1e-12);
            assert!(d.sum_defect(&reduced) < 1e-12);
        }
    }

    #[test]
    fn transversal_fragment_is_consistent() {
        let model = cnot_model(3, 2);
        let hs = &model.histories;
        let f = frag(hs, &model.transversal_fragment(0));
        let report = check_pt_consistency(hs, &f, hs.final_time(), 1e-9).unwrap();
        assert!(report.consistent);
        assert_eq!(report.pairs.len(), 28);
        let lacking = frag(hs, &[model.subenvs[0][0].clone(), model.subenvs[2][0].clone()]);
        let bad = check_pt_consistency(hs, &lacking, hs.final_time(), 1e-9).unwrap();
        assert!(!bad.consistent);
    }

    #[test]
    fn consistency_factor_on_diagonal_is_a_state() {
        let model = cnot_model(2, 1);
        let hs = &model.histories;
        let f = frag(hs, &model.transversal_fragment(0));
        let cf = pt_consistency_factor(hs, &f, &[1, 0], &[1, 0], hs.final_time()).unwrap();
        assert!((trace(&cf.operator) - c(1.0, 0.0)).norm() < 1e-12);
        assert!((cf.trace_norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mixed_spin_consistency_factor() {
        let p0: f64 = 0.7;
        let expected = 2.0 * (p0 * (1.0 - p0)).sqrt();
        let plain = build_cnot_model(&CnotModelConfig::mixed(1, 1, p0), &tol()).unwrap();
        let hs = &plain.histories;
        let e = frag(hs, &plain.environment_labels());
        let cf = pt_consistency_factor(hs, &e, &[0], &[1], 2).unwrap();
        assert!(cf.trace_norm < 1e-12);

        let mut cfg = CnotModelConfig::mixed(1, 1, p0);
        cfg.purify = true;
        let purified = build_cnot_model(&cfg, &tol()).unwrap();
        let hs = &purified.histories;
        let e = frag(hs, &purified.environment_labels());
        let cf = pt_consistency_factor(hs, &e, &[0], &[1], 2).unwrap();
        assert!((cf.trace_norm - expected).abs() < 1e-12);
    }

    #[test]
    fn pure_decoherence_factor_for_environment() {
        let theta: f64 = 0.9;
        let rot = CMatrix::from_fn(2, 2, |r, k| {
            let (cs, sn) = (theta.cos(), theta.sin());
            c([[cs, -sn], [sn, cs]][r][k], 0.0)
        });
        let comps = vec![
            EnvComponent {
                label: "A".into(),
                unitaries: vec![CMatrix::identity(2, 2), rot.clone()],
                init: Payload::Vector(ket(2, 0)),
            },
            EnvComponent {
                label: "B".into(),
                unitaries: vec![CMatrix::identity(2, 2), rot],
                init: Payload::Matrix(crate::models::gates::diag(&[0.8, 0.2])),
            },
        ];
        let amps = [c(0.6, 0.0), c(0.0, 0.8)];
        let model = build_pure_decoherence_model(&amps, comps, &tol()).unwrap();
        let hs = &model.histories;
        let env = frag(hs, &model.component_labels());
        let cf = pt_consistency_factor(hs, &env, &[0], &[1], 1).unwrap();
        let gamma = model.decoherence_factor(0, 1);
        let phase = amps[0] * amps[1].conj() / (amps[0].norm() * amps[1].norm());
        let mut expect = CMatrix::zeros(2, 2);
        expect[(0, 1)] = gamma * phase;
        assert!(max_abs(&(cf.operator - expect)) < 1e-12);
        assert!((cf.trace_norm - gamma.norm()).abs() < 1e-12);
    }

    #[test]
    fn fidelity_identity_examples() {
        let model = cnot_model(2, 2);
        let hs = &model.histories;
        let f = frag(hs, &model.transversal_fragment(1));
        let same = fidelity_identity_check(hs, &f, &[0, 1], &[0, 1], 4).unwrap();
        assert!((same.lhs - 1.0).abs() < 1e-10 && (same.rhs - 1.0).abs() < 1e-10);
        let diff = fidelity_identity_check(hs, &f, &[0, 1], &[1, 1], 4).unwrap();
        assert!(diff.lhs < 1e-10 && diff.rhs < 1e-10);

        let mut rng = seeded(5);
        let cfg = RandomSetConfig { qubits: 3, events: 1, outcomes: 2, pure: true, slack: 1 };
        for _ in 0..5 {
            let hs = random_history_set(&cfg, &mut rng, &tol()).unwrap();
            let cut = hs.space().fragment(&["q2"]).unwrap();
            let t = hs.horizon();
            let chk = fidelity_identity_check(&hs, &cut, &[0], &[1], t).unwrap();
            assert!(chk.gap < 1e-10, "{chk:?}");
        }
    }

    #[test]
    fn identity_refuses_mixed_states() {
        let hs = build_mixed_record_counterexample(MixedRecordVariant::Mixed, &tol()).unwrap();
        let cut = hs.space().fragment(&["E"]).unwrap();
        assert!(matches!(
            fidelity_identity_check(&hs, &cut, &[0], &[1], 1),
            Err(crate::Error::RequiresPureState)
        ));
    }

    #[test]
    fn records_in_transversal_fragment() {
        let model = cnot_model(3, 1);
        let hs = &model.histories;
        let f = frag(hs, &model.transversal_fragment(0));
        let cert = detect_records(hs, &f, hs.final_time(), 0.0).unwrap();
        assert!(cert.has_record && cert.conditions_agree());
        assert!(cert.worst_fidelity < 1e-12);
        assert_eq!(cert.record_projectors.len(), 8);

        let partial = frag(hs, &[model.subenvs[0][0].clone(), model.subenvs[2][0].clone()]);
        let cert = detect_records(hs, &partial, hs.final_time(), 0.0).unwrap();
        assert!(!cert.has_record && cert.conditions_agree());
        assert!((cert.worst_fidelity - 1.0).abs() < 1e-10);
    }

    #[test]
    fn mixed_environment_record_fidelity() {
        let p0: f64 = 0.8;
        for n in 1..=3 {
            let model = build_cnot_model(&CnotModelConfig::mixed(1, n, p0), &tol()).unwrap();
            let hs = &model.histories;
            let e1 = frag(hs, &model.subenvs[0]);
            let cert = detect_records(hs, &e1, 2, 0.5).unwrap();
            let expected = (2.0 * (p0 * (1.0 - p0)).sqrt()).powi(n as i32);
            assert!((cert.worst_fidelity - expected).abs() < 1e-10);
            assert_eq!(cert.has_record, expected <= 0.5);
        }
        let cfg = CnotModelConfig {
            env_init: EnvInit::Mixed { p0: 0.5 },
            ..CnotModelConfig::pure(1, 1)
        };
        let flat = build_cnot_model(&cfg, &tol()).unwrap();
        let e = frag(&flat.histories, &flat.environment_labels());
        let cert = detect_records(&flat.histories, &e, 2, 0.2).unwrap();
        assert!(!cert.has_record);
        assert!((cert.worst_fidelity - 1.0).abs() < 1e-10);
    }

    #[test]
    fn nested_records_over_time() {
        let model = cnot_model(3, 2);
        let hs = &model.histories;
        let f = frag(hs, &model.transversal_fragment(1));
        let report = records_in_time(hs, &f, hs.final_time()).unwrap();
        assert!(report.all_pass);
        assert_eq!(report.levels.len(), 3);
        assert_eq!(report.levels[0].distinguishing.as_deref(), Some("{E1_2}"));
        assert_eq!(report.levels[1].distinguishing.as_deref(), Some("{E1_2,E2_2}"));
        assert!(report.levels.iter().all(|l| l.equality_defect < 1e-9));

        let single = build_cnot_model(&CnotModelConfig::pure(1, 2), &tol()).unwrap();
        let hs1 = &single.histories;
        let f1 = frag(hs1, &single.transversal_fragment(0));
        let r1 = records_in_time(hs1, &f1, 2).unwrap();
        let cert = detect_records(hs1, &f1, 2, 0.0).unwrap();
        assert_eq!(r1.levels.len(), 1);
        assert_eq!(r1.levels[0].passes, cert.has_record);
    }

    #[test]
    fn records_in_time_requires_consistency() {
        let model = cnot_model(2, 1);
        let hs = &model.histories;
        let f = frag(hs, &[model.subenvs[0][0].clone()]);
        assert!(matches!(
            records_in_time(hs, &f, hs.final_time()),
            Err(crate::Error::NotConsistent { .. })
        ));
    }

    #[test]
    fn environment_consistency_diagonalizes_system() {
        let model = cnot_model(2, 1);
        let hs = &model.histories;
        let env = frag(hs, &model.environment_labels());
        assert!(block_diagonal_defect(hs, &env).unwrap() < 1e-12);
        assert!(generalized_sum_rule_defect(hs, &env, hs.final_time()).unwrap() < 1e-12);
        let f = frag(hs, &model.transversal_fragment(0));
        assert!(block_diagonal_defect(hs, &f).unwrap() < 1e-12);
    }

    #[test]
    fn interference_breaks_sum_rule() {
        let hs = crate::models::build_interference_model(&tol()).unwrap();
        let env = hs.space().fragment(&["E"]).unwrap();
        assert!(generalized_sum_rule_defect(&hs, &env, 1).unwrap() > 0.1);
    }

    #[test]
    fn extension_preserves_fragment_consistency() {
        let model = cnot_model(1, 2);
        let base = &model.histories;
        let space = base.space().clone();
        let f = space.fragment(&["E1_1"]).unwrap();
        let pointer = ProjectorFamily::pointer(&space, "S", &tol()).unwrap();
        let local = LocalOp::new(&space, &["S", "E1_2"], cnot()).unwrap();
        let good = base
            .extended(vec![vec![local]], vec![Event { time: 3, family: pointer.clone() }])
            .unwrap();
        assert!(extension_defect(base, &good, &f, 3).unwrap() < 1e-12);

        let coupling = LocalOp::new(&space, &["S", "E1_1"], cnot()).unwrap();
        let bad = base
            .extended(vec![vec![coupling]], vec![Event { time: 3, family: pointer }])
            .unwrap();
        assert!(extension_defect(base, &bad, &f, 3).unwrap() > 0.1);
    }

    #[test]
    fn matrix_elements_bounded_in_random_basis() {
        let mut rng = seeded(21);
        for pure in [true, false] {
            let cfg = RandomSetConfig { qubits: 3, events: 2, outcomes: 2, pure, slack: 0 };
            let hs = random_history_set(&cfg, &mut rng, &tol()).unwrap();
            let traced = hs.space().fragment(&["q0"]).unwrap();
            let basis = haar_unitary(4, &mut rng);
            let excess = matrix_element_bound_excess(&hs, &traced, hs.horizon(), &basis).unwrap();
            assert!(excess <= 1e-10, "{excess}");
        }
    }
}
