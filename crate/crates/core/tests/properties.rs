mod support;

use histcon::cli::{format_complex, parse_complex};
use histcon::hilbert::{fidelity_of_matrices, TensorSpace};
use histcon::models::random::{haar_unitary, random_density, random_history_set, seeded, RandomSetConfig};
use histcon::models::{build_cnot_model, CnotModelConfig};
use histcon::ptrace::{
    check_pt_consistency, detect_records, fidelity_identity_check, matrix_element_bound_excess,
    pt_decoherence_functional,
};
use histcon::redundancy::{redundancy_count, RedundancyOptions, SearchMode};
use histcon::{Fragment, HistorySet, Tolerances, C64};
use proptest::prelude::*;

use support::partial_trace;

fn random_set(seed: u64, qubits: usize, events: usize, pure: bool) -> HistorySet {
    let cfg = RandomSetConfig { qubits, events, outcomes: 2, pure, slack: 1 };
    random_history_set(&cfg, &mut seeded(seed), &Tolerances::default()).unwrap()
}

/// Every nonempty proper subset of the factors.
fn proper_fragments(space: &TensorSpace) -> Vec<Fragment> {
    let n = space.len();
    (1..(1usize << n) - 1)
        .map(|mask| {
            let idx: Vec<usize> = (0..n).filter(|b| mask >> b & 1 == 1).collect();
            Fragment::from_indices(space, &idx).unwrap()
        })
        .collect()
}

fn live_pairs(hs: &HistorySet, t: usize) -> Vec<(Vec<usize>, Vec<usize>)> {
    let d = hs.decoherence_functional(t).unwrap();
    let live: Vec<_> = hs
        .histories()
        .into_iter()
        .enumerate()
        .filter(|(i, _)| d.probability(*i) > 1e-9)
        .map(|(_, h)| h)
        .collect();
    let mut out = Vec::new();
    for a in 0..live.len() {
        for b in a + 1..live.len() {
            out.push((live[a].clone(), live[b].clone()));
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn fidelity_is_symmetric_and_bounded(seed in any::<u64>(), d in 2usize..5, ra in 1usize..5, rb in 1usize..5) {
        let mut rng = seeded(seed);
        let a = random_density(d, ra.min(d), &mut rng);
        let b = random_density(d, rb.min(d), &mut rng);
        let fab = fidelity_of_matrices(&a, &b, 1e-10).unwrap();
        let fba = fidelity_of_matrices(&b, &a, 1e-10).unwrap();
        prop_assert!((fab - fba).abs() < 1e-10);
        prop_assert!((-1e-12..=1.0 + 1e-10).contains(&fab));
        prop_assert!((fidelity_of_matrices(&a, &a, 1e-10).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn decoherence_functional_is_a_valid_matrix(seed in any::<u64>(), qubits in 1usize..4, events in 1usize..3, pure in any::<bool>()) {
        let hs = random_set(seed, qubits, events, pure);
        let d = hs.decoherence_functional(hs.horizon()).unwrap();
        prop_assert!(d.hermitian_defect() < 1e-12);
        prop_assert!(d.cauchy_schwarz_excess() < 1e-12);
        let total: C64 = d.entries().iter().sum();
        prop_assert!((total - C64::new(1.0, 0.0)).norm() < 1e-12);
        prop_assert!(d.probabilities().iter().all(|&p| p > -1e-14));
    }

    #[test]
    fn partial_trace_functional_relations(seed in any::<u64>(), qubits in 2usize..4, pure in any::<bool>()) {
        let hs = random_set(seed, qubits, 2, pure);
        let t = hs.horizon();
        let d = hs.decoherence_functional(t).unwrap();
        let rho = hs.state_at(t);
        for traced in proper_fragments(hs.space()) {
            let keep = traced.complement().indices().to_vec();
            let pt = pt_decoherence_functional(&hs, &traced, t).unwrap();
            prop_assert!(pt.trace_defect(&d) < 1e-12);
            prop_assert!(pt.adjoint_defect() < 1e-12);
            let reduced = partial_trace(&rho, hs.space().dims(), &keep);
            prop_assert!(pt.sum_defect(&reduced) < 1e-12);
        }
    }

    #[test]
    fn fidelity_identity_holds_for_pure_states(seed in any::<u64>(), qubits in 2usize..4) {
        let hs = random_set(seed, qubits, 2, true);
        let t = hs.horizon();
        for cut in proper_fragments(hs.space()) {
            for (a, b) in live_pairs(&hs, t) {
                let c = fidelity_identity_check(&hs, &cut, &a, &b, t).unwrap();
                prop_assert!(c.gap < 1e-8, "gap {} on {}", c.gap, c.cut);
            }
        }
    }

    #[test]
    fn matrix_elements_are_bounded(seed in any::<u64>(), qubits in 2usize..4, pure in any::<bool>()) {
        let hs = random_set(seed, qubits, 2, pure);
        let traced = Fragment::from_indices(hs.space(), &[0]).unwrap();
        let dk = hs.space().total_dim() / 2;
        let basis = haar_unitary(dk, &mut seeded(seed ^ 1));
        let excess = matrix_element_bound_excess(&hs, &traced, hs.horizon(), &basis).unwrap();
        prop_assert!(excess < 1e-12);
    }

    #[test]
    fn consistency_factor_is_bounded_by_record_fidelity(seed in any::<u64>(), qubits in 2usize..4, pure in any::<bool>()) {
        let hs = random_set(seed, qubits, 2, pure);
        let t = hs.horizon();
        for f in proper_fragments(hs.space()) {
            let cert = detect_records(&hs, &f, t, 0.0).unwrap();
            let report = check_pt_consistency(&hs, &f, t, 1e-8).unwrap();
            prop_assert!(report.max_trace_norm <= cert.worst_fidelity + 1e-8);
            if pure {
                prop_assert!((report.max_trace_norm - cert.worst_fidelity).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn consistency_is_inherited_by_larger_traced_fragments(seed in any::<u64>(), pure in any::<bool>()) {
        let hs = random_set(seed, 3, 2, pure);
        let t = hs.horizon();
        let frags = proper_fragments(hs.space());
        for small in &frags {
            let a = check_pt_consistency(&hs, small, t, 1e-9).unwrap().max_trace_norm;
            for big in frags.iter().filter(|g| small.is_subset(g)) {
                let b = check_pt_consistency(&hs, big, t, 1e-9).unwrap().max_trace_norm;
                prop_assert!(b <= a + 1e-10);
            }
        }
    }

    #[test]
    fn complex_text_round_trips(re in -1e6f64..1e6, im in -1e6f64..1e6) {
        let z = C64::new(re, im);
        prop_assert_eq!(parse_complex(&format_complex(z)).unwrap(), z);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn redundancy_search_modes_are_ordered(m in 1usize..3, spins in 1usize..3, drop in 0usize..4, max in 1usize..4) {
        let tol = Tolerances::default();
        let model = build_cnot_model(&CnotModelConfig::pure(m, spins), &tol).unwrap();
        let hs = &model.histories;
        let t = hs.horizon();
        let env = model.environment_labels();
        let excluded: Vec<String> = env.iter().take(drop.min(env.len())).cloned().collect();
        let opts = |mode, max_fragment_size| RedundancyOptions {
            mode,
            max_fragment_size,
            excluded_labels: excluded.clone(),
            ..RedundancyOptions::default()
        };
        let exact = redundancy_count(hs, t, &opts(SearchMode::Exhaustive, max)).unwrap().count;
        let greedy = redundancy_count(hs, t, &opts(SearchMode::Greedy, max)).unwrap().count;
        let bigger = redundancy_count(hs, t, &opts(SearchMode::Exhaustive, max + 1)).unwrap().count;
        prop_assert!(greedy <= exact);
        prop_assert!(exact <= bigger);
    }
}

#[test]
fn records_and_consistency_coincide_at_small_thresholds() {
    let tol = Tolerances::default();
    let model = build_cnot_model(&CnotModelConfig::pure(2, 2), &tol).unwrap();
    let hs = &model.histories;
    let t = hs.horizon();
    for f in proper_fragments(hs.space()).into_iter().filter(|f| !f.contains("S")) {
        let rec = detect_records(hs, &f, t, 1e-10).unwrap().has_record;
        let con = check_pt_consistency(hs, &f, t, 1e-8).unwrap().consistent;
        assert_eq!(rec, con, "{f}");
    }
}
