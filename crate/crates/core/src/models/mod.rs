//! Builders for the concrete scenarios.

mod appendix;
mod cnot;
pub mod gates;
mod interference;
mod mixed_record;
mod pure_decoherence;
pub mod random;

pub use appendix::{
    abwxyz_vectors, build_appendix_alternate_set, sector_ket, theta_phi_vectors, AppendixKind,
    AppendixSet,
};
pub use cnot::{
    branch_amplitude, build_cnot_model, expected_branch, model_propagator, purifier_label,
    subenv_label, CnotModel, CnotModelConfig, EnvInit, EventPlacement,
};
pub use interference::build_interference_model;
pub use mixed_record::{build_mixed_record_counterexample, scrambler, MixedRecordVariant};
pub use pure_decoherence::{build_pure_decoherence_model, EnvComponent, PureDecoherenceModel};

/// Builder names accepted in scenario files, with one-line descriptions.
pub const MODEL_NAMES: [(&str, &str); 5] = [
    ("cnot", "system qubit branched by Hadamards and recorded by CNOTs into sub-environments"),
    ("appendix", "alternative consistent sets on the two-branching CNOT model"),
    ("mixed_record", "one CNOT into a mixed, purified or GHZ environment"),
    ("pure_decoherence", "controlled unitaries from a pointer basis onto independent components"),
    ("interference", "two-qubit set whose histories interfere"),
];
