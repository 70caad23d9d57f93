//! Events, class operators, branches and the decoherence functional.
//!
//! Time is discrete: segment `k` of a [`Schedule`] evolves the state from
//! step `k` to step `k + 1`. Events sit at integer steps and act with the
//! projectors of their [`ProjectorFamily`]. A history is one outcome index per
//! event, in event order.

mod ensemble;
mod family;
mod functional;
mod schedule;
mod set;

pub use ensemble::BranchEnsemble;
pub use family::ProjectorFamily;
pub use functional::{ConsistencyReport, DecoherenceMatrix, PairValue, SumRuleViolation};
pub use schedule::{Schedule, Segment};
pub use set::{CoarseHistory, Event, HistorySet};

/// One outcome index per event.
pub type History = Vec<usize>;

/// All histories for the given outcome counts, in lexicographic order.
pub fn enumerate_histories(counts: &[usize]) -> Vec<History> {
    let mut out: Vec<History> = vec![Vec::new()];
    for &k in counts {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..k).map(move |a| {
                    let mut h = prefix.clone();
                    h.push(a);
                    h
                })
            })
            .collect();
    }
    out
}
