use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::hilbert::{Bipartition, Fragment};
use crate::histories::HistorySet;
use crate::models::random::seeded;
use crate::ptrace::{
    block_diagonal_defect, check_pt_consistency, detect_records, fidelity_identity_check,
    generalized_sum_rule_defect, pt_consistency_factor, pt_decoherence_functional,
    records_in_time,
};
use crate::redundancy::{branch_uniqueness_probe, redundancy_count, RedundancyOptions, SearchMode};
use crate::tolerance::Tolerances;

use super::report::{emit_report, ReportMeta, Table};
use super::scenario::{Analysis, Format, Scenario};

pub const EXIT_PARSE: i32 = 2;
pub const EXIT_LOAD: i32 = 3;
pub const EXIT_PRECONDITION: i32 = 4;
pub const EXIT_BREACH: i32 = 5;

#[derive(Debug)]
pub struct RunError {
    pub code: i32,
    pub error: Error,
}

impl RunError {
    fn new(code: i32, error: Error) -> Self {
        Self { code, error }
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub format: Option<String>,
    pub tol_overrides: Vec<String>,
}

/// Result of one analysis: its table, and a message when a required check
/// failed.
pub struct Outcome {
    pub table: Table,
    pub breach: Option<String>,
}

impl From<Table> for Outcome {
    fn from(table: Table) -> Self {
        Self { table, breach: None }
    }
}

/// Loads, runs and writes every analysis of a scenario file. Returns the
/// report paths in analysis order.
pub fn run_scenario(path: &Path, opts: &RunOptions) -> std::result::Result<Vec<PathBuf>, RunError> {
    let parse = |e| RunError::new(EXIT_PARSE, e);
    let scenario = Scenario::read(path).map_err(parse)?;
    let mut tol = scenario.tolerances;
    for o in &opts.tol_overrides {
        tol.apply_override(o).map_err(parse)?;
    }
    let format: Format = match opts.format.as_deref().or(scenario.output.format.as_deref()) {
        Some(f) => f.parse().map_err(parse)?,
        None => Format::default(),
    };
    let hs = scenario.model.build(&tol).map_err(|e| RunError::new(EXIT_LOAD, e))?;
    let name = scenario.name.clone().unwrap_or_else(|| {
        path.file_stem()
            .map_or_else(|| "scenario".into(), |s| s.to_string_lossy().into_owned())
    });
    let out_dir = match (&opts.out, &scenario.output.dir) {
        (Some(d), _) => d.clone(),
        (None, Some(d)) => path.parent().unwrap_or(Path::new(".")).join(d),
        (None, None) => PathBuf::from("histcon-reports"),
    };

    let mut written = Vec::new();
    for (index, analysis) in scenario.analyses.iter().enumerate() {
        let outcome = execute(&hs, analysis).map_err(|e| match e {
            Error::ToleranceBreach(_) => RunError::new(EXIT_BREACH, e),
            e => RunError::new(EXIT_PRECONDITION, e),
        })?;
        let meta = ReportMeta {
            scenario: &name,
            index,
            tolerances: &tol,
        };
        let bytes = emit_report(&outcome.table, &meta, format).map_err(|e| RunError::new(EXIT_PRECONDITION, e))?;
        let io = |e: std::io::Error| RunError::new(EXIT_PRECONDITION, e.into());
        std::fs::create_dir_all(&out_dir).map_err(io)?;
        let file = out_dir.join(format!("{index:02}_{}.{}", analysis.name(), format.extension()));
        std::fs::write(&file, bytes).map_err(io)?;
        written.push(file);
        if let Some(msg) = outcome.breach {
            return Err(RunError::new(EXIT_BREACH, Error::ToleranceBreach(msg)));
        }
    }
    Ok(written)
}

fn eval(hs: &HistorySet, t: Option<usize>) -> usize {
    t.unwrap_or_else(|| hs.final_time())
}

fn fragment(hs: &HistorySet, labels: &[String]) -> Result<Fragment> {
    hs.space().fragment(labels)
}

fn required(require: bool, passed: bool, what: String) -> Option<String> {
    (require && !passed).then_some(what)
}

fn mode_name(m: SearchMode) -> &'static str {
    match m {
        SearchMode::Exhaustive => "exhaustive",
        SearchMode::Greedy => "greedy",
        SearchMode::Auto => "auto",
    }
}

/// Runs one analysis against a loaded history set.
pub fn execute(hs: &HistorySet, analysis: &Analysis) -> Result<Outcome> {
    let op = analysis.name();
    let tol: &Tolerances = hs.tolerances();
    match analysis {
        Analysis::Probabilities(a) => {
            let d = hs.decoherence_functional(eval(hs, a.eval_time))?;
            let mut t = Table::new(op, &["history", "probability"]);
            for (i, l) in d.labels().iter().enumerate() {
                t.push(vec![("history", l.as_str().into()), ("probability", d.probability(i).into())]);
            }
            Ok(t.into())
        }
        Analysis::DecoherenceMatrix(a) => {
            let d = hs.decoherence_functional(eval(hs, a.eval_time))?;
            let mut t = Table::new(op, &["alpha", "beta", "re", "im"]);
            for i in 0..d.len() {
                for j in 0..d.len() {
                    let z = d.get(i, j);
                    t.push(vec![
                        ("alpha", d.labels()[i].as_str().into()),
                        ("beta", d.labels()[j].as_str().into()),
                        ("re", z.re.into()),
                        ("im", z.im.into()),
                    ]);
                }
            }
            Ok(t.into())
        }
        Analysis::CheckConsistency(a) => {
            let r = hs.decoherence_functional(eval(hs, a.eval_time))?.check_consistency(a.epsilon, tol);
            let mut t = Table::new(op, &["row", "alpha", "beta", "value", "epsilon", "consistent", "pairs_checked"]);
            t.push(vec![
                ("row", "summary".into()),
                ("value", r.max_offdiag_cf.into()),
                ("epsilon", r.epsilon.into()),
                ("consistent", r.consistent.into()),
                ("pairs_checked", r.pairs_checked.into()),
            ]);
            for v in &r.violations {
                t.push(vec![
                    ("row", "violation".into()),
                    ("alpha", v.alpha.as_str().into()),
                    ("beta", v.beta.as_str().into()),
                    ("value", v.abs.into()),
                ]);
            }
            for z in &r.zero_probability {
                t.push(vec![("row", "zero_probability".into()), ("alpha", z.as_str().into())]);
            }
            let breach = required(a.require, r.consistent, format!("not consistent at {:e}", a.epsilon));
            Ok(Outcome { table: t, breach })
        }
        Analysis::PtDecoherenceFunctional(a) => {
            let d = pt_decoherence_functional(hs, &fragment(hs, &a.traced)?, eval(hs, a.eval_time))?;
            let mut t = Table::new(op, &["alpha", "beta", "i", "j", "re", "im"]);
            for x in 0..d.len() {
                for y in 0..d.len() {
                    let m = d.entry(x, y);
                    for i in 0..m.nrows() {
                        for j in 0..m.ncols() {
                            t.push(vec![
                                ("alpha", d.labels[x].as_str().into()),
                                ("beta", d.labels[y].as_str().into()),
                                ("i", i.into()),
                                ("j", j.into()),
                                ("re", m[(i, j)].re.into()),
                                ("im", m[(i, j)].im.into()),
                            ]);
                        }
                    }
                }
            }
            Ok(t.into())
        }
        Analysis::CheckPtConsistency(a) => {
            let r = check_pt_consistency(hs, &fragment(hs, &a.traced)?, eval(hs, a.eval_time), a.epsilon)?;
            let mut t = Table::new(
                op,
                &["row", "traced", "alpha", "beta", "trace_norm", "spectral_norm", "epsilon", "consistent"],
            );
            t.push(vec![
                ("row", "summary".into()),
                ("traced", r.traced.as_str().into()),
                ("trace_norm", r.max_trace_norm.into()),
                ("epsilon", r.epsilon.into()),
                ("consistent", r.consistent.into()),
            ]);
            for p in &r.pairs {
                t.push(vec![
                    ("row", "pair".into()),
                    ("alpha", p.alpha.as_str().into()),
                    ("beta", p.beta.as_str().into()),
                    ("trace_norm", p.trace_norm.into()),
                    ("spectral_norm", p.spectral_norm.into()),
                ]);
            }
            for z in &r.zero_probability {
                t.push(vec![("row", "zero_probability".into()), ("alpha", z.as_str().into())]);
            }
            let breach = required(a.require, r.consistent, format!("not {}-consistent at {:e}", r.traced, a.epsilon));
            Ok(Outcome { table: t, breach })
        }
        Analysis::PtConsistencyFactor(a) => {
            let alpha = hs.parse_history(&a.alpha)?;
            let beta = hs.parse_history(&a.beta)?;
            let cf = pt_consistency_factor(hs, &fragment(hs, &a.traced)?, &alpha, &beta, eval(hs, a.eval_time))?;
            let mut t = Table::new(op, &["row", "i", "j", "re", "im", "trace_norm", "spectral_norm"]);
            t.push(vec![
                ("row", "summary".into()),
                ("trace_norm", cf.trace_norm.into()),
                ("spectral_norm", cf.spectral_norm.into()),
            ]);
            for i in 0..cf.operator.nrows() {
                for j in 0..cf.operator.ncols() {
                    let z = cf.operator[(i, j)];
                    t.push(vec![
                        ("row", "entry".into()),
                        ("i", i.into()),
                        ("j", j.into()),
                        ("re", z.re.into()),
                        ("im", z.im.into()),
                    ]);
                }
            }
            Ok(t.into())
        }
        Analysis::FidelityIdentity(a) => {
            let cut = fragment(hs, &a.cut)?;
            let t_eval = eval(hs, a.eval_time);
            let pairs = match (&a.alpha, &a.beta) {
                (Some(x), Some(y)) => vec![(hs.parse_history(x)?, hs.parse_history(y)?)],
                (None, None) => {
                    let ens = hs.ensemble(t_eval)?;
                    let live: Vec<_> = hs
                        .histories()
                        .into_iter()
                        .enumerate()
                        .filter(|(i, _)| ens.probability(*i) >= tol.zero_probability)
                        .map(|(_, h)| h)
                        .collect();
                    let mut v = Vec::new();
                    for i in 0..live.len() {
                        for j in i + 1..live.len() {
                            v.push((live[i].clone(), live[j].clone()));
                        }
                    }
                    v
                }
                _ => return Err(Error::Scenario("give both `alpha` and `beta`, or neither".into())),
            };
            let mut t = Table::new(op, &["alpha", "beta", "cut", "lhs", "rhs", "gap"]);
            for (x, y) in pairs {
                let c = fidelity_identity_check(hs, &cut, &x, &y, t_eval)?;
                t.push(vec![
                    ("alpha", c.alpha.into()),
                    ("beta", c.beta.into()),
                    ("cut", c.cut.into()),
                    ("lhs", c.lhs.into()),
                    ("rhs", c.rhs.into()),
                    ("gap", c.gap.into()),
                ]);
            }
            Ok(t.into())
        }
        Analysis::DetectRecords(a) => {
            let c = detect_records(hs, &fragment(hs, &a.fragment)?, eval(hs, a.eval_time), a.delta)?;
            let mut t = Table::new(
                op,
                &[
                    "row",
                    "history",
                    "rank",
                    "fragment",
                    "delta",
                    "threshold",
                    "worst_fidelity",
                    "support_overlap",
                    "projector_defect",
                    "orthogonal_supports",
                    "fidelity_bound",
                    "projector_condition",
                    "has_record",
                ],
            );
            t.push(vec![
                ("row", "summary".into()),
                ("fragment", c.fragment.as_str().into()),
                ("delta", c.delta.into()),
                ("threshold", c.threshold.into()),
                ("worst_fidelity", c.worst_fidelity.into()),
                ("support_overlap", c.support_overlap.into()),
                ("projector_defect", c.projector_defect.into()),
                ("orthogonal_supports", c.orthogonal_supports.into()),
                ("fidelity_bound", c.fidelity_bound.into()),
                ("projector_condition", c.projector_condition.into()),
                ("has_record", c.has_record.into()),
            ]);
            for (h, r) in c.histories.iter().zip(&c.ranks) {
                t.push(vec![("row", "history".into()), ("history", h.as_str().into()), ("rank", (*r).into())]);
            }
            let breach = required(a.require, c.has_record, format!("no record in {}", c.fragment));
            Ok(Outcome { table: t, breach })
        }
        Analysis::RecordsInTime(a) => {
            let r = records_in_time(hs, &fragment(hs, &a.fragment)?, eval(hs, a.eval_time))?;
            let mut t = Table::new(
                op,
                &[
                    "level",
                    "prefixes",
                    "ranks",
                    "subspace_overlap",
                    "coarse_overlap",
                    "containment_defect",
                    "equality_defect",
                    "distinguishing",
                    "passes",
                ],
            );
            for l in &r.levels {
                let ranks: Vec<String> = l.ranks.iter().map(|r| r.to_string()).collect();
                t.push(vec![
                    ("level", l.level.into()),
                    ("prefixes", l.prefixes.join(";").into()),
                    ("ranks", ranks.join(";").into()),
                    ("subspace_overlap", l.subspace_overlap.into()),
                    ("coarse_overlap", l.coarse_overlap.into()),
                    ("containment_defect", l.containment_defect.into()),
                    ("equality_defect", l.equality_defect.into()),
                    ("distinguishing", l.distinguishing.clone().into()),
                    ("passes", l.passes.into()),
                ]);
            }
            Ok(t.into())
        }
        Analysis::RedundancyCount(a) => {
            let opts = RedundancyOptions {
                delta: a.delta,
                mode: a.mode,
                max_fragment_size: a.max_fragment_size,
                include_system: a.include_system,
                excluded_labels: a.excluded_labels.clone(),
            };
            let r = redundancy_count(hs, eval(hs, a.eval_time), &opts)?;
            let mut t = Table::new(
                op,
                &[
                    "row",
                    "fragment",
                    "worst_fidelity",
                    "count",
                    "threshold",
                    "redundant",
                    "search_mode",
                    "delta",
                    "max_fragment_size",
                    "candidates_checked",
                ],
            );
            t.push(vec![
                ("row", "summary".into()),
                ("count", r.count.into()),
                ("threshold", a.threshold.into()),
                ("redundant", (r.count >= a.threshold).into()),
                ("search_mode", mode_name(r.search_mode).into()),
                ("delta", r.delta.into()),
                ("max_fragment_size", r.max_fragment_size.into()),
                ("candidates_checked", r.candidates_checked.into()),
            ]);
            for (f, c) in r.fragments.iter().zip(&r.certificates) {
                t.push(vec![
                    ("row", "fragment".into()),
                    ("fragment", f.join(",").into()),
                    ("worst_fidelity", c.worst_fidelity.into()),
                ]);
            }
            Ok(t.into())
        }
        Analysis::BranchUniquenessProbe(a) => {
            let opts = RedundancyOptions {
                delta: a.delta,
                max_fragment_size: a.max_fragment_size,
                ..RedundancyOptions::default()
            };
            let mut rng = seeded(a.seed);
            let r = branch_uniqueness_probe(hs, eval(hs, a.eval_time), a.trials, &mut rng, &opts, a.threshold)?;
            let mut t = Table::new(
                op,
                &["row", "kind", "count", "redundant", "matches_canonical", "redundant_alternatives"],
            );
            t.push(vec![
                ("row", "summary".into()),
                ("count", r.canonical_count.into()),
                ("redundant", r.canonical_redundant.into()),
                ("redundant_alternatives", r.redundant_alternatives.into()),
            ]);
            for x in &r.trials {
                t.push(vec![
                    ("row", "trial".into()),
                    ("kind", x.kind.as_str().into()),
                    ("count", x.count.into()),
                    ("redundant", x.redundant.into()),
                    ("matches_canonical", x.matches_canonical.into()),
                ]);
            }
            Ok(t.into())
        }
        Analysis::BlockDiagonal(a) => {
            if a.eval_time.is_some_and(|t| t != hs.final_time()) {
                return Err(Error::Scenario("block_diagonal is evaluated at the final event time".into()));
            }
            let traced = fragment(hs, &a.traced)?;
            let defect = block_diagonal_defect(hs, &traced)?;
            let mut t = Table::new(op, &["traced", "defect"]);
            t.push(vec![("traced", traced.to_string().into()), ("defect", defect.into())]);
            Ok(t.into())
        }
        Analysis::SumRule(a) => {
            let traced = fragment(hs, &a.traced)?;
            let defect = generalized_sum_rule_defect(hs, &traced, eval(hs, a.eval_time))?;
            let mut t = Table::new(op, &["traced", "defect"]);
            t.push(vec![("traced", traced.to_string().into()), ("defect", defect.into())]);
            Ok(t.into())
        }
        Analysis::Relations(a) => {
            let traced = fragment(hs, &a.traced)?;
            let t_eval = eval(hs, a.eval_time);
            let d = pt_decoherence_functional(hs, &traced, t_eval)?;
            let full = hs.decoherence_functional(t_eval)?;
            let reduced = hs.ensemble(t_eval)?.reduced_state(&Bipartition::new(&traced.complement()));
            let checks = [
                ("trace", d.trace_defect(&full)),
                ("adjoint", d.adjoint_defect()),
                ("sum", d.sum_defect(&reduced)),
            ];
            let mut t = Table::new(op, &["check", "value", "tolerance", "passes"]);
            let mut failed = Vec::new();
            for (name, v) in checks {
                let ok = v <= tol.ortho;
                if !ok {
                    failed.push(format!("{name} relation off by {v:e}"));
                }
                t.push(vec![
                    ("check", name.into()),
                    ("value", v.into()),
                    ("tolerance", tol.ortho.into()),
                    ("passes", ok.into()),
                ]);
            }
            let breach = (!failed.is_empty()).then(|| failed.join("; "));
            Ok(Outcome { table: t, breach })
        }
    }
}
