use std::fmt;
use std::path::Path;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::hilbert::{CMatrix, CVector, LocalOp, Payload, QState, TensorSpace, C64};
use crate::histories::{Event, HistorySet, ProjectorFamily, Schedule};
use crate::models::{
    build_appendix_alternate_set, build_cnot_model, build_interference_model,
    build_mixed_record_counterexample, build_pure_decoherence_model, AppendixKind,
    CnotModelConfig, EnvComponent, MixedRecordVariant,
};
use crate::redundancy::SearchMode;
use crate::tolerance::Tolerances;

/// A complex number written as `"a+bi"`; plain numbers are accepted on input.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cx(pub C64);

pub fn format_complex(z: C64) -> String {
    if z.im.is_sign_negative() {
        format!("{}-{}i", z.re, -z.im)
    } else {
        format!("{}+{}i", z.re, z.im)
    }
}

pub fn parse_complex(text: &str) -> Result<C64> {
    let s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || Error::Parse(format!("`{text}` is not a complex number"));
    if s.is_empty() {
        return Err(bad());
    }
    let Some(body) = s.strip_suffix('i') else {
        return s.parse::<f64>().map(|re| C64::new(re, 0.0)).map_err(|_| bad());
    };
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let (re, im) = match split {
        Some(k) => (&body[..k], &body[k..]),
        None => ("0", body),
    };
    let im = match im {
        "" | "+" => 1.0,
        "-" => -1.0,
        x => x.parse::<f64>().map_err(|_| bad())?,
    };
    let re = re.parse::<f64>().map_err(|_| bad())?;
    Ok(C64::new(re, im))
}

impl Serialize for Cx {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&format_complex(self.0))
    }
}

impl<'de> Deserialize<'de> for Cx {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Cx;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a complex number such as \"0.5-1i\" or a real number")
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Cx, E> {
                parse_complex(v).map(Cx).map_err(E::custom)
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Cx, E> {
                Ok(Cx(C64::new(v, 0.0)))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Cx, E> {
                Ok(Cx(C64::new(v as f64, 0.0)))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Cx, E> {
                Ok(Cx(C64::new(v as f64, 0.0)))
            }
        }
        d.deserialize_any(V)
    }
}

/// Rows of complex entries.
pub type MatrixSpec = Vec<Vec<Cx>>;

pub fn matrix_from_spec(rows: &MatrixSpec) -> Result<CMatrix> {
    let n = rows.len();
    let m = rows.first().map_or(0, |r| r.len());
    if n == 0 || rows.iter().any(|r| r.len() != m) {
        return Err(Error::Scenario("matrix rows must be non-empty and of equal length".into()));
    }
    Ok(CMatrix::from_fn(n, m, |i, j| rows[i][j].0))
}

pub fn matrix_to_spec(m: &CMatrix) -> MatrixSpec {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| Cx(m[(i, j)])).collect())
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateSpec {
    Vector { data: Vec<Cx> },
    Matrix { rows: MatrixSpec },
    Basis { digits: Vec<usize> },
}

impl StateSpec {
    fn payload(&self) -> Result<Payload> {
        match self {
            StateSpec::Vector { data } => Ok(Payload::Vector(CVector::from_iterator(
                data.len(),
                data.iter().map(|c| c.0),
            ))),
            StateSpec::Matrix { rows } => Ok(Payload::Matrix(matrix_from_spec(rows)?)),
            StateSpec::Basis { .. } => Err(Error::Scenario("basis states need a space".into())),
        }
    }

    fn state(&self, space: &TensorSpace, tol: &Tolerances) -> Result<QState> {
        match self {
            StateSpec::Basis { digits } => QState::basis(space, digits),
            StateSpec::Vector { .. } => match self.payload()? {
                Payload::Vector(v) => QState::pure(space, v, tol),
                Payload::Matrix(_) => unreachable!(),
            },
            StateSpec::Matrix { rows } => QState::mixed(space, matrix_from_spec(rows)?, tol),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorSpec {
    pub label: String,
    pub dim: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateSpec {
    pub targets: Vec<String>,
    pub matrix: MatrixSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentSpec {
    #[serde(default)]
    pub gates: Vec<GateSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventSpec {
    pub time: usize,
    pub targets: Vec<String>,
    pub labels: Vec<String>,
    pub projectors: Vec<MatrixSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineModel {
    pub factors: Vec<FactorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<Vec<String>>,
    pub initial: StateSpec,
    #[serde(default)]
    pub segments: Vec<SegmentSpec>,
    #[serde(default)]
    pub events: Vec<EventSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentSpec {
    pub label: String,
    pub unitaries: Vec<MatrixSpec>,
    pub init: StateSpec,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AppendixFamily {
    Abwxyz,
    ThetaPhi,
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "builder", rename_all = "snake_case")]
pub enum ModelSpec {
    Cnot(CnotModelConfig),
    Appendix {
        family: AppendixFamily,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        theta: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        phi: Option<f64>,
        #[serde(default = "one")]
        spins: usize,
    },
    MixedRecord {
        #[serde(default)]
        variant: MixedRecordVariant,
    },
    PureDecoherence {
        amplitudes: Vec<Cx>,
        components: Vec<ComponentSpec>,
    },
    Interference,
    Inline(InlineModel),
}

impl ModelSpec {
    pub fn build(&self, tol: &Tolerances) -> Result<HistorySet> {
        match self {
            ModelSpec::Cnot(cfg) => Ok(build_cnot_model(cfg, tol)?.histories),
            ModelSpec::Appendix { family, theta, phi, spins } => {
                let kind = match family {
                    AppendixFamily::Abwxyz => AppendixKind::Abwxyz,
                    AppendixFamily::ThetaPhi => AppendixKind::ThetaPhi {
                        theta: theta.ok_or_else(|| Error::Scenario("theta_phi needs `theta`".into()))?,
                        phi: phi.ok_or_else(|| Error::Scenario("theta_phi needs `phi`".into()))?,
                    },
                };
                Ok(build_appendix_alternate_set(kind, *spins, tol)?.histories)
            }
            ModelSpec::MixedRecord { variant } => build_mixed_record_counterexample(*variant, tol),
            ModelSpec::PureDecoherence { amplitudes, components } => {
                let comps = components
                    .iter()
                    .map(|c| {
                        Ok(EnvComponent {
                            label: c.label.clone(),
                            unitaries: c.unitaries.iter().map(matrix_from_spec).collect::<Result<_>>()?,
                            init: c.init.payload()?,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                let amps: Vec<C64> = amplitudes.iter().map(|a| a.0).collect();
                Ok(build_pure_decoherence_model(&amps, comps, tol)?.histories)
            }
            ModelSpec::Interference => build_interference_model(tol),
            ModelSpec::Inline(m) => m.build(tol),
        }
    }
}

impl InlineModel {
    pub fn build(&self, tol: &Tolerances) -> Result<HistorySet> {
        let space = TensorSpace::new(self.factors.iter().map(|f| (f.label.clone(), f.dim)))?;
        let initial = self.initial.state(&space, tol)?;
        let segments = self
            .segments
            .iter()
            .map(|s| {
                s.gates
                    .iter()
                    .map(|g| LocalOp::new(&space, &g.targets, matrix_from_spec(&g.matrix)?))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let schedule = Schedule::new(&space, segments, tol)?;
        let events = self
            .events
            .iter()
            .map(|e| {
                let mats = e.projectors.iter().map(matrix_from_spec).collect::<Result<Vec<_>>>()?;
                Ok(Event {
                    time: e.time,
                    family: ProjectorFamily::new(&space, &e.targets, mats, e.labels.clone(), tol)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let hs = HistorySet::new(schedule, events, initial, *tol)?;
        match &self.system {
            Some(labels) => hs.with_system(space.fragment(labels)?),
            None => Ok(hs),
        }
    }
}

fn default_epsilon() -> f64 {
    1e-9
}

fn default_delta() -> f64 {
    1e-9
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeArgs {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval_time: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConsistencyArgs {
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval_time: Option<usize>,
    /// Fail the run with a tolerance breach when the check does not pass.
    #[serde(default)]
    pub require: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TracedArgs {
    pub traced: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval_time: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PtCheckArgs {
    pub traced: Vec<String>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval_time: Option<usize>,
    #[serde(default)]
    pub require: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorArgs {
    pub traced: Vec<String>,
    pub alpha: String,
    pub beta: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval_time: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentityArgs {
    pub cut: Vec<String>,
    /// Both histories, or neither for every pair.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval_time: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordArgs {
    pub fragment: Vec<String>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval_time: Option<usize>,
    #[serde(default)]
    pub require: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FragmentArgs {
    pub fragment: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval_time: Option<usize>,
}

fn default_max_fragment() -> usize {
    3
}

fn default_threshold() -> usize {
    crate::redundancy::DEFAULT_THRESHOLD
}

fn default_trials() -> usize {
    100
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RedundancyArgs {
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub mode: SearchMode,
    #[serde(default = "default_max_fragment")]
    pub max_fragment_size: usize,
    #[serde(default)]
    pub include_system: bool,
    #[serde(default)]
    pub excluded_labels: Vec<String>,
    #[serde(default = "default_threshold")]
    pub threshold: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval_time: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeArgs {
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_max_fragment")]
    pub max_fragment_size: usize,
    #[serde(default = "default_threshold")]
    pub threshold: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval_time: Option<usize>,
}

/// One requested analysis, executed in file order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Analysis {
    Probabilities(TimeArgs),
    DecoherenceMatrix(TimeArgs),
    CheckConsistency(ConsistencyArgs),
    PtDecoherenceFunctional(TracedArgs),
    CheckPtConsistency(PtCheckArgs),
    PtConsistencyFactor(FactorArgs),
    FidelityIdentity(IdentityArgs),
    DetectRecords(RecordArgs),
    RecordsInTime(FragmentArgs),
    RedundancyCount(RedundancyArgs),
    BranchUniquenessProbe(ProbeArgs),
    BlockDiagonal(TracedArgs),
    SumRule(TracedArgs),
    /// Self-check of the partial-trace functional relations; a breach of
    /// `tol.ortho` fails the run.
    Relations(TracedArgs),
}

impl Analysis {
    pub fn name(&self) -> &'static str {
        match self {
            Analysis::Probabilities(_) => "probabilities",
            Analysis::DecoherenceMatrix(_) => "decoherence_matrix",
            Analysis::CheckConsistency(_) => "check_consistency",
            Analysis::PtDecoherenceFunctional(_) => "pt_decoherence_functional",
            Analysis::CheckPtConsistency(_) => "check_pt_consistency",
            Analysis::PtConsistencyFactor(_) => "pt_consistency_factor",
            Analysis::FidelityIdentity(_) => "fidelity_identity",
            Analysis::DetectRecords(_) => "detect_records",
            Analysis::RecordsInTime(_) => "records_in_time",
            Analysis::RedundancyCount(_) => "redundancy_count",
            Analysis::BranchUniquenessProbe(_) => "branch_uniqueness_probe",
            Analysis::BlockDiagonal(_) => "block_diagonal",
            Analysis::SumRule(_) => "sum_rule",
            Analysis::Relations(_) => "relations",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Format {
    #[default]
    JsonLines,
    Csv,
}

impl Format {
    pub fn extension(&self) -> &'static str {
        match self {
            Format::JsonLines => "jsonl",
            Format::Csv => "csv",
        }
    }
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json-lines" | "jsonl" => Ok(Format::JsonLines),
            "csv" => Ok(Format::Csv),
            other => Err(Error::UnsupportedFormat(other.to_string())),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Relative paths resolve against the scenario file's directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output: OutputSpec,
    pub model: ModelSpec,
    #[serde(default, rename = "analysis")]
    pub analyses: Vec<Analysis>,
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Parse(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }
}
