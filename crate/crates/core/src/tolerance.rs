use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Numerical tolerances shared by every analysis.
///
/// Defaults sit two orders of magnitude above double-precision accumulation
/// for contractions at the dimension cap.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Norm / trace deviation allowed for normalized states.
    pub norm: f64,
    /// Eigenvalues down to `-psd` are clipped to zero; below that is an error.
    pub psd: f64,
    /// Orthogonality, idempotence, completeness and unitarity checks.
    pub ortho: f64,
    /// Eigenvalue threshold defining the support of a density matrix.
    pub rank: f64,
    /// Reconstruction error for Schmidt decompositions and branch sums.
    pub recon: f64,
    /// Allowed gap in the fidelity / consistency-factor identity.
    pub identity: f64,
    /// Histories with probability below this are treated as impossible.
    pub zero_probability: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            norm: 1e-10,
            psd: 1e-9,
            ortho: 1e-9,
            rank: 1e-9,
            recon: 1e-10,
            identity: 1e-10,
            zero_probability: 1e-14,
        }
    }
}

impl Tolerances {
    pub const KEYS: [&'static str; 7] = [
        "norm",
        "psd",
        "ortho",
        "rank",
        "recon",
        "identity",
        "zero_probability",
    ];

    /// Overrides a single tolerance by name.
    pub fn set(&mut self, key: &str, value: f64) -> Result<()> {
        if !(value.is_finite() && value >= 0.0) {
            return Err(Error::Parse(format!(
                "tolerance `{key}` must be a finite non-negative number, got {value}"
            )));
        }
        let slot = match key {
            "norm" => &mut self.norm,
            "psd" => &mut self.psd,
            "ortho" => &mut self.ortho,
            "rank" => &mut self.rank,
            "recon" => &mut self.recon,
            "identity" => &mut self.identity,
            "zero_probability" => &mut self.zero_probability,
            other => return Err(Error::Parse(format!("unknown tolerance key `{other}`"))),
        };
        *slot = value;
        Ok(())
    }

    /// Parses a `KEY=VAL` override.
    pub fn apply_override(&mut self, spec: &str) -> Result<()> {
        let (key, value) = spec
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("tolerance override `{spec}` is not KEY=VAL")))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("tolerance override `{spec}` has a bad value")))?;
        self.set(key.trim(), value)
    }

    pub fn entries(&self) -> [(&'static str, f64); 7] {
        [
            ("norm", self.norm),
            ("psd", self.psd),
            ("ortho", self.ortho),
            ("rank", self.rank),
            ("recon", self.recon),
            ("identity", self.identity),
            ("zero_probability", self.zero_probability),
        ]
    }
}
