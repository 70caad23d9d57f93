use serde::Serialize;

use crate::error::{Error, Result};
use crate::hilbert::{CMatrix, C64};
use crate::tolerance::Tolerances;

/// `D(α, β)` over an ordered list of (possibly coarse-grained) histories.
#[derive(Clone, Debug)]
pub struct DecoherenceMatrix {
    labels: Vec<String>,
    entries: CMatrix,
    eval_time: usize,
}

/// One off-diagonal pair with the value that was tested.
#[derive(Clone, Debug, Serialize)]
pub struct PairValue {
    pub alpha: String,
    pub beta: String,
    pub re: f64,
    pub im: f64,
    pub abs: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConsistencyReport {
    pub epsilon: f64,
    pub consistent: bool,
    pub max_offdiag_cf: f64,
    pub pairs_checked: usize,
    /// Pairs with `|CF| > ε`, ordered lexicographically by `(α, β)`.
    pub violations: Vec<PairValue>,
    /// Histories whose probability is below the zero-probability tolerance.
    pub zero_probability: Vec<String>,
}

/// Additivity failure `|p_{α∨β} − p_α − p_β| = |2 Re D(α,β)|`.
#[derive(Clone, Debug, Serialize)]
pub struct SumRuleViolation {
    pub alpha: String,
    pub beta: String,
    pub defect: f64,
}

impl DecoherenceMatrix {
    pub fn new(labels: Vec<String>, entries: CMatrix, eval_time: usize) -> Self {
        Self {
            labels,
            entries,
            eval_time,
        }
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn eval_time(&self) -> usize {
        self.eval_time
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.entries[(i, j)]
    }

    pub fn probability(&self, i: usize) -> f64 {
        self.entries[(i, i)].re
    }

    pub fn probabilities(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.probability(i)).collect()
    }

    pub fn max_offdiag(&self) -> f64 {
        let n = self.len();
        let mut m = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    m = m.max(self.entries[(i, j)].norm());
                }
            }
        }
        m
    }

    /// `CF = D(α,β) / √(p_α p_β)`; undefined when either probability
    /// vanishes.
    pub fn consistency_factor(&self, i: usize, j: usize, tol: &Tolerances) -> Result<C64> {
        for k in [i, j] {
            if self.probability(k) < tol.zero_probability {
                return Err(Error::ZeroProbability(self.labels[k].clone()));
            }
        }
        Ok(self.entries[(i, j)] / (self.probability(i) * self.probability(j)).sqrt())
    }

    /// Tests `|CF_{αβ}| ≤ ε` over all pairs `α < β` with nonzero
    /// probabilities.
    pub fn check_consistency(&self, epsilon: f64, tol: &Tolerances) -> ConsistencyReport {
        let n = self.len();
        let zero: Vec<usize> = (0..n)
            .filter(|&k| self.probability(k) < tol.zero_probability)
            .collect();
        let mut max_cf = 0.0f64;
        let mut violations = Vec::new();
        let mut checked = 0;
        for i in 0..n {
            for j in i + 1..n {
                let Ok(cf) = self.consistency_factor(i, j, tol) else {
                    continue;
                };
                checked += 1;
                max_cf = max_cf.max(cf.norm());
                if cf.norm() > epsilon {
                    violations.push(PairValue {
                        alpha: self.labels[i].clone(),
                        beta: self.labels[j].clone(),
                        re: cf.re,
                        im: cf.im,
                        abs: cf.norm(),
                    });
                }
            }
        }
        ConsistencyReport {
            epsilon,
            consistent: violations.is_empty(),
            max_offdiag_cf: max_cf,
            pairs_checked: checked,
            violations,
            zero_probability: zero.into_iter().map(|k| self.labels[k].clone()).collect(),
        }
    }

    /// Largest entry of `|D − D†|`.
    pub fn hermitian_defect(&self) -> f64 {
        crate::hilbert::hermitian_defect(&self.entries)
    }

    /// `max(|D(α,β)|² − D(α,α) D(β,β), 0)` over all pairs.
    pub fn cauchy_schwarz_excess(&self) -> f64 {
        let n = self.len();
        let mut m = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let lhs = self.entries[(i, j)].norm_sqr();
                let rhs = self.probability(i) * self.probability(j);
                m = m.max(lhs - rhs);
            }
        }
        m
    }

    /// Pairwise sum-rule defects above `threshold`, largest first.
    pub fn sum_rule_violations(&self, threshold: f64) -> Vec<SumRuleViolation> {
        let n = self.len();
        let mut out = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let defect = 2.0 * self.entries[(i, j)].re.abs();
                if defect > threshold {
                    out.push(SumRuleViolation {
                        alpha: self.labels[i].clone(),
                        beta: self.labels[j].clone(),
                        defect,
                    });
                }
            }
        }
        out.sort_by(|a, b| b.defect.total_cmp(&a.defect));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{c, cr};

    fn sample() -> DecoherenceMatrix {
        let m = CMatrix::from_row_slice(
            3,
            3,
            &[
                cr(0.5),
                c(0.1, 0.1),
                cr(0.0),
                c(0.1, -0.1),
                cr(0.5),
                cr(0.0),
                cr(0.0),
                cr(0.0),
                cr(0.0),
            ],
        );
        DecoherenceMatrix::new(vec!["a".into(), "b".into(), "c".into()], m, 1)
    }

    #[test]
    fn consistency_factor_and_zero_probability() {
        let tol = Tolerances::default();
        let d = sample();
        let cf = d.consistency_factor(0, 1, &tol).unwrap();
        assert!((cf - c(0.2, 0.2)).norm() < 1e-14);
        assert!((d.consistency_factor(0, 0, &tol).unwrap() - cr(1.0)).norm() < 1e-14);
        assert!(matches!(
            d.consistency_factor(0, 2, &tol),
            Err(Error::ZeroProbability(_))
        ));
        let r = d.check_consistency(0.1, &tol);
        assert!(!r.consistent);
        assert_eq!(r.pairs_checked, 1);
        assert_eq!(r.zero_probability, vec!["c".to_string()]);
        assert_eq!(r.violations[0].alpha, "a");
    }

    #[test]
    fn sum_rule_defect_is_twice_real_part() {
        let d = sample();
        let v = d.sum_rule_violations(1e-12);
        assert_eq!(v.len(), 1);
        assert!((v[0].defect - 0.2).abs() < 1e-14);
    }
}
