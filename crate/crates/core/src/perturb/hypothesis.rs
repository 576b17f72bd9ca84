//! Verdicts: did a perturbation move an index, and which way?

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_binomial;

use super::{ExperimentKind, ExperimentReport, PerturbError, Verdict};
use crate::cvi::{CviIndex, CviReport};

/// One-sided significance level of the sign tests.
pub const SIGNIFICANCE: f64 = 0.05;

/// Relative tolerance under which two outlier-variant values count as equal.
const UNAFFECTED_TOLERANCE: f64 = 1e-9;

/// Paired sign test over per-trial improvements. Ties are dropped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignTest {
    pub improved: usize,
    pub worsened: usize,
    pub ties: usize,
    /// `P(X >= improved)` for `X ~ Binomial(improved + worsened, 1/2)`.
    pub p_improve: f64,
    /// `P(X >= worsened)` for the same `X`.
    pub p_worsen: f64,
}

impl SignTest {
    pub fn verdict(&self) -> Verdict {
        if self.p_improve < SIGNIFICANCE {
            Verdict::Positive
        } else if self.p_worsen < SIGNIFICANCE {
            Verdict::Negative
        } else {
            Verdict::Inconclusive
        }
    }
}

/// `P(X >= k)` for `X ~ Binomial(n, 1/2)`.
pub fn binomial_upper_tail(n: usize, k: usize) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k > n {
        return 0.0;
    }
    let ln_half_n = n as f64 * std::f64::consts::LN_2;
    let tail: f64 = (k..=n)
        .map(|i| (ln_binomial(n as u64, i as u64) - ln_half_n).exp())
        .sum();
    tail.min(1.0)
}

/// Sign test over signed improvements (positive = better). NaN counts as a tie.
pub fn sign_test(improvements: &[f64]) -> SignTest {
    let improved = improvements.iter().filter(|&&d| d > 0.0).count();
    let worsened = improvements.iter().filter(|&&d| d < 0.0).count();
    let ties = improvements.len() - improved - worsened;
    let n = improved + worsened;
    SignTest {
        improved,
        worsened,
        ties,
        p_improve: binomial_upper_tail(n, improved),
        p_worsen: binomial_upper_tail(n, worsened),
    }
}

/// The index value with `+∞` restored; `None` only for failed indices.
fn extended(report: &CviReport, index: CviIndex) -> Option<f64> {
    report
        .get(index)
        .or_else(|| report.is_infinite(index).then_some(f64::INFINITY))
}

fn close(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= UNAFFECTED_TOLERANCE * a.abs().max(b.abs()).max(1.0)
}

/// Per-index sign tests of every trial against the baseline. Trials where
/// the index failed on either side are left out.
pub(super) fn trial_sign_tests(report: &ExperimentReport) -> BTreeMap<CviIndex, SignTest> {
    CviIndex::ALL
        .into_iter()
        .map(|index| {
            let deltas: Vec<f64> = match extended(&report.baseline, index) {
                Some(before) => report
                    .rows
                    .iter()
                    .filter_map(|row| extended(&row.report, index))
                    .map(|after| index.improvement(before, after))
                    .collect(),
                None => Vec::new(),
            };
            (index, sign_test(&deltas))
        })
        .collect()
}

fn outlier_verdict(report: &ExperimentReport, index: CviIndex) -> Verdict {
    let values: Option<Vec<f64>> = report.rows.iter().map(|r| extended(&r.report, index)).collect();
    let Some(values) = values else {
        return Verdict::Inconclusive;
    };
    if values.iter().all(|&v| close(v, values[0])) {
        return Verdict::Unaffected;
    }
    // Row 0 keeps no outlier, the last row keeps them all.
    let none = values[0];
    let all = values[values.len() - 1];
    let singles: Vec<f64> = report
        .rows
        .iter()
        .zip(&values)
        .filter(|(r, _)| r.included.iter().filter(|&&kept| kept).count() == 1)
        .map(|(_, &v)| v)
        .collect();
    let gain = |before: f64, after: f64| {
        let d = index.improvement(before, after);
        if d.is_nan() || close(before, after) { 0.0 } else { d }
    };
    if gain(all, none) > 0.0 && singles.iter().all(|&v| gain(none, v) <= 0.0) {
        Verdict::ImprovesOnRemoval
    } else if gain(none, all) > 0.0 && singles.iter().all(|&v| gain(none, v) >= 0.0) {
        Verdict::ImprovesOnAddition
    } else {
        Verdict::Mixed
    }
}

/// Per-index verdicts. Outlier reports: `UNAFFECTED` when every variant
/// agrees within `1e-9` (relative), otherwise the direction the outliers
/// push the index (`MIXED` when single outliers disagree with the overall
/// change). Trial reports: a one-sided paired sign test against the
/// baseline at [`SIGNIFICANCE`].
pub fn judge_hypothesis(report: &ExperimentReport) -> Result<BTreeMap<CviIndex, Verdict>, PerturbError> {
    if report.rows.is_empty() {
        return Err(PerturbError::EmptyReport);
    }
    Ok(match report.kind {
        ExperimentKind::Outliers => CviIndex::ALL.into_iter().map(|i| (i, outlier_verdict(report, i))).collect(),
        ExperimentKind::Density | ExperimentKind::Diameter => trial_sign_tests(report)
            .into_iter()
            .map(|(i, t)| (i, t.verdict()))
            .collect(),
    })
}
