//! Curve-versus-curve summaries: per-step differences, area ratio, and the
//! first evaluation step at which each curve clears a return threshold.

use serde::Serialize;

use super::config::ExperimentError;
use super::curve::LearningCurve;

#[derive(Clone, Debug, Serialize)]
pub struct CompareSummary {
    pub steps: Vec<u64>,
    /// Mean-return difference A - B at each shared evaluation step.
    pub mean_diff: Vec<f64>,
    pub auc_a: f64,
    pub auc_b: f64,
    /// Area ratio A / B; two identical (even flat-zero) curves give 1.
    pub auc_ratio: f64,
    pub threshold: f64,
    pub first_step_a: Option<u64>,
    pub first_step_b: Option<u64>,
}

impl CompareSummary {
    pub fn max_abs_diff(&self) -> f64 {
        self.mean_diff.iter().fold(0.0, |acc, d| acc.max(d.abs()))
    }
}

pub fn compare_curves(
    a: &LearningCurve,
    b: &LearningCurve,
    threshold: f64,
) -> Result<CompareSummary, ExperimentError> {
    if a.steps() != b.steps() {
        return Err(ExperimentError::Artifact(
            "curves evaluate on different step grids".to_string(),
        ));
    }
    let steps = a.steps();
    let mean_diff = a
        .rows
        .iter()
        .zip(&b.rows)
        .map(|(ra, rb)| ra.mean_return - rb.mean_return)
        .collect();
    let auc_a = a.auc();
    let auc_b = b.auc();
    let auc_ratio = if auc_a == auc_b {
        1.0
    } else if auc_b == 0.0 {
        f64::INFINITY
    } else {
        auc_a / auc_b
    };
    Ok(CompareSummary {
        steps,
        mean_diff,
        auc_a,
        auc_b,
        auc_ratio,
        threshold,
        first_step_a: a.first_step_to(threshold),
        first_step_b: b.first_step_to(threshold),
    })
}
