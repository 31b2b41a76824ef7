//! Learning curves: per-evaluation statistics aggregated over repeats,
//! written as `curve.csv` with a fixed header.

use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

use super::config::ExperimentError;
use crate::options::EvalPoint;

pub const CURVE_HEADER: &str = "step,mean_return,ci95_lo,ci95_hi,success_rate";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub step: u64,
    pub mean_return: f64,
    pub ci95_lo: f64,
    pub ci95_hi: f64,
    pub success_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct LearningCurve {
    pub rows: Vec<CurveRow>,
}

impl LearningCurve {
    /// Steps strictly increasing, confidence bounds bracketing the mean.
    pub fn validate(&self) -> Result<(), ExperimentError> {
        for pair in self.rows.windows(2) {
            if pair[1].step <= pair[0].step {
                return Err(ExperimentError::Artifact(format!(
                    "curve steps are not increasing at {}",
                    pair[1].step
                )));
            }
        }
        for row in &self.rows {
            if !(row.ci95_lo <= row.mean_return && row.mean_return <= row.ci95_hi) {
                return Err(ExperimentError::Artifact(format!(
                    "confidence bounds do not bracket the mean at step {}",
                    row.step
                )));
            }
        }
        Ok(())
    }

    pub fn steps(&self) -> Vec<u64> {
        self.rows.iter().map(|r| r.step).collect()
    }

    pub fn final_return(&self) -> Option<f64> {
        self.rows.last().map(|r| r.mean_return)
    }

    /// Trapezoidal area under the mean-return curve over the step axis.
    /// A single-row curve has zero area.
    pub fn auc(&self) -> f64 {
        self.rows
            .windows(2)
            .map(|pair| {
                let width = (pair[1].step - pair[0].step) as f64;
                0.5 * (pair[0].mean_return + pair[1].mean_return) * width
            })
            .sum()
    }

    /// First evaluation step whose mean return reaches `threshold`.
    pub fn first_step_to(&self, threshold: f64) -> Option<u64> {
        self.rows.iter().find(|r| r.mean_return >= threshold).map(|r| r.step)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CURVE_HEADER);
        out.push('\n');
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                row.step, row.mean_return, row.ci95_lo, row.ci95_hi, row.success_rate
            ));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), ExperimentError> {
        fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn from_csv(text: &str) -> Result<LearningCurve, ExperimentError> {
        let mut lines = text.lines();
        let header = lines.next().unwrap_or_default();
        if header != CURVE_HEADER {
            return Err(ExperimentError::Artifact(format!(
                "unexpected curve header '{header}'"
            )));
        }
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 5 {
                return Err(ExperimentError::Artifact(format!(
                    "curve row {} has {} fields",
                    i + 1,
                    fields.len()
                )));
            }
            let parse = |s: &str| -> Result<f64, ExperimentError> {
                s.parse().map_err(|_| {
                    ExperimentError::Artifact(format!("bad number '{s}' in curve row {}", i + 1))
                })
            };
            rows.push(CurveRow {
                step: fields[0].parse().map_err(|_| {
                    ExperimentError::Artifact(format!("bad step '{}' in curve row {}", fields[0], i + 1))
                })?,
                mean_return: parse(fields[1])?,
                ci95_lo: parse(fields[2])?,
                ci95_hi: parse(fields[3])?,
                success_rate: parse(fields[4])?,
            });
        }
        let curve = LearningCurve { rows };
        curve.validate()?;
        Ok(curve)
    }

    pub fn read_csv(path: &Path) -> Result<LearningCurve, ExperimentError> {
        let text = fs::read_to_string(path).map_err(|e| {
            ExperimentError::Artifact(format!("cannot read {}: {e}", path.display()))
        })?;
        LearningCurve::from_csv(&text)
    }
}

/// Pools per-repeat evaluation traces into one curve. All repeats share the
/// evaluation grid; the confidence interval is the normal approximation
/// `mean +/- 1.96 * stderr` across repeats, which collapses onto the mean
/// when there is a single repeat.
pub fn aggregate_curves(per_repeat: &[Vec<EvalPoint>]) -> Result<LearningCurve, ExperimentError> {
    let first = per_repeat
        .first()
        .ok_or_else(|| ExperimentError::Artifact("no repeats to aggregate".to_string()))?;
    for (r, curve) in per_repeat.iter().enumerate() {
        if curve.len() != first.len()
            || curve.iter().zip(first).any(|(a, b)| a.step != b.step)
        {
            return Err(ExperimentError::Artifact(format!(
                "repeat {r} evaluates on a different step grid"
            )));
        }
    }
    let n = per_repeat.len() as f64;
    let rows = first
        .iter()
        .enumerate()
        .map(|(i, point)| {
            let returns: Vec<f64> = per_repeat.iter().map(|c| c[i].mean_return).collect();
            let mean = returns.iter().sum::<f64>() / n;
            let half = if per_repeat.len() > 1 {
                let var =
                    returns.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
                1.96 * (var / n).sqrt()
            } else {
                0.0
            };
            let success =
                per_repeat.iter().map(|c| c[i].success_rate).sum::<f64>() / n;
            CurveRow {
                step: point.step,
                mean_return: mean,
                ci95_lo: mean - half,
                ci95_hi: mean + half,
                success_rate: success,
            }
        })
        .collect();
    let curve = LearningCurve { rows };
    curve.validate()?;
    Ok(curve)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(step: u64, mean_return: f64, success_rate: f64) -> EvalPoint {
        EvalPoint { step, mean_return, success_rate }
    }

    #[test]
    fn single_repeat_interval_collapses_onto_the_mean() {
        let curve =
            aggregate_curves(&[vec![point(0, 0.2, 0.1), point(10, 0.8, 0.9)]]).unwrap();
        assert_eq!(curve.rows[0].ci95_lo, 0.2);
        assert_eq!(curve.rows[0].ci95_hi, 0.2);
        assert_eq!(curve.rows[1].mean_return, 0.8);
        assert_eq!(curve.rows[1].success_rate, 0.9);
    }

    #[test]
    fn interval_matches_the_normal_approximation_by_hand() {
        // Returns 0.4 and 0.6: mean 0.5, sample sd sqrt(0.02), se 0.1.
        let curve = aggregate_curves(&[vec![point(0, 0.4, 1.0)], vec![point(0, 0.6, 0.0)]])
            .unwrap();
        let row = curve.rows[0];
        assert!((row.mean_return - 0.5).abs() < 1e-12);
        assert!((row.ci95_hi - (0.5 + 1.96 * 0.1)).abs() < 1e-12);
        assert!((row.ci95_lo - (0.5 - 1.96 * 0.1)).abs() < 1e-12);
        assert!((row.success_rate - 0.5).abs() < 1e-12);
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let err = aggregate_curves(&[vec![point(0, 0.0, 0.0)], vec![point(5, 0.0, 0.0)]])
            .unwrap_err();
        assert!(err.to_string().contains("different step grid"), "got: {err}");
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let curve = aggregate_curves(&[
            vec![point(0, 0.123456789012345, 0.3), point(1000, 1.0 / 3.0, 0.7)],
            vec![point(0, 0.2, 0.5), point(1000, 0.9, 0.8)],
        ])
        .unwrap();
        let text = curve.to_csv();
        assert!(text.starts_with(CURVE_HEADER));
        let back = LearningCurve::from_csv(&text).unwrap();
        assert_eq!(back, curve);
    }

    #[test]
    fn area_and_threshold_crossing() {
        let curve = LearningCurve {
            rows: vec![
                CurveRow { step: 0, mean_return: 0.0, ci95_lo: 0.0, ci95_hi: 0.0, success_rate: 0.0 },
                CurveRow { step: 10, mean_return: 1.0, ci95_lo: 1.0, ci95_hi: 1.0, success_rate: 1.0 },
                CurveRow { step: 20, mean_return: 1.0, ci95_lo: 1.0, ci95_hi: 1.0, success_rate: 1.0 },
            ],
        };
        assert!((curve.auc() - 15.0).abs() < 1e-12);
        assert_eq!(curve.first_step_to(0.9), Some(10));
        assert_eq!(curve.first_step_to(1.1), None);
        assert_eq!(curve.final_return(), Some(1.0));
    }

    #[test]
    fn malformed_csv_is_rejected() {
        assert!(LearningCurve::from_csv("nope\n").is_err());
        let bad_fields = format!("{CURVE_HEADER}\n0,1,2\n");
        assert!(LearningCurve::from_csv(&bad_fields).is_err());
        let bad_number = format!("{CURVE_HEADER}\n0,x,0,0,0\n");
        assert!(LearningCurve::from_csv(&bad_number).is_err());
        let bad_order = format!("{CURVE_HEADER}\n10,0,0,0,0\n5,0,0,0,0\n");
        assert!(LearningCurve::from_csv(&bad_order).is_err());
    }
}
