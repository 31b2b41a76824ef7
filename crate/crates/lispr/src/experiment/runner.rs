//! Seeded run orchestration. Repeats are independent (seed, seed+1, ...)
//! and may execute concurrently; aggregation happens after all of them
//! finish, so artifacts never depend on scheduling.

use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};

use super::config::{build_task, AlgorithmChoice, ExperimentError, RunConfig};
use super::curve::{aggregate_curves, LearningCurve};
use crate::options::{train_baseline, train_recovery, train_student, OptionsError, TrainResult};
use crate::tabular::write_state_values_csv;

/// Everything `run` leaves on disk, kept in memory for library callers.
pub struct RunArtifacts {
    pub out_dir: PathBuf,
    pub curve: LearningCurve,
    pub per_repeat: Vec<TrainResult>,
    pub seeds: Vec<u64>,
    pub meta: RunMeta,
}

/// In-memory result of `execute`.
pub struct RunOutcome {
    pub curve: LearningCurve,
    pub per_repeat: Vec<TrainResult>,
    pub seeds: Vec<u64>,
}

/// Resolved run description written next to the curve. `step_unit` records
/// that curve steps count environment steps, not table updates or episodes.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunMeta {
    pub config: RunConfig,
    pub per_repeat_seeds: Vec<u64>,
    pub step_unit: String,
    /// SHA-256 of the task layout text.
    pub layout_hash: String,
    /// SHA-256 of the source layout when a source policy was composed.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub source_layout_hash: Option<String>,
    /// Final evaluation return of each repeat, in seed order.
    pub final_returns: Vec<f64>,
}

pub const META_FILE: &str = "meta.json";
pub const CURVE_FILE: &str = "curve.csv";
pub const Q_FILE: &str = "q_learner.csv";
pub const G_FILE: &str = "g_table.csv";
pub const V_FILE: &str = "v_behavior.csv";

/// Runs all repeats in memory and pools their curves.
pub fn execute(config: &RunConfig) -> Result<RunOutcome, ExperimentError> {
    config.validate()?;
    let setup = build_task(config)?;
    let params = config.train_params();
    let seeds: Vec<u64> = (0..config.repeats).map(|r| config.seed.wrapping_add(r)).collect();
    let algorithm = config.algorithm;
    let mut slots: Vec<Option<Result<TrainResult, OptionsError>>> =
        (0..seeds.len()).map(|_| None).collect();
    std::thread::scope(|scope| {
        for (slot, &seed) in slots.iter_mut().zip(&seeds) {
            let mdp = &setup.mdp;
            let mu = setup.mu.as_ref();
            let params = &params;
            scope.spawn(move || {
                *slot = Some(match algorithm {
                    AlgorithmChoice::BaselineQ => train_baseline(mdp, params, seed),
                    AlgorithmChoice::LisprRecovery => {
                        train_recovery(mdp, mu.expect("validated transfer config"), params, seed)
                    }
                    AlgorithmChoice::LisprStudent => {
                        train_student(mdp, mu.expect("validated transfer config"), params, seed)
                    }
                });
            });
        }
    });
    let mut per_repeat = Vec::with_capacity(slots.len());
    for slot in slots {
        per_repeat.push(slot.expect("worker wrote its slot")?);
    }
    let traces: Vec<_> = per_repeat.iter().map(|r| r.curve.clone()).collect();
    let curve = aggregate_curves(&traces)?;
    Ok(RunOutcome { curve, per_repeat, seeds })
}

/// Runs and writes artifacts: the aggregated `curve.csv`, per-repeat curves
/// under `repeats/`, the first repeat's learned tables, and `meta.json`.
pub fn run(config: &RunConfig, out_dir: &Path) -> Result<RunArtifacts, ExperimentError> {
    let outcome = execute(config)?;
    let setup = build_task(config)?;
    fs::create_dir_all(out_dir)?;
    outcome.curve.write_csv(&out_dir.join(CURVE_FILE))?;

    let repeats_dir = out_dir.join("repeats");
    fs::create_dir_all(&repeats_dir)?;
    for (r, result) in outcome.per_repeat.iter().enumerate() {
        let single = aggregate_curves(std::slice::from_ref(&result.curve))?;
        single.write_csv(&repeats_dir.join(format!("repeat_{r:02}.csv")))?;
    }

    let first = &outcome.per_repeat[0];
    first.q.write_csv(&out_dir.join(Q_FILE))?;
    if let Some(g) = &first.g {
        g.write_csv(&out_dir.join(G_FILE))?;
    }
    if let Some(v) = &first.v_behavior {
        write_state_values_csv(v, &out_dir.join(V_FILE))?;
    }

    let final_returns = outcome
        .per_repeat
        .iter()
        .map(|r| r.curve.last().map(|p| p.mean_return).unwrap_or(f64::NAN))
        .collect();
    let meta = RunMeta {
        config: config.clone(),
        per_repeat_seeds: outcome.seeds.clone(),
        step_unit: "environment steps".to_string(),
        layout_hash: setup.meta.spec.content_hash(),
        source_layout_hash: setup.source_meta.as_ref().map(|m| m.spec.content_hash()),
        final_returns,
    };
    let mut meta_text = serde_json::to_string_pretty(&meta)?;
    meta_text.push('\n');
    fs::write(out_dir.join(META_FILE), meta_text)?;

    Ok(RunArtifacts {
        out_dir: out_dir.to_path_buf(),
        curve: outcome.curve,
        per_repeat: outcome.per_repeat,
        seeds: outcome.seeds,
        meta,
    })
}

pub fn read_meta(run_dir: &Path) -> Result<RunMeta, ExperimentError> {
    let path = run_dir.join(META_FILE);
    let text = fs::read_to_string(&path).map_err(|e| {
        ExperimentError::Artifact(format!("cannot read {}: {e}", path.display()))
    })?;
    Ok(serde_json::from_str(&text)?)
}
