//! One JSON document fully describes a run. Unknown keys are rejected at
//! parse time so a sweep (or a typo) cannot silently misname a parameter.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::grid::{build_boxworld, build_multiroom, state_map, Env, GridError, GridMeta, Variant};
use crate::mdp::TabularMdp;
use crate::options::{
    validate_threshold_for, Algorithm, OptionsError, SourcePolicy, ThresholdKind, ThresholdSpec,
    TrainParams,
};
use crate::oracle::{value_iteration, OracleError};
use crate::proxy::ProxyKind;
use crate::tabular::EpsilonSchedule;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config error: {0}")]
    Config(String),
    #[error("artifact error: {0}")]
    Artifact(String),
    #[error(transparent)]
    Options(#[from] OptionsError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Algorithm names as written in config files.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlgorithmChoice {
    /// Plain Watkins Q(lambda), no source policy.
    BaselineQ,
    /// Option switching with the recovery learner.
    LisprRecovery,
    /// Option switching with the student learner.
    LisprStudent,
}

impl AlgorithmChoice {
    pub fn algorithm(self) -> Algorithm {
        match self {
            AlgorithmChoice::BaselineQ => Algorithm::Baseline,
            AlgorithmChoice::LisprRecovery => Algorithm::Recovery,
            AlgorithmChoice::LisprStudent => Algorithm::Student,
        }
    }

    pub fn uses_source_policy(self) -> bool {
        self != AlgorithmChoice::BaselineQ
    }
}

impl fmt::Display for AlgorithmChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            AlgorithmChoice::BaselineQ => "baseline-q",
            AlgorithmChoice::LisprRecovery => "lispr-recovery",
            AlgorithmChoice::LisprStudent => "lispr-student",
        };
        write!(f, "{name}")
    }
}

fn default_proxy() -> ProxyKind {
    ProxyKind::Oracle
}

fn default_relabel() -> crate::options::RelabelMode {
    crate::options::RelabelMode::DefinitionFaithful
}

/// A fully resolved training run.
///
/// `threshold` names what the success predictor is compared against;
/// `tolerance` is the slack of that comparison, so together they form the
/// membership test `G(s) >= tau(s) - tolerance`. A single `alpha` drives
/// every learned table (learner, success predictor, behavior value), and
/// action exploration anneals linearly from `epsilon_initial` to
/// `epsilon_final` over the whole run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub env: Env,
    pub variant: Variant,
    pub algorithm: AlgorithmChoice,
    /// Reward fed to the recovery learner; `oracle` is the recovery reward
    /// itself, everything else a predictor-only surrogate.
    #[serde(default = "default_proxy")]
    pub proxy: ProxyKind,
    pub alpha: f64,
    pub lambda_trace: f64,
    pub epsilon_initial: f64,
    pub epsilon_final: f64,
    /// Option-level exploration of the main policy during training.
    #[serde(default)]
    pub main_epsilon: f64,
    pub gamma: f64,
    #[serde(default)]
    pub tolerance: f64,
    pub max_steps: u64,
    pub eval_every: u64,
    pub eval_episodes: u64,
    pub repeats: u64,
    pub episode_cap: u64,
    /// Initial stretch with the source policy forced while only the success
    /// predictor updates.
    #[serde(default)]
    pub warmup_primal_steps: u64,
    pub threshold: ThresholdKind,
    pub seed: u64,
    /// Reading of the recovery relabel; the definition-faithful one is the
    /// default.
    #[serde(default = "default_relabel")]
    pub relabel: crate::options::RelabelMode,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<RunConfig, ExperimentError> {
        let config: RunConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<RunConfig, ExperimentError> {
        let text = fs::read_to_string(path).map_err(|e| {
            ExperimentError::Config(format!("cannot read {}: {e}", path.display()))
        })?;
        RunConfig::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |msg: String| Err(ExperimentError::Config(msg));
        for (name, value) in [
            ("alpha", self.alpha),
            ("lambda_trace", self.lambda_trace),
            ("epsilon_initial", self.epsilon_initial),
            ("epsilon_final", self.epsilon_final),
            ("main_epsilon", self.main_epsilon),
            ("gamma", self.gamma),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return bad(format!("{name} = {value} is outside [0, 1]"));
            }
        }
        if !self.tolerance.is_finite() || self.tolerance < 0.0 {
            return bad(format!("tolerance = {} must be finite and nonnegative", self.tolerance));
        }
        for (name, value) in [
            ("eval_every", self.eval_every),
            ("eval_episodes", self.eval_episodes),
            ("repeats", self.repeats),
            ("episode_cap", self.episode_cap),
        ] {
            if value == 0 {
                return bad(format!("{name} must be positive"));
            }
        }
        // max_steps = 0 stays legal: the run degenerates to one evaluation
        // of the untrained tables.
        validate_threshold_for(self.algorithm.algorithm(), &self.threshold)?;
        if self.algorithm != AlgorithmChoice::LisprRecovery && self.proxy != ProxyKind::Oracle {
            return bad(format!(
                "proxy = {} applies to lispr-recovery only",
                self.proxy
            ));
        }
        if !self.algorithm.uses_source_policy() {
            if self.main_epsilon != 0.0 {
                return bad("main_epsilon has no effect under baseline-q; set it to 0".to_string());
            }
            if self.warmup_primal_steps != 0 {
                return bad(
                    "warmup_primal_steps needs a source policy; baseline-q has none".to_string(),
                );
            }
        } else if self.variant != Variant::Target {
            return bad(format!(
                "{} transfers a source policy onto the target variant; train the source with baseline-q",
                self.algorithm
            ));
        }
        Ok(())
    }

    pub fn threshold_spec(&self) -> ThresholdSpec {
        ThresholdSpec { kind: self.threshold, tolerance: self.tolerance }
    }

    pub fn train_params(&self) -> TrainParams {
        TrainParams {
            max_steps: self.max_steps,
            episode_cap: self.episode_cap,
            alpha: self.alpha,
            lambda: self.lambda_trace,
            alpha_g: self.alpha,
            alpha_v: self.alpha,
            epsilon: EpsilonSchedule {
                initial: self.epsilon_initial,
                final_value: self.epsilon_final,
                horizon: self.max_steps,
            },
            option_epsilon: self.main_epsilon,
            warmup_primal_steps: self.warmup_primal_steps,
            relabel: self.relabel,
            proxy: self.proxy,
            threshold: self.threshold_spec(),
            eval_every: self.eval_every,
            eval_episodes: self.eval_episodes,
        }
    }
}

/// Built task plus, for the transfer algorithms, the frozen source policy.
pub struct TaskSetup {
    pub mdp: TabularMdp,
    pub meta: GridMeta,
    pub mu: Option<SourcePolicy>,
    pub source_meta: Option<GridMeta>,
}

/// Builds the configured task. The transfer algorithms get their source
/// policy by solving the source layout exactly with value iteration,
/// freezing the greedy policy, and routing each target state through the
/// layout mapping; this stands in for a converged source training run and
/// keeps the policy deterministic across machines.
pub fn build_task(config: &RunConfig) -> Result<TaskSetup, ExperimentError> {
    let build = |variant| match config.env {
        Env::Multiroom => build_multiroom(variant, config.gamma),
        Env::Boxworld => build_boxworld(variant, config.gamma),
    };
    let (mdp, meta) = build(config.variant);
    if !config.algorithm.uses_source_policy() {
        return Ok(TaskSetup { mdp, meta, mu: None, source_meta: None });
    }
    let (source_mdp, source_meta) = build(Variant::Source);
    let (_, greedy) = value_iteration(&source_mdp, 1e-12)?;
    let source_mu = SourcePolicy::Deterministic(greedy);
    let map = state_map(&meta, &source_meta)?;
    let mu = source_mu.compose(&map);
    Ok(TaskSetup { mdp, meta, mu: Some(mu), source_meta: Some(source_meta) })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn multiroom_recovery_json() -> String {
        r#"{
            "env": "multiroom",
            "variant": "target",
            "algorithm": "lispr-recovery",
            "alpha": 0.25,
            "lambda_trace": 0.0,
            "epsilon_initial": 1.0,
            "epsilon_final": 0.1,
            "main_epsilon": 0.25,
            "gamma": 0.99,
            "max_steps": 500000,
            "eval_every": 1000,
            "eval_episodes": 10,
            "repeats": 10,
            "episode_cap": 500,
            "threshold": "recovery-value",
            "seed": 7
        }"#
        .to_string()
    }

    #[test]
    fn parses_a_full_config_and_fills_defaults() {
        let config = RunConfig::from_json(&multiroom_recovery_json()).unwrap();
        assert_eq!(config.algorithm, AlgorithmChoice::LisprRecovery);
        assert_eq!(config.proxy, ProxyKind::Oracle);
        assert_eq!(config.tolerance, 0.0);
        assert_eq!(config.warmup_primal_steps, 0);
        assert_eq!(config.threshold, ThresholdKind::RecoveryValue);
        let params = config.train_params();
        assert_eq!(params.alpha, 0.25);
        assert_eq!(params.alpha_g, 0.25);
        assert_eq!(params.epsilon.horizon, 500000);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = multiroom_recovery_json().replace("\"alpha\"", "\"aplha\"");
        let err = RunConfig::from_json(&text).unwrap_err();
        assert!(err.to_string().contains("aplha"), "got: {err}");
    }

    #[test]
    fn incompatible_threshold_is_rejected() {
        let text = multiroom_recovery_json().replace("recovery-value", "student-value");
        assert!(RunConfig::from_json(&text).is_err());
    }

    #[test]
    fn transfer_on_the_source_variant_is_rejected() {
        let text = multiroom_recovery_json().replace("\"target\"", "\"source\"");
        let err = RunConfig::from_json(&text).unwrap_err();
        assert!(err.to_string().contains("target variant"), "got: {err}");
    }

    #[test]
    fn constant_threshold_round_trips_through_json() {
        let text = multiroom_recovery_json()
            .replace("\"recovery-value\"", r#"{"constant": {"value": 0.9}}"#);
        let config = RunConfig::from_json(&text).unwrap();
        assert_eq!(config.threshold, ThresholdKind::Constant { value: 0.9 });
        let round = serde_json::to_string(&config).unwrap();
        assert_eq!(RunConfig::from_json(&round).unwrap(), config);
    }

    #[test]
    fn baseline_with_option_exploration_is_rejected() {
        let text = multiroom_recovery_json()
            .replace("lispr-recovery", "baseline-q")
            .replace("\"threshold\": \"recovery-value\"", "\"threshold\": \"behavior-value\"");
        let err = RunConfig::from_json(&text).unwrap_err();
        assert!(err.to_string().contains("main_epsilon"), "got: {err}");
    }

    #[test]
    fn degenerate_zero_step_config_is_allowed() {
        let text = multiroom_recovery_json().replace("\"max_steps\": 500000", "\"max_steps\": 0");
        let config = RunConfig::from_json(&text).unwrap();
        assert_eq!(config.max_steps, 0);
    }

    #[test]
    fn task_setup_builds_a_composed_source_policy() {
        let mut config = RunConfig::from_json(&multiroom_recovery_json()).unwrap();
        config.max_steps = 1000;
        let setup = build_task(&config).unwrap();
        assert!(setup.mu.is_some());
        let mu = setup.mu.unwrap();
        assert_eq!(mu.num_states(), setup.mdp.num_states);
        mu.validate(setup.mdp.num_states, setup.mdp.num_actions).unwrap();
    }
}
