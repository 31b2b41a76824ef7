//! Option layer: a frozen source policy wrapped as a primal option, the
//! initiation set that gates it, recovery-reward relabeling, and the three
//! training loops (baseline learner, recovery learner, student learner).
//!
//! The main policy runs the source policy wherever the learned success
//! predictor clears the threshold and hands control to the learner
//! everywhere else. All switching is state-based, so membership can be
//! recomputed from frozen tables at any time.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

use crate::mdp::{
    derive_seed, rng_from_seed, sample_initial, step, OptionChoice, RunRng, TabularMdp,
    TransitionRecord,
};
use crate::proxy::{proxy_reward, ProxyKind};
use crate::tabular::{
    epsilon_greedy, g_td_update, greedy_action, is_greedy, q_lambda_update, v_behavior_update,
    ActionTable, BootstrapPolicy, EligibilityTrace, EpsilonSchedule,
};

/// Stream offset separating evaluation RNGs from everything else derived
/// from a run seed.
const EVAL_STREAM_BASE: u64 = 1 << 32;

#[derive(Debug, Error)]
pub enum OptionsError {
    #[error("threshold '{kind}' needs the {table} table, which is not available here")]
    MissingTable { kind: &'static str, table: &'static str },
    #[error("threshold '{kind}' cannot be used with the {algorithm} algorithm")]
    IncompatibleThreshold { kind: String, algorithm: String },
    #[error("bad training parameter: {0}")]
    BadParams(String),
    #[error("malformed source policy: {0}")]
    BadPolicy(String),
}

/// A frozen policy treated as a black box: only sampling (and, for the
/// exact solvers, its action distribution) is ever consulted.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum SourcePolicy {
    /// One fixed action per state.
    Deterministic(Vec<usize>),
    /// One distribution over actions per state.
    Stochastic(Vec<Vec<f64>>),
}

impl SourcePolicy {
    pub fn num_states(&self) -> usize {
        match self {
            SourcePolicy::Deterministic(actions) => actions.len(),
            SourcePolicy::Stochastic(rows) => rows.len(),
        }
    }

    /// Greedy policy read off an action-value table, lowest action id on
    /// ties so the result is reproducible without a generator.
    pub fn from_greedy_table(q: &ActionTable) -> SourcePolicy {
        SourcePolicy::Deterministic((0..q.num_states).map(|s| q.row_argmax_first(s)).collect())
    }

    /// Policy over a new state space that consults this policy at
    /// `target_to_source[s]`. This is how a policy trained on one layout
    /// drives a larger one.
    pub fn compose(&self, target_to_source: &[usize]) -> SourcePolicy {
        match self {
            SourcePolicy::Deterministic(actions) => SourcePolicy::Deterministic(
                target_to_source.iter().map(|&src| actions[src]).collect(),
            ),
            SourcePolicy::Stochastic(rows) => SourcePolicy::Stochastic(
                target_to_source.iter().map(|&src| rows[src].clone()).collect(),
            ),
        }
    }

    pub fn action_probability(&self, state: usize, action: usize) -> f64 {
        match self {
            SourcePolicy::Deterministic(actions) => {
                if actions[state] == action {
                    1.0
                } else {
                    0.0
                }
            }
            SourcePolicy::Stochastic(rows) => rows[state][action],
        }
    }

    /// Dense action-distribution rows for the exact solvers.
    pub fn matrix(&self, num_actions: usize) -> Vec<Vec<f64>> {
        match self {
            SourcePolicy::Deterministic(actions) => actions
                .iter()
                .map(|&a| {
                    let mut row = vec![0.0; num_actions];
                    row[a] = 1.0;
                    row
                })
                .collect(),
            SourcePolicy::Stochastic(rows) => rows.clone(),
        }
    }

    pub fn validate(&self, num_states: usize, num_actions: usize) -> Result<(), OptionsError> {
        if self.num_states() != num_states {
            return Err(OptionsError::BadPolicy(format!(
                "policy covers {} states, mdp has {}",
                self.num_states(),
                num_states
            )));
        }
        match self {
            SourcePolicy::Deterministic(actions) => {
                for (s, &a) in actions.iter().enumerate() {
                    if a >= num_actions {
                        return Err(OptionsError::BadPolicy(format!(
                            "state {s} picks action {a}, mdp has {num_actions}"
                        )));
                    }
                }
            }
            SourcePolicy::Stochastic(rows) => {
                for (s, row) in rows.iter().enumerate() {
                    if row.len() != num_actions {
                        return Err(OptionsError::BadPolicy(format!(
                            "state {s} has {} action probabilities, mdp has {num_actions}",
                            row.len()
                        )));
                    }
                    if row.iter().any(|&p| p < 0.0) {
                        return Err(OptionsError::BadPolicy(format!(
                            "state {s} has a negative action probability"
                        )));
                    }
                    let total: f64 = row.iter().sum();
                    if (total - 1.0).abs() > 1e-9 {
                        return Err(OptionsError::BadPolicy(format!(
                            "state {s} action probabilities sum to {total}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

impl BootstrapPolicy for SourcePolicy {
    /// A deterministic policy consumes no draws; a stochastic one consumes
    /// exactly one uniform, scanned in row order like the environment step.
    fn sample(&self, rng: &mut RunRng, state: usize) -> usize {
        match self {
            SourcePolicy::Deterministic(actions) => actions[state],
            SourcePolicy::Stochastic(rows) => {
                let u: f64 = rng.random();
                let row = &rows[state];
                let mut cumulative = 0.0;
                for (a, &p) in row.iter().enumerate() {
                    cumulative += p;
                    if u < cumulative {
                        return a;
                    }
                }
                row.len() - 1
            }
        }
    }
}

/// Success-predictor value of a state: the predictor at the source
/// policy's own action (its expectation for a stochastic policy).
pub fn g_state_value(g: &ActionTable, mu: &SourcePolicy, state: usize) -> f64 {
    match mu {
        SourcePolicy::Deterministic(actions) => g.get(state, actions[state]),
        SourcePolicy::Stochastic(rows) => rows[state]
            .iter()
            .enumerate()
            .map(|(a, &p)| p * g.get(state, a))
            .sum(),
    }
}

/// What the success predictor is compared against when deciding whether a
/// state belongs to the initiation set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdKind {
    /// Fixed cutoff, the hand-tuned variant.
    Constant { value: f64 },
    /// The recovery learner's own state value (max over its action values).
    RecoveryValue,
    /// The student learner's own state value.
    StudentValue,
    /// The TD(0) estimate of the behavior policy's value.
    BehaviorValue,
}

impl fmt::Display for ThresholdKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ThresholdKind::Constant { value } => write!(f, "constant({value})"),
            ThresholdKind::RecoveryValue => write!(f, "recovery-value"),
            ThresholdKind::StudentValue => write!(f, "student-value"),
            ThresholdKind::BehaviorValue => write!(f, "behavior-value"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSpec {
    pub kind: ThresholdKind,
    /// Slack subtracted from the threshold; membership is
    /// `G(s) >= tau(s) - tolerance`.
    pub tolerance: f64,
}

/// Value tables a threshold may read. Callers pass whichever exist for the
/// algorithm at hand; asking for a missing one is an error, never a default.
#[derive(Clone, Copy, Default)]
pub struct ThresholdTables<'a> {
    pub recovery_q: Option<&'a ActionTable>,
    pub student_q: Option<&'a ActionTable>,
    pub behavior_v: Option<&'a [f64]>,
}

pub fn threshold_value(
    spec: &ThresholdSpec,
    tables: &ThresholdTables,
    state: usize,
) -> Result<f64, OptionsError> {
    match spec.kind {
        ThresholdKind::Constant { value } => Ok(value),
        ThresholdKind::RecoveryValue => tables
            .recovery_q
            .map(|q| q.row_max(state))
            .ok_or(OptionsError::MissingTable { kind: "recovery-value", table: "recovery" }),
        ThresholdKind::StudentValue => tables
            .student_q
            .map(|q| q.row_max(state))
            .ok_or(OptionsError::MissingTable { kind: "student-value", table: "student" }),
        ThresholdKind::BehaviorValue => tables
            .behavior_v
            .map(|v| v[state])
            .ok_or(OptionsError::MissingTable { kind: "behavior-value", table: "behavior value" }),
    }
}

/// The membership rule itself, shared by the learned and the exact route.
pub fn membership_rule(g_value: f64, tau: f64, tolerance: f64) -> bool {
    g_value >= tau - tolerance
}

pub fn in_initiation_set(
    g: &ActionTable,
    mu: &SourcePolicy,
    spec: &ThresholdSpec,
    tables: &ThresholdTables,
    state: usize,
) -> Result<bool, OptionsError> {
    let tau = threshold_value(spec, tables, state)?;
    Ok(membership_rule(g_state_value(g, mu, state), tau, spec.tolerance))
}

/// Membership indicator for every state.
pub fn membership(
    g: &ActionTable,
    mu: &SourcePolicy,
    spec: &ThresholdSpec,
    tables: &ThresholdTables,
    num_states: usize,
) -> Result<Vec<bool>, OptionsError> {
    (0..num_states)
        .map(|s| in_initiation_set(g, mu, spec, tables, s))
        .collect()
}

/// Termination probability of the primal option: it runs until it leaves
/// the initiation set or the episode ends.
pub fn primal_beta(in_l: bool, terminal: bool) -> f64 {
    if !in_l || terminal {
        1.0
    } else {
        0.0
    }
}

/// The main policy proper: source policy inside the initiation set, learner
/// outside.
pub fn main_select(in_l: bool) -> OptionChoice {
    if in_l {
        OptionChoice::Primal
    } else {
        OptionChoice::Learner
    }
}

/// Option choice with option-level exploration. One uniform decides whether
/// to explore; a second picks one of the two options evenly when it fires.
pub fn main_select_explore(rng: &mut RunRng, in_l: bool, epsilon: f64) -> OptionChoice {
    let u: f64 = rng.random();
    if u < epsilon {
        if rng.random::<f64>() < 0.5 {
            OptionChoice::Primal
        } else {
            OptionChoice::Learner
        }
    } else {
        main_select(in_l)
    }
}

/// Reward and continuation seen by the recovery learner. Entering the
/// initiation set pays the environment reward plus the discounted success
/// prediction there and terminates the pseudo-episode; a terminal next
/// state ends it with the environment reward alone (the terminal check
/// wins, so no bonus is paid for terminal members).
pub fn recovery_reward(
    t: &TransitionRecord,
    next_in_l: bool,
    g_next: f64,
    discount: f64,
) -> (f64, f64) {
    if t.continuation == 0.0 {
        (t.reward, 0.0)
    } else if next_in_l {
        (t.reward + discount * g_next, 0.0)
    } else {
        (t.reward, t.continuation)
    }
}

/// Two readings of the recovery relabel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RelabelMode {
    /// Entering the set pays `r + gamma * G(s')`, the recovery reward as
    /// defined. Default.
    DefinitionFaithful,
    /// Entering the set pays `G(s, a)` at the taken pair with the discount
    /// zeroed, trusting the predictor's own one-step consistency. Matches
    /// the update as commonly written out; coincides with the faithful
    /// reading when the predictor is exact.
    AlgorithmLiteral,
}

/// Relabeled reward and continuation for one transition. Pure in the
/// tables, so relabeling is idempotent once a transition has terminated
/// (continuation zero short-circuits every mode).
pub fn relabel_transition(
    t: &TransitionRecord,
    mode: RelabelMode,
    g: &ActionTable,
    mu: &SourcePolicy,
    next_in_l: bool,
    discount: f64,
) -> (f64, f64) {
    match mode {
        RelabelMode::DefinitionFaithful => {
            recovery_reward(t, next_in_l, g_state_value(g, mu, t.next_state), discount)
        }
        RelabelMode::AlgorithmLiteral => {
            if t.continuation == 0.0 {
                (t.reward, 0.0)
            } else if next_in_l {
                (g.get(t.state, t.action), 0.0)
            } else {
                (t.reward, t.continuation)
            }
        }
    }
}

/// Relabel a recorded batch against frozen tables. Membership of each
/// transition's next state is recomputed from the tables, so applying this
/// twice yields the same records.
pub fn relabel_recovery_batch(
    transitions: &[TransitionRecord],
    mode: RelabelMode,
    g: &ActionTable,
    mu: &SourcePolicy,
    spec: &ThresholdSpec,
    tables: &ThresholdTables,
    discount: f64,
) -> Result<Vec<TransitionRecord>, OptionsError> {
    transitions
        .iter()
        .map(|t| {
            let next_in_l = in_initiation_set(g, mu, spec, tables, t.next_state)?;
            let (reward, continuation) = relabel_transition(t, mode, g, mu, next_in_l, discount);
            Ok(TransitionRecord { reward, continuation, ..*t })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    /// Plain Watkins Q(lambda) on the task, no source policy.
    Baseline,
    /// Learner maximizes the recovery reward (reach the initiation set).
    Recovery,
    /// Learner maximizes the task return, updating from both options'
    /// transitions.
    Student,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Algorithm::Baseline => write!(f, "baseline"),
            Algorithm::Recovery => write!(f, "recovery"),
            Algorithm::Student => write!(f, "student"),
        }
    }
}

/// A self-valued threshold must point at the table the algorithm actually
/// maintains: the recovery learner has no student table and vice versa.
pub fn validate_threshold_for(
    algorithm: Algorithm,
    kind: &ThresholdKind,
) -> Result<(), OptionsError> {
    let ok = match algorithm {
        Algorithm::Baseline => true,
        Algorithm::Recovery => !matches!(kind, ThresholdKind::StudentValue),
        Algorithm::Student => !matches!(kind, ThresholdKind::RecoveryValue),
    };
    if ok {
        Ok(())
    } else {
        Err(OptionsError::IncompatibleThreshold {
            kind: kind.to_string(),
            algorithm: algorithm.to_string(),
        })
    }
}

#[derive(Clone, Debug)]
pub struct TrainParams {
    pub max_steps: u64,
    /// Episodes truncate after this many steps without entering a terminal
    /// state; truncation clears traces but keeps the bootstrap discount.
    pub episode_cap: u64,
    /// Learner step size.
    pub alpha: f64,
    /// Eligibility-trace decay for the learner.
    pub lambda: f64,
    /// Success-predictor step size.
    pub alpha_g: f64,
    /// Behavior-value step size.
    pub alpha_v: f64,
    /// Action-level exploration for the learner option.
    pub epsilon: EpsilonSchedule,
    /// Option-level exploration of the main policy.
    pub option_epsilon: f64,
    /// Initial stretch with the source policy forced and only the success
    /// predictor updating.
    pub warmup_primal_steps: u64,
    pub relabel: RelabelMode,
    /// Reward fed to the recovery learner; `Oracle` is the recovery reward
    /// itself (via `relabel`), everything else is a predictor-only
    /// surrogate.
    pub proxy: ProxyKind,
    pub threshold: ThresholdSpec,
    pub eval_every: u64,
    pub eval_episodes: u64,
}

impl TrainParams {
    fn validate(&self, algorithm: Algorithm) -> Result<(), OptionsError> {
        let bad = |msg: &str| Err(OptionsError::BadParams(msg.to_string()));
        // max_steps = 0 is allowed: the run degenerates to a single
        // evaluation of the untrained tables.
        if self.episode_cap == 0 {
            return bad("episode_cap must be positive");
        }
        if self.eval_every == 0 {
            return bad("eval_every must be positive");
        }
        if self.eval_episodes == 0 {
            return bad("eval_episodes must be positive");
        }
        for (name, value) in [
            ("alpha", self.alpha),
            ("alpha_g", self.alpha_g),
            ("alpha_v", self.alpha_v),
            ("lambda", self.lambda),
            ("option_epsilon", self.option_epsilon),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(OptionsError::BadParams(format!(
                    "{name} = {value} is outside [0, 1]"
                )));
            }
        }
        if algorithm != Algorithm::Recovery && self.proxy != ProxyKind::Oracle {
            return bad("proxy rewards apply to the recovery algorithm only");
        }
        validate_threshold_for(algorithm, &self.threshold.kind)
    }
}

/// One point of a learning curve: greedy-policy evaluation on frozen
/// tables. Returns are undiscounted sums; success means the episode reached
/// a terminal state before the cap.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalPoint {
    pub step: u64,
    pub mean_return: f64,
    pub success_rate: f64,
}

#[derive(Clone, Debug)]
pub struct TrainResult {
    pub q: ActionTable,
    pub g: Option<ActionTable>,
    pub v_behavior: Option<Vec<f64>>,
    pub curve: Vec<EvalPoint>,
}

/// Threshold for the training loops, where a self-valued kind reads the
/// learner's own table (validated against the algorithm up front).
fn live_tau(kind: &ThresholdKind, q: &ActionTable, v: &[f64], state: usize) -> f64 {
    match kind {
        ThresholdKind::Constant { value } => *value,
        ThresholdKind::RecoveryValue | ThresholdKind::StudentValue => q.row_max(state),
        ThresholdKind::BehaviorValue => v[state],
    }
}

fn live_in_l(
    g: &ActionTable,
    mu: &SourcePolicy,
    spec: &ThresholdSpec,
    q: &ActionTable,
    v: &[f64],
    state: usize,
) -> bool {
    let tau = live_tau(&spec.kind, q, v, state);
    membership_rule(g_state_value(g, mu, state), tau, spec.tolerance)
}

/// Evaluate a policy closure over fresh episodes and report the mean
/// undiscounted return and the fraction of episodes that terminated.
pub fn evaluate_policy(
    mdp: &TabularMdp,
    rng: &mut RunRng,
    episodes: u64,
    cap: u64,
    mut select: impl FnMut(&mut RunRng, usize) -> usize,
) -> (f64, f64) {
    let mut total_return = 0.0;
    let mut successes = 0u64;
    for _ in 0..episodes {
        let mut state = sample_initial(rng, mdp);
        let mut episode_return = 0.0;
        for _ in 0..cap {
            let action = select(rng, state);
            let (next, reward, continuation) = step(rng, mdp, state, action);
            episode_return += reward;
            if continuation == 0.0 {
                successes += 1;
                break;
            }
            state = next;
        }
        total_return += episode_return;
    }
    let n = episodes as f64;
    (total_return / n, successes as f64 / n)
}

/// Evaluation seeds derive from the run seed and the eval ordinal alone, so
/// evaluation never touches the training stream and two runs that evaluate
/// at different cadences still train identically.
fn eval_rng(seed: u64, eval_index: u64) -> RunRng {
    rng_from_seed(derive_seed(seed, EVAL_STREAM_BASE + eval_index))
}

/// Plain Watkins Q(lambda) on the task reward.
pub fn train_baseline(
    mdp: &TabularMdp,
    params: &TrainParams,
    seed: u64,
) -> Result<TrainResult, OptionsError> {
    params.validate(Algorithm::Baseline)?;
    let (n, na) = (mdp.num_states, mdp.num_actions);
    let mut rng = rng_from_seed(seed);
    let mut q = ActionTable::zeros(n, na);
    let mut trace = EligibilityTrace::zeros(n, na);
    let mut curve = Vec::new();
    let mut eval_index = 0u64;

    let mut state = sample_initial(&mut rng, mdp);
    let mut episode_steps = 0u64;
    for step_idx in 0..params.max_steps {
        if step_idx % params.eval_every == 0 {
            let mut erng = eval_rng(seed, eval_index);
            eval_index += 1;
            let (mean_return, success_rate) =
                evaluate_policy(mdp, &mut erng, params.eval_episodes, params.episode_cap, |r, s| {
                    greedy_action(r, &q, s)
                });
            curve.push(EvalPoint { step: step_idx, mean_return, success_rate });
        }

        let epsilon = params.epsilon.value_at(step_idx);
        let (action, was_greedy) = epsilon_greedy(&mut rng, &q, state, epsilon);
        let (next, reward, continuation) = step(&mut rng, mdp, state, action);
        let t = TransitionRecord {
            state,
            option: OptionChoice::Learner,
            action,
            reward,
            continuation,
            next_state: next,
            was_greedy,
        };
        q_lambda_update(&mut q, &mut trace, &t, params.alpha, params.lambda);

        episode_steps += 1;
        if continuation == 0.0 || episode_steps >= params.episode_cap {
            trace.clear();
            state = sample_initial(&mut rng, mdp);
            episode_steps = 0;
        } else {
            state = next;
        }
    }

    let mut erng = eval_rng(seed, eval_index);
    let (mean_return, success_rate) =
        evaluate_policy(mdp, &mut erng, params.eval_episodes, params.episode_cap, |r, s| {
            greedy_action(r, &q, s)
        });
    curve.push(EvalPoint { step: params.max_steps, mean_return, success_rate });

    Ok(TrainResult { q, g: None, v_behavior: None, curve })
}

/// Shared loop for the two option-switching algorithms. Per step: pick the
/// option (forced primal during warmup), pick the action, step the
/// environment, update the success predictor, then (after warmup) the
/// behavior value and the learner, the latter on the relabeled reward for
/// the recovery algorithm and the task reward for the student. Draw order
/// is fixed: option draw, action draws, environment draw, bootstrap draw.
fn train_with_options(
    mdp: &TabularMdp,
    mu: &SourcePolicy,
    params: &TrainParams,
    seed: u64,
    algorithm: Algorithm,
) -> Result<TrainResult, OptionsError> {
    params.validate(algorithm)?;
    mu.validate(mdp.num_states, mdp.num_actions)?;
    let (n, na) = (mdp.num_states, mdp.num_actions);
    let mut rng = rng_from_seed(seed);
    let mut q = ActionTable::zeros(n, na);
    let mut g = ActionTable::zeros(n, na);
    let mut v = vec![0.0; n];
    let mut trace = EligibilityTrace::zeros(n, na);
    let mut curve = Vec::new();
    let mut eval_index = 0u64;

    let mut state = sample_initial(&mut rng, mdp);
    let mut episode_steps = 0u64;
    for step_idx in 0..params.max_steps {
        if step_idx % params.eval_every == 0 {
            let mut erng = eval_rng(seed, eval_index);
            eval_index += 1;
            let (mean_return, success_rate) =
                evaluate_policy(mdp, &mut erng, params.eval_episodes, params.episode_cap, |r, s| {
                    if live_in_l(&g, mu, &params.threshold, &q, &v, s) {
                        mu.sample(r, s)
                    } else {
                        greedy_action(r, &q, s)
                    }
                });
            curve.push(EvalPoint { step: step_idx, mean_return, success_rate });
        }

        let warming_up = step_idx < params.warmup_primal_steps;
        let option = if warming_up {
            OptionChoice::Primal
        } else {
            let in_l_here = live_in_l(&g, mu, &params.threshold, &q, &v, state);
            main_select_explore(&mut rng, in_l_here, params.option_epsilon)
        };
        let epsilon = params.epsilon.value_at(step_idx);
        let (action, was_greedy) = match option {
            OptionChoice::Primal => {
                let a = mu.sample(&mut rng, state);
                (a, is_greedy(&q, state, a))
            }
            OptionChoice::Learner => epsilon_greedy(&mut rng, &q, state, epsilon),
        };
        let (next, reward, continuation) = step(&mut rng, mdp, state, action);
        let t = TransitionRecord {
            state,
            option,
            action,
            reward,
            continuation,
            next_state: next,
            was_greedy,
        };

        g_td_update(&mut g, &t, mu, params.alpha_g, &mut rng);
        if !warming_up {
            v_behavior_update(&mut v, &t, params.alpha_v);
            let (learn_reward, learn_continuation) = match algorithm {
                Algorithm::Recovery => {
                    // Relabel against the just-updated predictor, online.
                    let next_in_l = live_in_l(&g, mu, &params.threshold, &q, &v, next);
                    match params.proxy {
                        ProxyKind::Oracle => {
                            relabel_transition(&t, params.relabel, &g, mu, next_in_l, mdp.discount)
                        }
                        kind => proxy_reward(kind, &t, &g, mu, next_in_l, mdp.discount),
                    }
                }
                Algorithm::Student => (reward, continuation),
                Algorithm::Baseline => unreachable!("baseline has its own loop"),
            };
            let learn_t =
                TransitionRecord { reward: learn_reward, continuation: learn_continuation, ..t };
            q_lambda_update(&mut q, &mut trace, &learn_t, params.alpha, params.lambda);
        }

        episode_steps += 1;
        if continuation == 0.0 || episode_steps >= params.episode_cap {
            trace.clear();
            state = sample_initial(&mut rng, mdp);
            episode_steps = 0;
        } else {
            state = next;
        }
    }

    let mut erng = eval_rng(seed, eval_index);
    let (mean_return, success_rate) =
        evaluate_policy(mdp, &mut erng, params.eval_episodes, params.episode_cap, |r, s| {
            if live_in_l(&g, mu, &params.threshold, &q, &v, s) {
                mu.sample(r, s)
            } else {
                greedy_action(r, &q, s)
            }
        });
    curve.push(EvalPoint { step: params.max_steps, mean_return, success_rate });

    Ok(TrainResult { q, g: Some(g), v_behavior: Some(v), curve })
}

/// Recovery learner: maximizes the relabeled recovery reward, so its value
/// estimates where the initiation set can be reached from.
pub fn train_recovery(
    mdp: &TabularMdp,
    mu: &SourcePolicy,
    params: &TrainParams,
    seed: u64,
) -> Result<TrainResult, OptionsError> {
    train_with_options(mdp, mu, params, seed, Algorithm::Recovery)
}

/// Student learner: maximizes the task return from both options'
/// transitions, eventually standing on its own.
pub fn train_student(
    mdp: &TabularMdp,
    mu: &SourcePolicy,
    params: &TrainParams,
    seed: u64,
) -> Result<TrainResult, OptionsError> {
    train_with_options(mdp, mu, params, seed, Algorithm::Student)
}
