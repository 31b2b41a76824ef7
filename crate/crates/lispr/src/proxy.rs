//! Surrogate rewards for the recovery learner built from the success
//! predictor alone, so recovery can be trained without reading the task
//! reward. The `diff` transform is exact in expectation when the predictor
//! is; the two scaled transforms are biased with the bias vanishing as the
//! discount approaches one; the indicator just pays for reaching the set.
//!
//! All transforms share one continuation: zero on entering the initiation
//! set or a terminal state, the task discount otherwise.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::mdp::TransitionRecord;
use crate::options::{g_state_value, SourcePolicy};
use crate::tabular::ActionTable;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProxyKind {
    /// The recovery reward as defined: task reward, plus the discounted
    /// success prediction on entering the set. Default.
    Oracle,
    /// `G(s, a) - zeta * G(s')`: telescopes to the oracle value when the
    /// predictor satisfies its own one-step equation.
    Diff,
    /// `(1 - zeta) * G(s, a)`.
    ScaledG,
    /// `(1 - zeta) * G(s')`.
    ScaledNextG,
    /// One on entering the set, zero otherwise.
    Indicator,
}

impl fmt::Display for ProxyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            ProxyKind::Oracle => "oracle",
            ProxyKind::Diff => "diff",
            ProxyKind::ScaledG => "scaled-g",
            ProxyKind::ScaledNextG => "scaled-next-g",
            ProxyKind::Indicator => "indicator",
        };
        write!(f, "{name}")
    }
}

impl std::str::FromStr for ProxyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "oracle" => Ok(ProxyKind::Oracle),
            "diff" => Ok(ProxyKind::Diff),
            "scaled-g" => Ok(ProxyKind::ScaledG),
            "scaled-next-g" => Ok(ProxyKind::ScaledNextG),
            "indicator" => Ok(ProxyKind::Indicator),
            other => Err(format!(
                "unknown proxy '{other}' (expected oracle, diff, scaled-g, scaled-next-g, or indicator)"
            )),
        }
    }
}

/// Continuation carried past `s'`: zero once the set or a terminal state is
/// reached, the discount otherwise.
pub fn continuation_zeta(next_in_l: bool, terminal_next: bool, discount: f64) -> f64 {
    if next_in_l || terminal_next {
        0.0
    } else {
        discount
    }
}

/// The transform on scalars: `g_sa` is the predictor at the taken pair,
/// `g_next` its state value at the next state. Shared by the online path
/// and the exact relabeled-task builders, which feed it per outcome.
pub fn proxy_reward_terms(
    kind: ProxyKind,
    g_sa: f64,
    g_next: f64,
    env_reward: f64,
    next_in_l: bool,
    terminal_next: bool,
    discount: f64,
) -> (f64, f64) {
    let zeta = continuation_zeta(next_in_l, terminal_next, discount);
    let reward = match kind {
        ProxyKind::Oracle => {
            if terminal_next {
                env_reward
            } else if next_in_l {
                env_reward + discount * g_next
            } else {
                env_reward
            }
        }
        ProxyKind::Diff => g_sa - zeta * g_next,
        ProxyKind::ScaledG => (1.0 - zeta) * g_sa,
        ProxyKind::ScaledNextG => (1.0 - zeta) * g_next,
        ProxyKind::Indicator => {
            if next_in_l {
                1.0
            } else {
                0.0
            }
        }
    };
    (reward, zeta)
}

/// Transform one recorded transition against the current tables.
pub fn proxy_reward(
    kind: ProxyKind,
    t: &TransitionRecord,
    g: &ActionTable,
    mu: &SourcePolicy,
    next_in_l: bool,
    discount: f64,
) -> (f64, f64) {
    proxy_reward_terms(
        kind,
        g.get(t.state, t.action),
        g_state_value(g, mu, t.next_state),
        t.reward,
        next_in_l,
        t.continuation == 0.0,
        discount,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{OptionChoice, TabularMdp};
    use crate::options::recovery_reward;
    use crate::oracle::fixtures::chain;
    use crate::oracle::{compute_g_exact, deterministic_matrix, value_iteration};

    fn record(
        state: usize,
        action: usize,
        reward: f64,
        continuation: f64,
        next: usize,
    ) -> TransitionRecord {
        TransitionRecord {
            state,
            option: OptionChoice::Learner,
            action,
            reward,
            continuation,
            next_state: next,
            was_greedy: true,
        }
    }

    #[test]
    fn zeta_truth_table() {
        assert_eq!(continuation_zeta(true, false, 0.99), 0.0);
        assert_eq!(continuation_zeta(false, false, 0.99), 0.99);
        assert_eq!(continuation_zeta(false, true, 0.99), 0.0);
        assert_eq!(continuation_zeta(true, true, 0.99), 0.0);
    }

    #[test]
    fn transform_formulas() {
        // Ordinary transition, s' outside the set: zeta is the discount.
        let (r, c) = proxy_reward_terms(ProxyKind::Diff, 0.8, 0.6, 0.0, false, false, 0.99);
        assert!((r - (0.8 - 0.99 * 0.6)).abs() < 1e-15);
        assert_eq!(c, 0.99);
        let (r, _) = proxy_reward_terms(ProxyKind::ScaledG, 0.8, 0.6, 0.0, false, false, 0.99);
        assert!((r - 0.01 * 0.8).abs() < 1e-15);
        let (r, _) =
            proxy_reward_terms(ProxyKind::ScaledNextG, 0.8, 0.6, 0.0, false, false, 0.99);
        assert!((r - 0.01 * 0.6).abs() < 1e-15);
        // Entering the set zeroes the continuation and the scaling gap.
        let (r, c) = proxy_reward_terms(ProxyKind::Diff, 0.8, 0.6, 0.0, true, false, 0.99);
        assert_eq!((r, c), (0.8, 0.0));
        let (r, _) = proxy_reward_terms(ProxyKind::ScaledNextG, 0.8, 0.6, 0.0, true, false, 0.99);
        assert_eq!(r, 0.6);
        let (r, _) = proxy_reward_terms(ProxyKind::Indicator, 0.8, 0.6, 0.0, true, false, 0.99);
        assert_eq!(r, 1.0);
        let (r, _) = proxy_reward_terms(ProxyKind::Indicator, 0.8, 0.6, 0.0, false, false, 0.99);
        assert_eq!(r, 0.0);
    }

    #[test]
    fn oracle_transform_matches_recovery_reward() {
        let mu = SourcePolicy::Deterministic(vec![1; 5]);
        let mut g = ActionTable::zeros(5, 2);
        for s in 0..5 {
            g.set(s, 1, 0.1 + 0.2 * s as f64);
        }
        for (next_in_l, continuation) in [(false, 0.9), (true, 0.9), (false, 0.0), (true, 0.0)] {
            let t = record(2, 1, 0.3, continuation, 3);
            let by_transform = proxy_reward(ProxyKind::Oracle, &t, &g, &mu, next_in_l, 0.9);
            let by_definition = recovery_reward(&t, next_in_l, g_state_value(&g, &mu, 3), 0.9);
            assert_eq!(by_transform, by_definition);
        }
    }

    #[test]
    fn zero_predictor_collapses_all_but_the_indicator() {
        let mu = SourcePolicy::Deterministic(vec![1; 4]);
        let g = ActionTable::zeros(4, 2);
        // Zero task reward, entering the set.
        let t = record(1, 1, 0.0, 0.9, 2);
        let oracle = proxy_reward(ProxyKind::Oracle, &t, &g, &mu, true, 0.9);
        for kind in [ProxyKind::Diff, ProxyKind::ScaledG, ProxyKind::ScaledNextG] {
            assert_eq!(proxy_reward(kind, &t, &g, &mu, true, 0.9), oracle);
        }
        assert_eq!(proxy_reward(ProxyKind::Indicator, &t, &g, &mu, true, 0.9).0, 1.0);
    }

    #[test]
    fn diff_equals_oracle_per_transition_with_exact_predictor() {
        // Deterministic dynamics make the predictor's one-step equation hold
        // without expectation, so the transform agrees transition by
        // transition, not just in value.
        let mdp = chain(7, 0.9);
        let mu = SourcePolicy::Deterministic(vec![1; 7]);
        let exact = compute_g_exact(&mdp, &mu.matrix(2)).unwrap();
        let g = ActionTable::from_values(7, 2, exact.q.clone());
        let in_l = [false, false, false, false, true, true, false];
        for s in 0..6usize {
            for a in 0..2usize {
                let o = &mdp.rows[s][a][0];
                let continuation = if mdp.terminal[o.next_state] { 0.0 } else { 0.9 };
                let t = record(s, a, o.reward, continuation, o.next_state);
                let diff = proxy_reward(ProxyKind::Diff, &t, &g, &mu, in_l[o.next_state], 0.9);
                let oracle =
                    proxy_reward(ProxyKind::Oracle, &t, &g, &mu, in_l[o.next_state], 0.9);
                assert!(
                    (diff.0 - oracle.0).abs() < 1e-12,
                    "state {s} action {a}: {} vs {}",
                    diff.0,
                    oracle.0
                );
                assert_eq!(diff.1, oracle.1);
            }
        }
    }

    /// Relabel a task in place: member states become absorbing and every
    /// remaining transition's reward goes through the transform.
    fn relabeled_task(
        mdp: &TabularMdp,
        in_l: &[bool],
        g: &ActionTable,
        mu: &SourcePolicy,
        kind: ProxyKind,
    ) -> TabularMdp {
        let mut out = mdp.clone();
        for s in 0..out.num_states {
            if in_l[s] && !out.terminal[s] {
                out.terminal[s] = true;
                out.rows[s] = vec![
                    vec![crate::mdp::Outcome {
                        next_state: s,
                        probability: 1.0,
                        reward: 0.0
                    }];
                    out.num_actions
                ];
            }
        }
        for s in 0..out.num_states {
            if out.terminal[s] {
                continue;
            }
            for a in 0..out.num_actions {
                for o in &mut out.rows[s][a] {
                    let terminal_next = mdp.terminal[o.next_state];
                    let (reward, _) = proxy_reward_terms(
                        kind,
                        g.get(s, a),
                        g_state_value(g, mu, o.next_state),
                        o.reward,
                        in_l[o.next_state],
                        terminal_next,
                        mdp.discount,
                    );
                    o.reward = reward;
                }
            }
        }
        let live: f64 = (0..out.num_states)
            .filter(|&s| !out.terminal[s])
            .map(|s| out.initial[s])
            .sum();
        for s in 0..out.num_states {
            out.initial[s] = if out.terminal[s] { 0.0 } else { out.initial[s] / live };
        }
        out
    }

    #[test]
    fn indicator_matches_oracle_policy_without_discounting() {
        // Binary terminal task at discount one: the predictor is exactly one
        // wherever the source policy succeeds, so paying the prediction on
        // entry and paying one on entry induce the same recovery task.
        let mdp = chain(7, 1.0);
        let mu = SourcePolicy::Deterministic(vec![1; 7]);
        let exact = compute_g_exact(&mdp, &mu.matrix(2)).unwrap();
        let g = ActionTable::from_values(7, 2, exact.q.clone());
        for s in 0..6 {
            assert!((g_state_value(&g, &mu, s) - 1.0).abs() < 1e-9);
        }
        let in_l = [false, false, false, false, true, true, false];
        let oracle_task = relabeled_task(&mdp, &in_l, &g, &mu, ProxyKind::Oracle);
        let indicator_task = relabeled_task(&mdp, &in_l, &g, &mu, ProxyKind::Indicator);
        let (ov, op) = value_iteration(&oracle_task, 1e-12).unwrap();
        let (iv, ip) = value_iteration(&indicator_task, 1e-12).unwrap();
        for s in 0..4 {
            assert_eq!(op[s], ip[s], "greedy choice differs at state {s}");
            assert!((ov.v[s] - iv.v[s]).abs() < 1e-9);
        }
    }

    #[test]
    fn relabeled_task_is_valid_and_matches_recovery_construction() {
        let mdp = chain(6, 0.9);
        let mu = SourcePolicy::Deterministic(vec![1; 6]);
        let exact = compute_g_exact(&mdp, &mu.matrix(2)).unwrap();
        let g = ActionTable::from_values(6, 2, exact.q.clone());
        let in_l = [false, false, true, true, false, false];
        let task = relabeled_task(&mdp, &in_l, &g, &mu, ProxyKind::Oracle);
        task.validate().unwrap();
        let g_states: Vec<f64> = (0..6).map(|s| g_state_value(&g, &mu, s)).collect();
        let recovery = crate::oracle::build_recovery_mdp(&mdp, &in_l, &g_states);
        let mine = crate::oracle::policy_evaluation_exact(
            &task,
            &deterministic_matrix(&vec![1; 6], 2),
        )
        .unwrap();
        let theirs = crate::oracle::policy_evaluation_exact(
            &recovery,
            &deterministic_matrix(&vec![1; 6], 2),
        )
        .unwrap();
        for s in 0..6 {
            assert!((mine.v[s] - theirs.v[s]).abs() < 1e-12);
        }
    }
}
