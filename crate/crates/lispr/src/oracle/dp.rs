//! Exact dynamic programming on tabular MDPs: policy evaluation by direct
//! linear solve (iterative fallback for large state spaces), value iteration,
//! and the recovery-task construction used by the verification checks.

use crate::mdp::{Outcome, TabularMdp};
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// States at or below this size use a dense LU solve; larger systems iterate
/// the evaluation operator to the same residual.
const DIRECT_SOLVE_LIMIT: usize = 2000;
const ITER_TOL: f64 = 1e-13;
const MAX_SWEEPS: usize = 300_000;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("linear system is singular (discount 1 with an improper policy?)")]
    Singular,
    #[error("iteration did not converge within {0} sweeps")]
    NotConverged(usize),
    #[error("operation requires deterministic dynamics and policy")]
    RequiresDeterministic,
    #[error("bad input: {0}")]
    BadInput(String),
}

/// Exact state and action values plus the achieved numerical residual
/// (max Bellman error for the produced `v`).
#[derive(Clone, Debug)]
pub struct ExactValues {
    pub v: Vec<f64>,
    /// Flattened `[state * num_actions + action]`.
    pub q: Vec<f64>,
    pub residual: f64,
}

impl ExactValues {
    pub fn q_at(&self, state: usize, action: usize, num_actions: usize) -> f64 {
        self.q[state * num_actions + action]
    }
}

/// Per-state action distribution, `policy[s][a]`.
pub type PolicyMatrix = Vec<Vec<f64>>;

pub fn deterministic_matrix(actions: &[usize], num_actions: usize) -> PolicyMatrix {
    actions
        .iter()
        .map(|&a| {
            let mut row = vec![0.0; num_actions];
            row[a] = 1.0;
            row
        })
        .collect()
}

pub fn uniform_matrix(num_states: usize, num_actions: usize) -> PolicyMatrix {
    vec![vec![1.0 / num_actions as f64; num_actions]; num_states]
}

pub fn sup_norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Collapsed one-step model under a policy: expected reward and sparse
/// successor weights per state.
struct PolicyModel {
    reward: Vec<f64>,
    successors: Vec<Vec<(usize, f64)>>,
}

fn policy_model(mdp: &TabularMdp, policy: &PolicyMatrix) -> Result<PolicyModel, OracleError> {
    if policy.len() != mdp.num_states {
        return Err(OracleError::BadInput(format!(
            "policy has {} rows for {} states",
            policy.len(),
            mdp.num_states
        )));
    }
    let mut reward = vec![0.0; mdp.num_states];
    let mut successors = vec![Vec::new(); mdp.num_states];
    for s in 0..mdp.num_states {
        if mdp.terminal[s] {
            continue;
        }
        let row = &policy[s];
        if row.len() != mdp.num_actions {
            return Err(OracleError::BadInput(format!(
                "policy row {s} has {} entries",
                row.len()
            )));
        }
        let total: f64 = row.iter().sum();
        if (total - 1.0).abs() > 1e-9 || row.iter().any(|&p| p < -1e-15) {
            return Err(OracleError::BadInput(format!(
                "policy row {s} is not a distribution (sum {total})"
            )));
        }
        for (a, &pa) in row.iter().enumerate() {
            if pa == 0.0 {
                continue;
            }
            for o in &mdp.rows[s][a] {
                reward[s] += pa * o.probability * o.reward;
                successors[s].push((o.next_state, pa * o.probability));
            }
        }
    }
    Ok(PolicyModel { reward, successors })
}

/// Solves `V = r_pi + gamma P_pi V` exactly. Terminal states are pinned to
/// zero. The residual reported is the max evaluation error of the returned
/// `v`; the action values are one backup of `v`.
pub fn policy_evaluation_exact(
    mdp: &TabularMdp,
    policy: &PolicyMatrix,
) -> Result<ExactValues, OracleError> {
    let model = policy_model(mdp, policy)?;
    let n = mdp.num_states;
    let v = if n <= DIRECT_SOLVE_LIMIT {
        let mut a = DMatrix::<f64>::identity(n, n);
        let mut b = DVector::<f64>::zeros(n);
        for s in 0..n {
            if mdp.terminal[s] {
                continue; // identity row, zero rhs: V(s) = 0
            }
            b[s] = model.reward[s];
            for &(next, w) in &model.successors[s] {
                a[(s, next)] -= mdp.discount * w;
            }
        }
        let lu = a.lu();
        let solved = lu.solve(&b).ok_or(OracleError::Singular)?;
        solved.iter().copied().collect::<Vec<f64>>()
    } else {
        let mut v = vec![0.0; n];
        let mut next_v = vec![0.0; n];
        let mut converged = false;
        for _ in 0..MAX_SWEEPS {
            let mut change: f64 = 0.0;
            for s in 0..n {
                if mdp.terminal[s] {
                    next_v[s] = 0.0;
                    continue;
                }
                let mut total = model.reward[s];
                for &(next, w) in &model.successors[s] {
                    total += mdp.discount * w * v[next];
                }
                change = change.max((total - v[s]).abs());
                next_v[s] = total;
            }
            std::mem::swap(&mut v, &mut next_v);
            if change < ITER_TOL {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(OracleError::NotConverged(MAX_SWEEPS));
        }
        v
    };
    let residual = evaluation_residual(mdp, &model, &v);
    let q = q_from_v(mdp, &v);
    Ok(ExactValues { v, q, residual })
}

fn evaluation_residual(mdp: &TabularMdp, model: &PolicyModel, v: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for s in 0..mdp.num_states {
        if mdp.terminal[s] {
            worst = worst.max(v[s].abs());
            continue;
        }
        let mut total = model.reward[s];
        for &(next, w) in &model.successors[s] {
            total += mdp.discount * w * v[next];
        }
        worst = worst.max((total - v[s]).abs());
    }
    worst
}

/// One backup of a state-value vector into action values.
pub fn q_from_v(mdp: &TabularMdp, v: &[f64]) -> Vec<f64> {
    let mut q = vec![0.0; mdp.num_states * mdp.num_actions];
    for s in 0..mdp.num_states {
        if mdp.terminal[s] {
            continue;
        }
        for a in 0..mdp.num_actions {
            let mut total = 0.0;
            for o in &mdp.rows[s][a] {
                total += o.probability * (o.reward + mdp.discount * v[o.next_state]);
            }
            q[s * mdp.num_actions + a] = total;
        }
    }
    q
}

/// Value iteration to `tol` (sup-norm change per sweep). Greedy action ties
/// break toward the lowest action id. Terminal states hold value zero.
pub fn value_iteration(
    mdp: &TabularMdp,
    tol: f64,
) -> Result<(ExactValues, Vec<usize>), OracleError> {
    let n = mdp.num_states;
    let mut v = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for _ in 0..MAX_SWEEPS {
        let mut change: f64 = 0.0;
        for s in 0..n {
            if mdp.terminal[s] {
                continue;
            }
            let mut best = f64::NEG_INFINITY;
            for a in 0..mdp.num_actions {
                let mut total = 0.0;
                for o in &mdp.rows[s][a] {
                    total += o.probability * (o.reward + mdp.discount * v[o.next_state]);
                }
                if total > best {
                    best = total;
                }
            }
            change = change.max((best - v[s]).abs());
            v[s] = best;
        }
        residual = change;
        if change < tol {
            break;
        }
    }
    if residual >= tol {
        return Err(OracleError::NotConverged(MAX_SWEEPS));
    }
    let q = q_from_v(mdp, &v);
    let mut policy = vec![0usize; n];
    for s in 0..n {
        let mut best = f64::NEG_INFINITY;
        for a in 0..mdp.num_actions {
            let value = q[s * mdp.num_actions + a];
            if value > best {
                best = value;
                policy[s] = a;
            }
        }
    }
    Ok((ExactValues { v, q, residual }, policy))
}

/// Exact success predictor for a source policy: its state values (the
/// predictor itself) and action values (the predictor's action form) under
/// the task's own dynamics.
pub fn compute_g_exact(
    mdp: &TabularMdp,
    mu: &PolicyMatrix,
) -> Result<ExactValues, OracleError> {
    policy_evaluation_exact(mdp, mu)
}

/// Builds the recovery task for initiation set `in_l`: member states become
/// absorbing, and any transition entering a member state pays the original
/// reward plus `gamma * g_state[next]` (the handover bonus). Start mass moves
/// off the new terminals when possible.
pub fn build_recovery_mdp(mdp: &TabularMdp, in_l: &[bool], g_state: &[f64]) -> TabularMdp {
    let n = mdp.num_states;
    let mut terminal = mdp.terminal.clone();
    for s in 0..n {
        if in_l[s] {
            terminal[s] = true;
        }
    }
    let mut rows = Vec::with_capacity(n);
    for s in 0..n {
        if terminal[s] {
            rows.push(vec![
                vec![Outcome {
                    next_state: s,
                    probability: 1.0,
                    reward: 0.0,
                }];
                mdp.num_actions
            ]);
            continue;
        }
        let per_action = mdp.rows[s]
            .iter()
            .map(|row| {
                row.iter()
                    .map(|o| Outcome {
                        next_state: o.next_state,
                        probability: o.probability,
                        reward: if in_l[o.next_state] {
                            o.reward + mdp.discount * g_state[o.next_state]
                        } else {
                            o.reward
                        },
                    })
                    .collect()
            })
            .collect();
        rows.push(per_action);
    }
    let live_mass: f64 = (0..n)
        .filter(|&s| !terminal[s])
        .map(|s| mdp.initial[s])
        .sum();
    let initial = if live_mass > 0.0 {
        (0..n)
            .map(|s| {
                if terminal[s] {
                    0.0
                } else {
                    mdp.initial[s] / live_mass
                }
            })
            .collect()
    } else {
        // Degenerate case (every state is a member): keep the original
        // distribution; the construction is only evaluated, never sampled.
        mdp.initial.clone()
    };
    TabularMdp {
        num_states: n,
        num_actions: mdp.num_actions,
        rows,
        terminal,
        initial,
        discount: mdp.discount,
        episodic_proper: mdp.episodic_proper,
    }
}

/// One recovery-task backup in the original dynamics: entering a member
/// state hands over at `g_state`, staying outside continues at `v_off`.
/// Used to extend recovery values onto member states, where the recovery
/// task itself holds them at zero.
pub fn recovery_backup(
    mdp: &TabularMdp,
    in_l: &[bool],
    g_state: &[f64],
    v_off: &[f64],
    s: usize,
    a: usize,
) -> f64 {
    let mut total = 0.0;
    for o in &mdp.rows[s][a] {
        let continuation = if mdp.terminal[o.next_state] {
            0.0
        } else if in_l[o.next_state] {
            mdp.discount * g_state[o.next_state]
        } else {
            mdp.discount * v_off[o.next_state]
        };
        total += o.probability * (o.reward + continuation);
    }
    total
}

/// Extends off-member recovery values onto member states with a greedy
/// one-step backup; off-member entries pass through.
pub fn extend_recovery_values_max(
    mdp: &TabularMdp,
    in_l: &[bool],
    g_state: &[f64],
    v_off: &[f64],
) -> Vec<f64> {
    (0..mdp.num_states)
        .map(|s| {
            if mdp.terminal[s] {
                0.0
            } else if in_l[s] {
                (0..mdp.num_actions)
                    .map(|a| recovery_backup(mdp, in_l, g_state, v_off, s, a))
                    .fold(f64::NEG_INFINITY, f64::max)
            } else {
                v_off[s]
            }
        })
        .collect()
}

/// Stationary switched policy: the source policy on member states, the
/// learner elsewhere (`swap` exchanges the two regions, giving the
/// anti-main policy). Returns its exact values in the original task.
pub fn evaluate_main_exact(
    mdp: &TabularMdp,
    mu: &PolicyMatrix,
    learner: &PolicyMatrix,
    in_l: &[bool],
    swap: bool,
) -> Result<ExactValues, OracleError> {
    let switched: PolicyMatrix = (0..mdp.num_states)
        .map(|s| {
            if in_l[s] != swap {
                mu[s].clone()
            } else {
                learner[s].clone()
            }
        })
        .collect();
    policy_evaluation_exact(mdp, &switched)
}

/// Walks the unique trajectory of a deterministic policy in a deterministic
/// MDP. Returns visited states `s_0..s_k` and rewards `r_1..r_k`; stops on
/// terminal entry or after `max_steps`.
pub fn deterministic_rollout(
    mdp: &TabularMdp,
    policy: &[usize],
    start: usize,
    max_steps: usize,
) -> Result<(Vec<usize>, Vec<f64>), OracleError> {
    let mut states = vec![start];
    let mut rewards = Vec::new();
    let mut s = start;
    for _ in 0..max_steps {
        if mdp.terminal[s] {
            break;
        }
        let row = &mdp.rows[s][policy[s]];
        if row.len() != 1 || (row[0].probability - 1.0).abs() > 1e-12 {
            return Err(OracleError::RequiresDeterministic);
        }
        rewards.push(row[0].reward);
        s = row[0].next_state;
        states.push(s);
    }
    Ok((states, rewards))
}

/// Discounted return of the first `horizon` steps of a deterministic
/// policy's trajectory (terminal absorption contributes zero).
pub fn finite_horizon_value(
    mdp: &TabularMdp,
    policy: &[usize],
    start: usize,
    horizon: usize,
) -> Result<f64, OracleError> {
    let (_, rewards) = deterministic_rollout(mdp, policy, start, horizon)?;
    Ok(rewards
        .iter()
        .enumerate()
        .map(|(i, r)| mdp.discount.powi(i as i32) * r)
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_multiroom, Variant};
    use crate::mdp::{rng_from_seed, step};
    use crate::oracle::fixtures::chain;
    use rand::Rng;

    #[test]
    fn chain_values_match_closed_form() {
        let mdp = chain(6, 0.99);
        let always_right = deterministic_matrix(&vec![1; 6], 2);
        let values = policy_evaluation_exact(&mdp, &always_right).unwrap();
        for s in 0..5 {
            let d = (5 - s) as i32; // steps to reach the terminal state
            let expected = 0.99f64.powi(d - 1);
            assert!(
                (values.v[s] - expected).abs() < 1e-12,
                "state {s}: {} vs {expected}",
                values.v[s]
            );
        }
        assert_eq!(values.v[5], 0.0);
        assert!(values.residual < 1e-12);
    }

    #[test]
    fn value_iteration_matches_policy_evaluation_on_chain() {
        let mdp = chain(6, 0.99);
        let (optimal, policy) = value_iteration(&mdp, 1e-12).unwrap();
        let eval = policy_evaluation_exact(&mdp, &deterministic_matrix(&policy, 2)).unwrap();
        assert!(sup_norm_diff(&optimal.v, &eval.v) < 1e-9);
        assert_eq!(&policy[..5], &[1, 1, 1, 1, 1]);
        assert!(optimal.residual < 1e-10);
    }

    #[test]
    fn value_iteration_ties_break_to_lowest_action() {
        // Both actions identical: the greedy policy must pick action 0.
        let mut mdp = chain(4, 0.9);
        for s in 0..3 {
            mdp.rows[s][0] = mdp.rows[s][1].clone();
        }
        let (_, policy) = value_iteration(&mdp, 1e-12).unwrap();
        assert!(policy[..3].iter().all(|&a| a == 0));
    }

    #[test]
    fn multiroom_optimal_values_follow_bfs_distance() {
        let (mdp, meta) = build_multiroom(Variant::Source, 0.99);
        let (values, _) = value_iteration(&mdp, 1e-12).unwrap();
        // Independent BFS from the goal over the open-cell adjacency.
        let mut dist = vec![usize::MAX; mdp.num_states];
        let goal = meta.nav_state(meta.spec.goal);
        dist[goal] = 0;
        let mut queue = std::collections::VecDeque::from([goal]);
        while let Some(s) = queue.pop_front() {
            let (x, y) = meta.spec.xy(meta.open_cells[s]);
            for (dx, dy) in crate::grid::ACTION_DELTAS {
                let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                if meta.spec.is_open(nx, ny) {
                    let t = meta.nav_state(meta.spec.cell(nx as usize, ny as usize));
                    if dist[t] == usize::MAX {
                        dist[t] = dist[s] + 1;
                        queue.push_back(t);
                    }
                }
            }
        }
        for s in 0..mdp.num_states {
            if mdp.terminal[s] {
                assert_eq!(values.v[s], 0.0);
                continue;
            }
            let expected = 0.99f64.powi(dist[s] as i32 - 1);
            assert!(
                (values.v[s] - expected).abs() < 1e-9,
                "state {s}: {} vs {expected} (distance {})",
                values.v[s],
                dist[s]
            );
        }
    }

    // A 10-state, 2-action random MDP evaluated exactly must agree with a
    // long Monte Carlo estimate. Returns are truncated once the discount
    // weight drops below 1e-9, giving a deterministic truncation bias under
    // 1e-6; the comparison allows three standard errors of the remaining
    // sampling noise.
    #[test]
    fn exact_evaluation_matches_monte_carlo() {
        let mut rng = rng_from_seed(42);
        let n = 10;
        let gamma = 0.9;
        let mut rows = Vec::with_capacity(n);
        for _ in 0..n {
            let mut per_action = Vec::new();
            for _ in 0..2 {
                // Two-successor rows with random split and rewards.
                let a = rng.random_range(0..n);
                let b = rng.random_range(0..n);
                let p: f64 = rng.random();
                let (ra, rb): (f64, f64) = (rng.random(), rng.random());
                if a == b {
                    per_action.push(vec![Outcome {
                        next_state: a,
                        probability: 1.0,
                        reward: ra,
                    }]);
                } else {
                    per_action.push(vec![
                        Outcome { next_state: a, probability: p, reward: ra },
                        Outcome { next_state: b, probability: 1.0 - p, reward: rb },
                    ]);
                }
            }
            rows.push(per_action);
        }
        let mdp = TabularMdp {
            num_states: n,
            num_actions: 2,
            rows,
            terminal: vec![false; n],
            initial: {
                let mut init = vec![0.0; n];
                init[0] = 1.0;
                init
            },
            discount: gamma,
            episodic_proper: false,
        };
        mdp.validate().unwrap();
        let policy = uniform_matrix(n, 2);
        let exact = policy_evaluation_exact(&mdp, &policy).unwrap();

        let start = 3;
        let episodes = 200_000;
        let horizon = 200; // gamma^200 ~ 7e-10
        let mut total = 0.0;
        let mut total_sq = 0.0;
        for _ in 0..episodes {
            let mut s = start;
            let mut weight = 1.0;
            let mut ret = 0.0;
            for _ in 0..horizon {
                let a = rng.random_range(0..2);
                let (next, reward, _) = step(&mut rng, &mdp, s, a);
                ret += weight * reward;
                weight *= gamma;
                s = next;
            }
            total += ret;
            total_sq += ret * ret;
        }
        let mean = total / episodes as f64;
        let var = (total_sq / episodes as f64 - mean * mean).max(0.0);
        let se = (var / episodes as f64).sqrt();
        let diff = (mean - exact.v[start]).abs();
        assert!(
            diff < 3.0 * se + 1e-6,
            "MC {mean} vs exact {} (3 SE = {})",
            exact.v[start],
            3.0 * se
        );
    }

    #[test]
    fn recovery_mdp_values_match_hand_computation() {
        // 5-state chain, gamma 0.9, members {2, 3} with handover values
        // g = [0, 0, 0.81, 0.9, 0]. From state 1 the best recovery move is
        // right into 2: reward 0 + 0.9 * 0.81 = 0.729. From state 0 it takes
        // one more step: 0.9 * 0.729 = 0.6561.
        let mdp = chain(5, 0.9);
        let in_l = vec![false, false, true, true, false];
        let g = vec![0.0, 0.0, 0.81, 0.9, 0.0];
        let rec = build_recovery_mdp(&mdp, &in_l, &g);
        rec.validate().unwrap();
        let (values, policy) = value_iteration(&rec, 1e-12).unwrap();
        assert!((values.v[1] - 0.729).abs() < 1e-12);
        assert!((values.v[0] - 0.6561).abs() < 1e-12);
        assert_eq!(values.v[2], 0.0);
        assert_eq!(values.v[3], 0.0);
        assert_eq!(policy[0], 1);
        assert_eq!(policy[1], 1);
    }

    #[test]
    fn recovery_extension_backs_up_member_states() {
        let mdp = chain(5, 0.9);
        let in_l = vec![false, false, true, true, false];
        let g = vec![0.0, 0.0, 0.81, 0.9, 0.0];
        let rec = build_recovery_mdp(&mdp, &in_l, &g);
        let (values, _) = value_iteration(&rec, 1e-12).unwrap();
        let extended = extend_recovery_values_max(&mdp, &in_l, &g, &values.v);
        // From member state 3 the best backup pushes right into terminal 4
        // for the raw +1 (4 is terminal, no handover).
        assert!((extended[3] - 1.0).abs() < 1e-12);
        // From member state 2, right enters member 3: 0 + 0.9 * 0.9 = 0.81.
        assert!((extended[2] - 0.81).abs() < 1e-12);
        assert_eq!(extended[0], values.v[0]);
        assert_eq!(extended[4], 0.0);
    }

    #[test]
    fn switched_evaluation_uses_each_policy_in_its_region() {
        let mdp = chain(6, 0.99);
        let mu = deterministic_matrix(&vec![1; 6], 2); // always right
        let learner = deterministic_matrix(&vec![0; 6], 2); // always left
        let in_l = vec![false, false, false, true, true, true];
        let main = evaluate_main_exact(&mdp, &mu, &learner, &in_l, false).unwrap();
        // Off-member states run the learner (left): they drift to 0 and park.
        assert!(main.v[0].abs() < 1e-12);
        assert!(main.v[1].abs() < 1e-12);
        // Member states run the source policy straight to the goal.
        assert!((main.v[3] - 0.99f64.powi(1)).abs() < 1e-12);
        assert!((main.v[4] - 1.0).abs() < 1e-12);
        let anti = evaluate_main_exact(&mdp, &mu, &learner, &in_l, true).unwrap();
        // Swapped: the source policy drives right up to the boundary, the
        // learner bounces left off it, so the anti policy oscillates between
        // states 2 and 3 and never terminates.
        assert!(anti.v[0].abs() < 1e-12);
        assert!(anti.v[3].abs() < 1e-12);
    }

    #[test]
    fn finite_horizon_telescopes_against_full_values() {
        let mdp = chain(8, 0.95);
        let policy = vec![1; 8];
        let mu = deterministic_matrix(&policy, 2);
        let g = policy_evaluation_exact(&mdp, &mu).unwrap();
        for start in 0..7 {
            for horizon in 0..10 {
                let h = finite_horizon_value(&mdp, &policy, start, horizon).unwrap();
                let (states, _) = deterministic_rollout(&mdp, &policy, start, horizon).unwrap();
                let steps = states.len() - 1;
                let end = *states.last().unwrap();
                let expected = g.v[start] - mdp.discount.powi(steps as i32) * g.v[end];
                assert!(
                    (h - expected).abs() < 1e-12,
                    "start {start} horizon {horizon}: {h} vs {expected}"
                );
            }
        }
    }

    #[test]
    fn finite_horizon_rejects_stochastic_dynamics() {
        let mut mdp = chain(4, 0.9);
        mdp.rows[1][1] = vec![
            Outcome { next_state: 2, probability: 0.5, reward: 0.0 },
            Outcome { next_state: 0, probability: 0.5, reward: 0.0 },
        ];
        assert!(matches!(
            finite_horizon_value(&mdp, &[1, 1, 1, 1], 0, 5),
            Err(OracleError::RequiresDeterministic)
        ));
    }

    #[test]
    fn iterative_fallback_agrees_with_direct_solve() {
        // Force the iterative path by evaluating a copy that reports itself
        // large; instead, just compare the two code paths on the same chain
        // by calling the internals through a large padded MDP.
        let mdp = chain(6, 0.99);
        let mu = deterministic_matrix(&vec![1; 6], 2);
        let direct = policy_evaluation_exact(&mdp, &mu).unwrap();
        // Padded version: same chain duplicated enough times to cross the
        // size threshold; values of the first copy must match.
        let copies = DIRECT_SOLVE_LIMIT / 6 + 2;
        let n = copies * 6;
        let mut rows = Vec::with_capacity(n);
        let mut terminal = vec![false; n];
        for c in 0..copies {
            let base = c * 6;
            for s in 0..6usize {
                terminal[base + 5] = true;
                if s == 5 {
                    rows.push(vec![
                        vec![Outcome {
                            next_state: base + 5,
                            probability: 1.0,
                            reward: 0.0,
                        }];
                        2
                    ]);
                    continue;
                }
                let left = base + s.saturating_sub(1);
                let right = base + s + 1;
                let reward = if s + 1 == 5 { 1.0 } else { 0.0 };
                rows.push(vec![
                    vec![Outcome { next_state: left, probability: 1.0, reward: 0.0 }],
                    vec![Outcome { next_state: right, probability: 1.0, reward }],
                ]);
            }
        }
        let mut initial = vec![0.0; n];
        initial[0] = 1.0;
        let big = TabularMdp {
            num_states: n,
            num_actions: 2,
            rows,
            terminal,
            initial,
            discount: 0.99,
            episodic_proper: false,
        };
        let big_mu = deterministic_matrix(&vec![1; n], 2);
        let iterated = policy_evaluation_exact(&big, &big_mu).unwrap();
        for s in 0..6 {
            assert!(
                (iterated.v[s] - direct.v[s]).abs() < 1e-10,
                "state {s}: {} vs {}",
                iterated.v[s],
                direct.v[s]
            );
        }
        assert!(iterated.residual < 1e-12);
    }

    #[test]
    fn improper_policy_at_discount_one_errors() {
        let mut mdp = chain(4, 1.0);
        mdp.episodic_proper = true;
        // Always-left never reaches the terminal state: the system is
        // singular at discount one.
        let stuck = deterministic_matrix(&vec![0; 4], 2);
        assert!(policy_evaluation_exact(&mdp, &stuck).is_err());
        // Always-right is proper and solvable.
        let right = deterministic_matrix(&vec![1; 4], 2);
        let values = policy_evaluation_exact(&mdp, &right).unwrap();
        assert!((values.v[0] - 1.0).abs() < 1e-12);
    }
}
