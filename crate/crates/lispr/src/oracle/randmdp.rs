//! Seeded random episodic tasks for sweeping the verification checks over
//! many MDP shapes rather than a handful of designed ones.

use crate::mdp::{rng_from_seed, Outcome, TabularMdp};
use crate::options::SourcePolicy;
use rand::Rng;

pub const RANDOM_STATES: usize = 8;
pub const RANDOM_ACTIONS: usize = 3;
const GOAL: usize = RANDOM_STATES - 1;

/// Dense random episodic task plus a random deterministic source policy,
/// both fully determined by the seed.
///
/// Every state-action row is a Dirichlet(1) distribution over all eight
/// states, so each row keeps some mass on the terminal goal and every
/// policy terminates almost surely. Entering the goal pays a uniform
/// reward drawn once per state-action pair; every other transition pays
/// zero. Starts are uniform over the non-terminal states.
pub fn random_mdp(seed: u64) -> (TabularMdp, SourcePolicy) {
    let mut rng = rng_from_seed(seed);
    let n = RANDOM_STATES;
    let mut rows = Vec::with_capacity(n);
    let mut terminal = vec![false; n];
    terminal[GOAL] = true;
    for s in 0..n {
        if terminal[s] {
            rows.push(vec![
                vec![Outcome { next_state: s, probability: 1.0, reward: 0.0 }];
                RANDOM_ACTIONS
            ]);
            continue;
        }
        let mut per_action = Vec::with_capacity(RANDOM_ACTIONS);
        for _ in 0..RANDOM_ACTIONS {
            // Normalized unit exponentials are a Dirichlet(1) draw.
            let weights: Vec<f64> = (0..n)
                .map(|_| -(1.0 - rng.random::<f64>()).ln())
                .collect();
            let total: f64 = weights.iter().sum();
            let goal_reward: f64 = rng.random();
            let row = weights
                .iter()
                .enumerate()
                .map(|(next, w)| Outcome {
                    next_state: next,
                    probability: w / total,
                    reward: if next == GOAL { goal_reward } else { 0.0 },
                })
                .collect();
            per_action.push(row);
        }
        rows.push(per_action);
    }
    let mut initial = vec![1.0 / (n - 1) as f64; n];
    initial[GOAL] = 0.0;
    let mdp = TabularMdp {
        num_states: n,
        num_actions: RANDOM_ACTIONS,
        rows,
        terminal,
        initial,
        discount: 0.99,
        episodic_proper: true,
    };
    let actions = (0..n).map(|_| rng.random_range(0..RANDOM_ACTIONS)).collect();
    (mdp, SourcePolicy::Deterministic(actions))
}
