//! Finite tabular MDPs with sparse transition rows and a seeded run RNG.
//!
//! States and actions are dense ids. Each `(s, a)` row stores only the
//! outcomes with nonzero probability, which keeps large deterministic
//! environments (thousands of states) cheap to store and sample.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Run RNG: ChaCha8 with a 64-bit seed. The generator is fixed so that a seed
/// reproduces the same draw sequence on every platform.
pub type RunRng = ChaCha8Rng;

/// Builds the run RNG for a seed.
pub fn rng_from_seed(seed: u64) -> RunRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent seed from a base seed and a stream label
/// (splitmix64 of the xored inputs). Used for evaluation episodes so that
/// test rollouts never touch the training draw sequence.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// One possible result of taking an action: next state, its probability and
/// the reward paid on that transition.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Outcome {
    pub next_state: usize,
    pub probability: f64,
    pub reward: f64,
}

/// Which controller produced an action: the fixed source policy or the
/// learner being trained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum OptionChoice {
    Primal,
    Learner,
}

/// One environment step as stored by the training loops.
///
/// `continuation` is the discount carried into the bootstrap target: 0 when
/// `next_state` is terminal, the MDP discount otherwise. Episode truncation at
/// the step cap keeps the discount (the episode did not end in a terminal
/// state). `was_greedy` says whether `action` is greedy for the learner's
/// current action-value table, which drives the Watkins trace cut.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransitionRecord {
    pub state: usize,
    pub option: OptionChoice,
    pub action: usize,
    pub reward: f64,
    pub continuation: f64,
    pub next_state: usize,
    pub was_greedy: bool,
}

/// Tabular MDP. Terminal states are absorbing (self-loop, zero reward) and
/// carry no initial probability mass.
#[derive(Clone, Debug)]
pub struct TabularMdp {
    pub num_states: usize,
    pub num_actions: usize,
    /// rows[s][a] lists the outcomes of taking `a` in `s`.
    pub rows: Vec<Vec<Vec<Outcome>>>,
    pub terminal: Vec<bool>,
    /// Start distribution over states; zero on terminals, sums to one.
    pub initial: Vec<f64>,
    pub discount: f64,
    /// Permits discount == 1.0 for tasks that end in bounded time.
    pub episodic_proper: bool,
}

const PROB_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
#[error("invalid mdp ({} violation{}):\n{}", .0.len(), if .0.len() == 1 { "" } else { "s" }, .0.join("\n"))]
pub struct InvalidMdp(pub Vec<String>);

impl TabularMdp {
    pub fn outcomes(&self, state: usize, action: usize) -> &[Outcome] {
        &self.rows[state][action]
    }

    pub fn is_terminal(&self, state: usize) -> bool {
        self.terminal[state]
    }

    pub fn expected_reward(&self, state: usize, action: usize) -> f64 {
        self.rows[state][action]
            .iter()
            .map(|o| o.probability * o.reward)
            .sum()
    }

    pub fn transition_prob(&self, state: usize, action: usize, next: usize) -> f64 {
        self.rows[state][action]
            .iter()
            .filter(|o| o.next_state == next)
            .map(|o| o.probability)
            .sum()
    }

    /// Checks every structural invariant and reports all violations at once.
    pub fn validate(&self) -> Result<(), InvalidMdp> {
        let mut errors = Vec::new();
        if self.num_states == 0 {
            errors.push("num_states must be positive".to_string());
        }
        if self.num_actions == 0 {
            errors.push("num_actions must be positive".to_string());
        }
        if !(0.0..1.0).contains(&self.discount)
            && !(self.episodic_proper && self.discount == 1.0)
        {
            errors.push(format!(
                "discount {} outside [0, 1) (1.0 requires episodic_proper)",
                self.discount
            ));
        }
        if self.rows.len() != self.num_states
            || self.terminal.len() != self.num_states
            || self.initial.len() != self.num_states
        {
            errors.push(format!(
                "shape mismatch: rows {}, terminal {}, initial {}, num_states {}",
                self.rows.len(),
                self.terminal.len(),
                self.initial.len(),
                self.num_states
            ));
            return Err(InvalidMdp(errors));
        }
        for (s, per_action) in self.rows.iter().enumerate() {
            if per_action.len() != self.num_actions {
                errors.push(format!("state {s}: {} action rows", per_action.len()));
                continue;
            }
            for (a, row) in per_action.iter().enumerate() {
                let mut total = 0.0;
                for o in row {
                    if o.next_state >= self.num_states {
                        errors.push(format!(
                            "state {s} action {a}: next state {} out of range",
                            o.next_state
                        ));
                    }
                    if o.probability <= 0.0 || o.probability > 1.0 + PROB_TOL {
                        errors.push(format!(
                            "state {s} action {a}: probability {} outside (0, 1]",
                            o.probability
                        ));
                    }
                    total += o.probability;
                }
                if (total - 1.0).abs() > PROB_TOL {
                    errors.push(format!(
                        "state {s} action {a}: probabilities sum to {total}"
                    ));
                }
                if self.terminal[s] {
                    let absorbing = row.len() == 1
                        && row[0].next_state == s
                        && row[0].reward == 0.0;
                    if !absorbing {
                        errors.push(format!(
                            "terminal state {s} action {a}: not an absorbing zero-reward self-loop"
                        ));
                    }
                }
            }
        }
        // Kahan summation: a uniform start distribution over ~1e5 states
        // accumulates more naive rounding error than the tolerance allows.
        let mut initial_total = 0.0;
        let mut carry = 0.0;
        for (s, &p) in self.initial.iter().enumerate() {
            if p < 0.0 {
                errors.push(format!("initial[{s}] = {p} is negative"));
            }
            if p > 0.0 && self.terminal[s] {
                errors.push(format!("initial[{s}] puts mass on a terminal state"));
            }
            let y = p - carry;
            let t = initial_total + y;
            carry = (t - initial_total) - y;
            initial_total = t;
        }
        if (initial_total - 1.0).abs() > PROB_TOL {
            errors.push(format!("initial distribution sums to {initial_total}"));
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(InvalidMdp(errors))
        }
    }
}

/// Samples one transition. Returns `(next_state, reward, continuation)` where
/// continuation is 0 when the next state is terminal and the MDP discount
/// otherwise. Outcomes are scanned in row order against a single uniform
/// draw, so a seed fixes the trajectory.
pub fn step(rng: &mut RunRng, mdp: &TabularMdp, state: usize, action: usize) -> (usize, f64, f64) {
    let row = &mdp.rows[state][action];
    debug_assert!(!row.is_empty(), "state {state} action {action} has no outcomes");
    let u: f64 = rng.random();
    let mut cumulative = 0.0;
    let mut picked = row[row.len() - 1];
    for o in row {
        cumulative += o.probability;
        if u < cumulative {
            picked = *o;
            break;
        }
    }
    let continuation = if mdp.terminal[picked.next_state] {
        0.0
    } else {
        mdp.discount
    };
    (picked.next_state, picked.reward, continuation)
}

/// Samples a start state from the initial distribution (row order scan, one
/// uniform draw).
pub fn sample_initial(rng: &mut RunRng, mdp: &TabularMdp) -> usize {
    let u: f64 = rng.random();
    let mut cumulative = 0.0;
    let mut picked = mdp.initial.len() - 1;
    for (s, &p) in mdp.initial.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        picked = s;
        cumulative += p;
        if u < cumulative {
            break;
        }
    }
    picked
}
