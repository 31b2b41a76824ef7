//! Tabular learning state: action-value tables, replacing eligibility
//! traces with an active-entry list, epsilon schedules, and the update rules
//! (Watkins Q(lambda), off-policy TD for the success predictor, TD(0) for
//! the behavior value).

use crate::mdp::{RunRng, TransitionRecord};
use rand::Rng;
use std::io::Write;
use std::path::Path;

/// Dense `[state][action]` table stored flat.
#[derive(Clone, Debug, PartialEq)]
pub struct ActionTable {
    pub num_states: usize,
    pub num_actions: usize,
    values: Vec<f64>,
}

impl ActionTable {
    pub fn zeros(num_states: usize, num_actions: usize) -> ActionTable {
        ActionTable {
            num_states,
            num_actions,
            values: vec![0.0; num_states * num_actions],
        }
    }

    pub fn from_values(num_states: usize, num_actions: usize, values: Vec<f64>) -> ActionTable {
        assert_eq!(values.len(), num_states * num_actions);
        ActionTable { num_states, num_actions, values }
    }

    #[inline]
    pub fn index(&self, state: usize, action: usize) -> usize {
        state * self.num_actions + action
    }

    #[inline]
    pub fn get(&self, state: usize, action: usize) -> f64 {
        self.values[state * self.num_actions + action]
    }

    #[inline]
    pub fn set(&mut self, state: usize, action: usize, value: f64) {
        self.values[state * self.num_actions + action] = value;
    }

    #[inline]
    pub fn add_at(&mut self, flat_index: usize, delta: f64) {
        self.values[flat_index] += delta;
    }

    pub fn row(&self, state: usize) -> &[f64] {
        &self.values[state * self.num_actions..(state + 1) * self.num_actions]
    }

    pub fn row_max(&self, state: usize) -> f64 {
        self.row(state).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Greedy action with the lowest id (no tie randomization).
    pub fn row_argmax_first(&self, state: usize) -> usize {
        let row = self.row(state);
        let mut best = 0;
        for (a, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = a;
            }
        }
        best
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Per-state maxima as a vector.
    pub fn max_per_state(&self) -> Vec<f64> {
        (0..self.num_states).map(|s| self.row_max(s)).collect()
    }

    /// Writes the table as `state,action,value` CSV.
    pub fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "state,action,value")?;
        for s in 0..self.num_states {
            for a in 0..self.num_actions {
                writeln!(out, "{s},{a},{}", self.get(s, a))?;
            }
        }
        Ok(())
    }

    /// Reads a `state,action,value` CSV written by `write_csv`.
    pub fn read_csv(path: &Path, num_states: usize, num_actions: usize) -> anyhow::Result<ActionTable> {
        let text = std::fs::read_to_string(path)?;
        let mut table = ActionTable::zeros(num_states, num_actions);
        for (i, line) in text.lines().enumerate() {
            if i == 0 {
                anyhow::ensure!(line == "state,action,value", "unexpected header {line:?}");
                continue;
            }
            let mut parts = line.split(',');
            let s: usize = parts.next().ok_or_else(|| anyhow::anyhow!("short row"))?.parse()?;
            let a: usize = parts.next().ok_or_else(|| anyhow::anyhow!("short row"))?.parse()?;
            let v: f64 = parts.next().ok_or_else(|| anyhow::anyhow!("short row"))?.parse()?;
            table.set(s, a, v);
        }
        Ok(table)
    }
}

/// Writes a per-state value table as `state,value` CSV.
pub fn write_state_values_csv(values: &[f64], path: &Path) -> std::io::Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "state,value")?;
    for (s, v) in values.iter().enumerate() {
        writeln!(out, "{s},{v}")?;
    }
    Ok(())
}

/// Reads a `state,value` CSV written by `write_state_values_csv`.
pub fn read_state_values_csv(path: &Path, num_states: usize) -> anyhow::Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)?;
    let mut values = vec![0.0; num_states];
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            anyhow::ensure!(line == "state,value", "unexpected header {line:?}");
            continue;
        }
        let mut parts = line.split(',');
        let s: usize = parts.next().ok_or_else(|| anyhow::anyhow!("short row"))?.parse()?;
        let v: f64 = parts.next().ok_or_else(|| anyhow::anyhow!("short row"))?.parse()?;
        values[s] = v;
    }
    Ok(values)
}

/// Replacing eligibility traces over `[state][action]`, kept sparse through
/// an active-entry list so decay costs only the touched pairs. A visit sets
/// the taken pair's trace to one and zeroes the state's other actions, so a
/// state never carries credit for more than one action at a time. Entries
/// decay multiplicatively and are dropped below 1e-12.
#[derive(Clone, Debug)]
pub struct EligibilityTrace {
    values: Vec<f64>,
    active: Vec<usize>,
    num_actions: usize,
}

const TRACE_FLOOR: f64 = 1e-12;

impl EligibilityTrace {
    pub fn zeros(num_states: usize, num_actions: usize) -> EligibilityTrace {
        EligibilityTrace {
            values: vec![0.0; num_states * num_actions],
            active: Vec::new(),
            num_actions,
        }
    }

    pub fn clear(&mut self) {
        for &i in &self.active {
            self.values[i] = 0.0;
        }
        self.active.clear();
    }

    /// Replacing assignment: the visited pair's trace becomes exactly one
    /// and the state's other actions lose theirs. Without the sibling clear,
    /// revisits inside looping episodes stack credit across a state's
    /// actions and the update can feed on itself.
    pub fn set_visited(&mut self, state: usize, action: usize) {
        let row = state * self.num_actions;
        let mut dropped = false;
        for a in 0..self.num_actions {
            if a != action && self.values[row + a] != 0.0 {
                self.values[row + a] = 0.0;
                dropped = true;
            }
        }
        if dropped {
            let values = &self.values;
            self.active.retain(|&i| values[i] != 0.0);
        }
        let i = row + action;
        if self.values[i] == 0.0 {
            self.active.push(i);
        }
        self.values[i] = 1.0;
    }

    /// Multiplies every active entry by `factor`, dropping entries that fall
    /// below the floor. `factor` of zero clears everything.
    pub fn decay(&mut self, factor: f64) {
        debug_assert!((0.0..=1.0).contains(&factor), "trace decay factor {factor}");
        if factor == 0.0 {
            self.clear();
            return;
        }
        let mut kept = Vec::with_capacity(self.active.len());
        for &i in &self.active {
            let next = self.values[i] * factor;
            if next < TRACE_FLOOR {
                self.values[i] = 0.0;
            } else {
                self.values[i] = next;
                kept.push(i);
            }
        }
        self.active = kept;
    }

    pub fn value(&self, state: usize, action: usize) -> f64 {
        self.values[state * self.num_actions + action]
    }

    pub fn active_entries(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.active.iter().map(move |&i| (i, self.values[i]))
    }

    pub fn active_len(&self) -> usize {
        self.active.len()
    }
}

/// Linear anneal from `initial` at step 0 to `final_value` at `horizon`
/// steps, constant afterwards.
#[derive(Clone, Copy, Debug, serde::Serialize, serde::Deserialize)]
pub struct EpsilonSchedule {
    pub initial: f64,
    pub final_value: f64,
    pub horizon: u64,
}

impl EpsilonSchedule {
    pub fn constant(value: f64) -> EpsilonSchedule {
        EpsilonSchedule { initial: value, final_value: value, horizon: 1 }
    }

    pub fn value_at(&self, step: u64) -> f64 {
        if self.horizon == 0 || step >= self.horizon {
            return self.final_value;
        }
        let frac = step as f64 / self.horizon as f64;
        self.initial + (self.final_value - self.initial) * frac
    }
}

/// Greedy action under `q` at `state`; ties are broken uniformly with one
/// draw from the run RNG.
pub fn greedy_action(rng: &mut RunRng, q: &ActionTable, state: usize) -> usize {
    let row = q.row(state);
    let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ties = row.iter().filter(|&&v| v == best).count();
    let mut pick = rng.random_range(0..ties);
    for (a, &v) in row.iter().enumerate() {
        if v == best {
            if pick == 0 {
                return a;
            }
            pick -= 1;
        }
    }
    unreachable!("row has a maximum");
}

/// Whether `action` attains the row maximum of `q` at `state`.
pub fn is_greedy(q: &ActionTable, state: usize, action: usize) -> bool {
    let row = q.row(state);
    let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    row[action] == best
}

/// Epsilon-greedy action. Draw order: first the explore/exploit uniform,
/// then either a uniform action (explore) or the greedy tie-break draw.
/// The returned flag says whether the emitted action is greedy for `q`,
/// which an exploring draw can be by coincidence.
pub fn epsilon_greedy(
    rng: &mut RunRng,
    q: &ActionTable,
    state: usize,
    epsilon: f64,
) -> (usize, bool) {
    let u: f64 = rng.random();
    if u < epsilon {
        let action = rng.random_range(0..q.num_actions);
        (action, is_greedy(q, state, action))
    } else {
        (greedy_action(rng, q, state), true)
    }
}

/// Watkins Q(lambda) update with replacing traces.
///
/// The visited pair's trace is set to one, every active pair moves by
/// `alpha * delta * trace`, then traces decay by `continuation * lambda`,
/// zeroed entirely when the action was not greedy. Returns the TD error
/// `r + continuation * max_a q(s', a) - q(s, a)`.
pub fn q_lambda_update(
    q: &mut ActionTable,
    trace: &mut EligibilityTrace,
    t: &TransitionRecord,
    alpha: f64,
    lambda: f64,
) -> f64 {
    let bootstrap = if t.continuation > 0.0 {
        t.continuation * q.row_max(t.next_state)
    } else {
        0.0
    };
    let delta = t.reward + bootstrap - q.get(t.state, t.action);
    trace.set_visited(t.state, t.action);
    if alpha != 0.0 && delta != 0.0 {
        for (i, e) in trace.active_entries() {
            q.add_at(i, alpha * delta * e);
        }
    }
    if t.was_greedy {
        trace.decay(t.continuation * lambda);
    } else {
        trace.clear();
    }
    delta
}

/// Action sampler used for bootstrap draws in the success-predictor update.
pub trait BootstrapPolicy {
    fn sample(&self, rng: &mut RunRng, state: usize) -> usize;
}

/// Off-policy TD(0) toward the source policy for the success predictor:
/// the bootstrap action is drawn from the source policy at the next state
/// (exact for a deterministic policy, an unbiased sample otherwise).
/// Returns the TD error.
pub fn g_td_update(
    g: &mut ActionTable,
    t: &TransitionRecord,
    mu: &impl BootstrapPolicy,
    alpha: f64,
    rng: &mut RunRng,
) -> f64 {
    let bootstrap = if t.continuation > 0.0 {
        let a_next = mu.sample(rng, t.next_state);
        t.continuation * g.get(t.next_state, a_next)
    } else {
        0.0
    };
    let delta = g.get(t.state, t.action) - (t.reward + bootstrap);
    let updated = g.get(t.state, t.action) - alpha * delta;
    g.set(t.state, t.action, updated);
    delta
}

/// On-policy TD(0) for the behavior value estimate. Returns the TD error.
pub fn v_behavior_update(v: &mut [f64], t: &TransitionRecord, alpha: f64) -> f64 {
    let bootstrap = if t.continuation > 0.0 {
        t.continuation * v[t.next_state]
    } else {
        0.0
    };
    let delta = t.reward + bootstrap - v[t.state];
    v[t.state] += alpha * delta;
    delta
}
