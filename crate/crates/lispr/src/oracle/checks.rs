//! Executable checks of the switching construction's guarantees.
//!
//! Every check recomputes the claimed property with the exact
//! dynamic-programming machinery and reports the worst violation it found,
//! the tolerance it was held to, and a witness state. A report's `asserted`
//! flag separates guarantees (which gate the verify exit code) from
//! diagnostics that are reported for inspection only.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::Serialize;

use crate::mdp::TabularMdp;
use crate::options::{membership_rule, SourcePolicy};
use crate::oracle::dp::{
    build_recovery_mdp, compute_g_exact, deterministic_matrix, evaluate_main_exact,
    extend_recovery_values_max, policy_evaluation_exact, uniform_matrix, value_iteration,
    ExactValues, OracleError, PolicyMatrix,
};
use crate::oracle::fixtures::all_fixtures;
use crate::oracle::randmdp::random_mdp;
use crate::proxy::{proxy_reward_terms, ProxyKind};

const VI_TOL: f64 = 1e-13;
/// Slack on membership comparisons so solver dust cannot flip a state.
const MEMBER_TOL: f64 = 1e-9;
/// Constant membership bar used by the proxy bias sweeps.
const BIAS_BAR: f64 = 0.5;
/// Discount sweep for the scaled proxy bias checks.
pub const BIAS_GAMMAS: [f64; 3] = [0.9, 0.99, 0.999];
/// Near-one discount standing in for the undiscounted limit.
pub const INDICATOR_SURROGATE_GAMMA: f64 = 0.999;

/// Outcome of one verification check.
#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub check: String,
    pub mdp: String,
    pub gamma: f64,
    pub pass: bool,
    /// False for diagnostics whose failure is informative, not fatal.
    pub asserted: bool,
    pub max_violation: f64,
    pub tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl OracleReport {
    fn new(
        check: &str,
        mdp_name: &str,
        gamma: f64,
        asserted: bool,
        tolerance: f64,
        (max_violation, witness): (f64, Option<usize>),
    ) -> Self {
        OracleReport {
            check: check.to_string(),
            mdp: mdp_name.to_string(),
            gamma,
            pass: max_violation <= tolerance,
            asserted,
            max_violation,
            tolerance,
            witness,
            detail: None,
        }
    }

    fn with_detail(mut self, detail: String) -> Self {
        self.detail = Some(detail);
        self
    }
}

/// Largest value with its index; `(0.0, None)` when nothing was measured.
fn worst(values: impl IntoIterator<Item = (usize, f64)>) -> (f64, Option<usize>) {
    let mut best: Option<(usize, f64)> = None;
    for (s, v) in values {
        if best.map_or(true, |(_, bv)| v > bv) {
            best = Some((s, v));
        }
    }
    match best {
        Some((s, v)) => (v, Some(s)),
        None => (0.0, None),
    }
}

fn members_of(g: &[f64], tau: &[f64], tol: f64) -> Vec<bool> {
    g.iter()
        .zip(tau)
        .map(|(&gs, &ts)| membership_rule(gs, ts, tol))
        .collect()
}

fn count(flags: &[bool]) -> usize {
    flags.iter().filter(|&&x| x).count()
}

fn greedy_rows(q: &[f64], num_states: usize, num_actions: usize) -> Vec<usize> {
    (0..num_states)
        .map(|s| {
            let row = &q[s * num_actions..(s + 1) * num_actions];
            let mut best = 0;
            for (a, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = a;
                }
            }
            best
        })
        .collect()
}

fn predictor(
    mdp: &TabularMdp,
    mu: &SourcePolicy,
) -> Result<(PolicyMatrix, ExactValues), OracleError> {
    let mu_matrix = mu.matrix(mdp.num_actions);
    let g = compute_g_exact(mdp, &mu_matrix)?;
    Ok((mu_matrix, g))
}

/// Which learner the switching construction pairs with the source policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LearnerKind {
    Recovery,
    Student,
}

impl fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LearnerKind::Recovery => write!(f, "recovery"),
            LearnerKind::Student => write!(f, "student"),
        }
    }
}

/// Membership iterated to consistency with the recovery values it induces.
#[derive(Debug, Clone)]
pub struct ThresholdFixpoint {
    pub in_l: Vec<bool>,
    /// Threshold the final set satisfies: recovery values off the set,
    /// their greedy one-step extension on it.
    pub tau: Vec<f64>,
    pub recovery: ExactValues,
    pub recovery_policy: Vec<usize>,
    pub rounds: usize,
    pub stable: bool,
}

/// Iterates membership against the recovery values it induces: solve the
/// recovery task for the current set, extend its values onto member states,
/// rebuild the set from the extended threshold, repeat until the set
/// returns unchanged. Stops on a revisited set (a cycle) or after
/// `num_states + 2` rounds; `stable` records which way it ended. The seed
/// threshold is the caller's (typically the optimal state values).
pub fn threshold_fixpoint(
    mdp: &TabularMdp,
    g: &ExactValues,
    seed_tau: &[f64],
    tol: f64,
) -> Result<ThresholdFixpoint, OracleError> {
    let mut in_l = members_of(&g.v, seed_tau, tol);
    let mut seen = vec![in_l.clone()];
    loop {
        let rec = build_recovery_mdp(mdp, &in_l, &g.v);
        let (vals, pol) = value_iteration(&rec, VI_TOL)?;
        let tau = extend_recovery_values_max(mdp, &in_l, &g.v, &vals.v);
        let next = members_of(&g.v, &tau, tol);
        let stable = next == in_l;
        if stable || seen.contains(&next) || seen.len() > mdp.num_states + 2 {
            return Ok(ThresholdFixpoint {
                in_l,
                tau,
                recovery: vals,
                recovery_policy: pol,
                rounds: seen.len(),
                stable,
            });
        }
        seen.push(next.clone());
        in_l = next;
    }
}

/// With the threshold set to the optimal state values, the switched policy
/// must be optimal: members are states where the source policy already
/// achieves the optimum, and the learner (recovery-optimal or task-optimal)
/// is exact everywhere else.
pub fn check_optimality(
    mdp: &TabularMdp,
    mu: &SourcePolicy,
    mdp_name: &str,
    kind: LearnerKind,
) -> Result<OracleReport, OracleError> {
    let (mu_matrix, g) = predictor(mdp, mu)?;
    let (star, star_policy) = value_iteration(mdp, VI_TOL)?;
    let in_l = members_of(&g.v, &star.v, MEMBER_TOL);
    let learner = match kind {
        LearnerKind::Student => star_policy,
        LearnerKind::Recovery => {
            value_iteration(&build_recovery_mdp(mdp, &in_l, &g.v), VI_TOL)?.1
        }
    };
    let main = evaluate_main_exact(
        mdp,
        &mu_matrix,
        &deterministic_matrix(&learner, mdp.num_actions),
        &in_l,
        false,
    )?;
    let viol = worst(
        (0..mdp.num_states).map(|s| (s, (main.v[s] - star.v[s]).abs())),
    );
    Ok(OracleReport::new(
        &format!("optimality-{kind}"),
        mdp_name,
        mdp.discount,
        true,
        1e-6,
        viol,
    )
    .with_detail(format!(
        "threshold = optimal values; members {}/{}",
        count(&in_l),
        mdp.num_states
    )))
}

/// The switched policy must dominate both the predictor (everywhere, with
/// the learner's value treated as zero on member states where its option
/// cannot start) and the learner's own value off the member set.
pub fn check_lower_bound(
    mdp: &TabularMdp,
    mu: &SourcePolicy,
    mdp_name: &str,
    kind: LearnerKind,
) -> Result<OracleReport, OracleError> {
    let (mu_matrix, g) = predictor(mdp, mu)?;
    let (star, star_policy) = value_iteration(mdp, VI_TOL)?;
    let (in_l, learner_values, learner_policy, detail) = match kind {
        LearnerKind::Recovery => {
            let fx = threshold_fixpoint(mdp, &g, &star.v, MEMBER_TOL)?;
            let detail = format!(
                "fixpoint {} round(s), {}; members {}/{}",
                fx.rounds,
                if fx.stable { "stable" } else { "cycled" },
                count(&fx.in_l),
                mdp.num_states
            );
            (fx.in_l, fx.recovery, fx.recovery_policy, detail)
        }
        LearnerKind::Student => {
            let in_l = members_of(&g.v, &star.v, MEMBER_TOL);
            let detail = format!(
                "threshold = task-optimal learner values; members {}/{}",
                count(&in_l),
                mdp.num_states
            );
            (in_l, star.clone(), star_policy, detail)
        }
    };
    let main = evaluate_main_exact(
        mdp,
        &mu_matrix,
        &deterministic_matrix(&learner_policy, mdp.num_actions),
        &in_l,
        false,
    )?;
    let viol = worst((0..mdp.num_states).map(|s| {
        let learner_floor = if in_l[s] { 0.0 } else { learner_values.v[s] };
        (s, g.v[s].max(learner_floor) - main.v[s])
    }));
    Ok(OracleReport::new(
        &format!("lower-bound-{kind}"),
        mdp_name,
        mdp.discount,
        true,
        1e-9,
        viol,
    )
    .with_detail(detail))
}

/// Both sides of one exact policy-improvement step on the recovery task,
/// each with the membership set its own threshold induces and the exact
/// value of its switched policy.
struct ImprovementPair {
    v0: ExactValues,
    v1: ExactValues,
    tau0: Vec<f64>,
    tau1: Vec<f64>,
    l0: Vec<bool>,
    l1: Vec<bool>,
    main0: ExactValues,
    main1: ExactValues,
}

fn improvement_pair(
    mdp: &TabularMdp,
    mu: &SourcePolicy,
) -> Result<ImprovementPair, OracleError> {
    let (mu_matrix, g) = predictor(mdp, mu)?;
    let (star, _) = value_iteration(mdp, VI_TOL)?;
    let fx = threshold_fixpoint(mdp, &g, &star.v, MEMBER_TOL)?;
    let rec = build_recovery_mdp(mdp, &fx.in_l, &g.v);
    let pi0 = uniform_matrix(mdp.num_states, mdp.num_actions);
    let v0 = policy_evaluation_exact(&rec, &pi0)?;
    let pi1 = greedy_rows(&v0.q, mdp.num_states, mdp.num_actions);
    let v1 = policy_evaluation_exact(&rec, &deterministic_matrix(&pi1, mdp.num_actions))?;
    let tau0 = extend_recovery_values_max(mdp, &fx.in_l, &g.v, &v0.v);
    let tau1 = extend_recovery_values_max(mdp, &fx.in_l, &g.v, &v1.v);
    let l0 = members_of(&g.v, &tau0, MEMBER_TOL);
    let l1 = members_of(&g.v, &tau1, MEMBER_TOL);
    let main0 = evaluate_main_exact(mdp, &mu_matrix, &pi0, &l0, false)?;
    let main1 = evaluate_main_exact(
        mdp,
        &mu_matrix,
        &deterministic_matrix(&pi1, mdp.num_actions),
        &l1,
        false,
    )?;
    Ok(ImprovementPair { v0, v1, tau0, tau1, l0, l1, main0, main1 })
}

/// One exact policy-improvement step on the recovery task (uniform learner
/// to its greedy improvement) must not decrease the switched policy's value
/// anywhere, with each side using the membership set its own threshold
/// induces.
pub fn check_improvement(
    mdp: &TabularMdp,
    mu: &SourcePolicy,
    mdp_name: &str,
    asserted: bool,
) -> Result<OracleReport, OracleError> {
    let p = improvement_pair(mdp, mu)?;
    let n = mdp.num_states;
    let recovery_margin = worst((0..n).map(|s| (s, p.v0.v[s] - p.v1.v[s])));
    let viol = worst((0..n).map(|s| (s, p.main0.v[s] - p.main1.v[s])));
    Ok(OracleReport::new("improvement", mdp_name, mdp.discount, asserted, 1e-9, viol)
        .with_detail(format!(
            "recovery-value regression {:.3e} (improvement step guarantees <= 0); \
             members {} -> {}",
            recovery_margin.0,
            count(&p.l0),
            count(&p.l1),
        )))
}

/// Improving the learner raises the threshold pointwise, so the membership
/// set can only shrink. Violations are measured as the threshold drop at
/// any state the improved set gained.
pub fn check_contraction(
    mdp: &TabularMdp,
    mu: &SourcePolicy,
    mdp_name: &str,
) -> Result<OracleReport, OracleError> {
    let p = improvement_pair(mdp, mu)?;
    let viol = worst(
        (0..mdp.num_states)
            .filter(|&s| p.l1[s] && !p.l0[s])
            .map(|s| (s, p.tau0[s] - p.tau1[s])),
    );
    Ok(OracleReport::new("contraction", mdp_name, mdp.discount, true, 1e-9, viol)
        .with_detail(format!("members {} -> {}", count(&p.l0), count(&p.l1))))
}

/// Sum identity between the switched policy, its mirror (source and learner
/// regions exchanged), the predictor, and the learner's plain task value.
/// The identity is exact for the degenerate memberships (none or all) on
/// any task; on a designed switching boundary it is asserted, elsewhere the
/// gap is a diagnostic.
pub fn check_anti_main_identity(
    mdp: &TabularMdp,
    mu: &SourcePolicy,
    mdp_name: &str,
    learner: Option<&[usize]>,
    designed_l: Option<&[bool]>,
) -> Result<Vec<OracleReport>, OracleError> {
    let n = mdp.num_states;
    let (mu_matrix, g) = predictor(mdp, mu)?;
    let (star, star_policy) = value_iteration(mdp, VI_TOL)?;
    let rho = match learner {
        Some(l) => l.to_vec(),
        None => star_policy,
    };
    let rho_matrix = deterministic_matrix(&rho, mdp.num_actions);
    let v_rho = policy_evaluation_exact(mdp, &rho_matrix)?;
    let (main_l, label, main_asserted) = match designed_l {
        Some(l) => (l.to_vec(), "designed membership", true),
        None => {
            let fx = threshold_fixpoint(mdp, &g, &star.v, MEMBER_TOL)?;
            (fx.in_l, "fixpoint membership", false)
        }
    };
    let cases = [
        ("anti-main-identity", main_l, label, main_asserted),
        ("anti-main-identity-empty", vec![false; n], "no members", true),
        ("anti-main-identity-full", vec![true; n], "all members", true),
    ];
    let mut out = Vec::with_capacity(cases.len());
    for (name, in_l, label, asserted) in cases {
        let main = evaluate_main_exact(mdp, &mu_matrix, &rho_matrix, &in_l, false)?;
        let anti = evaluate_main_exact(mdp, &mu_matrix, &rho_matrix, &in_l, true)?;
        let viol = worst((0..n).map(|s| {
            (s, (main.v[s] + anti.v[s] - g.v[s] - v_rho.v[s]).abs())
        }));
        out.push(
            OracleReport::new(name, mdp_name, mdp.discount, asserted, 1e-8, viol)
                .with_detail(format!("{label}, {}/{} member states", count(&in_l), n)),
        );
    }
    Ok(out)
}

/// Recovery task whose handover rewards are replaced by the proxy's
/// per-transition reward. Member and original terminal states absorb; every
/// other row keeps its dynamics with rewritten rewards; start mass moves
/// off the new terminals when possible.
pub fn build_proxy_task(
    mdp: &TabularMdp,
    in_l: &[bool],
    g: &ExactValues,
    kind: ProxyKind,
) -> TabularMdp {
    let mut task = build_recovery_mdp(mdp, in_l, &g.v);
    for s in 0..mdp.num_states {
        if task.terminal[s] {
            continue;
        }
        for a in 0..mdp.num_actions {
            for (o, src) in task.rows[s][a].iter_mut().zip(&mdp.rows[s][a]) {
                let (reward, _) = proxy_reward_terms(
                    kind,
                    g.q_at(s, a, mdp.num_actions),
                    g.v[src.next_state],
                    src.reward,
                    in_l[src.next_state],
                    mdp.terminal[src.next_state],
                    mdp.discount,
                );
                o.reward = reward;
            }
        }
    }
    task
}

/// Closed-form bias along the witness trajectory, evaluated under both
/// readings of the lemma's predictor index: the advancing one, which walks
/// the trajectory, and the first-step one, which freezes the predictor at
/// the first successor.
#[derive(Debug, Clone, Copy)]
pub struct BiasReading {
    pub witness: usize,
    pub handover_steps: usize,
    pub measured: f64,
    pub advancing_index: f64,
    pub first_step_index: f64,
}

/// Walks the recovery policy from the witness through the original
/// dynamics until it hands over, then evaluates both closed-form bias
/// expressions. None when the path is stochastic, loops, or finishes the
/// task without a handover.
pub fn scaled_bias_reading(
    mdp: &TabularMdp,
    g: &ExactValues,
    in_l: &[bool],
    recovery_policy: &[usize],
    recovery_v: &[f64],
    proxy_v: &[f64],
    kind: ProxyKind,
    witness: usize,
) -> Option<BiasReading> {
    if mdp.terminal[witness] || in_l[witness] {
        return None;
    }
    let gamma = mdp.discount;
    let mut states = vec![witness];
    let mut rewards = Vec::new();
    let mut s = witness;
    for _ in 0..mdp.num_states + 2 {
        if mdp.terminal[s] || in_l[s] {
            break;
        }
        let row = &mdp.rows[s][recovery_policy[s]];
        if row.len() != 1 {
            return None;
        }
        rewards.push(row[0].reward);
        s = row[0].next_state;
        states.push(s);
    }
    let last = *states.last().unwrap();
    let k = states.len() - 1;
    if k == 0 || !in_l[last] || mdp.terminal[last] {
        return None;
    }
    let mut sum_advancing = 0.0;
    let mut sum_first = 0.0;
    let mut sum_rewards = 0.0;
    for i in 0..k {
        let w = gamma.powi(i as i32);
        sum_advancing += w * g.v[states[i + 1]];
        sum_first += w * g.v[states[1]];
        sum_rewards += w * rewards[i];
    }
    let (advancing_index, first_step_index) = match kind {
        ProxyKind::ScaledG => (
            (1.0 - gamma) * sum_advancing - gamma * sum_rewards,
            (1.0 - gamma) * sum_first - gamma * sum_rewards,
        ),
        ProxyKind::ScaledNextG => (
            (1.0 - gamma) * sum_advancing - sum_rewards,
            (1.0 - gamma) * sum_first - sum_rewards,
        ),
        _ => return None,
    };
    Some(BiasReading {
        witness,
        handover_steps: k,
        measured: proxy_v[witness] - recovery_v[witness],
        advancing_index,
        first_step_index,
    })
}

struct GammaSolve {
    gap: (f64, Option<usize>),
    reading: Option<BiasReading>,
}

/// Solves one discount of the bias sweep: membership from a constant bar on
/// the predictor, recovery task solved optimally, the same policy evaluated
/// exactly under proxy rewards.
fn bias_at_gamma(
    mdp: &TabularMdp,
    mu: &SourcePolicy,
    kind: ProxyKind,
    gamma: f64,
    want_reading: bool,
) -> Result<GammaSolve, OracleError> {
    let mut m = mdp.clone();
    m.discount = gamma;
    let (_, g) = predictor(&m, mu)?;
    let bar = vec![BIAS_BAR; m.num_states];
    let in_l = members_of(&g.v, &bar, 0.0);
    let rec = build_recovery_mdp(&m, &in_l, &g.v);
    let (vr, pr) = value_iteration(&rec, VI_TOL)?;
    let proxy = build_proxy_task(&m, &in_l, &g, kind);
    let vhat =
        policy_evaluation_exact(&proxy, &deterministic_matrix(&pr, m.num_actions))?;
    let gap = worst(
        (0..m.num_states).map(|s| (s, (vhat.v[s] - vr.v[s]).abs())),
    );
    let reading = match (want_reading, gap.1) {
        (true, Some(w)) => {
            scaled_bias_reading(&m, &g, &in_l, &pr, &vr.v, &vhat.v, kind, w)
        }
        _ => None,
    };
    Ok(GammaSolve { gap, reading })
}

/// Per-discount worst bias of a proxy over the sweep, with witnesses.
pub fn proxy_bias_gaps(
    mdp: &TabularMdp,
    mu: &SourcePolicy,
    kind: ProxyKind,
    gammas: &[f64],
) -> Result<Vec<(f64, Option<usize>)>, OracleError> {
    gammas
        .iter()
        .map(|&gamma| Ok(bias_at_gamma(mdp, mu, kind, gamma, false)?.gap))
        .collect()
}

fn fmt_gaps(gammas: &[f64], gaps: &[(f64, Option<usize>)]) -> String {
    let parts: Vec<String> = gammas
        .iter()
        .zip(gaps)
        .map(|(gamma, (gap, _))| format!("{gamma}: {gap:.3e}"))
        .collect();
    format!("gaps per discount {{{}}}", parts.join(", "))
}

fn scaled_or_diff_bias(
    mdp: &TabularMdp,
    mu: &SourcePolicy,
    mdp_name: &str,
    kind: ProxyKind,
    gammas: &[f64],
) -> Result<OracleReport, OracleError> {
    if gammas.is_empty() {
        return Err(OracleError::BadInput("bias sweep needs at least one discount".into()));
    }
    let scaled = matches!(kind, ProxyKind::ScaledG | ProxyKind::ScaledNextG);
    if scaled && gammas.len() < 2 {
        return Err(OracleError::BadInput(
            "scaled bias sweep needs at least two discounts to compare".into(),
        ));
    }
    let mut gaps = Vec::with_capacity(gammas.len());
    let mut reading = None;
    for (idx, &gamma) in gammas.iter().enumerate() {
        let solve = bias_at_gamma(mdp, mu, kind, gamma, scaled && idx == 0)?;
        gaps.push(solve.gap);
        if idx == 0 {
            reading = solve.reading;
        }
    }
    let mut detail = fmt_gaps(gammas, &gaps);
    let report = if scaled {
        if let Some(r) = reading {
            detail.push_str(&format!(
                "; witness {} hands over after {} step(s) at discount {}: \
                 measured {:+.6e}, advancing-index reading {:+.6e}, \
                 first-step reading {:+.6e}",
                r.witness,
                r.handover_steps,
                gammas[0],
                r.measured,
                r.advancing_index,
                r.first_step_index,
            ));
        }
        let growth = worst(gaps.windows(2).enumerate().map(|(i, pair)| {
            // Witness slot holds the sweep index where the gap grew.
            (i + 1, pair[1].0 - pair[0].0)
        }));
        let name = format!("proxy-bias-{kind}");
        // Dust-level slack: real monotonicity violations sit many orders
        // of magnitude above solver noise.
        OracleReport::new(&name, mdp_name, *gammas.last().unwrap(), true, 1e-12, growth)
    } else {
        let overall = gaps
            .iter()
            .fold((0.0f64, None), |acc, &(gap, wit)| {
                if gap > acc.0 { (gap, wit) } else { acc }
            });
        let name = format!("proxy-bias-{kind}");
        OracleReport::new(&name, mdp_name, *gammas.last().unwrap(), true, 1e-8, overall)
    };
    Ok(report.with_detail(detail))
}

fn indicator_policy_match(
    mdp: &TabularMdp,
    mu: &SourcePolicy,
    mdp_name: &str,
    gamma: f64,
) -> Result<OracleReport, OracleError> {
    let mut m = mdp.clone();
    m.discount = gamma;
    let (_, g) = predictor(&m, mu)?;
    let bar = vec![BIAS_BAR; m.num_states];
    let in_l = members_of(&g.v, &bar, 0.0);
    let rec = build_recovery_mdp(&m, &in_l, &g.v);
    let (_, oracle_policy) = value_iteration(&rec, VI_TOL)?;
    let proxy = build_proxy_task(&m, &in_l, &g, ProxyKind::Indicator);
    let (_, proxy_policy) = value_iteration(&proxy, VI_TOL)?;
    let mut compared = 0usize;
    let mut skipped = 0usize;
    let mut mismatches = Vec::new();
    for s in 0..m.num_states {
        if m.terminal[s] || in_l[s] {
            continue;
        }
        // The indicator pays only for handovers, so states whose best plan
        // finishes the task directly sit outside the equivalence.
        let finishes_directly = m.rows[s][oracle_policy[s]]
            .iter()
            .any(|o| m.terminal[o.next_state]);
        if finishes_directly {
            skipped += 1;
            continue;
        }
        compared += 1;
        if oracle_policy[s] != proxy_policy[s] {
            mismatches.push(s);
        }
    }
    let viol = (mismatches.len() as f64, mismatches.first().copied());
    Ok(OracleReport::new("proxy-bias-indicator", mdp_name, gamma, true, 0.0, viol)
        .with_detail(format!(
            "greedy actions compared on {compared} state(s), {skipped} direct \
             finish(es) skipped; {} mismatch(es)",
            mismatches.len()
        )))
}

/// Evaluates one proxy against the exact recovery construction: the
/// difference form must match to numerical dust, the scaled forms must
/// shrink monotonically as the discount approaches one, and the indicator
/// must induce the oracle's greedy policy near the undiscounted limit.
pub fn check_proxy_bias(
    mdp: &TabularMdp,
    mu: &SourcePolicy,
    mdp_name: &str,
    kind: ProxyKind,
    gammas: &[f64],
) -> Result<OracleReport, OracleError> {
    match kind {
        ProxyKind::Indicator => {
            let gamma = gammas.last().copied().unwrap_or(INDICATOR_SURROGATE_GAMMA);
            indicator_policy_match(mdp, mu, mdp_name, gamma)
        }
        _ => scaled_or_diff_bias(mdp, mu, mdp_name, kind, gammas),
    }
}

/// Named groups of checks runnable from the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Core,
    Proxies,
    Diagnostics,
    All,
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Suite::Core => "core",
            Suite::Proxies => "proxies",
            Suite::Diagnostics => "diagnostics",
            Suite::All => "all",
        };
        write!(f, "{name}")
    }
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "core" => Ok(Suite::Core),
            "proxies" => Ok(Suite::Proxies),
            "diagnostics" => Ok(Suite::Diagnostics),
            "all" => Ok(Suite::All),
            other => Err(format!(
                "unknown suite '{other}' (expected core, proxies, diagnostics, or all)"
            )),
        }
    }
}

/// Runs a suite over every bundled fixture plus seeded random tasks and
/// returns the reports in a deterministic order.
pub fn run_suite(
    suite: Suite,
    seed_range: Range<u64>,
) -> Result<Vec<OracleReport>, OracleError> {
    let mut out = Vec::new();
    match suite {
        Suite::Core => {
            for f in all_fixtures() {
                for kind in [LearnerKind::Recovery, LearnerKind::Student] {
                    out.push(check_optimality(&f.mdp, &f.mu, f.name, kind)?);
                    out.push(check_lower_bound(&f.mdp, &f.mu, f.name, kind)?);
                }
                out.push(check_improvement(&f.mdp, &f.mu, f.name, true)?);
                out.push(check_contraction(&f.mdp, &f.mu, f.name)?);
            }
            for seed in seed_range {
                let (mdp, mu) = random_mdp(seed);
                let name = format!("random-{seed}");
                for kind in [LearnerKind::Recovery, LearnerKind::Student] {
                    out.push(check_lower_bound(&mdp, &mu, &name, kind)?);
                }
                out.push(check_contraction(&mdp, &mu, &name)?);
            }
        }
        Suite::Proxies => {
            for f in all_fixtures() {
                out.push(check_proxy_bias(
                    &f.mdp, &f.mu, f.name, ProxyKind::Diff, &BIAS_GAMMAS,
                )?);
                if f.scaled_bias_fixture {
                    for kind in [ProxyKind::ScaledG, ProxyKind::ScaledNextG] {
                        out.push(check_proxy_bias(&f.mdp, &f.mu, f.name, kind, &BIAS_GAMMAS)?);
                    }
                }
                out.push(check_proxy_bias(
                    &f.mdp,
                    &f.mu,
                    f.name,
                    ProxyKind::Indicator,
                    &[INDICATOR_SURROGATE_GAMMA],
                )?);
            }
        }
        Suite::Diagnostics => {
            for f in all_fixtures() {
                out.extend(check_anti_main_identity(
                    &f.mdp,
                    &f.mu,
                    f.name,
                    f.learner.as_deref(),
                    f.designed_l.as_deref(),
                )?);
            }
            for seed in seed_range {
                let (mdp, mu) = random_mdp(seed);
                let name = format!("random-{seed}");
                out.extend(check_anti_main_identity(&mdp, &mu, &name, None, None)?);
                out.push(check_improvement(&mdp, &mu, &name, false)?);
            }
        }
        Suite::All => {
            out.extend(run_suite(Suite::Core, seed_range.clone())?);
            out.extend(run_suite(Suite::Proxies, seed_range.clone())?);
            out.extend(run_suite(Suite::Diagnostics, seed_range)?);
        }
    }
    Ok(out)
}

/// True when every asserted report passed; diagnostics never count.
pub fn all_asserted_pass(reports: &[OracleReport]) -> bool {
    reports.iter().all(|r| r.pass || !r.asserted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::derive_seed;
    use crate::oracle::fixtures::{
        chain_forked, chain_suboptimal, chain_switch, tworoom_stuck,
    };

    fn assert_all_pass(reports: &[OracleReport]) {
        for r in reports {
            assert!(
                r.pass || !r.asserted,
                "{} on {} failed: violation {:.3e} > {:.3e} (witness {:?}, {:?})",
                r.check,
                r.mdp,
                r.max_violation,
                r.tolerance,
                r.witness,
                r.detail,
            );
        }
    }

    #[test]
    fn core_guarantees_hold_on_every_fixture() {
        for f in all_fixtures() {
            for kind in [LearnerKind::Recovery, LearnerKind::Student] {
                let opt = check_optimality(&f.mdp, &f.mu, f.name, kind).unwrap();
                let low = check_lower_bound(&f.mdp, &f.mu, f.name, kind).unwrap();
                assert_all_pass(&[opt, low]);
            }
            let imp = check_improvement(&f.mdp, &f.mu, f.name, true).unwrap();
            let con = check_contraction(&f.mdp, &f.mu, f.name).unwrap();
            assert_all_pass(&[imp, con]);
        }
    }

    #[test]
    fn random_tasks_satisfy_bounds_contraction_and_exact_improvement() {
        for seed in 0..25 {
            let (mdp, mu) = random_mdp(seed);
            let name = format!("random-{seed}");
            for kind in [LearnerKind::Recovery, LearnerKind::Student] {
                let low = check_lower_bound(&mdp, &mu, &name, kind).unwrap();
                assert_all_pass(&[low]);
            }
            let con = check_contraction(&mdp, &mu, &name).unwrap();
            assert_all_pass(&[con]);
            // The improvement step's recovery values may never regress even
            // where the switched-policy comparison is only a diagnostic.
            let pair = improvement_pair(&mdp, &mu).unwrap();
            let margin = worst(
                (0..mdp.num_states).map(|s| (s, pair.v0.v[s] - pair.v1.v[s])),
            );
            assert!(margin.0 <= 1e-9, "seed {seed}: recovery values regressed {margin:?}");
        }
    }

    #[test]
    fn membership_fixpoint_is_stable_in_one_round_from_the_optimal_seed() {
        for f in all_fixtures() {
            let (_, g) = predictor(&f.mdp, &f.mu).unwrap();
            let (star, _) = value_iteration(&f.mdp, VI_TOL).unwrap();
            let fx = threshold_fixpoint(&f.mdp, &g, &star.v, MEMBER_TOL).unwrap();
            assert!(fx.stable, "{} did not stabilize", f.name);
            assert_eq!(fx.rounds, 1, "{} took extra rounds", f.name);
        }
        for seed in 0..50 {
            let (mdp, mu) = random_mdp(seed);
            let (_, g) = predictor(&mdp, &mu).unwrap();
            let (star, _) = value_iteration(&mdp, VI_TOL).unwrap();
            let fx = threshold_fixpoint(&mdp, &g, &star.v, MEMBER_TOL).unwrap();
            assert!(fx.stable, "seed {seed} did not stabilize");
        }
    }

    #[test]
    fn designed_chain_and_degenerate_memberships_satisfy_the_sum_identity() {
        let f = chain_switch();
        let reports = check_anti_main_identity(
            &f.mdp,
            &f.mu,
            f.name,
            f.learner.as_deref(),
            f.designed_l.as_deref(),
        )
        .unwrap();
        assert_eq!(reports.len(), 3);
        for r in &reports {
            assert!(r.asserted, "{} should be asserted on the designed chain", r.check);
        }
        assert_all_pass(&reports);
        for seed in 0..10 {
            let (mdp, mu) = random_mdp(seed);
            let reports =
                check_anti_main_identity(&mdp, &mu, "random", None, None).unwrap();
            assert!(!reports[0].asserted, "general case must stay a diagnostic");
            assert!(reports[1].asserted && reports[1].pass, "empty membership is exact");
            assert!(reports[2].asserted && reports[2].pass, "full membership is exact");
        }
    }

    #[test]
    fn difference_proxy_reproduces_recovery_values_on_every_fixture() {
        for f in all_fixtures() {
            let r = check_proxy_bias(&f.mdp, &f.mu, f.name, ProxyKind::Diff, &BIAS_GAMMAS)
                .unwrap();
            assert_all_pass(&[r]);
        }
    }

    #[test]
    fn scaled_proxy_bias_shrinks_and_is_nontrivial_on_the_forked_chain() {
        for f in all_fixtures().iter().filter(|f| f.scaled_bias_fixture) {
            for kind in [ProxyKind::ScaledG, ProxyKind::ScaledNextG] {
                let r = check_proxy_bias(&f.mdp, &f.mu, f.name, kind, &BIAS_GAMMAS)
                    .unwrap();
                assert_all_pass(&[r]);
            }
        }
        let forked = chain_forked();
        for kind in [ProxyKind::ScaledG, ProxyKind::ScaledNextG] {
            let gaps = proxy_bias_gaps(&forked.mdp, &forked.mu, kind, &BIAS_GAMMAS).unwrap();
            for pair in gaps.windows(2) {
                assert!(
                    pair[1].0 < pair[0].0,
                    "{kind} gaps should strictly shrink, got {gaps:?}"
                );
            }
            assert!(gaps[0].0 > 1e-3, "{kind} sweep should have real content");
        }
    }

    #[test]
    fn next_state_reading_matches_measured_bias_where_the_taken_pair_does_not() {
        for f in [chain_suboptimal(), chain_forked()] {
            let gamma = BIAS_GAMMAS[0];
            let solve =
                bias_at_gamma(&f.mdp, &f.mu, ProxyKind::ScaledNextG, gamma, true).unwrap();
            let r = solve.reading.expect("deterministic handover path");
            assert!(
                (r.measured - r.advancing_index).abs() < 1e-12,
                "{}: next-state form should telescope exactly, got {r:?}",
                f.name
            );
        }
        let forked = chain_forked();
        let solve =
            bias_at_gamma(&forked.mdp, &forked.mu, ProxyKind::ScaledG, BIAS_GAMMAS[0], true)
                .unwrap();
        let r = solve.reading.expect("deterministic handover path");
        assert!(
            (r.measured - r.advancing_index).abs() > 1e-6,
            "taken-pair form keeps a real gap against the closed form, got {r:?}"
        );
    }

    #[test]
    fn indicator_greedy_matches_oracle_greedy_away_from_direct_finishes() {
        for f in all_fixtures() {
            let r = check_proxy_bias(
                &f.mdp,
                &f.mu,
                f.name,
                ProxyKind::Indicator,
                &[INDICATOR_SURROGATE_GAMMA],
            )
            .unwrap();
            assert_all_pass(&[r]);
        }
        let f = tworoom_stuck();
        let r = check_proxy_bias(
            &f.mdp,
            &f.mu,
            f.name,
            ProxyKind::Indicator,
            &[INDICATOR_SURROGATE_GAMMA],
        )
        .unwrap();
        let detail = r.detail.unwrap();
        assert!(
            detail.contains("1 direct finish(es) skipped"),
            "the cell below the goal finishes directly: {detail}"
        );
    }

    #[test]
    fn finite_horizons_telescope_against_the_predictor() {
        use crate::oracle::dp::{deterministic_rollout, finite_horizon_value};
        for f in all_fixtures() {
            if f.name == "chain-long" {
                continue; // same structure as the short chains, slow to sweep
            }
            let actions = match &f.mu {
                SourcePolicy::Deterministic(a) => a.clone(),
                SourcePolicy::Stochastic(_) => continue,
            };
            let (_, g) = predictor(&f.mdp, &f.mu).unwrap();
            for s in 0..f.mdp.num_states {
                if f.mdp.terminal[s] {
                    continue;
                }
                for horizon in [0usize, 1, 2, 5, 9] {
                    let h = finite_horizon_value(&f.mdp, &actions, s, horizon).unwrap();
                    let (states, _) =
                        deterministic_rollout(&f.mdp, &actions, s, horizon).unwrap();
                    let steps = states.len() - 1;
                    let tail = f.mdp.discount.powi(steps as i32) * g.v[states[steps]];
                    assert!(
                        (g.v[s] - h - tail).abs() < 1e-9,
                        "{} state {s} horizon {horizon}",
                        f.name
                    );
                }
            }
        }
    }

    #[test]
    fn suites_emit_deterministic_serializable_reports() {
        let a = run_suite(Suite::All, 0..3).unwrap();
        let b = run_suite(Suite::All, 0..3).unwrap();
        assert_eq!(a.len(), b.len());
        assert!(all_asserted_pass(&a));
        for (x, y) in a.iter().zip(&b) {
            let jx = serde_json::to_string(x).unwrap();
            let jy = serde_json::to_string(y).unwrap();
            assert_eq!(jx, jy);
            assert!(jx.contains("\"check\""));
        }
        let names: Vec<&str> = a.iter().map(|r| r.check.as_str()).collect();
        for expected in [
            "optimality-recovery",
            "optimality-student",
            "lower-bound-recovery",
            "lower-bound-student",
            "improvement",
            "contraction",
            "proxy-bias-diff",
            "proxy-bias-scaled-g",
            "proxy-bias-scaled-next-g",
            "proxy-bias-indicator",
            "anti-main-identity",
            "anti-main-identity-empty",
            "anti-main-identity-full",
        ] {
            assert!(names.contains(&expected), "missing {expected}");
        }
        // Seed plumbing sanity: the derived stream constant stays in use.
        assert_ne!(derive_seed(0, 1), derive_seed(0, 2));
    }

    #[test]
    fn constant_threshold_pairs_nest_their_membership_sets() {
        // Bars chosen to split the stuck fixture's member predictor values,
        // which all sit between 0.97 and 1 at the native discount.
        let f = tworoom_stuck();
        let (_, g) = predictor(&f.mdp, &f.mu).unwrap();
        let low = members_of(&g.v, &vec![0.975; f.mdp.num_states], 0.0);
        let high = members_of(&g.v, &vec![0.985; f.mdp.num_states], 0.0);
        assert!(count(&high) < count(&low), "a higher bar keeps fewer states");
        for s in 0..f.mdp.num_states {
            assert!(!high[s] || low[s], "state {s} breaks the nesting");
        }
    }
}
