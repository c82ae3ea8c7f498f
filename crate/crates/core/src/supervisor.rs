//! Centralized optimal supervision and the exhaustive oracles used to check it.

use std::collections::VecDeque;

use log::warn;
use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::par::{self, Exec};
use crate::pfsa::{
    build_transition_matrix, compute_measure, controlled_matrix, policy_measure,
    stationary_performance, DisablingSet, MeasureVector, Pfsa, TransitionMatrix,
};

/// Relative gap below which two measures are treated as tied; ties keep a
/// transition enabled.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Slack allowed when asserting that measures never decrease between iterations.
pub const MONOTONE_SLACK: f64 = 1e-12;

/// Largest controllable set accepted by [`brute_force_optimal`].
pub const BRUTE_FORCE_LIMIT: usize = 20;

/// Discount used for utopian performance.
pub const UTOPIAN_THETA: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct SupervisorResult {
    pub policy: DisablingSet,
    pub measure: MeasureVector,
    pub iterations: usize,
    pub theta_used: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SupervisorOptions {
    /// Defaults to `10 * n_states` when `None`.
    pub max_iterations: Option<usize>,
}

/// Whether moving from a state of measure `from` to one of measure `to` should be disabled.
#[inline]
pub fn should_disable(from: f64, to: f64) -> bool {
    to < from - TIE_TOLERANCE * from.abs()
}

pub fn optimal_supervisor(pfsa: &Pfsa, theta: f64) -> Result<SupervisorResult> {
    optimal_supervisor_with(pfsa, theta, SupervisorOptions::default())
}

pub fn optimal_supervisor_with(
    pfsa: &Pfsa,
    theta: f64,
    opts: SupervisorOptions,
) -> Result<SupervisorResult> {
    let cap = opts.max_iterations.unwrap_or(10 * pfsa.n_states().max(1));
    let mut policy = DisablingSet::new();
    let mut measure = policy_measure(pfsa, &policy, theta)?;
    for iteration in 1..=cap {
        let next: DisablingSet = pfsa
            .controllable()
            .iter()
            .filter(|&&(q, s)| {
                let dest = pfsa
                    .transition(q, s)
                    .expect("controllable transitions are defined");
                should_disable(measure.get(q), measure.get(dest))
            })
            .copied()
            .collect();
        if next == policy {
            return Ok(SupervisorResult {
                policy,
                measure,
                iterations: iteration,
                theta_used: theta,
            });
        }
        let next_measure = policy_measure(pfsa, &next, theta)?;
        if let Some(i) =
            (0..measure.len()).find(|&i| next_measure.get(i) < measure.get(i) - MONOTONE_SLACK)
        {
            return Err(Error::InvariantViolation(format!(
                "measure of state {i} decreased from {} to {} at iteration {iteration}",
                measure.get(i),
                next_measure.get(i)
            )));
        }
        policy = next;
        measure = next_measure;
    }
    Err(Error::NonConvergence {
        what: "optimal supervisor",
        iterations: cap,
        residual: f64::NAN,
    })
}

pub fn brute_force_optimal(pfsa: &Pfsa, theta: f64) -> Result<SupervisorResult> {
    brute_force_optimal_with(pfsa, theta, Exec::default())
}

/// Enumerates every disabling set and returns the maximally permissive one
/// among those whose measure dominates all others.
pub fn brute_force_optimal_with(pfsa: &Pfsa, theta: f64, exec: Exec) -> Result<SupervisorResult> {
    let controllable: Vec<(usize, usize)> = pfsa.controllable().iter().copied().collect();
    let k = controllable.len();
    if k > BRUTE_FORCE_LIMIT {
        return Err(Error::InvalidArgument(format!(
            "{k} controllable transitions exceed the enumeration limit of {BRUTE_FORCE_LIMIT}"
        )));
    }
    let n = pfsa.n_states();
    let total = 1usize << k;
    let subset = |mask: usize| -> DisablingSet {
        controllable
            .iter()
            .enumerate()
            .filter(|(b, _)| mask >> b & 1 == 1)
            .map(|(_, &t)| t)
            .collect()
    };
    let measure_of = |mask: usize| policy_measure(pfsa, &subset(mask), theta);

    let upper = par::map_reduce(
        exec,
        total,
        || Ok(vec![f64::NEG_INFINITY; n]),
        |mask| measure_of(mask).map(|m| m.values.as_slice().to_vec()),
        |a, b| {
            let (a, b) = (a?, b?);
            Ok(a.iter().zip(&b).map(|(x, y)| x.max(*y)).collect())
        },
    )?;

    // (disabled count, mask) of the best dominant candidate
    let best = par::map_reduce(
        exec,
        total,
        || Ok(None),
        |mask| {
            let m = measure_of(mask)?;
            let dominant = (0..n).all(|i| m.get(i) >= upper[i] - MONOTONE_SLACK);
            Ok(dominant.then(|| (mask.count_ones(), mask)))
        },
        |a: Result<Option<(u32, usize)>>, b| {
            let (a, b) = (a?, b?);
            Ok(match (a, b) {
                (Some(x), Some(y)) => Some(x.min(y)),
                (x, y) => x.or(y),
            })
        },
    )?;
    let (_, mask) = best.ok_or(Error::NoDominantPolicy(total))?;
    let policy = subset(mask);
    let measure = policy_measure(pfsa, &policy, theta)?;
    Ok(SupervisorResult {
        policy,
        measure,
        iterations: total,
        theta_used: theta,
    })
}

/// `epsilon / m^2`, clamped to `(0, 0.5]`.
pub fn select_theta(epsilon: f64, m: usize) -> f64 {
    let m = m.max(1) as f64;
    let theta = epsilon / (m * m);
    if theta > 0.5 {
        warn!("theta = {theta} clamped to 0.5");
        0.5
    } else if theta <= 0.0 || !theta.is_finite() {
        warn!("theta = {theta} clamped to f64::MIN_POSITIVE");
        f64::MIN_POSITIVE
    } else {
        theta
    }
}

/// Number of consecutive halvings over which the policy must stay fixed.
pub const SWEEP_STABLE_HALVINGS: usize = 3;

/// Halves `theta` until the optimal policy is unchanged over
/// [`SWEEP_STABLE_HALVINGS`] consecutive halvings and returns the largest
/// `theta` of that run.
pub fn critical_theta_sweep(pfsa: &Pfsa, theta_start: f64, min_theta: f64) -> Result<f64> {
    if !(theta_start > 0.0 && theta_start < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "theta_start = {theta_start} must lie in (0, 1)"
        )));
    }
    let mut run_start = theta_start;
    let mut run_policy = optimal_supervisor(pfsa, theta_start)?.policy;
    let mut run_len = 0;
    let mut theta = theta_start;
    while run_len < SWEEP_STABLE_HALVINGS {
        theta /= 2.0;
        if theta < min_theta {
            return Err(Error::NonConvergence {
                what: "critical theta sweep",
                iterations: (theta_start / theta).log2().round() as usize,
                residual: theta,
            });
        }
        let policy = optimal_supervisor(pfsa, theta)?.policy;
        if policy == run_policy {
            run_len += 1;
        } else {
            run_start = theta;
            run_policy = policy;
            run_len = 0;
        }
    }
    Ok(run_start)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyIterationResult {
    /// Controllable moves the final policy disables.
    pub policy: DisablingSet,
    /// Discounted values; `values * (1 - discount)` equals the measure.
    pub values: DVector<f64>,
    /// Factor mapping values to measures, `1 - discount`.
    pub value_scale: f64,
    pub iterations: usize,
    pub bellman_residual: f64,
}

/// Expected next value at `q` when the moves in `disabled` self-loop.
fn action_value(pfsa: &Pfsa, q: usize, disabled: &DisablingSet, values: &DVector<f64>) -> f64 {
    pfsa.outgoing(q)
        .map(|(s, d, p)| {
            let dest = if disabled.contains(q, s) { q } else { d };
            p * values[dest]
        })
        .sum()
}

/// Greedy action at `q`: keep a move enabled iff it leads somewhere worth
/// at least as much as staying put, under the same tie rule as
/// [`should_disable`].
fn greedy_disabled(pfsa: &Pfsa, values: &DVector<f64>) -> DisablingSet {
    pfsa.controllable()
        .iter()
        .filter(|&&(q, s)| {
            let d = pfsa
                .transition(q, s)
                .expect("controllable move has a destination");
            should_disable(values[q], values[d])
        })
        .copied()
        .collect()
}

/// Howard policy iteration on the discounted MDP whose action at each state
/// is a subset of its controllable moves to disable, reward equal to the
/// characteristic and discount `discount`.
pub fn policy_iteration(pfsa: &Pfsa, discount: f64) -> Result<PolicyIterationResult> {
    if !(discount > 0.0 && discount < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "discount = {discount} must lie in (0, 1)"
        )));
    }
    let theta = 1.0 - discount;
    let n = pfsa.n_states();
    let evaluate = |disabled: &DisablingSet| -> Result<DVector<f64>> {
        Ok(policy_measure(pfsa, disabled, theta)?.values / theta)
    };
    let cap = 10 * n.max(1) + 10;
    let mut policy = DisablingSet::new();
    let mut values = evaluate(&policy)?;
    for iteration in 1..=cap {
        let next = greedy_disabled(pfsa, &values);
        if next == policy {
            let chi = pfsa.characteristic();
            let residual = (0..n)
                .map(|q| {
                    (values[q] - chi[q] - discount * action_value(pfsa, q, &next, &values)).abs()
                        * theta
                })
                .fold(0.0, f64::max);
            if residual > 1e-9 {
                return Err(Error::NonConvergence {
                    what: "policy iteration Bellman check",
                    iterations: iteration,
                    residual,
                });
            }
            return Ok(PolicyIterationResult {
                policy,
                values,
                value_scale: theta,
                iterations: iteration,
                bellman_residual: residual,
            });
        }
        policy = next;
        values = evaluate(&policy)?;
    }
    Err(Error::NonConvergence {
        what: "policy iteration",
        iterations: cap,
        residual: f64::NAN,
    })
}

/// Stationary performance of the optimal policy at a vanishing discount.
pub fn utopian_performance(pfsa: &Pfsa, targets: &[usize]) -> Result<DVector<f64>> {
    let res = optimal_supervisor(pfsa, UTOPIAN_THETA)?;
    stationary_performance(&controlled_matrix(pfsa, &res.policy)?, targets)
}

/// As [`utopian_performance`] but with the policy found by exhaustive search.
pub fn utopian_performance_brute_force(pfsa: &Pfsa, targets: &[usize]) -> Result<DVector<f64>> {
    let res = brute_force_optimal(pfsa, UTOPIAN_THETA)?;
    stationary_performance(&controlled_matrix(pfsa, &res.policy)?, targets)
}

/// Elementwise maximum of stationary performance over every disabling set.
pub fn max_stationary_performance(
    pfsa: &Pfsa,
    targets: &[usize],
    exec: Exec,
) -> Result<DVector<f64>> {
    let controllable: Vec<(usize, usize)> = pfsa.controllable().iter().copied().collect();
    if controllable.len() > BRUTE_FORCE_LIMIT {
        return Err(Error::InvalidArgument(
            "controllable set too large to enumerate".into(),
        ));
    }
    let n = pfsa.n_states();
    par::map_reduce(
        exec,
        1usize << controllable.len(),
        || Ok(DVector::from_element(n, f64::NEG_INFINITY)),
        |mask| {
            let d: DisablingSet = controllable
                .iter()
                .enumerate()
                .filter(|(b, _)| mask >> b & 1 == 1)
                .map(|(_, &t)| t)
                .collect();
            stationary_performance(&controlled_matrix(pfsa, &d)?, targets)
        },
        |a, b| Ok(a?.zip_map(&b?, f64::max)),
    )
}

/// Whether the graph of enabled controllable moves that strictly increase
/// the measure is acyclic.
pub fn is_loop_free(pfsa: &Pfsa, policy: &DisablingSet, measure: &MeasureVector) -> bool {
    let n = pfsa.n_states();
    let mut adj = vec![Vec::new(); n];
    let mut indegree = vec![0usize; n];
    for &(q, s) in pfsa.controllable() {
        if policy.contains(q, s) {
            continue;
        }
        let d = pfsa
            .transition(q, s)
            .expect("controllable transitions are defined");
        if d != q && measure.get(d) > measure.get(q) {
            adj[q].push(d);
            indegree[d] += 1;
        }
    }
    let mut queue: VecDeque<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
    let mut removed = 0;
    while let Some(i) = queue.pop_front() {
        removed += 1;
        for &j in &adj[i] {
            indegree[j] -= 1;
            if indegree[j] == 0 {
                queue.push_back(j);
            }
        }
    }
    removed == n
}

/// Measure of the uncontrolled plant.
pub fn plant_measure(pfsa: &Pfsa, theta: f64) -> Result<MeasureVector> {
    compute_measure(
        &build_transition_matrix(pfsa)?,
        pfsa.characteristic(),
        theta,
    )
}

/// Transition matrix of the plant under `policy`.
pub fn supervised_matrix(pfsa: &Pfsa, policy: &DisablingSet) -> Result<TransitionMatrix> {
    controlled_matrix(pfsa, policy)
}
