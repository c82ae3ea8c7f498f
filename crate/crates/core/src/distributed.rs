//! Asynchronous per-agent measure updates with local control adaptation.
//!
//! Each agent keeps its own measure, a cached copy of its neighbors'
//! measures, the measures of its outgoing virtual states and its local row of
//! the transition matrix. One update reads the neighbors, refreshes the
//! virtual measures, re-decides which links to forward along and then
//! refreshes its own measure. The global transition matrix is never formed.

use std::collections::VecDeque;

use log::debug;
use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::par::{self, Exec};
use crate::pfsa::{DisablingSet, MeasureVector};
use crate::supervisor::should_disable;
use crate::swarm_graph::{FrozenNetwork, NetworkPfsa};

/// Slack on the boundedness and monotonicity checks.
pub const INVARIANT_SLACK: f64 = 1e-12;

/// Default termination tolerance on the measure error.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Constant in [`sync_iteration_bound`]. Zero-init runs at [`DEFAULT_TOL`]
/// take about `(m^2 / epsilon) ln(m^2 / (epsilon tol))` epochs, which stays
/// below the bound for `N >= 3` and `epsilon >= 1e-3`.
pub const COMPLEXITY_CONSTANT: f64 = 12.0;

#[derive(Debug, Clone, PartialEq)]
pub struct NeighborRecord {
    pub id: usize,
    pub cached_measure: f64,
    pub lambda: f64,
    pub virtual_measure: f64,
    /// Probability of moving into the virtual state of this link.
    pub link_prob: f64,
}

impl NeighborRecord {
    pub fn forwarding(&self) -> bool {
        self.link_prob > 0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentLocalState {
    pub agent_id: usize,
    pub self_measure: f64,
    pub chi: f64,
    /// Targets never move; their row is a pure self-loop.
    pub absorbing: bool,
    pub neighbors: Vec<NeighborRecord>,
    pub self_loop_prob: f64,
}

/// Result of one agent update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateOutcome {
    pub previous: f64,
    pub current: f64,
    pub corrections: usize,
}

impl AgentLocalState {
    /// Local state for agent `i` of `net` with every link enabled.
    pub fn new(net: &FrozenNetwork, i: usize, measure: f64) -> Self {
        let links = &net.neighbors[i];
        let absorbing = net.target[i];
        let p = if absorbing || links.is_empty() {
            0.0
        } else {
            1.0 / links.len() as f64
        };
        AgentLocalState {
            agent_id: i,
            self_measure: measure,
            chi: net.chi(i),
            absorbing,
            neighbors: links
                .iter()
                .map(|l| NeighborRecord {
                    id: l.to,
                    cached_measure: 0.0,
                    lambda: l.lambda,
                    virtual_measure: 0.0,
                    link_prob: p,
                })
                .collect(),
            self_loop_prob: if p == 0.0 { 1.0 } else { 0.0 },
        }
    }

    /// Replaces the neighbor set, keeping the measure and the forwarding
    /// decisions of links that persist. New links start enabled.
    pub fn rewire(&mut self, net: &FrozenNetwork) {
        let old = std::mem::take(&mut self.neighbors);
        let mut fresh = AgentLocalState::new(net, self.agent_id, self.self_measure);
        let m = fresh.neighbors.len();
        if !fresh.absorbing && m > 0 {
            let mut disabled = 0;
            for rec in &mut fresh.neighbors {
                if let Some(prev) = old.iter().find(|o| o.id == rec.id) {
                    rec.cached_measure = prev.cached_measure;
                    rec.virtual_measure = prev.virtual_measure;
                    if !prev.forwarding() {
                        rec.link_prob = 0.0;
                        disabled += 1;
                    }
                }
            }
            fresh.self_loop_prob = disabled as f64 / m as f64;
        }
        *self = fresh;
    }

    pub fn degree(&self) -> usize {
        self.neighbors.len()
    }

    /// One update against the current neighbor measures, indexed by agent id.
    pub fn update(
        &mut self,
        measures: &[f64],
        dump_measure: f64,
        theta: f64,
    ) -> Result<UpdateOutcome> {
        let previous = self.self_measure;
        let m = self.neighbors.len();
        let mut corrections = 0;
        let mut disabled = 0usize;
        for rec in &mut self.neighbors {
            rec.cached_measure = measures[rec.id];
            rec.virtual_measure = (1.0 - theta)
                * ((1.0 - rec.lambda) * rec.cached_measure + rec.lambda * dump_measure);
            if self.absorbing {
                continue;
            }
            if should_disable(previous, rec.virtual_measure) {
                if rec.link_prob > 0.0 {
                    rec.link_prob = 0.0;
                    corrections += 1;
                }
                disabled += 1;
            } else if rec.link_prob == 0.0 {
                rec.link_prob = 1.0 / m as f64;
                corrections += 1;
            }
        }
        if !self.absorbing && m > 0 {
            self.self_loop_prob = disabled as f64 / m as f64;
        }
        let row: f64 =
            self.self_loop_prob + self.neighbors.iter().map(|r| r.link_prob).sum::<f64>();
        if self.self_loop_prob < 0.0 || (row - 1.0).abs() > 1e-12 {
            return Err(Error::InvariantViolation(format!(
                "agent {} row sums to {row} with self-loop {}",
                self.agent_id, self.self_loop_prob
            )));
        }
        let flow: f64 = self
            .neighbors
            .iter()
            .map(|r| r.link_prob * r.virtual_measure)
            .sum();
        self.self_measure =
            (1.0 - theta) * (flow + self.self_loop_prob * previous) + theta * self.chi;
        Ok(UpdateOutcome {
            previous,
            current: self.self_measure,
            corrections,
        })
    }
}

/// Functional form of [`AgentLocalState::update`].
pub fn agent_update(
    state: &AgentLocalState,
    measures: &[f64],
    dump_measure: f64,
    theta: f64,
) -> Result<AgentLocalState> {
    let mut next = state.clone();
    next.update(measures, dump_measure, theta)?;
    Ok(next)
}

/// Enabled neighbors ordered by cached measure (descending), then id.
pub fn forwarding_table(state: &AgentLocalState) -> Vec<usize> {
    let mut enabled: Vec<&NeighborRecord> =
        state.neighbors.iter().filter(|r| r.forwarding()).collect();
    enabled.sort_by(|a, b| {
        b.cached_measure
            .total_cmp(&a.cached_measure)
            .then(a.id.cmp(&b.id))
    });
    enabled.into_iter().map(|r| r.id).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleMode {
    /// Every agent reads the previous epoch's values.
    Synchronized,
    /// Agents update one at a time in a fresh random order each epoch,
    /// reading whatever their neighbors currently hold.
    RandomPermutationAsync,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Schedule {
    pub mode: ScheduleMode,
    pub seed: u64,
}

impl Schedule {
    pub fn synchronized() -> Self {
        Schedule {
            mode: ScheduleMode::Synchronized,
            seed: 0,
        }
    }

    pub fn asynchronous(seed: u64) -> Self {
        Schedule {
            mode: ScheduleMode::RandomPermutationAsync,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochTelemetry {
    pub epoch: usize,
    pub corrections: usize,
    /// Mean agent measure.
    pub rho_estimate: f64,
    pub max_delta: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct InvariantCounters {
    pub checked: u64,
    pub bound_violations: u64,
    pub monotone_checked: u64,
    pub monotone_violations: u64,
}

impl InvariantCounters {
    pub fn total_violations(&self) -> u64 {
        self.bound_violations + self.monotone_violations
    }

    pub fn merge(&mut self, other: &InvariantCounters) {
        self.checked += other.checked;
        self.bound_violations += other.bound_violations;
        self.monotone_checked += other.monotone_checked;
        self.monotone_violations += other.monotone_violations;
    }
}

/// Runs agent updates epoch by epoch over a network that may be rewired
/// between epochs.
#[derive(Debug, Clone)]
pub struct DistributedSolver {
    theta: f64,
    chi_dump: f64,
    agents: Vec<AgentLocalState>,
    measures: Vec<f64>,
    schedule: Schedule,
    rng: ChaCha8Rng,
    exec: Exec,
    epoch: usize,
    total_corrections: usize,
    updates: u64,
    check_monotone: bool,
    counters: InvariantCounters,
}

impl DistributedSolver {
    pub fn new(
        net: &FrozenNetwork,
        theta: f64,
        schedule: Schedule,
        init: Option<&[f64]>,
    ) -> Result<Self> {
        if !(theta > 0.0 && theta < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "theta = {theta} must lie in (0, 1)"
            )));
        }
        let n = net.n_agents();
        let measures = match init {
            Some(v) if v.len() != n => {
                return Err(Error::InvalidArgument(format!(
                    "init has {} entries for {n} agents",
                    v.len()
                )))
            }
            Some(v) => v.to_vec(),
            None => vec![0.0; n],
        };
        let check_monotone = measures.iter().all(|&x| x == 0.0);
        Ok(DistributedSolver {
            theta,
            chi_dump: net.chi_dump,
            agents: (0..n)
                .map(|i| AgentLocalState::new(net, i, measures[i]))
                .collect(),
            measures,
            schedule,
            rng: ChaCha8Rng::seed_from_u64(schedule.seed),
            exec: Exec::default(),
            epoch: 0,
            total_corrections: 0,
            updates: 0,
            check_monotone,
            counters: InvariantCounters::default(),
        })
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    /// Turns the per-update monotonicity check on or off.
    pub fn set_monotone_check(&mut self, on: bool) {
        self.check_monotone = on;
    }

    /// Switches to a new neighbor structure; measures and persisting
    /// forwarding decisions carry over.
    pub fn rewire(&mut self, net: &FrozenNetwork) {
        assert_eq!(net.n_agents(), self.agents.len(), "agent count is fixed");
        self.chi_dump = net.chi_dump;
        for a in &mut self.agents {
            a.rewire(net);
        }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn measures(&self) -> &[f64] {
        &self.measures
    }

    pub fn agents(&self) -> &[AgentLocalState] {
        &self.agents
    }

    pub fn epochs(&self) -> usize {
        self.epoch
    }

    pub fn total_corrections(&self) -> usize {
        self.total_corrections
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn counters(&self) -> InvariantCounters {
        self.counters
    }

    /// Measure of the dump state; it is absorbing, so it sits at its characteristic.
    pub fn dump_measure(&self) -> f64 {
        self.chi_dump
    }

    fn record(&mut self, out: &UpdateOutcome) {
        let lo = self.chi_dump.min(0.0) - INVARIANT_SLACK;
        self.counters.checked += 1;
        if !(out.current >= lo && out.current <= 1.0 + INVARIANT_SLACK) {
            self.counters.bound_violations += 1;
        }
        if self.check_monotone {
            self.counters.monotone_checked += 1;
            if out.current < out.previous - INVARIANT_SLACK {
                self.counters.monotone_violations += 1;
            }
        }
    }

    /// Updates every agent once according to the schedule.
    pub fn epoch(&mut self) -> Result<EpochTelemetry> {
        let theta = self.theta;
        let dump = self.chi_dump;
        let mut corrections = 0;
        let mut max_delta: f64 = 0.0;
        match self.schedule.mode {
            ScheduleMode::Synchronized => {
                let prev = std::mem::take(&mut self.measures);
                let mut outcomes: Vec<Result<UpdateOutcome>> = Vec::new();
                outcomes.resize_with(self.agents.len(), || {
                    Ok(UpdateOutcome {
                        previous: 0.0,
                        current: 0.0,
                        corrections: 0,
                    })
                });
                let mut pairs: Vec<(&mut AgentLocalState, &mut Result<UpdateOutcome>)> =
                    self.agents.iter_mut().zip(outcomes.iter_mut()).collect();
                par::for_each_mut(self.exec, &mut pairs, |_, (agent, out)| {
                    **out = agent.update(&prev, dump, theta);
                });
                drop(pairs);
                self.measures = prev;
                for (i, out) in outcomes.into_iter().enumerate() {
                    let out = out?;
                    self.measures[i] = out.current;
                    corrections += out.corrections;
                    max_delta = max_delta.max((out.current - out.previous).abs());
                    self.record(&out);
                }
            }
            ScheduleMode::RandomPermutationAsync => {
                let mut order: Vec<usize> = (0..self.agents.len()).collect();
                order.shuffle(&mut self.rng);
                for i in order {
                    let out = self.agents[i].update(&self.measures, dump, theta)?;
                    self.measures[i] = out.current;
                    corrections += out.corrections;
                    max_delta = max_delta.max((out.current - out.previous).abs());
                    self.record(&out);
                }
            }
        }
        self.epoch += 1;
        self.updates += self.agents.len() as u64;
        self.total_corrections += corrections;
        let n = self.measures.len().max(1) as f64;
        Ok(EpochTelemetry {
            epoch: self.epoch,
            corrections,
            rho_estimate: self.measures.iter().sum::<f64>() / n,
            max_delta,
        })
    }

    /// Upper bound on the distance to the fixed point given the last epoch's change.
    pub fn error_bound(&self, max_delta: f64) -> f64 {
        max_delta * (1.0 - self.theta) / self.theta
    }

    /// Runs epochs until one changes no forwarding decision and the error
    /// bound drops below `tol`.
    pub fn run(
        &mut self,
        tol: f64,
        max_epochs: usize,
        telemetry: Option<&mut Vec<EpochTelemetry>>,
    ) -> Result<usize> {
        if tol.is_nan() || tol <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "tol = {tol} must be positive"
            )));
        }
        let mut sink = telemetry;
        let start = self.epoch;
        let mut last_bound = f64::INFINITY;
        while self.epoch - start < max_epochs {
            let t = self.epoch()?;
            if let Some(s) = sink.as_deref_mut() {
                s.push(t);
            }
            last_bound = self.error_bound(t.max_delta);
            if t.corrections == 0 && last_bound < tol {
                debug!("converged after {} epochs", self.epoch - start);
                return Ok(self.epoch - start);
            }
        }
        Err(Error::NonConvergence {
            what: "distributed measure updates",
            iterations: max_epochs,
            residual: last_bound,
        })
    }

    /// Forwarding decision per link, aligned with the network's neighbor lists.
    pub fn enabled(&self) -> Vec<Vec<bool>> {
        self.agents
            .iter()
            .map(|a| {
                a.neighbors
                    .iter()
                    .map(|r| !a.absorbing && r.forwarding())
                    .collect()
            })
            .collect()
    }

    /// Forwarding policy as a disabling set of `net`.
    pub fn policy(&self, net: &NetworkPfsa) -> DisablingSet {
        let mut d = DisablingSet::new();
        for a in &self.agents {
            if a.absorbing {
                continue;
            }
            for r in a.neighbors.iter().filter(|r| !r.forwarding()) {
                d.insert(
                    net.agent_index[a.agent_id],
                    net.link_symbol[&(a.agent_id, r.id)],
                );
            }
        }
        d
    }

    /// Measures of every state of `net`: agents, virtual states and dump.
    pub fn full_measure(&self, net: &NetworkPfsa) -> MeasureVector {
        let mut v = DVector::zeros(net.n_states());
        for (a, &q) in net.agent_index.iter().enumerate() {
            v[q] = self.measures[a];
        }
        for (i, links) in net.network.neighbors.iter().enumerate() {
            for l in links {
                v[net.virtual_index[&(i, l.to)]] = (1.0 - self.theta)
                    * ((1.0 - l.lambda) * self.measures[l.to] + l.lambda * self.chi_dump);
            }
        }
        v[net.dump_index] = self.chi_dump;
        MeasureVector {
            values: v,
            theta: self.theta,
        }
    }
}

/// Default epoch budget: ten times the epochs a zero start needs for the
/// target to come within `tol` of one.
pub fn default_epoch_cap(theta: f64, tol: f64) -> usize {
    let needed = ((theta * tol).ln() / (1.0 - theta).ln()).ceil();
    (10.0 * needed).min(1e9) as usize + 1000
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    /// Full state measure of the network PFSA.
    pub measure: MeasureVector,
    pub agent_measures: Vec<f64>,
    pub agents: Vec<AgentLocalState>,
    pub policy: DisablingSet,
    pub epochs: usize,
    pub updates: u64,
    pub corrections: usize,
    pub counters: InvariantCounters,
    pub telemetry: Vec<EpochTelemetry>,
}

pub fn run_to_convergence(
    net: &NetworkPfsa,
    theta: f64,
    schedule: Schedule,
    tol: f64,
    init: Option<&[f64]>,
) -> Result<ConvergenceReport> {
    run_to_convergence_with(net, theta, schedule, tol, init, Exec::default())
}

pub fn run_to_convergence_with(
    net: &NetworkPfsa,
    theta: f64,
    schedule: Schedule,
    tol: f64,
    init: Option<&[f64]>,
    exec: Exec,
) -> Result<ConvergenceReport> {
    let mut solver = DistributedSolver::new(&net.network, theta, schedule, init)?.with_exec(exec);
    let mut telemetry = Vec::new();
    let epochs = solver.run(tol, default_epoch_cap(theta, tol), Some(&mut telemetry))?;
    Ok(ConvergenceReport {
        measure: solver.full_measure(net),
        agent_measures: solver.measures().to_vec(),
        agents: solver.agents().to_vec(),
        policy: solver.policy(net),
        epochs,
        updates: solver.updates(),
        corrections: solver.total_corrections(),
        counters: solver.counters(),
        telemetry,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactOptimum {
    pub measures: Vec<f64>,
    /// Forwarding decision per link, aligned with the network's neighbor lists.
    pub enabled: Vec<Vec<bool>>,
}

/// Fixed point of the agent updates computed directly.
///
/// An agent's optimal measure depends only on neighbors of strictly larger
/// measure, so agents can be settled in decreasing order of measure, as in
/// Dijkstra's algorithm. Each agent's tentative value enables the best
/// prefix of its settled neighbors ranked by virtual-state measure.
pub fn exact_optimum(net: &FrozenNetwork, theta: f64) -> Result<ExactOptimum> {
    use ordered_float::OrderedFloat;
    use std::collections::BinaryHeap;

    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "theta = {theta} must lie in (0, 1)"
        )));
    }
    let n = net.n_agents();
    let virt =
        |lambda: f64, nu_j: f64| (1.0 - theta) * ((1.0 - lambda) * nu_j + lambda * net.chi_dump);
    // reverse adjacency: for agent j, the (agent i, lambda_ij) pairs that link into it
    let mut incoming: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (i, links) in net.neighbors.iter().enumerate() {
        for l in links {
            incoming[l.to].push((i, l.lambda));
        }
    }
    let mut settled = vec![false; n];
    let mut measures = vec![0.0; n];
    // settled virtual measures per agent, kept in descending order
    let mut offers: Vec<Vec<f64>> = vec![Vec::new(); n];
    let mut tentative = vec![0.0; n];
    let mut heap = BinaryHeap::new();
    for (i, t) in tentative.iter_mut().enumerate() {
        if net.target[i] || net.neighbors[i].is_empty() {
            *t = net.chi(i);
        }
        heap.push((OrderedFloat(*t), std::cmp::Reverse(i)));
    }
    while let Some((OrderedFloat(value), std::cmp::Reverse(j))) = heap.pop() {
        if settled[j] || value != tentative[j] {
            continue;
        }
        settled[j] = true;
        measures[j] = value;
        for &(i, lambda) in &incoming[j] {
            if settled[i] || net.target[i] {
                continue;
            }
            let v = virt(lambda, value);
            let pos = offers[i].partition_point(|&x| x >= v);
            offers[i].insert(pos, v);
            let m = net.neighbors[i].len() as f64;
            let mut best = net.chi(i);
            let mut sum = 0.0;
            for (k, &o) in offers[i].iter().enumerate() {
                sum += o;
                let enabled = (k + 1) as f64;
                let nu = ((1.0 - theta) * sum + theta * m * net.chi(i))
                    / (enabled + theta * (m - enabled));
                best = f64::max(best, nu);
            }
            if best > tentative[i] {
                tentative[i] = best;
                heap.push((OrderedFloat(best), std::cmp::Reverse(i)));
            }
        }
    }
    let enabled = net
        .neighbors
        .iter()
        .enumerate()
        .map(|(i, links)| {
            links
                .iter()
                .map(|l| {
                    !net.target[i] && !should_disable(measures[i], virt(l.lambda, measures[l.to]))
                })
                .collect()
        })
        .collect();
    Ok(ExactOptimum { measures, enabled })
}

/// Probability of eventually reaching a target from each agent when links
/// flagged in `enabled` are taken uniformly and the rest are self-loops.
///
/// Enabled links of an agent with positive measure lead to strictly larger
/// measure, so agents are resolved in decreasing order of measure; agents
/// with zero measure cannot reach a target.
pub fn agent_stationary_performance(
    net: &FrozenNetwork,
    enabled: &[Vec<bool>],
    measures: &[f64],
) -> Vec<f64> {
    let n = net.n_agents();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| measures[b].total_cmp(&measures[a]).then(a.cmp(&b)));
    let mut rho = vec![0.0; n];
    for i in order {
        if net.target[i] {
            rho[i] = 1.0;
            continue;
        }
        if measures[i] <= 0.0 {
            continue;
        }
        let (mut sum, mut k) = (0.0, 0usize);
        for (l, &e) in net.neighbors[i].iter().zip(&enabled[i]) {
            if e {
                sum += (1.0 - l.lambda) * rho[l.to];
                k += 1;
            }
        }
        if k > 0 {
            rho[i] = sum / k as f64;
        }
    }
    rho
}

/// `C N m^2 / (epsilon (1 - gamma_star))` with `C` = [`COMPLEXITY_CONSTANT`].
pub fn sync_iteration_bound(n: usize, m: usize, epsilon: f64, gamma_star: f64) -> f64 {
    COMPLEXITY_CONSTANT * n as f64 * (m * m) as f64 / (epsilon * (1.0 - gamma_star))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicyCheck {
    /// The graph of enabled links with strictly increasing measure has no cycle.
    pub acyclic: bool,
    /// Agents with positive measure that cannot reach a target along that graph.
    pub unreachable: Vec<usize>,
    /// Largest hop count to a target over agents that reach one.
    pub max_hops: usize,
}

/// Structural checks of a converged forwarding policy.
pub fn check_policy(
    net: &FrozenNetwork,
    agents: &[AgentLocalState],
    measures: &[f64],
) -> PolicyCheck {
    let n = net.n_agents();
    let adj: Vec<Vec<usize>> = agents
        .iter()
        .map(|a| {
            a.neighbors
                .iter()
                .filter(|r| r.forwarding() && measures[r.id] > measures[a.agent_id])
                .map(|r| r.id)
                .collect()
        })
        .collect();

    let mut indegree = vec![0usize; n];
    for js in &adj {
        for &j in js {
            indegree[j] += 1;
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

    // hop distance to a target over reversed edges
    let mut rev = vec![Vec::new(); n];
    for (i, js) in adj.iter().enumerate() {
        for &j in js {
            rev[j].push(i);
        }
    }
    let mut hops = vec![usize::MAX; n];
    let mut queue: VecDeque<usize> = (0..n).filter(|&i| net.target[i]).collect();
    for &t in &queue {
        hops[t] = 0;
    }
    while let Some(j) = queue.pop_front() {
        for &i in &rev[j] {
            if hops[i] == usize::MAX {
                hops[i] = hops[j] + 1;
                queue.push_back(i);
            }
        }
    }
    PolicyCheck {
        acyclic: removed == n,
        unreachable: (0..n)
            .filter(|&i| measures[i] > 0.0 && hops[i] == usize::MAX)
            .collect(),
        max_hops: hops
            .iter()
            .copied()
            .filter(|&h| h != usize::MAX)
            .max()
            .unwrap_or(0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pfsa::{compute_measure, controlled_matrix};
    use crate::supervisor::optimal_supervisor;
    use crate::swarm_graph::Link;

    fn net(neighbors: Vec<Vec<(usize, f64)>>, targets: &[usize]) -> FrozenNetwork {
        let n = neighbors.len();
        FrozenNetwork {
            neighbors: neighbors
                .into_iter()
                .map(|ls| {
                    ls.into_iter()
                        .map(|(to, lambda)| Link { to, lambda })
                        .collect()
                })
                .collect(),
            target: (0..n).map(|i| targets.contains(&i)).collect(),
            chi_dump: 0.0,
        }
    }

    /// A - B - T with failure probability 0.1 on every link.
    fn chain() -> FrozenNetwork {
        net(
            vec![vec![(1, 0.1)], vec![(0, 0.1), (2, 0.1)], vec![(1, 0.1)]],
            &[2],
        )
    }

    #[test]
    fn target_first_update_is_theta() {
        let n = chain();
        let mut s = AgentLocalState::new(&n, 2, 0.0);
        let out = s.update(&[0.0, 0.0, 0.0], 0.0, 0.01).unwrap();
        assert_eq!(out.current, 0.01);
    }

    #[test]
    fn zero_neighbors_stay_zero() {
        let n = chain();
        let s = AgentLocalState::new(&n, 1, 0.0);
        let next = agent_update(&s, &[0.0, 0.0, 0.0], 0.0, 0.01).unwrap();
        assert_eq!(next.self_measure, 0.0);
    }

    #[test]
    fn single_neighbor_fixpoint() {
        // agent 0 sees only the target over a perfect link
        let n = net(vec![vec![(1, 0.0)], vec![(0, 0.0)]], &[1]);
        let theta = 0.05;
        let mut s = AgentLocalState::new(&n, 0, 0.0);
        for _ in 0..2000 {
            s.update(&[s.self_measure, 1.0], 0.0, theta).unwrap();
        }
        assert!((s.self_measure - (1.0 - theta) * (1.0 - theta)).abs() < 1e-12);
    }

    #[test]
    fn forwarding_order() {
        let n = net(
            vec![vec![(1, 0.0), (2, 0.0), (3, 0.0)], vec![], vec![], vec![]],
            &[3],
        );
        let mut s = AgentLocalState::new(&n, 0, 0.5);
        s.update(&[0.5, 0.1, 0.9, 0.9], 0.0, 0.01).unwrap();
        assert_eq!(forwarding_table(&s), vec![2, 3]);
        let mut low = AgentLocalState::new(&n, 0, 0.5);
        low.update(&[0.5, 0.1, 0.1, 0.1], 0.0, 0.01).unwrap();
        assert!(forwarding_table(&low).is_empty());
    }

    #[test]
    fn isolated_target_converges() {
        let n = net(vec![vec![]], &[0]);
        let npfsa = NetworkPfsa::from_frozen(&n).unwrap();
        let theta = 0.1;
        let tol = 1e-10;
        let r = run_to_convergence(&npfsa, theta, Schedule::synchronized(), tol, None).unwrap();
        assert!((r.agent_measures[0] - 1.0).abs() < 10.0 * tol);
        let expected = ((theta * tol).ln() / (1.0 - theta).ln()).ceil() as usize;
        assert!(r.epochs <= expected + 2, "{} epochs", r.epochs);
    }

    #[test]
    fn chain_matches_centralized() {
        let npfsa = NetworkPfsa::from_frozen(&chain()).unwrap();
        let theta = 0.01;
        let tol = 1e-12;
        for schedule in [Schedule::synchronized(), Schedule::asynchronous(9)] {
            let r = run_to_convergence(&npfsa, theta, schedule, tol, None).unwrap();
            let closed = compute_measure(
                &controlled_matrix(&npfsa.pfsa, &r.policy).unwrap(),
                npfsa.pfsa.characteristic(),
                theta,
            )
            .unwrap();
            assert!(r.measure.max_abs_diff(&closed) < 10.0 * tol);
            let opt = optimal_supervisor(&npfsa.pfsa, theta).unwrap();
            assert_eq!(r.policy, opt.policy);
            assert_eq!(r.counters.total_violations(), 0);
            // B stops moving toward A, A keeps moving toward B
            assert!(r.policy.contains(1, npfsa.link_symbol[&(1, 0)]));
            assert!(!r.policy.contains(0, npfsa.link_symbol[&(0, 1)]));
            let check = check_policy(&npfsa.network, &r.agents, &r.agent_measures);
            assert!(check.acyclic && check.unreachable.is_empty());
            assert_eq!(check.max_hops, 2);
        }
    }

    #[test]
    fn sync_epoch_is_strategy_independent() {
        let n = chain();
        let mut a = DistributedSolver::new(&n, 0.02, Schedule::synchronized(), None)
            .unwrap()
            .with_exec(Exec::Sequential);
        let mut b = DistributedSolver::new(&n, 0.02, Schedule::synchronized(), None)
            .unwrap()
            .with_exec(Exec::Parallel);
        for _ in 0..300 {
            assert_eq!(a.epoch().unwrap(), b.epoch().unwrap());
        }
        assert_eq!(a.measures(), b.measures());
    }

    #[test]
    fn exact_optimum_matches_supervisor() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for trial in 0..20 {
            let n = 4 + trial % 5;
            let mut nb: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
            for i in 0..n {
                for j in i + 1..n {
                    if j == i + 1 || rng.gen_bool(0.3) {
                        let lambda = rng.gen_range(0.0..0.5);
                        nb[i].push((j, lambda));
                        nb[j].push((i, lambda));
                    }
                }
            }
            for l in &mut nb {
                l.sort_by_key(|x| x.0);
            }
            let mut fnet = net(nb, &[n - 1]);
            fnet.chi_dump = if trial % 2 == 0 { 0.0 } else { -1.0 };
            let npfsa = NetworkPfsa::from_frozen(&fnet).unwrap();
            let theta = 0.01;
            let opt = optimal_supervisor(&npfsa.pfsa, theta).unwrap();
            let ex = exact_optimum(&fnet, theta).unwrap();
            for i in 0..n {
                assert!(
                    (ex.measures[i] - opt.measure.get(i)).abs() < 1e-12,
                    "trial {trial} agent {i}"
                );
            }
            let rho = crate::pfsa::stationary_performance(
                &controlled_matrix(&npfsa.pfsa, &opt.policy).unwrap(),
                &npfsa.target_states(),
            )
            .unwrap();
            let local = agent_stationary_performance(&fnet, &ex.enabled, &ex.measures);
            for i in 0..n {
                assert!((local[i] - rho[i]).abs() < 1e-9, "trial {trial} agent {i}");
            }
        }
    }

    #[test]
    fn bound_scaling() {
        let b = sync_iteration_bound(100, 6, 0.05, 0.01);
        assert!((sync_iteration_bound(200, 6, 0.05, 0.01) / b - 2.0).abs() < 1e-12);
        assert!((sync_iteration_bound(100, 6, 0.025, 0.01) / b - 2.0).abs() < 1e-12);
    }
}
