//! Mobile swarms: agents chase their best neighbor while measures are updated.
//!
//! Two processes are simulated. In the real process measures advance by a
//! fixed number of distributed epochs per movement tick; in the ideal
//! process they are brought to the fixed point for the current positions
//! before every move.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::distributed::{exact_optimum, DistributedSolver, InvariantCounters, Schedule};
use crate::error::{Error, Result};
use crate::par::Exec;
use crate::swarm_graph::{
    neighbor_lists, FailureModel, FrozenNetwork, Link, Point, Rect, SwarmSnapshot,
};

/// C2 separation slack and bisection resolution, in meters.
pub const SEPARATION_TOL: f64 = 1e-6;

/// Fraction reached that counts as convergence.
pub const CONVERGED_FRACTION: f64 = 0.999;

/// Capture radius as a multiple of the communication radius.
pub const CAPTURE_FACTOR: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Process {
    Real,
    Ideal,
}

/// How the ideal process reaches the fixed point each tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IdealSolver {
    /// Settle agents in decreasing measure order.
    Exact,
    /// Run distributed epochs from the previous tick's measures until converged.
    Distributed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MobilityConfig {
    pub r_c: f64,
    pub v_s: f64,
    pub dt: f64,
    pub duration: f64,
    pub theta: f64,
    pub chi_dump: f64,
    pub failure: FailureModel,
    pub arena: Rect,
    /// Regions whose interior counts as reaching a target.
    pub extended_targets: Vec<Rect>,
    pub epochs_per_tick: usize,
    pub schedule: Schedule,
    pub ideal_solver: IdealSolver,
    pub ideal_tol: f64,
    /// Keep per-agent rows every this many ticks (0 disables them).
    pub trace_stride: usize,
    /// Stop once every counted agent has reached a target.
    pub stop_when_converged: bool,
    pub seed: u64,
    pub exec: Exec,
}

impl MobilityConfig {
    pub fn capture_radius(&self) -> f64 {
        CAPTURE_FACTOR * self.r_c
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |key: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(key, format!("{v} must be positive")))
            }
        };
        pos("r_c", self.r_c)?;
        pos("dt", self.dt)?;
        pos("duration", self.duration)?;
        if !(self.v_s >= 0.0 && self.v_s.is_finite()) {
            return Err(Error::config("v_s", "must be non-negative"));
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(Error::config("theta", "must lie in (0, 1)"));
        }
        if self.epochs_per_tick == 0 {
            return Err(Error::config("epochs_per_tick", "must be at least 1"));
        }
        pos("ideal_tol", self.ideal_tol)?;
        self.failure.validate()
    }
}

/// Initial placement and roles of the swarm.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialSwarm {
    pub positions: Vec<Point>,
    /// Static target agents.
    pub target: Vec<bool>,
    /// Agents that wander randomly and are never counted as reaching.
    pub sharer: Vec<bool>,
}

impl InitialSwarm {
    pub fn n_agents(&self) -> usize {
        self.positions.len()
    }

    /// Agents that count toward the fraction reached.
    pub fn counted(&self, i: usize) -> bool {
        !self.target[i] && !self.sharer[i]
    }
}

#[derive(Debug, Clone)]
pub struct MobileSwarmState {
    pub positions: Vec<Point>,
    pub target: Vec<bool>,
    pub sharer: Vec<bool>,
    pub reached: Vec<bool>,
    pub time: f64,
    pub tick: usize,
    pub measures: Vec<f64>,
    pub best: Vec<Option<usize>>,
    pub network: FrozenNetwork,
}

impl MobileSwarmState {
    pub fn counted(&self, i: usize) -> bool {
        !self.target[i] && !self.sharer[i]
    }

    pub fn fraction_reached(&self) -> f64 {
        let (mut total, mut hit) = (0usize, 0usize);
        for i in 0..self.positions.len() {
            if self.counted(i) {
                total += 1;
                hit += usize::from(self.reached[i]);
            }
        }
        if total == 0 {
            1.0
        } else {
            hit as f64 / total as f64
        }
    }
}

/// Neighbor of strictly larger measure over a usable link with the largest
/// measure; ties are broken uniformly at random.
pub fn best_neighbor(
    links: &[Link],
    own: f64,
    measures: &[f64],
    rng: &mut impl Rng,
) -> Option<usize> {
    let mut best = own;
    let mut ties: Vec<usize> = Vec::new();
    for l in links.iter().filter(|l| l.lambda < 1.0) {
        let m = measures[l.to];
        if m > best {
            best = m;
            ties.clear();
            ties.push(l.to);
        } else if m == best && !ties.is_empty() {
            ties.push(l.to);
        }
    }
    match ties.len() {
        0 => None,
        1 => Some(ties[0]),
        k => Some(ties[rng.gen_range(0..k)]),
    }
}

/// Largest fraction of `disp` that keeps the move out of every obstacle.
fn obstacle_limited(p: Point, disp: Point, obstacles: &[Rect]) -> Point {
    let len = disp.x.hypot(disp.y);
    if len == 0.0 {
        return disp;
    }
    let to = Point::new(p.x + disp.x, p.y + disp.y);
    let frac = obstacles
        .iter()
        .map(|o| o.free_fraction(p, to))
        .fold(1.0, f64::min);
    if frac >= 1.0 {
        return disp;
    }
    let t = ((frac * len - 1e-9).max(0.0)) / len;
    let moved = Point::new(disp.x * t, disp.y * t);
    let q = Point::new(p.x + moved.x, p.y + moved.y);
    if obstacles.iter().any(|o| o.contains_strictly(q)) {
        Point::new(0.0, 0.0)
    } else {
        moved
    }
}

/// Counts of per-tick checks that failed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SimCounters {
    pub separation_checks: u64,
    pub separation_violations: u64,
    pub obstacle_violations: u64,
    pub positivity_losses: u64,
    pub measure: InvariantCounters,
}

impl SimCounters {
    pub fn total_violations(&self) -> u64 {
        self.separation_violations + self.obstacle_violations + self.measure.total_violations()
    }
}

/// Moves every agent for one tick.
///
/// Agents with a best neighbor advance toward its current position by at
/// most `v_s dt`; sharers take a random step. Moves are then fixed in
/// increasing order of measure so that each leader can shorten its own step
/// until every follower, already placed, stays within `r_c` with a line of
/// sight that no obstacle blocks.
pub fn step_positions(
    state: &mut MobileSwarmState,
    cfg: &MobilityConfig,
    rng: &mut impl Rng,
) -> SimCounters {
    let n = state.positions.len();
    let step = cfg.v_s * cfg.dt;
    let obstacles = &cfg.failure.obstacles;
    let old = state.positions.clone();
    let mut disp = vec![Point::new(0.0, 0.0); n];
    for i in 0..n {
        if state.target[i] || state.reached[i] {
            continue;
        }
        let raw = if state.sharer[i] {
            let a = rng.gen_range(0.0..std::f64::consts::TAU);
            let mut q = Point::new(old[i].x + step * a.cos(), old[i].y + step * a.sin());
            q.x = q.x.clamp(cfg.arena.min.x, cfg.arena.max.x);
            q.y = q.y.clamp(cfg.arena.min.y, cfg.arena.max.y);
            Point::new(q.x - old[i].x, q.y - old[i].y)
        } else if let Some(b) = state.best[i] {
            let d = old[i].dist(old[b]);
            if d == 0.0 {
                Point::new(0.0, 0.0)
            } else {
                let s = step.min(d) / d;
                Point::new((old[b].x - old[i].x) * s, (old[b].y - old[i].y) * s)
            }
        } else {
            Point::new(0.0, 0.0)
        };
        disp[i] = obstacle_limited(old[i], raw, obstacles);
    }

    let mut followers: Vec<Vec<usize>> = vec![Vec::new(); n];
    for j in 0..n {
        if let Some(b) = state.best[j] {
            if !state.reached[j] && !state.target[j] && !state.sharer[j] {
                followers[b].push(j);
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        state.measures[a]
            .total_cmp(&state.measures[b])
            .then(a.cmp(&b))
    });
    let limit = cfg.r_c + SEPARATION_TOL;
    // aim strictly inside r_c so that followers remain neighbors
    let aim = cfg.r_c * (1.0 - 1e-12);
    let mut new = old.clone();
    for &i in &order {
        let d = disp[i];
        let len = d.x.hypot(d.y);
        if len == 0.0 {
            continue;
        }
        let at = |f: f64| Point::new(old[i].x + f * d.x, old[i].y + f * d.y);
        let ok = |f: f64| {
            let p = at(f);
            followers[i].iter().all(|&j| {
                new[j].dist(p) <= aim && !obstacles.iter().any(|o| o.segment_crosses(new[j], p))
            })
        };
        let f = if ok(1.0) {
            1.0
        } else {
            let (mut lo, mut hi) = (0.0, 1.0);
            while (hi - lo) * len > SEPARATION_TOL {
                let mid = 0.5 * (lo + hi);
                if ok(mid) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            lo
        };
        new[i] = at(f);
    }

    let mut counters = SimCounters::default();
    for j in 0..n {
        if let Some(b) = state.best[j] {
            if followers[b].contains(&j) {
                counters.separation_checks += 1;
                if new[j].dist(new[b]) > limit {
                    counters.separation_violations += 1;
                }
            }
        }
        if obstacles.iter().any(|o| o.contains_strictly(new[j])) {
            counters.obstacle_violations += 1;
        }
    }
    state.positions = new;

    let capture = cfg.capture_radius();
    let targets: Vec<usize> = (0..n).filter(|&t| state.target[t]).collect();
    for i in 0..n {
        if !state.counted(i) || state.reached[i] {
            continue;
        }
        let p = state.positions[i];
        if let Some(&t) = targets
            .iter()
            .find(|&&t| state.positions[t].dist(p) <= capture)
        {
            state.reached[i] = true;
            state.positions[i] = state.positions[t];
        } else if cfg.extended_targets.iter().any(|r| r.contains(p)) {
            state.reached[i] = true;
        }
    }
    state.time += cfg.dt;
    state.tick += 1;
    counters
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceMetrics {
    /// Fewest hops to a target along non-decreasing measure; `None` when unreachable.
    pub hop_counts: Vec<Option<usize>>,
    /// Physical length of one such fewest-hop path.
    pub path_lengths: Vec<Option<f64>>,
    pub diameter: f64,
    pub fraction_reached: f64,
}

impl ConvergenceMetrics {
    pub fn max_hops(&self) -> usize {
        self.hop_counts.iter().flatten().copied().max().unwrap_or(0)
    }

    pub fn max_path_length(&self) -> f64 {
        self.path_lengths
            .iter()
            .flatten()
            .copied()
            .fold(0.0, f64::max)
    }
}

/// Distance from `p` to the closest target agent or target region.
fn target_distance(p: Point, target_points: &[Point], regions: &[Rect]) -> f64 {
    let rect_dist = |r: &Rect| {
        let dx = (r.min.x - p.x).max(0.0).max(p.x - r.max.x);
        let dy = (r.min.y - p.y).max(0.0).max(p.y - r.max.y);
        dx.hypot(dy)
    };
    target_points
        .iter()
        .map(|&t| t.dist(p))
        .chain(regions.iter().map(rect_dist))
        .fold(f64::INFINITY, f64::min)
}

pub fn compute_metrics(state: &MobileSwarmState, extended_targets: &[Rect]) -> ConvergenceMetrics {
    let n = state.positions.len();
    let nu = &state.measures;
    // reversed edges j <- i for links i -> j with nu_j >= nu_i and nu_i > 0
    let mut rev: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, links) in state.network.neighbors.iter().enumerate() {
        if nu[i] > 0.0 {
            for l in links {
                if nu[l.to] >= nu[i] {
                    rev[l.to].push(i);
                }
            }
        }
    }
    let mut hops: Vec<Option<usize>> = vec![None; n];
    let mut lengths: Vec<Option<f64>> = vec![None; n];
    let mut queue = VecDeque::new();
    for i in 0..n {
        if state.target[i] || state.reached[i] {
            hops[i] = Some(0);
            lengths[i] = Some(0.0);
            queue.push_back(i);
        }
    }
    while let Some(j) = queue.pop_front() {
        let h = hops[j].expect("queued agents have hop counts");
        for &i in &rev[j] {
            let via = lengths[j].unwrap_or(0.0) + state.positions[i].dist(state.positions[j]);
            match hops[i] {
                None => {
                    hops[i] = Some(h + 1);
                    lengths[i] = Some(via);
                    queue.push_back(i);
                }
                Some(hi) if hi == h + 1 && via < lengths[i].unwrap_or(f64::INFINITY) => {
                    lengths[i] = Some(via);
                }
                _ => {}
            }
        }
    }
    for i in 0..n {
        if state.sharer[i] || state.target[i] {
            hops[i] = None;
            lengths[i] = None;
        }
    }
    let target_points: Vec<Point> = (0..n)
        .filter(|&t| state.target[t])
        .map(|t| state.positions[t])
        .collect();
    let diameter = 2.0
        * (0..n)
            .filter(|&i| state.counted(i))
            .map(|i| target_distance(state.positions[i], &target_points, extended_targets))
            .fold(0.0, f64::max);
    ConvergenceMetrics {
        hop_counts: hops,
        path_lengths: lengths,
        diameter,
        fraction_reached: state.fraction_reached(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TickRecord {
    pub t: f64,
    pub fraction_reached: f64,
    pub diameter: f64,
    pub max_path_length: f64,
    pub max_hops: usize,
    pub decision_corrections: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentRow {
    pub t: f64,
    pub agent_id: usize,
    pub x: f64,
    pub y: f64,
    pub measure: f64,
    pub best_neighbor: Option<usize>,
    pub reached: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub process: Process,
    pub dt: f64,
    pub theta: f64,
    pub ticks: Vec<TickRecord>,
    pub rows: Vec<AgentRow>,
    /// Unit direction toward the chosen neighbor per tick and counted agent.
    pub directions: Vec<Vec<Option<(f64, f64)>>>,
    pub counted: Vec<bool>,
    pub counters: SimCounters,
    pub final_positions: Vec<Point>,
}

impl SimTrace {
    /// First time the fraction reached meets [`CONVERGED_FRACTION`].
    pub fn t_conv(&self) -> Option<f64> {
        self.ticks
            .iter()
            .find(|r| r.fraction_reached >= CONVERGED_FRACTION)
            .map(|r| r.t)
    }

    pub fn final_fraction(&self) -> f64 {
        self.ticks.last().map_or(0.0, |r| r.fraction_reached)
    }

    pub fn total_corrections(&self) -> usize {
        self.ticks.iter().map(|r| r.decision_corrections).sum()
    }

    /// Largest `D_t / (2 D_0 exp(-(v_s / r_c) t))` over the trace.
    pub fn diameter_envelope_ratio(&self, v_s: f64, r_c: f64) -> f64 {
        let d0 = self.ticks.first().map_or(0.0, |r| r.diameter);
        if d0 == 0.0 {
            return 0.0;
        }
        self.ticks
            .iter()
            .map(|r| r.diameter / (2.0 * d0 * (-(v_s / r_c) * r.t).exp()))
            .fold(0.0, f64::max)
    }

    /// Largest `max h~_t / (max h~_0 exp(-(v_s / r_c) t))` over the trace.
    pub fn path_envelope_ratio(&self, v_s: f64, r_c: f64) -> f64 {
        let h0 = self.ticks.first().map_or(0.0, |r| r.max_path_length);
        if h0 == 0.0 {
            return 0.0;
        }
        self.ticks
            .iter()
            .map(|r| r.max_path_length / (h0 * (-(v_s / r_c) * r.t).exp()))
            .fold(0.0, f64::max)
    }
}

/// Per-tick fraction of counted agents whose chosen directions differ by
/// more than `1e-6` rad between two paired traces, over their common ticks.
pub fn deviation_fraction(real: &SimTrace, ideal: &SimTrace) -> Result<Vec<f64>> {
    if real.counted != ideal.counted || real.dt != ideal.dt {
        return Err(Error::InvalidArgument("traces are not paired".into()));
    }
    let total = real.counted.iter().filter(|&&c| c).count().max(1) as f64;
    let differ = |a: Option<(f64, f64)>, b: Option<(f64, f64)>| match (a, b) {
        (None, None) => false,
        (Some(u), Some(v)) => {
            let cross = u.0 * v.1 - u.1 * v.0;
            let dot = u.0 * v.0 + u.1 * v.1;
            cross.atan2(dot).abs() > 1e-6
        }
        _ => true,
    };
    Ok(real
        .directions
        .iter()
        .zip(&ideal.directions)
        .map(|(r, i)| {
            let n = r
                .iter()
                .zip(i)
                .zip(&real.counted)
                .filter(|((a, b), &c)| c && differ(**a, **b))
                .count();
            n as f64 / total
        })
        .collect())
}

enum Updater {
    Real(DistributedSolver),
    IdealExact { enabled: Vec<Vec<(usize, bool)>> },
    IdealDistributed(DistributedSolver),
}

struct Simulator<'a> {
    cfg: &'a MobilityConfig,
    state: MobileSwarmState,
    updater: Updater,
    choice_rng: ChaCha8Rng,
    walk_rng: ChaCha8Rng,
    counters: SimCounters,
}

impl<'a> Simulator<'a> {
    fn new(cfg: &'a MobilityConfig, init: &InitialSwarm, process: Process) -> Result<Self> {
        cfg.validate()?;
        let n = init.n_agents();
        if init.target.len() != n || init.sharer.len() != n {
            return Err(Error::InvalidArgument(
                "role vectors differ in length from positions".into(),
            ));
        }
        if !init.target.iter().any(|&t| t) {
            return Err(Error::InvalidArgument("no target agents".into()));
        }
        let mut state = MobileSwarmState {
            positions: init.positions.clone(),
            target: init.target.clone(),
            sharer: init.sharer.clone(),
            reached: vec![false; n],
            time: 0.0,
            tick: 0,
            measures: vec![0.0; n],
            best: vec![None; n],
            network: FrozenNetwork {
                neighbors: vec![Vec::new(); n],
                target: init.target.clone(),
                chi_dump: cfg.chi_dump,
            },
        };
        state.network = build_network(&state, cfg)?;
        let updater = match (process, cfg.ideal_solver) {
            (Process::Real, _) => {
                let mut s = DistributedSolver::new(&state.network, cfg.theta, cfg.schedule, None)?
                    .with_exec(cfg.exec);
                s.set_monotone_check(false);
                Updater::Real(s)
            }
            (Process::Ideal, IdealSolver::Exact) => Updater::IdealExact {
                enabled: vec![Vec::new(); n],
            },
            (Process::Ideal, IdealSolver::Distributed) => {
                let chi: Vec<f64> = (0..n).map(|i| state.network.chi(i)).collect();
                let mut s =
                    DistributedSolver::new(&state.network, cfg.theta, cfg.schedule, Some(&chi))?
                        .with_exec(cfg.exec);
                s.set_monotone_check(false);
                Updater::IdealDistributed(s)
            }
        };
        Ok(Simulator {
            cfg,
            state,
            updater,
            choice_rng: ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_c401),
            walk_rng: ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_3a1c),
            counters: SimCounters::default(),
        })
    }

    /// Refreshes measures for the current positions; returns decision corrections.
    fn update_measures(&mut self) -> Result<usize> {
        let cfg = self.cfg;
        let net = &self.state.network;
        let before = self.state.measures.clone();
        let corrections = match &mut self.updater {
            Updater::Real(s) => {
                s.rewire(net);
                let c0 = s.total_corrections();
                for _ in 0..cfg.epochs_per_tick {
                    s.epoch()?;
                }
                self.state.measures.copy_from_slice(s.measures());
                s.total_corrections() - c0
            }
            Updater::IdealDistributed(s) => {
                s.rewire(net);
                let c0 = s.total_corrections();
                s.run(
                    cfg.ideal_tol,
                    crate::distributed::default_epoch_cap(cfg.theta, cfg.ideal_tol),
                    None,
                )?;
                self.state.measures.copy_from_slice(s.measures());
                s.total_corrections() - c0
            }
            Updater::IdealExact { enabled } => {
                let opt = exact_optimum(net, cfg.theta)?;
                let mut flips = 0;
                for (i, links) in net.neighbors.iter().enumerate() {
                    let now: Vec<(usize, bool)> = links
                        .iter()
                        .map(|l| l.to)
                        .zip(opt.enabled[i].iter().copied())
                        .collect();
                    for &(j, e) in &now {
                        match enabled[i].iter().find(|x| x.0 == j) {
                            Some(&(_, prev)) if prev != e => flips += 1,
                            None if !e => flips += 1,
                            _ => {}
                        }
                    }
                    enabled[i] = now;
                }
                let lo = cfg.chi_dump.min(0.0) - crate::distributed::INVARIANT_SLACK;
                for &v in &opt.measures {
                    self.counters.measure.checked += 1;
                    if !(v >= lo && v <= 1.0 + crate::distributed::INVARIANT_SLACK) {
                        self.counters.measure.bound_violations += 1;
                    }
                }
                self.state.measures = opt.measures;
                flips
            }
        };
        if !matches!(self.updater, Updater::Real(_)) && self.state.tick > 0 {
            for (i, &prev) in before.iter().enumerate() {
                if self.state.counted(i)
                    && !self.state.reached[i]
                    && prev > 0.0
                    && self.state.measures[i] <= 0.0
                {
                    self.counters.positivity_losses += 1;
                }
            }
        }
        Ok(corrections)
    }

    fn choose(&mut self) {
        let st = &mut self.state;
        for i in 0..st.positions.len() {
            st.best[i] = if st.target[i] || st.sharer[i] || st.reached[i] {
                None
            } else {
                best_neighbor(
                    &st.network.neighbors[i],
                    st.measures[i],
                    &st.measures,
                    &mut self.choice_rng,
                )
            };
        }
    }

    fn directions(&self) -> Vec<Option<(f64, f64)>> {
        let st = &self.state;
        (0..st.positions.len())
            .map(|i| {
                let b = st.best[i]?;
                let (p, q) = (st.positions[i], st.positions[b]);
                let d = p.dist(q);
                (d > 0.0).then(|| ((q.x - p.x) / d, (q.y - p.y) / d))
            })
            .collect()
    }

    fn run(mut self, process: Process) -> Result<SimTrace> {
        let cfg = self.cfg;
        let n = self.state.positions.len();
        let total_ticks = (cfg.duration / cfg.dt).round() as usize;
        let mut trace = SimTrace {
            process,
            dt: cfg.dt,
            theta: cfg.theta,
            ticks: Vec::with_capacity(total_ticks + 1),
            rows: Vec::new(),
            directions: Vec::with_capacity(total_ticks + 1),
            counted: (0..n).map(|i| self.state.counted(i)).collect(),
            counters: SimCounters::default(),
            final_positions: Vec::new(),
        };
        loop {
            let corrections = self.update_measures()?;
            self.choose();
            let metrics = compute_metrics(&self.state, &cfg.extended_targets);
            let t = self.state.tick as f64 * cfg.dt;
            trace.ticks.push(TickRecord {
                t,
                fraction_reached: metrics.fraction_reached,
                diameter: metrics.diameter,
                max_path_length: metrics.max_path_length(),
                max_hops: metrics.max_hops(),
                decision_corrections: corrections,
            });
            trace.directions.push(self.directions());
            if cfg.trace_stride > 0 && self.state.tick.is_multiple_of(cfg.trace_stride) {
                let st = &self.state;
                trace.rows.extend((0..n).map(|i| AgentRow {
                    t,
                    agent_id: i,
                    x: st.positions[i].x,
                    y: st.positions[i].y,
                    measure: st.measures[i],
                    best_neighbor: st.best[i],
                    reached: st.reached[i],
                }));
            }
            let done = cfg.stop_when_converged && metrics.fraction_reached >= 1.0;
            if self.state.tick >= total_ticks || done {
                break;
            }
            let c = step_positions(&mut self.state, cfg, &mut self.walk_rng);
            self.counters.separation_checks += c.separation_checks;
            self.counters.separation_violations += c.separation_violations;
            self.counters.obstacle_violations += c.obstacle_violations;
            self.state.network = build_network(&self.state, cfg)?;
        }
        let mut counters = self.counters;
        match &self.updater {
            Updater::Real(s) | Updater::IdealDistributed(s) => {
                counters.measure.merge(&s.counters())
            }
            Updater::IdealExact { .. } => {}
        }
        trace.counters = counters;
        trace.final_positions = self.state.positions;
        Ok(trace)
    }
}

/// Network over all agents; reached agents stay in it as fixed relays.
fn build_network(state: &MobileSwarmState, cfg: &MobilityConfig) -> Result<FrozenNetwork> {
    let nbrs = neighbor_lists(&state.positions, cfg.r_c);
    let snapshot = SwarmSnapshot {
        positions: state.positions.clone(),
        targets: (0..state.positions.len())
            .filter(|&i| state.target[i])
            .collect(),
        r_c: cfg.r_c,
    };
    snapshot.validate()?;
    Ok(FrozenNetwork::from_neighbors(
        &snapshot,
        &nbrs,
        &cfg.failure,
        cfg.chi_dump,
    ))
}

pub fn run_real_process(cfg: &MobilityConfig, init: &InitialSwarm) -> Result<SimTrace> {
    Simulator::new(cfg, init, Process::Real)?.run(Process::Real)
}

pub fn run_ideal_process(cfg: &MobilityConfig, init: &InitialSwarm) -> Result<SimTrace> {
    Simulator::new(cfg, init, Process::Ideal)?.run(Process::Ideal)
}

pub fn run_process(
    cfg: &MobilityConfig,
    init: &InitialSwarm,
    process: Process,
) -> Result<SimTrace> {
    Simulator::new(cfg, init, process)?.run(process)
}
