//! Frozen swarm networks and their PFSA encoding.
//!
//! A network of `N` agents with `L` directed links becomes a PFSA with
//! `N + L + 1` states laid out as: agents `0..N`, then one virtual state per
//! directed link in `(from, to)` lexicographic order, then the dump.
//! Symbols follow the same link order, then the dump symbol, then an idle
//! symbol used only when some agent has no neighbors.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pfsa::io::{PfsaDocument, StateRole};
use crate::pfsa::Pfsa;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn dist(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn lerp(self, other: Point, t: f64) -> Point {
        Point::new(
            self.x + (other.x - self.x) * t,
            self.y + (other.y - self.y) * t,
        )
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: Point,
    pub max: Point,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Rect {
            min: Point::new(x0.min(x1), y0.min(y1)),
            max: Point::new(x0.max(x1), y0.max(y1)),
        }
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn contains_strictly(&self, p: Point) -> bool {
        p.x > self.min.x && p.x < self.max.x && p.y > self.min.y && p.y < self.max.y
    }

    pub fn center(&self) -> Point {
        self.min.lerp(self.max, 0.5)
    }

    pub fn within(&self, outer: &Rect) -> bool {
        outer.contains(self.min) && outer.contains(self.max)
    }

    /// Parameter interval `[t0, t1]` of the segment `a + t (b - a)` lying in
    /// the closed rectangle, if any.
    pub fn clip(&self, a: Point, b: Point) -> Option<(f64, f64)> {
        let (dx, dy) = (b.x - a.x, b.y - a.y);
        let mut t0: f64 = 0.0;
        let mut t1: f64 = 1.0;
        for (p, q) in [
            (-dx, a.x - self.min.x),
            (dx, self.max.x - a.x),
            (-dy, a.y - self.min.y),
            (dy, self.max.y - a.y),
        ] {
            if p == 0.0 {
                if q < 0.0 {
                    return None;
                }
            } else {
                let r = q / p;
                if p < 0.0 {
                    t0 = t0.max(r);
                } else {
                    t1 = t1.min(r);
                }
            }
        }
        (t0 <= t1).then_some((t0, t1))
    }

    /// Whether the segment passes through the open interior.
    pub fn segment_crosses(&self, a: Point, b: Point) -> bool {
        match self.clip(a, b) {
            Some((t0, t1)) => self.contains_strictly(a.lerp(b, 0.5 * (t0 + t1))),
            None => false,
        }
    }

    /// Fraction of the segment that can be travelled before entering the
    /// open interior (1 when it never does).
    pub fn free_fraction(&self, a: Point, b: Point) -> f64 {
        if self.contains_strictly(a) {
            return 0.0;
        }
        match self.clip(a, b) {
            Some((t0, t1)) if self.contains_strictly(a.lerp(b, 0.5 * (t0 + t1))) => t0,
            _ => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwarmSnapshot {
    pub positions: Vec<Point>,
    pub targets: BTreeSet<usize>,
    pub r_c: f64,
}

impl SwarmSnapshot {
    pub fn new(
        positions: Vec<Point>,
        targets: impl IntoIterator<Item = usize>,
        r_c: f64,
    ) -> Result<Self> {
        let s = SwarmSnapshot {
            positions,
            targets: targets.into_iter().collect(),
            r_c,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r_c > 0.0 && self.r_c.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "r_c = {} must be positive",
                self.r_c
            )));
        }
        if let Some(i) = self.positions.iter().position(|p| !p.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "agent {i} has a non-finite position"
            )));
        }
        if self.targets.is_empty() {
            return Err(Error::InvalidArgument("no target agents".into()));
        }
        if let Some(&t) = self.targets.iter().find(|&&t| t >= self.positions.len()) {
            return Err(Error::InvalidArgument(format!(
                "target {t} is not an agent"
            )));
        }
        Ok(())
    }

    pub fn n_agents(&self) -> usize {
        self.positions.len()
    }
}

/// Neighbor sets by distance `<= r_c`, each sorted ascending.
pub fn neighbor_map(snapshot: &SwarmSnapshot) -> Vec<Vec<usize>> {
    neighbor_lists(&snapshot.positions, snapshot.r_c)
}

/// Neighbor sets of raw positions, using a uniform grid of cell size `r_c`.
pub fn neighbor_lists(positions: &[Point], r_c: f64) -> Vec<Vec<usize>> {
    let cell = |p: Point| ((p.x / r_c).floor() as i64, (p.y / r_c).floor() as i64);
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (i, &p) in positions.iter().enumerate() {
        grid.entry(cell(p)).or_default().push(i);
    }
    let mut out = vec![Vec::new(); positions.len()];
    for (i, &p) in positions.iter().enumerate() {
        let (cx, cy) = cell(p);
        for gx in cx - 1..=cx + 1 {
            for gy in cy - 1..=cy + 1 {
                if let Some(bucket) = grid.get(&(gx, gy)) {
                    out[i].extend(
                        bucket
                            .iter()
                            .copied()
                            .filter(|&j| j != i && p.dist(positions[j]) <= r_c),
                    );
                }
            }
        }
        out[i].sort_unstable();
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct FailureModel {
    pub lambda_at_zero: f64,
    pub lambda_at_rc: f64,
    pub spatial_noise_amplitude: f64,
    pub noise_seed: u64,
    pub obstacles: Vec<Rect>,
    /// Floor applied to the smallest link failure probability.
    pub gamma_floor: f64,
}

impl Default for FailureModel {
    fn default() -> Self {
        FailureModel {
            lambda_at_zero: 0.1,
            lambda_at_rc: 0.0,
            spatial_noise_amplitude: 0.0,
            noise_seed: 0,
            obstacles: Vec::new(),
            gamma_floor: 1e-3,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Pseudo-random lattice value in `[-1, 1]`.
fn lattice_value(ix: i64, iy: i64, seed: u64) -> f64 {
    let h = splitmix64(splitmix64(splitmix64(seed) ^ ix as u64) ^ iy as u64);
    (h >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
}

/// Smooth value noise in `[-1, 1]` with lattice spacing `cell`.
pub fn value_noise(p: Point, cell: f64, seed: u64) -> f64 {
    let (gx, gy) = (p.x / cell, p.y / cell);
    let (ix, iy) = (gx.floor(), gy.floor());
    let smooth = |t: f64| t * t * (3.0 - 2.0 * t);
    let (fx, fy) = (smooth(gx - ix), smooth(gy - iy));
    let (ix, iy) = (ix as i64, iy as i64);
    let v00 = lattice_value(ix, iy, seed);
    let v10 = lattice_value(ix + 1, iy, seed);
    let v01 = lattice_value(ix, iy + 1, seed);
    let v11 = lattice_value(ix + 1, iy + 1, seed);
    let lo = v00 + (v10 - v00) * fx;
    let hi = v01 + (v11 - v01) * fx;
    lo + (hi - lo) * fy
}

impl FailureModel {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::config(
                    format!("failure.{name}"),
                    format!("{v} outside [0, 1]"),
                ))
            }
        };
        unit("lambda_at_zero", self.lambda_at_zero)?;
        unit("lambda_at_rc", self.lambda_at_rc)?;
        if self.lambda_at_zero < self.lambda_at_rc {
            return Err(Error::config(
                "failure.lambda_at_rc",
                "failure probability must not increase with distance",
            ));
        }
        if !(0.0..1.0).contains(&self.spatial_noise_amplitude) {
            return Err(Error::config(
                "failure.spatial_noise_amplitude",
                "must lie in [0, 1)",
            ));
        }
        if !(self.gamma_floor > 0.0 && self.gamma_floor < 1.0) {
            return Err(Error::config("failure.gamma_floor", "must lie in (0, 1)"));
        }
        Ok(())
    }

    /// Failure probability of the link between two points at radius `r_c`.
    pub fn link_lambda(&self, a: Point, b: Point, r_c: f64) -> f64 {
        if self.obstacles.iter().any(|o| o.segment_crosses(a, b)) {
            return 1.0;
        }
        let t = a.dist(b) / r_c;
        let mut lambda = (1.0 - t) * self.lambda_at_zero + t * self.lambda_at_rc;
        if self.spatial_noise_amplitude > 0.0 {
            lambda +=
                self.spatial_noise_amplitude * value_noise(a.lerp(b, 0.5), r_c, self.noise_seed);
        }
        lambda.clamp(0.0, 1.0)
    }
}

/// Failure probability of the link `i -> j`, which must exist in the snapshot.
pub fn failure_prob(
    model: &FailureModel,
    snapshot: &SwarmSnapshot,
    i: usize,
    j: usize,
) -> Result<f64> {
    let (a, b) = match (snapshot.positions.get(i), snapshot.positions.get(j)) {
        (Some(&a), Some(&b)) => (a, b),
        _ => {
            return Err(Error::InvalidArgument(format!(
                "agents ({i}, {j}) out of range"
            )))
        }
    };
    if i == j || a.dist(b) > snapshot.r_c {
        return Err(Error::InvalidArgument(format!(
            "{j} is not a neighbor of {i}"
        )));
    }
    Ok(model.link_lambda(a, b, snapshot.r_c))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link {
    pub to: usize,
    pub lambda: f64,
}

/// The swarm as seen by the measure computation: per-agent links with
/// failure probabilities, target flags and the dump characteristic.
#[derive(Debug, Clone, PartialEq)]
pub struct FrozenNetwork {
    pub neighbors: Vec<Vec<Link>>,
    pub target: Vec<bool>,
    pub chi_dump: f64,
}

impl FrozenNetwork {
    pub fn from_snapshot(snapshot: &SwarmSnapshot, model: &FailureModel, chi_dump: f64) -> Self {
        let nbrs = neighbor_map(snapshot);
        Self::from_neighbors(snapshot, &nbrs, model, chi_dump)
    }

    pub fn from_neighbors(
        snapshot: &SwarmSnapshot,
        nbrs: &[Vec<usize>],
        model: &FailureModel,
        chi_dump: f64,
    ) -> Self {
        let p = &snapshot.positions;
        FrozenNetwork {
            neighbors: nbrs
                .iter()
                .enumerate()
                .map(|(i, js)| {
                    js.iter()
                        .map(|&j| Link {
                            to: j,
                            lambda: model.link_lambda(p[i], p[j], snapshot.r_c),
                        })
                        .collect()
                })
                .collect(),
            target: (0..p.len())
                .map(|i| snapshot.targets.contains(&i))
                .collect(),
            chi_dump,
        }
    }

    pub fn n_agents(&self) -> usize {
        self.neighbors.len()
    }

    pub fn n_links(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum()
    }

    pub fn max_degree(&self) -> usize {
        self.neighbors.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn chi(&self, i: usize) -> f64 {
        if self.target[i] {
            1.0
        } else {
            0.0
        }
    }

    /// Smallest link failure probability, floored at `floor`.
    pub fn gamma_star(&self, floor: f64) -> f64 {
        self.neighbors
            .iter()
            .flatten()
            .map(|l| l.lambda)
            .fold(f64::INFINITY, f64::min)
            .max(floor)
            .min(1.0 - f64::EPSILON)
    }

    /// Whether every agent is joined to some target through links.
    pub fn is_connected(&self) -> bool {
        let n = self.n_agents();
        let mut seen = self.target.clone();
        let mut stack: Vec<usize> = (0..n).filter(|&i| seen[i]).collect();
        while let Some(i) = stack.pop() {
            for l in &self.neighbors[i] {
                if !seen[l.to] {
                    seen[l.to] = true;
                    stack.push(l.to);
                }
            }
        }
        seen.iter().all(|&s| s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkPfsa {
    pub pfsa: Pfsa,
    /// State index of each agent.
    pub agent_index: Vec<usize>,
    /// State index of the virtual state of each directed link.
    pub virtual_index: BTreeMap<(usize, usize), usize>,
    /// Symbol labelling the move along each directed link.
    pub link_symbol: BTreeMap<(usize, usize), usize>,
    pub dump_index: usize,
    pub network: FrozenNetwork,
}

pub fn build_network_pfsa(
    snapshot: &SwarmSnapshot,
    neighbors: &[Vec<usize>],
    model: &FailureModel,
) -> Result<NetworkPfsa> {
    snapshot.validate()?;
    if neighbors.len() != snapshot.n_agents() {
        return Err(Error::InvalidArgument(
            "neighbor map size differs from agent count".into(),
        ));
    }
    for (i, js) in neighbors.iter().enumerate() {
        for &j in js {
            if j >= snapshot.n_agents()
                || j == i
                || snapshot.positions[i].dist(snapshot.positions[j]) > snapshot.r_c
            {
                return Err(Error::InvalidArgument(format!(
                    "{j} is not a neighbor of {i}"
                )));
            }
        }
    }
    NetworkPfsa::from_frozen(&FrozenNetwork::from_neighbors(
        snapshot, neighbors, model, 0.0,
    ))
}

impl NetworkPfsa {
    pub fn from_frozen(net: &FrozenNetwork) -> Result<Self> {
        let n = net.n_agents();
        let links: Vec<(usize, usize, f64)> = net
            .neighbors
            .iter()
            .enumerate()
            .flat_map(|(i, ls)| ls.iter().map(move |l| (i, l.to, l.lambda)))
            .collect();
        let n_links = links.len();
        let dump = n + n_links;
        let sym_dump = n_links;
        let needs_idle = net.neighbors.iter().any(Vec::is_empty);
        let n_symbols = n_links + 1 + usize::from(needs_idle);
        let sym_idle = n_links + 1;

        let mut pfsa = Pfsa::empty(dump + 1, n_symbols);
        let mut virtual_index = BTreeMap::new();
        let mut link_symbol = BTreeMap::new();
        for (k, &(i, j, lambda)) in links.iter().enumerate() {
            let v = n + k;
            virtual_index.insert((i, j), v);
            link_symbol.insert((i, j), k);
            pfsa.set_transition(v, k, j, 1.0 - lambda, false)?;
            pfsa.set_transition(v, sym_dump, dump, lambda, false)?;
        }
        for i in 0..n {
            let ls = &net.neighbors[i];
            if ls.is_empty() {
                pfsa.set_transition(i, sym_idle, i, 1.0, false)?;
            }
            let p = 1.0 / ls.len().max(1) as f64;
            for l in ls {
                let k = link_symbol[&(i, l.to)];
                if net.target[i] {
                    pfsa.set_transition(i, k, i, p, false)?;
                } else {
                    pfsa.set_transition(i, k, n + k, p, true)?;
                }
            }
            pfsa.set_characteristic(i, net.chi(i));
        }
        pfsa.set_transition(dump, sym_dump, dump, 1.0, false)?;
        pfsa.set_characteristic(dump, net.chi_dump);
        pfsa.validate()?;
        Ok(NetworkPfsa {
            pfsa,
            agent_index: (0..n).collect(),
            virtual_index,
            link_symbol,
            dump_index: dump,
            network: net.clone(),
        })
    }

    /// Rebuilds the network view of a PFSA document carrying role records.
    pub fn from_document(doc: &PfsaDocument) -> Result<Self> {
        let roles = doc
            .roles
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("document has no network role records".into()))?;
        let pfsa = &doc.pfsa;
        let agent_states: Vec<usize> = (0..roles.len())
            .filter(|&q| matches!(roles[q], StateRole::Agent { .. }))
            .collect();
        let agent_of: BTreeMap<usize, usize> = agent_states
            .iter()
            .enumerate()
            .map(|(a, &q)| (q, a))
            .collect();
        let dumps: Vec<usize> = (0..roles.len())
            .filter(|&q| roles[q] == StateRole::Dump)
            .collect();
        let [dump_index] = dumps[..] else {
            return Err(Error::MalformedPfsa(format!(
                "expected one dump state, found {}",
                dumps.len()
            )));
        };
        let bad = |msg: String| Error::MalformedPfsa(msg);

        let n = agent_states.len();
        let mut neighbors = vec![Vec::new(); n];
        let mut virtual_index = BTreeMap::new();
        let mut link_symbol = BTreeMap::new();
        for (v, role) in roles.iter().enumerate() {
            let StateRole::Virtual { from, to } = *role else {
                continue;
            };
            let (Some(&i), Some(&j)) = (agent_of.get(&from), agent_of.get(&to)) else {
                return Err(bad(format!("virtual state {v} does not join two agents")));
            };
            let mut lambda = 0.0;
            let mut forward = false;
            for (_, d, p) in pfsa.outgoing(v) {
                if d == dump_index {
                    lambda += p;
                } else if d == to {
                    forward = true;
                } else {
                    return Err(bad(format!("virtual state {v} leads to state {d}")));
                }
            }
            if !forward {
                return Err(bad(format!("virtual state {v} has no forward transition")));
            }
            let symbol = (0..pfsa.n_symbols())
                .find(|&s| pfsa.transition(from, s) == Some(v))
                .or_else(|| {
                    // target agents loop in place instead of entering the virtual state
                    (0..pfsa.n_symbols()).find(|&s| pfsa.transition(v, s) == Some(to))
                })
                .ok_or_else(|| bad(format!("no symbol leads into virtual state {v}")))?;
            neighbors[i].push(Link { to: j, lambda });
            virtual_index.insert((i, j), v);
            link_symbol.insert((i, j), symbol);
        }
        for ls in &mut neighbors {
            ls.sort_by_key(|l| l.to);
        }
        let target = agent_states
            .iter()
            .map(|&q| matches!(roles[q], StateRole::Agent { target: true }))
            .collect();
        Ok(NetworkPfsa {
            pfsa: pfsa.clone(),
            agent_index: agent_states,
            virtual_index,
            link_symbol,
            dump_index,
            network: FrozenNetwork {
                neighbors,
                target,
                chi_dump: pfsa.characteristic()[dump_index],
            },
        })
    }

    pub fn roles(&self) -> Vec<StateRole> {
        let mut roles = vec![StateRole::Dump; self.pfsa.n_states()];
        for (a, &q) in self.agent_index.iter().enumerate() {
            roles[q] = StateRole::Agent {
                target: self.network.target[a],
            };
        }
        for (&(i, j), &v) in &self.virtual_index {
            roles[v] = StateRole::Virtual {
                from: self.agent_index[i],
                to: self.agent_index[j],
            };
        }
        roles
    }

    pub fn document(&self) -> PfsaDocument {
        PfsaDocument {
            pfsa: self.pfsa.clone(),
            roles: Some(self.roles()),
        }
    }

    /// State indices of the target agents.
    pub fn target_states(&self) -> Vec<usize> {
        (0..self.network.n_agents())
            .filter(|&a| self.network.target[a])
            .map(|a| self.agent_index[a])
            .collect()
    }

    pub fn n_states(&self) -> usize {
        self.pfsa.n_states()
    }
}
