use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::mobility::{InitialSwarm, CAPTURE_FACTOR};
use crate::supervisor::select_theta;
use crate::swarm_graph::{neighbor_lists, FrozenNetwork, Point, Rect, SwarmSnapshot};

/// Draws per agent before placement gives up.
const MAX_DRAWS_PER_AGENT: usize = 10_000;

/// Placements tried when a connected swarm is required.
pub const MAX_PLACEMENTS: usize = 200;

/// Spacing of target agents inside an extended target, relative to `r_c`.
pub const TARGET_GRID_FACTOR: f64 = 0.5;

#[derive(Debug, Clone)]
pub struct Placement {
    pub swarm: InitialSwarm,
    pub network: FrozenNetwork,
    pub r_c: f64,
    pub theta: f64,
    pub attempts: usize,
    pub connected: bool,
}

/// Grid of points covering `r` with spacing at most `step`, centred in each axis.
fn grid_points(r: &Rect, step: f64) -> Vec<Point> {
    let axis = |lo: f64, hi: f64| -> Vec<f64> {
        let k = ((hi - lo) / step).floor() as usize;
        let used = k as f64 * step;
        let start = lo + 0.5 * ((hi - lo) - used);
        (0..=k).map(|i| start + i as f64 * step).collect()
    };
    let xs = axis(r.min.x, r.max.x);
    let ys = axis(r.min.y, r.max.y);
    ys.iter()
        .flat_map(|&y| xs.iter().map(move |&x| Point { x, y }))
        .collect()
}

/// Target agent positions: one per point target, a grid per extended target.
pub fn target_positions(cfg: &ScenarioConfig) -> Vec<Point> {
    let step = TARGET_GRID_FACTOR * cfg.effective_r_c();
    let mut out = Vec::new();
    for t in &cfg.targets {
        if let Some([x, y]) = t.point {
            out.push(Point { x, y });
        } else if let Some([x0, y0, x1, y1]) = t.rect {
            out.extend(grid_points(&Rect::new(x0, y0, x1, y1), step));
        }
    }
    out
}

/// Every agent reaches a target over links that can carry traffic.
pub fn usable_connected(net: &FrozenNetwork) -> bool {
    let n = net.n_agents();
    let mut incoming = vec![Vec::new(); n];
    for (i, links) in net.neighbors.iter().enumerate() {
        for l in links.iter().filter(|l| l.lambda < 1.0) {
            incoming[l.to].push(i);
        }
    }
    let mut seen = net.target.clone();
    let mut stack: Vec<usize> = (0..n).filter(|&i| seen[i]).collect();
    while let Some(j) = stack.pop() {
        for &i in &incoming[j] {
            if !seen[i] {
                seen[i] = true;
                stack.push(i);
            }
        }
    }
    seen.iter().all(|&s| s)
}

fn draw_swarm(
    cfg: &ScenarioConfig,
    targets: &[Point],
    rng: &mut ChaCha8Rng,
) -> Result<InitialSwarm> {
    let r_c = cfg.effective_r_c();
    let capture = CAPTURE_FACTOR * r_c;
    let blocked: Vec<Rect> = cfg
        .void_rects()
        .into_iter()
        .chain(cfg.obstacle_rects())
        .chain(cfg.extended_targets())
        .collect();
    let points = cfg.target_points();
    let n_mobile = cfg.n_agents - targets.len();
    let mut positions = targets.to_vec();
    for _ in 0..n_mobile {
        let mut placed = false;
        for _ in 0..MAX_DRAWS_PER_AGENT {
            let p = Point {
                x: rng.gen::<f64>() * cfg.arena.width,
                y: rng.gen::<f64>() * cfg.arena.height,
            };
            if blocked.iter().any(|r| r.contains(p)) || points.iter().any(|t| t.dist(p) <= capture)
            {
                continue;
            }
            positions.push(p);
            placed = true;
            break;
        }
        if !placed {
            return Err(Error::config("voids", "no free space left to place agents"));
        }
    }
    let n = positions.len();
    let mut target = vec![false; n];
    target[..targets.len()].fill(true);
    let mut sharer = vec![false; n];
    let n_sharers = (cfg.sharer_fraction * n_mobile as f64).round() as usize;
    for k in sample(rng, n_mobile, n_sharers.min(n_mobile)).into_vec() {
        sharer[targets.len() + k] = true;
    }
    Ok(InitialSwarm {
        positions,
        target,
        sharer,
    })
}

pub fn initial_network(cfg: &ScenarioConfig, swarm: &InitialSwarm) -> Result<FrozenNetwork> {
    let r_c = cfg.effective_r_c();
    let snapshot = SwarmSnapshot {
        positions: swarm.positions.clone(),
        targets: (0..swarm.n_agents()).filter(|&i| swarm.target[i]).collect(),
        r_c,
    };
    snapshot.validate()?;
    let nbrs = neighbor_lists(&snapshot.positions, r_c);
    Ok(FrozenNetwork::from_neighbors(
        &snapshot,
        &nbrs,
        &cfg.failure_model(),
        cfg.dump_characteristic,
    ))
}

/// Places targets and agents, redrawing until connected when required, and
/// fixes `theta` from the initial maximum degree.
pub fn place_swarm(cfg: &ScenarioConfig) -> Result<Placement> {
    cfg.validate()?;
    let targets = target_positions(cfg);
    if targets.len() >= cfg.n_agents {
        return Err(Error::config(
            "n_agents",
            format!(
                "{} agents leave none to move beside {} target agents",
                cfg.n_agents,
                targets.len()
            ),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let budget = if cfg.require_connected {
        MAX_PLACEMENTS
    } else {
        1
    };
    for attempt in 1..=budget {
        let swarm = draw_swarm(cfg, &targets, &mut rng)?;
        let network = initial_network(cfg, &swarm)?;
        let connected = usable_connected(&network);
        if connected || !cfg.require_connected {
            let theta = cfg
                .theta_override
                .unwrap_or_else(|| select_theta(cfg.epsilon, network.max_degree()));
            return Ok(Placement {
                swarm,
                network,
                r_c: cfg.effective_r_c(),
                theta,
                attempts: attempt,
                connected,
            });
        }
    }
    Err(Error::config(
        "require_connected",
        format!("no connected placement in {MAX_PLACEMENTS} draws; raise r_c or lower n_agents"),
    ))
}
