//! Random frozen networks for cross-checks and benchmarks.

use rand::Rng;

use crate::swarm_graph::{neighbor_lists, FailureModel, FrozenNetwork, Point, SwarmSnapshot};

/// Redraws allowed before a generator gives up.
const MAX_DRAWS: usize = 10_000;

fn draw(
    rng: &mut impl Rng,
    n: usize,
    side: f64,
    n_targets: usize,
    model: &FailureModel,
) -> FrozenNetwork {
    let positions: Vec<Point> = (0..n)
        .map(|_| Point::new(rng.gen::<f64>() * side, rng.gen::<f64>() * side))
        .collect();
    let snapshot = SwarmSnapshot {
        positions,
        targets: (0..n_targets).collect(),
        r_c: 1.0,
    };
    let nbrs = neighbor_lists(&snapshot.positions, 1.0);
    FrozenNetwork::from_neighbors(&snapshot, &nbrs, model, 0.0)
}

fn noisy_model(rng: &mut impl Rng) -> FailureModel {
    FailureModel {
        lambda_at_zero: rng.gen_range(0.05..0.3),
        lambda_at_rc: rng.gen_range(0.0..0.05),
        spatial_noise_amplitude: 0.04,
        noise_seed: rng.gen(),
        ..FailureModel::default()
    }
}

/// Connected random geometric network of `n` agents at unit radius with
/// roughly `mean_degree` neighbors each. Agent 0 is the target.
///
/// # Panics
/// If no connected draw is found, which only happens for tiny `mean_degree`.
pub fn random_connected_network(rng: &mut impl Rng, n: usize, mean_degree: f64) -> FrozenNetwork {
    let side = ((n.saturating_sub(1)) as f64 * std::f64::consts::PI / mean_degree).sqrt();
    for _ in 0..MAX_DRAWS {
        let model = noisy_model(rng);
        let net = draw(rng, n, side, 1, &model);
        if net.is_connected() {
            return net;
        }
    }
    panic!("no connected network with n = {n}, mean degree {mean_degree}");
}

/// Small connected network whose non-target agents own at most
/// `max_controllable` links in total.
pub fn random_small_network(rng: &mut impl Rng, max_controllable: usize) -> FrozenNetwork {
    for _ in 0..MAX_DRAWS {
        let n = rng.gen_range(3..=6);
        let side = rng.gen_range(0.8..1.6);
        let model = noisy_model(rng);
        let net = draw(rng, n, side, 1, &model);
        let controllable: usize = (0..n)
            .filter(|&i| !net.target[i])
            .map(|i| net.neighbors[i].len())
            .sum();
        if net.is_connected() && controllable <= max_controllable {
            return net;
        }
    }
    panic!("no small network with at most {max_controllable} controllable links");
}
