use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use pfsa_swarm::distributed::{exact_optimum, run_to_convergence, Schedule, DEFAULT_TOL};
use pfsa_swarm::pfsa::policy_measure;
use pfsa_swarm::scenario::generate::{random_connected_network, random_small_network};
use pfsa_swarm::supervisor::{brute_force_optimal, optimal_supervisor, policy_iteration};
use pfsa_swarm::swarm_graph::NetworkPfsa;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn label_setting_matches_supervisor(seed in any::<u64>(), n in 6usize..30, theta in 0.001f64..0.2) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = random_connected_network(&mut rng, n, 5.0);
        let npfsa = NetworkPfsa::from_frozen(&net).unwrap();
        let exact = exact_optimum(&net, theta).unwrap();
        let central = optimal_supervisor(&npfsa.pfsa, theta).unwrap();
        for (i, v) in exact.measures.iter().enumerate() {
            prop_assert!((v - central.measure.get(i)).abs() < 1e-9);
        }
    }

    #[test]
    fn measures_stay_in_unit_interval(seed in any::<u64>(), n in 6usize..30, theta in 0.001f64..0.2) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = random_connected_network(&mut rng, n, 5.0);
        let npfsa = NetworkPfsa::from_frozen(&net).unwrap();
        let r = run_to_convergence(&npfsa, theta, Schedule::asynchronous(seed), DEFAULT_TOL, None).unwrap();
        prop_assert_eq!(r.counters.total_violations(), 0);
        prop_assert!(r.agent_measures.iter().all(|&v| (0.0..=1.0).contains(&v)));
        let closed = policy_measure(&npfsa.pfsa, &r.policy, theta).unwrap();
        prop_assert!(r.measure.max_abs_diff(&closed) < 1e-7);
    }

    #[test]
    fn three_solvers_agree_on_small_networks(seed in any::<u64>(), theta in 0.005f64..0.2) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = random_small_network(&mut rng, 8);
        let pfsa = NetworkPfsa::from_frozen(&net).unwrap().pfsa;
        let central = optimal_supervisor(&pfsa, theta).unwrap();
        let brute = brute_force_optimal(&pfsa, theta).unwrap();
        let pi = policy_iteration(&pfsa, 1.0 - theta).unwrap();
        prop_assert!(central.measure.max_abs_diff(&brute.measure) < 1e-9);
        let pi_measure = policy_measure(&pfsa, &pi.policy, theta).unwrap();
        prop_assert!(central.measure.max_abs_diff(&pi_measure) < 1e-9);
    }
}
