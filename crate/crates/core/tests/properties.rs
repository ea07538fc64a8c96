//! Invariants checked over seeded random machines.

mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stx_core::alphabet::all_sequences;
use stx_core::compose::compose_pair;
use stx_core::process::{interface_eval, joint_process, InputDistribution, Interface};
use stx_core::transducer::KernelOperator;
use stx_core::{
    fixtures, kernel_operator, network_flatten, stationarize, validate_transducer, SequenceDistribution, Slice, Transducer,
    TransducerNetwork,
};

fn machine(seed: u64, nx: usize, ny: usize, nr: usize) -> Transducer {
    fixtures::random_transducer(&mut ChaCha8Rng::seed_from_u64(seed), nx, ny, nr)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn operators_reassemble_kernel(seed in any::<u64>(), nx in 1usize..4, ny in 1usize..4, nr in 1usize..4) {
        let t = machine(seed, nx, ny, nr);
        prop_assert_eq!(&KernelOperator::from_transducer(&t).to_kernel(), t.kernel());
        for x in 0..nx {
            for y in 0..ny {
                let m = kernel_operator(&t, t.in_alphabet().symbol(x), t.out_alphabet().symbol(y)).unwrap();
                for r in 0..nr {
                    for rn in 0..nr {
                        prop_assert_eq!(m[[rn, r]], t.kernel().get(x, r, y, rn));
                    }
                }
                // columns summed over y are stochastic
            }
            for r in 0..nr {
                let col: f64 = (0..ny)
                    .map(|y| kernel_operator(&t, t.in_alphabet().symbol(x), t.out_alphabet().symbol(y)).unwrap().column(r).sum())
                    .sum();
                prop_assert!((col - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn transducer_json_round_trips(seed in any::<u64>(), nx in 1usize..4, ny in 1usize..4, nr in 1usize..4) {
        let t = machine(seed, nx, ny, nr);
        let text = serde_json::to_string(&t).unwrap();
        let back: Transducer = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back.kernel().entries(), t.kernel().entries());
        prop_assert_eq!(back.prior(), t.prior());
        prop_assert_eq!(serde_json::to_string(&back).unwrap(), text);
    }

    #[test]
    fn composition_stays_stochastic(seed in any::<u64>(), nx in 1usize..4, ny in 1usize..4, nz in 1usize..4, nr in 1usize..4, ns in 1usize..4) {
        let mut g = ChaCha8Rng::seed_from_u64(seed);
        let t = fixtures::random_sparse_transducer(&mut g, nx, ny, nr, 0.5);
        let u = fixtures::random_sparse_transducer(&mut g, nx * ny, nz, ns, 0.5);
        let v = compose_pair(&t, &u).unwrap();
        prop_assert!(validate_transducer(&v).is_empty());
        prop_assert_eq!(v.n_latent(), nr * ns);
    }

    #[test]
    fn composition_is_associative(seed in any::<u64>()) {
        let mut g = ChaCha8Rng::seed_from_u64(seed);
        let t = fixtures::random_transducer(&mut g, 2, 2, 2);
        let u = fixtures::random_transducer(&mut g, 4, 2, 2);
        let w = fixtures::random_transducer(&mut g, 8, 2, 1);
        let left = compose_pair(&compose_pair(&t, &u).unwrap(), &w).unwrap();
        let right = compose_pair(&t, &compose_pair(&u, &w).unwrap()).unwrap();
        for xs in all_sequences(2, 3) {
            let a = interface_eval(&left, &xs).unwrap();
            let b = interface_eval(&right, &xs).unwrap();
            for (k, p) in &a {
                prop_assert!((p - b.get(k).copied().unwrap_or(0.0)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn interfaces_are_normalized_and_consistent(seed in any::<u64>(), nx in 1usize..4, ny in 1usize..4, nr in 1usize..4) {
        let t = machine(seed, nx, ny, nr);
        let iface = Interface::from_transducer(&t, 3).unwrap();
        for dist in iface.rows().values() {
            prop_assert!((dist.values().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        prop_assert!(iface.consistency_gap() < 1e-12);
    }

    #[test]
    fn latents_marginalize_to_observed_joint(seed in any::<u64>()) {
        let mut g = ChaCha8Rng::seed_from_u64(seed);
        let parents = fixtures::random_dag(&mut g, 3, 0.5);
        let net = fixtures::random_network(&mut g, &parents, 2, 2);
        let with = joint_process(&net, &InputDistribution::none(), 2, true).unwrap();
        let without = joint_process(&net, &InputDistribution::none(), 2, false).unwrap();
        let obs = with.marginalize(&["n0", "n1", "n2"]).unwrap();
        prop_assert!(obs.max_abs_diff(&without) < 1e-14);
        prop_assert!((with.total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn flatten_matches_network_oracle(seed in any::<u64>()) {
        let mut g = ChaCha8Rng::seed_from_u64(seed);
        let parents = fixtures::random_dag(&mut g, 3, 0.5);
        let net = fixtures::random_network(&mut g, &parents, 2, 2);
        let flat = network_flatten(&net).unwrap();
        let oracle = common::network_joint(&net, 3, false);
        let dist = interface_eval(&flat, &[0, 0, 0]).unwrap();
        for (k, &p) in &oracle {
            // node-major oracle key to per-step joint symbols
            let ys: Vec<usize> = (0..3).map(|t| k[t] * 4 + k[3 + t] * 2 + k[6 + t]).collect();
            prop_assert!((dist.get(&ys).copied().unwrap_or(0.0) - p).abs() < 1e-12);
        }
    }

    #[test]
    fn cmi_is_nonnegative(seed in any::<u64>()) {
        let mut g = ChaCha8Rng::seed_from_u64(seed);
        let net = fixtures::random_network(&mut g, &[vec![], vec![0], vec![0, 1]], 2, 2);
        let d = joint_process(&net, &InputDistribution::none(), 3, false).unwrap();
        for t in 0..3 {
            let v = stx_core::cmi(&d, &[Slice::new("n2", 0, t + 1)], &[Slice::new("n0", t, 3)], &[Slice::new("n1", 0, t)]).unwrap();
            prop_assert!(v >= 0.0);
        }
    }

    #[test]
    fn stationarized_interface_matches(seed in any::<u64>(), h in 1usize..4) {
        let mut g = ChaCha8Rng::seed_from_u64(seed);
        let family = fixtures::random_time_varying(&mut g, 2, 2, 2, h);
        let s = stationarize(&family).unwrap();
        prop_assert!(validate_transducer(&s).is_empty());
        for xs in all_sequences(2, h) {
            for ys in all_sequences(2, h) {
                let want = family.sequence_probability(&xs, &ys).unwrap();
                prop_assert!((stx_core::interface_prob(&s, &xs, &ys).unwrap() - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn distribution_json_round_trips(seed in any::<u64>()) {
        let mut g = ChaCha8Rng::seed_from_u64(seed);
        let net = fixtures::random_network(&mut g, &[vec![], vec![0]], 2, 2);
        let d = joint_process(&net, &InputDistribution::none(), 2, true).unwrap();
        let back: SequenceDistribution = serde_json::from_str(&serde_json::to_string(&d).unwrap()).unwrap();
        prop_assert_eq!(back, d);
        let nt: TransducerNetwork = serde_json::from_str(&serde_json::to_string(&net).unwrap()).unwrap();
        prop_assert_eq!(nt, net);
    }
}
