//! Worked examples checked against brute-force oracles.

mod common;

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stx_core::compose::{compose_pair, embed_cascade, embed_serial_marginalized};
use stx_core::process::{feedback_joint, interface_eval, joint_process, transducer_joint, InputDistribution};
use stx_core::{acausality, cmi, decompose_observable, dependency_graph, fixtures, intransducibility, Slice, DEFAULT_TOL};

use common::sequences;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[test]
fn lockstep_pair_matches_path_sums() {
    let mut g = rng(11);
    let t = fixtures::random_transducer(&mut g, 2, 2, 2);
    let u = fixtures::random_transducer(&mut g, 4, 2, 2);
    let v = compose_pair(&t, &u).unwrap();
    for xs in sequences(2, 3) {
        let got = interface_eval(&v, &xs).unwrap();
        for ys in sequences(2, 3) {
            for zs in sequences(2, 3) {
                let key: Vec<usize> = ys.iter().zip(&zs).map(|(y, z)| y * 2 + z).collect();
                let want = common::lockstep(&t, &u, &xs, &ys, &zs);
                assert!((got.get(&key).copied().unwrap_or(0.0) - want).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn serial_product_sums_out_middle() {
    let mut g = rng(12);
    let t = fixtures::random_transducer(&mut g, 2, 3, 2);
    let u = fixtures::random_transducer(&mut g, 3, 2, 2);
    let v = embed_serial_marginalized(&t, &u).unwrap();
    for xs in sequences(2, 3) {
        let got = interface_eval(&v, &xs).unwrap();
        for zs in sequences(2, 3) {
            assert!((got.get(&zs).copied().unwrap_or(0.0) - common::serial(&t, &u, &xs, &zs)).abs() < 1e-12);
        }
    }
}

#[test]
fn cascade_matches_state_path_sum() {
    let mut g = rng(13);
    let t = fixtures::state_emitter(&mut g, 2, 2);
    let u = fixtures::random_transducer(&mut g, 4, 2, 2);
    let v = embed_cascade(&t, &u).unwrap();
    for xs in sequences(2, 3) {
        let got = interface_eval(&v, &xs).unwrap();
        for zs in sequences(2, 3) {
            assert!((got.get(&zs).copied().unwrap_or(0.0) - common::cascade(&t, &u, &xs, &zs)).abs() < 1e-12);
        }
    }
}

#[test]
fn randomizer_after_identity_ignores_input() {
    let v = embed_serial_marginalized(&fixtures::identity(2), &fixtures::uniform_randomizer(2, 2)).unwrap();
    let d = transducer_joint(&v, 3, false).unwrap();
    assert!(acausality(&d, &["X"], &["Y"], DEFAULT_TOL).unwrap().is_zero());
    let mi = cmi(&d, &[Slice::new("X", 0, 3)], &[Slice::new("Y", 0, 3)], &[]).unwrap();
    assert!(mi.abs() < 1e-12);
}

#[test]
fn network_joint_matches_per_node_path_sums() {
    let mut g = rng(14);
    let net = fixtures::random_network(&mut g, &[vec![], vec![0], vec![0, 1]], 2, 2);
    let d = joint_process(&net, &InputDistribution::none(), 2, true).unwrap();
    let oracle = common::network_joint(&net, 2, true);
    let mut worst: f64 = 0.0;
    for (k, &p) in &oracle {
        worst = worst.max((d.table().get(k).copied().unwrap_or(0.0) - p).abs());
    }
    for (k, &p) in d.table() {
        worst = worst.max((oracle.get(k).copied().unwrap_or(0.0) - p).abs());
    }
    assert!(worst < 1e-14, "{worst}");
}

#[test]
fn cmi_matches_entropy_sums() {
    let mut g = rng(15);
    let net = fixtures::random_network(&mut g, &[vec![], vec![0], vec![1]], 2, 2);
    let d = joint_process(&net, &InputDistribution::none(), 3, false).unwrap();
    let got = cmi(
        &d,
        &[Slice::new("n0", 0, 3)],
        &[Slice::new("n2", 1, 3)],
        &[Slice::new("n1", 0, 2)],
    )
    .unwrap();
    let want = common::cmi(d.table(), &[0, 1, 2], &[7, 8], &[3, 4]);
    assert!((got - want).abs() < 1e-12);
}

#[test]
fn measures_match_oracle_on_random_machine() {
    let t = fixtures::random_transducer(&mut rng(16), 2, 2, 2);
    let d = transducer_joint(&t, 3, true).unwrap();
    let ac = acausality(&d, &["X"], &["Y"], DEFAULT_TOL).unwrap();
    assert!((ac.total_bits - common::acausality(d.table(), 3, &[0], &[3])).abs() < 1e-12);
    assert!(ac.is_zero());
    let it = intransducibility(&d, &["X"], &["Y"], &["R"], DEFAULT_TOL).unwrap();
    assert!((it.total_bits - common::intransducibility(d.table(), 3, 0, 3, 6)).abs() < 1e-12);
    assert!(it.is_zero());
}

#[test]
fn noise_latent_is_not_a_memory() {
    // swap the true latent for an independent coin sequence
    let t = fixtures::random_transducer(&mut rng(17), 2, 2, 2);
    let d = transducer_joint(&t, 3, true).unwrap();
    let obs = d.marginalize(&["X", "Y"]).unwrap();
    let mut table = BTreeMap::new();
    for (k, &p) in obs.table() {
        for r in sequences(2, 4) {
            table.insert([k.clone(), r].concat(), p / 16.0);
        }
    }
    let fake = stx_core::SequenceDistribution::new(3, d.processes().to_vec(), table).unwrap();
    let it = intransducibility(&fake, &["X"], &["Y"], &["R"], DEFAULT_TOL).unwrap();
    assert!(it.total_bits > 1e-3);
}

#[test]
fn anticipation_measured_against_oracle() {
    let d = fixtures::anticipatory_joint(4);
    let ac = acausality(&d, &["X"], &["Y"], DEFAULT_TOL).unwrap();
    assert!((ac.total_bits - common::acausality(d.table(), 4, &[0], &[4])).abs() < 1e-12);
    assert!((ac.total_bits - 3.0).abs() < 1e-9);
}

#[test]
fn conditioning_follows_bayes() {
    let mut g = rng(18);
    let net = fixtures::random_network(&mut g, &[vec![], vec![0], vec![0, 1]], 2, 2);
    let d = joint_process(&net, &InputDistribution::none(), 2, false).unwrap();
    let c = d.condition(&[("n1", vec![1, 0])]).unwrap();
    let mass: f64 = d.table().iter().filter(|(k, _)| k[2..4] == [1, 0]).map(|(_, p)| p).sum();
    for (k, &p) in d.table() {
        let want = if k[2..4] == [1, 0] { p / mass } else { 0.0 };
        assert!((c.table().get(k).copied().unwrap_or(0.0) - want).abs() < 1e-12);
    }
    let m = d.marginalize(&["n0", "n2"]).unwrap();
    for (k, &p) in m.table() {
        let want: f64 = d
            .table()
            .iter()
            .filter(|(j, _)| j[0..2] == k[0..2] && j[4..6] == k[2..4])
            .map(|(_, q)| q)
            .sum();
        assert!((p - want).abs() < 1e-12);
    }
}

#[test]
fn feedback_loop_matches_oracle() {
    let (env, agent) = fixtures::random_feedback_pair(&mut rng(19), 2, 2, 2, 2);
    let d = feedback_joint(&env, &agent, 3).unwrap();
    let oracle = common::loop_joint(&env, &agent.transducer, &agent.initial, 3);
    for (k, &p) in &oracle {
        assert!((d.table().get(k).copied().unwrap_or(0.0) - p).abs() < 1e-12);
    }
    assert!((d.total() - 1.0).abs() < 1e-12);
}

#[test]
fn screened_chain_has_no_skip_edge() {
    let net = fixtures::random_network(&mut rng(20), &[vec![], vec![0], vec![1]], 2, 2);
    let d = joint_process(&net, &InputDistribution::none(), 3, false).unwrap();
    let r = decompose_observable(&d, &["n0", "n1", "n2"], DEFAULT_TOL).unwrap();
    let (a, b, c) = (
        r.module_of("n0").unwrap(),
        r.module_of("n1").unwrap(),
        r.module_of("n2").unwrap(),
    );
    assert!(a <= b && b <= c);
    let edges = dependency_graph(&r, &d, 1e-9).unwrap();
    if a < b && b < c {
        assert!(edges.iter().all(|e| !(e.from == a && e.to == c)));
        assert!(edges.iter().any(|e| e.from == b && e.to == c));
    }
}

#[test]
fn independent_nodes_have_no_edges() {
    let net = fixtures::random_network(&mut rng(21), &[vec![], vec![]], 2, 2);
    let d = joint_process(&net, &InputDistribution::none(), 3, false).unwrap();
    let r = decompose_observable(&d, &["n0", "n1"], DEFAULT_TOL).unwrap();
    assert_eq!(r.modules.len(), 2);
    assert!(dependency_graph(&r, &d, 1e-9).unwrap().is_empty());
}
