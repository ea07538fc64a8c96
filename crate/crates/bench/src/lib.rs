//! Seeded workloads shared by the benchmarks under `benches/`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stx_core::process::{joint_process, InputDistribution};
use stx_core::{fixtures, SequenceDistribution, Transducer, TransducerNetwork};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random transducer with the given alphabet and latent sizes.
pub fn machine(seed: u64, nx: usize, ny: usize, nr: usize) -> Transducer {
    fixtures::random_transducer(&mut rng(seed), nx, ny, nr)
}

/// Binary chain `n0 → n1 → ... ` with `nr` latents per node.
pub fn chain(seed: u64, nodes: usize, nr: usize) -> TransducerNetwork {
    let parents: Vec<Vec<usize>> = (0..nodes).map(|i| if i == 0 { vec![] } else { vec![i - 1] }).collect();
    fixtures::random_network(&mut rng(seed), &parents, 2, nr)
}

pub fn chain_joint(seed: u64, nodes: usize, horizon: usize, latents: bool) -> SequenceDistribution {
    joint_process(&chain(seed, nodes, 2), &InputDistribution::none(), horizon, latents).expect("chain joint")
}
