//! Hand-built machines and seeded random generators shared by tests,
//! benches and the self-test.

use std::collections::BTreeMap;

use rand::Rng;

use crate::alphabet::{all_sequences, Alphabet};
use crate::network::{NetworkNode, TransducerNetwork};
use crate::process::{FeedbackAgent, ProcessInfo, SequenceDistribution};
use crate::stationary::TimeVaryingTransducer;
use crate::transducer::{StochasticKernel, Transducer};

fn memoryless(nx: usize, ny: usize, f: impl Fn(usize, usize) -> f64) -> Transducer {
    let channel: Vec<Vec<f64>> = (0..nx).map(|x| (0..ny).map(|y| f(x, y)).collect()).collect();
    let inp = if nx == 1 {
        Alphabet::unit()
    } else {
        Alphabet::numbered("x", nx)
    };
    Transducer::memoryless(inp, Alphabet::numbered("y", ny), &channel).expect("valid channel")
}

fn bits2() -> Alphabet {
    Alphabet::product(&[&Alphabet::binary("x"), &Alphabet::binary("y")])
}

/// Copies its input; one latent state.
pub fn identity(n: usize) -> Transducer {
    memoryless(n, n, |x, y| if x == y { 1.0 } else { 0.0 })
}

pub fn bit_flip() -> Transducer {
    memoryless(2, 2, |x, y| if x != y { 1.0 } else { 0.0 })
}

pub fn constant_zero() -> Transducer {
    memoryless(2, 2, |_, y| if y == 0 { 1.0 } else { 0.0 })
}

/// Binary input, fair coin output.
pub fn fair_coin() -> Transducer {
    memoryless(2, 2, |_, _| 0.5)
}

/// Source node: unit input, fair coin output.
pub fn coin_source() -> Transducer {
    memoryless(1, 2, |_, _| 0.5)
}

/// Ignores its input and emits a uniform symbol from `n`.
pub fn uniform_randomizer(nx: usize, ny: usize) -> Transducer {
    memoryless(nx, ny, |_, _| 1.0 / ny as f64)
}

/// Latent stores the last input and is emitted as the output. `start`
/// fixes the initial stored bit; `None` leaves it uniform.
pub fn delayed_copy(start: Option<usize>) -> Transducer {
    let mut k = StochasticKernel::zeros(2, 2, 2);
    for x in 0..2 {
        for r in 0..2 {
            k.set(x, r, r, x, 1.0);
        }
    }
    let t = Transducer::new(Alphabet::binary("x"), Alphabet::binary("y"), Alphabet::binary("r"), k, None).unwrap();
    match start {
        Some(r) => t.starting_in(r).unwrap(),
        None => t,
    }
}

/// Unit input; emits 0, 1, 0, 1, ...
pub fn alternator() -> Transducer {
    let mut k = StochasticKernel::zeros(1, 2, 2);
    k.set(0, 0, 0, 1, 1.0);
    k.set(0, 1, 1, 0, 1.0);
    Transducer::new(Alphabet::unit(), Alphabet::binary("y"), Alphabet::binary("r"), k, None)
        .unwrap()
        .starting_in(0)
        .unwrap()
}

/// Identity on `X × Y` with binary factors.
pub fn copy_pair() -> Transducer {
    let t = identity(4);
    Transducer::new(
        bits2(),
        Alphabet::numbered("z", 4),
        t.latent_alphabet().clone(),
        t.kernel().clone(),
        None,
    )
    .unwrap()
}

/// Reads `(x, y)` and emits `x ⊕ y`.
pub fn xor_memoryless() -> Transducer {
    let t = memoryless(4, 2, |xy, z| if (xy / 2) ^ (xy % 2) == z { 1.0 } else { 0.0 });
    Transducer::new(
        bits2(),
        t.out_alphabet().clone(),
        t.latent_alphabet().clone(),
        t.kernel().clone(),
        None,
    )
    .unwrap()
}

/// Reads `(x, y)`, keeps a parity bit `s` starting at 0, emits
/// `z = x ⊕ y ⊕ s` and stores `z`.
pub fn xor_with_memory() -> Transducer {
    let mut k = StochasticKernel::zeros(4, 2, 2);
    for xy in 0..4 {
        for s in 0..2 {
            let z = (xy / 2) ^ (xy % 2) ^ s;
            k.set(xy, s, z, z, 1.0);
        }
    }
    Transducer::new(bits2(), Alphabet::binary("z"), Alphabet::binary("s"), k, None)
        .unwrap()
        .starting_in(0)
        .unwrap()
}

/// `(bit_flip, constant_zero)`: serial order changes the interface.
pub fn noncommuting_pair() -> (Transducer, Transducer) {
    (bit_flip(), constant_zero())
}

/// Unit input, two binary outputs `(a, b)` driven by a sticky latent bit:
/// `a` and `b` are noisy copies of the same hidden state, so neither
/// output alone is transducible from the other.
pub fn entangled_pair() -> Transducer {
    let out = Alphabet::product(&[&Alphabet::binary("a"), &Alphabet::binary("b")]);
    let mut k = StochasticKernel::zeros(1, 2, 4);
    let (stay, hit) = (0.8, 0.9);
    for r in 0..2 {
        for a in 0..2 {
            for b in 0..2 {
                let pa = if a == r { hit } else { 1.0 - hit };
                let pb = if b == r { hit } else { 1.0 - hit };
                for rn in 0..2 {
                    let pr = if rn == r { stay } else { 1.0 - stay };
                    k.set(0, r, a * 2 + b, rn, pa * pb * pr);
                }
            }
        }
    }
    Transducer::new(Alphabet::unit(), out, Alphabet::binary("r"), k, None).unwrap()
}

/// Wraps a source transducer as a one-node network `n0`.
pub fn single_node(t: Transducer) -> TransducerNetwork {
    TransducerNetwork::from_nodes(vec![NetworkNode {
        id: "n0".into(),
        parents: vec![],
        transducer: t,
    }])
    .unwrap()
}

/// Coin source `n0` followed by `n - 1` identity copies.
pub fn identity_chain(n: usize) -> TransducerNetwork {
    let nodes = (0..n)
        .map(|i| NetworkNode {
            id: format!("n{i}"),
            parents: if i == 0 { vec![] } else { vec![format!("n{}", i - 1)] },
            transducer: if i == 0 { coin_source() } else { identity(2) },
        })
        .collect();
    TransducerNetwork::from_nodes(nodes).unwrap()
}

/// `Y_t = X_{t+1}` with IID uniform binary `X` and a fresh uniform bit for
/// the last output. Roster `X`, `Y`.
pub fn anticipatory_joint(horizon: usize) -> SequenceDistribution {
    let mut table = BTreeMap::new();
    let p = 0.5f64.powi(horizon as i32 + 1);
    for xs in all_sequences(2, horizon) {
        for last in 0..2 {
            let mut ys: Vec<usize> = xs[1..].to_vec();
            ys.push(last);
            table.insert([xs.clone(), ys].concat(), p);
        }
    }
    let roster = vec![
        ProcessInfo::observable("X", Alphabet::binary("X")),
        ProcessInfo::observable("Y", Alphabet::binary("Y")),
    ];
    SequenceDistribution::new(horizon, roster, table).unwrap()
}

/// Two binary processes that each anticipate the other: in every block
/// `(2k, 2k+1)`, `A_{2k} = B_{2k+1}` and `B_{2k} = A_{2k+1}` with the odd
/// steps fresh uniform bits. A trailing unpaired step is fresh for both.
pub fn mutual_anticipation(horizon: usize) -> SequenceDistribution {
    let fresh = horizon.div_ceil(2);
    let mut table = BTreeMap::new();
    let p = 0.25f64.powi(fresh as i32);
    for bits in all_sequences(4, fresh) {
        let mut a = vec![0; horizon];
        let mut b = vec![0; horizon];
        for (k, &pair) in bits.iter().enumerate() {
            let (u, v) = (pair / 2, pair % 2);
            if 2 * k + 1 < horizon {
                a[2 * k + 1] = u;
                b[2 * k + 1] = v;
                a[2 * k] = v;
                b[2 * k] = u;
            } else {
                a[2 * k] = u;
                b[2 * k] = v;
            }
        }
        table.insert([a, b].concat(), p);
    }
    let roster = vec![
        ProcessInfo::observable("A", Alphabet::binary("A")),
        ProcessInfo::observable("B", Alphabet::binary("B")),
    ];
    SequenceDistribution::new(horizon, roster, table).unwrap()
}

/// Agent that always acts `x`, starting with `x` and latent 0.
pub fn constant_agent(x: usize) -> FeedbackAgent {
    let t = memoryless(2, 2, |_, a| if a == x { 1.0 } else { 0.0 });
    let mut initial = vec![0.0; 2];
    initial[x] = 1.0;
    FeedbackAgent { transducer: t, initial }
}

/// Agent that ignores observations and acts uniformly at random.
pub fn coin_agent() -> FeedbackAgent {
    FeedbackAgent {
        transducer: fair_coin(),
        initial: vec![0.5, 0.5],
    }
}

/// Flat Dirichlet(1) draw.
pub fn random_simplex<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

fn random_kernel<R: Rng + ?Sized>(rng: &mut R, nx: usize, ny: usize, nr: usize, density: f64) -> StochasticKernel {
    let mut k = StochasticKernel::zeros(nx, nr, ny);
    for x in 0..nx {
        for r in 0..nr {
            let mut row = random_simplex(rng, ny * nr);
            if density < 1.0 {
                let keep = rng.random_range(0..row.len());
                for (i, v) in row.iter_mut().enumerate() {
                    if i != keep && !rng.random_bool(density) {
                        *v = 0.0;
                    }
                }
                let s: f64 = row.iter().sum();
                row.iter_mut().for_each(|v| *v /= s);
            }
            for y in 0..ny {
                for rn in 0..nr {
                    k.set(x, r, y, rn, row[y * nr + rn]);
                }
            }
        }
    }
    k
}

fn alphabets(nx: usize, ny: usize, nr: usize) -> (Alphabet, Alphabet, Alphabet) {
    let inp = if nx == 1 {
        Alphabet::unit()
    } else {
        Alphabet::numbered("x", nx)
    };
    (inp, Alphabet::numbered("y", ny), Alphabet::numbered("r", nr))
}

/// Dense random kernel and random prior.
pub fn random_transducer<R: Rng + ?Sized>(rng: &mut R, nx: usize, ny: usize, nr: usize) -> Transducer {
    let k = random_kernel(rng, nx, ny, nr, 1.0);
    let prior = random_simplex(rng, nr);
    let (a, b, c) = alphabets(nx, ny, nr);
    Transducer::new(a, b, c, k, Some(prior)).unwrap()
}

/// Random kernel where each entry survives with probability `density`.
pub fn random_sparse_transducer<R: Rng + ?Sized>(rng: &mut R, nx: usize, ny: usize, nr: usize, density: f64) -> Transducer {
    let k = random_kernel(rng, nx, ny, nr, density);
    let prior = random_simplex(rng, nr);
    let (a, b, c) = alphabets(nx, ny, nr);
    Transducer::new(a, b, c, k, Some(prior)).unwrap()
}

/// Random emission law per `(x, r)` and a random deterministic update
/// `r' = f(x, r, y)`; starts in state 0.
pub fn random_unifilar<R: Rng + ?Sized>(rng: &mut R, nx: usize, ny: usize, nr: usize) -> Transducer {
    let mut k = StochasticKernel::zeros(nx, nr, ny);
    for x in 0..nx {
        for r in 0..nr {
            let emit = random_simplex(rng, ny);
            for (y, &p) in emit.iter().enumerate() {
                k.set(x, r, y, rng.random_range(0..nr), p);
            }
        }
    }
    let (a, b, c) = alphabets(nx, ny, nr);
    Transducer::new(a, b, c, k, None).unwrap().starting_in(0).unwrap()
}

/// Emits its current latent state (`Y = R`) and moves randomly.
pub fn state_emitter<R: Rng + ?Sized>(rng: &mut R, nx: usize, nr: usize) -> Transducer {
    let mut k = StochasticKernel::zeros(nx, nr, nr);
    for x in 0..nx {
        for r in 0..nr {
            for (rn, p) in random_simplex(rng, nr).into_iter().enumerate() {
                k.set(x, r, r, rn, p);
            }
        }
    }
    let (a, _, c) = alphabets(nx, nr, nr);
    let prior = random_simplex(rng, nr);
    Transducer::new(a, c.clone().with_name("y"), c, k, Some(prior)).unwrap()
}

pub fn random_time_varying<R: Rng + ?Sized>(
    rng: &mut R,
    nx: usize,
    ny: usize,
    nr: usize,
    horizon: usize,
) -> TimeVaryingTransducer {
    let kernels = (0..horizon).map(|_| random_kernel(rng, nx, ny, nr, 1.0)).collect();
    let prior = random_simplex(rng, nr);
    let (a, b, c) = alphabets(nx, ny, nr);
    TimeVaryingTransducer::new(a, b, c, kernels, Some(prior)).unwrap()
}

/// Random network with nodes `n0, n1, ...`; `parents[i]` lists parent node
/// indices (all `< i`). Every node emits `ny` symbols and has `nr` latents.
pub fn random_network<R: Rng + ?Sized>(rng: &mut R, parents: &[Vec<usize>], ny: usize, nr: usize) -> TransducerNetwork {
    let nodes = parents
        .iter()
        .enumerate()
        .map(|(i, ps)| {
            let nx = ny.pow(ps.len() as u32);
            let t = random_transducer(rng, nx, ny, nr);
            let factor = Alphabet::numbered("y", ny);
            let inp = Alphabet::product(&vec![&factor; ps.len()]);
            let t = Transducer::new(
                inp,
                t.out_alphabet().clone(),
                t.latent_alphabet().clone(),
                t.kernel().clone(),
                Some(t.prior().to_vec()),
            )
            .unwrap();
            NetworkNode {
                id: format!("n{i}"),
                parents: ps.iter().map(|p| format!("n{p}")).collect(),
                transducer: t,
            }
        })
        .collect();
    TransducerNetwork::from_nodes(nodes).unwrap()
}

/// Random DAG on `n` nodes in causal order; each forward edge is present
/// with probability `p`.
pub fn random_dag<R: Rng + ?Sized>(rng: &mut R, n: usize, p: f64) -> Vec<Vec<usize>> {
    (0..n).map(|i| (0..i).filter(|_| rng.random_bool(p)).collect()).collect()
}

/// Random environment (`X → Y`) and agent (`Y → X`) with a random joint
/// initial law over `(X_0, S_0)`.
pub fn random_feedback_pair<R: Rng + ?Sized>(
    rng: &mut R,
    nx: usize,
    ny: usize,
    nr: usize,
    ns: usize,
) -> (Transducer, FeedbackAgent) {
    let env = random_transducer(rng, nx, ny, nr);
    let agent = random_transducer(rng, ny, nx, ns);
    let initial = random_simplex(rng, nx * ns);
    (
        env,
        FeedbackAgent {
            transducer: agent,
            initial,
        },
    )
}
