//! Brute-force oracles for integration tests. Nothing here calls the
//! library's evaluation, composition or measure code: probabilities come
//! from explicit latent-path sums and information from entropy sums.

#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};

use stx_core::{StochasticKernel, Transducer, TransducerNetwork};

/// All sequences of length `len` over `0..n`, first position slowest.
pub fn sequences(n: usize, len: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..n).map(move |s| {
                    let mut q = p.clone();
                    q.push(s);
                    q
                })
            })
            .collect();
    }
    out
}

/// Chain-rule expansion summed over every latent path `r_0..r_L`.
pub fn path_sum_kernels(kernels: &[&StochasticKernel], prior: &[f64], xs: &[usize], ys: &[usize]) -> f64 {
    let nr = prior.len();
    let mut total = 0.0;
    for path in sequences(nr, xs.len() + 1) {
        let mut p = prior[path[0]];
        for i in 0..xs.len() {
            if p == 0.0 {
                break;
            }
            p *= kernels[i].get(xs[i], path[i], ys[i], path[i + 1]);
        }
        total += p;
    }
    total
}

pub fn path_sum(t: &Transducer, xs: &[usize], ys: &[usize]) -> f64 {
    let ks = vec![t.kernel(); xs.len()];
    path_sum_kernels(&ks, t.prior(), xs, ys)
}

/// Joint of a network without external inputs as a product of per-node
/// path sums. Keys: node output sequences in node order, then (when
/// `latents`) node latent sequences of length `h + 1`.
pub fn network_joint(net: &TransducerNetwork, h: usize, latents: bool) -> BTreeMap<Vec<usize>, f64> {
    assert!(net.inputs().is_empty());
    let nodes = net.nodes();
    let n = nodes.len();
    let ids: Vec<&str> = nodes.iter().map(|nd| nd.id.as_str()).collect();
    let parents: Vec<Vec<usize>> = nodes
        .iter()
        .map(|nd| nd.parents.iter().map(|p| ids.iter().position(|i| i == p).unwrap()).collect())
        .collect();
    let sizes: Vec<usize> = nodes.iter().map(|nd| nd.transducer.n_out()).collect();
    let mut out = BTreeMap::new();
    let mut outs_all: Vec<Vec<Vec<usize>>> = vec![Vec::new()];
    for &sz in &sizes {
        outs_all = outs_all
            .into_iter()
            .flat_map(|p| {
                sequences(sz, h).into_iter().map(move |s| {
                    let mut q = p.clone();
                    q.push(s);
                    q
                })
            })
            .collect();
    }
    for outs in outs_all {
        let inputs: Vec<Vec<usize>> = (0..n)
            .map(|k| {
                (0..h)
                    .map(|t| parents[k].iter().fold(0, |acc, &p| acc * sizes[p] + outs[p][t]))
                    .collect()
            })
            .collect();
        if !latents {
            let p: f64 = (0..n).map(|k| path_sum(&nodes[k].transducer, &inputs[k], &outs[k])).product();
            if p > 0.0 {
                out.insert(outs.concat(), p);
            }
            continue;
        }
        let mut lat_all: Vec<(Vec<Vec<usize>>, f64)> = vec![(Vec::new(), 1.0)];
        for k in 0..n {
            let t = &nodes[k].transducer;
            let mut next = Vec::new();
            for (ls, w) in &lat_all {
                for path in sequences(t.n_latent(), h + 1) {
                    let mut p = w * t.prior()[path[0]];
                    for i in 0..h {
                        p *= t.kernel().get(inputs[k][i], path[i], outs[k][i], path[i + 1]);
                    }
                    if p > 0.0 {
                        let mut l = ls.clone();
                        l.push(path);
                        next.push((l, p));
                    }
                }
            }
            lat_all = next;
        }
        for (ls, p) in lat_all {
            out.insert([outs.concat(), ls.concat()].concat(), p);
        }
    }
    out
}

/// `Pr(upper outputs | lower outputs)` for nodes `a..` of a network with the
/// outputs of nodes `..a` fixed to `lower`.
pub fn redrive(net: &TransducerNetwork, a: usize, lower: &[Vec<usize>], upper: &[Vec<usize>]) -> f64 {
    let nodes = net.nodes();
    let ids: Vec<&str> = nodes.iter().map(|nd| nd.id.as_str()).collect();
    let all: Vec<&Vec<usize>> = lower.iter().chain(upper).collect();
    let h = all[0].len();
    (a..nodes.len())
        .map(|k| {
            let nd = &nodes[k];
            let xs: Vec<usize> = (0..h)
                .map(|t| {
                    nd.parents.iter().fold(0, |acc, p| {
                        let j = ids.iter().position(|i| i == p).unwrap();
                        acc * nodes[j].transducer.n_out() + all[j][t]
                    })
                })
                .collect();
            path_sum(&nd.transducer, &xs, all[k])
        })
        .product()
}

fn entropy(table: &BTreeMap<Vec<usize>, f64>, positions: &[usize]) -> f64 {
    let mut marg: HashMap<Vec<usize>, f64> = HashMap::new();
    for (k, &p) in table {
        *marg.entry(positions.iter().map(|&i| k[i]).collect()).or_insert(0.0) += p;
    }
    -marg.values().filter(|&&p| p > 0.0).map(|&p| p * p.log2()).sum::<f64>()
}

/// `I[A; B | C]` in bits over key positions, as a sum of entropies.
pub fn cmi(table: &BTreeMap<Vec<usize>, f64>, a: &[usize], b: &[usize], c: &[usize]) -> f64 {
    let ac = [a, c].concat();
    let bc = [b, c].concat();
    let abc = [a, b, c].concat();
    entropy(table, &ac) + entropy(table, &bc) - entropy(table, c) - entropy(table, &abc)
}

fn range(offset: usize, from: usize, to: usize) -> Vec<usize> {
    (offset + from..offset + to).collect()
}

/// Acausality from `X` (sequences at the listed key offsets) to `Y`.
pub fn acausality(table: &BTreeMap<Vec<usize>, f64>, h: usize, x: &[usize], y: &[usize]) -> f64 {
    (1..h)
        .map(|t| {
            let past_y: Vec<usize> = y.iter().flat_map(|&o| range(o, 0, t)).collect();
            let fut_x: Vec<usize> = x.iter().flat_map(|&o| range(o, t, h)).collect();
            let past_x: Vec<usize> = x.iter().flat_map(|&o| range(o, 0, t)).collect();
            if fut_x.is_empty() {
                0.0
            } else {
                cmi(table, &past_y, &fut_x, &past_x)
            }
        })
        .sum()
}

/// Intransducibility with single `X`, `Y`, `R` processes at key offsets.
pub fn intransducibility(table: &BTreeMap<Vec<usize>, f64>, h: usize, x: usize, y: usize, r: usize) -> f64 {
    (1..h)
        .map(|t| {
            let future = [range(r, t + 1, h + 1), range(y, t, h)].concat();
            let past = [range(y, 0, t), range(r, 0, t), range(x, 0, t)].concat();
            let given = [range(x, t, h), range(r, t, t + 1)].concat();
            cmi(table, &future, &past, &given)
        })
        .sum()
}

/// Closed-loop joint by summing over all latent paths of both machines.
/// Keys: `x_{0:H}` then `y_{0:H}`.
pub fn loop_joint(env: &Transducer, agent: &Transducer, initial: &[f64], h: usize) -> BTreeMap<Vec<usize>, f64> {
    let (nx, ny, nr, ns) = (env.n_in(), env.n_out(), env.n_latent(), agent.n_latent());
    let mut out = BTreeMap::new();
    for xs in sequences(nx, h) {
        for ys in sequences(ny, h) {
            let mut total = 0.0;
            for rp in sequences(nr, h + 1) {
                let mut pe = env.prior()[rp[0]];
                for t in 0..h {
                    pe *= env.kernel().get(xs[t], rp[t], ys[t], rp[t + 1]);
                }
                if pe == 0.0 {
                    continue;
                }
                for sp in sequences(ns, h) {
                    let mut pa = initial[xs[0] * ns + sp[0]];
                    for t in 0..h - 1 {
                        pa *= agent.kernel().get(ys[t], sp[t], xs[t + 1], sp[t + 1]);
                    }
                    total += pe * pa;
                }
            }
            if total > 0.0 {
                out.insert([xs.clone(), ys].concat(), total);
            }
        }
    }
    out
}

/// Serial product oracle: `Σ_y Pr_T(y|x) Pr_U(z|y)`.
pub fn serial(t: &Transducer, u: &Transducer, xs: &[usize], zs: &[usize]) -> f64 {
    sequences(t.n_out(), xs.len())
        .iter()
        .map(|ys| path_sum(t, xs, ys) * path_sum(u, ys, zs))
        .sum()
}

/// Cascade oracle: sum over `t`'s state paths, each emitted as its output
/// and fed with `x` into `u`.
pub fn cascade(t: &Transducer, u: &Transducer, xs: &[usize], zs: &[usize]) -> f64 {
    let nr = t.n_latent();
    let mut total = 0.0;
    for path in sequences(nr, xs.len() + 1) {
        let mut p = t.prior()[path[0]];
        for i in 0..xs.len() {
            p *= t.kernel().get(xs[i], path[i], path[i], path[i + 1]);
        }
        if p == 0.0 {
            continue;
        }
        let uin: Vec<usize> = (0..xs.len()).map(|i| xs[i] * nr + path[i]).collect();
        total += p * path_sum(u, &uin, zs);
    }
    total
}

/// Lockstep oracle for `compose_pair(t, u)` with output `(y, z)`.
pub fn lockstep(t: &Transducer, u: &Transducer, xs: &[usize], ys: &[usize], zs: &[usize]) -> f64 {
    let ny = t.n_out();
    let uin: Vec<usize> = xs.iter().zip(ys).map(|(&x, &y)| x * ny + y).collect();
    path_sum(t, xs, ys) * path_sum(u, &uin, zs)
}

/// Largest row-sum residual of a kernel and its prior.
pub fn max_residual(t: &Transducer) -> f64 {
    let (nx, nr, ny, _) = t.kernel().dims();
    let mut worst: f64 = (t.prior().iter().sum::<f64>() - 1.0).abs();
    for x in 0..nx {
        for r in 0..nr {
            let s: f64 = (0..ny)
                .flat_map(|y| (0..nr).map(move |rn| (y, rn)))
                .map(|(y, rn)| t.kernel().get(x, r, y, rn))
                .sum();
            worst = worst.max((s - 1.0).abs());
        }
    }
    worst
}
