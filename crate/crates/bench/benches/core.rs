use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use stx_bench::{chain, chain_joint, machine};
use stx_core::process::{joint_process, InputDistribution};
use stx_core::{acausality, compose_pair, decompose_observable, interface_eval};

fn evaluation(c: &mut Criterion) {
    let mut group = c.benchmark_group("interface_eval");
    for h in [4, 6, 8] {
        let t = machine(1, 2, 2, 4);
        let xs: Vec<usize> = (0..h).map(|i| i % 2).collect();
        group.bench_with_input(BenchmarkId::from_parameter(h), &xs, |b, xs| {
            b.iter(|| interface_eval(&t, black_box(xs)))
        });
    }
    group.finish();
}

fn composition(c: &mut Criterion) {
    let mut group = c.benchmark_group("compose_pair");
    for nr in [2, 4, 6] {
        let t = machine(2, 3, 3, nr);
        let u = machine(3, 9, 3, nr);
        group.bench_function(BenchmarkId::from_parameter(nr), |b| {
            b.iter(|| compose_pair(black_box(&t), black_box(&u)))
        });
    }
    group.finish();
}

fn joints(c: &mut Criterion) {
    let mut group = c.benchmark_group("joint_process");
    group.sample_size(20);
    let net = chain(4, 3, 2);
    for (h, latents) in [(4, false), (6, false), (2, true)] {
        let id = format!("h{h}{}", if latents { "_latents" } else { "" });
        group.bench_function(id, |b| b.iter(|| joint_process(&net, &InputDistribution::none(), h, latents)));
    }
    group.finish();
}

fn measures(c: &mut Criterion) {
    let d = chain_joint(5, 3, 5, false);
    c.bench_function("acausality/chain3_h5", |b| {
        b.iter(|| acausality(&d, &["n0"], &["n1", "n2"], 1e-9))
    });
    let mut group = c.benchmark_group("decompose_observable");
    group.sample_size(10);
    for h in [3, 4] {
        let d = chain_joint(6, 3, h, false);
        group.bench_function(BenchmarkId::from_parameter(h), |b| {
            b.iter(|| decompose_observable(&d, &["n0", "n1", "n2"], 1e-9))
        });
    }
    group.finish();
}

criterion_group!(benches, evaluation, composition, joints, measures);
criterion_main!(benches);
