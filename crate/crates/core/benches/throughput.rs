//! Parallel vs sequential dispatch on two hot loops: replicate cells of the
//! empirical-rate table and chunked network evaluation.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gan_singular::measures::{sample_latent, LatentSpec};
use gan_singular::netgen::SparseReluNet;
use gan_singular::ot::{rate_cell, RateLaw};
use gan_singular::par::{map_range, map_range_seq};
use gan_singular::rng::Seed;

fn rate_cells(c: &mut Criterion) {
    let mut g = c.benchmark_group("rate_cells");
    g.sample_size(10);
    for (dim, n) in [(1usize, 4096usize), (2, 256)] {
        let cell = move |r: usize| rate_cell(dim, n, 16 * n, RateLaw::UniformCube, Seed(7).child(r as u64)).unwrap();
        let id = format!("D{dim}_n{n}");
        g.bench_with_input(BenchmarkId::new("parallel", &id), &16, |b, &reps| {
            b.iter(|| black_box(map_range(reps, cell)))
        });
        g.bench_with_input(BenchmarkId::new("sequential", &id), &16, |b, &reps| {
            b.iter(|| black_box(map_range_seq(reps, cell)))
        });
    }
    g.finish();
}

fn net_forward(c: &mut Criterion) {
    let net = SparseReluNet::init_connected(vec![1, 32, 32, 1], 400, 2.0, Seed(3)).unwrap();
    let latents = sample_latent(LatentSpec { dim: 1 }, 1 << 16, Seed(4));
    const CHUNK: usize = 4096;
    let chunks = latents.len() / CHUNK;
    let eval = |k: usize| net.forward_batch(&latents[k * CHUNK..(k + 1) * CHUNK]).unwrap();
    let mut g = c.benchmark_group("net_forward");
    g.sample_size(10);
    g.bench_function("parallel", |b| b.iter(|| black_box(map_range(chunks, eval))));
    g.bench_function("sequential", |b| b.iter(|| black_box(map_range_seq(chunks, eval))));
    g.finish();
}

criterion_group!(benches, rate_cells, net_forward);
criterion_main!(benches);
