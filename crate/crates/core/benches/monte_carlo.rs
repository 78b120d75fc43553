use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use rwre_core::ctmc::{simulate_jump_process, JumpOptions};
use rwre_core::diffusion::{integrate, EulerOptions};
use rwre_core::environment::{parse_continuous, parse_discrete};
use rwre_core::walk::sample_trajectories;
use rwre_core::{ContinuousEnvironment, DiscreteEnvironment, Threads};

const POLICIES: [(&str, Threads); 2] = [("serial", Threads::Fixed(1)), ("parallel", Threads::Auto)];

fn walk(c: &mut Criterion) {
    let env = DiscreteEnvironment::new(parse_discrete("iid-two-point:1,2,0.5").unwrap(), 1).unwrap();
    let mut group = c.benchmark_group("walk_2000_streams_1000_steps");
    for (name, threads) in POLICIES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| sample_trajectories(&env, &[1000], 2000, 7, threads).unwrap())
        });
    }
    group.finish();
}

fn jump_process(c: &mut Criterion) {
    let env = DiscreteEnvironment::new(parse_discrete("iid-two-point:1,2,0.5").unwrap(), 1).unwrap();
    let mut group = c.benchmark_group("ctmc_2000_streams_t100");
    for (name, threads) in POLICIES {
        let options = JumpOptions {
            streams: 2000,
            seed: 7,
            threads,
            ..JumpOptions::default()
        };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| simulate_jump_process(&env, &[100.0], &options).unwrap())
        });
    }
    group.finish();
}

fn diffusion(c: &mut Criterion) {
    let env = ContinuousEnvironment::new(parse_continuous("flow:2,0,1/1,0,0/0").unwrap(), 0).unwrap();
    let mut group = c.benchmark_group("diffusion_500_streams_t1_dt1e-3");
    for (name, threads) in POLICIES {
        let options = EulerOptions {
            streams: 500,
            seed: 7,
            threads,
            ..EulerOptions::default()
        };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| integrate(&env, 1e-3, &[1.0], &options).unwrap())
        });
    }
    group.finish();
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = walk, jump_process, diffusion
}
criterion_main!(benches);
