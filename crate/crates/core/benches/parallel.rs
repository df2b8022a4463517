use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use kbmano::exec::{self, Execution};
use kbmano::harness::{run_experiment, sweep_group_size, ExperimentConfig, SweepConfig};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn smoke(c: &mut Criterion) {
    let mut group = c.benchmark_group("smoke_experiment");
    group.sample_size(10);
    for (label, execution) in MODES {
        let mut config = ExperimentConfig::smoke();
        config.env.horizon = 300;
        config.execution = execution;
        group.bench_with_input(BenchmarkId::from_parameter(label), &config, |b, cfg| {
            b.iter(|| run_experiment(cfg).unwrap())
        });
    }
    group.finish();
}

fn sweep(c: &mut Criterion) {
    let mut group = c.benchmark_group("group_size_sweep");
    group.sample_size(10);
    for (label, execution) in MODES {
        let config = SweepConfig {
            horizon: 200,
            seeds: vec![1, 2],
            execution,
            ..SweepConfig::default()
        };
        group.bench_with_input(BenchmarkId::from_parameter(label), &config, |b, cfg| {
            b.iter(|| sweep_group_size(cfg, &[2, 3, 4], &[6, 8]).unwrap())
        });
    }
    group.finish();
}

fn raw_map(c: &mut Criterion) {
    let mut group = c.benchmark_group("map");
    let items: Vec<u64> = (0..4096).collect();
    for (label, execution) in MODES {
        group.bench_function(label, |b| {
            b.iter(|| {
                exec::map(execution, items.clone(), |x| {
                    (0..200u64).fold(x, |acc, i| acc.wrapping_mul(6364136223846793005).wrapping_add(i))
                })
            })
        });
    }
    group.finish();
}

criterion_group!(benches, smoke, sweep, raw_map);
criterion_main!(benches);
