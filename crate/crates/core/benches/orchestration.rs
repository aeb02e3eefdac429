use std::hint::black_box;
use std::time::Duration;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use viso_pc::bench::{generate_benchmark, BenchmarkSpec, DEFAULT_SEED};
use viso_pc::exec::Execution;
use viso_pc::model::{Instance, Split};
use viso_pc::orchestrator::{run_method, MethodConfig};
use viso_pc::router::{build_memory, RouterKind, RuleConfig};
use viso_pc::solvers::{oracle_grid_search, Portfolio, SolverConfig};
use viso_pc::verifier::VerifierConfig;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn methods(c: &mut Criterion) {
    let instances = generate_benchmark(&BenchmarkSpec::new(DEFAULT_SEED)).expect("default benchmark");
    let train: Vec<Instance> = instances.iter().filter(|i| i.split == Split::Train).cloned().collect();
    let portfolio = Portfolio::new(SolverConfig::default());
    let cfg = MethodConfig::new(RuleConfig::from_train(&train).expect("train split"));
    let memory = build_memory(&train, &portfolio, &VerifierConfig::default(), Execution::Parallel).expect("memory");

    let mut group = c.benchmark_group("run_method");
    group.sample_size(10).measurement_time(Duration::from_secs(10));
    for kind in [RouterKind::AlwaysFast, RouterKind::AlwaysExact, RouterKind::Rule, RouterKind::Agent] {
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(kind.slug(), name), &exec, |b, &exec| {
                b.iter(|| run_method(black_box(&instances), kind, Some(&memory), &portfolio, &cfg, exec).unwrap())
            });
        }
    }
    group.finish();
}

fn oracle_sweep(c: &mut Criterion) {
    let g = [[0.9, 0.4], [0.3, 1.1]];
    let instances: Vec<Instance> = (0..16)
        .map(|i| {
            let s = 1.0 + 0.05 * i as f64;
            let gains = g.iter().map(|row| row.iter().map(|v| v * s).collect()).collect();
            Instance::from_parts(&format!("o{i}"), Split::Test, gains, vec![1.0, 0.5 * s], 0.1, 0.0).unwrap()
        })
        .collect();

    let mut group = c.benchmark_group("oracle_sweep");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(name, |b| {
            b.iter(|| exec.map(black_box(&instances), |i| oracle_grid_search(i, 64).unwrap().1))
        });
    }
    group.finish();
}

criterion_group!(benches, methods, oracle_sweep);
criterion_main!(benches);
