//! Sequential versus rayon execution of the data-parallel loops.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use diffinv::euler::IntegrationConfig;
use diffinv::exec::Execution;
use diffinv::inversion::{self, Algorithm, Problem, DEFAULT_FD_STEP};
use diffinv::linalg::StateVector;
use diffinv::ode::make_random_glv;

const POLICIES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn bench_fd_jacobian(c: &mut Criterion) {
    let cfg = IntegrationConfig::new(1.0, 200).unwrap();
    let mut group = c.benchmark_group("fd_jacobian_m200");
    group.sample_size(10);
    for n in [8, 16, 32] {
        let sys = make_random_glv(n, 2).unwrap();
        let x0 = StateVector::ones(n);
        for (name, exec) in POLICIES {
            group.bench_with_input(BenchmarkId::new(name, n), &n, |b, _| {
                b.iter(|| {
                    inversion::fd_jacobian_with(exec, &sys, &x0, &cfg, DEFAULT_FD_STEP).unwrap()
                })
            });
        }
    }
    group.finish();
}

fn bench_batch(c: &mut Criterion) {
    let cfg = IntegrationConfig::new(1.0, 200).unwrap();
    let problems: Vec<_> = (0..32)
        .map(|s| Problem {
            system: make_random_glv(12, s).unwrap(),
            x0: StateVector::ones(12),
            v: StateVector::ones(12),
            cfg,
        })
        .collect();
    let mut group = c.benchmark_group("batch_32x_n12");
    group.sample_size(10);
    for alg in Algorithm::ALL {
        for (name, exec) in POLICIES {
            group.bench_function(BenchmarkId::new(alg.name(), name), |b| {
                b.iter(|| inversion::invert_batch(exec, alg, &problems))
            });
        }
    }
    group.finish();
}

criterion_group!(benches, bench_fd_jacobian, bench_batch);
criterion_main!(benches);
