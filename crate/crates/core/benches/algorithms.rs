use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use diffinv::euler::IntegrationConfig;
use diffinv::inversion::{self, Algorithm};
use diffinv::linalg::StateVector;
use diffinv::ode::make_random_glv;

fn bench_algorithms(c: &mut Criterion) {
    let cfg = IntegrationConfig::new(1.0, 100).unwrap();
    let mut group = c.benchmark_group("diffinv_m100");
    group.sample_size(10);
    for n in [4, 8, 16, 32] {
        let sys = make_random_glv(n, 1).unwrap();
        let x0 = StateVector::ones(n);
        for alg in Algorithm::ALL {
            group.bench_with_input(BenchmarkId::new(alg.name(), n), &n, |b, _| {
                b.iter(|| inversion::diffinv(alg, &sys, &x0, &x0, &cfg).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, bench_algorithms);
criterion_main!(benches);
