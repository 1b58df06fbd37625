use criterion::{black_box, criterion_group, criterion_main, Criterion};
use pbiharm_core::discrete::{default_init, oracle_p2, projected_gradient_lambda1, DescentConfig, DiscreteProblem};
use pbiharm_core::shoot::integrate;
use pbiharm_core::spectrum::enumerate_unverified;
use pbiharm_core::{Exponent, ProblemSpec, ShootConfig, WeightSpec};

fn shooting(c: &mut Criterion) {
    let w = WeightSpec::cosine(1);
    let e = Exponent::new(2.5).unwrap();
    let cfg = ShootConfig::default();
    c.bench_function("integrate cosine p=2.5", |b| {
        b.iter(|| integrate(black_box(2.0e4), black_box(-3.0), &w, e, &cfg).unwrap())
    });
}

fn oracle(c: &mut Criterion) {
    let prob = DiscreteProblem::from_weight(&WeightSpec::cosine(1), 199, Exponent::new(2.0).unwrap()).unwrap();
    c.bench_function("oracle_p2 cosine n=199", |b| b.iter(|| oracle_p2(black_box(&prob)).unwrap()));
}

fn descent(c: &mut Criterion) {
    let prob = DiscreteProblem::from_weight(&WeightSpec::cosine(1), 99, Exponent::new(2.5).unwrap()).unwrap();
    let init = default_init(&prob);
    let cfg = DescentConfig::default();
    c.bench_function("projected gradient cosine n=99 p=2.5", |b| {
        b.iter(|| projected_gradient_lambda1(black_box(&prob), &init, &cfg).unwrap())
    });
}

fn table(c: &mut Criterion) {
    let spec = ProblemSpec::new(2.5, WeightSpec::cosine(1));
    let mut group = c.benchmark_group("enumerate");
    group.sample_size(10);
    group.bench_function("cosine p=2.5 k_max=2", |b| b.iter(|| enumerate_unverified(black_box(&spec), 2).unwrap()));
    group.finish();
}

criterion_group!(benches, shooting, oracle, descent, table);
criterion_main!(benches);
