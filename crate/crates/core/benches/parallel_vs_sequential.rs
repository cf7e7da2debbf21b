use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use sphereshrink::exec::ExecPolicy;
use sphereshrink::radial_models::RadialDensity;
use sphereshrink::risk_sim::{
    estimate_risk_with, Estimator, EstimatorSpec, RadialSampler, RiskConfig,
};
use sphereshrink::rv_priors::{PriorSpec, RadialPrior};
use sphereshrink::shrinkage::GbProfile;

fn risk(c: &mut Criterion) {
    let model = RadialDensity::gaussian(5);
    let sampler = RadialSampler::new(&model).unwrap();
    let est = Estimator::build(
        &EstimatorSpec::HarmonicBayes,
        &model,
        ExecPolicy::Sequential,
    )
    .unwrap();
    let mut group = c.benchmark_group("risk_curve");
    group.sample_size(10);
    for policy in [ExecPolicy::Sequential, ExecPolicy::Parallel] {
        let mut cfg = RiskConfig::new(
            EstimatorSpec::HarmonicBayes,
            (0..=10).map(f64::from).collect(),
            20_000,
            42,
        );
        cfg.policy = policy;
        group.bench_with_input(
            BenchmarkId::from_parameter(format!("{policy:?}")),
            &cfg,
            |b, cfg| b.iter(|| estimate_risk_with(&model, &sampler, &est, cfg).unwrap()),
        );
    }
    group.finish();
}

fn gb_profile(c: &mut Criterion) {
    let model = RadialDensity::gaussian(3);
    let prior = RadialPrior::new(&PriorSpec::LogThickened { n: 0, c: 2.0 }, 3).unwrap();
    let mut group = c.benchmark_group("gb_profile");
    group.sample_size(10);
    for policy in [ExecPolicy::Sequential, ExecPolicy::Parallel] {
        group.bench_function(format!("{policy:?}"), |b| {
            b.iter(|| GbProfile::new(&prior, &model, policy).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, risk, gb_profile);
criterion_main!(benches);
