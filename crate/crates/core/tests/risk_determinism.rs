use sphereshrink::radial_models::{Family, RadialDensity};
use sphereshrink::risk_sim::{
    dominance_report, estimate_risk, Dominance, EstimatorSpec, Loss, RadialSampler, RiskConfig,
};
use sphereshrink::rv_priors::PriorSpec;

fn config() -> RiskConfig {
    let mut c = RiskConfig::new(
        EstimatorSpec::HarmonicBayes,
        vec![0.0, 2.0, 8.0],
        5000,
        1234,
    );
    c.block_size = 256;
    c
}

#[cfg(feature = "parallel")]
#[test]
fn bit_identical_across_thread_counts() {
    let m = RadialDensity::new(
        Family::PolyExp {
            alpha: 1.0,
            beta: 0.5,
        },
        4,
    )
    .unwrap();
    let mut seq = config();
    seq.policy = sphereshrink::exec::ExecPolicy::Sequential;
    let a = estimate_risk(&m, &seq).unwrap();
    for threads in [1, 3, 8] {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        let b = pool.install(|| estimate_risk(&m, &config()).unwrap());
        assert_eq!(a, b, "threads={threads}");
    }
}

#[test]
fn crn_reduces_variance_and_unpaired_runs() {
    let m = RadialDensity::gaussian(5);
    let curve = estimate_risk(&m, &config()).unwrap();
    for e in &curve.entries {
        assert!(e.paired_diff_std_error < e.unpaired_diff_std_error);
    }
    let mut c = config();
    c.paired = false;
    let unpaired = estimate_risk(&m, &c).unwrap();
    assert!(!unpaired.paired);
    assert!(dominance_report(&unpaired).is_err());
}

#[test]
fn baseline_matches_identity_risk_under_general_q() {
    let m = RadialDensity::new(Family::MixtureDiff { a: 0.5, b: 0.5 }, 3).unwrap();
    let q = nalgebra::DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.0, 0.3, 1.0, 0.1, 0.0, 0.1, 0.5]);
    let mut c = RiskConfig::new(EstimatorSpec::Identity, vec![0.0, 1.0, 5.0], 40_000, 5);
    c.loss = Some(Loss::new(q).unwrap());
    c.direction = Some(vec![1.0, 1.0, 0.0]);
    let curve = estimate_risk(&m, &c).unwrap();
    assert!(curve.direction_specific);
    for e in &curve.entries {
        let base = e.baseline_risk.unwrap();
        assert!((e.risk_estimate - base).abs() < 3.0 * e.std_error);
    }
}

#[test]
fn moments_of_sampled_observations() {
    let m = RadialDensity::new(
        Family::PolyExp {
            alpha: 2.0,
            beta: 0.5,
        },
        4,
    )
    .unwrap();
    let s = RadialSampler::new(&m).unwrap();
    let mut rng = sphereshrink::risk_sim::block_rng(3, 0, 0, 0);
    let theta = [1.0, -2.0, 0.5, 0.0];
    let n = 200_000;
    let mut mean = [0.0; 4];
    let mut sq = 0.0;
    let mut sq2 = 0.0;
    for _ in 0..n {
        let x = sphereshrink::risk_sim::sample_obs(&s, &theta, &mut rng);
        let d2: f64 = x.iter().zip(&theta).map(|(a, b)| (a - b) * (a - b)).sum();
        for k in 0..4 {
            mean[k] += x[k] / n as f64;
        }
        sq += d2;
        sq2 += d2 * d2;
    }
    let e2 = m.moment(2.0).unwrap();
    let m2 = sq / n as f64;
    let se = ((sq2 / n as f64 - m2 * m2) / n as f64).sqrt();
    assert!((m2 - e2).abs() < 4.0 * se);
    let coord_se = (e2 / 4.0 / n as f64).sqrt();
    for k in 0..4 {
        assert!((mean[k] - theta[k]).abs() < 4.0 * coord_se);
    }
}

#[test]
fn generalized_bayes_estimator_runs() {
    let m = RadialDensity::gaussian(3);
    let spec = EstimatorSpec::GeneralizedBayes {
        prior: PriorSpec::LogThickened { n: 0, c: 2.0 },
    };
    let c = RiskConfig::new(spec, vec![0.0, 3.0, 20.0], 20_000, 8);
    let curve = estimate_risk(&m, &c).unwrap();
    assert!(curve.entries[0].paired_diff_estimate < 0.0);
    assert!(!matches!(
        dominance_report(&curve).unwrap(),
        Dominance::ViolationAt(_)
    ));
}
