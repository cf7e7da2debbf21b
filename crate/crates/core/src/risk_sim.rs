//! Monte Carlo risk of radial shrinkage estimators under quadratic loss, with common
//! random numbers against `X` itself.
//!
//! Draws are keyed by `(seed, θ index, block index)`: each block of `block_size`
//! observations owns its own ChaCha8 stream, and block statistics are merged in block
//! order. The estimates are therefore bit-identical for any thread count.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::ExecPolicy;
use crate::numerics::{self, integrate, integrate_semi_infinite, sphere_surface, QuadratureSpec};
use crate::radial_models::RadialDensity;
use crate::rv_priors::{PriorSpec, RadialPrior};
use crate::shrinkage::{GbProfile, RadialMultiplier, ShrinkageProfile};

/// Knots in the inverse-CDF table, not counting the origin.
pub const TABLE_POINTS: usize = 4096;
pub const DEFAULT_BLOCK: usize = 1024;
/// Multiplier of the standard error in every verdict.
pub const SIGMA_RULE: f64 = 3.0;
/// Asymptotic two-sided Kolmogorov–Smirnov critical value at level 0.01, times `√n`.
pub const KS_CRIT_001: f64 = 1.628;

const SURVIVAL_FLOOR: f64 = 1e-17;

fn ln_radial_density(model: &RadialDensity, r: f64) -> f64 {
    let p = model.dimension() as f64;
    sphere_surface(model.dimension()).ln() + (p - 1.0) * r.ln() + model.log_density(r)
}

fn cdf_spec() -> QuadratureSpec {
    QuadratureSpec::new(1e-300, 1e-13)
}

/// `P(‖X − θ‖ ≤ r)` by direct quadrature.
pub fn radial_cdf(model: &RadialDensity, r: f64) -> Result<f64> {
    if r <= 0.0 {
        return Ok(0.0);
    }
    let f = |t: f64| {
        if t == 0.0 {
            0.0
        } else {
            ln_radial_density(model, t).exp()
        }
    };
    Ok(integrate(f, 0.0, r, &cdf_spec().with_hints([model.scale()]))?.value)
}

/// `P(‖X − θ‖ > r)` by direct quadrature.
pub fn radial_survival(model: &RadialDensity, r: f64) -> Result<f64> {
    let f = |t: f64| {
        if t == 0.0 {
            0.0
        } else {
            ln_radial_density(model, t).exp()
        }
    };
    Ok(integrate_semi_infinite(f, r, model.decay_class(), &cdf_spec())?.value)
}

/// CDF values at ascending radii, accumulated segment by segment.
pub fn radial_cdf_sorted(model: &RadialDensity, rs: &[f64]) -> Result<Vec<f64>> {
    let f = |t: f64| {
        if t == 0.0 {
            0.0
        } else {
            ln_radial_density(model, t).exp()
        }
    };
    let mut out = Vec::with_capacity(rs.len());
    let mut acc = 0.0;
    let mut prev = 0.0;
    for &r in rs {
        if r < prev {
            return Err(Error::Domain("radii must be ascending".into()));
        }
        if r > prev {
            acc += integrate(f, prev, r, &cdf_spec())?.value;
        }
        out.push(acc);
        prev = r;
    }
    Ok(out)
}

/// Inverse-CDF sampler for the radial law `c_p r^{p−1} f(r)`.
///
/// The CDF is tabulated on a geometric grid and interpolated by cubic Hermite pieces
/// with exact slopes; inversion solves the cubic on the located segment.
#[derive(Debug, Clone)]
pub struct RadialSampler {
    r: Vec<f64>,
    c: Vec<f64>,
    d: Vec<f64>,
    /// Local power `d ln C / d ln r` at the first knot.
    head_power: f64,
}

impl RadialSampler {
    pub fn new(model: &RadialDensity) -> Result<Self> {
        Self::with_points(model, TABLE_POINTS)
    }

    pub fn with_points(model: &RadialDensity, points: usize) -> Result<Self> {
        let lo = 1e-6 * model.scale();
        let mut hi = model.effective_support();
        while radial_survival(model, hi)? > SURVIVAL_FLOOR {
            hi *= 2.0;
            if !hi.is_finite() {
                return Err(Error::InvalidModel("radial law has no usable tail".into()));
            }
        }
        let r = numerics::geometric_grid(lo, hi, points.max(16));
        let c = radial_cdf_sorted(model, &r)?;
        let d: Vec<f64> = r
            .iter()
            .map(|&t| ln_radial_density(model, t).exp())
            .collect();
        if c.iter().any(|v| !v.is_finite()) || !(c[c.len() - 1] > 0.0) {
            return Err(Error::InvalidModel("radial CDF table is not finite".into()));
        }
        let head_power = if c[0] > 0.0 {
            d[0] * r[0] / c[0]
        } else {
            model.dimension() as f64
        };
        Ok(Self {
            r,
            c,
            d,
            head_power,
        })
    }

    pub fn knots(&self) -> &[f64] {
        &self.r
    }

    pub fn cdf_values(&self) -> &[f64] {
        &self.c
    }

    /// Interpolated CDF.
    pub fn cdf(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        if r <= self.r[0] {
            return self.c[0] * (r / self.r[0]).powf(self.head_power);
        }
        let n = self.r.len();
        if r >= self.r[n - 1] {
            return self.c[n - 1];
        }
        let j = self.r.partition_point(|&x| x <= r) - 1;
        self.hermite(j, (r - self.r[j]) / (self.r[j + 1] - self.r[j]))
            .0
    }

    fn hermite(&self, j: usize, t: f64) -> (f64, f64) {
        let h = self.r[j + 1] - self.r[j];
        let (c0, c1, d0, d1) = (self.c[j], self.c[j + 1], self.d[j] * h, self.d[j + 1] * h);
        let t2 = t * t;
        let t3 = t2 * t;
        let v = (2.0 * t3 - 3.0 * t2 + 1.0) * c0
            + (t3 - 2.0 * t2 + t) * d0
            + (-2.0 * t3 + 3.0 * t2) * c1
            + (t3 - t2) * d1;
        let dv = (6.0 * t2 - 6.0 * t) * c0
            + (3.0 * t2 - 4.0 * t + 1.0) * d0
            + (-6.0 * t2 + 6.0 * t) * c1
            + (3.0 * t2 - 2.0 * t) * d1;
        (v, dv)
    }

    /// Radius with CDF `u`; nondecreasing in `u`, 0 at `u = 0`.
    pub fn sample_radius(&self, u: f64) -> f64 {
        if !(u > 0.0) {
            return 0.0;
        }
        if u <= self.c[0] {
            return self.r[0] * (u / self.c[0]).powf(1.0 / self.head_power);
        }
        let n = self.r.len();
        if u >= self.c[n - 1] {
            return self.r[n - 1];
        }
        let j = self.c.partition_point(|&x| x <= u) - 1;
        // Safeguarded Newton on the Hermite piece.
        let (mut a, mut b) = (0.0, 1.0);
        let span = self.c[j + 1] - self.c[j];
        let mut t = if span > 0.0 {
            (u - self.c[j]) / span
        } else {
            0.5
        };
        for _ in 0..60 {
            let (v, dv) = self.hermite(j, t);
            let g = v - u;
            if g > 0.0 {
                b = t;
            } else {
                a = t;
            }
            let mut next = if dv > 0.0 { t - g / dv } else { f64::NAN };
            if !(next > a && next < b) {
                next = 0.5 * (a + b);
            }
            if (next - t).abs() <= 1e-15 {
                t = next;
                break;
            }
            t = next;
        }
        self.r[j] + t * (self.r[j + 1] - self.r[j])
    }
}

/// Uniform direction in `R^p` from normalized standard normals.
fn unit_vector<R: Rng>(rng: &mut R, out: &mut [f64]) {
    loop {
        let mut s = 0.0;
        for v in out.iter_mut() {
            *v = rng.sample(StandardNormal);
            s += *v * *v;
        }
        if s > 0.0 {
            let inv = s.sqrt().recip();
            out.iter_mut().for_each(|v| *v *= inv);
            return;
        }
    }
}

/// `θ + R·U` with `R` from the radial law and `U` uniform on the sphere.
pub fn sample_obs<R: Rng>(sampler: &RadialSampler, theta: &[f64], rng: &mut R) -> Vec<f64> {
    let mut u = vec![0.0; theta.len()];
    let radius = sampler.sample_radius(rng.random::<f64>());
    unit_vector(rng, &mut u);
    theta.iter().zip(&u).map(|(t, v)| t + radius * v).collect()
}

/// The ChaCha8 stream for one block of one `θ`.
pub fn block_rng(seed: u64, theta_index: usize, block: usize, lane: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((lane << 62) | ((theta_index as u64) << 32) | block as u64);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EstimatorSpec {
    Identity,
    HarmonicBayes,
    GeneralizedBayes { prior: PriorSpec },
    ConstantMultiplier { c: f64 },
}

impl EstimatorSpec {
    pub fn label(&self) -> String {
        match self {
            EstimatorSpec::Identity => "identity".into(),
            EstimatorSpec::HarmonicBayes => "harmonic_bayes".into(),
            EstimatorSpec::GeneralizedBayes { prior } => format!("generalized_bayes({prior})"),
            EstimatorSpec::ConstantMultiplier { c } => format!("constant_multiplier({c})"),
        }
    }
}

/// A built estimator, ready for repeated evaluation.
#[derive(Debug, Clone)]
pub enum Estimator {
    Identity,
    Harmonic(ShrinkageProfile),
    Generalized(GbProfile),
    Constant(f64),
}

impl Estimator {
    pub fn build(spec: &EstimatorSpec, model: &RadialDensity, policy: ExecPolicy) -> Result<Self> {
        Ok(match spec {
            EstimatorSpec::Identity => Estimator::Identity,
            EstimatorSpec::HarmonicBayes => Estimator::Harmonic(ShrinkageProfile::new(model)?),
            EstimatorSpec::GeneralizedBayes { prior } => {
                let prior = RadialPrior::new(prior, model.dimension())?;
                Estimator::Generalized(GbProfile::new(&prior, model, policy)?)
            }
            EstimatorSpec::ConstantMultiplier { c } => Estimator::Constant(*c),
        })
    }
}

impl RadialMultiplier for Estimator {
    fn multiplier(&self, r: f64) -> f64 {
        match self {
            Estimator::Identity => 1.0,
            Estimator::Harmonic(p) => p.multiplier(r),
            Estimator::Generalized(g) => g.multiplier(r),
            Estimator::Constant(c) => *c,
        }
    }
}

/// Quadratic loss `(d − θ)'Q(d − θ)`; `None` means `Q = I`.
#[derive(Debug, Clone)]
pub struct Loss {
    chol_t: Option<DMatrix<f64>>,
    trace: f64,
    scalar: bool,
}

impl Loss {
    pub fn identity(p: usize) -> Self {
        Self {
            chol_t: None,
            trace: p as f64,
            scalar: true,
        }
    }

    /// Validates `q` as symmetric positive definite by a Cholesky factorization.
    pub fn new(q: DMatrix<f64>) -> Result<Self> {
        let p = q.nrows();
        if q.ncols() != p || p == 0 {
            return Err(Error::Config("loss matrix must be square".into()));
        }
        let asym = (&q - q.transpose()).abs().max();
        if asym > 1e-12 * q.abs().max() {
            return Err(Error::Config("loss matrix must be symmetric".into()));
        }
        let chol = q
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Config("loss matrix is not positive definite".into()))?;
        let diag = q.diagonal();
        let scalar = (0..p).all(|i| {
            (0..p).all(|j| {
                if i == j {
                    q[(i, j)] == diag[0]
                } else {
                    q[(i, j)] == 0.0
                }
            })
        });
        Ok(Self {
            chol_t: Some(chol.l().transpose()),
            trace: q.trace(),
            scalar,
        })
    }

    /// [`Loss::new`] from a row-major list of rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.len();
        if p == 0 || rows.iter().any(|r| r.len() != p) {
            return Err(Error::Config("loss matrix must be square".into()));
        }
        Self::new(DMatrix::from_row_iterator(
            p,
            p,
            rows.iter().flatten().copied(),
        ))
    }

    pub fn trace(&self) -> f64 {
        self.trace
    }

    /// Whether `Q = qI`, so that risk depends on `‖θ‖` only.
    pub fn is_scalar(&self) -> bool {
        self.scalar
    }

    pub fn eval(&self, e: &[f64]) -> f64 {
        match &self.chol_t {
            None => e.iter().map(|v| v * v).sum(),
            Some(lt) => (lt * DVector::from_column_slice(e)).norm_squared(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RiskConfig {
    pub estimator: EstimatorSpec,
    pub theta_norms: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
    pub loss: Option<Loss>,
    /// Direction of `θ`; defaults to `e₁`.
    pub direction: Option<Vec<f64>>,
    pub paired: bool,
    pub block_size: usize,
    pub policy: ExecPolicy,
}

impl RiskConfig {
    pub fn new(estimator: EstimatorSpec, theta_norms: Vec<f64>, samples: usize, seed: u64) -> Self {
        Self {
            estimator,
            theta_norms,
            samples,
            seed,
            loss: None,
            direction: None,
            paired: true,
            block_size: DEFAULT_BLOCK,
            policy: ExecPolicy::default(),
        }
    }
}

/// Running mean and sum of squared deviations; merged in a fixed order.
#[derive(Debug, Clone, Copy, Default)]
struct Stats {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Stats {
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let d = x - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (x - self.mean);
    }

    fn merge(&mut self, o: &Stats) {
        if o.n == 0.0 {
            return;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        self.mean += d * o.n / n;
        self.m2 += o.m2 + d * d * self.n * o.n / n;
        self.n = n;
    }

    fn std_error(&self) -> f64 {
        if self.n < 2.0 {
            return 0.0;
        }
        (self.m2.max(0.0) / (self.n - 1.0) / self.n).sqrt()
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct BlockStats {
    est: Stats,
    base: Stats,
    diff: Stats,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskEntry {
    pub theta_norm: f64,
    pub risk_estimate: f64,
    pub std_error: f64,
    /// `tr(Q) E₀‖X‖²/p`; `None` when the second moment diverges.
    pub baseline_risk: Option<f64>,
    /// Empirical risk of `X` on the comparison draws.
    pub x_risk_estimate: f64,
    pub x_std_error: f64,
    pub paired_diff_estimate: f64,
    pub paired_diff_std_error: f64,
    /// Standard error the difference would have with independent draws.
    pub unpaired_diff_std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskCurve {
    pub entries: Vec<RiskEntry>,
    pub seed: u64,
    pub samples: usize,
    pub model: String,
    pub estimator: String,
    pub paired: bool,
    /// True for non-scalar `Q`, where the risk depends on the direction of `θ`.
    pub direction_specific: bool,
}

/// Estimates `R(θ, δ)` and `R(θ, δ) − R(θ, X)` at each `‖θ‖`.
pub fn estimate_risk(model: &RadialDensity, config: &RiskConfig) -> Result<RiskCurve> {
    let estimator = Estimator::build(&config.estimator, model, config.policy)?;
    let sampler = RadialSampler::new(model)?;
    estimate_risk_with(model, &sampler, &estimator, config)
}

/// [`estimate_risk`] with a prebuilt sampler and estimator.
pub fn estimate_risk_with(
    model: &RadialDensity,
    sampler: &RadialSampler,
    estimator: &dyn RadialMultiplier,
    config: &RiskConfig,
) -> Result<RiskCurve> {
    let p = model.dimension();
    if config.samples < 1 {
        return Err(Error::Config("samples must be >= 1".into()));
    }
    if config.block_size < 1 {
        return Err(Error::Config("block_size must be >= 1".into()));
    }
    if config
        .theta_norms
        .iter()
        .any(|t| !(t.is_finite() && *t >= 0.0))
    {
        return Err(Error::Config(
            "theta norms must be finite and nonnegative".into(),
        ));
    }
    let loss = config.loss.clone().unwrap_or_else(|| Loss::identity(p));
    if let Some(lt) = &loss.chol_t {
        if lt.nrows() != p {
            return Err(Error::Config(format!("loss matrix must be {p}x{p}")));
        }
    }
    let direction = match &config.direction {
        None => {
            let mut e = vec![0.0; p];
            e[0] = 1.0;
            e
        }
        Some(d) => {
            let n = d.iter().map(|v| v * v).sum::<f64>().sqrt();
            if d.len() != p || !(n > 0.0) || !n.is_finite() {
                return Err(Error::Config(format!(
                    "direction must be a nonzero vector of length {p}"
                )));
            }
            d.iter().map(|v| v / n).collect()
        }
    };
    let baseline = model.moment(2.0).ok().map(|m| loss.trace() * m / p as f64);

    let blocks = config.samples.div_ceil(config.block_size);
    let jobs: Vec<(usize, usize)> = (0..config.theta_norms.len())
        .flat_map(|i| (0..blocks).map(move |b| (i, b)))
        .collect();
    let run = |&(ti, b): &(usize, usize)| -> BlockStats {
        let n = config
            .block_size
            .min(config.samples - b * config.block_size);
        let theta: Vec<f64> = direction
            .iter()
            .map(|d| d * config.theta_norms[ti])
            .collect();
        let mut rng = block_rng(config.seed, ti, b, 0);
        let mut alt = (!config.paired).then(|| block_rng(config.seed, ti, b, 1));
        let mut u = vec![0.0; p];
        let mut err = vec![0.0; p];
        let mut out = BlockStats::default();
        for _ in 0..n {
            let radius = sampler.sample_radius(rng.random::<f64>());
            unit_vector(&mut rng, &mut u);
            let mut xn2 = 0.0;
            for k in 0..p {
                let x = theta[k] + radius * u[k];
                xn2 += x * x;
            }
            let kappa = if xn2 > 0.0 {
                estimator.multiplier(xn2.sqrt())
            } else {
                0.0
            };
            for k in 0..p {
                err[k] = (kappa - 1.0) * theta[k] + kappa * (radius * u[k]);
            }
            let l_est = loss.eval(&err);
            let l_base = match alt.as_mut() {
                None => {
                    u.iter_mut().for_each(|v| *v *= radius);
                    loss.eval(&u)
                }
                Some(rng2) => {
                    let r2 = sampler.sample_radius(rng2.random::<f64>());
                    unit_vector(rng2, &mut u);
                    u.iter_mut().for_each(|v| *v *= r2);
                    loss.eval(&u)
                }
            };
            out.est.push(l_est);
            out.base.push(l_base);
            out.diff.push(l_est - l_base);
        }
        out
    };
    let results = config.policy.map(&jobs, run);

    let mut entries = Vec::with_capacity(config.theta_norms.len());
    for (ti, &tn) in config.theta_norms.iter().enumerate() {
        let mut acc = BlockStats::default();
        for s in &results[ti * blocks..(ti + 1) * blocks] {
            acc.est.merge(&s.est);
            acc.base.merge(&s.base);
            acc.diff.merge(&s.diff);
        }
        let (se, sx) = (acc.est.std_error(), acc.base.std_error());
        let unpaired = (se * se + sx * sx).sqrt();
        let (diff, diff_se) = if config.paired {
            (acc.diff.mean, acc.diff.std_error())
        } else {
            (acc.est.mean - acc.base.mean, unpaired)
        };
        entries.push(RiskEntry {
            theta_norm: tn,
            risk_estimate: acc.est.mean,
            std_error: se,
            baseline_risk: baseline,
            x_risk_estimate: acc.base.mean,
            x_std_error: sx,
            paired_diff_estimate: diff,
            paired_diff_std_error: diff_se,
            unpaired_diff_std_error: unpaired,
        });
    }
    Ok(RiskCurve {
        entries,
        seed: config.seed,
        samples: config.samples,
        model: model.id(),
        estimator: config.estimator.label(),
        paired: config.paired,
        direction_specific: !loss.is_scalar(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Dominance {
    Dominates,
    ViolationAt(f64),
    Inconclusive,
}

/// Verdict for one `θ` under the three-sigma rule.
pub fn entry_verdict(e: &RiskEntry) -> &'static str {
    let (d, s) = (e.paired_diff_estimate, SIGMA_RULE * e.paired_diff_std_error);
    if d - s > 0.0 {
        "worse"
    } else if d + s < 0.0 {
        "better"
    } else {
        "tie"
    }
}

/// Dominance over `X` across the curve: no significant loss anywhere and at least one
/// significant win.
pub fn dominance_report(curve: &RiskCurve) -> Result<Dominance> {
    if !curve.paired {
        return Err(Error::Config(
            "dominance_report needs a paired curve".into(),
        ));
    }
    let mut any_win = false;
    for e in &curve.entries {
        match entry_verdict(e) {
            "worse" => return Ok(Dominance::ViolationAt(e.theta_norm)),
            "better" => any_win = true,
            _ => {}
        }
    }
    Ok(if any_win {
        Dominance::Dominates
    } else {
        Dominance::Inconclusive
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KsResult {
    pub n: usize,
    pub statistic: f64,
    pub critical_value: f64,
    pub passed: bool,
}

/// Two-sided KS statistic of sorted samples against CDF values at those samples.
pub fn ks_statistic(cdf_at_sorted: &[f64]) -> f64 {
    let n = cdf_at_sorted.len() as f64;
    cdf_at_sorted
        .iter()
        .enumerate()
        .map(|(i, &f)| {
            let i = i as f64;
            ((i + 1.0) / n - f).max(f - i / n)
        })
        .fold(0.0, f64::max)
}

/// KS test of `n` sampled radii against the quadrature CDF at level 0.01.
pub fn ks_radius_test(
    model: &RadialDensity,
    sampler: &RadialSampler,
    n: usize,
    seed: u64,
) -> Result<KsResult> {
    let mut rng = block_rng(seed, 0, 0, 2);
    let mut rs: Vec<f64> = (0..n)
        .map(|_| sampler.sample_radius(rng.random::<f64>()))
        .collect();
    rs.sort_by(f64::total_cmp);
    let cdf = radial_cdf_sorted(model, &rs)?;
    let statistic = ks_statistic(&cdf);
    let critical_value = KS_CRIT_001 / (n as f64).sqrt();
    Ok(KsResult {
        n,
        statistic,
        critical_value,
        passed: statistic < critical_value,
    })
}
