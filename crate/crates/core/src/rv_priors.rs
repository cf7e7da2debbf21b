//! Regularly varying radial priors, the `β` kernels and `H_i` sequences used to build
//! proper approximations to them, and numerical diagnostics for admissibility.

use std::f64::consts::LN_10;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::ExecPolicy;
use crate::numerics::{self, integrate, integrate_semi_infinite, DecayClass, QuadratureSpec};
use crate::radial_models::RadialDensity;

/// Upper end of the log-scale diagnostics, `ln(1e300)`.
pub const DIAGNOSTIC_U_MAX: f64 = 300.0 * LN_10;
/// Fitted tail index at or below which a diagnostic integral is called divergent.
pub const DIVERGE_INDEX: f64 = 1.2;
/// Fitted tail index at or above which convergence may be declared.
pub const CONVERGE_INDEX: f64 = 1.3;
/// Largest share of the running total the last decade may contribute for convergence.
pub const CONVERGE_INCREMENT: f64 = 1e-4;
/// Two estimated indices closer than this are treated as equal.
pub const INDEX_MATCH_TOL: f64 = 0.1;

/// `ln(e^u + c)` without forming `e^u` when it is huge.
fn ln_shifted(u: f64, c: f64) -> f64 {
    if u > 30.0 {
        u + (c * (-u).exp()).ln_1p()
    } else {
        (u.exp() + c).ln()
    }
}

/// `Log_1 … Log_m` at a point whose logarithm is `log1`.
fn tower_values(log1: f64, m: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(m);
    let mut cur = log1;
    for i in 0..m {
        if i > 0 {
            cur = cur.ln();
        }
        out.push(cur);
    }
    out
}

/// `q_i = d ln Log_i(x)/dx = 1/(x Log_1 ⋯ Log_i)` for `i = 1..=m`.
fn tower_log_derivs(x: f64, logs: &[f64]) -> Vec<f64> {
    let mut prod = x;
    logs.iter()
        .map(|l| {
            prod *= l;
            1.0 / prod
        })
        .collect()
}

/// Iterated logarithm `Log_n(· + c)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogTower {
    pub n: usize,
    pub c: f64,
}

impl LogTower {
    pub fn new(n: usize, c: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidPrior("log tower depth must be >= 1".into()));
        }
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::InvalidPrior(format!(
                "tower shift c must be positive, got {c}"
            )));
        }
        let top = tower_values(c.ln(), n)[n - 1];
        if !(top > 0.0) {
            return Err(Error::InvalidPrior(format!(
                "Log_{n}({c}) = {top} is not positive"
            )));
        }
        Ok(Self { n, c })
    }

    /// The smallest shift with `Log_n(c) = 1`: `e`, `e^e`, `e^{e^e}`, ...
    pub fn canonical(n: usize) -> Self {
        let mut c = 1.0f64;
        for _ in 0..n {
            c = c.exp();
        }
        Self::new(n, c).expect("canonical shift is valid")
    }

    fn logs(&self, eta: f64) -> Vec<f64> {
        tower_values((eta + self.c).ln(), self.n)
    }

    fn logs_u(&self, u: f64) -> Vec<f64> {
        tower_values(ln_shifted(u, self.c), self.n)
    }
}

/// `β(η) = 1/((η+c) Log_n²(η+c) Π_{i<n} Log_i(η+c))`, with tail `∫_η^∞ β = 1/Log_n(η+c)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaKernel {
    pub tower: LogTower,
}

impl BetaKernel {
    pub fn new(n: usize, c: f64) -> Result<Self> {
        Ok(Self {
            tower: LogTower::new(n, c)?,
        })
    }

    fn ln_beta_from(logs: &[f64], ln_x: f64) -> f64 {
        let n = logs.len();
        -(ln_x + 2.0 * logs[n - 1].ln() + logs[..n - 1].iter().map(|l| l.ln()).sum::<f64>())
    }

    pub fn ln_beta(&self, eta: f64) -> f64 {
        let x = eta + self.tower.c;
        Self::ln_beta_from(&self.tower.logs(eta), x.ln())
    }

    /// `ln β(e^u)`.
    pub fn ln_beta_u(&self, u: f64) -> f64 {
        let ln_x = ln_shifted(u, self.tower.c);
        Self::ln_beta_from(&tower_values(ln_x, self.tower.n), ln_x)
    }

    pub fn beta(&self, eta: f64) -> f64 {
        self.ln_beta(eta).exp()
    }

    pub fn tail(&self, eta: f64) -> f64 {
        1.0 / self.tower.logs(eta)[self.tower.n - 1]
    }

    pub fn ln_tail(&self, eta: f64) -> f64 {
        -self.tower.logs(eta)[self.tower.n - 1].ln()
    }

    pub fn ln_tail_u(&self, u: f64) -> f64 {
        -self.tower.logs_u(u)[self.tower.n - 1].ln()
    }

    /// `β′(η)/β(η) = −(1/x + 2q_n + Σ_{i<n} q_i)`.
    pub fn beta_log_deriv(&self, eta: f64) -> f64 {
        let x = eta + self.tower.c;
        let logs = self.tower.logs(eta);
        let q = tower_log_derivs(x, &logs);
        let n = q.len();
        -(1.0 / x + 2.0 * q[n - 1] + q[..n - 1].iter().sum::<f64>())
    }

    pub fn beta_prime(&self, eta: f64) -> f64 {
        self.beta(eta) * self.beta_log_deriv(eta)
    }
}

/// `H_i(η) = ∫_η^∞ e^{(η−r)/i} β(r) dr / ∫_η^∞ β(r) dr`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HSequence {
    pub kernel: BetaKernel,
    pub i: u64,
}

/// Pieces of `H_i` and `H_i′` at one point, scaled by `β(η)`.
#[derive(Debug, Clone, Copy)]
struct HParts {
    beta: f64,
    tail: f64,
    // ∫₀^∞ e^{−v/i} β(η+v) dv / β(η)
    num: f64,
    // ∫₀^∞ e^{−v/i} (−β′(η+v)) dv / β(η)
    dnum: f64,
}

impl HSequence {
    pub fn new(kernel: BetaKernel, i: u64) -> Result<Self> {
        if i == 0 {
            return Err(Error::Domain("sequence index i must be >= 1".into()));
        }
        Ok(Self { kernel, i })
    }

    fn spec(&self) -> QuadratureSpec {
        QuadratureSpec::relative(1e-13).with_hints([self.kernel.tower.c, self.i as f64])
    }

    fn num_ratio(&self, eta: f64) -> Result<f64> {
        let lb = self.kernel.ln_beta(eta);
        let inv_i = 1.0 / self.i as f64;
        let res = integrate_semi_infinite(
            |v: f64| (-v * inv_i + self.kernel.ln_beta(eta + v) - lb).exp(),
            0.0,
            DecayClass::Exponential {
                scale: self.i as f64,
            },
            &self.spec(),
        )?;
        Ok(res.value)
    }

    fn parts(&self, eta: f64) -> Result<HParts> {
        if !(eta >= 0.0) {
            return Err(Error::Domain(format!("eta must be nonnegative, got {eta}")));
        }
        let lb = self.kernel.ln_beta(eta);
        let inv_i = 1.0 / self.i as f64;
        let dnum = integrate_semi_infinite(
            |v: f64| {
                let r = eta + v;
                -self.kernel.beta_log_deriv(r) * (-v * inv_i + self.kernel.ln_beta(r) - lb).exp()
            },
            0.0,
            DecayClass::Exponential {
                scale: self.i as f64,
            },
            &self.spec(),
        )?
        .value;
        Ok(HParts {
            beta: lb.exp(),
            tail: self.kernel.tail(eta),
            num: self.num_ratio(eta)?,
            dnum,
        })
    }

    pub fn ln_h(&self, eta: f64) -> Result<f64> {
        if !(eta >= 0.0) {
            return Err(Error::Domain(format!("eta must be nonnegative, got {eta}")));
        }
        Ok(self.num_ratio(eta)?.ln() + self.kernel.ln_beta(eta) - self.kernel.ln_tail(eta))
    }

    /// `ln H_i(e^u)`, usable far beyond the range where `H_i` is representable.
    pub fn ln_h_u(&self, u: f64) -> Result<f64> {
        let eta = u.exp();
        if eta.is_finite() && eta < 1e300 {
            return Ok(
                self.num_ratio(eta)?.ln() + self.kernel.ln_beta_u(u) - self.kernel.ln_tail_u(u)
            );
        }
        // β is flat over the e^{−v/i} window, so the numerator ratio equals i.
        Ok((self.i as f64).ln() + self.kernel.ln_beta_u(u) - self.kernel.ln_tail_u(u))
    }

    pub fn h_eval(&self, eta: f64) -> Result<f64> {
        Ok(self.ln_h(eta)?.exp())
    }

    /// `H_i′(η) = β(η)·N/T² − ∫ e^{(η−r)/i}(−β′(r)) dr / T`, with `N` the numerator of
    /// `H_i` and `T` the tail of `β`.
    pub fn h_derivative(&self, eta: f64) -> Result<f64> {
        let s = self.parts(eta)?;
        Ok(s.beta * (s.beta * s.num / (s.tail * s.tail) - s.dnum / s.tail))
    }

    /// `η H_i′(η)/H_i(η) = η(β/T − ∫e^{−r/i}(−β′)/∫e^{−r/i}β)`.
    pub fn h_log_derivative(&self, eta: f64) -> Result<f64> {
        let s = self.parts(eta)?;
        Ok(eta * (s.beta / s.tail - s.dnum / s.num))
    }
}

/// Tolerance on the ordering checks of the `H_i` suite.
pub const H_ORDER_TOL: f64 = 1e-12;
/// The `ε` used for the lower log-derivative bound `−1 − ε`.
pub const H_LOG_DERIV_EPS: f64 = 0.1;
/// Largest `η₀` the log-derivative search may settle on.
pub const H_ETA0_MAX: f64 = 1e8;
/// Index used to probe the `i → ∞` limits.
pub const H_LARGE_INDEX: u64 = 1_000_000_000_000;

/// One row of the `H_i` property suite.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HPropertyCheck {
    pub id: &'static str,
    pub property: String,
    pub passed: bool,
    /// Largest violation, or the deciding statistic for limit checks.
    pub worst: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HPropertyReport {
    pub kernel: BetaKernel,
    pub i_list: Vec<u64>,
    /// Smallest tested `η₀` past which the log-derivative bound holds for every `i`.
    pub eta0: Option<f64>,
    pub checks: Vec<HPropertyCheck>,
}

impl HPropertyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, id: &str) -> Option<&HPropertyCheck> {
        self.checks.iter().find(|c| c.id == id)
    }
}

/// Default `η` grid for the `H_i` suite: zero plus 41 geometric points on `[1e-2, 1e8]`.
pub fn default_h_grid() -> Vec<f64> {
    let mut g = vec![0.0];
    g.extend(numerics::geometric_grid(1e-2, 1e8, 41));
    g
}

fn row(
    id: &'static str,
    property: &str,
    passed: bool,
    worst: f64,
    detail: String,
) -> HPropertyCheck {
    HPropertyCheck {
        id,
        property: property.to_string(),
        passed,
        worst,
        detail,
    }
}

/// Checks the five properties of the `H_i` sequence.
///
/// The `i → ∞` limits are probed at `i = 10^k`, `k ≤ 12`, against the exact relation
/// `H_i′ = H_i/i − (β/T)(1 − H_i)` and the tail ratio `T(η+i)/T(η)`, which `1 − H_i(η)`
/// tracks for large `i`.
pub fn h_property_suite(
    kernel: &BetaKernel,
    i_list: &[u64],
    eta_grid: &[f64],
) -> Result<HPropertyReport> {
    if i_list.is_empty() || eta_grid.is_empty() {
        return Err(Error::Domain(
            "H suite needs nonempty index and eta lists".into(),
        ));
    }
    let mut i_sorted = i_list.to_vec();
    i_sorted.sort_unstable();
    i_sorted.dedup();
    let seqs: Vec<HSequence> = i_sorted
        .iter()
        .map(|&i| HSequence::new(*kernel, i))
        .collect::<Result<_>>()?;
    let policy = ExecPolicy::default();
    // (H, H′, ηH′/H) per grid point and index.
    let table: Vec<Vec<(f64, f64, f64)>> = policy.try_map(eta_grid, |&eta| {
        seqs.iter()
            .map(|s| {
                Ok((
                    s.h_eval(eta)?,
                    s.h_derivative(eta)?,
                    s.h_log_derivative(eta)?,
                ))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let mut checks = Vec::new();

    // Item 1: range and monotonicity in i.
    let mut worst = 0.0f64;
    let mut at = f64::NAN;
    for (eta, vals) in eta_grid.iter().zip(&table) {
        for (k, v) in vals.iter().enumerate() {
            let mut viol = (-v.0).max(v.0 - 1.0);
            if k > 0 {
                viol = viol.max(vals[k - 1].0 - v.0);
            }
            if viol > worst {
                worst = viol;
                at = *eta;
            }
        }
    }
    checks.push(row(
        "1.order",
        "0 <= H_i <= 1 and H_i nondecreasing in i",
        worst <= H_ORDER_TOL,
        worst,
        if worst > 0.0 {
            format!("largest violation at eta = {at:e}")
        } else {
            "no violation".into()
        },
    ));

    // Item 1: limit. 1 − H_i decreasing along i = 10^k and tracking T(η+i)/T(η).
    let probe_eta = [0.0, 1.0, 10.0];
    let ladder: Vec<u64> = (0..=12).map(|k| 10u64.pow(k)).collect();
    let ladder_vals: Vec<Vec<(f64, f64)>> = policy.try_map(&probe_eta, |&eta| {
        ladder
            .iter()
            .map(|&i| {
                let s = HSequence::new(*kernel, i)?;
                Ok((s.h_eval(eta)?, s.h_derivative(eta)?))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let large = H_LARGE_INDEX as f64;
    let mut lim_ok = true;
    let mut lim_worst = 0.0f64;
    let mut d_ok = true;
    let mut d_worst = 0.0f64;
    for (eta, vals) in probe_eta.iter().zip(&ladder_vals) {
        let gaps: Vec<f64> = vals.iter().map(|v| 1.0 - v.0).collect();
        lim_ok &= gaps.windows(2).all(|w| w[1] < w[0]);
        let predicted = kernel.tail(eta + large) / kernel.tail(*eta);
        let ratio = gaps.last().copied().unwrap_or(f64::NAN) / predicted;
        lim_worst = lim_worst.max(ratio.ln().abs());
        lim_ok &= (0.8..=1.25).contains(&ratio);

        let mags: Vec<f64> = vals.iter().map(|v| v.1.abs()).collect();
        let peak = mags
            .iter()
            .enumerate()
            .fold(0, |best, (k, m)| if *m > mags[best] { k } else { best });
        d_ok &= mags[peak..].windows(2).all(|w| w[1] < w[0]);
        let bound = kernel.beta(*eta) / kernel.tail(*eta) * predicted * 1.25 + 1.0 / large;
        let last = *mags.last().unwrap_or(&f64::NAN);
        d_worst = d_worst.max(last / bound);
        d_ok &= last <= bound;
    }
    checks.push(row(
        "1.limit",
        "H_i -> 1: 1 - H_i decreasing in i and within 25% of T(eta+i)/T(eta) at i = 1e12",
        lim_ok,
        lim_worst.exp(),
        "eta in {0, 1, 10}; worst shown as max(ratio, 1/ratio)".into(),
    ));

    // Item 2: T/β · H_i → i at large η.
    let eta_big = 1e6;
    let mut sc_worst = 0.0f64;
    for s in &seqs {
        let v = kernel.tail(eta_big) / kernel.beta(eta_big) * s.h_eval(eta_big)?;
        sc_worst = sc_worst.max((v - s.i as f64).abs() / s.i as f64);
    }
    checks.push(row(
        "2.scaling",
        "|T(eta)/beta(eta) * H_i(eta) - i| / i <= 0.05 at eta = 1e6",
        sc_worst <= 0.05,
        sc_worst,
        String::new(),
    ));

    // Item 3: H_i′ → 0 at fixed η.
    checks.push(row(
        "3.derivative_limit",
        "|H_i'| decreasing in i past its peak and below 1.25 (beta/T) T(eta+i)/T(eta) + 1/i at i = 1e12",
        d_ok,
        d_worst,
        "eta in {0, 1, 10}; worst shown as |H_i'| over the bound".into(),
    ));

    // Item 4: derivative bound and the exact relation.
    let mut b_worst = 0.0f64;
    let mut rel_worst = 0.0f64;
    for (eta, vals) in eta_grid.iter().zip(&table) {
        let bt = kernel.beta(*eta) / kernel.tail(*eta);
        for (s, v) in seqs.iter().zip(vals) {
            b_worst = b_worst.max(v.1.abs() / (2.0 * bt));
            let exact = v.0 / s.i as f64 - bt * (1.0 - v.0);
            let scale = v.0 / s.i as f64 + bt * (1.0 - v.0);
            if scale > 0.0 {
                rel_worst = rel_worst.max((v.1 - exact).abs() / scale);
            }
        }
    }
    checks.push(row(
        "4.bound",
        "|H_i'(eta)| < 2 beta(eta) / T(eta)",
        b_worst < 1.0,
        b_worst,
        "worst shown as |H_i'| over the bound".into(),
    ));
    checks.push(row(
        "4.consistency",
        "H_i' = H_i/i - (beta/T)(1 - H_i) to 1e-6",
        rel_worst <= 1e-6,
        rel_worst,
        String::new(),
    ));

    // Item 5: −1 − ε < ηH′/H ≤ 0 past some η₀ ≤ 1e8, uniformly in the tested i.
    let mut pos_worst = 0.0f64;
    for vals in &table {
        for v in vals {
            pos_worst = pos_worst.max(v.2);
        }
    }
    let lower = -1.0 - H_LOG_DERIV_EPS;
    let mut eta0 = None;
    for (k, eta) in eta_grid.iter().enumerate().rev() {
        if table[k].iter().all(|v| v.2 > lower) {
            eta0 = Some(*eta);
        } else {
            break;
        }
    }
    let top = eta_grid.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let log_ok =
        pos_worst <= H_ORDER_TOL && eta0.is_some_and(|e| e <= H_ETA0_MAX) && eta0 != Some(top);
    checks.push(row(
        "5.log_derivative",
        "-1.1 < eta H_i'/H_i <= 0 for eta >= eta0, some eta0 <= 1e8",
        log_ok,
        pos_worst,
        match eta0 {
            Some(e) => format!("eta0 = {e:e}; worst positive value shown"),
            None => "bound fails at the top of the grid".into(),
        },
    ));

    Ok(HPropertyReport {
        kernel: *kernel,
        i_list: i_sorted,
        eta0,
        checks,
    })
}

/// Closed-form families of radial priors `G(η)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum PriorSpec {
    /// `η^k`
    Power { k: f64 },
    /// `η^{2−p}`
    Harmonic,
    /// Lebesgue measure, `G ≡ 1`.
    Flat,
    /// `η^{2−p} Π_{i=1}^{n+1} Log_i(η+c)`
    LogThickened { n: usize, c: f64 },
    /// `η^{2−p} Π_{i=1}^{n−1} Log_i(η+c) · Log_n(η+c)²`
    LogSquared { n: usize, c: f64 },
}

impl fmt::Display for PriorSpec {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PriorSpec::Power { k } => write!(out, "power(k={k})"),
            PriorSpec::Harmonic => write!(out, "harmonic"),
            PriorSpec::Flat => write!(out, "flat"),
            PriorSpec::LogThickened { n, c } => write!(out, "log_thickened(n={n}, c={c})"),
            PriorSpec::LogSquared { n, c } => write!(out, "log_squared(n={n}, c={c})"),
        }
    }
}

pub type RadialFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Form {
    /// `η^k Π_{i=1}^m Log_i(η+c)^{e_i}`
    Tower { k: f64, c: f64, exps: Vec<f64> },
    Custom {
        g: RadialFn,
        dg: Option<RadialFn>,
        d2g: Option<RadialFn>,
    },
}

/// A radial prior density `g(θ) = G(‖θ‖_d)` in dimension `p`.
#[derive(Clone)]
pub struct RadialPrior {
    label: String,
    p: usize,
    form: Form,
    gamma: Option<f64>,
    norm_weights: Vec<f64>,
}

impl fmt::Debug for RadialPrior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RadialPrior")
            .field("label", &self.label)
            .field("p", &self.p)
            .field("gamma", &self.gamma)
            .finish()
    }
}

impl RadialPrior {
    pub fn new(spec: &PriorSpec, p: usize) -> Result<Self> {
        if p < 3 {
            return Err(Error::InvalidPrior(format!(
                "dimension p must be >= 3, got {p}"
            )));
        }
        let harmonic_k = 2.0 - p as f64;
        let tower = |k: f64, c: f64, exps: Vec<f64>| -> Result<Form> {
            LogTower::new(exps.len(), c)?;
            Ok(Form::Tower { k, c, exps })
        };
        let form = match spec {
            PriorSpec::Power { k } => {
                if !k.is_finite() {
                    return Err(Error::InvalidPrior(format!(
                        "power index {k} is not finite"
                    )));
                }
                Form::Tower {
                    k: *k,
                    c: 1.0,
                    exps: vec![],
                }
            }
            PriorSpec::Harmonic => Form::Tower {
                k: harmonic_k,
                c: 1.0,
                exps: vec![],
            },
            PriorSpec::Flat => Form::Tower {
                k: 0.0,
                c: 1.0,
                exps: vec![],
            },
            PriorSpec::LogThickened { n, c } => tower(harmonic_k, *c, vec![1.0; n + 1])?,
            PriorSpec::LogSquared { n, c } => {
                if *n == 0 {
                    return Err(Error::InvalidPrior("log_squared needs n >= 1".into()));
                }
                let mut e = vec![1.0; *n];
                e[n - 1] = 2.0;
                tower(harmonic_k, *c, e)?
            }
        };
        Ok(Self {
            label: spec.to_string(),
            p,
            form,
            gamma: None,
            norm_weights: vec![1.0; p],
        })
    }

    pub fn harmonic(p: usize) -> Self {
        Self::new(&PriorSpec::Harmonic, p).expect("valid dimension")
    }

    /// A user-supplied `G` with optional first and second derivatives.
    pub fn custom(
        label: impl Into<String>,
        p: usize,
        g: RadialFn,
        dg: Option<RadialFn>,
        d2g: Option<RadialFn>,
    ) -> Result<Self> {
        if p < 3 {
            return Err(Error::InvalidPrior(format!(
                "dimension p must be >= 3, got {p}"
            )));
        }
        Ok(Self {
            label: label.into(),
            p,
            form: Form::Custom { g, dg, d2g },
            gamma: None,
            norm_weights: vec![1.0; p],
        })
    }

    pub fn with_gamma(mut self, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma <= 2.0) {
            return Err(Error::InvalidPrior(format!(
                "gamma must lie in (0, 2], got {gamma}"
            )));
        }
        self.gamma = Some(gamma);
        Ok(self)
    }

    pub fn with_norm_weights(mut self, d: Vec<f64>) -> Result<Self> {
        if d.len() != self.p {
            return Err(Error::InvalidPrior(format!(
                "expected {} norm weights, got {}",
                self.p,
                d.len()
            )));
        }
        if d.iter().any(|v| !(*v >= 1.0)) || d.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidPrior(
                "norm weights must be >= 1 and nonincreasing".into(),
            ));
        }
        self.norm_weights = d;
        Ok(self)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dimension(&self) -> usize {
        self.p
    }

    pub fn gamma(&self) -> Option<f64> {
        self.gamma
    }

    pub fn norm_weights(&self) -> &[f64] {
        &self.norm_weights
    }

    pub fn is_euclidean(&self) -> bool {
        self.norm_weights.iter().all(|&d| d == 1.0)
    }

    /// `‖θ‖_d = (Σ d_i θ_i²)^{1/2}`.
    pub fn norm(&self, theta: &[f64]) -> f64 {
        theta
            .iter()
            .zip(&self.norm_weights)
            .map(|(t, d)| d * t * t)
            .sum::<f64>()
            .sqrt()
    }

    /// True when the prior is exactly `η^{2−p}`.
    pub fn is_harmonic(&self) -> bool {
        matches!(&self.form, Form::Tower { k, exps, .. } if exps.is_empty() && *k == 2.0 - self.p as f64)
    }

    /// True when the prior is exactly constant.
    pub fn is_flat(&self) -> bool {
        matches!(&self.form, Form::Tower { k, exps, .. } if exps.is_empty() && *k == 0.0)
    }

    /// Pure power `η^k`, if the prior is one.
    pub fn power_index(&self) -> Option<f64> {
        match &self.form {
            Form::Tower { k, exps, .. } if exps.is_empty() => Some(*k),
            _ => None,
        }
    }

    pub fn ln_g(&self, eta: f64) -> f64 {
        match &self.form {
            Form::Tower { k, c, exps } => {
                let mut v = if *k == 0.0 { 0.0 } else { k * eta.ln() };
                if !exps.is_empty() {
                    let logs = tower_values((eta + c).ln(), exps.len());
                    v += logs.iter().zip(exps).map(|(l, e)| e * l.ln()).sum::<f64>();
                }
                v
            }
            Form::Custom { g, .. } => g(eta).ln(),
        }
    }

    /// `ln G(e^u)`.
    pub fn ln_g_u(&self, u: f64) -> f64 {
        match &self.form {
            Form::Tower { k, c, exps } => {
                let mut v = k * u;
                if !exps.is_empty() {
                    let logs = tower_values(ln_shifted(u, *c), exps.len());
                    v += logs.iter().zip(exps).map(|(l, e)| e * l.ln()).sum::<f64>();
                }
                v
            }
            Form::Custom { g, .. } => g(u.exp()).ln(),
        }
    }

    pub fn g(&self, eta: f64) -> f64 {
        match &self.form {
            Form::Custom { g, .. } => g(eta),
            _ => self.ln_g(eta).exp(),
        }
    }

    /// `(L′, L″)` for `L = ln G`, in closed form for tower priors.
    fn tower_log_derivs(k: f64, c: f64, exps: &[f64], eta: f64) -> (f64, f64) {
        let x = eta + c;
        let mut l1 = k / eta;
        let mut l2 = -k / (eta * eta);
        if !exps.is_empty() {
            let logs = tower_values(x.ln(), exps.len());
            let q = tower_log_derivs(x, &logs);
            let mut cum = 0.0;
            for (qi, e) in q.iter().zip(exps) {
                cum += qi;
                l1 += e * qi;
                l2 -= e * qi * (1.0 / x + cum);
            }
        }
        (l1, l2)
    }

    pub fn g_prime(&self, eta: f64) -> Result<f64> {
        match &self.form {
            Form::Tower { k, c, exps } => {
                let (l1, _) = Self::tower_log_derivs(*k, *c, exps, eta);
                Ok(self.g(eta) * l1)
            }
            Form::Custom { dg, .. } => dg
                .as_ref()
                .map(|d| d(eta))
                .ok_or_else(|| Error::DerivativeUnavailable(format!("{} has no G'", self.label))),
        }
    }

    pub fn g_second(&self, eta: f64) -> Result<f64> {
        match &self.form {
            Form::Tower { k, c, exps } => {
                let (l1, l2) = Self::tower_log_derivs(*k, *c, exps, eta);
                Ok(self.g(eta) * (l1 * l1 + l2))
            }
            Form::Custom { d2g, .. } => d2g
                .as_ref()
                .map(|d| d(eta))
                .ok_or_else(|| Error::DerivativeUnavailable(format!("{} has no G''", self.label))),
        }
    }

    /// `η G′(η)/G(η)`.
    pub fn log_deriv(&self, eta: f64) -> Result<f64> {
        match &self.form {
            Form::Tower { k, c, exps } => Ok(eta * Self::tower_log_derivs(*k, *c, exps, eta).0),
            Form::Custom { .. } => Ok(eta * self.g_prime(eta)? / self.g(eta)),
        }
    }

    /// `η G″(η)/G′(η)`; `None` where `G′` vanishes identically.
    pub fn second_log_deriv(&self, eta: f64) -> Result<Option<f64>> {
        match &self.form {
            Form::Tower { k, c, exps } => {
                let (l1, l2) = Self::tower_log_derivs(*k, *c, exps, eta);
                if l1 == 0.0 {
                    return Ok(None);
                }
                Ok(Some(eta * (l1 * l1 + l2) / l1))
            }
            Form::Custom { .. } => {
                let d1 = self.g_prime(eta)?;
                if d1 == 0.0 {
                    return Ok(None);
                }
                Ok(Some(eta * self.g_second(eta)? / d1))
            }
        }
    }

    /// Index of regular variation: exact for tower priors, otherwise the least-squares
    /// slope of `ln G` against `ln η` over `[1e6, 1e8]`.
    pub fn rv_index(&self) -> f64 {
        match &self.form {
            Form::Tower { k, .. } => *k,
            Form::Custom { .. } => {
                let grid = numerics::decade_grid(1e6, 1e8, 40);
                let xs: Vec<f64> = grid.iter().map(|v| v.ln()).collect();
                let ys: Vec<f64> = grid.iter().map(|&v| self.ln_g(v)).collect();
                numerics::ls_slope(&xs, &ys)
            }
        }
    }

    /// Largest `u ≤ DIAGNOSTIC_U_MAX` at which `ln G(e^u)` is finite.
    fn diagnostic_u_max(&self) -> f64 {
        let mut u = DIAGNOSTIC_U_MAX;
        while u > LN_10 && !self.ln_g_u(u).is_finite() {
            u -= LN_10;
        }
        u
    }
}

/// Grid profile of the G-assumptions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionProfile {
    pub t0: f64,
    pub t1: f64,
    pub t2: f64,
    pub t3: Option<f64>,
    pub t4: Option<f64>,
    pub r1: f64,
    pub g3_holds: bool,
}

/// The default audit grid: geometric from `1e-3` to `1e8`, 40 points per decade.
pub fn default_eta_grid() -> Vec<f64> {
    numerics::decade_grid(1e-3, 1e8, 40)
}

/// Extreme values of `ηG′/G` and `ηG″/G′` over `[r1, max grid]`, and the `η → 0` limit.
pub fn prior_assumption_audit(
    prior: &RadialPrior,
    grid: &[f64],
    r1: f64,
) -> Result<AssumptionProfile> {
    let t0 = prior.log_deriv(1e-8)?;
    let mut t1 = f64::INFINITY;
    let mut t2 = f64::NEG_INFINITY;
    let mut t3: Option<f64> = None;
    let mut t4: Option<f64> = None;
    for &eta in grid.iter().filter(|&&e| e >= r1) {
        let v = prior.log_deriv(eta)?;
        t1 = t1.min(v);
        t2 = t2.max(v);
        if let Some(w) = prior.second_log_deriv(eta)? {
            t3 = Some(t3.map_or(w, |a| a.min(w)));
            t4 = Some(t4.map_or(w, |a| a.max(w)));
        }
    }
    Ok(AssumptionProfile {
        t0,
        t1,
        t2,
        t3,
        t4,
        r1,
        g3_holds: t0 > 1.0 - prior.dimension() as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DivergenceClass {
    Diverges,
    Converges,
    Indeterminate,
}

impl fmt::Display for DivergenceClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DivergenceClass::Diverges => "diverges",
            DivergenceClass::Converges => "converges",
            DivergenceClass::Indeterminate => "indeterminate",
        })
    }
}

/// Outcome of a numerical convergence test for `∫_1^∞ ψ(η) dη`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergenceReport {
    pub class: DivergenceClass,
    /// Fitted `q` in `η ψ(η) ≈ (ln η)^{−q}`.
    pub fitted_index: f64,
    /// Share of the running total contributed by the last decade.
    pub last_increment: f64,
    /// `(log10 T, ln I(T))` for the partial integrals `I(T) = ∫_1^T ψ`.
    pub trace: Vec<(f64, f64)>,
}

impl DivergenceReport {
    /// The integral when it was classified convergent.
    pub fn value(&self) -> Option<f64> {
        match self.class {
            DivergenceClass::Converges => self.trace.last().map(|t| t.1.exp()),
            _ => None,
        }
    }
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Classifies `∫_{e^{u0}}^∞ ψ(η) dη` from `ln(ηψ(η))` written as a function of `u = ln η`.
///
/// The integral is taken decade by decade in `u` up to `u_max`, all in log space. The
/// tail index `q` is the negated log-log slope of `ηψ` against `u` over the top tenth of
/// the `u` range: `q ≤ 1.2` is divergent, while `q ≥ 1.3` together with a last-decade share
/// below `1e-4` is convergent.
pub fn classify_log_integral<F>(
    ln_psi_u: F,
    u0: f64,
    u_max: f64,
    policy: ExecPolicy,
) -> Result<DivergenceReport>
where
    F: Fn(f64) -> Result<f64> + Sync + Send,
{
    let fit_lo = (u_max / 10.0).max(u0 + 1.0);
    let fit_u = numerics::geometric_grid(fit_lo, u_max, 40);
    let ys = policy.try_map(&fit_u, |&u| ln_psi_u(u))?;
    if ys.iter().any(|y| y.is_nan()) {
        return Err(Error::Domain(
            "integrand is NaN in the fitting window".into(),
        ));
    }
    let xs: Vec<f64> = fit_u.iter().map(|u| u.ln()).collect();
    let fitted_index = -numerics::ls_slope(&xs, &ys);

    let n_dec = ((u_max - u0) / LN_10).ceil() as usize;
    let bounds: Vec<(f64, f64)> = (0..n_dec)
        .map(|k| {
            let a = u0 + k as f64 * LN_10;
            (a, (a + LN_10).min(u_max))
        })
        .collect();
    let pieces = policy.try_map(&bounds, |&(a, b)| -> Result<f64> {
        let probe = [a, 0.5 * (a + b), b];
        let mut shift = f64::NEG_INFINITY;
        for &u in &probe {
            shift = shift.max(ln_psi_u(u)?);
        }
        if shift == f64::NEG_INFINITY {
            return Ok(f64::NEG_INFINITY);
        }
        let mut err = None;
        let v = integrate(
            |u: f64| match ln_psi_u(u) {
                Ok(l) => (l - shift).exp(),
                Err(e) => {
                    err.get_or_insert(e);
                    0.0
                }
            },
            a,
            b,
            &QuadratureSpec::relative(1e-8),
        )?
        .value;
        if let Some(e) = err {
            return Err(e);
        }
        Ok(v.ln() + shift)
    })?;
    let mut trace = Vec::with_capacity(pieces.len());
    let mut total = f64::NEG_INFINITY;
    for (piece, &(_, b)) in pieces.iter().zip(&bounds) {
        total = log_add(total, *piece);
        trace.push((b / LN_10, total));
    }
    let last_increment = (pieces[pieces.len() - 1] - total).exp();
    let class = if fitted_index <= DIVERGE_INDEX {
        DivergenceClass::Diverges
    } else if fitted_index >= CONVERGE_INDEX && last_increment < CONVERGE_INCREMENT {
        DivergenceClass::Converges
    } else {
        DivergenceClass::Indeterminate
    };
    Ok(DivergenceReport {
        class,
        fitted_index,
        last_increment,
        trace,
    })
}

/// Radial form of the Brown integral, `∫_1^∞ η^{1−p}/G(η) dη`, with `G` standing in for
/// the marginal.
pub fn brown_diagnostic(prior: &RadialPrior) -> Result<DivergenceReport> {
    let p = prior.dimension() as f64;
    let u_max = prior.diagnostic_u_max();
    classify_log_integral(
        |u| Ok((2.0 - p) * u - prior.ln_g_u(u)),
        0.0,
        u_max,
        ExecPolicy::default(),
    )
}

/// `∫_1^∞ η^{p−1} G(η) H_1^γ(η) dη`, classified for finiteness.
pub fn properness_index(
    prior: &RadialPrior,
    kernel: &BetaKernel,
    gamma: f64,
) -> Result<DivergenceReport> {
    if !(gamma > 0.0 && gamma <= 2.0) {
        return Err(Error::InvalidPrior(format!(
            "gamma must lie in (0, 2], got {gamma}"
        )));
    }
    let p = prior.dimension() as f64;
    let h1 = HSequence::new(*kernel, 1)?;
    let u_max = prior.diagnostic_u_max();
    classify_log_integral(
        |u| Ok(p * u + prior.ln_g_u(u) + gamma * h1.ln_h_u(u)?),
        0.0,
        u_max,
        ExecPolicy::default(),
    )
}

/// The smallest `γ ∈ {0.25, 0.5, …, 2}` for which the properness integral converges.
pub fn default_gamma(prior: &RadialPrior, kernel: &BetaKernel) -> Result<Option<f64>> {
    for j in 1..=8 {
        let gamma = 0.25 * j as f64;
        if properness_index(prior, kernel, gamma)?.class == DivergenceClass::Converges {
            return Ok(Some(gamma));
        }
    }
    Ok(None)
}

/// `J(i) = ∫_0^∞ η^{p−1} G(η) H_1^{γ−2}(η) H_i′(η)² dη` for each `i`.
pub fn blyth_decay(
    prior: &RadialPrior,
    kernel: &BetaKernel,
    gamma: f64,
    i_list: &[u64],
) -> Result<Vec<f64>> {
    if !(gamma > 0.0 && gamma <= 2.0) {
        return Err(Error::InvalidPrior(format!(
            "gamma must lie in (0, 2], got {gamma}"
        )));
    }
    let p = prior.dimension() as f64;
    let h1 = HSequence::new(*kernel, 1)?;
    ExecPolicy::default().try_map(i_list, |&i| {
        let hi = HSequence::new(*kernel, i)?;
        let mut err: Option<Error> = None;
        let mut record = |r: Result<f64>| -> f64 {
            r.unwrap_or_else(|e| {
                err.get_or_insert(e);
                0.0
            })
        };
        let ln_weight = |eta: f64| -> Result<f64> {
            let mut w = (p - 1.0) * eta.ln() + prior.ln_g(eta);
            if gamma != 2.0 {
                w += (gamma - 2.0) * h1.ln_h(eta)?;
            }
            Ok(w)
        };
        let integrand = |eta: f64| -> Result<f64> {
            if eta == 0.0 {
                return Ok(0.0);
            }
            let d = hi.h_derivative(eta)?;
            Ok(ln_weight(eta)?.exp() * d * d)
        };
        let spec = QuadratureSpec::relative(1e-9).with_hints([kernel.tower.c.min(0.5)]);
        let near = integrate(|eta| record(integrand(eta)), 0.0, 1.0, &spec)?.value;
        let u_top = (1e10 * i as f64).ln();
        let far = integrate(
            |u: f64| {
                let eta = u.exp();
                record(integrand(eta)) * eta
            },
            0.0,
            u_top,
            &QuadratureSpec::relative(1e-9).with_hints([(kernel.tower.c + i as f64).ln()]),
        )?
        .value;
        if let Some(e) = err {
            return Err(e);
        }
        Ok(near + far)
    })
}

/// Numerical check of `∫_0^∞ r^{p−1} f G < ∞` and `∫_0^∞ r^{p−2} F G < ∞`.
///
/// Behavior at the origin is read off `t0`; both integrals are then evaluated.
pub fn fg1_check(prior: &RadialPrior, model: &RadialDensity) -> Result<(f64, f64)> {
    let p = prior.dimension();
    if model.dimension() != p {
        return Err(Error::Fg1Failure(format!(
            "prior dimension {p} differs from model dimension {}",
            model.dimension()
        )));
    }
    let pf = p as f64;
    let t0 = prior.log_deriv(1e-8)?;
    if !(pf - 2.0 + t0 > -1.0) {
        return Err(Error::Fg1Failure(format!(
            "r^(p-2) F G ~ r^{:.3} is not integrable at the origin",
            pf - 2.0 + t0
        )));
    }
    let spec = QuadratureSpec::relative(1e-10).with_hints([model.scale(), 1.0]);
    let run = |ln_w: &dyn Fn(f64) -> f64| -> Result<f64> {
        let near = integrate(
            |r: f64| if r == 0.0 { 0.0 } else { ln_w(r).exp() },
            0.0,
            1.0,
            &spec.clone().with_hints([0.0]),
        )?
        .value;
        let far = integrate_semi_infinite(|r: f64| ln_w(r).exp(), 1.0, model.decay_class(), &spec)
            .map_err(|e| Error::Fg1Failure(format!("integral at infinity: {e}")))?
            .value;
        Ok(near + far)
    };
    let a = run(&|r| (pf - 1.0) * r.ln() + model.log_density(r) + prior.ln_g(r))?;
    let b = run(&|r| (pf - 2.0) * r.ln() + model.log_big_f(r) + prior.ln_g(r))?;
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Fg1Failure("integral is not finite".into()));
    }
    Ok((a, b))
}

/// Bound `G(η) ≤ C η^{2−p} T(η)²/(η β(η))` tested with one kernel.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryBoundCheck {
    pub kernel: BetaKernel,
    /// Largest `G / (η^{2−p} T²/(ηβ))` seen on `η ∈ [1, 1e300]`.
    pub c_needed: f64,
    /// Log-log slope of the ratio against `ln η` at the top of the range.
    pub drift: f64,
    pub bounded: bool,
}

/// Tries kernels of depth 1, 2, 3 (canonical shifts) for the boundary-case bound and
/// reports the first one under which the ratio stays bounded.
pub fn boundary_bound(prior: &RadialPrior) -> Result<Vec<BoundaryBoundCheck>> {
    let p = prior.dimension() as f64;
    let u_max = prior.diagnostic_u_max();
    let us: Vec<f64> = (0..=600).map(|j| u_max * j as f64 / 600.0).collect();
    let mut out = Vec::new();
    for n in 1..=3 {
        let kernel = BetaKernel {
            tower: LogTower::canonical(n),
        };
        let ln_ratio = |u: f64| {
            prior.ln_g_u(u) - (2.0 - p) * u - 2.0 * kernel.ln_tail_u(u) + u + kernel.ln_beta_u(u)
        };
        let vals: Vec<f64> = us.iter().map(|&u| ln_ratio(u)).collect();
        let c_needed = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max).exp();
        let fit: Vec<(f64, f64)> = us
            .iter()
            .zip(&vals)
            .filter(|(u, _)| **u >= u_max / 10.0)
            .map(|(u, v)| (u.ln(), *v))
            .collect();
        let (xs, ys): (Vec<f64>, Vec<f64>) = fit.into_iter().unzip();
        let drift = numerics::ls_slope(&xs, &ys);
        let bounded = drift <= 0.1 && c_needed.is_finite();
        out.push(BoundaryBoundCheck {
            kernel,
            c_needed,
            drift,
            bounded,
        });
        if bounded {
            break;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorVerdict {
    AdmissibleCertified,
    InadmissibleCertified,
    Uncertified,
}

impl fmt::Display for PriorVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PriorVerdict::AdmissibleCertified => "admissible_certified",
            PriorVerdict::InadmissibleCertified => "inadmissible_certified",
            PriorVerdict::Uncertified => "uncertified",
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PriorClassification {
    pub verdict: PriorVerdict,
    pub rv_index: f64,
    pub tail_s: f64,
    pub reason: String,
    pub boundary: Vec<BoundaryBoundCheck>,
    pub brown: Option<DivergenceReport>,
}

/// Sorts a prior into certified-admissible, certified-inadmissible or uncertified.
///
/// Admissible: index `k` in `[−p, 2−p)` with `t0 > 1−p`, tail moment `s > 3` and the FG1
/// integrals finite; or `k = 2−p` where the boundary bound holds under some kernel.
/// Inadmissible: the Brown integral converges. Anything else is uncertified.
pub fn classify_prior(prior: &RadialPrior, model: &RadialDensity) -> Result<PriorClassification> {
    let p = prior.dimension() as f64;
    let k = prior.rv_index();
    let tail_s = model.tail_profile().s;
    let boundary_k = 2.0 - p;
    let mut reasons = Vec::new();
    let mut boundary = Vec::new();

    let fg1 = fg1_check(prior, model);
    if let Err(e) = &fg1 {
        reasons.push(format!("FG1 fails: {e}"));
    }
    let moment_ok = tail_s > 3.0;
    if !moment_ok {
        reasons.push(format!("tail moment index s = {tail_s:.3} is not above 3"));
    }
    let base_ok = fg1.is_ok() && moment_ok;

    let near_boundary = match prior.form {
        Form::Tower { .. } => k == boundary_k,
        Form::Custom { .. } => (k - boundary_k).abs() < INDEX_MATCH_TOL,
    };
    if near_boundary {
        boundary = boundary_bound(prior)?;
        if base_ok {
            if let Some(b) = boundary.iter().find(|b| b.bounded) {
                return Ok(PriorClassification {
                    verdict: PriorVerdict::AdmissibleCertified,
                    rv_index: k,
                    tail_s,
                    reason: format!(
                        "boundary index 2-p with G bounded by {:.4} times the depth-{} kernel envelope",
                        b.c_needed, b.kernel.tower.n
                    ),
                    boundary,
                    brown: None,
                });
            }
        }
        reasons.push("boundary bound not established for kernel depths 1..3".into());
    } else if k >= -p && k < boundary_k {
        match prior.log_deriv(1e-8) {
            Ok(t0) if t0 > 1.0 - p => {
                if base_ok {
                    return Ok(PriorClassification {
                        verdict: PriorVerdict::AdmissibleCertified,
                        rv_index: k,
                        tail_s,
                        reason: format!("index {k:.4} in [-p, 2-p) with t0 = {t0:.4}"),
                        boundary,
                        brown: None,
                    });
                }
            }
            Ok(t0) => reasons.push(format!("t0 = {t0:.4} does not exceed 1-p")),
            Err(e) => reasons.push(format!("t0 unavailable: {e}")),
        }
    } else {
        reasons.push(format!("index {k:.4} outside [-p, 2-p]"));
    }

    let brown = brown_diagnostic(prior)?;
    let verdict = if brown.class == DivergenceClass::Converges {
        reasons.push("Brown integral converges".into());
        PriorVerdict::InadmissibleCertified
    } else {
        reasons.push(format!("Brown integral {}", brown.class));
        PriorVerdict::Uncertified
    };
    Ok(PriorClassification {
        verdict,
        rv_index: k,
        tail_s,
        reason: reasons.join("; "),
        boundary,
        brown: Some(brown),
    })
}
