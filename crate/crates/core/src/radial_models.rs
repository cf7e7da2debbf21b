//! Spherically symmetric density families `f(‖x − θ‖)` with their tail kernel
//! `F(u) = ∫_u^∞ s f(s) ds`, normalization and radial moments.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{
    self, gk21, integrate, integrate_semi_infinite, log_gamma, log_upper_incomplete_gamma,
    sphere_surface, upper_incomplete_gamma_scaled, DecayClass, MonotoneCubic, QuadratureSpec,
};

/// Reported tail index for super-exponential tails, where every `s` works.
pub const TAIL_INDEX_CAP: f64 = 64.0;

/// A density family before normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum Family {
    /// `exp(-r²/2)`
    Gaussian,
    /// `r^α exp(-β r²)`
    PolyExp { alpha: f64, beta: f64 },
    /// `exp(-r²/2) − a exp(-r²/(2b))`
    MixtureDiff { a: f64, b: f64 },
    /// Positive samples of an unnormalized radial profile, extended past the last
    /// knot by the power law through the final two knots.
    Tabulated { r: Vec<f64>, f: Vec<f64> },
}

impl fmt::Display for Family {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Gaussian => write!(out, "gaussian"),
            Family::PolyExp { alpha, beta } => write!(out, "polyexp(alpha={alpha}, beta={beta})"),
            Family::MixtureDiff { a, b } => write!(out, "mixdiff(a={a}, b={b})"),
            Family::Tabulated { r, .. } => write!(out, "tabulated({} knots)", r.len()),
        }
    }
}

/// Uniform bounds `r^{p+s} f(r) ≤ L` for `r ≥ r0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailProfile {
    pub r0: f64,
    pub l_bound: f64,
    pub s: f64,
}

#[derive(Debug)]
struct TabulatedCache {
    r: Vec<f64>,
    log_f: MonotoneCubic,
    f_nodes: Vec<f64>,
    // Power-law exponent of the extrapolated tail, f ∝ r^q beyond the last knot.
    tail_q: f64,
    // Unnormalized F at each knot.
    big_f_nodes: Vec<f64>,
}

impl TabulatedCache {
    fn build(r: &[f64], f: &[f64], p: usize) -> Result<Self> {
        if r.len() < 4 || r.len() != f.len() {
            return Err(Error::InvalidModel(
                "tabulated density needs at least 4 matching (r, f) knots".into(),
            ));
        }
        if r[0] < 0.0 || r.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidModel(
                "tabulated radii must be nonnegative and strictly increasing".into(),
            ));
        }
        if let Some(v) = f.iter().find(|v| !(**v >= 0.0)) {
            return Err(Error::InvalidModel(format!(
                "negative density value {v} in table"
            )));
        }
        if f.iter().any(|v| *v == 0.0) {
            return Err(Error::InvalidModel(
                "tabulated density values must be positive".into(),
            ));
        }
        let n = r.len();
        let tail_q = (f[n - 1] / f[n - 2]).ln() / (r[n - 1] / r[n - 2]).ln();
        if !(tail_q < -(p as f64)) {
            return Err(Error::InvalidModel(format!(
                "tabulated tail decays like r^{tail_q:.3}, not integrable against r^(p-1) for p = {p}"
            )));
        }
        let log_f = MonotoneCubic::new(r.to_vec(), f.iter().map(|v| v.ln()).collect())?;
        let mut cache = Self {
            r: r.to_vec(),
            log_f,
            f_nodes: f.to_vec(),
            tail_q,
            big_f_nodes: vec![0.0; n],
        };
        let mut acc = cache.tail_integral(1.0);
        cache.big_f_nodes[n - 1] = acc;
        for i in (0..n - 1).rev() {
            let (seg, _) = gk21(&mut |s: f64| s * cache.eval(s), r[i], r[i + 1])?;
            acc += seg;
            cache.big_f_nodes[i] = acc;
        }
        Ok(cache)
    }

    fn eval(&self, s: f64) -> f64 {
        let n = self.r.len();
        if s <= self.r[0] {
            self.f_nodes[0]
        } else if s >= self.r[n - 1] {
            self.f_nodes[n - 1] * (s / self.r[n - 1]).powf(self.tail_q)
        } else {
            self.log_f.eval(s).exp()
        }
    }

    /// `∫_{r_N}^∞ s^{m} f(s) ds` on the power-law tail (`m = 1` gives F at the last knot).
    fn tail_integral(&self, m: f64) -> f64 {
        let n = self.r.len();
        let rn = self.r[n - 1];
        let expo = self.tail_q + m + 1.0;
        if expo >= 0.0 {
            return f64::INFINITY;
        }
        self.f_nodes[n - 1] * rn.powf(m + 1.0) / (-expo)
    }

    fn big_f(&self, u: f64) -> f64 {
        let n = self.r.len();
        let rn = self.r[n - 1];
        if u >= rn {
            let expo = self.tail_q + 2.0;
            return self.f_nodes[n - 1] * rn.powf(-self.tail_q) * u.powf(expo) / (-expo);
        }
        if u <= self.r[0] {
            let head = 0.5 * self.f_nodes[0] * (self.r[0] * self.r[0] - u * u);
            return self.big_f_nodes[0] + head;
        }
        let j = self.r.partition_point(|&v| v <= u);
        let (seg, _) = gk21(&mut |s: f64| s * self.eval(s), u, self.r[j]).expect("finite table");
        self.big_f_nodes[j] + seg
    }

    /// `∫_0^∞ r^{m} f(r) dr` (unnormalized), piecewise on the knots.
    fn radial_integral(&self, m: f64) -> Result<f64> {
        if m <= -1.0 {
            return Err(Error::DivergentMoment { order: m });
        }
        let tail = self.tail_integral(m);
        if !tail.is_finite() {
            return Err(Error::DivergentMoment { order: m });
        }
        let r0 = self.r[0];
        let mut total = self.f_nodes[0] * r0.powf(m + 1.0) / (m + 1.0) + tail;
        let spec = QuadratureSpec::relative(1e-13);
        for w in self.r.windows(2) {
            total += integrate(|s: f64| s.powf(m) * self.eval(s), w[0], w[1], &spec)?.value;
        }
        Ok(total)
    }
}

/// A normalized spherically symmetric density in dimension `p`.
#[derive(Debug, Clone)]
pub struct RadialDensity {
    family: Family,
    p: usize,
    norm_const: f64,
    table: Option<Arc<TabulatedCache>>,
}

impl RadialDensity {
    /// Builds the model and its normalizing constant `K` so that `c_p ∫ r^{p−1} f = 1`.
    pub fn new(family: Family, p: usize) -> Result<Self> {
        if p < 3 {
            return Err(Error::InvalidModel(format!(
                "dimension p must be >= 3, got {p}"
            )));
        }
        let pf = p as f64;
        let cp = sphere_surface(p);
        let mut table = None;
        let norm_const = match &family {
            Family::Gaussian => (2.0 * std::f64::consts::PI).powf(-pf / 2.0),
            Family::PolyExp { alpha, beta } => {
                if !(*alpha >= 0.0) || !(*beta > 0.0) {
                    return Err(Error::InvalidModel(format!(
                        "polyexp needs alpha >= 0 and beta > 0, got ({alpha}, {beta})"
                    )));
                }
                let m = (pf + alpha) / 2.0;
                // ∫ r^{p+α−1} e^{−βr²} dr = Γ(m) / (2 β^m)
                let log_mass = cp.ln() + log_gamma(m)? - 2f64.ln() - m * beta.ln();
                (-log_mass).exp()
            }
            Family::MixtureDiff { a, b } => {
                if !(*a > 0.0 && *a <= 1.0) || !(*b > 0.0 && *b < 1.0) {
                    return Err(Error::InvalidModel(format!(
                        "mixdiff needs 0 < a <= 1 and 0 < b < 1, got ({a}, {b})"
                    )));
                }
                let two_pi = 2.0 * std::f64::consts::PI;
                1.0 / (two_pi.powf(pf / 2.0) - a * (two_pi * b).powf(pf / 2.0))
            }
            Family::Tabulated { r, f } => {
                let cache = TabulatedCache::build(r, f, p)?;
                let mass = cp * cache.radial_integral(pf - 1.0)?;
                table = Some(Arc::new(cache));
                1.0 / mass
            }
        };
        Ok(Self {
            family,
            p,
            norm_const,
            table,
        })
    }

    pub fn gaussian(p: usize) -> Self {
        Self::new(Family::Gaussian, p).expect("gaussian is always valid for p >= 3")
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn dimension(&self) -> usize {
        self.p
    }

    pub fn norm_const(&self) -> f64 {
        self.norm_const
    }

    pub fn id(&self) -> String {
        format!("{}[p={}]", self.family, self.p)
    }

    /// Typical radial length scale used to pick quadrature transforms and grids.
    pub fn scale(&self) -> f64 {
        match &self.family {
            Family::Gaussian | Family::MixtureDiff { .. } => 1.0,
            Family::PolyExp { beta, .. } => 1.0 / (2.0 * beta).sqrt(),
            Family::Tabulated { r, .. } => r[r.len() / 2].max(r[1]),
        }
    }

    pub fn decay_class(&self) -> DecayClass {
        match &self.family {
            Family::Tabulated { .. } => DecayClass::Power,
            _ => DecayClass::Exponential {
                scale: self.scale(),
            },
        }
    }

    fn table(&self) -> &TabulatedCache {
        self.table
            .as_deref()
            .expect("tabulated model carries its cache")
    }

    /// `ln f(r)` (normalized).
    pub fn log_density(&self, r: f64) -> f64 {
        let r = r.abs();
        let ln_k = self.norm_const.ln();
        match &self.family {
            Family::Gaussian => ln_k - 0.5 * r * r,
            Family::PolyExp { alpha, beta } => {
                if *alpha == 0.0 {
                    ln_k - beta * r * r
                } else if r == 0.0 {
                    f64::NEG_INFINITY
                } else {
                    ln_k + alpha * r.ln() - beta * r * r
                }
            }
            Family::MixtureDiff { a, b } => {
                let z = 0.5 * r * r * (1.0 / b - 1.0);
                let factor = if *a == 1.0 {
                    -(-z).exp_m1()
                } else {
                    1.0 - a * (-z).exp()
                };
                ln_k - 0.5 * r * r + factor.ln()
            }
            Family::Tabulated { .. } => ln_k + self.table().eval(r).ln(),
        }
    }

    /// `f(r)` (normalized).
    pub fn density(&self, r: f64) -> f64 {
        self.log_density(r).exp()
    }

    /// `ln F(u)`, accurate far into the tail where `F` itself underflows.
    pub fn log_big_f(&self, u: f64) -> f64 {
        let u = u.max(0.0);
        let ln_k = self.norm_const.ln();
        match &self.family {
            Family::Gaussian => ln_k - 0.5 * u * u,
            Family::PolyExp { alpha, beta } => {
                let s = alpha / 2.0 + 1.0;
                ln_k + log_upper_incomplete_gamma(s, beta * u * u).expect("valid arguments")
                    - 2f64.ln()
                    - s * beta.ln()
            }
            Family::MixtureDiff { a, b } => {
                let z = 0.5 * u * u * (1.0 / b - 1.0);
                ln_k - 0.5 * u * u + (-a * b * (-z).exp()).ln_1p()
            }
            Family::Tabulated { .. } => ln_k + self.table().big_f(u).ln(),
        }
    }

    /// Tail kernel `F(u) = ∫_u^∞ s f(s) ds`.
    pub fn big_f(&self, u: f64) -> f64 {
        self.log_big_f(u).exp()
    }

    /// `F(u)/f(u)`, evaluated without forming either factor in the tail.
    pub fn tail_ratio(&self, u: f64) -> f64 {
        let u = u.abs();
        match &self.family {
            Family::Gaussian => 1.0,
            Family::PolyExp { alpha, beta } => {
                let s = alpha / 2.0 + 1.0;
                if u == 0.0 {
                    return if *alpha == 0.0 {
                        1.0 / (2.0 * beta)
                    } else {
                        f64::INFINITY
                    };
                }
                let x = beta * u * u;
                0.5 * u * u * upper_incomplete_gamma_scaled(s, x).expect("valid arguments")
            }
            Family::MixtureDiff { a, b } => {
                let z = 0.5 * u * u * (1.0 / b - 1.0);
                let e = (-z).exp();
                let den = if *a == 1.0 {
                    -(-z).exp_m1()
                } else {
                    1.0 - a * e
                };
                (1.0 - a * b * e) / den
            }
            Family::Tabulated { .. } => (self.log_big_f(u) - self.log_density(u)).exp(),
        }
    }

    /// `E₀‖X‖^k = c_p ∫ r^{p+k−1} f(r) dr`, in closed form where one exists.
    pub fn moment(&self, k: f64) -> Result<f64> {
        let pf = self.p as f64;
        if !(pf + k > 0.0) {
            return Err(Error::DivergentMoment { order: k });
        }
        match &self.family {
            Family::Gaussian => Ok(gauss_moment_ratio(pf, k, 1.0)),
            Family::PolyExp { alpha, beta } => {
                let m = (pf + alpha) / 2.0;
                Ok((log_gamma(m + k / 2.0)? - log_gamma(m)? - 0.5 * k * beta.ln()).exp())
            }
            Family::MixtureDiff { a, b } => {
                // Each Gaussian piece contributes σ^{p+k} 2^{(p+k)/2−1} Γ((p+k)/2).
                let h = (pf + k) / 2.0;
                let num = 1.0 - a * b.powf(h);
                let den = 1.0 - a * b.powf(pf / 2.0);
                Ok(gauss_moment_ratio(pf, k, 1.0) * num / den)
            }
            Family::Tabulated { .. } => {
                let m = self
                    .table()
                    .radial_integral(pf + k - 1.0)
                    .map_err(|e| match e {
                        Error::DivergentMoment { .. } => Error::DivergentMoment { order: k },
                        other => other,
                    })?;
                Ok(sphere_surface(self.p) * self.norm_const * m)
            }
        }
    }

    /// The same moment by direct quadrature of `c_p r^{p+k−1} f(r)`.
    pub fn moment_by_quadrature(&self, k: f64) -> Result<f64> {
        let pf = self.p as f64;
        if !(pf + k > 0.0) {
            return Err(Error::DivergentMoment { order: k });
        }
        let cp = sphere_surface(self.p);
        let expo = pf + k - 1.0;
        let spec = QuadratureSpec::relative(1e-12).with_hints([self.scale()]);
        let integrand = |r: f64| {
            if r == 0.0 {
                return 0.0;
            }
            (expo * r.ln() + self.log_density(r)).exp()
        };
        let res = match self.decay_class() {
            DecayClass::Power => {
                let knots = match &self.family {
                    Family::Tabulated { r, .. } => r.clone(),
                    _ => unreachable!(),
                };
                let last = *knots.last().unwrap();
                let head = integrate(integrand, 0.0, last, &spec.clone().with_hints(knots))?;
                let tail = integrate_semi_infinite(integrand, last, DecayClass::Power, &spec)
                    .map_err(|e| match e {
                        Error::DivergenceSuspected(_) => Error::DivergentMoment { order: k },
                        other => other,
                    })?;
                head.value + tail.value
            }
            decay => integrate_semi_infinite(integrand, 0.0, decay, &spec)?.value,
        };
        Ok(cp * res)
    }

    /// Radius beyond which `F(R) ≤ 1e-10 F(0)`.
    pub fn effective_support(&self) -> f64 {
        let target = self.log_big_f(0.0) + (1e-10f64).ln();
        let mut lo = 0.0;
        let mut hi = self.scale();
        while self.log_big_f(hi) > target {
            lo = hi;
            hi *= 2.0;
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if self.log_big_f(mid) > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }

    /// Best certified tail bound `r^{p+s} f(r) ≤ L` for `r ≥ r0`.
    pub fn tail_profile(&self) -> TailProfile {
        let pf = self.p as f64;
        let (r0, s, check_hi) = match &self.family {
            Family::Tabulated { r, .. } => {
                let last = *r.last().unwrap();
                let r0 = last / 10.0;
                let (xs, ys): (Vec<f64>, Vec<f64>) = r
                    .iter()
                    .filter(|&&v| v >= r0 && v > 0.0)
                    .map(|&v| (v.ln(), self.log_density(v)))
                    .unzip();
                let slope = if xs.len() >= 2 {
                    numerics::ls_slope(&xs, &ys)
                } else {
                    self.table().tail_q
                };
                let s = (-slope - pf).min(TAIL_INDEX_CAP);
                (r0, s, last * 10.0)
            }
            _ => (self.scale(), TAIL_INDEX_CAP, 64.0 * self.scale()),
        };
        // Grid check of the bound; L is the largest value seen.
        let grid = numerics::geometric_grid(r0, check_hi, 400);
        let log_l = grid
            .iter()
            .map(|&r| (pf + s) * r.ln() + self.log_density(r))
            .fold(f64::NEG_INFINITY, f64::max);
        TailProfile {
            r0,
            l_bound: log_l.exp(),
            s,
        }
    }
}

/// Standard-normal radial moment `E‖Z‖^k` scaled by `σ^k`.
fn gauss_moment_ratio(p: f64, k: f64, sigma: f64) -> f64 {
    let lg = |x: f64| statrs::function::gamma::ln_gamma(x);
    (0.5 * k * 2f64.ln() + lg((p + k) / 2.0) - lg(p / 2.0) + k * sigma.ln()).exp()
}
