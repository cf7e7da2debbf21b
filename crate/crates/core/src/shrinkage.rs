//! The harmonic-prior shrinkage estimator `δ*(x) = (1 − φ*(‖x‖)/‖x‖²) x`.

use crate::error::{Error, Result};
use crate::exec::ExecPolicy;
use crate::numerics::{self, integrate, MonotoneCubic, QuadratureSpec};
use crate::radial_models::RadialDensity;
use crate::rv_priors::RadialPrior;

pub use crate::radial_convolution::gb_multiplier;

const SEGMENT_REL_TOL: f64 = 1e-13;
const PROFILE_TOL: f64 = 1e-6;

fn segment_spec() -> QuadratureSpec {
    QuadratureSpec::relative(SEGMENT_REL_TOL)
}

/// `∫_a^b t^{m} F(t) dt`.
fn moment_of_f(model: &RadialDensity, m: i32, a: f64, b: f64) -> Result<f64> {
    let spec = segment_spec().with_hints([model.scale()]);
    let res = integrate(
        |t: f64| {
            if t == 0.0 {
                return if m == 0 { model.big_f(0.0) } else { 0.0 };
            }
            (m as f64 * t.ln() + model.log_big_f(t)).exp()
        },
        a,
        b,
        &spec,
    )?;
    Ok(res.value)
}

/// `φ*(r) = ∫₀^r t^{p−1}F / ∫₀^r t^{p−3}F`.
pub fn phi_star(model: &RadialDensity, r: f64) -> Result<f64> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::Domain(format!("phi_star needs r > 0, got {r}")));
    }
    Ok(phi_star_sorted(model, &[r])?[0])
}

/// The same quantity written on the unit interval, `r² ∫₀¹ t^{p−1}F(rt) / ∫₀¹ t^{p−3}F(rt)`.
pub fn phi_star_unit(model: &RadialDensity, r: f64) -> Result<f64> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::Domain(format!("phi_star needs r > 0, got {r}")));
    }
    let p = model.dimension() as i32;
    let spec = segment_spec().with_hints([(model.scale() / r).min(0.5)]);
    let piece = |m: i32| {
        integrate(
            |t: f64| {
                if t == 0.0 {
                    return if m == 0 { model.big_f(0.0) } else { 0.0 };
                }
                (m as f64 * t.ln() + model.log_big_f(r * t)).exp()
            },
            0.0,
            1.0,
            &spec,
        )
        .map(|v| v.value)
    };
    Ok(r * r * piece(p - 1)? / piece(p - 3)?)
}

/// `φ*` at every radius of an increasing list, accumulating both integrals segment by segment.
pub fn phi_star_sorted(model: &RadialDensity, rs: &[f64]) -> Result<Vec<f64>> {
    Ok(accumulate(model, rs)?
        .into_iter()
        .map(|(n, d)| n / d)
        .collect())
}

/// Running `(∫₀^r t^{p−1}F, ∫₀^r t^{p−3}F)` along an increasing list of radii.
fn accumulate(model: &RadialDensity, rs: &[f64]) -> Result<Vec<(f64, f64)>> {
    let p = model.dimension() as i32;
    let mut num = 0.0;
    let mut den = 0.0;
    let mut prev = 0.0;
    let mut out = Vec::with_capacity(rs.len());
    for &r in rs {
        if !(r > prev) {
            return Err(Error::Domain(
                "radii must be positive and strictly increasing".into(),
            ));
        }
        num += moment_of_f(model, p - 1, prev, r)?;
        den += moment_of_f(model, p - 3, prev, r)?;
        prev = r;
        out.push((num, den));
    }
    Ok(out)
}

/// `d ln φ* / d ln r`, from `φ*′ = r^{p−3}F(r)(r² − φ*)/∫₀^r t^{p−3}F`.
fn log_slope(model: &RadialDensity, r: f64, num: f64, den: f64) -> f64 {
    let p = model.dimension() as f64;
    let phi = num / den;
    let w = ((p - 2.0) * r.ln() + model.log_big_f(r)).exp();
    w * (r * r - phi) / (den * phi)
}

/// `(p − 2) E₀‖X‖² / p`, the value `φ*` approaches at infinity.
pub fn phi_limit(model: &RadialDensity) -> Result<f64> {
    let p = model.dimension() as f64;
    Ok((p - 2.0) * model.moment(2.0)? / p)
}

/// Shrinkage multiplier `1 − φ*(r)/r²` as a function of `r = ‖x‖`.
pub trait RadialMultiplier: Send + Sync {
    fn multiplier(&self, r: f64) -> f64;
}

/// Scales `x` in place by the estimator's multiplier at `‖x‖`.
pub fn apply_multiplier<M: RadialMultiplier + ?Sized>(est: &M, x: &mut [f64]) {
    let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if r == 0.0 {
        return;
    }
    let k = est.multiplier(r);
    x.iter_mut().for_each(|v| *v *= k);
}

/// Tabulated `φ*` for fast repeated evaluation of `δ*`.
///
/// `ln φ*` is interpolated against `ln r` by a monotone cubic, and the grid is refined
/// until every interval midpoint is reproduced to `1e-6` relative.
#[derive(Debug, Clone)]
pub struct ShrinkageProfile {
    p: usize,
    r_grid: Vec<f64>,
    phi_values: Vec<f64>,
    interp: MonotoneCubic,
    limit_value: f64,
    small_r_ratio: f64,
}

impl ShrinkageProfile {
    pub fn new(model: &RadialDensity) -> Result<Self> {
        Self::with_points(model, 64)
    }

    pub fn with_points(model: &RadialDensity, initial: usize) -> Result<Self> {
        let p = model.dimension();
        let limit_value = phi_limit(model).unwrap_or(f64::INFINITY);
        let lo = 1e-4 * model.scale();
        let hi = match model.decay_class() {
            numerics::DecayClass::Power => 1e6 * model.effective_support(),
            _ => 4.0 * model.effective_support(),
        };
        let mut n = initial.max(8);
        loop {
            let r_grid = numerics::geometric_grid(lo, hi, n);
            let acc = accumulate(model, &r_grid)?;
            let phi_values: Vec<f64> = acc.iter().map(|(a, b)| a / b).collect();
            let slopes = r_grid
                .iter()
                .zip(&acc)
                .map(|(&r, &(a, b))| log_slope(model, r, a, b))
                .collect();
            let interp = MonotoneCubic::with_slopes(
                r_grid.iter().map(|v| v.ln()).collect(),
                phi_values.iter().map(|v| v.ln()).collect(),
                slopes,
            )?;
            let mids: Vec<f64> = r_grid.windows(2).map(|w| (w[0] * w[1]).sqrt()).collect();
            let exact = phi_star_sorted(model, &mids)?;
            let worst = mids
                .iter()
                .zip(&exact)
                .map(|(m, e)| (interp.eval(m.ln()).exp() - e).abs() / e)
                .fold(0.0, f64::max);
            if worst <= PROFILE_TOL {
                let small_r_ratio = phi_values[0] / (r_grid[0] * r_grid[0]);
                return Ok(Self {
                    p,
                    r_grid,
                    phi_values,
                    interp,
                    limit_value,
                    small_r_ratio,
                });
            }
            if n > 1 << 14 {
                return Err(Error::ToleranceNotReached {
                    value: f64::NAN,
                    error_estimate: worst,
                    subdivisions: n,
                });
            }
            n = 2 * n - 1;
        }
    }

    pub fn dimension(&self) -> usize {
        self.p
    }

    pub fn r_grid(&self) -> &[f64] {
        &self.r_grid
    }

    pub fn phi_values(&self) -> &[f64] {
        &self.phi_values
    }

    pub fn limit_value(&self) -> f64 {
        self.limit_value
    }

    /// Interpolated `φ*(r)`; below the grid `φ*/r²` is held, above it `φ*` is held.
    pub fn phi(&self, r: f64) -> f64 {
        let r = r.abs();
        if r <= self.r_grid[0] {
            return self.small_r_ratio * r * r;
        }
        self.interp.eval(r.ln()).exp()
    }

    /// `δ*(x)`, with `δ*(0) = 0`.
    pub fn estimate(&self, x: &[f64]) -> Vec<f64> {
        let mut out = x.to_vec();
        apply_multiplier(self, &mut out);
        out
    }
}

impl RadialMultiplier for ShrinkageProfile {
    fn multiplier(&self, r: f64) -> f64 {
        if r == 0.0 {
            return 1.0 - self.small_r_ratio;
        }
        1.0 - self.phi(r) / (r * r)
    }
}

/// Tabulated generalized-Bayes multiplier `κ(r)` for an arbitrary radial prior.
///
/// `s(r) = r²(1 − κ(r))` is interpolated on a geometric grid; below the grid `1 − κ` is
/// held, above it `s` is held.
#[derive(Debug, Clone)]
pub struct GbProfile {
    r_grid: Vec<f64>,
    kappa: Vec<f64>,
    interp: MonotoneCubic,
}

impl GbProfile {
    pub fn new(prior: &RadialPrior, model: &RadialDensity, policy: ExecPolicy) -> Result<Self> {
        let lo = 0.02 * model.scale();
        let hi = match model.decay_class() {
            numerics::DecayClass::Power => 1e3 * model.effective_support(),
            _ => 4.0 * model.effective_support(),
        };
        let r_grid = numerics::geometric_grid(lo, hi, 48);
        Self::on_grid(prior, model, r_grid, policy)
    }

    pub fn on_grid(
        prior: &RadialPrior,
        model: &RadialDensity,
        r_grid: Vec<f64>,
        policy: ExecPolicy,
    ) -> Result<Self> {
        if r_grid.len() < 2 || r_grid.windows(2).any(|w| !(w[0] > 0.0 && w[1] > w[0])) {
            return Err(Error::Domain(
                "grid must be positive and strictly increasing".into(),
            ));
        }
        let kappa = policy.try_map(&r_grid, |&r| gb_multiplier(prior, model, r))?;
        let s: Vec<f64> = r_grid
            .iter()
            .zip(&kappa)
            .map(|(r, k)| r * r * (1.0 - k))
            .collect();
        let interp = MonotoneCubic::new(r_grid.clone(), s)?;
        Ok(Self {
            r_grid,
            kappa,
            interp,
        })
    }

    pub fn r_grid(&self) -> &[f64] {
        &self.r_grid
    }

    pub fn kappa_values(&self) -> &[f64] {
        &self.kappa
    }
}

impl RadialMultiplier for GbProfile {
    fn multiplier(&self, r: f64) -> f64 {
        if r <= self.r_grid[0] {
            return self.kappa[0];
        }
        let last = self.r_grid.len() - 1;
        let s = if r >= self.r_grid[last] {
            self.interp.values()[last]
        } else {
            self.interp.eval(r)
        };
        1.0 - s / (r * r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial_models::Family;

    #[test]
    fn gaussian_limits() {
        let g3 = RadialDensity::gaussian(3);
        assert!((phi_star(&g3, 40.0).unwrap() - 1.0).abs() < 1e-10);
        let g5 = RadialDensity::gaussian(5);
        assert!((phi_star(&g5, 50.0).unwrap() - 3.0).abs() < 1e-10);
        assert!((phi_limit(&RadialDensity::gaussian(4)).unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn small_r_ratio() {
        for p in [3usize, 4, 7] {
            let m = RadialDensity::gaussian(p);
            let r = 1e-4;
            let v = phi_star(&m, r).unwrap() / (r * r);
            assert!((v - (p as f64 - 2.0) / p as f64).abs() < 1e-7);
        }
    }

    #[test]
    fn limit_examples() {
        for p in [3usize, 4, 6] {
            let pf = p as f64;
            for (alpha, beta) in [(0.0, 1.0), (2.0, 0.5), (4.0, 2.0)] {
                let m = RadialDensity::new(Family::PolyExp { alpha, beta }, p).unwrap();
                let expect = (pf - 2.0) * (pf + alpha) / (2.0 * beta * pf);
                assert!((phi_limit(&m).unwrap() - expect).abs() < 1e-12 * expect);
            }
        }
        let (a, b) = (0.5f64, 0.3f64);
        let m = RadialDensity::new(Family::MixtureDiff { a, b }, 4).unwrap();
        let expect = 2.0 * (1.0 - a * b.powi(3)) / (1.0 - a * b * b);
        assert!((phi_limit(&m).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn both_forms_agree() {
        let models = [
            RadialDensity::gaussian(3),
            RadialDensity::new(
                Family::PolyExp {
                    alpha: 4.0,
                    beta: 1.0,
                },
                5,
            )
            .unwrap(),
            RadialDensity::new(Family::MixtureDiff { a: 0.9, b: 0.5 }, 4).unwrap(),
        ];
        for m in &models {
            for r in [0.01, 0.3, 1.0, 2.5, 7.0, 30.0] {
                let a = phi_star(m, r).unwrap();
                let b = phi_star_unit(m, r).unwrap();
                assert!((a - b).abs() <= 1e-10 * a, "{} r={r}: {a} vs {b}", m.id());
            }
        }
    }

    #[test]
    fn estimate_example_and_origin() {
        let m = RadialDensity::gaussian(5);
        let prof = ShrinkageProfile::new(&m).unwrap();
        let mut x = vec![0.0; 5];
        x[2] = 10.0;
        let est = prof.estimate(&x);
        assert!((est[2] / 10.0 - 0.97).abs() < 0.002);
        assert_eq!(prof.estimate(&[0.0; 5]), vec![0.0; 5]);
        // Profile vs direct quadrature.
        for r in [0.05, 0.7, 2.0, 4.4, 9.0] {
            let d = phi_star(&m, r).unwrap();
            assert!((prof.phi(r) - d).abs() <= 1e-6 * d);
        }
    }

    #[test]
    fn rotation_equivariance() {
        let m = RadialDensity::gaussian(3);
        let prof = ShrinkageProfile::new(&m).unwrap();
        let x = [0.3, -1.2, 2.0];
        // Rotation by angle 0.7 in the (0,1) plane.
        let (s, c) = 0.7f64.sin_cos();
        let rot = |v: &[f64]| vec![c * v[0] - s * v[1], s * v[0] + c * v[1], v[2]];
        let a = prof.estimate(&rot(&x));
        let b = rot(&prof.estimate(&x));
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_radius() {
        let m = RadialDensity::gaussian(3);
        assert!(phi_star(&m, 0.0).is_err());
        assert!(phi_star_sorted(&m, &[1.0, 0.5]).is_err());
    }

    #[test]
    fn gb_profile_harmonic_matches_shrinkage_profile() {
        let m = RadialDensity::gaussian(4);
        let gb = GbProfile::new(&RadialPrior::harmonic(4), &m, ExecPolicy::default()).unwrap();
        let exact = ShrinkageProfile::new(&m).unwrap();
        for r in [0.3, 1.0, 2.5, 6.0, 30.0] {
            let a = gb.multiplier(r);
            let b = exact.multiplier(r);
            assert!((a - b).abs() < 2e-3, "r={r}: {a} vs {b}");
        }
    }
}
