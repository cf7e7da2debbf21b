//! Convolutions of radial functions against the density or the tail kernel, reduced
//! from `p` dimensions to a double integral over `(λ, φ)`.
//!
//! With `λ = ‖θ − x‖` and `φ` the angle between `θ − x` and `x`,
//! `∫ ϱ(‖θ‖) w(‖θ − x‖) dθ = c_{p−1} ∫₀^∞ ∫₀^π ϱ(√(r² + λ² + 2rλ cos φ)) w(λ) λ^{p−1} sin^{p−2}φ dφ dλ`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{
    self, integrate, integrate_semi_infinite, sphere_surface, DecayClass, QuadratureSpec,
};
use crate::radial_models::RadialDensity;
use crate::rv_priors::{fg1_check, RadialPrior};

/// Which radial weight sits under the convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    /// `f(λ)`
    Density,
    /// `F(λ)/C_f`, itself a density on `R^p`.
    Tail,
}

/// `C_f = E₀‖X‖²/p`, the normalizer that makes `F/C_f` a density.
pub fn c_f(model: &RadialDensity) -> Result<f64> {
    Ok(model.moment(2.0)? / model.dimension() as f64)
}

/// A radial integrand paired with the model and evaluation point.
pub struct ConvolutionProblem<'a> {
    pub model: &'a RadialDensity,
    pub kernel: Kernel,
    pub r: f64,
    /// `ln ϱ(ρ)`; returning `-inf` is allowed.
    pub ln_rho: &'a (dyn Fn(f64) -> f64 + Sync),
}

#[derive(Clone, Copy)]
enum Moment {
    Plain,
    /// Extra factor `λ cos φ`, the component of `θ − x` along `x`.
    Along {
        abs_tol: f64,
    },
}

fn ln_weight(problem: &ConvolutionProblem<'_>, ln_cf: f64, lambda: f64) -> f64 {
    match problem.kernel {
        Kernel::Density => problem.model.log_density(lambda),
        Kernel::Tail => problem.model.log_big_f(lambda) - ln_cf,
    }
}

/// Hints in `ψ = π − φ`: the peak at `ψ = 0` has width about `|r − λ|/√(rλ)`.
fn angular_hints(r: f64, lam: f64) -> Vec<f64> {
    let mut hints = vec![PI / 2.0];
    let width = (r - lam).abs() / (r * lam).sqrt();
    let mut d = width.max(1e-200);
    while d < PI / 2.0 {
        hints.push(d);
        d *= 8.0;
    }
    hints
}

fn outer_spec(hints: &[f64]) -> QuadratureSpec {
    QuadratureSpec::relative(1e-9).with_hints(hints.iter().copied())
}

/// `∫₀^π ϱ(ρ) sin^{p−2}φ · e^{lw} dφ`, and with the extra `λ cos φ` factor when `along`.
fn angular(
    ln_rho: &(dyn Fn(f64) -> f64 + Sync),
    pf: f64,
    r: f64,
    lam: f64,
    lw: f64,
    along: bool,
) -> Result<f64> {
    let d2 = (r - lam) * (r - lam);
    // Integrate in ψ = π − φ so the near-coincident peak sits at the origin.
    let base = |psi: f64| -> f64 {
        let s = psi.sin();
        if s <= 0.0 {
            return 0.0;
        }
        let h = (0.5 * psi).sin();
        let rho = (d2 + 4.0 * r * lam * h * h).sqrt();
        ((pf - 2.0) * s.ln() + lw + ln_rho(rho)).exp()
    };
    let hints = angular_hints(r, lam);
    let plain = integrate(
        base,
        0.0,
        PI,
        &QuadratureSpec::new(1e-300, 1e-11).with_hints(hints.iter().copied()),
    )?
    .value;
    if !along {
        return Ok(plain);
    }
    // Signed integrand: the tolerance is tied to the unsigned mass.
    let spec = QuadratureSpec::new((1e-12 * lam * plain).max(1e-300), 1e-11).with_hints(hints);
    Ok(integrate(|psi: f64| -base(psi) * lam * psi.cos(), 0.0, PI, &spec)?.value)
}

fn double_integral(problem: &ConvolutionProblem<'_>, moment: Moment) -> Result<f64> {
    let model = problem.model;
    let p = model.dimension();
    let pf = p as f64;
    let r = problem.r;
    if !(r >= 0.0) || !r.is_finite() {
        return Err(Error::Domain(format!(
            "radius must be finite and nonnegative, got {r}"
        )));
    }
    let ln_cf = match problem.kernel {
        Kernel::Tail => c_f(model)?.ln(),
        Kernel::Density => 0.0,
    };
    let ln_rho = problem.ln_rho;

    if r == 0.0 {
        // The angular integral collapses to c_p; the along-x component vanishes by symmetry.
        if let Moment::Along { .. } = moment {
            return Ok(0.0);
        }
        let spec = outer_spec(&[model.scale(), model.effective_support()]);
        let g = |lam: f64| {
            if lam == 0.0 {
                return 0.0;
            }
            ((pf - 1.0) * lam.ln() + ln_weight(problem, ln_cf, lam) + ln_rho(lam)).exp()
        };
        let cut = model.effective_support();
        let near = integrate(g, 0.0, cut, &spec)?.value;
        let far = integrate_semi_infinite(g, cut, model.decay_class(), &spec)?.value;
        return Ok(sphere_surface(p) * (near + far));
    }

    let cp1 = sphere_surface(p - 1);
    let (along, abs_tol) = match moment {
        Moment::Plain => (false, f64::MIN_POSITIVE),
        Moment::Along { abs_tol } => (true, (abs_tol / cp1).max(f64::MIN_POSITIVE)),
    };
    let mut failure: Option<Error> = None;
    let mut outer = |lam: f64| -> f64 {
        if lam == 0.0 || failure.is_some() {
            return 0.0;
        }
        let lw = (pf - 1.0) * lam.ln() + ln_weight(problem, ln_cf, lam);
        if lw == f64::NEG_INFINITY {
            return 0.0;
        }
        match angular(ln_rho, pf, r, lam, lw, along) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        }
    };
    let support = model.effective_support();
    let mut cuts = vec![r, model.scale(), support];
    cuts.sort_by(f64::total_cmp);
    let top = cuts[2].max(r + support);
    let mut spec = outer_spec(&cuts);
    spec.abs_tol = abs_tol;
    let near = integrate(&mut outer, 0.0, top, &spec);
    let far = integrate_semi_infinite(
        &mut outer,
        top,
        model.decay_class(),
        &QuadratureSpec::new(abs_tol, 1e-9),
    );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(cp1 * (near?.value + far?.value))
}

/// `∫ ϱ(‖θ‖) w(‖θ − x‖) dθ` at `‖x‖ = r`.
pub fn radial_expectation(problem: &ConvolutionProblem<'_>) -> Result<f64> {
    double_integral(problem, Moment::Plain)
}

/// `c_p (p−2) ∫₀^r u^{p−3} F(u) du`, split so neither small nor large `r` cancels.
/// Returns `(m/g, ln(1 − m/g))`.
fn harmonic_ratio_parts(model: &RadialDensity, r: f64) -> Result<(f64, f64)> {
    let p = model.dimension();
    let pf = p as f64;
    let norm = sphere_surface(p) * (pf - 2.0);
    let expo = pf - 3.0;
    let f = |u: f64| {
        if u == 0.0 {
            return if p == 3 { model.big_f(0.0) } else { 0.0 };
        }
        (expo * u.ln() + model.log_big_f(u)).exp()
    };
    // Tail piece in log space: scale by the integrand at r.
    let ln_tail = if r == 0.0 {
        0.0
    } else {
        let shift = expo * r.ln() + model.log_big_f(r);
        let decay = match model.decay_class() {
            DecayClass::Power => DecayClass::Power,
            DecayClass::Exponential { .. } => DecayClass::Exponential {
                scale: (model.tail_ratio(r) / r).min(model.scale()),
            },
        };
        let v = integrate_semi_infinite(
            |u: f64| (expo * u.ln() + model.log_big_f(u) - shift).exp(),
            r,
            decay,
            &QuadratureSpec::relative(1e-10),
        )?
        .value;
        v.ln() + shift + norm.ln()
    };
    if ln_tail < (0.5f64).ln() {
        return Ok((1.0 - ln_tail.exp(), ln_tail));
    }
    let head = integrate(
        f,
        0.0,
        r,
        &QuadratureSpec::relative(1e-12).with_hints([model.scale()]),
    )?
    .value;
    let ratio = norm * head;
    Ok((ratio, (-ratio).ln_1p()))
}

/// `m(g|x)` for the harmonic prior: `r^{2−p} c_p (p−2) ∫₀^r u^{p−3}F(u) du`, equal to
/// `c_p(p−2) ∫₀¹ t^{p−3} F(rt) dt`.
pub fn harmonic_marginal(model: &RadialDensity, r: f64) -> Result<f64> {
    let p = model.dimension() as f64;
    if r == 0.0 {
        return Ok(sphere_surface(model.dimension()) * model.big_f(0.0));
    }
    Ok(harmonic_ratio_parts(model, r)?.0 * r.powf(2.0 - p))
}

/// `c_p(p−2) ∫₀¹ t^{p−3} F(rt) dt`, integrated literally on the unit interval.
pub fn harmonic_marginal_unit(model: &RadialDensity, r: f64) -> Result<f64> {
    let p = model.dimension();
    let pf = p as f64;
    let v = integrate(
        |t: f64| {
            if t == 0.0 {
                return if p == 3 { model.big_f(0.0) } else { 0.0 };
            }
            ((pf - 3.0) * t.ln() + model.log_big_f(r * t)).exp()
        },
        0.0,
        1.0,
        &QuadratureSpec::relative(1e-12).with_hints([(model.scale() / r.max(1e-300)).min(0.5)]),
    )?
    .value;
    Ok(sphere_surface(p) * (pf - 2.0) * v)
}

fn require_euclidean(prior: &RadialPrior) -> Result<()> {
    if !prior.is_euclidean() {
        return Err(Error::Domain(
            "convolution probes need the Euclidean norm (all weights d_i = 1)".into(),
        ));
    }
    Ok(())
}

/// `m(g|x) = ∫ g(θ) f(‖θ − x‖) dθ`.
pub fn marginal_m(prior: &RadialPrior, model: &RadialDensity, r: f64) -> Result<f64> {
    require_euclidean(prior)?;
    if prior.is_harmonic() {
        return harmonic_marginal(model, r);
    }
    fg1_check(prior, model)?;
    marginal_oracle(prior, model, r)
}

/// `m(g|x)` by the double integral, with no closed-form dispatch.
pub fn marginal_oracle(prior: &RadialPrior, model: &RadialDensity, r: f64) -> Result<f64> {
    let ln_rho = |rho: f64| prior.ln_g(rho);
    radial_expectation(&ConvolutionProblem {
        model,
        kernel: Kernel::Density,
        r,
        ln_rho: &ln_rho,
    })
}

/// `M(ϱ|x) = (1/C_f) ∫ ϱ(‖θ‖) F(‖θ − x‖) dθ`, with `ϱ` given through its logarithm.
pub fn kernel_marginal_big_m(
    ln_rho: &(dyn Fn(f64) -> f64 + Sync),
    model: &RadialDensity,
    r: f64,
) -> Result<f64> {
    radial_expectation(&ConvolutionProblem {
        model,
        kernel: Kernel::Tail,
        r,
        ln_rho,
    })
}

/// Posterior-mean multiplier `κ(r)` with `δ_g(x) = κ(‖x‖) x`.
///
/// `κ(r) = 1 + ∫∫ g(ρ) f(λ) λ^p cos φ sin^{p−2}φ / (r ∫∫ g(ρ) f(λ) λ^{p−1} sin^{p−2}φ)`.
pub fn gb_multiplier(prior: &RadialPrior, model: &RadialDensity, r: f64) -> Result<f64> {
    require_euclidean(prior)?;
    if !(r > 0.0) {
        return Err(Error::Domain(format!("gb_multiplier needs r > 0, got {r}")));
    }
    fg1_check(prior, model)?;
    let ln_rho = |rho: f64| prior.ln_g(rho);
    let problem = ConvolutionProblem {
        model,
        kernel: Kernel::Density,
        r,
        ln_rho: &ln_rho,
    };
    let den = double_integral(&problem, Moment::Plain)?;
    let num = double_integral(
        &problem,
        Moment::Along {
            abs_tol: 1e-11 * r * den,
        },
    )?;
    Ok(1.0 + num / (r * den))
}

/// One row of the asymptotic-ratio table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeRow {
    pub r: f64,
    /// `m(g|x)/g(x)`
    pub m_ratio: f64,
    /// `M(g|x)/g(x)`
    pub big_m_ratio: f64,
    /// `M(g/‖θ‖ | x)/(g(x)/r)`
    pub big_m_inv_ratio: f64,
    /// `log10 |m(g|x)/g(x) − 1|` from the exact tail identity (harmonic prior only).
    pub log10_m_deviation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeTable {
    pub rows: Vec<ProbeRow>,
    /// Fitted `ε` in `|ratio − 1| ≈ C r^{−ε}` for each ratio column; `None` when the
    /// deviations are at roundoff level.
    pub fitted_exponents: [Option<f64>; 3],
}

fn fit_exponent(rs: &[f64], devs: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rs
        .iter()
        .zip(devs)
        .filter(|(_, d)| **d > 1e-9)
        .map(|(r, d)| (r.ln(), d.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    Some(-numerics::ls_slope(&xs, &ys))
}

/// The three large-r marginal ratios along `r_list`.
pub fn asymptotic_ratio_probe(
    prior: &RadialPrior,
    model: &RadialDensity,
    r_list: &[f64],
) -> Result<ProbeTable> {
    require_euclidean(prior)?;
    if r_list.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::Domain("probe radii must be positive".into()));
    }
    fg1_check(prior, model)?;
    let ln_g = |rho: f64| prior.ln_g(rho);
    let ln_g_inv = |rho: f64| prior.ln_g(rho) - rho.ln();
    let mut rows = Vec::with_capacity(r_list.len());
    for &r in r_list {
        let g = prior.ln_g(r);
        let (m_ratio, log10_m_deviation) = if prior.is_harmonic() {
            let (ratio, ln_dev) = harmonic_ratio_parts(model, r)?;
            (ratio, Some(ln_dev / std::f64::consts::LN_10))
        } else {
            ((marginal_oracle(prior, model, r)?.ln() - g).exp(), None)
        };
        let big_m_ratio = (kernel_marginal_big_m(&ln_g, model, r)?.ln() - g).exp();
        let big_m_inv_ratio = (kernel_marginal_big_m(&ln_g_inv, model, r)?.ln() - g + r.ln()).exp();
        rows.push(ProbeRow {
            r,
            m_ratio,
            big_m_ratio,
            big_m_inv_ratio,
            log10_m_deviation,
        });
    }
    let col = |f: &dyn Fn(&ProbeRow) -> f64| -> Option<f64> {
        let devs: Vec<f64> = rows.iter().map(|row| (f(row) - 1.0).abs()).collect();
        fit_exponent(r_list, &devs)
    };
    let fitted_exponents = [
        col(&|row| row.m_ratio),
        col(&|row| row.big_m_ratio),
        col(&|row| row.big_m_inv_ratio),
    ];
    Ok(ProbeTable {
        rows,
        fitted_exponents,
    })
}
