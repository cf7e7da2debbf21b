//! Closed-form integral identities checked by quadrature.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{
    beta_fn, integrate, integrate_semi_infinite, sphere_surface, QuadratureSpec,
};
use crate::radial_models::RadialDensity;

/// Largest `|a|` accepted by [`gegenbauer_identity`].
pub const GEGENBAUER_A_CAP: f64 = 0.99;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityCheck {
    pub identity: String,
    pub params: String,
    pub lhs: f64,
    pub rhs: f64,
    pub rel_error: f64,
}

impl IdentityCheck {
    fn new(identity: &str, params: String, lhs: f64, rhs: f64) -> Self {
        let rel_error = (lhs - rhs).abs() / rhs.abs().max(1e-300);
        Self {
            identity: identity.to_string(),
            params,
            lhs,
            rhs,
            rel_error,
        }
    }
}

fn angular_spec() -> QuadratureSpec {
    QuadratureSpec::new(1e-15, 1e-13)
}

/// `∫₀^π (1 + 2a cos φ + a²)^{−α} sin^{2α}φ dφ = B(α + 1/2, 1/2)` for every `|a| < 1`.
pub fn gegenbauer_identity(alpha: f64, a: f64) -> Result<IdentityCheck> {
    if !(alpha > -0.5) {
        return Err(Error::Domain(format!(
            "alpha must exceed -1/2, got {alpha}"
        )));
    }
    if !(a.abs() <= GEGENBAUER_A_CAP) {
        return Err(Error::Domain(format!(
            "|a| must be at most {GEGENBAUER_A_CAP}, got {a}"
        )));
    }
    let lhs = integrate(
        |phi: f64| {
            let base = 1.0 + 2.0 * a * phi.cos() + a * a;
            (2.0 * alpha * phi.sin().ln() - alpha * base.ln()).exp()
        },
        0.0,
        PI,
        &angular_spec().with_hints([PI / 2.0]),
    )?
    .value;
    let rhs = beta_fn(alpha + 0.5, 0.5)?;
    Ok(IdentityCheck::new(
        "gegenbauer",
        format!("alpha={alpha}, a={a}"),
        lhs,
        rhs,
    ))
}

/// `∫₀^π (1 + 2t cos φ + t²)^{1−p/2} sin^{p−2}φ dφ = B(p/2 − 1/2, 1/2) min(t^{2−p}, 1)`.
pub fn min_power_identity(p: usize, t: f64) -> Result<IdentityCheck> {
    if p < 3 {
        return Err(Error::Domain(format!("p must be >= 3, got {p}")));
    }
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("t must be positive, got {t}")));
    }
    let pf = p as f64;
    let lhs = integrate(
        |phi: f64| {
            // 1 + 2t cos φ + t² = (1 − t)² + 4t cos²(φ/2), kept in this form to avoid
            // cancellation near φ = π.
            let c = (0.5 * phi).cos();
            let base = (1.0 - t) * (1.0 - t) + 4.0 * t * c * c;
            let s = phi.sin();
            if s == 0.0 {
                return 0.0;
            }
            ((pf - 2.0) * s.ln() + (1.0 - pf / 2.0) * base.ln()).exp()
        },
        0.0,
        PI,
        &angular_spec().with_hints([PI / 2.0, PI - (1.0 - t).abs().min(0.5)]),
    )?
    .value;
    let rhs = beta_fn(pf / 2.0 - 0.5, 0.5)? * t.powf(2.0 - pf).min(1.0);
    Ok(IdentityCheck::new(
        "min_power",
        format!("p={p}, t={t}"),
        lhs,
        rhs,
    ))
}

/// `∫_{R^p} ‖y‖^α F(‖y‖) dy = (c_p/(p+α)) ∫₀^∞ z^{p+1+α} f(z) dz`.
///
/// The left side is integrated directly; the right side uses the model's moment of
/// order `2 + α`.
pub fn kernel_mass_identity(model: &RadialDensity, alpha: f64) -> Result<IdentityCheck> {
    let p = model.dimension();
    let pf = p as f64;
    if !(pf + alpha > 0.0) {
        return Err(Error::Domain(format!(
            "p + alpha must be positive, got {}",
            pf + alpha
        )));
    }
    let rhs = model.moment(2.0 + alpha)? / (pf + alpha);
    let expo = pf - 1.0 + alpha;
    let lhs = sphere_surface(p)
        * integrate_semi_infinite(
            |r: f64| {
                if r == 0.0 {
                    return 0.0;
                }
                (expo * r.ln() + model.log_big_f(r)).exp()
            },
            0.0,
            model.decay_class(),
            &QuadratureSpec::relative(1e-12).with_hints([model.scale()]),
        )
        .map_err(|e| match e {
            Error::DivergenceSuspected(_) => Error::DivergentMoment { order: 2.0 + alpha },
            other => other,
        })?
        .value;
    Ok(IdentityCheck::new(
        "kernel_mass",
        format!("model={}, alpha={alpha}", model.id()),
        lhs,
        rhs,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial_models::Family;

    #[test]
    fn gegenbauer_examples() {
        let c = gegenbauer_identity(0.5, 0.0).unwrap();
        assert!((c.lhs - 2.0).abs() < 1e-13 && (c.rhs - 2.0).abs() < 1e-13);
        let c = gegenbauer_identity(1.5, 0.9).unwrap();
        assert!((c.rhs - 4.0 / 3.0).abs() < 1e-13);
        assert!(c.rel_error < 1e-8);
    }

    #[test]
    fn gegenbauer_a_independence() {
        for alpha in [0.5, 1.0, 1.5, 2.5, 4.0] {
            let vals: Vec<f64> = [-0.9, -0.5, 0.0, 0.5, 0.9]
                .iter()
                .map(|&a| gegenbauer_identity(alpha, a).unwrap().lhs)
                .collect();
            let hi = vals.iter().cloned().fold(f64::MIN, f64::max);
            let lo = vals.iter().cloned().fold(f64::MAX, f64::min);
            assert!((hi - lo) / lo <= 1e-8, "alpha={alpha}");
        }
    }

    #[test]
    fn gegenbauer_domain() {
        assert!(gegenbauer_identity(-0.5, 0.0).is_err());
        assert!(gegenbauer_identity(1.0, 0.995).is_err());
        assert!(gegenbauer_identity(1.0, -0.99).unwrap().rel_error < 1e-6);
    }

    #[test]
    fn min_power_examples() {
        let c = min_power_identity(3, 2.0).unwrap();
        assert!((c.rhs - 1.0).abs() < 1e-14 && c.rel_error < 1e-7);
        let c = min_power_identity(4, 0.5).unwrap();
        assert!((c.rhs - PI / 2.0).abs() < 1e-14 && c.rel_error < 1e-7);
        let c = min_power_identity(6, 1e-6).unwrap();
        assert!((c.lhs - beta_fn(2.5, 0.5).unwrap()).abs() < 1e-5);
    }

    #[test]
    fn min_power_sweep_and_kink() {
        for p in [3usize, 4, 5, 8] {
            for t in [0.1, 0.5, 0.9, 1.1, 2.0, 10.0] {
                assert!(
                    min_power_identity(p, t).unwrap().rel_error < 1e-7,
                    "p={p} t={t}"
                );
            }
            assert!(min_power_identity(p, 1.0).unwrap().rel_error < 1e-5);
            let left = min_power_identity(p, 1.0 - 1e-7).unwrap().lhs;
            let right = min_power_identity(p, 1.0 + 1e-7).unwrap().lhs;
            assert!((left - right).abs() / left < 1e-5);
        }
    }

    #[test]
    fn kernel_mass_examples() {
        let g = RadialDensity::gaussian(3);
        let c = kernel_mass_identity(&g, 0.0).unwrap();
        assert!(c.rel_error < 1e-8);
        // Dividing by C_f = E₀‖X‖²/p gives total mass one.
        assert!((c.lhs / (g.moment(2.0).unwrap() / 3.0) - 1.0).abs() < 1e-8);
        for p in [3usize, 5] {
            let (alpha_m, beta) = (2.0, 0.5);
            let m = RadialDensity::new(
                Family::PolyExp {
                    alpha: alpha_m,
                    beta,
                },
                p,
            )
            .unwrap();
            let c = kernel_mass_identity(&m, 2.0).unwrap();
            // Independent closed form: Γ((p+α+4)/2)/Γ((p+α)/2) β^{-2} / (p+2).
            let lg = |x: f64| crate::numerics::log_gamma(x).unwrap();
            let pa = p as f64 + alpha_m;
            let oracle =
                (lg((pa + 4.0) / 2.0) - lg(pa / 2.0)).exp() / (beta * beta) / (p as f64 + 2.0);
            assert!((c.rhs - oracle).abs() / oracle < 1e-12);
            assert!(c.rel_error < 1e-8);
        }
    }
}
