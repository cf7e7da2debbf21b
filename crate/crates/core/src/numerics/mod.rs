//! Shared numerical kernel: adaptive quadrature, interpolation, special functions.

mod interp;
mod quadrature;
mod special;

pub use interp::MonotoneCubic;
pub(crate) use quadrature::gk21;
pub use quadrature::{
    integrate, integrate_semi_infinite, DecayClass, IntegralResult, QuadratureSpec,
};
pub use special::{
    beta_fn, gamma, log_gamma, log_upper_incomplete_gamma, sphere_surface, upper_incomplete_gamma,
    upper_incomplete_gamma_scaled,
};

/// Geometric grid of `n` points from `lo` to `hi` inclusive.
pub fn geometric_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && n >= 2);
    let ratio = (hi / lo).ln() / (n - 1) as f64;
    (0..n).map(|i| lo * (ratio * i as f64).exp()).collect()
}

/// Geometric grid with a fixed number of points per decade.
pub fn decade_grid(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    let decades = (hi / lo).log10();
    let n = (decades * per_decade as f64).round() as usize + 1;
    geometric_grid(lo, hi, n.max(2))
}

/// Least-squares slope of `ys` against `xs`.
pub fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}
