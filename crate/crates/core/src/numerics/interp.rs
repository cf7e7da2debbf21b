//! Shape-preserving cubic Hermite interpolation.

use crate::error::{Error, Result};

/// Piecewise cubic Hermite interpolant on strictly increasing knots.
///
/// Slopes are limited (Fritsch-Carlson) so the interpolant is monotone on every
/// interval where the data are monotone. Outside the knot range the end values are held.
#[derive(Debug, Clone)]
pub struct MonotoneCubic {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl MonotoneCubic {
    /// PCHIP slopes estimated from the data.
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        check_knots(&x, &y)?;
        let n = x.len();
        let secants: Vec<f64> = (0..n - 1)
            .map(|i| (y[i + 1] - y[i]) / (x[i + 1] - x[i]))
            .collect();
        let mut d = vec![0.0; n];
        if n == 2 {
            d[0] = secants[0];
            d[1] = secants[0];
        } else {
            for i in 1..n - 1 {
                let (s0, s1) = (secants[i - 1], secants[i]);
                if s0 * s1 <= 0.0 {
                    d[i] = 0.0;
                } else {
                    let h0 = x[i] - x[i - 1];
                    let h1 = x[i + 1] - x[i];
                    let w1 = 2.0 * h1 + h0;
                    let w2 = h1 + 2.0 * h0;
                    d[i] = (w1 + w2) / (w1 / s0 + w2 / s1);
                }
            }
            d[0] = end_slope(x[1] - x[0], x[2] - x[1], secants[0], secants[1]);
            d[n - 1] = end_slope(
                x[n - 1] - x[n - 2],
                x[n - 2] - x[n - 3],
                secants[n - 2],
                secants[n - 3],
            );
        }
        Ok(Self { x, y, d })
    }

    /// Hermite interpolant with caller-supplied slopes, limited to keep monotone data monotone.
    pub fn with_slopes(x: Vec<f64>, y: Vec<f64>, mut d: Vec<f64>) -> Result<Self> {
        check_knots(&x, &y)?;
        if d.len() != x.len() {
            return Err(Error::Domain("slope count must match knot count".into()));
        }
        for i in 0..x.len() - 1 {
            let s = (y[i + 1] - y[i]) / (x[i + 1] - x[i]);
            if s == 0.0 {
                d[i] = 0.0;
                d[i + 1] = 0.0;
                continue;
            }
            for j in [i, i + 1] {
                if d[j] * s < 0.0 || !d[j].is_finite() {
                    d[j] = if d[j].is_finite() { 0.0 } else { 3.0 * s };
                }
            }
            let a = d[i] / s;
            let b = d[i + 1] / s;
            let r = a * a + b * b;
            if r > 9.0 {
                let t = 3.0 / r.sqrt();
                d[i] = t * a * s;
                d[i + 1] = t * b * s;
            }
        }
        Ok(Self { x, y, d })
    }

    pub fn knots(&self) -> &[f64] {
        &self.x
    }

    pub fn values(&self) -> &[f64] {
        &self.y
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        if t <= self.x[0] {
            return self.y[0];
        }
        if t >= self.x[n - 1] {
            return self.y[n - 1];
        }
        let i = self.x.partition_point(|&v| v <= t) - 1;
        let h = self.x[i + 1] - self.x[i];
        let s = (t - self.x[i]) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.y[i] + h10 * h * self.d[i] + h01 * self.y[i + 1] + h11 * h * self.d[i + 1]
    }
}

fn end_slope(h0: f64, h1: f64, s0: f64, s1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * s0 - h0 * s1) / (h0 + h1);
    if d * s0 <= 0.0 {
        0.0
    } else if s0 * s1 <= 0.0 && d.abs() > 3.0 * s0.abs() {
        3.0 * s0
    } else {
        d
    }
}

fn check_knots(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() < 2 || x.len() != y.len() {
        return Err(Error::Domain(format!(
            "interpolation needs >= 2 matching knots (got {} x, {} y)",
            x.len(),
            y.len()
        )));
    }
    if x.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain(
            "interpolation knots must be strictly increasing".into(),
        ));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("interpolation values must be finite".into()));
    }
    Ok(())
}
