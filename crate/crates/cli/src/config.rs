//! Run configuration: a JSON document with per-section defaults, overridden by flags.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sphereshrink::radial_models::{Family, RadialDensity};
use sphereshrink::rv_priors::{BetaKernel, LogTower, PriorSpec, RadialPrior};

use crate::CliError;

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub prior: PriorConfig,
    pub phi: PhiConfig,
    pub risk: RiskSection,
    pub hseq: HseqSection,
    pub diagnostics: DiagnosticsSection,
    pub verify: VerifySection,
    pub probe: ProbeSection,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub family: String,
    pub p: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    /// CSV file with columns `r,f` for the tabulated family.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table: Option<String>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            family: "gaussian".into(),
            p: 3,
            alpha: None,
            beta: None,
            a: None,
            b: None,
            table: None,
        }
    }
}

fn need(v: Option<f64>, name: &str, family: &str) -> Result<f64, CliError> {
    v.ok_or_else(|| CliError::Config(format!("family {family} needs --{name}")))
}

fn read_table(path: &str) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {path}: {e}")))?;
    let mut r = Vec::new();
    let mut f = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: Option<Vec<f64>> = cols.iter().map(|c| c.parse().ok()).collect();
        match parsed {
            Some(v) if v.len() == 2 => {
                r.push(v[0]);
                f.push(v[1]);
            }
            _ if lineno == 0 => continue,
            _ => {
                return Err(CliError::Config(format!(
                    "{path}:{}: expected two numeric columns",
                    lineno + 1
                )))
            }
        }
    }
    Ok((r, f))
}

impl ModelConfig {
    /// Canonical family name, accepting the long spellings as aliases.
    pub fn canonical_family(&self) -> Result<&'static str, CliError> {
        match self.family.as_str() {
            "gaussian" | "normal" => Ok("gaussian"),
            "polyexp" | "poly_exp" => Ok("polyexp"),
            "mixdiff" | "mixture_diff" => Ok("mixdiff"),
            "tabulated" => Ok("tabulated"),
            other => Err(CliError::Config(format!(
                "unknown family '{other}' (expected gaussian, polyexp, mixdiff or tabulated)"
            ))),
        }
    }

    /// Drops parameters that do not belong to the chosen family.
    pub fn resolve(&mut self) -> Result<(), CliError> {
        let fam = self.canonical_family()?;
        self.family = fam.into();
        let (keep_ab, keep_mix, keep_table) = match fam {
            "polyexp" => (true, false, false),
            "mixdiff" => (false, true, false),
            "tabulated" => (false, false, true),
            _ => (false, false, false),
        };
        if !keep_ab {
            self.alpha = None;
            self.beta = None;
        }
        if !keep_mix {
            self.a = None;
            self.b = None;
        }
        if !keep_table {
            self.table = None;
        }
        Ok(())
    }

    pub fn build(&self) -> Result<RadialDensity, CliError> {
        let fam = self.canonical_family()?;
        let family = match fam {
            "gaussian" => Family::Gaussian,
            "polyexp" => Family::PolyExp {
                alpha: need(self.alpha, "alpha", fam)?,
                beta: need(self.beta, "beta", fam)?,
            },
            "mixdiff" => Family::MixtureDiff {
                a: need(self.a, "a", fam)?,
                b: need(self.b, "b", fam)?,
            },
            _ => {
                let path = self
                    .table
                    .as_deref()
                    .ok_or_else(|| CliError::Config("family tabulated needs --table".into()))?;
                let (r, f) = read_table(path)?;
                Family::Tabulated { r, f }
            }
        };
        if self.p < 3 {
            return Err(CliError::Config(format!("p must be >= 3, got {}", self.p)));
        }
        Ok(RadialDensity::new(family, self.p)?)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct PriorConfig {
    pub family: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            family: "harmonic".into(),
            k: None,
            n: None,
            c: None,
            gamma: None,
            weights: None,
        }
    }
}

impl PriorConfig {
    pub fn spec(&self) -> Result<PriorSpec, CliError> {
        let n = self.n.unwrap_or(0);
        let c = self.c.unwrap_or(2.0);
        Ok(match self.family.as_str() {
            "harmonic" => PriorSpec::Harmonic,
            "flat" => PriorSpec::Flat,
            "power" => PriorSpec::Power {
                k: self.k.ok_or_else(|| CliError::Config("prior power needs --k".into()))?,
            },
            "log_thickened" | "log-thickened" => PriorSpec::LogThickened { n, c },
            "log_squared" | "log-squared" => PriorSpec::LogSquared { n: n.max(1), c },
            other => {
                return Err(CliError::Config(format!(
                    "unknown prior '{other}' (expected harmonic, flat, power, log_thickened or log_squared)"
                )))
            }
        })
    }

    /// Normalizes the family name and fills tower defaults.
    pub fn resolve(&mut self) -> Result<(), CliError> {
        let spec = self.spec()?;
        match spec {
            PriorSpec::Power { .. } => {
                self.family = "power".into();
                self.n = None;
                self.c = None;
            }
            PriorSpec::LogThickened { n, c } => {
                self.family = "log_thickened".into();
                self.n = Some(n);
                self.c = Some(c);
                self.k = None;
            }
            PriorSpec::LogSquared { n, c } => {
                self.family = "log_squared".into();
                self.n = Some(n);
                self.c = Some(c);
                self.k = None;
            }
            _ => {
                self.k = None;
                self.n = None;
                self.c = None;
            }
        }
        Ok(())
    }

    pub fn build(&self, p: usize) -> Result<RadialPrior, CliError> {
        let mut prior = RadialPrior::new(&self.spec()?, p)?;
        if let Some(g) = self.gamma {
            prior = prior.with_gamma(g)?;
        }
        if let Some(w) = &self.weights {
            prior = prior.with_norm_weights(w.clone())?;
        }
        Ok(prior)
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct PhiConfig {
    /// `lo:hi:n` geometric grid; the profile's own knots when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RiskSection {
    /// identity, harmonic, gb or constant.
    pub estimator: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constant: Option<f64>,
    /// `start:stop:step` or a comma list.
    pub theta: String,
    pub n: usize,
    pub seed: u64,
    pub block: usize,
    pub paired: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub direction: Option<Vec<f64>>,
}

impl Default for RiskSection {
    fn default() -> Self {
        Self {
            estimator: "harmonic".into(),
            constant: None,
            theta: "0:10:1".into(),
            n: 100_000,
            seed: 42,
            block: sphereshrink::risk_sim::DEFAULT_BLOCK,
            paired: true,
            q: None,
            direction: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct HseqSection {
    pub kernel_n: usize,
    /// Defaults to the canonical `c` with `Log_n(c) = 1`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel_c: Option<f64>,
    pub i: Vec<u64>,
    /// The suite's default grid when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<Vec<f64>>,
}

impl Default for HseqSection {
    fn default() -> Self {
        Self {
            kernel_n: 1,
            kernel_c: None,
            i: vec![1, 10, 100],
            eta: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnosticsSection {
    pub kernel_n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel_c: Option<f64>,
    pub blyth_i: Vec<u64>,
}

impl Default for DiagnosticsSection {
    fn default() -> Self {
        Self {
            kernel_n: 1,
            kernel_c: None,
            blyth_i: vec![1, 4, 16, 64],
        }
    }
}

pub fn kernel(n: usize, c: Option<f64>) -> Result<BetaKernel, CliError> {
    if n < 1 {
        return Err(CliError::Config("kernel_n must be >= 1".into()));
    }
    let c = c.unwrap_or_else(|| LogTower::canonical(n).c);
    Ok(BetaKernel::new(n, c)?)
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySection {
    /// gegenbauer, min_power, kernel_mass or all.
    pub identity: String,
    pub alpha: f64,
    pub a: f64,
    pub t: f64,
}

impl Default for VerifySection {
    fn default() -> Self {
        Self {
            identity: "all".into(),
            alpha: 1.5,
            a: 0.5,
            t: 2.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeSection {
    pub r: Vec<f64>,
}

impl Default for ProbeSection {
    fn default() -> Self {
        Self {
            r: vec![10.0, 100.0, 1000.0],
        }
    }
}

pub fn load(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))
}

/// `start:stop:step` (inclusive, arithmetic) or a comma-separated list.
pub fn parse_range(s: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Config(format!("cannot parse range '{s}'"));
    if s.contains(':') {
        let parts: Vec<f64> = s
            .split(':')
            .map(|v| v.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<_, _>>()?;
        let [start, stop, step] = parts[..] else {
            return Err(bad());
        };
        if !(step > 0.0) || stop < start {
            return Err(bad());
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize;
        Ok((0..=count).map(|j| start + j as f64 * step).collect())
    } else {
        s.split(',')
            .filter(|v| !v.trim().is_empty())
            .map(|v| v.trim().parse::<f64>().map_err(|_| bad()))
            .collect()
    }
}

/// `lo:hi:n` geometric grid.
pub fn parse_geometric(s: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Config(format!("cannot parse grid '{s}' (expected lo:hi:n)"));
    let parts: Vec<&str> = s.split(':').collect();
    let [lo, hi, n] = parts[..] else {
        return Err(bad());
    };
    let lo: f64 = lo.parse().map_err(|_| bad())?;
    let hi: f64 = hi.parse().map_err(|_| bad())?;
    let n: usize = n.parse().map_err(|_| bad())?;
    if !(lo > 0.0 && hi > lo && n >= 2) {
        return Err(bad());
    }
    Ok(sphereshrink::numerics::geometric_grid(lo, hi, n))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        assert_eq!(parse_range("0:10:1").unwrap().len(), 11);
        assert_eq!(
            parse_range("0:1:0.25").unwrap(),
            vec![0.0, 0.25, 0.5, 0.75, 1.0]
        );
        assert_eq!(parse_range("1,5, 9").unwrap(), vec![1.0, 5.0, 9.0]);
        assert!(parse_range("1:0:1").is_err());
        assert!(parse_range("a,b").is_err());
        assert_eq!(parse_geometric("1:100:3").unwrap().len(), 3);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"model": {"famly": "gaussian"}}"#).is_err());
        assert!(serde_json::from_str::<RunConfig>(r#"{"modle": {}}"#).is_err());
        let c: RunConfig = serde_json::from_str(
            r#"{"model": {"family": "polyexp", "alpha": 2, "beta": 1, "p": 4}}"#,
        )
        .unwrap();
        assert_eq!(c.model.p, 4);
        assert_eq!(c.risk, RiskSection::default());
    }

    #[test]
    fn family_aliases() {
        let mut m = ModelConfig {
            family: "poly_exp".into(),
            alpha: Some(1.0),
            beta: Some(1.0),
            a: Some(0.3),
            ..Default::default()
        };
        m.resolve().unwrap();
        assert_eq!(m.family, "polyexp");
        assert_eq!(m.a, None);
        m.family = "cauchy".into();
        assert!(m.resolve().is_err());
    }
}
