//! Sufficient conditions for minimaxity of `δ*`, evaluated from a model's moments and
//! monotonicity properties.
//!
//! Every condition here is sufficient only. A model that satisfies none of them is
//! reported as `not_certified`, which says nothing against minimaxity.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics;
use crate::radial_models::{Family, RadialDensity};
use crate::shrinkage::phi_limit;

/// Default relative tolerance for grid monotonicity probes.
pub const MONOTONE_TOL: f64 = 1e-9;
/// Relative slack on `≤` comparisons so that exact ties survive rounding.
pub const TIE_SLACK: f64 = 1e-12;
/// Constant of the `p = 3` row, used as printed.
pub const RALESCU_CONSTANT: f64 = 0.93;

const GRID_POINTS: usize = 600;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MonotoneProperty {
    /// `f` nonincreasing.
    FNonincreasing,
    /// `F/f` nondecreasing.
    FOverFNondecreasing,
    /// `F/(t²f)` nonincreasing.
    FOverT2fNonincreasing,
}

impl MonotoneProperty {
    pub const ALL: [MonotoneProperty; 3] = [
        MonotoneProperty::FNonincreasing,
        MonotoneProperty::FOverFNondecreasing,
        MonotoneProperty::FOverT2fNonincreasing,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MonotoneProperty::FNonincreasing => "f_nonincreasing",
            MonotoneProperty::FOverFNondecreasing => "F_over_f_nondecreasing",
            MonotoneProperty::FOverT2fNonincreasing => "F_over_t2f_nonincreasing",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    FailsAt(f64),
    Inconclusive,
}

impl Verdict {
    pub fn holds(self) -> bool {
        matches!(self, Verdict::Holds)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityVerdict {
    pub property: MonotoneProperty,
    /// Empty when the verdict came from a closed form.
    pub grid: Vec<f64>,
    pub tol: f64,
    pub verdict: Verdict,
    pub max_violation: f64,
    pub closed_form: bool,
}

/// Geometric grid over `[1e-3·scale, effective support]`.
pub fn default_grid(model: &RadialDensity) -> Vec<f64> {
    let lo = 1e-3 * model.scale();
    let hi = model.effective_support();
    numerics::geometric_grid(lo, hi, GRID_POINTS)
}

fn closed_form(model: &RadialDensity, property: MonotoneProperty) -> Option<bool> {
    match (model.family(), property) {
        // F/f ≡ 1, f nonincreasing, F/(t²f) = t⁻².
        (Family::Gaussian, _) => Some(true),
        (
            Family::PolyExp { alpha, .. },
            MonotoneProperty::FOverFNondecreasing | MonotoneProperty::FNonincreasing,
        ) if *alpha == 0.0 => Some(true),
        _ => None,
    }
}

/// Signed log-increment per step that counts as a violation: positive values break the
/// property.
fn log_values(model: &RadialDensity, property: MonotoneProperty, grid: &[f64]) -> Vec<f64> {
    grid.iter()
        .map(|&r| match property {
            MonotoneProperty::FNonincreasing => model.log_density(r),
            MonotoneProperty::FOverFNondecreasing => -model.tail_ratio(r).ln(),
            MonotoneProperty::FOverT2fNonincreasing => model.tail_ratio(r).ln() - 2.0 * r.ln(),
        })
        .collect()
}

/// Checks `property` on `grid` (or a default grid) with relative tolerance `tol`.
pub fn probe_monotone(
    model: &RadialDensity,
    property: MonotoneProperty,
    grid: Option<&[f64]>,
    tol: f64,
) -> MonotonicityVerdict {
    if grid.is_none() {
        if let Some(holds) = closed_form(model, property) {
            return MonotonicityVerdict {
                property,
                grid: Vec::new(),
                tol,
                verdict: if holds {
                    Verdict::Holds
                } else {
                    Verdict::Inconclusive
                },
                max_violation: 0.0,
                closed_form: true,
            };
        }
    }
    let grid = grid
        .map(<[f64]>::to_vec)
        .unwrap_or_else(|| default_grid(model));
    let logs = log_values(model, property, &grid);
    let mut max_violation: f64 = 0.0;
    let mut first_fail = None;
    let mut finite = true;
    for (j, w) in logs.windows(2).enumerate() {
        if !w[0].is_finite() || !w[1].is_finite() {
            finite = false;
            continue;
        }
        let v = (w[1] - w[0]).exp_m1();
        if v > max_violation {
            max_violation = v;
        }
        if v > tol && first_fail.is_none() {
            first_fail = Some(grid[j + 1]);
        }
    }
    let verdict = match (first_fail, finite) {
        (Some(r), _) => Verdict::FailsAt(r),
        (None, true) => Verdict::Holds,
        (None, false) => Verdict::Inconclusive,
    };
    MonotonicityVerdict {
        property,
        grid,
        tol,
        verdict,
        max_violation,
        closed_form: false,
    }
}

/// `inf F/f` over the support, in closed form where known.
pub fn inf_ratio(model: &RadialDensity) -> f64 {
    match model.family() {
        Family::Gaussian => 1.0,
        Family::PolyExp { beta, .. } => 1.0 / (2.0 * beta),
        Family::MixtureDiff { .. } => 1.0,
        Family::Tabulated { .. } => inf_ratio_numeric(model),
    }
}

/// Grid minimum of `F/f`, with the grid pushed far past the effective support so that a
/// limiting infimum at infinity is reached. Returns 0 when the ratio is not bounded
/// away from zero on the grid.
pub fn inf_ratio_numeric(model: &RadialDensity) -> f64 {
    let lo = 1e-4 * model.scale();
    let hi = 100.0 * model.effective_support();
    let m = numerics::geometric_grid(lo, hi, 4 * GRID_POINTS)
        .into_iter()
        .map(|r| model.tail_ratio(r))
        .filter(|v| !v.is_nan())
        .fold(f64::INFINITY, f64::min);
    if m.is_finite() && m > 0.0 {
        m
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Quantities {
    /// `E₀‖X‖²`; `None` if divergent.
    pub second_moment: Option<f64>,
    /// `E₀‖X‖⁻²`; `None` if divergent.
    pub inverse_second_moment: Option<f64>,
    pub inf_ratio: f64,
    /// `(p−2)E₀‖X‖²/p`
    pub phi_limit: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisCheck {
    pub property: MonotoneProperty,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionSource {
    Theorem,
    Table,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionEntry {
    pub id: String,
    pub source: ConditionSource,
    /// The inequality being checked, in words.
    pub inequality: String,
    pub applicable: bool,
    pub note: Option<String>,
    pub hypotheses: Vec<HypothesisCheck>,
    /// Upper bound on `φ` implied by this entry.
    pub bound: Option<f64>,
    pub lhs: Option<f64>,
    pub rhs: Option<f64>,
    pub satisfied: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Overall {
    MinimaxCertified,
    NotCertified,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinimaxReport {
    pub model: String,
    pub p: usize,
    pub quantities: Quantities,
    pub monotonicity: Vec<MonotonicityVerdict>,
    pub conditions: Vec<ConditionEntry>,
    pub overall: Overall,
}

impl MinimaxReport {
    pub fn certified_by(&self) -> Vec<&str> {
        self.conditions
            .iter()
            .filter(|c| c.satisfied)
            .map(|c| c.id.as_str())
            .collect()
    }

    pub fn entry(&self, id: &str) -> Option<&ConditionEntry> {
        self.conditions.iter().find(|c| c.id == id)
    }
}

fn le(lhs: f64, rhs: f64) -> bool {
    lhs <= rhs + TIE_SLACK * rhs.abs()
}

struct Builder<'a> {
    p: usize,
    mono: &'a [MonotonicityVerdict],
    entries: Vec<ConditionEntry>,
}

impl Builder<'_> {
    fn verdict(&self, prop: MonotoneProperty) -> Verdict {
        self.mono
            .iter()
            .find(|m| m.property == prop)
            .map(|m| m.verdict)
            .unwrap_or(Verdict::Inconclusive)
    }

    #[allow(clippy::too_many_arguments)]
    fn push(
        &mut self,
        id: &str,
        source: ConditionSource,
        inequality: &str,
        min_p: usize,
        only_p: Option<usize>,
        props: &[MonotoneProperty],
        values: Option<(f64, f64, f64)>,
        extra_note: Option<String>,
    ) {
        let hypotheses: Vec<HypothesisCheck> = props
            .iter()
            .map(|&property| HypothesisCheck {
                property,
                verdict: self.verdict(property),
            })
            .collect();
        let mut note = extra_note;
        let dim_ok = match only_p {
            Some(q) => self.p == q,
            None => self.p >= min_p,
        };
        if !dim_ok {
            note.get_or_insert_with(|| match only_p {
                Some(q) => format!("stated for p = {q} only"),
                None => format!("stated for p >= {min_p}"),
            });
        }
        if values.is_none() {
            note.get_or_insert_with(|| "a required quantity diverges".to_string());
        }
        let applicable = dim_ok && values.is_some() && note.is_none();
        let (bound, lhs, rhs) = match values {
            Some((b, l, r)) => (Some(b), Some(l), Some(r)),
            None => (None, None, None),
        };
        let satisfied = applicable
            && hypotheses.iter().all(|h| h.verdict.holds())
            && matches!((lhs, rhs), (Some(l), Some(r)) if le(l, r));
        self.entries.push(ConditionEntry {
            id: id.to_string(),
            source,
            inequality: inequality.to_string(),
            applicable,
            note,
            hypotheses,
            bound,
            lhs,
            rhs,
            satisfied,
        });
    }
}

fn finite_moment(model: &RadialDensity, k: f64) -> Option<f64> {
    match model.moment(k) {
        Ok(v) if v.is_finite() && v > 0.0 => Some(v),
        _ => None,
    }
}

/// Whether the model is a scale mixture of normals; only the Gaussian members of the
/// built-in families qualify.
fn is_normal_scale_mixture(model: &RadialDensity) -> bool {
    match model.family() {
        Family::Gaussian => true,
        Family::PolyExp { alpha, .. } => *alpha == 0.0,
        _ => false,
    }
}

/// Evaluates the theorem's conditions and every row of the bound table.
pub fn evaluate_conditions(model: &RadialDensity) -> Result<MinimaxReport> {
    let p = model.dimension();
    if p < 3 {
        return Err(Error::Domain(format!("p must be >= 3, got {p}")));
    }
    let pf = p as f64;
    let e2 = finite_moment(model, 2.0);
    let em2 = finite_moment(model, -2.0);
    let inf = inf_ratio(model);
    let phi_lim = e2.and_then(|_| phi_limit(model).ok());
    let mono: Vec<MonotonicityVerdict> = MonotoneProperty::ALL
        .iter()
        .map(|&prop| probe_monotone(model, prop, None, MONOTONE_TOL))
        .collect();

    use ConditionSource::{Table, Theorem};
    use MonotoneProperty::*;
    let mut b = Builder {
        p,
        mono: &mono,
        entries: Vec::new(),
    };
    let both = e2.zip(em2);
    let prod = both.map(|(e, em)| e * em);

    // Theorem conditions, with bounds expressed on φ for reference.
    b.push(
        "1a",
        Theorem,
        "E[|X|^2] E[|X|^-2] <= 2",
        4,
        None,
        &[FOverT2fNonincreasing],
        prod.zip(em2)
            .map(|(q, em)| (2.0 * (pf - 2.0) / (pf * em), q, 2.0)),
        None,
    );
    b.push(
        "1b",
        Theorem,
        "(p^2-4) E[|X|^2] E[|X|^-2] <= 2p^2",
        4,
        None,
        &[FOverT2fNonincreasing, FNonincreasing],
        prod.zip(em2).map(|(q, em)| {
            (
                2.0 * pf / ((pf + 2.0) * em),
                (pf * pf - 4.0) * q,
                2.0 * pf * pf,
            )
        }),
        None,
    );
    b.push(
        "1c",
        Theorem,
        "(p-2) E[|X|^2] E[|X|^-2] <= 2p",
        4,
        None,
        &[FOverT2fNonincreasing, FNonincreasing, FOverFNondecreasing],
        prod.zip(em2)
            .map(|(q, em)| (2.0 / em, (pf - 2.0) * q, 2.0 * pf)),
        None,
    );
    let inf_note = if inf > 0.0 && inf.is_finite() {
        None
    } else {
        Some("inf F/f is not in (0, inf)".to_string())
    };
    b.push(
        "2",
        Theorem,
        "E[|X|^2] <= 2p inf F/f",
        3,
        None,
        &[],
        e2.map(|e| (2.0 * (pf - 2.0) * inf, e, 2.0 * pf * inf)),
        inf_note.clone(),
    );

    // Table rows: φ limit against each row's bound.
    let row = |bound: Option<f64>| phi_lim.zip(bound).map(|(l, bd)| (bd, l, bd));
    b.push(
        "berger",
        Table,
        "phi <= 2(p-2) inf F/f",
        3,
        None,
        &[],
        row(Some(2.0 * (pf - 2.0) * inf)),
        inf_note,
    );
    b.push(
        "brandwein",
        Table,
        "phi <= 2(p-2)/(p E[|X|^-2])",
        4,
        None,
        &[FOverT2fNonincreasing],
        row(em2.map(|em| 2.0 * (pf - 2.0) / (pf * em))),
        None,
    );
    b.push(
        "brandwein_strawderman",
        Table,
        "phi <= 2p/((p+2) E[|X|^-2])",
        4,
        None,
        &[FNonincreasing, FOverT2fNonincreasing],
        row(em2.map(|em| 2.0 * pf / ((pf + 2.0) * em))),
        None,
    );
    b.push(
        "ralescu",
        Table,
        "phi <= 0.93/E[|X|^-2]",
        3,
        Some(3),
        &[FNonincreasing, FOverT2fNonincreasing],
        row(em2.map(|em| RALESCU_CONSTANT / em)),
        None,
    );
    b.push(
        "bock",
        Table,
        "phi <= 2/E[|X|^-2]",
        4,
        None,
        &[FOverFNondecreasing, FOverT2fNonincreasing],
        row(em2.map(|em| 2.0 / em)),
        None,
    );
    b.push(
        "strawderman_74",
        Table,
        "phi <= 2/E[|X|^-2]",
        3,
        None,
        &[FOverT2fNonincreasing],
        row(em2.map(|em| 2.0 / em)),
        (!is_normal_scale_mixture(model))
            .then(|| "requires a scale mixture of normals".to_string()),
    );

    let entries = b.entries;
    let overall = if entries.iter().any(|c| c.satisfied) {
        Overall::MinimaxCertified
    } else {
        Overall::NotCertified
    };
    Ok(MinimaxReport {
        model: model.id(),
        p,
        quantities: Quantities {
            second_moment: e2,
            inverse_second_moment: em2,
            inf_ratio: inf,
            phi_limit: phi_lim,
        },
        monotonicity: mono,
        conditions: entries,
        overall,
    })
}
