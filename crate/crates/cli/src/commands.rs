//! One function per subcommand, each turning a resolved config into a [`Report`].

use serde_json::{json, Map, Value};
use sphereshrink::minimax_audit::{
    evaluate_conditions, inf_ratio, inf_ratio_numeric, probe_monotone, MonotoneProperty, Overall,
    Verdict, MONOTONE_TOL,
};
use sphereshrink::radial_convolution::asymptotic_ratio_probe;
use sphereshrink::risk_sim::{
    dominance_report, entry_verdict, estimate_risk, Dominance, EstimatorSpec, Loss, RiskConfig,
};
use sphereshrink::rv_priors::{
    blyth_decay, brown_diagnostic, classify_prior, default_eta_grid, default_gamma, default_h_grid,
    h_property_suite, prior_assumption_audit, PriorVerdict,
};
use sphereshrink::shrinkage::{phi_limit, phi_star_sorted, ShrinkageProfile};
use sphereshrink::special_integrals::{
    gegenbauer_identity, kernel_mass_identity, min_power_identity, IdentityCheck,
};

use crate::config::{self, RunConfig};
use crate::output::{fmt_num, Cell, Report};
use crate::CliError;

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("result serializes")
}

fn verdict_text(v: &Verdict) -> String {
    match v {
        Verdict::Holds => "holds".into(),
        Verdict::FailsAt(r) => format!("fails_at r={r}"),
        Verdict::Inconclusive => "inconclusive".into(),
    }
}

fn moment_cell(m: sphereshrink::Result<f64>) -> Cell {
    match m {
        Ok(v) => Cell::Num(v),
        Err(_) => Cell::Text("divergent".into()),
    }
}

pub fn model_info(cfg: &RunConfig) -> Result<Report, CliError> {
    let model = cfg.model.build()?;
    let p = model.dimension();
    let tail = model.tail_profile();
    let mut rows: Vec<(&str, Cell)> = vec![
        ("model", model.id().into()),
        ("p", (p as u64).into()),
        ("norm_const", model.norm_const().into()),
        ("scale", model.scale().into()),
        ("effective_support", model.effective_support().into()),
        ("second_moment", moment_cell(model.moment(2.0))),
        ("inverse_second_moment", moment_cell(model.moment(-2.0))),
        ("phi_limit", moment_cell(phi_limit(&model))),
        ("inf_F_over_f", inf_ratio(&model).into()),
        ("inf_F_over_f_numeric", inf_ratio_numeric(&model).into()),
        ("tail_r0", tail.r0.into()),
        ("tail_bound", tail.l_bound.into()),
        ("tail_s", tail.s.into()),
    ];
    let verdicts: Vec<_> = MonotoneProperty::ALL
        .iter()
        .map(|&prop| probe_monotone(&model, prop, None, MONOTONE_TOL))
        .collect();
    for v in &verdicts {
        rows.push((v.property.name(), verdict_text(&v.verdict).into()));
    }
    let mut obj = Map::new();
    for (k, c) in &rows {
        let v = match c {
            Cell::Num(x) => json!(x),
            Cell::Int(x) => json!(x),
            Cell::Text(s) => json!(s),
            _ => Value::Null,
        };
        obj.insert(k.to_string(), v);
    }
    obj.insert("monotonicity".into(), to_value(&verdicts));
    Ok(Report {
        columns: vec!["quantity", "value"],
        rows: rows.into_iter().map(|(k, c)| vec![k.into(), c]).collect(),
        result: Value::Object(obj),
        ..Default::default()
    })
}

pub fn phi(cfg: &RunConfig) -> Result<Report, CliError> {
    let model = cfg.model.build()?;
    let limit = phi_limit(&model).ok();
    let (rs, phis) = match &cfg.phi.grid {
        Some(g) => {
            let rs = config::parse_geometric(g)?;
            let phis = phi_star_sorted(&model, &rs)?;
            (rs, phis)
        }
        None => {
            let prof = ShrinkageProfile::new(&model)?;
            (prof.r_grid().to_vec(), prof.phi_values().to_vec())
        }
    };
    let mut worst_drop = 0.0f64;
    for w in phis.windows(2) {
        worst_drop = worst_drop.max(w[0] - w[1]);
    }
    let rows: Vec<Vec<Cell>> = rs
        .iter()
        .zip(&phis)
        .map(|(&r, &f)| vec![r.into(), f.into(), (1.0 - f / (r * r)).into(), limit.into()])
        .collect();
    let mut rep = Report {
        columns: vec!["r", "phi_star", "multiplier", "limit_value"],
        rows,
        result: json!({
            "r": rs,
            "phi_star": phis,
            "limit_value": limit,
            "largest_decrease": worst_drop,
        }),
        plot: Some(("r", "phi_star")),
        ..Default::default()
    };
    rep.note_num("largest_decrease", worst_drop);
    if worst_drop > 1e-10 {
        rep.failure = Some(format!("phi_star decreases by {worst_drop:e} on the grid"));
    }
    Ok(rep)
}

pub fn check(cfg: &RunConfig) -> Result<Report, CliError> {
    let model = cfg.model.build()?;
    let report = evaluate_conditions(&model)?;
    let overall = match report.overall {
        Overall::MinimaxCertified => "minimax_certified",
        Overall::NotCertified => "not_certified",
    };
    let rows = report
        .conditions
        .iter()
        .map(|c| {
            vec![
                c.id.as_str().into(),
                (if c.applicable { "yes" } else { "no" }).into(),
                c.lhs.into(),
                c.rhs.into(),
                c.bound.into(),
                c.satisfied.into(),
                c.note.clone().unwrap_or_default().into(),
            ]
        })
        .collect();
    let mut rep = Report {
        columns: vec![
            "condition",
            "applicable",
            "lhs",
            "rhs",
            "bound",
            "satisfied",
            "note",
        ],
        rows,
        result: to_value(&report),
        ..Default::default()
    };
    rep.note("model", &report.model);
    rep.note("overall", overall);
    rep.note("certified_by", report.certified_by().join(" "));
    let q = &report.quantities;
    rep.note(
        "second_moment",
        q.second_moment.map_or("divergent".into(), fmt_num),
    );
    rep.note_num("inf_F_over_f", q.inf_ratio);
    for m in &report.monotonicity {
        rep.note(m.property.name(), verdict_text(&m.verdict));
    }
    if report.overall != Overall::MinimaxCertified {
        rep.failure = Some("no condition certifies minimaxity".into());
    }
    Ok(rep)
}

fn estimator_spec(cfg: &RunConfig) -> Result<EstimatorSpec, CliError> {
    Ok(match cfg.risk.estimator.as_str() {
        "identity" => EstimatorSpec::Identity,
        "harmonic" | "harmonic_bayes" => EstimatorSpec::HarmonicBayes,
        "gb" | "generalized_bayes" => {
            let prior = cfg.prior.build(cfg.model.p)?;
            if !prior.is_euclidean() {
                return Err(CliError::Config(
                    "the gb estimator needs the Euclidean norm".into(),
                ));
            }
            EstimatorSpec::GeneralizedBayes {
                prior: cfg.prior.spec()?,
            }
        }
        "constant" | "constant_multiplier" => EstimatorSpec::ConstantMultiplier {
            c: cfg
                .risk
                .constant
                .ok_or_else(|| CliError::Config("estimator constant needs --constant".into()))?,
        },
        other => {
            return Err(CliError::Config(format!(
                "unknown estimator '{other}' (expected identity, harmonic, gb or constant)"
            )))
        }
    })
}

pub fn risk(cfg: &RunConfig) -> Result<Report, CliError> {
    let model = cfg.model.build()?;
    let r = &cfg.risk;
    let mut rc = RiskConfig::new(
        estimator_spec(cfg)?,
        config::parse_range(&r.theta)?,
        r.n,
        r.seed,
    );
    rc.block_size = r.block;
    rc.paired = r.paired;
    rc.direction = r.direction.clone();
    if let Some(q) = &r.q {
        rc.loss = Some(Loss::from_rows(q)?);
    }
    let curve = estimate_risk(&model, &rc)?;
    let rows = curve
        .entries
        .iter()
        .map(|e| {
            vec![
                e.theta_norm.into(),
                e.risk_estimate.into(),
                e.std_error.into(),
                e.baseline_risk.into(),
                e.paired_diff_estimate.into(),
                e.paired_diff_std_error.into(),
                entry_verdict(e).into(),
            ]
        })
        .collect();
    let dominance = if curve.paired {
        Some(dominance_report(&curve)?)
    } else {
        None
    };
    let mut rep = Report {
        columns: vec![
            "theta_norm",
            "risk",
            "se",
            "baseline",
            "diff",
            "diff_se",
            "verdict",
        ],
        rows,
        result: json!({ "curve": to_value(&curve), "dominance": dominance }),
        plot: Some(("theta_norm", "risk")),
        ..Default::default()
    };
    rep.note("estimator", &curve.estimator);
    rep.note("seed", curve.seed);
    rep.note("paired", curve.paired);
    match dominance {
        Some(Dominance::Dominates) => rep.note("dominance", "dominates"),
        Some(Dominance::ViolationAt(t)) => {
            rep.note("dominance", format!("violation_at theta_norm={t}"));
            rep.failure = Some(format!("risk exceeds that of X at theta_norm = {t}"));
        }
        Some(Dominance::Inconclusive) => {
            rep.note("dominance", "inconclusive");
            rep.failure = Some("no significant risk reduction".into());
        }
        None => rep.note("dominance", "not assessed (unpaired draws)"),
    }
    Ok(rep)
}

pub fn hseq(cfg: &RunConfig) -> Result<Report, CliError> {
    let kernel = config::kernel(cfg.hseq.kernel_n, cfg.hseq.kernel_c)?;
    let grid = cfg.hseq.eta.clone().unwrap_or_else(default_h_grid);
    let report = h_property_suite(&kernel, &cfg.hseq.i, &grid)?;
    let rows = report
        .checks
        .iter()
        .map(|c| {
            vec![
                c.id.into(),
                c.passed.into(),
                c.worst.into(),
                c.property.clone().into(),
                c.detail.clone().into(),
            ]
        })
        .collect();
    let mut rep = Report {
        columns: vec!["check", "passed", "worst", "property", "detail"],
        rows,
        result: to_value(&report),
        ..Default::default()
    };
    rep.note(
        "kernel",
        format!("n={} c={}", kernel.tower.n, kernel.tower.c),
    );
    rep.note("eta0", report.eta0.map_or("none".into(), fmt_num));
    rep.note("all_passed", report.all_passed());
    if !report.all_passed() {
        rep.failure = Some("an H-sequence property failed".into());
    }
    Ok(rep)
}

pub fn prior(cfg: &RunConfig) -> Result<Report, CliError> {
    let model = cfg.model.build()?;
    let prior = cfg.prior.build(cfg.model.p)?;
    let kernel = config::kernel(cfg.diagnostics.kernel_n, cfg.diagnostics.kernel_c)?;
    let audit = prior_assumption_audit(&prior, &default_eta_grid(), 1.0)?;
    let class = classify_prior(&prior, &model)?;
    let gamma = match cfg.prior.gamma {
        Some(g) => Some(g),
        None => default_gamma(&prior, &kernel)?,
    };
    let blyth = match gamma {
        Some(g) => Some(blyth_decay(&prior, &kernel, g, &cfg.diagnostics.blyth_i)?),
        None => None,
    };
    let mut rows: Vec<Vec<Cell>> = vec![
        vec!["rv_index".into(), class.rv_index.into()],
        vec!["t0".into(), audit.t0.into()],
        vec!["t1".into(), audit.t1.into()],
        vec!["t2".into(), audit.t2.into()],
        vec!["t3".into(), audit.t3.into()],
        vec!["t4".into(), audit.t4.into()],
        vec!["g3_holds".into(), audit.g3_holds.into()],
        vec!["tail_s".into(), class.tail_s.into()],
    ];
    let brown = match &class.brown {
        Some(b) => b.clone(),
        None => brown_diagnostic(&prior)?,
    };
    rows.push(vec!["brown_class".into(), brown.class.to_string().into()]);
    rows.push(vec!["brown_fitted_index".into(), brown.fitted_index.into()]);
    rows.push(vec!["gamma".into(), gamma.into()]);
    if let Some(js) = &blyth {
        for (i, j) in cfg.diagnostics.blyth_i.iter().zip(js) {
            rows.push(vec![format!("blyth_J({i})").into(), (*j).into()]);
        }
    }
    let mut rep = Report {
        columns: vec!["quantity", "value"],
        rows,
        result: json!({
            "prior": prior.label(),
            "audit": to_value(&audit),
            "classification": to_value(&class),
            "brown": to_value(&brown),
            "gamma": gamma,
            "blyth": blyth.as_ref().map(|js| cfg.diagnostics.blyth_i.iter().zip(js).map(|(i, j)| json!({"i": i, "J": j})).collect::<Vec<_>>()),
        }),
        ..Default::default()
    };
    rep.note("prior", prior.label());
    rep.note("verdict", class.verdict);
    rep.note("reason", &class.reason);
    if gamma.is_none() {
        rep.note(
            "blyth",
            "skipped: no gamma makes the approximating priors proper; pass --gamma",
        );
    }
    if class.verdict == PriorVerdict::Uncertified {
        rep.failure = Some("the prior could not be classified".into());
    }
    Ok(rep)
}

pub fn verify(cfg: &RunConfig) -> Result<Report, CliError> {
    let v = &cfg.verify;
    let want = |name: &str| v.identity == "all" || v.identity == name;
    if !["all", "gegenbauer", "min_power", "kernel_mass"].contains(&v.identity.as_str()) {
        return Err(CliError::Config(format!(
            "unknown identity '{}' (expected gegenbauer, min_power, kernel_mass or all)",
            v.identity
        )));
    }
    let mut checks: Vec<IdentityCheck> = Vec::new();
    if want("gegenbauer") {
        checks.push(gegenbauer_identity(v.alpha, v.a)?);
    }
    if want("min_power") {
        checks.push(min_power_identity(cfg.model.p, v.t)?);
    }
    if want("kernel_mass") {
        checks.push(kernel_mass_identity(&cfg.model.build()?, v.alpha)?);
    }
    let worst = checks.iter().map(|c| c.rel_error).fold(0.0, f64::max);
    let rows = checks
        .iter()
        .map(|c| {
            vec![
                c.identity.as_str().into(),
                c.params.as_str().into(),
                c.lhs.into(),
                c.rhs.into(),
                c.rel_error.into(),
                (c.rel_error <= 1e-8).into(),
            ]
        })
        .collect();
    let mut rep = Report {
        columns: vec!["identity", "params", "lhs", "rhs", "rel_error", "passed"],
        rows,
        result: to_value(&checks),
        ..Default::default()
    };
    rep.note_num("worst_rel_error", worst);
    if worst > 1e-8 {
        rep.failure = Some(format!("relative error {worst:e} exceeds 1e-8"));
    }
    Ok(rep)
}

pub fn probe(cfg: &RunConfig) -> Result<Report, CliError> {
    let model = cfg.model.build()?;
    let prior = cfg.prior.build(cfg.model.p)?;
    let table = asymptotic_ratio_probe(&prior, &model, &cfg.probe.r)?;
    let rows = table
        .rows
        .iter()
        .map(|r| {
            vec![
                r.r.into(),
                r.m_ratio.into(),
                r.big_m_ratio.into(),
                r.big_m_inv_ratio.into(),
                r.log10_m_deviation.into(),
            ]
        })
        .collect();
    let mut rep = Report {
        columns: vec![
            "r",
            "m_ratio",
            "big_m_ratio",
            "big_m_inv_ratio",
            "log10_m_deviation",
        ],
        rows,
        result: to_value(&table),
        plot: Some(("r", "m_ratio")),
        ..Default::default()
    };
    let fmt = |e: Option<f64>| e.map_or("none".to_string(), fmt_num);
    rep.note("prior", prior.label());
    rep.note("fitted_exponent_m", fmt(table.fitted_exponents[0]));
    rep.note("fitted_exponent_big_m", fmt(table.fitted_exponents[1]));
    rep.note("fitted_exponent_big_m_inv", fmt(table.fitted_exponents[2]));
    Ok(rep)
}

/// Which config sections each subcommand reads, for the echoed header.
pub fn sections(command: &str, cfg: &RunConfig) -> Vec<&'static str> {
    match command {
        "model-info" | "check" => vec!["model"],
        "phi" => vec!["model", "phi"],
        "risk"
            if cfg.risk.estimator.starts_with("gb")
                || cfg.risk.estimator == "generalized_bayes" =>
        {
            vec!["model", "prior", "risk"]
        }
        "risk" => vec!["model", "risk"],
        "hseq" => vec!["hseq"],
        "prior" => vec!["model", "prior", "diagnostics"],
        "verify" => vec!["model", "verify"],
        "probe" => vec!["model", "prior", "probe"],
        _ => vec![],
    }
}
