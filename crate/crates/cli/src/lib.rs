//! Command-line front end: argument parsing, config resolution and output.
//!
//! Exit status: 0 on success, 1 on a numerical failure, 2 on a configuration error,
//! 3 when `--strict` is set and the run's verdict is negative.

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::Value;

mod commands;
pub mod config;
pub mod output;
pub mod svg;

pub use config::RunConfig;
use output::{Format, Report};

/// Environment variable capping the worker thread count; 0 or unset means automatic.
pub const THREADS_ENV: &str = "SPHERESHRINK_THREADS";

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Numeric(_) => 1,
            CliError::Config(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numeric(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<sphereshrink::Error> for CliError {
    fn from(e: sphereshrink::Error) -> Self {
        use sphereshrink::Error as E;
        match e {
            E::Domain(_)
            | E::InvalidSpec(_)
            | E::InvalidModel(_)
            | E::InvalidPrior(_)
            | E::Config(_) => CliError::Config(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "sphereshrink",
    version,
    about = "Shrinkage estimation under spherically symmetric models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct ModelArgs {
    /// Density family: gaussian, polyexp, mixdiff or tabulated.
    #[arg(long)]
    family: Option<String>,
    /// Dimension.
    #[arg(long)]
    p: Option<usize>,
    /// polyexp exponent on r.
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,
    /// polyexp rate.
    #[arg(long)]
    beta: Option<f64>,
    /// mixdiff weight.
    #[arg(long)]
    a: Option<f64>,
    /// mixdiff variance ratio.
    #[arg(long)]
    b: Option<f64>,
    /// CSV file with columns r,f for the tabulated family.
    #[arg(long)]
    table: Option<String>,
}

/// Model flags under names that do not clash with the identity parameters.
#[derive(Args, Debug, Default)]
struct VerifyModelArgs {
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    model_alpha: Option<f64>,
    #[arg(long)]
    model_beta: Option<f64>,
    #[arg(long)]
    model_a: Option<f64>,
    #[arg(long)]
    model_b: Option<f64>,
    #[arg(long)]
    table: Option<String>,
}

#[derive(Args, Debug, Default)]
struct PriorArgs {
    /// Prior family: harmonic, flat, power, log_thickened or log_squared.
    #[arg(long = "prior", id = "prior_family")]
    family: Option<String>,
    /// Power prior index.
    #[arg(long, allow_negative_numbers = true)]
    k: Option<f64>,
    /// Depth of the logarithmic tower.
    #[arg(long)]
    tower_n: Option<usize>,
    /// Shift inside the logarithms.
    #[arg(long)]
    c: Option<f64>,
    /// Exponent applied to the sequence weights in the Blyth diagnostic.
    #[arg(long)]
    gamma: Option<f64>,
    /// Comma-separated norm weights d.
    #[arg(long, value_delimiter = ',')]
    weights: Option<Vec<f64>>,
}

#[derive(Args, Debug, Default)]
struct OutputArgs {
    /// JSON run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write the primary output here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Write an SVG line chart of the tabular output.
    #[arg(long)]
    plot: Option<PathBuf>,
    /// Column plotted on the y axis.
    #[arg(long)]
    plot_y: Option<String>,
    /// Column plotted on the x axis.
    #[arg(long)]
    plot_x: Option<String>,
    /// Exit with status 3 when the verdict is negative.
    #[arg(long)]
    strict: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Normalizing constant, moments, tail profile and monotonicity verdicts.
    ModelInfo {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Shrinkage function of the harmonic-prior estimator.
    Phi {
        #[command(flatten)]
        model: ModelArgs,
        /// Geometric grid lo:hi:n; the adaptive profile knots when absent.
        #[arg(long)]
        grid: Option<String>,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Minimaxity conditions.
    Check {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Monte Carlo risk curve against X.
    Risk {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        prior: PriorArgs,
        /// identity, harmonic, gb or constant.
        #[arg(long)]
        estimator: Option<String>,
        /// Multiplier for the constant estimator.
        #[arg(long, allow_negative_numbers = true)]
        constant: Option<f64>,
        /// Norms of theta as start:stop:step or a comma list.
        #[arg(long)]
        theta: Option<String>,
        /// Draws per theta.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Draws per random-number block.
        #[arg(long)]
        block: Option<usize>,
        /// Compare against X on independent draws.
        #[arg(long)]
        unpaired: bool,
        /// Direction of theta, comma-separated.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        direction: Option<Vec<f64>>,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Properties of the H_i approximation sequence.
    Hseq {
        /// Kernel tower depth.
        #[arg(long)]
        kernel_n: Option<usize>,
        /// Kernel shift; defaults to the canonical value.
        #[arg(long)]
        kernel_c: Option<f64>,
        /// Comma-separated sequence indices.
        #[arg(long, value_delimiter = ',')]
        i: Option<Vec<u64>>,
        /// Comma-separated eta grid.
        #[arg(long, value_delimiter = ',')]
        eta: Option<Vec<f64>>,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Prior audit, classification and Blyth/Brown diagnostics.
    Prior {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        prior: PriorArgs,
        #[arg(long)]
        kernel_n: Option<usize>,
        #[arg(long)]
        kernel_c: Option<f64>,
        /// Comma-separated indices for the Blyth integral.
        #[arg(long, value_delimiter = ',')]
        blyth_i: Option<Vec<u64>>,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Closed-form integral identities checked by quadrature.
    Verify {
        #[command(flatten)]
        model: VerifyModelArgs,
        /// gegenbauer, min_power, kernel_mass or all.
        #[arg(long)]
        identity: Option<String>,
        #[arg(long, allow_negative_numbers = true)]
        alpha: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        a: Option<f64>,
        #[arg(long)]
        t: Option<f64>,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Asymptotic ratios of the marginals to the prior.
    Probe {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        prior: PriorArgs,
        /// Comma-separated radii.
        #[arg(long, value_delimiter = ',')]
        r: Option<Vec<f64>>,
        #[command(flatten)]
        out: OutputArgs,
    },
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn set_opt<T>(slot: &mut Option<T>, v: Option<T>) {
    if v.is_some() {
        *slot = v;
    }
}

impl ModelArgs {
    fn apply(self, m: &mut config::ModelConfig) {
        set(&mut m.family, self.family);
        set(&mut m.p, self.p);
        set_opt(&mut m.alpha, self.alpha);
        set_opt(&mut m.beta, self.beta);
        set_opt(&mut m.a, self.a);
        set_opt(&mut m.b, self.b);
        set_opt(&mut m.table, self.table);
    }
}

impl From<VerifyModelArgs> for ModelArgs {
    fn from(v: VerifyModelArgs) -> Self {
        ModelArgs {
            family: v.family,
            p: v.p,
            alpha: v.model_alpha,
            beta: v.model_beta,
            a: v.model_a,
            b: v.model_b,
            table: v.table,
        }
    }
}

impl PriorArgs {
    fn apply(self, p: &mut config::PriorConfig) {
        set(&mut p.family, self.family);
        set_opt(&mut p.k, self.k);
        set_opt(&mut p.n, self.tower_n);
        set_opt(&mut p.c, self.c);
        set_opt(&mut p.gamma, self.gamma);
        set_opt(&mut p.weights, self.weights);
    }
}

fn canonical(name: &str, table: &[(&[&str], &str)], what: &str) -> Result<String, CliError> {
    let key = name.replace('-', "_");
    table
        .iter()
        .find(|(aliases, _)| aliases.contains(&key.as_str()))
        .map(|(_, c)| c.to_string())
        .ok_or_else(|| CliError::Config(format!("unknown {what} '{name}'")))
}

/// Normalizes names and drops parameters the chosen options do not use.
fn resolve(cfg: &mut RunConfig, command: &str, sections: &[&str]) -> Result<(), CliError> {
    if sections.contains(&"model") {
        cfg.model.resolve()?;
    }
    if sections.contains(&"prior") {
        cfg.prior.resolve()?;
    }
    if command == "risk" {
        cfg.risk.estimator = canonical(
            &cfg.risk.estimator,
            &[
                (&["identity"], "identity"),
                (&["harmonic", "harmonic_bayes"], "harmonic"),
                (&["gb", "generalized_bayes"], "gb"),
                (&["constant", "constant_multiplier"], "constant"),
            ],
            "estimator",
        )?;
        if cfg.risk.estimator != "constant" {
            cfg.risk.constant = None;
        }
    }
    if command == "hseq" {
        let k = config::kernel(cfg.hseq.kernel_n, cfg.hseq.kernel_c)?;
        cfg.hseq.kernel_c = Some(k.tower.c);
        cfg.hseq
            .eta
            .get_or_insert_with(sphereshrink::rv_priors::default_h_grid);
    }
    if command == "prior" {
        let k = config::kernel(cfg.diagnostics.kernel_n, cfg.diagnostics.kernel_c)?;
        cfg.diagnostics.kernel_c = Some(k.tower.c);
    }
    if command == "verify" {
        cfg.verify.identity = canonical(
            &cfg.verify.identity,
            &[
                (&["all"], "all"),
                (&["gegenbauer"], "gegenbauer"),
                (&["min_power"], "min_power"),
                (&["kernel_mass"], "kernel_mass"),
            ],
            "identity",
        )?;
    }
    Ok(())
}

/// The resolved config restricted to the sections `command` reads.
fn echo(cfg: &RunConfig, command: &str, sections: &[&str]) -> Value {
    let full = serde_json::to_value(cfg).expect("config serializes");
    let mut obj = serde_json::Map::new();
    obj.insert("command".into(), Value::String(command.into()));
    obj.insert(
        "version".into(),
        Value::String(env!("CARGO_PKG_VERSION").into()),
    );
    for s in sections {
        obj.insert(s.to_string(), full[*s].clone());
    }
    Value::Object(obj)
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().map_err(|_| {
        CliError::Config(format!(
            "{THREADS_ENV} must be a nonnegative integer, got '{raw}'"
        ))
    })?;
    #[cfg(feature = "parallel")]
    if n > 0 {
        // A pool that already exists (repeated calls in one process) is left as is.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = n;
    Ok(())
}

struct Outcome {
    failure: Option<String>,
    strict: bool,
}

fn execute(cli: Cli) -> Result<Outcome, CliError> {
    let mut cfg;
    let (name, out, default_format) = match cli.command {
        Command::ModelInfo { model, out } => {
            cfg = base(&out)?;
            model.apply(&mut cfg.model);
            ("model-info", out, Format::Table)
        }
        Command::Phi { model, grid, out } => {
            cfg = base(&out)?;
            model.apply(&mut cfg.model);
            set_opt(&mut cfg.phi.grid, grid);
            ("phi", out, Format::Csv)
        }
        Command::Check { model, out } => {
            cfg = base(&out)?;
            model.apply(&mut cfg.model);
            ("check", out, Format::Table)
        }
        Command::Risk {
            model,
            prior,
            estimator,
            constant,
            theta,
            n,
            seed,
            block,
            unpaired,
            direction,
            out,
        } => {
            cfg = base(&out)?;
            model.apply(&mut cfg.model);
            prior.apply(&mut cfg.prior);
            let r = &mut cfg.risk;
            set(&mut r.estimator, estimator);
            set_opt(&mut r.constant, constant);
            set(&mut r.theta, theta);
            set(&mut r.n, n);
            set(&mut r.seed, seed);
            set(&mut r.block, block);
            if unpaired {
                r.paired = false;
            }
            set_opt(&mut r.direction, direction);
            ("risk", out, Format::Csv)
        }
        Command::Hseq {
            kernel_n,
            kernel_c,
            i,
            eta,
            out,
        } => {
            cfg = base(&out)?;
            set(&mut cfg.hseq.kernel_n, kernel_n);
            set_opt(&mut cfg.hseq.kernel_c, kernel_c);
            set(&mut cfg.hseq.i, i);
            set_opt(&mut cfg.hseq.eta, eta);
            ("hseq", out, Format::Table)
        }
        Command::Prior {
            model,
            prior,
            kernel_n,
            kernel_c,
            blyth_i,
            out,
        } => {
            cfg = base(&out)?;
            model.apply(&mut cfg.model);
            prior.apply(&mut cfg.prior);
            set(&mut cfg.diagnostics.kernel_n, kernel_n);
            set_opt(&mut cfg.diagnostics.kernel_c, kernel_c);
            set(&mut cfg.diagnostics.blyth_i, blyth_i);
            ("prior", out, Format::Table)
        }
        Command::Verify {
            model,
            identity,
            alpha,
            a,
            t,
            out,
        } => {
            cfg = base(&out)?;
            ModelArgs::from(model).apply(&mut cfg.model);
            set(&mut cfg.verify.identity, identity);
            set(&mut cfg.verify.alpha, alpha);
            set(&mut cfg.verify.a, a);
            set(&mut cfg.verify.t, t);
            ("verify", out, Format::Csv)
        }
        Command::Probe {
            model,
            prior,
            r,
            out,
        } => {
            cfg = base(&out)?;
            model.apply(&mut cfg.model);
            prior.apply(&mut cfg.prior);
            set(&mut cfg.probe.r, r);
            ("probe", out, Format::Csv)
        }
    };
    let sections = commands::sections(name, &cfg);
    resolve(&mut cfg, name, &sections)?;
    let report: Report = match name {
        "model-info" => commands::model_info(&cfg)?,
        "phi" => commands::phi(&cfg)?,
        "check" => commands::check(&cfg)?,
        "risk" => commands::risk(&cfg)?,
        "hseq" => commands::hseq(&cfg)?,
        "prior" => commands::prior(&cfg)?,
        "verify" => commands::verify(&cfg)?,
        _ => commands::probe(&cfg)?,
    };
    let header = echo(&cfg, name, &sections);
    let text = output::render(&report, out.format.unwrap_or(default_format), name, &header);
    match &out.out {
        Some(path) => std::fs::write(path, &text)
            .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?,
        None => print!("{text}"),
    }
    if let Some(path) = &out.plot {
        let (dx, dy) = report.plot.unwrap_or_else(|| {
            let first = report.columns.first().copied().unwrap_or("");
            (first, report.columns.get(1).copied().unwrap_or(first))
        });
        let x = out.plot_x.as_deref().unwrap_or(dx);
        let y = out.plot_y.as_deref().unwrap_or(dy);
        let pts = report.series(x, y)?;
        let svg = svg::line_chart(&format!("sphereshrink {name}"), x, y, &pts);
        std::fs::write(path, svg)
            .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(Outcome {
        failure: report.failure,
        strict: out.strict,
    })
}

fn base(out: &OutputArgs) -> Result<RunConfig, CliError> {
    match &out.config {
        Some(p) => config::load(p),
        None => Ok(RunConfig::default()),
    }
}

/// Runs the CLI on `args` (including the program name) and returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("sphereshrink: {e}");
        return e.exit_code();
    }
    match execute(cli) {
        Ok(Outcome {
            failure: Some(msg),
            strict,
        }) => {
            eprintln!("sphereshrink: verdict: {msg}");
            if strict {
                3
            } else {
                0
            }
        }
        Ok(_) => 0,
        Err(e) => {
            eprintln!("sphereshrink: {e}");
            e.exit_code()
        }
    }
}
