//! Command-line front end. [`dispatch`] is the whole program; `main` only
//! wires it to the process streams.
//!
//! Exit codes: 0 success, 1 user error, 2 numeric failure.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde_json::{Map, Value};
use thiserror::Error;

use crate::bases::{self, Basis, BasisKind, BasisSpec};
use crate::ensembles::{preset_ensemble, sample_coefficients, PRESET_NAMES};
use crate::experiments::{
    self, compute_bounds, estimate_log_at_point, fit_aggregate, load_summary, run_experiment, BoundChoice,
    ExperimentConfig, ExperimentError, MomentSource, PreparedExperiment, Stat, CONFIG_SCHEMA,
};
use crate::polyroots::{find_roots, ComplexPolynomial, RootOptions};
use crate::potential::DomainModel;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Numeric(_) => 2,
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Discrepancy(_) | ExperimentError::Fit(_) => CliError::Numeric(e.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "zerodist", about = "Zero distribution of random polynomials", after_help = CONFIG_SCHEMA)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Master seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file (or run directory for experiment-run)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw one coefficient vector
    Sample {
        #[arg(long, default_value = "gaussian-kac")]
        preset: String,
        /// Degree
        #[arg(long)]
        n: usize,
    },
    /// Roots of a polynomial given by its coefficients
    Roots {
        /// CSV with columns j,real,imag (or the JSON written by `sample`)
        #[arg(long)]
        coeffs: PathBuf,
        #[arg(long, default_value = "monomial")]
        basis: String,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        #[arg(long, default_value_t = 200)]
        max_iters: usize,
    },
    /// Leading-coefficient and sup-norm table of a basis on a domain
    BasisCheck {
        #[arg(long)]
        basis: String,
        #[arg(long)]
        domain: Option<String>,
        #[arg(long, default_value_t = 20)]
        k_max: usize,
        #[arg(long)]
        grid: Option<usize>,
        /// Print the coefficient triangle up to this degree instead
        #[arg(long)]
        triangle: Option<usize>,
    },
    /// Evaluate a discrepancy bound
    Bound {
        #[arg(long, default_value = "gaussian-kac")]
        preset: String,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long)]
        r: Option<f64>,
        #[arg(long, default_value = "unit-circle")]
        domain: String,
        #[arg(long, default_value = "monomial")]
        basis: String,
        #[arg(long, default_value = "auto")]
        kind: String,
        #[arg(long, default_value = "auto")]
        moments: String,
        #[arg(long, default_value_t = 100_000)]
        moment_samples: usize,
        /// Draws used to estimate E log|A_n P_n(w)| for the disk bound
        #[arg(long, default_value_t = 2000)]
        trials: usize,
    },
    /// Run (or resume) an experiment
    #[command(after_help = CONFIG_SCHEMA)]
    ExperimentRun {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Rate fit of a finished run
    ExperimentFit {
        /// Run directory or summary.json
        #[arg(long)]
        run: PathBuf,
    },
    /// Dominance table of a finished run
    Report {
        #[arg(long)]
        run: PathBuf,
    },
}

/// Column-oriented output shared by every subcommand.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(cell_text)).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory write")).expect("utf8")
    }

    pub fn to_json(&self) -> String {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| Value::Object(self.columns.iter().cloned().zip(r.iter().cloned()).collect::<Map<_, _>>()))
            .collect();
        serde_json::to_string_pretty(&rows).expect("serializable") + "\n"
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }
}

fn cell_text(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        Value::Number(n) => match n.as_f64() {
            Some(x) if !n.is_i64() && !n.is_u64() => format!("{x:?}"),
            _ => n.to_string(),
        },
        other => other.to_string(),
    }
}

fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

fn opt(x: Option<f64>) -> Value {
    x.map_or(Value::Null, num)
}

/// Reads coefficients from CSV (`j,real,imag`) or the JSON table form.
pub fn read_coefficients(path: &Path) -> Result<Vec<Complex64>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let bad = |m: String| usage(format!("{}: {m}", path.display()));
    let mut pairs: Vec<(usize, Complex64)> = Vec::new();
    if text.trim_start().starts_with('[') {
        let rows: Vec<Map<String, Value>> = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
        for (i, row) in rows.iter().enumerate() {
            let get = |k: &str| row.get(k).and_then(Value::as_f64).ok_or_else(|| bad(format!("entry {i}: missing `{k}`")));
            pairs.push((get("j")? as usize, Complex64::new(get("real")?, get("imag")?)));
        }
    } else {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let headers = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| bad(format!("missing column `{name}`")))
        };
        let (cj, cr, ci) = (col("j")?, col("real")?, col("imag")?);
        for (i, row) in rdr.records().enumerate() {
            let row = row.map_err(|e| bad(e.to_string()))?;
            let field = |c: usize| row.get(c).map(str::trim).unwrap_or("");
            let line = i + 2;
            let j: usize = field(cj).parse().map_err(|_| bad(format!("line {line}: bad index")))?;
            let re: f64 = field(cr).parse().map_err(|_| bad(format!("line {line}: bad real part")))?;
            let im: f64 = field(ci).parse().map_err(|_| bad(format!("line {line}: bad imaginary part")))?;
            pairs.push((j, Complex64::new(re, im)));
        }
    }
    if pairs.is_empty() {
        return Err(bad("no coefficients".into()));
    }
    let n = pairs.iter().map(|p| p.0).max().unwrap();
    let mut out = vec![Complex64::new(0.0, 0.0); n + 1];
    let mut seen = vec![false; n + 1];
    for (j, c) in pairs {
        if seen[j] {
            return Err(bad(format!("index {j} given twice")));
        }
        seen[j] = true;
        out[j] = c;
    }
    Ok(out)
}

fn coefficient_table(a: &[Complex64]) -> Table {
    let mut t = Table::new(&["j", "real", "imag"]);
    for (j, c) in a.iter().enumerate() {
        t.rows.push(vec![Value::from(j), num(c.re), num(c.im)]);
    }
    t
}

fn preset(name: &str) -> Result<crate::ensembles::CoefficientEnsemble, CliError> {
    preset_ensemble(name).ok_or_else(|| usage(format!("unknown preset `{name}` (known: {})", PRESET_NAMES.join(", "))))
}

fn parse_with<T: std::str::FromStr>(what: &str, s: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    s.parse::<T>().map_err(|e| usage(format!("invalid {what} `{s}`: {e}")))
}

struct Output {
    table: Table,
    /// Non-fatal remark for stderr.
    warning: Option<String>,
    /// Numeric failure after the table was produced.
    failure: Option<String>,
}

impl From<Table> for Output {
    fn from(table: Table) -> Self {
        Output {
            table,
            warning: None,
            failure: None,
        }
    }
}

fn run(cli: Cli) -> Result<Output, CliError> {
    let common = &cli.common;
    let seed = common.seed.unwrap_or(1);
    match cli.command {
        Command::Sample { preset: name, n } => {
            let ens = preset(&name)?;
            let a = sample_coefficients(&ens, n, seed).map_err(usage)?;
            Ok(coefficient_table(&a).into())
        }
        Command::Roots {
            coeffs,
            basis,
            tol,
            max_iters,
        } => {
            let a = read_coefficients(&coeffs)?;
            let opts = RootOptions { tol, max_iters };
            let kind: BasisKind = parse_with("basis", &basis)?;
            let set = if kind == BasisKind::Monomial {
                let poly = ComplexPolynomial::new(a).map_err(usage)?;
                find_roots(&poly, &opts)
            } else {
                let b = Basis::new(&BasisSpec::new(kind, a.len() - 1)).map_err(usage)?;
                bases::find_basis_roots(&b, &a, &opts).map_err(usage)?
            };
            let mut t = Table::new(&["index", "real", "imag", "residual"]);
            for (i, (z, r)) in set.roots.iter().zip(&set.residuals).enumerate() {
                t.rows.push(vec![Value::from(i), num(z.re), num(z.im), num(*r)]);
            }
            let mut out = Output::from(t);
            if set.at_infinity > 0 {
                out.warning = Some(format!("{} roots at infinity (vanishing leading coefficients)", set.at_infinity));
            }
            if !set.converged {
                out.failure = Some(format!(
                    "root finder did not converge in {} iterations (max residual {:e})",
                    set.iterations,
                    set.max_residual()
                ));
            }
            Ok(out)
        }
        Command::BasisCheck {
            basis,
            domain,
            k_max,
            grid,
            triangle,
        } => {
            let kind: BasisKind = parse_with("basis", &basis)?;
            if let Some(n) = triangle {
                let tri = bases::basis_triangle(&BasisSpec::new(kind, n)).map_err(usage)?;
                let mut t = Table::new(&["k", "j", "real", "imag"]);
                for k in 0..=n {
                    for j in 0..=k {
                        let c = tri.get(j, k);
                        t.rows.push(vec![Value::from(k), Value::from(j), num(c.re), num(c.im)]);
                    }
                }
                return Ok(t.into());
            }
            let spec = BasisSpec::new(kind, k_max);
            let domain: DomainModel = match domain {
                Some(d) => parse_with("domain", &d)?,
                None => spec
                    .natural_domain()
                    .ok_or_else(|| usage("basis has no natural domain; pass --domain"))?,
            };
            let rows = bases::regularity_report(&spec, &domain, k_max, grid).map_err(usage)?;
            let mut t = Table::new(&["k", "leading_root", "sup_norm"]);
            for r in rows {
                t.rows.push(vec![Value::from(r.k), num(r.leading_root), num(r.sup_norm)]);
            }
            Ok(t.into())
        }
        Command::Bound {
            preset: name,
            n,
            t,
            r,
            domain,
            basis,
            kind,
            moments,
            moment_samples,
            trials,
        } => {
            let domain: DomainModel = parse_with("domain", &domain)?;
            let mut config =
                ExperimentConfig::new(preset(&name)?, parse_with("basis", &basis)?, domain, vec![n], 1);
            config.t = t;
            if let Some(r) = r {
                config.r = r;
            }
            config.seed = seed;
            config.bound = parse_with::<BoundChoice>("bound kind", &kind)?;
            config.moments = parse_with::<MomentSource>("moment source", &moments)?;
            config.moment_samples = moment_samples;
            let prepared = PreparedExperiment::new(config)?;
            let log_at_w = match (prepared.config.resolved_bound(), prepared.config.domain.interior_point()) {
                (BoundChoice::Disk, Some(w)) => {
                    let m = estimate_log_at_point(&prepared.config.ensemble, &prepared.basis, n, w, trials, seed)?;
                    Some(Stat {
                        mean: m.estimate,
                        std: m.std_error * (trials as f64).sqrt(),
                        se: m.std_error,
                    })
                }
                _ => None,
            };
            let (_, res) = compute_bounds(&prepared, &[(n, log_at_w)])?
                .pop()
                .ok_or_else(|| usage("bound kind `none` has nothing to print"))?;
            let b = res.map_err(CliError::Numeric)?;
            let mut tab = Table::new(&[
                "n",
                "t",
                "r",
                "bound",
                "bound_se",
                "bracket",
                "constant",
                "constant_known",
                "provenance",
            ]);
            tab.rows.push(vec![
                Value::from(n),
                num(prepared.config.t),
                num(prepared.config.r),
                num(b.value.value),
                num(b.std_error),
                num(b.value.bracket),
                num(b.value.constant),
                Value::from(b.value.constant_known),
                Value::from(format!("{:?}", b.value.provenance).to_lowercase()),
            ]);
            let mut out = Output::from(tab);
            if !b.value.constant_known {
                out.warning = Some(format!("bound holds {}", b.value.qualifier()));
            }
            Ok(out)
        }
        Command::ExperimentRun { config, workers } => {
            let mut cfg = ExperimentConfig::from_file(&config)?;
            if let Some(s) = common.seed {
                cfg.seed = s;
            }
            let outcome = run_experiment(&cfg, workers, common.out.as_deref())?;
            let mut out = Output::from(dominance_table(&outcome.summary));
            let bad = outcome.summary.nonconverged_trials;
            if bad > 0 {
                out.warning = Some(format!("{bad} trials did not converge; their zeros are kept and flagged"));
            }
            Ok(out)
        }
        Command::ExperimentFit { run } => {
            let summary = load_summary(&run)?;
            let fit = fit_aggregate(&summary.degrees)?;
            let mut t = Table::new(&["slope", "intercept", "r_squared", "points", "excluded"]);
            let excluded: Vec<String> = fit.excluded.iter().map(|d| d.to_string()).collect();
            t.rows.push(vec![
                num(fit.slope),
                num(fit.intercept),
                num(fit.r_squared),
                Value::from(fit.degrees.len()),
                Value::from(excluded.join(" ")),
            ]);
            Ok(t.into())
        }
        Command::Report { run } => Ok(dominance_table(&load_summary(&run)?).into()),
    }
}

fn dominance_table(summary: &experiments::ExperimentSummary) -> Table {
    let mut t = Table::new(&[
        "degree",
        "trials",
        "mean_sup",
        "mean",
        "mean_se",
        "bound",
        "bound_se",
        "holds",
        "margin_se",
        "constant_known",
        "note",
    ]);
    for (row, agg) in summary.dominance.iter().zip(&summary.degrees) {
        t.rows.push(vec![
            Value::from(row.degree),
            Value::from(agg.trials),
            num(row.mean_sup),
            num(row.mean),
            num(row.mean_se),
            opt(row.bound),
            opt(row.bound_se),
            row.holds.map_or(Value::Null, Value::from),
            opt(row.margin_se),
            row.constant_known.map_or(Value::Null, Value::from),
            row.note.clone().map_or(Value::Null, Value::from),
        ]);
    }
    t
}

/// Parses `args` (program name first), runs the command and returns the exit
/// code. Normal output goes to `out`, diagnostics to `err`.
pub fn dispatch<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    0
                }
                _ => {
                    let _ = write!(err, "{text}");
                    1
                }
            };
        }
    };
    let format = cli.common.format;
    let target = match &cli.command {
        Command::ExperimentRun { .. } => None,
        _ => cli.common.out.clone(),
    };
    match run(cli) {
        Ok(o) => {
            let text = o.table.render(format);
            let written = match &target {
                Some(p) => fs::write(p, &text).map_err(|e| format!("{}: {e}", p.display())),
                None => out.write_all(text.as_bytes()).map_err(|e| e.to_string()),
            };
            if let Err(m) = written {
                let _ = writeln!(err, "error: {m}");
                return 1;
            }
            if let Some(w) = o.warning {
                let _ = writeln!(err, "warning: {w}");
            }
            if let Some(f) = o.failure {
                let _ = writeln!(err, "error: {f}");
                return 2;
            }
            0
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
