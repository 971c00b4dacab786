//! Monte Carlo harness: ensemble × basis × domain × degrees × trials.
//!
//! A run is described by an [`ExperimentConfig`] (text format in
//! [`CONFIG_SCHEMA`]). Every trial is a pure function of
//! `(config, degree, trial)` through [`seed::trial_seed`], so trials can run in
//! any order on any number of workers. Aggregation sorts records by
//! `(degree, trial)` before folding, which makes `summary.json` independent of
//! scheduling.
//!
//! On disk a run directory holds `config.txt` (canonical echo), `trials.csv`
//! (append-only, one row per trial and sector), `summary.json` (written
//! atomically) and an empty `COMPLETE` marker.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bases::{self, Basis, BasisError, BasisKind, BasisSpec};
use crate::config::{parse_list, ConfigError, KvDocument};
use crate::discrepancy::{
    arc_bound, counting_measure, disk_bound, kac_bound, BoundInputs, BoundValue, DiscrepancyError, Provenance,
};
use crate::ensembles::{
    self, empirical_moment, max_root_statistic, sample_coefficients, CoefficientEnsemble, DistributionSpec,
    EnsembleError, EnsembleMode, MomentEstimate, MomentKind,
};
use crate::polyroots::RootOptions;
use crate::potential::{equilibrium_measure, DomainModel, PotentialError, Sector};
use crate::seed::{self, tag};

/// Degrees below this are reported but not held to the dominance check.
pub const ASYMPTOTIC_THRESHOLD: usize = 64;

pub const TRIALS_FILE: &str = "trials.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const CONFIG_FILE: &str = "config.txt";
pub const COMPLETE_FILE: &str = "COMPLETE";

/// Documented keys of the experiment config file.
pub const CONFIG_SCHEMA: &str = "\
[ensemble]
  preset = gaussian-kac | rademacher-kac | cauchy-kac | log-cauchy-kac | shared-xi | variance-decay
  # or explicitly:
  mode = iid | triangular | shared | per-index | variance-decay
  distribution = complex-gaussian(re, im, sigma) | real-gaussian(m, s) | rademacher
               | uniform-disk(R) | uniform-interval(lo, hi) | cauchy(s) | log-cauchy
               | constant(re[, im]) | shared(<distribution>)
  index = <distribution>        # per-index mode, repeated for k = 0, 1, ...
  alpha = <real>                # variance-decay mode
  label = <text>
[basis]
  kind = monomial | szego-circle | bergman-disk | chebyshev-orthonormal(a, b)
       | faber-interval(a, b) | faber-disk | faber-ellipse(R)
       | gram-schmidt(circle(m) | arcsine(a, b, m) | legendre(a, b, m) | disk-area(mr, mt))
[domain]
  set = unit-circle | closed-unit-disk | interval(a, b) | ellipse(R)
[run]
  degrees = 64, 128, 256        # strictly increasing
  trials = 200
  sectors = 8                   # m equal-measure cells (default 8), or repeat
  sector = annular(r, alpha, beta) | two-sided(r, alpha, beta) | strip(x1, x2) | parameter(r, alpha, beta)
  t = 1                         # moment order in (0, 1]
  r = 0.5                       # cell radius parameter (default 0.5 circle, 1.5 disk/ellipse)
  seed = 1
  output = <directory>          # optional
  bound = auto | kac | arc | disk | none
  moments = auto | closed-form | monte-carlo
  moment-samples = 100000
  tol = 1e-12
  max-iters = 200
";

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("invalid experiment: {0}")]
    Invalid(String),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error(transparent)]
    Discrepancy(#[from] DiscrepancyError),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("trial (degree {degree}, trial {trial}): {message}")]
    Trial { degree: usize, trial: usize, message: String },
    #[error("cannot resume {path}: {message}")]
    Resume { path: PathBuf, message: String },
    #[error("rate fit: {0}")]
    Fit(String),
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> ExperimentError {
    ExperimentError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SectorFamily {
    Equal(usize),
    Explicit(Vec<Sector>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundChoice {
    Auto,
    Kac,
    Arc,
    Disk,
    None,
}

impl FromStr for BoundChoice {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "auto" => BoundChoice::Auto,
            "kac" => BoundChoice::Kac,
            "arc" => BoundChoice::Arc,
            "disk" => BoundChoice::Disk,
            "none" => BoundChoice::None,
            _ => return Err(format!("unknown bound `{s}`")),
        })
    }
}

impl BoundChoice {
    fn name(&self) -> &'static str {
        match self {
            BoundChoice::Auto => "auto",
            BoundChoice::Kac => "kac",
            BoundChoice::Arc => "arc",
            BoundChoice::Disk => "disk",
            BoundChoice::None => "none",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MomentSource {
    Auto,
    ClosedForm,
    MonteCarlo,
}

impl FromStr for MomentSource {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "auto" => MomentSource::Auto,
            "closed-form" => MomentSource::ClosedForm,
            "monte-carlo" => MomentSource::MonteCarlo,
            _ => return Err(format!("unknown moment source `{s}`")),
        })
    }
}

impl MomentSource {
    fn name(&self) -> &'static str {
        match self {
            MomentSource::Auto => "auto",
            MomentSource::ClosedForm => "closed-form",
            MomentSource::MonteCarlo => "monte-carlo",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub ensemble: CoefficientEnsemble,
    pub basis: BasisKind,
    pub domain: DomainModel,
    pub degrees: Vec<usize>,
    pub trials: usize,
    pub sectors: SectorFamily,
    pub t: f64,
    pub r: f64,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub bound: BoundChoice,
    pub moments: MomentSource,
    pub moment_samples: usize,
    pub root_options: RootOptions,
}

fn default_r(domain: &DomainModel) -> f64 {
    match domain {
        DomainModel::UnitCircle => 0.5,
        _ => 1.5,
    }
}

impl ExperimentConfig {
    /// Defaults around a given ensemble, basis and domain.
    pub fn new(ensemble: CoefficientEnsemble, basis: BasisKind, domain: DomainModel, degrees: Vec<usize>, trials: usize) -> Self {
        Self {
            ensemble,
            basis,
            r: default_r(&domain),
            domain,
            degrees,
            trials,
            sectors: SectorFamily::Equal(8),
            t: 1.0,
            seed: 1,
            output: None,
            bound: BoundChoice::Auto,
            moments: MomentSource::Auto,
            moment_samples: 100_000,
            root_options: RootOptions::default(),
        }
    }

    pub fn parse(text: &str) -> Result<Self, ExperimentError> {
        let doc = KvDocument::parse(text)?;
        let ensemble = CoefficientEnsemble::from_kv(&doc, "ensemble")?;
        let basis: BasisKind = {
            let e = doc.require("basis", "kind")?;
            e.value.parse().map_err(|x: BasisError| ConfigError::Value {
                line: e.line,
                key: "kind".into(),
                message: x.to_string(),
            })?
        };
        let domain: DomainModel = doc.parse_req("domain", "set")?;
        let degrees_entry = doc.require("run", "degrees")?;
        let degrees: Vec<usize> = parse_list(&degrees_entry.value).map_err(|m| ConfigError::Value {
            line: degrees_entry.line,
            key: "degrees".into(),
            message: m,
        })?;
        let trials: usize = doc.parse_req("run", "trials")?;
        let mut explicit = Vec::new();
        for e in doc.get_all("run", "sector") {
            explicit.push(e.value.parse::<Sector>().map_err(|x| ConfigError::Value {
                line: e.line,
                key: "sector".into(),
                message: x.to_string(),
            })?);
        }
        let sectors = if explicit.is_empty() {
            SectorFamily::Equal(doc.parse_opt("run", "sectors")?.unwrap_or(8))
        } else {
            SectorFamily::Explicit(explicit)
        };
        let mut cfg = Self::new(ensemble, basis, domain, degrees, trials);
        cfg.sectors = sectors;
        if let Some(t) = doc.parse_opt("run", "t")? {
            cfg.t = t;
        }
        if let Some(r) = doc.parse_opt("run", "r")? {
            cfg.r = r;
        }
        if let Some(s) = doc.parse_opt("run", "seed")? {
            cfg.seed = s;
        }
        cfg.output = doc.get("run", "output").map(|e| PathBuf::from(&e.value));
        if let Some(b) = doc.parse_opt("run", "bound")? {
            cfg.bound = b;
        }
        if let Some(m) = doc.parse_opt("run", "moments")? {
            cfg.moments = m;
        }
        if let Some(m) = doc.parse_opt("run", "moment-samples")? {
            cfg.moment_samples = m;
        }
        if let Some(tol) = doc.parse_opt("run", "tol")? {
            cfg.root_options.tol = tol;
        }
        if let Some(it) = doc.parse_opt("run", "max-iters")? {
            cfg.root_options.max_iters = it;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, ExperimentError> {
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            ExperimentError::Config(c) => ExperimentError::Invalid(format!("{}: {c}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::Invalid(m));
        if self.degrees.is_empty() {
            return bad("no degrees".into());
        }
        if self.degrees[0] == 0 || self.degrees.windows(2).any(|w| w[0] >= w[1]) {
            return bad("degrees must be positive and strictly increasing".into());
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if !(self.t > 0.0 && self.t <= 1.0) {
            return bad(format!("t must lie in (0, 1], got {}", self.t));
        }
        if self.moment_samples < 2 {
            return bad("moment-samples must be at least 2".into());
        }
        self.domain.validate()?;
        let spec = BasisSpec::new(self.basis.clone(), 0);
        spec.validate()?;
        if !spec.accepts_domain(&self.domain) {
            return Err(BasisError::DomainMismatch {
                basis: self.basis.to_string(),
                domain: self.domain.to_string(),
            }
            .into());
        }
        let sectors = self.sector_list();
        if sectors.is_empty() {
            return bad("sector family is empty".into());
        }
        for s in &sectors {
            s.validate_for(&self.domain)?;
        }
        Ok(())
    }

    pub fn max_degree(&self) -> usize {
        *self.degrees.last().expect("validated")
    }

    pub fn sector_list(&self) -> Vec<Sector> {
        match &self.sectors {
            SectorFamily::Equal(m) => self.domain.partition(*m, self.r),
            SectorFamily::Explicit(v) => v.clone(),
        }
    }

    /// Canonical text form. The output directory is left out so that the same
    /// experiment written to two places echoes identically.
    pub fn to_kv(&self) -> String {
        let mut out = String::from("[ensemble]\n");
        out.push_str(&self.ensemble.to_kv());
        out.push_str(&format!("[basis]\nkind = {}\n", self.basis));
        out.push_str(&format!("[domain]\nset = {}\n", self.domain));
        out.push_str("[run]\n");
        let degrees: Vec<String> = self.degrees.iter().map(|d| d.to_string()).collect();
        out.push_str(&format!("degrees = {}\n", degrees.join(", ")));
        out.push_str(&format!("trials = {}\n", self.trials));
        match &self.sectors {
            SectorFamily::Equal(m) => out.push_str(&format!("sectors = {m}\n")),
            SectorFamily::Explicit(v) => {
                for s in v {
                    out.push_str(&format!("sector = {s}\n"));
                }
            }
        }
        out.push_str(&format!("t = {}\nr = {}\nseed = {}\n", self.t, self.r, self.seed));
        out.push_str(&format!("bound = {}\nmoments = {}\n", self.bound.name(), self.moments.name()));
        out.push_str(&format!("moment-samples = {}\n", self.moment_samples));
        out.push_str(&format!(
            "tol = {:e}\nmax-iters = {}\n",
            self.root_options.tol, self.root_options.max_iters
        ));
        out
    }

    /// Bound family actually used.
    pub fn resolved_bound(&self) -> BoundChoice {
        match self.bound {
            BoundChoice::Auto => match (&self.domain, &self.basis) {
                (DomainModel::UnitCircle, BasisKind::Monomial) => BoundChoice::Kac,
                (DomainModel::UnitCircle | DomainModel::Interval { .. }, _) => BoundChoice::Arc,
                _ => BoundChoice::Disk,
            },
            b => b,
        }
    }
}

/// One sector's outcome inside a trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorOutcome {
    pub sector_id: usize,
    pub tau: f64,
    pub mu: f64,
    pub diff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub degree: usize,
    pub trial: usize,
    pub sectors: Vec<SectorOutcome>,
    pub sup_diff: f64,
    /// `(max_k |A_k|)^{1/n}`
    pub max_root_stat: f64,
    /// `log|A_n P_n(w)|` at the interior point, for domains with interior.
    pub log_at_w: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub wall_ms: f64,
}

impl TrialRecord {
    /// Equality ignoring wall time.
    pub fn same_result(&self, other: &Self) -> bool {
        let mut a = self.clone();
        a.wall_ms = other.wall_ms;
        a == *other
    }
}

/// Config plus the objects every trial shares.
pub struct PreparedExperiment {
    pub config: ExperimentConfig,
    pub basis: Basis,
    pub sectors: Vec<Sector>,
    pub mus: Vec<f64>,
}

impl PreparedExperiment {
    pub fn new(config: ExperimentConfig) -> Result<Self, ExperimentError> {
        config.validate()?;
        let basis = Basis::new(&BasisSpec::new(config.basis.clone(), config.max_degree()))?;
        let sectors = config.sector_list();
        let mus = sectors
            .iter()
            .map(|s| equilibrium_measure(&config.domain, s))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            config,
            basis,
            sectors,
            mus,
        })
    }

    pub fn run_trial(&self, degree: usize, trial: usize) -> Result<TrialRecord, ExperimentError> {
        let start = Instant::now();
        let wrap = |m: String| ExperimentError::Trial { degree, trial, message: m };
        let s = seed::trial_seed(self.config.seed, degree, trial);
        let a = sample_coefficients(&self.config.ensemble, degree, s).map_err(|e| wrap(e.to_string()))?;
        let roots =
            bases::find_basis_roots(&self.basis, &a, &self.config.root_options).map_err(|e| wrap(e.to_string()))?;
        let tau = counting_measure(&roots, true)?;
        let mut sectors = Vec::with_capacity(self.sectors.len());
        for (i, (sec, &mu)) in self.sectors.iter().zip(&self.mus).enumerate() {
            let t = tau.sector(&self.config.domain, sec);
            sectors.push(SectorOutcome {
                sector_id: i,
                tau: t,
                mu,
                diff: (t - mu).abs(),
            });
        }
        let sup_diff = sectors.iter().map(|x| x.diff).fold(0.0, f64::max);
        let log_at_w = match self.config.domain.interior_point() {
            Some(w) => {
                let p = self.basis.log_abs_series(&a, w).map_err(|e| wrap(e.to_string()))?;
                Some(a[degree].norm().ln() + p)
            }
            None => None,
        };
        Ok(TrialRecord {
            degree,
            trial,
            sectors,
            sup_diff,
            max_root_stat: max_root_statistic(&a),
            log_at_w,
            iterations: roots.iterations,
            converged: roots.converged,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        })
    }
}

/// One trial from scratch.
pub fn run_trial(config: &ExperimentConfig, degree: usize, trial: usize) -> Result<TrialRecord, ExperimentError> {
    PreparedExperiment::new(config.clone())?.run_trial(degree, trial)
}

/// Mean, sample standard deviation and standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
    pub se: f64,
}

fn stat(values: &[f64]) -> Stat {
    let m = MomentEstimate::from_samples(values.iter().copied());
    let n = values.len() as f64;
    Stat {
        mean: m.estimate,
        std: m.std_error * n.sqrt(),
        se: m.std_error,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeAggregate {
    pub degree: usize,
    pub trials: usize,
    pub converged: usize,
    pub sup_diff: Stat,
    /// Per-sector `|τ - μ|`.
    pub sector_diff: Vec<Stat>,
    pub max_root_stat: Stat,
    pub iterations: Stat,
    pub log_at_w: Option<Stat>,
}

impl DegreeAggregate {
    /// Largest per-sector mean discrepancy and its standard error.
    pub fn worst_sector(&self) -> (usize, Stat) {
        let mut best = (0, self.sector_diff[0]);
        for (i, s) in self.sector_diff.iter().enumerate() {
            if s.mean > best.1.mean {
                best = (i, *s);
            }
        }
        best
    }
}

/// Folds records into per-degree statistics; input order does not matter.
pub fn aggregate(records: &[TrialRecord]) -> Vec<DegreeAggregate> {
    let mut by_degree: BTreeMap<usize, Vec<&TrialRecord>> = BTreeMap::new();
    for r in records {
        by_degree.entry(r.degree).or_default().push(r);
    }
    by_degree
        .into_iter()
        .map(|(degree, mut recs)| {
            recs.sort_by_key(|r| r.trial);
            let m = recs[0].sectors.len();
            let col = |f: &dyn Fn(&TrialRecord) -> f64| stat(&recs.iter().map(|r| f(r)).collect::<Vec<_>>());
            let log_at_w = if recs.iter().all(|r| r.log_at_w.is_some_and(f64::is_finite)) {
                Some(col(&|r| r.log_at_w.unwrap()))
            } else {
                None
            };
            DegreeAggregate {
                degree,
                trials: recs.len(),
                converged: recs.iter().filter(|r| r.converged).count(),
                sup_diff: col(&|r| r.sup_diff),
                sector_diff: (0..m).map(|i| col(&|r| r.sectors[i].diff)).collect(),
                max_root_stat: col(&|r| r.max_root_stat),
                iterations: col(&|r| r.iterations as f64),
                log_at_w,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Degrees used in the fit.
    pub degrees: Vec<usize>,
    /// Degrees dropped because their mean was not positive.
    pub excluded: Vec<usize>,
}

/// Least squares of `log mean` against `log n`.
pub fn fit_rate(points: &[(usize, f64)]) -> Result<RateFit, ExperimentError> {
    let (used, excluded): (Vec<_>, Vec<_>) = points.iter().partition(|(_, m)| *m > 0.0 && m.is_finite());
    if used.len() < 4 {
        return Err(ExperimentError::Fit(format!(
            "need at least 4 degrees with positive means, have {}",
            used.len()
        )));
    }
    let xs: Vec<f64> = used.iter().map(|(n, _)| (*n as f64).ln()).collect();
    let ys: Vec<f64> = used.iter().map(|(_, m)| m.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(ExperimentError::Fit("degrees are not distinct".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    Ok(RateFit {
        slope,
        intercept,
        r_squared,
        degrees: used.iter().map(|(n, _)| *n).collect(),
        excluded: excluded.iter().map(|(n, _)| *n).collect(),
    })
}

/// Rate fit of the mean sup-discrepancy.
pub fn fit_aggregate(aggs: &[DegreeAggregate]) -> Result<RateFit, ExperimentError> {
    fit_rate(&aggs.iter().map(|a| (a.degree, a.sup_diff.mean)).collect::<Vec<_>>())
}

/// A degree paired with its bound, or the reason it could not be formed.
pub type DegreeBound = (usize, Result<BoundEstimate, String>);

/// A bound with a delta-method standard error from its moment inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundEstimate {
    pub inputs: BoundInputs,
    pub value: BoundValue,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominanceRow {
    pub degree: usize,
    /// Largest per-sector mean discrepancy.
    pub mean: f64,
    pub mean_se: f64,
    pub mean_sup: f64,
    pub bound: Option<f64>,
    pub bound_se: Option<f64>,
    pub constant_known: Option<bool>,
    pub holds: Option<bool>,
    /// `(bound - mean) / combined standard error`.
    pub margin_se: Option<f64>,
    /// False below [`ASYMPTOTIC_THRESHOLD`]: reported, not asserted.
    pub asserted: bool,
    pub note: Option<String>,
}

/// Compares each degree's mean discrepancy with its bound.
pub fn verify_dominance(aggs: &[DegreeAggregate], bounds: &[DegreeBound]) -> Vec<DominanceRow> {
    aggs.iter()
        .map(|a| {
            let (_, worst) = a.worst_sector();
            let found = bounds.iter().find(|(n, _)| *n == a.degree).map(|(_, b)| b);
            let mut row = DominanceRow {
                degree: a.degree,
                mean: worst.mean,
                mean_se: worst.se,
                mean_sup: a.sup_diff.mean,
                bound: None,
                bound_se: None,
                constant_known: None,
                holds: None,
                margin_se: None,
                asserted: a.degree >= ASYMPTOTIC_THRESHOLD,
                note: None,
            };
            match found {
                Some(Ok(b)) => {
                    let v = b.value.value;
                    let combined = (worst.se.powi(2) + b.std_error.powi(2)).sqrt();
                    row.bound = Some(v);
                    row.bound_se = Some(b.std_error);
                    row.constant_known = Some(b.value.constant_known);
                    row.holds = Some(worst.mean <= v);
                    row.margin_se = (combined > 0.0).then(|| (v - worst.mean) / combined);
                    if !b.value.constant_known {
                        row.note = Some("up to an absolute constant".into());
                    }
                }
                Some(Err(m)) => row.note = Some(m.clone()),
                None => row.note = Some("no bound".into()),
            }
            if !row.asserted {
                let extra = format!("n < {ASYMPTOTIC_THRESHOLD}: not asserted");
                row.note = Some(match row.note.take() {
                    Some(n) => format!("{n}; {extra}"),
                    None => extra,
                });
            }
            row
        })
        .collect()
}

fn label_hash(s: &str) -> u64 {
    // FNV-1a, only used to key moment streams by distribution
    s.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// Moment inputs for one configuration, cached per distribution.
struct MomentTable<'a> {
    config: &'a ExperimentConfig,
    cache: HashMap<(String, u8), MomentEstimate>,
    empirical: bool,
}

impl<'a> MomentTable<'a> {
    fn new(config: &'a ExperimentConfig) -> Self {
        Self {
            config,
            cache: HashMap::new(),
            empirical: false,
        }
    }

    fn get(&mut self, spec: &DistributionSpec, which: u8) -> Result<MomentEstimate, String> {
        let key = (spec.to_string(), which);
        if let Some(m) = self.cache.get(&key) {
            return Ok(*m);
        }
        let t = self.config.t;
        let closed = match which {
            0 => spec.closed_form_abs_moment(t),
            _ => spec.closed_form_log_moment(),
        };
        let (has, kind) = match which {
            0 => (spec.has_abs_moment(t), MomentKind::AbsPower(t)),
            _ => (spec.has_log_plus_moment(), MomentKind::LogAbs),
        };
        let est = match (self.config.moments, closed) {
            (MomentSource::ClosedForm, None) => return Err(format!("no closed form for {spec}")),
            (MomentSource::ClosedForm | MomentSource::Auto, Some(v)) => MomentEstimate::exact(v),
            _ => {
                if !has {
                    return Err(format!("moment of {spec} is infinite"));
                }
                self.empirical = true;
                let s = seed::derive(self.config.seed, &[tag::MOMENT, which as u64, label_hash(&key.0)]);
                empirical_moment(spec, kind, self.config.moment_samples, s)
            }
        };
        self.cache.insert(key, est);
        Ok(est)
    }
}

/// `(Σ E|A_k|^t, se)`, `E log|A_0|`, `E log|A_n|` for degree `n`.
fn coefficient_moments(
    table: &mut MomentTable<'_>,
    n: usize,
) -> Result<(MomentEstimate, MomentEstimate, MomentEstimate), String> {
    let config = table.config;
    if let EnsembleMode::VarianceDecay { alpha } = config.ensemble.mode {
        let t = config.t;
        let unit = DistributionSpec::new(ensembles::DistributionKind::RealGaussian { mean: 0.0, sigma: 1.0 });
        let m = unit.closed_form_abs_moment(t).expect("gaussian");
        let l = unit.closed_form_log_moment().expect("gaussian");
        let sum: f64 = (0..=n).map(|k| CoefficientEnsemble::decay_sigma(alpha, k).powf(t) * m).sum();
        let log_sigma = |k: usize| -(k as f64).powf(alpha) / 2.0;
        return Ok((
            MomentEstimate::exact(sum),
            MomentEstimate::exact(log_sigma(0) + l),
            MomentEstimate::exact(log_sigma(n) + l),
        ));
    }
    let mut groups: BTreeMap<String, (usize, MomentEstimate)> = BTreeMap::new();
    for k in 0..=n {
        let spec = config.ensemble.marginal(k).expect("non-decay ensemble").clone();
        let m = table.get(&spec, 0)?;
        groups.entry(spec.to_string()).or_insert((0, m)).0 += 1;
    }
    let sum: f64 = groups.values().map(|(c, m)| *c as f64 * m.estimate).sum();
    let se = groups
        .values()
        .map(|(c, m)| (*c as f64 * m.std_error).powi(2))
        .sum::<f64>()
        .sqrt();
    let first = table.get(&config.ensemble.marginal(0).unwrap().clone(), 1)?;
    let last = table.get(&config.ensemble.marginal(n).unwrap().clone(), 1)?;
    Ok((
        MomentEstimate {
            estimate: sum,
            std_error: se,
        },
        first,
        last,
    ))
}

/// `max_{k≤n} ‖B_k‖_E` for every `n` up to the largest degree.
fn running_max_norms(config: &ExperimentConfig) -> Result<Vec<f64>, ExperimentError> {
    let spec = BasisSpec::new(config.basis.clone(), config.max_degree());
    let rows = bases::regularity_report(&spec, &config.domain, config.max_degree(), None)?;
    let b0 = Basis::new(&BasisSpec::new(config.basis.clone(), 0))?.recurrence.b00.abs();
    let mut out = vec![b0];
    for r in rows {
        let last = *out.last().unwrap();
        out.push(last.max(r.sup_norm));
    }
    Ok(out)
}

/// Bounds at each `(degree, E log|A_n P_n(w)|)` point; the second entry is
/// only read by the disk bound.
pub fn compute_bounds(
    prepared: &PreparedExperiment,
    points: &[(usize, Option<Stat>)],
) -> Result<Vec<DegreeBound>, ExperimentError> {
    let config = &prepared.config;
    let choice = config.resolved_bound();
    if choice == BoundChoice::None {
        return Ok(Vec::new());
    }
    let norms = running_max_norms(config)?;
    let mut table = MomentTable::new(config);
    let log_cap = config.domain.capacity().ln();
    let mut out = Vec::new();
    for &(n, log_at_w) in points {
        if n > config.max_degree() {
            return Err(ExperimentError::Invalid(format!("degree {n} exceeds the configured maximum")));
        }
        let res = (|| -> Result<BoundEstimate, String> {
            let (sum, first, last) = coefficient_moments(&mut table, n)?;
            let provenance = if table.empirical {
                Provenance::Empirical
            } else {
                Provenance::ClosedForm
            };
            let mut inputs = BoundInputs {
                n,
                t: config.t,
                sum_t_moments: sum.estimate,
                log_moment_first: Some(first.estimate),
                log_moment_last: last.estimate,
                log_moment_at_w: log_at_w.map(|s| s.mean),
                basis_max_norm: norms[n],
                log_leading: prepared.basis.log_leading[n] + n as f64 * log_cap,
                r: config.r,
                provenance,
            };
            let sum_term = sum.std_error / (sum.estimate * config.t);
            let (value, other_se) = match choice {
                BoundChoice::Kac => (kac_bound(&inputs), 0.5 * (first.std_error + last.std_error)),
                BoundChoice::Arc => (arc_bound(&inputs, &config.domain), last.std_error),
                _ => {
                    let w = log_at_w.ok_or("E log|A_n P_n(w)| is not finite in this run")?;
                    inputs.log_moment_at_w = Some(w.mean);
                    (disk_bound(&inputs), 2.0 * sum_term + w.se)
                }
            };
            let value = value.map_err(|e| e.to_string())?;
            let sum_factor = if choice == BoundChoice::Disk { 0.0 } else { sum_term };
            let bracket_se = (sum_factor + other_se) / n as f64;
            let std_error = if value.bracket > 0.0 {
                value.constant * bracket_se / (2.0 * value.bracket.sqrt())
            } else {
                0.0
            };
            Ok(BoundEstimate {
                inputs,
                value,
                std_error,
            })
        })();
        out.push((n, res));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub config: String,
    pub seed: u64,
    pub bound: String,
    pub degrees: Vec<DegreeAggregate>,
    pub rate_fit: Option<RateFit>,
    pub rate_note: Option<String>,
    pub dominance: Vec<DominanceRow>,
    pub nonconverged_trials: usize,
}

impl ExperimentSummary {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes") + "\n"
    }
}

pub struct ExperimentOutcome {
    pub summary: ExperimentSummary,
    pub records: Vec<TrialRecord>,
    /// Trials executed by this call (0 when fully resumed).
    pub executed: usize,
}

/// Builds the summary from a complete record set.
pub fn summarize(prepared: &PreparedExperiment, records: &[TrialRecord]) -> Result<ExperimentSummary, ExperimentError> {
    let aggs = aggregate(records);
    let (rate_fit, rate_note) = match fit_aggregate(&aggs) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let points: Vec<_> = aggs.iter().map(|a| (a.degree, a.log_at_w)).collect();
    let bounds = compute_bounds(prepared, &points)?;
    let dominance = verify_dominance(&aggs, &bounds);
    Ok(ExperimentSummary {
        config: prepared.config.to_kv(),
        seed: prepared.config.seed,
        bound: prepared.config.resolved_bound().name().to_string(),
        nonconverged_trials: records.iter().filter(|r| !r.converged).count(),
        degrees: aggs,
        rate_fit,
        rate_note,
        dominance,
    })
}

const CSV_HEADER: [&str; 12] = [
    "degree",
    "trial",
    "sector_id",
    "tau",
    "mu",
    "diff",
    "sup_diff",
    "max_root_stat",
    "iters",
    "converged",
    "wall_ms",
    "log_at_w",
];

fn f(x: f64) -> String {
    format!("{x:?}")
}

fn write_records<W: Write>(w: &mut csv::Writer<W>, records: &[TrialRecord]) -> csv::Result<()> {
    for r in records {
        for s in &r.sectors {
            w.write_record([
                r.degree.to_string(),
                r.trial.to_string(),
                s.sector_id.to_string(),
                f(s.tau),
                f(s.mu),
                f(s.diff),
                f(r.sup_diff),
                f(r.max_root_stat),
                r.iterations.to_string(),
                r.converged.to_string(),
                f(r.wall_ms),
                r.log_at_w.map(f).unwrap_or_default(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads complete trial records from a `trials.csv`; a trailing partial trial
/// (fewer than `sectors` rows) is dropped.
pub fn read_trials(path: &Path, sectors: usize) -> Result<Vec<TrialRecord>, ExperimentError> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| io_err(path, e))?;
    let mut groups: BTreeMap<(usize, usize), TrialRecord> = BTreeMap::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row.map_err(|e| io_err(path, e))?;
        let bad = |m: &str| io_err(path, format!("row {}: {m}", i + 2));
        if row.len() < 11 {
            return Err(bad("too few columns"));
        }
        let num = |j: usize| row[j].parse::<f64>().map_err(|_| bad(&format!("column {}", CSV_HEADER[j])));
        let int = |j: usize| row[j].parse::<usize>().map_err(|_| bad(&format!("column {}", CSV_HEADER[j])));
        let (degree, trial) = (int(0)?, int(1)?);
        let log_at_w = match row.get(11) {
            Some(s) if !s.is_empty() => Some(num(11)?),
            _ => None,
        };
        let rec = groups.entry((degree, trial)).or_insert_with(|| TrialRecord {
            degree,
            trial,
            sectors: Vec::new(),
            sup_diff: 0.0,
            max_root_stat: 0.0,
            log_at_w,
            iterations: 0,
            converged: false,
            wall_ms: 0.0,
        });
        let sector_id = int(2)?;
        if sector_id == 0 {
            rec.sectors.clear();
        }
        rec.sectors.push(SectorOutcome {
            sector_id,
            tau: num(3)?,
            mu: num(4)?,
            diff: num(5)?,
        });
        rec.sup_diff = num(6)?;
        rec.max_root_stat = num(7)?;
        rec.iterations = int(8)?;
        rec.converged = row[9].parse::<bool>().map_err(|_| bad("column converged"))?;
        rec.wall_ms = num(10)?;
        rec.log_at_w = log_at_w;
    }
    Ok(groups.into_values().filter(|r| r.sectors.len() == sectors).collect())
}

fn write_atomic(path: &Path, content: &[u8]) -> Result<(), ExperimentError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, content).map_err(|e| io_err(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}

/// Runs every missing trial, persisting to `out` when given (falls back to
/// `config.output`).
pub fn run_experiment(config: &ExperimentConfig, workers: usize, out: Option<&Path>) -> Result<ExperimentOutcome, ExperimentError> {
    let prepared = PreparedExperiment::new(config.clone())?;
    let out: Option<PathBuf> = out.map(Path::to_path_buf).or_else(|| config.output.clone());
    let echo = config.to_kv();
    let m = prepared.sectors.len();
    let mut records: Vec<TrialRecord> = Vec::new();
    let mut writer: Option<csv::Writer<fs::File>> = None;
    if let Some(dir) = &out {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        let cfg_path = dir.join(CONFIG_FILE);
        let trials_path = dir.join(TRIALS_FILE);
        if cfg_path.exists() {
            let old = fs::read_to_string(&cfg_path).map_err(|e| io_err(&cfg_path, e))?;
            if old != echo {
                return Err(ExperimentError::Resume {
                    path: dir.clone(),
                    message: "existing config.txt describes a different experiment".into(),
                });
            }
            if trials_path.exists() {
                records = read_trials(&trials_path, m)?;
                records.retain(|r| config.degrees.contains(&r.degree) && r.trial < config.trials);
            }
        } else {
            fs::write(&cfg_path, &echo).map_err(|e| io_err(&cfg_path, e))?;
        }
        // rewrite the surviving records so a torn tail cannot duplicate rows
        let mut buf = csv::Writer::from_writer(Vec::new());
        buf.write_record(CSV_HEADER).map_err(|e| io_err(&trials_path, e))?;
        write_records(&mut buf, &records).map_err(|e| io_err(&trials_path, e))?;
        let bytes = buf.into_inner().map_err(|e| io_err(&trials_path, e))?;
        write_atomic(&trials_path, &bytes)?;
        let file = fs::OpenOptions::new()
            .append(true)
            .open(&trials_path)
            .map_err(|e| io_err(&trials_path, e))?;
        writer = Some(csv::WriterBuilder::new().has_headers(false).from_writer(file));
    }
    let done: std::collections::HashSet<(usize, usize)> = records.iter().map(|r| (r.degree, r.trial)).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| ExperimentError::Invalid(e.to_string()))?;
    let mut executed = 0;
    for &degree in &config.degrees {
        let pending: Vec<usize> = (0..config.trials).filter(|t| !done.contains(&(degree, *t))).collect();
        if pending.is_empty() {
            continue;
        }
        let batch: Vec<TrialRecord> = pool.install(|| {
            pending
                .par_iter()
                .map(|&t| prepared.run_trial(degree, t))
                .collect::<Result<Vec<_>, _>>()
        })?;
        executed += batch.len();
        if let (Some(w), Some(dir)) = (writer.as_mut(), &out) {
            write_records(w, &batch).map_err(|e| ExperimentError::Io {
                path: dir.join(TRIALS_FILE),
                message: format!("degree {degree}: {e}"),
            })?;
        }
        records.extend(batch);
    }
    records.sort_by_key(|r| (r.degree, r.trial));
    let summary = summarize(&prepared, &records)?;
    if let Some(dir) = &out {
        write_atomic(&dir.join(SUMMARY_FILE), summary.to_json().as_bytes())?;
        let marker = dir.join(COMPLETE_FILE);
        fs::write(&marker, b"").map_err(|e| io_err(&marker, e))?;
    }
    Ok(ExperimentOutcome {
        summary,
        records,
        executed,
    })
}

/// Loads a finished run directory.
pub fn load_summary(dir: &Path) -> Result<ExperimentSummary, ExperimentError> {
    let path = if dir.is_dir() { dir.join(SUMMARY_FILE) } else { dir.to_path_buf() };
    let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
    serde_json::from_str(&text).map_err(|e| io_err(&path, e))
}

/// Estimates `E log|A_n P_n(w)|` directly from `trials` fresh draws.
pub fn estimate_log_at_point(
    ensemble: &CoefficientEnsemble,
    basis: &Basis,
    n: usize,
    w: Complex64,
    trials: usize,
    seed_value: u64,
) -> Result<MomentEstimate, ExperimentError> {
    let mut samples = Vec::with_capacity(trials);
    for i in 0..trials {
        let a = sample_coefficients(ensemble, n, seed::derive(seed_value, &[tag::MOMENT, n as u64, i as u64]))?;
        samples.push(a[n].norm().ln() + basis.log_abs_series(&a, w)?);
    }
    Ok(MomentEstimate::from_samples(samples))
}
