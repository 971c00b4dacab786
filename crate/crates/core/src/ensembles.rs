//! Random coefficient models.
//!
//! A [`DistributionSpec`] describes the law of a single coefficient; a
//! [`CoefficientEnsemble`] describes how a whole coefficient vector
//! `A_0..A_n` is drawn (independent, per-index laws, triangular arrays,
//! one shared value, or the variance-decay negative control).
//!
//! Sampling is a pure function of `(ensemble, n, seed)`: each coefficient owns
//! a stream keyed by its index, so results do not depend on thread schedule.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{parse_call, real_args, KvDocument};
use crate::seed::{self, tag};
use crate::EULER_GAMMA;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnsembleError {
    #[error("degree must be at least 1 (got 0)")]
    ZeroDegree,
    #[error("leading coefficient A_n vanishes")]
    DegenerateLeading,
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("invalid ensemble: {0}")]
    InvalidEnsemble(String),
}

/// Law of a single complex coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DistributionKind {
    /// Density `exp(-|z-m|²/σ²)/(πσ²)`: independent parts with variance `σ²/2`.
    ComplexGaussian { mean: Complex64, sigma: f64 },
    RealGaussian { mean: f64, sigma: f64 },
    Rademacher,
    UniformDisk { radius: f64 },
    UniformInterval { lo: f64, hi: f64 },
    Cauchy { scale: f64 },
    /// `exp(C)` with `C` standard Cauchy.
    LogCauchy,
    /// One value of the inner law reused at every index of a trial.
    SharedValue(Box<DistributionSpec>),
    /// Point mass; mostly useful as the shared value `ξ ≡ c`.
    Constant(Complex64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSpec {
    pub kind: DistributionKind,
    pub label: String,
}

/// Hand-established assumption flags for a distribution.
///
/// None of these are inferred from samples; they record which moment and
/// concentration hypotheses hold for the law, together with the largest moment
/// order used in bound computations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssumptionEnvelope {
    /// Tail integrability `∫ (1-F(x))/x dx < ∞`, i.e. `E log⁺|A| < ∞`.
    pub satisfies_a1: bool,
    /// Small-ball integrability `∫ F(x)/x dx < ∞`, i.e. `E log⁻|A| < ∞`.
    pub satisfies_a2: bool,
    pub satisfies_a1_star: bool,
    pub satisfies_a2_star: bool,
    /// `sup_z E[(log⁻|A_0 - z|)^t] < ∞` for some `t > 1`.
    pub satisfies_concentration: bool,
    pub finite_t_moment: Option<f64>,
    pub threshold_n: u32,
}

impl DistributionSpec {
    pub fn new(kind: DistributionKind) -> Self {
        let label = kind.to_string();
        Self { kind, label }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn standard_complex_gaussian() -> Self {
        Self::new(DistributionKind::ComplexGaussian {
            mean: Complex64::new(0.0, 0.0),
            sigma: 1.0,
        })
    }

    pub fn rademacher() -> Self {
        Self::new(DistributionKind::Rademacher)
    }

    pub fn cauchy(scale: f64) -> Self {
        Self::new(DistributionKind::Cauchy { scale })
    }

    pub fn log_cauchy() -> Self {
        Self::new(DistributionKind::LogCauchy)
    }

    pub fn validate(&self) -> Result<(), EnsembleError> {
        use DistributionKind::*;
        let bad = |m: &str| Err(EnsembleError::InvalidDistribution(m.to_string()));
        match &self.kind {
            ComplexGaussian { sigma, mean } => {
                if !(*sigma > 0.0 && sigma.is_finite()) || !mean.is_finite() {
                    return bad("gaussian sigma must be positive and finite");
                }
            }
            RealGaussian { sigma, mean } => {
                if !(*sigma > 0.0 && sigma.is_finite()) || !mean.is_finite() {
                    return bad("gaussian sigma must be positive and finite");
                }
            }
            UniformDisk { radius } if !(*radius > 0.0 && radius.is_finite()) => {
                return bad("disk radius must be positive")
            }
            UniformInterval { lo, hi } if !(lo < hi && lo.is_finite() && hi.is_finite()) => {
                return bad("interval needs lo < hi")
            }
            Cauchy { scale } if !(*scale > 0.0 && scale.is_finite()) => {
                return bad("cauchy scale must be positive")
            }
            Constant(c) if !c.is_finite() => return bad("constant must be finite"),
            SharedValue(inner) => {
                if matches!(inner.kind, SharedValue(_)) {
                    return bad("nested shared values");
                }
                inner.validate()?;
            }
            _ => {}
        }
        Ok(())
    }

    /// Draws one value.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Complex64 {
        use DistributionKind::*;
        match &self.kind {
            ComplexGaussian { mean, sigma } => {
                let s = sigma * std::f64::consts::FRAC_1_SQRT_2;
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                mean + Complex64::new(s * re, s * im)
            }
            RealGaussian { mean, sigma } => {
                let x: f64 = rng.sample(StandardNormal);
                Complex64::new(mean + sigma * x, 0.0)
            }
            Rademacher => Complex64::new(if rng.gen::<bool>() { 1.0 } else { -1.0 }, 0.0),
            UniformDisk { radius } => {
                let r = radius * rng.gen::<f64>().sqrt();
                let th = 2.0 * PI * rng.gen::<f64>();
                Complex64::from_polar(r, th)
            }
            UniformInterval { lo, hi } => Complex64::new(lo + (hi - lo) * rng.gen::<f64>(), 0.0),
            Cauchy { scale } => {
                let c = rand_distr::Cauchy::new(0.0, *scale).expect("validated scale");
                Complex64::new(c.sample(rng), 0.0)
            }
            LogCauchy => {
                let c = rand_distr::Cauchy::new(0.0, 1.0).expect("unit scale");
                let x: f64 = c.sample(rng);
                Complex64::new(x.exp(), 0.0)
            }
            SharedValue(inner) => inner.sample(rng),
            Constant(c) => *c,
        }
    }

    /// CDF of `|A|` where a closed form exists.
    pub fn abs_cdf(&self, x: f64) -> Option<f64> {
        use DistributionKind::*;
        if x < 0.0 {
            return Some(0.0);
        }
        match &self.kind {
            ComplexGaussian { mean, sigma } if mean.norm() == 0.0 => {
                Some(1.0 - (-(x * x) / (sigma * sigma)).exp())
            }
            RealGaussian { mean, sigma } if *mean == 0.0 => {
                Some(statrs::function::erf::erf(x / (sigma * std::f64::consts::SQRT_2)))
            }
            Rademacher => Some(if x < 1.0 { 0.0 } else { 1.0 }),
            UniformDisk { radius } => Some((x / radius).powi(2).min(1.0)),
            UniformInterval { lo, hi } => {
                let a = lo.max(-x);
                let b = hi.min(x);
                Some(((b - a).max(0.0) / (hi - lo)).min(1.0))
            }
            Cauchy { scale } => Some(2.0 / PI * (x / scale).atan()),
            LogCauchy => Some(if x == 0.0 { 0.0 } else { 0.5 + x.ln().atan() / PI }),
            SharedValue(inner) => inner.abs_cdf(x),
            Constant(c) => Some(if x < c.norm() { 0.0 } else { 1.0 }),
            _ => None,
        }
    }

    /// Declared assumption flags.
    pub fn envelope(&self) -> AssumptionEnvelope {
        use DistributionKind::*;
        let regular = |t: f64, concentration: bool| AssumptionEnvelope {
            satisfies_a1: true,
            satisfies_a2: true,
            satisfies_a1_star: true,
            satisfies_a2_star: true,
            satisfies_concentration: concentration,
            finite_t_moment: Some(t),
            threshold_n: 1,
        };
        match &self.kind {
            ComplexGaussian { .. } | RealGaussian { .. } | UniformDisk { .. } => regular(1.0, true),
            UniformInterval { .. } => regular(1.0, true),
            // point masses at ±1 rule out the concentration condition
            Rademacher => regular(1.0, false),
            Cauchy { .. } => regular(0.5, true),
            LogCauchy => AssumptionEnvelope {
                satisfies_a1: false,
                satisfies_a2: false,
                satisfies_a1_star: false,
                satisfies_a2_star: false,
                satisfies_concentration: true,
                finite_t_moment: None,
                threshold_n: 1,
            },
            Constant(c) => AssumptionEnvelope {
                satisfies_a2: c.norm() > 0.0,
                satisfies_a2_star: c.norm() > 0.0,
                ..regular(1.0, false)
            },
            SharedValue(inner) => {
                let e = inner.envelope();
                AssumptionEnvelope {
                    satisfies_a1_star: false,
                    satisfies_a2_star: false,
                    satisfies_concentration: false,
                    ..e
                }
            }
        }
    }

    /// Whether `E|A|^t` is finite (declared, not estimated).
    pub fn has_abs_moment(&self, t: f64) -> bool {
        use DistributionKind::*;
        match &self.kind {
            Cauchy { .. } => t < 1.0,
            LogCauchy => false,
            SharedValue(inner) => inner.has_abs_moment(t),
            _ => true,
        }
    }

    /// Whether `E[log⁺|A|]` is finite.
    pub fn has_log_plus_moment(&self) -> bool {
        match &self.kind {
            DistributionKind::LogCauchy => false,
            DistributionKind::SharedValue(inner) => inner.has_log_plus_moment(),
            _ => true,
        }
    }

    /// Closed-form `E|A|^t` for mean-zero laws, used as bound inputs.
    pub fn closed_form_abs_moment(&self, t: f64) -> Option<f64> {
        use statrs::function::gamma::gamma;
        use DistributionKind::*;
        match &self.kind {
            ComplexGaussian { mean, sigma } if mean.norm() == 0.0 => {
                Some(sigma.powf(t) * gamma(1.0 + t / 2.0))
            }
            RealGaussian { mean, sigma } if *mean == 0.0 => {
                Some(sigma.powf(t) * 2f64.powf(t / 2.0) * gamma((t + 1.0) / 2.0) / PI.sqrt())
            }
            Rademacher => Some(1.0),
            Constant(c) => Some(c.norm().powf(t)),
            UniformDisk { radius } => Some(2.0 * radius.powf(t) / (t + 2.0)),
            Cauchy { scale } if t < 1.0 => Some(scale.powf(t) / (PI * t / 2.0).cos()),
            SharedValue(inner) => inner.closed_form_abs_moment(t),
            _ => None,
        }
    }

    /// Closed-form `E log|A|`.
    pub fn closed_form_log_moment(&self) -> Option<f64> {
        use DistributionKind::*;
        match &self.kind {
            ComplexGaussian { mean, sigma } if mean.norm() == 0.0 => {
                Some(sigma.ln() - EULER_GAMMA / 2.0)
            }
            RealGaussian { mean, sigma } if *mean == 0.0 => {
                Some(sigma.ln() - (EULER_GAMMA + 2f64.ln()) / 2.0)
            }
            Rademacher => Some(0.0),
            Constant(c) => Some(c.norm().ln()),
            UniformDisk { radius } => Some(radius.ln() - 0.5),
            Cauchy { scale } => Some(scale.ln()),
            SharedValue(inner) => inner.closed_form_log_moment(),
            _ => None,
        }
    }
}

fn fmt_c(z: Complex64) -> String {
    format!("{}, {}", z.re, z.im)
}

impl fmt::Display for DistributionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use DistributionKind::*;
        match self {
            ComplexGaussian { mean, sigma } => write!(f, "complex-gaussian({}, {sigma})", fmt_c(*mean)),
            RealGaussian { mean, sigma } => write!(f, "real-gaussian({mean}, {sigma})"),
            Rademacher => write!(f, "rademacher"),
            UniformDisk { radius } => write!(f, "uniform-disk({radius})"),
            UniformInterval { lo, hi } => write!(f, "uniform-interval({lo}, {hi})"),
            Cauchy { scale } => write!(f, "cauchy({scale})"),
            LogCauchy => write!(f, "log-cauchy"),
            SharedValue(inner) => write!(f, "shared({})", inner.kind),
            Constant(c) => write!(f, "constant({})", fmt_c(*c)),
        }
    }
}

impl fmt::Display for DistributionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.kind.fmt(f)
    }
}

impl FromStr for DistributionSpec {
    type Err = EnsembleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        use DistributionKind::*;
        let err = |m: String| EnsembleError::InvalidDistribution(m);
        let (name, args) = parse_call(s).map_err(err)?;
        let kind = match name.as_str() {
            "complex-gaussian" => match args.len() {
                0 => ComplexGaussian {
                    mean: Complex64::new(0.0, 0.0),
                    sigma: 1.0,
                },
                _ => {
                    let v = real_args(&name, &args, 3).map_err(err)?;
                    ComplexGaussian {
                        mean: Complex64::new(v[0], v[1]),
                        sigma: v[2],
                    }
                }
            },
            "real-gaussian" => {
                let v = real_args(&name, &args, 2).map_err(err)?;
                RealGaussian {
                    mean: v[0],
                    sigma: v[1],
                }
            }
            "rademacher" => Rademacher,
            "uniform-disk" => UniformDisk {
                radius: real_args(&name, &args, 1).map_err(err)?[0],
            },
            "uniform-interval" => {
                let v = real_args(&name, &args, 2).map_err(err)?;
                UniformInterval { lo: v[0], hi: v[1] }
            }
            "cauchy" => Cauchy {
                scale: if args.is_empty() {
                    1.0
                } else {
                    real_args(&name, &args, 1).map_err(err)?[0]
                },
            },
            "log-cauchy" => LogCauchy,
            "constant" => match args.len() {
                1 => Constant(Complex64::new(real_args(&name, &args, 1).map_err(err)?[0], 0.0)),
                _ => {
                    let v = real_args(&name, &args, 2).map_err(err)?;
                    Constant(Complex64::new(v[0], v[1]))
                }
            },
            "shared" => {
                if args.len() != 1 {
                    return Err(err("`shared` takes one distribution".into()));
                }
                SharedValue(Box::new(args[0].parse()?))
            }
            other => return Err(err(format!("unknown distribution `{other}`"))),
        };
        let spec = DistributionSpec::new(kind);
        spec.validate()?;
        Ok(spec)
    }
}

/// How a coefficient vector is drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EnsembleMode {
    /// `A_k` independent with one law; `A_0..A_n` are partial sums of one series.
    IidSequence(DistributionSpec),
    /// `A_k` independent with law `specs[k]`, or `tail` past the list.
    PerIndexSequence {
        specs: Vec<DistributionSpec>,
        tail: DistributionSpec,
    },
    /// Fresh independent row `A_{0,n}..A_{n,n}` for every degree.
    TriangularArray(DistributionSpec),
    /// `A_k = ξ` for all `k`.
    SharedIdentical(DistributionSpec),
    /// Independent real mean-zero Gaussians with variance `exp(-k^α)`.
    VarianceDecay { alpha: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientEnsemble {
    pub mode: EnsembleMode,
    pub envelope: AssumptionEnvelope,
    pub label: String,
}

impl CoefficientEnsemble {
    pub fn new(mode: EnsembleMode) -> Result<Self, EnsembleError> {
        let envelope = match &mode {
            EnsembleMode::IidSequence(s) | EnsembleMode::TriangularArray(s) => {
                s.validate()?;
                s.envelope()
            }
            EnsembleMode::PerIndexSequence { specs, tail } => {
                tail.validate()?;
                let mut env = tail.envelope();
                for s in specs {
                    s.validate()?;
                    let e = s.envelope();
                    env.satisfies_a1 &= e.satisfies_a1;
                    env.satisfies_a2 &= e.satisfies_a2;
                    env.satisfies_a1_star &= e.satisfies_a1_star;
                    env.satisfies_a2_star &= e.satisfies_a2_star;
                    env.finite_t_moment = match (env.finite_t_moment, e.finite_t_moment) {
                        (Some(a), Some(b)) => Some(a.min(b)),
                        _ => None,
                    };
                }
                env.satisfies_concentration = specs
                    .first()
                    .map_or(tail.envelope().satisfies_concentration, |s| {
                        s.envelope().satisfies_concentration
                    });
                env
            }
            EnsembleMode::SharedIdentical(s) => {
                s.validate()?;
                DistributionSpec::new(DistributionKind::SharedValue(Box::new(s.clone()))).envelope()
            }
            EnsembleMode::VarianceDecay { alpha } => {
                if !(*alpha > 0.0 && alpha.is_finite()) {
                    return Err(EnsembleError::InvalidEnsemble("alpha must be positive".into()));
                }
                // tails dominated by the k = 0 law; no uniform small-ball bound
                AssumptionEnvelope {
                    satisfies_a1: true,
                    satisfies_a2: false,
                    satisfies_a1_star: true,
                    satisfies_a2_star: false,
                    satisfies_concentration: true,
                    finite_t_moment: Some(1.0),
                    threshold_n: 1,
                }
            }
        };
        let label = mode.describe();
        Ok(Self {
            mode,
            envelope,
            label,
        })
    }

    pub fn iid(spec: DistributionSpec) -> Result<Self, EnsembleError> {
        Self::new(EnsembleMode::IidSequence(spec))
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Marginal law of `A_k` in a degree-`n` draw (`None` for variance decay).
    pub fn marginal(&self, k: usize) -> Option<&DistributionSpec> {
        match &self.mode {
            EnsembleMode::IidSequence(s)
            | EnsembleMode::TriangularArray(s)
            | EnsembleMode::SharedIdentical(s) => Some(s),
            EnsembleMode::PerIndexSequence { specs, tail } => Some(specs.get(k).unwrap_or(tail)),
            EnsembleMode::VarianceDecay { .. } => None,
        }
    }

    /// Standard deviation of `A_k` in variance-decay mode: `exp(-k^α / 2)`.
    pub fn decay_sigma(alpha: f64, k: usize) -> f64 {
        (-(k as f64).powf(alpha) / 2.0).exp()
    }

    /// Serializes to the flat `key = value` block read by [`Self::from_kv`].
    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        match &self.mode {
            EnsembleMode::IidSequence(s) => {
                out.push_str("mode = iid\n");
                out.push_str(&format!("distribution = {s}\n"));
            }
            EnsembleMode::TriangularArray(s) => {
                out.push_str("mode = triangular\n");
                out.push_str(&format!("distribution = {s}\n"));
            }
            EnsembleMode::SharedIdentical(s) => {
                out.push_str("mode = shared\n");
                out.push_str(&format!("distribution = {s}\n"));
            }
            EnsembleMode::PerIndexSequence { specs, tail } => {
                out.push_str("mode = per-index\n");
                for s in specs {
                    out.push_str(&format!("index = {s}\n"));
                }
                out.push_str(&format!("distribution = {tail}\n"));
            }
            EnsembleMode::VarianceDecay { alpha } => {
                out.push_str("mode = variance-decay\n");
                out.push_str(&format!("alpha = {alpha}\n"));
            }
        }
        out.push_str(&format!("label = {}\n", self.label));
        out
    }

    /// Reads the `[section]` block of a parsed document (use `""` for a bare block).
    pub fn from_kv(doc: &KvDocument, section: &str) -> Result<Self, crate::config::ConfigError> {
        use crate::config::ConfigError;
        if let Some(preset) = doc.get(section, "preset") {
            let ens = preset_ensemble(&preset.value).ok_or_else(|| ConfigError::Value {
                line: preset.line,
                key: "preset".into(),
                message: format!("unknown preset `{}`", preset.value),
            })?;
            return Ok(ens);
        }
        let mode_entry = doc.require(section, "mode")?;
        let value_err = |e: &crate::config::Entry, m: String| ConfigError::Value {
            line: e.line,
            key: e.key.clone(),
            message: m,
        };
        let dist = |key: &str| -> Result<DistributionSpec, ConfigError> {
            let e = doc.require(section, key)?;
            e.value.parse().map_err(|x: EnsembleError| value_err(e, x.to_string()))
        };
        let mode = match mode_entry.value.as_str() {
            "iid" => EnsembleMode::IidSequence(dist("distribution")?),
            "triangular" => EnsembleMode::TriangularArray(dist("distribution")?),
            "shared" => EnsembleMode::SharedIdentical(dist("distribution")?),
            "per-index" => {
                let mut specs = Vec::new();
                for e in doc.get_all(section, "index") {
                    specs.push(e.value.parse().map_err(|x: EnsembleError| value_err(e, x.to_string()))?);
                }
                EnsembleMode::PerIndexSequence {
                    specs,
                    tail: dist("distribution")?,
                }
            }
            "variance-decay" => EnsembleMode::VarianceDecay {
                alpha: doc.parse_req(section, "alpha")?,
            },
            other => return Err(value_err(mode_entry, format!("unknown mode `{other}`"))),
        };
        let mut ens = Self::new(mode).map_err(|e| value_err(mode_entry, e.to_string()))?;
        if let Some(l) = doc.get(section, "label") {
            ens.label = l.value.clone();
        }
        Ok(ens)
    }
}

impl EnsembleMode {
    fn describe(&self) -> String {
        match self {
            EnsembleMode::IidSequence(s) => format!("iid {s}"),
            EnsembleMode::TriangularArray(s) => format!("triangular {s}"),
            EnsembleMode::SharedIdentical(s) => format!("shared {s}"),
            EnsembleMode::PerIndexSequence { specs, tail } => {
                format!("per-index ({} explicit, tail {tail})", specs.len())
            }
            EnsembleMode::VarianceDecay { alpha } => format!("variance-decay alpha={alpha}"),
        }
    }
}

/// Named ensembles used by the CLI and the acceptance runs.
pub fn preset_ensemble(name: &str) -> Option<CoefficientEnsemble> {
    let ens = match name {
        "gaussian-kac" => CoefficientEnsemble::iid(DistributionSpec::standard_complex_gaussian()),
        "rademacher-kac" => CoefficientEnsemble::iid(DistributionSpec::rademacher()),
        "cauchy-kac" => CoefficientEnsemble::iid(DistributionSpec::cauchy(1.0)),
        "log-cauchy-kac" => CoefficientEnsemble::iid(DistributionSpec::log_cauchy()),
        "shared-xi" => CoefficientEnsemble::new(EnsembleMode::SharedIdentical(
            DistributionSpec::standard_complex_gaussian(),
        )),
        "variance-decay" => CoefficientEnsemble::new(EnsembleMode::VarianceDecay { alpha: 3.0 }),
        _ => return None,
    };
    Some(ens.expect("presets are valid").with_label(name))
}

pub const PRESET_NAMES: &[&str] = &[
    "gaussian-kac",
    "rademacher-kac",
    "cauchy-kac",
    "log-cauchy-kac",
    "shared-xi",
    "variance-decay",
];

/// Draws `A_0..A_n`.
pub fn sample_coefficients(
    ensemble: &CoefficientEnsemble,
    n: usize,
    seed: u64,
) -> Result<Vec<Complex64>, EnsembleError> {
    if n == 0 {
        return Err(EnsembleError::ZeroDegree);
    }
    let shared = |spec: &DistributionSpec| {
        let mut rng = seed::stream(seed, &[tag::SHARED]);
        vec![spec.sample(&mut rng); n + 1]
    };
    fn per_index<'a>(
        n: usize,
        seed: u64,
        spec_of: &dyn Fn(usize) -> &'a DistributionSpec,
        coords: &dyn Fn(usize) -> Vec<u64>,
    ) -> Vec<Complex64> {
        (0..=n)
            .map(|k| {
                let spec = spec_of(k);
                if let DistributionKind::SharedValue(inner) = &spec.kind {
                    let mut rng = seed::stream(seed, &[tag::SHARED]);
                    return inner.sample(&mut rng);
                }
                let mut rng = seed::stream(seed, &coords(k));
                spec.sample(&mut rng)
            })
            .collect()
    }
    let seq_coords = |k: usize| vec![tag::COEFFICIENT, k as u64];
    let out = match &ensemble.mode {
        EnsembleMode::SharedIdentical(spec) => shared(spec),
        EnsembleMode::IidSequence(spec) => per_index(n, seed, &|_| spec, &seq_coords),
        EnsembleMode::PerIndexSequence { specs, tail } => {
            per_index(n, seed, &|k| specs.get(k).unwrap_or(tail), &seq_coords)
        }
        EnsembleMode::TriangularArray(spec) => per_index(n, seed, &|_| spec, &|k| {
            vec![tag::TRIANGULAR, n as u64, k as u64]
        }),
        EnsembleMode::VarianceDecay { alpha } => (0..=n)
            .map(|k| {
                let mut rng = seed::stream(seed, &seq_coords(k));
                let x: f64 = rng.sample(StandardNormal);
                Complex64::new(CoefficientEnsemble::decay_sigma(*alpha, k) * x, 0.0)
            })
            .collect(),
    };
    Ok(out)
}

/// Functional whose expectation [`empirical_moment`] estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MomentKind {
    AbsPower(f64),
    LogAbs,
    LogPlus,
    LogMinus,
    /// `(log⁻|A - z|)^t`
    ShiftedLogMinusPower { z: Complex64, t: f64 },
}

impl MomentKind {
    pub fn apply(&self, a: Complex64) -> f64 {
        match *self {
            MomentKind::AbsPower(t) => a.norm().powf(t),
            MomentKind::LogAbs => a.norm().ln(),
            MomentKind::LogPlus => a.norm().ln().max(0.0),
            MomentKind::LogMinus => (-a.norm().ln()).max(0.0),
            MomentKind::ShiftedLogMinusPower { z, t } => (-(a - z).norm().ln()).max(0.0).powf(t),
        }
    }
}

/// Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub estimate: f64,
    pub std_error: f64,
}

impl MomentEstimate {
    pub fn exact(value: f64) -> Self {
        Self {
            estimate: value,
            std_error: 0.0,
        }
    }

    /// Mean and standard error of a sample (Welford).
    pub fn from_samples(samples: impl IntoIterator<Item = f64>) -> Self {
        let mut count = 0usize;
        let mut mean = 0.0;
        let mut m2 = 0.0;
        for x in samples {
            count += 1;
            let d = x - mean;
            mean += d / count as f64;
            m2 += d * (x - mean);
        }
        let var = if count > 1 { m2 / (count - 1) as f64 } else { 0.0 };
        Self {
            estimate: mean,
            std_error: (var / count.max(1) as f64).sqrt(),
        }
    }
}

/// Estimates `E[kind(A)]` for `A ~ spec` from `trials` draws.
///
/// Heavy tails are not truncated: the standard error is whatever the sample
/// says, which for infinite-variance functionals is noisy by nature.
pub fn empirical_moment(spec: &DistributionSpec, kind: MomentKind, trials: usize, seed: u64) -> MomentEstimate {
    let law = match &spec.kind {
        DistributionKind::SharedValue(inner) => inner.as_ref(),
        _ => spec,
    };
    let mut rng = seed::stream(seed, &[tag::MOMENT]);
    MomentEstimate::from_samples((0..trials).map(|_| kind.apply(law.sample(&mut rng))))
}

/// Estimates `E[log Σ_k |A_k|]` for degree-`n` draws of the ensemble.
pub fn empirical_log_abs_sum(
    ensemble: &CoefficientEnsemble,
    n: usize,
    trials: usize,
    seed: u64,
) -> Result<MomentEstimate, EnsembleError> {
    let mut samples = Vec::with_capacity(trials);
    for i in 0..trials {
        let c = sample_coefficients(ensemble, n, seed::derive(seed, &[tag::MOMENT, i as u64]))?;
        samples.push(c.iter().map(|a| a.norm()).sum::<f64>().ln());
    }
    Ok(MomentEstimate::from_samples(samples))
}

/// `n`-th root statistics of a coefficient vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NthRootStats {
    /// `|A_n|^{1/n}`
    pub last: f64,
    /// `|A_0|^{1/n}`
    pub first: f64,
    /// `(max_k |A_k|)^{1/n}`
    pub max: f64,
}

/// `(max_k |A_k|)^{1/n}`, computed through logarithms.
pub fn max_root_statistic(coeffs: &[Complex64]) -> f64 {
    let n = coeffs.len().saturating_sub(1).max(1) as f64;
    let m = coeffs.iter().map(|a| a.norm()).fold(0.0, f64::max);
    (m.ln() / n).exp()
}

pub fn nth_root_statistics(coeffs: &[Complex64]) -> Result<NthRootStats, EnsembleError> {
    if coeffs.len() < 2 {
        return Err(EnsembleError::ZeroDegree);
    }
    let n = (coeffs.len() - 1) as f64;
    let last = coeffs[coeffs.len() - 1].norm();
    if last == 0.0 {
        return Err(EnsembleError::DegenerateLeading);
    }
    let root = |x: f64| (x.ln() / n).exp();
    Ok(NthRootStats {
        last: root(last),
        first: root(coeffs[0].norm()),
        max: max_root_statistic(coeffs),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn shared_value_is_constant() {
        let xi = DistributionSpec::new(DistributionKind::Constant(c(1.0)));
        let ens = CoefficientEnsemble::new(EnsembleMode::SharedIdentical(xi)).unwrap();
        for seed in 0..5 {
            assert_eq!(sample_coefficients(&ens, 5, seed).unwrap(), vec![c(1.0); 6]);
        }
        let g = CoefficientEnsemble::new(EnsembleMode::SharedIdentical(
            DistributionSpec::standard_complex_gaussian(),
        ))
        .unwrap();
        let a = sample_coefficients(&g, 40, 9).unwrap();
        assert!(a.iter().all(|&x| x == a[0]));
    }

    #[test]
    fn rademacher_support() {
        let ens = preset_ensemble("rademacher-kac").unwrap();
        for seed in 0..50 {
            for a in sample_coefficients(&ens, 3, seed).unwrap() {
                assert!(a == c(1.0) || a == c(-1.0));
            }
        }
    }

    #[test]
    fn zero_degree_is_rejected() {
        let ens = preset_ensemble("gaussian-kac").unwrap();
        assert_eq!(sample_coefficients(&ens, 0, 1), Err(EnsembleError::ZeroDegree));
    }

    #[test]
    fn variance_decay_collapses() {
        let ens = CoefficientEnsemble::new(EnsembleMode::VarianceDecay { alpha: 3.0 }).unwrap();
        assert!((CoefficientEnsemble::decay_sigma(3.0, 4) - (-32f64).exp()).abs() < 1e-28);
        let mut hits = 0;
        for seed in 0..100 {
            let a = sample_coefficients(&ens, 10, seed).unwrap();
            if a[4].norm() / a[0].norm() < 1e-12 {
                hits += 1;
            }
            assert!(a.iter().all(|x| x.im == 0.0));
        }
        assert!(hits >= 97, "{hits}");
    }

    #[test]
    fn iid_sequence_is_a_series() {
        let ens = preset_ensemble("gaussian-kac").unwrap();
        let a = sample_coefficients(&ens, 10, 3).unwrap();
        let b = sample_coefficients(&ens, 20, 3).unwrap();
        assert_eq!(&a[..], &b[..11]);
        let tri = CoefficientEnsemble::new(EnsembleMode::TriangularArray(
            DistributionSpec::standard_complex_gaussian(),
        ))
        .unwrap();
        let a = sample_coefficients(&tri, 10, 3).unwrap();
        let b = sample_coefficients(&tri, 20, 3).unwrap();
        assert_ne!(a[0], b[0]);
    }

    #[test]
    fn per_index_laws() {
        let ens = CoefficientEnsemble::new(EnsembleMode::PerIndexSequence {
            specs: vec![DistributionSpec::rademacher(), DistributionSpec::rademacher()],
            tail: DistributionSpec::new(DistributionKind::UniformInterval { lo: 5.0, hi: 6.0 }),
        })
        .unwrap();
        let a = sample_coefficients(&ens, 6, 1).unwrap();
        assert!(a[0].re.abs() == 1.0 && a[1].re.abs() == 1.0);
        assert!(a[2..].iter().all(|x| (5.0..6.0).contains(&x.re)));
        assert!(!ens.envelope.satisfies_concentration);
    }

    #[test]
    fn heavy_tail_flags() {
        let cauchy = DistributionSpec::cauchy(1.0);
        assert!(!cauchy.has_abs_moment(1.0));
        assert!(cauchy.has_abs_moment(0.5));
        assert_eq!(cauchy.envelope().finite_t_moment, Some(0.5));
        let lc = DistributionSpec::log_cauchy();
        assert!(!lc.has_log_plus_moment());
        assert!(!lc.envelope().satisfies_a1);
        assert_eq!(lc.envelope().finite_t_moment, None);
    }

    #[test]
    fn rademacher_log_moment_is_zero() {
        let m = empirical_moment(&DistributionSpec::rademacher(), MomentKind::LogAbs, 1000, 4);
        assert_eq!(m.estimate, 0.0);
        assert_eq!(m.std_error, 0.0);
    }

    #[test]
    fn nth_root_examples() {
        let s = nth_root_statistics(&[c(1.0); 4]).unwrap();
        assert_eq!((s.last, s.first, s.max), (1.0, 1.0, 1.0));
        let s = nth_root_statistics(&[c(0.5), c(0.0), c(0.0), c(2.0)]).unwrap();
        let cube = 2f64.powf(1.0 / 3.0);
        assert!((s.last - cube).abs() < 1e-14);
        assert!((s.max - cube).abs() < 1e-14);
        assert!((s.first - 0.5f64.powf(1.0 / 3.0)).abs() < 1e-14);
        assert_eq!(
            nth_root_statistics(&[c(1.0), c(0.0)]),
            Err(EnsembleError::DegenerateLeading)
        );
    }

    #[test]
    fn abs_cdf_closed_forms() {
        let g = DistributionSpec::standard_complex_gaussian();
        assert!((g.abs_cdf(1.0).unwrap() - (1.0 - (-1f64).exp())).abs() < 1e-15);
        let cauchy = DistributionSpec::cauchy(1.0);
        assert!((cauchy.abs_cdf(1.0).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(DistributionSpec::rademacher().abs_cdf(0.5), Some(0.0));
        let shifted = DistributionSpec::new(DistributionKind::ComplexGaussian {
            mean: Complex64::new(1.0, 0.0),
            sigma: 1.0,
        });
        assert_eq!(shifted.abs_cdf(1.0), None);
    }

    #[test]
    fn kv_roundtrip_of_presets() {
        for name in PRESET_NAMES {
            let ens = preset_ensemble(name).unwrap();
            let doc = KvDocument::parse(&ens.to_kv()).unwrap();
            assert_eq!(CoefficientEnsemble::from_kv(&doc, "").unwrap(), ens);
        }
    }

    #[test]
    fn unknown_distribution_is_rejected() {
        assert!("weibull(2)".parse::<DistributionSpec>().is_err());
        assert!("cauchy(-1)".parse::<DistributionSpec>().is_err());
        assert!("shared(shared(rademacher))".parse::<DistributionSpec>().is_err());
    }
}
