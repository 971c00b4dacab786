//! Polynomial bases `B_k(z) = Σ_{j≤k} b_{j,k} z^j`.
//!
//! Every basis is carried as a Hessenberg recurrence
//!
//! ```text
//! z B_k = Σ_{j=lo_k}^{k+1} h_{j,k} B_j,      h_{k+1,k} > 0,
//! ```
//!
//! which is exact for the closed-form families and is what the Stieltjes
//! orthonormalization produces. Values, derivatives and triangles all come
//! from the recurrence. Evaluation through the recurrence stays accurate at
//! degrees where the monomial expansion of a Chebyshev-type basis is useless,
//! so root finding for non-diagonal bases goes through [`BasisPolynomial`]
//! instead of [`expand_to_monomial`].

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{parse_call, real_args};
use crate::polyroots::{self, ComplexPolynomial, NewtonEval, RootOptions, RootSet, RootTarget, LEADING_GUARD};
use crate::potential::{joukowski, DomainModel};
use crate::quadrature;

/// Maximum tolerated `max |G - I|` for an orthonormalized basis.
pub const GRAM_TOL: f64 = 1e-8;
/// Relative size of the new direction below which orthogonalization stops.
pub const CONDITIONING_FLOOR: f64 = 1e-12;

const RESCALE_ABOVE: f64 = 1e150;
const RESCALE_BY: f64 = 1e-150;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BasisError {
    #[error("invalid basis: {0}")]
    InvalidSpec(String),
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("orthonormalization lost orthogonality at degree {degree}: max |G - I| = {residual:e}")]
    LossOfOrthogonality { degree: usize, residual: f64 },
    #[error("orthonormalization is ill-conditioned at degree {degree} (new direction {ratio:e} of |z q|)")]
    Conditioning { degree: usize, ratio: f64 },
    #[error("basis built to degree {available}, degree {requested} requested")]
    DegreeTooHigh { requested: usize, available: usize },
    #[error("basis {basis} is not defined on {domain}")]
    DomainMismatch { basis: String, domain: String },
    #[error("no coefficients beyond A_0 are nonzero")]
    ZeroDegree,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Support {
    Curve,
    Region,
}

/// Discrete positive measure `Σ w_i δ_{z_i}` standing in for `μ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureSpec {
    pub support: Support,
    pub nodes: Vec<Complex64>,
    pub weights: Vec<f64>,
    /// Set the measure naturally lives on, if any.
    pub domain: Option<DomainModel>,
    /// Canonical text form (parseable for the named constructors).
    pub label: String,
}

impl MeasureSpec {
    /// `w(θ) ds` on the unit circle, trapezoid rule with `m` nodes.
    pub fn circle_arclength(m: usize, weight: impl Fn(f64) -> f64, label: &str) -> Self {
        let thetas = quadrature::trapezoid_angles(m);
        let h = 2.0 * PI / m as f64;
        Self {
            support: Support::Curve,
            nodes: thetas.iter().map(|&t| Complex64::from_polar(1.0, t)).collect(),
            weights: thetas.iter().map(|&t| h * weight(t)).collect(),
            domain: Some(DomainModel::UnitCircle),
            label: label.to_string(),
        }
    }

    /// `dθ/2π` on the unit circle.
    pub fn circle(m: usize) -> Self {
        Self::circle_arclength(m, |_| 1.0 / (2.0 * PI), &format!("circle({m})"))
    }

    /// Arcsine probability measure on `[a, b]`, Gauss–Chebyshev nodes.
    pub fn arcsine(a: f64, b: f64, m: usize) -> Self {
        let (x, w) = quadrature::gauss_chebyshev(m);
        let (c, hw) = ((a + b) / 2.0, (b - a) / 2.0);
        Self {
            support: Support::Curve,
            nodes: x.iter().map(|&t| Complex64::new(c + hw * t, 0.0)).collect(),
            weights: w,
            domain: Some(DomainModel::Interval { a, b }),
            label: format!("arcsine({a}, {b}, {m})"),
        }
    }

    /// `w(x) dx` on `[a, b]`, Gauss–Legendre nodes.
    pub fn interval_weighted(a: f64, b: f64, m: usize, weight: impl Fn(f64) -> f64, label: &str) -> Self {
        let (x, w) = quadrature::gauss_legendre(m);
        let (c, hw) = ((a + b) / 2.0, (b - a) / 2.0);
        let pts: Vec<f64> = x.iter().map(|&t| c + hw * t).collect();
        Self {
            support: Support::Curve,
            nodes: pts.iter().map(|&t| Complex64::new(t, 0.0)).collect(),
            weights: pts.iter().zip(&w).map(|(&t, &wi)| hw * wi * weight(t)).collect(),
            domain: Some(DomainModel::Interval { a, b }),
            label: label.to_string(),
        }
    }

    /// Lebesgue `dx` on `[a, b]`.
    pub fn legendre(a: f64, b: f64, m: usize) -> Self {
        Self::interval_weighted(a, b, m, |_| 1.0, &format!("legendre({a}, {b}, {m})"))
    }

    /// Area measure on the unit disk: Gauss–Legendre in `r` (with the `r dr`
    /// Jacobian) times the trapezoid rule in `θ`.
    pub fn disk_area(m_r: usize, m_theta: usize) -> Self {
        let (x, w) = quadrature::gauss_legendre(m_r);
        let thetas = quadrature::trapezoid_angles(m_theta);
        let h = 2.0 * PI / m_theta as f64;
        let mut nodes = Vec::with_capacity(m_r * m_theta);
        let mut weights = Vec::with_capacity(m_r * m_theta);
        for (&t, &wt) in x.iter().zip(&w) {
            let r = 0.5 * (t + 1.0);
            for &th in &thetas {
                nodes.push(Complex64::from_polar(r, th));
                weights.push(0.5 * wt * r * h);
            }
        }
        Self {
            support: Support::Region,
            nodes,
            weights,
            domain: Some(DomainModel::ClosedUnitDisk),
            label: format!("disk-area({m_r}, {m_theta})"),
        }
    }

    pub fn from_quadrature(
        support: Support,
        nodes: Vec<Complex64>,
        weights: Vec<f64>,
        label: &str,
    ) -> Result<Self, BasisError> {
        let m = Self {
            support,
            nodes,
            weights,
            domain: None,
            label: label.to_string(),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), BasisError> {
        let bad = |s: String| Err(BasisError::InvalidMeasure(s));
        if self.nodes.len() != self.weights.len() {
            return bad(format!("{} nodes but {} weights", self.nodes.len(), self.weights.len()));
        }
        if self.nodes.is_empty() {
            return bad("no nodes".into());
        }
        if let Some(i) = self.weights.iter().position(|w| !(*w > 0.0 && w.is_finite())) {
            return bad(format!("weight {i} is not positive"));
        }
        if let Some(i) = self.nodes.iter().position(|z| !z.is_finite()) {
            return bad(format!("node {i} is not finite"));
        }
        Ok(())
    }

    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `Σ w_i f(z_i) conj(g(z_i))`.
    pub fn inner(&self, f: &[Complex64], g: &[Complex64]) -> Complex64 {
        self.weights
            .iter()
            .zip(f.iter().zip(g))
            .map(|(&w, (a, b))| a * b.conj() * w)
            .sum()
    }
}

impl fmt::Display for MeasureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label)
    }
}

impl FromStr for MeasureSpec {
    type Err = BasisError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = BasisError::InvalidMeasure;
        let (name, args) = parse_call(s).map_err(err)?;
        let count = |x: f64| -> Result<usize, BasisError> {
            if x >= 1.0 && x.fract() == 0.0 && x < 1e7 {
                Ok(x as usize)
            } else {
                Err(err(format!("node count must be a positive integer, got {x}")))
            }
        };
        let m = match name.as_str() {
            "circle" => Self::circle(count(real_args(&name, &args, 1).map_err(err)?[0])?),
            "arcsine" => {
                let v = real_args(&name, &args, 3).map_err(err)?;
                check_interval(v[0], v[1]).map_err(|e| err(e.to_string()))?;
                Self::arcsine(v[0], v[1], count(v[2])?)
            }
            "legendre" => {
                let v = real_args(&name, &args, 3).map_err(err)?;
                check_interval(v[0], v[1]).map_err(|e| err(e.to_string()))?;
                Self::legendre(v[0], v[1], count(v[2])?)
            }
            "disk-area" => {
                let v = real_args(&name, &args, 2).map_err(err)?;
                Self::disk_area(count(v[0])?, count(v[1])?)
            }
            other => return Err(err(format!("unknown measure `{other}`"))),
        };
        m.validate()?;
        Ok(m)
    }
}

fn check_interval(a: f64, b: f64) -> Result<(), BasisError> {
    if a < b && a.is_finite() && b.is_finite() {
        Ok(())
    } else {
        Err(BasisError::InvalidSpec(format!("interval needs a < b, got ({a}, {b})")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BasisKind {
    Monomial,
    /// Orthonormal for arclength on the unit circle.
    SzegoCircle,
    /// Orthonormal for area on the unit disk.
    BergmanDisk,
    /// Orthonormal for the arcsine probability measure on `[a, b]`.
    ChebyshevOrthonormal { a: f64, b: f64 },
    FaberInterval { a: f64, b: f64 },
    FaberDisk,
    FaberEllipse { r: f64 },
    GramSchmidt(MeasureSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisSpec {
    pub kind: BasisKind,
    pub max_degree: usize,
}

impl BasisSpec {
    pub fn new(kind: BasisKind, max_degree: usize) -> Self {
        Self { kind, max_degree }
    }

    pub fn validate(&self) -> Result<(), BasisError> {
        match &self.kind {
            BasisKind::ChebyshevOrthonormal { a, b } | BasisKind::FaberInterval { a, b } => check_interval(*a, *b),
            BasisKind::FaberEllipse { r } if !(*r > 1.0 && r.is_finite()) => {
                Err(BasisError::InvalidSpec(format!("faber-ellipse needs R > 1, got {r}")))
            }
            BasisKind::GramSchmidt(m) => m.validate(),
            _ => Ok(()),
        }
    }

    /// Domains on which this basis is regular.
    pub fn accepts_domain(&self, domain: &DomainModel) -> bool {
        use BasisKind::*;
        match (&self.kind, domain) {
            (Monomial | SzegoCircle | BergmanDisk | FaberDisk, DomainModel::UnitCircle | DomainModel::ClosedUnitDisk) => true,
            (ChebyshevOrthonormal { a, b } | FaberInterval { a, b }, DomainModel::Interval { a: da, b: db }) => {
                a == da && b == db
            }
            (FaberEllipse { r }, DomainModel::Ellipse { r: dr }) => r == dr,
            (GramSchmidt(m), d) => match (m.domain, d) {
                (Some(DomainModel::UnitCircle | DomainModel::ClosedUnitDisk), DomainModel::UnitCircle | DomainModel::ClosedUnitDisk) => true,
                (Some(md), d) => md == *d,
                (None, _) => true,
            },
            _ => false,
        }
    }

    /// The set the basis is attached to, when it has one.
    pub fn natural_domain(&self) -> Option<DomainModel> {
        use BasisKind::*;
        match &self.kind {
            Monomial | SzegoCircle | FaberDisk => Some(DomainModel::UnitCircle),
            BergmanDisk => Some(DomainModel::ClosedUnitDisk),
            ChebyshevOrthonormal { a, b } | FaberInterval { a, b } => Some(DomainModel::Interval { a: *a, b: *b }),
            FaberEllipse { r } => Some(DomainModel::Ellipse { r: *r }),
            GramSchmidt(m) => m.domain,
        }
    }
}

impl fmt::Display for BasisKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BasisKind::Monomial => write!(f, "monomial"),
            BasisKind::SzegoCircle => write!(f, "szego-circle"),
            BasisKind::BergmanDisk => write!(f, "bergman-disk"),
            BasisKind::ChebyshevOrthonormal { a, b } => write!(f, "chebyshev-orthonormal({a}, {b})"),
            BasisKind::FaberInterval { a, b } => write!(f, "faber-interval({a}, {b})"),
            BasisKind::FaberDisk => write!(f, "faber-disk"),
            BasisKind::FaberEllipse { r } => write!(f, "faber-ellipse({r})"),
            BasisKind::GramSchmidt(m) => write!(f, "gram-schmidt({m})"),
        }
    }
}

impl FromStr for BasisKind {
    type Err = BasisError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = BasisError::InvalidSpec;
        let (name, args) = parse_call(s).map_err(err)?;
        let none = |k: BasisKind| {
            if args.is_empty() {
                Ok(k)
            } else {
                Err(err(format!("`{name}` takes no arguments")))
            }
        };
        let kind = match name.as_str() {
            "monomial" => none(BasisKind::Monomial)?,
            "szego-circle" => none(BasisKind::SzegoCircle)?,
            "bergman-disk" => none(BasisKind::BergmanDisk)?,
            "faber-disk" => none(BasisKind::FaberDisk)?,
            "chebyshev-orthonormal" | "faber-interval" => {
                let (a, b) = if args.is_empty() {
                    (-1.0, 1.0)
                } else {
                    let v = real_args(&name, &args, 2).map_err(err)?;
                    (v[0], v[1])
                };
                if name == "faber-interval" {
                    BasisKind::FaberInterval { a, b }
                } else {
                    BasisKind::ChebyshevOrthonormal { a, b }
                }
            }
            "faber-ellipse" => BasisKind::FaberEllipse {
                r: real_args(&name, &args, 1).map_err(err)?[0],
            },
            "gram-schmidt" => {
                if args.len() != 1 {
                    return Err(err("gram-schmidt takes one measure argument".into()));
                }
                BasisKind::GramSchmidt(args[0].parse()?)
            }
            other => return Err(err(format!("unknown basis `{other}`"))),
        };
        BasisSpec::new(kind.clone(), 0).validate()?;
        Ok(kind)
    }
}

/// Column `k` of the Hessenberg matrix: `z B_k = Σ_{j=lo}^{k+1} coeffs[j-lo] B_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecurrenceColumn {
    pub lo: usize,
    pub coeffs: Vec<Complex64>,
}

impl RecurrenceColumn {
    fn sub(&self) -> f64 {
        self.coeffs.last().expect("nonempty column").re
    }
}

/// Three-term or full Hessenberg recurrence plus `B_0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recurrence {
    pub b00: f64,
    pub columns: Vec<RecurrenceColumn>,
}

impl Recurrence {
    pub fn max_degree(&self) -> usize {
        self.columns.len()
    }

    /// `B_0(z)..B_n(z)` (unscaled; may overflow far from the support).
    pub fn values(&self, z: Complex64, n: usize) -> Vec<Complex64> {
        let mut b = vec![Complex64::new(0.0, 0.0); n + 1];
        b[0] = Complex64::new(self.b00, 0.0);
        for k in 0..n {
            let col = &self.columns[k];
            let mut v = z * b[k];
            for (i, h) in col.coeffs[..col.coeffs.len() - 1].iter().enumerate() {
                v -= h * b[col.lo + i];
            }
            b[k + 1] = v / col.sub();
        }
        b
    }

    /// Scaled sums `(Σ a_k B_k, Σ a_k B_k', Σ |B_k|)` sharing a factor
    /// `RESCALE_BY^{count}`; returns that count as the fourth value.
    fn scaled_sums(&self, a: &[Complex64], z: Complex64) -> (Complex64, Complex64, f64, i32) {
        let n = a.len() - 1;
        let zero = Complex64::new(0.0, 0.0);
        let mut b = vec![zero; n + 1];
        let mut d = vec![zero; n + 1];
        b[0] = Complex64::new(self.b00, 0.0);
        let mut p = a[0] * b[0];
        let mut dp = zero;
        let mut s = b[0].norm();
        let mut rescales = 0;
        for k in 0..n {
            let col = &self.columns[k];
            let mut v = z * b[k];
            let mut dv = b[k] + z * d[k];
            for (i, h) in col.coeffs[..col.coeffs.len() - 1].iter().enumerate() {
                v -= h * b[col.lo + i];
                dv -= h * d[col.lo + i];
            }
            let sub = col.sub();
            b[k + 1] = v / sub;
            d[k + 1] = dv / sub;
            if b[k + 1].norm() > RESCALE_ABOVE || d[k + 1].norm() > RESCALE_ABOVE {
                for x in b[..=k + 1].iter_mut().chain(d[..=k + 1].iter_mut()) {
                    *x *= RESCALE_BY;
                }
                p *= RESCALE_BY;
                dp *= RESCALE_BY;
                s *= RESCALE_BY;
                rescales += 1;
            }
            p += a[k + 1] * b[k + 1];
            dp += a[k + 1] * d[k + 1];
            s += b[k + 1].norm();
        }
        (p, dp, s, rescales)
    }
}

/// Lower-triangular `b_{j,k}` stored by column: `columns[k][j]`, `j ≤ k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisTriangle {
    pub columns: Vec<Vec<Complex64>>,
}

impl BasisTriangle {
    pub fn max_degree(&self) -> usize {
        self.columns.len() - 1
    }

    /// `b_{j,k}`: power `j`, degree `k`; zero above the diagonal.
    pub fn get(&self, j: usize, k: usize) -> Complex64 {
        self.columns[k].get(j).copied().unwrap_or_default()
    }

    pub fn diagonal(&self, k: usize) -> Complex64 {
        self.columns[k][k]
    }

    /// CSV with header `k,j,real,imag`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,j,real,imag\n");
        for (k, col) in self.columns.iter().enumerate() {
            for (j, b) in col.iter().enumerate() {
                out.push_str(&format!("{k},{j},{:e},{:e}\n", b.re, b.im));
            }
        }
        out
    }
}

/// Curve used to seed root iterations: `z = Ψ(ρ e^{iθ})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GuessCurve {
    /// `Ψ(w) = center + radius·w`.
    Circle { center: Complex64, radius: f64 },
    /// `Ψ(w) = center + half_width·J(scale·w)`.
    Joukowski { center: f64, half_width: f64, scale: f64 },
}

impl GuessCurve {
    fn capacity(&self) -> f64 {
        match *self {
            GuessCurve::Circle { radius, .. } => radius,
            GuessCurve::Joukowski { half_width, scale, .. } => half_width * scale / 2.0,
        }
    }

    fn point(&self, rho: f64, theta: f64) -> Complex64 {
        match *self {
            GuessCurve::Circle { center, radius } => center + Complex64::from_polar(radius * rho, theta),
            GuessCurve::Joukowski { center, half_width, scale } => {
                // J(ρ e^{iθ}) traces the same ellipse as J(e^{iθ}/ρ); stay off
                // the real segment so iterates can leave the real line.
                let rho = rho.max(1.0 / rho).max(1.05);
                center + joukowski(Complex64::from_polar(scale * rho, theta)) * half_width
            }
        }
    }
}

/// A basis ready for evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Basis {
    pub spec: BasisSpec,
    pub recurrence: Recurrence,
    /// `log b_{k,k}` for `k = 0..=max_degree`.
    pub log_leading: Vec<f64>,
    pub guess: GuessCurve,
    /// True when `B_k = b_{k,k} z^k`.
    pub diagonal: bool,
}

fn diagonal_recurrence(lead: impl Fn(usize) -> f64, n: usize) -> Recurrence {
    Recurrence {
        b00: lead(0),
        columns: (0..n)
            .map(|k| RecurrenceColumn {
                lo: k,
                coeffs: vec![Complex64::new(0.0, 0.0), Complex64::new(lead(k) / lead(k + 1), 0.0)],
            })
            .collect(),
    }
}

/// Three-term recurrence `z B_k = s_k B_{k+1} + c B_k + t_k B_{k-1}`.
fn three_term(b00: f64, center: f64, n: usize, coef: impl Fn(usize) -> (f64, f64)) -> Recurrence {
    let c = Complex64::new(center, 0.0);
    Recurrence {
        b00,
        columns: (0..n)
            .map(|k| {
                let (up, down) = coef(k);
                if k == 0 {
                    RecurrenceColumn {
                        lo: 0,
                        coeffs: vec![c, Complex64::new(up, 0.0)],
                    }
                } else {
                    RecurrenceColumn {
                        lo: k - 1,
                        coeffs: vec![Complex64::new(down, 0.0), c, Complex64::new(up, 0.0)],
                    }
                }
            })
            .collect(),
    }
}

fn log_leading(rec: &Recurrence) -> Vec<f64> {
    let mut out = Vec::with_capacity(rec.columns.len() + 1);
    out.push(rec.b00.ln());
    for col in &rec.columns {
        let last = *out.last().unwrap();
        out.push(last - col.sub().ln());
    }
    out
}

impl Basis {
    pub fn new(spec: &BasisSpec) -> Result<Self, BasisError> {
        spec.validate()?;
        let n = spec.max_degree;
        let unit = GuessCurve::Circle {
            center: Complex64::new(0.0, 0.0),
            radius: 1.0,
        };
        let (recurrence, guess, diagonal) = match &spec.kind {
            BasisKind::Monomial | BasisKind::FaberDisk => (diagonal_recurrence(|_| 1.0, n), unit, true),
            BasisKind::SzegoCircle => (diagonal_recurrence(|_| 1.0 / (2.0 * PI).sqrt(), n), unit, true),
            BasisKind::BergmanDisk => (
                diagonal_recurrence(|k| ((k as f64 + 1.0) / PI).sqrt(), n),
                unit,
                true,
            ),
            BasisKind::ChebyshevOrthonormal { a, b } => {
                let (c, hw) = ((a + b) / 2.0, (b - a) / 2.0);
                let s2 = std::f64::consts::FRAC_1_SQRT_2;
                let rec = three_term(1.0, c, n, |k| match k {
                    0 => (hw * s2, 0.0),
                    1 => (hw / 2.0, hw * s2),
                    _ => (hw / 2.0, hw / 2.0),
                });
                (rec, GuessCurve::Joukowski { center: c, half_width: hw, scale: 1.0 }, false)
            }
            BasisKind::FaberInterval { a, b } => {
                let (c, hw) = ((a + b) / 2.0, (b - a) / 2.0);
                let rec = three_term(1.0, c, n, |k| match k {
                    0 => (hw / 2.0, 0.0),
                    1 => (hw / 2.0, hw),
                    _ => (hw / 2.0, hw / 2.0),
                });
                (rec, GuessCurve::Joukowski { center: c, half_width: hw, scale: 1.0 }, false)
            }
            BasisKind::FaberEllipse { r } => {
                let r = *r;
                let rec = three_term(1.0, 0.0, n, |k| match k {
                    0 => (r / 2.0, 0.0),
                    1 => (r / 2.0, 1.0 / r),
                    _ => (r / 2.0, 1.0 / (2.0 * r)),
                });
                (rec, GuessCurve::Joukowski { center: 0.0, half_width: 1.0, scale: r }, false)
            }
            BasisKind::GramSchmidt(measure) => {
                let rec = stieltjes(measure, n)?;
                (rec, guess_for_measure(measure), false)
            }
        };
        Ok(Self {
            spec: spec.clone(),
            log_leading: log_leading(&recurrence),
            recurrence,
            guess,
            diagonal,
        })
    }

    pub fn max_degree(&self) -> usize {
        self.spec.max_degree
    }

    fn check_degree(&self, n: usize) -> Result<(), BasisError> {
        if n > self.max_degree() {
            Err(BasisError::DegreeTooHigh {
                requested: n,
                available: self.max_degree(),
            })
        } else {
            Ok(())
        }
    }

    /// `B_0(z)..B_n(z)`.
    pub fn values(&self, z: Complex64, n: usize) -> Result<Vec<Complex64>, BasisError> {
        self.check_degree(n)?;
        Ok(self.recurrence.values(z, n))
    }

    /// `Σ a_k B_k(z)`.
    pub fn evaluate_series(&self, a: &[Complex64], z: Complex64) -> Result<Complex64, BasisError> {
        let (p, _, _, resc) = self.sums(a, z)?;
        Ok(p * RESCALE_ABOVE.powi(resc))
    }

    /// `log |Σ a_k B_k(z)|`, safe against overflow.
    pub fn log_abs_series(&self, a: &[Complex64], z: Complex64) -> Result<f64, BasisError> {
        let (p, _, _, resc) = self.sums(a, z)?;
        Ok(p.norm().ln() + resc as f64 * RESCALE_ABOVE.ln())
    }

    fn sums(&self, a: &[Complex64], z: Complex64) -> Result<(Complex64, Complex64, f64, i32), BasisError> {
        if a.is_empty() {
            return Err(BasisError::ZeroDegree);
        }
        self.check_degree(a.len() - 1)?;
        Ok(self.recurrence.scaled_sums(a, z))
    }

    /// Triangle up to degree `n` from the recurrence.
    pub fn triangle(&self, n: usize) -> Result<BasisTriangle, BasisError> {
        self.check_degree(n)?;
        let rec = &self.recurrence;
        let mut columns: Vec<Vec<Complex64>> = vec![vec![Complex64::new(rec.b00, 0.0)]];
        for k in 0..n {
            let col = &rec.columns[k];
            let mut next = vec![Complex64::new(0.0, 0.0); k + 2];
            for (j, b) in columns[k].iter().enumerate() {
                next[j + 1] += b;
            }
            for (i, h) in col.coeffs[..col.coeffs.len() - 1].iter().enumerate() {
                for (j, b) in columns[col.lo + i].iter().enumerate() {
                    next[j] -= h * b;
                }
            }
            let sub = col.sub();
            for x in &mut next {
                *x /= sub;
            }
            if self.diagonal {
                // keep closed-form diagonal triangles exactly diagonal
                let lead = next[k + 1];
                next.iter_mut().for_each(|x| *x = Complex64::new(0.0, 0.0));
                next[k + 1] = lead;
            }
            columns.push(next);
        }
        Ok(BasisTriangle { columns })
    }

    /// Starting points for root iteration, from the Newton polygon of
    /// `|A_k| b_{k,k} cap^k` mapped through the guess curve.
    pub fn initial_guesses(&self, a: &[Complex64]) -> Vec<Complex64> {
        let n = a.len() - 1;
        let lc = self.guess.capacity().ln();
        let pts: Vec<(usize, f64)> = a
            .iter()
            .enumerate()
            .filter(|(_, x)| x.norm() > 0.0)
            .map(|(k, x)| (k, x.norm().ln() + self.log_leading[k] + k as f64 * lc))
            .collect();
        let mut hull: Vec<(usize, f64)> = Vec::new();
        for &p in &pts {
            while hull.len() >= 2 {
                let (x1, y1) = hull[hull.len() - 2];
                let (x2, y2) = hull[hull.len() - 1];
                if (x2 as f64 - x1 as f64) * (p.1 - y1) - (y2 - y1) * (p.0 as f64 - x1 as f64) >= 0.0 {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push(p);
        }
        let mut out = Vec::with_capacity(n);
        // vanishing low-order coefficients: no slope information, use the boundary
        let first = hull.first().map_or(n, |p| p.0);
        for i in 0..first {
            let theta = 2.0 * PI * i as f64 / first as f64 + 0.4;
            out.push(self.guess.point(1.0, theta));
        }
        for w in hull.windows(2) {
            let ((j1, l1), (j2, l2)) = (w[0], w[1]);
            let m = j2 - j1;
            let rho = ((l1 - l2) / m as f64).exp();
            for i in 0..m {
                let theta = 2.0 * PI * (i as f64 / m as f64 + j1 as f64 / n as f64) + 0.4;
                out.push(self.guess.point(rho, theta));
            }
        }
        out
    }
}

fn guess_for_measure(m: &MeasureSpec) -> GuessCurve {
    let real = m.nodes.iter().all(|z| z.im == 0.0);
    if real {
        let lo = m.nodes.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
        let hi = m.nodes.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
        let hw = ((hi - lo) / 2.0).max(1e-300);
        GuessCurve::Joukowski {
            center: (lo + hi) / 2.0,
            half_width: hw,
            scale: 1.0,
        }
    } else {
        let mass = m.mass();
        let center: Complex64 = m.nodes.iter().zip(&m.weights).map(|(z, w)| z * w).sum::<Complex64>() / mass;
        let radius = m.nodes.iter().map(|z| (z - center).norm()).fold(0.0, f64::max);
        GuessCurve::Circle { center, radius }
    }
}

/// Stieltjes orthonormalization of `1, z, z², …` in `L²(measure)`.
fn stieltjes(measure: &MeasureSpec, n: usize) -> Result<Recurrence, BasisError> {
    measure.validate()?;
    if measure.nodes.len() <= n {
        return Err(BasisError::Conditioning { degree: measure.nodes.len(), ratio: 0.0 });
    }
    let b00 = 1.0 / measure.mass().sqrt();
    let m = measure.nodes.len();
    let mut q: Vec<Vec<Complex64>> = vec![vec![Complex64::new(b00, 0.0); m]];
    let mut columns = Vec::with_capacity(n);
    for k in 0..n {
        let mut v: Vec<Complex64> = measure.nodes.iter().zip(&q[k]).map(|(z, x)| z * x).collect();
        let start = measure.inner(&v, &v).re.sqrt();
        let mut h = vec![Complex64::new(0.0, 0.0); k + 2];
        for _pass in 0..2 {
            for j in 0..=k {
                let c = measure.inner(&v, &q[j]);
                h[j] += c;
                for (x, y) in v.iter_mut().zip(&q[j]) {
                    *x -= c * y;
                }
            }
        }
        let norm = measure.inner(&v, &v).re.sqrt();
        let ratio = norm / start;
        if !(ratio >= CONDITIONING_FLOOR) {
            return Err(BasisError::Conditioning { degree: k + 1, ratio });
        }
        h[k + 1] = Complex64::new(norm, 0.0);
        q.push(v.iter().map(|x| x / norm).collect());
        columns.push(RecurrenceColumn { lo: 0, coeffs: h });
    }
    let rec = Recurrence { b00, columns };
    let residual = gram_residual(&rec, measure, n);
    if !(residual <= GRAM_TOL) {
        return Err(BasisError::LossOfOrthogonality { degree: n, residual });
    }
    Ok(rec)
}

/// `max |G - I|` for `B_0..B_n` evaluated by the recurrence at the nodes.
pub fn gram_residual(rec: &Recurrence, measure: &MeasureSpec, n: usize) -> f64 {
    let vals: Vec<Vec<Complex64>> = measure.nodes.iter().map(|&z| rec.values(z, n)).collect();
    let mut worst: f64 = 0.0;
    for i in 0..=n {
        for j in 0..=i {
            let g: Complex64 = vals
                .iter()
                .zip(&measure.weights)
                .map(|(v, &w)| v[i] * v[j].conj() * w)
                .sum();
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g - target).norm());
        }
    }
    worst
}

/// Triangle of `spec` up to its maximum degree.
pub fn basis_triangle(spec: &BasisSpec) -> Result<BasisTriangle, BasisError> {
    Basis::new(spec)?.triangle(spec.max_degree)
}

/// Orthonormal basis of `L²(measure)` up to degree `n`.
pub fn gram_schmidt_orthonormalize(measure: &MeasureSpec, n: usize) -> Result<BasisTriangle, BasisError> {
    basis_triangle(&BasisSpec::new(BasisKind::GramSchmidt(measure.clone()), n))
}

/// `c_j = Σ_{k≥j} A_k b_{j,k}`.
pub fn expand_to_monomial(a: &[Complex64], triangle: &BasisTriangle) -> Result<Vec<Complex64>, BasisError> {
    if a.is_empty() {
        return Err(BasisError::ZeroDegree);
    }
    let n = a.len() - 1;
    if n > triangle.max_degree() {
        return Err(BasisError::DegreeTooHigh {
            requested: n,
            available: triangle.max_degree(),
        });
    }
    let mut c = vec![Complex64::new(0.0, 0.0); n + 1];
    for (k, &ak) in a.iter().enumerate() {
        for (j, b) in triangle.columns[k].iter().enumerate() {
            c[j] += ak * b;
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularityRow {
    pub k: usize,
    /// `|b_{k,k}|^{1/k} · cap(E)`
    pub leading_root: f64,
    /// `max |B_k|` over the boundary grid.
    pub sup_norm: f64,
}

/// Grid density used by [`regularity_report`] at maximum degree `k_max`.
pub fn default_grid(k_max: usize) -> usize {
    (64 * k_max).max(4096)
}

/// Rows `k = 1..=k_max` with sup norms from `grid` boundary points.
pub fn regularity_report(
    spec: &BasisSpec,
    domain: &DomainModel,
    k_max: usize,
    grid: Option<usize>,
) -> Result<Vec<RegularityRow>, BasisError> {
    domain.validate().map_err(|e| BasisError::InvalidSpec(e.to_string()))?;
    if !spec.accepts_domain(domain) {
        return Err(BasisError::DomainMismatch {
            basis: spec.kind.to_string(),
            domain: domain.to_string(),
        });
    }
    let spec = BasisSpec::new(spec.kind.clone(), spec.max_degree.max(k_max));
    let basis = Basis::new(&spec)?;
    let m = grid.unwrap_or_else(|| default_grid(k_max)).max(2);
    let points: Vec<Complex64> = match *domain {
        DomainModel::Interval { a, b } => {
            let (c, hw) = ((a + b) / 2.0, (b - a) / 2.0);
            (0..m)
                .map(|i| {
                    let x = if i == 0 {
                        a
                    } else if i == m - 1 {
                        b
                    } else {
                        c - hw * (PI * i as f64 / (m - 1) as f64).cos()
                    };
                    Complex64::new(x, 0.0)
                })
                .collect()
        }
        _ => quadrature::trapezoid_angles(m)
            .into_iter()
            .map(|t| domain.boundary_point(t))
            .collect(),
    };
    let mut sup = vec![0.0f64; k_max + 1];
    for &z in &points {
        for (k, v) in basis.recurrence.values(z, k_max).iter().enumerate() {
            sup[k] = sup[k].max(v.norm());
        }
    }
    let lc = domain.capacity().ln();
    Ok((1..=k_max)
        .map(|k| RegularityRow {
            k,
            leading_root: (basis.log_leading[k] / k as f64 + lc).exp(),
            sup_norm: sup[k],
        })
        .collect())
}

/// `Σ A_k B_k` as a root-finding target evaluated through the recurrence.
pub struct BasisPolynomial<'a> {
    basis: &'a Basis,
    coeffs: Vec<Complex64>,
    max_abs: f64,
}

impl<'a> BasisPolynomial<'a> {
    pub fn new(basis: &'a Basis, coeffs: &[Complex64]) -> Result<Self, BasisError> {
        if coeffs.is_empty() {
            return Err(BasisError::ZeroDegree);
        }
        basis.check_degree(coeffs.len() - 1)?;
        Ok(Self {
            basis,
            coeffs: coeffs.to_vec(),
            max_abs: coeffs.iter().map(|x| x.norm()).fold(0.0, f64::max),
        })
    }
}

impl RootTarget for BasisPolynomial<'_> {
    fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    fn newton(&self, z: Complex64) -> NewtonEval {
        let (p, dp, s, _) = self.basis.recurrence.scaled_sums(&self.coeffs, z);
        NewtonEval {
            ratio: crate::polyroots::cdiv(p, dp),
            residual: p.norm() / (self.max_abs * s),
        }
    }
}

/// Zeros of `Σ A_k B_k`.
///
/// Diagonal bases go through the monomial form; the others run Ehrlich–Aberth
/// on the recurrence, certifying the normwise backward error
/// `|P(z)| ≤ tol · max_k |A_k| · Σ_k |B_k(z)|`. (The componentwise form
/// `Σ |A_k||B_k(z)|` cannot certify anything when few `A_k` are nonzero.)
pub fn find_basis_roots(basis: &Basis, a: &[Complex64], opts: &RootOptions) -> Result<RootSet, BasisError> {
    if a.len() < 2 {
        return Err(BasisError::ZeroDegree);
    }
    basis.check_degree(a.len() - 1)?;
    if basis.diagonal {
        let c: Vec<Complex64> = a
            .iter()
            .enumerate()
            .map(|(k, x)| x * basis.log_leading[k].exp())
            .collect();
        let poly = ComplexPolynomial::new(c).map_err(|_| BasisError::ZeroDegree)?;
        return Ok(polyroots::find_roots(&poly, opts));
    }
    let scale = a.iter().map(|x| x.norm()).fold(0.0, f64::max);
    if !(scale > 0.0) {
        return Err(BasisError::ZeroDegree);
    }
    let mut hi = a.len() - 1;
    while hi > 0 && a[hi].norm() <= LEADING_GUARD * scale {
        hi -= 1;
    }
    if hi == 0 {
        return Err(BasisError::ZeroDegree);
    }
    let deflated = a.len() - 1 - hi;
    let core: Vec<Complex64> = a[..=hi].iter().map(|x| x / scale).collect();
    let target = BasisPolynomial::new(basis, &core)?;
    let mut set = if hi == 1 {
        let col = &basis.recurrence.columns[0];
        // B_1 = (z - h_00) B_0 / h_10
        let root = col.coeffs[0] - core[0] * col.sub() / core[1];
        RootSet {
            roots: vec![root],
            residuals: vec![target.newton(root).residual],
            iterations: 0,
            converged: true,
            at_infinity: 0,
            warnings: Vec::new(),
        }
    } else {
        polyroots::aberth(&target, basis.initial_guesses(&core), opts)
    };
    if deflated > 0 {
        set.at_infinity = deflated;
        set.warnings.push(format!(
            "leading coefficient below {LEADING_GUARD:e} of max |A_k|: degree deflated by {deflated}"
        ));
    }
    if !set.converged {
        set.warnings.push(format!(
            "no convergence after {} sweeps (max residual {:e})",
            set.iterations,
            set.max_residual()
        ));
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn spec(kind: BasisKind, n: usize) -> BasisSpec {
        BasisSpec::new(kind, n)
    }

    fn cheb(n: usize) -> BasisSpec {
        spec(BasisKind::ChebyshevOrthonormal { a: -1.0, b: 1.0 }, n)
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn bergman_degree_three() {
        let t = basis_triangle(&spec(BasisKind::BergmanDisk, 3)).unwrap();
        assert!((t.get(3, 3).re - 2.0 / PI.sqrt()).abs() < 1e-14);
        assert!((t.get(3, 3).re - 1.12838).abs() < 1e-5);
        assert_eq!(t.get(1, 3), c(0.0));
        // oracle: 2-D quadrature of |z|^6
        let m = MeasureSpec::disk_area(16, 32);
        let v: Vec<_> = m.nodes.iter().map(|z| z.powu(3) * t.get(3, 3)).collect();
        assert!((m.inner(&v, &v).re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn faber_interval_examples() {
        let t = basis_triangle(&spec(BasisKind::FaberInterval { a: -1.0, b: 1.0 }, 2)).unwrap();
        assert_eq!(t.get(1, 1), c(2.0));
        let e = expand_to_monomial(&[c(0.0), c(0.0), c(1.0)], &t).unwrap();
        assert_eq!(e, vec![c(-2.0), c(0.0), c(4.0)]);
    }

    #[test]
    fn faber_interval_matches_joukowski_laurent_part() {
        // F_k(J(u)) = u^k + u^{-k} on the unit circle in u
        let basis = Basis::new(&spec(BasisKind::FaberInterval { a: -1.0, b: 1.0 }, 12)).unwrap();
        for i in 0..7 {
            let u = Complex64::from_polar(1.7, 0.3 + i as f64);
            let v = basis.values(joukowski(u), 12).unwrap();
            for k in 1..=12 {
                let want = u.powu(k as u32) + u.powu(k as u32).inv();
                assert!((v[k] - want).norm() < 1e-11 * want.norm().max(1.0));
            }
        }
    }

    #[test]
    fn szego_closed_form() {
        let t = basis_triangle(&spec(BasisKind::SzegoCircle, 5)).unwrap();
        for k in 0..=5 {
            assert!((t.get(k, k).re - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-15);
        }
        let e = expand_to_monomial(&[c(1.0), c(1.0)], &t).unwrap();
        assert!((e[0].re - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-15);
        assert!((e[1].re - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn faber_ellipse_degree_two() {
        for r in [1.5, 2.0, 3.0] {
            let t = basis_triangle(&spec(BasisKind::FaberEllipse { r }, 2)).unwrap();
            assert!((t.get(2, 2).re - 4.0 / (r * r)).abs() < 1e-14);
            assert!((t.get(0, 2).re + 2.0 / (r * r)).abs() < 1e-14);
            assert!(t.get(1, 2).norm() < 1e-15);
            // oracle: F_n(J(u)) = (u^n + u^-n)/R^n
            let basis = Basis::new(&spec(BasisKind::FaberEllipse { r }, 2)).unwrap();
            let u = Complex64::from_polar(r, 0.9);
            let v = basis.values(joukowski(u), 2).unwrap();
            assert!((v[2] - (u * u + (u * u).inv()) / (r * r)).norm() < 1e-14);
        }
    }

    #[test]
    fn monomial_expansion_is_identity() {
        let t = basis_triangle(&spec(BasisKind::Monomial, 4)).unwrap();
        let a: Vec<_> = (0..5).map(|k| Complex64::new(k as f64, -1.0)).collect();
        assert_eq!(expand_to_monomial(&a, &t).unwrap(), a);
    }

    #[test]
    fn gram_matrices_are_identity_to_degree_60() {
        let cases = [
            (spec(BasisKind::Monomial, 60), MeasureSpec::circle(256)),
            (
                spec(BasisKind::SzegoCircle, 60),
                MeasureSpec::circle_arclength(256, |_| 1.0, "arclength"),
            ),
            (spec(BasisKind::BergmanDisk, 60), MeasureSpec::disk_area(64, 128)),
            (cheb(60), MeasureSpec::arcsine(-1.0, 1.0, 128)),
            (
                spec(BasisKind::ChebyshevOrthonormal { a: 2.0, b: 5.0 }, 60),
                MeasureSpec::arcsine(2.0, 5.0, 128),
            ),
        ];
        for (s, m) in cases {
            let b = Basis::new(&s).unwrap();
            let r = gram_residual(&b.recurrence, &m, 60);
            assert!(r <= 1e-8, "{}: {r:e}", s.kind);
        }
    }

    #[test]
    fn stieltjes_circle_gives_identity() {
        let t = gram_schmidt_orthonormalize(&MeasureSpec::circle(64), 10).unwrap();
        for k in 0..=10 {
            for j in 0..=k {
                let want = if j == k { 1.0 } else { 0.0 };
                assert!((t.get(j, k) - want).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn stieltjes_arcsine_gives_chebyshev() {
        let t = gram_schmidt_orthonormalize(&MeasureSpec::arcsine(-1.0, 1.0, 32), 8).unwrap();
        let want = basis_triangle(&cheb(8)).unwrap();
        for k in 0..=8 {
            for j in 0..=k {
                assert!((t.get(j, k) - want.get(j, k)).norm() < 1e-9, "({j},{k})");
            }
        }
        // direct oracle: √2 T_4 = √2 (8x⁴ - 8x² + 1)
        let s2 = 2f64.sqrt();
        assert!((t.get(4, 4).re - 8.0 * s2).abs() < 1e-9);
        assert!((t.get(2, 4).re + 8.0 * s2).abs() < 1e-9);
        assert!((t.get(0, 4).re - s2).abs() < 1e-9);
    }

    #[test]
    fn stieltjes_disk_gives_bergman() {
        let t = gram_schmidt_orthonormalize(&MeasureSpec::disk_area(16, 32), 6).unwrap();
        for k in 0..=6 {
            for j in 0..=k {
                let want = if j == k { ((k as f64 + 1.0) / PI).sqrt() } else { 0.0 };
                assert!((t.get(j, k) - want).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn stieltjes_ignores_node_order() {
        let m = MeasureSpec::legendre(-1.0, 1.0, 40);
        let mut shuffled = m.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for i in (1..shuffled.nodes.len()).rev() {
            let j = rng.gen_range(0..=i);
            shuffled.nodes.swap(i, j);
            shuffled.weights.swap(i, j);
        }
        let a = gram_schmidt_orthonormalize(&m, 20).unwrap();
        let b = gram_schmidt_orthonormalize(&shuffled, 20).unwrap();
        for k in 0..=20 {
            for j in 0..=k {
                let scale = a.get(j, k).norm().max(1.0);
                assert!((a.get(j, k) - b.get(j, k)).norm() < 1e-8 * scale);
            }
        }
    }

    #[test]
    fn stieltjes_has_positive_real_diagonal() {
        let t = gram_schmidt_orthonormalize(&MeasureSpec::legendre(0.0, 3.0, 30), 12).unwrap();
        for k in 0..=12 {
            assert!(t.diagonal(k).re > 0.0 && t.diagonal(k).im == 0.0);
        }
    }

    #[test]
    fn stieltjes_reports_conditioning_failure() {
        // only 5 nodes cannot carry degree 8
        let err = gram_schmidt_orthonormalize(&MeasureSpec::arcsine(-1.0, 1.0, 5), 8).unwrap_err();
        assert!(matches!(err, BasisError::Conditioning { .. }));
        // monomial-like growth on [0, 1] collapses well before degree 60
        let err = gram_schmidt_orthonormalize(&MeasureSpec::legendre(0.0, 1.0, 40), 60).unwrap_err();
        assert!(matches!(err, BasisError::Conditioning { .. } | BasisError::LossOfOrthogonality { .. }));
    }

    #[test]
    fn quadrature_masses() {
        assert!((MeasureSpec::circle_arclength(64, |_| 1.0, "ds").mass() - 2.0 * PI).abs() < 1e-10);
        assert!((MeasureSpec::circle(64).mass() - 1.0).abs() < 1e-10);
        assert!((MeasureSpec::arcsine(-1.0, 1.0, 20).mass() - 1.0).abs() < 1e-10);
        assert!((MeasureSpec::legendre(-2.0, 3.0, 20).mass() - 5.0).abs() < 1e-10);
        assert!((MeasureSpec::disk_area(10, 16).mass() - PI).abs() < 1e-10);
    }

    #[test]
    fn chebyshev_regularity_column() {
        let rows = regularity_report(&cheb(20), &DomainModel::interval(-1.0, 1.0), 20, None).unwrap();
        let want = (2f64.sqrt() * 2f64.powi(19)).powf(1.0 / 20.0) / 2.0;
        assert!((rows[19].leading_root - want).abs() < 1e-12);
        assert!((rows[19].leading_root - 0.98282).abs() < 1e-5);
        // increasing toward 1
        assert!(rows.windows(2).all(|w| w[0].leading_root < w[1].leading_root));
        assert!(rows.iter().all(|r| (r.sup_norm - 2f64.sqrt()).abs() < 1e-12));
    }

    #[test]
    fn faber_ellipse_sup_norm() {
        let s = spec(BasisKind::FaberEllipse { r: 2.0 }, 40);
        let rows = regularity_report(&s, &DomainModel::Ellipse { r: 2.0 }, 40, None).unwrap();
        for row in rows {
            let want = 1.0 + 2f64.powi(-2 * row.k as i32);
            assert!((row.sup_norm - want).abs() < 1e-10, "k={}", row.k);
            assert!(row.sup_norm <= 2.0);
            assert!((row.leading_root - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn monomial_on_circle_is_flat() {
        let rows = regularity_report(&spec(BasisKind::Monomial, 10), &DomainModel::UnitCircle, 10, Some(512)).unwrap();
        assert!(rows.iter().all(|r| r.leading_root == 1.0 && (r.sup_norm - 1.0).abs() < 1e-12));
    }

    #[test]
    fn regular_bases_at_degree_100() {
        let cases = [
            (cheb(100), DomainModel::interval(-1.0, 1.0)),
            (spec(BasisKind::BergmanDisk, 100), DomainModel::ClosedUnitDisk),
            (spec(BasisKind::FaberEllipse { r: 2.0 }, 100), DomainModel::Ellipse { r: 2.0 }),
            (spec(BasisKind::SzegoCircle, 100), DomainModel::UnitCircle),
        ];
        for (s, d) in cases {
            let rows = regularity_report(&s, &d, 100, Some(4096)).unwrap();
            assert!((rows[99].leading_root - 1.0).abs() <= 0.02, "{}", s.kind);
        }
    }

    #[test]
    fn mismatched_domain_is_rejected() {
        let err = regularity_report(&cheb(5), &DomainModel::UnitCircle, 5, None).unwrap_err();
        assert!(matches!(err, BasisError::DomainMismatch { .. }));
        let err = regularity_report(&spec(BasisKind::FaberEllipse { r: 2.0 }, 5), &DomainModel::Ellipse { r: 3.0 }, 5, None);
        assert!(err.is_err());
    }

    #[test]
    fn text_round_trip() {
        for s in [
            "monomial",
            "szego-circle",
            "bergman-disk",
            "chebyshev-orthonormal(-1, 1)",
            "faber-interval(0, 2)",
            "faber-disk",
            "faber-ellipse(2)",
            "gram-schmidt(arcsine(-1, 1, 64))",
            "gram-schmidt(disk-area(8, 16))",
        ] {
            let k: BasisKind = s.parse().unwrap();
            assert_eq!(k.to_string(), s);
        }
        assert!("faber-ellipse(0.5)".parse::<BasisKind>().is_err());
        assert!("hermite".parse::<BasisKind>().is_err());
    }

    #[test]
    fn degree_too_high() {
        let b = Basis::new(&cheb(4)).unwrap();
        assert!(matches!(b.values(c(0.0), 5), Err(BasisError::DegreeTooHigh { .. })));
    }

    #[test]
    fn chebyshev_roots_through_recurrence() {
        // A = e_n gives the zeros of T_n: cos((2i-1)π/2n)
        let n = 200;
        let basis = Basis::new(&cheb(n)).unwrap();
        let mut a = vec![c(0.0); n + 1];
        a[n] = c(1.0);
        let set = find_basis_roots(&basis, &a, &RootOptions::default()).unwrap();
        assert!(set.converged);
        let mut got: Vec<f64> = set.roots.iter().map(|z| z.re).collect();
        got.sort_by(f64::total_cmp);
        let mut want: Vec<f64> = (1..=n).map(|i| ((2 * i - 1) as f64 * PI / (2 * n) as f64).cos()).collect();
        want.sort_by(f64::total_cmp);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-9);
        }
        assert!(set.roots.iter().all(|z| z.im.abs() < 1e-9));
    }

    #[test]
    fn basis_roots_agree_with_monomial_route_at_low_degree() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = spec(BasisKind::FaberEllipse { r: 1.5 }, 12);
        let basis = Basis::new(&s).unwrap();
        let a: Vec<_> = (0..=12).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let direct = find_basis_roots(&basis, &a, &RootOptions::default()).unwrap();
        let mono = expand_to_monomial(&a, &basis.triangle(12).unwrap()).unwrap();
        let via = polyroots::find_roots(&ComplexPolynomial::new(mono).unwrap(), &RootOptions::default());
        for z in &direct.roots {
            let d = via.roots.iter().map(|w| (z - w).norm()).fold(f64::INFINITY, f64::min);
            assert!(d < 1e-8);
        }
    }

    #[test]
    fn kac_chebyshev_degree_512_converges() {
        let n = 512;
        let basis = Basis::new(&cheb(n)).unwrap();
        for seed in 0..3 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a: Vec<_> = (0..=n).map(|_| c(rng.sample(rand_distr::StandardNormal))).collect();
            let set = find_basis_roots(&basis, &a, &RootOptions::default()).unwrap();
            assert!(set.converged, "seed {seed}: {:?}", set.warnings);
            assert_eq!(set.roots.len(), n);
        }
    }

    #[test]
    fn log_series_survives_overflow() {
        let n = 400;
        let basis = Basis::new(&spec(BasisKind::FaberInterval { a: -1.0, b: 1.0 }, n)).unwrap();
        let mut a = vec![c(0.0); n + 1];
        a[n] = c(1.0);
        let u = Complex64::new(20.0, 0.0);
        let z = joukowski(u);
        let got = basis.log_abs_series(&a, z).unwrap();
        let want = n as f64 * 20f64.ln(); // u^n + u^-n
        assert!((got - want).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn expansion_is_linear(seed in 0u64..1000, alpha_re in -3.0f64..3.0, alpha_im in -3.0f64..3.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t = basis_triangle(&cheb(15)).unwrap();
            let mut draw = || -> Vec<Complex64> {
                (0..=15).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
            };
            let (a, b) = (draw(), draw());
            let alpha = Complex64::new(alpha_re, alpha_im);
            let mix: Vec<_> = a.iter().zip(&b).map(|(x, y)| alpha * x + y).collect();
            let lhs = expand_to_monomial(&mix, &t).unwrap();
            let ea = expand_to_monomial(&a, &t).unwrap();
            let eb = expand_to_monomial(&b, &t).unwrap();
            for j in 0..=15 {
                let rhs = alpha * ea[j] + eb[j];
                let scale: f64 = (0..=15).map(|k| t.get(j, k).norm()).sum::<f64>() * 8.0;
                prop_assert!((lhs[j] - rhs).norm() <= 1e-14 * scale.max(1.0));
            }
        }

        #[test]
        fn recurrence_matches_triangle(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let z = Complex64::new(rng.gen_range(-1.2..1.2), rng.gen_range(-0.5..0.5));
            for s in [cheb(10), spec(BasisKind::FaberEllipse { r: 2.5 }, 10), spec(BasisKind::BergmanDisk, 10)] {
                let b = Basis::new(&s).unwrap();
                let t = b.triangle(10).unwrap();
                let v = b.values(z, 10).unwrap();
                for k in 0..=10 {
                    let h: Complex64 = (0..=k).rev().fold(Complex64::new(0.0, 0.0), |acc, j| acc * z + t.get(j, k));
                    prop_assert!((h - v[k]).norm() < 1e-10 * v[k].norm().max(1.0));
                }
            }
        }
    }
}
