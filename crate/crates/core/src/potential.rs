//! Canonical compact sets and their potential theory.
//!
//! Supported sets all have closed-form exterior maps: the unit circle, the
//! closed unit disk, a real interval `[a, b]`, and the filled ellipse
//! `E_R = J({|u| ≤ R})` with `J(u) = (u + 1/u)/2` (foci at `±1`).
//!
//! Sector membership is half-open everywhere: radial and strip bounds are
//! closed below and open above, angular bounds include `α` and exclude `β`.
//! Zeros exactly on `|z| = r` therefore belong to the annular sector; the
//! theorems use open annuli, which differ only on a null set.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{parse_call, real_args};

const TAU: f64 = 2.0 * PI;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PotentialError {
    #[error("sector {sector} does not apply to domain {domain}")]
    Mismatch { domain: String, sector: String },
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("invalid sector: {0}")]
    InvalidSector(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DomainModel {
    UnitCircle,
    ClosedUnitDisk,
    Interval { a: f64, b: f64 },
    /// Filled ellipse bounded by `J(|u| = R)`, `R > 1`.
    Ellipse { r: f64 },
}

impl DomainModel {
    pub fn interval(a: f64, b: f64) -> Self {
        DomainModel::Interval { a, b }
    }

    pub fn validate(&self) -> Result<(), PotentialError> {
        match *self {
            DomainModel::Interval { a, b } if !(a < b && a.is_finite() && b.is_finite()) => {
                Err(PotentialError::InvalidDomain(format!("interval needs a < b, got ({a}, {b})")))
            }
            DomainModel::Ellipse { r } if !(r > 1.0 && r.is_finite()) => {
                Err(PotentialError::InvalidDomain(format!("ellipse needs R > 1, got {r}")))
            }
            _ => Ok(()),
        }
    }

    /// Logarithmic capacity.
    pub fn capacity(&self) -> f64 {
        match *self {
            DomainModel::UnitCircle | DomainModel::ClosedUnitDisk => 1.0,
            DomainModel::Interval { a, b } => (b - a) / 4.0,
            DomainModel::Ellipse { r } => r / 2.0,
        }
    }

    /// Interior point used by the disk-type bounds.
    pub fn interior_point(&self) -> Option<Complex64> {
        match self {
            DomainModel::ClosedUnitDisk | DomainModel::Ellipse { .. } => Some(Complex64::new(0.0, 0.0)),
            _ => None,
        }
    }

    pub fn has_interior(&self) -> bool {
        self.interior_point().is_some()
    }

    /// Point of the outer boundary at parameter `θ` (the exterior map sends it
    /// to `e^{iθ}`).
    pub fn boundary_point(&self, theta: f64) -> Complex64 {
        match *self {
            DomainModel::UnitCircle | DomainModel::ClosedUnitDisk => Complex64::from_polar(1.0, theta),
            DomainModel::Interval { a, b } => {
                let (c, hw) = ((a + b) / 2.0, (b - a) / 2.0);
                Complex64::new(c + hw * theta.cos(), 0.0)
            }
            DomainModel::Ellipse { r } => joukowski(Complex64::from_polar(r, theta)),
        }
    }

    /// Default equal-measure partition into `m` cells with radial parameter `r`
    /// (ignored for intervals).
    pub fn partition(&self, m: usize, r: f64) -> Vec<Sector> {
        let angle = |i: usize| if i == m { TAU } else { TAU * i as f64 / m as f64 };
        match *self {
            DomainModel::UnitCircle => (0..m)
                .map(|i| Sector::Annular {
                    r,
                    alpha: angle(i),
                    beta: angle(i + 1),
                })
                .collect(),
            DomainModel::ClosedUnitDisk => (0..m)
                .map(|i| Sector::TwoSided {
                    r,
                    alpha: angle(i),
                    beta: angle(i + 1),
                })
                .collect(),
            DomainModel::Ellipse { .. } => (0..m)
                .map(|i| Sector::Parameter {
                    r,
                    alpha: angle(i),
                    beta: angle(i + 1),
                })
                .collect(),
            DomainModel::Interval { a, b } => {
                let (c, hw) = ((a + b) / 2.0, (b - a) / 2.0);
                let cut = |i: usize| {
                    if i == 0 {
                        a
                    } else if i == m {
                        b
                    } else {
                        c - hw * (PI * i as f64 / m as f64).cos()
                    }
                };
                (0..m).map(|i| Sector::Strip { x1: cut(i), x2: cut(i + 1) }).collect()
            }
        }
    }
}

impl fmt::Display for DomainModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DomainModel::UnitCircle => write!(f, "unit-circle"),
            DomainModel::ClosedUnitDisk => write!(f, "closed-unit-disk"),
            DomainModel::Interval { a, b } => write!(f, "interval({a}, {b})"),
            DomainModel::Ellipse { r } => write!(f, "ellipse({r})"),
        }
    }
}

impl FromStr for DomainModel {
    type Err = PotentialError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = PotentialError::InvalidDomain;
        let (name, args) = parse_call(s).map_err(err)?;
        let d = match name.as_str() {
            "unit-circle" | "circle" => DomainModel::UnitCircle,
            "closed-unit-disk" | "disk" => DomainModel::ClosedUnitDisk,
            "interval" => {
                let v = real_args(&name, &args, 2).map_err(err)?;
                DomainModel::Interval { a: v[0], b: v[1] }
            }
            "ellipse" => DomainModel::Ellipse {
                r: real_args(&name, &args, 1).map_err(err)?[0],
            },
            other => return Err(err(format!("unknown domain `{other}`"))),
        };
        d.validate()?;
        Ok(d)
    }
}

/// Discrepancy test region attached to a domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Sector {
    /// `{r ≤ |z| < 1/r, α ≤ arg z < β}` for the unit circle, `0 < r < 1`.
    Annular { r: f64, alpha: f64, beta: f64 },
    /// `{1/r ≤ |z| < r, α ≤ arg z < β}` for the closed disk, `r > 1`.
    TwoSided { r: f64, alpha: f64, beta: f64 },
    /// Vertical strip `{x1 ≤ Re z < x2}`, unbounded in the imaginary direction.
    Strip { x1: f64, x2: f64 },
    /// `{1/r ≤ |Φ(z)| < r, α ≤ arg Φ(z) < β}` for the ellipse, `r > 1`.
    Parameter { r: f64, alpha: f64, beta: f64 },
}

impl Sector {
    pub fn validate_for(&self, domain: &DomainModel) -> Result<(), PotentialError> {
        let mismatch = || PotentialError::Mismatch {
            domain: domain.to_string(),
            sector: self.to_string(),
        };
        let invalid = |m: String| Err(PotentialError::InvalidSector(m));
        let angles = |alpha: f64, beta: f64| {
            if alpha < beta && beta <= alpha + TAU + 1e-15 && alpha.is_finite() {
                Ok(())
            } else {
                invalid(format!("angles need α < β ≤ α + 2π, got ({alpha}, {beta})"))
            }
        };
        match (*self, *domain) {
            (Sector::Annular { r, alpha, beta }, DomainModel::UnitCircle) => {
                if !(r > 0.0 && r < 1.0) {
                    return invalid(format!("annular sector needs 0 < r < 1, got {r}"));
                }
                angles(alpha, beta)
            }
            (Sector::TwoSided { r, alpha, beta }, DomainModel::ClosedUnitDisk)
            | (Sector::Parameter { r, alpha, beta }, DomainModel::Ellipse { .. }) => {
                if !(r > 1.0 && r.is_finite()) {
                    return invalid(format!("sector needs r > 1, got {r}"));
                }
                angles(alpha, beta)
            }
            (Sector::Strip { x1, x2 }, DomainModel::Interval { a, b }) => {
                if a <= x1 && x1 < x2 && x2 <= b {
                    Ok(())
                } else {
                    invalid(format!("strip [{x1}, {x2}) must lie in [{a}, {b}]"))
                }
            }
            _ => Err(mismatch()),
        }
    }
}

impl fmt::Display for Sector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sector::Annular { r, alpha, beta } => write!(f, "annular({r}, {alpha}, {beta})"),
            Sector::TwoSided { r, alpha, beta } => write!(f, "two-sided({r}, {alpha}, {beta})"),
            Sector::Strip { x1, x2 } => write!(f, "strip({x1}, {x2})"),
            Sector::Parameter { r, alpha, beta } => write!(f, "parameter({r}, {alpha}, {beta})"),
        }
    }
}

impl FromStr for Sector {
    type Err = PotentialError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = PotentialError::InvalidSector;
        let (name, args) = parse_call(s).map_err(err)?;
        Ok(match name.as_str() {
            "annular" => {
                let v = real_args(&name, &args, 3).map_err(err)?;
                Sector::Annular { r: v[0], alpha: v[1], beta: v[2] }
            }
            "two-sided" => {
                let v = real_args(&name, &args, 3).map_err(err)?;
                Sector::TwoSided { r: v[0], alpha: v[1], beta: v[2] }
            }
            "strip" => {
                let v = real_args(&name, &args, 2).map_err(err)?;
                Sector::Strip { x1: v[0], x2: v[1] }
            }
            "parameter" => {
                let v = real_args(&name, &args, 3).map_err(err)?;
                Sector::Parameter { r: v[0], alpha: v[1], beta: v[2] }
            }
            other => return Err(err(format!("unknown sector `{other}`"))),
        })
    }
}

/// `J(u) = (u + 1/u)/2`.
pub fn joukowski(u: Complex64) -> Complex64 {
    (u + u.inv()) * 0.5
}

/// Inverse Joukowski map onto `|u| ≥ 1`: `u = x + √(x-1)√(x+1)`.
///
/// The product of principal roots selects the exterior branch off the cut
/// `[-1, 1]` without the sign flips of `√(x²-1)`; on the cut `|u| = 1`.
pub fn inverse_joukowski(x: Complex64) -> Complex64 {
    let one = Complex64::new(1.0, 0.0);
    let u = x + (x - one).sqrt() * (x + one).sqrt();
    if u.norm_sqr() < 1.0 {
        u.inv()
    } else {
        u
    }
}

/// Angle in `[0, 2π)`.
fn arg_0_2pi(z: Complex64) -> f64 {
    let t = z.arg();
    if t < 0.0 {
        let w = t + TAU;
        if w >= TAU {
            0.0
        } else {
            w
        }
    } else {
        t
    }
}

fn angle_in(theta: f64, alpha: f64, beta: f64) -> bool {
    [0.0, TAU, -TAU, 2.0 * TAU]
        .iter()
        .map(|s| theta + s)
        .any(|t| alpha <= t && t < beta)
}

/// Exterior conformal map `Φ` of `Ĉ \ E` with `Φ(∞) = ∞`, `|Φ| ≥ 1` outside `E`.
///
/// Inside the disk and the ellipse this returns the analytic continuation of
/// the exterior formula (identity for the disk, `u(z)/R` for the ellipse).
pub fn exterior_map(domain: &DomainModel, z: Complex64) -> Complex64 {
    match *domain {
        DomainModel::UnitCircle | DomainModel::ClosedUnitDisk => z,
        DomainModel::Interval { a, b } => {
            let (c, hw) = ((a + b) / 2.0, (b - a) / 2.0);
            inverse_joukowski((z - c) / hw)
        }
        DomainModel::Ellipse { r } => inverse_joukowski(z) / r,
    }
}

/// Green function of `Ĉ \ E` with pole at infinity (zero on `E`).
pub fn green_function(domain: &DomainModel, z: Complex64) -> f64 {
    match domain {
        DomainModel::UnitCircle | DomainModel::ClosedUnitDisk => z.norm().ln().max(0.0),
        _ => exterior_map(domain, z).norm().ln().max(0.0),
    }
}

/// `μ_E(S)` for a sector of the matching kind.
pub fn equilibrium_measure(domain: &DomainModel, sector: &Sector) -> Result<f64, PotentialError> {
    sector.validate_for(domain)?;
    Ok(match (*sector, *domain) {
        (Sector::Annular { alpha, beta, .. }, _)
        | (Sector::TwoSided { alpha, beta, .. }, _)
        | (Sector::Parameter { alpha, beta, .. }, _) => ((beta - alpha) / TAU).min(1.0),
        (Sector::Strip { x1, x2 }, DomainModel::Interval { a, b }) => {
            let (c, hw) = ((a + b) / 2.0, (b - a) / 2.0);
            let s = |x: f64| ((x - c) / hw).clamp(-1.0, 1.0).asin();
            (s(x2) - s(x1)) / PI
        }
        _ => unreachable!("validated"),
    })
}

/// Half-open membership test. Mismatched domain/sector pairs return `false`;
/// call [`Sector::validate_for`] first to reject them.
pub fn sector_contains(domain: &DomainModel, sector: &Sector, z: Complex64) -> bool {
    match (*sector, *domain) {
        (Sector::Annular { r, alpha, beta }, DomainModel::UnitCircle) => {
            let m = z.norm();
            r <= m && m < 1.0 / r && angle_in(arg_0_2pi(z), alpha, beta)
        }
        (Sector::TwoSided { r, alpha, beta }, DomainModel::ClosedUnitDisk) => {
            let m = z.norm();
            1.0 / r <= m && m < r && angle_in(arg_0_2pi(z), alpha, beta)
        }
        (Sector::Strip { x1, x2 }, DomainModel::Interval { .. }) => x1 <= z.re && z.re < x2,
        (Sector::Parameter { r, alpha, beta }, DomainModel::Ellipse { .. }) => {
            let w = exterior_map(domain, z);
            let m = w.norm();
            1.0 / r <= m && m < r && angle_in(arg_0_2pi(w), alpha, beta)
        }
        _ => false,
    }
}
