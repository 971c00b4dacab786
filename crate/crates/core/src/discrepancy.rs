//! Zero counting measures, sector discrepancies and the discrepancy bounds.
//!
//! The three bounds share the bracket
//!
//! ```text
//! (1/n) · ( (m/t) log Σ E|A_k|^t + basis term − log-moment term )
//! ```
//!
//! with `m = 1` for the circle and arc bounds and `m = 2` for domains with
//! interior. [`kac_bound`] has the explicit constant `C_r`; [`arc_bound`] has
//! `C = 8` on intervals; every other constant is unknown and reported as 1
//! with `constant_known = false`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ensembles::MomentEstimate;
use crate::polyroots::RootSet;
use crate::potential::{equilibrium_measure, sector_contains, DomainModel, PotentialError, Sector};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiscrepancyError {
    #[error("root set did not converge (max residual {max_residual:e}); pass the override to use it anyway")]
    NotConverged { max_residual: f64 },
    #[error("bound bracket is negative ({bracket:e}): {detail}")]
    NegativeBracket { bracket: f64, detail: String },
    #[error("invalid bound input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Sector(#[from] PotentialError),
}

/// `τ_n = (1/n) Σ δ_{Z_k}`; deflated roots sit at infinity and keep their mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroCountingMeasure {
    pub atoms: Vec<Complex64>,
    pub at_infinity: usize,
}

impl ZeroCountingMeasure {
    pub fn from_atoms(atoms: Vec<Complex64>) -> Self {
        Self { atoms, at_infinity: 0 }
    }

    /// Nominal degree `n`.
    pub fn degree(&self) -> usize {
        self.atoms.len() + self.at_infinity
    }

    pub fn mass_per_atom(&self) -> f64 {
        1.0 / self.degree() as f64
    }

    /// `τ_n({z : pred(z)})` over finite atoms.
    pub fn measure_where(&self, pred: impl Fn(Complex64) -> bool) -> f64 {
        let hits = self.atoms.iter().filter(|&&z| pred(z)).count();
        hits as f64 / self.degree() as f64
    }

    /// `τ_n(ℂ)`: 1 unless roots were deflated to infinity.
    pub fn finite_mass(&self) -> f64 {
        self.measure_where(|_| true)
    }

    pub fn sector(&self, domain: &DomainModel, sector: &Sector) -> f64 {
        self.measure_where(|z| sector_contains(domain, sector, z))
    }
}

/// Builds `τ_n`; non-converged sets need `allow_unconverged`.
pub fn counting_measure(roots: &RootSet, allow_unconverged: bool) -> Result<ZeroCountingMeasure, DiscrepancyError> {
    if !roots.converged && !allow_unconverged {
        return Err(DiscrepancyError::NotConverged {
            max_residual: roots.max_residual(),
        });
    }
    Ok(ZeroCountingMeasure {
        atoms: roots.roots.clone(),
        at_infinity: roots.at_infinity,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyRow {
    pub sector_id: usize,
    pub sector: Sector,
    pub tau: f64,
    pub mu: f64,
    pub diff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyReport {
    pub rows: Vec<DiscrepancyRow>,
    pub sup: f64,
    /// `1 - Σ τ` over the family: zeros outside every sector.
    pub uncovered_mass: f64,
}

impl DiscrepancyReport {
    /// CSV with header `sector_id,tau,mu,diff`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("sector_id,tau,mu,diff\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{},{}\n", r.sector_id, r.tau, r.mu, r.diff));
        }
        out
    }
}

pub fn sector_discrepancy(
    tau: &ZeroCountingMeasure,
    domain: &DomainModel,
    sectors: &[Sector],
) -> Result<DiscrepancyReport, DiscrepancyError> {
    let mut rows = Vec::with_capacity(sectors.len());
    for (sector_id, s) in sectors.iter().enumerate() {
        let mu = equilibrium_measure(domain, s)?;
        let t = tau.sector(domain, s);
        rows.push(DiscrepancyRow {
            sector_id,
            sector: *s,
            tau: t,
            mu,
            diff: (t - mu).abs(),
        });
    }
    let sup = rows.iter().map(|r| r.diff).fold(0.0, f64::max);
    let covered: f64 = rows.iter().map(|r| r.tau).sum();
    Ok(DiscrepancyReport {
        rows,
        sup,
        uncovered_mass: (1.0 - covered).max(0.0),
    })
}

/// `Σ_{k≤k_max} (-1)^k / (2k+1)²`.
pub fn catalan_partial(k_max: usize) -> f64 {
    (0..=k_max)
        .map(|k| {
            let s = if k % 2 == 0 { 1.0 } else { -1.0 };
            s / ((2 * k + 1) as f64).powi(2)
        })
        .sum()
}

/// Catalan's constant by Cohen–Rodriguez Villegas–Zagier acceleration of the
/// alternating series.
pub fn catalan_constant() -> f64 {
    let n = 24usize;
    let mut d = (3.0 + 8f64.sqrt()).powi(n as i32);
    d = (d + 1.0 / d) / 2.0;
    let mut b = -1.0;
    let mut c = -d;
    let mut s = 0.0;
    for k in 0..n {
        c = b - c;
        s += c / ((2 * k + 1) as f64).powi(2);
        let (kf, nf) = (k as f64, n as f64);
        b *= (kf + nf) * (kf - nf) / ((kf + 0.5) * (kf + 1.0));
    }
    s / d
}

/// `C_r = √(2π/𝐤) + 2/(1-r)`.
pub fn c_r(r: f64) -> f64 {
    (2.0 * std::f64::consts::PI / catalan_constant()).sqrt() + 2.0 / (1.0 - r)
}

/// Where a moment value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    ClosedForm,
    Empirical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub n: usize,
    pub t: f64,
    /// `Σ_k E|A_k|^t`
    pub sum_t_moments: f64,
    /// `E log|A_0|`
    pub log_moment_first: Option<f64>,
    /// `E log|A_n|`
    pub log_moment_last: f64,
    /// `E log|A_n P_n(w)|`
    pub log_moment_at_w: Option<f64>,
    /// `max_{k≤n} ‖B_k‖_E`
    pub basis_max_norm: f64,
    /// `log(|b_{n,n}| cap(E)^n)`
    pub log_leading: f64,
    /// Sector parameter.
    pub r: f64,
    pub provenance: Provenance,
}

impl BoundInputs {
    /// Monomial-basis inputs (`‖z^k‖ = 1`, leading term 1).
    pub fn kac(n: usize, t: f64, sum_t_moments: f64, first: f64, last: f64, r: f64, provenance: Provenance) -> Self {
        Self {
            n,
            t,
            sum_t_moments,
            log_moment_first: Some(first),
            log_moment_last: last,
            log_moment_at_w: None,
            basis_max_norm: 1.0,
            log_leading: 0.0,
            r,
            provenance,
        }
    }

    fn validate(&self) -> Result<(), DiscrepancyError> {
        let bad = |m: String| Err(DiscrepancyError::InvalidInput(m));
        if self.n == 0 {
            return bad("n must be positive".into());
        }
        if !(self.t > 0.0 && self.t <= 1.0) {
            return bad(format!("t must lie in (0, 1], got {}", self.t));
        }
        if !(self.sum_t_moments > 0.0 && self.sum_t_moments.is_finite()) {
            return bad(format!("Σ E|A_k|^t must be positive and finite, got {}", self.sum_t_moments));
        }
        if !self.log_moment_last.is_finite() {
            return bad("E log|A_n| must be finite".into());
        }
        if !(self.basis_max_norm > 0.0 && self.basis_max_norm.is_finite()) || !self.log_leading.is_finite() {
            return bad("basis norm and leading term must be finite and positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundValue {
    pub value: f64,
    pub bracket: f64,
    pub constant: f64,
    /// False when the constant is unknown and 1 was used.
    pub constant_known: bool,
    pub provenance: Provenance,
}

impl BoundValue {
    pub fn qualifier(&self) -> &'static str {
        if self.constant_known {
            ""
        } else {
            "up to an absolute constant"
        }
    }
}

fn finish(bracket: f64, constant: f64, known: bool, inputs: &BoundInputs, detail: String) -> Result<BoundValue, DiscrepancyError> {
    if !(bracket >= 0.0) {
        return Err(DiscrepancyError::NegativeBracket { bracket, detail });
    }
    Ok(BoundValue {
        value: constant * bracket.sqrt(),
        bracket,
        constant,
        constant_known: known,
        provenance: inputs.provenance,
    })
}

/// Bound on the expected annular-sector discrepancy for the unit circle.
pub fn kac_bound(inputs: &BoundInputs) -> Result<BoundValue, DiscrepancyError> {
    inputs.validate()?;
    let first = inputs
        .log_moment_first
        .filter(|x| x.is_finite())
        .ok_or_else(|| DiscrepancyError::InvalidInput("E log|A_0| must be finite".into()))?;
    if !(inputs.r > 0.0 && inputs.r < 1.0) {
        return Err(DiscrepancyError::InvalidInput(format!("r must lie in (0, 1), got {}", inputs.r)));
    }
    let log_sum = inputs.sum_t_moments.ln() / inputs.t;
    let bracket = (log_sum - 0.5 * (first + inputs.log_moment_last)) / inputs.n as f64;
    let detail = format!(
        "(1/t) log Σ E|A_k|^t = {log_sum}, E log|A_0| = {first}, E log|A_n| = {}",
        inputs.log_moment_last
    );
    finish(bracket, c_r(inputs.r), true, inputs, detail)
}

/// Bound for sets without interior (generalized sectors around an arc);
/// `C = 8` on intervals, unknown otherwise.
pub fn arc_bound(inputs: &BoundInputs, domain: &DomainModel) -> Result<BoundValue, DiscrepancyError> {
    inputs.validate()?;
    let log_sum = inputs.sum_t_moments.ln() / inputs.t;
    let basis_term = inputs.basis_max_norm.ln() - inputs.log_leading;
    let bracket = (log_sum + basis_term - inputs.log_moment_last) / inputs.n as f64;
    let detail = format!(
        "(1/t) log Σ E|A_k|^t = {log_sum}, log(max‖B_k‖ / |b_nn| cap^n) = {basis_term}, E log|A_n| = {}",
        inputs.log_moment_last
    );
    let (c, known) = match domain {
        DomainModel::Interval { .. } => (8.0, true),
        _ => (1.0, false),
    };
    finish(bracket, c, known, inputs, detail)
}

/// Bound for sets with interior, using `E log|A_n P_n(w)|` at an interior point.
pub fn disk_bound(inputs: &BoundInputs) -> Result<BoundValue, DiscrepancyError> {
    inputs.validate()?;
    let at_w = inputs
        .log_moment_at_w
        .filter(|x| x.is_finite())
        .ok_or_else(|| DiscrepancyError::InvalidInput("E log|A_n P_n(w)| must be finite".into()))?;
    let log_sum = 2.0 * inputs.sum_t_moments.ln() / inputs.t;
    let basis_term = 2.0 * inputs.basis_max_norm.ln() - inputs.log_leading;
    let bracket = (log_sum + basis_term - at_w) / inputs.n as f64;
    let detail = format!(
        "(2/t) log Σ E|A_k|^t = {log_sum}, log(max‖B_k‖² / |b_nn| cap^n) = {basis_term}, E log|A_n P_n(w)| = {at_w}"
    );
    finish(bracket, 1.0, false, inputs, detail)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogSumOutcome {
    pub lhs: f64,
    pub rhs: f64,
    pub combined_se: f64,
    pub holds: bool,
}

/// Checks `E log Σ|A_k| ≤ (1/t) log Σ E|A_k|^t` within three combined
/// standard errors (delta method for the right side).
pub fn log_sum_check(t_moments: &[MomentEstimate], t: f64, sample_log_sum: &MomentEstimate) -> LogSumOutcome {
    let s: f64 = t_moments.iter().map(|m| m.estimate).sum();
    let var_s: f64 = t_moments.iter().map(|m| m.std_error * m.std_error).sum();
    let rhs = s.ln() / t;
    let se_rhs = var_s.sqrt() / (s * t);
    let combined_se = (se_rhs * se_rhs + sample_log_sum.std_error * sample_log_sum.std_error).sqrt();
    let lhs = sample_log_sum.estimate;
    LogSumOutcome {
        lhs,
        rhs,
        combined_se,
        holds: lhs <= rhs + 3.0 * combined_se + 1e-12 * rhs.abs().max(1.0),
    }
}

/// Per-run summary written next to the CSV rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancySummary {
    pub sup_discrepancy: f64,
    pub bound: Option<f64>,
    pub dominance: Option<bool>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polyroots::{find_roots, ComplexPolynomial, RootOptions};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn roots_of(c: &[f64]) -> RootSet {
        find_roots(&ComplexPolynomial::from_real(c).unwrap(), &RootOptions::default())
    }

    #[test]
    fn counting_measure_basics() {
        let tau = counting_measure(&roots_of(&[-1.0, 0.0, 0.0, 0.0, 1.0]), false).unwrap();
        assert_eq!(tau.degree(), 4);
        assert_eq!(tau.mass_per_atom(), 0.25);
        assert_eq!(tau.finite_mass(), 1.0);
        let tau = counting_measure(&roots_of(&[1.0; 6]), false).unwrap();
        let s = Sector::Annular { r: 0.5, alpha: 0.0, beta: 2.0 * PI };
        assert_eq!(tau.sector(&DomainModel::UnitCircle, &s), 1.0);
    }

    #[test]
    fn unconverged_needs_override() {
        let mut set = roots_of(&[-1.0, 0.0, 1.0]);
        set.converged = false;
        assert!(matches!(counting_measure(&set, false), Err(DiscrepancyError::NotConverged { .. })));
        assert!(counting_measure(&set, true).is_ok());
    }

    #[test]
    fn half_circle_example() {
        let tau = counting_measure(&roots_of(&[1.0; 6]), false).unwrap();
        let s = Sector::Annular { r: 0.5, alpha: 0.0, beta: PI };
        // e^{iπ} is computed with a tiny imaginary part of either sign; pin it
        let atoms: Vec<_> = tau
            .atoms
            .iter()
            .map(|z| if (z + 1.0).norm() < 1e-10 { Complex64::new(-1.0, 0.0) } else { *z })
            .collect();
        let tau = ZeroCountingMeasure::from_atoms(atoms);
        let rep = sector_discrepancy(&tau, &DomainModel::UnitCircle, &[s]).unwrap();
        assert!((rep.rows[0].tau - 0.4).abs() < 1e-15);
        assert!((rep.sup - 0.1).abs() < 1e-12);
        let full = Sector::Annular { r: 0.5, alpha: 0.0, beta: 2.0 * PI };
        assert_eq!(sector_discrepancy(&tau, &DomainModel::UnitCircle, &[full]).unwrap().sup, 0.0);
    }

    #[test]
    fn strips_are_additive() {
        let d = DomainModel::interval(-1.0, 1.0);
        let tau = ZeroCountingMeasure::from_atoms(vec![
            Complex64::new(-0.5, 0.1),
            Complex64::new(0.2, -3.0),
            Complex64::new(0.7, 0.0),
            Complex64::new(1.5, 0.0),
        ]);
        let rep = sector_discrepancy(&tau, &d, &d.partition(2, 0.0)).unwrap();
        let t: f64 = rep.rows.iter().map(|r| r.tau).sum();
        let m: f64 = rep.rows.iter().map(|r| r.mu).sum();
        assert!((t - 0.75).abs() < 1e-15 && (m - 1.0).abs() < 1e-15);
        assert!((rep.uncovered_mass - 0.25).abs() < 1e-15);
        for r in &rep.rows {
            assert_eq!(r.diff, (r.tau - r.mu).abs());
        }
        assert!(rep.to_csv().starts_with("sector_id,tau,mu,diff\n0,"));
    }

    #[test]
    fn catalan_values() {
        assert!((catalan_constant() - 0.915_965_594_177_219).abs() < 1e-14);
        assert!((catalan_partial(1) - (1.0 - 1.0 / 9.0)).abs() < 1e-16);
        // oracle: pairwise-averaged partial sums of the plain series
        let (a, b) = (catalan_partial(2_000_000), catalan_partial(2_000_001));
        assert!(((a + b) / 2.0 - catalan_constant()).abs() < 1e-12);
        assert!((c_r(0.5) - 6.6191).abs() < 1e-4);
        assert!((c_r(0.5) - ((2.0 * PI / catalan_constant()).sqrt() + 4.0)).abs() < 1e-15);
    }

    #[test]
    fn kac_bound_gaussian_512() {
        let n = 512;
        let g = crate::EULER_GAMMA;
        let inputs = BoundInputs::kac(n, 1.0, 513.0 * PI.sqrt() / 2.0, -g / 2.0, -g / 2.0, 0.5, Provenance::ClosedForm);
        let b = kac_bound(&inputs).unwrap();
        assert!((b.bracket - 0.012516).abs() < 1e-6, "{}", b.bracket);
        assert!((b.value - 0.7405).abs() < 5e-4, "{}", b.value);
        assert!(b.constant_known);
    }

    #[test]
    fn kac_bound_rademacher_substitution() {
        for n in [10usize, 100, 1000] {
            let inputs = BoundInputs::kac(n, 1.0, (n + 1) as f64, 0.0, 0.0, 0.3, Provenance::ClosedForm);
            let b = kac_bound(&inputs).unwrap();
            let want = c_r(0.3) * (((n + 1) as f64).ln() / n as f64).sqrt();
            assert!((b.value - want).abs() < 1e-14);
        }
    }

    #[test]
    fn kac_bound_quarter_scaling() {
        let at = |n: usize| kac_bound(&BoundInputs::kac(n, 1.0, 50.0, -0.3, -0.3, 0.5, Provenance::ClosedForm)).unwrap().value;
        assert!((at(400) / at(100) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn negative_bracket_is_an_error() {
        let inputs = BoundInputs::kac(10, 1.0, 1.0, 5.0, 5.0, 0.5, Provenance::Empirical);
        match kac_bound(&inputs) {
            Err(DiscrepancyError::NegativeBracket { detail, .. }) => assert!(detail.contains("E log|A_0| = 5")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn arc_bound_chebyshev_rademacher() {
        let n = 200;
        let mut inputs = BoundInputs::kac(n, 1.0, (n + 1) as f64, 0.0, 0.0, 0.5, Provenance::ClosedForm);
        inputs.basis_max_norm = 2f64.sqrt();
        inputs.log_leading = (2f64.sqrt() / 2.0).ln();
        let d = DomainModel::interval(-1.0, 1.0);
        let b = arc_bound(&inputs, &d).unwrap();
        let want = 8.0 * ((((n + 1) as f64).ln() + 2f64.ln()) / n as f64).sqrt();
        assert!((b.value - want).abs() < 1e-13);
        assert!(b.constant_known);
        inputs.r = 0.9;
        assert_eq!(arc_bound(&inputs, &d).unwrap().value, b.value);
        let e = arc_bound(&inputs, &DomainModel::Ellipse { r: 2.0 }).unwrap();
        assert!(!e.constant_known && e.constant == 1.0);
        assert_eq!(e.qualifier(), "up to an absolute constant");
    }

    #[test]
    fn disk_bound_bergman_leading_is_negative_log_term() {
        let n = 100;
        let lead = (101.0 / PI).sqrt();
        let mut inputs = BoundInputs::kac(n, 1.0, 101.0, 0.0, 0.0, 1.5, Provenance::ClosedForm);
        inputs.basis_max_norm = lead;
        inputs.log_leading = lead.ln();
        inputs.log_moment_at_w = Some(0.0);
        let b = disk_bound(&inputs).unwrap();
        assert!(lead > 1.0);
        let without = (2.0 * 101f64.ln() + 2.0 * lead.ln()) / n as f64;
        assert!(b.bracket < without);
        assert!(!b.constant_known);
        inputs.log_moment_at_w = None;
        assert!(disk_bound(&inputs).is_err());
    }

    #[test]
    fn log_sum_rademacher_equality() {
        let t: Vec<_> = (0..10).map(|_| MomentEstimate::exact(1.0)).collect();
        let out = log_sum_check(&t, 1.0, &MomentEstimate::exact(10f64.ln()));
        assert!(out.holds);
        assert!((out.lhs - out.rhs).abs() < 1e-15);
    }

    #[test]
    fn rotation_moves_sectors() {
        let tau = counting_measure(&roots_of(&[0.3, -1.0, 0.2, 0.5, 1.0, 0.7, -0.4, 1.0]), false).unwrap();
        let theta = 0.7;
        let rot = Complex64::from_polar(1.0, theta);
        let moved = ZeroCountingMeasure::from_atoms(tau.atoms.iter().map(|z| z * rot).collect());
        let d = DomainModel::UnitCircle;
        for s in d.partition(5, 0.4) {
            if let Sector::Annular { r, alpha, beta } = s {
                let shifted = Sector::Annular { r, alpha: alpha + theta, beta: beta + theta };
                let a = sector_discrepancy(&tau, &d, &[s]).unwrap().sup;
                let b = sector_discrepancy(&moved, &d, &[shifted]).unwrap().sup;
                assert!((a - b).abs() < 1e-15);
            }
        }
    }

    proptest! {
        #[test]
        fn kac_bound_decreases_in_n(n in 2usize..5000, sum in 1.5f64..100.0, l in -3.0f64..0.0) {
            let at = |n: usize| kac_bound(&BoundInputs::kac(n, 1.0, sum, l, l, 0.5, Provenance::ClosedForm)).unwrap().value;
            prop_assert!(at(n + 1) < at(n));
        }

        #[test]
        fn partitions_conserve_mass(seed in 0u64..500, m in 1usize..12) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let atoms: Vec<_> = (0..30).map(|_| Complex64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0))).collect();
            let tau = ZeroCountingMeasure::from_atoms(atoms);
            for d in [DomainModel::UnitCircle, DomainModel::ClosedUnitDisk, DomainModel::interval(-1.0, 1.0), DomainModel::Ellipse { r: 2.0 }] {
                let r = if d == DomainModel::UnitCircle { 0.5 } else { 1.5 };
                let rep = sector_discrepancy(&tau, &d, &d.partition(m, r)).unwrap();
                let mu: f64 = rep.rows.iter().map(|x| x.mu).sum();
                let t: f64 = rep.rows.iter().map(|x| x.tau).sum();
                prop_assert!((mu - 1.0).abs() < 1e-12);
                prop_assert!(t <= 1.0 + 1e-15);
                let inside = tau.measure_where(|z| rep.rows.iter().any(|x| crate::potential::sector_contains(&d, &x.sector, z)));
                prop_assert!((t - inside).abs() < 1e-12);
            }
        }
    }
}
