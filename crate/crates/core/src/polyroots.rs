//! Simultaneous root finding by Ehrlich–Aberth iteration.
//!
//! The iteration only needs the Newton ratio `p/p'` and a backward-error
//! residual at a point, so it is written against the [`RootTarget`] trait.
//! [`ComplexPolynomial`] implements it with Horner's scheme (switching to the
//! reversed polynomial in `1/z` outside the unit disk); basis expansions with a
//! recurrence implement it in [`crate::bases`].
//!
//! A root is certified when `|P(z)| ≤ tol · Σ_j |c_j||z|^j`, the standard
//! backward-stability test: `z` is an exact root of a polynomial whose
//! coefficients differ from `c_j` by a relative amount of at most `tol`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Leading coefficients below this fraction of `max |c_j|` are dropped.
pub const LEADING_GUARD: f64 = 1e-300;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RootError {
    #[error("polynomial has degree 0 (nothing to solve)")]
    ZeroDegree,
    #[error("coefficient {index} is not finite")]
    NonFinite { index: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RootOptions {
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for RootOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iters: 200,
        }
    }
}

/// Result of one Newton evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonEval {
    /// `p(z) / p'(z)`
    pub ratio: Complex64,
    /// `|p(z)| / Σ |terms|`
    pub residual: f64,
}

/// Anything Ehrlich–Aberth can iterate on.
pub trait RootTarget {
    fn degree(&self) -> usize;
    fn newton(&self, z: Complex64) -> NewtonEval;
}

/// Monomial-form polynomial `Σ c_j z^j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexPolynomial {
    coeffs: Vec<Complex64>,
    /// `c_j / scale` for the retained (deflated) coefficients; `max |·| = 1`.
    normalized: Vec<Complex64>,
    scale: f64,
    /// Exact zero roots split off from vanishing low-order coefficients.
    zero_roots: usize,
    /// Roots sent to infinity by dropping negligible leading coefficients.
    deflated: usize,
}

impl ComplexPolynomial {
    /// Builds from `c_0..c_n`. Fails only for non-finite input or when every
    /// coefficient past `c_0` vanishes.
    pub fn new(coeffs: Vec<Complex64>) -> Result<Self, RootError> {
        if let Some(index) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(RootError::NonFinite { index });
        }
        let scale = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if scale == 0.0 || coeffs.len() < 2 {
            return Err(RootError::ZeroDegree);
        }
        let mut hi = coeffs.len() - 1;
        while hi > 0 && coeffs[hi].norm() <= LEADING_GUARD * scale {
            hi -= 1;
        }
        let lo = coeffs.iter().position(|c| c.norm() != 0.0).unwrap_or(0);
        if hi == 0 && lo == 0 {
            return Err(RootError::ZeroDegree);
        }
        let deflated = coeffs.len() - 1 - hi;
        let normalized = coeffs[lo..=hi].iter().map(|c| c / scale).collect();
        Ok(Self {
            coeffs,
            normalized,
            scale,
            zero_roots: lo,
            deflated,
        })
    }

    pub fn from_real(coeffs: &[f64]) -> Result<Self, RootError> {
        Self::new(coeffs.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    /// Nominal degree `n` (length of the input minus one).
    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Number of leading coefficients dropped by the `LEADING_GUARD` test.
    pub fn deflated(&self) -> usize {
        self.deflated
    }

    /// Exact root of a degree-one core, from the unscaled coefficients.
    fn linear_root(&self) -> Complex64 {
        let lo = self.zero_roots;
        -self.coeffs[lo] / self.coeffs[lo + 1]
    }

    fn core(&self) -> HornerTarget<'_> {
        HornerTarget { c: &self.normalized }
    }
}

/// `(P(z), P'(z))` by Horner's scheme on the original coefficients.
pub fn evaluate(poly: &ComplexPolynomial, z: Complex64) -> (Complex64, Complex64) {
    horner(&poly.coeffs, z)
}

fn horner(c: &[Complex64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &a in c.iter().rev() {
        dp = dp * z + p;
        p = p * z + a;
    }
    (p, dp)
}

struct HornerTarget<'a> {
    c: &'a [Complex64],
}

/// `a / b` without squaring `|b|`, so tiny or huge operands stay finite.
pub fn cdiv(a: Complex64, b: Complex64) -> Complex64 {
    if b.re.abs() >= b.im.abs() {
        if b.re == 0.0 {
            return a / b;
        }
        let r = b.im / b.re;
        let d = b.re + b.im * r;
        Complex64::new((a.re + a.im * r) / d, (a.im - a.re * r) / d)
    } else {
        let r = b.re / b.im;
        let d = b.re * r + b.im;
        Complex64::new((a.re * r + a.im) / d, (a.im * r - a.re) / d)
    }
}

fn cinv(z: Complex64) -> Complex64 {
    cdiv(Complex64::new(1.0, 0.0), z)
}

impl RootTarget for HornerTarget<'_> {
    fn degree(&self) -> usize {
        self.c.len() - 1
    }

    fn newton(&self, z: Complex64) -> NewtonEval {
        let n = self.degree();
        let zn = z.norm();
        if zn <= 1.0 {
            let mut p = Complex64::new(0.0, 0.0);
            let mut dp = Complex64::new(0.0, 0.0);
            let mut s = 0.0;
            for &a in self.c.iter().rev() {
                dp = dp * z + p;
                p = p * z + a;
                s = s * zn + a.norm();
            }
            NewtonEval {
                ratio: cdiv(p, dp),
                residual: p.norm() / s,
            }
        } else {
            // P(z) = z^n Q(w), w = 1/z, Q(w) = Σ c_{n-j} w^j
            let w = cinv(z);
            let wn = w.norm();
            let mut q = Complex64::new(0.0, 0.0);
            let mut dq = Complex64::new(0.0, 0.0);
            let mut s = 0.0;
            for &a in self.c.iter() {
                dq = dq * w + q;
                q = q * w + a;
                s = s * wn + a.norm();
            }
            // P/P' = z Q / (n Q - w Q')
            let ratio = z * cdiv(q, q * n as f64 - w * dq);
            NewtonEval {
                ratio,
                residual: q.norm() / s,
            }
        }
    }
}

impl RootTarget for ComplexPolynomial {
    fn degree(&self) -> usize {
        self.normalized.len() - 1
    }

    fn newton(&self, z: Complex64) -> NewtonEval {
        self.core().newton(z)
    }
}

/// Computed zeros with per-root certificates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootSet {
    pub roots: Vec<Complex64>,
    /// Backward residual `|P(Z)| / Σ |c_j||Z|^j` per root.
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Roots at infinity from leading-coefficient deflation.
    pub at_infinity: usize,
    pub warnings: Vec<String>,
}

impl RootSet {
    /// Finite roots plus roots at infinity.
    pub fn nominal_degree(&self) -> usize {
        self.roots.len() + self.at_infinity
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }
}

/// Starting points from the upper convex hull of `(j, log|c_j|)`.
///
/// Each hull edge from `j1` to `j2` contributes `j2 - j1` points on a circle of
/// radius `(|c_j1|/|c_j2|)^{1/(j2-j1)}`, equispaced with an angular offset that
/// depends on `j1` plus a fixed irrational shift. Degree one returns the exact
/// root.
pub fn initial_guesses(poly: &ComplexPolynomial) -> Vec<Complex64> {
    let c = &poly.normalized;
    let n = c.len() - 1;
    if n == 0 {
        return Vec::new();
    }
    if n == 1 {
        return vec![poly.linear_root()];
    }
    newton_polygon_guesses(c)
}

/// Relative distance below which two iterates count as collapsed.
const COINCIDENT: f64 = 1e-10;
/// Residual under which a root whose corrections reach rounding level is kept.
const STALL_RESIDUAL: f64 = 1e-8;

/// Fixed angular shift (radians) that breaks conjugate symmetry of the guesses.
const GUESS_OFFSET: f64 = 0.4;

fn newton_polygon_guesses(c: &[Complex64]) -> Vec<Complex64> {
    let n = c.len() - 1;
    let pts: Vec<(usize, f64)> = c
        .iter()
        .enumerate()
        .filter(|(_, a)| a.norm() > 0.0)
        .map(|(j, a)| (j, a.norm().ln()))
        .collect();
    // monotone chain, upper hull
    let mut hull: Vec<(usize, f64)> = Vec::new();
    for &p in &pts {
        while hull.len() >= 2 {
            let (x1, y1) = hull[hull.len() - 2];
            let (x2, y2) = hull[hull.len() - 1];
            let cross = (x2 as f64 - x1 as f64) * (p.1 - y1) - (y2 - y1) * (p.0 as f64 - x1 as f64);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    let mut out = Vec::with_capacity(n);
    for w in hull.windows(2) {
        let ((j1, l1), (j2, l2)) = (w[0], w[1]);
        let m = j2 - j1;
        let radius = ((l1 - l2) / m as f64).exp();
        for i in 0..m {
            let angle = 2.0 * PI * (i as f64 / m as f64 + j1 as f64 / n as f64) + GUESS_OFFSET;
            out.push(Complex64::from_polar(radius, angle));
        }
    }
    out
}

/// Ehrlich–Aberth iteration from the given starting points.
///
/// Gauss–Seidel style: each sweep updates roots in place. A root stops moving
/// one polishing step after its residual first drops below `tol`, or when its
/// correction falls under a few ulps.
pub fn aberth<T: RootTarget + ?Sized>(target: &T, mut z: Vec<Complex64>, opts: &RootOptions) -> RootSet {
    let n = z.len();
    debug_assert_eq!(n, target.degree());
    let mut frozen = vec![false; n];
    let mut polished = vec![false; n];
    let mut residuals = vec![f64::INFINITY; n];
    let mut iterations = 0;
    let mut nudge = 0u32;
    while iterations < opts.max_iters {
        iterations += 1;
        let mut active = false;
        for i in 0..n {
            if frozen[i] {
                continue;
            }
            let ev = target.newton(z[i]);
            residuals[i] = ev.residual;
            if ev.residual <= opts.tol {
                if polished[i] {
                    frozen[i] = true;
                    continue;
                }
                polished[i] = true;
            }
            active = true;
            let zi = z[i];
            let mut s = Complex64::new(0.0, 0.0);
            let mut nearest = f64::INFINITY;
            for (j, &zj) in z.iter().enumerate() {
                if j != i {
                    s += cinv(zi - zj);
                    nearest = nearest.min((zi - zj).norm());
                }
            }
            let mut step = cdiv(ev.ratio, Complex64::new(1.0, 0.0) - ev.ratio * s);
            let collapsed = nearest <= COINCIDENT * (1.0 + zi.norm()) && ev.residual > opts.tol;
            if !step.is_finite() || collapsed {
                // two iterates stuck together away from a root, or a stationary
                // point: push this one off by the Newton distance
                nudge += 1;
                let r = ev.ratio.norm().min(1.0 + zi.norm()).max(1e-8 * (1.0 + zi.norm()));
                let r = if r.is_finite() { r } else { 1e-8 * (1.0 + zi.norm()) };
                step = Complex64::from_polar(r, 1.0 + nudge as f64);
            }
            z[i] = zi - step;
            if step.norm() <= 4.0 * f64::EPSILON * z[i].norm() && ev.residual <= STALL_RESIDUAL {
                frozen[i] = true;
            }
        }
        if !active {
            break;
        }
    }
    for i in 0..n {
        residuals[i] = target.newton(z[i]).residual;
    }
    let converged = residuals.iter().all(|&r| r <= opts.tol);
    RootSet {
        roots: z,
        residuals,
        iterations,
        converged,
        at_infinity: 0,
        warnings: Vec::new(),
    }
}

/// All zeros of `poly`.
pub fn find_roots(poly: &ComplexPolynomial, opts: &RootOptions) -> RootSet {
    let core = poly.core();
    let n = core.degree();
    let mut set = if n == 0 {
        RootSet {
            roots: Vec::new(),
            residuals: Vec::new(),
            iterations: 0,
            converged: true,
            at_infinity: 0,
            warnings: Vec::new(),
        }
    } else if n == 1 {
        let root = poly.linear_root();
        RootSet {
            roots: vec![root],
            residuals: vec![core.newton(root).residual],
            iterations: 0,
            converged: true,
            at_infinity: 0,
            warnings: Vec::new(),
        }
    } else {
        aberth(&core, initial_guesses(poly), opts)
    };
    if poly.zero_roots > 0 {
        set.roots.splice(0..0, std::iter::repeat_n(Complex64::new(0.0, 0.0), poly.zero_roots));
        set.residuals.splice(0..0, std::iter::repeat_n(0.0, poly.zero_roots));
    }
    if poly.deflated > 0 {
        set.at_infinity = poly.deflated;
        set.warnings.push(format!(
            "leading coefficient below {LEADING_GUARD:e} of max |c_j|: degree deflated by {}",
            poly.deflated
        ));
    }
    if !set.converged {
        set.warnings.push(format!(
            "no convergence after {} sweeps (max residual {:e})",
            set.iterations,
            set.max_residual()
        ));
    }
    set
}

/// Coefficients of `∏ (z - r_m)`, lowest degree first.
pub fn poly_from_roots(roots: &[Complex64]) -> Vec<Complex64> {
    let mut c = vec![Complex64::new(1.0, 0.0)];
    for &r in roots {
        let mut next = vec![Complex64::new(0.0, 0.0); c.len() + 1];
        for (j, &a) in c.iter().enumerate() {
            next[j + 1] += a;
            next[j] -= a * r;
        }
        c = next;
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Greedy matching distance between two root multisets.
    fn match_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
        assert_eq!(a.len(), b.len());
        let mut used = vec![false; b.len()];
        let mut worst: f64 = 0.0;
        for &x in a {
            let (j, d) = b
                .iter()
                .enumerate()
                .filter(|(j, _)| !used[*j])
                .map(|(j, &y)| (j, (x - y).norm()))
                .min_by(|p, q| p.1.total_cmp(&q.1))
                .unwrap();
            used[j] = true;
            worst = worst.max(d);
        }
        worst
    }

    #[test]
    fn quartic_roots_of_unity() {
        let p = ComplexPolynomial::from_real(&[-1.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        let r = find_roots(&p, &RootOptions::default());
        assert!(r.converged);
        let expect = [c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0), c(0.0, -1.0)];
        assert!(match_distance(&r.roots, &expect) < 1e-12);
    }

    #[test]
    fn identical_coefficients_give_roots_of_unity_but_one() {
        let p = ComplexPolynomial::from_real(&[1.0; 6]).unwrap();
        let r = find_roots(&p, &RootOptions::default());
        assert!(r.converged);
        let expect: Vec<_> = (1..6).map(|k| Complex64::from_polar(1.0, 2.0 * PI * k as f64 / 6.0)).collect();
        assert!(match_distance(&r.roots, &expect) < 1e-10);
    }

    #[test]
    fn integer_roots_from_expanded_product() {
        let roots: Vec<_> = (1..=10).map(|m| c(m as f64, 0.0)).collect();
        let p = ComplexPolynomial::new(poly_from_roots(&roots)).unwrap();
        let r = find_roots(&p, &RootOptions::default());
        assert!(r.converged);
        assert!(match_distance(&r.roots, &roots) < 1e-6);
    }

    #[test]
    fn horner_examples() {
        let p = ComplexPolynomial::from_real(&[1.0, 0.0, 1.0]).unwrap();
        assert_eq!(evaluate(&p, c(0.0, 1.0)), (c(0.0, 0.0), c(0.0, 2.0)));
        let p = ComplexPolynomial::from_real(&[1.0; 4]).unwrap();
        assert_eq!(evaluate(&p, c(1.0, 0.0)), (c(4.0, 0.0), c(6.0, 0.0)));
        let p = ComplexPolynomial::new(vec![c(2.0, -1.0), c(0.5, 3.0), c(1.0, 1.0)]).unwrap();
        assert_eq!(evaluate(&p, c(0.0, 0.0)), (c(2.0, -1.0), c(0.5, 3.0)));
    }

    #[test]
    fn guesses_follow_newton_polygon() {
        let mut coeffs = vec![c(0.0, 0.0); 9];
        coeffs[0] = c(-1.0, 0.0);
        coeffs[8] = c(1.0, 0.0);
        let g = initial_guesses(&ComplexPolynomial::new(coeffs).unwrap());
        assert_eq!(g.len(), 8);
        assert!(g.iter().all(|z| (z.norm() - 1.0).abs() < 1e-14));

        let mut coeffs = vec![c(1.0, 0.0); 7];
        coeffs[0] = c(1e-10, 0.0);
        let g = initial_guesses(&ComplexPolynomial::new(coeffs).unwrap());
        assert_eq!(g.len(), 6);
        assert!(g.iter().any(|z| (z.norm() - 1e-10).abs() < 1e-20));

        let p = ComplexPolynomial::new(vec![c(3.0, 1.0), c(2.0, 0.0)]).unwrap();
        assert_eq!(initial_guesses(&p), vec![c(-1.5, -0.5)]);
        let r = find_roots(&p, &RootOptions::default());
        assert_eq!(r.roots, vec![c(-1.5, -0.5)]);
        assert_eq!(r.iterations, 0);
    }

    #[test]
    fn zero_leading_coefficient_deflates() {
        let p = ComplexPolynomial::from_real(&[-1.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
        let r = find_roots(&p, &RootOptions::default());
        assert_eq!(r.roots.len(), 2);
        assert_eq!(r.at_infinity, 2);
        assert_eq!(r.nominal_degree(), 4);
        assert!(!r.warnings.is_empty());
        assert!(r.converged);
    }

    #[test]
    fn zero_constant_term_gives_exact_zero_roots() {
        let p = ComplexPolynomial::from_real(&[0.0, 0.0, -4.0, 0.0, 1.0]).unwrap();
        let r = find_roots(&p, &RootOptions::default());
        assert_eq!(r.roots.iter().filter(|z| z.norm() == 0.0).count(), 2);
        assert!(match_distance(&r.roots, &[c(0.0, 0.0), c(0.0, 0.0), c(2.0, 0.0), c(-2.0, 0.0)]) < 1e-12);
    }

    #[test]
    fn degenerate_inputs() {
        assert_eq!(ComplexPolynomial::from_real(&[3.0]), Err(RootError::ZeroDegree));
        assert_eq!(ComplexPolynomial::from_real(&[0.0, 0.0]), Err(RootError::ZeroDegree));
        assert_eq!(ComplexPolynomial::from_real(&[1.0, 0.0]), Err(RootError::ZeroDegree));
        assert_eq!(
            ComplexPolynomial::from_real(&[1.0, f64::NAN]),
            Err(RootError::NonFinite { index: 1 })
        );
    }

    #[test]
    fn non_convergence_is_reported() {
        let p = ComplexPolynomial::new(poly_from_roots(
            &(1..=12).map(|m| c(m as f64, 0.5)).collect::<Vec<_>>(),
        ))
        .unwrap();
        let r = find_roots(&p, &RootOptions { tol: 1e-12, max_iters: 1 });
        assert!(!r.converged);
        assert_eq!(r.iterations, 1);
        assert_eq!(r.roots.len(), 12);
        assert!(r.warnings.iter().any(|w| w.contains("no convergence")));
    }

    #[test]
    fn kac_degree_1000_converges() {
        let mut ok = 0;
        for seed in 0..100u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let coeffs: Vec<_> = (0..=1000)
                .map(|_| {
                    let (x, y): (f64, f64) = (rng.sample(rand_distr::StandardNormal), rng.sample(rand_distr::StandardNormal));
                    c(x, y)
                })
                .collect();
            let p = ComplexPolynomial::new(coeffs).unwrap();
            let r = find_roots(&p, &RootOptions { tol: 1e-12, max_iters: 120 });
            if r.converged {
                ok += 1;
            }
        }
        assert!(ok >= 99, "{ok}/100 converged");
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let coeffs: Vec<_> = (0..8).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
            let p = ComplexPolynomial::new(coeffs).unwrap();
            let z = c(rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5));
            let h = 1e-6;
            let fd = (evaluate(&p, z + h).0 - evaluate(&p, z - h).0) / (2.0 * h);
            let d = evaluate(&p, z).1;
            assert!((fd - d).norm() <= 1e-6 * d.norm().max(1.0));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn residual_certificate_holds(seed in 0u64..10_000, n in 2usize..60) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let coeffs: Vec<_> = (0..=n).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
            let p = ComplexPolynomial::new(coeffs.clone()).unwrap();
            let r = find_roots(&p, &RootOptions::default());
            prop_assume!(r.at_infinity == 0);
            prop_assert!(r.converged);
            prop_assert_eq!(r.roots.len(), n);
            for &z in &r.roots {
                let (v, _) = evaluate(&p, z);
                let s: f64 = coeffs.iter().enumerate().map(|(j, a)| a.norm() * z.norm().powi(j as i32)).sum();
                prop_assert!(v.norm() <= 1e-12 * s * 1.0001 + 1e-300);
            }
        }

        #[test]
        fn real_coefficients_give_conjugate_pairs(seed in 0u64..10_000, n in 2usize..40) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let coeffs: Vec<f64> = (0..=n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let r = find_roots(&ComplexPolynomial::from_real(&coeffs).unwrap(), &RootOptions::default());
            let conj: Vec<_> = r.roots.iter().map(|z| z.conj()).collect();
            prop_assert!(match_distance(&r.roots, &conj) < 1e-6);
        }

        #[test]
        fn scaling_by_power_of_two_is_exact(seed in 0u64..10_000, e in -40i32..40) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let coeffs: Vec<_> = (0..20).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
            let lambda = 2f64.powi(e);
            let a = find_roots(&ComplexPolynomial::new(coeffs.clone()).unwrap(), &RootOptions::default());
            let b = find_roots(&ComplexPolynomial::new(coeffs.iter().map(|x| x * lambda).collect()).unwrap(), &RootOptions::default());
            prop_assert_eq!(a.roots, b.roots);
        }

        #[test]
        fn scaling_by_any_lambda_preserves_roots(seed in 0u64..10_000, re in 0.1f64..10.0, im in -5.0f64..5.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let coeffs: Vec<_> = (0..16).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
            let lambda = c(re, im);
            let a = find_roots(&ComplexPolynomial::new(coeffs.clone()).unwrap(), &RootOptions::default());
            let b = find_roots(&ComplexPolynomial::new(coeffs.iter().map(|x| x * lambda).collect()).unwrap(), &RootOptions::default());
            prop_assert!(match_distance(&a.roots, &b.roots) < 1e-8);
        }
    }

    #[test]
    fn scaled_division_survives_tiny_operands() {
        let a = Complex64::new(3e-200, -1e-200);
        let b = Complex64::new(1e-190, 2e-190);
        let q = cdiv(a, b);
        let want = (a * 1e190) / (b * 1e190);
        assert!((q - want).norm() < 1e-15 * want.norm());
        assert!((a / b).is_nan());
    }

    #[test]
    fn widely_spread_moduli() {
        // coefficients decaying like exp(-k^3 / 2): roots span ~70 decades
        let c: Vec<f64> = (0..12).map(|k| (-(k as f64).powi(3) / 2.0).exp() * if k % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let r = find_roots(&ComplexPolynomial::from_real(&c).unwrap(), &RootOptions::default());
        assert!(r.converged, "{:?}", r.residuals);
        let mut mods: Vec<f64> = r.roots.iter().map(|z| z.norm()).collect();
        mods.sort_by(f64::total_cmp);
        // consecutive moduli sit near |c_k / c_{k+1}|
        for (k, m) in mods.iter().enumerate() {
            let want = (c[k] / c[k + 1]).abs();
            assert!((m.ln() - want.ln()).abs() < 1.0, "{k}: {m} vs {want}");
        }
    }

    proptest! {
        #[test]
        fn cdiv_matches_plain_division(ar in -1e3..1e3f64, ai in -1e3..1e3f64, br in -1e3..1e3f64, bi in -1e3..1e3f64) {
            let b = Complex64::new(br, bi);
            prop_assume!(b.norm() > 1e-6);
            let a = Complex64::new(ar, ai);
            prop_assert!((cdiv(a, b) - a / b).norm() <= 1e-13 * (a / b).norm().max(1e-300));
        }
    }
}
