//! Probability kernels and link functions for the four model families.
//!
//! All four distributions live on the strictly positive integers.  With
//! `lambda` the (untruncated) Poisson/NB mean and `theta = lambda/alpha`:
//!
//! * positive Poisson:  f(y) = lambda^y / ((e^lambda - 1) y!)
//! * zero-truncated NB: f(y) = G(alpha+y)/(G(alpha) y!) (1+theta)^-alpha
//!   (theta/(1+theta))^y / (1 - (1+theta)^-alpha)
//!
//! and the one-inflated variants mix a point mass at one into a base
//! distribution `f`:
//!
//! * f_oi(1) = omega + (1 - omega) f(1)
//! * f_oi(y) = (1 - omega) f(y),  y >= 2.
//!
//! `omega` may be negative (one-deflation) down to the bound
//! `L = -f(1)/(1 - f(1))`, which is exactly the weight at which f_oi(1)
//! reaches zero.  The generalized logistic link
//!
//! * omega = L + (1 - L) / (1 + exp(-z'gamma))
//!
//! maps any linear predictor into the valid interval (L, 1).  A useful
//! consequence used by several tests: at z'gamma = 0 the link lands on the
//! midpoint (1 + L)/2, where the probability of a one is exactly 1/2.
//!
//! Everything is computed in log space with `exp_m1`/`ln_1p` forms, so the
//! kernels stay accurate for small lambda (where f(1) is close to one) and do
//! not overflow for large lambda.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::design::DesignData;
use crate::error::Error;
use crate::Result;

/// The four estimable families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// Positive (zero-truncated) Poisson.
    Pp,
    /// Zero-truncated negative binomial (NB2 dispersion).
    Ztnb,
    /// One-inflated positive Poisson.
    Oipp,
    /// One-inflated zero-truncated negative binomial.
    Oiztnb,
}

impl Family {
    /// Does the family carry the one-inflation mixing weight?
    pub fn is_one_inflated(self) -> bool {
        matches!(self, Family::Oipp | Family::Oiztnb)
    }

    /// Does the family carry the NB dispersion parameter `alpha`?
    pub fn has_dispersion(self) -> bool {
        matches!(self, Family::Ztnb | Family::Oiztnb)
    }

    /// The base (non-inflated) family: identity for `Pp`/`Ztnb`.
    pub fn base(self) -> Family {
        match self {
            Family::Oipp => Family::Pp,
            Family::Oiztnb => Family::Ztnb,
            other => other,
        }
    }

    /// The one-inflated counterpart: identity for `Oipp`/`Oiztnb`.
    pub fn one_inflated(self) -> Family {
        match self {
            Family::Pp => Family::Oipp,
            Family::Ztnb => Family::Oiztnb,
            other => other,
        }
    }

    /// Canonical display label.
    pub fn label(self) -> &'static str {
        match self {
            Family::Pp => "PP",
            Family::Ztnb => "ZTNB",
            Family::Oipp => "OIPP",
            Family::Oiztnb => "OIZTNB",
        }
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pp" => Ok(Family::Pp),
            "ztnb" => Ok(Family::Ztnb),
            "oipp" => Ok(Family::Oipp),
            "oiztnb" => Ok(Family::Oiztnb),
            other => Err(Error::BadSpec(format!(
                "unknown family {other:?}; expected one of pp, ztnb, oipp, oiztnb"
            ))),
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Coefficients of a fitted or hypothesized model: `beta` for the count
/// equation, `gamma` for the inflation equation (empty for base families),
/// `alpha` for NB dispersion (`None` for Poisson families).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub family: Family,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub alpha: Option<f64>,
}

impl Params {
    /// Validates that the coefficient blocks agree with the family.
    pub fn new(
        family: Family,
        beta: Vec<f64>,
        gamma: Vec<f64>,
        alpha: Option<f64>,
    ) -> Result<Self> {
        if beta.is_empty() {
            return Err(Error::BadParams("beta must contain at least an intercept".into()));
        }
        if family.is_one_inflated() && gamma.is_empty() {
            return Err(Error::BadParams(format!(
                "{family} requires inflation coefficients gamma"
            )));
        }
        if !family.is_one_inflated() && !gamma.is_empty() {
            return Err(Error::BadParams(format!(
                "{family} does not take inflation coefficients"
            )));
        }
        match (family.has_dispersion(), alpha) {
            (true, Some(a)) if a.is_finite() && a > 0.0 => {}
            (true, got) => {
                return Err(Error::BadParams(format!(
                    "{family} requires a finite dispersion alpha > 0, got {got:?}"
                )))
            }
            (false, None) => {}
            (false, Some(_)) => {
                return Err(Error::BadParams(format!(
                    "{family} does not take a dispersion parameter"
                )))
            }
        }
        Ok(Params { family, beta, gamma, alpha })
    }

    /// Number of free parameters (beta, gamma, and alpha if present).
    pub fn len(&self) -> usize {
        self.beta.len() + self.gamma.len() + usize::from(self.alpha.is_some())
    }

    /// True when `len()` is zero (never, for a validated value).
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Per-observation distribution parameters after applying the links:
/// `lambda[i] = exp(x_i'beta)` and, for one-inflated families,
/// `omega[i] = omega_link(lower_bound(lambda[i]), z_i'gamma)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkedParams {
    pub family: Family,
    pub lambda: Vec<f64>,
    /// Empty for base families.
    pub omega: Vec<f64>,
    pub alpha: Option<f64>,
}

impl LinkedParams {
    /// Applies the links of `params` to every row of a design.
    pub fn from_design(params: &Params, dd: &DesignData) -> Result<Self> {
        if params.beta.len() != dd.x.ncols() {
            return Err(Error::DimensionMismatch {
                expected: dd.x.ncols(),
                actual: params.beta.len(),
            });
        }
        let family = params.family;
        let alpha = params.alpha;
        let n = dd.n();
        let mut lambda = Vec::with_capacity(n);
        let mut omega = Vec::new();
        if family.is_one_inflated() {
            if params.gamma.len() != dd.z.ncols() {
                return Err(Error::DimensionMismatch {
                    expected: dd.z.ncols(),
                    actual: params.gamma.len(),
                });
            }
            omega.reserve(n);
        }
        for i in 0..n {
            let mut xb = 0.0;
            for (j, b) in params.beta.iter().enumerate() {
                xb += dd.x[(i, j)] * b;
            }
            let lam = lambda_link(xb);
            lambda.push(lam);
            if family.is_one_inflated() {
                let mut zg = 0.0;
                for (j, g) in params.gamma.iter().enumerate() {
                    zg += dd.z[(i, j)] * g;
                }
                let lower = lower_bound(family, lam, alpha.unwrap_or(f64::NAN));
                omega.push(omega_link(lower, zg));
            }
        }
        Ok(LinkedParams { family, lambda, omega, alpha })
    }

    /// A homogeneous sample: every observation shares one `(lambda, omega)`.
    pub fn constant(
        family: Family,
        n: usize,
        lambda: f64,
        omega: f64,
        alpha: Option<f64>,
    ) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::BadParams(format!("lambda must be positive, got {lambda}")));
        }
        if family.has_dispersion() {
            match alpha {
                Some(a) if a.is_finite() && a > 0.0 => {}
                got => {
                    return Err(Error::BadParams(format!(
                        "{family} requires alpha > 0, got {got:?}"
                    )))
                }
            }
        }
        let omega_vec = if family.is_one_inflated() {
            let lower = lower_bound(family, lambda, alpha.unwrap_or(f64::NAN));
            if !(omega > lower && omega <= 1.0) {
                return Err(Error::BadParams(format!(
                    "omega {omega} outside its valid interval ({lower}, 1]"
                )));
            }
            vec![omega; n]
        } else {
            Vec::new()
        };
        Ok(LinkedParams {
            family,
            lambda: vec![lambda; n],
            omega: omega_vec,
            alpha: if family.has_dispersion() { alpha } else { None },
        })
    }

    pub fn n(&self) -> usize {
        self.lambda.len()
    }
}

/// Mean link for the count equation: `lambda = exp(x'beta)`.
pub fn lambda_link(xbeta: f64) -> f64 {
    xbeta.exp()
}

/// Numerically stable logistic function.
pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Generalized logistic link for the inflation weight: maps any real
/// `z'gamma` into `(lower, 1)`, hitting the midpoint `(1 + lower)/2` at zero.
pub fn omega_link(lower: f64, zgamma: f64) -> f64 {
    lower + (1.0 - lower) * sigmoid(zgamma)
}

/// Most negative inflation weight compatible with a proper distribution,
/// `L = -f(1)/(1 - f(1))` for the family's base distribution:
///
/// * OIPP:   L = -lambda / (e^lambda - lambda - 1)
/// * OIZTNB: L = -p0*lambda / (c(1 - p0) - p0*lambda),  c = 1 + lambda/alpha,
///   p0 = c^-alpha.
///
/// Strictly negative for all finite `lambda > 0`.  Accepts base families too
/// (the bound depends only on the base distribution).  `alpha` is ignored for
/// Poisson families.
pub fn lower_bound(family: Family, lambda: f64, alpha: f64) -> f64 {
    match family.base() {
        Family::Pp => {
            // e^lambda - lambda - 1 = expm1(lambda) - lambda, accurate even
            // for small lambda where both terms are close.
            -lambda / (lambda.exp_m1() - lambda)
        }
        Family::Ztnb => {
            let c = 1.0 + lambda / alpha;
            let u = -alpha * (lambda / alpha).ln_1p(); // ln p0
            let p0 = u.exp();
            // denominator = c(1 - p0) - p0*lambda, with 1 - p0 = -expm1(u)
            let denom = c * (-u.exp_m1()) - p0 * lambda;
            -(p0 * lambda) / denom
        }
        _ => unreachable!("base() returns a base family"),
    }
}

/// Probability of observing exactly one under the *base* (non-inflated)
/// truncated distribution.  Shares its algebra with `lower_bound` so the two
/// stay consistent: `lower_bound = -f1/(1 - f1)` holds to rounding error.
pub(crate) fn base_one_prob(family: Family, lambda: f64, alpha: f64) -> f64 {
    match family.base() {
        Family::Pp => lambda / lambda.exp_m1(),
        Family::Ztnb => {
            let c = 1.0 + lambda / alpha;
            let u = -alpha * (lambda / alpha).ln_1p();
            let p0 = u.exp();
            p0 * lambda / (c * (-u.exp_m1()))
        }
        _ => unreachable!(),
    }
}

/// ln(e^x - 1) without overflow: for large x this is x + ln(1 - e^-x).
fn ln_expm1(x: f64) -> f64 {
    if x > 33.0 {
        x + (-(-x).exp()).ln_1p()
    } else {
        x.exp_m1().ln()
    }
}

/// ln Gamma(alpha + y) - ln Gamma(alpha), by direct summation of
/// ln(alpha + j) for small y (exact to a few ulps even for huge alpha, where
/// the subtraction of two large `ln_gamma` values loses digits) and by
/// `ln_gamma` differences otherwise.
pub(crate) fn ln_gamma_ratio(alpha: f64, y: u64) -> f64 {
    if y <= 128 {
        let mut acc = 0.0;
        for j in 0..y {
            acc += (alpha + j as f64).ln();
        }
        acc
    } else {
        ln_gamma(alpha + y as f64) - ln_gamma(alpha)
    }
}

/// Log-pmf of the positive Poisson.
pub(crate) fn ln_pmf_pp(y: u64, lambda: f64) -> f64 {
    y as f64 * lambda.ln() - ln_expm1(lambda) - ln_gamma(y as f64 + 1.0)
}

/// Log-pmf of the zero-truncated negative binomial.
pub(crate) fn ln_pmf_ztnb(y: u64, lambda: f64, alpha: f64) -> f64 {
    let lt = (lambda / alpha).ln_1p(); // ln(1 + theta)
    let u = -alpha * lt; // ln of the untruncated zero probability
    let ln_trunc = (-u.exp_m1()).ln(); // ln(1 - (1+theta)^-alpha)
    ln_gamma_ratio(alpha, y) - ln_gamma(y as f64 + 1.0) + u
        + y as f64 * (lambda.ln() - alpha.ln() - lt)
        - ln_trunc
}

fn ln_pmf_base(family: Family, y: u64, lambda: f64, alpha: f64) -> f64 {
    match family.base() {
        Family::Pp => ln_pmf_pp(y, lambda),
        Family::Ztnb => ln_pmf_ztnb(y, lambda, alpha),
        _ => unreachable!(),
    }
}

/// Probability mass at `y` for any family.  `omega` is ignored for base
/// families, `alpha` for Poisson families.  Computed in log space and
/// exponentiated at the end; the one-inflated mass at one is clamped into
/// `[0, 1]` so deflation weights sitting on the boundary cannot round to a
/// tiny negative probability.
pub fn pmf(family: Family, y: u64, lambda: f64, omega: f64, alpha: f64) -> f64 {
    if y == 0 {
        return 0.0;
    }
    match family {
        Family::Pp | Family::Ztnb => ln_pmf_base(family, y, lambda, alpha).exp(),
        Family::Oipp | Family::Oiztnb => {
            if y == 1 {
                let f1 = base_one_prob(family, lambda, alpha);
                (omega + (1.0 - omega) * f1).clamp(0.0, 1.0)
            } else {
                ((1.0 - omega).ln() + ln_pmf_base(family, y, lambda, alpha)).exp()
            }
        }
    }
}

/// Mean of the base truncated distribution.
pub(crate) fn base_mean(family: Family, lambda: f64, alpha: f64) -> f64 {
    match family.base() {
        // lambda e^l/(e^l - 1) = lambda / (1 - e^-l)
        Family::Pp => lambda / -(-lambda).exp_m1(),
        // lambda / (1 - (1+theta)^-alpha)
        Family::Ztnb => {
            let u = -alpha * (lambda / alpha).ln_1p();
            lambda / -u.exp_m1()
        }
        _ => unreachable!(),
    }
}

/// Expected count.  For one-inflated families
/// `E[y] = omega + (1 - omega) * base_mean`; `omega` is ignored otherwise.
pub fn mean(family: Family, lambda: f64, omega: f64, alpha: f64) -> f64 {
    let m = base_mean(family, lambda, alpha);
    if family.is_one_inflated() {
        omega + (1.0 - omega) * m
    } else {
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::E;

    // ---------------------------------------------------------------
    // pmf point values
    // ---------------------------------------------------------------

    #[test]
    fn pp_pmf_at_one_matches_closed_form() {
        // f(1; lambda=1) = 1/(e - 1)
        let want = 1.0 / (E - 1.0);
        assert_abs_diff_eq!(pmf(Family::Pp, 1, 1.0, 0.0, 0.0), want, epsilon = 1e-15);
        assert_abs_diff_eq!(want, 0.581_976_706_869_326_4, epsilon = 1e-15);
    }

    #[test]
    fn ztnb_with_unit_alpha_is_truncated_geometric() {
        // alpha = 1, lambda = 1 => theta = 1: f(y) = 2^-y / (1 - 1/2) ... = 2^-y * ... :
        // f(y) = (1/2)^1 (1/2)^y / (1/2) = 2^-y, so f(2) = 1/4.
        assert_abs_diff_eq!(pmf(Family::Ztnb, 2, 1.0, 0.0, 1.0), 0.25, epsilon = 1e-14);
        assert_abs_diff_eq!(pmf(Family::Ztnb, 1, 1.0, 0.0, 1.0), 0.5, epsilon = 1e-14);
    }

    #[test]
    fn pmf_is_zero_at_zero_and_valid_on_support() {
        for fam in [Family::Pp, Family::Ztnb, Family::Oipp, Family::Oiztnb] {
            assert_eq!(pmf(fam, 0, 2.0, 0.1, 1.5), 0.0, "{fam} must put no mass at zero");
            for y in 1..40 {
                let p = pmf(fam, y, 2.0, 0.1, 1.5);
                assert!((0.0..=1.0).contains(&p), "{fam} pmf({y}) = {p} out of [0,1]");
            }
        }
    }

    #[test]
    fn one_inflation_splits_mass_as_mixture() {
        // f_oi(1) = omega + (1-omega) f(1); f_oi(y>=2) = (1-omega) f(y)
        let (lam, al, om) = (3.0, 2.0, 0.25);
        for fam in [Family::Oipp, Family::Oiztnb] {
            let base = fam.base();
            let f1 = pmf(base, 1, lam, 0.0, al);
            assert_abs_diff_eq!(
                pmf(fam, 1, lam, om, al),
                om + (1.0 - om) * f1,
                epsilon = 1e-15
            );
            for y in 2..20 {
                assert_abs_diff_eq!(
                    pmf(fam, y, lam, om, al),
                    (1.0 - om) * pmf(base, y, lam, 0.0, al),
                    epsilon = 1e-15
                );
            }
        }
    }

    #[test]
    fn zero_omega_reduces_to_base_family() {
        for (lam, al) in [(0.5, 0.5), (1.0, 1.0), (5.0, 10.0), (20.0, 0.7)] {
            for y in 1..60 {
                assert_abs_diff_eq!(
                    pmf(Family::Oipp, y, lam, 0.0, 0.0),
                    pmf(Family::Pp, y, lam, 0.0, 0.0),
                    epsilon = 1e-12
                );
                assert_abs_diff_eq!(
                    pmf(Family::Oiztnb, y, lam, 0.0, al),
                    pmf(Family::Ztnb, y, lam, 0.0, al),
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn ztnb_approaches_pp_as_alpha_grows() {
        // At alpha = 1e8 the NB kernel should be indistinguishable from the
        // Poisson kernel on any reasonable y range.
        for lam in [0.5, 1.0, 5.0, 20.0] {
            for y in 1..=50 {
                let nb = pmf(Family::Ztnb, y, lam, 0.0, 1e8);
                let pp = pmf(Family::Pp, y, lam, 0.0, 0.0);
                assert!(
                    (nb - pp).abs() < 1e-6,
                    "alpha->inf limit violated at lambda={lam}, y={y}: {nb} vs {pp}"
                );
            }
        }
    }

    // ---------------------------------------------------------------
    // normalization
    // ---------------------------------------------------------------

    /// Sums the pmf until the remaining geometric tail bound is negligible.
    fn total_mass(fam: Family, lam: f64, om: f64, al: f64) -> f64 {
        let mut sum = 0.0;
        let mut y = 1u64;
        loop {
            let p = pmf(fam, y, lam, om, al);
            sum += p;
            // consecutive-ratio bound: beyond y the terms shrink at least
            // geometrically once y > lambda + |1-alpha|; stop when the bound
            // on the whole tail drops below 1e-12.
            if y as f64 > lam + al + 5.0 {
                let r = pmf(fam, y + 1, lam, om, al) / p.max(f64::MIN_POSITIVE);
                if r < 0.95 && p * r / (1.0 - r) < 1e-12 {
                    break;
                }
            }
            y += 1;
            assert!(y < 2_000_000, "normalization sum failed to terminate");
        }
        sum
    }

    #[test]
    fn pmf_sums_to_one_across_parameter_grid() {
        for &lam in &[0.5, 1.0, 5.0, 20.0] {
            let m = total_mass(Family::Pp, lam, 0.0, 0.0);
            assert!((m - 1.0).abs() < 1e-8, "PP mass {m} at lambda={lam}");
            for &al in &[0.5, 1.0, 10.0] {
                let m = total_mass(Family::Ztnb, lam, 0.0, al);
                assert!((m - 1.0).abs() < 1e-8, "ZTNB mass {m} at lambda={lam}, alpha={al}");
                for fam in [Family::Oipp, Family::Oiztnb] {
                    let lower = lower_bound(fam, lam, al);
                    for om in [lower * 0.999, 0.0, 0.5] {
                        let m = total_mass(fam, lam, om, al);
                        assert!(
                            (m - 1.0).abs() < 1e-8,
                            "{fam} mass {m} at lambda={lam}, alpha={al}, omega={om}"
                        );
                    }
                }
            }
        }
    }

    // ---------------------------------------------------------------
    // lower bound and link
    // ---------------------------------------------------------------

    #[test]
    fn oipp_lower_bound_closed_form() {
        // L(1) = -1/(e - 2)
        let want = -1.0 / (E - 2.0);
        assert_abs_diff_eq!(lower_bound(Family::Oipp, 1.0, 0.0), want, epsilon = 1e-14);
        assert_abs_diff_eq!(want, -1.392_211_191_177_332_8, epsilon = 1e-15);
    }

    #[test]
    fn oiztnb_lower_bound_geometric_case() {
        // alpha = 1, lambda = 1: f(1) = 1/2 so L = -1 exactly.
        assert_abs_diff_eq!(lower_bound(Family::Oiztnb, 1.0, 1.0), -1.0, epsilon = 1e-12);
    }

    #[test]
    fn oiztnb_lower_bound_approaches_oipp_for_huge_alpha() {
        let nb = lower_bound(Family::Oiztnb, 1.0, 1e6);
        let pp = lower_bound(Family::Oipp, 1.0, 0.0);
        assert!((nb - pp).abs() < 1e-4, "limit violated: {nb} vs {pp}");
    }

    #[test]
    fn lower_bound_is_negative_and_consistent_with_f1() {
        for &lam in &[0.1, 0.5, 1.0, 5.0, 20.0] {
            for &al in &[0.3, 1.0, 10.0] {
                for fam in [Family::Oipp, Family::Oiztnb] {
                    let l = lower_bound(fam, lam, al);
                    assert!(l < 0.0, "{fam} lower bound {l} not negative at lambda={lam}");
                    let f1 = base_one_prob(fam, lam, al);
                    assert_abs_diff_eq!(l, -f1 / (1.0 - f1), epsilon = 1e-10 * l.abs());
                }
            }
        }
    }

    #[test]
    fn omega_link_respects_range_and_midpoint() {
        let l = -1.392_211_191_177_332_8;
        // z'gamma = 0 lands exactly on the midpoint
        assert_abs_diff_eq!(omega_link(l, 0.0), (1.0 + l) / 2.0, epsilon = 1e-15);
        // moderate scores stay strictly inside the interval
        let hi = omega_link(l, 30.0);
        let lo = omega_link(l, -30.0);
        assert!(hi < 1.0 && hi > 1.0 - 1e-12);
        assert!(lo > l && lo < l + 1e-12);
        // extreme scores may saturate to the endpoints in floating point,
        // but must never cross them
        assert!(omega_link(l, 400.0) <= 1.0);
        assert!(omega_link(l, -400.0) >= l);
    }

    #[test]
    fn midpoint_weight_puts_exactly_half_mass_on_one() {
        // omega at the link midpoint makes P(y=1) = 1/2 for any (lambda, alpha).
        for &lam in &[0.1, 0.7, 1.0, 4.0, 15.0, 30.0] {
            for &al in &[0.3, 1.0, 2.5, 50.0] {
                for fam in [Family::Oipp, Family::Oiztnb] {
                    let l = lower_bound(fam, lam, al);
                    let om = omega_link(l, 0.0);
                    let p1 = pmf(fam, 1, lam, om, al);
                    assert!(
                        (p1 - 0.5).abs() < 1e-12,
                        "{fam}: pmf(1) = {p1} at lambda={lam}, alpha={al}"
                    );
                }
            }
        }
    }

    #[test]
    fn deflation_keeps_pmf_nonnegative() {
        // omega pinned just above the lower bound: mass at one approaches
        // zero from above and must never round negative.
        for &lam in &[0.5, 1.0, 5.0] {
            let l = lower_bound(Family::Oipp, lam, 0.0);
            for eps in [1e-3, 1e-9, 1e-13] {
                let om = l * (1.0 - eps);
                let p1 = pmf(Family::Oipp, 1, lam, om, 0.0);
                assert!(p1 >= 0.0, "pmf(1) = {p1} below zero at lambda={lam}, eps={eps}");
            }
        }
    }

    // ---------------------------------------------------------------
    // means and links
    // ---------------------------------------------------------------

    #[test]
    fn mean_point_values() {
        // PP: lambda e^l/(e^l - 1) at lambda=1 is e/(e-1)
        assert_abs_diff_eq!(
            mean(Family::Oipp, 1.0, 0.0, 0.0),
            E / (E - 1.0),
            epsilon = 1e-14
        );
        // truncated geometric with lambda=1: mean 2
        assert_abs_diff_eq!(mean(Family::Oiztnb, 1.0, 0.0, 1.0), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn mean_matches_brute_force_expectation() {
        for &(lam, al) in &[(0.5, 1.0), (2.0, 0.5), (8.0, 10.0)] {
            for fam in [Family::Pp, Family::Ztnb, Family::Oipp, Family::Oiztnb] {
                let om = if fam.is_one_inflated() {
                    omega_link(lower_bound(fam, lam, al), 0.4)
                } else {
                    0.0
                };
                let direct = mean(fam, lam, om, al);
                let brute: f64 = (1..40_000).map(|y| y as f64 * pmf(fam, y, lam, om, al)).sum();
                assert_abs_diff_eq!(direct, brute, epsilon = 1e-8 * direct.max(1.0));
            }
        }
    }

    #[test]
    fn lambda_link_is_plain_exponential() {
        assert_eq!(lambda_link(0.0), 1.0);
        assert_abs_diff_eq!(lambda_link(2.2), 9.025_013_499_434_122, epsilon = 1e-14);
    }

    // ---------------------------------------------------------------
    // parameter containers
    // ---------------------------------------------------------------

    #[test]
    fn params_constructor_enforces_family_shape() {
        assert!(Params::new(Family::Pp, vec![0.1], vec![], None).is_ok());
        assert!(Params::new(Family::Pp, vec![], vec![], None).is_err());
        assert!(Params::new(Family::Pp, vec![0.1], vec![0.2], None).is_err());
        assert!(Params::new(Family::Pp, vec![0.1], vec![], Some(1.0)).is_err());
        assert!(Params::new(Family::Ztnb, vec![0.1], vec![], Some(1.0)).is_ok());
        assert!(Params::new(Family::Ztnb, vec![0.1], vec![], Some(-1.0)).is_err());
        assert!(Params::new(Family::Ztnb, vec![0.1], vec![], None).is_err());
        assert!(Params::new(Family::Oipp, vec![0.1], vec![0.0], None).is_ok());
        assert!(Params::new(Family::Oipp, vec![0.1], vec![], None).is_err());
        assert!(Params::new(Family::Oiztnb, vec![0.1], vec![0.0], Some(2.0)).is_ok());
    }

    #[test]
    fn family_round_trips_through_strings() {
        for fam in [Family::Pp, Family::Ztnb, Family::Oipp, Family::Oiztnb] {
            let parsed: Family = fam.label().to_lowercase().parse().unwrap();
            assert_eq!(parsed, fam);
        }
        assert!("poisson".parse::<Family>().is_err());
    }
}
