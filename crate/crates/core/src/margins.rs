//! Marginal effects of regressors on the expected count, with delta-method
//! standard errors.
//!
//! For the base families the fitted mean is `M(lambda)` (the truncated mean)
//! and a continuous regressor's effect is the chain `M'(lambda) * lambda *
//! beta_j`.  For the one-inflated families the mean is `omega + (1 - omega)
//! M(lambda)` and the chain picks up two extra routes: the inflation weight
//! moves with `lambda` through its lower bound (when the regressor sits in
//! the count equation) and with the logistic score (when it sits in the
//! inflation equation).  A regressor appearing in both equations gets the
//! sum of all routes.
//!
//! Both truncated families share one shape: with `T = 1 - P(0)` the
//! truncated mean is `lambda / T` and the one-probability is
//! `lambda T' / T`, so a single helper computes the curves and their
//! `lambda`-derivatives for either family from `T` and `T'` alone.
//!
//! Dummy regressors get discrete contrasts `E[y | d=1] - E[y | d=0]`, forcing
//! the column in every equation it appears in.  Standard errors come from
//! the delta method with a finite-difference Jacobian of the aggregated
//! effect with respect to the full parameter vector.

use nalgebra::DMatrix;

use crate::design::DesignData;
use crate::dists::{lambda_link, sigmoid, Family, Params};
use crate::error::Error;
use crate::fit::FittedModel;
use crate::infer;
use crate::optim;
use crate::Result;

/// How per-observation effects are collapsed into one number per regressor.
#[derive(Debug, Clone, PartialEq)]
pub enum Aggregation {
    /// Evaluate the effect at every observation and average (the default).
    AverageEffects,
    /// Evaluate once at the column means of the design.
    EffectAtMeans,
    /// Evaluate once at caller-supplied covariate rows.
    AtPoint { x: Vec<f64>, z: Vec<f64> },
}

/// Whether a regressor was treated as continuous or as a 0/1 dummy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EffectKind {
    Continuous,
    Dummy,
}

impl std::fmt::Display for EffectKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EffectKind::Continuous => write!(f, "continuous"),
            EffectKind::Dummy => write!(f, "dummy"),
        }
    }
}

/// One regressor's aggregated effect.
#[derive(Debug, Clone)]
pub struct EffectRow {
    pub name: String,
    pub kind: EffectKind,
    pub effect: f64,
    pub se: Option<f64>,
    pub z: Option<f64>,
    pub p: Option<f64>,
}

/// The marginal-effects table.
#[derive(Debug, Clone)]
pub struct MarginalEffects {
    pub family: Family,
    pub aggregation: Aggregation,
    pub rows: Vec<EffectRow>,
}

/// Truncated-family curves at one `lambda`: the truncated mean and deflation
/// bound with their `lambda`-derivatives, built from the truncation mass
/// `T = 1 - P(0)`, its derivative, and the one-probability `f1`.  `alpha` is
/// ignored for the Poisson-based families.
struct Curves {
    mean: f64,
    dmean: f64,
    lower: f64,
    dlower: f64,
}

fn curves(base: Family, lam: f64, alpha: f64) -> Curves {
    // T = 1 - P(0), T' = dT/dlambda, and the log-derivative bracket of f1
    let (t, tprime, bracket) = match base {
        Family::Pp => {
            let t = -(-lam).exp_m1();
            let tprime = (-lam).exp();
            (t, tprime, 1.0 / lam - 1.0 - tprime / t)
        }
        Family::Ztnb => {
            let c = 1.0 + lam / alpha;
            let u = -alpha * (lam / alpha).ln_1p();
            let p0 = u.exp();
            let t = -u.exp_m1();
            let tprime = p0 / c;
            (t, tprime, 1.0 / lam - (alpha + 1.0) / (alpha * c) - tprime / t)
        }
        _ => unreachable!("curves take a base family"),
    };
    let f1 = lam * tprime / t;
    let df1 = f1 * bracket;
    let mean = lam / t;
    let dmean = (1.0 - lam * tprime / t) / t;
    let one_minus_f1 = 1.0 - f1;
    Curves {
        mean,
        dmean,
        lower: -f1 / one_minus_f1,
        dlower: -df1 / (one_minus_f1 * one_minus_f1),
    }
}

#[inline]
fn dot(coef: &[f64], row: &[f64]) -> f64 {
    coef.iter().zip(row).map(|(c, v)| c * v).sum()
}

/// Expected count at one covariate row; NaN signals an out-of-domain point
/// (finite-difference callers route around it).
fn raw_mean(
    family: Family,
    beta: &[f64],
    gamma: &[f64],
    alpha: f64,
    x_row: &[f64],
    z_row: &[f64],
) -> f64 {
    let lam = lambda_link(dot(beta, x_row));
    if !lam.is_finite() || lam == 0.0 {
        return f64::NAN;
    }
    let c = curves(family.base(), lam, alpha);
    if family.is_one_inflated() {
        let s = sigmoid(dot(gamma, z_row));
        let omega = c.lower + (1.0 - c.lower) * s;
        omega + (1.0 - omega) * c.mean
    } else {
        c.mean
    }
}

/// Derivative of the expected count with respect to regressor `q`, where
/// `x_col`/`z_col` say which design column(s) hold `q`.
fn raw_dmean(
    family: Family,
    beta: &[f64],
    gamma: &[f64],
    alpha: f64,
    x_row: &[f64],
    z_row: &[f64],
    x_col: Option<usize>,
    z_col: Option<usize>,
) -> f64 {
    let lam = lambda_link(dot(beta, x_row));
    if !lam.is_finite() || lam == 0.0 {
        return f64::NAN;
    }
    let c = curves(family.base(), lam, alpha);
    let dlam = x_col.map_or(0.0, |j| lam * beta[j]);
    if !family.is_one_inflated() {
        return c.dmean * dlam;
    }
    let s = sigmoid(dot(gamma, z_row));
    let omega = c.lower + (1.0 - c.lower) * s;
    // the weight moves through the bound (count equation) and the score
    // (inflation equation)
    let domega = c.dlower * (1.0 - s) * dlam
        + z_col.map_or(0.0, |m| (1.0 - c.lower) * s * (1.0 - s) * gamma[m]);
    domega * (1.0 - c.mean) + (1.0 - omega) * c.dmean * dlam
}

fn check_row(len: usize, row: &[f64], what: &str) -> Result<()> {
    if row.len() != len {
        return Err(Error::DimensionMismatch { expected: len, actual: row.len() });
    }
    let _ = what;
    Ok(())
}

/// Positive-Poisson marginal effect of the regressor in count-equation
/// column `x_col` at one covariate row.
pub fn dmean_pp(params: &Params, x_row: &[f64], x_col: usize) -> Result<f64> {
    expect_family(params, Family::Pp)?;
    check_row(params.beta.len(), x_row, "x")?;
    check_col(params.beta.len(), x_col)?;
    Ok(raw_dmean(Family::Pp, &params.beta, &[], f64::NAN, x_row, &[], Some(x_col), None))
}

/// Zero-truncated negative binomial marginal effect.
pub fn dmean_ztnb(params: &Params, x_row: &[f64], x_col: usize) -> Result<f64> {
    expect_family(params, Family::Ztnb)?;
    check_row(params.beta.len(), x_row, "x")?;
    check_col(params.beta.len(), x_col)?;
    Ok(raw_dmean(
        Family::Ztnb,
        &params.beta,
        &[],
        params.alpha.unwrap(),
        x_row,
        &[],
        Some(x_col),
        None,
    ))
}

/// One-inflated positive Poisson marginal effect.  `x_col`/`z_col` name the
/// design column(s) carrying the regressor; a regressor in both equations
/// passes both.
pub fn dmean_oipp(
    params: &Params,
    x_row: &[f64],
    z_row: &[f64],
    x_col: Option<usize>,
    z_col: Option<usize>,
) -> Result<f64> {
    expect_family(params, Family::Oipp)?;
    check_row(params.beta.len(), x_row, "x")?;
    check_row(params.gamma.len(), z_row, "z")?;
    check_membership(params, x_col, z_col)?;
    Ok(raw_dmean(Family::Oipp, &params.beta, &params.gamma, f64::NAN, x_row, z_row, x_col, z_col))
}

/// One-inflated zero-truncated negative binomial marginal effect.
pub fn dmean_oiztnb(
    params: &Params,
    x_row: &[f64],
    z_row: &[f64],
    x_col: Option<usize>,
    z_col: Option<usize>,
) -> Result<f64> {
    expect_family(params, Family::Oiztnb)?;
    check_row(params.beta.len(), x_row, "x")?;
    check_row(params.gamma.len(), z_row, "z")?;
    check_membership(params, x_col, z_col)?;
    Ok(raw_dmean(
        Family::Oiztnb,
        &params.beta,
        &params.gamma,
        params.alpha.unwrap(),
        x_row,
        z_row,
        x_col,
        z_col,
    ))
}

fn expect_family(params: &Params, family: Family) -> Result<()> {
    if params.family != family {
        return Err(Error::BadParams(format!(
            "parameters are for {}, expected {family}",
            params.family
        )));
    }
    Ok(())
}

fn check_col(len: usize, col: usize) -> Result<()> {
    if col >= len {
        return Err(Error::DimensionMismatch { expected: len, actual: col });
    }
    Ok(())
}

fn check_membership(params: &Params, x_col: Option<usize>, z_col: Option<usize>) -> Result<()> {
    if x_col.is_none() && z_col.is_none() {
        return Err(Error::BadSpec("regressor appears in neither equation".into()));
    }
    if let Some(j) = x_col {
        check_col(params.beta.len(), j)?;
    }
    if let Some(m) = z_col {
        check_col(params.gamma.len(), m)?;
    }
    Ok(())
}

/// One regressor's place in the designs.
struct Regressor {
    name: String,
    x_col: Option<usize>,
    z_col: Option<usize>,
    kind: EffectKind,
}

/// The regressors eligible for effects: every non-intercept design column,
/// count-equation order first, then inflation-only extras.
fn regressor_union(fm: &FittedModel, dd: &DesignData) -> Vec<Regressor> {
    let mut out: Vec<Regressor> = Vec::new();
    for (j, name) in fm.x_names.iter().enumerate().skip(1) {
        let z_col = fm.z_names.iter().position(|n| n == name);
        let dummy = dd.x_dummy[j] || z_col.map_or(false, |m| dd.z_dummy[m]);
        out.push(Regressor {
            name: name.clone(),
            x_col: Some(j),
            z_col,
            kind: if dummy { EffectKind::Dummy } else { EffectKind::Continuous },
        });
    }
    for (m, name) in fm.z_names.iter().enumerate().skip(1) {
        if fm.x_names.iter().any(|n| n == name) {
            continue;
        }
        out.push(Regressor {
            name: name.clone(),
            x_col: None,
            z_col: Some(m),
            kind: if dd.z_dummy[m] { EffectKind::Dummy } else { EffectKind::Continuous },
        });
    }
    out
}

/// Aggregated effect of one regressor as a function of the flat parameter
/// vector — the scalar the delta-method Jacobian differentiates.
#[allow(clippy::too_many_arguments)]
fn effect_value(
    family: Family,
    k: usize,
    p: usize,
    theta: &[f64],
    points: &[(Vec<f64>, Vec<f64>)],
    reg: &Regressor,
) -> f64 {
    let beta = &theta[..k];
    let gamma = &theta[k..k + p];
    let alpha = if family.has_dispersion() { theta[k + p] } else { f64::NAN };
    if family.has_dispersion() && !(alpha > 0.0) {
        return f64::NAN;
    }
    let mut acc = 0.0;
    for (x_row, z_row) in points {
        let v = match reg.kind {
            EffectKind::Continuous => {
                raw_dmean(family, beta, gamma, alpha, x_row, z_row, reg.x_col, reg.z_col)
            }
            EffectKind::Dummy => {
                let mut x1 = x_row.clone();
                let mut x0 = x_row.clone();
                let mut z1 = z_row.clone();
                let mut z0 = z_row.clone();
                if let Some(j) = reg.x_col {
                    x1[j] = 1.0;
                    x0[j] = 0.0;
                }
                if let Some(m) = reg.z_col {
                    z1[m] = 1.0;
                    z0[m] = 0.0;
                }
                raw_mean(family, beta, gamma, alpha, &x1, &z1)
                    - raw_mean(family, beta, gamma, alpha, &x0, &z0)
            }
        };
        acc += v;
    }
    acc / points.len() as f64
}

/// Marginal effects of every non-intercept regressor under the requested
/// aggregation, with delta-method standard errors whenever the fit carries a
/// variance-covariance matrix.
pub fn margins(
    fm: &FittedModel,
    dd: &DesignData,
    aggregation: &Aggregation,
) -> Result<MarginalEffects> {
    let family = fm.params.family;
    let k = fm.x_names.len();
    let p = fm.z_names.len();

    // evaluation points per the aggregation mode
    let points: Vec<(Vec<f64>, Vec<f64>)> = match aggregation {
        Aggregation::AverageEffects => (0..dd.n())
            .map(|i| {
                let x: Vec<f64> = (0..k).map(|j| dd.x[(i, j)]).collect();
                let z: Vec<f64> = (0..p).map(|m| dd.z[(i, m)]).collect();
                (x, z)
            })
            .collect(),
        Aggregation::EffectAtMeans => {
            let z = if p > 0 { dd.z_mean_row() } else { Vec::new() };
            vec![(dd.x_mean_row(), z)]
        }
        Aggregation::AtPoint { x, z } => {
            check_row(k, x, "x")?;
            if p > 0 {
                check_row(p, z, "z")?;
            } else if !z.is_empty() {
                return Err(Error::DimensionMismatch { expected: 0, actual: z.len() });
            }
            vec![(x.clone(), z.clone())]
        }
    };

    let theta = fm.flat_estimates();
    let regressors = regressor_union(fm, dd);
    let mut rows = Vec::with_capacity(regressors.len());
    let vmat = fm.varcov.matrix();

    for reg in &regressors {
        let f = |th: &[f64]| effect_value(family, k, p, th, &points, reg);
        let effect = f(&theta);
        if !effect.is_finite() {
            return Err(Error::BadParams(format!(
                "effect of {} is not finite at the estimates",
                reg.name
            )));
        }
        let se = match vmat {
            Some(v) => {
                let grad = optim::gradient(&f, &theta, effect, f64::EPSILON.cbrt());
                let jac = DMatrix::from_row_slice(1, theta.len(), grad.as_slice());
                Some(infer::delta_method(&jac, v)?[0])
            }
            None => None,
        };
        let z = se.and_then(|s| if s > 0.0 { Some(effect / s) } else { None });
        let p_val = z.map(|zv| {
            use statrs::distribution::{ContinuousCDF, Normal};
            2.0 * Normal::new(0.0, 1.0).unwrap().sf(zv.abs())
        });
        rows.push(EffectRow { name: reg.name.clone(), kind: reg.kind, effect, se, z, p: p_val });
    }

    Ok(MarginalEffects { family, aggregation: aggregation.clone(), rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{DesignData, ModelSpec};
    use crate::dists;
    use crate::infer::VarCov;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    /// Central finite difference of the expected mean along a regressor's
    /// data direction (moving the value in every equation that carries it).
    #[allow(clippy::too_many_arguments)]
    fn fd_dmean(
        family: Family,
        beta: &[f64],
        gamma: &[f64],
        alpha: f64,
        x_row: &[f64],
        z_row: &[f64],
        x_col: Option<usize>,
        z_col: Option<usize>,
    ) -> f64 {
        let h = 1e-6;
        let shift = |delta: f64| -> f64 {
            let mut x = x_row.to_vec();
            let mut z = z_row.to_vec();
            if let Some(j) = x_col {
                x[j] += delta;
            }
            if let Some(m) = z_col {
                z[m] += delta;
            }
            raw_mean(family, beta, gamma, alpha, &x, &z)
        };
        (shift(h) - shift(-h)) / (2.0 * h)
    }

    fn close(analytic: f64, fd: f64) {
        let tol = 1e-6 * fd.abs().max(1e-2);
        assert!(
            (analytic - fd).abs() < tol,
            "analytic {analytic} vs finite difference {fd}"
        );
    }

    #[test]
    fn analytic_derivatives_match_finite_differences_everywhere() {
        let mut rng = StdRng::seed_from_u64(42);
        for trial in 0..100 {
            let beta = [rng.gen_range(-0.5..0.8), rng.gen_range(-0.4..0.4)];
            let gamma = [rng.gen_range(-1.0..1.0), rng.gen_range(-0.6..0.6)];
            let alpha = [0.5, 1.0, 5.0][trial % 3];
            let x_row = [1.0, rng.gen_range(-2.0..2.0)];
            let z_row = [1.0, rng.gen_range(-2.0..2.0)];

            for family in [Family::Pp, Family::Ztnb] {
                let a = if family.has_dispersion() { alpha } else { f64::NAN };
                let d = raw_dmean(family, &beta, &[], a, &x_row, &[], Some(1), None);
                close(d, fd_dmean(family, &beta, &[], a, &x_row, &[], Some(1), None));
            }
            for family in [Family::Oipp, Family::Oiztnb] {
                let a = if family.has_dispersion() { alpha } else { f64::NAN };
                // regressor in both equations, count only, inflation only
                for (xc, zc) in [(Some(1), Some(1)), (Some(1), None), (None, Some(1))] {
                    let d = raw_dmean(family, &beta, &gamma, a, &x_row, &z_row, xc, zc);
                    close(d, fd_dmean(family, &beta, &gamma, a, &x_row, &z_row, xc, zc));
                }
            }
        }
    }

    #[test]
    fn oiztnb_effects_approach_oipp_as_dispersion_vanishes() {
        let beta = [0.3, 0.25];
        let gamma = [-0.4, 0.5];
        let x_row = [1.0, 0.7];
        let z_row = [1.0, 0.7];
        let pp = raw_dmean(Family::Oipp, &beta, &gamma, f64::NAN, &x_row, &z_row, Some(1), Some(1));
        let nb =
            raw_dmean(Family::Oiztnb, &beta, &gamma, 1e6, &x_row, &z_row, Some(1), Some(1));
        assert_abs_diff_eq!(pp, nb, epsilon = 1e-3);
    }

    #[test]
    fn zero_coefficients_give_exactly_zero_effects() {
        let beta = [0.4, 0.0];
        let gamma = [0.2, 0.0];
        let d = raw_dmean(Family::Oipp, &beta, &gamma, f64::NAN, &[1.0, 3.0], &[1.0, 3.0], Some(1), Some(1));
        assert_eq!(d, 0.0);
    }

    #[test]
    fn dummy_contrast_approaches_derivative_for_tiny_coefficients() {
        // with a nearly-zero coefficient the discrete 0 -> 1 contrast and
        // the derivative agree to first order
        let eps = 1e-5;
        let beta = [0.4, eps];
        let gamma = [0.2, eps];
        let x1 = [1.0, 1.0];
        let x0 = [1.0, 0.0];
        let contrast = raw_mean(Family::Oipp, &beta, &gamma, f64::NAN, &x1, &x1)
            - raw_mean(Family::Oipp, &beta, &gamma, f64::NAN, &x0, &x0);
        let deriv =
            raw_dmean(Family::Oipp, &beta, &gamma, f64::NAN, &x0, &x0, Some(1), Some(1));
        assert_abs_diff_eq!(contrast, deriv, epsilon = 1e-7);
    }

    #[test]
    fn public_wrappers_validate_family_and_shapes() {
        let pp = Params::new(Family::Pp, vec![0.1, 0.2], vec![], None).unwrap();
        assert!(dmean_pp(&pp, &[1.0, 0.5], 1).is_ok());
        assert!(dmean_pp(&pp, &[1.0], 1).is_err()); // short row
        assert!(dmean_pp(&pp, &[1.0, 0.5], 2).is_err()); // column out of range
        assert!(dmean_ztnb(&pp, &[1.0, 0.5], 1).is_err()); // wrong family

        let oi = Params::new(Family::Oipp, vec![0.1, 0.2], vec![0.0, 0.1], None).unwrap();
        assert!(dmean_oipp(&oi, &[1.0, 0.5], &[1.0, 0.5], Some(1), Some(1)).is_ok());
        assert!(dmean_oipp(&oi, &[1.0, 0.5], &[1.0, 0.5], None, None).is_err());
    }

    // ---------------------------------------------------------------
    // the margins table
    // ---------------------------------------------------------------

    fn small_fit(family: Family, n: usize) -> (FittedModel, DesignData) {
        // x1 continuous, x2 dummy; z = x
        let mut x = DMatrix::from_element(n, 3, 1.0);
        for i in 0..n {
            x[(i, 1)] = -1.0 + 2.0 * (i as f64) / (n as f64 - 1.0);
            x[(i, 2)] = f64::from(i % 2 == 0);
        }
        let names = vec!["(Intercept)".to_string(), "x1".into(), "x2".into()];
        let y: Vec<u64> = (0..n).map(|i| 1 + (i % 4) as u64).collect();
        let dd = if family.is_one_inflated() {
            DesignData::from_parts(y, x.clone(), x, names.clone(), names).unwrap()
        } else {
            DesignData::from_parts(y, x, DMatrix::zeros(0, 0), names, vec![]).unwrap()
        };
        let (gamma, z_names) = if family.is_one_inflated() {
            (vec![-0.2, 0.3, 0.15], dd.z_names.clone())
        } else {
            (vec![], vec![])
        };
        let alpha = family.has_dispersion().then_some(1.4);
        let params = Params::new(family, vec![0.3, 0.2, -0.1], gamma, alpha).unwrap();
        let dim = params.len();
        let fm = FittedModel {
            spec: ModelSpec { family, response: "y".into(), x_terms: vec![], z_terms: vec![] },
            params,
            loglik: -1.0,
            converged: true,
            iterations: 1,
            gradient_sup_norm: 0.0,
            n,
            x_names: dd.x_names.clone(),
            z_names,
            varcov: VarCov::Available {
                matrix: DMatrix::identity(dim, dim) * 0.01,
                pos_def: true,
            },
            notes: vec![],
        };
        (fm, dd)
    }

    #[test]
    fn margins_table_excludes_intercept_and_tags_kinds() {
        let (fm, dd) = small_fit(Family::Oiztnb, 30);
        let tab = margins(&fm, &dd, &Aggregation::AverageEffects).unwrap();
        let names: Vec<&str> = tab.rows.iter().map(|r| r.name.as_str()).collect();
        assert_eq!(names, vec!["x1", "x2"]);
        assert_eq!(tab.rows[0].kind, EffectKind::Continuous);
        assert_eq!(tab.rows[1].kind, EffectKind::Dummy);
        for row in &tab.rows {
            assert!(row.effect.is_finite());
            assert!(row.se.unwrap() > 0.0);
            assert!(row.p.unwrap() > 0.0 && row.p.unwrap() <= 1.0);
        }
    }

    #[test]
    fn aggregation_modes_coincide_on_a_constant_design() {
        // when every row is identical, averaging effects and evaluating at
        // the means are the same number
        let n = 12;
        let x = DMatrix::from_fn(n, 2, |_, j| if j == 0 { 1.0 } else { 0.5 });
        let names = vec!["(Intercept)".to_string(), "x1".into()];
        let dd = DesignData::from_parts(
            vec![2; n],
            x.clone(),
            x,
            names.clone(),
            names,
        )
        .unwrap();
        let params = Params::new(Family::Oipp, vec![0.3, 0.2], vec![-0.2, 0.3], None).unwrap();
        let fm = FittedModel {
            spec: ModelSpec {
                family: Family::Oipp,
                response: "y".into(),
                x_terms: vec![],
                z_terms: vec![],
            },
            params,
            loglik: -1.0,
            converged: true,
            iterations: 1,
            gradient_sup_norm: 0.0,
            n,
            x_names: dd.x_names.clone(),
            z_names: dd.z_names.clone(),
            varcov: VarCov::Unavailable { reason: "synthetic".into() },
            notes: vec![],
        };
        let ae = margins(&fm, &dd, &Aggregation::AverageEffects).unwrap();
        let em = margins(&fm, &dd, &Aggregation::EffectAtMeans).unwrap();
        assert_abs_diff_eq!(ae.rows[0].effect, em.rows[0].effect, epsilon = 1e-12);
        assert!(ae.rows[0].se.is_none());

        let at = margins(
            &fm,
            &dd,
            &Aggregation::AtPoint { x: vec![1.0, 0.5], z: vec![1.0, 0.5] },
        )
        .unwrap();
        assert_abs_diff_eq!(ae.rows[0].effect, at.rows[0].effect, epsilon = 1e-12);
    }

    #[test]
    fn inflation_only_regressors_are_included() {
        // z carries an extra column not in x
        let n = 10;
        let x = DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { (i as f64) / 5.0 });
        let z = DMatrix::from_fn(n, 3, |i, j| match j {
            0 => 1.0,
            1 => (i as f64) / 5.0,
            _ => f64::from(i % 2 == 0),
        });
        let dd = DesignData::from_parts(
            vec![1; n],
            x,
            z,
            vec!["(Intercept)".into(), "x1".into()],
            vec!["(Intercept)".into(), "x1".into(), "d".into()],
        )
        .unwrap();
        let params =
            Params::new(Family::Oipp, vec![0.3, 0.1], vec![-0.2, 0.3, 0.4], None).unwrap();
        let fm = FittedModel {
            spec: ModelSpec {
                family: Family::Oipp,
                response: "y".into(),
                x_terms: vec![],
                z_terms: vec![],
            },
            params,
            loglik: -1.0,
            converged: true,
            iterations: 1,
            gradient_sup_norm: 0.0,
            n,
            x_names: dd.x_names.clone(),
            z_names: dd.z_names.clone(),
            varcov: VarCov::Unavailable { reason: "synthetic".into() },
            notes: vec![],
        };
        let tab = margins(&fm, &dd, &Aggregation::AverageEffects).unwrap();
        let names: Vec<&str> = tab.rows.iter().map(|r| r.name.as_str()).collect();
        assert_eq!(names, vec!["x1", "d"]);
        assert_eq!(tab.rows[1].kind, EffectKind::Dummy);
    }

    #[test]
    fn mean_route_agrees_with_distribution_mean() {
        // raw_mean must equal the distribution-level mean under the link
        let beta = [0.4, 0.3];
        let gamma = [-0.3, 0.2];
        let x_row = [1.0, 0.6];
        let lam = (0.4f64 + 0.3 * 0.6).exp();
        let lower = dists::lower_bound(Family::Oipp, lam, f64::NAN);
        let omega = dists::omega_link(lower, -0.3 + 0.2 * 0.6);
        let want = dists::mean(Family::Oipp, lam, omega, f64::NAN);
        let got = raw_mean(Family::Oipp, &beta, &gamma, f64::NAN, &x_row, &x_row);
        assert_abs_diff_eq!(got, want, epsilon = 1e-12);
    }
}
