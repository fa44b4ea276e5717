//! Inference on fitted models: variance-covariance extraction, Wald and
//! likelihood-ratio tests for one-inflation, delta-method standard errors,
//! and the coefficient summary table.
//!
//! The covariance estimate is the inverse of the negative Hessian of the
//! total log-likelihood at the maximum.  Eigen-decomposition (not plain LU)
//! drives the inversion so that ill-conditioning and indefiniteness are
//! detected and reported instead of silently producing garbage standard
//! errors.

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::design::DesignData;
use crate::dists::{Family, LinkedParams};
use crate::error::Error;
use crate::fit::FittedModel;
use crate::Result;

/// Condition-number ceiling beyond which the Hessian is treated as singular.
const MAX_CONDITION: f64 = 1e12;

/// Variance-covariance matrix of the parameter estimates, or the reason it
/// could not be formed.
#[derive(Debug, Clone)]
pub enum VarCov {
    Available {
        /// `-H^{-1}` in the flat parameter order (beta, gamma, alpha).
        matrix: DMatrix<f64>,
        /// Whether the matrix is positive definite, i.e. the Hessian was
        /// negative definite as at an interior maximum.  A `false` here
        /// means the fit sits at a saddle or a rank-deficient point and the
        /// standard errors are suspect.
        pos_def: bool,
    },
    Unavailable {
        reason: String,
    },
}

impl VarCov {
    pub fn matrix(&self) -> Option<&DMatrix<f64>> {
        match self {
            VarCov::Available { matrix, .. } => Some(matrix),
            VarCov::Unavailable { .. } => None,
        }
    }

    /// Standard error of the i-th flat parameter; `None` when the matrix is
    /// unavailable or the diagonal entry is not a valid variance.
    pub fn se(&self, i: usize) -> Option<f64> {
        let m = self.matrix()?;
        if i >= m.nrows() {
            return None;
        }
        let v = m[(i, i)];
        if v >= 0.0 {
            Some(v.sqrt())
        } else {
            None
        }
    }
}

/// Invert the negative Hessian via symmetric eigen-decomposition.
///
/// `pseudo_inverse = false` reports an overly ill-conditioned Hessian as
/// `Unavailable`; `true` drops near-null directions instead (their variances
/// come out zero), which is occasionally useful for diagnostics but is never
/// the default.
pub fn varcov(hessian: &DMatrix<f64>, pseudo_inverse: bool) -> VarCov {
    let n = hessian.nrows();
    if n == 0 || hessian.ncols() != n {
        return VarCov::Unavailable { reason: "empty or non-square Hessian".into() };
    }
    if hessian.iter().any(|v| !v.is_finite()) {
        return VarCov::Unavailable { reason: "Hessian has non-finite entries".into() };
    }
    let sym = (hessian + hessian.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let max_abs = eig.eigenvalues.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    if max_abs == 0.0 {
        return VarCov::Unavailable { reason: "Hessian is identically zero".into() };
    }
    let min_abs = eig.eigenvalues.iter().fold(f64::INFINITY, |a, &v| a.min(v.abs()));
    let condition = max_abs / min_abs;

    let drop_below = max_abs / MAX_CONDITION;
    if condition > MAX_CONDITION && !pseudo_inverse {
        return VarCov::Unavailable {
            reason: format!(
                "Hessian condition number {condition:.3e} exceeds {MAX_CONDITION:.0e}; \
                 the model is not identified at the estimates"
            ),
        };
    }

    // V = -Q diag(1/eig) Q', with near-null eigenvalues dropped under the
    // pseudo-inverse; pos_def records whether every kept direction had the
    // concave-down sign expected at an interior maximum.
    let mut inv_diag = DVector::zeros(n);
    let mut pos_def = true;
    for (j, &ev) in eig.eigenvalues.iter().enumerate() {
        if ev.abs() < drop_below {
            inv_diag[j] = 0.0;
            pos_def = false;
        } else {
            inv_diag[j] = -1.0 / ev;
            if ev >= 0.0 {
                pos_def = false;
            }
        }
    }
    let q = &eig.eigenvectors;
    let matrix = q * DMatrix::from_diagonal(&inv_diag) * q.transpose();
    VarCov::Available { matrix, pos_def }
}

/// Which test produced a `TestResult`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestKind {
    Wald,
    LikelihoodRatio,
}

impl std::fmt::Display for TestKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TestKind::Wald => write!(f, "Wald"),
            TestKind::LikelihoodRatio => write!(f, "likelihood ratio"),
        }
    }
}

/// A chi-square test: statistic, degrees of freedom, and upper-tail p-value.
#[derive(Debug, Clone)]
pub struct TestResult {
    pub kind: TestKind,
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

fn chi_sq_sf(statistic: f64, dof: usize) -> f64 {
    if statistic <= 0.0 {
        return 1.0;
    }
    let chi = ChiSquared::new(dof as f64).expect("dof >= 1");
    chi.sf(statistic)
}

/// Two-sided p-value for a standard-normal z statistic.
fn normal_two_sided(z: f64) -> f64 {
    let std = Normal::new(0.0, 1.0).expect("unit normal");
    2.0 * std.sf(z.abs())
}

fn quadratic_form(block: &DMatrix<f64>, c: &DVector<f64>) -> Result<f64> {
    let solved = block
        .clone()
        .lu()
        .solve(c)
        .ok_or_else(|| Error::NoVarCov("singular covariance block in Wald statistic".into()))?;
    // exact zero restriction vectors give exactly zero, never -0.0 noise
    Ok(c.dot(&solved).max(0.0))
}

fn require_varcov(fm: &FittedModel) -> Result<&DMatrix<f64>> {
    match &fm.varcov {
        VarCov::Available { matrix, .. } => Ok(matrix),
        VarCov::Unavailable { reason } => Err(Error::NoVarCov(reason.clone())),
    }
}

/// Joint Wald test that every inflation-equation coefficient is zero.
///
/// Under the link used here, `gamma = 0` places each observation's inflation
/// weight at the midpoint of its interval — so this tests "no systematic
/// inflation signal", with dof equal to the inflation-equation length.
pub fn one_wald(fm: &FittedModel) -> Result<TestResult> {
    if !fm.params.family.is_one_inflated() {
        return Err(Error::NotOneInflated(fm.params.family.label()));
    }
    let v = require_varcov(fm)?;
    let k = fm.x_names.len();
    let p = fm.params.gamma.len();
    let block = v.view((k, k), (p, p)).into_owned();
    let c = DVector::from_column_slice(&fm.params.gamma);
    let statistic = quadratic_form(&block, &c)?;
    Ok(TestResult {
        kind: TestKind::Wald,
        statistic,
        dof: p,
        p_value: chi_sq_sf(statistic, p),
    })
}

/// Joint Wald test that a named regressor carries no signal: all of its
/// coefficients — count-equation, inflation-equation, or both — are zero.
pub fn signif_wald(fm: &FittedModel, regressor: &str) -> Result<TestResult> {
    let mut idx = Vec::new();
    if let Some(i) = fm.beta_index(regressor) {
        idx.push(i);
    }
    if let Some(i) = fm.gamma_index(regressor) {
        idx.push(i);
    }
    if idx.is_empty() {
        return Err(Error::UnknownColumn(regressor.to_string()));
    }
    let v = require_varcov(fm)?;
    let flat = fm.flat_estimates();
    let m = idx.len();
    let mut block = DMatrix::zeros(m, m);
    let mut c = DVector::zeros(m);
    for (a, &ia) in idx.iter().enumerate() {
        c[a] = flat[ia];
        for (b, &ib) in idx.iter().enumerate() {
            block[(a, b)] = v[(ia, ib)];
        }
    }
    let statistic = quadratic_form(&block, &c)?;
    Ok(TestResult {
        kind: TestKind::Wald,
        statistic,
        dof: m,
        p_value: chi_sq_sf(statistic, m),
    })
}

/// Likelihood-ratio test of a one-inflated fit against its nested base fit
/// on the same data: `2 (l_oi - l_base)`, chi-square with dof equal to the
/// inflation-equation length.
///
/// A tiny negative statistic is clamped to zero; a material one is reported
/// as a `NestingViolation`.  The latter is not necessarily a failed fit: on
/// data with no excess ones the logistic inflation equation can be unable to
/// match the base model's own ones-probabilities, so the one-inflated
/// likelihood genuinely lands below the base likelihood.  Callers measuring
/// rejection rates should count that outcome as "do not reject".
pub fn one_lrt(fm_oi: &FittedModel, fm_base: &FittedModel) -> Result<TestResult> {
    let oi_family = fm_oi.params.family;
    if !oi_family.is_one_inflated() {
        return Err(Error::NotOneInflated(oi_family.label()));
    }
    if fm_base.params.family != oi_family.base() {
        return Err(Error::NotNested(format!(
            "{} is not the base family of {}",
            fm_base.params.family, oi_family
        )));
    }
    if fm_oi.n != fm_base.n {
        return Err(Error::NotNested(format!(
            "fits use different samples: n = {} vs n = {}",
            fm_oi.n, fm_base.n
        )));
    }
    if fm_oi.x_names != fm_base.x_names {
        return Err(Error::NotNested(
            "fits use different count-equation designs".into(),
        ));
    }
    let mut statistic = 2.0 * (fm_oi.loglik - fm_base.loglik);
    if statistic < 0.0 {
        if statistic > -1e-6 {
            statistic = 0.0;
        } else {
            return Err(Error::NestingViolation { oi: fm_oi.loglik, base: fm_base.loglik });
        }
    }
    let dof = fm_oi.params.gamma.len();
    Ok(TestResult {
        kind: TestKind::LikelihoodRatio,
        statistic,
        dof,
        p_value: chi_sq_sf(statistic, dof),
    })
}

/// Delta-method standard errors for `g(theta)`: `sqrt(diag(J V J'))` where
/// `J` is the Jacobian of `g` at the estimates (one row per component).
/// Round-off-scale negative variances clamp to zero; materially negative
/// ones mean `V` was not a covariance matrix and are reported as an error.
pub fn delta_method(jacobian: &DMatrix<f64>, v: &DMatrix<f64>) -> Result<Vec<f64>> {
    if jacobian.ncols() != v.nrows() || v.nrows() != v.ncols() {
        return Err(Error::DimensionMismatch {
            expected: jacobian.ncols(),
            actual: v.nrows(),
        });
    }
    let jvj = jacobian * v * jacobian.transpose();
    let scale = jvj.diagonal().iter().fold(1.0f64, |a, &d| a.max(d.abs()));
    let mut out = Vec::with_capacity(jvj.nrows());
    for i in 0..jvj.nrows() {
        let var = jvj[(i, i)];
        if var < -1e-8 * scale {
            return Err(Error::NoVarCov(format!(
                "delta-method variance for component {i} is negative ({var:.3e})"
            )));
        }
        out.push(var.max(0.0).sqrt());
    }
    Ok(out)
}

/// One line of the coefficient table.
#[derive(Debug, Clone)]
pub struct SummaryRow {
    pub name: String,
    pub estimate: f64,
    pub se: Option<f64>,
    pub z: Option<f64>,
    pub p: Option<f64>,
}

/// Coefficient table plus fit-level diagnostics.
#[derive(Debug, Clone)]
pub struct SummaryTable {
    pub family: Family,
    pub rows: Vec<SummaryRow>,
    pub loglik: f64,
    pub n: usize,
    pub converged: bool,
    /// Mean fitted inflation weight (one-inflated families only).  Negative
    /// values mean net one-deflation.
    pub avg_one_inflation: Option<f64>,
    /// Mean absolute fitted inflation weight — the average distance from the
    /// no-adjustment point, regardless of direction.
    pub avg_abs_one_inflation: Option<f64>,
}

/// Build the summary table for a fitted model, recomputing each
/// observation's inflation weight from the design for the averages.
pub fn summarize(fm: &FittedModel, dd: &DesignData) -> Result<SummaryTable> {
    let labels = fm.param_labels();
    let flat = fm.flat_estimates();
    let rows = labels
        .into_iter()
        .zip(flat)
        .enumerate()
        .map(|(i, (name, estimate))| {
            let se = fm.varcov.se(i);
            let z = se.and_then(|s| if s > 0.0 { Some(estimate / s) } else { None });
            let p = z.map(normal_two_sided);
            SummaryRow { name, estimate, se, z, p }
        })
        .collect();

    let (avg, avg_abs) = if fm.params.family.is_one_inflated() {
        let linked = LinkedParams::from_design(&fm.params, dd)?;
        let n = linked.n() as f64;
        let sum: f64 = linked.omega.iter().sum();
        let sum_abs: f64 = linked.omega.iter().map(|w| w.abs()).sum();
        (Some(sum / n), Some(sum_abs / n))
    } else {
        (None, None)
    };

    Ok(SummaryTable {
        family: fm.params.family,
        rows,
        loglik: fm.loglik,
        n: fm.n,
        converged: fm.converged,
        avg_one_inflation: avg,
        avg_abs_one_inflation: avg_abs,
    })
}
