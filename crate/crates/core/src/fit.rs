//! Maximum-likelihood fitting for the four families.
//!
//! Log-likelihoods are written in the "indicator split" form: the y=1 term
//! isolates the one-inflation mass,
//!
//! ```text
//! l = sum_i { ln(1 - w_i)
//!             + [y_i = 1] ln( w_i/(1 - w_i) + f(1; lambda_i) )
//!             + [y_i > 1] ln f(y_i; lambda_i) }
//! ```
//!
//! which equals `sum_i ln pmf(y_i)` term by term but exposes the pieces the
//! optimizer cares about.  Out-of-domain parameter values (overflowing
//! `lambda`, `alpha <= 0`, a deflation weight at or below its bound) yield
//! `-inf` rather than a panic so the line search can route around them.
//!
//! Maximization is quasi-Newton (see `optim`) on the *mean* negative
//! log-likelihood — on that scale the default sup-norm gradient tolerance of
//! 1e-8 is attainable with central differences regardless of sample size.
//! The dispersion parameter is optimized as `ln alpha` to keep it positive;
//! one-inflated fits warm-start from their nested base fit with `gamma = 0`,
//! which places every inflation weight at its midpoint and is always
//! feasible.

use statrs::function::gamma::ln_gamma;

use crate::design::{DesignData, ModelSpec};
use crate::dists::{
    self, base_one_prob, lambda_link, ln_gamma_ratio, lower_bound, omega_link, Family,
    LinkedParams, Params,
};
use crate::error::Error;
use crate::infer::{self, VarCov};
use crate::optim::{self, OptimOptions};
use crate::Result;

/// Tuning knobs for `maximize`.  The defaults fit everything in this crate's
/// test suite; `start` overrides the automatic warm start when a caller wants
/// to probe sensitivity to initial values.
#[derive(Debug, Clone)]
pub struct FitOptions {
    /// Convergence: sup-norm of the mean-log-likelihood gradient.
    pub gradient_tolerance: f64,
    /// Cap on quasi-Newton iterations; `None` means 200 per free parameter.
    pub max_iterations: Option<usize>,
    /// Relative finite-difference step for gradients, h = scale*max(1,|t|).
    pub fd_step_scale: f64,
    /// Invert a singular Hessian by pseudo-inverse instead of reporting the
    /// variance-covariance matrix unavailable.  Off by default: an honest
    /// failure beats silent regularization.
    pub pseudo_inverse: bool,
    /// Optional explicit starting point (must match the family's shape).
    pub start: Option<Params>,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            gradient_tolerance: 1e-8,
            max_iterations: None,
            fd_step_scale: f64::EPSILON.cbrt(),
            pseudo_inverse: false,
            start: None,
        }
    }
}

/// A completed (not necessarily converged) maximization.
#[derive(Debug, Clone)]
pub struct FittedModel {
    pub spec: ModelSpec,
    /// Estimates on the natural scale (`alpha`, not `ln alpha`).
    pub params: Params,
    /// Maximized total log-likelihood.
    pub loglik: f64,
    pub converged: bool,
    /// Quasi-Newton iterations across all stages (base warm start included).
    pub iterations: usize,
    /// Sup-norm of the mean-log-likelihood gradient at the returned point.
    pub gradient_sup_norm: f64,
    pub n: usize,
    /// Design column names, `(Intercept)` first.
    pub x_names: Vec<String>,
    pub z_names: Vec<String>,
    pub varcov: VarCov,
    /// Human-readable warnings (near-boundary estimates and the like).
    pub notes: Vec<String>,
}

impl FittedModel {
    /// Number of free parameters.
    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    /// Flat parameter vector in reporting order: beta, gamma, alpha.
    pub fn flat_estimates(&self) -> Vec<f64> {
        let mut v = self.params.beta.clone();
        v.extend_from_slice(&self.params.gamma);
        if let Some(a) = self.params.alpha {
            v.push(a);
        }
        v
    }

    /// Unique labels for the flat parameter vector: count-equation names
    /// verbatim, inflation-equation names prefixed, then `alpha`.
    pub fn param_labels(&self) -> Vec<String> {
        let mut labels: Vec<String> = self.x_names.iter().map(|n| format!("count:{n}")).collect();
        labels.extend(self.z_names.iter().map(|n| format!("infl:{n}")));
        if self.params.alpha.is_some() {
            labels.push("alpha".to_string());
        }
        labels
    }

    /// Flat index of a count-equation coefficient.
    pub fn beta_index(&self, name: &str) -> Option<usize> {
        self.x_names.iter().position(|n| n == name)
    }

    /// Flat index of an inflation-equation coefficient.
    pub fn gamma_index(&self, name: &str) -> Option<usize> {
        self.z_names.iter().position(|n| n == name).map(|j| self.x_names.len() + j)
    }
}

/// ln(y!) — exact zero for y in {0, 1}, log-gamma otherwise.  Log-space
/// throughout: stays finite far past the point where y! itself overflows.
pub fn log_factorial(y: u64) -> f64 {
    if y < 2 {
        0.0
    } else {
        ln_gamma(y as f64 + 1.0)
    }
}

/// ln(e^x - 1) without overflow (mirrors the kernel in `dists`).
fn ln_expm1(x: f64) -> f64 {
    if x > 33.0 {
        x + (-(-x).exp()).ln_1p()
    } else {
        x.exp_m1().ln()
    }
}

#[inline]
fn dot_row(m: &nalgebra::DMatrix<f64>, i: usize, coef: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (j, c) in coef.iter().enumerate() {
        acc += m[(i, j)] * c;
    }
    acc
}

/// Positive Poisson log-likelihood; `-inf` when any `lambda_i` overflows or
/// underflows to zero.
pub fn loglik_pp(beta: &[f64], dd: &DesignData) -> f64 {
    debug_assert_eq!(beta.len(), dd.x.ncols());
    let mut ll = 0.0;
    for i in 0..dd.n() {
        let xb = dot_row(&dd.x, i, beta);
        let lam = lambda_link(xb);
        if !lam.is_finite() || lam == 0.0 {
            return f64::NEG_INFINITY;
        }
        // ln lambda = x'beta exactly; no exp/ln round trip
        ll += dd.y[i] as f64 * xb - ln_expm1(lam) - log_factorial(dd.y[i]);
    }
    if ll.is_finite() {
        ll
    } else {
        f64::NEG_INFINITY
    }
}

/// Zero-truncated negative binomial log-likelihood.
pub fn loglik_ztnb(beta: &[f64], alpha: f64, dd: &DesignData) -> f64 {
    debug_assert_eq!(beta.len(), dd.x.ncols());
    if !(alpha.is_finite() && alpha > 0.0) {
        return f64::NEG_INFINITY;
    }
    let ln_alpha = alpha.ln();
    let mut ll = 0.0;
    for i in 0..dd.n() {
        let xb = dot_row(&dd.x, i, beta);
        let lam = lambda_link(xb);
        if !lam.is_finite() || lam == 0.0 {
            return f64::NEG_INFINITY;
        }
        let lt = (lam / alpha).ln_1p(); // ln(1 + theta)
        let u = -alpha * lt; // ln of untruncated P(0)
        let ln_trunc = (-u.exp_m1()).ln(); // ln(1 - P(0))
        ll += ln_gamma_ratio(alpha, dd.y[i]) - log_factorial(dd.y[i]) + u
            + dd.y[i] as f64 * (xb - ln_alpha - lt)
            - ln_trunc;
    }
    if ll.is_finite() {
        ll
    } else {
        f64::NEG_INFINITY
    }
}

/// One-inflated positive Poisson log-likelihood (indicator-split form).
pub fn loglik_oipp(beta: &[f64], gamma: &[f64], dd: &DesignData) -> f64 {
    debug_assert_eq!(beta.len(), dd.x.ncols());
    debug_assert_eq!(gamma.len(), dd.z.ncols());
    let mut ll = 0.0;
    for i in 0..dd.n() {
        let xb = dot_row(&dd.x, i, beta);
        let lam = lambda_link(xb);
        if !lam.is_finite() || lam == 0.0 {
            return f64::NEG_INFINITY;
        }
        let lower = lower_bound(Family::Oipp, lam, f64::NAN);
        let omega = omega_link(lower, dot_row(&dd.z, i, gamma));
        ll += (1.0 - omega).ln();
        if dd.ones_mask[i] {
            let arg = omega / (1.0 - omega) + base_one_prob(Family::Oipp, lam, f64::NAN);
            if arg <= 0.0 {
                return f64::NEG_INFINITY;
            }
            ll += arg.ln();
        } else {
            ll += dd.y[i] as f64 * xb - ln_expm1(lam) - log_factorial(dd.y[i]);
        }
    }
    if ll.is_finite() {
        ll
    } else {
        f64::NEG_INFINITY
    }
}

/// One-inflated zero-truncated negative binomial log-likelihood.
pub fn loglik_oiztnb(beta: &[f64], gamma: &[f64], alpha: f64, dd: &DesignData) -> f64 {
    debug_assert_eq!(beta.len(), dd.x.ncols());
    debug_assert_eq!(gamma.len(), dd.z.ncols());
    if !(alpha.is_finite() && alpha > 0.0) {
        return f64::NEG_INFINITY;
    }
    let ln_alpha = alpha.ln();
    let mut ll = 0.0;
    for i in 0..dd.n() {
        let xb = dot_row(&dd.x, i, beta);
        let lam = lambda_link(xb);
        if !lam.is_finite() || lam == 0.0 {
            return f64::NEG_INFINITY;
        }
        let lower = lower_bound(Family::Oiztnb, lam, alpha);
        let omega = omega_link(lower, dot_row(&dd.z, i, gamma));
        ll += (1.0 - omega).ln();
        if dd.ones_mask[i] {
            let arg = omega / (1.0 - omega) + base_one_prob(Family::Oiztnb, lam, alpha);
            if arg <= 0.0 {
                return f64::NEG_INFINITY;
            }
            ll += arg.ln();
        } else {
            let lt = (lam / alpha).ln_1p();
            let u = -alpha * lt;
            let ln_trunc = (-u.exp_m1()).ln();
            ll += ln_gamma_ratio(alpha, dd.y[i]) - log_factorial(dd.y[i]) + u
                + dd.y[i] as f64 * (xb - ln_alpha - lt)
                - ln_trunc;
        }
    }
    if ll.is_finite() {
        ll
    } else {
        f64::NEG_INFINITY
    }
}

/// Safe starting values: intercept at `ln(mean y)` with zero slopes, `gamma`
/// all zero (every inflation weight at its midpoint, so the likelihood is
/// finite), and a method-of-moments dispersion floored at 0.1 (1.0 when the
/// sample shows no overdispersion).
pub fn starting_values(spec: &ModelSpec, dd: &DesignData) -> Params {
    let n = dd.n() as f64;
    let mean_y = dd.y.iter().map(|&v| v as f64).sum::<f64>() / n;
    let var_y = if dd.n() > 1 {
        dd.y.iter().map(|&v| (v as f64 - mean_y).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let mut beta = vec![0.0; dd.x.ncols()];
    beta[0] = mean_y.ln();
    let gamma = if spec.family.is_one_inflated() {
        vec![0.0; dd.z.ncols()]
    } else {
        Vec::new()
    };
    let alpha = if spec.family.has_dispersion() {
        Some(if var_y > mean_y {
            (mean_y * mean_y / (var_y - mean_y)).max(0.1)
        } else {
            1.0
        })
    } else {
        None
    };
    Params { family: spec.family, beta, gamma, alpha }
}

/// Internal parameter layout for the optimizer: beta, then gamma (OI), then
/// ln(alpha) (NB families).
fn pack(family: Family, beta: &[f64], gamma: &[f64], alpha: Option<f64>) -> Vec<f64> {
    let mut th = beta.to_vec();
    if family.is_one_inflated() {
        th.extend_from_slice(gamma);
    }
    if family.has_dispersion() {
        th.push(alpha.expect("dispersion family carries alpha").ln());
    }
    th
}

fn mean_nll(family: Family, dd: &DesignData, k: usize, p: usize) -> impl Fn(&[f64]) -> f64 + '_ {
    let n = dd.n() as f64;
    move |th: &[f64]| {
        let beta = &th[..k];
        let ll = match family {
            Family::Pp => loglik_pp(beta, dd),
            Family::Ztnb => loglik_ztnb(beta, th[k].exp(), dd),
            Family::Oipp => loglik_oipp(beta, &th[k..k + p], dd),
            Family::Oiztnb => loglik_oiztnb(beta, &th[k..k + p], th[k + p].exp(), dd),
        };
        -ll / n
    }
}

/// Per-iteration cap on movement along ln(alpha): one step may change the
/// dispersion by at most a factor e^2 ~ 7.4.  The negative log-likelihood in
/// ln(alpha) is steep below the optimum but flattens into the Poisson-limit
/// plateau above it, so an uncapped quasi-Newton step sized on the steep side
/// can vault straight over the optimum onto the plateau, where gradients
/// vanish and the search wrongly settles.  A few capped iterations still
/// cross the whole plausible dispersion range.
const LN_ALPHA_MAX_STEP: f64 = 2.0;

/// ln(alpha) beyond which the dispersion has effectively reached its
/// Poisson-limit plateau (alpha ~ 100 already leaves the truncated NB within
/// noise of the truncated Poisson at any realistic sample size).
const LN_ALPHA_PLATEAU: f64 = 4.6;

/// ln(alpha) below which the fit has fallen into the alpha -> 0 corner,
/// where the truncated NB degenerates toward a logarithmic-series tail with
/// the count coefficients driven to absurd values (lambda -> 0).  Real data
/// rarely support alpha under 0.05; a restart is tried from there.
const LN_ALPHA_COLLAPSE: f64 = -3.0;

/// Step caps for a packed parameter vector: regression coefficients are
/// uncapped; the trailing ln(alpha) coordinate, when present, is clamped.
fn step_caps(n_coords: usize, has_dispersion: bool) -> Vec<f64> {
    if has_dispersion {
        let mut caps = vec![f64::INFINITY; n_coords];
        caps[n_coords - 1] = LN_ALPHA_MAX_STEP;
        caps
    } else {
        Vec::new()
    }
}

/// Minimize, and if the dispersion coordinate lands on either of its
/// degenerate boundaries, try once more from a pulled-back point and keep
/// whichever result attains the lower objective.
///
/// Both boundaries are legitimate suprema for *some* samples, but they also
/// capture searches that never saw the interior optimum:
///
/// * alpha -> infinity (the Poisson-limit plateau): the joint ascent from a
///   poor start keeps improving through the regression coefficients while
///   ln(alpha) drifts upward; once the coefficients settle, the dispersion
///   gradient has vanished and the search stops on the plateau.  The fitted
///   coefficients themselves are fine, so the retry keeps them and only
///   pulls alpha back to 1, isolating the dispersion ascent — which then
///   walks to the interior optimum whenever one beats the plateau.
///
/// * alpha -> 0 (the logarithmic-series corner): here the count
///   coefficients co-degenerate (lambda -> 0 explains the tail through pure
///   overdispersion), so they cannot seed the retry; the count block is
///   reset to the model-free starting values instead.  Any inflation
///   coefficients are kept — their likelihood term separates from the count
///   block and survives the collapse intact.
///
/// Genuine boundary samples come back to the same boundary and keep their
/// first result; rescued ones leave with a strictly better likelihood.
fn minimize_with_boundary_restart<F: Fn(&[f64]) -> f64>(
    obj: &F,
    theta0: &[f64],
    opts: &optim::OptimOptions,
    ln_alpha: Option<usize>,
    count_start: &[f64],
) -> optim::OptimResult {
    let mut res = optim::minimize(obj, theta0, opts);
    let Some(ix) = ln_alpha else { return res };
    let retry_from = if res.x[ix] > LN_ALPHA_PLATEAU {
        let mut t = res.x.clone();
        t[ix] = 0.0;
        Some(t)
    } else if res.x[ix] < LN_ALPHA_COLLAPSE {
        let mut t = res.x.clone();
        t[..count_start.len()].copy_from_slice(count_start);
        t[ix] = 0.0;
        Some(t)
    } else {
        None
    };
    if let Some(t) = retry_from {
        let mut retry = optim::minimize(obj, &t, opts);
        retry.iterations += res.iterations;
        if retry.value < res.value {
            return retry;
        }
        res.iterations = retry.iterations;
    }
    res
}

/// Maximum-likelihood fit.  Non-convergence is a reported state, not an
/// error: the returned model carries `converged = false` plus diagnostics,
/// and downstream consumers decide how much to trust it.
pub fn maximize(spec: &ModelSpec, dd: &DesignData, opts: &FitOptions) -> Result<FittedModel> {
    let family = spec.family;
    let k = dd.x.ncols();
    let p = if family.is_one_inflated() { dd.z.ncols() } else { 0 };
    if family.is_one_inflated() && dd.z.ncols() == 0 {
        return Err(Error::BadSpec(format!(
            "{family} needs an inflation design; build one with z terms (or intercept-only)"
        )));
    }
    if dd.n() == 0 {
        return Err(Error::BadSpec("empty design".into()));
    }

    let n_params = k + p + usize::from(family.has_dispersion());
    let sv = starting_values(spec, dd);
    let mut iterations = 0;

    // Starting point: caller override, or nested warm start for OI families.
    let theta0 = if let Some(start) = &opts.start {
        if start.family != family {
            return Err(Error::BadParams(format!(
                "start values are for {}, fitting {family}",
                start.family
            )));
        }
        if start.beta.len() != k || start.gamma.len() != p {
            return Err(Error::DimensionMismatch {
                expected: k + p,
                actual: start.beta.len() + start.gamma.len(),
            });
        }
        pack(family, &start.beta, &start.gamma, start.alpha)
    } else {
        match family {
            Family::Pp | Family::Ztnb => pack(family, &sv.beta, &[], sv.alpha),
            Family::Oipp | Family::Oiztnb => {
                // fit the nested base model first, then open the inflation
                // equation at gamma = 0 (midpoint weights)
                let base = family.base();
                let base_obj = mean_nll(base, dd, k, 0);
                let base_start = pack(base, &sv.beta, &[], sv.alpha);
                let base_res = minimize_with_boundary_restart(
                    &base_obj,
                    &base_start,
                    &OptimOptions {
                        gradient_tolerance: opts.gradient_tolerance,
                        max_iterations: opts
                            .max_iterations
                            .unwrap_or(200 * (k + usize::from(base.has_dispersion()))),
                        fd_step_scale: opts.fd_step_scale,
                        max_step: step_caps(
                            k + usize::from(base.has_dispersion()),
                            base.has_dispersion(),
                        ),
                    },
                    base.has_dispersion().then_some(k),
                    &sv.beta,
                );
                iterations += base_res.iterations;
                let mut th = base_res.x[..k].to_vec();
                th.extend(std::iter::repeat(0.0).take(p));
                if family.has_dispersion() {
                    th.push(base_res.x[k]); // already ln(alpha)
                }
                th
            }
        }
    };

    let obj = mean_nll(family, dd, k, p);
    let res = minimize_with_boundary_restart(
        &obj,
        &theta0,
        &OptimOptions {
            gradient_tolerance: opts.gradient_tolerance,
            max_iterations: opts.max_iterations.unwrap_or(200 * n_params),
            fd_step_scale: opts.fd_step_scale,
            max_step: step_caps(n_params, family.has_dispersion()),
        },
        family.has_dispersion().then_some(k + p),
        &sv.beta,
    );
    iterations += res.iterations;

    let beta = res.x[..k].to_vec();
    let gamma = res.x[k..k + p].to_vec();
    let alpha = family.has_dispersion().then(|| res.x[k + p].exp());
    let params = Params::new(family, beta, gamma, alpha)?;
    let loglik = if res.value.is_finite() {
        -res.value * dd.n() as f64
    } else {
        f64::NEG_INFINITY
    };

    // Numeric Hessian of the *total* log-likelihood on the natural scale
    // (alpha, not ln alpha), which is what the variance-covariance matrix
    // must invert.
    let flat = {
        let mut v = params.beta.clone();
        v.extend_from_slice(&params.gamma);
        if let Some(a) = params.alpha {
            v.push(a);
        }
        v
    };
    let total_ll = |v: &[f64]| match family {
        Family::Pp => loglik_pp(v, dd),
        Family::Ztnb => loglik_ztnb(&v[..k], v[k], dd),
        Family::Oipp => loglik_oipp(&v[..k], &v[k..k + p], dd),
        Family::Oiztnb => loglik_oiztnb(&v[..k], &v[k..k + p], v[k + p], dd),
    };
    let mut caps = vec![f64::INFINITY; flat.len()];
    if let Some(a) = params.alpha {
        caps[k + p] = a / 2.0; // keep alpha - h strictly positive
    }
    let varcov = if loglik.is_finite() {
        let hess = optim::numeric_hessian(&total_ll, &flat, f64::EPSILON.powf(0.25), &caps);
        infer::varcov(&hess, opts.pseudo_inverse)
    } else {
        VarCov::Unavailable { reason: "log-likelihood not finite at the returned point".into() }
    };

    let mut notes = Vec::new();
    if loglik.is_finite() {
        let linked = LinkedParams::from_design(&params, dd)?;
        let mean_lambda = linked.lambda.iter().sum::<f64>() / dd.n() as f64;
        if mean_lambda < 1e-4 {
            notes.push(
                "count-equation estimates sit near the lambda -> 0 boundary; \
                 the sample may be degenerate (nearly all counts equal to one)"
                    .to_string(),
            );
        }
    } else {
        notes.push("log-likelihood not finite at the returned point".to_string());
    }

    Ok(FittedModel {
        spec: spec.clone(),
        params,
        loglik,
        converged: res.converged,
        iterations,
        gradient_sup_norm: res.gradient_sup_norm,
        n: dd.n(),
        x_names: dd.x_names.clone(),
        z_names: if family.is_one_inflated() { dd.z_names.clone() } else { Vec::new() },
        varcov,
        notes,
    })
}

/// Expected count of each outcome `y = 1..=y_max` under the fitted model:
/// entry `y-1` is `sum_i pmf(y; lambda_i, omega_i, alpha)`.  Without an
/// explicit `y_max` the support is extended until at least `1 - 1e-6` of the
/// total mass (n) is covered.
pub fn predicted_counts(
    fm: &FittedModel,
    dd: &DesignData,
    y_max: Option<u64>,
) -> Result<Vec<f64>> {
    let linked = LinkedParams::from_design(&fm.params, dd)?;
    let n = dd.n() as f64;
    let alpha = fm.params.alpha.unwrap_or(f64::NAN);
    let is_oi = fm.params.family.is_one_inflated();
    let mut out = Vec::new();
    let mut covered = 0.0;
    let hard_cap = 200_000u64;
    let mut y = 1u64;
    loop {
        let mut tot = 0.0;
        for i in 0..dd.n() {
            let om = if is_oi { linked.omega[i] } else { 0.0 };
            tot += dists::pmf(fm.params.family, y, linked.lambda[i], om, alpha);
        }
        out.push(tot);
        covered += tot;
        match y_max {
            Some(cap) => {
                if y >= cap {
                    break;
                }
            }
            None => {
                if covered >= n * (1.0 - 1e-6) || y >= hard_cap {
                    break;
                }
            }
        }
        y += 1;
    }
    Ok(out)
}
