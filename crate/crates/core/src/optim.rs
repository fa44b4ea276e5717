//! Quasi-Newton minimization with finite-difference derivatives.
//!
//! A plain BFGS implementation (inverse-Hessian form) driving a backtracking
//! Armijo line search, with gradients by central differences.  There are no
//! analytic derivatives anywhere in the crate: the likelihood code is the
//! single source of truth and everything here differentiates it numerically.
//!
//! The objective is expected to return `+inf` (or NaN) outside its domain;
//! such points are simply rejected by the line search.  Convergence is
//! declared when the sup-norm of the numeric gradient falls below the
//! caller's tolerance, which the caller is responsible for choosing on a
//! scale where that is attainable (mean rather than total log-likelihood).

use nalgebra::{DMatrix, DVector};

pub(crate) struct OptimOptions {
    pub gradient_tolerance: f64,
    pub max_iterations: usize,
    /// Relative step for central differences: h_j = scale * max(1, |x_j|).
    pub fd_step_scale: f64,
    /// Per-coordinate cap on a single iteration's movement, as a trust
    /// region: when any |d_j| exceeds its cap the whole direction is scaled
    /// down to fit.  Needed for coordinates whose objective flattens out far
    /// from the optimum (a log-dispersion, say): a quasi-Newton step sized
    /// for the steep region can otherwise vault over the optimum onto the
    /// plateau, where gradients vanish and the search wrongly settles.
    /// Empty means uncapped.
    pub max_step: Vec<f64>,
}

pub(crate) struct OptimResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient_sup_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Central-difference gradient with per-coordinate relative steps.  Falls
/// back to a one-sided difference when the opposite evaluation leaves the
/// objective's domain.
pub(crate) fn gradient<F: Fn(&[f64]) -> f64>(
    f: &F,
    x: &[f64],
    fx: f64,
    scale: f64,
) -> DVector<f64> {
    let n = x.len();
    let mut g = DVector::zeros(n);
    let mut xp = x.to_vec();
    for j in 0..n {
        let h = scale * x[j].abs().max(1.0);
        xp[j] = x[j] + h;
        let fp = f(&xp);
        xp[j] = x[j] - h;
        let fm = f(&xp);
        xp[j] = x[j];
        g[j] = match (fp.is_finite(), fm.is_finite()) {
            (true, true) => (fp - fm) / (2.0 * h),
            (true, false) => (fp - fx) / h,
            (false, true) => (fx - fm) / h,
            (false, false) => 0.0,
        };
    }
    g
}

/// Central-difference Hessian (full matrix, symmetrized by construction).
/// Steps are relative with the usual fourth-root-of-epsilon scaling left to
/// the caller; `lower_caps` optionally bounds each step so that `x_j - h_j`
/// stays inside the domain (used for the dispersion coordinate).
pub(crate) fn numeric_hessian<F: Fn(&[f64]) -> f64>(
    f: &F,
    x: &[f64],
    scale: f64,
    lower_caps: &[f64],
) -> DMatrix<f64> {
    let n = x.len();
    let fx = f(x);
    let h: Vec<f64> = (0..n)
        .map(|j| {
            let mut hj = scale * x[j].abs().max(1.0);
            if lower_caps[j].is_finite() {
                hj = hj.min(lower_caps[j]);
            }
            hj
        })
        .collect();
    let mut m = DMatrix::zeros(n, n);
    let mut xt = x.to_vec();
    for j in 0..n {
        // diagonal: (f(x+h) - 2f(x) + f(x-h)) / h^2
        xt[j] = x[j] + h[j];
        let fp = f(&xt);
        xt[j] = x[j] - h[j];
        let fm = f(&xt);
        xt[j] = x[j];
        m[(j, j)] = (fp - 2.0 * fx + fm) / (h[j] * h[j]);
        // off-diagonal: four-point cross difference
        for l in (j + 1)..n {
            xt[j] = x[j] + h[j];
            xt[l] = x[l] + h[l];
            let fpp = f(&xt);
            xt[l] = x[l] - h[l];
            let fpm = f(&xt);
            xt[j] = x[j] - h[j];
            let fmm = f(&xt);
            xt[l] = x[l] + h[l];
            let fmp = f(&xt);
            xt[j] = x[j];
            xt[l] = x[l];
            let v = (fpp - fpm - fmp + fmm) / (4.0 * h[j] * h[l]);
            m[(j, l)] = v;
            m[(l, j)] = v;
        }
    }
    m
}

/// Minimizes `f` from `x0`.  Never panics on domain trouble: if the starting
/// point itself is infeasible the result simply reports non-convergence.
pub(crate) fn minimize<F: Fn(&[f64]) -> f64>(
    f: &F,
    x0: &[f64],
    opts: &OptimOptions,
) -> OptimResult {
    let n = x0.len();
    let mut x = DVector::from_column_slice(x0);
    let mut fx = f(x.as_slice());
    if !fx.is_finite() {
        return OptimResult {
            x: x0.to_vec(),
            value: fx,
            gradient_sup_norm: f64::INFINITY,
            iterations: 0,
            converged: false,
        };
    }
    let mut g = gradient(f, x.as_slice(), fx, opts.fd_step_scale);
    let mut h_inv = DMatrix::<f64>::identity(n, n);
    let mut scaled = false; // becomes true after the first curvature rescale
    let mut iterations = 0;
    let mut converged = false;

    while iterations < opts.max_iterations {
        let gnorm = g.amax();
        if gnorm < opts.gradient_tolerance {
            converged = true;
            break;
        }
        iterations += 1;

        let mut d = -(&h_inv * &g);
        let mut dg = d.dot(&g);
        if !(dg < 0.0) {
            // the approximation went bad; restart from steepest descent
            h_inv = DMatrix::identity(n, n);
            scaled = false;
            d = -g.clone();
            dg = d.dot(&g);
        }
        if !opts.max_step.is_empty() {
            // shrink the whole step to respect every coordinate cap; a
            // positive rescale keeps d a descent direction
            let mut shrink = 1.0_f64;
            for (dj, cap) in d.iter().zip(&opts.max_step) {
                if cap.is_finite() && dj.abs() > *cap {
                    shrink = shrink.min(cap / dj.abs());
                }
            }
            if shrink < 1.0 {
                d *= shrink;
                dg *= shrink;
            }
        }

        // Backtracking Armijo search with a small absolute slack so the
        // search can still accept steps when |f| is large and the expected
        // decrease is at rounding scale.
        let slack = 4.0 * f64::EPSILON * (1.0 + fx.abs());
        let mut accepted = None;
        let mut tried_reset = false;
        loop {
            let mut t = 1.0;
            for _ in 0..60 {
                let xt = &x + &d * t;
                let ft = f(xt.as_slice());
                if ft.is_finite() && ft <= fx + 1e-4 * t * dg + slack {
                    accepted = Some((xt, ft));
                    break;
                }
                t *= 0.5;
            }
            if accepted.is_some() || tried_reset {
                break;
            }
            // one retry along steepest descent before giving up
            tried_reset = true;
            h_inv = DMatrix::identity(n, n);
            scaled = false;
            d = -g.clone();
            dg = d.dot(&g);
        }
        let Some((x_new, f_new)) = accepted else {
            break; // line search stalled; gradient check above has the verdict
        };

        let g_new = gradient(f, x_new.as_slice(), f_new, opts.fd_step_scale);
        let s = &x_new - &x;
        let yv = &g_new - &g;
        let sy = s.dot(&yv);
        if sy > 1e-10 * s.norm() * yv.norm() {
            if !scaled {
                // standard initial scaling: H0 = (s'y / y'y) I
                let yy = yv.dot(&yv);
                if yy > 0.0 {
                    h_inv *= sy / yy;
                }
                scaled = true;
            }
            // BFGS inverse update:
            // H' = (I - s y'/sy) H (I - y s'/sy) + s s'/sy
            let rho = 1.0 / sy;
            let hy = &h_inv * &yv;
            let yhy = yv.dot(&hy);
            // H' = H - rho(s (Hy)' + (Hy) s') + rho^2 (y'Hy) s s' + rho s s'
            let ss = &s * s.transpose();
            let shy = &s * hy.transpose();
            h_inv = &h_inv - rho * (&shy + shy.transpose()) + (rho * rho * yhy + rho) * ss;
        }
        x = x_new;
        fx = f_new;
        g = g_new;
    }

    OptimResult {
        x: x.as_slice().to_vec(),
        value: fx,
        gradient_sup_norm: g.amax(),
        iterations,
        converged,
    }
}
