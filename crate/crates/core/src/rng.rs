//! Seeded sampling from all four families.
//!
//! Streams are ChaCha8 counters: `master_seed` fixes the key and `stream_id`
//! selects an independent substream, so replication r of a simulation can
//! draw from stream r and the whole study stays reproducible under parallel
//! scheduling.
//!
//! One-inflated draws take one of two routes per observation.  A
//! non-negative weight is a genuine mixture, so a Bernoulli(omega) coin
//! picks "structural one" versus a zero-rejected draw from the base
//! distribution.  A negative weight (one-deflation) is not a mixture — no
//! coin has a negative head probability — so the draw inverts the adjusted
//! CDF directly, walking the support with the pmf ratio recursion.

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::dists::{base_one_prob, lambda_link, lower_bound, omega_link, Family, LinkedParams, Params};
use crate::error::Error;
use crate::Result;

/// Zero-rejection attempts before giving up (base draws almost surely
/// produce a positive count long before this unless lambda is pathological).
const REJECTION_CAP: usize = 10_000;
/// Support walk limit for the deflation inversion sampler.
const INVERSION_CAP: usize = 10_000_000;

/// A reproducible stream address: key plus substream counter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    #[serde(default)]
    pub stream_id: u64,
}

impl SeedSpec {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        SeedSpec { master_seed, stream_id }
    }

    /// A fresh generator positioned at this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

impl Default for SeedSpec {
    fn default() -> Self {
        SeedSpec { master_seed: 0, stream_id: 0 }
    }
}

/// One zero-truncated base draw by rejection from the untruncated family.
fn base_truncated_draw(
    family: Family,
    lam: f64,
    alpha: f64,
    rng: &mut ChaCha8Rng,
) -> Result<u64> {
    for _ in 0..REJECTION_CAP {
        let y = match family.base() {
            Family::Pp => {
                let pois = rand_distr::Poisson::new(lam)
                    .map_err(|e| Error::BadParams(format!("poisson({lam}): {e}")))?;
                pois.sample(rng) as u64
            }
            Family::Ztnb => {
                // negative binomial as a gamma-mixed Poisson: the gamma has
                // mean lambda and shape alpha
                let gamma = rand_distr::Gamma::new(alpha, lam / alpha)
                    .map_err(|e| Error::BadParams(format!("gamma({alpha},{}): {e}", lam / alpha)))?;
                let g = gamma.sample(rng);
                if !(g > 0.0 && g.is_finite()) {
                    // an underflowed mixing draw is a Poisson(0): a zero
                    continue;
                }
                let pois = rand_distr::Poisson::new(g)
                    .map_err(|e| Error::BadParams(format!("poisson({g}): {e}")))?;
                pois.sample(rng) as u64
            }
            _ => unreachable!("base() returns a base family"),
        };
        if y > 0 {
            return Ok(y);
        }
    }
    Err(Error::SamplerCap(REJECTION_CAP))
}

/// pmf(y+1)/pmf(y) on the base family's support.
#[inline]
fn pmf_ratio(family: Family, lam: f64, alpha: f64, y: u64) -> f64 {
    match family.base() {
        Family::Pp => lam / (y as f64 + 1.0),
        Family::Ztnb => (alpha + y as f64) / (y as f64 + 1.0) * (lam / (alpha + lam)),
        _ => unreachable!("base() returns a base family"),
    }
}

/// One draw with a negative inflation weight: invert the adjusted CDF.
fn deflated_draw(family: Family, lam: f64, omega: f64, alpha: f64, rng: &mut ChaCha8Rng) -> Result<u64> {
    let u: f64 = rng.gen();
    let f1 = base_one_prob(family, lam, alpha);
    let mut cum = (omega + (1.0 - omega) * f1).max(0.0); // adjusted pmf at 1
    let mut f = f1;
    let mut y = 1u64;
    while u > cum {
        if y as usize >= INVERSION_CAP {
            return Err(Error::SamplerCap(INVERSION_CAP));
        }
        f *= pmf_ratio(family, lam, alpha, y);
        y += 1;
        cum += (1.0 - omega) * f;
        if f == 0.0 {
            break; // tail mass exhausted below floating-point resolution
        }
    }
    Ok(y)
}

/// One draw from any family at one observation's parameters.
fn draw_one(
    family: Family,
    lam: f64,
    omega: f64,
    alpha: f64,
    rng: &mut ChaCha8Rng,
) -> Result<u64> {
    if !family.is_one_inflated() || omega == 0.0 {
        return base_truncated_draw(family, lam, alpha, rng);
    }
    if omega >= 0.0 {
        if rng.gen::<f64>() < omega {
            Ok(1)
        } else {
            base_truncated_draw(family, lam, alpha, rng)
        }
    } else {
        deflated_draw(family, lam, omega, alpha, rng)
    }
}

/// Draw one response per row of already-linked parameters.
pub fn sample_linked(lp: &LinkedParams, seed: SeedSpec) -> Result<Vec<u64>> {
    let mut rng = seed.rng();
    let alpha = lp.alpha.unwrap_or(f64::NAN);
    let mut out = Vec::with_capacity(lp.n());
    for i in 0..lp.n() {
        let omega = if lp.family.is_one_inflated() { lp.omega[i] } else { 0.0 };
        out.push(draw_one(lp.family, lp.lambda[i], omega, alpha, &mut rng)?);
    }
    Ok(out)
}

/// Draw one response per design row: `lambda_i = exp(x_i beta)` and, for the
/// one-inflated families, `omega_i` from the logistic score `z_i gamma`
/// (pass the inflation design as `z`).
pub fn sample(
    params: &Params,
    x: &DMatrix<f64>,
    z: Option<&DMatrix<f64>>,
    seed: SeedSpec,
) -> Result<Vec<u64>> {
    let n = x.nrows();
    if x.ncols() != params.beta.len() {
        return Err(Error::DimensionMismatch { expected: params.beta.len(), actual: x.ncols() });
    }
    let family = params.family;
    let alpha = params.alpha.unwrap_or(f64::NAN);

    let z = if family.is_one_inflated() {
        let z = z.ok_or_else(|| {
            Error::BadSpec(format!("{family} sampling needs an inflation design matrix"))
        })?;
        if z.nrows() != n {
            return Err(Error::DimensionMismatch { expected: n, actual: z.nrows() });
        }
        if z.ncols() != params.gamma.len() {
            return Err(Error::DimensionMismatch {
                expected: params.gamma.len(),
                actual: z.ncols(),
            });
        }
        Some(z)
    } else {
        None
    };

    let mut lambda = Vec::with_capacity(n);
    let mut omega = Vec::with_capacity(n);
    for i in 0..n {
        let mut xb = 0.0;
        for (j, b) in params.beta.iter().enumerate() {
            xb += x[(i, j)] * b;
        }
        let lam = lambda_link(xb);
        if !lam.is_finite() || lam == 0.0 {
            return Err(Error::BadParams(format!(
                "row {i}: linear predictor {xb} puts lambda out of range"
            )));
        }
        lambda.push(lam);
        if let Some(z) = z {
            let mut zg = 0.0;
            for (m, g) in params.gamma.iter().enumerate() {
                zg += z[(i, m)] * g;
            }
            omega.push(omega_link(lower_bound(family, lam, alpha), zg));
        }
    }
    let lp = LinkedParams {
        family,
        lambda,
        omega,
        alpha: family.has_dispersion().then_some(alpha),
    };
    sample_linked(&lp, seed)
}
