//! Shared helpers for the integration tests: draw a benchmark-style design
//! (intercept, one normal regressor, one Bernoulli dummy) and a response
//! from any of the four families, and package them as `DesignData`.
//!
//! Each integration-test binary compiles this module separately and uses a
//! different subset of it, so unused-item warnings are suppressed here.
#![allow(dead_code)]

use nalgebra::DMatrix;
use oicount::{build_design, load_csv, maximize, sample, Dataset, DesignData, Family, FitOptions, FittedModel, ModelSpec, Params, SeedSpec};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;

pub const COLUMN_NAMES: [&str; 3] = ["(Intercept)", "x1", "x2"];

/// Intercept + N(10,1) + Bernoulli(0.5), drawn from the given stream.
pub fn draw_design(n: usize, seed: SeedSpec) -> DMatrix<f64> {
    let mut rng: ChaCha8Rng = seed.rng();
    let normal = rand_distr::Normal::new(10.0, 1.0).unwrap();
    DMatrix::from_fn(n, 3, |_i, j| match j {
        0 => 1.0,
        1 => normal.sample(&mut rng),
        _ => f64::from(rng.gen::<f64>() < 0.5),
    })
}

/// One simulated dataset: fresh design, response drawn from `truth`, and a
/// `DesignData` whose inflation design mirrors the count design when the
/// requested fitting family is one-inflated.
pub fn simulate(truth: &Params, fit_family: Family, n: usize, seed: SeedSpec) -> DesignData {
    let x = draw_design(n, seed);
    let response_seed = SeedSpec::new(seed.master_seed, seed.stream_id + 1_000_000);
    let z_gen = truth.family.is_one_inflated().then(|| x.clone());
    let y = sample(truth, &x, z_gen.as_ref(), response_seed).expect("sampling must succeed");
    let names: Vec<String> = COLUMN_NAMES.iter().map(|s| s.to_string()).collect();
    if fit_family.is_one_inflated() {
        DesignData::from_parts(y, x.clone(), x, names.clone(), names).unwrap()
    } else {
        DesignData::from_parts(y, x, DMatrix::zeros(0, 0), names, Vec::new()).unwrap()
    }
}

/// The benchmark generating truth used across the simulation studies:
/// beta = (-2, 0.4, 0.2), gamma = (-21, 2, 0.5), alpha = 10 where it applies.
pub fn benchmark_truth(family: Family) -> Params {
    let beta = vec![-2.0, 0.4, 0.2];
    let gamma = if family.is_one_inflated() {
        vec![-21.0, 2.0, 0.5]
    } else {
        Vec::new()
    };
    let alpha = family.has_dispersion().then_some(10.0);
    Params::new(family, beta, gamma, alpha).unwrap()
}

pub fn spec_for(family: Family) -> ModelSpec {
    ModelSpec {
        family,
        response: "y".into(),
        x_terms: vec!["x1".into(), "x2".into()],
        z_terms: if family.is_one_inflated() {
            vec!["x1".into(), "x2".into()]
        } else {
            Vec::new()
        },
    }
}

/// Simulate from `truth` and fit `fit_family` with default options.
pub fn simulate_and_fit(
    truth: &Params,
    fit_family: Family,
    n: usize,
    seed: SeedSpec,
) -> (FittedModel, DesignData) {
    let dd = simulate(truth, fit_family, n, seed);
    let fm = maximize(&spec_for(fit_family), &dd, &FitOptions::default()).unwrap();
    (fm, dd)
}

/// Load a hospital-stay fixture by name if the workspace `data/` directory
/// carries it; `None` (with a skip note the caller prints) otherwise.
pub fn fixture(name: &str) -> Option<Dataset> {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name);
    if path.exists() {
        Some(load_csv(&path).expect("fixture must parse"))
    } else {
        None
    }
}

/// Build a `DesignData` from a fixture for the given family and formula.
pub fn fixture_design(
    ds: &Dataset,
    family: Family,
    response: &str,
    x_terms: &[&str],
    z_terms: &[&str],
) -> DesignData {
    let spec = ModelSpec {
        family,
        response: response.to_string(),
        x_terms: x_terms.iter().map(|s| s.to_string()).collect(),
        z_terms: z_terms.iter().map(|s| s.to_string()).collect(),
    };
    build_design(ds, &spec, &[]).unwrap()
}
