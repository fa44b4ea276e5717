//! Simulation-config parsing for the `simulate` subcommand.
//!
//! Two formats share one schema: a JSON object (deserialized straight into
//! the core study config) or flat `key=value` lines with `#` comments for
//! quick hand-written studies.  Flat keys: `family`, `n`, `replications`,
//! `beta`, `gamma`, `alpha`, `fit`, `seed`, `x1_mean`, `x1_sd`, `x2_prob`;
//! list values are comma separated.

use std::str::FromStr;

use oicount::{BiasTable, Error, Family, RegressorRecipe, SeedSpec, SimConfig};
use serde_json::json;

pub fn parse_sim_config(text: &str) -> oicount::Result<SimConfig> {
    if text.trim_start().starts_with('{') {
        serde_json::from_str(text)
            .map_err(|e| Error::BadConfig(format!("JSON config: {e}")))
    } else {
        parse_flat(text)
    }
}

fn parse_flat(text: &str) -> oicount::Result<SimConfig> {
    let mut family: Option<Family> = None;
    let mut n: Option<usize> = None;
    let mut replications: Option<usize> = None;
    let mut beta: Vec<f64> = Vec::new();
    let mut gamma: Vec<f64> = Vec::new();
    let mut alpha: Option<f64> = None;
    let mut fit_families: Vec<Family> = Vec::new();
    let mut seed = SeedSpec::default();
    let mut recipe = RegressorRecipe::default();

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::BadConfig(format!("line {}: expected key=value, got {line:?}", lineno + 1))
        })?;
        let key = key.trim();
        let value = value.trim();
        let bad = |what: &str| {
            Error::BadConfig(format!("line {}: cannot parse {key}={value:?} as {what}", lineno + 1))
        };
        match key {
            "family" => family = Some(Family::from_str(value)?),
            "n" => n = Some(value.parse().map_err(|_| bad("a positive integer"))?),
            "replications" => {
                replications = Some(value.parse().map_err(|_| bad("a positive integer"))?)
            }
            "beta" => beta = parse_list(value).map_err(|_| bad("a number list"))?,
            "gamma" => gamma = parse_list(value).map_err(|_| bad("a number list"))?,
            "alpha" => alpha = Some(value.parse().map_err(|_| bad("a number"))?),
            "fit" => {
                fit_families = value
                    .split(',')
                    .map(|f| Family::from_str(f.trim()))
                    .collect::<oicount::Result<_>>()?
            }
            "seed" => seed = SeedSpec::new(value.parse().map_err(|_| bad("an integer"))?, 0),
            "x1_mean" => recipe.x1_mean = value.parse().map_err(|_| bad("a number"))?,
            "x1_sd" => recipe.x1_sd = value.parse().map_err(|_| bad("a number"))?,
            "x2_prob" => recipe.x2_prob = value.parse().map_err(|_| bad("a number"))?,
            other => {
                return Err(Error::BadConfig(format!(
                    "line {}: unknown key {other:?}",
                    lineno + 1
                )))
            }
        }
    }

    let family = family.ok_or_else(|| Error::BadConfig("missing key: family".into()))?;
    let n = n.ok_or_else(|| Error::BadConfig("missing key: n".into()))?;
    let replications =
        replications.ok_or_else(|| Error::BadConfig("missing key: replications".into()))?;
    if beta.is_empty() {
        return Err(Error::BadConfig("missing key: beta".into()));
    }
    Ok(SimConfig { family, n, replications, beta, gamma, alpha, fit_families, seed, recipe })
}

fn parse_list(value: &str) -> Result<Vec<f64>, std::num::ParseFloatError> {
    value.split(',').map(|v| v.trim().parse()).collect()
}

/// JSON rendering of a finished study.  NaN biases (unknown or zero truth,
/// or no converged replications) become `null`.
pub fn bias_table_json(table: &BiasTable) -> String {
    let families: Vec<serde_json::Value> = table
        .families
        .iter()
        .map(|fam| {
            json!({
                "family": fam.family.label(),
                "parameters": fam.param_names,
                "true_values": fam.true_values,
                "mean_estimates": fam.mean_estimates,
                "percent_bias": fam.percent_bias,
                "used": fam.used,
                "replications": fam.replications,
            })
        })
        .collect();
    let value = json!({
        "generating_family": table.generating_family.label(),
        "n": table.n,
        "families": families,
    });
    serde_json::to_string_pretty(&value).expect("report serialization")
}
