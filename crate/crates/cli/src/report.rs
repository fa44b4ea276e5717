//! Rendering fitted models, tests, margins, and predictions as text, JSON,
//! and CSV.  Text tables use aligned columns with significance stars at the
//! 1% (***), 5% (**), and 10% (*) levels; JSON uses `null` for unavailable
//! standard errors so reports round-trip losslessly.

use std::path::Path;

use oicount::{
    Aggregation, Error, FittedModel, MarginalEffects, SummaryTable, TestResult,
};
use serde_json::json;

/// Print to stdout, or write to the file when `--out` was given.
pub fn write_out(out: Option<&Path>, body: &str) -> oicount::Result<()> {
    let text = if body.ends_with('\n') { body.to_string() } else { format!("{body}\n") };
    match out {
        None => {
            print!("{text}");
            Ok(())
        }
        Some(path) => std::fs::write(path, text).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        }),
    }
}

fn stars(p: Option<f64>) -> &'static str {
    match p {
        Some(p) if p < 0.01 => "***",
        Some(p) if p < 0.05 => "**",
        Some(p) if p < 0.10 => "*",
        _ => "",
    }
}

fn fmt_opt(v: Option<f64>, width: usize) -> String {
    match v {
        Some(v) => format!("{v:>width$.4}"),
        None => format!("{:>width$}", "."),
    }
}

fn fmt_p(p: Option<f64>, width: usize) -> String {
    match p {
        Some(p) if p < 0.001 => format!("{:>width$}", "<0.001"),
        Some(p) => format!("{p:>width$.3}"),
        None => format!("{:>width$}", "."),
    }
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

// ---------------------------------------------------------------- fit ----

pub fn fit_text(table: &SummaryTable) -> String {
    let name_w = table.rows.iter().map(|r| r.name.len()).max().unwrap_or(4).max(4);
    let mut out = format!(
        "{} maximum-likelihood fit  (n = {}, log-likelihood = {:.4}, converged: {})\n\n",
        table.family,
        table.n,
        table.loglik,
        yes_no(table.converged)
    );
    out.push_str(&format!(
        "{:<name_w$}  {:>12}  {:>10}  {:>8}  {:>8}\n",
        "term", "estimate", "se", "z", "p"
    ));
    for row in &table.rows {
        out.push_str(&format!(
            "{:<name_w$}  {:>12.4}  {}  {}  {} {}\n",
            row.name,
            row.estimate,
            fmt_opt(row.se, 10),
            fmt_opt(row.z, 8),
            fmt_p(row.p, 8),
            stars(row.p),
        ));
    }
    if let (Some(avg), Some(abs)) = (table.avg_one_inflation, table.avg_abs_one_inflation) {
        out.push_str(&format!(
            "\naverage one-inflation: {:.1}%   average |one-inflation|: {:.1}%\n",
            100.0 * avg,
            100.0 * abs
        ));
    }
    out
}

pub fn fit_json(table: &SummaryTable) -> String {
    let value = json!({
        "family": table.family.label(),
        "names": table.rows.iter().map(|r| r.name.clone()).collect::<Vec<_>>(),
        "estimates": table.rows.iter().map(|r| r.estimate).collect::<Vec<_>>(),
        "se": table.rows.iter().map(|r| r.se).collect::<Vec<_>>(),
        "z": table.rows.iter().map(|r| r.z).collect::<Vec<_>>(),
        "p": table.rows.iter().map(|r| r.p).collect::<Vec<_>>(),
        "loglik": table.loglik,
        "n": table.n,
        "converged": table.converged,
        "avg_one_inflation": table.avg_one_inflation,
        "avg_abs_one_inflation": table.avg_abs_one_inflation,
    });
    serde_json::to_string_pretty(&value).expect("report serialization")
}

pub fn fit_csv(table: &SummaryTable) -> String {
    let mut out = String::from("name,estimate,se,z,p\n");
    for row in &table.rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            row.name,
            row.estimate,
            csv_opt(row.se),
            csv_opt(row.z),
            csv_opt(row.p),
        ));
    }
    out
}

fn csv_opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

// ------------------------------------------------------------ margins ----

fn aggregation_label(aggregation: &Aggregation) -> &'static str {
    match aggregation {
        Aggregation::AverageEffects => "average effects",
        Aggregation::EffectAtMeans => "effect at means",
        Aggregation::AtPoint { .. } => "at point",
    }
}

pub fn margins_text(effects: &MarginalEffects, fm: &FittedModel) -> String {
    let name_w = effects.rows.iter().map(|r| r.name.len()).max().unwrap_or(4).max(4);
    let mut out = format!(
        "Marginal effects on the expected count  ({}, {}, n = {})\n\n",
        effects.family,
        aggregation_label(&effects.aggregation),
        fm.n
    );
    out.push_str(&format!(
        "{:<name_w$}  {:>10}  {:>12}  {:>10}  {:>8}  {:>8}\n",
        "term", "kind", "effect", "se", "z", "p"
    ));
    for row in &effects.rows {
        out.push_str(&format!(
            "{:<name_w$}  {:>10}  {:>12.4}  {}  {}  {} {}\n",
            row.name,
            row.kind.to_string(),
            row.effect,
            fmt_opt(row.se, 10),
            fmt_opt(row.z, 8),
            fmt_p(row.p, 8),
            stars(row.p),
        ));
    }
    out
}

pub fn margins_json(effects: &MarginalEffects) -> String {
    let value = json!({
        "family": effects.family.label(),
        "aggregation": aggregation_label(&effects.aggregation),
        "names": effects.rows.iter().map(|r| r.name.clone()).collect::<Vec<_>>(),
        "kinds": effects.rows.iter().map(|r| r.kind.to_string()).collect::<Vec<_>>(),
        "effects": effects.rows.iter().map(|r| r.effect).collect::<Vec<_>>(),
        "se": effects.rows.iter().map(|r| r.se).collect::<Vec<_>>(),
        "z": effects.rows.iter().map(|r| r.z).collect::<Vec<_>>(),
        "p": effects.rows.iter().map(|r| r.p).collect::<Vec<_>>(),
    });
    serde_json::to_string_pretty(&value).expect("report serialization")
}

pub fn margins_csv(effects: &MarginalEffects) -> String {
    let mut out = String::from("name,kind,effect,se,z,p\n");
    for row in &effects.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            row.name,
            row.kind,
            row.effect,
            csv_opt(row.se),
            csv_opt(row.z),
            csv_opt(row.p),
        ));
    }
    out
}

// --------------------------------------------------------------- test ----

/// The likelihood-ratio comparison can legitimately find the one-inflated
/// maximum below the base maximum on data without excess ones; the report
/// then shows zero evidence instead of an error.
pub enum LrtOutcome {
    Computed(TestResult),
    Shortfall { oi: f64, base: f64 },
}

const SHORTFALL_NOTE: &str =
    "one-inflated log-likelihood fell below the base model's; the data show no \
     likelihood gain from one-inflation (statistic reported as 0)";

pub fn test_text(
    oi: &FittedModel,
    base: &FittedModel,
    wald: &TestResult,
    lrt: &LrtOutcome,
) -> String {
    let mut out = format!(
        "Tests for one-inflation: {} against {}  (n = {})\n\n",
        oi.params.family,
        base.params.family,
        oi.n
    );
    out.push_str(&format!(
        "log-likelihood: one-inflated {:.4}, base {:.4}\n\n",
        oi.loglik, base.loglik
    ));
    out.push_str(&format!(
        "{:<18}  statistic = {:>9.4}   dof = {}   p = {}\n",
        wald.kind.to_string(),
        wald.statistic,
        wald.dof,
        fmt_p(Some(wald.p_value), 6).trim_start(),
    ));
    match lrt {
        LrtOutcome::Computed(t) => out.push_str(&format!(
            "{:<18}  statistic = {:>9.4}   dof = {}   p = {}\n",
            t.kind.to_string(),
            t.statistic,
            t.dof,
            fmt_p(Some(t.p_value), 6).trim_start(),
        )),
        LrtOutcome::Shortfall { .. } => {
            out.push_str(&format!(
                "{:<18}  statistic = {:>9.4}   dof = {}   p = {}\n",
                "likelihood ratio",
                0.0,
                oi.params.gamma.len(),
                "1.000"
            ));
            out.push_str(&format!("\nnote: {SHORTFALL_NOTE}\n"));
        }
    }
    out
}

pub fn test_json(
    oi: &FittedModel,
    base: &FittedModel,
    wald: &TestResult,
    lrt: &LrtOutcome,
) -> String {
    let lrt_value = match lrt {
        LrtOutcome::Computed(t) => json!({
            "statistic": t.statistic,
            "dof": t.dof,
            "p_value": t.p_value,
        }),
        LrtOutcome::Shortfall { oi, base } => json!({
            "statistic": 0.0,
            "dof": 0,
            "p_value": 1.0,
            "note": SHORTFALL_NOTE,
            "loglik_one_inflated": oi,
            "loglik_base": base,
        }),
    };
    let value = json!({
        "family": oi.params.family.label(),
        "base_family": base.params.family.label(),
        "n": oi.n,
        "loglik_one_inflated": oi.loglik,
        "loglik_base": base.loglik,
        "converged": oi.converged && base.converged,
        "wald": {
            "statistic": wald.statistic,
            "dof": wald.dof,
            "p_value": wald.p_value,
        },
        "likelihood_ratio": lrt_value,
    });
    serde_json::to_string_pretty(&value).expect("report serialization")
}

pub fn test_csv(wald: &TestResult, lrt: &LrtOutcome) -> String {
    let mut out = String::from("test,statistic,dof,p_value\n");
    out.push_str(&format!("Wald,{},{},{}\n", wald.statistic, wald.dof, wald.p_value));
    match lrt {
        LrtOutcome::Computed(t) => {
            out.push_str(&format!("likelihood ratio,{},{},{}\n", t.statistic, t.dof, t.p_value));
        }
        LrtOutcome::Shortfall { .. } => {
            out.push_str("likelihood ratio,0,0,1\n");
        }
    }
    out
}

// ------------------------------------------------------------ predict ----

pub fn predict_text(fm: &FittedModel, counts: &[f64]) -> String {
    let mut out = format!(
        "Expected counts by outcome  ({}, n = {})\n\n{:>6}  {:>12}\n",
        fm.params.family, fm.n, "y", "predicted"
    );
    for (i, c) in counts.iter().enumerate() {
        out.push_str(&format!("{:>6}  {:>12.3}\n", i + 1, c));
    }
    let covered: f64 = counts.iter().sum();
    out.push_str(&format!(
        "\ntable covers {:.2}% of the sample\n",
        100.0 * covered / fm.n as f64
    ));
    out
}

pub fn predict_json(fm: &FittedModel, counts: &[f64]) -> String {
    let value = json!({
        "family": fm.params.family.label(),
        "n": fm.n,
        "y": (1..=counts.len()).collect::<Vec<_>>(),
        "predicted": counts,
    });
    serde_json::to_string_pretty(&value).expect("report serialization")
}

pub fn predict_csv(counts: &[f64]) -> String {
    let mut out = String::from("y,predicted\n");
    for (i, c) in counts.iter().enumerate() {
        out.push_str(&format!("{},{}\n", i + 1, c));
    }
    out
}
