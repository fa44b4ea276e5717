//! `oicount` — fit zero-truncated count models with one-inflation from the
//! command line.
//!
//! Subcommands: `fit` (coefficient summary), `margins` (marginal effects),
//! `test` (Wald and likelihood-ratio tests for one-inflation), `predict`
//! (expected count table), `plot` (observed-vs-predicted CSV + SVG barplot),
//! and `simulate` (Monte Carlo percent-bias studies from a config file).
//!
//! Exit codes: 0 on success, 1 on any input or validation problem, 2 when a
//! fit fails to converge (the report is still written so the partial results
//! can be inspected).

mod config;
mod plot;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use oicount::{
    build_design, load_csv, margins, maximize, one_lrt, one_wald, predicted_counts, summarize,
    Aggregation, DesignData, Error, Family, FitOptions, FittedModel, ModelSpec,
};

#[derive(Parser)]
#[command(
    name = "oicount",
    version,
    about = "Zero-truncated count regression with one-inflation (PP, ZTNB, OIPP, OIZTNB)"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model and report the coefficient summary.
    Fit(ModelArgs),
    /// Fit a model and report marginal effects with delta-method SEs.
    Margins(MarginsArgs),
    /// Test for one-inflation: Wald and likelihood-ratio against the base model.
    Test(ModelArgs),
    /// Table of expected counts per outcome value from a fitted model.
    Predict(ModelArgs),
    /// Observed vs predicted frequencies: a CSV table and an SVG barplot.
    Plot(PlotArgs),
    /// Run a Monte Carlo percent-bias study described by a config file.
    Simulate(SimulateArgs),
}

/// Everything needed to load one dataset and fit one model.
#[derive(Args)]
struct ModelArgs {
    /// CSV data file (headered, numeric columns)
    #[arg(long)]
    data: PathBuf,

    /// Model family: pp, ztnb, oipp, or oiztnb
    #[arg(long)]
    family: Family,

    /// Response column (positive integer counts)
    #[arg(long)]
    response: String,

    /// Count-equation regressors, comma separated
    #[arg(long, value_delimiter = ',')]
    x: Vec<String>,

    /// Inflation-equation regressors, comma separated
    /// (one-inflated families only; defaults to the --x list)
    #[arg(long, value_delimiter = ',')]
    z: Option<Vec<String>>,

    /// Columns to treat as continuous even if they only take values 0/1
    #[arg(long, value_delimiter = ',')]
    continuous: Vec<String>,

    /// Report format
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,

    /// Write the report to this file instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MarginsArgs {
    #[command(flatten)]
    model: ModelArgs,

    /// How to aggregate effects over the sample: ae (average effects)
    /// or em (effect at means)
    #[arg(long, value_enum, default_value_t = AggregationFlag::Ae)]
    aggregation: AggregationFlag,
}

#[derive(Args)]
struct PlotArgs {
    /// CSV data file (headered, numeric columns)
    #[arg(long)]
    data: PathBuf,

    /// Families to overlay, comma separated (omit for observed only)
    #[arg(long, value_delimiter = ',')]
    family: Vec<Family>,

    /// Response column (positive integer counts)
    #[arg(long)]
    response: String,

    /// Count-equation regressors, comma separated
    #[arg(long, value_delimiter = ',')]
    x: Vec<String>,

    /// Inflation-equation regressors (one-inflated families; defaults to --x)
    #[arg(long, value_delimiter = ',')]
    z: Option<Vec<String>>,

    /// Columns to treat as continuous even if they only take values 0/1
    #[arg(long, value_delimiter = ',')]
    continuous: Vec<String>,

    /// Output base path: writes {out}.csv and {out}.svg
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    /// Study description: flat key=value lines or a JSON object
    #[arg(long)]
    config: PathBuf,

    /// Override the master seed from the config file
    #[arg(long)]
    seed: Option<u64>,

    /// Report format
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,

    /// Write the report to this file instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AggregationFlag {
    /// Average of per-observation effects
    Ae,
    /// Effect at the sample means of the regressors
    Em,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // --help and --version are successes, not input errors
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> oicount::Result<u8> {
    match cli.command {
        Command::Fit(args) => cmd_fit(&args, &FitOptions::default()),
        Command::Margins(args) => cmd_margins(&args, &FitOptions::default()),
        Command::Test(args) => cmd_test(&args, &FitOptions::default()),
        Command::Predict(args) => cmd_predict(&args, &FitOptions::default()),
        Command::Plot(args) => cmd_plot(&args),
        Command::Simulate(args) => cmd_simulate(&args),
    }
}

/// A loaded dataset with one fitted model on it.
struct Fitted {
    fm: FittedModel,
    dd: DesignData,
}

fn load_and_fit(args: &ModelArgs, options: &FitOptions) -> oicount::Result<Fitted> {
    let ds = load_csv(&args.data)?;
    let spec = ModelSpec {
        family: args.family,
        response: args.response.clone(),
        x_terms: args.x.clone(),
        z_terms: resolve_z(args.family, &args.x, args.z.as_deref()),
    };
    let dd = build_design(&ds, &spec, &args.continuous)?;
    let fm = maximize(&spec, &dd, options)?;
    Ok(Fitted { fm, dd })
}

/// One-inflated families default their inflation equation to the count
/// equation's regressors; base families must not be given one at all (the
/// design builder rejects that with a pointed message).
fn resolve_z(family: Family, x: &[String], z: Option<&[String]>) -> Vec<String> {
    match z {
        Some(given) => given.to_vec(),
        None if family.is_one_inflated() => x.to_vec(),
        None => Vec::new(),
    }
}

fn exit_code(converged: bool) -> u8 {
    if converged {
        0
    } else {
        2
    }
}

fn cmd_fit(args: &ModelArgs, options: &FitOptions) -> oicount::Result<u8> {
    let fitted = load_and_fit(args, options)?;
    let table = summarize(&fitted.fm, &fitted.dd)?;
    let body = match args.format {
        Format::Text => report::fit_text(&table),
        Format::Json => report::fit_json(&table),
        Format::Csv => report::fit_csv(&table),
    };
    report::write_out(args.out.as_deref(), &body)?;
    Ok(exit_code(table.converged))
}

fn cmd_margins(args: &MarginsArgs, options: &FitOptions) -> oicount::Result<u8> {
    let fitted = load_and_fit(&args.model, options)?;
    let aggregation = match args.aggregation {
        AggregationFlag::Ae => Aggregation::AverageEffects,
        AggregationFlag::Em => Aggregation::EffectAtMeans,
    };
    let effects = margins(&fitted.fm, &fitted.dd, &aggregation)?;
    let body = match args.model.format {
        Format::Text => report::margins_text(&effects, &fitted.fm),
        Format::Json => report::margins_json(&effects),
        Format::Csv => report::margins_csv(&effects),
    };
    report::write_out(args.model.out.as_deref(), &body)?;
    Ok(exit_code(fitted.fm.converged))
}

fn cmd_test(args: &ModelArgs, options: &FitOptions) -> oicount::Result<u8> {
    if !args.family.is_one_inflated() {
        return Err(Error::BadSpec(format!(
            "family {} has no one-inflation to test; use oipp or oiztnb",
            args.family
        )));
    }
    let fitted = load_and_fit(args, options)?;

    // the base model on the same data: same count equation, no inflation
    let base_args = ModelArgs {
        data: args.data.clone(),
        family: args.family.base(),
        response: args.response.clone(),
        x: args.x.clone(),
        z: None,
        continuous: args.continuous.clone(),
        format: args.format,
        out: None,
    };
    let base = load_and_fit(&base_args, options)?;

    let wald = one_wald(&fitted.fm)?;
    // A likelihood shortfall (one-inflated fit below the base fit) is a
    // legitimate outcome on data without excess ones; report it as zero
    // evidence rather than failing.
    let lrt = match one_lrt(&fitted.fm, &base.fm) {
        Ok(t) => report::LrtOutcome::Computed(t),
        Err(Error::NestingViolation { oi, base }) => report::LrtOutcome::Shortfall { oi, base },
        Err(other) => return Err(other),
    };

    let body = match args.format {
        Format::Text => report::test_text(&fitted.fm, &base.fm, &wald, &lrt),
        Format::Json => report::test_json(&fitted.fm, &base.fm, &wald, &lrt),
        Format::Csv => report::test_csv(&wald, &lrt),
    };
    report::write_out(args.out.as_deref(), &body)?;
    Ok(exit_code(fitted.fm.converged && base.fm.converged))
}

fn cmd_predict(args: &ModelArgs, options: &FitOptions) -> oicount::Result<u8> {
    let fitted = load_and_fit(args, options)?;
    let counts = predicted_counts(&fitted.fm, &fitted.dd, None)?;
    let body = match args.format {
        Format::Text => report::predict_text(&fitted.fm, &counts),
        Format::Json => report::predict_json(&fitted.fm, &counts),
        Format::Csv => report::predict_csv(&counts),
    };
    report::write_out(args.out.as_deref(), &body)?;
    Ok(exit_code(fitted.fm.converged))
}

fn cmd_plot(args: &PlotArgs) -> oicount::Result<u8> {
    let ds = load_csv(&args.data)?;
    let mut all_converged = true;
    let mut fits: Vec<(Family, FittedModel, DesignData)> = Vec::new();
    for &family in &args.family {
        let spec = ModelSpec {
            family,
            response: args.response.clone(),
            x_terms: args.x.clone(),
            z_terms: resolve_z(family, &args.x, args.z.as_deref()),
        };
        let dd = build_design(&ds, &spec, &args.continuous)?;
        let fm = maximize(&spec, &dd, &FitOptions::default())?;
        all_converged &= fm.converged;
        fits.push((family, fm, dd));
    }

    // observed frequencies come straight from the response column
    let y_raw = ds.column(&args.response)?;
    let observed = plot::observed_frequencies(&args.response, y_raw)?;
    let y_max = observed.len() as u64;

    let mut series: Vec<(String, Vec<f64>)> = Vec::new();
    for (family, fm, dd) in &fits {
        let mut counts = predicted_counts(fm, dd, Some(y_max))?;
        counts.resize(y_max as usize, 0.0);
        series.push((family.label().to_string(), counts));
    }

    let csv_path = args.out.with_extension("csv");
    let svg_path = args.out.with_extension("svg");
    report::write_out(Some(&csv_path), &plot::table_csv(&observed, &series))?;
    report::write_out(Some(&svg_path), &plot::barplot_svg(&observed, &series))?;
    Ok(exit_code(all_converged))
}

fn cmd_simulate(args: &SimulateArgs) -> oicount::Result<u8> {
    let text = std::fs::read_to_string(&args.config).map_err(|source| Error::Io {
        path: args.config.display().to_string(),
        source,
    })?;
    let mut cfg = config::parse_sim_config(&text)?;
    if let Some(master) = args.seed {
        cfg.seed = oicount::SeedSpec::new(master, cfg.seed.stream_id);
    }
    let table = oicount::run_study(&cfg)?;
    let body = match args.format {
        Format::Text => format!("{table}"),
        Format::Json => config::bias_table_json(&table),
        Format::Csv => table.to_csv(),
    };
    report::write_out(args.out.as_deref(), &body)?;
    Ok(0)
}
