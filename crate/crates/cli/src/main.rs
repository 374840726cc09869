//! `recession-impact`: batch runs of the recession-impact metrics.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser};
use recession_core::arima::OrderGrid;
use recession_core::{ArimaOrder, Schema, YearMonth};

use crate::config::{Command, RunConfig};

#[derive(Debug, Parser)]
#[command(
    name = "recession-impact",
    version,
    about = "Recession-impact metrics for regional home value series"
)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// JSON config; its fields override the defaults, flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker threads for per-region work. Output does not depend on it.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Print the effective config as JSON and exit.
    #[arg(long)]
    print_config: bool,
    #[command(flatten)]
    flags: Flags,
}

/// One flag per `RunConfig` field.
#[derive(Debug, Args)]
struct Flags {
    /// Series CSV, or the feature CSV for pca.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Series layout: `long` or `wide`.
    #[arg(long, value_parser = parse_schema)]
    schema: Option<Schema>,
    /// Longest run of missing months that is interpolated.
    #[arg(long)]
    max_gap: Option<usize>,
    /// Directory receiving the outputs and run_manifest.json.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Trailing moving-average window in months.
    #[arg(long)]
    ma_window: Option<usize>,
    /// Recession onset `YYYY-MM`; the window peak is searched from here.
    #[arg(long)]
    onset: Option<YearMonth>,
    /// Divide each AUB score by its baseline.
    #[arg(long)]
    normalize_baseline: bool,
    /// Losers and gainers to label.
    #[arg(long)]
    k: Option<usize>,
    /// Forecast horizon in months.
    #[arg(long)]
    horizon: Option<usize>,
    /// Fixed order `p,d,q`; skips AIC selection.
    #[arg(long, value_parser = parse_order)]
    order: Option<ArimaOrder>,
    /// AIC grid maxima `p_max,d_max,q_max`.
    #[arg(long, value_parser = parse_grid)]
    grid: Option<OrderGrid>,
    /// Last month used for fitting; later months are held out.
    #[arg(long)]
    train_end: Option<YearMonth>,
    /// Principal components to keep.
    #[arg(long)]
    pca_k: Option<usize>,
    /// Drop feature columns missing more than this fraction.
    #[arg(long)]
    max_missing_frac: Option<f64>,
    /// aub_scores.csv from aub-rank.
    #[arg(long)]
    aub_scores: Option<PathBuf>,
    /// arima_scores.csv from arima-score.
    #[arg(long)]
    arima_scores: Option<PathBuf>,
    /// `RegionCode,Value` population table.
    #[arg(long)]
    population: Option<PathBuf>,
    /// `RegionCode,Value` unemployment-rate table.
    #[arg(long)]
    unemployment: Option<PathBuf>,
    /// Regress on the natural log of the covariate.
    #[arg(long)]
    log_x: bool,
    /// `RegionCode,State` overrides for the state parsed from names.
    #[arg(long)]
    state_mapping: Option<PathBuf>,
    /// First year of the choropleth grid.
    #[arg(long)]
    first_year: Option<i32>,
    /// Last year of the choropleth grid.
    #[arg(long)]
    last_year: Option<i32>,
    /// Clamp exported levels to `lo,hi`.
    #[arg(long, value_parser = parse_pair)]
    level_clamp: Option<(f64, f64)>,
    /// Clamp exported differences to `lo,hi`.
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    diff_clamp: Option<(f64, f64)>,
    /// RNG seed for synth.
    #[arg(long)]
    seed: Option<u64>,
    /// Boom-bust fixtures with closed-form scores.
    #[arg(long)]
    boom_bust_regions: Option<usize>,
    /// Simulated ARIMA fixtures.
    #[arg(long)]
    arima_regions: Option<usize>,
    /// First month of every synthetic series.
    #[arg(long)]
    synth_start: Option<YearMonth>,
    /// Length of each simulated ARIMA series.
    #[arg(long)]
    arima_len: Option<usize>,
}

fn parse_schema(s: &str) -> Result<Schema, String> {
    match s {
        "long" => Ok(Schema::Long),
        "wide" => Ok(Schema::Wide),
        _ => Err(format!("expected long or wide, got {s:?}")),
    }
}

fn parse_triple(s: &str) -> Result<(usize, usize, usize), String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [a, b, c] = parts.as_slice() else {
        return Err(format!("expected three comma-separated integers, got {s:?}"));
    };
    let n = |x: &str| x.parse::<usize>().map_err(|e| format!("{x:?}: {e}"));
    Ok((n(a)?, n(b)?, n(c)?))
}

fn parse_order(s: &str) -> Result<ArimaOrder, String> {
    let (p, d, q) = parse_triple(s)?;
    ArimaOrder::new(p, d, q).map_err(|e| e.to_string())
}

fn parse_grid(s: &str) -> Result<OrderGrid, String> {
    let (p_max, d_max, q_max) = parse_triple(s)?;
    Ok(OrderGrid { p_max, d_max, q_max })
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected lo,hi, got {s:?}"))?;
    let f = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}"));
    Ok((f(a)?, f(b)?))
}

macro_rules! overlay {
    ($cfg:ident, $flags:ident, $($field:ident),* $(,)?) => {
        $(if let Some(v) = $flags.$field { $cfg.$field = v; })*
    };
}

macro_rules! overlay_opt {
    ($cfg:ident, $flags:ident, $($field:ident),* $(,)?) => {
        $(if $flags.$field.is_some() { $cfg.$field = $flags.$field; })*
    };
}

fn effective_config(cli: Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            RunConfig::from_json(&text)?
        }
        None => RunConfig::default(),
    };
    cfg.command = cli.command;
    let f = cli.flags;
    overlay!(
        cfg,
        f,
        schema,
        max_gap,
        output_dir,
        ma_window,
        onset,
        k,
        horizon,
        grid,
        max_missing_frac,
        seed,
        boom_bust_regions,
        arima_regions,
        synth_start,
        arima_len,
    );
    overlay_opt!(
        cfg,
        f,
        input,
        order,
        train_end,
        pca_k,
        aub_scores,
        arima_scores,
        population,
        unemployment,
        state_mapping,
        first_year,
        last_year,
        level_clamp,
        diff_clamp,
    );
    cfg.normalize_baseline |= f.normalize_baseline;
    cfg.log_x |= f.log_x;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (jobs, print) = (cli.jobs, cli.print_config);
    let cfg = match effective_config(cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    if print {
        println!("{}", serde_json::to_string_pretty(&cfg).expect("config serializes"));
        return ExitCode::SUCCESS;
    }
    match commands::run(&cfg, jobs) {
        Ok(o) if o.ok == 0 => {
            eprintln!("error: no region succeeded ({} skipped)", o.skipped);
            ExitCode::from(2)
        }
        Ok(o) if o.skipped > 0 => {
            eprintln!("warning: {} ok, {} skipped; see skipped.csv", o.ok, o.skipped);
            ExitCode::from(1)
        }
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
