use std::collections::BTreeMap;
use std::fs::File;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use recession_core::arima::{self, backtest_split, forecast, residual_diagnostics, select_order, FitOptions};
use recession_core::aub::{aub_pipeline, rank_regions, sort_scores, AubReportRow};
use recession_core::choropleth::{export_grid, parse_state_mapping, state_year_means, year_diffs};
use recession_core::ingest::{fill_gaps, parse_covariates_csv, parse_series_table, write_long_csv};
use recession_core::pca::{clean_matrix, parse_feature_csv, pca_fit, pca_project_export};
use recession_core::stats::{correlation_report, Metric};
use recession_core::synth::{generate_dataset, SynthConfig};
use recession_core::{AubConfig, CovariateKind, MonthlySeries, YearMonth};
use serde::Serialize;

use crate::config::{Command, RunConfig};
use crate::manifest::{csv_with_header, Outputs};

/// Region counts of a finished run; they decide the exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Outcome {
    pub ok: usize,
    pub skipped: usize,
}

#[derive(Debug, Clone, Serialize)]
struct SkipRow {
    region_code: String,
    region_name: String,
    stage: &'static str,
    reason: String,
}

const SKIP_HEADER: [&str; 4] = ["region_code", "region_name", "stage", "reason"];

pub fn run(config: &RunConfig, jobs: usize) -> Result<Outcome> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .context("building thread pool")?;
    pool.install(|| match config.command {
        Command::AubRank => aub_rank(config),
        Command::ArimaScore => arima_score(config),
        Command::Pca => pca(config),
        Command::Correlate => correlate(config),
        Command::ChoroplethExport => choropleth_export(config),
        Command::Synth => synth(config),
    })
}

fn open(path: &Path) -> Result<File> {
    File::open(path).with_context(|| format!("opening {}", path.display()))
}

/// Parses the series file; regions whose gaps cannot be filled are skipped.
fn load_series(config: &RunConfig) -> Result<(PathBuf, Vec<MonthlySeries>, Vec<SkipRow>)> {
    let path = config.require_input()?.clone();
    let table =
        parse_series_table(open(&path)?, config.schema).with_context(|| format!("parsing {}", path.display()))?;
    let mut series = Vec::with_capacity(table.len());
    let mut skipped = Vec::new();
    for g in &table {
        match fill_gaps(g, config.max_gap) {
            Ok(s) => series.push(s),
            Err(e) => skipped.push(SkipRow {
                region_code: g.region.code().to_string(),
                region_name: g.region.name().to_string(),
                stage: "ingest",
                reason: e.to_string(),
            }),
        }
    }
    Ok((path, series, skipped))
}

fn skip(s: &MonthlySeries, stage: &'static str, reason: impl ToString) -> SkipRow {
    SkipRow {
        region_code: s.region().code().to_string(),
        region_name: s.region().name().to_string(),
        stage,
        reason: reason.to_string(),
    }
}

fn aub_rank(config: &RunConfig) -> Result<Outcome> {
    let (path, series, mut skipped) = load_series(config)?;
    let aub_config = AubConfig {
        window: config.ma_window,
        onset: config.onset,
        normalize_baseline: config.normalize_baseline,
    };
    let results: Vec<_> = series.par_iter().map(|s| aub_pipeline(s, &aub_config)).collect();
    let mut scores = Vec::with_capacity(results.len());
    for (s, r) in series.iter().zip(results) {
        match r {
            Ok(score) => scores.push(score),
            Err(e) => skipped.push(skip(s, "aub", e)),
        }
    }

    let k = config.k.min(scores.len() / 2);
    if k < config.k && !scores.is_empty() {
        eprintln!(
            "warning: k = {} exceeds half the {} scored regions; using k = {k}",
            config.k,
            scores.len()
        );
    }
    let scores = if k > 0 {
        rank_regions(scores, k)?
    } else {
        sort_scores(&mut scores);
        scores
    };
    let rows: Vec<AubReportRow> = scores.iter().map(AubReportRow::from).collect();

    let mut out = Outputs::new(&config.output_dir);
    out.add(
        "aub_scores.csv",
        csv_with_header(
            &[
                "region_code",
                "region_name",
                "state",
                "window_start",
                "window_end",
                "recovered",
                "baseline",
                "aub",
                "classification",
            ],
            &rows,
        )?,
    );
    let outcome = Outcome {
        ok: rows.len(),
        skipped: skipped.len(),
    };
    out.add("skipped.csv", csv_with_header(&SKIP_HEADER, &skipped)?);
    out.finish(config, &[path], outcome.ok, outcome.skipped)?;
    Ok(outcome)
}

#[derive(Debug, Clone, Serialize)]
struct ArimaRow {
    region_code: String,
    region_name: String,
    p: usize,
    d: usize,
    q: usize,
    sigma2: f64,
    bias_flag: bool,
    horizon: usize,
    ci_area: f64,
    ci_area_normalized: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
struct ForecastRow {
    month: YearMonth,
    point: f64,
    lower95: f64,
    upper95: f64,
}

fn score_arima(s: &MonthlySeries, config: &RunConfig) -> Result<(ArimaRow, Vec<ForecastRow>), String> {
    let train = match config.train_end {
        Some(split) if split > s.end() => s.clone(),
        Some(split) => backtest_split(s, split).map_err(|e| e.to_string())?.0,
        None => s.clone(),
    };
    let opts = FitOptions::default();
    let model = match config.order {
        Some(order) => arima::fit_values(train.values(), order, &opts),
        None => select_order(train.values(), config.grid, &opts).map(|sel| sel.model),
    }
    .map_err(|e| e.to_string())?;
    let f = forecast(&model, config.horizon).map_err(|e| e.to_string())?;
    let diag = residual_diagnostics(&model).map_err(|e| e.to_string())?;
    let row = ArimaRow {
        region_code: s.region().code().to_string(),
        region_name: s.region().name().to_string(),
        p: model.order.p,
        d: model.order.d,
        q: model.order.q,
        sigma2: model.sigma2,
        bias_flag: diag.bias_flag,
        horizon: f.horizon,
        ci_area: f.ci_area,
        ci_area_normalized: f.ci_area_normalized,
    };
    let fc = (0..f.horizon)
        .map(|h| ForecastRow {
            month: train.end().plus(h as i32 + 1),
            point: f.point[h],
            lower95: f.lower95[h],
            upper95: f.upper95[h],
        })
        .collect();
    Ok((row, fc))
}

/// File-name-safe form of a region code.
fn file_stem(code: &str) -> String {
    code.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect()
}

fn arima_score(config: &RunConfig) -> Result<Outcome> {
    if let Some(order) = config.order {
        arima::ArimaOrder::new(order.p, order.d, order.q)?;
    }
    let (path, series, mut skipped) = load_series(config)?;
    let results: Vec<_> = series.par_iter().map(|s| score_arima(s, config)).collect();
    let mut rows = Vec::new();
    let mut out = Outputs::new(&config.output_dir);
    for (s, r) in series.iter().zip(results) {
        match r {
            Ok((row, fc)) => {
                let name = format!("forecasts/{}.csv", file_stem(s.region().code()));
                out.add(name, csv_with_header(&["month", "point", "lower95", "upper95"], &fc)?);
                rows.push(row);
            }
            Err(e) => skipped.push(skip(s, "arima", e)),
        }
    }
    rows.sort_by(|a, b| a.region_code.cmp(&b.region_code));
    out.add(
        "arima_scores.csv",
        csv_with_header(
            &[
                "region_code",
                "region_name",
                "p",
                "d",
                "q",
                "sigma2",
                "bias_flag",
                "horizon",
                "ci_area",
                "ci_area_normalized",
            ],
            &rows,
        )?,
    );
    let outcome = Outcome {
        ok: rows.len(),
        skipped: skipped.len(),
    };
    out.add("skipped.csv", csv_with_header(&SKIP_HEADER, &skipped)?);
    out.finish(config, &[path], outcome.ok, outcome.skipped)?;
    Ok(outcome)
}

#[derive(Debug, Serialize)]
struct PcaSummary<'a> {
    k: usize,
    rows: usize,
    columns_kept: &'a [String],
    columns_dropped: Vec<String>,
    eigenvalues: &'a [f64],
    explained_ratio: &'a [f64],
    reconstruction_mse: f64,
    components: &'a [Vec<f64>],
}

fn pca(config: &RunConfig) -> Result<Outcome> {
    let path = config.require_input()?.clone();
    let k = config.pca_k.context("--pca-k is required for the pca command")?;
    let raw = parse_feature_csv(open(&path)?).with_context(|| format!("parsing {}", path.display()))?;
    let cleaned = clean_matrix(&raw, config.max_missing_frac)?;
    let fit = pca_fit(&cleaned, k)?;
    let dropped = raw
        .columns()
        .iter()
        .filter(|c| !cleaned.columns().contains(c))
        .cloned()
        .collect();
    let summary = PcaSummary {
        k,
        rows: cleaned.n_rows(),
        columns_kept: cleaned.columns(),
        columns_dropped: dropped,
        eigenvalues: &fit.eigenvalues,
        explained_ratio: &fit.explained_ratio,
        reconstruction_mse: fit.reconstruction_mse,
        components: &fit.components,
    };
    let mut out = Outputs::new(&config.output_dir);
    out.add("pca_projection.csv", pca_project_export(&fit, cleaned.row_labels())?);
    let mut json = serde_json::to_vec_pretty(&summary)?;
    json.push(b'\n');
    out.add("pca_summary.json", json);
    out.finish(config, &[path], cleaned.n_rows(), 0)?;
    Ok(Outcome {
        ok: cleaned.n_rows(),
        skipped: 0,
    })
}

/// Reads `region_code` and one numeric column from a score CSV; empty
/// cells are left out.
fn read_metric(path: &Path, column: &str, name: &str) -> Result<Metric> {
    let mut rdr = csv::Reader::from_reader(open(path)?);
    let headers = rdr.headers()?.clone();
    let find = |h: &str| {
        headers
            .iter()
            .position(|x| x == h)
            .with_context(|| format!("{}: missing column {h}", path.display()))
    };
    let (code_col, value_col) = (find("region_code")?, find(column)?);
    let mut scores = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let cell = rec.get(value_col).unwrap_or("").trim();
        if cell.is_empty() {
            continue;
        }
        let v: f64 = cell
            .parse()
            .with_context(|| format!("{}: line {}: bad {column} value {cell:?}", path.display(), i + 2))?;
        let code = rec.get(code_col).unwrap_or("").to_string();
        if scores.insert(code.clone(), v).is_some() {
            bail!("{}: duplicate region {code}", path.display());
        }
    }
    Ok(Metric {
        name: name.to_string(),
        scores,
    })
}

#[derive(Debug, Serialize)]
struct ScatterRow<'a> {
    region_code: &'a str,
    x: f64,
    y: f64,
}

#[derive(Debug, Serialize)]
struct JoinSkipRow<'a> {
    metric: &'a str,
    covariate: &'a str,
    region_code: &'a str,
}

fn correlate(config: &RunConfig) -> Result<Outcome> {
    let mut inputs = Vec::new();
    let mut metrics = Vec::new();
    if let Some(p) = &config.aub_scores {
        metrics.push(read_metric(p, "aub", "aub")?);
        inputs.push(p.clone());
    }
    if let Some(p) = &config.arima_scores {
        metrics.push(read_metric(p, "ci_area_normalized", "ci_area_normalized")?);
        inputs.push(p.clone());
    }
    if metrics.is_empty() {
        bail!("correlate needs --aub-scores and/or --arima-scores");
    }
    let mut covariates = Vec::new();
    for (path, kind) in [
        (&config.population, CovariateKind::Population),
        (&config.unemployment, CovariateKind::UnemploymentRate),
    ] {
        if let Some(p) = path {
            let table = parse_covariates_csv(open(p)?, kind).with_context(|| format!("parsing {}", p.display()))?;
            covariates.push(table);
            inputs.push(p.clone());
        }
    }
    if covariates.is_empty() {
        bail!("correlate needs --population and/or --unemployment");
    }
    let report = correlation_report(&metrics, &covariates, config.log_x)?;

    let mut out = Outputs::new(&config.output_dir);
    out.add(
        "correlation_report.csv",
        csv_with_header(
            &["metric", "covariate", "n", "slope", "intercept", "r", "r_squared"],
            &report.rows,
        )?,
    );
    let mut skips = Vec::new();
    for sc in &report.scatter {
        let rows: Vec<ScatterRow> = sc
            .pairs
            .iter()
            .map(|p| ScatterRow {
                region_code: &p.region_code,
                x: p.x,
                y: p.y,
            })
            .collect();
        out.add(
            format!("scatter/{}__{}.csv", sc.metric, sc.covariate.label()),
            csv_with_header(&["region_code", "x", "y"], &rows)?,
        );
        skips.extend(sc.skipped.iter().map(|code| JoinSkipRow {
            metric: &sc.metric,
            covariate: sc.covariate.label(),
            region_code: code,
        }));
    }
    out.add(
        "skipped.csv",
        csv_with_header(&["metric", "covariate", "region_code"], &skips)?,
    );
    let ok = report.rows.iter().map(|r| r.n).sum();
    let outcome = Outcome {
        ok,
        skipped: skips.len(),
    };
    out.finish(config, &inputs, outcome.ok, outcome.skipped)?;
    Ok(outcome)
}

fn choropleth_export(config: &RunConfig) -> Result<Outcome> {
    let (path, series, mut skipped) = load_series(config)?;
    let mut inputs = vec![path];
    let mapping = match &config.state_mapping {
        Some(p) => {
            inputs.push(p.clone());
            Some(parse_state_mapping(open(p)?)?)
        }
        None => None,
    };
    let data_first = series.iter().map(|s| s.start().year()).min();
    let data_last = series.iter().map(|s| s.end().year()).max();
    let (Some(first), Some(last)) = (config.first_year.or(data_first), config.last_year.or(data_last)) else {
        bail!("no series to aggregate");
    };
    let means = state_year_means(&series, first..=last, mapping.as_ref())?;
    for r in &means.unmapped {
        skipped.push(SkipRow {
            region_code: r.code().to_string(),
            region_name: r.name().to_string(),
            stage: "choropleth",
            reason: "no state for region".into(),
        });
    }
    let mut out = Outputs::new(&config.output_dir);
    out.add("state_year_levels.csv", export_grid(&means.grid, config.level_clamp));
    match year_diffs(&means.grid) {
        Ok(diffs) => out.add("state_year_diffs.csv", export_grid(&diffs, config.diff_clamp)),
        Err(e) => eprintln!("warning: no difference grid: {e}"),
    }
    let outcome = Outcome {
        ok: series.len() - means.unmapped.len(),
        skipped: skipped.len(),
    };
    out.add("skipped.csv", csv_with_header(&SKIP_HEADER, &skipped)?);
    out.finish(config, &inputs, outcome.ok, outcome.skipped)?;
    Ok(outcome)
}

fn synth(config: &RunConfig) -> Result<Outcome> {
    let synth_config = SynthConfig {
        seed: config.seed,
        boom_bust_regions: config.boom_bust_regions,
        arima_regions: config.arima_regions,
        start: config.synth_start,
        onset: config.onset,
        ma_window: config.ma_window,
        arima_len: config.arima_len,
    };
    if config.onset.months_since(config.synth_start) < config.ma_window as i32 - 1 {
        bail!("onset must be at least ma_window - 1 months after synth_start");
    }
    let data = generate_dataset(&synth_config);
    let mut series_csv = Vec::new();
    write_long_csv(&data.series, &mut series_csv)?;
    let mut out = Outputs::new(&config.output_dir);
    out.add("synthetic_series.csv", series_csv);
    out.add(
        "ground_truth.csv",
        csv_with_header(
            &[
                "region_code",
                "kind",
                "aub",
                "baseline",
                "window_start",
                "window_end",
                "depth",
                "fall_months",
                "rise_months",
                "phi",
                "d",
                "sigma",
            ],
            &data.truth,
        )?,
    );
    out.finish(config, &[], data.series.len(), 0)?;
    Ok(Outcome {
        ok: data.series.len(),
        skipped: 0,
    })
}
