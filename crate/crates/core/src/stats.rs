//! Simple linear regression of metric scores on regional covariates.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ingest::{CovariateKind, CovariateTable};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("x and y lengths differ ({x} vs {y})")]
    LengthMismatch { x: usize, y: usize },
    #[error("need at least 3 samples, got {0}")]
    TooFewSamples(usize),
    #[error("x is constant")]
    ConstantX,
    #[error("log transform needs positive x, got {0}")]
    NonPositiveX(f64),
    #[error("no regions in common between {metric} and {covariate}")]
    EmptyJoin { metric: String, covariate: String },
    #[error("at least one covariate is required")]
    NoCovariates,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult {
    pub slope: f64,
    pub intercept: f64,
    pub r: f64,
    pub r_squared: f64,
    pub n: usize,
}

/// Least-squares line `y = slope x + intercept` and Pearson `r`.
///
/// A constant `y` gives `r = 0`.
pub fn ols(x: &[f64], y: &[f64]) -> Result<RegressionResult, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch { x: x.len(), y: y.len() });
    }
    let n = x.len();
    if n < 3 {
        return Err(StatsError::TooFewSamples(n));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 {
        return Err(StatsError::ConstantX);
    }
    let slope = sxy / sxx;
    let r = if syy == 0.0 {
        0.0
    } else {
        (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0)
    };
    Ok(RegressionResult {
        slope,
        intercept: my - slope * mx,
        r,
        r_squared: r * r,
        n,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pair {
    pub region_code: String,
    /// Covariate value.
    pub x: f64,
    /// Metric value.
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct JoinedSamples {
    pub pairs: Vec<Pair>,
    pub only_in_metric: Vec<String>,
    pub only_in_covariate: Vec<String>,
}

impl JoinedSamples {
    pub fn skipped(&self) -> impl Iterator<Item = &String> {
        self.only_in_metric.iter().chain(&self.only_in_covariate)
    }
}

/// Inner join on region code; unmatched codes from either side are listed.
pub fn join_metric_covariate(
    scores: &BTreeMap<String, f64>,
    cov: &CovariateTable,
) -> Result<JoinedSamples, StatsError> {
    let mut out = JoinedSamples::default();
    for (code, &y) in scores {
        match cov.entries.get(code) {
            Some(&x) => out.pairs.push(Pair {
                region_code: code.clone(),
                x,
                y,
            }),
            None => out.only_in_metric.push(code.clone()),
        }
    }
    out.only_in_covariate = cov
        .entries
        .keys()
        .filter(|c| !scores.contains_key(*c))
        .cloned()
        .collect();
    if out.pairs.is_empty() {
        return Err(StatsError::EmptyJoin {
            metric: "metric".into(),
            covariate: cov.kind.label().into(),
        });
    }
    Ok(out)
}

/// A named metric: region code to score.
#[derive(Debug, Clone, PartialEq)]
pub struct Metric {
    pub name: String,
    pub scores: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRow {
    pub metric: String,
    pub covariate: String,
    pub n: usize,
    pub slope: f64,
    pub intercept: f64,
    pub r: f64,
    pub r_squared: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scatter {
    pub metric: String,
    pub covariate: CovariateKind,
    pub pairs: Vec<Pair>,
    pub skipped: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CorrelationReport {
    pub rows: Vec<CorrelationRow>,
    pub scatter: Vec<Scatter>,
}

/// One regression per (metric, covariate) pair. With `log_x`, the
/// covariate is replaced by its natural logarithm.
pub fn correlation_report(
    metrics: &[Metric],
    covariates: &[CovariateTable],
    log_x: bool,
) -> Result<CorrelationReport, StatsError> {
    if covariates.is_empty() {
        return Err(StatsError::NoCovariates);
    }
    let mut report = CorrelationReport::default();
    for metric in metrics {
        for cov in covariates {
            let joined = join_metric_covariate(&metric.scores, cov).map_err(|_| StatsError::EmptyJoin {
                metric: metric.name.clone(),
                covariate: cov.kind.label().into(),
            })?;
            let mut x: Vec<f64> = joined.pairs.iter().map(|p| p.x).collect();
            if log_x {
                if let Some(bad) = x.iter().find(|v| **v <= 0.0) {
                    return Err(StatsError::NonPositiveX(*bad));
                }
                x.iter_mut().for_each(|v| *v = v.ln());
            }
            let y: Vec<f64> = joined.pairs.iter().map(|p| p.y).collect();
            let fit = ols(&x, &y)?;
            report.rows.push(CorrelationRow {
                metric: metric.name.clone(),
                covariate: cov.kind.label().into(),
                n: fit.n,
                slope: fit.slope,
                intercept: fit.intercept,
                r: fit.r,
                r_squared: fit.r_squared,
            });
            let skipped = joined.skipped().cloned().collect();
            let pairs = joined
                .pairs
                .into_iter()
                .zip(&x)
                .map(|(p, &xv)| Pair { x: xv, ..p })
                .collect();
            report.scatter.push(Scatter {
                metric: metric.name.clone(),
                covariate: cov.kind,
                pairs,
                skipped,
            });
        }
    }
    Ok(report)
}
