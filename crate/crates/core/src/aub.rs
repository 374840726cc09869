//! Area-Under-Baseline recession impact.
//!
//! The index is smoothed with a trailing moving average, the recession
//! window is opened at the highest local maximum of the smoothed series on
//! or after the crisis onset, and closed at the first month the smoothed
//! series climbs back to that peak (or at the end of the data). The score
//! is the summed shortfall `baseline - smoothed` across the window.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::ingest::{MonthlySeries, RegionId};
use crate::month::YearMonth;
use crate::tscore::{moving_average, SmoothedSeries, TsError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AubError {
    #[error(transparent)]
    Series(#[from] TsError),
    #[error("need at least 3 smoothed values on or after {onset}, found {found}")]
    TooFewAfterOnset { onset: YearMonth, found: usize },
    #[error("no local maximum on or after {onset}")]
    NoLocalMax { onset: YearMonth },
    #[error("k must be at least 1")]
    InvalidK,
    #[error("2k = {} exceeds region count {regions}", 2 * .k)]
    KTooLarge { k: usize, regions: usize },
    #[error("no scores to rank")]
    EmptyScores,
}

/// Indices into the smoothed series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecessionWindow {
    pub start: usize,
    pub end: usize,
    pub baseline: f64,
    pub recovered: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    Loser,
    Gainer,
    Unranked,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AubScore {
    pub region: RegionId,
    pub window: RecessionWindow,
    pub window_start: YearMonth,
    pub window_end: YearMonth,
    pub aub: f64,
    pub classification: Classification,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AubConfig {
    pub window: usize,
    pub onset: YearMonth,
    /// Divide the score by the baseline.
    pub normalize_baseline: bool,
}

impl Default for AubConfig {
    fn default() -> Self {
        Self {
            window: 5,
            onset: YearMonth::new(2007, 1).expect("valid month"),
            normalize_baseline: false,
        }
    }
}

/// Locates the recession window.
///
/// Candidate peaks are indices `i` dated on/after `onset` where the series
/// rises into `i` and falls out of it. The highest candidate wins, the
/// earliest on ties.
pub fn find_window(smoothed: &SmoothedSeries, onset: YearMonth) -> Result<RecessionWindow, AubError> {
    let m = smoothed.values();
    let first = smoothed.first_index_at_or_after(onset);
    let found = m.len().saturating_sub(first);
    if found < 3 {
        return Err(AubError::TooFewAfterOnset { onset, found });
    }

    let mut best: Option<usize> = None;
    for i in first.max(1)..m.len() - 1 {
        let rise = m[i] - m[i - 1];
        let fall = m[i + 1] - m[i];
        if rise > 0.0 && fall < 0.0 && !best.is_some_and(|b| m[i] <= m[b]) {
            best = Some(i);
        }
    }
    let start = best.ok_or(AubError::NoLocalMax { onset })?;
    let baseline = m[start];
    let (end, recovered) = match (start + 1..m.len()).find(|&j| m[j] >= baseline) {
        Some(j) => (j, true),
        None => (m.len() - 1, false),
    };
    Ok(RecessionWindow {
        start,
        end,
        baseline,
        recovered,
    })
}

/// Sum of `baseline - smoothed[i]` for `i` in `start..=end`.
pub fn score_aub(smoothed: &SmoothedSeries, window: &RecessionWindow) -> f64 {
    smoothed.values()[window.start..=window.end]
        .iter()
        .map(|v| window.baseline - v)
        .sum()
}

pub fn aub_pipeline(series: &MonthlySeries, config: &AubConfig) -> Result<AubScore, AubError> {
    let smoothed = moving_average(series, config.window)?;
    let window = find_window(&smoothed, config.onset)?;
    let mut aub = score_aub(&smoothed, &window);
    if config.normalize_baseline && window.baseline != 0.0 {
        aub /= window.baseline;
    }
    Ok(AubScore {
        region: series.region().clone(),
        window_start: smoothed.month_at(window.start),
        window_end: smoothed.month_at(window.end),
        window,
        aub,
        classification: Classification::Unranked,
    })
}

/// Orders by descending AUB (ties by region code) and marks the top `k` as
/// losers and the bottom `k` as gainers.
pub fn rank_regions(mut scores: Vec<AubScore>, k: usize) -> Result<Vec<AubScore>, AubError> {
    if scores.is_empty() {
        return Err(AubError::EmptyScores);
    }
    if k == 0 {
        return Err(AubError::InvalidK);
    }
    if 2 * k > scores.len() {
        return Err(AubError::KTooLarge {
            k,
            regions: scores.len(),
        });
    }
    sort_scores(&mut scores);
    let n = scores.len();
    for (i, s) in scores.iter_mut().enumerate() {
        s.classification = if i < k {
            Classification::Loser
        } else if i >= n - k {
            Classification::Gainer
        } else {
            Classification::Unranked
        };
    }
    Ok(scores)
}

pub fn sort_scores(scores: &mut [AubScore]) {
    scores.sort_by(|a, b| match b.aub.total_cmp(&a.aub) {
        Ordering::Equal => a.region.code().cmp(b.region.code()),
        o => o,
    });
}

/// Flat report row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AubReportRow {
    pub region_code: String,
    pub region_name: String,
    pub state: String,
    pub window_start: YearMonth,
    pub window_end: YearMonth,
    pub recovered: bool,
    pub baseline: f64,
    pub aub: f64,
    pub classification: Classification,
}

impl From<&AubScore> for AubReportRow {
    fn from(s: &AubScore) -> Self {
        AubReportRow {
            region_code: s.region.code().to_string(),
            region_name: s.region.name().to_string(),
            state: s.region.state().unwrap_or_default().to_string(),
            window_start: s.window_start,
            window_end: s.window_end,
            recovered: s.window.recovered,
            baseline: s.window.baseline,
            aub: s.aub,
            classification: s.classification,
        }
    }
}
