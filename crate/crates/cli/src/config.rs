use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use recession_core::arima::OrderGrid;
use recession_core::{ArimaOrder, Schema, YearMonth};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    #[default]
    AubRank,
    ArimaScore,
    Pca,
    Correlate,
    ChoroplethExport,
    Synth,
}

/// Effective configuration of one run. Every field has a default; a JSON
/// config file overrides the defaults and command-line flags override the
/// file. The whole struct is written into `run_manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    /// Series CSV (aub-rank, arima-score, choropleth-export) or feature CSV (pca).
    pub input: Option<PathBuf>,
    pub schema: Schema,
    pub max_gap: usize,
    pub output_dir: PathBuf,

    pub ma_window: usize,
    pub onset: YearMonth,
    pub normalize_baseline: bool,
    /// Losers and gainers reported by aub-rank.
    pub k: usize,

    pub horizon: usize,
    /// Fixed ARIMA order; `None` selects the order by AIC over `grid`.
    pub order: Option<ArimaOrder>,
    pub grid: OrderGrid,
    /// Months from this one on are held out of the ARIMA fit.
    pub train_end: Option<YearMonth>,

    /// Components kept by pca; required for that command.
    pub pca_k: Option<usize>,
    pub max_missing_frac: f64,

    pub aub_scores: Option<PathBuf>,
    pub arima_scores: Option<PathBuf>,
    pub population: Option<PathBuf>,
    pub unemployment: Option<PathBuf>,
    pub log_x: bool,

    /// Region-code to state overrides for choropleth-export.
    pub state_mapping: Option<PathBuf>,
    pub first_year: Option<i32>,
    pub last_year: Option<i32>,
    pub level_clamp: Option<(f64, f64)>,
    pub diff_clamp: Option<(f64, f64)>,

    pub seed: u64,
    pub boom_bust_regions: usize,
    pub arima_regions: usize,
    pub synth_start: YearMonth,
    pub arima_len: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let synth = recession_core::synth::SynthConfig::default();
        Self {
            command: Command::default(),
            input: None,
            schema: Schema::Long,
            max_gap: recession_core::ingest::DEFAULT_MAX_GAP,
            output_dir: PathBuf::from("out"),
            ma_window: 5,
            onset: YearMonth::new(2007, 1).expect("valid month"),
            normalize_baseline: false,
            k: 10,
            horizon: 36,
            order: None,
            grid: OrderGrid::default(),
            train_end: None,
            pca_k: None,
            max_missing_frac: recession_core::pca::DEFAULT_MAX_MISSING_FRAC,
            aub_scores: None,
            arima_scores: None,
            population: None,
            unemployment: None,
            log_x: false,
            state_mapping: None,
            first_year: None,
            last_year: None,
            level_clamp: None,
            diff_clamp: None,
            seed: synth.seed,
            boom_bust_regions: synth.boom_bust_regions,
            arima_regions: synth.arima_regions,
            synth_start: synth.start,
            arima_len: synth.arima_len,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).context("invalid config file")
    }

    pub fn validate(&self) -> Result<()> {
        if self.ma_window == 0 {
            bail!("ma_window must be at least 1");
        }
        if self.horizon == 0 {
            bail!("horizon must be at least 1");
        }
        if !(0.0..1.0).contains(&self.max_missing_frac) {
            bail!("max_missing_frac must be in [0, 1)");
        }
        for (name, clamp) in [("level_clamp", self.level_clamp), ("diff_clamp", self.diff_clamp)] {
            if let Some((lo, hi)) = clamp {
                if lo.is_nan() || hi.is_nan() || lo > hi {
                    bail!("{name}: lower bound must not exceed upper bound");
                }
            }
        }
        if let (Some(a), Some(b)) = (self.first_year, self.last_year) {
            if a > b {
                bail!("first_year must not exceed last_year");
            }
        }
        Ok(())
    }

    pub fn require_input(&self) -> Result<&PathBuf> {
        self.input.as_ref().context("--input is required for this command")
    }
}
