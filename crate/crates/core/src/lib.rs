//! Recession-impact metrics for regional home value index series.
//!
//! The crate covers the full analysis path:
//!
//! * [`ingest`]: CSV parsing of monthly series and covariate tables;
//! * [`tscore`]: moving averages, differencing, autocorrelation;
//! * [`aub`]: recession window detection and the Area-Under-Baseline score;
//! * [`arima`]: CSS-estimated ARIMA models, 95% forecast bands and the
//!   interval-area score;
//! * [`pca`]: correlation-matrix PCA of region feature tables;
//! * [`stats`]: regression of scores against population and unemployment;
//! * [`choropleth`]: state-by-year level and difference grids;
//! * [`synth`]: seeded fixtures with analytic ground truth.

pub mod arima;
pub mod aub;
pub mod choropleth;
pub mod ingest;
pub mod month;
pub mod pca;
pub mod stats;
pub mod synth;
pub mod tscore;

pub use arima::{ArimaModel, ArimaOrder, ForecastResult};
pub use aub::{AubConfig, AubScore, Classification, RecessionWindow};
pub use choropleth::{GridKind, StateYearGrid};
pub use ingest::{CovariateKind, CovariateTable, GappySeries, MonthlySeries, RegionId, RegionLevel, Schema};
pub use month::YearMonth;
pub use pca::{FeatureMatrix, PcaResult};
pub use stats::RegressionResult;
pub use tscore::{AcfResult, SmoothedSeries};
