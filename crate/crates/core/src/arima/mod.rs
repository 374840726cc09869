//! ARIMA(p, d, q) estimation by conditional sum of squares, forecasting
//! with 95% prediction intervals, and the interval-area score.

pub mod css;
mod forecast;
pub mod optim;
pub mod poly;

use serde::{Deserialize, Serialize};

use crate::ingest::MonthlySeries;
use crate::tscore::{self, TsError};

pub use forecast::{
    backtest_split, ci_area, diagnose_residuals, forecast, psi_weights, residual_diagnostics, ForecastResult,
    Histogram, ResidualDiagnostics, Z95,
};

use css::ArmaShape;
pub use optim::BfgsOptions;
use optim::NonFiniteStart;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ArimaError {
    #[error("order ({p},{d},{q}) exceeds caps ({max_p},{max_d},{max_q})")]
    OrderOutOfRange {
        p: usize,
        d: usize,
        q: usize,
        max_p: usize,
        max_d: usize,
        max_q: usize,
    },
    #[error("series too short: differenced length {got}, need at least {needed}")]
    SeriesTooShort { needed: usize, got: usize },
    #[error("series has zero variance")]
    ConstantSeries,
    #[error("optimizer diverged: non-finite objective")]
    OptimizerDiverged,
    #[error("every candidate order failed to fit")]
    AllFitsFailed,
    #[error("horizon must be at least 1")]
    InvalidHorizon,
    #[error("last observed value must be positive, got {0}")]
    NonPositiveLevel(f64),
    #[error("split month is not strictly inside the series range")]
    SplitOutOfRange,
    #[error("residuals are empty")]
    NoResiduals,
    #[error(transparent)]
    Series(#[from] TsError),
}

impl From<NonFiniteStart> for ArimaError {
    fn from(_: NonFiniteStart) -> Self {
        ArimaError::OptimizerDiverged
    }
}

/// Upper bounds on model orders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderCaps {
    pub p: usize,
    pub d: usize,
    pub q: usize,
}

impl Default for OrderCaps {
    fn default() -> Self {
        Self { p: 5, d: 2, q: 5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ArimaOrder {
    pub p: usize,
    pub d: usize,
    pub q: usize,
}

impl ArimaOrder {
    pub fn new(p: usize, d: usize, q: usize) -> Result<Self, ArimaError> {
        Self::with_caps(p, d, q, OrderCaps::default())
    }

    pub fn with_caps(p: usize, d: usize, q: usize, caps: OrderCaps) -> Result<Self, ArimaError> {
        if p > caps.p || d > caps.d || q > caps.q {
            return Err(ArimaError::OrderOutOfRange {
                p,
                d,
                q,
                max_p: caps.p,
                max_d: caps.d,
                max_q: caps.q,
            });
        }
        Ok(Self { p, d, q })
    }
}

impl Default for ArimaOrder {
    fn default() -> Self {
        Self { p: 2, d: 1, q: 0 }
    }
}

impl std::fmt::Display for ArimaOrder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{},{})", self.p, self.d, self.q)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub include_constant: bool,
    pub optimizer: BfgsOptions,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            include_constant: true,
            optimizer: BfgsOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArimaModel {
    pub order: ArimaOrder,
    pub include_constant: bool,
    pub constant: f64,
    pub ar: Vec<f64>,
    pub ma: Vec<f64>,
    pub sigma2: f64,
    /// One per differenced observation; the first `p` are conditioned on and zero.
    pub residuals: Vec<f64>,
    pub css: f64,
    pub initial_css: f64,
    /// Negative CSS.
    pub loglik_proxy: f64,
    /// Last `max(p, q) + d` observed values.
    pub series_tail: Vec<f64>,
    /// Differenced observations entering the CSS (`len - d - p`).
    pub effective_n: usize,
    pub stationary: bool,
    pub invertible: bool,
    /// Differenced length below `10 (p + q + 1)`.
    pub short_sample: bool,
    pub iterations: usize,
    pub converged: bool,
}

impl ArimaModel {
    /// Residuals past the conditioning prefix.
    pub fn effective_residuals(&self) -> &[f64] {
        &self.residuals[self.order.p..]
    }

    pub fn params(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.ar.len() + self.ma.len() + 1);
        if self.include_constant {
            v.push(self.constant);
        }
        v.extend(&self.ar);
        v.extend(&self.ma);
        v
    }

    pub fn last_observed(&self) -> f64 {
        *self.series_tail.last().expect("tail is non-empty")
    }
}

pub fn fit(series: &MonthlySeries, order: ArimaOrder) -> Result<ArimaModel, ArimaError> {
    fit_values(series.values(), order, &FitOptions::default())
}

/// Fits an ARIMA model to raw index values.
///
/// The series is differenced `d` times and the ARMA part is estimated by
/// minimizing CSS with BFGS from `phi = theta = 0`, `c = mean`. The
/// optimizer works on the differenced series divided by its root mean
/// square, so results are scale-equivariant.
pub fn fit_values(values: &[f64], order: ArimaOrder, opts: &FitOptions) -> Result<ArimaModel, ArimaError> {
    let ArimaOrder { p, d, q } = order;
    if values.len() > 1 && tscore::variance(values) == 0.0 {
        return Err(ArimaError::ConstantSeries);
    }
    let w = tscore::difference(values, d).map_err(|_| ArimaError::SeriesTooShort {
        needed: p + q + 2,
        got: values.len().saturating_sub(d),
    })?;
    let m = w.len();
    if m < p + q + 2 {
        return Err(ArimaError::SeriesTooShort {
            needed: p + q + 2,
            got: m,
        });
    }
    let shape = ArmaShape {
        p,
        q,
        include_constant: opts.include_constant,
    };

    let rms = (w.iter().map(|v| v * v).sum::<f64>() / m as f64).sqrt();
    let scale = if rms > 0.0 && rms.is_finite() { rms } else { 1.0 };
    let z: Vec<f64> = w.iter().map(|v| v / scale).collect();
    let n_eff = (m - p) as f64;

    let mut x0 = vec![0.0; shape.n_params()];
    if opts.include_constant {
        x0[0] = tscore::mean(&z);
    }
    let outcome = optim::minimize(
        |x| {
            let (v, g) = css::css_with_gradient(&z, shape, x);
            (v / n_eff, g.into_iter().map(|gi| gi / n_eff).collect())
        },
        &x0,
        opts.optimizer,
    )?;

    let mut params = outcome.x;
    if opts.include_constant {
        params[0] *= scale;
    }
    let residuals = css::residuals(&w, shape, &params);
    let css_value: f64 = residuals.iter().map(|e| e * e).sum();
    if !css_value.is_finite() {
        return Err(ArimaError::OptimizerDiverged);
    }
    let (constant, ar, ma) = shape.split(&params);
    let (ar, ma) = (ar.to_vec(), ma.to_vec());
    let tail_len = p.max(q) + d;
    let series_tail = values[values.len() - tail_len.max(1)..].to_vec();

    Ok(ArimaModel {
        order,
        include_constant: opts.include_constant,
        constant,
        stationary: poly::ar_is_stationary(&ar),
        invertible: poly::ma_is_invertible(&ma),
        ar,
        ma,
        sigma2: css_value / n_eff,
        residuals,
        css: css_value,
        initial_css: outcome.initial_value * n_eff * scale * scale,
        loglik_proxy: -css_value,
        series_tail,
        effective_n: m - p,
        short_sample: m < 10 * (p + q + 1),
        iterations: outcome.iterations,
        converged: outcome.converged,
    })
}

/// Grid bounds for [`select_order`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderGrid {
    pub p_max: usize,
    pub d_max: usize,
    pub q_max: usize,
}

impl Default for OrderGrid {
    fn default() -> Self {
        Self {
            p_max: 3,
            d_max: 2,
            q_max: 2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OrderSelection {
    pub order: ArimaOrder,
    pub aic: f64,
    pub model: ArimaModel,
    /// Every successfully fitted candidate with its AIC.
    pub candidates: Vec<(ArimaOrder, f64)>,
}

/// Picks the order minimizing `AIC = n ln(CSS / n) + 2 (p + q + 1)`.
///
/// All candidates are scored on the same trailing window of
/// `len - d_max - p_max` innovations. Ties prefer the smallest `p + q`,
/// then the smallest `d`. Fits with a non-invertible MA part only win when
/// no invertible candidate exists: their conditional residuals carry an
/// explosive mode and the CSS is not comparable.
pub fn select_order(values: &[f64], grid: OrderGrid, opts: &FitOptions) -> Result<OrderSelection, ArimaError> {
    let caps = OrderCaps::default();
    ArimaOrder::with_caps(grid.p_max, grid.d_max, grid.q_max, caps)?;
    let common = values.len().saturating_sub(grid.d_max + grid.p_max);
    if common == 0 {
        return Err(ArimaError::AllFitsFailed);
    }
    let nf = common as f64;

    let mut best: Option<(ArimaOrder, f64, ArimaModel)> = None;
    let mut candidates = Vec::new();
    for d in 0..=grid.d_max {
        for p in 0..=grid.p_max {
            for q in 0..=grid.q_max {
                let order = ArimaOrder { p, d, q };
                let Ok(model) = fit_values(values, order, opts) else {
                    continue;
                };
                let tail = &model.residuals[model.residuals.len() - common.min(model.effective_n)..];
                let css_common: f64 = tail.iter().map(|e| e * e).sum();
                let aic = nf * (css_common / nf).ln() + 2.0 * (p + q + 1) as f64;
                if aic.is_nan() {
                    continue;
                }
                candidates.push((order, aic));
                let rank = u8::from(!model.invertible);
                let better = match &best {
                    None => true,
                    Some((bo, ba, bm)) => {
                        let best_rank = u8::from(!bm.invertible);
                        rank < best_rank
                            || (rank == best_rank && (aic < *ba || (aic == *ba && (p + q, d) < (bo.p + bo.q, bo.d))))
                    }
                };
                if better {
                    best = Some((order, aic, model));
                }
            }
        }
    }
    let (order, aic, model) = best.ok_or(ArimaError::AllFitsFailed)?;
    Ok(OrderSelection {
        order,
        aic,
        model,
        candidates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::simulate_arma;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn order_caps() {
        assert!(ArimaOrder::new(5, 2, 5).is_ok());
        assert!(matches!(
            ArimaOrder::new(6, 0, 0),
            Err(ArimaError::OrderOutOfRange { .. })
        ));
        assert!(matches!(
            ArimaOrder::new(0, 3, 0),
            Err(ArimaError::OrderOutOfRange { .. })
        ));
    }

    #[test]
    fn white_noise_ar1_near_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let y = simulate_arma(&mut rng, 0.0, &[], &[], 1.0, 500, 0);
        let m = fit_values(&y, ArimaOrder { p: 1, d: 0, q: 0 }, &FitOptions::default()).unwrap();
        assert!(m.ar[0].abs() < 0.15, "{}", m.ar[0]);
        assert!(m.css <= m.initial_css);
        assert_eq!(m.residuals.len(), 500);
        assert_eq!(m.effective_n, 499);
    }

    #[test]
    fn ar1_recovers_coefficient() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let y = simulate_arma(&mut rng, 0.0, &[0.7], &[], 1.0, 500, 100);
        let m = fit_values(&y, ArimaOrder { p: 1, d: 0, q: 0 }, &FitOptions::default()).unwrap();
        assert!((0.6..=0.8).contains(&m.ar[0]), "{}", m.ar[0]);
        assert!(m.stationary);
    }

    #[test]
    fn ma1_recovers_coefficient() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let y = simulate_arma(&mut rng, 2.0, &[], &[0.5], 1.0, 800, 50);
        let m = fit_values(&y, ArimaOrder { p: 0, d: 0, q: 1 }, &FitOptions::default()).unwrap();
        assert!((m.ma[0] - 0.5).abs() < 0.1, "{}", m.ma[0]);
        assert!((m.constant - 2.0).abs() < 0.2, "{}", m.constant);
        assert!(m.invertible);
    }

    #[test]
    fn degenerate_order_is_mean_and_variance() {
        let y = [3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0];
        let m = fit_values(&y, ArimaOrder { p: 0, d: 0, q: 0 }, &FitOptions::default()).unwrap();
        let mean = y.iter().sum::<f64>() / 8.0;
        let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 8.0;
        assert!((m.constant - mean).abs() < 1e-12);
        assert!((m.sigma2 - var).abs() < 1e-12);
    }

    #[test]
    fn too_short_and_constant() {
        let y = [1.0, 2.0, 3.5];
        assert!(matches!(
            fit_values(&y, ArimaOrder { p: 1, d: 1, q: 1 }, &FitOptions::default()),
            Err(ArimaError::SeriesTooShort { .. })
        ));
        assert_eq!(
            fit_values(&[4.0; 40], ArimaOrder { p: 1, d: 0, q: 0 }, &FitOptions::default()).unwrap_err(),
            ArimaError::ConstantSeries
        );
        assert_eq!(
            select_order(&[4.0; 40], OrderGrid::default(), &FitOptions::default()).unwrap_err(),
            ArimaError::AllFitsFailed
        );
    }

    #[test]
    fn short_sample_flag() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let y = simulate_arma(&mut rng, 0.0, &[0.3], &[], 1.0, 25, 10);
        let m = fit_values(&y, ArimaOrder { p: 2, d: 0, q: 1 }, &FitOptions::default()).unwrap();
        assert!(m.short_sample);
    }

    fn walk(seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let steps = simulate_arma(&mut rng, 0.0, &[], &[], 1.0, 500, 0);
        steps
            .iter()
            .scan(100.0, |acc, e| {
                *acc += e;
                Some(*acc)
            })
            .collect()
    }

    #[test]
    fn random_walk_selects_first_difference() {
        for seed in 0..10 {
            let sel = select_order(
                &walk(seed),
                OrderGrid {
                    p_max: 0,
                    d_max: 2,
                    q_max: 2,
                },
                &FitOptions::default(),
            )
            .unwrap();
            assert_eq!(sel.order.d, 1, "seed {seed}: {:?}", sel.candidates);
        }
    }

    // With AR terms in the grid, AIC alone cannot separate a unit root from
    // phi close to one; the stationary winner must then be nearly integrated.
    #[test]
    fn random_walk_with_ar_grid_is_integrated_or_near_unit_root() {
        for seed in 0..10 {
            let sel = select_order(
                &walk(seed),
                OrderGrid {
                    p_max: 2,
                    d_max: 2,
                    q_max: 2,
                },
                &FitOptions::default(),
            )
            .unwrap();
            if sel.order.d == 0 {
                let phi_sum: f64 = sel.model.ar.iter().sum();
                assert!(phi_sum > 0.9, "seed {seed}: {:?} {:?}", sel.order, sel.model.ar);
            }
        }
    }
}
