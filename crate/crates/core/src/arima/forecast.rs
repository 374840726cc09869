use serde::{Deserialize, Serialize};

use super::{poly, ArimaError, ArimaModel};
use crate::ingest::MonthlySeries;
use crate::month::YearMonth;
use crate::tscore;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.96;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastResult {
    pub horizon: usize,
    pub point: Vec<f64>,
    pub lower95: Vec<f64>,
    pub upper95: Vec<f64>,
    /// Forecast error variance per step, `sigma2 * sum_{j<h} psi_j^2`.
    pub variance: Vec<f64>,
    pub psi: Vec<f64>,
    pub ci_area: f64,
    /// `None` when the last observed level is not positive.
    pub ci_area_normalized: Option<f64>,
}

impl ForecastResult {
    pub fn widths(&self) -> Vec<f64> {
        self.upper95.iter().zip(&self.lower95).map(|(u, l)| u - l).collect()
    }
}

/// MA(infinity) weights `psi_0..psi_{horizon-1}` of an ARMA model whose AR
/// polynomial coefficients are `ar` (already including any integration).
pub fn psi_weights(ar: &[f64], ma: &[f64], horizon: usize) -> Vec<f64> {
    let mut psi = Vec::with_capacity(horizon);
    for j in 0..horizon {
        if j == 0 {
            psi.push(1.0);
            continue;
        }
        let mut v = ma.get(j - 1).copied().unwrap_or(0.0);
        for (i, a) in ar.iter().enumerate().take(j) {
            v += a * psi[j - i - 1];
        }
        psi.push(v);
    }
    psi
}

/// Iterates the ARMA recursion with future innovations at zero, then
/// integrates back to index level against the stored tail.
pub fn forecast(model: &ArimaModel, horizon: usize) -> Result<ForecastResult, ArimaError> {
    if horizon == 0 {
        return Err(ArimaError::InvalidHorizon);
    }
    let order = model.order;
    let tail = &model.series_tail;
    let mut w: Vec<f64> = if order.p > 0 {
        let diffed_tail = tscore::difference(tail, order.d)?;
        diffed_tail[diffed_tail.len() - order.p..].to_vec()
    } else {
        Vec::new()
    };
    let mut e: Vec<f64> = model.residuals[model.residuals.len() - order.q..].to_vec();

    let mut diffed_fc = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let mut v = model.constant;
        for (i, phi) in model.ar.iter().enumerate() {
            v += phi * w[w.len() - 1 - i];
        }
        for (j, theta) in model.ma.iter().enumerate() {
            v += theta * e[e.len() - 1 - j];
        }
        w.push(v);
        e.push(0.0);
        diffed_fc.push(v);
    }
    let anchors = &tail[tail.len() - order.d..];
    let point = tscore::undifference(&diffed_fc, anchors, order.d)?;

    let psi = psi_weights(&poly::integrated_ar(&model.ar, order.d), &model.ma, horizon);
    let mut variance = Vec::with_capacity(horizon);
    let mut acc = 0.0;
    for p in &psi {
        acc += p * p;
        variance.push(model.sigma2 * acc);
    }
    let half: Vec<f64> = variance.iter().map(|v| Z95 * v.sqrt()).collect();
    let lower95 = point.iter().zip(&half).map(|(p, h)| p - h).collect();
    let upper95 = point.iter().zip(&half).map(|(p, h)| p + h).collect();

    let mut result = ForecastResult {
        horizon,
        point,
        lower95,
        upper95,
        variance,
        psi,
        ci_area: 0.0,
        ci_area_normalized: None,
    };
    let area: f64 = result.widths().iter().sum();
    result.ci_area = area;
    result.ci_area_normalized = ci_area(&result, model.last_observed()).ok().map(|(_, n)| n);
    Ok(result)
}

/// Rectangle-rule area of the 95% band and the same area divided by
/// `last_observed * horizon`.
pub fn ci_area(result: &ForecastResult, last_observed: f64) -> Result<(f64, f64), ArimaError> {
    if last_observed.is_nan() || last_observed <= 0.0 {
        return Err(ArimaError::NonPositiveLevel(last_observed));
    }
    let area: f64 = result.widths().iter().sum();
    Ok((area, area / (last_observed * result.horizon as f64)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `bins + 1` edges.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualDiagnostics {
    pub n: usize,
    pub mean: f64,
    pub stddev: f64,
    /// `|mean| > 2 stddev / sqrt(n)`.
    pub bias_flag: bool,
    pub histogram: Histogram,
}

pub fn residual_diagnostics(model: &ArimaModel) -> Result<ResidualDiagnostics, ArimaError> {
    diagnose_residuals(model.effective_residuals(), 10)
}

pub fn diagnose_residuals(residuals: &[f64], bins: usize) -> Result<ResidualDiagnostics, ArimaError> {
    if residuals.is_empty() {
        return Err(ArimaError::NoResiduals);
    }
    let n = residuals.len();
    let mean = tscore::mean(residuals);
    let stddev = if n > 1 {
        (residuals.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let bias_flag = mean.abs() > 2.0 * stddev / (n as f64).sqrt();

    let bins = bins.max(1);
    let lo = residuals.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = residuals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
    let step = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins)
        .map(|i| if i == bins { hi } else { lo + step * i as f64 })
        .collect();
    let mut counts = vec![0; bins];
    for r in residuals {
        let idx = (((r - lo) / step) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    Ok(ResidualDiagnostics {
        n,
        mean,
        stddev,
        bias_flag,
        histogram: Histogram { edges, counts },
    })
}

/// Splits into months before `split` and months from `split` on.
pub fn backtest_split(series: &MonthlySeries, split: YearMonth) -> Result<(MonthlySeries, MonthlySeries), ArimaError> {
    if split <= series.start() || split > series.end() {
        return Err(ArimaError::SplitOutOfRange);
    }
    let at = split.months_since(series.start()) as usize;
    Ok((series.slice(0, at), series.slice(at, series.len())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arima::{fit_values, ArimaOrder, FitOptions};
    use crate::ingest::RegionId;

    fn model(
        order: ArimaOrder,
        constant: f64,
        ar: Vec<f64>,
        ma: Vec<f64>,
        sigma2: f64,
        tail: Vec<f64>,
        residuals: Vec<f64>,
    ) -> ArimaModel {
        ArimaModel {
            order,
            include_constant: true,
            constant,
            ar,
            ma,
            sigma2,
            css: 0.0,
            initial_css: 0.0,
            loglik_proxy: 0.0,
            effective_n: residuals.len(),
            residuals,
            series_tail: tail,
            stationary: true,
            invertible: true,
            short_sample: false,
            iterations: 0,
            converged: true,
        }
    }

    #[test]
    fn random_walk_is_flat_with_linear_variance() {
        let m = model(
            ArimaOrder { p: 0, d: 1, q: 0 },
            0.0,
            vec![],
            vec![],
            2.5,
            vec![40.0],
            vec![0.0; 10],
        );
        let f = forecast(&m, 6).unwrap();
        assert!(f.point.iter().all(|p| *p == 40.0));
        for (h, v) in f.variance.iter().enumerate() {
            assert_eq!(*v, 2.5 * (h + 1) as f64);
        }
    }

    #[test]
    fn ar1_geometric_decay() {
        let m = model(
            ArimaOrder { p: 1, d: 0, q: 0 },
            0.0,
            vec![0.5],
            vec![],
            1.0,
            vec![8.0],
            vec![0.0; 10],
        );
        let f = forecast(&m, 4).unwrap();
        assert_eq!(f.point, vec![4.0, 2.0, 1.0, 0.5]);
        for (j, p) in f.psi.iter().enumerate() {
            assert!((p - 0.5f64.powi(j as i32)).abs() < 1e-12);
        }
    }

    #[test]
    fn ma_terms_use_last_residuals() {
        // MA(1): one-step forecast = c + theta * e_T, then c
        let m = model(
            ArimaOrder { p: 0, d: 0, q: 1 },
            10.0,
            vec![],
            vec![0.4],
            1.0,
            vec![12.0],
            vec![0.0, 1.0, 2.0],
        );
        let f = forecast(&m, 3).unwrap();
        assert_eq!(f.point, vec![10.8, 10.0, 10.0]);
        assert_eq!(f.psi, vec![1.0, 0.4, 0.0]);
    }

    #[test]
    fn horizon_zero_rejected() {
        let m = model(
            ArimaOrder { p: 0, d: 1, q: 0 },
            0.0,
            vec![],
            vec![],
            1.0,
            vec![1.0],
            vec![0.0],
        );
        assert_eq!(forecast(&m, 0).unwrap_err(), ArimaError::InvalidHorizon);
    }

    #[test]
    fn area_arithmetic() {
        let r = ForecastResult {
            horizon: 3,
            point: vec![0.0; 3],
            lower95: vec![-1.0, -2.0, -3.0],
            upper95: vec![1.0, 2.0, 3.0],
            variance: vec![0.0; 3],
            psi: vec![1.0; 3],
            ci_area: 12.0,
            ci_area_normalized: Some(1.0),
        };
        assert_eq!(ci_area(&r, 4.0).unwrap(), (12.0, 1.0));
        assert!(matches!(ci_area(&r, 0.0), Err(ArimaError::NonPositiveLevel(_))));
    }

    #[test]
    fn zero_variance_area() {
        let m = model(
            ArimaOrder { p: 0, d: 1, q: 0 },
            3.0,
            vec![],
            vec![],
            0.0,
            vec![10.0],
            vec![0.0; 5],
        );
        let f = forecast(&m, 12).unwrap();
        assert_eq!(f.ci_area, 0.0);
        assert_eq!(f.ci_area_normalized, Some(0.0));
        assert_eq!(f.point[0], 13.0);
    }

    #[test]
    fn integrated_ar_continuity() {
        let y: Vec<f64> = (0..80)
            .map(|i| 100.0 + 2.0 * i as f64 + ((i * 37) % 11) as f64)
            .collect();
        let m = fit_values(&y, ArimaOrder { p: 2, d: 1, q: 1 }, &FitOptions::default()).unwrap();
        let f = forecast(&m, 5).unwrap();
        let w = tscore::difference(&y, 1).unwrap();
        let e = &m.residuals;
        let n = w.len();
        let one_step = m.constant + m.ar[0] * w[n - 1] + m.ar[1] * w[n - 2] + m.ma[0] * e[n - 1];
        assert!((f.point[0] - y[79] - one_step).abs() < 1e-9);
        for h in 0..5 {
            assert!(((f.upper95[h] - f.point[h]) - (f.point[h] - f.lower95[h])).abs() <= 1e-12 * f.point[h].abs());
            if h > 0 {
                assert!(f.widths()[h] >= f.widths()[h - 1]);
            }
        }
    }

    #[test]
    fn diagnostics_examples() {
        let d = diagnose_residuals(&[0.0; 20], 5).unwrap();
        assert_eq!(d.mean, 0.0);
        assert!(!d.bias_flag);
        assert_eq!(d.histogram.counts.iter().sum::<usize>(), 20);
        let d = diagnose_residuals(&[-1.0, 1.0], 2).unwrap();
        assert_eq!(d.mean, 0.0);
        assert!(!d.bias_flag);
        assert_eq!(d.histogram.counts, vec![1, 1]);
        assert_eq!(diagnose_residuals(&[], 5).unwrap_err(), ArimaError::NoResiduals);
    }

    #[test]
    fn shifted_residuals_flag_bias() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, Normal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(400);
        let normal = Normal::new(0.5, 1.0).unwrap();
        let r: Vec<f64> = (0..400).map(|_| normal.sample(&mut rng)).collect();
        let d = diagnose_residuals(&r, 10).unwrap();
        // standard error is 1/20, so a 0.5 shift sits ~10 errors out
        assert!(d.bias_flag, "{d:?}");
    }

    #[test]
    fn split_lengths() {
        let s = MonthlySeries::new(
            RegionId::new("1", "A, CA").unwrap(),
            YearMonth::new(2010, 1).unwrap(),
            (0..24).map(f64::from).collect(),
        )
        .unwrap();
        let (train, test) = backtest_split(&s, s.month_at(18)).unwrap();
        assert_eq!((train.len(), test.len()), (18, 6));
        assert_eq!(test.start(), s.month_at(18));
        let joined: Vec<f64> = train.values().iter().chain(test.values()).cloned().collect();
        assert_eq!(joined, s.values());
        assert_eq!(
            backtest_split(&s, YearMonth::new(2009, 1).unwrap()).unwrap_err(),
            ArimaError::SplitOutOfRange
        );
        assert_eq!(backtest_split(&s, s.start()).unwrap_err(), ArimaError::SplitOutOfRange);
        assert!(backtest_split(&s, s.end()).is_ok());
    }
}
