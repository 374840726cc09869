//! Elementary series transforms: trailing moving average, differencing,
//! and the sample autocorrelation function.

use crate::ingest::{MonthlySeries, RegionId};
use crate::month::YearMonth;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TsError {
    #[error("series too short: need at least {needed} values, got {got}")]
    SeriesTooShort { needed: usize, got: usize },
    #[error("window must be at least 1")]
    InvalidWindow,
    #[error("expected {expected} anchor values, got {got}")]
    AnchorCountMismatch { expected: usize, got: usize },
    #[error("series has zero variance")]
    ConstantSeries,
}

/// Trailing moving average of a monthly series.
///
/// Entry `j` is the mean of source months `j ..= j + window - 1` and is
/// dated at source month `j + window - 1`; the first `window - 1` months
/// have no smoothed value.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedSeries {
    region: RegionId,
    first_month: YearMonth,
    window: usize,
    values: Vec<f64>,
}

impl SmoothedSeries {
    /// Wraps values that are already smoothed; `first_month` dates `values[0]`.
    pub fn from_values(region: RegionId, first_month: YearMonth, window: usize, values: Vec<f64>) -> Self {
        Self {
            region,
            first_month,
            window,
            values,
        }
    }

    pub fn region(&self) -> &RegionId {
        &self.region
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn month_at(&self, index: usize) -> YearMonth {
        self.first_month.plus(index as i32)
    }

    /// First index dated on or after `month`.
    pub fn first_index_at_or_after(&self, month: YearMonth) -> usize {
        month.months_since(self.first_month).max(0) as usize
    }
}

/// Trailing means over each full window of `values`.
pub fn trailing_mean(values: &[f64], window: usize) -> Result<Vec<f64>, TsError> {
    if window == 0 {
        return Err(TsError::InvalidWindow);
    }
    if values.len() < window {
        return Err(TsError::SeriesTooShort {
            needed: window,
            got: values.len(),
        });
    }
    let w = window as f64;
    Ok(values.windows(window).map(|win| win.iter().sum::<f64>() / w).collect())
}

pub fn moving_average(series: &MonthlySeries, window: usize) -> Result<SmoothedSeries, TsError> {
    let values = trailing_mean(series.values(), window)?;
    Ok(SmoothedSeries {
        region: series.region().clone(),
        first_month: series.start().plus(window as i32 - 1),
        window,
        values,
    })
}

/// Applies first differences `order` times.
pub fn difference(values: &[f64], order: usize) -> Result<Vec<f64>, TsError> {
    if values.len() <= order {
        return Err(TsError::SeriesTooShort {
            needed: order + 1,
            got: values.len(),
        });
    }
    let mut out = values.to_vec();
    for _ in 0..order {
        out = out.windows(2).map(|w| w[1] - w[0]).collect();
    }
    Ok(out)
}

/// Inverts [`difference`] for a continuation: `anchors` are the last `order`
/// values preceding `diffed`, in chronological order.
pub fn undifference(diffed: &[f64], anchors: &[f64], order: usize) -> Result<Vec<f64>, TsError> {
    if anchors.len() != order {
        return Err(TsError::AnchorCountMismatch {
            expected: order,
            got: anchors.len(),
        });
    }
    // last value of each differencing level 0..order, recovered from the anchors
    let mut tails = Vec::with_capacity(order);
    let mut level = anchors.to_vec();
    for _ in 0..order {
        tails.push(*level.last().expect("non-empty level"));
        level = level.windows(2).map(|w| w[1] - w[0]).collect();
    }
    let mut out = diffed.to_vec();
    for &tail in tails.iter().rev() {
        let mut acc = tail;
        for v in out.iter_mut() {
            acc += *v;
            *v = acc;
        }
    }
    Ok(out)
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Population variance (divides by N).
pub fn variance(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / values.len() as f64
}

/// Sample autocorrelations for lags `0..=max_lag`.
#[derive(Debug, Clone, PartialEq)]
pub struct AcfResult {
    pub coefficients: Vec<f64>,
}

impl AcfResult {
    pub fn lags(&self) -> usize {
        self.coefficients.len() - 1
    }
}

/// Biased correlogram estimator: every lag shares the lag-0 denominator.
pub fn acf(values: &[f64], max_lag: usize) -> Result<AcfResult, TsError> {
    if values.len() <= max_lag {
        return Err(TsError::SeriesTooShort {
            needed: max_lag + 1,
            got: values.len(),
        });
    }
    let m = mean(values);
    let centered: Vec<f64> = values.iter().map(|v| v - m).collect();
    let denom: f64 = centered.iter().map(|v| v * v).sum();
    if denom == 0.0 {
        return Err(TsError::ConstantSeries);
    }
    let mut coefficients = Vec::with_capacity(max_lag + 1);
    coefficients.push(1.0);
    for lag in 1..=max_lag {
        let num: f64 = centered.iter().zip(&centered[lag..]).map(|(a, b)| a * b).sum();
        coefficients.push(num / denom);
    }
    Ok(AcfResult { coefficients })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn series(values: &[f64]) -> MonthlySeries {
        MonthlySeries::new(
            RegionId::new("1", "A, WA").unwrap(),
            YearMonth::new(2000, 1).unwrap(),
            values.to_vec(),
        )
        .unwrap()
    }

    fn brute_acf(y: &[f64], k: usize) -> f64 {
        let n = y.len();
        let m: f64 = y.iter().sum::<f64>() / n as f64;
        let mut num = 0.0;
        for t in 0..n - k {
            num += (y[t] - m) * (y[t + k] - m);
        }
        let mut den = 0.0;
        for v in y {
            den += (v - m) * (v - m);
        }
        num / den
    }

    #[test]
    fn moving_average_examples() {
        let s = moving_average(&series(&[7.5; 6]), 5).unwrap();
        assert_eq!(s.values(), &[7.5, 7.5]);
        let s = moving_average(&series(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]), 5).unwrap();
        assert_eq!(s.values(), &[3.0, 4.0]);
        assert_eq!(s.month_at(0), YearMonth::new(2000, 5).unwrap());
        let raw = [3.0, 1.0, 4.0, 1.0, 5.0];
        assert_eq!(moving_average(&series(&raw), 1).unwrap().values(), &raw);
    }

    #[test]
    fn moving_average_too_short() {
        assert_eq!(
            moving_average(&series(&[1.0, 2.0]), 5).unwrap_err(),
            TsError::SeriesTooShort { needed: 5, got: 2 }
        );
        assert_eq!(trailing_mean(&[1.0], 0).unwrap_err(), TsError::InvalidWindow);
    }

    #[test]
    fn difference_examples() {
        assert_eq!(difference(&[2.0, 4.0, 6.0, 8.0], 1).unwrap(), vec![2.0, 2.0, 2.0]);
        assert_eq!(difference(&[1.0, 5.0], 0).unwrap(), vec![1.0, 5.0]);
        assert_eq!(difference(&[1.0, 4.0, 9.0, 16.0], 2).unwrap(), vec![2.0, 2.0]);
        assert!(matches!(
            difference(&[1.0, 2.0], 2),
            Err(TsError::SeriesTooShort { .. })
        ));
    }

    #[test]
    fn undifference_examples() {
        assert_eq!(undifference(&[2.0, 2.0, 2.0], &[2.0], 1).unwrap(), vec![4.0, 6.0, 8.0]);
        assert_eq!(undifference(&[1.5, -2.0], &[], 0).unwrap(), vec![1.5, -2.0]);
        assert_eq!(
            undifference(&[1.0], &[1.0, 2.0], 1).unwrap_err(),
            TsError::AnchorCountMismatch { expected: 1, got: 2 }
        );
    }

    #[test]
    fn acf_examples() {
        let alt: Vec<f64> = (0..20).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let r = acf(&alt, 3).unwrap();
        assert_eq!(r.coefficients[0], 1.0);
        // oracle: 19 products of -1 over denominator 20
        assert!((brute_acf(&alt, 1) - (-0.95)).abs() < 1e-15);
        assert!((r.coefficients[1] - brute_acf(&alt, 1)).abs() < 1e-15);
        assert_eq!(r.lags(), 3);
        assert_eq!(acf(&[2.0; 5], 1).unwrap_err(), TsError::ConstantSeries);
        assert!(matches!(acf(&[1.0, 2.0], 2), Err(TsError::SeriesTooShort { .. })));
    }

    proptest! {
        #[test]
        fn moving_average_within_window_bounds(values in prop::collection::vec(0.0f64..1e6, 5..60), window in 1usize..6) {
            let out = trailing_mean(&values, window).unwrap();
            prop_assert_eq!(out.len(), values.len() - window + 1);
            for (j, m) in out.iter().enumerate() {
                let win = &values[j..j + window];
                let lo = win.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = win.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(*m >= lo - 1e-9 && *m <= hi + 1e-9);
                let brute: f64 = win.iter().sum::<f64>() / window as f64;
                prop_assert!((m - brute).abs() <= 1e-12 * brute.abs().max(1.0));
            }
        }

        #[test]
        fn moving_average_of_line_is_line(a in -100.0f64..100.0, slope in -5.0f64..5.0, n in 6usize..50, window in 1usize..6) {
            let values: Vec<f64> = (0..n).map(|i| a + slope * i as f64).collect();
            let out = trailing_mean(&values, window).unwrap();
            for w in out.windows(2) {
                prop_assert!((w[1] - w[0] - slope).abs() < 1e-12 * (1.0 + a.abs() + slope.abs() * n as f64));
            }
        }

        #[test]
        fn difference_round_trip(values in prop::collection::vec(-1e3f64..1e3, 20), order in 0usize..4, split in 4usize..16) {
            let diffed = difference(&values, order).unwrap();
            // diffed[i] depends on values[i..=i+order]; the continuation after `split`
            let cont = &diffed[split - order..];
            let rebuilt = undifference(cont, &values[split - order..split], order).unwrap();
            for (r, v) in rebuilt.iter().zip(&values[split..]) {
                prop_assert!((r - v).abs() < 1e-12 * 1e3 * 8.0, "{} vs {}", r, v);
            }
        }

        #[test]
        fn acf_affine_invariant(values in prop::collection::vec(-10.0f64..10.0, 10..40), a in 0.1f64..50.0, b in -100.0f64..100.0) {
            prop_assume!(variance(&values) > 1e-3);
            let base = acf(&values, 5).unwrap();
            let moved: Vec<f64> = values.iter().map(|v| a * v + b).collect();
            let other = acf(&moved, 5).unwrap();
            for (x, y) in base.coefficients.iter().zip(&other.coefficients) {
                prop_assert!((x - y).abs() < 1e-9);
                prop_assert!(x.abs() <= 1.0 + 1e-9);
            }
        }
    }
}
