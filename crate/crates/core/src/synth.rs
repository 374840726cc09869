//! Seeded synthetic fixtures with known ground truth.
//!
//! Boom-bust curves are designed on the smoothed scale: the moving average
//! rises linearly to a peak, falls linearly for `fall` months, climbs for
//! `rise` months to slightly above the peak, then keeps rising. The raw
//! series is recovered from the designed average by exact deconvolution,
//! so the AUB of the raw series has a closed form. ARIMA fixtures are
//! simulated from known coefficients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::ingest::{MonthlySeries, RegionId};
use crate::month::YearMonth;

const STATES: [&str; 10] = ["CA", "FL", "NV", "WA", "TX", "IL", "OK", "NE", "AZ", "OH"];

/// Simulates `n` values of an ARMA process after discarding `burn` warm-up
/// values. Innovations are `N(0, sigma^2)`.
pub fn simulate_arma<R: Rng>(
    rng: &mut R,
    c: f64,
    phi: &[f64],
    theta: &[f64],
    sigma: f64,
    n: usize,
    burn: usize,
) -> Vec<f64> {
    let normal = Normal::new(0.0, sigma).expect("sigma must be finite and non-negative");
    let total = n + burn;
    let mut y = Vec::with_capacity(total);
    let mut e = Vec::with_capacity(total);
    for t in 0..total {
        let et = normal.sample(rng);
        let mut v = c + et;
        for (i, p) in phi.iter().enumerate() {
            if t > i {
                v += p * y[t - i - 1];
            }
        }
        for (j, th) in theta.iter().enumerate() {
            if t > j {
                v += th * e[t - j - 1];
            }
        }
        y.push(v);
        e.push(et);
    }
    y.split_off(burn)
}

/// Shape of a boom-bust-recovery curve, in smoothed-index months.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoomBustParams {
    /// Smoothed index of the peak.
    pub peak_index: usize,
    /// Smoothed value at the peak.
    pub peak: f64,
    /// Monthly slope before the peak (> 0).
    pub pre_slope: f64,
    /// Peak-to-trough drop.
    pub depth: f64,
    pub fall: usize,
    pub rise: usize,
    /// The climb ends `depth * overshoot / rise` above the peak; in (0, 1).
    pub overshoot: f64,
    pub post_months: usize,
    pub post_slope: f64,
}

impl BoomBustParams {
    /// AUB of the designed smoothed path over `peak ..= recovery`.
    pub fn closed_form_aub(&self) -> f64 {
        let (f, r) = (self.fall as f64, self.rise as f64);
        let rho = self.overshoot / r;
        self.depth * ((f + 1.0) / 2.0 + r - (1.0 + rho) * (r + 1.0) / 2.0)
    }

    pub fn recovery_index(&self) -> usize {
        self.peak_index + self.fall + self.rise
    }

    /// The designed moving-average path.
    pub fn smoothed_path(&self) -> Vec<f64> {
        let c = self.peak;
        let n = self.recovery_index() + self.post_months + 1;
        let trough = c - self.depth;
        let top = c + self.depth * self.overshoot / self.rise as f64;
        (0..n)
            .map(|j| {
                if j <= self.peak_index {
                    c - self.pre_slope * (self.peak_index - j) as f64
                } else if j <= self.peak_index + self.fall {
                    c - self.depth * (j - self.peak_index) as f64 / self.fall as f64
                } else if j <= self.recovery_index() {
                    let k = (j - self.peak_index - self.fall) as f64;
                    trough + (top - trough) * k / self.rise as f64
                } else {
                    top + self.post_slope * (j - self.recovery_index()) as f64
                }
            })
            .collect()
    }

    /// Raw values whose trailing `window`-month mean is [`Self::smoothed_path`].
    pub fn raw_values(&self, window: usize) -> Vec<f64> {
        let m = self.smoothed_path();
        let w = window as f64;
        let base = m[0] - self.pre_slope * (w - 1.0) / 2.0;
        let mut y: Vec<f64> = (0..window).map(|i| base + self.pre_slope * i as f64).collect();
        for j in 1..m.len() {
            let next = y[j - 1] + w * (m[j] - m[j - 1]);
            y.push(next);
        }
        y
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub boom_bust_regions: usize,
    pub arima_regions: usize,
    pub start: YearMonth,
    pub onset: YearMonth,
    pub ma_window: usize,
    /// Length of the ARIMA fixtures.
    pub arima_len: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            boom_bust_regions: 100,
            arima_regions: 10,
            start: YearMonth::new(2000, 1).expect("valid month"),
            onset: YearMonth::new(2007, 1).expect("valid month"),
            ma_window: 5,
            arima_len: 229,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixtureKind {
    BoomBust,
    Arima,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthRow {
    pub region_code: String,
    pub kind: FixtureKind,
    pub aub: Option<f64>,
    pub baseline: Option<f64>,
    pub window_start: Option<YearMonth>,
    pub window_end: Option<YearMonth>,
    pub depth: Option<f64>,
    pub fall_months: Option<usize>,
    pub rise_months: Option<usize>,
    pub phi: Option<f64>,
    pub d: Option<usize>,
    pub sigma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub series: Vec<MonthlySeries>,
    pub truth: Vec<GroundTruthRow>,
}

fn random_boom_bust<R: Rng>(rng: &mut R, peak_lo: usize, peak_hi: usize) -> BoomBustParams {
    let peak = rng.random_range(80_000.0..600_000.0);
    BoomBustParams {
        peak_index: rng.random_range(peak_lo..=peak_hi),
        peak,
        pre_slope: peak * rng.random_range(0.001..0.004),
        depth: peak * rng.random_range(0.05..0.35),
        fall: rng.random_range(6..=48),
        rise: rng.random_range(6..=72),
        overshoot: rng.random_range(0.1..0.9),
        post_months: rng.random_range(6..=30),
        post_slope: peak * rng.random_range(0.001..0.004),
    }
}

/// Builds the full synthetic dataset; identical seeds give identical output.
pub fn generate_dataset(config: &SynthConfig) -> SynthDataset {
    assert!(config.ma_window >= 1, "ma_window must be at least 1");
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut series = Vec::with_capacity(config.boom_bust_regions + config.arima_regions);
    let mut truth = Vec::with_capacity(series.capacity());
    let lag = config.ma_window as i32 - 1;
    let onset_index = config.onset.months_since(config.start) - lag;
    assert!(onset_index >= 0, "onset must leave room for the smoothing window");
    let onset_index = onset_index as usize;

    for i in 0..config.boom_bust_regions {
        let params = loop {
            let p = random_boom_bust(&mut rng, onset_index + 1, onset_index + 36);
            if p.raw_values(config.ma_window).iter().all(|v| *v > 0.0) {
                break p;
            }
        };
        let code = format!("SYN{i:04}");
        let region =
            RegionId::new(&code, format!("Synthetic Metro {i}, {}", STATES[i % STATES.len()])).expect("valid region");
        let s = MonthlySeries::new(region, config.start, params.raw_values(config.ma_window)).expect("positive values");
        let smoothed_month = |j: usize| config.start.plus(j as i32 + lag);
        truth.push(GroundTruthRow {
            region_code: code,
            kind: FixtureKind::BoomBust,
            aub: Some(params.closed_form_aub()),
            baseline: Some(params.peak),
            window_start: Some(smoothed_month(params.peak_index)),
            window_end: Some(smoothed_month(params.recovery_index())),
            depth: Some(params.depth),
            fall_months: Some(params.fall),
            rise_months: Some(params.rise),
            phi: None,
            d: None,
            sigma: None,
        });
        series.push(s);
    }

    for i in 0..config.arima_regions {
        let phi = rng.random_range(0.3..0.8);
        let sigma = rng.random_range(200.0..800.0);
        let drift = rng.random_range(100.0..600.0);
        let base = rng.random_range(150_000.0..400_000.0);
        let values = loop {
            let steps = simulate_arma(
                &mut rng,
                drift * (1.0 - phi),
                &[phi],
                &[],
                sigma,
                config.arima_len - 1,
                50,
            );
            let mut level = base;
            let mut v = vec![base];
            for s in steps {
                level += s;
                v.push(level);
            }
            if v.iter().all(|x| *x > 0.0) {
                break v;
            }
        };
        let code = format!("ARM{i:04}");
        let region = RegionId::new(
            &code,
            format!("Simulated Metro {i}, {}", STATES[(i + 3) % STATES.len()]),
        )
        .expect("valid region");
        series.push(MonthlySeries::new(region, config.start, values).expect("positive values"));
        truth.push(GroundTruthRow {
            region_code: code,
            kind: FixtureKind::Arima,
            aub: None,
            baseline: None,
            window_start: None,
            window_end: None,
            depth: None,
            fall_months: None,
            rise_months: None,
            phi: Some(phi),
            d: Some(1),
            sigma: Some(sigma),
        });
    }
    SynthDataset { series, truth }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tscore::trailing_mean;

    fn params() -> BoomBustParams {
        BoomBustParams {
            peak_index: 20,
            peak: 200_000.0,
            pre_slope: 500.0,
            depth: 30_000.0,
            fall: 12,
            rise: 18,
            overshoot: 0.5,
            post_months: 10,
            post_slope: 400.0,
        }
    }

    #[test]
    fn closed_form_matches_termwise_sum() {
        for p in [
            params(),
            BoomBustParams {
                fall: 6,
                rise: 40,
                overshoot: 0.9,
                ..params()
            },
        ] {
            let m = p.smoothed_path();
            let termwise: f64 = m[p.peak_index..=p.recovery_index()].iter().map(|v| p.peak - v).sum();
            assert!(
                (termwise - p.closed_form_aub()).abs() < 1e-9 * termwise,
                "{termwise} {}",
                p.closed_form_aub()
            );
        }
    }

    #[test]
    fn zero_depth_zero_aub() {
        assert_eq!(BoomBustParams { depth: 0.0, ..params() }.closed_form_aub(), 0.0);
    }

    #[test]
    fn raw_series_smooths_to_design() {
        let p = params();
        let raw = p.raw_values(5);
        let smoothed = trailing_mean(&raw, 5).unwrap();
        for (a, b) in smoothed.iter().zip(p.smoothed_path()) {
            assert!((a - b).abs() < 1e-9 * b, "{a} {b}");
        }
        let m = p.smoothed_path();
        let rec = p.recovery_index();
        assert!(m[rec] > p.peak && m[rec - 1] < p.peak);
    }

    #[test]
    fn deterministic() {
        let cfg = SynthConfig {
            boom_bust_regions: 5,
            arima_regions: 2,
            ..SynthConfig::default()
        };
        assert_eq!(generate_dataset(&cfg), generate_dataset(&cfg));
        let other = generate_dataset(&SynthConfig { seed: 7, ..cfg });
        assert_ne!(other, generate_dataset(&cfg));
    }

    #[test]
    fn arma_simulation_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let y = simulate_arma(&mut rng, 1.0, &[0.5], &[], 1.0, 20_000, 100);
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        assert!((mean - 2.0).abs() < 0.05, "{mean}");
    }
}
