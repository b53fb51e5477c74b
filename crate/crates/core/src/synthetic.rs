//! Seeded synthetic market data.
//!
//! Two consumers: demo/fixture CSVs exercising every input column the
//! built-in formulas reference, and a planted-signal environment where one
//! alpha is literally the next step's return, which gives training sanity
//! checks a known right answer.

use chrono::{Datelike, NaiveDate, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::env::{EnvConfig, TradingEnv};
use crate::error::{Error, Result};
use crate::frame::{self, FeatureFrame, OhlcvSeries, RiskConfig, COL_FUTURE_RETURN};
use crate::matrix;

/// Input columns the built-in corpus needs beyond OHLCV and the computed
/// indicators: a sentiment score, company polarity scores, and index closes.
pub const SENTIMENT_COLUMNS: [&str; 8] = [
    "S_t",
    "Apple_polarity",
    "HSBC_polarity",
    "Pepsi_polarity",
    "Tencent_polarity",
    "Close_Nikkei225",
    "Close_SP500",
    "Close_HSI",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticConfig {
    pub n_rows: usize,
    pub seed: u64,
    pub start_price: f64,
    pub daily_drift: f64,
    pub daily_vol: f64,
    pub start_date: NaiveDate,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_rows: 1500,
            seed: 7,
            start_price: 100.0,
            daily_drift: 2e-4,
            daily_vol: 0.012,
            start_date: NaiveDate::from_ymd_opt(2015, 1, 2).unwrap(),
        }
    }
}

fn trading_days(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    let mut days = Vec::with_capacity(n);
    let mut d = start;
    while days.len() < n {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            days.push(d);
        }
        d = d + chrono::Days::new(1);
    }
    days
}

fn gbm_path(n: usize, start: f64, drift: f64, vol: f64, rng: &mut impl Rng) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    let mut price = start;
    for _ in 0..n {
        let z: f64 = rng.sample(StandardNormal);
        price *= (drift - 0.5 * vol * vol + vol * z).exp();
        out.push(price);
    }
    out
}

fn ar1_path(n: usize, persistence: f64, shock: f64, rng: &mut impl Rng) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    let mut level = 0.0;
    for _ in 0..n {
        let z: f64 = rng.sample(StandardNormal);
        level = (persistence * level + shock * z).clamp(-1.0, 1.0);
        out.push(level);
    }
    out
}

/// Geometric random walk with intraday ranges coherent by construction.
pub fn generate_series(config: &SyntheticConfig) -> OhlcvSeries {
    let n = config.n_rows;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let close = gbm_path(
        n,
        config.start_price,
        config.daily_drift,
        config.daily_vol,
        &mut rng,
    );
    let mut open = Vec::with_capacity(n);
    let mut high = Vec::with_capacity(n);
    let mut low = Vec::with_capacity(n);
    let mut volume = Vec::with_capacity(n);
    let mut prev_close = config.start_price;
    for t in 0..n {
        let gap: f64 = rng.sample::<f64, _>(StandardNormal) * config.daily_vol * 0.3;
        let o = prev_close * gap.exp();
        let body_top = o.max(close[t]);
        let body_bottom = o.min(close[t]);
        let wick_up: f64 = rng.gen_range(0.0..config.daily_vol);
        let wick_down: f64 = rng.gen_range(0.0..config.daily_vol);
        open.push(o);
        high.push(body_top * (1.0 + wick_up));
        low.push(body_bottom * (1.0 - wick_down));
        let v: f64 = rng.sample(StandardNormal);
        volume.push((1.0e6 * (0.4 * v).exp()).round());
        prev_close = close[t];
    }
    OhlcvSeries {
        dates: trading_days(config.start_date, n),
        open,
        high,
        low,
        close,
        volume,
    }
}

/// Frame with OHLCV plus the sentiment, polarity, and index-close columns
/// the built-in corpus references. No indicators or risk columns yet.
pub fn generate_frame(config: &SyntheticConfig) -> Result<FeatureFrame> {
    let series = generate_series(config);
    let mut frame = FeatureFrame::from_ohlcv(series);
    let n = config.n_rows;
    // one decoupled stream per column: adding a column never shifts others
    for (k, name) in SENTIMENT_COLUMNS.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(100 + k as u64));
        let values = if name.starts_with("Close_") {
            gbm_path(n, 1000.0 * (k as f64 + 1.0), 1e-4, 0.01, &mut rng)
        } else {
            ar1_path(n, 0.85, 0.3, &mut rng)
        };
        frame.add_column(name, values)?;
    }
    Ok(frame)
}

/// CSV text for the demo fixture: lowercase OHLCV headers plus the
/// sentiment columns, one row per trading day. Floats print in shortest
/// round-trip form, so reloading reproduces the exact values.
pub fn demo_csv(config: &SyntheticConfig) -> Result<String> {
    let frame = generate_frame(config)?;
    let mut out = String::from("date,open,high,low,close,volume");
    for name in SENTIMENT_COLUMNS {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    let cols = ["O_t", "High_t", "Low_t", "C_t", "V_t"];
    for t in 0..frame.len() {
        out.push_str(&frame.dates()[t].format("%Y-%m-%d").to_string());
        for c in cols {
            out.push(',');
            out.push_str(&frame.require(c)?[t].to_string());
        }
        for name in SENTIMENT_COLUMNS {
            out.push(',');
            out.push_str(&frame.require(name)?[t].to_string());
        }
        out.push('\n');
    }
    Ok(out)
}

/// Environment whose first alpha is the realized next-step return and whose
/// remaining `n_noise` alphas are independent Gaussian noise. A competent
/// weighting policy should concentrate on the first column; the
/// equal-weighted baseline cannot.
pub fn planted_signal_env(
    n_rows: usize,
    n_noise: usize,
    seed: u64,
    env_config: EnvConfig,
) -> Result<TradingEnv> {
    let config = SyntheticConfig {
        n_rows,
        seed,
        ..SyntheticConfig::default()
    };
    let series = generate_series(&config);
    let mut frame = FeatureFrame::from_ohlcv(series);
    frame::add_risk_columns(&mut frame, &RiskConfig::default())?;
    let fr = frame.require(COL_FUTURE_RETURN)?.to_vec();

    let mut names = vec!["signal".to_string()];
    let mut columns = vec![fr];
    for k in 0..n_noise {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1000 + k as u64));
        let col: Vec<f64> = (0..n_rows).map(|_| rng.sample(StandardNormal)).collect();
        names.push(format!("noise_{k:02}"));
        columns.push(col);
    }
    let matrix = matrix::from_columns(names.clone(), columns, n_rows, n_rows)?;
    if !matrix.dropped.is_empty() {
        return Err(Error::Data(format!(
            "planted-signal columns degenerate: {:?}",
            matrix.dropped
        )));
    }
    TradingEnv::new(matrix.names, matrix.standardized, &frame, env_config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::{CsvSchema, COL_REGIME};

    #[test]
    fn series_is_coherent_and_seed_stable() {
        let cfg = SyntheticConfig {
            n_rows: 300,
            ..SyntheticConfig::default()
        };
        let a = generate_series(&cfg);
        let b = generate_series(&cfg);
        assert_eq!(a.close, b.close);
        a.validate(|i| format!("row {i}")).unwrap();
        let other = generate_series(&SyntheticConfig {
            seed: 8,
            ..cfg
        });
        assert_ne!(a.close, other.close);
    }

    #[test]
    fn dates_skip_weekends() {
        let days = trading_days(NaiveDate::from_ymd_opt(2020, 1, 3).unwrap(), 5);
        // Friday, then Monday through Thursday
        assert_eq!(days[0].weekday(), Weekday::Fri);
        assert_eq!(days[1].weekday(), Weekday::Mon);
        assert_eq!(days.len(), 5);
    }

    #[test]
    fn demo_csv_round_trips_through_the_loader() {
        let cfg = SyntheticConfig {
            n_rows: 120,
            ..SyntheticConfig::default()
        };
        let text = demo_csv(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("demo.csv");
        std::fs::write(&path, &text).unwrap();
        let frame = crate::frame::load_csv(&path, &CsvSchema::default()).unwrap();
        assert_eq!(frame.len(), 120);
        let direct = generate_frame(&cfg).unwrap();
        for name in SENTIMENT_COLUMNS {
            assert_eq!(frame.require(name).unwrap(), direct.require(name).unwrap());
        }
        assert_eq!(frame.require("C_t").unwrap(), direct.require("C_t").unwrap());
    }

    #[test]
    fn planted_env_signal_predicts_reward() {
        let env = planted_signal_env(400, 3, 5, EnvConfig::default()).unwrap();
        assert_eq!(env.n_actions(), 4);
        assert_eq!(env.alpha_names()[0], "signal");
        // one-hot weights on the signal column know the next return's sign,
        // so active steps are overwhelmingly on the right side of the move
        let mut env = env;
        let report = crate::env::run_backtest(&mut env, |_| vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(report.summary.mean_reward > 0.0);
        assert!(report.summary.cum_return > 0.0);
        let gross_wins = report
            .steps
            .iter()
            .filter(|s| s.reward + s.cost > 0.0)
            .count();
        let active = report.steps.iter().filter(|s| s.position != 0.0).count();
        assert!(active > 50, "dead zone swallowed the episode: {active}");
        assert!(gross_wins * 10 > active * 9, "{gross_wins} wins of {active}");
    }

    #[test]
    fn frame_has_every_corpus_input() {
        let cfg = SyntheticConfig {
            n_rows: 60,
            ..SyntheticConfig::default()
        };
        let frame = generate_frame(&cfg).unwrap();
        for name in SENTIMENT_COLUMNS {
            assert!(frame.has_column(name), "missing {name}");
        }
        assert!(!frame.has_column(COL_REGIME));
    }
}
