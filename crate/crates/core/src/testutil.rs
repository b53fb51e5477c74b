//! Fixtures shared by unit tests across modules.

use chrono::NaiveDate;

use crate::env::{EnvConfig, ThresholdMode};
use crate::frame::{
    FeatureFrame, OhlcvSeries, COL_CLOSE, COL_FUTURE_RETURN, COL_REGIME, COL_SIGMA_ANNUAL,
    COL_SIGMA_DAILY, COL_TAU_LOWER, COL_TAU_UPPER,
};

pub(crate) fn date(i: usize) -> NaiveDate {
    NaiveDate::from_ymd_opt(2020, 1, 1).unwrap() + chrono::Days::new(i as u64)
}

/// Small frame with hand-injected risk columns, bypassing rolling warm-ups:
/// constant regime and vol, fixed thresholds at +-0.5, a gently rising close.
pub(crate) fn toy_frame(n: usize, regime: f64) -> FeatureFrame {
    let dates: Vec<NaiveDate> = (0..n).map(date).collect();
    let series = OhlcvSeries {
        dates,
        open: vec![100.0; n],
        high: vec![101.0; n],
        low: vec![99.0; n],
        close: (0..n).map(|i| 100.0 + i as f64).collect(),
        volume: vec![1000.0; n],
    };
    let mut frame = FeatureFrame::from_ohlcv(series);
    let close = frame.require(COL_CLOSE).unwrap().to_vec();
    let fr = crate::frame::future_return(&close).unwrap();
    frame.set_column(COL_FUTURE_RETURN, fr).unwrap();
    frame.set_column(COL_REGIME, vec![regime; n]).unwrap();
    frame.set_column(COL_SIGMA_DAILY, vec![0.01; n]).unwrap();
    frame.set_column(COL_SIGMA_ANNUAL, vec![0.15; n]).unwrap();
    frame.set_column(COL_TAU_UPPER, vec![0.5; n]).unwrap();
    frame.set_column(COL_TAU_LOWER, vec![-0.5; n]).unwrap();
    frame
}

pub(crate) fn price_cfg() -> EnvConfig {
    EnvConfig {
        threshold_mode: ThresholdMode::PriceQuantile,
        ..EnvConfig::default()
    }
}

/// Bitwise slice equality, so NaN rows compare equal to themselves.
pub(crate) fn assert_bits_eq(a: &[f64], b: &[f64], label: &str) {
    assert_eq!(a.len(), b.len(), "{label}: length");
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        assert!(
            x.to_bits() == y.to_bits(),
            "{label} row {i}: {x} vs {y}"
        );
    }
}
