//! Technical indicators over daily closes and volume.
//!
//! Everything here is trailing-only: the value at row `t` uses rows up to `t`
//! and earlier, never later. Warm-up rows are NaN. Conventions that differ
//! between textbook variants are pinned as follows:
//!
//! * EMA uses `alpha = 2 / (window + 1)` seeded with the SMA of the first
//!   `window` values.
//! * Momentum is a price difference, `close[t] - close[t - window]`.
//! * RSI uses Wilder smoothing; an all-loss window reads 0, an all-gain
//!   window reads 100, and a perfectly flat window reads 50.
//! * MACD is `ema(fast) - ema(slow)` with the signal line computed by the
//!   same EMA routine applied to the MACD series.
//! * Bollinger bands are the window SMA plus/minus `k` sample standard
//!   deviations (n-1 denominator).
//! * OBV starts at 0 and a flat close contributes nothing (`sign(0) = 0`).

use crate::error::{Error, Result};
use crate::frame::{FeatureFrame, COL_CLOSE, COL_VOLUME};
use crate::rolling;

/// Column names produced by [`add_standard_indicators`], in output order.
pub const STANDARD_INDICATOR_COLUMNS: [&str; 11] = [
    "SMA_5",
    "SMA_20",
    "EMA_10",
    "Momentum_3",
    "Momentum_10",
    "RSI_14",
    "MACD",
    "MACD_Signal",
    "BB_Upper",
    "BB_Lower",
    "OBV",
];

fn check_window(window: usize, what: &str) -> Result<()> {
    if window < 1 {
        return Err(Error::Invalid(format!("{what} window must be at least 1")));
    }
    Ok(())
}

/// Simple moving average; NaN for the first `window - 1` rows.
pub fn sma(values: &[f64], window: usize) -> Result<Vec<f64>> {
    check_window(window, "sma")?;
    if window > values.len() {
        return Ok(vec![f64::NAN; values.len()]);
    }
    Ok(rolling::rolling_mean(values, window))
}

/// Exponential moving average, `alpha = 2 / (window + 1)`, seeded with the
/// SMA of the first `window` valid values. Leading NaNs are skipped so the
/// routine can smooth derived series (the MACD signal line); a NaN after the
/// seed masks the rest of the output.
pub fn ema(values: &[f64], window: usize) -> Result<Vec<f64>> {
    check_window(window, "ema")?;
    let mut out = vec![f64::NAN; values.len()];
    let first_valid = match values.iter().position(|v| !v.is_nan()) {
        Some(i) => i,
        None => return Ok(out),
    };
    let seed_at = first_valid + window - 1;
    if seed_at >= values.len() {
        return Ok(out);
    }
    let seed_window = &values[first_valid..=seed_at];
    if seed_window.iter().any(|v| v.is_nan()) {
        return Ok(out);
    }
    let alpha = 2.0 / (window as f64 + 1.0);
    let mut prev = rolling::mean(seed_window);
    out[seed_at] = prev;
    for t in (seed_at + 1)..values.len() {
        if values[t].is_nan() {
            break;
        }
        prev = alpha * values[t] + (1.0 - alpha) * prev;
        out[t] = prev;
    }
    Ok(out)
}

/// Price-difference momentum: `values[t] - values[t - window]`.
pub fn momentum(values: &[f64], window: usize) -> Result<Vec<f64>> {
    check_window(window, "momentum")?;
    let mut out = vec![f64::NAN; values.len()];
    for t in window..values.len() {
        out[t] = values[t] - values[t - window];
    }
    Ok(out)
}

/// Relative strength index with Wilder smoothing, bounded in [0, 100].
/// First defined at row `window` (one change per row, `window` changes).
pub fn rsi(values: &[f64], window: usize) -> Result<Vec<f64>> {
    check_window(window, "rsi")?;
    let n = values.len();
    let mut out = vec![f64::NAN; n];
    if n < window + 1 {
        return Ok(out);
    }
    let mut gains = vec![0.0; n];
    let mut losses = vec![0.0; n];
    for t in 1..n {
        let d = values[t] - values[t - 1];
        gains[t] = d.max(0.0);
        losses[t] = (-d).max(0.0);
    }
    let mut avg_gain = rolling::mean(&gains[1..=window]);
    let mut avg_loss = rolling::mean(&losses[1..=window]);
    out[window] = rsi_value(avg_gain, avg_loss);
    for t in (window + 1)..n {
        let w = window as f64;
        avg_gain = (avg_gain * (w - 1.0) + gains[t]) / w;
        avg_loss = (avg_loss * (w - 1.0) + losses[t]) / w;
        out[t] = rsi_value(avg_gain, avg_loss);
    }
    Ok(out)
}

fn rsi_value(avg_gain: f64, avg_loss: f64) -> f64 {
    if avg_loss == 0.0 {
        // flat window is neutral, pure gains saturate
        if avg_gain == 0.0 {
            50.0
        } else {
            100.0
        }
    } else {
        100.0 - 100.0 / (1.0 + avg_gain / avg_loss)
    }
}

/// MACD line and signal line.
#[derive(Debug, Clone)]
pub struct Macd {
    pub macd: Vec<f64>,
    pub signal: Vec<f64>,
}

/// `ema(values, fast) - ema(values, slow)` with the signal line smoothing the
/// MACD series through the same EMA code path.
pub fn macd(values: &[f64], fast: usize, slow: usize, signal: usize) -> Result<Macd> {
    check_window(fast, "macd fast")?;
    check_window(slow, "macd slow")?;
    check_window(signal, "macd signal")?;
    if fast >= slow {
        return Err(Error::Invalid(format!(
            "macd needs fast < slow, got {fast} >= {slow}"
        )));
    }
    let ema_fast = ema(values, fast)?;
    let ema_slow = ema(values, slow)?;
    let line: Vec<f64> = ema_fast
        .iter()
        .zip(&ema_slow)
        .map(|(&f, &s)| f - s)
        .collect();
    let signal_line = ema(&line, signal)?;
    Ok(Macd {
        macd: line,
        signal: signal_line,
    })
}

/// Bollinger bands around the window SMA.
#[derive(Debug, Clone)]
pub struct Bollinger {
    pub upper: Vec<f64>,
    pub lower: Vec<f64>,
}

/// `sma(window) +/- k * sample_std(window)`. `window` must be at least 2.
pub fn bollinger(values: &[f64], window: usize, k: f64) -> Result<Bollinger> {
    if window < 2 {
        return Err(Error::Invalid(
            "bollinger window must be at least 2".into(),
        ));
    }
    if !k.is_finite() || k < 0.0 {
        return Err(Error::Invalid(format!(
            "bollinger band width must be a non-negative finite number, got {k}"
        )));
    }
    if window > values.len() {
        let nan = vec![f64::NAN; values.len()];
        return Ok(Bollinger {
            upper: nan.clone(),
            lower: nan,
        });
    }
    let mid = rolling::rolling_mean(values, window);
    let sd = rolling::rolling_std(values, window);
    let upper = mid.iter().zip(&sd).map(|(&m, &s)| m + k * s).collect();
    let lower = mid.iter().zip(&sd).map(|(&m, &s)| m - k * s).collect();
    Ok(Bollinger { upper, lower })
}

/// On-balance volume: starts at 0, adds signed volume on close changes.
pub fn obv(close: &[f64], volume: &[f64]) -> Result<Vec<f64>> {
    if close.len() != volume.len() {
        return Err(Error::Invalid(format!(
            "obv input lengths differ: {} closes, {} volumes",
            close.len(),
            volume.len()
        )));
    }
    let mut out = vec![f64::NAN; close.len()];
    if close.is_empty() {
        return Ok(out);
    }
    out[0] = 0.0;
    for t in 1..close.len() {
        let d = close[t] - close[t - 1];
        let sign = if d > 0.0 {
            1.0
        } else if d < 0.0 {
            -1.0
        } else {
            0.0
        };
        out[t] = out[t - 1] + volume[t] * sign;
    }
    Ok(out)
}

/// Computes the standard indicator set over the frame's close and volume and
/// attaches the columns under the names in [`STANDARD_INDICATOR_COLUMNS`].
pub fn add_standard_indicators(frame: &mut FeatureFrame) -> Result<()> {
    let close = frame.require(COL_CLOSE)?.to_vec();
    let volume = frame.require(COL_VOLUME)?.to_vec();

    frame.set_column("SMA_5", sma(&close, 5)?)?;
    frame.set_column("SMA_20", sma(&close, 20)?)?;
    frame.set_column("EMA_10", ema(&close, 10)?)?;
    frame.set_column("Momentum_3", momentum(&close, 3)?)?;
    frame.set_column("Momentum_10", momentum(&close, 10)?)?;
    frame.set_column("RSI_14", rsi(&close, 14)?)?;
    let m = macd(&close, 12, 26, 9)?;
    frame.set_column("MACD", m.macd)?;
    frame.set_column("MACD_Signal", m.signal)?;
    let bb = bollinger(&close, 20, 2.0)?;
    frame.set_column("BB_Upper", bb.upper)?;
    frame.set_column("BB_Lower", bb.lower)?;
    frame.set_column("OBV", obv(&close, &volume)?)?;
    Ok(())
}
