//! Trailing-window primitives shared by the feature frame and the indicator
//! set.
//!
//! All windows are row counts over trading days and end at the current row
//! inclusive, so row `t` sees rows `t+1-w ..= t` and nothing later. Outputs
//! are NaN until the window fills, and any NaN inside a window yields NaN for
//! that row. Each window is computed directly rather than incrementally; the
//! series involved are small enough that the simpler arithmetic (which test
//! oracles can reproduce exactly) wins over a running-state update.

/// Mean over each trailing window of `window` rows.
pub(crate) fn rolling_mean(values: &[f64], window: usize) -> Vec<f64> {
    debug_assert!(window >= 1);
    let mut out = vec![f64::NAN; values.len()];
    for t in (window - 1)..values.len() {
        out[t] = mean(&values[t + 1 - window..=t]);
    }
    out
}

/// Sample standard deviation (n-1 denominator) over each trailing window.
/// `window` must be at least 2.
pub(crate) fn rolling_std(values: &[f64], window: usize) -> Vec<f64> {
    debug_assert!(window >= 2);
    let mut out = vec![f64::NAN; values.len()];
    for t in (window - 1)..values.len() {
        out[t] = sample_std(&values[t + 1 - window..=t]);
    }
    out
}

/// Linear-interpolation quantile over each trailing window.
pub(crate) fn rolling_quantile(values: &[f64], window: usize, q: f64) -> Vec<f64> {
    debug_assert!(window >= 1);
    debug_assert!((0.0..=1.0).contains(&q));
    let mut out = vec![f64::NAN; values.len()];
    let mut buf = vec![0.0; window];
    for t in (window - 1)..values.len() {
        let w = &values[t + 1 - window..=t];
        if w.iter().any(|v| v.is_nan()) {
            continue;
        }
        buf.copy_from_slice(w);
        buf.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
        out[t] = quantile_sorted(&buf, q);
    }
    out
}

/// Quantile of an ascending-sorted slice, linear interpolation between order
/// statistics: rank position `q * (n - 1)` split into floor/ceil neighbours.
pub(crate) fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

/// Plain mean; NaN for empty input, NaN-propagating.
pub(crate) fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n-1); NaN for fewer than two values.
pub(crate) fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (xs.len() - 1) as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_masks_warmup() {
        let out = rolling_mean(&[1.0, 2.0, 3.0, 4.0], 3);
        assert!(out[0].is_nan() && out[1].is_nan());
        assert_eq!(out[2], 2.0);
        assert_eq!(out[3], 3.0);
    }

    #[test]
    fn std_matches_hand_value() {
        let out = rolling_std(&[1.0, 2.0, 3.0], 3);
        assert_eq!(out[2], 1.0);
    }

    #[test]
    fn nan_inside_window_propagates() {
        let out = rolling_mean(&[1.0, f64::NAN, 3.0, 4.0, 5.0], 2);
        assert!(out[1].is_nan() && out[2].is_nan());
        assert_eq!(out[3], 3.5);
    }

    #[test]
    fn quantile_interpolates() {
        // position 0.75 * 3 = 2.25 between the 3rd and 4th order statistics
        assert_eq!(quantile_sorted(&[1.0, 2.0, 3.0, 4.0], 0.75), 3.25);
        assert_eq!(quantile_sorted(&[1.0, 2.0, 3.0, 4.0], 0.25), 1.75);
        assert_eq!(quantile_sorted(&[5.0], 0.75), 5.0);
    }

    #[test]
    fn quantile_of_window() {
        let out = rolling_quantile(&[3.0, 1.0, 2.0, 4.0], 3, 0.5);
        assert!(out[0].is_nan() && out[1].is_nan());
        assert_eq!(out[2], 2.0);
        assert_eq!(out[3], 2.0);
    }
}
