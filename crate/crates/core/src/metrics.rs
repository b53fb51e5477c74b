//! Predictiveness and performance metrics.
//!
//! Alpha-quality metrics (rank correlation against next-day returns, mutual
//! information with equal-frequency binning) operate on the rows where both
//! inputs are non-missing. Performance metrics (cumulative return, Sharpe,
//! max drawdown) operate on realized per-step returns and ledger values.
//! Undefined results (constant inputs, zero dispersion) are reported as
//! missing via `Option`, never coerced to 0.

use crate::error::{Error, Result};
use crate::frame::TRADING_DAYS_PER_YEAR;

/// Average ranks (1-based, ties share their mean rank).
pub(crate) fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // positions i..=j hold one tie group; ranks are 1-based
        let rank = (i + 1 + j + 1) as f64 / 2.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

fn joint_valid(x: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&a, &b) in x.iter().zip(y) {
        if !a.is_nan() && !b.is_nan() {
            xs.push(a);
            ys.push(b);
        }
    }
    (xs, ys)
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    if n < 3 {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for i in 0..n {
        let dx = x[i] - mx;
        let dy = y[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// Rank information coefficient: Spearman correlation (average ranks for
/// ties) between an alpha series and a return series over the jointly valid
/// rows. `None` when fewer than 3 such rows exist or either side is
/// constant on them.
pub fn information_coefficient(alpha: &[f64], returns: &[f64]) -> Result<Option<f64>> {
    if alpha.len() != returns.len() {
        return Err(Error::Invalid(format!(
            "ic input lengths differ: {} vs {}",
            alpha.len(),
            returns.len()
        )));
    }
    let (xs, ys) = joint_valid(alpha, returns);
    if xs.len() < 3 {
        return Ok(None);
    }
    let rx = average_ranks(&xs);
    let ry = average_ranks(&ys);
    Ok(pearson(&rx, &ry))
}

/// Mutual information in nats between two series, estimated by discretizing
/// each side independently into `bins` equal-frequency bins over the jointly
/// valid rows and plugging the joint histogram into
/// `sum p(x,y) * ln(p(x,y) / (p(x) p(y)))`, with `0 ln 0 = 0`.
///
/// Binning rule: sort the values (ties broken by row order, which keeps the
/// assignment deterministic); the item at sorted position `k` of `n` lands
/// in bin `floor(k * bins / n)`.
pub fn mutual_information(x: &[f64], y: &[f64], bins: usize) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Invalid(format!(
            "mi input lengths differ: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if bins < 2 {
        return Err(Error::Invalid(format!(
            "mi needs at least 2 bins, got {bins}"
        )));
    }
    let (xs, ys) = joint_valid(x, y);
    let n = xs.len();
    if n < bins {
        return Err(Error::Invalid(format!(
            "mi with {bins} bins needs at least {bins} valid rows, got {n}"
        )));
    }
    let bx = equal_frequency_bins(&xs, bins);
    let by = equal_frequency_bins(&ys, bins);

    let mut joint = vec![0usize; bins * bins];
    let mut px = vec![0usize; bins];
    let mut py = vec![0usize; bins];
    for i in 0..n {
        joint[bx[i] * bins + by[i]] += 1;
        px[bx[i]] += 1;
        py[by[i]] += 1;
    }
    let nf = n as f64;
    let mut mi = 0.0;
    for a in 0..bins {
        for b in 0..bins {
            let c = joint[a * bins + b];
            if c == 0 {
                continue;
            }
            let pxy = c as f64 / nf;
            let pa = px[a] as f64 / nf;
            let pb = py[b] as f64 / nf;
            mi += pxy * (pxy / (pa * pb)).ln();
        }
    }
    Ok(mi)
}

/// Equal-frequency bin index per element; see [`mutual_information`] for the
/// rule.
pub(crate) fn equal_frequency_bins(values: &[f64], bins: usize) -> Vec<usize> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        values[a]
            .partial_cmp(&values[b])
            .unwrap()
            .then(a.cmp(&b))
    });
    let mut assignment = vec![0usize; n];
    for (k, &idx) in order.iter().enumerate() {
        assignment[idx] = k * bins / n;
    }
    assignment
}

/// Compound growth: `prod(1 + r) - 1`. Errors if any return is at or below
/// -100% (the ledger value would hit zero or go negative).
pub fn cumulative_return(returns: &[f64]) -> Result<f64> {
    let mut acc = 1.0;
    for (i, &r) in returns.iter().enumerate() {
        if r.is_nan() {
            return Err(Error::NonFinite(format!(
                "cumulative return input is missing at step {i}"
            )));
        }
        if r <= -1.0 {
            return Err(Error::Invalid(format!(
                "return {r} at step {i} is at or below -100%"
            )));
        }
        acc *= 1.0 + r;
    }
    Ok(acc - 1.0)
}

/// Annualized Sharpe ratio: `mean(r - rf) / std(r - rf) * sqrt(periods)`
/// with the sample std (n-1). `rf` is the per-period risk-free rate, 0 by
/// convention here. `None` when the std is zero; fewer than 2 returns is an
/// error.
pub fn sharpe_ratio(returns: &[f64], periods_per_year: f64, risk_free: f64) -> Result<Option<f64>> {
    if returns.len() < 2 {
        return Err(Error::Invalid(format!(
            "sharpe ratio needs at least 2 returns, got {}",
            returns.len()
        )));
    }
    let excess: Vec<f64> = returns.iter().map(|r| r - risk_free).collect();
    if excess.iter().any(|v| v.is_nan()) {
        return Err(Error::NonFinite("sharpe ratio input has missing values".into()));
    }
    let n = excess.len() as f64;
    let mean = excess.iter().sum::<f64>() / n;
    let var = excess.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    let std = var.sqrt();
    if std == 0.0 {
        return Ok(None);
    }
    Ok(Some(mean / std * periods_per_year.sqrt()))
}

/// [`sharpe_ratio`] at the crate's trading-year convention with zero
/// risk-free rate.
pub fn sharpe_ratio_daily(returns: &[f64]) -> Result<Option<f64>> {
    sharpe_ratio(returns, TRADING_DAYS_PER_YEAR, 0.0)
}

/// Maximum drawdown of a positive ledger-value series: the most negative
/// `value / running_max - 1`, always in [-1, 0].
pub fn max_drawdown(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Invalid("max drawdown of an empty series".into()));
    }
    if values.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::Invalid(
            "max drawdown needs strictly positive ledger values".into(),
        ));
    }
    let mut peak = values[0];
    let mut worst = 0.0_f64;
    for &v in values {
        if v > peak {
            peak = v;
        }
        worst = worst.min(v / peak - 1.0);
    }
    Ok(worst)
}

/// Per-alpha metric row in an evaluation report.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct AlphaMetricsRow {
    pub name: String,
    /// Rank IC against next-day returns; missing when undefined.
    pub ic: Option<f64>,
    /// Mutual information with next-day returns, in nats.
    pub mi: f64,
    /// Total split-gain attributed to this alpha by the boosted model.
    pub gain_importance: f64,
    /// `gain_importance` normalized across alphas (0 when all gains are 0).
    pub gain_share: f64,
    /// Division-by-zero rows counted while evaluating the formula.
    pub div_by_zero: usize,
}

/// Evaluation report over the training split.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct MetricReport {
    pub rows: Vec<AlphaMetricsRow>,
    pub mi_bins: usize,
    pub n_train_rows: usize,
    /// Alphas dropped before scoring (with reasons).
    pub dropped: Vec<crate::matrix::DroppedColumn>,
}
