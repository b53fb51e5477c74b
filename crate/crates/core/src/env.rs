//! Single-asset trading environment driven by weighted alpha signals.
//!
//! Each step normalizes the agent's raw weight vector, forms the composite
//! signal over standardized alphas, sizes a position through the threshold /
//! regime / volatility-scaling cascade, charges a proportional transaction
//! cost on the position change, and compounds the portfolio. The same loop
//! serves PPO training, stochastic evaluation, and the equal-weighted
//! baseline, so comparisons differ only in where the weights come from.

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::frame::{
    FeatureFrame, COL_CLOSE, COL_FUTURE_RETURN, COL_HIGH, COL_LOW, COL_OPEN, COL_REGIME,
    COL_SIGMA_ANNUAL, COL_SIGMA_DAILY, COL_TAU_LOWER, COL_TAU_UPPER, COL_VOLUME,
};
use crate::metrics;
use crate::rolling;

pub const OBS_DIM: usize = 8;

/// Observation layout: O, H, L, C, V, previous position, regime, daily vol.
pub type Observation = [f64; OBS_DIM];

pub const WEIGHT_NORM_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    /// Entry thresholds are the rolling close-price quantile columns. The
    /// composite is on a standardized scale, so against a high-priced asset
    /// this mode rarely trades; it exists for faithfulness, not preference.
    PriceQuantile,
    /// Entry thresholds are rolling 0.75/0.25 quantiles of the composite
    /// signal itself, over at most `quantile_window` realized values
    /// (expanding until the window fills, current value included).
    AlphaQuantile,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    pub sigma_target: f64,
    pub lambda_cost: f64,
    pub v_max: f64,
    pub quantile_window: usize,
    pub vol_window: usize,
    pub threshold_mode: ThresholdMode,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            sigma_target: 0.15,
            lambda_cost: 0.001,
            v_max: 2.0,
            quantile_window: 126,
            vol_window: 63,
            threshold_mode: ThresholdMode::AlphaQuantile,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_target > 0.0) {
            return Err(Error::Invalid("sigma_target must be positive".into()));
        }
        if !(self.lambda_cost >= 0.0) {
            return Err(Error::Invalid("lambda_cost must be non-negative".into()));
        }
        if !(self.v_max >= 1.0) {
            return Err(Error::Invalid("v_max must be at least 1".into()));
        }
        if self.quantile_window < 1 {
            return Err(Error::Invalid("quantile_window must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct WeightVector {
    pub raw: Vec<f64>,
    pub clipped: Vec<f64>,
    pub normalized: Vec<f64>,
}

/// Clamps each weight to [-1, 1], then scales by the L1 norm plus a small
/// epsilon. The epsilon keeps the all-zero vector at zero and bounds the
/// resulting L1 norm at (slightly under) one.
pub fn normalize_weights(raw: &[f64]) -> Result<WeightVector> {
    if raw.is_empty() {
        return Err(Error::Invalid("weight vector is empty".into()));
    }
    if let Some(bad) = raw.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("raw weight {bad} is not finite")));
    }
    let clipped: Vec<f64> = raw.iter().map(|v| v.clamp(-1.0, 1.0)).collect();
    let l1: f64 = clipped.iter().map(|v| v.abs()).sum();
    let denom = l1 + WEIGHT_NORM_EPSILON;
    let normalized = clipped.iter().map(|v| v / denom).collect();
    Ok(WeightVector {
        raw: raw.to_vec(),
        clipped,
        normalized,
    })
}

/// Weighted sum of the standardized alpha values at one row.
pub fn composite_alpha(weights: &WeightVector, alphas_at_t: &[f64]) -> Result<f64> {
    if weights.normalized.len() != alphas_at_t.len() {
        return Err(Error::Invalid(format!(
            "{} weights against {} alphas",
            weights.normalized.len(),
            alphas_at_t.len()
        )));
    }
    Ok(weights
        .normalized
        .iter()
        .zip(alphas_at_t)
        .map(|(w, a)| w * a)
        .sum())
}

/// Position sizing cascade: piecewise-linear entry outside the [tau_lower,
/// tau_upper] band clamped to [-1, 1], long positions zeroed in a bear
/// regime (shorts pass), then volatility scaling by min(v_max,
/// sigma_target / sigma_annual). Flat realized vol maps to v_max.
pub fn size_position(
    composite: f64,
    tau_upper: f64,
    tau_lower: f64,
    regime: f64,
    sigma_annual: f64,
    config: &EnvConfig,
) -> f64 {
    let base = if composite > tau_upper {
        (2.0 * (composite - tau_upper)).min(1.0)
    } else if composite < tau_lower {
        (2.0 * (composite - tau_lower)).max(-1.0)
    } else {
        0.0
    };
    let base = if regime == 0.0 && base > 0.0 { 0.0 } else { base };
    let v = if sigma_annual > 0.0 {
        (config.sigma_target / sigma_annual).min(config.v_max)
    } else {
        config.v_max
    };
    base * v
}

#[derive(Debug, Clone, Copy)]
pub struct StepResult {
    pub position: f64,
    pub reward: f64,
    pub cost: f64,
    pub portfolio_value: f64,
    pub drawdown: f64,
    pub composite_alpha: f64,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct LedgerRow {
    pub date: NaiveDate,
    pub position: f64,
    pub composite: f64,
    pub reward: f64,
    pub cost: f64,
    pub value: f64,
    pub drawdown: f64,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct BacktestSummary {
    pub cum_return: f64,
    pub sharpe: Option<f64>,
    pub max_drawdown: f64,
    pub mean_reward: f64,
    pub final_value: f64,
    pub n_steps: usize,
    pub config: EnvConfig,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct BacktestReport {
    pub summary: BacktestSummary,
    pub steps: Vec<LedgerRow>,
}

/// The environment owns copies of every column it reads, so a frame or
/// matrix can be dropped once the env is built. Rows outside the active
/// window are carried but never stepped on; the window must only cover rows
/// where every required value is present.
#[derive(Clone)]
pub struct TradingEnv {
    pub config: EnvConfig,
    names: Vec<String>,
    alphas: Vec<Vec<f64>>,
    dates: Vec<NaiveDate>,
    open: Vec<f64>,
    high: Vec<f64>,
    low: Vec<f64>,
    close: Vec<f64>,
    volume: Vec<f64>,
    regime: Vec<f64>,
    sigma_daily: Vec<f64>,
    sigma_annual: Vec<f64>,
    future_return: Vec<f64>,
    tau_upper: Option<Vec<f64>>,
    tau_lower: Option<Vec<f64>>,
    start: usize,
    end: usize,
    t: usize,
    prev_position: f64,
    value: f64,
    peak: f64,
    composite_history: Vec<f64>,
}

impl TradingEnv {
    /// Builds the environment from standardized alpha columns and a frame
    /// carrying the risk columns. The default window spans the longest run
    /// of rows where everything needed for a step is present.
    pub fn new(
        names: Vec<String>,
        alphas: Vec<Vec<f64>>,
        frame: &FeatureFrame,
        config: EnvConfig,
    ) -> Result<TradingEnv> {
        config.validate()?;
        if names.len() != alphas.len() || names.is_empty() {
            return Err(Error::Invalid(format!(
                "{} alpha names against {} columns",
                names.len(),
                alphas.len()
            )));
        }
        let n = frame.len();
        for (name, col) in names.iter().zip(&alphas) {
            if col.len() != n {
                return Err(Error::Invalid(format!(
                    "alpha {name} has {} rows, frame has {n}",
                    col.len()
                )));
            }
        }
        let need = |col: &str| frame.require(col).map(|c| c.to_vec());
        let tau_upper = match config.threshold_mode {
            ThresholdMode::PriceQuantile => Some(need(COL_TAU_UPPER)?),
            ThresholdMode::AlphaQuantile => frame.column(COL_TAU_UPPER).map(|c| c.to_vec()),
        };
        let tau_lower = match config.threshold_mode {
            ThresholdMode::PriceQuantile => Some(need(COL_TAU_LOWER)?),
            ThresholdMode::AlphaQuantile => frame.column(COL_TAU_LOWER).map(|c| c.to_vec()),
        };
        let mut env = TradingEnv {
            config,
            names,
            alphas,
            dates: frame.dates().to_vec(),
            open: need(COL_OPEN)?,
            high: need(COL_HIGH)?,
            low: need(COL_LOW)?,
            close: need(COL_CLOSE)?,
            volume: need(COL_VOLUME)?,
            regime: need(COL_REGIME)?,
            sigma_daily: need(COL_SIGMA_DAILY)?,
            sigma_annual: need(COL_SIGMA_ANNUAL)?,
            future_return: need(COL_FUTURE_RETURN)?,
            tau_upper,
            tau_lower,
            start: 0,
            end: 0,
            t: 0,
            prev_position: 0.0,
            value: 1.0,
            peak: 1.0,
            composite_history: Vec::new(),
        };
        let (start, end) = env
            .longest_valid_run()
            .ok_or_else(|| Error::Data("no tradable rows after warm-up masking".into()))?;
        env.start = start;
        env.end = end;
        env.reset();
        Ok(env)
    }

    fn row_valid(&self, t: usize) -> bool {
        let finite = |v: f64| v.is_finite();
        if !(finite(self.open[t])
            && finite(self.high[t])
            && finite(self.low[t])
            && finite(self.close[t])
            && finite(self.volume[t])
            && finite(self.regime[t])
            && finite(self.sigma_daily[t])
            && finite(self.sigma_annual[t])
            && finite(self.future_return[t]))
        {
            return false;
        }
        if self.config.threshold_mode == ThresholdMode::PriceQuantile {
            let up = self.tau_upper.as_ref().unwrap()[t];
            let lo = self.tau_lower.as_ref().unwrap()[t];
            if !(finite(up) && finite(lo)) {
                return false;
            }
        }
        self.alphas.iter().all(|col| finite(col[t]))
    }

    fn longest_valid_run(&self) -> Option<(usize, usize)> {
        let n = self.dates.len();
        let mut best: Option<(usize, usize)> = None;
        let mut run_start = None;
        for t in 0..=n {
            // last row is never steppable (future return undefined there)
            let valid = t + 1 < n && self.row_valid(t);
            match (valid, run_start) {
                (true, None) => run_start = Some(t),
                (false, Some(s)) => {
                    if best.map_or(true, |(bs, be)| t - s > be - bs) {
                        best = Some((s, t));
                    }
                    run_start = None;
                }
                _ => {}
            }
        }
        best
    }

    pub fn n_actions(&self) -> usize {
        self.names.len()
    }

    pub fn alpha_names(&self) -> &[String] {
        &self.names
    }

    pub fn n_rows(&self) -> usize {
        self.dates.len()
    }

    pub fn window(&self) -> (usize, usize) {
        (self.start, self.end)
    }

    pub fn episode_len(&self) -> usize {
        self.end - self.start
    }

    pub fn date_at(&self, t: usize) -> NaiveDate {
        self.dates[t]
    }

    /// Restricts stepping to rows [start, end); row `end` must still exist
    /// because it provides the terminal observation. Resets the episode.
    pub fn set_window(&mut self, start: usize, end: usize) -> Result<()> {
        if start >= end || end >= self.dates.len() {
            return Err(Error::Invalid(format!(
                "window [{start}, {end}) is empty or leaves no terminal row in {} rows",
                self.dates.len()
            )));
        }
        for t in start..end {
            if !self.row_valid(t) {
                return Err(Error::Data(format!(
                    "window [{start}, {end}) covers row {t} with missing values"
                )));
            }
        }
        self.start = start;
        self.end = end;
        self.reset();
        Ok(())
    }

    /// Rewinds to the window start with a flat position and unit portfolio.
    pub fn reset(&mut self) -> Observation {
        self.t = self.start;
        self.prev_position = 0.0;
        self.value = 1.0;
        self.peak = 1.0;
        self.composite_history.clear();
        self.observe()
    }

    /// Observation for the current row; valid until one past the last step.
    pub fn observe(&self) -> Observation {
        let t = self.t.min(self.end);
        [
            self.open[t],
            self.high[t],
            self.low[t],
            self.close[t],
            self.volume[t],
            self.prev_position,
            self.regime[t],
            self.sigma_daily[t],
        ]
    }

    pub fn is_done(&self) -> bool {
        self.t >= self.end
    }

    /// Observations across the window with the previous position pinned to
    /// zero. Normalization statistics are frozen from these before training,
    /// since realized positions depend on the policy being trained.
    pub fn baseline_observations(&self) -> Vec<Observation> {
        (self.start..self.end)
            .map(|t| {
                [
                    self.open[t],
                    self.high[t],
                    self.low[t],
                    self.close[t],
                    self.volume[t],
                    0.0,
                    self.regime[t],
                    self.sigma_daily[t],
                ]
            })
            .collect()
    }

    fn require_at(&self, column: &str, value: f64, t: usize) -> Result<f64> {
        if value.is_finite() {
            Ok(value)
        } else {
            Err(Error::MissingValue {
                column: column.to_string(),
                row: t,
            })
        }
    }

    fn thresholds(&mut self, composite: f64, t: usize) -> Result<(f64, f64)> {
        match self.config.threshold_mode {
            ThresholdMode::PriceQuantile => {
                let up = self.tau_upper.as_ref().unwrap()[t];
                let lo = self.tau_lower.as_ref().unwrap()[t];
                Ok((
                    self.require_at(COL_TAU_UPPER, up, t)?,
                    self.require_at(COL_TAU_LOWER, lo, t)?,
                ))
            }
            ThresholdMode::AlphaQuantile => {
                self.composite_history.push(composite);
                let len = self.composite_history.len();
                let from = len.saturating_sub(self.config.quantile_window);
                let mut window = self.composite_history[from..].to_vec();
                window.sort_by(|a, b| a.partial_cmp(b).unwrap());
                Ok((
                    rolling::quantile_sorted(&window, 0.75),
                    rolling::quantile_sorted(&window, 0.25),
                ))
            }
        }
    }

    /// Advances one row: normalize -> composite -> size -> cost -> reward ->
    /// portfolio accounting. Returns the step ledger entry and whether the
    /// episode has ended.
    pub fn step(&mut self, raw_weights: &[f64]) -> Result<(StepResult, bool)> {
        if self.is_done() {
            return Err(Error::Invalid(
                "step called on a finished episode; call reset first".into(),
            ));
        }
        let t = self.t;
        let weights = normalize_weights(raw_weights)?;
        if weights.normalized.len() != self.names.len() {
            return Err(Error::Invalid(format!(
                "{} weights for {} alphas",
                weights.normalized.len(),
                self.names.len()
            )));
        }
        let mut at_t = Vec::with_capacity(self.alphas.len());
        for (name, col) in self.names.iter().zip(&self.alphas) {
            at_t.push(self.require_at(name, col[t], t)?);
        }
        let composite = composite_alpha(&weights, &at_t)?;
        let (tau_up, tau_lo) = self.thresholds(composite, t)?;
        let regime = self.require_at(COL_REGIME, self.regime[t], t)?;
        let sigma_annual = self.require_at(COL_SIGMA_ANNUAL, self.sigma_annual[t], t)?;
        let position = size_position(composite, tau_up, tau_lo, regime, sigma_annual, &self.config);
        let cost = self.config.lambda_cost * (position - self.prev_position).abs();
        let fr = self.require_at(COL_FUTURE_RETURN, self.future_return[t], t)?;
        let reward = position * fr - cost;
        self.value *= 1.0 + reward;
        if !(self.value > 0.0) {
            return Err(Error::NonFinite(format!(
                "portfolio value {} at row {t} (reward {reward})",
                self.value
            )));
        }
        self.peak = self.peak.max(self.value);
        let drawdown = self.value / self.peak - 1.0;
        self.prev_position = position;
        self.t += 1;
        let result = StepResult {
            position,
            reward,
            cost,
            portfolio_value: self.value,
            drawdown,
            composite_alpha: composite,
        };
        Ok((result, self.is_done()))
    }
}

/// Runs one full episode with weights supplied per observation and collects
/// the ledger plus summary statistics.
pub fn run_backtest(
    env: &mut TradingEnv,
    mut policy: impl FnMut(&Observation) -> Vec<f64>,
) -> Result<BacktestReport> {
    env.reset();
    let mut steps = Vec::with_capacity(env.episode_len());
    let mut rewards = Vec::with_capacity(env.episode_len());
    loop {
        let t = env.t;
        let obs = env.observe();
        let raw = policy(&obs);
        let (res, done) = env.step(&raw)?;
        steps.push(LedgerRow {
            date: env.date_at(t),
            position: res.position,
            composite: res.composite_alpha,
            reward: res.reward,
            cost: res.cost,
            value: res.portfolio_value,
            drawdown: res.drawdown,
        });
        rewards.push(res.reward);
        if done {
            break;
        }
    }
    let cum_return = metrics::cumulative_return(&rewards)?;
    let sharpe = if rewards.len() >= 2 {
        metrics::sharpe_ratio_daily(&rewards)?
    } else {
        None
    };
    let max_drawdown = steps.iter().map(|s| s.drawdown).fold(0.0, f64::min);
    let mean_reward = rewards.iter().sum::<f64>() / rewards.len() as f64;
    let final_value = steps.last().map(|s| s.value).unwrap_or(1.0);
    Ok(BacktestReport {
        summary: BacktestSummary {
            cum_return,
            sharpe,
            max_drawdown,
            mean_reward,
            final_value,
            n_steps: steps.len(),
            config: env.config,
        },
        steps,
    })
}

/// Baseline: every alpha gets the same weight at every step, no learning.
pub fn run_equal_weighted(env: &mut TradingEnv) -> Result<BacktestReport> {
    let n = env.n_actions();
    let uniform = vec![1.0 / n as f64; n];
    run_backtest(env, |_| uniform.clone())
}
