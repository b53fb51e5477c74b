//! Daily market data: CSV ingestion, the column-oriented feature frame, and
//! the derived risk columns the trading loop consumes.
//!
//! A [`FeatureFrame`] is a date axis plus named f64 columns. Missing values
//! are encoded as NaN; warm-up rows of every derived column are masked that
//! way rather than dropped, so row indices line up across all columns. The
//! column vocabulary is open: any column the CSV carries (sentiment scores,
//! peer polarity, index closes) rides along under its header name and is
//! addressable from alpha formulas.

use std::path::Path;

use chrono::NaiveDate;
use indexmap::IndexMap;

use crate::error::{Error, Result};
use crate::rolling;

/// Open price column.
pub const COL_OPEN: &str = "O_t";
/// High price column.
pub const COL_HIGH: &str = "High_t";
/// Low price column.
pub const COL_LOW: &str = "Low_t";
/// Close price column (short name used by most formulas).
pub const COL_CLOSE: &str = "C_t";
/// Close price under its long name; same values as [`COL_CLOSE`], present so
/// formulas may use either spelling.
pub const COL_CLOSE_LONG: &str = "Close_t";
/// Volume column.
pub const COL_VOLUME: &str = "V_t";

/// Next-day simple return, masked on the last row.
pub const COL_FUTURE_RETURN: &str = "future_return";
/// Fast trailing close mean used by the regime filter.
pub const COL_MA_FAST: &str = "ma20";
/// Slow trailing close mean used by the regime filter.
pub const COL_MA_SLOW: &str = "ma100";
/// 1.0 when the fast mean is strictly above the slow mean, else 0.0.
pub const COL_REGIME: &str = "regime";
/// Trailing sample std of `future_return`.
pub const COL_SIGMA_DAILY: &str = "sigma_daily";
/// `sigma_daily` scaled by the square root of the trading year.
pub const COL_SIGMA_ANNUAL: &str = "sigma_annual";
/// Trailing 0.75 close quantile (long entry threshold source).
pub const COL_TAU_UPPER: &str = "tau_upper";
/// Trailing 0.25 close quantile (short entry threshold source).
pub const COL_TAU_LOWER: &str = "tau_lower";

/// Trading days per year used for annualization throughout the crate.
pub const TRADING_DAYS_PER_YEAR: f64 = 252.0;

/// Validated daily OHLCV series, the required part of any input file.
#[derive(Debug, Clone)]
pub struct OhlcvSeries {
    pub dates: Vec<NaiveDate>,
    pub open: Vec<f64>,
    pub high: Vec<f64>,
    pub low: Vec<f64>,
    pub close: Vec<f64>,
    pub volume: Vec<f64>,
}

impl OhlcvSeries {
    /// Checks per-row coherence. `row_label(i)` supplies the identifier used
    /// in error messages (a file row number, or the index for synthetic data).
    pub fn validate(&self, row_label: impl Fn(usize) -> String) -> Result<()> {
        let n = self.dates.len();
        if self.open.len() != n
            || self.high.len() != n
            || self.low.len() != n
            || self.close.len() != n
            || self.volume.len() != n
        {
            return Err(Error::Invalid("ohlcv column lengths differ".into()));
        }
        for i in 0..n {
            let (o, h, l, c, v) = (
                self.open[i],
                self.high[i],
                self.low[i],
                self.close[i],
                self.volume[i],
            );
            if !(c > 0.0) || !(o > 0.0) || !(h > 0.0) || !(l > 0.0) {
                return Err(Error::Data(format!(
                    "non-positive price at {}",
                    row_label(i)
                )));
            }
            if !(v >= 0.0) {
                return Err(Error::Data(format!(
                    "negative volume at {}",
                    row_label(i)
                )));
            }
            if h < o.max(c) {
                return Err(Error::Data(format!(
                    "high below max(open, close) at {}",
                    row_label(i)
                )));
            }
            if l > o.min(c) {
                return Err(Error::Data(format!(
                    "low above min(open, close) at {}",
                    row_label(i)
                )));
            }
        }
        for i in 1..n {
            if self.dates[i] <= self.dates[i - 1] {
                return Err(Error::Data(format!(
                    "dates not strictly increasing at {}",
                    row_label(i)
                )));
            }
        }
        Ok(())
    }
}

/// Date-indexed frame of named f64 columns with NaN as the missing marker.
#[derive(Debug, Clone)]
pub struct FeatureFrame {
    dates: Vec<NaiveDate>,
    columns: IndexMap<String, Vec<f64>>,
}

impl FeatureFrame {
    pub fn new(dates: Vec<NaiveDate>) -> Self {
        FeatureFrame {
            dates,
            columns: IndexMap::new(),
        }
    }

    /// Builds a frame from a validated OHLCV series. The close is exposed
    /// under both its short and long column names.
    pub fn from_ohlcv(series: OhlcvSeries) -> Self {
        let mut frame = FeatureFrame::new(series.dates);
        frame.insert(COL_OPEN, series.open);
        frame.insert(COL_HIGH, series.high);
        frame.insert(COL_LOW, series.low);
        frame.insert(COL_CLOSE, series.close.clone());
        frame.insert(COL_CLOSE_LONG, series.close);
        frame.insert(COL_VOLUME, series.volume);
        frame
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    /// Adds a new column; the name must be unused.
    pub fn add_column(&mut self, name: &str, values: Vec<f64>) -> Result<()> {
        if values.len() != self.dates.len() {
            return Err(Error::Invalid(format!(
                "column `{name}` has {} rows, frame has {}",
                values.len(),
                self.dates.len()
            )));
        }
        if self.columns.contains_key(name) {
            return Err(Error::Schema(format!("duplicate column `{name}`")));
        }
        self.insert(name, values);
        Ok(())
    }

    /// Adds or replaces a column.
    pub fn set_column(&mut self, name: &str, values: Vec<f64>) -> Result<()> {
        if values.len() != self.dates.len() {
            return Err(Error::Invalid(format!(
                "column `{name}` has {} rows, frame has {}",
                values.len(),
                self.dates.len()
            )));
        }
        self.insert(name, values);
        Ok(())
    }

    fn insert(&mut self, name: &str, values: Vec<f64>) {
        self.columns.insert(name.to_string(), values);
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns.get(name).map(|v| v.as_slice())
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.columns.contains_key(name)
    }

    /// Like [`column`](Self::column) but with a schema error naming the
    /// missing column.
    pub fn require(&self, name: &str) -> Result<&[f64]> {
        self.column(name)
            .ok_or_else(|| Error::Schema(format!("required column `{name}` not present")))
    }

    /// Column names in insertion order.
    pub fn column_names(&self) -> impl Iterator<Item = &str> {
        self.columns.keys().map(|s| s.as_str())
    }

    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }

    /// Copies a contiguous row range into a new frame with the same columns.
    pub fn slice_rows(&self, start: usize, end: usize) -> FeatureFrame {
        assert!(start <= end && end <= self.len());
        let mut out = FeatureFrame::new(self.dates[start..end].to_vec());
        for (name, values) in &self.columns {
            out.insert(name, values[start..end].to_vec());
        }
        out
    }
}

/// Maps CSV header names (case-insensitive) to the six required roles.
#[derive(Debug, Clone)]
pub struct CsvSchema {
    pub date: String,
    pub open: String,
    pub high: String,
    pub low: String,
    pub close: String,
    pub volume: String,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema {
            date: "date".into(),
            open: "open".into(),
            high: "high".into(),
            low: "low".into(),
            close: "close".into(),
            volume: "volume".into(),
        }
    }
}

/// Loads a daily CSV into a frame. Required columns follow `schema`; every
/// other column passes through under its header name with empty cells masked.
/// Rows are sorted by date; duplicate dates and incoherent OHLCV rows are
/// rejected with the 1-based data row number in file order.
pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<FeatureFrame> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Csv {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;

    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Csv {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?
        .iter()
        .map(|h| h.to_string())
        .collect();

    let find = |role: &str, want: &str| -> Result<usize> {
        let mut found = None;
        for (i, h) in headers.iter().enumerate() {
            if h.eq_ignore_ascii_case(want) {
                if found.is_some() {
                    return Err(Error::Schema(format!(
                        "column `{want}` appears more than once in the header"
                    )));
                }
                found = Some(i);
            }
        }
        found.ok_or_else(|| Error::Schema(format!("missing required column `{want}` ({role})")))
    };
    let idx_date = find("date", &schema.date)?;
    let idx_open = find("open", &schema.open)?;
    let idx_high = find("high", &schema.high)?;
    let idx_low = find("low", &schema.low)?;
    let idx_close = find("close", &schema.close)?;
    let idx_volume = find("volume", &schema.volume)?;
    let required = [idx_date, idx_open, idx_high, idx_low, idx_close, idx_volume];

    let extra_indices: Vec<usize> = (0..headers.len())
        .filter(|i| !required.contains(i))
        .collect();
    {
        let mut seen: Vec<&str> = Vec::new();
        for &i in &extra_indices {
            if seen.iter().any(|s| s.eq_ignore_ascii_case(&headers[i])) {
                return Err(Error::Schema(format!(
                    "duplicate column `{}` in the header",
                    headers[i]
                )));
            }
            seen.push(&headers[i]);
        }
    }

    struct RawRow {
        date: NaiveDate,
        ohlcv: [f64; 5],
        extras: Vec<f64>,
        file_row: usize,
    }

    let mut rows: Vec<RawRow> = Vec::new();
    for (rec_idx, record) in reader.records().enumerate() {
        let file_row = rec_idx + 1;
        let record = record.map_err(|e| Error::Csv {
            path: path.to_path_buf(),
            msg: format!("row {file_row}: {e}"),
        })?;
        let get = |i: usize| -> Result<&str> {
            record
                .get(i)
                .ok_or_else(|| Error::Data(format!("row {file_row}: too few fields")))
        };
        let date_str = get(idx_date)?;
        let date = NaiveDate::parse_from_str(date_str, "%Y-%m-%d").map_err(|_| {
            Error::Data(format!(
                "row {file_row}: bad date `{date_str}` (expected YYYY-MM-DD)"
            ))
        })?;
        let mut ohlcv = [0.0; 5];
        for (slot, &col) in [idx_open, idx_high, idx_low, idx_close, idx_volume]
            .iter()
            .enumerate()
        {
            let cell = get(col)?;
            ohlcv[slot] = cell.parse::<f64>().map_err(|_| {
                Error::Data(format!(
                    "row {file_row}: bad number `{cell}` in column `{}`",
                    headers[col]
                ))
            })?;
        }
        let mut extras = Vec::with_capacity(extra_indices.len());
        for &col in &extra_indices {
            let cell = get(col)?;
            if cell.is_empty() || cell.eq_ignore_ascii_case("nan") {
                extras.push(f64::NAN);
            } else {
                extras.push(cell.parse::<f64>().map_err(|_| {
                    Error::Data(format!(
                        "row {file_row}: bad number `{cell}` in column `{}`",
                        headers[col]
                    ))
                })?);
            }
        }
        rows.push(RawRow {
            date,
            ohlcv,
            extras,
            file_row,
        });
    }

    if rows.is_empty() {
        return Err(Error::Data("file has no data rows".into()));
    }

    for i in 0..rows.len() {
        for j in (i + 1)..rows.len() {
            if rows[i].date == rows[j].date {
                return Err(Error::Data(format!(
                    "duplicate date {} at rows {} and {}",
                    rows[i].date, rows[i].file_row, rows[j].file_row
                )));
            }
        }
    }
    rows.sort_by_key(|r| r.date);

    let series = OhlcvSeries {
        dates: rows.iter().map(|r| r.date).collect(),
        open: rows.iter().map(|r| r.ohlcv[0]).collect(),
        high: rows.iter().map(|r| r.ohlcv[1]).collect(),
        low: rows.iter().map(|r| r.ohlcv[2]).collect(),
        close: rows.iter().map(|r| r.ohlcv[3]).collect(),
        volume: rows.iter().map(|r| r.ohlcv[4]).collect(),
    };
    series.validate(|i| format!("row {}", rows[i].file_row))?;

    let mut frame = FeatureFrame::from_ohlcv(series);
    for (slot, &col) in extra_indices.iter().enumerate() {
        let values: Vec<f64> = rows.iter().map(|r| r.extras[slot]).collect();
        frame.add_column(&headers[col], values)?;
    }
    Ok(frame)
}

/// Loads only the date and close columns of a daily CSV, for benchmark
/// series that lack full bars. Rows come back sorted by date; duplicate
/// dates and non-positive closes are rejected.
pub fn load_close_series(path: &Path) -> Result<Vec<(NaiveDate, f64)>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Csv {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Csv {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?
        .clone();
    let find = |want: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(want))
            .ok_or_else(|| Error::Schema(format!("missing required column `{want}`")))
    };
    let idx_date = find("date")?;
    let idx_close = find("close")?;

    let mut out: Vec<(NaiveDate, f64)> = Vec::new();
    for (rec_idx, record) in reader.records().enumerate() {
        let file_row = rec_idx + 1;
        let record = record.map_err(|e| Error::Csv {
            path: path.to_path_buf(),
            msg: format!("row {file_row}: {e}"),
        })?;
        let date_str = record
            .get(idx_date)
            .ok_or_else(|| Error::Data(format!("row {file_row}: too few fields")))?;
        let date = NaiveDate::parse_from_str(date_str, "%Y-%m-%d").map_err(|_| {
            Error::Data(format!(
                "row {file_row}: bad date `{date_str}` (expected YYYY-MM-DD)"
            ))
        })?;
        let cell = record
            .get(idx_close)
            .ok_or_else(|| Error::Data(format!("row {file_row}: too few fields")))?;
        let close: f64 = cell
            .parse()
            .map_err(|_| Error::Data(format!("row {file_row}: bad close `{cell}`")))?;
        if !(close > 0.0) {
            return Err(Error::Data(format!(
                "row {file_row}: close must be positive, got {close}"
            )));
        }
        out.push((date, close));
    }
    if out.is_empty() {
        return Err(Error::Data("file has no data rows".into()));
    }
    out.sort_by_key(|(d, _)| *d);
    for w in out.windows(2) {
        if w[0].0 == w[1].0 {
            return Err(Error::Data(format!("duplicate date {}", w[0].0)));
        }
    }
    Ok(out)
}

/// Next-day simple return: `(close[t+1] - close[t]) / close[t]`, NaN on the
/// last row. Closes must be strictly positive.
pub fn future_return(close: &[f64]) -> Result<Vec<f64>> {
    if close.iter().any(|&c| !(c > 0.0)) {
        return Err(Error::Data(
            "future return requires strictly positive closes".into(),
        ));
    }
    let n = close.len();
    let mut out = vec![f64::NAN; n];
    for t in 0..n.saturating_sub(1) {
        out[t] = (close[t + 1] - close[t]) / close[t];
    }
    Ok(out)
}

/// Window lengths for the derived risk columns.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct RiskConfig {
    pub ma_fast: usize,
    pub ma_slow: usize,
    pub vol_window: usize,
    pub quantile_window: usize,
}

impl Default for RiskConfig {
    fn default() -> Self {
        RiskConfig {
            ma_fast: 20,
            ma_slow: 100,
            vol_window: 63,
            quantile_window: 126,
        }
    }
}

impl RiskConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ma_fast < 1 || self.ma_slow < 1 || self.quantile_window < 1 {
            return Err(Error::Invalid("risk windows must be at least 1".into()));
        }
        if self.vol_window < 2 {
            return Err(Error::Invalid(
                "vol_window must be at least 2 for a sample std".into(),
            ));
        }
        if self.ma_fast >= self.ma_slow {
            return Err(Error::Invalid(
                "regime filter needs ma_fast < ma_slow".into(),
            ));
        }
        Ok(())
    }
}

/// Non-fatal conditions reported by [`add_risk_columns`].
#[derive(Debug, Clone, Default, serde::Serialize)]
pub struct RiskWarnings {
    /// Columns that came out fully masked because the frame is shorter than
    /// their window.
    pub all_masked: Vec<String>,
}

/// Computes `future_return` plus the regime / volatility / threshold columns
/// and attaches them to the frame. Every window trails, so no column at row
/// `t` depends on data after `t` except `future_return` itself (one row
/// ahead by definition). A frame shorter than a window yields that column
/// fully masked and a warning, not an error.
pub fn add_risk_columns(frame: &mut FeatureFrame, cfg: &RiskConfig) -> Result<RiskWarnings> {
    cfg.validate()?;
    let close = frame.require(COL_CLOSE)?.to_vec();
    let fr = future_return(&close)?;

    let ma_fast = rolling::rolling_mean(&close, cfg.ma_fast);
    let ma_slow = rolling::rolling_mean(&close, cfg.ma_slow);
    let regime: Vec<f64> = ma_fast
        .iter()
        .zip(&ma_slow)
        .map(|(&f, &s)| {
            if f.is_nan() || s.is_nan() {
                f64::NAN
            } else if f > s {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    let sigma_daily = rolling::rolling_std(&fr, cfg.vol_window);
    let sigma_annual: Vec<f64> = sigma_daily
        .iter()
        .map(|&s| s * TRADING_DAYS_PER_YEAR.sqrt())
        .collect();
    let tau_upper = rolling::rolling_quantile(&close, cfg.quantile_window, 0.75);
    let tau_lower = rolling::rolling_quantile(&close, cfg.quantile_window, 0.25);

    let mut warnings = RiskWarnings::default();
    for (name, values) in [
        (COL_FUTURE_RETURN, &fr),
        (COL_MA_FAST, &ma_fast),
        (COL_MA_SLOW, &ma_slow),
        (COL_REGIME, &regime),
        (COL_SIGMA_DAILY, &sigma_daily),
        (COL_SIGMA_ANNUAL, &sigma_annual),
        (COL_TAU_UPPER, &tau_upper),
        (COL_TAU_LOWER, &tau_lower),
    ] {
        if values.iter().all(|v| v.is_nan()) {
            warnings.all_masked.push(name.to_string());
        }
    }

    frame.set_column(COL_FUTURE_RETURN, fr)?;
    frame.set_column(COL_MA_FAST, ma_fast)?;
    frame.set_column(COL_MA_SLOW, ma_slow)?;
    frame.set_column(COL_REGIME, regime)?;
    frame.set_column(COL_SIGMA_DAILY, sigma_daily)?;
    frame.set_column(COL_SIGMA_ANNUAL, sigma_annual)?;
    frame.set_column(COL_TAU_UPPER, tau_upper)?;
    frame.set_column(COL_TAU_LOWER, tau_lower)?;
    Ok(warnings)
}

///// Chronological split boundary: `floor(train_fraction * rows)`. Rows before
/// the boundary are the training split.
pub fn split_index(n_rows: usize, train_fraction: f64) -> Result<usize> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Invalid(format!(
            "train_fraction must be in (0, 1), got {train_fraction}"
        )));
    }
    let boundary = (train_fraction * n_rows as f64).floor() as usize;
    if boundary == 0 || boundary >= n_rows {
        return Err(Error::Invalid(format!(
            "split of {n_rows} rows at fraction {train_fraction} leaves an empty side"
        )));
    }
    Ok(boundary)
}

/// Splits a frame into train and test row ranges at [`split_index`].
pub fn split_frame(frame: &FeatureFrame, train_fraction: f64) -> Result<(FeatureFrame, FeatureFrame)> {
    let boundary = split_index(frame.len(), train_fraction)?;
    Ok((
        frame.slice_rows(0, boundary),
        frame.slice_rows(boundary, frame.len()),
    ))
}
