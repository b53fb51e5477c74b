//! The alpha matrix: every formula evaluated over every row, plus the
//! standardized view the weighting layer consumes.
//!
//! Standardization is fit on training rows only (mean and sample std over
//! that column's non-missing training values) and applied to all rows, so
//! nothing after the split boundary can move a training-side value. Columns
//! whose training values are constant or too sparse to fit are dropped and
//! reported rather than silently zeroed.

use crate::dsl::{AlphaDef, EvalDiagnostics};
use crate::error::{Error, Result};
use crate::frame::FeatureFrame;
use crate::par;

/// A column removed from the matrix, with the reason.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct DroppedColumn {
    pub name: String,
    pub reason: String,
}

/// Evaluated alphas in column-major layout (`raw[i][t]` is alpha `i` at row
/// `t`), with standardization statistics fit on rows before `boundary`.
#[derive(Debug, Clone)]
pub struct AlphaMatrix {
    pub names: Vec<String>,
    pub raw: Vec<Vec<f64>>,
    pub standardized: Vec<Vec<f64>>,
    pub fit_mean: Vec<f64>,
    pub fit_std: Vec<f64>,
    pub diagnostics: Vec<EvalDiagnostics>,
    pub dropped: Vec<DroppedColumn>,
    pub n_rows: usize,
    pub boundary: usize,
}

impl AlphaMatrix {
    pub fn n_alphas(&self) -> usize {
        self.names.len()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

/// Evaluates `defs` over the frame and standardizes on the first `boundary`
/// rows. Evaluation is independent per formula and runs in parallel when the
/// `parallel` feature is on; results are collected in definition order.
pub fn build_matrix(
    defs: &[AlphaDef],
    frame: &FeatureFrame,
    boundary: usize,
) -> Result<AlphaMatrix> {
    let evaluated: Vec<Result<(Vec<f64>, EvalDiagnostics)>> =
        par::map_slice(defs, |def| def.evaluate_with_diagnostics(frame));
    let mut raw = Vec::with_capacity(defs.len());
    let mut diagnostics = Vec::with_capacity(defs.len());
    for result in evaluated {
        let (values, diag) = result?;
        raw.push(values);
        diagnostics.push(diag);
    }
    let names: Vec<String> = defs.iter().map(|d| d.name.clone()).collect();
    standardize(names, raw, diagnostics, frame.len(), boundary)
}

/// Builds a matrix from precomputed columns; same standardization rules as
/// [`build_matrix`]. Used for synthetic studies where alphas are injected
/// directly instead of evaluated from formulas.
pub fn from_columns(
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
    n_rows: usize,
    boundary: usize,
) -> Result<AlphaMatrix> {
    if names.len() != columns.len() {
        return Err(Error::Invalid(format!(
            "{} names for {} columns",
            names.len(),
            columns.len()
        )));
    }
    for (name, col) in names.iter().zip(&columns) {
        if col.len() != n_rows {
            return Err(Error::Invalid(format!(
                "column `{name}` has {} rows, expected {n_rows}",
                col.len()
            )));
        }
    }
    let diagnostics = vec![EvalDiagnostics::default(); names.len()];
    standardize(names, columns, diagnostics, n_rows, boundary)
}

fn standardize(
    names: Vec<String>,
    raw: Vec<Vec<f64>>,
    diagnostics: Vec<EvalDiagnostics>,
    n_rows: usize,
    boundary: usize,
) -> Result<AlphaMatrix> {
    if boundary == 0 || boundary > n_rows {
        return Err(Error::Invalid(format!(
            "standardization boundary {boundary} out of range for {n_rows} rows"
        )));
    }

    let mut kept = AlphaMatrix {
        names: Vec::new(),
        raw: Vec::new(),
        standardized: Vec::new(),
        fit_mean: Vec::new(),
        fit_std: Vec::new(),
        diagnostics: Vec::new(),
        dropped: Vec::new(),
        n_rows,
        boundary,
    };

    for ((name, values), diag) in names.into_iter().zip(raw).zip(diagnostics) {
        let train: Vec<f64> = values[..boundary]
            .iter()
            .copied()
            .filter(|v| !v.is_nan())
            .collect();
        if train.len() < 2 {
            kept.dropped.push(DroppedColumn {
                name,
                reason: format!(
                    "only {} non-missing training rows (need at least 2 to standardize)",
                    train.len()
                ),
            });
            continue;
        }
        let mean = train.iter().sum::<f64>() / train.len() as f64;
        let var = train.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
            / (train.len() - 1) as f64;
        let std = var.sqrt();
        if !(std > 0.0) {
            kept.dropped.push(DroppedColumn {
                name,
                reason: "zero variance in the training split".into(),
            });
            continue;
        }
        let standardized: Vec<f64> = values.iter().map(|v| (v - mean) / std).collect();
        kept.names.push(name);
        kept.raw.push(values);
        kept.standardized.push(standardized);
        kept.fit_mean.push(mean);
        kept.fit_std.push(std);
        kept.diagnostics.push(diag);
    }
    Ok(kept)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_alpha_file;
    use chrono::NaiveDate;

    fn frame_with(columns: &[(&str, Vec<f64>)]) -> FeatureFrame {
        let n = columns[0].1.len();
        let dates: Vec<NaiveDate> = (0..n)
            .map(|i| NaiveDate::from_ymd_opt(2020, 1, 1).unwrap() + chrono::Days::new(i as u64))
            .collect();
        let mut frame = FeatureFrame::new(dates);
        for (name, values) in columns {
            frame.add_column(name, values.clone()).unwrap();
        }
        frame
    }

    #[test]
    fn standardizes_on_training_rows_only() {
        // train rows [1, 3]: mean 2, sample std sqrt(2)
        let frame = frame_with(&[("x", vec![1.0, 3.0, 100.0, -7.0])]);
        let defs = parse_alpha_file("a = x\n").unwrap();
        let m = build_matrix(&defs, &frame, 2).unwrap();
        assert_eq!(m.fit_mean, vec![2.0]);
        let s2 = 2.0_f64.sqrt();
        assert!((m.fit_std[0] - s2).abs() < 1e-15);
        assert!((m.standardized[0][0] + 1.0 / s2).abs() < 1e-15);
        assert!((m.standardized[0][1] - 1.0 / s2).abs() < 1e-15);
        // test rows transformed with the same stats
        assert!((m.standardized[0][2] - (100.0 - 2.0) / s2).abs() < 1e-12);
    }

    #[test]
    fn constant_training_column_is_dropped_with_reason() {
        let frame = frame_with(&[
            ("x", vec![5.0, 5.0, 1.0, 2.0]),
            ("y", vec![1.0, 4.0, 2.0, 8.0]),
        ]);
        let defs = parse_alpha_file("flat = x\nlive = y\n").unwrap();
        let m = build_matrix(&defs, &frame, 2).unwrap();
        assert_eq!(m.names, vec!["live".to_string()]);
        assert_eq!(m.dropped.len(), 1);
        assert_eq!(m.dropped[0].name, "flat");
        assert!(m.dropped[0].reason.contains("zero variance"));
    }

    #[test]
    fn sparse_training_column_is_dropped() {
        let frame = frame_with(&[("x", vec![f64::NAN, 5.0, 1.0, 2.0])]);
        let defs = parse_alpha_file("a = x\n").unwrap();
        let m = build_matrix(&defs, &frame, 2).unwrap();
        assert!(m.names.is_empty());
        assert!(m.dropped[0].reason.contains("non-missing"));
    }

    #[test]
    fn missing_rows_stay_missing() {
        let frame = frame_with(&[("x", vec![1.0, 3.0, f64::NAN, 4.0])]);
        let defs = parse_alpha_file("a = x\n").unwrap();
        let m = build_matrix(&defs, &frame, 2).unwrap();
        assert!(m.standardized[0][2].is_nan());
        assert!(!m.standardized[0][3].is_nan());
    }

    #[test]
    fn from_columns_matches_build() {
        let frame = frame_with(&[("x", vec![1.0, 3.0, 2.0, 4.0])]);
        let defs = parse_alpha_file("a = x\n").unwrap();
        let built = build_matrix(&defs, &frame, 2).unwrap();
        let direct = from_columns(
            vec!["a".into()],
            vec![vec![1.0, 3.0, 2.0, 4.0]],
            4,
            2,
        )
        .unwrap();
        assert_eq!(built.standardized, direct.standardized);
    }
}
