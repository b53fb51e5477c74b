//! Composition of the feature, scoring, and split stages.
//!
//! The load-bearing rule: anything fitted or scored on the training split
//! must be computed from training rows alone. Trailing indicators are safe
//! on the full frame, but `future_return` and the rolling risk columns reach
//! one row ahead or are consumed at fit time, so training artifacts take
//! them from a frame sliced *before* the recompute.

use crate::boost::{self, BoostConfig, BoostModel, GainReport};
use crate::error::{Error, Result};
use crate::frame::{self, FeatureFrame, RiskConfig, RiskWarnings, COL_FUTURE_RETURN};
use crate::indicators;
use crate::matrix::AlphaMatrix;
use crate::metrics::{self, AlphaMetricsRow, MetricReport};
use crate::par;

/// Attaches the standard indicator set and the risk columns to `frame`.
/// Safe on the full history for anything trailing; the risk columns it adds
/// are only valid for test-side consumption (see [`train_view`]).
pub fn featurize(frame: &mut FeatureFrame, cfg: &RiskConfig) -> Result<RiskWarnings> {
    indicators::add_standard_indicators(frame)?;
    frame::add_risk_columns(frame, cfg)
}

/// The first `boundary` rows with `future_return` and every risk column
/// recomputed from those rows alone. Columns already on the frame (prices,
/// indicators, raw inputs) carry over by slicing, which is sound because
/// they never look ahead.
pub fn train_view(frame: &FeatureFrame, boundary: usize, cfg: &RiskConfig) -> Result<FeatureFrame> {
    if boundary == 0 || boundary > frame.len() {
        return Err(Error::Invalid(format!(
            "train boundary {boundary} out of range for {} rows",
            frame.len()
        )));
    }
    let mut view = frame.slice_rows(0, boundary);
    frame::add_risk_columns(&mut view, cfg)?;
    Ok(view)
}

/// Everything `evaluate_alphas` produces in one pass.
#[derive(Debug, Clone)]
pub struct AlphaEvaluation {
    pub report: MetricReport,
    pub model: BoostModel,
    pub gain: GainReport,
}

/// Scores every kept alpha against training-split next-step returns:
/// rank IC and mutual information per column, plus split-gain importance
/// from one boosted model over all columns jointly.
///
/// `train_returns` must be the training view's `future_return` column, so
/// its length equals the matrix boundary. Rows where any alpha or the
/// return is missing are excluded from the boosting fit; IC and MI already
/// handle missing values pairwise.
pub fn evaluate_alphas(
    matrix: &AlphaMatrix,
    train_returns: &[f64],
    mi_bins: usize,
    boost_cfg: &BoostConfig,
    boost_seed: u64,
) -> Result<AlphaEvaluation> {
    let b = matrix.boundary;
    if train_returns.len() != b {
        return Err(Error::Invalid(format!(
            "got {} training returns for boundary {b}",
            train_returns.len()
        )));
    }
    if matrix.n_alphas() == 0 {
        return Err(Error::Invalid("no alphas survived standardization".into()));
    }

    let scored: Vec<Result<(Option<f64>, f64)>> = par::map_range(matrix.n_alphas(), |k| {
        let col = &matrix.standardized[k][..b];
        let ic = metrics::information_coefficient(col, train_returns)?;
        let mi = metrics::mutual_information(col, train_returns, mi_bins)?;
        Ok((ic, mi))
    });

    // boosting wants complete rows: keep t only when the return and every
    // alpha are present there
    let full_rows: Vec<usize> = (0..b)
        .filter(|&t| {
            train_returns[t].is_finite()
                && matrix.standardized.iter().all(|col| col[t].is_finite())
        })
        .collect();
    let features: Vec<Vec<f64>> = matrix
        .standardized
        .iter()
        .map(|col| full_rows.iter().map(|&t| col[t]).collect())
        .collect();
    let y: Vec<f64> = full_rows.iter().map(|&t| train_returns[t]).collect();
    let model = boost::fit(&features, &y, boost_cfg, boost_seed)?;
    let gain = boost::gain_importance(&model);

    let mut rows = Vec::with_capacity(matrix.n_alphas());
    for (k, scored_k) in scored.into_iter().enumerate() {
        let (ic, mi) = scored_k?;
        rows.push(AlphaMetricsRow {
            name: matrix.names[k].clone(),
            ic,
            mi,
            gain_importance: gain.importance[k],
            gain_share: gain.normalized[k],
            div_by_zero: matrix.diagnostics[k].div_by_zero,
        });
    }
    Ok(AlphaEvaluation {
        report: MetricReport {
            rows,
            mi_bins,
            n_train_rows: b,
            dropped: matrix.dropped.clone(),
        },
        model,
        gain,
    })
}

/// Train-split `future_return` for scoring: computed on the sliced view so
/// the final training row is masked instead of peeking across the boundary.
pub fn train_returns(frame: &FeatureFrame, boundary: usize, cfg: &RiskConfig) -> Result<Vec<f64>> {
    let view = train_view(frame, boundary, cfg)?;
    Ok(view.require(COL_FUTURE_RETURN)?.to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix;
    use crate::synthetic::{generate_frame, SyntheticConfig};

    fn featurized(n_rows: usize) -> FeatureFrame {
        let mut frame = generate_frame(&SyntheticConfig {
            n_rows,
            ..SyntheticConfig::default()
        })
        .unwrap();
        featurize(&mut frame, &RiskConfig::default()).unwrap();
        frame
    }

    #[test]
    fn train_view_masks_the_boundary_row() {
        let frame = featurized(400);
        let view = train_view(&frame, 300, &RiskConfig::default()).unwrap();
        assert_eq!(view.len(), 300);
        let full = frame.require(COL_FUTURE_RETURN).unwrap();
        let sliced = view.require(COL_FUTURE_RETURN).unwrap();
        // full-frame column sees row 300's close from row 299; the view must not
        assert!(full[299].is_finite());
        assert!(sliced[299].is_nan());
        assert_eq!(&full[..299], &sliced[..299]);
    }

    #[test]
    fn train_view_is_blind_to_later_rows() {
        let frame = featurized(400);
        let mut poisoned = frame.clone();
        let mut close = poisoned.require("C_t").unwrap().to_vec();
        for v in close.iter_mut().skip(300) {
            *v = 9999.0;
        }
        poisoned.set_column("C_t", close).unwrap();
        let a = train_view(&frame, 300, &RiskConfig::default()).unwrap();
        let b = train_view(&poisoned, 300, &RiskConfig::default()).unwrap();
        for col in ["future_return", "sigma_annual", "tau_upper", "regime"] {
            crate::testutil::assert_bits_eq(a.require(col).unwrap(), b.require(col).unwrap(), col);
        }
    }

    #[test]
    fn evaluation_scores_line_up_with_names() {
        let n = 500;
        let frame = featurized(n);
        let fr = train_returns(&frame, 400, &RiskConfig::default()).unwrap();
        // alpha 0 is the return itself (shifted into standard units), alpha 1 noise
        let signal: Vec<f64> = frame.require(COL_FUTURE_RETURN).unwrap().to_vec();
        let noise: Vec<f64> = (0..n).map(|t| ((t * 37 + 11) % 101) as f64).collect();
        let m = matrix::from_columns(
            vec!["sig".into(), "noi".into()],
            vec![signal, noise],
            n,
            400,
        )
        .unwrap();
        let eval = evaluate_alphas(&m, &fr, 8, &BoostConfig::default(), 0).unwrap();
        assert_eq!(eval.report.rows.len(), 2);
        assert_eq!(eval.report.rows[0].name, "sig");
        assert!(eval.report.rows[0].ic.unwrap() > 0.95);
        assert!(eval.report.rows[0].gain_share > 0.9);
        assert!(eval.report.rows[1].gain_share < 0.1);
        let share_sum: f64 = eval.report.rows.iter().map(|r| r.gain_share).sum();
        assert!((share_sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn return_length_mismatch_is_rejected() {
        let n = 300;
        let frame = featurized(n);
        let fr = train_returns(&frame, 250, &RiskConfig::default()).unwrap();
        let col: Vec<f64> = (0..n).map(|t| t as f64).collect();
        let m = matrix::from_columns(vec!["a".into()], vec![col], n, 200).unwrap();
        let err = evaluate_alphas(&m, &fr, 8, &BoostConfig::default(), 0).unwrap_err();
        assert!(err.to_string().contains("boundary"));
    }
}
