//! Row-wise evaluation of alpha expressions against a feature frame.
//!
//! An expression is evaluated independently at every row; the only data it
//! can see is that row's column values, so look-ahead can only enter through
//! a column that itself looks ahead. Missing operands (NaN) propagate to a
//! missing result. Division by zero masks the row and increments a counter
//! instead of producing an infinity; any other non-finite result (overflow)
//! is masked as well.

use std::collections::BTreeSet;

use crate::dsl::ast::{BinOp, Expr, Func};
use crate::error::{Error, Result};
use crate::frame::FeatureFrame;

/// Per-expression evaluation counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct EvalDiagnostics {
    /// Rows masked because a divisor was exactly zero.
    pub div_by_zero: usize,
}

/// Evaluates `expr` over every row of `frame`. Fails up front if the
/// expression references a column the frame does not have; `name` labels the
/// error.
pub fn evaluate_named(
    name: &str,
    expr: &Expr,
    frame: &FeatureFrame,
) -> Result<(Vec<f64>, EvalDiagnostics)> {
    let mut idents = BTreeSet::new();
    expr.identifiers(&mut idents);
    let missing: Vec<String> = idents
        .iter()
        .filter(|id| !frame.has_column(id))
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(Error::UnknownIdentifiers {
            alpha: name.to_string(),
            idents: missing,
        });
    }

    let mut diag = EvalDiagnostics::default();
    let mut out = Vec::with_capacity(frame.len());
    for t in 0..frame.len() {
        let v = eval_at(expr, frame, t, &mut diag);
        out.push(if v.is_finite() { v } else { f64::NAN });
    }
    Ok((out, diag))
}

/// [`evaluate_named`] without the counters.
pub fn evaluate(expr: &Expr, frame: &FeatureFrame) -> Result<Vec<f64>> {
    evaluate_named("<expr>", expr, frame).map(|(v, _)| v)
}

fn eval_at(expr: &Expr, frame: &FeatureFrame, t: usize, diag: &mut EvalDiagnostics) -> f64 {
    match expr {
        Expr::Number(v) => *v,
        Expr::Ident(name) => frame.column(name).map(|col| col[t]).unwrap_or(f64::NAN),
        Expr::Neg(inner) => -eval_at(inner, frame, t, diag),
        Expr::Bin(op, lhs, rhs) => {
            let a = eval_at(lhs, frame, t, diag);
            let b = eval_at(rhs, frame, t, diag);
            match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                BinOp::Div => {
                    if b == 0.0 {
                        diag.div_by_zero += 1;
                        f64::NAN
                    } else {
                        a / b
                    }
                }
            }
        }
        Expr::Call(func, args) => match func {
            Func::Abs => eval_at(&args[0], frame, t, diag).abs(),
            Func::Min | Func::Max => {
                let a = eval_at(&args[0], frame, t, diag);
                let b = eval_at(&args[1], frame, t, diag);
                if a.is_nan() || b.is_nan() {
                    f64::NAN
                } else if *func == Func::Min {
                    a.min(b)
                } else {
                    a.max(b)
                }
            }
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parser::parse_expr;
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
    fn evaluates_rowwise() {
        let frame = frame_with(&[
            ("C_t", vec![10.0, 12.0]),
            ("O_t", vec![10.0, 10.0]),
            ("S_t", vec![0.5, -0.5]),
        ]);
        let e = parse_expr("(C_t - O_t) / O_t + 0.5 * S_t").unwrap();
        let v = evaluate(&e, &frame).unwrap();
        assert!((v[0] - 0.25).abs() < 1e-15);
        assert!((v[1] - (0.2 - 0.25)).abs() < 1e-15);
    }

    #[test]
    fn mean_reversion_example_is_zero_at_the_mean() {
        let frame = frame_with(&[("C_t", vec![10.0]), ("SMA_10", vec![10.0])]);
        let e = parse_expr("-(C_t - SMA_10)").unwrap();
        assert_eq!(evaluate(&e, &frame).unwrap()[0], 0.0);
    }

    #[test]
    fn missing_operand_masks_row() {
        let frame = frame_with(&[("a", vec![1.0, f64::NAN]), ("b", vec![2.0, 2.0])]);
        let e = parse_expr("a + b").unwrap();
        let v = evaluate(&e, &frame).unwrap();
        assert_eq!(v[0], 3.0);
        assert!(v[1].is_nan());
    }

    #[test]
    fn division_by_zero_masks_and_counts() {
        let frame = frame_with(&[("a", vec![1.0, 1.0, 0.0]), ("b", vec![2.0, 0.0, 0.0])]);
        let e = parse_expr("a / b").unwrap();
        let (v, diag) = evaluate_named("ratio", &e, &frame).unwrap();
        assert_eq!(v[0], 0.5);
        assert!(v[1].is_nan() && v[2].is_nan());
        assert_eq!(diag.div_by_zero, 2);
    }

    #[test]
    fn unknown_identifier_is_an_error() {
        let frame = frame_with(&[("a", vec![1.0])]);
        let e = parse_expr("a + mystery").unwrap();
        let err = evaluate_named("alpha9", &e, &frame).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("alpha9") && msg.contains("mystery"), "{msg}");
    }

    #[test]
    fn min_max_propagate_missing() {
        let frame = frame_with(&[("a", vec![f64::NAN]), ("b", vec![2.0])]);
        let e = parse_expr("min(a, b)").unwrap();
        assert!(evaluate(&e, &frame).unwrap()[0].is_nan());
    }
}
