//! Formulaic alpha definitions: parsing, rendering, evaluation, and the
//! built-in formula set.
//!
//! An alpha file is plain text, one `name = expression` definition per line,
//! with `#` comments and blank lines ignored. Names must be unique within a
//! file. The crate ships a built-in set of fifty formulas over daily OHLCV
//! data, the standard indicator columns, a sentiment score, peer polarity
//! scores, and three index closes; see [`BUILTIN_ALPHAS`].

pub mod ast;
pub mod eval;
pub mod parser;

pub use ast::{BinOp, Expr, Func};
pub use eval::{evaluate, evaluate_named, EvalDiagnostics};
pub use parser::parse_expr;

use crate::error::{Error, Result};
use crate::frame::FeatureFrame;

/// A named formula.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaDef {
    pub name: String,
    pub expr: Expr,
}

impl AlphaDef {
    /// Renders the definition back to its file form.
    pub fn render(&self) -> String {
        format!("{} = {}", self.name, self.expr)
    }

    pub fn evaluate(&self, frame: &FeatureFrame) -> Result<Vec<f64>> {
        eval::evaluate_named(&self.name, &self.expr, frame).map(|(v, _)| v)
    }

    pub fn evaluate_with_diagnostics(
        &self,
        frame: &FeatureFrame,
    ) -> Result<(Vec<f64>, EvalDiagnostics)> {
        eval::evaluate_named(&self.name, &self.expr, frame)
    }
}

/// Parses a single `name = expression` line.
pub fn parse_alpha(line: &str) -> Result<AlphaDef> {
    let (name, expr) = parser::parse_named(line)?;
    Ok(AlphaDef { name, expr })
}

/// Parses an alpha file: definitions in order, comments and blank lines
/// skipped, duplicate names rejected. Errors cite the 1-based line number.
pub fn parse_alpha_file(text: &str) -> Result<Vec<AlphaDef>> {
    let mut defs: Vec<AlphaDef> = Vec::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let stripped = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        };
        if stripped.trim().is_empty() {
            continue;
        }
        let def = parse_alpha(stripped).map_err(|e| match e {
            Error::Parse { offset, msg, .. } => Error::Parse {
                line: line_no,
                offset,
                msg,
            },
            other => other,
        })?;
        if defs.iter().any(|d| d.name == def.name) {
            return Err(Error::DuplicateAlpha {
                name: def.name,
                line: line_no,
            });
        }
        defs.push(def);
    }
    Ok(defs)
}

/// Renders definitions back into file form, one per line.
pub fn render_alpha_file(defs: &[AlphaDef]) -> String {
    let mut out = String::new();
    for def in defs {
        out.push_str(&def.render());
        out.push('\n');
    }
    out
}

/// Source text of the built-in fifty-formula set.
pub const BUILTIN_ALPHAS: &str = include_str!("builtin_alphas.txt");

/// The built-in formula set, parsed. The embedded text is covered by tests,
/// so a parse failure here is a build defect.
pub fn builtin_alphas() -> Vec<AlphaDef> {
    parse_alpha_file(BUILTIN_ALPHAS).expect("built-in alpha corpus parses")
}

/// Hex SHA-256 of an alpha file's text, recorded in reports and checkpoints
/// so runs state exactly which formula set they used.
pub fn corpus_sha256(text: &str) -> String {
    use sha2::{Digest, Sha256};
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

/// Generation prompt template; `{features}` is the only placeholder.
pub const PROMPT_TEMPLATE: &str = "You are a quantitative trader. Generate 50 alpha formulas using the given stock features:\n{features}.\nThe formulas should be mathematical expressions combining these features.\nReturn only the formulas in Python syntax, using variables like C_t (Close), O_t (Open),\nV_t (Volume), S_t (Sentiment), and standard indicators (SMA, Momentum).\nExample Output: alpha_t = (C_t - O_t) / O_t + 0.5 * S_t";

/// Fills the prompt template with a comma-separated feature list.
pub fn render_prompt<S: AsRef<str>>(features: &[S]) -> String {
    let list = features
        .iter()
        .map(|s| s.as_ref())
        .collect::<Vec<_>>()
        .join(", ");
    PROMPT_TEMPLATE.replace("{features}", &list)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_set_parses_to_fifty() {
        let defs = builtin_alphas();
        assert_eq!(defs.len(), 50);
        assert_eq!(defs[0].name, "alpha1_t");
        assert_eq!(defs[49].name, "alpha50_t");
    }

    #[test]
    fn builtin_set_round_trips() {
        let defs = builtin_alphas();
        let rendered = render_alpha_file(&defs);
        let reparsed = parse_alpha_file(&rendered).unwrap();
        assert_eq!(defs, reparsed);
    }

    #[test]
    fn two_builtin_formulas_are_identical() {
        let defs = builtin_alphas();
        let a25 = defs.iter().find(|d| d.name == "alpha25_t").unwrap();
        let a39 = defs.iter().find(|d| d.name == "alpha39_t").unwrap();
        assert_eq!(a25.expr, a39.expr);
    }

    #[test]
    fn file_parser_skips_comments_and_blanks() {
        let defs = parse_alpha_file("# header\n\n  a = 1\n b = a + 1 # inline\n").unwrap();
        assert_eq!(defs.len(), 2);
        assert_eq!(defs[1].render(), "b = a + 1");
    }

    #[test]
    fn comment_only_file_is_empty() {
        assert!(parse_alpha_file("# nothing here\n\n").unwrap().is_empty());
    }

    #[test]
    fn duplicate_names_are_rejected_with_line() {
        let err = parse_alpha_file("a = 1\na = 2\n").unwrap_err();
        match err {
            Error::DuplicateAlpha { name, line } => {
                assert_eq!(name, "a");
                assert_eq!(line, 2);
            }
            other => panic!("wrong error: {other:?}"),
        }
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = parse_alpha_file("a = 1\nb = 1 + + 2\n").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("wrong error: {other:?}"),
        }
    }

    #[test]
    fn prompt_substitutes_features() {
        let p = render_prompt(&["C_t", "O_t", "V_t"]);
        assert!(p.contains("Generate 50 alpha formulas"));
        assert!(p.contains("C_t, O_t, V_t."));
        assert!(!p.contains("{features}"));
        assert!(p.ends_with("alpha_t = (C_t - O_t) / O_t + 0.5 * S_t"));
    }

    #[test]
    fn corpus_hash_is_stable_hex() {
        let h = corpus_sha256(BUILTIN_ALPHAS);
        assert_eq!(h.len(), 64);
        assert_eq!(h, corpus_sha256(BUILTIN_ALPHAS));
        assert_ne!(h, corpus_sha256("x = 1\n"));
    }
}
