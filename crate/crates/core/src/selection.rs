//! Alpha subset selection.
//!
//! Three strategies share one report shape: greedy low-correlation filtering
//! in file order, top-k by boosting gain, and a seeded uniform random draw.
//! Every strategy returns kept indices in their original corpus order so
//! downstream weight vectors line up with the matrix columns.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::AlphaMatrix;
use crate::par;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case", tag = "method")]
pub enum SelectionMethod {
    /// Keep an alpha only if its absolute pairwise correlation with every
    /// previously kept alpha stays at or under the threshold.
    LowCorrelation { threshold: f64 },
    /// Keep the k alphas with the highest boosting gain.
    HighContribution { k: usize },
    /// Uniform draw of k alphas without replacement.
    Random { k: usize, seed: u64 },
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SelectionReport {
    pub method: SelectionMethod,
    /// Kept column indices, ascending (original corpus order).
    pub kept: Vec<usize>,
    pub kept_names: Vec<String>,
    /// For low-correlation: each dropped index with the kept index that
    /// disqualified it and their correlation. Empty for other methods.
    pub dropped_by_correlation: Vec<(usize, usize, f64)>,
}

/// Pearson correlation between standardized columns over rows where both are
/// present in the training span. Returns NaN with fewer than 3 joint rows or
/// when either side is constant on the joint rows.
pub fn pairwise_correlation(a: &[f64], b: &[f64], n_train: usize) -> f64 {
    let n_train = n_train.min(a.len()).min(b.len());
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for i in 0..n_train {
        if a[i].is_nan() || b[i].is_nan() {
            continue;
        }
        xs.push(a[i]);
        ys.push(b[i]);
    }
    if xs.len() < 3 {
        return f64::NAN;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return f64::NAN;
    }
    sxy / (sxx * syy).sqrt()
}

/// Full symmetric correlation matrix over the standardized training rows.
/// Diagonal is 1 for any column with at least 3 present rows.
pub fn correlation_matrix(matrix: &AlphaMatrix) -> Vec<Vec<f64>> {
    let k = matrix.n_alphas();
    let boundary = matrix.boundary;
    let cols = &matrix.standardized;
    let upper: Vec<Vec<f64>> = par::map_range(k, |i| {
        (i..k)
            .map(|j| {
                if i == j {
                    let present = cols[i][..boundary.min(cols[i].len())]
                        .iter()
                        .filter(|v| !v.is_nan())
                        .count();
                    if present >= 3 {
                        1.0
                    } else {
                        f64::NAN
                    }
                } else {
                    pairwise_correlation(&cols[i], &cols[j], boundary)
                }
            })
            .collect()
    });
    let mut full = vec![vec![0.0; k]; k];
    for i in 0..k {
        for (off, &v) in upper[i].iter().enumerate() {
            let j = i + off;
            full[i][j] = v;
            full[j][i] = v;
        }
    }
    full
}

pub fn select(
    matrix: &AlphaMatrix,
    gain: Option<&[f64]>,
    method: &SelectionMethod,
) -> Result<SelectionReport> {
    let k_total = matrix.n_alphas();
    let (kept, dropped_by_correlation) = match method {
        SelectionMethod::LowCorrelation { threshold } => {
            if !(*threshold >= 0.0 && *threshold <= 1.0) {
                return Err(Error::Invalid(format!(
                    "correlation threshold must be in [0, 1], got {threshold}"
                )));
            }
            let corr = correlation_matrix(matrix);
            let mut kept: Vec<usize> = Vec::new();
            let mut dropped = Vec::new();
            for i in 0..k_total {
                let mut blocker = None;
                for &j in &kept {
                    let c: f64 = corr[i][j];
                    if !c.is_nan() && c.abs() > *threshold {
                        blocker = Some((j, c));
                        break;
                    }
                }
                match blocker {
                    Some((j, c)) => dropped.push((i, j, c)),
                    None => kept.push(i),
                }
            }
            (kept, dropped)
        }
        SelectionMethod::HighContribution { k } => {
            let gain = gain.ok_or_else(|| {
                Error::Invalid("high_contribution selection needs gain importance".into())
            })?;
            if gain.len() != k_total {
                return Err(Error::Invalid(format!(
                    "gain has {} entries for {k_total} alphas",
                    gain.len()
                )));
            }
            if gain.iter().all(|&g| g == 0.0) {
                return Err(Error::Invalid(
                    "every alpha has zero gain; high_contribution cannot rank them".into(),
                ));
            }
            let k = (*k).min(k_total);
            // sort by descending gain; ties go to the earlier index
            let mut order: Vec<usize> = (0..k_total).collect();
            order.sort_by(|&a, &b| {
                gain[b]
                    .partial_cmp(&gain[a])
                    .unwrap()
                    .then(a.cmp(&b))
            });
            let mut kept: Vec<usize> = order.into_iter().take(k).collect();
            kept.sort_unstable();
            (kept, Vec::new())
        }
        SelectionMethod::Random { k, seed } => {
            if *k == 0 {
                return Err(Error::Invalid("random selection needs k >= 1".into()));
            }
            let k = (*k).min(k_total);
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let mut kept: Vec<usize> =
                rand::seq::index::sample(&mut rng, k_total, k).into_vec();
            kept.sort_unstable();
            (kept, Vec::new())
        }
    };
    if kept.is_empty() {
        return Err(Error::Invalid("selection kept no alphas".into()));
    }
    let kept_names = kept.iter().map(|&i| matrix.names[i].clone()).collect();
    Ok(SelectionReport {
        method: method.clone(),
        kept,
        kept_names,
        dropped_by_correlation,
    })
}
