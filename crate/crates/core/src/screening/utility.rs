//! Marginal screening utilities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{self, ColumnMoments, Projector};

/// Which statistic ranks candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UtilityKind {
    /// |Pearson correlation| between candidate and trait.
    #[default]
    Marginal,
    /// |coefficient| of the standardized candidate in a regression of the
    /// trait on intercept, candidate and the known covariates.
    Conditional,
}

/// |corr(col, y)|; zero-variance columns score 0.
pub fn marginal_utility(col: &[f64], y: &[f64]) -> Result<f64> {
    stats::abs_correlation(col, y)
}

/// |OLS coefficient of `col`| from regressing `y` on intercept, `col` and the
/// covariate columns.
pub fn modified_marginal_utility(col: &[f64], y: &[f64], covariates: &[Vec<f64>]) -> Result<f64> {
    let n = y.len();
    if col.len() != n {
        return Err(Error::Dimension(format!("column length {} vs trait length {n}", col.len())));
    }
    if n <= covariates.len() + 2 {
        return Err(Error::Dimension(format!(
            "need n > q + 2 (n = {n}, q = {})",
            covariates.len()
        )));
    }
    let mut cols = vec![vec![1.0; n]];
    cols.extend(covariates.iter().cloned());
    cols.push(col.to_vec());
    let fit = stats::least_squares(&cols, y)?;
    if !fit.dropped.is_empty() {
        return Err(Error::RankDeficient(
            "candidate column is collinear with the intercept and covariates".into(),
        ));
    }
    Ok(fit.coef.last().copied().unwrap_or(0.0).abs())
}

/// Trait prepared once for scoring many candidate columns.
#[derive(Debug, Clone)]
pub struct ScreeningResponse {
    kind: UtilityKind,
    n: usize,
    /// Centered trait (marginal) or trait residualized on [1, covariates].
    y: Vec<f64>,
    y_ss: f64,
    projector: Option<Projector>,
}

impl ScreeningResponse {
    pub fn new(y: &[f64], covariates: &[Vec<f64>], kind: UtilityKind) -> Self {
        let n = y.len();
        let (yr, projector) = match kind {
            UtilityKind::Marginal => {
                let m = stats::mean(y);
                (y.iter().map(|v| v - m).collect::<Vec<_>>(), None)
            }
            UtilityKind::Conditional => {
                let mut cols = vec![vec![1.0; n]];
                cols.extend(covariates.iter().cloned());
                let proj = Projector::new(&cols);
                let mut r = y.to_vec();
                proj.residualize(&mut r);
                (r, Some(proj))
            }
        };
        let y_ss = yr.iter().map(|v| v * v).sum();
        ScreeningResponse { kind, n, y: yr, y_ss, projector }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> UtilityKind {
        self.kind
    }

    /// Utility of one candidate column. `scratch` must have length n and is
    /// clobbered in conditional mode.
    pub fn utility(&self, col: &[f64], scratch: &mut [f64]) -> f64 {
        match &self.projector {
            None => ColumnMoments::accumulate(col, &self.y).abs_corr(self.n, self.y_ss),
            Some(proj) => {
                let m = ColumnMoments::accumulate(col, &self.y);
                let ss = m.sumsq - m.sum * m.sum / self.n as f64;
                if ss <= 1e-24 * m.sumsq.max(f64::MIN_POSITIVE) {
                    return 0.0;
                }
                let sd = (ss / (self.n as f64 - 1.0)).sqrt();
                scratch.copy_from_slice(col);
                proj.residualize(scratch);
                let rr: f64 = scratch.iter().map(|v| v * v).sum();
                if rr <= 1e-18 * ss {
                    return 0.0;
                }
                let ry: f64 = scratch.iter().zip(&self.y).map(|(a, b)| a * b).sum();
                (ry / rr).abs() * sd
            }
        }
    }
}
