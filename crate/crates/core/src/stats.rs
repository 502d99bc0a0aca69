//! Small numeric helpers shared across modules: standardization, correlation
//! and least squares with collinearity detection.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Affine map applied by [`standardize`]: `z = (x - mean) / sd`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scaling {
    pub mean: f64,
    pub sd: f64,
}

/// Relative variance floor below which a column counts as constant.
const ZERO_VARIANCE_REL: f64 = 1e-24;

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample variance with denominator n - 1.
pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Center and scale to sample mean 0 and sample sd 1 (denominator n - 1).
pub fn standardize(col: &[f64]) -> Result<(Vec<f64>, Scaling)> {
    if col.len() < 2 {
        return Err(Error::Dimension("standardize needs at least 2 values".into()));
    }
    let mean = mean(col);
    let ss: f64 = col.iter().map(|v| (v - mean) * (v - mean)).sum();
    let scale2: f64 = col.iter().map(|v| v * v).sum::<f64>().max(f64::MIN_POSITIVE);
    if ss <= ZERO_VARIANCE_REL * scale2 {
        return Err(Error::ZeroVariance);
    }
    let sd = (ss / (col.len() as f64 - 1.0)).sqrt();
    Ok((col.iter().map(|v| (v - mean) / sd).collect(), Scaling { mean, sd }))
}

/// Running moments used for one-pass correlation against a centered response.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct ColumnMoments {
    pub sum: f64,
    pub sumsq: f64,
    pub cross: f64,
}

impl ColumnMoments {
    #[inline]
    pub fn accumulate(col: &[f64], y_centered: &[f64]) -> Self {
        let mut m = ColumnMoments::default();
        for (&x, &y) in col.iter().zip(y_centered) {
            m.sum += x;
            m.sumsq += x * x;
            m.cross += x * y;
        }
        m
    }

    /// |corr(x, y)| given Σy² of the centered response. Zero-variance columns
    /// return 0.
    #[inline]
    pub fn abs_corr(&self, n: usize, y_ss: f64) -> f64 {
        let ss = self.sumsq - self.sum * self.sum / n as f64;
        if ss <= ZERO_VARIANCE_REL * self.sumsq.max(f64::MIN_POSITIVE) || y_ss <= 0.0 {
            return 0.0;
        }
        (self.cross.abs() / (ss * y_ss).sqrt()).min(1.0)
    }
}

/// Absolute Pearson correlation; 0 for a zero-variance input.
pub fn abs_correlation(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!("lengths {} and {}", x.len(), y.len())));
    }
    let my = mean(y);
    let yc: Vec<f64> = y.iter().map(|v| v - my).collect();
    let y_ss: f64 = yc.iter().map(|v| v * v).sum();
    Ok(ColumnMoments::accumulate(x, &yc).abs_corr(x.len(), y_ss))
}

/// Ordinary least squares result.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    /// Indices (into the supplied columns) that were kept.
    pub kept: Vec<usize>,
    /// Indices dropped as collinear with earlier columns.
    pub dropped: Vec<usize>,
    /// Coefficients for `kept`, in order.
    pub coef: Vec<f64>,
    pub std_err: Vec<f64>,
    pub rss: f64,
    /// Residual degrees of freedom n - rank.
    pub df_resid: usize,
}

/// Relative residual norm below which a column is treated as a linear
/// combination of earlier ones.
pub const COLLINEAR_TOL: f64 = 1e-9;

/// Least squares of `y` on the given columns (no implicit intercept).
/// Columns are screened left to right; a column whose residual after
/// projection on the kept ones is negligible gets dropped.
pub fn least_squares(columns: &[Vec<f64>], y: &[f64]) -> Result<LeastSquares> {
    let n = y.len();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for (idx, col) in columns.iter().enumerate() {
        if col.len() != n {
            return Err(Error::Dimension(format!("column {idx} has length {}, expected {n}", col.len())));
        }
        let norm0 = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut r = col.clone();
        // two rounds of modified Gram-Schmidt
        for _ in 0..2 {
            for q in &basis {
                let dot: f64 = r.iter().zip(q).map(|(a, b)| a * b).sum();
                r.iter_mut().zip(q).for_each(|(a, b)| *a -= dot * b);
            }
        }
        let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm0 == 0.0 || norm <= COLLINEAR_TOL * norm0 {
            dropped.push(idx);
            continue;
        }
        r.iter_mut().for_each(|v| *v /= norm);
        basis.push(r);
        kept.push(idx);
    }
    let k = kept.len();
    if k > n {
        return Err(Error::RankDeficient(format!("{k} columns for {n} samples")));
    }
    let x = DMatrix::from_fn(n, k, |i, c| columns[kept[c]][i]);
    let yv = DVector::from_column_slice(y);
    let qr = x.clone().qr();
    let qty = qr.q().transpose() * &yv;
    let r = qr.r();
    let coef = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::RankDeficient("triangular solve failed".into()))?;
    let resid = &yv - &x * &coef;
    let rss = resid.norm_squared();
    let df_resid = n - k;
    let sigma2 = if df_resid > 0 { rss / df_resid as f64 } else { f64::NAN };
    let rinv = r
        .try_inverse()
        .ok_or_else(|| Error::RankDeficient("R not invertible".into()))?;
    let std_err = (0..k)
        .map(|c| (rinv.row(c).norm_squared() * sigma2).sqrt())
        .collect();
    Ok(LeastSquares {
        kept,
        dropped,
        coef: coef.iter().copied().collect(),
        std_err,
        rss,
        df_resid,
    })
}

/// Orthonormal basis of the span of `columns` (collinear columns skipped),
/// used to project unpenalized covariates out of other columns.
#[derive(Debug, Clone)]
pub struct Projector {
    basis: Vec<Vec<f64>>,
}

impl Projector {
    pub fn new(columns: &[Vec<f64>]) -> Self {
        let mut basis: Vec<Vec<f64>> = Vec::new();
        for col in columns {
            let norm0 = col.iter().map(|v| v * v).sum::<f64>().sqrt();
            let mut r = col.clone();
            for _ in 0..2 {
                for q in &basis {
                    let dot: f64 = r.iter().zip(q).map(|(a, b)| a * b).sum();
                    r.iter_mut().zip(q).for_each(|(a, b)| *a -= dot * b);
                }
            }
            let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm0 > 0.0 && norm > COLLINEAR_TOL * norm0 {
                r.iter_mut().for_each(|v| *v /= norm);
                basis.push(r);
            }
        }
        Projector { basis }
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    /// Residual of `v` after projecting onto the span.
    pub fn residualize(&self, v: &mut [f64]) {
        for _ in 0..2 {
            for q in &self.basis {
                let dot: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(q).for_each(|(a, b)| *a -= dot * b);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn two_point_standardization() {
        let (z, s) = standardize(&[1.0, -1.0]).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((z[0] - h).abs() < 1e-15 && (z[1] + h).abs() < 1e-15);
        assert_eq!(s.mean, 0.0);
        assert!((s.sd - std::f64::consts::SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn constant_column_is_zero_variance() {
        assert!(matches!(standardize(&[3.0, 3.0, 3.0]), Err(Error::ZeroVariance)));
        assert!(standardize(&[1.0]).is_err());
    }

    #[test]
    fn correlation_examples() {
        let y = [1.0, 2.0, 4.0, 3.0];
        assert!((abs_correlation(&y, &y).unwrap() - 1.0).abs() < 1e-15);
        let neg: Vec<f64> = y.iter().map(|v| -v).collect();
        assert!((abs_correlation(&neg, &y).unwrap() - 1.0).abs() < 1e-15);
        let c = abs_correlation(&[1.0, -1.0, 1.0, -1.0], &[1.0, 1.0, -1.0, -1.0]).unwrap();
        assert_eq!(c, 0.0);
        assert_eq!(abs_correlation(&[2.0; 4], &y).unwrap(), 0.0);
    }

    #[test]
    fn least_squares_drops_later_collinear_column() {
        let x1 = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let x2: Vec<f64> = x1.iter().map(|v| 2.0 * v).collect();
        let one = vec![1.0; 5];
        let y: Vec<f64> = x1.iter().map(|v| 1.0 + 3.0 * v).collect();
        let fit = least_squares(&[one, x1, x2], &y).unwrap();
        assert_eq!(fit.kept, vec![0, 1]);
        assert_eq!(fit.dropped, vec![2]);
        assert!((fit.coef[0] - 1.0).abs() < 1e-10 && (fit.coef[1] - 3.0).abs() < 1e-10);
    }

    proptest! {
        #[test]
        fn standardize_is_idempotent(v in proptest::collection::vec(-100.0f64..100.0, 3..40)) {
            if let Ok((z, _)) = standardize(&v) {
                let (z2, s2) = standardize(&z).unwrap();
                prop_assert!((s2.mean).abs() < 1e-12 && (s2.sd - 1.0).abs() < 1e-12);
                for (a, b) in z.iter().zip(&z2) {
                    prop_assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }
}
