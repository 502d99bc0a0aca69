//! λ path with BIC selection.

use serde::{Deserialize, Serialize};

use super::lasso::{CdOptions, Design};
use super::lla::lla_fit;
use super::scad::PenaltySpec;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BicPoint {
    pub lambda: f64,
    pub bic: f64,
    pub df: usize,
    pub rss: f64,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct PathFit {
    pub beta: Vec<f64>,
    pub lambda: f64,
    pub df: usize,
    pub path: Vec<BicPoint>,
    pub lla_iterations: usize,
    pub converged: bool,
    /// Whether every LLA objective trace along the path was non-increasing.
    pub lla_monotone: bool,
}

/// ln(RSS/n) + df·ln(n)/n
pub fn bic(rss: f64, n: usize, df: usize) -> f64 {
    let nf = n as f64;
    (rss / nf).ln() + df as f64 * nf.ln() / nf
}

/// Walk the λ grid from largest to smallest with warm starts and keep the
/// BIC minimizer; ties go to the larger λ. Every column is penalized. The
/// walk stops once a fit would use more than half the sample, where the
/// residual variance inside the criterion is no longer meaningful.
pub fn bic_select(design: &Design, y: &[f64], penalty: &PenaltySpec, opts: &CdOptions) -> Result<PathFit> {
    penalty.validate()?;
    let n = design.n();
    let m = design.m();
    if y.len() != n {
        return Err(Error::Dimension(format!("trait of length {} for {n}x{m} design", y.len())));
    }
    let lambda_max = design.lambda_max(y);
    // nothing correlates with the trait: any λ gives the null model
    let grid = penalty.grid.values(if lambda_max > 0.0 { lambda_max } else { 1.0 });
    let all = vec![true; m];
    let zero = vec![0.0; m];
    let mut warm = zero.clone();
    let mut path = Vec::with_capacity(grid.len());
    let mut best: Option<(f64, PathFit)> = None;
    let mut monotone = true;
    for &lambda in &grid {
        let fit = lla_fit(design, y, lambda, penalty, &zero, Some(&warm), &all, opts)?;
        monotone &= fit.is_monotone();
        let df = fit.beta.iter().filter(|b| **b != 0.0).count();
        if 2 * df > n {
            break;
        }
        let rss: f64 = design.residual(y, &fit.beta).iter().map(|v| v * v).sum();
        let score = bic(rss.max(f64::MIN_POSITIVE), n, df);
        path.push(BicPoint { lambda, bic: score, df, rss, converged: fit.converged });
        if best.as_ref().is_none_or(|(s, _)| score < *s) {
            let chosen = PathFit {
                beta: fit.beta.clone(),
                lambda,
                df,
                path: Vec::new(),
                lla_iterations: fit.iterations,
                converged: fit.converged,
                lla_monotone: true,
            };
            best = Some((score, chosen));
        }
        warm = fit.beta;
    }
    if path.iter().all(|p| !p.converged) {
        return Err(Error::NoConvergence);
    }
    let (_, mut best) = best.ok_or(Error::NoConvergence)?;
    best.path = path;
    best.lla_monotone = monotone;
    Ok(best)
}
