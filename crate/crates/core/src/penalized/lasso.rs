//! Weighted-L1 least squares by cyclic coordinate descent.
//!
//! Minimizes (1/2n)‖y − Xβ‖² + Σ_m w_m |β_m| with soft-threshold updates.
//! Sweeps alternate between the full coordinate set and the current active
//! set; every sweep is a sequence of exact coordinate minimizations, so the
//! objective never increases.

use crate::error::{Error, Result};

/// Column-major dense design.
#[derive(Debug, Clone)]
pub struct Design {
    n: usize,
    columns: Vec<Vec<f64>>,
    /// ‖x_m‖² / n
    curvature: Vec<f64>,
}

impl Design {
    pub fn new(n: usize, columns: Vec<Vec<f64>>) -> Result<Self> {
        if let Some(c) = columns.iter().find(|c| c.len() != n) {
            return Err(Error::Dimension(format!("design column of length {}, expected {n}", c.len())));
        }
        let curvature = columns
            .iter()
            .map(|c| c.iter().map(|v| v * v).sum::<f64>() / n as f64)
            .collect();
        Ok(Design { n, columns, curvature })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, m: usize) -> &[f64] {
        &self.columns[m]
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    /// Xβ
    pub fn predict(&self, beta: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (col, &b) in self.columns.iter().zip(beta) {
            if b != 0.0 {
                out.iter_mut().zip(col).for_each(|(o, x)| *o += b * x);
            }
        }
        out
    }

    pub fn residual(&self, y: &[f64], beta: &[f64]) -> Vec<f64> {
        let fit = self.predict(beta);
        y.iter().zip(fit).map(|(a, b)| a - b).collect()
    }

    /// max_m |x_mᵀy| / n
    pub fn lambda_max(&self, y: &[f64]) -> f64 {
        self.columns
            .iter()
            .map(|c| dot(c, y).abs() / self.n as f64)
            .fold(0.0, f64::max)
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CdOptions {
    /// Stop when a full sweep lowers the objective by less than this
    /// fraction.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for CdOptions {
    fn default() -> Self {
        CdOptions { tol: 1e-8, max_sweeps: 10_000 }
    }
}

#[derive(Debug, Clone)]
pub struct LassoSolution {
    pub beta: Vec<f64>,
    pub objective: f64,
    pub sweeps: usize,
    pub converged: bool,
    /// Objective after every sweep (starting value first).
    pub trace: Vec<f64>,
}

/// (1/2n)‖r‖² + Σ w|β|
pub fn weighted_objective(resid: &[f64], beta: &[f64], weights: &[f64]) -> f64 {
    let n = resid.len() as f64;
    dot(resid, resid) / (2.0 * n) + beta.iter().zip(weights).map(|(b, w)| w * b.abs()).sum::<f64>()
}

fn sweep(design: &Design, weights: &[f64], beta: &mut [f64], resid: &mut [f64], coords: impl Iterator<Item = usize>) {
    let n = design.n as f64;
    for m in coords {
        let a = design.curvature[m];
        let old = beta[m];
        let new = if a > 0.0 {
            let col = &design.columns[m];
            let g = dot(col, resid) / n + a * old;
            soft_threshold(g, weights[m]) / a
        } else {
            0.0
        };
        if new != old {
            let delta = new - old;
            resid.iter_mut().zip(&design.columns[m]).for_each(|(r, x)| *r -= delta * x);
            beta[m] = new;
        }
    }
}

/// Solve the weighted-L1 problem, optionally from a warm start.
pub fn weighted_lasso(
    design: &Design,
    y: &[f64],
    weights: &[f64],
    opts: &CdOptions,
    warm: Option<&[f64]>,
) -> Result<LassoSolution> {
    let m = design.m();
    if y.len() != design.n() || weights.len() != m {
        return Err(Error::Dimension(format!(
            "y has {} rows and {} weights for an {}x{m} design",
            y.len(),
            weights.len(),
            design.n()
        )));
    }
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
        return Err(Error::InvalidParameter(format!("penalty weight {w} must be finite and nonnegative")));
    }
    let mut beta = match warm {
        Some(w) if w.len() == m => w.to_vec(),
        Some(w) => return Err(Error::Dimension(format!("warm start of length {}, expected {m}", w.len()))),
        None => vec![0.0; m],
    };
    let mut resid = design.residual(y, &beta);
    let mut obj = weighted_objective(&resid, &beta, weights);
    let mut trace = vec![obj];
    let rel = |prev: f64, cur: f64| (prev - cur) / prev.abs().max(f64::MIN_POSITIVE);

    let mut sweeps = 0;
    let mut converged = false;
    while sweeps < opts.max_sweeps {
        sweep(design, weights, &mut beta, &mut resid, 0..m);
        sweeps += 1;
        let full = weighted_objective(&resid, &beta, weights);
        trace.push(full);
        let done = rel(obj, full) < opts.tol;
        obj = full;
        if done {
            converged = true;
            break;
        }
        // iterate on the active set until it settles
        let active: Vec<usize> = (0..m).filter(|&k| beta[k] != 0.0).collect();
        while sweeps < opts.max_sweeps && !active.is_empty() {
            sweep(design, weights, &mut beta, &mut resid, active.iter().copied());
            sweeps += 1;
            let cur = weighted_objective(&resid, &beta, weights);
            trace.push(cur);
            let small = rel(obj, cur) < opts.tol;
            obj = cur;
            if small {
                break;
            }
        }
    }
    // refresh against accumulated rounding in the running residual
    let resid = design.residual(y, &beta);
    let objective = weighted_objective(&resid, &beta, weights);
    Ok(LassoSolution { beta, objective, sweeps, converged, trace })
}
