//! SCAD penalty and its derivative.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_SCAD_A: f64 = 3.7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PenaltyKind {
    #[default]
    Scad,
    Lasso,
}

impl std::str::FromStr for PenaltyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "scad" => Ok(PenaltyKind::Scad),
            "lasso" => Ok(PenaltyKind::Lasso),
            other => Err(Error::InvalidParameter(format!("unknown penalty {other:?}"))),
        }
    }
}

/// λ grid: either generated from the data or given explicitly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LambdaGrid {
    /// `len` log-spaced values from λ_max = max |x̃ᵀỹ|/n down to
    /// `min_ratio` · λ_max.
    Auto { len: usize, min_ratio: f64 },
    Explicit(Vec<f64>),
}

impl Default for LambdaGrid {
    fn default() -> Self {
        LambdaGrid::Auto { len: 100, min_ratio: 1e-3 }
    }
}

impl LambdaGrid {
    pub fn values(&self, lambda_max: f64) -> Vec<f64> {
        match self {
            LambdaGrid::Explicit(v) => v.clone(),
            LambdaGrid::Auto { len, min_ratio } => {
                if *len == 1 {
                    return vec![lambda_max];
                }
                let (hi, lo) = (lambda_max.ln(), (lambda_max * min_ratio).ln());
                (0..*len)
                    .map(|k| (hi + (lo - hi) * k as f64 / (*len - 1) as f64).exp())
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltySpec {
    pub kind: PenaltyKind,
    /// SCAD shape parameter.
    pub a: f64,
    pub grid: LambdaGrid,
}

impl Default for PenaltySpec {
    fn default() -> Self {
        PenaltySpec::scad()
    }
}

impl PenaltySpec {
    pub fn scad() -> Self {
        PenaltySpec { kind: PenaltyKind::Scad, a: DEFAULT_SCAD_A, grid: LambdaGrid::default() }
    }

    pub fn lasso() -> Self {
        PenaltySpec { kind: PenaltyKind::Lasso, a: DEFAULT_SCAD_A, grid: LambdaGrid::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a > 2.0) {
            return Err(Error::InvalidParameter(format!("SCAD a = {} must exceed 2", self.a)));
        }
        match &self.grid {
            LambdaGrid::Auto { len, min_ratio } => {
                if *len == 0 || !(*min_ratio > 0.0 && *min_ratio < 1.0) {
                    return Err(Error::InvalidParameter("lambda grid needs len > 0 and min_ratio in (0, 1)".into()));
                }
            }
            LambdaGrid::Explicit(v) => {
                if v.is_empty() || v.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
                    return Err(Error::InvalidParameter("lambda grid must be nonempty and positive".into()));
                }
                if v.windows(2).any(|w| w[1] >= w[0]) {
                    return Err(Error::InvalidParameter("lambda grid must be strictly decreasing".into()));
                }
            }
        }
        Ok(())
    }

    /// Penalty value p_λ(|b|).
    pub fn penalty(&self, b: f64, lambda: f64) -> f64 {
        match self.kind {
            PenaltyKind::Scad => scad_penalty(b, lambda, self.a),
            PenaltyKind::Lasso => lambda * b.abs(),
        }
    }

    /// Derivative p'_λ(|b|).
    pub fn derivative(&self, b: f64, lambda: f64) -> f64 {
        match self.kind {
            PenaltyKind::Scad => scad_derivative(b.abs(), lambda, self.a),
            PenaltyKind::Lasso => lambda,
        }
    }
}

pub fn scad_penalty(b: f64, lambda: f64, a: f64) -> f64 {
    let b = b.abs();
    if b < lambda {
        lambda * b
    } else if b <= a * lambda {
        (a * lambda * b - 0.5 * (b * b + lambda * lambda)) / (a - 1.0)
    } else {
        0.5 * (a + 1.0) * lambda * lambda
    }
}

/// Derivative of the SCAD penalty at `b ≥ 0`.
pub fn scad_derivative(b: f64, lambda: f64, a: f64) -> f64 {
    if b < lambda {
        lambda
    } else if b <= a * lambda {
        (a * lambda - b) / (a - 1.0)
    } else {
        0.0
    }
}
