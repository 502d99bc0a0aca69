use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Trait values and unpenalized covariates, rows aligned with the genotype
/// samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phenotype {
    pub y: Vec<f64>,
    /// Covariate columns, each of length n.
    pub covariates: Vec<Vec<f64>>,
    pub covariate_names: Vec<String>,
}

impl Phenotype {
    pub fn new(y: Vec<f64>, covariates: Vec<Vec<f64>>, covariate_names: Vec<String>) -> Result<Self> {
        if covariates.len() != covariate_names.len() {
            return Err(Error::Dimension(format!(
                "{} covariate columns but {} names",
                covariates.len(),
                covariate_names.len()
            )));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("trait values must be finite".into()));
        }
        for (c, name) in covariates.iter().zip(&covariate_names) {
            if c.len() != y.len() {
                return Err(Error::Dimension(format!("covariate {name} has {} rows, expected {}", c.len(), y.len())));
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter(format!("covariate {name} has non-finite values")));
            }
        }
        Ok(Self { y, covariates, covariate_names })
    }

    pub fn trait_only(y: Vec<f64>) -> Result<Self> {
        Self::new(y, Vec::new(), Vec::new())
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn q(&self) -> usize {
        self.covariates.len()
    }

    pub fn subset(&self, rows: &[usize]) -> Self {
        Phenotype {
            y: rows.iter().map(|&i| self.y[i]).collect(),
            covariates: self
                .covariates
                .iter()
                .map(|c| rows.iter().map(|&i| c[i]).collect())
                .collect(),
            covariate_names: self.covariate_names.clone(),
        }
    }
}
