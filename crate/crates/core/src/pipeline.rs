//! End-to-end model fitting: preprocessing, screening, penalized fit, refit.

use log::info;
use serde::{Deserialize, Serialize};

use crate::analyze::{refit_ols, OlsRefit};
use crate::error::{Error, Result};
use crate::genotype::{impute_missing, maf_filter, GenotypeMatrix};
use crate::penalized::{fit_model, FitOptions, PenalizedFit, PenaltySpec};
use crate::phenotype::Phenotype;
use crate::screening::{ts_sis, ScreenConfig, ScreenReport};
use crate::seeds::{self, stage};
use crate::term::InteractionCoding;

pub const DEFAULT_MAF_THRESHOLD: f64 = 0.10;

/// How to go from genotypes and a trait to a fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    /// `None` skips screening and the penalized fit (intercept and
    /// covariates only).
    pub screen: Option<ScreenConfig>,
    pub penalty: PenaltySpec,
    pub coding: InteractionCoding,
    pub fit: FitOptions,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            screen: Some(ScreenConfig::default()),
            penalty: PenaltySpec::scad(),
            coding: InteractionCoding::default(),
            fit: FitOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineRun {
    pub report: Option<ScreenReport>,
    pub fit: Option<PenalizedFit>,
    /// OLS on the terms the penalized fit kept.
    pub refit: OlsRefit,
}

/// Screen, fit and refit. Screening uses `seed` directly.
pub fn fit_pipeline(g: &GenotypeMatrix, pheno: &Phenotype, spec: &ModelSpec, seed: u64) -> Result<PipelineRun> {
    let Some(screen) = spec.screen else {
        let refit = refit_ols(g, pheno, &[], spec.coding)?;
        return Ok(PipelineRun { report: None, fit: None, refit });
    };
    let mut screen = screen;
    screen.coding = spec.coding;
    let report = ts_sis(g, pheno, &screen, seed)?;
    info!("screening kept {} terms", report.len());
    let fit = fit_model(g, pheno, &report.terms(), &spec.penalty, spec.coding, &spec.fit)?;
    info!("penalized fit kept {} terms (lambda {:?})", fit.df, fit.lambda_chosen);
    let refit = refit_ols(g, pheno, &fit.selected(), spec.coding)?;
    Ok(PipelineRun { report: Some(report), fit: Some(fit), refit })
}

/// What preprocessing changed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessing {
    pub imputed_calls: usize,
    pub maf_threshold: f64,
    pub snps_in: usize,
    pub snps_kept: usize,
    pub impute_seed: u64,
}

/// Impute missing calls from each SNP's observed frequencies, then drop SNPs
/// below the MAF threshold.
pub fn preprocess(g: &GenotypeMatrix, maf_threshold: f64, seed: u64) -> Result<(GenotypeMatrix, Preprocessing)> {
    let imputed_calls = (0..g.p()).map(|j| g.column(j).iter().filter(|&&c| c == crate::MISSING).count()).sum();
    let impute_seed = seeds::derive(seed, &[stage::IMPUTE]);
    let imputed = impute_missing(g, &mut seeds::rng(impute_seed))?;
    let filtered = maf_filter(&imputed, maf_threshold)?;
    if filtered.p() == 0 {
        return Err(Error::InvalidParameter(format!("no SNP has MAF >= {maf_threshold}")));
    }
    info!("imputed {imputed_calls} calls; kept {} of {} SNPs at MAF >= {maf_threshold}", filtered.p(), g.p());
    let info = Preprocessing { imputed_calls, maf_threshold, snps_in: g.p(), snps_kept: filtered.p(), impute_seed };
    Ok((filtered, info))
}
