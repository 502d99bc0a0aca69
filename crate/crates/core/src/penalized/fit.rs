//! Penalized fit of the screened model.
//!
//! The intercept and covariates are projected out of the trait and of every
//! screened column, the residualized columns are standardized, and the λ
//! path runs on that design. Coefficients are mapped back to the raw term
//! columns and the unpenalized part is recovered by least squares on the
//! remainder.

use serde::{Deserialize, Serialize};

use super::lasso::{CdOptions, Design};
use super::path::{bic_select, BicPoint};
use super::scad::{PenaltyKind, PenaltySpec};
use crate::error::{Error, Result};
use crate::genotype::GenotypeMatrix;
use crate::phenotype::Phenotype;
use crate::stats::{self, Projector};
use crate::term::{term_column_centered_at, term_column_with, CodedGenotypes, EffectTerm, InteractionCoding};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Maximum design width as a multiple of n.
    pub width_factor: usize,
    pub cd: CdOptionsSerde,
}

/// Serializable copy of the coordinate-descent settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdOptionsSerde {
    pub tol: f64,
    pub max_sweeps: usize,
}

impl From<CdOptionsSerde> for CdOptions {
    fn from(c: CdOptionsSerde) -> Self {
        CdOptions { tol: c.tol, max_sweeps: c.max_sweeps }
    }
}

impl Default for FitOptions {
    fn default() -> Self {
        let cd = CdOptions::default();
        FitOptions { width_factor: 10, cd: CdOptionsSerde { tol: cd.tol, max_sweeps: cd.max_sweeps } }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenalizedFit {
    pub penalty: PenaltyKind,
    pub coding: InteractionCoding,
    /// Terms entering the path, in design order.
    pub terms: Vec<EffectTerm>,
    /// Coefficients on the raw term columns.
    pub coefficients: Vec<f64>,
    /// Root-coding sample means for each term, used to rebuild centered
    /// interaction columns on new samples.
    pub root_means: Vec<(f64, Option<f64>)>,
    pub intercept: f64,
    pub covariate_names: Vec<String>,
    pub covariate_coefs: Vec<f64>,
    pub lambda_chosen: Option<f64>,
    pub df: usize,
    pub bic_path: Vec<BicPoint>,
    pub lla_iterations: usize,
    pub converged: bool,
    pub lla_monotone: bool,
    /// Screened terms with no variation left after removing covariates.
    pub dropped: Vec<EffectTerm>,
}

impl PenalizedFit {
    /// Terms with nonzero coefficients.
    pub fn selected(&self) -> Vec<EffectTerm> {
        self.terms
            .iter()
            .zip(&self.coefficients)
            .filter(|(_, &b)| b != 0.0)
            .map(|(t, _)| *t)
            .collect()
    }

    /// Fitted values on (possibly new) samples.
    pub fn predict(&self, g: &GenotypeMatrix, pheno: &Phenotype) -> Result<Vec<f64>> {
        let n = g.n();
        if pheno.n() != n || pheno.q() != self.covariate_coefs.len() {
            return Err(Error::Dimension(format!(
                "prediction data has {} samples and {} covariates; expected {n} and {}",
                pheno.n(),
                pheno.q(),
                self.covariate_coefs.len()
            )));
        }
        let mut out = vec![self.intercept; n];
        for (cov, &c) in pheno.covariates.iter().zip(&self.covariate_coefs) {
            out.iter_mut().zip(cov).for_each(|(o, v)| *o += c * v);
        }
        for ((t, &b), &means) in self.terms.iter().zip(&self.coefficients).zip(&self.root_means) {
            if b == 0.0 {
                continue;
            }
            let col = match self.coding {
                InteractionCoding::Centered => term_column_centered_at(g, t, means)?,
                InteractionCoding::Raw => term_column_with(g, t, InteractionCoding::Raw)?,
            };
            out.iter_mut().zip(col).for_each(|(o, x)| *o += b * x);
        }
        Ok(out)
    }
}

/// Fit the penalized model on the given screened terms.
pub fn fit_model(
    g: &GenotypeMatrix,
    pheno: &Phenotype,
    terms: &[EffectTerm],
    penalty: &PenaltySpec,
    coding: InteractionCoding,
    opts: &FitOptions,
) -> Result<PenalizedFit> {
    penalty.validate()?;
    let n = g.n();
    if pheno.n() != n {
        return Err(Error::SampleMismatch(format!("{n} genotyped samples but {} trait values", pheno.n())));
    }
    let limit = opts.width_factor * n;
    if terms.len() > limit {
        return Err(Error::DesignTooWide { columns: terms.len(), limit });
    }
    let coded = CodedGenotypes::for_snps(g, terms.iter().flat_map(|t| t.snps()))?;

    let mut base = vec![vec![1.0; n]];
    base.extend(pheno.covariates.iter().cloned());
    let proj = Projector::new(&base);
    let mut y = pheno.y.clone();
    proj.residualize(&mut y);

    let mut kept = Vec::new();
    let mut raw = Vec::new();
    let mut std_cols = Vec::new();
    let mut scales = Vec::new();
    let mut dropped = Vec::new();
    for t in terms {
        let col = coded.column(t, coding)?;
        let mut r = col.clone();
        proj.residualize(&mut r);
        match stats::standardize(&r) {
            Ok((z, s)) => {
                kept.push(*t);
                raw.push(col);
                std_cols.push(z);
                scales.push(s.sd);
            }
            Err(Error::ZeroVariance) => dropped.push(*t),
            Err(e) => return Err(e),
        }
    }

    let (coef, lambda, df, bic_path, lla_iterations, converged, lla_monotone) = if kept.is_empty() {
        (Vec::new(), None, 0, Vec::new(), 0, true, true)
    } else {
        let design = Design::new(n, std_cols)?;
        let fit = bic_select(&design, &y, penalty, &opts.cd.into())?;
        let coef: Vec<f64> = fit.beta.iter().zip(&scales).map(|(b, s)| b / s).collect();
        (coef, Some(fit.lambda), fit.df, fit.path, fit.lla_iterations, fit.converged, fit.lla_monotone)
    };

    // unpenalized part: least squares of y − Σ b·x on [1, covariates]
    let mut rest = pheno.y.clone();
    for (col, &b) in raw.iter().zip(&coef) {
        if b != 0.0 {
            rest.iter_mut().zip(col).for_each(|(r, x)| *r -= b * x);
        }
    }
    let ls = stats::least_squares(&base, &rest)?;
    if !ls.dropped.is_empty() {
        return Err(Error::RankDeficient("covariates are collinear with each other or the intercept".into()));
    }
    let root_means = kept.iter().map(|t| coded.root_means(t)).collect();
    Ok(PenalizedFit {
        penalty: penalty.kind,
        coding,
        terms: kept,
        coefficients: coef,
        root_means,
        intercept: ls.coef[0],
        covariate_names: pheno.covariate_names.clone(),
        covariate_coefs: ls.coef[1..].to_vec(),
        lambda_chosen: lambda,
        df,
        bic_path,
        lla_iterations,
        converged,
        lla_monotone,
        dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genotype::SnpInfo;
    use crate::term::TermKind;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_genotypes(seed: u64, n: usize, p: usize) -> GenotypeMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let calls = (0..n * p).map(|_| rng.random_range(0..3u8)).collect();
        let snps = (0..p).map(|j| SnpInfo { name: format!("s{j}"), chromosome: 1, maf: 0.0 }).collect();
        GenotypeMatrix::new((0..n).map(|i| format!("i{i}")).collect(), snps, calls).unwrap()
    }

    fn truth() -> Vec<(EffectTerm, f64)> {
        vec![
            (EffectTerm::additive(0), 1.0),
            (EffectTerm::dominant(1), -1.0),
            (EffectTerm::additive(2), 1.0),
            (EffectTerm::interaction(TermKind::AA, 0, 3).unwrap(), 1.0),
            (EffectTerm::interaction(TermKind::DD, 1, 4).unwrap(), 1.0),
            (EffectTerm::interaction(TermKind::AD, 2, 5).unwrap(), -1.0),
        ]
    }

    #[test]
    fn exact_truth_recovered_with_correct_signs() {
        let g = random_genotypes(11, 400, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let coding = InteractionCoding::Centered;
        let mut y: Vec<f64> = (0..400).map(|_| 0.1 * Distribution::<f64>::sample(&StandardNormal, &mut rng) + 3.0).collect();
        for (t, b) in truth() {
            let col = term_column_with(&g, &t, coding).unwrap();
            y.iter_mut().zip(col).for_each(|(v, x)| *v += b * x);
        }
        let pheno = Phenotype::trait_only(y).unwrap();
        let terms: Vec<EffectTerm> = truth().iter().map(|(t, _)| *t).collect();
        let fit = fit_model(&g, &pheno, &terms, &PenaltySpec::scad(), coding, &FitOptions::default()).unwrap();
        assert_eq!(fit.df, 6);
        for ((_, b), est) in truth().iter().zip(&fit.coefficients) {
            assert!(est.signum() == b.signum() && (est - b).abs() < 0.1, "{est} vs {b}");
        }
        assert!((fit.intercept - 3.0).abs() < 0.1);
    }

    #[test]
    fn empty_screen_fits_intercept_and_covariates() {
        let g = random_genotypes(1, 30, 3);
        let cov: Vec<f64> = (0..30).map(|i| i as f64).collect();
        let y: Vec<f64> = cov.iter().map(|c| 2.0 + 0.5 * c).collect();
        let pheno = Phenotype::new(y, vec![cov], vec!["age".into()]).unwrap();
        let fit = fit_model(&g, &pheno, &[], &PenaltySpec::scad(), InteractionCoding::Raw, &FitOptions::default()).unwrap();
        assert!(fit.terms.is_empty() && fit.lambda_chosen.is_none());
        assert!((fit.intercept - 2.0).abs() < 1e-10 && (fit.covariate_coefs[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn too_wide_design_is_rejected() {
        let g = random_genotypes(2, 3, 40);
        let terms: Vec<EffectTerm> = (0..31).map(EffectTerm::additive).collect();
        let pheno = Phenotype::trait_only(vec![1.0, 2.0, 4.0]).unwrap();
        let err = fit_model(&g, &pheno, &terms, &PenaltySpec::scad(), InteractionCoding::Raw, &FitOptions::default());
        assert!(matches!(err, Err(Error::DesignTooWide { columns: 31, limit: 30 })));
    }

    /// Predictions from the back-transformed coefficients equal the fitted
    /// values of the standardized problem.
    #[test]
    fn back_transform_reproduces_standardized_fit() {
        let g = random_genotypes(3, 120, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let cov: Vec<f64> = (0..120).map(|_| StandardNormal.sample(&mut rng)).collect();
        let terms: Vec<EffectTerm> = (0..8)
            .map(EffectTerm::additive)
            .chain([EffectTerm::interaction(TermKind::DA, 2, 6).unwrap()])
            .collect();
        let x0 = term_column_with(&g, &terms[0], InteractionCoding::Centered).unwrap();
        let y: Vec<f64> = (0..120)
            .map(|i| 1.0 + 0.8 * x0[i] - 0.4 * cov[i] + Distribution::<f64>::sample(&StandardNormal, &mut rng))
            .collect();
        let pheno = Phenotype::new(y.clone(), vec![cov.clone()], vec!["c".into()]).unwrap();
        for penalty in [PenaltySpec::scad(), PenaltySpec::lasso()] {
            let fit = fit_model(&g, &pheno, &terms, &penalty, InteractionCoding::Centered, &FitOptions::default()).unwrap();
            let pred = fit.predict(&g, &pheno).unwrap();

            // independent reconstruction on the standardized scale
            let base = vec![vec![1.0; 120], cov.clone()];
            let proj = Projector::new(&base);
            let mut yr = y.clone();
            proj.residualize(&mut yr);
            let mut fitted_r = vec![0.0; 120];
            for (t, &b) in fit.terms.iter().zip(&fit.coefficients) {
                let mut c = term_column_with(&g, t, InteractionCoding::Centered).unwrap();
                proj.residualize(&mut c);
                let (z, s) = stats::standardize(&c).unwrap();
                fitted_r.iter_mut().zip(z).for_each(|(f, v)| *f += b * s.sd * v);
            }
            // y − pred must equal the standardized-problem residual
            for i in 0..120 {
                let a = y[i] - pred[i];
                let b = yr[i] - fitted_r[i];
                assert!((a - b).abs() < 1e-10, "{a} vs {b}");
            }
        }
    }
}
