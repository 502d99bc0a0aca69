//! Post-selection analysis: OLS refit, heritability and held-out validation.

use std::collections::BTreeMap;

use log::warn;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genotype::GenotypeMatrix;
use crate::phenotype::Phenotype;
use crate::pipeline::{fit_pipeline, ModelSpec};
use crate::seeds::{self, stage};
use crate::stats;
use crate::term::{term_column_centered_at, CodedGenotypes, EffectTerm, InteractionCoding, TermKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub estimate: f64,
    pub std_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermEstimate {
    pub term: EffectTerm,
    pub estimate: f64,
    pub std_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsRefit {
    pub coding: InteractionCoding,
    pub intercept: Estimate,
    pub covariates: Vec<(String, Estimate)>,
    pub terms: Vec<TermEstimate>,
    /// Root means of each kept term (for centered columns on new samples).
    pub root_means: Vec<(f64, Option<f64>)>,
    /// Terms dropped as collinear with earlier columns.
    pub dropped: Vec<EffectTerm>,
    pub rss: f64,
    pub df_resid: usize,
}

impl OlsRefit {
    pub fn predict(&self, g: &GenotypeMatrix, pheno: &Phenotype) -> Result<Vec<f64>> {
        if pheno.n() != g.n() || pheno.q() != self.covariates.len() {
            return Err(Error::Dimension("prediction data does not match the refit design".into()));
        }
        let mut out = vec![self.intercept.estimate; g.n()];
        for (col, (_, e)) in pheno.covariates.iter().zip(&self.covariates) {
            out.iter_mut().zip(col).for_each(|(o, x)| *o += e.estimate * x);
        }
        for (t, &means) in self.terms.iter().zip(&self.root_means) {
            let col = match self.coding {
                InteractionCoding::Centered => term_column_centered_at(g, &t.term, means)?,
                InteractionCoding::Raw => crate::term::term_column(g, &t.term)?,
            };
            out.iter_mut().zip(col).for_each(|(o, x)| *o += t.estimate * x);
        }
        Ok(out)
    }

    pub fn estimate(&self, t: &EffectTerm) -> Option<f64> {
        self.terms.iter().find(|e| e.term == *t).map(|e| e.estimate)
    }
}

/// OLS of the trait on intercept, covariates and the selected term columns.
/// Later columns collinear with earlier ones are dropped with a warning.
pub fn refit_ols(g: &GenotypeMatrix, pheno: &Phenotype, terms: &[EffectTerm], coding: InteractionCoding) -> Result<OlsRefit> {
    let n = g.n();
    if pheno.n() != n {
        return Err(Error::SampleMismatch(format!("{n} genotyped samples but {} trait values", pheno.n())));
    }
    let coded = CodedGenotypes::for_snps(g, terms.iter().flat_map(|t| t.snps()))?;
    let q = pheno.q();
    let mut cols = vec![vec![1.0; n]];
    cols.extend(pheno.covariates.iter().cloned());
    for t in terms {
        cols.push(coded.column(t, coding)?);
    }
    if cols.len() >= n {
        return Err(Error::RankDeficient(format!("{} columns for {n} samples", cols.len())));
    }
    let ls = stats::least_squares(&cols, &pheno.y)?;
    if ls.dropped.iter().any(|&i| i <= q) {
        return Err(Error::RankDeficient("intercept and covariates are collinear".into()));
    }
    let dropped: Vec<EffectTerm> = ls.dropped.iter().map(|&i| terms[i - q - 1]).collect();
    for t in &dropped {
        warn!("refit: dropped {t} (collinear with earlier columns)");
    }
    let est = |k: usize| Estimate { estimate: ls.coef[k], std_err: ls.std_err[k] };
    let mut out_terms = Vec::new();
    let mut root_means = Vec::new();
    for (k, &idx) in ls.kept.iter().enumerate().skip(q + 1) {
        let t = terms[idx - q - 1];
        out_terms.push(TermEstimate { term: t, estimate: ls.coef[k], std_err: ls.std_err[k] });
        root_means.push(coded.root_means(&t));
    }
    Ok(OlsRefit {
        coding,
        intercept: est(0),
        covariates: pheno.covariate_names.iter().cloned().zip((1..=q).map(est)).collect(),
        terms: out_terms,
        root_means,
        dropped,
        rss: ls.rss,
        df_resid: ls.df_resid,
    })
}

/// Additive and dominance variance of one locus with genotypic values
/// a (AA), d (Aa), −a (aa) under Hardy-Weinberg at allele frequency p_A.
fn main_variance_parts(a: f64, d: f64, p_a_upper: f64) -> (f64, f64) {
    let (pa, pb) = (p_a_upper, 1.0 - p_a_upper);
    let h = 2.0 * pa * pb;
    let alpha = a + (pb - pa) * d;
    (h * alpha * alpha, (h * d).powi(2))
}

/// Fraction of trait variance explained by one locus' additive and dominant
/// effects. `p_a_upper` is the frequency of the allele coded +1.
pub fn heritability_main(a: f64, d: f64, p_a_upper: f64, var_y: f64) -> Result<f64> {
    check_freq(p_a_upper)?;
    check_var(var_y)?;
    let (va, vd) = main_variance_parts(a, d, p_a_upper);
    Ok((va + vd) / var_y)
}

fn check_freq(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("allele frequency {p} must lie in (0, 1)")))
    }
}

fn check_var(v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("trait variance {v} must be positive")))
    }
}

/// Effects of a two-locus model on the ξ/ζ codings.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PairEffects {
    pub a1: f64,
    pub d1: f64,
    pub a2: f64,
    pub d2: f64,
    pub aa: f64,
    pub ad: f64,
    pub da: f64,
    pub dd: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpistaticVariance {
    /// Clamped at zero.
    pub h2: f64,
    /// Before clamping.
    pub raw: f64,
    /// Raw value below −1e-10.
    pub anomaly: bool,
}

/// HWE two-locus genotype frequencies ω and genotypic values g, both in the
/// order AABB, AABb, AAbb, AaBB, AaBb, Aabb, aaBB, aaBb, aabb.
pub fn omega_and_g(e: &PairEffects, p_a: f64, p_b: f64) -> ([f64; 9], [f64; 9]) {
    let f1 = [p_a * p_a, 2.0 * p_a * (1.0 - p_a), (1.0 - p_a).powi(2)];
    let f2 = [p_b * p_b, 2.0 * p_b * (1.0 - p_b), (1.0 - p_b).powi(2)];
    // ξ for AA, Aa, aa
    const XI: [f64; 3] = [1.0, 0.0, -1.0];
    let mut omega = [0.0; 9];
    let mut g = [0.0; 9];
    for r in 0..3 {
        for c in 0..3 {
            let (x1, x2) = (XI[r], XI[c]);
            let (z1, z2) = (1.0 - x1.abs(), 1.0 - x2.abs());
            omega[3 * r + c] = f1[r] * f2[c];
            g[3 * r + c] = e.a1 * x1
                + e.d1 * z1
                + e.a2 * x2
                + e.d2 * z2
                + e.aa * x1 * x2
                + e.ad * x1 * z2
                + e.da * z1 * x2
                + e.dd * z1 * z2;
        }
    }
    (omega, g)
}

/// Share of trait variance due to the interaction terms of one SNP pair:
/// total two-locus genetic variance ωᵀg² − (ωᵀg)² minus both loci's
/// main-effect variances.
pub fn heritability_epistatic(e: &PairEffects, p_a: f64, p_b: f64, var_y: f64) -> Result<EpistaticVariance> {
    check_freq(p_a)?;
    check_freq(p_b)?;
    check_var(var_y)?;
    let (omega, g) = omega_and_g(e, p_a, p_b);
    let mean: f64 = omega.iter().zip(&g).map(|(w, v)| w * v).sum();
    let second: f64 = omega.iter().zip(&g).map(|(w, v)| w * v * v).sum();
    let total = second - mean * mean;
    let (va1, vd1) = main_variance_parts(e.a1, e.d1, p_a);
    let (va2, vd2) = main_variance_parts(e.a2, e.d2, p_b);
    let raw = (total - va1 - vd1 - va2 - vd2) / var_y;
    let anomaly = raw < -1e-10;
    if anomaly {
        warn!("negative epistatic variance {raw:e}");
    }
    Ok(EpistaticVariance { h2: raw.max(0.0), raw, anomaly })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MainHeritability {
    pub snp: usize,
    pub name: String,
    /// Frequency of the allele coded +1.
    pub p_a_upper: f64,
    pub a: f64,
    pub d: f64,
    pub additive: f64,
    pub dominance: f64,
    pub h2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairHeritability {
    pub snps: (usize, usize),
    pub names: (String, String),
    pub p_a_upper: (f64, f64),
    pub effects: PairEffects,
    pub h2: f64,
    pub raw: f64,
    pub anomaly: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeritabilityReport {
    pub var_y: f64,
    pub main: Vec<MainHeritability>,
    pub epistatic: Vec<PairHeritability>,
    pub total_additive: f64,
    pub total_dominance: f64,
    pub total_epistatic: f64,
}

/// Heritabilities of every main-effect SNP and every interacting pair in a
/// raw-coded OLS refit.
pub fn heritability_report(g: &GenotypeMatrix, pheno: &Phenotype, refit: &OlsRefit) -> Result<HeritabilityReport> {
    if refit.coding != InteractionCoding::Raw {
        return Err(Error::InvalidParameter("heritability needs a refit on raw codings".into()));
    }
    let var_y = stats::variance(&pheno.y);
    let mut a = BTreeMap::new();
    let mut d = BTreeMap::new();
    let mut pairs: BTreeMap<(usize, usize), PairEffects> = BTreeMap::new();
    for t in &refit.terms {
        let (j, b) = (t.term.j(), t.estimate);
        match (t.term.kind(), t.term.j2()) {
            (TermKind::Additive, _) => {
                a.insert(j, b);
            }
            (TermKind::Dominant, _) => {
                d.insert(j, b);
            }
            (kind, Some(j2)) => {
                // orient so the pair key is (low, high)
                let (lo, hi, swapped) = if j < j2 { (j, j2, false) } else { (j2, j, true) };
                let e = pairs.entry((lo, hi)).or_default();
                match (kind, swapped) {
                    (TermKind::AA, _) => e.aa += b,
                    (TermKind::DD, _) => e.dd += b,
                    (TermKind::AD, false) | (TermKind::DA, true) => e.ad += b,
                    (TermKind::DA, false) | (TermKind::AD, true) => e.da += b,
                    _ => unreachable!(),
                }
            }
            _ => unreachable!("interaction without partner"),
        }
    }
    let upper = |j: usize| 1.0 - g.allele_frequency(j);
    let mut main = Vec::new();
    let snps: std::collections::BTreeSet<usize> = a.keys().chain(d.keys()).copied().collect();
    for j in snps {
        let (aj, dj) = (a.get(&j).copied().unwrap_or(0.0), d.get(&j).copied().unwrap_or(0.0));
        let p = upper(j);
        check_freq(p)?;
        check_var(var_y)?;
        let (va, vd) = main_variance_parts(aj, dj, p);
        main.push(MainHeritability {
            snp: j,
            name: g.snp(j).name.clone(),
            p_a_upper: p,
            a: aj,
            d: dj,
            additive: va / var_y,
            dominance: vd / var_y,
            h2: (va + vd) / var_y,
        });
    }
    let mut epistatic = Vec::new();
    for ((j1, j2), mut e) in pairs {
        e.a1 = a.get(&j1).copied().unwrap_or(0.0);
        e.d1 = d.get(&j1).copied().unwrap_or(0.0);
        e.a2 = a.get(&j2).copied().unwrap_or(0.0);
        e.d2 = d.get(&j2).copied().unwrap_or(0.0);
        let (p1, p2) = (upper(j1), upper(j2));
        let v = heritability_epistatic(&e, p1, p2, var_y)?;
        epistatic.push(PairHeritability {
            snps: (j1, j2),
            names: (g.snp(j1).name.clone(), g.snp(j2).name.clone()),
            p_a_upper: (p1, p2),
            effects: e,
            h2: v.h2,
            raw: v.raw,
            anomaly: v.anomaly,
        });
    }
    Ok(HeritabilityReport {
        var_y,
        total_additive: main.iter().map(|m| m.additive).sum(),
        total_dominance: main.iter().map(|m| m.dominance).sum(),
        total_epistatic: epistatic.iter().map(|e| e.h2).sum(),
        main,
        epistatic,
    })
}

/// mean_i |y_i − ŷ_i| / y_i. Truth values must be positive.
pub fn rmape(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    if y_true.len() != y_pred.len() || y_true.is_empty() {
        return Err(Error::Dimension(format!("{} truths vs {} predictions", y_true.len(), y_pred.len())));
    }
    if let Some(v) = y_true.iter().find(|v| !(**v > 0.0)) {
        return Err(Error::InvalidParameter(format!("relative error undefined for true value {v}")));
    }
    Ok(y_true.iter().zip(y_pred).map(|(y, p)| (y - p).abs() / y).sum::<f64>() / y_true.len() as f64)
}

/// Fraction of samples whose indicator `value > threshold` agrees.
pub fn classification_accuracy(y_true: &[f64], y_pred: &[f64], threshold: f64) -> Result<f64> {
    if y_true.len() != y_pred.len() || y_true.is_empty() {
        return Err(Error::Dimension(format!("{} truths vs {} predictions", y_true.len(), y_pred.len())));
    }
    let agree = y_true.iter().zip(y_pred).filter(|(y, p)| (**y > threshold) == (**p > threshold)).count();
    Ok(agree as f64 / y_true.len() as f64)
}

pub const OBESITY_THRESHOLD: f64 = 30.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitResult {
    pub split: usize,
    pub train: usize,
    pub validation: usize,
    pub selected: usize,
    pub rmape: f64,
    pub ca: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub splits: Vec<SplitResult>,
    pub rmape_mean: f64,
    pub rmape_sd: f64,
    pub ca_mean: f64,
    pub ca_sd: f64,
}

/// Training rows of split `s`: a seeded shuffle, first ⌊fraction·n⌉ rows.
pub fn split_indices(n: usize, train_fraction: f64, seed: u64, s: usize) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!("train fraction {train_fraction} outside (0, 1)")));
    }
    let k = (train_fraction * n as f64).round() as usize;
    if k == 0 || k >= n {
        return Err(Error::InvalidParameter(format!("split of {n} samples leaves one side empty")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seeds::rng_at(seed, &[stage::SPLIT, s as u64]));
    let mut train = idx[..k].to_vec();
    let mut val = idx[k..].to_vec();
    train.sort_unstable();
    val.sort_unstable();
    Ok((train, val))
}

/// Fit the model on random training subsets and score predictions on the
/// held-out rows. Predictions come from the OLS refit of the selected terms.
pub fn validate_split(
    g: &GenotypeMatrix,
    pheno: &Phenotype,
    train_fraction: f64,
    spec: &ModelSpec,
    splits: usize,
    seed: u64,
) -> Result<ValidationReport> {
    if splits == 0 {
        return Err(Error::InvalidParameter("need at least one split".into()));
    }
    let results: Vec<SplitResult> = (0..splits)
        .into_par_iter()
        .map(|s| -> Result<SplitResult> {
            let (train, val) = split_indices(g.n(), train_fraction, seed, s)?;
            let (gt, pt) = (g.subset_samples(&train)?, pheno.subset(&train));
            let (gv, pv) = (g.subset_samples(&val)?, pheno.subset(&val));
            let run = fit_pipeline(&gt, &pt, spec, seeds::derive(seed, &[stage::PIPELINE, s as u64]))?;
            let pred = run.refit.predict(&gv, &pv)?;
            Ok(SplitResult {
                split: s,
                train: train.len(),
                validation: val.len(),
                selected: run.refit.terms.len(),
                rmape: rmape(&pv.y, &pred)?,
                ca: classification_accuracy(&pv.y, &pred, OBESITY_THRESHOLD)?,
            })
        })
        .collect::<Result<_>>()?;
    let r: Vec<f64> = results.iter().map(|s| s.rmape).collect();
    let c: Vec<f64> = results.iter().map(|s| s.ca).collect();
    let sd = |v: &[f64]| if v.len() > 1 { stats::variance(v).sqrt() } else { 0.0 };
    Ok(ValidationReport {
        rmape_mean: stats::mean(&r),
        rmape_sd: sd(&r),
        ca_mean: stats::mean(&c),
        ca_sd: sd(&c),
        splits: results,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genotype::SnpInfo;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_genotypes(seed: u64, n: usize, p: usize) -> GenotypeMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let calls = (0..n * p).map(|_| rng.random_range(0..3u8)).collect();
        let snps = (0..p).map(|j| SnpInfo { name: format!("s{j}"), chromosome: 1, maf: 0.0 }).collect();
        GenotypeMatrix::new((0..n).map(|i| format!("i{i}")).collect(), snps, calls).unwrap()
    }

    #[test]
    fn refit_recovers_noiseless_coefficients() {
        let g = random_genotypes(1, 80, 4);
        let terms = vec![
            EffectTerm::additive(0),
            EffectTerm::dominant(1),
            EffectTerm::interaction(TermKind::AD, 0, 2).unwrap(),
        ];
        let cov: Vec<f64> = (0..80).map(|i| (i % 7) as f64).collect();
        let cols: Vec<Vec<f64>> = terms.iter().map(|t| crate::term::term_column(&g, t).unwrap()).collect();
        let y: Vec<f64> = (0..80).map(|i| 2.0 + 0.3 * cov[i] + 1.5 * cols[0][i] - 0.7 * cols[1][i] + 0.25 * cols[2][i]).collect();
        let pheno = Phenotype::new(y, vec![cov], vec!["c".into()]).unwrap();
        let r = refit_ols(&g, &pheno, &terms, InteractionCoding::Raw).unwrap();
        assert!((r.intercept.estimate - 2.0).abs() < 1e-10);
        assert!((r.covariates[0].1.estimate - 0.3).abs() < 1e-10);
        for (e, want) in r.terms.iter().zip([1.5, -0.7, 0.25]) {
            assert!((e.estimate - want).abs() < 1e-10);
        }
        let empty = refit_ols(&g, &pheno, &[], InteractionCoding::Raw).unwrap();
        assert!(empty.terms.is_empty());
    }

    #[test]
    fn refit_drops_duplicate_column() {
        let g = random_genotypes(2, 50, 3);
        let y: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let pheno = Phenotype::trait_only(y).unwrap();
        // AA(0,0) is not allowed, so use a column that duplicates additive(1)
        // through a renamed SNP: refit the same term twice.
        let terms = [EffectTerm::additive(1), EffectTerm::additive(1)];
        let r = refit_ols(&g, &pheno, &terms, InteractionCoding::Raw).unwrap();
        assert_eq!(r.terms.len(), 1);
        assert_eq!(r.dropped, vec![EffectTerm::additive(1)]);
    }

    #[test]
    fn main_heritability_examples() {
        assert_eq!(heritability_main(0.0, 0.0, 0.3, 2.0).unwrap(), 0.0);
        assert!((heritability_main(1.0, 0.0, 0.5, 1.0).unwrap() - 0.5).abs() < 1e-15);
        // variance of a·ξ + d·ζ by enumeration
        let (a, d, p) = (1.0, 1.0, 0.8);
        let f = [p * p, 2.0 * p * (1.0 - p), (1.0 - p) * (1.0 - p)];
        let v = [a, d, -a];
        let m: f64 = f.iter().zip(v).map(|(f, v)| f * v).sum();
        let var: f64 = f.iter().zip(v).map(|(f, v)| f * (v - m) * (v - m)).sum();
        assert!((heritability_main(a, d, p, 1.0).unwrap() - var).abs() < 1e-14);
        assert!((var - 0.1536).abs() < 1e-12);
    }

    #[test]
    fn table6_additive_ratio() {
        let v1 = heritability_main(-0.82, 0.0, 0.49, 1.0).unwrap();
        let v2 = heritability_main(0.37, 0.0, 0.38, 1.0).unwrap();
        assert!((v1 - 0.3361).abs() < 1e-4 && (v2 - 0.0645).abs() < 1e-4);
        let ratio = v1 / v2;
        assert!((ratio / (1.92 / 0.37) - 1.0).abs() < 0.02, "{ratio}");
    }

    #[test]
    fn zero_interactions_give_zero() {
        let e = PairEffects { a1: 0.7, d1: -1.2, a2: 2.0, d2: 0.4, ..Default::default() };
        for (pa, pb) in [(0.5, 0.5), (0.1, 0.8), (0.33, 0.61)] {
            assert!(heritability_epistatic(&e, pa, pb, 1.0).unwrap().raw.abs() < 1e-10);
        }
    }

    #[test]
    fn rmape_and_ca_examples() {
        assert_eq!(rmape(&[10.0, 20.0], &[10.0, 20.0]).unwrap(), 0.0);
        assert!((rmape(&[10.0, 20.0], &[9.0, 22.0]).unwrap() - 0.1).abs() < 1e-15);
        assert!(rmape(&[0.0, 1.0], &[0.0, 1.0]).is_err());
        assert_eq!(classification_accuracy(&[29.0, 31.0], &[29.5, 35.0], 30.0).unwrap(), 1.0);
        assert_eq!(classification_accuracy(&[29.0, 31.0], &[31.0, 29.0], 30.0).unwrap(), 0.0);
        assert_eq!(classification_accuracy(&[30.0], &[30.0], 30.0).unwrap(), 1.0);
    }

    #[test]
    fn split_indices_are_reproducible() {
        let (a, b) = split_indices(977, 900.0 / 977.0, 5, 3).unwrap();
        assert_eq!((a.len(), b.len()), (900, 77));
        assert_eq!(split_indices(977, 900.0 / 977.0, 5, 3).unwrap(), (a.clone(), b));
        assert_ne!(split_indices(977, 900.0 / 977.0, 5, 4).unwrap().0, a);
        assert!(split_indices(3, 0.1, 1, 0).is_err());
    }

    /// Random pair models, checked against an independent enumeration of the
    /// 3×3 genotype table from allele draws rather than ω/g vectors.
    #[test]
    fn epistatic_matches_cell_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..1000 {
            let mut u = || rng.random_range(-2.0..2.0);
            let e = PairEffects { a1: u(), d1: u(), a2: u(), d2: u(), aa: u(), ad: u(), da: u(), dd: u() };
            let (pa, pb) = (rng.random_range(0.05..0.95), rng.random_range(0.05..0.95));
            // count copies of the +1 allele: 2 → ξ = 1, 1 → 0, 0 → −1
            let geno = |p: f64| [(2, (1.0 - p) * (1.0 - p)), (1, 2.0 * p * (1.0 - p)), (0, p * p)].map(|(k, f)| (k as f64 - 1.0, f));
            let (ga, gb) = (geno(1.0 - pa), geno(1.0 - pb));
            let value = |x1: f64, x2: f64, inter: bool| {
                let (z1, z2) = (1.0 - x1.abs(), 1.0 - x2.abs());
                let main = e.a1 * x1 + e.d1 * z1 + e.a2 * x2 + e.d2 * z2;
                let epi = e.aa * x1 * x2 + e.ad * x1 * z2 + e.da * z1 * x2 + e.dd * z1 * z2;
                if inter { main + epi } else { main }
            };
            let var = |inter: bool| {
                let cells: Vec<(f64, f64)> =
                    ga.iter().flat_map(|&(x1, f1)| gb.iter().map(move |&(x2, f2)| (f1 * f2, value(x1, x2, inter)))).collect();
                let m: f64 = cells.iter().map(|(w, v)| w * v).sum();
                cells.iter().map(|(w, v)| w * (v - m) * (v - m)).sum::<f64>()
            };
            let want = var(true) - var(false);
            let got = heritability_epistatic(&e, pa, pb, 1.0).unwrap().raw;
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn additive_only_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(78);
        for _ in 0..200 {
            let (a1, a2, i) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            let (p1, p2): (f64, f64) = (rng.random_range(0.05..0.95), rng.random_range(0.05..0.95));
            let (m1, m2) = (2.0 * p1 - 1.0, 2.0 * p2 - 1.0);
            let (v1, v2) = (2.0 * p1 * (1.0 - p1), 2.0 * p2 * (1.0 - p2));
            let want = i * i * ((1.0 - v1) * (1.0 - v2) - m1 * m1 * m2 * m2) + 2.0 * i * (a1 * v1 * m2 + a2 * v2 * m1);
            let e = PairEffects { a1, a2, aa: i, ..Default::default() };
            let got = heritability_epistatic(&e, p1, p2, 1.0).unwrap();
            assert!((got.raw - want).abs() < 1e-12);
        }
    }

    /// Total genetic variance against a 10⁶-draw Monte Carlo estimate.
    #[test]
    fn genetic_variance_monte_carlo() {
        let e = PairEffects { a1: 0.8, d1: -0.5, a2: 1.1, d2: 0.3, aa: 0.9, ad: -0.6, da: 0.4, dd: 1.2 };
        let (pa, pb) = (0.65, 0.3);
        let (omega, gv) = omega_and_g(&e, pa, pb);
        let mean: f64 = omega.iter().zip(&gv).map(|(w, v)| w * v).sum();
        let total: f64 = omega.iter().zip(&gv).map(|(w, v)| w * (v - mean).powi(2)).sum();
        let (va1, vd1) = main_variance_parts(e.a1, e.d1, pa);
        let (va2, vd2) = main_variance_parts(e.a2, e.d2, pb);
        let h = heritability_epistatic(&e, pa, pb, 1.0).unwrap().raw;
        assert!((h + va1 + vd1 + va2 + vd2 - total).abs() < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(79);
        let xi = |rng: &mut ChaCha8Rng, p: f64| (rng.random_bool(p) as i32 + rng.random_bool(p) as i32 - 1) as f64;
        let draws = 1_000_000;
        let vals: Vec<f64> = (0..draws)
            .map(|_| {
                let (x1, x2) = (xi(&mut rng, pa), xi(&mut rng, pb));
                let (z1, z2) = (1.0 - x1.abs(), 1.0 - x2.abs());
                e.a1 * x1 + e.d1 * z1 + e.a2 * x2 + e.d2 * z2 + e.aa * x1 * x2 + e.ad * x1 * z2 + e.da * z1 * x2 + e.dd * z1 * z2
            })
            .collect();
        let m = stats::mean(&vals);
        let var = stats::variance(&vals);
        let m4 = vals.iter().map(|v| (v - m).powi(4)).sum::<f64>() / draws as f64;
        let se = ((m4 - var * var) / draws as f64).sqrt();
        assert!((var - total).abs() < 3.0 * se, "{var} vs {total} (se {se})");
    }

    #[test]
    fn refit_standard_errors_cover() {
        let g = random_genotypes(5, 200, 3);
        let terms = [EffectTerm::additive(0), EffectTerm::dominant(2)];
        let cols: Vec<Vec<f64>> = terms.iter().map(|t| crate::term::term_column(&g, t).unwrap()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut covered = 0;
        for _ in 0..100 {
            let y: Vec<f64> = (0..200)
                .map(|i| 1.0 + 0.5 * cols[0][i] - 0.4 * cols[1][i] + rng.sample::<f64, _>(rand_distr::StandardNormal))
                .collect();
            let r = refit_ols(&g, &Phenotype::trait_only(y).unwrap(), &terms, InteractionCoding::Raw).unwrap();
            let t = &r.terms[0];
            if (t.estimate - 0.5).abs() < 3.0 * t.std_err {
                covered += 1;
            }
        }
        assert!(covered >= 90, "{covered}/100");
    }

    #[test]
    fn heritability_report_pairs_orientation() {
        let g = random_genotypes(8, 300, 3);
        let terms = [
            EffectTerm::additive(0),
            EffectTerm::interaction(TermKind::AD, 2, 0).unwrap(),
            EffectTerm::interaction(TermKind::AD, 0, 2).unwrap(),
        ];
        let cols: Vec<Vec<f64>> = terms.iter().map(|t| crate::term::term_column(&g, t).unwrap()).collect();
        let y: Vec<f64> = (0..300).map(|i| 0.7 * cols[0][i] + 0.3 * cols[1][i] + 0.2 * cols[2][i]).collect();
        let ph = Phenotype::trait_only(y).unwrap();
        let r = refit_ols(&g, &ph, &terms, InteractionCoding::Raw).unwrap();
        let h = heritability_report(&g, &ph, &r).unwrap();
        assert_eq!(h.epistatic.len(), 1);
        let e = h.epistatic[0].effects;
        // AD(2,0) is ξ_2 ζ_0, i.e. DA in (0, 2) orientation
        assert!((e.da - 0.3).abs() < 1e-8 && (e.ad - 0.2).abs() < 1e-8 && (e.a1 - 0.7).abs() < 1e-8);
        let centered = refit_ols(&g, &ph, &terms, InteractionCoding::Centered).unwrap();
        assert!(heritability_report(&g, &ph, &centered).is_err());
    }

    #[test]
    fn validation_of_constant_trait_is_perfect() {
        let g = random_genotypes(9, 100, 5);
        let ph = Phenotype::trait_only(vec![35.0; 100]).unwrap();
        let spec = ModelSpec { screen: None, ..ModelSpec::default() };
        let v = validate_split(&g, &ph, 0.8, &spec, 5, 1).unwrap();
        assert!(v.rmape_mean.abs() < 1e-12);
        assert_eq!(v.ca_mean, 1.0);
    }

    #[test]
    fn validation_error_grows_with_noise() {
        use crate::simulate::{gen_genotypes, gen_phenotype, MafMode, SimConfig};
        let cfg = SimConfig::standard(300, 2300, 0.5, 1.0, MafMode::homogeneous(), 21).unwrap();
        let g = gen_genotypes(&cfg).unwrap();
        let means: Vec<f64> = [8.0, 6.0, 2.0]
            .iter()
            .map(|&s2| {
                let mut ph = gen_phenotype(&g, &cfg.truth, s2, cfg.coding, 21).unwrap();
                ph.y.iter_mut().for_each(|v| *v += 30.0);
                validate_split(&g, &ph, 0.8, &ModelSpec::default(), 20, 4).unwrap().rmape_mean
            })
            .collect();
        assert!(means[0] > means[1] && means[1] > means[2], "{means:?}");
    }

    proptest! {
        #[test]
        fn main_heritability_allele_label_symmetry(a in -3.0..3.0f64, d in -3.0..3.0f64, p in 0.01..0.99f64) {
            let h = heritability_main(a, d, p, 1.7).unwrap();
            let swapped = heritability_main(-a, d, 1.0 - p, 1.7).unwrap();
            prop_assert!((h - swapped).abs() < 1e-12 * h.max(1.0));
        }

        #[test]
        fn metrics_bounds(y in proptest::collection::vec(0.1..100.0f64, 1..20), noise in -5.0..5.0f64) {
            let pred: Vec<f64> = y.iter().map(|v| v + noise).collect();
            let r = rmape(&y, &pred).unwrap();
            prop_assert!(r >= 0.0);
            if noise.abs() > 1e-9 {
                prop_assert!(r > 0.0);
            }
            let c = classification_accuracy(&y, &pred, 30.0).unwrap();
            prop_assert!((0.0..=1.0).contains(&c));
        }
    }
}
