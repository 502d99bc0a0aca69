//! Synthetic genotype/trait generation and power/FPR scoring.
//!
//! Latent liabilities follow a stationary AR(1) Gaussian along the genome;
//! each is cut at two quantiles into the three genotype classes so that
//! calls are in Hardy-Weinberg proportions at the target MAF.

use std::collections::HashSet;
use std::time::Instant;

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::genotype::{GenotypeMatrix, SnpInfo};
use crate::penalized::{fit_model, FitOptions, PenaltySpec};
use crate::phenotype::Phenotype;
use crate::screening::{ts_sis, ScreenConfig};
use crate::seeds::{self, stage};
use crate::stats;
use crate::term::{term_column_with, EffectTerm, InteractionCoding, TermKind};

pub const NUM_CHROMOSOMES: usize = 23;
pub const HETEROGENEOUS_MAFS: [f64; 3] = [0.5, 0.35, 0.2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MafMode {
    Homogeneous(f64),
    /// Each SNP draws its MAF uniformly from the listed values.
    Heterogeneous(Vec<f64>),
    /// One MAF per SNP.
    Custom(Vec<f64>),
}

impl MafMode {
    pub fn homogeneous() -> Self {
        MafMode::Homogeneous(0.5)
    }

    pub fn heterogeneous() -> Self {
        MafMode::Heterogeneous(HETEROGENEOUS_MAFS.to_vec())
    }
}

/// Planted effects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTruth {
    pub effects: Vec<(EffectTerm, f64)>,
}

impl SimTruth {
    pub fn new(effects: Vec<(EffectTerm, f64)>) -> Result<Self> {
        if let Some((t, b)) = effects.iter().find(|(_, b)| !(b.is_finite() && *b != 0.0)) {
            return Err(Error::InvalidParameter(format!("effect of {t} is {b}; must be finite and nonzero")));
        }
        let distinct: HashSet<_> = effects.iter().map(|(t, _)| *t).collect();
        if distinct.len() != effects.len() {
            return Err(Error::InvalidParameter("truth lists a term twice".into()));
        }
        Ok(SimTruth { effects })
    }

    /// Three main effects and three interactions anchored at the first SNP
    /// of chromosomes 1, 2, 3, 11 and 12 and the second SNP of chromosome 2,
    /// all with effect 1.
    pub fn table1(chromosome_sizes: &[usize]) -> Result<Self> {
        let first = chromosome_starts(chromosome_sizes);
        let at = |c: usize, pos: usize| -> Result<usize> {
            let size = *chromosome_sizes
                .get(c - 1)
                .ok_or_else(|| Error::InvalidParameter(format!("no chromosome {c}")))?;
            if pos > size {
                return Err(Error::InvalidParameter(format!("chromosome {c} has fewer than {pos} SNPs")));
            }
            Ok(first[c - 1] + pos - 1)
        };
        let (c1, c2, c3) = (at(1, 1)?, at(2, 1)?, at(3, 1)?);
        SimTruth::new(vec![
            (EffectTerm::additive(c1), 1.0),
            (EffectTerm::dominant(c2), 1.0),
            (EffectTerm::additive(c3), 1.0),
            (EffectTerm::interaction(TermKind::AA, c1, at(11, 1)?)?, 1.0),
            (EffectTerm::interaction(TermKind::DD, c2, at(2, 2)?)?, 1.0),
            (EffectTerm::interaction(TermKind::DD, c2, at(12, 1)?)?, 1.0),
        ])
    }

    pub fn terms(&self) -> Vec<EffectTerm> {
        self.effects.iter().map(|(t, _)| *t).collect()
    }

    pub fn len(&self) -> usize {
        self.effects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.effects.is_empty()
    }
}

/// Split p SNPs over `k` chromosomes as evenly as possible, extra SNPs going
/// to the lowest-numbered chromosomes.
pub fn even_chromosome_sizes(p: usize, k: usize) -> Vec<usize> {
    (0..k).map(|c| p / k + usize::from(c < p % k)).collect()
}

fn chromosome_starts(sizes: &[usize]) -> Vec<usize> {
    sizes
        .iter()
        .scan(0, |acc, &s| {
            let start = *acc;
            *acc += s;
            Some(start)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    pub p: usize,
    pub rho: f64,
    pub sigma2: f64,
    pub maf: MafMode,
    pub chromosome_sizes: Vec<usize>,
    pub truth: SimTruth,
    pub coding: InteractionCoding,
    pub seed: u64,
}

impl SimConfig {
    /// Paper-style design: even chromosome split and the six planted terms.
    pub fn standard(n: usize, p: usize, rho: f64, sigma2: f64, maf: MafMode, seed: u64) -> Result<Self> {
        let chromosome_sizes = even_chromosome_sizes(p, NUM_CHROMOSOMES);
        let truth = SimTruth::table1(&chromosome_sizes)?;
        let cfg = SimConfig { n, p, rho, sigma2, maf, chromosome_sizes, truth, coding: InteractionCoding::default(), seed };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.p == 0 {
            return Err(Error::InvalidParameter(format!("need n ≥ 2 and p ≥ 1 (n = {}, p = {})", self.n, self.p)));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::InvalidParameter(format!("rho = {} must lie in [0, 1)", self.rho)));
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma2 = {} must be positive", self.sigma2)));
        }
        if self.chromosome_sizes.iter().sum::<usize>() != self.p || self.chromosome_sizes.contains(&0) {
            return Err(Error::InvalidParameter("chromosome sizes must be positive and sum to p".into()));
        }
        if self.chromosome_sizes.len() > u8::MAX as usize {
            return Err(Error::InvalidParameter("too many chromosomes".into()));
        }
        let bad = |m: f64| !(m > 0.0 && m <= 0.5);
        match &self.maf {
            MafMode::Homogeneous(m) if bad(*m) => Err(Error::InvalidParameter(format!("MAF {m} outside (0, 0.5]"))),
            MafMode::Heterogeneous(v) if v.is_empty() || v.iter().any(|&m| bad(m)) => {
                Err(Error::InvalidParameter("heterogeneous MAF list must be nonempty with values in (0, 0.5]".into()))
            }
            MafMode::Custom(v) if v.len() != self.p || v.iter().any(|&m| bad(m)) => {
                Err(Error::InvalidParameter("custom MAF list needs p values in (0, 0.5]".into()))
            }
            _ => {
                for (t, _) in &self.truth.effects {
                    if t.snps().any(|j| j >= self.p) {
                        return Err(Error::InvalidTerm(format!("{t} outside p = {}", self.p)));
                    }
                }
                Ok(())
            }
        }
    }

    /// Target MAF of every SNP.
    pub fn target_mafs(&self) -> Vec<f64> {
        match &self.maf {
            MafMode::Homogeneous(m) => vec![*m; self.p],
            MafMode::Custom(v) => v.clone(),
            MafMode::Heterogeneous(v) => {
                let mut rng = seeds::rng_at(self.seed, &[stage::SIM_MAF]);
                (0..self.p).map(|_| *v.choose(&mut rng).expect("nonempty")).collect()
            }
        }
    }
}

/// Liability cut points (c1, c2): u > c1 gives the major homozygote, u < c2
/// the minor homozygote.
pub fn hwe_thresholds(maf: f64) -> (f64, f64) {
    let z = Normal::standard();
    let q = 1.0 - maf;
    (z.inverse_cdf(1.0 - q * q), z.inverse_cdf(maf * maf))
}

/// Draw the genotype matrix. Subject i uses its own stream, so the result is
/// independent of the thread count.
pub fn gen_genotypes(cfg: &SimConfig) -> Result<GenotypeMatrix> {
    cfg.validate()?;
    let (n, p) = (cfg.n, cfg.p);
    let cuts: Vec<(f64, f64)> = cfg.target_mafs().into_iter().map(hwe_thresholds).collect();
    let innovation = (1.0 - cfg.rho * cfg.rho).sqrt();
    // subject-major rows, transposed afterwards
    let rows: Vec<Vec<u8>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = seeds::rng_at(cfg.seed, &[stage::SIM_GENOTYPE, i as u64]);
            let mut u = 0.0;
            cuts.iter()
                .enumerate()
                .map(|(j, &(c1, c2))| {
                    let e: f64 = rng.sample(StandardNormal);
                    u = if j == 0 { e } else { cfg.rho * u + innovation * e };
                    if u > c1 {
                        0
                    } else if u < c2 {
                        2
                    } else {
                        1
                    }
                })
                .collect()
        })
        .collect();
    let mut calls = vec![0u8; n * p];
    for (i, row) in rows.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            calls[j * n + i] = c;
        }
    }
    let mut snps = Vec::with_capacity(p);
    for (c, &size) in cfg.chromosome_sizes.iter().enumerate() {
        for pos in 1..=size {
            snps.push(SnpInfo { name: format!("chr{}_{pos}", c + 1), chromosome: (c + 1) as u8, maf: 0.0 });
        }
    }
    let ids = (1..=n).map(|i| format!("s{i}")).collect();
    GenotypeMatrix::new(ids, snps, calls)
}

/// y = Σ effect · standardized(term column) + N(0, σ²).
pub fn gen_phenotype(
    g: &GenotypeMatrix,
    truth: &SimTruth,
    sigma2: f64,
    coding: InteractionCoding,
    seed: u64,
) -> Result<Phenotype> {
    if !(sigma2 > 0.0) {
        return Err(Error::InvalidParameter(format!("sigma2 = {sigma2} must be positive")));
    }
    let mut rng = seeds::rng_at(seed, &[stage::SIM_NOISE]);
    let sd = sigma2.sqrt();
    let mut y: Vec<f64> = (0..g.n()).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect();
    for (t, b) in &truth.effects {
        let col = term_column_with(g, t, coding)?;
        let (z, _) = stats::standardize(&col).map_err(|e| match e {
            Error::ZeroVariance => Error::InvalidTerm(format!("true term {t} has no variation; regenerate genotypes")),
            e => e,
        })?;
        y.iter_mut().zip(z).for_each(|(v, x)| *v += b * x);
    }
    Phenotype::trait_only(y)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub power: f64,
    pub fpr: f64,
    /// Fraction of planted interactions recovered (NaN-free: 0 when none
    /// are planted).
    pub interaction_power: f64,
    pub selected: usize,
}

/// Power and false-positive rate of a selected set against the truth.
pub fn score(selected: &[EffectTerm], truth: &SimTruth, universe_size: usize) -> Score {
    let truth_set: HashSet<EffectTerm> = truth.terms().into_iter().collect();
    let sel: HashSet<EffectTerm> = selected.iter().copied().collect();
    let hits = sel.intersection(&truth_set).count();
    let false_pos = sel.len() - hits;
    let power = if truth_set.is_empty() { 1.0 } else { hits as f64 / truth_set.len() as f64 };
    let nulls = universe_size.saturating_sub(truth_set.len());
    let fpr = if nulls == 0 { 0.0 } else { false_pos as f64 / nulls as f64 };
    let inter: Vec<&EffectTerm> = truth_set.iter().filter(|t| t.is_interaction()).collect();
    let interaction_power = if inter.is_empty() {
        1.0
    } else {
        inter.iter().filter(|t| sel.contains(t)).count() as f64 / inter.len() as f64
    };
    Score { power, fpr, interaction_power, selected: sel.len() }
}

/// What to run on each replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineSpec {
    pub screen: ScreenConfig,
    pub penalties: Vec<PenaltySpec>,
    pub fit: FitOptions,
}

impl Default for PipelineSpec {
    fn default() -> Self {
        PipelineSpec {
            screen: ScreenConfig::default(),
            penalties: vec![PenaltySpec::scad(), PenaltySpec::lasso()],
            fit: FitOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodScore {
    pub method: String,
    pub score: Score,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateResult {
    pub replicate: usize,
    pub seed: u64,
    pub universe: usize,
    pub scores: Vec<MethodScore>,
    pub lla_monotone: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
}

impl MeanSd {
    fn of(v: &[f64]) -> Self {
        if v.is_empty() {
            return MeanSd { mean: f64::NAN, sd: f64::NAN };
        }
        let mean = stats::mean(v);
        let sd = if v.len() > 1 { stats::variance(v).sqrt() } else { 0.0 };
        MeanSd { mean, sd }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub power: MeanSd,
    pub fpr: MeanSd,
    pub interaction_power: MeanSd,
    pub selected: MeanSd,
}

/// Seed-determined experiment results (no timings).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub config: SimConfig,
    pub pipeline: PipelineSpec,
    pub replicates: usize,
    pub failures: usize,
    pub methods: Vec<MethodSummary>,
    pub all_lla_monotone: bool,
    pub per_replicate: Vec<ReplicateResult>,
}

impl ExperimentSummary {
    pub fn method(&self, name: &str) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.method == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    pub summary: ExperimentSummary,
    /// Wall time of each replicate in seconds.
    pub wall_seconds: Vec<f64>,
}

impl ExperimentOutcome {
    pub fn median_wall_seconds(&self) -> f64 {
        let mut v = self.wall_seconds.clone();
        if v.is_empty() {
            return 0.0;
        }
        v.sort_by(f64::total_cmp);
        let k = v.len() / 2;
        if v.len() % 2 == 1 { v[k] } else { 0.5 * (v[k - 1] + v[k]) }
    }
}

pub const METHOD_SCREEN: &str = "ts-sis";

fn method_name(p: &PenaltySpec) -> String {
    format!("ts-sis-{}", serde_json::to_value(p.kind).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default())
}

/// One replicate: simulate, screen, fit each penalty, score.
pub fn run_replicate(cfg: &SimConfig, pipeline: &PipelineSpec, replicate: usize) -> Result<ReplicateResult> {
    let seed = seeds::derive(cfg.seed, &[stage::REPLICATE, replicate as u64]);
    let mut rep_cfg = cfg.clone();
    rep_cfg.seed = seed;
    let g = gen_genotypes(&rep_cfg)?;
    let pheno = gen_phenotype(&g, &cfg.truth, cfg.sigma2, cfg.coding, seed)?;
    let mut screen = pipeline.screen;
    screen.coding = cfg.coding;
    let report = ts_sis(&g, &pheno, &screen, seeds::derive(seed, &[stage::PIPELINE]))?;
    let universe = report.universe_size();
    let terms = report.terms();
    let mut scores = vec![MethodScore { method: METHOD_SCREEN.into(), score: score(&terms, &cfg.truth, universe) }];
    let mut monotone = true;
    for pen in &pipeline.penalties {
        let fit = fit_model(&g, &pheno, &terms, pen, cfg.coding, &pipeline.fit)?;
        monotone &= fit.lla_monotone;
        scores.push(MethodScore { method: method_name(pen), score: score(&fit.selected(), &cfg.truth, universe) });
    }
    Ok(ReplicateResult { replicate, seed, universe, scores, lla_monotone: monotone, error: None })
}

/// Run `replicates` independent replicates (in parallel) and summarize.
pub fn run_experiment(cfg: &SimConfig, pipeline: &PipelineSpec, replicates: usize) -> Result<ExperimentOutcome> {
    if replicates == 0 {
        return Err(Error::InvalidParameter("need at least one replicate".into()));
    }
    cfg.validate()?;
    let runs: Vec<(ReplicateResult, f64)> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let start = Instant::now();
            let res = run_replicate(cfg, pipeline, r).unwrap_or_else(|e| {
                log::warn!("replicate {r} failed: {e}");
                ReplicateResult {
                    replicate: r,
                    seed: seeds::derive(cfg.seed, &[stage::REPLICATE, r as u64]),
                    universe: 0,
                    scores: Vec::new(),
                    lla_monotone: true,
                    error: Some(e.to_string()),
                }
            });
            (res, start.elapsed().as_secs_f64())
        })
        .collect();
    let (per_replicate, wall_seconds): (Vec<_>, Vec<_>) = runs.into_iter().unzip();
    let ok: Vec<&ReplicateResult> = per_replicate.iter().filter(|r| r.error.is_none()).collect();
    let mut names = vec![METHOD_SCREEN.to_string()];
    names.extend(pipeline.penalties.iter().map(method_name));
    let methods = names
        .into_iter()
        .map(|name| {
            let pick = |f: fn(&Score) -> f64| -> Vec<f64> {
                ok.iter()
                    .filter_map(|r| r.scores.iter().find(|s| s.method == name).map(|s| f(&s.score)))
                    .collect()
            };
            MethodSummary {
                power: MeanSd::of(&pick(|s| s.power)),
                fpr: MeanSd::of(&pick(|s| s.fpr)),
                interaction_power: MeanSd::of(&pick(|s| s.interaction_power)),
                selected: MeanSd::of(&pick(|s| s.selected as f64)),
                method: name,
            }
        })
        .collect();
    let summary = ExperimentSummary {
        config: cfg.clone(),
        pipeline: pipeline.clone(),
        replicates,
        failures: per_replicate.len() - ok.len(),
        methods,
        all_lla_monotone: ok.iter().all(|r| r.lla_monotone),
        per_replicate,
    };
    Ok(ExperimentOutcome { summary, wall_seconds })
}
