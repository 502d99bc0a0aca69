//! Two-stage sure independence screening.
//!
//! Stage 1 screens the additive and dominant main-effect pools separately.
//! Stage 2 pairs every stage-1 survivor with every SNP in the genome (AA and
//! AD for additive roots, DA and DD for dominant roots) and screens the
//! resulting interaction pool jointly. Interaction columns are generated in
//! batches and never stored.

pub mod rate;
pub mod utility;

use std::collections::{BTreeSet, HashSet};

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genotype::GenotypeMatrix;
use crate::phenotype::Phenotype;
use crate::seeds;
use crate::term::{CodedGenotypes, EffectTerm, InteractionCoding, TermKind};

pub use rate::{
    bootstrap_auxiliary, hard_model_size, rate_cutoff, select, solve_num_auxiliary, AuxiliaryCount,
    CandidatePool, ColumnPool, Cutoff, RateParams, ThresholdMode,
};
pub use utility::{marginal_utility, modified_marginal_utility, ScreeningResponse, UtilityKind};

pub const DEFAULT_BATCH_SIZE: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScreenConfig {
    pub stage1: RateParams,
    pub stage2: RateParams,
    pub utility: UtilityKind,
    pub coding: InteractionCoding,
    pub batch_size: usize,
}

impl Default for ScreenConfig {
    fn default() -> Self {
        ScreenConfig {
            stage1: RateParams::rate(0.01, 1e-4),
            stage2: RateParams::rate(0.005, 1e-4),
            utility: UtilityKind::Marginal,
            coding: InteractionCoding::default(),
            batch_size: DEFAULT_BATCH_SIZE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredTerm {
    pub term: EffectTerm,
    pub utility: f64,
}

/// Bookkeeping for one screening call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolSummary {
    pub pool: String,
    pub candidates: usize,
    pub zero_variance: usize,
    pub mode: ThresholdMode,
    /// Auxiliary count and bound values (RATE only).
    pub auxiliary: Option<AuxiliaryCount>,
    /// C_d (RATE only).
    pub cutoff: Option<f64>,
    pub selected: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenReport {
    pub n: usize,
    pub p: usize,
    pub additive: Vec<ScoredTerm>,
    pub dominant: Vec<ScoredTerm>,
    pub aa: Vec<ScoredTerm>,
    pub ad: Vec<ScoredTerm>,
    pub da: Vec<ScoredTerm>,
    pub dd: Vec<ScoredTerm>,
    /// Deduplicated number of stage-2 candidates.
    pub interaction_candidates: usize,
    pub pools: Vec<PoolSummary>,
    pub coding: InteractionCoding,
    pub seed: u64,
    pub warnings: Vec<String>,
}

impl ScreenReport {
    pub fn main_terms(&self) -> impl Iterator<Item = &ScoredTerm> {
        self.additive.iter().chain(&self.dominant)
    }

    pub fn interaction_terms(&self) -> impl Iterator<Item = &ScoredTerm> {
        self.aa.iter().chain(&self.ad).chain(&self.da).chain(&self.dd)
    }

    /// Every selected term: additive, dominant, then AA, AD, DA, DD.
    pub fn terms(&self) -> Vec<EffectTerm> {
        self.main_terms().chain(self.interaction_terms()).map(|s| s.term).collect()
    }

    pub fn len(&self) -> usize {
        self.additive.len() + self.dominant.len() + self.aa.len() + self.ad.len() + self.da.len() + self.dd.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Size of the full candidate set: 2p main terms plus the enumerated
    /// interactions.
    pub fn universe_size(&self) -> usize {
        2 * self.p + self.interaction_candidates
    }
}

/// Main-effect pool over all SNPs.
struct MainPool<'a> {
    coded: &'a CodedGenotypes,
    kind: TermKind,
}

impl CandidatePool for MainPool<'_> {
    fn len(&self) -> usize {
        self.coded.p()
    }

    fn n(&self) -> usize {
        self.coded.n()
    }

    fn fill(&self, idx: usize, out: &mut [f64]) {
        match self.kind {
            TermKind::Additive => out.copy_from_slice(self.coded.xi(idx)),
            _ => out.copy_from_slice(self.coded.zeta(idx)),
        }
    }
}

/// Interaction pool over an explicit term list.
pub struct InteractionPool<'a> {
    coded: &'a CodedGenotypes,
    terms: Vec<EffectTerm>,
    coding: InteractionCoding,
}

impl<'a> InteractionPool<'a> {
    pub fn new(coded: &'a CodedGenotypes, terms: Vec<EffectTerm>, coding: InteractionCoding) -> Self {
        InteractionPool { coded, terms, coding }
    }

    pub fn terms(&self) -> &[EffectTerm] {
        &self.terms
    }
}

impl CandidatePool for InteractionPool<'_> {
    fn len(&self) -> usize {
        self.terms.len()
    }

    fn n(&self) -> usize {
        self.coded.n()
    }

    fn fill(&self, idx: usize, out: &mut [f64]) {
        self.coded.fill(&self.terms[idx], self.coding, out);
    }
}

/// Stage-2 candidates rooted at the stage-1 survivors, deduplicated and in a
/// fixed order (AA, AD, DA, DD; roots ascending; partners ascending).
pub fn enumerate_interactions(p: usize, additive_roots: &[usize], dominant_roots: &[usize]) -> Vec<EffectTerm> {
    let a: BTreeSet<usize> = additive_roots.iter().copied().collect();
    let d: BTreeSet<usize> = dominant_roots.iter().copied().collect();
    let mut out = Vec::new();
    let symmetric = |kind: TermKind, roots: &BTreeSet<usize>, out: &mut Vec<EffectTerm>| {
        for &r in roots {
            for j in 0..p {
                // pairs of two roots are emitted once, from the smaller root
                if j == r || (j < r && roots.contains(&j)) {
                    continue;
                }
                out.push(EffectTerm::interaction(kind, r, j).expect("distinct indices"));
            }
        }
    };
    let ordered = |kind: TermKind, roots: &BTreeSet<usize>, out: &mut Vec<EffectTerm>| {
        for &r in roots {
            out.extend((0..p).filter(|&j| j != r).map(|j| EffectTerm::interaction(kind, r, j).expect("distinct indices")));
        }
    };
    symmetric(TermKind::AA, &a, &mut out);
    ordered(TermKind::AD, &a, &mut out);
    ordered(TermKind::DA, &d, &mut out);
    symmetric(TermKind::DD, &d, &mut out);
    out
}

/// Result of screening one candidate pool.
#[derive(Debug, Clone)]
pub struct PoolOutcome {
    /// Candidate indices kept, by decreasing utility.
    pub selected: Vec<usize>,
    pub utilities: Vec<f64>,
    pub summary: PoolSummary,
}

/// Score every candidate of `pool` and apply the thresholding rule.
pub fn screen_pool<P: CandidatePool + ?Sized>(
    name: &str,
    pool: &P,
    response: &ScreeningResponse,
    params: &RateParams,
    seed: u64,
    batch: usize,
) -> Result<PoolOutcome> {
    params.validate()?;
    let n = pool.n();
    let utilities = rate::pool_utilities(pool, response, batch);
    let zero_variance = utilities.iter().filter(|&&u| u == 0.0).count();
    let (auxiliary, cutoff) = match params.mode {
        ThresholdMode::Rate => {
            let aux = solve_num_auxiliary(pool.len(), n, params.alpha, params.beta)?;
            debug_assert!(aux.f_d <= params.beta && aux.f_prev > params.beta);
            let c = rate::streaming_cutoff(pool, aux.d, seed, response, batch);
            (Some(aux), Some(c))
        }
        _ => (None, None),
    };
    let selected = select(&utilities, Cutoff::for_params(params, n, cutoff)?);
    info!(
        "{name}: {} candidates, d = {:?}, cutoff = {:?}, selected {}",
        pool.len(),
        auxiliary.map(|a| a.d),
        cutoff,
        selected.len()
    );
    Ok(PoolOutcome {
        summary: PoolSummary {
            pool: name.to_string(),
            candidates: pool.len(),
            zero_variance,
            mode: params.mode,
            auxiliary,
            cutoff,
            selected: selected.len(),
            seed,
        },
        selected,
        utilities,
    })
}

/// Run both screening stages. `seed` drives the auxiliary bootstraps.
pub fn ts_sis(g: &GenotypeMatrix, pheno: &Phenotype, cfg: &ScreenConfig, seed: u64) -> Result<ScreenReport> {
    let coded = CodedGenotypes::new(g)?;
    ts_sis_coded(&coded, pheno, cfg, seed)
}

/// [`ts_sis`] on pre-encoded genotypes.
pub fn ts_sis_coded(coded: &CodedGenotypes, pheno: &Phenotype, cfg: &ScreenConfig, seed: u64) -> Result<ScreenReport> {
    let (n, p) = (coded.n(), coded.p());
    if pheno.n() != n {
        return Err(Error::Dimension(format!("phenotype has {} rows, genotypes {n}", pheno.n())));
    }
    let response = ScreeningResponse::new(&pheno.y, &pheno.covariates, cfg.utility);
    let batch = cfg.batch_size.max(1);
    let mut warnings = Vec::new();

    let scored = |outcome: &PoolOutcome, term: &dyn Fn(usize) -> EffectTerm| -> Vec<ScoredTerm> {
        outcome
            .selected
            .iter()
            .map(|&i| ScoredTerm { term: term(i), utility: outcome.utilities[i] })
            .collect()
    };

    let add_seed = seeds::derive(seed, &[seeds::stage::SCREEN_ADDITIVE]);
    let dom_seed = seeds::derive(seed, &[seeds::stage::SCREEN_DOMINANT]);
    let int_seed = seeds::derive(seed, &[seeds::stage::SCREEN_INTERACTION]);

    let add = screen_pool(
        "additive",
        &MainPool { coded, kind: TermKind::Additive },
        &response,
        &cfg.stage1,
        add_seed,
        batch,
    )?;
    let dom = screen_pool(
        "dominant",
        &MainPool { coded, kind: TermKind::Dominant },
        &response,
        &cfg.stage1,
        dom_seed,
        batch,
    )?;
    let additive = scored(&add, &EffectTerm::additive);
    let dominant = scored(&dom, &EffectTerm::dominant);
    let mut pools = vec![add.summary, dom.summary];

    let mut report = ScreenReport {
        n,
        p,
        additive,
        dominant,
        aa: Vec::new(),
        ad: Vec::new(),
        da: Vec::new(),
        dd: Vec::new(),
        interaction_candidates: 0,
        pools: Vec::new(),
        coding: cfg.coding,
        seed,
        warnings: Vec::new(),
    };

    if report.additive.is_empty() && report.dominant.is_empty() {
        let msg = "stage 1 selected no main effects; stage 2 skipped".to_string();
        warn!("{msg}");
        warnings.push(msg);
        report.pools = pools;
        report.warnings = warnings;
        return Ok(report);
    }

    let roots_a: Vec<usize> = add.selected.clone();
    let roots_d: Vec<usize> = dom.selected.clone();
    let candidates = enumerate_interactions(p, &roots_a, &roots_d);
    report.interaction_candidates = candidates.len();
    let pool = InteractionPool::new(coded, candidates, cfg.coding);
    let inter = screen_pool("interaction", &pool, &response, &cfg.stage2, int_seed, batch)?;
    for &i in &inter.selected {
        let st = ScoredTerm { term: pool.terms[i], utility: inter.utilities[i] };
        match st.term.kind() {
            TermKind::AA => report.aa.push(st),
            TermKind::AD => report.ad.push(st),
            TermKind::DA => report.da.push(st),
            TermKind::DD => report.dd.push(st),
            _ => unreachable!("interaction pool holds interactions only"),
        }
    }
    pools.push(inter.summary);
    report.pools = pools;
    report.warnings = warnings;
    debug_assert!(check_report(&report).is_ok());
    Ok(report)
}

/// Structural checks: roots present in stage 1, canonical pairs, no
/// duplicates.
pub fn check_report(r: &ScreenReport) -> Result<()> {
    let a: HashSet<usize> = r.additive.iter().map(|s| s.term.j()).collect();
    let d: HashSet<usize> = r.dominant.iter().map(|s| s.term.j()).collect();
    let mut seen = HashSet::new();
    for s in r.main_terms().chain(r.interaction_terms()) {
        if !seen.insert(s.term) {
            return Err(Error::InvalidTerm(format!("duplicate term {}", s.term)));
        }
    }
    for s in r.interaction_terms() {
        let t = s.term;
        let j2 = t.j2().expect("interaction");
        let ok = match t.kind() {
            TermKind::AA => t.j() < j2 && (a.contains(&t.j()) || a.contains(&j2)),
            TermKind::DD => t.j() < j2 && (d.contains(&t.j()) || d.contains(&j2)),
            TermKind::AD => a.contains(&t.j()),
            TermKind::DA => d.contains(&t.j()),
            _ => false,
        };
        if !ok {
            return Err(Error::InvalidTerm(format!("{t} has no stage-1 root")));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumeration_counts_and_dedup() {
        let p = 10;
        let terms = enumerate_interactions(p, &[2, 5], &[5]);
        let count = |k| terms.iter().filter(|t| t.kind() == k).count();
        // AA: 2 roots x 9 partners minus the shared (2,5) pair
        assert_eq!(count(TermKind::AA), 17);
        assert_eq!(count(TermKind::AD), 18);
        assert_eq!(count(TermKind::DA), 9);
        assert_eq!(count(TermKind::DD), 9);
        let set: HashSet<_> = terms.iter().collect();
        assert_eq!(set.len(), terms.len());
        assert!(terms.iter().all(|t| t.j2() != Some(t.j())));
        assert!(enumerate_interactions(p, &[], &[]).is_empty());
    }
}
