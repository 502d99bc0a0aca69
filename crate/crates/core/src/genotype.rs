//! Genotype storage, imputation and MAF filtering.
//!
//! Calls count copies of the minor allele `a`: 0 = AA, 1 = Aa, 2 = aa.
//! Storage is SNP-major so a SNP's column is one contiguous slice.

use std::collections::HashSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sentinel for an unobserved call.
pub const MISSING: u8 = u8::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnpInfo {
    pub name: String,
    pub chromosome: u8,
    /// Minor allele frequency from non-missing calls, folded into [0, 0.5].
    pub maf: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenotypeMatrix {
    n: usize,
    sample_ids: Vec<String>,
    snps: Vec<SnpInfo>,
    calls: Vec<u8>,
}

/// Frequency of the counted allele among the non-missing calls of one column,
/// or `None` when every call is missing.
pub fn counted_allele_frequency(column: &[u8]) -> Option<f64> {
    let (sum, obs) = column
        .iter()
        .filter(|&&c| c != MISSING)
        .fold((0u64, 0u64), |(s, o), &c| (s + c as u64, o + 1));
    (obs > 0).then(|| sum as f64 / (2 * obs) as f64)
}

fn fold_maf(freq: f64) -> f64 {
    freq.min(1.0 - freq)
}

impl GenotypeMatrix {
    /// Build from SNP-major calls (`calls[j * n + i]`). MAFs are recomputed;
    /// any `maf` in `snps` is overwritten.
    pub fn new(sample_ids: Vec<String>, mut snps: Vec<SnpInfo>, calls: Vec<u8>) -> Result<Self> {
        let n = sample_ids.len();
        let p = snps.len();
        if calls.len() != n * p {
            return Err(Error::Dimension(format!(
                "expected {} calls for {n} samples x {p} SNPs, got {}",
                n * p,
                calls.len()
            )));
        }
        if let Some(bad) = calls.iter().find(|&&c| c > 2 && c != MISSING) {
            return Err(Error::InvalidParameter(format!("genotype call {bad} outside {{0,1,2}}")));
        }
        let mut seen = HashSet::with_capacity(p);
        for s in &snps {
            if !seen.insert(s.name.as_str()) {
                return Err(Error::InvalidParameter(format!("duplicate SNP name {}", s.name)));
            }
        }
        let mut ids = HashSet::with_capacity(n);
        for id in &sample_ids {
            if !ids.insert(id.as_str()) {
                return Err(Error::InvalidParameter(format!("duplicate sample id {id}")));
            }
        }
        for (j, s) in snps.iter_mut().enumerate() {
            s.maf = counted_allele_frequency(&calls[j * n..(j + 1) * n])
                .map(fold_maf)
                .unwrap_or(0.0);
        }
        Ok(Self {
            n,
            sample_ids,
            snps,
            calls,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.snps.len()
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    pub fn snps(&self) -> &[SnpInfo] {
        &self.snps
    }

    pub fn snp(&self, j: usize) -> &SnpInfo {
        &self.snps[j]
    }

    pub fn column(&self, j: usize) -> &[u8] {
        &self.calls[j * self.n..(j + 1) * self.n]
    }

    pub fn call(&self, i: usize, j: usize) -> u8 {
        self.calls[j * self.n + i]
    }

    pub fn has_missing(&self) -> bool {
        self.calls.contains(&MISSING)
    }

    /// Frequency of the counted (minor at load time) allele `a`.
    pub fn allele_frequency(&self, j: usize) -> f64 {
        counted_allele_frequency(self.column(j)).unwrap_or(0.0)
    }

    /// Restrict to the given sample rows, in the given order. MAFs are
    /// recomputed on the subset.
    pub fn subset_samples(&self, rows: &[usize]) -> Result<Self> {
        let mut calls = Vec::with_capacity(rows.len() * self.p());
        for j in 0..self.p() {
            let col = self.column(j);
            calls.extend(rows.iter().map(|&i| col[i]));
        }
        let ids = rows.iter().map(|&i| self.sample_ids[i].clone()).collect();
        Self::new(ids, self.snps.clone(), calls)
    }

    pub fn subset_snps(&self, keep: &[usize]) -> Self {
        let mut calls = Vec::with_capacity(self.n * keep.len());
        for &j in keep {
            calls.extend_from_slice(self.column(j));
        }
        Self {
            n: self.n,
            sample_ids: self.sample_ids.clone(),
            snps: keep.iter().map(|&j| self.snps[j].clone()).collect(),
            calls,
        }
    }
}

/// Replace every missing call by a draw from that SNP's observed genotype
/// frequencies. Columns without missing calls are left untouched.
pub fn impute_missing<R: Rng + ?Sized>(g: &GenotypeMatrix, rng: &mut R) -> Result<GenotypeMatrix> {
    let n = g.n();
    let mut calls = g.calls.clone();
    for j in 0..g.p() {
        let col = &mut calls[j * n..(j + 1) * n];
        if !col.contains(&MISSING) {
            continue;
        }
        let mut counts = [0usize; 3];
        for &c in col.iter().filter(|&&c| c != MISSING) {
            counts[c as usize] += 1;
        }
        let observed: usize = counts.iter().sum();
        if observed == 0 {
            return Err(Error::AllMissing(g.snps[j].name.clone()));
        }
        for c in col.iter_mut().filter(|c| **c == MISSING) {
            let draw = rng.random_range(0..observed);
            *c = if draw < counts[0] {
                0
            } else if draw < counts[0] + counts[1] {
                1
            } else {
                2
            };
        }
    }
    GenotypeMatrix::new(g.sample_ids.clone(), g.snps.clone(), calls)
}

/// Keep the SNPs whose observed MAF is at least `threshold`, in order.
pub fn maf_filter(g: &GenotypeMatrix, threshold: f64) -> Result<GenotypeMatrix> {
    if !(0.0..=0.5).contains(&threshold) {
        return Err(Error::InvalidParameter(format!(
            "MAF threshold {threshold} outside [0, 0.5]"
        )));
    }
    let keep: Vec<usize> = (0..g.p()).filter(|&j| g.snps[j].maf >= threshold).collect();
    if keep.len() == g.p() {
        return Ok(g.clone());
    }
    Ok(g.subset_snps(&keep))
}
