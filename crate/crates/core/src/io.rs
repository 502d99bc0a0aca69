//! File formats: GTX genotypes, phenotype TSV, truth and report JSON, run
//! manifests.
//!
//! GTX is a tab-separated text matrix with one SNP per line:
//!
//! ```text
//! snp_id  chrom  s1  s2  s3
//! rs1     1      0   2   NA
//! ```

use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::genotype::{GenotypeMatrix, SnpInfo, MISSING};
use crate::phenotype::Phenotype;
use crate::simulate::SimTruth;
use crate::term::{EffectTerm, TermKind};

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { path: path.to_path_buf(), line, msg: msg.into() }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

pub fn load_genotypes(path: &Path) -> Result<GenotypeMatrix> {
    let mut lines = open(path)?.lines().enumerate();
    let header = match lines.next() {
        Some((_, l)) => l.map_err(|e| Error::io(path, e))?,
        None => return Err(parse_err(path, 1, "empty file")),
    };
    let fields: Vec<&str> = header.trim_end_matches('\r').split('\t').collect();
    if fields.len() < 3 || fields[0] != "snp_id" || fields[1] != "chrom" {
        return Err(parse_err(path, 1, "header must start with snp_id<TAB>chrom and list at least one sample"));
    }
    let ids: Vec<String> = fields[2..].iter().map(|s| s.to_string()).collect();
    let n = ids.len();
    let mut snps = Vec::new();
    let mut calls = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (k, line) in lines {
        let lineno = k + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != n + 2 {
            return Err(parse_err(path, lineno, format!("expected {} fields, found {}", n + 2, f.len())));
        }
        let name = f[0].to_string();
        if name.is_empty() {
            return Err(parse_err(path, lineno, "empty SNP name"));
        }
        if let Some(prev) = seen.insert(name.clone(), lineno) {
            return Err(parse_err(path, lineno, format!("duplicate SNP {name} (first on line {prev})")));
        }
        let chromosome: u8 = f[1]
            .parse()
            .map_err(|_| parse_err(path, lineno, format!("chromosome {:?} is not an integer in 0..=255", f[1])))?;
        for (i, c) in f[2..].iter().enumerate() {
            calls.push(match *c {
                "0" => 0,
                "1" => 1,
                "2" => 2,
                "NA" => MISSING,
                other => {
                    return Err(parse_err(
                        path,
                        lineno,
                        format!("SNP {name}, sample {}: call {other:?} not in {{0,1,2,NA}}", ids[i]),
                    ))
                }
            });
        }
        snps.push(SnpInfo { name, chromosome, maf: 0.0 });
    }
    GenotypeMatrix::new(ids, snps, calls).map_err(|e| parse_err(path, 1, e.to_string()))
}

pub fn save_genotypes(path: &Path, g: &GenotypeMatrix) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    write!(w, "snp_id\tchrom").map_err(io)?;
    for id in g.sample_ids() {
        write!(w, "\t{id}").map_err(io)?;
    }
    writeln!(w).map_err(io)?;
    let mut buf = String::new();
    for j in 0..g.p() {
        let s = g.snp(j);
        buf.clear();
        buf.push_str(&s.name);
        buf.push('\t');
        buf.push_str(&s.chromosome.to_string());
        for &c in g.column(j) {
            buf.push('\t');
            buf.push_str(match c {
                0 => "0",
                1 => "1",
                2 => "2",
                _ => "NA",
            });
        }
        writeln!(w, "{buf}").map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Load a phenotype table and reorder its rows to `sample_ids`.
pub fn load_phenotype(path: &Path, sample_ids: &[String]) -> Result<Phenotype> {
    let mut lines = open(path)?.lines().enumerate();
    let header = match lines.next() {
        Some((_, l)) => l.map_err(|e| Error::io(path, e))?,
        None => return Err(parse_err(path, 1, "empty file")),
    };
    let cols: Vec<String> = header.trim_end_matches('\r').split('\t').map(String::from).collect();
    if cols.len() < 2 || cols[0] != "id" {
        return Err(parse_err(path, 1, "header must be id<TAB>trait[<TAB>covariate...]"));
    }
    let q = cols.len() - 2;
    let mut rows: HashMap<String, (usize, Vec<f64>)> = HashMap::new();
    for (k, line) in lines {
        let lineno = k + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != cols.len() {
            return Err(parse_err(path, lineno, format!("expected {} fields, found {}", cols.len(), f.len())));
        }
        let vals = f[1..]
            .iter()
            .zip(&cols[1..])
            .map(|(v, name)| {
                v.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| parse_err(path, lineno, format!("{name} value {v:?} is not a finite number")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some((prev, _)) = rows.insert(f[0].to_string(), (lineno, vals)) {
            return Err(parse_err(path, lineno, format!("duplicate sample {} (first on line {prev})", f[0])));
        }
    }
    let missing: Vec<&str> = sample_ids.iter().filter(|id| !rows.contains_key(*id)).map(|s| s.as_str()).collect();
    let extra: Vec<&str> = {
        let want: std::collections::HashSet<&str> = sample_ids.iter().map(|s| s.as_str()).collect();
        let mut v: Vec<&str> = rows.keys().map(|s| s.as_str()).filter(|id| !want.contains(id)).collect();
        v.sort_unstable();
        v
    };
    if !missing.is_empty() || !extra.is_empty() {
        let show = |v: &[&str]| v.iter().take(10).copied().collect::<Vec<_>>().join(", ");
        return Err(Error::SampleMismatch(format!(
            "{} genotyped samples without phenotype [{}]; {} phenotype rows without genotypes [{}]",
            missing.len(),
            show(&missing),
            extra.len(),
            show(&extra)
        )));
    }
    let n = sample_ids.len();
    let mut y = Vec::with_capacity(n);
    let mut covariates = vec![Vec::with_capacity(n); q];
    for id in sample_ids {
        let vals = &rows[id].1;
        y.push(vals[0]);
        for (c, v) in covariates.iter_mut().zip(&vals[1..]) {
            c.push(*v);
        }
    }
    Phenotype::new(y, covariates, cols[2..].to_vec())
}

pub fn save_phenotype(path: &Path, sample_ids: &[String], pheno: &Phenotype) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    let mut header = String::from("id\ty");
    for c in &pheno.covariate_names {
        header.push('\t');
        header.push_str(c);
    }
    writeln!(w, "{header}").map_err(io)?;
    for (i, id) in sample_ids.iter().enumerate() {
        write!(w, "{id}\t{}", pheno.y[i]).map_err(io)?;
        for c in &pheno.covariates {
            write!(w, "\t{}", c[i]).map_err(io)?;
        }
        writeln!(w).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Truth entry keyed by SNP names so it survives SNP filtering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedEffect {
    pub kind: TermKind,
    pub snp: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snp2: Option<String>,
    pub effect: f64,
}

pub fn truth_to_named(truth: &SimTruth, g: &GenotypeMatrix) -> Vec<NamedEffect> {
    truth
        .effects
        .iter()
        .map(|(t, b)| NamedEffect {
            kind: t.kind(),
            snp: g.snp(t.j()).name.clone(),
            snp2: t.j2().map(|j| g.snp(j).name.clone()),
            effect: *b,
        })
        .collect()
}

pub fn truth_from_named(named: &[NamedEffect], g: &GenotypeMatrix) -> Result<SimTruth> {
    let index: HashMap<&str, usize> = g.snps().iter().enumerate().map(|(j, s)| (s.name.as_str(), j)).collect();
    let find = |name: &str| {
        index
            .get(name)
            .copied()
            .ok_or_else(|| Error::InvalidTerm(format!("truth SNP {name} not present in the genotypes")))
    };
    let effects = named
        .iter()
        .map(|e| {
            let j = find(&e.snp)?;
            let term = match (e.kind.is_interaction(), &e.snp2) {
                (false, None) if e.kind == TermKind::Additive => EffectTerm::additive(j),
                (false, None) => EffectTerm::dominant(j),
                (true, Some(s2)) => EffectTerm::interaction(e.kind, j, find(s2)?)?,
                _ => return Err(Error::InvalidTerm(format!("{:?} term on {} has the wrong partner", e.kind, e.snp))),
            };
            Ok((term, e.effect))
        })
        .collect::<Result<Vec<_>>>()?;
    SimTruth::new(effects)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(open(path)?)?)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Hex SHA-256 of a file's bytes.
pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// Everything needed to rerun a command, minus timings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub parameters: serde_json::Value,
    pub seed: u64,
    /// Derived per-stage seeds by stage name.
    pub stage_seeds: Vec<(String, u64)>,
    pub inputs: Vec<InputDigest>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    #[serde(flatten)]
    pub run: ReportManifest,
    pub outputs: Vec<String>,
    /// Seconds per stage; lives only here so reports stay byte-identical.
    pub wall_seconds: Vec<(String, f64)>,
}

/// Files written by one command; removed again if the command fails.
#[derive(Debug, Default)]
pub struct OutputSet {
    written: Vec<PathBuf>,
    committed: bool,
}

impl OutputSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Write via `f` and remember the path.
    pub fn write(&mut self, path: PathBuf, f: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
        self.written.push(path.clone());
        f(&path)
    }

    pub fn paths(&self) -> &[PathBuf] {
        &self.written
    }

    pub fn commit(mut self) -> Vec<PathBuf> {
        self.committed = true;
        std::mem::take(&mut self.written)
    }
}

impl Drop for OutputSet {
    fn drop(&mut self) {
        if !self.committed {
            for p in &self.written {
                let _ = fs::remove_file(p);
            }
        }
    }
}
