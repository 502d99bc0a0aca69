//! Effect terms and their design columns.
//!
//! Additive coding ξ maps calls (0, 1, 2) to (1, 0, -1); dominant coding is
//! ζ = 1 - |ξ|. Interaction columns are elementwise products of the two
//! roots' codings and are built on demand.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genotype::{GenotypeMatrix, MISSING};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TermKind {
    Additive,
    Dominant,
    AA,
    AD,
    DA,
    DD,
}

impl TermKind {
    pub fn is_interaction(self) -> bool {
        !matches!(self, TermKind::Additive | TermKind::Dominant)
    }

    /// Codings of the (first, second) root.
    fn roots(self) -> (Coding, Coding) {
        use Coding::*;
        match self {
            TermKind::Additive => (Additive, Additive),
            TermKind::Dominant => (Dominant, Dominant),
            TermKind::AA => (Additive, Additive),
            TermKind::AD => (Additive, Dominant),
            TermKind::DA => (Dominant, Additive),
            TermKind::DD => (Dominant, Dominant),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TermKind::Additive => "additive",
            TermKind::Dominant => "dominant",
            TermKind::AA => "aa",
            TermKind::AD => "ad",
            TermKind::DA => "da",
            TermKind::DD => "dd",
        }
    }
}

impl std::str::FromStr for TermKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "additive" | "a" => TermKind::Additive,
            "dominant" | "d" => TermKind::Dominant,
            "aa" => TermKind::AA,
            "ad" => TermKind::AD,
            "da" => TermKind::DA,
            "dd" => TermKind::DD,
            other => return Err(Error::InvalidTerm(format!("unknown term kind {other:?}"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Coding {
    Additive,
    Dominant,
}

/// One model column: a main effect of SNP `j`, or an interaction between
/// SNPs `j` and `j2`. AA and DD pairs are stored with `j < j2`; AD and DA
/// keep the root (the stage-1 SNP) first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "RawTerm", into = "RawTerm")]
pub struct EffectTerm {
    kind: TermKind,
    j: usize,
    j2: Option<usize>,
}

#[derive(Serialize, Deserialize)]
struct RawTerm {
    kind: TermKind,
    j: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    j2: Option<usize>,
}

impl TryFrom<RawTerm> for EffectTerm {
    type Error = Error;

    fn try_from(raw: RawTerm) -> Result<Self> {
        match (raw.kind.is_interaction(), raw.j2) {
            (false, None) => Ok(EffectTerm { kind: raw.kind, j: raw.j, j2: None }),
            (true, Some(j2)) => EffectTerm::interaction(raw.kind, raw.j, j2),
            (false, Some(_)) => Err(Error::InvalidTerm("main effect with a second index".into())),
            (true, None) => Err(Error::InvalidTerm("interaction without a second index".into())),
        }
    }
}

impl From<EffectTerm> for RawTerm {
    fn from(t: EffectTerm) -> Self {
        RawTerm { kind: t.kind, j: t.j, j2: t.j2 }
    }
}

impl EffectTerm {
    pub fn additive(j: usize) -> Self {
        EffectTerm { kind: TermKind::Additive, j, j2: None }
    }

    pub fn dominant(j: usize) -> Self {
        EffectTerm { kind: TermKind::Dominant, j, j2: None }
    }

    /// Build an interaction term, canonicalizing AA/DD to `j < j2` and
    /// rejecting self-pairs.
    pub fn interaction(kind: TermKind, j: usize, j2: usize) -> Result<Self> {
        if !kind.is_interaction() {
            return Err(Error::InvalidTerm(format!("{} is not an interaction kind", kind.as_str())));
        }
        if j == j2 {
            return Err(Error::InvalidTerm(format!(
                "self-pair {}({j}, {j}) is not an interaction",
                kind.as_str()
            )));
        }
        let (j, j2) = match kind {
            TermKind::AA | TermKind::DD if j2 < j => (j2, j),
            _ => (j, j2),
        };
        Ok(EffectTerm { kind, j, j2: Some(j2) })
    }

    pub fn kind(&self) -> TermKind {
        self.kind
    }

    pub fn j(&self) -> usize {
        self.j
    }

    pub fn j2(&self) -> Option<usize> {
        self.j2
    }

    pub fn is_interaction(&self) -> bool {
        self.kind.is_interaction()
    }

    /// SNP indices this term touches.
    pub fn snps(&self) -> impl Iterator<Item = usize> {
        std::iter::once(self.j).chain(self.j2)
    }

    /// Human-readable label using SNP names from `g`.
    pub fn label(&self, g: &GenotypeMatrix) -> String {
        match self.j2 {
            None => format!("{}({})", self.kind.as_str(), g.snp(self.j).name),
            Some(j2) => format!(
                "{}({},{})",
                self.kind.as_str(),
                g.snp(self.j).name,
                g.snp(j2).name
            ),
        }
    }
}

impl fmt::Display for EffectTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.j2 {
            None => write!(f, "{}({})", self.kind.as_str(), self.j),
            Some(j2) => write!(f, "{}({},{})", self.kind.as_str(), self.j, j2),
        }
    }
}

fn check_column(g: &GenotypeMatrix, j: usize) -> Result<&[u8]> {
    if j >= g.p() {
        return Err(Error::InvalidTerm(format!("SNP index {j} out of range (p = {})", g.p())));
    }
    let col = g.column(j);
    if col.contains(&MISSING) {
        return Err(Error::MissingCall { snp: g.snp(j).name.clone(), index: j });
    }
    Ok(col)
}

/// ξ for one call; `None` for a missing call.
pub fn additive_code(call: u8) -> Option<f64> {
    match call {
        0 => Some(1.0),
        1 => Some(0.0),
        2 => Some(-1.0),
        _ => None,
    }
}

pub fn encode_additive(g: &GenotypeMatrix, j: usize) -> Result<Vec<f64>> {
    let col = check_column(g, j)?;
    Ok(col.iter().map(|&c| additive_code(c).expect("checked")).collect())
}

pub fn encode_dominant(xi: &[f64]) -> Result<Vec<f64>> {
    xi.iter()
        .map(|&x| {
            if x == -1.0 || x == 0.0 || x == 1.0 {
                Ok(1.0 - x.abs())
            } else {
                Err(Error::InvalidCode(x))
            }
        })
        .collect()
}

/// How interaction columns are formed from the roots' codings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InteractionCoding {
    /// Plain products of ξ/ζ, as written in the genetic model.
    Raw,
    /// Products of sample-centered ξ/ζ; orthogonal to both roots' main-effect
    /// columns when the roots are independent.
    #[default]
    Centered,
}

impl std::str::FromStr for InteractionCoding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "raw" => Ok(InteractionCoding::Raw),
            "centered" => Ok(InteractionCoding::Centered),
            other => Err(Error::InvalidParameter(format!("unknown interaction coding {other:?}"))),
        }
    }
}

/// Raw design column of `t` (unstandardized ξ/ζ codings and their products).
pub fn term_column(g: &GenotypeMatrix, t: &EffectTerm) -> Result<Vec<f64>> {
    CodedGenotypes::for_snps(g, t.snps())?.column(t, InteractionCoding::Raw)
}

/// Design column of `t` under the requested interaction coding.
pub fn term_column_with(
    g: &GenotypeMatrix,
    t: &EffectTerm,
    coding: InteractionCoding,
) -> Result<Vec<f64>> {
    CodedGenotypes::for_snps(g, t.snps())?.column(t, coding)
}

/// Dense ξ and ζ columns for a set of SNPs, plus their sample means.
///
/// Screening builds this once for the whole genome and forms interaction
/// columns from it on the fly.
#[derive(Debug, Clone)]
pub struct CodedGenotypes {
    n: usize,
    p: usize,
    xi: Vec<f64>,
    zeta: Vec<f64>,
    xi_mean: Vec<f64>,
    zeta_mean: Vec<f64>,
    present: Vec<bool>,
}

impl CodedGenotypes {
    pub fn new(g: &GenotypeMatrix) -> Result<Self> {
        Self::for_snps(g, 0..g.p())
    }

    /// Encode only the listed SNPs; other columns stay unavailable.
    pub fn for_snps(g: &GenotypeMatrix, snps: impl IntoIterator<Item = usize>) -> Result<Self> {
        let (n, p) = (g.n(), g.p());
        let mut out = CodedGenotypes {
            n,
            p,
            xi: vec![0.0; n * p],
            zeta: vec![0.0; n * p],
            xi_mean: vec![0.0; p],
            zeta_mean: vec![0.0; p],
            present: vec![false; p],
        };
        for j in snps {
            let col = check_column(g, j)?;
            let (xs, zs) = (&mut out.xi[j * n..(j + 1) * n], &mut out.zeta[j * n..(j + 1) * n]);
            for ((x, z), &c) in xs.iter_mut().zip(zs.iter_mut()).zip(col) {
                *x = additive_code(c).expect("checked");
                *z = 1.0 - x.abs();
            }
            out.xi_mean[j] = xs.iter().sum::<f64>() / n as f64;
            out.zeta_mean[j] = zs.iter().sum::<f64>() / n as f64;
            out.present[j] = true;
        }
        Ok(out)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn xi(&self, j: usize) -> &[f64] {
        &self.xi[j * self.n..(j + 1) * self.n]
    }

    pub fn zeta(&self, j: usize) -> &[f64] {
        &self.zeta[j * self.n..(j + 1) * self.n]
    }

    fn root(&self, coding: Coding, j: usize) -> (&[f64], f64) {
        match coding {
            Coding::Additive => (self.xi(j), self.xi_mean[j]),
            Coding::Dominant => (self.zeta(j), self.zeta_mean[j]),
        }
    }

    fn check(&self, t: &EffectTerm) -> Result<()> {
        for j in t.snps() {
            if j >= self.p || !self.present[j] {
                return Err(Error::InvalidTerm(format!("SNP index {j} not encoded for {t}")));
            }
        }
        Ok(())
    }

    /// Write the column of `t` into `out` (length n).
    pub fn fill(&self, t: &EffectTerm, coding: InteractionCoding, out: &mut [f64]) {
        let (c1, c2) = t.kind.roots();
        let (a, ma) = self.root(c1, t.j);
        match t.j2 {
            None => out.copy_from_slice(a),
            Some(j2) => {
                let (b, mb) = self.root(c2, j2);
                match coding {
                    InteractionCoding::Raw => {
                        for ((o, x), y) in out.iter_mut().zip(a).zip(b) {
                            *o = x * y;
                        }
                    }
                    InteractionCoding::Centered => {
                        for ((o, x), y) in out.iter_mut().zip(a).zip(b) {
                            *o = (x - ma) * (y - mb);
                        }
                    }
                }
            }
        }
    }

    pub fn column(&self, t: &EffectTerm, coding: InteractionCoding) -> Result<Vec<f64>> {
        self.check(t)?;
        let mut out = vec![0.0; self.n];
        self.fill(t, coding, &mut out);
        Ok(out)
    }

    /// Sample means of the two root codings of `t` (the second is `None` for
    /// main effects). Needed to rebuild centered columns on new samples.
    pub fn root_means(&self, t: &EffectTerm) -> (f64, Option<f64>) {
        let (c1, c2) = t.kind.roots();
        (self.root(c1, t.j).1, t.j2.map(|j2| self.root(c2, j2).1))
    }
}

/// Build a term's column on `g` using externally supplied root means for the
/// centered coding (e.g. training-sample means applied to validation rows).
pub fn term_column_centered_at(
    g: &GenotypeMatrix,
    t: &EffectTerm,
    means: (f64, Option<f64>),
) -> Result<Vec<f64>> {
    let coded = CodedGenotypes::for_snps(g, t.snps())?;
    let (c1, c2) = t.kind.roots();
    let (a, _) = coded.root(c1, t.j);
    Ok(match (t.j2, means.1) {
        (Some(j2), Some(mb)) => {
            let (b, _) = coded.root(c2, j2);
            a.iter().zip(b).map(|(x, y)| (x - means.0) * (y - mb)).collect()
        }
        _ => a.to_vec(),
    })
}
