use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("SNP {snp} (column {index}) has missing calls; impute genotypes first")]
    MissingCall { snp: String, index: usize },

    #[error("SNP {0} has no observed genotype calls; cannot impute")]
    AllMissing(String),

    #[error("coded value {0} is not an additive code in {{-1, 0, 1}}")]
    InvalidCode(f64),

    #[error("invalid effect term: {0}")]
    InvalidTerm(String),

    #[error("column has zero variance")]
    ZeroVariance,

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("design is rank deficient: {0}")]
    RankDeficient(String),

    #[error("RATE infeasible: increase alpha or beta (alpha*(p_n-n) = {lhs:.6} <= ln(1/beta) = {rhs:.6})")]
    RateInfeasible { lhs: f64, rhs: f64 },

    #[error("RATE needs more candidates than samples (p_n = {p_n}, n = {n}); use --threshold-mode hard or topk")]
    RateTooFewCandidates { p_n: usize, n: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("penalized design has {columns} columns, above the safety limit of {limit}; tighten screening")]
    DesignTooWide { columns: usize, limit: usize },

    #[error("penalized solver failed to converge at every lambda on the grid")]
    NoConvergence,

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("phenotype and genotype samples differ: {0}")]
    SampleMismatch(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
