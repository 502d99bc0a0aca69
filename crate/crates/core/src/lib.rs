//! Detection of main genetic effects and pairwise epistasis in
//! quantitative-trait association studies with far more predictors than
//! samples.
//!
//! The pipeline screens main effects and then interactions rooted at the
//! surviving SNPs ([`screening`]), with screening thresholds set by
//! bootstrapped auxiliary variables, and fits SCAD or LASSO penalized least
//! squares on the reduced model ([`penalized`]). [`simulate`] reproduces a
//! synthetic benchmark design with power and false-positive scoring, and
//! [`analyze`] covers refitting, heritability and validation metrics.

pub mod analyze;
pub mod cli;
pub mod error;
pub mod genotype;
pub mod io;
pub mod penalized;
pub mod phenotype;
pub mod pipeline;
pub mod screening;
pub mod seeds;
pub mod simulate;
pub mod stats;
pub mod term;

pub use error::{Error, Result};
pub use genotype::{GenotypeMatrix, SnpInfo, MISSING};
pub use phenotype::Phenotype;
pub use term::{EffectTerm, InteractionCoding, TermKind};
