//! Command-line surface: argument parsing and the subcommands that compose
//! the pipeline.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use log::info;
use serde::{Deserialize, Serialize};

use crate::analyze::{heritability_report, refit_ols, validate_split, HeritabilityReport, OlsRefit, ValidationReport};
use crate::error::{Error, Result};
use crate::genotype::GenotypeMatrix;
use crate::io::{self, InputDigest, NamedEffect, OutputSet, ReportManifest, RunManifest};
use crate::penalized::{fit_model, FitOptions, LambdaGrid, PenalizedFit, PenaltyKind, PenaltySpec};
use crate::phenotype::Phenotype;
use crate::pipeline::{preprocess, ModelSpec, Preprocessing, DEFAULT_MAF_THRESHOLD};
use crate::screening::{ts_sis, RateParams, ScreenConfig, ScreenReport, ThresholdMode, UtilityKind};
use crate::seeds::{self, stage};
use crate::simulate::{
    gen_genotypes, gen_phenotype, run_experiment, score, MafMode, PipelineSpec, Score, SimConfig, METHOD_SCREEN,
};
use crate::term::InteractionCoding;

pub const REPORT_FILE: &str = "report.json";
pub const SUMMARY_FILE: &str = "summary.tsv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const GENO_FILE: &str = "genotypes.gtx";
pub const PHENO_FILE: &str = "phenotype.tsv";
pub const TRUTH_FILE: &str = "truth.json";

#[derive(Debug, Parser)]
#[command(name = "episcan", version, about = "Two-stage screening and penalized regression for main and epistatic SNP effects")]
pub struct Cli {
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, env = "EPISCAN_THREADS", default_value_t = 0)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate genotypes, a trait and the planted truth.
    Simulate(SimulateArgs),
    /// Run two-stage screening.
    Screen(ScreenCmd),
    /// Fit SCAD or LASSO on the screened terms.
    Fit(FitCmd),
    /// Refit the selected terms and report heritabilities.
    Analyze(AnalyzeCmd),
    /// Repeated train/validation splits.
    Validate(ValidateCmd),
    /// Simulation replicates scored by power and false-positive rate.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimDesign {
    #[arg(long, default_value_t = 500)]
    pub n: usize,
    #[arg(long, default_value_t = 3948)]
    pub p: usize,
    #[arg(long, default_value_t = 0.5)]
    pub rho: f64,
    #[arg(long, default_value_t = 6.0)]
    pub sigma2: f64,
    /// A common MAF, or "hetero" for the 0.5/0.35/0.2 mixture.
    #[arg(long, default_value = "0.5")]
    pub maf: String,
}

impl SimDesign {
    fn config(&self, seed: u64, coding: InteractionCoding) -> Result<SimConfig> {
        let maf = match self.maf.as_str() {
            "hetero" | "heterogeneous" => MafMode::heterogeneous(),
            v => MafMode::Homogeneous(
                v.parse().map_err(|_| Error::InvalidParameter(format!("--maf {v:?} is neither a number nor \"hetero\"")))?,
            ),
        };
        let mut cfg = SimConfig::standard(self.n, self.p, self.rho, self.sigma2, maf, seed)?;
        cfg.coding = coding;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub design: SimDesign,
    /// Interaction coding used to plant the interaction effects.
    #[arg(long, default_value = "centered")]
    pub coding: InteractionCoding,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Not part of the recorded parameters: reports do not depend on it.
    #[arg(long)]
    #[serde(skip)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct InputArgs {
    #[arg(long)]
    pub geno: PathBuf,
    #[arg(long)]
    pub pheno: PathBuf,
    /// Not part of the recorded parameters: reports do not depend on it.
    #[arg(long)]
    #[serde(skip)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_MAF_THRESHOLD)]
    pub maf_threshold: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ScreenArgs {
    #[arg(long, default_value_t = 0.01)]
    pub alpha_main: f64,
    #[arg(long, default_value_t = 0.005)]
    pub alpha_inter: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub beta: f64,
    #[arg(long, default_value = "rate")]
    pub threshold_mode: ThresholdMode,
    #[arg(long, default_value_t = 1.0)]
    pub hard_multiplier: f64,
    /// Model size per stage in topk mode.
    #[arg(long, default_value_t = 0)]
    pub k: usize,
    #[arg(long, default_value_t = crate::screening::DEFAULT_BATCH_SIZE)]
    pub batch_size: usize,
    /// marginal or conditional (adjusts for covariates).
    #[arg(long, default_value = "marginal")]
    pub utility: String,
    #[arg(long, default_value = "centered")]
    pub coding: InteractionCoding,
}

impl ScreenArgs {
    pub fn config(&self) -> Result<ScreenConfig> {
        let params = |alpha: f64| RateParams {
            alpha,
            beta: self.beta,
            mode: self.threshold_mode,
            hard_multiplier: self.hard_multiplier,
            k: self.k,
        };
        let utility = match self.utility.to_ascii_lowercase().as_str() {
            "marginal" => UtilityKind::Marginal,
            "conditional" => UtilityKind::Conditional,
            other => return Err(Error::InvalidParameter(format!("unknown utility {other:?}"))),
        };
        let cfg = ScreenConfig {
            stage1: params(self.alpha_main),
            stage2: params(self.alpha_inter),
            utility,
            coding: self.coding,
            batch_size: self.batch_size,
        };
        cfg.stage1.validate()?;
        cfg.stage2.validate()?;
        if cfg.batch_size == 0 {
            return Err(Error::InvalidParameter("--batch-size must be positive".into()));
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitArgs {
    #[arg(long, default_value = "scad")]
    pub penalty: PenaltyKind,
    #[arg(long, default_value_t = crate::penalized::DEFAULT_SCAD_A)]
    pub scad_a: f64,
    #[arg(long, default_value_t = 100)]
    pub lambda_count: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lambda_min_ratio: f64,
    /// Largest penalized design allowed, as a multiple of n.
    #[arg(long, default_value_t = 10)]
    pub width_factor: usize,
}

impl FitArgs {
    pub fn penalty(&self) -> Result<PenaltySpec> {
        let spec = PenaltySpec {
            kind: self.penalty,
            a: self.scad_a,
            grid: LambdaGrid::Auto { len: self.lambda_count, min_ratio: self.lambda_min_ratio },
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn options(&self) -> Result<FitOptions> {
        if self.width_factor == 0 {
            return Err(Error::InvalidParameter("--width-factor must be positive".into()));
        }
        Ok(FitOptions { width_factor: self.width_factor, ..FitOptions::default() })
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ScreenCmd {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub screen: ScreenArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitCmd {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub screen: ScreenArgs,
    #[command(flatten)]
    pub fit: FitArgs,
    /// Reuse the screening results of an earlier `screen` report.
    #[arg(long)]
    pub screen_report: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AnalyzeCmd {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub screen: ScreenArgs,
    #[command(flatten)]
    pub fit: FitArgs,
    /// Reuse the fit of an earlier `fit` report.
    #[arg(long)]
    pub fit_report: Option<PathBuf>,
    /// Planted truth (from `simulate`) for power and FPR.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ValidateCmd {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub screen: ScreenArgs,
    #[command(flatten)]
    pub fit: FitArgs,
    #[arg(long, default_value_t = 100)]
    pub splits: usize,
    /// Share of samples used for training in each split.
    #[arg(long, default_value_t = 0.92)]
    pub train_fraction: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ExperimentArgs {
    #[command(flatten)]
    pub design: SimDesign,
    #[command(flatten)]
    pub screen: ScreenArgs,
    #[command(flatten)]
    pub fit: FitArgs,
    #[arg(long, default_value_t = 100)]
    pub replicates: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Not part of the recorded parameters: reports do not depend on it.
    #[arg(long)]
    #[serde(skip)]
    pub out_dir: PathBuf,
}

/// Refit and heritability section of a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    /// OLS refit in the model's interaction coding.
    pub refit: OlsRefit,
    /// Heritabilities from an OLS refit on raw codings.
    pub heritability: HeritabilityReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthMetrics {
    pub universe: usize,
    pub screen: Score,
    pub fit: Option<Score>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub manifest: ReportManifest,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preprocessing: Option<Preprocessing>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub screen: Option<ScreenReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<PenalizedFit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analyze: Option<Analysis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<serde_json::Value>,
}

/// Per-stage wall clock.
struct Timer(Vec<(String, f64)>, Instant);

impl Timer {
    fn new() -> Self {
        Timer(Vec::new(), Instant::now())
    }

    fn lap(&mut self, stage: &str) {
        let now = Instant::now();
        self.0.push((stage.to_string(), (now - self.1).as_secs_f64()));
        self.1 = now;
    }
}

fn manifest(command: &str, params: &impl Serialize, seed: u64, stage_seeds: Vec<(String, u64)>, inputs: &[&Path]) -> Result<ReportManifest> {
    Ok(ReportManifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.into(),
        parameters: serde_json::to_value(params)?,
        seed,
        stage_seeds,
        inputs: inputs
            .iter()
            .map(|p| Ok(InputDigest { path: p.display().to_string(), sha256: io::file_digest(p)? }))
            .collect::<Result<_>>()?,
    })
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Write report, summary and manifest; all or nothing.
fn finish(out_dir: &Path, report: &Report, summary: &str, mut timer: Timer) -> Result<()> {
    let mut out = OutputSet::new();
    out.write(out_dir.join(REPORT_FILE), |p| io::write_json(p, report))?;
    out.write(out_dir.join(SUMMARY_FILE), |p| io::write_text(p, summary))?;
    timer.lap("write");
    let run = RunManifest {
        run: report.manifest.clone(),
        outputs: out.paths().iter().map(|p| p.display().to_string()).collect(),
        wall_seconds: timer.0,
    };
    out.write(out_dir.join(MANIFEST_FILE), |p| io::write_json(p, &run))?;
    out.commit();
    Ok(())
}

/// Loaded, imputed and filtered inputs.
struct Inputs {
    g: GenotypeMatrix,
    pheno: Phenotype,
    prep: Preprocessing,
}

fn load_inputs(args: &InputArgs) -> Result<Inputs> {
    let raw = io::load_genotypes(&args.geno)?;
    let pheno = io::load_phenotype(&args.pheno, raw.sample_ids())?;
    let (g, prep) = preprocess(&raw, args.maf_threshold, args.seed)?;
    Ok(Inputs { g, pheno, prep })
}

fn base_seeds(seed: u64) -> Vec<(String, u64)> {
    vec![
        ("impute".into(), seeds::derive(seed, &[stage::IMPUTE])),
        ("pipeline".into(), seeds::derive(seed, &[stage::PIPELINE])),
    ]
}

/// An earlier report is only reusable on the same inputs and preprocessing.
fn check_prior(prior: &Report, current: &ReportManifest, prep: &Preprocessing, path: &Path) -> Result<()> {
    // genotype and phenotype digests come first
    let digests = |m: &ReportManifest| m.inputs.iter().take(2).map(|d| d.sha256.clone()).collect::<Vec<_>>();
    if digests(&prior.manifest) != digests(current) || prior.preprocessing.as_ref() != Some(prep) {
        return Err(Error::InvalidParameter(format!(
            "{} was produced from different inputs or preprocessing",
            path.display()
        )));
    }
    Ok(())
}

fn screen_tsv(g: &GenotypeMatrix, report: &ScreenReport) -> String {
    let mut s = String::from("term\tkind\tsnp\tsnp2\tutility\n");
    for t in report.main_terms().chain(report.interaction_terms()) {
        let snp2 = t.term.j2().map_or(String::new(), |j| g.snp(j).name.clone());
        let _ = writeln!(s, "{}\t{}\t{}\t{snp2}\t{}", t.term.label(g), t.term.kind().as_str(), g.snp(t.term.j()).name, t.utility);
    }
    s
}

fn fit_tsv(g: &GenotypeMatrix, fit: &PenalizedFit, refit: Option<&OlsRefit>) -> String {
    let mut s = String::from("term\tkind\tsnp\tsnp2\tcoefficient\trefit_estimate\trefit_std_err\n");
    for (t, b) in fit.terms.iter().zip(&fit.coefficients).filter(|(_, b)| **b != 0.0) {
        let snp2 = t.j2().map_or(String::new(), |j| g.snp(j).name.clone());
        let (est, se) = refit
            .and_then(|r| r.terms.iter().find(|e| e.term == *t))
            .map_or((String::new(), String::new()), |e| (e.estimate.to_string(), e.std_err.to_string()));
        let _ = writeln!(s, "{}\t{}\t{}\t{snp2}\t{b}\t{est}\t{se}", t.label(g), t.kind().as_str(), g.snp(t.j()).name);
    }
    s
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(a) => simulate(&a),
        Command::Screen(a) => screen(&a),
        Command::Fit(a) => fit(&a),
        Command::Analyze(a) => analyze(&a),
        Command::Validate(a) => validate(&a),
        Command::Experiment(a) => experiment(&a),
    }
}

fn simulate(a: &SimulateArgs) -> Result<()> {
    let mut timer = Timer::new();
    let cfg = a.design.config(a.seed, a.coding)?;
    let g = gen_genotypes(&cfg)?;
    let pheno = gen_phenotype(&g, &cfg.truth, cfg.sigma2, cfg.coding, a.seed)?;
    timer.lap("simulate");
    ensure_dir(&a.out_dir)?;
    let mut out = OutputSet::new();
    out.write(a.out_dir.join(GENO_FILE), |p| io::save_genotypes(p, &g))?;
    out.write(a.out_dir.join(PHENO_FILE), |p| io::save_phenotype(p, g.sample_ids(), &pheno))?;
    let truth = io::truth_to_named(&cfg.truth, &g);
    out.write(a.out_dir.join(TRUTH_FILE), |p| io::write_json(p, &truth))?;
    timer.lap("write");
    let run = RunManifest {
        run: manifest(
            "simulate",
            a,
            a.seed,
            vec![
                ("maf".into(), seeds::derive(a.seed, &[stage::SIM_MAF])),
                ("genotype".into(), seeds::derive(a.seed, &[stage::SIM_GENOTYPE])),
                ("noise".into(), seeds::derive(a.seed, &[stage::SIM_NOISE])),
            ],
            &[],
        )?,
        outputs: out.paths().iter().map(|p| p.display().to_string()).collect(),
        wall_seconds: timer.0,
    };
    out.write(a.out_dir.join(MANIFEST_FILE), |p| io::write_json(p, &run))?;
    out.commit();
    info!("wrote n = {}, p = {} to {}", g.n(), g.p(), a.out_dir.display());
    Ok(())
}

fn screening_seed(seed: u64) -> u64 {
    seeds::derive(seed, &[stage::PIPELINE])
}

fn screen(a: &ScreenCmd) -> Result<()> {
    let mut timer = Timer::new();
    let cfg = a.screen.config()?;
    let inp = load_inputs(&a.input)?;
    timer.lap("load");
    let report = ts_sis(&inp.g, &inp.pheno, &cfg, screening_seed(a.input.seed))?;
    timer.lap("screen");
    let summary = screen_tsv(&inp.g, &report);
    let out = Report {
        manifest: manifest("screen", a, a.input.seed, base_seeds(a.input.seed), &[&a.input.geno, &a.input.pheno])?,
        preprocessing: Some(inp.prep),
        screen: Some(report),
        fit: None,
        analyze: None,
        metrics: None,
    };
    ensure_dir(&a.input.out_dir)?;
    finish(&a.input.out_dir, &out, &summary, timer)
}

/// Screening either rerun or taken from an earlier report.
fn obtain_screen(inp: &Inputs, cfg: &ScreenConfig, seed: u64, prior: Option<&Path>, m: &ReportManifest) -> Result<ScreenReport> {
    match prior {
        Some(path) => {
            let r: Report = io::read_json(path)?;
            check_prior(&r, m, &inp.prep, path)?;
            r.screen.ok_or_else(|| Error::InvalidParameter(format!("{} has no screen section", path.display())))
        }
        None => ts_sis(&inp.g, &inp.pheno, cfg, screening_seed(seed)),
    }
}

fn fit(a: &FitCmd) -> Result<()> {
    let mut timer = Timer::new();
    let (cfg, penalty, opts) = (a.screen.config()?, a.fit.penalty()?, a.fit.options()?);
    let inp = load_inputs(&a.input)?;
    let m = manifest("fit", a, a.input.seed, base_seeds(a.input.seed), &[&a.input.geno, &a.input.pheno])?;
    timer.lap("load");
    let report = obtain_screen(&inp, &cfg, a.input.seed, a.screen_report.as_deref(), &m)?;
    timer.lap("screen");
    let fitted = fit_model(&inp.g, &inp.pheno, &report.terms(), &penalty, report.coding, &opts)?;
    timer.lap("fit");
    let summary = fit_tsv(&inp.g, &fitted, None);
    let out = Report {
        manifest: m,
        preprocessing: Some(inp.prep),
        screen: Some(report),
        fit: Some(fitted),
        analyze: None,
        metrics: None,
    };
    ensure_dir(&a.input.out_dir)?;
    finish(&a.input.out_dir, &out, &summary, timer)
}

fn load_truth(path: &Path, g: &GenotypeMatrix) -> Result<crate::simulate::SimTruth> {
    let named: Vec<NamedEffect> = io::read_json(path)?;
    io::truth_from_named(&named, g)
}

fn analyze(a: &AnalyzeCmd) -> Result<()> {
    let mut timer = Timer::new();
    let (cfg, penalty, opts) = (a.screen.config()?, a.fit.penalty()?, a.fit.options()?);
    let inp = load_inputs(&a.input)?;
    let mut inputs: Vec<&Path> = vec![&a.input.geno, &a.input.pheno];
    if let Some(t) = &a.truth {
        inputs.push(t);
    }
    let m = manifest("analyze", a, a.input.seed, base_seeds(a.input.seed), &inputs)?;
    timer.lap("load");
    let (report, fitted) = match &a.fit_report {
        Some(path) => {
            let r: Report = io::read_json(path)?;
            check_prior(&r, &m, &inp.prep, path)?;
            match (r.screen, r.fit) {
                (Some(s), Some(f)) => (s, f),
                _ => return Err(Error::InvalidParameter(format!("{} has no fit section", path.display()))),
            }
        }
        None => {
            let s = ts_sis(&inp.g, &inp.pheno, &cfg, screening_seed(a.input.seed))?;
            timer.lap("screen");
            let f = fit_model(&inp.g, &inp.pheno, &s.terms(), &penalty, s.coding, &opts)?;
            (s, f)
        }
    };
    timer.lap("fit");
    let selected = fitted.selected();
    let refit = refit_ols(&inp.g, &inp.pheno, &selected, fitted.coding)?;
    let raw = if fitted.coding == InteractionCoding::Raw {
        refit.clone()
    } else {
        refit_ols(&inp.g, &inp.pheno, &selected, InteractionCoding::Raw)?
    };
    let heritability = heritability_report(&inp.g, &inp.pheno, &raw)?;
    timer.lap("analyze");
    let metrics = match &a.truth {
        Some(path) => {
            let truth = load_truth(path, &inp.g)?;
            let universe = report.universe_size();
            let tm = TruthMetrics {
                universe,
                screen: score(&report.terms(), &truth, universe),
                fit: Some(score(&selected, &truth, universe)),
            };
            Some(serde_json::to_value(tm)?)
        }
        None => None,
    };
    let summary = fit_tsv(&inp.g, &fitted, Some(&refit));
    let out = Report {
        manifest: m,
        preprocessing: Some(inp.prep),
        screen: Some(report),
        fit: Some(fitted),
        analyze: Some(Analysis { refit, heritability }),
        metrics,
    };
    ensure_dir(&a.input.out_dir)?;
    finish(&a.input.out_dir, &out, &summary, timer)
}

fn validate(a: &ValidateCmd) -> Result<()> {
    let mut timer = Timer::new();
    let mut cfg = a.screen.config()?;
    cfg.coding = a.screen.coding;
    let spec = ModelSpec { screen: Some(cfg), penalty: a.fit.penalty()?, coding: a.screen.coding, fit: a.fit.options()? };
    let inp = load_inputs(&a.input)?;
    timer.lap("load");
    let v: ValidationReport = validate_split(&inp.g, &inp.pheno, a.train_fraction, &spec, a.splits, a.input.seed)?;
    timer.lap("validate");
    let mut summary = String::from("split\ttrain\tvalidation\tselected\trmape\tca\n");
    for s in &v.splits {
        let _ = writeln!(summary, "{}\t{}\t{}\t{}\t{}\t{}", s.split, s.train, s.validation, s.selected, s.rmape, s.ca);
    }
    let mut stage_seeds = base_seeds(a.input.seed);
    stage_seeds.push(("split".into(), seeds::derive(a.input.seed, &[stage::SPLIT])));
    let out = Report {
        manifest: manifest("validate", a, a.input.seed, stage_seeds, &[&a.input.geno, &a.input.pheno])?,
        preprocessing: Some(inp.prep),
        screen: None,
        fit: None,
        analyze: None,
        metrics: Some(serde_json::to_value(&v)?),
    };
    ensure_dir(&a.input.out_dir)?;
    finish(&a.input.out_dir, &out, &summary, timer)
}

fn experiment(a: &ExperimentArgs) -> Result<()> {
    let mut timer = Timer::new();
    let cfg = a.design.config(a.seed, a.screen.coding)?;
    let mut screen = a.screen.config()?;
    screen.coding = cfg.coding;
    let mut penalties = vec![a.fit.penalty()?];
    let other = match a.fit.penalty {
        PenaltyKind::Scad => PenaltyKind::Lasso,
        PenaltyKind::Lasso => PenaltyKind::Scad,
    };
    penalties.push(PenaltySpec { kind: other, ..penalties[0].clone() });
    let pipeline = PipelineSpec { screen, penalties, fit: a.fit.options()? };
    let outcome = run_experiment(&cfg, &pipeline, a.replicates)?;
    timer.lap("replicates");
    let s = &outcome.summary;
    let mut summary = String::from("method\tpower\tpower_sd\tfpr\tfpr_sd\tinteraction_power\tselected\n");
    for m in &s.methods {
        let _ = writeln!(
            summary,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            m.method, m.power.mean, m.power.sd, m.fpr.mean, m.fpr.sd, m.interaction_power.mean, m.selected.mean
        );
    }
    info!(
        "{} replicates ({} failed); {METHOD_SCREEN} power {:.3}; median {:.2}s per replicate",
        s.replicates,
        s.failures,
        s.method(METHOD_SCREEN).map_or(f64::NAN, |m| m.power.mean),
        outcome.median_wall_seconds()
    );
    let out = Report {
        manifest: manifest(
            "experiment",
            a,
            a.seed,
            vec![("replicate0".into(), seeds::derive(a.seed, &[stage::REPLICATE, 0]))],
            &[],
        )?,
        preprocessing: None,
        screen: None,
        fit: None,
        analyze: None,
        metrics: Some(serde_json::to_value(&outcome.summary)?),
    };
    ensure_dir(&a.out_dir)?;
    finish(&a.out_dir, &out, &summary, timer)
}
