//! The `semimix` command-line surface: `simulate`, `test`, `scan`, `adjust`.
//!
//! All outputs are tab-separated tables written atomically; every failure
//! exits nonzero with a single machine-parsable line
//! `error: <class>: <message>` on stderr.

use crate::covar;
use crate::data::Dataset;
use crate::dist::{FamilyKind, FamilySpec, ParamSet};
use crate::em::{self, EmConfig};
use crate::error::{Error, Result};
use crate::io::{self, fmt_float, Meta};
use crate::mixtest::{mixture_test, ResampleMethod, TestConfig, TestStatus};
use crate::scan::{
    self, Adjustment, Binarization, Call, CapMode, GenotypeMatrix, LocusRecord, LocusStatus,
    NuisancePolicy, ScanConfig,
};
use crate::sim::{
    self, AnalysisFamily, ComparatorTest, DgpSpec, FprDesign, SimSetup, ZinbVariant,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(
    name = "semimix",
    version,
    about = "Semi-supervised mixture tests for quantitative traits"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a power or false-positive-rate study.
    Simulate(SimulateArgs),
    /// Run one mixture test on a dataset file.
    Test(TestArgs),
    /// Scan a genotype matrix against a trait.
    Scan(ScanArgs),
    /// Regress a trait on covariates and emit residuals.
    Adjust(AdjustArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FamilyArg {
    Gaussian,
    Nb,
    Zinb,
}

impl FamilyArg {
    fn kind(self) -> FamilyKind {
        match self {
            FamilyArg::Gaussian => FamilyKind::Gaussian,
            FamilyArg::Nb => FamilyKind::NegBinomial,
            FamilyArg::Zinb => FamilyKind::Zinb,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Perm,
    Boot,
}

impl MethodArg {
    fn method(self) -> ResampleMethod {
        match self {
            MethodArg::Perm => ResampleMethod::Permutation,
            MethodArg::Boot => ResampleMethod::ParametricBootstrap,
        }
    }
}

/// Flags shared by the resampling commands.
#[derive(Debug, Args)]
struct TestFlags {
    /// Trait distribution family.
    #[arg(long, value_enum, default_value = "gaussian")]
    family: FamilyArg,
    /// Resampling method.
    #[arg(long, value_enum, default_value = "perm")]
    method: MethodArg,
    /// Maximum resamples per test.
    #[arg(long, default_value_t = 1000)]
    b_max: usize,
    /// Resamples between early-stop checks.
    #[arg(long, default_value_t = 1000)]
    batch: usize,
    /// Early-stop exceedance cap.
    #[arg(long, default_value_t = 10)]
    cap: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Random EM restarts on top of the moment start.
    #[arg(long, default_value_t = 4)]
    restarts: u32,
    /// Fixed dispersion (count families); estimated from the labeled block
    /// when omitted.
    #[arg(long)]
    phi: Option<f64>,
    /// Fixed zero-inflation (ZINB); estimated jointly with phi when omitted.
    #[arg(long)]
    pi: Option<f64>,
    /// Re-estimate nuisance parameters on every resample.
    #[arg(long, default_value_t = false)]
    reestimate_nuisance: bool,
}

impl TestFlags {
    fn test_config(&self, alpha: f64) -> TestConfig {
        TestConfig {
            b_max: self.b_max,
            batch: self.batch.min(self.b_max),
            exceedance_cap: self.cap,
            method: self.method.method(),
            alpha_target: alpha,
            seed: self.seed,
            em: EmConfig {
                restarts: self.restarts,
                ..EmConfig::default()
            },
            reestimate_nuisance: self.reestimate_nuisance,
        }
    }

    /// Family spec for a concrete dataset, estimating what is not supplied.
    fn family_spec(&self, data: &Dataset) -> Result<FamilySpec> {
        match (self.family.kind(), self.phi, self.pi) {
            (FamilyKind::Gaussian, _, _) => em::default_family(FamilyKind::Gaussian, data),
            (FamilyKind::NegBinomial, Some(phi), _) => FamilySpec::neg_binomial(phi),
            (FamilyKind::NegBinomial, None, _) => {
                em::default_family(FamilyKind::NegBinomial, data)
            }
            (FamilyKind::Zinb, Some(phi), Some(pi)) => FamilySpec::zinb(phi, pi),
            (FamilyKind::Zinb, None, None) => em::default_family(FamilyKind::Zinb, data),
            (FamilyKind::Zinb, _, _) => Err(Error::Input(
                "zinb needs both --phi and --pi, or neither".into(),
            )),
        }
    }

    fn describe(&self, alpha: f64) -> String {
        format!(
            "family={} method={:?} b_max={} batch={} cap={} restarts={} phi={:?} pi={:?} alpha={} reestimate={}",
            self.family.kind().name(),
            self.method.method(),
            self.b_max,
            self.batch,
            self.cap,
            self.restarts,
            self.phi,
            self.pi,
            alpha,
            self.reestimate_nuisance
        )
    }
}

#[derive(Debug, Args)]
struct TestArgs {
    /// Dataset file: TSV with columns y, x (0 = labeled, 1 = unlabeled),
    /// optional offset.
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    flags: TestFlags,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Results table destination.
    #[arg(long, default_value = "test_results.tsv")]
    out: PathBuf,
    /// Also write per-individual membership probabilities.
    #[arg(long)]
    memberships_out: Option<PathBuf>,
    /// Also write the violin-plot input table (y by group).
    #[arg(long)]
    violin_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BinarizeArg {
    ZeroVsRest,
    TwoVsRest,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AdjustArg {
    Bonferroni,
    PerGroup,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CapModeArg {
    Fixed,
    SignificanceBound,
}

#[derive(Debug, Args)]
struct ScanArgs {
    /// Genotype matrix: TSV with columns id, chrom, pos, group, then one
    /// column per individual with calls 0/1/2/NA.
    #[arg(long)]
    geno: PathBuf,
    /// Trait table: TSV with columns id, the trait column, optional
    /// covariates and offset.
    #[arg(long)]
    traits: PathBuf,
    /// Name of the trait column.
    #[arg(long, default_value = "trait")]
    trait_col: String,
    #[command(flatten)]
    flags: TestFlags,
    #[arg(long, value_enum, default_value = "zero-vs-rest")]
    binarize: BinarizeArg,
    /// Minimum individuals on each side of the binarization.
    #[arg(long, default_value_t = 50)]
    min_group: usize,
    /// Minimum minor-allele frequency.
    #[arg(long, default_value_t = 0.0)]
    maf_min: f64,
    /// Keep loci with missing calls (they fail per-locus instead).
    #[arg(long, default_value_t = false)]
    keep_missing: bool,
    #[arg(long, value_enum, default_value = "bonferroni")]
    adjust: AdjustArg,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, value_enum, default_value = "fixed")]
    cap_mode: CapModeArg,
    /// Raise per-locus budgets to ceil(m / alpha) so Bonferroni significance
    /// stays attainable.
    #[arg(long, default_value_t = false)]
    auto_b_max: bool,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Directory for results.tsv, memberships.tsv, excluded.tsv,
    /// manhattan.tsv.
    #[arg(long, default_value = "scan_out")]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct AdjustArgs {
    #[arg(long)]
    traits: PathBuf,
    #[arg(long, default_value = "trait")]
    trait_col: String,
    /// Comma-separated covariate column names.
    #[arg(long, value_delimiter = ',')]
    covariates: Vec<String>,
    /// Log-transform the trait before regression.
    #[arg(long, default_value_t = false)]
    log: bool,
    #[arg(long, default_value = "adjusted.tsv")]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DesignArg {
    #[value(alias = "power-curve")]
    Curve,
    #[value(alias = "power-grid")]
    Grid,
    Fpr,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    design: DesignArg,
    /// Named study preset (see `--list-presets`).
    #[arg(long)]
    preset: Option<String>,
    /// TOML study description (alternative to --preset).
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Replicates per design point.
    #[arg(long)]
    reps: Option<usize>,
    /// Resamples per mixture test.
    #[arg(long)]
    permutations: Option<usize>,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// EM restarts used by the mixture test.
    #[arg(long, default_value_t = 4)]
    restarts: u32,
    #[arg(long, default_value_t = false)]
    list_presets: bool,
    #[arg(long, default_value = "simulation.tsv")]
    out: PathBuf,
}

/// Entry point used by the binary.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => run_simulate(a),
        Command::Test(a) => run_test(a),
        Command::Scan(a) => run_scan(a),
        Command::Adjust(a) => run_adjust(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error: {}", msg);
            ExitCode::FAILURE
        }
    }
}

fn run_test(args: TestArgs) -> Result<()> {
    let data = io::read_dataset(&args.data)?;
    let family = args.flags.family_spec(&data)?;
    let cfg = args.flags.test_config(args.alpha);
    let r = mixture_test(&data, &family, &cfg)?;
    let (_, loglik0) = em::fit_null(&data, &family)?;

    let meta = Meta::with_seed(cfg.seed).config(args.flags.describe(args.alpha));
    let header = [
        "stat",
        "exceedances",
        "b_done",
        "pvalue",
        "status",
        "tau_hat",
        "theta_a_mean",
        "theta_a_var",
        "theta_b_mean",
        "theta_b_var",
        "loglik",
        "loglik0",
        "converged",
        "family",
        "phi",
        "pi",
    ];
    let row = vec![
        fmt_float(r.stat),
        r.exceedances.to_string(),
        r.b_done.to_string(),
        fmt_float(r.pvalue),
        status_str(&r.status).to_string(),
        fmt_float(r.fit.tau),
        fmt_float(r.fit.theta_a.mean()),
        opt_float(r.fit.theta_a.variance()),
        fmt_float(r.fit.theta_b.mean()),
        opt_float(r.fit.theta_b.variance()),
        fmt_float(r.fit.loglik),
        fmt_float(loglik0),
        r.fit.converged.to_string(),
        family.kind().name().to_string(),
        opt_float(family.dispersion()),
        opt_float(family.zero_inflation()),
    ];
    io::write_atomic(&args.out, &io::render_table(&meta, &header, &[row]))?;

    if let Some(path) = &args.memberships_out {
        let header = ["index", "y", "x", "membership_b"];
        let rows: Vec<Vec<String>> = (0..data.len())
            .map(|i| {
                vec![
                    i.to_string(),
                    fmt_float(data.y()[i]),
                    (data.x()[i] as u8).to_string(),
                    fmt_float(r.fit.memberships_b[i]),
                ]
            })
            .collect();
        io::write_atomic(path, &io::render_table(&meta, &header, &rows))?;
    }
    if let Some(path) = &args.violin_out {
        let header = ["index", "y", "group"];
        let rows: Vec<Vec<String>> = (0..data.len())
            .map(|i| {
                vec![
                    i.to_string(),
                    fmt_float(data.y()[i]),
                    (data.x()[i] as u8).to_string(),
                ]
            })
            .collect();
        io::write_atomic(path, &io::render_table(&meta, &header, &rows))?;
    }
    println!(
        "stat={} pvalue={} status={} tau={}",
        fmt_float(r.stat),
        fmt_float(r.pvalue),
        status_str(&r.status),
        fmt_float(r.fit.tau)
    );
    Ok(())
}

fn status_str(s: &TestStatus) -> &'static str {
    match s {
        TestStatus::Completed => "completed",
        TestStatus::EarlyStopped => "early-stopped",
    }
}

fn run_scan(args: ScanArgs) -> Result<()> {
    let (gm_all, individuals) = io::read_genotype_matrix(&args.geno)?;
    let table = io::read_trait_table(&args.traits, &args.trait_col)?;

    // align on the individuals present in both files, genotype column order
    let mut traits = Vec::new();
    let mut offsets = Vec::new();
    let mut keep_cols = Vec::new();
    for (col, id) in individuals.iter().enumerate() {
        if let Some(row) = table.ids.iter().position(|t| t == id) {
            keep_cols.push(col);
            traits.push(table.trait_values[row]);
            if let Some(of) = &table.offsets {
                offsets.push(of[row]);
            }
        }
    }
    if traits.len() < 4 {
        return Err(Error::Input(format!(
            "only {} individuals are shared between the genotype and trait files",
            traits.len()
        )));
    }
    let gm = subset_columns(&gm_all, &keep_cols)?;
    let use_offsets = args.flags.family.kind().is_count() && !offsets.is_empty();

    let nuisance = match (args.flags.family.kind(), args.flags.phi, args.flags.pi) {
        (FamilyKind::Gaussian, _, _) => NuisancePolicy::PerLocus,
        (FamilyKind::NegBinomial, Some(_), _) => NuisancePolicy::Fixed,
        (FamilyKind::Zinb, Some(_), Some(_)) => NuisancePolicy::Fixed,
        (FamilyKind::Zinb, None, None) | (FamilyKind::NegBinomial, None, _) => {
            NuisancePolicy::PerLocus
        }
        (FamilyKind::Zinb, _, _) => {
            return Err(Error::Input(
                "zinb needs both --phi and --pi, or neither".into(),
            ))
        }
    };
    // the family spec passed down carries the kind; fixed nuisance when given
    let family = match (args.flags.family.kind(), args.flags.phi, args.flags.pi) {
        (FamilyKind::Gaussian, _, _) => FamilySpec::gaussian_unpenalized(),
        (FamilyKind::NegBinomial, phi, _) => FamilySpec::neg_binomial(phi.unwrap_or(1.0))?,
        (FamilyKind::Zinb, phi, pi) => {
            FamilySpec::zinb(phi.unwrap_or(1.0), pi.unwrap_or(0.0))?
        }
    };

    let cfg = ScanConfig {
        binarization: match args.binarize {
            BinarizeArg::ZeroVsRest => Binarization::ZeroVsRest,
            BinarizeArg::TwoVsRest => Binarization::TwoVsRest,
        },
        min_group: args.min_group,
        maf_min: args.maf_min,
        drop_missing: !args.keep_missing,
        alpha: args.alpha,
        adjustment: match args.adjust {
            AdjustArg::Bonferroni => Adjustment::BonferroniGlobal,
            AdjustArg::PerGroup => Adjustment::PerGroup,
        },
        test: args.flags.test_config(args.alpha),
        workers: args.workers,
        seed_base: args.flags.seed,
        cap_mode: match args.cap_mode {
            CapModeArg::Fixed => CapMode::Fixed,
            CapModeArg::SignificanceBound => CapMode::SignificanceBound,
        },
        auto_b_max: args.auto_b_max,
        nuisance,
    };

    let out = scan::scan(
        &traits,
        use_offsets.then_some(offsets.as_slice()),
        &gm,
        &family,
        &cfg,
    )?;

    // worker count deliberately left out: results are worker-invariant
    let config_desc = format!(
        "{} binarize={:?} min_group={} maf_min={} adjust={:?} cap_mode={:?} auto_b_max={}",
        args.flags.describe(args.alpha),
        cfg.binarization,
        cfg.min_group,
        cfg.maf_min,
        cfg.adjustment,
        cfg.cap_mode,
        cfg.auto_b_max
    );
    let meta = Meta::with_seed(cfg.seed_base).config(config_desc);

    let results_header = [
        "id",
        "chrom",
        "pos",
        "group",
        "stat",
        "exceedances",
        "b_done",
        "pvalue",
        "pvalue_adjusted",
        "status",
        "tau_hat",
        "theta_a_mean",
        "theta_a_var",
        "theta_b_mean",
        "theta_b_var",
    ];
    let rows: Vec<Vec<String>> = out
        .results
        .iter()
        .map(|r| {
            vec![
                r.id.clone(),
                r.chrom.clone(),
                r.pos.to_string(),
                r.group.clone().unwrap_or_else(|| ".".into()),
                fmt_float(r.stat),
                r.exceedances.to_string(),
                r.b_done.to_string(),
                fmt_float(r.pvalue),
                fmt_float(r.pvalue_adjusted),
                match &r.status {
                    LocusStatus::Completed => "completed".to_string(),
                    LocusStatus::EarlyStopped => "early-stopped".to_string(),
                    LocusStatus::Failed(class, _) => format!("failed:{class}"),
                },
                fmt_float(r.tau),
                fmt_float(r.theta_a_mean),
                opt_float(r.theta_a_var),
                fmt_float(r.theta_b_mean),
                opt_float(r.theta_b_var),
            ]
        })
        .collect();
    io::write_atomic(
        &args.out_dir.join("results.tsv"),
        &io::render_table(&meta, &results_header, &rows),
    )?;

    let kept_ids: Vec<String> = keep_cols.iter().map(|&c| individuals[c].clone()).collect();
    let mut memb_header: Vec<&str> = vec!["id"];
    for id in &kept_ids {
        memb_header.push(id);
    }
    let memb_rows: Vec<Vec<String>> = out
        .memberships
        .iter()
        .map(|(idx, probs)| {
            let mut row = vec![gm.locus(*idx).id.clone()];
            row.extend(probs.iter().map(|&p| fmt_float(p)));
            row
        })
        .collect();
    io::write_atomic(
        &args.out_dir.join("memberships.tsv"),
        &io::render_table(&meta, &memb_header, &memb_rows),
    )?;

    let excl_header = ["id", "reason"];
    let excl_rows: Vec<Vec<String>> = out
        .excluded
        .iter()
        .map(|e| vec![e.id.clone(), e.reason.to_string()])
        .collect();
    io::write_atomic(
        &args.out_dir.join("excluded.tsv"),
        &io::render_table(&meta, &excl_header, &excl_rows),
    )?;

    let man_header = ["id", "chrom", "pos", "neglog10_p"];
    let man_rows: Vec<Vec<String>> = out
        .results
        .iter()
        .filter(|r| r.pvalue.is_finite())
        .map(|r| {
            vec![
                r.id.clone(),
                r.chrom.clone(),
                r.pos.to_string(),
                fmt_float(-r.pvalue.log10()),
            ]
        })
        .collect();
    io::write_atomic(
        &args.out_dir.join("manhattan.tsv"),
        &io::render_table(&meta, &man_header, &man_rows),
    )?;

    println!(
        "tested {} loci ({} excluded); results in {}",
        out.results.len(),
        out.excluded.len(),
        args.out_dir.display()
    );
    Ok(())
}

/// Keeps only the given individual columns of a genotype matrix.
fn subset_columns(gm: &GenotypeMatrix, cols: &[usize]) -> Result<GenotypeMatrix> {
    let loci: Vec<LocusRecord> = (0..gm.n_loci()).map(|i| gm.locus(i).clone()).collect();
    let calls: Vec<Vec<Call>> = (0..gm.n_loci())
        .map(|i| {
            let row = gm.calls(i);
            cols.iter().map(|&c| row[c]).collect()
        })
        .collect();
    GenotypeMatrix::new(loci, calls, cols.len())
}

fn run_adjust(args: AdjustArgs) -> Result<()> {
    let table = io::read_trait_table(&args.traits, &args.trait_col)?;
    let residuals = covar::adjust_covariates(&table, &args.covariates, args.log)?;
    let meta = Meta::default().config(format!(
        "adjust covariates={:?} log={}",
        args.covariates, args.log
    ));
    io::write_trait_table(&args.out, &meta, &table, Some(("residual", &residuals)))?;
    println!(
        "wrote residuals for {} individuals to {}",
        table.n(),
        args.out.display()
    );
    Ok(())
}

fn opt_float(v: Option<f64>) -> String {
    v.map(fmt_float).unwrap_or_else(|| "NA".into())
}

// ---------------------------------------------------------------------------
// simulate

/// TOML study description.
#[derive(Debug, Deserialize)]
struct SpecFile {
    design: String,
    dgp: Option<SpecDgp>,
    run: Option<SpecRun>,
    grid: Option<SpecGrid>,
    fpr: Option<SpecFpr>,
}

#[derive(Debug, Deserialize)]
struct SpecDgp {
    n: usize,
    d: usize,
    u: usize,
    family: String,
    #[serde(default)]
    mean_a: f64,
    #[serde(default = "one")]
    var_a: f64,
    #[serde(default)]
    mean_b: f64,
    #[serde(default = "one")]
    var_b: f64,
    phi: Option<f64>,
    pi: Option<f64>,
    t_df: Option<f64>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
struct SpecRun {
    reps: Option<usize>,
    permutations: Option<usize>,
    alphas: Option<Vec<f64>>,
    tests: Option<Vec<String>>,
    method: Option<String>,
    restarts: Option<u32>,
    seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
struct SpecGrid {
    comparator: String,
    u_values: Vec<usize>,
    d_values: Vec<usize>,
}

#[derive(Debug, Deserialize)]
struct SpecFpr {
    study: String,
    percents: Option<Vec<u32>>,
    dfs: Option<Vec<u32>>,
    phi_fits: Option<Vec<f64>>,
    mu: Option<f64>,
    phi: Option<f64>,
    pi: Option<f64>,
}

impl SpecDgp {
    fn to_spec(&self) -> Result<DgpSpec> {
        let (family, theta_a, theta_b) = match self.family.as_str() {
            "gaussian" => (
                FamilySpec::gaussian_unpenalized(),
                ParamSet::gaussian(self.mean_a, self.var_a)?,
                ParamSet::gaussian(self.mean_b, self.var_b)?,
            ),
            "nb" => (
                FamilySpec::neg_binomial(self.phi.unwrap_or(0.2))?,
                ParamSet::count(self.mean_a)?,
                ParamSet::count(self.mean_b)?,
            ),
            "zinb" => (
                FamilySpec::zinb(self.phi.unwrap_or(0.2), self.pi.unwrap_or(0.2))?,
                ParamSet::count(self.mean_a)?,
                ParamSet::count(self.mean_b)?,
            ),
            other => return Err(Error::Input(format!("unknown family '{other}'"))),
        };
        Ok(DgpSpec {
            n: self.n,
            d: self.d,
            u: self.u,
            family,
            theta_a,
            theta_b,
            t_df: self.t_df,
        })
    }
}

struct CurveStudy {
    spec: DgpSpec,
    tests: Vec<ComparatorTest>,
    alphas: Vec<f64>,
    analysis: AnalysisFamily,
    method: ResampleMethod,
    reps: usize,
    permutations: usize,
}

fn preset_curve(name: &str) -> Result<CurveStudy> {
    let gaussian = |mu_b: f64, var_b: f64| -> Result<DgpSpec> {
        Ok(DgpSpec {
            n: 100,
            d: 5,
            u: 50,
            family: FamilySpec::gaussian_unpenalized(),
            theta_a: ParamSet::gaussian(0.0, 1.0)?,
            theta_b: ParamSet::gaussian(mu_b, var_b)?,
            t_df: None,
        })
    };
    let base = |spec: DgpSpec, tests: Vec<ComparatorTest>| CurveStudy {
        spec,
        tests,
        alphas: vec![0.01, 0.05, 0.10],
        analysis: AnalysisFamily::FromData(FamilyKind::Gaussian),
        method: ResampleMethod::Permutation,
        reps: 1000,
        permutations: 100,
    };
    match name {
        "paper-gaussian" => Ok(base(
            gaussian(3.0, 1.0)?,
            vec![ComparatorTest::Mixture, ComparatorTest::TTest],
        )),
        "paper-gaussian-combined" => Ok(base(
            gaussian(3.0, 5.0)?,
            vec![ComparatorTest::Mixture, ComparatorTest::KsTest],
        )),
        "paper-gaussian-variance" => Ok(base(
            gaussian(0.0, 5.0)?,
            vec![ComparatorTest::Mixture, ComparatorTest::FTest],
        )),
        "paper-nb" => {
            let spec = DgpSpec {
                n: 100,
                d: 5,
                u: 50,
                family: FamilySpec::neg_binomial(0.2)?,
                theta_a: ParamSet::count(10.0)?,
                theta_b: ParamSet::count(20.0)?,
                t_df: None,
            };
            let mut s = base(
                spec,
                vec![
                    ComparatorTest::Mixture,
                    ComparatorTest::MannWhitney,
                    ComparatorTest::KsTest,
                ],
            );
            s.analysis = AnalysisFamily::SameAsGenerating;
            Ok(s)
        }
        other => Err(Error::Input(format!("unknown curve preset '{other}'"))),
    }
}

fn preset_fpr(name: &str) -> Result<FprDesign> {
    match name {
        "fpr-unlabeled" => Ok(FprDesign::UnlabeledFraction {
            percents: (0..10).map(|k| 5 + 10 * k).collect(),
        }),
        "fpr-tdist" => Ok(FprDesign::TDegrees {
            dfs: (1..=10).collect(),
        }),
        "fpr-nb-dispersion" => Ok(FprDesign::NbDispersionMisspec {
            mu: 10.0,
            phi_true: 0.2,
            phi_fits: vec![0.2, 0.3, 0.1],
        }),
        "fpr-zinb" => Ok(FprDesign::ZinbMisspec {
            mu: 10.0,
            phi: 0.2,
            pi: 0.2,
            variants: vec![
                ZinbVariant::Known,
                ZinbVariant::PiFixed(0.4),
                ZinbVariant::PiFixed(0.0),
                ZinbVariant::JointMle { n: 1000 },
            ],
        }),
        other => Err(Error::Input(format!("unknown fpr preset '{other}'"))),
    }
}

const PRESETS: &str = "curve: paper-gaussian, paper-gaussian-combined, paper-gaussian-variance, paper-nb\n\
grid: grid-gaussian-mean, grid-gaussian-variance, grid-gaussian-combined\n\
fpr: fpr-unlabeled, fpr-tdist, fpr-nb-dispersion, fpr-zinb";

fn preset_grid(name: &str) -> Result<(DgpSpec, ComparatorTest, Vec<usize>, Vec<usize>)> {
    let gaussian = |mu_b: f64, var_b: f64| -> Result<DgpSpec> {
        Ok(DgpSpec {
            n: 100,
            d: 0,
            u: 50,
            family: FamilySpec::gaussian_unpenalized(),
            theta_a: ParamSet::gaussian(0.0, 1.0)?,
            theta_b: ParamSet::gaussian(mu_b, var_b)?,
            t_df: None,
        })
    };
    let u_values = vec![10, 20, 30, 40, 50];
    let d_values = vec![1, 2, 5, 10, 20, 30, 40, 50];
    match name {
        "grid-gaussian-mean" => Ok((
            gaussian(3.0, 1.0)?,
            ComparatorTest::TTest,
            u_values,
            d_values,
        )),
        "grid-gaussian-variance" => Ok((
            gaussian(0.0, 5.0)?,
            ComparatorTest::FTest,
            u_values,
            d_values,
        )),
        "grid-gaussian-combined" => Ok((
            gaussian(3.0, 5.0)?,
            ComparatorTest::KsTest,
            u_values,
            d_values,
        )),
        other => Err(Error::Input(format!("unknown grid preset '{other}'"))),
    }
}

fn run_simulate(args: SimulateArgs) -> Result<()> {
    if args.list_presets {
        println!("{PRESETS}");
        return Ok(());
    }
    let spec_file: Option<SpecFile> = match &args.spec {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            Some(
                toml::from_str(&text)
                    .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?,
            )
        }
        None => None,
    };
    if spec_file.is_none() && args.preset.is_none() {
        return Err(Error::Input("provide --preset NAME or --spec FILE".into()));
    }

    // spec-file [run] settings override the flag defaults
    let mut seed = args.seed;
    let mut restarts = args.restarts;
    if let Some(f) = &spec_file {
        let declared = f.design.as_str();
        let flag = match args.design {
            DesignArg::Curve => "curve",
            DesignArg::Grid => "grid",
            DesignArg::Fpr => "fpr",
        };
        if declared != flag {
            return Err(Error::Input(format!(
                "spec file declares design '{declared}' but --design is '{flag}'"
            )));
        }
        if let Some(run) = &f.run {
            if let Some(s) = run.seed {
                seed = s;
            }
            if let Some(r) = run.restarts {
                restarts = r;
            }
        }
    }

    let mk_setup = |analysis: AnalysisFamily, method: ResampleMethod, b: usize| {
        let mut setup = SimSetup::with_budget(analysis, method, b);
        setup.test.em.restarts = restarts;
        setup
    };

    match args.design {
        DesignArg::Curve => {
            let study = match (&args.preset, &spec_file) {
                (Some(name), _) => preset_curve(name)?,
                (None, Some(f)) => {
                    let dgp = f
                        .dgp
                        .as_ref()
                        .ok_or_else(|| Error::Input("spec file needs a [dgp] table".into()))?;
                    let run = f.run.as_ref();
                    let spec = dgp.to_spec()?;
                    let analysis = match spec.family.kind() {
                        FamilyKind::Gaussian => AnalysisFamily::FromData(FamilyKind::Gaussian),
                        _ => AnalysisFamily::SameAsGenerating,
                    };
                    CurveStudy {
                        spec,
                        tests: run
                            .and_then(|r| r.tests.clone())
                            .unwrap_or_else(|| vec!["mixture".into(), "t".into()])
                            .iter()
                            .map(|s| ComparatorTest::parse(s))
                            .collect::<Result<_>>()?,
                        alphas: run
                            .and_then(|r| r.alphas.clone())
                            .unwrap_or_else(|| vec![0.05]),
                        analysis,
                        method: match run.and_then(|r| r.method.as_deref()) {
                            Some("boot") => ResampleMethod::ParametricBootstrap,
                            _ => ResampleMethod::Permutation,
                        },
                        reps: run.and_then(|r| r.reps).unwrap_or(1000),
                        permutations: run.and_then(|r| r.permutations).unwrap_or(100),
                    }
                }
                _ => unreachable!("validated above"),
            };
            let reps = args.reps.unwrap_or(study.reps);
            let b = args.permutations.unwrap_or(study.permutations);
            let setup = mk_setup(study.analysis.clone(), study.method, b);
            let rows = sim::power_curve(
                &study.spec,
                &setup,
                &study.tests,
                reps,
                &study.alphas,
                seed,
            )?;
            let meta = Meta::with_seed(seed).config(format!(
                "curve preset={:?} reps={reps} permutations={b} restarts={}",
                args.preset, restarts
            ));
            let header = ["test", "alpha", "power", "reps"];
            let out_rows: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    vec![
                        r.test.name().to_string(),
                        fmt_float(r.alpha),
                        fmt_float(r.power),
                        r.reps.to_string(),
                    ]
                })
                .collect();
            io::write_atomic(&args.out, &io::render_table(&meta, &header, &out_rows))?;
            for r in &rows {
                println!("{}\talpha={}\tpower={}", r.test.name(), r.alpha, r.power);
            }
        }
        DesignArg::Grid => {
            let (base, comparator, u_values, d_values) = match (&args.preset, &spec_file) {
                (Some(name), _) => preset_grid(name)?,
                (None, Some(f)) => {
                    let dgp = f
                        .dgp
                        .as_ref()
                        .ok_or_else(|| Error::Input("spec file needs a [dgp] table".into()))?;
                    let grid = f
                        .grid
                        .as_ref()
                        .ok_or_else(|| Error::Input("spec file needs a [grid] table".into()))?;
                    (
                        dgp.to_spec()?,
                        ComparatorTest::parse(&grid.comparator)?,
                        grid.u_values.clone(),
                        grid.d_values.clone(),
                    )
                }
                _ => unreachable!("validated above"),
            };
            let reps = args.reps.unwrap_or(100);
            let b = args.permutations.unwrap_or(100);
            let analysis = match base.family.kind() {
                FamilyKind::Gaussian => AnalysisFamily::FromData(FamilyKind::Gaussian),
                _ => AnalysisFamily::SameAsGenerating,
            };
            let setup = mk_setup(analysis, ResampleMethod::Permutation, b);
            let cells = sim::power_grid(
                &base,
                &u_values,
                &d_values,
                comparator,
                &setup,
                reps,
                args.alpha,
                seed,
            )?;
            let meta = Meta::with_seed(seed).config(format!(
                "grid preset={:?} comparator={} reps={reps} permutations={b}",
                args.preset,
                comparator.name()
            ));
            let header = [
                "u",
                "d",
                "mean_log10_ratio",
                "power_mixture",
                "power_classical",
                "reps",
            ];
            let out_rows: Vec<Vec<String>> = cells
                .iter()
                .map(|c| {
                    vec![
                        c.u.to_string(),
                        c.d.to_string(),
                        fmt_float(c.mean_log10_ratio),
                        fmt_float(c.power_mixture),
                        fmt_float(c.power_classical),
                        c.reps.to_string(),
                    ]
                })
                .collect();
            io::write_atomic(&args.out, &io::render_table(&meta, &header, &out_rows))?;
            println!("wrote {} grid cells to {}", cells.len(), args.out.display());
        }
        DesignArg::Fpr => {
            let design = match (&args.preset, &spec_file) {
                (Some(name), _) => preset_fpr(name)?,
                (None, Some(f)) => {
                    let fpr = f
                        .fpr
                        .as_ref()
                        .ok_or_else(|| Error::Input("spec file needs an [fpr] table".into()))?;
                    match fpr.study.as_str() {
                        "unlabeled" => FprDesign::UnlabeledFraction {
                            percents: fpr
                                .percents
                                .clone()
                                .unwrap_or_else(|| (0..10).map(|k| 5 + 10 * k).collect()),
                        },
                        "tdist" => FprDesign::TDegrees {
                            dfs: fpr.dfs.clone().unwrap_or_else(|| (1..=10).collect()),
                        },
                        "nb-dispersion" => FprDesign::NbDispersionMisspec {
                            mu: fpr.mu.unwrap_or(10.0),
                            phi_true: fpr.phi.unwrap_or(0.2),
                            phi_fits: fpr
                                .phi_fits
                                .clone()
                                .unwrap_or_else(|| vec![0.2, 0.3, 0.1]),
                        },
                        "zinb" => FprDesign::ZinbMisspec {
                            mu: fpr.mu.unwrap_or(10.0),
                            phi: fpr.phi.unwrap_or(0.2),
                            pi: fpr.pi.unwrap_or(0.2),
                            variants: vec![
                                ZinbVariant::Known,
                                ZinbVariant::PiFixed(0.4),
                                ZinbVariant::PiFixed(0.0),
                                ZinbVariant::JointMle { n: 1000 },
                            ],
                        },
                        other => {
                            return Err(Error::Input(format!("unknown fpr study '{other}'")))
                        }
                    }
                }
                _ => unreachable!("validated above"),
            };
            let reps = args.reps.unwrap_or(1000);
            let b = args.permutations.unwrap_or(100);
            let base_test = TestConfig {
                b_max: b,
                batch: b,
                exceedance_cap: b.max(1),
                em: EmConfig {
                    restarts,
                    ..EmConfig::default()
                },
                ..TestConfig::default()
            };
            let points = sim::fpr_study(&design, &base_test, reps, args.alpha, seed)?;
            let meta = Meta::with_seed(seed).config(format!(
                "fpr preset={:?} reps={reps} permutations={b} alpha={}",
                args.preset, args.alpha
            ));
            let header = ["design_point", "fpr", "reps"];
            let out_rows: Vec<Vec<String>> = points
                .iter()
                .map(|p| vec![p.label.clone(), fmt_float(p.fpr), p.reps.to_string()])
                .collect();
            io::write_atomic(&args.out, &io::render_table(&meta, &header, &out_rows))?;
            for p in &points {
                println!("{}\tfpr={}", p.label, p.fpr);
            }
        }
    }
    Ok(())
}
