//! Genome-scale scanning.
//!
//! A scan binarizes each locus's genotype calls into labeled/unlabeled
//! groups, filters loci (missingness, group size, minor-allele frequency),
//! runs the mixture test per locus, and adjusts p-values. All surviving loci
//! advance through the resampling budget in shared batches; a locus is
//! dropped from the active set as soon as its exceedance count rules out a
//! small p-value. Per-locus RNG streams are derived from `seed_base` and the
//! locus row index, so results do not depend on worker count or scheduling.

use crate::data::Dataset;
use crate::dist::FamilySpec;
use crate::em::{self, FitResult};
use crate::error::{Error, Result};
use crate::mixtest::{self, p_value, TestConfig, TestStatus};
use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// One genotype call.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Call {
    Zero,
    One,
    Two,
    Missing,
}

impl Call {
    pub fn parse(s: &str) -> Result<Call> {
        match s {
            "0" => Ok(Call::Zero),
            "1" => Ok(Call::One),
            "2" => Ok(Call::Two),
            "NA" | "na" | "." => Ok(Call::Missing),
            other => Err(Error::Parse(format!("invalid genotype call '{other}'"))),
        }
    }

    fn minor_allele_count(self) -> Option<f64> {
        match self {
            Call::Zero => Some(0.0),
            Call::One => Some(1.0),
            Call::Two => Some(2.0),
            Call::Missing => None,
        }
    }
}

/// Locus metadata.
#[derive(Debug, Clone)]
pub struct LocusRecord {
    pub id: String,
    pub chrom: String,
    pub pos: u64,
    /// Optional gene-group identifier for per-group adjustment.
    pub group: Option<String>,
}

/// Loci-by-individuals genotype calls.
#[derive(Debug, Clone)]
pub struct GenotypeMatrix {
    loci: Vec<LocusRecord>,
    calls: Vec<Vec<Call>>,
    n_individuals: usize,
}

impl GenotypeMatrix {
    pub fn new(loci: Vec<LocusRecord>, calls: Vec<Vec<Call>>, n_individuals: usize) -> Result<Self> {
        if loci.len() != calls.len() {
            return Err(Error::Input(format!(
                "{} locus records but {} call rows",
                loci.len(),
                calls.len()
            )));
        }
        for (l, row) in loci.iter().zip(&calls) {
            if row.len() != n_individuals {
                return Err(Error::Input(format!(
                    "locus {} has {} calls, expected {}",
                    l.id,
                    row.len(),
                    n_individuals
                )));
            }
        }
        Ok(GenotypeMatrix {
            loci,
            calls,
            n_individuals,
        })
    }

    pub fn n_loci(&self) -> usize {
        self.loci.len()
    }

    pub fn n_individuals(&self) -> usize {
        self.n_individuals
    }

    pub fn locus(&self, i: usize) -> &LocusRecord {
        &self.loci[i]
    }

    pub fn calls(&self, i: usize) -> &[Call] {
        &self.calls[i]
    }
}

/// Which genotype levels form the unlabeled (modified) group.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Binarization {
    /// 0 minor alleles labeled; 1 or 2 unlabeled.
    ZeroVsRest,
    /// 0 or 1 minor alleles labeled; 2 unlabeled.
    TwoVsRest,
}

/// How p-values are multiplied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Adjustment {
    /// Multiply by the number of tested loci.
    BonferroniGlobal,
    /// Multiply by the number of tested loci in the same gene group.
    PerGroup,
}

/// How the early-stop cap is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CapMode {
    /// Use `test.exceedance_cap` as-is.
    Fixed,
    /// Derive the cap from the adjusted significance threshold: drop a locus
    /// exactly when even zero further exceedances could not reach it.
    SignificanceBound,
}

/// Scan controls.
#[derive(Debug, Clone)]
pub struct ScanConfig {
    pub binarization: Binarization,
    /// Both binarized groups must hold at least this many individuals.
    pub min_group: usize,
    /// Loci with minor-allele frequency below this are excluded.
    pub maf_min: f64,
    /// Exclude loci containing missing calls (otherwise they fail per-locus).
    pub drop_missing: bool,
    pub alpha: f64,
    pub adjustment: Adjustment,
    pub test: TestConfig,
    pub workers: usize,
    pub seed_base: u64,
    pub cap_mode: CapMode,
    /// Raise each locus's resample budget to ceil(m / alpha) so Bonferroni
    /// significance stays attainable under the chosen adjustment.
    pub auto_b_max: bool,
    /// Estimate family nuisance parameters per locus from its labeled group.
    pub nuisance: NuisancePolicy,
}

/// Where per-locus nuisance parameters come from.
#[derive(Debug, Clone)]
pub enum NuisancePolicy {
    /// Use the supplied family spec at every locus.
    Fixed,
    /// Derive them from each locus's labeled block (see [`em::default_family`]).
    PerLocus,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            binarization: Binarization::ZeroVsRest,
            min_group: 50,
            maf_min: 0.0,
            drop_missing: true,
            alpha: 0.05,
            adjustment: Adjustment::BonferroniGlobal,
            test: TestConfig::default(),
            workers: 1,
            seed_base: 0,
            cap_mode: CapMode::Fixed,
            auto_b_max: false,
            nuisance: NuisancePolicy::PerLocus,
        }
    }
}

/// Splits calls into labeled (false) / unlabeled (true) groups.
/// Missing calls are not binarizable and produce an input error.
pub fn binarize(calls: &[Call], rule: Binarization) -> Result<Vec<bool>> {
    calls
        .iter()
        .enumerate()
        .map(|(i, &c)| match (rule, c) {
            (_, Call::Missing) => Err(Error::Input(format!(
                "missing call at individual {i} cannot be binarized"
            ))),
            (Binarization::ZeroVsRest, Call::Zero) => Ok(false),
            (Binarization::ZeroVsRest, _) => Ok(true),
            (Binarization::TwoVsRest, Call::Two) => Ok(true),
            (Binarization::TwoVsRest, _) => Ok(false),
        })
        .collect()
}

/// Why a locus was excluded before testing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Exclusion {
    pub index: usize,
    pub id: String,
    pub reason: &'static str,
}

/// Applies the eligibility filters, returning eligible row indices and an
/// exclusion report. Reasons, in the order checked: "missing" (any missing
/// call while `drop_missing`), "group size" (either binarized group below
/// `min_group`), "maf" (minor-allele frequency below `maf_min`).
pub fn filter_loci(gm: &GenotypeMatrix, cfg: &ScanConfig) -> (Vec<usize>, Vec<Exclusion>) {
    let mut eligible = Vec::new();
    let mut excluded = Vec::new();
    'locus: for i in 0..gm.n_loci() {
        let calls = gm.calls(i);
        let id = || gm.locus(i).id.clone();
        if cfg.drop_missing && calls.iter().any(|&c| c == Call::Missing) {
            excluded.push(Exclusion {
                index: i,
                id: id(),
                reason: "missing",
            });
            continue 'locus;
        }
        let present: Vec<Call> = calls.iter().copied().filter(|&c| c != Call::Missing).collect();
        let unlabeled = present
            .iter()
            .filter(|&&c| match cfg.binarization {
                Binarization::ZeroVsRest => c != Call::Zero,
                Binarization::TwoVsRest => c == Call::Two,
            })
            .count();
        let labeled = present.len() - unlabeled;
        if labeled < cfg.min_group || unlabeled < cfg.min_group {
            excluded.push(Exclusion {
                index: i,
                id: id(),
                reason: "group size",
            });
            continue 'locus;
        }
        let total: f64 = present.iter().filter_map(|c| c.minor_allele_count()).sum();
        let freq = total / (2.0 * present.len() as f64);
        let maf = freq.min(1.0 - freq);
        if maf < cfg.maf_min {
            excluded.push(Exclusion {
                index: i,
                id: id(),
                reason: "maf",
            });
            continue 'locus;
        }
        eligible.push(i);
    }
    (eligible, excluded)
}

/// Terminal state of one locus in a scan.
#[derive(Debug, Clone)]
pub enum LocusStatus {
    Completed,
    EarlyStopped,
    /// The fit failed; carries the error class and message.
    Failed(String, String),
}

/// Per-locus scan result.
#[derive(Debug, Clone)]
pub struct LocusResult {
    /// Row index in the input genotype matrix.
    pub index: usize,
    pub id: String,
    pub chrom: String,
    pub pos: u64,
    pub group: Option<String>,
    pub stat: f64,
    pub exceedances: usize,
    pub b_done: usize,
    pub b_max: usize,
    pub cap: usize,
    pub pvalue: f64,
    pub pvalue_adjusted: f64,
    pub status: LocusStatus,
    pub tau: f64,
    pub theta_a_mean: f64,
    pub theta_a_var: Option<f64>,
    pub theta_b_mean: f64,
    pub theta_b_var: Option<f64>,
}

/// Scan output: per-locus results (in input order), membership rows for the
/// successfully tested loci, and the exclusion report.
#[derive(Debug, Clone)]
pub struct ScanOutput {
    pub results: Vec<LocusResult>,
    /// (locus row index, membership probabilities of class B per individual).
    pub memberships: Vec<(usize, Vec<f64>)>,
    pub excluded: Vec<Exclusion>,
}

struct LocusTask {
    index: usize,
    dataset: Dataset,
    family: FamilySpec,
    b_max: usize,
    cap: usize,
    alpha_adjusted: f64,
}

enum LocusState {
    Active {
        stat: f64,
        fit: FitResult,
        theta0: crate::dist::ParamSet,
        exceedances: usize,
        b_done: usize,
    },
    Done {
        stat: f64,
        fit: FitResult,
        exceedances: usize,
        b_done: usize,
        status: TestStatus,
    },
    Failed(Error),
}

/// Runs the mixture test across all eligible loci with a shared batch budget.
///
/// `traits` must align with the genotype matrix's individuals. The supplied
/// family is used as-is under [`NuisancePolicy::Fixed`]; otherwise its kind is
/// kept and the nuisance parameters are re-derived per locus.
pub fn scan(
    traits: &[f64],
    offsets: Option<&[f64]>,
    gm: &GenotypeMatrix,
    family: &FamilySpec,
    cfg: &ScanConfig,
) -> Result<ScanOutput> {
    if traits.len() != gm.n_individuals() {
        return Err(Error::Input(format!(
            "{} trait values for {} individuals",
            traits.len(),
            gm.n_individuals()
        )));
    }
    if cfg.min_group < 2 {
        return Err(Error::Input("min_group must be at least 2".into()));
    }
    cfg.test.validate()?;
    let (eligible, excluded) = filter_loci(gm, cfg);
    let m_global = eligible.len();

    // group sizes for per-group adjustment; ungrouped loci stand alone
    let group_size = |rec: &LocusRecord| -> usize {
        match (&cfg.adjustment, &rec.group) {
            (Adjustment::BonferroniGlobal, _) => m_global,
            (Adjustment::PerGroup, None) => 1,
            (Adjustment::PerGroup, Some(g)) => eligible
                .iter()
                .filter(|&&j| gm.locus(j).group.as_deref() == Some(g.as_str()))
                .count(),
        }
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.max(1))
        .build()
        .map_err(|e| Error::Input(format!("cannot build worker pool: {e}")))?;

    let mut tasks = Vec::with_capacity(eligible.len());
    for &i in &eligible {
        let m = group_size(gm.locus(i)).max(1);
        let alpha_adjusted = cfg.alpha / m as f64;
        let b_max = if cfg.auto_b_max {
            cfg.test.b_max.max((m as f64 / cfg.alpha).ceil() as usize)
        } else {
            cfg.test.b_max
        };
        let cap = match cfg.cap_mode {
            CapMode::Fixed => cfg.test.exceedance_cap,
            CapMode::SignificanceBound => {
                ((alpha_adjusted * (b_max as f64 + 1.0) - 1.0).floor() as i64).max(1) as usize
            }
        };
        tasks.push(prepare_locus(traits, offsets, gm, family, cfg, i, b_max, cap, alpha_adjusted));
    }

    let states: Vec<(LocusTask, LocusState)> = pool.install(|| {
        tasks
            .into_par_iter()
            .map(|task| match task {
                Ok(t) => {
                    let state = observe_locus(&t, cfg);
                    (t, state)
                }
                Err((t, e)) => (t, LocusState::Failed(e)),
            })
            .collect()
    });

    // batched active-set loop: every active locus advances by `batch`
    // resamples, then the drop rule is applied at the batch boundary
    let mut states = states;
    loop {
        let advanced: Vec<bool> = pool.install(|| {
            states
                .par_iter_mut()
                .map(|(task, state)| advance_locus(task, state, cfg))
                .collect()
        });
        if !advanced.iter().any(|&a| a) {
            break;
        }
    }

    let mut results = Vec::with_capacity(states.len());
    let mut memberships = Vec::new();
    for (task, state) in states {
        let rec = gm.locus(task.index);
        let m = group_size(rec).max(1);
        match state {
            LocusState::Done {
                stat,
                fit,
                exceedances,
                b_done,
                status,
            } => {
                let p = p_value(exceedances, b_done);
                memberships.push((task.index, fit.memberships_b.clone()));
                results.push(LocusResult {
                    index: task.index,
                    id: rec.id.clone(),
                    chrom: rec.chrom.clone(),
                    pos: rec.pos,
                    group: rec.group.clone(),
                    stat,
                    exceedances,
                    b_done,
                    b_max: task.b_max,
                    cap: task.cap,
                    pvalue: p,
                    pvalue_adjusted: (p * m as f64).min(1.0),
                    status: match status {
                        TestStatus::Completed => LocusStatus::Completed,
                        TestStatus::EarlyStopped => LocusStatus::EarlyStopped,
                    },
                    tau: fit.tau,
                    theta_a_mean: fit.theta_a.mean(),
                    theta_a_var: fit.theta_a.variance(),
                    theta_b_mean: fit.theta_b.mean(),
                    theta_b_var: fit.theta_b.variance(),
                });
            }
            LocusState::Failed(e) => results.push(LocusResult {
                index: task.index,
                id: rec.id.clone(),
                chrom: rec.chrom.clone(),
                pos: rec.pos,
                group: rec.group.clone(),
                stat: f64::NAN,
                exceedances: 0,
                b_done: 0,
                b_max: task.b_max,
                cap: task.cap,
                pvalue: f64::NAN,
                pvalue_adjusted: f64::NAN,
                status: LocusStatus::Failed(e.class().to_string(), e.to_string()),
                tau: f64::NAN,
                theta_a_mean: f64::NAN,
                theta_a_var: None,
                theta_b_mean: f64::NAN,
                theta_b_var: None,
            }),
            LocusState::Active { .. } => unreachable!("loop drains all active loci"),
        }
    }
    results.sort_by_key(|r| r.index);
    memberships.sort_by_key(|&(i, _)| i);
    Ok(ScanOutput {
        results,
        memberships,
        excluded,
    })
}

#[allow(clippy::too_many_arguments)]
fn prepare_locus(
    traits: &[f64],
    offsets: Option<&[f64]>,
    gm: &GenotypeMatrix,
    family: &FamilySpec,
    cfg: &ScanConfig,
    index: usize,
    b_max: usize,
    cap: usize,
    alpha_adjusted: f64,
) -> std::result::Result<LocusTask, (LocusTask, Error)> {
    let placeholder = |e: Error| {
        let dataset = Dataset::new(
            vec![0.0, 1.0, 0.0, 1.0],
            vec![false, false, true, true],
            None,
        )
        .expect("static placeholder");
        (
            LocusTask {
                index,
                dataset,
                family: family.clone(),
                b_max,
                cap,
                alpha_adjusted,
            },
            e,
        )
    };
    let x = match binarize(gm.calls(index), cfg.binarization) {
        Ok(x) => x,
        Err(e) => return Err(placeholder(e)),
    };
    let dataset = match Dataset::new(traits.to_vec(), x, offsets.map(|o| o.to_vec())) {
        Ok(d) => d,
        Err(e) => return Err(placeholder(e)),
    };
    let fam = match cfg.nuisance {
        NuisancePolicy::Fixed => family.clone(),
        NuisancePolicy::PerLocus => match em::default_family(family.kind(), &dataset) {
            Ok(f) => f,
            Err(e) => return Err(placeholder(e)),
        },
    };
    Ok(LocusTask {
        index,
        dataset,
        family: fam,
        b_max,
        cap,
        alpha_adjusted,
    })
}

fn locus_test_config(task: &LocusTask, cfg: &ScanConfig) -> TestConfig {
    let mut t = cfg.test.clone();
    t.b_max = task.b_max;
    t.exceedance_cap = task.cap;
    t.alpha_target = task.alpha_adjusted;
    t.seed = cfg.seed_base ^ task.index as u64;
    t
}

fn observe_locus(task: &LocusTask, cfg: &ScanConfig) -> LocusState {
    let tc = locus_test_config(task, cfg);
    let fit = match em::fit_mixture(&task.dataset, &task.family, &tc.em) {
        Ok(f) => f,
        Err(e) => return LocusState::Failed(e),
    };
    let (theta0, ll0) = match em::fit_null(&task.dataset, &task.family) {
        Ok(v) => v,
        Err(e) => return LocusState::Failed(e),
    };
    let stat = em::lr_statistic(&fit, ll0);
    LocusState::Active {
        stat,
        fit,
        theta0,
        exceedances: 0,
        b_done: 0,
    }
}

/// Advances an active locus by one batch; true if it consumed resamples.
fn advance_locus(task: &LocusTask, state: &mut LocusState, cfg: &ScanConfig) -> bool {
    let LocusState::Active {
        stat,
        fit,
        theta0,
        exceedances,
        b_done,
    } = state
    else {
        return false;
    };
    let tc = locus_test_config(task, cfg);
    let take = cfg.test.batch.min(task.b_max - *b_done);
    let stat_v = *stat;
    let batch_result: Result<usize> = (*b_done..*b_done + take)
        .map(|j| mixtest::resample_statistic_at(&task.dataset, &task.family, theta0, &tc, j))
        .try_fold(0usize, |acc, r| r.map(|t| acc + (t >= stat_v) as usize));
    match batch_result {
        Err(e) => {
            *state = LocusState::Failed(e);
            true
        }
        Ok(k) => {
            *exceedances += k;
            *b_done += take;
            let stopped = *exceedances > task.cap;
            if stopped || *b_done >= task.b_max {
                *state = LocusState::Done {
                    stat: stat_v,
                    fit: fit.clone(),
                    exceedances: *exceedances,
                    b_done: *b_done,
                    status: if stopped {
                        TestStatus::EarlyStopped
                    } else {
                        TestStatus::Completed
                    },
                };
            }
            true
        }
    }
}

/// Bonferroni-style adjustment: `min(1, p * m)` with a global `m` or a
/// per-locus group size.
pub enum AdjustmentInput<'a> {
    Global(usize),
    PerGroup(&'a [usize]),
}

pub fn adjust_pvalues(pvals: &[f64], adj: AdjustmentInput) -> Result<Vec<f64>> {
    match adj {
        AdjustmentInput::Global(m) => {
            Ok(pvals.iter().map(|p| (p * m as f64).min(1.0)).collect())
        }
        AdjustmentInput::PerGroup(sizes) => {
            if sizes.len() != pvals.len() {
                return Err(Error::Input(format!(
                    "{} group sizes for {} p-values",
                    sizes.len(),
                    pvals.len()
                )));
            }
            Ok(pvals
                .iter()
                .zip(sizes)
                .map(|(p, &m)| (p * m as f64).min(1.0))
                .collect())
        }
    }
}

/// Pearson's chi-squared test of independence on a 2x2 table, no continuity
/// correction, 1 degree of freedom.
pub fn chi2_independence_2x2(table: [[u64; 2]; 2]) -> Result<(f64, f64)> {
    let row: [f64; 2] = [
        (table[0][0] + table[0][1]) as f64,
        (table[1][0] + table[1][1]) as f64,
    ];
    let col: [f64; 2] = [
        (table[0][0] + table[1][0]) as f64,
        (table[0][1] + table[1][1]) as f64,
    ];
    let n = row[0] + row[1];
    if row.iter().chain(col.iter()).any(|&m| m == 0.0) {
        return Err(Error::Input("all row and column sums must be positive".into()));
    }
    let mut stat = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            let expected = row[i] * col[j] / n;
            let d = table[i][j] as f64 - expected;
            stat += d * d / expected;
        }
    }
    let chi = ChiSquared::new(1.0).expect("1 df");
    Ok((stat, chi.sf(stat)))
}
