//! Simulation harness: the three-step data-generating process and the power
//! and false-positive-rate study runners.
//!
//! Each replicate draws class labels with fixed counts, simulates the
//! observations per class, deletes the last `u` labels, and applies the tests.
//! Replicates use independent sub-streams derived from the experiment seed,
//! so runs are reproducible under any degree of parallelism.

use crate::classical::{self, TwoSample};
use crate::data::Dataset;
use crate::dist::{self, FamilyKind, FamilySpec, ParamSet};
use crate::em;
use crate::error::{Error, Result};
use crate::mixtest::{mixture_test, ResampleMethod, TestConfig};
use crate::stream::{derive_seed, rng_for};
use rand::Rng;
use rand_distr::{Distribution, StudentT};
use rayon::prelude::*;

/// Ground-truth class of one observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Class {
    A,
    B,
}

/// Recipe for one simulated dataset.
///
/// The first `n - d` observations belong to class A, the last `d` to class B;
/// the last `u` observations lose their labels. The mixture test needs
/// `u >= d` (all class-B observations unlabeled) and `u` in `[2, n-2]`.
#[derive(Debug, Clone)]
pub struct DgpSpec {
    pub n: usize,
    /// Class-B count; 0 simulates under the null.
    pub d: usize,
    /// Unlabeled count.
    pub u: usize,
    /// Generating family (carries dispersion / zero-inflation when counts).
    pub family: FamilySpec,
    pub theta_a: ParamSet,
    pub theta_b: ParamSet,
    /// Draw location-scale t observations with these degrees of freedom
    /// instead of Gaussians (robustness studies). Gaussian family only.
    pub t_df: Option<f64>,
}

impl DgpSpec {
    pub fn validate(&self) -> Result<()> {
        if self.u < self.d {
            return Err(Error::Input(format!(
                "need u >= d; got u = {}, d = {}",
                self.u, self.d
            )));
        }
        if self.u < 2 || self.u + 2 > self.n {
            return Err(Error::Input(format!(
                "u must lie in [2, n-2]; got u = {} of n = {}",
                self.u, self.n
            )));
        }
        if self.t_df.is_some() && self.family.kind() != FamilyKind::Gaussian {
            return Err(Error::Input(
                "t-distributed observations apply to the Gaussian design only".into(),
            ));
        }
        if let Some(nu) = self.t_df {
            if !nu.is_finite() || nu <= 0.0 {
                return Err(Error::Input(format!("t_df must be positive, got {nu}")));
            }
        }
        Ok(())
    }

    /// The implied mixing proportion d/u.
    pub fn tau(&self) -> f64 {
        self.d as f64 / self.u as f64
    }
}

fn draw(spec: &DgpSpec, params: &ParamSet, rng: &mut impl Rng) -> f64 {
    match spec.t_df {
        None => dist::sample(&spec.family, params, 1.0, rng),
        Some(nu) => {
            let t: f64 = StudentT::new(nu).expect("validated df").sample(rng);
            params.mean() + params.variance().expect("gaussian").sqrt() * t
        }
    }
}

/// Simulates one dataset and its ground-truth class labels.
pub fn generate(spec: &DgpSpec, rng: &mut impl Rng) -> Result<(Dataset, Vec<Class>)> {
    spec.validate()?;
    let mut y = Vec::with_capacity(spec.n);
    let mut z = Vec::with_capacity(spec.n);
    for _ in 0..spec.n - spec.d {
        y.push(draw(spec, &spec.theta_a, rng));
        z.push(Class::A);
    }
    for _ in 0..spec.d {
        y.push(draw(spec, &spec.theta_b, rng));
        z.push(Class::B);
    }
    let x: Vec<bool> = (0..spec.n).map(|i| i >= spec.n - spec.u).collect();
    Ok((Dataset::new(y, x, None)?, z))
}

/// How the analysis family is chosen for each simulated dataset.
#[derive(Debug, Clone)]
pub enum AnalysisFamily {
    /// Analyze with the generating family (nuisance known).
    SameAsGenerating,
    /// Analyze with this family, possibly misspecified.
    Fixed(FamilySpec),
    /// Re-derive nuisance parameters from each dataset's labeled block.
    FromData(FamilyKind),
}

fn resolve_family(
    analysis: &AnalysisFamily,
    spec: &DgpSpec,
    data: &Dataset,
) -> Result<FamilySpec> {
    match analysis {
        AnalysisFamily::SameAsGenerating => match spec.family.kind() {
            // the Gaussian analysis always anchors its penalty on the data
            FamilyKind::Gaussian => em::default_family(FamilyKind::Gaussian, data),
            _ => Ok(spec.family.clone()),
        },
        AnalysisFamily::Fixed(f) => Ok(f.clone()),
        AnalysisFamily::FromData(kind) => em::default_family(*kind, data),
    }
}

/// Tests compared in the studies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComparatorTest {
    Mixture,
    TTest,
    FTest,
    KsTest,
    MannWhitney,
}

impl ComparatorTest {
    pub fn name(self) -> &'static str {
        match self {
            ComparatorTest::Mixture => "mixture",
            ComparatorTest::TTest => "t",
            ComparatorTest::FTest => "f",
            ComparatorTest::KsTest => "ks",
            ComparatorTest::MannWhitney => "mwu",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "mixture" => Ok(ComparatorTest::Mixture),
            "t" => Ok(ComparatorTest::TTest),
            "f" => Ok(ComparatorTest::FTest),
            "ks" => Ok(ComparatorTest::KsTest),
            "mwu" => Ok(ComparatorTest::MannWhitney),
            other => Err(Error::Input(format!("unknown test '{other}'"))),
        }
    }
}

/// Shared controls for the simulation runners.
#[derive(Debug, Clone)]
pub struct SimSetup {
    /// Analysis family policy.
    pub analysis: AnalysisFamily,
    /// Resampling controls for the mixture test; early stopping is disabled
    /// inside the studies (the cap is raised to the budget).
    pub test: TestConfig,
}

impl SimSetup {
    /// Mixture test with `b` resamples per replicate, run to the full budget
    /// (the cap can never trigger). Use when exact p-values are needed, as in
    /// the ratio grids.
    pub fn with_budget(analysis: AnalysisFamily, method: ResampleMethod, b: usize) -> Self {
        let test = TestConfig {
            b_max: b,
            batch: b,
            exceedance_cap: b.max(1),
            method,
            ..TestConfig::default()
        };
        SimSetup { analysis, test }
    }

    /// Like [`SimSetup::with_budget`] but with the exceedance cap set to
    /// `floor(alpha_max (b+1)) - 1`. A replicate then stops early exactly
    /// when its final p-value could not fall at or below `alpha_max`, so
    /// rejection decisions at any level up to `alpha_max` are identical to a
    /// full run while null replicates stop after a fraction of the budget.
    pub fn exact_rejection(
        analysis: AnalysisFamily,
        method: ResampleMethod,
        b: usize,
        alpha_max: f64,
    ) -> Self {
        let cap = ((alpha_max * (b as f64 + 1.0)).floor() as usize).saturating_sub(1);
        let test = TestConfig {
            b_max: b,
            batch: (b / 4).max(1),
            exceedance_cap: cap.max(1),
            method,
            ..TestConfig::default()
        };
        SimSetup { analysis, test }
    }
}

fn classical_pvalue(test: ComparatorTest, data: &Dataset) -> Result<f64> {
    let (la, _) = data.labeled();
    let (un, _) = data.unlabeled();
    let s = TwoSample::new(la, un)?;
    let out = match test {
        ComparatorTest::TTest => classical::t_test(&s)?,
        ComparatorTest::FTest => classical::f_test(&s)?,
        ComparatorTest::KsTest => classical::ks_test(&s)?,
        ComparatorTest::MannWhitney => classical::mann_whitney(&s)?,
        ComparatorTest::Mixture => unreachable!("handled by the mixture path"),
    };
    Ok(out.pvalue)
}

/// P-values of the requested tests on one replicate.
fn replicate_pvalues(
    spec: &DgpSpec,
    setup: &SimSetup,
    tests: &[ComparatorTest],
    seed: u64,
    salt: u64,
    rep: usize,
) -> Result<Vec<f64>> {
    let mut rng = rng_for(seed, &[salt, rep as u64, 0x01]);
    let (data, _) = generate(spec, &mut rng)?;
    let mut out = Vec::with_capacity(tests.len());
    let mut mixture_p: Option<f64> = None;
    for &t in tests {
        let p = match t {
            ComparatorTest::Mixture => match mixture_p {
                Some(p) => p,
                None => {
                    let fam = resolve_family(&setup.analysis, spec, &data)?;
                    let mut cfg = setup.test.clone();
                    cfg.seed = derive_seed(seed, &[salt, rep as u64, 0x02]);
                    let r = mixture_test(&data, &fam, &cfg)?;
                    mixture_p = Some(r.pvalue);
                    r.pvalue
                }
            },
            other => classical_pvalue(other, &data)?,
        };
        out.push(p);
    }
    Ok(out)
}

/// One row of a power table.
#[derive(Debug, Clone)]
pub struct PowerRow {
    pub test: ComparatorTest,
    pub alpha: f64,
    pub power: f64,
    pub reps: usize,
}

/// Rejection fraction per test per significance level over `reps`
/// independent datasets.
pub fn power_curve(
    spec: &DgpSpec,
    setup: &SimSetup,
    tests: &[ComparatorTest],
    reps: usize,
    alpha_grid: &[f64],
    seed: u64,
) -> Result<Vec<PowerRow>> {
    spec.validate()?;
    let pvals: Vec<Vec<f64>> = (0..reps)
        .into_par_iter()
        .map(|rep| replicate_pvalues(spec, setup, tests, seed, 0xc0_ffee, rep))
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (ti, &test) in tests.iter().enumerate() {
        for &alpha in alpha_grid {
            let hits = pvals.iter().filter(|p| p[ti] <= alpha).count();
            rows.push(PowerRow {
                test,
                alpha,
                power: hits as f64 / reps as f64,
                reps,
            });
        }
    }
    Ok(rows)
}

/// One cell of the (u, d) power grid.
#[derive(Debug, Clone)]
pub struct GridCell {
    pub u: usize,
    pub d: usize,
    /// Mean of log10(p_mixture / p_classical); negative favors the mixture.
    pub mean_log10_ratio: f64,
    pub power_mixture: f64,
    pub power_classical: f64,
    pub reps: usize,
}

/// Runs the mixture test and one classical test on shared datasets over a
/// grid of (u, d) allocations. Cells violating the design invariants are
/// skipped.
pub fn power_grid(
    base: &DgpSpec,
    u_values: &[usize],
    d_values: &[usize],
    comparator: ComparatorTest,
    setup: &SimSetup,
    reps: usize,
    alpha: f64,
    seed: u64,
) -> Result<Vec<GridCell>> {
    if comparator == ComparatorTest::Mixture {
        return Err(Error::Input("the grid comparator must be a classical test".into()));
    }
    let tests = [ComparatorTest::Mixture, comparator];
    let mut cells = Vec::new();
    for &u in u_values {
        for &d in d_values {
            let mut spec = base.clone();
            spec.u = u;
            spec.d = d;
            if spec.validate().is_err() {
                continue;
            }
            let salt = derive_seed(0xf00d, &[u as u64, d as u64]);
            let pvals: Vec<Vec<f64>> = (0..reps)
                .into_par_iter()
                .map(|rep| replicate_pvalues(&spec, setup, &tests, seed, salt, rep))
                .collect::<Result<_>>()?;
            let mut log_ratio = 0.0;
            let mut hits_m = 0usize;
            let mut hits_c = 0usize;
            for p in &pvals {
                log_ratio += (p[0] / p[1]).log10();
                hits_m += (p[0] <= alpha) as usize;
                hits_c += (p[1] <= alpha) as usize;
            }
            cells.push(GridCell {
                u,
                d,
                mean_log10_ratio: log_ratio / reps as f64,
                power_mixture: hits_m as f64 / reps as f64,
                power_classical: hits_c as f64 / reps as f64,
                reps,
            });
        }
    }
    Ok(cells)
}

/// Null designs whose rejection rate is measured.
#[derive(Debug, Clone)]
pub enum FprDesign {
    /// Standard Gaussian data, n = 100, one point per unlabeled percentage.
    UnlabeledFraction { percents: Vec<u32> },
    /// Location-scale t data analyzed by the Gaussian mixture test,
    /// 50 labeled / 50 unlabeled.
    TDegrees { dfs: Vec<u32> },
    /// NB(mu, phi_true) data analyzed at fixed alternative dispersions.
    NbDispersionMisspec {
        mu: f64,
        phi_true: f64,
        phi_fits: Vec<f64>,
    },
    /// ZINB(mu, phi, pi) data analyzed under nuisance variants.
    ZinbMisspec {
        mu: f64,
        phi: f64,
        pi: f64,
        variants: Vec<ZinbVariant>,
    },
}

/// Nuisance handling in the ZINB misspecification study.
#[derive(Debug, Clone)]
pub enum ZinbVariant {
    /// Analyze with the true (phi, pi).
    Known,
    /// Analyze with the true phi but this zero-inflation value.
    PiFixed(f64),
    /// Estimate (phi, pi) jointly from the labeled block at this sample size.
    JointMle { n: usize },
}

/// One design point's estimated false positive rate.
#[derive(Debug, Clone)]
pub struct FprPoint {
    pub label: String,
    pub fpr: f64,
    pub reps: usize,
}

fn rejection_rate(
    spec: &DgpSpec,
    setup: &SimSetup,
    reps: usize,
    alpha: f64,
    seed: u64,
    salt: u64,
) -> Result<f64> {
    spec.validate()?;
    let tests = [ComparatorTest::Mixture];
    let hits = (0..reps)
        .into_par_iter()
        .map(|rep| {
            replicate_pvalues(spec, setup, &tests, seed, salt, rep)
                .map(|p| (p[0] <= alpha) as usize)
        })
        .try_reduce(|| 0usize, |a, b| Ok(a + b))?;
    Ok(hits as f64 / reps as f64)
}

/// Measures the mixture test's rejection rate on null data for each design
/// point. The Gaussian and t designs calibrate by permutation; the count
/// designs default to the parametric bootstrap, which is what exposes
/// nuisance misspecification (permutation stays exact regardless).
pub fn fpr_study(
    design: &FprDesign,
    base_test: &TestConfig,
    reps: usize,
    alpha: f64,
    seed: u64,
) -> Result<Vec<FprPoint>> {
    let budget = base_test.b_max;
    let mut points = Vec::new();
    match design {
        FprDesign::UnlabeledFraction { percents } => {
            for (k, &pct) in percents.iter().enumerate() {
                let n = 100;
                let u = (n * pct as usize) / 100;
                let spec = DgpSpec {
                    n,
                    d: 0,
                    u,
                    family: FamilySpec::gaussian_unpenalized(),
                    theta_a: ParamSet::gaussian(0.0, 1.0)?,
                    theta_b: ParamSet::gaussian(0.0, 1.0)?,
                    t_df: None,
                };
                let mut setup = SimSetup::exact_rejection(
                    AnalysisFamily::SameAsGenerating,
                    ResampleMethod::Permutation,
                    budget,
                    alpha,
                );
                setup.test.em = base_test.em.clone();
                let fpr = rejection_rate(&spec, &setup, reps, alpha, seed, 0x0a00 + k as u64)?;
                points.push(FprPoint {
                    label: format!("unlabeled%={pct}"),
                    fpr,
                    reps,
                });
            }
        }
        FprDesign::TDegrees { dfs } => {
            for (k, &nu) in dfs.iter().enumerate() {
                let spec = DgpSpec {
                    n: 100,
                    d: 0,
                    u: 50,
                    family: FamilySpec::gaussian_unpenalized(),
                    theta_a: ParamSet::gaussian(0.0, 1.0)?,
                    theta_b: ParamSet::gaussian(0.0, 1.0)?,
                    t_df: Some(nu as f64),
                };
                let mut setup = SimSetup::exact_rejection(
                    AnalysisFamily::FromData(FamilyKind::Gaussian),
                    ResampleMethod::Permutation,
                    budget,
                    alpha,
                );
                setup.test.em = base_test.em.clone();
                let fpr = rejection_rate(&spec, &setup, reps, alpha, seed, 0x0b00 + k as u64)?;
                points.push(FprPoint {
                    label: format!("nu={nu}"),
                    fpr,
                    reps,
                });
            }
        }
        FprDesign::NbDispersionMisspec { mu, phi_true, phi_fits } => {
            for (k, &phi_fit) in phi_fits.iter().enumerate() {
                let spec = DgpSpec {
                    n: 100,
                    d: 0,
                    u: 50,
                    family: FamilySpec::neg_binomial(*phi_true)?,
                    theta_a: ParamSet::count(*mu)?,
                    theta_b: ParamSet::count(*mu)?,
                    t_df: None,
                };
                let mut setup = SimSetup::exact_rejection(
                    AnalysisFamily::Fixed(FamilySpec::neg_binomial(phi_fit)?),
                    ResampleMethod::Permutation,
                    budget,
                    alpha,
                );
                setup.test.em = base_test.em.clone();
                let fpr = rejection_rate(&spec, &setup, reps, alpha, seed, 0x0c00 + k as u64)?;
                points.push(FprPoint {
                    label: format!("phi_hat={phi_fit}"),
                    fpr,
                    reps,
                });
            }
        }
        FprDesign::ZinbMisspec { mu, phi, pi, variants } => {
            for (k, variant) in variants.iter().enumerate() {
                // fixed nuisance values stay fixed across resamples (that is
                // the misspecification under study); estimated nuisance is
                // re-estimated on every resample, as a parametric bootstrap
                // of an estimated model requires
                let (n, analysis, reestimate, label) = match variant {
                    ZinbVariant::Known => (
                        100,
                        AnalysisFamily::Fixed(FamilySpec::zinb(*phi, *pi)?),
                        false,
                        "known".to_string(),
                    ),
                    ZinbVariant::PiFixed(p) => (
                        100,
                        AnalysisFamily::Fixed(FamilySpec::zinb(*phi, *p)?),
                        false,
                        format!("pi_hat={p}"),
                    ),
                    ZinbVariant::JointMle { n } => (
                        *n,
                        AnalysisFamily::FromData(FamilyKind::Zinb),
                        true,
                        format!("joint-mle(n={n})"),
                    ),
                };
                let spec = DgpSpec {
                    n,
                    d: 0,
                    u: n / 2,
                    family: FamilySpec::zinb(*phi, *pi)?,
                    theta_a: ParamSet::count(*mu)?,
                    theta_b: ParamSet::count(*mu)?,
                    t_df: None,
                };
                let mut setup = SimSetup::exact_rejection(
                    analysis,
                    ResampleMethod::ParametricBootstrap,
                    budget,
                    alpha,
                );
                setup.test.em = base_test.em.clone();
                setup.test.reestimate_nuisance = reestimate;
                let fpr = rejection_rate(&spec, &setup, reps, alpha, seed, 0x0d00 + k as u64)?;
                points.push(FprPoint { label, fpr, reps });
            }
        }
    }
    Ok(points)
}
