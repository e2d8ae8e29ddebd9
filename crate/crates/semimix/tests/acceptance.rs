//! Acceptance suite: every study the library must reproduce, one test per
//! criterion, each printing a PASS/FAIL line. Run with
//!
//! ```text
//! cargo test -p semimix --test acceptance -- --nocapture --test-threads 1
//! ```
//!
//! The power and error-rate studies are Monte Carlo with fixed seeds, so
//! every run is deterministic; the asserted bands come from the reference
//! studies these simulations reproduce.

use semimix::dist::{FamilySpec, ParamSet};
use semimix::em::EmConfig;
use semimix::mixtest::{p_value, ResampleMethod, TestConfig};
use semimix::sim::{
    fpr_study, power_curve, AnalysisFamily, ComparatorTest, DgpSpec, FprDesign, SimSetup,
    ZinbVariant,
};
use semimix::FamilyKind;

const REPS: usize = 1000;
const PERMUTATIONS: usize = 100;
const ALPHA: f64 = 0.05;

fn report(criterion: &str, pass: bool, detail: &str) {
    println!(
        "acceptance {criterion}: {} ({detail})",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "{criterion}: {detail}");
}

/// EM controls used across the studies: two random restarts on top of the
/// deterministic starts, and an iteration cap that keeps plateau basins from
/// dominating runtime (the cap applies identically to observed and resampled
/// fits, so calibration is unaffected).
fn study_em(restarts: u32) -> EmConfig {
    EmConfig {
        restarts,
        max_iter: 150,
        ..EmConfig::default()
    }
}

fn power_setup(restarts: u32) -> SimSetup {
    let mut setup = SimSetup::exact_rejection(
        AnalysisFamily::FromData(FamilyKind::Gaussian),
        ResampleMethod::Permutation,
        PERMUTATIONS,
        ALPHA,
    );
    setup.test.em = study_em(restarts);
    setup
}

fn paper_design(mu_b: f64, var_b: f64) -> DgpSpec {
    DgpSpec {
        n: 100,
        d: 5,
        u: 50,
        family: FamilySpec::gaussian_unpenalized(),
        theta_a: ParamSet::gaussian(0.0, 1.0).unwrap(),
        theta_b: ParamSet::gaussian(mu_b, var_b).unwrap(),
        t_df: None,
    }
}

fn in_band(x: f64, lo: f64, hi: f64) -> bool {
    (lo..=hi).contains(&x)
}

#[test]
fn criterion_1_power_mean_shift() {
    let rows = power_curve(
        &paper_design(3.0, 1.0),
        &power_setup(2),
        &[ComparatorTest::Mixture, ComparatorTest::TTest],
        REPS,
        &[ALPHA],
        101,
    )
    .unwrap();
    let (mix, t) = (rows[0].power, rows[1].power);
    report(
        "1 power mean shift",
        in_band(mix, 0.46, 0.58) && in_band(t, 0.12, 0.22),
        &format!("mixture={mix:.3} in [0.46,0.58], t={t:.3} in [0.12,0.22]"),
    );
}

#[test]
fn criterion_2_power_combined_shift() {
    let rows = power_curve(
        &paper_design(3.0, 5.0),
        &power_setup(2),
        &[ComparatorTest::Mixture, ComparatorTest::KsTest],
        REPS,
        &[ALPHA],
        102,
    )
    .unwrap();
    let (mix, ks) = (rows[0].power, rows[1].power);
    report(
        "2 power combined shift",
        in_band(mix, 0.42, 0.54) && in_band(ks, 0.02, 0.09),
        &format!("mixture={mix:.3} in [0.42,0.54], ks={ks:.3} in [0.02,0.09]"),
    );
}

#[test]
fn criterion_3_power_variance_shift() {
    let rows = power_curve(
        &paper_design(0.0, 5.0),
        &power_setup(2),
        &[ComparatorTest::Mixture, ComparatorTest::FTest],
        REPS,
        &[ALPHA],
        103,
    )
    .unwrap();
    let (mix, f) = (rows[0].power, rows[1].power);
    report(
        "3 power variance shift",
        in_band(mix, 0.06, 0.15) && in_band(f, 0.19, 0.29),
        &format!("mixture={mix:.3} in [0.06,0.15], f={f:.3} in [0.19,0.29]"),
    );
}

fn fpr_base(restarts: u32) -> TestConfig {
    TestConfig {
        b_max: PERMUTATIONS,
        batch: PERMUTATIONS,
        exceedance_cap: PERMUTATIONS,
        em: study_em(restarts),
        ..TestConfig::default()
    }
}

/// Spearman rank correlation.
fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0;
            for &k in &idx[i..=j] {
                r[k] = avg;
            }
            i = j + 1;
        }
        r
    }
    let (rx, ry) = (ranks(xs), ranks(ys));
    let n = xs.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut dx = 0.0;
    let mut dy = 0.0;
    for i in 0..xs.len() {
        num += (rx[i] - mx) * (ry[i] - my);
        dx += (rx[i] - mx).powi(2);
        dy += (ry[i] - my).powi(2);
    }
    num / (dx * dy).sqrt()
}

#[test]
fn criterion_4_type1_gaussian_unlabeled_fractions() {
    let percents: Vec<u32> = (0..10).map(|k| 5 + 10 * k).collect();
    let points = fpr_study(
        &FprDesign::UnlabeledFraction {
            percents: percents.clone(),
        },
        &fpr_base(1),
        REPS,
        ALPHA,
        104,
    )
    .unwrap();
    let fprs: Vec<f64> = points.iter().map(|p| p.fpr).collect();
    let all_in = fprs.iter().all(|&f| in_band(f, 0.030, 0.070));
    let xs: Vec<f64> = percents.iter().map(|&p| p as f64).collect();
    let rho = spearman(&xs, &fprs);
    report(
        "4 type-I gaussian across unlabeled fractions",
        all_in && rho.abs() < 0.6,
        &format!("fprs={fprs:.3?} all in [0.030,0.070], spearman rho={rho:.3}"),
    );
}

#[test]
fn criterion_5_robustness_t_distribution() {
    let points = fpr_study(
        &FprDesign::TDegrees {
            dfs: (1..=10).collect(),
        },
        &fpr_base(1),
        REPS,
        ALPHA,
        105,
    )
    .unwrap();
    let fprs: Vec<f64> = points.iter().map(|p| p.fpr).collect();
    let all_in = fprs.iter().all(|&f| in_band(f, 0.030, 0.075));
    report(
        "5 robustness to t-distributed data",
        all_in,
        &format!("fprs={fprs:.3?} all in [0.030,0.075]"),
    );
}

#[test]
fn criterion_6_nb_dispersion_misspecification() {
    let points = fpr_study(
        &FprDesign::NbDispersionMisspec {
            mu: 10.0,
            phi_true: 0.2,
            phi_fits: vec![0.2, 0.3, 0.1],
        },
        &fpr_base(1),
        REPS,
        ALPHA,
        106,
    )
    .unwrap();
    let fprs: Vec<f64> = points.iter().map(|p| p.fpr).collect();
    let targets = [0.050, 0.052, 0.053];
    let ok = fprs
        .iter()
        .zip(targets)
        .all(|(&f, t)| (f - t).abs() <= 0.015);
    report(
        "6 NB dispersion misspecification",
        ok,
        &format!("fprs={fprs:.3?} within 0.015 of {targets:?}"),
    );
}

#[test]
fn criterion_7_zinb_misspecification() {
    let points = fpr_study(
        &FprDesign::ZinbMisspec {
            mu: 10.0,
            phi: 0.2,
            pi: 0.2,
            variants: vec![
                ZinbVariant::Known,
                ZinbVariant::PiFixed(0.4),
                ZinbVariant::PiFixed(0.0),
                ZinbVariant::JointMle { n: 1000 },
            ],
        },
        &fpr_base(2),
        REPS,
        ALPHA,
        107,
    )
    .unwrap();
    let f: Vec<f64> = points.iter().map(|p| p.fpr).collect();
    let ok = f[0] <= 0.055 && f[1] <= 0.055 && f[2] >= 0.058 && in_band(f[3], 0.045, 0.075);
    report(
        "7 ZINB misspecification",
        ok,
        &format!(
            "known={:.3}<=0.055, pi=0.4: {:.3}<=0.055, pi=0: {:.3}>=0.058, joint-mle={:.3} in [0.045,0.075]",
            f[0], f[1], f[2], f[3]
        ),
    );
}

#[test]
fn criterion_9_degenerate_pvalue_arithmetic() {
    let p = p_value(10, 1_000_000);
    report(
        "9 degenerate p-value bound",
        p > 0.05 / 26_516.0,
        &format!("p_value(10, 1e6)={p:.3e} > 0.05/26516={:.3e}", 0.05 / 26_516.0),
    );
}

// ---------------------------------------------------------------------------
// criterion 8: property suite

#[test]
fn criterion_8a_8b_em_ascent_and_nonnegative_lr() {
    use rand::Rng;
    use semimix::dist::sample;
    use semimix::em::{fit_mixture_traced, fit_null, lr_statistic};
    use semimix::stream::rng_for;
    use semimix::Dataset;

    let cfg = EmConfig {
        restarts: 1,
        max_iter: 60,
        ..EmConfig::default()
    };
    let mut worst_drop: f64 = 0.0;
    let mut min_lr = f64::INFINITY;
    let total = 10_000;
    for rep in 0..total {
        let mut rng = rng_for(0x8a8b, &[rep as u64]);
        let gaussian = rep % 2 == 0;
        let n = 8 + (rng.gen::<u64>() % 33) as usize;
        let u = 2 + (rng.gen::<u64>() % (n as u64 - 3)) as usize;
        let (family, y): (FamilySpec, Vec<f64>) = if gaussian {
            let mu_b: f64 = rng.gen::<f64>() * 4.0 - 2.0;
            let fam = FamilySpec::gaussian_unpenalized();
            let pa = ParamSet::gaussian(0.0, 1.0).unwrap();
            let pb = ParamSet::gaussian(mu_b, 0.5 + rng.gen::<f64>() * 2.0).unwrap();
            let y = (0..n)
                .map(|i| {
                    let p = if i >= n - u / 2 { &pb } else { &pa };
                    sample(&fam, p, 1.0, &mut rng)
                })
                .collect();
            (fam, y)
        } else {
            let fam = FamilySpec::neg_binomial(0.05 + rng.gen::<f64>() * 1.5).unwrap();
            let pa = ParamSet::count(1.0 + rng.gen::<f64>() * 15.0).unwrap();
            let pb = ParamSet::count(1.0 + rng.gen::<f64>() * 25.0).unwrap();
            let y = (0..n)
                .map(|i| {
                    let p = if i >= n - u / 2 { &pb } else { &pa };
                    sample(&fam, p, 1.0, &mut rng)
                })
                .collect();
            (fam, y)
        };
        let x: Vec<bool> = (0..n).map(|i| i >= n - u).collect();
        let data = match Dataset::new(y, x, None) {
            Ok(d) => d,
            Err(_) => continue,
        };
        let family = if gaussian {
            match semimix::em::default_family(FamilyKind::Gaussian, &data) {
                Ok(f) => f,
                Err(_) => continue, // constant labeled draw, no anchor
            }
        } else {
            family
        };
        let mut em = cfg.clone();
        em.seed = rep as u64;
        let (fit, trajectories) = fit_mixture_traced(&data, &family, &em).unwrap();
        for tr in &trajectories {
            for w in tr.windows(2) {
                worst_drop = worst_drop.max(w[0] - w[1]);
            }
        }
        let (_, ll0) = fit_null(&data, &family).unwrap();
        min_lr = min_lr.min(lr_statistic(&fit, ll0));
    }
    report(
        "8a EM ascent over 10^4 random fits",
        worst_drop <= 1e-10,
        &format!("worst per-iteration drop {worst_drop:.2e} <= 1e-10"),
    );
    report(
        "8b LR statistic non-negative",
        min_lr >= 0.0,
        &format!("min LR {min_lr:.2e}"),
    );
}

#[test]
fn criterion_8c_pvalue_uniformity_under_null() {
    let spec = DgpSpec {
        n: 100,
        d: 0,
        u: 50,
        family: FamilySpec::gaussian_unpenalized(),
        theta_a: ParamSet::gaussian(0.0, 1.0).unwrap(),
        theta_b: ParamSet::gaussian(0.0, 1.0).unwrap(),
        t_df: None,
    };
    let mut setup = SimSetup::exact_rejection(
        AnalysisFamily::FromData(FamilyKind::Gaussian),
        ResampleMethod::Permutation,
        PERMUTATIONS,
        0.10,
    );
    setup.test.em = study_em(1);
    let alphas = [0.01, 0.05, 0.10];
    let rows = power_curve(
        &spec,
        &setup,
        &[ComparatorTest::Mixture],
        REPS,
        &alphas,
        0x8c,
    )
    .unwrap();
    let mut ok = true;
    let mut detail = String::new();
    for row in &rows {
        let band = 3.0 * (row.alpha * (1.0 - row.alpha) / REPS as f64).sqrt();
        let inside = (row.power - row.alpha).abs() <= band;
        ok &= inside;
        detail.push_str(&format!(
            "cdf({})={:.4} (band +-{:.4}) ",
            row.alpha, row.power, band
        ));
    }
    report("8c p-value uniformity under H0", ok, detail.trim());
}

#[test]
fn criterion_8d_scan_worker_determinism() {
    use std::process::Command;
    let dir = tempfile::tempdir().unwrap();
    let geno_path = dir.path().join("geno.tsv");
    let trait_path = dir.path().join("traits.tsv");

    // synthetic: 40 individuals, 12 loci
    use rand::Rng;
    let mut rng = semimix::stream::rng_for(0x8d, &[]);
    let n = 40;
    let ids: Vec<String> = (0..n).map(|i| format!("ind{i}")).collect();
    let mut geno = String::from("id\tchrom\tpos\tgroup");
    for id in &ids {
        geno.push('\t');
        geno.push_str(id);
    }
    geno.push('\n');
    for l in 0..12 {
        geno.push_str(&format!("rs{l}\t{}\t{}\tg{}", 1 + l % 3, 1000 + 37 * l, l % 4));
        for i in 0..n {
            let call = if (i * 7 + l * 3) % 5 < 2 { 1 } else { 0 };
            geno.push_str(&format!("\t{call}"));
        }
        geno.push('\n');
    }
    std::fs::write(&geno_path, geno).unwrap();
    let mut traits = String::from("id\ttrait\n");
    for id in &ids {
        traits.push_str(&format!("{id}\t{:.6}\n", rng.gen::<f64>() * 2.0 - 1.0));
    }
    std::fs::write(&trait_path, traits).unwrap();

    let run = |workers: u32, out: &str| {
        let out_dir = dir.path().join(out);
        let status = Command::new(env!("CARGO_BIN_EXE_semimix"))
            .args([
                "scan",
                "--geno",
                geno_path.to_str().unwrap(),
                "--traits",
                trait_path.to_str().unwrap(),
                "--min-group",
                "5",
                "--b-max",
                "200",
                "--batch",
                "50",
                "--cap",
                "5",
                "--seed",
                "21",
                "--restarts",
                "1",
                "--workers",
                &workers.to_string(),
                "--out-dir",
                out_dir.to_str().unwrap(),
            ])
            .status()
            .unwrap();
        assert!(status.success());
        out_dir
    };
    let d1 = run(1, "w1");
    let d8 = run(8, "w8");
    let mut ok = true;
    let mut detail = String::new();
    for f in ["results.tsv", "memberships.tsv", "excluded.tsv", "manhattan.tsv"] {
        let a = std::fs::read(d1.join(f)).unwrap();
        let b = std::fs::read(d8.join(f)).unwrap();
        let same = a == b;
        ok &= same;
        detail.push_str(&format!("{f}:{} ", if same { "identical" } else { "DIFFERS" }));
    }
    report("8d scan determinism across 1 vs 8 workers", ok, detail.trim());
}

#[test]
fn criterion_8e_early_stop_soundness_in_null_scan() {
    use rand::Rng;
    use semimix::scan::{scan, Call, GenotypeMatrix, LocusRecord, LocusStatus, ScanConfig};
    use semimix::stream::rng_for;

    let n = 60;
    let n_loci = 1000;
    let mut rng = rng_for(0x8e, &[]);
    let traits: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
    let mut loci = Vec::new();
    let mut calls = Vec::new();
    for l in 0..n_loci {
        loci.push(LocusRecord {
            id: format!("rs{l}"),
            chrom: format!("{}", 1 + l % 22),
            pos: (l * 131) as u64,
            group: None,
        });
        let row: Vec<Call> = (0..n)
            .map(|_| if rng.gen::<f64>() < 0.4 { Call::One } else { Call::Zero })
            .collect();
        calls.push(row);
    }
    let gm = GenotypeMatrix::new(loci, calls, n).unwrap();
    let cfg = ScanConfig {
        min_group: 10,
        workers: 2,
        seed_base: 0x8e,
        alpha: ALPHA,
        test: TestConfig {
            b_max: 400,
            batch: 100,
            exceedance_cap: 10,
            em: study_em(1),
            ..TestConfig::default()
        },
        ..ScanConfig::default()
    };
    let fam = FamilySpec::gaussian_unpenalized();
    let out = scan(&traits, None, &gm, &fam, &cfg).unwrap();
    let tested = out.results.len();
    let mut stopped = 0usize;
    let mut sound = true;
    let mut failed = 0usize;
    for r in &out.results {
        match &r.status {
            LocusStatus::EarlyStopped => {
                stopped += 1;
                // even with zero further exceedances the locus could not have
                // reached its adjusted significance threshold
                let bound = (r.cap as f64 + 2.0) / (r.b_max as f64 + 1.0);
                let alpha_adj = ALPHA / tested as f64;
                sound &= r.exceedances > r.cap;
                sound &= bound > alpha_adj;
                sound &= p_value(r.exceedances, r.b_done) >= bound * (r.b_done as f64 + 1.0)
                    / (r.b_max as f64 + 1.0);
            }
            LocusStatus::Failed(..) => failed += 1,
            LocusStatus::Completed => {}
        }
    }
    let frac = stopped as f64 / tested as f64;
    report(
        "8e early-stop soundness on a null scan",
        sound && failed == 0 && frac >= 0.95,
        &format!("{stopped}/{tested} loci early-stopped ({frac:.3}), bounds sound, {failed} failures"),
    );
}

#[test]
fn criterion_8f_mwu_exact_matches_brute_force() {
    use semimix::classical::{mann_whitney, TwoSample};

    // independent oracle: enumerate assignments and count deviations of the
    // rank-sum statistic directly
    fn oracle(a: &[f64], b: &[f64]) -> f64 {
        let pooled: Vec<f64> = a.iter().chain(b.iter()).copied().collect();
        let n = pooled.len();
        let na = a.len();
        let rank_of = |v: f64| -> f64 {
            let below = pooled.iter().filter(|&&w| w < v).count() as f64;
            let equal = pooled.iter().filter(|&&w| w == v).count() as f64;
            below + (equal + 1.0) / 2.0
        };
        let u_of = |subset: &[usize]| -> f64 {
            let rs: f64 = subset.iter().map(|&i| rank_of(pooled[i])).sum();
            rs - (na * (na + 1)) as f64 / 2.0
        };
        let observed: Vec<usize> = (0..na).collect();
        let mu = (na * (n - na)) as f64 / 2.0;
        let dev = (u_of(&observed) - mu).abs();
        let mut total = 0u64;
        let mut extreme = 0u64;
        // enumerate all C(n, na) subsets via bitmasks
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize != na {
                continue;
            }
            let subset: Vec<usize> = (0..n).filter(|&i| mask & (1 << i) != 0).collect();
            total += 1;
            if (u_of(&subset) - mu).abs() >= dev - 1e-9 {
                extreme += 1;
            }
        }
        extreme as f64 / total as f64
    }

    let values = [1.3, 2.7, 3.1, 4.9, 5.2, 6.8];
    let mut checked = 0;
    let mut ok = true;
    for mask in 1u32..(1 << 6) - 1 {
        let a: Vec<f64> = (0..6).filter(|&i| mask & (1 << i) != 0).map(|i| values[i]).collect();
        let b: Vec<f64> = (0..6).filter(|&i| mask & (1 << i) == 0).map(|i| values[i]).collect();
        let s = TwoSample::new(a.clone(), b.clone()).unwrap();
        let got = mann_whitney(&s).unwrap().pvalue;
        let want = oracle(&a, &b);
        if got != want {
            ok = false;
            println!("  split {mask:06b}: implementation {got} oracle {want}");
        }
        checked += 1;
    }
    report(
        "8f MWU exact p matches brute force",
        ok && checked == 62,
        &format!("{checked} two-group splits of 6 distinct values"),
    );
}
