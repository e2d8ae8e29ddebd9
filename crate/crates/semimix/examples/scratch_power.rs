use semimix::dist::{FamilySpec, ParamSet};
use semimix::mixtest::ResampleMethod;
use semimix::sim::{power_curve, AnalysisFamily, ComparatorTest, DgpSpec, SimSetup};
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let reps: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(100);
    let restarts: u32 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(4);
    let seed: u64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(20260810);
    for (label, mu_b, var_b, comp) in [
        ("mean    ", 3.0, 1.0, ComparatorTest::TTest),
        ("combined", 3.0, 5.0, ComparatorTest::KsTest),
        ("variance", 0.0, 5.0, ComparatorTest::FTest),
    ] {
        let spec = DgpSpec {
            n: 100, d: 5, u: 50,
            family: FamilySpec::gaussian_unpenalized(),
            theta_a: ParamSet::gaussian(0.0, 1.0).unwrap(),
            theta_b: ParamSet::gaussian(mu_b, var_b).unwrap(),
            t_df: None,
        };
        let mut setup = SimSetup::exact_rejection(
            AnalysisFamily::FromData(semimix::FamilyKind::Gaussian),
            ResampleMethod::Permutation,
            100,
            0.06,
        );
        setup.test.em.restarts = restarts;
        setup.test.em.max_iter = std::env::var("EM_MAX_ITER").ok().and_then(|v| v.parse().ok()).unwrap_or(500);
        let t0 = Instant::now();
        let rows = power_curve(&spec, &setup, &[ComparatorTest::Mixture, comp], reps, &[0.05, 0.0595], seed).unwrap();
        println!(
            "{label} reps={reps} restarts={restarts}: mixture(k<=4)={:.3} mixture(k<=5)={:.3} classical={:.3}  [{:.1}s]",
            rows[0].power, rows[1].power, rows[2].power, t0.elapsed().as_secs_f64()
        );
    }
}
