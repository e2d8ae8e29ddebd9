use semimix::em::EmConfig;
use semimix::mixtest::TestConfig;
use semimix::sim::{fpr_study, FprDesign, ZinbVariant};
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let reps: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(200);
    let restarts: u32 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(1);
    let which = args.get(3).map(|s| s.as_str()).unwrap_or("all");
    let max_iter: usize = std::env::var("EM_MAX_ITER").ok().and_then(|v| v.parse().ok()).unwrap_or(500);
    let base = TestConfig {
        b_max: 100,
        batch: 100,
        exceedance_cap: 100,
        em: EmConfig { restarts, max_iter, ..EmConfig::default() },
        ..TestConfig::default()
    };
    if which == "all" || which == "gauss" {
        let t0 = Instant::now();
        let pts = fpr_study(
            &FprDesign::UnlabeledFraction { percents: vec![50] },
            &base, reps, 0.05, 99,
        ).unwrap();
        println!("gauss u%=50: fpr={:.3} [{:.1}s]", pts[0].fpr, t0.elapsed().as_secs_f64());
    }
    if which == "all" || which == "nb" {
        let t0 = Instant::now();
        let pts = fpr_study(
            &FprDesign::NbDispersionMisspec { mu: 10.0, phi_true: 0.2, phi_fits: vec![0.2] },
            &base, reps, 0.05, 100,
        ).unwrap();
        println!("nb phi=0.2: fpr={:.3} [{:.1}s]", pts[0].fpr, t0.elapsed().as_secs_f64());
    }
    if which == "all" || which == "zinb" {
        let t0 = Instant::now();
        let pts = fpr_study(
            &FprDesign::ZinbMisspec {
                mu: 10.0, phi: 0.2, pi: 0.2,
                variants: vec![ZinbVariant::Known, ZinbVariant::PiFixed(0.4), ZinbVariant::PiFixed(0.0)],
            },
            &base, reps, 0.05, 101,
        ).unwrap();
        for p in pts {
            println!("zinb {}: fpr={:.3}", p.label, p.fpr);
        }
        println!("  [{:.1}s]", t0.elapsed().as_secs_f64());
    }
    if which == "joint" {
        let t0 = Instant::now();
        let pts = fpr_study(
            &FprDesign::ZinbMisspec {
                mu: 10.0, phi: 0.2, pi: 0.2,
                variants: vec![ZinbVariant::JointMle { n: 1000 }],
            },
            &base, reps, 0.05, 102,
        ).unwrap();
        println!("zinb joint n=1000: fpr={:.3} [{:.1}s]", pts[0].fpr, t0.elapsed().as_secs_f64());
    }
    if which == "tdist" {
        let t0 = Instant::now();
        let pts = fpr_study(
            &FprDesign::TDegrees { dfs: vec![1, 5] },
            &base, reps, 0.05, 103,
        ).unwrap();
        for p in pts {
            println!("tdist {}: fpr={:.3}", p.label, p.fpr);
        }
        println!("  [{:.1}s]", t0.elapsed().as_secs_f64());
    }
}
