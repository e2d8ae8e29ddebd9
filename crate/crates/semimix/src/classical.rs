//! Classical two-sample tests used as comparators.
//!
//! All tests contrast the labeled group `a` with the unlabeled group `b` and
//! report two-sided p-values.

use crate::error::{Error, Result};
use statrs::distribution::{ContinuousCDF, FisherSnedecor, Normal, StudentsT};

/// Two groups of observations.
#[derive(Debug, Clone)]
pub struct TwoSample {
    a: Vec<f64>,
    b: Vec<f64>,
}

impl TwoSample {
    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if a.is_empty() || b.is_empty() {
            return Err(Error::Input("both groups must be non-empty".into()));
        }
        for v in a.iter().chain(b.iter()) {
            if !v.is_finite() {
                return Err(Error::Input(format!("non-finite observation {v}")));
            }
        }
        Ok(TwoSample { a, b })
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }
}

/// A test statistic with its two-sided p-value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestOutcome {
    pub stat: f64,
    pub pvalue: f64,
}

/// Which t-statistic denominator to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TVariant {
    /// Student's t with pooled variance (the default here, pairing naturally
    /// with the F-test of equal variances).
    Pooled,
    /// Welch's t with Satterthwaite degrees of freedom.
    Welch,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Unbiased sample variance.
fn sample_var(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64
}

/// Two-sided t-test of equal means with pooled variance.
pub fn t_test(s: &TwoSample) -> Result<TestOutcome> {
    t_test_with(s, TVariant::Pooled)
}

pub fn t_test_with(s: &TwoSample, variant: TVariant) -> Result<TestOutcome> {
    let (na, nb) = (s.a.len(), s.b.len());
    if na < 2 || nb < 2 {
        return Err(Error::Input("t-test needs at least 2 observations per group".into()));
    }
    let (va, vb) = (sample_var(&s.a), sample_var(&s.b));
    let diff = mean(&s.a) - mean(&s.b);
    let (stat, df) = match variant {
        TVariant::Pooled => {
            let sp2 = ((na - 1) as f64 * va + (nb - 1) as f64 * vb) / (na + nb - 2) as f64;
            let se2 = sp2 * (1.0 / na as f64 + 1.0 / nb as f64);
            if se2 <= 0.0 {
                return Err(Error::Estimation("pooled variance is zero".into()));
            }
            (diff / se2.sqrt(), (na + nb - 2) as f64)
        }
        TVariant::Welch => {
            let (ra, rb) = (va / na as f64, vb / nb as f64);
            let se2 = ra + rb;
            if se2 <= 0.0 {
                return Err(Error::Estimation("both sample variances are zero".into()));
            }
            let df = se2 * se2
                / (ra * ra / (na as f64 - 1.0) + rb * rb / (nb as f64 - 1.0));
            (diff / se2.sqrt(), df)
        }
    };
    let t = StudentsT::new(0.0, 1.0, df).expect("valid dof");
    Ok(TestOutcome {
        stat,
        pvalue: (2.0 * t.sf(stat.abs())).min(1.0),
    })
}

/// Two-sided F-test of equal variances: `F = s_a^2 / s_b^2`,
/// `p = 2 min(P(F <= f), P(F >= f))`.
pub fn f_test(s: &TwoSample) -> Result<TestOutcome> {
    let (na, nb) = (s.a.len(), s.b.len());
    if na < 2 || nb < 2 {
        return Err(Error::Input("F-test needs at least 2 observations per group".into()));
    }
    let (va, vb) = (sample_var(&s.a), sample_var(&s.b));
    if va <= 0.0 || vb <= 0.0 {
        return Err(Error::Estimation("a group has zero sample variance".into()));
    }
    let stat = va / vb;
    let f = FisherSnedecor::new((na - 1) as f64, (nb - 1) as f64).expect("valid dof");
    let cdf = f.cdf(stat);
    Ok(TestOutcome {
        stat,
        pvalue: (2.0 * cdf.min(1.0 - cdf)).min(1.0),
    })
}

/// Kolmogorov tail function `Q(lambda) = 2 sum_k (-1)^(k-1) exp(-2 k^2 lambda^2)`,
/// with the small-lambda series on the other side of the crossover.
fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // P(K <= lambda) via the theta-function series, then complement
        let t = std::f64::consts::PI * std::f64::consts::PI / (8.0 * lambda * lambda);
        let mut cdf = 0.0;
        for k in 0..20 {
            let m = (2 * k + 1) as f64;
            cdf += (-m * m * t).exp();
        }
        cdf *= (2.0 * std::f64::consts::PI).sqrt() / lambda;
        (1.0 - cdf).clamp(0.0, 1.0)
    } else {
        let mut sf = 0.0;
        for k in 1..=20 {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            let kk = k as f64;
            sf += sign * (-2.0 * kk * kk * lambda * lambda).exp();
        }
        (2.0 * sf).clamp(0.0, 1.0)
    }
}

/// Two-sample Kolmogorov-Smirnov test. The statistic is the sup distance
/// between the empirical distribution functions; the p-value is asymptotic
/// with effective size `na nb / (na + nb)`.
pub fn ks_test(s: &TwoSample) -> Result<TestOutcome> {
    let mut a = s.a.clone();
    let mut b = s.b.clone();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let mut d: f64 = 0.0;
    let (mut i, mut j) = (0usize, 0usize);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let ne = na * nb / (na + nb);
    Ok(TestOutcome {
        stat: d,
        pvalue: kolmogorov_sf(ne.sqrt() * d),
    })
}

/// Mid-ranks of the pooled sample, and the tie-group sizes.
fn midranks(pooled: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let n = pooled.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| pooled[i].total_cmp(&pooled[j]));
    let mut ranks = vec![0.0; n];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && pooled[order[j + 1]] == pooled[order[i]] {
            j += 1;
        }
        let avg = (i + j + 2) as f64 / 2.0; // ranks are 1-based
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        ties.push(j - i + 1);
        i = j + 1;
    }
    (ranks, ties)
}

/// Threshold below which the Mann-Whitney null is enumerated exactly.
const MWU_EXACT_LIMIT: usize = 20;

/// Advances `comb` to the next k-combination of `0..n`; false when exhausted.
fn next_combination(comb: &mut [usize], n: usize) -> bool {
    let k = comb.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if comb[i] != i + n - k {
            comb[i] += 1;
            for j in i + 1..k {
                comb[j] = comb[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Mann-Whitney U test from mid-ranks. Exact enumeration of all group
/// assignments for pooled sizes up to 20, normal approximation with tie
/// correction above that. The reported statistic is U for group `a`.
pub fn mann_whitney(s: &TwoSample) -> Result<TestOutcome> {
    let na = s.a.len();
    let nb = s.b.len();
    let n = na + nb;
    let pooled: Vec<f64> = s.a.iter().chain(s.b.iter()).copied().collect();
    let (ranks, ties) = midranks(&pooled);
    let rank_sum_a: f64 = ranks[..na].iter().sum();
    let u_a = rank_sum_a - (na * (na + 1)) as f64 / 2.0;
    let mu = (na * nb) as f64 / 2.0;

    if n <= MWU_EXACT_LIMIT {
        // enumerate every way to choose which na of the pooled observations
        // form group a; U depends on the data only through the pooled ranks
        let observed_dev = (u_a - mu).abs();
        let mut total = 0u64;
        let mut extreme = 0u64;
        let mut comb: Vec<usize> = (0..na).collect();
        loop {
            let rs: f64 = comb.iter().map(|&k| ranks[k]).sum();
            let u = rs - (na * (na + 1)) as f64 / 2.0;
            total += 1;
            if (u - mu).abs() >= observed_dev - 1e-9 {
                extreme += 1;
            }
            if !next_combination(&mut comb, n) {
                break;
            }
        }
        return Ok(TestOutcome {
            stat: u_a,
            pvalue: extreme as f64 / total as f64,
        });
    }

    // normal approximation with tie correction
    let nf = n as f64;
    let tie_term: f64 = ties
        .iter()
        .map(|&t| (t * t * t - t) as f64)
        .sum::<f64>()
        / (nf * (nf - 1.0));
    let var = (na * nb) as f64 / 12.0 * (nf + 1.0 - tie_term);
    if var <= 0.0 {
        // every observation tied: no evidence either way
        return Ok(TestOutcome { stat: u_a, pvalue: 1.0 });
    }
    let z = (u_a - mu) / var.sqrt();
    let norm = Normal::new(0.0, 1.0).expect("standard normal");
    Ok(TestOutcome {
        stat: u_a,
        pvalue: (2.0 * norm.sf(z.abs())).min(1.0),
    })
}
