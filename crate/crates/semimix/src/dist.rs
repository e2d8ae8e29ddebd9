//! Probability families for the quantitative trait.
//!
//! Three families are supported: Gaussian, negative binomial (mean/dispersion
//! parameterization, variance `mu(1 + phi*mu)`), and zero-inflated negative
//! binomial. Each family evaluates log densities, draws samples, and fits a
//! single component from weighted observations. Count families take a
//! multiplicative offset on the mean (library-size exposure); the offset is
//! ignored by the Gaussian family.
//!
//! The Gaussian weighted fit maximizes a penalized likelihood. An unpenalized
//! two-component Gaussian mixture has an unbounded likelihood: a component can
//! collapse onto a single observation and send its variance to zero. The
//! penalty `-a_n * (s2_anchor / v + ln(v / s2_anchor))` keeps every variance
//! update strictly positive and still has a closed-form maximizer:
//!
//! ```text
//! v_hat = (sum_i w_i (y_i - mu_hat)^2 + 2 a_n s2_anchor) / (sum_i w_i + 2 a_n)
//! ```

use crate::error::{Error, Result};
use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson, StandardNormal};
use statrs::function::gamma::ln_gamma;

/// Smallest admissible count-family mean; keeps `ln(mu)` finite when a
/// component receives only zero counts.
const MU_FLOOR: f64 = 1e-12;

/// Bounds of the dispersion search, on the natural-log scale.
const LOG_PHI_LO: f64 = -18.0;
const LOG_PHI_HI: f64 = 18.0;
/// Hard clamp applied to the returned dispersion estimate.
pub const PHI_MIN: f64 = 1e-8;
pub const PHI_MAX: f64 = 1e8;
/// Tolerance of the one-dimensional nuisance searches (log-parameter scale).
const SEARCH_TOL: f64 = 1e-8;
const SEARCH_MAX_ITER: usize = 200;

/// Which distribution family models the trait.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyKind {
    Gaussian,
    NegBinomial,
    Zinb,
}

impl FamilyKind {
    pub fn is_count(self) -> bool {
        !matches!(self, FamilyKind::Gaussian)
    }

    pub fn name(self) -> &'static str {
        match self {
            FamilyKind::Gaussian => "gaussian",
            FamilyKind::NegBinomial => "nb",
            FamilyKind::Zinb => "zinb",
        }
    }
}

/// A family together with its fixed nuisance parameters.
///
/// The nuisance parameters are shared by both mixture components and held
/// fixed during EM: dispersion `phi` (NB/ZINB), zero-inflation `pi` (ZINB),
/// and the Gaussian penalty constants (`penalty_weight` = a_n,
/// `variance_anchor` = s2_anchor).
#[derive(Debug, Clone, PartialEq)]
pub struct FamilySpec {
    kind: FamilyKind,
    dispersion: f64,
    zero_inflation: f64,
    penalty_weight: f64,
    variance_anchor: f64,
}

impl FamilySpec {
    /// Penalized Gaussian family. `penalty_weight = 0` disables the penalty.
    pub fn gaussian(penalty_weight: f64, variance_anchor: f64) -> Result<Self> {
        if !penalty_weight.is_finite() || penalty_weight < 0.0 {
            return Err(Error::Input(format!(
                "penalty weight must be finite and >= 0, got {penalty_weight}"
            )));
        }
        if !variance_anchor.is_finite() || variance_anchor <= 0.0 {
            return Err(Error::Input(format!(
                "variance anchor must be finite and > 0, got {variance_anchor}"
            )));
        }
        Ok(FamilySpec {
            kind: FamilyKind::Gaussian,
            dispersion: f64::NAN,
            zero_inflation: 0.0,
            penalty_weight,
            variance_anchor,
        })
    }

    /// Unpenalized Gaussian family.
    pub fn gaussian_unpenalized() -> Self {
        FamilySpec::gaussian(0.0, 1.0).expect("constants are valid")
    }

    /// Negative binomial family with fixed dispersion `phi > 0`.
    pub fn neg_binomial(phi: f64) -> Result<Self> {
        if !phi.is_finite() || phi <= 0.0 {
            return Err(Error::Input(format!(
                "dispersion must be finite and > 0, got {phi}"
            )));
        }
        Ok(FamilySpec {
            kind: FamilyKind::NegBinomial,
            dispersion: phi,
            zero_inflation: 0.0,
            penalty_weight: 0.0,
            variance_anchor: f64::NAN,
        })
    }

    /// Zero-inflated negative binomial with fixed `phi > 0` and `pi` in [0,1].
    pub fn zinb(phi: f64, pi: f64) -> Result<Self> {
        if !phi.is_finite() || phi <= 0.0 {
            return Err(Error::Input(format!(
                "dispersion must be finite and > 0, got {phi}"
            )));
        }
        if !pi.is_finite() || !(0.0..=1.0).contains(&pi) {
            return Err(Error::Input(format!(
                "zero inflation must lie in [0, 1], got {pi}"
            )));
        }
        Ok(FamilySpec {
            kind: FamilyKind::Zinb,
            dispersion: phi,
            zero_inflation: pi,
            penalty_weight: 0.0,
            variance_anchor: f64::NAN,
        })
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    /// Dispersion `phi`, for count families.
    pub fn dispersion(&self) -> Option<f64> {
        self.kind.is_count().then_some(self.dispersion)
    }

    /// Zero-inflation `pi`, for the ZINB family.
    pub fn zero_inflation(&self) -> Option<f64> {
        matches!(self.kind, FamilyKind::Zinb).then_some(self.zero_inflation)
    }

    /// Gaussian penalty weight a_n (0 when unpenalized or not Gaussian).
    pub fn penalty_weight(&self) -> f64 {
        self.penalty_weight
    }

    /// Gaussian variance anchor s2_anchor.
    pub fn variance_anchor(&self) -> Option<f64> {
        matches!(self.kind, FamilyKind::Gaussian).then_some(self.variance_anchor)
    }

    /// Penalty term added to the log-likelihood for one component.
    /// Zero for count families and for `penalty_weight = 0`.
    pub fn penalty(&self, params: &ParamSet) -> f64 {
        if self.kind != FamilyKind::Gaussian || self.penalty_weight == 0.0 {
            return 0.0;
        }
        let v = params.variance().expect("gaussian params");
        -self.penalty_weight * (self.variance_anchor / v + (v / self.variance_anchor).ln())
    }
}

/// Component parameters, instantiated per family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParamSet {
    /// Mean and variance of a Gaussian component.
    Gaussian { mean: f64, variance: f64 },
    /// Mean of a count component (dispersion and inflation live in the family).
    Count { mean: f64 },
}

impl ParamSet {
    pub fn gaussian(mean: f64, variance: f64) -> Result<Self> {
        if !mean.is_finite() || !variance.is_finite() || variance <= 0.0 {
            return Err(Error::Input(format!(
                "gaussian params need finite mean and variance > 0, got ({mean}, {variance})"
            )));
        }
        Ok(ParamSet::Gaussian { mean, variance })
    }

    pub fn count(mean: f64) -> Result<Self> {
        if !mean.is_finite() || mean <= 0.0 {
            return Err(Error::Input(format!(
                "count-family mean must be finite and > 0, got {mean}"
            )));
        }
        Ok(ParamSet::Count { mean })
    }

    pub fn mean(&self) -> f64 {
        match *self {
            ParamSet::Gaussian { mean, .. } | ParamSet::Count { mean } => mean,
        }
    }

    pub fn variance(&self) -> Option<f64> {
        match *self {
            ParamSet::Gaussian { variance, .. } => Some(variance),
            ParamSet::Count { .. } => None,
        }
    }

    fn expect_for(&self, kind: FamilyKind) -> Result<()> {
        let ok = match self {
            ParamSet::Gaussian { .. } => kind == FamilyKind::Gaussian,
            ParamSet::Count { .. } => kind.is_count(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "parameter set {self:?} does not match family {kind:?}"
            )))
        }
    }
}

/// Checks that `y` is a valid observation for the family.
fn check_observation(kind: FamilyKind, y: f64) -> Result<()> {
    if !y.is_finite() {
        return Err(Error::Domain(format!("non-finite observation {y}")));
    }
    if kind.is_count() && (y < 0.0 || y.fract() != 0.0) {
        return Err(Error::Domain(format!(
            "count families need non-negative integer observations, got {y}"
        )));
    }
    Ok(())
}

fn check_offset(offset: f64) -> Result<()> {
    if !offset.is_finite() || offset <= 0.0 {
        return Err(Error::Domain(format!(
            "offsets must be finite and > 0, got {offset}"
        )));
    }
    Ok(())
}

/// `ln(exp(a) + exp(b))` that tolerates `-inf` arguments.
pub(crate) fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (m, d) = if a >= b { (a, b - a) } else { (b, a - b) };
    m + d.exp().ln_1p()
}

/// Log density (Gaussian) or log mass (NB/ZINB) of one observation.
///
/// For count families the mean is `params.mean() * offset`; the NB variance is
/// `m (1 + phi m)` and the ZINB mass is `pi 1{y=0} + (1 - pi) NB(y)`.
pub fn log_density(family: &FamilySpec, params: &ParamSet, y: f64, offset: f64) -> Result<f64> {
    params.expect_for(family.kind)?;
    check_observation(family.kind, y)?;
    check_offset(offset)?;
    Ok(match *params {
        ParamSet::Gaussian { mean, variance } => gaussian_logpdf(y, mean, variance),
        ParamSet::Count { mean } => {
            let r = 1.0 / family.dispersion;
            count_logpmf(y, nb_const(y, r), mean * offset, r, family.zero_inflation)
        }
    })
}

#[inline]
fn gaussian_logpdf(y: f64, mean: f64, variance: f64) -> f64 {
    let d = y - mean;
    -0.5 * ((2.0 * std::f64::consts::PI * variance).ln() + d * d / variance)
}

/// Mean-free part of the NB log mass:
/// `lnG(y + r) - lnG(r) - y ln r - lnG(y + 1)`.
///
/// For large `r` the gamma-difference cancellation dominates the tiny result,
/// so the ratio is accumulated as an exact sum of `ln1p(j / r)` terms instead
/// (observations are integers). Either way the mass approaches the Poisson
/// limit smoothly, which keeps the dispersion profile likelihood monotone to
/// machine precision near the boundary.
fn nb_const(y: f64, r: f64) -> f64 {
    let a = if r > 1e4 {
        let mut s = 0.0;
        let mut j = 0.0;
        while j < y {
            s += (j / r).ln_1p();
            j += 1.0;
        }
        s
    } else {
        ln_gamma(y + r) - ln_gamma(r) - y * r.ln()
    };
    a - ln_gamma(y + 1.0)
}

/// NB/ZINB log mass given the precomputed [`nb_const`] and mean `m`:
/// `c + y ln m - (y + r) ln1p(m / r)`.
#[inline]
fn count_logpmf(y: f64, c: f64, m: f64, r: f64, pi: f64) -> f64 {
    let lnb = c + y * m.ln() - (y + r) * (m / r).ln_1p();
    if pi == 0.0 {
        lnb
    } else if y == 0.0 {
        log_add_exp(pi.ln(), (1.0 - pi).ln() + lnb)
    } else {
        (1.0 - pi).ln() + lnb
    }
}

/// Precomputed per-observation pieces of the log density; lets EM re-evaluate
/// component densities many times without touching `ln_gamma` again.
#[derive(Debug, Clone)]
pub(crate) struct Prepared {
    /// [`nb_const`] per observation (count families only).
    consts: Vec<f64>,
    r: f64,
    /// All offsets equal: the mean-dependent logs hoist out of the loop.
    uniform_offset: bool,
}

impl FamilySpec {
    /// Validates observations/offsets once and caches gamma terms.
    pub(crate) fn prepare(&self, y: &[f64], offsets: &[f64]) -> Result<Prepared> {
        if y.len() != offsets.len() {
            return Err(Error::Input(format!(
                "lengths differ: {} observations, {} offsets",
                y.len(),
                offsets.len()
            )));
        }
        for (&yi, &ti) in y.iter().zip(offsets) {
            check_observation(self.kind, yi)?;
            check_offset(ti)?;
        }
        let uniform_offset = offsets.windows(2).all(|w| w[0] == w[1]);
        if !self.kind.is_count() {
            return Ok(Prepared {
                consts: Vec::new(),
                r: f64::NAN,
                uniform_offset,
            });
        }
        let r = 1.0 / self.dispersion;
        let consts = y.iter().map(|&yi| nb_const(yi, r)).collect();
        Ok(Prepared {
            consts,
            r,
            uniform_offset,
        })
    }

    /// Fills `out[i] = log f(y[i]; params, offset[i])`. Inputs must be the
    /// slices passed to `prepare`.
    pub(crate) fn log_density_batch(
        &self,
        prep: &Prepared,
        params: &ParamSet,
        y: &[f64],
        offsets: &[f64],
        out: &mut [f64],
    ) {
        match *params {
            ParamSet::Gaussian { mean, variance } => {
                let ln_norm = -0.5 * (2.0 * std::f64::consts::PI * variance).ln();
                let inv2v = 0.5 / variance;
                for (o, &yi) in out.iter_mut().zip(y) {
                    let d = yi - mean;
                    *o = ln_norm - d * d * inv2v;
                }
            }
            ParamSet::Count { mean } => {
                let r = prep.r;
                let pi = self.zero_inflation;
                if prep.uniform_offset {
                    let m = mean * offsets[0];
                    let ln_m = m.ln();
                    let ln1p_m = (m / r).ln_1p();
                    let ln_pi = if pi > 0.0 { pi.ln() } else { f64::NEG_INFINITY };
                    let ln_1mpi = if pi > 0.0 { (1.0 - pi).ln() } else { 0.0 };
                    for i in 0..y.len() {
                        let yi = y[i];
                        let lnb = prep.consts[i] + yi * ln_m - (yi + r) * ln1p_m;
                        out[i] = if pi == 0.0 {
                            lnb
                        } else if yi == 0.0 {
                            log_add_exp(ln_pi, ln_1mpi + lnb)
                        } else {
                            ln_1mpi + lnb
                        };
                    }
                } else {
                    for i in 0..y.len() {
                        out[i] = count_logpmf(y[i], prep.consts[i], mean * offsets[i], r, pi);
                    }
                }
            }
        }
    }
}

/// Draws one observation from the family at `params` with exposure `offset`.
pub fn sample<R: Rng + ?Sized>(
    family: &FamilySpec,
    params: &ParamSet,
    offset: f64,
    rng: &mut R,
) -> f64 {
    match *params {
        ParamSet::Gaussian { mean, variance } => {
            let z: f64 = StandardNormal.sample(rng);
            mean + variance.sqrt() * z
        }
        ParamSet::Count { mean } => {
            if family.kind == FamilyKind::Zinb && rng.gen::<f64>() < family.zero_inflation {
                return 0.0;
            }
            sample_nb(mean * offset, family.dispersion, rng)
        }
    }
}

/// NB(m, phi) draw via the gamma-Poisson mixture.
fn sample_nb<R: Rng + ?Sized>(m: f64, phi: f64, rng: &mut R) -> f64 {
    let r = 1.0 / phi;
    let gamma = Gamma::new(r, m / r).expect("valid gamma parameters");
    let lambda: f64 = gamma.sample(rng);
    if lambda <= 0.0 {
        return 0.0;
    }
    Poisson::new(lambda).expect("positive rate").sample(rng)
}

/// Weighted single-component fit; the M-step of the mixture EM.
///
/// Gaussian: weighted mean and penalized weighted variance (see module docs).
/// NB (phi fixed): `mu_hat = sum(w y) / sum(w t)`. ZINB (phi, pi fixed):
/// moment update `mu_hat = (sum(w y) / sum(w t)) / (1 - pi)`.
pub fn fit_single(
    family: &FamilySpec,
    y: &[f64],
    w: &[f64],
    offsets: &[f64],
) -> Result<ParamSet> {
    fit_single_impl(family, y, w, offsets, true)
}

/// Same as [`fit_single`] but never applies the Gaussian penalty; used for
/// the null model fit.
pub(crate) fn fit_single_unpenalized(
    family: &FamilySpec,
    y: &[f64],
    w: &[f64],
    offsets: &[f64],
) -> Result<ParamSet> {
    fit_single_impl(family, y, w, offsets, false)
}

fn fit_single_impl(
    family: &FamilySpec,
    y: &[f64],
    w: &[f64],
    offsets: &[f64],
    penalized: bool,
) -> Result<ParamSet> {
    if y.len() != w.len() || y.len() != offsets.len() {
        return Err(Error::Input(format!(
            "lengths differ: {} observations, {} weights, {} offsets",
            y.len(),
            w.len(),
            offsets.len()
        )));
    }
    let mut sum_w = 0.0;
    for &wi in w {
        if !wi.is_finite() || wi < 0.0 {
            return Err(Error::Input(format!("invalid weight {wi}")));
        }
        sum_w += wi;
    }
    if sum_w <= 0.0 {
        return Err(Error::Estimation("total weight is zero".into()));
    }
    for (&yi, &ti) in y.iter().zip(offsets) {
        check_observation(family.kind, yi)?;
        check_offset(ti)?;
    }

    match family.kind {
        FamilyKind::Gaussian => {
            let mean = dot(w, y) / sum_w;
            let ss: f64 = y
                .iter()
                .zip(w)
                .map(|(&yi, &wi)| wi * (yi - mean) * (yi - mean))
                .sum();
            let a = if penalized { family.penalty_weight } else { 0.0 };
            let variance = if a > 0.0 {
                (ss + 2.0 * a * family.variance_anchor) / (sum_w + 2.0 * a)
            } else {
                ss / sum_w
            };
            if variance <= 0.0 {
                return Err(Error::DegenerateVariance(
                    "weighted variance is zero and no penalty is active".into(),
                ));
            }
            ParamSet::gaussian(mean, variance)
        }
        FamilyKind::NegBinomial | FamilyKind::Zinb => {
            let sum_wy = dot(w, y);
            let sum_wt = dot(w, offsets);
            let mut mean = sum_wy / sum_wt;
            if family.kind == FamilyKind::Zinb {
                let pi = family.zero_inflation;
                if pi >= 1.0 {
                    return Err(Error::Estimation(
                        "zero inflation of 1 leaves the mean unidentified".into(),
                    ));
                }
                mean /= 1.0 - pi;
            }
            ParamSet::count(mean.max(MU_FLOOR))
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// Golden-section maximizer on `[lo, hi]`.
fn golden_max<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = hi - INV_PHI * (hi - lo);
    let mut d = lo + INV_PHI * (hi - lo);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..SEARCH_MAX_ITER {
        if hi - lo <= SEARCH_TOL {
            break;
        }
        if fc > fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - INV_PHI * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + INV_PHI * (hi - lo);
            fd = f(d);
        }
    }
    0.5 * (lo + hi)
}

/// Observations grouped for repeated likelihood evaluation. When all offsets
/// are equal, duplicate counts collapse into (value, multiplicity) pairs.
struct ObsSummary {
    y: Vec<f64>,
    mult: Vec<f64>,
    offset: Vec<f64>,
    sum_y: f64,
    sum_t: f64,
    n: usize,
}

impl ObsSummary {
    fn build(y: &[f64], offsets: &[f64]) -> Result<Self> {
        if y.len() != offsets.len() {
            return Err(Error::Input(format!(
                "lengths differ: {} observations, {} offsets",
                y.len(),
                offsets.len()
            )));
        }
        for (&yi, &ti) in y.iter().zip(offsets) {
            check_observation(FamilyKind::NegBinomial, yi)?;
            check_offset(ti)?;
        }
        let sum_y: f64 = y.iter().sum();
        let sum_t: f64 = offsets.iter().sum();
        let uniform = offsets.windows(2).all(|w| w[0] == w[1]);
        if uniform && !offsets.is_empty() {
            let mut sorted = y.to_vec();
            sorted.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite"));
            let mut vals = Vec::new();
            let mut mult = Vec::new();
            for &v in &sorted {
                match vals.last() {
                    Some(&last) if last == v => *mult.last_mut().expect("non-empty") += 1.0,
                    _ => {
                        vals.push(v);
                        mult.push(1.0);
                    }
                }
            }
            let t = offsets[0];
            let k = vals.len();
            Ok(ObsSummary {
                y: vals,
                mult,
                offset: vec![t; k],
                sum_y,
                sum_t,
                n: y.len(),
            })
        } else {
            Ok(ObsSummary {
                y: y.to_vec(),
                mult: vec![1.0; y.len()],
                offset: offsets.to_vec(),
                sum_y,
                sum_t,
                n: y.len(),
            })
        }
    }

    /// Single-component ZINB log-likelihood with moment mean, given (phi, pi).
    fn profile_loglik(&self, phi: f64, pi: f64) -> f64 {
        let mu = ((self.sum_y / self.sum_t) / (1.0 - pi)).max(MU_FLOOR);
        let r = 1.0 / phi;
        let mut ll = 0.0;
        for i in 0..self.y.len() {
            let c = nb_const(self.y[i], r);
            ll += self.mult[i] * count_logpmf(self.y[i], c, mu * self.offset[i], r, pi);
        }
        ll
    }
}

/// Maximizes the profile likelihood over `ln phi` for fixed `pi`;
/// returns (ln_phi_hat, loglik at the optimum).
fn search_log_phi(summary: &ObsSummary, pi: f64) -> (f64, f64) {
    // coarse grid, then golden refinement around the best cell
    let mut best_k = 0usize;
    let mut best_ll = f64::NEG_INFINITY;
    let grid_n = 37;
    let step = (LOG_PHI_HI - LOG_PHI_LO) / (grid_n as f64 - 1.0);
    for k in 0..grid_n {
        let lp = LOG_PHI_LO + step * k as f64;
        let ll = summary.profile_loglik(lp.exp(), pi);
        if ll > best_ll {
            best_ll = ll;
            best_k = k;
        }
    }
    let lo = LOG_PHI_LO + step * (best_k.saturating_sub(1)) as f64;
    let hi = (LOG_PHI_LO + step * (best_k + 1) as f64).min(LOG_PHI_HI);
    let lp = golden_max(|lp| summary.profile_loglik(lp.exp(), pi), lo, hi);
    // snap boundary solutions so clamping is exact
    let lp = if lp - LOG_PHI_LO < 1e-6 {
        f64::NEG_INFINITY
    } else if LOG_PHI_HI - lp < 1e-6 {
        f64::INFINITY
    } else {
        lp
    };
    (lp, summary.profile_loglik(lp.exp().clamp(PHI_MIN, PHI_MAX), pi))
}

fn clamp_phi(ln_phi: f64) -> f64 {
    ln_phi.exp().clamp(PHI_MIN, PHI_MAX)
}

/// Maximum-likelihood dispersion of a single NB component, mean profiled
/// by moments. Bracketed search on `ln phi` over [-18, 18]; the estimate
/// is clamped to `[1e-8, 1e8]`.
pub fn estimate_dispersion(y: &[f64], offsets: &[f64]) -> Result<f64> {
    if y.len() < 2 {
        return Err(Error::Estimation(format!(
            "dispersion estimation needs at least 2 observations, got {}",
            y.len()
        )));
    }
    let summary = ObsSummary::build(y, offsets)?;
    if summary.sum_y <= 0.0 {
        // all-zero counts: likelihood is flat in phi at mu -> 0
        return Ok(PHI_MIN);
    }
    let (ln_phi, _) = search_log_phi(&summary, 0.0);
    Ok(clamp_phi(ln_phi))
}

/// Dispersion estimate under a fixed zero-inflation `pi`.
pub fn estimate_dispersion_given_pi(y: &[f64], offsets: &[f64], pi: f64) -> Result<f64> {
    if y.len() < 2 {
        return Err(Error::Estimation(format!(
            "dispersion estimation needs at least 2 observations, got {}",
            y.len()
        )));
    }
    if !(0.0..1.0).contains(&pi) {
        return Err(Error::Input(format!(
            "zero inflation must lie in [0, 1), got {pi}"
        )));
    }
    let summary = ObsSummary::build(y, offsets)?;
    if summary.sum_y <= 0.0 {
        return Err(Error::Estimation("all counts are zero".into()));
    }
    let (ln_phi, _) = search_log_phi(&summary, pi);
    Ok(clamp_phi(ln_phi))
}

/// Joint maximum-likelihood estimates (mu, phi, pi) of a single ZINB
/// component: outer search on `pi`, inner search on `ln phi`, mean profiled
/// by moments. `pi_hat` may land exactly on zero, in which case the fit
/// coincides with the plain NB fit.
pub fn estimate_zinb(y: &[f64], offsets: &[f64]) -> Result<(f64, f64, f64)> {
    if y.len() < 3 {
        return Err(Error::Estimation(format!(
            "joint ZINB estimation needs at least 3 observations, got {}",
            y.len()
        )));
    }
    let summary = ObsSummary::build(y, offsets)?;
    if summary.sum_y <= 0.0 {
        return Err(Error::Estimation(
            "all counts are zero; mean unidentified".into(),
        ));
    }

    // pi can never exceed the observed zero fraction at the optimum, but the
    // profile is cheap enough to search on a fixed grid of [0, 0.98]
    let grid: Vec<f64> = (0..=49).map(|k| k as f64 * 0.02).collect();
    let mut best_k = 0usize;
    let mut best_ll = f64::NEG_INFINITY;
    for (k, &pi) in grid.iter().enumerate() {
        let (_, ll) = search_log_phi(&summary, pi);
        if ll > best_ll {
            best_ll = ll;
            best_k = k;
        }
    }
    let lo = if best_k == 0 { 0.0 } else { grid[best_k - 1] };
    let hi = if best_k + 1 < grid.len() {
        grid[best_k + 1]
    } else {
        grid[best_k]
    };
    let mut pi_hat = if lo < hi {
        golden_max(|pi| search_log_phi(&summary, pi).1, lo, hi)
    } else {
        grid[best_k]
    };
    if pi_hat < 1e-6 {
        pi_hat = 0.0;
    }
    // keep the boundary candidate if it is at least as good
    if pi_hat > 0.0 && search_log_phi(&summary, 0.0).1 >= search_log_phi(&summary, pi_hat).1 {
        pi_hat = 0.0;
    }
    let (ln_phi, _) = search_log_phi(&summary, pi_hat);
    let phi_hat = clamp_phi(ln_phi);
    let mu_hat = ((summary.sum_y / summary.sum_t) / (1.0 - pi_hat)).max(MU_FLOOR);
    let _ = summary.n;
    Ok((mu_hat, phi_hat, pi_hat))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use crate::stream::rng_for;

    fn ones(n: usize) -> Vec<f64> {
        vec![1.0; n]
    }

    #[test]
    fn gaussian_log_density_standard_normal_at_zero() {
        let fam = FamilySpec::gaussian_unpenalized();
        let p = ParamSet::gaussian(0.0, 1.0).unwrap();
        let expected = -0.5 * (2.0 * std::f64::consts::PI).ln();
        assert_relative_eq!(
            log_density(&fam, &p, 0.0, 1.0).unwrap(),
            expected,
            max_relative = 1e-12
        );
    }

    #[test]
    fn nb_log_mass_at_zero_matches_closed_form() {
        // NB(mu=10, phi=0.2): P(0) = (1 + phi mu)^(-1/phi) = 3^-5
        let fam = FamilySpec::neg_binomial(0.2).unwrap();
        let p = ParamSet::count(10.0).unwrap();
        let expected = 3f64.powi(-5).ln();
        assert_relative_eq!(
            log_density(&fam, &p, 0.0, 1.0).unwrap(),
            expected,
            max_relative = 1e-10
        );
    }

    #[test]
    fn zinb_log_mass_at_zero_matches_mixture_formula() {
        let fam = FamilySpec::zinb(0.2, 0.2).unwrap();
        let p = ParamSet::count(10.0).unwrap();
        let expected = (0.2 + 0.8 * 3f64.powi(-5)).ln();
        assert_relative_eq!(
            log_density(&fam, &p, 0.0, 1.0).unwrap(),
            expected,
            max_relative = 1e-10
        );
    }

    #[test]
    fn log_density_rejects_invalid_counts() {
        let fam = FamilySpec::neg_binomial(0.2).unwrap();
        let p = ParamSet::count(10.0).unwrap();
        assert!(matches!(
            log_density(&fam, &p, -1.0, 1.0),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            log_density(&fam, &p, 2.5, 1.0),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            log_density(&fam, &p, f64::NAN, 1.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn count_masses_sum_to_one() {
        // sum over y of exp(log mass) must reach 1 - 1e-6 well before the
        // far tail for every supported count family
        for (fam, mu) in [
            (FamilySpec::neg_binomial(0.2).unwrap(), 10.0),
            (FamilySpec::neg_binomial(2.0).unwrap(), 3.0),
            (FamilySpec::zinb(0.2, 0.2).unwrap(), 10.0),
            (FamilySpec::zinb(0.5, 0.7).unwrap(), 25.0),
        ] {
            let p = ParamSet::count(mu).unwrap();
            let mut total = 0.0;
            for k in 0..100_000u32 {
                total += log_density(&fam, &p, k as f64, 1.0).unwrap().exp();
                if 1.0 - total < 1e-8 {
                    break;
                }
            }
            assert!(total <= 1.0 + 1e-9, "family {fam:?}: total {total}");
            assert!(total >= 1.0 - 1e-6, "family {fam:?}: total {total}");
        }
    }

    #[test]
    fn gaussian_density_integrates_to_one() {
        // Simpson quadrature over +-12 sd
        let fam = FamilySpec::gaussian_unpenalized();
        let p = ParamSet::gaussian(1.5, 2.5).unwrap();
        let (lo, hi) = (1.5 - 12.0 * 2.5f64.sqrt(), 1.5 + 12.0 * 2.5f64.sqrt());
        let m = 20_000;
        let h = (hi - lo) / m as f64;
        let f = |x: f64| log_density(&fam, &p, x, 1.0).unwrap().exp();
        let mut total = f(lo) + f(hi);
        for i in 1..m {
            let w = if i % 2 == 0 { 2.0 } else { 4.0 };
            total += w * f(lo + i as f64 * h);
        }
        total *= h / 3.0;
        assert_relative_eq!(total, 1.0, max_relative = 1e-6);
    }

    #[test]
    fn gaussian_fit_matches_closed_form() {
        let fam = FamilySpec::gaussian_unpenalized();
        let p = fit_single(&fam, &[-1.0, 1.0], &[1.0, 1.0], &ones(2)).unwrap();
        assert_relative_eq!(p.mean(), 0.0, epsilon = 1e-15);
        assert_relative_eq!(p.variance().unwrap(), 1.0, max_relative = 1e-15);
    }

    #[test]
    fn penalized_fit_rescues_single_point_component() {
        // one effective observation: SS = 0, sum w = 1
        let fam = FamilySpec::gaussian(0.01, 1.0).unwrap();
        let p = fit_single(&fam, &[3.0], &[1.0], &ones(1)).unwrap();
        assert_relative_eq!(p.variance().unwrap(), 0.02 / 1.02, max_relative = 1e-12);
    }

    #[test]
    fn unpenalized_zero_variance_errors() {
        let fam = FamilySpec::gaussian_unpenalized();
        let err = fit_single(&fam, &[2.0, 2.0], &[1.0, 1.0], &ones(2)).unwrap_err();
        assert!(matches!(err, Error::DegenerateVariance(_)));
    }

    #[test]
    fn zero_total_weight_errors() {
        let fam = FamilySpec::gaussian_unpenalized();
        let err = fit_single(&fam, &[1.0, 2.0], &[0.0, 0.0], &ones(2)).unwrap_err();
        assert!(matches!(err, Error::Estimation(_)));
    }

    #[test]
    fn nb_fit_is_weighted_mean() {
        let fam = FamilySpec::neg_binomial(0.2).unwrap();
        let p = fit_single(&fam, &[2.0, 4.0], &[1.0, 1.0], &ones(2)).unwrap();
        assert_relative_eq!(p.mean(), 3.0, max_relative = 1e-15);
    }

    #[test]
    fn nb_fit_satisfies_weighted_score_equation() {
        let fam = FamilySpec::neg_binomial(0.35).unwrap();
        let y = [0.0, 3.0, 7.0, 1.0, 12.0, 4.0];
        let w = [0.3, 1.0, 0.5, 2.0, 0.1, 0.7];
        let t = [1.0, 2.0, 0.5, 1.5, 1.0, 3.0];
        let p = fit_single(&fam, &y, &w, &t).unwrap();
        let mu = p.mean();
        let r = 1.0 / 0.35;
        let score: f64 = y
            .iter()
            .zip(&w)
            .zip(&t)
            .map(|((&yi, &wi), &ti)| wi * r * (yi - mu * ti) / (mu * (mu + r)))
            .sum();
        assert!(score.abs() < 1e-8, "score {score}");
    }

    #[test]
    fn zinb_fit_applies_moment_correction() {
        let fam = FamilySpec::zinb(0.2, 0.5).unwrap();
        let p = fit_single(&fam, &[2.0, 4.0], &[1.0, 1.0], &ones(2)).unwrap();
        assert_relative_eq!(p.mean(), 6.0, max_relative = 1e-12);
    }

    #[test]
    fn dispersion_clamps_on_underdispersed_data() {
        assert_eq!(
            estimate_dispersion(&[5.0, 5.0, 5.0, 5.0], &ones(4)).unwrap(),
            PHI_MIN
        );
        // alternating 4/6: variance 1 < mean 5, still no overdispersion
        let y = [4.0, 6.0, 4.0, 6.0, 4.0, 6.0, 4.0, 6.0];
        assert_eq!(estimate_dispersion(&y, &ones(8)).unwrap(), PHI_MIN);
    }

    #[test]
    fn dispersion_recovers_truth_on_simulated_data() {
        let fam = FamilySpec::neg_binomial(0.2).unwrap();
        let p = ParamSet::count(10.0).unwrap();
        let mut rng = rng_for(1, &[]);
        let y: Vec<f64> = (0..1000).map(|_| sample(&fam, &p, 1.0, &mut rng)).collect();
        let phi = estimate_dispersion(&y, &ones(1000)).unwrap();
        assert!((0.15..=0.25).contains(&phi), "phi {phi}");
    }

    #[test]
    fn dispersion_needs_two_observations() {
        assert!(matches!(
            estimate_dispersion(&[3.0], &ones(1)),
            Err(Error::Estimation(_))
        ));
    }

    #[test]
    fn dispersion_is_invariant_to_duplication() {
        let fam = FamilySpec::neg_binomial(0.4).unwrap();
        let p = ParamSet::count(7.0).unwrap();
        let mut rng = rng_for(9, &[]);
        let y: Vec<f64> = (0..200).map(|_| sample(&fam, &p, 1.0, &mut rng)).collect();
        let phi1 = estimate_dispersion(&y, &ones(200)).unwrap();
        let doubled: Vec<f64> = y.iter().chain(y.iter()).copied().collect();
        let phi2 = estimate_dispersion(&doubled, &ones(400)).unwrap();
        assert!(
            (phi1.ln() - phi2.ln()).abs() < 1e-6,
            "phi1 {phi1}, phi2 {phi2}"
        );
    }

    #[test]
    fn zinb_estimate_without_zeros_puts_pi_at_zero() {
        let y = [3.0, 5.0, 8.0, 2.0, 7.0, 4.0, 6.0, 9.0];
        let (_, _, pi) = estimate_zinb(&y, &ones(8)).unwrap();
        assert_eq!(pi, 0.0);
    }

    #[test]
    fn zinb_estimate_recovers_truth_on_simulated_data() {
        let fam = FamilySpec::zinb(0.2, 0.2).unwrap();
        let p = ParamSet::count(10.0).unwrap();
        let mut rng = rng_for(1, &[]);
        let y: Vec<f64> = (0..1000).map(|_| sample(&fam, &p, 1.0, &mut rng)).collect();
        let (mu, phi, pi) = estimate_zinb(&y, &ones(1000)).unwrap();
        assert!((0.14..=0.26).contains(&pi), "pi {pi}");
        assert!((0.12..=0.28).contains(&phi), "phi {phi}");
        assert!((8.0..=12.0).contains(&mu), "mu {mu}");
    }

    #[test]
    fn forcing_inflation_lowers_the_dispersion_estimate() {
        let fam = FamilySpec::zinb(0.2, 0.2).unwrap();
        let p = ParamSet::count(10.0).unwrap();
        let mut rng = rng_for(1, &[7]);
        let y: Vec<f64> = (0..1000).map(|_| sample(&fam, &p, 1.0, &mut rng)).collect();
        let t = ones(1000);
        let phi_plain = estimate_dispersion(&y, &t).unwrap();
        let phi_inflated = estimate_dispersion_given_pi(&y, &t, 0.2).unwrap();
        assert!(
            phi_inflated < phi_plain,
            "inflated {phi_inflated} vs plain {phi_plain}"
        );
    }

    #[test]
    fn zinb_estimate_rejects_all_zero_counts() {
        assert!(matches!(
            estimate_zinb(&[0.0, 0.0, 0.0, 0.0], &ones(4)),
            Err(Error::Estimation(_))
        ));
    }

    #[test]
    fn bootstrap_sampler_recovers_gaussian_mean() {
        let fam = FamilySpec::gaussian_unpenalized();
        let p = ParamSet::gaussian(0.0, 1.0).unwrap();
        let mut rng = rng_for(5, &[]);
        let n = 100_000;
        let mean: f64 = (0..n).map(|_| sample(&fam, &p, 1.0, &mut rng)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn sampler_respects_offsets_for_counts() {
        let fam = FamilySpec::neg_binomial(0.2).unwrap();
        let p = ParamSet::count(5.0).unwrap();
        let mut rng = rng_for(6, &[]);
        let n = 50_000;
        let mean: f64 = (0..n).map(|_| sample(&fam, &p, 3.0, &mut rng)).sum::<f64>() / n as f64;
        assert_relative_eq!(mean, 15.0, max_relative = 0.05);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn uniform_weights_match_unweighted_mle(
                values in proptest::collection::vec(-50.0..50.0f64, 2..40),
            ) {
                let spread = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                    - values.iter().cloned().fold(f64::INFINITY, f64::min);
                prop_assume!(spread > 1e-6);
                let n = values.len();
                let fam = FamilySpec::gaussian_unpenalized();
                let w = vec![1.0; n];
                let t = vec![1.0; n];
                let fit = fit_single(&fam, &values, &w, &t).unwrap();
                let mean = values.iter().sum::<f64>() / n as f64;
                let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
                prop_assert!((fit.mean() - mean).abs() <= 1e-12 * (1.0 + mean.abs()));
                prop_assert!((fit.variance().unwrap() - var).abs() <= 1e-12 * (1.0 + var));
            }

            #[test]
            fn penalized_variance_never_collapses(
                values in proptest::collection::vec(-10.0..10.0f64, 1..30),
                weights in proptest::collection::vec(0.0..1.0f64, 30),
                a_n in 1e-6..1.0f64,
                anchor in 0.01..10.0f64,
            ) {
                let n = values.len();
                let mut w: Vec<f64> = weights[..n].to_vec();
                // make sure at least one weight is positive
                w[0] += 0.5;
                let fam = FamilySpec::gaussian(a_n, anchor).unwrap();
                let t = vec![1.0; n];
                let fit = fit_single(&fam, &values, &w, &t).unwrap();
                let sum_w: f64 = w.iter().sum();
                let floor = 2.0 * a_n * anchor / (sum_w + 2.0 * a_n);
                prop_assert!(fit.variance().unwrap() >= floor * (1.0 - 1e-12));
                prop_assert!(fit.variance().unwrap() > 0.0);
            }

            #[test]
            fn nb_weighted_mean_solves_score(
                raw in proptest::collection::vec((0u32..40, 0.01..2.0f64), 2..25),
                phi in 0.05..3.0f64,
            ) {
                let y: Vec<f64> = raw.iter().map(|&(c, _)| c as f64).collect();
                let w: Vec<f64> = raw.iter().map(|&(_, wi)| wi).collect();
                let t = vec![1.0; y.len()];
                let fam = FamilySpec::neg_binomial(phi).unwrap();
                let fit = fit_single(&fam, &y, &w, &t).unwrap();
                let mu = fit.mean();
                prop_assume!(mu > 1e-9);
                let r = 1.0 / phi;
                let score: f64 = y.iter().zip(&w).zip(&t)
                    .map(|((&yi, &wi), &ti)| wi * r * (yi - mu * ti) / (mu * (mu + r)))
                    .sum();
                prop_assert!(score.abs() < 1e-8);
            }
        }
    }
}
