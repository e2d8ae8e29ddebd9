//! Semi-supervised two-component mixture tests for quantitative traits.
//!
//! One binary covariate (say, minor-allele presence at a SNP) splits
//! individuals into a labeled group, known to be unaffected, and an unlabeled
//! group in which any individual may or may not be affected. A two-component
//! mixture with mixing proportion `tau` models the unlabeled group;
//! `H0: tau = 0` is tested with a likelihood-ratio statistic calibrated by
//! permutation or parametric bootstrap, with exceedance-based early stopping
//! for genome-scale scans.
//!
//! Modules:
//! - [`dist`]: Gaussian / negative binomial / zero-inflated NB families,
//!   weighted component fits, nuisance estimation
//! - [`em`]: the semi-supervised EM fitter and likelihood-ratio statistic
//! - [`mixtest`]: resampling calibration with early stopping
//! - [`classical`]: two-sample comparators (t, F, KS, Mann-Whitney)
//! - [`scan`]: genotype binarization, locus filtering, genome-scale scans
//! - [`sim`]: the data-generating process and power / error-rate studies
//! - [`covar`]: covariate adjustment by least-squares residuals
//! - [`io`]: tab-separated table formats used by the command-line tool
//! - [`cli`]: the `semimix` command-line surface

pub mod classical;
pub mod cli;
pub mod covar;
pub mod data;
pub mod dist;
pub mod em;
pub mod error;
pub mod io;
pub mod mixtest;
pub mod scan;
pub mod sim;
pub mod stream;

pub use data::Dataset;
pub use dist::{FamilyKind, FamilySpec, ParamSet};
pub use em::{default_family, fit_mixture, fit_null, lr_statistic, EmConfig, FitResult};
pub use error::{Error, Result};
pub use mixtest::{mixture_test, p_value, ResampleMethod, TestConfig, TestResult, TestStatus};
