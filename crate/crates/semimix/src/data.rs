//! Observations with group labels.

use crate::error::{Error, Result};

/// A trait vector with its group indicator.
///
/// `x[i] = false` marks a labeled observation (known to be in class A);
/// `x[i] = true` marks an unlabeled one (class A or B). Offsets default to 1
/// and act as multiplicative exposures for count families.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    y: Vec<f64>,
    x: Vec<bool>,
    offsets: Vec<f64>,
}

impl Dataset {
    /// Builds a dataset, enforcing the size invariants: `n >= 4` and both the
    /// labeled and unlabeled groups hold at least 2 observations.
    pub fn new(y: Vec<f64>, x: Vec<bool>, offsets: Option<Vec<f64>>) -> Result<Self> {
        let n = y.len();
        if x.len() != n {
            return Err(Error::Input(format!(
                "group indicator length {} does not match {} observations",
                x.len(),
                n
            )));
        }
        let offsets = offsets.unwrap_or_else(|| vec![1.0; n]);
        if offsets.len() != n {
            return Err(Error::Input(format!(
                "offset length {} does not match {} observations",
                offsets.len(),
                n
            )));
        }
        if n < 4 {
            return Err(Error::Input(format!("need at least 4 observations, got {n}")));
        }
        let u = x.iter().filter(|&&b| b).count();
        if u < 2 || u > n - 2 {
            return Err(Error::Input(format!(
                "unlabeled count must lie in [2, n-2]; got u = {u} of n = {n}"
            )));
        }
        for &yi in &y {
            if !yi.is_finite() {
                return Err(Error::Input(format!("non-finite observation {yi}")));
            }
        }
        for &t in &offsets {
            if !t.is_finite() || t <= 0.0 {
                return Err(Error::Input(format!("offsets must be positive, got {t}")));
            }
        }
        Ok(Dataset { y, x, offsets })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn x(&self) -> &[bool] {
        &self.x
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    pub fn n_unlabeled(&self) -> usize {
        self.x.iter().filter(|&&b| b).count()
    }

    pub fn n_labeled(&self) -> usize {
        self.len() - self.n_unlabeled()
    }

    /// (values, offsets) of the labeled observations.
    pub fn labeled(&self) -> (Vec<f64>, Vec<f64>) {
        self.split(false)
    }

    /// (values, offsets) of the unlabeled observations.
    pub fn unlabeled(&self) -> (Vec<f64>, Vec<f64>) {
        self.split(true)
    }

    fn split(&self, unlabeled: bool) -> (Vec<f64>, Vec<f64>) {
        let mut vals = Vec::new();
        let mut offs = Vec::new();
        for i in 0..self.len() {
            if self.x[i] == unlabeled {
                vals.push(self.y[i]);
                offs.push(self.offsets[i]);
            }
        }
        (vals, offs)
    }

    /// Same observations under a new group indicator (permutation resampling).
    pub(crate) fn with_indicator(&self, x: Vec<bool>) -> Result<Self> {
        Dataset::new(self.y.clone(), x, Some(self.offsets.clone()))
    }

    /// New observations under the same group indicator (bootstrap resampling).
    pub(crate) fn with_observations(&self, y: Vec<f64>) -> Result<Self> {
        Dataset::new(y, self.x.clone(), Some(self.offsets.clone()))
    }
}
