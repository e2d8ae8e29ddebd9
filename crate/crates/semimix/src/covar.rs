//! Covariate adjustment by least-squares residuals.

use crate::error::{Error, Result};

/// Individuals with a trait value, named covariate columns, and an optional
/// offset column.
#[derive(Debug, Clone)]
pub struct TraitTable {
    pub ids: Vec<String>,
    pub trait_values: Vec<f64>,
    pub covariate_names: Vec<String>,
    /// Column-major covariates, aligned with `covariate_names`.
    pub covariates: Vec<Vec<f64>>,
    pub offsets: Option<Vec<f64>>,
}

impl TraitTable {
    pub fn n(&self) -> usize {
        self.ids.len()
    }

    pub fn covariate(&self, name: &str) -> Option<&[f64]> {
        self.covariate_names
            .iter()
            .position(|c| c == name)
            .map(|k| self.covariates[k].as_slice())
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if self.trait_values.len() != n {
            return Err(Error::Input(format!(
                "{} trait values for {} ids",
                self.trait_values.len(),
                n
            )));
        }
        for (name, col) in self.covariate_names.iter().zip(&self.covariates) {
            if col.len() != n {
                return Err(Error::Input(format!(
                    "covariate '{name}' has {} values for {n} ids",
                    col.len()
                )));
            }
        }
        if let Some(of) = &self.offsets {
            if of.len() != n {
                return Err(Error::Input(format!(
                    "{} offsets for {n} ids",
                    of.len()
                )));
            }
        }
        let mut seen = std::collections::HashSet::new();
        for id in &self.ids {
            if !seen.insert(id) {
                return Err(Error::Input(format!("duplicate individual id '{id}'")));
            }
        }
        Ok(())
    }
}

/// Solves the symmetric system `xtx beta = xty` by Gaussian elimination with
/// partial pivoting; a vanishing pivot signals a collinear column.
fn solve_normal_equations(
    mut xtx: Vec<Vec<f64>>,
    mut xty: Vec<f64>,
    names: &[String],
) -> Result<Vec<f64>> {
    let k = xty.len();
    let scale: f64 = (0..k).map(|i| xtx[i][i].abs()).fold(0.0, f64::max).max(1.0);
    for col in 0..k {
        let (pivot_row, pivot) = (col..k)
            .map(|r| (r, xtx[r][col].abs()))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .expect("non-empty");
        if pivot <= 1e-10 * scale {
            return Err(Error::Input(format!(
                "design matrix is rank deficient; column '{}' is collinear with the others",
                names[col]
            )));
        }
        xtx.swap(col, pivot_row);
        xty.swap(col, pivot_row);
        for r in 0..k {
            if r == col {
                continue;
            }
            let f = xtx[r][col] / xtx[col][col];
            for c in col..k {
                xtx[r][c] -= f * xtx[col][c];
            }
            xty[r] -= f * xty[col];
        }
    }
    Ok((0..k).map(|i| xty[i] / xtx[i][i]).collect())
}

/// Ordinary least-squares residuals of the (optionally log-transformed)
/// trait on an intercept plus the named covariates. With no covariates this
/// is centering; residuals always sum to zero.
pub fn adjust_covariates(
    table: &TraitTable,
    covariate_names: &[String],
    log_transform: bool,
) -> Result<Vec<f64>> {
    table.validate()?;
    let n = table.n();
    if n == 0 {
        return Err(Error::Input("empty trait table".into()));
    }
    let mut response = table.trait_values.clone();
    if log_transform {
        for v in response.iter_mut() {
            if *v <= 0.0 {
                return Err(Error::Input(format!(
                    "log transform needs positive trait values, got {v}"
                )));
            }
            *v = v.ln();
        }
    }

    // design: intercept followed by the requested covariates
    let mut names = vec!["(intercept)".to_string()];
    let mut cols: Vec<&[f64]> = Vec::new();
    for name in covariate_names {
        let col = table
            .covariate(name)
            .ok_or_else(|| Error::Input(format!("unknown covariate '{name}'")))?;
        cols.push(col);
        names.push(name.clone());
    }
    let k = cols.len() + 1;
    let design_col = |j: usize, i: usize| -> f64 {
        if j == 0 {
            1.0
        } else {
            cols[j - 1][i]
        }
    };
    let mut xtx = vec![vec![0.0; k]; k];
    let mut xty = vec![0.0; k];
    for i in 0..n {
        for a in 0..k {
            let xa = design_col(a, i);
            xty[a] += xa * response[i];
            for b in 0..k {
                xtx[a][b] += xa * design_col(b, i);
            }
        }
    }
    let beta = solve_normal_equations(xtx, xty, &names)?;
    Ok((0..n)
        .map(|i| response[i] - (0..k).map(|j| beta[j] * design_col(j, i)).sum::<f64>())
        .collect())
}
