//! Tab-separated table formats.
//!
//! Every emitted table is UTF-8 with `#`-prefixed metadata lines (tool
//! version, seed, config digest), one header row, and one record per line.
//! Floats are written in shortest round-trip form, so re-ingesting a file
//! loses no information. Writes go through a temporary file in the target
//! directory followed by a rename, so an interrupted run never leaves a
//! partial file at the destination.

use crate::covar::TraitTable;
use crate::error::{Error, Result};
use crate::scan::{Call, GenotypeMatrix, LocusRecord};
use sha2::{Digest, Sha256};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

/// Metadata recorded at the top of every emitted table.
#[derive(Debug, Clone, Default)]
pub struct Meta {
    pub seed: Option<u64>,
    /// Canonical description of the run configuration; digested into the
    /// header so a results file pins the settings that produced it.
    pub config: Option<String>,
}

impl Meta {
    pub fn with_seed(seed: u64) -> Self {
        Meta {
            seed: Some(seed),
            config: None,
        }
    }

    pub fn config(mut self, text: impl Into<String>) -> Self {
        self.config = Some(text.into());
        self
    }

    fn header_lines(&self) -> String {
        let mut s = format!("# semimix {}\n", env!("CARGO_PKG_VERSION"));
        if let Some(seed) = self.seed {
            s.push_str(&format!("# seed: {seed}\n"));
        }
        if let Some(cfg) = &self.config {
            let mut hasher = Sha256::new();
            hasher.update(cfg.as_bytes());
            let digest = hasher.finalize();
            let hex: String = digest[..8].iter().map(|b| format!("{b:02x}")).collect();
            s.push_str(&format!("# config: {hex}\n"));
        }
        s
    }
}

/// Writes `content` to `path` atomically (temp file + rename).
pub fn write_atomic(path: &Path, content: &str) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let dir: PathBuf = dir.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir)?;
    tmp.write_all(content.as_bytes())?;
    tmp.flush()?;
    tmp.persist(path)
        .map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Renders rows as a TSV table with metadata and a header row.
pub fn render_table(meta: &Meta, header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = meta.header_lines();
    out.push_str(&header.join("\t"));
    out.push('\n');
    for row in rows {
        out.push_str(&row.join("\t"));
        out.push('\n');
    }
    out
}

/// Shortest round-trip float formatting; NaN becomes "NA".
pub fn fmt_float(v: f64) -> String {
    if v.is_nan() {
        "NA".to_string()
    } else {
        format!("{v}")
    }
}

fn split_header(line: &str) -> Vec<String> {
    line.trim_end_matches(['\r', '\n'])
        .split('\t')
        .map(str::to_string)
        .collect()
}

/// Lines of a TSV file with `#` metadata and blank lines skipped;
/// returns (header fields, data lines).
fn read_tsv(path: &Path) -> Result<(Vec<String>, Vec<(usize, Vec<String>)>)> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    let mut header: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let fields = split_header(line);
        match &header {
            None => header = Some(fields),
            Some(h) => {
                if fields.len() != h.len() {
                    return Err(Error::Parse(format!(
                        "{}:{}: expected {} fields, found {}",
                        path.display(),
                        lineno + 1,
                        h.len(),
                        fields.len()
                    )));
                }
                rows.push((lineno + 1, fields));
            }
        }
    }
    let header = header
        .ok_or_else(|| Error::Parse(format!("{}: no header row", path.display())))?;
    Ok((header, rows))
}

fn parse_f64(path: &Path, lineno: usize, field: &str) -> Result<f64> {
    field.parse::<f64>().map_err(|_| {
        Error::Parse(format!(
            "{}:{}: expected a number, found '{}'",
            path.display(),
            lineno,
            field
        ))
    })
}

/// Reads a trait table: column `id`, one trait column, any other numeric
/// columns as covariates, and an optional `offset` column. Rows whose trait
/// value is `NA` are dropped.
pub fn read_trait_table(path: &Path, trait_col: &str) -> Result<TraitTable> {
    let (header, rows) = read_tsv(path)?;
    let col = |name: &str| header.iter().position(|h| h == name);
    let id_idx = col("id")
        .ok_or_else(|| Error::Parse(format!("{}: missing 'id' column", path.display())))?;
    let trait_idx = col(trait_col).ok_or_else(|| {
        Error::Parse(format!(
            "{}: missing trait column '{trait_col}'",
            path.display()
        ))
    })?;
    let offset_idx = col("offset");
    let covariate_cols: Vec<usize> = (0..header.len())
        .filter(|&i| i != id_idx && i != trait_idx && Some(i) != offset_idx)
        .collect();

    let mut table = TraitTable {
        ids: Vec::new(),
        trait_values: Vec::new(),
        covariate_names: covariate_cols.iter().map(|&i| header[i].clone()).collect(),
        covariates: vec![Vec::new(); covariate_cols.len()],
        offsets: offset_idx.map(|_| Vec::new()),
    };
    for (lineno, fields) in rows {
        if fields[trait_idx] == "NA" {
            continue;
        }
        table.ids.push(fields[id_idx].clone());
        table
            .trait_values
            .push(parse_f64(path, lineno, &fields[trait_idx])?);
        for (k, &ci) in covariate_cols.iter().enumerate() {
            table.covariates[k].push(parse_f64(path, lineno, &fields[ci])?);
        }
        if let (Some(oi), Some(offsets)) = (offset_idx, table.offsets.as_mut()) {
            let v = parse_f64(path, lineno, &fields[oi])?;
            if v <= 0.0 {
                return Err(Error::Parse(format!(
                    "{}:{}: offsets must be positive, found {v}",
                    path.display(),
                    lineno
                )));
            }
            offsets.push(v);
        }
    }
    table.validate()?;
    Ok(table)
}

/// Writes a trait table with the given extra column appended (for adjusted
/// traits); passing `None` writes the table as-is.
pub fn write_trait_table(
    path: &Path,
    meta: &Meta,
    table: &TraitTable,
    extra: Option<(&str, &[f64])>,
) -> Result<()> {
    let mut header: Vec<&str> = vec!["id"];
    header.push("trait");
    for c in &table.covariate_names {
        header.push(c);
    }
    if table.offsets.is_some() {
        header.push("offset");
    }
    if let Some((name, _)) = extra {
        header.push(name);
    }
    let mut rows = Vec::with_capacity(table.n());
    for i in 0..table.n() {
        let mut row = vec![table.ids[i].clone(), fmt_float(table.trait_values[i])];
        for col in &table.covariates {
            row.push(fmt_float(col[i]));
        }
        if let Some(of) = &table.offsets {
            row.push(fmt_float(of[i]));
        }
        if let Some((_, vals)) = extra {
            row.push(fmt_float(vals[i]));
        }
        rows.push(row);
    }
    write_atomic(path, &render_table(meta, &header, &rows))
}

/// Reads a genotype matrix: columns `id`, `chrom`, `pos`, `group`, then one
/// column per individual with calls 0/1/2/NA. A `.` group means ungrouped.
pub fn read_genotype_matrix(path: &Path) -> Result<(GenotypeMatrix, Vec<String>)> {
    let (header, rows) = read_tsv(path)?;
    let expected = ["id", "chrom", "pos", "group"];
    if header.len() < 5 || header[..4] != expected {
        return Err(Error::Parse(format!(
            "{}: genotype header must start with 'id\tchrom\tpos\tgroup' followed by individual ids",
            path.display()
        )));
    }
    let individuals: Vec<String> = header[4..].to_vec();
    let mut loci = Vec::with_capacity(rows.len());
    let mut calls = Vec::with_capacity(rows.len());
    for (lineno, fields) in rows {
        let pos: u64 = fields[2].parse().map_err(|_| {
            Error::Parse(format!(
                "{}:{}: invalid position '{}'",
                path.display(),
                lineno,
                fields[2]
            ))
        })?;
        let group = match fields[3].as_str() {
            "." | "" | "NA" => None,
            g => Some(g.to_string()),
        };
        loci.push(LocusRecord {
            id: fields[0].clone(),
            chrom: fields[1].clone(),
            pos,
            group,
        });
        let row: Result<Vec<Call>> = fields[4..]
            .iter()
            .map(|f| {
                Call::parse(f).map_err(|e| {
                    Error::Parse(format!("{}:{}: {e}", path.display(), lineno))
                })
            })
            .collect();
        calls.push(row?);
    }
    Ok((
        GenotypeMatrix::new(loci, calls, individuals.len())?,
        individuals,
    ))
}

/// Reads a two-column dataset for the `test` command: columns `y` and `x`
/// (0 = labeled, 1 = unlabeled), optional `offset`.
pub fn read_dataset(path: &Path) -> Result<crate::Dataset> {
    let (header, rows) = read_tsv(path)?;
    let col = |name: &str| header.iter().position(|h| h == name);
    let y_idx = col("y")
        .ok_or_else(|| Error::Parse(format!("{}: missing 'y' column", path.display())))?;
    let x_idx = col("x")
        .ok_or_else(|| Error::Parse(format!("{}: missing 'x' column", path.display())))?;
    let offset_idx = col("offset");
    let mut y = Vec::new();
    let mut x = Vec::new();
    let mut offsets = offset_idx.map(|_| Vec::new());
    for (lineno, fields) in rows {
        y.push(parse_f64(path, lineno, &fields[y_idx])?);
        x.push(match fields[x_idx].as_str() {
            "0" => false,
            "1" => true,
            other => {
                return Err(Error::Parse(format!(
                    "{}:{}: group indicator must be 0 or 1, found '{other}'",
                    path.display(),
                    lineno
                )))
            }
        });
        if let (Some(oi), Some(off)) = (offset_idx, offsets.as_mut()) {
            off.push(parse_f64(path, lineno, &fields[oi])?);
        }
    }
    crate::Dataset::new(y, x, offsets)
}
