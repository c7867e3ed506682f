//! File formats: CSV matrices and JSON configuration documents.
//!
//! A matrix file is a CSV whose first data row holds the rating labels and
//! whose subsequent rows hold a row label followed by probabilities as
//! decimals (never percents). An optional `# period_months=K` comment line
//! may precede the header. Canonical files written by [`write_matrix_file`]
//! use fixed decimal formatting with 10 significant digits and round-trip
//! byte-identically through [`read_matrix_file`].

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::Deserialize;

use crate::matrix_core::TransitionMatrix;
use crate::pd_policy::PdVector;
use crate::rating_schema::{RatingMap, RatingMapEntry, RatingSchema};
use crate::{Error, Result};

/// A parsed matrix file: labels, raw entries, optional period header.
///
/// The entries are not validated as a TPM — generator and difference
/// matrices use the same layout. Use [`MatrixFile::into_tpm`] when a
/// row-stochastic matrix is expected.
#[derive(Debug, Clone)]
pub struct MatrixFile {
    pub labels: Vec<String>,
    pub entries: DMatrix<f64>,
    pub period_months: Option<u32>,
}

impl MatrixFile {
    /// Interprets the file as a transition matrix (lenient row sums, since
    /// observed inputs carry display rounding).
    pub fn into_tpm(self, scheme_id: &str, default_period: u32) -> Result<TransitionMatrix> {
        let schema = RatingSchema::new(scheme_id, self.labels)?;
        TransitionMatrix::new_lenient(
            schema,
            self.entries,
            self.period_months.unwrap_or(default_period),
        )
    }
}

/// Reads a matrix CSV; see module docs for the layout.
pub fn read_matrix_file(path: impl AsRef<Path>) -> Result<MatrixFile> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_matrix(&text, &path.display().to_string())
}

fn parse_matrix(text: &str, file: &str) -> Result<MatrixFile> {
    let mut period_months = None;
    let mut labels: Vec<String> = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut row_labels: Vec<String> = Vec::new();

    for (lineno, line) in text.lines().enumerate() {
        let row = lineno + 1;
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            let comment = comment.trim();
            if let Some(v) = comment.strip_prefix("period_months=") {
                period_months = Some(v.trim().parse::<u32>().map_err(|_| Error::Parse {
                    file: file.into(),
                    row,
                    col: 1,
                    message: format!("invalid period_months value {v:?}"),
                })?);
            }
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if labels.is_empty() {
            if cells.len() < 3 {
                return Err(Error::Parse {
                    file: file.into(),
                    row,
                    col: 1,
                    message: "header must list at least two rating labels".into(),
                });
            }
            labels = cells[1..].iter().map(|s| s.trim().to_string()).collect();
            continue;
        }
        if cells.len() != labels.len() + 1 {
            return Err(Error::Parse {
                file: file.into(),
                row,
                col: cells.len(),
                message: format!(
                    "expected {} cells (label + {} values), found {}",
                    labels.len() + 1,
                    labels.len(),
                    cells.len()
                ),
            });
        }
        row_labels.push(cells[0].trim().to_string());
        let mut values = Vec::with_capacity(labels.len());
        for (ci, cell) in cells[1..].iter().enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                file: file.into(),
                row,
                col: ci + 2,
                message: format!("not a number: {cell:?}"),
            })?;
            values.push(v);
        }
        rows.push(values);
    }

    if labels.is_empty() {
        return Err(Error::Parse {
            file: file.into(),
            row: 1,
            col: 1,
            message: "file holds no matrix header".into(),
        });
    }
    if rows.len() != labels.len() || row_labels != labels {
        return Err(Error::Parse {
            file: file.into(),
            row: rows.len() + 1,
            col: 1,
            message: format!(
                "matrix must be square with row labels matching the header ({} columns, {} rows)",
                labels.len(),
                rows.len()
            ),
        });
    }
    let n = labels.len();
    let entries = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
    Ok(MatrixFile {
        labels,
        entries,
        period_months,
    })
}

/// Writes a matrix CSV in canonical form (10 significant digits, fixed
/// decimals); `period_months` emits the comment header when present.
pub fn write_matrix_file(
    path: impl AsRef<Path>,
    labels: &[String],
    entries: &DMatrix<f64>,
    period_months: Option<u32>,
) -> Result<()> {
    let path = path.as_ref();
    let text = render_matrix(labels, entries, period_months);
    fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Renders the canonical CSV text for a matrix (see [`write_matrix_file`]).
pub fn render_matrix(
    labels: &[String],
    entries: &DMatrix<f64>,
    period_months: Option<u32>,
) -> String {
    let mut out = String::new();
    if let Some(p) = period_months {
        out.push_str(&format!("# period_months={p}\n"));
    }
    out.push(',');
    out.push_str(&labels.join(","));
    out.push('\n');
    for i in 0..entries.nrows() {
        out.push_str(&labels[i]);
        for j in 0..entries.ncols() {
            out.push(',');
            out.push_str(&format_decimal(entries[(i, j)]));
        }
        out.push('\n');
    }
    out
}

/// Convenience: writes a [`TransitionMatrix`] with its schema labels and
/// period header.
pub fn write_tpm(path: impl AsRef<Path>, tpm: &TransitionMatrix) -> Result<()> {
    write_matrix_file(
        path,
        tpm.schema().labels(),
        tpm.entries(),
        Some(tpm.period_months()),
    )
}

/// Fixed-decimal formatting with 10 significant digits. Zero renders as
/// `0`; the output always parses back to within one unit in the tenth
/// significant digit, making save-load-save byte-stable.
pub fn format_decimal(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        // sentinel for undefined relative differences
        return "nan".to_string();
    }
    let sci = format!("{:.9e}", x.abs());
    let (mantissa, exp) = sci.split_once('e').expect("{:e} format always has an exponent");
    let exp: i32 = exp.parse().expect("exponent is an integer");
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    debug_assert_eq!(digits.len(), 10);
    let sign = if x < 0.0 { "-" } else { "" };
    let body = if exp >= 9 {
        // all digits left of the point, zero-padded
        format!("{digits}{}", "0".repeat((exp - 9) as usize))
    } else if exp >= 0 {
        let split = (exp + 1) as usize;
        format!("{}.{}", &digits[..split], &digits[split..])
    } else {
        format!("0.{}{digits}", "0".repeat((-exp - 1) as usize))
    };
    format!("{sign}{body}")
}

// ---------------------------------------------------------------------------
// JSON documents
// ---------------------------------------------------------------------------

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        file: path.display().to_string(),
        row: e.line(),
        col: e.column(),
        message: e.to_string(),
    })
}

/// Loads a PD vector from a `{ "RATING": pd, ... }` JSON object. Ratings
/// absent from the document simply receive no override.
pub fn read_pd_vector(path: impl AsRef<Path>) -> Result<PdVector> {
    let map: BTreeMap<String, f64> = read_json(path.as_ref())?;
    PdVector::new(map)
}

#[derive(Deserialize)]
struct RatingMapDoc {
    target_schema: SchemaDoc,
    entries: Vec<RatingMapEntry>,
}

#[derive(Deserialize)]
struct SchemaDoc {
    scheme_id: String,
    labels: Vec<String>,
}

/// Loads a rating map (target schema + external label entries) from JSON.
pub fn read_rating_map(path: impl AsRef<Path>) -> Result<RatingMap> {
    let doc: RatingMapDoc = read_json(path.as_ref())?;
    let schema = RatingSchema::new(doc.target_schema.scheme_id, doc.target_schema.labels)?;
    RatingMap::new(schema, doc.entries)
}

#[derive(Deserialize)]
struct InternalPdDoc {
    sector: String,
    entries: BTreeMap<String, f64>,
}

/// Loads an internal-rating PD table (`{"sector": ..., "entries": {"1": pd}}`).
pub fn read_internal_pd_table(
    path: impl AsRef<Path>,
) -> Result<crate::pd_policy::InternalPdTable> {
    let doc: InternalPdDoc = read_json(path.as_ref())?;
    crate::pd_policy::InternalPdTable::new(doc.sector, doc.entries)
}

/// Loads a bucket map (`{"AA": ["2", "3", "4"], ...}`) assigning internal
/// ratings to alphabetic ratings.
pub fn read_buckets(path: impl AsRef<Path>) -> Result<BTreeMap<String, Vec<String>>> {
    read_json(path.as_ref())
}
