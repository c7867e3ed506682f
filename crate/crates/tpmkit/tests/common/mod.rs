//! Shared helpers for fixture-driven integration tests.
//!
//! Reference tables store values at display precision. Comparisons use a
//! per-cell tolerance of one unit in the last displayed digit plus 1e-12,
//! which covers both round-half-away and truncation of the true value. In
//! scientific notation, a trailing zero in the mantissa is display padding
//! and counts as one fewer significant digit (`-1.90E-07` carries the
//! precision of `-1.9e-7`).

use std::path::PathBuf;

use nalgebra::DMatrix;

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(rel)
}

/// A reference table with cells kept as strings so their displayed
/// precision can be recovered.
pub struct ExpectedTable {
    pub labels: Vec<String>,
    pub row_labels: Vec<String>,
    pub cells: Vec<Vec<String>>,
    pub period_months: Option<u32>,
}

impl ExpectedTable {
    pub fn load(rel: &str) -> Self {
        let path = fixture(rel);
        let text = std::fs::read_to_string(&path)
            .unwrap_or_else(|e| panic!("cannot read {}: {e}", path.display()));
        let mut period_months = None;
        let mut labels = Vec::new();
        let mut row_labels = Vec::new();
        let mut cells = Vec::new();
        for line in text.lines() {
            let line = line.trim_end();
            if line.is_empty() {
                continue;
            }
            if let Some(c) = line.strip_prefix('#') {
                if let Some(v) = c.trim().strip_prefix("period_months=") {
                    period_months = Some(v.trim().parse().unwrap());
                }
                continue;
            }
            let parts: Vec<&str> = line.split(',').collect();
            if labels.is_empty() {
                labels = parts[1..].iter().map(|s| s.trim().to_string()).collect();
                continue;
            }
            row_labels.push(parts[0].trim().to_string());
            cells.push(parts[1..].iter().map(|s| s.trim().to_string()).collect());
        }
        ExpectedTable {
            labels,
            row_labels,
            cells,
            period_months,
        }
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.cells[i][j].parse().unwrap()
    }

    /// Column index by header label.
    pub fn col(&self, label: &str) -> usize {
        self.labels
            .iter()
            .position(|l| l == label)
            .unwrap_or_else(|| panic!("no column {label:?}"))
    }

    /// Row index by row label.
    pub fn row(&self, label: &str) -> usize {
        self.row_labels
            .iter()
            .position(|l| l == label)
            .unwrap_or_else(|| panic!("no row {label:?}"))
    }
}

/// One unit in the last displayed digit of `cell`, plus 1e-12 slack.
pub fn display_tolerance(cell: &str) -> f64 {
    let s = cell.trim().trim_start_matches('-');
    let (mantissa, exp): (&str, i32) = match s.split_once(['e', 'E']) {
        Some((m, e)) => (m, e.parse().unwrap()),
        None => (s, 0),
    };
    let frac = mantissa.split_once('.').map_or("", |(_, f)| f);
    let mut frac_digits = frac.len() as i32;
    if exp != 0 {
        // scientific mantissa: trailing zeros are padding
        frac_digits = frac.trim_end_matches('0').len() as i32;
    }
    10f64.powi(exp - frac_digits) + 1e-12
}

/// Asserts that `actual` matches the reference table cell-by-cell at
/// displayed precision. Returns the worst excess over tolerance for
/// diagnostics.
pub fn assert_matrix_matches(actual: &DMatrix<f64>, expected: &ExpectedTable, context: &str) {
    assert_eq!(actual.nrows(), expected.cells.len(), "{context}: row count");
    assert_eq!(actual.ncols(), expected.labels.len(), "{context}: col count");
    for i in 0..actual.nrows() {
        for j in 0..actual.ncols() {
            let cell = &expected.cells[i][j];
            let want = expected.value(i, j);
            let got = actual[(i, j)];
            let tol = display_tolerance(cell);
            assert!(
                (got - want).abs() <= tol,
                "{context}: cell ({}, {}) = {got}, reference {cell} (tol {tol:.2e}, off by {:.2e})",
                expected.row_labels[i],
                expected.labels[j],
                (got - want).abs()
            );
        }
    }
}

/// Scalar variant of the displayed-precision assertion.
pub fn assert_matches_cell(actual: f64, cell: &str, context: &str) {
    let want: f64 = cell.parse().unwrap();
    let tol = display_tolerance(cell);
    assert!(
        (actual - want).abs() <= tol,
        "{context}: got {actual}, reference {cell} (tol {tol:.2e})"
    );
}
