//! Migration-direction and migration-rate statistics on TPM rows, time
//! series of those statistics across annual matrices, and Pearson
//! correlations between series.
//!
//! Conventions: states are ordered best to worst with the default last;
//! an upgrade moves to a lower index, a downgrade to a higher one. The
//! MD/NMD variants exclude the default column, the TMD/NTMD variants count
//! default as a downgrade, and TMR is the total probability of leaving the
//! current rating.
//!
//! # Example
//!
//! ```
//! use tpmkit::cli_io::read_matrix_file;
//! use tpmkit::migration_stats::{migration_direction, MigrationKind};
//!
//! let fixtures = concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures");
//! let annual = read_matrix_file(format!("{fixtures}/inputs/us_industrial_annual.csv"))
//!     .unwrap()
//!     .into_tpm("us_industrial", 12)
//!     .unwrap();
//! let aaa = annual.schema().index_of("AAA").unwrap();
//! let tmd = migration_direction(&annual, aaa, MigrationKind::Tmd).unwrap();
//! let tmr = migration_direction(&annual, aaa, MigrationKind::Tmr).unwrap();
//! assert!((tmd - -0.0831).abs() < 1e-10); // AAA can only be downgraded
//! assert!((tmr - 0.0831).abs() < 1e-10);
//! ```

use crate::matrix_core::TransitionMatrix;
use crate::{Error, Result};

/// Which migration statistic to evaluate on a row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MigrationKind {
    /// Upgrade minus downgrade probability, excluding default, scaled by
    /// the non-default mass.
    Md,
    /// MD scaled instead by the total migration mass excluding default;
    /// 0 when the entity can only stay put or default.
    Nmd,
    /// Upgrade minus downgrade probability with default counted as a
    /// downgrade (unscaled).
    Tmd,
    /// TMD scaled by the total migration mass including default; 0 for an
    /// absorbing row.
    Ntmd,
    /// Total migration rate: probability of leaving the current rating.
    Tmr,
}

/// A yearly series of one statistic for one rating.
#[derive(Debug, Clone)]
pub struct MigrationSeries {
    pub rating: String,
    pub kind: MigrationKind,
    pub years: Vec<String>,
    pub values: Vec<f64>,
}

/// Evaluates a migration statistic on row `i` of a row-stochastic matrix.
/// The default row itself has no migration statistics.
pub fn migration_direction(tpm: &TransitionMatrix, i: usize, kind: MigrationKind) -> Result<f64> {
    let n = tpm.schema().len();
    let d = tpm.schema().default_index();
    if i >= n {
        return Err(Error::Validation(format!("row index {i} out of range for {n} states")));
    }
    if i == d {
        return Err(Error::Validation(
            "migration statistics are undefined for the default state".into(),
        ));
    }
    let row = tpm.entries().row(i);
    let p_ii = row[i];
    let p_id = row[d];
    let upgrades: f64 = (0..i).map(|j| row[j]).sum();
    let down_excl: f64 = (i + 1..n).filter(|&j| j != d).map(|j| row[j]).sum();

    Ok(match kind {
        MigrationKind::Md => (upgrades - down_excl) / (1.0 - p_id),
        MigrationKind::Nmd => {
            let mass = 1.0 - p_ii - p_id;
            if mass == 0.0 {
                0.0
            } else {
                (upgrades - down_excl) / mass
            }
        }
        MigrationKind::Tmd => upgrades - down_excl - p_id,
        MigrationKind::Ntmd => {
            if p_ii == 1.0 {
                0.0
            } else {
                (upgrades - down_excl - p_id) / (1.0 - p_ii)
            }
        }
        MigrationKind::Tmr => 1.0 - p_ii,
    })
}

/// Pearson correlation of two equally long series (length ≥ 3, both with
/// nonzero variance).
pub fn series_correlation(a: &MigrationSeries, b: &MigrationSeries) -> Result<f64> {
    pearson(&a.values, &b.values)
}

/// Pearson correlation coefficient of two aligned samples.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Validation(format!(
            "series lengths differ: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 3 {
        return Err(Error::Validation(format!(
            "correlation needs at least 3 points, got {}",
            x.len()
        )));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (&a, &b) in x.iter().zip(y.iter()) {
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
        sxy += (a - mx) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Validation(
            "correlation undefined: a series has zero variance".into(),
        ));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Applies [`migration_direction`] year-wise over a labelled history of
/// annual matrices.
pub fn build_series(
    history: &[(String, TransitionMatrix)],
    rating: &str,
    kind: MigrationKind,
) -> Result<MigrationSeries> {
    let mut years = Vec::with_capacity(history.len());
    let mut values = Vec::with_capacity(history.len());
    for (year, tpm) in history {
        let i = tpm.schema().index_of(rating).ok_or_else(|| {
            Error::Validation(format!("rating {rating:?} missing from the {year} matrix"))
        })?;
        years.push(year.clone());
        values.push(migration_direction(tpm, i, kind)?);
    }
    Ok(MigrationSeries {
        rating: rating.to_string(),
        kind,
        years,
        values,
    })
}
