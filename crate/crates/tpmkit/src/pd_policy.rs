//! Basel PD aggregation and merging PD vectors into transition matrices.
//!
//! Internal-rating PD tables are aggregated to the working rating alphabet
//! through a bucket map (average or max per bucket). The resulting PD
//! vector can then be merged into a TPM's default column with a floor or
//! replace policy, after which the rows are rescaled back to unit mass.

use std::collections::BTreeMap;

use crate::matrix_core::TransitionMatrix;
use crate::{Error, Result};

/// Annual PDs keyed by internal rating id, for one sector.
#[derive(Debug, Clone)]
pub struct InternalPdTable {
    sector: String,
    entries: BTreeMap<String, f64>,
}

impl InternalPdTable {
    pub fn new(sector: impl Into<String>, entries: BTreeMap<String, f64>) -> Result<Self> {
        for (id, pd) in &entries {
            if !(0.0..=1.0).contains(pd) {
                return Err(Error::Validation(format!(
                    "internal rating {id}: PD {pd} outside [0, 1]"
                )));
            }
        }
        Ok(Self {
            sector: sector.into(),
            entries,
        })
    }

    pub fn sector(&self) -> &str {
        &self.sector
    }

    pub fn get(&self, id: &str) -> Option<f64> {
        self.entries.get(id).copied()
    }
}

/// Per-rating annual default probabilities (decimals). Ratings absent from
/// the map receive no override.
#[derive(Debug, Clone, PartialEq)]
pub struct PdVector {
    entries: BTreeMap<String, f64>,
}

impl PdVector {
    pub fn new(entries: BTreeMap<String, f64>) -> Result<Self> {
        for (label, pd) in &entries {
            if !(0.0..=1.0).contains(pd) {
                return Err(Error::Validation(format!(
                    "rating {label}: PD {pd} outside [0, 1]"
                )));
            }
        }
        Ok(Self { entries })
    }

    pub fn get(&self, label: &str) -> Option<f64> {
        self.entries.get(label).copied()
    }

    pub fn entries(&self) -> &BTreeMap<String, f64> {
        &self.entries
    }
}

/// How bucket members combine in [`aggregate_basel_pd`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AggregationMode {
    Average,
    Max,
}

/// Rule for merging a PD vector into a TPM's default column.
#[derive(Debug, Clone, PartialEq)]
pub enum PdOverridePolicy {
    /// Leave the matrix untouched.
    None,
    /// Default-column entry becomes `max(original, source)` per row.
    Floor(PdVector),
    /// Default-column entry is set to the source PD per row.
    Replace(PdVector),
}

/// How rows regain unit mass after an override.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RescaleMethod {
    /// Absorb the excess into the diagonal entry.
    Diagonal,
    /// Scale all non-default entries by a common factor, holding the
    /// default column fixed.
    Proportional,
}

/// Collapses an internal-rating PD table onto the alphabet named by
/// `buckets` (rating label → member internal-rating ids).
pub fn aggregate_basel_pd(
    table: &InternalPdTable,
    buckets: &BTreeMap<String, Vec<String>>,
    mode: AggregationMode,
) -> Result<PdVector> {
    let mut out = BTreeMap::new();
    for (label, members) in buckets {
        if members.is_empty() {
            return Err(Error::Validation(format!(
                "bucket {label} for sector {} is empty",
                table.sector
            )));
        }
        let mut pds = Vec::with_capacity(members.len());
        for id in members {
            let pd = table.get(id).ok_or_else(|| {
                Error::Validation(format!(
                    "bucket {label} references internal rating {id} absent from the {} PD table",
                    table.sector
                ))
            })?;
            pds.push(pd);
        }
        let value = match mode {
            AggregationMode::Average => pds.iter().sum::<f64>() / pds.len() as f64,
            AggregationMode::Max => pds.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        };
        out.insert(label.clone(), value);
    }
    PdVector::new(out)
}

/// Merges a PD vector into the TPM's default column. The result's rows may
/// no longer sum to 1; it is flagged as needing rescaling when any row
/// changed.
pub fn apply_pd_override(
    tpm: &TransitionMatrix,
    policy: &PdOverridePolicy,
) -> Result<TransitionMatrix> {
    let source = match policy {
        PdOverridePolicy::None => return Ok(tpm.clone()),
        PdOverridePolicy::Floor(v) | PdOverridePolicy::Replace(v) => v,
    };
    let d = tpm.schema().default_index();
    let mut entries = tpm.entries().clone();
    let mut changed = false;
    for i in 0..d {
        let label = &tpm.schema().labels()[i];
        let Some(pd) = source.get(label) else {
            continue;
        };
        let new = match policy {
            PdOverridePolicy::Floor(_) => entries[(i, d)].max(pd),
            PdOverridePolicy::Replace(_) => pd,
            PdOverridePolicy::None => unreachable!(),
        };
        if new != entries[(i, d)] {
            entries[(i, d)] = new;
            changed = true;
        }
    }
    let mut out =
        TransitionMatrix::new_unnormalized(tpm.schema().clone(), entries, tpm.period_months())?;
    out.set_needs_rescaling(changed || tpm.needs_rescaling());
    Ok(out)
}

/// Restores unit row sums after an override. Row sums must already lie in
/// [0.5, 1.5]; anything further off signals corrupted input rather than an
/// override excess.
pub fn rescale_rows(tpm: &TransitionMatrix, method: RescaleMethod) -> Result<TransitionMatrix> {
    let d = tpm.schema().default_index();
    let n = tpm.schema().len();
    let mut entries = tpm.entries().clone();
    for i in 0..n {
        let sum: f64 = entries.row(i).iter().sum();
        if !(0.5..=1.5).contains(&sum) {
            return Err(Error::Validation(format!(
                "row {} sums to {sum}, outside the sane rescaling range [0.5, 1.5]",
                tpm.schema().labels()[i]
            )));
        }
        let excess = sum - 1.0;
        if excess == 0.0 {
            continue;
        }
        match method {
            RescaleMethod::Diagonal => {
                let new_diag = entries[(i, i)] - excess;
                if new_diag < 0.0 {
                    return Err(Error::Validation(format!(
                        "diagonal rescaling drives row {} diagonal to {new_diag}",
                        tpm.schema().labels()[i]
                    )));
                }
                entries[(i, i)] = new_diag;
            }
            RescaleMethod::Proportional => {
                let pd = entries[(i, d)];
                let nondefault: f64 = sum - pd;
                if nondefault <= 0.0 {
                    return Err(Error::Validation(format!(
                        "proportional rescaling of row {} impossible: non-default mass is zero",
                        tpm.schema().labels()[i]
                    )));
                }
                let factor = (1.0 - pd) / nondefault;
                if factor < 0.0 {
                    return Err(Error::Validation(format!(
                        "proportional rescaling of row {} impossible: PD {pd} exceeds 1",
                        tpm.schema().labels()[i]
                    )));
                }
                for j in 0..n {
                    if j != d {
                        entries[(i, j)] *= factor;
                    }
                }
            }
        }
    }
    TransitionMatrix::new(tpm.schema().clone(), entries, tpm.period_months())
}
