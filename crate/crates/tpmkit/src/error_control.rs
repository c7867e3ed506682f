//! Error-control artifacts: difference tables and norm summaries between
//! a reconstructed annual TPM and its source.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::matrix_core::{norm, MatrixNorm, TransitionMatrix};
use crate::{Error, Result};

/// Comparison of two same-shape transition matrices.
#[derive(Debug, Clone)]
pub struct ComparisonReport {
    /// A − B, entry-wise.
    pub absolute_diff: DMatrix<f64>,
    /// (A − B) / B where B is nonzero; `None` marks undefined cells.
    pub relative_diff: Vec<Vec<Option<f64>>>,
    pub norms: NormSummary,
    /// Human-readable operand descriptions for report headers.
    pub lhs_description: String,
    pub rhs_description: String,
}

/// The four matrix norms of the absolute difference.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct NormSummary {
    pub one: f64,
    pub two: f64,
    pub inf: f64,
    pub frobenius: f64,
}

impl NormSummary {
    pub fn of(a: &DMatrix<f64>) -> Self {
        NormSummary {
            one: norm(a, MatrixNorm::One),
            two: norm(a, MatrixNorm::Two),
            inf: norm(a, MatrixNorm::Inf),
            frobenius: norm(a, MatrixNorm::Frobenius),
        }
    }

    /// The Frobenius value divided by the element count, for readers who
    /// prefer a per-element scale. Off by default in reports.
    pub fn frobenius_per_element(&self, n_elements: usize) -> f64 {
        self.frobenius / n_elements as f64
    }
}

/// Compares two matrices over the same schema: A − B, the relative table
/// with undefined cells where B is zero, and the norms of the difference.
pub fn compare(a: &TransitionMatrix, b: &TransitionMatrix) -> Result<ComparisonReport> {
    if a.schema() != b.schema() {
        return Err(Error::Validation(format!(
            "cannot compare matrices over different schemas ({:?} vs {:?})",
            a.schema().scheme_id(),
            b.schema().scheme_id()
        )));
    }
    let diff = a.entries() - b.entries();
    let n = a.schema().len();
    let relative_diff = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let denom = b.entries()[(i, j)];
                    (denom != 0.0).then(|| diff[(i, j)] / denom)
                })
                .collect()
        })
        .collect();
    Ok(ComparisonReport {
        norms: NormSummary::of(&diff),
        absolute_diff: diff,
        relative_diff,
        lhs_description: format!("{}-month TPM family", a.period_months()),
        rhs_description: format!("{}-month TPM family", b.period_months()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rating_schema::RatingSchema;

    fn tpm(entries: &[f64]) -> TransitionMatrix {
        let schema =
            RatingSchema::new("toy", vec!["A".into(), "B".into(), "D".into()]).unwrap();
        TransitionMatrix::new(schema, DMatrix::from_row_slice(3, 3, entries), 12).unwrap()
    }

    #[test]
    fn self_comparison_is_all_zero() {
        let a = tpm(&[0.9, 0.09, 0.01, 0.1, 0.8, 0.1, 0.0, 0.0, 1.0]);
        let r = compare(&a, &a).unwrap();
        assert_eq!(r.absolute_diff.amax(), 0.0);
        assert_eq!(r.norms.one, 0.0);
        assert_eq!(r.norms.frobenius, 0.0);
        assert_eq!(r.relative_diff[0][0], Some(0.0));
    }

    #[test]
    fn zero_denominator_is_undefined_not_zero_or_infinite() {
        let a = tpm(&[0.9, 0.09, 0.01, 0.1, 0.8, 0.1, 0.0, 0.0, 1.0]);
        let b = tpm(&[0.9, 0.10, 0.00, 0.1, 0.8, 0.1, 0.0, 0.0, 1.0]);
        let r = compare(&a, &b).unwrap();
        assert_eq!(r.relative_diff[0][2], None);
        assert!((r.relative_diff[0][1].unwrap() - (-0.1)).abs() < 1e-12);
        // default-row zeros divide zero by zero: also undefined
        assert_eq!(r.relative_diff[2][0], None);
    }

    #[test]
    fn comparison_is_antisymmetric() {
        let a = tpm(&[0.9, 0.09, 0.01, 0.1, 0.8, 0.1, 0.0, 0.0, 1.0]);
        let b = tpm(&[0.85, 0.13, 0.02, 0.15, 0.75, 0.1, 0.0, 0.0, 1.0]);
        let ab = compare(&a, &b).unwrap();
        let ba = compare(&b, &a).unwrap();
        assert!((&ab.absolute_diff + &ba.absolute_diff).amax() < 1e-15);
        assert_eq!(ab.norms.frobenius, ba.norms.frobenius);
    }

    #[test]
    fn schema_mismatch_is_rejected() {
        let a = tpm(&[0.9, 0.09, 0.01, 0.1, 0.8, 0.1, 0.0, 0.0, 1.0]);
        let schema =
            RatingSchema::new("other", vec!["X".into(), "Y".into(), "D".into()]).unwrap();
        let b = TransitionMatrix::new(
            schema,
            DMatrix::from_row_slice(3, 3, &[0.9, 0.09, 0.01, 0.1, 0.8, 0.1, 0.0, 0.0, 1.0]),
            12,
        )
        .unwrap();
        assert!(compare(&a, &b).is_err());
    }
}
