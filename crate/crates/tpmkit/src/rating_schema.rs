//! Rating systems, external-rating mapping, and state absorption.
//!
//! A [`RatingSchema`] is an ordered list of rating labels from best to
//! worst whose last state is the absorbing default. A [`RatingMap`]
//! translates external agency labels (S&P, Moody's, bank-internal notches)
//! into the schema's alphabet. [`absorb_state`] collapses a near-default
//! state (typically CCC) into the default column before sub-period
//! construction.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::matrix_core::TransitionMatrix;
use crate::{Error, Result};

/// An ordered rating alphabet with an absorbing default as its last state.
///
/// Immutable after construction and cheap to clone (shared internally), so
/// matrices bound to the same schema can be compared by pointer or value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingSchema {
    scheme_id: String,
    labels: Vec<String>,
}

impl RatingSchema {
    /// Builds a schema from best-to-worst labels; the last label is the
    /// absorbing default state.
    ///
    /// # Errors
    ///
    /// Rejects fewer than two labels, empty labels, and duplicates.
    pub fn new(scheme_id: impl Into<String>, labels: Vec<String>) -> Result<Self> {
        if labels.len() < 2 {
            return Err(Error::Validation(format!(
                "a rating schema needs at least two states, got {}",
                labels.len()
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for label in &labels {
            if label.is_empty() {
                return Err(Error::Validation("empty rating label".into()));
            }
            if !seen.insert(label.as_str()) {
                return Err(Error::Validation(format!("duplicate rating label {label:?}")));
            }
        }
        Ok(RatingSchema {
            scheme_id: scheme_id.into(),
            labels,
        })
    }

    pub fn scheme_id(&self) -> &str {
        &self.scheme_id
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Number of states, default included.
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        false // by construction: at least two labels
    }

    /// Position of the absorbing default state (always the last label).
    pub fn default_index(&self) -> usize {
        self.labels.len() - 1
    }

    /// Index of `label`, if present.
    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Schema with state `index` removed (used by [`absorb_state`]).
    fn without(&self, index: usize) -> RatingSchema {
        let labels: Vec<String> = self
            .labels
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != index)
            .map(|(_, l)| l.clone())
            .collect();
        RatingSchema {
            scheme_id: self.scheme_id.clone(),
            labels,
        }
    }
}

/// One external-label-to-internal-label association.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RatingMapEntry {
    pub scheme: String,
    pub label: String,
    pub internal: String,
}

/// Mapping from external rating schemes onto a target [`RatingSchema`].
#[derive(Debug, Clone)]
pub struct RatingMap {
    target: RatingSchema,
    entries: HashMap<(String, String), String>,
}

impl RatingMap {
    /// Builds a map, checking that every internal label belongs to the
    /// target schema and that no (scheme, label) pair maps twice.
    pub fn new(target: RatingSchema, entries: Vec<RatingMapEntry>) -> Result<Self> {
        let mut map = HashMap::with_capacity(entries.len());
        for e in entries {
            if target.index_of(&e.internal).is_none() {
                return Err(Error::Validation(format!(
                    "rating map entry ({}, {}) targets {:?}, which is not in schema {:?}",
                    e.scheme, e.label, e.internal, target.scheme_id
                )));
            }
            if map.insert((e.scheme.clone(), e.label.clone()), e.internal).is_some() {
                return Err(Error::Validation(format!(
                    "rating map entry ({}, {}) appears more than once",
                    e.scheme, e.label
                )));
            }
        }
        Ok(RatingMap { target, entries: map })
    }

    pub fn target(&self) -> &RatingSchema {
        &self.target
    }

    /// Number of (scheme, label) pairs in the map.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Resolves an external (scheme, label) pair to an internal rating label.
///
/// # Errors
///
/// Unknown pairs produce a lookup error naming the pair.
pub fn map_external_rating<'a>(map: &'a RatingMap, scheme: &str, label: &str) -> Result<&'a str> {
    map.entries
        .get(&(scheme.to_string(), label.to_string()))
        .map(String::as_str)
        .ok_or_else(|| {
            Error::Validation(format!("no rating map entry for ({scheme}, {label})"))
        })
}

/// Absorbs `state` into the default column: deletes the state's row, adds
/// its column into the default column, then deletes its column.
///
/// Row sums are preserved exactly, so the result is row-stochastic whenever
/// the input is.
///
/// # Errors
///
/// The first (best) state and the default state itself cannot be absorbed.
pub fn absorb_state(tpm: &TransitionMatrix, state: &str) -> Result<TransitionMatrix> {
    let schema = tpm.schema();
    let k = schema
        .index_of(state)
        .ok_or_else(|| Error::Validation(format!("unknown rating label {state:?}")))?;
    if k == schema.default_index() {
        return Err(Error::Validation(
            "cannot absorb the default state into itself".into(),
        ));
    }
    if k == 0 {
        return Err(Error::Validation(
            "refusing to absorb the best rating state".into(),
        ));
    }

    let n = schema.len();
    let keep: Vec<usize> = (0..n).filter(|&i| i != k).collect();
    let mut entries = nalgebra::DMatrix::<f64>::zeros(n - 1, n - 1);
    for (ri, &i) in keep.iter().enumerate() {
        for (ci, &j) in keep.iter().enumerate() {
            entries[(ri, ci)] = tpm.entries()[(i, j)];
        }
        // the absorbed state's mass moves into the default column
        entries[(ri, n - 2)] += tpm.entries()[(i, k)];
    }

    // A PD override may already have unbalanced the rows; absorbing does
    // not change row sums, so carry the flag through unchanged.
    let mut out =
        TransitionMatrix::new_unnormalized(schema.without(k), entries, tpm.period_months())?;
    out.set_needs_rescaling(tpm.needs_rescaling());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix_core::TransitionMatrix;
    use nalgebra::DMatrix;

    fn schema(labels: &[&str]) -> RatingSchema {
        RatingSchema::new("test", labels.iter().map(|s| s.to_string()).collect()).unwrap()
    }

    #[test]
    fn schema_rejects_duplicates_and_short_alphabets() {
        assert!(RatingSchema::new("x", vec!["A".into()]).is_err());
        assert!(RatingSchema::new("x", vec!["A".into(), "A".into()]).is_err());
        assert!(RatingSchema::new("x", vec!["A".into(), "".into()]).is_err());
        let s = schema(&["A", "B", "D"]);
        assert_eq!(s.default_index(), 2);
        assert_eq!(s.index_of("B"), Some(1));
    }

    #[test]
    fn map_resolves_and_reports_unknown_pairs() {
        let target = schema(&["AAA", "BBB", "D"]);
        let map = RatingMap::new(
            target,
            vec![
                RatingMapEntry {
                    scheme: "sp".into(),
                    label: "AAA".into(),
                    internal: "AAA".into(),
                },
                RatingMapEntry {
                    scheme: "moodys".into(),
                    label: "Baa2".into(),
                    internal: "BBB".into(),
                },
            ],
        )
        .unwrap();
        assert_eq!(map_external_rating(&map, "sp", "AAA").unwrap(), "AAA");
        assert_eq!(map_external_rating(&map, "moodys", "Baa2").unwrap(), "BBB");
        let err = map_external_rating(&map, "fitch", "AAA").unwrap_err();
        assert!(err.to_string().contains("(fitch, AAA)"));
    }

    #[test]
    fn map_rejects_labels_outside_target_schema() {
        let target = schema(&["AAA", "D"]);
        let err = RatingMap::new(
            target,
            vec![RatingMapEntry {
                scheme: "sp".into(),
                label: "CC".into(),
                internal: "CCC".into(),
            }],
        )
        .unwrap_err();
        assert!(err.to_string().contains("CCC"));
    }

    #[test]
    fn absorb_moves_column_mass_into_default() {
        let s = schema(&["A", "B", "C", "D"]);
        #[rustfmt::skip]
        let m = DMatrix::from_row_slice(4, 4, &[
            0.90, 0.05, 0.03, 0.02,
            0.10, 0.80, 0.06, 0.04,
            0.00, 0.20, 0.50, 0.30,
            0.00, 0.00, 0.00, 1.00,
        ]);
        let tpm = TransitionMatrix::new(s, m, 12).unwrap();
        let out = absorb_state(&tpm, "C").unwrap();
        assert_eq!(out.schema().labels(), &["A", "B", "D"]);
        // default entry = old default + old C entry
        assert!((out.entries()[(0, 2)] - 0.05).abs() < 1e-15);
        assert!((out.entries()[(1, 2)] - 0.10).abs() < 1e-15);
        // other entries untouched
        assert!((out.entries()[(0, 0)] - 0.90).abs() < 1e-15);
        // row sums preserved exactly
        for i in 0..3 {
            assert!((out.entries().row(i).sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn absorbing_a_zero_column_changes_nothing_else() {
        let s = schema(&["A", "B", "C", "D"]);
        #[rustfmt::skip]
        let m = DMatrix::from_row_slice(4, 4, &[
            0.90, 0.08, 0.00, 0.02,
            0.10, 0.85, 0.00, 0.05,
            0.00, 0.20, 0.50, 0.30,
            0.00, 0.00, 0.00, 1.00,
        ]);
        let tpm = TransitionMatrix::new(s, m, 12).unwrap();
        let out = absorb_state(&tpm, "C").unwrap();
        for (i, row) in [(0usize, [0.90, 0.08, 0.02]), (1, [0.10, 0.85, 0.05])] {
            for (j, want) in row.iter().enumerate() {
                assert!((out.entries()[(i, j)] - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn absorbing_default_or_best_state_is_rejected() {
        let s = schema(&["A", "B", "D"]);
        let m = DMatrix::from_row_slice(3, 3, &[0.9, 0.05, 0.05, 0.1, 0.8, 0.1, 0.0, 0.0, 1.0]);
        let tpm = TransitionMatrix::new(s, m, 12).unwrap();
        assert!(absorb_state(&tpm, "D").is_err());
        assert!(absorb_state(&tpm, "A").is_err());
        assert!(absorb_state(&tpm, "Z").is_err());
    }
}
