//! Diagonal generator scaling so implied annual PDs hit a target vector.
//!
//! Given an annual TPM with generator Λ (the regularized principal log),
//! find U = diag(μ₁, …, μ_{N−1}, 1) such that the last column of exp(UΛ)
//! equals the target PDs. A damped Newton iteration with a finite-
//! difference Jacobian solves the square system; the default state's
//! scaler is pinned at 1.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::matrix_core::{expm, principal_log, GeneratorMatrix, TransitionMatrix};
use crate::pd_policy::PdVector;
use crate::regularization::regularize_generator;
use crate::{Error, Result};

/// Hard bounds on the diagonal scalers; leaving them signals a target
/// incompatible with the generator.
pub const MU_MAX: f64 = 100.0;
/// Default absolute tolerance on the calibrated PDs.
pub const DEFAULT_TOL: f64 = 1e-10;

const MAX_ITER: usize = 200;
const MAX_BACKTRACK: usize = 40;

/// Outcome of a JLT calibration.
#[derive(Debug, Clone)]
pub struct JltResult {
    /// Per-state diagonal scalers; the default state's entry is exactly 1.
    pub mu: Vec<f64>,
    pub calibrated_annual: TransitionMatrix,
    pub calibrated_monthly: TransitionMatrix,
    /// Signed calibrated-minus-target PD per non-default state.
    pub pd_discrepancy: Vec<f64>,
}

impl JltResult {
    /// Serializable summary (scalers and discrepancies by rating).
    pub fn summary(&self) -> JltSummary {
        let labels = self.calibrated_annual.schema().labels();
        JltSummary {
            mu: labels.iter().cloned().zip(self.mu.iter().copied()).collect(),
            pd_discrepancy: labels[..labels.len() - 1]
                .iter()
                .cloned()
                .zip(self.pd_discrepancy.iter().copied())
                .collect(),
        }
    }
}

/// JSON-friendly view of a [`JltResult`].
#[derive(Debug, Clone, Serialize)]
pub struct JltSummary {
    pub mu: Vec<(String, f64)>,
    pub pd_discrepancy: Vec<(String, f64)>,
}

/// Which generator the calibration scales.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LambdaChoice {
    /// The principal matrix logarithm as-is, possibly with negative
    /// off-diagonals.
    RawLog,
    /// The regularized generator, guaranteeing exp(UΛ) is a proper TPM
    /// for any positive diagonal U.
    Regularized,
}

/// Calibrates the diagonal scaling against `target_pd` (annual PDs for
/// every non-default state). `tol` is absolute on PDs; pass
/// [`DEFAULT_TOL`] unless a looser fit is wanted. Scales the regularized
/// generator; see [`calibrate_jlt_with`] to pick the raw logarithm.
pub fn calibrate_jlt(
    annual: &TransitionMatrix,
    target_pd: &PdVector,
    tol: f64,
) -> Result<JltResult> {
    calibrate_jlt_with(annual, target_pd, tol, LambdaChoice::Regularized)
}

/// [`calibrate_jlt`] with an explicit choice of generator to scale.
pub fn calibrate_jlt_with(
    annual: &TransitionMatrix,
    target_pd: &PdVector,
    tol: f64,
    choice: LambdaChoice,
) -> Result<JltResult> {
    if tol <= 0.0 {
        return Err(Error::Validation(format!("tolerance must be positive, got {tol}")));
    }
    let schema = annual.schema().clone();
    let n = schema.len();
    let m = n - 1; // unknowns: scalers for non-default states
    let raw = principal_log(annual)?;
    let lambda = match choice {
        LambdaChoice::RawLog => raw,
        LambdaChoice::Regularized => regularize_generator(&raw)?.0,
    };

    let mut target = DVector::zeros(m);
    for i in 0..m {
        let label = &schema.labels()[i];
        let pd = target_pd.get(label).ok_or_else(|| {
            Error::Validation(format!("target PD vector lacks an entry for {label}"))
        })?;
        if !(0.0 < pd && pd < 1.0) {
            return Err(Error::Validation(format!(
                "target PD for {label} must lie strictly in (0, 1), got {pd}"
            )));
        }
        target[i] = pd;
    }

    // initial guess: ratio of target to implied PD, clamped to sane range
    let implied = pd_column(lambda.entries(), &DVector::from_element(m, 1.0), 1.0)?;
    let mut mu = DVector::from_fn(m, |i, _| {
        if implied[i] > 0.0 {
            (target[i] / implied[i]).clamp(0.01, MU_MAX)
        } else {
            1.0
        }
    });

    let residual = |mu: &DVector<f64>| -> Result<DVector<f64>> {
        Ok(pd_column(lambda.entries(), mu, 1.0)? - &target)
    };

    let mut r = residual(&mu)?;
    let mut converged = false;
    for _ in 0..MAX_ITER {
        if r.amax() < tol {
            converged = true;
            break;
        }
        // central finite-difference Jacobian
        let mut jac = DMatrix::zeros(m, m);
        for k in 0..m {
            let h = 1e-6 * mu[k].abs().max(1.0);
            let mut plus = mu.clone();
            let mut minus = mu.clone();
            plus[k] += h;
            minus[k] -= h;
            let col = (residual(&plus)? - residual(&minus)?) / (2.0 * h);
            jac.set_column(k, &col);
        }
        let step = jac.clone().lu().solve(&r).ok_or_else(|| {
            Error::Numerical("singular Jacobian in PD calibration".into())
        })?;

        // damped update: halve until the residual norm decreases
        let base_norm = r.norm();
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..MAX_BACKTRACK {
            let trial = &mu - alpha * &step;
            if trial.iter().all(|&v| v > 0.0 && v <= MU_MAX) {
                let tr = residual(&trial)?;
                if tr.norm() < base_norm {
                    mu = trial;
                    r = tr;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            return Err(Error::Numerical(format!(
                "PD calibration stalled; residuals {:?}",
                r.as_slice()
            )));
        }
    }
    if !converged && r.amax() >= tol {
        return Err(Error::Numerical(format!(
            "PD calibration did not converge within {MAX_ITER} iterations; residuals {:?}",
            r.as_slice()
        )));
    }
    if mu.iter().any(|&v| !(0.0 < v && v <= MU_MAX)) {
        return Err(Error::Numerical(format!(
            "calibrated scalers left (0, {MU_MAX}]: {:?}",
            mu.as_slice()
        )));
    }

    let scaled = scale_generator(lambda.entries(), &mu);
    let scaled_gen = GeneratorMatrix::new(schema.clone(), scaled)?;
    let calibrated_annual = crate::matrix_core::matrix_exp(&scaled_gen, 1.0)?;
    let calibrated_monthly = crate::matrix_core::matrix_exp(&scaled_gen, 1.0 / 12.0)?;
    let pd_discrepancy: Vec<f64> = (0..m)
        .map(|i| calibrated_annual.entries()[(i, n - 1)] - target[i])
        .collect();

    Ok(JltResult {
        mu: mu.iter().copied().chain(std::iter::once(1.0)).collect(),
        calibrated_annual,
        calibrated_monthly,
        pd_discrepancy,
    })
}

/// U·Λ with U = diag(mu, 1): scales row i of Λ by mu[i].
fn scale_generator(lambda: &DMatrix<f64>, mu: &DVector<f64>) -> DMatrix<f64> {
    let n = lambda.nrows();
    let mut out = lambda.clone();
    for i in 0..n - 1 {
        for j in 0..n {
            out[(i, j)] *= mu[i];
        }
    }
    out
}

/// Last column of exp(s·UΛ), restricted to non-default rows.
fn pd_column(lambda: &DMatrix<f64>, mu: &DVector<f64>, s: f64) -> Result<DVector<f64>> {
    let n = lambda.nrows();
    let e = expm(&(scale_generator(lambda, mu) * s));
    Ok(DVector::from_fn(n - 1, |i, _| e[(i, n - 1)]))
}
