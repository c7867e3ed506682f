//! Dense square-matrix kernel: principal logarithm, exponential,
//! integer/fractional powers, and the four error norms.
//!
//! Matrices here are small (7–8 states in every shipped fixture, tens at
//! most), so everything is dense `f64` via [`nalgebra::DMatrix`]. The
//! principal logarithm uses inverse scaling-and-squaring: repeated square
//! roots by a Denman–Beavers iteration until the argument is close to the
//! identity, then a diagonal Padé approximant of `log(I + X)`, with a
//! complex eigendecomposition fallback guarded by a residual check. The
//! exponential is scaling-and-squaring with the order-13 Padé approximant.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::rating_schema::RatingSchema;
use crate::{Error, Result};

/// Row-sum slack accepted by the strict [`TransitionMatrix`] constructor.
pub const ROW_SUM_TOL: f64 = 1e-9;
/// Row-sum slack for observed inputs, whose published rows carry rounding
/// error of up to a few basis points.
pub const ROW_SUM_TOL_LENIENT: f64 = 1e-3;

/// A row-stochastic matrix bound to a rating schema and a period length.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    schema: RatingSchema,
    entries: DMatrix<f64>,
    period_months: u32,
    needs_rescaling: bool,
}

impl TransitionMatrix {
    /// Strict constructor: every row must sum to 1 within `1e-9`, entries
    /// must lie in `[0, 1]`, and the default row must be absorbing.
    pub fn new(schema: RatingSchema, entries: DMatrix<f64>, period_months: u32) -> Result<Self> {
        Self::build(schema, entries, period_months, ROW_SUM_TOL)
    }

    /// Lenient constructor for observed or intermediate matrices whose rows
    /// may be off unity by rounding or by a PD override; such matrices are
    /// flagged [`TransitionMatrix::needs_rescaling`].
    pub fn new_lenient(
        schema: RatingSchema,
        entries: DMatrix<f64>,
        period_months: u32,
    ) -> Result<Self> {
        Self::build(schema, entries, period_months, ROW_SUM_TOL_LENIENT)
    }

    /// Constructor for matrices mid-way through a PD override, whose row
    /// sums are deliberately off unity (by up to the largest PD shift).
    /// Entries must still be probabilities and the default row absorbing.
    pub fn new_unnormalized(
        schema: RatingSchema,
        entries: DMatrix<f64>,
        period_months: u32,
    ) -> Result<Self> {
        Self::build(schema, entries, period_months, f64::INFINITY)
    }

    /// Marks or clears the rescaling flag (used by override policies,
    /// which know whether they changed a row).
    pub fn set_needs_rescaling(&mut self, value: bool) {
        self.needs_rescaling = value;
    }

    fn build(
        schema: RatingSchema,
        entries: DMatrix<f64>,
        period_months: u32,
        row_tol: f64,
    ) -> Result<Self> {
        let n = schema.len();
        if entries.nrows() != n || entries.ncols() != n {
            return Err(Error::Validation(format!(
                "matrix is {}x{} but schema {:?} has {} states",
                entries.nrows(),
                entries.ncols(),
                schema.scheme_id(),
                n
            )));
        }
        let mut needs_rescaling = false;
        for i in 0..n {
            let mut sum = 0.0;
            for j in 0..n {
                let e = entries[(i, j)];
                if !(-1e-12..=1.0 + 1e-12).contains(&e) {
                    return Err(Error::Validation(format!(
                        "entry ({}, {}) = {e} is not a probability",
                        schema.labels()[i],
                        schema.labels()[j]
                    )));
                }
                sum += e;
            }
            if (sum - 1.0).abs() > row_tol {
                return Err(Error::Validation(format!(
                    "row {} sums to {sum}, outside 1 +/- {row_tol}",
                    schema.labels()[i]
                )));
            }
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                needs_rescaling = true;
            }
        }
        let d = schema.default_index();
        for j in 0..n {
            let want = if j == d { 1.0 } else { 0.0 };
            if (entries[(d, j)] - want).abs() > ROW_SUM_TOL {
                return Err(Error::Validation(format!(
                    "default row must be absorbing; entry ({}, {}) = {}",
                    schema.labels()[d],
                    schema.labels()[j],
                    entries[(d, j)]
                )));
            }
        }
        Ok(TransitionMatrix {
            schema,
            entries,
            period_months,
            needs_rescaling,
        })
    }

    pub fn schema(&self) -> &RatingSchema {
        &self.schema
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Period covered by one application of the matrix, in months.
    pub fn period_months(&self) -> u32 {
        self.period_months
    }

    /// True when some row sum deviates from 1 by more than `1e-9` (set by
    /// the lenient constructor; cleared by rescaling).
    pub fn needs_rescaling(&self) -> bool {
        self.needs_rescaling
    }
}

/// A square matrix with (near-)zero row sums intended as a continuous-time
/// Markov generator. `valid` is true iff all off-diagonals are nonnegative
/// and row sums vanish within tolerance, i.e. `exp(tG)` is a proper TPM for
/// every `t >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorMatrix {
    schema: RatingSchema,
    entries: DMatrix<f64>,
    valid: bool,
}

impl GeneratorMatrix {
    /// Wraps entries as a generator, computing the validity flag.
    pub fn new(schema: RatingSchema, entries: DMatrix<f64>) -> Result<Self> {
        let n = schema.len();
        if entries.nrows() != n || entries.ncols() != n {
            return Err(Error::Validation(format!(
                "generator is {}x{} but schema has {} states",
                entries.nrows(),
                entries.ncols(),
                n
            )));
        }
        if entries.iter().any(|e| !e.is_finite()) {
            return Err(Error::Numerical("generator has non-finite entries".into()));
        }
        let valid = is_valid_generator(&entries);
        Ok(GeneratorMatrix {
            schema,
            entries,
            valid,
        })
    }

    pub fn schema(&self) -> &RatingSchema {
        &self.schema
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// True iff off-diagonals are nonnegative and row sums vanish.
    pub fn is_valid(&self) -> bool {
        self.valid
    }
}

pub(crate) fn is_valid_generator(entries: &DMatrix<f64>) -> bool {
    let n = entries.nrows();
    for i in 0..n {
        let mut sum = 0.0;
        for j in 0..n {
            if i != j && entries[(i, j)] < -1e-12 {
                return false;
            }
            sum += entries[(i, j)];
        }
        if sum.abs() > ROW_SUM_TOL {
            return false;
        }
    }
    true
}

/// The four matrix norms of the error-control toolkit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixNorm {
    /// Maximum absolute column sum.
    One,
    /// Spectral norm (largest singular value).
    Two,
    /// Maximum absolute row sum.
    Inf,
    /// Square root of the sum of squared entries.
    Frobenius,
}

/// Evaluates one of the four norms on a raw matrix.
pub fn norm(a: &DMatrix<f64>, which: MatrixNorm) -> f64 {
    match which {
        MatrixNorm::One => one_norm(a),
        MatrixNorm::Inf => inf_norm(a),
        MatrixNorm::Frobenius => a.iter().map(|x| x * x).sum::<f64>().sqrt(),
        MatrixNorm::Two => {
            // largest eigenvalue of AᵀA, which is symmetric PSD
            let ata = a.transpose() * a;
            let eigs = ata.symmetric_eigen().eigenvalues;
            eigs.iter().cloned().fold(0.0, f64::max).max(0.0).sqrt()
        }
    }
}

pub(crate) fn one_norm(a: &DMatrix<f64>) -> f64 {
    (0..a.ncols())
        .map(|j| a.column(j).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn inf_norm(a: &DMatrix<f64>) -> f64 {
    (0..a.nrows())
        .map(|i| a.row(i).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Principal matrix logarithm of a TPM, returned as a (possibly invalid)
/// generator scaled to annual rates (i.e. `exp(G · period/12)` recovers the
/// input when the period is 12 months; the entries are the log of the
/// matrix itself, unscaled).
///
/// # Errors
///
/// Fails when an eigenvalue lies on the closed negative real axis (no
/// principal logarithm exists) or when both the iteration and the
/// eigendecomposition fallback miss the `1e-13` reconstruction residual.
pub fn principal_log(tpm: &TransitionMatrix) -> Result<GeneratorMatrix> {
    let l = logm(&tpm.entries)?;
    GeneratorMatrix::new(tpm.schema.clone(), l)
}

/// `exp(scale · G)` as a transition matrix.
///
/// For a valid generator the result is row-stochastic with nonnegative
/// entries up to roundoff; tiny negative roundoff (> -1e-12) is clamped to
/// zero. The period is set to `round(12 · scale)` months.
pub fn matrix_exp(g: &GeneratorMatrix, scale: f64) -> Result<TransitionMatrix> {
    if !scale.is_finite() || scale <= 0.0 {
        return Err(Error::Validation(format!("scale must be positive, got {scale}")));
    }
    let mut e = expm(&(&g.entries * scale));
    if e.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical("matrix exponential overflowed".into()));
    }
    for x in e.iter_mut() {
        if *x < 0.0 && *x > -1e-12 {
            *x = 0.0;
        }
    }
    let period = (12.0 * scale).round().max(1.0) as u32;
    TransitionMatrix::new_lenient(g.schema.clone(), e, period)
}

/// `tpm` raised to the `k`-th power by repeated multiplication.
pub fn matrix_power(tpm: &TransitionMatrix, k: u32) -> Result<TransitionMatrix> {
    if k == 0 {
        return Err(Error::Validation("matrix power requires k >= 1".into()));
    }
    let mut acc = tpm.entries.clone();
    for _ in 1..k {
        acc = &acc * &tpm.entries;
    }
    TransitionMatrix::new_lenient(
        tpm.schema.clone(),
        acc,
        tpm.period_months.saturating_mul(k),
    )
}

/// The raw `n`-th root `Y = exp(log(tpm)/n)`.
///
/// `Y` is not, in general, row-stochastic or nonnegative; it is returned as
/// a raw matrix for downstream projection (see the regularization module).
pub fn fractional_root(tpm: &TransitionMatrix, n: u32) -> Result<DMatrix<f64>> {
    if n == 0 {
        return Err(Error::Validation("root order must be >= 1".into()));
    }
    let l = logm(&tpm.entries)?;
    Ok(expm(&(l / f64::from(n))))
}

// ---------------------------------------------------------------------------
// dense kernels
// ---------------------------------------------------------------------------

/// Scaling-and-squaring matrix exponential with the order-13 diagonal Padé
/// approximant.
pub(crate) fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    const THETA_13: f64 = 5.371_920_351_148_152;
    #[rustfmt::skip]
    const B: [f64; 14] = [
        64_764_752_532_480_000.0, 32_382_376_266_240_000.0, 7_771_770_303_897_600.0,
        1_187_353_796_428_800.0, 129_060_195_264_000.0, 10_559_470_521_600.0,
        670_442_572_800.0, 33_522_128_640.0, 1_323_241_920.0, 40_840_800.0,
        960_960.0, 16_380.0, 182.0, 1.0,
    ];
    let n = a.nrows();
    let norm = one_norm(a);
    let s = if norm > THETA_13 {
        (norm / THETA_13).log2().ceil() as i32
    } else {
        0
    };
    let a = a / 2f64.powi(s);
    let id = DMatrix::<f64>::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a2 * &a4;
    let u = &a
        * (&a6 * (&a6 * B[13] + &a4 * B[11] + &a2 * B[9])
            + &a6 * B[7]
            + &a4 * B[5]
            + &a2 * B[3]
            + &id * B[1]);
    let v = &a6 * (&a6 * B[12] + &a4 * B[10] + &a2 * B[8])
        + &a6 * B[6]
        + &a4 * B[4]
        + &a2 * B[2]
        + &id * B[0];
    let mut x = (&v - &u)
        .lu()
        .solve(&(&v + &u))
        .expect("Pade denominator is singular");
    for _ in 0..s {
        x = &x * &x;
    }
    x
}

/// Principal matrix logarithm; see module docs for the algorithm.
pub(crate) fn logm(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical("matrix log of non-finite input".into()));
    }
    // principal-branch precheck on the spectrum
    let eigs = a.clone().complex_eigenvalues();
    for lam in eigs.iter() {
        if lam.re <= 0.0 && lam.im.abs() <= 1e-14 {
            return Err(Error::Numerical(format!(
                "no principal logarithm: eigenvalue {lam} lies on the closed negative real axis"
            )));
        }
    }
    let id = DMatrix::<f64>::identity(n, n);
    let norm_a = one_norm(a).max(1.0);

    let primary = logm_issq(a, &id);
    if let Ok(l) = &primary {
        let residual = one_norm(&(expm(l) - a));
        if residual <= 1e-13 * norm_a {
            return primary;
        }
    }
    // fallback: complex eigendecomposition, guarded by the same residual
    let l = logm_eig(a, &eigs)?;
    let residual = one_norm(&(expm(&l) - a));
    if residual <= 1e-13 * norm_a {
        Ok(l)
    } else {
        Err(Error::Numerical(format!(
            "matrix log failed: reconstruction residual {residual:.3e} exceeds 1e-13 * ||A||"
        )))
    }
}

/// Inverse scaling-and-squaring: square-root until close to the identity,
/// then evaluate the diagonal Padé approximant of `log(I + X)`.
fn logm_issq(a: &DMatrix<f64>, id: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut t = a.clone();
    let mut k = 0u32;
    while one_norm(&(&t - id)) > 0.25 {
        if k >= 40 {
            return Err(Error::Numerical(
                "matrix log: square-root recursion did not contract".into(),
            ));
        }
        t = sqrtm_db(&t, id)?;
        k += 1;
    }
    let x = &t - id;
    Ok(log_pade(&x, id)? * 2f64.powi(k as i32))
}

/// Denman–Beavers iteration for the principal matrix square root.
fn sqrtm_db(a: &DMatrix<f64>, id: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut x = a.clone();
    let mut y = id.clone();
    for _ in 0..60 {
        let xi = x.clone().try_inverse().ok_or_else(|| {
            Error::Numerical("matrix square root: singular iterate".into())
        })?;
        let yi = y.clone().try_inverse().ok_or_else(|| {
            Error::Numerical("matrix square root: singular iterate".into())
        })?;
        let x_next = (&x + &yi) * 0.5;
        let y_next = (&y + &xi) * 0.5;
        let delta = one_norm(&(&x_next - &x));
        x = x_next;
        y = y_next;
        if delta <= 1e-15 * one_norm(&x).max(1.0) {
            return Ok(x);
        }
    }
    // accept if the defining identity holds to high accuracy anyway
    let residual = one_norm(&(&x * &x - a));
    if residual <= 1e-12 * one_norm(a).max(1.0) {
        Ok(x)
    } else {
        Err(Error::Numerical(format!(
            "matrix square root did not converge (residual {residual:.3e})"
        )))
    }
}

/// Diagonal Padé approximant of `log(I + X)` via the Gauss–Legendre
/// quadrature form `sum_i w_i X (I + t_i X)^{-1}` (exact for the [m/m]
/// Padé approximant with m nodes).
fn log_pade(x: &DMatrix<f64>, id: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (nodes, weights) = gauss_legendre_01(8);
    let mut acc = DMatrix::<f64>::zeros(x.nrows(), x.ncols());
    for (t, w) in nodes.iter().zip(weights.iter()) {
        let denom = id + x * *t;
        let term = denom.lu().solve(x).ok_or_else(|| {
            Error::Numerical("matrix log: Pade denominator is singular".into())
        })?;
        acc += term * *w;
    }
    Ok(acc)
}

/// Gauss–Legendre nodes and weights on [0, 1], computed by Newton iteration
/// on the Legendre polynomial (avoids hard-coded constants).
fn gauss_legendre_01(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = Vec::with_capacity(m);
    let mut weights = Vec::with_capacity(m);
    for i in 0..m {
        // Chebyshev-like initial guess for the i-th root of P_m
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(m, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes.push(0.5 * (x + 1.0));
        weights.push(0.5 * w);
    }
    (nodes, weights)
}

/// Legendre polynomial `P_m(x)` and its derivative via the three-term
/// recurrence.
fn legendre(m: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=m {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Fallback principal log via complex eigendecomposition. Eigenvectors are
/// recovered by inverse iteration at slightly perturbed shifts; imaginary
/// residue in the final matrix must stay below 1e-10 or the result is
/// rejected (guards against silently wrong real parts).
fn logm_eig(a: &DMatrix<f64>, eigs: &DVector<Complex<f64>>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let ac = a.map(|x| Complex::new(x, 0.0));
    let mut v = DMatrix::<Complex<f64>>::zeros(n, n);
    for (j, lam) in eigs.iter().enumerate() {
        let shift = lam + Complex::new(1e-10 * (1.0 + lam.norm()), 1e-12);
        let shifted = &ac - DMatrix::<Complex<f64>>::identity(n, n) * shift;
        let lu = shifted.lu();
        let mut x = DVector::<Complex<f64>>::from_fn(n, |i, _| {
            Complex::new(1.0 + (i as f64 + 1.0) * 0.01, 0.0)
        });
        for _ in 0..4 {
            x = lu
                .solve(&x)
                .ok_or_else(|| Error::Numerical("eigenvector solve failed".into()))?;
            let nrm = x.norm();
            if nrm == 0.0 || !nrm.is_finite() {
                return Err(Error::Numerical("eigenvector iteration degenerated".into()));
            }
            x /= Complex::new(nrm, 0.0);
        }
        v.set_column(j, &x);
    }
    let d = DMatrix::<Complex<f64>>::from_diagonal(&eigs.map(|l| l.ln()));
    let vinv = v.clone().try_inverse().ok_or_else(|| {
        Error::Numerical("eigenvector matrix is singular (defective input?)".into())
    })?;
    let l = &v * d * vinv;
    let max_im = l.iter().map(|c| c.im.abs()).fold(0.0, f64::max);
    if max_im > 1e-10 {
        return Err(Error::Numerical(format!(
            "matrix log: imaginary residue {max_im:.3e} exceeds 1e-10"
        )));
    }
    Ok(l.map(|c| c.re))
}
