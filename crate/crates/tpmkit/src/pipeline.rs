//! End-to-end orchestration: load an annual TPM, merge PDs, absorb a
//! near-default state, rescale, build the sub-period TPM by the chosen
//! route, reconstruct the annual matrix, and write audit artifacts.
//!
//! Stage order is fixed: override before absorption, rescale after, route
//! last. All outputs are computed before anything is written, and each
//! file lands via a temp-file rename, so a failing run leaves no partial
//! artifacts.

use std::path::{Path, PathBuf};

use crate::cli_io::{read_matrix_file, read_pd_vector, render_matrix, write_tpm};
use crate::error_control::{compare, ComparisonReport};
use crate::jlt_calibration::{calibrate_jlt, JltResult, DEFAULT_TOL};
use crate::matrix_core::{matrix_power, TransitionMatrix};
use crate::pd_policy::{apply_pd_override, rescale_rows, PdOverridePolicy, RescaleMethod};
use crate::rating_schema::absorb_state;
use crate::regularization::{qom_subperiod_tpm, subperiod_tpm, RegularizationReport};
use crate::{Error, Result};

/// Which PD override to apply before absorption.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PdPolicyChoice {
    /// Keep the observed default column.
    #[default]
    None,
    /// Default column floored at the source PDs.
    Floor,
    /// Default column replaced by the source PDs.
    Replace,
}

/// How the sub-period matrix is produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Route {
    /// Regularized-generator exponential.
    #[default]
    Generator,
    /// Matrix root with row-wise simplex projection.
    Qom,
    /// Diagonal generator scaling calibrated to target PDs.
    Jlt,
}

/// Inputs for [`run_pipeline`]; file references rather than loaded data so
/// the CLI and library share one entry point.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    /// Label used in report headers and artifact metadata.
    pub sector: String,
    /// Annual TPM file (CSV matrix format).
    pub input: PathBuf,
    pub pd_policy: PdPolicyChoice,
    /// PD vector JSON; required unless the policy is `None`.
    pub pd_source: Option<PathBuf>,
    /// Rating label to collapse into default before rescaling.
    pub absorb: Option<String>,
    pub rescale: RescaleMethod,
    pub route: Route,
    /// Target PD vector JSON; required by the JLT route.
    pub jlt_target: Option<PathBuf>,
    /// 12 for monthly, 4 for quarterly.
    pub periods_per_year: u32,
    /// Directory receiving the artifact files (created if missing).
    pub output_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            sector: "portfolio".into(),
            input: PathBuf::new(),
            pd_policy: PdPolicyChoice::None,
            pd_source: None,
            absorb: None,
            rescale: RescaleMethod::Diagonal,
            route: Route::Generator,
            jlt_target: None,
            periods_per_year: 12,
            output_dir: PathBuf::from("."),
        }
    }
}

/// Everything a pipeline run produces.
#[derive(Debug)]
pub struct PipelineOutcome {
    /// The post-override, post-absorption, post-rescale annual TPM all
    /// routes start from.
    pub annual: TransitionMatrix,
    /// The sub-period TPM of the chosen route.
    pub subperiod: TransitionMatrix,
    /// subperiod ^ periods_per_year.
    pub reconstructed_annual: TransitionMatrix,
    /// Reconstructed-vs-annual difference tables and norms.
    pub comparison: ComparisonReport,
    /// Generator audit; `None` on the QOM route, which has no generator.
    pub regularization: Option<RegularizationReport>,
    /// Calibration detail when the JLT route ran.
    pub jlt: Option<JltResult>,
}

/// Runs the full construction. See the module docs for stage order.
pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineOutcome> {
    if !matches!(config.periods_per_year, 4 | 12) {
        return Err(Error::Validation(format!(
            "periods_per_year must be 4 or 12, got {}",
            config.periods_per_year
        )));
    }

    let input = read_matrix_file(&config.input)?.into_tpm(&config.sector, 12)?;

    let policy = match config.pd_policy {
        PdPolicyChoice::None => PdOverridePolicy::None,
        choice => {
            let path = config.pd_source.as_ref().ok_or_else(|| {
                Error::Validation("this PD policy needs a PD vector file".into())
            })?;
            let vector = read_pd_vector(path)?;
            match choice {
                PdPolicyChoice::Floor => PdOverridePolicy::Floor(vector),
                PdPolicyChoice::Replace => PdOverridePolicy::Replace(vector),
                PdPolicyChoice::None => unreachable!(),
            }
        }
    };
    let overridden = apply_pd_override(&input, &policy)?;

    let absorbed = match &config.absorb {
        Some(label) => absorb_state(&overridden, label)?,
        None => overridden,
    };
    let annual = rescale_rows(&absorbed, config.rescale)?;

    let ppm = 12 / config.periods_per_year; // months per sub-period
    let (subperiod, regularization, jlt) = match config.route {
        Route::Generator => {
            let (sub, report) = subperiod_tpm(&annual, config.periods_per_year)?;
            (sub, Some(report), None)
        }
        Route::Qom => (qom_subperiod_tpm(&annual, config.periods_per_year)?, None, None),
        Route::Jlt => {
            let path = config.jlt_target.as_ref().ok_or_else(|| {
                Error::Validation("the JLT route needs a target PD vector file".into())
            })?;
            let target = read_pd_vector(path)?;
            let result = calibrate_jlt(&annual, &target, DEFAULT_TOL)?;
            let sub = match config.periods_per_year {
                12 => result.calibrated_monthly.clone(),
                4 => matrix_power(&result.calibrated_monthly, 3)?,
                _ => unreachable!(),
            };
            (sub, None, Some(result))
        }
    };
    debug_assert_eq!(subperiod.period_months(), ppm);

    let reconstructed_annual = matrix_power(&subperiod, config.periods_per_year)?;
    let comparison = compare(&reconstructed_annual, &annual)?;

    let outcome = PipelineOutcome {
        annual,
        subperiod,
        reconstructed_annual,
        comparison,
        regularization,
        jlt,
    };
    write_artifacts(config, &outcome)?;
    Ok(outcome)
}

fn write_artifacts(config: &PipelineConfig, out: &PipelineOutcome) -> Result<()> {
    let dir = &config.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;

    write_tpm(dir.join("annual_rescaled.csv"), &out.annual)?;
    write_tpm(dir.join("subperiod.csv"), &out.subperiod)?;
    write_tpm(dir.join("annual_reconstructed.csv"), &out.reconstructed_annual)?;

    let labels = out.annual.schema().labels();
    atomic_write(
        &dir.join("comparison_absolute_diff.csv"),
        &render_matrix(labels, &out.comparison.absolute_diff, None),
    )?;
    let norms = serde_json::to_string_pretty(&out.comparison.norms).expect("serializable");
    atomic_write(&dir.join("norms.json"), &norms)?;
    if let Some(report) = &out.regularization {
        let body = serde_json::to_string_pretty(report).expect("serializable");
        atomic_write(&dir.join("regularization.json"), &body)?;
    }
    if let Some(result) = &out.jlt {
        let body = serde_json::to_string_pretty(&result.summary()).expect("serializable");
        atomic_write(&dir.join("jlt.json"), &body)?;
    }
    Ok(())
}

/// Writes via a sibling temp file and rename, so readers never observe a
/// half-written artifact.
pub(crate) fn atomic_write(path: &Path, content: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, content).map_err(|e| Error::io(tmp.display().to_string(), e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path.display().to_string(), e))
}
