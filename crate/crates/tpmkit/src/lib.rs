//! Credit-rating transition-matrix toolkit.
//!
//! Builds monthly/quarterly transition probability matrices (TPMs) that are
//! consistent with bank-supplied annual default probabilities, and validates
//! them with a one-factor Monte Carlo portfolio simulator and a
//! migration-statistics suite.
//!
//! The core workflow:
//!
//! 1. load an observed annual TPM ([`cli_io`]),
//! 2. override its default column with Basel PDs ([`pd_policy`]),
//! 3. absorb the CCC state into default and rescale ([`rating_schema`],
//!    [`pd_policy`]),
//! 4. take the principal matrix logarithm ([`matrix_core`]) and repair it
//!    into a valid Markov generator ([`regularization`]),
//! 5. exponentiate to the sub-period TPM, or project the matrix root onto
//!    the probability simplex (QOM), or calibrate a diagonal generator
//!    scaling to target PDs ([`jlt_calibration`]),
//! 6. quantify reconstruction error ([`error_control`]) and simulate
//!    portfolio migrations ([`portfolio_sim`], [`migration_stats`]).
//!
//! The [`pipeline`] module wires these stages together and the `tpmkit`
//! binary exposes them as subcommands.
//!
//! # Example
//!
//! ```
//! use tpmkit::pipeline::{PipelineConfig, PdPolicyChoice, Route, run_pipeline};
//!
//! let fixtures = concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures");
//! let dir = tempfile::tempdir().unwrap();
//! let config = PipelineConfig {
//!     input: format!("{fixtures}/inputs/financial_annual_8state.csv").into(),
//!     pd_policy: PdPolicyChoice::Floor,
//!     pd_source: Some(format!("{fixtures}/pd/financial_basel_pd.json").into()),
//!     absorb: Some("CCC".into()),
//!     route: Route::Generator,
//!     periods_per_year: 12,
//!     output_dir: dir.path().to_path_buf(),
//!     ..PipelineConfig::default()
//! };
//! let outcome = run_pipeline(&config).unwrap();
//! let monthly = &outcome.subperiod;
//! assert_eq!(monthly.period_months(), 1);
//! assert!((monthly.entries()[(0, 0)] - 0.989339).abs() < 1e-6);
//! ```

pub mod cli_io;
pub mod error_control;
pub mod jlt_calibration;
pub mod matrix_core;
pub mod migration_stats;
pub mod pd_policy;
pub mod pipeline;
pub mod portfolio_sim;
pub mod rating_schema;
pub mod regularization;

mod error;

pub use error::{Error, Result};
