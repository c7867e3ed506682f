//! Command-line front end for the transition-matrix toolkit.
//!
//! Exit codes: 0 on success, 2 on validation/parse/IO errors, 3 on
//! numerical errors (non-convergence, non-finite results).

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use tpmkit::cli_io::{
    format_decimal, read_matrix_file, read_pd_vector, render_matrix, write_tpm,
};
use tpmkit::error_control::compare;
use tpmkit::jlt_calibration::calibrate_jlt;
use tpmkit::matrix_core::{principal_log, TransitionMatrix};
use tpmkit::migration_stats::{migration_direction, MigrationKind};
use tpmkit::pd_policy::RescaleMethod;
use tpmkit::pipeline::{run_pipeline, PdPolicyChoice, PipelineConfig, Route};
use tpmkit::portfolio_sim::{
    implied_correlation, percentile, simulate_pool, SimulationConfig, SimulationMode,
    SimulationResult,
};
use tpmkit::regularization::{qom_subperiod_tpm, regularize_generator, subperiod_tpm};
use tpmkit::{Error, Result};

#[derive(Parser)]
#[command(
    name = "tpmkit",
    version,
    about = "Credit-rating transition-matrix toolkit",
    long_about = "Builds monthly/quarterly transition matrices from annual ones via \
generator regularization, matrix roots with simplex projection, or PD-calibrated \
generator scaling, and validates them with a one-factor portfolio simulator."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full construction pipeline and write its artifact files
    Build(BuildArgs),
    /// Compute the raw and regularized generators of an annual matrix
    Generator(GeneratorArgs),
    /// Produce a sub-period matrix via the regularized generator
    Subperiod(SubperiodArgs),
    /// Produce a sub-period matrix via the matrix root with row projection
    Qom(SubperiodArgs),
    /// Calibrate row scalings of the generator to target default rates
    Jlt(JltArgs),
    /// Difference two matrices and report error norms
    Compare(CompareArgs),
    /// Monte Carlo portfolio migration simulation
    Simulate(SimulateArgs),
    /// Migration-direction statistics of a transition matrix
    Stats(StatsArgs),
    /// Back out the one-factor correlation from an observed tail default rate
    ImpliedCorr(ImpliedCorrArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum PdPolicyArg {
    /// Keep the observed default column
    None,
    /// Floor the default column at the supplied PDs
    Floor,
    /// Replace the default column with the supplied PDs
    Replace,
}

#[derive(Clone, Copy, ValueEnum)]
enum RescaleArg {
    /// Absorb the excess on the diagonal
    Diagonal,
    /// Scale non-default entries proportionally
    Proportional,
}

#[derive(Clone, Copy, ValueEnum)]
enum RouteArg {
    /// Regularized-generator exponential
    Generator,
    /// Matrix root with row-wise simplex projection
    Qom,
    /// Generator row scaling calibrated to target PDs
    Jlt,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    /// Single draw against the compounded horizon matrix
    DirectJump,
    /// One draw per sub-period step
    MultiStep,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    /// Migration direction among survivors
    Md,
    /// Direction normalized by migrated survivor mass
    Nmd,
    /// Total migration direction including default
    Tmd,
    /// Direction normalized by total migrated mass
    Ntmd,
    /// Total migration rate (off-diagonal mass)
    Tmr,
}

#[derive(Args)]
struct BuildArgs {
    /// Annual transition matrix CSV
    input: PathBuf,
    /// Label used in artifact metadata
    #[arg(long, default_value = "portfolio")]
    sector: String,
    /// PD override applied to the default column
    #[arg(long, value_enum, default_value = "none")]
    pd_policy: PdPolicyArg,
    /// PD vector JSON ({"RATING": pd, ...}); required unless the policy is none
    #[arg(long)]
    pd_source: Option<PathBuf>,
    /// Rating label to collapse into default before rescaling
    #[arg(long)]
    absorb: Option<String>,
    /// How rows are renormalized after overrides
    #[arg(long, value_enum, default_value = "diagonal")]
    rescale: RescaleArg,
    /// Sub-period construction route
    #[arg(long, value_enum, default_value = "generator")]
    route: RouteArg,
    /// Target PD vector JSON; required by the jlt route
    #[arg(long)]
    jlt_target: Option<PathBuf>,
    /// 12 for monthly, 4 for quarterly
    #[arg(long, default_value_t = 12)]
    periods_per_year: u32,
    /// Directory receiving the artifact files
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct GeneratorArgs {
    /// Annual transition matrix CSV
    input: PathBuf,
    /// Directory receiving raw_generator.csv, regularized_generator.csv,
    /// and regularization.json
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct SubperiodArgs {
    /// Annual transition matrix CSV
    input: PathBuf,
    /// 12 for monthly, 4 for quarterly
    #[arg(long, default_value_t = 12)]
    periods_per_year: u32,
    /// Output CSV path; prints to stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct JltArgs {
    /// Annual transition matrix CSV
    input: PathBuf,
    /// Target PD vector JSON ({"RATING": pd, ...})
    #[arg(long)]
    target: PathBuf,
    /// Calibration tolerance on the PD residual
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Directory receiving jlt_annual.csv, jlt_monthly.csv, and jlt.json
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    /// Left-hand matrix CSV
    a: PathBuf,
    /// Right-hand matrix CSV
    b: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    /// Transition matrix CSV governing one simulation step
    #[arg(long)]
    tpm: PathBuf,
    /// Initial rating of every pool entity
    #[arg(long)]
    rating: String,
    /// Number of entities in the pool
    #[arg(long, default_value_t = 100)]
    pool: usize,
    /// Number of steps to the horizon
    #[arg(long, default_value_t = 12)]
    horizon: u32,
    #[arg(long, value_enum, default_value = "multi-step")]
    mode: ModeArg,
    #[arg(long, default_value_t = 10_000)]
    scenarios: usize,
    /// Base RNG seed; results are reproducible per (seed, scenario)
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Factor loading beta (asset correlation is beta^2)
    #[arg(long, default_value_t = 0.0)]
    beta: f64,
    /// Worker threads; defaults to the number of cores
    #[arg(long)]
    threads: Option<usize>,
    /// Directory receiving scenarios.csv and summary.json
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct StatsArgs {
    /// Transition matrix CSV
    input: PathBuf,
    #[arg(long, value_enum, default_value = "tmd")]
    kind: KindArg,
    /// Restrict output to one rating; all non-default rows when omitted
    #[arg(long)]
    rating: Option<String>,
}

#[derive(Args)]
struct ImpliedCorrArgs {
    /// Unconditional (through-the-cycle) PD
    #[arg(long)]
    pd: f64,
    /// Observed default rate at the stress quantile
    #[arg(long)]
    df: f64,
    /// Stress quantile, e.g. 0.98
    #[arg(long)]
    q: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Build(a) => cmd_build(a),
        Command::Generator(a) => cmd_generator(a),
        Command::Subperiod(a) => cmd_subperiod(a, false),
        Command::Qom(a) => cmd_subperiod(a, true),
        Command::Jlt(a) => cmd_jlt(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Stats(a) => cmd_stats(a),
        Command::ImpliedCorr(a) => cmd_implied_corr(a),
    }
}

fn load_tpm(path: &PathBuf) -> Result<TransitionMatrix> {
    let scheme = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "matrix".into());
    read_matrix_file(path)?.into_tpm(&scheme, 12)
}

fn write_text(path: &PathBuf, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

fn ensure_dir(dir: &PathBuf) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.display().to_string(),
        source: e,
    })
}

fn cmd_build(a: BuildArgs) -> Result<()> {
    let config = PipelineConfig {
        sector: a.sector,
        input: a.input,
        pd_policy: match a.pd_policy {
            PdPolicyArg::None => PdPolicyChoice::None,
            PdPolicyArg::Floor => PdPolicyChoice::Floor,
            PdPolicyArg::Replace => PdPolicyChoice::Replace,
        },
        pd_source: a.pd_source,
        absorb: a.absorb,
        rescale: match a.rescale {
            RescaleArg::Diagonal => RescaleMethod::Diagonal,
            RescaleArg::Proportional => RescaleMethod::Proportional,
        },
        route: match a.route {
            RouteArg::Generator => Route::Generator,
            RouteArg::Qom => Route::Qom,
            RouteArg::Jlt => Route::Jlt,
        },
        jlt_target: a.jlt_target,
        periods_per_year: a.periods_per_year,
        output_dir: a.out.clone(),
    };
    let outcome = run_pipeline(&config)?;
    println!(
        "wrote pipeline artifacts to {} (reconstruction Frobenius error {:.6e})",
        a.out.display(),
        outcome.comparison.norms.frobenius
    );
    Ok(())
}

fn cmd_generator(a: GeneratorArgs) -> Result<()> {
    let tpm = load_tpm(&a.input)?;
    let raw = principal_log(&tpm)?;
    let (reg, report) = regularize_generator(&raw)?;
    ensure_dir(&a.out)?;
    let labels = tpm.schema().labels();
    write_text(
        &a.out.join("raw_generator.csv"),
        &render_matrix(labels, raw.entries(), None),
    )?;
    write_text(
        &a.out.join("regularized_generator.csv"),
        &render_matrix(labels, reg.entries(), None),
    )?;
    let audit = serde_json::to_string_pretty(&report).expect("report serializes");
    write_text(&a.out.join("regularization.json"), &audit)?;
    println!(
        "raw generator valid: {}; floored entries: {}; wrote artifacts to {}",
        raw.is_valid(),
        report.zeroed_entries.len(),
        a.out.display()
    );
    Ok(())
}

fn cmd_subperiod(a: SubperiodArgs, qom: bool) -> Result<()> {
    let tpm = load_tpm(&a.input)?;
    let sub = if qom {
        qom_subperiod_tpm(&tpm, a.periods_per_year)?
    } else {
        subperiod_tpm(&tpm, a.periods_per_year)?.0
    };
    match a.out {
        Some(path) => {
            write_tpm(&path, &sub)?;
            println!("wrote {}", path.display());
        }
        None => print!(
            "{}",
            render_matrix(sub.schema().labels(), sub.entries(), Some(sub.period_months()))
        ),
    }
    Ok(())
}

fn cmd_jlt(a: JltArgs) -> Result<()> {
    let tpm = load_tpm(&a.input)?;
    let target = read_pd_vector(&a.target)?;
    let result = calibrate_jlt(&tpm, &target, a.tol)?;
    ensure_dir(&a.out)?;
    write_tpm(&a.out.join("jlt_annual.csv"), &result.calibrated_annual)?;
    write_tpm(&a.out.join("jlt_monthly.csv"), &result.calibrated_monthly)?;
    let summary = serde_json::to_string_pretty(&result.summary()).expect("summary serializes");
    write_text(&a.out.join("jlt.json"), &summary)?;
    let max_residual = result
        .pd_discrepancy
        .iter()
        .fold(0.0f64, |m, r| m.max(r.abs()));
    println!(
        "calibrated {} row scalings, max PD residual {max_residual:.3e}; wrote artifacts to {}",
        result.mu.len(),
        a.out.display()
    );
    Ok(())
}

fn cmd_compare(a: CompareArgs) -> Result<()> {
    // both sides share one scheme id so same-labelled files compare cleanly
    let lhs = read_matrix_file(&a.a)?.into_tpm("compare", 12)?;
    let rhs = read_matrix_file(&a.b)?.into_tpm("compare", 12)?;
    let report = compare(&lhs, &rhs)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&report.norms).expect("norms serialize")
    );
    Ok(())
}

#[derive(Serialize)]
struct SimulationSummary<'a> {
    tpm: String,
    rating: &'a str,
    pool_size: usize,
    horizon_steps: u32,
    mode: SimulationMode,
    scenarios: usize,
    seed: u64,
    beta: f64,
    mean_df: String,
    mean_tmd: String,
    mean_tmr: String,
    df_percentiles: BTreeMap<String, String>,
}

fn cmd_simulate(a: SimulateArgs) -> Result<()> {
    let tpm = load_tpm(&a.tpm)?;
    let mode = match a.mode {
        ModeArg::DirectJump => SimulationMode::DirectJump,
        ModeArg::MultiStep => SimulationMode::MultiStep,
    };
    let config = SimulationConfig {
        tpm,
        initial_rating: a.rating.clone(),
        pool_size: a.pool,
        horizon_steps: a.horizon,
        mode,
        scenarios: a.scenarios,
        base_seed: a.seed,
        beta: a.beta,
    };
    let result = match a.threads {
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| Error::Validation(format!("thread pool: {e}")))?;
            pool.install(|| simulate_pool(&config))?
        }
        None => simulate_pool(&config)?,
    };
    ensure_dir(&a.out)?;
    write_text(&a.out.join("scenarios.csv"), &render_scenarios(&result))?;
    let mut df_percentiles = BTreeMap::new();
    for q in [0.99, 0.999, 0.9995] {
        df_percentiles.insert(
            format!("{:.2}", q * 100.0),
            format_decimal(percentile(&result.df, q)?),
        );
    }
    let summary = SimulationSummary {
        tpm: a.tpm.display().to_string(),
        rating: &a.rating,
        pool_size: a.pool,
        horizon_steps: a.horizon,
        mode,
        scenarios: a.scenarios,
        seed: a.seed,
        beta: a.beta,
        mean_df: format_decimal(result.mean_df()),
        mean_tmd: format_decimal(result.mean_tmd()),
        mean_tmr: format_decimal(result.mean_tmr()),
        df_percentiles,
    };
    write_text(
        &a.out.join("summary.json"),
        &serde_json::to_string_pretty(&summary).expect("summary serializes"),
    )?;
    println!(
        "simulated {} scenarios; mean DF {}; wrote results to {}",
        a.scenarios,
        format_decimal(result.mean_df()),
        a.out.display()
    );
    Ok(())
}

fn render_scenarios(result: &SimulationResult) -> String {
    let mut out = String::from("scenario,df,tmd,tmr\n");
    for (s, ((df, tmd), tmr)) in result
        .df
        .iter()
        .zip(&result.tmd)
        .zip(&result.tmr)
        .enumerate()
    {
        out.push_str(&format!(
            "{s},{},{},{}\n",
            format_decimal(*df),
            format_decimal(*tmd),
            format_decimal(*tmr)
        ));
    }
    out
}

fn cmd_stats(a: StatsArgs) -> Result<()> {
    let tpm = load_tpm(&a.input)?;
    let kind = match a.kind {
        KindArg::Md => MigrationKind::Md,
        KindArg::Nmd => MigrationKind::Nmd,
        KindArg::Tmd => MigrationKind::Tmd,
        KindArg::Ntmd => MigrationKind::Ntmd,
        KindArg::Tmr => MigrationKind::Tmr,
    };
    let schema = tpm.schema().clone();
    let rows: Vec<usize> = match &a.rating {
        Some(r) => vec![schema
            .index_of(r)
            .ok_or_else(|| Error::Validation(format!("unknown rating {r:?}")))?],
        None => (0..schema.len()).filter(|&i| i != schema.default_index()).collect(),
    };
    for i in rows {
        let value = migration_direction(&tpm, i, kind)?;
        println!("{},{}", schema.labels()[i], format_decimal(value));
    }
    Ok(())
}

fn cmd_implied_corr(a: ImpliedCorrArgs) -> Result<()> {
    let (beta, rho) = implied_correlation(a.pd, a.df, a.q)?;
    println!("beta,{}", format_decimal(beta));
    println!("rho,{}", format_decimal(rho));
    Ok(())
}
