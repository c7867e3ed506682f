//! End-to-end reconstruction of the financial-sector reference tables:
//! PD floor, CCC absorption, diagonal rescaling, generator extraction and
//! regularization, monthly TPM by both routes, round-trip error norms.

mod common;

use common::{assert_matches_cell, assert_matrix_matches, fixture, ExpectedTable};
use tpmkit::cli_io::{read_matrix_file, read_pd_vector};
use tpmkit::matrix_core::{matrix_power, norm, principal_log, MatrixNorm, TransitionMatrix};
use tpmkit::pd_policy::{apply_pd_override, rescale_rows, PdOverridePolicy, RescaleMethod};
use tpmkit::rating_schema::absorb_state;
use tpmkit::regularization::{qom_subperiod_tpm, regularize_generator, subperiod_tpm};

fn annual_input() -> TransitionMatrix {
    read_matrix_file(fixture("inputs/financial_annual_8state.csv"))
        .unwrap()
        .into_tpm("irc_agency_8state", 12)
        .unwrap()
}

fn floored_absorbed() -> TransitionMatrix {
    let pd = read_pd_vector(fixture("pd/financial_basel_pd.json")).unwrap();
    let floored = apply_pd_override(&annual_input(), &PdOverridePolicy::Floor(pd)).unwrap();
    absorb_state(&floored, "CCC").unwrap()
}

fn rescaled_annual() -> TransitionMatrix {
    rescale_rows(&floored_absorbed(), RescaleMethod::Diagonal).unwrap()
}

#[test]
fn pd_floor_matches_reference() {
    let pd = read_pd_vector(fixture("pd/financial_basel_pd.json")).unwrap();
    let floored = apply_pd_override(&annual_input(), &PdOverridePolicy::Floor(pd)).unwrap();
    assert!(floored.needs_rescaling());
    let expected = ExpectedTable::load("expected/financial/floored_8state.csv");
    assert_matrix_matches(floored.entries(), &expected, "floored 8-state");
}

#[test]
fn absorption_and_rescaling_match_reference() {
    let absorbed = floored_absorbed();
    assert_eq!(absorbed.schema().len(), 7);
    let expected = ExpectedTable::load("expected/financial/floored_absorbed.csv");
    assert_matrix_matches(absorbed.entries(), &expected, "floored absorbed");

    let rescaled = rescale_rows(&absorbed, RescaleMethod::Diagonal).unwrap();
    assert!(!rescaled.needs_rescaling());
    let expected = ExpectedTable::load("expected/financial/floored_rescaled.csv");
    assert_matrix_matches(rescaled.entries(), &expected, "floored rescaled");
}

#[test]
fn generator_and_regularization_match_reference() {
    let raw = principal_log(&rescaled_annual()).unwrap();
    assert!(!raw.is_valid(), "the raw log has negative off-diagonals");
    let expected = ExpectedTable::load("expected/financial/generator_raw.csv");
    assert_matrix_matches(raw.entries(), &expected, "raw generator");

    let (regular, report) = regularize_generator(&raw).unwrap();
    assert!(regular.is_valid());
    // eight entries are floored at zero in this matrix
    assert_eq!(report.zeroed_entries.len(), 8);
    let expected = ExpectedTable::load("expected/financial/generator_regularized.csv");
    assert_matrix_matches(regular.entries(), &expected, "regularized generator");
}

#[test]
fn monthly_tpm_generator_route_matches_reference() {
    let (monthly, _) = subperiod_tpm(&rescaled_annual(), 12).unwrap();
    assert_eq!(monthly.period_months(), 1);
    for rel in [
        "expected/financial/monthly_generator_route.csv",
        "expected/financial/monthly_generator_route_decimal.csv",
    ] {
        let expected = ExpectedTable::load(rel);
        assert_matrix_matches(monthly.entries(), &expected, rel);
    }
}

#[test]
fn roundtrip_error_and_norms_match_reference() {
    let annual = rescaled_annual();
    let (monthly, _) = subperiod_tpm(&annual, 12).unwrap();
    let reconstructed = matrix_power(&monthly, 12).unwrap();
    let diff = reconstructed.entries() - annual.entries();
    let expected = ExpectedTable::load("expected/financial/roundtrip_diff.csv");
    assert_matrix_matches(&diff, &expected, "round-trip difference");

    let norms = ExpectedTable::load("expected/norms_by_sector.csv");
    let col = norms.col("financial");
    for (row, which) in [
        ("one", MatrixNorm::One),
        ("two", MatrixNorm::Two),
        ("inf", MatrixNorm::Inf),
        ("frobenius", MatrixNorm::Frobenius),
    ] {
        let i = norms.row(row);
        assert_matches_cell(
            norm(&diff, which),
            &norms.cells[i][col],
            &format!("financial {row}-norm"),
        );
    }
}

#[test]
fn comparison_report_reproduces_reference_spot_values() {
    let annual = rescaled_annual();
    let (monthly, _) = subperiod_tpm(&annual, 12).unwrap();
    let reconstructed = matrix_power(&monthly, 12).unwrap();
    let report = tpmkit::error_control::compare(&reconstructed, &annual).unwrap();

    let aaa = annual.schema().index_of("AAA").unwrap();
    let a = annual.schema().index_of("A").unwrap();
    let aa = annual.schema().index_of("AA").unwrap();
    let bbb = annual.schema().index_of("BBB").unwrap();
    assert_matches_cell(report.absolute_diff[(aaa, aaa)], "-0.002616", "abs diff (AAA,AAA)");
    assert_matches_cell(report.absolute_diff[(aaa, a)], "0.005152", "abs diff (AAA,A)");
    // relative difference of 190% where the source entry is 0.08%
    assert_matches_cell(
        report.relative_diff[aa][bbb].unwrap(),
        "1.9000",
        "rel diff (AA,BBB)",
    );
    assert_matches_cell(report.norms.frobenius, "0.006853", "frobenius norm");
}

#[test]
fn qom_route_matches_reference() {
    let annual = rescaled_annual();
    let qom = qom_subperiod_tpm(&annual, 12).unwrap();
    let expected = ExpectedTable::load("expected/financial/qom_monthly.csv");
    assert_matrix_matches(qom.entries(), &expected, "QOM monthly");

    let (generator_monthly, _) = subperiod_tpm(&annual, 12).unwrap();
    let diff = generator_monthly.entries() - qom.entries();
    let expected = ExpectedTable::load("expected/financial/qom_vs_generator.csv");
    assert_matrix_matches(&diff, &expected, "generator-minus-QOM monthly");
}

#[test]
fn per_row_annual_errors_by_route_match_reference() {
    let annual = rescaled_annual();
    let (generator_monthly, _) = subperiod_tpm(&annual, 12).unwrap();
    let qom_monthly = qom_subperiod_tpm(&annual, 12).unwrap();
    let gen12 = matrix_power(&generator_monthly, 12).unwrap();
    let qom12 = matrix_power(&qom_monthly, 12).unwrap();

    let expected = ExpectedTable::load("expected/financial/route_error_row_sums.csv");
    let qom_col = expected.col("qom");
    let gen_col = expected.col("generator");
    for (i, label) in expected.row_labels.iter().enumerate() {
        let r = annual.schema().index_of(label).unwrap();
        let qom_err: f64 = (qom12.entries().row(r) - annual.entries().row(r))
            .iter()
            .map(|v| v.abs())
            .sum();
        let gen_err: f64 = (gen12.entries().row(r) - annual.entries().row(r))
            .iter()
            .map(|v| v.abs())
            .sum();
        assert_matches_cell(qom_err, &expected.cells[i][qom_col], &format!("{label} qom error"));
        assert_matches_cell(gen_err, &expected.cells[i][gen_col], &format!("{label} generator error"));
    }
}
