//! Historical-average migration statistics of the US industrial annual
//! matrix against the reference percentile tables' average rows.

mod common;

use common::{assert_matches_cell, fixture, ExpectedTable};
use tpmkit::cli_io::read_matrix_file;
use tpmkit::migration_stats::{migration_direction, MigrationKind};

#[test]
fn historical_averages_match_reference() {
    let tpm = read_matrix_file(fixture("inputs/us_industrial_annual.csv"))
        .unwrap()
        .into_tpm("us_industrial", 12)
        .unwrap();

    let tmd = ExpectedTable::load("expected/us_industrial_tmd_percentiles.csv");
    let tmr = ExpectedTable::load("expected/us_industrial_tmr_percentiles.csv");
    let tmd_row = tmd.row("historical_average");
    let tmr_row = tmr.row("historical_average");
    for (j, label) in tmd.labels.iter().enumerate() {
        let i = tpm.schema().index_of(label).unwrap();
        let got = migration_direction(&tpm, i, MigrationKind::Tmd).unwrap();
        assert_matches_cell(got, &tmd.cells[tmd_row][j], &format!("TMD({label})"));
        let got = migration_direction(&tpm, i, MigrationKind::Tmr).unwrap();
        assert_matches_cell(got, &tmr.cells[tmr_row][j], &format!("TMR({label})"));
    }
}
