//! Report files: byte-identical reruns, resuming after an interrupted run,
//! and aggregates recomputed from the persisted per-UE dump.

use std::fs;
use std::path::Path;

use mmshare::harness::{
    read_report, read_summary, read_ue_dump, run_experiment, summarize_all, ExperimentGrid, Preset, RunOptions,
    REPORT_FILE, SIDECAR_FILE, SUMMARY_FILE, TIMING_FILE, UES_FILE,
};
use mmshare::ScenarioConfig;

const GRID: &str = "area_side = 150\n\
                    n_fading_samples = 3\n\
                    n_bs_antennas = 16\n\
                    n_ue_antennas = 4\n\
                    sweep.problem = p1, p3, rssi\n\
                    sweep.sharing_mode = exclusive, full\n";

fn grid() -> ExperimentGrid {
    ExperimentGrid::from_kv_str(GRID, Path::new("grid.cfg"), Preset::Desk).unwrap()
}

fn opts(out: &Path, seeds: usize) -> RunOptions {
    RunOptions {
        out: out.to_path_buf(),
        seeds: Some(seeds),
        jobs: 2,
        quiet: true,
    }
}

fn files(dir: &Path) -> Vec<Vec<u8>> {
    [REPORT_FILE, UES_FILE, SUMMARY_FILE, SIDECAR_FILE]
        .iter()
        .map(|f| fs::read(dir.join(f)).unwrap())
        .collect()
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let ra = run_experiment(&grid(), &opts(&a, 2)).unwrap();
    run_experiment(&grid(), &opts(&b, 2)).unwrap();
    assert!(ra.all_ok());
    // p1/exclusive is dropped, p3 collapses to one cell.
    assert_eq!(ra.cells.len(), 4);
    assert_eq!(ra.rows.len(), 8);
    assert_eq!(files(&a), files(&b));

    let one = tmp.path().join("one");
    run_experiment(&grid(), &opts(&one, 1)).unwrap();
    let again = tmp.path().join("again");
    run_experiment(&grid(), &opts(&again, 1)).unwrap();
    assert_eq!(files(&one), files(&again));
}

#[test]
fn interrupted_run_resumes_to_the_same_files() {
    let tmp = tempfile::tempdir().unwrap();
    let full = tmp.path().join("full");
    let part = tmp.path().join("part");
    run_experiment(&grid(), &opts(&full, 3)).unwrap();
    run_experiment(&grid(), &opts(&part, 3)).unwrap();

    // Drop the last three report rows and leave a half-written line.
    let report = fs::read_to_string(part.join(REPORT_FILE)).unwrap();
    let lines: Vec<&str> = report.lines().collect();
    let mut cut = lines[..lines.len() - 3].join("\n");
    cut.push('\n');
    cut.push_str(&lines[lines.len() - 1][..20]);
    fs::write(part.join(REPORT_FILE), cut).unwrap();
    fs::remove_file(part.join(SUMMARY_FILE)).unwrap();

    let res = run_experiment(&grid(), &opts(&part, 3)).unwrap();
    assert_eq!(res.executed, 3);
    assert_eq!(files(&full), files(&part));
    let timing = fs::read_to_string(part.join(TIMING_FILE)).unwrap();
    assert_eq!(timing.lines().count(), 1 + res.rows.len());
}

#[test]
fn summaries_from_dump_equal_in_run_aggregates() {
    let tmp = tempfile::tempdir().unwrap();
    let res = run_experiment(&grid(), &opts(tmp.path(), 2)).unwrap();
    let rows = read_report(tmp.path()).unwrap();
    let ues = read_ue_dump(tmp.path()).unwrap();
    assert_eq!(rows, res.rows);
    assert_eq!(ues, res.ues);
    assert_eq!(summarize_all(&rows, &ues), res.summaries);
    assert_eq!(read_summary(tmp.path()).unwrap(), res.summaries);
    for r in &rows {
        assert!(r.p5 <= r.p50 && r.p50 <= r.p95);
    }
    for s in &res.summaries {
        assert!(s.p5 <= s.p50 && s.p50 <= s.p95);
    }
}

#[test]
fn different_grid_in_same_directory_is_refused() {
    let tmp = tempfile::tempdir().unwrap();
    run_experiment(&grid(), &opts(tmp.path(), 1)).unwrap();
    assert!(run_experiment(&grid(), &opts(tmp.path(), 2)).is_err());
}

#[test]
fn default_cell_uses_six_rf_chains() {
    let g = ExperimentGrid::from_kv_str("", Path::new("g"), Preset::Desk).unwrap();
    let cells = g.cells().unwrap();
    assert_eq!(cells.len(), 1);
    assert_eq!(cells[0].config.n_rf_chains, 6);
    assert_eq!(cells[0].config.area_side, 500.0);
    assert_eq!(cells[0].config.n_topologies, 20);
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let scenario = ScenarioConfig::load(dir.join("scenario_default.cfg")).unwrap();
    assert_eq!(scenario, ScenarioConfig::default());
    for (f, preset) in [
        ("desk_analog.cfg", Preset::Desk),
        ("desk_digital.cfg", Preset::Desk),
        ("paper_analog.cfg", Preset::Paper),
    ] {
        let g = ExperimentGrid::load(dir.join(f), preset).unwrap();
        assert!(!g.cells().unwrap().is_empty(), "{f}");
    }
}
