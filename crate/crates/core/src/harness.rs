//! Experiment driver: grid files, the cell x seed Monte Carlo loop, CSV
//! reports, CCDFs and baseline comparisons.
//!
//! A grid file is a scenario file (see [`ScenarioConfig`]) plus
//!
//! ```text
//! problem = p1                       # used when `problem` is not swept
//! max_cells = 512
//! output = results/desk              # default for `--out`
//! sweep.n_bs_antennas = 16, 64, 256
//! sweep.problem = p1, p3
//! ```
//!
//! Sweepable keys are listed in [`SWEEP_KEYS`]. Antenna counts describe the
//! array at the lower band; cells at or above [`HIGH_BAND_HZ`] get twice as
//! many elements in both arrays, keeping the physical aperture.
//!
//! A run directory holds
//! - `report.csv`: one row per (cell, seed), columns [`report_columns`];
//! - `ues.csv`: per-UE rates and interference, columns [`UE_COLUMNS`];
//! - `summary.csv`: per-cell aggregates pooled over seeds, computed from
//!   `ues.csv`, columns [`summary_columns`];
//! - `timing.csv`: wall time and solver steps per (cell, seed);
//! - `report.json`: the resolved grid and every cell's scenario.
//!
//! Rows are appended as tasks finish, so an interrupted run resumes from the
//! seeds already on disk. All files are sorted by (cell, seed) once the run
//! completes, which makes them byte-identical across reruns.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::mpsc;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::association::{solve, ProblemId, ProblemSpec};
use crate::config::{parse_kv_lines, ScenarioConfig, SharingMode};
use crate::error::{Error, Result};
use crate::metrics::percentile;
use crate::network::Network;
use crate::seeding::trial_seed;

pub const SWEEP_KEYS: [&str; 7] = [
    "problem",
    "sharing_mode",
    "n_bs_antennas",
    "n_ue_antennas",
    "carrier_freq",
    "bs_density_per_operator",
    "ue_density_total",
];

pub const DEFAULT_MAX_CELLS: usize = 512;

/// Carriers at or above this frequency double both antenna counts.
pub const HIGH_BAND_HZ: f64 = 60e9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// 0.25 km^2, 20 topologies.
    Desk,
    /// 1 km^2, 100 topologies.
    Paper,
}

impl Preset {
    pub fn apply(self, cfg: &mut ScenarioConfig) {
        match self {
            Preset::Desk => {
                cfg.area_side = 500.0;
                cfg.n_topologies = 20;
            }
            Preset::Paper => {
                cfg.area_side = 1000.0;
                cfg.n_topologies = 100;
            }
        }
    }
}

impl FromStr for Preset {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "desk" => Ok(Preset::Desk),
            "paper" => Ok(Preset::Paper),
            other => Err(format!("unknown preset `{other}`")),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::Desk => "desk",
            Preset::Paper => "paper",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentGrid {
    pub preset: Preset,
    pub base: ScenarioConfig,
    pub problem: ProblemId,
    /// Swept keys in [`SWEEP_KEYS`] order with their raw values.
    pub sweeps: Vec<(String, Vec<String>)>,
    pub max_cells: usize,
    pub output_path: Option<PathBuf>,
}

/// One point of the grid, ready to simulate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cell {
    pub index: usize,
    pub id: String,
    pub spec: ProblemSpec,
    /// Scenario after antenna scaling and the problem's own settings.
    pub config: ScenarioConfig,
}

fn ghz(hz: f64) -> String {
    format!("{}", hz / 1e9)
}

fn cell_id(problem: ProblemId, cfg: &ScenarioConfig) -> String {
    format!(
        "{problem}-{}-nbs{}-nue{}-fc{}-bsd{}-ued{}",
        cfg.sharing_mode,
        cfg.n_bs_antennas,
        cfg.n_ue_antennas,
        ghz(cfg.carrier_freq),
        cfg.bs_density_per_operator,
        cfg.ue_density_total
    )
}

impl ExperimentGrid {
    pub fn new(base: ScenarioConfig, preset: Preset) -> Self {
        Self {
            preset,
            problem: ProblemId::from_config(&base),
            base,
            sweeps: Vec::new(),
            max_cells: DEFAULT_MAX_CELLS,
            output_path: None,
        }
    }

    /// Parses a grid file. The preset is applied before the file's own keys,
    /// which therefore win.
    pub fn from_kv_str(text: &str, path: &Path, preset: Preset) -> Result<Self> {
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let mut base = ScenarioConfig::default();
        preset.apply(&mut base);
        let mut problem = None;
        let mut sweeps: BTreeMap<usize, (String, Vec<String>)> = BTreeMap::new();
        let mut max_cells = DEFAULT_MAX_CELLS;
        let mut output_path = None;
        let mut deferred = Vec::new();
        for (line, k, v) in parse_kv_lines(text, path)? {
            let err = |msg: String| Error::Parse {
                path: path.to_path_buf(),
                line,
                msg,
            };
            if let Some(key) = k.strip_prefix("sweep.") {
                let pos = SWEEP_KEYS
                    .iter()
                    .position(|&s| s == key)
                    .ok_or_else(|| err(format!("`{key}` cannot be swept; sweepable: {}", SWEEP_KEYS.join(", "))))?;
                let values: Vec<String> = v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
                if values.is_empty() {
                    return Err(err(format!("sweep.{key} lists no values")));
                }
                deferred.push((line, key.to_string(), values.clone()));
                sweeps.insert(pos, (key.to_string(), values));
                continue;
            }
            match k.as_str() {
                "problem" => problem = Some(v.parse::<ProblemId>().map_err(err)?),
                "max_cells" => max_cells = v.parse().map_err(|e| err(format!("`{v}`: {e}")))?,
                "output" => output_path = Some(base_dir.join(&v)),
                _ => base.set(&k, &v, &base_dir).map_err(err)?,
            }
        }
        base.validate()?;
        for (line, key, values) in deferred {
            for v in values {
                let ok = if key == "problem" {
                    v.parse::<ProblemId>().map(|_| ())
                } else {
                    base.clone().set(&key, &v, &base_dir)
                };
                ok.map_err(|msg| Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    msg,
                })?;
            }
        }
        Ok(Self {
            preset,
            problem: problem.unwrap_or_else(|| ProblemId::from_config(&base)),
            base,
            sweeps: sweeps.into_values().collect(),
            max_cells,
            output_path,
        })
    }

    pub fn load(path: impl AsRef<Path>, preset: Preset) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        Self::from_kv_str(&text, path, preset)
    }

    /// Adds or replaces a sweep.
    pub fn sweep(mut self, key: &str, values: &[&str]) -> Result<Self> {
        let pos = SWEEP_KEYS
            .iter()
            .position(|&s| s == key)
            .ok_or_else(|| Error::InvalidConfig(format!("`{key}` cannot be swept")))?;
        self.sweeps.retain(|(k, _)| k != key);
        self.sweeps.push((key.to_string(), values.iter().map(|s| s.to_string()).collect()));
        self.sweeps
            .sort_by_key(|(k, _)| SWEEP_KEYS.iter().position(|s| s == k).unwrap_or(pos));
        Ok(self)
    }

    /// Size of the raw cross product, before invalid combinations are
    /// dropped.
    pub fn cross_product_size(&self) -> usize {
        self.sweeps.iter().map(|(_, v)| v.len()).product()
    }

    /// Expands the cross product into cells. Combinations a problem does not
    /// admit (a sharing problem on exclusive bands) are dropped; exclusive
    /// problems ignore the swept sharing mode, so their duplicates collapse.
    pub fn cells(&self) -> Result<Vec<Cell>> {
        let total = self.cross_product_size();
        if total > self.max_cells {
            return Err(Error::InvalidConfig(format!(
                "grid has {total} cells, above max_cells = {}",
                self.max_cells
            )));
        }
        let mut cells = Vec::new();
        let mut seen = HashSet::new();
        for flat in 0..total {
            let mut cfg = self.base.clone();
            let mut problem = self.problem;
            let mut rest = flat;
            let mut picks = Vec::with_capacity(self.sweeps.len());
            for (key, values) in self.sweeps.iter().rev() {
                picks.push((key, &values[rest % values.len()]));
                rest /= values.len();
            }
            for (key, value) in picks.into_iter().rev() {
                if key == "problem" {
                    problem = value.parse().map_err(Error::InvalidConfig)?;
                } else {
                    cfg.set(key, value, Path::new("")).map_err(Error::InvalidConfig)?;
                }
            }
            if cfg.carrier_freq >= HIGH_BAND_HZ {
                cfg.n_bs_antennas *= 2;
                cfg.n_ue_antennas *= 2;
            }
            cfg.validate()?;
            let Ok(spec) = ProblemSpec::new(problem, &cfg) else {
                continue;
            };
            let config = spec.apply(&cfg);
            let id = cell_id(problem, &config);
            if seen.insert(id.clone()) {
                cells.push(Cell {
                    index: cells.len(),
                    id,
                    spec,
                    config,
                });
            }
        }
        Ok(cells)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    Error,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Ok => "ok",
            Status::Error => "error",
        })
    }
}

/// Statistics of one cell on one topology.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub cell: String,
    pub problem: ProblemId,
    pub sharing_mode: SharingMode,
    pub n_bs_antennas: usize,
    pub n_ue_antennas: usize,
    pub carrier_freq: f64,
    pub bs_density_per_operator: f64,
    pub ue_density_total: f64,
    pub seed_index: usize,
    pub trial_seed: u64,
    pub status: Status,
    pub n_ues: usize,
    pub mean_rate: f64,
    pub p5: f64,
    pub p50: f64,
    pub p95: f64,
    pub mean_i1_over_noise: f64,
    pub mean_i2_over_noise: f64,
    pub mean_i3_over_noise: f64,
    pub utilities: Vec<f64>,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UeRow {
    pub cell: String,
    pub seed_index: usize,
    pub ue: usize,
    pub operator: usize,
    pub serving_bs: Option<usize>,
    pub rate: f64,
    pub interference_over_noise: [f64; 3],
}

pub const UE_COLUMNS: [&str; 9] = [
    "cell",
    "seed_index",
    "ue",
    "operator",
    "serving_bs",
    "rate",
    "i1_over_noise",
    "i2_over_noise",
    "i3_over_noise",
];

pub const TIMING_COLUMNS: [&str; 4] = ["cell", "seed_index", "wall_seconds", "solver_steps"];

const ID_COLUMNS: [&str; 8] = [
    "cell",
    "problem",
    "sharing_mode",
    "n_bs_antennas",
    "n_ue_antennas",
    "carrier_freq",
    "bs_density_per_operator",
    "ue_density_total",
];

pub fn report_columns(num_operators: usize) -> Vec<String> {
    let mut c: Vec<String> = ID_COLUMNS.iter().map(|s| s.to_string()).collect();
    c.extend(
        [
            "seed_index",
            "trial_seed",
            "status",
            "n_ues",
            "mean_rate",
            "p5_rate",
            "p50_rate",
            "p95_rate",
            "mean_i1_over_noise",
            "mean_i2_over_noise",
            "mean_i3_over_noise",
        ]
        .map(String::from),
    );
    c.extend((0..num_operators).map(|z| format!("utility_op{z}")));
    c.push("error".into());
    c
}

pub fn summary_columns(num_operators: usize) -> Vec<String> {
    let mut c: Vec<String> = ID_COLUMNS.iter().map(|s| s.to_string()).collect();
    c.extend(
        [
            "seeds_ok",
            "seeds_failed",
            "n_ues",
            "mean_rate",
            "p5_rate",
            "p50_rate",
            "p95_rate",
            "mean_i1_over_noise",
            "mean_i2_over_noise",
            "mean_i3_over_noise",
        ]
        .map(String::from),
    );
    c.extend((0..num_operators).map(|z| format!("mean_utility_op{z}")));
    c
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn id_fields(cell: &str, problem: ProblemId, cfg_like: (SharingMode, usize, usize, f64, f64, f64)) -> Vec<String> {
    let (s, nb, nu, fc, bd, ud) = cfg_like;
    vec![
        cell.to_string(),
        problem.to_string(),
        s.to_string(),
        nb.to_string(),
        nu.to_string(),
        num(fc),
        num(bd),
        num(ud),
    ]
}

impl ReportRow {
    fn coords(&self) -> (SharingMode, usize, usize, f64, f64, f64) {
        (
            self.sharing_mode,
            self.n_bs_antennas,
            self.n_ue_antennas,
            self.carrier_freq,
            self.bs_density_per_operator,
            self.ue_density_total,
        )
    }

    pub fn to_record(&self) -> Vec<String> {
        let mut r = id_fields(&self.cell, self.problem, self.coords());
        r.extend([
            self.seed_index.to_string(),
            self.trial_seed.to_string(),
            self.status.to_string(),
            self.n_ues.to_string(),
            num(self.mean_rate),
            num(self.p5),
            num(self.p50),
            num(self.p95),
            num(self.mean_i1_over_noise),
            num(self.mean_i2_over_noise),
            num(self.mean_i3_over_noise),
        ]);
        r.extend(self.utilities.iter().map(|&u| num(u)));
        r.push(self.error.clone());
        r
    }

    pub fn from_record(rec: &csv::StringRecord, num_operators: usize) -> Result<Self> {
        let want = report_columns(num_operators).len();
        if rec.len() != want {
            return Err(Error::Report(format!("report row has {} fields, expected {want}", rec.len())));
        }
        let f = |i: usize| rec.get(i).unwrap_or("");
        let p = |i: usize| -> Result<f64> { parse_field(f(i)) };
        let n = |i: usize| -> Result<usize> { parse_field(f(i)) };
        Ok(Self {
            cell: f(0).to_string(),
            problem: f(1).parse().map_err(Error::Report)?,
            sharing_mode: f(2).parse().map_err(Error::Report)?,
            n_bs_antennas: n(3)?,
            n_ue_antennas: n(4)?,
            carrier_freq: p(5)?,
            bs_density_per_operator: p(6)?,
            ue_density_total: p(7)?,
            seed_index: n(8)?,
            trial_seed: parse_field(f(9))?,
            status: match f(10) {
                "ok" => Status::Ok,
                "error" => Status::Error,
                other => return Err(Error::Report(format!("unknown status `{other}`"))),
            },
            n_ues: n(11)?,
            mean_rate: p(12)?,
            p5: p(13)?,
            p50: p(14)?,
            p95: p(15)?,
            mean_i1_over_noise: p(16)?,
            mean_i2_over_noise: p(17)?,
            mean_i3_over_noise: p(18)?,
            utilities: (0..num_operators).map(|z| p(19 + z)).collect::<Result<_>>()?,
            error: f(19 + num_operators).to_string(),
        })
    }
}

impl UeRow {
    pub fn to_record(&self) -> Vec<String> {
        vec![
            self.cell.clone(),
            self.seed_index.to_string(),
            self.ue.to_string(),
            self.operator.to_string(),
            self.serving_bs.map_or(String::new(), |b| b.to_string()),
            num(self.rate),
            num(self.interference_over_noise[0]),
            num(self.interference_over_noise[1]),
            num(self.interference_over_noise[2]),
        ]
    }

    pub fn from_record(rec: &csv::StringRecord) -> Result<Self> {
        if rec.len() != UE_COLUMNS.len() {
            return Err(Error::Report(format!("UE row has {} fields", rec.len())));
        }
        let f = |i: usize| rec.get(i).unwrap_or("");
        Ok(Self {
            cell: f(0).to_string(),
            seed_index: parse_field(f(1))?,
            ue: parse_field(f(2))?,
            operator: parse_field(f(3))?,
            serving_bs: if f(4).is_empty() { None } else { Some(parse_field(f(4))?) },
            rate: parse_field(f(5))?,
            interference_over_noise: [parse_field(f(6))?, parse_field(f(7))?, parse_field(f(8))?],
        })
    }
}

fn parse_field<V: FromStr>(s: &str) -> Result<V>
where
    V::Err: fmt::Display,
{
    s.parse().map_err(|e| Error::Report(format!("`{s}`: {e}")))
}

/// Result of one (cell, seed) task.
#[derive(Debug, Clone)]
pub struct TaskOutput {
    pub cell_index: usize,
    pub row: ReportRow,
    pub ues: Vec<UeRow>,
    pub wall_seconds: f64,
    pub steps: usize,
}

fn empty_row(cell: &Cell, seed_index: usize, seed: u64) -> ReportRow {
    let c = &cell.config;
    ReportRow {
        cell: cell.id.clone(),
        problem: cell.spec.problem,
        sharing_mode: c.sharing_mode,
        n_bs_antennas: c.n_bs_antennas,
        n_ue_antennas: c.n_ue_antennas,
        carrier_freq: c.carrier_freq,
        bs_density_per_operator: c.bs_density_per_operator,
        ue_density_total: c.ue_density_total,
        seed_index,
        trial_seed: seed,
        status: Status::Error,
        n_ues: 0,
        mean_rate: f64::NAN,
        p5: f64::NAN,
        p50: f64::NAN,
        p95: f64::NAN,
        mean_i1_over_noise: f64::NAN,
        mean_i2_over_noise: f64::NAN,
        mean_i3_over_noise: f64::NAN,
        utilities: vec![f64::NAN; c.num_operators],
        error: String::new(),
    }
}

/// Samples topology `seed_index` of a cell, solves the cell's problem and
/// evaluates the rates with actual interference. Failures are recorded in
/// the row.
pub fn run_task(cell: &Cell, seed_index: usize) -> TaskOutput {
    let start = Instant::now();
    let seed = trial_seed(cell.config.seed, seed_index as u64);
    let mut row = empty_row(cell, seed_index, seed);
    let mut ues = Vec::new();
    let mut steps = 0;
    let outcome = Network::<f64>::new(&cell.config, seed).and_then(|net| {
        let sol = solve(&net, &cell.spec)?;
        Ok((net, sol))
    });
    match outcome {
        Ok((net, sol)) => {
            let rep = &sol.report;
            row.status = Status::Ok;
            row.n_ues = rep.ues.len();
            row.mean_rate = rep.mean_rate();
            row.p5 = rep.p5;
            row.p50 = rep.p50;
            row.p95 = rep.p95;
            row.mean_i1_over_noise = rep.mean_i1_over_noise;
            row.mean_i2_over_noise = rep.mean_i2_over_noise;
            row.mean_i3_over_noise = rep.mean_i3_over_noise;
            row.utilities = rep.per_operator_utility.clone();
            steps = sol.steps;
            for (k, &u) in rep.ues.iter().enumerate() {
                ues.push(UeRow {
                    cell: cell.id.clone(),
                    seed_index,
                    ue: u,
                    operator: net.topology.ues[u].operator,
                    serving_bs: sol.association.serving(u),
                    rate: rep.per_ue_rate[k],
                    interference_over_noise: rep.per_ue_interference[k],
                });
            }
        }
        Err(e) => row.error = e.to_string(),
    }
    TaskOutput {
        cell_index: cell.index,
        row,
        ues,
        wall_seconds: start.elapsed().as_secs_f64(),
        steps,
    }
}

/// Per-cell aggregate over every successful seed.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub cell: String,
    pub problem: ProblemId,
    pub sharing_mode: SharingMode,
    pub n_bs_antennas: usize,
    pub n_ue_antennas: usize,
    pub carrier_freq: f64,
    pub bs_density_per_operator: f64,
    pub ue_density_total: f64,
    pub seeds_ok: usize,
    pub seeds_failed: usize,
    pub n_ues: usize,
    pub mean_rate: f64,
    pub p5: f64,
    pub p50: f64,
    pub p95: f64,
    pub mean_interference_over_noise: [f64; 3],
    pub mean_utilities: Vec<f64>,
}

impl CellSummary {
    fn coords(&self) -> (SharingMode, usize, usize, f64, f64, f64) {
        (
            self.sharing_mode,
            self.n_bs_antennas,
            self.n_ue_antennas,
            self.carrier_freq,
            self.bs_density_per_operator,
            self.ue_density_total,
        )
    }

    pub fn to_record(&self) -> Vec<String> {
        let mut r = id_fields(&self.cell, self.problem, self.coords());
        r.extend([
            self.seeds_ok.to_string(),
            self.seeds_failed.to_string(),
            self.n_ues.to_string(),
            num(self.mean_rate),
            num(self.p5),
            num(self.p50),
            num(self.p95),
            num(self.mean_interference_over_noise[0]),
            num(self.mean_interference_over_noise[1]),
            num(self.mean_interference_over_noise[2]),
        ]);
        r.extend(self.mean_utilities.iter().map(|&u| num(u)));
        r
    }

    pub fn from_record(rec: &csv::StringRecord, num_operators: usize) -> Result<Self> {
        if rec.len() != summary_columns(num_operators).len() {
            return Err(Error::Report(format!("summary row has {} fields", rec.len())));
        }
        let f = |i: usize| rec.get(i).unwrap_or("");
        let p = |i: usize| -> Result<f64> { parse_field(f(i)) };
        Ok(Self {
            cell: f(0).to_string(),
            problem: f(1).parse().map_err(Error::Report)?,
            sharing_mode: f(2).parse().map_err(Error::Report)?,
            n_bs_antennas: parse_field(f(3))?,
            n_ue_antennas: parse_field(f(4))?,
            carrier_freq: p(5)?,
            bs_density_per_operator: p(6)?,
            ue_density_total: p(7)?,
            seeds_ok: parse_field(f(8))?,
            seeds_failed: parse_field(f(9))?,
            n_ues: parse_field(f(10))?,
            mean_rate: p(11)?,
            p5: p(12)?,
            p50: p(13)?,
            p95: p(14)?,
            mean_interference_over_noise: [p(15)?, p(16)?, p(17)?],
            mean_utilities: (0..num_operators).map(|z| p(18 + z)).collect::<Result<_>>()?,
        })
    }
}

/// Pools the per-UE rows of a cell's successful seeds. `rows` are the
/// cell's report rows, `ues` its UE rows in (seed, ue) order.
pub fn summarize(rows: &[&ReportRow], ues: &[&UeRow]) -> Option<CellSummary> {
    let first = rows.first()?;
    let ok: HashSet<usize> = rows.iter().filter(|r| r.status == Status::Ok).map(|r| r.seed_index).collect();
    let pooled: Vec<&UeRow> = ues.iter().copied().filter(|u| ok.contains(&u.seed_index)).collect();
    let mut rates: Vec<f64> = pooled.iter().map(|u| u.rate).collect();
    let n = pooled.len();
    let mean = |k: usize| pooled.iter().map(|u| u.interference_over_noise[k]).sum::<f64>() / n as f64;
    let mean_rate = rates.iter().sum::<f64>() / n as f64;
    rates.sort_by(f64::total_cmp);
    let z = first.utilities.len();
    let mean_utilities = (0..z)
        .map(|k| {
            let vals: Vec<f64> = rows.iter().filter(|r| r.status == Status::Ok).map(|r| r.utilities[k]).collect();
            vals.iter().sum::<f64>() / vals.len() as f64
        })
        .collect();
    Some(CellSummary {
        cell: first.cell.clone(),
        problem: first.problem,
        sharing_mode: first.sharing_mode,
        n_bs_antennas: first.n_bs_antennas,
        n_ue_antennas: first.n_ue_antennas,
        carrier_freq: first.carrier_freq,
        bs_density_per_operator: first.bs_density_per_operator,
        ue_density_total: first.ue_density_total,
        seeds_ok: ok.len(),
        seeds_failed: rows.len() - ok.len(),
        n_ues: n,
        mean_rate,
        p5: percentile(&rates, 0.05),
        p50: percentile(&rates, 0.50),
        p95: percentile(&rates, 0.95),
        mean_interference_over_noise: [mean(0), mean(1), mean(2)],
        mean_utilities,
    })
}

/// Summaries of every cell appearing in `rows`, in first-appearance order.
pub fn summarize_all(rows: &[ReportRow], ues: &[UeRow]) -> Vec<CellSummary> {
    let mut order: Vec<&str> = Vec::new();
    let mut by_cell: BTreeMap<&str, (Vec<&ReportRow>, Vec<&UeRow>)> = BTreeMap::new();
    for r in rows {
        let e = by_cell.entry(&r.cell).or_default();
        if e.0.is_empty() {
            order.push(&r.cell);
        }
        e.0.push(r);
    }
    for u in ues {
        if let Some(e) = by_cell.get_mut(u.cell.as_str()) {
            e.1.push(u);
        }
    }
    order
        .into_iter()
        .filter_map(|c| {
            let (r, u) = &by_cell[c];
            summarize(r, u)
        })
        .collect()
}

/// Empirical CCDF: each distinct rate `x` with the fraction of rates `>= x`,
/// in increasing `x`.
pub fn ccdf(rates: &[f64]) -> Result<Vec<(f64, f64)>> {
    if rates.is_empty() {
        return Err(Error::Report("no rates for CCDF".into()));
    }
    let mut sorted = rates.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut out = Vec::new();
    let mut k = 0;
    while k < sorted.len() {
        let x = sorted[k];
        out.push((x, (sorted.len() - k) as f64 / n));
        while k < sorted.len() && sorted[k] == x {
            k += 1;
        }
    }
    Ok(out)
}

/// A percentile ratio; `None` when the baseline is zero or not finite.
pub type Ratio = Option<f64>;

fn ratio(a: f64, b: f64) -> Ratio {
    (b != 0.0 && b.is_finite() && a.is_finite()).then(|| a / b)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub cell: String,
    pub baseline_cell: String,
    pub p5: Ratio,
    pub p50: Ratio,
    pub p95: Ratio,
    pub mean: Ratio,
}

/// Percentile ratios of every non-baseline cell against the baseline cell
/// with the same arrays, carrier and densities. Exclusive-band baselines
/// match any sharing mode; otherwise the sharing mode must match too.
pub fn compare_to_baseline(rows: &[CellSummary], baseline: ProblemId) -> Result<Vec<Comparison>> {
    let key = |s: &CellSummary, with_sharing: bool| {
        (
            with_sharing.then_some(s.sharing_mode),
            s.n_bs_antennas,
            s.n_ue_antennas,
            s.carrier_freq.to_bits(),
            s.bs_density_per_operator.to_bits(),
            s.ue_density_total.to_bits(),
        )
    };
    let with_sharing = !baseline.is_exclusive();
    let bases: Vec<&CellSummary> = rows.iter().filter(|s| s.problem == baseline).collect();
    let mut out = Vec::new();
    for s in rows.iter().filter(|s| s.problem != baseline) {
        let b = bases
            .iter()
            .find(|b| key(b, with_sharing) == key(s, with_sharing))
            .ok_or_else(|| Error::MissingBaseline(s.cell.clone()))?;
        out.push(Comparison {
            cell: s.cell.clone(),
            baseline_cell: b.cell.clone(),
            p5: ratio(s.p5, b.p5),
            p50: ratio(s.p50, b.p50),
            p95: ratio(s.p95, b.p95),
            mean: ratio(s.mean_rate, b.mean_rate),
        });
    }
    Ok(out)
}

pub fn format_ratio(r: Ratio) -> String {
    r.map_or("undefined".into(), num)
}

/// How to run a grid.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out: PathBuf,
    /// Topologies per cell; `None` uses the scenario's `n_topologies`.
    pub seeds: Option<usize>,
    /// Worker threads; 0 lets rayon decide.
    pub jobs: usize,
    pub quiet: bool,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub cells: Vec<Cell>,
    pub rows: Vec<ReportRow>,
    pub ues: Vec<UeRow>,
    pub summaries: Vec<CellSummary>,
    /// Tasks executed in this invocation (the rest were on disk).
    pub executed: usize,
}

impl RunResult {
    pub fn all_ok(&self) -> bool {
        self.rows.iter().all(|r| r.status == Status::Ok)
    }
}

#[derive(Serialize)]
struct Sidecar<'a> {
    preset: Preset,
    seeds: usize,
    max_cells: usize,
    base: &'a ScenarioConfig,
    default_problem: ProblemId,
    sweeps: &'a [(String, Vec<String>)],
    report_columns: Vec<String>,
    ue_columns: Vec<&'static str>,
    summary_columns: Vec<String>,
    timing_columns: Vec<&'static str>,
    cells: &'a [Cell],
}

pub const REPORT_FILE: &str = "report.csv";
pub const UES_FILE: &str = "ues.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const TIMING_FILE: &str = "timing.csv";
pub const SIDECAR_FILE: &str = "report.json";

/// Complete lines of a CSV file (a trailing line cut short by a crash is
/// dropped), without the header.
fn read_complete_records(path: &Path, header: &[String]) -> Result<Vec<csv::StringRecord>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let text = fs::read_to_string(path)?;
    let complete = match text.rfind('\n') {
        Some(end) => &text[..=end],
        None => "",
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(complete.as_bytes());
    let head = rdr.headers()?.clone();
    if !complete.is_empty() && head.iter().ne(header.iter().map(String::as_str)) {
        return Err(Error::Report(format!("{} has unexpected columns", path.display())));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        out.push(rec?);
    }
    Ok(out)
}

fn write_csv(path: &Path, header: &[String], records: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let tmp = path.with_extension("csv.tmp");
    {
        let mut w = csv::Writer::from_path(&tmp)?;
        w.write_record(header)?;
        for r in records {
            w.write_record(&r)?;
        }
        w.flush()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

struct Appender {
    file: fs::File,
}

impl Appender {
    fn open(path: &Path, header: &[String]) -> Result<Self> {
        let fresh = !path.exists() || fs::metadata(path)?.len() == 0;
        let mut file = fs::OpenOptions::new().create(true).append(true).open(path)?;
        if fresh {
            file.write_all(&record_bytes(header)?)?;
        }
        Ok(Self { file })
    }

    fn append(&mut self, records: &[Vec<String>]) -> Result<()> {
        let mut buf = Vec::new();
        for r in records {
            buf.extend(record_bytes(r)?);
        }
        self.file.write_all(&buf)?;
        self.file.flush()?;
        Ok(())
    }
}

fn record_bytes(r: &[String]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(r)?;
    w.into_inner().map_err(|e| Error::Report(e.to_string()))
}

fn strings(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|s| s.to_string()).collect()
}

/// Runs every (cell, seed) task not already in `opts.out`, then rewrites the
/// report files sorted and writes the per-cell summary.
pub fn run_experiment(grid: &ExperimentGrid, opts: &RunOptions) -> Result<RunResult> {
    let cells = grid.cells()?;
    let seeds = opts.seeds.unwrap_or(grid.base.n_topologies);
    if seeds == 0 {
        return Err(Error::InvalidConfig("at least one seed is needed".into()));
    }
    let z = grid.base.num_operators;
    fs::create_dir_all(&opts.out)?;
    let report_cols = report_columns(z);
    let ue_cols = strings(&UE_COLUMNS);
    let timing_cols = strings(&TIMING_COLUMNS);
    let sidecar = serde_json::to_string_pretty(&Sidecar {
        preset: grid.preset,
        seeds,
        max_cells: grid.max_cells,
        base: &grid.base,
        default_problem: grid.problem,
        sweeps: &grid.sweeps,
        report_columns: report_cols.clone(),
        ue_columns: UE_COLUMNS.to_vec(),
        summary_columns: summary_columns(z),
        timing_columns: TIMING_COLUMNS.to_vec(),
        cells: &cells,
    })? + "\n";
    let sidecar_path = opts.out.join(SIDECAR_FILE);
    if sidecar_path.exists() {
        if fs::read_to_string(&sidecar_path)? != sidecar {
            return Err(Error::Report(format!(
                "{} holds a different grid; use another output directory",
                opts.out.display()
            )));
        }
    } else {
        fs::write(&sidecar_path, &sidecar)?;
    }

    let report_path = opts.out.join(REPORT_FILE);
    let ues_path = opts.out.join(UES_FILE);
    let timing_path = opts.out.join(TIMING_FILE);
    let cell_index: BTreeMap<&str, usize> = cells.iter().map(|c| (c.id.as_str(), c.index)).collect();

    // Resume: keep rows of tasks whose report row made it to disk.
    let mut rows: Vec<ReportRow> = Vec::new();
    for rec in read_complete_records(&report_path, &report_cols)? {
        if let Ok(r) = ReportRow::from_record(&rec, z) {
            if cell_index.contains_key(r.cell.as_str()) && r.seed_index < seeds {
                rows.push(r);
            }
        }
    }
    let done: HashSet<(String, usize)> = rows.iter().map(|r| (r.cell.clone(), r.seed_index)).collect();
    let mut ues: Vec<UeRow> = read_complete_records(&ues_path, &ue_cols)?
        .iter()
        .filter_map(|rec| UeRow::from_record(rec).ok())
        .filter(|u| done.contains(&(u.cell.clone(), u.seed_index)))
        .collect();
    let mut timing: Vec<Vec<String>> = read_complete_records(&timing_path, &timing_cols)?
        .iter()
        .filter(|rec| {
            rec.len() == TIMING_COLUMNS.len()
                && rec[1]
                    .parse::<usize>()
                    .is_ok_and(|k| done.contains(&(rec[0].to_string(), k)))
        })
        .map(|rec| rec.iter().map(String::from).collect())
        .collect();
    sort_all(&cell_index, &mut rows, &mut ues, &mut timing);
    write_csv(&report_path, &report_cols, rows.iter().map(ReportRow::to_record))?;
    write_csv(&ues_path, &ue_cols, ues.iter().map(UeRow::to_record))?;
    write_csv(&timing_path, &timing_cols, timing.clone())?;

    let todo: Vec<(usize, usize)> = cells
        .iter()
        .flat_map(|c| (0..seeds).map(move |k| (c.index, k)))
        .filter(|(c, k)| !done.contains(&(cells[*c].id.clone(), *k)))
        .collect();
    let total = todo.len();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs)
        .build()
        .map_err(|e| Error::Report(e.to_string()))?;
    let (tx, rx) = mpsc::channel::<TaskOutput>();
    let mut report_out = Appender::open(&report_path, &report_cols)?;
    let mut ues_out = Appender::open(&ues_path, &ue_cols)?;
    let mut timing_out = Appender::open(&timing_path, &timing_cols)?;
    let mut write_err: Option<Error> = None;
    std::thread::scope(|s| {
        let cells = &cells;
        let todo = &todo;
        s.spawn(move || {
            pool.install(|| {
                todo.par_iter().for_each_with(tx, |tx, &(c, k)| {
                    let _ = tx.send(run_task(&cells[c], k));
                })
            })
        });
        for (n, out) in rx.into_iter().enumerate() {
            if !opts.quiet {
                let tail = if out.row.status == Status::Ok {
                    format!("ok in {:.1}s", out.wall_seconds)
                } else {
                    format!("error: {}", out.row.error)
                };
                eprintln!("[{}/{total}] {} seed {}: {tail}", n + 1, out.row.cell, out.row.seed_index);
            }
            let t = vec![
                out.row.cell.clone(),
                out.row.seed_index.to_string(),
                format!("{:.3}", out.wall_seconds),
                out.steps.to_string(),
            ];
            // UE rows first: a report row marks the task as complete.
            let res = ues_out
                .append(&out.ues.iter().map(UeRow::to_record).collect::<Vec<_>>())
                .and_then(|_| timing_out.append(std::slice::from_ref(&t)))
                .and_then(|_| report_out.append(&[out.row.to_record()]));
            if let Err(e) = res {
                write_err.get_or_insert(e);
            }
            rows.push(out.row);
            ues.extend(out.ues);
            timing.push(t);
        }
    });
    if let Some(e) = write_err {
        return Err(e);
    }

    sort_all(&cell_index, &mut rows, &mut ues, &mut timing);
    write_csv(&report_path, &report_cols, rows.iter().map(ReportRow::to_record))?;
    write_csv(&ues_path, &ue_cols, ues.iter().map(UeRow::to_record))?;
    write_csv(&timing_path, &timing_cols, timing)?;
    let summaries = summarize_all(&rows, &ues);
    write_csv(
        &opts.out.join(SUMMARY_FILE),
        &summary_columns(z),
        summaries.iter().map(CellSummary::to_record),
    )?;
    Ok(RunResult {
        cells,
        rows,
        ues,
        summaries,
        executed: total,
    })
}

fn sort_all(
    cell_index: &BTreeMap<&str, usize>,
    rows: &mut [ReportRow],
    ues: &mut [UeRow],
    timing: &mut [Vec<String>],
) {
    let ci = |c: &str| cell_index.get(c).copied().unwrap_or(usize::MAX);
    rows.sort_by_key(|r| (ci(&r.cell), r.seed_index));
    ues.sort_by_key(|u| (ci(&u.cell), u.seed_index, u.ue));
    timing.sort_by_key(|t| (ci(&t[0]), t[1].parse::<usize>().unwrap_or(usize::MAX)));
}

/// The run directory a report path refers to (the directory itself or any
/// file inside it).
pub fn report_dir(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.to_path_buf()
    } else {
        path.parent().map(Path::to_path_buf).unwrap_or_default()
    }
}

fn sidecar_operators(dir: &Path) -> Result<usize> {
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join(SIDECAR_FILE))?)?;
    v["base"]["num_operators"]
        .as_u64()
        .map(|z| z as usize)
        .ok_or_else(|| Error::Report("sidecar lacks base.num_operators".into()))
}

pub fn read_report(dir: &Path) -> Result<Vec<ReportRow>> {
    let z = sidecar_operators(dir)?;
    read_complete_records(&dir.join(REPORT_FILE), &report_columns(z))?
        .iter()
        .map(|r| ReportRow::from_record(r, z))
        .collect()
}

pub fn read_ue_dump(dir: &Path) -> Result<Vec<UeRow>> {
    read_complete_records(&dir.join(UES_FILE), &strings(&UE_COLUMNS))?
        .iter()
        .map(UeRow::from_record)
        .collect()
}

pub fn read_summary(dir: &Path) -> Result<Vec<CellSummary>> {
    let z = sidecar_operators(dir)?;
    read_complete_records(&dir.join(SUMMARY_FILE), &summary_columns(z))?
        .iter()
        .map(|r| CellSummary::from_record(r, z))
        .collect()
}

/// Rates of one cell pooled over its successful seeds, from the UE dump.
pub fn cell_rates(dir: &Path, cell: &str) -> Result<Vec<f64>> {
    let ok: HashSet<usize> = read_report(dir)?
        .into_iter()
        .filter(|r| r.cell == cell && r.status == Status::Ok)
        .map(|r| r.seed_index)
        .collect();
    let rates: Vec<f64> = read_ue_dump(dir)?
        .into_iter()
        .filter(|u| u.cell == cell && ok.contains(&u.seed_index))
        .map(|u| u.rate)
        .collect();
    if rates.is_empty() {
        return Err(Error::Report(format!("no rates for cell `{cell}`")));
    }
    Ok(rates)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ccdf_counts_values_at_or_above() {
        let c = ccdf(&[3.0, 1.0, 2.0]).unwrap();
        assert_eq!(c, vec![(1.0, 1.0), (2.0, 2.0 / 3.0), (3.0, 1.0 / 3.0)]);
        assert_eq!(ccdf(&[5.0; 4]).unwrap(), vec![(5.0, 1.0)]);
        assert!(ccdf(&[]).is_err());
    }

    fn summary(problem: ProblemId, sharing: SharingMode, p5: f64) -> CellSummary {
        CellSummary {
            cell: format!("{problem}-{sharing}"),
            problem,
            sharing_mode: sharing,
            n_bs_antennas: 64,
            n_ue_antennas: 16,
            carrier_freq: 32e9,
            bs_density_per_operator: 100.0,
            ue_density_total: 600.0,
            seeds_ok: 1,
            seeds_failed: 0,
            n_ues: 10,
            mean_rate: 2.0,
            p5,
            p50: 2.0,
            p95: 3.0,
            mean_interference_over_noise: [0.0; 3],
            mean_utilities: vec![0.0; 4],
        }
    }

    #[test]
    fn baseline_ratios() {
        let rows = vec![
            summary(ProblemId::P3, SharingMode::Exclusive, 1.0),
            summary(ProblemId::P1, SharingMode::Full, 1.0),
        ];
        let c = compare_to_baseline(&rows, ProblemId::P3).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!((c[0].p5, c[0].p50, c[0].p95, c[0].mean), (Some(1.0), Some(1.0), Some(1.0), Some(1.0)));

        let rows = vec![
            summary(ProblemId::P3, SharingMode::Exclusive, 0.0),
            summary(ProblemId::P1, SharingMode::Full, 1.0),
        ];
        let c = compare_to_baseline(&rows, ProblemId::P3).unwrap();
        assert_eq!(c[0].p5, None);
        assert_eq!(format_ratio(c[0].p5), "undefined");

        let rows = vec![summary(ProblemId::P1, SharingMode::Full, 1.0)];
        assert!(matches!(
            compare_to_baseline(&rows, ProblemId::P3),
            Err(Error::MissingBaseline(_))
        ));
    }

    #[test]
    fn grid_expansion_scales_high_band_and_drops_invalid() {
        let text = "sweep.problem = p1, p3\n\
                    sweep.sharing_mode = exclusive, full\n\
                    sweep.carrier_freq = 32e9, 73e9\n\
                    n_bs_antennas = 16\n\
                    n_ue_antennas = 4\n";
        let g = ExperimentGrid::from_kv_str(text, Path::new("g.cfg"), Preset::Desk).unwrap();
        assert_eq!(g.cross_product_size(), 8);
        let cells = g.cells().unwrap();
        // p1 on exclusive bands is dropped; p3 collapses over sharing modes.
        assert_eq!(cells.len(), 4);
        for c in &cells {
            assert_eq!(c.config.area_side, 500.0);
            let scale = if c.config.carrier_freq >= HIGH_BAND_HZ { 2 } else { 1 };
            assert_eq!(c.config.n_bs_antennas, 16 * scale);
            assert_eq!(c.config.n_ue_antennas, 4 * scale);
            assert_eq!(c.config.n_rf_chains, 6);
            if c.spec.problem == ProblemId::P3 {
                assert_eq!(c.config.sharing_mode, SharingMode::Exclusive);
            }
        }
        assert_eq!(cells[0].id, "p1-full-nbs16-nue4-fc32-bsd100-ued600");
    }

    #[test]
    fn grid_rejects_bad_sweeps() {
        let bad = ExperimentGrid::from_kv_str("sweep.tx_power = 1, 2\n", Path::new("g"), Preset::Desk);
        assert!(matches!(bad, Err(Error::Parse { line: 1, .. })));
        let bad = ExperimentGrid::from_kv_str("sweep.problem = p1, p9\n", Path::new("g"), Preset::Desk);
        assert!(bad.is_err());
        let big = ExperimentGrid::from_kv_str(
            "max_cells = 3\nsweep.n_bs_antennas = 1, 2\nsweep.n_ue_antennas = 1, 2\n",
            Path::new("g"),
            Preset::Desk,
        )
        .unwrap();
        assert!(big.cells().is_err());
    }

    #[test]
    fn record_roundtrip() {
        let r = ReportRow {
            utilities: vec![1.5, f64::NEG_INFINITY],
            error: "a, \"quoted\" message".into(),
            mean_rate: 0.1 + 0.2,
            ..empty_row(
                &Cell {
                    index: 0,
                    id: "x".into(),
                    spec: ProblemSpec::new(ProblemId::P2, &ScenarioConfig::default()).unwrap(),
                    config: ScenarioConfig {
                        num_operators: 2,
                        ..Default::default()
                    },
                },
                3,
                99,
            )
        };
        let bytes = record_bytes(&r.to_record()).unwrap();
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(bytes.as_slice());
        let rec = rdr.records().next().unwrap().unwrap();
        let back = ReportRow::from_record(&rec, 2).unwrap();
        assert_eq!(back.to_record(), r.to_record());
        assert_eq!(back.mean_rate, 0.1 + 0.2);
    }
}
