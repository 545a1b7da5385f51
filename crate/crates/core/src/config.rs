//! Scenario configuration and its plain-text `key = value` file format.
//!
//! One key per field, SI units throughout (Hz, W, W/Hz, meters). Lines
//! starting with `#` are comments. Unknown keys are rejected. The full list of
//! keys is in `ScenarioConfig::KEYS` and documented in the README.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::ChannelTable;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SharingMode {
    Exclusive,
    Partial,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precoder {
    Analog,
    Mrt,
    Rzf,
}

impl Precoder {
    pub fn is_digital(self) -> bool {
        !matches!(self, Precoder::Analog)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coordination {
    Full,
    IntraOnly,
    None,
}

/// Line-of-sight probability model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LosModel {
    /// `P(LoS) = exp(-d / decay)`.
    Exponential { decay_m: f64 },
    Always,
    Never,
}

/// Which rows of the stacked effective channel feed a BS's RZF inverse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RzfRows {
    /// Only rows whose channel originates at the precoding BS.
    Transmitter,
    /// Every row of the stacked matrix, regardless of originating BS.
    Stacked,
}

macro_rules! impl_enum_text {
    ($ty:ty, $($name:literal => $val:expr),+ $(,)?) => {
        impl FromStr for $ty {
            type Err = String;
            fn from_str(s: &str) -> std::result::Result<Self, String> {
                match s.trim().to_ascii_lowercase().as_str() {
                    $($name => Ok($val),)+
                    other => Err(format!("unknown value `{other}`")),
                }
            }
        }
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                $(if *self == $val { return f.write_str($name); })+
                unreachable!()
            }
        }
    };
}

impl_enum_text!(SharingMode, "exclusive" => SharingMode::Exclusive, "partial" => SharingMode::Partial, "full" => SharingMode::Full);
impl_enum_text!(Precoder, "analog" => Precoder::Analog, "mrt" => Precoder::Mrt, "rzf" => Precoder::Rzf);
impl_enum_text!(Coordination, "full" => Coordination::Full, "intra_only" => Coordination::IntraOnly, "none" => Coordination::None);
impl_enum_text!(RzfRows, "transmitter" => RzfRows::Transmitter, "stacked" => RzfRows::Stacked);

/// Full description of one simulated scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub num_operators: usize,
    /// Total bandwidth W shared or split among operators, Hz.
    pub total_bandwidth: f64,
    pub sharing_mode: SharingMode,
    pub carrier_freq: f64,
    /// BSs per km^2, for every operator.
    pub bs_density_per_operator: f64,
    /// UEs per km^2 over all operators; split equally.
    pub ue_density_total: f64,
    /// Side of the square (toroidal) region, meters.
    pub area_side: f64,
    /// Total transmit power per BS, W.
    pub tx_power: f64,
    /// Noise power spectral density, W/Hz.
    pub noise_psd: f64,
    pub n_bs_antennas: usize,
    pub n_ue_antennas: usize,
    pub n_rf_chains: usize,
    /// `None` picks `ceil(log2(n_antennas))`.
    pub bs_codebook_bits: Option<u32>,
    pub ue_codebook_bits: Option<u32>,
    pub precoder: Precoder,
    pub coordination: Coordination,
    pub n_topologies: usize,
    pub n_fading_samples: usize,
    pub seed: u64,

    pub single_path: bool,
    /// Mean of the Poisson path count (conditioned on at least one path).
    pub mean_paths: f64,
    pub los_model: LosModel,
    pub min_distance: f64,
    pub channel_table: ChannelTable,
    /// `None` uses `N_b * noise_psd * W_z / tx_power`.
    pub rzf_regularizer: Option<f64>,
    pub rzf_rows: RzfRows,
    /// Combiner/precoder alternation passes for digital precoding.
    pub combiner_passes: usize,
    /// Strongest same-operator BSs considered per UE; 0 means all.
    pub max_candidates: usize,
    pub max_resample: usize,
    /// Tchebycheff weights per operator; `None` means `1/Z` each.
    pub tchebycheff_weights: Option<Vec<f64>>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            num_operators: 4,
            total_bandwidth: 2e9,
            sharing_mode: SharingMode::Full,
            carrier_freq: 32e9,
            bs_density_per_operator: 100.0,
            ue_density_total: 600.0,
            area_side: 1000.0,
            tx_power: dbm_to_watts(25.0),
            noise_psd: dbm_to_watts(-174.0),
            n_bs_antennas: 64,
            n_ue_antennas: 16,
            n_rf_chains: 6,
            bs_codebook_bits: None,
            ue_codebook_bits: None,
            precoder: Precoder::Analog,
            coordination: Coordination::Full,
            n_topologies: 100,
            n_fading_samples: 20,
            seed: 1,
            single_path: false,
            mean_paths: 3.0,
            los_model: LosModel::Exponential { decay_m: 67.0 },
            min_distance: 1.0,
            channel_table: ChannelTable::default(),
            rzf_regularizer: None,
            rzf_rows: RzfRows::Transmitter,
            combiner_passes: 1,
            max_candidates: 6,
            max_resample: 1000,
            tchebycheff_weights: None,
        }
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

fn codebook_bits_for(n: usize) -> u32 {
    usize::BITS - (n.max(1) - 1).leading_zeros()
}

fn parse_num<V: FromStr>(v: &str) -> std::result::Result<V, String>
where
    V::Err: fmt::Display,
{
    v.trim().parse::<V>().map_err(|e| format!("`{}`: {e}", v.trim()))
}

fn parse_bool(v: &str) -> std::result::Result<bool, String> {
    match v.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        other => Err(format!("expected a boolean, got `{other}`")),
    }
}

fn parse_auto<V: FromStr>(v: &str) -> std::result::Result<Option<V>, String>
where
    V::Err: fmt::Display,
{
    if v.trim().eq_ignore_ascii_case("auto") {
        Ok(None)
    } else {
        parse_num(v).map(Some)
    }
}

/// Splits `key = value` lines, dropping blank lines and `#` comments.
pub fn parse_kv_lines(text: &str, path: &Path) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: idx + 1,
                msg: format!("expected `key = value`, got `{line}`"),
            });
        };
        out.push((idx + 1, k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

impl ScenarioConfig {
    pub const KEYS: &'static [&'static str] = &[
        "num_operators",
        "total_bandwidth",
        "sharing_mode",
        "carrier_freq",
        "bs_density_per_operator",
        "ue_density_total",
        "area_side",
        "tx_power",
        "noise_psd",
        "n_bs_antennas",
        "n_ue_antennas",
        "n_rf_chains",
        "bs_codebook_bits",
        "ue_codebook_bits",
        "precoder",
        "coordination",
        "n_topologies",
        "n_fading_samples",
        "seed",
        "single_path",
        "mean_paths",
        "los_model",
        "los_decay",
        "min_distance",
        "channel_table",
        "rzf_regularizer",
        "rzf_rows",
        "combiner_passes",
        "max_candidates",
        "max_resample",
        "tchebycheff_weights",
    ];

    /// Sets one field from its textual value. `base_dir` resolves relative
    /// paths (the channel table).
    pub fn set(&mut self, key: &str, value: &str, base_dir: &Path) -> std::result::Result<(), String> {
        match key {
            "num_operators" => self.num_operators = parse_num(value)?,
            "total_bandwidth" => self.total_bandwidth = parse_num(value)?,
            "sharing_mode" => self.sharing_mode = value.parse()?,
            "carrier_freq" => self.carrier_freq = parse_num(value)?,
            "bs_density_per_operator" => self.bs_density_per_operator = parse_num(value)?,
            "ue_density_total" => self.ue_density_total = parse_num(value)?,
            "area_side" => self.area_side = parse_num(value)?,
            "tx_power" => self.tx_power = parse_num(value)?,
            "noise_psd" => self.noise_psd = parse_num(value)?,
            "n_bs_antennas" => self.n_bs_antennas = parse_num(value)?,
            "n_ue_antennas" => self.n_ue_antennas = parse_num(value)?,
            "n_rf_chains" => self.n_rf_chains = parse_num(value)?,
            "bs_codebook_bits" => self.bs_codebook_bits = parse_auto(value)?,
            "ue_codebook_bits" => self.ue_codebook_bits = parse_auto(value)?,
            "precoder" => self.precoder = value.parse()?,
            "coordination" => self.coordination = value.parse()?,
            "n_topologies" => self.n_topologies = parse_num(value)?,
            "n_fading_samples" => self.n_fading_samples = parse_num(value)?,
            "seed" => self.seed = parse_num(value)?,
            "single_path" => self.single_path = parse_bool(value)?,
            "mean_paths" => self.mean_paths = parse_num(value)?,
            "los_model" => {
                self.los_model = match value.trim().to_ascii_lowercase().as_str() {
                    "exponential" => match self.los_model {
                        m @ LosModel::Exponential { .. } => m,
                        _ => LosModel::Exponential { decay_m: 67.0 },
                    },
                    "always" => LosModel::Always,
                    "never" => LosModel::Never,
                    other => return Err(format!("unknown LoS model `{other}`")),
                }
            }
            "los_decay" => {
                self.los_model = LosModel::Exponential {
                    decay_m: parse_num(value)?,
                }
            }
            "min_distance" => self.min_distance = parse_num(value)?,
            "channel_table" => {
                let p = base_dir.join(value.trim());
                self.channel_table = ChannelTable::load(&p).map_err(|e| e.to_string())?;
            }
            "rzf_regularizer" => self.rzf_regularizer = parse_auto(value)?,
            "rzf_rows" => self.rzf_rows = value.parse()?,
            "combiner_passes" => self.combiner_passes = parse_num(value)?,
            "max_candidates" => self.max_candidates = parse_num(value)?,
            "max_resample" => self.max_resample = parse_num(value)?,
            "tchebycheff_weights" => {
                self.tchebycheff_weights = if value.trim().eq_ignore_ascii_case("auto") {
                    None
                } else {
                    Some(
                        value
                            .split(',')
                            .map(parse_num::<f64>)
                            .collect::<std::result::Result<Vec<_>, _>>()?,
                    )
                }
            }
            other => return Err(format!("unknown key `{other}`")),
        }
        Ok(())
    }

    pub fn from_kv_str(text: &str, path: &Path) -> Result<Self> {
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let mut cfg = Self::default();
        for (line, k, v) in parse_kv_lines(text, path)? {
            cfg.set(&k, &v, &base_dir).map_err(|msg| Error::Parse {
                path: path.to_path_buf(),
                line,
                msg,
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::from_kv_str(&text, path)
    }

    /// Writes the config back in the key/value format (the channel table is
    /// written as a sibling file when it differs from the built-in one).
    pub fn to_kv_string(&self) -> String {
        let auto = |b: Option<u32>| b.map_or("auto".to_string(), |b| b.to_string());
        let mut s = String::new();
        let mut kv = |k: &str, v: String| s.push_str(&format!("{k} = {v}\n"));
        kv("num_operators", self.num_operators.to_string());
        kv("total_bandwidth", format!("{:e}", self.total_bandwidth));
        kv("sharing_mode", self.sharing_mode.to_string());
        kv("carrier_freq", format!("{:e}", self.carrier_freq));
        kv("bs_density_per_operator", self.bs_density_per_operator.to_string());
        kv("ue_density_total", self.ue_density_total.to_string());
        kv("area_side", self.area_side.to_string());
        kv("tx_power", format!("{:e}", self.tx_power));
        kv("noise_psd", format!("{:e}", self.noise_psd));
        kv("n_bs_antennas", self.n_bs_antennas.to_string());
        kv("n_ue_antennas", self.n_ue_antennas.to_string());
        kv("n_rf_chains", self.n_rf_chains.to_string());
        kv("bs_codebook_bits", auto(self.bs_codebook_bits));
        kv("ue_codebook_bits", auto(self.ue_codebook_bits));
        kv("precoder", self.precoder.to_string());
        kv("coordination", self.coordination.to_string());
        kv("n_topologies", self.n_topologies.to_string());
        kv("n_fading_samples", self.n_fading_samples.to_string());
        kv("seed", self.seed.to_string());
        kv("single_path", self.single_path.to_string());
        kv("mean_paths", self.mean_paths.to_string());
        match self.los_model {
            LosModel::Exponential { decay_m } => kv("los_decay", decay_m.to_string()),
            LosModel::Always => kv("los_model", "always".into()),
            LosModel::Never => kv("los_model", "never".into()),
        }
        kv("min_distance", self.min_distance.to_string());
        kv(
            "rzf_regularizer",
            self.rzf_regularizer.map_or("auto".into(), |c| format!("{c:e}")),
        );
        kv("rzf_rows", self.rzf_rows.to_string());
        kv("combiner_passes", self.combiner_passes.to_string());
        kv("max_candidates", self.max_candidates.to_string());
        kv("max_resample", self.max_resample.to_string());
        kv(
            "tchebycheff_weights",
            self.tchebycheff_weights.as_ref().map_or("auto".into(), |w| {
                w.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
            }),
        );
        s
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.num_operators == 0 {
            return bad("num_operators must be >= 1");
        }
        if !(self.total_bandwidth > 0.0) {
            return bad("total_bandwidth must be > 0");
        }
        if self.sharing_mode == SharingMode::Partial && self.num_operators % 2 != 0 {
            return bad("partial sharing pairs operators and needs an even operator count");
        }
        if !(self.bs_density_per_operator > 0.0) || !(self.ue_density_total > 0.0) {
            return bad("densities must be > 0");
        }
        if !(self.area_side > 0.0) {
            return bad("area_side must be > 0");
        }
        if !(self.tx_power > 0.0) {
            return bad("tx_power must be > 0");
        }
        if !(self.noise_psd >= 0.0) {
            return bad("noise_psd must be >= 0");
        }
        if !(self.carrier_freq > 0.0) {
            return bad("carrier_freq must be > 0");
        }
        if self.n_bs_antennas == 0 || self.n_ue_antennas == 0 {
            return bad("antenna counts must be >= 1");
        }
        if self.n_rf_chains == 0 {
            return bad("n_rf_chains must be >= 1");
        }
        if self.n_fading_samples == 0 {
            return bad("n_fading_samples must be >= 1");
        }
        if !(self.mean_paths > 0.0) {
            return bad("mean_paths must be > 0");
        }
        if let LosModel::Exponential { decay_m } = self.los_model {
            if !(decay_m > 0.0) {
                return bad("los_decay must be > 0");
            }
        }
        if !(self.min_distance > 0.0) {
            return bad("min_distance must be > 0");
        }
        if let Some(c) = self.rzf_regularizer {
            if !(c > 0.0) {
                return bad("rzf_regularizer must be > 0");
            }
        }
        if self.combiner_passes == 0 {
            return bad("combiner_passes must be >= 1");
        }
        if let Some(w) = &self.tchebycheff_weights {
            if w.len() != self.num_operators || w.iter().any(|&x| !(x > 0.0)) {
                return bad("tchebycheff_weights needs one positive weight per operator");
            }
        }
        if self.bs_codebook_bits.is_some_and(|b| b > 20) || self.ue_codebook_bits.is_some_and(|b| b > 20) {
            return bad("codebook resolution above 20 bits is not supported");
        }
        Ok(())
    }

    pub fn area_km2(&self) -> f64 {
        (self.area_side / 1000.0).powi(2)
    }

    pub fn bs_bits(&self) -> u32 {
        self.bs_codebook_bits
            .unwrap_or_else(|| codebook_bits_for(self.n_bs_antennas))
    }

    pub fn ue_bits(&self) -> u32 {
        self.ue_codebook_bits
            .unwrap_or_else(|| codebook_bits_for(self.n_ue_antennas))
    }

    /// Per-BS load cap: RF chains for analog precoding, antennas for digital.
    pub fn load_cap(&self) -> usize {
        if self.precoder.is_digital() {
            self.n_bs_antennas
        } else {
            self.n_rf_chains
        }
    }

    pub fn weights(&self) -> Vec<f64> {
        self.tchebycheff_weights
            .clone()
            .unwrap_or_else(|| vec![1.0 / self.num_operators as f64; self.num_operators])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_setup() {
        let c = ScenarioConfig::default();
        assert_eq!(c.num_operators, 4);
        assert_eq!(c.n_rf_chains, 6);
        assert!((c.total_bandwidth - 2e9).abs() < 1.0);
        assert!((c.tx_power - 0.316_227_766).abs() < 1e-8);
        c.validate().unwrap();
    }

    #[test]
    fn kv_roundtrip() {
        let mut c = ScenarioConfig {
            sharing_mode: SharingMode::Partial,
            precoder: Precoder::Rzf,
            bs_codebook_bits: Some(7),
            tchebycheff_weights: Some(vec![0.1, 0.2, 0.3, 0.4]),
            los_model: LosModel::Never,
            ..Default::default()
        };
        c.rzf_regularizer = Some(1e-3);
        let text = c.to_kv_string();
        let back = ScenarioConfig::from_kv_str(&text, Path::new("x.cfg")).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn rejects_unknown_key_with_line() {
        let err = ScenarioConfig::from_kv_str("seed = 3\nbogus = 1\n", Path::new("a.cfg")).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn partial_needs_even_operators() {
        let c = ScenarioConfig {
            num_operators: 3,
            sharing_mode: SharingMode::Partial,
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn auto_codebook_bits() {
        assert_eq!(codebook_bits_for(1), 0);
        assert_eq!(codebook_bits_for(2), 1);
        assert_eq!(codebook_bits_for(16), 4);
        assert_eq!(codebook_bits_for(17), 5);
        assert_eq!(codebook_bits_for(256), 8);
    }
}
