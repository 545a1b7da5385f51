//! Random multi-operator layouts and per-operator bandwidth resolution.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::config::{ScenarioConfig, SharingMode};
use crate::error::{Error, Result};
use crate::seeding::{substream, TAG_TOPOLOGY};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub x: f64,
    pub y: f64,
    pub operator: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    /// Side of the square region; distances wrap around at this period.
    pub area_side: f64,
    pub num_operators: usize,
    pub bss: Vec<Node>,
    pub ues: Vec<Node>,
}

impl Topology {
    /// Wrap-around distance between two points of the region.
    pub fn distance(&self, a: &Node, b: &Node) -> f64 {
        let wrap = |d: f64| {
            let d = d.abs() % self.area_side;
            d.min(self.area_side - d)
        };
        wrap(a.x - b.x).hypot(wrap(a.y - b.y))
    }

    pub fn bs_ue_distance(&self, b: usize, u: usize) -> f64 {
        self.distance(&self.bss[b], &self.ues[u])
    }

    pub fn bss_of(&self, z: usize) -> Vec<usize> {
        (0..self.bss.len()).filter(|&b| self.bss[b].operator == z).collect()
    }

    pub fn ues_of(&self, z: usize) -> Vec<usize> {
        (0..self.ues.len()).filter(|&u| self.ues[u].operator == z).collect()
    }

    /// Checks operator ids, at least one BS per operator, and that every
    /// operator can serve its UEs with `cap` streams per BS.
    pub fn check(&self, cap: usize) -> std::result::Result<(), String> {
        let z = self.num_operators;
        if let Some(n) = self.bss.iter().chain(&self.ues).find(|n| n.operator >= z) {
            return Err(format!("operator id {} out of range", n.operator));
        }
        for op in 0..z {
            let nb = self.bss.iter().filter(|n| n.operator == op).count();
            let nu = self.ues.iter().filter(|n| n.operator == op).count();
            if nb == 0 {
                return Err(format!("operator {op} has no BS"));
            }
            if nu > cap * nb {
                return Err(format!("operator {op} has {nu} UEs for {nb} BSs of {cap} streams"));
            }
        }
        Ok(())
    }
}

/// Draws a layout: Poisson counts per operator, uniform positions, resampled
/// until every operator has a BS and enough streams for its UEs.
pub fn sample_topology(config: &ScenarioConfig, trial_seed: u64) -> Result<Topology> {
    config.validate()?;
    let mut rng = substream(trial_seed, &[TAG_TOPOLOGY]);
    let area = config.area_km2();
    let z = config.num_operators;
    let mean_bs = config.bs_density_per_operator * area;
    let mean_ue = config.ue_density_total / z as f64 * area;
    let cap = config.load_cap();
    let side = config.area_side;

    let count = |mean: f64, rng: &mut crate::seeding::Stream| -> usize {
        if mean <= 0.0 {
            return 0;
        }
        Poisson::new(mean).map(|p| p.sample(rng) as usize).unwrap_or(0)
    };

    let mut last = String::from("no attempt made");
    for _ in 0..config.max_resample.max(1) {
        let mut bss = Vec::new();
        let mut ues = Vec::new();
        for op in 0..z {
            let nb = count(mean_bs, &mut rng);
            let nu = count(mean_ue, &mut rng);
            for _ in 0..nb {
                bss.push(Node {
                    x: rng.random::<f64>() * side,
                    y: rng.random::<f64>() * side,
                    operator: op,
                });
            }
            for _ in 0..nu {
                ues.push(Node {
                    x: rng.random::<f64>() * side,
                    y: rng.random::<f64>() * side,
                    operator: op,
                });
            }
        }
        let topo = Topology {
            area_side: side,
            num_operators: z,
            bss,
            ues,
        };
        match topo.check(cap) {
            Ok(()) => return Ok(topo),
            Err(reason) => last = reason,
        }
    }
    Err(Error::ResampleExhausted {
        attempts: config.max_resample.max(1),
        reason: last,
    })
}

/// Bandwidth available to one operator and the operators sharing it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorBand {
    pub bandwidth: f64,
    pub co_channel: Vec<usize>,
}

pub fn operator_bandwidth(config: &ScenarioConfig, z: usize) -> Result<OperatorBand> {
    operator_bandwidth_for(config.total_bandwidth, config.num_operators, config.sharing_mode, z)
}

pub fn operator_bandwidth_for(
    total: f64,
    num_operators: usize,
    mode: SharingMode,
    z: usize,
) -> Result<OperatorBand> {
    if z >= num_operators {
        return Err(Error::InvalidConfig(format!(
            "operator {z} out of range for {num_operators} operators"
        )));
    }
    Ok(match mode {
        SharingMode::Exclusive => OperatorBand {
            bandwidth: total / num_operators as f64,
            co_channel: vec![z],
        },
        SharingMode::Partial => {
            if num_operators % 2 != 0 {
                return Err(Error::InvalidConfig(
                    "partial sharing needs an even operator count".into(),
                ));
            }
            let first = z - z % 2;
            OperatorBand {
                bandwidth: total / (num_operators / 2) as f64,
                co_channel: vec![first, first + 1],
            }
        }
        SharingMode::Full => OperatorBand {
            bandwidth: total,
            co_channel: (0..num_operators).collect(),
        },
    })
}

/// Bandwidths and co-channel relation for all operators under one sharing mode.
#[derive(Debug, Clone, PartialEq)]
pub struct BandPlan {
    pub mode: SharingMode,
    pub bands: Vec<OperatorBand>,
    co: Vec<bool>,
}

impl BandPlan {
    pub fn new(total: f64, num_operators: usize, mode: SharingMode) -> Result<Self> {
        let bands = (0..num_operators)
            .map(|z| operator_bandwidth_for(total, num_operators, mode, z))
            .collect::<Result<Vec<_>>>()?;
        let mut co = vec![false; num_operators * num_operators];
        for (z, band) in bands.iter().enumerate() {
            for &k in &band.co_channel {
                co[z * num_operators + k] = true;
            }
        }
        Ok(Self { mode, bands, co })
    }

    pub fn from_config(config: &ScenarioConfig) -> Result<Self> {
        Self::new(config.total_bandwidth, config.num_operators, config.sharing_mode)
    }

    #[inline]
    pub fn co_channel(&self, z: usize, k: usize) -> bool {
        self.co[z * self.bands.len() + k]
    }

    #[inline]
    pub fn bandwidth(&self, z: usize) -> f64 {
        self.bands[z].bandwidth
    }
}
