//! Monte Carlo simulation of mmWave cellular networks where several
//! operators share spectrum, with analog codebook beamforming or digital
//! (MRT / RZF) precoding, and the association problems that decide which BS
//! serves each UE.
//!
//! Most types are generic over the scalar (`f32` or `f64`); the aliases at
//! the crate root fix the common choices.

pub mod analog;
pub mod association;
pub mod beamforming;
pub mod channel;
pub mod config;
pub mod digital;
pub mod engine;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod metrics;
pub mod network;
pub mod scalar;
pub mod seeding;
pub mod topology;

pub use association::{
    brute_force_oracle, check_association, greedy_association, problem_score, rssi_association, solve,
    tchebycheff_scalarize, Association, OracleSolution, ProblemId, ProblemSpec, Solution,
};
pub use config::{Coordination, LosModel, Precoder, RzfRows, ScenarioConfig, SharingMode};
pub use engine::{evaluate, EngineSpec};
pub use error::{Error, Result};
pub use metrics::{InterOperator, RateReport};
pub use network::Network;
pub use scalar::Real;
pub use topology::{sample_topology, BandPlan, Topology};

pub type Network64 = network::Network<f64>;
pub type Network32 = network::Network<f32>;
pub type BeamVector64 = beamforming::BeamVector<f64>;
pub type BeamVector32 = beamforming::BeamVector<f32>;
pub type Codebook64 = beamforming::Codebook<f64>;
pub type Codebook32 = beamforming::Codebook<f32>;
pub type Complex64 = linalg::C<f64>;
pub type Complex32 = linalg::C<f32>;
