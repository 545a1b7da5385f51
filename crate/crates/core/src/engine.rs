//! Association-dependent rate evaluation.
//!
//! An [`Objective`] holds one association and the per-operator utilities it
//! yields, and can score tentative reassignments without committing them.
//! Analog precoding uses an incremental evaluator; digital precoding
//! recomputes precoders for every candidate because they depend on the whole
//! set of served UEs.

use crate::analog::AnalogEngine;
use crate::association::Association;
use crate::config::{Coordination, Precoder};
use crate::digital::DigitalEngine;
use crate::error::Result;
use crate::metrics::{InterOperator, RateReport};
use crate::network::Network;
use crate::scalar::Real;
use crate::topology::BandPlan;

/// What an evaluator computes.
#[derive(Debug, Clone, PartialEq)]
pub struct EngineSpec {
    pub band: BandPlan,
    pub inter_operator: InterOperator,
    /// Operators whose UEs are evaluated; the others only transmit.
    pub scope_ops: Vec<usize>,
    pub precoder: Precoder,
    /// Information available to digital precoders.
    pub coordination: Coordination,
}

impl EngineSpec {
    /// Whether BSs of operator `k` interfere with UEs of operator `z`.
    #[inline]
    pub fn relevant(&self, z: usize, k: usize) -> bool {
        self.band.co_channel(z, k) && (z == k || self.inter_operator == InterOperator::Actual)
    }

    pub fn in_scope(&self, z: usize) -> bool {
        self.scope_ops.contains(&z)
    }
}

/// A `(ue, new serving BS)` reassignment.
pub type Change = (usize, usize);

pub trait Objective {
    fn association(&self) -> &Association;

    /// Utility per operator; `NaN` outside the scope.
    fn utilities(&self) -> &[f64];

    /// Utilities after applying `changes`, without committing them.
    fn propose(&mut self, changes: &[Change]) -> Result<Vec<f64>>;

    fn commit(&mut self, changes: &[Change]) -> Result<()>;

    /// Rates and interference of the UEs in scope for the current state.
    fn report(&self) -> RateReport;
}

pub fn make_engine<'a, T: Real>(
    net: &'a Network<T>,
    spec: EngineSpec,
    assoc: &Association,
) -> Result<Box<dyn Objective + 'a>> {
    Ok(if spec.precoder.is_digital() {
        Box::new(DigitalEngine::new(net, spec, assoc)?)
    } else {
        Box::new(AnalogEngine::new(net, spec, assoc)?)
    })
}

/// Fresh evaluation of `assoc` under `spec`.
pub fn evaluate<T: Real>(net: &Network<T>, spec: EngineSpec, assoc: &Association) -> Result<RateReport> {
    if spec.precoder.is_digital() {
        Ok(DigitalEngine::new(net, spec, assoc)?.report())
    } else {
        Ok(AnalogEngine::evaluate_only(net, spec, assoc)?.report())
    }
}
