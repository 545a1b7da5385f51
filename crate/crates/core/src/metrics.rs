//! Received power decomposition, long-term rates and operator utilities.

use serde::{Deserialize, Serialize};

use crate::association::Association;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::topology::{BandPlan, Topology};

/// Powers seen by one UE in one coherence interval, watts.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct InterferenceBreakdown<T> {
    pub desired: T,
    /// From the serving BS's other streams.
    pub intra_cell: T,
    /// From other BSs of the same operator.
    pub inter_cell: T,
    /// From co-channel BSs of other operators.
    pub inter_operator: T,
    /// `W_z sigma^2`.
    pub noise: T,
}

impl<T: Real> InterferenceBreakdown<T> {
    pub fn interference(&self) -> T {
        self.intra_cell + self.inter_cell + self.inter_operator
    }

    pub fn sinr(&self) -> T {
        self.desired / (self.interference() + self.noise)
    }
}

/// Whether inter-operator interference enters the computed rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterOperator {
    Actual,
    /// The estimate `I3 = 0` used by operators that do not coordinate.
    Ignored,
}

/// Per-stream transmit power of every BS.
#[derive(Debug, Clone, PartialEq)]
pub enum PowerModel<T> {
    /// Total power `p` split over the active RF chains; a BS with more UEs
    /// than `n_rf` chains time-shares them.
    Analog { p: T, n_rf: usize },
    /// Per-BS normalizer `lambda_b` applied to unit-norm precoder columns.
    Digital { lambda: Vec<T> },
}

impl<T: Real> PowerModel<T> {
    /// Average power of each stream of BS `i`, as seen by interference.
    #[inline]
    pub fn stream_power(&self, i: usize, load: usize) -> T {
        match self {
            PowerModel::Analog { p, .. } => *p / T::from_usize_lossy(load.max(1)),
            PowerModel::Digital { lambda } => lambda[i],
        }
    }

    /// Power of the stream toward a served UE while it is scheduled.
    #[inline]
    pub fn desired_power(&self, b: usize, load: usize) -> T {
        match self {
            PowerModel::Analog { p, n_rf } => *p / T::from_usize_lossy(load.clamp(1, *n_rf)),
            PowerModel::Digital { lambda } => lambda[b],
        }
    }

    /// Fraction of time a UE of BS `b` is scheduled: `min(1, N_r / N_b)`.
    #[inline]
    pub fn time_share(&self, load: usize) -> T {
        match self {
            PowerModel::Analog { n_rf, .. } if load > *n_rf => {
                T::from_usize_lossy(*n_rf) / T::from_usize_lossy(load)
            }
            _ => T::one(),
        }
    }
}

/// Evaluates the desired/interference terms of UE `u` term by term.
///
/// `gain(i, j)` must return `|(w_u)^* H_iu w_ij|^2` for the combiner of `u`
/// and the precoder BS `i` uses toward UE `j`.
pub fn interference_breakdown<T, G>(
    topology: &Topology,
    association: &Association,
    band: &BandPlan,
    power: &PowerModel<T>,
    noise_psd: f64,
    u: usize,
    inter_operator: InterOperator,
    mut gain: G,
) -> Result<InterferenceBreakdown<T>>
where
    T: Real,
    G: FnMut(usize, usize) -> T,
{
    let b = association.serving(u).ok_or(Error::UnassociatedUe(u))?;
    let z = topology.ues[u].operator;
    let mut out = InterferenceBreakdown {
        noise: T::lit(band.bandwidth(z) * noise_psd),
        ..Default::default()
    };
    for (i, members) in association.cells().iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        let k = topology.bss[i].operator;
        if !band.co_channel(z, k) {
            continue;
        }
        if k != z && inter_operator == InterOperator::Ignored {
            continue;
        }
        let load = members.len();
        let sp = power.stream_power(i, load);
        let mut sum = T::zero();
        for &j in members {
            if i == b && j == u {
                out.desired = power.desired_power(b, load) * gain(i, j);
            } else {
                sum += gain(i, j);
            }
        }
        let term = sp * sum;
        if i == b {
            out.intra_cell += term;
        } else if k == z {
            out.inter_cell += term;
        } else {
            out.inter_operator += term;
        }
    }
    Ok(out)
}

/// `W log2(1 + SINR)`.
#[inline]
pub fn shannon_rate<T: Real>(bandwidth: T, sinr: T) -> T {
    bandwidth * sinr.ln_1p() / T::LN_2()
}

/// Monte Carlo long-term rate: mean of `W log2(1 + SINR)` over `n_samples`
/// independent coherence intervals drawn from `sampler`.
pub fn average_rate<T, F>(mut sampler: F, bandwidth: T, n_samples: usize) -> Result<T>
where
    T: Real,
    F: FnMut(usize) -> Result<InterferenceBreakdown<T>>,
{
    if n_samples == 0 {
        return Err(Error::InvalidConfig("n_samples must be >= 1".into()));
    }
    let mut acc = T::zero();
    for s in 0..n_samples {
        acc += shannon_rate(bandwidth, sampler(s)?.sinr());
    }
    Ok(acc / T::from_usize_lossy(n_samples))
}

/// Proportional-fair utility `sum ln r_u` over `ues`; `-inf` if any rate is
/// zero.
pub fn operator_utility(rates: &[f64], ues: &[usize]) -> f64 {
    let mut f = 0.0;
    for &u in ues {
        let r = rates[u];
        if !(r > 0.0) {
            return f64::NEG_INFINITY;
        }
        f += r.ln();
    }
    f
}

/// Percentile with linear interpolation between order statistics.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let t = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * t
}

/// Rates and utilities of one evaluated association.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    /// UE indices, aligned with `per_ue_rate` and `per_ue_interference`.
    pub ues: Vec<usize>,
    pub per_ue_rate: Vec<f64>,
    pub per_operator_utility: Vec<f64>,
    pub p5: f64,
    pub p50: f64,
    pub p95: f64,
    /// Mean over UEs and samples of each component divided by the UE's noise.
    pub mean_i1_over_noise: f64,
    pub mean_i2_over_noise: f64,
    pub mean_i3_over_noise: f64,
    /// Per-UE means of the same ratios, for dumps.
    pub per_ue_interference: Vec<[f64; 3]>,
}

impl RateReport {
    pub fn new(
        ues: Vec<usize>,
        per_ue_rate: Vec<f64>,
        per_operator_utility: Vec<f64>,
        per_ue_interference: Vec<[f64; 3]>,
    ) -> Self {
        let mut sorted = per_ue_rate.clone();
        sorted.sort_by(f64::total_cmp);
        let n = per_ue_interference.len().max(1) as f64;
        let mean = |k: usize| per_ue_interference.iter().map(|x| x[k]).sum::<f64>() / n;
        Self {
            p5: percentile(&sorted, 0.05),
            p50: percentile(&sorted, 0.50),
            p95: percentile(&sorted, 0.95),
            mean_i1_over_noise: mean(0),
            mean_i2_over_noise: mean(1),
            mean_i3_over_noise: mean(2),
            ues,
            per_ue_rate,
            per_operator_utility,
            per_ue_interference,
        }
    }

    pub fn mean_rate(&self) -> f64 {
        self.per_ue_rate.iter().sum::<f64>() / self.per_ue_rate.len().max(1) as f64
    }

    pub fn mean_interference_over_noise(&self) -> f64 {
        self.mean_i1_over_noise + self.mean_i2_over_noise + self.mean_i3_over_noise
    }

    /// Sum of the finite-or-infinite utilities of the evaluated operators.
    pub fn total_utility(&self) -> f64 {
        self.per_operator_utility.iter().filter(|f| !f.is_nan()).sum()
    }

    pub fn rate_of(&self, ue: usize) -> Option<f64> {
        self.ues.iter().position(|&u| u == ue).map(|k| self.per_ue_rate[k])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SharingMode;
    use crate::topology::Node;
    use approx::assert_relative_eq;

    fn node(operator: usize, x: f64) -> Node {
        Node { x, y: 0.0, operator }
    }

    #[test]
    fn unit_sinr_rate_is_bandwidth() {
        let b = InterferenceBreakdown {
            desired: 2.0,
            intra_cell: 0.5,
            inter_cell: 0.25,
            inter_operator: 0.25,
            noise: 1.0,
        };
        let r = average_rate(|_| Ok(b), 2e9, 7).unwrap();
        assert_relative_eq!(r, 2e9, max_relative = 1e-12);
        let zero = InterferenceBreakdown { noise: 1.0, ..Default::default() };
        assert_eq!(average_rate(|_| Ok(zero), 2e9, 3).unwrap(), 0.0);
    }

    #[test]
    fn doubling_bandwidth_gains_less_than_twice() {
        let sigma2 = 1e-20;
        let p = 1e-9;
        let rate = |w: f64| shannon_rate(w, p / (w * sigma2));
        let ratio = rate(2e9) / rate(1e9);
        assert!(ratio > 1.0 && ratio < 2.0, "{ratio}");
    }

    #[test]
    fn rate_decreases_with_each_interference_term() {
        let base = InterferenceBreakdown {
            desired: 1.0,
            intra_cell: 0.1,
            inter_cell: 0.1,
            inter_operator: 0.1,
            noise: 0.1,
        };
        let r0 = shannon_rate(1.0, base.sinr());
        for k in 0..3 {
            let mut b = base;
            match k {
                0 => b.intra_cell += 0.3,
                1 => b.inter_cell += 0.3,
                _ => b.inter_operator += 0.3,
            }
            assert!(shannon_rate(1.0, b.sinr()) < r0);
        }
    }

    #[test]
    fn utility_examples() {
        let e = std::f64::consts::E;
        assert_relative_eq!(operator_utility(&[e, e], &[0, 1]), 2.0, epsilon = 1e-12);
        assert!(operator_utility(&[2.0, 2.0], &[0, 1]) > operator_utility(&[1.0, 3.0], &[0, 1]));
        assert_eq!(operator_utility(&[0.0, 1.0], &[0, 1]), f64::NEG_INFINITY);
    }

    #[test]
    fn percentile_interpolates() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(percentile(&xs, 0.5), 3.0);
        assert_relative_eq!(percentile(&xs, 0.05), 1.2);
        assert_relative_eq!(percentile(&xs, 0.95), 4.8);
    }

    #[test]
    fn single_link_has_no_interference() {
        let topo = Topology {
            area_side: 100.0,
            num_operators: 1,
            bss: vec![node(0, 0.0)],
            ues: vec![node(0, 5.0)],
        };
        let assoc = Association::from_serving(1, vec![Some(0)]);
        let band = BandPlan::new(1e9, 1, SharingMode::Full).unwrap();
        let power = PowerModel::Analog { p: 1.0, n_rf: 4 };
        let b = interference_breakdown(&topo, &assoc, &band, &power, 1e-20, 0, InterOperator::Actual, |_, _| 3.0f64).unwrap();
        assert_eq!(b.desired, 3.0);
        assert_eq!(b.interference(), 0.0);
        assert_relative_eq!(b.noise, 1e-11);
    }

    #[test]
    fn components_follow_operator_structure() {
        // BS0, BS1 operator 0; BS2 operator 1. UEs: 0,1 at BS0, 2 at BS1, 3 at BS2.
        let topo = Topology {
            area_side: 100.0,
            num_operators: 2,
            bss: vec![node(0, 0.0), node(0, 1.0), node(1, 2.0)],
            ues: vec![node(0, 0.0), node(0, 0.0), node(0, 0.0), node(1, 0.0)],
        };
        let assoc = Association::from_serving(3, vec![Some(0), Some(0), Some(1), Some(2)]);
        let power = PowerModel::Analog { p: 1.0, n_rf: 4 };
        let full = BandPlan::new(1.0, 2, SharingMode::Full).unwrap();
        let b = interference_breakdown(&topo, &assoc, &full, &power, 0.0, 0, InterOperator::Actual, |_, _| 1.0f64).unwrap();
        assert_eq!(b.desired, 0.5);
        assert_eq!(b.intra_cell, 0.5);
        assert_eq!(b.inter_cell, 1.0);
        assert_eq!(b.inter_operator, 1.0);
        let ign = interference_breakdown(&topo, &assoc, &full, &power, 0.0, 0, InterOperator::Ignored, |_, _| 1.0f64).unwrap();
        assert_eq!(ign.inter_operator, 0.0);
        let excl = BandPlan::new(1.0, 2, SharingMode::Exclusive).unwrap();
        let e = interference_breakdown(&topo, &assoc, &excl, &power, 0.0, 0, InterOperator::Actual, |_, _| 1.0f64).unwrap();
        assert_eq!(e.inter_operator, 0.0);
        let un = Association::from_serving(3, vec![None, Some(0), Some(1), Some(2)]);
        assert!(matches!(
            interference_breakdown(&topo, &un, &full, &power, 0.0, 0, InterOperator::Actual, |_, _| 1.0f64),
            Err(Error::UnassociatedUe(0))
        ));
    }

    #[test]
    fn overloaded_analog_bs_time_shares() {
        let pm = PowerModel::Analog { p: 1.0f64, n_rf: 2 };
        assert_eq!(pm.desired_power(0, 4), 0.5);
        assert_eq!(pm.stream_power(0, 4), 0.25);
        assert_eq!(pm.time_share(4), 0.5);
        assert_eq!(pm.time_share(2), 1.0);
    }
}
