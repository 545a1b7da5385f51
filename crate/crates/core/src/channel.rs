//! Narrowband geometric cluster channel between a BS and a UE.
//!
//! Long-term statistics (path loss, LoS state, path count, angles) are drawn
//! once per association period in [`PathStats`]; complex path gains are
//! redrawn every coherence interval in [`ChannelRealization`].

use std::path::Path;

use num_complex::Complex;
use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::beamforming::BeamVector;
use crate::config::{LosModel, ScenarioConfig};
use crate::error::{Error, Result};
use crate::linalg::{array_factor, inner, CMatrix, C};
use crate::scalar::Real;

/// Response of a half-wavelength ULA with `n` elements toward `theta`:
/// element `k` is `exp(j k pi sin(theta)) / sqrt(n)`.
pub fn ula_response<T: Real>(theta: T, n: usize) -> BeamVector<T> {
    ula_response_sine(theta.sin(), n)
}

/// Same as [`ula_response`] but parameterized by `sin(theta)`.
pub fn ula_response_sine<T: Real>(sine: T, n: usize) -> BeamVector<T> {
    let scale = T::one() / T::from_usize_lossy(n).sqrt();
    let step = T::PI() * sine;
    let v = (0..n)
        .map(|k| Complex::from_polar(scale, T::from_usize_lossy(k) * step))
        .collect();
    BeamVector::from_unit_unchecked(v)
}

/// `a(phi)^* a(theta)` for ULA responses given the two sines.
#[inline]
pub fn steering_overlap<T: Real>(n: usize, sin_phi: T, sin_theta: T) -> C<T> {
    array_factor(n, T::PI() * (sin_theta - sin_phi))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkClass {
    Los,
    Nlos,
}

/// One row of the path-loss table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub carrier_hz: f64,
    pub class: LinkClass,
    /// Path loss at 1 m, dB.
    pub intercept_db: f64,
    pub exponent: f64,
    pub shadow_sigma_db: f64,
}

/// Path-loss parameters per carrier and LoS class.
///
/// Text format, one row per line, `#` comments:
///
/// ```text
/// # carrier_hz  class  intercept_db  exponent  shadow_sigma_db
/// 28e9  los   61.4  2.0   5.8
/// 28e9  nlos  72.0  2.92  8.7
/// ```
///
/// Lookups use the row with the nearest carrier frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelTable {
    pub rows: Vec<ChannelParams>,
}

const BUILTIN_TABLE: &str = "\
28e9  los   61.4  2.0   5.8
28e9  nlos  72.0  2.92  8.7
73e9  los   69.8  2.0   5.8
73e9  nlos  86.6  2.45  8.0
";

impl Default for ChannelTable {
    fn default() -> Self {
        Self::parse(BUILTIN_TABLE, Path::new("<builtin>")).expect("builtin table parses")
    }
}

impl ChannelTable {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut rows = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| Error::Parse {
                path: path.to_path_buf(),
                line: idx + 1,
                msg,
            };
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 5 {
                return Err(err(format!("expected 5 fields, got {}", f.len())));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|e| err(format!("`{s}`: {e}")));
            let class = match f[1].to_ascii_lowercase().as_str() {
                "los" => LinkClass::Los,
                "nlos" => LinkClass::Nlos,
                other => return Err(err(format!("unknown class `{other}`"))),
            };
            let row = ChannelParams {
                carrier_hz: num(f[0])?,
                class,
                intercept_db: num(f[2])?,
                exponent: num(f[3])?,
                shadow_sigma_db: num(f[4])?,
            };
            if !(row.carrier_hz > 0.0) || !(row.exponent > 0.0) || !(row.shadow_sigma_db >= 0.0) {
                return Err(err("carrier and exponent must be > 0, sigma >= 0".into()));
            }
            rows.push(row);
        }
        let table = Self { rows };
        for class in [LinkClass::Los, LinkClass::Nlos] {
            if !table.rows.iter().any(|r| r.class == class) {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: 0,
                    msg: format!("table has no {class:?} row"),
                });
            }
        }
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, path)
    }

    pub fn lookup(&self, carrier_hz: f64, class: LinkClass) -> ChannelParams {
        *self
            .rows
            .iter()
            .filter(|r| r.class == class)
            .min_by(|a, b| {
                let da = (a.carrier_hz - carrier_hz).abs();
                let db = (b.carrier_hz - carrier_hz).abs();
                da.total_cmp(&db)
            })
            .expect("table validated to contain both classes")
    }
}

/// Long-term statistics of one BS-UE link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathStats {
    pub n_paths: usize,
    /// Departure angles at the BS, radians in `[0, 2 pi)`.
    pub aod: Vec<f64>,
    /// Arrival angles at the UE, radians in `[0, 2 pi)`.
    pub aoa: Vec<f64>,
    /// Linear power gain `L` (< 1 for real links).
    pub path_loss: f64,
    pub los: bool,
}

pub fn los_probability(model: LosModel, distance: f64) -> f64 {
    match model {
        LosModel::Exponential { decay_m } => (-distance / decay_m).exp(),
        LosModel::Always => 1.0,
        LosModel::Never => 0.0,
    }
}

/// Draws the long-term statistics of a link of length `distance` meters.
pub fn sample_path_stats<R: Rng + ?Sized>(
    distance: f64,
    config: &ScenarioConfig,
    rng: &mut R,
) -> PathStats {
    let d = distance.max(config.min_distance);
    let los = rng.random::<f64>() < los_probability(config.los_model, d);
    let n_paths = if config.single_path {
        1
    } else {
        let pois = Poisson::new(config.mean_paths).expect("mean_paths validated > 0");
        loop {
            let k = pois.sample(rng) as usize;
            if k >= 1 {
                break k;
            }
        }
    };
    let class = if los { LinkClass::Los } else { LinkClass::Nlos };
    let params = config.channel_table.lookup(config.carrier_freq, class);
    let shadow = if params.shadow_sigma_db > 0.0 {
        Normal::new(0.0, params.shadow_sigma_db)
            .expect("sigma validated")
            .sample(rng)
    } else {
        0.0
    };
    let pl_db = params.intercept_db + 10.0 * params.exponent * d.log10() + shadow;
    let tau = std::f64::consts::TAU;
    let mut angle = || {
        let a = rng.random::<f64>() * tau;
        if a >= tau {
            0.0
        } else {
            a
        }
    };
    let aod: Vec<f64> = (0..n_paths).map(|_| angle()).collect();
    let aoa: Vec<f64> = (0..n_paths).map(|_| angle()).collect();
    PathStats {
        n_paths,
        aod,
        aoa,
        path_loss: 10f64.powf(-pl_db / 10.0),
        los,
    }
}

/// Draws one zero-mean circular complex Gaussian path gain with variance `l`.
pub fn sample_gain<T: Real, R: Rng + ?Sized>(l: f64, rng: &mut R) -> C<T> {
    let s = (l / 2.0).sqrt();
    let x: f64 = StandardNormal.sample(rng);
    let y: f64 = StandardNormal.sample(rng);
    C::new(T::lit(s * x), T::lit(s * y))
}

/// Channel of one coherence interval.
#[derive(Debug, Clone)]
pub struct ChannelRealization<'a, T> {
    pub stats: &'a PathStats,
    pub gains: Vec<C<T>>,
    pub n_bs: usize,
    pub n_ue: usize,
}

pub fn sample_channel<'a, T: Real, R: Rng + ?Sized>(
    stats: &'a PathStats,
    n_bs: usize,
    n_ue: usize,
    rng: &mut R,
) -> ChannelRealization<'a, T> {
    let gains = (0..stats.n_paths)
        .map(|_| sample_gain(stats.path_loss, rng))
        .collect();
    ChannelRealization {
        stats,
        gains,
        n_bs,
        n_ue,
    }
}

impl<T: Real> ChannelRealization<'_, T> {
    /// `sqrt(N_BS N_UE / N_paths)`.
    pub fn scale(&self) -> T {
        T::from_usize_lossy(self.n_bs * self.n_ue).sqrt()
            / T::from_usize_lossy(self.stats.n_paths).sqrt()
    }

    /// Dense `N_UE x N_BS` matrix `sum_n scale g_n a_UE(aoa_n) a_BS(aod_n)^*`.
    pub fn matrix(&self) -> CMatrix<T> {
        let mut h = CMatrix::zeros(self.n_ue, self.n_bs);
        let scale = self.scale();
        for n in 0..self.stats.n_paths {
            let a_ue = ula_response(T::lit(self.stats.aoa[n]), self.n_ue);
            let a_bs = ula_response(T::lit(self.stats.aod[n]), self.n_bs);
            let g = self.gains[n] * scale;
            for (r, ar) in a_ue.as_slice().iter().enumerate() {
                let gr = g * ar;
                for (c, ac) in a_bs.as_slice().iter().enumerate() {
                    *h.get_mut(r, c) += gr * ac.conj();
                }
            }
        }
        h
    }

    /// `w_ue^* H w_bs` evaluated per path without forming `H`.
    pub fn bilinear(&self, w_ue: &[C<T>], w_bs: &[C<T>]) -> C<T> {
        let scale = self.scale();
        let mut acc = C::new(T::zero(), T::zero());
        for n in 0..self.stats.n_paths {
            let a_ue = ula_response(T::lit(self.stats.aoa[n]), self.n_ue);
            let a_bs = ula_response(T::lit(self.stats.aod[n]), self.n_bs);
            acc += self.gains[n] * inner(w_ue, a_ue.as_slice()) * inner(a_bs.as_slice(), w_bs);
        }
        acc * scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::substream;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> C<f64> {
        C::new(re, im)
    }

    #[test]
    fn ula_examples() {
        let v = ula_response(0.0f64, 4);
        for z in v.as_slice() {
            assert!((z - c(0.5, 0.0)).norm() < 1e-15);
        }
        let v = ula_response(std::f64::consts::FRAC_PI_2, 2);
        let s = 1.0 / 2f64.sqrt();
        assert!((v.as_slice()[0] - c(s, 0.0)).norm() < 1e-15);
        assert!((v.as_slice()[1] - c(-s, 0.0)).norm() < 1e-15);
        for n in [1, 3, 16, 100] {
            let v = ula_response(1.234f64, n);
            assert_relative_eq!(inner(v.as_slice(), v.as_slice()).re, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn overlap_matches_inner_product() {
        let n = 33;
        let (a, b) = (0.4f64, 2.9f64);
        let va = ula_response(a, n);
        let vb = ula_response(b, n);
        let direct = inner(va.as_slice(), vb.as_slice());
        let closed = steering_overlap(n, a.sin(), b.sin());
        assert!((direct - closed).norm() < 1e-12);
    }

    #[test]
    fn builtin_table_nlos_exponent_exceeds_los() {
        let t = ChannelTable::default();
        for f in [28e9, 73e9] {
            let los = t.lookup(f, LinkClass::Los);
            let nlos = t.lookup(f, LinkClass::Nlos);
            assert!(nlos.exponent > los.exponent);
        }
        // 32 GHz falls back to the 28 GHz row.
        assert_eq!(t.lookup(32e9, LinkClass::Nlos).carrier_hz, 28e9);
    }

    #[test]
    fn shipped_table_file_matches_builtin() {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/channel_params.txt");
        assert_eq!(ChannelTable::load(&path).unwrap(), ChannelTable::default());
    }

    #[test]
    fn table_parse_errors_carry_line() {
        let err = ChannelTable::parse("28e9 los 1 2 3\n28e9 foo 1 2 3\n", Path::new("t")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn path_loss_follows_distance_law() {
        let cfg = ScenarioConfig {
            los_model: LosModel::Never,
            ..Default::default()
        };
        let a = sample_path_stats(40.0, &cfg, &mut substream(5, &[1]));
        let b = sample_path_stats(80.0, &cfg, &mut substream(5, &[1]));
        let exp = cfg.channel_table.lookup(cfg.carrier_freq, LinkClass::Nlos).exponent;
        assert_relative_eq!(b.path_loss / a.path_loss, 2f64.powf(-exp), max_relative = 1e-12);
        assert_eq!(a.aod, b.aod);
    }

    #[test]
    fn zero_distance_is_clamped() {
        let cfg = ScenarioConfig::default();
        let a = sample_path_stats(0.0, &cfg, &mut substream(9, &[]));
        let b = sample_path_stats(cfg.min_distance, &cfg, &mut substream(9, &[]));
        assert_eq!(a, b);
        assert!(a.path_loss.is_finite() && a.path_loss > 0.0);
    }

    #[test]
    fn stats_invariants() {
        let cfg = ScenarioConfig::default();
        let mut rng = substream(3, &[]);
        for i in 0..500 {
            let s = sample_path_stats(1.0 + i as f64, &cfg, &mut rng);
            assert!(s.n_paths >= 1);
            assert_eq!(s.aod.len(), s.n_paths);
            assert!(s.aod.iter().chain(&s.aoa).all(|&a| (0.0..std::f64::consts::TAU).contains(&a)));
            assert!(s.path_loss > 0.0);
        }
    }

    #[test]
    fn angles_are_uniform_ks() {
        let cfg = ScenarioConfig::default();
        let mut rng = substream(4, &[]);
        let mut xs: Vec<f64> = Vec::new();
        while xs.len() < 4000 {
            let s = sample_path_stats(50.0, &cfg, &mut rng);
            xs.extend(s.aod.iter().chain(&s.aoa).map(|a| a / std::f64::consts::TAU));
        }
        xs.sort_by(f64::total_cmp);
        let n = xs.len() as f64;
        let d = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| ((i + 1) as f64 / n - x).max(x - i as f64 / n))
            .fold(0.0, f64::max);
        // 1% critical value of the one-sample KS statistic.
        assert!(d < 1.628 / n.sqrt(), "D = {d}");
    }

    fn single_path_stats(aod: f64, aoa: f64) -> PathStats {
        PathStats {
            n_paths: 1,
            aod: vec![aod],
            aoa: vec![aoa],
            path_loss: 1.0,
            los: true,
        }
    }

    #[test]
    fn unit_single_path_frobenius() {
        let stats = single_path_stats(0.7, 2.1);
        let ch = ChannelRealization::<f64> {
            stats: &stats,
            gains: vec![c(1.0, 0.0)],
            n_bs: 16,
            n_ue: 4,
        };
        assert_relative_eq!(ch.matrix().frobenius_sqr(), 64.0, max_relative = 1e-12);
    }

    #[test]
    fn single_path_matrix_is_rank_one() {
        let stats = single_path_stats(1.1, 4.0);
        let mut rng = substream(1, &[]);
        let ch = sample_channel::<f64, _>(&stats, 6, 4, &mut rng);
        let h = ch.matrix();
        // Every 2x2 minor vanishes.
        for r1 in 0..4 {
            for r2 in r1 + 1..4 {
                for c1 in 0..6 {
                    for c2 in c1 + 1..6 {
                        let det = h.get(r1, c1) * h.get(r2, c2) - h.get(r1, c2) * h.get(r2, c1);
                        assert!(det.norm() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn mean_frobenius_matches_path_loss() {
        let stats = PathStats {
            n_paths: 3,
            aod: vec![0.1, 1.0, 2.0],
            aoa: vec![3.0, 4.0, 5.0],
            path_loss: 2.5e-9,
            los: false,
        };
        let (nb, nu) = (8, 4);
        let mut rng = substream(2, &[]);
        let trials = 10_000;
        let mut acc = 0.0;
        for _ in 0..trials {
            acc += sample_channel::<f64, _>(&stats, nb, nu, &mut rng).matrix().frobenius_sqr();
        }
        let mean = acc / trials as f64;
        let expect = (nb * nu) as f64 * stats.path_loss;
        assert!((mean / expect - 1.0).abs() < 0.05, "{mean} vs {expect}");
    }

    #[test]
    fn bilinear_matches_dense_matrix() {
        let stats = PathStats {
            n_paths: 2,
            aod: vec![0.3, 5.0],
            aoa: vec![1.3, 2.2],
            path_loss: 1.0,
            los: false,
        };
        let ch = sample_channel::<f64, _>(&stats, 8, 3, &mut substream(8, &[]));
        let h = ch.matrix();
        let w_ue = ula_response(0.9f64, 3);
        let w_bs = ula_response(4.4f64, 8);
        let hw = h.mul_vec(w_bs.as_slice()).unwrap();
        let dense = inner(w_ue.as_slice(), &hw);
        assert!((dense - ch.bilinear(w_ue.as_slice(), w_bs.as_slice())).norm() < 1e-12);
    }

    #[test]
    fn reconstruction_is_bit_deterministic() {
        let stats = single_path_stats(0.5, 0.6);
        let a = sample_channel::<f64, _>(&stats, 8, 2, &mut substream(1, &[2]));
        let b = sample_channel::<f64, _>(&stats, 8, 2, &mut substream(1, &[2]));
        assert_eq!(a.matrix(), b.matrix());
    }
}
