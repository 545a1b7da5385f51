//! One sampled trial: topology, long-term link statistics, fading samples,
//! codebooks and the analog beam choices of every candidate link.
//!
//! Gains are evaluated in the path domain: for codebook beams,
//! `w_ue^* H w_bs = sum_n c_n (w_ue^* a_UE(aoa_n)) (a_BS(aod_n)^* w_bs)` with
//! `c_n = sqrt(N_BS N_UE / N_paths) g_n`, and each factor is a closed-form
//! array factor. Dense matrices are only built on request.

use std::collections::HashMap;

use crate::beamforming::{bs_factor, build_dft_codebook, ue_factor, BeamChoice, Codebook, PathBeamSearch};
use crate::channel::{sample_gain, sample_path_stats, ChannelRealization, PathStats};
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::linalg::C;
use crate::scalar::Real;
use crate::seeding::{substream, TAG_FADING, TAG_STATS};
use crate::topology::{sample_topology, Topology};

/// Beam choices of one candidate link over all fading samples.
#[derive(Debug, Clone)]
pub struct LinkBeams<T> {
    pub bs: usize,
    pub ue: usize,
    pub choices: Vec<BeamChoice<T>>,
    /// Mean best-beam gain over samples (path loss included).
    pub mean_gain: T,
}

#[derive(Debug, Clone)]
pub struct Network<T> {
    pub config: ScenarioConfig,
    pub topology: Topology,
    pub trial_seed: u64,
    pub cb_bs: Codebook<T>,
    pub cb_ue: Codebook<T>,
    n_samples: usize,
    stats: Vec<PathStats>,
    /// Offsets of each pair's paths in `sin_aoa`/`sin_aod`.
    path_off: Vec<usize>,
    sin_aoa: Vec<T>,
    sin_aod: Vec<T>,
    /// Raw gains `g`, layout `[pair paths][sample][path]`.
    gains: Vec<C<T>>,
    /// Scaled gains `c = sqrt(N_BS N_UE / N_paths) g`, same layout.
    coefs: Vec<C<T>>,
    /// Candidate serving BSs per UE, ascending BS index.
    pub candidates: Vec<Vec<usize>>,
    /// Link id per `(b, u)` pair, `usize::MAX` when absent.
    link_ids: Vec<usize>,
    links: Vec<LinkBeams<T>>,
}

impl<T: Real> Network<T> {
    pub fn new(config: &ScenarioConfig, trial_seed: u64) -> Result<Self> {
        let topology = sample_topology(config, trial_seed)?;
        Self::from_topology(config, topology, trial_seed)
    }

    pub fn from_topology(config: &ScenarioConfig, topology: Topology, trial_seed: u64) -> Result<Self> {
        config.validate()?;
        if topology.num_operators != config.num_operators {
            return Err(Error::InvalidConfig(format!(
                "topology has {} operators, config {}",
                topology.num_operators, config.num_operators
            )));
        }
        topology
            .check(config.load_cap())
            .map_err(Error::Infeasible)?;
        let nb = topology.bss.len();
        let nu = topology.ues.len();
        let s_count = config.n_fading_samples;

        let mut stats = Vec::with_capacity(nb * nu);
        let mut path_off = Vec::with_capacity(nb * nu + 1);
        let mut sin_aoa = Vec::new();
        let mut sin_aod = Vec::new();
        let mut gains = Vec::new();
        let mut coefs = Vec::new();
        let ant = (config.n_bs_antennas * config.n_ue_antennas) as f64;
        path_off.push(0);
        for b in 0..nb {
            for u in 0..nu {
                let d = topology.bs_ue_distance(b, u);
                let mut rng = substream(trial_seed, &[TAG_STATS, b as u64, u as u64]);
                let st = sample_path_stats(d, config, &mut rng);
                sin_aoa.extend(st.aoa.iter().map(|a| T::lit(a.sin())));
                sin_aod.extend(st.aod.iter().map(|a| T::lit(a.sin())));
                path_off.push(sin_aoa.len());
                let scale = T::lit((ant / st.n_paths as f64).sqrt());
                let mut frng = substream(trial_seed, &[TAG_FADING, b as u64, u as u64]);
                for _ in 0..s_count {
                    for _ in 0..st.n_paths {
                        let g: C<T> = sample_gain(st.path_loss, &mut frng);
                        gains.push(g);
                        coefs.push(g * scale);
                    }
                }
                stats.push(st);
            }
        }

        let cb_bs = build_dft_codebook(config.n_bs_antennas, config.bs_bits());
        let cb_ue = build_dft_codebook(config.n_ue_antennas, config.ue_bits());
        let mut net = Self {
            config: config.clone(),
            topology,
            trial_seed,
            cb_bs,
            cb_ue,
            n_samples: s_count,
            stats,
            path_off,
            sin_aoa,
            sin_aod,
            gains,
            coefs,
            candidates: Vec::new(),
            link_ids: vec![usize::MAX; nb * nu],
            links: Vec::new(),
        };
        net.candidates = net.select_candidates();
        let mut ensured = net.ensure_feasible_candidates();
        for _ in 0..2 {
            if ensured {
                break;
            }
            ensured = net.ensure_feasible_candidates();
        }
        let wanted: Vec<(usize, usize)> = (0..nu)
            .flat_map(|u| net.candidates[u].iter().map(move |&b| (b, u)))
            .collect();
        for (b, u) in wanted {
            net.add_link(b, u)?;
        }
        Ok(net)
    }

    fn select_candidates(&self) -> Vec<Vec<usize>> {
        let k = self.config.max_candidates;
        (0..self.n_ue())
            .map(|u| {
                let z = self.topology.ues[u].operator;
                let mut bs = self.topology.bss_of(z);
                bs.sort_by(|&a, &b| {
                    self.stats(b, u)
                        .path_loss
                        .total_cmp(&self.stats(a, u).path_loss)
                        .then(a.cmp(&b))
                });
                if k > 0 {
                    bs.truncate(k);
                }
                bs.sort_unstable();
                bs
            })
            .collect()
    }

    /// Widens candidate sets until every operator's UEs fit under the load
    /// cap. Returns whether no widening was needed.
    fn ensure_feasible_candidates(&mut self) -> bool {
        let cap = self.config.load_cap();
        let mut clean = true;
        for z in 0..self.config.num_operators {
            let ues = self.topology.ues_of(z);
            let (_, unmatched) = capacitated_matching(&ues, &self.candidates, self.n_bs(), cap);
            if unmatched.is_empty() {
                continue;
            }
            clean = false;
            let all = self.topology.bss_of(z);
            let widen: Vec<usize> = if unmatched.len() < ues.len() {
                unmatched
            } else {
                ues.clone()
            };
            for u in widen {
                self.candidates[u] = all.clone();
            }
            let (_, still) = capacitated_matching(&ues, &self.candidates, self.n_bs(), cap);
            if !still.is_empty() {
                for &u in &ues {
                    self.candidates[u] = all.clone();
                }
            }
        }
        clean
    }

    fn add_link(&mut self, b: usize, u: usize) -> Result<usize> {
        if let Some(id) = self.link_id(b, u) {
            return Ok(id);
        }
        let (sa, sd) = self.path_sines(b, u);
        let search = PathBeamSearch::new(sa, sd, &self.cb_ue, &self.cb_bs);
        let mut choices = Vec::with_capacity(self.n_samples);
        let mut sum = T::zero();
        for s in 0..self.n_samples {
            let ch = search.search(self.coefs(b, u, s))?;
            sum += ch.gain;
            choices.push(ch);
        }
        let id = self.links.len();
        self.links.push(LinkBeams {
            bs: b,
            ue: u,
            choices,
            mean_gain: sum / T::from_usize_lossy(self.n_samples),
        });
        let p = self.pair(b, u);
        self.link_ids[p] = id;
        Ok(id)
    }

    pub fn n_bs(&self) -> usize {
        self.topology.bss.len()
    }

    pub fn n_ue(&self) -> usize {
        self.topology.ues.len()
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn num_operators(&self) -> usize {
        self.config.num_operators
    }

    #[inline]
    pub fn pair(&self, b: usize, u: usize) -> usize {
        b * self.n_ue() + u
    }

    pub fn stats(&self, b: usize, u: usize) -> &PathStats {
        &self.stats[self.pair(b, u)]
    }

    #[inline]
    pub fn path_sines(&self, b: usize, u: usize) -> (&[T], &[T]) {
        let p = self.pair(b, u);
        let r = self.path_off[p]..self.path_off[p + 1];
        (&self.sin_aoa[r.clone()], &self.sin_aod[r])
    }

    #[inline]
    fn sample_range(&self, b: usize, u: usize, s: usize) -> std::ops::Range<usize> {
        let p = self.pair(b, u);
        let np = self.path_off[p + 1] - self.path_off[p];
        let start = self.path_off[p] * self.n_samples + s * np;
        start..start + np
    }

    /// Scaled path gains of link `(b, u)` in sample `s`.
    #[inline]
    pub fn coefs(&self, b: usize, u: usize, s: usize) -> &[C<T>] {
        &self.coefs[self.sample_range(b, u, s)]
    }

    /// The channel of link `(b, u)` in sample `s`.
    pub fn realization(&self, b: usize, u: usize, s: usize) -> ChannelRealization<'_, T> {
        ChannelRealization {
            stats: self.stats(b, u),
            gains: self.gains[self.sample_range(b, u, s)].to_vec(),
            n_bs: self.config.n_bs_antennas,
            n_ue: self.config.n_ue_antennas,
        }
    }

    #[inline]
    pub fn link_id(&self, b: usize, u: usize) -> Option<usize> {
        if b >= self.n_bs() || u >= self.n_ue() {
            return None;
        }
        let id = self.link_ids[self.pair(b, u)];
        (id != usize::MAX).then_some(id)
    }

    pub fn links(&self) -> &[LinkBeams<T>] {
        &self.links
    }

    pub fn link(&self, b: usize, u: usize) -> Result<&LinkBeams<T>> {
        self.link_id(b, u)
            .map(|id| &self.links[id])
            .ok_or(Error::MissingChannel { bs: b, ue: u })
    }

    pub fn beam(&self, b: usize, u: usize, s: usize) -> Result<BeamChoice<T>> {
        Ok(self.link(b, u)?.choices[s])
    }

    /// `|w^* H_iv w'|^2` where `w` is UE codebook entry `ue_cw` and `w'` BS
    /// codebook entry `bs_cw`. Bitwise equal to the gain the beam search
    /// reports for the same pair.
    #[inline]
    pub fn cross_gain(&self, v: usize, ue_cw: u32, i: usize, bs_cw: u32, s: usize) -> T {
        let (sa, sd) = self.path_sines(i, v);
        let coefs = self.coefs(i, v, s);
        let su = self.cb_ue.sines[ue_cw as usize];
        let sb = self.cb_bs.sines[bs_cw as usize];
        let nu = self.config.n_ue_antennas;
        let nb = self.config.n_bs_antennas;
        let mut acc = C::new(T::zero(), T::zero());
        for n in 0..coefs.len() {
            acc += (coefs[n] * ue_factor(nu, su, sa[n])) * bs_factor(nb, sb, sd[n]);
        }
        acc.norm_sqr()
    }

    /// Per-path receive factors `w^* a_UE(aoa_n)` of link `(i, v)` for UE
    /// codebook entry `ue_cw`.
    pub fn ue_factors_into(&self, v: usize, ue_cw: u32, i: usize, out: &mut Vec<C<T>>) {
        let (sa, _) = self.path_sines(i, v);
        let su = self.cb_ue.sines[ue_cw as usize];
        let nu = self.config.n_ue_antennas;
        out.clear();
        out.extend(sa.iter().map(|&a| ue_factor(nu, su, a)));
    }

    /// Per-path transmit factors `a_BS(aod_n)^* w'` of link `(i, v)` for BS
    /// codebook entry `bs_cw`.
    pub fn bs_factors_into(&self, v: usize, i: usize, bs_cw: u32, out: &mut Vec<C<T>>) {
        let (_, sd) = self.path_sines(i, v);
        let sb = self.cb_bs.sines[bs_cw as usize];
        let nb = self.config.n_bs_antennas;
        out.clear();
        out.extend(sd.iter().map(|&d| bs_factor(nb, sb, d)));
    }

    /// Same value as [`Network::cross_gain`] from precomputed factors.
    #[inline]
    pub fn gain_from_factors(&self, v: usize, i: usize, s: usize, uf: &[C<T>], bf: &[C<T>]) -> T {
        let coefs = self.coefs(i, v, s);
        let mut acc = C::new(T::zero(), T::zero());
        for n in 0..coefs.len() {
            acc += (coefs[n] * uf[n]) * bf[n];
        }
        acc.norm_sqr()
    }

    /// Combined row `w^* H_iv` (length `N_BS`) for UE codebook entry `ue_cw`.
    pub fn combined_row(&self, v: usize, ue_cw: u32, i: usize, s: usize) -> Vec<C<T>> {
        let (sa, sd) = self.path_sines(i, v);
        let coefs = self.coefs(i, v, s);
        let su = self.cb_ue.sines[ue_cw as usize];
        let nu = self.config.n_ue_antennas;
        let nb = self.config.n_bs_antennas;
        let inv = T::one() / T::from_usize_lossy(nb).sqrt();
        let mut row = vec![C::new(T::zero(), T::zero()); nb];
        for n in 0..coefs.len() {
            let q = coefs[n] * ue_factor(nu, su, sa[n]) * inv;
            let step = -T::PI() * sd[n];
            for (k, r) in row.iter_mut().enumerate() {
                *r += q * C::from_polar(T::one(), T::from_usize_lossy(k) * step);
            }
        }
        row
    }

    /// `t_n = a_BS(aod_n)^* w` for an arbitrary precoder `w`.
    pub fn departure_projection(&self, b: usize, u: usize, w: &[C<T>]) -> Vec<C<T>> {
        let (_, sd) = self.path_sines(b, u);
        let nb = self.config.n_bs_antennas;
        sd.iter()
            .map(|&s| {
                let a = crate::channel::ula_response_sine(s, nb);
                crate::linalg::inner(a.as_slice(), w)
            })
            .collect()
    }

    /// Best UE combiner for a given precoder on link `(b, u)` in sample `s`.
    pub fn best_combiner(&self, b: usize, u: usize, s: usize, w_bs: &[C<T>]) -> u32 {
        let t = self.departure_projection(b, u, w_bs);
        let (sa, _) = self.path_sines(b, u);
        let coefs = self.coefs(b, u, s);
        let nu = self.config.n_ue_antennas;
        let mut best = (0u32, T::neg_infinity());
        for (cw, &su) in self.cb_ue.sines.iter().enumerate() {
            let mut acc = C::new(T::zero(), T::zero());
            for n in 0..coefs.len() {
                acc += (coefs[n] * ue_factor(nu, su, sa[n])) * t[n];
            }
            let g = acc.norm_sqr();
            if g > best.1 {
                best = (cw as u32, g);
            }
        }
        best.0
    }
}

/// Capacitated bipartite matching by augmenting paths. Returns the serving
/// BS per UE (indexed like `ues`) and the UEs left unmatched.
pub fn capacitated_matching(
    ues: &[usize],
    candidates: &[Vec<usize>],
    n_bs: usize,
    cap: usize,
) -> (Vec<Option<usize>>, Vec<usize>) {
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_bs];
    let mut serving: HashMap<usize, usize> = HashMap::new();
    let mut unmatched = Vec::new();

    fn try_place(
        u: usize,
        candidates: &[Vec<usize>],
        cap: usize,
        members: &mut [Vec<usize>],
        serving: &mut HashMap<usize, usize>,
        visited: &mut [bool],
    ) -> bool {
        for &b in &candidates[u] {
            if !visited[b] && members[b].len() < cap {
                visited[b] = true;
                members[b].push(u);
                serving.insert(u, b);
                return true;
            }
        }
        for &b in &candidates[u] {
            if visited[b] {
                continue;
            }
            visited[b] = true;
            let occupants = members[b].clone();
            for w in occupants {
                // Temporarily free w's slot and try to re-place it elsewhere.
                members[b].retain(|&x| x != w);
                serving.remove(&w);
                if try_place(w, candidates, cap, members, serving, visited) {
                    members[b].push(u);
                    serving.insert(u, b);
                    return true;
                }
                members[b].push(w);
                serving.insert(w, b);
            }
        }
        false
    }

    for &u in ues {
        let mut visited = vec![false; n_bs];
        if !try_place(u, candidates, cap, &mut members, &mut serving, &mut visited) {
            unmatched.push(u);
        }
    }
    (ues.iter().map(|u| serving.get(u).copied()).collect(), unmatched)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beamforming::analog_beam_search;
    use crate::linalg::inner;
    use approx::assert_relative_eq;

    fn small_config() -> ScenarioConfig {
        ScenarioConfig {
            area_side: 150.0,
            n_bs_antennas: 16,
            n_ue_antennas: 4,
            n_fading_samples: 3,
            ..Default::default()
        }
    }

    #[test]
    fn matching_respects_capacity() {
        let cands = vec![vec![0], vec![0, 1], vec![0]];
        let (srv, un) = capacitated_matching(&[0, 1, 2], &cands, 2, 2);
        assert!(un.is_empty());
        assert_eq!(srv, vec![Some(0), Some(1), Some(0)]);
        let (_, un) = capacitated_matching(&[0, 1, 2], &cands, 2, 1);
        assert_eq!(un.len(), 1);
    }

    #[test]
    fn beam_choices_match_dense_search() {
        let net = Network::<f64>::new(&small_config(), 3).unwrap();
        for link in net.links().iter().take(5) {
            for s in 0..net.n_samples() {
                let h = net.realization(link.bs, link.ue, s).matrix();
                let dense = analog_beam_search(&h, &net.cb_bs, &net.cb_ue).unwrap();
                let c = link.choices[s];
                assert_eq!((dense.ue_cw, dense.bs_cw), (c.ue_cw, c.bs_cw));
                assert_relative_eq!(dense.gain, c.gain, max_relative = 1e-9);
                assert_eq!(net.cross_gain(link.ue, c.ue_cw, link.bs, c.bs_cw, s), c.gain);
            }
        }
    }

    #[test]
    fn combined_row_matches_dense() {
        let net = Network::<f64>::new(&small_config(), 4).unwrap();
        let (b, u) = (1, 2);
        let h = net.realization(b, u, 1).matrix();
        let w = net.cb_ue.get(3);
        let dense = h.left_mul_conj(w.as_slice()).unwrap();
        let fast = net.combined_row(u, 3, b, 1);
        for (a, f) in dense.iter().zip(&fast) {
            assert!((a - f).norm() < 1e-9 * (1.0 + a.norm()));
        }
        let g = crate::linalg::dotu(&fast, net.cb_bs.get(5).as_slice()).norm_sqr();
        assert_relative_eq!(g, net.cross_gain(u, 3, b, 5, 1), max_relative = 1e-9);
        let hw = h.mul_vec(net.cb_bs.get(5).as_slice()).unwrap();
        assert_relative_eq!(inner(w.as_slice(), &hw).norm_sqr(), g, max_relative = 1e-9);
    }

    #[test]
    fn fading_is_independent_of_antenna_counts() {
        let a = Network::<f64>::new(&small_config(), 8).unwrap();
        let cfg = ScenarioConfig {
            n_bs_antennas: 64,
            n_ue_antennas: 16,
            ..small_config()
        };
        let b = Network::<f64>::new(&cfg, 8).unwrap();
        assert_eq!(a.topology, b.topology);
        assert_eq!(a.realization(0, 0, 2).gains, b.realization(0, 0, 2).gains);
    }

    #[test]
    fn candidates_are_same_operator_and_feasible() {
        let cfg = ScenarioConfig {
            max_candidates: 1,
            ..small_config()
        };
        let net = Network::<f64>::new(&cfg, 9).unwrap();
        for (u, c) in net.candidates.iter().enumerate() {
            assert!(!c.is_empty());
            for &b in c {
                assert_eq!(net.topology.bss[b].operator, net.topology.ues[u].operator);
                assert!(net.link_id(b, u).is_some());
            }
        }
        for z in 0..cfg.num_operators {
            let ues = net.topology.ues_of(z);
            let (_, un) = capacitated_matching(&ues, &net.candidates, net.n_bs(), cfg.load_cap());
            assert!(un.is_empty());
        }
    }
}
