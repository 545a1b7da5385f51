//! Incremental rate evaluator for analog precoding.
//!
//! With codebook beams fixed per link and sample, the gain UE `v` receives
//! from the stream BS `i` sends toward UE `j` depends only on `v`'s combiner
//! (set by `v`'s serving link) and `(i, j)`. The evaluator keeps, per UE in
//! scope, the gains of every candidate stream under its current combiner and
//! per-BS stream sums under each of its candidate combiners, so a move or
//! swap is scored by touching only the BSs whose stream sets change.

use crate::association::Association;
use crate::engine::{Change, EngineSpec, Objective};
use crate::error::{Error, Result};
use crate::linalg::C;
use crate::metrics::{operator_utility, shannon_rate, PowerModel, RateReport};
use crate::network::Network;
use crate::scalar::Real;

const NONE: usize = usize::MAX;

pub struct AnalogEngine<'a, T> {
    net: &'a Network<T>,
    spec: EngineSpec,
    power: PowerModel<T>,
    assoc: Association,
    n_s: usize,
    n_bs: usize,
    n_links: usize,
    victims: Vec<usize>,
    local: Vec<usize>,
    bs_op: Vec<usize>,
    incremental: bool,
    /// `[victim][link][sample]` gain of each candidate stream under the
    /// victim's current combiner.
    cur_block: Vec<T>,
    /// `[victim][bs]` receive factors per sample under the current combiner.
    cur_factors: Vec<Option<Vec<Vec<C<T>>>>>,
    /// Start of each victim's `[candidate][bs][sample]` stream sums (own
    /// stream excluded).
    alt_off: Vec<usize>,
    alt: Vec<T>,
    kcur: Vec<usize>,
    /// `[victim][candidate][sample]` best-beam gain of each candidate link.
    desired: Vec<Vec<T>>,
    /// `[victim][sample]`: intra-cell gain sum, inter-cell and inter-operator
    /// powers.
    intra: Vec<T>,
    icell: Vec<T>,
    iop: Vec<T>,
    noise: Vec<T>,
    bandwidth: Vec<T>,
    rates: Vec<f64>,
    interference: Vec<[f64; 3]>,
    utilities: Vec<f64>,
}

struct BsDelta<T> {
    bs: usize,
    new_load: usize,
    /// Per-stream power before and after, zero for an idle BS.
    sp_old: T,
    sp_new: T,
    leaving: Vec<(usize, usize)>,
    joining: Vec<(usize, usize)>,
}

impl<'a, T: Real> AnalogEngine<'a, T> {
    pub fn new(net: &'a Network<T>, spec: EngineSpec, assoc: &Association) -> Result<Self> {
        Self::build(net, spec, assoc, true)
    }

    /// Evaluator that only reports the given association (no proposals).
    pub fn evaluate_only(net: &'a Network<T>, spec: EngineSpec, assoc: &Association) -> Result<Self> {
        Self::build(net, spec, assoc, false)
    }

    fn build(net: &'a Network<T>, spec: EngineSpec, assoc: &Association, incremental: bool) -> Result<Self> {
        let topo = &net.topology;
        let victims: Vec<usize> = (0..net.n_ue())
            .filter(|&u| spec.in_scope(topo.ues[u].operator))
            .collect();
        let mut local = vec![NONE; net.n_ue()];
        for (vl, &v) in victims.iter().enumerate() {
            local[v] = vl;
        }
        let cfg = &net.config;
        let power = PowerModel::Analog {
            p: T::lit(cfg.tx_power),
            n_rf: cfg.n_rf_chains,
        };
        let noise = victims
            .iter()
            .map(|&v| T::lit(spec.band.bandwidth(topo.ues[v].operator) * cfg.noise_psd))
            .collect();
        let bandwidth = victims
            .iter()
            .map(|&v| T::lit(spec.band.bandwidth(topo.ues[v].operator)))
            .collect();
        let n_v = victims.len();
        let mut eng = Self {
            net,
            power,
            assoc: assoc.clone(),
            n_s: net.n_samples(),
            n_bs: net.n_bs(),
            n_links: net.links().len(),
            bs_op: topo.bss.iter().map(|b| b.operator).collect(),
            local,
            incremental,
            cur_block: Vec::new(),
            cur_factors: Vec::new(),
            alt_off: Vec::new(),
            alt: Vec::new(),
            kcur: vec![0; n_v],
            desired: Vec::with_capacity(n_v),
            intra: vec![T::zero(); n_v * net.n_samples()],
            icell: vec![T::zero(); n_v * net.n_samples()],
            iop: vec![T::zero(); n_v * net.n_samples()],
            noise,
            bandwidth,
            rates: vec![f64::NAN; n_v],
            interference: vec![[0.0; 3]; n_v],
            utilities: vec![f64::NAN; cfg.num_operators],
            victims,
            spec,
        };
        for vl in 0..n_v {
            let v = eng.victims[vl];
            let mut d = Vec::with_capacity(net.candidates[v].len() * eng.n_s);
            for &k in &net.candidates[v] {
                let link = net.link(k, v)?;
                d.extend(link.choices.iter().map(|c| c.gain));
            }
            eng.desired.push(d);
        }
        eng.reset()?;
        Ok(eng)
    }

    #[inline]
    fn rel_bs(&self, v: usize, i: usize) -> bool {
        self.spec
            .relevant(self.net.topology.ues[v].operator, self.bs_op[i])
    }

    #[inline]
    fn combiner(&self, k: usize, v: usize, s: usize) -> Result<u32> {
        Ok(self.net.beam(k, v, s)?.ue_cw)
    }

    fn link(&self, i: usize, j: usize) -> Result<usize> {
        self.net
            .link_id(i, j)
            .ok_or(Error::MissingChannel { bs: i, ue: j })
    }

    /// Gain at victim `v` (combiner of candidate serving BS `k`) of the
    /// stream on link `(i, j)`, per sample.
    fn stream_gain(&self, v: usize, k: usize, i: usize, j: usize, s: usize) -> Result<T> {
        let ck = self.combiner(k, v, s)?;
        let cb = self.net.beam(i, j, s)?.bs_cw;
        Ok(self.net.cross_gain(v, ck, i, cb, s))
    }

    #[inline]
    fn alt_idx(&self, vl: usize, kidx: usize, i: usize, s: usize) -> usize {
        self.alt_off[vl] + (kidx * self.n_bs + i) * self.n_s + s
    }

    #[inline]
    fn cur_idx(&self, vl: usize, l: usize, s: usize) -> usize {
        (vl * self.n_links + l) * self.n_s + s
    }

    fn serving(&self, v: usize) -> Result<usize> {
        self.assoc.serving(v).ok_or(Error::UnassociatedUe(v))
    }

    fn candidate_index(&self, v: usize, k: usize) -> Result<usize> {
        self.net.candidates[v]
            .iter()
            .position(|&b| b == k)
            .ok_or(Error::MissingChannel { bs: k, ue: v })
    }

    /// Forgets a victim's stream gains after its combiner changed.
    fn clear_cur_block(&mut self, vl: usize) {
        let a = self.cur_idx(vl, 0, 0);
        let b = a + self.n_links * self.n_s;
        self.cur_block[a..b].fill(T::nan());
        let c = vl * self.n_bs;
        self.cur_factors[c..c + self.n_bs].fill(None);
    }

    /// Stream gain of link `l` at victim `vl` under its current combiner.
    /// All samples of the link are computed on first use.
    fn ensure_cur(&mut self, vl: usize, l: usize, s: usize) -> Result<T> {
        let idx = self.cur_idx(vl, l, s);
        let g = self.cur_block[idx];
        if !g.is_nan() {
            return Ok(g);
        }
        let v = self.victims[vl];
        let (i, j) = {
            let lk = &self.net.links()[l];
            (lk.bs, lk.ue)
        };
        let fi = vl * self.n_bs + i;
        if self.cur_factors[fi].is_none() {
            let b = self.serving(v)?;
            let combiners: Vec<u32> = (0..self.n_s)
                .map(|s| self.combiner(b, v, s))
                .collect::<Result<_>>()?;
            let table = self.ue_factor_table(v, i, &combiners);
            let per_sample = combiners
                .iter()
                .map(|c| table.iter().find(|(x, _)| x == c).expect("built").1.clone())
                .collect();
            self.cur_factors[fi] = Some(per_sample);
        }
        let mut bf = Vec::new();
        let base = self.cur_idx(vl, l, 0);
        for t in 0..self.n_s {
            self.net.bs_factors_into(v, i, self.net.beam(i, j, t)?.bs_cw, &mut bf);
            let uf = &self.cur_factors[fi].as_ref().expect("filled")[t];
            self.cur_block[base + t] = self.net.gain_from_factors(v, i, t, uf, &bf);
        }
        Ok(self.cur_block[idx])
    }

    /// Receive factors of victim `v` from BS `i` for every distinct
    /// combiner in `combiners`.
    fn ue_factor_table(&self, v: usize, i: usize, combiners: &[u32]) -> Vec<(u32, Vec<C<T>>)> {
        let mut table: Vec<(u32, Vec<C<T>>)> = Vec::new();
        for &c in combiners {
            if table.iter().all(|(x, _)| *x != c) {
                let mut uf = Vec::new();
                self.net.ue_factors_into(v, c, i, &mut uf);
                table.push((c, uf));
            }
        }
        table
    }

    fn reset(&mut self) -> Result<()> {
        let n_v = self.victims.len();
        for vl in 0..n_v {
            let v = self.victims[vl];
            let b = self.serving(v)?;
            self.kcur[vl] = self.candidate_index(v, b)?;
        }
        if self.incremental {
            self.cur_block = vec![T::nan(); n_v * self.n_links * self.n_s];
            self.cur_factors = vec![None; n_v * self.n_bs];
            self.alt_off = Vec::with_capacity(n_v);
            let mut off = 0;
            for &v in &self.victims {
                self.alt_off.push(off);
                off += self.net.candidates[v].len() * self.n_bs * self.n_s;
            }
            self.alt = vec![T::zero(); off];
            let mut bf = Vec::new();
            for vl in 0..n_v {
                let v = self.victims[vl];
                let cands = self.net.candidates[v].clone();
                // combiners[kidx * n_s + s]
                let mut combiners = Vec::with_capacity(cands.len() * self.n_s);
                for &k in &cands {
                    for s in 0..self.n_s {
                        combiners.push(self.combiner(k, v, s)?);
                    }
                }
                for i in 0..self.n_bs {
                    if self.assoc.load(i) == 0 || !self.rel_bs(v, i) {
                        continue;
                    }
                    let table = self.ue_factor_table(v, i, &combiners);
                    let ufs: Vec<&[C<T>]> = combiners
                        .iter()
                        .map(|c| table.iter().find(|(x, _)| x == c).expect("built").1.as_slice())
                        .collect();
                    for &j in self.assoc.cells()[i].iter() {
                        if j == v {
                            continue;
                        }
                        let l = self.link(i, j)?;
                        for s in 0..self.n_s {
                            self.net
                                .bs_factors_into(v, i, self.net.beam(i, j, s)?.bs_cw, &mut bf);
                            for kidx in 0..cands.len() {
                                let g = self.net.gain_from_factors(v, i, s, ufs[kidx * self.n_s + s], &bf);
                                let idx = self.alt_idx(vl, kidx, i, s);
                                self.alt[idx] += g;
                                if kidx == self.kcur[vl] {
                                    let ci = self.cur_idx(vl, l, s);
                                    self.cur_block[ci] = g;
                                }
                            }
                        }
                    }
                }
            }
            for vl in 0..n_v {
                self.aggregate_from_alt(vl);
            }
        } else {
            for vl in 0..n_v {
                self.aggregate_direct(vl)?;
            }
        }
        for vl in 0..n_v {
            self.refresh_rate(vl)?;
        }
        self.refresh_utilities();
        Ok(())
    }

    fn aggregate_from_alt(&mut self, vl: usize) {
        let v = self.victims[vl];
        let z = self.net.topology.ues[v].operator;
        let b = self.assoc.serving(v).expect("checked");
        let kidx = self.kcur[vl];
        for s in 0..self.n_s {
            let mut icell = T::zero();
            let mut iop = T::zero();
            for i in 0..self.n_bs {
                let load = self.assoc.load(i);
                if i == b || load == 0 || !self.rel_bs(v, i) {
                    continue;
                }
                let p = self.power.stream_power(i, load) * self.alt[self.alt_idx(vl, kidx, i, s)];
                if self.bs_op[i] == z {
                    icell += p;
                } else {
                    iop += p;
                }
            }
            let o = vl * self.n_s + s;
            self.intra[o] = self.alt[self.alt_idx(vl, kidx, b, s)];
            self.icell[o] = icell;
            self.iop[o] = iop;
        }
    }

    fn aggregate_direct(&mut self, vl: usize) -> Result<()> {
        let v = self.victims[vl];
        let z = self.net.topology.ues[v].operator;
        let b = self.serving(v)?;
        let combiners: Vec<u32> = (0..self.n_s)
            .map(|s| self.combiner(b, v, s))
            .collect::<Result<_>>()?;
        let o = vl * self.n_s;
        for s in 0..self.n_s {
            self.intra[o + s] = T::zero();
            self.icell[o + s] = T::zero();
            self.iop[o + s] = T::zero();
        }
        let mut bf = Vec::new();
        for i in 0..self.n_bs {
            let load = self.assoc.load(i);
            if load == 0 || !self.rel_bs(v, i) {
                continue;
            }
            let table = self.ue_factor_table(v, i, &combiners);
            let sp = self.power.stream_power(i, load);
            for s in 0..self.n_s {
                let uf = &table.iter().find(|(x, _)| *x == combiners[s]).expect("built").1;
                let mut sum = T::zero();
                for &j in self.assoc.cells()[i].iter() {
                    if j != v {
                        self.net.bs_factors_into(v, i, self.net.beam(i, j, s)?.bs_cw, &mut bf);
                        sum += self.net.gain_from_factors(v, i, s, uf, &bf);
                    }
                }
                if i == b {
                    self.intra[o + s] = sum;
                } else if self.bs_op[i] == z {
                    self.icell[o + s] += sp * sum;
                } else {
                    self.iop[o + s] += sp * sum;
                }
            }
        }
        Ok(())
    }

    /// Rate and mean normalized interference of a victim served by `b` with
    /// load `load`, given per-sample desired gain and interference terms.
    fn rate_of<F>(&self, vl: usize, b: usize, load: usize, mut terms: F) -> Result<(f64, [f64; 3])>
    where
        F: FnMut(usize) -> Result<(T, T, T, T)>,
    {
        let pd = self.power.desired_power(b, load);
        let sp = self.power.stream_power(b, load);
        let ts = self.power.time_share(load);
        let noise = self.noise[vl];
        let bw = self.bandwidth[vl];
        let mut acc = T::zero();
        let mut ratios = [T::zero(); 3];
        for s in 0..self.n_s {
            let (d, intra, icell, iop) = terms(s)?;
            let i1 = sp * intra.max(T::zero());
            let i2 = icell.max(T::zero());
            let i3 = iop.max(T::zero());
            let sinr = pd * d / (i1 + i2 + i3 + noise);
            acc += shannon_rate(bw, sinr);
            if noise > T::zero() {
                ratios[0] += i1 / noise;
                ratios[1] += i2 / noise;
                ratios[2] += i3 / noise;
            }
        }
        let ns = T::from_usize_lossy(self.n_s);
        let rate = (ts * acc / ns).to_f64_lossy();
        Ok((rate, ratios.map(|r| (r / ns).to_f64_lossy())))
    }

    fn refresh_rate(&mut self, vl: usize) -> Result<()> {
        let v = self.victims[vl];
        let b = self.serving(v)?;
        let load = self.assoc.load(b);
        let kidx = self.kcur[vl];
        let (rate, ratios) = self.rate_of(vl, b, load, |s| {
            let o = vl * self.n_s + s;
            Ok((self.desired[vl][kidx * self.n_s + s], self.intra[o], self.icell[o], self.iop[o]))
        })?;
        self.rates[vl] = rate;
        self.interference[vl] = ratios;
        Ok(())
    }

    fn refresh_utilities(&mut self) {
        let z_count = self.net.config.num_operators;
        let mut util = vec![f64::NAN; z_count];
        let mut per_ue = vec![0.0; self.net.n_ue()];
        for (vl, &v) in self.victims.iter().enumerate() {
            per_ue[v] = self.rates[vl];
        }
        for &z in &self.spec.scope_ops {
            let ues: Vec<usize> = self
                .victims
                .iter()
                .copied()
                .filter(|&v| self.net.topology.ues[v].operator == z)
                .collect();
            util[z] = operator_utility(&per_ue, &ues);
        }
        self.utilities = util;
    }

    fn deltas(&self, changes: &[Change]) -> Result<Vec<BsDelta<T>>> {
        let mut out: Vec<BsDelta<T>> = Vec::new();
        let entry = |bs: usize, out: &mut Vec<BsDelta<T>>| -> usize {
            if let Some(p) = out.iter().position(|d| d.bs == bs) {
                p
            } else {
                let load = self.assoc.load(bs);
                out.push(BsDelta {
                    bs,
                    new_load: load,
                    sp_old: T::zero(),
                    sp_new: T::zero(),
                    leaving: Vec::new(),
                    joining: Vec::new(),
                });
                out.len() - 1
            }
        };
        for &(u, to) in changes {
            let from = self.serving(u)?;
            if from == to {
                continue;
            }
            let lf = self.link(from, u)?;
            let lt = self.link(to, u)?;
            let p = entry(from, &mut out);
            out[p].new_load -= 1;
            out[p].leaving.push((u, lf));
            let p = entry(to, &mut out);
            out[p].new_load += 1;
            out[p].joining.push((u, lt));
        }
        for d in &mut out {
            let old = self.assoc.load(d.bs);
            if old > 0 {
                d.sp_old = self.power.stream_power(d.bs, old);
            }
            if d.new_load > 0 {
                d.sp_new = self.power.stream_power(d.bs, d.new_load);
            }
        }
        Ok(out)
    }

    /// Rate of a victim that keeps its serving BS; `rel[d]` tells whether
    /// delta `d` interferes with it.
    fn rate_unmoved(&self, vl: usize, deltas: &[BsDelta<T>], rel: &[bool]) -> f64 {
        if !rel.iter().any(|&r| r) {
            return self.rates[vl];
        }
        let v = self.victims[vl];
        let z = self.net.topology.ues[v].operator;
        let b = self.assoc.serving(v).expect("victims are associated");
        let kidx = self.kcur[vl];
        let load_b = deltas
            .iter()
            .find(|d| d.bs == b)
            .map_or(self.assoc.load(b), |d| d.new_load);
        let pd = self.power.desired_power(b, load_b);
        let sp = self.power.stream_power(b, load_b);
        let ts = self.power.time_share(load_b);
        let noise = self.noise[vl];
        let bw = self.bandwidth[vl];
        let n_s = self.n_s;
        let alt_base = self.alt_off[vl] + kidx * self.n_bs * n_s;
        let cur_base = vl * self.n_links * n_s;
        let des = &self.desired[vl][kidx * n_s..(kidx + 1) * n_s];
        let mut acc = T::zero();
        for s in 0..n_s {
            let o = vl * n_s + s;
            let mut intra = self.intra[o];
            let mut icell = self.icell[o];
            let mut iop = self.iop[o];
            for (d, _) in deltas.iter().zip(rel).filter(|(_, &r)| r) {
                let base = self.alt[alt_base + d.bs * n_s + s];
                let mut new = base;
                for &(_, l) in &d.leaving {
                    new -= self.cur_block[cur_base + l * n_s + s];
                }
                for &(_, l) in &d.joining {
                    new += self.cur_block[cur_base + l * n_s + s];
                }
                if d.bs == b {
                    intra = new;
                } else if self.bs_op[d.bs] == z {
                    icell += d.sp_new * new - d.sp_old * base;
                } else {
                    iop += d.sp_new * new - d.sp_old * base;
                }
            }
            let i1 = sp * intra.max(T::zero());
            let sinr = pd * des[s] / (i1 + icell.max(T::zero()) + iop.max(T::zero()) + noise);
            acc += shannon_rate(bw, sinr);
        }
        (ts * acc / T::from_usize_lossy(n_s)).to_f64_lossy()
    }

    fn rate_moved(&self, vl: usize, to: usize, changes: &[Change], deltas: &[BsDelta<T>]) -> Result<f64> {
        let v = self.victims[vl];
        let z = self.net.topology.ues[v].operator;
        let kidx = self.candidate_index(v, to)?;
        let new_load = |i: usize| {
            deltas
                .iter()
                .find(|d| d.bs == i)
                .map_or(self.assoc.load(i), |d| d.new_load)
        };
        let mut others = Vec::new();
        for &(m, mt) in changes {
            let mf = self.serving(m)?;
            if m != v && mf != mt {
                others.push((m, mf, mt));
            }
        }
        let active: Vec<usize> = (0..self.n_bs)
            .filter(|&i| self.rel_bs(v, i) && new_load(i) > 0)
            .collect();
        let load_to = new_load(to);
        let mut row = vec![T::zero(); self.n_bs];
        let (rate, _) = self.rate_of(vl, to, load_to, |s| {
            for &i in &active {
                row[i] = self.alt[self.alt_idx(vl, kidx, i, s)];
            }
            for &(m, mf, mt) in &others {
                if self.rel_bs(v, mf) {
                    row[mf] -= self.stream_gain(v, to, mf, m, s)?;
                }
                if self.rel_bs(v, mt) {
                    row[mt] += self.stream_gain(v, to, mt, m, s)?;
                }
            }
            let mut icell = T::zero();
            let mut iop = T::zero();
            for &i in &active {
                if i == to {
                    continue;
                }
                let p = self.power.stream_power(i, new_load(i)) * row[i];
                if self.bs_op[i] == z {
                    icell += p;
                } else {
                    iop += p;
                }
            }
            Ok((self.desired[vl][kidx * self.n_s + s], row[to], icell, iop))
        })?;
        Ok(rate)
    }
}

impl<T: Real> Objective for AnalogEngine<'_, T> {
    fn association(&self) -> &Association {
        &self.assoc
    }

    fn utilities(&self) -> &[f64] {
        &self.utilities
    }

    fn propose(&mut self, changes: &[Change]) -> Result<Vec<f64>> {
        if !self.incremental {
            let mut a = self.assoc.clone();
            for &(u, b) in changes {
                a.set(u, Some(b));
            }
            let e = Self::evaluate_only(self.net, self.spec.clone(), &a)?;
            return Ok(e.utilities);
        }
        let deltas = self.deltas(changes)?;
        for vl in 0..self.victims.len() {
            let v = self.victims[vl];
            if changes.iter().any(|c| c.0 == v && self.assoc.serving(v) != Some(c.1)) {
                continue;
            }
            for d in &deltas {
                if !self.rel_bs(v, d.bs) {
                    continue;
                }
                for &(_, l) in d.leaving.iter().chain(&d.joining) {
                    self.ensure_cur(vl, l, 0)?;
                }
            }
        }
        let rel: Vec<Vec<bool>> = (0..self.net.config.num_operators)
            .map(|z| deltas.iter().map(|d| self.spec.relevant(z, self.bs_op[d.bs])).collect())
            .collect();
        let mut per_ue = vec![0.0; self.net.n_ue()];
        for vl in 0..self.victims.len() {
            let v = self.victims[vl];
            let moved = changes.iter().find(|c| c.0 == v && self.assoc.serving(v) != Some(c.1));
            per_ue[v] = match moved {
                Some(&(_, to)) => self.rate_moved(vl, to, changes, &deltas)?,
                None => self.rate_unmoved(vl, &deltas, &rel[self.net.topology.ues[v].operator]),
            };
        }
        let mut util = vec![f64::NAN; self.net.config.num_operators];
        for &z in &self.spec.scope_ops {
            let ues: Vec<usize> = self
                .victims
                .iter()
                .copied()
                .filter(|&v| self.net.topology.ues[v].operator == z)
                .collect();
            util[z] = operator_utility(&per_ue, &ues);
        }
        Ok(util)
    }

    fn commit(&mut self, changes: &[Change]) -> Result<()> {
        if !self.incremental {
            for &(u, b) in changes {
                self.assoc.set(u, Some(b));
            }
            return self.reset();
        }
        let mut moves = Vec::new();
        for &(m, mt) in changes {
            let mf = self.serving(m)?;
            if mf != mt {
                moves.push((m, mf, mt, self.link(mf, m)?, self.link(mt, m)?));
            }
        }
        if moves.is_empty() {
            return Ok(());
        }
        for vl in 0..self.victims.len() {
            let v = self.victims[vl];
            let v_moves = moves.iter().any(|mv| mv.0 == v);
            let net = self.net;
            for (kidx, &k) in net.candidates[v].iter().enumerate() {
                let use_cur = kidx == self.kcur[vl] && !v_moves;
                for &(m, mf, mt, lf, lt) in &moves {
                    if m == v {
                        continue;
                    }
                    for s in 0..self.n_s {
                        if self.rel_bs(v, mf) {
                            let g = if use_cur {
                                self.ensure_cur(vl, lf, s)?
                            } else {
                                self.stream_gain(v, k, mf, m, s)?
                            };
                            let idx = self.alt_idx(vl, kidx, mf, s);
                            self.alt[idx] -= g;
                        }
                        if self.rel_bs(v, mt) {
                            let g = if use_cur {
                                self.ensure_cur(vl, lt, s)?
                            } else {
                                self.stream_gain(v, k, mt, m, s)?
                            };
                            let idx = self.alt_idx(vl, kidx, mt, s);
                            self.alt[idx] += g;
                        }
                    }
                }
            }
        }
        for &(m, _, mt, _, _) in &moves {
            self.assoc.set(m, Some(mt));
        }
        for &(m, _, mt, _, _) in &moves {
            let vl = self.local[m];
            if vl != NONE {
                self.kcur[vl] = self.candidate_index(m, mt)?;
                self.clear_cur_block(vl);
            }
        }
        for vl in 0..self.victims.len() {
            self.aggregate_from_alt(vl);
            self.refresh_rate(vl)?;
        }
        self.refresh_utilities();
        Ok(())
    }

    fn report(&self) -> RateReport {
        RateReport::new(
            self.victims.clone(),
            self.rates.clone(),
            self.utilities.clone(),
            self.interference.clone(),
        )
    }
}
