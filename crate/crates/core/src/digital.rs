//! Rate evaluator for digital (MRT / RZF) precoding.
//!
//! Precoders depend on every UE in a BS's coordination scope, so each
//! proposal is evaluated from scratch.
//!
//! MRT and transmitter-scope RZF with codebook combiners run entirely on Gram
//! entries `h_u h_r^*` of combined rows `h_u = (w_u)^* H_iu`. Each row is a
//! sum of a few conjugated BS steering vectors, so an entry costs
//! `N_paths^2` operations whatever the array size: with `q_n` the per-path
//! weights of a row, `h_u h_r^* = sum_nm q_un conj(q_rm) A(sd_rm - sd_un)`
//! where `A` is the BS array factor. Other modes build dense rows, which are
//! cached across proposals.

use std::collections::HashMap;

use crate::association::Association;
use crate::beamforming::{
    build_effective_channel, mrt_precoder, power_normalizer, rzf_precoders, BeamVector, EffRow, EffScope,
    EffectiveChannel,
};
use crate::config::{Coordination, Precoder, RzfRows};
use crate::engine::{Change, EngineSpec, Objective};
use crate::error::{Error, Result};
use crate::beamforming::ue_factor;
use crate::linalg::{array_factor, dotu, Cholesky, C};
use crate::metrics::{interference_breakdown, operator_utility, shannon_rate, PowerModel, RateReport};
use crate::network::Network;
use crate::scalar::Real;

struct Evaluation {
    rates: Vec<f64>,
    interference: Vec<[f64; 3]>,
    utilities: Vec<f64>,
}

#[derive(Default)]
struct RowCache<T> {
    index: HashMap<(usize, usize, usize, u32), usize>,
    rows: Vec<Vec<C<T>>>,
}

impl<T: Real> RowCache<T> {
    fn ensure(&mut self, net: &Network<T>, v: usize, i: usize, s: usize, cw: u32) -> usize {
        if let Some(&k) = self.index.get(&(v, i, s, cw)) {
            return k;
        }
        let k = self.rows.len();
        self.rows.push(net.combined_row(v, cw, i, s));
        self.index.insert((v, i, s, cw), k);
        k
    }
}

/// Lazily filled path-domain tables of one network.
struct PathCache<T> {
    n_cw: usize,
    /// Offsets into `uf` per `(pair, ue_cw)`.
    uf_off: Vec<usize>,
    uf: Vec<C<T>>,
    /// Offsets into `kernel` per `(bs, ue, ue')`.
    kernel_off: Vec<usize>,
    kernel: Vec<C<T>>,
}

impl<T: Real> PathCache<T> {
    fn new(net: &Network<T>) -> Self {
        let n_cw = net.cb_ue.len();
        Self {
            n_cw,
            uf_off: vec![usize::MAX; net.n_bs() * net.n_ue() * n_cw],
            uf: Vec::new(),
            kernel_off: Vec::new(),
            kernel: Vec::new(),
        }
    }

    /// Per-path weights `q_n = c_n (w^* a_UE(aoa_n))` of row `(i, u)`.
    fn weights_into(&mut self, net: &Network<T>, i: usize, u: usize, s: usize, cw: u32, out: &mut Vec<C<T>>) {
        let key = net.pair(i, u) * self.n_cw + cw as usize;
        let (sa, _) = net.path_sines(i, u);
        if self.uf_off[key] == usize::MAX {
            self.uf_off[key] = self.uf.len();
            let su = net.cb_ue.sines[cw as usize];
            let n = net.config.n_ue_antennas;
            self.uf.extend(sa.iter().map(|&a| ue_factor(n, su, a)));
        }
        let off = self.uf_off[key];
        out.clear();
        out.extend(
            net.coefs(i, u, s)
                .iter()
                .zip(&self.uf[off..off + sa.len()])
                .map(|(c, f)| c * f),
        );
    }

    /// `A(sd_rm - sd_un)` for all path pairs of rows `(i, u)` and `(i, r)`,
    /// row-major over `n`.
    fn kernel(&mut self, net: &Network<T>, i: usize, u: usize, r: usize) -> &[C<T>] {
        let nu = net.n_ue();
        if self.kernel_off.is_empty() {
            self.kernel_off = vec![usize::MAX; net.n_bs() * nu * nu];
        }
        let key = (i * nu + u) * nu + r;
        let (_, du) = net.path_sines(i, u);
        let (_, dr) = net.path_sines(i, r);
        if self.kernel_off[key] == usize::MAX {
            self.kernel_off[key] = self.kernel.len();
            let n = net.config.n_bs_antennas;
            for &a in du {
                for &b in dr {
                    self.kernel.push(array_factor(n, T::PI() * (b - a)));
                }
            }
        }
        let off = self.kernel_off[key];
        &self.kernel[off..off + du.len() * dr.len()]
    }

    /// `h_u h_r^*` from the two rows' path weights.
    fn gram(&mut self, net: &Network<T>, i: usize, u: usize, r: usize, qu: &[C<T>], qr: &[C<T>]) -> C<T> {
        let k = self.kernel(net, i, u, r);
        let m = qr.len();
        let mut acc = C::new(T::zero(), T::zero());
        for (n, a) in qu.iter().enumerate() {
            let mut inner = C::new(T::zero(), T::zero());
            for (b, kk) in qr.iter().zip(&k[n * m..(n + 1) * m]) {
                inner += b.conj() * kk;
            }
            acc += a * inner;
        }
        acc
    }
}

pub struct DigitalEngine<'a, T> {
    net: &'a Network<T>,
    spec: EngineSpec,
    assoc: Association,
    victims: Vec<usize>,
    cache: RowCache<T>,
    paths: PathCache<T>,
    current: Evaluation,
}

impl<'a, T: Real> DigitalEngine<'a, T> {
    pub fn new(net: &'a Network<T>, spec: EngineSpec, assoc: &Association) -> Result<Self> {
        let victims = (0..net.n_ue())
            .filter(|&u| spec.in_scope(net.topology.ues[u].operator))
            .collect();
        let mut eng = Self {
            net,
            spec,
            assoc: assoc.clone(),
            victims,
            cache: RowCache {
                index: HashMap::new(),
                rows: Vec::new(),
            },
            paths: PathCache::new(net),
            current: Evaluation {
                rates: Vec::new(),
                interference: Vec::new(),
                utilities: Vec::new(),
            },
        };
        eng.current = eng.evaluate(&assoc.clone())?;
        Ok(eng)
    }

    fn regularizer(&self, load: f64, bandwidth: f64) -> T {
        let cfg = &self.net.config;
        T::lit(
            cfg.rzf_regularizer
                .unwrap_or(load * cfg.noise_psd * bandwidth / cfg.tx_power),
        )
    }

    /// UEs whose channel rows BS `i` uses when computing its RZF precoder.
    fn transmitter_scope(&self, assoc: &Association, i: usize) -> Vec<usize> {
        let topo = &self.net.topology;
        let k = topo.bss[i].operator;
        (0..self.net.n_ue())
            .filter(|&j| {
                let Some(b) = assoc.serving(j) else { return false };
                let z = topo.ues[j].operator;
                self.spec.band.co_channel(z, k)
                    && match self.spec.coordination {
                        Coordination::Full => true,
                        Coordination::IntraOnly => z == k,
                        Coordination::None => b == i,
                    }
            })
            .collect()
    }

    fn eff_scope(&self, i: usize) -> EffScope {
        match self.spec.coordination {
            Coordination::Full => EffScope::FullNetwork,
            Coordination::IntraOnly => EffScope::Operator(self.net.topology.bss[i].operator),
            Coordination::None => EffScope::Cell(i),
        }
    }

    /// Unit-norm precoders `w_ij` of every active BS in sample `s`, given
    /// the UE combiners `cws`.
    fn precoders(&mut self, assoc: &Association, s: usize, cws: &[Option<u32>]) -> Result<Vec<Vec<BeamVector<T>>>> {
        let net = self.net;
        let nb = net.n_bs();
        let n_ant = net.config.n_bs_antennas;
        let mut out: Vec<Vec<BeamVector<T>>> = vec![Vec::new(); nb];
        let cw = |j: usize| cws[j].ok_or(Error::UnassociatedUe(j));
        match (self.spec.precoder, net.config.rzf_rows) {
            (Precoder::Analog, _) => {
                return Err(Error::InvalidConfig("digital evaluator needs a digital precoder".into()))
            }
            (Precoder::Mrt, _) => {
                for i in 0..nb {
                    for &j in &assoc.cells()[i] {
                        let k = self.cache.ensure(net, j, i, s, cw(j)?);
                        let eff = EffectiveChannel::from_rows(
                            EffScope::Cell(i),
                            n_ant,
                            vec![EffRow {
                                ue: j,
                                bs: i,
                                vector: self.cache.rows[k].clone(),
                            }],
                        );
                        out[i].push(mrt_precoder(&eff, i, j)?);
                    }
                }
            }
            (Precoder::Rzf, RzfRows::Transmitter) => {
                for i in 0..nb {
                    let members = &assoc.cells()[i];
                    if members.is_empty() {
                        continue;
                    }
                    let mut rows = Vec::new();
                    for j in self.transmitter_scope(assoc, i) {
                        let k = self.cache.ensure(net, j, i, s, cw(j)?);
                        rows.push(EffRow {
                            ue: j,
                            bs: i,
                            vector: self.cache.rows[k].clone(),
                        });
                    }
                    let eff = EffectiveChannel::from_rows(self.eff_scope(i), n_ant, rows);
                    let z = net.topology.bss[i].operator;
                    let c = self.regularizer(members.len() as f64, self.spec.band.bandwidth(z));
                    let targets: Vec<(usize, usize)> = members.iter().map(|&j| (i, j)).collect();
                    out[i] = rzf_precoders(&eff, &targets, c)?;
                }
            }
            (Precoder::Rzf, RzfRows::Stacked) => {
                let mut scopes: Vec<EffScope> = Vec::new();
                for i in 0..nb {
                    if !assoc.cells()[i].is_empty() {
                        let sc = self.eff_scope(i);
                        if !scopes.contains(&sc) {
                            scopes.push(sc);
                        }
                    }
                }
                let serving: Vec<Option<usize>> = (0..net.n_ue()).map(|u| assoc.serving(u)).collect();
                let combiners: Vec<Option<BeamVector<T>>> = cws
                    .iter()
                    .map(|c| c.map(|c| net.cb_ue.get(c as usize).clone()))
                    .collect();
                for sc in scopes {
                    let cache = &mut self.cache;
                    let eff = build_effective_channel(&net.topology, &serving, &combiners, sc, n_ant, |i, u, _| {
                        let c = cws[u].ok_or(Error::UnassociatedUe(u))?;
                        let k = cache.ensure(net, u, i, s, c);
                        Ok(cache.rows[k].clone())
                    })?;
                    let bss: Vec<usize> = (0..nb)
                        .filter(|&i| !assoc.cells()[i].is_empty() && self.eff_scope(i) == sc)
                        .collect();
                    let served: usize = bss.iter().map(|&i| assoc.load(i)).sum();
                    let bw = bss
                        .iter()
                        .map(|&i| self.spec.band.bandwidth(net.topology.bss[i].operator))
                        .sum::<f64>()
                        / bss.len() as f64;
                    let c = self.regularizer(served as f64 / bss.len() as f64, bw);
                    let targets: Vec<(usize, usize)> = bss
                        .iter()
                        .flat_map(|&i| assoc.cells()[i].iter().map(move |&j| (i, j)))
                        .collect();
                    let ws = rzf_precoders(&eff, &targets, c)?;
                    for ((i, _), w) in targets.into_iter().zip(ws) {
                        out[i].push(w);
                    }
                }
            }
        }
        Ok(out)
    }

    fn evaluate(&mut self, assoc: &Association) -> Result<Evaluation> {
        let gram_form = self.net.config.combiner_passes == 1
            && match self.spec.precoder {
                Precoder::Mrt => true,
                Precoder::Rzf => self.net.config.rzf_rows == RzfRows::Transmitter,
                Precoder::Analog => false,
            };
        if gram_form {
            self.evaluate_gram(assoc)
        } else {
            self.evaluate_dense(assoc)
        }
    }

    fn check_assoc(&self, assoc: &Association) -> Result<()> {
        for &v in &self.victims {
            if assoc.serving(v).is_none() {
                return Err(Error::UnassociatedUe(v));
            }
        }
        for u in 0..self.net.n_ue() {
            if let Some(b) = assoc.serving(u) {
                self.net.link(b, u)?;
            }
        }
        Ok(())
    }

    fn finish(&self, acc: &[T], ratios: &[[T; 3]]) -> Evaluation {
        let net = self.net;
        let topo = &net.topology;
        let ns = T::from_usize_lossy(net.n_samples());
        let rates: Vec<f64> = acc.iter().map(|&a| (a / ns).to_f64_lossy()).collect();
        let interference = ratios
            .iter()
            .map(|r| r.map(|x| (x / ns).to_f64_lossy()))
            .collect();
        let mut per_ue = vec![0.0; net.n_ue()];
        for (vl, &v) in self.victims.iter().enumerate() {
            per_ue[v] = rates[vl];
        }
        let mut utilities = vec![f64::NAN; net.config.num_operators];
        for &z in &self.spec.scope_ops {
            let ues: Vec<usize> = self
                .victims
                .iter()
                .copied()
                .filter(|&v| topo.ues[v].operator == z)
                .collect();
            utilities[z] = operator_utility(&per_ue, &ues);
        }
        Evaluation {
            rates,
            interference,
            utilities,
        }
    }

    fn evaluate_gram(&mut self, assoc: &Association) -> Result<Evaluation> {
        self.check_assoc(assoc)?;
        let net = self.net;
        let topo = &net.topology;
        let cfg = &net.config;
        let nb = net.n_bs();
        let nu = net.n_ue();
        let nv = self.victims.len();
        let zero = C::new(T::zero(), T::zero());
        let p = T::lit(cfg.tx_power);
        // Unit-norm columns: lambda_i = p / N_i.
        let lambda: Vec<T> = (0..nb)
            .map(|i| match assoc.load(i) {
                0 => T::zero(),
                n => p / T::from_usize_lossy(n),
            })
            .collect();
        let power = PowerModel::Digital { lambda };
        let mut slot = vec![0usize; nu];
        for cell in assoc.cells() {
            for (k, &j) in cell.iter().enumerate() {
                slot[j] = k;
            }
        }
        let scopes: Vec<Vec<usize>> = (0..nb)
            .map(|i| match (assoc.cells()[i].is_empty(), self.spec.precoder) {
                (true, _) => Vec::new(),
                (false, Precoder::Mrt) => assoc.cells()[i].clone(),
                _ => self.transmitter_scope(assoc, i),
            })
            .collect();
        let regs: Vec<T> = (0..nb)
            .map(|i| {
                let z = topo.bss[i].operator;
                self.regularizer(assoc.load(i) as f64, self.spec.band.bandwidth(z))
            })
            .collect();
        let mut acc = vec![T::zero(); nv];
        let mut ratios = vec![[T::zero(); 3]; nv];
        // gains[i][k * nv + vl]: |h_v w_ik|^2 toward member k of BS i.
        let mut gains: Vec<Vec<T>> = vec![Vec::new(); nb];
        let mut q: Vec<Vec<C<T>>> = vec![Vec::new(); nu];
        let mut cws = vec![0u32; nu];
        let mut rows: Vec<usize> = Vec::new();
        let mut in_rows = vec![usize::MAX; nu];
        for s in 0..net.n_samples() {
            for u in 0..nu {
                if let Some(b) = assoc.serving(u) {
                    cws[u] = net.beam(b, u, s)?.ue_cw;
                }
            }
            for i in 0..nb {
                let members = &assoc.cells()[i];
                gains[i].clear();
                if members.is_empty() {
                    continue;
                }
                gains[i].resize(members.len() * nv, T::zero());
                let k_op = topo.bss[i].operator;
                let scope = &scopes[i];
                let m = scope.len();
                // Rows: scope first, then relevant victims outside it.
                rows.clear();
                for &u in scope {
                    in_rows[u] = rows.len();
                    rows.push(u);
                }
                for &v in &self.victims {
                    if in_rows[v] == usize::MAX && self.spec.relevant(topo.ues[v].operator, k_op) {
                        in_rows[v] = rows.len();
                        rows.push(v);
                    }
                }
                for &u in &rows {
                    let mut buf = std::mem::take(&mut q[u]);
                    self.paths.weights_into(net, i, u, s, cws[u], &mut buf);
                    q[u] = buf;
                }
                // g[a * m + c] = h_{rows[a]} h_{scope[c]}^*
                let mut g = vec![zero; rows.len() * m];
                for (a, &u) in rows.iter().enumerate() {
                    for (c, &r) in scope.iter().enumerate() {
                        g[a * m + c] = if a < m && c < a {
                            g[c * m + a].conj()
                        } else {
                            self.paths.gram(net, i, u, r, &q[u], &q[r])
                        };
                    }
                }
                let xs: Vec<Vec<C<T>>> = match self.spec.precoder {
                    Precoder::Mrt => (0..members.len())
                        .map(|k| {
                            let mut x = vec![zero; m];
                            x[k] = C::new(T::one(), T::zero());
                            x
                        })
                        .collect(),
                    _ => {
                        let mut a = g[..m * m].to_vec();
                        for d in 0..m {
                            a[d * m + d] += C::new(regs[i], T::zero());
                        }
                        let chol = Cholesky::new(&a, m)?;
                        members
                            .iter()
                            .map(|&j| {
                                let mut x = vec![zero; m];
                                x[in_rows[j]] = C::new(T::one(), T::zero());
                                chol.solve_in_place(&mut x);
                                x
                            })
                            .collect()
                    }
                };
                for (k, x) in xs.iter().enumerate() {
                    // y[a] = h_{rows[a]} w~, w~ = sum_c x_c h_{scope[c]}^*
                    let y: Vec<C<T>> = (0..rows.len())
                        .map(|a| g[a * m..(a + 1) * m].iter().zip(x).map(|(gg, xx)| gg * xx).sum())
                        .collect();
                    let norm: T = (0..m).map(|c| (x[c].conj() * y[c]).re).sum();
                    if !(norm > T::zero()) {
                        return Err(Error::DegenerateChannel(format!(
                            "zero precoder at BS {i} toward UE {}",
                            members[k]
                        )));
                    }
                    for (vl, &v) in self.victims.iter().enumerate() {
                        if in_rows[v] != usize::MAX {
                            gains[i][k * nv + vl] = y[in_rows[v]].norm_sqr() / norm;
                        }
                    }
                }
                for &u in &rows {
                    in_rows[u] = usize::MAX;
                }
            }
            for (vl, &v) in self.victims.iter().enumerate() {
                let z = topo.ues[v].operator;
                let br = interference_breakdown(
                    topo,
                    assoc,
                    &self.spec.band,
                    &power,
                    cfg.noise_psd,
                    v,
                    self.spec.inter_operator,
                    |i, j| gains[i][slot[j] * nv + vl],
                )?;
                acc[vl] += shannon_rate(T::lit(self.spec.band.bandwidth(z)), br.sinr());
                if br.noise > T::zero() {
                    ratios[vl][0] += br.intra_cell / br.noise;
                    ratios[vl][1] += br.inter_cell / br.noise;
                    ratios[vl][2] += br.inter_operator / br.noise;
                }
            }
        }
        Ok(self.finish(&acc, &ratios))
    }

    fn evaluate_dense(&mut self, assoc: &Association) -> Result<Evaluation> {
        let net = self.net;
        let topo = &net.topology;
        let cfg = &net.config;
        let n_s = net.n_samples();
        let nb = net.n_bs();
        self.check_assoc(assoc)?;

        let mut per_sample: Vec<(Vec<Option<u32>>, Vec<Vec<BeamVector<T>>>)> = Vec::with_capacity(n_s);
        for s in 0..n_s {
            let mut cws: Vec<Option<u32>> = (0..net.n_ue())
                .map(|u| assoc.serving(u).map(|b| net.beam(b, u, s).map(|c| c.ue_cw)).transpose())
                .collect::<Result<_>>()?;
            let mut pre = self.precoders(assoc, s, &cws)?;
            for _ in 1..cfg.combiner_passes {
                for i in 0..nb {
                    for (k, &j) in assoc.cells()[i].iter().enumerate() {
                        cws[j] = Some(net.best_combiner(i, j, s, pre[i][k].as_slice()));
                    }
                }
                pre = self.precoders(assoc, s, &cws)?;
            }
            per_sample.push((cws, pre));
        }

        let p = T::lit(cfg.tx_power);
        let mut lambda = vec![T::zero(); nb];
        for (i, l) in lambda.iter_mut().enumerate() {
            if !assoc.cells()[i].is_empty() {
                let cols: Vec<Vec<BeamVector<T>>> = per_sample.iter().map(|(_, pre)| pre[i].clone()).collect();
                *l = power_normalizer(i, p, &cols)?;
            }
        }
        let power = PowerModel::Digital { lambda };

        let mut acc = vec![T::zero(); self.victims.len()];
        let mut ratios = vec![[T::zero(); 3]; self.victims.len()];
        let mut rows: Vec<Option<usize>> = vec![None; nb];
        for (s, (cws, pre)) in per_sample.iter().enumerate() {
            for (vl, &v) in self.victims.iter().enumerate() {
                let z = topo.ues[v].operator;
                let cv = cws[v].ok_or(Error::UnassociatedUe(v))?;
                for i in 0..nb {
                    rows[i] = if !assoc.cells()[i].is_empty() && self.spec.relevant(z, topo.bss[i].operator) {
                        Some(self.cache.ensure(net, v, i, s, cv))
                    } else {
                        None
                    };
                }
                let cache = &self.cache;
                let br = interference_breakdown(
                    topo,
                    assoc,
                    &self.spec.band,
                    &power,
                    cfg.noise_psd,
                    v,
                    self.spec.inter_operator,
                    |i, j| {
                        let Some(r) = rows[i] else { return T::zero() };
                        let k = assoc.cells()[i].iter().position(|&x| x == j).expect("member");
                        dotu(&cache.rows[r], pre[i][k].as_slice()).norm_sqr()
                    },
                )?;
                acc[vl] += shannon_rate(T::lit(self.spec.band.bandwidth(z)), br.sinr());
                if br.noise > T::zero() {
                    ratios[vl][0] += br.intra_cell / br.noise;
                    ratios[vl][1] += br.inter_cell / br.noise;
                    ratios[vl][2] += br.inter_operator / br.noise;
                }
            }
        }
        Ok(self.finish(&acc, &ratios))
    }

    fn applied(&self, changes: &[Change]) -> Association {
        let mut a = self.assoc.clone();
        for &(u, b) in changes {
            a.set(u, Some(b));
        }
        a
    }
}

impl<T: Real> Objective for DigitalEngine<'_, T> {
    fn association(&self) -> &Association {
        &self.assoc
    }

    fn utilities(&self) -> &[f64] {
        &self.current.utilities
    }

    fn propose(&mut self, changes: &[Change]) -> Result<Vec<f64>> {
        let a = self.applied(changes);
        Ok(self.evaluate(&a)?.utilities)
    }

    fn commit(&mut self, changes: &[Change]) -> Result<()> {
        let a = self.applied(changes);
        self.current = self.evaluate(&a)?;
        self.assoc = a;
        Ok(())
    }

    fn report(&self) -> RateReport {
        RateReport::new(
            self.victims.clone(),
            self.current.rates.clone(),
            self.current.utilities.clone(),
            self.current.interference.clone(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::association::{greedy_association, ProblemId, ProblemSpec};
    use crate::config::ScenarioConfig;
    use approx::assert_relative_eq;

    #[test]
    fn gram_form_matches_dense_rows() {
        for (precoder, problem, n_bs) in [
            (Precoder::Mrt, ProblemId::P4, 8),
            (Precoder::Rzf, ProblemId::P4, 8),
            (Precoder::Rzf, ProblemId::P5, 8),
            (Precoder::Rzf, ProblemId::P6, 8),
            (Precoder::Rzf, ProblemId::P4, 2),
            (Precoder::Mrt, ProblemId::P5, 32),
        ] {
            let cfg = ScenarioConfig {
                area_side: 150.0,
                n_bs_antennas: n_bs,
                n_ue_antennas: 4,
                n_fading_samples: 2,
                precoder,
                ..Default::default()
            };
            let spec = ProblemSpec::new(problem, &cfg).unwrap();
            let cfg = spec.apply(&cfg);
            let net = Network::<f64>::new(&cfg, 5).unwrap();
            let all: Vec<usize> = (0..net.n_ue()).collect();
            let assoc = greedy_association(&net, &all, cfg.load_cap()).unwrap();
            for es in [spec.engine_spec(&cfg, vec![0, 2]).unwrap(), spec.report_spec(&cfg).unwrap()] {
                let mut eng = DigitalEngine::new(&net, es, &assoc).unwrap();
                let a = eng.evaluate_gram(&assoc).unwrap();
                let b = eng.evaluate_dense(&assoc).unwrap();
                for (x, y) in a.rates.iter().zip(&b.rates) {
                    assert_relative_eq!(*x, *y, max_relative = 1e-9);
                }
                for (x, y) in a.interference.iter().zip(&b.interference) {
                    for k in 0..3 {
                        assert_relative_eq!(x[k], y[k], max_relative = 1e-8, epsilon = 1e-12);
                    }
                }
            }
        }
    }
}
