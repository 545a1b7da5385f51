//! Codebooks, analog beam search, and digital MRT/RZF precoders.

use std::collections::HashMap;

use crate::channel::{steering_overlap, ula_response_sine};
use crate::error::{Error, Result};
use crate::linalg::{norm, CMatrix, Cholesky, C};
use crate::scalar::Real;
use crate::topology::Topology;

/// Unit-norm complex vector.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamVector<T> {
    v: Vec<C<T>>,
}

impl<T: Real> BeamVector<T> {
    /// Scales `v` to unit norm. Fails on the zero vector.
    pub fn normalized(v: Vec<C<T>>) -> Result<Self> {
        let nrm = norm(&v);
        if !(nrm > T::zero()) || !nrm.is_finite() {
            return Err(Error::DegenerateChannel("cannot normalize a zero vector".into()));
        }
        let inv = T::one() / nrm;
        Ok(Self {
            v: v.into_iter().map(|z| z * inv).collect(),
        })
    }

    /// Wraps a vector the caller guarantees to be unit norm.
    pub fn from_unit_unchecked(v: Vec<C<T>>) -> Self {
        Self { v }
    }

    #[inline]
    pub fn as_slice(&self) -> &[C<T>] {
        &self.v
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    pub fn into_vec(self) -> Vec<C<T>> {
        self.v
    }
}

/// Quantized steering codebook, uniform in the sine domain.
#[derive(Debug, Clone)]
pub struct Codebook<T> {
    pub n: usize,
    pub bits: u32,
    /// `sin(theta_k) = -1 + 2 k / 2^bits`.
    pub sines: Vec<T>,
    pub vectors: Vec<BeamVector<T>>,
}

impl<T: Real> Codebook<T> {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, k: usize) -> &BeamVector<T> {
        &self.vectors[k]
    }
}

pub fn build_dft_codebook<T: Real>(n: usize, bits: u32) -> Codebook<T> {
    let size = 1usize << bits;
    let sines: Vec<T> = (0..size)
        .map(|k| T::lit(-1.0 + 2.0 * k as f64 / size as f64))
        .collect();
    let vectors = sines.iter().map(|&s| ula_response_sine(s, n)).collect();
    Codebook {
        n,
        bits,
        sines,
        vectors,
    }
}

/// Indices of the chosen combiner/precoder pair and `|w_ue^* H w_bs|^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamChoice<T> {
    pub ue_cw: u32,
    pub bs_cw: u32,
    pub gain: T,
}

/// Exhaustive codebook search on a dense channel matrix (`N_UE x N_BS`).
/// Ties go to the lowest `(ue index, bs index)` pair.
pub fn analog_beam_search<T: Real>(
    h: &CMatrix<T>,
    cb_bs: &Codebook<T>,
    cb_ue: &Codebook<T>,
) -> Result<BeamChoice<T>> {
    if cb_bs.is_empty() || cb_ue.is_empty() {
        return Err(Error::EmptyCodebook);
    }
    if h.cols != cb_bs.n || h.rows != cb_ue.n {
        return Err(Error::DimensionMismatch {
            expected: cb_ue.n * cb_bs.n,
            got: h.rows * h.cols,
        });
    }
    let hw: Vec<Vec<C<T>>> = cb_bs
        .vectors
        .iter()
        .map(|w| h.mul_vec(w.as_slice()))
        .collect::<Result<_>>()?;
    let mut best = BeamChoice {
        ue_cw: 0,
        bs_cw: 0,
        gain: T::neg_infinity(),
    };
    for (cu, wu) in cb_ue.vectors.iter().enumerate() {
        for (cb, hv) in hw.iter().enumerate() {
            let g = crate::linalg::inner(wu.as_slice(), hv).norm_sqr();
            if g > best.gain {
                best = BeamChoice {
                    ue_cw: cu as u32,
                    bs_cw: cb as u32,
                    gain: g,
                };
            }
        }
    }
    Ok(best)
}

/// `|sum_n coef_n fu_n fb_n|^2`, the beamformed gain of a link in the path
/// domain. `fu_n = w_ue^* a_UE(aoa_n)`, `fb_n = a_BS(aod_n)^* w_bs`.
#[inline]
pub fn path_gain<T: Real>(coefs: &[C<T>], fu: &[C<T>], fb: &[C<T>]) -> T {
    let mut acc = C::new(T::zero(), T::zero());
    for n in 0..coefs.len() {
        acc += (coefs[n] * fu[n]) * fb[n];
    }
    acc.norm_sqr()
}

/// Combiner-side factor `w^* a_UE(aoa)` for a codebook entry with sine `s_cw`.
#[inline]
pub fn ue_factor<T: Real>(n_ue: usize, s_cw: T, sin_aoa: T) -> C<T> {
    steering_overlap(n_ue, s_cw, sin_aoa)
}

/// Precoder-side factor `a_BS(aod)^* w` for a codebook entry with sine `s_cw`.
#[inline]
pub fn bs_factor<T: Real>(n_bs: usize, s_cw: T, sin_aod: T) -> C<T> {
    steering_overlap(n_bs, sin_aod, s_cw)
}

/// Exhaustive analog beam search for one link in the path domain.
///
/// The per-path factors of every codebook entry are tabulated once per link
/// so each coherence interval costs `|W_UE| |W_BS| N_paths` multiply-adds.
#[derive(Debug, Clone)]
pub struct PathBeamSearch<T> {
    n_paths: usize,
    /// `[ue_cw][path]`
    fu: Vec<C<T>>,
    /// `[bs_cw][path]`
    fb: Vec<C<T>>,
    n_ue_cw: usize,
    n_bs_cw: usize,
}

impl<T: Real> PathBeamSearch<T> {
    pub fn new(sin_aoa: &[T], sin_aod: &[T], cb_ue: &Codebook<T>, cb_bs: &Codebook<T>) -> Self {
        let n_paths = sin_aoa.len();
        let mut fu = Vec::with_capacity(cb_ue.len() * n_paths);
        for &s in &cb_ue.sines {
            fu.extend(sin_aoa.iter().map(|&a| ue_factor(cb_ue.n, s, a)));
        }
        let mut fb = Vec::with_capacity(cb_bs.len() * n_paths);
        for &s in &cb_bs.sines {
            fb.extend(sin_aod.iter().map(|&a| bs_factor(cb_bs.n, s, a)));
        }
        Self {
            n_paths,
            fu,
            fb,
            n_ue_cw: cb_ue.len(),
            n_bs_cw: cb_bs.len(),
        }
    }

    #[inline]
    pub fn fu(&self, cw: usize) -> &[C<T>] {
        &self.fu[cw * self.n_paths..(cw + 1) * self.n_paths]
    }

    #[inline]
    pub fn fb(&self, cw: usize) -> &[C<T>] {
        &self.fb[cw * self.n_paths..(cw + 1) * self.n_paths]
    }

    /// Best pair for path coefficients `coefs` (scaled gains). Ties go to the
    /// lowest `(ue index, bs index)` pair.
    pub fn search(&self, coefs: &[C<T>]) -> Result<BeamChoice<T>> {
        if self.n_ue_cw == 0 || self.n_bs_cw == 0 {
            return Err(Error::EmptyCodebook);
        }
        let np = self.n_paths;
        let mut q = vec![C::new(T::zero(), T::zero()); np];
        let mut best = BeamChoice {
            ue_cw: 0,
            bs_cw: 0,
            gain: T::neg_infinity(),
        };
        for cu in 0..self.n_ue_cw {
            let fu = self.fu(cu);
            for n in 0..np {
                q[n] = coefs[n] * fu[n];
            }
            for cb in 0..self.n_bs_cw {
                let fb = &self.fb[cb * np..(cb + 1) * np];
                let mut acc = C::new(T::zero(), T::zero());
                for n in 0..np {
                    acc += q[n] * fb[n];
                }
                let g = acc.norm_sqr();
                if g > best.gain {
                    best = BeamChoice {
                        ue_cw: cu as u32,
                        bs_cw: cb as u32,
                        gain: g,
                    };
                }
            }
        }
        Ok(best)
    }

    /// Best combiner for a fixed precoder, given `t_n = a_BS(aod_n)^* w_bs`.
    pub fn best_combiner(&self, coefs: &[C<T>], t: &[C<T>]) -> (u32, T) {
        let mut best = (0u32, T::neg_infinity());
        for cu in 0..self.n_ue_cw {
            let g = path_gain(coefs, self.fu(cu), t);
            if g > best.1 {
                best = (cu as u32, g);
            }
        }
        best
    }
}

/// Which effective-channel rows are stacked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EffScope {
    /// Every served UE, rows toward every BS of the network.
    FullNetwork,
    /// UEs served by operator `z`, rows toward the operator's BSs.
    Operator(usize),
    /// UEs served by BS `b`, rows toward `b` only.
    Cell(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EffRow<T> {
    pub ue: usize,
    /// BS whose channel the row describes.
    pub bs: usize,
    /// `(w_u)^* H_{bs,u}`, length `N_BS`.
    pub vector: Vec<C<T>>,
}

/// Stacked combiner-processed channel rows.
#[derive(Debug, Clone)]
pub struct EffectiveChannel<T> {
    pub scope: EffScope,
    pub n_bs_antennas: usize,
    pub rows: Vec<EffRow<T>>,
    pub row_index: HashMap<(usize, usize), usize>,
}

impl<T: Real> EffectiveChannel<T> {
    pub fn from_rows(scope: EffScope, n_bs_antennas: usize, rows: Vec<EffRow<T>>) -> Self {
        let row_index = rows
            .iter()
            .enumerate()
            .map(|(m, r)| ((r.bs, r.ue), m))
            .collect();
        Self {
            scope,
            n_bs_antennas,
            rows,
            row_index,
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row_of(&self, b: usize, u: usize) -> Result<usize> {
        self.row_index
            .get(&(b, u))
            .copied()
            .ok_or(Error::MissingChannel { bs: b, ue: u })
    }

    /// Rows whose channel originates at BS `b`, in their original order.
    pub fn transmitter_block(&self, b: usize) -> Self {
        let rows = self.rows.iter().filter(|r| r.bs == b).cloned().collect();
        Self::from_rows(self.scope, self.n_bs_antennas, rows)
    }
}

/// Stacks `(w_u)^* H_iu` rows per the scope rules. `serving[u]` is the BS
/// serving UE `u` (`None` when unassociated); `row(i, u, w_u)` returns the
/// combined channel row of BS `i` toward UE `u`.
pub fn build_effective_channel<T, F>(
    topology: &Topology,
    serving: &[Option<usize>],
    combiners: &[Option<BeamVector<T>>],
    scope: EffScope,
    n_bs_antennas: usize,
    mut row: F,
) -> Result<EffectiveChannel<T>>
where
    T: Real,
    F: FnMut(usize, usize, &BeamVector<T>) -> Result<Vec<C<T>>>,
{
    let nb = topology.bss.len();
    let (serving_bss, row_bss): (Vec<usize>, Vec<usize>) = match scope {
        EffScope::FullNetwork => ((0..nb).collect(), (0..nb).collect()),
        EffScope::Operator(z) => (topology.bss_of(z), topology.bss_of(z)),
        EffScope::Cell(b) => {
            if b >= nb {
                return Err(Error::DimensionMismatch { expected: nb, got: b });
            }
            (vec![b], vec![b])
        }
    };
    let mut rows = Vec::new();
    for &b in &serving_bss {
        for (u, s) in serving.iter().enumerate() {
            if *s != Some(b) {
                continue;
            }
            let w = combiners
                .get(u)
                .and_then(Option::as_ref)
                .ok_or(Error::MissingCombiner(u))?;
            for &i in &row_bss {
                let v = row(i, u, w)?;
                if v.len() != n_bs_antennas {
                    return Err(Error::DimensionMismatch {
                        expected: n_bs_antennas,
                        got: v.len(),
                    });
                }
                rows.push(EffRow { ue: u, bs: i, vector: v });
            }
        }
    }
    Ok(EffectiveChannel::from_rows(scope, n_bs_antennas, rows))
}

pub fn mrt_precoder<T: Real>(eff: &EffectiveChannel<T>, b: usize, u: usize) -> Result<BeamVector<T>> {
    let m = eff.row_of(b, u)?;
    let v = eff.rows[m].vector.iter().map(|z| z.conj()).collect();
    BeamVector::normalized(v).map_err(|_| {
        Error::DegenerateChannel(format!("zero effective channel row for BS {b} -> UE {u}"))
    })
}

/// RZF precoders for several `(b, u)` targets sharing one factorization:
/// column `m` of `H^* (H H^* + c I)^{-1}`, unit-normalized.
pub fn rzf_precoders<T: Real>(
    eff: &EffectiveChannel<T>,
    targets: &[(usize, usize)],
    c: T,
) -> Result<Vec<BeamVector<T>>> {
    if !(c > T::zero()) {
        return Err(Error::InvalidConfig("RZF regularizer must be > 0".into()));
    }
    let m_rows = eff.len();
    let n = eff.n_bs_antennas;
    let zero = C::new(T::zero(), T::zero());
    let idx: Vec<usize> = targets
        .iter()
        .map(|&(b, u)| eff.row_of(b, u))
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(targets.len());
    if m_rows <= n {
        // (H H^* + c I) x = e_m, then w = H^* x.
        let mut g = vec![zero; m_rows * m_rows];
        for i in 0..m_rows {
            for j in 0..=i {
                let v = crate::linalg::inner(&eff.rows[j].vector, &eff.rows[i].vector);
                g[i * m_rows + j] = v;
                g[j * m_rows + i] = v.conj();
            }
            g[i * m_rows + i] += C::new(c, T::zero());
        }
        let chol = Cholesky::new(&g, m_rows)?;
        for &m in &idx {
            let mut x = vec![zero; m_rows];
            x[m] = C::new(T::one(), T::zero());
            chol.solve_in_place(&mut x);
            let mut w = vec![zero; n];
            for (r, xr) in x.iter().enumerate() {
                for (wk, h) in w.iter_mut().zip(&eff.rows[r].vector) {
                    *wk += h.conj() * xr;
                }
            }
            out.push(BeamVector::normalized(w)?);
        }
    } else {
        // Push-through form: (H^* H + c I)^{-1} H^* e_m.
        let mut a = vec![zero; n * n];
        for row in &eff.rows {
            for i in 0..n {
                let hi = row.vector[i].conj();
                for j in 0..=i {
                    a[i * n + j] += hi * row.vector[j];
                }
            }
        }
        for i in 0..n {
            a[i * n + i] += C::new(c, T::zero());
            for j in 0..i {
                a[j * n + i] = a[i * n + j].conj();
            }
        }
        let chol = Cholesky::new(&a, n)?;
        for &m in &idx {
            let mut w: Vec<C<T>> = eff.rows[m].vector.iter().map(|z| z.conj()).collect();
            chol.solve_in_place(&mut w);
            out.push(BeamVector::normalized(w)?);
        }
    }
    Ok(out)
}

pub fn rzf_precoder<T: Real>(eff: &EffectiveChannel<T>, b: usize, u: usize, c: T) -> Result<BeamVector<T>> {
    Ok(rzf_precoders(eff, &[(b, u)], c)?.remove(0))
}

/// `lambda_b = p / mean_s tr(W_s W_s^*)` over the precoders of BS `b` in
/// each sampled coherence interval.
pub fn power_normalizer<T: Real>(b: usize, p: T, samples: &[Vec<BeamVector<T>>]) -> Result<T> {
    if samples.is_empty() || samples.iter().all(Vec::is_empty) {
        return Err(Error::NoServedUe(b));
    }
    let total: T = samples
        .iter()
        .map(|cols| cols.iter().map(|w| crate::linalg::norm_sqr(w.as_slice())).sum::<T>())
        .sum();
    let mean = total / T::from_usize_lossy(samples.len());
    Ok(p / mean)
}
