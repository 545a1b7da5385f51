//! Digital precoding rates against a dense recomputation with an
//! independent linear solver.

use approx::assert_relative_eq;
use mmshare::association::greedy_association;
use mmshare::engine::make_engine;
use mmshare::linalg::C;
use mmshare::{evaluate, Association, Network64, Precoder, ProblemId, ProblemSpec, ScenarioConfig};

fn cfg(precoder: Precoder) -> ScenarioConfig {
    ScenarioConfig {
        area_side: 150.0,
        n_bs_antennas: 8,
        n_ue_antennas: 4,
        n_fading_samples: 3,
        max_candidates: 3,
        precoder,
        ..Default::default()
    }
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
fn solve(mut a: Vec<Vec<C<f64>>>, mut b: Vec<C<f64>>) -> Vec<C<f64>> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n).max_by(|&x, &y| a[x][k].norm().total_cmp(&a[y][k].norm())).unwrap();
        a.swap(k, p);
        b.swap(k, p);
        for r in k + 1..n {
            let f = a[r][k] / a[k][k];
            for c in k..n {
                let t = a[k][c];
                a[r][c] -= f * t;
            }
            let t = b[k];
            b[r] -= f * t;
        }
    }
    let mut x = vec![C::new(0.0, 0.0); n];
    for k in (0..n).rev() {
        let mut acc = b[k];
        for c in k + 1..n {
            acc -= a[k][c] * x[c];
        }
        x[k] = acc / a[k][k];
    }
    x
}

fn normalize(v: Vec<C<f64>>) -> Vec<C<f64>> {
    let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / n).collect()
}

fn dot(a: &[C<f64>], b: &[C<f64>]) -> C<f64> {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn dense_rates(net: &Network64, precoder: Precoder, assoc: &Association) -> Vec<f64> {
    let cfg = &net.config;
    let nb = net.n_bs();
    let nu = net.n_ue();
    let p = cfg.tx_power;
    let w = cfg.total_bandwidth;
    let mut acc = vec![0.0; nu];
    for s in 0..net.n_samples() {
        // rows[i][u] = w_u^* H_iu
        let rows: Vec<Vec<Vec<C<f64>>>> = (0..nb)
            .map(|i| {
                (0..nu)
                    .map(|u| {
                        let b = assoc.serving(u).unwrap();
                        let cw = net.beam(b, u, s).unwrap().ue_cw as usize;
                        let h = net.realization(i, u, s).matrix();
                        h.left_mul_conj(net.cb_ue.get(cw).as_slice()).unwrap()
                    })
                    .collect()
            })
            .collect();
        let mut pre: Vec<Vec<(usize, Vec<C<f64>>)>> = vec![Vec::new(); nb];
        for i in 0..nb {
            let members = &assoc.cells()[i];
            if members.is_empty() {
                continue;
            }
            match precoder {
                Precoder::Mrt => {
                    for &j in members {
                        pre[i].push((j, normalize(rows[i][j].iter().map(|z| z.conj()).collect())));
                    }
                }
                _ => {
                    let scope: Vec<usize> = (0..nu).collect();
                    let c = members.len() as f64 * cfg.noise_psd * w / p;
                    let m = scope.len();
                    let gram: Vec<Vec<C<f64>>> = (0..m)
                        .map(|a| {
                            (0..m)
                                .map(|b| {
                                    let v: C<f64> = rows[i][scope[a]]
                                        .iter()
                                        .zip(&rows[i][scope[b]])
                                        .map(|(x, y)| x * y.conj())
                                        .sum();
                                    if a == b {
                                        v + c
                                    } else {
                                        v
                                    }
                                })
                                .collect()
                        })
                        .collect();
                    for &j in members {
                        let k = scope.iter().position(|&x| x == j).unwrap();
                        let mut e = vec![C::new(0.0, 0.0); m];
                        e[k] = C::new(1.0, 0.0);
                        let x = solve(gram.clone(), e);
                        let mut col = vec![C::new(0.0, 0.0); cfg.n_bs_antennas];
                        for (r, xr) in x.iter().enumerate() {
                            for (ck, h) in col.iter_mut().zip(&rows[i][scope[r]]) {
                                *ck += h.conj() * xr;
                            }
                        }
                        pre[i].push((j, normalize(col)));
                    }
                }
            }
        }
        for u in 0..nu {
            let b = assoc.serving(u).unwrap();
            let mut desired = 0.0;
            let mut interf = 0.0;
            for i in 0..nb {
                if pre[i].is_empty() {
                    continue;
                }
                let lambda = p / pre[i].len() as f64;
                for (j, wij) in &pre[i] {
                    let g = lambda * dot(&rows[i][u], wij).norm_sqr();
                    if i == b && *j == u {
                        desired = g;
                    } else {
                        interf += g;
                    }
                }
            }
            acc[u] += w * (1.0 + desired / (interf + w * cfg.noise_psd)).log2();
        }
    }
    acc.iter().map(|a| a / net.n_samples() as f64).collect()
}

#[test]
fn digital_rates_match_dense_recomputation() {
    for precoder in [Precoder::Mrt, Precoder::Rzf] {
        let cfg = cfg(precoder);
        let net = Network64::new(&cfg, 21).unwrap();
        let spec = ProblemSpec::new(ProblemId::P4, &cfg).unwrap();
        let all: Vec<usize> = (0..net.n_ue()).collect();
        let assoc = greedy_association(&net, &all, cfg.n_bs_antennas).unwrap();
        let rep = evaluate(&net, spec.report_spec(&cfg).unwrap(), &assoc).unwrap();
        let dense = dense_rates(&net, precoder, &assoc);
        for (a, b) in rep.per_ue_rate.iter().zip(&dense) {
            assert_relative_eq!(*a, *b, max_relative = 1e-8);
        }
    }
}

#[test]
fn digital_proposals_match_fresh_evaluation() {
    let cfg = cfg(Precoder::Rzf);
    let net = Network64::new(&cfg, 22).unwrap();
    let spec = ProblemSpec::new(ProblemId::P5, &cfg).unwrap();
    let all: Vec<usize> = (0..net.n_ue()).collect();
    let init = greedy_association(&net, &all, cfg.n_bs_antennas).unwrap();
    let es = spec.engine_spec(&cfg, vec![0, 1, 2, 3]).unwrap();
    let mut engine = make_engine(&net, es.clone(), &init).unwrap();
    for u in 0..net.n_ue().min(6) {
        let b = *net.candidates[u].last().unwrap();
        let mut applied = engine.association().clone();
        applied.set(u, Some(b));
        let fresh = evaluate(&net, es.clone(), &applied).unwrap();
        assert_eq!(engine.propose(&[(u, b)]).unwrap(), fresh.per_operator_utility);
        engine.commit(&[(u, b)]).unwrap();
        assert_eq!(engine.report().per_ue_rate, fresh.per_ue_rate);
    }
}
