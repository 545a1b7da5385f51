use proptest::prelude::*;

use mmshare::association::ProblemSpec;
use mmshare::beamforming::{analog_beam_search, build_dft_codebook};
use mmshare::channel::{ula_response, ChannelRealization, PathStats};
use mmshare::linalg::{inner, C};
use mmshare::topology::Node;
use mmshare::{
    check_association, greedy_association, problem_score, solve, Network64, ProblemId, ScenarioConfig, SharingMode,
    Topology,
};

fn small_cfg(problem: ProblemId, num_operators: usize) -> (ProblemSpec, ScenarioConfig) {
    let cfg = ScenarioConfig {
        num_operators,
        area_side: 150.0,
        n_bs_antennas: 16,
        n_ue_antennas: 4,
        n_rf_chains: 2,
        n_fading_samples: 4,
        sharing_mode: SharingMode::Full,
        ..Default::default()
    };
    let spec = ProblemSpec::new(problem, &cfg).unwrap();
    let cfg = spec.apply(&cfg);
    (spec, cfg)
}

/// Two BSs per operator and `per_op` UEs each, positions from `xy`.
fn topology(cfg: &ScenarioConfig, per_op: usize, xy: &[(f64, f64)]) -> Topology {
    let z = cfg.num_operators;
    let mut it = xy.iter().cycle();
    let mut node = |operator| {
        let &(x, y) = it.next().unwrap();
        Node {
            x: x * cfg.area_side,
            y: y * cfg.area_side,
            operator,
        }
    };
    let bss = (0..z).flat_map(|o| [o, o]).map(&mut node).collect();
    let ues = (0..z).flat_map(|o| std::iter::repeat_n(o, per_op)).map(&mut node).collect();
    Topology {
        area_side: cfg.area_side,
        num_operators: z,
        bss,
        ues,
    }
}

fn coords() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((0.0..1.0f64, 0.0..1.0f64), 16)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn steering_vectors_have_unit_norm(theta in -1.5f64..1.5, n in 1usize..300) {
        let a = ula_response(theta, n);
        prop_assert!((inner(a.as_slice(), a.as_slice()).norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn codebook_vectors_have_unit_norm(log_n in 0u32..9, extra in 0u32..2) {
        let n = 1usize << log_n;
        let cb = build_dft_codebook::<f64>(n, log_n + extra);
        for v in &cb.vectors {
            prop_assert!((inner(v.as_slice(), v.as_slice()).norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn steering_correlation_is_bounded_and_symmetric(a in -1.5f64..1.5, b in -1.5f64..1.5, n in 1usize..512) {
        let (va, vb) = (ula_response(a, n), ula_response(b, n));
        let ab = inner(va.as_slice(), vb.as_slice()).norm();
        let ba = inner(vb.as_slice(), va.as_slice()).norm();
        prop_assert!(ab <= 1.0 + 1e-12);
        prop_assert!((ab - ba).abs() < 1e-12);
    }

    #[test]
    fn steering_correlation_vanishes_between_grid_angles(log_n in 2u32..10, i in 0usize..1024, j in 0usize..1024) {
        let n = 1usize << log_n;
        let (i, j) = (i % n, j % n);
        prop_assume!(i != j);
        let cb = build_dft_codebook::<f64>(n, log_n);
        let c = inner(cb.vectors[i].as_slice(), cb.vectors[j].as_slice()).norm();
        prop_assert!(c < 1e-9, "{c}");
    }

    #[test]
    fn single_path_beam_search_finds_the_path(
        log_bs in 2u32..8, log_ue in 0u32..5, i in 0usize..256, j in 0usize..16,
        re in -2.0f64..2.0, im in -2.0f64..2.0,
    ) {
        let (n_bs, n_ue) = (1usize << log_bs, 1usize << log_ue);
        let cb_bs = build_dft_codebook::<f64>(n_bs, log_bs);
        let cb_ue = build_dft_codebook::<f64>(n_ue, log_ue);
        let (i, j) = (i % n_bs, j % n_ue);
        let g = C::new(re, im);
        prop_assume!(g.norm() > 1e-3);
        let stats = PathStats {
            n_paths: 1,
            aod: vec![cb_bs.sines[i].asin()],
            aoa: vec![cb_ue.sines[j].asin()],
            path_loss: 1.0,
            los: true,
        };
        let h = ChannelRealization { stats: &stats, gains: vec![g], n_bs, n_ue }.matrix();
        let best = analog_beam_search(&h, &cb_bs, &cb_ue).unwrap();
        let want = (n_bs * n_ue) as f64 * g.norm_sqr();
        prop_assert!((best.gain - want).abs() <= 1e-9 * want);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn solving_is_deterministic(xy in coords(), seed in 0u64..1000, p in 0usize..3) {
        let problem = [ProblemId::P1, ProblemId::P2, ProblemId::Rssi][p];
        let (spec, cfg) = small_cfg(problem, 2);
        let a = solve(&Network64::from_topology(&cfg, topology(&cfg, 3, &xy), seed).unwrap(), &spec).unwrap();
        let b = solve(&Network64::from_topology(&cfg, topology(&cfg, 3, &xy), seed).unwrap(), &spec).unwrap();
        prop_assert_eq!(a.association.serving_all(), b.association.serving_all());
        prop_assert_eq!(
            a.report.per_ue_rate.iter().map(|r| r.to_bits()).collect::<Vec<_>>(),
            b.report.per_ue_rate.iter().map(|r| r.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn joint_solution_is_no_worse_than_greedy(xy in coords(), seed in 0u64..1000) {
        let (spec, cfg) = small_cfg(ProblemId::P1, 2);
        let net = Network64::from_topology(&cfg, topology(&cfg, 3, &xy), seed).unwrap();
        let sol = solve(&net, &spec).unwrap();
        check_association(&net, &sol.association, Some(spec.load_cap(&cfg))).unwrap();
        let all: Vec<usize> = (0..net.n_ue()).collect();
        let greedy = greedy_association(&net, &all, spec.load_cap(&cfg)).unwrap();
        let ideal = sol.ideal.as_deref();
        let s = problem_score(&net, &spec, &sol.association, ideal).unwrap().0;
        let g = problem_score(&net, &spec, &greedy, ideal).unwrap().0;
        prop_assert!(s <= g + 1e-9 * g.abs().max(1.0), "solver {s} greedy {g}");
    }

    #[test]
    fn single_operator_joint_matches_selfish(xy in coords(), seed in 0u64..1000) {
        // With one operator there is no inter-operator interference to
        // ignore, so the coordinated solve cannot do worse.
        let (s1, cfg) = small_cfg(ProblemId::P1, 1);
        let s2 = ProblemSpec::new(ProblemId::P2, &cfg).unwrap();
        let net = Network64::from_topology(&cfg, topology(&cfg, 4, &xy), seed).unwrap();
        let p1 = solve(&net, &s1).unwrap();
        let p2 = solve(&net, &s2).unwrap();
        let (u1, u2) = (p1.objective[0], p2.objective[0]);
        prop_assert!(u1 >= u2 - 1e-9 * u2.abs().max(1.0), "p1 {u1} p2 {u2}");
        let rep = p2.report.per_operator_utility[0];
        prop_assert!((rep - u2).abs() <= 1e-9 * u2.abs().max(1.0));
    }

    #[test]
    fn decomposed_solve_ignores_operator_labels(xy in coords(), seed in 0u64..1000) {
        let (spec, cfg) = small_cfg(ProblemId::P2, 2);
        let topo = topology(&cfg, 3, &xy);
        let mut swapped = topo.clone();
        for n in swapped.bss.iter_mut().chain(swapped.ues.iter_mut()) {
            n.operator = 1 - n.operator;
        }
        let a = solve(&Network64::from_topology(&cfg, topo, seed).unwrap(), &spec).unwrap();
        let b = solve(&Network64::from_topology(&cfg, swapped, seed).unwrap(), &spec).unwrap();
        prop_assert_eq!(a.association.serving_all(), b.association.serving_all());
        for (x, y) in a.report.per_ue_rate.iter().zip(&b.report.per_ue_rate) {
            prop_assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0));
        }
        let (fa, fb) = (&a.objective, &b.objective);
        prop_assert!((fa[0] - fb[1]).abs() <= 1e-9 * fa[0].abs().max(1.0));
        prop_assert!((fa[1] - fb[0]).abs() <= 1e-9 * fa[1].abs().max(1.0));
    }
}
