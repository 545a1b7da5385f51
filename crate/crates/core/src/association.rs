//! Cell association: the assignment type, the problem variants, the
//! greedy + local-search solver and an exhaustive oracle for tiny instances.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Coordination, Precoder, ScenarioConfig, SharingMode};
use crate::engine::{evaluate, make_engine, Change, EngineSpec, Objective};
use crate::error::{Error, Result};
use crate::metrics::{InterOperator, RateReport};
use crate::network::{capacitated_matching, Network};
use crate::scalar::Real;
use crate::topology::BandPlan;

/// Serving BS of every UE, with the per-BS member lists kept in ascending
/// UE order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Association {
    serving: Vec<Option<usize>>,
    cells: Vec<Vec<usize>>,
}

impl Association {
    pub fn empty(n_bs: usize, n_ue: usize) -> Self {
        Self {
            serving: vec![None; n_ue],
            cells: vec![Vec::new(); n_bs],
        }
    }

    pub fn from_serving(n_bs: usize, serving: Vec<Option<usize>>) -> Self {
        let mut cells = vec![Vec::new(); n_bs];
        for (u, b) in serving.iter().enumerate() {
            if let Some(b) = b {
                cells[*b].push(u);
            }
        }
        Self { serving, cells }
    }

    pub fn n_bs(&self) -> usize {
        self.cells.len()
    }

    pub fn n_ue(&self) -> usize {
        self.serving.len()
    }

    #[inline]
    pub fn serving(&self, u: usize) -> Option<usize> {
        self.serving[u]
    }

    pub fn serving_all(&self) -> &[Option<usize>] {
        &self.serving
    }

    /// `A_b` for every BS.
    pub fn cells(&self) -> &[Vec<usize>] {
        &self.cells
    }

    #[inline]
    pub fn load(&self, b: usize) -> usize {
        self.cells[b].len()
    }

    pub fn set(&mut self, u: usize, b: Option<usize>) {
        if let Some(old) = self.serving[u] {
            self.cells[old].retain(|&x| x != u);
        }
        if let Some(new) = b {
            let pos = self.cells[new].partition_point(|&x| x < u);
            self.cells[new].insert(pos, u);
        }
        self.serving[u] = b;
    }

    /// Copies the assignments of `ues` from `other`.
    pub fn merge_from(&mut self, other: &Association, ues: &[usize]) {
        for &u in ues {
            self.set(u, other.serving(u));
        }
    }

    /// Binary matrix `x[b][u]`.
    pub fn matrix(&self) -> Vec<Vec<bool>> {
        let mut x = vec![vec![false; self.n_ue()]; self.n_bs()];
        for (u, b) in self.serving.iter().enumerate() {
            if let Some(b) = b {
                x[*b][u] = true;
            }
        }
        x
    }
}

/// Checks one serving BS per UE, operator blocks, and the load cap (if any).
pub fn check_association<T: Real>(net: &Network<T>, assoc: &Association, cap: Option<usize>) -> Result<()> {
    let topo = &net.topology;
    if assoc.n_ue() != net.n_ue() || assoc.n_bs() != net.n_bs() {
        return Err(Error::DimensionMismatch {
            expected: net.n_ue(),
            got: assoc.n_ue(),
        });
    }
    for u in 0..net.n_ue() {
        let b = assoc.serving(u).ok_or(Error::UnassociatedUe(u))?;
        if topo.bss[b].operator != topo.ues[u].operator {
            return Err(Error::Infeasible(format!(
                "UE {u} of operator {} served by BS {b} of operator {}",
                topo.ues[u].operator, topo.bss[b].operator
            )));
        }
    }
    let x = assoc.matrix();
    for u in 0..net.n_ue() {
        let n = x.iter().filter(|row| row[u]).count();
        if n != 1 {
            return Err(Error::Infeasible(format!("UE {u} has {n} serving BSs")));
        }
    }
    if let Some(cap) = cap {
        for b in 0..net.n_bs() {
            if assoc.load(b) > cap {
                return Err(Error::Infeasible(format!("BS {b} serves {} UEs, cap {cap}", assoc.load(b))));
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ProblemId {
    /// Joint analog association with full coordination.
    P1,
    /// Per-operator analog association, inter-operator interference unknown.
    P2,
    /// Per-operator analog association on exclusive bands.
    P3,
    /// Joint digital association with full coordination.
    P4,
    /// Per-operator digital association, inter-operator interference unknown.
    P5,
    /// Per-operator digital association on exclusive bands.
    P6,
    /// Strongest long-term received power, no optimization.
    Rssi,
}

impl ProblemId {
    pub const ALL: [ProblemId; 7] = [
        ProblemId::P1,
        ProblemId::P2,
        ProblemId::P3,
        ProblemId::P4,
        ProblemId::P5,
        ProblemId::P6,
        ProblemId::Rssi,
    ];

    pub fn is_digital(self) -> bool {
        matches!(self, ProblemId::P4 | ProblemId::P5 | ProblemId::P6)
    }

    pub fn is_joint(self) -> bool {
        matches!(self, ProblemId::P1 | ProblemId::P4)
    }

    pub fn is_exclusive(self) -> bool {
        matches!(self, ProblemId::P3 | ProblemId::P6)
    }

    /// The per-operator problem whose optima form the ideal point.
    pub fn selfish(self) -> ProblemId {
        match self {
            ProblemId::P1 => ProblemId::P2,
            ProblemId::P4 => ProblemId::P5,
            p => p,
        }
    }

    /// The problem a scenario's coordination, sharing and precoder settings
    /// describe.
    pub fn from_config(cfg: &ScenarioConfig) -> ProblemId {
        let digital = cfg.precoder.is_digital();
        match (cfg.coordination, cfg.sharing_mode, digital) {
            (Coordination::None, _, _) => ProblemId::Rssi,
            (_, SharingMode::Exclusive, false) => ProblemId::P3,
            (_, SharingMode::Exclusive, true) => ProblemId::P6,
            (Coordination::Full, _, false) => ProblemId::P1,
            (Coordination::Full, _, true) => ProblemId::P4,
            (Coordination::IntraOnly, _, false) => ProblemId::P2,
            (Coordination::IntraOnly, _, true) => ProblemId::P5,
        }
    }
}

impl FromStr for ProblemId {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        ProblemId::ALL
            .into_iter()
            .find(|p| p.to_string().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown problem `{}`", s.trim()))
    }
}

impl fmt::Display for ProblemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProblemId::P1 => "p1",
            ProblemId::P2 => "p2",
            ProblemId::P3 => "p3",
            ProblemId::P4 => "p4",
            ProblemId::P5 => "p5",
            ProblemId::P6 => "p6",
            ProblemId::Rssi => "rssi",
        })
    }
}

/// A problem together with the precoder, coordination, band plan and
/// treatment of inter-operator interference it implies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub problem: ProblemId,
    pub precoder: Precoder,
    pub coordination: Coordination,
    pub sharing: SharingMode,
    pub inter_operator: InterOperator,
}

impl ProblemSpec {
    /// Resolves `problem` against a scenario. Analog problems use analog
    /// precoding, digital ones the scenario's digital precoder (RZF if the
    /// scenario is analog); exclusive problems force exclusive bands.
    pub fn new(problem: ProblemId, cfg: &ScenarioConfig) -> Result<Self> {
        use ProblemId::*;
        let precoder = match problem {
            P1 | P2 | P3 => Precoder::Analog,
            P4 | P5 | P6 => {
                if cfg.precoder.is_digital() {
                    cfg.precoder
                } else {
                    Precoder::Rzf
                }
            }
            Rssi => cfg.precoder,
        };
        let sharing = if problem.is_exclusive() {
            SharingMode::Exclusive
        } else {
            cfg.sharing_mode
        };
        if matches!(problem, P1 | P2 | P4 | P5) && sharing == SharingMode::Exclusive {
            return Err(Error::InvalidConfig(format!(
                "{problem} shares spectrum; use p3/p6 for exclusive bands"
            )));
        }
        let (coordination, inter_operator) = match problem {
            P1 | P4 => (Coordination::Full, InterOperator::Actual),
            P2 | P5 => (Coordination::IntraOnly, InterOperator::Ignored),
            P3 | P6 => (Coordination::IntraOnly, InterOperator::Actual),
            Rssi => (Coordination::None, InterOperator::Actual),
        };
        Ok(Self {
            problem,
            precoder,
            coordination,
            sharing,
            inter_operator,
        })
    }

    /// The scenario as this problem sees it.
    pub fn apply(&self, cfg: &ScenarioConfig) -> ScenarioConfig {
        ScenarioConfig {
            precoder: self.precoder,
            coordination: self.coordination,
            sharing_mode: self.sharing,
            ..cfg.clone()
        }
    }

    pub fn load_cap(&self, cfg: &ScenarioConfig) -> usize {
        if self.precoder.is_digital() {
            cfg.n_bs_antennas
        } else {
            cfg.n_rf_chains
        }
    }

    fn band(&self, cfg: &ScenarioConfig) -> Result<BandPlan> {
        BandPlan::new(cfg.total_bandwidth, cfg.num_operators, self.sharing)
    }

    /// Evaluator setup for the problem's own objective over `scope_ops`.
    pub fn engine_spec(&self, cfg: &ScenarioConfig, scope_ops: Vec<usize>) -> Result<EngineSpec> {
        Ok(EngineSpec {
            band: self.band(cfg)?,
            inter_operator: self.inter_operator,
            scope_ops,
            precoder: self.precoder,
            coordination: self.coordination,
        })
    }

    /// Evaluator setup for reported rates: all operators, actual
    /// interference.
    pub fn report_spec(&self, cfg: &ScenarioConfig) -> Result<EngineSpec> {
        Ok(EngineSpec {
            inter_operator: InterOperator::Actual,
            ..self.engine_spec(cfg, (0..cfg.num_operators).collect())?
        })
    }
}

/// Weighted Tchebycheff distance `max_z w_z (ideal_z - f_z)` of each
/// objective vector; lower is better. Without an explicit ideal point the
/// per-objective best over `candidates` is used.
pub fn tchebycheff_scalarize(candidates: &[Vec<f64>], weights: &[f64], ideal: Option<&[f64]>) -> Result<Vec<f64>> {
    let z = weights.len();
    if let Some(f) = candidates.iter().find(|f| f.len() != z) {
        return Err(Error::DimensionMismatch { expected: z, got: f.len() });
    }
    if weights.iter().any(|&w| !(w > 0.0)) {
        return Err(Error::InvalidConfig("Tchebycheff weights must be > 0".into()));
    }
    let ideal: Vec<f64> = match ideal {
        Some(p) if p.len() != z => return Err(Error::DimensionMismatch { expected: z, got: p.len() }),
        Some(p) => p.to_vec(),
        None => (0..z)
            .map(|k| candidates.iter().map(|f| f[k]).fold(f64::NEG_INFINITY, f64::max))
            .collect(),
    };
    Ok(candidates.iter().map(|f| tchebycheff(f, weights, &ideal).0).collect())
}

/// `(max_z w_z (ideal_z - f_z), sum_z w_z (ideal_z - f_z))`.
fn tchebycheff(f: &[f64], weights: &[f64], ideal: &[f64]) -> (f64, f64) {
    let mut primary = f64::NEG_INFINITY;
    let mut secondary = 0.0;
    for ((fz, w), i) in f.iter().zip(weights).zip(ideal) {
        let d = w * (i - fz);
        primary = primary.max(d);
        secondary += d;
    }
    (primary, secondary)
}

/// Lexicographic score to minimize.
type Score = (f64, f64);

fn improves(new: Score, cur: Score) -> bool {
    let tol = |x: f64| 1e-12 * x.abs().max(1.0);
    if new.0 < cur.0 - tol(cur.0) {
        return true;
    }
    new.0 <= cur.0 && new.1 < cur.1 - tol(cur.1)
}

fn better(a: Score, b: Score) -> bool {
    a.0 < b.0 || (a.0 == b.0 && a.1 < b.1)
}

/// Each UE of `ues` goes, strongest UE first, to its highest mean-gain
/// candidate with spare capacity. Falls back to a capacitated matching when
/// the greedy pass strands a UE.
pub fn greedy_association<T: Real>(net: &Network<T>, ues: &[usize], cap: usize) -> Result<Association> {
    let best_gain = |u: usize| -> Result<T> {
        let mut g = T::neg_infinity();
        for &b in &net.candidates[u] {
            g = g.max(net.link(b, u)?.mean_gain);
        }
        Ok(g)
    };
    let mut order: Vec<(usize, T)> = ues.iter().map(|&u| Ok((u, best_gain(u)?))).collect::<Result<_>>()?;
    order.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal).then(a.0.cmp(&b.0)));
    let mut assoc = Association::empty(net.n_bs(), net.n_ue());
    let mut stranded = false;
    for &(u, _) in &order {
        let mut pick: Option<(usize, T)> = None;
        for &b in &net.candidates[u] {
            if assoc.load(b) >= cap {
                continue;
            }
            let g = net.link(b, u)?.mean_gain;
            if pick.is_none_or(|(_, pg)| g > pg) {
                pick = Some((b, g));
            }
        }
        match pick {
            Some((b, _)) => assoc.set(u, Some(b)),
            None => {
                stranded = true;
                break;
            }
        }
    }
    if stranded {
        let (srv, unmatched) = capacitated_matching(ues, &net.candidates, net.n_bs(), cap);
        if !unmatched.is_empty() {
            return Err(Error::Infeasible(format!("{} UEs cannot be placed under load cap {cap}", unmatched.len())));
        }
        assoc = Association::empty(net.n_bs(), net.n_ue());
        for (&u, b) in ues.iter().zip(srv) {
            assoc.set(u, b);
        }
    }
    Ok(assoc)
}

/// Best-improvement local search over single-UE moves and same-operator
/// swaps among `ues`. Returns the number of accepted steps.
pub fn local_search(
    engine: &mut dyn Objective,
    net_candidates: &[Vec<usize>],
    ue_operator: &[usize],
    ues: &[usize],
    cap: usize,
    score: &dyn Fn(&[f64]) -> Score,
    max_steps: usize,
) -> Result<usize> {
    let mut steps = 0;
    let mut current = score(engine.utilities());
    while steps < max_steps {
        let mut best: Option<(Score, Vec<Change>)> = None;
        let mut consider = |engine: &mut dyn Objective, changes: Vec<Change>| -> Result<()> {
            let s = score(&engine.propose(&changes)?);
            if best.as_ref().is_none_or(|(bs, _)| better(s, *bs)) {
                best = Some((s, changes));
            }
            Ok(())
        };
        for &u in ues {
            let bu = engine.association().serving(u).ok_or(Error::UnassociatedUe(u))?;
            for &b in &net_candidates[u] {
                if b != bu && engine.association().load(b) < cap {
                    consider(engine, vec![(u, b)])?;
                }
            }
        }
        for (a, &u) in ues.iter().enumerate() {
            for &v in &ues[a + 1..] {
                if ue_operator[u] != ue_operator[v] {
                    continue;
                }
                let bu = engine.association().serving(u).ok_or(Error::UnassociatedUe(u))?;
                let bv = engine.association().serving(v).ok_or(Error::UnassociatedUe(v))?;
                if bu != bv && net_candidates[u].contains(&bv) && net_candidates[v].contains(&bu) {
                    consider(engine, vec![(u, bv), (v, bu)])?;
                }
            }
        }
        match best {
            Some((s, changes)) if improves(s, current) => {
                engine.commit(&changes)?;
                current = score(engine.utilities());
                steps += 1;
            }
            _ => break,
        }
    }
    Ok(steps)
}

/// Long-term strongest candidate per UE; ties go to the lowest BS index.
/// Load caps are not enforced.
pub fn rssi_association<T: Real>(net: &Network<T>) -> Result<Association> {
    let mut assoc = Association::empty(net.n_bs(), net.n_ue());
    for u in 0..net.n_ue() {
        let mut pick: Option<(usize, T)> = None;
        for &b in &net.candidates[u] {
            let g = net.link(b, u)?.mean_gain;
            if pick.is_none_or(|(_, pg)| g > pg) {
                pick = Some((b, g));
            }
        }
        let (b, _) = pick.ok_or(Error::Infeasible(format!("UE {u} has no candidate BS")))?;
        assoc.set(u, Some(b));
    }
    Ok(assoc)
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub association: Association,
    /// Per-operator utilities under the problem's own interference model.
    pub objective: Vec<f64>,
    /// Ideal point of the joint problems.
    pub ideal: Option<Vec<f64>>,
    /// Accepted local-search steps.
    pub steps: usize,
    /// Rates with actual interference.
    pub report: RateReport,
}

const MAX_STEPS: usize = 100_000;

fn ue_operators<T>(net: &Network<T>) -> Vec<usize> {
    net.topology.ues.iter().map(|n| n.operator).collect()
}

fn check_network<T: Real>(net: &Network<T>, spec: &ProblemSpec) -> Result<()> {
    if net.config.precoder.is_digital() != spec.precoder.is_digital() {
        return Err(Error::InvalidConfig(format!(
            "{} needs a network sampled for {} precoding",
            spec.problem, spec.precoder
        )));
    }
    Ok(())
}

/// Optimizes operator `z` alone under the problem's own objective.
fn solve_operator<T: Real>(net: &Network<T>, spec: &ProblemSpec, z: usize) -> Result<(Association, f64, usize)> {
    let cfg = &net.config;
    let cap = spec.load_cap(cfg);
    let ues = net.topology.ues_of(z);
    let init = greedy_association(net, &ues, cap)?;
    let mut engine = make_engine(net, spec.engine_spec(cfg, vec![z])?, &init)?;
    let score = move |f: &[f64]| (-f[z], 0.0);
    let steps = local_search(
        engine.as_mut(),
        &net.candidates,
        &ue_operators(net),
        &ues,
        cap,
        &score,
        MAX_STEPS,
    )?;
    Ok((engine.association().clone(), engine.utilities()[z], steps))
}

/// Per-operator optima combined into one association.
fn solve_decomposed<T: Real>(net: &Network<T>, spec: &ProblemSpec) -> Result<(Association, Vec<f64>, usize)> {
    let parts: Vec<(Association, f64, usize)> = (0..net.num_operators())
        .into_par_iter()
        .map(|z| solve_operator(net, spec, z))
        .collect::<Result<_>>()?;
    let mut assoc = Association::empty(net.n_bs(), net.n_ue());
    let mut util = Vec::with_capacity(parts.len());
    let mut steps = 0;
    for (z, (a, f, s)) in parts.into_iter().enumerate() {
        assoc.merge_from(&a, &net.topology.ues_of(z));
        util.push(f);
        steps += s;
    }
    Ok((assoc, util, steps))
}

/// `(Tchebycheff distance, weighted sum of shortfalls)` of `assoc` under
/// the problem's own objective; for per-operator problems, minus the total
/// utility.
pub fn problem_score<T: Real>(
    net: &Network<T>,
    spec: &ProblemSpec,
    assoc: &Association,
    ideal: Option<&[f64]>,
) -> Result<(f64, Vec<f64>)> {
    let cfg = &net.config;
    if spec.problem.is_joint() {
        let ideal = ideal.ok_or_else(|| Error::InvalidConfig("joint problems need an ideal point".into()))?;
        let rep = evaluate(net, spec.engine_spec(cfg, (0..cfg.num_operators).collect())?, assoc)?;
        let f = rep.per_operator_utility;
        Ok((tchebycheff(&f, &cfg.weights(), ideal).0, f))
    } else {
        let mut f = Vec::with_capacity(cfg.num_operators);
        for z in 0..cfg.num_operators {
            f.push(evaluate(net, spec.engine_spec(cfg, vec![z])?, assoc)?.per_operator_utility[z]);
        }
        Ok((-f.iter().sum::<f64>(), f))
    }
}

pub fn solve<T: Real>(net: &Network<T>, spec: &ProblemSpec) -> Result<Solution> {
    check_network(net, spec)?;
    let cfg = &net.config;
    let cap = spec.load_cap(cfg);
    let (association, objective, ideal, steps) = match spec.problem {
        ProblemId::Rssi => {
            let a = rssi_association(net)?;
            let f = evaluate(net, spec.report_spec(cfg)?, &a)?.per_operator_utility;
            (a, f, None, 0)
        }
        p if !p.is_joint() => {
            let (a, f, steps) = solve_decomposed(net, spec)?;
            (a, f, None, steps)
        }
        p => {
            let selfish = ProblemSpec::new(p.selfish(), cfg)?;
            let (start, ideal, _) = solve_decomposed(net, &selfish)?;
            let weights = cfg.weights();
            let all_ues: Vec<usize> = (0..net.n_ue()).collect();
            let greedy = greedy_association(net, &all_ues, cap)?;
            let joint = spec.engine_spec(cfg, (0..cfg.num_operators).collect())?;
            let ideal_c = ideal.clone();
            let score = move |f: &[f64]| tchebycheff(f, &weights, &ideal_c);
            let start_score = score(&evaluate(net, joint.clone(), &start)?.per_operator_utility);
            let greedy_score = score(&evaluate(net, joint.clone(), &greedy)?.per_operator_utility);
            let init = if better(greedy_score, start_score) { &greedy } else { &start };
            let mut engine = make_engine(net, joint, init)?;
            let steps = local_search(
                engine.as_mut(),
                &net.candidates,
                &ue_operators(net),
                &all_ues,
                cap,
                &score,
                MAX_STEPS,
            )?;
            (engine.association().clone(), engine.utilities().to_vec(), Some(ideal), steps)
        }
    };
    let enforce = (spec.problem != ProblemId::Rssi).then_some(cap);
    check_association(net, &association, enforce)?;
    let report = evaluate(net, spec.report_spec(cfg)?, &association)?;
    Ok(Solution {
        association,
        objective,
        ideal,
        steps,
        report,
    })
}

#[derive(Debug, Clone)]
pub struct OracleSolution {
    pub association: Association,
    /// Per-operator utilities under the problem's own objective.
    pub objective: Vec<f64>,
    pub ideal: Option<Vec<f64>>,
    /// Scalar objective (lower is better): Tchebycheff distance for joint
    /// problems, minus total utility otherwise.
    pub score: f64,
    pub enumerated: usize,
}

pub const ORACLE_LIMIT: f64 = 1e6;

/// Feasible assignments of `ues` over their candidate lists.
fn enumerate_feasible<T: Real>(net: &Network<T>, ues: &[usize], cap: usize) -> Result<Vec<Vec<usize>>> {
    let count: f64 = ues.iter().map(|&u| net.candidates[u].len() as f64).product();
    if count > ORACLE_LIMIT {
        return Err(Error::InstanceTooLarge {
            candidates: count,
            limit: ORACLE_LIMIT,
        });
    }
    let mut out = Vec::new();
    let mut idx = vec![0usize; ues.len()];
    loop {
        let pick: Vec<usize> = ues.iter().zip(&idx).map(|(&u, &k)| net.candidates[u][k]).collect();
        let mut load = std::collections::HashMap::new();
        if pick.iter().all(|&b| {
            let l = load.entry(b).or_insert(0usize);
            *l += 1;
            *l <= cap
        }) {
            out.push(pick);
        }
        let mut d = 0;
        loop {
            if d == ues.len() {
                return Ok(out);
            }
            idx[d] += 1;
            if idx[d] < net.candidates[ues[d]].len() {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}

/// Exact optimum by exhaustive enumeration, for instances of at most
/// `max_ues` UEs (at most 8) and `ORACLE_LIMIT` assignments.
pub fn brute_force_oracle<T: Real>(net: &Network<T>, spec: &ProblemSpec, max_ues: usize) -> Result<OracleSolution> {
    check_network(net, spec)?;
    let max_ues = max_ues.min(8);
    if net.n_ue() > max_ues {
        return Err(Error::InstanceTooLarge {
            candidates: net.n_ue() as f64,
            limit: max_ues as f64,
        });
    }
    let cfg = &net.config;
    let cap = spec.load_cap(cfg);
    if spec.problem == ProblemId::Rssi {
        let a = rssi_association(net)?;
        let f = evaluate(net, spec.report_spec(cfg)?, &a)?.per_operator_utility;
        return Ok(OracleSolution {
            score: -f.iter().sum::<f64>(),
            association: a,
            objective: f,
            ideal: None,
            enumerated: 1,
        });
    }
    let per_operator = |spec: &ProblemSpec| -> Result<(Association, Vec<f64>, usize)> {
        let mut assoc = Association::empty(net.n_bs(), net.n_ue());
        let mut f = Vec::new();
        let mut n = 0;
        for z in 0..cfg.num_operators {
            let ues = net.topology.ues_of(z);
            let es = spec.engine_spec(cfg, vec![z])?;
            let mut best: Option<(f64, Vec<usize>)> = None;
            for pick in enumerate_feasible(net, &ues, cap)? {
                n += 1;
                let mut a = Association::empty(net.n_bs(), net.n_ue());
                for (&u, &b) in ues.iter().zip(&pick) {
                    a.set(u, Some(b));
                }
                let fz = evaluate(net, es.clone(), &a)?.per_operator_utility[z];
                if best.as_ref().is_none_or(|(bf, _)| fz > *bf) {
                    best = Some((fz, pick));
                }
            }
            let (fz, pick) = best.ok_or_else(|| Error::Infeasible(format!("operator {z} has no feasible assignment")))?;
            for (&u, &b) in ues.iter().zip(&pick) {
                assoc.set(u, Some(b));
            }
            f.push(fz);
        }
        Ok((assoc, f, n))
    };
    if !spec.problem.is_joint() {
        let (association, objective, enumerated) = per_operator(spec)?;
        return Ok(OracleSolution {
            score: -objective.iter().sum::<f64>(),
            association,
            objective,
            ideal: None,
            enumerated,
        });
    }
    let selfish = ProblemSpec::new(spec.problem.selfish(), cfg)?;
    let (_, ideal, mut enumerated) = per_operator(&selfish)?;
    let weights = cfg.weights();
    let all: Vec<usize> = (0..net.n_ue()).collect();
    let es = spec.engine_spec(cfg, (0..cfg.num_operators).collect())?;
    let mut best: Option<(Score, Association, Vec<f64>)> = None;
    for pick in enumerate_feasible(net, &all, cap)? {
        enumerated += 1;
        let a = Association::from_serving(net.n_bs(), pick.into_iter().map(Some).collect());
        let f = evaluate(net, es.clone(), &a)?.per_operator_utility;
        let s = tchebycheff(&f, &weights, &ideal);
        if best.as_ref().is_none_or(|(bs, _, _)| better(s, *bs)) {
            best = Some((s, a, f));
        }
    }
    let (s, association, objective) = best.ok_or_else(|| Error::Infeasible("no feasible assignment".into()))?;
    Ok(OracleSolution {
        association,
        objective,
        ideal: Some(ideal),
        score: s.0,
        enumerated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{Node, Topology};
    use approx::assert_relative_eq;

    #[test]
    fn tchebycheff_example() {
        let c = vec![vec![1.0, 3.0], vec![2.0, 2.0], vec![3.0, 1.0]];
        let s = tchebycheff_scalarize(&c, &[1.0, 1.0], Some(&[3.0, 3.0])).unwrap();
        assert_eq!(s, vec![2.0, 1.0, 2.0]);
        let adaptive = tchebycheff_scalarize(&c, &[1.0, 1.0], None).unwrap();
        assert_eq!(adaptive, s);
        let scaled = tchebycheff_scalarize(&c, &[2.5, 2.5], None).unwrap();
        let argmin = |v: &[f64]| (0..v.len()).min_by(|&a, &b| v[a].total_cmp(&v[b])).unwrap();
        assert_eq!(argmin(&scaled), argmin(&s));
        let single = tchebycheff_scalarize(&[vec![1.0], vec![4.0]], &[1.0], None).unwrap();
        assert_eq!(argmin(&single), 1);
        assert!(tchebycheff_scalarize(&c, &[1.0], None).is_err());
    }

    #[test]
    fn problem_specs() {
        let cfg = ScenarioConfig::default();
        let p1 = ProblemSpec::new(ProblemId::P1, &cfg).unwrap();
        assert_eq!(p1.coordination, Coordination::Full);
        assert_eq!(p1.inter_operator, InterOperator::Actual);
        let p5 = ProblemSpec::new(ProblemId::P5, &cfg).unwrap();
        assert_eq!(p5.precoder, Precoder::Rzf);
        assert_eq!(p5.inter_operator, InterOperator::Ignored);
        assert_eq!(ProblemSpec::new(ProblemId::P6, &cfg).unwrap().sharing, SharingMode::Exclusive);
        let excl = ScenarioConfig {
            sharing_mode: SharingMode::Exclusive,
            ..cfg.clone()
        };
        assert!(ProblemSpec::new(ProblemId::P2, &excl).is_err());
        for p in ProblemId::ALL {
            assert_eq!(p.to_string().parse::<ProblemId>().unwrap(), p);
            if let Ok(spec) = ProblemSpec::new(p, &cfg) {
                if p != ProblemId::Rssi || !cfg.precoder.is_digital() {
                    assert_eq!(ProblemId::from_config(&spec.apply(&cfg)), p);
                }
            }
        }
    }

    #[test]
    fn association_bookkeeping() {
        let mut a = Association::empty(2, 4);
        a.set(3, Some(1));
        a.set(0, Some(1));
        a.set(2, Some(0));
        assert_eq!(a.cells()[1], vec![0, 3]);
        a.set(3, Some(0));
        assert_eq!(a.cells(), &[vec![2, 3], vec![0]]);
        assert_eq!(a.load(0), 2);
        let b = Association::from_serving(2, a.serving_all().to_vec());
        assert_eq!(a, b);
    }

    fn line_net(bs: &[(usize, f64)], ues: &[(usize, f64)], cfg: ScenarioConfig) -> Network<f64> {
        let topo = Topology {
            area_side: 10_000.0,
            num_operators: cfg.num_operators,
            bss: bs.iter().map(|&(operator, x)| Node { x, y: 0.0, operator }).collect(),
            ues: ues.iter().map(|&(operator, x)| Node { x, y: 0.0, operator }).collect(),
        };
        Network::from_topology(&cfg, topo, 5).unwrap()
    }

    fn tiny_cfg() -> ScenarioConfig {
        ScenarioConfig {
            num_operators: 1,
            n_bs_antennas: 8,
            n_ue_antennas: 2,
            n_rf_chains: 2,
            n_fading_samples: 4,
            max_candidates: 0,
            single_path: true,
            los_model: crate::config::LosModel::Always,
            ..Default::default()
        }
    }

    #[test]
    fn rssi_prefers_nearer_bs() {
        let net = line_net(&[(0, 0.0), (0, 300.0)], &[(0, 10.0), (0, 290.0)], tiny_cfg());
        let a = rssi_association(&net).unwrap();
        assert_eq!(a.serving_all(), &[Some(0), Some(1)]);
    }

    #[test]
    fn single_bs_per_operator_is_forced() {
        let cfg = ScenarioConfig {
            num_operators: 2,
            ..tiny_cfg()
        };
        let net = line_net(&[(0, 0.0), (1, 50.0)], &[(0, 10.0), (1, 20.0), (0, 30.0)], cfg.clone());
        for p in [ProblemId::P1, ProblemId::P2, ProblemId::P3, ProblemId::Rssi] {
            let spec = ProblemSpec::new(p, &cfg).unwrap();
            let sol = solve(&net, &spec).unwrap();
            assert_eq!(sol.association.serving_all(), &[Some(0), Some(1), Some(0)], "{p}");
        }
    }

    #[test]
    fn solver_matches_oracle_on_two_bs_four_ue() {
        let cfg = tiny_cfg();
        let net = line_net(&[(0, 0.0), (0, 80.0)], &[(0, 5.0), (0, 20.0), (0, 45.0), (0, 70.0)], cfg.clone());
        let spec = ProblemSpec::new(ProblemId::P2, &cfg).unwrap();
        let sol = solve(&net, &spec).unwrap();
        let oracle = brute_force_oracle(&net, &spec, 8).unwrap();
        assert!(oracle.enumerated <= 16);
        assert_relative_eq!(sol.objective[0], oracle.objective[0], max_relative = 1e-9);
        for b in 0..2 {
            assert!(sol.association.load(b) <= 2);
        }
    }

    #[test]
    fn oracle_rejects_large_instances() {
        let cfg = tiny_cfg();
        let ues: Vec<(usize, f64)> = (0..9).map(|k| (0, 10.0 * k as f64 + 1.0)).collect();
        let cfg = ScenarioConfig { n_rf_chains: 9, ..cfg };
        let net = line_net(&[(0, 0.0), (0, 80.0)], &ues, cfg.clone());
        let spec = ProblemSpec::new(ProblemId::P2, &cfg).unwrap();
        assert!(matches!(
            brute_force_oracle(&net, &spec, 8),
            Err(Error::InstanceTooLarge { .. })
        ));
    }
}
