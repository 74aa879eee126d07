//! Approximate-capacity linear programs.
//!
//! * flow form: link activation times `lambda` and flows `F` with per-node
//!   one-transmit-beam / one-receive-beam budgets ([`approx_capacity_p1`]);
//! * cut-set form: maximize the smallest cut over all source-side node
//!   subsets ([`approx_capacity_cutset`]);
//! * symmetric two-relay reductions: the one-parameter max-min program
//!   ([`capacity_p4`]), the path program ([`capacity_p6_paths`]) and its
//!   dual ([`dual_d1`]).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{solve_lp, LinearProgram, LpSolution, LpStatus, Relation, SolverOptions};
use crate::model::{links, LinkGainMatrix, SymmetricGeometry};

/// Largest relay count for which cuts are enumerated.
pub const CUT_LIMIT: usize = 12;
/// Objective change tolerated when a property is added as a constraint.
pub const VALUE_PRESERVATION_TOL: f64 = 1e-8;
/// `x1 + x2 + x3` at or below this classifies a path solution as pure routing.
pub const ROUTING_TOL: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Formulation {
    P1,
    CutSet,
    P4,
    P6,
}

/// Link activation times, indexed `[to][from]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub lambda: Vec<Vec<f64>>,
}

impl Schedule {
    fn from_links(n_nodes: usize, links: &[(usize, usize)], values: &[f64]) -> Self {
        let mut lambda = vec![vec![0.0; n_nodes]; n_nodes];
        for (&(i, j), &v) in links.iter().zip(values) {
            lambda[j][i] = v;
        }
        Schedule { lambda }
    }

    pub fn n_nodes(&self) -> usize {
        self.lambda.len()
    }

    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.lambda[to][from]
    }

    pub fn transmit_load(&self, node: usize) -> f64 {
        (0..self.n_nodes()).map(|to| self.lambda[to][node]).sum()
    }

    pub fn receive_load(&self, node: usize) -> f64 {
        self.lambda[node].iter().sum()
    }

    /// Largest excess over the one-beam budgets or below zero.
    pub fn max_violation(&self) -> f64 {
        let n = self.n_nodes();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            worst = worst.max(self.transmit_load(i) - 1.0);
            worst = worst.max(self.receive_load(i) - 1.0);
            for j in 0..n {
                worst = worst.max(-self.lambda[j][i]);
            }
        }
        worst
    }

    /// `(lambda1, lambda2, lambda3)` = activation of source→relay 1,
    /// source→relay 2 and relay 1→relay 2 in a two-relay network.
    pub fn symmetric_aliases(&self) -> Option<(f64, f64, f64)> {
        (self.n_nodes() == 4).then(|| (self.get(0, 1), self.get(0, 2), self.get(1, 2)))
    }
}

/// Flows in bits per channel use, indexed `[to][from]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowMatrix {
    pub flow: Vec<Vec<f64>>,
}

impl FlowMatrix {
    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.flow[to][from]
    }

    pub fn inflow(&self, node: usize) -> f64 {
        self.flow[node].iter().sum()
    }

    pub fn outflow(&self, node: usize) -> f64 {
        self.flow.iter().map(|row| row[node]).sum()
    }

    /// Largest |inflow − outflow| over the relays.
    pub fn conservation_residual(&self) -> f64 {
        let n = self.flow.len();
        (1..n.saturating_sub(1))
            .map(|r| (self.inflow(r) - self.outflow(r)).abs())
            .fold(0.0, f64::max)
    }

    /// Largest excess of a flow over its activated link capacity, or below zero.
    pub fn capacity_violation(&self, schedule: &Schedule, gm: &LinkGainMatrix) -> f64 {
        gm.links()
            .into_iter()
            .map(|(i, j)| {
                let f = self.get(i, j);
                (f - schedule.get(i, j) * gm.capacity(i, j)).max(-f)
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapacityResult {
    /// Approximate capacity in bits per channel use.
    pub capacity: f64,
    pub schedule: Schedule,
    pub flows: Option<FlowMatrix>,
    pub formulation: Formulation,
    pub iterations: usize,
}

fn require_optimal(sol: LpSolution) -> Result<LpSolution> {
    match sol.status {
        LpStatus::Optimal => Ok(sol),
        other => Err(Error::Solver(other)),
    }
}

/// A linear equality over link activation times, e.g. `lambda_{3,1} - lambda_{2,0} = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleEquality {
    /// `((from, to), coefficient)` terms.
    pub terms: Vec<((usize, usize), f64)>,
    pub rhs: f64,
}

impl ScheduleEquality {
    pub fn new(terms: Vec<((usize, usize), f64)>, rhs: f64) -> Self {
        ScheduleEquality { terms, rhs }
    }

    pub fn fix(link: (usize, usize), value: f64) -> Self {
        ScheduleEquality::new(vec![(link, 1.0)], value)
    }

    pub fn equal(a: (usize, usize), b: (usize, usize)) -> Self {
        ScheduleEquality::new(vec![(a, 1.0), (b, -1.0)], 0.0)
    }
}

/// The flow-form program; variables are `lambda` for every link followed by
/// `F` for every link, in [`LinkGainMatrix::links`] order.
pub fn p1_program(gm: &LinkGainMatrix) -> Result<LinearProgram> {
    p1_program_with(gm, &[])
}

fn p1_program_with(gm: &LinkGainMatrix, extra: &[ScheduleEquality]) -> Result<LinearProgram> {
    let ls = gm.links();
    let m = ls.len();
    let dst = gm.destination();
    let lam = |k: usize| k;
    let flow = |k: usize| m + k;

    let mut objective = vec![0.0; 2 * m];
    let mut names = Vec::with_capacity(2 * m);
    for &(i, j) in &ls {
        names.push(format!("lambda_{j}_{i}"));
    }
    for (k, &(i, j)) in ls.iter().enumerate() {
        names.push(format!("F_{j}_{i}"));
        if j == dst {
            objective[flow(k)] = 1.0;
        }
    }
    let mut lp = LinearProgram::with_names(objective, names)?;

    for (k, &(i, j)) in ls.iter().enumerate() {
        let cap = gm.capacity(i, j);
        if !cap.is_finite() {
            return Err(Error::NonFinite(format!("capacity of link {i}->{j}")));
        }
        lp.add_sparse(
            format!("link_{j}_{i}"),
            &[(flow(k), 1.0), (lam(k), -cap)],
            Relation::Le,
            0.0,
        )?;
    }
    for r in 1..dst {
        let terms: Vec<(usize, f64)> = ls
            .iter()
            .enumerate()
            .filter_map(|(k, &(i, j))| match (i == r, j == r) {
                (false, true) => Some((flow(k), 1.0)),
                (true, false) => Some((flow(k), -1.0)),
                _ => None,
            })
            .collect();
        lp.add_sparse(format!("conserve_{r}"), &terms, Relation::Eq, 0.0)?;
    }
    for node in 0..dst {
        let terms: Vec<(usize, f64)> = ls
            .iter()
            .enumerate()
            .filter(|(_, &(i, _))| i == node)
            .map(|(k, _)| (lam(k), 1.0))
            .collect();
        lp.add_sparse(format!("tx_{node}"), &terms, Relation::Le, 1.0)?;
    }
    for node in 1..=dst {
        let terms: Vec<(usize, f64)> = ls
            .iter()
            .enumerate()
            .filter(|(_, &(_, j))| j == node)
            .map(|(k, _)| (lam(k), 1.0))
            .collect();
        lp.add_sparse(format!("rx_{node}"), &terms, Relation::Le, 1.0)?;
    }
    for (e, eq) in extra.iter().enumerate() {
        let mut terms = Vec::with_capacity(eq.terms.len());
        for &(link, coeff) in &eq.terms {
            let k = ls
                .iter()
                .position(|&l| l == link)
                .ok_or_else(|| Error::param(format!("no link {}->{} in this network", link.0, link.1)))?;
            terms.push((lam(k), coeff));
        }
        lp.add_sparse(format!("extra_{e}"), &terms, Relation::Eq, eq.rhs)?;
    }
    Ok(lp)
}

fn solve_p1(gm: &LinkGainMatrix, extra: &[ScheduleEquality]) -> Result<(LpSolution, CapacityResult)> {
    let lp = p1_program_with(gm, extra)?;
    let sol = solve_lp(&lp, &SolverOptions::default())?;
    let sol = require_optimal(sol)?;
    let ls = gm.links();
    let m = ls.len();
    let schedule = Schedule::from_links(gm.n_nodes, &ls, &sol.x[..m]);
    let flows = FlowMatrix {
        flow: Schedule::from_links(gm.n_nodes, &ls, &sol.x[m..]).lambda,
    };
    let result = CapacityResult {
        capacity: sol.objective_value,
        schedule,
        flows: Some(flows),
        formulation: Formulation::P1,
        iterations: sol.iterations,
    };
    Ok((sol, result))
}

/// Approximate capacity through the flow-form program.
pub fn approx_capacity_p1(gm: &LinkGainMatrix) -> Result<CapacityResult> {
    solve_p1(gm, &[]).map(|(_, r)| r)
}

/// Approximate capacity with additional linear equalities on the schedule.
/// Returns `Ok(None)` when the equalities make the program infeasible.
pub fn approx_capacity_p1_constrained(
    gm: &LinkGainMatrix,
    extra: &[ScheduleEquality],
) -> Result<Option<CapacityResult>> {
    match solve_p1(gm, extra) {
        Ok((_, r)) => Ok(Some(r)),
        Err(Error::Solver(LpStatus::Infeasible)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// A source-side node set: contains node 0, excludes the destination.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CutSet {
    pub omega: Vec<usize>,
}

impl CutSet {
    pub fn contains(&self, node: usize) -> bool {
        self.omega.contains(&node)
    }

    /// Links crossing from the source side to the destination side.
    pub fn crossing_links(&self, n_relays: usize) -> Vec<(usize, usize)> {
        links(n_relays)
            .into_iter()
            .filter(|&(i, j)| self.contains(i) && !self.contains(j))
            .collect()
    }
}

/// All `2^N` cuts, in binary-counting order over relay membership
/// (bit `r - 1` of the counter selects relay `r`).
pub fn enumerate_cuts(n_relays: usize) -> Result<Vec<CutSet>> {
    if n_relays > CUT_LIMIT {
        return Err(Error::CutLimit {
            n_relays,
            limit: CUT_LIMIT,
        });
    }
    Ok((0u32..1 << n_relays)
        .map(|mask| {
            let mut omega = vec![0];
            omega.extend((1..=n_relays).filter(|r| mask >> (r - 1) & 1 == 1));
            CutSet { omega }
        })
        .collect())
}

/// The cut-set program; variables are `lambda` per link followed by `alpha`.
pub fn cutset_program(gm: &LinkGainMatrix) -> Result<LinearProgram> {
    let n = gm.n_relays();
    let cuts = enumerate_cuts(n)?;
    let ls = gm.links();
    let m = ls.len();
    let dst = gm.destination();
    let mut objective = vec![0.0; m + 1];
    objective[m] = 1.0;
    let mut names: Vec<String> = ls.iter().map(|&(i, j)| format!("lambda_{j}_{i}")).collect();
    names.push("alpha".into());
    let mut lp = LinearProgram::with_names(objective, names)?;
    for node in 0..dst {
        let terms: Vec<(usize, f64)> = ls
            .iter()
            .enumerate()
            .filter(|(_, &(i, _))| i == node)
            .map(|(k, _)| (k, 1.0))
            .collect();
        lp.add_sparse(format!("tx_{node}"), &terms, Relation::Le, 1.0)?;
    }
    for node in 1..=dst {
        let terms: Vec<(usize, f64)> = ls
            .iter()
            .enumerate()
            .filter(|(_, &(_, j))| j == node)
            .map(|(k, _)| (k, 1.0))
            .collect();
        lp.add_sparse(format!("rx_{node}"), &terms, Relation::Le, 1.0)?;
    }
    for (c, cut) in cuts.iter().enumerate() {
        let mut terms = vec![(m, 1.0)];
        for (k, &(i, j)) in ls.iter().enumerate() {
            if cut.contains(i) && !cut.contains(j) {
                terms.push((k, -gm.capacity(i, j)));
            }
        }
        lp.add_sparse(format!("cut_{c}"), &terms, Relation::Le, 0.0)?;
    }
    Ok(lp)
}

/// Approximate capacity as the best achievable minimum cut.
pub fn approx_capacity_cutset(gm: &LinkGainMatrix) -> Result<CapacityResult> {
    let lp = cutset_program(gm)?;
    let sol = require_optimal(solve_lp(&lp, &SolverOptions::default())?)?;
    let ls = gm.links();
    Ok(CapacityResult {
        capacity: sol.objective_value,
        schedule: Schedule::from_links(gm.n_nodes, &ls, &sol.x[..ls.len()]),
        flows: None,
        formulation: Formulation::CutSet,
        iterations: sol.iterations,
    })
}

fn require_open_beta(geom: &SymmetricGeometry) -> Result<()> {
    if !(geom.beta > 0.0 && geom.beta < 0.5) || !geom.l3.is_finite() {
        return Err(Error::param(format!(
            "symmetric programs need beta in (0, 1/2), got {}",
            geom.beta
        )));
    }
    Ok(())
}

/// Right-hand side of the combined source/destination cut bound,
/// `(1 - lambda2) l1 + lambda2 l2`.
pub fn bound_p4d(geom: &SymmetricGeometry, lambda2: f64) -> f64 {
    (1.0 - lambda2) * geom.l1 + lambda2 * geom.l2
}

/// Right-hand side of the cut separating `{0, 1}` from `{2, 3}`,
/// `(1 - lambda2) l3 + 2 lambda2 l2`.
pub fn bound_p4f(geom: &SymmetricGeometry, lambda2: f64) -> f64 {
    (1.0 - lambda2) * geom.l3 + 2.0 * lambda2 * geom.l2
}

/// Right-hand side of the cut separating `{0, 2}` from `{1, 3}`, `2 (1 - lambda2) l1`.
pub fn bound_p4g(geom: &SymmetricGeometry, lambda2: f64) -> f64 {
    2.0 * (1.0 - lambda2) * geom.l1
}

pub fn p4_objective(geom: &SymmetricGeometry, lambda2: f64) -> f64 {
    bound_p4d(geom, lambda2)
        .min(bound_p4f(geom, lambda2))
        .min(bound_p4g(geom, lambda2))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct P4Optimum {
    pub capacity: f64,
    /// Smallest maximizing `lambda2`.
    pub lambda2: f64,
}

/// Maximizes the minimum of the three linear bounds over `lambda2 in [0, 1]`.
///
/// The objective is concave and piecewise linear, so the maximum sits at an
/// endpoint or at a pairwise intersection of the bounds; all of them are
/// evaluated and the smallest maximizer wins ties.
pub fn capacity_p4(geom: &SymmetricGeometry) -> Result<P4Optimum> {
    require_open_beta(geom)?;
    let lines = [
        (geom.l1, geom.l2 - geom.l1),
        (geom.l3, 2.0 * geom.l2 - geom.l3),
        (2.0 * geom.l1, -2.0 * geom.l1),
    ];
    let mut candidates = vec![0.0, 1.0];
    for a in 0..lines.len() {
        for b in a + 1..lines.len() {
            let (ca, sa) = lines[a];
            let (cb, sb) = lines[b];
            if sa != sb {
                let t = (cb - ca) / (sa - sb);
                if t > 0.0 && t < 1.0 {
                    candidates.push(t);
                }
            }
        }
    }
    candidates.sort_by(f64::total_cmp);
    let mut best: Option<P4Optimum> = None;
    for t in candidates {
        let v = p4_objective(geom, t);
        if best.is_none_or(|b| v > b.capacity + 1e-12 * b.capacity.abs().max(1.0)) {
            best = Some(P4Optimum {
                capacity: v,
                lambda2: t,
            });
        }
    }
    best.ok_or_else(|| Error::NonFinite("one-parameter program".into()))
}

/// The same one-parameter program handed to the simplex solver; variables
/// `lambda1, lambda2, lambda3, alpha`.
pub fn capacity_p4_lp(geom: &SymmetricGeometry) -> Result<P4Optimum> {
    require_open_beta(geom)?;
    let names = ["lambda1", "lambda2", "lambda3", "alpha"].map(String::from).to_vec();
    let mut lp = LinearProgram::with_names(vec![0.0, 0.0, 0.0, 1.0], names)?;
    lp.add_named_constraint("a", vec![1.0, 1.0, 0.0, 0.0], Relation::Eq, 1.0)?;
    lp.add_named_constraint("b", vec![0.0, 1.0, 1.0, 0.0], Relation::Eq, 1.0)?;
    lp.add_named_constraint("d", vec![-geom.l1, -geom.l2, 0.0, 1.0], Relation::Le, 0.0)?;
    lp.add_named_constraint("f", vec![0.0, -2.0 * geom.l2, -geom.l3, 1.0], Relation::Le, 0.0)?;
    lp.add_named_constraint("g", vec![-2.0 * geom.l1, 0.0, 0.0, 1.0], Relation::Le, 0.0)?;
    let sol = require_optimal(solve_lp(&lp, &SolverOptions::default())?)?;
    Ok(P4Optimum {
        capacity: sol.objective_value,
        lambda2: sol.x[1],
    })
}

/// A directed hop of a path together with the activation time it needs
/// when the path carries its full capacity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathLink {
    pub from: usize,
    pub to: usize,
    pub fraction: f64,
}

/// Time shares of the four source–destination paths of a two-relay network:
/// direct, via relay 1, via relay 2, and via both relays.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathAllocation {
    pub x: [f64; 4],
    pub path_caps: [f64; 4],
    pub link_fractions: [Vec<PathLink>; 4],
}

impl PathAllocation {
    /// Paths of the symmetric network with `x3 = x2`. The two-relay path is
    /// rated `l3` with source/destination hops `l3 / l1`, as in the path
    /// program.
    pub fn symmetric(geom: &SymmetricGeometry, x1: f64, x2: f64, x4: f64) -> Self {
        let (l1, l2, l3, l4) = (geom.l1, geom.l2, geom.l3, geom.l4);
        let hop = |from, to, fraction| PathLink { from, to, fraction };
        PathAllocation {
            x: [x1, x2, x2, x4],
            path_caps: [l4, l2, l2, l3],
            link_fractions: [
                vec![hop(0, 3, 1.0)],
                vec![hop(0, 1, l2 / l1), hop(1, 3, 1.0)],
                vec![hop(0, 2, 1.0), hop(2, 3, l2 / l1)],
                vec![hop(0, 1, l3 / l1), hop(1, 2, 1.0), hop(2, 3, l3 / l1)],
            ],
        }
    }

    pub fn objective(&self) -> f64 {
        self.x.iter().zip(&self.path_caps).map(|(x, c)| x * c).sum()
    }

    pub fn transmit_load(&self, node: usize) -> f64 {
        self.load(|h| h.from == node)
    }

    pub fn receive_load(&self, node: usize) -> f64 {
        self.load(|h| h.to == node)
    }

    fn load(&self, pick: impl Fn(&PathLink) -> bool) -> f64 {
        self.x
            .iter()
            .zip(&self.link_fractions)
            .map(|(x, hops)| hops.iter().filter(|h| pick(h)).map(|h| x * h.fraction).sum::<f64>())
            .sum()
    }

    /// Largest excess of any node's transmit or receive share over one, or
    /// of any `x_p` below zero.
    pub fn max_violation(&self) -> f64 {
        let mut worst = self.x.iter().map(|x| -x).fold(0.0, f64::max);
        for node in 0..4 {
            worst = worst.max(self.transmit_load(node) - 1.0);
            worst = worst.max(self.receive_load(node) - 1.0);
        }
        worst
    }

    /// True when only the two-relay path is used.
    pub fn is_routing(&self) -> bool {
        self.x[0] + self.x[1] + self.x[2] <= ROUTING_TOL
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathSolution {
    pub allocation: PathAllocation,
    pub capacity: f64,
    pub routing: bool,
    /// Set when the direct path carries traffic; expected only outside the
    /// `gamma / d^a > 3^a` regime.
    pub uses_direct_path: bool,
    /// Multipliers of the two node constraints.
    pub duals: [f64; 2],
}

fn p6_program(geom: &SymmetricGeometry, forbid_direct: bool) -> Result<LinearProgram> {
    let (l1, l2, l3, l4) = (geom.l1, geom.l2, geom.l3, geom.l4);
    let names = ["x1", "x2", "x4"].map(String::from).to_vec();
    let mut lp = LinearProgram::with_names(vec![l4, 2.0 * l2, l3], names)?;
    lp.add_named_constraint("source", vec![1.0, l2 / l1 + 1.0, l3 / l1], Relation::Le, 1.0)?;
    lp.add_named_constraint("relay", vec![0.0, 1.0, 1.0], Relation::Le, 1.0)?;
    if forbid_direct {
        lp.set_bounds(0, 0.0, 0.0)?;
    }
    Ok(lp)
}

fn solve_p6(geom: &SymmetricGeometry, forbid_direct: bool) -> Result<PathSolution> {
    require_open_beta(geom)?;
    let lp = p6_program(geom, forbid_direct)?;
    let sol = require_optimal(solve_lp(&lp, &SolverOptions::default())?)?;
    let allocation = PathAllocation::symmetric(geom, sol.x[0], sol.x[1], sol.x[2]);
    Ok(PathSolution {
        routing: allocation.is_routing(),
        uses_direct_path: sol.x[0] > ROUTING_TOL,
        capacity: sol.objective_value,
        duals: [sol.duals[0], sol.duals[1]],
        allocation,
    })
}

/// Path-based program for the symmetric network (with `x3 = x2`).
pub fn capacity_p6_paths(geom: &SymmetricGeometry) -> Result<PathSolution> {
    solve_p6(geom, false)
}

/// Path program with the direct path removed (`x1 = 0`).
pub fn capacity_p6_paths_without_direct(geom: &SymmetricGeometry) -> Result<PathSolution> {
    solve_p6(geom, true)
}

/// Dual variables of the path program: node multipliers `v1, v2` and
/// reduced costs `s1, s2, s3`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualCertificate {
    pub v1: f64,
    pub v2: f64,
    pub s1: f64,
    pub s2: f64,
    pub s3: f64,
}

impl DualCertificate {
    pub fn objective(&self) -> f64 {
        self.v1 + self.v2
    }

    /// Largest violation of the dual equalities or nonnegativity.
    pub fn feasibility_residual(&self, geom: &SymmetricGeometry) -> f64 {
        let (l1, l2, l3, l4) = (geom.l1, geom.l2, geom.l3, geom.l4);
        let eqs = [
            -l4 + self.v1 - self.s1,
            -2.0 * l2 + self.v1 * l2 / l1 + self.v1 + self.v2 - self.s2,
            -l3 + self.v1 * l3 / l1 + self.v2 - self.s3,
        ];
        let neg = [self.v1, self.v2, self.s1, self.s2, self.s3]
            .iter()
            .map(|v| -v)
            .fold(0.0, f64::max);
        eqs.iter().map(|e| e.abs()).fold(neg, f64::max)
    }

    /// Largest product of a dual variable with its primal slack.
    pub fn complementary_slackness_residual(
        &self,
        geom: &SymmetricGeometry,
        alloc: &PathAllocation,
    ) -> f64 {
        let (l1, l2, l3) = (geom.l1, geom.l2, geom.l3);
        let [x1, x2, _, x4] = alloc.x;
        [
            self.v1 * (x1 + x2 * (l2 / l1 + 1.0) + x4 * l3 / l1 - 1.0),
            self.v2 * (x2 + x4 - 1.0),
            self.s1 * x1,
            self.s2 * x2,
            self.s3 * x4,
        ]
        .iter()
        .map(|r| r.abs())
        .fold(0.0, f64::max)
    }
}

/// Solves the dual of the path program: `min v1 + v2` over the dual equalities.
pub fn dual_d1(geom: &SymmetricGeometry) -> Result<DualCertificate> {
    require_open_beta(geom)?;
    let (l1, l2, l3, l4) = (geom.l1, geom.l2, geom.l3, geom.l4);
    let names = ["v1", "v2", "s1", "s2", "s3"].map(String::from).to_vec();
    let mut lp = LinearProgram::with_names(vec![-1.0, -1.0, 0.0, 0.0, 0.0], names)?;
    lp.add_named_constraint("x1", vec![1.0, 0.0, -1.0, 0.0, 0.0], Relation::Eq, l4)?;
    lp.add_named_constraint("x2", vec![l2 / l1 + 1.0, 1.0, 0.0, -1.0, 0.0], Relation::Eq, 2.0 * l2)?;
    lp.add_named_constraint("x4", vec![l3 / l1, 1.0, 0.0, 0.0, -1.0], Relation::Eq, l3)?;
    let sol = require_optimal(solve_lp(&lp, &SolverOptions::default())?)?;
    let x = &sol.x;
    Ok(DualCertificate {
        v1: x[0],
        v2: x[1],
        s1: x[2],
        s2: x[3],
        s3: x[4],
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum PropertySet {
    /// Symmetric schedule, no relay 2→relay 1 traffic, no direct link, and
    /// saturated beams (requires a symmetric network with `gamma / d^a > 3^a`).
    SymmetricSchedule,
    /// Relay 1→destination active exactly as long as source→relay 2.
    MirroredRelayHops,
    Custom(Vec<ScheduleEquality>),
}

impl PropertySet {
    pub fn equalities(&self) -> Vec<ScheduleEquality> {
        match self {
            PropertySet::SymmetricSchedule => vec![
                ScheduleEquality::equal((0, 1), (2, 3)),
                ScheduleEquality::equal((0, 2), (1, 3)),
                ScheduleEquality::fix((2, 1), 0.0),
                ScheduleEquality::new(vec![((0, 2), 1.0), ((1, 2), 1.0)], 1.0),
                ScheduleEquality::fix((0, 3), 0.0),
                ScheduleEquality::new(vec![((0, 1), 1.0), ((0, 2), 1.0)], 1.0),
            ],
            PropertySet::MirroredRelayHops => vec![ScheduleEquality::equal((1, 3), (0, 2))],
            PropertySet::Custom(eqs) => eqs.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropertyCheck {
    pub unconstrained: f64,
    /// `-inf` when the added equalities are infeasible.
    pub constrained: f64,
    pub holds: bool,
}

fn is_symmetric(gm: &LinkGainMatrix) -> bool {
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0);
    close(gm.capacity(0, 1), gm.capacity(2, 3))
        && close(gm.capacity(0, 2), gm.capacity(1, 3))
        && close(gm.capacity(1, 2), gm.capacity(2, 1))
}

/// Tests an "an optimal schedule with these properties exists" claim by
/// re-solving the flow program with the properties as equalities: the claim
/// holds when the optimum moves by at most [`VALUE_PRESERVATION_TOL`].
pub fn verify_optimal_solution_properties(
    gm: &LinkGainMatrix,
    property_set: &PropertySet,
) -> Result<PropertyCheck> {
    if !matches!(property_set, PropertySet::Custom(_)) && gm.n_relays() != 2 {
        return Err(Error::param("this property set is stated for two relays"));
    }
    if let PropertySet::SymmetricSchedule = property_set {
        if !is_symmetric(gm) {
            return Err(Error::param("symmetric-schedule properties need a symmetric network"));
        }
        let log2_s = gm.params.log2_snr(gm.distance(0, 3));
        if log2_s <= gm.params.a * 3f64.log2() {
            return Err(Error::param("symmetric-schedule properties need gamma / d^a > 3^a"));
        }
    }
    let unconstrained = approx_capacity_p1(gm)?.capacity;
    let constrained = approx_capacity_p1_constrained(gm, &property_set.equalities())?
        .map_or(f64::NEG_INFINITY, |r| r.capacity);
    Ok(PropertyCheck {
        unconstrained,
        constrained,
        holds: (unconstrained - constrained).abs() <= VALUE_PRESERVATION_TOL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{gain_matrix, make_line_topology, PropagationParams, Topology};

    const BETA01_CAPACITY: f64 = 10.349845192618007;

    fn params() -> PropagationParams {
        PropagationParams::new(1e6, 2.0).unwrap()
    }

    fn sym(beta: f64) -> SymmetricGeometry {
        SymmetricGeometry::new(beta, 100.0, &params()).unwrap()
    }

    fn p1_of(t: &Topology) -> CapacityResult {
        approx_capacity_p1(&gain_matrix(t, &params()).unwrap()).unwrap()
    }

    #[test]
    fn single_link_network() {
        let r = p1_of(&make_line_topology(100.0, 0).unwrap());
        assert!((r.capacity - 6.643856189774725).abs() < 1e-12);
        assert!((r.schedule.get(0, 1) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_beta01_flow_form() {
        let gm = gain_matrix(&sym(0.1).topology(), &params()).unwrap();
        let r = approx_capacity_p1(&gm).unwrap();
        assert!((r.capacity - BETA01_CAPACITY).abs() < 1e-9);
        assert!(r.schedule.max_violation() <= 1e-9);
        let flows = r.flows.unwrap();
        assert!(flows.conservation_residual() <= 1e-9);
        assert!(flows.capacity_violation(&r.schedule, &gm) <= 1e-9);
        assert!((flows.inflow(3) - r.capacity).abs() <= 1e-9);
    }

    #[test]
    fn line_network_is_hop_limited() {
        let gm = gain_matrix(&make_line_topology(300.0, 2).unwrap(), &params()).unwrap();
        let r = approx_capacity_p1(&gm).unwrap();
        assert!((r.capacity - 6.643856189774725).abs() < 1e-9);
        let f = r.flows.unwrap();
        for (i, j) in [(0, 1), (1, 2), (2, 3)] {
            assert!((f.get(i, j) - r.capacity).abs() < 1e-9);
            assert!((r.schedule.get(i, j) * gm.capacity(i, j) - r.capacity).abs() < 1e-9);
        }
        let short = p1_of(&make_line_topology(100.0, 2).unwrap());
        assert!((short.capacity - 900f64.log2()).abs() < 1e-9);
    }

    #[test]
    fn cut_enumeration() {
        let cuts = enumerate_cuts(2).unwrap();
        let omegas: Vec<Vec<usize>> = cuts.into_iter().map(|c| c.omega).collect();
        assert_eq!(omegas, vec![vec![0], vec![0, 1], vec![0, 2], vec![0, 1, 2]]);
        assert_eq!(enumerate_cuts(0).unwrap().len(), 1);
        assert_eq!(enumerate_cuts(3).unwrap().len(), 8);
        assert!(matches!(enumerate_cuts(13), Err(Error::CutLimit { n_relays: 13, limit: 12 })));
    }

    #[test]
    fn two_relay_cuts_match_the_four_bounds() {
        // {0}: l10, l20, l30; {0,1}: l20, l30, l21(1->2), l31; {0,2}: l10, l30, l12, l32; {0,1,2}: l30, l31, l32
        let cuts = enumerate_cuts(2).unwrap();
        let mut got: Vec<Vec<(usize, usize)>> = cuts.iter().map(|c| c.crossing_links(2)).collect();
        for g in &mut got {
            g.sort();
        }
        assert_eq!(got[0], vec![(0, 1), (0, 2), (0, 3)]);
        assert_eq!(got[1], vec![(0, 2), (0, 3), (1, 2), (1, 3)]);
        assert_eq!(got[2], vec![(0, 1), (0, 3), (2, 1), (2, 3)]);
        assert_eq!(got[3], vec![(0, 3), (1, 3), (2, 3)]);
    }

    #[test]
    fn cutset_matches_flow_form() {
        let gm = gain_matrix(&sym(0.1).topology(), &params()).unwrap();
        let c = approx_capacity_cutset(&gm).unwrap();
        assert!((c.capacity - BETA01_CAPACITY).abs() < 1e-9);
        let zero = gain_matrix(&make_line_topology(100.0, 0).unwrap(), &params()).unwrap();
        assert!((approx_capacity_cutset(&zero).unwrap().capacity - 100f64.log2()).abs() < 1e-12);
        let t = Topology::on_axis(100.0, vec![Point3::a(), Point3::b(), Point3::c()]).unwrap();
        let gm3 = gain_matrix(&t, &params()).unwrap();
        let a = approx_capacity_p1(&gm3).unwrap().capacity;
        let b = approx_capacity_cutset(&gm3).unwrap().capacity;
        assert!((a - b).abs() < 1e-8, "{a} vs {b}");
    }

    struct Point3;
    impl Point3 {
        fn a() -> crate::model::Point {
            crate::model::Point::new(30.0, 10.0)
        }
        fn b() -> crate::model::Point {
            crate::model::Point::new(55.0, -25.0)
        }
        fn c() -> crate::model::Point {
            crate::model::Point::new(80.0, 5.0)
        }
    }

    #[test]
    fn p4_closed_form_and_grid() {
        let g = sym(0.1);
        let opt = capacity_p4(&g).unwrap();
        assert!((opt.capacity - BETA01_CAPACITY).abs() < 1e-12, "{opt:?}");
        let closed = g.l2 * (2.0 * g.l1 - g.l3) / (g.l1 + g.l2 - g.l3);
        assert!((opt.capacity - closed).abs() < 1e-12);
        assert!((opt.lambda2 - 0.46339695506908146).abs() < 1e-12);
        // dense grid oracle
        let n = 1_000_000;
        let grid_max = (0..=n)
            .map(|k| p4_objective(&g, k as f64 / n as f64))
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(grid_max <= opt.capacity + 1e-12);
        assert!(opt.capacity - grid_max < 1e-5);
        let lp = capacity_p4_lp(&g).unwrap();
        assert!((lp.capacity - opt.capacity).abs() < 1e-9);
    }

    #[test]
    fn p4_routing_regime() {
        let g = sym(0.4);
        let opt = capacity_p4(&g).unwrap();
        assert_eq!(opt.lambda2, 0.0);
        assert!((opt.capacity - g.l1).abs() < 1e-12, "{opt:?} {g:?}");
        assert!(capacity_p4(&SymmetricGeometry::new(0.5, 100.0, &params()).unwrap()).is_err());
    }

    #[test]
    fn p6_vertex_and_dual() {
        let g = sym(0.1);
        let p = capacity_p6_paths(&g).unwrap();
        let den = g.l1 + g.l2 - g.l3;
        let want = [0.0, (g.l1 - g.l3) / den, (g.l1 - g.l3) / den, g.l2 / den];
        for (a, b) in p.allocation.x.iter().zip(want) {
            assert!((a - b).abs() < 1e-12, "{:?}", p.allocation.x);
        }
        assert!((p.capacity - BETA01_CAPACITY).abs() < 1e-9);
        assert!((p.allocation.objective() - p.capacity).abs() < 1e-12);
        assert!(p.allocation.max_violation() <= 1e-9);
        assert!(!p.routing && !p.uses_direct_path);

        let dual = dual_d1(&g).unwrap();
        assert!((dual.objective() - p.capacity).abs() < 1e-8);
        assert!(dual.feasibility_residual(&g) < 1e-9);
        assert!(dual.complementary_slackness_residual(&g, &p.allocation) < 1e-8);
        assert!(dual.s2.abs() < 1e-12 && dual.s3.abs() < 1e-12);
        // the LP multipliers of the path program are the same certificate
        assert!((p.duals[0] - dual.v1).abs() < 1e-9 && (p.duals[1] - dual.v2).abs() < 1e-9);
        assert!((dual.v1 - 6.781456681339275).abs() < 1e-9);
        assert!((dual.v2 - 3.5683885112787324).abs() < 1e-9);
    }

    #[test]
    fn p6_routing_regime() {
        let g = sym(0.4);
        let p = capacity_p6_paths(&g).unwrap();
        assert!(p.routing);
        let [x1, x2, x3, x4] = p.allocation.x;
        assert!(x1.abs() < 1e-12 && x2.abs() < 1e-12 && x3.abs() < 1e-12);
        assert!((x4 * g.l3 / g.l1 - 1.0).abs() < 1e-12);
        assert!((p.capacity - g.l1).abs() < 1e-12);
    }

    #[test]
    fn p6_low_snr_may_use_direct_path() {
        // gamma/d^a = 2 < 3^a: outside the regime, the direct path can win
        let p = PropagationParams::new(2e4, 2.0).unwrap();
        let g = SymmetricGeometry::new(0.3, 100.0, &p).unwrap();
        let sol = capacity_p6_paths(&g).unwrap();
        assert!(sol.allocation.max_violation() <= 1e-9);
        assert!(sol.capacity >= g.l4 - 1e-12);
        let dual = dual_d1(&g).unwrap();
        assert!((dual.objective() - sol.capacity).abs() < 1e-8);
    }

    #[test]
    fn property_checks() {
        let gm = gain_matrix(&sym(0.1).topology(), &params()).unwrap();
        let c = verify_optimal_solution_properties(&gm, &PropertySet::SymmetricSchedule).unwrap();
        assert!(c.holds);
        assert!((c.constrained - BETA01_CAPACITY).abs() < 1e-8);

        let wrong = PropertySet::Custom(vec![ScheduleEquality::fix((0, 2), 0.0)]);
        let w = verify_optimal_solution_properties(&gm, &wrong).unwrap();
        assert!(!w.holds && w.constrained < w.unconstrained - 1e-3);

        let asym = Topology::on_axis(100.0, vec![
            crate::model::Point::new(10.0, 0.0),
            crate::model::Point::new(80.0, 0.0),
        ])
        .unwrap();
        let gma = gain_matrix(&asym, &params()).unwrap();
        assert!(verify_optimal_solution_properties(&gma, &PropertySet::MirroredRelayHops).unwrap().holds);
        assert!(matches!(
            verify_optimal_solution_properties(&gma, &PropertySet::SymmetricSchedule),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn infeasible_extra_constraints_reported() {
        let gm = gain_matrix(&sym(0.1).topology(), &params()).unwrap();
        let bad = PropertySet::Custom(vec![ScheduleEquality::fix((0, 1), 2.0)]);
        let c = verify_optimal_solution_properties(&gm, &bad).unwrap();
        assert!(!c.holds && c.constrained == f64::NEG_INFINITY);
    }

    #[test]
    fn capacity_monotone_in_link_capacity() {
        let t = Topology::on_axis(100.0, vec![
            crate::model::Point::new(25.0, 20.0),
            crate::model::Point::new(60.0, -10.0),
        ])
        .unwrap();
        let gm = gain_matrix(&t, &params()).unwrap();
        let base = approx_capacity_p1(&gm).unwrap().capacity;
        for (i, j) in gm.links() {
            let mut bumped = gm.clone();
            bumped.set_capacity(i, j, gm.capacity(i, j) + 0.5);
            let c = approx_capacity_p1(&bumped).unwrap().capacity;
            assert!(c >= base - 1e-9, "link {i}->{j}: {c} < {base}");
        }
    }
}
