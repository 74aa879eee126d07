//! Named property suites: each runs a family of seeded or gridded instances
//! and reports one line per check with its worst-case value and the bound
//! it must respect.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::analysis::{
    category1_margin, category2_beta_grid, category_threshold, cstar, f_beta_monotonicity,
    kkt_condition, kkt_sufficient_condition, near_offset_check, symmetric_capacity_closed_form,
    DEFAULT_LAMBDA_GRID, LP_AGREEMENT_TOL, STRICT_MARGIN,
};
use crate::capacity::{
    approx_capacity_cutset, approx_capacity_p1, bound_p4d, capacity_p4, capacity_p6_paths,
    dual_d1, verify_optimal_solution_properties, PropertySet,
};
use crate::error::{Error, Result};
use crate::experiments::{sample_rng, unit_draw};
use crate::model::{
    gain_matrix, make_theorem_topology, project_topology, symmetrize, Point, ProjectedPair,
    PropagationParams, SymmetricGeometry, Topology,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Suite {
    #[serde(rename = "duality")]
    Duality,
    #[serde(rename = "lemma1")]
    Symmetrization,
    #[serde(rename = "lemma2")]
    ScheduleStructure,
    #[serde(rename = "lemma3")]
    NearOffsets,
    #[serde(rename = "category1")]
    FarOffsets,
    #[serde(rename = "kkt")]
    Kkt,
    #[serde(rename = "theorem")]
    OptimalPlacement,
}

impl Suite {
    pub const ALL: [Suite; 7] = [
        Suite::Duality,
        Suite::Symmetrization,
        Suite::ScheduleStructure,
        Suite::NearOffsets,
        Suite::FarOffsets,
        Suite::Kkt,
        Suite::OptimalPlacement,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Duality => "duality",
            Suite::Symmetrization => "lemma1",
            Suite::ScheduleStructure => "lemma2",
            Suite::NearOffsets => "lemma3",
            Suite::FarOffsets => "category1",
            Suite::Kkt => "kkt",
            Suite::OptimalPlacement => "theorem",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.name() == s)
            .ok_or_else(|| Error::param(format!("unknown suite {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub params: PropagationParams,
    pub d: f64,
    pub seed: u64,
    /// Symmetric instances per check.
    pub instances: usize,
    /// Random topologies per check.
    pub random_instances: usize,
    /// Offsets per `beta` grid.
    pub beta_points: usize,
    pub lambda_grid: usize,
    pub eps_rel: f64,
}

impl SuiteConfig {
    /// 50 symmetric instances, 200 random topologies, 100-point `beta`
    /// grids, `10^4 + 1`-point `lambda2` grids, `eps_rel = 1e-6`.
    pub fn new(params: PropagationParams, d: f64, seed: u64) -> Self {
        SuiteConfig {
            params,
            d,
            seed,
            instances: 50,
            random_instances: 200,
            beta_points: 100,
            lambda_grid: DEFAULT_LAMBDA_GRID,
            eps_rel: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckLine {
    pub name: String,
    pub passed: bool,
    /// Worst value observed across the instances.
    pub worst: f64,
    /// The bound `worst` is compared against.
    pub bound: f64,
    pub instances: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub checks: Vec<CheckLine>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// Fixed-width pass/fail table.
    pub fn to_table(&self) -> String {
        let width = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
        let mut out = format!("suite {}\n", self.suite);
        for c in &self.checks {
            out.push_str(&format!(
                "  {}  {:<width$}  worst={:<22} bound={:<22} n={}\n",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                format!("{:.6e}", c.worst),
                format!("{:.6e}", c.bound),
                c.instances,
            ));
        }
        out.push_str(if self.passed() { "result: PASS\n" } else { "result: FAIL\n" });
        out
    }
}

/// `worst <= bound`.
fn at_most(name: &str, worst: f64, bound: f64, instances: usize) -> CheckLine {
    CheckLine {
        name: name.to_string(),
        passed: worst <= bound,
        worst,
        bound,
        instances,
    }
}

/// `worst > bound`.
fn above(name: &str, worst: f64, bound: f64, instances: usize) -> CheckLine {
    CheckLine {
        name: name.to_string(),
        passed: worst > bound,
        worst,
        bound,
        instances,
    }
}

impl CheckLine {
    /// Tightens `worst <= bound` to `worst < bound`.
    fn strict(mut self) -> Self {
        self.passed = self.worst < self.bound;
        self
    }

    /// Replaces the check with `worst >= 0`.
    fn non_negative(mut self) -> Self {
        self.bound = 0.0;
        self.passed = self.worst >= 0.0;
        self
    }
}

fn hypothesis_line(cfg: &SuiteConfig) -> CheckLine {
    let log2_s = cfg.params.log2_snr(cfg.d);
    above("hypothesis log2(s) > a log2(3)", log2_s, cfg.params.a * 3f64.log2(), 1)
}

/// Seeded offsets spread over `(lo, hi)`, sorted.
fn seeded_betas(seed: u64, salt: u64, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n)
        .map(|i| {
            let mut rng = sample_rng(seed ^ salt, i as u64);
            lo + (hi - lo) * (0.005 + 0.99 * unit_draw(&mut rng))
        })
        .collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Two relays uniform over `[0, d] x [-d/2, d/2]`.
pub fn random_topologies(seed: u64, n: usize, d: f64) -> Result<Vec<Topology>> {
    (0..n)
        .map(|i| {
            let mut rng = sample_rng(seed ^ 0x746f_706f, i as u64);
            let mut relay = || Point::new(d * unit_draw(&mut rng), d * (unit_draw(&mut rng) - 0.5));
            let (r1, r2) = (relay(), relay());
            Topology::on_axis(d, vec![r1, r2])
        })
        .collect()
}

/// Two relays uniform on the segment `[0, d]`, as `(beta1, beta2)` pairs.
pub fn random_pairs(seed: u64, n: usize, d: f64) -> Result<Vec<ProjectedPair>> {
    (0..n)
        .map(|i| {
            let mut rng = sample_rng(seed ^ 0x7061_6972, i as u64);
            let (u, v) = (unit_draw(&mut rng), unit_draw(&mut rng));
            let (lo, hi) = if u <= v { (u, v) } else { (v, u) };
            ProjectedPair::new(lo, 1.0 - hi, d)
        })
        .collect()
}

fn p1(topology: &Topology, params: &PropagationParams) -> Result<f64> {
    Ok(approx_capacity_p1(&gain_matrix(topology, params)?)?.capacity)
}

pub fn run_suite(suite: Suite, cfg: &SuiteConfig) -> Result<SuiteReport> {
    cfg.params.validate()?;
    let checks = match suite {
        Suite::Duality => duality(cfg)?,
        Suite::Symmetrization => symmetrization_checks(cfg)?,
        Suite::ScheduleStructure => schedule_structure_checks(cfg)?,
        Suite::NearOffsets => near_offset_checks(cfg)?,
        Suite::FarOffsets => far_offset_checks(cfg)?,
        Suite::Kkt => vertex_certificate_checks(cfg)?,
        Suite::OptimalPlacement => optimal_placement_checks(cfg)?,
    };
    Ok(SuiteReport { suite, checks })
}

fn duality(cfg: &SuiteConfig) -> Result<Vec<CheckLine>> {
    let mut out = Vec::new();
    let topologies = random_topologies(cfg.seed, cfg.random_instances, cfg.d)?;
    let mut worst = 0.0f64;
    for t in &topologies {
        let gm = gain_matrix(t, &cfg.params)?;
        let a = approx_capacity_p1(&gm)?.capacity;
        let b = approx_capacity_cutset(&gm)?.capacity;
        worst = worst.max((a - b).abs() / a.abs().max(1.0));
    }
    out.push(at_most("flow vs cut-set, relative", worst, 1e-6, topologies.len()));

    let hyp = hypothesis_line(cfg);
    let hyp_ok = hyp.passed;
    out.push(hyp);
    if !hyp_ok {
        return Ok(out);
    }
    let betas = seeded_betas(cfg.seed, 0x6475_616c, cfg.instances, 0.0, 0.5);
    let (mut p1_p4, mut p4_p6, mut p6_d1, mut cert) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for &beta in &betas {
        let g = SymmetricGeometry::new(beta, cfg.d, &cfg.params)?;
        let c1 = p1(&g.topology(), &cfg.params)?;
        let c4 = capacity_p4(&g)?.capacity;
        let paths = capacity_p6_paths(&g)?;
        let dual = dual_d1(&g)?;
        p1_p4 = p1_p4.max((c1 - c4).abs());
        p4_p6 = p4_p6.max((c4 - paths.capacity).abs());
        p6_d1 = p6_d1.max((paths.capacity - dual.objective()).abs());
        cert = cert
            .max(dual.feasibility_residual(&g))
            .max(dual.complementary_slackness_residual(&g, &paths.allocation));
    }
    let n = betas.len();
    out.push(at_most("flow vs one-parameter program", p1_p4, LP_AGREEMENT_TOL, n));
    out.push(at_most("one-parameter vs path program", p4_p6, LP_AGREEMENT_TOL, n));
    out.push(at_most("path program vs dual", p6_d1, LP_AGREEMENT_TOL, n));
    out.push(at_most("dual residuals", cert, LP_AGREEMENT_TOL, n));
    Ok(out)
}

fn symmetrization_checks(cfg: &SuiteConfig) -> Result<Vec<CheckLine>> {
    let pairs = random_pairs(cfg.seed, cfg.random_instances, cfg.d)?;
    let (mut sym_deficit, mut eq17) = (f64::NEG_INFINITY, 0.0f64);
    let mut counted = 0;
    for pair in &pairs {
        if pair.beta1.max(pair.beta2) <= 0.0 {
            continue;
        }
        counted += 1;
        let gm = gain_matrix(&pair.topology(), &cfg.params)?;
        let asym = approx_capacity_p1(&gm)?.capacity;
        let sym = p1(&symmetrize(pair, &cfg.params)?.topology(), &cfg.params)?;
        sym_deficit = sym_deficit.max(asym - sym);
        let check = verify_optimal_solution_properties(&gm, &PropertySet::MirroredRelayHops)?;
        eq17 = eq17.max(check.unconstrained - check.constrained);
    }
    let topologies = random_topologies(cfg.seed, cfg.random_instances, cfg.d)?;
    let mut proj_deficit = f64::NEG_INFINITY;
    for t in &topologies {
        let original = p1(t, &cfg.params)?;
        let projected = p1(&project_topology(t), &cfg.params)?;
        proj_deficit = proj_deficit.max(original - projected);
    }
    Ok(vec![
        at_most("asymmetric minus symmetrized capacity", sym_deficit, 1e-9, counted),
        at_most("optimum loss with relay-1 exit = source-to-relay-2", eq17, 1e-8, counted),
        at_most("original minus projected capacity", proj_deficit, 1e-9, topologies.len()),
    ])
}

fn schedule_structure_checks(cfg: &SuiteConfig) -> Result<Vec<CheckLine>> {
    let hyp = hypothesis_line(cfg);
    if !hyp.passed {
        return Ok(vec![hyp]);
    }
    let betas = seeded_betas(cfg.seed, 0x6c32, cfg.instances, 0.0, 0.5);
    let mut worst = 0.0f64;
    for &beta in &betas {
        let g = SymmetricGeometry::new(beta, cfg.d, &cfg.params)?;
        let gm = gain_matrix(&g.topology(), &cfg.params)?;
        let c = verify_optimal_solution_properties(&gm, &PropertySet::SymmetricSchedule)?;
        worst = worst.max((c.unconstrained - c.constrained).abs());
    }
    Ok(vec![
        hyp,
        at_most("optimum change under the symmetric-schedule properties", worst, 1e-8, betas.len()),
    ])
}

fn near_offset_checks(cfg: &SuiteConfig) -> Result<Vec<CheckLine>> {
    let hyp = hypothesis_line(cfg);
    if !hyp.passed {
        return Ok(vec![hyp]);
    }
    let grid = category2_beta_grid(&cfg.params, cfg.d, cfg.beta_points);
    let mut min_margin = f64::INFINITY;
    for &beta in &grid {
        let g = SymmetricGeometry::new(beta, cfg.d, &cfg.params)?;
        min_margin = min_margin.min(near_offset_check(&g, cfg.lambda_grid)?.min_margin);
    }
    let f = f_beta_monotonicity(&cfg.params, cfg.d, &grid)?;
    let f_max = f.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let f_drop = f
        .values
        .windows(2)
        .map(|w| w[0] - w[1])
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(vec![
        hyp,
        above("C* minus min of the two bounds", min_margin, STRICT_MARGIN, grid.len()),
        at_most("f(beta) maximum", f_max, 0.0, grid.len()).strict(),
        at_most("f(beta) largest decrease", f_drop.max(0.0), 0.0, grid.len()),
    ])
}

fn far_offset_checks(cfg: &SuiteConfig) -> Result<Vec<CheckLine>> {
    let hyp = hypothesis_line(cfg);
    if !hyp.passed {
        return Ok(vec![hyp]);
    }
    let thr = category_threshold(&cfg.params, cfg.d);
    let betas = seeded_betas(cfg.seed, 0x6331, cfg.instances.max(cfg.beta_points), thr, 0.5);
    let (mut min_margin, mut g_drop, mut grid_excess) = (f64::INFINITY, 0.0f64, 0.0f64);
    let steps = (cfg.lambda_grid.max(2) - 1) as f64;
    for &beta in &betas {
        let g = SymmetricGeometry::new(beta, cfg.d, &cfg.params)?;
        let r = category1_margin(&g)?;
        min_margin = min_margin.min(r.margin);
        g_drop = g_drop.max(r.g[0] - r.g[1]).max(r.g[1] - r.g[2]);
        for k in 0..=steps as usize {
            grid_excess = grid_excess.max(bound_p4d(&g, k as f64 / steps) - r.max_bound);
        }
    }
    let n = betas.len();
    Ok(vec![
        hyp,
        above("C* minus max of the source/destination bound", min_margin, STRICT_MARGIN, n),
        at_most("g(lambda2) largest decrease", g_drop, 0.0, n),
        at_most("grid maximum above analytic maximum", grid_excess, 1e-12, n),
    ])
}

fn vertex_certificate_checks(cfg: &SuiteConfig) -> Result<Vec<CheckLine>> {
    let hyp = hypothesis_line(cfg);
    if !hyp.passed {
        return Ok(vec![hyp]);
    }
    let n = cfg.beta_points;
    let grid: Vec<f64> = (1..=n).map(|k| k as f64 / (3.0 * (n as f64 + 1.0))).collect();
    let (mut cond, mut lp_gap, mut direct, mut mismatch) = (f64::INFINITY, 0.0f64, 0.0f64, 0.0f64);
    for &beta in &grid {
        let g = SymmetricGeometry::new(beta, cfg.d, &cfg.params)?;
        let r = kkt_condition(&g)?;
        cond = cond.min(r.condition_lhs - r.condition_rhs);
        lp_gap = lp_gap.max(r.lp_gap);
        direct = direct.max(r.direct_path_gap);
        if r.holds != (r.log2_s >= r.fhat) {
            mismatch += 1.0;
        }
    }
    let sufficient = if kkt_sufficient_condition(&cfg.params, cfg.d) { 0.0 } else { 1.0 };
    Ok(vec![
        hyp,
        at_most("log2(s) >= 1.1245 a", sufficient, 0.0, 1),
        above("vertex condition slack", cond, -1e-12, grid.len()).non_negative(),
        at_most("analytic vertex vs path LP", lp_gap, LP_AGREEMENT_TOL, grid.len()),
        at_most("optimum change without the direct path", direct, LP_AGREEMENT_TOL, grid.len()),
        at_most("condition vs fhat disagreements", mismatch, 0.0, grid.len()),
    ])
}

fn optimal_placement_checks(cfg: &SuiteConfig) -> Result<Vec<CheckLine>> {
    let hyp = hypothesis_line(cfg);
    if !hyp.passed {
        return Ok(vec![hyp]);
    }
    let c_star = cstar(&cfg.params, cfg.d)?;
    let eps = p1(&make_theorem_topology(cfg.d, cfg.eps_rel)?, &cfg.params)?;
    let eps_geom = SymmetricGeometry::new(cfg.eps_rel, cfg.d, &cfg.params)?;
    let closed = symmetric_capacity_closed_form(&eps_geom)?;

    let n = cfg.beta_points;
    let mut corner_deficit = f64::NEG_INFINITY;
    for k in 1..=n {
        let beta = 0.5 * k as f64 / (n as f64 + 1.0);
        let c = p1(&SymmetricGeometry::new(beta, cfg.d, &cfg.params)?.topology(), &cfg.params)?;
        corner_deficit = corner_deficit.max(c - eps);
    }

    let topologies = random_topologies(cfg.seed, cfg.random_instances, cfg.d)?;
    let mut excess = f64::NEG_INFINITY;
    for t in &topologies {
        excess = excess.max(p1(t, &cfg.params)? - c_star);
    }

    let mut approach = f64::NEG_INFINITY;
    let mut last = f64::NEG_INFINITY;
    for e in [1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-8, 1e-10] {
        let c = p1(&make_theorem_topology(cfg.d, e)?, &cfg.params)?;
        approach = approach.max(last - c);
        last = c;
    }

    Ok(vec![
        hyp,
        above("C* minus endpoint-placement capacity", c_star - eps, 0.0, 1),
        at_most("endpoint placement vs closed form", (eps - closed).abs(), 1e-9, 1),
        at_most("symmetric capacity above the endpoint placement", corner_deficit, 1e-9, n),
        above("C* minus random-placement capacity", -excess, -1e-9, topologies.len()),
        at_most("capacity drop as eps_rel shrinks", approach, 1e-9, 7),
    ])
}
