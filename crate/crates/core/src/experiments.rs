//! Seeded Monte Carlo placement study, symmetric offset sweep, and the
//! endpoint-placement versus line-network distance comparison, with CSV and
//! JSON output.
//!
//! Random relay positions come from ChaCha8 (`rand_chacha`): sample `i`
//! uses `ChaCha8Rng::seed_from_u64(seed)` with stream `i`, and each
//! uniform draw is `(next_u64() >> 11) * 2^-53`. Samples are therefore
//! independent of evaluation order and thread count.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    crossover_distance, routing_regime, symmetric_capacity_closed_form, theorem_hypothesis,
    LP_AGREEMENT_TOL,
};
use crate::capacity::{approx_capacity_p1, capacity_p4, capacity_p6_paths};
use crate::error::{Error, Result};
use crate::model::{
    gain_matrix, link_capacity, make_line_topology, make_theorem_topology, CapacityMode, Point,
    PropagationParams, SymmetricGeometry, Topology,
};

pub const DEFAULT_EPS_REL: f64 = 1e-6;
pub const DEFAULT_HISTOGRAM_BINS: usize = 20;
/// Environment variable capping the worker count; 0 or unset means automatic.
pub const THREADS_ENV: &str = "ONE21_THREADS";

/// Axis-aligned box `[x_min, x_max] x [y_min, y_max]`; a zero-width side
/// pins that coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Rect {
    /// `[0, d] x [-d/2, d/2]`.
    pub fn strip(d: f64) -> Self {
        Rect {
            x_min: 0.0,
            x_max: d,
            y_min: -d / 2.0,
            y_max: d / 2.0,
        }
    }

    pub fn point(p: Point) -> Self {
        Rect {
            x_min: p.x,
            x_max: p.x,
            y_min: p.y,
            y_max: p.y,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = [self.x_min, self.x_max, self.y_min, self.y_max]
            .iter()
            .all(|v| v.is_finite())
            && self.x_min <= self.x_max
            && self.y_min <= self.y_max;
        if ok {
            Ok(())
        } else {
            Err(Error::param(format!("sampling box is not well-ordered: {self:?}")))
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Point {
        let x = self.x_min + unit_draw(rng) * (self.x_max - self.x_min);
        let y = self.y_min + unit_draw(rng) * (self.y_max - self.y_min);
        Point::new(x, y)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Region {
    /// Both relays drawn from the same box.
    Rect(Rect),
    /// Relay `r` drawn from box `r`.
    PerRelay(Vec<Rect>),
}

impl Region {
    fn boxes(&self) -> [Rect; 2] {
        match self {
            Region::Rect(r) => [*r, *r],
            Region::PerRelay(v) => [v[0], v[1]],
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Region::Rect(r) => r.validate(),
            Region::PerRelay(v) if v.len() == 2 => v.iter().try_for_each(Rect::validate),
            Region::PerRelay(v) => Err(Error::Dimension {
                expected: 2,
                got: v.len(),
            }),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub params: PropagationParams,
    pub d: f64,
    pub seed: u64,
    pub samples: usize,
    pub region: Region,
    pub eps_rel: f64,
    pub histogram_bins: usize,
}

impl ExperimentConfig {
    /// Defaults: seed 0, 1000 samples, the `[0, d] x [-d/2, d/2]` strip,
    /// `eps_rel = 1e-6`, 20 histogram bins.
    pub fn new(params: PropagationParams, d: f64) -> Self {
        ExperimentConfig {
            params,
            d,
            seed: 0,
            samples: 1000,
            region: Region::Rect(Rect::strip(d)),
            eps_rel: DEFAULT_EPS_REL,
            histogram_bins: DEFAULT_HISTOGRAM_BINS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(self.d.is_finite() && self.d > 0.0) {
            return Err(Error::param(format!("distance must be finite and > 0, got {}", self.d)));
        }
        if self.samples == 0 {
            return Err(Error::param("samples must be >= 1"));
        }
        if self.histogram_bins == 0 {
            return Err(Error::param("histogram needs at least one bin"));
        }
        if !(self.eps_rel > 0.0 && self.eps_rel < 0.5) {
            return Err(Error::param(format!("eps_rel must lie in (0, 1/2), got {}", self.eps_rel)));
        }
        self.region.validate()
    }
}

pub(crate) fn unit_draw(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

pub(crate) fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Worker count from [`THREADS_ENV`]; `None` means automatic.
pub fn configured_threads() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(0) => Ok(None),
            Ok(n) => Ok(Some(n)),
            Err(_) => Err(Error::param(format!("{THREADS_ENV} must be a non-negative integer, got {v:?}"))),
        },
    }
}

fn run_pool<T: Send>(job: impl FnOnce() -> T + Send) -> Result<T> {
    match configured_threads()? {
        None => Ok(job()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::param(format!("thread pool: {e}")))?;
            Ok(pool.install(job))
        }
    }
}

/// One output table row.
pub trait CsvRow {
    fn header() -> &'static str;
    fn fields(&self) -> Vec<String>;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloRow {
    pub sample: usize,
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
    pub capacity_bits: f64,
}

impl CsvRow for MonteCarloRow {
    fn header() -> &'static str {
        "sample,x1,y1,x2,y2,capacity_bits"
    }

    fn fields(&self) -> Vec<String> {
        let mut out = vec![self.sample.to_string()];
        out.extend([self.x1, self.y1, self.x2, self.y2, self.capacity_bits].map(format_g12));
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<usize>,
}

impl Histogram {
    fn build(values: &[f64], lo: f64, hi: f64, bins: usize) -> Self {
        let mut counts = vec![0; bins];
        let width = (hi - lo) / bins as f64;
        for &v in values {
            let k = if width > 0.0 { ((v - lo) / width).floor() } else { 0.0 };
            counts[k.clamp(0.0, (bins - 1) as f64) as usize] += 1;
        }
        Histogram { lo, hi, counts }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloSummary {
    pub samples: usize,
    /// P1 capacity of the endpoint placement at `eps_rel`.
    pub reference_capacity_bits: f64,
    /// `2 log2(gamma / d^a)`, or `None` when `gamma / d^a <= 1`.
    pub cstar_bits: Option<f64>,
    pub mean_capacity_bits: f64,
    pub min_capacity_bits: f64,
    pub max_capacity_bits: f64,
    pub mean_ratio: f64,
    pub samples_above_reference: usize,
    /// Over `[0, reference]`; values outside land in the end bins.
    pub histogram: Histogram,
}

/// Capacity of random two-relay placements against the endpoint placement.
pub fn monte_carlo(config: &ExperimentConfig) -> Result<(Vec<MonteCarloRow>, MonteCarloSummary)> {
    config.validate()?;
    let reference_gm = gain_matrix(&make_theorem_topology(config.d, config.eps_rel)?, &config.params)?;
    let reference = approx_capacity_p1(&reference_gm)?.capacity;
    let boxes = config.region.boxes();

    let rows: Vec<MonteCarloRow> = run_pool(|| {
        (0..config.samples)
            .into_par_iter()
            .map(|i| {
                let mut rng = sample_rng(config.seed, i as u64);
                let r1 = boxes[0].sample(&mut rng);
                let r2 = boxes[1].sample(&mut rng);
                let topo = Topology::on_axis(config.d, vec![r1, r2])?;
                let cap = approx_capacity_p1(&gain_matrix(&topo, &config.params)?)?.capacity;
                Ok(MonteCarloRow {
                    sample: i,
                    x1: r1.x,
                    y1: r1.y,
                    x2: r2.x,
                    y2: r2.y,
                    capacity_bits: cap,
                })
            })
            .collect::<Result<Vec<_>>>()
    })??;

    let caps: Vec<f64> = rows.iter().map(|r| r.capacity_bits).collect();
    let mean = caps.iter().sum::<f64>() / caps.len() as f64;
    let log2_s = config.params.log2_snr(config.d);
    let summary = MonteCarloSummary {
        samples: rows.len(),
        reference_capacity_bits: reference,
        cstar_bits: (log2_s > 0.0).then_some(2.0 * log2_s),
        mean_capacity_bits: mean,
        min_capacity_bits: caps.iter().copied().fold(f64::INFINITY, f64::min),
        max_capacity_bits: caps.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        mean_ratio: mean / reference,
        samples_above_reference: caps.iter().filter(|&&c| c > reference + 1e-6).count(),
        histogram: Histogram::build(&caps, 0.0, reference, config.histogram_bins),
    };
    Ok((rows, summary))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaRow {
    pub beta: f64,
    pub capacity_bits: f64,
    pub lambda2_star: f64,
    /// True when all traffic follows source → relay 1 → relay 2 → destination.
    pub routing: bool,
    pub lp_capacity_bits: f64,
    pub closed_form_bits: Option<f64>,
}

impl CsvRow for BetaRow {
    fn header() -> &'static str {
        "beta,capacity_bits,lambda2_star,regime"
    }

    fn fields(&self) -> Vec<String> {
        vec![
            format_g12(self.beta),
            format_g12(self.capacity_bits),
            format_g12(self.lambda2_star),
            if self.routing { "routing" } else { "multipath" }.to_string(),
        ]
    }
}

/// `n` offsets `k / (2 (n + 1))`, `k = 1..=n`, strictly inside `(0, 1/2)`.
pub fn default_beta_grid(n: usize) -> Vec<f64> {
    let den = 2.0 * (n as f64 + 1.0);
    (1..=n).map(|k| k as f64 / den).collect()
}

fn check_increasing(grid: &[f64], what: &str) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::param(format!("{what} grid is empty")));
    }
    if grid.iter().any(|v| !v.is_finite()) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param(format!("{what} grid must be finite and strictly increasing")));
    }
    Ok(())
}

/// Capacity of the symmetric network as a function of the relay offset.
///
/// Each point is solved as a flow LP; when `gamma / d^a > 3^a` the closed
/// form is evaluated too and must agree within `1e-8`, and the path LP's
/// routing classification must agree with `beta > 1/3` away from `1/3`.
pub fn beta_sweep(config: &ExperimentConfig, beta_grid: &[f64]) -> Result<Vec<BetaRow>> {
    config.validate()?;
    check_increasing(beta_grid, "beta")?;
    if beta_grid[0] <= 0.0 || beta_grid[beta_grid.len() - 1] >= 0.5 {
        return Err(Error::param("beta grid must lie in (0, 1/2)"));
    }
    let hypothesis = theorem_hypothesis(&config.params, config.d);
    let rows = run_pool(|| {
        beta_grid
            .par_iter()
            .map(|&beta| {
                let geom = SymmetricGeometry::new(beta, config.d, &config.params)?;
                let lp = approx_capacity_p1(&gain_matrix(&geom.topology(), &config.params)?)?.capacity;
                let closed = if hypothesis && config.params.mode == CapacityMode::Approx {
                    let cf = symmetric_capacity_closed_form(&geom)?;
                    if (cf - lp).abs() > LP_AGREEMENT_TOL * lp.abs().max(1.0) {
                        return Err(Error::Inconsistent(format!(
                            "beta = {beta}: closed form {cf} vs flow LP {lp}"
                        )));
                    }
                    Some(cf)
                } else {
                    None
                };
                let paths = capacity_p6_paths(&geom)?;
                let routing = if hypothesis {
                    let analytic = routing_regime(beta);
                    if (beta - 1.0 / 3.0).abs() > 1e-6 && analytic != paths.routing {
                        return Err(Error::Inconsistent(format!(
                            "beta = {beta}: path LP routing = {}, expected {analytic}",
                            paths.routing
                        )));
                    }
                    analytic
                } else {
                    paths.routing
                };
                Ok(BetaRow {
                    beta,
                    capacity_bits: closed.unwrap_or(lp),
                    lambda2_star: capacity_p4(&geom)?.lambda2,
                    routing,
                    lp_capacity_bits: lp,
                    closed_form_bits: closed,
                })
            })
            .collect::<Result<Vec<_>>>()
    })??;
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaSweepSummary {
    pub rows: usize,
    pub cstar_bits: Option<f64>,
    pub hypothesis_holds: bool,
    pub strictly_decreasing: bool,
    pub first_routing_beta: Option<f64>,
}

pub fn summarize_beta_sweep(config: &ExperimentConfig, rows: &[BetaRow]) -> BetaSweepSummary {
    let log2_s = config.params.log2_snr(config.d);
    BetaSweepSummary {
        rows: rows.len(),
        cstar_bits: (log2_s > 0.0).then_some(2.0 * log2_s),
        hypothesis_holds: theorem_hypothesis(&config.params, config.d),
        strictly_decreasing: rows.windows(2).all(|w| w[1].capacity_bits < w[0].capacity_bits),
        first_routing_beta: rows.iter().find(|r| r.routing).map(|r| r.beta),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Winner {
    /// Relays at the endpoints (limit capacity).
    Theorem,
    /// Equally spaced line network.
    Line,
}

impl Winner {
    fn as_str(self) -> &'static str {
        match self {
            Winner::Theorem => "theorem",
            Winner::Line => "line",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceRow {
    pub d: f64,
    /// Flow-LP capacity with relays at `eps_rel * d` and `(1 - eps_rel) * d`.
    pub theorem_approx_bits: f64,
    /// Limit of the above as `eps_rel -> 0`: twice the direct-link capacity.
    pub theorem_limit_approx_bits: f64,
    pub line_approx_bits: f64,
    pub winner_approx: Winner,
    pub theorem_exact_bits: f64,
    pub theorem_limit_exact_bits: f64,
    pub line_exact_bits: f64,
    pub winner_exact: Winner,
    /// `gamma / d^a <= 3^a`.
    pub hypothesis_violated: bool,
}

impl CsvRow for DistanceRow {
    fn header() -> &'static str {
        "d,theorem_approx_bits,theorem_limit_approx_bits,line_approx_bits,winner_approx,\
         theorem_exact_bits,theorem_limit_exact_bits,line_exact_bits,winner_exact,hypothesis_violated"
    }

    fn fields(&self) -> Vec<String> {
        vec![
            format_g12(self.d),
            format_g12(self.theorem_approx_bits),
            format_g12(self.theorem_limit_approx_bits),
            format_g12(self.line_approx_bits),
            self.winner_approx.as_str().to_string(),
            format_g12(self.theorem_exact_bits),
            format_g12(self.theorem_limit_exact_bits),
            format_g12(self.line_exact_bits),
            self.winner_exact.as_str().to_string(),
            self.hypothesis_violated.to_string(),
        ]
    }
}

/// `n` distances evenly spaced over `[lo, hi]`.
pub fn linear_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n)
            .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Default comparison grid: `[50, 600]` in steps of 25.
pub fn default_distance_grid() -> Vec<f64> {
    linear_grid(50.0, 600.0, 23)
}

/// Endpoint placement against the equally spaced line network over a range
/// of source–destination distances, in both capacity modes.
///
/// The winner compares the line network with the endpoint-placement limit
/// `2 l(d)`, the supremum over placements; the finite-`eps_rel` column
/// approaches it only logarithmically in `eps_rel`.
pub fn distance_sweep_compare(config: &ExperimentConfig, d_grid: &[f64]) -> Result<Vec<DistanceRow>> {
    config.validate()?;
    check_increasing(d_grid, "distance")?;
    if d_grid[0] <= 0.0 {
        return Err(Error::param("distances must be > 0"));
    }
    let approx = config.params.with_mode(CapacityMode::Approx);
    let exact = config.params.with_mode(CapacityMode::Exact);
    let per_mode = |d: f64, params: &PropagationParams| -> Result<(f64, f64, f64, Winner)> {
        let theorem = approx_capacity_p1(&gain_matrix(&make_theorem_topology(d, config.eps_rel)?, params)?)?.capacity;
        let limit = 2.0 * link_capacity(d, params)?;
        let line = approx_capacity_p1(&gain_matrix(&make_line_topology(d, 2)?, params)?)?.capacity;
        let winner = if limit >= line { Winner::Theorem } else { Winner::Line };
        Ok((theorem, limit, line, winner))
    };
    run_pool(|| {
        d_grid
            .par_iter()
            .map(|&d| {
                let (ta, la, na, wa) = per_mode(d, &approx)?;
                let (te, le, ne, we) = per_mode(d, &exact)?;
                Ok(DistanceRow {
                    d,
                    theorem_approx_bits: ta,
                    theorem_limit_approx_bits: la,
                    line_approx_bits: na,
                    winner_approx: wa,
                    theorem_exact_bits: te,
                    theorem_limit_exact_bits: le,
                    line_exact_bits: ne,
                    winner_exact: we,
                    hypothesis_violated: !theorem_hypothesis(&config.params, d),
                })
            })
            .collect::<Result<Vec<_>>>()
    })?
}

/// Where the winner first switches from the endpoint placement to the line
/// network, by linear interpolation of the capacity difference between the
/// bracketing grid points.
pub fn locate_flip(rows: &[DistanceRow], mode: CapacityMode) -> Option<f64> {
    let diff = |r: &DistanceRow| match mode {
        CapacityMode::Approx => r.theorem_limit_approx_bits - r.line_approx_bits,
        CapacityMode::Exact => r.theorem_limit_exact_bits - r.line_exact_bits,
    };
    let winner = |r: &DistanceRow| match mode {
        CapacityMode::Approx => r.winner_approx,
        CapacityMode::Exact => r.winner_exact,
    };
    rows.windows(2).find_map(|w| {
        (winner(&w[0]) == Winner::Theorem && winner(&w[1]) == Winner::Line).then(|| {
            let (f0, f1) = (diff(&w[0]), diff(&w[1]));
            w[0].d + (w[1].d - w[0].d) * f0 / (f0 - f1)
        })
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceSweepSummary {
    pub rows: usize,
    /// `gamma^(1/a) / 3`.
    pub crossover_distance: f64,
    pub flip_approx: Option<f64>,
    pub flip_exact: Option<f64>,
    pub max_grid_step: f64,
}

pub fn summarize_distance_sweep(config: &ExperimentConfig, rows: &[DistanceRow]) -> DistanceSweepSummary {
    DistanceSweepSummary {
        rows: rows.len(),
        crossover_distance: crossover_distance(&config.params),
        flip_approx: locate_flip(rows, CapacityMode::Approx),
        flip_exact: locate_flip(rows, CapacityMode::Exact),
        max_grid_step: rows.windows(2).map(|w| w[1].d - w[0].d).fold(0.0, f64::max),
    }
}

/// C `printf("%.12g")`.
pub fn format_g12(x: f64) -> String {
    format_g(x, 12)
}

/// C `printf("%.{precision}g")` for finite and non-finite doubles.
pub fn format_g(x: f64, precision: usize) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.into();
    }
    let p = precision.max(1);
    if x == 0.0 {
        return if x.is_sign_negative() { "-0" } else { "0" }.into();
    }
    let sci = format!("{:.*e}", p - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= p as i32 {
        let mantissa = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (p as i32 - 1 - exp) as usize;
        strip_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn to_csv<R: CsvRow>(rows: &[R]) -> String {
    let mut out = String::new();
    out.push_str(R::header());
    out.push('\n');
    for r in rows {
        let _ = writeln!(out, "{}", r.fields().join(","));
    }
    out
}

#[derive(Serialize)]
struct JsonReport<'a, C: Serialize, S: Serialize> {
    config: &'a C,
    summary: &'a S,
}

/// Writes `<prefix>.csv` (header plus one line per row) and `<prefix>.json`
/// (`{"config": ..., "summary": ...}`); returns both paths.
pub fn write_outputs<R: CsvRow, C: Serialize, S: Serialize>(
    rows: &[R],
    config: &C,
    summary: &S,
    path_prefix: &Path,
) -> Result<(PathBuf, PathBuf)> {
    let with_ext = |ext: &str| {
        let mut p = path_prefix.as_os_str().to_owned();
        p.push(ext);
        PathBuf::from(p)
    };
    let csv_path = with_ext(".csv");
    let json_path = with_ext(".json");
    let json = serde_json::to_string_pretty(&JsonReport { config, summary })? + "\n";
    for (path, body) in [(&csv_path, to_csv(rows)), (&json_path, json)] {
        fs::write(path, body).map_err(|source| Error::Io {
            path: path.clone(),
            source,
        })?;
    }
    Ok((csv_path, json_path))
}
