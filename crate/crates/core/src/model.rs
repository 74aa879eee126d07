//! Network geometry and the path-loss link model.
//!
//! Node 0 is the source, nodes `1..=N` are relays and node `N + 1` is the
//! destination. Link capacities are in bits per channel use and follow
//! `log2(gamma / d^a)` (approximate) or `log2(1 + gamma / d^a)` (exact).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default clamp for coincident nodes, relative to the source–destination distance.
pub const DEFAULT_MIN_DISTANCE_REL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CapacityMode {
    #[default]
    Approx,
    Exact,
}

/// Lower clamp applied to pairwise distances.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MinDistance {
    /// Absolute length.
    Absolute(f64),
    /// Fraction of a reference length (the source–destination distance when
    /// building a gain matrix, 1 for a bare [`link_capacity`] call).
    Relative(f64),
}

impl MinDistance {
    pub fn resolve(self, reference: f64) -> f64 {
        match self {
            MinDistance::Absolute(v) => v,
            MinDistance::Relative(r) => r * reference,
        }
    }

    fn value(self) -> f64 {
        match self {
            MinDistance::Absolute(v) | MinDistance::Relative(v) => v,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropagationParams {
    /// Dimensionless SNR scale.
    pub gamma: f64,
    /// Path-loss exponent.
    pub a: f64,
    pub mode: CapacityMode,
    pub min_distance: MinDistance,
}

impl PropagationParams {
    pub fn new(gamma: f64, a: f64) -> Result<Self> {
        let params = PropagationParams {
            gamma,
            a,
            mode: CapacityMode::Approx,
            min_distance: MinDistance::Relative(DEFAULT_MIN_DISTANCE_REL),
        };
        params.validate()?;
        Ok(params)
    }

    pub fn with_mode(mut self, mode: CapacityMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_min_distance(mut self, min_distance: MinDistance) -> Result<Self> {
        self.min_distance = min_distance;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(Error::param(format!("gamma must be finite and > 0, got {}", self.gamma)));
        }
        if !(self.a.is_finite() && self.a > 1.0) {
            return Err(Error::param(format!(
                "path-loss exponent must be finite and > 1, got {}",
                self.a
            )));
        }
        let eps = self.min_distance.value();
        if !(eps.is_finite() && eps > 0.0) {
            return Err(Error::param(format!("min_distance must be finite and > 0, got {eps}")));
        }
        Ok(())
    }

    /// `log2(gamma / d^a)` evaluated without forming the quotient.
    pub fn log2_snr(&self, distance: f64) -> f64 {
        self.gamma.log2() - self.a * distance.log2()
    }

    /// `gamma^(1/a)`, the distance at which the SNR equals one.
    pub fn unit_snr_distance(&self) -> f64 {
        self.gamma.powf(self.a.recip())
    }
}

/// Capacity of a single aligned link, clamping `distance` below at the
/// resolved minimum distance.
pub fn link_capacity(distance: f64, params: &PropagationParams) -> Result<f64> {
    params.validate()?;
    if distance.is_nan() || distance < 0.0 {
        return Err(Error::param(format!("distance must be >= 0, got {distance}")));
    }
    Ok(capacity_unchecked(distance.max(params.min_distance.resolve(1.0)), params))
}

fn capacity_unchecked(distance: f64, params: &PropagationParams) -> f64 {
    let t = params.log2_snr(distance);
    match params.mode {
        CapacityMode::Approx => t,
        // log2(1 + 2^t), split so neither branch overflows
        CapacityMode::Exact if t > 0.0 => t + (-t).exp2().ln_1p() / std::f64::consts::LN_2,
        CapacityMode::Exact => t.exp2().ln_1p() / std::f64::consts::LN_2,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub source: Point,
    pub destination: Point,
    pub relays: Vec<Point>,
}

impl Topology {
    pub fn new(source: Point, destination: Point, relays: Vec<Point>) -> Result<Self> {
        let pts = std::iter::once(&source).chain(&relays).chain(std::iter::once(&destination));
        for p in pts {
            if !(p.x.is_finite() && p.y.is_finite()) {
                return Err(Error::NonFinite("node coordinates".into()));
            }
        }
        if source.distance(&destination) <= 0.0 {
            return Err(Error::param("source and destination coincide"));
        }
        Ok(Topology {
            source,
            destination,
            relays,
        })
    }

    /// Source at the origin, destination at `(d, 0)`.
    pub fn on_axis(d: f64, relays: Vec<Point>) -> Result<Self> {
        if !(d.is_finite() && d > 0.0) {
            return Err(Error::param(format!("distance must be finite and > 0, got {d}")));
        }
        Topology::new(Point::new(0.0, 0.0), Point::new(d, 0.0), relays)
    }

    pub fn n_relays(&self) -> usize {
        self.relays.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.relays.len() + 2
    }

    pub fn node(&self, i: usize) -> Point {
        match i {
            0 => self.source,
            i if i <= self.relays.len() => self.relays[i - 1],
            _ => self.destination,
        }
    }

    pub fn source_destination_distance(&self) -> f64 {
        self.source.distance(&self.destination)
    }

    /// Same geometry with every coordinate multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Topology {
        let s = |p: &Point| Point::new(p.x * k, p.y * k);
        Topology {
            source: s(&self.source),
            destination: s(&self.destination),
            relays: self.relays.iter().map(s).collect(),
        }
    }
}

/// Pairwise distances and link capacities of a topology.
///
/// Entries are indexed `[to][from]`, mirroring the `l_{j,i}` convention for
/// the link from node `i` to node `j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkGainMatrix {
    pub n_nodes: usize,
    pub dist: Vec<Vec<f64>>,
    pub cap: Vec<Vec<f64>>,
    /// False where `gamma / d^a <= 1`, i.e. the high-SNR approximation is invalid.
    pub valid: Vec<Vec<bool>>,
    pub params: PropagationParams,
}

impl LinkGainMatrix {
    pub fn n_relays(&self) -> usize {
        self.n_nodes - 2
    }

    pub fn destination(&self) -> usize {
        self.n_nodes - 1
    }

    pub fn capacity(&self, from: usize, to: usize) -> f64 {
        self.cap[to][from]
    }

    pub fn distance(&self, from: usize, to: usize) -> f64 {
        self.dist[to][from]
    }

    pub fn is_valid(&self, from: usize, to: usize) -> bool {
        self.valid[to][from]
    }

    pub fn set_capacity(&mut self, from: usize, to: usize, value: f64) {
        self.cap[to][from] = value;
    }

    /// Directed links `(from, to)` that appear in the capacity programs:
    /// `from` in `0..=N`, `to` in `1..=N+1`, `from != to`.
    pub fn links(&self) -> Vec<(usize, usize)> {
        links(self.n_relays())
    }

    pub fn invalid_links(&self) -> Vec<(usize, usize)> {
        self.links()
            .into_iter()
            .filter(|&(i, j)| !self.is_valid(i, j))
            .collect()
    }

    pub fn all_valid(&self) -> bool {
        self.invalid_links().is_empty()
    }
}

pub fn links(n_relays: usize) -> Vec<(usize, usize)> {
    let dst = n_relays + 1;
    let mut out = Vec::new();
    for i in 0..=n_relays {
        for j in 1..=dst {
            if i != j {
                out.push((i, j));
            }
        }
    }
    out
}

pub fn gain_matrix(topology: &Topology, params: &PropagationParams) -> Result<LinkGainMatrix> {
    params.validate()?;
    let n = topology.n_nodes();
    let floor = params
        .min_distance
        .resolve(topology.source_destination_distance());
    let mut dist = vec![vec![0.0; n]; n];
    let mut cap = vec![vec![0.0; n]; n];
    let mut valid = vec![vec![true; n]; n];
    for to in 0..n {
        for from in 0..n {
            if to == from {
                continue;
            }
            let d = topology.node(from).distance(&topology.node(to)).max(floor);
            dist[to][from] = d;
            cap[to][from] = capacity_unchecked(d, params);
            valid[to][from] = params.log2_snr(d) > 0.0;
        }
    }
    Ok(LinkGainMatrix {
        n_nodes: n,
        dist,
        cap,
        valid,
        params: *params,
    })
}

/// Projects every relay orthogonally onto the source–destination axis.
pub fn project_topology(topology: &Topology) -> Topology {
    let s = topology.source;
    let len = topology.source_destination_distance();
    let ux = (topology.destination.x - s.x) / len;
    let uy = (topology.destination.y - s.y) / len;
    let relays = topology
        .relays
        .iter()
        .map(|p| {
            let t = (p.x - s.x) * ux + (p.y - s.y) * uy;
            Point::new(s.x + t * ux, s.y + t * uy)
        })
        .collect();
    Topology {
        source: topology.source,
        destination: topology.destination,
        relays,
    }
}

/// Two relays on the source–destination axis: relay 1 at `beta1 * d`,
/// relay 2 at `(1 - beta2) * d`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectedPair {
    pub beta1: f64,
    pub beta2: f64,
    pub d: f64,
}

impl ProjectedPair {
    pub fn new(beta1: f64, beta2: f64, d: f64) -> Result<Self> {
        if !(d.is_finite() && d > 0.0) {
            return Err(Error::param(format!("distance must be finite and > 0, got {d}")));
        }
        for b in [beta1, beta2] {
            if !(0.0..=1.0).contains(&b) {
                return Err(Error::param(format!("beta must lie in [0, 1], got {b}")));
            }
        }
        let left = beta1 * d;
        let right = d - beta2 * d;
        if left > right {
            return Err(Error::Ordering { left, right });
        }
        Ok(ProjectedPair { beta1, beta2, d })
    }

    /// Reads the pair off a projected two-relay topology, relabelling the
    /// relays if relay 1 lies beyond relay 2.
    pub fn from_topology(topology: &Topology) -> Result<Self> {
        if topology.n_relays() != 2 {
            return Err(Error::param("a projected pair needs exactly two relays"));
        }
        let d = topology.source_destination_distance();
        let axial = |p: &Point| {
            let ux = (topology.destination.x - topology.source.x) / d;
            let uy = (topology.destination.y - topology.source.y) / d;
            (p.x - topology.source.x) * ux + (p.y - topology.source.y) * uy
        };
        let mut t = [axial(&topology.relays[0]), axial(&topology.relays[1])];
        if t[0] > t[1] {
            t.swap(0, 1);
        }
        ProjectedPair::new((t[0] / d).clamp(0.0, 1.0), (1.0 - t[1] / d).clamp(0.0, 1.0), d)
    }

    pub fn topology(&self) -> Topology {
        Topology {
            source: Point::new(0.0, 0.0),
            destination: Point::new(self.d, 0.0),
            relays: vec![
                Point::new(self.beta1 * self.d, 0.0),
                Point::new((1.0 - self.beta2) * self.d, 0.0),
            ],
        }
    }
}

/// Symmetric projected two-relay network with relays at `beta * d` and
/// `(1 - beta) * d`, and its four distinct link capacities:
/// `l1` (source→relay 1, relay 2→destination), `l2` (source→relay 2,
/// relay 1→destination), `l3` (between the relays), `l4` (direct).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymmetricGeometry {
    pub beta: f64,
    pub d: f64,
    pub l1: f64,
    pub l2: f64,
    /// Infinite at `beta = 1/2`, where the relays coincide.
    pub l3: f64,
    pub l4: f64,
    /// `gamma / d^a`.
    pub s: f64,
    pub params: PropagationParams,
}

impl SymmetricGeometry {
    pub fn new(beta: f64, d: f64, params: &PropagationParams) -> Result<Self> {
        params.validate()?;
        if !(beta > 0.0 && beta <= 0.5) {
            return Err(Error::param(format!("beta must lie in (0, 1/2], got {beta}")));
        }
        if !(d.is_finite() && d > 0.0) {
            return Err(Error::param(format!("distance must be finite and > 0, got {d}")));
        }
        let floor = params.min_distance.resolve(d);
        let cap = |len: f64| capacity_unchecked(len.max(floor), params);
        let l3 = if beta < 0.5 {
            cap((1.0 - 2.0 * beta) * d)
        } else {
            f64::INFINITY
        };
        Ok(SymmetricGeometry {
            beta,
            d,
            l1: cap(beta * d),
            l2: cap((1.0 - beta) * d),
            l3,
            l4: cap(d),
            s: params.log2_snr(d).exp2(),
            params: *params,
        })
    }

    pub fn log2_s(&self) -> f64 {
        self.params.log2_snr(self.d)
    }

    /// `gamma / d^a > 3^a`, the distance condition of the optimal-placement result.
    pub fn satisfies_distance_condition(&self) -> bool {
        self.log2_s() > self.params.a * 3f64.log2()
    }

    pub fn topology(&self) -> Topology {
        ProjectedPair {
            beta1: self.beta,
            beta2: self.beta,
            d: self.d,
        }
        .topology()
    }
}

/// Moves the inner relay outward so both relays sit at the larger offset
/// `max(beta1, beta2)`.
///
/// An offset above 1/2 describes the same network as `1 - beta` with the
/// relay labels swapped, so it is folded back into `(0, 1/2]`.
pub fn symmetrize(pair: &ProjectedPair, params: &PropagationParams) -> Result<SymmetricGeometry> {
    let pair = ProjectedPair::new(pair.beta1, pair.beta2, pair.d)?;
    let mut beta = pair.beta1.max(pair.beta2);
    if beta > 0.5 {
        beta = 1.0 - beta;
    }
    if beta <= 0.0 {
        return Err(Error::param("both relays sit on the endpoints; beta must be > 0"));
    }
    SymmetricGeometry::new(beta, pair.d, params)
}

/// Relays at `eps_rel * d` and `(1 - eps_rel) * d`: as close to the source
/// and destination as the tolerance allows.
pub fn make_theorem_topology(d: f64, eps_rel: f64) -> Result<Topology> {
    if !(eps_rel > 0.0 && eps_rel < 0.5) {
        return Err(Error::param(format!("eps_rel must lie in (0, 1/2), got {eps_rel}")));
    }
    Topology::on_axis(
        d,
        vec![Point::new(eps_rel * d, 0.0), Point::new((1.0 - eps_rel) * d, 0.0)],
    )
}

/// Equally spaced relays on the source–destination axis.
pub fn make_line_topology(d: f64, n_relays: usize) -> Result<Topology> {
    let hop = d / (n_relays as f64 + 1.0);
    Topology::on_axis(
        d,
        (1..=n_relays).map(|i| Point::new(i as f64 * hop, 0.0)).collect(),
    )
}
