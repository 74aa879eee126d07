//! Closed-form quantities for the two-relay placement result and grid
//! verifiers for each branch of its proof.
//!
//! All checks are stated for approximate-mode link capacities
//! `log2(gamma / d^a)`; universally quantified claims over `lambda2` or
//! `beta` are evaluated on uniform grids that include the endpoints and the
//! analytic breakpoints of the piecewise-linear bounds.

use serde::{Deserialize, Serialize};

use crate::capacity::{
    bound_p4d, bound_p4f, capacity_p6_paths, capacity_p6_paths_without_direct, PathAllocation,
};
use crate::error::{Error, Result};
use crate::model::{PropagationParams, SymmetricGeometry};

/// Strict inequalities are asserted with at least this margin, in bits.
pub const STRICT_MARGIN: f64 = 1e-9;
/// Default `lambda2` grid size, endpoints included.
pub const DEFAULT_LAMBDA_GRID: usize = 10_001;
/// `fhat(1/3) / a`: the smallest `log2(s) / a` for which the two-path vertex
/// stays optimal up to `beta = 1/3`.
pub const FHAT_ONE_THIRD_PER_A: f64 = 1.124_548_790_630_299_3;
/// Tolerance used when comparing LP optima with closed forms.
pub const LP_AGREEMENT_TOL: f64 = 1e-8;

/// `2 log2(gamma / d^a)`, the best approximate capacity over all two-relay
/// placements at source–destination distance `d`.
pub fn cstar(params: &PropagationParams, d: f64) -> Result<f64> {
    params.validate()?;
    if !(d.is_finite() && d > 0.0) {
        return Err(Error::param(format!("distance must be finite and > 0, got {d}")));
    }
    let log2_s = params.log2_snr(d);
    if log2_s <= 0.0 {
        return Err(Error::Domain(format!(
            "gamma / d^a = {} <= 1, the high-SNR approximation does not hold",
            log2_s.exp2()
        )));
    }
    Ok(2.0 * log2_s)
}

/// `gamma / d^a > 3^a`.
pub fn theorem_hypothesis(params: &PropagationParams, d: f64) -> bool {
    params.log2_snr(d) > params.a * 3f64.log2()
}

/// `d / gamma^(1/a)`, the offset separating the two categories of `beta`.
pub fn category_threshold(params: &PropagationParams, d: f64) -> f64 {
    d / params.unit_snr_distance()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Category {
    /// `beta > d / gamma^(1/a)`.
    Cat1,
    /// `0 < beta <= d / gamma^(1/a)`.
    Cat2,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CategoryReport {
    pub beta: f64,
    pub category: Category,
    /// `C*` minus the largest value of the bound that rules the category
    /// out; `None` when `gamma / d^a <= 3^a`.
    pub margin: Option<f64>,
    /// `lambda2` at which the margin is attained.
    pub witness_lambda2: Option<f64>,
}

/// Assigns `beta` to a category and fills in the matching margin.
pub fn classify_beta(beta: f64, params: &PropagationParams, d: f64) -> Result<CategoryReport> {
    if !(beta > 0.0 && beta <= 0.5) {
        return Err(Error::param(format!("beta must lie in (0, 1/2], got {beta}")));
    }
    let category = if beta > category_threshold(params, d) {
        Category::Cat1
    } else {
        Category::Cat2
    };
    let mut report = CategoryReport {
        beta,
        category,
        margin: None,
        witness_lambda2: None,
    };
    if theorem_hypothesis(params, d) {
        let approx = params.with_mode(crate::model::CapacityMode::Approx);
        let geom = SymmetricGeometry::new(beta, d, &approx)?;
        match category {
            Category::Cat1 => {
                let c1 = category1_margin(&geom)?;
                report.margin = Some(c1.margin);
                report.witness_lambda2 = Some(0.0);
            }
            Category::Cat2 => {
                let l3 = near_offset_check(&geom, DEFAULT_LAMBDA_GRID)?;
                report.margin = Some(l3.min_margin);
                report.witness_lambda2 = Some(l3.argmin_lambda2);
            }
        }
    }
    Ok(report)
}

fn require_hypothesis(geom: &SymmetricGeometry) -> Result<()> {
    if !geom.satisfies_distance_condition() {
        return Err(Error::param(format!(
            "gamma / d^a = {} does not exceed 3^a",
            geom.s
        )));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Category1Report {
    /// `C* - max over lambda2 of (1 - lambda2) l1 + lambda2 l2`.
    pub margin: f64,
    pub max_bound: f64,
    /// `g(lambda2) = gamma^(1/a) beta ((1 - beta) / beta)^lambda2` at 0, 1/2, 1.
    pub g: [f64; 3],
    pub g_nondecreasing: bool,
    pub holds: bool,
}

/// Margin by which the combined source/destination bound stays below `C*`
/// for a category-1 offset.
///
/// The bound is linear in `lambda2`, so its maximum is `max(l1, l2) = l1`.
pub fn category1_margin(geom: &SymmetricGeometry) -> Result<Category1Report> {
    require_hypothesis(geom)?;
    if geom.beta <= category_threshold(&geom.params, geom.d) {
        return Err(Error::param(format!(
            "beta = {} is not above d / gamma^(1/a)",
            geom.beta
        )));
    }
    let max_bound = bound_p4d(geom, 0.0).max(bound_p4d(geom, 1.0));
    let margin = 2.0 * geom.log2_s() - max_bound;
    let g0 = geom.params.unit_snr_distance() * geom.beta;
    let ratio = (1.0 - geom.beta) / geom.beta;
    let g = [g0, g0 * ratio.sqrt(), g0 * ratio];
    let g_nondecreasing = g[0] <= g[1] && g[1] <= g[2];
    Ok(Category1Report {
        margin,
        max_bound,
        g,
        g_nondecreasing,
        holds: margin > STRICT_MARGIN && g_nondecreasing,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NearOffsetReport {
    pub holds: bool,
    /// Smallest `C* - min(P4d, P4f)` over the grid.
    pub min_margin: f64,
    pub argmin_lambda2: f64,
    pub points: usize,
}

/// Checks that for every `lambda2` at least one of the two bounds
/// `(1 - lambda2) l1 + lambda2 l2` and `(1 - lambda2) l3 + 2 lambda2 l2`
/// stays below `C*`, for a category-2 offset.
pub fn near_offset_check(geom: &SymmetricGeometry, grid_size: usize) -> Result<NearOffsetReport> {
    require_hypothesis(geom)?;
    if geom.beta > category_threshold(&geom.params, geom.d) {
        return Err(Error::param(format!(
            "beta = {} is above d / gamma^(1/a)",
            geom.beta
        )));
    }
    if grid_size < 2 {
        return Err(Error::param("lambda2 grid needs at least 2 points"));
    }
    let c = 2.0 * geom.log2_s();
    let steps = (grid_size - 1) as f64;
    let mut points: Vec<f64> = (0..grid_size).map(|k| k as f64 / steps).collect();
    let cross = (geom.l1 - geom.l3) / (geom.l1 + geom.l2 - geom.l3);
    if (0.0..=1.0).contains(&cross) {
        points.push(cross);
    }
    let (mut min_margin, mut argmin) = (f64::INFINITY, 0.0);
    for &t in &points {
        let margin = c - bound_p4d(geom, t).min(bound_p4f(geom, t));
        if margin < min_margin {
            min_margin = margin;
            argmin = t;
        }
    }
    Ok(NearOffsetReport {
        holds: min_margin > STRICT_MARGIN,
        min_margin,
        argmin_lambda2: argmin,
        points: points.len(),
    })
}

/// `fhat(beta) = a log2(beta) / log2(1 - beta) * log2((1 - beta)^2 / (1 - 2 beta))`.
///
/// For `beta < 1/3` the two-path vertex is optimal exactly when
/// `log2(gamma / d^a) >= fhat(beta)`; `fhat` increases on `(0, 1/3)` and
/// reaches about `1.13 a` at `1/3`.
pub fn fhat(beta: f64, a: f64) -> f64 {
    let one_minus = 1.0 - beta;
    a * beta.log2() / one_minus.log2() * (2.0 * one_minus.log2() - (1.0 - 2.0 * beta).log2())
}

/// `f(beta) = log2((1-beta)^(2a)) log2(s beta^a) - log2(s (1-2beta)^a) log2(s (1-beta)^a)`.
pub fn f_beta(beta: f64, params: &PropagationParams, d: f64) -> f64 {
    let a = params.a;
    let ls = params.log2_snr(d);
    let l_beta = ls + a * beta.log2();
    let l_two = ls + a * (1.0 - 2.0 * beta).log2();
    let l_one = ls + a * (1.0 - beta).log2();
    2.0 * a * (1.0 - beta).log2() * l_beta - l_two * l_one
}

/// `n` equally spaced offsets `thr * k / n`, `k = 1..=n`, covering `(0, thr]`
/// with `thr = d / gamma^(1/a)`.
pub fn category2_beta_grid(params: &PropagationParams, d: f64, n: usize) -> Vec<f64> {
    let thr = category_threshold(params, d);
    (1..=n).map(|k| thr * k as f64 / n as f64).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FBetaReport {
    pub values: Vec<f64>,
    pub all_negative: bool,
    pub nondecreasing: bool,
    pub holds: bool,
}

/// Evaluates `f` on an increasing grid in `(0, d / gamma^(1/a)]` and checks
/// that it is negative and nondecreasing.
pub fn f_beta_monotonicity(
    params: &PropagationParams,
    d: f64,
    beta_grid: &[f64],
) -> Result<FBetaReport> {
    if !theorem_hypothesis(params, d) {
        return Err(Error::param("gamma / d^a does not exceed 3^a"));
    }
    let thr = category_threshold(params, d);
    if beta_grid.is_empty() {
        return Err(Error::param("beta grid is empty"));
    }
    for w in beta_grid.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::param("beta grid must be strictly increasing"));
        }
    }
    if beta_grid[0] <= 0.0 || beta_grid[beta_grid.len() - 1] > thr * (1.0 + 1e-12) {
        return Err(Error::param(format!("beta grid must lie in (0, {thr}]")));
    }
    let values: Vec<f64> = beta_grid.iter().map(|&b| f_beta(b, params, d)).collect();
    let all_negative = values.iter().all(|&v| v < 0.0);
    let nondecreasing = values.windows(2).all(|w| w[1] >= w[0]);
    Ok(FBetaReport {
        holds: all_negative && nondecreasing,
        values,
        all_negative,
        nondecreasing,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    /// `l1 (2 l2 - l3) / (l1 + l2 - l3)`.
    pub condition_lhs: f64,
    /// `l4`.
    pub condition_rhs: f64,
    pub holds: bool,
    /// `(0, (l1 - l3)/D, (l1 - l3)/D, l2/D)` with `D = l1 + l2 - l3`.
    pub analytic_x: PathAllocation,
    pub analytic_objective: f64,
    pub lp_objective: f64,
    /// `|analytic objective - path LP optimum|`.
    pub lp_gap: f64,
    /// `|path LP optimum - optimum with the direct path removed|`.
    pub direct_path_gap: f64,
    /// `fhat(beta)`; the condition is equivalent to `log2(s) >= fhat(beta)`.
    pub fhat: f64,
    pub log2_s: f64,
}

/// Optimality condition for the two-path vertex of the path program.
pub fn kkt_condition(geom: &SymmetricGeometry) -> Result<KktReport> {
    if !(geom.beta > 0.0 && geom.beta < 1.0 / 3.0) {
        return Err(Error::param(format!(
            "the vertex condition needs beta in (0, 1/3), got {}",
            geom.beta
        )));
    }
    let (l1, l2, l3, l4) = (geom.l1, geom.l2, geom.l3, geom.l4);
    let den = l1 + l2 - l3;
    let condition_lhs = l1 * (2.0 * l2 - l3) / den;
    let analytic_x = PathAllocation::symmetric(geom, 0.0, (l1 - l3) / den, l2 / den);
    let analytic_objective = analytic_x.objective();
    let lp = capacity_p6_paths(geom)?;
    let no_direct = capacity_p6_paths_without_direct(geom)?;
    Ok(KktReport {
        condition_lhs,
        condition_rhs: l4,
        holds: condition_lhs >= l4,
        lp_gap: (analytic_objective - lp.capacity).abs(),
        direct_path_gap: (lp.capacity - no_direct.capacity).abs(),
        analytic_x,
        analytic_objective,
        lp_objective: lp.capacity,
        fhat: fhat(geom.beta, geom.params.a),
        log2_s: geom.log2_s(),
    })
}

/// `log2(s) >= fhat(1/3)`: the vertex condition then holds for every `beta < 1/3`.
pub fn kkt_sufficient_condition(params: &PropagationParams, d: f64) -> bool {
    params.log2_snr(d) >= FHAT_ONE_THIRD_PER_A * params.a
}

/// `gamma^(1/a) / 3`: beyond this distance an equally spaced line beats
/// every placement near the endpoints.
pub fn crossover_distance(params: &PropagationParams) -> f64 {
    params.unit_snr_distance() / 3.0
}

/// True when the optimal symmetric schedule routes everything over
/// source → relay 1 → relay 2 → destination.
pub fn routing_regime(beta: f64) -> bool {
    beta > 1.0 / 3.0
}

/// Approximate capacity of the symmetric network:
/// `l2 (2 l1 - l3) / (l1 + l2 - l3)` below `beta = 1/3`, `l1` from there on.
pub fn symmetric_capacity_closed_form(geom: &SymmetricGeometry) -> Result<f64> {
    require_hypothesis(geom)?;
    if geom.beta < 1.0 / 3.0 {
        let (l1, l2, l3) = (geom.l1, geom.l2, geom.l3);
        Ok(l2 * (2.0 * l1 - l3) / (l1 + l2 - l3))
    } else {
        Ok(geom.l1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> PropagationParams {
        PropagationParams::new(1e6, 2.0).unwrap()
    }

    fn geom(beta: f64) -> SymmetricGeometry {
        SymmetricGeometry::new(beta, 100.0, &params()).unwrap()
    }

    #[test]
    fn cstar_values() {
        assert!((cstar(&params(), 100.0).unwrap() - 13.287712379549449).abs() < 1e-12);
        let p = PropagationParams::new(2e4, 2.0).unwrap();
        assert!((cstar(&p, 100.0).unwrap() - 2.0).abs() < 1e-12);
        assert!(matches!(cstar(&params(), 1000.0), Err(Error::Domain(_))));
    }

    #[test]
    fn classification() {
        let p = params();
        assert!((category_threshold(&p, 100.0) - 0.1).abs() < 1e-15);
        assert_eq!(classify_beta(0.2, &p, 100.0).unwrap().category, Category::Cat1);
        assert_eq!(classify_beta(0.05, &p, 100.0).unwrap().category, Category::Cat2);
        assert_eq!(classify_beta(0.1, &p, 100.0).unwrap().category, Category::Cat2);
        assert_eq!(classify_beta(0.5, &p, 100.0).unwrap().category, Category::Cat1);
        assert!(classify_beta(0.0, &p, 100.0).is_err());
        for b in [0.01, 0.1, 0.2, 0.5] {
            assert!(classify_beta(b, &p, 100.0).unwrap().margin.unwrap() > STRICT_MARGIN);
        }
        assert!(classify_beta(0.2, &p, 400.0).unwrap().margin.is_none());
    }

    #[test]
    fn category1_values() {
        let r = category1_margin(&geom(0.2)).unwrap();
        assert!((r.max_bound - 11.287712379549449).abs() < 1e-12);
        assert!((r.margin - 2.0).abs() < 1e-12);
        assert!((r.g[0] - 200.0).abs() < 1e-9);
        assert!(r.holds);
        let edge = category1_margin(&geom(0.1 + 1e-9)).unwrap();
        assert!(edge.margin > 0.0);
        assert!(category1_margin(&geom(0.05)).is_err());
    }

    #[test]
    fn near_offset_values() {
        let g = geom(0.05);
        assert!((g.l3 - 6.947862376664824).abs() < 1e-12);
        assert!((g.l2 - 6.791857352662278).abs() < 1e-12);
        let r = near_offset_check(&g, DEFAULT_LAMBDA_GRID).unwrap();
        assert!(r.holds);
        assert_eq!(r.points, DEFAULT_LAMBDA_GRID + 1);
        assert!(near_offset_check(&geom(0.2), 11).is_err());
    }

    #[test]
    fn fhat_at_one_third() {
        assert!((fhat(1.0 / 3.0, 1.0) - FHAT_ONE_THIRD_PER_A).abs() < 1e-12);
        assert!((fhat(1.0 / 3.0, 2.0) - 2.0 * FHAT_ONE_THIRD_PER_A).abs() < 1e-12);
        let mut prev = 0.0;
        for k in 1..333 {
            let v = fhat(k as f64 / 1000.0, 2.0);
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn f_beta_checks() {
        let p = params();
        let grid = category2_beta_grid(&p, 100.0, 1000);
        assert!(f_beta_monotonicity(&p, 100.0, &grid).unwrap().holds);
        // just above 3^a
        let d = (1e6f64 / 9.0001).sqrt();
        let thr = category_threshold(&p, d);
        assert!(f_beta(thr, &p, d) < 0.0);
        assert!(f_beta_monotonicity(&p, 400.0, &grid).is_err());
    }

    #[test]
    fn kkt_values() {
        let r = kkt_condition(&geom(0.1)).unwrap();
        assert!(r.holds);
        assert!(r.lp_gap <= 1e-8 && r.direct_path_gap <= 1e-8);
        assert!((r.analytic_objective - 10.349845192618005).abs() < 1e-9);
        assert!((r.analytic_x.x[3] - 0.5366030449309186).abs() < 1e-12);
        assert_eq!(r.holds, r.log2_s >= r.fhat);
        assert!(kkt_condition(&geom(0.4)).is_err());
        // boundary of the sufficient condition
        let d = (1e6 / (2f64).powf(2.0 * FHAT_ONE_THIRD_PER_A)).sqrt();
        assert!(kkt_sufficient_condition(&params(), d * (1.0 - 1e-9)));
        assert!(!kkt_sufficient_condition(&params(), d * (1.0 + 1e-9)));
    }

    #[test]
    fn crossover_and_regime() {
        assert!((crossover_distance(&params()) - 1000.0 / 3.0).abs() < 1e-9);
        assert!(routing_regime(0.4));
        assert!(!routing_regime(0.2));
        assert!(!routing_regime(1.0 / 3.0));
    }

    #[test]
    fn closed_form_continuity_at_one_third() {
        let below = symmetric_capacity_closed_form(&geom(1.0 / 3.0 - 1e-6)).unwrap();
        let above = symmetric_capacity_closed_form(&geom(1.0 / 3.0 + 1e-6)).unwrap();
        assert!((below - above).abs() <= 1e-5 * above);
        assert!(symmetric_capacity_closed_form(&SymmetricGeometry::new(0.2, 400.0, &params()).unwrap()).is_err());
    }
}
