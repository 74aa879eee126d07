use proptest::prelude::*;

use one21::analysis::{
    category1_margin, category_threshold, classify_beta, kkt_condition, near_offset_check, Category,
    STRICT_MARGIN,
};
use one21::capacity::{
    approx_capacity_cutset, approx_capacity_p1, capacity_p4, capacity_p6_paths, dual_d1,
    p1_program,
};
use one21::experiments::{
    beta_sweep, default_beta_grid, format_g12, monte_carlo, ExperimentConfig,
};
use one21::lp::{solve_lp, SolverOptions};
use one21::model::{
    gain_matrix, link_capacity, make_theorem_topology, project_topology, symmetrize,
    CapacityMode, Point, ProjectedPair, PropagationParams, SymmetricGeometry, Topology,
};

fn log2_3() -> f64 {
    3f64.log2()
}

/// `(a, d, log2 s)` with `gamma = s d^a`.
fn hypothesis_params() -> impl Strategy<Value = (PropagationParams, f64)> {
    (1.5f64..4.0, 10.0f64..1000.0, 0.01f64..20.0).prop_map(|(a, d, extra)| {
        let log2_s = a * log2_3() + extra;
        let gamma = (log2_s + a * d.log2()).exp2();
        (PropagationParams::new(gamma, a).unwrap(), d)
    })
}

fn any_params() -> impl Strategy<Value = PropagationParams> {
    (1.5f64..4.0, 3.0f64..9.0).prop_map(|(a, lg)| PropagationParams::new(10f64.powf(lg), a).unwrap())
}

fn relays(n: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((0.0f64..1.0, -0.5f64..0.5), n)
}

fn topology(d: f64, rel: &[(f64, f64)]) -> Topology {
    Topology::on_axis(d, rel.iter().map(|&(x, y)| Point::new(x * d, y * d)).collect()).unwrap()
}

fn p1(t: &Topology, p: &PropagationParams) -> f64 {
    approx_capacity_p1(&gain_matrix(t, p).unwrap()).unwrap().capacity
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scale_invariance(p in any_params(), d in 10.0f64..500.0, rel in relays(1..=3), k in 0.1f64..10.0) {
        let t = topology(d, &rel);
        let scaled_params = PropagationParams::new(p.gamma * k.powf(p.a), p.a).unwrap();
        let a = gain_matrix(&t, &p).unwrap();
        let b = gain_matrix(&t.scaled(k), &scaled_params).unwrap();
        for (i, j) in a.links() {
            prop_assert!((a.capacity(i, j) - b.capacity(i, j)).abs() <= 1e-12 * a.capacity(i, j).abs().max(1.0));
        }
        let (ca, cb) = (approx_capacity_p1(&a).unwrap().capacity, approx_capacity_p1(&b).unwrap().capacity);
        prop_assert!((ca - cb).abs() <= 1e-9);
    }

    #[test]
    fn projection_shrinks_distances_and_helps(p in any_params(), d in 10.0f64..500.0, rel in relays(1..=3)) {
        let t = topology(d, &rel);
        let proj = project_topology(&t);
        for i in 0..t.n_nodes() {
            for j in 0..t.n_nodes() {
                prop_assert!(proj.node(i).distance(&proj.node(j)) <= t.node(i).distance(&t.node(j)) + 1e-9);
            }
        }
        prop_assert!(p1(&proj, &p) >= p1(&t, &p) - 1e-9);
    }

    #[test]
    fn symmetrization_never_hurts(p in any_params(), d in 10.0f64..500.0, u in 0.0f64..1.0, v in 0.0f64..1.0) {
        let (lo, hi) = if u <= v { (u, v) } else { (v, u) };
        let pair = ProjectedPair::new(lo, 1.0 - hi, d).unwrap();
        prop_assume!(pair.beta1.max(pair.beta2) > 1e-6);
        let asym = p1(&pair.topology(), &p);
        let sym = p1(&symmetrize(&pair, &p).unwrap().topology(), &p);
        prop_assert!(sym >= asym - 1e-9, "{sym} < {asym}");
    }

    #[test]
    fn link_capacity_monotone(p in any_params(), d in 1.0f64..1e4, f in 1.001f64..10.0, exact in any::<bool>()) {
        let p = if exact { p.with_mode(CapacityMode::Exact) } else { p };
        prop_assert!(link_capacity(d * f, &p).unwrap() < link_capacity(d, &p).unwrap());
        let louder = PropagationParams { gamma: p.gamma * f, ..p };
        prop_assert!(link_capacity(d, &louder).unwrap() > link_capacity(d, &p).unwrap());
    }

    #[test]
    fn solver_is_deterministic(p in any_params(), d in 10.0f64..500.0, rel in relays(2..=3)) {
        let lp = p1_program(&gain_matrix(&topology(d, &rel), &p).unwrap()).unwrap();
        let a = solve_lp(&lp, &SolverOptions::default()).unwrap();
        let b = solve_lp(&lp, &SolverOptions::default()).unwrap();
        prop_assert_eq!(a.x.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.x.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        prop_assert_eq!(a.objective_value.to_bits(), b.objective_value.to_bits());
        prop_assert!(a.iterations <= 10_000);
    }

    #[test]
    fn path_program_duality(p in any_params(), d in 10.0f64..500.0, beta in 0.001f64..0.499) {
        let g = SymmetricGeometry::new(beta, d, &p).unwrap();
        let primal = capacity_p6_paths(&g).unwrap().capacity;
        let dual = dual_d1(&g).unwrap().objective();
        prop_assert!((primal - dual).abs() <= 1e-8 * primal.abs().max(1.0));
    }

    #[test]
    fn flow_and_cut_forms_agree(p in any_params(), d in 10.0f64..500.0, rel in relays(0..=3)) {
        let gm = gain_matrix(&topology(d, &rel), &p).unwrap();
        let a = approx_capacity_p1(&gm).unwrap().capacity;
        let b = approx_capacity_cutset(&gm).unwrap().capacity;
        prop_assert!((a - b).abs() <= 1e-6 * a.abs().max(1.0), "{a} vs {b}");
    }

    #[test]
    fn schedules_and_flows_feasible(p in any_params(), d in 10.0f64..500.0, rel in relays(1..=3)) {
        let gm = gain_matrix(&topology(d, &rel), &p).unwrap();
        let r = approx_capacity_p1(&gm).unwrap();
        let flows = r.flows.as_ref().unwrap();
        prop_assert!(r.schedule.max_violation() <= 1e-9);
        prop_assert!(flows.conservation_residual() <= 1e-9);
        prop_assert!(flows.capacity_violation(&r.schedule, &gm) <= 1e-9);
        prop_assert!((flows.inflow(gm.destination()) - r.capacity).abs() <= 1e-9);
    }

    #[test]
    fn capacity_monotone_in_links(p in any_params(), d in 10.0f64..500.0, rel in relays(2..=2), pick in 0usize..7) {
        let gm = gain_matrix(&topology(d, &rel), &p).unwrap();
        let base = approx_capacity_p1(&gm).unwrap().capacity;
        let (i, j) = gm.links()[pick];
        let mut bumped = gm.clone();
        bumped.set_capacity(i, j, gm.capacity(i, j) + 0.5);
        prop_assert!(approx_capacity_p1(&bumped).unwrap().capacity >= base - 1e-9);
    }

    #[test]
    fn exact_mode_within_two_bits(p in any_params(), d in 10.0f64..500.0, rel in relays(2..=2)) {
        let t = topology(d, &rel);
        let gm = gain_matrix(&t, &p).unwrap();
        prop_assume!(gm.all_valid());
        let approx = approx_capacity_p1(&gm).unwrap().capacity;
        let exact = p1(&t, &p.with_mode(CapacityMode::Exact));
        prop_assert!(exact >= approx - 1e-9);
        prop_assert!(exact - approx <= 2.0 + 1e-9);
    }

    #[test]
    fn symmetric_formulations_agree((p, d) in hypothesis_params(), beta in 0.001f64..0.499) {
        let g = SymmetricGeometry::new(beta, d, &p).unwrap();
        let c1 = p1(&g.topology(), &p);
        let c4 = capacity_p4(&g).unwrap().capacity;
        let c6 = capacity_p6_paths(&g).unwrap().capacity;
        let cd = dual_d1(&g).unwrap().objective();
        prop_assert!((c1 - c4).abs() <= 1e-8, "P1 {c1} P4 {c4}");
        prop_assert!((c4 - c6).abs() <= 1e-8, "P4 {c4} P6 {c6}");
        prop_assert!((c6 - cd).abs() <= 1e-8, "P6 {c6} D1 {cd}");
    }

    #[test]
    fn categories_partition_and_margins_positive((p, d) in hypothesis_params(), beta in 0.0001f64..0.5) {
        let r = classify_beta(beta, &p, d).unwrap();
        let thr = category_threshold(&p, d);
        prop_assert_eq!(r.category == Category::Cat1, beta > thr);
        let g = SymmetricGeometry::new(beta, d, &p).unwrap();
        match r.category {
            Category::Cat1 => prop_assert!(category1_margin(&g).unwrap().margin > STRICT_MARGIN),
            Category::Cat2 => prop_assert!(near_offset_check(&g, 1001).unwrap().holds),
        }
    }

    #[test]
    fn vertex_condition_below_one_third((p, d) in hypothesis_params(), beta in 0.001f64..0.333) {
        let r = kkt_condition(&SymmetricGeometry::new(beta, d, &p).unwrap()).unwrap();
        prop_assert!(r.holds);
        prop_assert!(r.lp_gap <= 1e-8 && r.direct_path_gap <= 1e-8);
    }

    #[test]
    fn endpoint_placement_is_best((p, d) in hypothesis_params(), beta in 1e-5f64..0.499, rel in relays(2..=2)) {
        let corner = p1(&make_theorem_topology(d, 1e-6).unwrap(), &p);
        let sym = p1(&SymmetricGeometry::new(beta.max(1e-6), d, &p).unwrap().topology(), &p);
        prop_assert!(sym <= corner + 1e-9, "beta {beta}: {sym} > {corner}");
        let cstar = 2.0 * p.log2_snr(d);
        prop_assert!(p1(&topology(d, &rel), &p) <= cstar + 1e-9);
    }

    #[test]
    fn g12_round_trips(x in prop::num::f64::NORMAL) {
        let back: f64 = format_g12(x).parse().unwrap();
        prop_assert!((back - x).abs() <= 1e-11 * x.abs());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn monte_carlo_reproducible(seed in any::<u64>()) {
        let p = PropagationParams::new(1e7, 2.0).unwrap();
        let mut cfg = ExperimentConfig::new(p, 600.0 * 2f64.sqrt());
        cfg.seed = seed;
        cfg.samples = 16;
        let (rows_a, sum_a) = monte_carlo(&cfg).unwrap();
        let (rows_b, sum_b) = monte_carlo(&cfg).unwrap();
        prop_assert_eq!(&rows_a, &rows_b);
        prop_assert_eq!(sum_a, sum_b);
        let reference = p1(&make_theorem_topology(cfg.d, cfg.eps_rel).unwrap(), &cfg.params);
        prop_assert!(rows_a.iter().all(|r| r.capacity_bits <= reference + 1e-6));
    }

    #[test]
    fn sweep_rows_sorted((p, d) in hypothesis_params(), n in 2usize..20) {
        let rows = beta_sweep(&ExperimentConfig::new(p, d), &default_beta_grid(n)).unwrap();
        prop_assert!(rows.windows(2).all(|w| w[1].beta > w[0].beta));
    }
}
