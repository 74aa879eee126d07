use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use one21::analysis::{
    crossover_distance, cstar, symmetric_capacity_closed_form, theorem_hypothesis,
};
use one21::capacity::{approx_capacity_cutset, approx_capacity_p1, cutset_program, p1_program};
use one21::experiments::{
    beta_sweep, default_beta_grid, distance_sweep_compare, linear_grid, monte_carlo,
    summarize_beta_sweep, summarize_distance_sweep, write_outputs, ExperimentConfig,
    DEFAULT_EPS_REL,
};
use one21::suites::{run_suite, Suite, SuiteConfig};
use one21::{
    gain_matrix, make_theorem_topology, CapacityMode, CapacityResult, Error, Point,
    PropagationParams, SymmetricGeometry, Topology,
};

/// Approximate capacity and relay placement for full-duplex 1-2-1
/// directional relay networks.
///
/// gamma is dimensionless, distances share one length unit, and all
/// capacities are reported in bits per channel use. ONE21_THREADS caps the
/// worker count of sweeps and Monte Carlo runs (0 = automatic).
#[derive(Parser, Debug)]
#[command(name = "one21", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Capacity, schedule and flows of one topology, as JSON.
    Capacity(CapacityArgs),
    /// Symmetric network capacity over a grid of relay offsets.
    SweepBeta(SweepBetaArgs),
    /// Random relay placements against the endpoint placement.
    MonteCarlo(MonteCarloArgs),
    /// Endpoint placement against the equally spaced line over distances.
    CompareLine(CompareLineArgs),
    /// Best two-relay capacity and the placement approaching it, as JSON.
    Optimal(OptimalArgs),
    /// Run a verification suite and print a pass/fail table.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Approx,
    Exact,
}

impl From<ModeArg> for CapacityMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Approx => CapacityMode::Approx,
            ModeArg::Exact => CapacityMode::Exact,
        }
    }
}

#[derive(Args, Debug)]
struct ModelArgs {
    /// SNR scale gamma (dimensionless) [default depends on the command]
    #[arg(long)]
    gamma: Option<f64>,
    /// Path-loss exponent a (> 1)
    #[arg(long, default_value_t = 2.0)]
    alpha: f64,
    /// Source-destination distance [default depends on the command]
    #[arg(long)]
    dist: Option<f64>,
    /// Link capacity: approx = log2(snr), exact = log2(1 + snr)
    #[arg(long, value_enum, default_value_t = ModeArg::Approx)]
    mode: ModeArg,
    /// Relative offset of the relays in the endpoint placement
    #[arg(long, default_value_t = DEFAULT_EPS_REL)]
    eps_rel: f64,
}

impl ModelArgs {
    fn params(&self, default_gamma: f64) -> one21::Result<PropagationParams> {
        Ok(PropagationParams::new(self.gamma.unwrap_or(default_gamma), self.alpha)?
            .with_mode(self.mode.into()))
    }

    fn dist(&self, default: f64) -> one21::Result<f64> {
        let d = self.dist.unwrap_or(default);
        if d.is_finite() && d > 0.0 {
            Ok(d)
        } else {
            Err(Error::Parameter(format!("--dist must be finite and > 0, got {d}")))
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormulationArg {
    Flow,
    Cutset,
}

#[derive(Args, Debug)]
struct CapacityArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Relay position x,y (repeatable; source at 0,0, destination at dist,0)
    #[arg(long = "relay", value_parser = parse_point)]
    relays: Vec<Point>,
    #[arg(long, value_enum, default_value_t = FormulationArg::Flow)]
    formulation: FormulationArg,
    /// Include the linear program as text in the output
    #[arg(long)]
    dump_lp: bool,
}

#[derive(Args, Debug)]
struct SweepBetaArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Number of offsets k / (2 (grid + 1)), k = 1..=grid
    #[arg(long, default_value_t = 99)]
    grid: usize,
    /// Output prefix for <prefix>.csv and <prefix>.json
    #[arg(long, default_value = "beta_sweep")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct MonteCarloArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 20)]
    bins: usize,
    #[arg(long, default_value = "monte_carlo")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct CompareLineArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 50.0)]
    d_min: f64,
    #[arg(long, default_value_t = 600.0)]
    d_max: f64,
    /// Number of distances from d-min to d-max
    #[arg(long, default_value_t = 23)]
    grid: usize,
    #[arg(long, default_value = "compare_line")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct OptimalArgs {
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// duality, lemma1, lemma2, lemma3, category1, kkt, theorem or all
    #[arg(long)]
    suite: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Symmetric instances per check
    #[arg(long, default_value_t = 50)]
    instances: usize,
    /// Random topologies per check
    #[arg(long, default_value_t = 200)]
    random_instances: usize,
    /// Offsets per beta grid
    #[arg(long, default_value_t = 100)]
    grid: usize,
}

fn parse_point(s: &str) -> std::result::Result<Point, String> {
    let (x, y) = s.split_once(',').ok_or("expected x,y")?;
    let parse = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("{v:?}: {e}"));
    let p = Point::new(parse(x)?, parse(y)?);
    if p.x.is_finite() && p.y.is_finite() {
        Ok(p)
    } else {
        Err("coordinates must be finite".into())
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

#[derive(Serialize)]
struct CapacityOutput<'a> {
    params: PropagationParams,
    topology: &'a Topology,
    capacity_bits: f64,
    result: &'a CapacityResult,
    invalid_links: Vec<(usize, usize)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lp: Option<String>,
}

fn cmd_capacity(args: &CapacityArgs) -> Result<bool> {
    let params = args.model.params(1e6)?;
    let d = args.model.dist(100.0)?;
    let topology = Topology::on_axis(d, args.relays.clone())?;
    let gm = gain_matrix(&topology, &params)?;
    let (result, lp) = match args.formulation {
        FormulationArg::Flow => (approx_capacity_p1(&gm)?, args.dump_lp.then(|| p1_program(&gm)).transpose()?),
        FormulationArg::Cutset => (
            approx_capacity_cutset(&gm)?,
            args.dump_lp.then(|| cutset_program(&gm)).transpose()?,
        ),
    };
    print_json(&CapacityOutput {
        params,
        topology: &topology,
        capacity_bits: result.capacity,
        result: &result,
        invalid_links: gm.invalid_links(),
        lp: lp.map(|lp| lp.to_text()),
    })?;
    Ok(true)
}

fn experiment_config(model: &ModelArgs, default_gamma: f64, default_d: f64) -> Result<ExperimentConfig> {
    let params = model.params(default_gamma)?;
    let mut cfg = ExperimentConfig::new(params, model.dist(default_d)?);
    cfg.eps_rel = model.eps_rel;
    Ok(cfg)
}

fn report_files(csv: &std::path::Path, json: &std::path::Path) {
    eprintln!("wrote {} and {}", csv.display(), json.display());
}

fn cmd_sweep_beta(args: &SweepBetaArgs) -> Result<bool> {
    let cfg = experiment_config(&args.model, 1e6, 200.0 * 2f64.sqrt())?;
    if args.grid == 0 {
        return Err(Error::Parameter("--grid must be >= 1".into()).into());
    }
    let rows = beta_sweep(&cfg, &default_beta_grid(args.grid))?;
    let summary = summarize_beta_sweep(&cfg, &rows);
    let (csv, json) = write_outputs(&rows, &cfg, &summary, &args.out)?;
    print_json(&summary)?;
    report_files(&csv, &json);
    Ok(true)
}

fn cmd_monte_carlo(args: &MonteCarloArgs) -> Result<bool> {
    let mut cfg = experiment_config(&args.model, 1e7, 600.0 * 2f64.sqrt())?;
    cfg.seed = args.seed;
    cfg.samples = args.samples;
    cfg.histogram_bins = args.bins;
    let (rows, summary) = monte_carlo(&cfg)?;
    let (csv, json) = write_outputs(&rows, &cfg, &summary, &args.out)?;
    print_json(&summary)?;
    report_files(&csv, &json);
    Ok(true)
}

fn cmd_compare_line(args: &CompareLineArgs) -> Result<bool> {
    let cfg = experiment_config(&args.model, 1e6, args.d_min)?;
    if !(args.d_min > 0.0 && args.d_max >= args.d_min && args.grid >= 1) {
        return Err(Error::Parameter("need 0 < --d-min <= --d-max and --grid >= 1".into()).into());
    }
    let rows = distance_sweep_compare(&cfg, &linear_grid(args.d_min, args.d_max, args.grid))?;
    let summary = summarize_distance_sweep(&cfg, &rows);
    let (csv, json) = write_outputs(&rows, &cfg, &summary, &args.out)?;
    print_json(&summary)?;
    report_files(&csv, &json);
    Ok(true)
}

#[derive(Serialize)]
struct OptimalOutput {
    params: PropagationParams,
    d: f64,
    cstar_bits: f64,
    hypothesis_holds: bool,
    eps_rel: f64,
    relays: Vec<Point>,
    eps_topology_capacity_bits: f64,
    closed_form_bits: Option<f64>,
    crossover_distance: f64,
}

fn cmd_optimal(args: &OptimalArgs) -> Result<bool> {
    let params = args.model.params(1e6)?;
    let d = args.model.dist(100.0)?;
    let topology = make_theorem_topology(d, args.model.eps_rel)?;
    let capacity = approx_capacity_p1(&gain_matrix(&topology, &params)?)?.capacity;
    let hypothesis = theorem_hypothesis(&params, d);
    let closed = if hypothesis && params.mode == CapacityMode::Approx {
        Some(symmetric_capacity_closed_form(&SymmetricGeometry::new(args.model.eps_rel, d, &params)?)?)
    } else {
        None
    };
    print_json(&OptimalOutput {
        params,
        d,
        cstar_bits: cstar(&params, d)?,
        hypothesis_holds: hypothesis,
        eps_rel: args.model.eps_rel,
        relays: topology.relays.clone(),
        eps_topology_capacity_bits: capacity,
        closed_form_bits: closed,
        crossover_distance: crossover_distance(&params),
    })?;
    Ok(true)
}

fn cmd_verify(args: &VerifyArgs) -> Result<bool> {
    let suites: Vec<Suite> = if args.suite == "all" {
        Suite::ALL.to_vec()
    } else {
        vec![args.suite.parse::<Suite>()?]
    };
    let params = args.model.params(1e6)?;
    let mut cfg = SuiteConfig::new(params, args.model.dist(100.0)?, args.seed);
    cfg.instances = args.instances;
    cfg.random_instances = args.random_instances;
    cfg.beta_points = args.grid;
    cfg.eps_rel = args.model.eps_rel;
    if cfg.instances == 0 || cfg.random_instances == 0 || cfg.beta_points == 0 {
        bail!(Error::Parameter("instance counts and --grid must be >= 1".into()));
    }
    let mut all_passed = true;
    for suite in suites {
        let report = run_suite(suite, &cfg).with_context(|| format!("suite {suite}"))?;
        print!("{}", report.to_table());
        all_passed &= report.passed();
    }
    Ok(all_passed)
}

fn is_usage_error(err: &anyhow::Error) -> bool {
    err.chain().any(|cause| {
        matches!(
            cause.downcast_ref::<Error>(),
            Some(Error::Parameter(_) | Error::Ordering { .. } | Error::Dimension { .. })
        )
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Capacity(a) => cmd_capacity(a),
        Command::SweepBeta(a) => cmd_sweep_beta(a),
        Command::MonteCarlo(a) => cmd_monte_carlo(a),
        Command::CompareLine(a) => cmd_compare_line(a),
        Command::Optimal(a) => cmd_optimal(a),
        Command::Verify(a) => cmd_verify(a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(if is_usage_error(&err) { 2 } else { 1 })
        }
    }
}
