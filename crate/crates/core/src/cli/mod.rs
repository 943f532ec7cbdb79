//! Command-line pipelines: scenario file in, report and columnar data out.
//!
//! Exit codes: 0 all enforced checks pass, 2 configuration error,
//! 3 solver failure (a partial report is still written), 4 failed check.

mod config;
mod output;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::balayage::{
    balayage_with_rest, equilibrium_measure, exhaust_and_sweep, inner_balayage, mass_formula_check,
    minimum_mass_check, positivity_of_mass, uniqueness_battery, BatteryOptions, ExhaustionReport,
    SweepMode,
};
use crate::energy::{dot, weight_distance};
use crate::error::{Error, Result};
use crate::kernels::{assemble_matrix, KernelMatrix, KernelSpec};
use crate::measures::{build_exhaustion, total_mass, DiscreteMeasure, ExhaustionStrategy};
use crate::oracles::{refinement_oracle, BallRefinement, BallScenario};

pub use config::{
    Epsilon, GeometryConfig, KernelConfig, OutputConfig, PointMass, RegionConfig, Resolved,
    RunConfig, ScenarioConfig, SolverConfig, SourceConfig, Tolerances,
};
use output::{write_outputs, NodeColumns, Series};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_CONVERGENCE: i32 = 3;
pub const EXIT_ASSERTION: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "balayage", version, about = "Sweeping of discrete measures under regularized Riesz kernels")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Equilibrium measure and capacity of the region.
    Equilibrium(CommonArgs),
    /// Sweep the source onto the region.
    Balayage(CommonArgs),
    /// Sweep onto each stage of an exhaustion of the region.
    Exhaust(CommonArgs),
    /// Run every property check on the scenario.
    Verify(VerifyArgs),
    /// Refinement study of a Newtonian ball scenario against closed forms.
    OracleCompare(CommonArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Solver tolerance (overrides `solver.tol`).
    #[arg(long)]
    pub tol: Option<f64>,
    /// Refinement levels (overrides `run.levels`).
    #[arg(long)]
    pub levels: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Multiply the computed sweep by this factor before checking it.
    #[arg(long)]
    pub perturb: Option<f64>,
}

/// One comparison. Checks that are not enforced had their precondition
/// unmet and do not affect the exit status.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// `"le"`: pass iff `value <= threshold`; `"ge"`: pass iff `value >= threshold`.
    pub relation: &'static str,
    pub threshold: f64,
    pub enforced: bool,
    pub pass: bool,
}

fn le(name: &str, value: f64, threshold: f64) -> Check {
    Check {
        name: name.into(),
        value,
        relation: "le",
        threshold,
        enforced: true,
        pass: value <= threshold,
    }
}

fn ge(name: &str, value: f64, threshold: f64) -> Check {
    Check {
        name: name.into(),
        value,
        relation: "ge",
        threshold,
        enforced: true,
        pass: value >= threshold,
    }
}

fn info(mut c: Check) -> Check {
    c.enforced = false;
    c
}

#[derive(Serialize)]
struct Report<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    status: &'static str,
    config: &'a ScenarioConfig,
    kernel: Option<KernelSpec>,
    node_count: usize,
    region_count: usize,
    results: Value,
    checks: Vec<Check>,
    error: Option<Value>,
}

struct Outcome {
    results: Value,
    checks: Vec<Check>,
    nodes: Option<NodeColumns>,
    series: Vec<Series>,
}

/// Parses the process arguments and runs; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(&cli),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_PASS };
            let _ = e.print();
            code
        }
    }
}

pub fn run(cli: &Cli) -> i32 {
    let (name, common, perturb) = match &cli.command {
        Command::Equilibrium(a) => ("equilibrium", a, None),
        Command::Balayage(a) => ("balayage", a, None),
        Command::Exhaust(a) => ("exhaust", a, None),
        Command::Verify(v) => ("verify", &v.common, v.perturb),
        Command::OracleCompare(a) => ("oracle-compare", a, None),
    };
    let cfg = match resolve_config(common) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    if let Some(p) = perturb {
        if !(p >= 0.0) || !p.is_finite() {
            eprintln!("error: --perturb must be a non-negative factor");
            return EXIT_CONFIG;
        }
    }
    let out_dir = PathBuf::from(cfg.output.dir.clone().unwrap_or_else(|| "balayage-out".into()));
    let scenario = if name == "oracle-compare" {
        None
    } else {
        match build_scenario(&cfg) {
            Ok(s) => Some(s),
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_CONFIG;
            }
        }
    };
    let result = match (name, &scenario) {
        ("equilibrium", Some((r, m))) => equilibrium_cmd(&cfg, r, m),
        ("balayage", Some((r, m))) => balayage_cmd(&cfg, r, m),
        ("exhaust", Some((r, m))) => exhaust_cmd(&cfg, r, m),
        ("verify", Some((r, m))) => verify_cmd(&cfg, r, m, perturb),
        _ => oracle_cmd(&cfg),
    };
    let (kernel, node_count, region_count) = match &scenario {
        Some((r, _)) => (Some(r.spec), r.nodes.len(), r.region.count()),
        None => (None, 0, 0),
    };
    let mut report = Report {
        tool: "balayage",
        version: env!("CARGO_PKG_VERSION"),
        command: name,
        status: "pass",
        config: &cfg,
        kernel,
        node_count,
        region_count,
        results: Value::Null,
        checks: Vec::new(),
        error: None,
    };
    let (code, nodes, series) = match result {
        Ok(o) => {
            let failed = o.checks.iter().any(|c| c.enforced && !c.pass);
            report.status = if failed { "fail" } else { "pass" };
            report.results = o.results;
            report.checks = o.checks;
            (if failed { EXIT_ASSERTION } else { EXIT_PASS }, o.nodes, o.series)
        }
        Err(e) => {
            let code = match &e {
                Error::Convergence { .. } | Error::Solver(_) => EXIT_CONVERGENCE,
                _ => EXIT_CONFIG,
            };
            eprintln!("error: {e}");
            if code == EXIT_CONFIG {
                return code;
            }
            report.status = "convergence_failure";
            report.error = Some(match &e {
                Error::Convergence {
                    iterations,
                    residual,
                    best,
                } => json!({
                    "message": e.to_string(),
                    "iterations": iterations,
                    "residual": residual,
                    "best_multiplier": best.multiplier,
                    "best_report": best.report,
                    "best_weights": best.weights,
                }),
                other => json!({ "message": other.to_string() }),
            });
            (code, None, Vec::new())
        }
    };
    if let Err(e) = write_outputs(&out_dir, &report, nodes.as_ref(), &series) {
        eprintln!("error: cannot write outputs to {}: {e}", out_dir.display());
        return EXIT_CONFIG;
    }
    code
}

fn resolve_config(a: &CommonArgs) -> Result<ScenarioConfig> {
    let mut cfg = ScenarioConfig::load(&a.config)?;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(t) = a.tol {
        cfg.solver.tol = t;
    }
    if let Some(l) = a.levels {
        cfg.run.levels = l;
    }
    if let Some(o) = &a.out {
        cfg.output.dir = Some(path_string(o));
    }
    cfg.validate()?;
    Ok(cfg)
}

fn path_string(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

fn build_scenario(cfg: &ScenarioConfig) -> Result<(Resolved, KernelMatrix)> {
    let r = Resolved::build(cfg)?;
    let m = assemble_matrix(&r.spec, r.nodes.clone())?;
    Ok((r, m))
}

fn node_columns(r: &Resolved, m: &KernelMatrix, swept: &DiscreteMeasure) -> NodeColumns {
    NodeColumns {
        points: r.nodes.points().map(|p| p.to_vec()).collect(),
        quad_weights: r.nodes.quad_weights().to_vec(),
        omega: r.omega.weights().to_vec(),
        swept: swept.weights().to_vec(),
        u_omega: m.apply(r.omega.weights()),
        u_swept: m.apply(swept.weights()),
        region: r.region.flags().to_vec(),
    }
}

/// Potentials against distance to the region centroid, for profile plots.
fn potential_series(r: &Resolved, u_omega: &[f64], u_swept: &[f64]) -> Series {
    let idx = r.region.indices();
    let dim = r.nodes.dim();
    let mut c = vec![0.0; dim];
    for &i in &idx {
        for (d, v) in r.nodes.point(i).iter().enumerate() {
            c[d] += v / idx.len() as f64;
        }
    }
    let mut rows: Vec<(f64, usize)> = (0..r.nodes.len())
        .map(|i| (crate::kernels::dist2(r.nodes.point(i), &c).sqrt(), i))
        .collect();
    rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Series {
        name: "series_potential.csv".into(),
        header: vec!["index".into(), "distance".into(), "U_omega".into(), "U_swept".into()],
        rows: rows
            .into_iter()
            .map(|(d, i)| vec![i as f64, d, u_omega[i], u_swept[i]])
            .collect(),
    }
}

fn exhaustion_series(rep: &ExhaustionReport) -> Series {
    Series {
        name: "series_exhaustion.csv".into(),
        header: ["stage", "size", "mass", "energy", "gauss_value", "capacity", "distance_to_final"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        rows: rep
            .stages
            .iter()
            .zip(&rep.distances_to_final)
            .enumerate()
            .map(|(k, (s, d))| {
                vec![k as f64, s.size as f64, s.mass, s.energy, s.gauss_value, s.capacity, *d]
            })
            .collect(),
    }
}

fn equilibrium_cmd(cfg: &ScenarioConfig, r: &Resolved, m: &KernelMatrix) -> Result<Outcome> {
    let tol = &cfg.tolerances;
    let eq = equilibrium_measure(m, &r.region, &cfg.solver_options())?;
    let support_gap = eq
        .kkt
        .active_set
        .iter()
        .map(|&i| (eq.potential[i] - 1.0).abs())
        .fold(0.0, f64::max);
    let checks = vec![
        le("equilibrium.kkt_stationarity", eq.kkt.stationarity_residual, eq.kkt.tolerance),
        le("equilibrium.support_potential_gap", support_gap, tol.potential_gap),
        le("equilibrium.region_potential_deficit", (1.0 - eq.potential_min_on_a).max(0.0), tol.potential_gap),
        le("equilibrium.capacity_energy_gap", eq.identity_gap(), tol.energy_rel * eq.capacity),
    ];
    let results = json!({
        "capacity": eq.capacity,
        "energy": eq.energy,
        "potential_min_on_region": eq.potential_min_on_a,
        "potential_max_on_support": eq.potential_max_on_support,
        "kkt": eq.kkt,
    });
    let nodes = node_columns(r, m, &eq.gamma);
    let series = vec![potential_series(r, &nodes.u_omega, &nodes.u_swept)];
    Ok(Outcome {
        results,
        checks,
        nodes: Some(nodes),
        series,
    })
}

fn sweep_checks(cfg: &ScenarioConfig, r: &Resolved, m: &KernelMatrix, candidate: &DiscreteMeasure, active: &[usize]) -> Vec<Check> {
    let tol = &cfg.tolerances;
    let u_c = m.apply(candidate.weights());
    let u_o = m.apply(r.omega.weights());
    let gap = active.iter().map(|&i| (u_c[i] - u_o[i]).abs()).fold(0.0, f64::max);
    let energy = dot(candidate.weights(), &u_c);
    let mutual = dot(candidate.weights(), &u_o);
    let source_energy = dot(r.omega.weights(), &u_o);
    vec![
        le("sweep.active_potential_gap", gap, tol.potential_gap),
        le("sweep.mass_excess", total_mass(candidate) - total_mass(&r.omega), tol.mass_excess),
        le("sweep.energy_identity_gap", (energy - mutual).abs(), tol.energy_rel * energy.abs()),
        le("sweep.mutual_energy_excess", mutual - source_energy, tol.energy_rel * source_energy.abs()),
    ]
}

fn balayage_cmd(cfg: &ScenarioConfig, r: &Resolved, m: &KernelMatrix) -> Result<Outcome> {
    let res = inner_balayage(m, &r.omega, &r.region, cfg.solver.mode, &cfg.solver_options())?;
    let mut checks = vec![le(
        "sweep.kkt_stationarity",
        res.kkt.stationarity_residual,
        res.kkt.tolerance,
    )];
    checks.extend(sweep_checks(cfg, r, m, &res.swept, &res.active_nodes));
    let results = json!({
        "mode": res.mode,
        "mass": res.mass,
        "source_mass": total_mass(&r.omega),
        "energy": res.energy,
        "mutual_energy_with_source": res.mutual_energy_with_source,
        "source_energy": res.source_energy,
        "gauss_value": res.gauss_value,
        "multiplier": res.multiplier,
        "cap_active": res.cap_active(),
        "active_nodes": res.active_nodes,
        "active_potential_gap": res.potential_on_a_max_gap,
        "domination_defect": res.domination_violation,
        "kkt": res.kkt,
    });
    let nodes = node_columns(r, m, &res.swept);
    let series = vec![potential_series(r, &nodes.u_omega, &nodes.u_swept)];
    Ok(Outcome {
        results,
        checks,
        nodes: Some(nodes),
        series,
    })
}

fn exhaustion_checks(tol: &Tolerances, rep: &ExhaustionReport) -> Vec<Check> {
    let scale = rep.distances_to_final.iter().copied().fold(0.0, f64::max);
    vec![
        le("exhaustion.potential_monotonicity_defect", rep.potential_monotonicity_defect, tol.monotonicity),
        le("exhaustion.equilibrium_monotonicity_defect", rep.equilibrium_monotonicity_defect, tol.monotonicity),
        le("exhaustion.distance_increase", rep.distance_monotonicity_defect, tol.rest_rel * scale),
    ]
}

fn exhaustion_results(rep: &ExhaustionReport) -> Value {
    json!({
        "stage_sizes": rep.stages.iter().map(|s| s.size).collect::<Vec<_>>(),
        "masses": rep.stages.iter().map(|s| s.mass).collect::<Vec<_>>(),
        "energies": rep.stages.iter().map(|s| s.energy).collect::<Vec<_>>(),
        "gauss_values": rep.stages.iter().map(|s| s.gauss_value).collect::<Vec<_>>(),
        "capacities": rep.stages.iter().map(|s| s.capacity).collect::<Vec<_>>(),
        "distances_to_final": rep.distances_to_final,
        "potential_monotonicity_defect": rep.potential_monotonicity_defect,
        "equilibrium_monotonicity_defect": rep.equilibrium_monotonicity_defect,
        "distance_monotonicity_defect": rep.distance_monotonicity_defect,
    })
}

fn strategy(cfg: &ScenarioConfig) -> ExhaustionStrategy {
    cfg.run.exhaustion_strategy
}

fn exhaust_cmd(cfg: &ScenarioConfig, r: &Resolved, m: &KernelMatrix) -> Result<Outcome> {
    let ex = build_exhaustion(&r.region, cfg.run.exhaustion_stages, strategy(cfg))?;
    let rep = exhaust_and_sweep(m, &r.omega, &ex, cfg.solver.mode, &cfg.solver_options())?;
    let checks = exhaustion_checks(&cfg.tolerances, &rep);
    let results = exhaustion_results(&rep);
    let series = vec![exhaustion_series(&rep)];
    let nodes = rep.final_result.as_ref().map(|f| node_columns(r, m, &f.swept));
    Ok(Outcome {
        results,
        checks,
        nodes,
        series,
    })
}

fn verify_cmd(cfg: &ScenarioConfig, r: &Resolved, m: &KernelMatrix, perturb: Option<f64>) -> Result<Outcome> {
    let tol = &cfg.tolerances;
    let opts = cfg.solver_options();
    let mode = cfg.solver.mode;
    let (omega, region) = (&r.omega, &r.region);
    let mut checks = Vec::new();

    let res = inner_balayage(m, omega, region, mode, &opts)?;
    let candidate = match perturb {
        Some(f) => res.swept.scaled(f)?,
        None => res.swept.clone(),
    };
    let norm = res.energy.max(0.0).sqrt();
    checks.push(le("sweep.kkt_stationarity", res.kkt.stationarity_residual, res.kkt.tolerance));
    checks.extend(sweep_checks(cfg, r, m, &candidate, &res.active_nodes));

    // the other variational route
    let other_mode = match mode {
        SweepMode::GaussCapped => SweepMode::Projection,
        SweepMode::Projection => SweepMode::GaussCapped,
    };
    let other = inner_balayage(m, omega, region, other_mode, &opts)?;
    let free = match mode {
        SweepMode::GaussCapped => other.mass <= total_mass(omega),
        SweepMode::Projection => !other.cap_active(),
    };
    let mode_distance = weight_distance(m, candidate.weights(), other.swept.weights());
    let c = le("modes.distance", mode_distance, tol.mode_distance_rel * norm);
    checks.push(if free { c } else { info(c) });

    // dominating class
    let probes = minimum_mass_check(m, omega, region, cfg.run.probes, cfg.seed, mode, &opts)?;
    let ptol = tol.probe_rel * probes.potential_scale;
    let worst = |f: &dyn Fn(&crate::balayage::ProbeRecord) -> f64| {
        probes.probes.iter().map(f).fold(f64::INFINITY, f64::min)
    };
    let cand_mass = total_mass(&candidate);
    let cand_norm = dot(candidate.weights(), &m.apply(candidate.weights())).max(0.0).sqrt();
    checks.push(ge("class.membership_margin", worst(&|p| p.class_margin), -ptol));
    checks.push(ge("class.active_potential_margin", worst(&|p| p.active_potential_margin), -ptol));
    checks.push(ge("class.norm_margin", worst(&|p| p.norm) - cand_norm, -tol.probe_rel * norm.max(1.0)));
    checks.push(ge("class.mass_margin", worst(&|p| p.mass) - cand_mass, -tol.mass_excess));

    // symmetry relation
    let bo = BatteryOptions {
        size: cfg.run.battery_size,
        seed: cfg.seed.wrapping_add(1),
        rel_tol: tol.symmetry_rel,
    };
    let bat = uniqueness_battery(m, &candidate, omega, region, mode, &opts, &bo)?;
    checks.push(le("symmetry.max_residual", bat.max_residual, bat.threshold));
    let control = uniqueness_battery(m, &candidate.scaled(1.1)?, omega, region, mode, &opts, &bo)?;
    checks.push(ge(
        "symmetry.perturbed_control",
        control.max_residual,
        tol.perturbed_factor * bat.threshold,
    ));

    // rest
    let inner = match &cfg.run.rest_region {
        Some(rc) => r.mask(rc)?,
        None => build_exhaustion(region, 2, ExhaustionStrategy::Radial)?.stages()[0].clone(),
    };
    let rest = balayage_with_rest(m, omega, region, &inner, mode, &opts)?;
    let rest_norm = rest.direct.energy.max(0.0).sqrt();
    checks.push(le("rest.distance", rest.strong_distance, tol.rest_rel * rest_norm));
    checks.push(le("rest.monotonicity_defect", rest.monotonicity_gap, tol.monotonicity));

    // mass formula
    let mf = mass_formula_check(m, omega, region, mode, &opts)?;
    let c = le("mass_formula.gap", mf.gap, tol.mass_formula_rel * mf.lhs);
    checks.push(if mf.equilibrium_settled(tol.equilibrium_settled) { c } else { info(c) });

    // exhaustion
    let ex = build_exhaustion(region, cfg.run.exhaustion_stages, strategy(cfg))?;
    let exh = exhaust_and_sweep(m, omega, &ex, mode, &opts)?;
    checks.extend(exhaustion_checks(tol, &exh));

    // positivity of mass on a pair with U^mu <= U^nu by construction
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(2));
    let mut bumped = res.swept.weights().to_vec();
    let n = bumped.len();
    for i in sample(&mut rng, n, n.div_ceil(4)) {
        bumped[i] += (total_mass(omega) / n as f64) * (1.0 - rng.gen::<f64>());
    }
    let nu = DiscreteMeasure::new(m.nodes().clone(), bumped)?;
    match positivity_of_mass(m, &res.swept, &nu, 0.0)? {
        Some(diff) => checks.push(ge("positivity_of_mass.mass_difference", diff, -res.domination_violation)),
        None => checks.push(ge("positivity_of_mass.hypothesis", 0.0, 1.0)),
    }

    let results = json!({
        "sweep": {
            "mode": mode,
            "mass": res.mass,
            "candidate_mass": cand_mass,
            "perturbation": perturb,
            "energy": res.energy,
            "gauss_value": res.gauss_value,
            "multiplier": res.multiplier,
            "active_nodes": res.active_nodes.len(),
            "domination_defect": res.domination_violation,
            "kkt": res.kkt,
        },
        "other_mode": { "mode": other_mode, "mass": other.mass, "distance": mode_distance, "compared": free },
        "probes": probes,
        "symmetry": bat,
        "symmetry_control": control,
        "rest": {
            "inner_count": inner.count(),
            "distance": rest.strong_distance,
            "monotonicity_defect": rest.monotonicity_gap,
        },
        "mass_formula": mf,
        "exhaustion": exhaustion_results(&exh),
    });
    let nodes = node_columns(r, m, &candidate);
    let series = vec![potential_series(r, &nodes.u_omega, &nodes.u_swept), exhaustion_series(&exh)];
    Ok(Outcome {
        results,
        checks,
        nodes: Some(nodes),
        series,
    })
}

fn oracle_cmd(cfg: &ScenarioConfig) -> Result<Outcome> {
    let (center, radius, count) = match &cfg.geometry {
        GeometryConfig::BallShell {
            center,
            radius,
            count,
        } => (*center, *radius, *count),
        _ => return Err(Error::Configuration("oracle-compare needs a ball_shell geometry".into())),
    };
    let source = match &cfg.source {
        SourceConfig::PointMasses { masses } if masses.len() == 1 => match &masses[0].point {
            Some(p) if p.len() == 3 => [p[0], p[1], p[2]],
            _ => return Err(Error::Configuration("oracle-compare needs the source given as a 3-d point".into())),
        },
        _ => return Err(Error::Configuration("oracle-compare needs exactly one point mass".into())),
    };
    let kernel = KernelSpec::new(cfg.kernel.n, cfg.kernel.alpha, 1.0)?;
    let scenario = BallScenario::new(radius, center, source, kernel)?;
    let study = BallRefinement::new(scenario, count)?;
    let tol = &cfg.tolerances;
    let levels = refinement_oracle(&study, cfg.run.levels, cfg.solver.mode, &cfg.solver_options())?;
    let exact_mass = crate::oracles::ball_swept_mass(&scenario)?;
    let last = levels.last().expect("at least two levels");
    let gaps: Vec<f64> = levels.iter().filter_map(|l| l.mass_gap).collect();
    let decreasing = gaps.windows(2).all(|w| w[1] < w[0]);
    let checks = vec![
        ge("oracle.mass_gap_strictly_decreasing", if decreasing { 1.0 } else { 0.0 }, 1.0),
        le("oracle.finest_mass_rel_error", last.mass_gap.unwrap_or(f64::NAN) / exact_mass, tol.oracle_mass_rel),
        le("oracle.finest_capacity_rel_error", last.capacity_gap.unwrap_or(f64::NAN) / radius, tol.oracle_capacity_rel),
        le("oracle.finest_density_l1", last.density_l1_error.unwrap_or(f64::NAN), tol.oracle_density_l1),
    ];
    let series = Series {
        name: "series_refinement.csv".into(),
        header: ["level", "nodes", "epsilon", "swept_mass", "mass_gap", "capacity", "density_l1", "domination_defect"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        rows: levels
            .iter()
            .map(|l| {
                vec![
                    l.level as f64,
                    l.nodes as f64,
                    l.epsilon,
                    l.swept_mass,
                    l.mass_gap.unwrap_or(f64::NAN),
                    l.capacity,
                    l.density_l1_error.unwrap_or(f64::NAN),
                    l.domination_defect,
                ]
            })
            .collect(),
    };
    let results = json!({
        "exact_mass": exact_mass,
        "exact_capacity": radius,
        "note": "each level uses a unit point mass and the automatic regularization",
        "levels": levels,
    });
    Ok(Outcome {
        results,
        checks,
        nodes: None,
        series: vec![series],
    })
}
