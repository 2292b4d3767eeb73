//! The five experiment commands.
//!
//! Every command turns a validated [`ExperimentConfig`] into a
//! [`ResultTable`]. Sweep cells are evaluated in parallel but emitted in sweep
//! order, and all randomness comes from per-trial streams keyed by the seed,
//! so output is byte-identical for any thread count.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, PI};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use selroute::optimize::{optimal_phi_nearest_neighbor, optimize_joint, PhiGrid, Tolerances};
use selroute::sim::{
    self, candidate_count_ratio, candidate_disk_radius, estimate_density_of_progress,
    simulate_route, RouteOptions,
};
use selroute::stats::EstimateWithCI;
use selroute::{
    expected_density_numeric, expected_density_of_progress, joint_residual, optimal_rm_given_phi,
    rm_from_phi_closed_form, rm_upper_bound, stationarity_residual_rm, success_probability,
    NetworkConfig, Point2, ProtocolSpec, SelectionRegion, SimSettings,
};

use crate::config::{Axis, ExperimentConfig, ProtocolChoice};
use crate::error::{CliError, Result};
use crate::table::{Cell, ResultTable};

/// Transmit probabilities of the standard sweeps.
pub const P_GRID: [f64; 10] = [0.01, 0.02, 0.03, 0.04, 0.05, 0.07, 0.1, 0.15, 0.2, 0.3];

/// Fewest trials accepted by `compare`.
pub const MIN_COMPARE_TRIALS: u64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Surface,
    Optimize,
    Compare,
    Validate,
    Route,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Surface => "surface",
            Command::Optimize => "optimize",
            Command::Compare => "compare",
            Command::Validate => "validate",
            Command::Route => "route",
        }
    }
}

/// Result of one command.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub table: ResultTable,
    /// Command-specific facts recorded in the sidecar.
    pub summary: Value,
    /// False when a validation check failed.
    pub passed: bool,
}

impl RunOutput {
    fn ok(table: ResultTable) -> Self {
        Self {
            table,
            summary: Value::Null,
            passed: true,
        }
    }
}

pub fn run(command: Command, cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    match command {
        Command::Surface => surface(cfg).map(RunOutput::ok),
        Command::Optimize => optimize(cfg).map(RunOutput::ok),
        Command::Compare => compare(cfg).map(RunOutput::ok),
        Command::Validate => validate(cfg),
        Command::Route => route(cfg),
    }
}

/// Fills in the defaults a command would use, so the sidecar records them.
pub fn resolve(command: Command, cfg: &ExperimentConfig) -> ExperimentConfig {
    let mut out = cfg.clone();
    let has = |name: &str| cfg.sweep.iter().any(|a| a.name == name);
    match command {
        Command::Surface => {
            if !has("phi") {
                out.sweep.push(Axis::range("phi", 0.05, 6.2, 40));
            }
            if !has("r_m") {
                out.sweep.push(Axis::range("r_m", 0.0, 2.0, 40));
            }
        }
        Command::Optimize | Command::Compare => {
            if !has("p") {
                out.sweep.insert(0, Axis::explicit("p", P_GRID.to_vec()));
            }
            if command == Command::Compare && out.protocols.is_empty() {
                out.protocols = ProtocolChoice::standard_set();
            }
            if command == Command::Optimize && out.optimize.phi_grid.is_none() {
                out.optimize.phi_grid = Some(PhiGrid::default().points);
            }
        }
        Command::Route => {
            if out.protocols.is_empty() {
                out.protocols = vec![ProtocolChoice::SelectionRegion {
                    phi: None,
                    r_m: None,
                }];
            }
        }
        Command::Validate => {}
    }
    out
}

/// Cartesian product of the sweep axes, first axis outermost.
struct Sweep {
    names: Vec<String>,
    cells: Vec<Vec<f64>>,
}

impl Sweep {
    fn new(cfg: &ExperimentConfig, allowed: &[&str]) -> Result<Self> {
        let mut names = Vec::new();
        let mut cells = vec![Vec::new()];
        for (i, axis) in cfg.sweep.iter().enumerate() {
            let field = format!("sweep[{i}]");
            if !allowed.contains(&axis.name.as_str()) {
                return Err(CliError::config(
                    format!("{field}.name"),
                    format!(
                        "`{}` cannot be swept here; expected one of {allowed:?}",
                        axis.name
                    ),
                ));
            }
            if names.contains(&axis.name) {
                return Err(CliError::config(
                    format!("{field}.name"),
                    format!("`{}` is swept twice", axis.name),
                ));
            }
            let values = axis.values(&field)?;
            cells = cells
                .into_iter()
                .flat_map(|cell| {
                    values.iter().map(move |&v| {
                        let mut c = cell.clone();
                        c.push(v);
                        c
                    })
                })
                .collect();
            names.push(axis.name.clone());
        }
        Ok(Self { names, cells })
    }

    fn get(&self, cell: &[f64], name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| cell[i])
    }

    /// Network of one cell; invalid cells become a per-row error message.
    fn network(&self, base: &NetworkConfig, cell: &[f64]) -> Result<NetworkConfig, String> {
        let mut net = *base;
        if let Some(p) = self.get(cell, "p") {
            net = net.with_p(p).map_err(|e| e.to_string())?;
        }
        if let Some(lambda) = self.get(cell, "lambda") {
            net = net.with_lambda(lambda).map_err(|e| e.to_string())?;
        }
        Ok(net)
    }
}

fn status(err: Option<String>) -> Cell {
    match err {
        None => Cell::text("ok"),
        Some(e) => Cell::text(format!("error: {e}")),
    }
}

fn surface(cfg: &ExperimentConfig) -> Result<ResultTable> {
    let cfg = resolve(Command::Surface, cfg);
    let base = cfg.model.network()?;
    let sweep = Sweep::new(&cfg, &["p", "lambda", "phi", "r_m"])?;
    let rows: Vec<Vec<Cell>> = sweep
        .cells
        .par_iter()
        .map(|cell| {
            let phi = sweep.get(cell, "phi").expect("phi axis");
            let r_m = sweep.get(cell, "r_m").expect("r_m axis");
            let (net, value) = match sweep.network(&base, cell) {
                Ok(net) => {
                    let value = SelectionRegion::new(phi, r_m)
                        .map(|region| expected_density_of_progress(&net, &region))
                        .map_err(|e| e.to_string());
                    (net, value)
                }
                Err(e) => (base, Err(e)),
            };
            let (lambda, p) = (
                sweep.get(cell, "lambda").unwrap_or(net.lambda),
                sweep.get(cell, "p").unwrap_or(net.p),
            );
            vec![
                p.into(),
                lambda.into(),
                phi.into(),
                r_m.into(),
                value.clone().ok().into(),
                status(value.err()),
            ]
        })
        .collect();
    let mut table = ResultTable::new(["p", "lambda", "phi", "r_m", "e_density", "status"]);
    rows.into_iter().for_each(|r| table.push(r));
    Ok(table)
}

struct OptimizeRow {
    phi_star: f64,
    rm_star: f64,
    upper_bound: Option<f64>,
    rm_closed_form: Option<f64>,
    e_star: f64,
    residual_rm: f64,
    residual_joint: f64,
    boundary: bool,
}

fn optimize_cell(
    net: &NetworkConfig,
    fixed_phi: Option<f64>,
    grid: &PhiGrid,
) -> selroute::Result<OptimizeRow> {
    let tol = Tolerances::default();
    let (phi, rm_star, e_star, boundary) = match fixed_phi {
        Some(phi) => {
            let o = optimal_rm_given_phi(net, phi, tol.residual_rm)?;
            (phi, o.rm_star, o.e_star, o.boundary_flag)
        }
        None => {
            let o = optimize_joint(net, grid, &tol)?;
            (o.phi_star, o.rm_star, o.e_star, o.boundary_flag)
        }
    };
    Ok(OptimizeRow {
        phi_star: phi,
        rm_star,
        upper_bound: rm_upper_bound(net, phi).upper_bound,
        rm_closed_form: rm_from_phi_closed_form(net, phi),
        e_star,
        residual_rm: stationarity_residual_rm(net, phi, rm_star),
        residual_joint: joint_residual(net, phi, rm_star)?,
        boundary,
    })
}

fn optimize(cfg: &ExperimentConfig) -> Result<ResultTable> {
    let cfg = resolve(Command::Optimize, cfg);
    let base = cfg.model.network()?;
    let sweep = Sweep::new(&cfg, &["p", "lambda"])?;
    let grid = PhiGrid {
        points: cfg.optimize.phi_grid.expect("resolved"),
    };
    let rows: Vec<Vec<Cell>> = sweep
        .cells
        .par_iter()
        .map(|cell| {
            let res = sweep.network(&base, cell).and_then(|net| {
                optimize_cell(&net, cfg.optimize.fixed_phi, &grid).map_err(|e| e.to_string())
            });
            let p = sweep.get(cell, "p").unwrap_or(base.p);
            let lambda = sweep.get(cell, "lambda").unwrap_or(base.lambda);
            match res {
                Ok(r) => vec![
                    p.into(),
                    lambda.into(),
                    r.phi_star.into(),
                    r.rm_star.into(),
                    r.upper_bound.into(),
                    r.rm_closed_form.into(),
                    r.e_star.into(),
                    r.residual_rm.into(),
                    r.residual_joint.into(),
                    r.boundary.into(),
                    status(None),
                ],
                Err(e) => {
                    let mut row = vec![p.into(), lambda.into()];
                    row.extend(std::iter::repeat_n(Cell::Empty, 8));
                    row.push(status(Some(e)));
                    row
                }
            }
        })
        .collect();
    let mut table = ResultTable::new([
        "p",
        "lambda",
        "phi_star",
        "rm_star",
        "rm_upper_bound",
        "rm_closed_form",
        "e_star",
        "residual_rm",
        "residual_joint",
        "boundary",
        "status",
    ]);
    rows.into_iter().for_each(|r| table.push(r));
    Ok(table)
}

/// Concrete relay rule for a network, optimising whatever the choice leaves open.
pub fn resolve_protocol(
    choice: &ProtocolChoice,
    net: &NetworkConfig,
) -> selroute::Result<ProtocolSpec> {
    Ok(match *choice {
        ProtocolChoice::SelectionRegion { phi: None, .. } => {
            let o = optimize_joint(net, &PhiGrid::default(), &Tolerances::default())?;
            ProtocolSpec::selection_region(o.region())
        }
        ProtocolChoice::SelectionRegion {
            phi: Some(phi),
            r_m: None,
        } => {
            let o = optimal_rm_given_phi(net, phi, Tolerances::default().residual_rm)?;
            ProtocolSpec::SelectionRegion {
                phi,
                r_m: o.rm_star,
            }
        }
        ProtocolChoice::SelectionRegion {
            phi: Some(phi),
            r_m: Some(r_m),
        } => ProtocolSpec::SelectionRegion { phi, r_m },
        ProtocolChoice::NearestNeighbor { phi: None } => ProtocolSpec::NearestNeighbor {
            phi: optimal_phi_nearest_neighbor(net)?.0,
        },
        ProtocolChoice::NearestNeighbor { phi: Some(phi) } => ProtocolSpec::NearestNeighbor { phi },
        ProtocolChoice::BestProgress { radius: None } => ProtocolSpec::best_progress(net),
        ProtocolChoice::BestProgress {
            radius: Some(radius),
        } => ProtocolSpec::BestProgress { radius },
    })
}

fn compare(cfg: &ExperimentConfig) -> Result<ResultTable> {
    let cfg = resolve(Command::Compare, cfg);
    if cfg.trials < MIN_COMPARE_TRIALS {
        return Err(CliError::config(
            "trials",
            format!("compare needs at least {MIN_COMPARE_TRIALS} trials"),
        ));
    }
    let base = cfg.model.network()?;
    let sweep = Sweep::new(&cfg, &["p", "lambda"])?;
    let settings = SimSettings::new(cfg.seed).with_mode(cfg.mode);
    let mut table = ResultTable::new([
        "p",
        "lambda",
        "protocol",
        "phi",
        "r_m",
        "estimate",
        "std_error",
        "ci_lo",
        "ci_hi",
        "analytic",
        "trials",
        "status",
    ]);
    for cell in &sweep.cells {
        let p = sweep.get(cell, "p").unwrap_or(base.p);
        let lambda = sweep.get(cell, "lambda").unwrap_or(base.lambda);
        for choice in &cfg.protocols {
            let res = sweep.network(&base, cell).and_then(|net| {
                let spec = resolve_protocol(choice, &net).map_err(|e| e.to_string())?;
                let est = estimate_density_of_progress(&net, &spec, cfg.trials, &settings)
                    .map_err(|e| e.to_string())?;
                let analytic = spec
                    .region()
                    .map(|r| expected_density_of_progress(&net, &r));
                Ok((spec, est, analytic))
            });
            let mut row: Vec<Cell> = vec![p.into(), lambda.into(), choice.label().into()];
            match res {
                Ok((spec, est, analytic)) => {
                    let region = spec.region();
                    row.extend([
                        region.map(|r| r.phi).into(),
                        region.map(|r| r.r_m).into(),
                        est.mean.into(),
                        est.std_error.into(),
                        est.ci95.0.into(),
                        est.ci95.1.into(),
                        analytic.into(),
                        (est.trials as i64).into(),
                        status(None),
                    ]);
                }
                Err(e) => {
                    row.extend(std::iter::repeat_n(Cell::Empty, 8));
                    row.push(status(Some(e)));
                }
            }
            table.push(row);
        }
    }
    Ok(table)
}

/// One row of the validation report: passes when `deviation ≤ tolerance`.
struct Check {
    name: String,
    measured: f64,
    expected: f64,
    deviation: f64,
    tolerance: f64,
}

fn max_rel(pairs: impl IntoIterator<Item = (f64, f64)>) -> f64 {
    pairs
        .into_iter()
        .map(|(a, b)| ((a - b) / b).abs())
        .fold(0.0, f64::max)
}

fn validation_checks(cfg: &ExperimentConfig) -> selroute::Result<Vec<Check>> {
    let trials = cfg.trials;
    let settings = SimSettings::new(cfg.seed);
    let baseline = |p: f64| NetworkConfig::baseline(p);
    let mut checks = Vec::new();

    // closed form against quadrature
    let mut worst = (0.0, 0.0, 0.0);
    for p in [0.01, 0.05, 0.2] {
        let net = baseline(p)?;
        for phi in [PI / 6.0, FRAC_PI_3, FRAC_PI_2, PI] {
            for r_m in [0.0, 0.3, 1.0] {
                let region = SelectionRegion::new(phi, r_m)?;
                let closed = expected_density_of_progress(&net, &region);
                let numeric = expected_density_numeric(&net, &region)?;
                let rel = ((closed - numeric) / numeric).abs();
                if rel >= worst.0 {
                    worst = (rel, closed, numeric);
                }
            }
        }
    }
    checks.push(Check {
        name: "closed_form_vs_quadrature".into(),
        measured: worst.1,
        expected: worst.2,
        deviation: worst.0,
        tolerance: 1e-8,
    });

    // physical SIR simulation against the closed-form success probability
    let net = baseline(0.05)?;
    let radius = sim::default_trunc_radius(&net);
    let lengths = [0.2, 0.5, 1.0];
    // one shared field per trial decides every link; the doubled-radius copy
    // of the longest link (where the far-field tail matters most) isolates
    // the truncation effect
    let mut links: Vec<(f64, f64)> = lengths.iter().map(|&d| (d, radius)).collect();
    links.push((1.0, 2.0 * radius));
    let ests = sim::estimate_success_probabilities(&net, &links, trials, &settings)?;
    for (&d, est) in lengths.iter().zip(&ests) {
        let want = success_probability(&net, d)?;
        checks.push(Check {
            name: format!("physical_success_d={d}"),
            measured: est.mean,
            expected: want,
            deviation: est.z_score(want).abs(),
            tolerance: 3.0,
        });
    }
    let (near, far) = (&ests[2], &ests[3]);
    checks.push(Check {
        name: "truncation_doubling_shift".into(),
        measured: far.mean,
        expected: near.mean,
        deviation: (far.mean - near.mean).abs() / near.std_error,
        tolerance: 1.0,
    });

    // Monte Carlo progress against the closed form
    for (p, phi, r_m) in [
        (0.05, FRAC_PI_3, 0.3),
        (0.01, FRAC_PI_2, 0.0),
        (0.2, PI, 0.3),
    ] {
        let net = baseline(p)?;
        let region = SelectionRegion::new(phi, r_m)?;
        let want = expected_density_of_progress(&net, &region);
        let est = estimate_density_of_progress(
            &net,
            &ProtocolSpec::selection_region(region),
            trials,
            &settings,
        )?;
        checks.push(Check {
            name: format!("semi_analytic_progress_p={p}_phi={phi:.4}_rm={r_m}"),
            measured: est.mean,
            expected: want,
            deviation: est.z_score(want).abs(),
            tolerance: 3.0,
        });
    }

    // scaling in the node density
    let unit = optimize_joint(
        &baseline(0.05)?,
        &PhiGrid::default(),
        &Tolerances::default(),
    )?;
    let mut e_pairs = Vec::new();
    let mut r_pairs = Vec::new();
    for lambda in [0.5, 2.0, 4.0] {
        let o = optimize_joint(
            &baseline(0.05)?.with_lambda(lambda)?,
            &PhiGrid::default(),
            &Tolerances::default(),
        )?;
        e_pairs.push((o.e_star / lambda.sqrt(), unit.e_star));
        r_pairs.push((o.rm_star * lambda.sqrt(), unit.rm_star));
    }
    checks.push(Check {
        name: "scaling_e_star_sqrt_lambda".into(),
        measured: e_pairs.last().expect("three densities").0,
        expected: unit.e_star,
        deviation: max_rel(e_pairs),
        tolerance: 1e-9,
    });
    checks.push(Check {
        name: "scaling_rm_star_inv_sqrt_lambda".into(),
        measured: r_pairs.last().expect("three densities").0,
        expected: unit.rm_star,
        deviation: max_rel(r_pairs),
        tolerance: 1e-9,
    });

    // the analytic bound dominates the optimal reference distance
    let mut excess = f64::NEG_INFINITY;
    for p in P_GRID {
        let net = baseline(p)?;
        let o = optimal_rm_given_phi(&net, FRAC_PI_3, Tolerances::default().residual_rm)?;
        if let Some(b) = rm_upper_bound(&net, FRAC_PI_3).upper_bound {
            excess = excess.max(o.rm_star - b);
        }
    }
    checks.push(Check {
        name: "upper_bound_dominance".into(),
        measured: excess,
        expected: 0.0,
        deviation: excess,
        tolerance: 0.0,
    });

    // selection-region candidates are a φ/2π fraction of all neighbours
    let region = SelectionRegion::nearest_neighbor(FRAC_PI_2)?;
    let ratio = candidate_count_ratio(
        &net,
        &region,
        candidate_disk_radius(&net, 100.0),
        trials,
        &settings,
    )?;
    checks.push(Check {
        name: "candidate_ratio_phi=pi/2".into(),
        measured: ratio.mean,
        expected: 0.25,
        deviation: ratio.z_score(0.25).abs(),
        tolerance: 3.0,
    });
    Ok(checks)
}

fn validate(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let checks = validation_checks(cfg)?;
    let mut table = ResultTable::new([
        "check",
        "measured",
        "expected",
        "deviation",
        "tolerance",
        "pass",
        "status",
    ]);
    let mut passed = true;
    for c in checks {
        let tolerance = cfg.validate.tolerance.unwrap_or(c.tolerance);
        let ok = c.deviation <= tolerance;
        passed &= ok;
        table.push(vec![
            c.name.into(),
            c.measured.into(),
            c.expected.into(),
            c.deviation.into(),
            tolerance.into(),
            ok.into(),
            Cell::text(if ok { "ok" } else { "fail" }),
        ]);
    }
    Ok(RunOutput {
        summary: json!({ "passed": passed }),
        table,
        passed,
    })
}

fn route(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let cfg = resolve(Command::Route, cfg);
    let net = cfg.model.network()?;
    let choice = cfg.protocols.first().expect("resolved");
    let spec = resolve_protocol(choice, &net)?;
    let [sx, sy] = cfg.route.source;
    let [dx, dy] = cfg.route.dest;
    let settings = SimSettings::new(cfg.seed).with_mode(cfg.mode);
    let trace = simulate_route(
        &net,
        &spec,
        &settings,
        Point2::new(sx, sy),
        Point2::new(dx, dy),
        &RouteOptions::new(cfg.route.max_hops),
    )?;
    let mut table = ResultTable::new(["hop", "x", "y", "progress", "success", "deviation"]);
    for (i, h) in trace.hops.iter().enumerate() {
        table.push(vec![
            (i as i64 + 1).into(),
            h.position.x.into(),
            h.position.y.into(),
            h.progress.into(),
            h.success.into(),
            h.deviation.into(),
        ]);
    }
    let end = trace.final_position();
    let summary = json!({
        "protocol": spec,
        "terminated": trace.terminated,
        "hops": trace.hops.len(),
        "final_position": [end.x, end.y],
    });
    Ok(RunOutput {
        table,
        summary,
        passed: true,
    })
}

/// Reads the estimate of one `compare` row back out of its table.
pub fn estimate_from_row(table: &ResultTable, row: usize) -> Option<EstimateWithCI> {
    let get = |name: &str| {
        table
            .column_index(name)
            .and_then(|i| table.rows()[row][i].as_f64())
    };
    let trials = get("trials")? as u64;
    Some(EstimateWithCI {
        mean: get("estimate")?,
        std_error: get("std_error")?,
        trials,
        ci95: (get("ci_lo")?, get("ci_hi")?),
    })
}
