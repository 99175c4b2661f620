//! One experiment end to end: data, continuation, measures, verification, files.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Context};
use linfid_core::calculus::lp_norm_normalised;
use linfid_core::forward::{solve_dirichlet, synth_data, ForwardStatus, Manufactured};
use linfid_core::functional::{energy_inf, energy_p, ProblemData};
use linfid_core::measures::{
    concentration_fraction, density_mu_p, density_nu_p, el_residual, support_distance,
    test_functions, total_variation, DiscreteMeasure, TestKind,
};
use linfid_core::operators::{
    eval_f, eval_k, fully_nonlinear_eps, laplacian, linear_divergence, linear_nondivergence,
    obs_flux, obs_identity, OperatorF, OperatorK,
};
use linfid_core::optimizer::{p_continuation, SolveReport};
use linfid_core::verify::{verify_bounds, BoundReport};
use linfid_core::{Grid, Interval, Kappa, MeasurementSet, ScalarField};
use serde::Serialize;

use crate::config::{Config, DataSpec, MeasurementKind, ObservationSpec, SourceSpec};

pub const RESULTS_HEADER: [&str; 14] = [
    "p",
    "iterations",
    "energy_p",
    "energy_inf",
    "sup_error_on_K",
    "lp_error_on_K",
    "sup_F",
    "TV_nu",
    "TV_mu",
    "concentration_fraction",
    "el_residual",
    "bound_rhs_p",
    "bound_pass",
    "c2_dist_prev_rung",
];

pub const CONCENTRATION_DELTA: f64 = 0.05;
pub const BOUND_SLACK: f64 = 0.05;
pub const TEST_FUNCTIONS: usize = 10;
const FORWARD_TOL: f64 = 1e-10;
const FORWARD_MAX_ITER: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Setup,
    Forward,
    Synthesis,
    Optimizer,
    Measures,
    Verify,
}

#[derive(Debug, Clone, Serialize)]
pub struct Failure {
    pub stage: Stage,
    pub message: String,
}

/// One `results.csv` row.
#[derive(Debug, Clone, Serialize)]
pub struct Row {
    pub p: f64,
    pub iterations: usize,
    pub converged: bool,
    pub energy_p: f64,
    pub energy_inf: f64,
    pub sup_error_on_k: f64,
    pub lp_error_on_k: f64,
    pub sup_f: f64,
    pub tv_nu: f64,
    pub tv_mu: f64,
    pub concentration_fraction: f64,
    pub el_residual: f64,
    pub grad_tol: f64,
    pub bound_rhs_p: Option<f64>,
    pub bound_pass: Option<bool>,
    pub c2_dist_prev_rung: Option<f64>,
    /// Largest distance from the thresholded error measure to the near-argmax set.
    pub support_distance: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ForwardInfo {
    pub iterations: usize,
    pub residual: f64,
    pub status: ForwardStatus,
}

#[derive(Debug, Clone, Serialize)]
pub struct SnapInfo {
    pub max_distance: f64,
    pub distances: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TestFunctionRecord {
    pub seed: u64,
    pub kind: TestKind,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub version: &'static str,
    pub config: Config,
    pub measurement_nodes: usize,
    pub measurement_snap_distance: f64,
    pub forward: Option<ForwardInfo>,
    pub external_snap: Option<SnapInfo>,
    /// What the errors on the measurement set are measured against.
    pub error_reference: &'static str,
    pub rows: Vec<Row>,
    pub solve: Option<SolveReport>,
    pub bounds: Option<BoundReport>,
    pub test_functions: Vec<TestFunctionRecord>,
    pub final_differs_from_initial: Option<f64>,
    pub failures: Vec<Failure>,
    pub wall_time_s: f64,
}

/// Everything a run produced, also written to its directory.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub dir: PathBuf,
    pub report: Report,
    /// Minimisers in ladder order.
    pub trajectory: Vec<ScalarField>,
}

impl Outcome {
    pub fn ok(&self) -> bool {
        self.report.failures.is_empty()
    }
}

pub fn build_source(spec: &SourceSpec, n: usize) -> linfid_core::Result<Arc<dyn OperatorF>> {
    Ok(match spec {
        SourceSpec::Laplacian => Arc::new(laplacian(n)?),
        SourceSpec::LinearDivergence { a, b, c } => Arc::new(linear_divergence(a, b, *c)?),
        SourceSpec::LinearNondivergence { a, b, c } => Arc::new(linear_nondivergence(a, b, *c)?),
        SourceSpec::FullyNonlinearEps { eps } => Arc::new(fully_nonlinear_eps(*eps)?),
    })
}

pub fn build_observation(spec: &ObservationSpec) -> linfid_core::Result<Arc<dyn OperatorK>> {
    Ok(match spec {
        ObservationSpec::ObsIdentity => Arc::new(obs_identity()),
        ObservationSpec::ObsFlux { b } => Arc::new(obs_flux(b)?),
    })
}

fn build_measurement(cfg: &Config, grid: &Grid) -> linfid_core::Result<MeasurementSet> {
    let spec = &cfg.measurement.spec;
    match cfg.measurement.kind {
        MeasurementKind::Points => MeasurementSet::points(grid, spec),
        MeasurementKind::Line => MeasurementSet::segment(grid, &spec[0], &spec[1]),
        MeasurementKind::Subdomain => {
            let bounds: Vec<Interval> = spec.iter().map(|g| Interval::new(g[0], g[1])).collect();
            MeasurementSet::region(grid, &bounds)
        }
    }
}

/// Reads `x[,y],value` rows and snaps each location to its nearest node.
pub fn read_external(
    path: &Path,
    grid: &Grid,
) -> anyhow::Result<(MeasurementSet, Vec<f64>, SnapInfo)> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let n = grid.dim();
    let mut nodes = Vec::new();
    let mut values = Vec::new();
    let mut distances = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec?;
        if rec.len() != n + 1 {
            bail!(
                "row {}: expected {} columns, found {}",
                line + 1,
                n + 1,
                rec.len()
            );
        }
        let nums: Vec<f64> = rec
            .iter()
            .map(|t| t.parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect::<Option<_>>()
            .with_context(|| format!("row {}: non-numeric entry", line + 1))?;
        let x = &nums[..n];
        for (a, iv) in grid.extents().iter().enumerate() {
            if x[a] < iv.lo || x[a] > iv.hi {
                bail!("row {}: location {x:?} lies outside the domain", line + 1);
            }
        }
        let (idx, d) = grid.snap(x);
        if nodes.contains(&idx) {
            bail!(
                "row {}: location {x:?} snaps to an already measured node",
                line + 1
            );
        }
        nodes.push(idx);
        values.push(nums[n]);
        distances.push(d);
    }
    let weights = vec![1.0; nodes.len()];
    let ks = MeasurementSet::new(grid, nodes, weights, Kappa::Points)?;
    let max_distance = distances.iter().cloned().fold(0.0, f64::max);
    Ok((
        ks,
        values,
        SnapInfo {
            max_distance,
            distances,
        },
    ))
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn fmt(v: f64) -> String {
    format!("{v:.12e}")
}

/// Runs the configured experiment and writes its run directory.
pub fn run_experiment(cfg: &Config) -> anyhow::Result<Outcome> {
    let started = Instant::now();
    let mut failures = Vec::new();
    let grid = Arc::new(Grid::new(&cfg.extents, &cfg.resolution).context("building the grid")?);
    let op_f = build_source(&cfg.source, cfg.n).context("building F")?;
    let op_k = build_observation(&cfg.observation).context("building K")?;

    let mut forward = None;
    let mut external_snap = None;
    let (ks, observations, boundary, exact) = match &cfg.data {
        DataSpec::Manufactured { u0, seed } => {
            let m = Manufactured::from_name(u0).context("manufactured solution")?;
            let f = m.analytic_source(&grid, op_f.as_ref());
            let g = m.sample(&grid);
            let sol = solve_dirichlet(op_f.as_ref(), &f, &g, FORWARD_TOL, FORWARD_MAX_ITER)
                .context("forward solve")?;
            forward = Some(ForwardInfo {
                iterations: sol.iterations,
                residual: sol.residual(),
                status: sol.status,
            });
            if !sol.converged() {
                failures.push(Failure {
                    stage: Stage::Forward,
                    message: format!(
                        "Newton stopped with {:?} at residual {:e}",
                        sol.status,
                        sol.residual()
                    ),
                });
            }
            let ks = build_measurement(cfg, &grid).context("measurement set")?;
            let obs = synth_data(&sol.u, op_k.as_ref(), &ks, cfg.gamma, *seed)
                .context("synthesising data")?;
            (ks, obs, g, Some(sol.u))
        }
        DataSpec::External { path, boundary, .. } => {
            let (ks, obs, snap) = read_external(path, &grid)?;
            external_snap = Some(snap);
            let g = Manufactured::from_name(boundary)
                .context("boundary field")?
                .sample(&grid);
            (ks, obs, g, None)
        }
    };
    let measurement_nodes = ks.len();
    let measurement_snap_distance = ks.snap_distance();
    let data = ProblemData::new(op_f, op_k, ks, boundary, observations)
        .context("assembling the problem")?;
    let params = cfg.params();

    let mut report = Report {
        version: env!("CARGO_PKG_VERSION"),
        config: cfg.clone(),
        measurement_nodes,
        measurement_snap_distance,
        forward,
        external_snap,
        error_reference: if exact.is_some() {
            "exact_observations"
        } else {
            "measured_observations"
        },
        rows: Vec::new(),
        solve: None,
        bounds: None,
        test_functions: Vec::new(),
        final_differs_from_initial: None,
        failures: Vec::new(),
        wall_time_s: 0.0,
    };

    let tests = test_functions(&grid, TEST_FUNCTIONS, cfg.data.seed());
    report.test_functions = tests
        .iter()
        .map(|t| TestFunctionRecord {
            seed: t.seed,
            kind: t.kind,
        })
        .collect();

    let mut trajectory = Vec::new();
    let mut measures: Vec<(DiscreteMeasure, DiscreteMeasure)> = Vec::new();
    if failures.is_empty() {
        match p_continuation(&data, &params, &cfg.tol_schedule, cfg.max_iter) {
            Ok(cont) => {
                if let Some(p) = cont.report.aborted_at {
                    let rec = cont.report.rungs.last().expect("aborted rung recorded");
                    failures.push(Failure {
                        stage: Stage::Optimizer,
                        message: format!(
                            "rung p = {p} stopped with {:?} at gradient {:e} (tol {:e})",
                            rec.status, rec.grad_norm, rec.tol
                        ),
                    });
                }
                if let Some(last) = cont.trajectory.last() {
                    report.final_differs_from_initial = Some(last.max_abs_diff(&cont.initial));
                }
                trajectory = cont.trajectory;
                report.solve = Some(cont.report);
            }
            Err(e) => failures.push(Failure {
                stage: Stage::Optimizer,
                message: e.to_string(),
            }),
        }
    }

    let reference: Vec<f64> = match &exact {
        Some(u0) => eval_k(data.op_k(), u0, data.measurement())?,
        None => data.observations().to_vec(),
    };
    if let (Some(u0), false) = (&exact, trajectory.is_empty()) {
        let rungs: Vec<(f64, ScalarField)> = params
            .ladder
            .iter()
            .cloned()
            .zip(trajectory.iter().cloned())
            .collect();
        match verify_bounds(&rungs, u0, &params, &data, BOUND_SLACK) {
            Ok(b) => {
                if !b.all_pass() {
                    failures.push(Failure {
                        stage: Stage::Verify,
                        message: "a bound or minimality check failed".into(),
                    });
                }
                report.bounds = Some(b);
            }
            Err(e) => failures.push(Failure {
                stage: Stage::Verify,
                message: e.to_string(),
            }),
        }
    }

    if let Some(solve) = &report.solve {
        for (k, (rec, u)) in solve.rungs.iter().zip(&trajectory).enumerate() {
            let p = rec.p;
            let row = (|| -> linfid_core::Result<(Row, DiscreteMeasure, DiscreteMeasure)> {
                let kp = eval_k(data.op_k(), u, data.measurement())?;
                let diff: Vec<f64> = kp.iter().zip(&reference).map(|(a, b)| a - b).collect();
                let misfit: Vec<f64> = kp
                    .iter()
                    .zip(data.observations())
                    .map(|(a, b)| (a - b).abs())
                    .collect();
                let nu = density_nu_p(u, &data, p)?;
                let mu = density_mu_p(u, &data, p)?;
                let check = report.bounds.as_ref().and_then(|b| b.rungs.get(k));
                let row = Row {
                    p,
                    iterations: rec.iterations,
                    converged: rec.converged(),
                    energy_p: energy_p(u, &params, &data, p)?,
                    energy_inf: energy_inf(u, &params, &data)?,
                    sup_error_on_k: sup(&diff),
                    lp_error_on_k: lp_norm_normalised(&diff, data.measurement().weights(), p)?,
                    sup_f: sup(eval_f(data.op_f(), u)?.values()),
                    tv_nu: total_variation(&nu),
                    tv_mu: total_variation(&mu),
                    concentration_fraction: concentration_fraction(
                        &nu,
                        &misfit,
                        CONCENTRATION_DELTA,
                    )?,
                    el_residual: el_residual(u, &mu, &nu, &params, &data, &tests)?,
                    grad_tol: rec.tol,
                    bound_rhs_p: check.map(|c| c.rhs),
                    bound_pass: check.map(|c| c.pass),
                    c2_dist_prev_rung: rec.c2_dist_prev,
                    support_distance: support_distance(
                        &grid,
                        &nu,
                        &misfit,
                        CONCENTRATION_DELTA,
                        CONCENTRATION_DELTA,
                    )?,
                };
                Ok((row, nu, mu))
            })();
            match row {
                Ok((row, nu, mu)) => {
                    report.rows.push(row);
                    measures.push((nu, mu));
                }
                Err(e) => {
                    failures.push(Failure {
                        stage: Stage::Measures,
                        message: format!("p = {p}: {e}"),
                    });
                    break;
                }
            }
        }
    }

    report.failures = failures;
    report.wall_time_s = started.elapsed().as_secs_f64();
    let dir = cfg.output_dir.clone();
    write_run(
        &dir,
        cfg,
        &report,
        &grid,
        &data,
        exact.as_ref(),
        &trajectory,
        &measures,
    )?;
    Ok(Outcome {
        dir,
        report,
        trajectory,
    })
}

fn node_columns(grid: &Grid, i: usize) -> Vec<String> {
    let x = grid.coords(i);
    (0..grid.dim()).map(|a| fmt(x[a])).collect()
}

fn coord_header(grid: &Grid) -> Vec<&'static str> {
    ["x", "y"][..grid.dim()].to_vec()
}

fn write_field(path: &Path, grid: &Grid, values: &[f64]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = coord_header(grid);
    header.push("value");
    w.write_record(&header)?;
    for (i, v) in values.iter().enumerate() {
        let mut rec = node_columns(grid, i);
        rec.push(fmt(*v));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn write_measure(path: &Path, grid: &Grid, m: &DiscreteMeasure) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = coord_header(grid);
    header.extend(["weight", "density"]);
    w.write_record(&header)?;
    for ((&i, wt), d) in m.nodes.iter().zip(&m.weights).zip(&m.density) {
        let mut rec = node_columns(grid, i);
        rec.push(fmt(*wt));
        rec.push(fmt(*d));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_results(path: &Path, rows: &[Row]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(RESULTS_HEADER)?;
    for r in rows {
        let opt = |v: Option<f64>| v.map(fmt).unwrap_or_else(|| "NA".into());
        w.write_record([
            format!("{}", r.p),
            r.iterations.to_string(),
            fmt(r.energy_p),
            fmt(r.energy_inf),
            fmt(r.sup_error_on_k),
            fmt(r.lp_error_on_k),
            fmt(r.sup_f),
            fmt(r.tv_nu),
            fmt(r.tv_mu),
            fmt(r.concentration_fraction),
            fmt(r.el_residual),
            opt(r.bound_rhs_p),
            r.bound_pass
                .map(|b| b.to_string())
                .unwrap_or_else(|| "NA".into()),
            opt(r.c2_dist_prev_rung),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn write_run(
    dir: &Path,
    cfg: &Config,
    report: &Report,
    grid: &Grid,
    data: &ProblemData,
    exact: Option<&ScalarField>,
    trajectory: &[ScalarField],
    measures: &[(DiscreteMeasure, DiscreteMeasure)],
) -> anyhow::Result<()> {
    let fields = dir.join("fields");
    fs::create_dir_all(&fields).with_context(|| format!("creating {}", fields.display()))?;
    fs::write(dir.join("effective.cfg"), cfg.to_ini())?;
    write_results(&dir.join("results.csv"), &report.rows)?;
    fs::write(
        dir.join("report.json"),
        serde_json::to_string_pretty(report)? + "\n",
    )?;

    if let Some(u0) = exact {
        write_field(&fields.join("u0.csv"), grid, u0.values())?;
    }
    let mut obs = csv::Writer::from_path(fields.join("observations.csv"))?;
    let mut header = coord_header(grid);
    header.extend(["weight", "value"]);
    obs.write_record(&header)?;
    for ((&i, w), v) in data
        .measurement()
        .nodes()
        .iter()
        .zip(data.measurement().weights())
        .zip(data.observations())
    {
        let mut rec = node_columns(grid, i);
        rec.push(fmt(*w));
        rec.push(fmt(*v));
        obs.write_record(&rec)?;
    }
    obs.flush()?;
    for ((u, row), (nu, mu)) in trajectory.iter().zip(&report.rows).zip(measures) {
        write_field(&fields.join(format!("u_p{}.csv", row.p)), grid, u.values())?;
        write_measure(&fields.join(format!("nu_p{}.csv", row.p)), grid, nu)?;
        write_measure(&fields.join(format!("mu_p{}.csv", row.p)), grid, mu)?;
    }
    Ok(())
}
