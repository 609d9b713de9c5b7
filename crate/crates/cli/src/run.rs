//! Executes a validated scenario and writes its artifacts.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use eptraj::group::dist_g;
use eptraj::homogeneous::sphere_distance;
use eptraj::integrate::integrate;
use eptraj::manipulator::{
    solve_manipulator_ocp, ManipulatorConfig, ManipulatorSolution, ManipulatorSpec,
};
use eptraj::nalgebra::Vector3;
use eptraj::shooting::shoot_bvp;
use eptraj::{AdvectedParameter, BoundaryTarget, Error, InertiaMetric, ReducedState, Trajectory};
use serde::Serialize;

use crate::scenario::{parse, OutputSection, Scenario, SystemKind};
use crate::validate::{plan, Finding, Model, ObstacleRef, Plan, Task};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(crate::scenario::ParseFailure),
    #[error("invalid scenario:\n{}", .0.iter().map(|f| format!("  {f}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<Finding>),
    #[error("{context}: {source}")]
    Solver { context: String, source: Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Solver {
                source: Error::NoConvergence { .. } | Error::StepUnstable { .. },
                ..
            } => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub output_dir: PathBuf,
    /// Reserved; the pipeline is deterministic and draws no random numbers.
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub converged: bool,
    pub files: Vec<PathBuf>,
    pub message: String,
}

/// Fixed float format: 17 significant digits in scientific notation.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_csv(path: &Path, header: &[String], rows: &[Vec<f64>]) -> Result<(), CliError> {
    let io_err = |e: std::io::Error| CliError::Write {
        path: path.to_owned(),
        source: e,
    };
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let csv_err = |e: csv::Error| io_err(std::io::Error::other(e));
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(row.iter().map(|v| fmt_f64(*v)))
            .map_err(csv_err)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| io_err(std::io::Error::other(e.to_string())))?;
    fs::write(path, bytes).map_err(io_err)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("summary serializes");
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::Write {
        path: path.to_owned(),
        source: e,
    })
}

fn strided(n: usize, stride: usize) -> impl Iterator<Item = usize> {
    (0..n).filter(move |k| k % stride == 0 || *k + 1 == n)
}

fn names(prefix: &str, count: usize) -> Vec<String> {
    (1..=count).map(|i| format!("{prefix}_{i}")).collect()
}

#[derive(Serialize)]
struct Clearance {
    minimum: f64,
    required: f64,
    satisfied: bool,
}

#[derive(Serialize)]
struct SingleSummary {
    system: &'static str,
    mode: &'static str,
    converged: bool,
    iterations: Option<usize>,
    residual: Option<f64>,
    xi0: Option<[f64; 3]>,
    steps: usize,
    step: f64,
    t_start: f64,
    t_end: f64,
    max_energy_drift: Option<f64>,
    max_casimir_drift: Option<[f64; 2]>,
    max_vertical_defect: Option<f64>,
    max_orthonormality_defect: Option<f64>,
    clearance: Option<Clearance>,
    error: Option<String>,
    wall_time_s: f64,
}

struct Paths {
    trajectory: PathBuf,
    diagnostics: PathBuf,
    summary: PathBuf,
}

fn paths(dir: &Path, out: &OutputSection) -> Result<Paths, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Write {
        path: dir.to_owned(),
        source: e,
    })?;
    Ok(Paths {
        trajectory: dir.join(&out.trajectory),
        diagnostics: dir.join(&out.diagnostics),
        summary: dir.join(&out.summary),
    })
}

fn obstacle_distance(obstacle: &ObstacleRef, metric: &InertiaMetric, s: &ReducedState) -> f64 {
    match obstacle {
        ObstacleRef::Rotation(r) => dist_g(metric, &s.g, r).unwrap_or(f64::NAN),
        ObstacleRef::Point(p) => {
            let c = metric.bi_invariant_scale().unwrap_or(f64::NAN);
            c.sqrt() * sphere_distance(&s.g.apply(&Vector3::z()), p.coords())
        }
    }
}

fn write_single(
    kind: SystemKind,
    model: &Model,
    tr: &Trajectory,
    obstacle: Option<&ObstacleRef>,
    out: &OutputSection,
    paths: &Paths,
) -> Result<(), CliError> {
    let field = model.field();
    let first = &tr.states[0];
    let mut header: Vec<String> = vec!["t".into()];
    header.extend(names("xi", 3));
    match first.alpha {
        AdvectedParameter::None => {}
        AdvectedParameter::Vector3(_) => header.extend(names("alpha", 3)),
        AdvectedParameter::GroupElement(_) => {
            header.extend((1..=3).flat_map(|i| (1..=3).map(move |j| format!("alpha_{i}{j}"))))
        }
    }
    header.extend((1..=3).flat_map(|i| (1..=3).map(move |j| format!("g_{i}{j}"))));
    header.push("energy".into());
    let casimirs = tr.diagnostics[0].casimirs.is_some();
    if casimirs {
        header.extend(names("casimir", 2));
    }
    header.push("vertical_defect".into());
    if kind.on_sphere() {
        header.extend(names("q", 3));
    }

    let rows: Vec<Vec<f64>> = strided(tr.states.len(), out.stride)
        .map(|k| {
            let (s, d) = (&tr.states[k], &tr.diagnostics[k]);
            let mut row = vec![s.t];
            row.extend(s.xi.0.iter());
            match s.alpha {
                AdvectedParameter::None => {}
                AdvectedParameter::Vector3(a) => row.extend(a.iter()),
                AdvectedParameter::GroupElement(a) => row.extend(a.matrix().transpose().iter()),
            }
            // column-major storage of the transpose is the row-major order
            row.extend(s.g.matrix().transpose().iter());
            row.push(d.energy);
            if let Some((c1, c2)) = d.casimirs {
                row.extend([c1, c2]);
            }
            row.push(d.vertical_defect);
            if kind.on_sphere() {
                row.extend(s.g.apply(&Vector3::z()).iter());
            }
            row
        })
        .collect();
    write_csv(&paths.trajectory, &header, &rows)?;

    let mut header: Vec<String> = vec!["t".into(), "energy_drift".into()];
    if casimirs {
        header.extend(["casimir_1_drift".into(), "casimir_2_drift".into()]);
    }
    header.extend(["orthonormality_defect".into(), "vertical_defect".into()]);
    if obstacle.is_some() {
        header.push("obstacle_distance".into());
    }
    let d0 = &tr.diagnostics[0];
    let rows: Vec<Vec<f64>> = strided(tr.states.len(), out.stride)
        .map(|k| {
            let (s, d) = (&tr.states[k], &tr.diagnostics[k]);
            let mut row = vec![s.t, d.energy - d0.energy];
            if let (Some(c), Some(c0)) = (d.casimirs, d0.casimirs) {
                row.extend([c.0 - c0.0, c.1 - c0.1]);
            }
            row.extend([d.orthonormality_defect, d.vertical_defect]);
            if let Some(ob) = obstacle {
                row.push(obstacle_distance(ob, field.metric(), s));
            }
            row
        })
        .collect();
    write_csv(&paths.diagnostics, &header, &rows)
}

fn run_single(
    scenario: &Scenario,
    plan: &Plan,
    opts: &RunOptions,
    started: Instant,
) -> Result<RunOutcome, CliError> {
    let Plan::Single {
        kind,
        model,
        task,
        obstacle,
        integrator,
        shooting,
    } = plan
    else {
        unreachable!("manipulator plans run elsewhere")
    };
    let field = model.field();
    let paths = paths(&opts.output_dir, &scenario.output)?;
    let (n, h) = integrator.grid();
    let mut summary = SingleSummary {
        system: kind.name(),
        mode: if matches!(task, Task::Ivp { .. }) {
            "ivp"
        } else {
            "bvp"
        },
        converged: false,
        iterations: None,
        residual: None,
        xi0: None,
        steps: n,
        step: h,
        t_start: integrator.t_start,
        t_end: integrator.t_end,
        max_energy_drift: None,
        max_casimir_drift: None,
        max_vertical_defect: None,
        max_orthonormality_defect: None,
        clearance: None,
        error: None,
        wall_time_s: 0.0,
    };

    let result = match task {
        Task::Ivp { xi0, g0 } => {
            let s0 = ReducedState {
                t: integrator.t_start,
                xi: *xi0,
                alpha: field.parameter_at(g0),
                g: *g0,
            };
            integrate(field, &s0, integrator).map(|tr| (tr, None))
        }
        Task::GroupBvp { g_a, g_b } => shoot_bvp(
            field,
            g_a,
            &BoundaryTarget::Group(*g_b),
            integrator,
            shooting,
        )
        .map(|r| {
            (
                r.trajectory,
                Some((r.iterations, r.residual, r.xi0, r.max_vertical_defect)),
            )
        }),
        Task::SphereBvp { g_a, q_b } => shoot_bvp(
            field,
            g_a,
            &BoundaryTarget::Sphere(*q_b),
            integrator,
            shooting,
        )
        .map(|r| {
            (
                r.trajectory,
                Some((r.iterations, r.residual, r.xi0, r.max_vertical_defect)),
            )
        }),
    };
    let (tr, shot) = match result {
        Ok(v) => v,
        Err(e) => {
            if let Error::NoConvergence {
                iterations,
                residual,
            } = e
            {
                summary.iterations = Some(iterations);
                summary.residual = Some(residual);
            }
            summary.error = Some(e.to_string());
            summary.wall_time_s = started.elapsed().as_secs_f64();
            write_json(&paths.summary, &summary)?;
            let err = CliError::Solver {
                context: format!("{} {}", kind.name(), summary.mode),
                source: e,
            };
            return Ok(RunOutcome {
                exit_code: err.exit_code(),
                converged: false,
                files: vec![paths.summary],
                message: err.to_string(),
            });
        }
    };
    summary.converged = true;
    summary.xi0 = Some(tr.states[0].xi.0.into());
    if let Some((iterations, residual, _, vertical)) = shot {
        summary.iterations = Some(iterations);
        summary.residual = Some(residual);
        if kind.on_sphere() {
            summary.max_vertical_defect = Some(vertical.max(tr.max_vertical_defect()));
        }
    }
    summary.max_energy_drift = Some(tr.max_energy_drift());
    if let Some((c1, c2)) = tr.diagnostics[0].casimirs {
        let drift = tr.diagnostics.iter().fold([0.0f64; 2], |acc, d| {
            let (a, b) = d.casimirs.unwrap_or((c1, c2));
            [acc[0].max((a - c1).abs()), acc[1].max((b - c2).abs())]
        });
        summary.max_casimir_drift = Some(drift);
    }
    if kind.on_sphere() && summary.max_vertical_defect.is_none() {
        summary.max_vertical_defect = Some(tr.max_vertical_defect());
    }
    summary.max_orthonormality_defect = Some(tr.max_orthonormality_defect());
    if let Some((ob, params)) = obstacle {
        let minimum = tr
            .states
            .iter()
            .map(|s| obstacle_distance(ob, field.metric(), s))
            .fold(f64::INFINITY, f64::min);
        summary.clearance = Some(Clearance {
            minimum,
            required: params.clearance,
            satisfied: minimum > params.clearance,
        });
    }
    write_single(
        *kind,
        model,
        &tr,
        obstacle.as_ref().map(|o| &o.0),
        &scenario.output,
        &paths,
    )?;
    summary.wall_time_s = started.elapsed().as_secs_f64();
    write_json(&paths.summary, &summary)?;
    let message = match (summary.iterations, summary.residual) {
        (Some(i), Some(r)) => format!(
            "{}: converged in {i} iterations, residual {r:.3e}",
            kind.name()
        ),
        _ => format!("{}: integrated {n} steps", kind.name()),
    };
    Ok(RunOutcome {
        exit_code: 0,
        converged: true,
        files: vec![paths.trajectory, paths.diagnostics, paths.summary],
        message,
    })
}

#[derive(Serialize)]
struct SubproblemSummary {
    name: String,
    converged: bool,
    iterations: usize,
    residual: f64,
    clearance: Option<Clearance>,
    error: Option<String>,
}

#[derive(Serialize)]
struct ManipulatorSummary {
    system: &'static str,
    converged: bool,
    steps: usize,
    step: f64,
    t_start: f64,
    t_end: f64,
    sphere_xi0: [f64; 3],
    max_vertical_defect: f64,
    subproblems: Vec<SubproblemSummary>,
    wall_time_s: f64,
}

fn subproblems(spec: &ManipulatorSpec, sol: &ManipulatorSolution) -> Vec<SubproblemSummary> {
    let required = spec
        .joints
        .iter()
        .map(|j| j.obstacle.map(|o| o.params.clearance))
        .chain(std::iter::once(
            spec.sphere.obstacle.map(|o| o.params.clearance),
        ));
    let statuses = sol
        .joints
        .iter()
        .map(|j| &j.status)
        .chain(std::iter::once(&sol.sphere.status));
    statuses
        .zip(required)
        .enumerate()
        .map(|(i, (st, req))| SubproblemSummary {
            name: if i < spec.joints.len() {
                format!("joint_{}", i + 1)
            } else {
                "sphere".into()
            },
            converged: st.converged,
            iterations: st.iterations,
            residual: st.residual,
            clearance: st.clearance.zip(req).map(|(minimum, required)| Clearance {
                minimum,
                required,
                satisfied: minimum > required,
            }),
            error: st.error.as_ref().map(|e| e.to_string()),
        })
        .collect()
}

fn write_manipulator(
    spec: &ManipulatorSpec,
    sol: &ManipulatorSolution,
    out: &OutputSection,
    paths: &Paths,
) -> Result<(), CliError> {
    let nj = spec.joints.len();
    let mut header: Vec<String> = vec!["t".into()];
    for i in 1..=nj {
        header.push(format!("theta_{i}"));
        header.push(format!("theta_dot_{i}"));
    }
    header.extend(names("p", 3));
    header.extend(names("xi", 3));
    header.extend(names("x", 3));
    for i in 1..=nj {
        header.extend(names(&format!("u{i}"), 3));
    }
    header.extend(names("omega", 3));
    let (path, controls) = match (&sol.end_effector, &sol.controls) {
        (Some(p), Some(c)) => (p, c),
        _ => return Ok(()),
    };
    let rows: Vec<Vec<f64>> = strided(sol.times.len(), out.stride)
        .map(|k| {
            let mut row = vec![sol.times[k]];
            for j in &sol.joints {
                row.extend([j.states[k][0], j.states[k][1]]);
            }
            let s = &sol.sphere.states[k];
            row.extend(s.g.apply(&Vector3::z()).iter());
            row.extend(s.xi.0.iter());
            row.extend(path[k].iter());
            for u in &controls[k].joints {
                row.extend(u.iter());
            }
            row.extend(controls[k].omega.iter());
            row
        })
        .collect();
    write_csv(&paths.trajectory, &header, &rows)?;

    let mut header: Vec<String> = vec!["t".into()];
    header.extend((1..=nj).map(|i| format!("joint_{i}_obstacle_distance")));
    header.extend(["sphere_obstacle_distance".into(), "vertical_defect".into()]);
    let rows: Vec<Vec<f64>> = strided(sol.times.len(), out.stride)
        .map(|k| {
            let mut row = vec![sol.times[k]];
            for (j, js) in spec.joints.iter().zip(&sol.joints) {
                row.push(match j.obstacle {
                    Some(o) => eptraj::manipulator::wrap_angle(js.states[k][0] - o.at).abs(),
                    None => f64::NAN,
                });
            }
            let s = &sol.sphere.states[k];
            row.push(match spec.sphere.obstacle {
                Some(o) => sphere_distance(&s.g.apply(&Vector3::z()), o.at.coords()),
                None => f64::NAN,
            });
            row.push(s.xi.0.z.abs());
            row
        })
        .collect();
    write_csv(&paths.diagnostics, &header, &rows)
}

fn run_manipulator(
    scenario: &Scenario,
    plan: &Plan,
    opts: &RunOptions,
    started: Instant,
) -> Result<RunOutcome, CliError> {
    let Plan::Manipulator {
        spec,
        parallel,
        integrator,
        shooting,
    } = plan
    else {
        unreachable!("single-system plans run elsewhere")
    };
    let paths = paths(&opts.output_dir, &scenario.output)?;
    let cfg = ManipulatorConfig {
        integrator: *integrator,
        shooting: *shooting,
        parallel: *parallel,
    };
    let sol = solve_manipulator_ocp(spec, &cfg).map_err(|e| CliError::Solver {
        context: "manipulator".into(),
        source: e,
    })?;
    let converged = sol.all_converged();
    let mut files = vec![paths.summary.clone()];
    if converged {
        write_manipulator(spec, &sol, &scenario.output, &paths)?;
        files.splice(0..0, [paths.trajectory.clone(), paths.diagnostics.clone()]);
    }
    let (n, h) = integrator.grid();
    let subs = subproblems(spec, &sol);
    let failed: Vec<&str> = subs
        .iter()
        .filter(|s| !s.converged)
        .map(|s| s.name.as_str())
        .collect();
    let message = if converged {
        format!("manipulator: {} sub-problems converged", subs.len())
    } else {
        format!(
            "manipulator: sub-problems did not converge: {}",
            failed.join(", ")
        )
    };
    let summary = ManipulatorSummary {
        system: "manipulator",
        converged,
        steps: n,
        step: h,
        t_start: integrator.t_start,
        t_end: integrator.t_end,
        sphere_xi0: sol.sphere.xi0.0.into(),
        max_vertical_defect: sol.sphere.max_vertical_defect,
        subproblems: subs,
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    write_json(&paths.summary, &summary)?;
    Ok(RunOutcome {
        exit_code: if converged { 0 } else { 2 },
        converged,
        files,
        message,
    })
}

pub fn run_scenario(scenario: &Scenario, opts: &RunOptions) -> Result<RunOutcome, CliError> {
    let started = Instant::now();
    let plan = plan(scenario).map_err(CliError::Invalid)?;
    match plan {
        Plan::Single { .. } => run_single(scenario, &plan, opts, started),
        Plan::Manipulator { .. } => run_manipulator(scenario, &plan, opts, started),
    }
}

pub fn load(path: &Path) -> Result<Scenario, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Read {
        path: path.to_owned(),
        source: e,
    })?;
    parse(&text).map_err(CliError::Parse)
}

pub fn run_file(path: &Path, opts: &RunOptions) -> Result<RunOutcome, CliError> {
    run_scenario(&load(path)?, opts)
}
