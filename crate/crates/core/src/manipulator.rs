//! Manipulator with revolute joints and a terminal spherical joint.
//!
//! Configuration space is `SO(2)^N × S²`, each `SO(2)` embedded in SO(3) as
//! the rotations fixing the joint axis. With kinematic controls and a cost
//! that splits per factor, the optimal control problem decouples into `N`
//! one-dimensional circle problems and one sphere problem.

use nalgebra::{DVector, Matrix3, SVector, Vector3};

use crate::algebra::{hat, vee_unchecked, AlgebraVector, InertiaMetric};
use crate::error::{Error, Result};
use crate::group::{exp_so3, RotationMatrix};
use crate::homogeneous::{
    lift_point, pi_project, sphere_distance, HomogeneousSystem, ReductiveSplit, SpherePoint,
};
use crate::integrate::{chart_commit, chart_rate, chart_start, rk4_step, IntegratorConfig};
use crate::potentials::{bump_derivative, AvoidanceParams, ExtendedPotential};
use crate::reduction::{ActionKind, ReducedField, ReducedState, SymmetryBreakingSystem};
use crate::shooting::{damped_newton, shoot_bvp, BoundaryTarget, ShootingConfig};

const UNIT_TOL: f64 = 1e-10;
const TANGENT_CONTROL_TOL: f64 = 1e-6;

/// Wraps an angle to `(−π, π]`.
pub fn wrap_angle(x: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let r = x - two_pi * (x / two_pi).round();
    if r <= -std::f64::consts::PI {
        r + two_pi
    } else if r > std::f64::consts::PI {
        r - two_pi
    } else {
        r
    }
}

/// Forbidden configuration for one factor of the configuration space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Obstacle<P> {
    pub at: P,
    pub params: AvoidanceParams,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RevoluteJoint {
    pub axis: Vector3<f64>,
    pub length: f64,
    pub theta_start: f64,
    pub theta_end: f64,
    pub obstacle: Option<Obstacle<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereJoint {
    pub length: f64,
    pub start: SpherePoint,
    pub end: SpherePoint,
    pub obstacle: Option<Obstacle<SpherePoint>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManipulatorSpec {
    /// Common limb direction in the reference configuration.
    pub x0: Vector3<f64>,
    pub joints: Vec<RevoluteJoint>,
    pub sphere: SphereJoint,
}

fn require_unit(v: &Vector3<f64>) -> Result<()> {
    let norm = v.norm();
    if !((norm - 1.0).abs() <= UNIT_TOL) {
        return Err(Error::NotUnit { norm });
    }
    Ok(())
}

impl ManipulatorSpec {
    pub fn new(x0: Vector3<f64>, joints: Vec<RevoluteJoint>, sphere: SphereJoint) -> Result<Self> {
        let spec = ManipulatorSpec { x0, joints, sphere };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        require_unit(&self.x0)?;
        for (i, j) in self.joints.iter().enumerate() {
            require_unit(&j.axis)?;
            if !(j.length > 0.0 && j.length.is_finite()) {
                return Err(Error::InvalidParams(format!(
                    "joint {i}: length must be > 0"
                )));
            }
            if !(j.theta_start.is_finite() && j.theta_end.is_finite()) {
                return Err(Error::InvalidParams(format!(
                    "joint {i}: non-finite boundary angle"
                )));
            }
            if wrap_angle(j.theta_end - j.theta_start) == std::f64::consts::PI {
                return Err(Error::AntipodalTarget);
            }
            if let Some(ob) = &j.obstacle {
                ob.params.validate()?;
            }
        }
        if !(self.sphere.length >= 0.0 && self.sphere.length.is_finite()) {
            return Err(Error::InvalidParams(
                "sphere joint length must be >= 0".into(),
            ));
        }
        require_unit(self.sphere.start.coords())?;
        require_unit(self.sphere.end.coords())?;
        if let Some(ob) = &self.sphere.obstacle {
            ob.params.validate()?;
        }
        Ok(())
    }
}

/// Rotation by `θ` about the unit axis `v`, `exp(θ v)`.
pub fn embed_revolute(theta: f64, axis: &Vector3<f64>) -> RotationMatrix {
    exp_so3(&AlgebraVector(axis * theta))
}

/// `x = Σ lᵢ Rᵢ x₀ + L p` with `Rᵢ = exp(θᵢ vᵢ)`.
pub fn end_effector(
    spec: &ManipulatorSpec,
    angles: &[f64],
    p: &SpherePoint,
) -> Result<Vector3<f64>> {
    if angles.len() != spec.joints.len() {
        return Err(Error::InvalidParams(format!(
            "expected {} joint angles, got {}",
            spec.joints.len(),
            angles.len()
        )));
    }
    let arm = spec
        .joints
        .iter()
        .zip(angles)
        .fold(Vector3::zeros(), |acc, (j, th)| {
            acc + embed_revolute(*th, &j.axis).apply(&spec.x0) * j.length
        });
    Ok(arm + p.coords() * spec.sphere.length)
}

/// Configuration and velocity at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigurationRate {
    pub joints: Vec<(RotationMatrix, Matrix3<f64>)>,
    pub p: Vector3<f64>,
    pub p_dot: Vector3<f64>,
}

/// Controls `(u₁, …, u_N, ω)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Controls {
    pub joints: Vec<Vector3<f64>>,
    pub omega: Vector3<f64>,
}

/// `uᵢ = vee(RᵢᵀṘᵢ)`, `ω = ṗ × p`; with tangent controls `ṗ = p × ω` recovers the input.
pub fn inverse_control(samples: &[ConfigurationRate]) -> Result<Vec<Controls>> {
    samples
        .iter()
        .map(|s| {
            require_unit(&s.p)?;
            let defect = s.p_dot.dot(&s.p).abs();
            if defect > TANGENT_CONTROL_TOL {
                return Err(Error::NotTangent { defect });
            }
            Ok(Controls {
                joints: s
                    .joints
                    .iter()
                    .map(|(r, r_dot)| vee_unchecked(&(r.matrix().transpose() * r_dot)))
                    .collect(),
                omega: s.p_dot.cross(&s.p),
            })
        })
        .collect()
}

/// Angle-chart dynamics `θ̈ = −dV/dθ` with `V = f(δ²)`, `δ = wrap(θ − θ̄)`.
fn revolute_rate(obstacle: &Option<Obstacle<f64>>, y: &SVector<f64, 2>) -> SVector<f64, 2> {
    let acc = match obstacle {
        Some(ob) => {
            let delta = wrap_angle(y[0] - ob.at);
            -2.0 * bump_derivative(delta * delta, &ob.params) * delta
        }
        None => 0.0,
    };
    SVector::<f64, 2>::new(y[1], acc)
}

fn integrate_revolute(
    joint: &RevoluteJoint,
    rate0: f64,
    cfg: &IntegratorConfig,
) -> Result<Vec<SVector<f64, 2>>> {
    let (n, h) = cfg.grid();
    let mut y = SVector::<f64, 2>::new(joint.theta_start, rate0);
    let mut out = Vec::with_capacity(n + 1);
    out.push(y);
    for step in 1..=n {
        y = rk4_step(&y, h, |y| Ok(revolute_rate(&joint.obstacle, y)))?;
        if !y.iter().all(|v| v.is_finite()) {
            return Err(Error::StepUnstable {
                t: cfg.t_start + step as f64 * h,
            });
        }
        out.push(y);
    }
    Ok(out)
}

/// Initial angular rate: the short arc, or the long one when the obstacle lies on the short arc.
fn revolute_guess(joint: &RevoluteJoint, span: f64) -> f64 {
    let short = wrap_angle(joint.theta_end - joint.theta_start);
    let arc = match &joint.obstacle {
        Some(ob) => {
            let to_obstacle = wrap_angle(ob.at - joint.theta_start);
            let blocked = to_obstacle * short > 0.0 && to_obstacle.abs() < short.abs();
            if blocked {
                short - short.signum() * 2.0 * std::f64::consts::PI
            } else {
                short
            }
        }
        None => short,
    };
    arc / span
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubproblemStatus {
    pub converged: bool,
    pub iterations: usize,
    pub residual: f64,
    /// Smallest distance to the obstacle along the solution.
    pub clearance: Option<f64>,
    pub error: Option<Error>,
}

impl SubproblemStatus {
    fn failed(error: Error) -> Self {
        let (iterations, residual) = match error {
            Error::NoConvergence {
                iterations,
                residual,
            } => (iterations, residual),
            _ => (0, f64::NAN),
        };
        SubproblemStatus {
            converged: false,
            iterations,
            residual,
            clearance: None,
            error: Some(error),
        }
    }
}

/// `(θ, θ̇)` samples of one revolute joint.
pub type JointPath = Vec<SVector<f64, 2>>;
/// Sphere joint points on the shared grid.
pub type SpherePath = Vec<Vector3<f64>>;

#[derive(Debug, Clone, PartialEq)]
pub struct RevoluteSolution {
    pub status: SubproblemStatus,
    /// `(θ, θ̇)` on the time grid.
    pub states: Vec<SVector<f64, 2>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SphereSolution {
    pub status: SubproblemStatus,
    pub xi0: AlgebraVector,
    pub states: Vec<ReducedState>,
    pub max_vertical_defect: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManipulatorSolution {
    pub times: Vec<f64>,
    pub joints: Vec<RevoluteSolution>,
    pub sphere: SphereSolution,
    /// Present only when every sub-problem converged.
    pub end_effector: Option<Vec<Vector3<f64>>>,
    pub controls: Option<Vec<Controls>>,
}

impl ManipulatorSolution {
    pub fn all_converged(&self) -> bool {
        self.sphere.status.converged && self.joints.iter().all(|j| j.status.converged)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManipulatorConfig {
    pub integrator: IntegratorConfig,
    pub shooting: ShootingConfig,
    /// Solve the sub-problems on separate threads.
    pub parallel: bool,
}

pub fn solve_revolute(
    joint: &RevoluteJoint,
    icfg: &IntegratorConfig,
    scfg: &ShootingConfig,
) -> RevoluteSolution {
    let span = icfg.t_end - icfg.t_start;
    let solved = damped_newton(
        |x: &SVector<f64, 1>| {
            let end = *integrate_revolute(joint, x[0], icfg)?
                .last()
                .expect("non-empty grid");
            Ok(SVector::<f64, 1>::new(wrap_angle(end[0] - joint.theta_end)))
        },
        SVector::<f64, 1>::new(revolute_guess(joint, span)),
        scfg,
    )
    .and_then(|out| {
        let states = integrate_revolute(joint, out.x[0], icfg)?;
        Ok((out, states))
    });
    match solved {
        Ok((out, states)) => {
            let clearance = joint.obstacle.map(|ob| {
                states
                    .iter()
                    .map(|y| wrap_angle(y[0] - ob.at).abs())
                    .fold(f64::INFINITY, f64::min)
            });
            RevoluteSolution {
                status: SubproblemStatus {
                    converged: true,
                    iterations: out.iterations,
                    residual: out.residual,
                    clearance,
                    error: None,
                },
                states,
            }
        }
        Err(e) => RevoluteSolution {
            status: SubproblemStatus::failed(e),
            states: Vec::new(),
        },
    }
}

/// The horizontal system on the unit sphere used for the spherical joint.
pub fn sphere_system(joint: &SphereJoint) -> Result<HomogeneousSystem> {
    let metric = InertiaMetric::identity();
    let split = ReductiveSplit::sphere(metric.clone())?;
    let potential = match &joint.obstacle {
        Some(ob) => ExtendedPotential::HomogeneousObstacle {
            obstacle: lift_point(&split, &ob.at)?,
            split: split.clone(),
            params: ob.params,
        },
        None => ExtendedPotential::Zero,
    };
    let action = potential.action_kind().unwrap_or(ActionKind::None);
    HomogeneousSystem::new(
        split,
        SymmetryBreakingSystem::new(metric, potential, action)?,
    )
}

pub fn solve_sphere(
    joint: &SphereJoint,
    icfg: &IntegratorConfig,
    scfg: &ShootingConfig,
) -> SphereSolution {
    let solved = sphere_system(joint).and_then(|sys| {
        let g_a = lift_point(&sys.split, &joint.start)?;
        shoot_bvp(&sys, &g_a, &BoundaryTarget::Sphere(joint.end), icfg, scfg)
    });
    match solved {
        Ok(res) => {
            let clearance = joint.obstacle.map(|ob| {
                res.trajectory
                    .states
                    .iter()
                    .map(|s| sphere_distance(&s.g.apply(&Vector3::z()), ob.at.coords()))
                    .fold(f64::INFINITY, f64::min)
            });
            SphereSolution {
                status: SubproblemStatus {
                    converged: true,
                    iterations: res.iterations,
                    residual: res.residual,
                    clearance,
                    error: None,
                },
                xi0: res.xi0,
                states: res.trajectory.states,
                max_vertical_defect: res.max_vertical_defect,
            }
        }
        Err(e) => SphereSolution {
            status: SubproblemStatus::failed(e),
            xi0: AlgebraVector::zeros(),
            states: Vec::new(),
            max_vertical_defect: 0.0,
        },
    }
}

/// Configuration and velocity samples of a converged solution.
pub fn configuration_rates(
    spec: &ManipulatorSpec,
    sol: &ManipulatorSolution,
) -> Vec<ConfigurationRate> {
    (0..sol.times.len())
        .map(|k| {
            let joints = spec
                .joints
                .iter()
                .zip(&sol.joints)
                .map(|(j, s)| {
                    let r = embed_revolute(s.states[k][0], &j.axis);
                    let r_dot = r.matrix() * hat(&(j.axis * s.states[k][1]));
                    (r, r_dot)
                })
                .collect();
            let st = &sol.sphere.states[k];
            let e3 = Vector3::z();
            ConfigurationRate {
                joints,
                p: st.g.apply(&e3),
                p_dot: st.g.apply(&st.xi.0.cross(&e3)),
            }
        })
        .collect()
}

/// Solves the `N + 1` decoupled boundary value problems, then assembles the
/// end-effector path and the controls.
pub fn solve_manipulator_ocp(
    spec: &ManipulatorSpec,
    cfg: &ManipulatorConfig,
) -> Result<ManipulatorSolution> {
    spec.validate()?;
    cfg.integrator.validate()?;
    cfg.shooting.validate()?;
    let (icfg, scfg) = (&cfg.integrator, &cfg.shooting);
    let (joints, sphere) = if cfg.parallel {
        std::thread::scope(|scope| {
            let handles: Vec<_> = spec
                .joints
                .iter()
                .map(|j| scope.spawn(move || solve_revolute(j, icfg, scfg)))
                .collect();
            let sphere = solve_sphere(&spec.sphere, icfg, scfg);
            let joints: Vec<_> = handles
                .into_iter()
                .map(|h| h.join().expect("joint solver panicked"))
                .collect();
            (joints, sphere)
        })
    } else {
        let joints = spec
            .joints
            .iter()
            .map(|j| solve_revolute(j, icfg, scfg))
            .collect();
        (joints, solve_sphere(&spec.sphere, icfg, scfg))
    };
    let (n, h) = icfg.grid();
    let times = (0..=n).map(|k| icfg.t_start + k as f64 * h).collect();
    let mut sol = ManipulatorSolution {
        times,
        joints,
        sphere,
        end_effector: None,
        controls: None,
    };
    if sol.all_converged() {
        let split = ReductiveSplit::sphere(InertiaMetric::identity())?;
        let path = (0..=n)
            .map(|k| {
                let angles: Vec<f64> = sol.joints.iter().map(|j| j.states[k][0]).collect();
                let p = pi_project(&split, &sol.sphere.states[k].g)?;
                end_effector(spec, &angles, &p)
            })
            .collect::<Result<Vec<_>>>()?;
        sol.controls = Some(inverse_control(&configuration_rates(spec, &sol))?);
        sol.end_effector = Some(path);
    }
    Ok(sol)
}

/// Integrates all factors as a single stacked state `(θ₁, θ̇₁, …, θ_N, θ̇_N, chart)`
/// from the given initial joint rates and sphere velocity.
///
/// The stacked field is block-diagonal, so the result must agree with the
/// independent integrations.
pub fn integrate_stacked(
    spec: &ManipulatorSpec,
    joint_rates: &[f64],
    sphere_xi0: &AlgebraVector,
    icfg: &IntegratorConfig,
) -> Result<(Vec<JointPath>, Vec<ReducedState>)> {
    if joint_rates.len() != spec.joints.len() {
        return Err(Error::InvalidParams(
            "one initial rate per joint required".into(),
        ));
    }
    let sys = sphere_system(&spec.sphere)?;
    let g_a = lift_point(&sys.split, &spec.sphere.start)?;
    let nj = spec.joints.len();
    let (n, h) = icfg.grid();
    let mut sphere = ReducedState {
        t: icfg.t_start,
        xi: *sphere_xi0,
        alpha: sys.parameter_at(&g_a),
        g: g_a,
    };
    let mut y = DVector::<f64>::zeros(2 * nj + 9);
    for (i, j) in spec.joints.iter().enumerate() {
        y[2 * i] = j.theta_start;
        y[2 * i + 1] = joint_rates[i];
    }
    let mut joints: Vec<Vec<SVector<f64, 2>>> = (0..nj)
        .map(|i| vec![SVector::<f64, 2>::new(y[2 * i], y[2 * i + 1])])
        .collect();
    let mut states = vec![sphere];
    for step in 1..=n {
        y.rows_mut(2 * nj, 9).copy_from(&chart_start(&sphere));
        let base = sphere.alpha;
        let next = rk4_step(&y, h, |y: &DVector<f64>| {
            let mut dy = DVector::<f64>::zeros(y.len());
            for (i, j) in spec.joints.iter().enumerate() {
                let r = revolute_rate(&j.obstacle, &SVector::<f64, 2>::new(y[2 * i], y[2 * i + 1]));
                dy[2 * i] = r[0];
                dy[2 * i + 1] = r[1];
            }
            let chart = SVector::<f64, 9>::from_iterator(y.rows(2 * nj, 9).iter().copied());
            dy.rows_mut(2 * nj, 9)
                .copy_from(&chart_rate(&sys, &base, &chart)?);
            Ok(dy)
        })?;
        let t = icfg.t_start + step as f64 * h;
        let chart = SVector::<f64, 9>::from_iterator(next.rows(2 * nj, 9).iter().copied());
        sphere = chart_commit(&sphere, &chart, t, step % icfg.reproject_every == 0)?;
        states.push(sphere);
        for (i, traj) in joints.iter_mut().enumerate() {
            traj.push(SVector::<f64, 2>::new(next[2 * i], next[2 * i + 1]));
        }
        y = next;
    }
    Ok((joints, states))
}

/// Re-integrates the kinematics `θ̇ᵢ = uᵢ·vᵢ`, `ṗ = p × ω` from sampled
/// controls with RK4 of step `2h`, using odd samples as midpoints.
/// Returns angles and sphere points at the even samples.
pub fn reintegrate_controls(
    spec: &ManipulatorSpec,
    controls: &[Controls],
    h: f64,
) -> Result<(Vec<Vec<f64>>, SpherePath)> {
    if controls.len() < 3 {
        return Err(Error::InvalidParams(
            "need at least three control samples".into(),
        ));
    }
    let pairs = (controls.len() - 1) / 2;
    let mut angles: Vec<f64> = spec.joints.iter().map(|j| j.theta_start).collect();
    let mut p = *spec.sphere.start.coords();
    let mut angle_path = vec![angles.clone()];
    let mut sphere_path = vec![p];
    let hh = 2.0 * h;
    for m in 0..pairs {
        let (c0, c1, c2) = (&controls[2 * m], &controls[2 * m + 1], &controls[2 * m + 2]);
        for (i, j) in spec.joints.iter().enumerate() {
            let rate = |c: &Controls| c.joints[i].dot(&j.axis);
            angles[i] += hh / 6.0 * (rate(c0) + 4.0 * rate(c1) + rate(c2));
        }
        let f = |q: &Vector3<f64>, w: &Vector3<f64>| q.cross(w);
        let k1 = f(&p, &c0.omega);
        let k2 = f(&(p + k1 * h), &c1.omega);
        let k3 = f(&(p + k2 * h), &c1.omega);
        let k4 = f(&(p + k3 * hh), &c2.omega);
        p += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (hh / 6.0);
        angle_path.push(angles.clone());
        sphere_path.push(p);
    }
    Ok((angle_path, sphere_path))
}
