//! Scenario checks and conversion into solver inputs.
//!
//! Every check records a [`Finding`] instead of stopping, so one pass reports
//! all problems. Findings are sorted by path, then message.

use std::fmt;

use eptraj::group::{exp_so3, phi, ANTIPODAL_ANGLE_MARGIN};
use eptraj::homogeneous::{lift_point, HORIZONTAL_TOL};
use eptraj::manipulator::{wrap_angle, ManipulatorSpec, Obstacle, RevoluteJoint, SphereJoint};
use eptraj::nalgebra::{Matrix3, Vector3};
use eptraj::potentials::AvoidanceParams;
use eptraj::reduction::ActionKind;
use eptraj::{
    AlgebraVector, ExtendedPotential, HomogeneousSystem, InertiaMetric, IntegratorConfig,
    ReducedField, ReductiveSplit, RotationMatrix, ShootingConfig, SpherePoint,
    SymmetryBreakingSystem,
};

use crate::scenario::{
    parse, AvoidanceSection, BvpSection, ManipulatorSection, MetricSection, Scenario, SystemKind,
};

const UNIT_TOL: f64 = 1e-10;
const MAX_STEPS: f64 = 1e7;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Finding {
    pub path: String,
    pub message: String,
    pub suggestion: Option<String>,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)?;
        if let Some(s) = &self.suggestion {
            write!(f, " (suggestion: {s})")?;
        }
        Ok(())
    }
}

/// Validated problem, ready to run.
#[allow(clippy::large_enum_variant)]
pub enum Model {
    Group(SymmetryBreakingSystem),
    Sphere(HomogeneousSystem),
}

impl Model {
    pub fn field(&self) -> &dyn ReducedField {
        match self {
            Model::Group(s) => s,
            Model::Sphere(s) => s,
        }
    }
}

pub enum Task {
    Ivp {
        xi0: AlgebraVector,
        g0: RotationMatrix,
    },
    GroupBvp {
        g_a: RotationMatrix,
        g_b: RotationMatrix,
    },
    SphereBvp {
        g_a: RotationMatrix,
        q_b: SpherePoint,
    },
}

/// What the clearance diagnostic measures against.
pub enum ObstacleRef {
    Rotation(RotationMatrix),
    Point(SpherePoint),
}

#[allow(clippy::large_enum_variant)]
pub enum Plan {
    Single {
        kind: SystemKind,
        model: Model,
        task: Task,
        obstacle: Option<(ObstacleRef, AvoidanceParams)>,
        integrator: IntegratorConfig,
        shooting: ShootingConfig,
    },
    Manipulator {
        spec: ManipulatorSpec,
        parallel: bool,
        integrator: IntegratorConfig,
        shooting: ShootingConfig,
    },
}

#[derive(Default)]
struct Findings(Vec<Finding>);

impl Findings {
    fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.0.push(Finding {
            path: path.into(),
            message: message.into(),
            suggestion: None,
        });
    }

    fn suggest(&mut self, path: impl Into<String>, message: impl Into<String>, suggestion: String) {
        self.0.push(Finding {
            path: path.into(),
            message: message.into(),
            suggestion: Some(suggestion),
        });
    }

    fn finite(&mut self, path: &str, values: &[f64]) -> bool {
        if values.iter().all(|v| v.is_finite()) {
            return true;
        }
        self.push(path, "all entries must be finite");
        false
    }

    fn unit(&mut self, path: &str, v: &[f64; 3]) -> Option<Vector3<f64>> {
        if !self.finite(path, v) {
            return None;
        }
        let v = Vector3::from(*v);
        let norm = v.norm();
        if norm == 0.0 {
            self.push(path, "must be a unit vector, got the zero vector");
            return None;
        }
        if (norm - 1.0).abs() > UNIT_TOL {
            let n = v / norm;
            self.suggest(
                path,
                format!("must be a unit vector, norm is {norm}"),
                format!("[{}, {}, {}]", n.x, n.y, n.z),
            );
            return None;
        }
        Some(v)
    }

    fn rotation(&mut self, path: &str, v: &[f64; 3]) -> Option<RotationMatrix> {
        self.finite(path, v)
            .then(|| exp_so3(&AlgebraVector(Vector3::from(*v))))
    }

    fn avoidance(&mut self, path: &str, p: &AvoidanceSection) -> Option<AvoidanceParams> {
        let before = self.0.len();
        if !(p.tau > 0.0 && p.tau.is_finite()) {
            self.push(format!("{path}.tau"), "must be a finite number > 0");
        }
        if p.k < 1 {
            self.push(format!("{path}.k"), "must be >= 1");
        }
        if !(p.radius > 0.0 && p.radius.is_finite()) {
            self.push(format!("{path}.radius"), "must be a finite number > 0");
        }
        if !(p.clearance > 0.0 && p.clearance.is_finite()) {
            self.push(format!("{path}.clearance"), "must be a finite number > 0");
        } else if p.clearance >= p.radius {
            self.push(
                format!("{path}.clearance"),
                format!(
                    "clearance {} must be smaller than the engagement radius {} (avoidance parameters need R_clear < D)",
                    p.clearance, p.radius
                ),
            );
        }
        if self.0.len() > before {
            return None;
        }
        AvoidanceParams::new(p.tau, p.k, p.radius, p.clearance).ok()
    }

    fn section<T>(&mut self, name: &str, value: &Option<T>, wanted: bool, kind: SystemKind) {
        match (value.is_some(), wanted) {
            (false, true) => self.push(
                name,
                format!("section is required for system {}", kind.name()),
            ),
            (true, false) => self.push(
                name,
                format!("section is not used by system {}", kind.name()),
            ),
            _ => {}
        }
    }
}

fn metric(f: &mut Findings, section: &Option<MetricSection>) -> Option<InertiaMetric> {
    let Some(m) = section else {
        return Some(InertiaMetric::identity());
    };
    let given = [
        m.inertia.is_some(),
        m.diagonal.is_some(),
        m.scalar.is_some(),
    ];
    if given.iter().filter(|g| **g).count() != 1 {
        f.push("metric", "give exactly one of inertia, diagonal or scalar");
        return None;
    }
    let (path, matrix) = if let Some(rows) = &m.inertia {
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        ("metric.inertia", Matrix3::from_row_slice(&flat))
    } else if let Some(d) = &m.diagonal {
        (
            "metric.diagonal",
            Matrix3::from_diagonal(&Vector3::from(*d)),
        )
    } else {
        let c = m.scalar.unwrap_or(f64::NAN);
        ("metric.scalar", Matrix3::identity() * c)
    };
    if !f.finite(path, matrix.as_slice()) {
        return None;
    }
    match InertiaMetric::new(matrix) {
        Ok(m) => Some(m),
        Err(e) => {
            f.push(
                path,
                format!("inertia must be symmetric positive definite ({e})"),
            );
            None
        }
    }
}

fn integrator(f: &mut Findings, s: &Scenario) -> Option<IntegratorConfig> {
    let i = &s.integrator;
    let before = f.0.len();
    if !(i.step > 0.0 && i.step.is_finite()) {
        f.push("integrator.step", "must be a finite number > 0");
    }
    if !(i.t_start.is_finite() && i.t_end.is_finite()) {
        f.push("integrator.t_end", "time bounds must be finite");
    } else if i.t_end <= i.t_start {
        f.push(
            "integrator.t_end",
            "must be greater than integrator.t_start",
        );
    }
    if i.reproject_every == 0 {
        f.push("integrator.reproject_every", "must be >= 1");
    }
    if f.0.len() > before {
        return None;
    }
    if (i.t_end - i.t_start) / i.step > MAX_STEPS {
        f.push(
            "integrator.step",
            format!("more than {MAX_STEPS:e} steps requested"),
        );
        return None;
    }
    Some(IntegratorConfig {
        step: i.step,
        t_start: i.t_start,
        t_end: i.t_end,
        reproject_every: i.reproject_every,
    })
}

fn shooting(f: &mut Findings, s: &Scenario) -> Option<ShootingConfig> {
    let sh = &s.shooting;
    let before = f.0.len();
    if !(sh.residual_tol > 0.0 && sh.residual_tol < 1.0) {
        f.push("shooting.residual_tol", "must lie in (0, 1)");
    }
    if sh.max_iters == 0 {
        f.push("shooting.max_iters", "must be >= 1");
    }
    if !(sh.fd_step > 0.0 && sh.fd_step.is_finite()) {
        f.push("shooting.fd_step", "must be a finite number > 0");
    }
    if !(sh.damping > 0.0 && sh.damping <= 1.0) {
        f.push("shooting.damping", "must lie in (0, 1]");
    }
    if !(sh.damping_floor > 0.0 && sh.damping_floor <= sh.damping) {
        f.push(
            "shooting.damping_floor",
            "must lie in (0, shooting.damping]",
        );
    }
    (f.0.len() == before).then(|| sh.config())
}

fn output(f: &mut Findings, s: &Scenario) {
    let o = &s.output;
    if o.stride == 0 {
        f.push("output.stride", "must be >= 1");
    }
    for (path, name) in [
        ("output.trajectory", &o.trajectory),
        ("output.diagnostics", &o.diagnostics),
        ("output.summary", &o.summary),
    ] {
        if name.is_empty() || name.contains(['/', '\\']) {
            f.push(path, "must be a plain file name");
        }
    }
    let mut names = [&o.trajectory, &o.diagnostics, &o.summary];
    names.sort();
    if names.windows(2).any(|w| w[0] == w[1]) {
        f.push("output", "output file names must differ");
    }
}

fn group_bvp(f: &mut Findings, b: &BvpSection) -> Option<Task> {
    let g_a = f.rotation("bvp.start", &b.start)?;
    let g_b = f.rotation("bvp.goal", &b.goal)?;
    if phi(&(g_a.inverse() * g_b)) >= std::f64::consts::PI - ANTIPODAL_ANGLE_MARGIN {
        f.push(
            "bvp.goal",
            "start and goal are (nearly) a half turn apart; the geodesic is not unique",
        );
        return None;
    }
    Some(Task::GroupBvp { g_a, g_b })
}

fn sphere_bvp(f: &mut Findings, split: &ReductiveSplit, b: &BvpSection) -> Option<Task> {
    let q_a = f.unit("bvp.start", &b.start);
    let q_b = f.unit("bvp.goal", &b.goal);
    let (q_a, q_b) = (q_a?, q_b?);
    if q_a.dot(&q_b) <= -1.0 + 1e-8 {
        f.push(
            "bvp.goal",
            "start and goal are antipodal; the great circle is not unique",
        );
        return None;
    }
    let g_a = lift_point(split, &SpherePoint::new(q_a).ok()?).ok()?;
    Some(Task::SphereBvp {
        g_a,
        q_b: SpherePoint::new(q_b).ok()?,
    })
}

fn single(f: &mut Findings, s: &Scenario) -> Option<Plan> {
    let kind = s.system;
    f.section(
        "heavy_top",
        &s.heavy_top,
        kind == SystemKind::HeavyTop,
        kind,
    );
    f.section(
        "obstacle",
        &s.obstacle,
        matches!(kind, SystemKind::GroupObstacle | SystemKind::SphereObstacle),
        kind,
    );
    f.section("manipulator", &s.manipulator, false, kind);
    if s.ivp.is_some() == s.bvp.is_some() {
        f.push("ivp", "give exactly one of the ivp and bvp sections");
    }
    let metric = metric(f, &s.metric);
    let integrator = integrator(f, s);
    let shooting = shooting(f, s);
    output(f, s);
    // keep checking the other sections against a stand-in metric
    let metric_ok = metric.is_some();
    let metric = metric.unwrap_or_else(InertiaMetric::identity);
    let needs_bi_invariant = kind != SystemKind::RigidBody && kind != SystemKind::HeavyTop;
    if needs_bi_invariant && !metric.is_bi_invariant() {
        f.push(
            "metric",
            format!("system {} needs a multiple of the identity", kind.name()),
        );
        return None;
    }

    let mut obstacle = None;
    let potential = match kind {
        SystemKind::RigidBody | SystemKind::SphereGeodesic => ExtendedPotential::Zero,
        SystemKind::HeavyTop => {
            let h = s.heavy_top.as_ref()?;
            if !(h.weight.is_finite()) {
                f.push("heavy_top.weight", "must be finite");
            }
            let v0 = f.unit("heavy_top.v0", &h.v0)?;
            ExtendedPotential::heavy_top(h.weight, v0).ok()?
        }
        SystemKind::GroupObstacle => {
            let o = s.obstacle.as_ref()?;
            if o.point.is_some() {
                f.push("obstacle.point", "group obstacles are given as a rotation");
            }
            let params = f.avoidance("obstacle", &o.params());
            let Some(rv) = &o.rotation else {
                f.push("obstacle.rotation", "required for system group_obstacle");
                return None;
            };
            let rot = f.rotation("obstacle.rotation", rv)?;
            let params = params?;
            obstacle = Some((ObstacleRef::Rotation(rot), params));
            ExtendedPotential::GroupObstacle {
                obstacle: rot,
                params,
            }
        }
        SystemKind::SphereObstacle => {
            let o = s.obstacle.as_ref()?;
            if o.rotation.is_some() {
                f.push("obstacle.rotation", "sphere obstacles are given as a point");
            }
            let params = f.avoidance("obstacle", &o.params());
            let Some(p) = &o.point else {
                f.push("obstacle.point", "required for system sphere_obstacle");
                return None;
            };
            let p = SpherePoint::new(f.unit("obstacle.point", p)?).ok()?;
            let params = params?;
            let split = ReductiveSplit::sphere(metric.clone()).ok()?;
            obstacle = Some((ObstacleRef::Point(p), params));
            ExtendedPotential::HomogeneousObstacle {
                obstacle: lift_point(&split, &p).ok()?,
                split,
                params,
            }
        }
        SystemKind::Manipulator => unreachable!("handled by manipulator()"),
    };
    let action = potential.action_kind().unwrap_or(ActionKind::None);
    let system = match SymmetryBreakingSystem::new(metric.clone(), potential, action) {
        Ok(s) => s,
        Err(e) => {
            f.push("system", e.to_string());
            return None;
        }
    };
    let model = if kind.on_sphere() {
        let split = ReductiveSplit::sphere(metric).ok()?;
        Model::Sphere(HomogeneousSystem::new(split, system).ok()?)
    } else {
        Model::Group(system)
    };

    let task = if let Some(ivp) = &s.ivp {
        let g0 = match &ivp.g0 {
            Some(v) => f.rotation("ivp.g0", v),
            None => Some(RotationMatrix::identity()),
        };
        if !f.finite("ivp.xi0", &ivp.xi0) {
            return None;
        }
        let xi0 = AlgebraVector(Vector3::from(ivp.xi0));
        if let Model::Sphere(sys) = &model {
            let defect = sys.split.vertical_defect(&xi0);
            if defect > HORIZONTAL_TOL {
                let h = sys.split.horizontal_project(&xi0).0;
                f.suggest(
                    "ivp.xi0",
                    format!(
                        "sphere velocities must be horizontal (third component {})",
                        xi0.0.z
                    ),
                    format!("[{}, {}, {}]", h.x, h.y, h.z),
                );
                return None;
            }
        }
        Task::Ivp { xi0, g0: g0? }
    } else {
        let b = s.bvp.as_ref()?;
        match &model {
            Model::Group(_) => group_bvp(f, b)?,
            Model::Sphere(sys) => sphere_bvp(f, &sys.split, b)?,
        }
    };
    if !metric_ok {
        return None;
    }
    Some(Plan::Single {
        kind,
        model,
        task,
        obstacle,
        integrator: integrator?,
        shooting: shooting?,
    })
}

fn manipulator(f: &mut Findings, s: &Scenario) -> Option<Plan> {
    let kind = s.system;
    for (name, present) in [
        ("metric", s.metric.is_some()),
        ("heavy_top", s.heavy_top.is_some()),
        ("obstacle", s.obstacle.is_some()),
        ("ivp", s.ivp.is_some()),
        ("bvp", s.bvp.is_some()),
    ] {
        if present {
            f.push(
                name,
                format!("section is not used by system {}", kind.name()),
            );
        }
    }
    let integrator = integrator(f, s);
    let shooting = shooting(f, s);
    output(f, s);
    let Some(m) = &s.manipulator else {
        f.push("manipulator", "section is required for system manipulator");
        return None;
    };
    let spec = manipulator_spec(f, m);
    Some(Plan::Manipulator {
        spec: spec?,
        parallel: m.parallel,
        integrator: integrator?,
        shooting: shooting?,
    })
}

fn manipulator_spec(f: &mut Findings, m: &ManipulatorSection) -> Option<ManipulatorSpec> {
    let x0 = f.unit("manipulator.x0", &m.x0);
    let mut joints = Vec::new();
    for (i, j) in m.joints.iter().enumerate() {
        let path = format!("manipulator.joints[{i}]");
        let axis = f.unit(&format!("{path}.axis"), &j.axis);
        if !(j.length > 0.0 && j.length.is_finite()) {
            f.push(format!("{path}.length"), "must be a finite number > 0");
        }
        let angles_ok = f.finite(&format!("{path}.theta_end"), &[j.theta_start, j.theta_end]);
        if angles_ok && wrap_angle(j.theta_end - j.theta_start) == std::f64::consts::PI {
            f.push(
                format!("{path}.theta_end"),
                "target is exactly half a turn from the start",
            );
        }
        let obstacle = match &j.obstacle {
            Some(o) => {
                let params = f.avoidance(&format!("{path}.obstacle"), &o.params());
                if !o.angle.is_finite() {
                    f.push(format!("{path}.obstacle.angle"), "must be finite");
                }
                params.map(|params| Obstacle {
                    at: o.angle,
                    params,
                })
            }
            None => None,
        };
        if let Some(axis) = axis {
            joints.push(RevoluteJoint {
                axis,
                length: j.length,
                theta_start: j.theta_start,
                theta_end: j.theta_end,
                obstacle,
            });
        }
    }
    let sj = &m.sphere;
    if !(sj.length >= 0.0 && sj.length.is_finite()) {
        f.push("manipulator.sphere.length", "must be a finite number >= 0");
    }
    let start = f.unit("manipulator.sphere.start", &sj.start);
    let end = f.unit("manipulator.sphere.end", &sj.end);
    if let (Some(a), Some(b)) = (start, end) {
        if a.dot(&b) <= -1.0 + 1e-8 {
            f.push("manipulator.sphere.end", "start and end are antipodal");
        }
    }
    let obstacle = match &sj.obstacle {
        Some(o) => {
            let params = f.avoidance("manipulator.sphere.obstacle", &o.params());
            let at = f.unit("manipulator.sphere.obstacle.point", &o.point);
            Some(Obstacle {
                at: SpherePoint::new(at?).ok()?,
                params: params?,
            })
        }
        None => None,
    };
    if !f.0.is_empty() {
        return None;
    }
    ManipulatorSpec::new(
        x0?,
        joints,
        SphereJoint {
            length: sj.length,
            start: SpherePoint::new(start?).ok()?,
            end: SpherePoint::new(end?).ok()?,
            obstacle,
        },
    )
    .map_err(|e| f.push("manipulator", e.to_string()))
    .ok()
}

/// Checks a parsed scenario and builds the solver inputs.
pub fn plan(s: &Scenario) -> Result<Plan, Vec<Finding>> {
    let mut f = Findings::default();
    let plan = if s.system == SystemKind::Manipulator {
        manipulator(&mut f, s)
    } else {
        single(&mut f, s)
    };
    let mut findings = f.0;
    findings.sort();
    findings.dedup();
    match plan {
        Some(p) if findings.is_empty() => Ok(p),
        _ => {
            if findings.is_empty() {
                findings.push(Finding {
                    path: "scenario".into(),
                    message: "inconsistent scenario".into(),
                    suggestion: None,
                });
            }
            Err(findings)
        }
    }
}

/// Full report for a scenario text; empty when the scenario is valid.
pub fn validate_text(text: &str) -> Vec<Finding> {
    match parse(text) {
        Ok(s) => plan(&s).err().unwrap_or_default(),
        Err(e) => vec![Finding {
            path: match e.line {
                Some(l) => format!("line {l}"),
                None => "scenario".into(),
            },
            message: e.message,
            suggestion: None,
        }],
    }
}
