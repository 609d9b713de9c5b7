//! Scenario file schema.
//!
//! Scenarios are TOML documents. Rotations are written as rotation vectors
//! (axis times angle), sphere points as 3-vectors on the unit sphere.

use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemKind {
    RigidBody,
    HeavyTop,
    GroupObstacle,
    SphereGeodesic,
    SphereObstacle,
    Manipulator,
}

impl SystemKind {
    pub fn name(self) -> &'static str {
        match self {
            SystemKind::RigidBody => "rigid_body",
            SystemKind::HeavyTop => "heavy_top",
            SystemKind::GroupObstacle => "group_obstacle",
            SystemKind::SphereGeodesic => "sphere_geodesic",
            SystemKind::SphereObstacle => "sphere_obstacle",
            SystemKind::Manipulator => "manipulator",
        }
    }

    pub fn on_sphere(self) -> bool {
        matches!(
            self,
            SystemKind::SphereGeodesic | SystemKind::SphereObstacle
        )
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub system: SystemKind,
    pub metric: Option<MetricSection>,
    pub heavy_top: Option<HeavyTopSection>,
    pub obstacle: Option<ObstacleSection>,
    pub ivp: Option<IvpSection>,
    pub bvp: Option<BvpSection>,
    pub integrator: IntegratorSection,
    #[serde(default)]
    pub shooting: ShootingSection,
    #[serde(default)]
    pub output: OutputSection,
    pub manipulator: Option<ManipulatorSection>,
}

/// Inertia as a full symmetric matrix (`inertia`), its diagonal (`diagonal`),
/// or a multiple of the identity (`scalar`). Exactly one must be given.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSection {
    pub inertia: Option<[[f64; 3]; 3]>,
    pub diagonal: Option<[f64; 3]>,
    pub scalar: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeavyTopSection {
    /// `m g ℓ`, the weight times the distance to the center of mass.
    pub weight: f64,
    /// Body-frame unit direction of the center of mass.
    pub v0: [f64; 3],
}

/// Bump parameters shared by every obstacle table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AvoidanceSection {
    pub tau: f64,
    pub k: u32,
    pub radius: f64,
    pub clearance: f64,
}

macro_rules! avoidance_fields {
    ($t:ty) => {
        impl $t {
            pub fn params(&self) -> AvoidanceSection {
                AvoidanceSection {
                    tau: self.tau,
                    k: self.k,
                    radius: self.radius,
                    clearance: self.clearance,
                }
            }
        }
    };
}

/// Obstacle for `group_obstacle` (a rotation) or `sphere_obstacle` (a point).
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleSection {
    pub rotation: Option<[f64; 3]>,
    pub point: Option<[f64; 3]>,
    pub tau: f64,
    pub k: u32,
    pub radius: f64,
    pub clearance: f64,
}

avoidance_fields!(ObstacleSection);

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IvpSection {
    pub xi0: [f64; 3],
    /// Initial attitude as a rotation vector; identity when omitted.
    pub g0: Option<[f64; 3]>,
}

/// Boundary data: rotation vectors on SO(3), unit points on S².
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BvpSection {
    pub start: [f64; 3],
    pub goal: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSection {
    pub step: f64,
    #[serde(default)]
    pub t_start: f64,
    pub t_end: f64,
    #[serde(default = "default_reproject")]
    pub reproject_every: usize,
}

fn default_reproject() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShootingSection {
    pub residual_tol: f64,
    pub max_iters: usize,
    pub fd_step: f64,
    pub damping: f64,
    pub damping_floor: f64,
}

impl Default for ShootingSection {
    fn default() -> Self {
        let d = eptraj::ShootingConfig::default();
        ShootingSection {
            residual_tol: d.residual_tol,
            max_iters: d.max_iters,
            fd_step: d.fd_step,
            damping: d.damping,
            damping_floor: d.damping_floor,
        }
    }
}

impl ShootingSection {
    pub fn config(&self) -> eptraj::ShootingConfig {
        eptraj::ShootingConfig {
            residual_tol: self.residual_tol,
            max_iters: self.max_iters,
            fd_step: self.fd_step,
            damping: self.damping,
            damping_floor: self.damping_floor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    /// Write every `stride`-th sample (the final sample is always written).
    pub stride: usize,
    pub trajectory: String,
    pub diagnostics: String,
    pub summary: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            stride: 1,
            trajectory: "trajectory.csv".into(),
            diagnostics: "diagnostics.csv".into(),
            summary: "summary.json".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManipulatorSection {
    pub x0: [f64; 3],
    #[serde(default)]
    pub joints: Vec<JointSection>,
    pub sphere: SphereJointSection,
    /// Solve sub-problems on separate threads.
    #[serde(default = "default_parallel")]
    pub parallel: bool,
}

fn default_parallel() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointSection {
    pub axis: [f64; 3],
    pub length: f64,
    pub theta_start: f64,
    pub theta_end: f64,
    pub obstacle: Option<JointObstacleSection>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointObstacleSection {
    pub angle: f64,
    pub tau: f64,
    pub k: u32,
    pub radius: f64,
    pub clearance: f64,
}

avoidance_fields!(JointObstacleSection);

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SphereJointSection {
    pub length: f64,
    pub start: [f64; 3],
    pub end: [f64; 3],
    pub obstacle: Option<SphereObstacleSection>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SphereObstacleSection {
    pub point: [f64; 3],
    pub tau: f64,
    pub k: u32,
    pub radius: f64,
    pub clearance: f64,
}

avoidance_fields!(SphereObstacleSection);

/// Parse failure with the offending location.
#[derive(Debug, Clone, PartialEq)]
pub struct ParseFailure {
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub message: String,
}

impl std::fmt::Display for ParseFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match (self.line, self.column) {
            (Some(l), Some(c)) => write!(f, "line {l}, column {c}: {}", self.message),
            _ => write!(f, "{}", self.message),
        }
    }
}

pub fn parse(text: &str) -> Result<Scenario, ParseFailure> {
    toml::from_str(text).map_err(|e| {
        let (line, column) = match e.span() {
            Some(span) => {
                let before = &text[..span.start.min(text.len())];
                let line = before.matches('\n').count() + 1;
                let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
                (Some(line), Some(column))
            }
            None => (None, None),
        };
        ParseFailure {
            line,
            column,
            message: e.message().trim().to_string(),
        }
    })
}
