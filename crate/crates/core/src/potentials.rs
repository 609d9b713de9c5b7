//! Extended potentials with partial symmetry and their identity-point gradients.
//!
//! Every operation here returns `grad₁V_ext(e, α)` itself; the minus signs of
//! the equations of motion live in the reduced fields.

use nalgebra::Vector3;

use crate::algebra::{AlgebraVector, InertiaMetric, Momentum};
use crate::error::{Error, Result};
use crate::group::{exp_so3, log_so3, phi, RotationMatrix, ANTIPODAL_ANGLE_MARGIN};
use crate::homogeneous::{theta_generator, ReductiveSplit};
use crate::reduction::{ActionKind, AdvectedParameter};

/// Parameters of the avoidance bump `f(d²; τ, k, D)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AvoidanceParams {
    /// Height `τ = f(0)`.
    pub tau: f64,
    /// Sharpness exponent.
    pub k: u32,
    /// Engagement radius `D`.
    pub radius: f64,
    /// Required clearance `R < D`, checked after the fact.
    pub clearance: f64,
}

impl AvoidanceParams {
    pub fn new(tau: f64, k: u32, radius: f64, clearance: f64) -> Result<Self> {
        let p = AvoidanceParams {
            tau,
            k,
            radius,
            clearance,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "tau must be > 0, got {}",
                self.tau
            )));
        }
        if self.k < 1 {
            return Err(Error::InvalidParams("k must be >= 1".into()));
        }
        if !(self.clearance > 0.0 && self.clearance < self.radius && self.radius.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "need 0 < clearance < radius, got clearance {} radius {}",
                self.clearance, self.radius
            )));
        }
        Ok(())
    }
}

/// `f(d²) = e τ exp(−1 / (1 − (d²/D²)ᵏ))` inside the engagement radius, 0 outside.
pub fn bump_value(d2: f64, params: &AvoidanceParams) -> f64 {
    let r = d2 / (params.radius * params.radius);
    if r >= 1.0 {
        return 0.0;
    }
    let denom = 1.0 - r.powi(params.k as i32);
    std::f64::consts::E * params.tau * (-1.0 / denom).exp()
}

/// Derivative `df/d(d²)`.
pub fn bump_derivative(d2: f64, params: &AvoidanceParams) -> f64 {
    let d_sq = params.radius * params.radius;
    let r = d2 / d_sq;
    if r >= 1.0 {
        return 0.0;
    }
    let k = params.k as i32;
    let denom = 1.0 - r.powi(k);
    let f = std::f64::consts::E * params.tau * (-1.0 / denom).exp();
    if f == 0.0 {
        return 0.0;
    }
    -f * params.k as f64 * r.powi(k - 1) / (d_sq * denom * denom)
}

fn check_angle(alpha: &RotationMatrix) -> Result<f64> {
    let angle = phi(alpha);
    if angle >= std::f64::consts::PI - ANTIPODAL_ANGLE_MARGIN {
        return Err(Error::AntipodalRotation { angle });
    }
    Ok(angle)
}

/// `grad₁V_ext(e, α) = −2 f'(‖Log α‖²) Log α` for a point obstacle on SO(3)
/// under a bi-invariant metric.
pub fn grad1_group_obstacle(
    metric: &InertiaMetric,
    params: &AvoidanceParams,
    alpha: &RotationMatrix,
) -> Result<AlgebraVector> {
    metric.bi_invariant_scale()?;
    check_angle(alpha)?;
    let log = log_so3(alpha)?;
    let d2 = metric.inner(&log, &log);
    Ok(log * (-2.0 * bump_derivative(d2, params)))
}

/// Gradient of the lifted sphere obstacle `f(d²_H(π(g), π(α)))` at the identity.
///
/// Equals `−2 f'(‖ζ‖²) ζ` with `ζ = ℋ(Log θ(e, α))` the horizontal generator
/// of the fiber representative closest to the identity; it is always horizontal.
pub fn grad1_homogeneous_obstacle(
    split: &ReductiveSplit,
    params: &AvoidanceParams,
    alpha: &RotationMatrix,
) -> Result<AlgebraVector> {
    let zeta = theta_generator(split, alpha)?;
    let d2 = split.metric().inner(&zeta, &zeta);
    Ok(zeta * (-2.0 * bump_derivative(d2, params)))
}

/// `V_ext(R, α) = mg (R v₀) · α`.
pub fn heavy_top_value(
    weight: f64,
    v0: &Vector3<f64>,
    r: &RotationMatrix,
    alpha: &Vector3<f64>,
) -> f64 {
    weight * r.apply(v0).dot(alpha)
}

/// `d₂V_ext(I, α) = mg v₀`, independent of `α`.
pub fn heavy_top_d2(weight: f64, v0: &Vector3<f64>) -> Momentum {
    Momentum(v0 * weight)
}

/// Extended potential `V_ext: G × M → R`.
#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum ExtendedPotential {
    Zero,
    /// Gravity acting on a top; the parameter is the body-frame vertical, `α₀ = e₃`.
    HeavyTop {
        weight: f64,
        v0: Vector3<f64>,
    },
    /// Point obstacle `g₀ ∈ SO(3)`; the parameter is `α = g⁻¹ g₀`.
    GroupObstacle {
        obstacle: RotationMatrix,
        params: AvoidanceParams,
    },
    /// Point obstacle on `G/K`, given by any representative `g₀` of its fiber.
    HomogeneousObstacle {
        obstacle: RotationMatrix,
        split: ReductiveSplit,
        params: AvoidanceParams,
    },
}

impl ExtendedPotential {
    pub fn heavy_top(weight: f64, v0: Vector3<f64>) -> Result<Self> {
        let norm = v0.norm();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::NotUnit { norm });
        }
        Ok(ExtendedPotential::HeavyTop { weight, v0 })
    }

    /// The action kind this potential's parameter requires; `None` means any.
    pub fn action_kind(&self) -> Option<ActionKind> {
        match self {
            ExtendedPotential::Zero => None,
            ExtendedPotential::HeavyTop { .. } => Some(ActionKind::Vector),
            ExtendedPotential::GroupObstacle { .. }
            | ExtendedPotential::HomogeneousObstacle { .. } => Some(ActionKind::Group),
        }
    }

    pub(crate) fn requires_bi_invariant(&self) -> bool {
        matches!(
            self,
            ExtendedPotential::GroupObstacle { .. } | ExtendedPotential::HomogeneousObstacle { .. }
        )
    }

    /// `α₀` with `V_ext(g, α₀) = V(g)`.
    pub fn reference_parameter(&self) -> AdvectedParameter {
        match self {
            ExtendedPotential::Zero => AdvectedParameter::None,
            ExtendedPotential::HeavyTop { .. } => AdvectedParameter::Vector3(Vector3::z()),
            ExtendedPotential::GroupObstacle { obstacle, .. }
            | ExtendedPotential::HomogeneousObstacle { obstacle, .. } => {
                AdvectedParameter::GroupElement(*obstacle)
            }
        }
    }

    /// Full extended potential `V_ext(g, α)`.
    pub fn value(
        &self,
        metric: &InertiaMetric,
        g: &RotationMatrix,
        alpha: &AdvectedParameter,
    ) -> Result<f64> {
        match (self, alpha) {
            (ExtendedPotential::Zero, _) => Ok(0.0),
            (ExtendedPotential::HeavyTop { weight, v0 }, AdvectedParameter::Vector3(a)) => {
                Ok(heavy_top_value(*weight, v0, g, a))
            }
            (
                ExtendedPotential::GroupObstacle { params, .. },
                AdvectedParameter::GroupElement(a),
            ) => {
                let c = metric.bi_invariant_scale()?;
                let angle = check_angle(&(g.inverse() * *a))?;
                Ok(bump_value(c * angle * angle, params))
            }
            (
                ExtendedPotential::HomogeneousObstacle { split, params, .. },
                AdvectedParameter::GroupElement(a),
            ) => {
                let d = split.base_distance(g, a)?;
                Ok(bump_value(d * d, params))
            }
            _ => Err(Error::ParameterKindMismatch),
        }
    }

    pub fn value_at_identity(
        &self,
        metric: &InertiaMetric,
        alpha: &AdvectedParameter,
    ) -> Result<f64> {
        self.value(metric, &RotationMatrix::identity(), alpha)
    }

    /// `V(g) = V_ext(g, α₀)`.
    pub fn restricted(&self, metric: &InertiaMetric, g: &RotationMatrix) -> Result<f64> {
        self.value(metric, g, &self.reference_parameter())
    }

    /// `grad₁V_ext(e, α)` with respect to the metric.
    pub fn grad1_at_identity(
        &self,
        metric: &InertiaMetric,
        alpha: &AdvectedParameter,
    ) -> Result<AlgebraVector> {
        match (self, alpha) {
            (ExtendedPotential::Zero, _) => Ok(AlgebraVector::zeros()),
            (ExtendedPotential::HeavyTop { weight, v0 }, AdvectedParameter::Vector3(a)) => {
                // d/ds mg (exp(sη)v₀)·α = mg η·(v₀ × α)
                Ok(metric.sharp(&Momentum(v0.cross(a) * *weight)))
            }
            (
                ExtendedPotential::GroupObstacle { params, .. },
                AdvectedParameter::GroupElement(a),
            ) => grad1_group_obstacle(metric, params, a),
            (
                ExtendedPotential::HomogeneousObstacle { split, params, .. },
                AdvectedParameter::GroupElement(a),
            ) => grad1_homogeneous_obstacle(split, params, a),
            _ => Err(Error::ParameterKindMismatch),
        }
    }

    /// `d₂V_ext(e, α)` for vector parameters.
    pub fn d2_at_identity(&self, alpha: &AdvectedParameter) -> Option<Momentum> {
        match (self, alpha) {
            (ExtendedPotential::Zero, AdvectedParameter::Vector3(_)) => Some(Momentum::default()),
            (ExtendedPotential::HeavyTop { weight, v0 }, AdvectedParameter::Vector3(_)) => {
                Some(heavy_top_d2(*weight, v0))
            }
            _ => None,
        }
    }

    /// Obstacle parameters, when the potential has any.
    pub fn avoidance(&self) -> Option<&AvoidanceParams> {
        match self {
            ExtendedPotential::GroupObstacle { params, .. }
            | ExtendedPotential::HomogeneousObstacle { params, .. } => Some(params),
            _ => None,
        }
    }
}

/// Central-difference gradient of `s ↦ V_ext(exp(sη), α)` over the given
/// directions, converted to a gradient through the metric Gram matrix of the
/// directions. Independent of the analytic gradients; meant for verification.
pub fn fd_gradient_oracle(
    potential: &ExtendedPotential,
    metric: &InertiaMetric,
    alpha: &AdvectedParameter,
    directions: &[AlgebraVector],
    step: f64,
) -> Result<AlgebraVector> {
    if !(1e-8..=1e-3).contains(&step) {
        return Err(Error::InvalidParams(format!(
            "step {step} outside [1e-8, 1e-3]"
        )));
    }
    let n = directions.len();
    let mut slopes = nalgebra::DVector::zeros(n);
    for (i, eta) in directions.iter().enumerate() {
        let plus = potential.value(metric, &exp_so3(&(*eta * step)), alpha)?;
        let minus = potential.value(metric, &exp_so3(&(*eta * -step)), alpha)?;
        slopes[i] = (plus - minus) / (2.0 * step);
    }
    let gram =
        nalgebra::DMatrix::from_fn(n, n, |i, j| metric.inner(&directions[i], &directions[j]));
    let coeffs = gram
        .lu()
        .solve(&slopes)
        .ok_or_else(|| Error::InvalidParams("directions are linearly dependent".into()))?;
    Ok(directions
        .iter()
        .zip(coeffs.iter())
        .fold(AlgebraVector::zeros(), |acc, (d, c)| acc + *d * *c))
}
