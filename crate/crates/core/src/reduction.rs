//! Reduced vector fields on so(3) and so(3) × parameter space.
//!
//! With `ξ = g⁻¹ġ` and an advected parameter `α = Ψ_{g⁻¹}(α₀)`, critical
//! points of the action satisfy
//!
//! ```text
//! ξ̇ + ∇_ξ ξ = −grad₁ V_ext(e, α)
//! α̇        = −ξ_M(α)
//! ```
//!
//! together with the reconstruction equation `ġ = g ξ`. The rigid body and
//! the heavy top are the two classical instances; obstacle avoidance uses a
//! group-valued parameter `α = g⁻¹ g₀`.

use nalgebra::Vector3;

use crate::algebra::{g_connection, AlgebraVector, InertiaMetric, Momentum};
use crate::error::{Error, Result};
use crate::group::RotationMatrix;
use crate::homogeneous::ReductiveSplit;
use crate::potentials::ExtendedPotential;

/// Parameter dragged along by the group trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AdvectedParameter {
    None,
    Vector3(Vector3<f64>),
    GroupElement(RotationMatrix),
}

impl AdvectedParameter {
    pub fn kind(&self) -> ActionKind {
        match self {
            AdvectedParameter::None => ActionKind::None,
            AdvectedParameter::Vector3(_) => ActionKind::Vector,
            AdvectedParameter::GroupElement(_) => ActionKind::Group,
        }
    }
}

/// Which infinitesimal action `ξ_M` moves the parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionKind {
    /// No parameter (pure geodesic or rigid body).
    None,
    /// Rotation of a vector: `ξ_M(α) = ξ × α`.
    Vector,
    /// Left multiplication on the group: `ξ_M(α) = ξ α`.
    Group,
}

/// Time derivative of an advected parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParameterRate {
    None,
    Vector(Vector3<f64>),
    /// `α̇ = hat(ζ) α`; for the left action `ζ = −ξ`.
    Group(AlgebraVector),
}

/// Reduced state `(t, ξ, α, g)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedState {
    pub t: f64,
    pub xi: AlgebraVector,
    pub alpha: AdvectedParameter,
    pub g: RotationMatrix,
}

/// Geodesic Euler-Poincaré field `ξ̇ = −∇_ξ ξ = J⁻¹(Jξ × ξ)`.
pub fn ep_geodesic_field(metric: &InertiaMetric, xi: &AlgebraVector) -> AlgebraVector {
    -g_connection(metric, xi, xi)
}

/// Euler's rigid-body equation `J Ω̇ = JΩ × Ω`.
pub fn rigid_body_field(metric: &InertiaMetric, omega: &AlgebraVector) -> AlgebraVector {
    ep_geodesic_field(metric, omega)
}

/// Diamond operator of the rotation action on R³: `α ⋄ Π = α × Π`.
pub fn diamond(alpha: &Vector3<f64>, pi: &Momentum) -> Momentum {
    Momentum(alpha.cross(&pi.0))
}

/// Heavy-top Casimirs `(‖α‖², JΩ · α)`.
pub fn heavy_top_casimirs(
    metric: &InertiaMetric,
    omega: &AlgebraVector,
    alpha: &Vector3<f64>,
) -> (f64, f64) {
    (alpha.norm_squared(), metric.flat(omega).0.dot(alpha))
}

/// A left-invariant kinetic energy plus an extended potential with partial symmetry.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetryBreakingSystem {
    pub metric: InertiaMetric,
    pub potential: ExtendedPotential,
    pub action: ActionKind,
}

impl SymmetryBreakingSystem {
    pub fn new(
        metric: InertiaMetric,
        potential: ExtendedPotential,
        action: ActionKind,
    ) -> Result<Self> {
        let expected = potential.action_kind();
        if let Some(expected) = expected {
            if expected != action {
                return Err(Error::ParameterKindMismatch);
            }
        }
        if potential.requires_bi_invariant() && !metric.is_bi_invariant() {
            return Err(Error::NotBiInvariant);
        }
        Ok(SymmetryBreakingSystem {
            metric,
            potential,
            action,
        })
    }

    /// Free rigid body (no potential, no parameter).
    pub fn rigid_body(metric: InertiaMetric) -> Self {
        SymmetryBreakingSystem {
            metric,
            potential: ExtendedPotential::Zero,
            action: ActionKind::None,
        }
    }

    /// Heavy top with weight `mg` and body-frame center-of-mass direction `v0`.
    pub fn heavy_top(metric: InertiaMetric, weight: f64, v0: Vector3<f64>) -> Result<Self> {
        Self::new(
            metric,
            ExtendedPotential::heavy_top(weight, v0)?,
            ActionKind::Vector,
        )
    }

    fn check_kind(&self, alpha: &AdvectedParameter) -> Result<()> {
        if alpha.kind() != self.action {
            return Err(Error::ParameterKindMismatch);
        }
        Ok(())
    }

    /// `α̇ = −ξ_M(α)`.
    pub fn parameter_rate(
        &self,
        xi: &AlgebraVector,
        alpha: &AdvectedParameter,
    ) -> Result<ParameterRate> {
        self.check_kind(alpha)?;
        Ok(match alpha {
            AdvectedParameter::None => ParameterRate::None,
            AdvectedParameter::Vector3(a) => ParameterRate::Vector(-xi.0.cross(a)),
            AdvectedParameter::GroupElement(_) => ParameterRate::Group(-*xi),
        })
    }

    /// Euler-Poincaré field with broken symmetry:
    /// `ξ̇ = −∇_ξ ξ − grad₁V_ext(e, α)`, `α̇ = −ξ_M(α)`.
    pub fn ep_broken_field(
        &self,
        xi: &AlgebraVector,
        alpha: &AdvectedParameter,
    ) -> Result<(AlgebraVector, ParameterRate)> {
        let rate = self.parameter_rate(xi, alpha)?;
        let grad = self.potential.grad1_at_identity(&self.metric, alpha)?;
        Ok((ep_geodesic_field(&self.metric, xi) - grad, rate))
    }

    /// Advected-parameter form for vector parameters:
    /// `ξ̇ = −∇_ξ ξ + (α ⋄ d₂V_ext(e, α))♯`, `α̇ = −ξ × α`.
    pub fn advected_field(
        &self,
        xi: &AlgebraVector,
        alpha: &AdvectedParameter,
    ) -> Result<(AlgebraVector, ParameterRate)> {
        let a = match alpha {
            AdvectedParameter::Vector3(a) if self.action == ActionKind::Vector => a,
            _ => return Err(Error::ParameterKindMismatch),
        };
        let d2 = self
            .potential
            .d2_at_identity(alpha)
            .ok_or(Error::ParameterKindMismatch)?;
        let force = self.metric.sharp(&diamond(a, &d2));
        Ok((
            ep_geodesic_field(&self.metric, xi) + force,
            ParameterRate::Vector(-xi.0.cross(a)),
        ))
    }

    /// `½⟨ξ, ξ⟩ + V_ext(e, α)`.
    pub fn energy(&self, xi: &AlgebraVector, alpha: &AdvectedParameter) -> Result<f64> {
        self.check_kind(alpha)?;
        Ok(0.5 * self.metric.inner(xi, xi)
            + self.potential.value_at_identity(&self.metric, alpha)?)
    }

    /// Reduced parameter `α = Ψ_{g⁻¹}(α₀)` at configuration `g`.
    pub fn parameter_at(&self, g: &RotationMatrix) -> AdvectedParameter {
        match (self.action, self.potential.reference_parameter()) {
            (ActionKind::None, _) => AdvectedParameter::None,
            (ActionKind::Vector, AdvectedParameter::Vector3(a0)) => {
                AdvectedParameter::Vector3(g.inverse().apply(&a0))
            }
            (ActionKind::Group, AdvectedParameter::GroupElement(g0)) => {
                AdvectedParameter::GroupElement(g.inverse() * g0)
            }
            (ActionKind::Vector, _) => AdvectedParameter::Vector3(g.inverse().apply(&Vector3::z())),
            (ActionKind::Group, _) => AdvectedParameter::GroupElement(g.inverse()),
        }
    }
}

/// A reduced system that the integrator and the shooting solver can drive.
pub trait ReducedField {
    fn metric(&self) -> &InertiaMetric;

    /// `(ξ̇, α̇)` at the given reduced state.
    fn rates(
        &self,
        xi: &AlgebraVector,
        alpha: &AdvectedParameter,
    ) -> Result<(AlgebraVector, ParameterRate)>;

    fn energy(&self, xi: &AlgebraVector, alpha: &AdvectedParameter) -> Result<f64>;

    /// Conserved quantities beyond the energy, where the system has them.
    fn casimirs(&self, _xi: &AlgebraVector, _alpha: &AdvectedParameter) -> Option<(f64, f64)> {
        None
    }

    /// Reductive split for homogeneous-space systems.
    fn split(&self) -> Option<&ReductiveSplit> {
        None
    }

    fn parameter_at(&self, g: &RotationMatrix) -> AdvectedParameter;
}

impl ReducedField for SymmetryBreakingSystem {
    fn metric(&self) -> &InertiaMetric {
        &self.metric
    }

    fn rates(
        &self,
        xi: &AlgebraVector,
        alpha: &AdvectedParameter,
    ) -> Result<(AlgebraVector, ParameterRate)> {
        self.ep_broken_field(xi, alpha)
    }

    fn energy(&self, xi: &AlgebraVector, alpha: &AdvectedParameter) -> Result<f64> {
        SymmetryBreakingSystem::energy(self, xi, alpha)
    }

    fn casimirs(&self, xi: &AlgebraVector, alpha: &AdvectedParameter) -> Option<(f64, f64)> {
        match (&self.potential, alpha) {
            (ExtendedPotential::HeavyTop { .. }, AdvectedParameter::Vector3(a)) => {
                Some(heavy_top_casimirs(&self.metric, xi, a))
            }
            _ => None,
        }
    }

    fn parameter_at(&self, g: &RotationMatrix) -> AdvectedParameter {
        SymmetryBreakingSystem::parameter_at(self, g)
    }
}
