//! Time integration of reduced systems with reconstruction on SO(3).
//!
//! Each step runs classical RK4 on a 9-dimensional chart state
//! `(ξ, a, u)` where `g = g_k exp(u)` and, for group-valued parameters,
//! `α = exp(a) α_k`; vector parameters use `a = α` directly. The chart
//! equations `u̇ = J_r⁻¹(u) ξ` and `ȧ = J_l⁻¹(a) ζ` use the closed-form inverse
//! Jacobians, so group and parameter updates stay on SO(3) and the whole
//! scheme keeps fourth order.

use std::ops::{Add, Mul};

use nalgebra::{SVector, Vector3};

use crate::algebra::AlgebraVector;
use crate::error::{Error, Result};
use crate::group::{exp_so3, left_jacobian_inv, project_orthonormal, right_jacobian_inv};
use crate::homogeneous::BASIC_CURVE_TOL;
use crate::reduction::{AdvectedParameter, ParameterRate, ReducedField, ReducedState};

pub type ChartState = SVector<f64, 9>;

/// Fixed-step integration settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub step: f64,
    pub t_start: f64,
    pub t_end: f64,
    /// Re-project `g` (and group parameters) onto SO(3) every this many steps.
    pub reproject_every: usize,
}

impl IntegratorConfig {
    pub fn new(step: f64, t_start: f64, t_end: f64) -> Result<Self> {
        let cfg = IntegratorConfig {
            step,
            t_start,
            t_end,
            reproject_every: 20,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "step must be > 0, got {}",
                self.step
            )));
        }
        if !(self.t_end > self.t_start) {
            return Err(Error::InvalidParams("t_end must exceed t_start".into()));
        }
        if self.reproject_every == 0 {
            return Err(Error::InvalidParams("reproject_every must be >= 1".into()));
        }
        Ok(())
    }

    /// Number of steps and the uniform step that lands exactly on `t_end`.
    pub fn grid(&self) -> (usize, f64) {
        let span = self.t_end - self.t_start;
        let n = ((span / self.step) - 1e-9).ceil().max(1.0) as usize;
        (n, span / n as f64)
    }
}

/// Per-sample conservation and constraint diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    pub energy: f64,
    pub casimirs: Option<(f64, f64)>,
    /// `‖𝒱(ξ)‖` for homogeneous systems, zero otherwise.
    pub vertical_defect: f64,
    pub orthonormality_defect: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<ReducedState>,
    pub diagnostics: Vec<Diagnostics>,
}

impl Trajectory {
    pub fn last(&self) -> &ReducedState {
        self.states.last().expect("trajectories are never empty")
    }

    pub fn max_energy_drift(&self) -> f64 {
        let e0 = self.diagnostics[0].energy;
        self.diagnostics
            .iter()
            .map(|d| (d.energy - e0).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_vertical_defect(&self) -> f64 {
        self.diagnostics
            .iter()
            .map(|d| d.vertical_defect)
            .fold(0.0, f64::max)
    }

    pub fn max_orthonormality_defect(&self) -> f64 {
        self.diagnostics
            .iter()
            .map(|d| d.orthonormality_defect)
            .fold(0.0, f64::max)
    }
}

/// One classical RK4 step for `ẏ = f(y)`.
pub fn rk4_step<V, F>(y: &V, h: f64, mut f: F) -> Result<V>
where
    V: Clone + Add<Output = V> + Mul<f64, Output = V>,
    F: FnMut(&V) -> Result<V>,
{
    let k1 = f(y)?;
    let k2 = f(&(y.clone() + k1.clone() * (0.5 * h)))?;
    let k3 = f(&(y.clone() + k2.clone() * (0.5 * h)))?;
    let k4 = f(&(y.clone() + k3.clone() * h))?;
    Ok(y.clone() + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0))
}

fn vec3(y: &ChartState, offset: usize) -> Vector3<f64> {
    Vector3::new(y[offset], y[offset + 1], y[offset + 2])
}

/// Chart state at the start of a step (`u = 0`, `a = 0` for group parameters).
pub fn chart_start(state: &ReducedState) -> ChartState {
    let mut y = ChartState::zeros();
    y.fixed_rows_mut::<3>(0).copy_from(&state.xi.0);
    if let AdvectedParameter::Vector3(a) = state.alpha {
        y.fixed_rows_mut::<3>(3).copy_from(&a);
    }
    y
}

fn chart_parameter(base: &AdvectedParameter, y: &ChartState) -> AdvectedParameter {
    match base {
        AdvectedParameter::None => AdvectedParameter::None,
        AdvectedParameter::Vector3(_) => AdvectedParameter::Vector3(vec3(y, 3)),
        AdvectedParameter::GroupElement(a0) => {
            AdvectedParameter::GroupElement(exp_so3(&AlgebraVector(vec3(y, 3))) * *a0)
        }
    }
}

/// Time derivative of the chart state, given the parameter at the start of the step.
pub fn chart_rate(
    field: &dyn ReducedField,
    base: &AdvectedParameter,
    y: &ChartState,
) -> Result<ChartState> {
    let xi = AlgebraVector(vec3(y, 0));
    let alpha = chart_parameter(base, y);
    let (xi_dot, rate) = field.rates(&xi, &alpha)?;
    let mut dy = ChartState::zeros();
    dy.fixed_rows_mut::<3>(0).copy_from(&xi_dot.0);
    match rate {
        ParameterRate::None => {}
        ParameterRate::Vector(v) => dy.fixed_rows_mut::<3>(3).copy_from(&v),
        ParameterRate::Group(zeta) => dy
            .fixed_rows_mut::<3>(3)
            .copy_from(&(left_jacobian_inv(&vec3(y, 3)) * zeta.0)),
    }
    dy.fixed_rows_mut::<3>(6)
        .copy_from(&(right_jacobian_inv(&vec3(y, 6)) * xi.0));
    Ok(dy)
}

/// Maps the chart state at the end of a step back to a reduced state.
pub fn chart_commit(
    state: &ReducedState,
    y: &ChartState,
    t: f64,
    reproject: bool,
) -> Result<ReducedState> {
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::StepUnstable { t });
    }
    let mut g = state.g * exp_so3(&AlgebraVector(vec3(y, 6)));
    let mut alpha = chart_parameter(&state.alpha, y);
    if reproject {
        g = project_orthonormal(g.matrix())?;
        if let AdvectedParameter::GroupElement(a) = alpha {
            alpha = AdvectedParameter::GroupElement(project_orthonormal(a.matrix())?);
        }
    }
    Ok(ReducedState {
        t,
        xi: AlgebraVector(vec3(y, 0)),
        alpha,
        g,
    })
}

fn check_initial(field: &dyn ReducedField, state: &ReducedState) -> Result<()> {
    if let Some(split) = field.split() {
        let defect = split.vertical_defect(&state.xi);
        if !(defect <= BASIC_CURVE_TOL) {
            return Err(Error::NotHorizontal { defect });
        }
    }
    if !state.xi.is_finite() {
        return Err(Error::StepUnstable { t: state.t });
    }
    Ok(())
}

pub fn diagnostics(field: &dyn ReducedField, state: &ReducedState) -> Result<Diagnostics> {
    Ok(Diagnostics {
        energy: field.energy(&state.xi, &state.alpha)?,
        casimirs: field.casimirs(&state.xi, &state.alpha),
        vertical_defect: field.split().map_or(0.0, |s| s.vertical_defect(&state.xi)),
        orthonormality_defect: state.g.orthonormality_defect(),
    })
}

/// Integrates from `state0` over the configured span, calling `observer` on
/// every state (including the initial one). Returns the final state.
pub fn integrate_with<F>(
    field: &dyn ReducedField,
    state0: &ReducedState,
    cfg: &IntegratorConfig,
    mut observer: F,
) -> Result<ReducedState>
where
    F: FnMut(&ReducedState) -> Result<()>,
{
    cfg.validate()?;
    check_initial(field, state0)?;
    let (n, h) = cfg.grid();
    let mut state = ReducedState {
        t: cfg.t_start,
        ..*state0
    };
    observer(&state)?;
    for step in 1..=n {
        let base = state.alpha;
        let y = rk4_step(&chart_start(&state), h, |y| chart_rate(field, &base, y))?;
        let t = cfg.t_start + step as f64 * h;
        state = chart_commit(&state, &y, t, step % cfg.reproject_every == 0)?;
        observer(&state)?;
    }
    Ok(state)
}

/// Integrates and records every state with its diagnostics.
pub fn integrate(
    field: &dyn ReducedField,
    state0: &ReducedState,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    let (n, _) = cfg.grid();
    let mut states = Vec::with_capacity(n + 1);
    let mut diags = Vec::with_capacity(n + 1);
    integrate_with(field, state0, cfg, |s| {
        diags.push(diagnostics(field, s)?);
        states.push(*s);
        Ok(())
    })?;
    Ok(Trajectory {
        states,
        diagnostics: diags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::InertiaMetric;
    use crate::group::RotationMatrix;
    use crate::reduction::SymmetryBreakingSystem;
    use approx::assert_relative_eq;

    #[test]
    fn grid_lands_on_end() {
        let cfg = IntegratorConfig::new(1e-3, 0.0, std::f64::consts::FRAC_PI_2).unwrap();
        let (n, h) = cfg.grid();
        assert_eq!(n, 1571);
        assert_relative_eq!(n as f64 * h, std::f64::consts::FRAC_PI_2, epsilon = 1e-15);
        let (n, h) = IntegratorConfig::new(1e-3, 0.0, 1.0).unwrap().grid();
        assert_eq!((n, h), (1000, 1e-3));
    }

    #[test]
    fn config_validation() {
        assert!(IntegratorConfig::new(0.0, 0.0, 1.0).is_err());
        assert!(IntegratorConfig::new(1e-3, 1.0, 1.0).is_err());
        let mut cfg = IntegratorConfig::new(1e-3, 0.0, 1.0).unwrap();
        cfg.reproject_every = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn rk4_integrates_cubic_exactly() {
        // ẏ = 3t² as an autonomous system (t, y)
        let mut y = SVector::<f64, 2>::new(0.0, 0.0);
        for _ in 0..10 {
            y = rk4_step(&y, 0.1, |v| {
                Ok(SVector::<f64, 2>::new(1.0, 3.0 * v[0] * v[0]))
            })
            .unwrap();
        }
        assert_relative_eq!(y[1], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn zero_velocity_stays_put() {
        let sys = SymmetryBreakingSystem::rigid_body(InertiaMetric::identity());
        let g0 = exp_so3(&AlgebraVector::new(0.3, 0.2, -0.1));
        let s0 = ReducedState {
            t: 0.0,
            xi: AlgebraVector::zeros(),
            alpha: AdvectedParameter::None,
            g: g0,
        };
        let traj = integrate(&sys, &s0, &IntegratorConfig::new(1e-2, 0.0, 1.0).unwrap()).unwrap();
        for s in &traj.states {
            assert_relative_eq!(*s.g.matrix(), *g0.matrix(), epsilon = 1e-14);
        }
    }

    #[test]
    fn non_finite_state_is_reported() {
        let sys = SymmetryBreakingSystem::rigid_body(InertiaMetric::identity());
        let s0 = ReducedState {
            t: 0.0,
            xi: AlgebraVector::new(f64::NAN, 0.0, 0.0),
            alpha: AdvectedParameter::None,
            g: RotationMatrix::identity(),
        };
        let r = integrate(&sys, &s0, &IntegratorConfig::new(1e-2, 0.0, 1.0).unwrap());
        assert!(matches!(r, Err(Error::StepUnstable { .. })));
    }
}
