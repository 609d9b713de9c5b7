//! Shooting for two-point boundary value problems over initial body velocities.
//!
//! The unknown is `ξ(a)`: three coordinates for group targets, two horizontal
//! coordinates for sphere targets. Newton steps use a central-difference
//! Jacobian and a backtracking trust factor.

use nalgebra::{DMatrix, DVector, SMatrix, SVector, Vector3};

use crate::algebra::AlgebraVector;
use crate::error::{Error, Result};
use crate::group::{log_so3, phi, RotationMatrix, ANTIPODAL_ANGLE_MARGIN};
use crate::homogeneous::{chord_generator, pi_project, sphere_distance, SpherePoint};
use crate::integrate::{integrate, integrate_with, IntegratorConfig, Trajectory};
use crate::reduction::{ReducedField, ReducedState};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShootingConfig {
    pub residual_tol: f64,
    pub max_iters: usize,
    pub fd_step: f64,
    /// Initial trust factor; halved while the residual does not decrease.
    pub damping: f64,
    pub damping_floor: f64,
}

impl Default for ShootingConfig {
    fn default() -> Self {
        ShootingConfig {
            residual_tol: 1e-8,
            max_iters: 50,
            fd_step: 1e-6,
            damping: 1.0,
            damping_floor: 1.0 / 64.0,
        }
    }
}

impl ShootingConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.residual_tol,
            self.fd_step,
            self.damping,
            self.damping_floor,
        ]
        .iter()
        .all(|v| *v > 0.0 && v.is_finite());
        if !positive || self.max_iters == 0 || self.residual_tol >= 1.0 {
            return Err(Error::InvalidParams(
                "invalid shooting configuration".into(),
            ));
        }
        if self.damping_floor > self.damping {
            return Err(Error::InvalidParams(
                "damping floor exceeds initial damping".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryTarget {
    Group(RotationMatrix),
    Sphere(SpherePoint),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonOutcome<const N: usize> {
    pub x: SVector<f64, N>,
    pub residual: f64,
    pub iterations: usize,
}

/// Damped Newton iteration on `r(x) = 0`.
///
/// `iterations` counts residual checks of accepted iterates, so an exact
/// initial guess converges in one iteration. Residual evaluations that fail
/// during the line search are treated like residual increases.
pub fn damped_newton<const N: usize, F>(
    mut residual: F,
    x0: SVector<f64, N>,
    cfg: &ShootingConfig,
) -> Result<NewtonOutcome<N>>
where
    F: FnMut(&SVector<f64, N>) -> Result<SVector<f64, N>>,
{
    cfg.validate()?;
    let mut x = x0;
    let mut r = residual(&x)?;
    let mut norm = r.norm();
    let mut trust = cfg.damping;
    for iteration in 1..=cfg.max_iters {
        if norm < cfg.residual_tol {
            return Ok(NewtonOutcome {
                x,
                residual: norm,
                iterations: iteration,
            });
        }
        let mut jac = SMatrix::<f64, N, N>::zeros();
        for j in 0..N {
            let mut xp = x;
            let mut xm = x;
            xp[j] += cfg.fd_step;
            xm[j] -= cfg.fd_step;
            let col = (residual(&xp)? - residual(&xm)?) / (2.0 * cfg.fd_step);
            jac.set_column(j, &col);
        }
        let delta = DMatrix::from_column_slice(N, N, jac.as_slice())
            .lu()
            .solve(&DVector::from_column_slice((-r).as_slice()))
            .map(|d| SVector::<f64, N>::from_column_slice(d.as_slice()))
            .ok_or(Error::NoConvergence {
                iterations: iteration,
                residual: norm,
            })?;
        let mut lambda = trust;
        loop {
            let candidate = x + delta * lambda;
            match residual(&candidate) {
                Ok(rc) if rc.norm() < norm || lambda <= cfg.damping_floor => {
                    if rc.norm().is_finite() {
                        x = candidate;
                        r = rc;
                        norm = r.norm();
                    }
                    break;
                }
                Err(_) if lambda <= cfg.damping_floor => break,
                _ => lambda = (lambda * 0.5).max(cfg.damping_floor),
            }
        }
        trust = (lambda * 2.0).min(cfg.damping);
    }
    if norm < cfg.residual_tol {
        return Ok(NewtonOutcome {
            x,
            residual: norm,
            iterations: cfg.max_iters,
        });
    }
    Err(Error::NoConvergence {
        iterations: cfg.max_iters,
        residual: norm,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShootingResult {
    pub xi0: AlgebraVector,
    pub trajectory: Trajectory,
    pub iterations: usize,
    pub residual: f64,
    /// Largest `‖𝒱(ξ(t))‖` seen over every trajectory integrated during the solve.
    pub max_vertical_defect: f64,
}

/// Terminal residual for a sphere target: the tangent vector at `q(b)` of
/// length `arccos(q(b)·q_b)` pointing to `q_b`, expressed on the frame
/// `g(b)(h_i × ŝ)` that pushes the h basis to `T_{q(b)}S²`.
fn sphere_residual(
    field: &dyn ReducedField,
    g_end: &RotationMatrix,
    target: &SpherePoint,
) -> Result<SVector<f64, 2>> {
    let split = field
        .split()
        .ok_or_else(|| Error::InvalidParams("sphere targets need a homogeneous system".into()))?;
    let s = split.base_axis()?;
    let q_end = pi_project(split, g_end)?.coords().to_owned();
    let q_b = target.coords();
    let psi = sphere_distance(&q_end, q_b);
    let tangent = q_b - q_end * q_end.dot(q_b);
    let tn = tangent.norm();
    let v = if tn > 0.0 {
        tangent * (psi / tn)
    } else {
        Vector3::zeros()
    };
    let h = split.h_basis();
    let frame = |i: usize| g_end.apply(&h[i].0.cross(&s).normalize());
    Ok(SVector::<f64, 2>::new(v.dot(&frame(0)), v.dot(&frame(1))))
}

/// Solves for `ξ(a)` so that the trajectory from `g_a` reaches `target` at `t_end`.
///
/// Group targets start from `ξ₀ = Log(g_a⁻¹g_b)/(b − a)`; sphere targets from the
/// horizontal lift of the chord tangent, both exact without a potential.
pub fn shoot_bvp(
    field: &dyn ReducedField,
    g_a: &RotationMatrix,
    target: &BoundaryTarget,
    icfg: &IntegratorConfig,
    scfg: &ShootingConfig,
) -> Result<ShootingResult> {
    icfg.validate()?;
    let span = icfg.t_end - icfg.t_start;
    let alpha_a = field.parameter_at(g_a);
    let start = |xi: AlgebraVector| ReducedState {
        t: icfg.t_start,
        xi,
        alpha: alpha_a,
        g: *g_a,
    };
    let mut max_vertical = 0.0f64;
    let terminal = |xi: AlgebraVector, max_vertical: &mut f64| -> Result<RotationMatrix> {
        let end = integrate_with(field, &start(xi), icfg, |s| {
            if let Some(split) = field.split() {
                *max_vertical = max_vertical.max(split.vertical_defect(&s.xi));
            }
            Ok(())
        })?;
        Ok(end.g)
    };

    let (xi0, iterations, residual) = match target {
        BoundaryTarget::Group(g_b) => {
            if field.split().is_some() {
                return Err(Error::InvalidParams(
                    "homogeneous systems take sphere targets".into(),
                ));
            }
            let rel = g_a.inverse() * *g_b;
            if phi(&rel) >= std::f64::consts::PI - ANTIPODAL_ANGLE_MARGIN {
                return Err(Error::AntipodalTarget);
            }
            let guess = log_so3(&rel)?.0 / span;
            let out = damped_newton(
                |x: &SVector<f64, 3>| {
                    let g_end = terminal(
                        AlgebraVector(Vector3::new(x[0], x[1], x[2])),
                        &mut max_vertical,
                    )?;
                    Ok(log_so3(&(g_end.inverse() * *g_b))?.0)
                },
                guess,
                scfg,
            )?;
            (AlgebraVector(out.x), out.iterations, out.residual)
        }
        BoundaryTarget::Sphere(q_b) => {
            let split = field
                .split()
                .ok_or_else(|| {
                    Error::InvalidParams("sphere targets need a homogeneous system".into())
                })?
                .clone();
            let s = split.base_axis()?;
            let q_a = g_a.apply(&s);
            if q_a.dot(q_b.coords()) <= -1.0 + 1e-8 {
                return Err(Error::AntipodalTarget);
            }
            // chord generator in the body frame of g_a
            let local = g_a.inverse().apply(q_b.coords());
            let lift = chord_generator(&split, &local)?;
            let c = split.horizontal_coords(&(lift * (1.0 / span)));
            let out = damped_newton(
                |x: &SVector<f64, 2>| {
                    let xi = split.from_horizontal_coords(&[x[0], x[1]]);
                    let g_end = terminal(xi, &mut max_vertical)?;
                    sphere_residual(field, &g_end, q_b)
                },
                SVector::<f64, 2>::new(c[0], c[1]),
                scfg,
            )?;
            (
                split.from_horizontal_coords(&[out.x[0], out.x[1]]),
                out.iterations,
                out.residual,
            )
        }
    };
    let trajectory = integrate(field, &start(xi0), icfg)?;
    if let Some(split) = field.split() {
        for s in &trajectory.states {
            max_vertical = max_vertical.max(split.vertical_defect(&s.xi));
        }
    }
    Ok(ShootingResult {
        xi0,
        trajectory,
        iterations,
        residual,
        max_vertical_defect: max_vertical,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn newton_solves_a_scalar_root() {
        let out = damped_newton(
            |x: &SVector<f64, 1>| Ok(SVector::<f64, 1>::new(x[0] * x[0] * x[0] - 2.0)),
            SVector::<f64, 1>::new(1.0),
            &ShootingConfig {
                residual_tol: 1e-12,
                ..Default::default()
            },
        )
        .unwrap();
        assert!((out.x[0] - 2f64.cbrt()).abs() < 1e-12);
        assert!(out.iterations > 1);
    }

    #[test]
    fn newton_reports_failure() {
        // x² + 1 has no real root
        let r = damped_newton(
            |x: &SVector<f64, 1>| Ok(SVector::<f64, 1>::new(x[0] * x[0] + 1.0)),
            SVector::<f64, 1>::new(0.5),
            &ShootingConfig {
                max_iters: 10,
                ..Default::default()
            },
        );
        assert!(matches!(r, Err(Error::NoConvergence { .. })));
    }

    #[test]
    fn config_validation() {
        assert!(ShootingConfig::default().validate().is_ok());
        let bad = ShootingConfig {
            residual_tol: 2.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
