//! SO(3): exponential and logarithm, rotation angle, bi-invariant distance and
//! projection back onto the group.

use std::ops::Mul;

use nalgebra::{Matrix3, Vector3};

use crate::algebra::{hat, vee_unchecked, AlgebraVector, InertiaMetric};
use crate::error::{Error, Result};

/// Orthonormality tolerance `‖RᵀR − I‖_F` for validated rotations.
pub const ORTHONORMAL_TOL: f64 = 1e-9;

/// Trace margin below which a rotation counts as antipodal (`tr R ≤ −1 + margin`).
pub const ANTIPODAL_TRACE_MARGIN: f64 = 1e-8;

/// Angle margin used by callers that need `φ < π − margin`.
pub const ANTIPODAL_ANGLE_MARGIN: f64 = 1e-4;

const SMALL_ANGLE: f64 = 1e-4;

/// A 3×3 rotation matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationMatrix(Matrix3<f64>);

impl RotationMatrix {
    pub fn identity() -> Self {
        RotationMatrix(Matrix3::identity())
    }

    /// Validates orthonormality and orientation.
    pub fn new(m: Matrix3<f64>) -> Result<Self> {
        let defect = orthonormality_defect(&m);
        let det = m.determinant();
        if !(defect <= ORTHONORMAL_TOL) || det <= 0.0 {
            return Err(Error::NotRotation { defect, det });
        }
        Ok(RotationMatrix(m))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn inverse(&self) -> Self {
        RotationMatrix(self.0.transpose())
    }

    pub fn apply(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.0 * v
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn orthonormality_defect(&self) -> f64 {
        orthonormality_defect(&self.0)
    }
}

impl Mul for RotationMatrix {
    type Output = RotationMatrix;
    fn mul(self, rhs: RotationMatrix) -> RotationMatrix {
        RotationMatrix(self.0 * rhs.0)
    }
}

impl Mul<&RotationMatrix> for &RotationMatrix {
    type Output = RotationMatrix;
    fn mul(self, rhs: &RotationMatrix) -> RotationMatrix {
        RotationMatrix(self.0 * rhs.0)
    }
}

pub fn orthonormality_defect(m: &Matrix3<f64>) -> f64 {
    (m.transpose() * m - Matrix3::identity()).norm()
}

/// `sin θ / θ` and `(1 − cos θ)/θ²`, with 4th-order Taylor forms near zero.
fn rodrigues_coefficients(theta: f64) -> (f64, f64) {
    if theta < SMALL_ANGLE {
        let t2 = theta * theta;
        (
            1.0 - t2 / 6.0 + t2 * t2 / 120.0,
            0.5 - t2 / 24.0 + t2 * t2 / 720.0,
        )
    } else {
        (theta.sin() / theta, (1.0 - theta.cos()) / (theta * theta))
    }
}

/// Rodrigues formula `exp(ξ) = I + a hat(ξ) + b hat(ξ)²`.
pub fn exp_so3(xi: &AlgebraVector) -> RotationMatrix {
    let (a, b) = rodrigues_coefficients(xi.norm());
    let k = hat(&xi.0);
    RotationMatrix(Matrix3::identity() + k * a + k * k * b)
}

/// Rotation angle `φ(R) ∈ [0, π]`.
///
/// Evaluated with `atan2` on the skew and trace parts, which equals
/// `arccos(½(tr R − 1))` but keeps full precision near `0` and `π`.
pub fn phi(r: &RotationMatrix) -> f64 {
    let s = vee_unchecked(&r.0).norm();
    let c = 0.5 * (r.trace() - 1.0);
    s.atan2(c)
}

/// Principal logarithm `φ/(2 sin φ) · vee(R − Rᵀ)`, so that `‖log R‖ = φ(R)`.
pub fn log_so3(r: &RotationMatrix) -> Result<AlgebraVector> {
    if r.trace() <= -1.0 + ANTIPODAL_TRACE_MARGIN {
        return Err(Error::AntipodalRotation { angle: phi(r) });
    }
    // vee_unchecked already carries the ½ of (R − Rᵀ)/2
    let axis = vee_unchecked(&r.0);
    let angle = phi(r);
    let factor = if angle < SMALL_ANGLE {
        1.0 + angle * angle / 6.0
    } else {
        angle / angle.sin()
    };
    Ok(AlgebraVector(axis * factor))
}

/// Geodesic distance for a bi-invariant metric `J = c I`: `√c · φ(R₁ᵀR₂)`.
pub fn dist_g(metric: &InertiaMetric, r1: &RotationMatrix, r2: &RotationMatrix) -> Result<f64> {
    let c = metric.bi_invariant_scale()?;
    let rel = r1.inverse() * *r2;
    if rel.trace() <= -1.0 + ANTIPODAL_TRACE_MARGIN {
        return Err(Error::AntipodalRotation { angle: phi(&rel) });
    }
    Ok(c.sqrt() * phi(&rel))
}

/// Nearest rotation in Frobenius norm (polar factor via SVD with sign correction).
pub fn project_orthonormal(m: &Matrix3<f64>) -> Result<RotationMatrix> {
    let svd = m.svd(true, true);
    let sigma_min = svd.singular_values.min();
    if !(sigma_min >= 1e-12) {
        return Err(Error::DegenerateMatrix { sigma_min });
    }
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    let mut d = Matrix3::identity();
    if (u * v_t).determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    Ok(RotationMatrix(u * d * v_t))
}

/// Coefficient of `hat(v)²` in the inverse SO(3) Jacobians.
fn jacobian_inv_coefficient(theta: f64) -> f64 {
    if theta < 1e-3 {
        let t2 = theta * theta;
        1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0
    } else {
        1.0 / (theta * theta) - (1.0 + theta.cos()) / (2.0 * theta * theta.sin())
    }
}

/// Inverse right Jacobian: if `R(t) = R₀ exp(u(t))` and `Ṙ = R hat(ξ)` then `u̇ = J_r⁻¹(u) ξ`.
pub fn right_jacobian_inv(u: &Vector3<f64>) -> Matrix3<f64> {
    let k = hat(u);
    Matrix3::identity() + k * 0.5 + k * k * jacobian_inv_coefficient(u.norm())
}

/// Inverse left Jacobian: if `A(t) = exp(w(t)) A₀` and `Ȧ = hat(ζ) A` then `ẇ = J_l⁻¹(w) ζ`.
pub fn left_jacobian_inv(w: &Vector3<f64>) -> Matrix3<f64> {
    let k = hat(w);
    Matrix3::identity() - k * 0.5 + k * k * jacobian_inv_coefficient(w.norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn exp_examples() {
        assert_eq!(
            *exp_so3(&AlgebraVector::zeros()).matrix(),
            Matrix3::identity()
        );
        let r = exp_so3(&AlgebraVector::new(0.0, 0.0, FRAC_PI_2));
        let expected = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        assert_relative_eq!(*r.matrix(), expected, epsilon = 1e-15);
        let r = exp_so3(&AlgebraVector::new(0.0, 0.0, PI));
        assert_relative_eq!(
            *r.matrix(),
            Matrix3::from_diagonal(&Vector3::new(-1.0, -1.0, 1.0)),
            epsilon = 1e-15
        );
    }

    #[test]
    fn exp_small_angle_matches_series() {
        let xi = AlgebraVector::new(3e-5, -2e-5, 1e-5);
        let r = exp_so3(&xi);
        let k = hat(&xi.0);
        let series = Matrix3::identity() + k + k * k * 0.5 + k * k * k / 6.0;
        assert_relative_eq!(*r.matrix(), series, epsilon = 1e-18);
    }

    #[test]
    fn log_examples() {
        assert_eq!(
            log_so3(&RotationMatrix::identity()).unwrap(),
            AlgebraVector::zeros()
        );
        let xi = AlgebraVector::new(0.3, 0.0, 0.0);
        assert_relative_eq!(log_so3(&exp_so3(&xi)).unwrap().0, xi.0, epsilon = 1e-12);
        let half_turn = exp_so3(&AlgebraVector::new(0.0, 0.0, PI));
        assert_relative_eq!(phi(&half_turn), PI, epsilon = 1e-15);
        assert!(matches!(
            log_so3(&half_turn),
            Err(Error::AntipodalRotation { .. })
        ));
    }

    #[test]
    fn log_norm_is_rotation_angle() {
        let r = exp_so3(&AlgebraVector::new(1.0, -2.0, 0.5));
        assert_relative_eq!(log_so3(&r).unwrap().norm(), phi(&r), epsilon = 1e-12);
    }

    #[test]
    fn distance_examples() {
        let id = InertiaMetric::identity();
        let e = RotationMatrix::identity();
        assert_eq!(dist_g(&id, &e, &e).unwrap(), 0.0);
        for theta in [0.1, 1.0, 2.5, 3.0] {
            let r = exp_so3(&AlgebraVector::new(0.0, 0.0, theta));
            assert_relative_eq!(dist_g(&id, &e, &r).unwrap(), theta, epsilon = 1e-12);
        }
        let quarter = exp_so3(&AlgebraVector::new(FRAC_PI_2, 0.0, 0.0));
        assert_relative_eq!(phi(&quarter), FRAC_PI_2, epsilon = 1e-15);
        let j2 = InertiaMetric::scalar(4.0).unwrap();
        assert_relative_eq!(dist_g(&j2, &e, &quarter).unwrap(), PI, epsilon = 1e-12);
        let aniso = InertiaMetric::diagonal(Vector3::new(1.0, 2.0, 3.0)).unwrap();
        assert_eq!(dist_g(&aniso, &e, &e), Err(Error::NotBiInvariant));
    }

    #[test]
    fn projection_examples() {
        let r = exp_so3(&AlgebraVector::new(0.4, 0.1, -0.9));
        assert_relative_eq!(
            *project_orthonormal(r.matrix()).unwrap().matrix(),
            *r.matrix(),
            epsilon = 1e-14
        );
        let p = project_orthonormal(&(Matrix3::identity() * 1.01)).unwrap();
        assert_relative_eq!(*p.matrix(), Matrix3::identity(), epsilon = 1e-15);
        let perturbed = Matrix3::identity()
            + Matrix3::new(0.3, -0.2, 0.5, 0.1, 0.7, -0.4, -0.6, 0.2, 0.05) * 1e-6;
        let p = project_orthonormal(&perturbed).unwrap();
        assert!(p.orthonormality_defect() < 1e-14);
        // polar oracle: R = M (MᵀM)^{-1/2}
        let mtm = perturbed.transpose() * perturbed;
        let eig = mtm.symmetric_eigen();
        let inv_sqrt = eig.eigenvectors
            * Matrix3::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()))
            * eig.eigenvectors.transpose();
        assert_relative_eq!(*p.matrix(), perturbed * inv_sqrt, epsilon = 1e-14);
        assert!(matches!(
            project_orthonormal(&Matrix3::zeros()),
            Err(Error::DegenerateMatrix { .. })
        ));
    }

    #[test]
    fn jacobian_inverses_differentiate_exp() {
        // d/dt exp(u + t v) at t = 0 equals exp(u) hat(J_r(u) v); check u̇ = J_r⁻¹ ξ by finite differences.
        let u = Vector3::new(0.3, -0.7, 0.4);
        let xi = Vector3::new(0.2, 0.1, -0.5);
        let du = right_jacobian_inv(&u) * xi;
        let h = 1e-6;
        let r0 = exp_so3(&AlgebraVector(u));
        let rp = exp_so3(&AlgebraVector(u + du * h));
        let rm = exp_so3(&AlgebraVector(u - du * h));
        let rdot = (rp.matrix() - rm.matrix()) / (2.0 * h);
        assert_relative_eq!(rdot, r0.matrix() * hat(&xi), epsilon = 1e-9);

        let w = Vector3::new(-0.2, 0.9, 0.1);
        let dw = left_jacobian_inv(&w) * xi;
        let a0 = exp_so3(&AlgebraVector(w));
        let ap = exp_so3(&AlgebraVector(w + dw * h));
        let am = exp_so3(&AlgebraVector(w - dw * h));
        let adot = (ap.matrix() - am.matrix()) / (2.0 * h);
        assert_relative_eq!(adot, hat(&xi) * a0.matrix(), epsilon = 1e-9);
    }
}
