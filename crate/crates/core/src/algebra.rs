//! The Lie algebra so(3), coordinatized by R³ through the hat map.
//!
//! Elements are stored as coordinate vectors with respect to the orthonormal
//! basis `{ê₁, ê₂, ê₃}`; matrices are only materialized through [`hat`] at the
//! group boundary. A left-invariant metric is described by an SPD inertia
//! matrix `J` with `⟨ξ, η⟩ = ξᵀ J η`.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

/// Skewness tolerance accepted by [`vee`].
pub const SKEW_TOL: f64 = 1e-10;

/// Relative threshold for detecting `J = c I`.
pub const BI_INVARIANT_TOL: f64 = 1e-12;

/// Element of so(3) in hat coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AlgebraVector(pub Vector3<f64>);

/// Element of so(3)* paired with algebra coordinates by the dot product.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Momentum(pub Vector3<f64>);

impl AlgebraVector {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        AlgebraVector(Vector3::new(x, y, z))
    }

    pub fn zeros() -> Self {
        AlgebraVector(Vector3::zeros())
    }

    /// Basis element `ê_i` (0-based index).
    pub fn basis(i: usize) -> Self {
        let mut v = Vector3::zeros();
        v[i] = 1.0;
        AlgebraVector(v)
    }

    pub fn coords(&self) -> &Vector3<f64> {
        &self.0
    }

    /// Euclidean norm of the coordinates (the norm for `J = I`).
    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }
}

impl From<Vector3<f64>> for AlgebraVector {
    fn from(v: Vector3<f64>) -> Self {
        AlgebraVector(v)
    }
}

impl Momentum {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Momentum(Vector3::new(x, y, z))
    }

    /// Dual pairing `⟨Π, ξ⟩ = Π · ξ`.
    pub fn pair(&self, xi: &AlgebraVector) -> f64 {
        self.0.dot(&xi.0)
    }
}

macro_rules! vector_ops {
    ($t:ident) => {
        impl Add for $t {
            type Output = $t;
            fn add(self, rhs: $t) -> $t {
                $t(self.0 + rhs.0)
            }
        }
        impl AddAssign for $t {
            fn add_assign(&mut self, rhs: $t) {
                self.0 += rhs.0;
            }
        }
        impl Sub for $t {
            type Output = $t;
            fn sub(self, rhs: $t) -> $t {
                $t(self.0 - rhs.0)
            }
        }
        impl Neg for $t {
            type Output = $t;
            fn neg(self) -> $t {
                $t(-self.0)
            }
        }
        impl Mul<f64> for $t {
            type Output = $t;
            fn mul(self, s: f64) -> $t {
                $t(self.0 * s)
            }
        }
        impl Mul<$t> for f64 {
            type Output = $t;
            fn mul(self, v: $t) -> $t {
                $t(v.0 * self)
            }
        }
    };
}

vector_ops!(AlgebraVector);
vector_ops!(Momentum);

/// Hat map: `hat(v) w = v × w`.
pub fn hat(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Inverse of [`hat`]; rejects matrices whose skew defect `‖M + Mᵀ‖` exceeds [`SKEW_TOL`].
pub fn vee(m: &Matrix3<f64>) -> Result<Vector3<f64>> {
    let defect = (m + m.transpose()).norm();
    if defect > SKEW_TOL {
        return Err(Error::NonSkewInput { defect });
    }
    Ok(vee_unchecked(m))
}

/// Reads the skew part of `m` without checking it; `vee_unchecked(hat(v)) == v`.
pub(crate) fn vee_unchecked(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(
        0.5 * (m[(2, 1)] - m[(1, 2)]),
        0.5 * (m[(0, 2)] - m[(2, 0)]),
        0.5 * (m[(1, 0)] - m[(0, 1)]),
    )
}

/// Lie bracket; in hat coordinates the cross product.
pub fn bracket(xi: &AlgebraVector, eta: &AlgebraVector) -> AlgebraVector {
    AlgebraVector(xi.0.cross(&eta.0))
}

/// Left-invariant metric on SO(3) given by an SPD inertia tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct InertiaMetric {
    j: Matrix3<f64>,
    j_inv: Matrix3<f64>,
    bi_invariant: bool,
}

impl InertiaMetric {
    /// Validates `J` (symmetric, Cholesky-factorizable) and caches its inverse.
    pub fn new(j: Matrix3<f64>) -> Result<Self> {
        if j.iter().any(|x| !x.is_finite()) {
            return Err(Error::NotSpd("non-finite entry".into()));
        }
        let scale = j.abs().max().max(f64::MIN_POSITIVE);
        let asym = (j - j.transpose()).abs().max();
        if asym > 1e-12 * scale {
            return Err(Error::NotSpd(format!("asymmetry {asym:.3e}")));
        }
        let j = 0.5 * (j + j.transpose());
        let chol = j
            .cholesky()
            .ok_or_else(|| Error::NotSpd("Cholesky factorization failed".into()))?;
        let j_inv = chol.inverse();
        let c = j.trace() / 3.0;
        let bi_invariant = (j - Matrix3::identity() * c).norm() < BI_INVARIANT_TOL * c;
        Ok(InertiaMetric {
            j,
            j_inv,
            bi_invariant,
        })
    }

    pub fn identity() -> Self {
        Self::scalar(1.0).expect("identity is SPD")
    }

    /// Bi-invariant metric `c I`.
    pub fn scalar(c: f64) -> Result<Self> {
        Self::new(Matrix3::identity() * c)
    }

    pub fn diagonal(d: Vector3<f64>) -> Result<Self> {
        Self::new(Matrix3::from_diagonal(&d))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.j
    }

    pub fn inverse_matrix(&self) -> &Matrix3<f64> {
        &self.j_inv
    }

    pub fn is_bi_invariant(&self) -> bool {
        self.bi_invariant
    }

    /// The constant `c` of a bi-invariant metric `J = c I`.
    pub fn bi_invariant_scale(&self) -> Result<f64> {
        if self.bi_invariant {
            Ok(self.j.trace() / 3.0)
        } else {
            Err(Error::NotBiInvariant)
        }
    }

    pub fn inner(&self, xi: &AlgebraVector, eta: &AlgebraVector) -> f64 {
        xi.0.dot(&(self.j * eta.0))
    }

    pub fn norm(&self, xi: &AlgebraVector) -> f64 {
        self.inner(xi, xi).sqrt()
    }

    pub fn flat(&self, xi: &AlgebraVector) -> Momentum {
        Momentum(self.j * xi.0)
    }

    pub fn sharp(&self, pi: &Momentum) -> AlgebraVector {
        AlgebraVector(self.j_inv * pi.0)
    }
}

/// Metric adjoint of `ad_ξ`: `⟨ad†_ξ η, σ⟩ = ⟨η, [ξ, σ]⟩`, i.e. `J⁻¹(Jη × ξ)`.
pub fn ad_dagger(metric: &InertiaMetric, xi: &AlgebraVector, eta: &AlgebraVector) -> AlgebraVector {
    let j_eta = metric.matrix() * eta.0;
    AlgebraVector(metric.inverse_matrix() * j_eta.cross(&xi.0))
}

/// Riemannian g-connection `∇_ξ η = ½([ξ,η] − ad†_ξ η − ad†_η ξ)`.
///
/// For a bi-invariant metric this collapses to `½[ξ,η]`, which is returned
/// directly.
pub fn g_connection(
    metric: &InertiaMetric,
    xi: &AlgebraVector,
    eta: &AlgebraVector,
) -> AlgebraVector {
    if metric.is_bi_invariant() {
        return 0.5 * bracket(xi, eta);
    }
    0.5 * (bracket(xi, eta) - ad_dagger(metric, xi, eta) - ad_dagger(metric, eta, xi))
}

/// Curvature of the g-connection on constant algebra elements, with the sign
/// convention `R(ξ,η)σ = ∇_η∇_ξσ − ∇_ξ∇_ησ + ∇_[ξ,η]σ`.
///
/// Under this convention a bi-invariant metric gives `R(ξ,η)σ = ¼[[ξ,η],σ]`.
pub fn curvature(
    metric: &InertiaMetric,
    xi: &AlgebraVector,
    eta: &AlgebraVector,
    sigma: &AlgebraVector,
) -> AlgebraVector {
    let nabla = |a: &AlgebraVector, b: &AlgebraVector| g_connection(metric, a, b);
    nabla(eta, &nabla(xi, sigma)) - nabla(xi, &nabla(eta, sigma)) + nabla(&bracket(xi, eta), sigma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn diag123() -> InertiaMetric {
        InertiaMetric::diagonal(Vector3::new(1.0, 2.0, 3.0)).unwrap()
    }

    #[test]
    fn hat_of_e1() {
        let m = hat(&Vector3::x());
        let expected = Matrix3::new(0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0);
        assert_eq!(m, expected);
        assert_eq!(hat(&Vector3::zeros()), Matrix3::zeros());
    }

    #[test]
    fn vee_inverts_hat() {
        let v = Vector3::new(1.0, 2.0, 3.0);
        assert_eq!(vee(&hat(&v)).unwrap(), v);
    }

    #[test]
    fn vee_rejects_symmetric_part() {
        let m = hat(&Vector3::new(1.0, 0.0, 0.0)) + Matrix3::identity() * 1e-6;
        assert!(matches!(vee(&m), Err(Error::NonSkewInput { .. })));
    }

    #[test]
    fn bracket_table() {
        let e = AlgebraVector::basis;
        assert_eq!(bracket(&e(0), &e(1)), e(2));
        assert_eq!(bracket(&e(1), &e(2)), e(0));
        let xi = AlgebraVector::new(0.3, -1.0, 2.0);
        assert_eq!(bracket(&xi, &xi), AlgebraVector::zeros());
    }

    #[test]
    fn metric_examples() {
        let j = diag123();
        let e = AlgebraVector::basis;
        assert_eq!(j.inner(&e(0), &e(0)), 1.0);
        assert_eq!(j.inner(&e(1), &e(1)), 2.0);
        let s = j.sharp(&Momentum::new(0.0, 0.0, 1.0));
        assert_relative_eq!(s.0, Vector3::new(0.0, 0.0, 1.0 / 3.0), epsilon = 1e-15);
        let xi = AlgebraVector::new(0.4, -0.2, 9.0);
        assert_eq!(InertiaMetric::identity().flat(&xi).0, xi.0);
    }

    #[test]
    fn ad_dagger_examples() {
        let e = AlgebraVector::basis;
        let id = InertiaMetric::identity();
        assert_relative_eq!(ad_dagger(&id, &e(0), &e(1)).0, -e(2).0);
        assert_relative_eq!(
            ad_dagger(&diag123(), &e(0), &e(1)).0,
            Vector3::new(0.0, 0.0, -2.0 / 3.0),
            epsilon = 1e-15
        );
        assert_eq!(
            ad_dagger(
                &diag123(),
                &AlgebraVector::new(1.0, 2.0, 3.0),
                &AlgebraVector::zeros()
            ),
            AlgebraVector::zeros()
        );
    }

    #[test]
    fn ad_dagger_basis_oracle() {
        // Solve ⟨a, σ_k⟩ = ⟨η, [ξ, σ_k]⟩ over the basis: J a = b with b_k the right-hand side.
        let j = diag123();
        let xi = AlgebraVector::basis(0);
        let eta = AlgebraVector::basis(1);
        let b = Vector3::from_fn(|k, _| j.inner(&eta, &bracket(&xi, &AlgebraVector::basis(k))));
        let a = j.inverse_matrix() * b;
        assert_relative_eq!(a, Vector3::new(0.0, 0.0, -2.0 / 3.0), epsilon = 1e-15);
        assert_relative_eq!(ad_dagger(&j, &xi, &eta).0, a, epsilon = 1e-15);
    }

    #[test]
    fn g_connection_examples() {
        let e = AlgebraVector::basis;
        let id = InertiaMetric::identity();
        let xi = AlgebraVector::new(0.2, 0.5, -1.0);
        assert_eq!(g_connection(&id, &xi, &xi), AlgebraVector::zeros());
        assert_relative_eq!(g_connection(&id, &e(0), &e(1)).0, 0.5 * e(2).0);
        let j = diag123();
        let c = g_connection(&j, &e(0), &e(1));
        assert_relative_eq!(c.0, Vector3::new(0.0, 0.0, 2.0 / 3.0), epsilon = 1e-15);
        // torsion-free and metric compatible on this pair
        let torsion = c - g_connection(&j, &e(1), &e(0)) - bracket(&e(0), &e(1));
        assert!(torsion.norm() < 1e-15);
    }

    #[test]
    fn metric_rejects_non_spd() {
        assert!(InertiaMetric::diagonal(Vector3::new(1.0, -1.0, 1.0)).is_err());
        let mut m = Matrix3::identity();
        m[(0, 1)] = 0.5;
        assert!(InertiaMetric::new(m).is_err());
        assert!(InertiaMetric::scalar(2.0).unwrap().is_bi_invariant());
        assert!(!diag123().is_bi_invariant());
    }

    #[test]
    fn curvature_sign_conventions() {
        let id = InertiaMetric::identity();
        let (x, y, z) = (
            AlgebraVector::new(0.3, 1.0, -0.5),
            AlgebraVector::new(-0.7, 0.2, 0.9),
            AlgebraVector::new(1.1, -0.4, 0.25),
        );
        let expected = 0.25 * bracket(&bracket(&x, &y), &z);
        assert!((curvature(&id, &x, &y, &z) - expected).norm() < 1e-15);
        // the opposite ordering ∇ξ∇η − ∇η∇ξ − ∇[ξ,η] gives the negative
        let n = |a: &AlgebraVector, b: &AlgebraVector| g_connection(&id, a, b);
        let other = n(&x, &n(&y, &z)) - n(&y, &n(&x, &z)) - n(&bracket(&x, &y), &z);
        assert!((other + expected).norm() < 1e-15);
    }
}
