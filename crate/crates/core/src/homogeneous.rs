//! Reductive splits `so(3) = s ⊕ h` and the homogeneous space S² = SO(3)/SO(2).
//!
//! The stabilizer algebra `s` is spanned by a single unit axis `ŝ`, the base
//! point of the sphere; `h` is its metric-orthogonal complement. `π(g) = g ŝ`.

use nalgebra::Vector3;

use crate::algebra::{bracket, g_connection, AlgebraVector, InertiaMetric};
use crate::error::{Error, Result};
use crate::group::{exp_so3, RotationMatrix};
use crate::reduction::{AdvectedParameter, ParameterRate, ReducedField, SymmetryBreakingSystem};

/// Horizontality tolerance for `h_connection` inputs.
pub const HORIZONTAL_TOL: f64 = 1e-10;
/// Horizontality tolerance for velocities fed to the homogeneous field.
pub const BASIC_CURVE_TOL: f64 = 1e-8;
/// Tangency tolerance for sphere vector fields.
pub const TANGENT_TOL: f64 = 1e-8;

const CARTAN_TOL: f64 = 1e-12;

/// Point on the unit sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpherePoint(Vector3<f64>);

impl SpherePoint {
    pub fn new(q: Vector3<f64>) -> Result<Self> {
        let norm = q.norm();
        if !((norm - 1.0).abs() < 1e-10) {
            return Err(Error::NotUnit { norm });
        }
        Ok(SpherePoint(q))
    }

    pub fn normalized(q: Vector3<f64>) -> Result<Self> {
        let norm = q.norm();
        if !(norm > 1e-12 && norm.is_finite()) {
            return Err(Error::NotUnit { norm });
        }
        Ok(SpherePoint(q / norm))
    }

    pub fn e3() -> Self {
        SpherePoint(Vector3::z())
    }

    pub fn coords(&self) -> &Vector3<f64> {
        &self.0
    }
}

/// Round-sphere distance `arccos(q₁ · q₂)` with the dot product clamped to `[−1, 1]`.
pub fn sphere_distance(q1: &Vector3<f64>, q2: &Vector3<f64>) -> f64 {
    q1.dot(q2).clamp(-1.0, 1.0).acos()
}

/// Decomposition `g = s ⊕ h` with bases orthonormal under the metric.
#[derive(Debug, Clone, PartialEq)]
pub struct ReductiveSplit {
    s_basis: Vec<AlgebraVector>,
    h_basis: Vec<AlgebraVector>,
    metric: InertiaMetric,
    symmetric: bool,
}

impl ReductiveSplit {
    /// Builds a split from spanning sets of `s` and `h`, normalizing each basis
    /// vector under the metric. The sets must be mutually orthogonal, span so(3),
    /// `s` must be a subalgebra and `[s, h] ⊂ h`; the split is flagged symmetric
    /// when additionally `[h, h] ⊂ s`.
    pub fn new(
        s_basis: Vec<AlgebraVector>,
        h_basis: Vec<AlgebraVector>,
        metric: InertiaMetric,
    ) -> Result<Self> {
        if s_basis.len() + h_basis.len() != 3 {
            return Err(Error::InvalidSplit("dimensions must add up to 3".into()));
        }
        let normalize = |v: &AlgebraVector| -> Result<AlgebraVector> {
            let n = metric.norm(v);
            if !(n > 1e-12) {
                return Err(Error::InvalidSplit("zero basis vector".into()));
            }
            Ok(*v * (1.0 / n))
        };
        let s_basis = s_basis.iter().map(normalize).collect::<Result<Vec<_>>>()?;
        let h_basis = h_basis.iter().map(normalize).collect::<Result<Vec<_>>>()?;
        let all: Vec<_> = s_basis.iter().chain(h_basis.iter()).collect();
        for i in 0..all.len() {
            for j in (i + 1)..all.len() {
                if metric.inner(all[i], all[j]).abs() > CARTAN_TOL {
                    return Err(Error::InvalidSplit("basis is not orthogonal".into()));
                }
            }
        }
        let mut split = ReductiveSplit {
            s_basis,
            h_basis,
            metric,
            symmetric: false,
        };
        for a in &split.s_basis {
            for b in &split.s_basis {
                if split.metric.norm(&split.horizontal_project(&bracket(a, b))) > CARTAN_TOL {
                    return Err(Error::InvalidSplit("[s, s] is not contained in s".into()));
                }
            }
            for b in &split.h_basis {
                if split.metric.norm(&split.vertical_project(&bracket(a, b))) > CARTAN_TOL {
                    return Err(Error::InvalidSplit("[s, h] is not contained in h".into()));
                }
            }
        }
        split.symmetric = split.h_basis.iter().all(|a| {
            split
                .h_basis
                .iter()
                .all(|b| split.metric.norm(&split.horizontal_project(&bracket(a, b))) <= CARTAN_TOL)
        });
        Ok(split)
    }

    /// S² split about the unit axis `axis`: `s = span{axis}`, `h = axis⊥`.
    pub fn sphere_about(axis: &Vector3<f64>, metric: InertiaMetric) -> Result<Self> {
        let s = SpherePoint::normalized(*axis)?.0;
        let helper = if s.x.abs() < 0.9 {
            Vector3::x()
        } else {
            Vector3::y()
        };
        let h1 = s.cross(&helper).normalize();
        let h2 = s.cross(&h1);
        // keep {h1, h2, s} right-handed so that for s = e3 the basis is {e1, e2}
        let (h1, h2) = if s == Vector3::z() {
            (Vector3::x(), Vector3::y())
        } else {
            (h2, -h1)
        };
        Self::new(
            vec![AlgebraVector(s)],
            vec![AlgebraVector(h1), AlgebraVector(h2)],
            metric,
        )
    }

    /// The S² = SO(3)/SO(2) split with `s = span{ê₃}`, `h = span{ê₁, ê₂}`.
    pub fn sphere(metric: InertiaMetric) -> Result<Self> {
        Self::sphere_about(&Vector3::z(), metric)
    }

    pub fn metric(&self) -> &InertiaMetric {
        &self.metric
    }

    pub fn s_basis(&self) -> &[AlgebraVector] {
        &self.s_basis
    }

    pub fn h_basis(&self) -> &[AlgebraVector] {
        &self.h_basis
    }

    pub fn is_symmetric_space(&self) -> bool {
        self.symmetric
    }

    fn project_onto(&self, basis: &[AlgebraVector], xi: &AlgebraVector) -> AlgebraVector {
        basis.iter().fold(AlgebraVector::zeros(), |acc, b| {
            acc + *b * self.metric.inner(xi, b)
        })
    }

    /// Orthogonal projection onto `h`.
    pub fn horizontal_project(&self, xi: &AlgebraVector) -> AlgebraVector {
        if self.s_basis.len() == 1 {
            // ξ − ⟨ξ,ŝ⟩ŝ keeps an exactly zero vertical coordinate for axis-aligned splits
            let s = &self.s_basis[0];
            let v = *xi - *s * self.metric.inner(xi, s);
            return v;
        }
        self.project_onto(&self.h_basis, xi)
    }

    /// Orthogonal projection onto `s`.
    pub fn vertical_project(&self, xi: &AlgebraVector) -> AlgebraVector {
        self.project_onto(&self.s_basis, xi)
    }

    /// `‖𝒱(ξ)‖`.
    pub fn vertical_defect(&self, xi: &AlgebraVector) -> f64 {
        self.metric.norm(&self.vertical_project(xi))
    }

    fn require_horizontal(&self, xi: &AlgebraVector, tol: f64) -> Result<()> {
        let defect = self.vertical_defect(xi);
        if !(defect <= tol) {
            return Err(Error::NotHorizontal { defect });
        }
        Ok(())
    }

    /// Unit base-point axis `ŝ` (the sphere point `π(e)`).
    pub fn base_axis(&self) -> Result<Vector3<f64>> {
        match self.s_basis.as_slice() {
            [s] => Ok(s.0.normalize()),
            _ => Err(Error::InvalidSplit(
                "base point requires a one-dimensional s".into(),
            )),
        }
    }

    /// Coordinates of a horizontal element in the `h` basis.
    pub fn horizontal_coords(&self, xi: &AlgebraVector) -> Vec<f64> {
        self.h_basis
            .iter()
            .map(|b| self.metric.inner(xi, b))
            .collect()
    }

    pub fn from_horizontal_coords(&self, coords: &[f64]) -> AlgebraVector {
        self.h_basis
            .iter()
            .zip(coords)
            .fold(AlgebraVector::zeros(), |acc, (b, c)| acc + *b * *c)
    }

    /// Distance on the base between `π(g)` and `π(h)`: `√c · arccos(π(g)·π(h))`.
    pub fn base_distance(&self, g: &RotationMatrix, h: &RotationMatrix) -> Result<f64> {
        let c = self.metric.bi_invariant_scale()?;
        Ok(c.sqrt() * sphere_distance(&pi_project(self, g)?.0, &pi_project(self, h)?.0))
    }
}

/// Riemannian h-connection `∇^h_ξ η = ℋ(∇_ξ η)` for horizontal `ξ, η`;
/// identically zero on symmetric spaces.
pub fn h_connection(
    split: &ReductiveSplit,
    xi: &AlgebraVector,
    eta: &AlgebraVector,
) -> Result<AlgebraVector> {
    split.require_horizontal(xi, HORIZONTAL_TOL)?;
    split.require_horizontal(eta, HORIZONTAL_TOL)?;
    if split.is_symmetric_space() {
        return Ok(AlgebraVector::zeros());
    }
    Ok(split.horizontal_project(&g_connection(split.metric(), xi, eta)))
}

/// Projection `π(R) = R ŝ`.
pub fn pi_project(split: &ReductiveSplit, r: &RotationMatrix) -> Result<SpherePoint> {
    let s = split.base_axis()?;
    Ok(SpherePoint(r.apply(&s)))
}

/// Horizontal generator `ζ ∈ h` with `exp(ζ) ŝ = α ŝ` and `‖ζ‖` equal to the
/// base distance; `exp(ζ)` is the representative of the fiber of `π(α)` closest
/// to the identity, so `ζ = ℋ(Log θ(e, α))`.
pub fn theta_generator(split: &ReductiveSplit, alpha: &RotationMatrix) -> Result<AlgebraVector> {
    split.metric().bi_invariant_scale()?;
    chord_generator(split, &alpha.apply(&split.base_axis()?))
}

/// Horizontal `ζ` with `exp(ζ) ŝ = q` along the minimal great circle.
/// Zero for `q = ŝ`; undefined direction for `q = −ŝ`, which yields zero too.
pub fn chord_generator(split: &ReductiveSplit, q: &Vector3<f64>) -> Result<AlgebraVector> {
    let s = split.base_axis()?;
    let axis = s.cross(q);
    let sin = axis.norm();
    if sin == 0.0 {
        return Ok(AlgebraVector::zeros());
    }
    Ok(AlgebraVector(axis * (sin.atan2(s.dot(q)) / sin)))
}

/// A rotation `g` with `π(g) = q`: the minimal one, or a half turn about the
/// first `h` direction when `q = −ŝ`.
pub fn lift_point(split: &ReductiveSplit, q: &SpherePoint) -> Result<RotationMatrix> {
    let s = split.base_axis()?;
    if s.dot(&q.0) < -1.0 + 1e-12 {
        let h = split.h_basis()[0].0.normalize();
        return Ok(exp_so3(&AlgebraVector(h * std::f64::consts::PI)));
    }
    Ok(exp_so3(&chord_generator(split, &q.0)?))
}

/// Fiber representative `θ(g, h) = g exp(ζ)` of `π(h)` closest to `g`.
///
/// Satisfies `π(θ(g,h)) = π(h)`, `d_G(g, θ(g,h)) = d_H(π(g), π(h))` and
/// `θ(kg, kh) = k θ(g,h)`. When `Log(g⁻¹h)` is purely horizontal or vertical it
/// coincides with `g exp(ℋ(Log(g⁻¹h)))`.
pub fn theta_map(
    split: &ReductiveSplit,
    g: &RotationMatrix,
    h: &RotationMatrix,
) -> Result<RotationMatrix> {
    let zeta = theta_generator(split, &(g.inverse() * *h))?;
    Ok(*g * exp_so3(&zeta))
}

/// Euler-Poincaré system on `G/K`, lifted to horizontal curves in `G`.
#[derive(Debug, Clone, PartialEq)]
pub struct HomogeneousSystem {
    pub split: ReductiveSplit,
    pub system: SymmetryBreakingSystem,
}

impl HomogeneousSystem {
    pub fn new(split: ReductiveSplit, system: SymmetryBreakingSystem) -> Result<Self> {
        if split.metric() != &system.metric {
            return Err(Error::InvalidSplit(
                "split and system metrics differ".into(),
            ));
        }
        Ok(HomogeneousSystem { split, system })
    }
}

/// Field `ξ̇ = −∇^h_ξ ξ − ℋ(grad₁Ṽ_ext(e, α))`, `α̇ = −ξ_M(α)` on basic curves.
pub fn ep_homogeneous_field(
    split: &ReductiveSplit,
    sys: &SymmetryBreakingSystem,
    xi: &AlgebraVector,
    alpha: &AdvectedParameter,
) -> Result<(AlgebraVector, ParameterRate)> {
    split.require_horizontal(xi, BASIC_CURVE_TOL)?;
    let xi_h = split.horizontal_project(xi);
    let rate = sys.parameter_rate(xi, alpha)?;
    let grad = sys.potential.grad1_at_identity(&sys.metric, alpha)?;
    let xi_dot = -h_connection(split, &xi_h, &xi_h)? - split.horizontal_project(&grad);
    Ok((xi_dot, rate))
}

impl ReducedField for HomogeneousSystem {
    fn metric(&self) -> &InertiaMetric {
        &self.system.metric
    }

    fn rates(
        &self,
        xi: &AlgebraVector,
        alpha: &AdvectedParameter,
    ) -> Result<(AlgebraVector, ParameterRate)> {
        ep_homogeneous_field(&self.split, &self.system, xi, alpha)
    }

    fn energy(&self, xi: &AlgebraVector, alpha: &AdvectedParameter) -> Result<f64> {
        self.system.energy(xi, alpha)
    }

    fn split(&self) -> Option<&ReductiveSplit> {
        Some(&self.split)
    }

    fn parameter_at(&self, g: &RotationMatrix) -> AdvectedParameter {
        self.system.parameter_at(g)
    }
}

/// Covariant derivative on the round sphere from sampled curves:
/// `D_t X = −q × (q × Ẋ)`, with `Ẋ` by second-order finite differences on a
/// uniform grid of spacing `dt`.
pub fn sphere_covariant_oracle(
    q: &[Vector3<f64>],
    x: &[Vector3<f64>],
    dt: f64,
) -> Result<Vec<Vector3<f64>>> {
    if q.len() != x.len() || q.len() < 3 {
        return Err(Error::InvalidParams(
            "need at least 3 matching samples".into(),
        ));
    }
    for (qi, xi) in q.iter().zip(x) {
        let defect = qi.dot(xi).abs();
        if !(defect <= TANGENT_TOL) {
            return Err(Error::NotTangent { defect });
        }
    }
    let n = x.len();
    Ok((0..n)
        .map(|i| {
            let x_dot = if i == 0 {
                (-3.0 * x[0] + 4.0 * x[1] - x[2]) / (2.0 * dt)
            } else if i == n - 1 {
                (3.0 * x[n - 1] - 4.0 * x[n - 2] + x[n - 3]) / (2.0 * dt)
            } else {
                (x[i + 1] - x[i - 1]) / (2.0 * dt)
            };
            -q[i].cross(&q[i].cross(&x_dot))
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn s2() -> ReductiveSplit {
        ReductiveSplit::sphere(InertiaMetric::identity()).unwrap()
    }

    #[test]
    fn sphere_split_is_symmetric() {
        let split = s2();
        assert!(split.is_symmetric_space());
        assert_eq!(split.h_basis()[0], AlgebraVector::basis(0));
        assert_eq!(split.h_basis()[1], AlgebraVector::basis(1));
        let other =
            ReductiveSplit::sphere_about(&Vector3::new(1.0, 1.0, 0.0), InertiaMetric::identity())
                .unwrap();
        assert!(other.is_symmetric_space());
    }

    #[test]
    fn split_rejects_bad_bases() {
        let id = InertiaMetric::identity();
        let e = AlgebraVector::basis;
        assert!(ReductiveSplit::new(vec![e(2)], vec![e(0), e(0) + e(2)], id.clone()).is_err());
        assert!(ReductiveSplit::new(vec![e(2)], vec![e(0)], id.clone()).is_err());
        // s = span{e1, e2} is not a subalgebra
        assert!(ReductiveSplit::new(vec![e(0), e(1)], vec![e(2)], id).is_err());
    }

    #[test]
    fn projection_examples() {
        let split = s2();
        let e = AlgebraVector::basis;
        assert_eq!(split.horizontal_project(&e(2)), AlgebraVector::zeros());
        assert_eq!(split.vertical_project(&e(2)), e(2));
        assert_eq!(split.horizontal_project(&e(0)), e(0));
        let omega = AlgebraVector::new(1.0, 0.0, 1.0);
        let h = split.horizontal_project(&omega);
        assert_relative_eq!(h.norm(), 2f64.sqrt() * FRAC_PI_4.sin(), epsilon = 1e-15);
        let v = split.vertical_project(&omega);
        assert_eq!(h + v, omega);
    }

    #[test]
    fn h_connection_examples() {
        let split = s2();
        let a = AlgebraVector::new(0.3, -0.8, 0.0);
        let b = AlgebraVector::new(1.1, 0.4, 0.0);
        assert_eq!(
            h_connection(&split, &a, &b).unwrap(),
            AlgebraVector::zeros()
        );
        assert_eq!(
            h_connection(&split, &a, &a).unwrap(),
            AlgebraVector::zeros()
        );
        assert!(matches!(
            h_connection(&split, &AlgebraVector::new(0.0, 0.0, 1.0), &b),
            Err(Error::NotHorizontal { .. })
        ));
    }

    #[test]
    fn h_connection_general_split_uses_projected_bracket() {
        // J = diag(1,1,2) keeps s = span{e3} reductive but the metric is not bi-invariant;
        // the split is still symmetric. Use the formula directly instead.
        let j = InertiaMetric::diagonal(Vector3::new(1.0, 1.0, 2.0)).unwrap();
        let split = ReductiveSplit::sphere(j.clone()).unwrap();
        assert!(split.is_symmetric_space());
        let a = AlgebraVector::new(0.3, -0.8, 0.0);
        let b = AlgebraVector::new(1.1, 0.4, 0.0);
        let direct = split.horizontal_project(&g_connection(&j, &a, &b));
        assert!(direct.norm() < 1e-15);
    }

    #[test]
    fn pi_examples() {
        let split = s2();
        assert_eq!(
            pi_project(&split, &RotationMatrix::identity()).unwrap().0,
            Vector3::z()
        );
        let r = exp_so3(&AlgebraVector::new(FRAC_PI_2, 0.0, 0.0));
        assert_relative_eq!(
            pi_project(&split, &r).unwrap().0,
            Vector3::new(0.0, -1.0, 0.0),
            epsilon = 1e-15
        );
        for theta in [0.2, 1.0, 3.0] {
            let k = exp_so3(&AlgebraVector::new(0.0, 0.0, theta));
            assert_relative_eq!(
                pi_project(&split, &k).unwrap().0,
                Vector3::z(),
                epsilon = 1e-15
            );
        }
    }

    #[test]
    fn theta_examples() {
        let split = s2();
        let id = RotationMatrix::identity();
        let vertical = exp_so3(&AlgebraVector::new(0.0, 0.0, 0.9));
        assert_relative_eq!(
            *theta_map(&split, &id, &vertical).unwrap().matrix(),
            *id.matrix(),
            epsilon = 1e-15
        );
        let horizontal = exp_so3(&AlgebraVector::new(0.7, 0.0, 0.0));
        assert_relative_eq!(
            *theta_map(&split, &id, &horizontal).unwrap().matrix(),
            *horizontal.matrix(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn theta_is_left_invariant_and_isometric() {
        let split = s2();
        let id = InertiaMetric::identity();
        let g = exp_so3(&AlgebraVector::new(0.2, 0.4, -0.3));
        let h = exp_so3(&AlgebraVector::new(-0.5, 0.9, 0.6));
        let k = exp_so3(&AlgebraVector::new(1.0, -0.2, 0.3));
        let t = theta_map(&split, &g, &h).unwrap();
        let tk = theta_map(&split, &(k * g), &(k * h)).unwrap();
        assert_relative_eq!(*tk.matrix(), *(k * t).matrix(), epsilon = 1e-14);
        assert_relative_eq!(
            pi_project(&split, &t).unwrap().0,
            pi_project(&split, &h).unwrap().0,
            epsilon = 1e-14
        );
        assert_relative_eq!(
            crate::group::dist_g(&id, &g, &t).unwrap(),
            split.base_distance(&g, &h).unwrap(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn homogeneous_field_rejects_vertical_velocity() {
        let split = s2();
        let sys = SymmetryBreakingSystem::rigid_body(InertiaMetric::identity());
        let r = ep_homogeneous_field(
            &split,
            &sys,
            &AlgebraVector::new(1.0, 0.0, 1e-6),
            &AdvectedParameter::None,
        );
        assert!(matches!(r, Err(Error::NotHorizontal { .. })));
        let (xi_dot, _) = ep_homogeneous_field(
            &split,
            &sys,
            &AlgebraVector::new(1.0, 0.0, 0.0),
            &AdvectedParameter::None,
        )
        .unwrap();
        assert_eq!(xi_dot, AlgebraVector::zeros());
    }

    #[test]
    fn covariant_oracle_on_great_circle() {
        let dt = 1e-3;
        let ts: Vec<f64> = (0..200).map(|i| i as f64 * dt).collect();
        let q: Vec<_> = ts
            .iter()
            .map(|t| Vector3::new(0.0, -t.sin(), t.cos()))
            .collect();
        let qdot: Vec<_> = ts
            .iter()
            .map(|t| Vector3::new(0.0, -t.cos(), -t.sin()))
            .collect();
        // a parallel field along this great circle: the constant normal e1
        let parallel: Vec<_> = ts.iter().map(|_| Vector3::x()).collect();
        for d in sphere_covariant_oracle(&q, &qdot, dt).unwrap() {
            assert!(d.norm() < 1e-6);
        }
        for d in sphere_covariant_oracle(&q, &parallel, dt).unwrap() {
            assert!(d.norm() < 1e-12);
        }
        let ambient: Vec<_> = ts.iter().map(|_| Vector3::z()).collect();
        assert!(matches!(
            sphere_covariant_oracle(&q, &ambient, dt),
            Err(Error::NotTangent { .. })
        ));
    }
}
