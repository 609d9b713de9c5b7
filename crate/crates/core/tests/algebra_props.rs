use eptraj::algebra::{ad_dagger, bracket, curvature, g_connection, hat, vee};
use eptraj::group::{dist_g, exp_so3, log_so3, phi, project_orthonormal};
use eptraj::{AlgebraVector, InertiaMetric};
use nalgebra::{Matrix3, Vector3};
use proptest::prelude::*;

fn vec3() -> impl Strategy<Value = AlgebraVector> {
    prop::array::uniform3(-2.0f64..2.0).prop_map(|a| AlgebraVector(Vector3::from(a)))
}

/// SPD inertia from a random lower-triangular factor with a positive diagonal.
fn metric() -> impl Strategy<Value = InertiaMetric> {
    (
        prop::array::uniform3(0.5f64..3.0),
        prop::array::uniform3(-0.5f64..0.5),
    )
        .prop_map(|(d, o)| {
            let l = Matrix3::new(d[0], 0.0, 0.0, o[0], d[1], 0.0, o[1], o[2], d[2]);
            InertiaMetric::new(l * l.transpose()).unwrap()
        })
}

/// Rotation vector with angle below `π − 0.1`.
fn rotvec() -> impl Strategy<Value = AlgebraVector> {
    (
        prop::array::uniform3(-1.0f64..1.0),
        0.0f64..(std::f64::consts::PI - 0.1),
    )
        .prop_filter_map("degenerate axis", |(a, angle)| {
            let v = Vector3::from(a);
            (v.norm() > 1e-3).then(|| AlgebraVector(v.normalize() * angle))
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn hat_vee_round_trip(v in vec3()) {
        prop_assert_eq!(vee(&hat(&v.0)).unwrap(), v.0);
        prop_assert!((hat(&v.0) + hat(&v.0).transpose()).norm() == 0.0);
    }

    #[test]
    fn bracket_is_commutator(a in vec3(), b in vec3()) {
        let comm = hat(&a.0) * hat(&b.0) - hat(&b.0) * hat(&a.0);
        prop_assert!((hat(&bracket(&a, &b).0) - comm).norm() < 1e-12);
    }

    #[test]
    fn connection_is_torsion_free(m in metric(), a in vec3(), b in vec3()) {
        let t = g_connection(&m, &a, &b) - g_connection(&m, &b, &a) - bracket(&a, &b);
        prop_assert!(t.norm() < 1e-12);
    }

    #[test]
    fn connection_is_metric(m in metric(), a in vec3(), b in vec3(), c in vec3()) {
        let lhs = m.inner(&g_connection(&m, &a, &b), &c) + m.inner(&b, &g_connection(&m, &a, &c));
        prop_assert!(lhs.abs() < 1e-12 * (1.0 + m.norm(&a) * m.norm(&b) * m.norm(&c)));
    }

    #[test]
    fn ad_dagger_is_metric_adjoint(m in metric(), a in vec3(), b in vec3(), c in vec3()) {
        let lhs = m.inner(&ad_dagger(&m, &a, &b), &c);
        let rhs = m.inner(&b, &bracket(&a, &c));
        prop_assert!((lhs - rhs).abs() < 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn bi_invariant_curvature(c in 0.2f64..5.0, a in vec3(), b in vec3(), s in vec3()) {
        let m = InertiaMetric::scalar(c).unwrap();
        let r = curvature(&m, &a, &b, &s);
        let expected = bracket(&bracket(&a, &b), &s) * 0.25;
        prop_assert!((r - expected).norm() < 1e-12);
    }

    #[test]
    fn exp_log_round_trip(w in rotvec()) {
        let r = exp_so3(&w);
        prop_assert!((log_so3(&r).unwrap() - w).norm() < 1e-10);
        prop_assert!((log_so3(&r).unwrap().norm() - phi(&r)).abs() < 1e-10);
        prop_assert!(r.orthonormality_defect() < 1e-14);
        prop_assert!((r.matrix().determinant() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn distance_is_left_invariant(k in rotvec(), a in rotvec(), b in rotvec()) {
        let m = InertiaMetric::identity();
        let (ra, rb) = (exp_so3(&a), exp_so3(&b));
        prop_assume!(phi(&(ra.inverse() * rb)) < std::f64::consts::PI - 0.01);
        let rk = exp_so3(&k);
        let d0 = dist_g(&m, &ra, &rb).unwrap();
        let d1 = dist_g(&m, &(rk * ra), &(rk * rb)).unwrap();
        prop_assert!((d0 - d1).abs() < 1e-12);
    }

    #[test]
    fn projection_fixes_rotations_and_repairs_drift(w in rotvec(), noise in prop::array::uniform9(-1e-6f64..1e-6)) {
        let r = exp_so3(&w);
        prop_assert!((project_orthonormal(r.matrix()).unwrap().matrix() - r.matrix()).norm() < 1e-14);
        let drifted = r.matrix() + Matrix3::from_row_slice(&noise);
        let p = project_orthonormal(&drifted).unwrap();
        prop_assert!(p.orthonormality_defect() < 1e-14);
        prop_assert!((p.matrix() - r.matrix()).norm() < 1e-5);
    }
}
