use std::f64::consts::FRAC_PI_2;

use approx::assert_relative_eq;
use eptraj::group::dist_g;
use eptraj::manipulator::{
    embed_revolute, integrate_stacked, reintegrate_controls, solve_manipulator_ocp, wrap_angle,
    ManipulatorConfig, ManipulatorSolution, ManipulatorSpec, Obstacle, RevoluteJoint, SphereJoint,
};
use eptraj::potentials::AvoidanceParams;
use eptraj::{InertiaMetric, IntegratorConfig, ShootingConfig, SpherePoint};
use nalgebra::Vector3;
use proptest::prelude::*;

fn two_joint_spec(with_obstacles: bool) -> ManipulatorSpec {
    let params = AvoidanceParams::new(0.1, 2, 0.5, 0.2).unwrap();
    let off = 0.3f64;
    ManipulatorSpec::new(
        Vector3::x(),
        vec![
            RevoluteJoint {
                axis: Vector3::z(),
                length: 1.0,
                theta_start: 0.0,
                theta_end: 1.2,
                obstacle: with_obstacles.then_some(Obstacle { at: 0.6, params }),
            },
            RevoluteJoint {
                axis: Vector3::new(0.0, 1.0, 1.0).normalize(),
                length: 0.5,
                theta_start: 0.3,
                theta_end: -0.8,
                obstacle: None,
            },
        ],
        SphereJoint {
            length: 0.3,
            start: SpherePoint::e3(),
            end: SpherePoint::new(Vector3::new(0.0, -1.0, 0.0)).unwrap(),
            obstacle: with_obstacles.then(|| Obstacle {
                at: SpherePoint::normalized(Vector3::new(
                    off.sin(),
                    -off.cos() / 2f64.sqrt(),
                    off.cos() / 2f64.sqrt(),
                ))
                .unwrap(),
                params,
            }),
        },
    )
    .unwrap()
}

fn config(parallel: bool) -> ManipulatorConfig {
    ManipulatorConfig {
        integrator: IntegratorConfig::new(1e-3, 0.0, FRAC_PI_2).unwrap(),
        shooting: ShootingConfig::default(),
        parallel,
    }
}

fn solve(spec: &ManipulatorSpec) -> ManipulatorSolution {
    solve_manipulator_ocp(spec, &config(true)).unwrap()
}

#[test]
fn obstacle_free_joints_are_linear_in_angle() {
    let spec = two_joint_spec(false);
    let sol = solve(&spec);
    assert!(sol.all_converged());
    let span = FRAC_PI_2;
    for (joint, s) in spec.joints.iter().zip(&sol.joints) {
        let rate = wrap_angle(joint.theta_end - joint.theta_start) / span;
        for (t, y) in sol.times.iter().zip(&s.states) {
            assert!((y[0] - (joint.theta_start + rate * t)).abs() < 1e-10);
            assert!((y[1] - rate).abs() < 1e-12);
        }
    }
    assert_relative_eq!(sol.sphere.xi0.0, Vector3::x(), epsilon = 1e-8);
    let controls = sol.controls.as_ref().unwrap();
    for c in controls {
        assert_relative_eq!(c.omega, Vector3::new(-1.0, 0.0, 0.0), epsilon = 1e-8);
    }
}

#[test]
fn obstacles_keep_clearance() {
    let spec = two_joint_spec(true);
    let sol = solve(&spec);
    assert!(sol.all_converged());
    let c0 = sol.joints[0].status.clearance.unwrap();
    let cs = sol.sphere.status.clearance.unwrap();
    assert!(c0 > 0.2, "joint clearance {c0}");
    assert!(cs > 0.2, "sphere clearance {cs}");
    assert!(sol.joints[1].status.clearance.is_none());
}

#[test]
fn parallel_and_sequential_agree_exactly() {
    let spec = two_joint_spec(true);
    assert_eq!(
        solve_manipulator_ocp(&spec, &config(true)).unwrap(),
        solve_manipulator_ocp(&spec, &config(false)).unwrap()
    );
}

#[test]
fn stacked_integration_matches_independent_solves() {
    let spec = two_joint_spec(true);
    let sol = solve(&spec);
    let rates: Vec<f64> = sol.joints.iter().map(|j| j.states[0][1]).collect();
    let (joints, sphere) =
        integrate_stacked(&spec, &rates, &sol.sphere.xi0, &config(false).integrator).unwrap();
    for (a, b) in joints.iter().zip(&sol.joints) {
        for (x, y) in a.iter().zip(&b.states) {
            assert!((x - y).norm() <= 1e-12);
        }
    }
    for (x, y) in sphere.iter().zip(&sol.sphere.states) {
        assert!((x.g.matrix() - y.g.matrix()).norm() <= 1e-12);
        assert!((x.xi.0 - y.xi.0).norm() <= 1e-12);
    }
}

#[test]
fn controls_reproduce_the_trajectory() {
    for obstacles in [false, true] {
        let spec = two_joint_spec(obstacles);
        let sol = solve(&spec);
        let controls = sol.controls.as_ref().unwrap();
        let h = sol.times[1] - sol.times[0];
        let (angles, points) = reintegrate_controls(&spec, controls, h).unwrap();
        for (m, (a, p)) in angles.iter().zip(&points).enumerate() {
            let k = 2 * m;
            for (i, j) in sol.joints.iter().enumerate() {
                assert!((a[i] - j.states[k][0]).abs() < 1e-6);
            }
            let q = sol.sphere.states[k].g.apply(&Vector3::z());
            assert!((p - q).norm() < 1e-6);
        }
    }
}

#[test]
fn end_effector_path_is_continuous() {
    let spec = two_joint_spec(true);
    let sol = solve(&spec);
    let path = sol.end_effector.as_ref().unwrap();
    let speed_bound = (0..sol.times.len())
        .map(|k| {
            let arm: f64 = spec
                .joints
                .iter()
                .zip(&sol.joints)
                .map(|(j, s)| j.length * s.states[k][1].abs())
                .sum();
            arm + spec.sphere.length * sol.sphere.states[k].xi.norm()
        })
        .fold(0.0, f64::max);
    let h = sol.times[1] - sol.times[0];
    for w in path.windows(2) {
        assert!((w[1] - w[0]).norm() < speed_bound * h * 1.1);
    }
}

#[test]
fn failing_subproblem_is_reported_without_discarding_the_rest() {
    let mut spec = two_joint_spec(false);
    spec.joints[1].obstacle = Some(Obstacle {
        at: 0.0,
        params: AvoidanceParams::new(50.0, 1, 1.0, 0.5).unwrap(),
    });
    let cfg = ManipulatorConfig {
        shooting: ShootingConfig {
            max_iters: 2,
            ..Default::default()
        },
        ..config(false)
    };
    let sol = solve_manipulator_ocp(&spec, &cfg).unwrap();
    assert!(sol.joints[0].status.converged);
    assert!(sol.sphere.status.converged);
    assert!(!sol.joints[1].status.converged);
    assert!(sol.joints[1].status.error.is_some());
    assert!(sol.end_effector.is_none());
}

proptest! {
    #[test]
    fn restricted_distance_is_wrapped_angle_gap(
        a in -10.0f64..10.0,
        b in -10.0f64..10.0,
        axis in prop::array::uniform3(-1.0f64..1.0),
    ) {
        let v = Vector3::from(axis);
        prop_assume!(v.norm() > 0.1);
        let v = v.normalize();
        let gap = wrap_angle(b - a).abs();
        prop_assume!(gap < std::f64::consts::PI - 1e-3);
        let d = dist_g(&InertiaMetric::identity(), &embed_revolute(a, &v), &embed_revolute(b, &v)).unwrap();
        prop_assert!((d - gap).abs() < 1e-10);
    }

    #[test]
    fn embedded_rotation_fixes_its_axis(
        th in -7.0f64..7.0,
        axis in prop::array::uniform3(-1.0f64..1.0),
    ) {
        let v = Vector3::from(axis);
        prop_assume!(v.norm() > 0.1);
        let v = v.normalize();
        prop_assert!((embed_revolute(th, &v).apply(&v) - v).norm() < 1e-14);
    }
}
