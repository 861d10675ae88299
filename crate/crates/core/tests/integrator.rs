use aeroppc::dynamics::{rk4_step, ControlCommand, CouplingSample, QuadParams, RigidBodyState};
use aeroppc::so3::{Mat3, Rotation, Vec3};

fn free_body() -> QuadParams {
    QuadParams {
        mass_base_kg: 5.4,
        mass_arm_kg: 2.32,
        inertia: Mat3::from_diagonal(&Vec3::new(0.22, 0.24, 0.38)),
        gravity: 9.81,
        n: Vec3::z(),
    }
}

fn tumbling_state() -> RigidBodyState {
    RigidBodyState {
        p: Vec3::zeros(),
        v: Vec3::zeros(),
        r: Rotation::from_euler(0.3, -0.2, 1.0),
        // Mostly about the intermediate axis, so the motion is strongly nonlinear.
        omega: Vec3::new(0.4, 3.0, 0.5),
    }
}

fn angular_momentum(s: &RigidBodyState, q: &QuadParams) -> Vec3 {
    s.r.matrix() * (q.inertia * s.omega)
}

fn integrate(dt: f64, horizon: f64) -> RigidBodyState {
    let q = free_body();
    let inv = q.inertia_inv();
    let steps = (horizon / dt).round() as usize;
    let mut s = tumbling_state();
    for k in 0..steps {
        s = rk4_step(&s, &ControlCommand::default(), |_, _| CouplingSample::zero(), &q, &inv, k as f64 * dt, dt).unwrap();
    }
    s
}

#[test]
fn angular_momentum_error_is_fourth_order() {
    let q = free_body();
    let l0 = angular_momentum(&tumbling_state(), &q);
    let errs: Vec<f64> =
        [0.02, 0.01, 0.005].iter().map(|dt| (angular_momentum(&integrate(*dt, 4.0), &q) - l0).norm()).collect();
    for w in errs.windows(2) {
        let ratio = w[0] / w[1];
        assert!((11.0..22.0).contains(&ratio), "halving ratio {ratio} from {errs:?}");
    }
}

#[test]
fn rotation_stays_orthogonal_over_a_minute() {
    let q = free_body();
    let inv = q.inertia_inv();
    let dt = 1e-3;
    let mut s = tumbling_state();
    let mut worst = 0.0f64;
    for k in 0..60_000 {
        s = rk4_step(&s, &ControlCommand::default(), |_, _| CouplingSample::zero(), &q, &inv, k as f64 * dt, dt).unwrap();
        worst = worst.max(s.r.orthogonality_error());
    }
    assert!(worst < 1e-9, "‖RᵀR − I‖ reached {worst:e}");
    assert!((s.r.matrix().determinant() - 1.0).abs() < 1e-9);
}

#[test]
fn free_fall_matches_closed_form() {
    let q = free_body();
    let inv = q.inertia_inv();
    let dt = 1e-3;
    let mut s = RigidBodyState::at_rest(Vec3::zeros());
    s.v = Vec3::new(1.0, 0.0, -2.0);
    for k in 0..2000 {
        s = rk4_step(&s, &ControlCommand::default(), |_, _| CouplingSample::zero(), &q, &inv, k as f64 * dt, dt).unwrap();
    }
    let t = 2.0;
    let expect = Vec3::new(t, 0.0, -2.0 * t + 0.5 * q.gravity * t * t);
    assert!((s.p - expect).norm() < 1e-10, "{:?}", s.p);
}
