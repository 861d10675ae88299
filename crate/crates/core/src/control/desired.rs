//! Desired attitude from the thrust vector, and its rate by finite differences.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::so3::{vee_skew_part, Mat3, Rotation, Vec3};

/// Samples used by the backward-difference stencil.
pub const FD_STENCIL_LEN: usize = 5;

/// Below this norm the thrust or yaw direction is treated as undefined.
const DIRECTION_EPS: f64 = 1e-6;

/// Attitude whose thrust axis is `T_vec` and whose heading follows `psi_d`.
///
/// `b3 = T/‖T‖`, `b2 = b3 × a / ‖b3 × a‖` with `a = [cos ψ, sin ψ, 0]`,
/// `b1 = b2 × b3`; the result has `b1, b2, b3` as columns so `R_d·n = b3`.
pub fn desired_attitude(thrust_vector: &Vec3, psi_d: f64) -> Result<Rotation> {
    let t = thrust_vector.norm();
    if !(t > DIRECTION_EPS) {
        return Err(Error::DegenerateThrust(t));
    }
    let b3 = thrust_vector / t;
    let a = Vec3::new(psi_d.cos(), psi_d.sin(), 0.0);
    let c = b3.cross(&a);
    let cn = c.norm();
    if !(cn > DIRECTION_EPS) {
        return Err(Error::YawAlignmentSingularity);
    }
    let b2 = c / cn;
    let b1 = b2.cross(&b3);
    let m = Mat3::from_columns(&[b1, b2, b3]);
    Ok(Rotation::from_matrix(m).unwrap_or_else(|| Rotation::orthonormalized(m)))
}

/// Backward derivative of the newest sample, fourth order:
/// `(25f₀ − 48f₋₁ + 36f₋₂ − 16f₋₃ + 3f₋₄) / 12h`.
fn backward_derivative<T>(samples: &VecDeque<T>, dt: f64) -> T
where
    T: Copy + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T>,
{
    let n = samples.len();
    let f = |k: usize| samples[n - 1 - k];
    (f(0) * 25.0 + f(1) * -48.0 + f(2) * 36.0 + f(3) * -16.0 + f(4) * 3.0) * (1.0 / (12.0 * dt))
}

/// `ω_d = (R_dᵀ Ṙ_d)∨` for the newest entry of an oldest-first history.
pub fn desired_angular_velocity(history: &VecDeque<Mat3>, dt: f64) -> Result<Vec3> {
    if history.len() < FD_STENCIL_LEN {
        return Err(Error::InsufficientHistory { have: history.len(), need: FD_STENCIL_LEN });
    }
    let r_d = history[history.len() - 1];
    let dr_d = backward_derivative(history, dt);
    Ok(vee_skew_part(&(r_d.transpose() * dr_d)))
}

/// Rolling window of desired attitudes and desired rates.
#[derive(Debug, Clone)]
pub struct DesiredAttitudeHistory {
    dt: f64,
    r_d: VecDeque<Mat3>,
    omega_d: VecDeque<Vec3>,
}

impl DesiredAttitudeHistory {
    pub fn new(dt: f64) -> Self {
        DesiredAttitudeHistory {
            dt,
            r_d: VecDeque::with_capacity(FD_STENCIL_LEN),
            omega_d: VecDeque::with_capacity(FD_STENCIL_LEN),
        }
    }

    /// Records this tick's `R_d` and returns `(ω_d, ω̇_d)`.
    ///
    /// Both are zero until the stencil has enough samples.
    pub fn push(&mut self, r_d: &Rotation) -> (Vec3, Vec3) {
        if self.r_d.len() == FD_STENCIL_LEN {
            self.r_d.pop_front();
        }
        self.r_d.push_back(*r_d.matrix());
        let omega_d = match desired_angular_velocity(&self.r_d, self.dt) {
            Ok(w) => w,
            Err(_) => return (Vec3::zeros(), Vec3::zeros()),
        };
        if self.omega_d.len() == FD_STENCIL_LEN {
            self.omega_d.pop_front();
        }
        self.omega_d.push_back(omega_d);
        let domega_d =
            if self.omega_d.len() == FD_STENCIL_LEN { backward_derivative(&self.omega_d, self.dt) } else { Vec3::zeros() };
        (omega_d, domega_d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    use crate::so3::det3;

    #[test]
    fn hover_thrust_gives_identity() {
        let r = desired_attitude(&Vec3::new(0.0, 0.0, 75.73), 0.0).unwrap();
        assert_eq!(*r.matrix(), Mat3::identity());
    }

    #[test]
    fn third_column_is_thrust_direction() {
        let t = Vec3::new(1.0, -2.0, 9.0);
        let r = desired_attitude(&t, 0.7).unwrap();
        assert_abs_diff_eq!(r.matrix().column(2).into_owned(), t.normalize(), epsilon = 1e-15);
    }

    #[test]
    fn degenerate_inputs_are_rejected() {
        assert!(matches!(desired_attitude(&Vec3::zeros(), 0.0), Err(Error::DegenerateThrust(_))));
        assert!(matches!(
            desired_attitude(&Vec3::new(1.0, 0.0, 0.0), 0.0),
            Err(Error::YawAlignmentSingularity)
        ));
    }

    #[test]
    fn constant_attitude_has_zero_rate() {
        let mut h = DesiredAttitudeHistory::new(1e-3);
        let r = Rotation::from_euler(0.1, 0.2, 0.3);
        for _ in 0..12 {
            let (w, dw) = h.push(&r);
            assert!(w.amax() < 1e-12 && dw.amax() < 1e-9);
        }
    }

    #[test]
    fn startup_reports_insufficient_history() {
        let mut q = VecDeque::new();
        q.push_back(Mat3::identity());
        assert!(matches!(
            desired_angular_velocity(&q, 1e-3),
            Err(Error::InsufficientHistory { have: 1, need: 5 })
        ));
    }

    #[test]
    fn constant_spin_about_z() {
        let dt = 1e-3;
        let mut h = DesiredAttitudeHistory::new(dt);
        let mut out = (Vec3::zeros(), Vec3::zeros());
        for k in 0..20 {
            out = h.push(&Rotation::from_axis_angle(&Vec3::z(), 0.5 * k as f64 * dt));
        }
        assert_abs_diff_eq!(out.0, Vec3::new(0.0, 0.0, 0.5), epsilon = 1e-4);
        assert!(out.1.amax() < 1e-6);
    }

    /// Rate error at one time for a non-uniform tumble, sampled at spacing `dt`.
    fn tumble_rate_error(dt: f64) -> f64 {
        // R(t) = Rz(0.8 t) · Rx(0.6 sin t); body rate by the analytic product rule.
        let r_at = |t: f64| {
            Rotation::from_axis_angle(&Vec3::z(), 0.8 * t).compose(&Rotation::from_axis_angle(&Vec3::x(), 0.6 * t.sin()))
        };
        let t_end = 1.0;
        let mut q = VecDeque::new();
        for k in (0..FD_STENCIL_LEN).rev() {
            q.push_back(*r_at(t_end - k as f64 * dt).matrix());
        }
        let w = desired_angular_velocity(&q, dt).unwrap();
        let rx = Rotation::from_axis_angle(&Vec3::x(), 0.6 * t_end.sin());
        let exact = rx.transpose().matrix() * Vec3::new(0.0, 0.0, 0.8) + Vec3::new(0.6 * t_end.cos(), 0.0, 0.0);
        (w - exact).norm()
    }

    #[test]
    fn stencil_error_is_fourth_order() {
        let e1 = tumble_rate_error(0.02);
        let e2 = tumble_rate_error(0.01);
        let ratio = e1 / e2;
        assert!((12.0..20.0).contains(&ratio), "ratio {ratio}, errors {e1} {e2}");
    }

    proptest! {
        #[test]
        fn output_is_a_rotation(
            tx in -20.0..20.0f64, ty in -20.0..20.0f64, tz in 1.0..90.0f64, psi in -3.1..3.1f64,
        ) {
            let r = desired_attitude(&Vec3::new(tx, ty, tz), psi).unwrap();
            prop_assert!(r.orthogonality_error() < 1e-9);
            prop_assert!((det3(r.matrix()) - 1.0).abs() < 1e-9);
        }
    }
}
