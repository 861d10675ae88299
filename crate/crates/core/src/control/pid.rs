//! Cascaded baseline: position P → velocity PID → attitude P → rate PID.
//!
//! Structured like a typical autopilot multicopter stack. Derivative terms
//! act on low-pass filtered measurements, integrators are clamped.

use serde::{Deserialize, Serialize};

use super::desired::desired_attitude;
use super::{ControlOutput, Diagnostics, ReferenceSignal};
use crate::dynamics::{ControlCommand, QuadParams, RigidBodyState};
use crate::error::{Error, Result};
use crate::so3::{error_quaternion, Mat3, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PidAxisGains {
    pub p: Vec3,
    pub i: Vec3,
    pub d: Vec3,
    /// Clamp on the magnitude of the integral contribution, per axis.
    pub i_limit: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PidConfig {
    /// Position error → velocity setpoint, 1/s.
    pub position_p: Vec3,
    /// Velocity error → acceleration setpoint.
    pub velocity: PidAxisGains,
    /// Attitude error → body-rate setpoint, 1/s.
    pub attitude_p: Vec3,
    /// Rate error → angular acceleration.
    pub rate: PidAxisGains,
    pub max_tilt_rad: f64,
    /// Cut-off of the first-order filters on the derivative terms.
    pub derivative_cutoff_hz: f64,
}

impl PidConfig {
    pub fn validate(&self) -> Result<()> {
        let gains = [
            self.position_p,
            self.velocity.p,
            self.velocity.i,
            self.velocity.d,
            self.velocity.i_limit,
            self.attitude_p,
            self.rate.p,
            self.rate.i,
            self.rate.d,
            self.rate.i_limit,
        ];
        if gains.iter().flat_map(|g| g.iter()).any(|x| !(*x >= 0.0 && x.is_finite())) {
            return Err(Error::ConfigInvalid("PID gains must be finite and non-negative".into()));
        }
        if !(self.max_tilt_rad > 0.0 && self.max_tilt_rad < std::f64::consts::FRAC_PI_2) {
            return Err(Error::ConfigInvalid("max tilt must lie in (0, pi/2)".into()));
        }
        if !(self.derivative_cutoff_hz > 0.0) {
            return Err(Error::ConfigInvalid("derivative cut-off must be > 0".into()));
        }
        Ok(())
    }
}

/// Filtered derivative of a vector signal.
#[derive(Debug, Clone)]
struct FilteredDerivative {
    alpha: f64,
    dt: f64,
    prev: Option<Vec3>,
    out: Vec3,
}

impl FilteredDerivative {
    fn new(cutoff_hz: f64, dt: f64) -> Self {
        let rc = 1.0 / (std::f64::consts::TAU * cutoff_hz);
        FilteredDerivative { alpha: dt / (dt + rc), dt, prev: None, out: Vec3::zeros() }
    }

    fn update(&mut self, x: &Vec3) -> Vec3 {
        if let Some(prev) = self.prev {
            let raw = (x - prev) / self.dt;
            self.out += (raw - self.out) * self.alpha;
        }
        self.prev = Some(*x);
        self.out
    }
}

#[derive(Debug, Clone)]
pub struct CascadedPid {
    cfg: PidConfig,
    quad: QuadParams,
    dt: f64,
    vel_integral: Vec3,
    rate_integral: Vec3,
    accel: FilteredDerivative,
    angular_accel: FilteredDerivative,
}

fn clamp_abs(v: &Vec3, limit: &Vec3) -> Vec3 {
    Vec3::from_fn(|i, _| v[i].clamp(-limit[i], limit[i]))
}

impl CascadedPid {
    pub fn new(cfg: &PidConfig, quad: &QuadParams, dt: f64) -> Result<Self> {
        cfg.validate()?;
        quad.validate()?;
        Ok(CascadedPid {
            cfg: *cfg,
            quad: *quad,
            dt,
            vel_integral: Vec3::zeros(),
            rate_integral: Vec3::zeros(),
            accel: FilteredDerivative::new(cfg.derivative_cutoff_hz, dt),
            angular_accel: FilteredDerivative::new(cfg.derivative_cutoff_hz, dt),
        })
    }

    /// Limits the angle between the thrust vector and the vertical.
    fn limit_tilt(&self, t: Vec3) -> Vec3 {
        let n = self.quad.n;
        let min_vertical = 0.1 * self.quad.hover_thrust();
        let vertical = t.dot(&n).max(min_vertical);
        let horizontal = t - n * t.dot(&n);
        let cap = vertical * self.cfg.max_tilt_rad.tan();
        let h = horizontal.norm();
        let horizontal = if h > cap { horizontal * (cap / h) } else { horizontal };
        n * vertical + horizontal
    }

    pub fn step(&mut self, _t: f64, measured: &RigidBodyState, reference: &ReferenceSignal) -> Result<ControlOutput> {
        let c = self.cfg;
        let m = self.quad.total_mass();

        let v_sp = c.position_p.component_mul(&(reference.p_d - measured.p)) + reference.dp_d;
        let v_err = v_sp - measured.v;
        self.vel_integral = clamp_abs(
            &(self.vel_integral + c.velocity.i.component_mul(&v_err) * self.dt),
            &c.velocity.i_limit,
        );
        let accel = self.accel.update(&measured.v);
        let a_sp = c.velocity.p.component_mul(&v_err) + self.vel_integral - c.velocity.d.component_mul(&accel)
            + reference.ddp_d;
        let thrust_vector = self.limit_tilt((self.quad.n * self.quad.gravity - a_sp) * m);
        let r_d = desired_attitude(&thrust_vector, reference.psi_d)?;
        let body_axis = measured.r.matrix() * self.quad.n;
        let thrust = thrust_vector.dot(&body_axis).max(0.0);

        let q = error_quaternion(&r_d.transpose().compose(&measured.r))?;
        let yaw_ff = measured.r.matrix().transpose() * (self.quad.n * reference.dpsi_d);
        let rate_sp = -2.0 * c.attitude_p.component_mul(&q.qv) + yaw_ff;
        let rate_err = rate_sp - measured.omega;
        self.rate_integral =
            clamp_abs(&(self.rate_integral + c.rate.i.component_mul(&rate_err) * self.dt), &c.rate.i_limit);
        let dw = self.angular_accel.update(&measured.omega);
        let alpha = c.rate.p.component_mul(&rate_err) + self.rate_integral - c.rate.d.component_mul(&dw);
        let inertia: Mat3 = self.quad.inertia;
        let torque = inertia * alpha + measured.omega.cross(&(inertia * measured.omega));

        Ok(ControlOutput {
            cmd: ControlCommand { thrust, torque },
            diag: Diagnostics { thrust_vector, r_d, q_err: q, ..Diagnostics::default() },
        })
    }
}
