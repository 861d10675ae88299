//! Synthetic coupling disturbances: a six-joint arm reduced to a lumped
//! end-effector mass, and timed external forces.
//!
//! The controller never sees anything in this module; it only feeds the
//! plant's `Δ_v`, `Δ_ω` channels and the ground-truth columns of the log.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::dynamics::{CouplingSample, QuadParams, RigidBodyState};
use crate::error::{Error, Result};
use crate::so3::{Mat3, Vec3};

pub const JOINTS: usize = 6;

/// Length of the force on/off ramps.
pub const FORCE_RAMP_S: f64 = 0.05;

/// Value with first and second time derivatives, for exact kinematics.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Jet2 {
    pub v: f64,
    pub d: f64,
    pub dd: f64,
}

impl Jet2 {
    pub const fn constant(v: f64) -> Self {
        Jet2 { v, d: 0.0, dd: 0.0 }
    }

    pub fn sin(self) -> Self {
        let (s, c) = self.v.sin_cos();
        Jet2 { v: s, d: c * self.d, dd: c * self.dd - s * self.d * self.d }
    }

    pub fn cos(self) -> Self {
        let (s, c) = self.v.sin_cos();
        Jet2 { v: c, d: -s * self.d, dd: -s * self.dd - c * self.d * self.d }
    }
}

impl Add for Jet2 {
    type Output = Jet2;
    fn add(self, o: Jet2) -> Jet2 {
        Jet2 { v: self.v + o.v, d: self.d + o.d, dd: self.dd + o.dd }
    }
}

impl Sub for Jet2 {
    type Output = Jet2;
    fn sub(self, o: Jet2) -> Jet2 {
        Jet2 { v: self.v - o.v, d: self.d - o.d, dd: self.dd - o.dd }
    }
}

impl Neg for Jet2 {
    type Output = Jet2;
    fn neg(self) -> Jet2 {
        Jet2 { v: -self.v, d: -self.d, dd: -self.dd }
    }
}

impl Mul for Jet2 {
    type Output = Jet2;
    fn mul(self, o: Jet2) -> Jet2 {
        Jet2 {
            v: self.v * o.v,
            d: self.d * o.v + self.v * o.d,
            dd: self.dd * o.v + 2.0 * self.d * o.d + self.v * o.dd,
        }
    }
}

impl Mul<f64> for Jet2 {
    type Output = Jet2;
    fn mul(self, k: f64) -> Jet2 {
        Jet2 { v: self.v * k, d: self.d * k, dd: self.dd * k }
    }
}

/// `offset + amplitude · sin(2π·frequency·t + phase)` for one joint.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct JointSinusoid {
    pub amplitude_rad: f64,
    pub frequency_hz: f64,
    pub phase_rad: f64,
    pub offset_rad: f64,
}

/// Commanded joint motion and the servo that tracks it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmTrajectoryProfile {
    pub joints: [JointSinusoid; JOINTS],
    /// First-order servo: `τ_s·θ̇ + θ = θ_cmd`, started at `θ(0) = θ_cmd(0)`.
    pub servo_time_constant_s: f64,
}

impl ArmTrajectoryProfile {
    /// Arm held at the given offsets.
    pub fn fixed(offsets: [f64; JOINTS], servo_time_constant_s: f64) -> Self {
        let joints = offsets.map(|o| JointSinusoid { offset_rad: o, ..Default::default() });
        ArmTrajectoryProfile { joints, servo_time_constant_s }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.servo_time_constant_s > 0.0 && self.servo_time_constant_s.is_finite()) {
            return Err(Error::ConfigInvalid("servo time constant must be > 0".into()));
        }
        for (i, j) in self.joints.iter().enumerate() {
            let finite = [j.amplitude_rad, j.frequency_hz, j.phase_rad, j.offset_rad].iter().all(|x| x.is_finite());
            if !finite || j.frequency_hz < 0.0 {
                return Err(Error::ConfigInvalid(format!("joint {i}: non-finite value or negative frequency")));
            }
        }
        Ok(())
    }

    /// Same profile with every amplitude multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        let mut out = *self;
        for j in out.joints.iter_mut() {
            j.amplitude_rad *= k;
        }
        out
    }
}

/// Angles, rates and accelerations of all joints at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct JointState {
    pub theta: [f64; JOINTS],
    pub dtheta: [f64; JOINTS],
    pub ddtheta: [f64; JOINTS],
}

impl JointState {
    fn jet(&self, i: usize) -> Jet2 {
        Jet2 { v: self.theta[i], d: self.dtheta[i], dd: self.ddtheta[i] }
    }
}

/// Servo output for one joint, in closed form.
///
/// The response to `A sin(ωt + φ)` is the phase-lagged steady sinusoid
/// `A·G·sin(ωt + φ − ϑ)` with `G = 1/√(1+(ωτ)²)`, `ϑ = atan(ωτ)`, plus the
/// transient `C·e^{−t/τ}` that makes `θ(0)` equal the command.
fn servo_joint(j: &JointSinusoid, tau: f64, t: f64) -> Jet2 {
    let w = std::f64::consts::TAU * j.frequency_hz;
    let wt = w * tau;
    let gain = 1.0 / (1.0 + wt * wt).sqrt();
    let lag = wt.atan();
    let arg = w * t + j.phase_rad - lag;
    let (s, c) = arg.sin_cos();
    let a = j.amplitude_rad * gain;
    let steady = Jet2 { v: a * s, d: a * w * c, dd: -a * w * w * s };
    let coef = j.amplitude_rad * (j.phase_rad.sin() - gain * (j.phase_rad - lag).sin());
    let decay = (-t / tau).exp();
    let transient = Jet2 { v: coef * decay, d: -coef * decay / tau, dd: coef * decay / (tau * tau) };
    steady + transient + Jet2::constant(j.offset_rad)
}

/// Joint angles, velocities and accelerations after the servo filter.
pub fn joint_state_at(profile: &ArmTrajectoryProfile, t: f64) -> JointState {
    let mut out = JointState::default();
    for (i, j) in profile.joints.iter().enumerate() {
        let q = servo_joint(j, profile.servo_time_constant_s, t.max(0.0));
        out.theta[i] = q.v;
        out.dtheta[i] = q.d;
        out.ddtheta[i] = q.dd;
    }
    out
}

/// Lumped-mass arm: one point mass at the end effector.
///
/// Forward kinematics: joint 1 yaws the arm plane about body z; joints 2, 3
/// and 5 pitch the three links inside that plane, measured from straight
/// down; joints 4 and 6 roll the wrist and do not move the point mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LumpedArmParams {
    pub equivalent_mass_kg: f64,
    /// Arm base position relative to the vehicle centre of mass, body frame.
    pub mount_offset_m: Vec3,
    /// Upper arm, forearm and wrist-to-tip lengths.
    pub link_lengths_m: [f64; 3],
}

impl LumpedArmParams {
    pub fn validate(&self, quad: &QuadParams) -> Result<()> {
        if !(self.equivalent_mass_kg >= 0.0 && self.equivalent_mass_kg <= quad.mass_arm_kg) {
            return Err(Error::ConfigInvalid("equivalent arm mass must lie in [0, m_R]".into()));
        }
        if !self.mount_offset_m.iter().all(|x| x.is_finite()) {
            return Err(Error::ConfigInvalid("arm mount offset must be finite".into()));
        }
        if !self.link_lengths_m.iter().all(|l| l.is_finite() && *l >= 0.0) {
            return Err(Error::ConfigInvalid("link lengths must be finite and non-negative".into()));
        }
        Ok(())
    }
}

/// End-effector position with its first two time derivatives, body frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EndEffectorKinematics {
    pub r: Vec3,
    pub dr: Vec3,
    pub ddr: Vec3,
}

pub fn end_effector(params: &LumpedArmParams, joints: &JointState) -> EndEffectorKinematics {
    let [l1, l2, l3] = params.link_lengths_m;
    let yaw = joints.jet(0);
    let a2 = joints.jet(1);
    let a3 = a2 + joints.jet(2);
    let a5 = a3 + joints.jet(4);
    let radial = a2.sin() * l1 + a3.sin() * l2 + a5.sin() * l3;
    let down = a2.cos() * l1 + a3.cos() * l2 + a5.cos() * l3;
    let x = radial * yaw.cos();
    let y = radial * yaw.sin();
    let m = params.mount_offset_m;
    EndEffectorKinematics {
        r: Vec3::new(m.x + x.v, m.y + y.v, m.z + down.v),
        dr: Vec3::new(x.d, y.d, down.d),
        ddr: Vec3::new(x.dd, y.dd, down.dd),
    }
}

/// Reaction of the lumped mass on the base.
///
/// `Δ_v = −(m_eq/m)·R·r̈` and `Δ_ω = I⁻¹(r × m_eq(Rᵀg·n − r̈))`: the inertial
/// reaction of the relative acceleration plus the gravity moment of the
/// offset mass. Zero mass gives exactly zero.
pub fn coupling_from_arm(
    params: &LumpedArmParams,
    joints: &JointState,
    base: &RigidBodyState,
    quad: &QuadParams,
    inertia_inv: &Mat3,
) -> CouplingSample {
    if params.equivalent_mass_kg == 0.0 {
        return CouplingSample::zero();
    }
    let ee = end_effector(params, joints);
    let m_eq = params.equivalent_mass_kg;
    let r = base.r.matrix();
    let delta_v = -(r * ee.ddr) * (m_eq / quad.total_mass());
    let gravity_body = r.transpose() * (quad.n * quad.gravity);
    let load = (gravity_body - ee.ddr) * m_eq;
    CouplingSample { delta_v, delta_omega: inertia_inv * ee.r.cross(&load) }
}

/// Peak end-effector speed relative to the base over `[0, horizon]`.
pub fn peak_end_effector_speed(profile: &ArmTrajectoryProfile, params: &LumpedArmParams, horizon: f64, dt: f64) -> f64 {
    let steps = (horizon / dt).round() as usize;
    (0..=steps)
        .map(|k| end_effector(params, &joint_state_at(profile, k as f64 * dt)).dr.norm())
        .fold(0.0, f64::max)
}

/// Amplitude scale that makes the peak end-effector speed equal `target`.
///
/// Bisection on the scale factor; the peak is monotone in it for the small
/// swings used here.
pub fn calibrate_amplitude(
    profile: &ArmTrajectoryProfile,
    params: &LumpedArmParams,
    target_speed: f64,
    horizon: f64,
) -> Result<f64> {
    let dt = 1e-3;
    let speed = |k: f64| peak_end_effector_speed(&profile.scaled(k), params, horizon, dt);
    let (mut lo, mut hi) = (0.0, 1.0);
    while speed(hi) < target_speed {
        hi *= 2.0;
        if hi > 64.0 {
            return Err(Error::ConfigInvalid(format!("arm profile cannot reach {target_speed} m/s")));
        }
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if speed(mid) < target_speed {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// A body-frame force applied over `[start, stop)` with linear ramps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExternalForceEvent {
    pub start_s: f64,
    pub stop_s: f64,
    pub force_body_n: Vec3,
    pub application_point_m: Vec3,
}

impl ExternalForceEvent {
    pub fn validate(&self) -> Result<()> {
        if !(self.stop_s > self.start_s && self.start_s >= 0.0) {
            return Err(Error::ConfigInvalid("force event needs 0 <= start < stop".into()));
        }
        Ok(())
    }

    /// Fraction of the full force applied at `t`, in `[0, 1]`.
    pub fn envelope(&self, t: f64) -> f64 {
        if t <= self.start_s || t >= self.stop_s + FORCE_RAMP_S {
            return 0.0;
        }
        let up = ((t - self.start_s) / FORCE_RAMP_S).min(1.0);
        let down = if t > self.stop_s { 1.0 - (t - self.stop_s) / FORCE_RAMP_S } else { 1.0 };
        up.min(down)
    }
}

/// `Δ_v = R·F/m`, `Δ_ω = I⁻¹(r × F)`, scaled by the ramp envelope.
pub fn external_force_coupling(
    event: &ExternalForceEvent,
    base: &RigidBodyState,
    quad: &QuadParams,
    inertia_inv: &Mat3,
    t: f64,
) -> CouplingSample {
    let k = event.envelope(t);
    if k == 0.0 {
        return CouplingSample::zero();
    }
    let f = event.force_body_n * k;
    CouplingSample {
        delta_v: base.r.matrix() * f / quad.total_mass(),
        delta_omega: inertia_inv * event.application_point_m.cross(&f),
    }
}
