//! Prescribed-performance position and attitude laws with observer
//! compensation.

use serde::{Deserialize, Serialize};

use super::desired::{desired_attitude, DesiredAttitudeHistory};
use super::{ControlOutput, Diagnostics, ReferenceSignal};
use crate::dynamics::{ControlCommand, QuadParams, RigidBodyState};
use crate::envelope::{
    beta_at, validate_c, BetaSample, CValidation, MarginConstants, PerformanceEnvelope, PresetTrajectory,
};
use crate::error::{Error, Result};
use crate::eso::{attitude_eso_input, position_eso_input, EsoConfig, EsoTriplet};
use crate::so3::{error_quaternion, hat, q_matrix, q_matrix_inverse, ErrorQuaternion, Mat3, Rotation, Vec3};

fn check_positive(name: &str, v: &Vec3) -> Result<()> {
    if v.iter().all(|x| *x > 0.0 && x.is_finite()) {
        Ok(())
    } else {
        Err(Error::ConfigInvalid(format!("{name} must be positive on every axis, got {v:?}")))
    }
}

/// Translational loop tuning. `lambda` and `k` are the diagonals of `Λ_p`, `K_p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PositionCtlConfig {
    pub lambda: Vec3,
    pub k: Vec3,
    pub envelope: PerformanceEnvelope,
    pub c: Vec3,
    pub margin: MarginConstants,
    pub eso: EsoConfig,
}

/// Rotational loop tuning. `lambda` and `k` are the diagonals of `Λ_q`, `K_q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttitudeCtlConfig {
    pub lambda: Vec3,
    pub k: Vec3,
    pub envelope: PerformanceEnvelope,
    pub c: Vec3,
    pub margin: MarginConstants,
    pub eso: EsoConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PpcConfig {
    pub position: PositionCtlConfig,
    pub attitude: AttitudeCtlConfig,
}

impl PpcConfig {
    pub fn validate(&self) -> Result<()> {
        let p = &self.position;
        check_positive("position lambda", &p.lambda)?;
        check_positive("position k", &p.k)?;
        check_positive("position c", &p.c)?;
        p.envelope.validate()?;
        p.eso.validate()?;
        let a = &self.attitude;
        check_positive("attitude lambda", &a.lambda)?;
        check_positive("attitude k", &a.k)?;
        check_positive("attitude c", &a.c)?;
        a.envelope.validate()?;
        a.eso.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionLawOutput {
    pub thrust_vector: Vec3,
    pub z: Vec3,
    pub dz: Vec3,
    pub s: Vec3,
}

/// Thrust vector `T = m(g·n + Δ̂_v − p̈_d − β̈ + Λż + K·s)` with
/// `z = p̃ − β`, `s = ż + Λz`.
pub fn position_control(
    state: &RigidBodyState,
    reference: &ReferenceSignal,
    cfg: &PositionCtlConfig,
    quad: &QuadParams,
    delta_hat: &Vec3,
    beta: &BetaSample,
) -> PositionLawOutput {
    let z = (state.p - reference.p_d) - beta.beta;
    let dz = (state.v - reference.dp_d) - beta.dbeta;
    let s = dz + cfg.lambda.component_mul(&z);
    let acc = quad.n * quad.gravity + delta_hat - reference.ddp_d - beta.ddbeta
        + cfg.lambda.component_mul(&dz)
        + cfg.k.component_mul(&s);
    PositionLawOutput { thrust_vector: acc * quad.total_mass(), z, dz, s }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttitudeLawOutput {
    pub torque: Vec3,
    pub q: ErrorQuaternion,
    pub z: Vec3,
    pub dz: Vec3,
    pub s: Vec3,
}

/// Error quaternion of `R̃ = R_dᵀR` and its vector-part rate `q̇v = ½Q·ω̃`,
/// with `ω̃ = ω − R̃ᵀω_d`.
pub(crate) fn attitude_error(r: &Rotation, r_d: &Rotation, omega: &Vec3, omega_d: &Vec3) -> Result<AttitudeError> {
    let r_err = r_d.transpose().compose(r);
    let q = error_quaternion(&r_err)?;
    let omega_d_body = r_err.transpose().matrix() * omega_d;
    let omega_err = omega - omega_d_body;
    let qm = q_matrix(&q);
    Ok(AttitudeError { r_err, q, qm, omega_d_body, omega_err, dqv: 0.5 * (qm * omega_err) })
}

pub(crate) struct AttitudeError {
    r_err: Rotation,
    q: ErrorQuaternion,
    qm: Mat3,
    omega_d_body: Vec3,
    omega_err: Vec3,
    dqv: Vec3,
}

/// Torque `τ = 2I·Q⁻¹(−f − ½Q·Δ̂_ω + β̈ − Λż − K·s)`.
///
/// `f = ½Q̇ω̃ − ½Q·I⁻¹(ω × Iω) + ½Q([ω̃]×R̃ᵀω_d − R̃ᵀω̇_d)` collects the known
/// terms of `q̈v`, so that `ṡ = −K·s + ½Q(Δ_ω − Δ̂_ω)` in closed loop.
#[allow(clippy::too_many_arguments)]
pub fn attitude_control(
    state: &RigidBodyState,
    r_d: &Rotation,
    omega_d: &Vec3,
    domega_d: &Vec3,
    cfg: &AttitudeCtlConfig,
    quad: &QuadParams,
    inertia_inv: &Mat3,
    delta_hat: &Vec3,
    beta: &BetaSample,
) -> Result<AttitudeLawOutput> {
    let err = attitude_error(&state.r, r_d, &state.omega, omega_d)?;
    let (q, qm, w_err) = (err.q, err.qm, err.omega_err);
    let dq0 = -0.5 * q.qv.dot(&w_err);
    let dqm = Mat3::identity() * dq0 + hat(&err.dqv);
    let gyro = inertia_inv * state.omega.cross(&(quad.inertia * state.omega));
    let transport = hat(&w_err) * err.omega_d_body - err.r_err.transpose().matrix() * domega_d;
    let f = 0.5 * (dqm * w_err) - 0.5 * (qm * gyro) + 0.5 * (qm * transport);

    let z = q.qv - beta.beta;
    let dz = err.dqv - beta.dbeta;
    let s = dz + cfg.lambda.component_mul(&z);
    let inner = -f - 0.5 * (qm * delta_hat) + beta.ddbeta - cfg.lambda.component_mul(&dz) - cfg.k.component_mul(&s);
    let torque = 2.0 * (quad.inertia * (q_matrix_inverse(&q)? * inner));
    Ok(AttitudeLawOutput { torque, q, z, dz, s })
}

/// Stateful controller: observers, preset trajectories and the `R_d` history.
#[derive(Debug, Clone)]
pub struct PpcController {
    cfg: PpcConfig,
    quad: QuadParams,
    inertia_inv: Mat3,
    dt: f64,
    use_eso: bool,
    use_preset: bool,
    t0: Option<f64>,
    eso_v: Option<EsoTriplet>,
    eso_w: Option<EsoTriplet>,
    preset_p: Option<PresetTrajectory>,
    preset_q: Option<PresetTrajectory>,
    check_p: Option<CValidation>,
    check_q: Option<CValidation>,
    history: DesiredAttitudeHistory,
}

impl PpcController {
    /// `use_eso = false` zeroes `Δ̂` in both laws (the observers still run
    /// and are logged); `use_preset = false` forces `β ≡ 0`.
    pub fn new(cfg: &PpcConfig, quad: &QuadParams, dt: f64, use_eso: bool, use_preset: bool) -> Result<Self> {
        cfg.validate()?;
        quad.validate()?;
        if !(dt > 0.0) {
            return Err(Error::ConfigInvalid(format!("control step must be > 0, got {dt}")));
        }
        Ok(PpcController {
            cfg: *cfg,
            quad: *quad,
            inertia_inv: quad.inertia_inv(),
            dt,
            use_eso,
            use_preset,
            t0: None,
            eso_v: None,
            eso_w: None,
            preset_p: None,
            preset_q: None,
            check_p: None,
            check_q: None,
            history: DesiredAttitudeHistory::new(dt),
        })
    }

    pub fn preset_position(&self) -> Option<&PresetTrajectory> {
        self.preset_p.as_ref()
    }

    pub fn preset_attitude(&self) -> Option<&PresetTrajectory> {
        self.preset_q.as_ref()
    }

    /// Lemma check of the shaping constants against the measured initial
    /// errors; available after the first tick when the preset is in use.
    pub fn c_checks(&self) -> (Option<&CValidation>, Option<&CValidation>) {
        (self.check_p.as_ref(), self.check_q.as_ref())
    }

    fn build_preset(&self, err0: Vec3, rate0: Vec3, c: Vec3, env: &PerformanceEnvelope) -> Result<PresetTrajectory> {
        if self.use_preset {
            PresetTrajectory::from_initial_error(err0, rate0, c, env.decay)
        } else {
            Ok(PresetTrajectory::zero(c, env.decay))
        }
    }

    pub fn step(&mut self, t: f64, measured: &RigidBodyState, reference: &ReferenceSignal) -> Result<ControlOutput> {
        let first = self.t0.is_none();
        let t0 = *self.t0.get_or_insert(t);
        let tau = t - t0;
        let (pc, ac) = (self.cfg.position, self.cfg.attitude);

        if first {
            self.eso_v = Some(EsoTriplet::new(&pc.eso, &measured.v)?);
            self.eso_w = Some(EsoTriplet::new(&ac.eso, &measured.omega)?);
            let traj =
                self.build_preset(measured.p - reference.p_d, measured.v - reference.dp_d, pc.c, &pc.envelope)?;
            if self.use_preset {
                self.check_p = Some(validate_c(&traj, &pc.envelope, &pc.margin, None)?);
            }
            self.preset_p = Some(traj);
        }
        let dhat_v = self.eso_v.as_mut().expect("initialised on first tick").estimate(&measured.v);
        let dhat_w = self.eso_w.as_mut().expect("initialised on first tick").estimate(&measured.omega);
        let (use_v, use_w) = if self.use_eso { (dhat_v, dhat_w) } else { (Vec3::zeros(), Vec3::zeros()) };

        let beta_p = beta_at(self.preset_p.as_ref().expect("initialised on first tick"), tau);
        let pos = position_control(measured, reference, &pc, &self.quad, &use_v, &beta_p);
        let r_d = desired_attitude(&pos.thrust_vector, reference.psi_d)?;
        let (omega_d, domega_d) = self.history.push(&r_d);

        if first {
            let err = attitude_error(&measured.r, &r_d, &measured.omega, &omega_d)?;
            let traj = self.build_preset(err.q.qv, err.dqv, ac.c, &ac.envelope)?;
            if self.use_preset {
                self.check_q = Some(validate_c(&traj, &ac.envelope, &ac.margin, None)?);
            }
            self.preset_q = Some(traj);
        }
        let beta_q = beta_at(self.preset_q.as_ref().expect("initialised on first tick"), tau);
        let att =
            attitude_control(measured, &r_d, &omega_d, &domega_d, &ac, &self.quad, &self.inertia_inv, &use_w, &beta_q)?;

        let cmd = ControlCommand { thrust: pos.thrust_vector.norm(), torque: att.torque };
        let thrust_force = measured.r.matrix() * self.quad.n * cmd.thrust;
        let u_v = position_eso_input(self.quad.gravity, &self.quad.n, &thrust_force, self.quad.total_mass());
        let u_w = attitude_eso_input(&self.quad.inertia, &self.inertia_inv, &cmd.torque, &measured.omega);
        self.eso_v.as_mut().expect("initialised on first tick").advance(&u_v, self.dt, t)?;
        self.eso_w.as_mut().expect("initialised on first tick").advance(&u_w, self.dt, t)?;

        if !(cmd.thrust.is_finite() && cmd.torque.iter().all(|x| x.is_finite())) {
            return Err(Error::NonFiniteState { time: t, what: "control command" });
        }
        Ok(ControlOutput {
            cmd,
            diag: Diagnostics {
                thrust_vector: pos.thrust_vector,
                r_d,
                omega_d,
                q_err: att.q,
                z_p: pos.z,
                s_p: pos.s,
                z_q: att.z,
                s_q: att.s,
                beta_p,
                beta_q,
                delta_hat_v: dhat_v,
                delta_hat_omega: dhat_w,
            },
        })
    }
}
