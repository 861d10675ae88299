//! Flight controllers: the prescribed-performance law with its two ablations,
//! and a cascaded PID baseline, behind one stepping interface.

mod desired;
mod pid;
mod ppc;

use serde::{Deserialize, Serialize};

pub use desired::{desired_angular_velocity, desired_attitude, DesiredAttitudeHistory, FD_STENCIL_LEN};
pub use pid::{CascadedPid, PidAxisGains, PidConfig};
pub use ppc::{
    attitude_control, position_control, AttitudeCtlConfig, AttitudeLawOutput, PositionCtlConfig, PositionLawOutput,
    PpcConfig, PpcController,
};

use crate::dynamics::{ControlCommand, QuadParams, RigidBodyState};
use crate::envelope::{BetaSample, CValidation};
use crate::error::{Error, Result};
use crate::so3::{ErrorQuaternion, Rotation, Vec3};

/// Desired position with analytic derivatives, and desired yaw.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ReferenceSignal {
    pub p_d: Vec3,
    pub dp_d: Vec3,
    pub ddp_d: Vec3,
    pub psi_d: f64,
    pub dpsi_d: f64,
}

impl ReferenceSignal {
    pub fn hold(p: Vec3) -> Self {
        ReferenceSignal { p_d: p, ..Default::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControllerVariant {
    Proposed,
    NoPresetTrajectory,
    NoEso,
    BaselinePid,
}

impl ControllerVariant {
    /// Table order.
    pub const ALL: [ControllerVariant; 4] = [
        ControllerVariant::Proposed,
        ControllerVariant::NoPresetTrajectory,
        ControllerVariant::NoEso,
        ControllerVariant::BaselinePid,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ControllerVariant::Proposed => "proposed",
            ControllerVariant::NoPresetTrajectory => "no-preset",
            ControllerVariant::NoEso => "no-eso",
            ControllerVariant::BaselinePid => "pid",
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            ControllerVariant::Proposed => "Proposed",
            ControllerVariant::NoPresetTrajectory => "Without preset trajectory",
            ControllerVariant::NoEso => "Without ESO",
            ControllerVariant::BaselinePid => "Cascaded PID",
        }
    }
}

impl std::str::FromStr for ControllerVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "proposed" | "ppc" => Ok(ControllerVariant::Proposed),
            "no-preset" | "no-preset-trajectory" | "nopreset" => Ok(ControllerVariant::NoPresetTrajectory),
            "no-eso" | "noeso" => Ok(ControllerVariant::NoEso),
            "pid" | "baseline-pid" => Ok(ControllerVariant::BaselinePid),
            other => Err(Error::ConfigInvalid(format!("unknown controller variant '{other}'"))),
        }
    }
}

/// Per-tick internals, logged next to the plant state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    pub thrust_vector: Vec3,
    pub r_d: Rotation,
    pub omega_d: Vec3,
    pub q_err: ErrorQuaternion,
    pub z_p: Vec3,
    pub s_p: Vec3,
    pub z_q: Vec3,
    pub s_q: Vec3,
    pub beta_p: BetaSample,
    pub beta_q: BetaSample,
    /// Observer outputs, whether or not the law uses them.
    pub delta_hat_v: Vec3,
    pub delta_hat_omega: Vec3,
}

impl Default for Diagnostics {
    fn default() -> Self {
        Diagnostics {
            thrust_vector: Vec3::zeros(),
            r_d: Rotation::identity(),
            omega_d: Vec3::zeros(),
            q_err: ErrorQuaternion::identity(),
            z_p: Vec3::zeros(),
            s_p: Vec3::zeros(),
            z_q: Vec3::zeros(),
            s_q: Vec3::zeros(),
            beta_p: BetaSample::zero(),
            beta_q: BetaSample::zero(),
            delta_hat_v: Vec3::zeros(),
            delta_hat_omega: Vec3::zeros(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutput {
    pub cmd: ControlCommand,
    pub diag: Diagnostics,
}

/// One controller instance per trial.
#[derive(Debug, Clone)]
pub enum FlightController {
    Ppc(Box<PpcController>),
    Pid(Box<CascadedPid>),
}

impl FlightController {
    pub fn new(variant: ControllerVariant, ppc: &PpcConfig, pid: &PidConfig, quad: &QuadParams, dt: f64) -> Result<Self> {
        Ok(match variant {
            ControllerVariant::BaselinePid => FlightController::Pid(Box::new(CascadedPid::new(pid, quad, dt)?)),
            ControllerVariant::Proposed => FlightController::Ppc(Box::new(PpcController::new(ppc, quad, dt, true, true)?)),
            ControllerVariant::NoEso => FlightController::Ppc(Box::new(PpcController::new(ppc, quad, dt, false, true)?)),
            ControllerVariant::NoPresetTrajectory => {
                FlightController::Ppc(Box::new(PpcController::new(ppc, quad, dt, true, false)?))
            }
        })
    }

    /// Shaping-constant checks of the prescribed-performance variants,
    /// available after the first tick.
    pub fn c_checks(&self) -> (Option<CValidation>, Option<CValidation>) {
        match self {
            FlightController::Ppc(c) => {
                let (p, q) = c.c_checks();
                (p.copied(), q.copied())
            }
            FlightController::Pid(_) => (None, None),
        }
    }

    /// Computes the command for tick time `t` from the measured state.
    pub fn step(&mut self, t: f64, measured: &RigidBodyState, reference: &ReferenceSignal) -> Result<ControlOutput> {
        match self {
            FlightController::Ppc(c) => c.step(t, measured, reference),
            FlightController::Pid(c) => c.step(t, measured, reference),
        }
    }
}
