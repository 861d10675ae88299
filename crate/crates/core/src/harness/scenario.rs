//! Reference generators and initial conditions.

use std::f64::consts::TAU;

use super::config::{ReferenceSection, ScenarioSection};
use crate::control::{desired_attitude, ReferenceSignal};
use crate::dynamics::{QuadParams, RigidBodyState};
use crate::error::Result;
use crate::so3::Vec3;

/// Desired position, velocity and acceleration at `t`, all analytic.
pub fn reference_at(reference: &ReferenceSection, t: f64) -> ReferenceSignal {
    match *reference {
        ReferenceSection::Setpoint { target_m, yaw_rad } => ReferenceSignal {
            psi_d: yaw_rad,
            ..ReferenceSignal::hold(Vec3::from(target_m))
        },
        ReferenceSection::Circle { center_m, radius_m, period_s } => {
            let w = TAU / period_s;
            let (s, c) = (w * t).sin_cos();
            ReferenceSignal {
                p_d: Vec3::from(center_m) + Vec3::new(c, s, 0.0) * radius_m,
                dp_d: Vec3::new(-s, c, 0.0) * (radius_m * w),
                ddp_d: Vec3::new(-c, -s, 0.0) * (radius_m * w * w),
                psi_d: 0.0,
                dpsi_d: 0.0,
            }
        }
        ReferenceSection::FigureEight { center_m, amplitude_x_m: ax, amplitude_y_m: ay, period_s } => {
            let w = TAU / period_s;
            let (s2, c2) = (2.0 * w * t).sin_cos();
            let (s1, c1) = (w * t).sin_cos();
            ReferenceSignal {
                p_d: Vec3::from(center_m) + Vec3::new(ax * s2, ay * s1, 0.0),
                dp_d: Vec3::new(2.0 * w * ax * c2, w * ay * c1, 0.0),
                ddp_d: Vec3::new(-4.0 * w * w * ax * s2, -w * w * ay * s1, 0.0),
                psi_d: 0.0,
                dpsi_d: 0.0,
            }
        }
    }
}

/// True initial state of a scenario.
///
/// By default the vehicle hovers at rest at `start_m` (or at the reference
/// start). `start_on_reference` also matches the reference velocity and the
/// attitude that produces the reference acceleration.
pub fn initial_state(scenario: &ScenarioSection, quad: &QuadParams) -> Result<RigidBodyState> {
    let r0 = reference_at(&scenario.reference, 0.0);
    if scenario.start_on_reference {
        let thrust = (quad.n * quad.gravity - r0.ddp_d) * quad.total_mass();
        return Ok(RigidBodyState {
            p: r0.p_d,
            v: r0.dp_d,
            r: desired_attitude(&thrust, r0.psi_d)?,
            omega: Vec3::zeros(),
        });
    }
    Ok(RigidBodyState::at_rest(scenario.start_m.map(Vec3::from).unwrap_or(r0.p_d)))
}
