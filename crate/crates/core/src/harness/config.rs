//! Experiment configuration: a versioned TOML file with units in key names.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::arm::{ArmTrajectoryProfile, ExternalForceEvent, JointSinusoid, LumpedArmParams, JOINTS};
use crate::control::{AttitudeCtlConfig, PidAxisGains, PidConfig, PositionCtlConfig, PpcConfig};
use crate::dynamics::{NoiseConfig, QuadParams};
use crate::envelope::{MarginConstants, PerformanceEnvelope};
use crate::error::{Error, Result};
use crate::eso::{EsoConfig, GainFunctionParams};
use crate::so3::{Mat3, Vec3};

pub const SCHEMA_VERSION: u32 = 1;

/// The shipped parameter set.
pub const DEFAULT_CONFIG_TOML: &str = include_str!("../../configs/default.toml");

type V3 = [f64; 3];

fn v(a: &V3) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    /// Control and plant step.
    pub dt_s: f64,
    pub gravity_m_per_s2: f64,
    /// Optional actuator saturation; absent means unlimited.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thrust_limit_n: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub torque_limit_n_m: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleSection {
    pub mass_base_kg: f64,
    pub mass_arm_kg: f64,
    pub inertia_diag_kg_m2: V3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainFunctionSection {
    pub w: f64,
    pub d: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PositionSection {
    pub lambda_per_s: V3,
    pub k_per_s: V3,
    pub rho0_m: V3,
    pub rho_inf_m: V3,
    pub decay_per_s: f64,
    pub c_per_s: V3,
    /// Lemma margin used by the shaping-constant check.
    pub margin_m: V3,
    pub eso_alpha_per_s: V3,
    pub eso_epsilon: V3,
    /// Assumed post-convergence observer error bound for the theorem check.
    pub assumed_delta_f_m_per_s2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttitudeSection {
    pub lambda_per_s2: V3,
    pub k_per_s2: V3,
    pub rho0: V3,
    pub rho_inf: V3,
    pub decay_per_s: f64,
    pub c_per_s: V3,
    pub margin: V3,
    pub eso_alpha_per_s: V3,
    pub eso_epsilon: V3,
    pub assumed_delta_f_rad_per_s2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PidSection {
    pub position_p_per_s: V3,
    pub velocity_p_per_s: V3,
    pub velocity_i_per_s2: V3,
    pub velocity_d: V3,
    pub velocity_i_limit_m_per_s2: V3,
    pub attitude_p_per_s: V3,
    pub rate_p_per_s: V3,
    pub rate_i_per_s2: V3,
    pub rate_d: V3,
    pub rate_i_limit_rad_per_s2: V3,
    pub max_tilt_deg: f64,
    pub derivative_cutoff_hz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub velocity_std_m_per_s: f64,
    pub omega_std_rad_per_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointSection {
    pub amplitude_rad: f64,
    pub frequency_hz: f64,
    pub phase_rad: f64,
    pub offset_rad: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmSection {
    pub equivalent_mass_kg: f64,
    pub mount_offset_m: V3,
    pub link_lengths_m: V3,
    pub servo_time_constant_s: f64,
    /// Amplitudes are rescaled per trial so the peak end-effector speed
    /// relative to the base equals this value.
    pub target_peak_speed_m_per_s: f64,
    /// Per-seed uniform jitter of joint phases (±rad) and amplitudes (±fraction).
    pub phase_jitter_rad: f64,
    pub amplitude_jitter: f64,
    pub joints: Vec<JointSection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForceSection {
    pub start_s: f64,
    pub stop_s: f64,
    pub force_body_n: V3,
    pub application_point_m: V3,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ReferenceSection {
    /// Step to `target_m` from the start position.
    Setpoint { target_m: V3, yaw_rad: f64 },
    /// `center + r[cos ωt, sin ωt, 0]`.
    Circle { center_m: V3, radius_m: f64, period_s: f64 },
    /// `center + [a_x sin 2ωt, a_y sin ωt, 0]`.
    FigureEight { center_m: V3, amplitude_x_m: f64, amplitude_y_m: f64, period_s: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub duration_s: f64,
    pub reference: ReferenceSection,
    /// Start position; defaults to the reference position at t = 0.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_m: Option<V3>,
    /// Start exactly on the reference: matching velocity and attitude.
    #[serde(default)]
    pub start_on_reference: bool,
    pub arm_swing: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub force: Option<ForceSection>,
    /// Overrides the global noise section.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub simulation: SimulationSection,
    pub vehicle: VehicleSection,
    pub gain_function: GainFunctionSection,
    pub position: PositionSection,
    pub attitude: AttitudeSection,
    pub pid: PidSection,
    pub noise: NoiseSection,
    pub arm: ArmSection,
    pub scenarios: BTreeMap<String, ScenarioSection>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig::from_toml_str(DEFAULT_CONFIG_TOML).expect("shipped config is valid")
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::ConfigInvalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("reading {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// SHA-256 of the canonical serialisation, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml_string().as_bytes()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::ConfigInvalid(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let dt = self.simulation.dt_s;
        if !(dt > 0.0 && dt <= 0.1) {
            return Err(Error::ConfigInvalid(format!("dt_s must lie in (0, 0.1], got {dt}")));
        }
        for (name, lim) in [("thrust_limit_n", self.simulation.thrust_limit_n), ("torque_limit_n_m", self.simulation.torque_limit_n_m)] {
            if let Some(l) = lim {
                if !(l > 0.0) {
                    return Err(Error::ConfigInvalid(format!("{name} must be > 0 when set")));
                }
            }
        }
        let quad = self.quad_params();
        quad.validate()?;
        self.ppc_config()?.validate()?;
        self.pid_config().validate()?;
        self.arm_params().validate(&quad)?;
        self.base_arm_profile()?.validate()?;
        for n in [self.noise].iter().chain(self.scenarios.values().filter_map(|s| s.noise.as_ref())) {
            if !(n.velocity_std_m_per_s >= 0.0 && n.omega_std_rad_per_s >= 0.0) {
                return Err(Error::ConfigInvalid("noise std must be >= 0".into()));
            }
        }
        if !(self.arm.target_peak_speed_m_per_s > 0.0) {
            return Err(Error::ConfigInvalid("arm target speed must be > 0".into()));
        }
        if !(self.arm.phase_jitter_rad >= 0.0 && (0.0..1.0).contains(&self.arm.amplitude_jitter)) {
            return Err(Error::ConfigInvalid("arm jitter must be >= 0 (amplitude jitter < 1)".into()));
        }
        for (name, sc) in &self.scenarios {
            if !(sc.duration_s > 0.0) {
                return Err(Error::ConfigInvalid(format!("scenario '{name}': duration must be > 0")));
            }
            match sc.reference {
                ReferenceSection::Circle { radius_m, period_s, .. } if !(radius_m > 0.0 && period_s > 0.0) => {
                    return Err(Error::ConfigInvalid(format!("scenario '{name}': radius and period must be > 0")));
                }
                ReferenceSection::FigureEight { period_s, .. } if !(period_s > 0.0) => {
                    return Err(Error::ConfigInvalid(format!("scenario '{name}': period must be > 0")));
                }
                _ => {}
            }
            if let Some(f) = &sc.force {
                force_event(f).validate()?;
            }
        }
        Ok(())
    }

    pub fn quad_params(&self) -> QuadParams {
        QuadParams {
            mass_base_kg: self.vehicle.mass_base_kg,
            mass_arm_kg: self.vehicle.mass_arm_kg,
            inertia: Mat3::from_diagonal(&v(&self.vehicle.inertia_diag_kg_m2)),
            gravity: self.simulation.gravity_m_per_s2,
            n: Vec3::z(),
        }
    }

    pub fn gain_function(&self) -> GainFunctionParams {
        GainFunctionParams { w: self.gain_function.w, d: self.gain_function.d }
    }

    pub fn ppc_config(&self) -> Result<PpcConfig> {
        let p = &self.position;
        let a = &self.attitude;
        let gain = self.gain_function();
        Ok(PpcConfig {
            position: PositionCtlConfig {
                lambda: v(&p.lambda_per_s),
                k: v(&p.k_per_s),
                envelope: PerformanceEnvelope::new(v(&p.rho0_m), v(&p.rho_inf_m), p.decay_per_s)?,
                c: v(&p.c_per_s),
                margin: MarginConstants { epsilon: v(&p.margin_m) },
                eso: EsoConfig { alpha_per_s: v(&p.eso_alpha_per_s), epsilon: v(&p.eso_epsilon), gain },
            },
            attitude: AttitudeCtlConfig {
                lambda: v(&a.lambda_per_s2),
                k: v(&a.k_per_s2),
                envelope: PerformanceEnvelope::new(v(&a.rho0), v(&a.rho_inf), a.decay_per_s)?,
                c: v(&a.c_per_s),
                margin: MarginConstants { epsilon: v(&a.margin) },
                eso: EsoConfig { alpha_per_s: v(&a.eso_alpha_per_s), epsilon: v(&a.eso_epsilon), gain },
            },
        })
    }

    pub fn pid_config(&self) -> PidConfig {
        let p = &self.pid;
        PidConfig {
            position_p: v(&p.position_p_per_s),
            velocity: PidAxisGains {
                p: v(&p.velocity_p_per_s),
                i: v(&p.velocity_i_per_s2),
                d: v(&p.velocity_d),
                i_limit: v(&p.velocity_i_limit_m_per_s2),
            },
            attitude_p: v(&p.attitude_p_per_s),
            rate: PidAxisGains {
                p: v(&p.rate_p_per_s),
                i: v(&p.rate_i_per_s2),
                d: v(&p.rate_d),
                i_limit: v(&p.rate_i_limit_rad_per_s2),
            },
            max_tilt_rad: p.max_tilt_deg.to_radians(),
            derivative_cutoff_hz: p.derivative_cutoff_hz,
        }
    }

    pub fn arm_params(&self) -> LumpedArmParams {
        LumpedArmParams {
            equivalent_mass_kg: self.arm.equivalent_mass_kg,
            mount_offset_m: v(&self.arm.mount_offset_m),
            link_lengths_m: self.arm.link_lengths_m,
        }
    }

    /// Joint profile before per-seed jitter and speed calibration.
    pub fn base_arm_profile(&self) -> Result<ArmTrajectoryProfile> {
        if self.arm.joints.len() != JOINTS {
            return Err(Error::ConfigInvalid(format!(
                "arm needs exactly {JOINTS} joints, got {}",
                self.arm.joints.len()
            )));
        }
        let joints = std::array::from_fn(|i| {
            let j = &self.arm.joints[i];
            JointSinusoid {
                amplitude_rad: j.amplitude_rad,
                frequency_hz: j.frequency_hz,
                phase_rad: j.phase_rad,
                offset_rad: j.offset_rad,
            }
        });
        Ok(ArmTrajectoryProfile { joints, servo_time_constant_s: self.arm.servo_time_constant_s })
    }

    pub fn noise_for(&self, scenario: &ScenarioSection) -> NoiseConfig {
        let n = scenario.noise.unwrap_or(self.noise);
        NoiseConfig { velocity_std_m_per_s: n.velocity_std_m_per_s, omega_std_rad_per_s: n.omega_std_rad_per_s }
    }

    pub fn scenario(&self, name: &str) -> Result<&ScenarioSection> {
        self.scenarios.get(name).ok_or_else(|| {
            let known: Vec<&str> = self.scenarios.keys().map(String::as_str).collect();
            Error::ConfigInvalid(format!("unknown scenario '{name}' (known: {})", known.join(", ")))
        })
    }

    /// `δ_f / ([Λ]_ii · λ_min(K))` per axis for the position and attitude loops.
    pub fn assumed_delta_over_gain(&self) -> (Vec3, Vec3) {
        let per_axis = |delta: f64, lambda: &V3, k: &V3| {
            let kmin = k.iter().cloned().fold(f64::INFINITY, f64::min);
            Vec3::from_fn(|i, _| delta / (lambda[i] * kmin))
        };
        (
            per_axis(self.position.assumed_delta_f_m_per_s2, &self.position.lambda_per_s, &self.position.k_per_s),
            per_axis(self.attitude.assumed_delta_f_rad_per_s2, &self.attitude.lambda_per_s2, &self.attitude.k_per_s2),
        )
    }
}

pub fn force_event(f: &ForceSection) -> ExternalForceEvent {
    ExternalForceEvent {
        start_s: f.start_s,
        stop_s: f.stop_s,
        force_body_n: v(&f.force_body_n),
        application_point_m: v(&f.application_point_m),
    }
}
