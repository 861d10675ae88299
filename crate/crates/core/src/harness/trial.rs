//! Single closed-loop trial and its fixed-schema time series.

use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{force_event, ExperimentConfig, ScenarioSection};
use super::scenario::{initial_state, reference_at};
use crate::arm::{
    calibrate_amplitude, coupling_from_arm, end_effector, external_force_coupling, joint_state_at,
    ArmTrajectoryProfile, ExternalForceEvent, LumpedArmParams,
};
use crate::control::{ControllerVariant, FlightController};
use crate::dynamics::{add_measurement_noise, rk4_step, ControlCommand, CouplingSample, QuadParams, RigidBodyState};
use crate::envelope::{rho_at, CValidation};
use crate::error::{Error, Result};
use crate::so3::{Mat3, Vec3};

/// Bumped whenever the column layout changes.
pub const TRACE_SCHEMA_VERSION: u32 = 1;

/// Column indices into a trace row.
pub mod col {
    pub const T: usize = 0;
    pub const P: usize = 1;
    pub const V: usize = 4;
    pub const R: usize = 7;
    pub const OMEGA: usize = 16;
    pub const P_D: usize = 19;
    pub const DP_D: usize = 22;
    pub const P_ERR: usize = 25;
    pub const RHO_P: usize = 28;
    pub const BETA_P: usize = 31;
    pub const Z_P: usize = 34;
    pub const S_P: usize = 37;
    pub const Q0: usize = 40;
    pub const QV: usize = 41;
    pub const RHO_Q: usize = 44;
    pub const BETA_Q: usize = 47;
    pub const Z_Q: usize = 50;
    pub const S_Q: usize = 53;
    pub const OMEGA_D: usize = 56;
    pub const THRUST: usize = 59;
    pub const TORQUE: usize = 60;
    pub const DV_TRUE: usize = 63;
    pub const DV_EFF: usize = 66;
    pub const DV_HAT: usize = 69;
    pub const DW_TRUE: usize = 72;
    pub const DW_HAT: usize = 75;
    pub const EE_SPEED: usize = 78;
    pub const COUNT: usize = 79;
}

const XYZ: [&str; 3] = ["x", "y", "z"];

/// Header names in column order.
pub fn column_names() -> Vec<String> {
    fn vec3_into(names: &mut Vec<String>, stem: &str) {
        names.extend(XYZ.iter().map(|a| format!("{stem}_{a}")));
    }
    let mut names = vec!["t".to_string()];
    for stem in ["p", "v"] {
        vec3_into(&mut names, stem);
    }
    for i in 1..=3 {
        for j in 1..=3 {
            names.push(format!("r_{i}{j}"));
        }
    }
    for stem in ["omega", "p_d", "dp_d", "p_err", "rho_p", "beta_p", "z_p", "s_p"] {
        vec3_into(&mut names, stem);
    }
    names.push("q0".into());
    for stem in ["qv", "rho_q", "beta_q", "z_q", "s_q", "omega_d"] {
        vec3_into(&mut names, stem);
    }
    names.push("thrust".into());
    for stem in ["torque", "dv_true", "dv_eff", "dv_hat", "dw_true", "dw_hat"] {
        vec3_into(&mut names, stem);
    }
    names.push("ee_speed".into());
    debug_assert_eq!(names.len(), col::COUNT);
    names
}

/// Everything about a trial that is not per-tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialMeta {
    pub trace_schema_version: u32,
    pub scenario: String,
    pub variant: ControllerVariant,
    pub seed: u64,
    pub config_hash: String,
    pub dt_s: f64,
    pub duration_s: f64,
    pub uses_eso: bool,
    pub uses_preset: bool,
    /// Amplitude scale applied to the jittered joint profile, if the arm swings.
    pub arm_amplitude_scale: Option<f64>,
    pub arm_peak_speed_m_per_s: Option<f64>,
    pub c_check_position: Option<CValidation>,
    pub c_check_attitude: Option<CValidation>,
    pub rho_inf_p: [f64; 3],
    pub rho_inf_q: [f64; 3],
    pub k_min_p: f64,
    pub k_min_q: f64,
}

/// Row-major trace plus metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub meta: TrialMeta,
    pub data: Vec<f64>,
}

fn put3(row: &mut [f64], at: usize, v: &Vec3) {
    row[at..at + 3].copy_from_slice(v.as_slice());
}

fn fmt_value(x: f64) -> String {
    // Adding +0.0 turns -0.0 into 0.0 so equal traces print identically.
    format!("{}", x + 0.0)
}

impl TrialRecord {
    pub fn rows(&self) -> usize {
        self.data.len() / col::COUNT
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * col::COUNT..(i + 1) * col::COUNT]
    }

    pub fn get(&self, i: usize, c: usize) -> f64 {
        self.data[i * col::COUNT + c]
    }

    pub fn vec3(&self, i: usize, c: usize) -> Vec3 {
        let r = self.row(i);
        Vec3::new(r[c], r[c + 1], r[c + 2])
    }

    /// SHA-256 of the little-endian bytes of every value.
    pub fn trace_sha256(&self) -> String {
        let mut h = Sha256::new();
        for x in &self.data {
            h.update(x.to_le_bytes());
        }
        hex::encode(h.finalize())
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{}", column_names().join(","))?;
        for i in 0..self.rows() {
            let line: Vec<String> = self.row(i).iter().map(|x| fmt_value(*x)).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        out.flush()
    }

    pub fn write_json<W: Write>(&self, out: W) -> std::io::Result<()> {
        let rows: Vec<&[f64]> = (0..self.rows()).map(|i| self.row(i)).collect();
        let doc = serde_json::json!({ "meta": self.meta, "columns": column_names(), "rows": rows });
        serde_json::to_writer(out, &doc).map_err(std::io::Error::other)
    }
}

/// Parses a trace written by [`TrialRecord::write_csv`]; returns the values.
pub fn read_csv_trace<R: BufRead>(input: R) -> Result<Vec<f64>> {
    let mut lines = input.lines();
    let header = lines.next().ok_or_else(|| Error::ConfigInvalid("empty trace file".into()))??;
    if header.trim_end().split(',').map(str::to_string).collect::<Vec<_>>() != column_names() {
        return Err(Error::ConfigInvalid("trace header does not match the expected column layout".into()));
    }
    let mut data = Vec::new();
    for (n, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let before = data.len();
        for field in line.trim_end().split(',') {
            let x: f64 = field
                .parse()
                .map_err(|_| Error::ConfigInvalid(format!("trace line {}: bad number '{field}'", n + 2)))?;
            data.push(x);
        }
        if data.len() - before != col::COUNT {
            return Err(Error::ConfigInvalid(format!(
                "trace line {}: expected {} fields, got {}",
                n + 2,
                col::COUNT,
                data.len() - before
            )));
        }
    }
    Ok(data)
}

/// Seed-specific arm motion: jittered, then rescaled to the target speed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmSetup {
    pub profile: ArmTrajectoryProfile,
    pub scale: Option<f64>,
    pub peak_speed: Option<f64>,
}

/// Longest window used to find the peak end-effector speed.
const CALIBRATION_HORIZON_S: f64 = 20.0;

const ARM_STREAM: u64 = 1;
const NOISE_STREAM: u64 = 2;

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn arm_setup(config: &ExperimentConfig, scenario: &ScenarioSection, seed: u64) -> Result<ArmSetup> {
    let base = config.base_arm_profile()?;
    if !scenario.arm_swing {
        return Ok(ArmSetup { profile: base.scaled(0.0), scale: None, peak_speed: None });
    }
    let mut rng = stream_rng(seed, ARM_STREAM);
    let mut profile = base;
    for j in profile.joints.iter_mut() {
        let (pj, aj) = (config.arm.phase_jitter_rad, config.arm.amplitude_jitter);
        if pj > 0.0 {
            j.phase_rad += rng.gen_range(-pj..=pj);
        }
        if aj > 0.0 {
            j.amplitude_rad *= 1.0 + rng.gen_range(-aj..=aj);
        }
    }
    let params = config.arm_params();
    let horizon = scenario.duration_s.min(CALIBRATION_HORIZON_S);
    let target = config.arm.target_peak_speed_m_per_s;
    let scale = calibrate_amplitude(&profile, &params, target, horizon)?;
    Ok(ArmSetup { profile: profile.scaled(scale), scale: Some(scale), peak_speed: Some(target) })
}

/// Ground-truth disturbance source: arm reaction plus external force.
#[derive(Debug, Clone, Copy)]
pub struct CouplingModel {
    pub arm: LumpedArmParams,
    pub profile: ArmTrajectoryProfile,
    pub force: Option<ExternalForceEvent>,
    pub quad: QuadParams,
    pub inertia_inv: Mat3,
}

impl CouplingModel {
    pub fn sample(&self, t: f64, state: &RigidBodyState) -> CouplingSample {
        let joints = joint_state_at(&self.profile, t);
        let arm = coupling_from_arm(&self.arm, &joints, state, &self.quad, &self.inertia_inv);
        match &self.force {
            Some(f) => arm + external_force_coupling(f, state, &self.quad, &self.inertia_inv, t),
            None => arm,
        }
    }

    pub fn end_effector_speed(&self, t: f64) -> f64 {
        end_effector(&self.arm, &joint_state_at(&self.profile, t)).dr.norm()
    }
}

fn saturate(cmd: ControlCommand, config: &ExperimentConfig) -> ControlCommand {
    let mut out = cmd;
    if let Some(l) = config.simulation.thrust_limit_n {
        out.thrust = out.thrust.clamp(0.0, l);
    }
    if let Some(l) = config.simulation.torque_limit_n_m {
        out.torque = out.torque.map(|x| x.clamp(-l, l));
    }
    out
}

/// Runs a named scenario from the config.
pub fn run_trial(config: &ExperimentConfig, scenario: &str, variant: ControllerVariant, seed: u64) -> Result<TrialRecord> {
    let sc = config.scenario(scenario)?;
    let arm = arm_setup(config, sc, seed)?;
    run_trial_with(config, scenario, sc, &arm, variant, seed)
}

/// Runs an explicit scenario with a prepared arm profile.
pub fn run_trial_with(
    config: &ExperimentConfig,
    name: &str,
    scenario: &ScenarioSection,
    arm: &ArmSetup,
    variant: ControllerVariant,
    seed: u64,
) -> Result<TrialRecord> {
    config.validate()?;
    let dt = config.simulation.dt_s;
    let steps = (scenario.duration_s / dt).round() as usize;
    let quad = config.quad_params();
    let inertia_inv = quad.inertia_inv();
    let ppc = config.ppc_config()?;
    let mut controller = FlightController::new(variant, &ppc, &config.pid_config(), &quad, dt)?;
    let model = CouplingModel {
        arm: config.arm_params(),
        profile: arm.profile,
        force: scenario.force.as_ref().map(force_event),
        quad,
        inertia_inv,
    };
    let noise = config.noise_for(scenario);
    let mut rng = stream_rng(seed, NOISE_STREAM);
    let (env_p, env_q) = (ppc.position.envelope, ppc.attitude.envelope);

    let mut state = initial_state(scenario, &quad)?;
    let mut data = Vec::with_capacity((steps + 1) * col::COUNT);
    let mut row = [0.0; col::COUNT];
    let m = quad.total_mass();
    for k in 0..=steps {
        let t = k as f64 * dt;
        let measured = add_measurement_noise(&state, &noise, &mut rng);
        let reference = reference_at(&scenario.reference, t);
        let out = controller.step(t, &measured, &reference).map_err(|e| match e {
            Error::NonFiniteState { what, .. } => Error::NonFiniteState { time: t, what },
            other => other,
        })?;
        let cmd = saturate(out.cmd, config);
        let d = &out.diag;
        let truth = model.sample(t, &state);
        let body_axis = state.r.matrix() * quad.n;
        let dv_eff = truth.delta_v + (d.thrust_vector - body_axis * cmd.thrust) / m;

        row[col::T] = t;
        put3(&mut row, col::P, &state.p);
        put3(&mut row, col::V, &state.v);
        for i in 0..3 {
            for j in 0..3 {
                row[col::R + 3 * i + j] = state.r.matrix()[(i, j)];
            }
        }
        put3(&mut row, col::OMEGA, &state.omega);
        put3(&mut row, col::P_D, &reference.p_d);
        put3(&mut row, col::DP_D, &reference.dp_d);
        put3(&mut row, col::P_ERR, &(state.p - reference.p_d));
        put3(&mut row, col::RHO_P, &rho_at(&env_p, t)?);
        put3(&mut row, col::BETA_P, &d.beta_p.beta);
        put3(&mut row, col::Z_P, &d.z_p);
        put3(&mut row, col::S_P, &d.s_p);
        row[col::Q0] = d.q_err.q0;
        put3(&mut row, col::QV, &d.q_err.qv);
        put3(&mut row, col::RHO_Q, &rho_at(&env_q, t)?);
        put3(&mut row, col::BETA_Q, &d.beta_q.beta);
        put3(&mut row, col::Z_Q, &d.z_q);
        put3(&mut row, col::S_Q, &d.s_q);
        put3(&mut row, col::OMEGA_D, &d.omega_d);
        row[col::THRUST] = cmd.thrust;
        put3(&mut row, col::TORQUE, &cmd.torque);
        put3(&mut row, col::DV_TRUE, &truth.delta_v);
        put3(&mut row, col::DV_EFF, &dv_eff);
        put3(&mut row, col::DV_HAT, &d.delta_hat_v);
        put3(&mut row, col::DW_TRUE, &truth.delta_omega);
        put3(&mut row, col::DW_HAT, &d.delta_hat_omega);
        row[col::EE_SPEED] = model.end_effector_speed(t);
        data.extend_from_slice(&row);

        if k < steps {
            state = rk4_step(&state, &cmd, |tau, s| model.sample(tau, s), &quad, &inertia_inv, t, dt)?;
        }
    }

    let (c_check_position, c_check_attitude) = controller.c_checks();
    let kmin = |k: &Vec3| k.min();
    Ok(TrialRecord {
        meta: TrialMeta {
            trace_schema_version: TRACE_SCHEMA_VERSION,
            scenario: name.to_string(),
            variant,
            seed,
            config_hash: config.hash(),
            dt_s: dt,
            duration_s: scenario.duration_s,
            uses_eso: !matches!(variant, ControllerVariant::NoEso | ControllerVariant::BaselinePid),
            uses_preset: !matches!(variant, ControllerVariant::NoPresetTrajectory | ControllerVariant::BaselinePid),
            arm_amplitude_scale: arm.scale,
            arm_peak_speed_m_per_s: arm.peak_speed,
            c_check_position,
            c_check_attitude,
            rho_inf_p: env_p.rho_inf.into(),
            rho_inf_q: env_q.rho_inf.into(),
            k_min_p: kmin(&ppc.position.k),
            k_min_q: kmin(&ppc.attitude.k),
        },
        data,
    })
}
