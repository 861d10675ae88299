//! Performance envelopes `ρ(t)` and preset error trajectories `β(t)`.
//!
//! The envelope decays exponentially from `ρ0` to `ρ∞`. The preset
//! trajectory starts exactly at the measured initial error and its rate, then
//! decays inside the envelope when the shaping constant `c` is large enough
//! (see [`validate_c`]). All derivatives are closed-form because the control
//! laws consume `β̈` every tick.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::so3::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerformanceEnvelope {
    pub rho0: Vec3,
    pub rho_inf: Vec3,
    /// Decay rate `l` in 1/s.
    pub decay: f64,
}

impl PerformanceEnvelope {
    pub fn new(rho0: Vec3, rho_inf: Vec3, decay: f64) -> Result<Self> {
        let env = PerformanceEnvelope { rho0, rho_inf, decay };
        env.validate()?;
        Ok(env)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.decay > 0.0 && self.decay.is_finite()) {
            return Err(Error::ConfigInvalid(format!("envelope decay must be > 0, got {}", self.decay)));
        }
        for i in 0..3 {
            let (r0, ri) = (self.rho0[i], self.rho_inf[i]);
            if !(r0 > ri && ri > 0.0 && r0.is_finite()) {
                return Err(Error::ConfigInvalid(format!(
                    "envelope axis {i}: need rho0 > rho_inf > 0, got rho0={r0}, rho_inf={ri}"
                )));
            }
        }
        Ok(())
    }
}

/// `ρ(t) = (ρ0 − ρ∞)e^{−lt} + ρ∞`, componentwise.
pub fn rho_at(env: &PerformanceEnvelope, t: f64) -> Result<Vec3> {
    if t < 0.0 {
        return Err(Error::NegativeTime(t));
    }
    let decay = (-env.decay * t).exp();
    Ok((env.rho0 - env.rho_inf) * decay + env.rho_inf)
}

/// `ρ̇(t) = −l(ρ0 − ρ∞)e^{−lt}`.
pub fn rho_dot_at(env: &PerformanceEnvelope, t: f64) -> Result<Vec3> {
    if t < 0.0 {
        return Err(Error::NegativeTime(t));
    }
    Ok((env.rho0 - env.rho_inf) * (-env.decay * (-env.decay * t).exp()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PresetTrajectory {
    /// `β(0)`, equal to the initial error.
    pub beta0: Vec3,
    /// `β̇(0)`, equal to the initial error rate.
    pub rate0: Vec3,
    /// `b = l·ξ̃(0) + ξ̃̇(0)`.
    pub b: Vec3,
    pub c: Vec3,
    pub decay: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaSample {
    pub beta: Vec3,
    pub dbeta: Vec3,
    pub ddbeta: Vec3,
}

impl BetaSample {
    pub fn zero() -> Self {
        BetaSample { beta: Vec3::zeros(), dbeta: Vec3::zeros(), ddbeta: Vec3::zeros() }
    }
}

impl PresetTrajectory {
    /// Seeds the trajectory from the (measured) initial error and its rate.
    pub fn from_initial_error(err0: Vec3, err_rate0: Vec3, c: Vec3, decay: f64) -> Result<Self> {
        if !(decay > 0.0) {
            return Err(Error::ConfigInvalid(format!("preset decay must be > 0, got {decay}")));
        }
        if c.iter().any(|ci| !(*ci > 0.0)) {
            return Err(Error::ConfigInvalid(format!("preset shaping c must be > 0, got {c:?}")));
        }
        Ok(PresetTrajectory { beta0: err0, rate0: err_rate0, b: err0 * decay + err_rate0, c, decay })
    }

    /// `β(t) ≡ 0`, used by the ablation that drops the preset trajectory.
    pub fn zero(c: Vec3, decay: f64) -> Self {
        PresetTrajectory { beta0: Vec3::zeros(), rate0: Vec3::zeros(), b: Vec3::zeros(), c, decay }
    }
}

/// `β_i(t) = β_i(0)e^{−lt} + (b_i/c_i)(1 − e^{−c_i t})e^{−lt}` with its
/// first and second time derivatives.
pub fn beta_at(traj: &PresetTrajectory, t: f64) -> BetaSample {
    let l = traj.decay;
    let e_l = (-l * t).exp();
    let mut out = BetaSample::zero();
    for i in 0..3 {
        let (b0, r0, b, c) = (traj.beta0[i], traj.rate0[i], traj.b[i], traj.c[i]);
        let e_c = (-c * t).exp();
        let k = b / c;
        let one_minus = 1.0 - e_c;
        out.beta[i] = b0 * e_l + k * one_minus * e_l;
        // Grouped so that t = 0 returns the stored rate exactly.
        out.dbeta[i] = (r0 * e_c - l * one_minus * (b0 + k)) * e_l;
        out.ddbeta[i] =
            l * l * b0 * e_l - b * (c + 2.0 * l) * e_c * e_l + l * l * k * one_minus * e_l;
    }
    out
}

/// Per-axis margins `ε_i` of the containment lemma.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginConstants {
    pub epsilon: Vec3,
}

impl MarginConstants {
    /// Checks `0 < ε_i < min{ρ∞_i, ρ0_i − |ξ̃_i(0)|}`.
    pub fn check(&self, env: &PerformanceEnvelope, traj: &PresetTrajectory) -> Result<()> {
        for i in 0..3 {
            let cap = env.rho_inf[i].min(env.rho0[i] - traj.beta0[i].abs());
            if !(self.epsilon[i] > 0.0 && self.epsilon[i] < cap) {
                return Err(Error::ConfigInvalid(format!(
                    "margin axis {i}: need 0 < eps < {cap}, got {}",
                    self.epsilon[i]
                )));
            }
        }
        Ok(())
    }
}

/// Lower bounds on the shaping constant `c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CValidation {
    /// `|b_i| / (ρ0_i − |ξ̃_i(0)| − ε_i)`.
    pub lemma_c_min: Vec3,
    /// Same with `ε_i` replaced by `δ_f / ([Λ]_ii λ_min(K))`.
    pub theorem_c_min: Option<Vec3>,
    pub lemma_ok: [bool; 3],
    pub theorem_ok: Option<[bool; 3]>,
}

impl CValidation {
    pub fn all_ok(&self) -> bool {
        self.lemma_ok.iter().all(|x| *x) && self.theorem_ok.is_none_or(|ok| ok.iter().all(|x| *x))
    }
}

fn c_lower_bound(traj: &PresetTrajectory, env: &PerformanceEnvelope, margin: &Vec3) -> Result<Vec3> {
    let mut out = Vec3::zeros();
    for i in 0..3 {
        let slack = env.rho0[i] - traj.beta0[i].abs() - margin[i];
        if !(slack > 0.0) {
            return Err(Error::InfeasibleEnvelope { axis: i, slack });
        }
        out[i] = traj.b[i].abs() / slack;
    }
    Ok(out)
}

/// Minimum admissible `c` per axis for the containment lemma and, when
/// `delta_over_gain` is supplied, for the closed-loop theorem variant.
pub fn validate_c(
    traj: &PresetTrajectory,
    env: &PerformanceEnvelope,
    margins: &MarginConstants,
    delta_over_gain: Option<&Vec3>,
) -> Result<CValidation> {
    let lemma_c_min = c_lower_bound(traj, env, &margins.epsilon)?;
    let lemma_ok = std::array::from_fn(|i| traj.c[i] > lemma_c_min[i]);
    let theorem_c_min = delta_over_gain.map(|d| c_lower_bound(traj, env, d)).transpose()?;
    let theorem_ok = theorem_c_min.map(|m| std::array::from_fn(|i| traj.c[i] > m[i]));
    Ok(CValidation { lemma_c_min, theorem_c_min, lemma_ok, theorem_ok })
}

/// Uniform time grid `0, dt, 2dt, …, horizon`.
#[derive(Debug, Clone, Copy)]
pub struct TimeGrid {
    pub dt: f64,
    pub horizon: f64,
}

impl TimeGrid {
    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        let n = (self.horizon / self.dt).round() as usize;
        (0..=n).map(move |k| k as f64 * self.dt)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContainmentViolation {
    pub t: f64,
    pub axis: usize,
    pub beta: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContainmentReport {
    pub holds: bool,
    pub first_violation: Option<ContainmentViolation>,
}

/// Checks `|β_i(t)| < ρ_i(t) − ε_i` on every grid point.
pub fn containment_check(
    traj: &PresetTrajectory,
    env: &PerformanceEnvelope,
    margins: &MarginConstants,
    grid: &TimeGrid,
) -> ContainmentReport {
    for t in grid.iter() {
        let beta = beta_at(traj, t).beta;
        // t comes from a non-negative grid
        let rho = rho_at(env, t).expect("grid time is non-negative");
        for i in 0..3 {
            let bound = rho[i] - margins.epsilon[i];
            if !(beta[i].abs() < bound) {
                return ContainmentReport {
                    holds: false,
                    first_violation: Some(ContainmentViolation { t, axis: i, beta: beta[i], bound }),
                };
            }
        }
    }
    ContainmentReport { holds: true, first_violation: None }
}
