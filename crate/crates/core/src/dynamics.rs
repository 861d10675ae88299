//! Ground-truth plant: quadcopter base in NED with additive coupling
//! accelerations, integrated with classical RK4.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::so3::{hat, Mat3, Rotation, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadParams {
    pub mass_base_kg: f64,
    pub mass_arm_kg: f64,
    /// Base inertia in the body frame, kg·m².
    pub inertia: Mat3,
    pub gravity: f64,
    /// Unit "down" vector `[0, 0, 1]`.
    pub n: Vec3,
}

impl QuadParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.mass_base_kg > 0.0 && self.mass_arm_kg >= 0.0) {
            return Err(Error::ConfigInvalid("masses must be positive (arm mass may be zero)".into()));
        }
        if (self.inertia - self.inertia.transpose()).amax() > 1e-12 {
            return Err(Error::ConfigInvalid("inertia must be symmetric".into()));
        }
        if self.inertia.symmetric_eigenvalues().min() <= 0.0 {
            return Err(Error::ConfigInvalid("inertia must be positive definite".into()));
        }
        if (self.n.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::ConfigInvalid("n must be a unit vector".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn total_mass(&self) -> f64 {
        self.mass_base_kg + self.mass_arm_kg
    }

    pub fn inertia_inv(&self) -> Mat3 {
        self.inertia.try_inverse().expect("validated inertia is invertible")
    }

    /// Thrust that balances gravity: `(m_B + m_R)·g`.
    pub fn hover_thrust(&self) -> f64 {
        self.total_mass() * self.gravity
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidBodyState {
    pub p: Vec3,
    pub v: Vec3,
    pub r: Rotation,
    pub omega: Vec3,
}

impl RigidBodyState {
    pub fn at_rest(p: Vec3) -> Self {
        RigidBodyState { p, v: Vec3::zeros(), r: Rotation::identity(), omega: Vec3::zeros() }
    }

    pub fn is_finite(&self) -> bool {
        self.p.iter().chain(self.v.iter()).chain(self.omega.iter()).chain(self.r.matrix().iter()).all(|x| x.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlCommand {
    pub thrust: f64,
    pub torque: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CouplingSample {
    pub delta_v: Vec3,
    pub delta_omega: Vec3,
}

impl CouplingSample {
    pub fn zero() -> Self {
        Self::default()
    }
}

impl std::ops::Add for CouplingSample {
    type Output = CouplingSample;
    fn add(self, rhs: Self) -> Self {
        CouplingSample { delta_v: self.delta_v + rhs.delta_v, delta_omega: self.delta_omega + rhs.delta_omega }
    }
}

/// Time derivative of [`RigidBodyState`]; `dr` is `Ṙ`, not a rotation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateDerivative {
    pub dp: Vec3,
    pub dv: Vec3,
    pub dr: Mat3,
    pub domega: Vec3,
}

/// Right-hand side of the base dynamics:
/// `ṗ = v`, `v̇ = −T·R·n/(m_B+m_R) + g·n + Δ_v`, `Ṙ = R[ω]×`,
/// `ω̇ = I⁻¹(τ − ω × Iω) + Δ_ω`.
pub fn derivative(
    state: &RigidBodyState,
    cmd: &ControlCommand,
    coupling: &CouplingSample,
    params: &QuadParams,
    inertia_inv: &Mat3,
) -> StateDerivative {
    let r = state.r.matrix();
    let dv = -(r * params.n) * (cmd.thrust / params.total_mass()) + params.n * params.gravity + coupling.delta_v;
    let gyro = state.omega.cross(&(params.inertia * state.omega));
    StateDerivative {
        dp: state.v,
        dv,
        dr: r * hat(&state.omega),
        domega: inertia_inv * (cmd.torque - gyro) + coupling.delta_omega,
    }
}

/// Raw state used inside RK4 stages, where `R` is not yet re-projected.
#[derive(Clone, Copy)]
struct RawState {
    p: Vec3,
    v: Vec3,
    r: Mat3,
    omega: Vec3,
}

impl RawState {
    fn offset(&self, k: &StateDerivative, h: f64) -> RawState {
        RawState { p: self.p + k.dp * h, v: self.v + k.dv * h, r: self.r + k.dr * h, omega: self.omega + k.domega * h }
    }

    fn as_state(&self) -> RigidBodyState {
        // Stage states only feed the RHS; R need not be exactly orthogonal here.
        RigidBodyState { p: self.p, v: self.v, r: Rotation::from_raw_unchecked(self.r), omega: self.omega }
    }
}

/// One classical RK4 step of length `dt` starting at time `t`.
///
/// The command is held constant over the step; the coupling is sampled at
/// `t`, `t + dt/2` and `t + dt`. `R` is re-orthonormalised afterwards.
pub fn rk4_step<F>(
    state: &RigidBodyState,
    cmd: &ControlCommand,
    coupling_fn: F,
    params: &QuadParams,
    inertia_inv: &Mat3,
    t: f64,
    dt: f64,
) -> Result<RigidBodyState>
where
    F: Fn(f64, &RigidBodyState) -> CouplingSample,
{
    if !(dt > 0.0) {
        return Err(Error::ConfigInvalid(format!("integration step must be > 0, got {dt}")));
    }
    let x0 = RawState { p: state.p, v: state.v, r: *state.r.matrix(), omega: state.omega };
    let rhs = |x: &RawState, tau: f64| {
        let s = x.as_state();
        derivative(&s, cmd, &coupling_fn(tau, &s), params, inertia_inv)
    };
    let k1 = rhs(&x0, t);
    let k2 = rhs(&x0.offset(&k1, dt / 2.0), t + dt / 2.0);
    let k3 = rhs(&x0.offset(&k2, dt / 2.0), t + dt / 2.0);
    let k4 = rhs(&x0.offset(&k3, dt), t + dt);
    let w = dt / 6.0;
    let next = RigidBodyState {
        p: x0.p + (k1.dp + 2.0 * k2.dp + 2.0 * k3.dp + k4.dp) * w,
        v: x0.v + (k1.dv + 2.0 * k2.dv + 2.0 * k3.dv + k4.dv) * w,
        r: Rotation::orthonormalized(x0.r + (k1.dr + 2.0 * k2.dr + 2.0 * k3.dr + k4.dr) * w),
        omega: x0.omega + (k1.domega + 2.0 * k2.domega + 2.0 * k3.domega + k4.domega) * w,
    };
    if !next.is_finite() {
        return Err(Error::NonFiniteState { time: t + dt, what: "plant state" });
    }
    Ok(next)
}

/// Zero-mean Gaussian sensor noise on velocity and body rate.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub velocity_std_m_per_s: f64,
    pub omega_std_rad_per_s: f64,
}

pub fn add_measurement_noise<R: Rng + ?Sized>(state: &RigidBodyState, noise: &NoiseConfig, rng: &mut R) -> RigidBodyState {
    let mut out = *state;
    if noise.velocity_std_m_per_s > 0.0 {
        let d = Normal::new(0.0, noise.velocity_std_m_per_s).expect("std is finite and positive");
        out.v += Vec3::from_fn(|_, _| d.sample(rng));
    }
    if noise.omega_std_rad_per_s > 0.0 {
        let d = Normal::new(0.0, noise.omega_std_rad_per_s).expect("std is finite and positive");
        out.omega += Vec3::from_fn(|_, _| d.sample(rng));
    }
    out
}
