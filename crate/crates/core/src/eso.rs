//! Variable-gain extended state observers.
//!
//! For a scalar channel `ẏ1 = Δ + u` the observer keeps an auxiliary state
//! `h` and produces `Δ̂ = α g(e) / ε` with `e = y1 − h`, integrating
//! `ḣ = Δ̂ + u` with explicit Euler at the control rate. The gain `g` is
//! small near the origin (noise rejection) and tends to `e / w` for large
//! innovations (fast convergence).
//!
//! A control tick uses the observer in two halves: [`VariableGainEsoUnit::estimate`]
//! with the new measurement, then [`VariableGainEsoUnit::advance`] once the input that
//! will act over the tick is known. [`VariableGainEsoUnit::step`] runs both.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::so3::{Mat3, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainFunctionParams {
    pub w: f64,
    pub d: f64,
}

impl GainFunctionParams {
    pub fn new(w: f64, d: f64) -> Result<Self> {
        if !(w > 0.0 && d > 0.0 && w.is_finite() && d.is_finite()) {
            return Err(Error::ConfigInvalid(format!("gain function needs w, d > 0, got w={w}, d={d}")));
        }
        Ok(GainFunctionParams { w, d })
    }

    /// `g'(0) = 2 / (2w + d)`.
    pub fn slope_at_origin(&self) -> f64 {
        2.0 / (2.0 * self.w + self.d)
    }
}

/// `g(e) = e·(eᵉ + e⁻ᵉ) / (w·(eᵉ + e⁻ᵉ) + d)`.
///
/// Evaluated as `e / (w + d / (2 cosh e))`, which is algebraically identical
/// and stays finite when `cosh` overflows (the quotient then tends to `e / w`).
#[inline]
pub fn gain_g(e: f64, params: &GainFunctionParams) -> f64 {
    let s = 2.0 * e.cosh();
    e / (params.w + params.d / s)
}

/// `g'(e)`, used for the convergence-rate bound reported by the harness.
pub fn gain_g_derivative(e: f64, params: &GainFunctionParams) -> f64 {
    let s = 2.0 * e.cosh();
    let ds = 2.0 * e.sinh();
    let den = params.w * s + params.d;
    if !s.is_finite() || !den.is_finite() {
        return 1.0 / params.w;
    }
    s / den + e * params.d * ds / (den * den)
}

/// Per-axis observer tuning. Defaults are not provided here; see the
/// harness config for the shipped parameter set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EsoConfig {
    /// `α` per axis, 1/s.
    pub alpha_per_s: Vec3,
    /// `ε` per axis, in (0, 1).
    pub epsilon: Vec3,
    pub gain: GainFunctionParams,
}

impl EsoConfig {
    pub fn validate(&self) -> Result<()> {
        GainFunctionParams::new(self.gain.w, self.gain.d)?;
        for i in 0..3 {
            check_unit_params(self.alpha_per_s[i], self.epsilon[i])?;
        }
        Ok(())
    }
}

fn check_unit_params(alpha: f64, epsilon: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::ConfigInvalid(format!("ESO alpha must be > 0, got {alpha}")));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::ConfigInvalid(format!("ESO epsilon must lie in (0, 1), got {epsilon}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariableGainEsoUnit {
    pub h: f64,
    pub alpha: f64,
    pub epsilon: f64,
    pub gain: GainFunctionParams,
    pub last_error: f64,
    pub last_estimate: f64,
}

impl VariableGainEsoUnit {
    /// Observer initialised with `h(0) = y1(0)`, so the first estimate is 0.
    pub fn new(alpha: f64, epsilon: f64, gain: GainFunctionParams, y1_initial: f64) -> Result<Self> {
        check_unit_params(alpha, epsilon)?;
        GainFunctionParams::new(gain.w, gain.d)?;
        Ok(VariableGainEsoUnit { h: y1_initial, alpha, epsilon, gain, last_error: 0.0, last_estimate: 0.0 })
    }

    /// Innovation and disturbance estimate for a fresh measurement.
    #[inline]
    pub fn estimate(&mut self, y1: f64) -> f64 {
        let e = y1 - self.h;
        self.last_error = e;
        self.last_estimate = self.alpha * gain_g(e, &self.gain) / self.epsilon;
        self.last_estimate
    }

    /// `h ← h + dt·(Δ̂ + u)` using the estimate latched by [`Self::estimate`].
    #[inline]
    pub fn advance(&mut self, u: f64, dt: f64, t: f64) -> Result<()> {
        self.h += dt * (self.last_estimate + u);
        if !self.h.is_finite() {
            return Err(Error::NonFiniteState { time: t, what: "ESO auxiliary state" });
        }
        Ok(())
    }

    /// One full tick; returns the estimate computed from `y1`.
    pub fn step(&mut self, y1: f64, u: f64, dt: f64) -> Result<f64> {
        let est = self.estimate(y1);
        self.advance(u, dt, 0.0)?;
        Ok(est)
    }

    /// Upper bound on the rate at which `Δ̂` can approach a constant `Δ`:
    /// `(α/ε)·sup g'`. The supremum is taken on a fine grid over `|e| ≤ 50`.
    pub fn max_convergence_rate(&self) -> f64 {
        let sup = (0..=50_000)
            .map(|k| gain_g_derivative(k as f64 * 1e-3, &self.gain))
            .fold(0.0, f64::max);
        self.alpha / self.epsilon * sup
    }
}

/// Three independent observers, one per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EsoTriplet {
    pub units: [VariableGainEsoUnit; 3],
}

impl EsoTriplet {
    pub fn new(cfg: &EsoConfig, y1_initial: &Vec3) -> Result<Self> {
        cfg.validate()?;
        let mk = |i: usize| VariableGainEsoUnit::new(cfg.alpha_per_s[i], cfg.epsilon[i], cfg.gain, y1_initial[i]);
        Ok(EsoTriplet { units: [mk(0)?, mk(1)?, mk(2)?] })
    }

    pub fn estimate(&mut self, y1: &Vec3) -> Vec3 {
        Vec3::new(self.units[0].estimate(y1.x), self.units[1].estimate(y1.y), self.units[2].estimate(y1.z))
    }

    pub fn advance(&mut self, u: &Vec3, dt: f64, t: f64) -> Result<()> {
        for (unit, ui) in self.units.iter_mut().zip(u.iter()) {
            unit.advance(*ui, dt, t)?;
        }
        Ok(())
    }

    pub fn last_estimate(&self) -> Vec3 {
        Vec3::new(self.units[0].last_estimate, self.units[1].last_estimate, self.units[2].last_estimate)
    }

    pub fn step(&mut self, y1: &Vec3, u: &Vec3, dt: f64) -> Result<Vec3> {
        let est = self.estimate(y1);
        self.advance(u, dt, 0.0)?;
        Ok(est)
    }
}

/// `u_v = g·n − T/(m_B + m_R)` for the translational channel `v̇ = u_v + Δ_v`,
/// where `T = T·R·n` is the thrust force acting along the body axis.
#[inline]
pub fn position_eso_input(gravity: f64, n: &Vec3, thrust_force: &Vec3, total_mass: f64) -> Vec3 {
    n * gravity - thrust_force / total_mass
}

/// `u_ω = I⁻¹(τ − ω × Iω)` for the rotational channel `ω̇ = u_ω + Δ_ω`.
#[inline]
pub fn attitude_eso_input(inertia: &Mat3, inertia_inv: &Mat3, torque: &Vec3, omega: &Vec3) -> Vec3 {
    inertia_inv * (torque - omega.cross(&(inertia * omega)))
}

/// Position observer tick: measured velocity in, `Δ̂_v` out.
pub fn position_eso_step(trip: &mut EsoTriplet, v: &Vec3, u_v: &Vec3, dt: f64) -> Result<Vec3> {
    trip.step(v, u_v, dt)
}

/// Attitude observer tick: measured body rate in, `Δ̂_ω` out.
pub fn attitude_eso_step(trip: &mut EsoTriplet, omega: &Vec3, u_omega: &Vec3, dt: f64) -> Result<Vec3> {
    trip.step(omega, u_omega, dt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    const SHIPPED_GAIN: GainFunctionParams = GainFunctionParams { w: 0.5, d: 5.0 };

    /// Literal form of the gain, for comparison where it does not overflow.
    fn g_literal(e: f64, p: &GainFunctionParams) -> f64 {
        let s = e.exp() + (-e).exp();
        s / (p.w * s + p.d) * e
    }

    #[test]
    fn gain_values() {
        assert_eq!(gain_g(0.0, &SHIPPED_GAIN), 0.0);
        // mpmath: 0.4716679255348396
        assert_abs_diff_eq!(gain_g(1.0, &SHIPPED_GAIN), 0.4716679255348396, epsilon = 1e-15);
        assert_abs_diff_eq!(gain_g(100.0, &SHIPPED_GAIN), 200.0, epsilon = 1e-12);
        assert_abs_diff_eq!(gain_g(1e-8, &SHIPPED_GAIN) / 1e-8, 1.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(SHIPPED_GAIN.slope_at_origin(), 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn gain_is_overflow_safe() {
        for e in [709.0, 710.0, 800.0, 1e6, -1e6] {
            let g = gain_g(e, &SHIPPED_GAIN);
            assert!(g.is_finite());
            assert_abs_diff_eq!(g, e / SHIPPED_GAIN.w, epsilon = 1e-9 * e.abs());
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        for e in [-4.0, -1.0, 0.0, 0.3, 2.0, 3.0, 6.0] {
            let h = 1e-6;
            let fd = (gain_g(e + h, &SHIPPED_GAIN) - gain_g(e - h, &SHIPPED_GAIN)) / (2.0 * h);
            assert_abs_diff_eq!(gain_g_derivative(e, &SHIPPED_GAIN), fd, epsilon = 1e-7);
        }
    }

    proptest! {
        #[test]
        fn gain_is_odd_signed_and_bounded(e in -50.0f64..50.0, w in 0.05f64..5.0, d in 0.05f64..20.0) {
            let p = GainFunctionParams { w, d };
            let g = gain_g(e, &p);
            prop_assert_eq!(g, -gain_g(-e, &p));
            prop_assert!(g.abs() <= e.abs() / w + 1e-12);
            if e != 0.0 { prop_assert_eq!(g.signum(), e.signum()); }
            let lit = g_literal(e, &p);
            prop_assert!((g - lit).abs() <= 1e-12 * (1.0 + lit.abs()));
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(VariableGainEsoUnit::new(1.0, 1.0, SHIPPED_GAIN, 0.0).is_err());
        assert!(VariableGainEsoUnit::new(0.0, 0.5, SHIPPED_GAIN, 0.0).is_err());
        assert!(GainFunctionParams::new(0.0, 1.0).is_err());
    }

    #[test]
    fn zero_disturbance_fixed_point() {
        let mut unit = VariableGainEsoUnit::new(0.1, 0.5, SHIPPED_GAIN, 3.0).unwrap();
        for _ in 0..1000 {
            assert_eq!(unit.step(3.0, 0.0, 1e-3).unwrap(), 0.0);
        }
    }

    #[test]
    fn non_finite_state_is_reported() {
        let mut unit = VariableGainEsoUnit::new(0.1, 0.5, SHIPPED_GAIN, 0.0).unwrap();
        assert!(matches!(unit.step(0.0, f64::INFINITY, 1e-3), Err(Error::NonFiniteState { .. })));
    }

    /// Plant `ẏ = Δ + u` with a known input; `y` is integrated exactly.
    fn run_constant(alpha: f64, eps: f64, delta: f64, t_end: f64) -> Vec<(f64, f64)> {
        let dt = 1e-3;
        let mut unit = VariableGainEsoUnit::new(alpha, eps, SHIPPED_GAIN, 0.0).unwrap();
        let n = (t_end / dt).round() as usize;
        let mut out = Vec::with_capacity(n);
        for k in 0..=n {
            let t = k as f64 * dt;
            // u(t) = cos t, so y(t) = Δ t + sin t
            let y = delta * t + t.sin();
            let est = unit.estimate(y);
            out.push((t, est));
            // Euler uses u at the start of the tick; the exact plant integrates cos.
            let u_avg = ((t + dt).sin() - t.sin()) / dt;
            unit.advance(u_avg, dt, t).unwrap();
        }
        out
    }

    #[test]
    fn constant_disturbance_converges_with_attitude_gains() {
        let trace = run_constant(1.0, 0.25, 1.0, 6.0);
        let late = trace.iter().filter(|(t, _)| *t >= 4.0);
        for (_, est) in late {
            assert!((est - 1.0).abs() < 0.01, "estimate {est}");
        }
    }

    #[test]
    fn constant_disturbance_converges_slowly_with_position_gains() {
        // α/ε = 0.2 caps the contraction rate well below 1/s, so the estimate
        // lags for several seconds before settling.
        let unit = VariableGainEsoUnit::new(0.1, 0.5, SHIPPED_GAIN, 0.0).unwrap();
        let rate = unit.max_convergence_rate();
        assert!(rate < 0.6, "rate bound {rate}");
        let trace = run_constant(0.1, 0.5, 0.5, 40.0);
        let at2 = trace.iter().find(|(t, _)| *t >= 2.0).unwrap().1;
        // |Δ − Δ̂(2)| ≥ |Δ|·e^{−2·rate}
        assert!((0.5 - at2) >= 0.5 * (-2.0 * rate).exp() - 1e-9);
        let last = trace.last().unwrap().1;
        assert!((last - 0.5).abs() < 0.025, "estimate {last}");
    }

    #[test]
    fn triplet_helpers_match_channel_equations() {
        let n = Vec3::z();
        let u = position_eso_input(9.81, &n, &Vec3::new(0.0, 0.0, 7.72 * 9.81), 7.72);
        assert_abs_diff_eq!(u, Vec3::zeros(), epsilon = 1e-14);
        let inertia = Mat3::from_diagonal(&Vec3::new(0.2, 0.3, 0.4));
        let inv = inertia.try_inverse().unwrap();
        let w = Vec3::new(0.0, 0.0, 2.0);
        // principal-axis spin: no gyroscopic term
        assert_eq!(attitude_eso_input(&inertia, &inv, &Vec3::zeros(), &w), Vec3::zeros());
    }
}
