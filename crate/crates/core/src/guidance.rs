//! Integral line-of-sight (ILOS) guidance.
//!
//! The reference velocity steers from the swimmer position toward a point a
//! look-ahead distance `Δ_LOS` down the tangent line at the nearest path
//! point. The integral state `s` builds a side-slip that rejects persistent
//! lateral disturbances; its rate is attenuated for large cross-track errors.

use serde::{Deserialize, Serialize};

use crate::error::{require_non_negative, require_positive, Result};
use crate::linalg::{Mat2, Vec2};
use crate::model::gamma;
use crate::paths::{cross_track, CrossTrack, PathSpec};

/// Guidance gains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IlosParams {
    /// Convergence gain α_d (1/s).
    pub alpha_d: f64,
    /// Integral gain σ₀ (dimensionless; `s` carries length units).
    pub sigma0: f64,
    /// Look-ahead distance Δ_LOS (m).
    pub delta_los: f64,
    /// Damping of the integral state k_d (1/s).
    pub k_d: f64,
    /// Weight scale Ω₀ of the step-out constrained controller (rad/s).
    pub omega0: f64,
}

impl IlosParams {
    pub fn new(alpha_d: f64, sigma0: f64, delta_los: f64, k_d: f64, omega0: f64) -> Result<Self> {
        let p = Self {
            alpha_d,
            sigma0,
            delta_los,
            k_d,
            omega0,
        };
        p.validate()?;
        Ok(p)
    }

    /// `k_d = 0` is accepted: it switches the integral damping off, which the
    /// stability checks need to be able to represent.
    pub fn validate(&self) -> Result<()> {
        require_positive("alpha_d", self.alpha_d)?;
        require_positive("sigma0", self.sigma0)?;
        require_positive("delta_los", self.delta_los)?;
        require_non_negative("k_d", self.k_d)?;
        require_positive("omega0", self.omega0)
    }
}

/// Integral state of the guidance law.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GuidanceState {
    pub s: f64,
}

/// Reference velocity together with the geometry it was computed from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IlosReference {
    pub v_d: Vec2,
    pub cross_track: CrossTrack,
}

/// `v_d = α_d R(χ_t) [Δ_LOS, −ε − σ₀ s]ᵀ` for a known cross-track geometry.
pub fn reference_from_cross_track(ct: &CrossTrack, s: f64, params: &IlosParams) -> Vec2 {
    let local = Vec2::new(params.delta_los, -ct.epsilon - params.sigma0 * s);
    Mat2::rotation(ct.proj.chi_t).mul_vec(local) * params.alpha_d
}

/// ILOS reference velocity at `p`.
pub fn ilos_reference(
    path: &PathSpec,
    p: Vec2,
    s: f64,
    params: &IlosParams,
    hint: Option<f64>,
) -> Result<IlosReference> {
    let ct = cross_track(path, p, hint)?;
    Ok(IlosReference {
        v_d: reference_from_cross_track(&ct, s, params),
        cross_track: ct,
    })
}

/// `ṡ = −k_d s + Δ ε / ((ε + σ₀ s)² + Δ²)`.
pub fn integral_rate(epsilon: f64, s: f64, params: &IlosParams) -> f64 {
    let delta = params.delta_los;
    let shifted = epsilon + params.sigma0 * s;
    -params.k_d * s + delta * epsilon / (shifted * shifted + delta * delta)
}

/// Rate of the integral state at `p`.
pub fn integral_state_deriv(
    path: &PathSpec,
    p: Vec2,
    s: f64,
    params: &IlosParams,
    hint: Option<f64>,
) -> Result<f64> {
    let ct = cross_track(path, p, hint)?;
    Ok(integral_rate(ct.epsilon, s, params))
}

/// Unconstrained dipole command `ω_m = Γ(p) v_d`.
pub fn raw_control_for(p: Vec2, v_d: Vec2) -> Result<Vec2> {
    Ok(gamma(p)?.mul_vec(v_d))
}

/// Unconstrained dipole command following the ILOS reference at `p`.
pub fn raw_control(
    path: &PathSpec,
    p: Vec2,
    s: f64,
    params: &IlosParams,
    hint: Option<f64>,
) -> Result<Vec2> {
    let reference = ilos_reference(path, p, s, params, hint)?;
    raw_control_for(p, reference.v_d)
}
