//! Rotating-dipole actuation of a helical microswimmer.
//!
//! A dipole at the origin rotating with angular velocity `ω_m` induces a
//! swimmer velocity whose direction is `Γ⁻¹(p) ω_m` and whose magnitude is the
//! step-out map `F(|ω_m|)`. Below the step-out frequency the swimmer speed is
//! proportional to the rotation rate; above it the speed collapses.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{require_positive, Error, Result};
pub use crate::linalg::{Mat2, Vec2};

/// Positions closer than this to the dipole source (meters) are rejected.
pub const POSITION_TOLERANCE: f64 = 1e-9;

/// Control inputs with smaller norm (rad/s) have no usable heading.
pub const CONTROL_TOLERANCE: f64 = 1e-14;

/// Physical constants of the swimmer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwimmerParams {
    /// Speed per unit rotation rate below step-out (m/rad).
    pub beta: f64,
    /// Step-out frequency Ω_SO (rad/s).
    pub omega_so: f64,
    /// Uniform-field velocity gain of the reduced straight-line model (m/rad).
    pub e11: f64,
}

impl SwimmerParams {
    /// Placeholder gain used by examples when no measured value is supplied.
    pub const PLACEHOLDER_BETA: f64 = 1e-4;

    pub fn new(beta: f64, omega_so: f64, e11: f64) -> Result<Self> {
        let p = Self {
            beta,
            omega_so,
            e11,
        };
        p.validate()?;
        Ok(p)
    }

    /// Builds the parameters from a step-out frequency in Hz.
    pub fn from_step_out_hz(beta: f64, f_so: f64, e11: f64) -> Result<Self> {
        Self::new(beta, TAU * f_so, e11)
    }

    pub fn validate(&self) -> Result<()> {
        require_positive("beta", self.beta)?;
        require_positive("omega_so", self.omega_so)?;
        require_positive("e11", self.e11)
    }

    /// Largest speed the dipole can induce, `β Ω_SO`.
    pub fn max_speed(&self) -> f64 {
        self.beta * self.omega_so
    }
}

impl Default for SwimmerParams {
    fn default() -> Self {
        Self {
            beta: Self::PLACEHOLDER_BETA,
            omega_so: TAU * 2.8,
            e11: 1.0,
        }
    }
}

/// Environmental disturbance velocity `d(t)` in m/s.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DisturbanceSpec {
    #[default]
    Zero,
    Constant {
        d: Vec2,
    },
    /// `amplitude · sin(2π f t + phase)`, both components in phase.
    Sinusoid {
        amplitude: Vec2,
        frequency: f64,
        phase: f64,
    },
}

impl DisturbanceSpec {
    pub fn at(&self, t: f64) -> Vec2 {
        match *self {
            DisturbanceSpec::Zero => Vec2::ZERO,
            DisturbanceSpec::Constant { d } => d,
            DisturbanceSpec::Sinusoid {
                amplitude,
                frequency,
                phase,
            } => amplitude * (TAU * frequency * t + phase).sin(),
        }
    }

    /// `sup_t |d(t)|`.
    pub fn sup_norm(&self) -> f64 {
        match *self {
            DisturbanceSpec::Zero => 0.0,
            DisturbanceSpec::Constant { d } => d.norm(),
            DisturbanceSpec::Sinusoid { amplitude, .. } => amplitude.norm(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = match *self {
            DisturbanceSpec::Zero => true,
            DisturbanceSpec::Constant { d } => d.is_finite(),
            DisturbanceSpec::Sinusoid {
                amplitude,
                frequency,
                phase,
            } => amplitude.is_finite() && frequency.is_finite() && phase.is_finite(),
        };
        if finite {
            Ok(())
        } else {
            Err(Error::InvalidParameter {
                name: "disturbance",
                reason: "components must be finite".into(),
            })
        }
    }
}

fn checked_direction(p: Vec2) -> Result<(Vec2, f64)> {
    let n2 = p.norm_squared();
    let n = n2.sqrt();
    if !(n >= POSITION_TOLERANCE) || !n.is_finite() {
        return Err(Error::DegeneratePosition { norm: n });
    }
    Ok((p, n2))
}

/// Dipole field shape matrix `Γ(p) = 3 p pᵀ/|p|² − I`.
///
/// Eigenvalue 2 along `p̂`, −1 along `p̂⊥`.
pub fn gamma(p: Vec2) -> Result<Mat2> {
    let (p, n2) = checked_direction(p)?;
    Ok(Mat2::outer(p, p).scale(3.0 / n2) - Mat2::IDENTITY)
}

/// Inverse of [`gamma`], `Γ⁻¹(p) = (3/2) p pᵀ/|p|² − I`.
pub fn gamma_inv(p: Vec2) -> Result<Mat2> {
    let (p, n2) = checked_direction(p)?;
    Ok(Mat2::outer(p, p).scale(1.5 / n2) - Mat2::IDENTITY)
}

/// Step-out speed map `F(x) = β (x − 𝟙(x² − Ω²) √(x² − Ω²))` for `x = |ω_m| ≥ 0`.
///
/// Continuous, maximal at `x = Ω_SO`, strictly decreasing beyond it and not
/// Lipschitz there.
pub fn step_out_f(x: f64, params: &SwimmerParams) -> f64 {
    let omega = params.omega_so;
    if x < omega {
        params.beta * x
    } else {
        // (x − Ω)(x + Ω) keeps the radicand accurate near the kink
        params.beta * (x - ((x - omega) * (x + omega)).sqrt())
    }
}

/// Dipole-induced swimmer velocity `w = Γ⁻¹ω / |Γ⁻¹ω| · F(|ω|)`.
pub fn dipole_velocity(p: Vec2, omega_m: Vec2, params: &SwimmerParams) -> Result<Vec2> {
    let g_inv = gamma_inv(p)?;
    let rate = omega_m.norm();
    if !(rate >= CONTROL_TOLERANCE) {
        return Err(Error::ZeroInput { norm: rate });
    }
    let heading = g_inv
        .mul_vec(omega_m)
        .unit()
        .ok_or(Error::ZeroInput { norm: rate })?;
    Ok(heading * step_out_f(rate, params))
}

/// Plant vector field `ṗ = w + d(t)`; a (near) zero command produces `w = 0`.
pub fn plant_deriv(
    t: f64,
    p: Vec2,
    omega_m: Vec2,
    disturbance: &DisturbanceSpec,
    params: &SwimmerParams,
) -> Result<Vec2> {
    let w = if omega_m.norm() < CONTROL_TOLERANCE {
        // still reject the singular position
        gamma_inv(p)?;
        Vec2::ZERO
    } else {
        dipole_velocity(p, omega_m, params)?
    };
    Ok(w + disturbance.at(t))
}
