//! Desired paths, nearest-point projection and cross-track geometry.
//!
//! Every path carries a travel direction (increasing `τ`). The cross-track
//! error is positive when the point lies to the left of that direction.

use std::f64::consts::{FRAC_PI_2, TAU};
use std::fmt;
use std::sync::Arc;

use crate::error::{require_positive, Error, Result};
use crate::linalg::{wrap_angle, Vec2};

/// Points this close to a circle center (relative to the radius) have no
/// well-defined projection.
pub const CENTER_TOLERANCE: f64 = 1e-9;

const GRID_SAMPLES: usize = 256;
const NEWTON_ITERATIONS: usize = 30;

pub type CurveFn = Arc<dyn Fn(f64) -> Vec2 + Send + Sync>;

/// A regular planar curve `τ ↦ p_d(τ)` on `[tau_min, tau_max]`.
#[derive(Clone)]
pub struct ParametricCurve {
    pub point: CurveFn,
    pub derivative: CurveFn,
    pub tau_min: f64,
    pub tau_max: f64,
    /// Closed curve with `p_d(tau_min) = p_d(tau_max)`.
    pub periodic: bool,
}

impl fmt::Debug for ParametricCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ParametricCurve")
            .field("tau_min", &self.tau_min)
            .field("tau_max", &self.tau_max)
            .field("periodic", &self.periodic)
            .finish_non_exhaustive()
    }
}

impl ParametricCurve {
    pub fn new(
        point: impl Fn(f64) -> Vec2 + Send + Sync + 'static,
        derivative: impl Fn(f64) -> Vec2 + Send + Sync + 'static,
        tau_min: f64,
        tau_max: f64,
        periodic: bool,
    ) -> Result<Self> {
        if !(tau_min < tau_max) || !tau_min.is_finite() || !tau_max.is_finite() {
            return Err(Error::InvalidParameter {
                name: "domain",
                reason: format!("need finite tau_min < tau_max, got [{tau_min}, {tau_max}]"),
            });
        }
        let curve = Self {
            point: Arc::new(point),
            derivative: Arc::new(derivative),
            tau_min,
            tau_max,
            periodic,
        };
        // regularity on the sampling grid
        for k in 0..=GRID_SAMPLES {
            let tau = tau_min + (tau_max - tau_min) * k as f64 / GRID_SAMPLES as f64;
            let d = (curve.derivative)(tau);
            if !(d.norm() > 0.0) || !d.is_finite() {
                return Err(Error::InvalidParameter {
                    name: "derivative",
                    reason: format!("curve is not regular at tau = {tau}"),
                });
            }
        }
        Ok(curve)
    }

    /// Axis-aligned ellipse traversed counterclockwise, `τ ∈ [0, 2π)`.
    pub fn ellipse(center: Vec2, semi_x: f64, semi_y: f64) -> Result<Self> {
        require_positive("semi_x", semi_x)?;
        require_positive("semi_y", semi_y)?;
        Self::new(
            move |t| center + Vec2::new(semi_x * t.cos(), semi_y * t.sin()),
            move |t| Vec2::new(-semi_x * t.sin(), semi_y * t.cos()),
            0.0,
            TAU,
            true,
        )
    }

    fn period(&self) -> f64 {
        self.tau_max - self.tau_min
    }

    /// Maps `tau` into the domain for closed curves; open curves are returned as is.
    fn reduce(&self, tau: f64) -> f64 {
        if self.periodic {
            self.tau_min + (tau - self.tau_min).rem_euclid(self.period())
        } else {
            tau
        }
    }

    fn in_domain(&self, tau: f64) -> bool {
        let slack = 1e-12 * self.period().max(1.0);
        self.periodic || (tau >= self.tau_min - slack && tau <= self.tau_max + slack)
    }
}

/// A desired path.
#[derive(Debug, Clone)]
pub enum PathSpec {
    /// Line through the origin with heading `theta_r`; `p_d(τ) = τ (cos θ_r, sin θ_r)`.
    StraightLine { theta_r: f64 },
    /// Counterclockwise circle; `p_d(τ) = c + R (cos τ, sin τ)`.
    Circle { center: Vec2, radius: f64 },
    Parametric(ParametricCurve),
}

/// Nearest point on a path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub tau_star: f64,
    pub foot: Vec2,
    /// Tangent heading at the foot, in `(-π, π]`.
    pub chi_t: f64,
    pub distance: f64,
}

/// Cross-track geometry of a point relative to a path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossTrack {
    /// Signed distance, positive to the left of the travel direction (m).
    pub epsilon: f64,
    /// Bearing of the point seen from the foot minus the tangent heading, in `(-π, π]`.
    pub delta_theta: f64,
    pub proj: Projection,
}

impl PathSpec {
    pub fn circle(center: Vec2, radius: f64) -> Result<Self> {
        require_positive("radius", radius)?;
        if !center.is_finite() {
            return Err(Error::InvalidParameter {
                name: "center",
                reason: "must be finite".into(),
            });
        }
        Ok(PathSpec::Circle { center, radius })
    }

    pub fn line(theta_r: f64) -> Result<Self> {
        if !theta_r.is_finite() {
            return Err(Error::InvalidParameter {
                name: "theta_r",
                reason: "must be finite".into(),
            });
        }
        Ok(PathSpec::StraightLine { theta_r })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PathSpec::StraightLine { theta_r } => Self::line(*theta_r).map(|_| ()),
            PathSpec::Circle { center, radius } => Self::circle(*center, *radius).map(|_| ()),
            PathSpec::Parametric(_) => Ok(()),
        }
    }

    /// Path point `p_d(τ)`.
    pub fn point(&self, tau: f64) -> Vec2 {
        match self {
            PathSpec::StraightLine { theta_r } => Vec2::from_angle(*theta_r) * tau,
            PathSpec::Circle { center, radius } => *center + Vec2::from_angle(tau) * *radius,
            PathSpec::Parametric(c) => (c.point)(c.reduce(tau)),
        }
    }

    /// Path velocity `p_d′(τ)`.
    pub fn derivative(&self, tau: f64) -> Vec2 {
        match self {
            PathSpec::StraightLine { theta_r } => Vec2::from_angle(*theta_r),
            PathSpec::Circle { radius, .. } => Vec2::from_angle(tau).perp() * *radius,
            PathSpec::Parametric(c) => (c.derivative)(c.reduce(tau)),
        }
    }

    /// Parameter period of a closed path.
    pub fn period(&self) -> Option<f64> {
        match self {
            PathSpec::StraightLine { .. } => None,
            PathSpec::Circle { .. } => Some(TAU),
            PathSpec::Parametric(c) => c.periodic.then(|| c.period()),
        }
    }
}

/// Tangent heading `χ_t(τ)` wrapped to `(-π, π]`.
pub fn tangent_angle(path: &PathSpec, tau: f64) -> Result<f64> {
    match path {
        PathSpec::StraightLine { theta_r } => Ok(wrap_angle(*theta_r)),
        PathSpec::Circle { .. } => Ok(wrap_angle(tau + FRAC_PI_2)),
        PathSpec::Parametric(c) => {
            if !c.in_domain(tau) {
                return Err(Error::OutOfDomain {
                    tau,
                    min: c.tau_min,
                    max: c.tau_max,
                });
            }
            Ok(wrap_angle(path.derivative(tau).angle()))
        }
    }
}

/// Nearest path point to `p`.
///
/// With a `hint` (typically the previous `τ*` along a trajectory) the local
/// minimizer closest to the hint is returned and closed paths report `τ*`
/// unwrapped next to the hint, so `τ*` evolves continuously.
pub fn nearest_param(path: &PathSpec, p: Vec2, hint: Option<f64>) -> Result<Projection> {
    if !p.is_finite() {
        return Err(Error::IllDefinedProjection("non-finite point".into()));
    }
    let tau = match path {
        PathSpec::StraightLine { theta_r } => p.dot(Vec2::from_angle(*theta_r)),
        PathSpec::Circle { center, radius } => {
            let r = p - *center;
            if r.norm() < CENTER_TOLERANCE * radius {
                return Err(Error::IllDefinedProjection(
                    "point coincides with the circle center".into(),
                ));
            }
            let theta = r.angle();
            match hint {
                Some(h) => unwrap_near(theta, h, TAU),
                None => theta,
            }
        }
        PathSpec::Parametric(curve) => nearest_on_curve(path, curve, p, hint)?,
    };
    projection_at(path, p, tau)
}

fn projection_at(path: &PathSpec, p: Vec2, tau: f64) -> Result<Projection> {
    let foot = path.point(tau);
    Ok(Projection {
        tau_star: tau,
        foot,
        chi_t: tangent_angle(path, tau)?,
        distance: (p - foot).norm(),
    })
}

/// The representative of `tau + k·period` closest to `hint`.
fn unwrap_near(tau: f64, hint: f64, period: f64) -> f64 {
    tau + period * ((hint - tau) / period).round()
}

/// Signed cross-track error `ε = |p − p_d(τ*)| sin(Δθ)`.
pub fn cross_track(path: &PathSpec, p: Vec2, hint: Option<f64>) -> Result<CrossTrack> {
    let proj = nearest_param(path, p, hint)?;
    Ok(cross_track_from(p, proj))
}

/// Cross-track error relative to an already computed projection.
pub fn cross_track_from(p: Vec2, proj: Projection) -> CrossTrack {
    let offset = p - proj.foot;
    let delta_theta = wrap_angle(offset.angle() - proj.chi_t);
    CrossTrack {
        epsilon: proj.distance * delta_theta.sin(),
        delta_theta,
        proj,
    }
}

fn dist2(path: &PathSpec, p: Vec2, tau: f64) -> f64 {
    (p - path.point(tau)).norm_squared()
}

/// `g(τ) = (p − p_d(τ))·p_d′(τ)`, which is `−½ d/dτ |p − p_d(τ)|²`.
fn stationarity(path: &PathSpec, p: Vec2, tau: f64) -> f64 {
    (p - path.point(tau)).dot(path.derivative(tau))
}

fn nearest_on_curve(
    path: &PathSpec,
    curve: &ParametricCurve,
    p: Vec2,
    hint: Option<f64>,
) -> Result<f64> {
    let span = curve.period();
    let n = GRID_SAMPLES;
    let step = if curve.periodic {
        span / n as f64
    } else {
        span / (n - 1) as f64
    };
    let taus: Vec<f64> = (0..n).map(|k| curve.tau_min + step * k as f64).collect();
    let d2: Vec<f64> = taus.iter().map(|&t| dist2(path, p, t)).collect();

    // discrete local minima of the sampled squared distance
    let mut seeds = Vec::new();
    for k in 0..n {
        let (prev, next) = if curve.periodic {
            (Some(d2[(k + n - 1) % n]), Some(d2[(k + 1) % n]))
        } else {
            (
                (k > 0).then(|| d2[k - 1]),
                (k + 1 < n).then(|| d2[k + 1]),
            )
        };
        let left_ok = prev.map_or(true, |v| d2[k] <= v);
        let right_ok = next.map_or(true, |v| d2[k] < v);
        if left_ok && right_ok {
            seeds.push(k);
        }
    }
    if seeds.is_empty() {
        // flat sampled profile (e.g. concentric point): fall back to the best sample
        let best = (0..n)
            .min_by(|&a, &b| d2[a].total_cmp(&d2[b]))
            .unwrap_or(0);
        seeds.push(best);
    }

    let mut candidates: Vec<(f64, f64)> = Vec::with_capacity(seeds.len());
    for k in seeds {
        let lo = taus[k] - step;
        let hi = taus[k] + step;
        let (lo, hi) = if curve.periodic {
            (lo, hi)
        } else {
            (lo.max(curve.tau_min), hi.min(curve.tau_max))
        };
        let tau = refine(path, p, taus[k], lo, hi);
        let tau = curve.reduce(tau);
        let d = dist2(path, p, tau);
        let duplicate = candidates.iter().any(|&(t, _)| {
            let gap = (t - tau).abs();
            let gap = if curve.periodic { gap.min(span - gap) } else { gap };
            gap < 1e-9 * span
        });
        if !duplicate {
            candidates.push((tau, d));
        }
    }

    match hint {
        Some(h) => {
            let pick = candidates
                .iter()
                .map(|&(t, _)| {
                    let t = if curve.periodic { unwrap_near(t, h, span) } else { t };
                    (t, (t - h).abs())
                })
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .map(|(t, _)| t);
            pick.ok_or_else(|| Error::IllDefinedProjection("no local minimizer found".into()))
        }
        None => {
            let best = candidates
                .iter()
                .map(|&(_, d)| d)
                .fold(f64::INFINITY, f64::min);
            let tol = 1e-9 * best + 1e-30;
            let tied: Vec<f64> = candidates
                .iter()
                .filter(|&&(_, d)| d - best <= tol)
                .map(|&(t, _)| t)
                .collect();
            if tied.len() > 1 {
                return Err(Error::AmbiguousProjection { count: tied.len() });
            }
            tied.first()
                .copied()
                .ok_or_else(|| Error::IllDefinedProjection("no local minimizer found".into()))
        }
    }
}

/// Root of `g(τ) = 0` inside `[lo, hi]`.
///
/// When `g` changes sign over the bracket (the usual case around a sampled
/// minimum) Newton steps are safeguarded by bisection. Otherwise the squared
/// distance is minimized by golden-section search and polished by Newton.
fn refine(path: &PathSpec, p: Vec2, start: f64, lo: f64, hi: f64) -> f64 {
    let h_fd = 1e-6 * (hi - lo).max(1e-12);
    let slope = |tau: f64| {
        // g′(τ) = −|p_d′|² + (p − p_d)·p_d″, with p_d″ by central differences
        let d1 = path.derivative(tau);
        let d2 = (path.derivative(tau + h_fd) - path.derivative(tau - h_fd)) * (0.5 / h_fd);
        -d1.norm_squared() + (p - path.point(tau)).dot(d2)
    };
    let g_lo = stationarity(path, p, lo);
    let g_hi = stationarity(path, p, hi);
    if !(g_lo > 0.0 && g_hi < 0.0) {
        let mut tau = golden_section(path, p, lo, hi);
        for _ in 0..8 {
            let dg = slope(tau);
            if !(dg < 0.0) {
                break;
            }
            let cand = tau - stationarity(path, p, tau) / dg;
            if cand < lo || cand > hi || dist2(path, p, cand) > dist2(path, p, tau) {
                break;
            }
            tau = cand;
        }
        return tau;
    }
    let (mut a, mut b) = (lo, hi);
    let mut tau = start.clamp(lo, hi);
    for _ in 0..NEWTON_ITERATIONS + 60 {
        let g = stationarity(path, p, tau);
        if g == 0.0 {
            return tau;
        }
        if g > 0.0 {
            a = tau;
        } else {
            b = tau;
        }
        let dg = slope(tau);
        let mut next = tau - g / dg;
        if !(dg < 0.0) || !(next > a && next < b) {
            next = 0.5 * (a + b);
        }
        if (next - tau).abs() <= 2.0 * f64::EPSILON * tau.abs().max(1.0) {
            return next;
        }
        tau = next;
    }
    tau
}

fn golden_section(path: &PathSpec, p: Vec2, mut a: f64, mut b: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = dist2(path, p, c);
    let mut fd = dist2(path, p, d);
    for _ in 0..200 {
        if (b - a).abs() <= 1e-15 * (a.abs() + b.abs()).max(1.0) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = dist2(path, p, c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = dist2(path, p, d);
        }
    }
    0.5 * (a + b)
}

/// Half of a closed path's period, used to flag discontinuous jumps of `τ*`.
pub fn half_period(path: &PathSpec) -> f64 {
    path.period().map_or(f64::INFINITY, |t| 0.5 * t)
}
