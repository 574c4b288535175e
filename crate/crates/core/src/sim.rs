//! Fixed-step closed-loop simulation.
//!
//! The joint state `(p, s)` is advanced with classical RK4. Controls are
//! recomputed at every stage; the projection hint for all four stages is the
//! `τ*` of the state at the start of the step.

use serde::{Deserialize, Serialize};

use crate::error::{require_positive, Error, Result};
use crate::guidance::{integral_rate, reference_from_cross_track, IlosParams};
use crate::linalg::Vec2;
use crate::model::{gamma, plant_deriv, DisturbanceSpec, SwimmerParams};
use crate::ods::ods_solve;
use crate::paths::{cross_track, PathSpec};
use crate::stability::{reduced_error_deriv, ErrorState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Controller {
    /// `ω = Γ(p) v_d`
    Raw,
    /// Step-out constrained optimum.
    Ods,
    /// Reduced `(ε, s, z)` model along a straight path.
    Reduced,
    /// Idealized plant `ṗ = e₁₁(v_d − d̂) + d` without the dipole map.
    Uniform,
}

/// Disturbance estimate `d̂` fed to the controller.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimate {
    #[default]
    Zero,
    /// The true `d(t)`.
    Perfect,
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub dt: f64,
    pub duration: f64,
    pub initial_p: Vec2,
    pub initial_s: f64,
    pub controller: Controller,
    pub path: PathSpec,
    pub ilos: IlosParams,
    pub swimmer: SwimmerParams,
    pub disturbance: DisturbanceSpec,
    pub estimate: Estimate,
    pub seed: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        require_positive("dt", self.dt)?;
        require_positive("duration", self.duration)?;
        if self.dt >= self.duration {
            return Err(Error::InvalidParameter {
                name: "dt",
                reason: format!("must be smaller than duration {}", self.duration),
            });
        }
        if !self.initial_p.is_finite() || !self.initial_s.is_finite() {
            return Err(Error::InvalidParameter {
                name: "initial_state",
                reason: "must be finite".into(),
            });
        }
        self.path.validate()?;
        self.ilos.validate()?;
        self.swimmer.validate()?;
        self.disturbance.validate()?;
        if self.controller == Controller::Reduced && !matches!(self.path, PathSpec::StraightLine { .. }) {
            return Err(Error::InvalidParameter {
                name: "controller",
                reason: "the reduced model is defined for straight-line paths".into(),
            });
        }
        Ok(())
    }

    /// Step-size guards; violations are advisory.
    pub fn step_warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.dt * self.ilos.alpha_d >= 0.1 {
            out.push(format!(
                "dt·alpha_d = {:.3e} is not below 0.1",
                self.dt * self.ilos.alpha_d
            ));
        }
        if self.dt * self.swimmer.omega_so >= 0.5 {
            out.push(format!(
                "dt·omega_so = {:.3e} is not below 0.5",
                self.dt * self.swimmer.omega_so
            ));
        }
        out
    }

    pub fn record_count(&self) -> usize {
        (self.duration / self.dt + 1e-9).floor() as usize + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub t: f64,
    pub p: Vec2,
    pub s: f64,
    pub omega: Vec2,
    pub speed: f64,
    pub eps: f64,
    pub tau: f64,
    pub omega_norm: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub records: Vec<Record>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&Record> {
        self.records.last()
    }

    pub fn max_omega(&self) -> f64 {
        self.records.iter().fold(0.0, |m, r| m.max(r.omega_norm))
    }

    /// Time average of `|ṗ|` by the trapezoid rule.
    pub fn mean_speed(&self) -> f64 {
        let r = &self.records;
        if r.len() < 2 {
            return r.first().map_or(0.0, |x| x.speed);
        }
        let area: f64 = r
            .windows(2)
            .map(|w| 0.5 * (w[0].speed + w[1].speed) * (w[1].t - w[0].t))
            .sum();
        area / (r[r.len() - 1].t - r[0].t)
    }

    /// `sup_t |p(t) − q(t)|` over the common prefix.
    pub fn max_deviation(&self, other: &Trajectory) -> f64 {
        self.records
            .iter()
            .zip(&other.records)
            .fold(0.0, |m, (a, b)| m.max((a.p - b.p).norm()))
    }
}

/// A run that stopped early; `partial` holds every record produced.
#[derive(Debug, Clone, PartialEq)]
pub struct SimAbort {
    pub time: f64,
    pub error: Error,
    pub partial: Trajectory,
}

impl std::fmt::Display for SimAbort {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "simulation aborted at t = {}: {}", self.time, self.error)
    }
}

impl std::error::Error for SimAbort {}

struct Eval {
    pdot: Vec2,
    sdot: f64,
    omega: Vec2,
    eps: f64,
    tau: f64,
}

fn closed_loop(cfg: &SimConfig, t: f64, p: Vec2, s: f64, hint: Option<f64>) -> Result<Eval> {
    let ct = cross_track(&cfg.path, p, hint)?;
    let v_d = reference_from_cross_track(&ct, s, &cfg.ilos);
    let sdot = integral_rate(ct.epsilon, s, &cfg.ilos);
    let d = cfg.disturbance.at(t);
    let d_hat = match cfg.estimate {
        Estimate::Zero => Vec2::ZERO,
        Estimate::Perfect => d,
    };
    let (omega, pdot) = match cfg.controller {
        Controller::Raw => {
            let omega = gamma(p)?.mul_vec(v_d);
            (omega, plant_deriv(t, p, omega, &cfg.disturbance, &cfg.swimmer)?)
        }
        Controller::Ods => {
            let omega = ods_solve(p, v_d, d_hat, cfg.ilos.omega0, cfg.swimmer.omega_so)?.omega;
            (omega, plant_deriv(t, p, omega, &cfg.disturbance, &cfg.swimmer)?)
        }
        Controller::Uniform => (Vec2::ZERO, (v_d - d_hat) * cfg.swimmer.e11 + d),
        Controller::Reduced => unreachable!("reduced runs use integrate_reduced"),
    };
    Ok(Eval {
        pdot,
        sdot,
        omega,
        eps: ct.epsilon,
        tau: ct.proj.tau_star,
    })
}

/// Closed-loop run of the full plant (or the reduced model for
/// [`Controller::Reduced`]).
pub fn integrate(cfg: &SimConfig) -> std::result::Result<Trajectory, SimAbort> {
    let abort = |time, error, records| SimAbort {
        time,
        error,
        partial: Trajectory { records },
    };
    cfg.validate().map_err(|e| abort(0.0, e, Vec::new()))?;
    if cfg.controller == Controller::Reduced {
        return integrate_reduced(cfg);
    }
    for w in cfg.step_warnings() {
        log::warn!("{w}");
    }
    let n = cfg.record_count();
    let h = cfg.dt;
    let mut records = Vec::with_capacity(n);
    let mut p = cfg.initial_p;
    let mut s = cfg.initial_s;
    let mut hint: Option<f64> = None;
    for k in 0..n {
        let t = k as f64 * h;
        let k1 = match closed_loop(cfg, t, p, s, hint) {
            Ok(e) => e,
            Err(e) => return Err(abort(t, e, records)),
        };
        records.push(Record {
            t,
            p,
            s,
            omega: k1.omega,
            speed: k1.pdot.norm(),
            eps: k1.eps,
            tau: k1.tau,
            omega_norm: k1.omega.norm(),
        });
        if k + 1 == n {
            break;
        }
        let hint_step = Some(k1.tau);
        let stages = (|| {
            let k2 = closed_loop(cfg, t + 0.5 * h, p + k1.pdot * (0.5 * h), s + 0.5 * h * k1.sdot, hint_step)?;
            let k3 = closed_loop(cfg, t + 0.5 * h, p + k2.pdot * (0.5 * h), s + 0.5 * h * k2.sdot, hint_step)?;
            let k4 = closed_loop(cfg, t + h, p + k3.pdot * h, s + h * k3.sdot, hint_step)?;
            Ok::<_, Error>((k2, k3, k4))
        })();
        let (k2, k3, k4) = match stages {
            Ok(v) => v,
            Err(e) => return Err(abort(t, e, records)),
        };
        p += (k1.pdot + k2.pdot * 2.0 + k3.pdot * 2.0 + k4.pdot) * (h / 6.0);
        s += h / 6.0 * (k1.sdot + 2.0 * k2.sdot + 2.0 * k3.sdot + k4.sdot);
        if !p.is_finite() || !s.is_finite() {
            return Err(abort(
                t + h,
                Error::IllDefinedProjection("state became non-finite".into()),
                records,
            ));
        }
        hint = hint_step;
    }
    Ok(Trajectory { records })
}

/// Reduced model `(ε, s, z)` with constant heading.
#[derive(Debug, Clone, Copy)]
pub struct ReducedModel<'a> {
    pub ilos: &'a IlosParams,
    pub e11: f64,
    /// Path heading; disturbances are split along `t̂` and the left normal.
    pub theta_r: f64,
    pub disturbance: &'a DisturbanceSpec,
}

impl ReducedModel<'_> {
    pub fn deriv(&self, t: f64, x: ErrorState, z: f64) -> (f64, f64, f64) {
        let d = self.disturbance.at(t);
        let tangent = Vec2::from_angle(self.theta_r);
        reduced_error_deriv(x, z, self.ilos, self.e11, d.dot(tangent.perp()), d.dot(tangent))
    }

    /// RK4 samples `(t, x, z)` at `k·dt`, `k = 0..n`.
    pub fn run(&self, x0: ErrorState, z0: f64, dt: f64, n: usize) -> Vec<(f64, ErrorState, f64)> {
        let mut out = Vec::with_capacity(n);
        let (mut e, mut s, mut z) = (x0.epsilon, x0.s, z0);
        for k in 0..n {
            let t = k as f64 * dt;
            out.push((t, ErrorState::new(e, s), z));
            if k + 1 == n {
                break;
            }
            let f = |dt_: f64, e_: f64, s_: f64, z_: f64| self.deriv(t + dt_, ErrorState::new(e_, s_), z_);
            let a = f(0.0, e, s, z);
            let b = f(0.5 * dt, e + 0.5 * dt * a.0, s + 0.5 * dt * a.1, z + 0.5 * dt * a.2);
            let c = f(0.5 * dt, e + 0.5 * dt * b.0, s + 0.5 * dt * b.1, z + 0.5 * dt * b.2);
            let d = f(dt, e + dt * c.0, s + dt * c.1, z + dt * c.2);
            e += dt / 6.0 * (a.0 + 2.0 * b.0 + 2.0 * c.0 + d.0);
            s += dt / 6.0 * (a.1 + 2.0 * b.1 + 2.0 * c.1 + d.1);
            z += dt / 6.0 * (a.2 + 2.0 * b.2 + 2.0 * c.2 + d.2);
        }
        out
    }
}

/// Reduced-model run mapped onto trajectory records: `p = z t̂ + ε n̂`,
/// `tau = z`, no dipole command.
pub fn integrate_reduced(cfg: &SimConfig) -> std::result::Result<Trajectory, SimAbort> {
    let theta_r = match cfg.path {
        PathSpec::StraightLine { theta_r } => theta_r,
        _ => {
            return Err(SimAbort {
                time: 0.0,
                error: Error::InvalidParameter {
                    name: "path",
                    reason: "the reduced model is defined for straight-line paths".into(),
                },
                partial: Trajectory::default(),
            })
        }
    };
    let model = ReducedModel {
        ilos: &cfg.ilos,
        e11: cfg.swimmer.e11,
        theta_r,
        disturbance: &cfg.disturbance,
    };
    let tangent = Vec2::from_angle(theta_r);
    let normal = tangent.perp();
    let x0 = ErrorState::new(cfg.initial_p.dot(normal), cfg.initial_s);
    let samples = model.run(x0, cfg.initial_p.dot(tangent), cfg.dt, cfg.record_count());
    let records = samples
        .into_iter()
        .map(|(t, x, z)| {
            let (de, _, dz) = model.deriv(t, x, z);
            Record {
                t,
                p: tangent * z + normal * x.epsilon,
                s: x.s,
                omega: Vec2::ZERO,
                speed: de.hypot(dz),
                eps: x.epsilon,
                tau: z,
                omega_norm: 0.0,
            }
        })
        .collect();
    Ok(Trajectory { records })
}

pub const DEFAULT_DELTAS: [f64; 4] = [1e-3, 1e-4, 1e-5, 1e-6];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuityRow {
    pub delta: f64,
    pub deviation: f64,
}

impl ContinuityRow {
    /// `deviation/δ`, or `None` at `δ = 0`.
    pub fn ratio(&self) -> Option<f64> {
        (self.delta != 0.0).then(|| self.deviation / self.delta)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuityTable {
    pub direction: Vec2,
    pub rows: Vec<ContinuityRow>,
}

impl ContinuityTable {
    /// First pair `(i, j)` (in order of decreasing δ) whose deviation grows by
    /// more than the relative tolerance.
    pub fn monotonicity_violation(&self, tol: f64) -> Option<(usize, usize)> {
        let mut order: Vec<usize> = (0..self.rows.len()).collect();
        order.sort_by(|&a, &b| self.rows[b].delta.total_cmp(&self.rows[a].delta));
        order.windows(2).find_map(|w| {
            let (big, small) = (self.rows[w[0]], self.rows[w[1]]);
            (small.deviation > big.deviation * (1.0 + tol)).then_some((w[0], w[1]))
        })
    }

    /// Largest `deviation/δ` divided by the median ratio.
    pub fn ratio_spread(&self) -> f64 {
        let mut ratios: Vec<f64> = self.rows.iter().filter_map(|r| r.ratio()).collect();
        if ratios.is_empty() {
            return 0.0;
        }
        ratios.sort_by(f64::total_cmp);
        let m = ratios.len();
        let median = if m % 2 == 1 {
            ratios[m / 2]
        } else {
            0.5 * (ratios[m / 2 - 1] + ratios[m / 2])
        };
        if median == 0.0 {
            return if ratios[m - 1] == 0.0 { 0.0 } else { f64::INFINITY };
        }
        ratios[m - 1] / median
    }
}

/// Sensitivity of the closed loop to the initial position.
pub fn continuity_probe(
    cfg: &SimConfig,
    deltas: &[f64],
    direction: Option<Vec2>,
) -> std::result::Result<ContinuityTable, SimAbort> {
    let u = direction
        .and_then(Vec2::unit)
        .unwrap_or(Vec2::new(1.0, 1.0) * std::f64::consts::FRAC_1_SQRT_2);
    let base = integrate(cfg)?;
    let mut rows = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let deviation = if delta == 0.0 {
            0.0
        } else {
            let mut shifted = cfg.clone();
            shifted.initial_p = cfg.initial_p + u * delta;
            base.max_deviation(&integrate(&shifted)?)
        };
        rows.push(ContinuityRow { delta, deviation });
    }
    Ok(ContinuityTable { direction: u, rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedReport {
    pub raw_mean_speed: f64,
    pub ods_mean_speed: f64,
    /// Fraction of raw records with `|ω| > Ω_SO`.
    pub raw_saturation: f64,
    /// Fraction of ODS records on the constraint boundary.
    pub ods_active: f64,
    pub max_deviation: f64,
}

impl SpeedReport {
    pub const SATURATION_THRESHOLD: f64 = 0.2;

    /// The raw controller saturated often enough for the ordering to apply.
    pub fn claim_applies(&self) -> bool {
        self.raw_saturation >= Self::SATURATION_THRESHOLD
    }

    pub fn raw_slower(&self) -> bool {
        self.raw_mean_speed < self.ods_mean_speed
    }
}

pub fn speed_comparison(
    raw: &SimConfig,
    ods: &SimConfig,
) -> std::result::Result<SpeedReport, SimAbort> {
    let a = integrate(raw)?;
    let b = integrate(ods)?;
    let limit = raw.swimmer.omega_so;
    let frac = |t: &Trajectory, pred: &dyn Fn(f64) -> bool| {
        t.records.iter().filter(|r| pred(r.omega_norm)).count() as f64 / t.len().max(1) as f64
    };
    let ods_limit = ods.swimmer.omega_so;
    Ok(SpeedReport {
        raw_mean_speed: a.mean_speed(),
        ods_mean_speed: b.mean_speed(),
        raw_saturation: frac(&a, &|w| w > limit),
        ods_active: frac(&b, &|w| w >= ods_limit * (1.0 - 1e-12)),
        max_deviation: a.max_deviation(&b),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn circle_cfg(controller: Controller) -> SimConfig {
        SimConfig {
            dt: 0.01,
            duration: 60.0,
            initial_p: Vec2::new(0.017, 0.0),
            initial_s: 0.0,
            controller,
            path: PathSpec::circle(Vec2::ZERO, 0.015).unwrap(),
            ilos: IlosParams::new(0.01, 1.0, 7.5e-4, 0.15, TAU).unwrap(),
            swimmer: SwimmerParams::from_step_out_hz(1.0, 2.8, 1.0).unwrap(),
            disturbance: DisturbanceSpec::Zero,
            estimate: Estimate::Zero,
            seed: 0,
        }
    }

    #[test]
    fn record_grid() {
        let mut cfg = circle_cfg(Controller::Raw);
        cfg.duration = 1.0;
        cfg.dt = 0.1;
        let t = integrate(&cfg).unwrap();
        assert_eq!(t.len(), 11);
        for (k, r) in t.records.iter().enumerate() {
            assert_eq!(r.t, k as f64 * 0.1);
        }
        cfg.duration = 1.05;
        assert_eq!(cfg.record_count(), 11);
    }

    #[test]
    fn pure_drift_without_authority() {
        let mut cfg = circle_cfg(Controller::Raw);
        cfg.ilos.alpha_d = 1e-300;
        cfg.duration = 5.0;
        let c = Vec2::new(1e-4, -2e-4);
        cfg.disturbance = DisturbanceSpec::Constant { d: c };
        let t = integrate(&cfg).unwrap();
        for r in &t.records {
            assert!((r.p - (cfg.initial_p + c * r.t)).norm() < 1e-15);
        }
    }

    #[test]
    fn ods_respects_step_out_and_speed_ceiling() {
        let mut cfg = circle_cfg(Controller::Ods);
        cfg.ilos.alpha_d *= 4e6;
        cfg.swimmer.beta /= 4e6;
        cfg.duration = 20.0;
        let t = integrate(&cfg).unwrap();
        assert!(t.max_omega() <= cfg.swimmer.omega_so + 1e-10);
        let ceiling = cfg.swimmer.beta * cfg.swimmer.omega_so;
        assert!(t.records.iter().all(|r| r.speed <= ceiling * (1.0 + 1e-12)));
    }

    #[test]
    fn singularity_aborts_with_partial_trajectory() {
        let mut cfg = circle_cfg(Controller::Raw);
        cfg.path = PathSpec::line(0.0).unwrap();
        // heading straight through the origin along the path
        cfg.initial_p = Vec2::new(-1.5e-5, 0.0);
        cfg.duration = 20.0;
        let err = integrate(&cfg).err().expect("run should abort");
        assert!(matches!(err.error, Error::DegeneratePosition { .. }));
        assert!(!err.partial.is_empty());
        assert!(err.time > 0.0 && err.time < 20.0);
    }

    #[test]
    fn reduced_equilibrium_moves_at_steady_speed() {
        let mut cfg = circle_cfg(Controller::Reduced);
        cfg.path = PathSpec::line(0.4).unwrap();
        cfg.initial_p = Vec2::ZERO;
        cfg.duration = 10.0;
        let t = integrate(&cfg).unwrap();
        let v = cfg.ilos.alpha_d * cfg.ilos.delta_los;
        for r in &t.records {
            assert_eq!(r.eps, 0.0);
            assert_eq!(r.s, 0.0);
            assert!((r.tau - v * r.t).abs() < 1e-15);
        }
    }

    #[test]
    fn reduced_rejects_curved_path() {
        assert!(integrate(&circle_cfg(Controller::Reduced)).is_err());
    }

    #[test]
    fn reduced_matches_uniform_plant_on_a_line() {
        let mut full = circle_cfg(Controller::Uniform);
        full.path = PathSpec::line(0.3).unwrap();
        full.initial_p = Vec2::from_angle(0.3) * 0.002 + Vec2::from_angle(0.3).perp() * 0.004;
        full.initial_s = 1e-4;
        full.duration = 100.0;
        let mut reduced = full.clone();
        reduced.controller = Controller::Reduced;
        let a = integrate(&full).unwrap();
        let b = integrate(&reduced).unwrap();
        for (x, y) in a.records.iter().zip(&b.records) {
            assert!((x.eps - y.eps).abs() < 1e-8);
            assert!((x.s - y.s).abs() < 1e-8);
        }
    }

    #[test]
    fn constant_cross_disturbance_builds_side_slip() {
        let mut cfg = circle_cfg(Controller::Reduced);
        cfg.path = PathSpec::line(0.0).unwrap();
        cfg.initial_p = Vec2::new(0.0, 1e-3);
        cfg.disturbance = DisturbanceSpec::Constant { d: Vec2::new(0.0, 3e-4) };
        cfg.duration = 400.0;
        let t = integrate(&cfg).unwrap();
        let last = *t.last().unwrap();
        let model = ReducedModel {
            ilos: &cfg.ilos,
            e11: 1.0,
            theta_r: 0.0,
            disturbance: &cfg.disturbance,
        };
        let (de, ds, _) = model.deriv(last.t, ErrorState::new(last.eps, last.s), last.tau);
        assert!(de.abs() < 1e-8 && ds.abs() < 1e-8);
        assert!(last.s.abs() > 1e-5);
    }

    #[test]
    fn deterministic() {
        let cfg = circle_cfg(Controller::Ods);
        assert_eq!(integrate(&cfg).unwrap(), integrate(&cfg).unwrap());
    }

    #[test]
    fn continuity_table_checks() {
        let table = ContinuityTable {
            direction: Vec2::new(1.0, 0.0),
            rows: vec![
                ContinuityRow { delta: 1e-3, deviation: 2e-3 },
                ContinuityRow { delta: 1e-4, deviation: 2.05e-3 },
                ContinuityRow { delta: 0.0, deviation: 0.0 },
            ],
        };
        assert_eq!(table.monotonicity_violation(0.05), None);
        assert_eq!(table.monotonicity_violation(0.01), Some((0, 1)));
        assert!((table.ratio_spread() - 20.5 / 11.25).abs() < 1e-12);
    }

    #[test]
    fn continuity_zero_delta() {
        let mut cfg = circle_cfg(Controller::Raw);
        cfg.duration = 5.0;
        let t = continuity_probe(&cfg, &[0.0, 1e-5], None).unwrap();
        assert_eq!(t.rows[0].deviation, 0.0);
        assert!(t.rows[1].deviation > 0.0);
    }
}
