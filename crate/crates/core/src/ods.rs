//! Step-out constrained pointwise-optimal control.
//!
//! The controller minimizes a quadratic deviation from the reference dipole
//! command over the disk `|ω| ≤ Ω_SO`. In the `{p̂, p̂⊥}` eigenbasis of `Γ(p)`
//! the problem is a diagonal trust-region subproblem (TRS)
//!
//! ```text
//! min ½ uᵀ diag(q1, q2) u + gᵀu   s.t. |u| ≤ R
//! ```
//!
//! which is solved exactly through the scalar multiplier λ*.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{require_positive, Error, Result};
use crate::guidance::{ilos_reference, IlosParams, IlosReference};
use crate::linalg::{Mat2, Vec2};
use crate::model::{gamma, SwimmerParams, POSITION_TOLERANCE};
use crate::paths::PathSpec;

/// Default absolute tolerance of [`KktReport::pass`].
pub const KKT_TOLERANCE: f64 = 1e-9;

/// Secular residual tolerance, relative to `R²`.
const SECULAR_TOLERANCE: f64 = 1e-12;
const MAX_ITERATIONS: usize = 200;

/// Diagonal trust-region subproblem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrsProblem {
    pub q1: f64,
    pub q2: f64,
    pub g: Vec2,
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrsSolution {
    pub u_star: Vec2,
    pub lambda_star: f64,
    pub on_boundary: bool,
}

impl TrsProblem {
    pub fn new(q1: f64, q2: f64, g: Vec2, radius: f64) -> Result<Self> {
        let p = Self { q1, q2, g, radius };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        require_positive("q1", self.q1)?;
        require_positive("q2", self.q2)?;
        require_positive("radius", self.radius)?;
        if !self.g.is_finite() {
            return Err(Error::InvalidParameter {
                name: "g",
                reason: "must be finite".into(),
            });
        }
        Ok(())
    }

    pub fn objective(&self, u: Vec2) -> f64 {
        0.5 * (self.q1 * u.x * u.x + self.q2 * u.y * u.y) + self.g.dot(u)
    }

    /// `u(λ) = −(diag(q) + λI)⁻¹ g`.
    pub fn shifted_minimizer(&self, lambda: f64) -> Vec2 {
        Vec2::new(-self.g.x / (self.q1 + lambda), -self.g.y / (self.q2 + lambda))
    }

    /// Left side of the secular equation, `Σ gᵢ² / (qᵢ + λ)²`.
    pub fn secular(&self, lambda: f64) -> f64 {
        self.shifted_minimizer(lambda).norm_squared()
    }

    fn q_min(&self) -> f64 {
        self.q1.min(self.q2)
    }

    fn q_max(&self) -> f64 {
        self.q1.max(self.q2)
    }
}

/// Closed-form solution for `Q = I/Ω₀`.
pub fn solve_trs_isotropic(g: Vec2, omega0: f64, radius: f64) -> Result<TrsSolution> {
    require_positive("omega0", omega0)?;
    require_positive("radius", radius)?;
    let n = g.norm();
    if n < radius / omega0 {
        return Ok(TrsSolution {
            u_star: g * -omega0,
            lambda_star: 0.0,
            on_boundary: false,
        });
    }
    Ok(TrsSolution {
        u_star: g * (-radius / n),
        lambda_star: (n / radius - 1.0 / omega0).max(0.0),
        on_boundary: true,
    })
}

/// Exact solution of a diagonal TRS.
pub fn solve_trs_diagonal(problem: &TrsProblem) -> Result<TrsSolution> {
    problem.validate()?;
    let r = problem.radius;
    let free = problem.shifted_minimizer(0.0);
    if free.norm() < r {
        return Ok(TrsSolution {
            u_star: free,
            lambda_star: 0.0,
            on_boundary: false,
        });
    }
    let lambda = secular_root(problem)?;
    let mut u = problem.shifted_minimizer(lambda);
    let n = u.norm();
    if n > r {
        u = u * (r / n);
    }
    Ok(TrsSolution {
        u_star: u,
        lambda_star: lambda,
        on_boundary: true,
    })
}

/// Root `λ ≥ 0` of `Σ gᵢ²/(qᵢ+λ)² = R²`, assuming the free minimizer is not
/// strictly interior.
///
/// Newton iterations run on `1/|u(λ)| − 1/R`, which is nearly linear in λ and
/// increases monotonically; iterates leaving the bracket are replaced by
/// bisection.
pub fn secular_root(problem: &TrsProblem) -> Result<f64> {
    let r = problem.radius;
    let gn = problem.g.norm();
    let mut lo = (gn / r - problem.q_max()).max(0.0);
    let mut hi = (gn / r - problem.q_min()).max(lo);
    let residual = |lambda: f64| problem.secular(lambda) - r * r;
    let tol = SECULAR_TOLERANCE * r * r;

    if residual(lo) <= tol {
        return Ok(lo);
    }
    let mut lambda = lo;
    for _ in 0..MAX_ITERATIONS {
        let phi = residual(lambda);
        if phi.abs() <= tol {
            return Ok(lambda);
        }
        if phi > 0.0 {
            lo = lambda;
        } else {
            hi = lambda;
        }
        let u = problem.shifted_minimizer(lambda);
        let n = u.norm();
        // d|u|/dλ = −Σ gᵢ²/(qᵢ+λ)³ / |u|
        let cubic = u.x * u.x / (problem.q1 + lambda) + u.y * u.y / (problem.q2 + lambda);
        let dn = -cubic / n;
        let psi = 1.0 / n - 1.0 / r;
        let dpsi = -dn / (n * n);
        let mut next = lambda - psi / dpsi;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if next == lambda || hi - lo <= f64::EPSILON * hi.abs() {
            return Ok(next);
        }
        lambda = next;
    }
    let phi = residual(lambda);
    if phi.abs() <= 1e3 * tol {
        Ok(lambda)
    } else {
        Err(Error::NoRoot(format!(
            "secular equation residual {phi:e} after {MAX_ITERATIONS} iterations"
        )))
    }
}

/// Coefficients `[c0, c1, c2, c3, c4]` of the monic quartic in `λ̃ = λ + q1`
/// obtained by clearing denominators in the secular equation.
///
/// With `Ω̃ = q2 − q1`:
/// `λ̃⁴ + 2Ω̃λ̃³ + (Ω̃² − |g|²/R²)λ̃² − 2Ω̃(g1²/R²)λ̃ − g1²Ω̃²/R² = 0`.
pub fn secular_quartic(problem: &TrsProblem) -> [f64; 5] {
    let r2 = problem.radius * problem.radius;
    let w = problem.q2 - problem.q1;
    let g1 = problem.g.x * problem.g.x / r2;
    let gg = problem.g.norm_squared() / r2;
    [-g1 * w * w, -2.0 * w * g1, w * w - gg, 2.0 * w, 1.0]
}

/// All complex roots of a monic quartic, by Durand–Kerner iteration.
pub fn quartic_roots(coeffs: &[f64; 5]) -> [Complex64; 4] {
    let eval = |z: Complex64| {
        coeffs[..4]
            .iter()
            .rev()
            .fold(Complex64::new(1.0, 0.0), |acc, &c| acc * z + c)
    };
    let bound = 1.0 + coeffs[..4].iter().fold(0.0_f64, |m, c| m.max(c.abs()));
    let seed = Complex64::from_polar(0.9 * bound, 0.4);
    let mut z = [Complex64::new(1.0, 0.0); 4];
    for (k, zk) in z.iter_mut().enumerate() {
        *zk = seed.powu(k as u32 + 1) / Complex64::new(bound.powi(k as i32), 0.0);
    }
    for _ in 0..500 {
        let mut change = 0.0_f64;
        for i in 0..4 {
            let mut denom = Complex64::new(1.0, 0.0);
            for j in 0..4 {
                if i != j {
                    denom *= z[i] - z[j];
                }
            }
            if denom.norm() == 0.0 {
                denom = Complex64::new(f64::EPSILON, 0.0);
            }
            let step = eval(z[i]) / denom;
            z[i] -= step;
            change = change.max(step.norm() / (1.0 + z[i].norm()));
        }
        if change < 1e-15 {
            break;
        }
    }
    z
}

/// Multiplier from the quartic: the largest real root with `λ > −min(q)`,
/// polished by Newton steps on the polynomial.
pub fn quartic_multiplier(problem: &TrsProblem) -> Option<f64> {
    let coeffs = secular_quartic(problem);
    let roots = quartic_roots(&coeffs);
    let scale = 1.0 + roots.iter().fold(0.0_f64, |m, z| m.max(z.norm()));
    let q1 = problem.q1;
    let floor = -problem.q_min();
    let best = roots
        .iter()
        .filter(|z| z.im.abs() <= 1e-6 * scale)
        .map(|z| z.re - q1)
        .filter(|&l| l > floor)
        .fold(None, |m: Option<f64>, l| Some(m.map_or(l, |m| m.max(l))))?;
    let mut t = best + q1;
    for _ in 0..8 {
        let (p, dp) = coeffs[..4]
            .iter()
            .rev()
            .fold((1.0, 0.0), |(p, dp), &c| (p * t + c, dp * t + p));
        if dp == 0.0 {
            break;
        }
        t -= p / dp;
    }
    Some(t - q1)
}

/// Smallest objective value over a polar grid of the disk: `radial` radii
/// from 0 to `R` inclusive and `angular` equally spaced directions.
pub fn polar_grid_minimum(problem: &TrsProblem, radial: usize, angular: usize) -> (f64, Vec2) {
    let mut best = (0.0, Vec2::ZERO);
    let dr = problem.radius / (radial.max(2) - 1) as f64;
    for j in 0..angular {
        let dir = Vec2::from_angle(std::f64::consts::TAU * j as f64 / angular as f64);
        // along a ray the objective is r (½ a r + b)
        let a = problem.q1 * dir.x * dir.x + problem.q2 * dir.y * dir.y;
        let b = problem.g.dot(dir);
        for i in 1..radial {
            let r = dr * i as f64;
            let v = r * (0.5 * a * r + b);
            if v < best.0 {
                best = (v, dir * r);
            }
        }
    }
    best
}

/// Optimality residuals of a candidate TRS solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    /// `max(0, |u| − R)`
    pub feasibility_gap: f64,
    /// `|(diag(q) + λI)u + g|`
    pub stationarity: f64,
    /// `|λ (R − |u|)|`
    pub complementarity: f64,
    /// `min(q) + λ`; must be ≥ 0.
    pub curvature_margin: f64,
    pub lambda: f64,
}

impl KktReport {
    pub fn pass_with(&self, tol: f64) -> bool {
        self.feasibility_gap <= tol
            && self.stationarity <= tol
            && self.complementarity <= tol
            && self.curvature_margin >= -tol
            && self.lambda >= -tol
    }

    pub fn pass(&self) -> bool {
        self.pass_with(KKT_TOLERANCE)
    }

    /// Largest of the three residuals.
    pub fn max_residual(&self) -> f64 {
        self.feasibility_gap
            .max(self.stationarity)
            .max(self.complementarity)
    }
}

pub fn kkt_check(problem: &TrsProblem, sol: &TrsSolution) -> KktReport {
    let u = sol.u_star;
    let l = sol.lambda_star;
    let n = u.norm();
    let stat = Vec2::new(
        (problem.q1 + l) * u.x + problem.g.x,
        (problem.q2 + l) * u.y + problem.g.y,
    );
    KktReport {
        feasibility_gap: (n - problem.radius).max(0.0),
        stationarity: stat.norm(),
        complementarity: (l * (problem.radius - n)).abs(),
        curvature_margin: problem.q_min() + l,
        lambda: l,
    }
}

/// Hessian `Γ(p)² / Ω₀²` of the ω-objective.
pub fn ods_hessian(p: Vec2, omega0: f64) -> Result<Mat2> {
    let g = gamma(p)?;
    Ok((g * g).scale(1.0 / (omega0 * omega0)))
}

/// Orthonormal eigenbasis `[p̂, p̂⊥]` of `Γ(p)` (as matrix columns) and the
/// matching Hessian eigenvalues `(4, 1)/Ω₀²`.
pub fn ods_eigenbasis(p: Vec2, omega0: f64) -> Result<(Mat2, [f64; 2])> {
    let n = p.norm();
    if !(n >= POSITION_TOLERANCE) || !n.is_finite() {
        return Err(Error::DegeneratePosition { norm: n });
    }
    let e = p * (1.0 / n);
    let w2 = 1.0 / (omega0 * omega0);
    Ok((Mat2::from_columns(e, e.perp()), [4.0 * w2, w2]))
}

/// Everything computed by one ODS evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdsStep {
    pub omega: Vec2,
    /// Reference command `Γ(p)(v_d − d̂)` the objective pulls toward.
    pub omega_ref: Vec2,
    /// Linear term `G` acting on `Γω`.
    pub g_mu: Vec2,
    pub basis: Mat2,
    pub problem: TrsProblem,
    pub solution: TrsSolution,
}

impl OdsStep {
    /// `½(Γω)ᵀA(Γω) + GᵀΓω` at an arbitrary `ω`.
    pub fn objective(&self, p: Vec2, omega: Vec2, omega0: f64) -> Result<f64> {
        ods_objective(p, omega, self.g_mu, omega0)
    }
}

/// `½(Γω)ᵀA(Γω) + GᵀΓω` with `A = I/Ω₀²`.
pub fn ods_objective(p: Vec2, omega: Vec2, g_mu: Vec2, omega0: f64) -> Result<f64> {
    let gw = gamma(p)?.mul_vec(omega);
    Ok(0.5 * gw.norm_squared() / (omega0 * omega0) + g_mu.dot(gw))
}

/// Solve the constrained problem for a given reference velocity.
///
/// `G = −A Γ(p) ω_ref` with `ω_ref = Γ(p)(v_d − d̂)`, so the objective equals
/// `½|Γ(ω − ω_ref)|²_A` up to a constant.
/// Without saturation the minimizer is therefore the raw command.
pub fn ods_solve(p: Vec2, v_d: Vec2, d_hat: Vec2, omega0: f64, omega_so: f64) -> Result<OdsStep> {
    require_positive("omega0", omega0)?;
    require_positive("omega_so", omega_so)?;
    let gam = gamma(p)?;
    let omega_ref = gam.mul_vec(v_d - d_hat);
    let w2 = 1.0 / (omega0 * omega0);
    let g_mu = gam.mul_vec(omega_ref) * -w2;
    let (basis, [q1, q2]) = ods_eigenbasis(p, omega0)?;
    // linear term in ω is Γ G; Γ acts as diag(2, −1) in the eigenbasis
    let g_e = basis.transpose().mul_vec(g_mu);
    let problem = TrsProblem::new(q1, q2, Vec2::new(2.0 * g_e.x, -g_e.y), omega_so)?;
    let solution = solve_trs_diagonal(&problem)?;
    let omega = basis.mul_vec(solution.u_star);
    Ok(OdsStep {
        omega,
        omega_ref,
        g_mu,
        basis,
        problem,
        solution,
    })
}

/// ODS command following the ILOS reference at `p`.
pub fn ods_control(
    path: &PathSpec,
    p: Vec2,
    s: f64,
    ilos: &IlosParams,
    swimmer: &SwimmerParams,
    d_hat: Vec2,
    hint: Option<f64>,
) -> Result<Vec2> {
    let reference: IlosReference = ilos_reference(path, p, s, ilos, hint)?;
    Ok(ods_solve(p, reference.v_d, d_hat, ilos.omega0, swimmer.omega_so)?.omega)
}
