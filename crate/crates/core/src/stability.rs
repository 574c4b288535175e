//! Reduced cross-track error dynamics and their Lyapunov certificates.
//!
//! With `x = [ε, s]ᵀ` the closed loop along a straight path reads
//! `ẋ = A x + φ(x) B x + α_d d⊥ e₁` where `φ = Δ/((ε + σ₀s)² + Δ²) ∈ (0, 1/Δ]`.

use serde::{Deserialize, Serialize};

use crate::error::{require_non_negative, Error, Result};
use crate::guidance::{integral_rate, IlosParams};
use crate::linalg::{Mat2, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ErrorState {
    pub epsilon: f64,
    pub s: f64,
}

impl ErrorState {
    pub fn new(epsilon: f64, s: f64) -> Self {
        Self { epsilon, s }
    }

    pub fn as_vec(self) -> Vec2 {
        Vec2::new(self.epsilon, self.s)
    }

    pub fn norm(self) -> f64 {
        self.as_vec().norm()
    }
}

/// `V(x) = xᵀPx` with `AᵀP + PA = −Γ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovData {
    pub p: Mat2,
    pub gamma: Mat2,
}

impl LyapunovData {
    pub fn new(p: Mat2, gamma: Mat2) -> Result<Self> {
        if !p.is_positive_definite() {
            return Err(Error::NotPositiveDefinite { what: "P" });
        }
        if !gamma.is_positive_definite() {
            return Err(Error::NotPositiveDefinite { what: "Gamma" });
        }
        Ok(Self { p, gamma })
    }

    /// Pair with `Γ = −(AᵀP + PA)` for the given gains. Only `P` is checked.
    pub fn from_p(ilos: &IlosParams, p: Mat2) -> Result<Self> {
        if !p.is_positive_definite() {
            return Err(Error::NotPositiveDefinite { what: "P" });
        }
        let (a, _, _) = error_dynamics_matrices(ilos);
        let gamma = -(a.transpose() * p + p * a);
        Ok(Self { p, gamma: gamma.symmetrized() })
    }

    pub fn value(&self, x: ErrorState) -> f64 {
        self.p.quad_form(x.as_vec())
    }

    fn p12(&self) -> f64 {
        self.p.m[0][1]
    }

    fn p22(&self) -> f64 {
        self.p.m[1][1]
    }
}

/// `A = −α_d [[1, σ₀], [0, k_d/α_d]]`, `H = [[1, σ₀], [σ₀, σ₀²]]`, `B = [[0, 0], [1, 0]]`.
pub fn error_dynamics_matrices(ilos: &IlosParams) -> (Mat2, Mat2, Mat2) {
    let a = ilos.alpha_d;
    let sg = ilos.sigma0;
    (
        Mat2::new(-a, -a * sg, 0.0, -ilos.k_d),
        Mat2::symmetric(1.0, sg, sg * sg),
        Mat2::new(0.0, 0.0, 1.0, 0.0),
    )
}

/// Right-hand side of the reduced model `(ε̇, ṡ, ż)`.
pub fn reduced_error_deriv(
    x: ErrorState,
    _z: f64,
    ilos: &IlosParams,
    e11: f64,
    d_perp: f64,
    d_par: f64,
) -> (f64, f64, f64) {
    let a = ilos.alpha_d;
    (
        a * e11 * (-x.epsilon - ilos.sigma0 * x.s) + a * d_perp,
        integral_rate(x.epsilon, x.s, ilos),
        a * e11 * ilos.delta_los + a * d_par,
    )
}

/// Solve `AᵀP + PA = −Q` for symmetric `P`.
pub fn solve_lyapunov(a: Mat2, q: Mat2) -> Result<Mat2> {
    let [[a11, a12], [a21, a22]] = a.m;
    // unknowns (p11, p12, p22)
    let m = [
        [2.0 * a11, 2.0 * a21, 0.0],
        [a12, a11 + a22, a21],
        [0.0, 2.0 * a12, 2.0 * a22],
    ];
    let rhs = [-q.m[0][0], -0.5 * (q.m[0][1] + q.m[1][0]), -q.m[1][1]];
    let det3 = |m: &[[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det3(&m);
    let scale = m.iter().flatten().fold(0.0_f64, |s, v| s.max(v.abs()));
    if d.abs() <= 1e-14 * scale.powi(3) || !d.is_finite() {
        return Err(Error::Singular("Lyapunov equation"));
    }
    let mut sol = [0.0; 3];
    for (j, out) in sol.iter_mut().enumerate() {
        let mut mj = m;
        for i in 0..3 {
            mj[i][j] = rhs[i];
        }
        *out = det3(&mj) / d;
    }
    Ok(Mat2::symmetric(sol[0], sol[1], sol[2]))
}

/// `(p12 + √(p12² + p22²)) / Δ`
pub fn ges_threshold(p12: f64, p22: f64, delta_los: f64) -> f64 {
    (p12 + p12.hypot(p22)) / delta_los
}

/// `p12/Δ + √(p12² + p22²)(α_d + 1/Δ)`
pub fn iss_threshold(p12: f64, p22: f64, alpha_d: f64, delta_los: f64) -> f64 {
    p12 / delta_los + p12.hypot(p22) * (alpha_d + 1.0 / delta_los)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    /// Entrywise max of `AᵀP + PA + Γ`.
    pub lyapunov_residual: f64,
    pub lambda_min_gamma: f64,
    pub ges_threshold: f64,
    pub iss_threshold: f64,
    pub ges_pass: bool,
    pub iss_pass: bool,
}

impl StabilityReport {
    pub fn ges_margin(&self) -> f64 {
        self.lambda_min_gamma - self.ges_threshold
    }
}

pub fn check_stab_cond(ilos: &IlosParams, lyap: &LyapunovData) -> Result<StabilityReport> {
    if !lyap.p.is_positive_definite() {
        return Err(Error::NotPositiveDefinite { what: "P" });
    }
    if !lyap.gamma.is_symmetric() {
        return Err(Error::NotPositiveDefinite { what: "Gamma" });
    }
    let (a, _, _) = error_dynamics_matrices(ilos);
    let residual = (a.transpose() * lyap.p + lyap.p * a + lyap.gamma).max_abs();
    let lmin = lyap.gamma.eigen_min();
    let ges = ges_threshold(lyap.p12(), lyap.p22(), ilos.delta_los);
    let iss = iss_threshold(lyap.p12(), lyap.p22(), ilos.alpha_d, ilos.delta_los);
    Ok(StabilityReport {
        lyapunov_residual: residual,
        lambda_min_gamma: lmin,
        ges_threshold: ges,
        iss_threshold: iss,
        ges_pass: lmin > ges,
        iss_pass: lmin > iss,
    })
}

/// `(σ₀α_dΔ)² + 2α_dΔ(1 + k_d/α_d)`, to be compared against 1.
pub fn stab_cond_simple_value(ilos: &IlosParams) -> f64 {
    let ad = ilos.alpha_d * ilos.delta_los;
    (ilos.sigma0 * ad).powi(2) + 2.0 * ad * (1.0 + ilos.k_d / ilos.alpha_d)
}

pub fn check_stab_cond_simple(ilos: &IlosParams) -> bool {
    ilos.k_d / ilos.alpha_d >= 0.0 && stab_cond_simple_value(ilos) <= 1.0
}

/// Predicted along-path speed `v* = e₁₁ α_d Δ`.
pub fn steady_speed(ilos: &IlosParams, e11: f64) -> f64 {
    e11 * ilos.alpha_d * ilos.delta_los
}

/// `d* λ_max(P) / λ_min(P)`
pub fn iss_ball_radius(lyap: &LyapunovData, d_star: f64) -> Result<f64> {
    require_non_negative("d_star", d_star)?;
    if !lyap.p.is_positive_definite() {
        return Err(Error::NotPositiveDefinite { what: "P" });
    }
    Ok(d_star * lyap.p.eigen_max() / lyap.p.eigen_min())
}

/// Result of the coarse search over `P = [[1, r], [r, 1]]`, `r ∈ (0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairSearch {
    pub r: f64,
    pub lyap: LyapunovData,
    pub report: StabilityReport,
    pub samples: usize,
}

impl PairSearch {
    pub fn ges_pass(&self) -> bool {
        self.report.ges_pass
    }
}

/// Best GES margin over `samples` evenly spaced values of `r = p12/p22`.
///
/// The best pair is returned whether or not it passes.
pub fn lyapunov_pair_search(ilos: &IlosParams, samples: usize) -> Result<PairSearch> {
    let samples = samples.max(1);
    let mut best: Option<PairSearch> = None;
    for k in 1..=samples {
        let r = k as f64 / (samples + 1) as f64;
        let lyap = LyapunovData::from_p(ilos, Mat2::symmetric(1.0, r, 1.0))?;
        let report = check_stab_cond(ilos, &lyap)?;
        if best.map_or(true, |b| report.ges_margin() > b.report.ges_margin()) {
            best = Some(PairSearch {
                r,
                lyap,
                report,
                samples,
            });
        }
    }
    best.ok_or_else(|| Error::NoRoot("empty search grid".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayAudit {
    /// Decay constant `λ_min(Γ) − (p12 + √(p12² + p22²))/Δ`; may be negative.
    pub c: f64,
    pub margin: f64,
    pub violations: usize,
    /// Largest `V̇ + c|x|² − margin` seen (≤ 0 when clean).
    pub worst_violation: f64,
    pub checked: usize,
}

impl DecayAudit {
    pub fn pass(&self) -> bool {
        self.violations == 0
    }
}

/// Check `V̇ ≤ −c|x|² + margin` along a uniformly sampled trajectory.
///
/// `V̇` uses central differences; the margin is `10·dt·max|V̈|` with `V̈` from
/// second differences.
pub fn lyapunov_decay_audit(
    dt: f64,
    xs: &[ErrorState],
    lyap: &LyapunovData,
    ilos: &IlosParams,
) -> DecayAudit {
    let c = lyap.gamma.eigen_min() - ges_threshold(lyap.p12(), lyap.p22(), ilos.delta_los);
    let v: Vec<f64> = xs.iter().map(|&x| lyap.value(x)).collect();
    let mut vdd_max = 0.0_f64;
    for w in v.windows(3) {
        vdd_max = vdd_max.max(((w[2] - 2.0 * w[1] + w[0]) / (dt * dt)).abs());
    }
    let margin = 10.0 * dt * vdd_max;
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    for i in 1..v.len().saturating_sub(1) {
        let vdot = (v[i + 1] - v[i - 1]) / (2.0 * dt);
        let excess = vdot + c * xs[i].as_vec().norm_squared() - margin;
        worst = worst.max(excess);
        if excess > 0.0 {
            violations += 1;
        }
    }
    DecayAudit {
        c,
        margin,
        violations,
        worst_violation: if worst.is_finite() { worst } else { 0.0 },
        checked: v.len().saturating_sub(2),
    }
}

/// Least-squares slope `−ρ` of `ln|x(t)|`, using samples with `|x| > floor`.
pub fn fitted_decay_rate(ts: &[f64], norms: &[f64], floor: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = ts
        .iter()
        .zip(norms)
        .filter(|(_, &n)| n > floor && n.is_finite())
        .map(|(&t, &n)| (t, n.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    (sxx > 0.0).then(|| -sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn paper() -> IlosParams {
        IlosParams::new(0.01, 1.0, 7.5e-4, 0.15, std::f64::consts::TAU).unwrap()
    }

    #[test]
    fn matrices_for_paper_gains() {
        let (a, h, b) = error_dynamics_matrices(&paper());
        assert_eq!(a, Mat2::new(-0.01, -0.01, 0.0, -0.15));
        assert_eq!(h.det(), 0.0);
        assert_eq!(b, Mat2::new(0.0, 0.0, 1.0, 0.0));
        for sigma in [0.1, 0.7, 3.0, 17.0] {
            let ilos = IlosParams::new(0.3, sigma, 1.0, 0.2, 1.0).unwrap();
            assert_eq!(error_dynamics_matrices(&ilos).1.det(), 0.0);
        }
    }

    #[test]
    fn a_is_hurwitz_with_known_spectrum() {
        let (a, _, _) = error_dynamics_matrices(&paper());
        // upper triangular: the diagonal is the spectrum
        let tr = a.trace();
        let det = a.det();
        let disc = (tr * tr - 4.0 * det).sqrt();
        let mut eig = [(tr - disc) / 2.0, (tr + disc) / 2.0];
        eig.sort_by(f64::total_cmp);
        assert!((eig[0] + 0.15).abs() < 1e-15 && (eig[1] + 0.01).abs() < 1e-15);
    }

    #[test]
    fn reduced_examples() {
        let ilos = paper();
        let (de, ds, dz) = reduced_error_deriv(ErrorState::default(), 0.0, &ilos, 1.0, 0.0, 0.0);
        assert_eq!((de, ds), (0.0, 0.0));
        assert_eq!(dz, 0.01 * 7.5e-4);
        let (de, _, _) = reduced_error_deriv(ErrorState::new(2e-3, 0.0), 0.0, &ilos, 1.0, 0.0, 0.0);
        assert_eq!(de, -0.01 * 2e-3);
    }

    #[test]
    fn reduced_matches_matrix_form() {
        let ilos = IlosParams::new(0.2, 0.8, 0.05, 0.3, 1.0).unwrap();
        let (a, _, b) = error_dynamics_matrices(&ilos);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let x = ErrorState::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let d = rng.gen_range(-0.1..0.1);
            let (de, ds, _) = reduced_error_deriv(x, 0.0, &ilos, 1.0, d, 0.0);
            let e = x.epsilon + ilos.sigma0 * x.s;
            let phi = ilos.delta_los / (e * e + ilos.delta_los * ilos.delta_los);
            let v = x.as_vec();
            let expected = a.mul_vec(v) + b.mul_vec(v) * phi + Vec2::new(ilos.alpha_d * d, 0.0);
            assert!((de - expected.x).abs() < 1e-12 && (ds - expected.y).abs() < 1e-12);
        }
    }

    #[test]
    fn lyapunov_solve_identity_rhs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let ilos = IlosParams::new(
                rng.gen_range(0.01..2.0),
                rng.gen_range(0.1..3.0),
                rng.gen_range(0.01..1.0),
                rng.gen_range(0.01..2.0),
                1.0,
            )
            .unwrap();
            let (a, _, _) = error_dynamics_matrices(&ilos);
            let p = solve_lyapunov(a, Mat2::IDENTITY).unwrap();
            let res = a.transpose() * p + p * a + Mat2::IDENTITY;
            assert!(res.max_abs() < 1e-12 * p.max_abs().max(1.0));
            assert!(p.is_positive_definite());
            let lyap = LyapunovData::new(p, Mat2::IDENTITY).unwrap();
            assert!(check_stab_cond(&ilos, &lyap).unwrap().lyapunov_residual < 1e-12 * p.max_abs().max(1.0));
        }
    }

    #[test]
    fn threshold_substitution() {
        assert_eq!(ges_threshold(0.0, 1.0, 0.5), 2.0);
        assert!(!(1.9 > ges_threshold(0.0, 1.0, 0.5)));
        assert_eq!(ges_threshold(0.0, 1.0, 1.0), 1.0);
        assert!(1.5 > ges_threshold(0.0, 1.0, 1.0));
        assert!((iss_threshold(0.0, 1.0, 0.01, 1.0) - 1.01).abs() < 1e-15);
        assert!(1.5 > iss_threshold(0.0, 1.0, 0.01, 1.0));
    }

    #[test]
    fn report_uses_gamma_spectrum() {
        let ilos = IlosParams::new(0.01, 1.0, 1.0, 0.1, 1.0).unwrap();
        let lyap = LyapunovData {
            p: Mat2::IDENTITY,
            gamma: Mat2::diag(1.5, 2.0),
        };
        let r = check_stab_cond(&ilos, &lyap).unwrap();
        assert_eq!(r.lambda_min_gamma, 1.5);
        assert!(r.ges_pass && r.iss_pass);
        assert!(check_stab_cond(&ilos, &LyapunovData { p: Mat2::diag(1.0, -1.0), gamma: Mat2::IDENTITY }).is_err());
    }

    #[test]
    fn simple_condition_examples() {
        let v = stab_cond_simple_value(&paper());
        let expected = (7.5e-6_f64).powi(2) + 2.0 * 0.01 * 7.5e-4 * 16.0;
        assert!((v - expected).abs() < 1e-18);
        assert!((v - 2.4e-4).abs() < 1e-9);
        assert!(check_stab_cond_simple(&paper()));

        let tiny = IlosParams::new(1.0, 1e-300, 1.0, 0.0, 1.0).unwrap();
        assert_eq!(stab_cond_simple_value(&tiny), 2.0);
        assert!(!check_stab_cond_simple(&tiny));

        let edge = IlosParams::new(0.5, 2.0, 0.5, 0.25, 1.0).unwrap();
        assert_eq!(stab_cond_simple_value(&edge), 1.0);
        assert!(check_stab_cond_simple(&edge));
    }

    #[test]
    fn steady_speed_and_ball() {
        assert_eq!(steady_speed(&paper(), 1.0), 0.01 * 7.5e-4);
        assert_eq!(steady_speed(&paper(), 0.0), 0.0);
        let mut wide = paper();
        wide.delta_los *= 2.0;
        assert_eq!(steady_speed(&wide, 1.0), 2.0 * steady_speed(&paper(), 1.0));

        let eye = LyapunovData { p: Mat2::IDENTITY, gamma: Mat2::IDENTITY };
        assert_eq!(iss_ball_radius(&eye, 0.3).unwrap(), 0.3);
        let d = LyapunovData { p: Mat2::diag(2.0, 1.0), gamma: Mat2::IDENTITY };
        assert_eq!(iss_ball_radius(&d, 0.5).unwrap(), 1.0);
        assert_eq!(iss_ball_radius(&d, 0.0).unwrap(), 0.0);
    }

    /// With `p11 = p22`, `λ_min(Γ) ≤ Γ₁₁ = 2α_d p22` while the GES threshold is
    /// at least `p22/Δ`. The simple condition forces `2α_dΔ ≤ 1`, so no pair of
    /// this family can pass.
    #[test]
    fn equal_diagonal_pairs_cannot_certify_ges_under_simple_condition() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut tried = 0;
        while tried < 200 {
            let ilos = IlosParams::new(
                10f64.powf(rng.gen_range(-3.0..1.0)),
                10f64.powf(rng.gen_range(-2.0..1.0)),
                10f64.powf(rng.gen_range(-4.0..0.0)),
                10f64.powf(rng.gen_range(-3.0..1.0)),
                1.0,
            )
            .unwrap();
            if !check_stab_cond_simple(&ilos) {
                continue;
            }
            tried += 1;
            let search = lyapunov_pair_search(&ilos, 99).unwrap();
            assert!(!search.ges_pass());
            let g11 = search.lyap.gamma.m[0][0];
            assert!((g11 - 2.0 * ilos.alpha_d).abs() < 1e-12 * g11.abs().max(1.0));
            assert!(search.report.ges_threshold >= 1.0 / ilos.delta_los);
        }
    }

    #[test]
    fn search_prefers_largest_margin() {
        let ilos = paper();
        let s = lyapunov_pair_search(&ilos, 99).unwrap();
        for k in 1..=99 {
            let r = k as f64 / 100.0;
            let l = LyapunovData::from_p(&ilos, Mat2::symmetric(1.0, r, 1.0)).unwrap();
            let rep = check_stab_cond(&ilos, &l).unwrap();
            assert!(rep.ges_margin() <= s.report.ges_margin());
        }
    }

    #[test]
    fn audit_of_rest_state() {
        let ilos = paper();
        let lyap = lyapunov_pair_search(&ilos, 9).unwrap().lyap;
        let xs = vec![ErrorState::default(); 50];
        let a = lyapunov_decay_audit(0.01, &xs, &lyap, &ilos);
        assert!(a.pass());
        assert_eq!(a.margin, 0.0);
    }

    #[test]
    fn decay_rate_fit() {
        let ts: Vec<f64> = (0..100).map(|k| k as f64 * 0.1).collect();
        let ns: Vec<f64> = ts.iter().map(|t| 3.0 * (-0.7 * t).exp()).collect();
        assert!((fitted_decay_rate(&ts, &ns, 0.0).unwrap() - 0.7).abs() < 1e-12);
        assert!(fitted_decay_rate(&ts[..1], &ns[..1], 0.0).is_none());
    }
}
