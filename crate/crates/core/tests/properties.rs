use std::f64::consts::TAU;

use microswim_core::guidance::{integral_rate, raw_control_for, IlosParams};
use microswim_core::model::{dipole_velocity, gamma, gamma_inv, step_out_f, SwimmerParams};
use microswim_core::ods::{
    kkt_check, ods_eigenbasis, ods_hessian, ods_solve, solve_trs_diagonal, solve_trs_isotropic,
    TrsProblem,
};
use microswim_core::paths::{cross_track, nearest_param, PathSpec};
use microswim_core::stability::{
    check_stab_cond, error_dynamics_matrices, solve_lyapunov, LyapunovData,
};
use microswim_core::{Mat2, Vec2};
use proptest::prelude::*;

fn point() -> impl Strategy<Value = Vec2> {
    (-1.0..1.0f64, -1.0..1.0f64)
        .prop_map(|(x, y)| Vec2::new(x, y))
        .prop_filter("off the singularity", |p| p.norm() > 1e-6)
}

fn log_uniform(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    (lo.log10()..hi.log10()).prop_map(|e| 10f64.powf(e))
}

fn trs_problem() -> impl Strategy<Value = TrsProblem> {
    (
        log_uniform(1e-2, 1e2),
        log_uniform(1e-2, 1e2),
        -10.0..10.0f64,
        -10.0..10.0f64,
        0.1..10.0f64,
    )
        .prop_map(|(q1, q2, g1, g2, r)| TrsProblem::new(q1, q2, Vec2::new(g1, g2), r).unwrap())
}

proptest! {
    #[test]
    fn gamma_inverse_pair(p in point()) {
        let prod = gamma(p).unwrap() * gamma_inv(p).unwrap();
        prop_assert!((prod - Mat2::IDENTITY).max_abs() < 1e-12);
    }

    #[test]
    fn gamma_spectrum(p in point()) {
        let g = gamma(p).unwrap();
        let e = p.unit().unwrap();
        prop_assert!((g.mul_vec(e) - e * 2.0).max_abs() < 1e-12);
        prop_assert!((g.mul_vec(e.perp()) + e.perp()).max_abs() < 1e-12);
    }

    #[test]
    fn step_out_map_shape(x in 0.0..200.0f64, beta in log_uniform(1e-6, 10.0), omega in 0.5..50.0f64) {
        let sp = SwimmerParams::new(beta, omega, 1.0).unwrap();
        let f = step_out_f(x, &sp);
        prop_assert!(f >= 0.0);
        prop_assert!(f <= beta * omega * (1.0 + 1e-15));
        if x > omega {
            prop_assert!(step_out_f(x * 1.01, &sp) < f);
        } else {
            prop_assert!(step_out_f(x * 0.99, &sp) <= f);
        }
    }

    #[test]
    fn dipole_speed_ceiling(p in point(), wx in -100.0..100.0f64, wy in -100.0..100.0f64) {
        let sp = SwimmerParams::from_step_out_hz(1.0, 2.8, 1.0).unwrap();
        let w = Vec2::new(wx, wy);
        prop_assume!(w.norm() > 1e-9);
        let v = dipole_velocity(p, w, &sp).unwrap();
        prop_assert!(v.norm() <= sp.beta * sp.omega_so * (1.0 + 1e-14));
    }

    #[test]
    fn trs_solution_is_certified(problem in trs_problem()) {
        let sol = solve_trs_diagonal(&problem).unwrap();
        let report = kkt_check(&problem, &sol);
        prop_assert!(report.pass(), "{:?}", report);
        prop_assert!(sol.u_star.norm() <= problem.radius + 1e-10);
        prop_assert!((sol.lambda_star * (problem.radius - sol.u_star.norm())).abs() < 1e-8);
    }

    #[test]
    fn trs_beats_feasible_points(problem in trs_problem(), a in 0.0..TAU, r in 0.0..1.0f64) {
        let sol = solve_trs_diagonal(&problem).unwrap();
        let u = Vec2::from_angle(a) * (r * problem.radius);
        let best = problem.objective(sol.u_star);
        prop_assert!(best <= problem.objective(u) + 1e-12 * best.abs().max(1.0));
    }

    #[test]
    fn trs_isotropic_reduction(q in log_uniform(1e-2, 1e2), g1 in -10.0..10.0f64, g2 in -10.0..10.0f64, r in 0.1..10.0f64) {
        let g = Vec2::new(g1, g2);
        let d = solve_trs_diagonal(&TrsProblem::new(q, q, g, r).unwrap()).unwrap();
        let i = solve_trs_isotropic(g, 1.0 / q, r).unwrap();
        prop_assert!((d.u_star - i.u_star).max_abs() < 1e-10);
    }

    #[test]
    fn trs_rotation_invariance(q in log_uniform(1e-2, 1e2), g1 in -10.0..10.0f64, g2 in -10.0..10.0f64, r in 0.1..10.0f64, theta in 0.0..TAU) {
        // isotropic problems commute with rotations of g
        let g = Vec2::new(g1, g2);
        let rot = Mat2::rotation(theta);
        let a = solve_trs_diagonal(&TrsProblem::new(q, q, g, r).unwrap()).unwrap();
        let b = solve_trs_diagonal(&TrsProblem::new(q, q, rot.mul_vec(g), r).unwrap()).unwrap();
        prop_assert!((rot.mul_vec(a.u_star) - b.u_star).max_abs() < 1e-10);
    }

    #[test]
    fn secular_decreasing(problem in trs_problem(), l in 0.0..100.0f64, dl in 1e-6..10.0f64) {
        prop_assume!(problem.g.norm() > 1e-9);
        prop_assert!(problem.secular(l + dl) < problem.secular(l));
    }

    #[test]
    fn ods_hessian_eigenpairs(p in point(), omega0 in 0.1..20.0f64) {
        let h = ods_hessian(p, omega0).unwrap();
        let (basis, q) = ods_eigenbasis(p, omega0).unwrap();
        let w2 = 1.0 / (omega0 * omega0);
        prop_assert!((q[0] - 4.0 * w2).abs() < 1e-15 * q[0] && (q[1] - w2).abs() < 1e-15 * q[0]);
        prop_assert!((basis.column(0) - p.unit().unwrap()).max_abs() < 1e-15);
        for j in 0..2 {
            let v = basis.column(j);
            prop_assert!((h.mul_vec(v) - v * q[j]).max_abs() < 1e-12 * q[0]);
        }
    }

    #[test]
    fn ods_respects_step_out(p in point(), vx in -1e3..1e3f64, vy in -1e3..1e3f64, dx in -1.0..1.0f64, dy in -1.0..1.0f64) {
        let omega_so = TAU * 2.8;
        let step = ods_solve(p, Vec2::new(vx, vy), Vec2::new(dx, dy), TAU, omega_so).unwrap();
        prop_assert!(step.omega.norm() <= omega_so + 1e-10);
    }

    #[test]
    fn ods_equals_raw_when_unsaturated(p in point(), vx in -1.0..1.0f64, vy in -1.0..1.0f64) {
        let v = Vec2::new(vx, vy);
        let step = ods_solve(p, v, Vec2::ZERO, TAU, 10.0).unwrap();
        prop_assert!((step.omega - raw_control_for(p, v).unwrap()).max_abs() < 1e-12);
    }

    #[test]
    fn circle_cross_track_is_signed_radial_gap(c in point(), r in 0.05..2.0f64, p in point()) {
        let path = PathSpec::circle(c, r).unwrap();
        prop_assume!((p - c).norm() > 1e-6);
        let ct = cross_track(&path, p, None).unwrap();
        // counterclockwise travel: the inside is to the left
        prop_assert!((ct.epsilon - (r - (p - c).norm())).abs() < 1e-12);
    }

    #[test]
    fn line_cross_track_is_signed_distance(theta in -3.0..3.0f64, p in point()) {
        let path = PathSpec::line(theta).unwrap();
        let ct = cross_track(&path, p, None).unwrap();
        let n = Vec2::from_angle(theta).perp();
        prop_assert!((ct.epsilon - p.dot(n)).abs() < 1e-12);
    }

    #[test]
    fn projection_is_idempotent(c in point(), r in 0.05..2.0f64, p in point()) {
        let path = PathSpec::circle(c, r).unwrap();
        prop_assume!((p - c).norm() > 1e-6);
        let proj = nearest_param(&path, p, None).unwrap();
        let again = nearest_param(&path, proj.foot, Some(proj.tau_star)).unwrap();
        prop_assert!((again.tau_star - proj.tau_star).abs() < 1e-9);
        prop_assert!(again.distance < 1e-12);
    }

    #[test]
    fn integral_rate_bounded_at_zero_state(eps in -10.0..10.0f64, delta in 1e-4..1.0f64) {
        let ilos = IlosParams::new(0.1, 1.0, delta, 0.2, 1.0).unwrap();
        prop_assert!(integral_rate(eps, 0.0, &ilos).abs() <= 0.5 + 1e-15);
    }

    #[test]
    fn lyapunov_solution_residual(a in log_uniform(1e-3, 10.0), sigma in 0.1..5.0f64, delta in 1e-3..1.0f64, k in log_uniform(1e-3, 10.0)) {
        let ilos = IlosParams::new(a, sigma, delta, k, 1.0).unwrap();
        let (am, h, _) = error_dynamics_matrices(&ilos);
        prop_assert_eq!(h.det(), 0.0);
        let p = solve_lyapunov(am, Mat2::IDENTITY).unwrap();
        let lyap = LyapunovData::new(p, Mat2::IDENTITY).unwrap();
        let report = check_stab_cond(&ilos, &lyap).unwrap();
        prop_assert!(report.lyapunov_residual < 1e-9 * p.max_abs().max(1.0));
    }
}
