use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use microswim_core::ods::{kkt_check, polar_grid_minimum, solve_trs_diagonal, TrsProblem};
use microswim_core::sim::{continuity_probe, integrate, DEFAULT_DELTAS};
use microswim_core::stability::{
    check_stab_cond_simple, iss_ball_radius, lyapunov_pair_search, stab_cond_simple_value,
    steady_speed,
};
use microswim_core::Vec2;

use crate::config::{load_scenario, Scenario};
use crate::output::{config_digest, now, trajectory_csv, write_plots, RunManifest};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_ABORTED: i32 = 3;

/// Number of `r = p12/p22` values tried by `stability-check`.
pub const PAIR_SEARCH_SAMPLES: usize = 99;
pub const ORACLE_GRID: usize = 2000;
pub const MONOTONE_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Outcome {
    fn fail(code: i32, message: impl Into<String>) -> Self {
        Self {
            code,
            stdout: String::new(),
            stderr: message.into() + "\n",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Options {
    pub out: PathBuf,
    pub plots: bool,
}

pub fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into())
}

fn load(path: &Path) -> Result<(Scenario, Vec<u8>), Outcome> {
    load_scenario(path).map_err(|e| Outcome::fail(EXIT_CONFIG, format!("{}: {e}", path.display())))
}

fn io_fail(what: &Path, e: std::io::Error) -> Outcome {
    Outcome::fail(EXIT_ABORTED, format!("cannot write {}: {e}", what.display()))
}

pub fn simulate(config: &Path, opts: &Options) -> Outcome {
    let (scenario, bytes) = match load(config) {
        Ok(v) => v,
        Err(o) => return o,
    };
    let started = now();
    let name = stem(config);
    if let Err(e) = fs::create_dir_all(&opts.out) {
        return io_fail(&opts.out, e);
    }
    let cfg = &scenario.sim;
    let (traj, abort) = match integrate(cfg) {
        Ok(t) => (t, None),
        Err(a) => (a.partial.clone(), Some(a)),
    };

    let mut outputs = Vec::new();
    let csv_path = opts.out.join(format!("{name}.csv"));
    if let Err(e) = fs::write(&csv_path, trajectory_csv(&traj)) {
        return io_fail(&csv_path, e);
    }
    outputs.push(csv_path);
    if opts.plots && !traj.is_empty() {
        match write_plots(&opts.out, &name, &traj, &cfg.path, cfg.swimmer.omega_so) {
            Ok(files) => outputs.extend(files),
            Err(e) => return io_fail(&opts.out, e),
        }
    }
    if let Some(a) = &abort {
        let marker = opts.out.join(format!("{name}.ABORTED"));
        if let Err(e) = fs::write(&marker, format!("{a}\n")) {
            return io_fail(&marker, e);
        }
        outputs.push(marker);
    }
    let manifest_path = opts.out.join(format!("{name}.manifest.json"));
    let manifest = RunManifest {
        tool: "microswim",
        version: env!("CARGO_PKG_VERSION"),
        command: "simulate".into(),
        config: config.display().to_string(),
        config_sha256: config_digest(&bytes),
        started,
        finished: now(),
        status: if abort.is_some() { "aborted" } else { "ok" }.into(),
        records: traj.len(),
        aborted_at: abort.as_ref().map(|a| a.time),
        message: abort.as_ref().map(|a| a.error.to_string()),
        outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
    };
    if let Err(e) = manifest.write(&manifest_path) {
        return io_fail(&manifest_path, e);
    }

    let mut out = String::new();
    let _ = writeln!(out, "records        {}", traj.len());
    if let Some(last) = traj.last() {
        let _ = writeln!(out, "final t        {:.6e} s", last.t);
        let _ = writeln!(out, "final eps      {:.6e} m", last.eps);
        let _ = writeln!(out, "final s        {:.6e}", last.s);
    }
    let _ = writeln!(out, "max |omega|    {:.6e} rad/s (limit {:.6e})", traj.max_omega(), cfg.swimmer.omega_so);
    let _ = writeln!(out, "mean speed     {:.6e} m/s", traj.mean_speed());
    let _ = writeln!(out, "csv            {}", outputs[0].display());
    let _ = writeln!(out, "manifest       {}", manifest_path.display());
    match abort {
        Some(a) => Outcome {
            code: EXIT_ABORTED,
            stdout: out,
            stderr: format!("{a}\n"),
        },
        None => Outcome {
            code: EXIT_OK,
            stdout: out,
            stderr: String::new(),
        },
    }
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

pub fn stability_check(config: &Path) -> Outcome {
    let (scenario, _) = match load(config) {
        Ok(v) => v,
        Err(o) => return o,
    };
    let cfg = &scenario.sim;
    let ilos = &cfg.ilos;
    let ratio = ilos.k_d / ilos.alpha_d;
    let value = stab_cond_simple_value(ilos);
    let simple = check_stab_cond_simple(ilos);
    let mut out = String::new();
    let _ = writeln!(out, "simplified condition");
    let _ = writeln!(out, "  k_d/alpha_d = {ratio:.4e} (>= 0) {}", verdict(ratio >= 0.0));
    let _ = writeln!(
        out,
        "  (sigma0*alpha_d*delta)^2 + 2*alpha_d*delta*(1 + k_d/alpha_d) = {value:.4e} (<= 1) {}",
        verdict(value <= 1.0)
    );
    match lyapunov_pair_search(ilos, PAIR_SEARCH_SAMPLES) {
        Ok(search) => {
            let r = &search.report;
            let _ = writeln!(
                out,
                "Lyapunov pair search: P = [[1, r], [r, 1]], {} values of r in (0, 1)",
                search.samples
            );
            let _ = writeln!(out, "  best r = {:.4e}", search.r);
            let _ = writeln!(out, "  lambda_min(Gamma) = {:.4e}", r.lambda_min_gamma);
            let _ = writeln!(
                out,
                "  GES threshold = {:.4e} {} (margin {:.4e})",
                r.ges_threshold,
                verdict(r.ges_pass),
                r.ges_margin()
            );
            let _ = writeln!(
                out,
                "  ISS threshold = {:.4e} {}",
                r.iss_threshold,
                verdict(r.iss_pass)
            );
            let _ = writeln!(out, "  Lyapunov residual = {:.4e}", r.lyapunov_residual);
            let d_star = cfg.disturbance.sup_norm();
            if let Ok(radius) = iss_ball_radius(&search.lyap, d_star) {
                let _ = writeln!(out, "ISS ball radius for d* = {d_star:.4e} m/s: {radius:.4e}");
            }
        }
        Err(e) => {
            let _ = writeln!(out, "Lyapunov pair search failed: {e}");
        }
    }
    let _ = writeln!(
        out,
        "predicted along-path speed v* = {:.4e} m/s",
        steady_speed(ilos, cfg.swimmer.e11)
    );
    let _ = writeln!(out, "result: {}", verdict(simple));
    Outcome {
        code: if simple { EXIT_OK } else { EXIT_CHECK_FAILED },
        stdout: out,
        stderr: String::new(),
    }
}

/// Shortest text for `v` rounded to 12 significant digits, without `-0`.
fn short(v: f64) -> f64 {
    let rounded: f64 = format!("{v:.11e}").parse().unwrap_or(v);
    rounded + 0.0
}

pub fn trs(values: &[f64], oracle: bool) -> Outcome {
    let [q1, q2, g1, g2, radius] = match values {
        [a, b, c, d, e] => [*a, *b, *c, *d, *e],
        _ => {
            return Outcome::fail(
                EXIT_CONFIG,
                format!("expected 5 numbers (q1 q2 g1 g2 radius), got {}", values.len()),
            )
        }
    };
    let problem = match TrsProblem::new(q1, q2, Vec2::new(g1, g2), radius) {
        Ok(p) => p,
        Err(e) => return Outcome::fail(EXIT_CONFIG, e.to_string()),
    };
    let sol = match solve_trs_diagonal(&problem) {
        Ok(s) => s,
        Err(e) => return Outcome::fail(EXIT_ABORTED, e.to_string()),
    };
    let kkt = kkt_check(&problem, &sol);
    let mut out = String::new();
    let _ = writeln!(out, "u* = ({}, {})", short(sol.u_star.x), short(sol.u_star.y));
    let _ = writeln!(out, "lambda* = {}", short(sol.lambda_star));
    let _ = writeln!(out, "on boundary = {}", sol.on_boundary);
    let _ = writeln!(out, "objective = {:.12e}", problem.objective(sol.u_star));
    let _ = writeln!(out, "KKT feasibility gap = {:.3e}", kkt.feasibility_gap);
    let _ = writeln!(out, "KKT stationarity = {:.3e}", kkt.stationarity);
    let _ = writeln!(out, "KKT complementarity = {:.3e}", kkt.complementarity);
    let _ = writeln!(out, "KKT curvature margin = {:.3e}", kkt.curvature_margin);
    let _ = writeln!(out, "KKT: {}", verdict(kkt.pass()));
    if oracle {
        let j = problem.objective(sol.u_star);
        let (grid, at) = polar_grid_minimum(&problem, ORACLE_GRID, ORACLE_GRID);
        let scale = grid.abs().max(j.abs()).max(f64::MIN_POSITIVE);
        let _ = writeln!(out, "grid {ORACLE_GRID}x{ORACLE_GRID} minimum = {grid:.12e} at ({}, {})", at.x, at.y);
        let _ = writeln!(out, "objective gap (solver - grid)/|J| = {:.3e}", (j - grid) / scale);
    }
    Outcome {
        code: if kkt.pass() { EXIT_OK } else { EXIT_CHECK_FAILED },
        stdout: out,
        stderr: String::new(),
    }
}

pub fn continuity(config: &Path, deltas: Option<&[f64]>, opts: &Options) -> Outcome {
    let (scenario, _) = match load(config) {
        Ok(v) => v,
        Err(o) => return o,
    };
    let deltas = deltas.unwrap_or(&DEFAULT_DELTAS);
    if let Some(bad) = deltas.iter().find(|d| !(d.is_finite() && **d >= 0.0)) {
        return Outcome::fail(EXIT_CONFIG, format!("delta must be finite and >= 0, got {bad}"));
    }
    let table = match continuity_probe(&scenario.sim, deltas, None) {
        Ok(t) => t,
        Err(a) => return Outcome::fail(EXIT_ABORTED, a.to_string()),
    };
    let mut out = String::new();
    let mut csv = String::from("delta,deviation,ratio\n");
    let _ = writeln!(out, "{:>12} {:>14} {:>14}", "delta [m]", "deviation [m]", "deviation/delta");
    for row in &table.rows {
        let ratio = row.ratio();
        let ratio_text = ratio.map_or("-".to_string(), |r| format!("{r:.6e}"));
        let _ = writeln!(out, "{:>12.3e} {:>14.6e} {:>14}", row.delta, row.deviation, ratio_text);
        let _ = writeln!(csv, "{:.16e},{:.16e},{}", row.delta, row.deviation, ratio.map_or(String::new(), |r| format!("{r:.16e}")));
    }
    if fs::create_dir_all(&opts.out).is_ok() {
        let _ = fs::write(opts.out.join(format!("{}_continuity.csv", stem(config))), csv);
    }
    match table.monotonicity_violation(MONOTONE_TOLERANCE) {
        None => {
            let _ = writeln!(out, "monotone: PASS");
            Outcome {
                code: EXIT_OK,
                stdout: out,
                stderr: String::new(),
            }
        }
        Some((i, j)) => {
            let (a, b) = (table.rows[i], table.rows[j]);
            let _ = writeln!(out, "monotone: FAIL");
            Outcome {
                code: EXIT_CHECK_FAILED,
                stdout: out,
                stderr: format!(
                    "deviation grows from {:.6e} at delta {:.3e} to {:.6e} at delta {:.3e}\n",
                    a.deviation, a.delta, b.deviation, b.delta
                ),
            }
        }
    }
}

/// Read five whitespace-separated numbers from a `.trs` file.
pub fn read_trs_file(path: &Path) -> Result<Vec<f64>, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    text.split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|_| format!("{}: not a number: {t:?}", path.display())))
        .collect()
}
