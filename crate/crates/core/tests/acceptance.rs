//! Acceptance criteria at desk scale (64 x 64 nodes on the 2π x 1 strip).
//!
//! Runs as a plain binary so that every criterion prints its own line even
//! when it passes. Exits non-zero if any criterion fails.

use std::f64::consts::{SQRT_2, TAU};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::Instant;

use bsrd_core::discretization::Grid;
use bsrd_core::functionals::{ckp_gap, decay_window, fit_decay_rate, xlog_gap, DiagnosticsRow};
use bsrd_core::io::config::{parse_config_str, FieldSpec, InitialData, MassTargets, ModeTerm};
use bsrd_core::io::csv::{write_diagnostics, write_snapshot};
use bsrd_core::params::{nondimensionalize, redimensionalize, DimensionalParameters, SystemParameters};
use bsrd_core::timestepper::{run, run_from, Trajectory};
use bsrd_core::verify::{
    check_jacobi, continuous_dependence_probe, cross_diffusion_refinement, default_samples,
    generic_initial_data, homogeneous_comparison, max_principle_check, operator_order, sample_presets,
    OperatorId,
};
use bsrd_core::{MotionPreset, RunConfig, SimulationState};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

const N: usize = 64;
/// Growth factor bound for the stability probe on the decay run, frozen from
/// a calibration run (measured 0.8929 for both perturbation sizes).
const C_STAB: f64 = 1.0;

type Outcome = (bool, String);

fn generic_params() -> SystemParameters {
    SystemParameters::new(1.0, 0.5, 0.2, 1.0, 1.0).unwrap()
}

fn desk_run(preset: MotionPreset, params: SystemParameters, t_final: f64, keep: bool) -> Trajectory {
    let grid = Grid::for_preset(N, N, &preset).unwrap();
    let mut config = RunConfig::new(grid, preset, params, t_final, generic_initial_data());
    config.keep_states = keep;
    run(&config).unwrap()
}

/// Generic stationary and breathing runs to `T = 5`, shared by criteria 1-3.
fn generic_runs() -> &'static [(&'static str, Trajectory); 2] {
    static RUNS: OnceLock<[(&'static str, Trajectory); 2]> = OnceLock::new();
    RUNS.get_or_init(|| {
        [
            ("stationary", desk_run(MotionPreset::stationary(TAU, 1.0), generic_params(), 5.0, false)),
            (
                "vertical_breathing",
                desk_run(MotionPreset::vertical_breathing(0.1, 1.0, TAU, 1.0), generic_params(), 5.0, false),
            ),
        ]
    })
}

fn decay_config() -> RunConfig {
    let preset = MotionPreset::stationary(TAU, 1.0);
    let grid = Grid::for_preset(N, N, &preset).unwrap();
    let params = SystemParameters::new(1.0, 0.5, 0.5, 1.0, 1.0).unwrap();
    let initial = InitialData {
        u: FieldSpec::Modes {
            base: 2.0,
            terms: vec![ModeTerm { amplitude: 0.4, kx: 1.0, ky: 0.0, phase: 0.0 }],
        },
        w: FieldSpec::Constant(1.0),
        z: FieldSpec::Constant(0.0),
        normalize: Some(MassTargets { m1: 2.0, m2: 1.0 }),
    };
    let mut config = RunConfig::new(grid, preset, params, 50.0, initial);
    config.cfl_safety = 1.0;
    config.output_every = 0.25;
    config.keep_states = true;
    config
}

/// Run 4: relaxation to equilibrium over `T = 50`.
fn decay_run() -> &'static (RunConfig, SimulationState, Trajectory) {
    static RUN: OnceLock<(RunConfig, SimulationState, Trajectory)> = OnceLock::new();
    RUN.get_or_init(|| {
        let config = decay_config();
        let initial = config.initial.build(&config.grid, &config.preset).unwrap();
        let traj = run_from(&config, initial.clone()).unwrap();
        (config, initial, traj)
    })
}

fn sup(lo: f64, hi: f64) -> f64 {
    lo.abs().max(hi.abs())
}

fn c01_conservation() -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for (name, traj) in generic_runs() {
        let drift = traj
            .rows
            .iter()
            .filter(|r| r.t <= 1.0 + 1e-12)
            .map(|r| r.dm1_rel.max(r.dm2_rel))
            .fold(0.0, f64::max);
        let tol = if *name == "stationary" { 1e-6 } else { 1e-4 };
        ok &= drift <= tol;
        detail.push(format!("{name} drift {drift:.2e} (tol {tol:.0e})"));
    }
    (ok, detail.join(", "))
}

fn c02_non_negativity() -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for (name, traj) in generic_runs() {
        let min = traj
            .rows
            .iter()
            .map(|r| r.u_min.min(r.w_min).min(r.z_min))
            .fold(f64::INFINITY, f64::min);
        ok &= min >= -1e-10;
        detail.push(format!("{name} min {min:.4e}"));
    }
    (ok, detail.join(", "))
}

fn c03_boundedness() -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for (name, traj) in generic_runs() {
        let norms = |r: &DiagnosticsRow| [sup(r.u_min, r.u_max), sup(r.w_min, r.w_max), sup(r.z_min, r.z_max)];
        let mut early = [0.0f64; 3];
        let mut late = [0.0f64; 3];
        for r in &traj.rows {
            let n = norms(r);
            assert!(n.iter().all(|v| v.is_finite()));
            let target = if r.t <= 1.0 + 1e-12 { &mut early } else { &mut late };
            for c in 0..3 {
                target[c] = target[c].max(n[c]);
            }
        }
        let worst = (0..3).map(|c| late[c] / early[c]).fold(0.0, f64::max);
        ok &= worst <= 1.05;
        detail.push(format!("{name} max[1,5]/max[0,1] = {worst:.4}"));
    }
    (ok, detail.join(", "))
}

fn c04_equilibrium() -> Outcome {
    let (_, _, traj) = decay_run();
    let eq = traj.equilibrium.expect("entropy regime");
    let s = &traj.final_state;
    let dist = s
        .u
        .iter()
        .map(|v| (v - eq.u_inf).abs())
        .chain(s.w.iter().map(|v| (v - eq.w_inf).abs()))
        .chain(s.z.iter().map(|v| (v - eq.z_inf).abs()))
        .fold(0.0, f64::max);
    let series: Vec<(f64, f64)> = traj
        .rows
        .iter()
        .map(|r| (r.t, r.relative_entropy.expect("relative entropy available")))
        .collect();
    let window = decay_window(&series, 1e-10, 0.1);
    let fit = fit_decay_rate(&window).unwrap();
    let ok = dist <= 1e-3 && fit.r_squared >= 0.99 && fit.rate > 0.0;
    (
        ok,
        format!(
            "distance {dist:.2e}, K = {:.4}, R2 = {:.4} over {} points",
            fit.rate, fit.r_squared, fit.points
        ),
    )
}

fn c05_ckp() -> Outcome {
    let (config, _, traj) = decay_run();
    let grid = &config.grid;
    let bulk = grid.bulk_weights();
    let line = vec![grid.dx; grid.nx];
    let mut worst = f64::INFINITY;
    for s in &traj.states {
        for (f, w) in [(&s.u, &bulk), (&s.w, &line), (&s.z, &line)] {
            let g = ckp_gap(f, w).unwrap();
            worst = worst.min(g.lhs - g.rhs);
        }
    }
    (
        worst >= -1e-10,
        format!("min(lhs - rhs) = {worst:.3e} over {} output times", traj.states.len()),
    )
}

fn c06_xlog() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = f64::INFINITY;
    for _ in 0..10_000 {
        let x = rng.random_range(1e-6..1e6);
        let y = rng.random_range(1e-6..1e6);
        let g = xlog_gap(x, y).unwrap();
        worst = worst.min(g.gap - g.bound);
    }
    // log-uniform pairs cover the small end of the range as well
    for _ in 0..10_000 {
        let x = 10f64.powf(rng.random_range(-6.0..6.0));
        let y = 10f64.powf(rng.random_range(-6.0..6.0));
        let g = xlog_gap(x, y).unwrap();
        worst = worst.min(g.gap - g.bound);
    }
    (worst >= -1e-12, format!("min(gap - bound) = {worst:.3e} over 2e4 pairs"))
}

fn c07_max_principle() -> Outcome {
    let preset = MotionPreset::stationary(TAU, 1.0);
    let params = SystemParameters::new(1.0, 0.5, 0.5, 1.0, 1.0).unwrap();
    let traj = desk_run(preset, params, 1.0, true);
    let r = max_principle_check(&traj.states, &preset, &params).unwrap();
    (
        r.passes(),
        format!("max(w+z) = {:.15}, max(w0+z0) = {:.15}", r.max_v, r.initial_max),
    )
}

fn c08_cross_diffusion() -> Outcome {
    let (coarse, fine) = cross_diffusion_refinement(32, 0.01).unwrap();
    let ratio = coarse.max_residual / fine.max_residual;
    (
        (3.2..=4.8).contains(&ratio),
        format!(
            "residual {:.3e} (32) / {:.3e} (64) = {ratio:.3}",
            coarse.max_residual, fine.max_residual
        ),
    )
}

fn c09_operators() -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for op in OperatorId::ALL {
        let s = operator_order(op, &[16, 32, 64, 128]).unwrap();
        ok &= s.passes();
        let orders: Vec<String> = s.orders.iter().map(|o| format!("{o:.3}")).collect();
        detail.push(format!("{} [{}]", op.name(), orders.join(", ")));
    }
    (ok, detail.join("; "))
}

fn c10_geometry() -> Outcome {
    let params = SystemParameters::new(0.7, 1.0, 1.0, 1.0, 1.0).unwrap();
    let (mut analytic, mut fd, mut metric, mut compat) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for (_, preset) in sample_presets() {
        let (t, xi) = default_samples(&preset);
        let r = check_jacobi(&preset, &params, &t, &xi).unwrap();
        analytic = analytic.max(r.analytic);
        fd = fd.max(r.finite_difference);
        metric = metric.max(r.geometry);
        compat = compat.max(r.compatibility);
    }
    let ok = analytic <= 1e-10 && fd <= 1e-6 && metric <= 1e-6 && compat <= 1e-14;
    (
        ok,
        format!("analytic {analytic:.1e}, fd {fd:.1e}, metric fd {metric:.1e}, compatibility {compat:.1e}"),
    )
}

fn c11_homogeneous() -> Outcome {
    let (err, ode) = homogeneous_comparison(&SystemParameters::unit(), [2.0, 1.0, 0.0], 10.0, 8, 8).unwrap();
    let eq_err = (ode.u - SQRT_2)
        .abs()
        .max((ode.w - (SQRT_2 - 1.0)).abs())
        .max((ode.z - (2.0 - SQRT_2)).abs());
    (
        err <= 1e-6 && eq_err <= 1e-6,
        format!("PDE vs oracle {err:.2e}, oracle vs closed form {eq_err:.2e}"),
    )
}

fn c12_continuous_dependence() -> Outcome {
    let (config, initial, traj) = decay_run();
    let mut config = config.clone();
    config.keep_states = false;
    let r = continuous_dependence_probe(&config, initial, Some(&traj.final_state), &[1e-3, 1e-4]).unwrap();
    let agreement = (r[0].factor - r[1].factor).abs() / r[1].factor;
    let ok = r[0].factor <= C_STAB && agreement <= 0.1;
    (
        ok,
        format!(
            "factor(1e-3) = {:.4}, factor(1e-4) = {:.4}, C_stab = {C_STAB}, relative difference {agreement:.2e}",
            r[0].factor, r[1].factor
        ),
    )
}

fn c13_nondim() -> Outcome {
    let unit = nondimensionalize(&DimensionalParameters::unit()).unwrap();
    let p = unit.params;
    let ones = [p.delta_omega, p.delta_gamma, p.delta_gamma_p, p.delta_k, p.delta_kp, unit.gamma, unit.gamma_p]
        .iter()
        .all(|&v| v == 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let mut draw = || 10f64.powf(rng.random_range(-8.0..8.0));
        let dim = DimensionalParameters {
            d_ligand: draw(),
            d_receptor: draw(),
            d_complex: draw(),
            k_on: draw(),
            k_off: draw(),
            length: draw(),
            time: draw(),
            u_scale: draw(),
            w_scale: draw(),
            z_scale: draw(),
        };
        let nd = nondimensionalize(&dim).unwrap();
        let back = redimensionalize(&nd.params, &dim.scales()).unwrap();
        for (a, b) in [
            (back.d_ligand, dim.d_ligand),
            (back.d_receptor, dim.d_receptor),
            (back.d_complex, dim.d_complex),
            (back.k_on, dim.k_on),
            (back.k_off, dim.k_off),
        ] {
            worst = worst.max((a - b).abs() / b);
        }
    }
    (
        ones && worst <= 1e-12,
        format!("unit case all ones: {ones}, worst round-trip error {worst:.1e}"),
    )
}

const DETERMINISM_CONFIG: &str = r#"{
  "grid": {"nx": 24, "ny": 16},
  "motion": {"kind": "combined", "amplitude": 0.1, "frequency": 2.0, "tangential_speed": 0.5},
  "params": {"delta_omega": 1, "delta_gamma": 0.5, "delta_gamma_p": 0.2, "delta_k": 1, "delta_kp": 1},
  "initial": {
    "u": {"gaussian": {"center": [3.0, 0.2], "width": 0.4, "height": 2.0, "base": 0.2}},
    "w": {"modes": {"base": 1.0, "terms": [{"amplitude": 0.5, "kx": 1}]}},
    "z": {"constant": 0.1}
  },
  "run": {"t_final": 0.5, "output_every": 0.1}
}"#;

fn run_to_dir(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    std::fs::create_dir_all(dir).unwrap();
    let config = parse_config_str(DETERMINISM_CONFIG, Path::new("determinism.json")).unwrap();
    let traj = run(&config).unwrap();
    write_diagnostics(&traj.rows, dir.join("diagnostics.csv")).unwrap();
    write_snapshot(dir, 0, &traj.final_state, &config.grid, &config.preset).unwrap();
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    files.sort();
    files
        .into_iter()
        .map(|p| (PathBuf::from(p.file_name().unwrap()), std::fs::read(&p).unwrap()))
        .collect()
}

fn c14_determinism() -> Outcome {
    let root = std::env::temp_dir().join(format!("bsrd-acceptance-{}", std::process::id()));
    let a = run_to_dir(&root.join("a"));
    let b = run_to_dir(&root.join("b"));
    let _ = std::fs::remove_dir_all(&root);
    let bytes: usize = a.iter().map(|(_, d)| d.len()).sum();
    (a == b && !a.is_empty(), format!("{} files, {bytes} bytes compared", a.len()))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 14] = [
        ("conservation", c01_conservation),
        ("non-negativity", c02_non_negativity),
        ("uniform boundedness", c03_boundedness),
        ("equilibrium convergence", c04_equilibrium),
        ("CKP audit", c05_ckp),
        ("x-log inequality", c06_xlog),
        ("maximum principle", c07_max_principle),
        ("cross-diffusion structure", c08_cross_diffusion),
        ("operator consistency", c09_operators),
        ("geometry", c10_geometry),
        ("homogeneous oracle", c11_homogeneous),
        ("continuous dependence", c12_continuous_dependence),
        ("non-dimensionalization", c13_nondim),
        ("determinism", c14_determinism),
    ];
    let only: Option<usize> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut failed = 0;
    for (n, (name, check)) in criteria.iter().enumerate() {
        let n = n + 1;
        if only.is_some_and(|o| o != n) {
            continue;
        }
        let start = Instant::now();
        let (ok, detail) = match catch_unwind(AssertUnwindSafe(check)) {
            Ok(outcome) => outcome,
            Err(e) => {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                (false, format!("panicked: {msg}"))
            }
        };
        if !ok {
            failed += 1;
        }
        println!(
            "criterion {n:2} {name:<26} {}  {detail}  ({:.1}s)",
            if ok { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
