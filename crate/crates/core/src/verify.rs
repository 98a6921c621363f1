//! Independent oracles for the discretisation and the diagnostics.
//!
//! Nothing here reuses the production integrator: reference solutions come
//! from closed forms, a spectral Laplacian, a separate RK4 integrator, or
//! finite differences of the flow map.

use std::f64::consts::{PI, TAU};

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::discretization::{bulk_rhs, surface_flux_divergence, surface_laplacian, Grid, SimulationState};
use crate::error::{Error, Result};
use crate::functionals::{ckp_gap, equilibrium, equilibrium_with_affinity, xlog_gap, EquilibriumState};
use crate::geometry::{
    dot, flow_map, geometry_sample, velocity_sample, Mat2, MotionPreset, MEMBRANE_NORMAL, OUTER_NORMAL,
};
use crate::io::config::{FieldSpec, InitialData, ModeTerm, RunConfig};
use crate::params::{nondimensionalize, redimensionalize, DimensionalParameters, SystemParameters};
use crate::timestepper::{cfl_dt, run_from, run_with, step};

pub const ORDER_MIN: f64 = 1.7;
pub const ORDER_MAX: f64 = 2.3;
pub const JACOBI_TOL: f64 = 1e-10;
pub const JACOBI_FD_TOL: f64 = 1e-6;
pub const COMPATIBILITY_TOL: f64 = 1e-14;
pub const MAX_PRINCIPLE_TOL: f64 = 1e-8;
/// Step of the reference RK4 integrator.
pub const ODE_ORACLE_DT: f64 = 1e-5;
/// Finite-difference step for derivatives of the flow map, in space and time.
pub const FD_STEP: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorId {
    /// Laplace-Beltrami on `cos x`; image `-cos x`.
    SurfaceLaplacian,
    /// Stationary bulk operator on the harmonic `cos x cosh y`; image 0.
    BulkHarmonic,
    /// Surface transport with unit speed on `sin x`; image `-cos x`.
    SurfaceAdvection,
}

impl OperatorId {
    pub const ALL: [OperatorId; 3] = [
        OperatorId::SurfaceLaplacian,
        OperatorId::BulkHarmonic,
        OperatorId::SurfaceAdvection,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OperatorId::SurfaceLaplacian => "surface_laplacian",
            OperatorId::BulkHarmonic => "bulk_harmonic",
            OperatorId::SurfaceAdvection => "surface_advection",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OrderStudy {
    pub operator: OperatorId,
    pub resolutions: Vec<usize>,
    /// Max-norm errors, one per resolution.
    pub errors: Vec<f64>,
    /// `log2(e_h / e_{h/2})` for consecutive resolutions.
    pub orders: Vec<f64>,
}

impl OrderStudy {
    pub fn passes(&self) -> bool {
        self.orders.iter().all(|o| (ORDER_MIN..=ORDER_MAX).contains(o))
    }
}

/// Convergence study of one discrete operator against its exact image.
pub fn operator_order(operator: OperatorId, resolutions: &[usize]) -> Result<OrderStudy> {
    if resolutions.len() < 3 || resolutions.windows(2).any(|w| w[1] != 2 * w[0]) {
        return Err(Error::validation(
            "need at least 3 resolutions, each double the previous",
        ));
    }
    let errors = resolutions
        .iter()
        .map(|&n| operator_error(operator, n))
        .collect::<Result<Vec<_>>>()?;
    let orders = errors.windows(2).map(|e| (e[0] / e[1]).log2()).collect();
    Ok(OrderStudy {
        operator,
        resolutions: resolutions.to_vec(),
        errors,
        orders,
    })
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn operator_error(operator: OperatorId, n: usize) -> Result<f64> {
    match operator {
        OperatorId::SurfaceLaplacian => {
            let grid = Grid::new(n, 4, TAU, 1.0)?;
            let f: Vec<f64> = (0..n).map(|i| grid.x(i).cos()).collect();
            let lap = surface_laplacian(&f, &grid, &vec![1.0; n])?;
            let exact: Vec<f64> = f.iter().map(|v| -v).collect();
            Ok(max_abs_diff(&lap, &exact))
        }
        OperatorId::SurfaceAdvection => {
            let grid = Grid::new(n, 4, TAU, 1.0)?;
            let f: Vec<f64> = (0..n).map(|i| grid.x(i).sin()).collect();
            let div = surface_flux_divergence(&f, &vec![1.0; n], 0.0, &vec![1.0; n], grid.dx);
            let exact: Vec<f64> = (0..n).map(|i| -grid.x(i).cos()).collect();
            Ok(max_abs_diff(&div, &exact))
        }
        OperatorId::BulkHarmonic => {
            let preset = MotionPreset::stationary(TAU, 1.0);
            let grid = Grid::for_preset(n, n, &preset)?;
            let mut state = SimulationState::zeros(&grid);
            for k in 0..=grid.ny {
                for i in 0..grid.nx {
                    state.u[grid.idx(i, k)] = grid.x(i).cos() * grid.y(k).cosh();
                }
            }
            let rhs = bulk_rhs(&state, &grid, &preset, &SystemParameters::unit())?;
            // boundary rows carry the Robin and no-flux closures, which the
            // harmonic test field does not satisfy
            Ok(rhs[grid.nx..grid.ny * grid.nx]
                .iter()
                .fold(0.0, |m, v| m.max(v.abs())))
        }
    }
}

/// Worst-case errors of the geometric identities over the samples.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct JacobiReport {
    /// `|dJ/dt - J div V_p| / max(1, |dJ/dt|)` from the analytic formulas.
    pub analytic: f64,
    /// Same with `dJ/dt` from finite differences of the flow map.
    pub finite_difference: f64,
    /// Largest relative deviation of `M`, `A`, `omega`, `V_p` from their
    /// finite-difference counterparts.
    pub geometry: f64,
    /// `|(V_p - V_Gamma) . nu|` on membrane samples.
    pub compatibility: f64,
}

impl JacobiReport {
    pub fn passes(&self) -> bool {
        self.analytic <= JACOBI_TOL
            && self.finite_difference <= JACOBI_FD_TOL
            && self.geometry <= JACOBI_FD_TOL
            && self.compatibility <= COMPATIBILITY_TOL
    }
}

/// Spread of sample times and reference points for [`check_jacobi`],
/// including points on both horizontal boundaries.
pub fn default_samples(preset: &MotionPreset) -> (Vec<f64>, Vec<[f64; 2]>) {
    let times = vec![0.1, 0.37, 1.0, 2.2, 4.9, 7.3];
    let (p, h) = (preset.period, preset.height);
    let mut points = Vec::new();
    for fx in [0.1, 0.45, 0.9] {
        for fy in [0.0, 0.2, 0.5, 0.75, 1.0] {
            points.push([fx * p, fy * h]);
        }
    }
    (times, points)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

/// Derivative of `f` along axis `j` at `xi`, staying inside `[0, hi]` in that
/// axis with second-order one-sided stencils near the ends.
fn partial(f: &impl Fn([f64; 2]) -> Result<[f64; 2]>, xi: [f64; 2], j: usize, hi: f64) -> Result<[f64; 2]> {
    let s = FD_STEP;
    let at = |d: f64| {
        let mut p = xi;
        p[j] += d;
        f(p)
    };
    let combine = |c: [(f64, [f64; 2]); 3]| {
        let mut out = [0.0; 2];
        for (w, v) in c {
            out[0] += w * v[0];
            out[1] += w * v[1];
        }
        [out[0] / (2.0 * s), out[1] / (2.0 * s)]
    };
    if xi[j] - s < 0.0 {
        Ok(combine([(-3.0, at(0.0)?), (4.0, at(s)?), (-1.0, at(2.0 * s)?)]))
    } else if xi[j] + s > hi {
        Ok(combine([(3.0, at(0.0)?), (-4.0, at(-s)?), (1.0, at(-2.0 * s)?)]))
    } else {
        Ok(combine([(1.0, at(s)?), (-1.0, at(-s)?), (0.0, [0.0; 2])]))
    }
}

fn fd_gradient(preset: &MotionPreset, t: f64, xi: [f64; 2]) -> Result<Mat2> {
    let f = |p: [f64; 2]| flow_map(preset, t, p);
    let dx = partial(&f, xi, 0, preset.period)?;
    let dy = partial(&f, xi, 1, preset.height)?;
    Ok(Mat2([[dx[0], dy[0]], [dx[1], dy[1]]]))
}

fn norm(v: [f64; 2]) -> f64 {
    v[0].hypot(v[1])
}

/// Cross-checks the Jacobian rate, the pulled-back geometry and the membrane
/// velocity compatibility of `preset`.
pub fn check_jacobi(
    preset: &MotionPreset,
    params: &SystemParameters,
    t_samples: &[f64],
    xi_samples: &[[f64; 2]],
) -> Result<JacobiReport> {
    preset.validate()?;
    let mut report = JacobiReport {
        analytic: 0.0,
        finite_difference: 0.0,
        geometry: 0.0,
        compatibility: 0.0,
    };
    let s = FD_STEP;
    for &t in t_samples {
        for &xi in xi_samples {
            let g = geometry_sample(preset, t, xi, params)?;
            let v = velocity_sample(preset, t, xi)?;
            let target = g.jacobian * v.div_v_p;
            report.analytic = report.analytic.max(rel(g.jacobian_rate, target));

            let (t_lo, t_hi) = if t >= s { (t - s, t + s) } else { (t, t + 2.0 * s) };
            let j_lo = fd_gradient(preset, t_lo, xi)?.det();
            let j_hi = fd_gradient(preset, t_hi, xi)?.det();
            let rate_fd = (j_hi - j_lo) / (t_hi - t_lo);
            report.finite_difference = report.finite_difference.max(rel(rate_fd, target));

            let grad = fd_gradient(preset, t, xi)?;
            let inv = grad
                .inverse()
                .ok_or_else(|| Error::Geometry(format!("singular finite-difference gradient at t={t}")))?;
            let jac = grad.det();
            let diffusion = (inv * inv.transpose()).scale(params.delta_omega * jac);
            let nu0 = if xi[1] <= 0.5 * preset.height { MEMBRANE_NORMAL } else { OUTER_NORMAL };
            let omega = norm(inv.transpose().apply(nu0));
            let p_lo = flow_map(preset, t_lo, xi)?;
            let p_hi = flow_map(preset, t_hi, xi)?;
            let v_fd = [
                (p_hi[0] - p_lo[0]) / (t_hi - t_lo),
                (p_hi[1] - p_lo[1]) / (t_hi - t_lo),
            ];
            let scale = |m: &Mat2| m.0.iter().flatten().fold(1.0f64, |a, v| a.max(v.abs()));
            report.geometry = report
                .geometry
                .max(inv.max_abs_diff(&g.inv_gradient) / scale(&g.inv_gradient))
                .max(diffusion.max_abs_diff(&g.diffusion) / scale(&g.diffusion))
                .max(rel(jac, g.jacobian))
                .max(rel(omega, g.boundary_metric))
                .max(rel(v_fd[0], v.v_p[0]))
                .max(rel(v_fd[1], v.v_p[1]));

            if xi[1] == 0.0 {
                let m_t = g.inv_gradient.transpose().apply(MEMBRANE_NORMAL);
                let n = norm(m_t);
                let nu = [m_t[0] / n, m_t[1] / n];
                let diff = [v.v_p[0] - v.v_gamma[0], v.v_p[1] - v.v_gamma[1]];
                report.compatibility = report.compatibility.max(dot(diff, nu).abs());
            }
        }
    }
    Ok(report)
}

/// Integrates from `initial` to `t_end` with CFL-limited steps and keeps
/// every intermediate state.
pub fn record_steps(
    grid: &Grid,
    preset: &MotionPreset,
    params: &SystemParameters,
    initial: SimulationState,
    t_end: f64,
    safety: f64,
) -> Result<Vec<SimulationState>> {
    let mut states = vec![initial];
    loop {
        let last = states.last().expect("non-empty");
        let remaining = t_end - last.t;
        if remaining <= 1e-14 * t_end.max(1.0) {
            break;
        }
        let dt = cfl_dt(grid, preset, params, last.t, safety)?.min(remaining);
        let next = step(last, dt, grid, preset, params)?;
        states.push(next);
    }
    Ok(states)
}

/// Exact second derivative of the trigonometric interpolant of periodic
/// samples `f` over `[0, period)`, by a direct DFT.
pub fn spectral_laplacian(f: &[f64], period: f64) -> Vec<f64> {
    let n = f.len();
    let mut out = vec![0.0; n];
    for m in 0..n {
        let wave = if m <= n / 2 { m as f64 } else { m as f64 - n as f64 };
        if wave == 0.0 {
            continue;
        }
        let kappa = TAU * wave / period;
        let (mut re, mut im) = (0.0, 0.0);
        for (j, v) in f.iter().enumerate() {
            let phase = TAU * (m * j % n) as f64 / n as f64;
            re += v * phase.cos();
            im -= v * phase.sin();
        }
        let (re, im) = (re / n as f64, im / n as f64);
        let factor = -kappa * kappa;
        for (j, o) in out.iter_mut().enumerate() {
            let phase = TAU * (m * j % n) as f64 / n as f64;
            *o += factor * (re * phase.cos() - im * phase.sin());
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CrossDiffusionReport {
    /// Largest residual of the `v = w + z` equation over all step pairs.
    pub max_residual: f64,
    pub pairs: usize,
    pub dx: f64,
    pub max_dt: f64,
    /// `max_residual / (dx^2 + max_dt)`.
    pub coefficient: f64,
}

/// Residual of `v_t = dGp Lap v + (dG - dGp) Lap w` for `v = w + z`, evaluated
/// on consecutive states with a spectral Laplacian of the pair averages.
pub fn cross_diffusion_residual(
    states: &[SimulationState],
    grid: &Grid,
    preset: &MotionPreset,
    params: &SystemParameters,
) -> Result<CrossDiffusionReport> {
    if states.len() < 2 {
        return Err(Error::Precondition(format!(
            "cross-diffusion residual needs at least 2 snapshots (got {})",
            states.len()
        )));
    }
    if !preset.is_stationary() {
        return Err(Error::Precondition(
            "cross-diffusion residual is only defined for the stationary preset".into(),
        ));
    }
    let mut max_residual: f64 = 0.0;
    let mut max_dt: f64 = 0.0;
    for pair in states.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        a.check_shape(grid)?;
        b.check_shape(grid)?;
        let dt = b.t - a.t;
        if !(dt > 0.0) {
            return Err(Error::validation("snapshots must be strictly increasing in time"));
        }
        max_dt = max_dt.max(dt);
        let n = grid.nx;
        let w_bar: Vec<f64> = (0..n).map(|i| 0.5 * (a.w[i] + b.w[i])).collect();
        let v_bar: Vec<f64> = (0..n)
            .map(|i| 0.5 * (a.w[i] + a.z[i] + b.w[i] + b.z[i]))
            .collect();
        let lap_w = spectral_laplacian(&w_bar, grid.period);
        let lap_v = spectral_laplacian(&v_bar, grid.period);
        for i in 0..n {
            let dv = (b.w[i] + b.z[i] - a.w[i] - a.z[i]) / dt;
            let rhs = params.delta_gamma_p * lap_v[i] + (params.delta_gamma - params.delta_gamma_p) * lap_w[i];
            max_residual = max_residual.max((dv - rhs).abs());
        }
    }
    Ok(CrossDiffusionReport {
        max_residual,
        pairs: states.len() - 1,
        dx: grid.dx,
        max_dt,
        coefficient: max_residual / (grid.dx * grid.dx + max_dt),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MaxPrincipleReport {
    /// `max_t max_x (w + z)`.
    pub max_v: f64,
    /// `max_x (w0 + z0)`.
    pub initial_max: f64,
}

impl MaxPrincipleReport {
    pub fn passes(&self) -> bool {
        self.max_v <= self.initial_max + MAX_PRINCIPLE_TOL
    }
}

/// Largest total receptor density along `states`, compared with its initial
/// maximum. Requires equal receptor and complex diffusivities.
pub fn max_principle_check(
    states: &[SimulationState],
    preset: &MotionPreset,
    params: &SystemParameters,
) -> Result<MaxPrincipleReport> {
    if !preset.is_stationary() {
        return Err(Error::Precondition(
            "maximum principle check needs the stationary preset".into(),
        ));
    }
    if params.delta_gamma != params.delta_gamma_p {
        return Err(Error::Precondition(format!(
            "maximum principle check needs delta_gamma == delta_gamma_p (got {} and {})",
            params.delta_gamma, params.delta_gamma_p
        )));
    }
    let first = states
        .first()
        .ok_or_else(|| Error::Precondition("no snapshots".into()))?;
    let v_max = |s: &SimulationState| {
        s.w.iter()
            .zip(&s.z)
            .fold(f64::NEG_INFINITY, |m, (w, z)| m.max(w + z))
    };
    Ok(MaxPrincipleReport {
        max_v: states.iter().map(v_max).fold(f64::NEG_INFINITY, f64::max),
        initial_max: v_max(first),
    })
}

/// One sample of the homogeneous reference trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OdePoint {
    pub t: f64,
    pub u: f64,
    pub w: f64,
    pub z: f64,
}

/// Spatially constant dynamics `u' = ratio r`, `w' = r`, `z' = -r` with
/// `ratio = |Gamma| / |Omega|`, integrated by classical RK4 with steps of at
/// most [`ODE_ORACLE_DT`] and sampled at `times` (non-decreasing, from 0).
pub fn homogeneous_ode_oracle(
    params: &SystemParameters,
    initial: [f64; 3],
    ratio: f64,
    times: &[f64],
) -> Result<Vec<OdePoint>> {
    params.validate()?;
    if initial.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
        return Err(Error::domain("initial constants must be finite and non-negative"));
    }
    if !(ratio > 0.0 && ratio.is_finite()) {
        return Err(Error::domain("surface-to-bulk ratio must be positive"));
    }
    if times.iter().any(|t| !(*t >= 0.0)) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::validation("sample times must be non-negative and sorted"));
    }
    let f = |y: [f64; 3]| {
        let r = y[2] / params.delta_kp - y[0] * y[1] / params.delta_k;
        [ratio * r, r, -r]
    };
    let add = |y: [f64; 3], k: [f64; 3], h: f64| [y[0] + h * k[0], y[1] + h * k[1], y[2] + h * k[2]];
    let mut y = initial;
    let mut t = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &target in times {
        let span = target - t;
        let n = (span / ODE_ORACLE_DT).ceil() as usize;
        if n > 0 {
            let h = span / n as f64;
            for _ in 0..n {
                let k1 = f(y);
                let k2 = f(add(y, k1, 0.5 * h));
                let k3 = f(add(y, k2, 0.5 * h));
                let k4 = f(add(y, k3, h));
                for c in 0..3 {
                    y[c] += h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
                }
            }
        }
        t = target;
        out.push(OdePoint { t, u: y[0], w: y[1], z: y[2] });
    }
    Ok(out)
}

/// Damped Newton solve of the equilibrium system, used to cross-check the
/// closed-form root.
pub fn equilibrium_newton(m1: f64, m2: f64, area: f64, len: f64, kappa: f64) -> Result<EquilibriumState> {
    // g(u) = |O| u + |G| z(u) - M1 with z(u) = kappa u M2 / (|G| (1 + kappa u))
    let g = |u: f64| area * u + kappa * u * m2 / (1.0 + kappa * u) - m1;
    let dg = |u: f64| area + kappa * m2 / ((1.0 + kappa * u) * (1.0 + kappa * u));
    let mut u = m1 / area;
    for _ in 0..200 {
        let step = g(u) / dg(u);
        let mut next = u - step;
        while next < 0.0 {
            next = 0.5 * (u + next.max(0.0));
        }
        if (next - u).abs() <= 1e-16 * u.abs().max(1e-300) {
            u = next;
            break;
        }
        u = next;
    }
    if !u.is_finite() {
        return Err(Error::Fit("Newton iteration diverged".into()));
    }
    let w = m2 / (len * (1.0 + kappa * u));
    Ok(EquilibriumState { u_inf: u, w_inf: w, z_inf: kappa * u * w })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DependenceReport {
    pub epsilon: f64,
    pub initial_distance: f64,
    pub final_distance: f64,
    /// `final_distance / initial_distance`, or 0 when both vanish.
    pub factor: f64,
}

/// Combined `L2` distance of two states on the same grid at the same time.
pub fn l2_distance(a: &SimulationState, b: &SimulationState, grid: &Grid, preset: &MotionPreset) -> Result<f64> {
    a.check_shape(grid)?;
    b.check_shape(grid)?;
    let params = SystemParameters::unit();
    let mut sum = 0.0;
    for k in 0..=grid.ny {
        let jac = geometry_sample(preset, a.t, [0.0, grid.y(k)], &params)?.jacobian;
        let w = jac * grid.dx * grid.row_weight(k);
        for i in 0..grid.nx {
            let n = grid.idx(i, k);
            sum += w * (a.u[n] - b.u[n]).powi(2);
        }
    }
    let ell = geometry_sample(preset, a.t, [0.0, 0.0], &params)?.surface_len;
    for i in 0..grid.nx {
        sum += ell * grid.dx * ((a.w[i] - b.w[i]).powi(2) + (a.z[i] - b.z[i]).powi(2));
    }
    Ok(sum.sqrt())
}

/// Positive bulk profile `1 + cos(2x) cos(pi y / H) / 2` scaled to unit
/// `L2` norm at `t = 0`.
pub fn perturbation_profile(grid: &Grid, preset: &MotionPreset) -> Result<Vec<f64>> {
    let mut phi = SimulationState::zeros(grid);
    for k in 0..=grid.ny {
        for i in 0..grid.nx {
            let x = TAU * grid.x(i) / grid.period;
            phi.u[grid.idx(i, k)] = 1.0 + 0.5 * (2.0 * x).cos() * (PI * grid.y(k) / grid.height).cos();
        }
    }
    let n = l2_distance(&phi, &SimulationState::zeros(grid), grid, preset)?;
    Ok(phi.u.iter().map(|v| v / n).collect())
}

fn final_state(config: &RunConfig, initial: SimulationState) -> Result<SimulationState> {
    Ok(run_with(config, initial, |_, _| Ok(()))?.final_state)
}

/// Runs one perturbed problem per entry of `epsilons` (bulk data shifted by
/// `eps * phi`) concurrently with the unperturbed one, and reports the growth
/// of their distance. Pass `base` to reuse an unperturbed final state that was
/// already computed from `initial`.
pub fn continuous_dependence_probe(
    config: &RunConfig,
    initial: &SimulationState,
    base: Option<&SimulationState>,
    epsilons: &[f64],
) -> Result<Vec<DependenceReport>> {
    let grid = &config.grid;
    let preset = &config.preset;
    let phi = perturbation_profile(grid, preset)?;
    let perturbed: Vec<SimulationState> = epsilons
        .iter()
        .map(|&eps| {
            let mut s = initial.clone();
            s.u.iter_mut().zip(&phi).for_each(|(u, p)| *u += eps * p);
            s
        })
        .collect();
    let (base, others) = std::thread::scope(|scope| {
        let handles: Vec<_> = perturbed
            .iter()
            .map(|s| {
                let s = s.clone();
                scope.spawn(move || final_state(config, s))
            })
            .collect();
        let base = match base {
            Some(b) => Ok(b.clone()),
            None => final_state(config, initial.clone()),
        };
        let others: Vec<Result<SimulationState>> = handles
            .into_iter()
            .map(|h| h.join().expect("probe thread panicked"))
            .collect();
        (base, others)
    });
    let base = base?;
    let mut reports = Vec::with_capacity(epsilons.len());
    for ((eps, start), end) in epsilons.iter().zip(&perturbed).zip(others) {
        let end = end?;
        let d0 = l2_distance(start, initial, grid, preset)?;
        let d1 = l2_distance(&end, &base, grid, preset)?;
        reports.push(DependenceReport {
            epsilon: *eps,
            initial_distance: d0,
            final_distance: d1,
            factor: if d0 == 0.0 { 0.0 } else { d1 / d0 },
        });
    }
    Ok(reports)
}

/// One line of a verification table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub suite: &'static str,
    pub check: String,
    pub value: f64,
    /// Human-readable acceptance rule for `value`.
    pub criterion: String,
    pub passed: bool,
}

impl CheckOutcome {
    fn new(suite: &'static str, check: impl Into<String>, value: f64, criterion: impl Into<String>, passed: bool) -> Self {
        Self {
            suite,
            check: check.into(),
            value,
            criterion: criterion.into(),
            passed,
        }
    }
}

pub const SUITES: [&str; 10] = [
    "operators",
    "geometry",
    "equilibrium",
    "xlog",
    "ckp",
    "nondim",
    "homogeneous",
    "max_principle",
    "cross_diffusion",
    "continuous_dependence",
];

/// Runs one named suite at desk scale.
pub fn run_suite(name: &str) -> Result<Vec<CheckOutcome>> {
    match name {
        "operators" => suite_operators(),
        "geometry" => suite_geometry(),
        "equilibrium" => suite_equilibrium(),
        "xlog" => suite_xlog(),
        "ckp" => suite_ckp(),
        "nondim" => suite_nondim(),
        "homogeneous" => suite_homogeneous(),
        "max_principle" => suite_max_principle(),
        "cross_diffusion" => suite_cross_diffusion(),
        "continuous_dependence" => suite_continuous_dependence(),
        other => Err(Error::validation(format!(
            "unknown suite {other:?}; available suites: {}",
            SUITES.join(", ")
        ))),
    }
}

fn suite_operators() -> Result<Vec<CheckOutcome>> {
    OperatorId::ALL
        .iter()
        .map(|&op| {
            let study = operator_order(op, &[16, 32, 64, 128])?;
            let worst = study
                .orders
                .iter()
                .copied()
                .fold(2.0f64, |w, o| if (o - 2.0).abs() > (w - 2.0).abs() { o } else { w });
            Ok(CheckOutcome::new(
                "operators",
                op.name(),
                worst,
                format!("order in [{ORDER_MIN}, {ORDER_MAX}]"),
                study.passes(),
            ))
        })
        .collect()
}

/// Presets exercised by the geometry and conservation checks.
pub fn sample_presets() -> Vec<(&'static str, MotionPreset)> {
    vec![
        ("stationary", MotionPreset::stationary(TAU, 1.0)),
        ("vertical_breathing", MotionPreset::vertical_breathing(0.1, 1.0, TAU, 1.0)),
        ("tangential_flow", MotionPreset::tangential_flow(0.5, TAU, 1.0)),
        ("combined", MotionPreset::combined(0.3, 2.0, -0.4, 3.0, 2.0)),
    ]
}

fn suite_geometry() -> Result<Vec<CheckOutcome>> {
    let params = SystemParameters::new(0.7, 1.0, 1.0, 1.0, 1.0)?;
    let mut out = Vec::new();
    for (name, preset) in sample_presets() {
        let (times, points) = default_samples(&preset);
        let r = check_jacobi(&preset, &params, &times, &points)?;
        out.push(CheckOutcome::new("geometry", format!("{name}/jacobi"), r.analytic, format!("<= {JACOBI_TOL:e}"), r.analytic <= JACOBI_TOL));
        out.push(CheckOutcome::new("geometry", format!("{name}/jacobi_fd"), r.finite_difference, format!("<= {JACOBI_FD_TOL:e}"), r.finite_difference <= JACOBI_FD_TOL));
        out.push(CheckOutcome::new("geometry", format!("{name}/metric_fd"), r.geometry, format!("<= {JACOBI_FD_TOL:e}"), r.geometry <= JACOBI_FD_TOL));
        out.push(CheckOutcome::new("geometry", format!("{name}/compatibility"), r.compatibility, format!("<= {COMPATIBILITY_TOL:e}"), r.compatibility <= COMPATIBILITY_TOL));
    }
    Ok(out)
}

fn suite_equilibrium() -> Result<Vec<CheckOutcome>> {
    let cases = [
        (2.0, 1.0, 1.0, 1.0, 1.0),
        (1e-3, 5.0, TAU, TAU, 1.0),
        (50.0, 0.01, 2.0, 3.0, 4.0),
        (7.0, 7.0, 0.5, 9.0, 0.1),
    ];
    let mut worst: f64 = 0.0;
    for (m1, m2, area, len, kappa) in cases {
        let a = equilibrium_with_affinity(m1, m2, area, len, kappa)?;
        let b = equilibrium_newton(m1, m2, area, len, kappa)?;
        worst = worst
            .max(rel(a.u_inf, b.u_inf))
            .max(rel(a.w_inf, b.w_inf))
            .max(rel(a.z_inf, b.z_inf));
    }
    let unit = equilibrium(2.0, 1.0, 1.0, 1.0)?;
    let sqrt2 = 2f64.sqrt();
    let closed = (unit.u_inf - sqrt2)
        .abs()
        .max((unit.w_inf - (sqrt2 - 1.0)).abs())
        .max((unit.z_inf - (2.0 - sqrt2)).abs());
    Ok(vec![
        CheckOutcome::new("equilibrium", "closed_form_vs_newton", worst, "<= 1e-12", worst <= 1e-12),
        CheckOutcome::new("equilibrium", "unit_case_sqrt2", closed, "<= 1e-15", closed <= 1e-15),
    ])
}

fn suite_xlog() -> Result<Vec<CheckOutcome>> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0006);
    let mut worst = f64::INFINITY;
    for _ in 0..10_000 {
        let x = 10f64.powf(rng.random_range(-6.0..6.0));
        let y = 10f64.powf(rng.random_range(-6.0..6.0));
        let g = xlog_gap(x, y)?;
        worst = worst.min(g.gap - g.bound);
    }
    Ok(vec![CheckOutcome::new(
        "xlog",
        "min(gap - bound) over 1e4 pairs",
        worst,
        ">= -1e-12",
        worst >= -1e-12,
    )])
}

fn suite_ckp() -> Result<Vec<CheckOutcome>> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0005);
    let mut worst = f64::INFINITY;
    for _ in 0..1_000 {
        let n = rng.random_range(2..64);
        let f: Vec<f64> = (0..n).map(|_| 10f64.powf(rng.random_range(-4.0..3.0))).collect();
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..1.0)).collect();
        let g = ckp_gap(&f, &w)?;
        worst = worst.min(g.lhs - g.rhs);
    }
    Ok(vec![CheckOutcome::new("ckp", "min(lhs - rhs) over 1e3 fields", worst, ">= -1e-10", worst >= -1e-10)])
}

fn suite_nondim() -> Result<Vec<CheckOutcome>> {
    let unit = nondimensionalize(&DimensionalParameters::unit())?;
    let p = unit.params;
    let unit_err = [p.delta_omega, p.delta_gamma, p.delta_gamma_p, p.delta_k, p.delta_kp, unit.gamma, unit.gamma_p]
        .iter()
        .fold(0.0f64, |m, v| m.max((v - 1.0).abs()));
    let dim = DimensionalParameters {
        d_ligand: 3.2e-9,
        d_receptor: 1.5e-13,
        d_complex: 7.0e-14,
        k_on: 2.0e5,
        k_off: 1.3e-3,
        length: 1.0e-5,
        time: 120.0,
        u_scale: 4.0e-8,
        w_scale: 1.0e-11,
        z_scale: 3.0e-12,
    };
    let nd = nondimensionalize(&dim)?;
    let back = redimensionalize(&nd.params, &dim.scales())?;
    let pairs = [
        (back.d_ligand, dim.d_ligand),
        (back.d_receptor, dim.d_receptor),
        (back.d_complex, dim.d_complex),
        (back.k_on, dim.k_on),
        (back.k_off, dim.k_off),
    ];
    let trip = pairs.iter().fold(0.0f64, |m, (a, b)| m.max((a - b).abs() / b.abs()));
    Ok(vec![
        CheckOutcome::new("nondim", "unit_scales_all_ones", unit_err, "== 0", unit_err == 0.0),
        CheckOutcome::new("nondim", "round_trip", trip, "<= 1e-12", trip <= 1e-12),
    ])
}

/// Stationary unit-cell comparison of the full solver started from constant
/// data against the homogeneous oracle at `t_final`. Returns the max error
/// over all nodes and the oracle endpoint.
pub fn homogeneous_comparison(
    params: &SystemParameters,
    initial: [f64; 3],
    t_final: f64,
    nx: usize,
    ny: usize,
) -> Result<(f64, OdePoint)> {
    let preset = MotionPreset::stationary(1.0, 1.0);
    let grid = Grid::for_preset(nx, ny, &preset)?;
    let mut config = RunConfig::new(
        grid,
        preset,
        *params,
        t_final,
        InitialData::constant(initial[0], initial[1], initial[2]),
    );
    config.output_every = t_final.max(f64::MIN_POSITIVE);
    let traj = run_from(&config, SimulationState::constant(&grid, initial[0], initial[1], initial[2]))?;
    let ratio = preset.membrane_length(0.0) / preset.bulk_area(0.0);
    let ode = homogeneous_ode_oracle(params, initial, ratio, &[t_final])?[0];
    let s = &traj.final_state;
    let err = s
        .u
        .iter()
        .map(|v| (v - ode.u).abs())
        .chain(s.w.iter().map(|v| (v - ode.w).abs()))
        .chain(s.z.iter().map(|v| (v - ode.z).abs()))
        .fold(0.0, f64::max);
    Ok((err, ode))
}

fn suite_homogeneous() -> Result<Vec<CheckOutcome>> {
    let params = SystemParameters::unit();
    let (err, ode) = homogeneous_comparison(&params, [2.0, 1.0, 0.0], 10.0, 8, 8)?;
    let sqrt2 = 2f64.sqrt();
    let eq_err = (ode.u - sqrt2)
        .abs()
        .max((ode.w - (sqrt2 - 1.0)).abs())
        .max((ode.z - (2.0 - sqrt2)).abs());
    let path = homogeneous_ode_oracle(&params, [2.0, 1.0, 0.0], 1.0, &[0.5, 1.0, 2.0, 5.0])?;
    let drift = path
        .iter()
        .map(|p| ((p.u + p.z) - 2.0).abs().max(((p.w + p.z) - 1.0).abs()))
        .fold(0.0, f64::max);
    Ok(vec![
        CheckOutcome::new("homogeneous", "pde_vs_oracle_at_T10", err, "<= 1e-6", err <= 1e-6),
        CheckOutcome::new("homogeneous", "oracle_vs_equilibrium", eq_err, "<= 1e-6", eq_err <= 1e-6),
        CheckOutcome::new("homogeneous", "oracle_invariants", drift, "<= 1e-10", drift <= 1e-10),
    ])
}

/// Smooth positive data used by the generic runs: `u = 1 + 0.3 cos x cos(pi y)`,
/// `w = 1 + 0.5 cos x`, `z = 0.5 + 0.25 sin 2x` on a `2 pi` period.
pub fn generic_initial_data() -> InitialData {
    let term = |amplitude: f64, kx: f64, ky: f64, phase: f64| ModeTerm { amplitude, kx, ky, phase };
    InitialData {
        u: FieldSpec::Modes { base: 1.0, terms: vec![term(0.3, 1.0, 1.0, 0.0)] },
        w: FieldSpec::Modes { base: 1.0, terms: vec![term(0.5, 1.0, 0.0, 0.0)] },
        z: FieldSpec::Modes { base: 0.5, terms: vec![term(0.25, 2.0, 0.0, -0.5 * PI)] },
        normalize: None,
    }
}

fn suite_max_principle() -> Result<Vec<CheckOutcome>> {
    let preset = MotionPreset::stationary(TAU, 1.0);
    let grid = Grid::for_preset(32, 32, &preset)?;
    let params = SystemParameters::new(1.0, 0.5, 0.5, 1.0, 1.0)?;
    let mut config = RunConfig::new(grid, preset, params, 1.0, generic_initial_data());
    config.keep_states = true;
    let traj = crate::timestepper::run(&config)?;
    let r = max_principle_check(&traj.states, &preset, &params)?;
    Ok(vec![CheckOutcome::new(
        "max_principle",
        "max(w+z) - max(w0+z0)",
        r.max_v - r.initial_max,
        format!("<= {MAX_PRINCIPLE_TOL:e}"),
        r.passes(),
    )])
}

/// Residuals of the `v` equation on the generic run at `n` and `2n` nodes per
/// axis, over `[0, t_end]`.
pub fn cross_diffusion_refinement(n: usize, t_end: f64) -> Result<(CrossDiffusionReport, CrossDiffusionReport)> {
    let preset = MotionPreset::stationary(TAU, 1.0);
    let params = SystemParameters::new(1.0, 0.5, 0.2, 1.0, 1.0)?;
    let run = |n: usize| -> Result<CrossDiffusionReport> {
        let grid = Grid::for_preset(n, n, &preset)?;
        let init = generic_initial_data().build(&grid, &preset)?;
        let states = record_steps(&grid, &preset, &params, init, t_end, crate::io::config::DEFAULT_CFL_SAFETY)?;
        cross_diffusion_residual(&states, &grid, &preset, &params)
    };
    Ok((run(n)?, run(2 * n)?))
}

fn suite_cross_diffusion() -> Result<Vec<CheckOutcome>> {
    let (coarse, fine) = cross_diffusion_refinement(32, 0.01)?;
    let ratio = coarse.max_residual / fine.max_residual;
    Ok(vec![CheckOutcome::new(
        "cross_diffusion",
        "residual ratio 32 -> 64",
        ratio,
        "in [3.2, 4.8]",
        (3.2..=4.8).contains(&ratio),
    )])
}

fn suite_continuous_dependence() -> Result<Vec<CheckOutcome>> {
    let preset = MotionPreset::stationary(TAU, 1.0);
    let grid = Grid::for_preset(16, 16, &preset)?;
    let params = SystemParameters::new(1.0, 0.5, 0.5, 1.0, 1.0)?;
    let mut config = RunConfig::new(grid, preset, params, 2.0, generic_initial_data());
    config.output_every = 2.0;
    let initial = config.initial.build(&grid, &preset)?;
    let r = continuous_dependence_probe(&config, &initial, None, &[0.0, 1e-3, 1e-4])?;
    let agreement = (r[1].factor - r[2].factor).abs() / r[2].factor;
    Ok(vec![
        CheckOutcome::new("continuous_dependence", "zero perturbation", r[0].final_distance, "== 0", r[0].final_distance == 0.0),
        CheckOutcome::new("continuous_dependence", "factor(1e-3) vs factor(1e-4)", agreement, "<= 0.1", agreement <= 0.1),
    ])
}
