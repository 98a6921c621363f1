//! Explicit Heun (trapezoidal RK2) integration with a CFL-controlled step.
//!
//! The stepper advances the conserved densities `J u`, `l w`, `l z`, so total
//! masses are preserved up to rounding also while the domain moves. Geometry
//! is re-sampled at both stage times.

use crate::discretization::{
    bulk_flux_divergence, surface_conservative_rhs, Coefficients, Grid, SimulationState,
};
use crate::error::{Error, Result};
use crate::functionals::{diagnostics, DiagnosticsContext, DiagnosticsRow, EquilibriumState, MassPair};
use crate::geometry::MotionPreset;
use crate::io::config::{InitialData, RunConfig};
use crate::params::SystemParameters;

/// Smallest step ever returned by [`cfl_dt`].
pub const MIN_DT: f64 = 1e-12;

/// Stable explicit step at time `t`:
/// `safety * min(0.25 h^2 / D_max, h / |v|_max)` with `h = min(dx, dy)`,
/// where `D_max` includes the metric-scaled bulk diffusivities `A / J`.
pub fn cfl_dt(
    grid: &Grid,
    preset: &MotionPreset,
    params: &SystemParameters,
    t: f64,
    safety: f64,
) -> Result<f64> {
    let coef = Coefficients::at(grid, preset, params, t)?;
    Ok(cfl_dt_with(grid, &coef, params, safety))
}

pub(crate) fn cfl_dt_with(
    grid: &Grid,
    coef: &Coefficients,
    params: &SystemParameters,
    safety: f64,
) -> f64 {
    let h = grid.dx.min(grid.dy);
    let l2 = coef.surface_len * coef.surface_len;
    let d_max = coef
        .max_bulk_diffusivity
        .max(params.delta_gamma / l2)
        .max(params.delta_gamma_p / l2);
    let diffusive = 0.25 * h * h / d_max;
    let advective = if coef.max_speed > 0.0 {
        h / coef.max_speed
    } else {
        f64::INFINITY
    };
    (safety * diffusive.min(advective)).max(MIN_DT)
}

/// Rates of the conserved densities `J u`, `l w`, `l z`.
struct Rates {
    q: Vec<f64>,
    p: Vec<f64>,
    s: Vec<f64>,
}

impl Rates {
    fn of(state: &SimulationState, grid: &Grid, coef: &Coefficients, params: &SystemParameters) -> Self {
        let q = bulk_flux_divergence(state, grid, coef, params);
        let (p, s) = surface_conservative_rhs(state, grid, coef, params);
        Self { q, p, s }
    }
}

/// `(J0 u + a k1 + b k2) / J1` and the surface analogues.
#[allow(clippy::too_many_arguments)]
fn advance(
    state: &SimulationState,
    t1: f64,
    grid: &Grid,
    coef0: &Coefficients,
    coef1: &Coefficients,
    (a, k1): (f64, &Rates),
    (b, k2): (f64, &Rates),
) -> SimulationState {
    let nx = grid.nx;
    let mut u = vec![0.0; grid.bulk_len()];
    for k in 0..=grid.ny {
        let (j0, inv_j1) = (coef0.jacobian[k], 1.0 / coef1.jacobian[k]);
        let r = k * nx..(k + 1) * nx;
        for (((dst, u0), r1), r2) in u[r.clone()].iter_mut().zip(&state.u[r.clone()]).zip(&k1.q[r.clone()]).zip(&k2.q[r]) {
            *dst = (j0 * u0 + a * r1 + b * r2) * inv_j1;
        }
    }
    let (l0, inv_l1) = (coef0.surface_len, 1.0 / coef1.surface_len);
    let surface = |f: &[f64], r1: &[f64], r2: &[f64]| -> Vec<f64> {
        f.iter()
            .zip(r1.iter().zip(r2))
            .map(|(f, (r1, r2))| (l0 * f + a * r1 + b * r2) * inv_l1)
            .collect()
    };
    SimulationState {
        t: t1,
        u,
        w: surface(&state.w, &k1.p, &k2.p),
        z: surface(&state.z, &k1.s, &k2.s),
    }
}

/// Generic Heun step for an autonomous-or-not ODE `y' = f(t, y)`.
pub fn heun_step<F>(y: &[f64], t: f64, dt: f64, mut f: F) -> Vec<f64>
where
    F: FnMut(f64, &[f64]) -> Vec<f64>,
{
    let k1 = f(t, y);
    let pred: Vec<f64> = y.iter().zip(&k1).map(|(y, k)| y + dt * k).collect();
    let k2 = f(t + dt, &pred);
    y.iter()
        .zip(k1.iter().zip(&k2))
        .map(|(y, (a, b))| y + 0.5 * dt * (a + b))
        .collect()
}

/// One Heun step of the coupled system. `dt` must not exceed the CFL step
/// with unit safety factor.
pub fn step(
    state: &SimulationState,
    dt: f64,
    grid: &Grid,
    preset: &MotionPreset,
    params: &SystemParameters,
) -> Result<SimulationState> {
    state.check_shape(grid)?;
    let coef0 = Coefficients::at(grid, preset, params, state.t)?;
    let limit = cfl_dt_with(grid, &coef0, params, 1.0);
    if !(dt > 0.0) || dt > limit * (1.0 + 1e-12) {
        return Err(Error::validation(format!(
            "time step {dt} outside (0, {limit}] allowed by the CFL bound"
        )));
    }
    let coef1 = Coefficients::at(grid, preset, params, state.t + dt)?;
    step_with(state, dt, grid, params, &coef0, &coef1)
}

fn step_with(
    state: &SimulationState,
    dt: f64,
    grid: &Grid,
    params: &SystemParameters,
    coef0: &Coefficients,
    coef1: &Coefficients,
) -> Result<SimulationState> {
    let t1 = state.t + dt;
    let k1 = Rates::of(state, grid, coef0, params);
    let pred = advance(state, t1, grid, coef0, coef1, (dt, &k1), (0.0, &k1));
    if let Some(field) = pred.non_finite_field() {
        return Err(Error::BlowUp { t: t1, field });
    }
    let k2 = Rates::of(&pred, grid, coef1, params);
    let next = advance(state, t1, grid, coef0, coef1, (0.5 * dt, &k1), (0.5 * dt, &k2));
    if let Some(field) = next.non_finite_field() {
        return Err(Error::BlowUp { t: t1, field });
    }
    Ok(next)
}

/// Output of [`run`].
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub grid: Grid,
    /// One row per output time, starting at `t = 0`.
    pub rows: Vec<DiagnosticsRow>,
    /// States at the output times, when requested in the configuration.
    pub states: Vec<SimulationState>,
    pub final_state: SimulationState,
    pub initial_masses: MassPair,
    /// Closed-form equilibrium, when the run is in the entropy regime.
    pub equilibrium: Option<EquilibriumState>,
    pub steps: usize,
}

/// What [`run_with`] hands back once `t_final` is reached.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub final_state: SimulationState,
    pub steps: usize,
    pub context: DiagnosticsContext,
}

/// Integrates `config` from `initial` to `t_final`, calling `observer`
/// with every output state and its diagnostics. An observer error or a
/// blow-up stops the run; everything already handed to the observer stays
/// valid.
pub fn run_with<F>(config: &RunConfig, initial: SimulationState, mut observer: F) -> Result<RunOutcome>
where
    F: FnMut(&SimulationState, &DiagnosticsRow) -> Result<()>,
{
    let grid = config.grid;
    let preset = &config.preset;
    let params = &config.params;
    initial.validate(&grid)?;

    let context = DiagnosticsContext::new(&initial, &grid, preset, params)?;
    let mut state = initial;
    observer(&state, &diagnostics(&state, &grid, preset, params, &context, 0.0)?)?;

    let mut steps = 0usize;
    let mut output_index = 1u64;
    let t_end = config.t_final;
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b.abs().max(1.0);
    let mut coef = Coefficients::at(&grid, preset, params, state.t)?;
    let static_geometry = preset.has_static_geometry();
    while state.t < t_end && !close(state.t, t_end) {
        let next_output = (output_index as f64 * config.output_every).min(t_end);
        let mut dt = cfl_dt_with(&grid, &coef, params, config.cfl_safety);
        let mut lands = false;
        if state.t + dt >= next_output || close(state.t + dt, next_output) {
            dt = next_output - state.t;
            lands = true;
        }
        let next_coef = if static_geometry {
            None
        } else {
            Some(Coefficients::at(&grid, preset, params, state.t + dt)?)
        };
        let mut next = step_with(&state, dt, &grid, params, &coef, next_coef.as_ref().unwrap_or(&coef))?;
        steps += 1;
        if lands {
            next.t = next_output;
            output_index += 1;
            let row = diagnostics(&next, &grid, preset, params, &context, dt)?;
            observer(&next, &row)?;
        }
        state = next;
        if let Some(c) = next_coef {
            coef = c;
        }
    }
    Ok(RunOutcome {
        final_state: state,
        steps,
        context,
    })
}

/// Builds the initial state from `config` and integrates it to `t_final`.
pub fn run(config: &RunConfig) -> Result<Trajectory> {
    let initial = config.initial.build(&config.grid, &config.preset)?;
    run_from(config, initial)
}

/// Like [`run`] but starting from an explicit initial state.
pub fn run_from(config: &RunConfig, initial: SimulationState) -> Result<Trajectory> {
    let mut rows = Vec::new();
    let mut states = Vec::new();
    let keep = config.keep_states;
    let outcome = run_with(config, initial, |s, row| {
        rows.push(row.clone());
        if keep {
            states.push(s.clone());
        }
        Ok(())
    })?;
    Ok(Trajectory {
        grid: config.grid,
        rows,
        states,
        final_state: outcome.final_state,
        initial_masses: outcome.context.initial_masses,
        equilibrium: outcome.context.equilibrium,
        steps: outcome.steps,
    })
}

impl RunConfig {
    /// Minimal configuration used by tests and the verification suites.
    pub fn new(grid: Grid, preset: MotionPreset, params: SystemParameters, t_final: f64, initial: InitialData) -> Self {
        Self {
            grid,
            preset,
            params,
            t_final,
            initial,
            cfl_safety: crate::io::config::DEFAULT_CFL_SAFETY,
            output_every: crate::io::config::DEFAULT_OUTPUT_EVERY,
            keep_states: false,
            output: Default::default(),
            nondimensional: None,
        }
    }
}
