//! Shared fixtures for the benchmarks.

use bsrd_core::{Grid, MotionPreset, SimulationState, SystemParameters};

/// A smooth positive state on an `n x n` grid over the `2π x 1` strip.
pub fn fixture(n: usize, preset: MotionPreset) -> (Grid, MotionPreset, SystemParameters, SimulationState) {
    let grid = Grid::for_preset(n, n, &preset).expect("valid grid");
    let mut state = SimulationState::zeros(&grid);
    for k in 0..=grid.ny {
        for i in 0..grid.nx {
            state.u[grid.idx(i, k)] = 1.0 + 0.3 * grid.x(i).cos() * (grid.y(k) * 2.0).cos();
        }
    }
    for i in 0..grid.nx {
        state.w[i] = 1.0 + 0.2 * grid.x(i).sin();
        state.z[i] = 0.5;
    }
    let params = SystemParameters::new(1.0, 0.5, 0.2, 1.0, 1.0).expect("valid parameters");
    (grid, preset, params, state)
}
