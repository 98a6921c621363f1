//! JSON run configuration.
//!
//! ```json
//! {
//!   "grid":    { "nx": 64, "ny": 64 },
//!   "motion":  { "kind": "vertical_breathing", "amplitude": 0.1, "frequency": 1.0 },
//!   "params":  { "delta_omega": 1, "delta_gamma": 0.5, "delta_gamma_p": 0.2, "delta_k": 1, "delta_kp": 1 },
//!   "initial": { "u": { "constant": 1.0 }, "w": { "constant": 1.0 }, "z": { "constant": 0.0 } },
//!   "run":     { "t_final": 1.0 },
//!   "output":  { "dir": "out" }
//! }
//! ```
//!
//! `params` may be replaced by a `dimensional` block holding physical
//! constants and scales. Unknown keys are rejected everywhere.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::discretization::{Grid, SimulationState};
use crate::error::{Error, Result};
use crate::functionals::masses;
use crate::geometry::MotionPreset;
use crate::params::{nondimensionalize, DimensionalParameters, Nondimensional, SystemParameters};

pub const DEFAULT_CFL_SAFETY: f64 = 0.4;
pub const DEFAULT_OUTPUT_EVERY: f64 = 0.05;

/// One term `amplitude cos(kx x + phase) cos(ky pi y / H)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeTerm {
    pub amplitude: f64,
    #[serde(default)]
    pub kx: f64,
    #[serde(default)]
    pub ky: f64,
    #[serde(default)]
    pub phase: f64,
}

/// Initial profile of one field. Surface fields are evaluated at `y = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    Constant(f64),
    /// `base + height exp(-|p - center|^2 / (2 width^2))`, periodic in x.
    Gaussian {
        center: [f64; 2],
        width: f64,
        height: f64,
        #[serde(default)]
        base: f64,
    },
    /// `base + sum of mode terms`.
    Modes {
        #[serde(default)]
        base: f64,
        terms: Vec<ModeTerm>,
    },
    /// Explicit node values in grid order.
    Values(Vec<f64>),
}

impl FieldSpec {
    fn eval(&self, x: f64, y: f64, period: f64, height: f64) -> f64 {
        match self {
            FieldSpec::Constant(c) => *c,
            FieldSpec::Gaussian {
                center,
                width,
                height: amp,
                base,
            } => {
                let mut dx = (x - center[0]).rem_euclid(period);
                if dx > 0.5 * period {
                    dx -= period;
                }
                let dy = y - center[1];
                base + amp * (-(dx * dx + dy * dy) / (2.0 * width * width)).exp()
            }
            FieldSpec::Modes { base, terms } => {
                base + terms
                    .iter()
                    .map(|m| {
                        m.amplitude
                            * (m.kx * x + m.phase).cos()
                            * (m.ky * std::f64::consts::PI * y / height).cos()
                    })
                    .sum::<f64>()
            }
            FieldSpec::Values(_) => unreachable!("explicit values are copied, not evaluated"),
        }
    }

    fn validate(&self, name: &str) -> Result<()> {
        if let FieldSpec::Gaussian { width, .. } = self {
            if !(*width > 0.0) {
                return Err(Error::validation(format!("initial.{name}.gaussian.width must be positive")));
            }
        }
        Ok(())
    }

    fn bulk(&self, grid: &Grid, name: &str) -> Result<Vec<f64>> {
        if let FieldSpec::Values(v) = self {
            if v.len() != grid.bulk_len() {
                return Err(Error::validation(format!(
                    "initial.{name}.values needs {} entries, got {}",
                    grid.bulk_len(),
                    v.len()
                )));
            }
            return Ok(v.clone());
        }
        let mut out = Vec::with_capacity(grid.bulk_len());
        for k in 0..=grid.ny {
            for i in 0..grid.nx {
                out.push(self.eval(grid.x(i), grid.y(k), grid.period, grid.height));
            }
        }
        Ok(out)
    }

    fn surface(&self, grid: &Grid, name: &str) -> Result<Vec<f64>> {
        if let FieldSpec::Values(v) = self {
            if v.len() != grid.nx {
                return Err(Error::validation(format!(
                    "initial.{name}.values needs {} entries, got {}",
                    grid.nx,
                    v.len()
                )));
            }
            return Ok(v.clone());
        }
        Ok((0..grid.nx)
            .map(|i| self.eval(grid.x(i), 0.0, grid.period, grid.height))
            .collect())
    }
}

/// Mass targets the initial data is rescaled to.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MassTargets {
    #[serde(rename = "M1")]
    pub m1: f64,
    #[serde(rename = "M2")]
    pub m2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialData {
    pub u: FieldSpec,
    pub w: FieldSpec,
    pub z: FieldSpec,
    /// When present, `w` and `z` are scaled to reach `M2`, then `u` to reach `M1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalize: Option<MassTargets>,
}

impl InitialData {
    pub fn constant(u: f64, w: f64, z: f64) -> Self {
        Self {
            u: FieldSpec::Constant(u),
            w: FieldSpec::Constant(w),
            z: FieldSpec::Constant(z),
            normalize: None,
        }
    }

    fn validate(&self) -> Result<()> {
        self.u.validate("u")?;
        self.w.validate("w")?;
        self.z.validate("z")?;
        if let Some(m) = self.normalize {
            if !(m.m1 >= 0.0 && m.m2 >= 0.0) {
                return Err(Error::validation("initial.normalize masses must be non-negative"));
            }
        }
        Ok(())
    }

    /// Evaluates the profiles on `grid` at `t = 0`.
    pub fn build(&self, grid: &Grid, preset: &MotionPreset) -> Result<SimulationState> {
        let mut state = SimulationState {
            t: 0.0,
            u: self.u.bulk(grid, "u")?,
            w: self.w.surface(grid, "w")?,
            z: self.z.surface(grid, "z")?,
        };
        if let Some(target) = self.normalize {
            let current = masses(&state, grid, preset)?;
            if current.m2 > 0.0 {
                let s = target.m2 / current.m2;
                state.w.iter_mut().chain(state.z.iter_mut()).for_each(|v| *v *= s);
            } else if target.m2 > 0.0 {
                return Err(Error::validation("cannot normalize M2: w and z are zero"));
            }
            let z_mass = masses(&SimulationState { u: vec![0.0; grid.bulk_len()], ..state.clone() }, grid, preset)?.m1;
            let u_mass = masses(&state, grid, preset)?.m1 - z_mass;
            let needed = target.m1 - z_mass;
            if needed < 0.0 {
                return Err(Error::validation(format!(
                    "cannot normalize M1={}: complexes alone carry {z_mass}",
                    target.m1
                )));
            }
            if u_mass > 0.0 {
                let s = needed / u_mass;
                state.u.iter_mut().for_each(|v| *v *= s);
            } else if needed > 0.0 {
                return Err(Error::validation("cannot normalize M1: u is zero"));
            }
        }
        Ok(state)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Output directory (default `out`; the `BSRD_OUT` variable overrides it).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    /// Interval between state snapshots; snapshots are only written when set.
    /// Must be a multiple of the diagnostics interval to take effect exactly.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_every: Option<f64>,
}

/// Fully validated run description.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub grid: Grid,
    pub preset: MotionPreset,
    pub params: SystemParameters,
    pub t_final: f64,
    pub initial: InitialData,
    pub cfl_safety: f64,
    pub output_every: f64,
    /// Keep every output state in memory (see [`crate::timestepper::run`]).
    pub keep_states: bool,
    pub output: OutputConfig,
    /// Conversion result when the configuration gave dimensional constants.
    pub nondimensional: Option<Nondimensional>,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.preset.validate()?;
        self.params.validate()?;
        self.initial.validate()?;
        if self.grid.period != self.preset.period || self.grid.height != self.preset.height {
            return Err(Error::validation("grid extent must match motion.period and motion.height"));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(Error::validation(format!(
                "run.t_final must be finite and >= 0 (got {})",
                self.t_final
            )));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(Error::validation(format!(
                "run.cfl_safety must lie in (0, 1] (got {})",
                self.cfl_safety
            )));
        }
        if !(self.output_every > 0.0 && self.output_every.is_finite()) {
            return Err(Error::validation(format!(
                "run.output_every must be positive (got {})",
                self.output_every
            )));
        }
        if let Some(s) = self.output.snapshot_every {
            if !(s > 0.0) {
                return Err(Error::validation("output.snapshot_every must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSection {
    nx: usize,
    ny: usize,
}

fn default_cfl() -> f64 {
    DEFAULT_CFL_SAFETY
}

fn default_output_every() -> f64 {
    DEFAULT_OUTPUT_EVERY
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunSection {
    t_final: f64,
    #[serde(default = "default_cfl")]
    cfl_safety: f64,
    #[serde(default = "default_output_every")]
    output_every: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    grid: GridSection,
    motion: MotionPreset,
    #[serde(default)]
    params: Option<SystemParameters>,
    #[serde(default)]
    dimensional: Option<DimensionalParameters>,
    initial: InitialData,
    run: RunSection,
    #[serde(default)]
    output: OutputConfig,
}

/// Parses and validates a configuration document. `origin` is only used in
/// error messages.
pub fn parse_config_str(text: &str, origin: &Path) -> Result<RunConfig> {
    let file: ConfigFile = serde_json::from_str(text).map_err(|e| Error::Parse {
        path: origin.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let (params, nondimensional) = match (file.params, file.dimensional) {
        (Some(p), None) => (p, None),
        (None, Some(d)) => {
            let nd = nondimensionalize(&d)?;
            (nd.params, Some(nd))
        }
        (Some(_), Some(_)) => {
            return Err(Error::validation("give either params or dimensional, not both"))
        }
        (None, None) => return Err(Error::validation("missing params (or dimensional) section")),
    };
    file.motion.validate()?;
    let grid = Grid::for_preset(file.grid.nx, file.grid.ny, &file.motion)?;
    let config = RunConfig {
        grid,
        preset: file.motion,
        params,
        t_final: file.run.t_final,
        initial: file.initial,
        cfl_safety: file.run.cfl_safety,
        output_every: file.run.output_every,
        keep_states: false,
        output: file.output,
        nondimensional,
    };
    config.validate()?;
    Ok(config)
}

pub fn parse_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config_str(&text, path)
}
