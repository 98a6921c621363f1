//! Node-centred finite differences in conservative form on the reference strip.
//!
//! Bulk nodes sit at `(i dx, k dy)` for `i < nx`, `k <= ny`; row `k = 0` lies on
//! the membrane, so the trace of `u` is simply the first row. Each node owns a
//! control volume of height `dy` (half of that on the two horizontal edges),
//! which makes the discrete bulk mass the periodic/trapezoid quadrature.
//!
//! In reference coordinates the bulk equation reads
//!
//! ```text
//! d/dt (J u) = div( A grad u + u b ),   b = -J M J_Omega
//! ```
//!
//! with the normal flux on the membrane supplied by the Robin relation and no
//! flux through the outer boundary. Membrane densities obey
//!
//! ```text
//! d/dt (l w) = d/dx( delta_gamma w_x / l - w c ) + l r,   c = J_Gamma . tau
//! ```
//!
//! and the same with `-r` for `z`. Every flux is shared by two cells, so total
//! mass only changes through the membrane exchange, which cancels between `u`
//! and `z`.

use crate::error::{Error, Result};
use crate::geometry::{geometry_sample, velocity_sample, MotionPreset};
use crate::params::SystemParameters;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    /// Length of the periodic direction `P_x`.
    pub period: f64,
    /// Height of the reference strip.
    pub height: f64,
    pub dx: f64,
    pub dy: f64,
}

impl Grid {
    pub fn new(nx: usize, ny: usize, period: f64, height: f64) -> Result<Self> {
        if nx < 4 || ny < 4 {
            return Err(Error::validation(format!(
                "grid needs nx >= 4 and ny >= 4 (got nx={nx}, ny={ny})"
            )));
        }
        if !(period > 0.0 && period.is_finite() && height > 0.0 && height.is_finite()) {
            return Err(Error::validation("grid period and height must be positive"));
        }
        Ok(Self {
            nx,
            ny,
            period,
            height,
            dx: period / nx as f64,
            dy: height / ny as f64,
        })
    }

    pub fn for_preset(nx: usize, ny: usize, preset: &MotionPreset) -> Result<Self> {
        Self::new(nx, ny, preset.period, preset.height)
    }

    pub fn bulk_len(&self) -> usize {
        self.nx * (self.ny + 1)
    }

    #[inline]
    pub fn idx(&self, i: usize, k: usize) -> usize {
        k * self.nx + i
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.dx
    }

    pub fn y(&self, k: usize) -> f64 {
        if k == self.ny {
            self.height
        } else {
            k as f64 * self.dy
        }
    }

    /// Height of the control volume of row `k` (trapezoid weight).
    #[inline]
    pub fn row_weight(&self, k: usize) -> f64 {
        if k == 0 || k == self.ny {
            0.5 * self.dy
        } else {
            self.dy
        }
    }

    /// Reference-domain quadrature weights of every bulk node.
    pub fn bulk_weights(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.bulk_len());
        for k in 0..=self.ny {
            let w = self.dx * self.row_weight(k);
            out.extend(std::iter::repeat_n(w, self.nx));
        }
        out
    }

    /// Reference area `P_x * H`.
    pub fn reference_area(&self) -> f64 {
        self.period * self.height
    }

    /// Same grid with both resolutions doubled.
    pub fn refined(&self) -> Self {
        Self::new(2 * self.nx, 2 * self.ny, self.period, self.height)
            .expect("refining a valid grid")
    }
}

/// Discrete unknowns at time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct SimulationState {
    pub t: f64,
    /// Bulk ligand, `nx * (ny + 1)` values, row-major with row 0 on the membrane.
    pub u: Vec<f64>,
    /// Free receptors, `nx` values.
    pub w: Vec<f64>,
    /// Complexes, `nx` values.
    pub z: Vec<f64>,
}

impl SimulationState {
    pub fn zeros(grid: &Grid) -> Self {
        Self {
            t: 0.0,
            u: vec![0.0; grid.bulk_len()],
            w: vec![0.0; grid.nx],
            z: vec![0.0; grid.nx],
        }
    }

    pub fn constant(grid: &Grid, u: f64, w: f64, z: f64) -> Self {
        Self {
            t: 0.0,
            u: vec![u; grid.bulk_len()],
            w: vec![w; grid.nx],
            z: vec![z; grid.nx],
        }
    }

    pub fn check_shape(&self, grid: &Grid) -> Result<()> {
        if self.u.len() != grid.bulk_len() || self.w.len() != grid.nx || self.z.len() != grid.nx {
            return Err(Error::validation(format!(
                "state arrays (u={}, w={}, z={}) do not match grid {}x{}",
                self.u.len(),
                self.w.len(),
                self.z.len(),
                grid.nx,
                grid.ny
            )));
        }
        Ok(())
    }

    /// First non-finite field, if any.
    pub fn non_finite_field(&self) -> Option<&'static str> {
        [("u", &self.u), ("w", &self.w), ("z", &self.z)]
            .into_iter()
            .find(|(_, v)| v.iter().any(|x| !x.is_finite()))
            .map(|(name, _)| name)
    }

    pub fn validate(&self, grid: &Grid) -> Result<()> {
        self.check_shape(grid)?;
        if let Some(field) = self.non_finite_field() {
            return Err(Error::BlowUp { t: self.t, field });
        }
        Ok(())
    }

    /// The membrane row of `u`.
    pub fn u_trace<'a>(&'a self, grid: &Grid) -> &'a [f64] {
        &self.u[..grid.nx]
    }
}

/// Binding kinetics `r = z / delta_kp - u w / delta_k`.
#[inline]
pub fn reaction(u: f64, w: f64, z: f64, params: &SystemParameters) -> f64 {
    z / params.delta_kp - u * w / params.delta_k
}

/// Diffusive normal flux `delta_omega grad u . nu` demanded by the Robin
/// condition on the membrane.
#[inline]
pub fn robin_flux(u: f64, w: f64, z: f64, jump: f64, params: &SystemParameters) -> f64 {
    reaction(u, w, z, params) + jump * u
}

/// Laplace-Beltrami operator `(1/l) d/dx ((1/l) df/dx)` on the periodic
/// membrane, with `ell` the line element at every node.
pub fn surface_laplacian(f: &[f64], grid: &Grid, ell: &[f64]) -> Result<Vec<f64>> {
    if f.len() != grid.nx || ell.len() != grid.nx {
        return Err(Error::validation(format!(
            "surface arrays must have length {} (got {} and {})",
            grid.nx,
            f.len(),
            ell.len()
        )));
    }
    let div = surface_flux_divergence(f, ell, 1.0, &vec![0.0; grid.nx], grid.dx);
    Ok(div.iter().zip(ell).map(|(d, l)| d / l).collect())
}

/// `d/dx( diffusivity f_x / l - f c )` with centred face values, periodic in x.
/// Face metrics and speeds are the averages of the adjacent nodes.
pub fn surface_flux_divergence(
    f: &[f64],
    ell: &[f64],
    diffusivity: f64,
    speed: &[f64],
    dx: f64,
) -> Vec<f64> {
    let n = f.len();
    let face_flux = |i: usize| {
        let r = (i + 1) % n;
        let l_face = 0.5 * (ell[i] + ell[r]);
        let c_face = 0.5 * (speed[i] + speed[r]);
        diffusivity * (f[r] - f[i]) / (dx * l_face) - 0.5 * (f[i] + f[r]) * c_face
    };
    let fluxes: Vec<f64> = (0..n).map(face_flux).collect();
    (0..n)
        .map(|i| (fluxes[i] - fluxes[(i + n - 1) % n]) / dx)
        .collect()
}

/// Geometric coefficients of the discrete operators at one instant. All
/// implemented presets are invariant in `x`, so one sample per row suffices.
#[derive(Clone, Debug)]
pub struct Coefficients {
    pub t: f64,
    /// `J` per node row.
    pub jacobian: Vec<f64>,
    pub jacobian_rate: Vec<f64>,
    /// `A_xx` per node row.
    pub a_xx: Vec<f64>,
    /// Advective coefficient `b_x` per node row.
    pub b_x: Vec<f64>,
    /// `A_yy` on the face between rows `k` and `k + 1`.
    pub a_yy: Vec<f64>,
    pub b_y: Vec<f64>,
    /// `J omega` on the membrane.
    pub membrane_factor: f64,
    /// Normal velocity jump `j` on the membrane.
    pub jump: f64,
    /// Membrane line element.
    pub surface_len: f64,
    pub surface_len_rate: f64,
    /// Tangential transport speed `J_Gamma . tau`.
    pub tangential: f64,
    /// Largest entry of `A / J` over the grid.
    pub max_bulk_diffusivity: f64,
    /// Largest advective speed in reference units.
    pub max_speed: f64,
}

impl Coefficients {
    pub fn at(grid: &Grid, preset: &MotionPreset, params: &SystemParameters, t: f64) -> Result<Self> {
        let ny = grid.ny;
        let mut c = Coefficients {
            t,
            jacobian: Vec::with_capacity(ny + 1),
            jacobian_rate: Vec::with_capacity(ny + 1),
            a_xx: Vec::with_capacity(ny + 1),
            b_x: Vec::with_capacity(ny + 1),
            a_yy: Vec::with_capacity(ny),
            b_y: Vec::with_capacity(ny),
            membrane_factor: 0.0,
            jump: 0.0,
            surface_len: 0.0,
            surface_len_rate: 0.0,
            tangential: 0.0,
            max_bulk_diffusivity: 0.0,
            max_speed: 0.0,
        };
        let advection = |y: f64| -> Result<([f64; 2], f64)> {
            let g = geometry_sample(preset, t, [0.0, y], params)?;
            let v = velocity_sample(preset, t, [0.0, y])?;
            let mj = g.inv_gradient.apply(v.j_omega);
            Ok(([-g.jacobian * mj[0], -g.jacobian * mj[1]], g.jacobian))
        };
        for k in 0..=ny {
            let y = grid.y(k);
            let g = geometry_sample(preset, t, [0.0, y], params)?;
            let (b, jac) = advection(y)?;
            c.jacobian.push(g.jacobian);
            c.jacobian_rate.push(g.jacobian_rate);
            c.a_xx.push(g.diffusion.0[0][0]);
            c.b_x.push(b[0]);
            let nd = &g.normalized_diffusion.0;
            c.max_bulk_diffusivity = c.max_bulk_diffusivity.max(nd[0][0]).max(nd[1][1]);
            c.max_speed = c.max_speed.max((b[0] / jac).abs()).max((b[1] / jac).abs());
        }
        for k in 0..ny {
            let y = 0.5 * (grid.y(k) + grid.y(k + 1));
            let g = geometry_sample(preset, t, [0.0, y], params)?;
            let (b, _) = advection(y)?;
            c.a_yy.push(g.diffusion.0[1][1]);
            c.b_y.push(b[1]);
        }
        let g = geometry_sample(preset, t, [0.0, 0.0], params)?;
        let v = velocity_sample(preset, t, [0.0, 0.0])?;
        c.membrane_factor = g.jacobian * g.boundary_metric;
        c.jump = v.jump;
        c.surface_len = g.surface_len;
        c.surface_len_rate = g.surface_len_rate;
        c.tangential = v.j_gamma[0];
        c.max_speed = c.max_speed.max((c.tangential / c.surface_len).abs());
        Ok(c)
    }
}

/// `d(J u)/dt` at every bulk node: the conservative flux balance of the node's
/// control volume divided by its reference volume.
pub fn bulk_flux_divergence(
    state: &SimulationState,
    grid: &Grid,
    coef: &Coefficients,
    params: &SystemParameters,
) -> Vec<f64> {
    let (nx, ny) = (grid.nx, grid.ny);
    let (inv_dx, inv_dy) = (1.0 / grid.dx, 1.0 / grid.dy);
    let u = &state.u;
    let mut out = vec![0.0; grid.bulk_len()];
    // flux through the face below the current row, per unit reference length
    let mut below = vec![0.0; nx];
    let mut above = vec![0.0; nx];
    let mut x_flux = vec![0.0; nx];

    // Outward normal flux on the membrane: diffusive part from the Robin
    // condition, advective part -u j.
    for i in 0..nx {
        let ui = u[i];
        let normal = robin_flux(ui, state.w[i], state.z[i], coef.jump, params) - ui * coef.jump;
        below[i] = -normal * coef.membrane_factor;
    }

    for k in 0..=ny {
        let row = &u[k * nx..(k + 1) * nx];
        if k < ny {
            let next = &u[(k + 1) * nx..(k + 2) * nx];
            let (a, b) = (coef.a_yy[k] * inv_dy, 0.5 * coef.b_y[k]);
            for ((f, lo), hi) in above.iter_mut().zip(row).zip(next) {
                *f = a * (hi - lo) + b * (lo + hi);
            }
        } else {
            above.iter_mut().for_each(|f| *f = 0.0);
        }
        let (a, b) = (coef.a_xx[k] * inv_dx, 0.5 * coef.b_x[k]);
        for i in 0..nx - 1 {
            let (l, r) = (row[i], row[i + 1]);
            x_flux[i] = a * (r - l) + b * (l + r);
        }
        let (l, r) = (row[nx - 1], row[0]);
        x_flux[nx - 1] = a * (r - l) + b * (l + r);

        let inv_wy = 1.0 / grid.row_weight(k);
        let dst = &mut out[k * nx..(k + 1) * nx];
        dst[0] = (x_flux[0] - x_flux[nx - 1]) * inv_dx + (above[0] - below[0]) * inv_wy;
        for i in 1..nx {
            dst[i] = (x_flux[i] - x_flux[i - 1]) * inv_dx + (above[i] - below[i]) * inv_wy;
        }
        std::mem::swap(&mut below, &mut above);
    }
    out
}

/// Time derivative of `u` on the reference grid.
pub fn bulk_rhs(
    state: &SimulationState,
    grid: &Grid,
    preset: &MotionPreset,
    params: &SystemParameters,
) -> Result<Vec<f64>> {
    state.check_shape(grid)?;
    let coef = Coefficients::at(grid, preset, params, state.t)?;
    Ok(bulk_rhs_with(state, grid, &coef, params))
}

pub(crate) fn bulk_rhs_with(
    state: &SimulationState,
    grid: &Grid,
    coef: &Coefficients,
    params: &SystemParameters,
) -> Vec<f64> {
    let mut div = bulk_flux_divergence(state, grid, coef, params);
    for k in 0..=grid.ny {
        let (jac, rate) = (coef.jacobian[k], coef.jacobian_rate[k]);
        for i in 0..grid.nx {
            let n = grid.idx(i, k);
            div[n] = (div[n] - state.u[n] * rate) / jac;
        }
    }
    div
}

/// `(d(l w)/dt, d(l z)/dt)` on the membrane.
pub fn surface_conservative_rhs(
    state: &SimulationState,
    grid: &Grid,
    coef: &Coefficients,
    params: &SystemParameters,
) -> (Vec<f64>, Vec<f64>) {
    let nx = grid.nx;
    let ell = vec![coef.surface_len; nx];
    let speed = vec![coef.tangential; nx];
    let mut dw = surface_flux_divergence(&state.w, &ell, params.delta_gamma, &speed, grid.dx);
    let mut dz = surface_flux_divergence(&state.z, &ell, params.delta_gamma_p, &speed, grid.dx);
    for i in 0..nx {
        let r = reaction(state.u[i], state.w[i], state.z[i], params) * coef.surface_len;
        dw[i] += r;
        dz[i] -= r;
    }
    (dw, dz)
}

/// Time derivatives of `w` and `z`.
pub fn surface_rhs(
    state: &SimulationState,
    grid: &Grid,
    preset: &MotionPreset,
    params: &SystemParameters,
) -> Result<(Vec<f64>, Vec<f64>)> {
    state.check_shape(grid)?;
    let coef = Coefficients::at(grid, preset, params, state.t)?;
    Ok(surface_rhs_with(state, grid, &coef, params))
}

pub(crate) fn surface_rhs_with(
    state: &SimulationState,
    grid: &Grid,
    coef: &Coefficients,
    params: &SystemParameters,
) -> (Vec<f64>, Vec<f64>) {
    let (mut dw, mut dz) = surface_conservative_rhs(state, grid, coef, params);
    let (l, dl) = (coef.surface_len, coef.surface_len_rate);
    for i in 0..grid.nx {
        dw[i] = (dw[i] - state.w[i] * dl) / l;
        dz[i] = (dz[i] - state.z[i] * dl) / l;
    }
    (dw, dz)
}
