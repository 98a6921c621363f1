//! Conserved masses, entropy, dissipation, equilibria and the functional
//! inequalities used to audit trajectories.

use serde::{Deserialize, Serialize};

use crate::discretization::{Grid, SimulationState};
use crate::error::{Error, Result};
use crate::geometry::{geometry_sample, MotionPreset};
use crate::params::SystemParameters;

/// Entries of a density in `(-NEGATIVE_TOLERANCE, 0)` are treated as zero.
pub const NEGATIVE_TOLERANCE: f64 = 1e-10;
/// Floor applied to arguments of logarithms and denominators in the dissipation.
pub const LOG_FLOOR: f64 = 1e-12;

/// `M1 = int u + int z` and `M2 = int w + int z`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MassPair {
    #[serde(rename = "M1")]
    pub m1: f64,
    #[serde(rename = "M2")]
    pub m2: f64,
}

/// Physical masses at `state.t`: bulk quadrature weighted by `J`, membrane
/// quadrature weighted by the line element.
pub fn masses(state: &SimulationState, grid: &Grid, preset: &MotionPreset) -> Result<MassPair> {
    state.check_shape(grid)?;
    let params = SystemParameters::unit();
    let mut bulk = 0.0;
    for k in 0..=grid.ny {
        let jac = geometry_sample(preset, state.t, [0.0, grid.y(k)], &params)?.jacobian;
        let row: f64 = state.u[k * grid.nx..(k + 1) * grid.nx].iter().sum();
        bulk += jac * row * grid.dx * grid.row_weight(k);
    }
    let ell = geometry_sample(preset, state.t, [0.0, 0.0], &params)?.surface_len;
    let line = ell * grid.dx;
    let w: f64 = state.w.iter().sum::<f64>() * line;
    let z: f64 = state.z.iter().sum::<f64>() * line;
    Ok(MassPair { m1: bulk + z, m2: w + z })
}

/// Constant steady state compatible with given masses.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumState {
    pub u_inf: f64,
    pub w_inf: f64,
    pub z_inf: f64,
}

impl EquilibriumState {
    /// Relative residuals of `|O| u + |G| z = M1`, `|G| (w + z) = M2` and
    /// `z = kappa u w`.
    pub fn residuals(&self, m1: f64, m2: f64, area: f64, len: f64, kappa: f64) -> [f64; 3] {
        let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
        let balance = kappa * self.u_inf * self.w_inf;
        [
            if m1 == 0.0 { (area * self.u_inf + len * self.z_inf).abs() } else { rel(area * self.u_inf + len * self.z_inf, m1) },
            if m2 == 0.0 { (len * (self.w_inf + self.z_inf)).abs() } else { rel(len * (self.w_inf + self.z_inf), m2) },
            if self.z_inf == 0.0 && balance == 0.0 { 0.0 } else { rel(self.z_inf, balance) },
        ]
    }
}

/// Equilibrium for `u w = z` (equal binding and dissociation constants).
pub fn equilibrium(m1: f64, m2: f64, area: f64, len: f64) -> Result<EquilibriumState> {
    equilibrium_with_affinity(m1, m2, area, len, 1.0)
}

/// Equilibrium for `z = kappa u w`. Eliminating `w` and `z` leaves
/// `kappa |O| u^2 + (|O| + kappa (M2 - M1)) u - M1 = 0`, whose non-negative
/// root is taken in the cancellation-free form.
pub fn equilibrium_with_affinity(
    m1: f64,
    m2: f64,
    area: f64,
    len: f64,
    kappa: f64,
) -> Result<EquilibriumState> {
    if !(m1 >= 0.0 && m2 >= 0.0 && m1.is_finite() && m2.is_finite()) {
        return Err(Error::domain(format!(
            "masses must be finite and non-negative (got M1={m1}, M2={m2})"
        )));
    }
    if !(area > 0.0 && len > 0.0 && kappa > 0.0) {
        return Err(Error::domain("area, length and affinity must be positive"));
    }
    let a = kappa * area;
    let b = area + kappa * (m2 - m1);
    let disc = (b * b + 4.0 * a * m1).sqrt();
    let u = if b > 0.0 {
        2.0 * m1 / (b + disc)
    } else {
        (disc - b) / (2.0 * a)
    };
    let w = m2 / (len * (1.0 + kappa * u));
    let z = kappa * u * w;
    Ok(EquilibriumState {
        u_inf: u,
        w_inf: w,
        z_inf: z,
    })
}

fn require_stationary(preset: &MotionPreset, what: &str) -> Result<()> {
    if preset.is_stationary() {
        Ok(())
    } else {
        Err(Error::Precondition(format!(
            "{what} is only defined for the stationary preset"
        )))
    }
}

fn clamp_density(v: f64, field: &str) -> Result<f64> {
    if v >= 0.0 {
        Ok(v)
    } else if v > -NEGATIVE_TOLERANCE {
        Ok(0.0)
    } else {
        Err(Error::domain(format!("{field} has negative entry {v}")))
    }
}

#[inline]
fn x_log_x_minus_x(v: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        v * (v.ln() - 1.0)
    }
}

/// `E = int u (log u - 1) + int w (log w - 1) + int z (log z - 1)`.
pub fn entropy(state: &SimulationState, grid: &Grid, preset: &MotionPreset) -> Result<f64> {
    require_stationary(preset, "entropy")?;
    state.check_shape(grid)?;
    let mut bulk = 0.0;
    for k in 0..=grid.ny {
        let mut row = 0.0;
        for &u in &state.u[k * grid.nx..(k + 1) * grid.nx] {
            row += x_log_x_minus_x(clamp_density(u, "u")?);
        }
        bulk += row * grid.dx * grid.row_weight(k);
    }
    let mut surf = 0.0;
    for (&w, &z) in state.w.iter().zip(&state.z) {
        surf += x_log_x_minus_x(clamp_density(w, "w")?) + x_log_x_minus_x(clamp_density(z, "z")?);
    }
    Ok(bulk + surf * grid.dx)
}

#[inline]
fn relative_term(f: f64, f_inf: f64) -> f64 {
    if f == 0.0 {
        f_inf
    } else if f_inf == 0.0 {
        f64::INFINITY
    } else {
        xlog_excess(f, f_inf)
    }
}

/// `E(state) - E(equilibrium)`, evaluated as the pointwise sum of
/// `f log(f / f_inf) - f + f_inf`. Under the conservation laws the two forms
/// agree; this one does not lose digits as the state approaches equilibrium.
pub fn relative_entropy(
    state: &SimulationState,
    grid: &Grid,
    preset: &MotionPreset,
    eq: &EquilibriumState,
) -> Result<f64> {
    require_stationary(preset, "relative entropy")?;
    state.check_shape(grid)?;
    let mut bulk = 0.0;
    for k in 0..=grid.ny {
        let mut row = 0.0;
        for &u in &state.u[k * grid.nx..(k + 1) * grid.nx] {
            row += relative_term(clamp_density(u, "u")?, eq.u_inf);
        }
        bulk += row * grid.dx * grid.row_weight(k);
    }
    let mut surf = 0.0;
    for (&w, &z) in state.w.iter().zip(&state.z) {
        surf += relative_term(clamp_density(w, "w")?, eq.w_inf)
            + relative_term(clamp_density(z, "z")?, eq.z_inf);
    }
    Ok(bulk + surf * grid.dx)
}

/// The four non-negative contributions to the entropy dissipation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Dissipation {
    /// `int |grad u|^2 / u`.
    pub bulk: f64,
    /// `delta_gamma int |grad w|^2 / w`.
    pub receptor: f64,
    /// `delta_gamma_p int |grad z|^2 / z`.
    pub complex: f64,
    /// `int (u w - z) log(u w / z)` on the membrane.
    pub reaction: f64,
    pub total: f64,
}

/// Entropy dissipation of the stationary system with
/// `delta_omega = delta_k = delta_kp = 1`. Gradients are central differences
/// (second-order one-sided on the horizontal edges).
pub fn dissipation(
    state: &SimulationState,
    grid: &Grid,
    preset: &MotionPreset,
    params: &SystemParameters,
) -> Result<Dissipation> {
    require_stationary(preset, "dissipation")?;
    if !params.is_entropy_regime() {
        return Err(Error::Precondition(
            "dissipation requires delta_omega = delta_k = delta_kp = 1".into(),
        ));
    }
    state.check_shape(grid)?;
    let (nx, ny) = (grid.nx, grid.ny);
    let u = |i: usize, k: usize| state.u[k * nx + i];
    let mut bulk = 0.0;
    for k in 0..=ny {
        let mut row = 0.0;
        for i in 0..nx {
            let val = clamp_density(u(i, k), "u")?;
            let ux = (u((i + 1) % nx, k) - u((i + nx - 1) % nx, k)) / (2.0 * grid.dx);
            let uy = if k == 0 {
                (-3.0 * u(i, 0) + 4.0 * u(i, 1) - u(i, 2)) / (2.0 * grid.dy)
            } else if k == ny {
                (3.0 * u(i, ny) - 4.0 * u(i, ny - 1) + u(i, ny - 2)) / (2.0 * grid.dy)
            } else {
                (u(i, k + 1) - u(i, k - 1)) / (2.0 * grid.dy)
            };
            row += (ux * ux + uy * uy) / val.max(LOG_FLOOR);
        }
        bulk += row * grid.dx * grid.row_weight(k);
    }
    let fisher = |f: &[f64], name: &str| -> Result<f64> {
        let mut s = 0.0;
        for i in 0..nx {
            let val = clamp_density(f[i], name)?;
            let d = (f[(i + 1) % nx] - f[(i + nx - 1) % nx]) / (2.0 * grid.dx);
            s += d * d / val.max(LOG_FLOOR);
        }
        Ok(s * grid.dx)
    };
    let receptor = params.delta_gamma * fisher(&state.w, "w")?;
    let complex = params.delta_gamma_p * fisher(&state.z, "z")?;
    let mut reaction = 0.0;
    for i in 0..nx {
        let uw = clamp_density(state.u[i], "u")? * clamp_density(state.w[i], "w")?;
        let z = clamp_density(state.z[i], "z")?;
        reaction += (uw - z) * (uw.max(LOG_FLOOR) / z.max(LOG_FLOOR)).ln();
    }
    reaction *= grid.dx;
    Ok(Dissipation {
        bulk,
        receptor,
        complex,
        reaction,
        total: bulk + receptor + complex + reaction,
    })
}

/// Both sides of `int f log(f / mean) >= ||f - mean||_1^2 / (2 |M| mean)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CkpGap {
    pub lhs: f64,
    pub rhs: f64,
}

impl CkpGap {
    pub fn holds(&self, tol: f64) -> bool {
        self.lhs >= self.rhs - tol
    }
}

/// Evaluates both sides of the Csiszar-Kullback-Pinsker inequality for `f`
/// against its own mean, using quadrature `weights`.
pub fn ckp_gap(f: &[f64], weights: &[f64]) -> Result<CkpGap> {
    if f.len() != weights.len() || f.is_empty() {
        return Err(Error::validation("field and weights must have equal, non-zero length"));
    }
    let measure: f64 = weights.iter().sum();
    let mut total = 0.0;
    let mut vals = Vec::with_capacity(f.len());
    for (&v, &w) in f.iter().zip(weights) {
        let v = clamp_density(v, "field")?;
        total += v * w;
        vals.push(v);
    }
    let mean = total / measure;
    if mean == 0.0 {
        // f vanishes identically; both sides are zero
        return Ok(CkpGap { lhs: 0.0, rhs: 0.0 });
    }
    if !(mean > 0.0) {
        return Err(Error::domain("mean of the field must be positive"));
    }
    let mut lhs = 0.0;
    let mut l1 = 0.0;
    for (&v, &w) in vals.iter().zip(weights) {
        if v > 0.0 {
            lhs += w * v * (v / mean).ln();
        }
        l1 += w * (v - mean).abs();
    }
    Ok(CkpGap {
        lhs,
        rhs: l1 * l1 / (2.0 * measure * mean),
    })
}

/// Both sides of `x log(x/y) - (x - y) >= (x - y)^2 / (2x + 2y)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct XlogGap {
    pub gap: f64,
    pub bound: f64,
}

/// `x log(x/y) - (x - y)` for positive `x`, `y`, without cancellation when
/// `x` is close to `y`.
fn xlog_excess(x: f64, y: f64) -> f64 {
    let d = (x - y) / y;
    if d.abs() < 1e-2 {
        // (1+d) log(1+d) - d = sum_{n>=2} (-d)^n / (n (n-1))
        let mut term = d * d;
        let mut sum = 0.0;
        for n in 2..12 {
            let nf = n as f64;
            sum += term / (nf * (nf - 1.0));
            term *= -d;
        }
        y * sum
    } else {
        x * (x / y).ln() - (x - y)
    }
}

pub fn xlog_gap(x: f64, y: f64) -> Result<XlogGap> {
    if !(x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite()) {
        return Err(Error::domain(format!(
            "x and y must be positive and finite (got {x}, {y})"
        )));
    }
    Ok(XlogGap {
        gap: xlog_excess(x, y),
        bound: (x - y) * (x - y) / (2.0 * x + 2.0 * y),
    })
}

/// Least-squares fit of `log E_rel = c - K t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DecayFit {
    /// Decay rate `K` (negative if the series grows).
    pub rate: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Fits an exponential to `(t, value)` pairs after dropping trailing values
/// below `1e-12`.
pub fn fit_decay_rate(series: &[(f64, f64)]) -> Result<DecayFit> {
    let mut end = series.len();
    while end > 0 && series[end - 1].1 < 1e-12 {
        end -= 1;
    }
    let pts = &series[..end];
    if pts.len() < 3 {
        return Err(Error::Fit(format!(
            "need at least 3 usable points, got {}",
            pts.len()
        )));
    }
    if let Some(&(t, v)) = pts.iter().find(|p| !(p.1 > 0.0)) {
        return Err(Error::Fit(format!("non-positive value {v} at t={t}")));
    }
    let n = pts.len() as f64;
    let mean_t = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = pts.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let (mut stt, mut sty, mut syy) = (0.0, 0.0, 0.0);
    for &(t, v) in pts {
        let (dt, dy) = (t - mean_t, v.ln() - mean_y);
        stt += dt * dt;
        sty += dt * dy;
        syy += dy * dy;
    }
    if stt == 0.0 {
        return Err(Error::Fit("all points share the same time".into()));
    }
    let slope = sty / stt;
    let r_squared = if syy == 0.0 {
        0.0
    } else {
        let ss_res = (syy - slope * sty).max(0.0);
        1.0 - ss_res / syy
    };
    Ok(DecayFit {
        rate: -slope,
        r_squared,
        points: pts.len(),
    })
}

/// Points with `floor <= value <= value(0) * ceiling_fraction`.
pub fn decay_window(series: &[(f64, f64)], floor: f64, ceiling_fraction: f64) -> Vec<(f64, f64)> {
    let Some(&(_, first)) = series.first() else {
        return Vec::new();
    };
    let ceiling = first * ceiling_fraction;
    series
        .iter()
        .copied()
        .filter(|&(_, v)| v >= floor && v <= ceiling)
        .collect()
}

/// One line of the diagnostics stream.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiagnosticsRow {
    pub t: f64,
    pub m1: f64,
    pub m2: f64,
    pub dm1_rel: f64,
    pub dm2_rel: f64,
    /// Entropy; stationary preset only.
    pub entropy: Option<f64>,
    /// Dissipation; stationary preset in the entropy regime only.
    pub dissipation: Option<f64>,
    pub relative_entropy: Option<f64>,
    pub u_min: f64,
    pub u_max: f64,
    pub w_min: f64,
    pub w_max: f64,
    pub z_min: f64,
    pub z_max: f64,
    /// Step that produced this state (0 for the initial row).
    pub dt: f64,
}

/// Run-level reference values for [`diagnostics`].
#[derive(Clone, Copy, Debug)]
pub struct DiagnosticsContext {
    pub initial_masses: MassPair,
    pub equilibrium: Option<EquilibriumState>,
}

impl DiagnosticsContext {
    pub fn new(
        initial: &SimulationState,
        grid: &Grid,
        preset: &MotionPreset,
        params: &SystemParameters,
    ) -> Result<Self> {
        let initial_masses = masses(initial, grid, preset)?;
        let equilibrium = if preset.is_stationary() && params.is_entropy_regime() {
            Some(equilibrium(
                initial_masses.m1,
                initial_masses.m2,
                preset.bulk_area(0.0),
                preset.membrane_length(0.0),
            )?)
        } else {
            None
        };
        Ok(Self {
            initial_masses,
            equilibrium,
        })
    }
}

fn extrema(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

/// Diagnostics of one state. Entropy-type columns are left empty on moving
/// presets, outside the entropy regime, and on states with negative entries
/// beyond [`NEGATIVE_TOLERANCE`] (those show up in the minima instead).
pub fn diagnostics(
    state: &SimulationState,
    grid: &Grid,
    preset: &MotionPreset,
    params: &SystemParameters,
    ctx: &DiagnosticsContext,
    dt: f64,
) -> Result<DiagnosticsRow> {
    let m = masses(state, grid, preset)?;
    let m0 = ctx.initial_masses;
    let soft = |r: Result<f64>| -> Result<Option<f64>> {
        match r {
            Ok(v) => Ok(Some(v)),
            Err(Error::Domain(_)) => Ok(None),
            Err(e) => Err(e),
        }
    };
    let (entropy_val, dissipation_val, relative) = if preset.is_stationary() {
        let e = soft(entropy(state, grid, preset))?;
        let (d, rel) = match ctx.equilibrium {
            Some(eq) => (
                soft(dissipation(state, grid, preset, params).map(|d| d.total))?,
                soft(relative_entropy(state, grid, preset, &eq))?,
            ),
            None => (None, None),
        };
        (e, d, rel)
    } else {
        (None, None, None)
    };
    let (u_min, u_max) = extrema(&state.u);
    let (w_min, w_max) = extrema(&state.w);
    let (z_min, z_max) = extrema(&state.z);
    Ok(DiagnosticsRow {
        t: state.t,
        m1: m.m1,
        m2: m.m2,
        dm1_rel: (m.m1 - m0.m1) / m0.m1.max(1.0),
        dm2_rel: (m.m2 - m0.m2) / m0.m2.max(1.0),
        entropy: entropy_val,
        dissipation: dissipation_val,
        relative_entropy: relative,
        u_min,
        u_max,
        w_min,
        w_max,
        z_min,
        z_max,
        dt,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{PI, SQRT_2, TAU};

    #[test]
    fn masses_of_constants() {
        let p = MotionPreset::stationary(1.0, 1.0);
        let g = Grid::for_preset(8, 8, &p).unwrap();
        let s = SimulationState::constant(&g, 1.0, 0.0, 0.0);
        let m = masses(&s, &g, &p).unwrap();
        assert!((m.m1 - 1.0).abs() < 1e-15);

        let p = MotionPreset::stationary(TAU, 1.0);
        let g = Grid::for_preset(16, 4, &p).unwrap();
        let s = SimulationState::constant(&g, 0.0, 2.0, 3.0);
        let m = masses(&s, &g, &p).unwrap();
        assert!((m.m2 - 10.0 * PI).abs() < 1e-13);
        assert!((m.m1 - 6.0 * PI).abs() < 1e-13);
    }

    #[test]
    fn masses_follow_the_moving_domain() {
        let p = MotionPreset::vertical_breathing(0.2, 1.0, TAU, 1.0);
        let g = Grid::for_preset(8, 8, &p).unwrap();
        let mut s = SimulationState::constant(&g, 1.0, 0.0, 0.0);
        s.t = 0.7;
        let m = masses(&s, &g, &p).unwrap();
        assert!((m.m1 - p.bulk_area(0.7)).abs() < 1e-13);
    }

    #[test]
    fn equilibrium_examples() {
        let e = equilibrium(0.0, 3.0, 2.0, 1.5).unwrap();
        assert_eq!((e.u_inf, e.z_inf), (0.0, 0.0));
        assert!((e.w_inf - 2.0).abs() < 1e-15);

        let e = equilibrium(3.0, 0.0, 2.0, 1.5).unwrap();
        assert!((e.u_inf - 1.5).abs() < 1e-15);
        assert_eq!((e.w_inf, e.z_inf), (0.0, 0.0));

        let e = equilibrium(2.0, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(e.u_inf, SQRT_2);
        assert!((e.w_inf - (SQRT_2 - 1.0)).abs() < 1e-15);
        assert!((e.z_inf - (2.0 - SQRT_2)).abs() < 1e-15);
        for r in e.residuals(2.0, 1.0, 1.0, 1.0, 1.0) {
            assert!(r <= 1e-12);
        }
        assert!(equilibrium(-1.0, 1.0, 1.0, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn equilibrium_solves_the_algebraic_system(
            m1 in 1e-3f64..1e3, m2 in 1e-3f64..1e3,
            area in 1e-2f64..1e2, len in 1e-2f64..1e2,
            kappa in 0.05f64..20.0, c in 0.1f64..10.0,
        ) {
            let e = equilibrium_with_affinity(m1, m2, area, len, kappa).unwrap();
            prop_assert!(e.u_inf >= 0.0 && e.w_inf >= 0.0 && e.z_inf >= 0.0);
            for r in e.residuals(m1, m2, area, len, kappa) {
                prop_assert!(r <= 1e-12, "{r}");
            }
            let scaled = equilibrium_with_affinity(c * m1, c * m2, c * area, c * len, kappa).unwrap();
            prop_assert!((scaled.u_inf - e.u_inf).abs() <= 1e-12 * e.u_inf.max(1e-300));
            prop_assert!((scaled.z_inf - e.z_inf).abs() <= 1e-12 * e.z_inf.max(1e-300));
        }

        #[test]
        fn xlog_inequality(x in 1e-6f64..1e6, y in 1e-6f64..1e6) {
            let g = xlog_gap(x, y).unwrap();
            prop_assert!(g.gap >= g.bound - 1e-12, "{x} {y} {g:?}");
        }

        #[test]
        fn ckp_inequality(f in proptest::collection::vec(0.0f64..5.0, 2..40)) {
            prop_assume!(f.iter().any(|&v| v > 0.0));
            let w = vec![0.1; f.len()];
            let g = ckp_gap(&f, &w).unwrap();
            prop_assert!(g.holds(1e-10), "{g:?}");
        }
    }

    #[test]
    fn xlog_examples() {
        let g = xlog_gap(3.0, 3.0).unwrap();
        assert_eq!((g.gap, g.bound), (0.0, 0.0));
        let g = xlog_gap(2.0, 1.0).unwrap();
        assert!((g.gap - (2.0 * 2f64.ln() - 1.0)).abs() < 1e-15);
        assert!((g.bound - 1.0 / 6.0).abs() < 1e-15);
        let g = xlog_gap(1.0, 4.0).unwrap();
        assert!((g.gap - (3.0 - 4f64.ln())).abs() < 1e-15);
        assert!((g.bound - 0.9).abs() < 1e-15);
        assert!(xlog_gap(0.0, 1.0).is_err());
        assert!(xlog_gap(1.0, -1.0).is_err());
        // series branch agrees with the direct formula where both are accurate
        let (x, y) = (1.005f64, 1.0);
        let direct = x * (x / y).ln() - (x - y);
        assert!((xlog_gap(x, y).unwrap().gap - direct).abs() < 1e-15);
    }

    #[test]
    fn ckp_examples() {
        let w = vec![0.25; 4];
        let g = ckp_gap(&[2.0; 4], &w).unwrap();
        assert_eq!((g.lhs, g.rhs), (0.0, 0.0));
        let g = ckp_gap(&[0.0; 4], &w).unwrap();
        assert_eq!((g.lhs, g.rhs), (0.0, 0.0));
        assert!(ckp_gap(&[-1.0; 4], &w).is_err());
        assert!(ckp_gap(&[1.0; 3], &w).is_err());

        let n = 256;
        let dx = TAU / n as f64;
        let f: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * (i as f64 * dx).cos()).collect();
        let w = vec![dx; n];
        let g = ckp_gap(&f, &w).unwrap();
        assert!(g.lhs > g.rhs);
        // ||f - 1||_1 = 0.5 * 4 = 2 exactly in the continuum; rhs = 4 / (4 pi)
        assert!((g.rhs - 1.0 / PI).abs() < 1e-3);

        let c = 3.7;
        let fc: Vec<f64> = f.iter().map(|v| c * v).collect();
        let gc = ckp_gap(&fc, &w).unwrap();
        assert!((gc.lhs - c * g.lhs).abs() < 1e-12);
        assert!((gc.rhs - c * g.rhs).abs() < 1e-12);
    }

    #[test]
    fn entropy_examples() {
        let p = MotionPreset::stationary(1.0, 1.0);
        let g = Grid::for_preset(8, 8, &p).unwrap();
        let s = SimulationState::constant(&g, 1.0, 1.0, 1.0);
        assert!((entropy(&s, &g, &p).unwrap() + 3.0).abs() < 1e-14);
        let s = SimulationState::constant(&g, std::f64::consts::E, 0.0, 0.0);
        assert!(entropy(&s, &g, &p).unwrap().abs() < 1e-14);
        for n in [4, 16, 64] {
            let g = Grid::for_preset(n, n, &p).unwrap();
            let s = SimulationState::constant(&g, 2.0, 0.5, 0.3);
            let expect = 2.0 * (2f64.ln() - 1.0) + 0.5 * (0.5f64.ln() - 1.0) + 0.3 * (0.3f64.ln() - 1.0);
            assert!((entropy(&s, &g, &p).unwrap() - expect).abs() < 1e-12);
        }
        let mut s = SimulationState::constant(&g, 1.0, 1.0, 1.0);
        s.u[3] = -1e-11;
        assert!(entropy(&s, &g, &p).is_ok());
        s.u[3] = -1e-9;
        assert!(matches!(entropy(&s, &g, &p), Err(Error::Domain(_))));
        let moving = MotionPreset::vertical_breathing(0.1, 1.0, 1.0, 1.0);
        assert!(matches!(entropy(&s, &g, &moving), Err(Error::Precondition(_))));
    }

    #[test]
    fn dissipation_vanishes_at_equilibrium() {
        let p = MotionPreset::stationary(TAU, 1.0);
        let g = Grid::for_preset(16, 8, &p).unwrap();
        let e = equilibrium(2.0, 1.0, TAU, TAU).unwrap();
        let s = SimulationState::constant(&g, e.u_inf, e.w_inf, e.z_inf);
        let d = dissipation(&s, &g, &p, &SystemParameters::unit()).unwrap();
        assert!(d.total.abs() < 1e-12, "{d:?}");
        let rel = relative_entropy(&s, &g, &p, &e).unwrap();
        assert!(rel.abs() < 1e-14);
        let wrong = SystemParameters::new(2.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        assert!(dissipation(&s, &g, &p, &wrong).is_err());
    }

    #[test]
    fn bulk_dissipation_against_quadrature() {
        // u = 1 + 0.1 cos x, constant in y: int |u_x|^2 / u over [0, 2 pi] x [0, 1]
        let oracle = {
            let n = 200_000;
            let h = TAU / n as f64;
            (0..n)
                .map(|i| {
                    let x = (i as f64 + 0.5) * h;
                    0.01 * x.sin().powi(2) / (1.0 + 0.1 * x.cos()) * h
                })
                .sum::<f64>()
        };
        let p = MotionPreset::stationary(TAU, 1.0);
        let g = Grid::for_preset(1024, 4, &p).unwrap();
        let mut s = SimulationState::constant(&g, 0.0, 1.0, 1.0);
        for k in 0..=g.ny {
            for i in 0..g.nx {
                s.u[g.idx(i, k)] = 1.0 + 0.1 * g.x(i).cos();
            }
        }
        let d = dissipation(&s, &g, &p, &SystemParameters::unit()).unwrap();
        assert!((d.bulk - oracle).abs() < 1e-6, "{} vs {oracle}", d.bulk);
        assert!(d.reaction >= 0.0 && d.total >= d.bulk);
    }

    proptest! {
        #[test]
        fn dissipation_non_negative(vals in proptest::collection::vec(1e-3f64..4.0, 8 * 5 + 16)) {
            let p = MotionPreset::stationary(TAU, 1.0);
            let g = Grid::for_preset(8, 4, &p).unwrap();
            let s = SimulationState {
                t: 0.0,
                u: vals[..40].to_vec(),
                w: vals[40..48].to_vec(),
                z: vals[48..].to_vec(),
            };
            let d = dissipation(&s, &g, &p, &SystemParameters::unit()).unwrap();
            prop_assert!(d.total >= -1e-10);
            prop_assert!(d.reaction >= -1e-10);
        }
    }

    #[test]
    fn fit_examples() {
        let series: Vec<(f64, f64)> = (0..20)
            .map(|i| {
                let t = i as f64 * 0.5;
                (t, 5.0 * (-0.7 * t).exp())
            })
            .collect();
        let fit = fit_decay_rate(&series).unwrap();
        assert!((fit.rate - 0.7).abs() < 1e-10);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);

        // fixed +-1% multiplicative perturbation
        let noisy: Vec<(f64, f64)> = series
            .iter()
            .enumerate()
            .map(|(i, &(t, v))| (t, v * (1.0 + 0.01 * ((i * 37 % 11) as f64 / 5.0 - 1.0))))
            .collect();
        let fit = fit_decay_rate(&noisy).unwrap();
        assert!((fit.rate - 0.7).abs() < 0.035);

        let flat: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 2.0)).collect();
        let fit = fit_decay_rate(&flat).unwrap();
        assert_eq!(fit.rate, 0.0);
        assert_eq!(fit.r_squared, 0.0);

        let mut short = series[..4].to_vec();
        short.push((10.0, 1e-14));
        short.push((11.0, 0.0));
        assert_eq!(fit_decay_rate(&short).unwrap().points, 4);
        assert!(matches!(fit_decay_rate(&series[..2]), Err(Error::Fit(_))));
    }

    #[test]
    fn window_selection() {
        let s = vec![(0.0, 1.0), (1.0, 0.2), (2.0, 0.05), (3.0, 1e-11), (4.0, 1e-13)];
        let w = decay_window(&s, 1e-10, 0.1);
        assert_eq!(w, vec![(2.0, 0.05)]);
        assert!(decay_window(&[], 1e-10, 0.1).is_empty());
    }
}
