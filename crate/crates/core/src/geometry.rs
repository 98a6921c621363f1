//! Moving-domain geometry on a periodic strip.
//!
//! The reference domain is `[0, P_x) x [0, H]`, periodic in `x`. The bottom
//! edge `y = 0` is the membrane `Gamma_0`; the top edge `y = H` is the outer
//! boundary `dD_0`. A preset moves the membrane vertically to `y = h(t)` with
//! the outer boundary held fixed, using the affine-in-`y` flow map
//!
//! ```text
//! Phi_t(x, y) = (x, h(t) + y (H - h(t)) / H)
//! ```
//!
//! so that `Phi_0` is the identity. The membrane may also carry a tangential
//! material flow of constant speed. Everything here is analytic; the
//! `verify` module cross-checks these formulas by finite differences.

use std::ops::Mul;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::SystemParameters;

/// Small dense 2x2 matrix, row-major.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat2(pub [[f64; 2]; 2]);

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2([[1.0, 0.0], [0.0, 1.0]]);

    pub fn diag(a: f64, b: f64) -> Self {
        Mat2([[a, 0.0], [0.0, b]])
    }

    pub fn det(&self) -> f64 {
        let m = &self.0;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    pub fn transpose(&self) -> Self {
        let m = &self.0;
        Mat2([[m[0][0], m[1][0]], [m[0][1], m[1][1]]])
    }

    pub fn inverse(&self) -> Option<Self> {
        let d = self.det();
        if d == 0.0 || !d.is_finite() {
            return None;
        }
        let m = &self.0;
        Some(Mat2([
            [m[1][1] / d, -m[0][1] / d],
            [-m[1][0] / d, m[0][0] / d],
        ]))
    }

    pub fn scale(&self, s: f64) -> Self {
        let m = &self.0;
        Mat2([[s * m[0][0], s * m[0][1]], [s * m[1][0], s * m[1][1]]])
    }

    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        let m = &self.0;
        [
            m[0][0] * v[0] + m[0][1] * v[1],
            m[1][0] * v[0] + m[1][1] * v[1],
        ]
    }

    pub fn max_abs_diff(&self, other: &Mat2) -> f64 {
        let mut d: f64 = 0.0;
        for r in 0..2 {
            for c in 0..2 {
                d = d.max((self.0[r][c] - other.0[r][c]).abs());
            }
        }
        d
    }

    pub fn is_symmetric_positive_definite(&self) -> bool {
        let m = &self.0;
        m[0][1] == m[1][0] && m[0][0] > 0.0 && self.det() > 0.0
    }
}

impl Mul for Mat2 {
    type Output = Mat2;

    fn mul(self, rhs: Mat2) -> Mat2 {
        let (a, b) = (&self.0, &rhs.0);
        let mut out = [[0.0; 2]; 2];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = a[r][0] * b[0][c] + a[r][1] * b[1][c];
            }
        }
        Mat2(out)
    }
}

pub fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn norm(a: [f64; 2]) -> f64 {
    dot(a, a).sqrt()
}

/// Outward unit normal of the bulk domain on the reference membrane.
pub const MEMBRANE_NORMAL: [f64; 2] = [0.0, -1.0];
/// Outward unit normal of the bulk domain on the reference outer boundary.
pub const OUTER_NORMAL: [f64; 2] = [0.0, 1.0];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotionKind {
    Stationary,
    /// Membrane height `h(t) = a sin(b t)`, no tangential flow.
    VerticalBreathing,
    /// Flat membrane with tangential material speed `v_tau`.
    TangentialFlow,
    /// Vertical breathing and tangential flow together.
    Combined,
}

/// Analytic description of the domain motion.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotionPreset {
    pub kind: MotionKind,
    #[serde(default)]
    pub amplitude: f64,
    #[serde(default)]
    pub frequency: f64,
    #[serde(default)]
    pub tangential_speed: f64,
    #[serde(default = "default_height")]
    pub height: f64,
    #[serde(default = "default_period")]
    pub period: f64,
}

fn default_height() -> f64 {
    1.0
}

fn default_period() -> f64 {
    std::f64::consts::TAU
}

impl MotionPreset {
    pub fn stationary(period: f64, height: f64) -> Self {
        Self {
            kind: MotionKind::Stationary,
            amplitude: 0.0,
            frequency: 0.0,
            tangential_speed: 0.0,
            height,
            period,
        }
    }

    pub fn vertical_breathing(amplitude: f64, frequency: f64, period: f64, height: f64) -> Self {
        Self {
            kind: MotionKind::VerticalBreathing,
            amplitude,
            frequency,
            ..Self::stationary(period, height)
        }
    }

    pub fn tangential_flow(speed: f64, period: f64, height: f64) -> Self {
        Self {
            kind: MotionKind::TangentialFlow,
            tangential_speed: speed,
            ..Self::stationary(period, height)
        }
    }

    pub fn combined(
        amplitude: f64,
        frequency: f64,
        speed: f64,
        period: f64,
        height: f64,
    ) -> Self {
        Self {
            kind: MotionKind::Combined,
            amplitude,
            frequency,
            tangential_speed: speed,
            height,
            period,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("amplitude", self.amplitude),
            ("frequency", self.frequency),
            ("tangential_speed", self.tangential_speed),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(Error::validation(format!("motion.{name} must be finite")));
            }
        }
        if !(self.height > 0.0 && self.height.is_finite()) {
            return Err(Error::validation(format!(
                "motion.height must be positive (got {})",
                self.height
            )));
        }
        if !(self.period > 0.0 && self.period.is_finite()) {
            return Err(Error::validation(format!(
                "motion.period must be positive (got {})",
                self.period
            )));
        }
        if self.amplitude.abs() >= self.height {
            return Err(Error::validation(format!(
                "motion.amplitude must satisfy |a| < H (got a={}, H={})",
                self.amplitude, self.height
            )));
        }
        let moves_vertically = matches!(
            self.kind,
            MotionKind::VerticalBreathing | MotionKind::Combined
        );
        let flows_tangentially =
            matches!(self.kind, MotionKind::TangentialFlow | MotionKind::Combined);
        if !moves_vertically && (self.amplitude != 0.0 || self.frequency != 0.0) {
            return Err(Error::validation(format!(
                "motion.amplitude and motion.frequency must be 0 for {:?}",
                self.kind
            )));
        }
        if !flows_tangentially && self.tangential_speed != 0.0 {
            return Err(Error::validation(format!(
                "motion.tangential_speed must be 0 for {:?}",
                self.kind
            )));
        }
        Ok(())
    }

    pub fn is_stationary(&self) -> bool {
        self.kind == MotionKind::Stationary
    }

    /// True when the pulled-back geometry does not depend on time.
    pub fn has_static_geometry(&self) -> bool {
        !self.moves_vertically() || self.amplitude == 0.0 || self.frequency == 0.0
    }

    fn moves_vertically(&self) -> bool {
        matches!(
            self.kind,
            MotionKind::VerticalBreathing | MotionKind::Combined
        )
    }

    /// Membrane height `h(t)`.
    pub fn membrane_height(&self, t: f64) -> f64 {
        if self.moves_vertically() {
            self.amplitude * (self.frequency * t).sin()
        } else {
            0.0
        }
    }

    /// `h'(t)`.
    pub fn membrane_speed(&self, t: f64) -> f64 {
        if self.moves_vertically() {
            self.amplitude * self.frequency * (self.frequency * t).cos()
        } else {
            0.0
        }
    }

    pub fn tangential(&self) -> f64 {
        match self.kind {
            MotionKind::TangentialFlow | MotionKind::Combined => self.tangential_speed,
            _ => 0.0,
        }
    }

    /// Physical bulk area `|Omega(t)|`.
    pub fn bulk_area(&self, t: f64) -> f64 {
        self.period * (self.height - self.membrane_height(t))
    }

    /// Physical membrane length `|Gamma(t)|`.
    pub fn membrane_length(&self, _t: f64) -> f64 {
        self.period
    }

    fn check_point(&self, t: f64, xi: [f64; 2]) -> Result<()> {
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::domain(format!("time must be finite and >= 0 (got {t})")));
        }
        let slack = 1e-12 * self.height;
        if !(xi[0] >= 0.0 && xi[0] < self.period) || !(xi[1] >= -slack && xi[1] <= self.height + slack)
        {
            return Err(Error::domain(format!(
                "point ({}, {}) lies outside the reference strip [0,{})x[0,{}]",
                xi[0], xi[1], self.period, self.height
            )));
        }
        Ok(())
    }
}

/// `Phi_t(xi)`.
pub fn flow_map(preset: &MotionPreset, t: f64, xi: [f64; 2]) -> Result<[f64; 2]> {
    preset.check_point(t, xi)?;
    let h = preset.membrane_height(t);
    let big_h = preset.height;
    Ok([xi[0], h + xi[1] * (big_h - h) / big_h])
}

/// Deformation gradient `D Phi_t(xi)`.
pub fn deformation_gradient(preset: &MotionPreset, t: f64, xi: [f64; 2]) -> Result<Mat2> {
    preset.check_point(t, xi)?;
    let h = preset.membrane_height(t);
    Ok(Mat2::diag(1.0, (preset.height - h) / preset.height))
}

/// Pointwise pullback package at a reference point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeometrySample {
    /// `J = det D Phi_t`.
    pub jacobian: f64,
    /// `M = (D Phi_t)^{-1}`.
    pub inv_gradient: Mat2,
    /// `A = delta_omega J M M^T`, the pulled-back bulk diffusion tensor.
    pub diffusion: Mat2,
    /// `B = A / J`.
    pub normalized_diffusion: Mat2,
    /// `omega = |M^T nu_0|` with `nu_0` the outward normal of the nearest
    /// horizontal boundary.
    pub boundary_metric: f64,
    /// `dJ/dt`.
    pub jacobian_rate: f64,
    /// Line element `|d Phi_t / dx|` of the mapped membrane.
    pub surface_len: f64,
    /// Time derivative of `surface_len`.
    pub surface_len_rate: f64,
}

pub fn geometry_sample(
    preset: &MotionPreset,
    t: f64,
    xi: [f64; 2],
    params: &SystemParameters,
) -> Result<GeometrySample> {
    let grad = deformation_gradient(preset, t, xi)?;
    let jacobian = grad.det();
    if !(jacobian > 0.0) {
        return Err(Error::Geometry(format!(
            "flow map is not orientation preserving at t={t} (J={jacobian})"
        )));
    }
    let inv = grad
        .inverse()
        .ok_or_else(|| Error::Geometry(format!("singular deformation gradient at t={t}")))?;
    let diffusion = (inv * inv.transpose()).scale(params.delta_omega * jacobian);
    let normalized = diffusion.scale(1.0 / jacobian);
    let normal = if xi[1] <= 0.5 * preset.height {
        MEMBRANE_NORMAL
    } else {
        OUTER_NORMAL
    };
    let boundary_metric = norm(inv.transpose().apply(normal));
    // tangent of the mapped membrane is d Phi / dx = (1, 0)
    let surface_len = norm([grad.0[0][0], grad.0[1][0]]);
    Ok(GeometrySample {
        jacobian,
        inv_gradient: inv,
        diffusion,
        normalized_diffusion: normalized,
        boundary_metric,
        jacobian_rate: -preset.membrane_speed(t) / preset.height,
        surface_len,
        surface_len_rate: 0.0,
    })
}

/// Velocity fields and their jumps at a reference point. Surface quantities
/// are those of the membrane and do not depend on the point's height.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VelocitySample {
    /// Parametrisation velocity `V_p` at `Phi_t(xi)`.
    pub v_p: [f64; 2],
    /// Bulk material velocity.
    pub v_omega: [f64; 2],
    /// Membrane material velocity.
    pub v_gamma: [f64; 2],
    /// Physical divergence of `V_p` at `Phi_t(xi)`.
    pub div_v_p: f64,
    pub div_v_omega: f64,
    /// Surface divergence of `V_Gamma`.
    pub surface_div_v_gamma: f64,
    /// `V_Omega - V_p`.
    pub j_omega: [f64; 2],
    /// `V_Gamma - V_p`.
    pub j_gamma: [f64; 2],
    /// Normal jump `(V_Omega - V_Gamma) . nu` on the membrane.
    pub jump: f64,
}

pub fn velocity_sample(preset: &MotionPreset, t: f64, xi: [f64; 2]) -> Result<VelocitySample> {
    preset.check_point(t, xi)?;
    let h = preset.membrane_height(t);
    let dh = preset.membrane_speed(t);
    let big_h = preset.height;
    let v_p = [0.0, dh * (1.0 - xi[1] / big_h)];
    let v_omega = [0.0, 0.0];
    let v_gamma = [preset.tangential(), dh];
    let j_omega = [v_omega[0] - v_p[0], v_omega[1] - v_p[1]];
    let j_gamma = [v_gamma[0] - v_p[0], v_gamma[1] - v_p[1]];
    let jump = dot([v_omega[0] - v_gamma[0], v_omega[1] - v_gamma[1]], MEMBRANE_NORMAL);
    Ok(VelocitySample {
        v_p,
        v_omega,
        v_gamma,
        div_v_p: -dh / (big_h - h),
        div_v_omega: 0.0,
        surface_div_v_gamma: 0.0,
        j_omega,
        j_gamma,
        jump,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, TAU};

    fn presets() -> Vec<MotionPreset> {
        vec![
            MotionPreset::stationary(TAU, 1.0),
            MotionPreset::vertical_breathing(0.1, 1.0, TAU, 1.0),
            MotionPreset::tangential_flow(0.7, TAU, 1.0),
            MotionPreset::combined(0.3, 2.0, -0.4, 3.0, 2.0),
        ]
    }

    #[test]
    fn identity_at_time_zero() {
        let params = SystemParameters::new(1.7, 1.0, 1.0, 1.0, 1.0).unwrap();
        for p in presets() {
            assert_eq!(flow_map(&p, 0.0, [1.0, 0.3]).unwrap(), [1.0, 0.3]);
            let g = geometry_sample(&p, 0.0, [1.0, 0.3], &params).unwrap();
            assert_eq!(g.jacobian, 1.0);
            assert_eq!(g.inv_gradient, Mat2::IDENTITY);
            assert_eq!(g.diffusion, Mat2::IDENTITY.scale(1.7));
            assert_eq!(g.boundary_metric, 1.0);
            assert_eq!(g.surface_len, 1.0);
        }
    }

    #[test]
    fn stationary_never_moves() {
        let p = MotionPreset::stationary(TAU, 1.0);
        for t in [0.0, 0.5, 3.0, 40.0] {
            assert_eq!(flow_map(&p, t, [2.0, 0.25]).unwrap(), [2.0, 0.25]);
            let v = velocity_sample(&p, t, [2.0, 0.0]).unwrap();
            assert_eq!(v.v_p, [0.0, 0.0]);
            assert_eq!(v.v_gamma, [0.0, 0.0]);
            assert_eq!(v.jump, 0.0);
            assert_eq!(v.div_v_p, 0.0);
        }
    }

    #[test]
    fn breathing_membrane_position() {
        let p = MotionPreset::vertical_breathing(0.1, 1.0, TAU, 1.0);
        let y = flow_map(&p, FRAC_PI_2, [0.4, 0.0]).unwrap();
        assert_eq!(y[0], 0.4);
        assert!((y[1] - 0.1).abs() < 1e-16);
        let top = flow_map(&p, FRAC_PI_2, [0.4, 1.0]).unwrap();
        assert!((top[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn breathing_pullback_package() {
        let params = SystemParameters::unit();
        let p = MotionPreset::vertical_breathing(0.1, 1.0, TAU, 1.0);
        let g = geometry_sample(&p, FRAC_PI_2, [0.0, 0.0], &params).unwrap();
        assert!((g.jacobian - 0.9).abs() < 1e-15);
        assert!(g.inv_gradient.max_abs_diff(&Mat2::diag(1.0, 1.0 / 0.9)) < 1e-14);
        assert!((g.boundary_metric - 1.0 / 0.9).abs() < 1e-14);
        assert_eq!(g.surface_len, 1.0);
        for t in [0.0, 0.3, 2.0] {
            let g = geometry_sample(&p, t, [0.0, 0.5], &params).unwrap();
            assert!((g.jacobian_rate + 0.1 * t.cos()).abs() < 1e-15);
        }
    }

    #[test]
    fn tensors_are_consistent() {
        let params = SystemParameters::new(0.8, 1.0, 1.0, 1.0, 1.0).unwrap();
        for p in presets() {
            for t in [0.0, 0.37, 1.9] {
                for y in [0.0, 0.3, p.height] {
                    let g = geometry_sample(&p, t, [0.5, y], &params).unwrap();
                    let m = g.inv_gradient;
                    let a = (m * m.transpose()).scale(0.8 * g.jacobian);
                    assert!(a.max_abs_diff(&g.diffusion) <= 1e-14);
                    assert!(g.diffusion.scale(1.0 / g.jacobian).max_abs_diff(&g.normalized_diffusion) <= 1e-14);
                    assert!(g.diffusion.is_symmetric_positive_definite());
                    assert!(g.jacobian > 0.0);
                    if y == 0.0 {
                        // membrane measure factor equals J * omega
                        assert!((g.jacobian * g.boundary_metric - g.surface_len).abs() < 1e-14);
                    }
                }
            }
        }
    }

    #[test]
    fn jumps_and_compatibility() {
        let p = MotionPreset::vertical_breathing(0.1, 1.0, TAU, 1.0);
        let v = velocity_sample(&p, 0.0, [1.0, 0.0]).unwrap();
        assert!((v.jump - 0.1).abs() < 1e-16);

        let c = 0.7;
        let p = MotionPreset::tangential_flow(c, TAU, 1.0);
        let v = velocity_sample(&p, 1.3, [1.0, 0.0]).unwrap();
        assert_eq!(v.jump, 0.0);
        assert_eq!(v.j_gamma, [c, 0.0]);

        for p in presets() {
            for t in [0.0, 0.4, 2.5] {
                let v = velocity_sample(&p, t, [0.2, 0.0]).unwrap();
                let rel = [v.v_p[0] - v.v_gamma[0], v.v_p[1] - v.v_gamma[1]];
                assert!(dot(rel, MEMBRANE_NORMAL).abs() <= 1e-14);
                assert!(dot(v.j_gamma, MEMBRANE_NORMAL).abs() <= 1e-14);
                assert!((v.jump - dot(v.j_omega, MEMBRANE_NORMAL)).abs() <= 1e-14);
                // the outer boundary is fixed
                let top = velocity_sample(&p, t, [0.2, p.height]).unwrap();
                assert_eq!(dot(top.v_p, OUTER_NORMAL), 0.0);
            }
        }
    }

    #[test]
    fn domain_errors() {
        let p = MotionPreset::stationary(1.0, 1.0);
        assert!(matches!(flow_map(&p, -0.1, [0.0, 0.0]), Err(Error::Domain(_))));
        assert!(matches!(flow_map(&p, 0.0, [1.0, 0.0]), Err(Error::Domain(_))));
        assert!(matches!(flow_map(&p, 0.0, [0.0, 1.5]), Err(Error::Domain(_))));
        assert!(matches!(flow_map(&p, f64::NAN, [0.0, 0.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn preset_validation() {
        assert!(MotionPreset::vertical_breathing(1.0, 1.0, 1.0, 1.0).validate().is_err());
        assert!(MotionPreset::vertical_breathing(0.5, 1.0, 1.0, 1.0).validate().is_ok());
        assert!(MotionPreset::stationary(0.0, 1.0).validate().is_err());
        let mut p = MotionPreset::stationary(1.0, 1.0);
        p.tangential_speed = 1.0;
        assert!(p.validate().is_err());
        for p in presets() {
            p.validate().unwrap();
        }
    }
}
