//! Dimensionless model constants and the conversion from biological units.
//!
//! With length scale `L`, time scale `S` and concentration scales `U`, `W`, `Z`
//! the dimensionless constants are
//!
//! ```text
//! delta_omega   = S D_L / L^2        delta_k  = 1 / (U S k_on)
//! delta_gamma   = S D_Gamma / L^2    delta_kp = 1 / (S k_off)
//! delta_gamma_p = S D_GammaP / L^2
//! ```
//!
//! and the surface fields are rescaled with `gamma = L U / W`, `gamma_p = L U / Z`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The five positive constants of the dimensionless system.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemParameters {
    /// Bulk (ligand) diffusivity.
    pub delta_omega: f64,
    /// Surface diffusivity of free receptors `w`.
    pub delta_gamma: f64,
    /// Surface diffusivity of complexes `z`.
    pub delta_gamma_p: f64,
    /// Binding time constant; the binding rate is `1 / delta_k`.
    pub delta_k: f64,
    /// Dissociation time constant; the unbinding rate is `1 / delta_kp`.
    pub delta_kp: f64,
}

impl SystemParameters {
    pub fn new(
        delta_omega: f64,
        delta_gamma: f64,
        delta_gamma_p: f64,
        delta_k: f64,
        delta_kp: f64,
    ) -> Result<Self> {
        let p = Self {
            delta_omega,
            delta_gamma,
            delta_gamma_p,
            delta_k,
            delta_kp,
        };
        p.validate()?;
        Ok(p)
    }

    /// All constants equal to one.
    pub fn unit() -> Self {
        Self {
            delta_omega: 1.0,
            delta_gamma: 1.0,
            delta_gamma_p: 1.0,
            delta_k: 1.0,
            delta_kp: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in self.named_values() {
            require_positive(name, value)?;
        }
        Ok(())
    }

    fn named_values(&self) -> [(&'static str, f64); 5] {
        [
            ("delta_omega", self.delta_omega),
            ("delta_gamma", self.delta_gamma),
            ("delta_gamma_p", self.delta_gamma_p),
            ("delta_k", self.delta_k),
            ("delta_kp", self.delta_kp),
        ]
    }

    /// Ratio `delta_kp / delta_k`; equilibria satisfy `z = ratio * u * w`.
    pub fn binding_affinity(&self) -> f64 {
        self.delta_kp / self.delta_k
    }

    /// `delta_omega = delta_k = delta_kp = 1`, the regime in which the entropy
    /// of the stationary system dissipates at the rate given by [`crate::functionals::dissipation`].
    pub fn is_entropy_regime(&self) -> bool {
        self.delta_omega == 1.0 && self.delta_k == 1.0 && self.delta_kp == 1.0
    }

    pub fn max_diffusivity(&self) -> f64 {
        self.delta_omega
            .max(self.delta_gamma)
            .max(self.delta_gamma_p)
    }
}

fn require_positive(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::validation(format!(
            "{name} must be positive (got {value})"
        )))
    }
}

/// Physical constants of the receptor-ligand model together with the chosen
/// reference scales.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimensionalParameters {
    #[serde(rename = "D_L")]
    pub d_ligand: f64,
    #[serde(rename = "D_Gamma")]
    pub d_receptor: f64,
    #[serde(rename = "D_GammaP")]
    pub d_complex: f64,
    pub k_on: f64,
    pub k_off: f64,
    #[serde(rename = "L")]
    pub length: f64,
    #[serde(rename = "S")]
    pub time: f64,
    #[serde(rename = "U")]
    pub u_scale: f64,
    #[serde(rename = "W")]
    pub w_scale: f64,
    #[serde(rename = "Z")]
    pub z_scale: f64,
}

impl DimensionalParameters {
    pub fn unit() -> Self {
        Self {
            d_ligand: 1.0,
            d_receptor: 1.0,
            d_complex: 1.0,
            k_on: 1.0,
            k_off: 1.0,
            length: 1.0,
            time: 1.0,
            u_scale: 1.0,
            w_scale: 1.0,
            z_scale: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("D_L", self.d_ligand),
            ("D_Gamma", self.d_receptor),
            ("D_GammaP", self.d_complex),
            ("k_on", self.k_on),
            ("k_off", self.k_off),
            ("L", self.length),
            ("S", self.time),
            ("U", self.u_scale),
            ("W", self.w_scale),
            ("Z", self.z_scale),
        ];
        for (name, value) in fields {
            require_positive(name, value)?;
        }
        Ok(())
    }

    pub fn scales(&self) -> Scales {
        Scales {
            length: self.length,
            time: self.time,
            u: self.u_scale,
            w: self.w_scale,
            z: self.z_scale,
        }
    }
}

/// Reference scales used to make the model dimensionless.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scales {
    #[serde(rename = "L")]
    pub length: f64,
    #[serde(rename = "S")]
    pub time: f64,
    #[serde(rename = "U")]
    pub u: f64,
    #[serde(rename = "W")]
    pub w: f64,
    #[serde(rename = "Z")]
    pub z: f64,
}

/// Result of [`nondimensionalize`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Nondimensional {
    #[serde(flatten)]
    pub params: SystemParameters,
    /// `L U / W`; receptor densities are rescaled as `w = w_bar / gamma`.
    pub gamma: f64,
    /// `L U / Z`; complex densities are rescaled as `z = z_bar / gamma_p`.
    pub gamma_p: f64,
}

pub fn nondimensionalize(dim: &DimensionalParameters) -> Result<Nondimensional> {
    dim.validate()?;
    let l2 = dim.length * dim.length;
    let params = SystemParameters {
        delta_omega: dim.time * dim.d_ligand / l2,
        delta_gamma: dim.time * dim.d_receptor / l2,
        delta_gamma_p: dim.time * dim.d_complex / l2,
        delta_k: 1.0 / (dim.u_scale * dim.time * dim.k_on),
        delta_kp: 1.0 / (dim.time * dim.k_off),
    };
    params.validate()?;
    Ok(Nondimensional {
        params,
        gamma: dim.length * dim.u_scale / dim.w_scale,
        gamma_p: dim.length * dim.u_scale / dim.z_scale,
    })
}

/// Inverse of [`nondimensionalize`] for a given choice of scales.
pub fn redimensionalize(params: &SystemParameters, scales: &Scales) -> Result<DimensionalParameters> {
    params.validate()?;
    let dim = DimensionalParameters {
        d_ligand: params.delta_omega * scales.length * scales.length / scales.time,
        d_receptor: params.delta_gamma * scales.length * scales.length / scales.time,
        d_complex: params.delta_gamma_p * scales.length * scales.length / scales.time,
        k_on: 1.0 / (params.delta_k * scales.u * scales.time),
        k_off: 1.0 / (params.delta_kp * scales.time),
        length: scales.length,
        time: scales.time,
        u_scale: scales.u,
        w_scale: scales.w,
        z_scale: scales.z,
    };
    dim.validate()?;
    Ok(dim)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-14 * a.abs().max(b.abs()).max(1.0)
    }

    #[test]
    fn unit_scales_give_unit_constants() {
        let nd = nondimensionalize(&DimensionalParameters::unit()).unwrap();
        assert_eq!(nd.params, SystemParameters::unit());
        assert_eq!(nd.gamma, 1.0);
        assert_eq!(nd.gamma_p, 1.0);
    }

    #[test]
    fn hand_evaluated_constants() {
        let mut dim = DimensionalParameters::unit();
        dim.d_ligand = 2.0;
        dim.length = 2.0;
        dim.time = 2.0;
        assert!(close(nondimensionalize(&dim).unwrap().params.delta_omega, 1.0));

        let mut dim = DimensionalParameters::unit();
        dim.k_off = 0.5;
        dim.time = 4.0;
        assert!(close(nondimensionalize(&dim).unwrap().params.delta_kp, 0.5));

        let mut dim = DimensionalParameters::unit();
        dim.u_scale = 2.0;
        dim.time = 5.0;
        dim.k_on = 0.1;
        assert!(close(nondimensionalize(&dim).unwrap().params.delta_k, 1.0));
    }

    #[test]
    fn validation_names_the_field() {
        let mut p = SystemParameters::unit();
        assert!(p.validate().is_ok());
        p.delta_k = 0.0;
        let msg = p.validate().unwrap_err().to_string();
        assert!(msg.starts_with("delta_k must be positive"), "{msg}");

        let mut p = SystemParameters::unit();
        p.delta_omega = -1.0;
        assert!(p.validate().unwrap_err().to_string().contains("delta_omega"));

        let mut dim = DimensionalParameters::unit();
        dim.k_off = -2.0;
        assert!(nondimensionalize(&dim).unwrap_err().to_string().contains("k_off"));
    }

    #[test]
    fn nan_is_rejected() {
        let mut p = SystemParameters::unit();
        p.delta_gamma = f64::NAN;
        assert!(p.validate().is_err());
    }

    proptest! {
        #[test]
        fn diffusive_scaling_leaves_diffusivities_unchanged(c in 0.01f64..100.0, d in 0.1f64..10.0) {
            let mut dim = DimensionalParameters::unit();
            dim.d_ligand = d;
            dim.d_receptor = 2.0 * d;
            dim.d_complex = 0.5 * d;
            let base = nondimensionalize(&dim).unwrap().params;
            dim.length *= c;
            dim.time *= c * c;
            let scaled = nondimensionalize(&dim).unwrap().params;
            for (a, b) in [
                (base.delta_omega, scaled.delta_omega),
                (base.delta_gamma, scaled.delta_gamma),
                (base.delta_gamma_p, scaled.delta_gamma_p),
            ] {
                prop_assert!((a - b).abs() <= 1e-12 * a);
            }
        }

        #[test]
        fn round_trip_recovers_inputs(
            vals in proptest::array::uniform10(1e-3f64..1e3),
        ) {
            let dim = DimensionalParameters {
                d_ligand: vals[0], d_receptor: vals[1], d_complex: vals[2],
                k_on: vals[3], k_off: vals[4], length: vals[5], time: vals[6],
                u_scale: vals[7], w_scale: vals[8], z_scale: vals[9],
            };
            let nd = nondimensionalize(&dim).unwrap();
            let back = redimensionalize(&nd.params, &dim.scales()).unwrap();
            let pairs = [
                (dim.d_ligand, back.d_ligand), (dim.d_receptor, back.d_receptor),
                (dim.d_complex, back.d_complex), (dim.k_on, back.k_on), (dim.k_off, back.k_off),
            ];
            for (a, b) in pairs {
                prop_assert!((a - b).abs() <= 1e-12 * a, "{a} vs {b}");
            }
        }
    }
}
