//! Periodic heat-transfer matrices of layered constructions and the
//! internal areal heat capacity they imply.
//!
//! Conventions: layer 0 is the internal side. A construction matrix is
//! `Z = Z_se · Z_N · … · Z_1 · Z_si` and maps the internal-side amplitudes
//! `(θ1, q1)` onto the external-side amplitudes `(θ2, q2)`. Pure-resistance
//! matrices carry `Z12 = −R`; layer matrices follow the same sign, so
//! `Z12` is negative-real in the quasi-static limit.

use std::f64::consts::PI;
use std::ops::Mul;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default period: one day.
pub const DEFAULT_PERIOD_S: f64 = 86_400.0;
pub const DEFAULT_R_SI: f64 = 0.13;
pub const DEFAULT_R_SE: f64 = 0.04;

#[derive(Debug, Error)]
pub enum EnvelopeError {
    #[error("{0} must be strictly positive and finite")]
    NonPositiveProperty(&'static str),
    #[error("surface resistance must be non-negative and finite")]
    NegativeResistance,
    #[error("cannot cascade an empty sequence of matrices")]
    EmptySequence,
    #[error("construction `{0}` has no layers")]
    NoLayers(String),
    #[error("|Z12| = {0:e} is too small to define an areal heat capacity")]
    SingularZ12(f64),
    #[error("envelope file: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A homogeneous layer. Serialized as `[d, lambda, rho, c]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct Layer {
    /// m
    pub thickness: f64,
    /// W/(m·K)
    pub conductivity: f64,
    /// kg/m³
    pub density: f64,
    /// J/(kg·K)
    pub specific_heat: f64,
}

impl Layer {
    pub fn new(
        thickness: f64,
        conductivity: f64,
        density: f64,
        specific_heat: f64,
    ) -> Result<Self, EnvelopeError> {
        for (name, v) in [
            ("thickness", thickness),
            ("conductivity", conductivity),
            ("density", density),
            ("specific heat", specific_heat),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(EnvelopeError::NonPositiveProperty(name));
            }
        }
        Ok(Self {
            thickness,
            conductivity,
            density,
            specific_heat,
        })
    }

    /// Periodic penetration depth `sqrt(λT / (π ρ c))`, m.
    pub fn penetration_depth(&self, period_s: f64) -> f64 {
        (self.conductivity * period_s / (PI * self.density * self.specific_heat)).sqrt()
    }

    pub fn resistance(&self) -> f64 {
        self.thickness / self.conductivity
    }

    /// Areal heat capacity ρ·c·d, J/(m²K).
    pub fn areal_capacity(&self) -> f64 {
        self.density * self.specific_heat * self.thickness
    }
}

impl TryFrom<[f64; 4]> for Layer {
    type Error = EnvelopeError;

    fn try_from([d, lambda, rho, c]: [f64; 4]) -> Result<Self, Self::Error> {
        Layer::new(d, lambda, rho, c)
    }
}

impl From<Layer> for [f64; 4] {
    fn from(l: Layer) -> Self {
        [l.thickness, l.conductivity, l.density, l.specific_heat]
    }
}

/// 2×2 complex heat-transfer matrix. `Z12` in m²K/W, `Z21` in W/(m²K).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferMatrix {
    pub z11: Complex64,
    pub z12: Complex64,
    pub z21: Complex64,
    pub z22: Complex64,
}

impl TransferMatrix {
    pub fn identity() -> Self {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        Self {
            z11: one,
            z12: zero,
            z21: zero,
            z22: one,
        }
    }

    /// Pure thermal resistance (surface film or air gap).
    pub fn resistance(r: f64) -> Result<Self, EnvelopeError> {
        if !(r.is_finite() && r >= 0.0) {
            return Err(EnvelopeError::NegativeResistance);
        }
        Ok(Self {
            z12: Complex64::new(-r, 0.0),
            ..Self::identity()
        })
    }

    pub fn det(&self) -> Complex64 {
        self.z11 * self.z22 - self.z12 * self.z21
    }
}

impl Mul for TransferMatrix {
    type Output = TransferMatrix;

    fn mul(self, rhs: TransferMatrix) -> TransferMatrix {
        TransferMatrix {
            z11: self.z11 * rhs.z11 + self.z12 * rhs.z21,
            z12: self.z11 * rhs.z12 + self.z12 * rhs.z22,
            z21: self.z21 * rhs.z11 + self.z22 * rhs.z21,
            z22: self.z21 * rhs.z12 + self.z22 * rhs.z22,
        }
    }
}

/// Periodic conduction matrix of a single layer.
///
/// With `k = (1 + i)/δ`: `Z11 = Z22 = cosh(k d)`, `Z12 = −sinh(k d)/(λ k)`,
/// `Z21 = −λ k sinh(k d)`.
pub fn layer_matrix(layer: &Layer, period_s: f64) -> Result<TransferMatrix, EnvelopeError> {
    let layer = Layer::new(
        layer.thickness,
        layer.conductivity,
        layer.density,
        layer.specific_heat,
    )?;
    if !(period_s.is_finite() && period_s > 0.0) {
        return Err(EnvelopeError::NonPositiveProperty("period"));
    }
    let delta = layer.penetration_depth(period_s);
    let k = Complex64::new(1.0, 1.0) / delta;
    let kd = k * layer.thickness;
    let (ch, sh) = (kd.cosh(), kd.sinh());
    let lambda_k = k * layer.conductivity;
    Ok(TransferMatrix {
        z11: ch,
        z12: -sh / lambda_k,
        z21: -lambda_k * sh,
        z22: ch,
    })
}

/// Product of `matrices` ordered from the internal side outwards, i.e.
/// `matrices[n-1] · … · matrices[0]`.
pub fn cascade(matrices: &[TransferMatrix]) -> Result<TransferMatrix, EnvelopeError> {
    let (first, rest) = matrices.split_first().ok_or(EnvelopeError::EmptySequence)?;
    Ok(rest.iter().fold(*first, |acc, m| *m * acc))
}

/// Internal areal heat capacity `T/(2π) · |(Z11 − 1)/Z12|`, in kJ/(m²K).
pub fn areal_heat_capacity(z: &TransferMatrix, period_s: f64) -> Result<f64, EnvelopeError> {
    let z12 = z.z12.norm();
    if z12 < 1e-12 {
        return Err(EnvelopeError::SingularZ12(z12));
    }
    Ok(period_s / (2.0 * PI) * ((z.z11 - 1.0) / z.z12).norm() / 1000.0)
}

fn default_r_si() -> f64 {
    DEFAULT_R_SI
}

fn default_r_se() -> f64 {
    DEFAULT_R_SE
}

/// A layered building component with its exposed area.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Construction {
    #[serde(default)]
    pub name: String,
    /// Index 0 faces the room.
    pub layers: Vec<Layer>,
    /// m²
    pub area: f64,
    #[serde(default = "default_r_si")]
    pub r_si: f64,
    #[serde(default = "default_r_se")]
    pub r_se: f64,
}

impl Construction {
    pub fn new(name: impl Into<String>, layers: Vec<Layer>, area: f64) -> Self {
        Self {
            name: name.into(),
            layers,
            area,
            r_si: DEFAULT_R_SI,
            r_se: DEFAULT_R_SE,
        }
    }

    pub fn with_films(mut self, r_si: f64, r_se: f64) -> Self {
        self.r_si = r_si;
        self.r_se = r_se;
        self
    }

    pub fn validate(&self) -> Result<(), EnvelopeError> {
        if self.layers.is_empty() {
            return Err(EnvelopeError::NoLayers(self.name.clone()));
        }
        if !(self.area.is_finite() && self.area > 0.0) {
            return Err(EnvelopeError::NonPositiveProperty("area"));
        }
        for r in [self.r_si, self.r_se] {
            if !(r.is_finite() && r >= 0.0) {
                return Err(EnvelopeError::NegativeResistance);
            }
        }
        Ok(())
    }

    /// Surface-to-surface matrix including both film resistances.
    pub fn transfer_matrix(&self, period_s: f64) -> Result<TransferMatrix, EnvelopeError> {
        self.validate()?;
        let mut chain = Vec::with_capacity(self.layers.len() + 2);
        chain.push(TransferMatrix::resistance(self.r_si)?);
        for layer in &self.layers {
            chain.push(layer_matrix(layer, period_s)?);
        }
        chain.push(TransferMatrix::resistance(self.r_se)?);
        cascade(&chain)
    }

    /// κ of the internal side, kJ/(m²K).
    pub fn areal_heat_capacity(&self, period_s: f64) -> Result<f64, EnvelopeError> {
        areal_heat_capacity(&self.transfer_matrix(period_s)?, period_s)
    }

    /// Steady-state transmittance including films, W/(m²K).
    pub fn u_value(&self) -> f64 {
        1.0 / (self.r_si + self.r_se + self.layers.iter().map(Layer::resistance).sum::<f64>())
    }
}

/// `Σ κ_j · A_j`, kJ/K.
pub fn total_capacity(components: &[(Construction, f64)]) -> f64 {
    components.iter().map(|(c, kappa)| kappa * c.area).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentSummary {
    pub name: String,
    /// kJ/(m²K)
    pub kappa: f64,
    /// m²
    pub area: f64,
    /// κ·A, kJ/K
    pub capacity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeSummary {
    pub period_s: f64,
    pub components: Vec<ComponentSummary>,
    /// C_m, kJ/K
    pub total_capacity: f64,
}

fn default_period() -> f64 {
    DEFAULT_PERIOD_S
}

/// Contents of an envelope definition file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeDefinition {
    #[serde(default = "default_period")]
    pub period_s: f64,
    pub components: Vec<Construction>,
}

impl EnvelopeDefinition {
    pub fn from_json(text: &str) -> Result<Self, EnvelopeError> {
        serde_json::from_str(text).map_err(|e| EnvelopeError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, EnvelopeError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn summarize(&self) -> Result<EnvelopeSummary, EnvelopeError> {
        if !(self.period_s.is_finite() && self.period_s > 0.0) {
            return Err(EnvelopeError::NonPositiveProperty("period"));
        }
        let mut pairs = Vec::with_capacity(self.components.len());
        for c in &self.components {
            let kappa = c.areal_heat_capacity(self.period_s)?;
            pairs.push((c.clone(), kappa));
        }
        let components = pairs
            .iter()
            .map(|(c, kappa)| ComponentSummary {
                name: c.name.clone(),
                kappa: *kappa,
                area: c.area,
                capacity: kappa * c.area,
            })
            .collect();
        Ok(EnvelopeSummary {
            period_s: self.period_s,
            components,
            total_capacity: total_capacity(&pairs),
        })
    }
}
