//! Fanger PMV/PPD thermal comfort indices (ISO 7730).

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// W/m² per met.
pub const W_PER_MET: f64 = 58.15;
/// m²K/W per clo.
pub const M2K_PER_W_PER_CLO: f64 = 0.155;
const MAX_ITERATIONS: usize = 200;
const TOLERANCE: f64 = 1e-5;

#[derive(Debug, Error, PartialEq)]
pub enum ComfortError {
    #[error("invalid comfort input: {0}")]
    InvalidInput(&'static str),
    #[error("clothing surface temperature did not converge in {0} iterations")]
    NoConvergence(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComfortInput {
    /// °C
    pub air_temp: f64,
    /// °C
    pub mean_radiant_temp: f64,
    /// Measured air speed, m/s. Body movement is added on top for active
    /// occupants.
    pub air_speed: f64,
    /// %
    pub relative_humidity: f64,
    /// met
    pub metabolic_rate: f64,
    /// clo
    pub clothing: f64,
}

impl ComfortInput {
    /// Office occupant in winter clothing; radiant temperature equal to air.
    pub fn winter_office(air_temp: f64) -> Self {
        Self {
            air_temp,
            mean_radiant_temp: air_temp,
            air_speed: 0.1,
            relative_humidity: 50.0,
            metabolic_rate: 1.2,
            clothing: 1.1,
        }
    }

    /// Office occupant in summer clothing; radiant temperature equal to air.
    pub fn summer_office(air_temp: f64) -> Self {
        Self {
            air_speed: 0.15,
            clothing: 0.6,
            ..Self::winter_office(air_temp)
        }
    }

    fn validate(&self) -> Result<(), ComfortError> {
        let finite = [
            self.air_temp,
            self.mean_radiant_temp,
            self.air_speed,
            self.relative_humidity,
            self.metabolic_rate,
            self.clothing,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(ComfortError::InvalidInput("non-finite value"));
        }
        if self.air_speed < 0.0 {
            return Err(ComfortError::InvalidInput("air speed must be non-negative"));
        }
        if !(0.0..=100.0).contains(&self.relative_humidity) {
            return Err(ComfortError::InvalidInput("relative humidity must lie in [0, 100]"));
        }
        if self.metabolic_rate <= 0.0 {
            return Err(ComfortError::InvalidInput("metabolic rate must be positive"));
        }
        if self.clothing < 0.0 {
            return Err(ComfortError::InvalidInput("clothing insulation must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComfortResult {
    pub pmv: f64,
    pub ppd: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BuildingClass {
    Existing,
    New,
}

impl BuildingClass {
    pub fn pmv_bound(self) -> f64 {
        match self {
            BuildingClass::Existing => 0.7,
            BuildingClass::New => 0.5,
        }
    }
}

pub fn ppd(pmv: f64) -> f64 {
    100.0 - 95.0 * (-0.03353 * pmv.powi(4) - 0.2179 * pmv.powi(2)).exp()
}

/// Relative air speed seen by an occupant whose activity exceeds 1 met.
pub fn relative_air_speed(air_speed: f64, met: f64) -> f64 {
    air_speed + 0.3 * (met - 1.0).max(0.0)
}

pub fn pmv(input: &ComfortInput) -> Result<ComfortResult, ComfortError> {
    input.validate()?;
    let ta = input.air_temp;
    let tr = input.mean_radiant_temp;
    let v = relative_air_speed(input.air_speed, input.metabolic_rate);
    let m = input.metabolic_rate * W_PER_MET;
    // No external work.
    let mw = m;
    let icl = input.clothing * M2K_PER_W_PER_CLO;
    // Water vapour partial pressure, Pa.
    let pa = input.relative_humidity * 10.0 * (16.6536 - 4030.183 / (ta + 235.0)).exp();
    let fcl = if icl <= 0.078 {
        1.0 + 1.29 * icl
    } else {
        1.05 + 0.645 * icl
    };
    let hc_forced = 12.1 * v.sqrt();
    let taa = ta + 273.0;
    let tra = tr + 273.0;

    // Clothing surface temperature by damped fixed-point iteration, in
    // units of 100 K.
    let p1 = icl * fcl;
    let p2 = p1 * 3.96;
    let p3 = p1 * 100.0;
    let p4 = p1 * taa;
    let p5 = 308.7 - 0.028 * mw + p2 * (tra / 100.0).powi(4);
    let tcla = taa + (35.5 - ta) / (3.5 * icl + 0.1);
    let mut xn = tcla / 100.0;
    let mut xf = tcla / 50.0;
    let mut hc = hc_forced;
    let mut converged = false;
    for _ in 0..MAX_ITERATIONS {
        xf = (xf + xn) / 2.0;
        let hc_natural = 2.38 * (100.0 * xf - taa).abs().powf(0.25);
        hc = hc_forced.max(hc_natural);
        xn = (p5 + p4 * hc - p2 * xf.powi(4)) / (100.0 + p3 * hc);
        if (xn - xf).abs() <= TOLERANCE {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(ComfortError::NoConvergence(MAX_ITERATIONS));
    }
    let tcl = 100.0 * xn - 273.0;

    let skin_diffusion = 3.05e-3 * (5733.0 - 6.99 * mw - pa);
    let sweating = if mw > W_PER_MET { 0.42 * (mw - W_PER_MET) } else { 0.0 };
    let latent_respiration = 1.7e-5 * m * (5867.0 - pa);
    let dry_respiration = 0.0014 * m * (34.0 - ta);
    let radiation = 3.96 * fcl * (xn.powi(4) - (tra / 100.0).powi(4));
    let convection = fcl * hc * (tcl - ta);
    let sensitivity = 0.303 * (-0.036 * m).exp() + 0.028;
    let pmv = sensitivity
        * (mw - skin_diffusion - sweating - latent_respiration - dry_respiration - radiation - convection);
    Ok(ComfortResult { pmv, ppd: ppd(pmv) })
}

/// True iff |PMV| is strictly inside the class bound.
pub fn classify(result: &ComfortResult, class: BuildingClass) -> bool {
    result.pmv.abs() < class.pmv_bound()
}
