//! Closed-form surplus-storage fraction α(k) over a forecast window.
//!
//! Units: energies in kWh per step, carbon intensity in gCO₂/kWh, thermal
//! capacitance in kJ/K, temperatures in K. The weight ω is a bare tuning
//! scalar that absorbs the remaining units of the cost.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::season::Mode;
use crate::thermal_model::{State, StateSpaceModel};

/// kJ per kWh.
pub const KJ_PER_KWH: f64 = 3600.0;
/// Surplus sums at or below this are treated as no surplus.
pub const ZERO_SURPLUS_KWH: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum ControllerError {
    #[error("invalid controller config: {0}")]
    InvalidConfig(String),
    #[error("invalid forecast window: {0}")]
    InvalidWindow(String),
    #[error("horizon [{k}, {k}+{m}) overruns signals of length {len}")]
    HorizonOverrun { k: usize, m: usize, len: usize },
    #[error("model step {model} min does not match controller step {controller} min")]
    StepMismatch { model: u32, controller: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerConfig {
    pub omega: f64,
    pub horizon_steps: usize,
    pub step_minutes: u32,
    pub gamma: f64,
    pub mode: Mode,
    /// Equivalent thermal capacitance, kJ/K.
    pub c_th: f64,
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<(), ControllerError> {
        let bad = |msg: &str| Err(ControllerError::InvalidConfig(msg.into()));
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return bad("omega must be positive and finite");
        }
        if self.horizon_steps == 0 {
            return bad("horizon must be at least one step");
        }
        if self.step_minutes == 0 {
            return bad("step must be a positive number of minutes");
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must lie in (0, 1]");
        }
        if !(self.c_th > 0.0 && self.c_th.is_finite()) {
            return bad("thermal capacitance must be positive and finite");
        }
        Ok(())
    }

    pub fn eta(&self) -> f64 {
        self.mode.eta()
    }
}

/// Per-step predicted demand, PV energy and carbon intensity over a horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastWindow {
    pub e_pred: Vec<f64>,
    pub e_solar: Vec<f64>,
    pub ci: Vec<f64>,
}

impl ForecastWindow {
    pub fn new(e_pred: Vec<f64>, e_solar: Vec<f64>, ci: Vec<f64>) -> Result<Self, ControllerError> {
        let fw = Self { e_pred, e_solar, ci };
        fw.validate()?;
        Ok(fw)
    }

    pub fn validate(&self) -> Result<(), ControllerError> {
        let m = self.e_pred.len();
        if m == 0 {
            return Err(ControllerError::InvalidWindow("window is empty".into()));
        }
        if self.e_solar.len() != m || self.ci.len() != m {
            return Err(ControllerError::InvalidWindow("series lengths differ".into()));
        }
        for (name, s) in [("e_pred", &self.e_pred), ("e_solar", &self.e_solar), ("ci", &self.ci)] {
            if s.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(ControllerError::InvalidWindow(format!(
                    "{name} must be finite and non-negative"
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.e_pred.len()
    }

    pub fn is_empty(&self) -> bool {
        self.e_pred.is_empty()
    }
}

/// Outcome of one controller evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlDecision {
    pub alpha: f64,
    pub alpha_unsaturated: f64,
    /// Setpoint shift for the current step, K.
    pub delta_t: f64,
    /// Thermal energy stored over the window, kWh.
    pub delta_q: f64,
    pub j_co2_baseline: f64,
    /// Emissions with per-step re-clipping of the offset import.
    pub j_co2_controlled: f64,
    /// Emissions term of the quadratic objective, without re-clipping.
    pub j_co2_simplified: f64,
    pub j_comfort: f64,
}

impl ControlDecision {
    /// Re-clipped per-step emissions minus the emissions term of the
    /// quadratic objective.
    pub fn simplification_gap(&self) -> f64 {
        self.j_co2_controlled - self.j_co2_simplified
    }
}

pub fn solar_surplus(fw: &ForecastWindow) -> Vec<f64> {
    fw.e_solar
        .iter()
        .zip(&fw.e_pred)
        .map(|(s, p)| (s - p).max(0.0))
        .collect()
}

fn baseline_import(fw: &ForecastWindow) -> impl Iterator<Item = f64> + '_ {
    fw.e_pred.iter().zip(&fw.e_solar).map(|(p, s)| (p - s).max(0.0))
}

pub fn baseline_grid_energy(fw: &ForecastWindow) -> f64 {
    baseline_import(fw).sum()
}

pub fn baseline_emissions(fw: &ForecastWindow) -> f64 {
    baseline_import(fw).zip(&fw.ci).map(|(e, c)| e * c).sum()
}

/// Uniform per-step import offset `(α/m)·ΣΔE_solar`.
fn offset_per_step(fw: &ForecastWindow, alpha: f64) -> f64 {
    alpha / fw.len() as f64 * solar_surplus(fw).iter().sum::<f64>()
}

pub fn controlled_emissions(fw: &ForecastWindow, alpha: f64) -> f64 {
    let off = offset_per_step(fw, alpha);
    baseline_import(fw)
        .zip(&fw.ci)
        .map(|(e, c)| (e - off).max(0.0) * c)
        .sum()
}

/// Emission reduction at window step `k` relative to α = 0.
pub fn delta_co2_step(fw: &ForecastWindow, alpha: f64, k: usize) -> f64 {
    let off = offset_per_step(fw, alpha);
    let import = (fw.e_pred[k] - fw.e_solar[k]).max(0.0);
    import.min(off) * fw.ci[k]
}

/// Setpoint shift caused by storing `alpha·surplus` kWh, K.
pub fn temperature_shift(cfg: &ControllerConfig, alpha: f64, surplus: f64) -> f64 {
    cfg.eta() * cfg.gamma * alpha * surplus * KJ_PER_KWH / cfg.c_th
}

/// Square of the total shift over the window, K².
pub fn comfort_cost(cfg: &ControllerConfig, fw: &ForecastWindow, alpha: f64) -> f64 {
    let total: f64 = solar_surplus(fw).iter().sum();
    temperature_shift(cfg, alpha, total).powi(2)
}

/// The quadratic objective minimised by [`alpha_star`].
pub fn total_cost(cfg: &ControllerConfig, fw: &ForecastWindow, alpha: f64) -> f64 {
    let surplus: f64 = solar_surplus(fw).iter().sum();
    let ci: f64 = fw.ci.iter().sum();
    let m = fw.len() as f64;
    let emissions = (baseline_grid_energy(fw) - alpha / m * surplus) * ci;
    let comfort = cfg.omega * alpha * alpha * (cfg.gamma * surplus / cfg.c_th).powi(2);
    emissions + comfort
}

/// Unclamped minimiser from window sums; zero without surplus.
pub fn alpha_unsaturated(cfg: &ControllerConfig, m: usize, sum_ci: f64, sum_surplus: f64) -> f64 {
    if sum_surplus <= ZERO_SURPLUS_KWH {
        return 0.0;
    }
    cfg.c_th * cfg.c_th / (2.0 * cfg.omega * m as f64 * cfg.gamma * cfg.gamma) * sum_ci / sum_surplus
}

/// Optimal α for the window, saturated to [0, 1].
pub fn alpha_star(cfg: &ControllerConfig, fw: &ForecastWindow) -> ControlDecision {
    let surplus = solar_surplus(fw);
    let sum_surplus: f64 = surplus.iter().sum();
    let sum_ci: f64 = fw.ci.iter().sum();
    let baseline = baseline_emissions(fw);
    let j_simplified_0 = baseline_grid_energy(fw) * sum_ci;
    if sum_surplus <= ZERO_SURPLUS_KWH {
        return ControlDecision {
            alpha: 0.0,
            alpha_unsaturated: 0.0,
            delta_t: 0.0,
            delta_q: 0.0,
            j_co2_baseline: baseline,
            j_co2_controlled: baseline,
            j_co2_simplified: j_simplified_0,
            j_comfort: 0.0,
        };
    }
    let raw = alpha_unsaturated(cfg, fw.len(), sum_ci, sum_surplus);
    let alpha = raw.clamp(0.0, 1.0);
    ControlDecision {
        alpha,
        alpha_unsaturated: raw,
        delta_t: temperature_shift(cfg, alpha, surplus[0]),
        delta_q: cfg.gamma * alpha * sum_surplus,
        j_co2_baseline: baseline,
        j_co2_controlled: controlled_emissions(fw, alpha),
        j_co2_simplified: j_simplified_0 - alpha / fw.len() as f64 * sum_surplus * sum_ci,
        j_comfort: comfort_cost(cfg, fw, alpha),
    }
}

/// Aligned exogenous signals at the controller step.
#[derive(Debug, Clone, Copy)]
pub struct ControlSignals<'a> {
    pub t_ref: &'a [f64],
    pub n_occ: &'a [f64],
    pub t_ext: &'a [f64],
    /// PV energy per step, kWh.
    pub e_solar: &'a [f64],
    pub ci: &'a [f64],
}

impl ControlSignals<'_> {
    pub fn len(&self) -> usize {
        self.t_ref.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t_ref.is_empty()
    }

    fn check(&self) -> Result<(), ControllerError> {
        let n = self.len();
        if [self.n_occ.len(), self.t_ext.len(), self.e_solar.len(), self.ci.len()]
            .iter()
            .any(|&l| l != n)
        {
            return Err(ControllerError::InvalidWindow("signal lengths differ".into()));
        }
        Ok(())
    }
}

/// Predicted energy per step from a surrogate free run starting at `state`.
pub fn forecast_window(
    model: &StateSpaceModel,
    state: &State,
    signals: &ControlSignals<'_>,
    k: usize,
    m: usize,
) -> Result<ForecastWindow, ControllerError> {
    signals.check()?;
    if m == 0 || k + m > signals.len() {
        return Err(ControllerError::HorizonOverrun {
            k,
            m,
            len: signals.len(),
        });
    }
    let hours = f64::from(model.step_minutes()) / 60.0;
    let mut x = *state;
    let e_pred = (k..k + m)
        .map(|i| {
            let u = [signals.t_ref[i], signals.n_occ[i], signals.t_ext[i]];
            model.step(&mut x, &u).max(0.0) * hours
        })
        .collect();
    ForecastWindow::new(
        e_pred,
        signals.e_solar[k..k + m].to_vec(),
        signals.ci[k..k + m].to_vec(),
    )
}

/// One receding-horizon evaluation at step `k`; only α(k) is meant to be
/// applied before re-planning at `k + 1`.
pub fn receding_step(
    cfg: &ControllerConfig,
    model: &StateSpaceModel,
    state: &State,
    signals: &ControlSignals<'_>,
    k: usize,
) -> Result<ControlDecision, ControllerError> {
    cfg.validate()?;
    if model.step_minutes() != cfg.step_minutes {
        return Err(ControllerError::StepMismatch {
            model: model.step_minutes(),
            controller: cfg.step_minutes,
        });
    }
    let fw = forecast_window(model, state, signals, k, cfg.horizon_steps)?;
    Ok(alpha_star(cfg, &fw))
}
