//! Hyperparameter sweep over horizon, step and ω, with the Pareto front of
//! emissions reduction against comfort deviation.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Execution;
use crate::simulator::{PreparedScenario, ScenarioConfig};

#[derive(Debug, Error, PartialEq)]
pub enum TunerError {
    #[error("invalid sweep spec: {0}")]
    InvalidSpec(String),
    #[error("no cells to compare")]
    Empty,
    #[error("no cell keeps the maximum daily |ΔT| within {0} K")]
    NoFeasibleCell(f64),
}

/// Logarithmically spaced ω values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OmegaGrid {
    pub count: usize,
    pub lo: f64,
    pub hi: f64,
}

impl OmegaGrid {
    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.lo];
        }
        let (a, b) = (self.lo.log10(), self.hi.log10());
        (0..self.count)
            .map(|i| {
                if i + 1 == self.count {
                    self.hi
                } else {
                    10f64.powf(a + (b - a) * i as f64 / (self.count - 1) as f64)
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub horizons_h: Vec<u32>,
    pub steps_min: Vec<u32>,
    pub omegas: OmegaGrid,
    /// Largest admissible daily |ΔT|, K.
    #[serde(default = "default_bound")]
    pub comfort_bound: f64,
}

fn default_bound() -> f64 {
    1.5
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            horizons_h: vec![12, 18, 24, 48],
            steps_min: vec![30, 60, 120, 180, 240],
            omegas: OmegaGrid {
                count: 16,
                lo: 1.0,
                hi: 1e15,
            },
            comfort_bound: default_bound(),
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), TunerError> {
        let bad = |m: &str| Err(TunerError::InvalidSpec(m.into()));
        if self.horizons_h.is_empty() || self.steps_min.is_empty() || self.omegas.count == 0 {
            return bad("horizon, step and ω lists must be non-empty");
        }
        if self.horizons_h.contains(&0) || self.steps_min.contains(&0) {
            return bad("horizons and steps must be positive");
        }
        let OmegaGrid { count, lo, hi } = self.omegas;
        if !(lo > 0.0 && hi.is_finite()) || (count > 1 && lo >= hi) {
            return bad("ω range needs 0 < lo < hi");
        }
        if self.comfort_bound.is_nan() || self.comfort_bound <= 0.0 {
            return bad("comfort bound must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub horizon_h: u32,
    pub step_min: u32,
    pub omega: f64,
    pub emissions_reduction_percent: f64,
    pub avg_daily_saving_g: f64,
    pub avg_daily_delta_t: f64,
    pub max_daily_delta_t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedCell {
    pub horizon_h: u32,
    pub step_min: u32,
    /// `None` when the whole (horizon, step) column was skipped.
    pub omega: Option<f64>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub cells: Vec<SweepCell>,
    pub skipped: Vec<SkippedCell>,
}

struct Task<'a> {
    prepared: &'a PreparedScenario,
    horizon_h: u32,
    step_min: u32,
    omega: f64,
}

/// Simulate every cell. Cells are ordered by horizon, then step, then ω,
/// following the sweep's list order, whatever the execution mode.
pub fn sweep(scenario: &ScenarioConfig, spec: &SweepSpec, exec: Execution) -> Result<SweepOutcome, TunerError> {
    spec.validate()?;
    let omegas = spec.omegas.values();
    let prepared = exec.map(&spec.steps_min, |&ts| scenario.prepare_at(ts));

    let mut skipped = Vec::new();
    let mut tasks = Vec::new();
    for &h in &spec.horizons_h {
        for (&ts, prep) in spec.steps_min.iter().zip(&prepared) {
            if (h * 60) % ts != 0 {
                skipped.push(SkippedCell {
                    horizon_h: h,
                    step_min: ts,
                    omega: None,
                    reason: format!("{h} h is not a whole number of {ts} min steps"),
                });
                continue;
            }
            match prep {
                Ok(p) => tasks.extend(omegas.iter().map(|&omega| Task {
                    prepared: p,
                    horizon_h: h,
                    step_min: ts,
                    omega,
                })),
                Err(e) => skipped.push(SkippedCell {
                    horizon_h: h,
                    step_min: ts,
                    omega: None,
                    reason: e.to_string(),
                }),
            }
        }
    }

    let results = exec.map(&tasks, |t| {
        let m = (t.horizon_h * 60 / t.step_min) as usize;
        t.prepared.run_with(true, t.omega, m)
    });
    let mut cells = Vec::with_capacity(tasks.len());
    for (t, r) in tasks.iter().zip(results) {
        match r {
            Ok(res) => {
                let s = res.summary;
                cells.push(SweepCell {
                    horizon_h: t.horizon_h,
                    step_min: t.step_min,
                    omega: t.omega,
                    emissions_reduction_percent: s.emissions_reduction_percent.unwrap_or(0.0),
                    avg_daily_saving_g: s.avg_daily_saving_g.unwrap_or(0.0),
                    avg_daily_delta_t: s.avg_daily_delta_t.unwrap_or(0.0),
                    max_daily_delta_t: s.max_daily_delta_t.unwrap_or(0.0),
                });
            }
            Err(e) => skipped.push(SkippedCell {
                horizon_h: t.horizon_h,
                step_min: t.step_min,
                omega: Some(t.omega),
                reason: e.to_string(),
            }),
        }
    }
    Ok(SweepOutcome { cells, skipped })
}

fn dominates(a: &SweepCell, b: &SweepCell) -> bool {
    let (ra, rb) = (a.emissions_reduction_percent, b.emissions_reduction_percent);
    let (ta, tb) = (a.max_daily_delta_t, b.max_daily_delta_t);
    ra >= rb && ta <= tb && (ra > rb || ta < tb)
}

/// Deterministic total order: ΔT ascending, reduction descending, then
/// horizon, step and ω.
fn front_order(a: &SweepCell, b: &SweepCell) -> Ordering {
    a.max_daily_delta_t
        .total_cmp(&b.max_daily_delta_t)
        .then(b.emissions_reduction_percent.total_cmp(&a.emissions_reduction_percent))
        .then(a.horizon_h.cmp(&b.horizon_h))
        .then(a.step_min.cmp(&b.step_min))
        .then(a.omega.total_cmp(&b.omega))
}

/// Cells not dominated in (max reduction, min max-daily |ΔT|); equal points
/// are all kept. Sorted by ΔT ascending.
pub fn pareto_front(cells: &[SweepCell]) -> Vec<SweepCell> {
    let mut sorted = cells.to_vec();
    sorted.sort_by(front_order);
    let mut front = Vec::new();
    let mut best: Option<(f64, f64)> = None;
    for c in sorted {
        let r = c.emissions_reduction_percent;
        let dominated = match best {
            Some((best_r, best_t)) => best_r > r || (best_r == r && best_t < c.max_daily_delta_t),
            None => false,
        };
        if !dominated {
            front.push(c);
        }
        if best.is_none_or(|(best_r, _)| r > best_r) {
            best = Some((r, c.max_daily_delta_t));
        }
    }
    front
}

/// Brute-force front for cross-checking.
pub fn pareto_front_naive(cells: &[SweepCell]) -> Vec<SweepCell> {
    let mut front: Vec<SweepCell> = cells
        .iter()
        .filter(|c| !cells.iter().any(|d| dominates(d, c)))
        .copied()
        .collect();
    front.sort_by(front_order);
    front
}

/// Best feasible cell: largest reduction with max daily |ΔT| within
/// `bound`; ties go to smaller ΔT, shorter horizon, longer step, smaller ω.
pub fn select_optimum(cells: &[SweepCell], bound: f64) -> Result<SweepCell, TunerError> {
    if cells.is_empty() {
        return Err(TunerError::Empty);
    }
    cells
        .iter()
        .filter(|c| c.max_daily_delta_t <= bound)
        .min_by(|a, b| {
            b.emissions_reduction_percent
                .total_cmp(&a.emissions_reduction_percent)
                .then(a.max_daily_delta_t.total_cmp(&b.max_daily_delta_t))
                .then(a.horizon_h.cmp(&b.horizon_h))
                .then(b.step_min.cmp(&a.step_min))
                .then(a.omega.total_cmp(&b.omega))
        })
        .copied()
        .ok_or(TunerError::NoFeasibleCell(bound))
}

/// Best feasible ω per (step, horizon) pair, the data behind a
/// step × horizon heatmap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatmapEntry {
    pub step_min: u32,
    pub horizon_h: u32,
    pub best: Option<SweepCell>,
}

pub fn heatmap(cells: &[SweepCell], spec: &SweepSpec) -> Vec<HeatmapEntry> {
    let mut out = Vec::new();
    for &ts in &spec.steps_min {
        for &h in &spec.horizons_h {
            let column: Vec<SweepCell> = cells
                .iter()
                .filter(|c| c.step_min == ts && c.horizon_h == h)
                .copied()
                .collect();
            out.push(HeatmapEntry {
                step_min: ts,
                horizon_h: h,
                best: select_optimum(&column, spec.comfort_bound).ok(),
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cell(red: f64, dt: f64) -> SweepCell {
        SweepCell {
            horizon_h: 24,
            step_min: 60,
            omega: 1e6,
            emissions_reduction_percent: red,
            avg_daily_saving_g: 0.0,
            avg_daily_delta_t: 0.0,
            max_daily_delta_t: dt,
        }
    }

    #[test]
    fn omega_grid() {
        let g = SweepSpec::default().omegas.values();
        assert_eq!(g.len(), 16);
        assert_eq!(g[0], 1.0);
        assert_eq!(g[15], 1e15);
        assert!(g.windows(2).all(|w| (w[1] / w[0] - 10.0).abs() < 1e-9));
        assert_eq!(OmegaGrid { count: 1, lo: 5.0, hi: 5.0 }.values(), vec![5.0]);
    }

    #[test]
    fn spec_validation() {
        assert!(SweepSpec::default().validate().is_ok());
        let mut s = SweepSpec::default();
        s.horizons_h.clear();
        assert!(s.validate().is_err());
        let s = SweepSpec { comfort_bound: 0.0, ..SweepSpec::default() };
        assert!(s.validate().is_err());
        let s = SweepSpec {
            omegas: OmegaGrid { count: 3, lo: 10.0, hi: 1.0 },
            ..SweepSpec::default()
        };
        assert!(s.validate().is_err());
    }

    #[test]
    fn front_examples() {
        assert_eq!(pareto_front(&[cell(10.0, 0.5)]), vec![cell(10.0, 0.5)]);
        let both = pareto_front(&[cell(25.0, 0.9), cell(10.0, 0.5)]);
        assert_eq!(both, vec![cell(10.0, 0.5), cell(25.0, 0.9)]);
        assert_eq!(pareto_front(&[cell(10.0, 0.9), cell(25.0, 0.5)]), vec![cell(25.0, 0.5)]);
        let tie = pareto_front(&[cell(10.0, 0.5), cell(10.0, 0.5)]);
        assert_eq!(tie.len(), 2);
    }

    #[test]
    fn optimum_examples() {
        let table = [cell(9.88, 0.5), cell(25.37, 0.9), cell(31.0, 2.6), cell(20.0, 1.2)];
        assert_eq!(select_optimum(&table, 1.5).unwrap(), cell(25.37, 0.9));
        assert_eq!(select_optimum(&table, 0.0), Err(TunerError::NoFeasibleCell(0.0)));
        assert_eq!(select_optimum(&[cell(1.0, 0.1)], 1.5).unwrap(), cell(1.0, 0.1));
        let a = SweepCell { horizon_h: 12, ..cell(5.0, 0.2) };
        let b = SweepCell { horizon_h: 48, ..cell(5.0, 0.2) };
        assert_eq!(select_optimum(&[b, a], 1.0).unwrap(), a);
        let c = SweepCell { step_min: 240, ..a };
        assert_eq!(select_optimum(&[a, c], 1.0).unwrap(), c);
    }

    fn cells_strategy() -> impl Strategy<Value = Vec<SweepCell>> {
        prop::collection::vec(
            (0u8..12, 0u8..12, prop::sample::select(vec![12u32, 24, 48]), prop::sample::select(vec![30u32, 60, 120])),
            1..50,
        )
        .prop_map(|v| {
            v.into_iter()
                .enumerate()
                .map(|(i, (r, t, h, ts))| SweepCell {
                    horizon_h: h,
                    step_min: ts,
                    omega: 10f64.powi(i as i32 % 16),
                    ..cell(f64::from(r) * 2.5, f64::from(t) * 0.1)
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn front_matches_brute_force(cells in cells_strategy()) {
            prop_assert_eq!(pareto_front(&cells), pareto_front_naive(&cells));
        }

        #[test]
        fn selection_is_permutation_invariant(cells in cells_strategy(), seed in any::<u64>()) {
            let mut shuffled = cells.clone();
            shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(select_optimum(&cells, 0.6), select_optimum(&shuffled, 0.6));
            prop_assert_eq!(pareto_front(&cells), pareto_front(&shuffled));
        }
    }
}
