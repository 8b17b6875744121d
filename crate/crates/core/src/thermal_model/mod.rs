//! Discrete-time linear surrogate mapping setpoint, occupancy and outdoor
//! temperature to heating or cooling power.
//!
//! Inputs are ordered `(T_ref [°C], n_occ [persons], T_ext [°C])`; the
//! output is power in kW. Orders up to three are supported and the state is
//! kept in a fixed-size array so the simulation loops do not allocate.

mod identify;
mod metrics;

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::season::Mode;
use crate::timeseries::{TimeSeries, Unit};

pub use identify::{identify, IdentificationData, FitReport, POLE_RADIUS_LIMIT};
pub use metrics::{nmae, r_squared, MetricError};

pub const MAX_ORDER: usize = 3;
pub const N_INPUTS: usize = 3;

/// Surrogate state, zero-padded beyond the model order.
pub type State = [f64; MAX_ORDER];
/// One input sample `(T_ref, n_occ, T_ext)`.
pub type Input = [f64; N_INPUTS];

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("model order must be 1, 2 or 3 (got {0})")]
    BadOrder(usize),
    #[error("matrix `{name}` has {found} entries, expected {expected}")]
    DimensionMismatch {
        name: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("model is unstable: spectral radius {0} >= 1")]
    Unstable(f64),
    #[error("non-finite model coefficient")]
    NonFinite,
    #[error("input step {found} min does not match model step {expected} min")]
    StepMismatch { expected: u32, found: u32 },
    #[error("input series lengths differ")]
    LengthMismatch,
    #[error("input `{name}` has unit {found}, expected {expected}")]
    UnitMismatch {
        name: &'static str,
        expected: Unit,
        found: Unit,
    },
    #[error("regressor matrix is rank deficient (condition {0:e})")]
    RankDeficient(f64),
    #[error("need at least {needed} samples, got {found}")]
    InsufficientData { needed: usize, found: usize },
    #[error("split fraction {0} outside (0.5, 0.95)")]
    InvalidSplit(f64),
    #[error("cannot change step from {from} to {to} min: only integer multiples are supported")]
    NonIntegerStep { from: u32, to: u32 },
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("model file: {0}")]
    Parse(String),
    #[error("training data: {0}")]
    Data(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// `x(k+1) = A x(k) + B u(k)`, `P(k) = C x(k) + D u(k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelFile", into = "ModelFile")]
pub struct StateSpaceModel {
    order: usize,
    a: [[f64; MAX_ORDER]; MAX_ORDER],
    b: [[f64; N_INPUTS]; MAX_ORDER],
    c: [f64; MAX_ORDER],
    d: [f64; N_INPUTS],
    step_minutes: u32,
    mode: Mode,
}

/// On-disk form: row-major matrices.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModelFile {
    order: usize,
    step_minutes: u32,
    mode: Mode,
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    d: Vec<f64>,
}

impl TryFrom<ModelFile> for StateSpaceModel {
    type Error = ModelError;

    fn try_from(f: ModelFile) -> Result<Self, Self::Error> {
        StateSpaceModel::new(f.order, &f.a, &f.b, &f.c, &f.d, f.step_minutes, f.mode)
    }
}

impl From<StateSpaceModel> for ModelFile {
    fn from(m: StateSpaceModel) -> Self {
        let n = m.order;
        ModelFile {
            order: n,
            step_minutes: m.step_minutes,
            mode: m.mode,
            a: (0..n).flat_map(|i| m.a[i][..n].to_vec()).collect(),
            b: (0..n).flat_map(|i| m.b[i].to_vec()).collect(),
            c: m.c[..n].to_vec(),
            d: m.d.to_vec(),
        }
    }
}

fn check_len(name: &'static str, v: &[f64], expected: usize) -> Result<(), ModelError> {
    if v.len() != expected {
        return Err(ModelError::DimensionMismatch {
            name,
            expected,
            found: v.len(),
        });
    }
    Ok(())
}

impl StateSpaceModel {
    /// Build from row-major `A` (n×n), `B` (n×3), `C` (1×n), `D` (1×3).
    /// Rejects models whose spectral radius is not below one.
    pub fn new(
        order: usize,
        a: &[f64],
        b: &[f64],
        c: &[f64],
        d: &[f64],
        step_minutes: u32,
        mode: Mode,
    ) -> Result<Self, ModelError> {
        if !(1..=MAX_ORDER).contains(&order) {
            return Err(ModelError::BadOrder(order));
        }
        if step_minutes == 0 {
            return Err(ModelError::StepMismatch {
                expected: 1,
                found: 0,
            });
        }
        check_len("A", a, order * order)?;
        check_len("B", b, order * N_INPUTS)?;
        check_len("C", c, order)?;
        check_len("D", d, N_INPUTS)?;
        if a.iter().chain(b).chain(c).chain(d).any(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite);
        }
        let mut model = Self {
            order,
            a: [[0.0; MAX_ORDER]; MAX_ORDER],
            b: [[0.0; N_INPUTS]; MAX_ORDER],
            c: [0.0; MAX_ORDER],
            d: [0.0; N_INPUTS],
            step_minutes,
            mode,
        };
        for i in 0..order {
            model.a[i][..order].copy_from_slice(&a[i * order..(i + 1) * order]);
            model.b[i].copy_from_slice(&b[i * N_INPUTS..(i + 1) * N_INPUTS]);
            model.c[i] = c[i];
        }
        model.d.copy_from_slice(d);
        let radius = model.spectral_radius();
        if radius >= 1.0 {
            return Err(ModelError::Unstable(radius));
        }
        Ok(model)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn step_minutes(&self) -> u32 {
        self.step_minutes
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn feedthrough(&self) -> Input {
        self.d
    }

    fn a_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.order, self.order, |i, j| self.a[i][j])
    }

    fn b_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.order, N_INPUTS, |i, j| self.b[i][j])
    }

    pub fn spectral_radius(&self) -> f64 {
        self.a_matrix()
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// Raw (unclipped) output for the current state.
    #[inline]
    pub fn output(&self, x: &State, u: &Input) -> f64 {
        let mut y = 0.0;
        for i in 0..self.order {
            y += self.c[i] * x[i];
        }
        for j in 0..N_INPUTS {
            y += self.d[j] * u[j];
        }
        y
    }

    /// Advance one step and return the raw output at the current step.
    #[inline]
    pub fn step(&self, x: &mut State, u: &Input) -> f64 {
        let y = self.output(x, u);
        let mut next = [0.0; MAX_ORDER];
        for (i, slot) in next.iter_mut().enumerate().take(self.order) {
            let mut acc = 0.0;
            for j in 0..self.order {
                acc += self.a[i][j] * x[j];
            }
            for j in 0..N_INPUTS {
                acc += self.b[i][j] * u[j];
            }
            *slot = acc;
        }
        *x = next;
        y
    }

    /// Unclipped free run from `x0`.
    pub fn simulate_raw(&self, inputs: &[Input], x0: State) -> Vec<f64> {
        let mut x = x0;
        inputs.iter().map(|u| self.step(&mut x, u)).collect()
    }

    /// Power demand in kW, clipped at zero, for aligned input series.
    pub fn simulate(&self, inputs: &ModelInputs, x0: State) -> Result<TimeSeries, ModelError> {
        let rows = inputs.rows(self.step_minutes)?;
        let power = self
            .simulate_raw(&rows, x0)
            .into_iter()
            .map(|p| p.max(0.0))
            .collect();
        TimeSeries::new(inputs.t_ref.start(), self.step_minutes, power, Unit::Kilowatt)
            .map_err(|e| ModelError::Data(e.to_string()))
    }

    /// Equilibrium state for a constant input: `(I − A) x = B u`.
    pub fn steady_state(&self, u: &Input) -> State {
        let n = self.order;
        let lhs = DMatrix::<f64>::identity(n, n) - self.a_matrix();
        let rhs = self.b_matrix() * DVector::from_column_slice(u);
        // ρ(A) < 1 keeps I − A invertible.
        let sol = lhs.lu().solve(&rhs).unwrap_or_else(|| DVector::zeros(n));
        let mut x = [0.0; MAX_ORDER];
        x[..n].copy_from_slice(sol.as_slice());
        x
    }

    /// Steady-state power gain of each input, kW per unit input.
    pub fn dc_gain(&self) -> Input {
        let mut gains = [0.0; N_INPUTS];
        for (j, g) in gains.iter_mut().enumerate() {
            let mut u = [0.0; N_INPUTS];
            u[j] = 1.0;
            let x = self.steady_state(&u);
            *g = self.output(&x, &u);
        }
        gains
    }

    /// Equivalent model at `new_step_minutes`, an integer multiple of the
    /// current step, with inputs held over each coarse step and the output
    /// averaged over it.
    pub fn rediscretize(&self, new_step_minutes: u32) -> Result<StateSpaceModel, ModelError> {
        if new_step_minutes == self.step_minutes {
            return Ok(self.clone());
        }
        if new_step_minutes == 0 || !new_step_minutes.is_multiple_of(self.step_minutes) {
            return Err(ModelError::NonIntegerStep {
                from: self.step_minutes,
                to: new_step_minutes,
            });
        }
        let f = (new_step_minutes / self.step_minutes) as usize;
        let n = self.order;
        let a = self.a_matrix();
        let b = self.b_matrix();
        let c = DMatrix::from_fn(1, n, |_, j| self.c[j]);

        // powers[j] = A^j, partial[j] = Σ_{i<j} A^i
        let mut power = DMatrix::<f64>::identity(n, n);
        let mut partial = DMatrix::<f64>::zeros(n, n);
        let mut partial_sum = DMatrix::<f64>::zeros(n, n);
        for _ in 0..f {
            partial_sum += &partial;
            partial += &power;
            power = &a * &power;
        }
        let a_new = power;
        let b_new = &partial * &b;
        let c_new = &c * &partial / f as f64;
        let d_extra = &c * &partial_sum * &b / f as f64;

        let a_flat: Vec<f64> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| a_new[(i, j)]).collect();
        let b_flat: Vec<f64> = (0..n)
            .flat_map(|i| (0..N_INPUTS).map(move |j| (i, j)))
            .map(|(i, j)| b_new[(i, j)])
            .collect();
        let c_flat: Vec<f64> = (0..n).map(|j| c_new[(0, j)]).collect();
        let d_flat: Vec<f64> = (0..N_INPUTS).map(|j| self.d[j] + d_extra[(0, j)]).collect();
        StateSpaceModel::new(n, &a_flat, &b_flat, &c_flat, &d_flat, new_step_minutes, self.mode)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        serde_json::from_str(text).map_err(|e| ModelError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        std::fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }
}

/// Three aligned input series for [`StateSpaceModel::simulate`].
#[derive(Debug, Clone)]
pub struct ModelInputs {
    pub t_ref: TimeSeries,
    pub n_occ: TimeSeries,
    pub t_ext: TimeSeries,
}

impl ModelInputs {
    fn rows(&self, model_step: u32) -> Result<Vec<Input>, ModelError> {
        for (name, s, unit) in [
            ("t_ref", &self.t_ref, Unit::Celsius),
            ("n_occ", &self.n_occ, Unit::Persons),
            ("t_ext", &self.t_ext, Unit::Celsius),
        ] {
            if s.step_minutes() != model_step {
                return Err(ModelError::StepMismatch {
                    expected: model_step,
                    found: s.step_minutes(),
                });
            }
            if s.unit() != unit {
                return Err(ModelError::UnitMismatch {
                    name,
                    expected: unit,
                    found: s.unit(),
                });
            }
        }
        if self.t_ref.len() != self.n_occ.len() || self.t_ref.len() != self.t_ext.len() {
            return Err(ModelError::LengthMismatch);
        }
        Ok((0..self.t_ref.len())
            .map(|k| {
                [
                    self.t_ref.values()[k],
                    self.n_occ.values()[k],
                    self.t_ext.values()[k],
                ]
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{TimeZone, Utc};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn t0() -> chrono::DateTime<Utc> {
        Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap()
    }

    fn inputs(t_ref: Vec<f64>, n_occ: Vec<f64>, t_ext: Vec<f64>, step: u32) -> ModelInputs {
        ModelInputs {
            t_ref: TimeSeries::new(t0(), step, t_ref, Unit::Celsius).unwrap(),
            n_occ: TimeSeries::new(t0(), step, n_occ, Unit::Persons).unwrap(),
            t_ext: TimeSeries::new(t0(), step, t_ext, Unit::Celsius).unwrap(),
        }
    }

    fn random_model(rng: &mut ChaCha8Rng) -> StateSpaceModel {
        loop {
            let a: Vec<f64> = (0..4).map(|_| rng.random_range(-0.7..0.7)).collect();
            let b: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
            let c: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
            let d: Vec<f64> = (0..3).map(|_| rng.random_range(-0.5..0.5)).collect();
            if let Ok(m) = StateSpaceModel::new(2, &a, &b, &c, &d, 30, Mode::Heating) {
                return m;
            }
        }
    }

    #[test]
    fn pure_feedthrough() {
        let m = StateSpaceModel::new(1, &[0.0], &[0.0; 3], &[0.0], &[1.0, 0.0, 0.0], 60, Mode::Heating)
            .unwrap();
        let p = m
            .simulate(&inputs(vec![20.0; 5], vec![0.0; 5], vec![3.0; 5], 60), [0.0; 3])
            .unwrap();
        assert_eq!(p.values(), &[20.0; 5]);
        assert_eq!(p.unit(), Unit::Kilowatt);
    }

    #[test]
    fn zero_input_zero_state_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = random_model(&mut rng);
        let p = m
            .simulate(&inputs(vec![0.0; 8], vec![0.0; 8], vec![0.0; 8], 30), [0.0; 3])
            .unwrap();
        assert!(p.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn output_clipped_at_zero() {
        let m = StateSpaceModel::new(1, &[0.0], &[0.0; 3], &[0.0], &[0.0, 0.0, -1.0], 60, Mode::Cooling)
            .unwrap();
        let p = m
            .simulate(&inputs(vec![0.0; 2], vec![0.0; 2], vec![5.0, -5.0], 60), [0.0; 3])
            .unwrap();
        assert_eq!(p.values(), &[0.0, 5.0]);
    }

    #[test]
    fn matches_naive_recursion() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let m = random_model(&mut rng);
            let file: ModelFile = m.clone().into();
            let (a, b, c, d) = (&file.a, &file.b, &file.c, &file.d);
            let u: Vec<Input> = (0..200)
                .map(|_| [rng.random_range(15.0..25.0), rng.random_range(0.0..4.0), rng.random_range(-5.0..35.0)])
                .collect();
            // independent recursion on the flat row-major representation
            let mut x = vec![0.3, -0.2];
            let mut expected = Vec::new();
            for uk in &u {
                let y = c[0] * x[0] + c[1] * x[1] + (0..3).map(|j| d[j] * uk[j]).sum::<f64>();
                expected.push(y);
                let nx: Vec<f64> = (0..2)
                    .map(|i| {
                        a[i * 2] * x[0] + a[i * 2 + 1] * x[1] + (0..3).map(|j| b[i * 3 + j] * uk[j]).sum::<f64>()
                    })
                    .collect();
                x = nx;
            }
            let got = m.simulate_raw(&u, [0.3, -0.2, 0.0]);
            for (g, e) in got.iter().zip(&expected) {
                assert!((g - e).abs() <= 1e-12 * e.abs().max(1.0));
            }
        }
    }

    #[test]
    fn raw_simulation_is_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = random_model(&mut rng);
        let u1: Vec<Input> = (0..50).map(|_| [rng.random(), rng.random(), rng.random()]).collect();
        let u2: Vec<Input> = (0..50).map(|_| [rng.random(), rng.random(), rng.random()]).collect();
        let sum: Vec<Input> = u1
            .iter()
            .zip(&u2)
            .map(|(a, b)| [a[0] + b[0], a[1] + b[1], a[2] + b[2]])
            .collect();
        let y1 = m.simulate_raw(&u1, [0.0; 3]);
        let y2 = m.simulate_raw(&u2, [0.0; 3]);
        let y = m.simulate_raw(&sum, [0.0; 3]);
        for k in 0..50 {
            assert!((y[k] - y1[k] - y2[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_models_and_inputs() {
        assert!(matches!(
            StateSpaceModel::new(1, &[1.01], &[0.0; 3], &[1.0], &[0.0; 3], 60, Mode::Heating),
            Err(ModelError::Unstable(_))
        ));
        assert!(matches!(
            StateSpaceModel::new(2, &[0.1], &[0.0; 6], &[1.0, 0.0], &[0.0; 3], 60, Mode::Heating),
            Err(ModelError::DimensionMismatch { name: "A", .. })
        ));
        assert!(matches!(
            StateSpaceModel::new(4, &[0.0; 16], &[0.0; 12], &[0.0; 4], &[0.0; 3], 60, Mode::Heating),
            Err(ModelError::BadOrder(4))
        ));
        let m = StateSpaceModel::new(1, &[0.5], &[1.0, 0.0, 0.0], &[1.0], &[0.0; 3], 60, Mode::Heating)
            .unwrap();
        assert!(matches!(
            m.simulate(&inputs(vec![1.0; 3], vec![0.0; 3], vec![0.0; 3], 30), [0.0; 3]),
            Err(ModelError::StepMismatch { .. })
        ));
        assert!(matches!(
            m.simulate(&inputs(vec![1.0; 3], vec![0.0; 2], vec![0.0; 3], 60), [0.0; 3]),
            Err(ModelError::LengthMismatch)
        ));
    }

    #[test]
    fn steady_state_is_a_fixed_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = random_model(&mut rng);
        let u = [20.0, 2.0, 5.0];
        let x = m.steady_state(&u);
        let mut next = x;
        let y0 = m.step(&mut next, &u);
        for i in 0..2 {
            assert!((next[i] - x[i]).abs() < 1e-12);
        }
        let gain = m.dc_gain();
        let expected: f64 = (0..3).map(|j| gain[j] * u[j]).sum();
        assert!((y0 - expected).abs() < 1e-10);
    }

    #[test]
    fn rediscretized_model_averages_fine_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let fine = random_model(&mut rng);
        for factor in [1u32, 2, 4, 8] {
            let coarse = fine.rediscretize(30 * factor).unwrap();
            assert_eq!(coarse.step_minutes(), 30 * factor);
            let u_coarse: Vec<Input> = (0..30).map(|_| [rng.random(), rng.random(), rng.random()]).collect();
            let u_fine: Vec<Input> = u_coarse
                .iter()
                .flat_map(|u| std::iter::repeat_n(*u, factor as usize))
                .collect();
            let x0 = [0.4, -0.1, 0.0];
            let y_fine = fine.simulate_raw(&u_fine, x0);
            let y_coarse = coarse.simulate_raw(&u_coarse, x0);
            for (k, y) in y_coarse.iter().enumerate() {
                let block = &y_fine[k * factor as usize..(k + 1) * factor as usize];
                let avg = block.iter().sum::<f64>() / factor as f64;
                assert!((y - avg).abs() < 1e-12, "factor {factor} step {k}: {y} vs {avg}");
            }
            // same equilibrium gain
            let (g1, g2) = (fine.dc_gain(), coarse.dc_gain());
            for j in 0..3 {
                assert!((g1[j] - g2[j]).abs() < 1e-9);
            }
        }
        assert!(matches!(fine.rediscretize(45), Err(ModelError::NonIntegerStep { .. })));
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let m = random_model(&mut rng);
            let back = StateSpaceModel::from_json(&m.to_json()).unwrap();
            assert_eq!(back, m);
        }
        let unstable = r#"{"order":1,"step_minutes":60,"mode":"heating","a":[1.5],"b":[0,0,0],"c":[1],"d":[0,0,0]}"#;
        assert!(StateSpaceModel::from_json(unstable).is_err());
    }
}
