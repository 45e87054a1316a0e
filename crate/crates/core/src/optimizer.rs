//! Minimization of the first-transfer infidelity over system parameters.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coupling::{build_coupling_matrix, CutoffSpec, EmitterSet};
use crate::dynamics::{
    assemble_hamiltonian, propagate, transfer_record, uniform_grid, PropagateOptions, PropagatorChoice, TransferRecord,
    WaveFunction,
};
use crate::error::{Error, Result};
use crate::geometry::LensGeometry;
use crate::modes::{enumerate_modes, FrequencyWindow};

/// Nelder–Mead settings. Coefficients are the standard ones
/// (reflection 1, expansion 2, contraction ½, shrink ½).
#[derive(Debug, Clone, Copy)]
pub struct NelderMead {
    /// Initial simplex offset as a fraction of each coordinate (absolute
    /// offset `initial_step` when the coordinate is zero).
    pub initial_step: f64,
    /// Stop once every vertex lies within this distance of the best one…
    pub x_tolerance: f64,
    /// …and the objective spread is below this.
    pub f_tolerance: f64,
}

impl Default for NelderMead {
    fn default() -> Self {
        Self {
            initial_step: 0.05,
            x_tolerance: 1e-4,
            f_tolerance: 1e-6,
        }
    }
}

/// One objective evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub parameters: Vec<f64>,
    pub value: f64,
    pub best_so_far: f64,
}

/// Outcome of [`NelderMead::minimize`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimplexResult {
    pub best: Vec<f64>,
    pub best_value: f64,
    pub evaluations: usize,
    pub converged: bool,
    pub budget_exhausted: bool,
    pub trace: Vec<TraceEntry>,
}

// Mirror a coordinate back into [lo, hi], clamping if a single reflection
// is not enough.
fn reflect_into(x: f64, (lo, hi): (f64, f64)) -> f64 {
    let y = if x < lo {
        lo + (lo - x)
    } else if x > hi {
        hi - (x - hi)
    } else {
        x
    };
    y.clamp(lo, hi)
}

struct Evaluator<'a, F> {
    f: &'a F,
    bounds: &'a [(f64, f64)],
    budget: usize,
    trace: Vec<TraceEntry>,
    best: f64,
}

impl<F: Fn(&[f64]) -> f64 + Sync> Evaluator<'_, F> {
    fn remaining(&self) -> usize {
        self.budget - self.trace.len()
    }

    fn project(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(self.bounds).map(|(&v, &b)| reflect_into(v, b)).collect()
    }

    // Evaluates points concurrently; trace order follows input order.
    fn eval_many(&mut self, points: Vec<Vec<f64>>) -> Vec<f64> {
        let f = self.f;
        let values: Vec<f64> = points
            .par_iter()
            .map(|p| {
                let v = f(p);
                if v.is_nan() {
                    f64::INFINITY
                } else {
                    v
                }
            })
            .collect();
        for (p, &v) in points.into_iter().zip(&values) {
            self.best = self.best.min(v);
            self.trace.push(TraceEntry {
                parameters: p,
                value: v,
                best_so_far: self.best,
            });
        }
        values
    }

    fn eval(&mut self, x: Vec<f64>) -> f64 {
        self.eval_many(vec![x])[0]
    }
}

impl NelderMead {
    /// Minimize `f` over the box `bounds` starting from `x0`, using at most
    /// `budget` evaluations. Objective values of NaN count as +∞.
    pub fn minimize<F>(&self, f: &F, x0: &[f64], bounds: &[(f64, f64)], budget: usize) -> Result<SimplexResult>
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        let n = x0.len();
        if n == 0 {
            return Err(Error::invalid("parameters", "nothing to optimize"));
        }
        if bounds.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} bounds for {n} parameters",
                bounds.len()
            )));
        }
        for (i, (&x, &(lo, hi))) in x0.iter().zip(bounds).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::invalid(
                    "bounds",
                    format!("parameter {i}: [{lo}, {hi}] is not a finite interval"),
                ));
            }
            if !(lo..=hi).contains(&x) {
                return Err(Error::invalid(
                    "initial guess",
                    format!("parameter {i} = {x} outside [{lo}, {hi}]"),
                ));
            }
        }
        if budget < n + 1 {
            return Err(Error::invalid(
                "budget",
                format!("{budget} cannot fill a simplex of {} vertices", n + 1),
            ));
        }
        let mut ev = Evaluator {
            f,
            bounds,
            budget,
            trace: Vec::with_capacity(budget),
            best: f64::INFINITY,
        };

        let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
        for i in 0..n {
            let mut v = x0.to_vec();
            let step = if v[i] != 0.0 {
                self.initial_step * v[i]
            } else {
                self.initial_step
            };
            v[i] += step;
            if v[i] > bounds[i].1 {
                v[i] = x0[i] - step;
            }
            simplex.push(ev.project(&v));
        }
        let mut values = ev.eval_many(simplex.clone());
        let mut converged = false;

        loop {
            let mut order: Vec<usize> = (0..=n).collect();
            order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
            simplex = order.iter().map(|&i| simplex[i].clone()).collect();
            values = order.iter().map(|&i| values[i]).collect();

            let spread = values[n] - values[0];
            let diameter = simplex[1..]
                .iter()
                .flat_map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()))
                .fold(0.0, f64::max);
            if spread.abs() <= self.f_tolerance && diameter <= self.x_tolerance {
                converged = true;
                break;
            }
            if ev.remaining() == 0 {
                break;
            }

            let centroid: Vec<f64> = (0..n)
                .map(|j| simplex[..n].iter().map(|v| v[j]).sum::<f64>() / n as f64)
                .collect();
            let along =
                |t: f64| -> Vec<f64> { centroid.iter().zip(&simplex[n]).map(|(c, w)| c + t * (c - w)).collect() };

            let xr = ev.project(&along(1.0));
            let fr = ev.eval(xr.clone());
            if fr < values[0] {
                if ev.remaining() == 0 {
                    simplex[n] = xr;
                    values[n] = fr;
                    continue;
                }
                let xe = ev.project(&along(2.0));
                let fe = ev.eval(xe.clone());
                if fe < fr {
                    simplex[n] = xe;
                    values[n] = fe;
                } else {
                    simplex[n] = xr;
                    values[n] = fr;
                }
                continue;
            }
            if fr < values[n - 1] {
                simplex[n] = xr;
                values[n] = fr;
                continue;
            }
            if ev.remaining() == 0 {
                continue;
            }
            // outside contraction when the reflection beat the worst vertex
            let (xc, fc) = if fr < values[n] {
                let xc = ev.project(&along(0.5));
                let fc = ev.eval(xc.clone());
                (xc, (fc <= fr).then_some(fc))
            } else {
                let xc = ev.project(&along(-0.5));
                let fc = ev.eval(xc.clone());
                (xc, (fc < values[n]).then_some(fc))
            };
            if let Some(fc) = fc {
                simplex[n] = xc;
                values[n] = fc;
                continue;
            }
            let shrink_count = n.min(ev.remaining());
            if shrink_count == 0 {
                continue;
            }
            let shrunk: Vec<Vec<f64>> = simplex[1..=shrink_count]
                .iter()
                .map(|v| v.iter().zip(&simplex[0]).map(|(x, b)| b + 0.5 * (x - b)).collect())
                .collect();
            let fs = ev.eval_many(shrunk.clone());
            for (i, (v, f)) in shrunk.into_iter().zip(fs).enumerate() {
                simplex[i + 1] = v;
                values[i + 1] = f;
            }
        }

        let (best_index, _) = ev
            .trace
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.value.total_cmp(&b.1.value))
            .expect("at least one evaluation");
        let best = ev.trace[best_index].clone();
        Ok(SimplexResult {
            best: best.parameters,
            best_value: best.value,
            evaluations: ev.trace.len(),
            converged,
            budget_exhausted: !converged,
            trace: ev.trace,
        })
    }
}

/// Tunable system parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parameter {
    G,
    OmegaC,
    /// Lens radius in units of λ_a.
    ROverLambdaA,
    /// Emitter radius as a fraction of R.
    RaOverR,
}

impl Parameter {
    pub fn name(self) -> &'static str {
        match self {
            Parameter::G => "g",
            Parameter::OmegaC => "omega_c",
            Parameter::ROverLambdaA => "R_over_lambda_a",
            Parameter::RaOverR => "r_a_over_R",
        }
    }
}

impl std::str::FromStr for Parameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "g" => Parameter::G,
            "omega_c" => Parameter::OmegaC,
            "R_over_lambda_a" | "R" => Parameter::ROverLambdaA,
            "r_a_over_R" | "r_a" => Parameter::RaOverR,
            other => return Err(Error::invalid("parameter", format!("unknown parameter `{other}`"))),
        })
    }
}

/// Two emitters at `(r_a, 0)` and `(r_a, π)`, the left one initially excited.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransferSetup {
    pub g: f64,
    pub omega_c: f64,
    pub r_over_lambda_a: f64,
    pub ra_over_r: f64,
    pub n0: f64,
    pub truncation_sigmas: f64,
    pub drop_sqrt_omega: bool,
}

impl TransferSetup {
    pub fn get(&self, p: Parameter) -> f64 {
        match p {
            Parameter::G => self.g,
            Parameter::OmegaC => self.omega_c,
            Parameter::ROverLambdaA => self.r_over_lambda_a,
            Parameter::RaOverR => self.ra_over_r,
        }
    }

    pub fn set(&mut self, p: Parameter, value: f64) {
        match p {
            Parameter::G => self.g = value,
            Parameter::OmegaC => self.omega_c = value,
            Parameter::ROverLambdaA => self.r_over_lambda_a = value,
            Parameter::RaOverR => self.ra_over_r = value,
        }
    }

    pub fn lens(&self) -> Result<LensGeometry> {
        LensGeometry::from_wavelengths(self.r_over_lambda_a, self.n0)
    }

    pub fn cutoff(&self) -> Result<CutoffSpec> {
        Ok(CutoffSpec::new(self.omega_c, self.truncation_sigmas)?.dropping_sqrt_omega(self.drop_sqrt_omega))
    }

    /// Peak right-emitter population in `[lo·T, hi·T]`, with modes truncated
    /// to `window` (or the cutoff's own window when `None`).
    pub fn transfer(
        &self,
        window: Option<FrequencyWindow>,
        relative_window: (f64, f64),
        dt: f64,
        propagator: PropagatorChoice,
    ) -> Result<TransferRecord> {
        let lens = self.lens()?;
        let mut cutoff = self.cutoff()?;
        if let Some(w) = window {
            cutoff = cutoff.with_window(w);
        }
        let basis = enumerate_modes(&lens, cutoff.window())?;
        let emitters = EmitterSet::opposite_pair(self.ra_over_r * lens.radius(), self.g, &lens)?;
        let cm = build_coupling_matrix(&emitters, &cutoff, &basis)?;
        let h = assemble_hamiltonian(&emitters, &cm, &basis)?;
        let t_arrival = lens.arrival_time();
        let (lo, hi) = (relative_window.0 * t_arrival, relative_window.1 * t_arrival);
        let psi0 = WaveFunction::single_excitation(2, basis.len(), 0)?;
        let times = uniform_grid(hi, dt);
        let result = propagate(
            &h,
            &psi0,
            &times,
            &PropagateOptions::default().with_propagator(propagator),
        )?;
        transfer_record(&result, 1, (lo, hi))
    }
}

/// Free parameters, their bounds and the fixed remainder of the system.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizationProblem {
    pub free: Vec<Parameter>,
    pub bounds: Vec<(f64, f64)>,
    pub base: TransferSetup,
    /// Peak-search window in units of the arrival time `T(R)`.
    pub objective_window: (f64, f64),
    /// Re-enumerate the truncation window from each candidate's `ω_c`
    /// instead of keeping the window of `base`.
    pub retruncate: bool,
    pub dt: f64,
    pub propagator: PropagatorChoice,
}

impl OptimizationProblem {
    pub fn new(free: Vec<Parameter>, bounds: Vec<(f64, f64)>, base: TransferSetup) -> Result<Self> {
        if free.is_empty() {
            return Err(Error::invalid("free parameters", "none given"));
        }
        if free.len() != bounds.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} bounds for {} free parameters",
                bounds.len(),
                free.len()
            )));
        }
        for (p, &(lo, hi)) in free.iter().zip(&bounds) {
            if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo < hi) {
                return Err(Error::invalid(
                    p.name(),
                    format!("bounds [{lo}, {hi}] must be finite, positive and ordered"),
                ));
            }
        }
        Ok(Self {
            free,
            bounds,
            base,
            objective_window: (0.5, 1.5),
            retruncate: false,
            dt: 0.05,
            propagator: PropagatorChoice::Arrowhead,
        })
    }

    /// Truncation window frozen at setup.
    pub fn frozen_window(&self) -> Result<FrequencyWindow> {
        Ok(self.base.cutoff()?.window())
    }

    pub fn setup_at(&self, params: &[f64]) -> Result<TransferSetup> {
        if params.len() != self.free.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} values for {} free parameters",
                params.len(),
                self.free.len()
            )));
        }
        let mut setup = self.base;
        for ((&p, &v), &(lo, hi)) in self.free.iter().zip(params).zip(&self.bounds) {
            if !(lo..=hi).contains(&v) {
                return Err(Error::invalid(p.name(), format!("{v} outside [{lo}, {hi}]")));
            }
            setup.set(p, v);
        }
        Ok(setup)
    }

    /// First-transfer record at `params` (values of `free`, in order).
    pub fn evaluate(&self, params: &[f64]) -> Result<TransferRecord> {
        let setup = self.setup_at(params)?;
        let window = if self.retruncate {
            None
        } else {
            Some(self.frozen_window()?)
        };
        setup.transfer(window, self.objective_window, self.dt, self.propagator)
    }

    /// Infidelity at `params`.
    pub fn objective(&self, params: &[f64]) -> Result<f64> {
        Ok(self.evaluate(params)?.infidelity)
    }

    pub fn initial_guess(&self) -> Vec<f64> {
        self.free.iter().map(|&p| self.base.get(p)).collect()
    }
}

/// Outcome of [`minimize`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizationReport {
    pub free: Vec<Parameter>,
    pub best_parameters: Vec<f64>,
    pub best_infidelity: f64,
    pub evaluation_count: usize,
    pub converged: bool,
    pub budget_exhausted: bool,
    pub trace: Vec<TraceEntry>,
}

/// Nelder–Mead descent on the infidelity; failed simulations count as +∞.
pub fn minimize(problem: &OptimizationProblem, initial_guess: &[f64], budget: usize) -> Result<OptimizationReport> {
    let dim = problem.free.len();
    if budget < 10 * (dim + 1) {
        return Err(Error::invalid(
            "budget",
            format!("{budget} is below 10·(dim + 1) = {}", 10 * (dim + 1)),
        ));
    }
    let f = |x: &[f64]| problem.objective(x).unwrap_or(f64::INFINITY);
    let res = NelderMead::default().minimize(&f, initial_guess, &problem.bounds, budget)?;
    Ok(OptimizationReport {
        free: problem.free.clone(),
        best_parameters: res.best,
        best_infidelity: res.best_value,
        evaluation_count: res.evaluations,
        converged: res.converged,
        budget_exhausted: res.budget_exhausted,
        trace: res.trace,
    })
}
