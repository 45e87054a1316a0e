//! Single-excitation dynamics: effective Hamiltonian, propagation and the
//! transfer figure of merit.
//!
//! The coefficient vector is ordered `(c_1 … c_N, c^ph_1 … c^ph_L)` and obeys
//! `i ċ = 𝓗 c` with
//!
//! ```text
//!       ⎛ ω_a·1_N   α        ⎞
//!   𝓗 = ⎝ α†        diag(ω_l) ⎠ ,     α_{k,l} = −i g_l^(k).
//! ```

mod propagator;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coupling::{CouplingMatrix, EmitterSet};
use crate::ensemble::CollectiveRecord;
use crate::error::{Error, Result};
use crate::geometry::OMEGA_A;
use crate::krylov::HermitianOperator;
use crate::modes::ModeBasis;
use crate::observables::IntensityFrame;

pub use propagator::{propagate, PropagateOptions};

/// Reference frame of the amplitudes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    /// Amplitudes multiplied by `e^{iω_a t}`; only detunings drive phases.
    Rotating,
    Lab,
}

/// Amplitudes of the single-excitation state.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveFunction {
    pub atomic: Vec<C64>,
    pub photonic: Vec<C64>,
    pub time: f64,
    pub frame: Frame,
}

impl WaveFunction {
    /// Emitter `k` excited, field in vacuum.
    pub fn single_excitation(n_atoms: usize, n_modes: usize, k: usize) -> Result<Self> {
        if k >= n_atoms {
            return Err(Error::invalid(
                "atom index",
                format!("{k} out of range for {n_atoms} atoms"),
            ));
        }
        let mut atomic = vec![C64::new(0.0, 0.0); n_atoms];
        atomic[k] = C64::new(1.0, 0.0);
        Ok(Self {
            atomic,
            photonic: vec![C64::new(0.0, 0.0); n_modes],
            time: 0.0,
            frame: Frame::Rotating,
        })
    }

    pub fn from_parts(atomic: Vec<C64>, photonic: Vec<C64>) -> Self {
        Self {
            atomic,
            photonic,
            time: 0.0,
            frame: Frame::Rotating,
        }
    }

    pub(crate) fn from_flat(flat: &[C64], n_atoms: usize, time: f64, frame: Frame) -> Self {
        Self {
            atomic: flat[..n_atoms].to_vec(),
            photonic: flat[n_atoms..].to_vec(),
            time,
            frame,
        }
    }

    pub fn to_flat(&self) -> Vec<C64> {
        self.atomic.iter().chain(&self.photonic).copied().collect()
    }

    pub fn n_atoms(&self) -> usize {
        self.atomic.len()
    }

    pub fn n_modes(&self) -> usize {
        self.photonic.len()
    }

    pub fn atomic_populations(&self) -> Vec<f64> {
        self.atomic.iter().map(|z| z.norm_sqr()).collect()
    }

    pub fn photon_norm(&self) -> f64 {
        self.photonic.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.atomic.iter().map(|z| z.norm_sqr()).sum::<f64>() + self.photon_norm()
    }

    /// Same state expressed in the other frame.
    pub fn in_frame(&self, frame: Frame) -> Self {
        let phase = match (self.frame, frame) {
            (Frame::Rotating, Frame::Lab) => C64::from_polar(1.0, -OMEGA_A * self.time),
            (Frame::Lab, Frame::Rotating) => C64::from_polar(1.0, OMEGA_A * self.time),
            _ => C64::new(1.0, 0.0),
        };
        Self {
            atomic: self.atomic.iter().map(|z| z * phase).collect(),
            photonic: self.photonic.iter().map(|z| z * phase).collect(),
            time: self.time,
            frame,
        }
    }
}

/// Arrowhead Hamiltonian of the single-excitation sector, never stored densely.
#[derive(Debug, Clone)]
pub struct EffectiveHamiltonian {
    atom_diag: Vec<f64>,
    mode_diag: Vec<f64>,
    coupling: CouplingMatrix,
    // energy subtracted in the rotating frame (ω_a, or −ω_a once negated)
    frame_frequency: f64,
}

const PARALLEL_THRESHOLD: usize = 1 << 16;

/// Assemble 𝓗 from the emitters, their coupling block and the mode basis.
pub fn assemble_hamiltonian(
    emitters: &EmitterSet,
    coupling: &CouplingMatrix,
    basis: &ModeBasis,
) -> Result<EffectiveHamiltonian> {
    if coupling.n_atoms() != emitters.len() || coupling.n_modes() != basis.len() {
        return Err(Error::DimensionMismatch(format!(
            "coupling block {}×{} for {} emitters and {} modes",
            coupling.n_atoms(),
            coupling.n_modes(),
            emitters.len(),
            basis.len()
        )));
    }
    Ok(EffectiveHamiltonian {
        atom_diag: vec![OMEGA_A; emitters.len()],
        mode_diag: basis.frequencies().to_vec(),
        coupling: coupling.clone(),
        frame_frequency: OMEGA_A,
    })
}

impl EffectiveHamiltonian {
    /// Hamiltonian from raw parts; atom energies are all ω_a.
    pub fn from_parts(mode_frequencies: Vec<f64>, coupling: CouplingMatrix) -> Result<Self> {
        if coupling.n_modes() != mode_frequencies.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} mode frequencies for {} coupling columns",
                mode_frequencies.len(),
                coupling.n_modes()
            )));
        }
        Ok(Self {
            atom_diag: vec![OMEGA_A; coupling.n_atoms()],
            mode_diag: mode_frequencies,
            coupling,
            frame_frequency: OMEGA_A,
        })
    }

    pub fn n_atoms(&self) -> usize {
        self.atom_diag.len()
    }

    pub fn n_modes(&self) -> usize {
        self.mode_diag.len()
    }

    pub fn dim(&self) -> usize {
        self.n_atoms() + self.n_modes()
    }

    pub fn coupling(&self) -> &CouplingMatrix {
        &self.coupling
    }

    pub fn mode_frequencies(&self) -> &[f64] {
        &self.mode_diag
    }

    /// −𝓗, used for time-reversal checks.
    pub fn negated(&self) -> Self {
        Self {
            atom_diag: self.atom_diag.iter().map(|x| -x).collect(),
            mode_diag: self.mode_diag.iter().map(|x| -x).collect(),
            coupling: self.coupling.scaled(-1.0),
            frame_frequency: -self.frame_frequency,
        }
    }

    pub(crate) fn frame_shift(&self, frame: Frame) -> f64 {
        match frame {
            Frame::Rotating => self.frame_frequency,
            Frame::Lab => 0.0,
        }
    }

    /// Dense (N+L)×(N+L) matrix of 𝓗 − shift.
    pub fn to_dense(&self, frame: Frame) -> DMatrix<C64> {
        let shift = self.frame_shift(frame);
        let n = self.n_atoms();
        let dim = self.dim();
        let mut h = DMatrix::<C64>::zeros(dim, dim);
        for (k, &e) in self.atom_diag.iter().enumerate() {
            h[(k, k)] = C64::new(e - shift, 0.0);
        }
        for (l, &w) in self.mode_diag.iter().enumerate() {
            h[(n + l, n + l)] = C64::new(w - shift, 0.0);
        }
        for k in 0..n {
            for (l, a) in self.coupling.row(k).iter().enumerate() {
                h[(k, n + l)] = *a;
                h[(n + l, k)] = a.conj();
            }
        }
        h
    }

    /// Gershgorin bound on the spectral radius of 𝓗 − shift.
    pub fn spectral_bound(&self, frame: Frame) -> f64 {
        let shift = self.frame_shift(frame);
        let n = self.n_atoms();
        let atom = (0..n)
            .map(|k| (self.atom_diag[k] - shift).abs() + self.coupling.row(k).iter().map(|a| a.norm()).sum::<f64>())
            .fold(0.0, f64::max);
        let mode = (0..self.n_modes())
            .map(|l| (self.mode_diag[l] - shift).abs() + (0..n).map(|k| self.coupling.get(k, l).norm()).sum::<f64>())
            .fold(0.0, f64::max);
        atom.max(mode)
    }

    /// `y ← (𝓗 − shift) x` in O(N·L).
    pub fn apply(&self, frame: Frame, x: &[C64], y: &mut [C64]) {
        let shift = self.frame_shift(frame);
        let n = self.n_atoms();
        let (x_atoms, x_modes) = x.split_at(n);
        let (y_atoms, y_modes) = y.split_at_mut(n);
        let parallel = n * self.n_modes() >= PARALLEL_THRESHOLD;
        let atom_row = |k: usize| -> C64 {
            let coupled: C64 = self.coupling.row(k).iter().zip(x_modes).map(|(a, c)| a * c).sum();
            (self.atom_diag[k] - shift) * x_atoms[k] + coupled
        };
        let mode_row = |l: usize| -> C64 {
            let coupled: C64 = (0..n).map(|k| self.coupling.get(k, l).conj() * x_atoms[k]).sum();
            (self.mode_diag[l] - shift) * x_modes[l] + coupled
        };
        if parallel {
            y_atoms.par_iter_mut().enumerate().for_each(|(k, y)| *y = atom_row(k));
            y_modes.par_iter_mut().enumerate().for_each(|(l, y)| *y = mode_row(l));
        } else {
            y_atoms.iter_mut().enumerate().for_each(|(k, y)| *y = atom_row(k));
            y_modes.iter_mut().enumerate().for_each(|(l, y)| *y = mode_row(l));
        }
    }

    /// Lab-frame energy ⟨c|𝓗|c⟩ of amplitudes given in `frame`.
    pub fn energy(&self, frame: Frame, x: &[C64]) -> f64 {
        let mut y = vec![C64::new(0.0, 0.0); x.len()];
        self.apply(frame, x, &mut y);
        let norm: f64 = x.iter().map(|z| z.norm_sqr()).sum();
        crate::krylov::dot(x, &y).re + self.frame_shift(frame) * norm
    }

    pub(crate) fn in_frame(&self, frame: Frame) -> FramedHamiltonian<'_> {
        FramedHamiltonian { h: self, frame }
    }
}

pub(crate) struct FramedHamiltonian<'a> {
    h: &'a EffectiveHamiltonian,
    frame: Frame,
}

impl HermitianOperator for FramedHamiltonian<'_> {
    fn dim(&self) -> usize {
        self.h.dim()
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        self.h.apply(self.frame, x, y);
    }
}

/// Choice of time stepper.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropagatorChoice {
    /// Full eigendecomposition of the dense matrix.
    Dense,
    /// Fixed-step classical Runge–Kutta on the arrowhead matvec.
    Rk4,
    /// Lanczos exponential on the arrowhead matvec.
    Arrowhead,
}

/// Sampled observables of one propagation run.
#[derive(Debug, Clone)]
pub struct SimulationResult {
    pub times: Vec<f64>,
    /// `atom_populations[k][i] = |c_k(t_i)|²`.
    pub atom_populations: Vec<Vec<f64>>,
    pub photon_norm: Vec<f64>,
    pub norm: Vec<f64>,
    /// Lab-frame ⟨c|𝓗|c⟩.
    pub energy: Vec<f64>,
    pub collective: Option<CollectiveRecord>,
    /// Full states at the requested snapshot times.
    pub snapshots: Vec<WaveFunction>,
    pub frames: Vec<IntensityFrame>,
    pub final_state: WaveFunction,
}

impl SimulationResult {
    pub fn n_atoms(&self) -> usize {
        self.atom_populations.len()
    }

    /// max |‖c‖ − 1| over the samples.
    pub fn norm_drift(&self) -> f64 {
        self.norm.iter().map(|n| (n - 1.0).abs()).fold(0.0, f64::max)
    }

    /// max |E(t) − E(0)| / |E(0)|.
    pub fn energy_drift(&self) -> f64 {
        let e0 = self.energy.first().copied().unwrap_or(0.0);
        let scale = if e0.abs() > 0.0 { e0.abs() } else { 1.0 };
        self.energy.iter().map(|e| (e - e0).abs() / scale).fold(0.0, f64::max)
    }
}

/// Peak population of the receiving emitter within a time window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransferRecord {
    pub t_peak: f64,
    pub p_peak: f64,
    pub infidelity: f64,
}

/// Peak of `|c_target|²` over samples in `[t_lo, t_hi]`, first sample on ties.
pub fn transfer_record(result: &SimulationResult, target: usize, window: (f64, f64)) -> Result<TransferRecord> {
    let series = result
        .atom_populations
        .get(target)
        .ok_or_else(|| Error::invalid("target atom", format!("{target} out of range")))?;
    peak_in_window(&result.times, series, window)
}

/// Same figure of merit for an arbitrary population series.
pub fn peak_in_window(times: &[f64], series: &[f64], (lo, hi): (f64, f64)) -> Result<TransferRecord> {
    let mut best: Option<(f64, f64)> = None;
    for (&t, &p) in times.iter().zip(series) {
        if t < lo || t > hi {
            continue;
        }
        if best.is_none_or(|(_, bp)| p > bp) {
            best = Some((t, p));
        }
    }
    let (t_peak, p_peak) = best.ok_or(Error::EmptyWindow { lo, hi })?;
    Ok(TransferRecord {
        t_peak,
        p_peak,
        infidelity: 1.0 - p_peak,
    })
}

/// Uniform sample grid `0, dt, 2dt, …` up to and including `t_max`.
pub fn uniform_grid(t_max: f64, dt: f64) -> Vec<f64> {
    let n = (t_max / dt + 1e-9).floor() as usize;
    (0..=n).map(|i| i as f64 * dt).collect()
}
