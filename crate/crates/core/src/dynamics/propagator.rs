use nalgebra::{DVector, SymmetricEigen};
use num_complex::Complex64 as C64;

use super::{EffectiveHamiltonian, Frame, PropagatorChoice, SimulationResult, WaveFunction};
use crate::error::{Error, Result};
use crate::krylov::{norm, HermitianOperator, Krylov};

/// Settings for [`propagate`].
#[derive(Debug, Clone)]
pub struct PropagateOptions {
    pub propagator: PropagatorChoice,
    pub frame: Frame,
    /// Largest tolerated |‖c‖² − 1| before the run is aborted.
    pub norm_tolerance: f64,
    /// Times at which full states are kept.
    pub snapshot_times: Vec<f64>,
    /// RK4 step as a fraction of 1/ρ(𝓗).
    pub rk4_step_factor: f64,
    pub krylov: Krylov,
}

impl Default for PropagateOptions {
    fn default() -> Self {
        Self {
            propagator: PropagatorChoice::Arrowhead,
            frame: Frame::Rotating,
            norm_tolerance: 1e-8,
            snapshot_times: Vec::new(),
            rk4_step_factor: 0.01,
            krylov: Krylov::default(),
        }
    }
}

impl PropagateOptions {
    pub fn with_propagator(mut self, propagator: PropagatorChoice) -> Self {
        self.propagator = propagator;
        self
    }

    pub fn with_frame(mut self, frame: Frame) -> Self {
        self.frame = frame;
        self
    }

    pub fn with_snapshots(mut self, times: Vec<f64>) -> Self {
        self.snapshot_times = times;
        self
    }
}

enum Stepper<'a> {
    Dense {
        eigenvalues: Vec<f64>,
        eigenvectors: nalgebra::DMatrix<C64>,
        // V† c(t0)
        projected: DVector<C64>,
        t0: f64,
    },
    Rk4 {
        op: super::FramedHamiltonian<'a>,
        max_step: f64,
        buffers: [Vec<C64>; 4],
        scratch: Vec<C64>,
    },
    Krylov {
        op: super::FramedHamiltonian<'a>,
        krylov: Krylov,
    },
}

impl Stepper<'_> {
    // Advance `state` from `from` to `to`.
    fn advance(&mut self, state: &mut [C64], from: f64, to: f64) -> Result<()> {
        let dt = to - from;
        match self {
            Stepper::Dense {
                eigenvalues,
                eigenvectors,
                projected,
                t0,
            } => {
                let tau = to - *t0;
                let phased = DVector::from_iterator(
                    projected.len(),
                    projected
                        .iter()
                        .zip(eigenvalues.iter())
                        .map(|(c, e)| c * C64::from_polar(1.0, -e * tau)),
                );
                let out = &*eigenvectors * phased;
                state.copy_from_slice(out.as_slice());
                Ok(())
            }
            Stepper::Rk4 {
                op,
                max_step,
                buffers,
                scratch,
            } => {
                if dt == 0.0 {
                    return Ok(());
                }
                let steps = (dt.abs() / *max_step).ceil().max(1.0) as usize;
                let h = dt / steps as f64;
                for _ in 0..steps {
                    rk4_step(op, state, h, buffers, scratch);
                }
                Ok(())
            }
            Stepper::Krylov { op, krylov } => krylov.evolve(op, state, dt),
        }
    }
}

// y' = −i H y, one classical RK4 step.
fn rk4_step<H: HermitianOperator>(op: &H, y: &mut [C64], h: f64, k: &mut [Vec<C64>; 4], tmp: &mut Vec<C64>) {
    let minus_i = C64::new(0.0, -1.0);
    let [k1, k2, k3, k4] = k;
    op.apply(y, k1);
    k1.iter_mut().for_each(|z| *z *= minus_i);
    for ((t, a), b) in tmp.iter_mut().zip(y.iter()).zip(k1.iter()) {
        *t = a + b * (0.5 * h);
    }
    op.apply(tmp, k2);
    k2.iter_mut().for_each(|z| *z *= minus_i);
    for ((t, a), b) in tmp.iter_mut().zip(y.iter()).zip(k2.iter()) {
        *t = a + b * (0.5 * h);
    }
    op.apply(tmp, k3);
    k3.iter_mut().for_each(|z| *z *= minus_i);
    for ((t, a), b) in tmp.iter_mut().zip(y.iter()).zip(k3.iter()) {
        *t = a + b * h;
    }
    op.apply(tmp, k4);
    k4.iter_mut().for_each(|z| *z *= minus_i);
    for (i, yi) in y.iter_mut().enumerate() {
        *yi += (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) * (h / 6.0);
    }
}

/// Integrate `i ċ = 𝓗 c` from `psi0` and sample observables at `times`.
///
/// `times` must be non-decreasing and start no earlier than `psi0.time`.
pub fn propagate(
    h: &EffectiveHamiltonian,
    psi0: &WaveFunction,
    times: &[f64],
    options: &PropagateOptions,
) -> Result<SimulationResult> {
    if psi0.n_atoms() != h.n_atoms() || psi0.n_modes() != h.n_modes() {
        return Err(Error::DimensionMismatch(format!(
            "state with {} atoms and {} modes for a Hamiltonian with {} and {}",
            psi0.n_atoms(),
            psi0.n_modes(),
            h.n_atoms(),
            h.n_modes()
        )));
    }
    if times.is_empty() {
        return Err(Error::invalid("times", "no sample times"));
    }
    if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid(
            "times",
            "sample times must be finite and non-decreasing",
        ));
    }
    if times[0] < psi0.time {
        return Err(Error::invalid("times", "first sample precedes the initial state"));
    }
    let initial_norm = psi0.norm_sqr();
    if (initial_norm - 1.0).abs() > 1e-10 {
        return Err(Error::invalid(
            "initial state",
            format!("norm² = {initial_norm}, expected 1"),
        ));
    }
    if options.norm_tolerance <= 0.0 {
        return Err(Error::invalid("norm tolerance", "must be positive"));
    }

    let frame = options.frame;
    let start = psi0.in_frame(frame);
    let mut state = start.to_flat();
    let mut stepper = build_stepper(h, &state, psi0.time, options)?;

    // Merge sample and snapshot times into one stepping schedule.
    let mut snapshots_sorted: Vec<(f64, usize)> = options
        .snapshot_times
        .iter()
        .copied()
        .enumerate()
        .map(|(i, t)| (t, i))
        .collect();
    snapshots_sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    if let Some(&(t, _)) = snapshots_sorted.first() {
        if t < psi0.time {
            return Err(Error::invalid("snapshot times", "snapshot precedes the initial state"));
        }
    }

    let n_atoms = h.n_atoms();
    let mut result = SimulationResult {
        times: times.to_vec(),
        atom_populations: vec![Vec::with_capacity(times.len()); n_atoms],
        photon_norm: Vec::with_capacity(times.len()),
        norm: Vec::with_capacity(times.len()),
        energy: Vec::with_capacity(times.len()),
        collective: None,
        snapshots: vec![start.clone(); snapshots_sorted.len()],
        frames: Vec::new(),
        final_state: start.clone(),
    };

    let mut now = psi0.time;
    let mut snap_iter = snapshots_sorted.iter().peekable();
    for &t in times {
        while let Some(&&(ts, slot)) = snap_iter.peek() {
            if ts > t {
                break;
            }
            stepper.advance(&mut state, now, ts)?;
            now = ts;
            result.snapshots[slot] = WaveFunction::from_flat(&state, n_atoms, ts, frame);
            snap_iter.next();
        }
        stepper.advance(&mut state, now, t)?;
        now = t;
        record(h, frame, &state, t, options.norm_tolerance, &mut result)?;
    }
    for &(ts, slot) in snap_iter {
        stepper.advance(&mut state, now, ts)?;
        now = ts;
        result.snapshots[slot] = WaveFunction::from_flat(&state, n_atoms, ts, frame);
    }
    result.final_state = WaveFunction::from_flat(&state, n_atoms, now, frame);
    Ok(result)
}

fn build_stepper<'a>(
    h: &'a EffectiveHamiltonian,
    state: &[C64],
    t0: f64,
    options: &PropagateOptions,
) -> Result<Stepper<'a>> {
    let frame = options.frame;
    Ok(match options.propagator {
        PropagatorChoice::Dense => {
            let eig = SymmetricEigen::new(h.to_dense(frame));
            let projected = eig.eigenvectors.adjoint() * DVector::from_column_slice(state);
            Stepper::Dense {
                eigenvalues: eig.eigenvalues.iter().copied().collect(),
                eigenvectors: eig.eigenvectors,
                projected,
                t0,
            }
        }
        PropagatorChoice::Rk4 => {
            if options.rk4_step_factor <= 0.0 {
                return Err(Error::invalid("rk4 step factor", "must be positive"));
            }
            let bound = h.spectral_bound(frame).max(f64::MIN_POSITIVE);
            let dim = h.dim();
            Stepper::Rk4 {
                op: h.in_frame(frame),
                max_step: options.rk4_step_factor / bound,
                buffers: std::array::from_fn(|_| vec![C64::new(0.0, 0.0); dim]),
                scratch: vec![C64::new(0.0, 0.0); dim],
            }
        }
        PropagatorChoice::Arrowhead => Stepper::Krylov {
            op: h.in_frame(frame),
            krylov: options.krylov,
        },
    })
}

fn record(
    h: &EffectiveHamiltonian,
    frame: Frame,
    state: &[C64],
    t: f64,
    tolerance: f64,
    result: &mut SimulationResult,
) -> Result<()> {
    let n_atoms = h.n_atoms();
    let total = norm(state).powi(2);
    let drift = (total - 1.0).abs();
    if drift > tolerance {
        return Err(Error::NormDrift { time: t, drift });
    }
    for (k, series) in result.atom_populations.iter_mut().enumerate() {
        series.push(state[k].norm_sqr());
    }
    result
        .photon_norm
        .push(state[n_atoms..].iter().map(|z| z.norm_sqr()).sum());
    result.norm.push(total);
    result.energy.push(h.energy(frame, state));
    Ok(())
}
