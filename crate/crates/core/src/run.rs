//! Task orchestration and file outputs.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use serde::Serialize;

use crate::config::{EmitterMode, RunConfig, Task};
use crate::coupling::{build_coupling_matrix, CouplingMatrix, CutoffSpec, EmitterSet, Polar};
use crate::dynamics::{
    assemble_hamiltonian, peak_in_window, propagate, EffectiveHamiltonian, PropagateOptions, SimulationResult,
    TransferRecord, WaveFunction,
};
use crate::ensemble::{collective_populations, dicke_initial_state, sample_ensembles, EnsembleSpec};
use crate::error::{Error, Result};
use crate::geometry::{LensGeometry, LAMBDA_A};
use crate::modes::{enumerate_modes, FrequencyWindow, ModeBasis};
use crate::observables::{render_frame, write_frame};
use crate::optimizer::{minimize, OptimizationProblem, OptimizationReport, Parameter, TransferSetup};
use crate::rwa::{
    propagate_full, strongest_modes, FullCouplingHamiltonian, FullPropagateOptions, RwaOptions, RwaResult,
};

/// Lens, modes, emitters and Hamiltonian described by a configuration.
#[derive(Debug, Clone)]
pub struct System {
    pub lens: LensGeometry,
    pub cutoff: CutoffSpec,
    pub basis: ModeBasis,
    pub emitters: EmitterSet,
    pub coupling: CouplingMatrix,
    pub hamiltonian: EffectiveHamiltonian,
    pub left: Vec<usize>,
    pub right: Vec<usize>,
}

pub fn lens(config: &RunConfig) -> Result<LensGeometry> {
    LensGeometry::from_wavelengths(config.lens.r_over_lambda_a, config.lens.n0)
}

pub fn cutoff(config: &RunConfig) -> Result<CutoffSpec> {
    let c = config.coupling()?;
    let mut spec = CutoffSpec::new(c.omega_c, c.truncation_sigmas)?.dropping_sqrt_omega(c.drop_sqrt_omega);
    if let Some([lo, hi]) = c.window {
        spec = spec.with_window(FrequencyWindow::new(lo, hi)?);
    }
    Ok(spec)
}

pub fn mode_basis(config: &RunConfig) -> Result<ModeBasis> {
    enumerate_modes(&lens(config)?, cutoff(config)?.window())
}

pub fn build_system(config: &RunConfig) -> Result<System> {
    let lens = lens(config)?;
    let cutoff = cutoff(config)?;
    let basis = enumerate_modes(&lens, cutoff.window())?;
    let e = config.emitters()?;
    let r_a = e.r_a_over_r * lens.radius();
    let centers = [Polar::new(r_a, e.phi[0]), Polar::new(r_a, e.phi[1])];
    let (emitters, left, right) = match e.mode {
        EmitterMode::TwoAtoms => (
            EmitterSet::new(centers.to_vec(), config.coupling_strength()?, &lens)?,
            vec![0],
            vec![1],
        ),
        EmitterMode::Ensembles => {
            let ens = e.ensemble.as_ref().ok_or(Error::EmptySet)?;
            let spec = EnsembleSpec {
                n_per_ensemble: ens.n,
                centers,
                sigma_over_r: ens.sigma_over_r,
                seed: ens.seed,
                g_individual: ens.g_individual,
            };
            (
                sample_ensembles(&spec, &lens)?,
                spec.left_indices(),
                spec.right_indices(),
            )
        }
    };
    let coupling = build_coupling_matrix(&emitters, &cutoff, &basis)?;
    let hamiltonian = assemble_hamiltonian(&emitters, &coupling, &basis)?;
    Ok(System {
        lens,
        cutoff,
        basis,
        emitters,
        coupling,
        hamiltonian,
        left,
        right,
    })
}

/// Sample times `0, dt·k, 2dt·k, … ≤ t_max` with `k = sample_every`.
pub fn sample_times(config: &RunConfig) -> Result<Vec<f64>> {
    let i = config.integration()?;
    let step = i.dt * i.sample_every as f64;
    let n = (i.t_max / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| k as f64 * step).collect())
}

/// In-memory outcome of the `simulate` task.
#[derive(Debug, Clone)]
pub struct SimulationOutcome {
    pub system: System,
    pub result: SimulationResult,
    /// Arrival time `T = π n₀ R / c`.
    pub arrival_time: f64,
    /// Right emitter (or right ensemble) peak in the transfer window.
    pub transfer: TransferRecord,
    /// Left emitter (or ensemble) peak in the revival window, when simulated.
    pub revival: Option<TransferRecord>,
}

impl SimulationOutcome {
    /// Population series of the receiving side.
    pub fn right_series(&self) -> &[f64] {
        match &self.result.collective {
            Some(c) => &c.c_right_sq,
            None => &self.result.atom_populations[1],
        }
    }

    pub fn left_series(&self) -> &[f64] {
        match &self.result.collective {
            Some(c) => &c.c_left_sq,
            None => &self.result.atom_populations[0],
        }
    }
}

// Peak within [lo, hi] clipped to the simulated range; None if nothing remains.
fn clipped_peak(times: &[f64], series: &[f64], lo: f64, hi: f64) -> Option<TransferRecord> {
    let t_end = *times.last()?;
    if lo > t_end {
        return None;
    }
    peak_in_window(times, series, (lo, hi.min(t_end))).ok()
}

/// Run the `simulate` task without touching the filesystem.
pub fn simulate(config: &RunConfig) -> Result<SimulationOutcome> {
    let system = build_system(config)?;
    let integration = config.integration()?;
    let n_atoms = system.emitters.len();
    let n_modes = system.basis.len();
    let psi0 = match config.emitters()?.mode {
        EmitterMode::TwoAtoms => WaveFunction::single_excitation(n_atoms, n_modes, 0)?,
        EmitterMode::Ensembles => dicke_initial_state(n_atoms, &system.left, n_modes)?,
    };
    let frames = config.outputs.frames.as_ref();
    let options = PropagateOptions {
        propagator: integration.propagator,
        snapshot_times: frames.map(|f| f.times.clone()).unwrap_or_default(),
        ..PropagateOptions::default()
    };
    let times = sample_times(config)?;
    let mut result = propagate(&system.hamiltonian, &psi0, &times, &options)?;
    if config.emitters()?.mode == EmitterMode::Ensembles {
        result.collective = Some(collective_populations(&result, &system.left, &system.right)?);
    }
    if let Some(f) = frames {
        result.frames = result
            .snapshots
            .iter()
            .map(|psi| render_frame(psi, &system.basis, f.grid_n, f.clip))
            .collect::<Result<_>>()?;
    }
    let arrival_time = system.lens.arrival_time();
    let [tlo, thi] = config.analysis.transfer_window;
    let [rlo, rhi] = config.analysis.revival_window;
    let mut outcome = SimulationOutcome {
        system,
        result,
        arrival_time,
        transfer: TransferRecord {
            t_peak: 0.0,
            p_peak: 0.0,
            infidelity: 1.0,
        },
        revival: None,
    };
    let times = &outcome.result.times;
    outcome.transfer = clipped_peak(times, outcome.right_series(), tlo * arrival_time, thi * arrival_time).ok_or(
        Error::EmptyWindow {
            lo: tlo * arrival_time,
            hi: thi * arrival_time,
        },
    )?;
    outcome.revival = clipped_peak(times, outcome.left_series(), rlo * arrival_time, rhi * arrival_time);
    Ok(outcome)
}

/// Transfer setup of a two-emitter configuration.
pub fn transfer_setup(config: &RunConfig) -> Result<TransferSetup> {
    let c = config.coupling()?;
    Ok(TransferSetup {
        g: config.coupling_strength()?,
        omega_c: c.omega_c,
        r_over_lambda_a: config.lens.r_over_lambda_a,
        ra_over_r: config.emitters()?.r_a_over_r,
        n0: config.lens.n0,
        truncation_sigmas: c.truncation_sigmas,
        drop_sqrt_omega: c.drop_sqrt_omega,
    })
}

pub fn optimization_problem(config: &RunConfig) -> Result<(OptimizationProblem, Vec<f64>, usize)> {
    let o = config.optimize()?;
    let free = o
        .free
        .iter()
        .map(|s| Parameter::from_str(s))
        .collect::<Result<Vec<_>>>()?;
    let bounds = o.bounds.iter().map(|b| (b[0], b[1])).collect();
    let mut problem = OptimizationProblem::new(free, bounds, transfer_setup(config)?)?;
    problem.retruncate = o.retruncate;
    problem.objective_window = (config.analysis.transfer_window[0], config.analysis.transfer_window[1]);
    if let Some(i) = &config.integration {
        problem.dt = i.dt * i.sample_every as f64;
        problem.propagator = i.propagator;
    }
    let initial = o.initial.clone().unwrap_or_else(|| problem.initial_guess());
    Ok((problem, initial, o.budget))
}

pub fn optimize(config: &RunConfig) -> Result<OptimizationReport> {
    let (problem, initial, budget) = optimization_problem(config)?;
    minimize(&problem, &initial, budget)
}

/// In-memory outcome of the `rwa_check` task.
#[derive(Debug, Clone)]
pub struct RwaOutcome {
    pub hamiltonian: FullCouplingHamiltonian,
    pub result: RwaResult,
    pub arrival_time: f64,
}

pub fn rwa_check(config: &RunConfig) -> Result<RwaOutcome> {
    let r = config.rwa()?;
    let system = build_system(config)?;
    let columns = strongest_modes(&system.coupling, r.n_modes);
    let coupling = system.coupling.select_modes(&columns);
    let freqs: Vec<f64> = columns.iter().map(|&l| system.basis.frequencies()[l]).collect();
    let options = RwaOptions {
        lambda: r.lambda,
        state_cap: r.state_cap,
        ..RwaOptions::default()
    };
    let h = FullCouplingHamiltonian::new(&coupling, &freqs, options)?;
    let psi0 = WaveFunction::single_excitation(coupling.n_atoms(), coupling.n_modes(), 0)?;
    let arrival_time = system.lens.arrival_time();
    let times = crate::dynamics::uniform_grid(r.t_max_over_t * arrival_time, r.dt);
    let result = propagate_full(&h, &psi0, &times, &FullPropagateOptions::default())?;
    Ok(RwaOutcome {
        hamiltonian: h,
        result,
        arrival_time,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RaypathSummary {
    pub optical_length: f64,
    pub optical_length_closed_form: f64,
    pub optical_length_over_lambda_a: f64,
    pub arrival_time: f64,
}

pub fn raypath(config: &RunConfig) -> Result<RaypathSummary> {
    let lens = lens(config)?;
    let optical_length = lens.optical_path_diametral();
    Ok(RaypathSummary {
        optical_length,
        optical_length_closed_form: lens.optical_path_closed_form(),
        optical_length_over_lambda_a: optical_length / LAMBDA_A,
        arrival_time: lens.arrival_time(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct OptimumSummary {
    pub free: Vec<&'static str>,
    pub best_parameters: Vec<f64>,
    pub best_infidelity: f64,
    pub evaluation_count: usize,
    pub converged: bool,
    pub budget_exhausted: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RwaSummary {
    pub n_modes: usize,
    pub n_states: usize,
    pub lambda: f64,
    pub p3_max: f64,
}

/// Contents of the summary JSON.
#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub task: Task,
    pub mode_count: Option<usize>,
    pub group_count: Option<usize>,
    pub wall_time_s: f64,
    pub norm_drift: Option<f64>,
    pub energy_drift: Option<f64>,
    pub arrival_time: f64,
    pub transfer: Option<TransferRecord>,
    pub revival: Option<TransferRecord>,
    pub raypath: Option<RaypathSummary>,
    pub optimum: Option<OptimumSummary>,
    pub rwa: Option<RwaSummary>,
    pub files: Vec<String>,
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn create(out_dir: &Path, name: &str, files: &mut Vec<String>) -> Result<BufWriter<File>> {
    files.push(name.to_string());
    Ok(BufWriter::new(File::create(out_dir.join(name))?))
}

fn write_json<T: Serialize>(out_dir: &Path, name: &str, value: &T, files: &mut Vec<String>) -> Result<()> {
    let mut w = create(out_dir, name, files)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::invalid("json", e.to_string()))?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn write_populations(out_dir: &Path, name: &str, out: &SimulationOutcome, files: &mut Vec<String>) -> Result<()> {
    let r = &out.result;
    let mut w = create(out_dir, name, files)?;
    let mut header = vec!["t".to_string()];
    header.extend((0..r.n_atoms()).map(|k| format!("pop_atom_{k}")));
    header.push("photon_norm".into());
    if r.collective.is_some() {
        header.extend(["c_left_sq".into(), "c_right_sq".into()]);
    }
    writeln!(w, "{}", header.join(","))?;
    for (i, &t) in r.times.iter().enumerate() {
        let mut row = vec![fmt(t)];
        row.extend(r.atom_populations.iter().map(|p| fmt(p[i])));
        row.push(fmt(r.photon_norm[i]));
        if let Some(c) = &r.collective {
            row.push(fmt(c.c_left_sq[i]));
            row.push(fmt(c.c_right_sq[i]));
        }
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

fn write_positions(out_dir: &Path, out: &SimulationOutcome, files: &mut Vec<String>) -> Result<()> {
    let mut w = create(out_dir, "ensemble_positions.csv", files)?;
    writeln!(w, "index,ensemble,r,phi")?;
    let right_start = out.system.right.first().copied().unwrap_or(usize::MAX);
    for (i, p) in out.system.emitters.positions().iter().enumerate() {
        let side = if i >= right_start { "right" } else { "left" };
        writeln!(w, "{i},{side},{},{}", fmt(p.r), fmt(p.phi))?;
    }
    w.flush()?;
    Ok(())
}

fn write_spectrum(out_dir: &Path, basis: &ModeBasis, files: &mut Vec<String>) -> Result<()> {
    let mut w = create(out_dir, "spectrum.csv", files)?;
    writeln!(w, "l,m,omega,norm_constant")?;
    for ((mode, &omega), &norm) in basis
        .modes()
        .iter()
        .zip(basis.frequencies())
        .zip(basis.norm_constants())
    {
        writeln!(w, "{},{},{},{}", mode.l, mode.m, fmt(omega), fmt(norm))?;
    }
    w.flush()?;
    Ok(())
}

fn write_trace(out_dir: &Path, report: &OptimizationReport, files: &mut Vec<String>) -> Result<()> {
    let mut w = create(out_dir, "optimization_trace.csv", files)?;
    let mut header = vec!["evaluation".to_string()];
    header.extend(report.free.iter().map(|p| p.name().to_string()));
    header.extend(["infidelity".into(), "best_so_far".into()]);
    writeln!(w, "{}", header.join(","))?;
    for (i, entry) in report.trace.iter().enumerate() {
        let mut row = vec![i.to_string()];
        row.extend(entry.parameters.iter().map(|&v| fmt(v)));
        row.push(fmt(entry.value));
        row.push(fmt(entry.best_so_far));
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

fn write_rwa(out_dir: &Path, result: &RwaResult, files: &mut Vec<String>) -> Result<()> {
    let mut w = create(out_dir, "rwa.csv", files)?;
    let mut header = vec!["t".to_string(), "P3".to_string()];
    header.extend((0..result.atom_populations.len()).map(|k| format!("pop_atom_{k}")));
    header.push("norm".into());
    writeln!(w, "{}", header.join(","))?;
    for (i, &t) in result.times.iter().enumerate() {
        let mut row = vec![fmt(t), fmt(result.p3[i])];
        row.extend(result.atom_populations.iter().map(|p| fmt(p[i])));
        row.push(fmt(result.norm[i]));
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// Execute the configured task, writing its outputs into `out_dir`.
pub fn run(config: &RunConfig, out_dir: &Path) -> Result<Summary> {
    let start = Instant::now();
    std::fs::create_dir_all(out_dir)?;
    let arrival_time = lens(config)?.arrival_time();
    let mut files = Vec::new();
    let mut summary = Summary {
        task: config.task,
        mode_count: None,
        group_count: None,
        wall_time_s: 0.0,
        norm_drift: None,
        energy_drift: None,
        arrival_time,
        transfer: None,
        revival: None,
        raypath: None,
        optimum: None,
        rwa: None,
        files: Vec::new(),
    };
    match config.task {
        Task::Simulate => {
            let out = simulate(config)?;
            summary.mode_count = Some(out.system.basis.len());
            summary.group_count = Some(out.system.basis.groups().len());
            summary.norm_drift = Some(out.result.norm_drift());
            summary.energy_drift = Some(out.result.energy_drift());
            summary.transfer = Some(out.transfer);
            summary.revival = out.revival;
            write_populations(out_dir, &config.outputs.populations_csv, &out, &mut files)?;
            if config.emitters()?.mode == EmitterMode::Ensembles {
                write_positions(out_dir, &out, &mut files)?;
            }
            for (i, frame) in out.result.frames.iter().enumerate() {
                let mut w = create(out_dir, &format!("frame_{i:04}.mfef"), &mut files)?;
                write_frame(frame, &mut w)?;
                w.flush()?;
            }
        }
        Task::Modes => {
            let basis = mode_basis(config)?;
            summary.mode_count = Some(basis.len());
            summary.group_count = Some(basis.groups().len());
            write_spectrum(out_dir, &basis, &mut files)?;
        }
        Task::Optimize => {
            let report = optimize(config)?;
            let basis = mode_basis(config)?;
            summary.mode_count = Some(basis.len());
            summary.group_count = Some(basis.groups().len());
            summary.optimum = Some(OptimumSummary {
                free: report.free.iter().map(|p| p.name()).collect(),
                best_parameters: report.best_parameters.clone(),
                best_infidelity: report.best_infidelity,
                evaluation_count: report.evaluation_count,
                converged: report.converged,
                budget_exhausted: report.budget_exhausted,
            });
            write_json(out_dir, "optimization.json", &report, &mut files)?;
            write_trace(out_dir, &report, &mut files)?;
        }
        Task::RwaCheck => {
            let out = rwa_check(config)?;
            let basis = mode_basis(config)?;
            summary.mode_count = Some(basis.len());
            summary.group_count = Some(basis.groups().len());
            summary.norm_drift = Some(out.result.norm_drift());
            summary.rwa = Some(RwaSummary {
                n_modes: out.hamiltonian.basis().n_modes(),
                n_states: out.hamiltonian.basis().len(),
                lambda: out.hamiltonian.lambda(),
                p3_max: out.result.max_p3(),
            });
            write_rwa(out_dir, &out.result, &mut files)?;
        }
        Task::Raypath => {
            summary.raypath = Some(raypath(config)?);
        }
    }
    files.push(config.outputs.summary_json.clone());
    summary.files = files;
    summary.wall_time_s = start.elapsed().as_secs_f64();
    let mut scratch = Vec::new();
    write_json(out_dir, &config.outputs.summary_json, &summary, &mut scratch)?;
    Ok(summary)
}
