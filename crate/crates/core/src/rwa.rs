//! Evolution beyond the rotating-wave approximation in the odd-parity
//! sector with at most three excitations.
//!
//! The interaction is `Σ_{k,l} α_{k,l} (σ⁺_k + λ σ⁻_k) a_l + h.c.`; `λ = 1`
//! is the full dipole coupling and `λ = 0` recovers the single-excitation
//! dynamics. Counter-rotating terms change the excitation number by ±2, so a
//! state with one excitation only ever reaches the three-excitation sector.

use std::collections::HashMap;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::coupling::CouplingMatrix;
use crate::dynamics::WaveFunction;
use crate::error::{Error, Result};
use crate::geometry::OMEGA_A;
use crate::krylov::{norm, HermitianOperator, Krylov};

const NONE: u32 = u32::MAX;

/// Excited emitters and photon occupations, each stored as a sorted list of
/// at most three indices (photon indices may repeat).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FockState {
    atoms: [u32; 3],
    photons: [u32; 3],
}

impl FockState {
    fn new(atoms: &[u32], photons: &[u32]) -> Self {
        let mut a = [NONE; 3];
        let mut p = [NONE; 3];
        a[..atoms.len()].copy_from_slice(atoms);
        p[..photons.len()].copy_from_slice(photons);
        a.sort_unstable();
        p.sort_unstable();
        Self { atoms: a, photons: p }
    }

    pub fn excited_atoms(&self) -> impl Iterator<Item = usize> + '_ {
        self.atoms.iter().take_while(|&&a| a != NONE).map(|&a| a as usize)
    }

    pub fn photons(&self) -> impl Iterator<Item = usize> + '_ {
        self.photons.iter().take_while(|&&p| p != NONE).map(|&p| p as usize)
    }

    pub fn n_atoms_excited(&self) -> usize {
        self.excited_atoms().count()
    }

    pub fn n_photons(&self) -> usize {
        self.photons().count()
    }

    pub fn excitations(&self) -> usize {
        self.n_atoms_excited() + self.n_photons()
    }

    /// Occupation of mode `l`.
    pub fn occupation(&self, l: usize) -> usize {
        self.photons().filter(|&p| p == l).count()
    }

    fn is_excited(&self, k: usize) -> bool {
        self.excited_atoms().any(|a| a == k)
    }

    fn list_with(list: &[u32; 3], add: Option<u32>, remove: Option<u32>) -> Vec<u32> {
        let mut v: Vec<u32> = list.iter().copied().take_while(|&x| x != NONE).collect();
        if let Some(r) = remove {
            let pos = v.iter().position(|&x| x == r).expect("index present");
            v.remove(pos);
        }
        if let Some(a) = add {
            v.push(a);
        }
        v
    }

    // State with the given atom/photon changes, or None past three quanta.
    fn transformed(&self, atom: (Option<u32>, Option<u32>), photon: (Option<u32>, Option<u32>)) -> Option<Self> {
        let atoms = Self::list_with(&self.atoms, atom.0, atom.1);
        let photons = Self::list_with(&self.photons, photon.0, photon.1);
        (atoms.len() <= 3 && photons.len() <= 3 && atoms.len() + photons.len() <= 3)
            .then(|| Self::new(&atoms, &photons))
    }
}

/// Sizes of the sub-sectors of the odd-parity truncated space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SectorCounts {
    pub one_atom: usize,
    pub one_photon: usize,
    pub three_photons: usize,
    pub one_atom_two_photons: usize,
    pub two_atoms_one_photon: usize,
    pub three_atoms: usize,
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

impl SectorCounts {
    pub fn new(n_atoms: usize, n_modes: usize) -> Self {
        Self {
            one_atom: n_atoms,
            one_photon: n_modes,
            three_photons: binomial(n_modes + 2, 3),
            one_atom_two_photons: n_atoms * binomial(n_modes + 1, 2),
            two_atoms_one_photon: binomial(n_atoms, 2) * n_modes,
            three_atoms: binomial(n_atoms, 3),
        }
    }

    pub fn single_excitation(&self) -> usize {
        self.one_atom + self.one_photon
    }

    pub fn triple_excitation(&self) -> usize {
        self.three_photons + self.one_atom_two_photons + self.two_atoms_one_photon + self.three_atoms
    }

    pub fn total(&self) -> usize {
        self.single_excitation() + self.triple_excitation()
    }
}

/// Enumerated states with one or three excitations.
///
/// The single-excitation states come first, ordered like
/// [`WaveFunction::to_flat`]: atoms, then photons.
#[derive(Debug, Clone)]
pub struct TruncatedFockBasis {
    n_atoms: usize,
    n_modes: usize,
    states: Vec<FockState>,
    index: HashMap<FockState, usize>,
    counts: SectorCounts,
}

impl TruncatedFockBasis {
    pub fn new(n_atoms: usize, n_modes: usize, cap: usize) -> Result<Self> {
        if n_atoms == 0 || n_modes == 0 {
            return Err(Error::invalid(
                "truncated basis",
                "needs at least one atom and one mode",
            ));
        }
        let counts = SectorCounts::new(n_atoms, n_modes);
        if counts.total() > cap {
            return Err(Error::Capacity {
                states: counts.total(),
                cap,
            });
        }
        let (na, nm) = (n_atoms as u32, n_modes as u32);
        let mut states = Vec::with_capacity(counts.total());
        states.extend((0..na).map(|k| FockState::new(&[k], &[])));
        states.extend((0..nm).map(|l| FockState::new(&[], &[l])));
        for a in 0..nm {
            for b in a..nm {
                for c in b..nm {
                    states.push(FockState::new(&[], &[a, b, c]));
                }
            }
        }
        for k in 0..na {
            for a in 0..nm {
                for b in a..nm {
                    states.push(FockState::new(&[k], &[a, b]));
                }
            }
        }
        for j in 0..na {
            for k in j + 1..na {
                for a in 0..nm {
                    states.push(FockState::new(&[j, k], &[a]));
                }
            }
        }
        for i in 0..na {
            for j in i + 1..na {
                for k in j + 1..na {
                    states.push(FockState::new(&[i, j, k], &[]));
                }
            }
        }
        let index = states.iter().enumerate().map(|(i, s)| (*s, i)).collect();
        Ok(Self {
            n_atoms,
            n_modes,
            states,
            index,
            counts,
        })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[FockState] {
        &self.states
    }

    pub fn counts(&self) -> SectorCounts {
        self.counts
    }

    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn index_of(&self, state: &FockState) -> Option<usize> {
        self.index.get(state).copied()
    }

    /// Number of leading single-excitation states.
    pub fn single_excitation_len(&self) -> usize {
        self.counts.single_excitation()
    }
}

/// Settings for [`FullCouplingHamiltonian`].
#[derive(Debug, Clone, Copy)]
pub struct RwaOptions {
    /// Weight of the counter-rotating terms.
    pub lambda: f64,
    /// Largest basis that may be enumerated.
    pub state_cap: usize,
    /// Largest number of stored matrix entries; above it rows are regenerated
    /// on every application.
    pub stored_entry_cap: usize,
}

impl Default for RwaOptions {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            state_cap: 20_000_000,
            stored_entry_cap: 200_000_000,
        }
    }
}

#[derive(Debug, Clone)]
enum Storage {
    Csr {
        row_start: Vec<usize>,
        columns: Vec<u32>,
        values: Vec<C64>,
    },
    Streaming,
}

/// Hamiltonian with rotating and counter-rotating terms on a
/// [`TruncatedFockBasis`].
#[derive(Debug, Clone)]
pub struct FullCouplingHamiltonian {
    basis: TruncatedFockBasis,
    coupling: CouplingMatrix,
    mode_frequencies: Vec<f64>,
    lambda: f64,
    diagonal: Vec<f64>,
    storage: Storage,
}

impl FullCouplingHamiltonian {
    pub fn new(coupling: &CouplingMatrix, mode_frequencies: &[f64], options: RwaOptions) -> Result<Self> {
        if coupling.n_modes() != mode_frequencies.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} mode frequencies for {} coupling columns",
                mode_frequencies.len(),
                coupling.n_modes()
            )));
        }
        if !options.lambda.is_finite() {
            return Err(Error::invalid("lambda", "must be finite"));
        }
        let basis = TruncatedFockBasis::new(coupling.n_atoms(), coupling.n_modes(), options.state_cap)?;
        let diagonal = basis
            .states()
            .iter()
            .map(|s| s.n_atoms_excited() as f64 * OMEGA_A + s.photons().map(|l| mode_frequencies[l]).sum::<f64>())
            .collect();
        let mut h = Self {
            basis,
            coupling: coupling.clone(),
            mode_frequencies: mode_frequencies.to_vec(),
            lambda: options.lambda,
            diagonal,
            storage: Storage::Streaming,
        };
        if h.estimated_entries() <= options.stored_entry_cap {
            h.storage = h.build_csr();
        }
        Ok(h)
    }

    pub fn basis(&self) -> &TruncatedFockBasis {
        &self.basis
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn mode_frequencies(&self) -> &[f64] {
        &self.mode_frequencies
    }

    pub fn is_stored(&self) -> bool {
        matches!(self.storage, Storage::Csr { .. })
    }

    /// Diagonal energies `n_exc,atoms ω_a + Σ ω_l n_l`.
    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    fn estimated_entries(&self) -> usize {
        // each state couples to at most (N + 3)·(L + 3) others
        self.basis.len() * (self.basis.n_atoms + 3) * (self.basis.n_modes + 3)
    }

    /// Off-diagonal entries `H_ij` of row `i`, summed over coinciding columns
    /// and sorted by column.
    pub fn row_entries(&self, i: usize, out: &mut Vec<(usize, C64)>) {
        out.clear();
        let s = self.basis.states[i];
        let na = self.basis.n_atoms;
        let nm = self.basis.n_modes;
        let lambda = self.lambda;
        // H|s⟩ = Σ_j coef_j |j⟩ and H_ij = conj(coef_j).
        let mut push = |target: Option<FockState>, coef: C64| {
            if coef == C64::new(0.0, 0.0) {
                return;
            }
            if let Some(j) = target.and_then(|t| self.basis.index_of(&t)) {
                out.push((j, coef.conj()));
            }
        };
        for k in 0..na {
            let kk = k as u32;
            let excited = s.is_excited(k);
            for l in 0..nm {
                let ll = l as u32;
                let a = self.coupling.get(k, l);
                let n = s.occupation(l) as f64;
                if excited {
                    // α* σ⁻ a†
                    push(
                        s.transformed((None, Some(kk)), (Some(ll), None)),
                        a.conj() * (n + 1.0).sqrt(),
                    );
                    // λ α σ⁻ a
                    if n > 0.0 && lambda != 0.0 {
                        push(s.transformed((None, Some(kk)), (None, Some(ll))), a * lambda * n.sqrt());
                    }
                } else {
                    // α σ⁺ a
                    if n > 0.0 {
                        push(s.transformed((Some(kk), None), (None, Some(ll))), a * n.sqrt());
                    }
                    // λ α* σ⁺ a†
                    if lambda != 0.0 {
                        push(
                            s.transformed((Some(kk), None), (Some(ll), None)),
                            a.conj() * lambda * (n + 1.0).sqrt(),
                        );
                    }
                }
            }
        }
        out.sort_by_key(|&(j, _)| j);
        out.dedup_by(|b, a| {
            if a.0 == b.0 {
                a.1 += b.1;
                true
            } else {
                false
            }
        });
    }

    fn build_csr(&self) -> Storage {
        let rows: Vec<Vec<(usize, C64)>> = (0..self.basis.len())
            .into_par_iter()
            .map_init(Vec::new, |buf, i| {
                self.row_entries(i, buf);
                buf.clone()
            })
            .collect();
        let mut row_start = Vec::with_capacity(rows.len() + 1);
        row_start.push(0);
        let total: usize = rows.iter().map(Vec::len).sum();
        let mut columns = Vec::with_capacity(total);
        let mut values = Vec::with_capacity(total);
        for row in rows {
            for (j, v) in row {
                columns.push(j as u32);
                values.push(v);
            }
            row_start.push(columns.len());
        }
        Storage::Csr {
            row_start,
            columns,
            values,
        }
    }

    /// `y ← (H − shift) x`.
    pub fn apply_shifted(&self, shift: f64, x: &[C64], y: &mut [C64]) {
        match &self.storage {
            Storage::Csr {
                row_start,
                columns,
                values,
            } => {
                y.par_iter_mut().enumerate().for_each(|(i, yi)| {
                    let range = row_start[i]..row_start[i + 1];
                    let off: C64 = columns[range.clone()]
                        .iter()
                        .zip(&values[range])
                        .map(|(&j, v)| v * x[j as usize])
                        .sum();
                    *yi = (self.diagonal[i] - shift) * x[i] + off;
                });
            }
            Storage::Streaming => {
                y.par_iter_mut().enumerate().for_each_init(Vec::new, |buf, (i, yi)| {
                    self.row_entries(i, buf);
                    let off: C64 = buf.iter().map(|&(j, v)| v * x[j]).sum();
                    *yi = (self.diagonal[i] - shift) * x[i] + off;
                });
            }
        }
    }

    /// Dense matrix, for small instances.
    pub fn to_dense(&self) -> nalgebra::DMatrix<C64> {
        let n = self.basis.len();
        let mut m = nalgebra::DMatrix::<C64>::zeros(n, n);
        let mut buf = Vec::new();
        for i in 0..n {
            m[(i, i)] = C64::new(self.diagonal[i], 0.0);
            self.row_entries(i, &mut buf);
            for &(j, v) in &buf {
                m[(i, j)] += v;
            }
        }
        m
    }
}

struct Shifted<'a> {
    h: &'a FullCouplingHamiltonian,
    shift: f64,
}

impl HermitianOperator for Shifted<'_> {
    fn dim(&self) -> usize {
        self.h.basis.len()
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        self.h.apply_shifted(self.shift, x, y);
    }
}

/// Sampled observables of a run in the truncated space.
#[derive(Debug, Clone, Serialize)]
pub struct RwaResult {
    pub times: Vec<f64>,
    /// Population of the three-excitation sector.
    pub p3: Vec<f64>,
    /// `atom_populations[k][i]`: probability that emitter `k` is excited.
    pub atom_populations: Vec<Vec<f64>>,
    pub norm: Vec<f64>,
    #[serde(skip)]
    pub final_state: Vec<C64>,
}

impl RwaResult {
    pub fn max_p3(&self) -> f64 {
        self.p3.iter().copied().fold(0.0, f64::max)
    }

    pub fn norm_drift(&self) -> f64 {
        self.norm.iter().map(|n| (n - 1.0).abs()).fold(0.0, f64::max)
    }
}

/// Settings for [`propagate_full`].
#[derive(Debug, Clone, Copy)]
pub struct FullPropagateOptions {
    pub norm_tolerance: f64,
    pub krylov: Krylov,
}

impl Default for FullPropagateOptions {
    fn default() -> Self {
        Self {
            norm_tolerance: 1e-7,
            krylov: Krylov::default(),
        }
    }
}

/// Embed a single-excitation state into the truncated space.
pub fn embed(h: &FullCouplingHamiltonian, psi0: &WaveFunction) -> Result<Vec<C64>> {
    let basis = h.basis();
    if psi0.n_atoms() != basis.n_atoms() || psi0.n_modes() != basis.n_modes() {
        return Err(Error::DimensionMismatch(format!(
            "state with {} atoms and {} modes for a basis with {} and {}",
            psi0.n_atoms(),
            psi0.n_modes(),
            basis.n_atoms(),
            basis.n_modes()
        )));
    }
    let mut x = vec![C64::new(0.0, 0.0); basis.len()];
    x[..basis.single_excitation_len()].copy_from_slice(&psi0.to_flat());
    Ok(x)
}

/// Evolve a single-excitation state in the lab frame and sample the
/// three-excitation population and the emitter populations.
pub fn propagate_full(
    h: &FullCouplingHamiltonian,
    psi0: &WaveFunction,
    times: &[f64],
    options: &FullPropagateOptions,
) -> Result<RwaResult> {
    let mut x = embed(h, psi0)?;
    let initial = norm(&x).powi(2);
    if (initial - 1.0).abs() > 1e-10 {
        return Err(Error::invalid(
            "initial state",
            format!("norm² = {initial}, expected 1"),
        ));
    }
    if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid(
            "times",
            "sample times must be finite and non-decreasing",
        ));
    }
    if times.first().is_some_and(|&t| t < psi0.time) {
        return Err(Error::invalid("times", "first sample precedes the initial state"));
    }
    // Centering the spectrum between the two sectors shortens Krylov steps;
    // it only changes a global phase.
    let op = Shifted {
        h,
        shift: 2.0 * OMEGA_A,
    };
    let basis = h.basis();
    let split = basis.single_excitation_len();
    let mut result = RwaResult {
        times: times.to_vec(),
        p3: Vec::with_capacity(times.len()),
        atom_populations: vec![Vec::with_capacity(times.len()); basis.n_atoms()],
        norm: Vec::with_capacity(times.len()),
        final_state: Vec::new(),
    };
    let mut now = psi0.time;
    for &t in times {
        options.krylov.evolve(&op, &mut x, t - now)?;
        now = t;
        let total = norm(&x).powi(2);
        let drift = (total - 1.0).abs();
        if drift > options.norm_tolerance {
            return Err(Error::NormDrift { time: t, drift });
        }
        result.norm.push(total);
        result.p3.push(x[split..].iter().map(|z| z.norm_sqr()).sum());
        for series in result.atom_populations.iter_mut() {
            series.push(0.0);
        }
        for (state, amp) in basis.states().iter().zip(&x) {
            let p = amp.norm_sqr();
            if p != 0.0 {
                for k in state.excited_atoms() {
                    *result.atom_populations[k].last_mut().unwrap() += p;
                }
            }
        }
    }
    result.final_state = x;
    Ok(result)
}

/// Indices of the `count` modes with the largest total coupling
/// `Σ_k |α_{k,l}|²`, in ascending order.
pub fn strongest_modes(coupling: &CouplingMatrix, count: usize) -> Vec<usize> {
    let mut weight: Vec<(usize, f64)> = (0..coupling.n_modes())
        .map(|l| (l, (0..coupling.n_atoms()).map(|k| coupling.get(k, l).norm_sqr()).sum()))
        .collect();
    weight.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut chosen: Vec<usize> = weight.into_iter().take(count).map(|(l, _)| l).collect();
    chosen.sort_unstable();
    chosen
}
