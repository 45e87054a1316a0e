#![allow(dead_code)]

//! Test-side oracles built independently of the library internals.

use std::path::PathBuf;

use mfe_core::config::RunConfig;
use mfe_core::coupling::CouplingMatrix;
use mfe_core::modes::{ModeBasis, ModeIndex};
use mfe_core::C64;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn preset_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../presets")
        .join(name)
}

pub fn preset(name: &str) -> RunConfig {
    let text = std::fs::read_to_string(preset_path(name)).expect("preset readable");
    RunConfig::parse(&text).expect("preset parses")
}

/// Relative residual of `∇²f + n(r)² ω² f = 0` from a five-point stencil,
/// as RMS(residual) / RMS(n²ω²f) over the given polar points.
pub fn helmholtz_residual(basis: &ModeBasis, mode: ModeIndex, omega: f64, points: &[(f64, f64)], h: f64) -> f64 {
    let geom = basis.geometry();
    let f = |x: f64, y: f64| basis.mode_value(mode, x.hypot(y), y.atan2(x)).unwrap();
    let mut res2 = 0.0;
    let mut ref2 = 0.0;
    for &(r, phi) in points {
        let (x, y) = (r * phi.cos(), r * phi.sin());
        let centre = f(x, y);
        let lap = (f(x + h, y) + f(x - h, y) + f(x, y + h) + f(x, y - h) - centre * 4.0) / (h * h);
        let n = geom.refractive_index(r).unwrap();
        let source = centre * (n * n * omega * omega);
        res2 += (lap + source).norm_sqr();
        ref2 += source.norm_sqr();
    }
    (res2 / ref2).sqrt()
}

/// Random single-excitation instance: mode frequencies near resonance and
/// complex couplings.
pub fn random_instance(seed: u64, n_atoms: usize, n_modes: usize) -> (Vec<f64>, CouplingMatrix) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let freqs = (0..n_modes).map(|_| rng.random_range(0.8..1.2)).collect();
    let alpha = (0..n_atoms * n_modes)
        .map(|_| C64::new(rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1)))
        .collect();
    (freqs, CouplingMatrix::from_rows(n_atoms, n_modes, alpha).unwrap())
}

/// Dense `(N+L)` matrix of the single-excitation Hamiltonian written out
/// directly from its block structure (lab frame).
pub fn dense_single_excitation(freqs: &[f64], cm: &CouplingMatrix) -> DMatrix<C64> {
    let n = cm.n_atoms();
    let l = cm.n_modes();
    DMatrix::from_fn(n + l, n + l, |i, j| match (i < n, j < n) {
        (true, true) => C64::new(if i == j { 1.0 } else { 0.0 }, 0.0),
        (false, false) => C64::new(if i == j { freqs[i - n] } else { 0.0 }, 0.0),
        (true, false) => cm.get(i, j - n),
        (false, true) => cm.get(j, i - n).conj(),
    })
}

/// `exp(−iHt) v` by eigendecomposition.
pub fn evolve_dense(h: &DMatrix<C64>, v: &[C64], t: f64) -> Vec<C64> {
    let eig = nalgebra::SymmetricEigen::new(h.clone());
    let coeffs = eig.eigenvectors.adjoint() * DVector::from_column_slice(v);
    let phased = DVector::from_iterator(
        v.len(),
        coeffs
            .iter()
            .zip(eig.eigenvalues.iter())
            .map(|(c, e)| c * C64::from_polar(1.0, -e * t)),
    );
    (eig.eigenvectors * phased).iter().copied().collect()
}

/// Fock states `(atom bits, photon occupations)` with at most three quanta,
/// every parity included.
#[derive(Debug, Clone)]
pub struct FockOracle {
    pub states: Vec<(Vec<u8>, Vec<u8>)>,
    pub matrix: DMatrix<C64>,
}

impl FockOracle {
    /// `H = Σ ω_a σ⁺σ⁻ + Σ ω_l a†a + Σ α (σ⁺ + λσ⁻) a + h.c.` on all states
    /// with total excitation ≤ 3.
    pub fn new(freqs: &[f64], cm: &CouplingMatrix, lambda: f64) -> Self {
        let n = cm.n_atoms();
        let l = cm.n_modes();
        let mut states = Vec::new();
        let mut occ = vec![0u8; n + l];
        loop {
            let total: u32 = occ.iter().map(|&x| u32::from(x)).sum();
            if total <= 3 {
                states.push((occ[..n].to_vec(), occ[n..].to_vec()));
            }
            // odometer: atoms take 0/1, photons 0..=3
            let mut i = 0;
            loop {
                if i == n + l {
                    let matrix = Self::build(&states, freqs, cm, lambda);
                    return Self { states, matrix };
                }
                let max = if i < n { 1 } else { 3 };
                if occ[i] < max {
                    occ[i] += 1;
                    break;
                }
                occ[i] = 0;
                i += 1;
            }
        }
    }

    fn build(states: &[(Vec<u8>, Vec<u8>)], freqs: &[f64], cm: &CouplingMatrix, lambda: f64) -> DMatrix<C64> {
        let dim = states.len();
        let find = |s: &(Vec<u8>, Vec<u8>)| states.iter().position(|t| t == s);
        let mut h = DMatrix::<C64>::zeros(dim, dim);
        for (j, s) in states.iter().enumerate() {
            let energy = s.0.iter().map(|&b| f64::from(b)).sum::<f64>()
                + s.1.iter().zip(freqs).map(|(&n, w)| f64::from(n) * w).sum::<f64>();
            h[(j, j)] += C64::new(energy, 0.0);
            for k in 0..cm.n_atoms() {
                for m in 0..cm.n_modes() {
                    let a = cm.get(k, m);
                    let nph = f64::from(s.1[m]);
                    // four operator products acting on |s⟩
                    let terms: [(i8, i8, C64); 4] = [
                        (1, -1, a),
                        (-1, 1, a.conj()),
                        (-1, -1, a * lambda),
                        (1, 1, a.conj() * lambda),
                    ];
                    for (da, dp, coef) in terms {
                        let atom = s.0[k] as i8 + da;
                        let photons = s.1[m] as i8 + dp;
                        if !(0..=1).contains(&atom) || photons < 0 {
                            continue;
                        }
                        let boson = if dp < 0 { nph.sqrt() } else { (nph + 1.0).sqrt() };
                        let mut t = s.clone();
                        t.0[k] = atom as u8;
                        t.1[m] = photons as u8;
                        if let Some(i) = find(&t) {
                            h[(i, j)] += coef * boson;
                        }
                    }
                }
            }
        }
        h
    }

    pub fn excitations(&self, i: usize) -> u32 {
        let (a, p) = &self.states[i];
        a.iter().chain(p).map(|&x| u32::from(x)).sum()
    }

    /// Index of the single-excitation state for flat index `i` of a
    /// [`mfe_core::dynamics::WaveFunction`] (atoms first, then photons).
    pub fn single_excitation_index(&self, n_atoms: usize, i: usize) -> usize {
        self.states
            .iter()
            .position(|(a, p)| {
                let mut flat = a.iter().chain(p.iter());
                flat.clone().map(|&x| u32::from(x)).sum::<u32>() == 1 && flat.nth(i) == Some(&1)
            })
            .unwrap_or_else(|| panic!("no state for flat index {i} with {n_atoms} atoms"))
    }
}
