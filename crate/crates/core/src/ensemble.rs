//! Two emitter ensembles, symmetric Dicke initial states and collective
//! excitation probabilities.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::coupling::{EmitterSet, Polar};
use crate::dynamics::{SimulationResult, WaveFunction};
use crate::error::{Error, Result};
use crate::geometry::LensGeometry;

/// Acceptance below which rejection sampling gives up.
const MIN_ACCEPTANCE: f64 = 0.01;

/// Two Gaussian clouds of emitters around fixed centers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub n_per_ensemble: usize,
    /// Left center first.
    pub centers: [Polar; 2],
    /// Root-mean-square displacement from the center, in units of R.
    pub sigma_over_r: f64,
    pub seed: u64,
    pub g_individual: f64,
}

impl EnsembleSpec {
    /// Indices of the left ensemble in the sampled [`EmitterSet`].
    pub fn left_indices(&self) -> Vec<usize> {
        (0..self.n_per_ensemble).collect()
    }

    pub fn right_indices(&self) -> Vec<usize> {
        (self.n_per_ensemble..2 * self.n_per_ensemble).collect()
    }
}

/// Draw `2 n` emitter positions, the left ensemble first.
///
/// Each position is the center plus an isotropic normal offset with per-axis
/// deviation `σR/√2`, so the RMS distance from the center is `σR`. Samples
/// falling outside the lens are re-drawn.
pub fn sample_ensembles(spec: &EnsembleSpec, geom: &LensGeometry) -> Result<EmitterSet> {
    if spec.n_per_ensemble == 0 {
        return Err(Error::EmptySet);
    }
    if !(spec.sigma_over_r >= 0.0 && spec.sigma_over_r.is_finite()) {
        return Err(Error::invalid(
            "sigma",
            format!("{} must be finite and non-negative", spec.sigma_over_r),
        ));
    }
    let radius = geom.radius();
    for c in &spec.centers {
        if !(c.r >= 0.0 && c.r < radius) {
            return Err(Error::Domain {
                what: "ensemble center radius",
                value: c.r,
                domain: format!("[0, {radius})"),
            });
        }
    }
    let per_axis = spec.sigma_over_r * radius / std::f64::consts::SQRT_2;
    let normal = Normal::new(0.0, per_axis).map_err(|e| Error::invalid("sigma", e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.n_per_ensemble;
    let max_draws = (n as f64 / MIN_ACCEPTANCE).ceil() as usize;
    let mut positions = Vec::with_capacity(2 * n);
    for (ensemble, center) in spec.centers.iter().enumerate() {
        let (cx, cy) = center.to_cartesian();
        let mut draws = 0usize;
        let mut accepted = 0usize;
        while accepted < n {
            if draws >= max_draws {
                return Err(Error::RejectionOverflow {
                    ensemble,
                    acceptance: accepted as f64 / draws as f64,
                });
            }
            draws += 1;
            let (x, y) = (cx + normal.sample(&mut rng), cy + normal.sample(&mut rng));
            if x.hypot(y) < radius {
                positions.push(if per_axis == 0.0 {
                    *center
                } else {
                    Polar::from_cartesian(x, y)
                });
                accepted += 1;
            }
        }
    }
    EmitterSet::new(positions, spec.g_individual, geom)
}

/// Symmetric Dicke state: amplitude `1/√|left|` on every left emitter.
pub fn dicke_initial_state(n_atoms: usize, left: &[usize], n_modes: usize) -> Result<WaveFunction> {
    if left.is_empty() {
        return Err(Error::EmptySet);
    }
    let mut seen = vec![false; n_atoms];
    for &i in left {
        if i >= n_atoms {
            return Err(Error::invalid(
                "left indices",
                format!("{i} out of range for {n_atoms} atoms"),
            ));
        }
        if std::mem::replace(&mut seen[i], true) {
            return Err(Error::invalid("left indices", format!("{i} listed twice")));
        }
    }
    let amplitude = 1.0 / (left.len() as f64).sqrt();
    let mut atomic = vec![num_complex::Complex64::new(0.0, 0.0); n_atoms];
    for &i in left {
        atomic[i] = num_complex::Complex64::new(amplitude, 0.0);
    }
    Ok(WaveFunction::from_parts(
        atomic,
        vec![num_complex::Complex64::new(0.0, 0.0); n_modes],
    ))
}

/// Summed populations `|C_left|²`, `|C_right|²` per sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollectiveRecord {
    pub c_left_sq: Vec<f64>,
    pub c_right_sq: Vec<f64>,
}

/// Partial sums of atomic populations over two disjoint index sets covering
/// every emitter.
pub fn collective_populations(result: &SimulationResult, left: &[usize], right: &[usize]) -> Result<CollectiveRecord> {
    let n_atoms = result.n_atoms();
    let mut owner = vec![None; n_atoms];
    for (side, set) in [left, right].into_iter().enumerate() {
        for &i in set {
            let slot = owner
                .get_mut(i)
                .ok_or_else(|| Error::invalid("index set", format!("{i} out of range for {n_atoms} atoms")))?;
            match *slot {
                Some(s) if s != side => return Err(Error::Overlap(i)),
                Some(_) => return Err(Error::invalid("index set", format!("{i} listed twice"))),
                None => *slot = Some(side),
            }
        }
    }
    if let Some(i) = owner.iter().position(Option::is_none) {
        return Err(Error::invalid(
            "index set",
            format!("atom {i} belongs to neither ensemble"),
        ));
    }
    let sum = |set: &[usize]| -> Vec<f64> {
        (0..result.times.len())
            .map(|t| set.iter().map(|&i| result.atom_populations[i][t]).sum())
            .collect()
    };
    Ok(CollectiveRecord {
        c_left_sq: sum(left),
        c_right_sq: sum(right),
    })
}
