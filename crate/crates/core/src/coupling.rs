//! Atom–mode coupling block of the single-excitation Hamiltonian.
//!
//! g_l^(k) = g √(ω_l / (2ω_a³)) F(ω_l) f_l(r_k) with the Gaussian cutoff
//! F(ω) = exp[−(ω−ω_a)² / (4ω_c²)], and α_{k,l} = −i g_l^(k).

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{LensGeometry, OMEGA_A};
use crate::modes::{FrequencyWindow, LegendreScratch, ModeBasis, ModeIndex};

/// Smallest admissible lower window edge; keeps the window strictly positive.
pub const LOW_FREQUENCY_FLOOR: f64 = 1e-9;

/// Emitter location in polar coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Polar {
    pub r: f64,
    pub phi: f64,
}

impl Polar {
    pub fn new(r: f64, phi: f64) -> Self {
        Self { r, phi }
    }

    pub fn from_cartesian(x: f64, y: f64) -> Self {
        Self {
            r: x.hypot(y),
            phi: y.atan2(x),
        }
    }

    pub fn to_cartesian(self) -> (f64, f64) {
        (self.r * self.phi.cos(), self.r * self.phi.sin())
    }
}

/// Two-level emitters sharing one coupling-strength parameter `g`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmitterSet {
    positions: Vec<Polar>,
    g: f64,
}

impl EmitterSet {
    pub fn new(positions: Vec<Polar>, g: f64, geom: &LensGeometry) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::EmptySet);
        }
        if let Some(p) = positions.iter().find(|p| !(p.r >= 0.0 && p.r < geom.radius())) {
            return Err(Error::Domain {
                what: "emitter radius",
                value: p.r,
                domain: format!("[0, {})", geom.radius()),
            });
        }
        if !(g.is_finite() && g >= 0.0) {
            return Err(Error::invalid("g", format!("{g} must be finite and non-negative")));
        }
        Ok(Self { positions, g })
    }

    /// Two emitters at `(r, 0)` and `(r, π)`.
    pub fn opposite_pair(r: f64, g: f64, geom: &LensGeometry) -> Result<Self> {
        Self::new(vec![Polar::new(r, 0.0), Polar::new(r, std::f64::consts::PI)], g, geom)
    }

    pub fn positions(&self) -> &[Polar] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn g(&self) -> f64 {
        self.g
    }

    pub fn with_g(&self, g: f64) -> Self {
        Self {
            positions: self.positions.clone(),
            g,
        }
    }
}

/// Spectral engineering of the coupling: Gaussian cutoff and mode truncation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffSpec {
    pub omega_c: f64,
    /// Replace the field-operator factor √ω_l by √ω_a.
    pub drop_sqrt_omega: bool,
    /// Modes are kept where |ω_l − ω_a| ≤ truncation_sigmas · ω_c.
    pub truncation_sigmas: f64,
    /// Explicit truncation window taking precedence over `truncation_sigmas`.
    pub window_override: Option<FrequencyWindow>,
}

impl CutoffSpec {
    pub fn new(omega_c: f64, truncation_sigmas: f64) -> Result<Self> {
        if !(omega_c.is_finite() && omega_c > 0.0) {
            return Err(Error::invalid("omega_c", format!("{omega_c} must be positive")));
        }
        if !(truncation_sigmas.is_finite() && truncation_sigmas > 0.0) {
            return Err(Error::invalid(
                "truncation_sigmas",
                format!("{truncation_sigmas} must be positive"),
            ));
        }
        Ok(Self {
            omega_c,
            drop_sqrt_omega: false,
            truncation_sigmas,
            window_override: None,
        })
    }

    pub fn dropping_sqrt_omega(mut self, drop: bool) -> Self {
        self.drop_sqrt_omega = drop;
        self
    }

    pub fn with_window(mut self, window: FrequencyWindow) -> Self {
        self.window_override = Some(window);
        self
    }

    /// Truncation window implied by this spec, floored just above zero frequency.
    pub fn window(&self) -> FrequencyWindow {
        self.window_override.unwrap_or_else(|| {
            let half = self.truncation_sigmas * self.omega_c;
            FrequencyWindow {
                min: (OMEGA_A - half).max(LOW_FREQUENCY_FLOOR),
                max: OMEGA_A + half,
            }
        })
    }
}

/// F(ω) = exp[−(ω − ω_a)² / (4ω_c²)], the square root of the stated F².
pub fn cutoff_value(spec: &CutoffSpec, omega: f64) -> f64 {
    let detuning = omega - OMEGA_A;
    (-(detuning * detuning) / (4.0 * spec.omega_c * spec.omega_c)).exp()
}

// g √(ω/(2ω_a³)) F(ω), the mode-independent part of g_l^(k) before f_l(r_k).
fn frequency_factor(g: f64, spec: &CutoffSpec, omega: f64) -> f64 {
    let field_omega = if spec.drop_sqrt_omega { OMEGA_A } else { omega };
    g * (field_omega / (2.0 * OMEGA_A.powi(3))).sqrt() * cutoff_value(spec, omega)
}

/// g_l^(k) for emitter `k` and `mode`.
pub fn coupling_constant(
    emitters: &EmitterSet,
    spec: &CutoffSpec,
    basis: &ModeBasis,
    k: usize,
    mode: ModeIndex,
) -> Result<C64> {
    let pos = emitters
        .positions
        .get(k)
        .ok_or_else(|| Error::invalid("atom index", format!("{k} out of range")))?;
    let i = basis
        .index_of(mode)
        .ok_or_else(|| Error::invalid("mode", format!("{mode} is not in the basis")))?;
    let f = basis.mode_value(mode, pos.r, pos.phi)?;
    Ok(f * frequency_factor(emitters.g, spec, basis.frequencies()[i]))
}

/// Dense N × L block α, stored row-major (one row per emitter).
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrix {
    n_atoms: usize,
    n_modes: usize,
    alpha: Vec<C64>,
}

impl CouplingMatrix {
    pub fn from_rows(n_atoms: usize, n_modes: usize, alpha: Vec<C64>) -> Result<Self> {
        if alpha.len() != n_atoms * n_modes {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {n_atoms} × {n_modes} coupling block",
                alpha.len()
            )));
        }
        if alpha.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::invalid("coupling", "non-finite entry"));
        }
        Ok(Self {
            n_atoms,
            n_modes,
            alpha,
        })
    }

    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn get(&self, k: usize, l: usize) -> C64 {
        self.alpha[k * self.n_modes + l]
    }

    pub fn row(&self, k: usize) -> &[C64] {
        &self.alpha[k * self.n_modes..(k + 1) * self.n_modes]
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.alpha
    }

    /// Copy restricted to the given mode columns.
    pub fn select_modes(&self, columns: &[usize]) -> Self {
        let alpha = (0..self.n_atoms)
            .flat_map(|k| columns.iter().map(move |&l| (k, l)))
            .map(|(k, l)| self.get(k, l))
            .collect();
        Self {
            n_atoms: self.n_atoms,
            n_modes: columns.len(),
            alpha,
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            alpha: self.alpha.iter().map(|z| z * factor).collect(),
            ..self.clone()
        }
    }
}

/// α_{k,l} = −i g_l^(k) for every emitter and basis mode.
///
/// The basis must have been enumerated with exactly the window implied by `spec`.
pub fn build_coupling_matrix(emitters: &EmitterSet, spec: &CutoffSpec, basis: &ModeBasis) -> Result<CouplingMatrix> {
    if basis.window() != spec.window() {
        return Err(Error::DimensionMismatch(format!(
            "basis window [{}, {}] differs from cutoff window [{}, {}]",
            basis.window().min,
            basis.window().max,
            spec.window().min,
            spec.window().max
        )));
    }
    coupling_block(emitters, spec, basis)
}

/// Coupling block for an arbitrary (possibly sub-selected) basis, without the
/// window consistency check.
pub fn coupling_block(emitters: &EmitterSet, spec: &CutoffSpec, basis: &ModeBasis) -> Result<CouplingMatrix> {
    let geom = basis.geometry();
    if let Some(p) = emitters.positions.iter().find(|p| p.r >= geom.radius()) {
        return Err(Error::Domain {
            what: "emitter radius",
            value: p.r,
            domain: format!("[0, {})", geom.radius()),
        });
    }
    let factors: Vec<f64> = basis
        .frequencies()
        .iter()
        .map(|&w| frequency_factor(emitters.g, spec, w))
        .collect();
    let rows: Vec<Vec<C64>> = emitters
        .positions
        .par_iter()
        .map_init(
            || (LegendreScratch::default(), vec![0.0; basis.len()]),
            |(scratch, radial), pos| {
                basis.radial_factors(pos.r, scratch, radial)?;
                Ok(radial
                    .iter()
                    .zip(basis.modes())
                    .zip(&factors)
                    .map(|((&rad, mode), &factor)| {
                        let f = C64::from_polar(rad, f64::from(mode.m) * pos.phi);
                        -C64::i() * (f * factor)
                    })
                    .collect())
            },
        )
        .collect::<Result<_>>()?;
    CouplingMatrix::from_rows(emitters.len(), basis.len(), rows.concat())
}
