//! Transverse eigenmodes of the mirror-bounded fish-eye lens.
//!
//! Under the stereographic map the lens Helmholtz problem becomes the
//! Laplace–Beltrami eigenproblem on the sphere, so the z-polarized modes are
//! spherical harmonics pulled back to the disk,
//!
//! ```text
//! f_lm(r, φ) = N_lm · P_l^|m|(cos θ(r)) · e^{imφ},   ω_l = c √(l(l+1)) / (R n₀),
//! ```
//!
//! with the mirror at the equator admitting only harmonics with `l + m` odd.
//! `N_lm` fixes the dielectric-weighted norm `∫ n²(r) |f_lm|² d²r = 1`.

use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{LensGeometry, SPEED_OF_LIGHT};
use crate::legendre;
use crate::quadrature::CompositeRule;

/// Mode label `(l, m)` with `l ≥ 1`, `|m| ≤ l − 1` and `l + m` odd.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ModeIndex {
    pub l: u32,
    pub m: i32,
}

impl ModeIndex {
    pub fn new(l: u32, m: i32) -> Result<Self> {
        let admissible = l >= 1 && m.unsigned_abs() < l && (i64::from(l) + i64::from(m)) % 2 != 0;
        if admissible {
            Ok(Self { l, m })
        } else {
            Err(Error::invalid(
                "mode",
                format!("(l, m) = ({l}, {m}) violates l ≥ 1, |m| < l, l + m odd"),
            ))
        }
    }

    /// The `l` admissible modes of degree `l`, in ascending `m`.
    pub fn admissible(l: u32) -> impl Iterator<Item = ModeIndex> {
        let l_i = l as i32;
        (-(l_i - 1)..=(l_i - 1)).step_by(2).map(move |m| ModeIndex { l, m })
    }
}

impl fmt::Display for ModeIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.l, self.m)
    }
}

/// ω_l = c √(l(l+1)) / (R n₀).
pub fn eigenfrequency(geom: &LensGeometry, l: u32) -> Result<f64> {
    if l < 1 {
        return Err(Error::Domain {
            what: "l",
            value: f64::from(l),
            domain: "l ≥ 1".into(),
        });
    }
    Ok(frequency_unchecked(geom, l))
}

fn frequency_unchecked(geom: &LensGeometry, l: u32) -> f64 {
    let l = f64::from(l);
    SPEED_OF_LIGHT * (l * (l + 1.0)).sqrt() / (geom.radius() * geom.n0())
}

/// Closed frequency interval `[min, max]` in units of ω_a.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyWindow {
    pub min: f64,
    pub max: f64,
}

impl FrequencyWindow {
    pub fn new(min: f64, max: f64) -> Result<Self> {
        if !(min.is_finite() && max.is_finite() && min > 0.0 && min < max) {
            return Err(Error::invalid(
                "frequency window",
                format!("need 0 < min < max, got [{min}, {max}]"),
            ));
        }
        Ok(Self { min, max })
    }

    pub fn contains(&self, omega: f64) -> bool {
        omega >= self.min && omega <= self.max
    }
}

/// Contiguous run of modes sharing one frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyGroup {
    pub l: u32,
    pub start: usize,
    pub len: usize,
}

/// Enumerated modes within a frequency window, sorted by `(l, m)`.
#[derive(Debug, Clone)]
pub struct ModeBasis {
    geometry: LensGeometry,
    window: FrequencyWindow,
    modes: Vec<ModeIndex>,
    frequencies: Vec<f64>,
    norm_constants: Vec<f64>,
    groups: Vec<FrequencyGroup>,
    // N_lm / (plain-to-orthonormal Legendre ratio) = √2 / (n₀ R)
    sphere_to_disk: f64,
}

/// Every mode whose frequency lies in `window`.
pub fn enumerate_modes(geom: &LensGeometry, window: FrequencyWindow) -> Result<ModeBasis> {
    let mut admitted = Vec::new();
    let mut l = 1u32;
    loop {
        let omega = frequency_unchecked(geom, l);
        if omega > window.max {
            break;
        }
        if omega >= window.min {
            admitted.push(l);
        }
        l += 1;
    }
    ModeBasis::from_degrees(*geom, window, &admitted)
}

impl ModeBasis {
    fn from_degrees(geometry: LensGeometry, window: FrequencyWindow, degrees: &[u32]) -> Result<Self> {
        if degrees.is_empty() {
            return Err(Error::EmptyBasis {
                min: window.min,
                max: window.max,
            });
        }
        let max_l = *degrees.last().expect("nonempty") as usize;
        let ln_fact = legendre::ln_factorials(2 * max_l);
        let sphere_to_disk = 2f64.sqrt() / (geometry.n0() * geometry.radius());
        let total: usize = degrees.iter().map(|&l| l as usize).sum();
        let mut modes = Vec::with_capacity(total);
        let mut frequencies = Vec::with_capacity(total);
        let mut norm_constants = Vec::with_capacity(total);
        let mut groups = Vec::with_capacity(degrees.len());
        for &l in degrees {
            let omega = frequency_unchecked(&geometry, l);
            groups.push(FrequencyGroup {
                l,
                start: modes.len(),
                len: l as usize,
            });
            for mode in ModeIndex::admissible(l) {
                modes.push(mode);
                frequencies.push(omega);
                let ratio = legendre::normalization_ratio(l as usize, mode.m.unsigned_abs() as usize, &ln_fact);
                norm_constants.push(sphere_to_disk * ratio);
            }
        }
        Ok(Self {
            geometry,
            window,
            modes,
            frequencies,
            norm_constants,
            groups,
            sphere_to_disk,
        })
    }

    /// Basis restricted to the modes at the given positions (kept in basis order).
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let mut sorted = indices.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.is_empty() {
            return Err(Error::EmptySet);
        }
        if let Some(&bad) = sorted.iter().find(|&&i| i >= self.len()) {
            return Err(Error::invalid("mode index", format!("{bad} out of range")));
        }
        let modes: Vec<_> = sorted.iter().map(|&i| self.modes[i]).collect();
        let mut groups: Vec<FrequencyGroup> = Vec::new();
        for (pos, mode) in modes.iter().enumerate() {
            match groups.last_mut() {
                Some(g) if g.l == mode.l => g.len += 1,
                _ => groups.push(FrequencyGroup {
                    l: mode.l,
                    start: pos,
                    len: 1,
                }),
            }
        }
        Ok(Self {
            geometry: self.geometry,
            window: self.window,
            frequencies: sorted.iter().map(|&i| self.frequencies[i]).collect(),
            norm_constants: sorted.iter().map(|&i| self.norm_constants[i]).collect(),
            modes,
            groups,
            sphere_to_disk: self.sphere_to_disk,
        })
    }

    pub fn geometry(&self) -> &LensGeometry {
        &self.geometry
    }

    pub fn window(&self) -> FrequencyWindow {
        self.window
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn modes(&self) -> &[ModeIndex] {
        &self.modes
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    /// `N_lm` in the plain-Legendre convention `f = N_lm P_l^|m| e^{imφ}`.
    ///
    /// Underflows to zero for very large `l + |m|`; evaluation does not use it.
    pub fn norm_constants(&self) -> &[f64] {
        &self.norm_constants
    }

    pub fn groups(&self) -> &[FrequencyGroup] {
        &self.groups
    }

    pub fn max_l(&self) -> u32 {
        self.groups.last().map_or(0, |g| g.l)
    }

    pub fn index_of(&self, mode: ModeIndex) -> Option<usize> {
        self.modes.binary_search(&mode).ok()
    }

    fn check_point(&self, r: f64) -> Result<f64> {
        self.geometry.stereographic_cos_theta(r)
    }

    /// `f_lm(r, φ)` for a mode of this basis.
    pub fn mode_value(&self, mode: ModeIndex, r: f64, phi: f64) -> Result<C64> {
        let x = self.check_point(r)?;
        if self.index_of(mode).is_none() {
            return Err(Error::invalid("mode", format!("{mode} is not in the basis")));
        }
        let radial = self.sphere_to_disk * legendre::normalized(mode.l as usize, mode.m.unsigned_abs() as usize, x);
        Ok(C64::from_polar(radial, f64::from(mode.m) * phi))
    }

    /// Real radial factor `N_lm P_l^|m|(cos θ(r))` of every mode, in basis order.
    pub fn radial_factors(&self, r: f64, scratch: &mut LegendreScratch, out: &mut [f64]) -> Result<()> {
        let x = self.check_point(r)?;
        self.radial_factors_at(x, scratch, out);
        Ok(())
    }

    fn radial_factors_at(&self, x: f64, scratch: &mut LegendreScratch, out: &mut [f64]) {
        assert_eq!(out.len(), self.len());
        let max_l = self.max_l() as usize;
        scratch.fill(max_l, x);
        for (slot, mode) in out.iter_mut().zip(&self.modes) {
            let m = mode.m.unsigned_abs() as usize;
            *slot = self.sphere_to_disk * scratch.columns[m][mode.l as usize - m];
        }
    }

    /// Values of all basis modes at `(r, φ)`, in basis order.
    pub fn evaluate_all(&self, r: f64, phi: f64) -> Result<Vec<C64>> {
        let mut scratch = LegendreScratch::default();
        let mut radial = vec![0.0; self.len()];
        self.radial_factors(r, &mut scratch, &mut radial)?;
        Ok(radial
            .iter()
            .zip(&self.modes)
            .map(|(&rad, mode)| C64::from_polar(rad, f64::from(mode.m) * phi))
            .collect())
    }

    /// Dielectric-weighted overlap matrix `∫ n² f_i f_j* d²r` by tensor-product quadrature.
    ///
    /// The radial integral uses composite Gauss–Legendre; the azimuthal integral is
    /// the trapezoid sum over `angular_points` equispaced angles, which for
    /// `e^{i(m−m')φ}` equals `2π δ_{mm'}` exactly once `angular_points > 2 max|m|`.
    /// The radial error estimate compares against a rule with half as many panels.
    pub fn mode_gram(&self, quad: &GramQuadrature) -> Result<DMatrix<C64>> {
        let max_m = self
            .modes
            .iter()
            .map(|m| m.m.unsigned_abs() as usize)
            .max()
            .unwrap_or(0);
        let angular_points = quad.angular_points.unwrap_or(2 * max_m + 2);
        if angular_points <= 2 * max_m {
            return Err(Error::invalid(
                "angular_points",
                format!("{angular_points} aliases azimuthal orders up to {max_m}"),
            ));
        }
        let fine = self.radial_overlaps(quad.radial_panels, quad.points_per_panel)?;
        let coarse = self.radial_overlaps((quad.radial_panels / 2).max(1), quad.points_per_panel)?;
        let estimate = fine.iter().zip(&coarse).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if estimate > quad.tolerance {
            return Err(Error::Quadrature {
                estimate,
                tolerance: quad.tolerance,
            });
        }
        let n = self.len();
        let step = std::f64::consts::TAU / angular_points as f64;
        Ok(DMatrix::from_fn(n, n, |i, j| {
            let dm = (self.modes[i].m - self.modes[j].m).rem_euclid(angular_points as i32);
            if dm == 0 {
                C64::new(fine[(i, j)] * step * angular_points as f64, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        }))
    }

    // Σ_r w r n(r)² ρ_i(r) ρ_j(r) for every pair sharing an azimuthal order.
    fn radial_overlaps(&self, panels: usize, points: usize) -> Result<DMatrix<f64>> {
        let rule = CompositeRule::new(0.0, self.geometry.radius(), panels, points)?;
        let n = self.len();
        let mut scratch = LegendreScratch::default();
        let mut values = DMatrix::<f64>::zeros(n, rule.nodes.len());
        let mut column = vec![0.0; n];
        for (k, (&r, &w)) in rule.nodes.iter().zip(&rule.weights).enumerate() {
            self.radial_factors_at(self.geometry.cos_theta_unchecked(r), &mut scratch, &mut column);
            let weight = (w * r * self.geometry.index_unchecked(r).powi(2)).sqrt();
            for (i, v) in column.iter().enumerate() {
                values[(i, k)] = v * weight;
            }
        }
        let mut overlaps = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                if self.modes[i].m == self.modes[j].m {
                    let v = values.row(i).dot(&values.row(j));
                    overlaps[(i, j)] = v;
                    overlaps[(j, i)] = v;
                }
            }
        }
        Ok(overlaps)
    }
}

/// Quadrature settings for [`ModeBasis::mode_gram`].
#[derive(Debug, Clone, Copy)]
pub struct GramQuadrature {
    pub radial_panels: usize,
    pub points_per_panel: usize,
    /// Defaults to `2 max|m| + 2`.
    pub angular_points: Option<usize>,
    pub tolerance: f64,
}

impl Default for GramQuadrature {
    fn default() -> Self {
        Self {
            radial_panels: 64,
            points_per_panel: 16,
            angular_points: None,
            tolerance: 1e-9,
        }
    }
}

/// Reusable per-order Legendre columns for evaluating many points.
#[derive(Debug, Default, Clone)]
pub struct LegendreScratch {
    columns: Vec<Vec<f64>>,
}

impl LegendreScratch {
    fn fill(&mut self, max_l: usize, x: f64) {
        if self.columns.len() < max_l + 1 {
            self.columns.resize(max_l + 1, Vec::new());
        }
        for (m, column) in self.columns.iter_mut().enumerate().take(max_l + 1) {
            column.resize(max_l + 1 - m, 0.0);
            legendre::normalized_column(m, x, column);
        }
    }
}
