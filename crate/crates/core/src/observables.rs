//! Field intensity ⟨E⁻E⁺⟩ on spatial grids and the binary frame format.
//!
//! In the single-excitation sector the expectation reduces to
//! `|Σ_l √(ω_l/2) c^ph_l f_l(r, φ)|²`.

use std::io::{Read, Write};

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::dynamics::WaveFunction;
use crate::error::{Error, Result};
use crate::modes::{LegendreScratch, ModeBasis};

/// Pixel value marking grid points outside the lens.
pub const OUTSIDE_DISK: f64 = -1.0;

const MAGIC: &[u8; 4] = b"MFEF";
const VERSION: u32 = 1;

/// Intensity sampled at pixel centers over `[−R, R]²`.
///
/// Pixel `(row, col)` sits at `x = −R + (col + ½)·h`, `y = −R + (row + ½)·h`
/// with `h = 2R / grid_n`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityFrame {
    pub time: f64,
    pub grid_n: usize,
    pub half_width: f64,
    pub clip: Option<f64>,
    /// Unclipped intensities.
    pub raw: Vec<f64>,
    /// Stored copy with the clip applied.
    pub values: Vec<f64>,
}

impl IntensityFrame {
    pub fn pixel_size(&self) -> f64 {
        2.0 * self.half_width / self.grid_n as f64
    }

    pub fn pixel_center(&self, row: usize, col: usize) -> (f64, f64) {
        pixel_center(self.half_width, self.grid_n, row, col)
    }

    pub fn raw_at(&self, row: usize, col: usize) -> f64 {
        self.raw[row * self.grid_n + col]
    }

    /// Brightest pixel of the raw frame as `(row, col)`, first on ties.
    pub fn argmax(&self) -> Option<(usize, usize)> {
        let mut best: Option<(usize, f64)> = None;
        for (i, &v) in self.raw.iter().enumerate() {
            if v != OUTSIDE_DISK && best.is_none_or(|(_, b)| v > b) {
                best = Some((i, v));
            }
        }
        best.map(|(i, _)| (i / self.grid_n, i % self.grid_n))
    }
}

fn pixel_center(half_width: f64, grid_n: usize, row: usize, col: usize) -> (f64, f64) {
    let h = 2.0 * half_width / grid_n as f64;
    (
        -half_width + (col as f64 + 0.5) * h,
        -half_width + (row as f64 + 0.5) * h,
    )
}

fn field_weights(psi: &WaveFunction, basis: &ModeBasis) -> Result<Vec<C64>> {
    if psi.n_modes() != basis.len() {
        return Err(Error::DimensionMismatch(format!(
            "state has {} photonic amplitudes, basis has {} modes",
            psi.n_modes(),
            basis.len()
        )));
    }
    Ok(psi
        .photonic
        .iter()
        .zip(basis.frequencies())
        .map(|(c, w)| c * (0.5 * w).sqrt())
        .collect())
}

fn coherent_sum(weights: &[C64], basis: &ModeBasis, radial: &[f64], phi: f64) -> f64 {
    let field: C64 = weights
        .iter()
        .zip(radial)
        .zip(basis.modes())
        .map(|((w, &rad), mode)| w * C64::from_polar(rad, f64::from(mode.m) * phi))
        .sum();
    field.norm_sqr()
}

/// ⟨E⁻E⁺⟩ at polar point `(r, φ)` inside the lens.
pub fn intensity_at(psi: &WaveFunction, basis: &ModeBasis, r: f64, phi: f64) -> Result<f64> {
    let weights = field_weights(psi, basis)?;
    let mut scratch = LegendreScratch::default();
    let mut radial = vec![0.0; basis.len()];
    basis.radial_factors(r, &mut scratch, &mut radial)?;
    Ok(coherent_sum(&weights, basis, &radial, phi))
}

/// Sample the intensity on a `grid_n × grid_n` Cartesian grid.
pub fn render_frame(psi: &WaveFunction, basis: &ModeBasis, grid_n: usize, clip: Option<f64>) -> Result<IntensityFrame> {
    if grid_n < 16 {
        return Err(Error::invalid("grid_n", format!("{grid_n} is below the minimum of 16")));
    }
    if let Some(c) = clip {
        if !(c >= 0.0) {
            return Err(Error::invalid("clip", format!("{c} must be non-negative")));
        }
    }
    let weights = field_weights(psi, basis)?;
    let radius = basis.geometry().radius();
    let mut raw = vec![0.0; grid_n * grid_n];
    raw.par_chunks_mut(grid_n).enumerate().for_each_init(
        || (LegendreScratch::default(), vec![0.0; basis.len()]),
        |(scratch, radial), (row, out)| {
            for (col, slot) in out.iter_mut().enumerate() {
                let (x, y) = pixel_center(radius, grid_n, row, col);
                let r = x.hypot(y);
                *slot = if r > radius {
                    OUTSIDE_DISK
                } else {
                    basis.radial_factors(r, scratch, radial).expect("point inside the disk");
                    coherent_sum(&weights, basis, radial, y.atan2(x))
                };
            }
        },
    );
    let values = match clip {
        Some(c) => raw
            .iter()
            .map(|&v| if v == OUTSIDE_DISK { v } else { v.min(c) })
            .collect(),
        None => raw.clone(),
    };
    Ok(IntensityFrame {
        time: psi.time,
        grid_n,
        half_width: radius,
        clip,
        raw,
        values,
    })
}

/// Write the stored (clipped) values in the `MFEF` format.
pub fn write_frame<W: Write>(frame: &IntensityFrame, mut out: W) -> Result<()> {
    let grid_n = u32::try_from(frame.grid_n).map_err(|_| Error::invalid("grid_n", "exceeds u32"))?;
    let mut buf = Vec::with_capacity(32 + 8 * frame.values.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&grid_n.to_le_bytes());
    buf.extend_from_slice(&frame.time.to_le_bytes());
    buf.extend_from_slice(&frame.half_width.to_le_bytes());
    buf.extend_from_slice(&frame.clip.unwrap_or(f64::NAN).to_le_bytes());
    for v in &frame.values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

/// Read an `MFEF` frame; `raw` is set to the stored values.
pub fn read_frame<R: Read>(mut input: R) -> Result<IntensityFrame> {
    let mut header = [0u8; 36];
    input.read_exact(&mut header)?;
    if &header[0..4] != MAGIC {
        return Err(Error::invalid("frame", "bad magic bytes"));
    }
    let u32_at = |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().unwrap());
    let f64_at = |i: usize| f64::from_le_bytes(header[i..i + 8].try_into().unwrap());
    let version = u32_at(4);
    if version != VERSION {
        return Err(Error::invalid("frame", format!("unsupported version {version}")));
    }
    let grid_n = u32_at(8) as usize;
    let time = f64_at(12);
    let half_width = f64_at(20);
    let clip = Some(f64_at(28)).filter(|c| !c.is_nan());
    let mut body = vec![0u8; 8 * grid_n * grid_n];
    input.read_exact(&mut body)?;
    let values: Vec<f64> = body
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
        .collect();
    Ok(IntensityFrame {
        time,
        grid_n,
        half_width,
        clip,
        raw: values.clone(),
        values,
    })
}
