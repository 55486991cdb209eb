//! Gerchberg-Saxton phase retrieval and batch frame characterization.
//!
//! [`gsa_retrieve`] recovers the input-plane phase screen from a known input
//! amplitude and a measured output-plane intensity by alternating
//! projections: propagate forward, replace the amplitude by the measured one
//! keeping the phase, propagate backward, replace the amplitude by the input
//! one keeping the phase. The output-plane error metric (normalized RMS
//! amplitude mismatch) is non-increasing across iterations.
//!
//! Retrieved screens are gauge-fixed: the in-aperture mean phase is zero.
//! Reported phases are wrapped unless a residue-free Itoh row/column unwrap
//! applies cleanly; 2-pi residues inside the aperture are flagged, not fixed.

use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};

use crate::error::{Error, Result};
use crate::exec;
use crate::field::SampledField;
use crate::propagation::{Medium, Propagator};
use crate::zernike::{decompose, ApertureGrid, PhaseScreen, ZernikeSpectrum};

/// Initial phase guess for the retrieval loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialPhase {
    /// All-zero phase: deterministic and reproducible.
    Flat,
    /// Uniform random phase per sample, for escaping stagnation.
    Seeded(u64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GsaOptions {
    pub max_iterations: usize,
    /// Relative change of the error metric below which the loop stops.
    pub convergence_tolerance: f64,
    pub initial_phase: InitialPhase,
}

impl Default for GsaOptions {
    fn default() -> Self {
        Self {
            max_iterations: 300,
            convergence_tolerance: 1e-10,
            initial_phase: InitialPhase::Flat,
        }
    }
}

impl GsaOptions {
    fn validate(&self) -> Result<()> {
        if self.max_iterations < 1 {
            return Err(Error::InvalidInput("max_iterations must be >= 1".to_string()));
        }
        if !(self.convergence_tolerance > 0.0) {
            return Err(Error::InvalidInput(format!(
                "convergence tolerance must be positive, got {}",
                self.convergence_tolerance
            )));
        }
        Ok(())
    }
}

/// A measured (or simulated) output-plane intensity grid.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityFrame {
    pub samples_per_side: usize,
    pub pitch: f64,
    values: Vec<f64>,
}

impl IntensityFrame {
    pub fn new(samples_per_side: usize, pitch: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() != samples_per_side * samples_per_side {
            return Err(Error::InvalidGrid(format!(
                "intensity array length {} does not match {}^2",
                values.len(),
                samples_per_side
            )));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidInput(
                "intensities must be finite and non-negative".to_string(),
            ));
        }
        Ok(Self { samples_per_side, pitch, values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn from_field(f: &SampledField) -> Self {
        Self {
            samples_per_side: f.grid().samples_per_side,
            pitch: f.grid().pitch,
            values: f.intensity(),
        }
    }

    /// Load an 8/16-bit grayscale PGM or PNG frame. Values are scaled to
    /// [0, 1]; `dark_level` (same scale) is subtracted and clamped at zero.
    pub fn from_image_file<P: AsRef<Path>>(path: P, pitch: f64, dark_level: f64) -> Result<Self> {
        let img = image::open(path.as_ref())?.into_luma16();
        let (w, h) = img.dimensions();
        if w != h {
            return Err(Error::InvalidGrid(format!(
                "frame {} is {}x{}, expected a square grid",
                path.as_ref().display(),
                w,
                h
            )));
        }
        let values = img
            .pixels()
            .map(|p| (f64::from(p.0[0]) / 65535.0 - dark_level).max(0.0))
            .collect();
        Self::new(w as usize, pitch, values)
    }
}

/// Output of one retrieval run.
#[derive(Debug, Clone)]
pub struct GsaResult {
    pub screen: PhaseScreen,
    /// Final normalized RMS amplitude mismatch at the output plane.
    pub residual: f64,
    /// False when the loop hit `max_iterations` before the error settled.
    pub converged: bool,
    pub iterations: usize,
    /// Error metric after each iteration.
    pub error_history: Vec<f64>,
    /// True when the wrapped in-aperture phase carries 2-pi residues, in
    /// which case no unwrap was applied.
    pub residues_detected: bool,
}

/// Recover the input-plane phase screen from the measured output intensity.
pub fn gsa_retrieve(
    input: &SampledField,
    measured: &IntensityFrame,
    distance: f64,
    medium: &Medium,
    aperture_radius: f64,
    opts: &GsaOptions,
) -> Result<GsaResult> {
    opts.validate()?;
    let grid = *input.grid();
    if measured.samples_per_side != grid.samples_per_side || measured.pitch != grid.pitch {
        return Err(Error::GridMismatch(format!(
            "intensity frame {}x{} @ {} m does not match field grid {}x{} @ {} m",
            measured.samples_per_side,
            measured.samples_per_side,
            measured.pitch,
            grid.samples_per_side,
            grid.samples_per_side,
            grid.pitch
        )));
    }
    let geometry = ApertureGrid::from_grid(&grid, aperture_radius)?;
    let plan = Propagator::new(&grid, distance, medium)?;

    let input_amps = input.amplitudes();
    let mut g: Vec<Complex64> = match opts.initial_phase {
        InitialPhase::Flat => input_amps.to_vec(),
        InitialPhase::Seeded(seed) => {
            let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
            input_amps
                .iter()
                .map(|a| a * Complex64::from_polar(1.0, rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI)))
                .collect()
        }
    };

    let mut target: Vec<f64> = measured.values.iter().map(|v| v.sqrt()).collect();
    let target_power: f64 = target.iter().map(|b| b * b).sum();
    if target_power == 0.0 {
        return Err(Error::InvalidInput("measured intensity is identically zero".to_string()));
    }

    let mut error_history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut forward = plan.apply(&SampledField::new(grid, g.clone())?)?;

    // Match the measured amplitude scale to the forward power once, so the
    // error metric compares shapes rather than exposure.
    let fwd_power: f64 = forward.amplitudes().iter().map(|a| a.norm_sqr()).sum();
    let scale = (fwd_power / target_power).sqrt();
    for b in &mut target {
        *b *= scale;
    }
    let target_norm2: f64 = target.iter().map(|b| b * b).sum();

    loop {
        iterations += 1;
        let g_out = forward.amplitudes();
        let err2: f64 = g_out
            .iter()
            .zip(&target)
            .map(|(a, b)| (a.norm() - b).powi(2))
            .sum();
        let err = (err2 / target_norm2).sqrt();
        let prev = error_history.last().copied();
        error_history.push(err);
        if let Some(p) = prev {
            if (p - err).abs() <= opts.convergence_tolerance * p.max(f64::MIN_POSITIVE) {
                converged = true;
                break;
            }
        }
        if iterations >= opts.max_iterations {
            break;
        }

        // Output-plane projection: keep phase, impose measured amplitude.
        let projected: Vec<Complex64> = g_out
            .iter()
            .zip(&target)
            .map(|(a, &b)| {
                let n = a.norm();
                if n == 0.0 {
                    Complex64::new(b, 0.0)
                } else {
                    a * (b / n)
                }
            })
            .collect();
        let back = plan.apply_inverse(&SampledField::new(grid, projected)?)?;

        // Input-plane projection: keep phase, impose known amplitude.
        g = back
            .amplitudes()
            .iter()
            .zip(input_amps)
            .map(|(b, a)| {
                let n = b.norm();
                if n == 0.0 {
                    Complex64::new(a.norm(), 0.0)
                } else {
                    b * (a.norm() / n)
                }
            })
            .collect();
        forward = plan.apply(&SampledField::new(grid, g.clone())?)?;
    }

    let residual = *error_history.last().unwrap();
    let screen = finish_screen(&g, input_amps, &geometry)?;
    Ok(GsaResult {
        screen: screen.0,
        residual,
        converged,
        iterations,
        error_history,
        residues_detected: screen.1,
    })
}

/// Gauge-fix and package the retrieved phase: remove the global phase
/// against the illumination, unwrap if residue-free, zero the in-aperture
/// mean.
fn finish_screen(
    g: &[Complex64],
    input_amps: &[Complex64],
    geometry: &ApertureGrid,
) -> Result<(PhaseScreen, bool)> {
    let n = geometry.samples_per_side;

    // Phase relative to the illumination, as unit phasors.
    let mut phasor: Vec<Complex64> = g
        .iter()
        .zip(input_amps)
        .map(|(v, a)| {
            let p = v * a.conj();
            let norm = p.norm();
            if norm == 0.0 {
                Complex64::new(1.0, 0.0)
            } else {
                p / norm
            }
        })
        .collect();

    // Amplitude-weighted mean phasor inside the aperture sets the global
    // rotation, keeping wrapped values away from the +-pi seam.
    let mut mean = Complex64::default();
    for row in 0..n {
        for col in 0..n {
            let (r, _) = geometry.polar(row, col);
            if r <= 1.0 {
                mean += input_amps[row * n + col].norm_sqr() * phasor[row * n + col];
            }
        }
    }
    if mean.norm() > 0.0 {
        let rot = (mean / mean.norm()).conj();
        for p in &mut phasor {
            *p *= rot;
        }
    }
    let mut phase: Vec<f64> = phasor.iter().map(|p| p.arg()).collect();

    let residues = has_residues(&phase, geometry);
    if !residues {
        itoh_unwrap(&mut phase, n);
    }

    // Zero-mean gauge over the aperture.
    let mut sum = 0.0;
    let mut count = 0usize;
    for row in 0..n {
        for col in 0..n {
            let (r, _) = geometry.polar(row, col);
            if r <= 1.0 {
                sum += phase[row * n + col];
                count += 1;
            }
        }
    }
    if count > 0 {
        let mean = sum / count as f64;
        for p in &mut phase {
            *p -= mean;
        }
    }
    Ok((PhaseScreen::new(*geometry, phase)?, residues))
}

fn wrap(d: f64) -> f64 {
    d - std::f64::consts::TAU * (d / std::f64::consts::TAU).round()
}

fn has_residues(phase: &[f64], geometry: &ApertureGrid) -> bool {
    let n = geometry.samples_per_side;
    for row in 0..n - 1 {
        for col in 0..n - 1 {
            let inside = [(row, col), (row, col + 1), (row + 1, col), (row + 1, col + 1)]
                .iter()
                .all(|&(r, c)| geometry.polar(r, c).0 <= 1.0);
            if !inside {
                continue;
            }
            let a = phase[row * n + col];
            let b = phase[row * n + col + 1];
            let c = phase[(row + 1) * n + col + 1];
            let d = phase[(row + 1) * n + col];
            let circ = wrap(b - a) + wrap(c - b) + wrap(d - c) + wrap(a - d);
            if (circ / std::f64::consts::TAU).round() as i64 != 0 {
                return true;
            }
        }
    }
    false
}

/// Row/column integration of wrapped differences, outward from the center.
/// Every in-aperture sample connects to the center through in-aperture
/// samples (the aperture is a disk), so the path never crosses garbage.
fn itoh_unwrap(phase: &mut [f64], n: usize) {
    let mid = n / 2;
    // Center row, outward in both directions.
    for col in mid + 1..n {
        let d = wrap(phase[mid * n + col] - phase[mid * n + col - 1]);
        phase[mid * n + col] = phase[mid * n + col - 1] + d;
    }
    for col in (0..mid).rev() {
        let d = wrap(phase[mid * n + col] - phase[mid * n + col + 1]);
        phase[mid * n + col] = phase[mid * n + col + 1] + d;
    }
    // Columns, outward from the center row.
    for col in 0..n {
        for row in mid + 1..n {
            let d = wrap(phase[row * n + col] - phase[(row - 1) * n + col]);
            phase[row * n + col] = phase[(row - 1) * n + col] + d;
        }
        for row in (0..mid).rev() {
            let d = wrap(phase[row * n + col] - phase[(row + 1) * n + col]);
            phase[row * n + col] = phase[(row + 1) * n + col] + d;
        }
    }
}

/// One frame's characterization output.
#[derive(Debug, Clone)]
pub struct FrameRecord {
    pub frame: usize,
    pub spectrum: ZernikeSpectrum,
    /// GSA output-plane residual.
    pub gsa_residual: f64,
    /// RMS of the screen left after removing the fitted modes.
    pub fit_residual_rms: f64,
    pub converged: bool,
    pub residues_detected: bool,
}

/// Ensemble statistics over a frame set.
#[derive(Debug, Clone)]
pub struct FrameStatistics {
    pub records: Vec<FrameRecord>,
    /// Per-index (j, mean, sample std) over frames.
    pub stats: Vec<(u32, f64, f64)>,
}

/// Retrieve and decompose every frame; frames are processed independently
/// (in parallel with the `parallel` feature) and reported in input order.
pub fn characterize_frames(
    frames: &[IntensityFrame],
    input: &SampledField,
    distance: f64,
    medium: &Medium,
    aperture_radius: f64,
    opts: &GsaOptions,
    max_j: u32,
) -> Result<FrameStatistics> {
    if frames.is_empty() {
        return Err(Error::InvalidInput("characterize_frames needs at least one frame".to_string()));
    }
    let grid = input.grid();
    for (i, f) in frames.iter().enumerate() {
        if f.samples_per_side != grid.samples_per_side || f.pitch != grid.pitch {
            return Err(Error::GridMismatch(format!(
                "frame {i} geometry {}x{} @ {} m does not match the input field",
                f.samples_per_side, f.samples_per_side, f.pitch
            )));
        }
    }

    let results: Vec<Result<FrameRecord>> = exec::map_indexed(frames.len(), |i| {
        let gsa = gsa_retrieve(input, &frames[i], distance, medium, aperture_radius, opts)?;
        let dec = decompose(&gsa.screen, max_j)?;
        Ok(FrameRecord {
            frame: i,
            spectrum: dec.spectrum,
            gsa_residual: gsa.residual,
            fit_residual_rms: dec.residual_rms,
            converged: gsa.converged,
            residues_detected: gsa.residues_detected,
        })
    });
    let records: Vec<FrameRecord> = results.into_iter().collect::<Result<_>>()?;

    let mut stats = Vec::with_capacity(max_j as usize);
    for j in 1..=max_j {
        let values: Vec<f64> = records
            .iter()
            .map(|r| r.spectrum.coefficient(j).unwrap_or(0.0))
            .collect();
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        stats.push((j, mean, std));
    }
    Ok(FrameStatistics { records, stats })
}
