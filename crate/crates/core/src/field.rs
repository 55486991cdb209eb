//! Sampled complex optical fields on a square grid.
//!
//! A [`SampledField`] stores one complex amplitude per grid sample, row-major.
//! The field center sits at sample (N/2, N/2); x runs along columns, y along
//! rows, and the azimuthal angle is measured from the +x axis. Those
//! conventions fix the sign of the OAM index and of the odd Zernike terms.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::zernike::PhaseScreen;

/// Square sampling grid with physical pitch and wavelength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub samples_per_side: usize,
    /// Sample spacing in meters.
    pub pitch: f64,
    /// Vacuum wavelength in meters.
    pub wavelength: f64,
}

impl GridSpec {
    pub fn new(samples_per_side: usize, pitch: f64, wavelength: f64) -> Result<Self> {
        if samples_per_side < 16 || samples_per_side % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "samples_per_side must be even and >= 16, got {samples_per_side}"
            )));
        }
        if !(pitch > 0.0) || !pitch.is_finite() {
            return Err(Error::InvalidGrid(format!("pitch must be positive, got {pitch}")));
        }
        if !(wavelength > 0.0) || !wavelength.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "wavelength must be positive, got {wavelength}"
            )));
        }
        Ok(Self { samples_per_side, pitch, wavelength })
    }

    pub fn len(&self) -> usize {
        self.samples_per_side * self.samples_per_side
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Physical (x, y) of a sample, center at (N/2, N/2).
    pub fn position(&self, row: usize, col: usize) -> (f64, f64) {
        let half = (self.samples_per_side / 2) as f64;
        (
            (col as f64 - half) * self.pitch,
            (row as f64 - half) * self.pitch,
        )
    }

    /// Half the grid side length in meters.
    pub fn half_span(&self) -> f64 {
        (self.samples_per_side / 2) as f64 * self.pitch
    }

    /// Largest OAM index the grid can represent without aliasing.
    pub fn max_oam_index(&self) -> i32 {
        (self.samples_per_side / 8) as i32
    }

}

/// Transverse profile used when realizing an OAM mode on a grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeProfile {
    /// Gaussian envelope times exp(i l phi): what a phase-only hologram
    /// imprints on a fundamental Gaussian beam.
    HelicalGaussian,
    /// Adds the (sqrt(2) r / w0)^|l| amplitude factor; shape-invariant under
    /// free propagation.
    LaguerreGaussP0,
}

/// Specification of a single OAM mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeSpec {
    pub oam_index: i32,
    /// Beam waist in meters.
    pub waist: f64,
    pub profile: ModeProfile,
}

impl ModeSpec {
    pub fn new(oam_index: i32, waist: f64, profile: ModeProfile) -> Result<Self> {
        if !(waist > 0.0) || !waist.is_finite() {
            return Err(Error::InvalidInput(format!("waist must be positive, got {waist}")));
        }
        Ok(Self { oam_index, waist, profile })
    }
}

/// A complex field sampled on a [`GridSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct SampledField {
    grid: GridSpec,
    amplitudes: Vec<Complex64>,
}

impl SampledField {
    pub fn new(grid: GridSpec, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "amplitude array length {} does not match {}x{} grid",
                amplitudes.len(),
                grid.samples_per_side,
                grid.samples_per_side
            )));
        }
        Ok(Self { grid, amplitudes })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    /// Total power: sum |a|^2 * pitch^2.
    pub fn power(&self) -> f64 {
        let p: f64 = self.amplitudes.iter().map(|a| a.norm_sqr()).sum();
        p * self.grid.pitch * self.grid.pitch
    }

    /// Per-sample intensity |a|^2.
    pub fn intensity(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Scale amplitudes so that `power()` is 1.
    pub fn normalized(mut self) -> Self {
        let p = self.power();
        if p > 0.0 {
            let s = 1.0 / p.sqrt();
            for a in &mut self.amplitudes {
                *a *= s;
            }
        }
        self
    }

    /// Write raw little-endian f64 (re, im) pairs, row-major, plus a JSON
    /// sidecar `<path>.json` carrying the grid.
    pub fn write_raw<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let path = path.as_ref();
        let mut bytes = Vec::with_capacity(self.amplitudes.len() * 16);
        for a in &self.amplitudes {
            bytes.extend_from_slice(&a.re.to_le_bytes());
            bytes.extend_from_slice(&a.im.to_le_bytes());
        }
        let mut f = fs::File::create(path)?;
        f.write_all(&bytes)?;
        let sidecar = sidecar_path(path);
        fs::write(sidecar, serde_json::to_vec_pretty(&self.grid)?)?;
        Ok(())
    }

    /// Read a field written by [`SampledField::write_raw`].
    pub fn read_raw<P: AsRef<Path>>(path: P) -> Result<Self> {
        let path = path.as_ref();
        let grid: GridSpec = serde_json::from_slice(&fs::read(sidecar_path(path))?)?;
        let mut bytes = Vec::new();
        fs::File::open(path)?.read_to_end(&mut bytes)?;
        if bytes.len() != grid.len() * 16 {
            return Err(Error::InvalidInput(format!(
                "raw field file has {} bytes, expected {}",
                bytes.len(),
                grid.len() * 16
            )));
        }
        let amplitudes = bytes
            .chunks_exact(16)
            .map(|c| {
                Complex64::new(
                    f64::from_le_bytes(c[..8].try_into().unwrap()),
                    f64::from_le_bytes(c[8..].try_into().unwrap()),
                )
            })
            .collect();
        Self::new(grid, amplitudes)
    }
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_os_string();
    s.push(".json");
    s.into()
}

/// Realize an OAM mode on a grid, unit-normalized.
///
/// The phase winds `oam_index * 2pi` around the center; the singular center
/// sample (where the azimuth is undefined) is set to zero for `l != 0`.
pub fn make_mode(spec: &ModeSpec, grid: &GridSpec) -> Result<SampledField> {
    let max = grid.max_oam_index();
    if spec.oam_index.abs() > max {
        return Err(Error::AliasingBound { ell: spec.oam_index, max });
    }
    let n = grid.samples_per_side;
    let ell = spec.oam_index;
    let w0 = spec.waist;
    let profile = spec.profile;
    let pitch = grid.pitch;
    let half = (n / 2) as f64;

    let rows = exec::map_indexed(n, |row| {
        let y = (row as f64 - half) * pitch;
        let mut out = Vec::with_capacity(n);
        for col in 0..n {
            let x = (col as f64 - half) * pitch;
            let r2 = x * x + y * y;
            if ell != 0 && r2 == 0.0 {
                out.push(Complex64::default());
                continue;
            }
            let mut env = (-r2 / (w0 * w0)).exp();
            if profile == ModeProfile::LaguerreGaussP0 && ell != 0 {
                env *= (std::f64::consts::SQRT_2 * r2.sqrt() / w0).powi(ell.abs());
            }
            let phase = ell as f64 * y.atan2(x);
            out.push(Complex64::from_polar(env, phase));
        }
        out
    });
    let amplitudes: Vec<Complex64> = rows.into_iter().flatten().collect();
    Ok(SampledField::new(*grid, amplitudes)?.normalized())
}

/// Discrete inner product `sum conj(f) * g * pitch^2`.
pub fn overlap(f: &SampledField, g: &SampledField) -> Result<Complex64> {
    if f.grid != g.grid {
        return Err(Error::GridMismatch(
            "overlap requires identical GridSpec".to_string(),
        ));
    }
    let mut acc = Complex64::default();
    for (a, b) in f.amplitudes.iter().zip(&g.amplitudes) {
        acc += a.conj() * b;
    }
    Ok(acc * f.grid.pitch * f.grid.pitch)
}

/// Multiply a field pointwise by `exp(i * screen)`.
pub fn apply_phase(f: &SampledField, screen: &PhaseScreen) -> Result<SampledField> {
    if !screen.matches_grid(&f.grid) {
        return Err(Error::GridMismatch(format!(
            "screen geometry {}x{} @ {} m does not match field grid {}x{} @ {} m",
            screen.geometry().samples_per_side,
            screen.geometry().samples_per_side,
            screen.geometry().pitch,
            f.grid.samples_per_side,
            f.grid.samples_per_side,
            f.grid.pitch
        )));
    }
    let amplitudes = f
        .amplitudes
        .iter()
        .zip(screen.phase())
        .map(|(a, &p)| a * Complex64::from_polar(1.0, p))
        .collect();
    SampledField::new(f.grid, amplitudes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zernike::ApertureGrid;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn grid() -> GridSpec {
        GridSpec::new(128, 8.0 * 1e-3 / 128.0, 710e-9).unwrap()
    }

    fn mode(ell: i32) -> SampledField {
        let spec = ModeSpec::new(ell, 1e-3, ModeProfile::HelicalGaussian).unwrap();
        make_mode(&spec, &grid()).unwrap()
    }

    #[test]
    fn grid_invariants_rejected() {
        assert!(GridSpec::new(8, 1e-5, 710e-9).is_err());
        assert!(GridSpec::new(17, 1e-5, 710e-9).is_err());
        assert!(GridSpec::new(64, 0.0, 710e-9).is_err());
        assert!(GridSpec::new(64, 1e-5, -1.0).is_err());
    }

    #[test]
    fn fundamental_mode_peaks_on_axis() {
        let f = mode(0);
        let n = f.grid().samples_per_side;
        let center = f.amplitudes()[(n / 2) * n + n / 2].norm_sqr();
        let max = f.intensity().into_iter().fold(0.0f64, f64::max);
        assert_relative_eq!(center, max, max_relative = 1e-12);
    }

    #[test]
    fn vortex_core_is_dark() {
        let f = mode(2);
        let n = f.grid().samples_per_side;
        assert_eq!(f.amplitudes()[(n / 2) * n + n / 2].norm_sqr(), 0.0);
    }

    #[test]
    fn modes_are_normalized_and_orthogonal() {
        for ell in -5..=5 {
            let f = mode(ell);
            assert!((overlap(&f, &f).unwrap().re - 1.0).abs() < 1e-9);
        }
        // delta-l not a multiple of 4: exact cancellation from the grid's
        // 4-fold symmetry.
        let pairs = [(1, 2), (-3, 3), (0, 1), (-1, 1), (2, 3)];
        for (a, b) in pairs {
            let ov = overlap(&mode(a), &mode(b)).unwrap().norm();
            assert!(ov < 1e-6, "modes l={a} and l={b} overlap {ov}");
        }
    }

    #[test]
    fn mod4_pairs_overlap_shrinks_with_sampling() {
        // delta-l = 4 pairs keep an O((pitch/w0)^2) residual; check the
        // scaling rather than a grid-independent bound.
        let ov_at = |n: usize| {
            let g = GridSpec::new(n, 8.0 * 1e-3 / n as f64, 710e-9).unwrap();
            let mk = |ell| {
                make_mode(&ModeSpec::new(ell, 1e-3, ModeProfile::HelicalGaussian).unwrap(), &g)
                    .unwrap()
            };
            overlap(&mk(-2), &mk(2)).unwrap().norm()
        };
        let coarse = ov_at(64);
        let fine = ov_at(256);
        assert!(fine < coarse / 10.0, "coarse {coarse}, fine {fine}");
        assert!(fine < 1.1e-3);
    }

    #[test]
    fn laguerre_gauss_orthogonality() {
        let g = grid();
        let lg = |ell| {
            make_mode(
                &ModeSpec::new(ell, 1e-3, ModeProfile::LaguerreGaussP0).unwrap(),
                &g,
            )
            .unwrap()
        };
        assert!(overlap(&lg(-3), &lg(3)).unwrap().norm() < 1e-6);
        assert!((overlap(&lg(2), &lg(2)).unwrap().re - 1.0).abs() < 1e-9);
    }

    #[test]
    fn aliasing_bound_rejected() {
        let spec = ModeSpec::new(17, 1e-3, ModeProfile::HelicalGaussian).unwrap();
        assert!(matches!(
            make_mode(&spec, &grid()),
            Err(Error::AliasingBound { ell: 17, .. })
        ));
    }

    #[test]
    fn overlap_rejects_mismatched_grids() {
        let other = GridSpec::new(64, 1e-5, 710e-9).unwrap();
        let spec = ModeSpec::new(0, 1e-3, ModeProfile::HelicalGaussian).unwrap();
        let f = make_mode(&spec, &other).unwrap();
        assert!(overlap(&f, &mode(0)).is_err());
    }

    #[test]
    fn zero_screen_is_identity() {
        let f = mode(1);
        let screen = PhaseScreen::zeros(ApertureGrid {
            samples_per_side: f.grid().samples_per_side,
            pitch: f.grid().pitch,
            aperture_radius: 1e-3,
        });
        let g = apply_phase(&f, &screen).unwrap();
        for (a, b) in f.amplitudes().iter().zip(g.amplitudes()) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn screens_compose_additively() {
        let f = mode(1);
        let geom = ApertureGrid {
            samples_per_side: f.grid().samples_per_side,
            pitch: f.grid().pitch,
            aperture_radius: 3e-3,
        };
        let s1 = crate::zernike::synthesize(
            &crate::zernike::ZernikeSpectrum::new(vec![(4, 0.3)], geom.aperture_radius).unwrap(),
            &geom,
        )
        .unwrap();
        let s2 = crate::zernike::synthesize(
            &crate::zernike::ZernikeSpectrum::new(vec![(2, -0.2)], geom.aperture_radius).unwrap(),
            &geom,
        )
        .unwrap();
        let sum = s1.try_add(&s2).unwrap();
        let seq = apply_phase(&apply_phase(&f, &s1).unwrap(), &s2).unwrap();
        let once = apply_phase(&f, &sum).unwrap();
        for (a, b) in seq.amplitudes().iter().zip(once.amplitudes()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn raw_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("field.c128");
        let f = mode(2);
        f.write_raw(&path).unwrap();
        let g = SampledField::read_raw(&path).unwrap();
        assert_eq!(f, g);
    }

    proptest! {
        #[test]
        fn overlap_is_conjugate_symmetric(seed in 0u64..1000) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
            let g = GridSpec::new(16, 1e-5, 710e-9).unwrap();
            let mk = |rng: &mut rand_chacha::ChaCha12Rng| {
                let amps = (0..g.len())
                    .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                    .collect();
                SampledField::new(g, amps).unwrap()
            };
            let f1 = mk(&mut rng);
            let f2 = mk(&mut rng);
            let a = overlap(&f1, &f2).unwrap();
            let b = overlap(&f2, &f1).unwrap();
            prop_assert!((a - b.conj()).norm() < 1e-12);
        }

        #[test]
        fn apply_phase_preserves_intensity(a4 in -1.0f64..1.0) {
            let f = mode(1);
            let geom = ApertureGrid {
                samples_per_side: f.grid().samples_per_side,
                pitch: f.grid().pitch,
                aperture_radius: 3e-3,
            };
            let s = crate::zernike::synthesize(
                &crate::zernike::ZernikeSpectrum::new(vec![(4, a4)], geom.aperture_radius).unwrap(),
                &geom,
            )
            .unwrap();
            let g = apply_phase(&f, &s).unwrap();
            for (x, y) in f.amplitudes().iter().zip(g.amplitudes()) {
                prop_assert!((x.norm() - y.norm()).abs() < 1e-12);
            }
            prop_assert!((f.power() - g.power()).abs() < 1e-12);
        }
    }
}
