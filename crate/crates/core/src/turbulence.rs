//! Stochastic Zernike-composed phase screens with AR(1) temporal evolution.
//!
//! A [`TurbulenceModel`] lists per-index Gaussian statistics for the Zernike
//! coefficients. Single draws are independent Gaussians; sequences evolve
//! each coefficient as a stationary first-order autoregressive process with a
//! caller-chosen correlation time. Piston (j = 1) is excluded from screens: a
//! global phase is unobservable.

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::zernike::{synthesize, ApertureGrid, PhaseScreen, ZernikeSpectrum};

/// Gaussian statistics for one Zernike coefficient, in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoeffStat {
    pub j: u32,
    pub mean: f64,
    pub std: f64,
}

/// Per-index coefficient statistics plus the screen update rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurbulenceModel {
    pub coefficients: Vec<CoeffStat>,
    /// Screen update rate in Hz; sets the AR(1) time step.
    pub update_rate: f64,
    pub rng_seed: u64,
}

impl TurbulenceModel {
    pub fn new(coefficients: Vec<CoeffStat>, update_rate: f64, rng_seed: u64) -> Result<Self> {
        if !(update_rate > 0.0) || !update_rate.is_finite() {
            return Err(Error::InvalidInput(format!(
                "update rate must be positive, got {update_rate}"
            )));
        }
        let mut seen = std::collections::BTreeSet::new();
        for c in &coefficients {
            if c.j < 2 {
                return Err(Error::InvalidInput(format!(
                    "coefficient index j={} not allowed: screens exclude piston (j=1)",
                    c.j
                )));
            }
            if !(c.std >= 0.0) || !c.std.is_finite() || !c.mean.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "coefficient j={} has invalid statistics (mean {}, std {})",
                    c.j, c.mean, c.std
                )));
            }
            if !seen.insert(c.j) {
                return Err(Error::InvalidInput(format!("duplicate coefficient index j={}", c.j)));
            }
        }
        Ok(Self { coefficients, update_rate, rng_seed })
    }

    /// Astigmatism-dominant example model, then tip/tilt, then the rest.
    /// The numbers are illustrative placeholders for a real calibration
    /// obtained via frame characterization, not measured data.
    pub fn illustrative() -> Self {
        let stats = [
            (2, 0.20),
            (3, 0.18),
            (4, 0.35),
            (5, 0.12),
            (6, 0.30),
            (7, 0.05),
            (8, 0.05),
            (9, 0.05),
            (10, 0.05),
        ];
        Self {
            coefficients: stats
                .iter()
                .map(|&(j, std)| CoeffStat { j, mean: 0.0, std })
                .collect(),
            update_rate: 100.0,
            rng_seed: 0,
        }
    }

    /// Seeded generator for this model.
    pub fn rng(&self) -> ChaCha12Rng {
        use rand::SeedableRng;
        ChaCha12Rng::seed_from_u64(self.rng_seed)
    }

    /// Independent stream for concurrent generation under one seed.
    pub fn rng_with_stream(&self, stream: u64) -> ChaCha12Rng {
        let mut rng = self.rng();
        rng.set_stream(stream);
        rng
    }
}

/// Draw one spectrum: each coefficient independently Gaussian(mean, std),
/// in the order the model lists them.
pub fn sample_spectrum<R: Rng + ?Sized>(
    model: &TurbulenceModel,
    aperture_radius: f64,
    rng: &mut R,
) -> Result<ZernikeSpectrum> {
    let entries = model
        .coefficients
        .iter()
        .map(|c| {
            let z: f64 = rng.sample(StandardNormal);
            (c.j, c.mean + c.std * z)
        })
        .collect();
    ZernikeSpectrum::new(entries, aperture_radius)
}

/// Draw one screen together with the spectrum that produced it.
pub fn sample_screen<R: Rng + ?Sized>(
    model: &TurbulenceModel,
    geometry: &ApertureGrid,
    rng: &mut R,
) -> Result<(PhaseScreen, ZernikeSpectrum)> {
    let spectrum = sample_spectrum(model, geometry.aperture_radius, rng)?;
    let screen = synthesize(&spectrum, geometry)?;
    Ok((screen, spectrum))
}

/// AR(1) coefficient sequence. Frame 0 is drawn from the stationary
/// distribution; subsequent frames use
/// `x[k+1] = mean + rho (x[k] - mean) + std sqrt(1 - rho^2) eps`
/// with `rho = exp(-dt / correlation_time)` and `dt = 1 / update_rate`,
/// so the lag-1 autocorrelation is exactly `rho` and every frame keeps the
/// stationary marginal.
pub fn spectrum_sequence<R: Rng + ?Sized>(
    model: &TurbulenceModel,
    aperture_radius: f64,
    n_frames: usize,
    correlation_time: f64,
    rng: &mut R,
) -> Result<Vec<ZernikeSpectrum>> {
    if n_frames == 0 {
        return Err(Error::InvalidInput("n_frames must be >= 1".to_string()));
    }
    if !(correlation_time > 0.0) {
        return Err(Error::InvalidInput(format!(
            "correlation time must be positive, got {correlation_time}"
        )));
    }
    let dt = 1.0 / model.update_rate;
    let rho = (-dt / correlation_time).exp();
    let noise_scale = (1.0 - rho * rho).max(0.0).sqrt();

    let k = model.coefficients.len();
    let mut state = vec![0.0f64; k];
    let mut frames = Vec::with_capacity(n_frames);
    for frame in 0..n_frames {
        for (c, x) in model.coefficients.iter().zip(state.iter_mut()) {
            let z: f64 = rng.sample(StandardNormal);
            if frame == 0 {
                *x = c.mean + c.std * z;
            } else {
                *x = c.mean + rho * (*x - c.mean) + c.std * noise_scale * z;
            }
        }
        let entries = model
            .coefficients
            .iter()
            .zip(&state)
            .map(|(c, &x)| (c.j, x))
            .collect();
        frames.push(ZernikeSpectrum::new(entries, aperture_radius)?);
    }
    Ok(frames)
}

/// AR(1) screen sequence; see [`spectrum_sequence`].
pub fn screen_sequence<R: Rng + ?Sized>(
    model: &TurbulenceModel,
    geometry: &ApertureGrid,
    n_frames: usize,
    correlation_time: f64,
    rng: &mut R,
) -> Result<Vec<PhaseScreen>> {
    let spectra = spectrum_sequence(model, geometry.aperture_radius, n_frames, correlation_time, rng)?;
    spectra.iter().map(|s| synthesize(s, geometry)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zernike::evaluate;
    use rand::SeedableRng;

    fn geom() -> ApertureGrid {
        ApertureGrid::new(64, 2.0 * 1e-3 / 64.0, 1e-3).unwrap()
    }

    fn model(entries: &[(u32, f64, f64)]) -> TurbulenceModel {
        TurbulenceModel::new(
            entries
                .iter()
                .map(|&(j, mean, std)| CoeffStat { j, mean, std })
                .collect(),
            100.0,
            7,
        )
        .unwrap()
    }

    #[test]
    fn piston_rejected() {
        assert!(TurbulenceModel::new(
            vec![CoeffStat { j: 1, mean: 0.0, std: 0.1 }],
            100.0,
            0
        )
        .is_err());
    }

    #[test]
    fn degenerate_draws() {
        let m = model(&[(2, 0.0, 0.0), (4, 0.5, 0.0)]);
        let (screen, spectrum) = sample_screen(&m, &geom(), &mut m.rng()).unwrap();
        assert_eq!(spectrum.coefficient(2), Some(0.0));
        assert_eq!(spectrum.coefficient(4), Some(0.5));
        // Screen equals 0.5 Z4 inside the aperture.
        let g = geom();
        for row in 0..g.samples_per_side {
            for col in 0..g.samples_per_side {
                let (r, phi) = g.polar(row, col);
                let expect = if r <= 1.0 { 0.5 * evaluate(4, r, phi).unwrap() } else { 0.0 };
                let got = screen.phase()[row * g.samples_per_side + col];
                assert!((got - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn flat_when_all_zero() {
        let m = model(&[(2, 0.0, 0.0), (6, 0.0, 0.0)]);
        let (screen, _) = sample_screen(&m, &geom(), &mut m.rng()).unwrap();
        assert!(screen.phase().iter().all(|&p| p == 0.0));
    }

    #[test]
    fn draw_statistics_match_model() {
        let m = model(&[(6, 0.0, 0.2)]);
        let mut rng = m.rng();
        let n = 10_000;
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        for _ in 0..n {
            let s = sample_spectrum(&m, 1e-3, &mut rng).unwrap();
            let a = s.coefficient(6).unwrap();
            sum += a;
            sum2 += a * a;
        }
        let mean = sum / n as f64;
        let std = ((sum2 - sum * sum / n as f64) / (n as f64 - 1.0)).sqrt();
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((0.19..=0.21).contains(&std), "std {std}");
    }

    #[test]
    fn infinite_correlation_freezes_sequence() {
        let m = model(&[(2, 0.1, 0.3), (4, 0.0, 0.2)]);
        let frames =
            spectrum_sequence(&m, 1e-3, 50, f64::INFINITY, &mut m.rng()).unwrap();
        for f in &frames[1..] {
            assert_eq!(f.entries, frames[0].entries);
        }
    }

    #[test]
    fn tiny_correlation_decorrelates_frames() {
        let m = model(&[(4, 0.0, 0.3)]);
        // tau = 1 / (update_rate * 1e6): rho = exp(-1e6) = 0.
        let tau = 1.0 / (m.update_rate * 1e6);
        let frames = spectrum_sequence(&m, 1e-3, 10_000, tau, &mut m.rng()).unwrap();
        let xs: Vec<f64> = frames.iter().map(|f| f.coefficient(4).unwrap()).collect();
        assert!(lag1_correlation(&xs).abs() < 0.01);
    }

    #[test]
    fn lag1_autocorrelation_matches_closed_form() {
        let m = model(&[(4, 0.0, 0.3)]);
        let tau = 0.05;
        let rho = (-(1.0 / m.update_rate) / tau).exp();
        let frames = spectrum_sequence(&m, 1e-3, 10_000, tau, &mut m.rng()).unwrap();
        let xs: Vec<f64> = frames.iter().map(|f| f.coefficient(4).unwrap()).collect();
        let got = lag1_correlation(&xs);
        assert!((got - rho).abs() < 0.05, "lag-1 {got} vs rho {rho}");
    }

    #[test]
    fn sequences_are_seed_deterministic() {
        let m = model(&[(2, 0.0, 0.2), (6, 0.1, 0.1)]);
        let a = spectrum_sequence(&m, 1e-3, 20, 0.1, &mut m.rng()).unwrap();
        let b = spectrum_sequence(&m, 1e-3, 20, 0.1, &mut m.rng()).unwrap();
        assert_eq!(a, b);
        let mut other = m.rng_with_stream(1);
        let c = spectrum_sequence(&m, 1e-3, 20, 0.1, &mut other).unwrap();
        assert_ne!(a, c);
    }

    /// Stationarity sanity: the marginal of a_4 at frame 0 and at frame 31,
    /// sampled across 10^4 independent sequences, agree with each other
    /// (two-sample KS) and with the model Gaussian (one-sample KS) at the
    /// 1% level.
    #[test]
    fn sequence_is_stationary() {
        let m = model(&[(4, 0.1, 0.3)]);
        let n_seq = 10_000;
        let mut first = Vec::with_capacity(n_seq);
        let mut later = Vec::with_capacity(n_seq);
        for s in 0..n_seq {
            let mut rng = ChaCha12Rng::seed_from_u64(1000 + s as u64);
            let frames = spectrum_sequence(&m, 1e-3, 32, 0.05, &mut rng).unwrap();
            first.push(frames[0].coefficient(4).unwrap());
            later.push(frames[31].coefficient(4).unwrap());
        }
        first.sort_by(|a, b| a.partial_cmp(b).unwrap());
        later.sort_by(|a, b| a.partial_cmp(b).unwrap());

        use statrs::distribution::{ContinuousCDF, Normal};
        let normal = Normal::new(0.1, 0.3).unwrap();
        let one_sample_d = |xs: &[f64]| {
            xs.iter()
                .enumerate()
                .map(|(i, &x)| {
                    let f = normal.cdf(x);
                    let lo = i as f64 / xs.len() as f64;
                    let hi = (i + 1) as f64 / xs.len() as f64;
                    (f - lo).abs().max((hi - f).abs())
                })
                .fold(0.0f64, f64::max)
        };
        // alpha = 0.01 critical values.
        let c1 = 1.63 / (n_seq as f64).sqrt();
        assert!(one_sample_d(&first) < c1);
        assert!(one_sample_d(&later) < c1);

        let d2 = two_sample_ks(&first, &later);
        let c2 = 1.63 * (2.0 / n_seq as f64).sqrt();
        assert!(d2 < c2, "two-sample KS {d2} vs critical {c2}");
    }

    fn lag1_correlation(xs: &[f64]) -> f64 {
        let n = xs.len();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        let cov = xs
            .windows(2)
            .map(|w| (w[0] - mean) * (w[1] - mean))
            .sum::<f64>()
            / (n - 1) as f64;
        cov / var
    }

    fn two_sample_ks(a: &[f64], b: &[f64]) -> f64 {
        // Both slices sorted.
        let (mut i, mut j) = (0usize, 0usize);
        let mut d = 0.0f64;
        while i < a.len() && j < b.len() {
            if a[i] <= b[j] {
                i += 1;
            } else {
                j += 1;
            }
            let fa = i as f64 / a.len() as f64;
            let fb = j as f64 / b.len() as f64;
            d = d.max((fa - fb).abs());
        }
        d
    }
}
