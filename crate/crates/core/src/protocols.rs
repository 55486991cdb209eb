//! QKD protocol analysis: QBER, sifting, secret-key rates and abort
//! thresholds for d-dimensional two-basis protocols and the three-basis
//! d = 2 (six-state) protocol.
//!
//! Rates are asymptotic bits per sifted photon. The d-dimensional two-basis
//! rate is `log2(d) - 2 h_d(Q)` with
//! `h_d(Q) = -Q log2(Q/(d-1)) - (1-Q) log2(1-Q)`; at d = 2 this reduces to
//! `1 - 2 h(Q)`. The six-state rate assumes the symmetrized (depolarizing)
//! channel: `1 - H(1 - 3Q/2, Q/2, Q/2, Q/2)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum::{
    mub_circular, mub_fourier, mub_logical, sample_counts, simulate_detection_set,
    standard_subspace, Basis, ChannelModel, DetectionMatrix,
};

/// Binary Shannon entropy in bits, with 0 log 0 = 0.
pub fn binary_entropy(p: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&p));
    let term = |x: f64| if x > 0.0 { -x * x.log2() } else { 0.0 };
    term(p) + term(1.0 - p)
}

/// Shannon entropy of a distribution, in bits.
pub fn entropy_of(dist: &[f64]) -> Result<f64> {
    let sum: f64 = dist.iter().sum();
    if dist.iter().any(|&p| !(0.0..=1.0 + 1e-12).contains(&p)) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!(
            "not a probability distribution (sum = {sum})"
        )));
    }
    Ok(dist.iter().map(|&p| if p > 0.0 { -p * p.log2() } else { 0.0 }).sum())
}

/// Mean probability of a wrong outcome over same-basis matrices, uniform
/// priors over inputs.
pub fn qber(matrices: &[DetectionMatrix]) -> Result<f64> {
    if matrices.is_empty() {
        return Err(Error::InvalidInput("QBER needs at least one detection matrix".to_string()));
    }
    let mut total = 0.0;
    for m in matrices {
        if m.sent_basis != m.measured_basis {
            return Err(Error::InvalidInput(format!(
                "QBER needs same-basis matrices, got sent {:?} measured {:?}",
                m.sent_basis, m.measured_basis
            )));
        }
        let d = m.dim();
        let wrong: f64 = (0..d).map(|i| 1.0 - m.prob(i, i)).sum();
        total += wrong / d as f64;
    }
    Ok(total / matrices.len() as f64)
}

/// d-ary error entropy h_d.
fn error_entropy(d: usize, q: f64) -> f64 {
    if q <= 0.0 {
        return 0.0;
    }
    -q * (q / (d as f64 - 1.0)).log2() - (1.0 - q) * (1.0 - q).log2()
}

/// Secret-key rate of the d-dimensional two-basis protocol.
pub fn bb84_rate(d: usize, q: f64) -> Result<f64> {
    if d < 2 {
        return Err(Error::InvalidInput("dimension must be >= 2".to_string()));
    }
    if !(0.0..1.0).contains(&q) {
        return Err(Error::InvalidInput(format!("QBER must lie in [0, 1), got {q}")));
    }
    Ok((d as f64).log2() - 2.0 * error_entropy(d, q))
}

/// Secret-key rate of the three-basis d = 2 protocol on a depolarizing
/// channel.
pub fn six_state_rate(q: f64) -> Result<f64> {
    if !(0.0..=2.0 / 3.0).contains(&q) {
        return Err(Error::InvalidInput(format!(
            "six-state QBER must lie in [0, 2/3], got {q}"
        )));
    }
    let dist = [1.0 - 1.5 * q, 0.5 * q, 0.5 * q, 0.5 * q];
    Ok(1.0 - entropy_of(&dist)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProtocolKind {
    Bb84,
    SixState,
}

/// A protocol instance: kind, dimension and its basis set.
#[derive(Debug, Clone)]
pub struct ProtocolSpec {
    pub kind: ProtocolKind,
    pub dimension: usize,
    bases: Vec<Basis>,
}

impl ProtocolSpec {
    /// Two-basis protocol (logical + Fourier) over the standard OAM subspace.
    pub fn bb84(dimension: usize) -> Result<Self> {
        let labels = standard_subspace(dimension)?;
        Self::bb84_with_labels(&labels)
    }

    /// Two-basis protocol over explicit OAM labels.
    pub fn bb84_with_labels(labels: &[i32]) -> Result<Self> {
        Ok(Self {
            kind: ProtocolKind::Bb84,
            dimension: labels.len(),
            bases: vec![mub_logical(labels)?, mub_fourier(labels)?],
        })
    }

    /// Three-basis d = 2 protocol (logical + Fourier + circular).
    pub fn six_state() -> Result<Self> {
        let labels = standard_subspace(2)?;
        Ok(Self {
            kind: ProtocolKind::SixState,
            dimension: 2,
            bases: vec![
                mub_logical(&labels)?,
                mub_fourier(&labels)?,
                mub_circular(&labels)?,
            ],
        })
    }

    pub fn bases(&self) -> &[Basis] {
        &self.bases
    }

    /// Expected fraction of rounds kept by sifting: 1 / number of bases.
    pub fn expected_sift_rate(&self) -> f64 {
        1.0 / self.bases.len() as f64
    }

    fn rate(&self, q: f64) -> Result<f64> {
        match self.kind {
            ProtocolKind::Bb84 => bb84_rate(self.dimension, q),
            ProtocolKind::SixState => six_state_rate(q),
        }
    }

    fn domain_end(&self) -> f64 {
        match self.kind {
            ProtocolKind::Bb84 => (self.dimension as f64 - 1.0) / self.dimension as f64,
            ProtocolKind::SixState => 2.0 / 3.0,
        }
    }
}

/// Smallest positive root of the rate formula, found by bisection.
pub fn threshold(spec: &ProtocolSpec) -> f64 {
    let mut lo = 1e-12;
    let mut hi = spec.domain_end() - 1e-12;
    debug_assert!(spec.rate(lo).unwrap() > 0.0);
    debug_assert!(spec.rate(hi).unwrap() < 0.0);
    while hi - lo > 1e-9 {
        let mid = 0.5 * (lo + hi);
        if spec.rate(mid).unwrap() > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Sifted outcomes and the realized sift rate.
#[derive(Debug, Clone, PartialEq)]
pub struct SiftResult {
    pub kept: Vec<u16>,
    pub sift_rate: f64,
}

/// Keep outcomes of rounds where both parties used the same basis.
pub fn sift(alice_bases: &[u8], bob_bases: &[u8], outcomes: &[u16]) -> Result<SiftResult> {
    if alice_bases.len() != bob_bases.len() || alice_bases.len() != outcomes.len() {
        return Err(Error::InvalidInput(format!(
            "length mismatch: alice {}, bob {}, outcomes {}",
            alice_bases.len(),
            bob_bases.len(),
            outcomes.len()
        )));
    }
    if alice_bases.is_empty() {
        return Err(Error::InvalidInput("sift needs at least one round".to_string()));
    }
    let kept: Vec<u16> = alice_bases
        .iter()
        .zip(bob_bases)
        .zip(outcomes)
        .filter(|((a, b), _)| a == b)
        .map(|(_, &o)| o)
        .collect();
    let sift_rate = kept.len() as f64 / alice_bases.len() as f64;
    Ok(SiftResult { kept, sift_rate })
}

/// Where the detection matrices of a protocol run come from.
pub enum MatrixSource<'a> {
    /// Simulate same-basis matrices through a physical channel.
    Channel(&'a ChannelModel),
    /// Use measured/constructed same-basis matrices directly.
    Matrices(&'a [DetectionMatrix]),
}

/// Full analysis record of one protocol run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProtocolReport {
    pub protocol: ProtocolKind,
    pub dimension: usize,
    pub qber: f64,
    /// Binomial standard error of the QBER estimate; absent for analytic
    /// (infinite-shot) runs.
    pub qber_sigma: Option<f64>,
    pub sift_rate: f64,
    /// Bits per sifted photon; absent when the run aborts.
    pub key_rate: Option<f64>,
    pub threshold: f64,
    pub abort: bool,
}

/// Evaluate a protocol against a channel or a set of measured matrices.
///
/// With `shots > 0` each same-basis matrix is multinomially sampled and the
/// QBER estimated from counts; `shots == 0` uses the matrix probabilities
/// directly. Abort is declared when `qber >= threshold` (boundary aborts).
pub fn run_protocol<R: Rng + ?Sized>(
    spec: &ProtocolSpec,
    source: MatrixSource<'_>,
    shots: u64,
    rng: &mut R,
) -> Result<(ProtocolReport, Vec<DetectionMatrix>)> {
    let matrices: Vec<DetectionMatrix> = match source {
        MatrixSource::Channel(channel) => {
            let refs: Vec<&Basis> = spec.bases.iter().collect();
            let grid = simulate_detection_set(&refs, &refs, channel)?;
            grid.into_iter()
                .enumerate()
                .map(|(i, mut row)| row.swap_remove(i))
                .collect()
        }
        MatrixSource::Matrices(given) => {
            if given.is_empty() {
                return Err(Error::InvalidInput("no detection matrices supplied".to_string()));
            }
            for m in given {
                if m.dim() != spec.dimension {
                    return Err(Error::InvalidInput(format!(
                        "matrix dimension {} does not match protocol dimension {}",
                        m.dim(),
                        spec.dimension
                    )));
                }
            }
            given.to_vec()
        }
    };

    let (q, sigma) = if shots > 0 {
        let mut wrong = 0u64;
        let mut total = 0u64;
        for m in &matrices {
            let counts = sample_counts(m, shots, rng)?;
            for (i, row) in counts.iter().enumerate() {
                wrong += row.iter().sum::<u64>() - row[i];
                total += shots;
            }
        }
        let q = wrong as f64 / total as f64;
        let sigma = (q * (1.0 - q) / total as f64).sqrt();
        (q, Some(sigma))
    } else {
        (qber(&matrices)?, None)
    };

    let q_threshold = threshold(spec);
    let abort = q >= q_threshold;
    let key_rate = if abort { None } else { Some(spec.rate(q)?) };
    Ok((
        ProtocolReport {
            protocol: spec.kind,
            dimension: spec.dimension,
            qber: q,
            qber_sigma: sigma,
            sift_rate: spec.expected_sift_rate(),
            key_rate,
            threshold: q_threshold,
            abort,
        },
        matrices,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{GridSpec, ModeProfile};
    use crate::propagation::Medium;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    // Frozen against an independent high-precision evaluation of the rate
    // formulas (mpmath, 30 digits).
    const H_AT_00657: f64 = 0.349668009859;
    const R2_AT_00657: f64 = 0.300663980283;
    const R3_AT_01173: f64 = 0.307263151144;
    const R6S_AT_00635: f64 = 0.395277318002;
    const THR_D2: f64 = 0.110027864439;
    const THR_D3: f64 = 0.159461504842;
    const THR_D4: f64 = 0.189289624915;
    const THR_SIX: f64 = 0.126193083277;

    #[test]
    fn binary_entropy_anchors() {
        assert_eq!(binary_entropy(0.5), 1.0);
        assert_eq!(binary_entropy(0.0), 0.0);
        assert_eq!(binary_entropy(1.0), 0.0);
        assert!((binary_entropy(0.0657) - H_AT_00657).abs() < 1e-9);
        assert!((binary_entropy(0.0657) - 0.3497).abs() < 1e-4);
    }

    #[test]
    fn entropy_of_rejects_bad_distributions() {
        assert!(entropy_of(&[0.5, 0.4]).is_err());
        assert!(entropy_of(&[1.2, -0.2]).is_err());
        assert!((entropy_of(&[0.25; 4]).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn key_rates_reproduce_published_numbers() {
        assert!((bb84_rate(2, 0.0657).unwrap() - R2_AT_00657).abs() < 1e-9);
        assert!((bb84_rate(2, 0.0657).unwrap() - 0.301).abs() < 1e-3);
        assert!((bb84_rate(3, 0.1173).unwrap() - R3_AT_01173).abs() < 1e-9);
        assert!((bb84_rate(3, 0.1173).unwrap() - 0.307).abs() < 1e-3);
        assert!((six_state_rate(0.0635).unwrap() - R6S_AT_00635).abs() < 1e-9);
        assert!((six_state_rate(0.0635).unwrap() - 0.395).abs() < 1e-3);
    }

    #[test]
    fn error_free_capacity_is_log2_d() {
        assert_eq!(bb84_rate(2, 0.0).unwrap(), 1.0);
        assert_eq!(bb84_rate(4, 0.0).unwrap(), 2.0);
        assert_eq!(six_state_rate(0.0).unwrap(), 1.0);
    }

    #[test]
    fn printed_formula_equivalence_at_d2() {
        for q in [0.0, 0.01, 0.0657, 0.1, 0.2, 0.4] {
            let direct = 1.0 - 2.0 * binary_entropy(q);
            assert!((bb84_rate(2, q).unwrap() - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn thresholds_reproduce_published_numbers() {
        let cases = [
            (ProtocolSpec::bb84(2).unwrap(), THR_D2, 0.1100),
            (ProtocolSpec::bb84(3).unwrap(), THR_D3, 0.1595),
            (ProtocolSpec::bb84(4).unwrap(), THR_D4, 0.1893),
            (ProtocolSpec::six_state().unwrap(), THR_SIX, 0.1262),
        ];
        for (spec, frozen, published) in cases {
            let t = threshold(&spec);
            assert!((t - frozen).abs() < 1e-6, "threshold {t} vs frozen {frozen}");
            assert!((t - published).abs() < 5e-4);
        }
    }

    #[test]
    fn rate_is_strictly_decreasing_up_to_threshold() {
        for spec in [ProtocolSpec::bb84(2).unwrap(), ProtocolSpec::bb84(4).unwrap()] {
            let t = threshold(&spec);
            let samples = 50;
            let mut prev = f64::INFINITY;
            for i in 0..samples {
                let q = 1e-6 + (t - 2e-6) * i as f64 / (samples - 1) as f64;
                let r = spec.rate(q).unwrap();
                assert!(r < prev);
                assert!(r > 0.0, "rate positive below threshold");
                prev = r;
            }
        }
    }

    #[test]
    fn six_state_domain_enforced() {
        assert!(six_state_rate(0.7).is_err());
        assert!(six_state_rate(-0.1).is_err());
    }

    #[test]
    fn qber_anchors() {
        let identity = DetectionMatrix::with_uniform_error("logical", vec![-1, 1], 0.0).unwrap();
        assert_eq!(qber(&[identity]).unwrap(), 0.0);

        let uniform =
            DetectionMatrix::with_uniform_error("logical", vec![-2, -1, 1, 2], 0.75).unwrap();
        assert!((qber(&[uniform]).unwrap() - 0.75).abs() < 1e-12);

        let diag = DetectionMatrix::with_uniform_error("logical", vec![-1, 1], 1.0 - 0.9343).unwrap();
        let both = [diag.clone(), DetectionMatrix::with_uniform_error("fourier", vec![-1, 1], 1.0 - 0.9343).unwrap()];
        assert!((qber(&both).unwrap() - 0.0657).abs() < 1e-12);

        assert!(qber(&[]).is_err());
        let crossed = DetectionMatrix::new(
            "logical",
            "fourier",
            vec![-1, 1],
            vec![0.5, 0.5, 0.5, 0.5],
        )
        .unwrap();
        assert!(qber(&[crossed]).is_err());
    }

    #[test]
    fn sift_rates_match_basis_counts() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        use rand::Rng;
        let n = 1_000_000usize;
        for n_bases in [2u8, 3u8] {
            let alice: Vec<u8> = (0..n).map(|_| rng.gen_range(0..n_bases)).collect();
            let bob: Vec<u8> = (0..n).map(|_| rng.gen_range(0..n_bases)).collect();
            let outcomes: Vec<u16> = vec![0; n];
            let res = sift(&alice, &bob, &outcomes).unwrap();
            let expect = 1.0 / n_bases as f64;
            let sigma = (expect * (1.0 - expect) / n as f64).sqrt();
            assert!(
                (res.sift_rate - expect).abs() < 3.0 * sigma,
                "sift rate {} vs {expect}",
                res.sift_rate
            );
        }
    }

    #[test]
    fn sift_identical_bases_keeps_everything() {
        let bases = vec![1u8; 100];
        let outcomes: Vec<u16> = (0..100).collect();
        let res = sift(&bases, &bases, &outcomes).unwrap();
        assert_eq!(res.sift_rate, 1.0);
        assert_eq!(res.kept, outcomes);
    }

    #[test]
    fn sift_rejects_length_mismatch() {
        assert!(sift(&[0, 1], &[0], &[0, 0]).is_err());
    }

    #[test]
    fn identity_channel_run_gives_full_rate() {
        let grid = GridSpec::new(64, 10.0 * 1e-3 / 64.0, 710e-9).unwrap();
        let channel = ChannelModel::clear(grid, 1e-3, ModeProfile::LaguerreGaussP0, 0.0, Medium::vacuum());
        let spec = ProtocolSpec::bb84(2).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        let (report, matrices) =
            run_protocol(&spec, MatrixSource::Channel(&channel), 100_000, &mut rng).unwrap();
        assert_eq!(matrices.len(), 2);
        assert_eq!(report.qber, 0.0);
        assert!(!report.abort);
        assert_eq!(report.key_rate, Some(1.0));
        assert_eq!(report.sift_rate, 0.5);
    }

    #[test]
    fn d4_above_threshold_aborts() {
        let labels = standard_subspace(4).unwrap();
        let q = 0.2977;
        let ms = [
            DetectionMatrix::with_uniform_error("logical", labels.clone(), q).unwrap(),
            DetectionMatrix::with_uniform_error("fourier", labels, q).unwrap(),
        ];
        let spec = ProtocolSpec::bb84(4).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        let (report, _) = run_protocol(&spec, MatrixSource::Matrices(&ms), 0, &mut rng).unwrap();
        assert!(report.abort);
        assert!(report.key_rate.is_none());
        assert!((report.qber - q).abs() < 1e-12);
    }

    #[test]
    fn d3_below_threshold_yields_published_rate() {
        let labels = standard_subspace(3).unwrap();
        let q = 0.1173;
        let ms = [
            DetectionMatrix::with_uniform_error("logical", labels.clone(), q).unwrap(),
            DetectionMatrix::with_uniform_error("fourier", labels, q).unwrap(),
        ];
        let spec = ProtocolSpec::bb84(3).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(42);
        let (report, _) =
            run_protocol(&spec, MatrixSource::Matrices(&ms), 100_000, &mut rng).unwrap();
        assert!(!report.abort);
        let r = report.key_rate.unwrap();
        assert!((r - 0.307).abs() < 2e-3, "rate {r}");
        assert!(report.qber_sigma.unwrap() > 0.0);
    }

    #[test]
    fn abort_boundary_is_inclusive() {
        let spec = ProtocolSpec::bb84(2).unwrap();
        let t = threshold(&spec);
        let ms = [DetectionMatrix::with_uniform_error("logical", vec![-1, 1], t).unwrap()];
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        let (report, _) = run_protocol(&spec, MatrixSource::Matrices(&ms), 0, &mut rng).unwrap();
        assert!(report.abort);
    }

    #[test]
    fn six_state_spec_has_three_bases() {
        let spec = ProtocolSpec::six_state().unwrap();
        assert_eq!(spec.bases().len(), 3);
        assert!((spec.expected_sift_rate() - 1.0 / 3.0).abs() < 1e-15);
    }
}
