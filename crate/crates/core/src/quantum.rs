//! Finite-dimensional states, mutually unbiased bases, optical channel
//! simulation and photon-counting statistics.
//!
//! Basis states are abstract d-dimensional vectors over a set of OAM labels.
//! [`simulate_detection`] realizes each sent state as a field superposition,
//! pushes it through a (possibly turbulent) channel, and projects onto the
//! ideal received modes of the measured basis: the reference for outcome i
//! is the measured state propagated through the clear channel, which matches
//! a hologram-plus-single-mode-fiber projection. Probabilities are
//! renormalized over the measured basis (post-selection on detection).

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::field::{apply_phase, make_mode, overlap, GridSpec, ModeProfile, ModeSpec, SampledField};
use crate::propagation::{Medium, Propagator};
use crate::zernike::PhaseScreen;

const ORTHO_TOL: f64 = 1e-12;

/// A normalized d-dimensional state over the logical (OAM) basis.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::InvalidInput("state vector needs at least one amplitude".to_string()));
        }
        let norm2: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm2 - 1.0).abs() > ORTHO_TOL {
            return Err(Error::InvalidInput(format!(
                "state vector norm^2 = {norm2} is not 1 within {ORTHO_TOL}"
            )));
        }
        Ok(Self { amplitudes })
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    /// Inner product <self|other>.
    pub fn inner(&self, other: &StateVector) -> Complex64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }
}

/// An orthonormal basis labeled by OAM values.
#[derive(Debug, Clone, PartialEq)]
pub struct Basis {
    label: String,
    oam_labels: Vec<i32>,
    states: Vec<StateVector>,
}

impl Basis {
    pub fn new(label: impl Into<String>, oam_labels: Vec<i32>, states: Vec<StateVector>) -> Result<Self> {
        let d = oam_labels.len();
        if d < 2 {
            return Err(Error::InvalidInput("basis dimension must be >= 2".to_string()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for &l in &oam_labels {
            if !seen.insert(l) {
                return Err(Error::InvalidInput(format!("duplicate OAM label l={l}")));
            }
        }
        if states.len() != d || states.iter().any(|s| s.dim() != d) {
            return Err(Error::InvalidInput(format!("basis needs {d} states of dimension {d}")));
        }
        for i in 0..d {
            for k in i..d {
                let g = states[i].inner(&states[k]);
                let expect = if i == k { 1.0 } else { 0.0 };
                if (g - expect).norm() > ORTHO_TOL {
                    return Err(Error::InvalidInput(format!(
                        "states {i} and {k} are not orthonormal: <i|k> = {g}"
                    )));
                }
            }
        }
        Ok(Self { label: label.into(), oam_labels, states })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.oam_labels.len()
    }

    pub fn oam_labels(&self) -> &[i32] {
        &self.oam_labels
    }

    pub fn states(&self) -> &[StateVector] {
        &self.states
    }
}

/// The OAM subspace used for dimension d: 0 is included for odd d, skipped
/// for even d (d=2 -> {-1,+1}; d=3 -> {-1,0,+1}; d=4 -> {-2,-1,+1,+2}).
pub fn standard_subspace(d: usize) -> Result<Vec<i32>> {
    if d < 2 {
        return Err(Error::InvalidInput("dimension must be >= 2".to_string()));
    }
    let mut labels: Vec<i32> = if d % 2 == 1 {
        let h = (d / 2) as i32;
        (-h..=h).collect()
    } else {
        let h = (d / 2) as i32;
        (-h..=h).filter(|&l| l != 0).collect()
    };
    labels.sort_unstable();
    Ok(labels)
}

/// Computational basis labeled by OAM values.
pub fn mub_logical(oam_labels: &[i32]) -> Result<Basis> {
    let d = oam_labels.len();
    let states = (0..d)
        .map(|i| {
            let mut a = vec![Complex64::default(); d];
            a[i] = Complex64::new(1.0, 0.0);
            StateVector::new(a)
        })
        .collect::<Result<_>>()?;
    Basis::new("logical", oam_labels.to_vec(), states)
}

/// Fourier basis: state j has amplitudes omega_d^(i j) / sqrt(d) with
/// omega_d = exp(i 2 pi / d).
pub fn mub_fourier(oam_labels: &[i32]) -> Result<Basis> {
    let d = oam_labels.len();
    let root = 1.0 / (d as f64).sqrt();
    let states = (0..d)
        .map(|j| {
            let a = (0..d)
                .map(|i| {
                    let phase = std::f64::consts::TAU * (i * j) as f64 / d as f64;
                    Complex64::from_polar(root, phase)
                })
                .collect();
            StateVector::new(a)
        })
        .collect::<Result<_>>()?;
    Basis::new("fourier", oam_labels.to_vec(), states)
}

/// Third d=2 basis: (|l0> +- i |l1>)/sqrt(2), unbiased against both the
/// logical and the Fourier basis.
pub fn mub_circular(oam_labels: &[i32]) -> Result<Basis> {
    if oam_labels.len() != 2 {
        return Err(Error::InvalidInput("the circular basis exists only for d = 2".to_string()));
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let states = vec![
        StateVector::new(vec![Complex64::new(s, 0.0), Complex64::new(0.0, s)])?,
        StateVector::new(vec![Complex64::new(s, 0.0), Complex64::new(0.0, -s)])?,
    ];
    Basis::new("circular", oam_labels.to_vec(), states)
}

/// Row-stochastic probabilities of measuring outcome (column) given the sent
/// state (row).
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionMatrix {
    pub sent_basis: String,
    pub measured_basis: String,
    pub oam_labels: Vec<i32>,
    probs: Vec<f64>,
}

impl DetectionMatrix {
    pub fn new(
        sent_basis: impl Into<String>,
        measured_basis: impl Into<String>,
        oam_labels: Vec<i32>,
        probs: Vec<f64>,
    ) -> Result<Self> {
        let d = oam_labels.len();
        if probs.len() != d * d {
            return Err(Error::InvalidInput(format!(
                "probability matrix has {} entries, expected {}",
                probs.len(),
                d * d
            )));
        }
        for (i, row) in probs.chunks(d).enumerate() {
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidInput(format!(
                    "row {i} sums to {sum}, expected 1 within 1e-9"
                )));
            }
            if row.iter().any(|&p| !(0.0..=1.0 + 1e-12).contains(&p)) {
                return Err(Error::InvalidInput(format!("row {i} has entries outside [0, 1]")));
            }
        }
        Ok(Self {
            sent_basis: sent_basis.into(),
            measured_basis: measured_basis.into(),
            oam_labels,
            probs,
        })
    }

    /// Matrix with uniform symbol error rate `q`: diagonal 1 - q,
    /// off-diagonal q/(d-1).
    pub fn with_uniform_error(
        basis_label: impl Into<String> + Clone,
        oam_labels: Vec<i32>,
        q: f64,
    ) -> Result<Self> {
        let d = oam_labels.len();
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::InvalidInput(format!("error rate must lie in [0, 1], got {q}")));
        }
        let off = if d > 1 { q / (d - 1) as f64 } else { 0.0 };
        let mut probs = vec![off; d * d];
        for i in 0..d {
            probs[i * d + i] = 1.0 - q;
        }
        Self::new(basis_label.clone(), basis_label, oam_labels, probs)
    }

    pub fn dim(&self) -> usize {
        self.oam_labels.len()
    }

    pub fn prob(&self, sent: usize, measured: usize) -> f64 {
        self.probs[sent * self.dim() + measured]
    }

    pub fn row(&self, sent: usize) -> &[f64] {
        let d = self.dim();
        &self.probs[sent * d..(sent + 1) * d]
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    /// CSV with a JSON header line:
    /// `# {"sent_basis":...,"measured_basis":...,"oam_labels":[...]}`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let header = serde_json::json!({
            "sent_basis": self.sent_basis,
            "measured_basis": self.measured_basis,
            "d": self.dim(),
            "oam_labels": self.oam_labels,
        });
        writeln!(w, "# {header}")?;
        let d = self.dim();
        for row in self.probs.chunks(d) {
            let line: Vec<String> = row.iter().map(|p| p.to_string()).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut lines = BufReader::new(reader).lines();
        let header_line = lines
            .next()
            .ok_or_else(|| Error::InvalidInput("empty detection-matrix file".to_string()))??;
        let json = header_line
            .strip_prefix('#')
            .ok_or_else(|| Error::InvalidInput("missing JSON header line".to_string()))?
            .trim();
        #[derive(Deserialize)]
        struct Header {
            sent_basis: String,
            measured_basis: String,
            oam_labels: Vec<i32>,
        }
        let header: Header = serde_json::from_str(json)?;
        let mut probs = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            for v in line.split(',') {
                probs.push(v.trim().parse::<f64>().map_err(|e| {
                    Error::InvalidInput(format!("bad probability value {v:?}: {e}"))
                })?);
            }
        }
        Self::new(header.sent_basis, header.measured_basis, header.oam_labels, probs)
    }
}

/// Physical description of the optical link: mode family, screens, path.
#[derive(Debug, Clone)]
pub struct ChannelModel {
    pub grid: GridSpec,
    pub waist: f64,
    pub profile: ModeProfile,
    pub distance: f64,
    pub medium: Medium,
    /// Screen ensemble; empty means a clear channel. Probabilities are
    /// averaged over the ensemble before row renormalization.
    pub screens: Vec<PhaseScreen>,
}

impl ChannelModel {
    /// Clear channel (no turbulence).
    pub fn clear(grid: GridSpec, waist: f64, profile: ModeProfile, distance: f64, medium: Medium) -> Self {
        Self { grid, waist, profile, distance, medium, screens: Vec::new() }
    }
}

/// Raw (unnormalized) outcome powers for each sent state of each sent basis,
/// summed over the screen ensemble.
fn accumulate_powers(
    sent_bases: &[&Basis],
    measured_bases: &[&Basis],
    channel: &ChannelModel,
) -> Result<Vec<Vec<Vec<Vec<f64>>>>> {
    let labels = sent_bases[0].oam_labels().to_vec();
    for b in sent_bases.iter().chain(measured_bases.iter()) {
        if b.oam_labels() != labels.as_slice() {
            return Err(Error::InvalidInput(format!(
                "basis {:?} does not share the OAM labels {:?}",
                b.label(),
                labels
            )));
        }
    }
    let d = labels.len();

    // One field per OAM label, propagated clear-channel references once.
    let mut modes = BTreeMap::new();
    for &l in &labels {
        let spec = ModeSpec::new(l, channel.waist, channel.profile)?;
        modes.insert(l, make_mode(&spec, &channel.grid)?);
    }
    let plan = Propagator::new(&channel.grid, channel.distance, &channel.medium)?;
    let mut propagated_modes = BTreeMap::new();
    for (&l, f) in &modes {
        propagated_modes.insert(l, plan.apply(f)?);
    }

    let superpose = |state: &StateVector, table: &BTreeMap<i32, SampledField>| -> Result<SampledField> {
        let mut amps = vec![Complex64::default(); channel.grid.len()];
        for (c, &l) in state.amplitudes().iter().zip(&labels) {
            for (a, m) in amps.iter_mut().zip(table[&l].amplitudes()) {
                *a += c * m;
            }
        }
        SampledField::new(channel.grid, amps)
    };

    // References: measured states propagated through the clear channel.
    let mut references: Vec<Vec<SampledField>> = Vec::with_capacity(measured_bases.len());
    for basis in measured_bases {
        let refs = basis
            .states()
            .iter()
            .map(|s| superpose(s, &propagated_modes))
            .collect::<Result<Vec<_>>>()?;
        references.push(refs);
    }

    // Sent fields at the input plane.
    let mut sent_fields: Vec<Vec<SampledField>> = Vec::with_capacity(sent_bases.len());
    for basis in sent_bases {
        let fs = basis
            .states()
            .iter()
            .map(|s| superpose(s, &modes))
            .collect::<Result<Vec<_>>>()?;
        sent_fields.push(fs);
    }

    let draws: Vec<Option<&PhaseScreen>> = if channel.screens.is_empty() {
        vec![None]
    } else {
        channel.screens.iter().map(Some).collect()
    };

    // Per-draw contributions, reduced in draw order for determinism.
    let contributions = exec::map_slice(&draws, |screen| -> Result<Vec<Vec<Vec<Vec<f64>>>>> {
        let mut acc =
            vec![vec![vec![vec![0.0f64; d]; d]; measured_bases.len()]; sent_bases.len()];
        for (si, fields) in sent_fields.iter().enumerate() {
            for (row, field) in fields.iter().enumerate() {
                let distorted = match screen {
                    Some(s) => apply_phase(field, s)?,
                    None => field.clone(),
                };
                let received = plan.apply(&distorted)?;
                for (mi, refs) in references.iter().enumerate() {
                    for (col, reference) in refs.iter().enumerate() {
                        let amp = overlap(reference, &received)?;
                        acc[si][mi][row][col] += amp.norm_sqr();
                    }
                }
            }
        }
        Ok(acc)
    });

    let mut total =
        vec![vec![vec![vec![0.0f64; d]; d]; measured_bases.len()]; sent_bases.len()];
    for contribution in contributions {
        let contribution = contribution?;
        for (t_s, c_s) in total.iter_mut().zip(&contribution) {
            for (t_m, c_m) in t_s.iter_mut().zip(c_s) {
                for (t_row, c_row) in t_m.iter_mut().zip(c_m) {
                    for (t, c) in t_row.iter_mut().zip(c_row) {
                        *t += c;
                    }
                }
            }
        }
    }
    Ok(total)
}

fn normalize_rows(
    sent: &Basis,
    measured: &Basis,
    raw: &[Vec<f64>],
) -> Result<DetectionMatrix> {
    let d = sent.dim();
    let mut probs = vec![0.0f64; d * d];
    for (row, powers) in raw.iter().enumerate() {
        let sum: f64 = powers.iter().sum();
        if sum <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "sent state {row} of basis {:?} produced zero detection power",
                sent.label()
            )));
        }
        for (col, &p) in powers.iter().enumerate() {
            probs[row * d + col] = (p / sum).clamp(0.0, 1.0);
        }
    }
    DetectionMatrix::new(sent.label(), measured.label(), sent.oam_labels().to_vec(), probs)
}

/// Simulate the detection matrix for one (sent, measured) basis pair.
pub fn simulate_detection(
    sent: &Basis,
    measured: &Basis,
    channel: &ChannelModel,
) -> Result<DetectionMatrix> {
    let raw = accumulate_powers(&[sent], &[measured], channel)?;
    normalize_rows(sent, measured, &raw[0][0])
}

/// Simulate every (sent, measured) pair in one pass over the ensemble;
/// result\[s\]\[m\] pairs `sent_bases[s]` with `measured_bases[m]`.
pub fn simulate_detection_set(
    sent_bases: &[&Basis],
    measured_bases: &[&Basis],
    channel: &ChannelModel,
) -> Result<Vec<Vec<DetectionMatrix>>> {
    if sent_bases.is_empty() || measured_bases.is_empty() {
        return Err(Error::InvalidInput("need at least one sent and one measured basis".to_string()));
    }
    let raw = accumulate_powers(sent_bases, measured_bases, channel)?;
    sent_bases
        .iter()
        .enumerate()
        .map(|(si, sent)| {
            measured_bases
                .iter()
                .enumerate()
                .map(|(mi, measured)| normalize_rows(sent, measured, &raw[si][mi]))
                .collect()
        })
        .collect()
}

/// Multinomially sample `shots_per_state` outcomes from every row.
/// Row sums equal `shots_per_state` exactly.
pub fn sample_counts<R: Rng + ?Sized>(
    m: &DetectionMatrix,
    shots_per_state: u64,
    rng: &mut R,
) -> Result<Vec<Vec<u64>>> {
    if shots_per_state < 1 {
        return Err(Error::InvalidInput("shots_per_state must be >= 1".to_string()));
    }
    let d = m.dim();
    let mut counts = vec![vec![0u64; d]; d];
    for (row, out) in counts.iter_mut().enumerate() {
        let mut remaining = shots_per_state;
        let mut prob_left = 1.0f64;
        for col in 0..d {
            if remaining == 0 {
                break;
            }
            if col == d - 1 {
                out[col] = remaining;
                break;
            }
            let p = (m.prob(row, col) / prob_left).clamp(0.0, 1.0);
            let x = Binomial::new(remaining, p)
                .map_err(|e| Error::InvalidInput(format!("binomial sampling: {e}")))?
                .sample(rng);
            out[col] = x;
            remaining -= x;
            prob_left = (prob_left - m.prob(row, col)).max(0.0);
        }
    }
    Ok(counts)
}

/// Heralded-source counting rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceStats {
    pub singles_rate_signal: f64,
    pub singles_rate_idler: f64,
    pub coincidence_rate: f64,
    pub coincidence_window: f64,
}

impl SourceStats {
    pub fn new(
        singles_rate_signal: f64,
        singles_rate_idler: f64,
        coincidence_rate: f64,
        coincidence_window: f64,
    ) -> Result<Self> {
        for (name, v) in [
            ("singles_rate_signal", singles_rate_signal),
            ("singles_rate_idler", singles_rate_idler),
            ("coincidence_rate", coincidence_rate),
            ("coincidence_window", coincidence_window),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidInput(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(Self { singles_rate_signal, singles_rate_idler, coincidence_rate, coincidence_window })
    }
}

/// Accidental-coincidence rate: singles_signal * singles_idler * window.
pub fn accidental_rate(stats: &SourceStats) -> f64 {
    stats.singles_rate_signal * stats.singles_rate_idler * stats.coincidence_window
}
