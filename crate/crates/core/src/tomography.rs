//! Single-qubit state and process tomography by linear inversion, plus the
//! trace-ratio process fidelity.
//!
//! The qubit convention maps the first OAM label of the d = 2 subspace to
//! |0> and the second to |1>; the three-basis outcome frequencies then give
//! the Bloch components directly (logical -> z, Fourier -> x, circular ->
//! y). Linear inversion keeps the estimators exact on noiseless data but may
//! produce non-physical (negative-eigenvalue) process matrices on noisy
//! data; those are flagged, not rejected.

use nalgebra::{DMatrix, DVector, Matrix2, Matrix4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum::{mub_circular, mub_fourier, mub_logical, simulate_detection_set, standard_subspace, ChannelModel};

pub type DensityMatrix = Matrix2<Complex64>;

const C0: Complex64 = Complex64::new(0.0, 0.0);
const C1: Complex64 = Complex64::new(1.0, 0.0);
const CI: Complex64 = Complex64::new(0.0, 1.0);

/// Pauli operator sigma_k, k = 0 (identity), 1 (x), 2 (y), 3 (z).
pub fn pauli(k: usize) -> Matrix2<Complex64> {
    match k {
        0 => Matrix2::new(C1, C0, C0, C1),
        1 => Matrix2::new(C0, C1, C1, C0),
        2 => Matrix2::new(C0, -CI, CI, C0),
        3 => Matrix2::new(C1, C0, C0, -C1),
        _ => panic!("Pauli index must be 0..=3"),
    }
}

/// Outcome frequencies of one state measured in the three d = 2 bases.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SixStateFrequencies {
    /// P(|0>), P(|1>) in the logical basis.
    pub logical: [f64; 2],
    /// P(|+>), P(|->) in the Fourier basis.
    pub superposition: [f64; 2],
    /// P(|+i>), P(|-i>) in the circular basis.
    pub circular: [f64; 2],
}

/// Linear-inversion state estimate rho = (I + s . sigma)/2 from the three
/// expectation values.
pub fn state_tomography(freqs: &SixStateFrequencies) -> Result<DensityMatrix> {
    for (name, pair) in [
        ("logical", freqs.logical),
        ("superposition", freqs.superposition),
        ("circular", freqs.circular),
    ] {
        let sum = pair[0] + pair[1];
        if (sum - 1.0).abs() > 1e-9 || pair.iter().any(|&p| !(0.0..=1.0 + 1e-12).contains(&p)) {
            return Err(Error::InvalidInput(format!(
                "{name} frequencies {pair:?} are not a normalized pair"
            )));
        }
    }
    let sx = freqs.superposition[0] - freqs.superposition[1];
    let sy = freqs.circular[0] - freqs.circular[1];
    let sz = freqs.logical[0] - freqs.logical[1];
    let mut rho = pauli(0).map(|v| v * Complex64::new(0.5, 0.0));
    rho += pauli(1).map(|v| v * Complex64::new(0.5 * sx, 0.0));
    rho += pauli(2).map(|v| v * Complex64::new(0.5 * sy, 0.0));
    rho += pauli(3).map(|v| v * Complex64::new(0.5 * sz, 0.0));
    Ok(rho)
}

/// Process matrix chi over the Pauli basis:
/// eps(rho) = sum_mn chi_mn sigma_m rho sigma_n^dag.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessMatrix {
    chi: Matrix4<Complex64>,
}

impl ProcessMatrix {
    pub fn new(chi: Matrix4<Complex64>) -> Result<Self> {
        let defect = hermiticity_defect(&chi);
        if defect > 1e-9 {
            return Err(Error::InvalidInput(format!(
                "process matrix is not Hermitian within 1e-9 (defect {defect:.3e})"
            )));
        }
        Ok(Self { chi })
    }

    pub fn entries(&self) -> &Matrix4<Complex64> {
        &self.chi
    }

    /// chi of the identity channel: chi_00 = 1.
    pub fn identity() -> Self {
        let mut chi = Matrix4::zeros();
        chi[(0, 0)] = C1;
        Self { chi }
    }

    /// chi of conjugation by a unitary U = sum_m c_m sigma_m:
    /// chi_mn = c_m conj(c_n).
    pub fn from_unitary(u: &Matrix2<Complex64>) -> Self {
        let mut c = [C0; 4];
        for (m, coeff) in c.iter_mut().enumerate() {
            // c_m = Tr[sigma_m^dag U] / 2; Paulis are Hermitian.
            *coeff = (pauli(m) * u).trace() * Complex64::new(0.5, 0.0);
        }
        let mut chi = Matrix4::zeros();
        for m in 0..4 {
            for n in 0..4 {
                chi[(m, n)] = c[m] * c[n].conj();
            }
        }
        Self { chi }
    }

    /// Apply the channel to a density matrix.
    pub fn apply(&self, rho: &DensityMatrix) -> DensityMatrix {
        let mut out = Matrix2::zeros();
        for m in 0..4 {
            for n in 0..4 {
                if self.chi[(m, n)] == C0 {
                    continue;
                }
                out += (pauli(m) * rho * pauli(n).adjoint()).map(|v| v * self.chi[(m, n)]);
            }
        }
        out
    }

    /// |chi - chi^dag| largest entry.
    pub fn hermiticity_defect(&self) -> f64 {
        hermiticity_defect(&self.chi)
    }

    /// Largest entry of |sum_mn chi_mn sigma_n^dag sigma_m - I|; zero for a
    /// trace-preserving channel.
    pub fn trace_preservation_defect(&self) -> f64 {
        let mut acc: Matrix2<Complex64> = Matrix2::zeros();
        for m in 0..4 {
            for n in 0..4 {
                acc += (pauli(n).adjoint() * pauli(m)).map(|v| v * self.chi[(m, n)]);
            }
        }
        let diff = acc - pauli(0);
        diff.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Smallest eigenvalue of the (Hermitian) chi; negative values mean the
    /// linear inversion left the physical cone.
    pub fn min_eigenvalue(&self) -> f64 {
        let sym = self.chi.map(|v| v) + self.chi.adjoint();
        let eig = nalgebra::SymmetricEigen::new(sym.map(|v| v * Complex64::new(0.5, 0.0)));
        eig.eigenvalues.iter().fold(f64::INFINITY, |m, &v| m.min(v))
    }

    /// JSON as nested rows of [re, im] pairs.
    pub fn to_json(&self) -> serde_json::Value {
        let rows: Vec<Vec<[f64; 2]>> = (0..4)
            .map(|m| (0..4).map(|n| [self.chi[(m, n)].re, self.chi[(m, n)].im]).collect())
            .collect();
        serde_json::json!({ "basis": ["I", "X", "Y", "Z"], "chi": rows })
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let rows: Vec<Vec<[f64; 2]>> = serde_json::from_value(
            value
                .get("chi")
                .ok_or_else(|| Error::InvalidInput("missing chi field".to_string()))?
                .clone(),
        )?;
        if rows.len() != 4 || rows.iter().any(|r| r.len() != 4) {
            return Err(Error::InvalidInput("chi must be 4x4".to_string()));
        }
        let mut chi = Matrix4::zeros();
        for (m, row) in rows.iter().enumerate() {
            for (n, &[re, im]) in row.iter().enumerate() {
                chi[(m, n)] = Complex64::new(re, im);
            }
        }
        Self::new(chi)
    }
}

fn hermiticity_defect(chi: &Matrix4<Complex64>) -> f64 {
    let diff = chi - chi.adjoint();
    diff.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

/// Standard linear-inversion chi reconstruction from four linearly
/// independent input states and their measured outputs.
pub fn process_tomography(
    inputs: &[DensityMatrix],
    outputs: &[DensityMatrix],
) -> Result<ProcessMatrix> {
    if inputs.len() != 4 || outputs.len() != 4 {
        return Err(Error::InvalidInput(format!(
            "process tomography needs exactly 4 input/output pairs, got {}/{}",
            inputs.len(),
            outputs.len()
        )));
    }
    // 16 linear equations: (sigma_m rho_k sigma_n)_{ij} chi_mn = out_k[ij].
    let mut a = DMatrix::<Complex64>::zeros(16, 16);
    let mut b = DVector::<Complex64>::zeros(16);
    let mut row = 0;
    for (rho, out) in inputs.iter().zip(outputs) {
        for i in 0..2 {
            for j in 0..2 {
                for m in 0..4 {
                    for n in 0..4 {
                        a[(row, 4 * m + n)] = (pauli(m) * rho * pauli(n).adjoint())[(i, j)];
                    }
                }
                b[row] = out[(i, j)];
                row += 1;
            }
        }
    }
    let lu = a.lu();
    let solution = lu.solve(&b).ok_or_else(|| {
        Error::SingularSystem("input states do not span the operator space".to_string())
    })?;
    let mut chi = Matrix4::zeros();
    for m in 0..4 {
        for n in 0..4 {
            chi[(m, n)] = solution[4 * m + n];
        }
    }
    // Symmetrize away numerical Hermiticity dust.
    let chi = (chi + chi.adjoint()).map(|v| v * Complex64::new(0.5, 0.0));
    ProcessMatrix::new(chi)
}

/// Trace-ratio process fidelity Tr[chi_exp chi_th] / Tr[chi_th chi_th].
pub fn process_fidelity(chi_exp: &ProcessMatrix, chi_th: &ProcessMatrix) -> Result<f64> {
    let denom = (chi_th.chi * chi_th.chi).trace();
    if denom.norm() < 1e-300 {
        return Err(Error::InvalidInput("reference process matrix has zero norm".to_string()));
    }
    let num = (chi_exp.chi * chi_th.chi).trace();
    Ok(num.re / denom.re)
}

/// The four default linear-inversion inputs: |0><0|, |1><1|, |+><+|, |+i><+i|.
pub fn default_input_states() -> [DensityMatrix; 4] {
    let half = Complex64::new(0.5, 0.0);
    let half_i = Complex64::new(0.0, 0.5);
    [
        Matrix2::new(C1, C0, C0, C0),
        Matrix2::new(C0, C0, C0, C1),
        Matrix2::new(half, half, half, half),
        Matrix2::new(half, -half_i, half_i, half),
    ]
}

/// Result of characterizing a simulated channel.
#[derive(Debug, Clone)]
pub struct ChannelTomography {
    pub chi: ProcessMatrix,
    /// Fidelity against the identity channel.
    pub fidelity_vs_identity: f64,
    pub trace_preservation_defect: f64,
    pub min_eigenvalue: f64,
}

/// Reconstruct the qubit process matrix of an optical channel from
/// three-basis detection data over the standard d = 2 subspace. This is the
/// tomographic use of the three-basis protocol: its detection matrices
/// contain every input/outcome frequency the reconstruction needs.
pub fn channel_process_matrix(channel: &ChannelModel) -> Result<ChannelTomography> {
    let labels = standard_subspace(2)?;
    let bases = [
        mub_logical(&labels)?,
        mub_fourier(&labels)?,
        mub_circular(&labels)?,
    ];
    let refs: Vec<&_> = bases.iter().collect();
    let grid = simulate_detection_set(&refs, &refs, channel)?;

    // Input k of sent basis s has measured-basis m frequencies in row k of
    // grid[s][m]. The four default inputs are (s, k) = (0,0), (0,1), (1,0),
    // (2,0).
    let freqs = |s: usize, k: usize| -> SixStateFrequencies {
        SixStateFrequencies {
            logical: [grid[s][0].prob(k, 0), grid[s][0].prob(k, 1)],
            superposition: [grid[s][1].prob(k, 0), grid[s][1].prob(k, 1)],
            circular: [grid[s][2].prob(k, 0), grid[s][2].prob(k, 1)],
        }
    };
    let outputs = [
        state_tomography(&freqs(0, 0))?,
        state_tomography(&freqs(0, 1))?,
        state_tomography(&freqs(1, 0))?,
        state_tomography(&freqs(2, 0))?,
    ];
    let chi = process_tomography(&default_input_states(), &outputs)?;
    let fidelity_vs_identity = process_fidelity(&chi, &ProcessMatrix::identity())?;
    let trace_preservation_defect = chi.trace_preservation_defect();
    let min_eigenvalue = chi.min_eigenvalue();
    Ok(ChannelTomography {
        chi,
        fidelity_vs_identity,
        trace_preservation_defect,
        min_eigenvalue,
    })
}
