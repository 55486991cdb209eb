//! Zernike polynomials: index bookkeeping, evaluation, synthesis of phase
//! screens and least-squares decomposition.
//!
//! Indices follow `j = 1 + (n(n+2) + m)/2` with signed azimuthal degree `m`.
//! Under this formula every positive `j` maps to exactly one `(n, m)` pair.
//!
//! Branch convention: for the negative-`m` member of a `(n, |m|)` pair the
//! trigonometric factor follows the parity of `j` (even -> cos(|m| phi),
//! odd -> sin(|m| phi)); the positive-`m` partner takes the complementary
//! branch. For odd `n` the two members have opposite parity, so this is the
//! plain parity rule; for even `n` both members share parity and the
//! complement keeps the set orthonormal. With the 1/pi disk weight the
//! polynomials here are orthonormal, e.g. Z2 = 2r cos(phi), Z4 = sqrt(6) r^2
//! cos(2 phi), Z5 = sqrt(3)(2r^2 - 1), Z6 = sqrt(6) r^2 sin(2 phi).

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::field::GridSpec;

/// A radial/azimuthal degree pair with its linear index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZernikeIndex {
    pub n: u32,
    pub m: i32,
    pub j: u32,
}

/// Map a linear index to its `(n, m)` pair.
pub fn index_to_nm(j: u32) -> Result<ZernikeIndex> {
    if j == 0 {
        return Err(Error::InvalidInput("Zernike index j must be >= 1".to_string()));
    }
    let target = 2 * (i64::from(j) - 1);
    let mut n: i64 = 0;
    loop {
        let m = target - n * (n + 2);
        if m.abs() <= n {
            return Ok(ZernikeIndex {
                n: n as u32,
                m: m as i32,
                j,
            });
        }
        n += 1;
    }
}

/// Map a valid `(n, m)` pair to its linear index.
pub fn nm_to_index(n: u32, m: i32) -> Result<u32> {
    validate_pair(n, m)?;
    let j = 1 + (i64::from(n) * (i64::from(n) + 2) + i64::from(m)) / 2;
    Ok(j as u32)
}

fn validate_pair(n: u32, m: i32) -> Result<()> {
    if m.unsigned_abs() > n || (i64::from(n) - i64::from(m).abs()) % 2 != 0 {
        return Err(Error::InvalidInput(format!(
            "invalid Zernike degree pair (n={n}, m={m}): need |m| <= n and n - |m| even"
        )));
    }
    Ok(())
}

fn factorial(k: u32) -> f64 {
    (1..=u64::from(k)).map(|v| v as f64).product()
}

/// Radial polynomial R_n^{|m|}(r) via the alternating factorial sum.
pub fn radial_poly(n: u32, m: i32, r: f64) -> Result<f64> {
    validate_pair(n, m)?;
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::InvalidInput(format!(
            "radial coordinate must lie in [0, 1], got {r}"
        )));
    }
    Ok(radial_terms(n, m.unsigned_abs()).eval_radial(r))
}

/// Precomputed monomial expansion of one Zernike term.
#[derive(Debug, Clone)]
struct Term {
    norm: f64,
    m_abs: u32,
    cos_branch: bool,
    /// (coefficient, power of r) pairs of the radial polynomial.
    monomials: Vec<(f64, u32)>,
}

fn radial_terms(n: u32, m_abs: u32) -> Term {
    let kmax = (n - m_abs) / 2;
    let monomials = (0..=kmax)
        .map(|k| {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let c = sign * factorial(n - k)
                / (factorial(k) * factorial((n + m_abs) / 2 - k) * factorial((n - m_abs) / 2 - k));
            (c, n - 2 * k)
        })
        .collect();
    Term {
        norm: 0.0,
        m_abs,
        cos_branch: true,
        monomials,
    }
}

impl Term {
    fn eval_radial(&self, r: f64) -> f64 {
        self.monomials
            .iter()
            .map(|&(c, p)| c * r.powi(p as i32))
            .sum()
    }

    fn eval(&self, r: f64, phi: f64) -> f64 {
        let radial = self.eval_radial(r);
        if self.m_abs == 0 {
            self.norm * radial
        } else if self.cos_branch {
            self.norm * radial * (self.m_abs as f64 * phi).cos()
        } else {
            self.norm * radial * (self.m_abs as f64 * phi).sin()
        }
    }
}

fn cos_branch(idx: &ZernikeIndex) -> bool {
    let even = idx.j % 2 == 0;
    if idx.n % 2 == 0 && idx.m > 0 {
        !even
    } else {
        even
    }
}

fn term_for(idx: &ZernikeIndex) -> Term {
    let mut t = radial_terms(idx.n, idx.m.unsigned_abs());
    t.norm = if idx.m == 0 {
        (f64::from(idx.n) + 1.0).sqrt()
    } else {
        (2.0 * (f64::from(idx.n) + 1.0)).sqrt()
    };
    t.cos_branch = cos_branch(idx);
    t
}

/// Evaluate Z_j at normalized radius `r` in [0, 1] and azimuth `phi`.
pub fn evaluate(j: u32, r: f64, phi: f64) -> Result<f64> {
    let idx = index_to_nm(j)?;
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::InvalidInput(format!(
            "radial coordinate must lie in [0, 1], got {r}"
        )));
    }
    Ok(term_for(&idx).eval(r, phi))
}

/// Modal content of a phase screen: (j, a_j) entries, coefficients in radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZernikeSpectrum {
    pub entries: Vec<(u32, f64)>,
    /// Aperture radius the normalized radius refers to, in meters.
    pub aperture_radius: f64,
}

impl ZernikeSpectrum {
    pub fn new(entries: Vec<(u32, f64)>, aperture_radius: f64) -> Result<Self> {
        if !(aperture_radius > 0.0) || !aperture_radius.is_finite() {
            return Err(Error::InvalidInput(format!(
                "aperture radius must be positive, got {aperture_radius}"
            )));
        }
        let mut seen = std::collections::BTreeSet::new();
        for &(j, a) in &entries {
            if j == 0 {
                return Err(Error::InvalidInput("Zernike index j must be >= 1".to_string()));
            }
            if !a.is_finite() {
                return Err(Error::InvalidInput(format!("coefficient a_{j} is not finite")));
            }
            if !seen.insert(j) {
                return Err(Error::InvalidInput(format!("duplicate Zernike index j={j}")));
            }
        }
        Ok(Self { entries, aperture_radius })
    }

    pub fn coefficient(&self, j: u32) -> Option<f64> {
        self.entries.iter().find(|&&(jj, _)| jj == j).map(|&(_, a)| a)
    }

    /// CSV rows `j,n,m,a_j` with a header line.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "j,n,m,a_j")?;
        for &(j, a) in &self.entries {
            let idx = index_to_nm(j)?;
            writeln!(w, "{},{},{},{}", j, idx.n, idx.m, a)?;
        }
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R, aperture_radius: f64) -> Result<Self> {
        let mut text = String::new();
        let mut r = reader;
        r.read_to_string(&mut text)?;
        let mut entries = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with("j,") {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 4 {
                return Err(Error::InvalidInput(format!(
                    "spectrum CSV line {} has {} fields, expected 4",
                    lineno + 1,
                    fields.len()
                )));
            }
            let j: u32 = fields[0]
                .parse()
                .map_err(|e| Error::InvalidInput(format!("bad j on line {}: {e}", lineno + 1)))?;
            let a: f64 = fields[3]
                .parse()
                .map_err(|e| Error::InvalidInput(format!("bad a_j on line {}: {e}", lineno + 1)))?;
            entries.push((j, a));
        }
        Self::new(entries, aperture_radius)
    }
}

/// Grid geometry for phase screens: a [`GridSpec`] without the wavelength,
/// plus the aperture radius used for decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApertureGrid {
    pub samples_per_side: usize,
    pub pitch: f64,
    /// Radius of the unit disk the Zernike basis lives on, in meters.
    pub aperture_radius: f64,
}

impl ApertureGrid {
    pub fn new(samples_per_side: usize, pitch: f64, aperture_radius: f64) -> Result<Self> {
        if samples_per_side < 16 || samples_per_side % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "samples_per_side must be even and >= 16, got {samples_per_side}"
            )));
        }
        if !(pitch > 0.0) || !(aperture_radius > 0.0) {
            return Err(Error::InvalidGrid(
                "pitch and aperture_radius must be positive".to_string(),
            ));
        }
        Ok(Self { samples_per_side, pitch, aperture_radius })
    }

    pub fn from_grid(grid: &GridSpec, aperture_radius: f64) -> Result<Self> {
        Self::new(grid.samples_per_side, grid.pitch, aperture_radius)
    }

    pub fn len(&self) -> usize {
        self.samples_per_side * self.samples_per_side
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Normalized radius and azimuth of a sample; `r > 1` means outside.
    pub fn polar(&self, row: usize, col: usize) -> (f64, f64) {
        let half = (self.samples_per_side / 2) as f64;
        let x = (col as f64 - half) * self.pitch;
        let y = (row as f64 - half) * self.pitch;
        ((x * x + y * y).sqrt() / self.aperture_radius, y.atan2(x))
    }
}

/// Real-valued phase samples in radians on an [`ApertureGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseScreen {
    geometry: ApertureGrid,
    phase: Vec<f64>,
}

impl PhaseScreen {
    pub fn new(geometry: ApertureGrid, phase: Vec<f64>) -> Result<Self> {
        if phase.len() != geometry.len() {
            return Err(Error::InvalidGrid(format!(
                "phase array length {} does not match {}^2 grid",
                phase.len(),
                geometry.samples_per_side
            )));
        }
        if phase.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidInput("phase screen contains non-finite samples".to_string()));
        }
        Ok(Self { geometry, phase })
    }

    pub fn zeros(geometry: ApertureGrid) -> Self {
        let len = geometry.len();
        Self { geometry, phase: vec![0.0; len] }
    }

    pub fn geometry(&self) -> &ApertureGrid {
        &self.geometry
    }

    pub fn phase(&self) -> &[f64] {
        &self.phase
    }

    pub fn matches_grid(&self, grid: &GridSpec) -> bool {
        self.geometry.samples_per_side == grid.samples_per_side && self.geometry.pitch == grid.pitch
    }

    /// Pointwise sum of two screens with identical geometry.
    pub fn try_add(&self, other: &PhaseScreen) -> Result<PhaseScreen> {
        if self.geometry != other.geometry {
            return Err(Error::GridMismatch("screen geometries differ".to_string()));
        }
        let phase = self
            .phase
            .iter()
            .zip(&other.phase)
            .map(|(a, b)| a + b)
            .collect();
        PhaseScreen::new(self.geometry, phase)
    }

    /// Raw little-endian f64 grid plus `<path>.json` sidecar with geometry.
    pub fn write_raw<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let path = path.as_ref();
        let mut bytes = Vec::with_capacity(self.phase.len() * 8);
        for p in &self.phase {
            bytes.extend_from_slice(&p.to_le_bytes());
        }
        fs::write(path, &bytes)?;
        let mut sidecar = path.as_os_str().to_os_string();
        sidecar.push(".json");
        fs::write(sidecar, serde_json::to_vec_pretty(&self.geometry)?)?;
        Ok(())
    }

    pub fn read_raw<P: AsRef<Path>>(path: P) -> Result<Self> {
        let path = path.as_ref();
        let mut sidecar = path.as_os_str().to_os_string();
        sidecar.push(".json");
        let geometry: ApertureGrid = serde_json::from_slice(&fs::read(sidecar)?)?;
        let bytes = fs::read(path)?;
        if bytes.len() != geometry.len() * 8 {
            return Err(Error::InvalidInput(format!(
                "raw screen file has {} bytes, expected {}",
                bytes.len(),
                geometry.len() * 8
            )));
        }
        let phase = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        PhaseScreen::new(geometry, phase)
    }
}

/// Sum the spectrum inside the aperture; zero outside.
pub fn synthesize(spectrum: &ZernikeSpectrum, geometry: &ApertureGrid) -> Result<PhaseScreen> {
    let terms: Vec<(Term, f64)> = spectrum
        .entries
        .iter()
        .map(|&(j, a)| index_to_nm(j).map(|idx| (term_for(&idx), a)))
        .collect::<Result<_>>()?;
    let n = geometry.samples_per_side;
    let geom = *geometry;
    let mut phase = vec![0.0f64; n * n];
    exec::for_each_row(&mut phase, n, |row, out| {
        for (col, v) in out.iter_mut().enumerate() {
            let (r, phi) = geom.polar(row, col);
            if r > 1.0 {
                continue;
            }
            *v = terms.iter().map(|(t, a)| a * t.eval(r, phi)).sum();
        }
    });
    PhaseScreen::new(*geometry, phase)
}

/// Result of a least-squares fit of a screen.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub spectrum: ZernikeSpectrum,
    /// RMS of the in-aperture residual after removing the fit, in radians.
    pub residual_rms: f64,
}

/// Least-squares fit of Z_1..Z_max_j over the in-aperture samples.
pub fn decompose(screen: &PhaseScreen, max_j: u32) -> Result<Decomposition> {
    if max_j < 1 {
        return Err(Error::InvalidInput("max_j must be >= 1".to_string()));
    }
    let geom = *screen.geometry();
    let half_span = (geom.samples_per_side / 2) as f64 * geom.pitch;
    if geom.aperture_radius > half_span * (1.0 + 1e-12) {
        return Err(Error::InvalidGrid(format!(
            "aperture radius {} m exceeds the inscribed radius {} m of the grid",
            geom.aperture_radius, half_span
        )));
    }
    let k = max_j as usize;
    let terms: Vec<Term> = (1..=max_j)
        .map(|j| index_to_nm(j).map(|idx| term_for(&idx)))
        .collect::<Result<_>>()?;

    let n = geom.samples_per_side;
    let phase = screen.phase();
    // Per-row partial normal equations, reduced in row order.
    struct Partial {
        gram: Vec<f64>,
        rhs: Vec<f64>,
        count: usize,
    }
    let partials = exec::map_indexed(n, |row| {
        let mut p = Partial {
            gram: vec![0.0; k * k],
            rhs: vec![0.0; k],
            count: 0,
        };
        let mut z = vec![0.0; k];
        for col in 0..n {
            let (r, phi) = geom.polar(row, col);
            if r > 1.0 {
                continue;
            }
            for (t, zi) in terms.iter().zip(z.iter_mut()) {
                *zi = t.eval(r, phi);
            }
            let val = phase[row * n + col];
            for a in 0..k {
                for b in a..k {
                    p.gram[a * k + b] += z[a] * z[b];
                }
                p.rhs[a] += z[a] * val;
            }
            p.count += 1;
        }
        p
    });

    let mut gram = vec![0.0; k * k];
    let mut rhs = vec![0.0; k];
    let mut pixels = 0usize;
    for p in &partials {
        for (g, pg) in gram.iter_mut().zip(&p.gram) {
            *g += pg;
        }
        for (r, pr) in rhs.iter_mut().zip(&p.rhs) {
            *r += pr;
        }
        pixels += p.count;
    }
    if pixels < k {
        return Err(Error::Underdetermined { pixels, coefficients: k });
    }
    // Mirror the upper triangle.
    for a in 0..k {
        for b in 0..a {
            gram[a * k + b] = gram[b * k + a];
        }
    }
    let gm = DMatrix::from_row_slice(k, k, &gram);
    let rv = DVector::from_column_slice(&rhs);
    let coeffs = gm
        .cholesky()
        .map(|ch| ch.solve(&rv))
        .ok_or_else(|| Error::SingularSystem("normal equations are not positive definite".to_string()))?;

    // Residual pass.
    let sq_sums = exec::map_indexed(n, |row| {
        let mut acc = 0.0f64;
        for col in 0..n {
            let (r, phi) = geom.polar(row, col);
            if r > 1.0 {
                continue;
            }
            let fit: f64 = terms
                .iter()
                .zip(coeffs.iter())
                .map(|(t, &a)| a * t.eval(r, phi))
                .sum();
            let d = phase[row * n + col] - fit;
            acc += d * d;
        }
        acc
    });
    let residual_rms = (sq_sums.iter().sum::<f64>() / pixels as f64).sqrt();

    let entries = (1..=max_j).zip(coeffs.iter().copied()).collect();
    Ok(Decomposition {
        spectrum: ZernikeSpectrum::new(entries, geom.aperture_radius)?,
        residual_rms,
    })
}

/// Write an ensemble summary (per-index mean/std) as CSV.
pub fn write_stats_csv<W: Write>(
    w: W,
    stats: &[(u32, f64, f64)],
) -> Result<()> {
    let mut w = BufWriter::new(w);
    writeln!(w, "j,n,m,mean_a_j,std_a_j")?;
    for &(j, mean, std) in stats {
        let idx = index_to_nm(j)?;
        writeln!(w, "{},{},{},{},{}", j, idx.n, idx.m, mean, std)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn index_map_matches_known_pairs() {
        let cases = [
            (1, 0, 0),
            (2, 1, -1),
            (3, 1, 1),
            (4, 2, -2),
            (5, 2, 0),
            (6, 2, 2),
            (7, 3, -3),
            (10, 3, 3),
            (13, 4, 0),
        ];
        for (j, n, m) in cases {
            let idx = index_to_nm(j).unwrap();
            assert_eq!((idx.n, idx.m), (n, m), "j={j}");
            assert_eq!(nm_to_index(n, m).unwrap(), j);
        }
    }

    #[test]
    fn index_bijection_holds() {
        for j in 1..=100 {
            let idx = index_to_nm(j).unwrap();
            assert_eq!(nm_to_index(idx.n, idx.m).unwrap(), j);
        }
        assert!(index_to_nm(0).is_err());
        assert!(nm_to_index(2, 1).is_err());
        assert!(nm_to_index(1, 2).is_err());
    }

    #[test]
    fn radial_low_orders() {
        for r in [0.0, 0.3, 0.7, 1.0] {
            assert_relative_eq!(radial_poly(1, 1, r).unwrap(), r, epsilon = 1e-14);
            assert_relative_eq!(radial_poly(2, 0, r).unwrap(), 2.0 * r * r - 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn radial_is_one_at_rim() {
        for n in 0..=8u32 {
            for m in (-(n as i32)..=n as i32).filter(|m| (n as i32 - m.abs()) % 2 == 0) {
                assert_relative_eq!(radial_poly(n, m, 1.0).unwrap(), 1.0, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn piston_is_constant() {
        for (r, phi) in [(0.0, 0.0), (0.5, 1.0), (1.0, -2.0)] {
            assert_relative_eq!(evaluate(1, r, phi).unwrap(), 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn j5_is_defocus() {
        let idx = index_to_nm(5).unwrap();
        assert_eq!((idx.n, idx.m), (2, 0));
        assert_relative_eq!(
            evaluate(5, 0.5, 0.3).unwrap(),
            3f64.sqrt() * (2.0 * 0.25 - 1.0),
            epsilon = 1e-14
        );
    }

    #[test]
    fn astigmatism_pair_is_orthogonal_in_form() {
        // j=4 takes the cos branch, its partner j=6 the sin branch.
        let v4 = evaluate(4, 0.8, 0.37).unwrap();
        let v6 = evaluate(6, 0.8, 0.37).unwrap();
        assert_relative_eq!(v4, 6f64.sqrt() * 0.64 * (2.0 * 0.37f64).cos(), epsilon = 1e-14);
        assert_relative_eq!(v6, 6f64.sqrt() * 0.64 * (2.0 * 0.37f64).sin(), epsilon = 1e-14);
    }

    /// Quadrature oracle: (1/pi) integral of Z_j Z_k over the disk at 512^2
    /// (the acceptance suite repeats this at 1024^2).
    #[test]
    fn gram_matrix_orthonormal() {
        let n = 512usize;
        let step = 2.0 / n as f64;
        let mut planes = vec![vec![0.0f64; n * n]; 15];
        let mut mask = vec![false; n * n];
        for row in 0..n {
            let y = -1.0 + (row as f64 + 0.5) * step;
            for col in 0..n {
                let x = -1.0 + (col as f64 + 0.5) * step;
                let r = (x * x + y * y).sqrt();
                if r > 1.0 {
                    continue;
                }
                mask[row * n + col] = true;
                let phi = y.atan2(x);
                for (ji, plane) in planes.iter_mut().enumerate() {
                    plane[row * n + col] = evaluate(ji as u32 + 1, r, phi).unwrap();
                }
            }
        }
        let w = step * step / std::f64::consts::PI;
        for a in 0..15 {
            for b in a..15 {
                let dot: f64 = planes[a]
                    .iter()
                    .zip(&planes[b])
                    .zip(&mask)
                    .filter(|(_, &inside)| inside)
                    .map(|((x, y), _)| x * y)
                    .sum::<f64>()
                    * w;
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!(
                    (dot - expect).abs() < 2e-3,
                    "gram[{},{}] = {} (512^2 check)",
                    a + 1,
                    b + 1,
                    dot
                );
            }
        }
    }

    fn geom() -> ApertureGrid {
        ApertureGrid::new(128, 2.0 * 1.5e-3 / 128.0, 1.5e-3).unwrap()
    }

    #[test]
    fn synthesize_empty_is_zero() {
        let s = ZernikeSpectrum::new(vec![], 1.5e-3).unwrap();
        let screen = synthesize(&s, &geom()).unwrap();
        assert!(screen.phase().iter().all(|&p| p == 0.0));
    }

    #[test]
    fn synthesize_piston_is_constant_inside() {
        let s = ZernikeSpectrum::new(vec![(1, 2.0)], 1.5e-3).unwrap();
        let g = geom();
        let screen = synthesize(&s, &g).unwrap();
        for row in 0..g.samples_per_side {
            for col in 0..g.samples_per_side {
                let (r, _) = g.polar(row, col);
                let v = screen.phase()[row * g.samples_per_side + col];
                if r <= 1.0 {
                    assert_relative_eq!(v, 2.0, epsilon = 1e-12);
                } else {
                    assert_eq!(v, 0.0);
                }
            }
        }
    }

    #[test]
    fn synthesize_is_linear() {
        let g = geom();
        let s1 = ZernikeSpectrum::new(vec![(4, 0.3), (2, -0.1)], g.aperture_radius).unwrap();
        let s2 = ZernikeSpectrum::new(vec![(6, 0.2), (5, 0.7)], g.aperture_radius).unwrap();
        let union = ZernikeSpectrum::new(
            vec![(4, 0.3), (2, -0.1), (6, 0.2), (5, 0.7)],
            g.aperture_radius,
        )
        .unwrap();
        let sum = synthesize(&s1, &g)
            .unwrap()
            .try_add(&synthesize(&s2, &g).unwrap())
            .unwrap();
        let direct = synthesize(&union, &g).unwrap();
        for (a, b) in sum.phase().iter().zip(direct.phase()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn decompose_single_mode() {
        let g = geom();
        let s = ZernikeSpectrum::new(vec![(4, 0.3)], g.aperture_radius).unwrap();
        let screen = synthesize(&s, &g).unwrap();
        let dec = decompose(&screen, 10).unwrap();
        for &(j, a) in &dec.spectrum.entries {
            let expect = if j == 4 { 0.3 } else { 0.0 };
            assert!((a - expect).abs() < 1e-3, "a_{j} = {a}");
        }
        assert!(dec.residual_rms < 1e-9);
    }

    #[test]
    fn decompose_flat_screen() {
        let g = geom();
        let screen = PhaseScreen::zeros(g);
        let dec = decompose(&screen, 6).unwrap();
        for &(_, a) in &dec.spectrum.entries {
            assert!(a.abs() < 1e-9);
        }
    }

    #[test]
    fn synthesize_then_decompose_roundtrip() {
        let g = geom();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(42);
        let entries: Vec<(u32, f64)> = (1..=10).map(|j| (j, rng.gen_range(-0.5..0.5))).collect();
        let s = ZernikeSpectrum::new(entries.clone(), g.aperture_radius).unwrap();
        let dec = decompose(&synthesize(&s, &g).unwrap(), 10).unwrap();
        for (j, a) in entries {
            let got = dec.spectrum.coefficient(j).unwrap();
            assert!((got - a).abs() < 1e-6, "a_{j}: {got} vs {a}");
        }
    }

    #[test]
    fn decompose_rejects_underdetermined() {
        let g = ApertureGrid::new(64, 1e-4, 1.2e-4).unwrap();
        // Aperture of ~1 pixel radius: almost no samples inside.
        let screen = PhaseScreen::zeros(g);
        assert!(matches!(
            decompose(&screen, 36),
            Err(Error::Underdetermined { .. })
        ));
    }

    #[test]
    fn decompose_rejects_oversized_aperture() {
        let g = ApertureGrid::new(64, 1e-4, 64.0 * 1e-4).unwrap();
        let screen = PhaseScreen::zeros(g);
        assert!(decompose(&screen, 3).is_err());
    }

    #[test]
    fn spectrum_csv_roundtrip() {
        let s = ZernikeSpectrum::new(vec![(2, 0.25), (4, -0.125), (6, 1.5)], 2e-3).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let back = ZernikeSpectrum::read_csv(&buf[..], 2e-3).unwrap();
        assert_eq!(s, back);
    }

    proptest! {
        #[test]
        fn bijection_random(j in 1u32..5000) {
            let idx = index_to_nm(j).unwrap();
            prop_assert_eq!(nm_to_index(idx.n, idx.m).unwrap(), j);
            prop_assert!(idx.m.unsigned_abs() <= idx.n);
            prop_assert_eq!((idx.n as i64 - idx.m.abs() as i64) % 2, 0);
        }
    }
}
