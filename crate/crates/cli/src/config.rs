//! Experiment configuration: one TOML file, flag overrides on top.
//!
//! Sections are optional at parse time; each command validates the sections
//! it needs and reports missing or inconsistent fields by path.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use oamqkd::field::{GridSpec, ModeProfile, ModeSpec};
use oamqkd::propagation::Medium;
use oamqkd::retrieval::{GsaOptions, InitialPhase};
use oamqkd::turbulence::{CoeffStat, TurbulenceModel};
use oamqkd::zernike::ApertureGrid;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub samples_per_side: usize,
    pub pitch_m: f64,
    pub wavelength_m: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSection {
    pub waist_m: f64,
    pub profile: ModeProfile,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediumSection {
    pub refractive_index: f64,
    /// Intensity absorption in 1/m; wavelength- and water-quality-dependent,
    /// so there is no default.
    pub absorption_per_m: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    pub distance_m: f64,
    pub aperture_radius_m: f64,
    #[serde(default = "default_ensemble_draws")]
    pub ensemble_draws: usize,
    /// Inclusive OAM label range for `simulate-channel` cross-talk scans.
    #[serde(default)]
    pub oam_range: Option<[i32; 2]>,
}

fn default_ensemble_draws() -> usize {
    100
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TurbulenceSection {
    pub update_rate_hz: f64,
    #[serde(default = "default_correlation_time")]
    pub correlation_time_s: f64,
    pub coefficients: Vec<CoeffEntry>,
}

fn default_correlation_time() -> f64 {
    0.1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoeffEntry {
    pub j: u32,
    #[serde(default)]
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolSection {
    pub kind: ProtocolKindConfig,
    #[serde(default)]
    pub dimension: Option<usize>,
    /// Detection-matrix CSV paths (same-basis). When set, the channel is not
    /// simulated.
    #[serde(default)]
    pub matrices: Vec<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProtocolKindConfig {
    Bb84,
    SixState,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default)]
    pub shots: u64,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetrievalSection {
    #[serde(default = "default_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_tolerance")]
    pub convergence_tolerance: f64,
    #[serde(default = "default_max_j")]
    pub max_j: u32,
    /// Dark level subtracted from frames, in normalized [0, 1] units.
    #[serde(default)]
    pub dark_level: f64,
    /// Seed for the randomized initial phase; flat (zero) phase when absent.
    #[serde(default)]
    pub initial_phase_seed: Option<u64>,
}

fn default_iterations() -> usize {
    300
}
fn default_tolerance() -> f64 {
    1e-10
}
fn default_max_j() -> u32 {
    10
}

impl Default for RetrievalSection {
    fn default() -> Self {
        Self {
            max_iterations: default_iterations(),
            convergence_tolerance: default_tolerance(),
            max_j: default_max_j(),
            dark_level: 0.0,
            initial_phase_seed: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VortexSection {
    pub oam_index: i32,
    pub frames: usize,
    pub max_step_m: f64,
    #[serde(default = "default_floor")]
    pub intensity_floor: f64,
    /// Optional frame rate; enables the seconds column in track CSVs.
    #[serde(default)]
    pub frame_rate_hz: Option<f64>,
}

fn default_floor() -> f64 {
    oamqkd::vortex::DEFAULT_INTENSITY_FLOOR
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub grid: Option<GridSection>,
    pub mode: Option<ModeSection>,
    pub medium: Option<MediumSection>,
    pub channel: Option<ChannelSection>,
    pub turbulence: Option<TurbulenceSection>,
    pub protocol: Option<ProtocolSection>,
    pub run: Option<RunSection>,
    #[serde(default)]
    pub retrieval: RetrievalSection,
    pub vortex: Option<VortexSection>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let config: ExperimentConfig = toml::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        Ok(config)
    }

    pub fn grid_spec(&self) -> Result<GridSpec> {
        let g = self.require(self.grid.as_ref(), "[grid]")?;
        Ok(GridSpec::new(g.samples_per_side, g.pitch_m, g.wavelength_m)?)
    }

    pub fn mode_spec(&self, oam_index: i32) -> Result<ModeSpec> {
        let m = self.require(self.mode.as_ref(), "[mode]")?;
        Ok(ModeSpec::new(oam_index, m.waist_m, m.profile)?)
    }

    pub fn medium(&self) -> Result<Medium> {
        let m = self.require(self.medium.as_ref(), "[medium]")?;
        Ok(Medium::new(m.refractive_index, m.absorption_per_m)?)
    }

    pub fn channel_section(&self) -> Result<&ChannelSection> {
        self.require(self.channel.as_ref(), "[channel]")
    }

    pub fn aperture(&self) -> Result<ApertureGrid> {
        let grid = self.grid_spec()?;
        let ch = self.channel_section()?;
        Ok(ApertureGrid::from_grid(&grid, ch.aperture_radius_m)?)
    }

    pub fn turbulence_model(&self, seed: u64) -> Result<TurbulenceModel> {
        let t = self.require(self.turbulence.as_ref(), "[turbulence]")?;
        let coefficients = t
            .coefficients
            .iter()
            .map(|c| CoeffStat { j: c.j, mean: c.mean, std: c.std })
            .collect();
        Ok(TurbulenceModel::new(coefficients, t.update_rate_hz, seed)?)
    }

    pub fn gsa_options(&self) -> GsaOptions {
        GsaOptions {
            max_iterations: self.retrieval.max_iterations,
            convergence_tolerance: self.retrieval.convergence_tolerance,
            initial_phase: match self.retrieval.initial_phase_seed {
                Some(seed) => InitialPhase::Seeded(seed),
                None => InitialPhase::Flat,
            },
        }
    }

    fn require<'a, T>(&self, section: Option<&'a T>, name: &str) -> Result<&'a T> {
        match section {
            Some(s) => Ok(s),
            None => bail!("config: {name} section is required for this command"),
        }
    }
}

/// Seed resolution: flag wins, then [run].seed; stochastic commands refuse
/// to run without one.
pub fn resolve_seed(flag: Option<u64>, config: &ExperimentConfig) -> Result<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    if let Some(run) = &config.run {
        if let Some(s) = run.seed {
            return Ok(s);
        }
    }
    bail!("a seed is required for stochastic runs: pass --seed N or set [run].seed")
}
