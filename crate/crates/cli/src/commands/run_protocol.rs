//! Protocol evaluation: simulate (or ingest) detection matrices, estimate
//! the QBER, evaluate rate and threshold, and report abort.

use anyhow::{bail, Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use oamqkd::protocols::{run_protocol, MatrixSource, ProtocolSpec};
use oamqkd::quantum::{ChannelModel, DetectionMatrix};
use oamqkd::turbulence::sample_screen;

use crate::config::{ExperimentConfig, ProtocolKindConfig};
use crate::output::OutDir;

/// True when the protocol aborted (QBER at or above threshold).
pub fn run(config: &ExperimentConfig, out: &OutDir, seed: u64) -> Result<bool> {
    let section = config
        .protocol
        .as_ref()
        .ok_or_else(|| anyhow::anyhow!("config: [protocol] section is required for run-protocol"))?;
    let spec = match section.kind {
        ProtocolKindConfig::Bb84 => {
            let d = section
                .dimension
                .ok_or_else(|| anyhow::anyhow!("config: [protocol].dimension is required for bb84"))?;
            ProtocolSpec::bb84(d)?
        }
        ProtocolKindConfig::SixState => {
            if let Some(d) = section.dimension {
                if d != 2 {
                    bail!("config: [protocol].dimension must be 2 for six-state, got {d}");
                }
            }
            ProtocolSpec::six_state()?
        }
    };
    let shots = config.run.as_ref().map(|r| r.shots).unwrap_or(0);
    let mut rng = ChaCha12Rng::seed_from_u64(seed);

    let (report, matrices) = if section.matrices.is_empty() {
        let grid = config.grid_spec()?;
        let mode = config.mode_spec(0)?;
        let medium = config.medium()?;
        let ch = config.channel_section()?;
        let model = config.turbulence_model(seed)?;
        let geometry = config.aperture()?;
        let mut screen_rng = model.rng();
        let screens = (0..ch.ensemble_draws)
            .map(|_| sample_screen(&model, &geometry, &mut screen_rng).map(|(s, _)| s))
            .collect::<oamqkd::Result<Vec<_>>>()?;
        let channel = ChannelModel {
            grid,
            waist: mode.waist,
            profile: mode.profile,
            distance: ch.distance_m,
            medium,
            screens,
        };
        run_protocol(&spec, MatrixSource::Channel(&channel), shots, &mut rng)?
    } else {
        let loaded: Vec<DetectionMatrix> = section
            .matrices
            .iter()
            .map(|p| {
                let file = std::fs::File::open(p)
                    .with_context(|| format!("opening detection matrix {}", p.display()))?;
                DetectionMatrix::read_csv(file)
                    .with_context(|| format!("parsing detection matrix {}", p.display()))
            })
            .collect::<Result<_>>()?;
        run_protocol(&spec, MatrixSource::Matrices(&loaded), shots, &mut rng)?
    };

    for m in &matrices {
        let mut csv = Vec::new();
        m.write_csv(&mut csv)?;
        out.write(&format!("matrix_{}.csv", m.sent_basis), &csv)?;
    }
    out.write_json("report.json", &serde_json::to_value(&report)?)?;
    Ok(report.abort)
}
