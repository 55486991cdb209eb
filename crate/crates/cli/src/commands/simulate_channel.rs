//! Cross-talk scan: send every OAM mode in the configured range through the
//! turbulent channel and tabulate the detection probabilities.

use anyhow::{bail, Result};

use oamqkd::quantum::{mub_logical, simulate_detection, ChannelModel};
use oamqkd::turbulence::sample_screen;

use crate::config::ExperimentConfig;
use crate::output::OutDir;

pub fn run(config: &ExperimentConfig, out: &OutDir, seed: u64) -> Result<()> {
    let grid = config.grid_spec()?;
    let mode = config.mode_spec(0)?;
    let medium = config.medium()?;
    let section = config.channel_section()?;
    let [lo, hi] = section
        .oam_range
        .ok_or_else(|| anyhow::anyhow!("config: [channel].oam_range is required for simulate-channel"))?;
    if lo >= hi {
        bail!("config: [channel].oam_range must be increasing, got [{lo}, {hi}]");
    }
    let labels: Vec<i32> = (lo..=hi).collect();

    let model = config.turbulence_model(seed)?;
    let geometry = config.aperture()?;
    let mut rng = model.rng();
    let screens = (0..section.ensemble_draws)
        .map(|_| sample_screen(&model, &geometry, &mut rng).map(|(s, _)| s))
        .collect::<oamqkd::Result<Vec<_>>>()?;

    let channel = ChannelModel {
        grid,
        waist: mode.waist,
        profile: mode.profile,
        distance: section.distance_m,
        medium,
        screens,
    };
    let basis = mub_logical(&labels)?;
    let matrix = simulate_detection(&basis, &basis, &channel)?;

    let mut csv = Vec::new();
    matrix.write_csv(&mut csv)?;
    out.write("crosstalk.csv", &csv)?;

    let off_diagonal: Vec<f64> = (0..labels.len())
        .map(|i| 1.0 - matrix.prob(i, i))
        .collect();
    let summary = serde_json::json!({
        "oam_labels": labels,
        "ensemble_draws": section.ensemble_draws,
        "distance_m": section.distance_m,
        "off_diagonal_mass_per_row": off_diagonal,
    });
    out.write_json("summary.json", &summary)?;
    Ok(())
}
