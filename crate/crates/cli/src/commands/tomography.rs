//! Channel process tomography over the d = 2 subspace.

use anyhow::Result;

use oamqkd::quantum::ChannelModel;
use oamqkd::tomography::channel_process_matrix;
use oamqkd::turbulence::sample_screen;

use crate::config::ExperimentConfig;
use crate::output::OutDir;

pub fn run(config: &ExperimentConfig, out: &OutDir, seed: u64) -> Result<()> {
    let grid = config.grid_spec()?;
    let mode = config.mode_spec(0)?;
    let medium = config.medium()?;
    let ch = config.channel_section()?;
    let model = config.turbulence_model(seed)?;
    let geometry = config.aperture()?;
    let mut rng = model.rng();
    let screens = (0..ch.ensemble_draws)
        .map(|_| sample_screen(&model, &geometry, &mut rng).map(|(s, _)| s))
        .collect::<oamqkd::Result<Vec<_>>>()?;
    let channel = ChannelModel {
        grid,
        waist: mode.waist,
        profile: mode.profile,
        distance: ch.distance_m,
        medium,
        screens,
    };

    let result = channel_process_matrix(&channel)?;
    out.write_json("chi.json", &result.chi.to_json())?;
    let summary = serde_json::json!({
        "process_fidelity_vs_identity": result.fidelity_vs_identity,
        "trace_preservation_defect": result.trace_preservation_defect,
        "min_chi_eigenvalue": result.min_eigenvalue,
        "physical": result.min_eigenvalue >= -1e-9,
        "ensemble_draws": ch.ensemble_draws,
    });
    out.write_json("summary.json", &summary)?;
    if result.min_eigenvalue < -1e-9 {
        eprintln!(
            "warning: linear inversion produced a negative chi eigenvalue ({:.3e}); \
             the reconstruction left the physical cone",
            result.min_eigenvalue
        );
    }
    Ok(())
}
