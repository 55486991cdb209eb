//! Turbulence characterization: retrieve a phase screen from every frame in
//! a directory, decompose each into Zernike modes, and write per-frame plus
//! ensemble statistics.

use std::path::Path;

use anyhow::{bail, Context, Result};

use oamqkd::field::make_mode;
use oamqkd::retrieval::{characterize_frames, IntensityFrame};
use oamqkd::zernike::{index_to_nm, write_stats_csv};

use crate::config::ExperimentConfig;
use crate::output::OutDir;

pub fn run(
    config: &ExperimentConfig,
    frames_dir: &Path,
    out: &OutDir,
    dark_level: Option<f64>,
    max_j: Option<u32>,
) -> Result<()> {
    let grid = config.grid_spec()?;
    let medium = config.medium()?;
    let channel = config.channel_section()?;
    let input = make_mode(&config.mode_spec(0)?, &grid)?;
    let dark = dark_level.unwrap_or(config.retrieval.dark_level);
    let max_j = max_j.unwrap_or(config.retrieval.max_j);

    // Collect frame paths, lexicographic order.
    let mut paths: Vec<_> = std::fs::read_dir(frames_dir)
        .with_context(|| format!("reading frames directory {}", frames_dir.display()))?
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .map(|e| e.path())
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .map(|e| matches!(e.to_ascii_lowercase().as_str(), "pgm" | "png"))
                .unwrap_or(false)
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        bail!(
            "frames directory {} contains no .pgm or .png frames",
            frames_dir.display()
        );
    }

    // Load everything up front: an unreadable frame aborts the run before
    // any ensemble output is written.
    let frames: Vec<IntensityFrame> = paths
        .iter()
        .map(|p| {
            IntensityFrame::from_image_file(p, grid.pitch, dark)
                .with_context(|| format!("loading frame {}", p.display()))
        })
        .collect::<Result<_>>()?;

    let stats = characterize_frames(
        &frames,
        &input,
        channel.distance_m,
        &medium,
        channel.aperture_radius_m,
        &config.gsa_options(),
        max_j,
    )?;

    let mut per_frame = String::from("frame,j,n,m,a_j\n");
    for record in &stats.records {
        for &(j, a) in &record.spectrum.entries {
            let idx = index_to_nm(j)?;
            per_frame.push_str(&format!("{},{},{},{},{}\n", record.frame, j, idx.n, idx.m, a));
        }
    }
    out.write("per_frame_spectra.csv", per_frame.as_bytes())?;

    let mut ensemble = Vec::new();
    write_stats_csv(&mut ensemble, &stats.stats)?;
    out.write("ensemble_stats.csv", &ensemble)?;

    let summary = serde_json::json!({
        "n_frames": stats.records.len(),
        "max_j": max_j,
        "frames": paths.iter().map(|p| p.file_name().unwrap().to_string_lossy()).collect::<Vec<_>>(),
        "converged_frames": stats.records.iter().filter(|r| r.converged).count(),
        "frames_with_residues": stats.records.iter().filter(|r| r.residues_detected).count(),
        "mean_gsa_residual": stats.records.iter().map(|r| r.gsa_residual).sum::<f64>()
            / stats.records.len() as f64,
        "mean_fit_residual_rms": stats.records.iter().map(|r| r.fit_residual_rms).sum::<f64>()
            / stats.records.len() as f64,
        "coefficients": stats.stats.iter().map(|&(j, mean, std)| {
            serde_json::json!({ "j": j, "mean": mean, "std": std })
        }).collect::<Vec<_>>(),
    });
    out.write_json("summary.json", &summary)?;
    Ok(())
}
