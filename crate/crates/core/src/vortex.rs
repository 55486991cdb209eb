//! Phase-singularity detection and frame-to-frame tracking.
//!
//! Detection sums the wrapped phase circulation around every grid plaquette;
//! a circulation of q*2pi yields |q| unit-charge vortices at the plaquette
//! center (higher-order singularities are structurally unstable and split
//! under any perturbation, so they are reported as co-located unit charges).
//! Plaquettes whose four corners all sit below `intensity_floor * peak` are
//! ignored: numerically dark regions carry meaningless phase.

use std::io::Write;

use crate::error::{Error, Result};
use crate::field::SampledField;

/// Default fraction of the peak intensity below which detections are
/// suppressed.
pub const DEFAULT_INTENSITY_FLOOR: f64 = 1e-4;

/// One elementary phase singularity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vortex {
    /// Position in meters, same axes as the field grid.
    pub x: f64,
    pub y: f64,
    /// +1 or -1.
    pub charge: i32,
}

/// Detect unit-charge vortices in a sampled field.
pub fn detect(f: &SampledField, intensity_floor: f64) -> Result<Vec<Vortex>> {
    if !(0.0..1.0).contains(&intensity_floor) {
        return Err(Error::InvalidInput(format!(
            "intensity floor must lie in [0, 1), got {intensity_floor}"
        )));
    }
    let n = f.grid().samples_per_side;
    let pitch = f.grid().pitch;
    let half = (n / 2) as f64;
    let amps = f.amplitudes();
    let intensity: Vec<f64> = amps.iter().map(|a| a.norm_sqr()).collect();
    let peak = intensity.iter().fold(0.0f64, |m, &v| m.max(v));
    let floor = intensity_floor * peak;
    let phase: Vec<f64> = amps.iter().map(|a| a.arg()).collect();

    let wrap = |d: f64| d - std::f64::consts::TAU * (d / std::f64::consts::TAU).round();
    let mut out = Vec::new();
    for row in 0..n - 1 {
        for col in 0..n - 1 {
            let i00 = row * n + col;
            let i01 = i00 + 1;
            let i10 = i00 + n;
            let i11 = i10 + 1;
            let bright = intensity[i00].max(intensity[i01]).max(intensity[i10]).max(intensity[i11]);
            if bright < floor {
                continue;
            }
            let circ = wrap(phase[i01] - phase[i00])
                + wrap(phase[i11] - phase[i01])
                + wrap(phase[i10] - phase[i11])
                + wrap(phase[i00] - phase[i10]);
            let q = (circ / std::f64::consts::TAU).round() as i32;
            if q == 0 {
                continue;
            }
            let x = (col as f64 + 0.5 - half) * pitch;
            let y = (row as f64 + 0.5 - half) * pitch;
            for _ in 0..q.unsigned_abs() {
                out.push(Vortex { x, y, charge: q.signum() });
            }
        }
    }
    Ok(out)
}

/// A vortex followed across frames.
#[derive(Debug, Clone, PartialEq)]
pub struct VortexTrack {
    pub id: usize,
    pub charge: i32,
    /// (frame index, x, y); frame indices strictly increasing.
    pub points: Vec<(usize, f64, f64)>,
}

/// Greedy nearest-neighbor association of same-charge vortices across
/// frames. A detection farther than `max_step` from every open track starts
/// a new track; an open track with no detection within `max_step` is closed.
pub fn track(per_frame: &[Vec<Vortex>], max_step: f64) -> Result<Vec<VortexTrack>> {
    if !(max_step > 0.0) {
        return Err(Error::InvalidInput(format!("max_step must be positive, got {max_step}")));
    }
    let mut finished: Vec<VortexTrack> = Vec::new();
    let mut open: Vec<VortexTrack> = Vec::new();
    let mut next_id = 0usize;

    for (frame, detections) in per_frame.iter().enumerate() {
        // Candidate (distance, open track slot, detection) pairs, sorted so
        // ties resolve deterministically.
        let mut pairs = Vec::new();
        for (ti, tr) in open.iter().enumerate() {
            let &(_, lx, ly) = tr.points.last().expect("open tracks are never empty");
            for (di, det) in detections.iter().enumerate() {
                if det.charge != tr.charge {
                    continue;
                }
                let dist = ((det.x - lx).powi(2) + (det.y - ly).powi(2)).sqrt();
                if dist <= max_step {
                    pairs.push((dist, ti, di));
                }
            }
        }
        pairs.sort_by(|a, b| a.partial_cmp(b).expect("distances are finite"));

        let mut track_used = vec![false; open.len()];
        let mut det_used = vec![false; detections.len()];
        for (_, ti, di) in pairs {
            if track_used[ti] || det_used[di] {
                continue;
            }
            track_used[ti] = true;
            det_used[di] = true;
            open[ti].points.push((frame, detections[di].x, detections[di].y));
        }

        // Close unmatched tracks, keep matched ones open.
        let mut still_open = Vec::with_capacity(open.len());
        for (ti, tr) in open.into_iter().enumerate() {
            if track_used[ti] {
                still_open.push(tr);
            } else {
                finished.push(tr);
            }
        }
        open = still_open;

        for (di, det) in detections.iter().enumerate() {
            if !det_used[di] {
                open.push(VortexTrack {
                    id: next_id,
                    charge: det.charge,
                    points: vec![(frame, det.x, det.y)],
                });
                next_id += 1;
            }
        }
    }
    finished.extend(open);
    finished.sort_by_key(|t| t.id);
    Ok(finished)
}

/// CSV export: `track_id,frame[,time_s],x,y,charge`. The seconds column is
/// emitted only when a frame rate is supplied.
pub fn write_tracks_csv<W: Write>(
    mut w: W,
    tracks: &[VortexTrack],
    frame_rate: Option<f64>,
) -> Result<()> {
    if frame_rate.is_some() {
        writeln!(w, "track_id,frame,time_s,x,y,charge")?;
    } else {
        writeln!(w, "track_id,frame,x,y,charge")?;
    }
    for t in tracks {
        for &(frame, x, y) in &t.points {
            match frame_rate {
                Some(rate) => {
                    writeln!(w, "{},{},{},{},{},{}", t.id, frame, frame as f64 / rate, x, y, t.charge)?
                }
                None => writeln!(w, "{},{},{},{},{}", t.id, frame, x, y, t.charge)?,
            }
        }
    }
    Ok(())
}
