//! Salient-point detection, tracking, trajectory rejection and conversion to
//! displacement trajectories anchored at the center of trajectory (COT).

mod detect;
mod klt;

pub use detect::{detect_features, DetectParams};
pub use klt::{cot_split_exceeded, track, TrackParams};

pub(crate) use detect::blur_separable;

use std::path::Path;

use crate::error::{Error, Result};

/// One tracked point: its position in every frame plus a validity flag.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub points: Vec<(f32, f32)>,
    pub valid: bool,
}

/// A trajectory re-expressed as per-frame offsets from its anchor, the
/// temporal mean position (center of trajectory).
#[derive(Debug, Clone)]
pub struct DisplacementTrajectory {
    pub anchor: (f32, f32),
    pub offsets: Vec<(f32, f32)>,
}

/// Converts a valid trajectory to offsets around its mean position. The
/// offsets sum to zero by construction.
pub fn to_displacement(traj: &Trajectory) -> Result<DisplacementTrajectory> {
    if !traj.valid {
        return Err(Error::InvalidTrajectory);
    }
    let n = traj.points.len() as f64;
    let (sx, sy) = traj
        .points
        .iter()
        .fold((0.0f64, 0.0f64), |(ax, ay), &(x, y)| {
            (ax + x as f64, ay + y as f64)
        });
    let anchor = ((sx / n) as f32, (sy / n) as f32);
    let offsets = traj
        .points
        .iter()
        .map(|&(x, y)| (x - anchor.0, y - anchor.1))
        .collect();
    Ok(DisplacementTrajectory { anchor, offsets })
}

/// Converts every valid trajectory, skipping invalid ones.
pub fn to_displacements(trajs: &[Trajectory]) -> Vec<DisplacementTrajectory> {
    trajs
        .iter()
        .filter(|t| t.valid)
        .map(|t| to_displacement(t).expect("valid trajectory"))
        .collect()
}

/// Writes trajectories as delimited text: one row per
/// `(point_id, t, x, y, valid)`.
pub fn save_trajectories(trajs: &[Trajectory], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::SequenceIo {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    w.write_record(["point_id", "t", "x", "y", "valid"])
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    for (id, traj) in trajs.iter().enumerate() {
        for (t, &(x, y)) in traj.points.iter().enumerate() {
            w.write_record(&[
                id.to_string(),
                t.to_string(),
                format!("{x}"),
                format!("{y}"),
                (traj.valid as u8).to_string(),
            ])
            .map_err(|e| Error::InvalidInput(e.to_string()))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads trajectories written by [`save_trajectories`].
pub fn load_trajectories(path: &Path) -> Result<Vec<Trajectory>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::SequenceIo {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let mut trajs: Vec<Trajectory> = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::InvalidInput(e.to_string()))?;
        let id: usize = rec[0].parse().map_err(|_| {
            Error::InvalidInput(format!("bad point_id {:?}", &rec[0]))
        })?;
        let x: f32 = rec[2].parse().unwrap_or(f32::NAN);
        let y: f32 = rec[3].parse().unwrap_or(f32::NAN);
        let valid = &rec[4] == "1";
        if !x.is_finite() || !y.is_finite() {
            return Err(Error::InvalidInput(format!(
                "non-finite coordinate in trajectory {id}"
            )));
        }
        while trajs.len() <= id {
            trajs.push(Trajectory {
                points: Vec::new(),
                valid: true,
            });
        }
        trajs[id].points.push((x, y));
        trajs[id].valid = valid;
    }
    Ok(trajs)
}
