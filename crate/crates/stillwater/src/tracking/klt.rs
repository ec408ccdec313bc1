//! Pyramidal gradient-based point tracker.
//!
//! Each seed is tracked frame-to-frame through a 3-level image pyramid with
//! iterative window alignment. A trajectory is invalidated when the local
//! window is untrackable (small minimum eigenvalue of the gradient matrix),
//! the final residual stays high, the forward-backward error exceeds a
//! pixel, the point leaves the frame, or the centers of trajectory of the
//! two video halves drift apart by more than the split threshold.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::detect::gradients;
use super::Trajectory;
use crate::error::{Error, Result};
use crate::imaging::{sample_bilinear_raw, Frame, Video};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackParams {
    /// Half-width of the square alignment window (15 gives 31x31).
    pub window_radius: usize,
    pub pyramid_levels: usize,
    /// Iteration cap per pyramid level.
    pub max_iters: usize,
    /// Convergence threshold on the per-iteration update, in pixels.
    pub epsilon: f32,
    /// Minimum normalized eigenvalue of the gradient matrix.
    pub min_eigen: f32,
    /// Maximum mean absolute window residual at the finest level.
    pub max_residual: f32,
    /// Forward-backward consistency threshold in pixels.
    pub fb_threshold: f32,
    /// Maximum distance between the COT of the first and last half of the
    /// video before a trajectory is rejected.
    pub cot_split_threshold: f32,
}

impl Default for TrackParams {
    fn default() -> Self {
        Self {
            window_radius: 15,
            pyramid_levels: 3,
            max_iters: 30,
            epsilon: 0.01,
            min_eigen: 1e-4,
            max_residual: 0.08,
            fb_threshold: 1.0,
            cot_split_threshold: 3.0,
        }
    }
}

struct Level {
    width: usize,
    height: usize,
    data: Vec<f32>,
    gx: Vec<f32>,
    gy: Vec<f32>,
}

struct Pyramid {
    levels: Vec<Level>,
}

fn downsample_half(data: &[f32], w: usize, h: usize) -> (Vec<f32>, usize, usize) {
    // 5-tap binomial blur then stride-2 subsample
    let kernel = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];
    let blurred = super::detect::blur_separable(data, w, h, &kernel);
    let nw = w / 2;
    let nh = h / 2;
    let mut out = vec![0.0f32; nw * nh];
    for y in 0..nh {
        for x in 0..nw {
            out[y * nw + x] = blurred[(y * 2) * w + x * 2];
        }
    }
    (out, nw, nh)
}

fn build_pyramid(frame: &Frame, levels: usize) -> Pyramid {
    let mut out = Vec::with_capacity(levels);
    let mut data = frame.data().to_vec();
    let mut w = frame.width();
    let mut h = frame.height();
    for level in 0..levels {
        if level > 0 {
            let (d, nw, nh) = downsample_half(&data, w, h);
            data = d;
            w = nw;
            h = nh;
        }
        let (gx, gy) = gradients(&data, w, h);
        out.push(Level {
            width: w,
            height: h,
            data: data.clone(),
            gx,
            gy,
        });
        if w < 16 || h < 16 {
            break;
        }
    }
    Pyramid { levels: out }
}

/// Aligns the window around `pos` in `from` against `to`, coarse to fine.
/// Returns the tracked position or `None` when the window is untrackable.
fn lk_step(from: &Pyramid, to: &Pyramid, pos: (f32, f32), params: &TrackParams) -> Option<(f32, f32)> {
    let levels = from.levels.len().min(to.levels.len());
    let r = params.window_radius as i64;
    let area = ((2 * r + 1) * (2 * r + 1)) as f32;
    let mut v = (0.0f32, 0.0f32); // displacement at current level scale

    for li in (0..levels).rev() {
        let scale = (1 << li) as f32;
        let lf = &from.levels[li];
        let lt = &to.levels[li];
        let px = pos.0 / scale;
        let py = pos.1 / scale;

        // template window: intensities and gradients of the source frame
        let n = ((2 * r + 1) * (2 * r + 1)) as usize;
        let mut ti = vec![0.0f32; n];
        let mut tx = vec![0.0f32; n];
        let mut ty = vec![0.0f32; n];
        let mut k = 0;
        for dy in -r..=r {
            for dx in -r..=r {
                let sx = px + dx as f32;
                let sy = py + dy as f32;
                ti[k] = sample_bilinear_raw(&lf.data, lf.width, lf.height, sx, sy);
                tx[k] = sample_bilinear_raw(&lf.gx, lf.width, lf.height, sx, sy);
                ty[k] = sample_bilinear_raw(&lf.gy, lf.width, lf.height, sx, sy);
                k += 1;
            }
        }
        let mut gxx = 0.0f32;
        let mut gxy = 0.0f32;
        let mut gyy = 0.0f32;
        for k in 0..n {
            gxx += tx[k] * tx[k];
            gxy += tx[k] * ty[k];
            gyy += ty[k] * ty[k];
        }
        let tr = gxx + gyy;
        let det = gxx * gyy - gxy * gxy;
        let lambda_min = 0.5 * (tr - (tr * tr - 4.0 * det).max(0.0).sqrt());
        if lambda_min / area < params.min_eigen {
            return None;
        }
        let inv_det = 1.0 / det;

        for _ in 0..params.max_iters {
            let mut bx = 0.0f32;
            let mut by = 0.0f32;
            let mut k = 0;
            for dy in -r..=r {
                for dx in -r..=r {
                    let sx = px + v.0 + dx as f32;
                    let sy = py + v.1 + dy as f32;
                    let j = sample_bilinear_raw(&lt.data, lt.width, lt.height, sx, sy);
                    let diff = ti[k] - j;
                    bx += tx[k] * diff;
                    by += ty[k] * diff;
                    k += 1;
                }
            }
            let ddx = (gyy * bx - gxy * by) * inv_det;
            let ddy = (gxx * by - gxy * bx) * inv_det;
            v.0 += ddx;
            v.1 += ddy;
            if (ddx * ddx + ddy * ddy).sqrt() < params.epsilon {
                break;
            }
        }

        if li == 0 {
            // residual gate at the finest level
            let mut resid = 0.0f32;
            let mut k = 0;
            for dy in -r..=r {
                for dx in -r..=r {
                    let sx = px + v.0 + dx as f32;
                    let sy = py + v.1 + dy as f32;
                    let j = sample_bilinear_raw(&lt.data, lt.width, lt.height, sx, sy);
                    resid += (ti[k] - j).abs();
                    k += 1;
                }
            }
            if resid / area > params.max_residual {
                return None;
            }
        } else {
            v.0 *= 2.0;
            v.1 *= 2.0;
        }
    }

    let out = (pos.0 + v.0, pos.1 + v.1);
    let w = from.levels[0].width as f32;
    let h = from.levels[0].height as f32;
    if out.0 < 0.0 || out.1 < 0.0 || out.0 > w - 1.0 || out.1 > h - 1.0 {
        return None;
    }
    Some(out)
}

/// Tracks seed points through every frame of the video.
pub fn track(video: &Video, seeds: &[(f32, f32)], params: &TrackParams) -> Result<Vec<Trajectory>> {
    if seeds.is_empty() {
        return Err(Error::NoSeeds);
    }
    let t_total = video.len();
    let pyramids: Vec<Pyramid> = video
        .frames()
        .par_iter()
        .map(|f| build_pyramid(f, params.pyramid_levels))
        .collect();

    let trajectories: Vec<Trajectory> = seeds
        .par_iter()
        .map(|&seed| {
            let mut points = Vec::with_capacity(t_total);
            points.push(seed);
            let mut valid = true;
            let mut pos = seed;
            for t in 0..t_total - 1 {
                match lk_step(&pyramids[t], &pyramids[t + 1], pos, params) {
                    Some(next) => {
                        // forward-backward consistency
                        match lk_step(&pyramids[t + 1], &pyramids[t], next, params) {
                            Some(back)
                                if ((back.0 - pos.0).powi(2) + (back.1 - pos.1).powi(2))
                                    .sqrt()
                                    <= params.fb_threshold =>
                            {
                                pos = next;
                            }
                            _ => {
                                valid = false;
                            }
                        }
                    }
                    None => {
                        valid = false;
                    }
                }
                points.push(pos);
                if !valid {
                    break;
                }
            }
            while points.len() < t_total {
                points.push(pos);
            }
            if valid && cot_split_exceeded(&points, params.cot_split_threshold) {
                valid = false;
            }
            Trajectory { points, valid }
        })
        .collect();

    Ok(trajectories)
}

/// True when the mean position over the first half of the video and over
/// the last half differ by more than `threshold` pixels.
pub fn cot_split_exceeded(points: &[(f32, f32)], threshold: f32) -> bool {
    let half = points.len() / 2;
    if half == 0 {
        return false;
    }
    let mean = |pts: &[(f32, f32)]| {
        let n = pts.len() as f64;
        let (sx, sy) = pts
            .iter()
            .fold((0.0f64, 0.0f64), |(a, b), &(x, y)| (a + x as f64, b + y as f64));
        (sx / n, sy / n)
    };
    let first = mean(&points[..half]);
    let last = mean(&points[points.len() - half..]);
    let d = ((first.0 - last.0).powi(2) + (first.1 - last.1).powi(2)).sqrt();
    d > threshold as f64
}
