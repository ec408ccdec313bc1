//! Salient feature detection: union of Harris corners and FAST keypoints,
//! deduplicated with small-radius suppression.

use serde::{Deserialize, Serialize};

use crate::imaging::Frame;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectParams {
    /// Harris corner response coefficient.
    pub harris_k: f32,
    /// Relative quality threshold: keep maxima above this fraction of the
    /// strongest Harris response.
    pub harris_quality: f32,
    /// FAST intensity threshold on [0, 1] intensities (20/255 by default).
    pub fast_threshold: f32,
    /// Suppression radius when merging the two detector outputs.
    pub suppression_radius: f32,
    /// Upper bound on the number of returned points (strongest first).
    pub max_features: usize,
}

impl Default for DetectParams {
    fn default() -> Self {
        Self {
            harris_k: 0.04,
            harris_quality: 0.01,
            fast_threshold: 20.0 / 255.0,
            suppression_radius: 2.0,
            max_features: 4000,
        }
    }
}

struct Candidate {
    x: f32,
    y: f32,
    /// Response normalized to [0, 1] within its own detector, so Harris and
    /// FAST scores are comparable when suppressing duplicates.
    response: f32,
}

/// Detects salient points in a frame: the union of Harris corners and FAST
/// keypoints, subpixel refined, deduplicated keeping the stronger response.
/// Deterministic given frame and params; may return an empty list.
pub fn detect_features(frame: &Frame, params: &DetectParams) -> Vec<(f32, f32)> {
    let mut candidates = harris_corners(frame, params);
    candidates.extend(fast_keypoints(frame, params));
    candidates.sort_by(|a, b| {
        b.response
            .total_cmp(&a.response)
            .then(a.y.total_cmp(&b.y))
            .then(a.x.total_cmp(&b.x))
    });

    let r2 = params.suppression_radius * params.suppression_radius;
    let mut kept: Vec<(f32, f32)> = Vec::new();
    for c in candidates {
        if kept.len() >= params.max_features {
            break;
        }
        let dup = kept
            .iter()
            .any(|&(kx, ky)| (kx - c.x).powi(2) + (ky - c.y).powi(2) <= r2);
        if !dup {
            kept.push((c.x, c.y));
        }
    }
    kept
}

/// Subpixel refinement of a local maximum of a response map by fitting a 2D
/// quadratic to the 3x3 neighborhood.
fn refine_subpixel(map: &[f32], w: usize, x: usize, y: usize) -> (f32, f32) {
    let v = |dx: i64, dy: i64| map[((y as i64 + dy) as usize) * w + (x as i64 + dx) as usize];
    let gx = 0.5 * (v(1, 0) - v(-1, 0));
    let gy = 0.5 * (v(0, 1) - v(0, -1));
    let hxx = v(1, 0) - 2.0 * v(0, 0) + v(-1, 0);
    let hyy = v(0, 1) - 2.0 * v(0, 0) + v(0, -1);
    let hxy = 0.25 * (v(1, 1) - v(1, -1) - v(-1, 1) + v(-1, -1));
    let det = hxx * hyy - hxy * hxy;
    if det.abs() < 1e-12 {
        return (x as f32, y as f32);
    }
    let ox = (-(hyy * gx - hxy * gy) / det).clamp(-0.5, 0.5);
    let oy = (-(hxx * gy - hxy * gx) / det).clamp(-0.5, 0.5);
    (x as f32 + ox, y as f32 + oy)
}

fn local_maxima(map: &[f32], w: usize, h: usize, margin: usize, threshold: f32) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for y in margin.max(1)..h - margin.max(1) {
        for x in margin.max(1)..w - margin.max(1) {
            let v = map[y * w + x];
            if v <= threshold {
                continue;
            }
            let mut is_max = true;
            'nb: for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let nv = map[((y as i64 + dy) as usize) * w + (x as i64 + dx) as usize];
                    if nv > v || (nv == v && (dy < 0 || (dy == 0 && dx < 0))) {
                        is_max = false;
                        break 'nb;
                    }
                }
            }
            if is_max {
                out.push((x, y));
            }
        }
    }
    out
}

fn gaussian_kernel(sigma: f32) -> Vec<f32> {
    let radius = (3.0 * sigma).ceil() as i64;
    let mut k: Vec<f32> = (-radius..=radius)
        .map(|i| (-(i * i) as f32 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f32 = k.iter().sum();
    for v in &mut k {
        *v /= sum;
    }
    k
}

/// Separable convolution with edge replication.
pub(crate) fn blur_separable(data: &[f32], w: usize, h: usize, kernel: &[f32]) -> Vec<f32> {
    let radius = (kernel.len() / 2) as i64;
    let mut tmp = vec![0.0f32; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, &kv) in kernel.iter().enumerate() {
                let sx = (x as i64 + k as i64 - radius).clamp(0, w as i64 - 1) as usize;
                acc += kv * data[y * w + sx];
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0f32; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, &kv) in kernel.iter().enumerate() {
                let sy = (y as i64 + k as i64 - radius).clamp(0, h as i64 - 1) as usize;
                acc += kv * tmp[sy * w + x];
            }
            out[y * w + x] = acc;
        }
    }
    out
}

pub(crate) fn gradients(data: &[f32], w: usize, h: usize) -> (Vec<f32>, Vec<f32>) {
    let mut gx = vec![0.0f32; w * h];
    let mut gy = vec![0.0f32; w * h];
    for y in 0..h {
        for x in 0..w {
            let xm = x.saturating_sub(1);
            let xp = (x + 1).min(w - 1);
            let ym = y.saturating_sub(1);
            let yp = (y + 1).min(h - 1);
            gx[y * w + x] = 0.5 * (data[y * w + xp] - data[y * w + xm]);
            gy[y * w + x] = 0.5 * (data[yp * w + x] - data[ym * w + x]);
        }
    }
    (gx, gy)
}

fn harris_corners(frame: &Frame, params: &DetectParams) -> Vec<Candidate> {
    let (w, h) = (frame.width(), frame.height());
    if w < 8 || h < 8 {
        return Vec::new();
    }
    let (gx, gy) = gradients(frame.data(), w, h);
    let mut xx = vec![0.0f32; w * h];
    let mut yy = vec![0.0f32; w * h];
    let mut xy = vec![0.0f32; w * h];
    for i in 0..w * h {
        xx[i] = gx[i] * gx[i];
        yy[i] = gy[i] * gy[i];
        xy[i] = gx[i] * gy[i];
    }
    let kernel = gaussian_kernel(2.0);
    let xx = blur_separable(&xx, w, h, &kernel);
    let yy = blur_separable(&yy, w, h, &kernel);
    let xy = blur_separable(&xy, w, h, &kernel);

    let mut response = vec![0.0f32; w * h];
    let mut max_r = 0.0f32;
    for i in 0..w * h {
        let det = xx[i] * yy[i] - xy[i] * xy[i];
        let tr = xx[i] + yy[i];
        let r = det - params.harris_k * tr * tr;
        response[i] = r;
        max_r = max_r.max(r);
    }
    if max_r <= 0.0 {
        return Vec::new();
    }
    let maxima = local_maxima(&response, w, h, 4, params.harris_quality * max_r);
    maxima
        .into_iter()
        .map(|(x, y)| {
            let (rx, ry) = refine_subpixel(&response, w, x, y);
            Candidate {
                x: rx,
                y: ry,
                response: response[y * w + x] / max_r,
            }
        })
        .collect()
}

/// Offsets of the 16-pixel Bresenham circle of radius 3 used by FAST.
const FAST_CIRCLE: [(i64, i64); 16] = [
    (0, -3),
    (1, -3),
    (2, -2),
    (3, -1),
    (3, 0),
    (3, 1),
    (2, 2),
    (1, 3),
    (0, 3),
    (-1, 3),
    (-2, 2),
    (-3, 1),
    (-3, 0),
    (-3, -1),
    (-2, -2),
    (-1, -3),
];

fn fast_keypoints(frame: &Frame, params: &DetectParams) -> Vec<Candidate> {
    let (w, h) = (frame.width(), frame.height());
    if w < 8 || h < 8 {
        return Vec::new();
    }
    let data = frame.data();
    let t = params.fast_threshold;
    let mut score = vec![0.0f32; w * h];
    let mut max_score = 0.0f32;
    for y in 3..h - 3 {
        for x in 3..w - 3 {
            let p = data[y * w + x];
            let mut diffs = [0.0f32; 16];
            for (k, &(dx, dy)) in FAST_CIRCLE.iter().enumerate() {
                diffs[k] =
                    data[((y as i64 + dy) as usize) * w + (x as i64 + dx) as usize] - p;
            }
            // segment test: 9 contiguous pixels all brighter or all darker
            // than p by more than t; score is the summed excess over the arc
            let s = fast_segment_score(&diffs, t);
            if s > 0.0 {
                score[y * w + x] = s;
                max_score = max_score.max(s);
            }
        }
    }
    if max_score <= 0.0 {
        return Vec::new();
    }
    let maxima = local_maxima(&score, w, h, 4, 0.0);
    maxima
        .into_iter()
        .map(|(x, y)| {
            let (rx, ry) = refine_subpixel(&score, w, x, y);
            Candidate {
                x: rx,
                y: ry,
                response: score[y * w + x] / max_score,
            }
        })
        .collect()
}

fn fast_segment_score(diffs: &[f32; 16], t: f32) -> f32 {
    let mut best = 0.0f32;
    for bright in [true, false] {
        let pass = |d: f32| if bright { d > t } else { d < -t };
        // longest run on the circular sequence, tracking the summed excess
        let mut run = 0usize;
        let mut acc = 0.0f32;
        let mut best_here = 0.0f32;
        let mut best_run = 0usize;
        for k in 0..32 {
            let d = diffs[k % 16];
            if pass(d) {
                run += 1;
                acc += d.abs() - t;
                if run > best_run || (run == best_run && acc > best_here) {
                    best_run = run;
                    best_here = acc;
                }
                if run >= 16 {
                    break;
                }
            } else {
                run = 0;
                acc = 0.0;
            }
        }
        if best_run >= 9 {
            best = best.max(best_here);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::Frame;

    #[test]
    fn constant_frame_no_features() {
        let f = Frame::from_data(64, 64, vec![0.5; 64 * 64]).unwrap();
        assert!(detect_features(&f, &DetectParams::default()).is_empty());
    }

    #[test]
    fn checkerboard_corners_near_intersections() {
        // 8x8 squares on a 64x64 frame; interior intersections at multiples
        // of 8. The oracle is the analytic intersection coordinates; the
        // checkerboard edge sits between samples, so the true corner lies at
        // k*8 - 0.5 in pixel-center coordinates.
        let w = 64;
        let data: Vec<f32> = (0..w * w)
            .map(|i| {
                let x = i % w;
                let y = i / w;
                if ((x / 8) + (y / 8)) % 2 == 0 {
                    0.9
                } else {
                    0.1
                }
            })
            .collect();
        let f = Frame::from_data(w, w, data).unwrap();
        let pts = detect_features(&f, &DetectParams::default());
        assert!(!pts.is_empty());
        let mut covered = 0;
        for iy in 1..7 {
            for ix in 1..7 {
                let cx = ix as f32 * 8.0 - 0.5;
                let cy = iy as f32 * 8.0 - 0.5;
                let found = pts
                    .iter()
                    .any(|&(x, y)| ((x - cx).powi(2) + (y - cy).powi(2)).sqrt() <= 1.0);
                if found {
                    covered += 1;
                }
            }
        }
        assert!(
            covered >= 30,
            "only {covered} of 36 interior intersections detected within 1 px"
        );
        // and every detection should be near some intersection
        for &(x, y) in &pts {
            let nearest = (((x + 0.5) / 8.0).round() * 8.0 - 0.5, ((y + 0.5) / 8.0).round() * 8.0 - 0.5);
            let d = ((x - nearest.0).powi(2) + (y - nearest.1).powi(2)).sqrt();
            assert!(d <= 2.0, "detection ({x}, {y}) far from any intersection");
        }
    }

    #[test]
    fn detector_is_deterministic() {
        let w = 48;
        let data: Vec<f32> = (0..w * w)
            .map(|i| {
                let x = (i % w) as f32;
                let y = (i / w) as f32;
                (0.5 + 0.4 * (x * 0.7).sin() * (y * 0.9).cos()).clamp(0.0, 1.0)
            })
            .collect();
        let f = Frame::from_data(w, w, data).unwrap();
        let a = detect_features(&f, &DetectParams::default());
        let b = detect_features(&f, &DetectParams::default());
        assert_eq!(a, b);
    }
}
