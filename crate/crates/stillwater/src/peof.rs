//! Dense optical flow from local polynomial expansions.
//!
//! Every pixel neighborhood is approximated by a quadratic
//! `f(x + u) ≈ u' A u + b' u + c` fit under a Gaussian applicability, with
//! coefficients expressed in local coordinates around the pixel. Two
//! expansions give the displacement through
//! `d(x) = (sum A'A)^-1 sum A' db` accumulated over a Gaussian-weighted
//! neighborhood; the scheme iterates with warping inside a coarse-to-fine
//! pyramid.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{mean_frame, sample_bilinear_raw, DisplacementGrid, Frame, Video};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct FlowParams {
    pub pyramid_levels: usize,
    pub pyramid_scale: f32,
    /// Warp/re-fit rounds per pyramid level.
    pub iterations: usize,
    /// Side of the expansion neighborhood (odd).
    pub poly_window: usize,
    /// Gaussian applicability width of the expansion.
    pub poly_sigma: f32,
    /// Side of the flow-averaging neighborhood (odd).
    pub avg_window: usize,
    /// Re-average the restored video and repeat the whole stage this many
    /// times (1 = single pass with the initial mean image).
    pub outer_iters: usize,
}

impl Default for FlowParams {
    fn default() -> Self {
        Self {
            pyramid_levels: 3,
            pyramid_scale: 0.5,
            iterations: 10,
            poly_window: 11,
            poly_sigma: 1.5,
            avg_window: 15,
            outer_iters: 1,
        }
    }
}

impl FlowParams {
    pub fn validate(&self) -> Result<()> {
        if self.pyramid_levels < 1 {
            return Err(Error::InvalidInput("pyramid_levels must be >= 1".into()));
        }
        if !(0.0 < self.pyramid_scale && self.pyramid_scale < 1.0) {
            return Err(Error::InvalidInput("pyramid_scale must be in (0, 1)".into()));
        }
        if self.poly_window % 2 == 0 || self.avg_window % 2 == 0 {
            return Err(Error::InvalidInput("windows must be odd".into()));
        }
        Ok(())
    }
}

/// Per-pixel quadratic coefficients in local coordinates: symmetric
/// `A = [[a11, a12], [a12, a22]]`, linear `b = (b1, b2)`, constant `c`.
#[derive(Debug, Clone)]
pub struct PolyExpansion {
    pub width: usize,
    pub height: usize,
    pub a11: Vec<f32>,
    pub a12: Vec<f32>,
    pub a22: Vec<f32>,
    pub b1: Vec<f32>,
    pub b2: Vec<f32>,
    pub c: Vec<f32>,
}

fn applicability(window: usize, sigma: f32) -> Vec<f32> {
    let r = (window / 2) as i64;
    (-r..=r)
        .map(|i| (-(i * i) as f32 / (2.0 * sigma * sigma)).exp())
        .collect()
}

/// Fits the quadratic model at every pixel of a raw intensity grid by
/// separable Gaussian-weighted least squares.
pub fn poly_expand_raw(data: &[f32], width: usize, height: usize, params: &FlowParams) -> PolyExpansion {
    let w = params.poly_window;
    let r = (w / 2) as i64;
    let a = applicability(w, params.poly_sigma);

    // 1D weight moments
    let mut s0 = 0.0f64;
    let mut s2 = 0.0f64;
    let mut s4 = 0.0f64;
    for (k, &av) in a.iter().enumerate() {
        let i = (k as i64 - r) as f64;
        s0 += av as f64;
        s2 += av as f64 * i * i;
        s4 += av as f64 * i * i * i * i;
    }
    // inverse of the coupled (1, x^2, y^2) Gram block
    let g = [
        [s0 * s0, s2 * s0, s2 * s0],
        [s2 * s0, s4 * s0, s2 * s2],
        [s2 * s0, s2 * s2, s4 * s0],
    ];
    let ginv = invert3(&g);
    let inv_bx = 1.0 / (s2 * s0);
    let inv_xy = 1.0 / (s2 * s2);

    // separable correlations: rows first (p = 0, 1, 2), then columns;
    // accumulated in f64 so large smooth inputs keep full precision
    let n = width * height;
    let mut row0 = vec![0.0f64; n];
    let mut row1 = vec![0.0f64; n];
    let mut row2 = vec![0.0f64; n];
    for y in 0..height {
        for x in 0..width {
            let mut m0 = 0.0f64;
            let mut m1 = 0.0f64;
            let mut m2 = 0.0f64;
            for (k, &av) in a.iter().enumerate() {
                let i = k as i64 - r;
                let sx = (x as i64 + i).clamp(0, width as i64 - 1) as usize;
                let v = av as f64 * data[y * width + sx] as f64;
                m0 += v;
                m1 += v * i as f64;
                m2 += v * (i * i) as f64;
            }
            row0[y * width + x] = m0;
            row1[y * width + x] = m1;
            row2[y * width + x] = m2;
        }
    }

    let mut exp = PolyExpansion {
        width,
        height,
        a11: vec![0.0; n],
        a12: vec![0.0; n],
        a22: vec![0.0; n],
        b1: vec![0.0; n],
        b2: vec![0.0; n],
        c: vec![0.0; n],
    };
    for y in 0..height {
        for x in 0..width {
            let mut m00 = 0.0f64;
            let mut m10 = 0.0f64;
            let mut m01 = 0.0f64;
            let mut m20 = 0.0f64;
            let mut m02 = 0.0f64;
            let mut m11 = 0.0f64;
            for (k, &av) in a.iter().enumerate() {
                let j = k as i64 - r;
                let sy = (y as i64 + j).clamp(0, height as i64 - 1) as usize;
                let idx = sy * width + x;
                let av = av as f64;
                let jf = j as f64;
                m00 += av * row0[idx];
                m10 += av * row1[idx];
                m01 += av * jf * row0[idx];
                m20 += av * row2[idx];
                m02 += av * jf * jf * row0[idx];
                m11 += av * jf * row1[idx];
            }
            let idx = y * width + x;
            let c = ginv[0][0] * m00 + ginv[0][1] * m20 + ginv[0][2] * m02;
            let axx = ginv[1][0] * m00 + ginv[1][1] * m20 + ginv[1][2] * m02;
            let ayy = ginv[2][0] * m00 + ginv[2][1] * m20 + ginv[2][2] * m02;
            exp.c[idx] = c as f32;
            exp.a11[idx] = axx as f32;
            exp.a22[idx] = ayy as f32;
            exp.a12[idx] = (0.5 * m11 * inv_xy) as f32;
            exp.b1[idx] = (m10 * inv_bx) as f32;
            exp.b2[idx] = (m01 * inv_bx) as f32;
        }
    }
    exp
}

/// Fits the quadratic model at every pixel of a frame.
pub fn poly_expand(frame: &Frame, params: &FlowParams) -> PolyExpansion {
    poly_expand_raw(frame.data(), frame.width(), frame.height(), params)
}

fn invert3(m: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    let inv_det = 1.0 / det;
    let mut out = [[0.0f64; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let a = m[(j + 1) % 3][(i + 1) % 3] * m[(j + 2) % 3][(i + 2) % 3]
                - m[(j + 1) % 3][(i + 2) % 3] * m[(j + 2) % 3][(i + 1) % 3];
            out[i][j] = a * inv_det;
        }
    }
    out
}

#[inline]
fn sample_plane(plane: &[f32], w: usize, h: usize, x: f32, y: f32) -> f32 {
    sample_bilinear_raw(plane, w, h, x, y)
}

/// One displacement update from two expansions and a prior flow.
///
/// For each pixel the second expansion is sampled at the prior-displaced
/// coordinate and the prior contributes the `A * d_prior` offset, so the
/// solve yields the total displacement. Where the accumulated 2x2 system
/// is near singular the prior flow is kept. Pixels in the outer
/// `poly_window / 2` band get zero certainty so border-polluted
/// coefficients never enter the sums.
pub fn flow_step(
    exp1: &PolyExpansion,
    exp2: &PolyExpansion,
    prior: &DisplacementGrid,
    params: &FlowParams,
) -> Result<DisplacementGrid> {
    if exp1.width != exp2.width || exp1.height != exp2.height {
        return Err(Error::DimensionMismatch {
            expected: format!("{}x{}", exp1.width, exp1.height),
            got: format!("{}x{}", exp2.width, exp2.height),
        });
    }
    let (w, h) = (exp1.width, exp1.height);
    let n = w * h;
    let band = params.poly_window / 2;

    let mut g11 = vec![0.0f32; n];
    let mut g12 = vec![0.0f32; n];
    let mut g22 = vec![0.0f32; n];
    let mut h1 = vec![0.0f32; n];
    let mut h2 = vec![0.0f32; n];

    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let in_band = x < band || y < band || x + band >= w || y + band >= h;
            if in_band {
                continue;
            }
            let px = prior.dx[i];
            let py = prior.dy[i];
            let sx = x as f32 + px;
            let sy = y as f32 + py;
            let a11 = 0.5 * (exp1.a11[i] + sample_plane(&exp2.a11, w, h, sx, sy));
            let a12 = 0.5 * (exp1.a12[i] + sample_plane(&exp2.a12, w, h, sx, sy));
            let a22 = 0.5 * (exp1.a22[i] + sample_plane(&exp2.a22, w, h, sx, sy));
            let db1 = 0.5 * (exp1.b1[i] - sample_plane(&exp2.b1, w, h, sx, sy)) + a11 * px + a12 * py;
            let db2 = 0.5 * (exp1.b2[i] - sample_plane(&exp2.b2, w, h, sx, sy)) + a12 * px + a22 * py;
            g11[i] = a11 * a11 + a12 * a12;
            g12[i] = a11 * a12 + a12 * a22;
            g22[i] = a12 * a12 + a22 * a22;
            h1[i] = a11 * db1 + a12 * db2;
            h2[i] = a12 * db1 + a22 * db2;
        }
    }

    // neighborhood averaging with a Gaussian window
    let sigma = 0.3 * ((params.avg_window - 1) as f32 * 0.5 - 1.0) + 0.8;
    let kernel: Vec<f32> = {
        let r = (params.avg_window / 2) as i64;
        let mut k: Vec<f32> = (-r..=r)
            .map(|i| (-(i * i) as f32 / (2.0 * sigma * sigma)).exp())
            .collect();
        let s: f32 = k.iter().sum();
        for v in &mut k {
            *v /= s;
        }
        k
    };
    let g11 = crate::tracking::blur_separable(&g11, w, h, &kernel);
    let g12 = crate::tracking::blur_separable(&g12, w, h, &kernel);
    let g22 = crate::tracking::blur_separable(&g22, w, h, &kernel);
    let h1 = crate::tracking::blur_separable(&h1, w, h, &kernel);
    let h2 = crate::tracking::blur_separable(&h2, w, h, &kernel);

    let mut out = DisplacementGrid::zeros(w, h);
    for i in 0..n {
        let tr = (g11[i] + g22[i]) as f64;
        let det = (g11[i] as f64) * (g22[i] as f64) - (g12[i] as f64) * (g12[i] as f64);
        let lambda_min = 0.5 * (tr - (tr * tr - 4.0 * det).max(0.0).sqrt());
        if lambda_min < 1e-9 {
            out.dx[i] = prior.dx[i];
            out.dy[i] = prior.dy[i];
        } else {
            out.dx[i] = ((g22[i] as f64 * h1[i] as f64 - g12[i] as f64 * h2[i] as f64) / det) as f32;
            out.dy[i] = ((g11[i] as f64 * h2[i] as f64 - g12[i] as f64 * h1[i] as f64) / det) as f32;
        }
    }
    Ok(out)
}

fn resize_bilinear(data: &[f32], w: usize, h: usize, nw: usize, nh: usize) -> Vec<f32> {
    let mut out = vec![0.0f32; nw * nh];
    let sx = w as f32 / nw as f32;
    let sy = h as f32 / nh as f32;
    for y in 0..nh {
        for x in 0..nw {
            let fx = (x as f32 + 0.5) * sx - 0.5;
            let fy = (y as f32 + 0.5) * sy - 0.5;
            out[y * nw + x] = sample_bilinear_raw(data, w, h, fx, fy);
        }
    }
    out
}

fn downscale(data: &[f32], w: usize, h: usize, scale: f32) -> (Vec<f32>, usize, usize) {
    let nw = ((w as f32 * scale).round() as usize).max(8);
    let nh = ((h as f32 * scale).round() as usize).max(8);
    // prefilter against aliasing before shrinking
    let blurred = crate::tracking::blur_separable(data, w, h, &[0.0625, 0.25, 0.375, 0.25, 0.0625]);
    (resize_bilinear(&blurred, w, h, nw, nh), nw, nh)
}

/// Dense flow `d` from `from` to `to` such that `from(x) ≈ to(x + d(x))`:
/// warping `to` by the flow registers it onto `from`.
pub fn estimate_flow(from: &Frame, to: &Frame, params: &FlowParams) -> Result<DisplacementGrid> {
    if from.width() != to.width() || from.height() != to.height() {
        return Err(Error::DimensionMismatch {
            expected: format!("{}x{}", from.width(), from.height()),
            got: format!("{}x{}", to.width(), to.height()),
        });
    }
    params.validate()?;

    // build pyramids, level 0 = full resolution
    let mut pyr_from = vec![(from.data().to_vec(), from.width(), from.height())];
    let mut pyr_to = vec![(to.data().to_vec(), to.width(), to.height())];
    for _ in 1..params.pyramid_levels {
        let (d, w, h) = {
            let last = pyr_from.last().unwrap();
            downscale(&last.0, last.1, last.2, params.pyramid_scale)
        };
        pyr_from.push((d, w, h));
        let (d, w, h) = {
            let last = pyr_to.last().unwrap();
            downscale(&last.0, last.1, last.2, params.pyramid_scale)
        };
        pyr_to.push((d, w, h));
    }

    let mut flow: Option<DisplacementGrid> = None;
    for level in (0..pyr_from.len()).rev() {
        let (fd, fw, fh) = &pyr_from[level];
        let (td, tw, th) = &pyr_to[level];
        debug_assert_eq!((fw, fh), (tw, th));
        let mut level_flow = match flow.take() {
            Some(prev) => {
                let gain = 1.0 / params.pyramid_scale;
                let mut up = DisplacementGrid::zeros(*fw, *fh);
                let dx = resize_bilinear(&prev.dx, prev.width, prev.height, *fw, *fh);
                let dy = resize_bilinear(&prev.dy, prev.width, prev.height, *fw, *fh);
                for i in 0..*fw * *fh {
                    up.dx[i] = dx[i] * gain;
                    up.dy[i] = dy[i] * gain;
                }
                up
            }
            None => DisplacementGrid::zeros(*fw, *fh),
        };

        let exp_from = poly_expand_raw(fd, *fw, *fh, params);
        let exp_to = poly_expand_raw(td, *tw, *th, params);
        for _ in 0..params.iterations {
            level_flow = flow_step(&exp_from, &exp_to, &level_flow, params)?;
        }
        flow = Some(level_flow);
    }
    Ok(flow.expect("at least one level"))
}

/// Registers every frame of the video onto the (evolving) mean image:
/// per frame, the flow from the mean to the frame is estimated and the
/// frame warped by it. `outer_iters > 1` recomputes the mean from the
/// restored video and repeats.
pub fn restore_video_peof(video: &Video, params: &FlowParams) -> Result<Video> {
    if video.len() < 2 {
        return Err(Error::EmptyVideo);
    }
    params.validate()?;
    let mut current = video.clone();
    for _ in 0..params.outer_iters.max(1) {
        let reference = mean_frame(&current);
        let frames: Vec<Frame> = current
            .frames()
            .par_iter()
            .map(|frame| {
                let flow = estimate_flow(&reference, frame, params)?;
                frame.warp(&flow)
            })
            .collect::<Result<Vec<_>>>()?;
        current = Video::new(frames, video.fps())?;
    }
    Ok(current)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad_image(w: usize, h: usize, f: impl Fn(f32, f32) -> f32) -> Vec<f32> {
        (0..w * h)
            .map(|i| f((i % w) as f32, (i / w) as f32))
            .collect()
    }

    #[test]
    fn constant_image_expansion() {
        let params = FlowParams::default();
        let data = vec![0.37f32; 32 * 32];
        let exp = poly_expand_raw(&data, 32, 32, &params);
        for i in 0..32 * 32 {
            assert!(exp.a11[i].abs() < 1e-6);
            assert!(exp.a12[i].abs() < 1e-6);
            assert!(exp.a22[i].abs() < 1e-6);
            assert!(exp.b1[i].abs() < 1e-6);
            assert!(exp.b2[i].abs() < 1e-6);
            assert!((exp.c[i] - 0.37).abs() < 1e-5);
        }
    }

    #[test]
    fn ramp_image_expansion() {
        let params = FlowParams::default();
        let data = quad_image(32, 32, |x, _| x);
        let exp = poly_expand_raw(&data, 32, 32, &params);
        // local coordinates: b = (1, 0), A = 0, c = x in the interior
        for y in 8..24 {
            for x in 8..24 {
                let i = y * 32 + x;
                assert!((exp.b1[i] - 1.0).abs() < 1e-5, "b1 = {}", exp.b1[i]);
                assert!(exp.b2[i].abs() < 1e-5);
                assert!(exp.a11[i].abs() < 1e-5);
                assert!((exp.c[i] - x as f32).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn quadratic_expansion_matches_generating_coefficients() {
        let params = FlowParams::default();
        // f = 0.01 x^2 + 0.02 xy in global coordinates; at pixel (px, py)
        // the local quadratic term is unchanged: A = [[0.01, 0.01], [0.01, 0]]
        let data = quad_image(32, 32, |x, y| 0.01 * x * x + 0.02 * x * y);
        let exp = poly_expand_raw(&data, 32, 32, &params);
        let (px, py) = (16usize, 14usize);
        let i = py * 32 + px;
        assert!((exp.a11[i] - 0.01).abs() < 1e-6, "a11 = {}", exp.a11[i]);
        assert!((exp.a12[i] - 0.01).abs() < 1e-6, "a12 = {}", exp.a12[i]);
        assert!(exp.a22[i].abs() < 1e-6, "a22 = {}", exp.a22[i]);
        // and the local b at (px, py): gradient of f = (0.02x + 0.02y, 0.02x)
        let gx = 0.02 * px as f32 + 0.02 * py as f32;
        let gy = 0.02 * px as f32;
        assert!((exp.b1[i] - gx).abs() < 1e-4);
        assert!((exp.b2[i] - gy).abs() < 1e-4);
    }

    #[test]
    fn expansion_matches_direct_normal_equations_oracle() {
        // independent oracle: dense weighted least squares at one pixel
        let params = FlowParams::default();
        let w = 33;
        let data = quad_image(w, w, |x, y| {
            0.4 + 0.01 * (x - 16.0).sin() * 3.0 + 0.002 * x * y / 33.0 + 0.005 * (y * 0.4).cos()
        });
        let exp = poly_expand_raw(&data, w, w, &params);
        let (px, py) = (16i64, 16i64);

        let r = (params.poly_window / 2) as i64;
        let a = applicability(params.poly_window, params.poly_sigma);
        // normal equations over basis (1, u, v, u^2, v^2, uv)
        let mut ata = [[0.0f64; 6]; 6];
        let mut atb = [0.0f64; 6];
        for (kj, &aj) in a.iter().enumerate() {
            let v = kj as i64 - r;
            for (ki, &ai) in a.iter().enumerate() {
                let u = ki as i64 - r;
                let wgt = (ai * aj) as f64;
                let basis = [
                    1.0,
                    u as f64,
                    v as f64,
                    (u * u) as f64,
                    (v * v) as f64,
                    (u * v) as f64,
                ];
                let val = data[((py + v) as usize) * w + (px + u) as usize] as f64;
                for p in 0..6 {
                    for q in 0..6 {
                        ata[p][q] += wgt * basis[p] * basis[q];
                    }
                    atb[p] += wgt * basis[p] * val;
                }
            }
        }
        // solve 6x6 by Gaussian elimination
        let mut m = ata;
        let mut rhs = atb;
        for col in 0..6 {
            let piv = (col..6)
                .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
                .unwrap();
            m.swap(col, piv);
            rhs.swap(col, piv);
            for row in 0..6 {
                if row != col {
                    let f = m[row][col] / m[col][col];
                    for k in 0..6 {
                        m[row][k] -= f * m[col][k];
                    }
                    rhs[row] -= f * rhs[col];
                }
            }
        }
        let sol: Vec<f64> = (0..6).map(|i| rhs[i] / m[i][i]).collect();

        let i = (py as usize) * w + px as usize;
        assert!((exp.c[i] as f64 - sol[0]).abs() < 1e-5);
        assert!((exp.b1[i] as f64 - sol[1]).abs() < 1e-5);
        assert!((exp.b2[i] as f64 - sol[2]).abs() < 1e-5);
        assert!((exp.a11[i] as f64 - sol[3]).abs() < 1e-5);
        assert!((exp.a22[i] as f64 - sol[4]).abs() < 1e-5);
        assert!((exp.a12[i] as f64 - sol[5] / 2.0).abs() < 1e-5);
    }

    #[test]
    fn flow_step_identical_frames_zero_flow() {
        let params = FlowParams::default();
        let data = quad_image(48, 48, |x, y| {
            0.5 + 0.3 * (x * 0.3).sin() * (y * 0.25).cos()
        });
        let exp = poly_expand_raw(&data, 48, 48, &params);
        let zero = DisplacementGrid::zeros(48, 48);
        let flow = flow_step(&exp, &exp, &zero, &params).unwrap();
        for i in 0..48 * 48 {
            assert!(flow.dx[i].abs() < 1e-5 && flow.dy[i].abs() < 1e-5);
        }
    }

    #[test]
    fn flow_step_swap_negates() {
        let params = FlowParams::default();
        let f1 = quad_image(48, 48, |x, y| 0.5 + 0.3 * (x * 0.2).sin() * (y * 0.3).cos());
        let f2 = quad_image(48, 48, |x, y| {
            0.5 + 0.3 * ((x - 0.6) * 0.2).sin() * ((y + 0.4) * 0.3).cos()
        });
        let e1 = poly_expand_raw(&f1, 48, 48, &params);
        let e2 = poly_expand_raw(&f2, 48, 48, &params);
        let zero = DisplacementGrid::zeros(48, 48);
        let fwd = flow_step(&e1, &e2, &zero, &params).unwrap();
        let bwd = flow_step(&e2, &e1, &zero, &params).unwrap();
        for y in 12..36 {
            for x in 12..36 {
                let i = y * 48 + x;
                assert!((fwd.dx[i] + bwd.dx[i]).abs() < 1e-4);
                assert!((fwd.dy[i] + bwd.dy[i]).abs() < 1e-4);
            }
        }
    }

    fn texture(x: f32, y: f32) -> f32 {
        (0.5 + 0.18 * (x * 0.23).sin() * (y * 0.31).cos()
            + 0.12 * ((x * 0.09 + y * 0.13).sin())
            + 0.1 * ((x * 0.41 - y * 0.27).cos()))
        .clamp(0.0, 1.0)
    }

    #[test]
    fn constant_shift_recovered() {
        let w = 96;
        let (sx, sy) = (2.3f32, -1.7f32);
        let f1 = Frame::from_data(w, w, quad_image(w, w, texture)).unwrap();
        // from(x) = to(x + d) with d = (sx, sy): to(x) = from(x - d)
        let f2 = Frame::from_data(
            w,
            w,
            quad_image(w, w, |x, y| texture(x - sx, y - sy)),
        )
        .unwrap();
        let flow = estimate_flow(&f1, &f2, &FlowParams::default()).unwrap();
        let mut sum = 0.0f64;
        let mut count = 0usize;
        let mut values = Vec::new();
        for y in 12..w - 12 {
            for x in 12..w - 12 {
                let i = y * w + x;
                let epe =
                    (((flow.dx[i] - sx).powi(2) + (flow.dy[i] - sy).powi(2)) as f64).sqrt();
                sum += epe;
                count += 1;
                values.push((flow.dx[i], flow.dy[i]));
            }
        }
        let mean_epe = sum / count as f64;
        assert!(mean_epe <= 0.2, "mean endpoint error {mean_epe}");

        // pure translation: interior flow spatially constant within 0.1 px std
        let mx: f32 = values.iter().map(|v| v.0).sum::<f32>() / count as f32;
        let my: f32 = values.iter().map(|v| v.1).sum::<f32>() / count as f32;
        let var: f32 = values
            .iter()
            .map(|v| (v.0 - mx).powi(2) + (v.1 - my).powi(2))
            .sum::<f32>()
            / count as f32;
        assert!(var.sqrt() <= 0.1, "flow std {} too high", var.sqrt());
    }

    #[test]
    fn identical_frames_zero_flow() {
        let w = 64;
        let f = Frame::from_data(w, w, quad_image(w, w, texture)).unwrap();
        let flow = estimate_flow(&f, &f, &FlowParams::default()).unwrap();
        let max = flow
            .dx
            .iter()
            .chain(&flow.dy)
            .fold(0.0f32, |m, v| m.max(v.abs()));
        assert!(max <= 1e-3, "max flow {max}");
    }

    #[test]
    fn static_video_unchanged() {
        let w = 48;
        let f = Frame::from_data(w, w, quad_image(w, w, texture)).unwrap();
        let video = Video::new(vec![f.clone(); 4], 1.0).unwrap();
        let restored = restore_video_peof(&video, &FlowParams::default()).unwrap();
        for frame in restored.frames() {
            for (a, b) in frame.data().iter().zip(f.data()) {
                assert!((a - b).abs() < 1e-3);
            }
        }
    }
}
