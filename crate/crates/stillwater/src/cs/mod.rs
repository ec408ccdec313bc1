//! Dense motion-field reconstruction from sparse displacement trajectories.
//!
//! The motion vector field is modeled as one complex 3D signal
//! `d = d_x + i d_y` over `(x, y, t)` with a sparse representation in the
//! 3D-DFT basis. Tracked displacement trajectories provide measurements of
//! `d` at a few grid sites; a LASSO over the subsampled DFT synthesis
//! operator recovers the coefficient volume, which is then synthesized and
//! spatially upsampled to the full motion field.

mod fft;
mod lasso;
mod operator;

pub use fft::fft3_unitary;
pub use lasso::{cross_validate, solve_lasso, CrossValReport, IterationRecord, SolveResult};
pub use operator::{adjoint, coherence, forward};

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{Frame, Video};
use crate::tracking::DisplacementTrajectory;

/// Dimensions of a 3D volume over `(x, y, t)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims3 {
    pub nx: usize,
    pub ny: usize,
    pub nt: usize,
}

impl Dims3 {
    pub fn new(nx: usize, ny: usize, nt: usize) -> Self {
        Self { nx, ny, nt }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nt
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, ix: usize, iy: usize, t: usize) -> usize {
        (t * self.ny + iy) * self.nx + ix
    }
}

/// The complex motion vector field: real part is the x displacement,
/// imaginary part the y displacement, both in pixels.
#[derive(Debug, Clone)]
pub struct MotionField {
    dims: Dims3,
    values: Vec<Complex64>,
}

impl MotionField {
    pub fn new(dims: Dims3, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != dims.len() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} values", dims.len()),
                got: format!("{}", values.len()),
            });
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::InvalidInput("non-finite motion value".into()));
        }
        Ok(Self { dims, values })
    }

    pub fn zeros(dims: Dims3) -> Self {
        Self {
            dims,
            values: vec![Complex64::new(0.0, 0.0); dims.len()],
        }
    }

    pub fn dims(&self) -> Dims3 {
        self.dims
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    #[inline]
    pub fn at(&self, ix: usize, iy: usize, t: usize) -> Complex64 {
        self.values[self.dims.index(ix, iy, t)]
    }

    #[inline]
    pub fn set(&mut self, ix: usize, iy: usize, t: usize, v: Complex64) {
        let i = self.dims.index(ix, iy, t);
        self.values[i] = v;
    }

    /// RMS displacement magnitude over all sites and frames.
    pub fn rms(&self) -> f64 {
        let sum: f64 = self.values.iter().map(|v| v.norm_sqr()).sum();
        (sum / self.values.len() as f64).sqrt()
    }

    /// Saves the field in the binary dump format: magic `MVF1`, dims
    /// `(W, H, T)` as little-endian u32, then row-major (t-major, then row)
    /// little-endian f32 pairs `(dx, dy)` per site.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = Vec::with_capacity(16 + self.values.len() * 8);
        out.extend_from_slice(b"MVF1");
        out.extend_from_slice(&(self.dims.nx as u32).to_le_bytes());
        out.extend_from_slice(&(self.dims.ny as u32).to_le_bytes());
        out.extend_from_slice(&(self.dims.nt as u32).to_le_bytes());
        for v in &self.values {
            out.extend_from_slice(&(v.re as f32).to_le_bytes());
            out.extend_from_slice(&(v.im as f32).to_le_bytes());
        }
        let mut file = std::fs::File::create(path)?;
        file.write_all(&out)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        if bytes.len() < 16 || &bytes[0..4] != b"MVF1" {
            return Err(Error::InvalidInput(format!(
                "{}: not a motion field dump",
                path.display()
            )));
        }
        let rd_u32 = |off: usize| {
            u32::from_le_bytes([bytes[off], bytes[off + 1], bytes[off + 2], bytes[off + 3]])
                as usize
        };
        let dims = Dims3::new(rd_u32(4), rd_u32(8), rd_u32(12));
        let expected = 16 + dims.len() * 8;
        if bytes.len() != expected {
            return Err(Error::InvalidInput(format!(
                "{}: expected {} bytes, got {}",
                path.display(),
                expected,
                bytes.len()
            )));
        }
        let mut values = Vec::with_capacity(dims.len());
        for i in 0..dims.len() {
            let off = 16 + i * 8;
            let re = f32::from_le_bytes([
                bytes[off],
                bytes[off + 1],
                bytes[off + 2],
                bytes[off + 3],
            ]);
            let im = f32::from_le_bytes([
                bytes[off + 4],
                bytes[off + 5],
                bytes[off + 6],
                bytes[off + 7],
            ]);
            values.push(Complex64::new(re as f64, im as f64));
        }
        MotionField::new(dims, values)
    }
}

/// A complex 3D-DFT coefficient volume.
#[derive(Debug, Clone)]
pub struct CoeffVolume {
    dims: Dims3,
    values: Vec<Complex64>,
}

impl CoeffVolume {
    pub fn zeros(dims: Dims3) -> Self {
        Self {
            dims,
            values: vec![Complex64::new(0.0, 0.0); dims.len()],
        }
    }

    pub fn new(dims: Dims3, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != dims.len() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} values", dims.len()),
                got: format!("{}", values.len()),
            });
        }
        Ok(Self { dims, values })
    }

    pub fn dims(&self) -> Dims3 {
        self.dims
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    /// Synthesizes the coefficient volume into the motion field on the same
    /// grid (unitary inverse 3D DFT).
    pub fn synthesize(&self) -> MotionField {
        let mut values = self.values.clone();
        fft::fft3_unitary(&mut values, self.dims, true);
        MotionField {
            dims: self.dims,
            values,
        }
    }

    /// Fraction of frequency bins needed to capture `energy_fraction` of the
    /// total squared magnitude.
    pub fn sparsity_fraction(&self, energy_fraction: f64) -> f64 {
        let mut mags: Vec<f64> = self.values.iter().map(|v| v.norm_sqr()).collect();
        let total: f64 = mags.iter().sum();
        if total == 0.0 {
            return 0.0;
        }
        mags.sort_by(|a, b| b.total_cmp(a));
        let mut acc = 0.0;
        for (k, m) in mags.iter().enumerate() {
            acc += m;
            if acc >= energy_fraction * total {
                return (k + 1) as f64 / mags.len() as f64;
            }
        }
        1.0
    }
}

/// Measurement locations and values defining the sampling operator.
///
/// Each entry pairs a `(ix, iy, t)` site on the (possibly downsampled) grid
/// with one complex measurement `d_x + i d_y`.
#[derive(Debug, Clone)]
pub struct SamplingPlan {
    dims: Dims3,
    sites: Vec<(u32, u32, u32)>,
    linear: Vec<usize>,
    measurements: Vec<Complex64>,
}

impl SamplingPlan {
    pub fn new(dims: Dims3, sites: Vec<(u32, u32, u32)>, measurements: Vec<Complex64>) -> Result<Self> {
        if sites.len() != measurements.len() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} measurements", sites.len()),
                got: format!("{}", measurements.len()),
            });
        }
        let mut linear = Vec::with_capacity(sites.len());
        let mut seen = std::collections::HashSet::with_capacity(sites.len());
        for &(ix, iy, t) in &sites {
            if ix as usize >= dims.nx || iy as usize >= dims.ny || t as usize >= dims.nt {
                return Err(Error::InvalidInput(format!(
                    "site ({ix}, {iy}, {t}) out of range for {dims:?}"
                )));
            }
            let idx = dims.index(ix as usize, iy as usize, t as usize);
            if !seen.insert(idx) {
                return Err(Error::InvalidInput(format!(
                    "duplicate site ({ix}, {iy}, {t})"
                )));
            }
            linear.push(idx);
        }
        Ok(Self {
            dims,
            sites,
            linear,
            measurements,
        })
    }

    pub fn dims(&self) -> Dims3 {
        self.dims
    }

    pub fn sites(&self) -> &[(u32, u32, u32)] {
        &self.sites
    }

    pub(crate) fn linear_indices(&self) -> &[usize] {
        &self.linear
    }

    pub fn measurements(&self) -> &[Complex64] {
        &self.measurements
    }

    pub fn len(&self) -> usize {
        self.measurements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measurements.is_empty()
    }

    /// Restricts the plan to a subset of measurement indices.
    pub fn subset(&self, keep: &[usize]) -> SamplingPlan {
        let sites = keep.iter().map(|&i| self.sites[i]).collect();
        let linear = keep.iter().map(|&i| self.linear[i]).collect();
        let measurements = keep.iter().map(|&i| self.measurements[i]).collect();
        SamplingPlan {
            dims: self.dims,
            sites,
            linear,
            measurements,
        }
    }
}

/// Solver configuration for the LASSO stage.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverParams {
    /// Regularization weight. Zero means "choose by cross-validation".
    pub lambda: f64,
    pub max_iters: usize,
    /// Relative-objective-change stopping threshold.
    pub tol: f64,
    /// Spatial downsampling factor for the coarse measurement grid.
    pub downsample: usize,
    /// Fraction of measurements held out during cross-validation.
    pub cv_holdout: f64,
    /// Candidate lambda values; empty means the default log grid scaled by
    /// the data.
    pub lambda_grid: Vec<f64>,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            lambda: 0.0,
            max_iters: 2000,
            tol: 1e-6,
            downsample: 8,
            cv_holdout: 0.10,
            lambda_grid: Vec::new(),
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<()> {
        if self.lambda < 0.0 {
            return Err(Error::InvalidInput("lambda must be >= 0".into()));
        }
        if !(0.0 < self.cv_holdout && self.cv_holdout < 1.0) {
            return Err(Error::InvalidInput("cv_holdout must be in (0, 1)".into()));
        }
        if ![1, 2, 4, 8, 16].contains(&self.downsample) {
            return Err(Error::InvalidInput(
                "downsample must be one of 1, 2, 4, 8, 16".into(),
            ));
        }
        Ok(())
    }
}

/// Builds a measurement plan from displacement trajectories.
///
/// Anchors are rounded to the nearest node of the coarse grid; trajectories
/// colliding on the same node are averaged per frame. Fails if fewer than 8
/// distinct sites remain.
pub fn build_plan(
    dts: &[DisplacementTrajectory],
    full_dims: Dims3,
    downsample: usize,
) -> Result<SamplingPlan> {
    if dts.is_empty() {
        return Err(Error::InvalidInput("no displacement trajectories".into()));
    }
    let nt = full_dims.nt;
    for dt in dts {
        if dt.offsets.len() != nt {
            return Err(Error::DimensionMismatch {
                expected: format!("{nt} offsets"),
                got: format!("{}", dt.offsets.len()),
            });
        }
    }
    let coarse = Dims3::new(
        full_dims.nx.div_ceil(downsample),
        full_dims.ny.div_ceil(downsample),
        nt,
    );
    // node -> (sum of complex offsets per t, count)
    let mut buckets: std::collections::HashMap<(u32, u32), (Vec<Complex64>, usize)> =
        std::collections::HashMap::new();
    for dt in dts {
        let ix = ((dt.anchor.0 / downsample as f32).round() as i64).clamp(0, coarse.nx as i64 - 1)
            as u32;
        let iy = ((dt.anchor.1 / downsample as f32).round() as i64).clamp(0, coarse.ny as i64 - 1)
            as u32;
        let entry = buckets
            .entry((ix, iy))
            .or_insert_with(|| (vec![Complex64::new(0.0, 0.0); nt], 0));
        for (t, &(dx, dy)) in dt.offsets.iter().enumerate() {
            entry.0[t] += Complex64::new(dx as f64, dy as f64);
        }
        entry.1 += 1;
    }
    if buckets.len() < 8 {
        return Err(Error::DegenerateSampling {
            distinct: buckets.len(),
            min: 8,
        });
    }
    let mut nodes: Vec<_> = buckets.into_iter().collect();
    nodes.sort_by_key(|((ix, iy), _)| (*iy, *ix));
    let mut sites = Vec::with_capacity(nodes.len() * nt);
    let mut measurements = Vec::with_capacity(nodes.len() * nt);
    for ((ix, iy), (sums, count)) in nodes {
        for (t, s) in sums.into_iter().enumerate() {
            sites.push((ix, iy, t as u32));
            measurements.push(s / count as f64);
        }
    }
    SamplingPlan::new(coarse, sites, measurements)
}

/// Synthesizes the coarse coefficient volume and bilinearly upsamples the
/// field per frame to the full grid.
pub fn reconstruct_field(theta: &CoeffVolume, full_dims: Dims3, downsample: usize) -> MotionField {
    let coarse_field = theta.synthesize();
    if downsample == 1 {
        return coarse_field;
    }
    let cd = coarse_field.dims();
    let mut out = MotionField::zeros(full_dims);
    let inv = 1.0 / downsample as f64;
    let frame_len = full_dims.nx * full_dims.ny;
    out.values
        .par_chunks_mut(frame_len)
        .enumerate()
        .for_each(|(t, frame)| {
            for y in 0..full_dims.ny {
                let cy = (y as f64 * inv).min((cd.ny - 1) as f64);
                let y0 = cy.floor() as usize;
                let y1 = (y0 + 1).min(cd.ny - 1);
                let fy = cy - y0 as f64;
                for x in 0..full_dims.nx {
                    let cx = (x as f64 * inv).min((cd.nx - 1) as f64);
                    let x0 = cx.floor() as usize;
                    let x1 = (x0 + 1).min(cd.nx - 1);
                    let fx = cx - x0 as f64;
                    let p00 = coarse_field.at(x0, y0, t);
                    let p10 = coarse_field.at(x1, y0, t);
                    let p01 = coarse_field.at(x0, y1, t);
                    let p11 = coarse_field.at(x1, y1, t);
                    let top = p00 + (p10 - p00) * fx;
                    let bot = p01 + (p11 - p01) * fx;
                    frame[y * full_dims.nx + x] = top + (bot - top) * fy;
                }
            }
        });
    out
}

/// Restores a distorted video by sampling each frame at the displaced
/// coordinates: `I_r(x, y, t) = I_d(x + d_x, y + d_y, t)`.
pub fn restore_video_cs(video: &Video, field: &MotionField) -> Result<Video> {
    let dims = field.dims();
    if dims.nx != video.width() || dims.ny != video.height() || dims.nt != video.len() {
        return Err(Error::DimensionMismatch {
            expected: format!("{}x{}x{}", video.width(), video.height(), video.len()),
            got: format!("{}x{}x{}", dims.nx, dims.ny, dims.nt),
        });
    }
    let frames: Vec<Frame> = video
        .frames()
        .par_iter()
        .enumerate()
        .map(|(t, frame)| {
            let mut data = vec![0.0f32; dims.nx * dims.ny];
            for y in 0..dims.ny {
                for x in 0..dims.nx {
                    let d = field.at(x, y, t);
                    data[y * dims.nx + x] =
                        frame.sample_bilinear(x as f32 + d.re as f32, y as f32 + d.im as f32);
                }
            }
            Frame::from_data(dims.nx, dims.ny, data).expect("restored frame valid")
        })
        .collect();
    Video::new(frames, video.fps())
}
