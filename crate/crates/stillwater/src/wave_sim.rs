//! Synthetic wavy-water surfaces, the refraction displacement field they
//! induce, and ground-truth distorted videos.
//!
//! The surface is a superposition of sinusoids. Under the small-slope
//! paraxial refraction approximation the apparent displacement is
//! proportional to the surface gradient, `d = alpha * grad z`, with
//! `alpha = h_pixels * (1 - 1/n_w)` for water (`n_w = 1.33`). The gradient
//! is evaluated analytically, so the true field is an exact sum of
//! sinusoids and therefore exactly sparse in the 3D DFT basis.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cs::{Dims3, MotionField};
use crate::error::Result;
use crate::imaging::{Frame, Video};

/// Refractive index of water.
pub const WATER_REFRACTIVE_INDEX: f64 = 1.33;

/// Default scene depth expressed in pixels (25 cm at 10 px/cm).
pub const DEFAULT_DEPTH_PIXELS: f64 = 250.0;

/// Displacement pixels per unit surface slope at the given scene depth.
pub fn depth_gain(depth_pixels: f64) -> f64 {
    depth_pixels * (1.0 - 1.0 / WATER_REFRACTIVE_INDEX)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SineWave {
    /// Surface-height amplitude (pixel-equivalent units).
    pub amplitude: f64,
    /// Spatial wavevector in radians/pixel.
    pub wavevector: (f64, f64),
    /// Temporal frequency in radians/frame.
    pub angular_frequency: f64,
    pub phase: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SurfaceModel {
    pub waves: Vec<SineWave>,
    /// Pixels of displacement per unit surface slope.
    pub depth_gain: f64,
}

impl SurfaceModel {
    /// Surface height `z(x, y, t)`: the analytic sinusoid sum.
    pub fn surface_height(&self, x: f64, y: f64, t: f64) -> f64 {
        self.waves
            .iter()
            .map(|w| {
                w.amplitude
                    * (w.wavevector.0 * x + w.wavevector.1 * y + w.angular_frequency * t + w.phase)
                        .sin()
            })
            .sum()
    }

    /// Analytic displacement `alpha * grad z` at a continuous coordinate.
    #[inline]
    pub fn displacement_at(&self, x: f64, y: f64, t: f64) -> (f64, f64) {
        let mut dx = 0.0;
        let mut dy = 0.0;
        for w in &self.waves {
            let c = (w.wavevector.0 * x + w.wavevector.1 * y + w.angular_frequency * t + w.phase)
                .cos();
            dx += w.amplitude * w.wavevector.0 * c;
            dy += w.amplitude * w.wavevector.1 * c;
        }
        (self.depth_gain * dx, self.depth_gain * dy)
    }

    /// Analytic RMS displacement magnitude (over whole periods).
    pub fn analytic_rms(&self) -> f64 {
        let sum: f64 = self
            .waves
            .iter()
            .map(|w| {
                let k2 = w.wavevector.0 * w.wavevector.0 + w.wavevector.1 * w.wavevector.1;
                (self.depth_gain * w.amplitude).powi(2) * k2 / 2.0
            })
            .sum();
        sum.sqrt()
    }

    /// Scales every amplitude so the analytic RMS displacement equals
    /// `target` pixels.
    pub fn rescale_to_sigma(&mut self, target: f64) {
        let rms = self.analytic_rms();
        if rms > 0.0 {
            let s = target / rms;
            for w in &mut self.waves {
                w.amplitude *= s;
            }
        }
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let text = toml::to_string_pretty(self)
            .map_err(|e| crate::error::Error::InvalidInput(e.to_string()))?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| crate::error::Error::InvalidInput(e.to_string()))
    }
}

/// The displacement field sampled on a grid, in the restore convention
/// (real = dx, imaginary = dy; the field that maps an undistorted site to
/// its apparent offset over time).
pub fn displacement_field(model: &SurfaceModel, dims: Dims3) -> MotionField {
    let mut field = MotionField::zeros(dims);
    let frame_len = dims.nx * dims.ny;
    field
        .values_mut()
        .par_chunks_mut(frame_len)
        .enumerate()
        .for_each(|(t, frame)| {
            for y in 0..dims.ny {
                for x in 0..dims.nx {
                    let (dx, dy) = model.displacement_at(x as f64, y as f64, t as f64);
                    frame[y * dims.nx + x] = num_complex::Complex64::new(dx, dy);
                }
            }
        });
    field
}

/// A synthetic scene: the distorted video, the ground-truth motion field in
/// the restore convention, the clean frame, and the generating seed.
#[derive(Debug, Clone)]
pub struct GroundTruthBundle {
    pub distorted: Video,
    pub true_field: MotionField,
    pub clean: Frame,
    pub rng_seed: u64,
}

/// Renders the distorted video for a clean frame.
///
/// The recorded `true_field` is the restoring field `d`: sampling the
/// distorted frame at `x + d(x)` recovers the clean frame. The distortion
/// warp is the exact inverse of that map, found per pixel by fixed-point
/// iteration on the analytic field, so restoration with the true field is
/// an identity up to bilinear interpolation.
pub fn synthesize(clean: &Frame, model: &SurfaceModel, t_total: usize, seed: u64) -> Result<GroundTruthBundle> {
    let dims = Dims3::new(clean.width(), clean.height(), t_total);
    let true_field = displacement_field(model, dims);

    let frames: Vec<Frame> = (0..t_total)
        .into_par_iter()
        .map(|t| {
            let mut data = vec![0.0f32; dims.nx * dims.ny];
            for y in 0..dims.ny {
                for x in 0..dims.nx {
                    // solve u = -d(p + u) so that the restore sample lands
                    // back on the clean pixel
                    let px = x as f64;
                    let py = y as f64;
                    let (mut ux, mut uy) = model.displacement_at(px, py, t as f64);
                    ux = -ux;
                    uy = -uy;
                    for _ in 0..8 {
                        let (dx, dy) = model.displacement_at(px + ux, py + uy, t as f64);
                        let nx = -dx;
                        let ny = -dy;
                        if (nx - ux).abs() + (ny - uy).abs() < 1e-9 {
                            ux = nx;
                            uy = ny;
                            break;
                        }
                        ux = nx;
                        uy = ny;
                    }
                    data[y * dims.nx + x] =
                        clean.sample_bilinear((px + ux) as f32, (py + uy) as f32);
                }
            }
            Frame::from_data(dims.nx, dims.ny, data).expect("distorted frame valid")
        })
        .collect();

    Ok(GroundTruthBundle {
        distorted: Video::new(frames, 50.0)?,
        true_field,
        clean: clean.clone(),
        rng_seed: seed,
    })
}

/// Draws a random surface model. Wavelengths are uniform in [32, 128] px,
/// directions uniform on the circle, temporal frequencies uniform in
/// [0.1, 0.6] rad/frame, phases uniform; amplitudes are rescaled so the
/// analytic RMS displacement equals `target_sigma_motion`.
pub fn random_model(seed: u64, waves: usize, target_sigma_motion: f64) -> SurfaceModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = SurfaceModel {
        waves: (0..waves)
            .map(|_| {
                let wavelength: f64 = rng.gen_range(32.0..128.0);
                let dir: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                let k = std::f64::consts::TAU / wavelength;
                SineWave {
                    amplitude: rng.gen_range(0.5..1.5),
                    wavevector: (k * dir.cos(), k * dir.sin()),
                    angular_frequency: rng.gen_range(0.1..0.6),
                    phase: rng.gen_range(0.0..std::f64::consts::TAU),
                }
            })
            .collect(),
        depth_gain: depth_gain(DEFAULT_DEPTH_PIXELS),
    };
    model.rescale_to_sigma(target_sigma_motion);
    model
}

/// A model whose sinusoids complete whole numbers of cycles over the given
/// grid, guaranteeing exact DFT sparsity of the displacement field. Cycle
/// counts are drawn so spatial wavelengths stay at or above 128 px (shorter
/// waves curve too sharply across a tracking window and bias the tracked
/// positions) and temporal rates stay moderate relative to the clip length.
pub fn commensurate_model(seed: u64, waves: usize, dims: Dims3, target_sigma_motion: f64) -> SurfaceModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_cx = (dims.nx / 128).max(1) as i64;
    let max_cy = (dims.ny / 128).max(1) as i64;
    let mut model = SurfaceModel {
        waves: (0..waves)
            .map(|_| {
                let mut cx = 0i64;
                let mut cy = 0i64;
                while cx == 0 && cy == 0 {
                    cx = rng.gen_range(-max_cx..=max_cx);
                    cy = rng.gen_range(-max_cy..=max_cy);
                }
                // at least two temporal cycles (a single slow cycle leaves
                // large half-video mean offsets that look like point drift)
                // but no more than one cycle per ~12 frames, which keeps the
                // frame-to-frame motion trackable
                let max_ct = (dims.nt as i64 / 12).clamp(2, 8);
                let ct: i64 = rng.gen_range(2..=max_ct);
                SineWave {
                    amplitude: rng.gen_range(0.5..1.5),
                    wavevector: (
                        std::f64::consts::TAU * cx as f64 / dims.nx as f64,
                        std::f64::consts::TAU * cy as f64 / dims.ny as f64,
                    ),
                    angular_frequency: std::f64::consts::TAU * ct as f64 / dims.nt as f64,
                    phase: rng.gen_range(0.0..std::f64::consts::TAU),
                }
            })
            .collect(),
        depth_gain: depth_gain(DEFAULT_DEPTH_PIXELS),
    };
    model.rescale_to_sigma(target_sigma_motion);
    model
}

/// A deterministic high-texture test image: smoothed value noise with a
/// faint grid overlay, normalized into [0.05, 0.95]. Useful for demos and
/// synthetic benchmarks when no clean photograph is at hand.
pub fn test_card(width: usize, height: usize, seed: u64) -> Frame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise: Vec<f32> = (0..width * height).map(|_| rng.gen_range(0.0..1.0)).collect();
    let kernel = [0.0702, 0.1311, 0.1907, 0.2161, 0.1907, 0.1311, 0.0702];
    let mut smooth = crate::tracking::blur_separable(&noise, width, height, &kernel);
    // second octave of finer detail keeps corners plentiful
    let fine: Vec<f32> = (0..width * height).map(|_| rng.gen_range(0.0..1.0)).collect();
    let fine = crate::tracking::blur_separable(&fine, width, height, &[0.25, 0.5, 0.25]);
    for (s, f) in smooth.iter_mut().zip(&fine) {
        *s = 0.7 * *s + 0.3 * f;
    }
    let lo = smooth.iter().cloned().fold(f32::INFINITY, f32::min);
    let hi = smooth.iter().cloned().fold(f32::NEG_INFINITY, f32::max);
    let scale = if hi > lo { 0.9 / (hi - lo) } else { 0.0 };
    let data: Vec<f32> = smooth
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let x = i % width;
            let y = i / width;
            let grid = if x % 24 == 0 || y % 24 == 0 { -0.18 } else { 0.0 };
            (0.05 + (v - lo) * scale + grid).clamp(0.0, 1.0)
        })
        .collect();
    Frame::from_data(width, height, data).expect("test card valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cs::fft3_unitary;

    #[test]
    fn surface_height_single_wave() {
        let model = SurfaceModel {
            waves: vec![SineWave {
                amplitude: 1.0,
                wavevector: (std::f64::consts::TAU / 64.0, 0.0),
                angular_frequency: 0.0,
                phase: std::f64::consts::FRAC_PI_2,
            }],
            depth_gain: 1.0,
        };
        assert!((model.surface_height(0.0, 0.0, 17.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_amplitude_zero_everywhere() {
        let model = SurfaceModel {
            waves: vec![SineWave {
                amplitude: 0.0,
                wavevector: (0.1, 0.2),
                angular_frequency: 0.3,
                phase: 0.4,
            }],
            depth_gain: 5.0,
        };
        assert_eq!(model.surface_height(3.0, 4.0, 5.0), 0.0);
        let f = displacement_field(&model, Dims3::new(8, 8, 2));
        assert!(f.values().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn superposition_is_sum_of_waves() {
        let model = random_model(3, 4, 2.0);
        let (x, y, t) = (13.7, 41.2, 6.5);
        let total = model.surface_height(x, y, t);
        let sum: f64 = model
            .waves
            .iter()
            .map(|w| {
                SurfaceModel {
                    waves: vec![w.clone()],
                    depth_gain: model.depth_gain,
                }
                .surface_height(x, y, t)
            })
            .sum();
        assert!((total - sum).abs() < 1e-12);
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let model = random_model(11, 3, 4.0);
        let dims = Dims3::new(32, 32, 4);
        let field = displacement_field(&model, dims);
        let h = 1e-5;
        for &(x, y, t) in &[(5usize, 7usize, 1usize), (20, 3, 2), (14, 29, 0)] {
            let num_dx = model.depth_gain
                * (model.surface_height(x as f64 + h, y as f64, t as f64)
                    - model.surface_height(x as f64 - h, y as f64, t as f64))
                / (2.0 * h);
            let num_dy = model.depth_gain
                * (model.surface_height(x as f64, y as f64 + h, t as f64)
                    - model.surface_height(x as f64, y as f64 - h, t as f64))
                / (2.0 * h);
            let v = field.at(x, y, t);
            let scale = v.norm().max(1.0);
            assert!((v.re - num_dx).abs() / scale < 1e-6);
            assert!((v.im - num_dy).abs() / scale < 1e-6);
        }
    }

    #[test]
    fn random_model_is_deterministic_and_hits_sigma() {
        let a = random_model(99, 3, 6.0);
        let b = random_model(99, 3, 6.0);
        assert_eq!(
            toml::to_string(&a).unwrap(),
            toml::to_string(&b).unwrap()
        );
        // measured RMS of the generated field on a grid
        let dims = Dims3::new(256, 256, 64);
        let field = displacement_field(&a, dims);
        let rms = field.rms();
        assert!(
            (5.7..=6.3).contains(&rms),
            "field RMS {rms} outside [5.7, 6.3]"
        );
    }

    #[test]
    fn zero_amplitude_synthesis_reproduces_clean() {
        let clean = test_card(48, 48, 1);
        let model = SurfaceModel {
            waves: vec![SineWave {
                amplitude: 0.0,
                wavevector: (0.1, 0.1),
                angular_frequency: 0.2,
                phase: 0.0,
            }],
            depth_gain: depth_gain(DEFAULT_DEPTH_PIXELS),
        };
        let bundle = synthesize(&clean, &model, 3, 0).unwrap();
        for frame in bundle.distorted.frames() {
            for (a, b) in frame.data().iter().zip(clean.data()) {
                assert!((a - b).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn commensurate_field_energy_concentrated() {
        let dims = Dims3::new(64, 64, 16);
        let waves = 3;
        let model = commensurate_model(5, waves, dims, 4.0);
        let field = displacement_field(&model, dims);
        let mut coeffs = field.values().to_vec();
        fft3_unitary(&mut coeffs, dims, false);
        let mut mags: Vec<f64> = coeffs.iter().map(|c| c.norm_sqr()).collect();
        let total: f64 = mags.iter().sum();
        mags.sort_by(|a, b| b.total_cmp(a));
        let budget = 4 * waves + 1;
        let top: f64 = mags.iter().take(budget).sum();
        assert!(
            top >= 0.999 * total,
            "only {:.4} of energy in {budget} bins",
            top / total
        );
    }

    #[test]
    fn temporal_mean_vanishes_over_whole_periods() {
        let dims = Dims3::new(32, 32, 20);
        let model = commensurate_model(8, 2, dims, 5.0);
        let field = displacement_field(&model, dims);
        for &(x, y) in &[(3usize, 5usize), (17, 23), (30, 1)] {
            let mut acc = num_complex::Complex64::new(0.0, 0.0);
            for t in 0..dims.nt {
                acc += field.at(x, y, t);
            }
            acc /= dims.nt as f64;
            assert!(acc.norm() < 1e-9, "temporal mean {acc} not ~0");
        }
    }
}
